"""K-state Markov model of a single UE-BS link.

Every link in the system is an i.i.d. copy of one finite Markov chain.
For the default three-state model the ordinals are outage=0, NLOS=1,
LOS=2, so "better channel" always means "larger ordinal".
"""

import hashlib
from dataclasses import dataclass, field

import numpy as np
from scipy import optimize

from .errors import CalibrationError, DegeneracyError, ValidationError

OUTAGE, NLOS, LOS = 0, 1, 2

#: Row sums further off than this are rejected outright.
ROW_SUM_REJECT = 1e-9
#: Eigenvalues this close to 1 count as stationary directions.
_UNIT_EIG_TOL = 1e-8


class ChannelMatrix:
    """Row-stochastic K x K transition matrix, immutable after construction.

    Rows off unit sum by more than ``ROW_SUM_REJECT`` are rejected; smaller
    drift is renormalized away so that stored rows sum to 1 to within 1e-12.
    """

    def __init__(self, p):
        arr = np.asarray(p, dtype=float)
        if arr.ndim != 2 or arr.shape[0] != arr.shape[1] or arr.shape[0] < 1:
            raise ValidationError(f"transition matrix must be square, got shape {arr.shape}")
        if not np.all(np.isfinite(arr)):
            raise ValidationError("transition matrix entries must be finite")
        if np.any(arr < -1e-15) or np.any(arr > 1 + 1e-12):
            raise ValidationError("transition probabilities must lie in [0, 1]")
        arr = np.clip(arr, 0.0, None)
        sums = arr.sum(axis=1)
        off = np.abs(sums - 1.0)
        if np.any(off > ROW_SUM_REJECT):
            bad = int(np.argmax(off))
            raise ValidationError(
                f"row {bad} sums to {sums[bad]:.12g}, off unit by more than {ROW_SUM_REJECT}"
            )
        arr = arr / sums[:, None]
        arr.setflags(write=False)
        self._p = arr

    @property
    def p(self) -> np.ndarray:
        return self._p

    @property
    def k(self) -> int:
        return self._p.shape[0]

    def row(self, i: int) -> np.ndarray:
        return self._p[i]

    def digest(self) -> str:
        """Stable content hash, used to key policy caches."""
        h = hashlib.sha256()
        h.update(str(self.k).encode())
        h.update(np.ascontiguousarray(self._p).tobytes())
        return h.hexdigest()

    def __eq__(self, other):
        return isinstance(other, ChannelMatrix) and np.array_equal(self._p, other._p)

    def __hash__(self):
        return hash(self.digest())

    def __repr__(self):
        rows = "; ".join(" ".join(f"{x:.6g}" for x in r) for r in self._p)
        return f"ChannelMatrix([{rows}])"


#: Calibrated urban instance: dominant link state is NLOS, LOS decays fast.
PRESETS: dict[str, ChannelMatrix] = {
    "urban-nlos-dominant": ChannelMatrix(
        [
            [0.55, 0.30, 0.15],
            [0.01, 0.80, 0.19],
            [0.38, 0.40, 0.22],
        ]
    ),
}

DEFAULT_PRESET = "urban-nlos-dominant"


def preset(name: str) -> ChannelMatrix:
    try:
        return PRESETS[name]
    except KeyError:
        raise ValidationError(
            f"unknown channel preset {name!r}; known: {sorted(PRESETS)}"
        ) from None


@dataclass(frozen=True)
class CalibrationTargets:
    """Desired stationary distribution and per-state mean holding times (slots)."""

    pi_target: tuple[float, ...]
    t_avg: tuple[float, ...]

    def __post_init__(self):
        pi = np.asarray(self.pi_target, dtype=float)
        t = np.asarray(self.t_avg, dtype=float)
        if pi.ndim != 1 or pi.shape != t.shape:
            raise ValidationError("pi_target and t_avg must be vectors of equal length")
        if np.any(pi < 0) or abs(pi.sum() - 1.0) > 1e-9:
            raise ValidationError("pi_target must be a probability vector")
        if np.any(t < 1):
            raise ValidationError("every mean holding time must be >= 1 slot")
        object.__setattr__(self, "pi_target", tuple(float(x) for x in pi))
        object.__setattr__(self, "t_avg", tuple(float(x) for x in t))

    @property
    def k(self) -> int:
        return len(self.pi_target)

    def diag_target(self) -> np.ndarray:
        """Self-transition probabilities implied by the holding times."""
        return 1.0 - 1.0 / np.asarray(self.t_avg)


@dataclass(frozen=True)
class CalibrationResult:
    matrix: ChannelMatrix
    objective: float
    stationarity_residual: float
    row_sum_residual: float
    diag_target: tuple[float, ...] = field(repr=False)


def steady_state(matrix: ChannelMatrix) -> np.ndarray:
    """Unique stationary distribution pi with pi P = pi.

    Raises DegeneracyError when the chain has no unique stationary
    distribution (eigenvalue 1 with multiplicity > 1, e.g. the identity).
    """
    P = matrix.p
    k = matrix.k
    if k == 1:
        return np.array([1.0])
    eigvals = np.linalg.eigvals(P)
    n_unit = int(np.sum(np.abs(eigvals - 1.0) < _UNIT_EIG_TOL))
    if n_unit != 1:
        raise DegeneracyError(
            f"chain has {n_unit} stationary directions; no unique steady state"
        )
    # pi (P - I) = 0 with sum(pi) = 1, solved as an overdetermined system.
    A = np.vstack([P.T - np.eye(k), np.ones(k)])
    b = np.zeros(k + 1)
    b[-1] = 1.0
    pi, *_ = np.linalg.lstsq(A, b, rcond=None)
    pi = np.clip(pi, 0.0, None)
    pi /= pi.sum()
    resid = float(np.max(np.abs(pi @ P - pi)))
    if resid > 1e-10:
        raise DegeneracyError(f"stationary solve residual {resid:.3g} exceeds 1e-10")
    return pi


def holding_time_mean(matrix: ChannelMatrix, state: int) -> float:
    """Mean sojourn 1 / (1 - P[k][k]) in slots; errors on absorbing states."""
    p_stay = float(matrix.p[state, state])
    if p_stay >= 1.0:
        raise DegeneracyError(f"state {state} is absorbing; sojourn time diverges")
    return 1.0 / (1.0 - p_stay)


def sample_transition(current: int, matrix: ChannelMatrix, rng: np.random.Generator) -> int:
    """One Markov step from ``current``; deterministic given the rng stream."""
    if not 0 <= current < matrix.k:
        raise ValidationError(f"state {current} outside 0..{matrix.k - 1}")
    cum = np.cumsum(matrix.p[current])
    cum[-1] = 1.0
    return int(np.searchsorted(cum, rng.random(), side="right"))


def sample_paths(
    matrix: ChannelMatrix,
    n_chains: int,
    n_steps: int,
    rng: np.random.Generator,
    init: np.ndarray | None = None,
) -> np.ndarray:
    """Simulate ``n_chains`` i.i.d. chains for ``n_steps`` transitions.

    Returns an (n_steps + 1, n_chains) int8 array. Row 0 holds the initial
    states, drawn from the stationary distribution when ``init`` is None.
    """
    cum = np.cumsum(matrix.p, axis=1)
    cum[:, -1] = 1.0
    out = np.empty((n_steps + 1, n_chains), dtype=np.int8)
    if init is None:
        cpi = np.cumsum(steady_state(matrix))
        cpi[-1] = 1.0
        out[0] = np.searchsorted(cpi, rng.random(n_chains), side="right")
    else:
        out[0] = np.asarray(init, dtype=np.int8)
    u = rng.random((n_steps, n_chains))
    for t in range(n_steps):
        # searchsorted per row: count of cumulative cells <= u
        out[t + 1] = (u[t][:, None] >= cum[out[t]]).sum(axis=1)
    return out


def calibrate_matrix(targets: CalibrationTargets) -> CalibrationResult:
    """Fit a row-stochastic P whose diagonal tracks the holding-time targets.

    Minimizes sum_k (P[k][k] - (1 - 1/t_avg[k]))^2 subject to
    pi_target P = pi_target, P >= 0 and unit row sums. The rank-one matrix
    with every row equal to pi_target satisfies all constraints, so the
    program is always feasible; failures indicate a solver breakdown and
    are reported with the achieved residual.
    """
    k = targets.k
    d = targets.diag_target()
    pi = np.asarray(targets.pi_target)
    if k == 1:
        m = ChannelMatrix([[1.0]])
        return CalibrationResult(m, float((1.0 - d[0]) ** 2), 0.0, 0.0, (d[0],))

    diag_idx = np.arange(k) * (k + 1)

    def objective(x):
        return float(np.sum((x[diag_idx] - d) ** 2))

    def objective_grad(x):
        g = np.zeros(k * k)
        g[diag_idx] = 2.0 * (x[diag_idx] - d)
        return g

    # Equality constraints: unit row sums, then stationarity of pi_target.
    # The last stationarity component is implied by the rest (both sides sum
    # to 1), so it is dropped to keep the constraint matrix full rank.
    A = np.zeros((2 * k, k * k))
    b = np.concatenate([np.ones(k), pi])
    for i in range(k):
        A[i, i * k : (i + 1) * k] = 1.0
    for j in range(k):
        A[k + j, j::k] = pi
    A, b = A[:-1], b[:-1]
    constraints = {"type": "eq", "fun": lambda x: A @ x - b, "jac": lambda x: A}

    x0 = np.tile(pi, k)  # feasible start: every row equals pi_target
    res = optimize.minimize(
        objective,
        x0,
        jac=objective_grad,
        bounds=[(0.0, 1.0)] * (k * k),
        constraints=[constraints],
        method="SLSQP",
        options={"maxiter": 1000, "ftol": 1e-14},
    )
    x = res.x

    # Exact polish: project back onto the active affine constraint set so the
    # equality residual is at machine precision rather than solver tolerance.
    zero = x <= 1e-10
    x = x.copy()
    x[zero] = 0.0
    free = ~zero
    Af = A[:, free]
    corr, *_ = np.linalg.lstsq(Af, b - A @ x, rcond=None)
    x[free] += corr
    x = np.clip(x, 0.0, None)

    P = x.reshape(k, k)
    row_resid = float(np.max(np.abs(P.sum(axis=1) - 1.0)))
    stat_resid = float(np.max(np.abs(pi @ P - pi)))
    if not res.success and max(row_resid, stat_resid) > 1e-9:
        raise CalibrationError(
            f"calibration solver failed: {res.message}", residual=max(row_resid, stat_resid)
        )
    if max(row_resid, stat_resid) > 1e-9:
        raise CalibrationError(
            "calibrated matrix violates constraints", residual=max(row_resid, stat_resid)
        )
    matrix = ChannelMatrix(P)
    obj = float(np.sum((np.diag(matrix.p) - d) ** 2))
    return CalibrationResult(matrix, obj, stat_resid, row_resid, tuple(d))
