"""Slot-level Monte Carlo evaluation of association schemes.

The ground truth is N*L independent Markov links plus true cell loads.
Every UE decides simultaneously from its own latest channel measurements
plus the previous slot's loads; the chosen association carries the next
slot, whose channel realization and actual cell sizes set the payoff.
Decisions use estimates, payoffs use reality. The centralized upper
bound alone acts on current-slot channels (global information).
"""

import itertools
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np
from scipy import stats

from .channel import ChannelMatrix, preset, sample_paths
from .errors import ValidationError
from .rates import RateTable
from .states import StateSpace, canonicalize, enumerate_states

SCHEMES = ("mdp", "load", "rate", "channel", "upper")


@dataclass(frozen=True)
class SimConfig:
    bss: int = 3
    ues: int = 3
    channel: ChannelMatrix = field(default_factory=lambda: preset("urban-nlos-dominant"))
    rates: RateTable = field(default_factory=RateTable)
    oh: float = 0.1
    slots: int = 100_000
    warmup: int = 1000
    seeds: tuple[int, ...] = tuple(range(20))
    bandwidth_hz: float = 1e9
    slot_seconds: float = 125e-6
    symbols_per_slot: int = 30
    data_symbols: int = 24
    ub_charges_oh: bool = True

    def __post_init__(self):
        if self.bss < 1 or self.ues < 1:
            raise ValidationError("need at least one BS and one UE")
        if not 0.0 <= self.oh <= 1.0:
            raise ValidationError("handover cost fraction must lie in [0, 1]")
        if not self.slots > self.warmup >= 0:
            raise ValidationError("need slots > warmup >= 0")
        if not 0 < self.data_symbols <= self.symbols_per_slot:
            raise ValidationError("need 0 < data_symbols <= symbols_per_slot")
        if self.rates.k != self.channel.k:
            raise ValidationError("rate table length must match channel state count")
        if len(self.seeds) < 1:
            raise ValidationError("need at least one seed")
        object.__setattr__(self, "seeds", tuple(int(s) for s in self.seeds))

    @property
    def k(self) -> int:
        return self.channel.k


@dataclass(frozen=True)
class RunResult:
    """Metrics of one (scheme, seed) run over the measured window."""

    scheme: str
    seed: int
    avg_se: float
    handovers_total: int
    handovers_per_ue_per_kslot: float
    measured_slots: int


@dataclass
class Metrics:
    """Per-scheme aggregate over seeds, with 95% t-interval half-widths."""

    scheme: str
    config: SimConfig
    runs: list[RunResult]
    mean_se: float
    se_ci95: float
    mean_handovers: float
    handovers_ci95: float
    mean_handovers_per_ue_per_kslot: float
    gain_vs_channel: float | None = None


def throughput(se: float, config: SimConfig) -> float:
    """bits/s from spectral efficiency given the data-symbol fraction."""
    return se * config.bandwidth_hz * (config.data_symbols / config.symbols_per_slot)


def _ci95_halfwidth(values: np.ndarray) -> float:
    n = len(values)
    if n < 2:
        return 0.0
    return float(stats.t.ppf(0.975, n - 1) * np.std(values, ddof=1) / np.sqrt(n))


def _mdp_decider(config: SimConfig, space: StateSpace, policies):
    luts = [dict() for _ in policies]

    def decide(ch_t, loads_prev, prev_assign):
        loads_key = tuple(loads_prev.tolist())
        out = np.empty(config.ues, dtype=np.int64)
        for n in range(config.ues):
            b = int(prev_assign[n])
            ch_row = tuple(ch_t[n].tolist())
            key = (b, ch_row, loads_key)
            target = luts[n].get(key)
            if target is None:
                state = canonicalize(
                    (ch_row[b], loads_key[b]),
                    [(ch_row[l], loads_key[l]) for l in range(config.bss) if l != b],
                )
                action = int(policies[n][space.index_of(state)])
                if action == 0:
                    target = b
                else:
                    rest = sorted(
                        (
                            (ch_row[l], loads_key[l], l)
                            for l in range(config.bss)
                            if l != b
                        ),
                        key=lambda item: (item[0], item[1]),
                        reverse=True,
                    )
                    target = rest[action - 1][2]
                luts[n][key] = target
            out[n] = target
        return out

    return decide


def _upper_decider(config: SimConfig, rates_arr):
    n, L = config.ues, config.bss
    assignments = np.array(list(itertools.product(range(L), repeat=n)), dtype=np.int64)
    counts = np.empty_like(assignments)
    for j, a in enumerate(assignments):
        c = np.bincount(a, minlength=L)
        counts[j] = c[a]
    ue_idx = np.arange(n)
    oh = config.oh if config.ub_charges_oh else 0.0

    def decide(ch_t, loads_prev, prev_assign):
        gathered = rates_arr[ch_t][ue_idx[None, :], assignments]
        moved = assignments != prev_assign[None, :]
        score = ((1.0 - oh * moved) * gathered / counts).sum(axis=1)
        return assignments[int(np.argmax(score))]

    return decide


def _make_decider(config, scheme, space, policies, rates_arr, rng_tie):
    if scheme == "channel":
        return lambda ch_t, loads_prev, prev: ch_t.argmax(axis=1)
    if scheme == "rate":
        return lambda ch_t, loads_prev, prev: np.argmax(
            rates_arr[ch_t] / (loads_prev + 1.0), axis=1
        )
    if scheme == "load":
        # Uniform random tie-break: loads differ by integers, so adding
        # keys in [0, 0.5) never flips a strict ordering.
        def decide(ch_t, loads_prev, prev):
            keys = rng_tie.random((config.ues, config.bss))
            return np.argmin(loads_prev + 0.5 * keys, axis=1)

        return decide
    if scheme == "upper":
        return _upper_decider(config, rates_arr)
    if scheme == "mdp":
        return _mdp_decider(config, space, policies)
    raise ValidationError(f"unknown scheme {scheme!r}; known: {SCHEMES}")


def run_single(
    config: SimConfig,
    scheme: str,
    seed: int,
    policies=None,
    _paths: np.ndarray | None = None,
) -> RunResult:
    """One seeded run; bit-identical for identical (config, scheme, seed)."""
    L, N = config.bss, config.ues
    space = None
    if scheme == "mdp":
        if policies is None:
            raise ValidationError("scheme 'mdp' needs a policy profile")
        space = enumerate_states(L, config.k, N)
        for p in policies:
            if np.asarray(p).shape != (len(space),):
                raise ValidationError(
                    f"policy length does not match |S|={len(space)} for "
                    f"L={L}, K={config.k}, N={N}"
                )
        if len(policies) != N:
            raise ValidationError(f"need one policy per UE ({N}), got {len(policies)}")
    if _paths is None:
        _paths = simulate_channels(config, seed)
    ch = _paths.reshape(config.slots, N, L)
    rng_tie = np.random.default_rng(np.random.SeedSequence([int(seed), 1]))
    rates_arr = config.rates.as_array()
    decide = _make_decider(config, scheme, space, policies, rates_arr, rng_tie)

    assign = ch[0].argmax(axis=1)
    loads = np.bincount(assign, minlength=L)
    ue_idx = np.arange(N)
    se_sum = 0.0
    ho_total = 0
    measured = config.slots - config.warmup
    # Associations chosen in a slot take effect the next slot, matching the
    # reward model where the payoff realizes on the destination channel.
    # Distributed schemes therefore act on the previous slot's observations;
    # the clairvoyant upper bound sees the current slot's channels.
    clairvoyant = scheme == "upper"
    for t in range(config.slots):
        if t > 0:
            new_assign = decide(ch[t] if clairvoyant else ch[t - 1], loads, assign)
            moved = new_assign != assign
            assign = new_assign
            loads = np.bincount(assign, minlength=L)
        else:
            moved = np.zeros(N, dtype=bool)
        if t >= config.warmup:
            se = (1.0 - config.oh * moved) * rates_arr[ch[t, ue_idx, assign]] / loads[assign]
            se_sum += float(se.sum())
            ho_total += int(moved.sum())
    return RunResult(
        scheme=scheme,
        seed=int(seed),
        avg_se=se_sum / (N * measured),
        handovers_total=ho_total,
        handovers_per_ue_per_kslot=ho_total / N / (measured / 1000.0),
        measured_slots=measured,
    )


def simulate_channels(config: SimConfig, seed: int) -> np.ndarray:
    """Ground-truth link paths, (slots, N*L); shared across schemes per seed."""
    rng = np.random.default_rng(np.random.SeedSequence([int(seed), 0]))
    return sample_paths(config.channel, config.ues * config.bss, config.slots - 1, rng)


def _run_star(args):
    return run_single(*args)


def run(
    config: SimConfig,
    scheme: str,
    policies=None,
    workers: int = 1,
) -> Metrics:
    """All seeds of one scheme; aggregation is independent of worker count."""
    jobs = [(config, scheme, seed, policies) for seed in config.seeds]
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            runs = list(pool.map(_run_star, jobs))
    else:
        runs = [_run_star(j) for j in jobs]
    return _aggregate(config, scheme, runs)


def _aggregate(config: SimConfig, scheme: str, runs: list[RunResult]) -> Metrics:
    se = np.array([r.avg_se for r in runs])
    ho = np.array([r.handovers_total for r in runs], dtype=float)
    ho_rate = np.array([r.handovers_per_ue_per_kslot for r in runs])
    return Metrics(
        scheme=scheme,
        config=config,
        runs=runs,
        mean_se=float(se.mean()),
        se_ci95=_ci95_halfwidth(se),
        mean_handovers=float(ho.mean()),
        handovers_ci95=_ci95_halfwidth(ho),
        mean_handovers_per_ue_per_kslot=float(ho_rate.mean()),
    )


def _sweep_cell(args):
    """All schemes for one (config, seed), sharing the channel realization."""
    config, schemes, seed, policies = args
    paths = simulate_channels(config, seed)
    return {
        s: run_single(config, s, seed, policies if s == "mdp" else None, _paths=paths)
        for s in schemes
    }


def sweep(
    configs: Sequence[SimConfig],
    schemes: Sequence[str],
    policies_for=None,
    workers: int = 1,
) -> list[Metrics]:
    """Cross product of configs and schemes with channel paths shared per
    (config, seed); fills gain_vs_channel within each config. Results are
    aggregated in seed order, so the output is independent of ``workers``.
    """
    out: list[Metrics] = []
    schemes = tuple(schemes)
    for config in configs:
        policies = policies_for(config) if (policies_for and "mdp" in schemes) else None
        jobs = [(config, schemes, seed, policies) for seed in config.seeds]
        if workers > 1 and len(jobs) > 1:
            with ProcessPoolExecutor(max_workers=workers) as pool:
                cells = list(pool.map(_sweep_cell, jobs))
        else:
            cells = [_sweep_cell(j) for j in jobs]
        metrics = {
            s: _aggregate(config, s, [cell[s] for cell in cells]) for s in schemes
        }
        if "channel" in metrics:
            base = metrics["channel"].mean_se
            for s in schemes:
                if base > 0:
                    metrics[s].gain_vs_channel = (metrics[s].mean_se - base) / base
        out.extend(metrics[s] for s in schemes)
    return out


def variation(config: SimConfig, **changes) -> SimConfig:
    """Config with selected fields replaced (validation re-runs)."""
    return replace(config, **changes)
