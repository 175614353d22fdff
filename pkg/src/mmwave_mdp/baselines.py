"""Comparison cell-selection schemes: load, rate, channel and upper bound.

The per-UE schemes see one UE's channel row plus the previous slot's
loads. The upper bound is a centralized exhaustive search over all joint
assignments and stands in for coordinated, fully informed selection.
"""

import itertools
from typing import NamedTuple, Sequence

import numpy as np

from .errors import SizeLimitError, ValidationError
from .rates import RateTable

MAX_JOINT_ASSIGNMENTS = 10_000_000


class JointObservation(NamedTuple):
    """Everything the centralized scheme sees in one slot."""

    channels: np.ndarray  # (N, L) channel state ordinals
    loads: np.ndarray  # (L,) previous-slot occupancy

    def validate(self):
        ch = np.asarray(self.channels)
        ld = np.asarray(self.loads)
        if ch.ndim != 2 or ld.ndim != 1 or ch.shape[1] != ld.shape[0]:
            raise ValidationError("channels must be (N, L) and loads length L")
        if int(ld.sum()) != ch.shape[0]:
            raise ValidationError("loads must sum to the number of UEs")


def load_policy(loads: Sequence[int], rng: np.random.Generator) -> int:
    """Least-loaded BS; ties resolved uniformly at random from ``rng``."""
    loads = np.asarray(loads)
    ties = np.flatnonzero(loads == loads.min())
    if ties.size == 1:
        return int(ties[0])
    return int(rng.choice(ties))


def rate_policy(channels_row: Sequence[int], loads: Sequence[int], rates: RateTable) -> int:
    """Best estimated instantaneous rate R(channel) / (load + 1); ties low."""
    r = rates.as_array()[np.asarray(channels_row)]
    return int(np.argmax(r / (np.asarray(loads) + 1.0)))


def channel_policy(channels_row: Sequence[int]) -> int:
    """Best channel state, the SNR-style association; ties low."""
    return int(np.argmax(np.asarray(channels_row)))


def _assignment_total(channels, assignment, previous, rates_arr, oh, charge_oh):
    counts = np.bincount(assignment, minlength=channels.shape[1])
    total = 0.0
    for k, a in enumerate(assignment):
        cost = oh if (charge_oh and a != previous[k]) else 0.0
        total += (1.0 - cost) * rates_arr[channels[k, a]] / counts[a]
    return total


def upper_bound_assignment(
    obs: JointObservation,
    rates: RateTable,
    oh: float,
    previous: Sequence[int],
    charge_oh: bool = True,
    max_assignments: int = MAX_JOINT_ASSIGNMENTS,
) -> np.ndarray:
    """Joint assignment maximizing the slot's total instantaneous reward.

    Exhaustive over all L^N assignments with resulting (not estimated) cell
    sizes in the denominator; ties go to the lexicographically smallest
    assignment. ``charge_oh`` controls whether the objective charges the
    handover cost for UEs that move.
    """
    obs.validate()
    if not 0.0 <= oh <= 1.0:
        raise ValidationError("handover cost fraction must lie in [0, 1]")
    channels = np.asarray(obs.channels)
    n_ues, n_bss = channels.shape
    if n_bss**n_ues > max_assignments:
        raise SizeLimitError(
            f"{n_bss}^{n_ues} joint assignments exceed the budget {max_assignments}"
        )
    previous = np.asarray(previous)
    if previous.shape != (n_ues,):
        raise ValidationError("previous assignment must give one BS per UE")
    rates_arr = rates.as_array()
    best, best_total = None, -np.inf
    for assignment in itertools.product(range(n_bss), repeat=n_ues):
        arr = np.asarray(assignment)
        total = _assignment_total(channels, arr, previous, rates_arr, oh, charge_oh)
        if total > best_total:
            best, best_total = arr, total
    return best
