"""Per-channel-state spectral efficiencies (bits/s/Hz)."""

from dataclasses import dataclass

import numpy as np

from .errors import ValidationError


@dataclass(frozen=True)
class RateTable:
    """Rate achievable alone in a cell, indexed by channel state ordinal.

    State 0 is outage and carries rate 0; rates never decrease with the
    ordinal (better channel state, better rate).
    """

    rates: tuple[float, ...] = (0.0, 1.0, 4.0)

    def __post_init__(self):
        arr = np.asarray(self.rates, dtype=float)
        if arr.ndim != 1 or arr.size < 1:
            raise ValidationError("rates must be a nonempty vector")
        if arr[0] != 0.0:
            raise ValidationError("the outage state (ordinal 0) must have rate 0")
        if np.any(arr < 0) or np.any(np.diff(arr) < 0):
            raise ValidationError("rates must be nonnegative and nondecreasing")
        object.__setattr__(self, "rates", tuple(float(x) for x in arr))

    @property
    def k(self) -> int:
        return len(self.rates)

    def rate(self, channel_state: int) -> float:
        return self.rates[channel_state]

    def as_array(self) -> np.ndarray:
        return np.asarray(self.rates)
