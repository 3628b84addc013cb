"""Parameter records shared by the relation tables and the logic programs."""

from __future__ import annotations

import math
from dataclasses import dataclass

from promis.errors import InvalidArgumentError


@dataclass(frozen=True)
class Bernoulli:
    p: float

    def __post_init__(self):
        p = float(self.p)
        if not (0.0 <= p <= 1.0):
            raise InvalidArgumentError(f"probability {self.p} outside [0, 1]")
        object.__setattr__(self, "p", p)


@dataclass(frozen=True)
class Normal:
    """Normal distribution; ``std`` is the standard deviation, 0 is a point mass."""

    mean: float
    std: float

    def __post_init__(self):
        mean, std = float(self.mean), float(self.std)
        if not math.isfinite(mean) or not math.isfinite(std):
            raise InvalidArgumentError("normal parameters must be finite")
        if std < 0:
            raise InvalidArgumentError(f"negative standard deviation {self.std}")
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "std", std)
