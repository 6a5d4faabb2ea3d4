"""Operating-point and sample types plus the parameter box they live in."""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .errors import RangeError

FIELDS = ("d1", "d2", "p")

#: Closed parameter box: duty ratio, inner phase shift, output power in watts.
RANGES = {
    "d1": (0.0, 1.0),
    "d2": (0.0, 1.0),
    "p": (200.0, 2000.0),
}


class Fidelity(enum.Enum):
    SIMULATION = "sim"
    EXPERIMENTAL = "exp"


@dataclass(frozen=True)
class OperatingPoint:
    """A modulation/load triple at which efficiency is defined."""

    d1: float
    d2: float
    p: float

    def __post_init__(self):
        check_point(self.d1, self.d2, self.p)

    def as_array(self):
        return np.array([self.d1, self.d2, self.p], dtype=float)


@dataclass(frozen=True)
class Sample:
    point: OperatingPoint
    eta: float
    fidelity: Fidelity

    def __post_init__(self):
        if not (0.0 < self.eta <= 100.0):
            raise RangeError("eta", self.eta, 0.0, 100.0)


def check_point(d1, d2, p, where=""):
    """Raise :class:`RangeError` naming the first field outside the box."""
    for name, value in zip(FIELDS, (d1, d2, p)):
        lo, hi = RANGES[name]
        if not lo <= value <= hi:
            raise RangeError(name, value, lo, hi, where)


def check_points(X, where=""):
    """Vectorized range check on an ``(n, 3)`` array of operating points."""
    X = np.asarray(X, dtype=float)
    if X.ndim != 2 or X.shape[1] != 3:
        raise ValueError(f"expected an (n, 3) array of points, got shape {X.shape}")
    for k, name in enumerate(FIELDS):
        lo, hi = RANGES[name]
        col = X[:, k]
        bad = ~((col >= lo) & (col <= hi))
        if bad.any():
            i = int(np.flatnonzero(bad)[0])
            loc = f"row {i}" if not where else f"{where}, row {i}"
            raise RangeError(name, float(col[i]), lo, hi, loc)
    return X
