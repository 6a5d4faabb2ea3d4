"""Synthetic efficiency surfaces standing in for circuit simulation and hardware.

``eta_hw`` plays the part of the physical converter: a concave quadratic bowl
whose ridge of optimal ``(d1, d2)`` moves linearly with load.  ``eta_sim`` is
the same bowl plus a linear bias that makes simulation optimistic by about
1.1 pp on average and drags its optimum away from the hardware optimum.
``measure`` adds Gaussian analyzer noise to ``eta_hw``.

All functions broadcast over numpy arrays.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
from dataclasses import dataclass

import numpy as np

from .domain import RANGES, check_point
from .errors import ConfigError


@dataclass(frozen=True)
class OracleParams:
    # descriptive converter metadata (carried into reports, not used in formulas)
    v1: float = 300.0
    v2: float = 140.0
    p_rated: float = 2000.0
    f_s: float = 20e3
    turns_ratio: float = 2.0
    l_k: float = 236e-6
    # efficiency surface
    peak_eta: float = 98.45
    peak_load_fraction: float = 0.3
    a: float = 6.0
    b: float = 4.0
    c: float = 1.5
    load_curvature: float = 2.0
    # simulation bias
    gap_mean: float = 1.1
    gap_tilt_d1: float = 1.2
    gap_tilt_d2: float = -1.6
    gap_tilt_p: float = 0.4
    noise_sigma: float = 0.05

    def __post_init__(self):
        if not 4.0 * self.a * self.b > self.c**2 or self.a <= 0:
            raise ConfigError("oracle curvature must satisfy a > 0 and 4ab > c^2")
        if self.peak_eta > 100.0:
            raise ConfigError(f"peak_eta={self.peak_eta} exceeds 100")
        if self.noise_sigma < 0:
            raise ConfigError(f"noise_sigma={self.noise_sigma} must be >= 0")
        if self.p_rated <= 0:
            raise ConfigError("p_rated must be positive")

    @classmethod
    def from_mapping(cls, values):
        """Build from ``{key: str}`` as read from a config section."""
        names = {f.name for f in dataclasses.fields(cls)}
        kwargs = {}
        for key, raw in values.items():
            if key not in names:
                raise ConfigError(f"unknown oracle key {key!r}")
            try:
                kwargs[key] = float(raw)
            except ValueError:
                raise ConfigError(f"oracle key {key!r}: not a number: {raw!r}") from None
        return cls(**kwargs)

    def digest(self):
        blob = json.dumps(dataclasses.asdict(self), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:16]


def optimal_duties(p, params=OracleParams()):
    """Hardware-optimal ``(d1, d2)`` at load ``p`` watts."""
    ph = np.asarray(p, dtype=float) / params.p_rated
    return 0.35 + 0.2 * ph, 0.25 + 0.15 * ph


def _check(d1, d2, p):
    d1, d2, p = np.broadcast_arrays(*(np.asarray(v, dtype=float) for v in (d1, d2, p)))
    if d1.ndim == 0:
        check_point(float(d1), float(d2), float(p))
        return d1, d2, p
    for name, arr in zip(("d1", "d2", "p"), (d1, d2, p)):
        lo, hi = RANGES[name]
        bad = ~((arr >= lo) & (arr <= hi))
        if bad.any():
            check_point(*(float(v[bad][0]) for v in (d1, d2, p)))
    return d1, d2, p


def _scalar(x):
    return float(x) if np.ndim(x) == 0 else x


def eta_hw(d1, d2, p, params=OracleParams()):
    """Noise-free "physical" efficiency in percent."""
    d1, d2, p = _check(d1, d2, p)
    ph = p / params.p_rated
    d1_opt, d2_opt = optimal_duties(p, params)
    u = d1 - d1_opt
    w = d2 - d2_opt
    eta = (
        params.peak_eta
        - params.load_curvature * (ph - params.peak_load_fraction) ** 2
        - params.a * u**2
        - params.b * w**2
        - params.c * u * w
    )
    return _scalar(eta)


def sim_gap(d1, d2, p, params=OracleParams()):
    """Simulation minus hardware efficiency (pp)."""
    d1, d2, p = _check(d1, d2, p)
    ph = p / params.p_rated
    gap = (
        params.gap_mean
        + params.gap_tilt_p * (ph - 0.5)
        + params.gap_tilt_d1 * (d1 - 0.5)
        + params.gap_tilt_d2 * (d2 - 0.5)
    )
    return _scalar(gap)


def eta_sim(d1, d2, p, params=OracleParams()):
    """Simulated efficiency: hardware truth plus a systematic, tilted bias."""
    return _scalar(np.asarray(eta_hw(d1, d2, p, params)) + sim_gap(d1, d2, p, params))


def measure(d1, d2, p, params=OracleParams(), rng=None):
    """One noisy power-analyzer reading of ``eta_hw``.

    Draws ``params.noise_sigma``-scaled standard normals from ``rng``; with
    ``noise_sigma == 0`` no draws are consumed and the truth is returned.
    """
    truth = np.asarray(eta_hw(d1, d2, p, params))
    if params.noise_sigma == 0:
        return _scalar(truth)
    if rng is None:
        raise ValueError("measure needs an rng when noise_sigma > 0")
    noise = rng.standard_normal(truth.shape) * params.noise_sigma
    return _scalar(truth + noise)


def sim_optimum_shift(params=OracleParams()):
    """Analytic offset of the simulation optimum from the hardware optimum.

    Solves the 2x2 stationarity system of the tilted bowl; independent of load.
    """
    H = np.array([[2.0 * params.a, params.c], [params.c, 2.0 * params.b]])
    t = np.array([params.gap_tilt_d1, params.gap_tilt_d2])
    return np.linalg.solve(H, t)


@dataclass(frozen=True)
class GridArgmax:
    d1: float
    d2: float
    value: float


def grid_argmax(f, resolution=201):
    """Exhaustive scan of ``f(d1, d2)`` over a uniform grid on the unit square.

    ``f`` is called once with two broadcastable ``(resolution, resolution)``
    arrays (``d1`` varying along axis 0).  Ties go to the lowest ``d1``, then
    the lowest ``d2``.
    """
    if resolution < 2:
        raise ValueError("resolution must be >= 2")
    axis = np.linspace(0.0, 1.0, resolution)
    D1, D2 = np.meshgrid(axis, axis, indexing="ij")
    values = np.broadcast_to(np.asarray(f(D1, D2), dtype=float), D1.shape)
    # flat argmax returns the first maximum in C order: lowest d1, then d2
    k = int(np.argmax(values))
    i, j = divmod(k, resolution)
    return GridArgmax(float(axis[i]), float(axis[j]), float(values[i, j]))
