"""Particle swarm optimization with a state-based adaptive velocity limit.

Each iteration measures how isolated the swarm's best particle is relative to
the others (the evolutionary factor ``f_e`` in [0, 1]) and maps it through a
logistic curve to a per-dimension velocity cap: a crowded best particle gets
a small cap (exploit), an isolated one a large cap (explore).

The objective is maximized.
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError


@dataclass(frozen=True)
class PsoConfig:
    population: int = 10
    iterations: int = 50
    v_min: float = 0.05
    v_max: float = 0.2
    c1: float = 2.05
    c2: float = 2.05
    omega_start: float = 0.9
    omega_end: float = 0.1
    bounds: tuple = ((0.0, 1.0), (0.0, 1.0))
    seed: int = 0

    def __post_init__(self):
        if self.population < 2:
            raise ConfigError(f"population={self.population} must be >= 2")
        if self.iterations < 1:
            raise ConfigError(f"iterations={self.iterations} must be >= 1")
        if not 0 < self.v_min < self.v_max < 1:
            raise ConfigError(f"need 0 < v_min < v_max < 1, got {self.v_min}, {self.v_max}")
        if self.c1 < 0 or self.c2 < 0:
            raise ConfigError("c1 and c2 must be >= 0")
        bounds = tuple((float(lo), float(hi)) for lo, hi in self.bounds)
        if not bounds or any(not lo < hi for lo, hi in bounds):
            raise ConfigError(f"each bound needs lo < hi, got {self.bounds}")
        object.__setattr__(self, "bounds", bounds)

    @property
    def x_max(self):
        """Width of the search box per dimension."""
        return np.array([hi - lo for lo, hi in self.bounds])

    @classmethod
    def from_mapping(cls, values, **overrides):
        ints = {"population", "iterations", "seed"}
        floats = {"v_min", "v_max", "c1", "c2", "omega_start", "omega_end"}
        kwargs = {}
        for key, raw in values.items():
            if key in ints:
                conv = int
            elif key in floats:
                conv = float
            else:
                raise ConfigError(f"unknown pso key {key!r}")
            try:
                kwargs[key] = conv(raw)
            except ValueError:
                raise ConfigError(f"pso key {key!r}: bad value {raw!r}") from None
        kwargs.update(overrides)
        return cls(**kwargs)

    def to_dict(self):
        return dataclasses.asdict(self)


def mean_distances(positions):
    """Mean Euclidean distance from each particle to all the others."""
    X = np.asarray(positions, dtype=float)
    n = X.shape[0]
    if n < 2:
        raise ValueError("mean distance needs at least two particles")
    diff = X[:, None, :] - X[None, :, :]
    dist = np.sqrt(np.sum(diff * diff, axis=-1))
    return dist.sum(axis=1) / (n - 1)


def mean_distance(i, positions):
    return float(mean_distances(positions)[i])


def evolutionary_factor(distances, best_index):
    """``(d_g - d_min) / (d_max - d_min)``; 0 when all distances are equal."""
    d = np.asarray(distances, dtype=float)
    d_min, d_max = d.min(), d.max()
    if d_max == d_min:
        return 0.0
    fe = (d[best_index] - d_min) / (d_max - d_min)
    return float(min(1.0, max(0.0, fe)))


def velocity_limit(fe, cfg, k=0):
    """Velocity cap for dimension ``k``.

    Logistic in ``fe`` with ``VL(0) = v_min * X_max`` and ``VL(1) = v_max * X_max``.
    """
    fe = min(1.0, max(0.0, float(fe)))
    a = 1.0 / cfg.v_min - 1.0
    b = 1.0 / cfg.v_max - 1.0
    return float(cfg.x_max[k] / (1.0 + a * math.exp(math.log(b / a) * fe)))


def velocity_limits(fe, cfg):
    return np.array([velocity_limit(fe, cfg, k) for k in range(len(cfg.bounds))])


def inertia(t, cfg):
    """Linearly decreasing inertia weight at iteration ``t`` (0-based)."""
    if cfg.iterations == 1:
        return cfg.omega_start
    return cfg.omega_start + (cfg.omega_end - cfg.omega_start) * t / (cfg.iterations - 1)


def update_velocity(position, velocity, pbest, gbest, omega, vl, cfg, rng):
    """Inertia plus cognitive and social pulls, clamped to ``[-vl, vl]``.

    Draws ``r1`` then ``r2``, each one uniform per dimension.
    """
    x = np.asarray(position, dtype=float)
    d = x.shape[0]
    r1 = rng.random(d)
    r2 = rng.random(d)
    v = (
        omega * np.asarray(velocity, dtype=float)
        + cfg.c1 * r1 * (np.asarray(pbest, dtype=float) - x)
        + cfg.c2 * r2 * (np.asarray(gbest, dtype=float) - x)
    )
    return np.clip(v, -vl, vl)


@dataclass
class SwarmState:
    positions: np.ndarray
    velocities: np.ndarray
    pbest_positions: np.ndarray
    pbest_values: np.ndarray
    gbest_position: np.ndarray
    gbest_value: float
    iteration: int
    velocity_limit: np.ndarray
    fe: float


@dataclass
class PsoResult:
    best_position: np.ndarray
    best_value: float
    trace: list
    history: list = field(default_factory=list)


def optimize(objective, cfg=PsoConfig(), batch=False, record=False):
    """Maximize ``objective`` over the box ``cfg.bounds``.

    Parameters
    ----------
    objective : callable
        ``f(x) -> float`` for a position vector, or with ``batch=True``
        ``f(X) -> values`` for an ``(population, dim)`` array.
    cfg : PsoConfig
    batch : bool
        Evaluate the whole swarm in one call.
    record : bool
        Keep a :class:`SwarmState` snapshot after every iteration.

    Returns
    -------
    PsoResult
        ``trace[t]`` is the best value found after iteration ``t``.

    Random draws happen in a fixed order: initial positions, initial
    velocities (both particle-major), then per iteration ``r1, r2`` for each
    particle in index order.
    """
    rng = np.random.default_rng(cfg.seed)
    n = cfg.population
    lo = np.array([b[0] for b in cfg.bounds])
    hi = np.array([b[1] for b in cfg.bounds])
    x_max = cfg.x_max
    dim = lo.size

    X = lo + x_max * rng.random((n, dim))
    V = (2.0 * rng.random((n, dim)) - 1.0) * cfg.v_max * x_max

    def evaluate(P):
        if batch:
            vals = np.asarray(objective(P), dtype=float).reshape(n)
        else:
            vals = np.array([float(objective(p)) for p in P])
        return vals

    pb_x = X.copy()
    pb_v = evaluate(X)
    trace, history = [], []
    for t in range(cfg.iterations):
        if t > 0:
            vals = evaluate(X)
            better = vals > pb_v
            pb_x[better] = X[better]
            pb_v[better] = vals[better]
        g = int(np.argmax(pb_v))
        gb_x = pb_x[g].copy()
        trace.append(float(pb_v[g]))

        fe = evolutionary_factor(mean_distances(X), g)
        vl = velocity_limits(fe, cfg)
        omega = inertia(t, cfg)
        for i in range(n):
            V[i] = update_velocity(X[i], V[i], pb_x[i], gb_x, omega, vl, cfg, rng)
        X = np.clip(X + V, lo, hi)

        if record:
            history.append(
                SwarmState(X.copy(), V.copy(), pb_x.copy(), pb_v.copy(), gb_x, float(pb_v[g]), t, vl, fe)
            )

    g = int(np.argmax(pb_v))
    return PsoResult(pb_x[g].copy(), float(pb_v[g]), trace, history)
