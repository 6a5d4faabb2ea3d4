"""Search a trained surrogate for the best modulation at fixed load."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import oracle, pso
from .domain import RANGES
from .errors import RangeError

GRID_RESOLUTION = 201


@dataclass(frozen=True)
class Optimum:
    p: float
    d1: float
    d2: float
    eta: float
    grid_d1: float
    grid_d2: float
    grid_eta: float
    trace: tuple

    @property
    def grid_discrepancy(self):
        """Per-coordinate distance between the swarm and grid optima."""
        return max(abs(self.d1 - self.grid_d1), abs(self.d2 - self.grid_d2))


def _check_power(p):
    lo, hi = RANGES["p"]
    if not lo <= p <= hi:
        raise RangeError("p", p, lo, hi)


def surrogate_objective(model, p):
    """Batch objective ``(n, 2) -> (n,)`` of ``model`` at load ``p``."""
    _check_power(p)

    def f(D):
        D = np.asarray(D, dtype=float)
        return model.predict_many(np.column_stack([D, np.full(D.shape[0], float(p))]), check=False)

    return f


def grid_optimum(model, p, resolution=GRID_RESOLUTION):
    """Exhaustive grid argmax of the surrogate at load ``p``."""
    _check_power(p)
    axis = np.linspace(0.0, 1.0, resolution)
    values = model.predict_grid(axis, axis, p)
    return oracle.grid_argmax(lambda d1, d2: values, resolution)


def optimize_at_power(model, p, cfg=pso.PsoConfig(), resolution=GRID_RESOLUTION):
    """Swarm search plus a grid cross-check at one load."""
    p = float(p)
    res = pso.optimize(surrogate_objective(model, p), cfg, batch=True)
    g = grid_optimum(model, p, resolution)
    return Optimum(
        p=p,
        d1=float(res.best_position[0]),
        d2=float(res.best_position[1]),
        eta=res.best_value,
        grid_d1=g.d1,
        grid_d2=g.d2,
        grid_eta=g.value,
        trace=tuple(res.trace),
    )


def parse_powers(spec):
    """``"200:2000:200"`` (inclusive stop) or a comma list ``"600,1000"``."""
    spec = spec.strip()
    if ":" in spec:
        parts = spec.split(":")
        if len(parts) != 3:
            raise ValueError(f"power range must be start:stop:step, got {spec!r}")
        start, stop, step = (float(x) for x in parts)
        if step <= 0 or stop < start:
            raise ValueError(f"bad power range {spec!r}")
        n = int(np.floor((stop - start) / step + 1e-9)) + 1
        powers = [start + i * step for i in range(n)]
    else:
        powers = [float(x) for x in spec.split(",") if x.strip()]
    for p in powers:
        _check_power(p)
    return powers


@dataclass(frozen=True)
class SweepPoint:
    optimum: Optimum
    eta_hw_check: float | None


def sweep(model, powers, cfg=pso.PsoConfig(), oracle_params=None, resolution=GRID_RESOLUTION):
    """Optimize at every load; optionally check each optimum against the oracle."""
    for p in powers:
        _check_power(float(p))
    out = []
    for p in powers:
        opt = optimize_at_power(model, p, cfg, resolution)
        hw = None
        if oracle_params is not None:
            hw = float(oracle.eta_hw(opt.d1, opt.d2, opt.p, oracle_params))
        out.append(SweepPoint(opt, hw))
    return out
