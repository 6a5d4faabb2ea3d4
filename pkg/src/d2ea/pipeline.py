"""End-to-end wiring shared by the command line and the acceptance tests."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import oracle, search
from .datasets import EXP_SPLIT, SIM_SPLIT, SplitSpec, generate_exp_pool, generate_sim_grid, split
from .gbrt import STAGE_ONE, STAGE_TWO
from .pso import PsoConfig
from .residual_stack import compare_baselines

DEFAULT_SEED = 42
SIM_GRID = (25, 25, 20)
EXP_COUNT = 1000


@dataclass
class Pools:
    sim_train: object
    sim_test: object
    sim_val: object
    exp_train: object
    exp_test: object
    exp_val: object


def generate(seed=DEFAULT_SEED, params=oracle.OracleParams(), grid=SIM_GRID, exp_count=EXP_COUNT):
    return generate_sim_grid(grid, params), generate_exp_pool(exp_count, params, seed)


def split_pools(sim, exp, seed=DEFAULT_SEED):
    """Simulation split 10/20/70 with ``seed``, experimental 40/20/40 with ``seed + 1``."""
    s = split(sim, SplitSpec(*SIM_SPLIT, seed=seed))
    e = split(exp, SplitSpec(*EXP_SPLIT, seed=seed + 1))
    return Pools(*s, *e)


def train(pools, hp1=STAGE_ONE, hp2=STAGE_TWO):
    """Fit all three approaches and score them on the experimental validation set."""
    return compare_baselines(pools.sim_train, pools.exp_train, hp1, hp2, pools.exp_val)


def grid_loads(n=SIM_GRID[2]):
    """The load levels of the simulation grid."""
    return list(np.linspace(200.0, 2000.0, n))


def optimality_rows(models, powers, cfg=PsoConfig(), params=oracle.OracleParams()):
    """True efficiency reached at each approach's surrogate optimum."""
    rows = []
    for p in powers:
        d1s, d2s = oracle.optimal_duties(p, params)
        row = {"p": float(p), "d1_best": float(d1s), "d2_best": float(d2s)}
        row["eta_hw_best"] = float(oracle.eta_hw(d1s, d2s, p, params))
        for name, model in models.items():
            opt = search.optimize_at_power(model, p, cfg)
            row[f"d1_{name}"] = opt.d1
            row[f"d2_{name}"] = opt.d2
            row[f"eta_pred_{name}"] = opt.eta
            row[f"eta_hw_{name}"] = float(oracle.eta_hw(opt.d1, opt.d2, p, params))
        rows.append(row)
    return rows
