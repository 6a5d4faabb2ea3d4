"""Two-stage boosted-tree efficiency surrogates and adaptive particle swarm search."""

from .datasets import Dataset, SplitSpec, generate_exp_pool, generate_sim_grid, read_csv, split, write_csv
from .domain import Fidelity, OperatingPoint, Sample
from .errors import ConfigError, D2eaError, DataError, RangeError
from .gbrt import STAGE_ONE, STAGE_TWO, GbrtModel, GbrtParams, gbrt_fit, gbrt_predict
from .oracle import OracleParams, eta_hw, eta_sim, grid_argmax, measure
from .pso import PsoConfig, optimize
from .residual_stack import (
    AccuracyReport,
    D2eaModel,
    compare_baselines,
    d2ea_fit,
    d2ea_predict,
    data_size_sweep,
    evaluate,
)

__version__ = "0.1.0"
