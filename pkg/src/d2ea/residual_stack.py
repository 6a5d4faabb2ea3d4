"""Two-stage surrogate: a simulation landscape plus a learned sim-to-real gap.

Stage I is boosted on simulated efficiency.  Stage II is boosted, from a zero
base, on what stage I gets wrong at the experimental points.  A prediction is
the plain sum of the two stages.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from . import gbrt
from .datasets import Dataset
from .domain import FIELDS, RANGES, Fidelity, OperatingPoint, check_points
from .errors import DataError
from .gbrt import STAGE_ONE, STAGE_TWO, GbrtModel, GbrtParams

METRICS = {
    "mean_abs_error_pp": "mean |prediction - truth| in efficiency percentage points",
    "accuracy_percent": "100 - mean(|prediction - truth| / truth * 100)",
    "worst_abs_error_pp": "max |prediction - truth| in percentage points",
}


def _empty_model(arity=3):
    return GbrtModel(0.0, [], 1.0, arity)


@dataclass(eq=False)
class D2eaModel:
    sim_model: GbrtModel
    gap_model: GbrtModel
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.sim_model.feature_arity != 3 or self.gap_model.feature_arity != 3:
            raise DataError("both stages must take (d1, d2, p)")

    def predict_many(self, X, check=True):
        """Predicted efficiency for an ``(n, 3)`` array of operating points."""
        if check:
            X = check_points(X)
        return self.sim_model.predict(X) + self.gap_model.predict(X)

    __call__ = predict_many

    def stage_one(self, X):
        return self.sim_model.predict(check_points(X))

    def predict_grid(self, d1_axis, d2_axis, p):
        """Predictions on a ``d1 x d2`` grid at fixed load ``p``."""
        axes = [np.asarray(d1_axis, float), np.asarray(d2_axis, float), np.array([float(p)])]
        a, b = axes[0], axes[1]
        check_points([[a.min(), b.min(), p], [a.max(), b.max(), p]])
        sim = self.sim_model.predict_grid(axes)
        gap = self.gap_model.predict_grid(axes)
        return (sim + gap)[:, :, 0]

    def to_dict(self):
        return {
            "format": "d2ea-model/1",
            "sim_model": self.sim_model.to_dict(),
            "gap_model": self.gap_model.to_dict(),
            "metadata": self.metadata,
        }

    def to_json(self):
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def from_dict(cls, doc):
        if doc.get("format") != "d2ea-model/1":
            raise DataError(f"unsupported model format {doc.get('format')!r}")
        return cls(
            GbrtModel.from_dict(doc["sim_model"]),
            GbrtModel.from_dict(doc["gap_model"]),
            doc.get("metadata", {}),
        )

    @classmethod
    def from_json(cls, text):
        try:
            doc = json.loads(text)
        except json.JSONDecodeError as exc:
            raise DataError(f"model file is not valid JSON: {exc}") from None
        return cls.from_dict(doc)

    def save(self, path):
        with open(path, "w") as fh:
            fh.write(self.to_json())
            fh.write("\n")

    @classmethod
    def load(cls, path):
        with open(path) as fh:
            return cls.from_json(fh.read())


def single_stage(model, **metadata):
    """Wrap one boosted model as a stack with an empty gap stage."""
    return D2eaModel(model, _empty_model(model.feature_arity), dict(metadata))


def _as_dataset(data):
    if isinstance(data, Dataset):
        return data
    return Dataset.from_samples(data)


def _params_dict(p):
    return {
        "num_trees": p.num_trees,
        "max_height": p.max_height,
        "l2_lambda": p.l2_lambda,
        "learning_rate": p.learning_rate,
        "min_samples_split": p.min_samples_split,
    }


def d2ea_fit(sim_train, exp_train, hp1=STAGE_ONE, hp2=STAGE_TWO):
    """Fit stage I on simulation labels, then stage II on the experimental gap."""
    sim = _as_dataset(sim_train)
    exp = _as_dataset(exp_train)
    if len(sim) == 0 or len(exp) == 0:
        raise DataError("both training pools must be nonempty")
    if sim.fidelity is not Fidelity.SIMULATION:
        raise DataError("stage-I pool must be simulation data")
    if exp.fidelity is not Fidelity.EXPERIMENTAL:
        raise DataError("stage-II pool must be experimental data")
    sim_model = gbrt.gbrt_fit(sim.X, sim.eta, hp1, base="mean")
    return fit_gap(sim_model, exp, hp2, sim_digest=sim.digest(), n_sim=len(sim), hp1=hp1)


def fit_gap(sim_model, exp, hp2=STAGE_TWO, sim_digest=None, n_sim=None, hp1=None):
    """Stage II only, on top of a fixed stage-I model."""
    exp = _as_dataset(exp)
    if exp.fidelity is not Fidelity.EXPERIMENTAL:
        raise DataError("stage-II pool must be experimental data")
    gap = exp.eta - sim_model.predict(exp.X)
    gap_model = gbrt.gbrt_fit(exp.X, gap, hp2, base="zero")
    meta = {
        "ranges": {k: list(RANGES[k]) for k in FIELDS},
        "metrics": METRICS,
        "training": {
            "sim_digest": sim_digest,
            "n_sim": n_sim,
            "exp_digest": exp.digest(),
            "n_exp": len(exp),
        },
        "hyperparams": {
            "stage1": _params_dict(hp1) if hp1 else None,
            "stage2": _params_dict(hp2),
        },
    }
    return D2eaModel(sim_model, gap_model, meta)


def d2ea_predict(model, point):
    """Efficiency at one operating point; raises ``RangeError`` outside the box."""
    if not isinstance(point, OperatingPoint):
        point = OperatingPoint(*map(float, point))
    return float(model.predict_many(point.as_array()[None, :])[0])


@dataclass(frozen=True)
class AccuracyReport:
    mean_abs_error_pp: float
    accuracy_percent: float
    worst_abs_error_pp: float
    n: int

    def as_row(self):
        return {
            "mean_abs_error_pp": self.mean_abs_error_pp,
            "accuracy_percent": self.accuracy_percent,
            "worst_abs_error_pp": self.worst_abs_error_pp,
            "n": self.n,
        }


def evaluate(predict, data):
    """Score ``predict`` (an ``(n, 3) -> (n,)`` callable) against labelled data."""
    data = _as_dataset(data)
    if len(data) == 0:
        raise DataError("cannot evaluate on an empty dataset")
    pred = np.asarray(predict(data.X), dtype=float).ravel()
    err = np.abs(pred - data.eta)
    return AccuracyReport(
        mean_abs_error_pp=float(np.mean(err)),
        accuracy_percent=float(100.0 - np.mean(err / data.eta * 100.0)),
        worst_abs_error_pp=float(np.max(err)),
        n=len(data),
    )


@dataclass
class BaselineComparison:
    reports: dict
    models: dict


def _overlaps(a, b):
    if len(a) == 0 or len(b) == 0:
        return False
    rows = np.concatenate([np.unique(a.X, axis=0), np.unique(b.X, axis=0)])
    return np.unique(rows, axis=0).shape[0] < rows.shape[0]


def compare_baselines(sim_pool, exp_pool, hp1=STAGE_ONE, hp2=STAGE_TWO, eval_set=None):
    """Simulation-only vs experiment-only vs two-stage, scored on ``eval_set``.

    The experiment-only baseline reuses ``hp1`` so it is a single model of the
    same capacity as stage I.
    """
    sim = _as_dataset(sim_pool)
    exp = _as_dataset(exp_pool)
    ev = _as_dataset(eval_set)
    if len(exp) == 0:
        raise DataError("experimental pool must be nonempty")
    if ev.fidelity is not Fidelity.EXPERIMENTAL:
        raise DataError("evaluation set must be experimental data")
    if _overlaps(ev, sim) or _overlaps(ev, exp):
        raise DataError("evaluation set overlaps a training pool")
    stacked = d2ea_fit(sim, exp, hp1, hp2)
    sim_only = single_stage(stacked.sim_model, approach="sim_only")
    exp_only = single_stage(gbrt.gbrt_fit(exp.X, exp.eta, hp1, base="mean"), approach="exp_only")
    models = {"sim_only": sim_only, "exp_only": exp_only, "d2ea": stacked}
    reports = {name: evaluate(m.predict_many, ev) for name, m in models.items()}
    return BaselineComparison(reports, models)


@dataclass(frozen=True)
class SweepRow:
    fraction: float
    n_train: int
    mean_accuracy: float
    min_accuracy: float
    max_accuracy: float
    mean_error_pp: float


def data_size_sweep(sim_model, exp_train, eval_set, fractions, repeats=10, seed=0, hp2=STAGE_TWO):
    """Accuracy of the stack as the experimental training pool shrinks.

    Stage I stays fixed; for each fraction and repeat a random subset of
    ``exp_train`` (sub-seeded from ``(seed, fraction index, repeat)``) retrains
    stage II, which is then scored on ``eval_set``.
    """
    exp = _as_dataset(exp_train)
    ev = _as_dataset(eval_set)
    fractions = [float(f) for f in fractions]
    if fractions != sorted(fractions):
        raise ValueError("fractions must be sorted ascending")
    if repeats < 1:
        raise ValueError("repeats must be >= 1")
    rows = []
    for fi, frac in enumerate(fractions):
        if not 0.0 < frac <= 1.0:
            raise ValueError(f"fraction {frac} outside (0, 1]")
        k = int(round(frac * len(exp)))
        if k < 1:
            raise DataError(f"fraction {frac} of {len(exp)} samples leaves no training data")
        acc, err = [], []
        for rep in range(repeats):
            rng = np.random.default_rng([seed, fi, rep])
            idx = np.sort(rng.choice(len(exp), size=k, replace=False))
            model = fit_gap(sim_model, exp.subset(idx), hp2)
            rep_ = evaluate(model.predict_many, ev)
            acc.append(rep_.accuracy_percent)
            err.append(rep_.mean_abs_error_pp)
        rows.append(SweepRow(frac, k, float(np.mean(acc)), float(min(acc)), float(max(acc)), float(np.mean(err))))
    return rows


@dataclass(frozen=True)
class GridSearchResult:
    params: GbrtParams
    test_error_pp: float
    table: list


def select_hyperparams(
    train,
    test,
    heights=range(5, 13),
    rates=(0.05, 0.1),
    lambdas=(0.01, 0.1, 1.0),
    max_trees=300,
    patience=20,
    base="mean",
):
    """Pick the boosting settings with the lowest mean absolute test error.

    For each (height, rate, lambda) a model with up to ``max_trees`` trees is
    fitted once; the tree count is the best stage on the test set, with
    search abandoned after ``patience`` stages without improvement.
    """
    tr = _as_dataset(train)
    te = _as_dataset(test)
    best = None
    table = []
    for h in heights:
        for lr in rates:
            for lam in lambdas:
                p = GbrtParams(num_trees=max_trees, max_height=h, l2_lambda=lam, learning_rate=lr)
                model = gbrt.gbrt_fit(tr.X, tr.eta, p, base=base)
                best_err, best_k, since = np.inf, 0, 0
                for k, pred in enumerate(model.staged_predict(te.X)):
                    e = float(np.mean(np.abs(pred - te.eta)))
                    if e < best_err:
                        best_err, best_k, since = e, k, 0
                    else:
                        since += 1
                        if since >= patience:
                            break
                chosen = GbrtParams(num_trees=best_k, max_height=h, l2_lambda=lam, learning_rate=lr)
                table.append((chosen, best_err))
                if best is None or best_err < best[1]:
                    best = (chosen, best_err)
    return GridSearchResult(best[0], best[1], table)
