"""Dataset generation, splitting, and CSV persistence."""

from __future__ import annotations

import csv
import hashlib
import json
import os
from dataclasses import dataclass, field

import numpy as np

from . import oracle
from .domain import FIELDS, RANGES, Fidelity, OperatingPoint, Sample, check_points
from .errors import DataError, RangeError

CSV_HEADER = ("d1", "d2", "p_watts", "eta_percent", "fidelity")


@dataclass(eq=False)
class Dataset:
    """Labelled operating points of a single fidelity.

    Stored column-wise: ``X`` is ``(n, 3)`` with columns ``d1, d2, p``.
    """

    X: np.ndarray
    eta: np.ndarray
    fidelity: Fidelity
    provenance: dict = field(default_factory=dict)

    def __post_init__(self):
        self.X = np.ascontiguousarray(self.X, dtype=float).reshape(-1, 3)
        self.eta = np.ascontiguousarray(self.eta, dtype=float).ravel()
        if self.X.shape[0] != self.eta.shape[0]:
            raise DataError(f"{self.X.shape[0]} points but {self.eta.shape[0]} labels")
        self.fidelity = Fidelity(self.fidelity)
        if len(self) and np.unique(self.X, axis=0).shape[0] != len(self):
            raise DataError("dataset contains duplicate operating points")

    def __len__(self):
        return int(self.eta.shape[0])

    @property
    def samples(self):
        return [
            Sample(OperatingPoint(*map(float, x)), float(e), self.fidelity)
            for x, e in zip(self.X, self.eta)
        ]

    @classmethod
    def from_samples(cls, samples, provenance=None):
        samples = list(samples)
        if not samples:
            raise DataError("empty sample list")
        fid = samples[0].fidelity
        if any(s.fidelity is not fid for s in samples):
            raise DataError("samples mix fidelities")
        X = [[s.point.d1, s.point.d2, s.point.p] for s in samples]
        return cls(np.array(X), np.array([s.eta for s in samples]), fid, dict(provenance or {}))

    def subset(self, idx):
        idx = np.asarray(idx, dtype=np.int64)
        return Dataset(self.X[idx], self.eta[idx], self.fidelity, dict(self.provenance))

    def digest(self):
        h = hashlib.sha256()
        h.update(self.fidelity.value.encode())
        h.update(self.X.tobytes())
        h.update(self.eta.tobytes())
        return h.hexdigest()[:16]

    def equals(self, other):
        return (
            self.fidelity is other.fidelity
            and np.array_equal(self.X, other.X)
            and np.array_equal(self.eta, other.eta)
        )


def grid_axes(counts):
    """Evenly spaced axis values, endpoints included, for each of d1, d2, p."""
    if len(counts) != 3:
        raise DataError("grid counts must be a triple (n1, n2, np)")
    axes = []
    for name, n in zip(FIELDS, counts):
        if int(n) != n or n < 2:
            raise DataError(f"grid count for {name} must be an integer >= 2, got {n}")
        lo, hi = RANGES[name]
        axes.append(np.linspace(lo, hi, int(n)))
    return axes


def generate_sim_grid(counts=(25, 25, 20), params=oracle.OracleParams()):
    """Cartesian grid over the parameter box labelled with ``eta_sim``."""
    axes = grid_axes(counts)
    mesh = np.meshgrid(*axes, indexing="ij")
    X = np.column_stack([m.ravel() for m in mesh])
    eta = oracle.eta_sim(X[:, 0], X[:, 1], X[:, 2], params)
    prov = {
        "mode": "grid",
        "counts": [int(c) for c in counts],
        "oracle_digest": params.digest(),
        "seed": None,
    }
    return Dataset(X, eta, Fidelity.SIMULATION, prov)


def _uniform_points(rng, count):
    lo = np.array([RANGES[f][0] for f in FIELDS])
    hi = np.array([RANGES[f][1] for f in FIELDS])
    return lo + (hi - lo) * rng.random((count, 3))


def generate_exp_pool(count=1000, params=oracle.OracleParams(), seed=0):
    """``count`` uniform-random points, each labelled by one noisy measurement.

    Points are drawn first; exact duplicates are redrawn in index order, then
    measurement noise is drawn for all points from the same stream.
    """
    if count < 1:
        raise DataError(f"experimental pool size must be >= 1, got {count}")
    rng = np.random.default_rng(seed)
    X = _uniform_points(rng, count)
    while True:
        _, first = np.unique(X, axis=0, return_index=True)
        dup = np.setdiff1d(np.arange(count), first)
        if dup.size == 0:
            break
        X[dup] = _uniform_points(rng, dup.size)
    eta = oracle.measure(X[:, 0], X[:, 1], X[:, 2], params, rng)
    prov = {"mode": "uniform-random", "count": int(count), "oracle_digest": params.digest(), "seed": seed}
    return Dataset(X, np.asarray(eta, dtype=float), Fidelity.EXPERIMENTAL, prov)


@dataclass(frozen=True)
class SplitSpec:
    train_frac: float
    test_frac: float
    val_frac: float
    seed: int = 0

    def __post_init__(self):
        fracs = (self.train_frac, self.test_frac, self.val_frac)
        if any(not 0.0 <= f <= 1.0 for f in fracs):
            raise DataError(f"split fractions must lie in [0, 1]: {fracs}")
        if abs(sum(fracs) - 1.0) > 1e-9:
            raise DataError(f"split fractions must sum to 1: {fracs}")


#: Train/test/validation fractions for the simulation and experimental pools.
SIM_SPLIT = (0.1, 0.2, 0.7)
EXP_SPLIT = (0.4, 0.2, 0.4)


def split(data, spec):
    """Seeded shuffle, then contiguous train/test/validation slices."""
    n = len(data)
    if n == 0:
        raise DataError("cannot split an empty dataset")
    perm = np.random.default_rng(spec.seed).permutation(n)
    n_train = int(round(n * spec.train_frac))
    n_test = int(round(n * spec.test_frac))
    parts = (perm[:n_train], perm[n_train : n_train + n_test], perm[n_train + n_test :])
    for name, part in zip(("train", "test", "validation"), parts):
        if part.size == 0:
            raise DataError(f"{name} partition of {n} samples is empty under {spec}")
    out = []
    for name, part in zip(("train", "test", "validation"), parts):
        sub = data.subset(part)
        sub.provenance = {**data.provenance, "partition": name, "split_seed": spec.seed}
        out.append(sub)
    return tuple(out)


# ---------------------------------------------------------------------------
# CSV


def _sidecar(path):
    return os.fspath(path) + ".provenance.json"


def write_csv(data, path):
    """Write ``data`` plus a ``.provenance.json`` sidecar.

    Floats use Python's shortest round-trip repr, so reading back is exact.
    """
    tag = data.fidelity.value
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CSV_HEADER)
        for (d1, d2, p), eta in zip(data.X.tolist(), data.eta.tolist()):
            w.writerow((repr(d1), repr(d2), repr(p), repr(eta), tag))
    side = {**data.provenance, "fidelity": tag, "rows": len(data), "digest": data.digest()}
    with open(_sidecar(path), "w") as fh:
        json.dump(side, fh, indent=2, sort_keys=True)
        fh.write("\n")


def read_csv(path, fidelity=None):
    """Read and validate a dataset file.

    Raises :class:`DataError` for malformed rows (with line numbers) and
    :class:`RangeError` naming the field and line of out-of-range values.
    """
    X, eta, fids = [], [], set()
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or tuple(h.strip() for h in header) != CSV_HEADER:
            raise DataError(f"{path}: line 1: expected header {','.join(CSV_HEADER)}")
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(CSV_HEADER):
                raise DataError(f"{path}: line {lineno}: expected 5 fields, got {len(row)}")
            try:
                vals = [float(v) for v in row[:4]]
            except ValueError:
                raise DataError(f"{path}: line {lineno}: non-numeric field in {row}") from None
            tag = row[4].strip()
            try:
                fids.add(Fidelity(tag))
            except ValueError:
                raise DataError(f"{path}: line {lineno}: unknown fidelity tag {tag!r}") from None
            for name, v in zip(FIELDS, vals):
                lo, hi = RANGES[name]
                if not lo <= v <= hi:
                    raise RangeError(name, v, lo, hi, f"{path}: line {lineno}")
            if not 0.0 < vals[3] <= 100.0:
                raise RangeError("eta_percent", vals[3], 0.0, 100.0, f"{path}: line {lineno}")
            X.append(vals[:3])
            eta.append(vals[3])
    if not X:
        raise DataError(f"{path}: no data rows (empty dataset)")
    if len(fids) > 1:
        raise DataError(f"{path}: mixed fidelity tags {sorted(f.value for f in fids)}")
    fid = fids.pop()
    if fidelity is not None and fid is not Fidelity(fidelity):
        raise DataError(f"{path}: expected fidelity {Fidelity(fidelity).value}, found {fid.value}")
    prov = {}
    if os.path.exists(_sidecar(path)):
        with open(_sidecar(path)) as fh:
            prov = json.load(fh)
        for key in ("fidelity", "rows", "digest"):
            prov.pop(key, None)
    X = check_points(np.array(X), where=os.fspath(path))
    return Dataset(X, np.array(eta), fid, prov)
