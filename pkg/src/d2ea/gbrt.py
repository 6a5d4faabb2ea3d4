"""Exact-greedy gradient-boosted regression trees for squared loss.

Each tree is grown level by level on presorted feature columns.  A node with
residuals ``r`` scores ``(sum r)^2 / (n + l2_lambda)``; a split's gain is the
children's scores minus the parent's, and leaves take the regularized mean
``sum r / (n + l2_lambda)``.  Trees are stored as flat node arrays in
breadth-first order and evaluated with numba kernels.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numba
import numpy as np

from .errors import ConfigError, DataError

# Gains below this fraction of the node's residual sum of squares are treated
# as zero; they are at the level of accumulated rounding error.
GAIN_RTOL = 1e-10


@dataclass(frozen=True)
class GbrtParams:
    """Boosting hyperparameters.

    ``max_height`` counts edges from the root, so height 0 is a single leaf.
    """

    num_trees: int = 140
    max_height: int = 11
    l2_lambda: float = 1.0
    learning_rate: float = 0.05
    min_samples_split: int = 2

    def __post_init__(self):
        if self.num_trees < 0:
            raise ConfigError(f"num_trees={self.num_trees} must be >= 0")
        if self.max_height < 0:
            raise ConfigError(f"max_height={self.max_height} must be >= 0")
        if not self.l2_lambda >= 0:
            raise ConfigError(f"l2_lambda={self.l2_lambda} must be >= 0")
        if not 0 < self.learning_rate <= 1:
            raise ConfigError(f"learning_rate={self.learning_rate} must be in (0, 1]")
        if self.min_samples_split < 2:
            raise ConfigError(f"min_samples_split={self.min_samples_split} must be >= 2")

    @classmethod
    def from_mapping(cls, values, base=None):
        base = base or cls()
        kwargs = {
            "num_trees": base.num_trees,
            "max_height": base.max_height,
            "l2_lambda": base.l2_lambda,
            "learning_rate": base.learning_rate,
            "min_samples_split": base.min_samples_split,
        }
        for key, raw in values.items():
            if key not in kwargs:
                raise ConfigError(f"unknown boosting key {key!r}")
            conv = float if key in ("l2_lambda", "learning_rate") else int
            try:
                kwargs[key] = conv(raw)
            except ValueError:
                raise ConfigError(f"boosting key {key!r}: bad value {raw!r}") from None
        return cls(**kwargs)


#: Stage-I (simulation landscape) settings.
STAGE_ONE = GbrtParams(num_trees=140, max_height=11, l2_lambda=1.0, learning_rate=0.05)
#: Stage-II (experimental gap) settings.
STAGE_TWO = GbrtParams(num_trees=94, max_height=9, l2_lambda=0.01, learning_rate=0.1)


@dataclass(frozen=True)
class SplitCandidate:
    feature_index: int
    threshold: float
    gain: float


def leaf_value(residuals, l2_lambda):
    """Regularized leaf weight ``sum(r) / (len(r) + l2_lambda)``."""
    r = np.asarray(residuals, dtype=float).ravel()
    if r.size == 0:
        raise DataError("empty leaf")
    if l2_lambda < 0:
        raise ValueError("l2_lambda must be >= 0")
    return float(_seq_sum(r) / (r.size + l2_lambda))


# ---------------------------------------------------------------------------
# numba kernels


@numba.njit(cache=True)
def _seq_sum(r):
    s = 0.0
    for i in range(r.shape[0]):
        s += r[i]
    return s


@numba.njit(cache=True)
def _node_totals(r, node_of, n_nodes):
    sums = np.zeros(n_nodes)
    sq = np.zeros(n_nodes)
    counts = np.zeros(n_nodes, dtype=np.int64)
    for i in range(r.shape[0]):
        nd = node_of[i]
        if nd >= 0:
            sums[nd] += r[i]
            sq[nd] += r[i] * r[i]
            counts[nd] += 1
    return sums, sq, counts


@numba.njit(cache=True)
def _level_splits(X, r, presort, node_of, sums, counts, lam):
    """Best split for every node on the current level.

    Scans each feature once in sorted order, accumulating per-node prefix sums.
    Only strictly larger gains replace the incumbent, so ties keep the lowest
    feature index and then the smallest threshold.
    """
    n_nodes = sums.shape[0]
    best_feat = np.full(n_nodes, -1, dtype=np.int64)
    best_thr = np.zeros(n_nodes)
    best_gain = np.full(n_nodes, -np.inf)
    parent = np.empty(n_nodes)
    for nd in range(n_nodes):
        parent[nd] = sums[nd] * sums[nd] / (counts[nd] + lam)
    left_sum = np.zeros(n_nodes)
    left_cnt = np.zeros(n_nodes, dtype=np.int64)
    last_x = np.zeros(n_nodes)
    for f in range(X.shape[1]):
        left_sum[:] = 0.0
        left_cnt[:] = 0
        order = presort[f]
        for k in range(order.shape[0]):
            i = order[k]
            nd = node_of[i]
            if nd < 0:
                continue
            xi = X[i, f]
            nl = left_cnt[nd]
            if nl > 0 and xi > last_x[nd]:
                sl = left_sum[nd]
                sr = sums[nd] - sl
                nr = counts[nd] - nl
                gain = sl * sl / (nl + lam) + sr * sr / (nr + lam) - parent[nd]
                if gain > best_gain[nd]:
                    thr = 0.5 * (last_x[nd] + xi)
                    if thr >= xi:
                        thr = last_x[nd]
                    best_gain[nd] = gain
                    best_feat[nd] = f
                    best_thr[nd] = thr
            left_sum[nd] += r[i]
            left_cnt[nd] = nl + 1
            last_x[nd] = xi
    return best_feat, best_thr, best_gain


@numba.njit(cache=True)
def _forest_sum(feature, threshold, left, right, value, roots, X):
    """Per-row sum of tree outputs, accumulated in tree order."""
    n = X.shape[0]
    out = np.zeros(n)
    for i in range(n):
        s = 0.0
        for t in range(roots.shape[0]):
            nd = roots[t]
            while feature[nd] >= 0:
                if X[i, feature[nd]] <= threshold[nd]:
                    nd = left[nd]
                else:
                    nd = right[nd]
            s += value[nd]
        out[i] = s
    return out


# ---------------------------------------------------------------------------
# trees


@dataclass(frozen=True, eq=False)
class RegressionTree:
    """Flat binary tree; node 0 is the root.

    Internal nodes have ``feature >= 0`` and two children; leaves have
    ``feature == -1`` and carry ``value``.  Rows with ``x[feature] <= threshold``
    go left.
    """

    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray

    @property
    def n_nodes(self):
        return int(self.feature.shape[0])

    @property
    def n_leaves(self):
        return int(np.count_nonzero(self.feature < 0))

    @property
    def depth(self):
        d = np.zeros(self.n_nodes, dtype=np.int64)
        for nd in range(self.n_nodes):  # children always follow their parent
            if self.feature[nd] >= 0:
                d[self.left[nd]] = d[self.right[nd]] = d[nd] + 1
        return int(d.max())

    def is_zero(self):
        return bool(np.all(self.value[self.feature < 0] == 0.0))

    def predict(self, X):
        X = np.ascontiguousarray(X, dtype=float)
        roots = np.zeros(1, dtype=np.int64)
        return _forest_sum(self.feature, self.threshold, self.left, self.right, self.value, roots, X)

    def to_preorder(self):
        """Nodes as ``{"feature", "threshold"}`` / ``{"value"}`` dicts in pre-order."""
        out = []
        stack = [0]
        while stack:
            nd = stack.pop()
            if self.feature[nd] < 0:
                out.append({"value": float(self.value[nd])})
            else:
                out.append({"feature": int(self.feature[nd]), "threshold": float(self.threshold[nd])})
                stack.append(int(self.right[nd]))
                stack.append(int(self.left[nd]))
        return out

    @classmethod
    def from_preorder(cls, nodes):
        feature, threshold, left, right, value = [], [], [], [], []

        def build(pos):
            if pos >= len(nodes):
                raise DataError("truncated tree node list")
            node = nodes[pos]
            me = len(feature)
            feature.append(-1)
            threshold.append(0.0)
            left.append(-1)
            right.append(-1)
            value.append(0.0)
            if "value" in node:
                value[me] = float(node["value"])
                return me, pos + 1
            feature[me] = int(node["feature"])
            threshold[me] = float(node["threshold"])
            lchild, pos = build(pos + 1)
            rchild, pos = build(pos)
            left[me], right[me] = lchild, rchild
            return me, pos

        _, end = build(0)
        if end != len(nodes):
            raise DataError("trailing nodes after a complete tree")
        return cls(
            np.array(feature, dtype=np.int64),
            np.array(threshold, dtype=float),
            np.array(left, dtype=np.int64),
            np.array(right, dtype=np.int64),
            np.array(value, dtype=float),
        )


def _as_xy(features, residuals):
    X = np.asarray(features, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    r = np.asarray(residuals, dtype=float).ravel()
    if X.ndim != 2 or X.shape[0] != r.shape[0]:
        raise DataError(f"features have {X.shape[0]} rows but {r.shape[0]} residuals were given")
    return np.ascontiguousarray(X), np.ascontiguousarray(r)


def _presort(X):
    return np.ascontiguousarray(np.argsort(X, axis=0, kind="stable").T.astype(np.int64))


def best_split(features, residuals, l2_lambda):
    """Best single split of one node, or ``None`` if no split has positive gain."""
    X, r = _as_xy(features, residuals)
    if X.shape[0] < 2:
        return None
    node_of = np.zeros(X.shape[0], dtype=np.int64)
    sums, sq, counts = _node_totals(r, node_of, 1)
    feat, thr, gain = _level_splits(X, r, _presort(X), node_of, sums, counts, float(l2_lambda))
    if feat[0] < 0 or not gain[0] > GAIN_RTOL * sq[0]:
        return None
    return SplitCandidate(int(feat[0]), float(thr[0]), float(gain[0]))


def fit_tree(features, residuals, params, presort=None):
    """Grow one tree on ``residuals`` breadth-first up to ``params.max_height``."""
    X, r = _as_xy(features, residuals)
    n = X.shape[0]
    if n == 0:
        raise DataError("cannot fit a tree on zero samples")
    if presort is None:
        presort = _presort(X)
    lam = float(params.l2_lambda)

    cap = 2 * n - 1  # a binary tree over n samples has at most 2n - 1 nodes
    feature = np.full(cap, -1, dtype=np.int64)
    threshold = np.zeros(cap)
    left = np.full(cap, -1, dtype=np.int64)
    right = np.full(cap, -1, dtype=np.int64)
    value = np.zeros(cap)

    node_of = np.zeros(n, dtype=np.int64)  # level-local node id, -1 once in a leaf
    level_ids = np.array([0], dtype=np.int64)  # global ids of this level's nodes
    n_used = 1
    depth = 0
    while level_ids.size:
        k = level_ids.size
        sums, sq, counts = _node_totals(r, node_of, k)
        if depth < params.max_height:
            bf, bt, bg = _level_splits(X, r, presort, node_of, sums, counts, lam)
            split = (bf >= 0) & (counts >= params.min_samples_split) & (bg > GAIN_RTOL * sq)
        else:
            split = np.zeros(k, dtype=bool)

        leaf_local = np.flatnonzero(~split)
        value[level_ids[leaf_local]] = sums[leaf_local] / (counts[leaf_local] + lam)

        split_local = np.flatnonzero(split)
        s = split_local.size
        if s == 0:
            break
        gids = level_ids[split_local]
        child_left = n_used + 2 * np.arange(s)
        n_used += 2 * s
        feature[gids] = bf[split_local]
        threshold[gids] = bt[split_local]
        left[gids] = child_left
        right[gids] = child_left + 1

        # route samples of split nodes to their children (local ids 2j, 2j+1)
        new_local = np.full(k, -1, dtype=np.int64)
        new_local[split_local] = 2 * np.arange(s)
        idx = np.flatnonzero(node_of >= 0)
        nd = node_of[idx]
        dest = new_local[nd]
        keep = dest >= 0
        idx, nd, dest = idx[keep], nd[keep], dest[keep]
        goes_right = X[idx, bf[nd]] > bt[nd]
        node_of[:] = -1
        node_of[idx] = dest + goes_right
        level_ids = np.empty(2 * s, dtype=np.int64)
        level_ids[0::2] = child_left
        level_ids[1::2] = child_left + 1
        depth += 1

    return RegressionTree(
        feature[:n_used].copy(),
        threshold[:n_used].copy(),
        left[:n_used].copy(),
        right[:n_used].copy(),
        value[:n_used].copy(),
    )


# ---------------------------------------------------------------------------
# ensembles


@dataclass(eq=False)
class GbrtModel:
    """``base_prediction + learning_rate * sum(tree(x))`` over ``trees`` in order."""

    base_prediction: float
    trees: list
    learning_rate: float
    feature_arity: int
    _packed: tuple | None = field(default=None, repr=False)

    def _pack(self):
        if self._packed is None:
            offsets, feats, thrs, lefts, rights, vals = [], [], [], [], [], []
            off = 0
            for t in self.trees:
                offsets.append(off)
                feats.append(t.feature)
                thrs.append(t.threshold)
                lefts.append(np.where(t.left >= 0, t.left + off, -1))
                rights.append(np.where(t.right >= 0, t.right + off, -1))
                vals.append(t.value)
                off += t.n_nodes
            cat = lambda parts, dt: np.ascontiguousarray(
                np.concatenate(parts) if parts else np.zeros(0), dtype=dt
            )
            self._packed = (
                cat(feats, np.int64),
                cat(thrs, float),
                cat(lefts, np.int64),
                cat(rights, np.int64),
                cat(vals, float),
                np.array(offsets, dtype=np.int64),
            )
        return self._packed

    def tree_sum(self, X):
        X = self._check(X)
        feat, thr, left, right, val, roots = self._pack()
        return _forest_sum(feat, thr, left, right, val, roots, X)

    def predict(self, X):
        """Vectorized prediction for an ``(n, feature_arity)`` array."""
        return self.base_prediction + self.learning_rate * self.tree_sum(X)

    def tree_sum_grid(self, axes):
        """Sum of tree outputs on the Cartesian grid spanned by sorted ``axes``.

        Equal, bit for bit, to :meth:`tree_sum` on the flattened grid, but
        each tree is walked once per axis-aligned block instead of per point.
        """
        axes = [np.asarray(a, dtype=float).ravel() for a in axes]
        if len(axes) != self.feature_arity:
            raise DataError(f"need {self.feature_arity} axes, got {len(axes)}")
        if any(np.any(np.diff(a) < 0) for a in axes):
            raise ValueError("grid axes must be sorted ascending")
        out = np.zeros(tuple(a.size for a in axes))
        full = tuple((0, a.size) for a in axes)
        for t in self.trees:
            acc = np.zeros_like(out)
            stack = [(0, full)]
            while stack:
                nd, box = stack.pop()
                f = t.feature[nd]
                if f < 0:
                    acc[tuple(slice(lo, hi) for lo, hi in box)] = t.value[nd]
                    continue
                lo, hi = box[f]
                cut = int(np.searchsorted(axes[f], t.threshold[nd], side="right"))
                if lo < min(hi, cut):
                    stack.append((t.left[nd], box[:f] + ((lo, min(hi, cut)),) + box[f + 1 :]))
                if max(lo, cut) < hi:
                    stack.append((t.right[nd], box[:f] + ((max(lo, cut), hi),) + box[f + 1 :]))
            out += acc
        return out

    def predict_grid(self, axes):
        return self.base_prediction + self.learning_rate * self.tree_sum_grid(axes)

    def staged_predict(self, X):
        """Yield predictions after 0, 1, ..., len(trees) trees."""
        X = self._check(X)
        s = np.zeros(X.shape[0])
        yield self.base_prediction + self.learning_rate * s
        for t in self.trees:
            s = s + t.predict(X)
            yield self.base_prediction + self.learning_rate * s

    def _check(self, X):
        X = np.asarray(X, dtype=float)
        if X.ndim != 2 or X.shape[1] != self.feature_arity:
            raise DataError(f"expected {self.feature_arity} features per row, got shape {X.shape}")
        return np.ascontiguousarray(X)

    def to_dict(self):
        return {
            "feature_arity": self.feature_arity,
            "base_prediction": self.base_prediction,
            "learning_rate": self.learning_rate,
            "trees": [t.to_preorder() for t in self.trees],
        }

    @classmethod
    def from_dict(cls, doc):
        try:
            trees = [RegressionTree.from_preorder(nodes) for nodes in doc["trees"]]
            model = cls(
                base_prediction=float(doc["base_prediction"]),
                trees=trees,
                learning_rate=float(doc["learning_rate"]),
                feature_arity=int(doc["feature_arity"]),
            )
        except (KeyError, TypeError) as exc:
            raise DataError(f"malformed model document: {exc!r}") from None
        for t in trees:
            internal = t.feature >= 0
            if np.any(t.feature[internal] >= model.feature_arity):
                raise DataError("tree references a feature beyond feature_arity")
        return model

    def to_json(self):
        return json.dumps(self.to_dict())

    @classmethod
    def from_json(cls, text):
        return cls.from_dict(json.loads(text))


def gbrt_predict(model, point):
    """Prediction at a single feature vector."""
    x = np.asarray(point, dtype=float).ravel()
    if x.shape[0] != model.feature_arity:
        raise DataError(f"point has {x.shape[0]} features, model expects {model.feature_arity}")
    return float(model.predict(x[None, :])[0])


def _mean(y):
    if y.min() == y.max():
        return float(y[0])
    return math.fsum(y) / y.size


def gbrt_fit(features, targets, params, base="mean"):
    """Fit a boosted ensemble.

    Parameters
    ----------
    features : array of shape (n, m)
    targets : array of shape (n,)
    params : GbrtParams
    base : {"mean", "zero"}
        Starting prediction before the first tree.

    Rows are put in a canonical order first, so the fitted model does not
    depend on the order in which samples are supplied.  Fitting stops early
    once a tree comes out identically zero.
    """
    X, y = _as_xy(features, targets)
    if X.shape[0] == 0:
        raise DataError("cannot fit on an empty dataset")
    if base not in ("mean", "zero"):
        raise ValueError(f"unknown base mode {base!r}")
    order = np.lexsort((y,) + tuple(X[:, j] for j in reversed(range(X.shape[1]))))
    X = np.ascontiguousarray(X[order])
    y = y[order]

    base_pred = _mean(y) if base == "mean" else 0.0
    model = GbrtModel(base_pred, [], float(params.learning_rate), X.shape[1])
    presort = _presort(X)
    s = np.zeros(X.shape[0])
    for _ in range(params.num_trees):
        resid = y - (base_pred + params.learning_rate * s)
        tree = fit_tree(X, resid, params, presort=presort)
        model.trees.append(tree)
        if tree.is_zero():
            break
        s = s + tree.predict(X)
    model._packed = None
    return model
