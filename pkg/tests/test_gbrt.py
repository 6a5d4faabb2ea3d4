import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from d2ea.errors import ConfigError, DataError
from d2ea.gbrt import (
    STAGE_ONE,
    STAGE_TWO,
    GbrtModel,
    GbrtParams,
    RegressionTree,
    best_split,
    fit_tree,
    gbrt_fit,
    gbrt_predict,
    leaf_value,
)


def brute_force_splits(X, r, lam):
    """Every candidate split with its gain, computed directly from the definition."""
    X = np.asarray(X, float)
    r = [float(v) for v in r]
    score = lambda s: math.fsum(s) ** 2 / (len(s) + lam)
    parent = score(r)
    out = []
    for f in range(X.shape[1]):
        vals = sorted(set(X[:, f].tolist()))
        for a, b in zip(vals, vals[1:]):
            t = 0.5 * (a + b)
            left = [ri for xi, ri in zip(X[:, f], r) if xi <= t]
            right = [ri for xi, ri in zip(X[:, f], r) if xi > t]
            out.append((f, t, score(left) + score(right) - parent))
    return out


def replay(tree, X):
    """Pure-Python tree walk, independent of the numba kernel."""
    out = []
    for x in np.asarray(X, float):
        nd = 0
        while tree.feature[nd] >= 0:
            nd = tree.left[nd] if x[tree.feature[nd]] <= tree.threshold[nd] else tree.right[nd]
        out.append(tree.value[nd])
    return np.array(out)


class TestLeafValue:
    def test_regularized_pair(self):
        assert leaf_value([0.1, 0.3], 1.0) == pytest.approx(0.4 / 3.0, abs=1e-15)

    def test_single(self):
        assert leaf_value([0.5], 0.5) == pytest.approx(1.0 / 3.0, abs=1e-15)

    @pytest.mark.parametrize("c", [-3.25, 0.0, 0.9, 97.5])
    def test_constant_unregularized(self, c):
        assert leaf_value([c] * 7, 0.0) == pytest.approx(c, rel=1e-15)

    def test_empty(self):
        with pytest.raises(DataError, match="empty leaf"):
            leaf_value([], 1.0)

    @given(
        st.lists(st.floats(-100, 100), min_size=1, max_size=30),
        st.floats(0, 10),
        st.floats(0, 10),
    )
    def test_shrinkage_monotone_in_lambda(self, r, l1, l2):
        lo, hi = sorted((l1, l2))
        assert abs(leaf_value(r, lo)) >= abs(leaf_value(r, hi))


class TestBestSplit:
    def test_two_points(self):
        s = best_split([[0.0], [1.0]], [-1.0, 1.0], 0.0)
        assert (s.feature_index, s.threshold) == (0, 0.5)
        assert s.gain == pytest.approx(2.0)

    def test_four_points_brute_force(self):
        X = [[0.0], [1.0], [2.0], [3.0]]
        r = [0.0, 0.0, 10.0, 10.0]
        cands = brute_force_splits(X, r, 0.0)
        best = max(cands, key=lambda c: c[2])
        assert best[1] == 1.5
        s = best_split(X, r, 0.0)
        assert s.threshold == 1.5
        assert s.gain == pytest.approx(best[2])

    def test_constant_residuals(self, rng):
        X = rng.random((40, 3))
        assert best_split(X, np.full(40, 0.7), 0.0) is None

    def test_identical_rows(self):
        assert best_split(np.ones((5, 2)), [1.0, 2.0, 3.0, 4.0, 5.0], 0.0) is None

    def test_tie_prefers_lower_feature(self):
        X = np.array([[0.0, 0.0], [1.0, 1.0]])
        s = best_split(X, [1.0, -1.0], 0.0)
        assert s.feature_index == 0

    def test_tie_prefers_smaller_threshold(self):
        # symmetric residuals: splits at 0.5 and 2.5 have equal gain
        X = [[0.0], [1.0], [2.0], [3.0]]
        s = best_split(X, [5.0, 0.0, 0.0, 5.0], 0.0)
        cands = brute_force_splits(X, [5.0, 0.0, 0.0, 5.0], 0.0)
        top = max(c[2] for c in cands)
        assert [c[1] for c in cands if c[2] == top] == [0.5, 2.5]
        assert s.threshold == 0.5

    @settings(max_examples=60, deadline=None)
    @given(
        st.integers(2, 25).flatmap(
            lambda n: st.tuples(
                st.lists(st.lists(st.integers(0, 6), min_size=2, max_size=2), min_size=n, max_size=n),
                st.lists(st.floats(-5, 5, allow_nan=False), min_size=n, max_size=n),
            )
        ),
        st.sampled_from([0.0, 0.01, 1.0]),
    )
    def test_matches_brute_force(self, data, lam):
        X, r = np.array(data[0], float), np.array(data[1])
        cands = brute_force_splits(X, r, lam)
        s = best_split(X, r, lam)
        top = max((c[2] for c in cands), default=-np.inf)
        scale = float(np.sum(r * r)) + 1.0
        if top <= 1e-9 * scale:
            assert s is None or s.gain <= 1e-9 * scale
            return
        assert s is not None
        chosen = [c for c in cands if c[0] == s.feature_index and c[1] == s.threshold]
        assert len(chosen) == 1
        assert chosen[0][2] == pytest.approx(top, rel=1e-9, abs=1e-9)
        clear_winners = [c for c in cands if c[2] > top - 1e-7 * scale]
        if len(clear_winners) == 1:
            assert (s.feature_index, s.threshold) == clear_winners[0][:2]


class TestFitTree:
    def test_depth_zero_is_stump(self, rng):
        X, r = rng.random((20, 3)), rng.standard_normal(20)
        t = fit_tree(X, r, GbrtParams(max_height=0, l2_lambda=0.5))
        assert t.n_nodes == 1 and t.depth == 0
        assert t.value[0] == pytest.approx(leaf_value(r, 0.5), rel=1e-13)

    def test_four_points_reproduced(self):
        X = np.array([[0.0], [1.0], [2.0], [3.0]])
        r = np.array([0.0, 0.0, 10.0, 10.0])
        t = fit_tree(X, r, GbrtParams(max_height=2, l2_lambda=0.0))
        np.testing.assert_array_equal(replay(t, X), r)
        np.testing.assert_array_equal(t.predict(X), r)

    def test_identical_rows_single_leaf(self):
        t = fit_tree(np.full((6, 3), 0.25), np.arange(6.0), GbrtParams(max_height=5, l2_lambda=0.0))
        assert t.n_nodes == 1
        assert t.value[0] == pytest.approx(2.5)

    def test_length_mismatch(self):
        with pytest.raises(DataError):
            fit_tree(np.zeros((3, 2)), [1.0, 2.0], GbrtParams())

    def test_structure_invariants(self, rng):
        X, r = rng.random((300, 3)), rng.standard_normal(300)
        for h in (0, 1, 3, 7, 11):
            t = fit_tree(X, r, GbrtParams(max_height=h, l2_lambda=0.1))
            assert t.depth <= h
            internal = t.feature >= 0
            assert np.all((t.left[internal] > 0) & (t.right[internal] > 0))
            assert np.all((t.left[~internal] == -1) & (t.right[~internal] == -1))
            assert np.all(t.feature[internal] < 3)
            np.testing.assert_array_equal(t.predict(X), replay(t, X))

    def test_paths_are_consistent(self, rng):
        """On every root-to-leaf path the active interval per feature stays nonempty."""
        X, r = rng.random((200, 2)), rng.standard_normal(200)
        t = fit_tree(X, r, GbrtParams(max_height=9, l2_lambda=0.0))
        stack = [(0, {0: (-np.inf, np.inf), 1: (-np.inf, np.inf)})]
        while stack:
            nd, box = stack.pop()
            f = t.feature[nd]
            if f < 0:
                continue
            lo, hi = box[f]
            assert lo < t.threshold[nd] < hi
            stack.append((t.left[nd], {**box, f: (lo, t.threshold[nd])}))
            stack.append((t.right[nd], {**box, f: (t.threshold[nd], hi)}))

    def test_leaves_hold_regularized_means(self, rng):
        X, r = rng.random((120, 3)), rng.standard_normal(120)
        lam = 0.7
        t = fit_tree(X, r, GbrtParams(max_height=3, l2_lambda=lam))
        leaf_of = []
        for x in X:
            nd = 0
            while t.feature[nd] >= 0:
                nd = t.left[nd] if x[t.feature[nd]] <= t.threshold[nd] else t.right[nd]
            leaf_of.append(nd)
        leaf_of = np.array(leaf_of)
        for nd in np.unique(leaf_of):
            assert t.value[nd] == pytest.approx(leaf_value(r[leaf_of == nd], lam), rel=1e-12, abs=1e-15)


class TestGbrtFit:
    def test_constant_target(self, rng):
        X = rng.random((30, 3))
        m = gbrt_fit(X, np.full(30, 0.9), GbrtParams(num_trees=25, max_height=4))
        assert m.base_prediction == 0.9
        assert len(m.trees) == 1 and m.trees[0].is_zero()
        np.testing.assert_array_equal(m.predict(rng.random((10, 3))), 0.9)

    def test_exact_fit_with_enough_depth(self, rng):
        # greedy splitting isolates every row once the height bound cannot bind
        X, y = rng.random((50, 3)), rng.random(50)
        m = gbrt_fit(X, y, GbrtParams(num_trees=1, max_height=49, l2_lambda=0.0, learning_rate=1.0))
        assert np.mean((m.predict(X) - y) ** 2) < 1e-20

    def test_balanced_exact_fit_height_eight(self):
        # linear targets make every greedy split a median split
        x = np.arange(50.0)[:, None]
        y = 0.5 * x[:, 0] + 3.0
        m = gbrt_fit(x, y, GbrtParams(num_trees=1, max_height=8, l2_lambda=0.0, learning_rate=1.0))
        assert np.mean((m.predict(x) - y) ** 2) < 1e-20

    def test_residual_telescoping(self, rng):
        X, y = rng.random((200, 3)), 97 + rng.standard_normal(200)
        m = gbrt_fit(X, y, GbrtParams(num_trees=40, max_height=5, l2_lambda=1.0, learning_rate=0.1))
        # independent replay of the residual recursion r_l = r_{l-1} - rate * tree_l(x)
        r = y - m.base_prediction
        for t in m.trees:
            r = r - m.learning_rate * replay(t, X)
        np.testing.assert_allclose(y - m.predict(X), r, rtol=0, atol=1e-12)

    @pytest.mark.parametrize("lam", [0.0, 1.0])
    def test_training_loss_monotone(self, rng, lam):
        X, y = rng.random((300, 3)), rng.standard_normal(300)
        m = gbrt_fit(X, y, GbrtParams(num_trees=60, max_height=4, l2_lambda=lam, learning_rate=0.3))
        mse = [np.mean((p - y) ** 2) for p in m.staged_predict(X)]
        assert all(b <= a * (1 + 1e-12) for a, b in zip(mse, mse[1:]))

    def test_permutation_invariance(self, rng):
        X, y = rng.random((150, 3)), rng.standard_normal(150)
        X[10:20, 0] = 0.5  # ties in one feature
        p = GbrtParams(num_trees=15, max_height=5, l2_lambda=0.3, learning_rate=0.2)
        perm = rng.permutation(150)
        a = gbrt_fit(X, y, p).to_json()
        b = gbrt_fit(X[perm], y[perm], p).to_json()
        assert a == b

    def test_zero_base(self, rng):
        X, y = rng.random((20, 3)), rng.standard_normal(20)
        m = gbrt_fit(X, y, GbrtParams(num_trees=3, max_height=2), base="zero")
        assert m.base_prediction == 0.0

    def test_tree_count_bound(self, rng):
        X, y = rng.random((80, 3)), rng.standard_normal(80)
        assert len(gbrt_fit(X, y, GbrtParams(num_trees=7, max_height=3)).trees) <= 7
        assert len(gbrt_fit(X, y, GbrtParams(num_trees=0)).trees) == 0

    def test_empty(self):
        with pytest.raises(DataError):
            gbrt_fit(np.zeros((0, 3)), [], GbrtParams())


class TestPredict:
    def test_empty_ensemble(self):
        m = GbrtModel(0.0, [], 0.1, 3)
        assert gbrt_predict(m, [0.2, 0.3, 500.0]) == 0.0

    def test_single_stump(self):
        stump = RegressionTree.from_preorder([{"value": 2.0}])
        m = GbrtModel(96.5, [stump], 0.25, 3)
        assert gbrt_predict(m, [0.1, 0.1, 300.0]) == 96.5 + 0.25 * 2.0

    def test_arity_mismatch(self):
        with pytest.raises(DataError):
            gbrt_predict(GbrtModel(0.0, [], 0.1, 3), [0.1, 0.2])

    def test_grid_matches_pointwise(self, rng):
        X, y = rng.random((300, 3)), rng.standard_normal(300)
        m = gbrt_fit(X, y, GbrtParams(num_trees=20, max_height=6, l2_lambda=0.1, learning_rate=0.2))
        axes = [np.linspace(0, 1, 31), np.linspace(0, 1, 17), np.array([0.2, 0.71])]
        grid = m.predict_grid(axes)
        mesh = np.meshgrid(*axes, indexing="ij")
        flat = m.predict(np.column_stack([g.ravel() for g in mesh]))
        np.testing.assert_array_equal(grid.ravel(), flat)


class TestSerialization:
    def test_round_trip_bitwise(self, rng):
        X, y = rng.random((200, 3)), 95 + 3 * rng.random(200)
        m = gbrt_fit(X, y, GbrtParams(num_trees=12, max_height=6, l2_lambda=0.1, learning_rate=0.1))
        text = m.to_json()
        m2 = GbrtModel.from_json(text)
        assert m2.to_json() == text
        probe = rng.random((500, 3))
        np.testing.assert_array_equal(m.predict(probe), m2.predict(probe))

    def test_document_layout(self, rng):
        m = gbrt_fit(rng.random((30, 2)), rng.random(30), GbrtParams(num_trees=2, max_height=2))
        doc = json.loads(m.to_json())
        assert set(doc) == {"feature_arity", "base_prediction", "learning_rate", "trees"}
        root = doc["trees"][0][0]
        assert set(root) in ({"feature", "threshold"}, {"value"})

    def test_preorder_round_trip(self):
        nodes = [
            {"feature": 1, "threshold": 0.5},
            {"value": -1.0},
            {"feature": 0, "threshold": 0.25},
            {"value": 2.0},
            {"value": 3.0},
        ]
        t = RegressionTree.from_preorder(nodes)
        assert t.to_preorder() == nodes
        np.testing.assert_array_equal(t.predict([[0.0, 0.0], [0.1, 0.9], [0.9, 0.9]]), [-1.0, 2.0, 3.0])

    def test_bad_feature_index(self):
        doc = {"feature_arity": 1, "base_prediction": 0, "learning_rate": 1,
               "trees": [[{"feature": 3, "threshold": 0}, {"value": 1}, {"value": 2}]]}
        with pytest.raises(DataError):
            GbrtModel.from_dict(doc)


class TestParams:
    def test_defaults(self):
        assert (STAGE_ONE.max_height, STAGE_ONE.num_trees, STAGE_ONE.l2_lambda, STAGE_ONE.learning_rate) == (
            11, 140, 1.0, 0.05)
        assert (STAGE_TWO.max_height, STAGE_TWO.num_trees, STAGE_TWO.l2_lambda, STAGE_TWO.learning_rate) == (
            9, 94, 0.01, 0.1)

    @pytest.mark.parametrize(
        "kwargs",
        [{"num_trees": -1}, {"max_height": -1}, {"l2_lambda": -0.1}, {"learning_rate": 0.0},
         {"learning_rate": 1.5}, {"min_samples_split": 1}],
    )
    def test_rejects(self, kwargs):
        with pytest.raises(ConfigError):
            GbrtParams(**kwargs)
