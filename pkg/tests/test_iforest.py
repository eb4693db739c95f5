import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from procuraudit.errors import DimensionError, InsufficientData
from procuraudit.iforest import (
    EULER_GAMMA,
    ForestParams,
    IsolationForest,
    IsolationTree,
    ScoreVector,
    avg_path_length_c,
    build_forest,
    build_tree,
    path_length,
    rank_anomalies,
    score,
    splitmix64,
)
from procuraudit.synth import planted_gaussian


def c_formula(n):
    return 2 * (math.log(n - 1) + EULER_GAMMA) - 2 * (n - 1) / n


def walk(tree: IsolationTree, x) -> float:
    """Plain recursive traversal, independent of the vectorized scorer."""
    node, edges = 0, 0
    while tree.feature[node] >= 0:
        node = tree.left[node] if x[tree.feature[node]] < tree.threshold[node] else tree.right[node]
        edges += 1
    return edges + avg_path_length_c(int(tree.size[node]))


class TestAvgPathLength:
    def test_base_cases(self):
        assert avg_path_length_c(0) == 0.0
        assert avg_path_length_c(1) == 0.0
        assert avg_path_length_c(2) == 1.0

    def test_256(self):
        # 2(ln 255 + gamma) - 510/256 from a 40-digit mpmath evaluation
        assert avg_path_length_c(256) == pytest.approx(10.244770920116852, abs=1e-12)

    def test_increasing(self):
        vals = [avg_path_length_c(n) for n in range(1, 2000)]
        assert all(b > a for a, b in zip(vals, vals[1:]))


def tree_of(nodes):
    return IsolationTree.from_list(nodes)


class TestPathLength:
    def test_single_leaf(self):
        assert path_length(tree_of([[-1, 1]]), [0.0]) == 0.0

    def test_one_split(self):
        t = tree_of([[0, 0.5], [-1, 1], [-1, 1]])
        assert path_length(t, [0.0]) == 1.0
        assert path_length(t, [9.0]) == 1.0

    def test_leaf_of_three(self):
        t = tree_of([[0, 0.5], [-1, 1], [-1, 3]])
        # 1 + 2(ln 2 + gamma) - 4/3 from a 40-digit mpmath evaluation
        assert path_length(t, [1.0]) == pytest.approx(2.2073923575865573, abs=1e-12)

    def test_threshold_goes_right(self):
        t = tree_of([[0, 0.5], [-1, 1], [-1, 3]])
        assert path_length(t, [0.5]) == path_length(t, [1.0])

    def test_dimension_mismatch(self):
        t = tree_of([[0, 0.5], [-1, 1], [-1, 1]])
        with pytest.raises(DimensionError):
            path_length(t, [0.0, 1.0], n_features=1)


class TestBuildTree:
    rng = staticmethod(lambda: np.random.default_rng(3))

    def test_single_row(self):
        X = np.array([[1.0, 2.0]])
        t = build_tree(X, np.array([0]), 8, self.rng())
        assert t.n_nodes == 1 and t.size[0] == 1

    def test_two_rows(self):
        X = np.array([[0.0, 5.0], [1.0, 5.0]])
        t = build_tree(X, np.array([0, 1]), 8, self.rng())
        assert t.n_nodes == 3
        assert t.feature[0] == 0 and 0.0 < t.threshold[0] < 1.0
        assert t.size[1] == 1 and t.size[2] == 1

    def test_identical_rows(self):
        X = np.ones((7, 3))
        t = build_tree(X, np.arange(7), 8, self.rng())
        assert t.n_nodes == 1 and t.size[0] == 7

    def test_depth_limit(self):
        X = np.random.default_rng(0).normal(size=(64, 2))
        t = build_tree(X, np.arange(64), 3, self.rng())
        assert t.depth.max() <= 3


@settings(max_examples=40, deadline=None)
@given(st.integers(2, 60), st.integers(1, 4), st.integers(0, 2**32))
def test_tree_structure_invariants(n, d, seed):
    rng = np.random.default_rng(seed)
    X = rng.integers(0, 4, size=(n, d)).astype(float)
    t = build_tree(X, np.arange(n), 6, rng)
    leaves = t.feature < 0
    assert t.size[leaves].sum() == n

    # thresholds strictly inside the node's training range
    def check(node, idx):
        if t.feature[node] < 0:
            assert t.size[node] == idx.size
            return
        f, thr = t.feature[node], t.threshold[node]
        assert X[idx, f].min() < thr < X[idx, f].max()
        go = X[idx, f] < thr
        check(t.left[node], idx[go])
        check(t.right[node], idx[~go])

    check(0, np.arange(n))


class TestForest:
    def test_small_n_uses_all_rows(self):
        X = np.random.default_rng(0).normal(size=(100, 3))
        f = build_forest(X, ForestParams(n_trees=5, seed=1))
        assert f.psi_effective == 100
        for t in f.trees:
            assert t.size[t.feature < 0].sum() == 100

    def test_tree_count(self):
        X = np.random.default_rng(0).normal(size=(20, 2))
        assert len(build_forest(X, ForestParams(n_trees=1)).trees) == 1

    def test_deterministic_json(self):
        X = np.random.default_rng(0).normal(size=(300, 3))
        p = ForestParams(n_trees=10, seed=42)
        assert build_forest(X, p).to_json() == build_forest(X, p).to_json()

    def test_worker_count_invariant(self):
        X = np.random.default_rng(0).normal(size=(300, 3))
        p = ForestParams(n_trees=12, seed=7)
        a = build_forest(X, p, n_jobs=1)
        b = build_forest(X, p, n_jobs=4)
        assert a.to_json() == b.to_json()
        np.testing.assert_array_equal(score(a, X).score, score(b, X).score)

    def test_different_seeds_differ(self):
        X = np.random.default_rng(0).normal(size=(300, 3))
        a = build_forest(X, ForestParams(n_trees=3, seed=1))
        b = build_forest(X, ForestParams(n_trees=3, seed=2))
        assert a.to_json() != b.to_json()

    def test_json_roundtrip_scores(self):
        X = np.random.default_rng(0).normal(size=(200, 4))
        f = build_forest(X, ForestParams(n_trees=8, seed=5))
        g = IsolationForest.from_json(f.to_json())
        np.testing.assert_array_equal(score(f, X).score, score(g, X).score)
        assert g.to_json() == f.to_json()

    def test_insufficient(self):
        with pytest.raises(InsufficientData):
            build_forest(np.zeros((1, 2)))

    def test_scoring_dimension_check(self):
        f = build_forest(np.random.default_rng(0).normal(size=(10, 2)), ForestParams(n_trees=2))
        with pytest.raises(DimensionError):
            score(f, np.zeros((3, 5)))

    def test_param_validation(self):
        for bad in (dict(n_trees=0), dict(subsample_size=1), dict(max_depth=0), dict(seed=-1)):
            with pytest.raises(ValueError):
                ForestParams(**bad)

    def test_splitmix_reference(self):
        # first output of the SplitMix64 reference generator seeded with 0
        assert splitmix64(0) == 0xE220A8397B1DCDAF


class TestScore:
    def setup_method(self):
        rng = np.random.default_rng(11)
        self.X = rng.normal(size=(400, 3))
        self.forest = build_forest(self.X, ForestParams(n_trees=25, seed=3))

    def test_matches_naive_traversal(self):
        sv = score(self.forest, self.X[:50])
        for i, x in enumerate(self.X[:50]):
            e = sum(walk(t, x) for t in self.forest.trees) / len(self.forest.trees)
            assert sv.expected_path[i] == pytest.approx(e, abs=1e-12)
            assert sv.score[i] == pytest.approx(2 ** (-e / avg_path_length_c(256)), abs=1e-12)

    def test_bounds(self):
        sv = score(self.forest, self.X)
        assert ((sv.score > 0) & (sv.score <= 1)).all()
        assert (sv.expected_path >= 0).all()

    def test_duplicate_rows_same_score(self):
        X = np.vstack([self.X[:5], self.X[:5]])
        sv = score(self.forest, X)
        np.testing.assert_array_equal(sv.score[:5], sv.score[5:])

    def test_monotone_in_path_length(self):
        sv = score(self.forest, self.X)
        order = np.argsort(sv.expected_path)
        assert (np.diff(sv.score[order]) <= 0).all()

    def test_reference_points(self):
        c = avg_path_length_c(self.forest.psi_effective)
        assert 2 ** (-c / c) == 0.5
        assert 2 ** (-0.0 / c) == 1.0

    def test_planted_far_point_is_top(self):
        rng = np.random.default_rng(0)
        X = np.vstack([rng.normal(size=(500, 2)), [[10.0, 10.0]]])
        sv = score(build_forest(X, ForestParams(seed=9)), X)
        dist = np.linalg.norm(X - X.mean(axis=0), axis=1)
        assert int(np.argmax(sv.score)) == 500 == int(np.argmax(dist))


class TestRank:
    def test_descending(self):
        assert [k for k, _ in rank_anomalies([0.3, 0.9, 0.5], 2)] == [1, 2]

    def test_ties_by_key(self):
        assert [k for k, _ in rank_anomalies([0.5, 0.5, 0.5], 2, row_keys=[9, 4, 7])] == [4, 7]

    def test_truncates(self):
        assert len(rank_anomalies(ScoreVector(np.zeros(3), np.ones(3)), 10)) == 3

    def test_bad_k(self):
        with pytest.raises(ValueError):
            rank_anomalies([0.1], 0)


def test_planted_outliers_recalled_example_seed():
    X, rows = planted_gaussian(500, 5, 5, 8.0, seed=0)
    sv = score(build_forest(X, ForestParams(seed=0)), X)
    top = {k for k, _ in rank_anomalies(sv, 10)}
    assert set(rows.tolist()) <= top
