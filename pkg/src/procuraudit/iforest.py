"""Isolation forest built from scratch on numpy arrays.

Each tree is stored as flat preorder arrays.  Tree ``k`` draws its subsample
and splits from a generator seeded with ``splitmix64(seed ^ k)``, so a
forest is identical whatever the build order or worker count.
"""

from __future__ import annotations

import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass
from typing import Hashable, Sequence

import numpy as np

from .errors import DimensionError, InsufficientData

EULER_GAMMA = 0.5772156649
FORMAT_VERSION = 1
_MASK64 = (1 << 64) - 1


def avg_path_length_c(n: int) -> float:
    """Average path length of an unsuccessful search in a BST of ``n`` points."""
    if n < 0:
        raise ValueError("n must be >= 0")
    if n <= 1:
        return 0.0
    if n == 2:
        return 1.0
    return 2.0 * (math.log(n - 1) + EULER_GAMMA) - 2.0 * (n - 1) / n


def splitmix64(x: int) -> int:
    x = (x + 0x9E3779B97F4A7C15) & _MASK64
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & _MASK64
    return x ^ (x >> 31)


def tree_rng(seed: int, k: int) -> np.random.Generator:
    return np.random.default_rng(splitmix64((seed ^ k) & _MASK64))


@dataclass(frozen=True)
class ForestParams:
    n_trees: int = 100
    subsample_size: int = 256
    max_depth: int | None = None
    seed: int = 0

    def __post_init__(self):
        if self.n_trees < 1:
            raise ValueError("n_trees must be >= 1")
        if self.subsample_size < 2:
            raise ValueError("subsample_size must be >= 2")
        if self.max_depth is not None and self.max_depth < 1:
            raise ValueError("max_depth must be >= 1")
        if not 0 <= self.seed <= _MASK64:
            raise ValueError("seed must be an unsigned 64-bit integer")

    def depth_limit(self, psi: int) -> int:
        if self.max_depth is not None:
            return self.max_depth
        return max(1, math.ceil(math.log2(psi)))


@dataclass
class IsolationTree:
    """Preorder node arrays.  ``feature == -1`` marks an external node."""

    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    size: np.ndarray
    depth: np.ndarray

    @property
    def n_nodes(self) -> int:
        return len(self.feature)

    @property
    def is_leaf(self) -> np.ndarray:
        return self.feature < 0

    def leaf_path(self) -> np.ndarray:
        """Per-node path length if a point stops there: depth + c(size)."""
        c = np.array([avg_path_length_c(int(s)) for s in self.size])
        return self.depth + c

    def to_list(self) -> list[list]:
        out = []
        for i in range(self.n_nodes):
            if self.feature[i] < 0:
                out.append([-1, int(self.size[i])])
            else:
                out.append([int(self.feature[i]), float(self.threshold[i])])
        return out

    @classmethod
    def from_list(cls, nodes: list[list]) -> IsolationTree:
        b = _Builder()

        def walk(pos: int, depth: int) -> int:
            f, v = nodes[pos]
            if f < 0:
                b.leaf(int(v), depth)
                return pos + 1
            node = b.internal(int(f), float(v), depth)
            b.left[node] = len(b.feature)
            nxt = walk(pos + 1, depth + 1)
            b.right[node] = len(b.feature)
            return walk(nxt, depth + 1)

        walk(0, 0)
        return b.finish()


class _Builder:
    def __init__(self):
        self.feature: list[int] = []
        self.threshold: list[float] = []
        self.left: list[int] = []
        self.right: list[int] = []
        self.size: list[int] = []
        self.depth: list[int] = []

    def _add(self, f, t, size, depth) -> int:
        self.feature.append(f)
        self.threshold.append(t)
        self.left.append(-1)
        self.right.append(-1)
        self.size.append(size)
        self.depth.append(depth)
        return len(self.feature) - 1

    def leaf(self, size: int, depth: int) -> int:
        return self._add(-1, float("nan"), size, depth)

    def internal(self, feature: int, threshold: float, depth: int, size: int = 0) -> int:
        return self._add(feature, threshold, size, depth)

    def finish(self) -> IsolationTree:
        return IsolationTree(
            feature=np.array(self.feature, dtype=np.int64),
            threshold=np.array(self.threshold, dtype=float),
            left=np.array(self.left, dtype=np.int64),
            right=np.array(self.right, dtype=np.int64),
            size=np.array(self.size, dtype=np.int64),
            depth=np.array(self.depth, dtype=float),
        )


def _draw_threshold(rng: np.random.Generator, lo: float, hi: float) -> float:
    for _ in range(64):
        t = float(rng.uniform(lo, hi))
        if lo < t < hi:
            return t
    # lo and hi are adjacent floats: no value lies strictly between them.
    return hi


def build_tree(X: np.ndarray, sample: np.ndarray, max_depth: int, rng: np.random.Generator) -> IsolationTree:
    """Grow one isolation tree on ``X[sample]``.

    A node becomes external when it holds at most one row, reaches
    ``max_depth``, or every feature is constant over its rows.  Otherwise a
    feature is drawn uniformly among the non-constant ones and a threshold
    uniformly inside its open (min, max) range; rows strictly below go left.
    """
    b = _Builder()

    def grow(idx: np.ndarray, depth: int) -> None:
        if idx.size <= 1 or depth >= max_depth:
            b.leaf(idx.size, depth)
            return
        part = X[idx]
        lo = part.min(axis=0)
        hi = part.max(axis=0)
        candidates = np.flatnonzero(hi > lo)
        if candidates.size == 0:
            b.leaf(idx.size, depth)
            return
        f = int(candidates[rng.integers(candidates.size)])
        t = _draw_threshold(rng, float(lo[f]), float(hi[f]))
        node = b.internal(f, t, depth, idx.size)
        goes_left = part[:, f] < t
        b.left[node] = len(b.feature)
        grow(idx[goes_left], depth + 1)
        b.right[node] = len(b.feature)
        grow(idx[~goes_left], depth + 1)

    grow(np.asarray(sample, dtype=np.int64), 0)
    return b.finish()


def path_length(tree: IsolationTree, x: Sequence[float], n_features: int | None = None) -> float:
    """Edges from the root to the external node reached by ``x``, plus c(size)."""
    x = np.asarray(x, dtype=float)
    if n_features is not None and x.shape != (n_features,):
        raise DimensionError(f"expected a row of {n_features} features, got shape {x.shape}")
    node = 0
    while tree.feature[node] >= 0:
        f = tree.feature[node]
        if f >= x.shape[0]:
            raise DimensionError(f"tree splits on feature {f} but row has {x.shape[0]}")
        node = tree.left[node] if x[f] < tree.threshold[node] else tree.right[node]
    return float(tree.depth[node]) + avg_path_length_c(int(tree.size[node]))


def _tree_paths(tree: IsolationTree, X: np.ndarray) -> np.ndarray:
    """Vectorized path lengths of every row of ``X`` through one tree."""
    node = np.zeros(X.shape[0], dtype=np.int64)
    rows = np.arange(X.shape[0])
    active = tree.feature[node] >= 0
    while active.any():
        a = node[active]
        f = tree.feature[a]
        go_left = X[rows[active], f] < tree.threshold[a]
        node[active] = np.where(go_left, tree.left[a], tree.right[a])
        active = tree.feature[node] >= 0
    return tree.leaf_path()[node]


@dataclass
class ScoreVector:
    expected_path: np.ndarray
    score: np.ndarray


@dataclass
class IsolationForest:
    params: ForestParams
    trees: list[IsolationTree]
    psi_effective: int
    n_features: int

    def path_lengths(self, X: np.ndarray) -> np.ndarray:
        """Matrix of shape (n_trees, n_rows) with per-tree path lengths."""
        X = self._check(X)
        return np.stack([_tree_paths(t, X) for t in self.trees])

    def score(self, X: np.ndarray) -> ScoreVector:
        return score(self, X)

    def _check(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        if X.ndim != 2 or X.shape[1] != self.n_features:
            raise DimensionError(f"expected (n, {self.n_features}) rows, got shape {X.shape}")
        return X

    def to_json(self) -> str:
        payload = {
            "version": FORMAT_VERSION,
            "params": asdict(self.params),
            "psi_effective": self.psi_effective,
            "n_features": self.n_features,
            "trees": [t.to_list() for t in self.trees],
        }
        return json.dumps(payload, separators=(",", ":"))

    @classmethod
    def from_json(cls, text: str) -> IsolationForest:
        data = json.loads(text)
        if data.get("version") != FORMAT_VERSION:
            raise ValueError(f"unsupported forest format version {data.get('version')!r}")
        return cls(
            params=ForestParams(**data["params"]),
            trees=[IsolationTree.from_list(t) for t in data["trees"]],
            psi_effective=data["psi_effective"],
            n_features=data["n_features"],
        )


def build_forest(X, params: ForestParams | None = None, n_jobs: int = 1) -> IsolationForest:
    """Fit ``params.n_trees`` isolation trees on subsamples of ``X``.

    Each tree sees ``min(subsample_size, n)`` rows drawn without replacement.
    ``n_jobs`` only changes how trees are scheduled, never the result.
    """
    params = params or ForestParams()
    X = np.asarray(getattr(X, "rows", X), dtype=float)
    if X.ndim != 2:
        raise DimensionError("expected a 2-D feature matrix")
    n = X.shape[0]
    if n < 2:
        raise InsufficientData(f"isolation forest needs at least 2 rows, got {n}")
    psi = min(params.subsample_size, n)
    depth = params.depth_limit(psi)

    def one(k: int) -> IsolationTree:
        rng = tree_rng(params.seed, k)
        sample = np.sort(rng.choice(n, size=psi, replace=False))
        return build_tree(X, sample, depth, rng)

    if n_jobs > 1:
        with ThreadPoolExecutor(max_workers=n_jobs) as pool:
            trees = list(pool.map(one, range(params.n_trees)))
    else:
        trees = [one(k) for k in range(params.n_trees)]
    return IsolationForest(params, trees, psi, X.shape[1])


def score(forest: IsolationForest, X) -> ScoreVector:
    """Mean path length over trees and the anomaly score ``2 ** (-E(h) / c(psi))``.

    Higher scores are more anomalous; 0.5 corresponds to an average point.
    """
    X = np.asarray(getattr(X, "rows", X), dtype=float)
    paths = forest.path_lengths(X)
    # Fixed summation order over trees keeps the mean bit-stable.
    total = np.zeros(X.shape[0])
    for p in paths:
        total += p
    expected = total / len(forest.trees)
    s = np.power(2.0, -expected / avg_path_length_c(forest.psi_effective))
    return ScoreVector(expected, s)


def rank_anomalies(
    scores: ScoreVector | Sequence[float], k: int, row_keys: Sequence[Hashable] | None = None
) -> list[tuple[Hashable, float]]:
    """Top-``k`` rows by score, descending; ties go to the smaller row key."""
    if k < 1:
        raise ValueError("k must be >= 1")
    s = np.asarray(getattr(scores, "score", scores), dtype=float)
    keys = list(range(len(s))) if row_keys is None else list(row_keys)
    if len(keys) != len(s):
        raise DimensionError("row_keys and scores differ in length")
    order = sorted(range(len(s)), key=lambda i: (-s[i], keys[i]))
    return [(keys[i], float(s[i])) for i in order[:k]]
