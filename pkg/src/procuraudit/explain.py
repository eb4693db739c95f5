"""Decision-tree surrogate that explains which features separate flagged rows.

A binary CART classifier with Gini impurity.  The split search is exhaustive
over features and midpoints of consecutive distinct values, and ties go to
the lower feature index and then the lower threshold, so fitting is fully
deterministic.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import DimensionError, SingleClassError

# tolerance for rounding noise in impurity decreases
_DECREASE_TOL = 1e-12


def gini(counts) -> float:
    counts = np.asarray(counts, dtype=float)
    n = counts.sum()
    if n == 0:
        return 0.0
    p = counts / n
    return float(1.0 - p @ p)


@dataclass
class TreeParams:
    max_depth: int = 5
    min_samples_split: int = 2

    def __post_init__(self):
        if self.max_depth < 0:
            raise ValueError("max_depth must be >= 0")
        if self.min_samples_split < 2:
            raise ValueError("min_samples_split must be >= 2")


@dataclass
class Node:
    n_samples: int
    class_counts: tuple[int, int]
    gini: float
    depth: int
    feature: int = -1
    threshold: float = float("nan")
    left: int = -1
    right: int = -1

    @property
    def is_leaf(self) -> bool:
        return self.feature < 0

    @property
    def label(self) -> int:
        return int(self.class_counts[1] > self.class_counts[0])


@dataclass
class DecisionTree:
    nodes: list[Node]
    n_features: int
    params: TreeParams = field(default_factory=TreeParams)

    def predict(self, x) -> int:
        return predict(self, x)

    def predict_many(self, X) -> np.ndarray:
        X = np.asarray(getattr(X, "rows", X), dtype=float)
        return np.array([predict(self, row) for row in X], dtype=np.int64)

    def decision_path(self, x) -> list[int]:
        x = self._check(x)
        path = [0]
        while not self.nodes[path[-1]].is_leaf:
            nd = self.nodes[path[-1]]
            path.append(nd.left if x[nd.feature] < nd.threshold else nd.right)
        return path

    def _check(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if x.shape != (self.n_features,):
            raise DimensionError(f"expected {self.n_features} features, got shape {x.shape}")
        return x

    def to_dict(self, column_names: Sequence[str] | None = None) -> dict:
        def name(f):
            return column_names[f] if column_names is not None else f

        def walk(i):
            nd = self.nodes[i]
            out = {"n_samples": nd.n_samples, "class_counts": list(nd.class_counts), "gini": nd.gini}
            if nd.is_leaf:
                out["label"] = nd.label
            else:
                out.update(
                    feature=name(nd.feature),
                    threshold=nd.threshold,
                    left=walk(nd.left),
                    right=walk(nd.right),
                )
            return out

        return {
            "params": {"max_depth": self.params.max_depth, "min_samples_split": self.params.min_samples_split},
            "root": walk(0),
        }

    def to_json(self, column_names: Sequence[str] | None = None) -> str:
        return json.dumps(self.to_dict(column_names), ensure_ascii=False)

    def to_text(self, column_names: Sequence[str] | None = None) -> str:
        lines: list[str] = []

        def name(f):
            return column_names[f] if column_names is not None else f"x[{f}]"

        def walk(i, indent):
            nd = self.nodes[i]
            pad = "|   " * indent
            if nd.is_leaf:
                lines.append(f"{pad}class {nd.label}  (n={nd.n_samples}, counts={list(nd.class_counts)})")
                return
            thr = format(nd.threshold, ".6g")
            lines.append(f"{pad}{name(nd.feature)} < {thr}")
            walk(nd.left, indent + 1)
            lines.append(f"{pad}{name(nd.feature)} >= {thr}")
            walk(nd.right, indent + 1)

        walk(0, 0)
        return "\n".join(lines) + "\n"


def _best_split(X: np.ndarray, y: np.ndarray) -> tuple[float, int, float] | None:
    """Largest Gini decrease over all (feature, midpoint) pairs, or None."""
    n = y.size
    n1 = int(y.sum())
    parent = gini([n - n1, n1])
    best = None
    for f in range(X.shape[1]):
        order = np.argsort(X[:, f], kind="stable")
        xs = X[order, f]
        ys = y[order]
        boundary = np.flatnonzero(xs[1:] > xs[:-1])
        if boundary.size == 0:
            continue
        n_left = boundary + 1
        ones_left = np.cumsum(ys)[boundary]
        n_right = n - n_left
        ones_right = n1 - ones_left
        g_left = 1.0 - (ones_left / n_left) ** 2 - ((n_left - ones_left) / n_left) ** 2
        g_right = 1.0 - (ones_right / n_right) ** 2 - ((n_right - ones_right) / n_right) ** 2
        decrease = parent - (n_left * g_left + n_right * g_right) / n
        j = int(np.argmax(decrease))  # first maximum = lowest threshold
        if best is None or decrease[j] > best[0]:
            lo, hi = float(xs[boundary[j]]), float(xs[boundary[j] + 1])
            thr = (lo + hi) / 2.0
            if not lo < thr <= hi:
                thr = hi
            best = (float(decrease[j]), f, thr)
    return best


def fit_tree(X, labels, params: TreeParams | None = None) -> DecisionTree:
    """Fit a CART classifier on 0/1 labels.

    Nodes stop splitting at ``max_depth``, below ``min_samples_split`` rows,
    when pure, or when every feature is constant.  Splits that leave the
    weighted impurity unchanged are allowed (XOR-like patterns need one at
    the root before the children can be separated).
    """
    params = params or TreeParams()
    X = np.asarray(getattr(X, "rows", X), dtype=float)
    y = np.asarray(labels).astype(np.int64)
    if X.ndim != 2 or y.shape != (X.shape[0],):
        raise DimensionError(f"labels of shape {y.shape} do not match matrix of shape {X.shape}")
    if not np.isin(y, (0, 1)).all():
        raise ValueError("labels must be 0 or 1")
    if np.unique(y).size < 2:
        raise SingleClassError("labels contain a single class; nothing to explain")

    nodes: list[Node] = []

    def grow(idx: np.ndarray, depth: int) -> int:
        ys = y[idx]
        n1 = int(ys.sum())
        counts = (idx.size - n1, n1)
        i = len(nodes)
        nodes.append(Node(idx.size, counts, gini(counts), depth))
        if depth >= params.max_depth or idx.size < params.min_samples_split or 0 in counts:
            return i
        split = _best_split(X[idx], ys)
        if split is None or split[0] < -_DECREASE_TOL:
            return i
        _, f, thr = split
        go_left = X[idx, f] < thr
        nodes[i].feature = f
        nodes[i].threshold = thr
        nodes[i].left = grow(idx[go_left], depth + 1)
        nodes[i].right = grow(idx[~go_left], depth + 1)
        return i

    grow(np.arange(X.shape[0]), 0)
    return DecisionTree(nodes, X.shape[1], params)


def predict(tree: DecisionTree, x) -> int:
    """Leaf majority label for ``x``; values equal to a threshold go right."""
    return tree.nodes[tree.decision_path(x)[-1]].label


@dataclass
class ImportanceReport:
    items: list[tuple[str, float]]

    def as_dict(self) -> dict[str, float]:
        return dict(self.items)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["feature", "importance"])
        for name, imp in self.items:
            w.writerow([name, format(imp, ".17g")])
        return buf.getvalue()


def feature_importance(tree: DecisionTree, column_names: Sequence[str]) -> ImportanceReport:
    """Normalized weighted Gini decrease per feature, descending, zeros omitted."""
    if len(column_names) != tree.n_features:
        raise DimensionError("column_names length differs from tree width")
    total_n = tree.nodes[0].n_samples
    raw = np.zeros(tree.n_features)
    for nd in tree.nodes:
        if nd.is_leaf:
            continue
        l, r = tree.nodes[nd.left], tree.nodes[nd.right]
        child = (l.n_samples * l.gini + r.n_samples * r.gini) / nd.n_samples
        raw[nd.feature] += nd.n_samples / total_n * (nd.gini - child)
    s = raw.sum()
    if s <= 0:
        return ImportanceReport([])
    imp = raw / s
    items = [(column_names[f], float(imp[f])) for f in range(tree.n_features) if imp[f] > 0]
    items.sort(key=lambda t: (-t[1], t[0]))
    return ImportanceReport(items)
