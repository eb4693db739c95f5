"""Engineered contract features and model-matrix assembly."""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from datetime import date
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .errors import AlignmentError, DegenerateInput
from .ingest import RawContract

OTHER = "__OTHER__"

# Raw amount columns that are log-transformed, in matrix order.
LOG_SOURCES = ("cuantia", "valor_definitivo", "valor_contrato", "valor_adiciones", "valor_total")
NUMERIC_COLUMNS = tuple(f"log_{s}" for s in LOG_SOURCES) + ("amount_diff",)
FLAG_COLUMNS = ("overdraw", "date_inconsistency")
CATEGORICAL_FIELDS = ("TIPO_CONTRATO", "TIPO_MODALIDAD", "NIVEL", "ORDEN", "ESTADO_PROCESO")


def log_transform(v: float | None) -> float | None:
    """``ln(1 + v)``; zero-safe, ``None`` passes through."""
    if v is None:
        return None
    if v < 0:
        raise ValueError(f"log_transform expects a non-negative amount, got {v}")
    return math.log1p(v)


def derive_overdraw(
    cuantia: float | None, valor_definitivo: float | None
) -> tuple[float | None, int | None]:
    """Log-space gap between definitive value and sanctioned amount, plus a raw-space flag."""
    if cuantia is None or valor_definitivo is None:
        return None, None
    diff = log_transform(valor_definitivo) - log_transform(cuantia)
    return diff, int(valor_definitivo > cuantia)


def derive_date_flag(created: date | None, awarded: date | None) -> int | None:
    if created is None or awarded is None:
        return None
    return int(created > awarded)


def pearson(xs: Sequence[float], ys: Sequence[float]) -> float:
    """Pearson correlation coefficient, clipped to [-1, 1]."""
    x = np.asarray(xs, dtype=float)
    y = np.asarray(ys, dtype=float)
    if x.shape != y.shape or x.ndim != 1:
        raise ValueError("xs and ys must be 1-D sequences of equal length")
    if x.size < 2:
        raise DegenerateInput("pearson needs at least two points")
    dx = x - x.mean()
    dy = y - y.mean()
    sxx = float(dx @ dx)
    syy = float(dy @ dy)
    if sxx == 0.0 or syy == 0.0:
        raise DegenerateInput("pearson undefined for zero-variance input")
    r = float(dx @ dy) / math.sqrt(sxx * syy)
    return min(1.0, max(-1.0, r))


def one_hot(values: Sequence[str | None], min_count: int = 5) -> tuple[list[str], np.ndarray]:
    """Indicator encoding with a catch-all column.

    Categories seen at least ``min_count`` times get their own column (sorted
    lexicographically); rarer categories and nulls share a trailing
    ``__OTHER__`` column, which is always present.
    """
    if min_count < 1:
        raise ValueError("min_count must be >= 1")
    counts: dict[str, int] = {}
    for v in values:
        if v is not None:
            counts[v] = counts.get(v, 0) + 1
    kept = sorted(c for c, n in counts.items() if n >= min_count)
    columns = kept + [OTHER]
    pos = {c: i for i, c in enumerate(kept)}
    matrix = np.zeros((len(values), len(columns)), dtype=np.int64)
    for i, v in enumerate(values):
        matrix[i, pos.get(v, len(kept))] = 1
    return columns, matrix


@dataclass
class ContractFeatures:
    contract_key: tuple[str | None, int]
    log_cuantia: float | None
    log_valor_definitivo: float | None
    log_valor_contrato: float | None
    log_valor_adiciones: float | None
    log_valor_total: float | None
    amount_diff: float | None
    overdraw_flag: int | None
    date_inconsistency_flag: int | None

    @property
    def missing_flags(self) -> dict[str, int]:
        return {c: int(getattr(self, c) is None) for c in NUMERIC_COLUMNS}

    def numeric(self) -> list[float | None]:
        return [getattr(self, c) for c in NUMERIC_COLUMNS]

    def flags(self) -> list[int | None]:
        return [self.overdraw_flag, self.date_inconsistency_flag]


def contract_features(rec: RawContract) -> ContractFeatures:
    diff, over = derive_overdraw(rec.cuantia, rec.valor_definitivo)
    logs = {f"log_{s}": log_transform(getattr(rec, s)) for s in LOG_SOURCES}
    return ContractFeatures(
        contract_key=(rec.id_objeto_contrato, rec.row_index),
        amount_diff=diff,
        overdraw_flag=over,
        date_inconsistency_flag=derive_date_flag(rec.fechacreacion, rec.fechaestadoadjudicado),
        **logs,
    )


@dataclass
class FeatureMatrix:
    column_names: list[str]
    rows: np.ndarray
    row_keys: list[tuple[str | None, int]]
    blocks: dict[str, int] = field(default_factory=dict)

    def __post_init__(self):
        self.rows = np.asarray(self.rows, dtype=float)
        if self.rows.ndim != 2:
            raise ValueError("rows must be a 2-D array")
        n, d = self.rows.shape
        if len(self.column_names) != d:
            raise AlignmentError(f"{len(self.column_names)} column names for {d} columns")
        if len(set(self.column_names)) != d:
            raise ValueError("column names must be unique")
        if len(self.row_keys) != n:
            raise AlignmentError(f"{len(self.row_keys)} row keys for {n} rows")
        if not np.all(np.isfinite(self.rows)):
            raise ValueError("feature matrix contains NaN or infinite entries")

    @property
    def shape(self) -> tuple[int, int]:
        return self.rows.shape

    def column(self, name: str) -> np.ndarray:
        return self.rows[:, self.column_names.index(name)]

    def to_csv(self, path: str | Path) -> None:
        """Write the matrix as CSV plus a ``.keys.json`` sidecar holding row keys."""
        path = Path(path)
        with open(path, "w", encoding="utf-8", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(self.column_names)
            for row in self.rows:
                w.writerow([format(float(v), ".17g") for v in row])
        with open(sidecar_path(path), "w", encoding="utf-8") as fh:
            json.dump({"row_keys": [list(k) for k in self.row_keys]}, fh, ensure_ascii=False)

    @classmethod
    def from_csv(cls, path: str | Path) -> FeatureMatrix:
        path = Path(path)
        with open(path, encoding="utf-8", newline="") as fh:
            r = csv.reader(fh)
            names = next(r)
            data = [[float(v) for v in row] for row in r]
        with open(sidecar_path(path), encoding="utf-8") as fh:
            keys = [tuple(k) for k in json.load(fh)["row_keys"]]
        rows = np.array(data, dtype=float).reshape(len(data), len(names))
        return cls(names, rows, keys)


def sidecar_path(path: Path) -> Path:
    return path.with_suffix(".keys.json")


def _impute(block: np.ndarray, strategy: str) -> tuple[np.ndarray, np.ndarray]:
    """Fill NaNs column-wise; returns (filled, bool mask of columns that had NaNs)."""
    filled = block.copy()
    had_nan = np.isnan(block).any(axis=0)
    for j in np.flatnonzero(had_nan):
        col = block[:, j]
        present = col[~np.isnan(col)]
        if present.size == 0:
            fill = 0.0
        elif strategy == "median":
            fill = float(np.median(present))
        elif strategy == "mean":
            fill = float(present.mean())
        elif strategy == "zero":
            fill = 0.0
        else:
            raise ValueError(f"unknown impute strategy {strategy!r}")
        filled[np.isnan(col), j] = fill
    return filled, had_nan


def assemble_matrix(
    features: Sequence[ContractFeatures],
    categoricals: Mapping[str, tuple[Sequence[str], np.ndarray]] | None = None,
    text=None,
    impute: str = "median",
) -> FeatureMatrix:
    """Concatenate ``[numeric | flags | one-hot | token counts]`` into one matrix.

    Parameters
    ----------
    features
        One :class:`ContractFeatures` per row; supplies row keys.
    categoricals
        Field name to ``one_hot`` output.  Columns are named ``cat:FIELD=value``.
    text
        ``(Vocabulary, SparseCounts)`` pair or ``None``.
    impute
        ``"median"`` (default), ``"mean"`` or ``"zero"``.  Every numeric or
        flag column containing a null gains a ``flag:missing_<name>``
        indicator column.
    """
    n = len(features)
    keys = [f.contract_key for f in features]
    nan = float("nan")

    num = np.array([[nan if v is None else v for v in f.numeric()] for f in features], dtype=float)
    flg = np.array([[nan if v is None else v for v in f.flags()] for f in features], dtype=float)
    num = num.reshape(n, len(NUMERIC_COLUMNS))
    flg = flg.reshape(n, len(FLAG_COLUMNS))

    num_filled, num_missing = _impute(num, impute)
    flg_filled, flg_missing = _impute(flg, impute)

    names = [f"num:{c}" for c in NUMERIC_COLUMNS] + [f"flag:{c}" for c in FLAG_COLUMNS]
    missing_cols = []
    for src, block, mask in ((NUMERIC_COLUMNS, num, num_missing), (FLAG_COLUMNS, flg, flg_missing)):
        for j in np.flatnonzero(mask):
            names.append(f"flag:missing_{src[j]}")
            missing_cols.append(np.isnan(block[:, j]).astype(float))
    parts = [num_filled, flg_filled]
    if missing_cols:
        parts.append(np.column_stack(missing_cols))
    blocks = {"num": len(NUMERIC_COLUMNS), "flag": len(FLAG_COLUMNS) + len(missing_cols)}

    n_cat = 0
    for fname, (columns, matrix) in (categoricals or {}).items():
        matrix = np.asarray(matrix)
        if matrix.shape[0] != n:
            raise AlignmentError(f"categorical block {fname} has {matrix.shape[0]} rows, expected {n}")
        names.extend(f"cat:{fname}={c}" for c in columns)
        parts.append(matrix.astype(float))
        n_cat += len(columns)
    blocks["cat"] = n_cat

    n_tok = 0
    if text is not None:
        vocab, counts = text
        if counts.n_rows != n:
            raise AlignmentError(f"text block has {counts.n_rows} rows, expected {n}")
        names.extend(f"tok:{t}" for t in vocab.tokens)
        parts.append(counts.to_dense().astype(float))
        n_tok = len(vocab.tokens)
    blocks["tok"] = n_tok

    rows = np.hstack(parts) if parts else np.zeros((n, 0))
    return FeatureMatrix(names, rows, keys, blocks)
