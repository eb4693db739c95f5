"""Regression-residual detector for over-utilized contracts.

The default design regresses ``log_valor_definitivo`` on ``[1, log_cuantia]``.
Coefficients are solved through a QR factorization of the design matrix.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Hashable, Sequence

import numpy as np

from .errors import DegenerateAfterExclusion, DimensionError, SingularDesign

# sigma below this fraction of the target scale is treated as an exact fit
_SIGMA_RTOL = 1e-10


@dataclass
class LinearModel:
    coefficients: np.ndarray
    sigma: float
    n_used: int
    excluded_rows: set = field(default_factory=set)

    @property
    def p(self) -> int:
        return len(self.coefficients)

    def predict(self, X) -> np.ndarray:
        X = _design(X, self.p)
        return X @ self.coefficients

    def to_json(self) -> str:
        return json.dumps(
            {
                "coefficients": [float(c) for c in self.coefficients],
                "sigma": float(self.sigma),
                "n_used": self.n_used,
                "excluded": _sorted_keys(self.excluded_rows),
            },
            ensure_ascii=False,
        )


def _sorted_keys(keys) -> list:
    try:
        return sorted(keys)
    except TypeError:
        return sorted(keys, key=repr)


@dataclass
class ResidualScores:
    residual: np.ndarray
    z: np.ndarray
    overspend_flag: np.ndarray


def _design(X, p: int | None = None) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    if X.ndim != 2:
        raise DimensionError(f"design matrix must be 2-D, got shape {X.shape}")
    if p is not None and X.shape[1] != p:
        raise DimensionError(f"design has {X.shape[1]} columns, model expects {p}")
    return X


def fit_ols(X, y) -> LinearModel:
    """Least-squares fit; ``X`` must already carry its leading column of ones."""
    X = _design(X)
    y = np.asarray(y, dtype=float)
    n, p = X.shape
    if y.shape != (n,):
        raise DimensionError(f"y has shape {y.shape}, expected ({n},)")
    if n <= p:
        raise SingularDesign(f"need more rows than coefficients (n={n}, p={p})")
    if np.linalg.matrix_rank(X) < p:
        raise SingularDesign("design matrix is rank deficient")
    q, r = np.linalg.qr(X)
    beta = np.linalg.solve(r, q.T @ y)
    resid = y - X @ beta
    sigma = float(np.sqrt(resid @ resid / (n - p)))
    scale = float(np.max(np.abs(y))) if n else 0.0
    if sigma <= _SIGMA_RTOL * max(scale, 1.0):
        sigma = 0.0
    return LinearModel(beta, sigma, n)


def residual_scores(model: LinearModel, X, y, z_threshold: float = 3.0) -> ResidualScores:
    """Residuals, standardized residuals, and a one-sided overspend flag.

    Only positive deviations (more utilized than predicted) are flagged.  An
    exact fit (``sigma == 0``) yields all-zero z and no flags.
    """
    X = _design(X, model.p)
    y = np.asarray(y, dtype=float)
    if y.shape != (X.shape[0],):
        raise DimensionError(f"y has shape {y.shape}, expected ({X.shape[0]},)")
    r = y - X @ model.coefficients
    z = r / model.sigma if model.sigma > 0 else np.zeros_like(r)
    return ResidualScores(r, z, (z > z_threshold).astype(np.int64))


def robust_fit(
    X,
    y,
    z_threshold: float = 3.0,
    max_iter: int = 5,
    row_keys: Sequence[Hashable] | None = None,
) -> LinearModel:
    """Refit after repeatedly dropping rows with ``|z| > z_threshold``.

    Stops when a round drops nothing or after ``max_iter`` rounds.  The
    returned model records every dropped key in ``excluded_rows`` and can
    score all rows, excluded ones included.
    """
    X = _design(X)
    y = np.asarray(y, dtype=float)
    n, p = X.shape
    keys = list(range(n)) if row_keys is None else list(row_keys)
    if len(keys) != n:
        raise DimensionError("row_keys length differs from row count")

    keep = np.ones(n, dtype=bool)
    model = fit_ols(X, y)
    excluded: set = set()
    for _ in range(max_iter):
        sc = residual_scores(model, X[keep], y[keep], z_threshold)
        drop_local = np.abs(sc.z) > z_threshold
        if not drop_local.any():
            break
        idx = np.flatnonzero(keep)[drop_local]
        keep[idx] = False
        excluded.update(keys[i] for i in idx)
        if keep.sum() <= p:
            raise DegenerateAfterExclusion(
                f"only {int(keep.sum())} rows left for {p} coefficients after exclusion"
            )
        model = fit_ols(X[keep], y[keep])
    model.excluded_rows = excluded
    return model
