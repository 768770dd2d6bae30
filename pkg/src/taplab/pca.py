"""Feature-table standardization, PCA, and varimax rotation.

Components come from an eigendecomposition of the sample covariance of the
standardized table; loadings are eigenvectors scaled by the square root of
their eigenvalues. Varimax runs as a deterministic sequence of pairwise
column rotations (with Kaiser row normalization applied before and undone
after), each accepted only when it increases the criterion.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .errors import DegenerateColumnError

EVR_THRESHOLD = 0.98


@dataclass(frozen=True)
class FeatureTable:
    """Numeric table: one row per recording, one column per feature."""

    values: np.ndarray
    columns: tuple[str, ...]
    video_ids: tuple[str, ...]
    patient_ids: tuple[str, ...]

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.ndim != 2:
            raise ValueError("values must be a 2-D array")
        if not np.all(np.isfinite(values)):
            raise ValueError("table contains missing or non-finite values")
        n = values.shape[0]
        if len(self.video_ids) != n or len(self.patient_ids) != n:
            raise ValueError("row keys must match row count")
        if len(self.columns) != values.shape[1]:
            raise ValueError("column names must match column count")
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "columns", tuple(self.columns))
        object.__setattr__(self, "video_ids", tuple(self.video_ids))
        object.__setattr__(self, "patient_ids", tuple(self.patient_ids))

    @property
    def n_rows(self):
        return self.values.shape[0]


@dataclass(frozen=True)
class LoadingMatrix:
    """Component loadings plus the explained-variance spectrum.

    ``loadings`` has one row per feature and one column per retained
    component; ``explained_variance_ratio`` always covers the full spectrum
    and sums to 1. ``components`` keeps the orthonormal eigenvectors for
    projection/reconstruction; it is ``None`` after rotation.
    """

    loadings: np.ndarray
    explained_variance_ratio: np.ndarray
    k: int
    eigenvalues: np.ndarray | None = None
    components: np.ndarray | None = None
    rotated: bool = False
    converged: bool = True
    criterion_history: tuple[float, ...] = ()

    def __post_init__(self):
        evr = np.asarray(self.explained_variance_ratio, dtype=float)
        if np.any(evr < -1e-12) or np.any(evr > 1 + 1e-12):
            raise ValueError("explained variance ratios must lie in [0, 1]")
        if np.any(np.diff(evr) > 1e-12):
            raise ValueError("explained variance ratios must be non-increasing")
        object.__setattr__(self, "loadings", np.asarray(self.loadings, dtype=float))
        object.__setattr__(self, "explained_variance_ratio", evr)

    def scores(self, standardized_values):
        """Project standardized rows onto the unrotated components."""
        if self.components is None:
            raise ValueError("scores need unrotated components")
        return np.asarray(standardized_values, float) @ self.components

    def reconstruct(self, standardized_values):
        """Back-project through all retained components."""
        if self.components is None:
            raise ValueError("reconstruction needs unrotated components")
        return self.scores(standardized_values) @ self.components.T


def standardize(t: FeatureTable) -> FeatureTable:
    """Center each column and scale it to unit sample standard deviation."""
    std = t.values.std(axis=0, ddof=1)
    for name, s in zip(t.columns, std):
        if s == 0:
            raise DegenerateColumnError(name)
    values = (t.values - t.values.mean(axis=0)) / std
    return replace(t, values=values)


def _fix_signs(loadings):
    """Make the largest-magnitude entry of every column positive."""
    out = loadings.copy()
    for j in range(out.shape[1]):
        i = int(np.argmax(np.abs(out[:, j])))
        if out[i, j] < 0:
            out[:, j] = -out[:, j]
    return out


def principal_components(t: FeatureTable) -> LoadingMatrix:
    """Eigendecomposition of the sample covariance of a standardized table.

    Components with (numerically) zero eigenvalue are dropped from the
    loadings, so a rank-deficient table yields fewer columns rather than an
    error. The explained-variance spectrum keeps full length.
    """
    X = t.values
    n, p = X.shape
    cov = (X.T @ X) / (n - 1)
    eigvals, eigvecs = np.linalg.eigh(cov)
    order = np.argsort(eigvals)[::-1]
    eigvals = np.clip(eigvals[order], 0.0, None)
    eigvecs = eigvecs[:, order]
    evr = eigvals / eigvals.sum()
    rank = int(np.sum(eigvals > eigvals[0] * 1e-12)) if eigvals[0] > 0 else 0
    components = _fix_signs(eigvecs[:, :rank])
    loadings = components * np.sqrt(eigvals[:rank])
    return LoadingMatrix(
        loadings=loadings,
        explained_variance_ratio=evr,
        k=rank,
        eigenvalues=eigvals,
        components=components,
    )


def varimax_criterion(loadings) -> float:
    """Sum over columns of the variance of squared loadings."""
    L = np.asarray(loadings, dtype=float)
    sq = L * L
    return float(np.sum((sq * sq).mean(axis=0) - sq.mean(axis=0) ** 2))


def _column_criterion(col):
    sq = col * col
    return (sq * sq).mean() - sq.mean() ** 2


def varimax(l: LoadingMatrix, k: int, tol: float = 1e-6, max_iter: int = 500) -> LoadingMatrix:
    """Rotate the first ``k`` loading columns to maximize the varimax criterion.

    Kaiser row normalization is applied before rotation and undone after.
    Pairwise rotations use the closed-form optimal angle and are applied
    only when they improve the criterion, so the criterion value is
    non-decreasing across iterations by construction. Stops when a full
    sweep improves the criterion by less than ``tol``; if ``max_iter``
    sweeps do not converge the best iterate is returned with
    ``converged=False``.
    """
    if k > l.loadings.shape[1]:
        raise ValueError(f"k={k} exceeds available components {l.loadings.shape[1]}")
    L = l.loadings[:, :k].copy()
    p = L.shape[0]
    if k < 2:
        return replace(l, loadings=L, k=k, rotated=True, components=None,
                       criterion_history=(varimax_criterion(L),))

    norms = np.sqrt((L * L).sum(axis=1))
    norms[norms == 0] = 1.0
    B = L / norms[:, None]
    history = [varimax_criterion(B)]
    converged = False
    for _ in range(max_iter):
        improvement = 0.0
        for i in range(k - 1):
            for j in range(i + 1, k):
                a, b = B[:, i], B[:, j]
                u = a * a - b * b
                v = 2.0 * a * b
                num = 2.0 * np.dot(u, v) - 2.0 * u.sum() * v.sum() / p
                den = np.dot(u, u) - np.dot(v, v) - (u.sum() ** 2 - v.sum() ** 2) / p
                if num == 0.0 and den == 0.0:
                    continue
                phi = 0.25 * math.atan2(num, den)
                if abs(phi) < 1e-14:
                    continue
                c, s = math.cos(phi), math.sin(phi)
                a_new = c * a + s * b
                b_new = -s * a + c * b
                delta = (_column_criterion(a_new) + _column_criterion(b_new)) - (
                    _column_criterion(a) + _column_criterion(b)
                )
                # Absolute floor keeps the recomputed criterion monotone in
                # the presence of float summation noise.
                if delta > 1e-12:
                    B[:, i] = a_new
                    B[:, j] = b_new
                    improvement += delta
        history.append(varimax_criterion(B))
        if improvement < tol:
            converged = True
            break
    rotated = _fix_signs(B * norms[:, None])
    return replace(
        l,
        loadings=rotated,
        k=k,
        rotated=True,
        components=None,
        converged=converged,
        criterion_history=tuple(history),
    )


def select_components(evr, threshold: float = EVR_THRESHOLD) -> int:
    """Smallest component count whose cumulative ratio reaches the threshold."""
    cum = np.cumsum(np.asarray(evr, dtype=float))
    hit = np.nonzero(cum >= threshold - 1e-12)[0]
    return int(hit[0]) + 1 if hit.size else len(cum)
