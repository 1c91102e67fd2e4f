from __future__ import annotations

import numpy as np


class MetricInputError(ValueError):
    pass


def _as_set(features, what: str) -> np.ndarray:
    x = np.asarray(features, dtype=np.float64)
    if x.ndim == 1:
        x = x[:, None]
    if x.ndim != 2 or len(x) < 2:
        raise MetricInputError(f"{what} needs at least 2 feature vectors, got shape {x.shape}")
    return x


def _psd_sqrt(a: np.ndarray) -> np.ndarray:
    w, v = np.linalg.eigh((a + a.T) / 2)
    return (v * np.sqrt(np.clip(w, 0.0, None))) @ v.T


def frechet_distance(set_a, set_b, reg: float = 1e-6) -> float:
    """Frechet distance between Gaussians fitted to two feature sets.

    Covariances get ``reg * I`` added; square roots use a symmetric
    eigendecomposition with negative eigenvalues clamped to zero.
    """
    a = _as_set(set_a, "frechet_distance")
    b = _as_set(set_b, "frechet_distance")
    if a.shape[1] != b.shape[1]:
        raise MetricInputError(f"feature dims differ: {a.shape[1]} vs {b.shape[1]}")
    mu_a, mu_b = a.mean(axis=0), b.mean(axis=0)
    eye = np.eye(a.shape[1])
    cov_a = np.atleast_2d(np.cov(a, rowvar=False)) + reg * eye
    cov_b = np.atleast_2d(np.cov(b, rowvar=False)) + reg * eye
    root_a = _psd_sqrt(cov_a)
    cross = root_a @ cov_b @ root_a
    w = np.linalg.eigvalsh((cross + cross.T) / 2)
    tr_cross = np.sqrt(np.clip(w, 0.0, None)).sum()
    value = float(((mu_a - mu_b) ** 2).sum() + np.trace(cov_a) + np.trace(cov_b) - 2.0 * tr_cross)
    return max(value, 0.0)


def diversity(features) -> float:
    """Mean Euclidean distance over all unordered pairs."""
    x = _as_set(features, "diversity")
    diff = x[:, None, :] - x[None, :, :]
    d = np.sqrt((diff**2).sum(-1))
    iu = np.triu_indices(len(x), k=1)
    return float(d[iu].mean())
