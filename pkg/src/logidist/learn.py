"""Labelings from distance matrices (agglomerative) and from projected points (GMM)."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.special import logsumexp

LINKAGES = ("single", "complete", "average")


@dataclass(frozen=True)
class Labeling:
    """Map from trace id to a label in ``0..k-1``."""

    assignments: dict

    def __post_init__(self):
        labels = set(self.assignments.values())
        if labels and labels != set(range(len(labels))):
            raise ValueError(f"labels {sorted(labels)} are not a contiguous range from 0")

    @property
    def k(self) -> int:
        return len(set(self.assignments.values()))

    def members(self, label: int) -> list[str]:
        return [t for t, lab in self.assignments.items() if lab == label]

    def partition(self) -> frozenset:
        return frozenset(frozenset(self.members(lab)) for lab in range(self.k))


def agglomerative(dist, k: int, linkage: str = "complete", ids: Sequence[str] | None = None) -> Labeling:
    """Bottom-up merging until ``k`` clusters remain.

    Ties between equally close cluster pairs go to the pair whose smallest
    member indices are lexicographically smallest. Labels are numbered by
    each cluster's smallest member index.
    """
    d = np.asarray(dist, dtype=float)
    n = d.shape[0]
    if d.shape != (n, n) or not np.allclose(d, d.T):
        raise ValueError("distance matrix must be square and symmetric")
    if linkage not in LINKAGES:
        raise ValueError(f"unknown linkage {linkage!r}; choose from {LINKAGES}")
    if not 1 <= k <= n:
        raise ValueError(f"cannot form {k} clusters from {n} items")
    ids = [str(i) for i in range(n)] if ids is None else list(ids)

    clusters = [[i] for i in range(n)]
    link = d.copy()
    np.fill_diagonal(link, np.inf)
    while len(clusters) > k:
        # clusters stay sorted by smallest member, so argmin over the upper
        # triangle in row-major order gives the lexicographic tie-break
        flat = np.argmin(np.where(np.triu(np.ones_like(link, dtype=bool), 1), link, np.inf))
        a, b = divmod(int(flat), len(clusters))
        merged = sorted(clusters[a] + clusters[b])
        sizes = np.array([len(c) for c in clusters], dtype=float)
        if linkage == "single":
            row = np.minimum(link[a], link[b])
        elif linkage == "complete":
            row = np.maximum(link[a], link[b])
        else:
            row = (sizes[a] * link[a] + sizes[b] * link[b]) / (sizes[a] + sizes[b])
        link[a] = row
        link[:, a] = row
        link[a, a] = np.inf
        link = np.delete(np.delete(link, b, axis=0), b, axis=1)
        clusters[a] = merged
        del clusters[b]
    return Labeling({ids[i]: lab for lab, c in enumerate(clusters) for i in c})


# ------------------------------------------------------------------------- GMM


@dataclass(frozen=True, eq=False)
class GmmModel:
    weights: np.ndarray
    means: np.ndarray
    covariances: np.ndarray
    log_likelihoods: tuple = field(default=(), compare=False)

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float)
        if abs(w.sum() - 1.0) > 1e-9 or np.any(w < 0):
            raise ValueError("weights must be non-negative and sum to one")
        for c in np.asarray(self.covariances):
            if not np.allclose(c, c.T) or np.any(np.linalg.eigvalsh(c) <= 0):
                raise ValueError("covariances must be symmetric positive-definite")

    @property
    def k(self) -> int:
        return len(self.weights)

    def log_weighted_density(self, points) -> np.ndarray:
        return _log_weighted(np.atleast_2d(points), self.weights, self.means, self.covariances)


def _log_gauss(x, mean, cov):
    d = x.shape[1]
    chol = np.linalg.cholesky(cov)
    z = np.linalg.solve(chol, (x - mean).T)
    log_det = 2.0 * np.sum(np.log(np.diag(chol)))
    return -0.5 * (np.sum(z * z, axis=0) + log_det + d * np.log(2 * np.pi))


def _log_weighted(x, weights, means, covs):
    with np.errstate(divide="ignore"):
        logw = np.log(weights)
    return np.column_stack([logw[j] + _log_gauss(x, means[j], covs[j]) for j in range(len(weights))])


def kmeans_plus_plus(x: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    centers = [x[rng.integers(x.shape[0])]]
    for _ in range(1, k):
        d2 = np.min([np.sum((x - c) ** 2, axis=1) for c in centers], axis=0)
        total = d2.sum()
        if total == 0:
            idx = rng.integers(x.shape[0])
        else:
            idx = rng.choice(x.shape[0], p=d2 / total)
        centers.append(x[idx])
    return np.array(centers)


def gmm_fit(
    points,
    k: int,
    seed: int = 0,
    max_iter: int = 200,
    tol: float = 1e-6,
    reg: float = 1e-6,
    n_init: int = 1,
) -> GmmModel:
    """Full-covariance EM seeded by k-means++ hard assignments.

    Stops after ``max_iter`` iterations or when the mean log-likelihood
    improves by less than ``tol``. ``reg * I`` is added to every covariance.
    With ``n_init > 1`` the restarts draw from the same seeded generator and
    the model with the highest final log-likelihood wins (earliest on ties).
    """
    x = np.atleast_2d(np.asarray(points, dtype=float))
    n, d = x.shape
    if n < k:
        raise ValueError(f"need at least {k} points for {k} components, got {n}")
    if n_init < 1:
        raise ValueError("n_init must be positive")
    rng = np.random.default_rng(seed)
    best = None
    for _ in range(n_init):
        model = _em(x, k, rng, max_iter, tol, reg)
        if best is None or model.log_likelihoods[-1] > best.log_likelihoods[-1]:
            best = model
    return best


def _em(x, k, rng, max_iter, tol, reg) -> GmmModel:
    n, d = x.shape
    centers = kmeans_plus_plus(x, k, rng)
    nearest = np.argmin(((x[:, None, :] - centers[None]) ** 2).sum(axis=2), axis=1)
    resp = np.eye(k)[nearest]

    def m_step(resp):
        nk = resp.sum(axis=0) + 10 * np.finfo(float).eps
        weights = nk / nk.sum()
        means = (resp.T @ x) / nk[:, None]
        covs = np.empty((k, d, d))
        for j in range(k):
            diff = x - means[j]
            covs[j] = (resp[:, j, None] * diff).T @ diff / nk[j] + reg * np.eye(d)
        return weights, means, covs

    weights, means, covs = m_step(resp)
    history = []
    prev = -np.inf
    for _ in range(max_iter):
        logp = _log_weighted(x, weights, means, covs)
        norm = logsumexp(logp, axis=1)
        ll = float(norm.mean())
        history.append(ll)
        if ll - prev < tol:
            break
        prev = ll
        resp = np.exp(logp - norm[:, None])
        weights, means, covs = m_step(resp)
    weights = weights / weights.sum()
    return GmmModel(weights, means, covs, tuple(history))


def gmm_predict(model: GmmModel, point) -> int:
    """Component with the largest weighted density; ties go to the lowest index."""
    scores = model.log_weighted_density(np.asarray(point, dtype=float).reshape(1, -1))[0]
    return int(np.flatnonzero(scores == scores.max())[0])


def gmm_predict_many(model: GmmModel, points) -> np.ndarray:
    scores = model.log_weighted_density(points)
    return np.argmax(scores, axis=1)
