"""Extreme eigenvalues of symmetric matrices and spectral clustering."""

from __future__ import annotations

from collections.abc import Callable
from dataclasses import dataclass

import numpy as np
from scipy.linalg import eigh_tridiagonal
from scipy.sparse.linalg import ArpackNoConvergence, eigsh

from .errors import NumericError, ParameterError
from .netgen import AdjacencyGraph, Membership
from .rng import SeededRng

DEFAULT_TOL = 1e-10
# float32 rounding of the matrix limits attainable accuracy
SINGLE_TOL = 1e-6
# below this size a dense symmetric eigensolver is cheaper than Lanczos
DENSE_LIMIT = 300
_CHECK_EVERY = 5


@dataclass(frozen=True)
class EigenExtremes:
    lambda_1: float
    lambda_n: float

    def __post_init__(self):
        if self.lambda_1 < self.lambda_n:
            raise NumericError(f"largest eigenvalue {self.lambda_1} below smallest {self.lambda_n}")

    @property
    def sigma_1(self) -> float:
        return max(self.lambda_1, -self.lambda_n)


def _start_vector(n: int) -> np.ndarray:
    # fixed pseudo-random start: deterministic and never structured like a block model
    v = np.random.default_rng(0x5EED).standard_normal(n)
    return v / np.linalg.norm(v)


def _ritz_pair(alpha: list[float], beta: list[float], i: int) -> tuple[float, float]:
    # i-th Ritz value and the last component of its eigenvector
    theta, s = eigh_tridiagonal(np.array(alpha), np.array(beta), select="i", select_range=(i, i))
    return float(theta[0]), float(s[-1, 0])


def lanczos_extremes(
    matvec: Callable[[np.ndarray], np.ndarray],
    n: int,
    tol: float,
    dense: Callable[[], np.ndarray] | None = None,
) -> tuple[float, float]:
    """Smallest and largest eigenvalue of a symmetric operator by Lanczos.

    ``matvec`` maps a float64 vector to the operator applied to it. The
    Krylov basis is kept orthogonal by full reorthogonalization, with a
    second Gram-Schmidt pass only when the first one cancels most of the
    vector. Iteration stops when the residual norms ``|beta_k * s_k|`` of
    both extreme Ritz pairs are below ``tol * max(1, |theta|)``; each residual
    bounds the distance from its Ritz value to the spectrum.

    If the Krylov space becomes invariant before convergence, ``dense()``
    supplies the matrix for a full decomposition.
    """
    basis = np.empty((n + 1, n))
    basis[0] = _start_vector(n)
    alpha, beta = [], []
    for k in range(n):
        w = np.asarray(matvec(basis[k]), dtype=float)
        a = float(basis[k] @ w)
        w -= a * basis[k]
        if k:
            w -= beta[-1] * basis[k - 1]
        q = basis[: k + 1]
        before = float(np.linalg.norm(w))
        w -= q.T @ (q @ w)
        b = float(np.linalg.norm(w))
        if b < 0.7 * before:
            w -= q.T @ (q @ w)
            b = float(np.linalg.norm(w))
        alpha.append(a)
        last = k == n - 1
        if (k + 1) % _CHECK_EVERY == 0 or b <= 1e-13 * max(1.0, abs(a)) or last:
            lo, s_lo = _ritz_pair(alpha, beta, 0)
            hi, s_hi = _ritz_pair(alpha, beta, k)
            scale = max(1.0, abs(lo), abs(hi))
            if (abs(b * s_lo) <= tol * scale and abs(b * s_hi) <= tol * scale) or last:
                return lo, hi
            if b <= 1e-13 * scale:
                # invariant subspace found early; finish densely to avoid missing eigenvalues
                break
        beta.append(b)
        basis[k + 1] = w / b
    if dense is None:
        raise NumericError("Lanczos iteration stopped on an invariant subspace without a dense fallback")
    w = np.linalg.eigvalsh(dense())
    return float(w[0]), float(w[-1])


def lanczos_extremes_matrix(m: np.ndarray, tol: float) -> tuple[float, float]:
    """Lanczos on an explicit matrix; products run in the dtype of ``m``."""
    dtype = m.dtype
    return lanczos_extremes(
        lambda x: m @ x.astype(dtype, copy=False),
        m.shape[0],
        tol,
        dense=lambda: m.astype(float),
    )


def symmetric_extreme_eigenvalues(m: np.ndarray, tol: float = DEFAULT_TOL) -> EigenExtremes:
    """Largest and smallest eigenvalue of a symmetric matrix.

    The input is symmetrized as ``(m + m.T) / 2``. Matrices up to
    ``DENSE_LIMIT`` rows use a dense solver; larger ones use Lanczos with a
    residual stopping rule at relative tolerance ``tol``.

    A float32 matrix is kept in single precision for the Lanczos products;
    its tolerance is then at least ``SINGLE_TOL``.
    """
    m = np.asarray(m)
    if m.dtype != np.float32:
        m = m.astype(float, copy=False)
    else:
        tol = max(tol, SINGLE_TOL)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ParameterError(f"expected a square matrix, got shape {m.shape}")
    if not np.all(np.isfinite(m)):
        raise NumericError("matrix has non-finite entries")
    m = (m + m.T) / 2
    n = m.shape[0]
    if n <= DENSE_LIMIT:
        w = np.linalg.eigvalsh(m.astype(float, copy=False))
        lo, hi = float(w[0]), float(w[-1])
    else:
        lo, hi = lanczos_extremes_matrix(m, tol)
    return EigenExtremes(hi, lo)


def leading_singular_subspace(m: np.ndarray, k0: int) -> np.ndarray:
    """Orthonormal ``n x k0`` basis for the top-``k0`` singular subspace.

    For symmetric input the singular vectors are eigenvectors ranked by
    ``|eigenvalue|``; anything else goes through a dense SVD.
    """
    m = np.asarray(m, dtype=float)
    n = m.shape[0]
    if m.ndim != 2 or m.shape[1] != n:
        raise ParameterError(f"expected a square matrix, got shape {m.shape}")
    if not 1 <= k0 <= n:
        raise ParameterError(f"need 1 <= K0 <= n, got K0={k0}, n={n}")
    if not np.all(np.isfinite(m)):
        raise NumericError("matrix has non-finite entries")
    if not np.allclose(m, m.T, rtol=0, atol=1e-12):
        u = np.linalg.svd(m)[0]
        return u[:, :k0]
    m = (m + m.T) / 2
    if n > DENSE_LIMIT and k0 < n // 4:
        try:
            vals, vecs = eigsh(m, k=k0, which="LM", v0=_start_vector(n), tol=1e-12, maxiter=50 * n)
        except ArpackNoConvergence:
            vals, vecs = np.linalg.eigh(m)
    else:
        vals, vecs = np.linalg.eigh(m)
    order = np.argsort(-np.abs(vals), kind="stable")[:k0]
    return vecs[:, order]


@dataclass(frozen=True)
class KMeansResult:
    labels: np.ndarray
    centers: np.ndarray
    objective: float
    n_iter: int
    history: tuple[float, ...]


def _sq_dist(x: np.ndarray, centers: np.ndarray) -> np.ndarray:
    d = (x * x).sum(1)[:, None] - 2 * x @ centers.T + (centers * centers).sum(1)[None, :]
    return np.maximum(d, 0.0)


def _plus_plus_seeds(x: np.ndarray, k: int, gen: np.random.Generator) -> np.ndarray:
    n = x.shape[0]
    chosen = [int(gen.integers(n))]
    closest = _sq_dist(x, x[chosen])[:, 0]
    for _ in range(1, k):
        total = closest.sum()
        if total <= 0:
            idx = int(gen.integers(n))
        else:
            idx = int(np.searchsorted(np.cumsum(closest), gen.random() * total, side="right"))
            idx = min(idx, n - 1)
        chosen.append(idx)
        closest = np.minimum(closest, _sq_dist(x, x[[idx]])[:, 0])
    return x[chosen].copy()


def _repair_empty(x, labels, centers, k):
    """Give every empty cluster the point farthest from its own centroid."""
    for c in range(k):
        if np.any(labels == c):
            continue
        d = ((x - centers[labels]) ** 2).sum(1)
        sizes = np.bincount(labels, minlength=k)
        # never empty another cluster in the process
        d[sizes[labels] <= 1] = -1.0
        far = int(np.argmax(d))
        labels[far] = c
        centers[c] = x[far]
    return labels


def kmeans(x: np.ndarray, k: int, rng: SeededRng, max_iter: int = 100) -> KMeansResult:
    """Lloyd's algorithm from k-means++ seeds.

    Ties in the nearest-centre assignment go to the lowest cluster index.
    Empty clusters are refilled, so the result has exactly ``k`` non-empty
    clusters whenever ``k <= len(x)``.
    """
    x = np.asarray(x, dtype=float)
    n = x.shape[0]
    if not 1 <= k <= n:
        raise ParameterError(f"need 1 <= k <= n, got k={k}, n={n}")
    centers = _plus_plus_seeds(x, k, rng.generator)
    labels = np.argmin(_sq_dist(x, centers), axis=1)
    labels = _repair_empty(x, labels, centers, k)
    history = []
    n_iter = 0
    for n_iter in range(1, max_iter + 1):
        centers = np.array([x[labels == c].mean(0) for c in range(k)])
        history.append(float(((x - centers[labels]) ** 2).sum()))
        new = np.argmin(_sq_dist(x, centers), axis=1)
        new = _repair_empty(x, new, centers, k)
        if np.array_equal(new, labels):
            break
        labels = new
    centers = np.array([x[labels == c].mean(0) for c in range(k)])
    objective = float(((x - centers[labels]) ** 2).sum())
    return KMeansResult(labels, centers, objective, n_iter, tuple(history))


def _canonical(labels: np.ndarray) -> np.ndarray:
    """Renumber clusters in order of first appearance."""
    _, first = np.unique(labels, return_index=True)
    order = np.argsort(first)
    remap = np.empty_like(order)
    remap[order] = np.arange(order.size)
    return remap[np.unique(labels, return_inverse=True)[1]]


def spectral_clustering(
    graph: AdjacencyGraph,
    k0: int,
    rng: SeededRng,
    restarts: int = 20,
    max_iter: int = 100,
) -> Membership:
    """k-means on the rows of the ``k0`` leading singular vectors of ``A``.

    Restart ``r`` is seeded from ``rng.child(r)``; the labeling with the
    smallest within-cluster sum of squares wins, ties going to the earlier
    restart. Labels are renumbered in order of first appearance.
    """
    n = graph.n
    if not 1 <= k0 <= n:
        raise ParameterError(f"need 1 <= K0 <= n, got K0={k0}, n={n}")
    if restarts < 1:
        raise ParameterError("restarts must be positive")
    if k0 == 1:
        return Membership(np.zeros(n, dtype=np.int64), 1)
    u = leading_singular_subspace(graph.entries, k0)
    best = None
    for r in range(restarts):
        res = kmeans(u, k0, rng.child(r), max_iter=max_iter)
        if best is None or res.objective < best.objective:
            best = res
    return Membership(_canonical(best.labels), k0)
