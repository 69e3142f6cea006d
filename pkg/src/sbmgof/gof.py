"""Goodness-of-fit test for stochastic block models.

The residual matrix centres every off-diagonal entry of ``A`` by its fitted
block probability ``p`` and divides by ``sqrt((n - 1) p (1 - p))``. Under a
correctly specified model its extreme eigenvalues, centred at 2 and scaled by
``n^(2/3)``, are asymptotically Tracy-Widom (beta=1). The test statistic is
the larger of the two scaled extremes, compared with the upper ``alpha/2``
quantile of TW1 (a Bonferroni correction for using both ends).

The bootstrap correction re-standardizes each extreme eigenvalue with the
mean and standard deviation of its counterpart over ``M`` graphs drawn from
the fitted model, then maps it onto the TW1 location and scale.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy.sparse import csr_matrix

from .errors import DegenerateBootstrapError, DegenerateClusterError, ParameterError
from .netgen import AdjacencyGraph, BlockMatrix, Membership, upper_pairs
from .rng import BOOTSTRAP, CLUSTER, SeededRng, as_rng
from .spectral import (
    DEFAULT_TOL,
    DENSE_LIMIT,
    SINGLE_TOL,
    EigenExtremes,
    lanczos_extremes,
    lanczos_extremes_matrix,
    spectral_clustering,
    symmetric_extreme_eigenvalues,
)
from .tracy_widom import load_tw1

DEFAULT_CLAMP = 1e-6
DEFAULT_BOOTSTRAP_REPS = 50
# stands in for the undefined within-block probability of a singleton cluster
SINGLETON_FILL = 0.5
# bootstrap replicates sparser than this are applied in sparse form
SPARSE_DENSITY = 0.2


@dataclass(frozen=True, eq=False)
class ResidualMatrix:
    """Centred and rescaled adjacency matrix with the probabilities that built it.

    ``phat`` holds the (clamped) probabilities actually used; ``clamp_count``
    is the number of distinct block entries ``k <= l`` that were clamped.
    """

    values: np.ndarray
    phat: np.ndarray
    clamp_count: int = 0

    @property
    def n(self) -> int:
        return self.values.shape[0]


@dataclass(frozen=True)
class BootstrapDiagnostics:
    mu_1: float
    s_1: float
    mu_n: float
    s_n: float
    M: int
    corrected_lambda_1: float
    corrected_lambda_n: float
    samples_1: tuple[float, ...] = field(repr=False, default=())
    samples_n: tuple[float, ...] = field(repr=False, default=())

    def to_dict(self, samples: bool = False) -> dict:
        out = {
            "M": self.M,
            "mu_1": self.mu_1,
            "s_1": self.s_1,
            "mu_n": self.mu_n,
            "s_n": self.s_n,
            "corrected_lambda_1": self.corrected_lambda_1,
            "corrected_lambda_n": self.corrected_lambda_n,
        }
        if samples:
            out["samples_1"] = list(self.samples_1)
            out["samples_n"] = list(self.samples_n)
        return out


@dataclass(frozen=True)
class GofTestResult:
    n: int
    K0: int
    statistic: float
    lambda_1: float
    lambda_n: float
    threshold: float
    alpha: float
    reject: bool
    mode: str
    p_value: float
    clamp_count: int = 0
    degenerate_clusters: tuple[int, ...] = ()
    cluster_sizes: tuple[int, ...] = ()
    bootstrap: BootstrapDiagnostics | None = None

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "K0": self.K0,
            "mode": self.mode,
            "statistic": self.statistic,
            "lambda_1": self.lambda_1,
            "lambda_n": self.lambda_n,
            "threshold": self.threshold,
            "alpha": self.alpha,
            "reject": self.reject,
            "p_value": self.p_value,
            "p_value_kind": "Bonferroni-style upper bound",
            "clamp_count": self.clamp_count,
            "degenerate_clusters": list(self.degenerate_clusters),
            "cluster_sizes": list(self.cluster_sizes),
            "bootstrap": None if self.bootstrap is None else self.bootstrap.to_dict(),
        }


@dataclass(frozen=True, eq=False)
class NullFit:
    """Everything the two test variants share for one graph and one ``K0``."""

    graph: AdjacencyGraph
    ghat: Membership
    bhat: BlockMatrix
    residual: ResidualMatrix
    extremes: EigenExtremes
    degenerate_clusters: tuple[int, ...] = ()

    @property
    def n(self) -> int:
        return self.graph.n

    @property
    def K0(self) -> int:
        return self.ghat.K


# ---------------------------------------------------------------------------
# Estimation and residuals
# ---------------------------------------------------------------------------


def _check_membership(graph: AdjacencyGraph, ghat: Membership) -> None:
    if ghat.n != graph.n:
        raise ParameterError(f"membership has {ghat.n} labels for a graph on {graph.n} nodes")
    if not ghat.is_proper:
        empty = np.flatnonzero(ghat.sizes == 0).tolist()
        raise ParameterError(f"membership leaves communities {empty} empty")


def _block_averages(graph: AdjacencyGraph, ghat: Membership) -> tuple[np.ndarray, np.ndarray]:
    z = ghat.one_hot()
    # ordered-pair edge sums; diagonal blocks count each edge twice
    sums = z.T @ graph.entries @ z
    sizes = ghat.sizes.astype(float)
    pairs = np.outer(sizes, sizes) - np.diag(sizes)
    singletons = np.flatnonzero(sizes == 1)
    with np.errstate(invalid="ignore", divide="ignore"):
        b = sums / pairs
    return b, singletons


def estimate_block_matrix(graph: AdjacencyGraph, ghat: Membership) -> BlockMatrix:
    """Plug-in block probabilities: edge counts over available node pairs.

    Off-diagonal blocks average over ``n_k * n_l`` pairs, diagonal blocks over
    ``n_k (n_k - 1) / 2``. A singleton cluster raises ``DegenerateClusterError``.
    """
    _check_membership(graph, ghat)
    b, singletons = _block_averages(graph, ghat)
    if singletons.size:
        raise DegenerateClusterError(int(singletons[0]))
    return BlockMatrix(b)


def _estimate_blocks_lenient(graph: AdjacencyGraph, ghat: Membership) -> tuple[BlockMatrix, tuple[int, ...]]:
    _check_membership(graph, ghat)
    b, singletons = _block_averages(graph, ghat)
    for k in singletons:
        b[k, k] = SINGLETON_FILL
    return BlockMatrix(b), tuple(int(k) for k in singletons)


def _scaled_residual(a: np.ndarray, phat: np.ndarray) -> np.ndarray:
    n = a.shape[0]
    inv = 1.0 / np.sqrt((n - 1) * phat * (1.0 - phat))
    np.fill_diagonal(inv, 0.0)
    return (a - phat) * inv


def residual_matrix(
    graph: AdjacencyGraph,
    ghat: Membership,
    bhat: BlockMatrix,
    clamp_eps: float = DEFAULT_CLAMP,
) -> ResidualMatrix:
    """Empirically centred and rescaled adjacency matrix.

    Block probabilities are clamped into ``[clamp_eps, 1 - clamp_eps]`` so
    that every entry has positive variance.
    """
    if not 0 < clamp_eps < 0.5:
        raise ParameterError(f"clamp_eps must lie in (0, 0.5), got {clamp_eps}")
    _check_membership(graph, ghat)
    if bhat.K != ghat.K:
        raise ParameterError(f"membership K={ghat.K} but block matrix K={bhat.K}")
    clamped = np.clip(bhat.probs, clamp_eps, 1.0 - clamp_eps)
    changed = np.triu(clamped != bhat.probs)
    g = ghat.labels
    phat = clamped[np.ix_(g, g)]
    return ResidualMatrix(_scaled_residual(graph.entries, phat), phat, int(changed.sum()))


def oracle_residual_matrix(graph: AdjacencyGraph, g: Membership, blocks: BlockMatrix) -> ResidualMatrix:
    """Residual matrix built from the true parameters (no clamping)."""
    _check_membership(graph, g)
    if blocks.K != g.K:
        raise ParameterError(f"membership K={g.K} but block matrix K={blocks.K}")
    if np.any(blocks.probs <= 0) or np.any(blocks.probs >= 1):
        raise ParameterError("oracle residuals need every block probability strictly inside (0, 1)")
    labels = g.labels
    p = blocks.probs[np.ix_(labels, labels)]
    return ResidualMatrix(_scaled_residual(graph.entries, p), p, 0)


# ---------------------------------------------------------------------------
# Statistics and decisions
# ---------------------------------------------------------------------------


def edge_statistics(extremes: EigenExtremes, n: int) -> tuple[float, float]:
    """``n^(2/3) (lambda_1 - 2)`` and ``n^(2/3) (-lambda_n - 2)``."""
    scale = n ** (2.0 / 3.0)
    return scale * (extremes.lambda_1 - 2.0), scale * (-extremes.lambda_n - 2.0)


def tw_threshold(alpha: float) -> float:
    """Upper ``alpha/2`` quantile of TW1."""
    if not 0 < alpha < 1:
        raise ParameterError(f"alpha must lie in (0, 1), got {alpha}")
    return load_tw1().upper_quantile(alpha / 2.0)


def p_value_bound(statistic: float) -> float:
    return float(min(1.0, 2.0 * (1.0 - load_tw1().cdf(statistic))))


def fit_null(
    graph: AdjacencyGraph,
    K0: int,
    ghat: Membership | None = None,
    rng: SeededRng | int | None = None,
    clamp_eps: float = DEFAULT_CLAMP,
    restarts: int = 20,
) -> NullFit:
    """Estimate ``(ghat, bhat)``, build the residual matrix and its extremes.

    Without ``ghat`` the membership comes from spectral clustering seeded by
    ``rng.child(CLUSTER)``. A singleton cluster gets the placeholder
    probability ``SINGLETON_FILL`` and is reported in ``degenerate_clusters``.
    """
    if K0 < 1:
        raise ParameterError(f"K0 must be positive, got {K0}")
    if ghat is None:
        ghat = spectral_clustering(graph, K0, as_rng(rng).child(CLUSTER), restarts=restarts)
    elif ghat.K != K0:
        raise ParameterError(f"supplied membership has K={ghat.K}, expected K0={K0}")
    bhat, degenerate = _estimate_blocks_lenient(graph, ghat)
    residual = residual_matrix(graph, ghat, bhat, clamp_eps)
    extremes = symmetric_extreme_eigenvalues(residual.values)
    return NullFit(graph, ghat, bhat, residual, extremes, degenerate)


def plain_result(fit: NullFit, alpha: float) -> GofTestResult:
    threshold = tw_threshold(alpha)
    t1, tn = edge_statistics(fit.extremes, fit.n)
    statistic = max(t1, tn)
    return GofTestResult(
        n=fit.n,
        K0=fit.K0,
        statistic=statistic,
        lambda_1=fit.extremes.lambda_1,
        lambda_n=fit.extremes.lambda_n,
        threshold=threshold,
        alpha=alpha,
        reject=bool(statistic >= threshold),
        mode="plain",
        p_value=p_value_bound(statistic),
        clamp_count=fit.residual.clamp_count,
        degenerate_clusters=fit.degenerate_clusters,
        cluster_sizes=tuple(int(s) for s in fit.ghat.sizes),
    )


@lru_cache(maxsize=4)
def _upper_mask(n: int) -> np.ndarray:
    mask = np.triu(np.ones((n, n), dtype=bool), 1)
    mask.flags.writeable = False
    return mask


def _replicate_dense(edges_upper, on, off):
    e = np.zeros(on.shape, dtype=bool)
    e[_upper_mask(on.shape[0])] = edges_upper
    e |= e.T
    return np.where(e, on, off)


def bootstrap_extremes(
    fit: NullFit, M: int, rng: SeededRng, single_precision: bool = True
) -> tuple[np.ndarray, np.ndarray]:
    """Extreme eigenvalues of ``M`` residual matrices from the fitted model.

    Replicate ``m`` is drawn from ``SBM(ghat, bhat)`` with
    ``rng.child(BOOTSTRAP, m)`` (same pair order and draws as
    ``generate_sbm``) and centred/scaled by the parent fit's clamped
    probabilities.

    Dense replicates are held in float32 by default, which bounds eigenvalue
    errors near 1e-7, far below the bootstrap spread. Replicates whose
    expected edge density is below ``SPARSE_DENSITY`` are instead applied as
    a sparse matrix of scaled edges minus a block-constant correction.
    """
    n = fit.n
    g = fit.ghat.labels
    iu = upper_pairs(n)
    pair_probs = fit.bhat.probs[g[iu[0]], g[iu[1]]]
    # clamped block probabilities, read back from the parent's phat
    first = np.array([np.flatnonzero(g == k)[0] for k in range(fit.K0)])
    pb = fit.residual.phat[np.ix_(first, first)]
    sb = np.sqrt((n - 1) * pb * (1.0 - pb))
    tol = SINGLE_TOL if single_precision else DEFAULT_TOL
    sparse = n > DENSE_LIMIT and pair_probs.mean() < SPARSE_DENSITY
    if sparse:
        inv_scale = 1.0 / sb
        shift = pb / sb
        shift_diag = shift[g, g]
        K = fit.K0
    else:
        dtype = np.float32 if single_precision else np.float64
        on = ((1.0 - pb) / sb)[np.ix_(g, g)].astype(dtype)
        off = (-pb / sb)[np.ix_(g, g)].astype(dtype)
        np.fill_diagonal(on, 0)
        np.fill_diagonal(off, 0)
    lam1 = np.empty(M)
    lamn = np.empty(M)
    for m in range(M):
        draws = rng.child(BOOTSTRAP, m).generator.random(pair_probs.size)
        if not sparse:
            r = _replicate_dense(draws < pair_probs, on, off)
            if n <= DENSE_LIMIT:
                w = np.linalg.eigvalsh(r.astype(float))
                lamn[m], lam1[m] = w[0], w[-1]
            else:
                lamn[m], lam1[m] = lanczos_extremes_matrix(r, tol)
            continue
        e = np.flatnonzero(draws < pair_probs)
        rows, cols = iu[0][e], iu[1][e]
        indptr = np.zeros(n + 1, dtype=np.int64)
        np.cumsum(np.bincount(rows, minlength=n), out=indptr[1:])
        upper = csr_matrix((inv_scale[g[rows], g[cols]], cols, indptr), shape=(n, n))
        upper_t = upper.T

        def matvec(x, upper=upper, upper_t=upper_t):
            block_sums = np.bincount(g, weights=x, minlength=K)
            return upper @ x + upper_t @ x - (shift @ block_sums)[g] + shift_diag * x

        def dense(upper=upper):
            a = (upper + upper.T).toarray()
            r = a - shift[np.ix_(g, g)]
            np.fill_diagonal(r, 0.0)
            return r

        lamn[m], lam1[m] = lanczos_extremes(matvec, n, tol, dense)
    return lam1, lamn


def bootstrap_result(fit: NullFit, alpha: float, M: int, rng: SeededRng) -> GofTestResult:
    if M < 2:
        raise ParameterError(f"bootstrap needs M >= 2 replicates, got {M}")
    threshold = tw_threshold(alpha)
    lam1, lamn = bootstrap_extremes(fit, M, rng)
    mu_1, mu_n = float(lam1.mean()), float(lamn.mean())
    s_1, s_n = float(lam1.std(ddof=1)), float(lamn.std(ddof=1))
    if s_1 == 0 or s_n == 0:
        raise DegenerateBootstrapError(
            f"bootstrap extreme eigenvalues have zero spread (s_1={s_1}, s_n={s_n})"
        )
    tw = load_tw1()
    corrected_1 = tw.mean + tw.sd * (fit.extremes.lambda_1 - mu_1) / s_1
    corrected_n = tw.mean + tw.sd * (-(fit.extremes.lambda_n - mu_n) / s_n)
    statistic = max(corrected_1, corrected_n)
    diag = BootstrapDiagnostics(
        mu_1=mu_1,
        s_1=s_1,
        mu_n=mu_n,
        s_n=s_n,
        M=M,
        corrected_lambda_1=corrected_1,
        corrected_lambda_n=corrected_n,
        samples_1=tuple(lam1.tolist()),
        samples_n=tuple(lamn.tolist()),
    )
    return GofTestResult(
        n=fit.n,
        K0=fit.K0,
        statistic=statistic,
        lambda_1=fit.extremes.lambda_1,
        lambda_n=fit.extremes.lambda_n,
        threshold=threshold,
        alpha=alpha,
        reject=bool(statistic >= threshold),
        mode="bootstrap",
        p_value=p_value_bound(statistic),
        clamp_count=fit.residual.clamp_count,
        degenerate_clusters=fit.degenerate_clusters,
        cluster_sizes=tuple(int(s) for s in fit.ghat.sizes),
        bootstrap=diag,
    )


def gof_test(
    graph: AdjacencyGraph,
    K0: int,
    alpha: float = 0.05,
    ghat: Membership | None = None,
    rng: SeededRng | int | None = None,
    clamp_eps: float = DEFAULT_CLAMP,
) -> GofTestResult:
    """Test ``H0: K = K0`` with the Tracy-Widom threshold."""
    tw_threshold(alpha)
    fit = fit_null(graph, K0, ghat, rng, clamp_eps)
    return plain_result(fit, alpha)


def bootstrap_corrected_test(
    graph: AdjacencyGraph,
    K0: int,
    alpha: float = 0.05,
    M: int = DEFAULT_BOOTSTRAP_REPS,
    ghat: Membership | None = None,
    rng: SeededRng | int | None = None,
    clamp_eps: float = DEFAULT_CLAMP,
) -> GofTestResult:
    """Test ``H0: K = K0`` after the fused bootstrap correction."""
    if M < 2:
        raise ParameterError(f"bootstrap needs M >= 2 replicates, got {M}")
    tw_threshold(alpha)
    rng = as_rng(rng)
    fit = fit_null(graph, K0, ghat, rng, clamp_eps)
    return bootstrap_result(fit, alpha, M, rng)
