"""Sequential-testing estimate of the number of communities.

``K0 = 1, 2, ...`` is tested in turn and the first ``K0`` whose statistic
falls below the threshold is returned.
"""

from __future__ import annotations

from dataclasses import dataclass

from .errors import ParameterError
from .gof import DEFAULT_BOOTSTRAP_REPS, DEFAULT_CLAMP, bootstrap_result, fit_null, plain_result, tw_threshold
from .netgen import AdjacencyGraph, Membership
from .rng import STAGE, SeededRng, as_rng


@dataclass(frozen=True)
class QuantileThreshold:
    """Threshold ``t(alpha/2)``, the same cut-off as a level-``alpha`` test."""

    alpha: float = 1e-4

    def __post_init__(self):
        if not 0 < self.alpha < 1:
            raise ParameterError(f"alpha must lie in (0, 1), got {self.alpha}")

    def threshold(self, n: int) -> float:
        return tw_threshold(self.alpha)

    def describe(self) -> str:
        return f"quantile(alpha={self.alpha!r})"


@dataclass(frozen=True)
class PowerLawThreshold:
    """Threshold ``c * n**eps`` growing with the network size."""

    c: float
    eps: float

    def __post_init__(self):
        if not 0 < self.eps < 5 / 6:
            raise ParameterError(f"eps must lie in (0, 5/6), got {self.eps}")
        if not self.c > 0:
            raise ParameterError(f"c must be positive, got {self.c}")

    def threshold(self, n: int) -> float:
        return self.c * n**self.eps

    def describe(self) -> str:
        return f"power-law(c={self.c!r}, eps={self.eps!r})"


@dataclass(frozen=True)
class StageRecord:
    K0: int
    statistic: float
    threshold: float
    rejected: bool
    degenerate_clusters: tuple[int, ...] = ()
    cluster_sizes: tuple[int, ...] = ()

    def to_dict(self) -> dict:
        return {
            "K0": self.K0,
            "statistic": self.statistic,
            "threshold": self.threshold,
            "rejected": self.rejected,
            "degenerate_clusters": list(self.degenerate_clusters),
            "cluster_sizes": list(self.cluster_sizes),
        }


@dataclass(frozen=True)
class KEstimateResult:
    k_hat: int
    trace: tuple[StageRecord, ...]
    mode: str
    bootstrap: bool
    capped: bool
    membership: Membership | None = None

    def to_dict(self) -> dict:
        return {
            "k_hat": self.k_hat,
            "mode": self.mode,
            "bootstrap": self.bootstrap,
            "capped": self.capped,
            "trace": [s.to_dict() for s in self.trace],
        }


def default_k_max(n: int) -> int:
    cube = round(n ** (1 / 3))
    while cube**3 > n:
        cube -= 1
    while (cube + 1) ** 3 <= n:
        cube += 1
    return min(n, max(10, cube))


def estimate_k(
    graph: AdjacencyGraph,
    mode: QuantileThreshold | PowerLawThreshold | None = None,
    k_max: int | None = None,
    bootstrap: bool = True,
    M: int = DEFAULT_BOOTSTRAP_REPS,
    rng: SeededRng | int | None = None,
    clamp_eps: float = DEFAULT_CLAMP,
) -> KEstimateResult:
    """Smallest ``K0 <= k_max`` at which the goodness-of-fit test does not reject.

    Stage ``K0`` draws all of its randomness from ``rng.child(STAGE, K0)``.
    When every stage up to ``k_max`` rejects, ``k_hat = k_max`` and
    ``capped`` is set.
    """
    mode = QuantileThreshold() if mode is None else mode
    rng = as_rng(rng)
    n = graph.n
    k_max = default_k_max(n) if k_max is None else int(k_max)
    if not 1 <= k_max <= n:
        raise ParameterError(f"k_max must lie in 1..{n}, got {k_max}")
    if bootstrap and M < 2:
        raise ParameterError(f"bootstrap needs M >= 2 replicates, got {M}")
    threshold = mode.threshold(n)
    alpha = getattr(mode, "alpha", 0.5)
    trace = []
    fit = None
    for k0 in range(1, k_max + 1):
        stage = rng.child(STAGE, k0)
        fit = fit_null(graph, k0, rng=stage, clamp_eps=clamp_eps)
        res = bootstrap_result(fit, alpha, M, stage) if bootstrap else plain_result(fit, alpha)
        rejected = bool(res.statistic >= threshold)
        trace.append(
            StageRecord(k0, res.statistic, threshold, rejected, res.degenerate_clusters, res.cluster_sizes)
        )
        if not rejected:
            return KEstimateResult(k0, tuple(trace), mode.describe(), bootstrap, False, fit.ghat)
    return KEstimateResult(k_max, tuple(trace), mode.describe(), bootstrap, True, fit.ghat)
