"""Block-model parameter types, random graph generators and edge-list I/O.

Community labels are stored 0-based (``0..K-1``) throughout the library;
label files with arbitrary tokens are mapped onto that range in sorted order.

All generators draw exactly one uniform variate per node pair ``i < j``,
visited in row-major order, and set ``A[i, j] = 1`` when the variate falls
below the pair's edge probability. Models that coincide pairwise (a degree
corrected model with unit activeness, a mixed membership model with
basis-vector rows) therefore produce bit-identical graphs from the same
stream, not just graphs with the same distribution.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from pathlib import Path
from typing import Hashable, Iterable, Sequence

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components

from .errors import EdgeListParseError, ParameterError
from .rng import SeededRng

_ROW_SUM_TOL = 1e-9
_MAX_LABEL_DRAWS = 1000


def _readonly(a: np.ndarray) -> np.ndarray:
    a = np.array(a, copy=True)
    a.setflags(write=False)
    return a


@lru_cache(maxsize=8)
def upper_pairs(n: int) -> tuple[np.ndarray, np.ndarray]:
    """Row-major indices of all pairs ``i < j``."""
    iu = np.triu_indices(n, k=1)
    for a in iu:
        a.setflags(write=False)
    return iu


# ---------------------------------------------------------------------------
# Domain types
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class AdjacencyGraph:
    """A simple undirected graph as a symmetric 0/1 matrix with zero diagonal.

    ``node_ids`` optionally records the original identifier of every row, e.g.
    after reading an edge list or extracting a connected component.
    """

    entries: np.ndarray
    node_ids: tuple | None = None

    def __post_init__(self):
        a = np.asarray(self.entries, dtype=float)
        if a.ndim != 2 or a.shape[0] != a.shape[1] or a.shape[0] < 1:
            raise ParameterError(f"adjacency matrix must be square and non-empty, got shape {a.shape}")
        if not np.all((a == 0) | (a == 1)):
            raise ParameterError("adjacency entries must be 0 or 1")
        if np.any(np.diag(a) != 0):
            raise ParameterError("adjacency diagonal must be zero")
        if not np.array_equal(a, a.T):
            raise ParameterError("adjacency matrix must be symmetric")
        if self.node_ids is not None and len(self.node_ids) != a.shape[0]:
            raise ParameterError(f"node_ids has {len(self.node_ids)} entries for {a.shape[0]} nodes")
        object.__setattr__(self, "entries", _readonly(a))
        if self.node_ids is not None:
            object.__setattr__(self, "node_ids", tuple(self.node_ids))

    @property
    def n(self) -> int:
        return self.entries.shape[0]

    @property
    def n_edges(self) -> int:
        return int(self.entries.sum()) // 2

    def edges(self) -> np.ndarray:
        """Edge list as an ``(m, 2)`` array with ``i < j``, row-major order."""
        i, j = np.nonzero(np.triu(self.entries, k=1))
        return np.column_stack([i, j])

    def degrees(self) -> np.ndarray:
        return self.entries.sum(axis=1)

    def permuted(self, perm: Sequence[int]) -> AdjacencyGraph:
        """Graph with node ``k`` of the result equal to node ``perm[k]`` here."""
        p = np.asarray(perm)
        return AdjacencyGraph(self.entries[np.ix_(p, p)])

    @classmethod
    def from_edges(cls, n: int, edges: Iterable[tuple[int, int]]) -> AdjacencyGraph:
        a = np.zeros((n, n))
        for i, j in edges:
            if i == j:
                raise ParameterError(f"self-loop at node {i}")
            a[i, j] = a[j, i] = 1.0
        return cls(a)

    def __eq__(self, other):
        if not isinstance(other, AdjacencyGraph):
            return NotImplemented
        return np.array_equal(self.entries, other.entries)

    __hash__ = None


@dataclass(frozen=True, eq=False)
class Membership:
    """Community labels ``0..K-1`` for ``n`` nodes."""

    labels: np.ndarray
    K: int

    def __post_init__(self):
        g = np.asarray(self.labels)
        if g.ndim != 1 or g.size == 0:
            raise ParameterError("membership labels must be a non-empty 1-d sequence")
        if not np.issubdtype(g.dtype, np.integer):
            if not np.all(np.mod(g, 1) == 0):
                raise ParameterError("membership labels must be integers")
        g = g.astype(np.int64)
        K = int(self.K)
        if K < 1:
            raise ParameterError(f"K must be positive, got {K}")
        if g.min() < 0 or g.max() >= K:
            raise ParameterError(f"labels must lie in 0..{K - 1}")
        object.__setattr__(self, "labels", _readonly(g))
        object.__setattr__(self, "K", K)

    @property
    def n(self) -> int:
        return self.labels.size

    @property
    def sizes(self) -> np.ndarray:
        return np.bincount(self.labels, minlength=self.K)

    @property
    def is_proper(self) -> bool:
        return bool(np.all(self.sizes > 0))

    def members(self, k: int) -> np.ndarray:
        return np.flatnonzero(self.labels == k)

    def one_hot(self) -> np.ndarray:
        z = np.zeros((self.n, self.K))
        z[np.arange(self.n), self.labels] = 1.0
        return z

    def relabeled(self, perm: Sequence[int]) -> Membership:
        """Apply the label map ``k -> perm[k]``."""
        return Membership(np.asarray(perm)[self.labels], self.K)

    def subset(self, index: Sequence[int]) -> Membership:
        """Labels restricted to ``index``; unused labels are dropped and the rest renumbered."""
        return Membership.from_labels(self.labels[np.asarray(index)])

    @classmethod
    def from_labels(cls, tokens: Sequence[Hashable]) -> Membership:
        """Build from arbitrary tokens; distinct tokens map to 0..K-1 in sorted order."""
        tokens = list(tokens)
        if not tokens:
            raise ParameterError("empty label sequence")
        try:
            distinct = sorted(set(tokens))
        except TypeError:
            distinct = sorted(set(tokens), key=str)
        index = {t: k for k, t in enumerate(distinct)}
        return cls(np.array([index[t] for t in tokens]), len(distinct))

    def __eq__(self, other):
        if not isinstance(other, Membership):
            return NotImplemented
        return self.K == other.K and np.array_equal(self.labels, other.labels)

    __hash__ = None


@dataclass(frozen=True, eq=False)
class BlockMatrix:
    """Symmetric community-wise edge probabilities."""

    probs: np.ndarray

    def __post_init__(self):
        b = np.atleast_2d(np.asarray(self.probs, dtype=float))
        if b.ndim != 2 or b.shape[0] != b.shape[1]:
            raise ParameterError(f"block matrix must be square, got shape {b.shape}")
        if not np.all(np.isfinite(b)) or b.min() < 0 or b.max() > 1:
            raise ParameterError("block probabilities must lie in [0, 1]")
        if not np.allclose(b, b.T, rtol=0, atol=1e-12):
            raise ParameterError("block matrix must be symmetric")
        object.__setattr__(self, "probs", _readonly((b + b.T) / 2))

    @property
    def K(self) -> int:
        return self.probs.shape[0]

    def has_distinct_rows(self) -> bool:
        rows = {tuple(r) for r in self.probs}
        return len(rows) == self.K

    def permuted(self, perm: Sequence[int]) -> BlockMatrix:
        """Rows/columns rearranged to match ``Membership.relabeled(perm)``."""
        p = np.asarray(perm)
        inv = np.argsort(p)
        return BlockMatrix(self.probs[np.ix_(inv, inv)])

    def __eq__(self, other):
        if not isinstance(other, BlockMatrix):
            return NotImplemented
        return np.array_equal(self.probs, other.probs)

    __hash__ = None


@dataclass(frozen=True, eq=False)
class DcbmParams:
    membership: Membership
    blocks: BlockMatrix
    activeness: np.ndarray

    def __post_init__(self):
        psi = np.asarray(self.activeness, dtype=float)
        if psi.ndim != 1 or psi.size != self.membership.n:
            raise ParameterError(
                f"activeness has length {psi.size}, membership has {self.membership.n} nodes"
            )
        if not np.all(np.isfinite(psi)) or psi.min() < 0 or psi.max() > 1:
            raise ParameterError("activeness entries must lie in [0, 1]")
        if self.membership.K != self.blocks.K:
            raise ParameterError(f"membership K={self.membership.K} but block matrix K={self.blocks.K}")
        object.__setattr__(self, "activeness", _readonly(psi))


@dataclass(frozen=True, eq=False)
class MmbmParams:
    blocks: BlockMatrix
    mixing: np.ndarray

    def __post_init__(self):
        phi = np.asarray(self.mixing, dtype=float)
        if phi.ndim != 2 or phi.shape[1] != self.blocks.K:
            raise ParameterError(f"mixing matrix must be n x {self.blocks.K}, got shape {phi.shape}")
        if not np.all(np.isfinite(phi)) or phi.min() < 0:
            raise ParameterError("mixing weights must be non-negative")
        if np.max(np.abs(phi.sum(axis=1) - 1.0)) > _ROW_SUM_TOL:
            raise ParameterError("mixing rows must sum to 1")
        object.__setattr__(self, "mixing", _readonly(phi))

    @property
    def n(self) -> int:
        return self.mixing.shape[0]


# ---------------------------------------------------------------------------
# Parameter helpers
# ---------------------------------------------------------------------------


def planted_blocks(K: int, within: float, between: float) -> BlockMatrix:
    """``B[k, l] = between + (within - between) * 1(k == l)``."""
    return BlockMatrix(np.full((K, K), between) + (within - between) * np.eye(K))


def random_membership(n: int, K: int, rng: SeededRng) -> Membership:
    """iid uniform labels, redrawn until every community is non-empty."""
    if K < 1 or n < K:
        raise ParameterError(f"cannot place {n} nodes into {K} non-empty communities")
    gen = rng.generator
    for _ in range(_MAX_LABEL_DRAWS):
        labels = gen.integers(0, K, size=n)
        if np.unique(labels).size == K:
            return Membership(labels, K)
    raise ParameterError(f"no proper membership after {_MAX_LABEL_DRAWS} draws (n={n}, K={K})")


def balanced_membership(n: int, K: int) -> Membership:
    """Contiguous communities whose sizes differ by at most one."""
    if K < 1 or n < K:
        raise ParameterError(f"cannot place {n} nodes into {K} non-empty communities")
    return Membership(np.arange(n) * K // n, K)


def sample_dirichlet_rows(n: int, K: int, alpha: float, rng: SeededRng) -> np.ndarray:
    """``n`` independent Dirichlet(alpha * ones(K)) rows."""
    if not alpha > 0:
        raise ParameterError(f"Dirichlet parameter must be positive, got {alpha}")
    if K < 1 or n < 1:
        raise ParameterError(f"need n >= 1 and K >= 1, got n={n}, K={K}")
    if K == 1:
        return np.ones((n, 1))
    rows = rng.generator.dirichlet(np.full(K, float(alpha)), size=n)
    return rows / rows.sum(axis=1, keepdims=True)


# ---------------------------------------------------------------------------
# Generators
# ---------------------------------------------------------------------------


def sample_symmetric(pair_probs: np.ndarray, n: int, gen: np.random.Generator) -> np.ndarray:
    """Symmetric 0/1 float matrix with independent upper-triangle Bernoulli entries.

    ``pair_probs`` lists the edge probabilities of the pairs ``i < j`` in
    row-major order; one uniform is consumed per pair in that same order.
    """
    iu = upper_pairs(n)
    draws = gen.random(iu[0].size)
    a = np.zeros((n, n))
    a[iu] = draws < pair_probs
    return a + a.T


def _graph(a: np.ndarray) -> AdjacencyGraph:
    return AdjacencyGraph(a)


def generate_sbm(membership: Membership, blocks: BlockMatrix, rng: SeededRng) -> AdjacencyGraph:
    if membership.K != blocks.K:
        raise ParameterError(f"membership K={membership.K} but block matrix K={blocks.K}")
    if not membership.is_proper:
        raise ParameterError("membership must use every community label")
    n = membership.n
    g = membership.labels
    iu = upper_pairs(n)
    probs = blocks.probs[g[iu[0]], g[iu[1]]]
    return _graph(sample_symmetric(probs, n, rng.generator))


def generate_dcbm(params: DcbmParams, rng: SeededRng) -> AdjacencyGraph:
    g = params.membership.labels
    psi = params.activeness
    n = g.size
    iu = upper_pairs(n)
    probs = psi[iu[0]] * psi[iu[1]] * params.blocks.probs[g[iu[0]], g[iu[1]]]
    return _graph(sample_symmetric(probs, n, rng.generator))


def generate_mmbm(params: MmbmParams, rng: SeededRng) -> AdjacencyGraph:
    phi = params.mixing
    n = params.n
    iu = upper_pairs(n)
    p = phi @ params.blocks.probs @ phi.T
    probs = np.clip(p[iu], 0.0, 1.0)
    return _graph(sample_symmetric(probs, n, rng.generator))


# ---------------------------------------------------------------------------
# Edge lists and components
# ---------------------------------------------------------------------------


def read_edge_list(
    path,
    indexing: int = 0,
    ignore_self_loops: bool = True,
    compact: bool = False,
) -> AdjacencyGraph:
    """Read an undirected simple graph from a whitespace-separated edge list.

    Each non-comment line holds two node ids. With ``compact=False`` ids are
    integers and node ``i`` becomes row ``i - indexing``, so the node count is
    ``max id + 1 - indexing`` and ids that never appear are isolated nodes.
    With ``compact=True`` ids are arbitrary tokens numbered in order of first
    appearance. Duplicate and reversed edges collapse to one edge. A self-loop
    line ``i i`` registers node ``i`` without adding an edge when
    ``ignore_self_loops`` is set, and is an error otherwise.

    The original ids are kept in ``AdjacencyGraph.node_ids``.
    """
    if indexing not in (0, 1):
        raise ParameterError(f"indexing must be 0 or 1, got {indexing}")
    path = Path(path)
    ids: dict = {}
    edges: set[tuple[int, int]] = set()
    max_id = -1

    def node(token: str, lineno: int) -> int:
        nonlocal max_id
        if compact:
            return ids.setdefault(token, len(ids))
        try:
            v = int(token)
        except ValueError:
            raise EdgeListParseError(f"node id {token!r} is not an integer", path, lineno) from None
        if v < indexing:
            raise EdgeListParseError(f"node id {v} below {indexing}-based indexing", path, lineno)
        max_id = max(max_id, v)
        return v - indexing

    with path.open() as fh:
        for lineno, line in enumerate(fh, start=1):
            s = line.strip()
            if not s or s.startswith("#"):
                continue
            parts = s.split()
            if len(parts) != 2:
                raise EdgeListParseError(f"expected 2 fields, found {len(parts)}", path, lineno)
            i, j = node(parts[0], lineno), node(parts[1], lineno)
            if i == j:
                if ignore_self_loops:
                    continue
                raise EdgeListParseError(f"self-loop on node {parts[0]}", path, lineno)
            edges.add((min(i, j), max(i, j)))

    n = len(ids) if compact else max_id + 1 - indexing
    if n <= 0:
        raise EdgeListParseError("edge list contains no nodes", path)
    a = np.zeros((n, n))
    if edges:
        e = np.array(sorted(edges))
        a[e[:, 0], e[:, 1]] = 1.0
        a[e[:, 1], e[:, 0]] = 1.0
    node_ids = tuple(ids) if compact else tuple(range(indexing, n + indexing))
    return AdjacencyGraph(a, node_ids=node_ids)


def write_edge_list(graph: AdjacencyGraph, path, indexing: int = 0) -> None:
    """Write ``graph`` so that ``read_edge_list(path, indexing)`` restores it.

    Isolated nodes are written as self-loop lines, which the reader turns back
    into nodes without edges.
    """
    if indexing not in (0, 1):
        raise ParameterError(f"indexing must be 0 or 1, got {indexing}")
    lines = [f"# undirected simple graph, n={graph.n}, m={graph.n_edges}, {indexing}-indexed"]
    lines += [f"{i + indexing} {j + indexing}" for i, j in graph.edges()]
    lines += [f"{i + indexing} {i + indexing}" for i in np.flatnonzero(graph.degrees() == 0)]
    Path(path).write_text("\n".join(lines) + "\n")


def read_labels(path) -> list[str]:
    """One label token per non-blank, non-comment line."""
    path = Path(path)
    out = []
    with path.open() as fh:
        for lineno, line in enumerate(fh, start=1):
            s = line.strip()
            if not s or s.startswith("#"):
                continue
            parts = s.split()
            if len(parts) != 1:
                raise EdgeListParseError(f"expected one label, found {len(parts)} fields", path, lineno)
            out.append(parts[0])
    if not out:
        raise EdgeListParseError("label file is empty", path)
    return out


def write_membership(membership: Membership, path) -> None:
    Path(path).write_text("".join(f"{k}\n" for k in membership.labels))


def largest_connected_component(graph: AdjacencyGraph) -> tuple[AdjacencyGraph, np.ndarray]:
    """Induced subgraph on the largest component and its node index map.

    Ties between equally large components go to the one containing the
    smallest node index. ``index_map[k]`` is the row of ``graph`` that became
    row ``k`` of the subgraph (increasing order).
    """
    n_comp, comp = connected_components(csr_matrix(graph.entries), directed=False)
    if n_comp == 1:
        return graph, np.arange(graph.n)
    sizes = np.bincount(comp)
    # connected_components numbers components by their smallest node, so
    # argmax already breaks ties toward the smallest index; keep it explicit.
    first = np.array([np.flatnonzero(comp == c)[0] for c in range(n_comp)])
    best = min(range(n_comp), key=lambda c: (-sizes[c], first[c]))
    index = np.flatnonzero(comp == best)
    ids = None if graph.node_ids is None else tuple(graph.node_ids[k] for k in index)
    return AdjacencyGraph(graph.entries[np.ix_(index, index)], node_ids=ids), index
