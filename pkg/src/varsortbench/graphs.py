"""DAG representations, random graph sampling, and graph algorithms.

Adjacency convention: ``adj[k, j]`` is True iff there is an edge ``k -> j``.
Graphs are immutable after construction; all operations are pure.
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError, IntegrityError, MecSizeError, ParseError
from .rng import substream

__all__ = [
    "Dag",
    "Cpdag",
    "GraphSpec",
    "dag_from_edges",
    "sample_er_dag",
    "sample_sf_dag",
    "topological_order",
    "descendant_matrix",
    "dag_to_cpdag",
    "enumerate_mec",
    "d_separated",
    "d_separated_adj",
    "reachability_adj",
    "read_edge_list",
    "write_edge_list",
]


def _as_bool_matrix(a, name: str) -> np.ndarray:
    a = np.asarray(a, dtype=bool)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ConfigurationError(f"{name} must be a square matrix, got shape {a.shape}")
    out = a.copy()
    out.setflags(write=False)
    return out


def _is_acyclic(adj: np.ndarray) -> bool:
    # Kahn's method on a scratch copy of the in-degrees.
    d = adj.shape[0]
    indeg = adj.sum(axis=0).astype(int)
    stack = [i for i in range(d) if indeg[i] == 0]
    seen = 0
    while stack:
        u = stack.pop()
        seen += 1
        for v in np.flatnonzero(adj[u]):
            indeg[v] -= 1
            if indeg[v] == 0:
                stack.append(int(v))
    return seen == d


@dataclass(frozen=True, eq=False)
class Dag:
    """Directed acyclic graph as a boolean adjacency matrix.

    ``order`` optionally records the causal order used at generation time
    (a permutation of node labels, causes first).
    """

    adj: np.ndarray
    order: tuple[int, ...] | None = None

    def __post_init__(self):
        adj = _as_bool_matrix(self.adj, "adj")
        object.__setattr__(self, "adj", adj)
        if adj.diagonal().any():
            raise IntegrityError("self-loops are not allowed")
        if not _is_acyclic(adj):
            raise IntegrityError("adjacency matrix contains a directed cycle")
        if self.order is not None:
            order = tuple(int(i) for i in self.order)
            if sorted(order) != list(range(adj.shape[0])):
                raise ConfigurationError("order must be a permutation of the nodes")
            object.__setattr__(self, "order", order)

    @property
    def d(self) -> int:
        return self.adj.shape[0]

    @property
    def n_edges(self) -> int:
        return int(self.adj.sum())

    def edges(self) -> list[tuple[int, int]]:
        return [(int(i), int(j)) for i, j in zip(*np.nonzero(self.adj))]

    def parents(self, j: int) -> np.ndarray:
        return np.flatnonzero(self.adj[:, j])

    def __eq__(self, other):
        return isinstance(other, Dag) and np.array_equal(self.adj, other.adj)

    def __hash__(self):
        return hash(self.adj.tobytes())


@dataclass(frozen=True, eq=False)
class Cpdag:
    """Completed partially directed acyclic graph.

    ``directed`` holds the compelled edges, ``undirected`` the reversible
    ones (symmetric). The two edge sets are disjoint.
    """

    directed: np.ndarray
    undirected: np.ndarray

    def __post_init__(self):
        directed = _as_bool_matrix(self.directed, "directed")
        undirected = _as_bool_matrix(self.undirected, "undirected")
        object.__setattr__(self, "directed", directed)
        object.__setattr__(self, "undirected", undirected)
        if directed.shape != undirected.shape:
            raise ConfigurationError("directed and undirected parts must have equal shape")
        if not np.array_equal(undirected, undirected.T):
            raise IntegrityError("undirected part must be symmetric")
        if directed.diagonal().any() or undirected.diagonal().any():
            raise IntegrityError("self-loops are not allowed")
        if ((directed | directed.T) & undirected).any():
            raise IntegrityError("an edge cannot be both directed and undirected")
        if not _is_acyclic(directed):
            raise IntegrityError("directed part contains a cycle")

    @property
    def d(self) -> int:
        return self.directed.shape[0]

    def __eq__(self, other):
        return (
            isinstance(other, Cpdag)
            and np.array_equal(self.directed, other.directed)
            and np.array_equal(self.undirected, other.undirected)
        )

    def __hash__(self):
        return hash((self.directed.tobytes(), self.undirected.tobytes()))


@dataclass(frozen=True)
class GraphSpec:
    """Random-graph family descriptor: ``ER-k`` or ``SF-k`` on ``d`` nodes."""

    model: str
    d: int
    k: int

    def __post_init__(self):
        if self.model not in ("ER", "SF"):
            raise ConfigurationError(f"unknown graph model {self.model!r}")
        if self.d < 2:
            raise ConfigurationError("need at least 2 nodes")
        if self.k < 1:
            raise ConfigurationError("k must be at least 1")
        # k = d - 1 saturates the edge-probability clip (ER) and the
        # attachment fan-in (SF); beyond that no DAG interpretation exists.
        if self.k >= self.d:
            raise ConfigurationError(
                f"{self.model}-{self.k} on {self.d} nodes asks for more edges than a DAG can hold"
            )

    @property
    def label(self) -> str:
        return f"{self.model}-{self.k}(d={self.d})"


def dag_from_edges(d: int, edges, order=None) -> Dag:
    adj = np.zeros((d, d), dtype=bool)
    for i, j in edges:
        adj[i, j] = True
    return Dag(adj, order=order)


def sample_er_dag(spec: GraphSpec, seed: int) -> Dag:
    """Sample an Erdos-Renyi DAG with expected edge count ``d * k``.

    Edges appear independently with probability ``p = 2k/(d-1)`` (clipped
    to 1) between position pairs of a uniformly random causal order and are
    oriented along that order.
    """
    if spec.model != "ER":
        raise ConfigurationError(f"expected an ER spec, got {spec.model}")
    rng = substream(seed, "graphs", "er")
    d = spec.d
    p = min(1.0, 2.0 * spec.k / (d - 1))
    perm = rng.permutation(d)
    mask = rng.random((d, d)) < p
    adj = np.zeros((d, d), dtype=bool)
    for a in range(d):
        for b in range(a + 1, d):
            if mask[a, b]:
                adj[perm[a], perm[b]] = True
    return Dag(adj, order=tuple(int(i) for i in perm))


def sample_sf_dag(spec: GraphSpec, seed: int) -> Dag:
    """Sample a scale-free DAG via preferential attachment.

    Construction starts from a complete DAG on the first ``k`` positions;
    each later position attaches ``k`` edges from existing nodes chosen
    proportionally to their total degree, oriented old -> new. Node labels
    are finally shuffled so the causal order is not the identity. The edge
    count is exactly ``k*d - k*(k+1)/2``.
    """
    if spec.model != "SF":
        raise ConfigurationError(f"expected an SF spec, got {spec.model}")
    if spec.k >= spec.d:
        raise ConfigurationError("preferential attachment needs k < d")
    rng = substream(seed, "graphs", "sf")
    d, k = spec.d, spec.k
    pos_adj = np.zeros((d, d), dtype=bool)
    for b in range(k):
        for a in range(b):
            pos_adj[a, b] = True
    degree = np.zeros(d, dtype=float)
    degree[:k] = k - 1
    for new in range(k, d):
        if new == k:
            targets = np.arange(k)
        else:
            weights = degree[:new] / degree[:new].sum()
            targets = rng.choice(new, size=k, replace=False, p=weights)
        for t in targets:
            pos_adj[t, new] = True
            degree[t] += 1
        degree[new] = k
    perm = rng.permutation(d)
    adj = np.zeros((d, d), dtype=bool)
    for a, b in zip(*np.nonzero(pos_adj)):
        adj[perm[a], perm[b]] = True
    return Dag(adj, order=tuple(int(i) for i in perm))


def topological_order(g: Dag) -> tuple[int, ...]:
    """Kahn's method with smallest-index tie-breaking (deterministic)."""
    d = g.d
    indeg = g.adj.sum(axis=0).astype(int)
    heap = [i for i in range(d) if indeg[i] == 0]
    heapq.heapify(heap)
    out = []
    while heap:
        u = heapq.heappop(heap)
        out.append(u)
        for v in np.flatnonzero(g.adj[u]):
            indeg[v] -= 1
            if indeg[v] == 0:
                heapq.heappush(heap, int(v))
    if len(out) != d:
        raise IntegrityError("cycle detected during topological sort")
    return tuple(out)


def descendant_matrix(g: Dag) -> np.ndarray:
    """Entry (i, j) is True iff a directed path i -> ... -> j of length >= 1 exists."""
    return reachability_adj(g.adj)


def reachability_adj(adj: np.ndarray, reflexive: bool = False) -> np.ndarray:
    """Transitive closure of a raw adjacency matrix (no DAG validation)."""
    d = adj.shape[0]
    e = adj.astype(np.int64)
    out = np.eye(d, dtype=bool) if reflexive else np.zeros((d, d), dtype=bool)
    power = adj.astype(bool).copy()
    for _ in range(d - 1):
        out |= power
        power = (power.astype(np.int64) @ e) > 0
    return out


def _ancestors_of(adj: np.ndarray, nodes) -> np.ndarray:
    """Boolean mask of nodes with a directed path into ``nodes`` (reflexive)."""
    d = adj.shape[0]
    mask = np.zeros(d, dtype=bool)
    stack = list(nodes)
    for u in stack:
        mask[u] = True
    while stack:
        u = stack.pop()
        for p in np.flatnonzero(adj[:, u]):
            if not mask[p]:
                mask[p] = True
                stack.append(int(p))
    return mask


def d_separated_adj(adj: np.ndarray, i: int, j: int, z) -> bool:
    """d-separation of ``i`` and ``j`` given set ``z`` on a raw adjacency matrix.

    Implemented by reachability on the moralized ancestral graph of
    ``{i, j} | z``.
    """
    zset = set(int(v) for v in z)
    if i == j:
        raise ConfigurationError("i and j must differ")
    if i in zset or j in zset:
        raise ConfigurationError("conditioning set must not contain i or j")
    keep = _ancestors_of(adj, [i, j, *zset])
    sub = adj & keep[:, None] & keep[None, :]
    moral = sub | sub.T
    # Marry parents that share a child.
    for c in np.flatnonzero(keep):
        parents = np.flatnonzero(sub[:, c])
        for a_idx in range(len(parents)):
            for b_idx in range(a_idx + 1, len(parents)):
                a, b = parents[a_idx], parents[b_idx]
                moral[a, b] = moral[b, a] = True
    alive = keep.copy()
    for v in zset:
        alive[v] = False
    # BFS from i over alive nodes.
    seen = {i}
    stack = [i]
    while stack:
        u = stack.pop()
        for v in np.flatnonzero(moral[u]):
            v = int(v)
            if alive[v] and v not in seen:
                if v == j:
                    return False
                seen.add(v)
                stack.append(v)
    return True


def d_separated(g: Dag, i: int, j: int, z) -> bool:
    return d_separated_adj(g.adj, i, j, z)


# ---------------------------------------------------------------------------
# CPDAG construction and equivalence-class enumeration
# ---------------------------------------------------------------------------


def _apply_meek_rules(directed: np.ndarray, undirected: np.ndarray) -> None:
    """Orient undirected edges in place until no rule fires.

    Rules considered for each undirected edge x - y (orienting x -> y):
      R1: some z -> x with z, y non-adjacent;
      R2: a directed chain x -> z -> y;
      R3: z, w with x - z, x - w, z -> y, w -> y, z, w non-adjacent;
      R4: z, w with x - z, z -> w, w -> y, z, y non-adjacent, x, w adjacent.
    Edges are scanned in ascending (x, y) order for determinism.
    """
    d = directed.shape[0]

    def adjacent(a, b):
        return directed[a, b] or directed[b, a] or undirected[a, b]

    changed = True
    while changed:
        changed = False
        for x in range(d):
            for y in range(d):
                if not undirected[x, y]:
                    continue
                orient = False
                # R1
                for zn in np.flatnonzero(directed[:, x]):
                    if not adjacent(zn, y):
                        orient = True
                        break
                # R2
                if not orient:
                    mid = np.flatnonzero(directed[x] & directed[:, y])
                    if mid.size:
                        orient = True
                # R3
                if not orient:
                    into_y = np.flatnonzero(directed[:, y] & undirected[x])
                    for a_idx in range(len(into_y)):
                        for b_idx in range(a_idx + 1, len(into_y)):
                            a, b = into_y[a_idx], into_y[b_idx]
                            if not adjacent(a, b):
                                orient = True
                                break
                        if orient:
                            break
                # R4
                if not orient:
                    for zn in np.flatnonzero(undirected[x]):
                        if zn == y:
                            continue
                        for w in np.flatnonzero(directed[zn] & directed[:, y]):
                            if adjacent(x, w) and not adjacent(zn, y):
                                orient = True
                                break
                        if orient:
                            break
                if orient:
                    directed[x, y] = True
                    undirected[x, y] = undirected[y, x] = False
                    changed = True


def dag_to_cpdag(g: Dag) -> Cpdag:
    """Equivalence-class representative: v-structures plus rule closure."""
    d = g.d
    skeleton = g.adj | g.adj.T
    directed = np.zeros((d, d), dtype=bool)
    undirected = skeleton.copy()
    for j in range(d):
        parents = np.flatnonzero(g.adj[:, j])
        for a_idx in range(len(parents)):
            for b_idx in range(a_idx + 1, len(parents)):
                a, b = parents[a_idx], parents[b_idx]
                if not skeleton[a, b]:
                    for p in (a, b):
                        directed[p, j] = True
                        undirected[p, j] = undirected[j, p] = False
    _apply_meek_rules(directed, undirected)
    return Cpdag(directed, undirected)


def enumerate_mec(c: Cpdag, cap: int = 10_000) -> list[Dag]:
    """All consistent DAG extensions of ``c``.

    Recursive orientation with rule-closure pruning; every leaf is verified
    by mapping back to the class representative. Raises ``MecSizeError``
    when more than ``cap`` members exist.
    """
    if cap < 1:
        raise ConfigurationError("cap must be at least 1")
    out: list[Dag] = []

    def leaf(directed):
        if not _is_acyclic(directed):
            return
        candidate = Dag(directed.copy())
        if dag_to_cpdag(candidate) == c:
            out.append(candidate)
            if len(out) > cap:
                raise MecSizeError(f"equivalence class exceeds cap of {cap} members")

    def recurse(directed, undirected):
        pairs = np.argwhere(np.triu(undirected))
        if pairs.size == 0:
            leaf(directed)
            return
        i, j = (int(v) for v in pairs[0])
        for a, b in ((i, j), (j, i)):
            dd = directed.copy()
            uu = undirected.copy()
            dd[a, b] = True
            uu[a, b] = uu[b, a] = False
            _apply_meek_rules(dd, uu)
            if _is_acyclic(dd):
                recurse(dd, uu)

    recurse(c.directed.copy(), c.undirected.copy())
    return out


# ---------------------------------------------------------------------------
# Edge-list text format: one "src dst" pair per line, 0-indexed, '#' comments
# ---------------------------------------------------------------------------


def read_edge_list(path, d: int | None = None) -> Dag:
    edges = []
    max_node = -1
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            parts = line.split()
            if len(parts) != 2:
                raise ParseError(f"expected 'src dst', got {raw.strip()!r}", line=lineno)
            try:
                i, j = int(parts[0]), int(parts[1])
            except ValueError:
                raise ParseError(f"non-integer node id in {raw.strip()!r}", line=lineno) from None
            if i < 0 or j < 0:
                raise ParseError("node ids must be non-negative", line=lineno)
            edges.append((i, j))
            max_node = max(max_node, i, j)
    if d is None:
        d = max_node + 1
    if d < max_node + 1:
        raise ParseError(f"edge list references node {max_node} but d={d}")
    if d < 1:
        raise ParseError("empty edge list and no node count given")
    return dag_from_edges(d, edges)


def write_edge_list(g: Dag, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"# {g.d} nodes, {g.n_edges} edges\n")
        for i, j in g.edges():
            fh.write(f"{i} {j}\n")
