"""Communication graphs and consensus weight matrices.

Builds Erdős–Rényi peer-to-peer graphs, the two standard doubly-stochastic
mixing matrices on them (Metropolis weights and the Laplacian-based
construction M = I - 2V/(3*rho_max)), and the mixing rate
lambda = max{|lambda_2|, |lambda_m|} that the step-size theory depends on.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from decbilevel.numerics import RngStream, as_sym_matrix, sym_eigvals


class TopologyError(RuntimeError):
    """Graph generation failed (e.g. retries exhausted without connectivity)."""


@dataclass(frozen=True)
class Graph:
    """Undirected simple graph on agents 0..m-1."""

    m: int
    edges: frozenset  # frozenset of (i, j) tuples with i < j
    connected: bool = field(default=False)

    def __post_init__(self):
        if self.m < 1:
            raise ValueError(f"need at least one agent, got m={self.m}")
        for (i, j) in self.edges:
            if not (0 <= i < j < self.m):
                raise ValueError(f"bad edge ({i}, {j}) for m={self.m}")
        object.__setattr__(self, "connected", _is_connected(self.m, self.edges))

    def degree(self, i: int) -> int:
        return sum(1 for (a, b) in self.edges if a == i or b == i)

    def degrees(self) -> np.ndarray:
        d = np.zeros(self.m, dtype=np.int64)
        for (a, b) in self.edges:
            d[a] += 1
            d[b] += 1
        return d

    def adjacency(self) -> np.ndarray:
        a = np.zeros((self.m, self.m))
        for (i, j) in self.edges:
            a[i, j] = 1.0
            a[j, i] = 1.0
        return a


def _is_connected(m: int, edges) -> bool:
    # Breadth-first traversal from agent 0.
    if m == 1:
        return True
    adj = [[] for _ in range(m)]
    for (i, j) in edges:
        adj[i].append(j)
        adj[j].append(i)
    seen = [False] * m
    seen[0] = True
    queue = [0]
    while queue:
        u = queue.pop()
        for v in adj[u]:
            if not seen[v]:
                seen[v] = True
                queue.append(v)
    return all(seen)


def graph_from_edges(m: int, edge_pairs) -> Graph:
    """Build a Graph from unordered (i, j) pairs, normalizing orientation."""
    edges = set()
    for (i, j) in edge_pairs:
        if i == j:
            raise ValueError(f"self-loop ({i}, {i}) not allowed")
        a, b = (i, j) if i < j else (j, i)
        if (a, b) in edges:
            raise ValueError(f"duplicate edge ({a}, {b})")
        edges.add((a, b))
    return Graph(m=m, edges=frozenset(edges))


def erdos_renyi(m: int, p_c: float, s: RngStream, max_retries: int = 100) -> Graph:
    """Connected Erdős–Rényi graph: each pair is an edge w.p. p_c.

    Resamples up to max_retries times until a connected graph appears;
    raises TopologyError if none does.
    """
    if m < 1:
        raise ValueError(f"need at least one agent, got m={m}")
    if not (0.0 <= p_c <= 1.0):
        raise ValueError(f"edge probability must be in [0, 1], got {p_c}")
    gen = s.generator
    for _ in range(max_retries):
        edges = set()
        for i in range(m):
            for j in range(i + 1, m):
                if gen.random() < p_c:
                    edges.add((i, j))
        g = Graph(m=m, edges=frozenset(edges))
        if g.connected:
            return g
    raise TopologyError(
        f"no connected graph in {max_retries} tries (m={m}, p_c={p_c})"
    )


@dataclass(frozen=True)
class ConsensusMatrix:
    """Doubly-stochastic symmetric mixing matrix with its rate lambda."""

    weights: np.ndarray
    lam: float

    def __post_init__(self):
        w = as_sym_matrix(self.weights)
        object.__setattr__(self, "weights", w)
        m = w.shape[0]
        rs = w.sum(axis=1)
        if np.max(np.abs(rs - 1.0)) > 1e-12:
            raise ValueError("rows must sum to 1 within 1e-12")
        if not (0.0 <= self.lam <= 1.0):
            raise ValueError(f"lambda must be in [0, 1], got {self.lam}")

    @property
    def m(self) -> int:
        return self.weights.shape[0]


def _second_eigenvalue_magnitude(w: np.ndarray) -> float:
    m = w.shape[0]
    if m == 1:
        # Single agent: no mixing needed; by convention lambda = 0 so the
        # (1 - lambda) factors in step-size formulas stay finite.
        return 0.0
    vals = sym_eigvals(w)
    return max(abs(vals[1]), abs(vals[-1]))


def _require_connected(g: Graph, what: str) -> None:
    if not g.connected:
        raise ValueError(f"{what} requires a connected graph (lambda would be 1)")


def metropolis_matrix(g: Graph) -> ConsensusMatrix:
    """Metropolis weights: [M]_ij = 1/(1 + max(d_i, d_j)) on edges."""
    _require_connected(g, "metropolis_matrix")
    m = g.m
    d = g.degrees()
    w = np.zeros((m, m))
    for (i, j) in g.edges:
        w[i, j] = w[j, i] = 1.0 / (1.0 + max(d[i], d[j]))
    for i in range(m):
        w[i, i] = 1.0 - np.sum(w[i]) + w[i, i]
    return ConsensusMatrix(weights=w, lam=_second_eigenvalue_magnitude(w))


def laplacian_matrix(g: Graph) -> ConsensusMatrix:
    """Laplacian-based weights: M = I - 2V/(3*rho_max(V)), V the Laplacian."""
    _require_connected(g, "laplacian_matrix")
    m = g.m
    if m == 1:
        return ConsensusMatrix(weights=np.ones((1, 1)), lam=0.0)
    v = np.diag(g.degrees().astype(np.float64)) - g.adjacency()
    rho_max = float(sym_eigvals(v)[0])
    w = np.eye(m) - (2.0 / (3.0 * rho_max)) * v
    # Enforce exact stored symmetry despite rounding in the scale factor.
    w = (w + w.T) / 2.0
    return ConsensusMatrix(weights=w, lam=_second_eigenvalue_magnitude(w))


def spectral_gap(cm: ConsensusMatrix) -> float:
    """Recompute lambda = max{|lambda_2|, |lambda_m|} from the weights."""
    return _second_eigenvalue_magnitude(cm.weights)


def save_edge_list(g: Graph, path) -> None:
    """Write the plain-text edge list: first line m, then one 'i j' per line."""
    lines = [str(g.m)]
    for (i, j) in sorted(g.edges):
        lines.append(f"{i} {j}")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")


def load_edge_list(path) -> Graph:
    """Read the plain-text edge-list format written by save_edge_list."""
    with open(path, "r", encoding="utf-8") as fh:
        tokens = [ln.strip() for ln in fh if ln.strip()]
    if not tokens:
        raise ValueError(f"empty edge-list file: {path}")
    m = int(tokens[0])
    pairs = []
    for ln in tokens[1:]:
        parts = ln.split()
        if len(parts) != 2:
            raise ValueError(f"bad edge line {ln!r} in {path}")
        pairs.append((int(parts[0]), int(parts[1])))
    return graph_from_edges(m, pairs)
