"""Random connected topologies, Metropolis combination weights, consensus metrics."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class Topology:
    """Undirected graph on nodes 0..n_nodes-1 with edges stored as sorted pairs."""

    n_nodes: int
    edges: tuple[tuple[int, int], ...]
    seed: int

    def __post_init__(self):
        if self.n_nodes < 1:
            raise ValueError(f"need at least one node, got {self.n_nodes}")
        for u, v in self.edges:
            if not (0 <= u < v < self.n_nodes):
                raise ValueError(f"bad edge ({u}, {v}) for {self.n_nodes} nodes")
        if len(set(self.edges)) != len(self.edges):
            raise ValueError("duplicate edges")

    def adjacency(self) -> np.ndarray:
        adj = np.zeros((self.n_nodes, self.n_nodes))
        for u, v in self.edges:
            adj[u, v] = adj[v, u] = 1.0
        return adj

    def degrees(self) -> np.ndarray:
        deg = np.zeros(self.n_nodes, dtype=int)
        for u, v in self.edges:
            deg[u] += 1
            deg[v] += 1
        return deg


def _is_connected(n_nodes: int, edges) -> bool:
    if n_nodes == 1:
        return True
    neighbors: list[list[int]] = [[] for _ in range(n_nodes)]
    for u, v in edges:
        neighbors[u].append(v)
        neighbors[v].append(u)
    seen = np.zeros(n_nodes, dtype=bool)
    stack = [0]
    seen[0] = True
    while stack:
        u = stack.pop()
        for v in neighbors[u]:
            if not seen[v]:
                seen[v] = True
                stack.append(v)
    return bool(seen.all())


def random_connected_graph(
    n_nodes: int, p_attach: float, seed: int, max_resamples: int = 10_000
) -> Topology:
    """Sample edges i.i.d. with probability ``p_attach``; resample until connected.

    Raises RuntimeError when ``max_resamples`` consecutive draws stay
    disconnected, which signals a (K, p) combination too sparse to use.
    """
    if n_nodes < 1:
        raise ValueError(f"need at least one node, got {n_nodes}")
    if not (0.0 < p_attach <= 1.0):
        raise ValueError(f"edge probability must be in (0, 1], got {p_attach}")
    rng = np.random.default_rng(seed)
    pairs = [(u, v) for u in range(n_nodes) for v in range(u + 1, n_nodes)]
    for _ in range(max_resamples):
        keep = rng.random(len(pairs)) < p_attach
        edges = tuple(p for p, k in zip(pairs, keep) if k)
        if _is_connected(n_nodes, edges):
            return Topology(n_nodes=n_nodes, edges=edges, seed=int(seed))
    raise RuntimeError(
        f"no connected graph in {max_resamples} draws (K={n_nodes}, p={p_attach})"
    )


def metropolis_weights(topology: Topology) -> np.ndarray:
    """Metropolis combination matrix of a topology.

    Off-diagonal weight of an edge is one over the larger of the two incident
    neighborhood sizes, a node's neighborhood counting itself; diagonals take
    the leftover mass.  The result is symmetric, nonnegative and doubly
    stochastic, hence has spectral norm one.
    """
    K = topology.n_nodes
    sizes = topology.degrees() + 1
    A = np.zeros((K, K))
    for u, v in topology.edges:
        A[u, v] = A[v, u] = 1.0 / max(sizes[u], sizes[v])
    A[np.diag_indices(K)] = 1.0 - A.sum(axis=1)
    return A


@dataclass(frozen=True)
class StochasticityReport:
    passed: bool
    max_row_dev: float
    max_col_dev: float
    min_entry: float
    max_asymmetry: float


def validate_doubly_stochastic(A: np.ndarray, tol: float = 1e-12) -> StochasticityReport:
    """Check symmetry, nonnegativity and unit row/column sums within ``tol``."""
    A = np.asarray(A, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {A.shape}")
    row_dev = float(np.max(np.abs(A.sum(axis=1) - 1.0)))
    col_dev = float(np.max(np.abs(A.sum(axis=0) - 1.0)))
    min_entry = float(A.min())
    asym = float(np.max(np.abs(A - A.T)))
    passed = row_dev <= tol and col_dev <= tol and min_entry >= -tol and asym <= tol
    return StochasticityReport(passed, row_dev, col_dev, min_entry, asym)


def algebraic_connectivity(topology: Topology) -> float:
    """Second-smallest eigenvalue of the combinatorial Laplacian."""
    if topology.n_nodes < 2:
        raise ValueError("algebraic connectivity needs at least two nodes")
    adj = topology.adjacency()
    lap = np.diag(adj.sum(axis=1)) - adj
    return float(np.linalg.eigvalsh(lap)[1])


def disagreement(thetas: np.ndarray) -> float:
    """Distance of stacked per-node parameters from their consensus average.

    ``thetas`` has one row per node; the value is the Frobenius norm of the
    deviations from the row mean, i.e. the norm of the stacked vector's
    projection away from the consensus subspace.
    """
    thetas = np.asarray(thetas, dtype=float)
    if thetas.ndim != 2:
        raise ValueError(f"expected (K, D) parameter rows, got shape {thetas.shape}")
    centered = thetas - thetas.mean(axis=0)
    return float(np.linalg.norm(centered))


def topology_header(topology: Topology) -> str:
    """Edge-list text form: node count line, then one 0-indexed pair per line."""
    lines = [f"K {topology.n_nodes}"]
    lines += [f"{u} {v}" for u, v in topology.edges]
    return "\n".join(lines) + "\n"


def topology_from_header(text: str, seed: int = 0) -> Topology:
    lines = [ln.strip() for ln in text.strip().splitlines() if ln.strip()]
    if not lines or not lines[0].startswith("K "):
        raise ValueError("topology text must start with a 'K <count>' line")
    n_nodes = int(lines[0].split()[1])
    edges = []
    for ln in lines[1:]:
        u, v = (int(tok) for tok in ln.split())
        edges.append((min(u, v), max(u, v)))
    return Topology(n_nodes=n_nodes, edges=tuple(edges), seed=seed)
