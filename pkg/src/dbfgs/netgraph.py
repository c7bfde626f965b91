"""Communication topologies and consensus weight matrices.

Graphs are undirected with 0-based contiguous node ids. Every node's
neighborhood includes the node itself and is kept sorted ascending, so
all neighborhood-ordered vectors and matrices across the package agree
on block order.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "Graph",
    "WeightMatrixReport",
    "build_d_regular_cycle",
    "build_weight_matrix",
    "validate_weight_matrix",
    "dump_graph",
    "load_graph",
    "dump_weight_matrix",
    "load_weight_matrix",
]


@dataclass(frozen=True)
class Graph:
    """Undirected topology with closed neighborhoods.

    Attributes
    ----------
    n : int
        Number of nodes.
    edges : frozenset
        Unordered pairs stored as (min, max) tuples.
    neighborhoods : tuple of tuple of int
        For each node i, the sorted closed neighborhood (i included).
    m : tuple of int
        Neighborhood sizes, m[i] == degree(i) + 1.
    """

    n: int
    edges: frozenset
    neighborhoods: tuple
    m: tuple

    @classmethod
    def from_edges(cls, n: int, edges) -> "Graph":
        """Build a graph from an edge list, validating and normalizing.

        Rejects self-loops, out-of-range ids, and disconnected graphs
        (the consensus runtimes require connectivity).
        """
        if n < 1:
            raise ValueError(f"node count must be positive, got {n}")
        norm = set()
        for i, j in edges:
            if i == j:
                raise ValueError(f"self-loop on node {i}")
            if not (0 <= i < n and 0 <= j < n):
                raise ValueError(f"edge ({i},{j}) out of range for n={n}")
            norm.add((min(i, j), max(i, j)))
        nbhd = [{i} for i in range(n)]
        for i, j in norm:
            nbhd[i].add(j)
            nbhd[j].add(i)
        neighborhoods = tuple(tuple(sorted(s)) for s in nbhd)
        g = cls(
            n=n,
            edges=frozenset(norm),
            neighborhoods=neighborhoods,
            m=tuple(len(s) for s in neighborhoods),
        )
        if n > 1 and not g.is_connected():
            raise ValueError("graph is not connected")
        return g

    def degree(self, i: int) -> int:
        return self.m[i] - 1

    def is_regular(self):
        """Common degree if the graph is regular, else None."""
        degs = {mi - 1 for mi in self.m}
        return degs.pop() if len(degs) == 1 else None

    def is_connected(self) -> bool:
        seen = {0}
        stack = [0]
        while stack:
            i = stack.pop()
            for j in self.neighborhoods[i]:
                if j not in seen:
                    seen.add(j)
                    stack.append(j)
        return len(seen) == self.n

    def neighborhood_index(self, i: int, j: int) -> int:
        """Position of node j inside n_i (both must satisfy j in n_i)."""
        return self.neighborhoods[i].index(j)


def build_d_regular_cycle(n: int, d: int) -> Graph:
    """d-regular cycle: node i adjacent to i±1, ..., i±d/2 (mod n).

    Parameters
    ----------
    n : int
        Node count.
    d : int
        Even connectivity, d < n. Every node ends up with m_i = d + 1.
    """
    if d <= 0 or d % 2 != 0:
        raise ValueError(f"connectivity d must be a positive even integer, got {d}")
    if d >= n:
        raise ValueError(f"connectivity d={d} must be smaller than n={n}")
    edges = set()
    for i in range(n):
        for k in range(1, d // 2 + 1):
            edges.add((min(i, (i + k) % n), max(i, (i + k) % n)))
    return Graph.from_edges(n, edges)


def build_weight_matrix(graph: Graph, d: int) -> np.ndarray:
    """Row-stochastic weights for a d-regular graph.

    Diagonal entries 1/2 + 1/(2(d+1)), off-diagonal 1/(2(d+1)) on edges.
    Rows sum to 1 exactly by construction.
    """
    reg = graph.is_regular()
    if reg is None:
        raise ValueError("weight scheme requires a regular graph")
    if reg != d:
        raise ValueError(f"graph is {reg}-regular, not {d}-regular")
    off = 1.0 / (2.0 * (d + 1))
    w = np.zeros((graph.n, graph.n))
    for i, j in graph.edges:
        w[i, j] = off
        w[j, i] = off
    np.fill_diagonal(w, 0.5 + off)
    return w


@dataclass(frozen=True)
class WeightMatrixReport:
    """Pass/fail report from validate_weight_matrix."""

    symmetric: bool
    row_stochastic: bool
    connectivity: bool
    max_asymmetry: float
    max_row_sum_error: float
    second_smallest_eigenvalue: float

    @property
    def ok(self) -> bool:
        return self.symmetric and self.row_stochastic and self.connectivity


def validate_weight_matrix(w: np.ndarray) -> WeightMatrixReport:
    """Check the consensus weight conditions.

    Symmetry W = W^T, row sums 1 (tolerance 1e-12), and the null-space
    condition null(I - W) = span(1), checked via the second-smallest
    eigenvalue of I - W being strictly positive (> 1e-10).
    """
    w = np.asarray(w, dtype=float)
    asym = float(np.max(np.abs(w - w.T))) if w.size else 0.0
    row_err = float(np.max(np.abs(w.sum(axis=1) - 1.0)))
    evals = np.sort(np.linalg.eigvalsh(np.eye(w.shape[0]) - 0.5 * (w + w.T)))
    lam2 = float(evals[1]) if len(evals) > 1 else np.inf
    return WeightMatrixReport(
        symmetric=asym <= 1e-12,
        row_stochastic=row_err < 1e-12,
        connectivity=lam2 > 1e-10,
        max_asymmetry=asym,
        max_row_sum_error=row_err,
        second_smallest_eigenvalue=lam2,
    )


# -- plain-text debug serialization (not a stability contract) --------------


def dump_graph(graph: Graph) -> str:
    lines = [f"nodes {graph.n}"]
    for i, j in sorted(graph.edges):
        lines.append(f"{i} {j}")
    return "\n".join(lines) + "\n"


def load_graph(text: str) -> Graph:
    lines = [ln for ln in text.splitlines() if ln.strip()]
    head = lines[0].split()
    if head[0] != "nodes":
        raise ValueError("expected 'nodes <n>' header")
    n = int(head[1])
    edges = [tuple(int(v) for v in ln.split()) for ln in lines[1:]]
    return Graph.from_edges(n, edges)


def dump_weight_matrix(w: np.ndarray) -> str:
    lines = [f"shape {w.shape[0]}"]
    for i, j in zip(*np.nonzero(w)):
        lines.append(f"{i} {j} {float(w[i, j])!r}")
    return "\n".join(lines) + "\n"


def load_weight_matrix(text: str) -> np.ndarray:
    lines = [ln for ln in text.splitlines() if ln.strip()]
    n = int(lines[0].split()[1])
    w = np.zeros((n, n))
    for ln in lines[1:]:
        i, j, v = ln.split()
        w[int(i), int(j)] = float(v)
    return w
