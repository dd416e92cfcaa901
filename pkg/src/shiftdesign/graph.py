"""Directed graphs, edge bookkeeping and the edge-to-vec selection map.

Edges are stored as ``(receiver, sender)`` pairs: an edge ``(n, m)`` lets
node ``n`` read the value held by node ``m``, so a shift operator may only
have a nonzero at entry ``[n, m]`` when that pair is present.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components


class GraphError(ValueError):
    """Invalid graph input or an unsatisfiable generation request."""


@dataclass(frozen=True)
class Graph:
    n_vertices: int
    edges: tuple[tuple[int, int], ...]
    directed: bool = True
    self_loops: bool = field(init=False)

    def __post_init__(self):
        loops = {(i, i) for i in range(self.n_vertices)}
        object.__setattr__(self, "self_loops", loops.issubset(self.edges))

    @property
    def n_edges(self) -> int:
        return len(self.edges)

    @property
    def receivers(self) -> np.ndarray:
        return np.array([e[0] for e in self.edges], dtype=np.intp)

    @property
    def senders(self) -> np.ndarray:
        return np.array([e[1] for e in self.edges], dtype=np.intp)

    def mask(self) -> np.ndarray:
        """Boolean N x N pattern with ``True`` where a shift entry may be nonzero."""
        m = np.zeros((self.n_vertices, self.n_vertices), dtype=bool)
        if self.edges:
            m[self.receivers, self.senders] = True
        return m

    def adjacency(self) -> np.ndarray:
        """0/1 matrix with ``A[n, m] = 1`` iff ``(n, m)`` is an edge."""
        return self.mask().astype(float)

    def in_degrees(self) -> np.ndarray:
        deg = np.zeros(self.n_vertices, dtype=int)
        for n, _ in self.edges:
            deg[n] += 1
        return deg


def _check_pair(n, pair):
    if len(pair) != 2:
        raise GraphError(f"edge {pair!r} is not a pair")
    a, b = int(pair[0]), int(pair[1])
    if not (0 <= a < n and 0 <= b < n):
        raise GraphError(f"edge {(a, b)} out of range for {n} vertices")
    return a, b


def build_graph(n: int, edges, directed: bool = True) -> Graph:
    """Validate an edge list and return a :class:`Graph`.

    Parameters
    ----------
    n : int
        Number of vertices.
    edges : iterable of (int, int)
        ``(receiver, sender)`` pairs, 0-based.
    directed : bool
        If False, every pair is closed under reversal.  A reversed copy that
        is listed explicitly is merged; an exact repeat is still rejected.

    Raises
    ------
    GraphError
        On an out-of-range index or a duplicated pair.
    """
    if int(n) < 1:
        raise GraphError(f"number of vertices must be positive, got {n}")
    n = int(n)
    out = []
    seen = set()
    for pair in edges:
        a, b = _check_pair(n, pair)
        if (a, b) in seen:
            raise GraphError(f"duplicate edge {(a, b)}")
        seen.add((a, b))
        out.append((a, b))
    if not directed:
        # missing reverses go after the given pairs so symmetric lists keep their order
        for a, b in list(out):
            if (b, a) not in seen:
                seen.add((b, a))
                out.append((b, a))
    return Graph(n, tuple(out), directed=bool(directed))


def in_neighbors(g: Graph, n: int) -> set[int]:
    """Senders whose values node ``n`` may read in one round."""
    if not 0 <= n < g.n_vertices:
        raise GraphError(f"vertex {n} out of range for {g.n_vertices} vertices")
    return {m for r, m in g.edges if r == n}


def strongly_connected(g: Graph) -> bool:
    if g.n_vertices == 1:
        return True
    adj = csr_matrix(g.adjacency().T)
    n_comp, _ = connected_components(adj, directed=True, connection="strong")
    return n_comp == 1


@dataclass(frozen=True)
class SelectionMatrix:
    """Implicit N^2 x E matrix whose k-th column is the unit vector at ``columns[k]``.

    ``columns[k] = sender_k * N + receiver_k`` is the column-major position of
    entry ``[receiver_k, sender_k]``.
    """

    n: int
    columns: np.ndarray

    @property
    def n_rows(self) -> int:
        return self.n * self.n

    @property
    def n_cols(self) -> int:
        return len(self.columns)

    def scatter(self, coeffs) -> np.ndarray:
        """Return the N x N matrix ``vec^-1(A @ coeffs)``."""
        coeffs = np.asarray(coeffs, dtype=float)
        if coeffs.shape != (self.n_cols,):
            raise ValueError(f"expected {self.n_cols} coefficients, got shape {coeffs.shape}")
        flat = np.zeros(self.n_rows)
        flat[self.columns] = coeffs
        return flat.reshape(self.n, self.n, order="F")

    def gather(self, matrix) -> np.ndarray:
        """Read the edge entries out of an N x N matrix (``A.T @ vec(matrix)``)."""
        return np.asarray(matrix, dtype=float).reshape(-1, order="F")[self.columns]

    def dense(self) -> np.ndarray:
        a = np.zeros((self.n_rows, self.n_cols))
        a[self.columns, np.arange(self.n_cols)] = 1.0
        return a


def selection_matrix(g: Graph) -> SelectionMatrix:
    cols = g.senders * g.n_vertices + g.receivers
    cols.setflags(write=False)
    return SelectionMatrix(g.n_vertices, cols)


def er_random_graph(
    n: int,
    p: float,
    directed: bool = False,
    add_self_loops: bool = True,
    seed: int | None = None,
    require_connected: bool = False,
    max_tries: int = 100,
) -> Graph:
    """Erdos-Renyi graph with edges sorted by ``(receiver, sender)``.

    For ``directed=False`` each unordered pair is drawn once and then
    symmetrized.  With ``require_connected`` the draw is repeated (from the
    same generator) until the graph is strongly connected, at most
    ``max_tries`` times.
    """
    if not 0.0 <= p <= 1.0:
        raise GraphError(f"edge probability must be in [0, 1], got {p}")
    rng = np.random.default_rng(seed)
    for _ in range(max_tries):
        draw = rng.random((n, n)) < p
        np.fill_diagonal(draw, False)
        if not directed:
            draw = np.triu(draw)
            draw = draw | draw.T
        if add_self_loops:
            np.fill_diagonal(draw, True)
        rec, snd = np.nonzero(draw)
        g = Graph(n, tuple(zip(rec.tolist(), snd.tolist())), directed=directed)
        if not require_connected or strongly_connected(g):
            return g
    raise GraphError(f"no strongly connected ER({n}, {p}) graph in {max_tries} tries")


def read_edge_list(path) -> Graph:
    """Parse the edge-list text format (``N dir|undir`` header, then pairs)."""
    lines = [
        ln.strip()
        for ln in Path(path).read_text().splitlines()
        if ln.strip() and not ln.lstrip().startswith("#")
    ]
    if not lines:
        raise GraphError(f"{path}: empty edge list")
    head = lines[0].split()
    if len(head) != 2 or head[1] not in ("dir", "undir"):
        raise GraphError(f"{path}: header must be 'N dir' or 'N undir', got {lines[0]!r}")
    try:
        n = int(head[0])
        pairs = []
        for ln in lines[1:]:
            parts = ln.split()
            if len(parts) != 2:
                raise GraphError(f"{path}: bad edge line {ln!r}")
            pairs.append((int(parts[0]), int(parts[1])))
    except ValueError as exc:
        raise GraphError(f"{path}: {exc}") from None
    return build_graph(n, pairs, directed=head[1] == "dir")


def write_edge_list(g: Graph, path) -> None:
    lines = [f"{g.n_vertices} {'dir' if g.directed else 'undir'}"]
    lines += [f"{a} {b}" for a, b in g.edges]
    Path(path).write_text("\n".join(lines) + "\n")
