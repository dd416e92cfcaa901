"""Synchronous round-based execution of a shift sequence.

Each node holds one scalar.  In round ``l`` every node replaces its value
by a weighted sum of the previous-round values of its in-neighbours, using
the coefficients of ``S_l`` on its incoming edges.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import kernels
from .design import ShiftSequence
from .graph import Graph


@dataclass
class NetworkState:
    values: np.ndarray
    round: int = 0


@dataclass
class RoundTrace:
    states: list[np.ndarray] = field(default_factory=list)
    messages_sent: list[int] = field(default_factory=list)

    @property
    def final(self) -> np.ndarray:
        return self.states[-1]


def _csr_layout(g: Graph):
    # per-receiver edge lists in edge-list order, fixing each node's summation order
    order = sorted(range(g.n_edges), key=lambda k: (g.edges[k][0], k))
    indptr = np.zeros(g.n_vertices + 1, dtype=np.intp)
    for n, _ in g.edges:
        indptr[n + 1] += 1
    indptr = np.cumsum(indptr).astype(np.intp)
    order = np.array(order, dtype=np.intp)
    indices = np.ascontiguousarray(g.senders[order]) if g.n_edges else np.zeros(0, dtype=np.intp)
    return indptr, indices, order


def _node_update(n, indptr, indices, data, view):
    acc = 0.0
    for e in range(indptr[n], indptr[n + 1]):
        acc += data[e] * view[indices[e]]
    return acc


def run_rounds(g: Graph, seq: ShiftSequence, z, backend=None, node_view=None) -> RoundTrace:
    """Execute ``seq`` on input signal ``z`` one synchronous round at a time.

    Parameters
    ----------
    g : Graph
        Communication graph; must be the graph ``seq`` was designed on.
    seq : ShiftSequence
    z : array_like, shape (N,)
    backend : str, optional
        Kernel backend name, see :mod:`shiftdesign.kernels`.
    node_view : callable, optional
        ``node_view(prev, n)`` returns the object node ``n`` reads the
        previous round from.  Used to audit which entries each node touches;
        forces the per-node Python path.
    """
    z = np.asarray(z, dtype=float)
    if z.shape != (g.n_vertices,):
        raise ValueError(f"signal has shape {z.shape}, graph has {g.n_vertices} vertices")
    if seq.graph.edges != g.edges or seq.n != g.n_vertices:
        raise ValueError("shift sequence was built on a different edge pattern")
    indptr, indices, order = _csr_layout(g)
    n_msgs = sum(1 for a, b in g.edges if a != b)

    trace = RoundTrace(states=[z.copy()], messages_sent=[])
    state = NetworkState(z.copy(), 0)
    for coeffs in seq.coeffs:
        data = np.ascontiguousarray(coeffs[order])
        out = np.empty(g.n_vertices)
        if node_view is None:
            kernels.propagate_round(indptr, indices, data, state.values, out, backend=backend)
        else:
            for n in range(g.n_vertices):
                out[n] = _node_update(n, indptr, indices, data, node_view(state.values, n))
        state = NetworkState(out, state.round + 1)
        trace.states.append(out)
        trace.messages_sent.append(n_msgs)
    return trace


def compare_centralized(trace: RoundTrace, seq: ShiftSequence | None, z) -> np.ndarray:
    """Max-abs gap between each simulated round and ``S_l ... S_1 z``."""
    ref = np.asarray(z, dtype=float)
    dev = [float(np.max(np.abs(trace.states[0] - ref), initial=0.0))]
    mats = seq.matrices() if seq is not None else []
    for state, s in zip(trace.states[1:], mats):
        ref = s @ ref
        dev.append(float(np.max(np.abs(state - ref), initial=0.0)))
    return np.array(dev)


def storage_per_node(g: Graph, L: int) -> np.ndarray:
    """Scalars node n keeps: one coefficient per incoming edge per operator."""
    return L * g.in_degrees()


def read_signal(path) -> np.ndarray:
    vals = [ln.strip() for ln in Path(path).read_text().splitlines() if ln.strip()]
    return np.array([float(v) for v in vals])


def write_signal(z, path) -> None:
    Path(path).write_text("".join(f"{v:.17g}\n" for v in np.asarray(z, dtype=float)))
