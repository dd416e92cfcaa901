"""Design of successive shift operators by block coordinate descent.

A design approximates a target ``H`` by ``S_L ... S_2 S_1`` where every
``S_i`` follows the sparsity pattern of a :class:`~shiftdesign.graph.Graph`.
The weighted objective

    J = sum_l alpha_l * ||H - S_l ... S_1||_F^2

is minimized one factor at a time; with all other factors fixed, ``J`` is a
linear least-squares problem in the edge coefficients of the free factor.
"""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from . import kernels
from .graph import Graph, SelectionMatrix, selection_matrix

MONOTONE_SLACK = 1e-10

log = logging.getLogger(__name__)


def make_weights(scheme: str, L: int, ratio: float = 2.0) -> np.ndarray:
    """Nonnegative stage weights summing to one.

    ``scheme`` is one of ``uniform``, ``linear`` (proportional to l),
    ``geometric`` (proportional to ratio**(l-1)) or ``final_only``.
    """
    if L < 1:
        raise ValueError(f"L must be >= 1, got {L}")
    idx = np.arange(1, L + 1, dtype=float)
    if scheme == "uniform":
        w = np.ones(L)
    elif scheme == "linear":
        w = idx
    elif scheme == "geometric":
        if not ratio > 0:
            raise ValueError(f"geometric ratio must be positive, got {ratio}")
        w = float(ratio) ** (idx - 1)
    elif scheme == "final_only":
        w = np.zeros(L)
        w[-1] = 1.0
    else:
        raise ValueError(f"unknown weight scheme {scheme!r}")
    return w / w.sum()


def free_groups(g: Graph, symmetric: bool) -> tuple[np.ndarray, int]:
    """Map each edge to its free variable.

    Without symmetry every edge is its own variable.  With symmetry the two
    orientations of an unordered pair share one variable, numbered in order
    of first appearance in the edge list.
    """
    if not symmetric:
        return np.arange(g.n_edges, dtype=np.intp), g.n_edges
    ids: dict[tuple[int, int], int] = {}
    group = np.empty(g.n_edges, dtype=np.intp)
    for k, (a, b) in enumerate(g.edges):
        group[k] = ids.setdefault((min(a, b), max(a, b)), len(ids))
    return group, len(ids)


@dataclass
class ShiftSequence:
    """Ordered shift operators stored as edge-coefficient vectors."""

    graph: Graph
    coeffs: list[np.ndarray]
    selection: SelectionMatrix = field(init=False, repr=False)

    def __post_init__(self):
        if len(self.coeffs) < 1:
            raise ValueError("a shift sequence needs at least one operator")
        self.selection = selection_matrix(self.graph)
        self.coeffs = [np.asarray(c, dtype=float).copy() for c in self.coeffs]
        for c in self.coeffs:
            if c.shape != (self.graph.n_edges,):
                raise ValueError(f"coefficient vector of shape {c.shape}, expected ({self.graph.n_edges},)")

    @property
    def n(self) -> int:
        return self.graph.n_vertices

    def __len__(self):
        return len(self.coeffs)

    def matrices(self) -> list[np.ndarray]:
        return [self.selection.scatter(c) for c in self.coeffs]

    @classmethod
    def from_matrices(cls, graph: Graph, mats) -> "ShiftSequence":
        """Build from dense operators; nonzeros off the edge pattern are rejected."""
        mask = graph.mask()
        sel = selection_matrix(graph)
        coeffs = []
        for i, m in enumerate(mats):
            m = np.asarray(m, dtype=float)
            if m.shape != mask.shape:
                raise ValueError(f"operator {i + 1} has shape {m.shape}, expected {mask.shape}")
            if np.any(m[~mask] != 0):
                raise ValueError(f"operator {i + 1} has nonzeros outside the graph pattern")
            coeffs.append(sel.gather(m))
        return cls(graph, coeffs)

    @classmethod
    def masked_identity(cls, graph: Graph, L: int) -> "ShiftSequence":
        sel = selection_matrix(graph)
        c = sel.gather(np.eye(graph.n_vertices))
        return cls(graph, [c] * L)


@dataclass
class DesignProblem:
    target: np.ndarray
    graph: Graph
    L: int
    alpha: np.ndarray | None = None
    symmetric: bool = False

    def __post_init__(self):
        self.target = np.asarray(self.target, dtype=float)
        n = self.graph.n_vertices
        if self.target.shape != (n, n):
            raise ValueError(f"target has shape {self.target.shape}, graph has {n} vertices")
        if self.L < 1:
            raise ValueError(f"L must be >= 1, got {self.L}")
        if self.alpha is None:
            self.alpha = make_weights("linear", self.L)
        self.alpha = np.asarray(self.alpha, dtype=float)
        if self.alpha.shape != (self.L,):
            raise ValueError(f"need {self.L} weights, got {self.alpha.shape}")
        if np.any(self.alpha < 0) or abs(self.alpha.sum() - 1.0) > 1e-12:
            raise ValueError("weights must be nonnegative and sum to 1")
        if self.symmetric and self.graph.directed:
            raise ValueError("symmetric operators require an undirected graph")


@dataclass
class SolverConfig:
    i_max: int = 50
    rel_tol: float = 1e-9
    ridge: float = 0.0
    delta: float = 1e-3

    def __post_init__(self):
        if self.i_max < 1:
            raise ValueError(f"i_max must be >= 1, got {self.i_max}")
        if self.rel_tol < 0:
            raise ValueError(f"rel_tol must be >= 0, got {self.rel_tol}")
        if self.ridge < 0:
            raise ValueError(f"ridge must be >= 0, got {self.ridge}")
        if not self.delta > 0:
            raise ValueError(f"delta must be > 0, got {self.delta}")


@dataclass
class SolveReport:
    objective_trace: list[tuple[int, int, float]]
    stage_errors: np.ndarray
    effective_rounds: int | None
    wall_time: float
    sweeps: int
    converged: bool
    monotone: bool
    max_abs_coefficient: float = 0.0

    @property
    def final_objective(self) -> float:
        return self.objective_trace[-1][2]


def _prefix_products(mats):
    out = []
    acc = None
    for s in mats:
        acc = s.copy() if acc is None else s @ acc
        out.append(acc)
    return out


def _objective(H, mats, alpha):
    return float(sum(a * np.sum((H - p) ** 2) for a, p in zip(alpha, _prefix_products(mats))))


def _check_dims(H, seq):
    H = np.asarray(H, dtype=float)
    if H.shape != (seq.n, seq.n):
        raise ValueError(f"target has shape {H.shape}, operators are {seq.n}x{seq.n}")
    return H


def objective(p: DesignProblem, seq: ShiftSequence) -> float:
    """Weighted sum of squared stage errors."""
    if len(seq) != p.L:
        raise ValueError(f"sequence has {len(seq)} operators, problem expects {p.L}")
    H = _check_dims(p.target, seq)
    return _objective(H, seq.matrices(), p.alpha)


def stage_errors(H, seq: ShiftSequence) -> np.ndarray:
    """Frobenius error ``||H - S_l ... S_1||`` after each round l."""
    H = _check_dims(H, seq)
    return np.array([np.linalg.norm(H - p) for p in _prefix_products(seq.matrices())])


def _block_system(H, mats, sqrt_alpha, j, prefix, receivers, senders, group, n_free, backend=None):
    # j is 0-based here; rows stack stages l = j..L-1
    n = H.shape[0]
    n_stages = len(mats) - j
    suffixes = np.empty((n_stages, n, n))
    suffixes[0] = np.eye(n)
    for i in range(1, n_stages):
        suffixes[i] = mats[j + i] @ suffixes[i - 1]
    w = np.ascontiguousarray(sqrt_alpha[j:])
    cols = np.empty((n_stages * n * n, len(receivers)))
    kernels.fill_block_columns(suffixes, np.ascontiguousarray(prefix), w, receivers, senders, cols, backend=backend)
    if n_free != len(receivers):
        tied = np.zeros((len(receivers), n_free))
        tied[np.arange(len(receivers)), group] = 1.0
        cols = cols @ tied
    rhs = np.concatenate([wl * H.reshape(-1, order="F") for wl in w])
    return cols, rhs


def assemble_block_ls(p: DesignProblem, seq: ShiftSequence, j: int, backend: str | None = None):
    """Stacked least-squares system for block ``j`` (1-based).

    Returns ``(M, y)`` such that ``J`` restricted to the free coefficients
    ``s`` of ``S_j`` equals ``||y - M s||^2`` plus a constant from the stages
    before ``j``.  Row block ``l`` holds ``sqrt(alpha_l) (C^T kron B_l) A``
    with ``C = S_{j-1} ... S_1`` and ``B_l = S_l ... S_{j+1}``; no Kronecker
    product is formed.  Under symmetry, tied edge columns are summed.
    """
    if not 1 <= j <= p.L:
        raise ValueError(f"block index {j} outside 1..{p.L}")
    if len(seq) != p.L:
        raise ValueError(f"sequence has {len(seq)} operators, problem expects {p.L}")
    H = _check_dims(p.target, seq)
    mats = seq.matrices()
    prefix = np.eye(seq.n)
    for s in mats[: j - 1]:
        prefix = s @ prefix
    group, n_free = free_groups(p.graph, p.symmetric)
    g = p.graph
    return _block_system(H, mats, np.sqrt(p.alpha), j - 1, prefix, g.receivers, g.senders, group, n_free, backend)


def solve_block(M, y, ridge: float = 0.0, x0=None) -> np.ndarray:
    """Minimize ``||y - M s||^2 + ridge ||s||^2``.

    With ``ridge == 0`` a rank-deficient ``M`` yields the minimum-norm
    solution (SVD-based LAPACK driver).  Given a current iterate ``x0`` the
    problem is solved for the correction ``s - x0`` instead, which returns
    the minimizer closest to ``x0``; singular directions dropped by the rank
    cutoff then keep their ``x0`` values rather than being zeroed, so the
    residual can never exceed that of ``x0``.
    """
    M = np.asarray(M, dtype=float)
    y = np.asarray(y, dtype=float)
    if M.ndim != 2 or y.ndim != 1 or M.shape[0] != y.shape[0]:
        raise ValueError(f"incompatible shapes {M.shape} and {y.shape}")
    if ridge < 0:
        raise ValueError(f"ridge must be >= 0, got {ridge}")
    if not (np.all(np.isfinite(M)) and np.all(np.isfinite(y))):
        raise ValueError("non-finite entries in block system")
    n_free = M.shape[1]
    if n_free == 0:
        return np.zeros(0)
    x0 = np.zeros(n_free) if x0 is None else np.asarray(x0, dtype=float)
    if x0.shape != (n_free,):
        raise ValueError(f"starting point has shape {x0.shape}, expected ({n_free},)")
    rhs = y - M @ x0
    if ridge > 0:
        M = np.vstack([M, np.sqrt(ridge) * np.eye(n_free)])
        rhs = np.concatenate([rhs, -np.sqrt(ridge) * x0])
    # numerical-rank cutoff as in numpy.linalg.matrix_rank
    cond = np.finfo(float).eps * max(M.shape)
    step, *_ = scipy.linalg.lstsq(M, rhs, cond=cond, lapack_driver="gelsd", check_finite=False)
    return x0 + step


def effective_rounds(stage_errors, H_norm: float, delta: float) -> int | None:
    """Smallest 1-based round whose relative error is at most ``delta``."""
    if not delta > 0:
        raise ValueError(f"delta must be > 0, got {delta}")
    for l, e in enumerate(stage_errors, start=1):
        if e / H_norm <= delta:
            return l
    return None


def bcd_design(
    p: DesignProblem,
    cfg: SolverConfig | None = None,
    backend: str | None = None,
) -> tuple[ShiftSequence, SolveReport]:
    """Run block coordinate descent over the factors ``S_1 .. S_L``.

    Every factor starts as the identity masked to the edge pattern.  Each
    sweep updates ``j = 1..L`` in order; the objective is recorded after
    every block update (entry ``(0, 0, J)`` is the starting value).  Stops
    after ``cfg.i_max`` sweeps or once a sweep lowers ``J`` by less than
    ``cfg.rel_tol`` times its value at the start of the sweep.
    """
    cfg = cfg or SolverConfig()
    t0 = time.perf_counter()
    g = p.graph
    H = p.target
    n = g.n_vertices
    sel = selection_matrix(g)
    receivers, senders = g.receivers, g.senders
    group, n_free = free_groups(g, p.symmetric)
    # one representative edge per free variable, to read current values back
    first = np.full(n_free, -1, dtype=np.intp)
    for k in range(g.n_edges - 1, -1, -1):
        first[group[k]] = k
    sqrt_alpha = np.sqrt(p.alpha)

    seq = ShiftSequence.masked_identity(g, p.L)
    mats = seq.matrices()
    J = _objective(H, mats, p.alpha)
    trace = [(0, 0, J)]
    converged = False
    sweep = 0
    for sweep in range(1, cfg.i_max + 1):
        J_start = J
        prefix = np.eye(n)
        for j in range(p.L):
            M, y = _block_system(H, mats, sqrt_alpha, j, prefix, receivers, senders, group, n_free, backend)
            s = solve_block(M, y, cfg.ridge, x0=seq.coeffs[j][first])
            seq.coeffs[j] = s[group]
            mats[j] = sel.scatter(seq.coeffs[j])
            J = _objective(H, mats, p.alpha)
            trace.append((sweep, j + 1, J))
            prefix = mats[j] @ prefix
        if J_start - J <= cfg.rel_tol * J_start:
            converged = True
            break

    errs = stage_errors(H, seq)
    h_norm = np.linalg.norm(H) or 1.0
    values = np.array([t[2] for t in trace])
    report = SolveReport(
        objective_trace=trace,
        stage_errors=errs,
        effective_rounds=effective_rounds(errs, h_norm, cfg.delta),
        wall_time=time.perf_counter() - t0,
        sweeps=sweep,
        converged=converged,
        monotone=bool(np.all(np.diff(values) <= MONOTONE_SLACK)),
        max_abs_coefficient=float(max(np.max(np.abs(c), initial=0.0) for c in seq.coeffs)),
    )
    if not report.monotone and cfg.ridge == 0:
        log.warning("objective rose by more than %g during BCD (largest |coefficient| %.3g)",
                    MONOTONE_SLACK, report.max_abs_coefficient)
    return seq, report
