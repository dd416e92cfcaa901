"""Target transformations and a single-shift polynomial filter baseline."""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np
import scipy.linalg


def consensus_matrix(n: int) -> np.ndarray:
    """Averaging operator ``(1/n) 1 1^T``."""
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    return np.full((n, n), 1.0 / n)


def projector(U) -> np.ndarray:
    """Orthogonal projector onto span(U) for U with orthonormal columns."""
    U = np.asarray(U, dtype=float)
    if U.ndim == 1:
        U = U[:, None]
    return U @ U.T


def random_basis(n: int, r: int, seed=None) -> np.ndarray:
    """Orthonormal n x r basis of a Gaussian random subspace."""
    if not 1 <= r <= n:
        raise ValueError(f"subspace dimension must be in 1..{n}, got {r}")
    rng = np.random.default_rng(seed)
    while True:
        Q, R = np.linalg.qr(rng.standard_normal((n, r)))
        # rank-deficient draws have measure zero; redraw if one happens
        if np.min(np.abs(np.diag(R))) > 1e-10:
            return Q


def random_projection(n: int, r: int, seed=None) -> np.ndarray:
    return projector(random_basis(n, r, seed))


def gf_baseline_fit(S, H, L: int) -> tuple[np.ndarray, float]:
    """Least-squares coefficients of ``sum_{l<L} c_l S^l`` against ``H``.

    Returns the minimum-norm coefficients and the Frobenius residual.
    """
    S = np.asarray(S, dtype=float)
    H = np.asarray(H, dtype=float)
    if S.ndim != 2 or S.shape[0] != S.shape[1] or S.shape != H.shape:
        raise ValueError(f"shift {S.shape} and target {H.shape} must be equal-size square matrices")
    if L < 1:
        raise ValueError(f"L must be >= 1, got {L}")
    powers = [np.eye(S.shape[0])]
    for _ in range(L - 1):
        powers.append(S @ powers[-1])
    basis = np.stack([P.reshape(-1, order="F") for P in powers], axis=1)
    c, *_ = scipy.linalg.lstsq(basis, H.reshape(-1, order="F"), lapack_driver="gelsd")
    fit = sum(ci * P for ci, P in zip(c, powers))
    return c, float(np.linalg.norm(H - fit))


def load_matrix(path) -> np.ndarray:
    rows = [ln.split() for ln in Path(path).read_text().splitlines() if ln.strip()]
    if not rows:
        raise ValueError(f"{path}: empty matrix file")
    if len({len(r) for r in rows}) != 1:
        raise ValueError(f"{path}: ragged rows")
    try:
        M = np.array([[float(v) for v in r] for r in rows])
    except ValueError as exc:
        raise ValueError(f"{path}: {exc}") from None
    if M.shape[0] != M.shape[1]:
        raise ValueError(f"{path}: matrix is {M.shape[0]}x{M.shape[1]}, expected square")
    return M


def save_matrix(M, path) -> None:
    M = np.atleast_2d(np.asarray(M, dtype=float))
    Path(path).write_text("".join(" ".join(f"{v:.17g}" for v in row) + "\n" for row in M))


@dataclass
class TargetSpec:
    """A parsed target description and its resolved matrix.

    ``kind`` is ``consensus``, ``projection`` or ``file``.  ``basis`` holds
    orthonormal signal-subspace columns when the target is a projector.
    """

    kind: str
    resolved: np.ndarray
    rank: int | None = None
    path: str | None = None
    basis: np.ndarray | None = None


def resolve_target(text: str, n: int, seed=None) -> TargetSpec:
    """Parse ``consensus``, ``projection:R`` or ``file:PATH`` into a target."""
    if text == "consensus":
        return TargetSpec("consensus", consensus_matrix(n), rank=1, basis=np.full((n, 1), 1 / np.sqrt(n)))
    kind, _, arg = text.partition(":")
    if kind == "projection":
        try:
            r = int(arg)
        except ValueError:
            raise ValueError(f"bad projection rank in {text!r}") from None
        U = random_basis(n, r, seed)
        return TargetSpec("projection", projector(U), rank=r, basis=U)
    if kind == "file":
        H = load_matrix(arg)
        if H.shape != (n, n):
            raise ValueError(f"target file {arg} is {H.shape[0]}x{H.shape[1]}, graph has {n} vertices")
        return TargetSpec("file", H, path=arg)
    raise ValueError(f"unknown target {text!r}; use consensus, projection:R or file:PATH")
