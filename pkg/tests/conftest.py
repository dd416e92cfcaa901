import numpy as np
import pytest

from shiftdesign import kernels
from shiftdesign.design import ShiftSequence
from shiftdesign.graph import er_random_graph


@pytest.fixture(params=sorted(kernels.BACKENDS))
def backend(request):
    return request.param


def random_graph(seed, n, p=0.5, directed=True, self_loops=True):
    return er_random_graph(n, p, directed=directed, add_self_loops=self_loops, seed=seed, require_connected=True)


def random_sequence(rng, g, L):
    return ShiftSequence(g, [rng.standard_normal(g.n_edges) for _ in range(L)])


def dense_kron_system(H, mats, alpha, j, A):
    """Materialize the stacked block system with explicit Kronecker products (j is 1-based)."""
    n = H.shape[0]
    C = np.eye(n)
    for s in mats[: j - 1]:
        C = s @ C
    rows, rhs = [], []
    B = np.eye(n)
    for l in range(j, len(mats) + 1):
        if l > j:
            B = mats[l - 1] @ B
        w = np.sqrt(alpha[l - 1])
        rows.append(w * np.kron(C.T, B) @ A)
        rhs.append(w * H.reshape(-1, order="F"))
    return np.vstack(rows), np.concatenate(rhs)


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
