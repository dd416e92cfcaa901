import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import dense_kron_system, random_graph, random_sequence
from shiftdesign.design import (
    DesignProblem,
    ShiftSequence,
    SolverConfig,
    assemble_block_ls,
    bcd_design,
    effective_rounds,
    free_groups,
    make_weights,
    objective,
    solve_block,
    stage_errors,
)
from shiftdesign.graph import build_graph, er_random_graph, selection_matrix
from shiftdesign.tasks import consensus_matrix, random_projection


def naive_matmul(X, Y):
    n, m, k = X.shape[0], X.shape[1], Y.shape[1]
    Z = np.zeros((n, k))
    for i in range(n):
        for j in range(k):
            acc = 0.0
            for t in range(m):
                acc += X[i, t] * Y[t, j]
            Z[i, j] = acc
    return Z


def naive_stage_errors(H, mats):
    out = []
    for l in range(1, len(mats) + 1):
        P = np.eye(H.shape[0])
        for S in mats[:l]:
            P = naive_matmul(S, P)
        out.append(np.sqrt(sum((H[a, b] - P[a, b]) ** 2 for a in range(H.shape[0]) for b in range(H.shape[1]))))
    return np.array(out)


@pytest.mark.parametrize(
    "scheme, L, kw, expected",
    [
        ("uniform", 4, {}, [0.25] * 4),
        ("linear", 3, {}, [1 / 6, 2 / 6, 3 / 6]),
        ("geometric", 3, {"ratio": 2.0}, [1 / 7, 2 / 7, 4 / 7]),
        ("final_only", 3, {}, [0, 0, 1]),
    ],
)
def test_make_weights(scheme, L, kw, expected):
    np.testing.assert_allclose(make_weights(scheme, L, **kw), expected, rtol=1e-15)


def test_make_weights_rejects():
    with pytest.raises(ValueError):
        make_weights("geometric", 3, ratio=0.0)
    with pytest.raises(ValueError):
        make_weights("cubic", 3)
    with pytest.raises(ValueError):
        make_weights("linear", 0)


def test_objective_scalar():
    g = build_graph(1, [(0, 0)])
    p = DesignProblem(np.array([[2.0]]), g, 2, np.array([0.5, 0.5]))
    assert objective(p, ShiftSequence(g, [[1.0], [1.0]])) == 1.0


def test_objective_identity_zero():
    g = er_random_graph(5, 0.4, seed=3)
    p = DesignProblem(np.eye(5), g, 3)
    assert objective(p, ShiftSequence.masked_identity(g, 3)) == 0.0


def test_objective_and_stage_errors_match_naive():
    rng = np.random.default_rng(0)
    g = random_graph(1, 4)
    seq = random_sequence(rng, g, 3)
    H = rng.standard_normal((4, 4))
    alpha = make_weights("linear", 3)
    naive = naive_stage_errors(H, seq.matrices())
    np.testing.assert_allclose(stage_errors(H, seq), naive, rtol=1e-12)
    expected = float(np.dot(alpha, naive**2))
    assert objective(DesignProblem(H, g, 3, alpha), seq) == pytest.approx(expected, rel=1e-12)


def test_stage_errors_examples():
    g = build_graph(2, [(0, 0), (1, 1), (0, 1)])
    seq = ShiftSequence(g, [[1.0, 2.0, 3.0]])
    assert stage_errors(seq.matrices()[0], seq).tolist() == [0.0]
    seq = ShiftSequence.masked_identity(g, 1)
    assert stage_errors(np.zeros((2, 2)), seq)[0] == pytest.approx(np.sqrt(2), rel=1e-15)
    with pytest.raises(ValueError):
        stage_errors(np.zeros((3, 3)), seq)


def test_design_problem_validation():
    g = er_random_graph(4, 0.5, directed=True, seed=1)
    with pytest.raises(ValueError, match="sum to 1"):
        DesignProblem(np.eye(4), g, 2, np.array([0.5, 0.6]))
    with pytest.raises(ValueError, match="undirected"):
        DesignProblem(np.eye(4), g, 2, symmetric=True)
    with pytest.raises(ValueError):
        DesignProblem(np.eye(3), g, 2)
    with pytest.raises(ValueError):
        SolverConfig(i_max=0)


def test_assemble_l1_is_selection_matrix(backend):
    g = random_graph(2, 4)
    H = np.random.default_rng(1).standard_normal((4, 4))
    p = DesignProblem(H, g, 1, np.array([1.0]))
    M, y = assemble_block_ls(p, ShiftSequence.masked_identity(g, 1), 1, backend=backend)
    np.testing.assert_array_equal(M, selection_matrix(g).dense())
    np.testing.assert_array_equal(y, H.reshape(-1, order="F"))


def test_assemble_last_block_structure(backend):
    rng = np.random.default_rng(4)
    g = random_graph(5, 4)
    seq = random_sequence(rng, g, 3)
    p = DesignProblem(rng.standard_normal((4, 4)), g, 3)
    M, _ = assemble_block_ls(p, seq, 3, backend=backend)
    mats = seq.matrices()
    C = mats[1] @ mats[0]
    for k, (n, m) in enumerate(g.edges):
        e = np.zeros(4)
        e[n] = 1.0
        np.testing.assert_allclose(M[:, k], np.sqrt(p.alpha[2]) * np.kron(C[m, :], e), rtol=0, atol=1e-15)


@pytest.mark.parametrize("symmetric", [False, True])
def test_assemble_matches_dense_kron(backend, symmetric):
    rng = np.random.default_rng(9)
    g = random_graph(6, 4, directed=not symmetric)
    seq = random_sequence(rng, g, 3)
    p = DesignProblem(rng.standard_normal((4, 4)), g, 3, symmetric=symmetric)
    A = selection_matrix(g).dense()
    if symmetric:
        group, n_free = free_groups(g, True)
        T = np.zeros((g.n_edges, n_free))
        T[np.arange(g.n_edges), group] = 1.0
        A = A @ T
    M, y = assemble_block_ls(p, seq, 2, backend=backend)
    M_ref, y_ref = dense_kron_system(p.target, seq.matrices(), p.alpha, 2, A)
    np.testing.assert_allclose(M, M_ref, rtol=0, atol=1e-13)
    np.testing.assert_allclose(y, y_ref, rtol=0, atol=1e-13)


def test_assemble_rejects_bad_block():
    g = random_graph(0, 3)
    p = DesignProblem(np.eye(3), g, 2)
    with pytest.raises(ValueError):
        assemble_block_ls(p, ShiftSequence.masked_identity(g, 2), 3)


def test_solve_block_examples():
    np.testing.assert_allclose(solve_block(np.eye(2), [1.0, 2.0]), [1, 2], rtol=1e-14)
    np.testing.assert_allclose(solve_block([[1.0], [1.0]], [1.0, 3.0]), [2.0], rtol=1e-14)
    np.testing.assert_allclose(solve_block([[1.0, 1.0]], [2.0]), [1.0, 1.0], rtol=1e-14)


def test_solve_block_warm_start():
    # rank-deficient: the minimizer closest to x0 rather than the min-norm one
    np.testing.assert_allclose(solve_block([[1.0, 1.0]], [2.0], x0=[2.0, 0.0]), [2.0, 0.0], atol=1e-15)
    np.testing.assert_allclose(solve_block([[1.0, 1.0]], [4.0], x0=[2.0, 0.0]), [3.0, 1.0], rtol=1e-14)
    rng = np.random.default_rng(8)
    M, y, x0 = rng.standard_normal((15, 6)), rng.standard_normal(15), rng.standard_normal(6)
    np.testing.assert_allclose(solve_block(M, y, x0=x0), solve_block(M, y), rtol=1e-12)
    np.testing.assert_allclose(solve_block(M, y, 0.2, x0=x0), solve_block(M, y, 0.2), rtol=1e-12)
    with pytest.raises(ValueError):
        solve_block(M, y, x0=np.zeros(5))


def test_solve_block_ridge_closed_form():
    rng = np.random.default_rng(2)
    M, y = rng.standard_normal((12, 5)), rng.standard_normal(12)
    expected = np.linalg.solve(M.T @ M + 0.3 * np.eye(5), M.T @ y)
    np.testing.assert_allclose(solve_block(M, y, ridge=0.3), expected, rtol=1e-10)


def test_solve_block_rejects():
    with pytest.raises(ValueError):
        solve_block(np.eye(2), [1.0])
    with pytest.raises(ValueError):
        solve_block([[np.nan]], [1.0])


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10_000), st.integers(2, 5), st.integers(1, 3), st.booleans())
def test_block_solve_matches_dense_pinv(seed, n, L, symmetric):
    rng = np.random.default_rng(seed)
    g = random_graph(seed, n, directed=not symmetric)
    p = DesignProblem(rng.standard_normal((n, n)), g, L, symmetric=symmetric)
    seq = random_sequence(rng, g, L)
    j = int(rng.integers(1, L + 1))
    M, y = assemble_block_ls(p, seq, j)
    A = selection_matrix(g).dense()
    group, n_free = free_groups(g, symmetric)
    T = np.zeros((g.n_edges, n_free))
    T[np.arange(g.n_edges), group] = 1.0
    M_ref, y_ref = dense_kron_system(p.target, seq.matrices(), p.alpha, j, A @ T)
    s_ref = np.linalg.pinv(M_ref) @ y_ref
    s = solve_block(M, y)
    assert np.linalg.norm(s - s_ref) <= 1e-8 * max(1.0, np.linalg.norm(s_ref))


def test_effective_rounds_examples():
    assert effective_rounds([0.5, 0.1, 1e-4], 1.0, 1e-3) == 3
    assert effective_rounds([0.5, 0.6], 1.0, 1e-3) is None
    assert effective_rounds([0.0], 1.0, 1e-3) == 1
    with pytest.raises(ValueError):
        effective_rounds([0.0], 1.0, 0.0)


def test_bcd_complete_graph_single_stage_exact():
    H = np.random.default_rng(5).standard_normal((5, 5))
    g = er_random_graph(5, 1.0, add_self_loops=True, seed=0)
    _, rep = bcd_design(DesignProblem(H, g, 1, np.array([1.0])), SolverConfig(i_max=3))
    assert rep.final_objective <= 1e-12 * np.sum(H**2)


def test_bcd_recovers_feasible_target():
    rng = np.random.default_rng(6)
    g = random_graph(8, 6, p=0.4)
    H = rng.standard_normal((6, 6)) * g.mask()
    seq, rep = bcd_design(DesignProblem(H, g, 1, np.array([1.0])), SolverConfig(i_max=2))
    np.testing.assert_allclose(seq.matrices()[0], H, rtol=0, atol=1e-10)
    assert rep.final_objective <= 1e-20 * max(1.0, np.sum(H**2))


def test_bcd_without_self_loops_starts_from_zero():
    g = er_random_graph(5, 0.6, directed=True, add_self_loops=False, seed=4, require_connected=True)
    seq = ShiftSequence.masked_identity(g, 2)
    assert all(np.count_nonzero(S) == 0 for S in seq.matrices())
    _, rep = bcd_design(DesignProblem(consensus_matrix(5), g, 2), SolverConfig(i_max=5))
    assert rep.monotone


def _block_objective_perturbed(p, seq, j, s_free, group, direction, eps):
    trial = ShiftSequence(p.graph, list(seq.coeffs))
    trial.coeffs[j - 1] = (s_free + eps * direction)[group]
    return objective(p, trial)


@pytest.mark.parametrize("seed", range(4))
@pytest.mark.parametrize("symmetric", [False, True])
def test_block_update_is_optimal(seed, symmetric):
    rng = np.random.default_rng(100 + seed)
    g = random_graph(seed, 5, directed=not symmetric)
    p = DesignProblem(random_projection(5, 2, seed), g, 3, symmetric=symmetric)
    seq = random_sequence(rng, g, 3)
    group, n_free = free_groups(g, symmetric)
    for j in range(1, 4):
        M, y = assemble_block_ls(p, seq, j)
        s = solve_block(M, y)
        seq.coeffs[j - 1] = s[group]
        J = objective(p, seq)
        for _ in range(20):
            d = rng.standard_normal(n_free)
            assert _block_objective_perturbed(p, seq, j, s, group, d, 1e-3) >= J - 1e-12


@pytest.mark.parametrize("seed", range(3))
def test_bcd_trace_monotone_and_feasible(seed):
    g = random_graph(seed, 8, p=0.3, directed=bool(seed % 2))
    p = DesignProblem(random_projection(8, 3, seed), g, 4, make_weights("geometric", 4))
    seq, rep = bcd_design(p, SolverConfig(i_max=20))
    J = [t[2] for t in rep.objective_trace]
    assert all(b <= a + 1e-10 for a, b in zip(J, J[1:]))
    assert rep.monotone
    assert [t[:2] for t in rep.objective_trace[:3]] == [(0, 0), (1, 1), (1, 2)]
    assert all(np.all(S[~g.mask()] == 0.0) for S in seq.matrices())
    np.testing.assert_allclose(rep.stage_errors, stage_errors(p.target, seq), rtol=0)


def test_bcd_symmetric_outputs_exactly_symmetric():
    g = random_graph(3, 8, p=0.4, directed=False)
    p = DesignProblem(random_projection(8, 2, 1), g, 4, symmetric=True)
    seq, rep = bcd_design(p, SolverConfig(i_max=10))
    for S in seq.matrices():
        assert np.linalg.norm(S - S.T) == 0.0
    assert rep.monotone


def test_bcd_early_stop():
    g = er_random_graph(4, 1.0, seed=0)
    _, rep = bcd_design(DesignProblem(consensus_matrix(4), g, 2), SolverConfig(i_max=50, rel_tol=1e-9))
    assert rep.converged and rep.sweeps < 50


def test_bcd_ridge_path():
    g = random_graph(2, 6, p=0.3)
    p = DesignProblem(consensus_matrix(6), g, 3)
    _, rep = bcd_design(p, SolverConfig(i_max=5, ridge=1e-6))
    assert np.isfinite(rep.final_objective)


def test_appending_identity_keeps_stage_errors():
    rng = np.random.default_rng(12)
    g = random_graph(12, 6)
    seq = random_sequence(rng, g, 3)
    H = rng.standard_normal((6, 6))
    longer = ShiftSequence(g, seq.coeffs + ShiftSequence.masked_identity(g, 1).coeffs)
    e_short, e_long = stage_errors(H, seq), stage_errors(H, longer)
    np.testing.assert_array_equal(e_long[:3], e_short)
    assert e_long[3] == e_short[2]


def test_backends_agree(backend):
    g = random_graph(21, 7, p=0.4)
    p = DesignProblem(consensus_matrix(7), g, 3)
    _, ref = bcd_design(p, SolverConfig(i_max=5), backend="python")
    _, rep = bcd_design(p, SolverConfig(i_max=5), backend=backend)
    np.testing.assert_allclose(rep.stage_errors, ref.stage_errors, rtol=1e-9, atol=1e-12)
