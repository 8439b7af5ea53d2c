import numpy as np
import pytest
import scipy.linalg
from hypothesis import given, settings
from hypothesis import strategies as st

from opinion_topology.numerics import (
    NotSchurStableError,
    lyapunov_residual,
    matrix_norms,
    p_norm_of_matrix,
    pd_check,
    solve_discrete_lyapunov,
    spectral_radius_similar,
    spectral_radius_symmetric,
    symmetric_eigenvalues,
    two_norm,
)


def power_iteration_radius(m, iters=20000):
    """Dominant |eigenvalue| of a matrix with a real dominant pair (+-lambda)."""
    rng = np.random.default_rng(0)
    x = rng.random(m.shape[0]) + 0.1
    for _ in range(iters):
        y = m @ (m @ x)
        norm = np.linalg.norm(y)
        if norm == 0:
            return 0.0
        x = y / norm
    return float(np.sqrt(np.linalg.norm(m @ (m @ x))))


def random_symmetric(n, seed):
    m = np.random.default_rng(seed).normal(size=(n, n))
    return m + m.T


def random_stable(n, seed, rho=0.9):
    a = np.random.default_rng(seed).normal(size=(n, n))
    return a * rho / max(abs(np.linalg.eigvals(a)))


def test_path_graph_eigenvalues():
    n = 7
    a = np.diag(np.ones(n - 1), 1) + np.diag(np.ones(n - 1), -1)
    expected = np.sort(2 * np.cos(np.arange(1, n + 1) * np.pi / (n + 1)))
    assert np.allclose(symmetric_eigenvalues(a), expected, rtol=1e-10, atol=1e-12)


def test_eigenvalues_ascending_and_trace():
    a = random_symmetric(9, 1)
    ev = symmetric_eigenvalues(a)
    assert np.all(np.diff(ev) >= 0)
    assert np.isclose(ev.sum(), np.trace(a))
    assert np.isclose(np.prod(ev), np.linalg.det(a))


def test_eigenvalues_reject_nonsymmetric_and_nonsquare():
    with pytest.raises(ValueError):
        symmetric_eigenvalues(np.array([[0.0, 1.0], [0.0, 0.0]]))
    with pytest.raises(ValueError):
        symmetric_eigenvalues(np.zeros((2, 3)))
    with pytest.raises(ValueError):
        symmetric_eigenvalues(np.array([[np.nan]]))


def test_spectral_radius_symmetric_uses_absolute_value():
    assert spectral_radius_symmetric(np.diag([-3.0, 2.0])) == 3.0
    assert spectral_radius_symmetric(np.zeros((0, 0))) == 0.0


@given(st.integers(2, 12), st.integers(0, 2**31))
@settings(max_examples=40, deadline=None)
def test_similarity_radius_matches_power_iteration(n, seed):
    rng = np.random.default_rng(seed)
    adj = np.triu((rng.random((n, n)) < 0.5).astype(float), 1)
    adj = adj + adj.T
    gdiag = rng.uniform(0.05, 1.0, n)
    ours = spectral_radius_similar(adj, gdiag)
    ref = max(abs(np.linalg.eigvals(np.diag(gdiag) @ adj)))
    assert ours == pytest.approx(ref, rel=1e-9, abs=1e-12)


def test_similarity_radius_triangle_power_iteration():
    adj = np.ones((3, 3)) - np.eye(3)
    gdiag = np.array([0.4, 0.2, 0.1])
    assert spectral_radius_similar(adj, gdiag) == pytest.approx(
        power_iteration_radius(np.diag(gdiag) @ adj), rel=1e-9
    )


def test_similarity_radius_with_zero_gain():
    adj = np.ones((3, 3)) - np.eye(3)
    gdiag = np.array([0.0, 0.5, 0.5])
    # only the edge (1, 2) survives: eigenvalues of [[0, .5], [.5, 0]]
    assert spectral_radius_similar(adj, gdiag) == pytest.approx(0.5)
    with pytest.raises(ValueError):
        spectral_radius_similar(adj, np.array([-0.1, 0.5, 0.5]))
    with pytest.raises(ValueError):
        spectral_radius_similar(adj, np.ones(2))


@given(st.integers(1, 8), st.integers(0, 2**31), st.floats(0.05, 0.99))
@settings(max_examples=40, deadline=None)
def test_lyapunov_matches_scipy(n, seed, rho):
    a = random_stable(n, seed, rho)
    q = np.eye(n) * 0.01
    p = solve_discrete_lyapunov(a, q)
    # scipy solves X = M X M^T + Q, so M = a^T gives a^T X a - X = -Q
    ref = scipy.linalg.solve_discrete_lyapunov(a.T, q)
    assert np.allclose(p, ref, rtol=1e-8, atol=1e-10 * np.abs(ref).max())
    assert np.array_equal(p, p.T)
    assert lyapunov_residual(a, p, q) <= 1e-10 * max(1.0, np.abs(p).max())


def test_lyapunov_scalar_closed_form():
    # a^2 p - p = -q  =>  p = q / (1 - a^2)
    p = solve_discrete_lyapunov(np.array([[0.5]]), np.array([[3.0]]))
    assert p[0, 0] == pytest.approx(4.0)


def test_lyapunov_general_q():
    a = random_stable(4, 3, 0.7)
    m = np.random.default_rng(4).normal(size=(4, 4))
    q = m @ m.T + np.eye(4)
    p = solve_discrete_lyapunov(a, q)
    assert np.allclose(a.T @ p @ a - p, -q, atol=1e-10)


@pytest.mark.parametrize("a", [np.array([[1.0]]), np.array([[1.2, 0.0], [0.3, 0.1]]), np.diag([0.5, -1.0])])
def test_lyapunov_unstable_raises(a):
    with pytest.raises(NotSchurStableError):
        solve_discrete_lyapunov(a, np.eye(a.shape[0]))


def test_lyapunov_rejects_bad_q():
    with pytest.raises(ValueError):
        solve_discrete_lyapunov(np.eye(2) * 0.5, -np.eye(2))
    with pytest.raises(ValueError):
        solve_discrete_lyapunov(np.eye(2) * 0.5, np.eye(3))


def test_pd_check_known_cases():
    assert pd_check(np.array([[2.0, 1.0], [1.0, 2.0]])).is_pd
    assert pd_check(np.eye(3)).min_pivot == 1.0
    assert not pd_check(np.array([[1.0, 2.0], [2.0, 1.0]])).is_pd
    assert not pd_check(np.array([[1.0, 1.0], [1.0, 1.0]])).is_pd
    assert not pd_check(np.zeros((2, 2))).is_pd
    check = pd_check(np.diag([4.0, -1.0]))
    assert not check.is_pd and check.min_pivot == -1.0


@given(st.integers(1, 10), st.integers(0, 2**31), st.floats(-2.0, 2.0))
@settings(max_examples=60, deadline=None)
def test_pd_check_agrees_with_eigenvalues(n, seed, shift):
    m = random_symmetric(n, seed)
    lam = np.linalg.eigvalsh(m)
    m = m - (lam[0] + shift) * np.eye(n)
    if abs(shift) < 1e-6:
        return
    assert pd_check(m).is_pd == (shift < 0)


def test_pd_check_pivot_equals_ldl():
    m = np.array([[4.0, 2.0, 0.0], [2.0, 5.0, 1.0], [0.0, 1.0, 3.0]])
    _, d, _ = scipy.linalg.ldl(m)
    assert pd_check(m).min_pivot == pytest.approx(np.diag(d).min())


@given(st.integers(1, 9), st.integers(0, 2**31))
@settings(max_examples=40, deadline=None)
def test_norms_match_numpy(n, seed):
    a = np.random.default_rng(seed).normal(size=(n, n))
    norms = matrix_norms(a)
    assert norms.one == pytest.approx(np.linalg.norm(a, 1))
    assert norms.inf == pytest.approx(np.linalg.norm(a, np.inf))
    assert norms.two == pytest.approx(np.linalg.norm(a, 2), rel=1e-9)
    assert two_norm(a) == norms.two


def test_p_norm_identity_is_two_norm():
    a = np.random.default_rng(2).normal(size=(5, 5))
    assert p_norm_of_matrix(a, np.eye(5)) == pytest.approx(np.linalg.norm(a, 2), rel=1e-12)


@given(st.integers(1, 7), st.integers(0, 2**31))
@settings(max_examples=40, deadline=None)
def test_p_norm_matches_sqrtm_formula(n, seed):
    rng = np.random.default_rng(seed)
    a = rng.normal(size=(n, n))
    m = rng.normal(size=(n, n))
    p = m @ m.T + 0.5 * np.eye(n)
    half = np.real(scipy.linalg.sqrtm(p))
    ref = np.linalg.norm(half @ a @ np.linalg.inv(half), 2)
    assert p_norm_of_matrix(a, p) == pytest.approx(ref, rel=1e-8)


def test_p_norm_below_one_for_lyapunov_solution():
    for seed in range(10):
        a = random_stable(6, seed, 0.95)
        p = solve_discrete_lyapunov(a, np.eye(6))
        assert p_norm_of_matrix(a, p) < 1.0


def test_p_norm_requires_pd():
    with pytest.raises(ValueError):
        p_norm_of_matrix(np.eye(2), np.diag([1.0, -1.0]))
