"""Small dense linear-algebra kernel.

Everything here works on plain ``numpy`` arrays.  Matrices in this project
are at most a few dozen rows, so clarity wins over asymptotics: the discrete
Lyapunov equation is solved as one ``n^2 x n^2`` linear system.
"""

from __future__ import annotations

from typing import NamedTuple

import numpy as np

SYMMETRY_TOL = 1e-12
PIVOT_TOL = 1e-12


class NotSchurStableError(ArithmeticError):
    """The Lyapunov equation has no positive definite solution."""


class PDCheck(NamedTuple):
    is_pd: bool
    min_pivot: float


class MatrixNorms(NamedTuple):
    one: float
    inf: float
    two: float


def as_square(m, name: str = "matrix") -> np.ndarray:
    a = np.asarray(m, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"{name} must be square, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ValueError(f"{name} has non-finite entries")
    return a


def _require_symmetric(a: np.ndarray, name: str) -> None:
    scale = max(1.0, float(np.max(np.abs(a)))) if a.size else 1.0
    if a.size and np.max(np.abs(a - a.T)) > SYMMETRY_TOL * scale:
        raise ValueError(f"{name} is not symmetric")


def symmetric_eigenvalues(m) -> np.ndarray:
    """Ascending eigenvalues of a symmetric matrix.

    Backed by LAPACK's symmetric driver (Householder tridiagonalisation
    followed by an implicit QL/QR-type iteration).
    """
    a = as_square(m)
    _require_symmetric(a, "matrix")
    if a.shape[0] == 0:
        return np.zeros(0)
    return np.linalg.eigvalsh(0.5 * (a + a.T))


def spectral_radius_symmetric(m) -> float:
    ev = symmetric_eigenvalues(m)
    return float(np.max(np.abs(ev))) if ev.size else 0.0


def spectral_radius_similar(a, gdiag) -> float:
    """Spectral radius of ``diag(gdiag) @ a`` for symmetric ``a``.

    ``diag(g) a`` is similar to ``diag(sqrt g) a diag(sqrt g)`` when all
    ``g > 0``; zero entries kill a row of the product and a row/column of the
    symmetric form alike, so the same formula covers them.
    """
    adj = as_square(a, "adjacency")
    g = np.asarray(gdiag, dtype=float)
    if g.shape != (adj.shape[0],):
        raise ValueError(f"diagonal must have length {adj.shape[0]}, got {g.shape}")
    if np.any(g < 0):
        raise ValueError("diagonal scaling must be nonnegative")
    s = np.sqrt(g)
    return spectral_radius_symmetric(s[:, None] * adj * s[None, :])


def solve_discrete_lyapunov(a, q) -> np.ndarray:
    """Solve ``a.T @ P @ a - P = -q`` for symmetric ``P``.

    Uses the vectorised form ``(I - a.T kron a.T) vec(P) = vec(q)`` and an LU
    solve with partial pivoting.  When ``q`` is positive definite the solution
    is positive definite exactly when ``a`` is Schur stable, so a singular
    system or an indefinite result raises :class:`NotSchurStableError`.
    """
    a = as_square(a, "a")
    q = as_square(q, "q")
    n = a.shape[0]
    if q.shape != (n, n):
        raise ValueError(f"q must be {n}x{n}, got {q.shape}")
    _require_symmetric(q, "q")
    if not pd_check(q).is_pd:
        raise ValueError("q must be positive definite")
    k = np.eye(n * n) - np.kron(a.T, a.T)
    try:
        # column-major vec; q symmetric so vec(q) is the same either way
        vec_p = np.linalg.solve(k, q.reshape(-1, order="F"))
    except np.linalg.LinAlgError as exc:
        raise NotSchurStableError("Lyapunov system is singular (an eigenvalue on the unit circle)") from exc
    p = vec_p.reshape((n, n), order="F")
    p = 0.5 * (p + p.T)
    check = pd_check(p)
    if not check.is_pd:
        raise NotSchurStableError(
            f"Lyapunov solution is not positive definite (min pivot {check.min_pivot:.3g})"
        )
    return p


def lyapunov_residual(a, p, q) -> float:
    """Frobenius norm of ``a.T p a - p + q``."""
    a = np.asarray(a, dtype=float)
    return float(np.linalg.norm(a.T @ p @ a - p + q, "fro"))


def pd_check(m) -> PDCheck:
    """Positive definiteness by an unpivoted LDL^T factorisation.

    Returns whether every pivot exceeds ``PIVOT_TOL`` together with the
    smallest pivot reached (factorisation stops at the first bad pivot).
    """
    a = as_square(m)
    _require_symmetric(a, "matrix")
    n = a.shape[0]
    if n == 0:
        return PDCheck(True, float("inf"))
    work = 0.5 * (a + a.T)
    min_pivot = float("inf")
    for k in range(n):
        piv = float(work[k, k])
        min_pivot = min(min_pivot, piv)
        if not piv > PIVOT_TOL:
            return PDCheck(False, min_pivot)
        col = work[k + 1 :, k] / piv
        work[k + 1 :, k + 1 :] -= np.outer(col, work[k, k + 1 :])
    return PDCheck(True, min_pivot)


def two_norm(m) -> float:
    a = as_square(m)
    if a.shape[0] == 0:
        return 0.0
    gram = a.T @ a
    top = symmetric_eigenvalues(0.5 * (gram + gram.T))[-1]
    return float(np.sqrt(max(top, 0.0)))


def matrix_norms(m) -> MatrixNorms:
    a = as_square(m)
    if a.shape[0] == 0:
        return MatrixNorms(0.0, 0.0, 0.0)
    abs_a = np.abs(a)
    return MatrixNorms(
        one=float(abs_a.sum(axis=0).max()),
        inf=float(abs_a.sum(axis=1).max()),
        two=two_norm(a),
    )


def p_norm_of_matrix(a, p) -> float:
    """Operator norm of ``a`` induced by ``||x||_P = sqrt(x^T P x)``.

    Equal to ``||P^{1/2} a P^{-1/2}||_2``; computed with the Cholesky factor
    ``P = L L^T`` as ``||L^T a L^{-T}||_2``, which has the same singular values.
    """
    a = as_square(a, "a")
    p = as_square(p, "p")
    if p.shape != a.shape:
        raise ValueError(f"p must match a's shape {a.shape}, got {p.shape}")
    _require_symmetric(p, "p")
    if not pd_check(p).is_pd:
        raise ValueError("p must be positive definite")
    chol = np.linalg.cholesky(0.5 * (p + p.T))
    # L^T a L^{-T} = (L^{-1} (L^T a)^T)^T
    m = np.linalg.solve(chol, (chol.T @ a).T).T
    return two_norm(m)
