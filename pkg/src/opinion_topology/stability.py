"""Stability of the action dynamics ``u(k+1) = ... - A_u u(k)``.

For a fixed topology the Lyapunov condition

    exists P > 0 with A_u^T P A_u - P <= -q I

is equivalent to ``rho(A_u) < 1``: if the spectral radius is below one the
equation ``A_u^T P A_u - P = -q I`` has a unique positive definite solution,
and any feasible ``P`` can be rescaled to meet any ``q > 0``.  The oracle
therefore screens with the spectral radius and then builds and checks the
explicit certificate.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, NamedTuple

import numpy as np

from .dynamics import AgentParams, build_system_matrices, manipulation_gain
from .netgraph import EdgeBitVector, Graph, degrees
from .numerics import (
    NotSchurStableError,
    lyapunov_residual,
    matrix_norms,
    p_norm_of_matrix,
    pd_check,
    solve_discrete_lyapunov,
    spectral_radius_similar,
    symmetric_eigenvalues,
    two_norm,
)

__all__ = [
    "DesignOracleParams",
    "StabilityReport",
    "SufficientCondition",
    "NormBoundChain",
    "OracleResult",
    "analyze",
    "action_spectral_radius",
    "sufficient_condition",
    "heuristic_lattice_degree",
    "feasibility_oracle",
    "certificate_transform_Z",
    "certificate_from_Z",
    "z_constraint_matrix",
    "lyapunov_constraint_matrix",
    "norm_bound_chain",
    "verify_certificate",
    "CERTIFICATE_TOL",
    "certificate_hooks",
]

CERTIFICATE_TOL = 1e-8

# Callables ``hook(a_u, P, q)`` run on every certificate ``analyze`` emits.
# Meant for auditing; hooks may be called from GA worker threads.
certificate_hooks: list[Callable[[np.ndarray, np.ndarray, float], None]] = []


@dataclass(frozen=True)
class DesignOracleParams:
    q: float = 0.01
    rho_margin: float = 1e-6

    def __post_init__(self) -> None:
        if not self.q > 0:
            raise ValueError(f"stability margin q must be > 0, got {self.q}")
        if not self.rho_margin >= 0:
            raise ValueError(f"rho_margin must be >= 0, got {self.rho_margin}")


@dataclass(frozen=True, eq=False)
class StabilityReport:
    rho: float
    sufficient_ok: np.ndarray
    certificate: np.ndarray | None
    p_norm_a_u: float | None
    margin_q: float
    rho_margin: float
    certificate_residual: float | None

    @property
    def feasible(self) -> bool:
        return self.certificate is not None

    def to_dict(self) -> dict:
        return {
            "rho": self.rho,
            "feasible": self.feasible,
            "q": self.margin_q,
            "rho_margin": self.rho_margin,
            "sufficient_per_agent": [bool(v) for v in self.sufficient_ok],
            "sufficient_all": bool(np.all(self.sufficient_ok)),
            "certificate_residual": self.certificate_residual,
            "p_norm_a_u": self.p_norm_a_u,
        }


def action_spectral_radius(g: Graph, p: AgentParams) -> float:
    """``rho(G_u A)`` through the symmetric similarity transform."""
    gains = manipulation_gain(p.g, degrees(g))
    return spectral_radius_similar(g.adjacency, gains)


def lyapunov_constraint_matrix(a_u, p_mat, q: float) -> np.ndarray:
    """``A_u^T P A_u - P + q I``; the constraint asks for this to be <= 0."""
    m = a_u.T @ p_mat @ a_u - p_mat + q * np.eye(a_u.shape[0])
    return 0.5 * (m + m.T)


def verify_certificate(a_u, p_mat, q: float, tol: float = CERTIFICATE_TOL) -> tuple[bool, float]:
    """Check ``P > 0``, the equation residual and negative semidefiniteness.

    Returns ``(ok, residual)`` with the residual relative to ``||q I||_F``.
    """
    n = a_u.shape[0]
    q_norm = q * math.sqrt(n)
    residual = lyapunov_residual(a_u, p_mat, q * np.eye(n))
    if not pd_check(p_mat).is_pd:
        return False, residual
    if residual > tol * q_norm:
        return False, residual
    top = symmetric_eigenvalues(lyapunov_constraint_matrix(a_u, p_mat, q))[-1]
    return bool(top <= tol * q_norm), residual


def analyze(g: Graph, p: AgentParams, oracle: DesignOracleParams | None = None) -> StabilityReport:
    oracle = oracle or DesignOracleParams()
    sm = build_system_matrices(g, p)
    rho = spectral_radius_similar(sm.adjacency, sm.g_u)
    suff = sufficient_condition(g, p).per_agent
    certificate = None
    p_norm = None
    residual = None
    if rho <= 1.0 - oracle.rho_margin:
        a_u = np.asarray(sm.a_u)
        try:
            cand = solve_discrete_lyapunov(a_u, oracle.q * np.eye(g.n))
        except NotSchurStableError:
            cand = None
        if cand is not None:
            ok, residual = verify_certificate(a_u, cand, oracle.q)
            if ok:
                certificate = cand
                certificate.setflags(write=False)
                p_norm = p_norm_of_matrix(a_u, cand)
                for hook in list(certificate_hooks):
                    hook(a_u, certificate, oracle.q)
    return StabilityReport(
        rho=float(rho),
        sufficient_ok=suff,
        certificate=certificate,
        p_norm_a_u=p_norm,
        margin_q=oracle.q,
        rho_margin=oracle.rho_margin,
        certificate_residual=residual,
    )


class SufficientCondition(NamedTuple):
    per_agent: np.ndarray
    all_ok: bool


def sufficient_condition(g: Graph, p: AgentParams) -> SufficientCondition:
    """Per-agent test ``g_i <= d_i + 2``; passing for every agent implies ``rho(A_u) < 1``."""
    if g.n != p.n:
        raise ValueError(f"graph has {g.n} nodes but parameters describe {p.n} agents")
    ok = p.g <= degrees(g) + 2
    return SufficientCondition(ok, bool(np.all(ok)))


def heuristic_lattice_degree(g_max: float) -> int:
    """Smallest even degree ``>= g_max - 2`` (clamped at zero).

    A ring lattice of this degree satisfies the per-agent sufficient
    condition for every manipulability up to ``g_max``.
    """
    if g_max < 0:
        raise ValueError(f"g_max must be >= 0, got {g_max}")
    k = math.ceil(max(g_max - 2.0, 0.0))
    return k + (k % 2)


class OracleResult(NamedTuple):
    feasible: bool
    rho: float
    certificate: np.ndarray | None


def feasibility_oracle(
    bits: EdgeBitVector, p: AgentParams, oracle: DesignOracleParams | None = None
) -> OracleResult:
    """Feasibility of the topology encoded by ``bits``. Pure and deterministic."""
    report = analyze(Graph.from_bits(bits), p, oracle)
    return OracleResult(report.feasible, report.rho, report.certificate)


def _positive_gains(g: Graph, params: AgentParams) -> np.ndarray:
    gains = manipulation_gain(params.g, degrees(g))
    if np.any(gains <= 0):
        raise ValueError("change of variables needs every g_i > 0")
    return gains


def certificate_transform_Z(p_mat, g: Graph, params: AgentParams) -> np.ndarray:
    """``Z = G_u P G_u``, i.e. ``z_ij = gu_i gu_j p_ij``."""
    gains = _positive_gains(g, params)
    return gains[:, None] * np.asarray(p_mat, dtype=float) * gains[None, :]


def certificate_from_Z(z, g: Graph, params: AgentParams) -> np.ndarray:
    """Inverse map ``P = G_u^{-1} Z G_u^{-1}``."""
    gains = _positive_gains(g, params)
    return np.asarray(z, dtype=float) / gains[:, None] / gains[None, :]


def z_constraint_matrix(z, g: Graph, params: AgentParams, q: float) -> np.ndarray:
    """``A Z A - G_u^{-1} Z G_u^{-1} + q I``; feasible when this is <= 0."""
    gains = _positive_gains(g, params)
    adj = g.adjacency.astype(float)
    z = np.asarray(z, dtype=float)
    m = adj @ z @ adj - z / gains[:, None] / gains[None, :] + q * np.eye(g.n)
    return 0.5 * (m + m.T)


@dataclass(frozen=True)
class NormBoundChain:
    """Quantities in the norm argument behind ``g_i <= d_i + 2`` and which links hold."""

    norm_a: float
    sqrt_inf_one: float
    d_max: int
    d_min: int
    scaled_norm: float
    scaled_norm_bound: float
    gain_radius: float
    norm_a_u: float
    inf_norm_a_u: float
    rho_a_u: float
    links: dict

    def to_dict(self) -> dict:
        out = {k: getattr(self, k) for k in self.__dataclass_fields__ if k != "links"}
        out["links"] = dict(self.links)
        return out


def norm_bound_chain(g: Graph, p: AgentParams, tol: float = 1e-12) -> NormBoundChain:
    """Evaluate each inequality of the 2-norm argument for the sufficient condition.

    Links checked:

    * ``norm_a_le_sqrt``: ``||A|| <= sqrt(||A||_inf ||A||_1)`` (always true),
    * ``sqrt_eq_dmax``: that square root equals ``d_max`` for symmetric 0/1 ``A``,
    * ``scaled_norm_le_ratio``: ``||(D+I)^{-1} A|| <= d_max / (d_max + 1)``;
      this one can fail on irregular graphs because ``||(D+I)^{-1}||`` is
      ``1/(d_min+1)``, e.g. a star gives ``||(D+I)^{-1} A|| = 1``,
    * ``product_bound``: ``||A_u|| <= rho(G_u (D+I)) ||(D+I)^{-1} A||``,
    * ``rho_le_inf_norm``: ``rho(A_u) <= ||A_u||_inf = max_i gu_i d_i``, the row
      sum bound that does give ``rho(A_u) < 1`` under ``g_i <= d_i + 2``.
    """
    adj = g.adjacency.astype(float)
    d = degrees(g)
    norms = matrix_norms(adj)
    sqrt_inf_one = math.sqrt(norms.inf * norms.one)
    d_max = int(d.max()) if d.size else 0
    d_min = int(d.min()) if d.size else 0
    scaled = adj / (d + 1.0)[:, None]
    scaled_norm = two_norm(scaled)
    ratio = d_max / (d_max + 1.0)
    gains = manipulation_gain(p.g, d)
    gain_radius = float(np.max(gains * (d + 1.0))) if d.size else 0.0
    a_u = gains[:, None] * adj
    norm_a_u = two_norm(a_u)
    inf_a_u = matrix_norms(a_u).inf
    rho = spectral_radius_similar(adj, gains)
    links = {
        "norm_a_le_sqrt": norms.two <= sqrt_inf_one + tol,
        "sqrt_eq_dmax": abs(sqrt_inf_one - d_max) <= tol,
        "scaled_norm_le_ratio": scaled_norm <= ratio + tol,
        "product_bound": norm_a_u <= gain_radius * scaled_norm + tol,
        "rho_le_inf_norm": rho <= inf_a_u + tol,
    }
    return NormBoundChain(
        norm_a=norms.two,
        sqrt_inf_one=sqrt_inf_one,
        d_max=d_max,
        d_min=d_min,
        scaled_norm=scaled_norm,
        scaled_norm_bound=ratio,
        gain_radius=gain_radius,
        norm_a_u=norm_a_u,
        inf_norm_a_u=inf_a_u,
        rho_a_u=rho,
        links=links,
    )
