"""Composition of supplies and certificates across interconnections u = H y + v."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import block_diag

from . import sdp
from .dissipativity import (DissipativityCertificate, OpenVertexFamily, SupplyRate,
                            gain_supply, scale_supply)
from .dominance import DominanceCertificate, VertexFamily, lyapunov_problem
from .errors import AlgebraicLoop, CompositionUnsound, InputError, NotSatisfiable
from .matrix_core import SymMatrix, inertia_of, max_eig_sym


@dataclass(frozen=True, eq=False)
class ComposedSupply:
    supply: SupplyRate
    q_max_eig: float
    q_tol: float

    @property
    def q_negative_semidefinite(self) -> bool:
        return self.q_max_eig <= self.q_tol

    def to_dict(self) -> dict:
        return {**self.supply.to_dict(), "q_max_eig": self.q_max_eig,
                "q_negative_semidefinite": self.q_negative_semidefinite}


@dataclass(frozen=True, eq=False)
class InterconnectionSpec:
    supplies: tuple
    H: np.ndarray

    def __post_init__(self):
        sups = tuple(self.supplies)
        H = np.atleast_2d(np.asarray(self.H, dtype=float))
        m_u = sum(s.m_u for s in sups)
        m_y = sum(s.m_y for s in sups)
        if H.shape != (m_u, m_y):
            raise InputError(f"H must be {m_u}x{m_y}, got {H.shape}")
        object.__setattr__(self, "supplies", sups)
        object.__setattr__(self, "H", H)

    def compose(self) -> ComposedSupply:
        return compose_supplies(self.supplies, self.H)


def negative_feedback(m1: int, m2: int) -> np.ndarray:
    """H for u1 = -y2 + v1, u2 = y1 + v2 (m1 = dim y1 = dim u2)."""
    return np.block([[np.zeros((m2, m1)), -np.eye(m2)], [np.eye(m1), np.zeros((m1, m2))]])


def compose_supplies(supplies, H) -> ComposedSupply:
    """Supply of the interconnection on (dy, dv).

    Q = Qb + Lb H + H'Lb' + H'Rb H,  L = Lb + H'Rb,  R = Rb
    with the block-diagonal aggregates Qb, Lb, Rb.
    """
    supplies = list(supplies)
    if not supplies:
        raise InputError("need at least one supply")
    Qb = block_diag(*[s.Q for s in supplies])
    Lb = block_diag(*[s.L for s in supplies])
    Rb = block_diag(*[s.R for s in supplies])
    H = np.atleast_2d(np.asarray(H, dtype=float))
    if H.shape != (Lb.shape[1], Lb.shape[0]):
        raise InputError(f"H must be {Lb.shape[1]}x{Lb.shape[0]}, got {H.shape}")
    Q = Qb + Lb @ H + H.T @ Lb.T + H.T @ Rb @ H
    Q = 0.5 * (Q + Q.T)
    L = Lb + H.T @ Rb
    s = SupplyRate(Q, L, Rb)
    qmax = max_eig_sym(Q)
    return ComposedSupply(s, qmax, 1e-9 * (1 + float(np.linalg.norm(Q, 2))))


def feedback_compose(s1: SupplyRate, s2: SupplyRate) -> ComposedSupply:
    """Negative feedback u1 = -y2 + v1, u2 = y1 + v2."""
    if s1.m_u != s2.m_y or s2.m_u != s1.m_y:
        raise InputError("feedback needs dim u1 = dim y2 and dim u2 = dim y1")
    return compose_supplies([s1, s2], negative_feedback(s1.m_y, s2.m_y))


def small_gain_check(gamma1: float, gamma2: float, tol: float = 1e-9) -> float:
    """Scaling tau making the gain-supply feedback loop have Q <= 0.

    Any tau in [gamma1^2, 1/gamma2^2] works; the log-midpoint gamma1/gamma2 is
    returned. Raises ``NotSatisfiable`` when gamma1*gamma2 > 1 + tol.
    """
    if not (gamma1 > 0 and gamma2 > 0):
        raise InputError("gains must be positive")
    if gamma1 * gamma2 > 1 + tol:
        raise NotSatisfiable(f"gamma1*gamma2 = {gamma1 * gamma2:.6g} > 1")
    tau = gamma1 / gamma2
    comp = feedback_compose(gain_supply(1, 1, gamma1), scale_supply(gain_supply(1, 1, gamma2), tau))
    if comp.q_max_eig > max(comp.q_tol, 4 * tol * max(1.0, tau)):
        raise NotSatisfiable(f"composed Q has eigenvalue {comp.q_max_eig:.3g}")
    return tau


def _closed_loop_matrix(A, B, C, D, H):
    m = D.shape[0]
    M = np.eye(m) - D @ H
    return A + B @ H @ np.linalg.solve(M, C)


def build_closed_loop_family(fam1: OpenVertexFamily, fam2: OpenVertexFamily, H) -> VertexFamily:
    """Closed-loop Jacobians (v = 0) for every pair of subsystem vertices.

    The loop must be well posed with zero feedthrough on at least one side:
    D1*H12 and D2*H21 may not both be nonzero.
    """
    H = np.atleast_2d(np.asarray(H, dtype=float))
    m_u = fam1.m_u + fam2.m_u
    m_y = fam1.m_y + fam2.m_y
    if H.shape != (m_u, m_y):
        raise InputError(f"H must be {m_u}x{m_y}, got {H.shape}")
    H12 = H[:fam1.m_u, fam1.m_y:]
    H21 = H[fam1.m_u:, :fam1.m_y]
    out = []
    for (A1, B1, C1, D1), (A2, B2, C2, D2) in itertools.product(fam1, fam2):
        if np.any(D1 @ H12) and np.any(D2 @ H21):
            raise AlgebraicLoop("both feedthrough blocks are nonzero on the feedback path")
        out.append(_closed_loop_matrix(block_diag(A1, A2), block_diag(B1, B2),
                                       block_diag(C1, C2), block_diag(D1, D2), H))
    return VertexFamily(out)


def aggregate_certificates(c1: DissipativityCertificate, c2: DissipativityCertificate, H,
                           closed_family: VertexFamily, tol: float | None = None,
                           ) -> DominanceCertificate:
    """Block-diagonal storage P = diag(P1, P2) for the closed loop at v = 0.

    Requires a shared rate and composed Q <= 0; the aggregate is then checked
    directly against ``closed_family`` and rejected with
    ``CompositionUnsound`` if any vertex residual exceeds the tolerance.
    """
    if not math.isclose(c1.lam, c2.lam, rel_tol=0, abs_tol=1e-12):
        raise CompositionUnsound(f"rates differ: {c1.lam} vs {c2.lam}")
    comp = compose_supplies([c1.supply, c2.supply], H)
    if not comp.q_negative_semidefinite:
        raise CompositionUnsound(f"composed Q is not <= 0 (max eig {comp.q_max_eig:.3g})")
    P = block_diag(c1.P.entries, c2.P.entries)
    if closed_family.n != P.shape[0]:
        raise InputError(f"closed family has n={closed_family.n}, storage has {P.shape[0]}")
    eps = min(c1.epsilon, c2.epsilon)
    problem = lyapunov_problem(closed_family, c1.lam, eps)
    residuals = sdp.verify_solution(P, problem)
    if tol is None:
        tol = 1e-7 * problem.scale()
    if max(residuals) > tol:
        raise CompositionUnsound(f"aggregate storage fails closed-loop check by {max(residuals):.3g}")
    inertia = inertia_of(P)
    if inertia.neg != c1.p + c2.p or inertia.zero != 0:
        raise CompositionUnsound(f"aggregate inertia {tuple(inertia)} != {c1.p + c2.p}")
    return DominanceCertificate(SymMatrix(P), c1.p + c2.p, c1.lam, eps, max(residuals))
