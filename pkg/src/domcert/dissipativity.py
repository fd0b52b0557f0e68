"""Differential p-dissipativity of open systems against quadratic supplies.

The supply on (dy, du) is

    s(dy, du) = dy'Q dy + 2 dy'L du + du'R du

and a storage P of inertia p certifies the open family when the bordered
LMI of ``sdp.BorderedConstraint`` holds at every vertex (A_i, B_i, C_i, D_i).
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from . import sdp
from .dominance import DEFAULT_EPSILON
from .errors import (BracketInvalid, InertiaMismatch, Infeasible, InputError,
                     VaryingOutputNotConvex)
from .matrix_core import SymMatrix, inertia_of, max_eig_sym


@dataclass(frozen=True, eq=False)
class SupplyRate:
    Q: np.ndarray
    L: np.ndarray
    R: np.ndarray

    def __post_init__(self):
        Q = np.atleast_2d(np.asarray(self.Q, dtype=float))
        L = np.atleast_2d(np.asarray(self.L, dtype=float))
        R = np.atleast_2d(np.asarray(self.R, dtype=float))
        m_y, m_u = L.shape
        if Q.shape != (m_y, m_y) or R.shape != (m_u, m_u):
            raise InputError(f"supply blocks Q{Q.shape}, L{L.shape}, R{R.shape} are inconsistent")
        if not (np.allclose(Q, Q.T, atol=1e-12) and np.allclose(R, R.T, atol=1e-12)):
            raise InputError("supply blocks Q and R must be symmetric")
        for k, v in dict(Q=0.5 * (Q + Q.T), L=L, R=0.5 * (R + R.T)).items():
            v.setflags(write=False)
            object.__setattr__(self, k, v)

    @property
    def m_y(self) -> int:
        return self.L.shape[0]

    @property
    def m_u(self) -> int:
        return self.L.shape[1]

    def __call__(self, dy, du) -> float:
        dy = np.atleast_1d(np.asarray(dy, dtype=float))
        du = np.atleast_1d(np.asarray(du, dtype=float))
        return float(dy @ self.Q @ dy + 2 * dy @ self.L @ du + du @ self.R @ du)

    def matrix(self) -> np.ndarray:
        return np.block([[self.Q, self.L], [self.L.T, self.R]])

    def to_dict(self) -> dict:
        return {"Q": self.Q.tolist(), "L": self.L.tolist(), "R": self.R.tolist()}

    @classmethod
    def from_dict(cls, d: dict) -> "SupplyRate":
        return cls(d["Q"], d["L"], d["R"])


def passivity_supply(m: int) -> SupplyRate:
    if m < 1:
        raise InputError("dimension must be >= 1")
    return SupplyRate(np.zeros((m, m)), np.eye(m), np.zeros((m, m)))


def gain_supply(m_y: int, m_u: int, gamma: float) -> SupplyRate:
    if not gamma > 0:
        raise InputError("gain must be positive")
    return SupplyRate(-np.eye(m_y), np.zeros((m_y, m_u)), gamma**2 * np.eye(m_u))


def scale_supply(s: SupplyRate, tau: float) -> SupplyRate:
    if not tau > 0:
        raise InputError("scale factor must be positive")
    return SupplyRate(tau * s.Q, tau * s.L, tau * s.R)


def zero_supply(m_y: int, m_u: int) -> SupplyRate:
    return SupplyRate(np.zeros((m_y, m_y)), np.zeros((m_y, m_u)), np.zeros((m_u, m_u)))


@dataclass(frozen=True, eq=False)
class OpenVertexFamily:
    vertices: tuple  # of (A, B, C, D)

    def __post_init__(self):
        if not self.vertices:
            raise InputError("OpenVertexFamily needs at least one vertex")
        vs = []
        for quad in self.vertices:
            if len(quad) != 4:
                raise InputError("each open vertex is a quadruple (A, B, C, D)")
            A, B, C, D = (np.atleast_2d(np.asarray(M, dtype=float)) for M in quad)
            vs.append((A, B, C, D))
        shapes = {tuple(M.shape for M in v) for v in vs}
        if len(shapes) != 1:
            raise InputError(f"inconsistent vertex block shapes: {sorted(shapes)}")
        (sa, sb, sc, sd), = shapes
        n = sa[0]
        if sa != (n, n) or sb[0] != n or sc[1] != n or sd != (sc[0], sb[1]):
            raise InputError(f"block shapes A{sa} B{sb} C{sc} D{sd} do not fit together")
        for v in vs:
            for M in v:
                M.setflags(write=False)
        object.__setattr__(self, "vertices", tuple(vs))

    @property
    def n(self) -> int:
        return self.vertices[0][0].shape[0]

    @property
    def m_u(self) -> int:
        return self.vertices[0][1].shape[1]

    @property
    def m_y(self) -> int:
        return self.vertices[0][2].shape[0]

    @property
    def varying_output(self) -> bool:
        C0, D0 = self.vertices[0][2], self.vertices[0][3]
        return any(not (np.array_equal(C, C0) and np.array_equal(D, D0))
                   for _, _, C, D in self.vertices[1:])

    def __len__(self):
        return len(self.vertices)

    def __iter__(self):
        return iter(self.vertices)


@dataclass(frozen=True, eq=False)
class DissipativityCertificate:
    P: SymMatrix
    p: int
    lam: float
    epsilon: float
    supply: SupplyRate
    margin: float

    @property
    def n(self) -> int:
        return self.P.n

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "p": self.p,
            "lambda": self.lam,
            "epsilon": self.epsilon,
            "margin": self.margin,
            "P": self.P.entries.ravel().tolist(),
            "supply": self.supply.to_dict(),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_dict(cls, d: dict) -> "DissipativityCertificate":
        n = int(d["n"])
        P = SymMatrix(np.asarray(d["P"], dtype=float).reshape(n, n))
        return cls(P, int(d["p"]), float(d["lambda"]), float(d["epsilon"]),
                   SupplyRate.from_dict(d["supply"]), float(d["margin"]))


def dissipativity_problem(family: OpenVertexFamily, supply: SupplyRate, lam: float,
                          epsilon: float, norm_bound: float = 10.0,
                          objective=sdp.Objective.MAXIMIZE_MARGIN) -> sdp.SdpProblem:
    if supply.m_y != family.m_y or supply.m_u != family.m_u:
        raise InputError(
            f"supply is {supply.m_y}x{supply.m_u} but family is {family.m_y}x{family.m_u}")
    cons = [sdp.BorderedConstraint(A, B, C, D, supply, lam, epsilon) for A, B, C, D in family]
    return sdp.SdpProblem(family.n, cons, norm_bound=norm_bound, objective=objective)


def solve_dissipativity(family: OpenVertexFamily, supply: SupplyRate, lam: float,
                        epsilon: float = DEFAULT_EPSILON, norm_bound: float = 10.0,
                        settings: sdp.SolverSettings | None = None,
                        ) -> DissipativityCertificate:
    """Storage certifying ``family`` dissipative for ``supply`` at rate ``lam``.

    Families whose C or D vary across vertices are only accepted for Q <= 0,
    where the bordered LMI is matrix-convex in (C, D) and vertex checks are
    sound.
    """
    if lam < 0 or epsilon < 0:
        raise InputError("rate and epsilon must be nonnegative")
    if family.varying_output and max_eig_sym(supply.Q) > 1e-12:
        raise VaryingOutputNotConvex(
            "C/D vary across vertices; vertex relaxation needs Q <= 0")
    problem = dissipativity_problem(family, supply, lam, epsilon, norm_bound)
    res = sdp.solve(problem, settings)
    if not res.feasible:
        raise Infeasible(f"no storage for this supply at rate {lam} (solver: {res.status.value})",
                         status=res.status.value, best_margin=res.margin)
    inertia = inertia_of(res.P)
    if inertia.zero != 0:
        raise InertiaMismatch("storage is singular", inertia=inertia)
    return DissipativityCertificate(res.P, inertia.neg, float(lam), float(epsilon), supply,
                                    max(res.residuals))


def _gain_probe(family, p, lam, epsilon, gamma, norm_bound):
    try:
        cert = solve_dissipativity(family, gain_supply(family.m_y, family.m_u, gamma), lam,
                                   epsilon, norm_bound)
    except (Infeasible, InertiaMismatch):
        return None
    return cert if cert.p == p else None


def min_gain(family: OpenVertexFamily, p: int, lam: float, epsilon: float = DEFAULT_EPSILON,
             gamma_bracket: tuple[float, float] = (1e-3, 100.0), tol: float = 1e-3,
             norm_bound: float = 10.0) -> tuple[float, DissipativityCertificate]:
    """Smallest differential gain of degree ``p`` at rate ``lam``, by bisection.

    A probe at gamma counts as feasible when the gain supply LMI is solved by
    a storage of inertia exactly p.
    """
    lo, hi = map(float, gamma_bracket)
    if not 0 < lo < hi:
        raise BracketInvalid(f"bracket ({lo}, {hi}) must satisfy 0 < lo < hi")
    try:
        cert = solve_dissipativity(family, gain_supply(family.m_y, family.m_u, hi), lam,
                                   epsilon, norm_bound)
    except Infeasible as exc:
        raise BracketInvalid(f"upper end gamma={hi} is infeasible") from exc
    if cert.p != p:
        raise InertiaMismatch(f"feasible storage at gamma={hi} has degree {cert.p}, not {p}",
                              inertia=inertia_of(cert.P))
    if _gain_probe(family, p, lam, epsilon, lo, norm_bound) is not None:
        raise BracketInvalid(f"lower end gamma={lo} is already feasible")
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        probe = _gain_probe(family, p, lam, epsilon, mid, norm_bound)
        if probe is None:
            lo = mid
        else:
            hi, cert = mid, probe
    return hi, cert


def pi_family(k_I: float, dkP_bounds: tuple[float, float]) -> OpenVertexFamily:
    """Integrator state with output k_I*x_c + k_P(u), slope of k_P in ``dkP_bounds``."""
    lo, hi = dkP_bounds
    if lo < 0 or hi < lo:
        raise InputError("proportional slope bounds must satisfy 0 <= lo <= hi")
    ds = [lo] if hi == lo else [lo, hi]
    return OpenVertexFamily([([[0.0]], [[1.0]], [[k_I]], [[d]]) for d in ds])


@dataclass(frozen=True)
class PiDegree:
    degree: int
    certificate: DissipativityCertificate | None
    note: str = ""


def pi_degree(k_I: float, dkP_bounds: tuple[float, float] = (0.0, 2.0), lam: float = 0.0,
              epsilon: float | None = None) -> PiDegree:
    """Passivity degree of a PI controller with monotone proportional term.

    Degree 0 for k_I >= 0 (rate 0), degree 1 for k_I < 0 (strict for lam > 0).
    With a zero-slope vertex the storage is pinned to P = k_I, so k_I = 0
    leaves only the singular storage and no certificate is returned.
    """
    fam = pi_family(k_I, dkP_bounds)
    if epsilon is None:
        epsilon = 0.0 if lam == 0 else min(DEFAULT_EPSILON, lam * abs(k_I))
    if k_I < 0 and lam == 0 and epsilon > 0:
        raise Infeasible("k_I < 0 needs a positive rate for strict passivity")
    if k_I == 0:
        return PiDegree(0, None, "pure proportional: storage is identically zero")
    cert = solve_dissipativity(fam, passivity_supply(1), lam, epsilon)
    return PiDegree(cert.p, cert)
