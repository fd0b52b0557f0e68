"""Feasibility and margin maximization for LMIs affine in a symmetric matrix P.

Two constraint shapes cover everything the package needs:

* ``LyapunovConstraint``:   A'P + PA + 2*lam*P + eps*I  <= 0
* ``BorderedConstraint``:   the dissipation LMI for (A, B, C, D) against a
  quadratic supply (Q, L, R), i.e.

      [ A'P + PA + 2 lam P - C'QC + eps I    PB - C'L - C'QD      ]
      [ B'P - L'C - D'QC                     -D'QD - L'D - D'L - R ]  <= 0

P is kept inside ``-norm_bound*I <= P <= norm_bound*I`` because the
dominance LMIs are homogeneous in P. The conic solve goes through cvxpy
(Clarabel by default); the verdict is always re-derived independently by
``verify_solution`` with plain numpy eigenvalues.
"""

from __future__ import annotations

import enum
import time
from dataclasses import dataclass, field

import cvxpy as cp
import numpy as np

from .errors import InputError
from .matrix_core import SymMatrix, max_eig_sym


class Objective(str, enum.Enum):
    FEASIBILITY = "feasibility"
    MAXIMIZE_MARGIN = "maximize_margin"


class Status(str, enum.Enum):
    FEASIBLE = "feasible"
    INFEASIBLE = "infeasible"
    NUMERIC_FAILURE = "numeric_failure"


def _mat(M, rows=None, cols=None, name="matrix"):
    A = np.atleast_2d(np.asarray(M, dtype=float))
    if rows is not None and A.shape[0] != rows:
        raise InputError(f"{name} has {A.shape[0]} rows, expected {rows}")
    if cols is not None and A.shape[1] != cols:
        raise InputError(f"{name} has {A.shape[1]} columns, expected {cols}")
    if not np.all(np.isfinite(A)):
        raise InputError(f"{name} has non-finite entries")
    return A


@dataclass(frozen=True, eq=False)
class LyapunovConstraint:
    A: np.ndarray
    lam: float = 0.0
    epsilon: float = 0.0

    def __post_init__(self):
        A = _mat(self.A, name="A")
        if A.shape[0] != A.shape[1]:
            raise InputError("A must be square")
        if self.lam < 0 or self.epsilon < 0:
            raise InputError("rate and epsilon must be nonnegative")
        object.__setattr__(self, "A", A)

    @property
    def n(self):
        return self.A.shape[0]

    @property
    def size(self):
        return self.n

    def residual(self, P, epsilon=None):
        eps = self.epsilon if epsilon is None else epsilon
        P = np.asarray(P, dtype=float)
        M = self.A.T @ P + P @ self.A + 2 * self.lam * P + eps * np.eye(self.n)
        return 0.5 * (M + M.T)

    def expression(self, P, eps):
        M = self.A.T @ P + P @ self.A + 2 * self.lam * P + eps * np.eye(self.n)
        return 0.5 * (M + M.T)

    def data_scale(self):
        return float(np.linalg.norm(self.A, 2)) + self.lam


@dataclass(frozen=True, eq=False)
class BorderedConstraint:
    """Dissipation LMI; ``supply`` is any object exposing ``Q``, ``L``, ``R``."""

    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    D: np.ndarray
    supply: object
    lam: float = 0.0
    epsilon: float = 0.0

    def __post_init__(self):
        A = _mat(self.A, name="A")
        n = A.shape[0]
        if A.shape[1] != n:
            raise InputError("A must be square")
        B = _mat(self.B, rows=n, name="B")
        m_u = B.shape[1]
        C = _mat(self.C, cols=n, name="C")
        m_y = C.shape[0]
        D = _mat(self.D, rows=m_y, cols=m_u, name="D")
        Q = _mat(self.supply.Q, m_y, m_y, "Q")
        L = _mat(self.supply.L, m_y, m_u, "L")
        R = _mat(self.supply.R, m_u, m_u, "R")
        if self.lam < 0 or self.epsilon < 0:
            raise InputError("rate and epsilon must be nonnegative")
        for k, v in dict(A=A, B=B, C=C, D=D).items():
            object.__setattr__(self, k, v)
        # constant parts of the bordered matrix (independent of P)
        object.__setattr__(self, "_K11", -C.T @ Q @ C)
        object.__setattr__(self, "_K12", -C.T @ L - C.T @ Q @ D)
        K22 = -D.T @ Q @ D - L.T @ D - D.T @ L - R
        object.__setattr__(self, "_K22", 0.5 * (K22 + K22.T))

    @property
    def n(self):
        return self.A.shape[0]

    @property
    def m_u(self):
        return self.B.shape[1]

    @property
    def size(self):
        return self.n + self.m_u

    def residual(self, P, epsilon=None):
        eps = self.epsilon if epsilon is None else epsilon
        P = np.asarray(P, dtype=float)
        n = self.n
        M11 = self.A.T @ P + P @ self.A + 2 * self.lam * P + self._K11 + eps * np.eye(n)
        M12 = P @ self.B + self._K12
        M = np.block([[M11, M12], [M12.T, self._K22]])
        return 0.5 * (M + M.T)

    def expression(self, P, eps):
        n = self.n
        M11 = self.A.T @ P + P @ self.A + 2 * self.lam * P + self._K11 + eps * np.eye(n)
        M12 = P @ self.B + self._K12
        M = cp.bmat([[M11, M12], [M12.T, cp.Constant(self._K22)]])
        return 0.5 * (M + M.T)

    def data_scale(self):
        parts = [np.linalg.norm(self.A, 2) + self.lam, np.linalg.norm(self.B, 2),
                 np.linalg.norm(self._K11, 2), np.linalg.norm(self._K12, 2),
                 np.linalg.norm(self._K22, 2)]
        return float(max(parts))


@dataclass(frozen=True, eq=False)
class SdpProblem:
    n: int
    constraints: tuple
    equalities: tuple = ()  # (i, j, value) pins on P entries
    norm_bound: float = 10.0
    objective: Objective = Objective.MAXIMIZE_MARGIN

    def __post_init__(self):
        cons = tuple(self.constraints)
        if not cons:
            raise InputError("SdpProblem needs at least one constraint")
        for c in cons:
            if c.n != self.n:
                raise InputError(f"constraint dimension {c.n} does not match n={self.n}")
        if not (np.isfinite(self.norm_bound) and self.norm_bound > 0):
            raise InputError("norm_bound must be finite and positive")
        eqs = tuple((int(i), int(j), float(v)) for i, j, v in self.equalities)
        for i, j, _ in eqs:
            if not (0 <= i < self.n and 0 <= j < self.n):
                raise InputError(f"equality pin ({i}, {j}) out of range")
        object.__setattr__(self, "constraints", cons)
        object.__setattr__(self, "equalities", eqs)
        object.__setattr__(self, "objective", Objective(self.objective))

    def scale(self) -> float:
        """Magnitude of LMI entries, used to scale residual tolerances."""
        data = max(c.data_scale() for c in self.constraints)
        return max(1.0, data) * max(1.0, self.norm_bound)


@dataclass(frozen=True)
class SolverSettings:
    residual_tol: float = 1e-7  # relative to SdpProblem.scale()
    max_iter: int = 200
    solver: str = "CLARABEL"
    feasibility_slack_cap: float = 1.0


@dataclass
class SdpResult:
    status: Status
    P: SymMatrix | None = None
    margin: float | None = None
    residuals: list[float] = field(default_factory=list)
    residual_tol: float = 0.0
    iterations: int | None = None
    solver_status: str = ""
    solve_time: float = 0.0

    @property
    def feasible(self) -> bool:
        return self.status is Status.FEASIBLE


def verify_solution(P, problem: SdpProblem) -> list[float]:
    """Largest eigenvalue of each constraint's residual matrix at ``P``."""
    P = np.asarray(P, dtype=float)
    if P.shape != (problem.n, problem.n):
        raise InputError(f"P has shape {P.shape}, expected {(problem.n, problem.n)}")
    return [max_eig_sym(c.residual(P)) for c in problem.constraints]


def solve(problem: SdpProblem, settings: SolverSettings | None = None) -> SdpResult:
    """Solve the LMI system in ``problem``.

    With ``MAXIMIZE_MARGIN`` the strictness of every constraint is replaced by
    a free scalar t (added to the state block) that is maximized; t* is the
    largest uniform epsilon reachable under the norm bound and is reported as
    ``margin``. With ``FEASIBILITY`` the requested epsilon is kept and a
    capped slack is maximized to steer away from the boundary.

    The returned status comes from ``verify_solution``: feasible iff every
    residual max-eigenvalue at the requested epsilon is below
    ``residual_tol * problem.scale()``.
    """
    settings = settings or SolverSettings()
    n = problem.n
    P = cp.Variable((n, n), symmetric=True)
    t = cp.Variable()
    cons = []
    for c in problem.constraints:
        E = np.zeros((c.size, c.size))
        E[:n, :n] = np.eye(n)
        if problem.objective is Objective.MAXIMIZE_MARGIN:
            expr = c.expression(P, 0.0) + t * E
        else:
            expr = c.expression(P, c.epsilon) + t * E
        cons.append(expr << 0)
    nb = problem.norm_bound
    cons += [P << nb * np.eye(n), P >> -nb * np.eye(n)]
    cons += [P[i, j] == v for i, j, v in problem.equalities]
    if problem.objective is Objective.FEASIBILITY:
        cons.append(t <= settings.feasibility_slack_cap)
    prob = cp.Problem(cp.Maximize(t), cons)

    tol = settings.residual_tol * problem.scale()
    t0 = time.perf_counter()
    try:
        opts = {"max_iter": settings.max_iter} if settings.solver == "CLARABEL" else {}
        prob.solve(solver=settings.solver, **opts)
    except cp.error.SolverError as exc:
        return SdpResult(Status.NUMERIC_FAILURE, residual_tol=tol,
                         solver_status=f"solver error: {exc}",
                         solve_time=time.perf_counter() - t0)
    elapsed = time.perf_counter() - t0
    stats = prob.solver_stats
    iters = getattr(stats, "num_iters", None) if stats is not None else None
    if P.value is None or prob.status not in (cp.OPTIMAL, cp.OPTIMAL_INACCURATE):
        status = Status.INFEASIBLE if prob.status in (cp.INFEASIBLE, cp.INFEASIBLE_INACCURATE) \
            else Status.NUMERIC_FAILURE
        return SdpResult(status, residual_tol=tol, iterations=iters,
                         solver_status=str(prob.status), solve_time=elapsed)

    Pval = SymMatrix(0.5 * (P.value + P.value.T))
    residuals = verify_solution(Pval.entries, problem)
    ok = max(residuals) <= tol
    if ok and problem.equalities:
        ok = all(abs(Pval.entries[i, j] - v) <= tol for i, j, v in problem.equalities)
    margin = float(t.value) if problem.objective is Objective.MAXIMIZE_MARGIN else None
    return SdpResult(
        Status.FEASIBLE if ok else Status.INFEASIBLE,
        P=Pval,
        margin=margin,
        residuals=residuals,
        residual_tol=tol,
        iterations=iters,
        solver_status=str(prob.status),
        solve_time=elapsed,
    )
