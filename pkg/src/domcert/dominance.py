"""p-dominance: spectral splitting scans and vertex-relaxed LMI certificates.

A system is certified p-dominant with rate ``lam`` by a symmetric P of
inertia (p, 0, n-p) satisfying

    A_i' P + P A_i + 2 lam P + eps I <= 0

at every vertex A_i of a polytope containing the Jacobians. The inertia
constraint is not convex, so it is dropped from the solve and checked
afterwards against the eigenvalue split of each vertex: when every
``A_i + lam I`` splits p / n-p, all solutions share that inertia.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from . import sdp
from .errors import InertiaMismatch, Infeasible, InputError, NotFound
from .matrix_core import SymMatrix, eig_general, inertia_of

DEFAULT_EPSILON = 0.01


@dataclass(frozen=True, eq=False)
class VertexFamily:
    vertices: tuple

    def __post_init__(self):
        vs = tuple(np.array(A, dtype=float) for A in self.vertices)
        if not vs:
            raise InputError("VertexFamily needs at least one vertex")
        n = vs[0].shape[0]
        for A in vs:
            if A.shape != (n, n):
                raise InputError(f"vertex of shape {A.shape} in a family of dimension {n}")
            if not np.all(np.isfinite(A)):
                raise InputError("vertex has non-finite entries")
            A.setflags(write=False)
        object.__setattr__(self, "vertices", vs)

    @property
    def n(self) -> int:
        return self.vertices[0].shape[0]

    def __len__(self):
        return len(self.vertices)

    def __iter__(self):
        return iter(self.vertices)


@dataclass(frozen=True, eq=False)
class DominanceCertificate:
    P: SymMatrix
    p: int
    lam: float
    epsilon: float
    margin: float  # worst residual max-eigenvalue across vertices

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
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_dict(cls, d: dict) -> "DominanceCertificate":
        n = int(d["n"])
        P = SymMatrix(np.asarray(d["P"], dtype=float).reshape(n, n))
        return cls(P, int(d["p"]), float(d["lambda"]), float(d["epsilon"]), float(d["margin"]))

    @classmethod
    def from_json(cls, s: str) -> "DominanceCertificate":
        return cls.from_dict(json.loads(s))


@dataclass
class SplittingReport:
    lambda_grid: list[float]
    per_lambda: list[int | None]  # None means no consistent split
    intervals: list[tuple[float, float, int]] = field(default_factory=list)

    def split_at(self, lam: float) -> int | None:
        for g, s in zip(self.lambda_grid, self.per_lambda):
            if g == lam:
                return s
        raise KeyError(lam)

    def to_dict(self) -> dict:
        return {
            "lambda_grid": list(self.lambda_grid),
            "per_lambda": list(self.per_lambda),
            "intervals": [{"lo": lo, "hi": hi, "p": p} for lo, hi, p in self.intervals],
        }


def _band(A, margin_band):
    if margin_band is not None:
        return margin_band
    return 1e-6 * (1.0 + float(np.abs(A).sum(axis=1).max()))


def eigen_split(A, lam: float, margin_band: float | None = None) -> tuple[int, int, int]:
    """(right, near-axis, left) eigenvalue counts of ``A + lam*I``."""
    return eig_general(A).count_right(lam, _band(A, margin_band))


def lyapunov_problem(family: VertexFamily, lam: float, epsilon: float, norm_bound: float = 10.0,
                     objective=sdp.Objective.MAXIMIZE_MARGIN) -> sdp.SdpProblem:
    cons = [sdp.LyapunovConstraint(A, lam, epsilon) for A in family]
    return sdp.SdpProblem(family.n, cons, norm_bound=norm_bound, objective=objective)


def solve_dominance(family: VertexFamily, lam: float, epsilon: float = DEFAULT_EPSILON,
                    norm_bound: float = 10.0, settings: sdp.SolverSettings | None = None,
                    ) -> DominanceCertificate:
    """Common storage for all vertices of ``family`` at rate ``lam``.

    Raises ``Infeasible`` if the relaxed LMI has no solution and
    ``InertiaMismatch`` when the returned P is singular or its inertia does
    not match the spectral split of every vertex.
    """
    if lam < 0 or epsilon < 0:
        raise InputError("rate and epsilon must be nonnegative")
    if not isinstance(family, VertexFamily):
        family = VertexFamily(family)
    problem = lyapunov_problem(family, lam, epsilon, norm_bound)
    res = sdp.solve(problem, settings)
    if not res.feasible:
        splits = [eigen_split(A, lam) for A in family]
        raise Infeasible(
            f"no common storage at rate {lam} (solver: {res.status.value})",
            status=res.status.value, best_margin=res.margin, splits=splits,
        )
    inertia = inertia_of(res.P)
    splits = [eigen_split(A, lam) for A in family]
    if inertia.zero != 0:
        raise InertiaMismatch("storage is singular", inertia=inertia, splits=splits)
    bad = [s for s in splits if s[1] != 0 or s[0] != inertia.neg]
    if bad:
        raise InertiaMismatch(
            f"storage inertia {tuple(inertia)} disagrees with vertex splits {bad}",
            inertia=inertia, splits=splits,
        )
    return DominanceCertificate(res.P, inertia.neg, float(lam), float(epsilon), max(res.residuals))


def check_dominance_lti(A, p: int, lam: float, epsilon: float = DEFAULT_EPSILON,
                        norm_bound: float = 10.0) -> DominanceCertificate:
    """Certificate that ``dx/dt = A x`` is p-dominant with rate ``lam``.

    Feasibility is decided by the spectrum of ``A + lam*I`` (p eigenvalues
    strictly right, n-p strictly left of the axis); the LMI solve then has to
    agree, otherwise ``InertiaMismatch`` is raised.
    """
    A = np.asarray(A, dtype=float)
    n = A.shape[0]
    if not 0 <= p <= n:
        raise InputError(f"p must lie in [0, {n}]")
    right, axis, left = eig_general(A).count_right(lam, 0.0)
    if right != p or axis != 0:
        raise Infeasible(
            f"A + {lam} I splits {right}/{axis}/{left}, not {p}/0/{n - p}",
            split=(right, axis, left),
        )
    try:
        cert = solve_dominance(VertexFamily([A]), lam, epsilon, norm_bound)
    except Infeasible as exc:
        raise InertiaMismatch(f"spectrum splits {p}/{n - p} but the LMI solve failed: {exc}") from exc
    if cert.p != p:
        raise InertiaMismatch(f"certificate degree {cert.p} != {p}")
    return cert


def spectral_scan(samples, lambda_grid, margin_band: float | None = None) -> SplittingReport:
    """Count right-half-plane eigenvalues of ``A + lam*I`` across samples.

    A rate gets ``p`` only when every sample has exactly p eigenvalues with
    real part above ``margin_band`` and none within the band. Intervals are
    maximal runs of adjacent grid points with the same p; they are accurate
    to half a grid step.
    """
    samples = [np.asarray(A, dtype=float) for A in samples]
    grid = [float(g) for g in lambda_grid]
    if not samples or not grid:
        raise InputError("spectral_scan needs samples and a rate grid")
    spectra = [(eig_general(A), _band(A, margin_band)) for A in samples]
    per = []
    for lam in grid:
        counts = set()
        for spec, band in spectra:
            right, axis, _ = spec.count_right(lam, band)
            counts.add(right if axis == 0 else None)
        per.append(counts.pop() if len(counts) == 1 else None)
    intervals = []
    start = None
    for k, s in enumerate(per):
        if s is not None and (start is None or per[start] != s):
            if start is not None:
                intervals.append((grid[start], grid[k - 1], per[start]))
            start = k
        elif s is None and start is not None:
            intervals.append((grid[start], grid[k - 1], per[start]))
            start = None
    if start is not None:
        intervals.append((grid[start], grid[-1], per[start]))
    return SplittingReport(grid, per, intervals)


def rate_search(family: VertexFamily, p: int, lambda_grid, epsilon: float = DEFAULT_EPSILON,
                norm_bound: float = 10.0) -> tuple[float, DominanceCertificate]:
    """Best rate on ``lambda_grid`` for a degree-``p`` certificate.

    Rates whose vertex spectra do not split p / n-p are skipped; among the
    rates where the LMI is solved, the one with the most negative worst-case
    residual wins. Raises ``NotFound`` (with per-rate reasons) otherwise.
    """
    if not isinstance(family, VertexFamily):
        family = VertexFamily(family)
    grid = [float(g) for g in lambda_grid]
    if not grid:
        raise InputError("empty rate grid")
    report = spectral_scan(family.vertices, grid)
    best = None
    reasons = {}
    for lam, split in zip(grid, report.per_lambda):
        if split != p:
            reasons[lam] = f"spectral split {split}"
            continue
        try:
            cert = solve_dominance(family, lam, epsilon, norm_bound)
        except (Infeasible, InertiaMismatch) as exc:
            reasons[lam] = str(exc)
            continue
        if cert.p != p:
            reasons[lam] = f"certificate degree {cert.p}"
            continue
        if best is None or cert.margin < best[1].margin:
            best = (lam, cert)
    if best is None:
        raise NotFound(f"no degree-{p} certificate on the rate grid", reasons=reasons,
                       report=report.to_dict())
    return best
