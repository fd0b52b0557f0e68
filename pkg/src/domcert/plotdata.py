"""Tabular data behind eigenvalue-locus, cone and trajectory plots."""

from __future__ import annotations

import numpy as np

from ._io import atomic_write_text
from .errors import InputError
from .matrix_core import eig_general


def _csv(header, rows) -> str:
    lines = [",".join(header)]
    lines += [",".join(f"{v:.12g}" if isinstance(v, float) else str(v) for v in r) for r in rows]
    return "\n".join(lines) + "\n"


def eigen_locus(samples) -> list[tuple[int, float, float]]:
    """(sample index, real part, imaginary part) for every eigenvalue of every sample."""
    rows = []
    for k, A in enumerate(samples):
        for z in eig_general(A).eigenvalues:
            rows.append((k, float(z.real), float(z.imag)))
    return rows


def eigen_locus_csv(samples) -> str:
    return _csv(("sample", "re", "im"), eigen_locus(samples))


def _planar(P):
    P = np.asarray(P, dtype=float)
    if P.shape != (2, 2):
        raise InputError("cone plots need a 2x2 storage")
    return P


def cone_boundary(P) -> list[float]:
    """Angles in [0, pi) of the lines where dx' P dx = 0."""
    P = _planar(P)
    a, b, c = P[0, 0], P[0, 1] + P[1, 0], P[1, 1]
    # a cos^2 + b cos sin + c sin^2 = 0
    if abs(c) > 1e-14:
        roots = np.roots([c, b, a])  # in t = tan(theta)
        out = [float(np.arctan(t.real)) % np.pi for t in roots if abs(t.imag) < 1e-12]
    else:
        out = [np.pi / 2] + ([float(np.arctan(-a / b)) % np.pi] if abs(b) > 1e-14 else [])
    return sorted(set(out))


def negative_arc(P, num: int = 360) -> list[tuple[float, float, float]]:
    """Unit-circle points (theta, x1, x2) inside the cone dx' P dx <= 0."""
    P = _planar(P)
    th = np.linspace(0.0, 2 * np.pi, num, endpoint=False)
    X = np.stack([np.cos(th), np.sin(th)], axis=1)
    V = np.einsum("ij,jk,ik->i", X, P, X)
    return [(float(t), float(x[0]), float(x[1])) for t, x, v in zip(th, X, V) if v <= 0]


def negative_arc_csv(P, num: int = 360) -> str:
    return _csv(("theta", "x1", "x2"), negative_arc(P, num))


def write(path, text: str):
    return atomic_write_text(path, text)
