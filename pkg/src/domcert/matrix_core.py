"""Dense real linear algebra: symmetric eigendecomposition, inertia, spectra.

Eigenvalue work is delegated to LAPACK through numpy (``syevd`` for the
symmetric case, Hessenberg reduction plus shifted QR via ``geev`` for the
general case). This module adds input checking, deterministic ordering and
the inertia bookkeeping used throughout the package.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .errors import InputError, NumericError

# relative asymmetry accepted before a matrix is rejected as non-symmetric
_SYM_RTOL = 1e-9


def _as_finite_array(M, name="matrix"):
    A = np.array(M, dtype=float)
    if A.ndim == 0:
        A = A.reshape(1, 1)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise InputError(f"{name} must be square, got shape {A.shape}")
    if A.shape[0] < 1:
        raise InputError(f"{name} must have dimension >= 1")
    if not np.all(np.isfinite(A)):
        raise InputError(f"{name} has non-finite entries")
    return A


@dataclass(frozen=True, eq=False)
class SymMatrix:
    """Real symmetric matrix with exactly mirrored storage.

    Construction accepts anything array-like whose asymmetry is within
    rounding; the stored entries are the symmetric part, so
    ``entries[i, j] == entries[j, i]`` holds bit for bit.
    """

    entries: np.ndarray

    def __post_init__(self):
        A = _as_finite_array(self.entries, "SymMatrix")
        scale = max(1.0, float(np.abs(A).max()))
        if np.abs(A - A.T).max() > _SYM_RTOL * scale:
            raise InputError("SymMatrix input is not symmetric")
        S = np.triu(A) + np.triu(A, 1).T
        S.setflags(write=False)
        object.__setattr__(self, "entries", S)

    @property
    def n(self) -> int:
        return self.entries.shape[0]

    def __array__(self, dtype=None, copy=None):
        return self.entries if dtype is None else self.entries.astype(dtype)

    def tolist(self):
        return self.entries.tolist()

    def __repr__(self):
        return f"SymMatrix({self.entries.tolist()!r})"


class Inertia(NamedTuple):
    neg: int
    zero: int
    pos: int


@dataclass(frozen=True)
class Spectrum:
    """Eigenvalues of a real square matrix, sorted by (real, imag)."""

    eigenvalues: np.ndarray

    @property
    def real(self) -> np.ndarray:
        return self.eigenvalues.real

    def count_right(self, shift: float = 0.0, band: float = 0.0) -> tuple[int, int, int]:
        """Counts of eigenvalues with Re > band, |Re| <= band, Re < -band after adding ``shift``."""
        re = self.eigenvalues.real + shift
        return int((re > band).sum()), int((np.abs(re) <= band).sum()), int((re < -band).sum())


def _sym_array(M) -> np.ndarray:
    if isinstance(M, SymMatrix):
        return M.entries
    return SymMatrix(M).entries


def sym_eigen(M) -> tuple[np.ndarray, np.ndarray]:
    """Eigenvalues (ascending) and orthonormal eigenvectors of a symmetric matrix."""
    A = _sym_array(M)
    try:
        w, V = np.linalg.eigh(A)
    except np.linalg.LinAlgError as exc:  # pragma: no cover - LAPACK failure
        raise NumericError(f"symmetric eigensolver failed: {exc}") from exc
    return w, V


def max_eig_sym(M) -> float:
    """Largest eigenvalue of a symmetric matrix."""
    return float(sym_eigen(M)[0][-1])


def default_zero_tol(M) -> float:
    A = _sym_array(M)
    return A.shape[0] * float(np.abs(A).sum(axis=1).max()) * 1e-9


def inertia_of(M, zero_tol: float | None = None) -> Inertia:
    """Signature of ``M``: eigenvalues below, within, and above ``±zero_tol``.

    The default tolerance is ``n * ||M||_inf * 1e-9``.
    """
    if zero_tol is None:
        zero_tol = default_zero_tol(M)
    if zero_tol < 0:
        raise InputError("zero_tol must be nonnegative")
    w, _ = sym_eigen(M)
    neg = int((w < -zero_tol).sum())
    pos = int((w > zero_tol).sum())
    return Inertia(neg, len(w) - neg - pos, pos)


def eig_general(A) -> Spectrum:
    """Eigenvalues of a real square matrix, conjugate pairs adjacent.

    Real eigenvalues come out with exactly zero imaginary part; complex pairs
    are made exact conjugates of each other.
    """
    A = _as_finite_array(A, "A")
    try:
        w = np.linalg.eigvals(A)
    except np.linalg.LinAlgError as exc:
        raise NumericError(f"QR iteration did not converge: {exc}") from exc
    w = np.asarray(w, dtype=complex)
    scale = max(1.0, float(np.abs(A).max()))
    # scrub rounding-level imaginary parts so real eigenvalues sort cleanly
    w = np.where(np.abs(w.imag) <= 1e-13 * scale, w.real + 0j, w)
    w = _pair_conjugates(w)
    order = np.lexsort((w.imag, w.real))
    return Spectrum(w[order])


def _pair_conjugates(w: np.ndarray) -> np.ndarray:
    out = w.copy()
    used = np.zeros(len(w), dtype=bool)
    for i in range(len(w)):
        if used[i] or w[i].imag == 0:
            continue
        used[i] = True
        cands = [j for j in range(len(w)) if not used[j] and w[j].imag != 0]
        if not cands:
            continue
        j = min(cands, key=lambda k: abs(w[k] - np.conj(w[i])))
        used[j] = True
        mid = 0.5 * (w[i] + np.conj(w[j]))
        out[i] = mid
        out[j] = np.conj(mid)
    return out
