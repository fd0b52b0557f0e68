import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from domcert.errors import InputError
from domcert.matrix_core import (Inertia, SymMatrix, default_zero_tol, eig_general, inertia_of,
                                 max_eig_sym, sym_eigen)

finite = st.floats(-10, 10, allow_nan=False, allow_infinity=False)


def square(n_max=5):
    return st.integers(1, n_max).flatmap(lambda n: arrays(float, (n, n), elements=finite))


class TestSymMatrix:
    def test_mirrors_storage_exactly(self):
        S = SymMatrix([[1.0, 2.0 + 1e-12], [2.0, 3.0]])
        assert S.entries[0, 1] == S.entries[1, 0]
        assert S.n == 2

    def test_rejects_asymmetric(self):
        with pytest.raises(InputError):
            SymMatrix([[1.0, 2.0], [0.0, 1.0]])

    def test_rejects_non_finite_and_non_square(self):
        with pytest.raises(InputError):
            SymMatrix([[np.nan]])
        with pytest.raises(InputError):
            SymMatrix(np.zeros((2, 3)))

    def test_read_only(self):
        S = SymMatrix(np.eye(2))
        with pytest.raises(ValueError):
            S.entries[0, 0] = 5.0


class TestInertia:
    def test_paper_style_storage(self):
        assert inertia_of([[-5.1987, 3.6260], [3.6260, 6.1987]]) == Inertia(1, 0, 1)

    def test_zero_band(self):
        assert inertia_of(np.diag([-1.0, 1e-15, 2.0])) == Inertia(1, 1, 1)
        assert inertia_of(np.diag([-1.0, 1e-15, 2.0]), zero_tol=0.0) == Inertia(1, 0, 2)

    def test_default_tolerance_formula(self):
        M = np.array([[2.0, -1.0], [-1.0, 3.0]])
        assert default_zero_tol(M) == pytest.approx(2 * 4.0 * 1e-9)

    def test_negative_tolerance_rejected(self):
        with pytest.raises(InputError):
            inertia_of(np.eye(2), zero_tol=-1.0)

    @given(square())
    @settings(max_examples=60, deadline=None)
    def test_counts_sum_to_n_and_congruence_invariance(self, A):
        M = A + A.T
        n = M.shape[0]
        ine = inertia_of(M)
        assert sum(ine) == n
        # Sylvester: congruence by a well-conditioned matrix keeps inertia
        rng = np.random.default_rng(0)
        Qm, _ = np.linalg.qr(rng.normal(size=(n, n)))
        T = Qm @ np.diag(rng.uniform(0.5, 2.0, n))
        w = np.linalg.eigvalsh(M)
        gap = np.min(np.abs(w)) if n else 1
        if gap > 1e-3:
            assert inertia_of(T.T @ M @ T) == ine

    @given(square())
    @settings(max_examples=40, deadline=None)
    def test_negation_swaps(self, A):
        M = A + A.T
        ine = inertia_of(M)
        assert inertia_of(-M) == Inertia(ine.pos, ine.zero, ine.neg)


class TestEigen:
    def test_sym_eigen_reconstructs(self):
        M = np.array([[4.0, 1.0, 0.5], [1.0, 3.0, 0.0], [0.5, 0.0, -2.0]])
        w, V = sym_eigen(M)
        assert np.all(np.diff(w) >= 0)
        np.testing.assert_allclose(V @ np.diag(w) @ V.T, M, atol=1e-12)
        assert max_eig_sym(M) == pytest.approx(w[-1])

    def test_quadratic_formula_oracle(self):
        # [[0,1],[-k,-c]] has roots (-c +- sqrt(c^2 - 4k)) / 2
        for k, c in [(5.0, 5.0), (-2.0, 5.0), (1.0, 5.0), (10.0, 1.0)]:
            disc = complex(c * c - 4 * k) ** 0.5
            expected = sorted([(-c - disc) / 2, (-c + disc) / 2], key=lambda z: (z.real, z.imag))
            got = eig_general([[0.0, 1.0], [-k, -c]]).eigenvalues
            np.testing.assert_allclose(got, expected, atol=1e-12)

    def test_real_eigenvalues_have_zero_imaginary_part(self):
        spec = eig_general([[0.0, 1.0], [-5.0, -5.0]])
        assert np.all(spec.eigenvalues.imag == 0)
        assert spec.count_right(2.0) == (1, 0, 1)
        assert spec.count_right(0.0) == (0, 0, 2)

    def test_axis_band(self):
        spec = eig_general(np.diag([-1.0, 0.0, 1.0]))
        assert spec.count_right(0.0, 1e-9) == (1, 1, 1)

    @given(square())
    @settings(max_examples=60, deadline=None)
    def test_conjugate_pairs_exact_and_sorted(self, A):
        w = eig_general(A).eigenvalues
        assert np.isclose(np.sum(w), np.trace(A), atol=1e-8 * (1 + np.abs(A).sum()))
        cplx = w[w.imag != 0]
        for z in cplx:
            assert np.any(cplx == np.conj(z))
        keys = [(z.real, z.imag) for z in w]
        assert keys == sorted(keys)

    def test_rejects_bad_input(self):
        with pytest.raises(InputError):
            eig_general([[1.0, np.inf], [0.0, 1.0]])
        with pytest.raises(InputError):
            eig_general(np.zeros((0, 0)))
