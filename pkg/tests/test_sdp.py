import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.linalg import solve_continuous_lyapunov

from domcert import sdp
from domcert.dissipativity import passivity_supply
from domcert.errors import InputError

ROT = np.array([[0.0, 1.0], [-1.0, 0.0]])


def lyap(As, lam=0.0, eps=0.01, **kw):
    return sdp.SdpProblem(len(As[0]), [sdp.LyapunovConstraint(A, lam, eps) for A in As], **kw)


class TestConstraints:
    def test_lyapunov_residual_matches_formula(self):
        A = np.array([[0.0, 1.0], [-2.0, -3.0]])
        P = np.array([[2.0, 0.5], [0.5, 1.0]])
        c = sdp.LyapunovConstraint(A, 0.5, 0.1)
        np.testing.assert_allclose(c.residual(P), A.T @ P + P @ A + P + 0.1 * np.eye(2))

    def test_bordered_reduces_to_passivity_block(self):
        A, B, C = np.array([[-1.0]]), np.array([[1.0]]), np.array([[2.0]])
        c = sdp.BorderedConstraint(A, B, C, np.zeros((1, 1)), passivity_supply(1), 0.0, 0.0)
        M = c.residual(np.array([[3.0]]))
        np.testing.assert_allclose(M, [[-6.0, 3.0 - 2.0], [1.0, 0.0]])

    def test_shape_errors(self):
        with pytest.raises(InputError):
            sdp.LyapunovConstraint(np.zeros((2, 3)))
        with pytest.raises(InputError):
            sdp.BorderedConstraint(np.eye(2), np.ones((3, 1)), np.ones((1, 2)), np.zeros((1, 1)),
                                   passivity_supply(1))
        with pytest.raises(InputError):
            sdp.LyapunovConstraint(np.eye(2), lam=-1.0)
        with pytest.raises(InputError):
            sdp.SdpProblem(3, [sdp.LyapunovConstraint(np.eye(2))])
        with pytest.raises(InputError):
            sdp.SdpProblem(2, [sdp.LyapunovConstraint(np.eye(2))], norm_bound=np.inf)


class TestSolve:
    def test_stable_matrix_feasible_and_verified(self):
        A = np.array([[0.0, 1.0], [-2.0, -3.0]])
        res = sdp.solve(lyap([A]))
        assert res.feasible
        assert max(res.residuals) <= res.residual_tol
        np.testing.assert_allclose(res.residuals, sdp.verify_solution(res.P.entries, lyap([A])))

    def test_lyapunov_equation_solution_is_certificate(self):
        # independent oracle: A'P + PA = -I, scaled into the norm ball
        A = np.array([[0.0, 1.0], [-2.0, -3.0]])
        P = solve_continuous_lyapunov(A.T, -np.eye(2))
        assert max(sdp.verify_solution(P, lyap([A], eps=0.5))) == pytest.approx(-0.5, abs=1e-9)

    @pytest.mark.parametrize("a,lam", [(1.0, 0.0), (3.0, 0.5), (0.2, 1.0)])
    def test_scalar_margin_closed_form(self, a, lam):
        # 2(lam - a) P + t <= 0 with |P| <= 10 gives t* = 20 |a - lam|
        res = sdp.solve(lyap([np.array([[-a]])], lam=lam))
        assert res.feasible
        assert res.margin == pytest.approx(20 * abs(a - lam), rel=1e-5)

    def test_rotation_infeasible_brute_force_oracle(self):
        # skew A: trace(A'P + PA) = 0 for every symmetric P, so no P reaches -eps
        grid = np.linspace(-10, 10, 21)
        best = min(np.linalg.eigvalsh(ROT.T @ P + P @ ROT).max()
                   for a, b, c in itertools.product(grid, grid, grid)
                   for P in [np.array([[a, b], [b, c]])])
        assert best >= 0.0
        res = sdp.solve(lyap([ROT]))
        assert res.status is sdp.Status.INFEASIBLE

    def test_feasibility_objective_keeps_epsilon(self):
        A = np.array([[-1.0, 0.0], [0.0, -2.0]])
        res = sdp.solve(lyap([A], objective=sdp.Objective.FEASIBILITY))
        assert res.feasible and res.margin is None

    def test_equality_pins(self):
        A = np.array([[-1.0, 0.0], [0.0, -2.0]])
        res = sdp.solve(lyap([A], equalities=[(0, 0, 1.5)]))
        assert res.feasible
        assert res.P.entries[0, 0] == pytest.approx(1.5, abs=1e-6)

    def test_norm_bound_respected(self):
        res = sdp.solve(lyap([np.array([[-1.0]])], norm_bound=2.0))
        assert abs(res.P.entries[0, 0]) <= 2.0 + 1e-6

    def test_unknown_solver_is_numeric_failure(self):
        res = sdp.solve(lyap([np.array([[-1.0]])]), sdp.SolverSettings(solver="NOT_A_SOLVER"))
        assert res.status is sdp.Status.NUMERIC_FAILURE


@given(st.floats(0.1, 5.0), st.floats(0.05, 2.0))
@settings(max_examples=30, deadline=None)
def test_residual_homogeneous_in_P(c, eps):
    # scaling (P, eps) by c > 0 scales every residual eigenvalue by c
    A = np.array([[0.0, 1.0], [-3.0, -4.0]])
    P = solve_continuous_lyapunov(A.T, -np.eye(2))
    prob1 = lyap([A], eps=eps)
    prob2 = lyap([A], eps=c * eps)
    r1 = sdp.verify_solution(P, prob1)
    r2 = sdp.verify_solution(c * P, prob2)
    np.testing.assert_allclose(r2, c * np.asarray(r1), rtol=1e-9, atol=1e-12)
