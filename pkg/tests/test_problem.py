import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from inertial_pd.problem import (ConstrainedProblem, PrimalDualPoint, ProblemError, QuadraticObjective,
                                 example2_problem, generate_random_qp, grad_f, grad_x_auglag, kkt_residuals,
                                 lagrangian, minimal_norm_solution, solve_saddle_point, tikhonov_path_point)


def _problems():
    return [
        ConstrainedProblem(QuadraticObjective(np.eye(2), np.zeros(2)), np.array([[1.0, 1.0]]), np.array([2.0])),
        example2_problem(5, 1, 1),
        example2_problem(120, 5, 25),
        generate_random_qp(8, 3, 1),
        generate_random_qp(6, 6, 2, mode="orthogonal-square"),
    ]


class TestGradF:
    def test_zero_at_origin(self):
        p = ConstrainedProblem(QuadraticObjective(np.eye(2), np.zeros(2)), np.zeros((0, 2)), np.zeros(0))
        np.testing.assert_array_equal(grad_f(p, [0, 0]), [0, 0])

    def test_example2_solution(self, ex2):
        np.testing.assert_allclose(grad_f(ex2, [1, 0, -5]), 0, atol=1e-12)

    def test_diagonal(self):
        p = ConstrainedProblem(QuadraticObjective(np.diag([2.0, 4.0]), np.array([1.0, -1.0])),
                               np.zeros((0, 2)), np.zeros(0))
        np.testing.assert_allclose(grad_f(p, [1, 1]), [3, 3])

    def test_dimension_mismatch(self, ex2):
        with pytest.raises(ProblemError):
            grad_f(ex2, [1, 2])


class TestLagrangian:
    def test_feasible_point_gives_objective(self, simple_problem):
        x = np.array([0.5, 1.5])
        for lam, rho in [(3.0, 0.0), (-2.0, 5.0)]:
            assert lagrangian(simple_problem, x, [lam], rho) == pytest.approx(simple_problem.f(x))

    def test_example2_origin(self, ex2):
        assert lagrangian(ex2, [0, 0, 0], [1], 1) == 0.0

    def test_hand_value(self, simple_problem):
        # 0 + 1 * (0 - 2) + 1/2 * 4
        assert lagrangian(simple_problem, [0, 0], [1], 1) == pytest.approx(0.0)

    def test_negative_rho(self, simple_problem):
        with pytest.raises(ProblemError):
            lagrangian(simple_problem, [0, 0], [1], -1)

    @pytest.mark.parametrize("problem", _problems(), ids=lambda p: f"n{p.n}m{p.m}")
    def test_convex_in_x(self, problem):
        rng = np.random.default_rng(0)
        lam = rng.standard_normal(problem.m)
        for _ in range(100):
            x, y = rng.standard_normal((2, problem.n)) * 3
            mid = lagrangian(problem, (x + y) / 2, lam, 1.0)
            avg = (lagrangian(problem, x, lam, 1.0) + lagrangian(problem, y, lam, 1.0)) / 2
            assert mid <= avg + 1e-9 * (1 + abs(avg))


class TestGradAuglag:
    def test_zero_at_saddle(self, simple_problem):
        for rho in (0.0, 1.0, 7.5):
            np.testing.assert_allclose(grad_x_auglag(simple_problem, [1, 1], [-1], rho), 0, atol=1e-14)

    def test_example2_hand_value(self, ex2):
        np.testing.assert_allclose(grad_x_auglag(ex2, [1, 1, -1], [1], 1), [70, 6, 14])

    def test_zero_problem(self):
        p = ConstrainedProblem(QuadraticObjective(np.zeros((3, 3)), np.zeros(3)), np.zeros((2, 3)), np.zeros(2))
        rng = np.random.default_rng(1)
        for _ in range(5):
            np.testing.assert_array_equal(grad_x_auglag(p, rng.standard_normal(3), rng.standard_normal(2), 2.0), 0)

    @pytest.mark.parametrize("problem", _problems(), ids=lambda p: f"n{p.n}m{p.m}")
    def test_matches_finite_differences(self, problem):
        rng = np.random.default_rng(3)
        x, lam, rho = rng.standard_normal(problem.n), rng.standard_normal(problem.m), 1.3
        g = grad_x_auglag(problem, x, lam, rho)
        h = 1e-5
        fd = np.array([(lagrangian(problem, x + h * e, lam, rho) - lagrangian(problem, x - h * e, lam, rho)) / (2 * h)
                       for e in np.eye(problem.n)])
        assert np.linalg.norm(fd - g) <= 1e-6 * max(1.0, np.linalg.norm(g))


class TestKKT:
    def test_example2_solution(self, ex2):
        assert kkt_residuals(ex2, PrimalDualPoint(np.array([1.0, 0, -5]), np.array([0.0]))) == pytest.approx((0, 0))

    def test_simple_saddle(self, simple_problem):
        assert kkt_residuals(simple_problem, PrimalDualPoint(np.ones(2), -np.ones(1))) == pytest.approx((0, 0))

    def test_definition_with_zero_multiplier(self, simple_problem):
        x = np.array([3.0, -1.0])
        stat, feas = kkt_residuals(simple_problem, PrimalDualPoint(x, np.zeros(1)))
        assert stat == pytest.approx(np.linalg.norm(x))
        assert feas == pytest.approx(0.0)


class TestSaddle:
    def test_simple(self, simple_problem):
        cert = solve_saddle_point(simple_problem)
        np.testing.assert_allclose(cert.x, [1, 1], atol=1e-12)
        np.testing.assert_allclose(cert.lam, [-1], atol=1e-12)
        assert not cert.rank_deficient

    def test_example2_singular(self, ex2):
        cert = solve_saddle_point(ex2)
        assert cert.rank_deficient
        x1 = cert.x[0]
        np.testing.assert_allclose(cert.x, [x1, 0, -5 * x1], atol=1e-10)
        np.testing.assert_allclose(cert.lam, [0], atol=1e-10)
        assert cert.stationarity_residual < 1e-10 and cert.feasibility_residual < 1e-10

    def test_unconstrained(self):
        p = ConstrainedProblem(QuadraticObjective(np.eye(4), np.zeros(4)), np.zeros((0, 4)), np.zeros(0))
        np.testing.assert_allclose(solve_saddle_point(p).x, 0, atol=1e-14)

    @pytest.mark.parametrize("problem", _problems(), ids=lambda p: f"n{p.n}m{p.m}")
    def test_certificate_residuals_recomputable(self, problem):
        cert = solve_saddle_point(problem)
        tol = 1e-8 * (1 + np.linalg.norm(problem.q) + np.linalg.norm(problem.b))
        stat, feas = kkt_residuals(problem, cert.point)
        assert (stat, feas) == (cert.stationarity_residual, cert.feasibility_residual)
        assert stat <= tol and feas <= tol

    def test_unbounded_problem_has_no_saddle(self):
        # linear objective along the feasible line: no minimizer
        p = ConstrainedProblem(QuadraticObjective(np.zeros((2, 2)), np.array([1.0, 0.0])),
                               np.array([[0.0, 1.0]]), np.array([1.0]))
        with pytest.raises(ProblemError, match="stationarity"):
            solve_saddle_point(p)

    def test_infeasible_constraints_rejected(self):
        with pytest.raises(ProblemError, match="infeasible"):
            ConstrainedProblem(QuadraticObjective(np.eye(2), np.zeros(2)),
                               np.array([[1.0, 1.0], [1.0, 1.0]]), np.array([0.0, 1.0]))


class TestTikhonovPath:
    def test_hand_value(self, simple_problem):
        np.testing.assert_allclose(tikhonov_path_point(simple_problem, 1.0, 1.0, [-1]), [0.75, 0.75])

    @pytest.mark.parametrize("eps", [1.0, 1e-2, 1e-5])
    def test_closed_form(self, simple_problem, eps):
        np.testing.assert_allclose(tikhonov_path_point(simple_problem, 1.0, eps, [-1]), 3 / (3 + eps) * np.ones(2))

    def test_large_eps_goes_to_zero(self, random_qp):
        lam = solve_saddle_point(random_qp).lam
        assert np.linalg.norm(tikhonov_path_point(random_qp, 1.0, 1e12, lam)) < 1e-9

    @pytest.mark.parametrize("problem", _problems(), ids=lambda p: f"n{p.n}m{p.m}")
    def test_stationarity(self, problem):
        lam = solve_saddle_point(problem).lam
        x = tikhonov_path_point(problem, 1.0, 1e-3, lam)
        g = grad_x_auglag(problem, x, lam, 1.0) + 1e-3 * x
        assert np.linalg.norm(g) <= 1e-10 * (1 + np.linalg.norm(problem.q)) * max(1.0, problem.lipschitz)

    @pytest.mark.parametrize("problem", _problems()[:4], ids=lambda p: f"n{p.n}m{p.m}")
    def test_norm_bound_and_monotone_approach(self, problem):
        cert = solve_saddle_point(problem)
        xbar = minimal_norm_solution(problem, saddle=cert)
        prev = np.inf
        for eps in (1.0, 1e-1, 1e-2, 1e-3, 1e-4):
            x = tikhonov_path_point(problem, 1.0, eps, cert.lam)
            assert np.linalg.norm(x) <= np.linalg.norm(xbar) + 1e-12
            d = np.linalg.norm(x - xbar)
            assert d <= prev + 1e-9
            prev = d

    def test_rejects_nonpositive(self, simple_problem):
        with pytest.raises(ProblemError):
            tikhonov_path_point(simple_problem, 1.0, 0.0, [-1])


class TestMinimalNorm:
    def test_example2(self, ex2):
        np.testing.assert_allclose(minimal_norm_solution(ex2), 0, atol=1e-12)

    def test_example2_unit_coefficients(self):
        np.testing.assert_allclose(minimal_norm_solution(example2_problem(1, 1, 1)), 0, atol=1e-12)

    def test_unique_solution_matches_saddle(self, random_qp):
        cert = solve_saddle_point(random_qp)
        np.testing.assert_allclose(minimal_norm_solution(random_qp, saddle=cert), cert.x, atol=1e-8)

    def test_projection_of_origin_onto_line(self):
        # f = (x1 + x2)^2 with x3 = 1 forced: S = {(s, -s, 1)}, closest to 0 is (0, 0, 1)
        c = np.array([1.0, 1.0, 0.0])
        p = ConstrainedProblem(QuadraticObjective(2 * np.outer(c, c), np.zeros(3)),
                               np.array([[0.0, 0.0, 1.0]]), np.array([1.0]))
        np.testing.assert_allclose(minimal_norm_solution(p), [0, 0, 1], atol=1e-9)

    def test_matches_pseudoinverse_oracle(self):
        # rank-deficient Q with a shifted solution set; oracle: least-norm solution of the
        # stacked optimality conditions Qx = -q - A^T lam, Ax = b
        rng = np.random.default_rng(5)
        B = rng.standard_normal((2, 5))
        Q = B.T @ B
        A = rng.standard_normal((1, 5))
        x0 = rng.standard_normal(5)
        p = ConstrainedProblem(QuadraticObjective(Q, -Q @ x0), A, A @ x0)
        # S = {x : Bx = Bx0, Ax = Ax0}
        M = np.vstack([B, A])
        expected = np.linalg.pinv(M) @ (M @ x0)
        np.testing.assert_allclose(minimal_norm_solution(p), expected, atol=1e-7)


class TestGenerators:
    def test_deterministic(self):
        a, b = generate_random_qp(50, 20, 7), generate_random_qp(50, 20, 7)
        for k in ("Q", "q", "A", "b"):
            np.testing.assert_array_equal(getattr(a, k), getattr(b, k))

    def test_orthogonal(self):
        p = generate_random_qp(12, 12, 3, mode="orthogonal-square")
        assert np.max(np.abs(p.A.T @ p.A - np.eye(12))) <= 1e-10

    @given(st.integers(0, 2**31 - 1))
    @settings(max_examples=20, deadline=None)
    def test_q_floor(self, seed):
        p = generate_random_qp(10, 4, seed)
        assert np.linalg.eigvalsh(p.Q).min() >= 0.01 - 1e-9

    def test_b_uniform_range(self):
        p = generate_random_qp(30, 30, 0)
        assert np.all((p.b >= 0) & (p.b < 1))

    @pytest.mark.parametrize("args", [(3, 5, 0, "general"), (4, 3, 0, "orthogonal-square"), (3, 3, 0, "bogus")])
    def test_invalid(self, args):
        with pytest.raises(ProblemError):
            generate_random_qp(*args)

    def test_example2_structure(self):
        p = example2_problem(5, 1, 1)
        x = np.array([1.0, 0.0, -5.0])
        assert p.f(x) == 0.0
        np.testing.assert_array_equal(p.A @ x, [0.0])

    def test_example2_lipschitz(self):
        assert example2_problem(1, 1, 1).lipschitz == pytest.approx(6.0)

    def test_example2_zero_coefficient(self):
        with pytest.raises(ProblemError):
            example2_problem(0, 1, 1)


def test_json_round_trip(tmp_path, random_qp):
    path = tmp_path / "p.json"
    random_qp.save(path)
    d = json.loads(path.read_text())
    assert list(d) == ["n", "m", "Q", "q", "A", "b", "lipschitz"]
    back = ConstrainedProblem.load(path)
    for k in ("Q", "q", "A", "b"):
        a, b = getattr(random_qp, k), getattr(back, k)
        assert np.max(np.abs(a - b)) <= 1e-15 * max(1.0, np.max(np.abs(a)))


def test_asymmetric_q_rejected():
    with pytest.raises(ProblemError, match="symmetric"):
        QuadraticObjective(np.array([[1.0, 1.0], [0.0, 1.0]]), np.zeros(2))


def test_indefinite_q_rejected():
    with pytest.raises(ProblemError, match="semidefinite"):
        QuadraticObjective(np.diag([1.0, -1.0]), np.zeros(2))
