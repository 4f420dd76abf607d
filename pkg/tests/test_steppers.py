"""Step schemes, the lambda schedule, run_path bookkeeping, and initializers."""

import numpy as np
import pytest

from pathode import (
    DegenerateProblemError,
    DomainError,
    ExactDirections,
    OracleCounters,
    StepperConfig,
    build_moment_problem,
    decay_polynomial,
    euler_step,
    initialize_by_newton,
    initialize_from_omega,
    make_logistic_reweighted,
    make_moment_matching,
    make_quadratic_ridge,
    residual_norm,
    rk4_step,
    run_path,
    stepsize,
    trapezoid_step,
    vector_field,
)
from pathode.datasets import generate_synthetic_logistic

from conftest import fit_loglog_slope


def exact_directions():
    return ExactDirections(OracleCounters())


@pytest.fixture(scope="module")
def pure_scalar():
    """f = Omega = x^2/2; the ODE direction is -x/(1+lambda)."""
    return make_quadratic_ridge(np.array([[1.0]]), np.array([0.0]))


# ------------------------------------------------------------ lambda schedule


class TestStepsize:
    def test_euler_decay_closes_the_range(self):
        for K in (7, 50, 311):
            h = stepsize("euler", K, 0.01, 10.0)
            assert (1.0 - h) ** K == pytest.approx(1e-3, rel=1e-12)

    def test_trapezoid_decay_closes_the_range(self):
        for K in (12, 400):
            h = stepsize("trapezoid", K, 0.01, 10.0)
            assert (1.0 - h + 0.5 * h * h) ** K == pytest.approx(1e-3, rel=1e-12)

    def test_rk4_decay_closes_the_range(self):
        for K in (12, 400):
            h = stepsize("rk4", K, 0.01, 10.0)
            assert decay_polynomial(h) ** K == pytest.approx(1e-3, rel=1e-10)

    def test_euler_half_step(self):
        # (1 - h)^1 = 1/2 -> h = 1/2
        assert stepsize("euler", 1, 0.5, 1.0) == pytest.approx(0.5, rel=1e-14)

    def test_trapezoid_range_too_wide_for_k(self):
        # per-step decay is at least 1/2, so K=5 cannot bridge a 1e3 ratio
        with pytest.raises(ValueError):
            stepsize("trapezoid", 5, 0.01, 10.0)

    def test_decay_polynomial_values(self):
        assert decay_polynomial(0.0) == 1.0
        assert decay_polynomial(1.0) == pytest.approx(1.0 - 1.0 + 0.5 - 1 / 6 + 1 / 24, rel=1e-15)


# ------------------------------------------------------------- vector field


class TestVectorField:
    def test_scalar_example(self, pure_scalar):
        # v = -x/(1+lambda): at x=3, lambda=2 this is -1
        v = vector_field(pure_scalar, np.array([3.0]), 2.0)
        assert v == pytest.approx([-1.0], rel=1e-14)

    def test_zero_gradient_is_stationary(self, pure_scalar):
        assert vector_field(pure_scalar, np.zeros(1), 1.0) == pytest.approx([0.0], abs=1e-15)

    def test_identity_design(self):
        problem = make_quadratic_ridge(np.eye(2), np.array([2.0, 4.0]))
        v = vector_field(problem, np.zeros(2), 1.0)
        assert v == pytest.approx([1.0, 2.0], rel=1e-14)


# ------------------------------------------------------------- single steps


class TestEulerStep:
    def test_scalar_closed_form(self, scalar_ridge):
        # from the exact point x(1) = 1/2 with h = 0.1:
        # lambda_next = 0.9, d = (1/2)/1.9, x1 = 1/2 + 0.05/1.9 = 1/1.9
        x1, lam1, diag = euler_step(scalar_ridge, np.array([0.5]), 1.0, 0.1, exact_directions())
        assert lam1 == pytest.approx(0.9, rel=1e-15)
        assert abs(x1[0] - 1.0 / 1.9) == 0.0
        assert diag.stage_lambdas == [pytest.approx(0.9)]

    def test_hessian_taken_at_new_lambda(self, quad30, quad30_start):
        A, b, problem = quad30
        h = 0.05
        lam_next = 0.95 * 10.0
        x1, _, _ = euler_step(problem, quad30_start, 10.0, h, exact_directions())
        g = problem.f_grad(quad30_start)
        d = np.linalg.solve(A.T @ A + lam_next * np.eye(20), -g)
        assert np.allclose(x1, quad30_start + h * d, rtol=1e-12, atol=1e-14)

    def test_fixed_point_at_zero_gradient(self, pure_scalar):
        x1, _, _ = euler_step(pure_scalar, np.zeros(1), 1.0, 0.2, exact_directions())
        assert np.array_equal(x1, np.zeros(1))


class TestTrapezoidStep:
    def test_scalar_closed_form(self, pure_scalar):
        # x0=1, lambda=1, h=1/2: d1 = -1/2; stage lambda (1-h+h^2) = 3/4,
        # stage point 3/4, d2 = -(3/4)/(7/4) = -3/7; x1 = 1 - (1/4)(13/14) = 43/56
        x1, lam1, diag = trapezoid_step(
            pure_scalar, np.array([1.0]), 1.0, 0.5, exact_directions(), record=True
        )
        assert x1[0] == pytest.approx(43.0 / 56.0, rel=1e-14)
        assert lam1 == pytest.approx(0.625, rel=1e-15)
        assert diag.stage_lambdas == [pytest.approx(1.0), pytest.approx(0.75)]
        assert diag.direction_vectors[0] == pytest.approx([-0.5], rel=1e-15)
        assert diag.direction_vectors[1] == pytest.approx([-3.0 / 7.0], rel=1e-14)
        assert diag.stage_points[1] == pytest.approx([0.75], rel=1e-15)

    def test_first_stage_uses_old_lambda(self, quad30, quad30_start):
        A, b, problem = quad30
        _, _, diag = trapezoid_step(
            problem, quad30_start, 10.0, 0.05, exact_directions(), record=True
        )
        g = problem.f_grad(quad30_start)
        d1 = np.linalg.solve(A.T @ A + 10.0 * np.eye(20), -g)
        assert np.allclose(diag.direction_vectors[0], d1, rtol=1e-12, atol=1e-14)


class TestRk4Step:
    def test_stage_lambda_polynomials(self, scalar_ridge):
        h = 0.3
        _, lam1, diag = rk4_step(scalar_ridge, np.array([0.5]), 1.0, h, exact_directions())
        expect = [1.0, 1 - h / 2, 1 - h / 2 + h * h / 4, 1 - h + h * h / 2 - h**3 / 4]
        assert diag.stage_lambdas == pytest.approx(expect, rel=1e-15)
        assert lam1 == pytest.approx(decay_polynomial(h), rel=1e-15)

    def test_local_order_via_richardson(self, scalar_ridge):
        # one step from the exact path point: local error is O(h^5), so
        # halving h should shrink it by about 2^5 = 32
        errs = {}
        for h in (0.2, 0.1):
            x1, lam1, _ = rk4_step(scalar_ridge, np.array([0.5]), 1.0, h, exact_directions())
            errs[h] = abs(x1[0] - 1.0 / (1.0 + lam1))
        ratio = errs[0.2] / errs[0.1]
        assert 25.0 < ratio < 45.0

    def test_fixed_point_at_zero_gradient(self, pure_scalar):
        x1, _, _ = rk4_step(pure_scalar, np.zeros(1), 1.0, 0.2, exact_directions())
        assert np.array_equal(x1, np.zeros(1))


class TestDomainBackoff:
    def test_euler_halves_increment_until_feasible(self):
        # pull toward y = 1.2, outside the simplex; the full step exits,
        # one halving lands back inside
        A, b = np.array([[0.5]]), np.array([0.6])
        problem = make_moment_matching(A, b)
        x1, _, diag = euler_step(
            problem, np.array([0.9]), 1e-6, 0.5, exact_directions()
        )
        assert diag.domain_backoffs == 1
        assert problem.domain_check(x1)
        assert 0.97 < x1[0] < 0.98

    def test_lambda_schedule_unchanged_by_backoff(self):
        A, b = np.array([[0.5]]), np.array([0.6])
        problem = make_moment_matching(A, b)
        _, lam1, diag = euler_step(problem, np.array([0.9]), 1e-6, 0.5, exact_directions())
        assert lam1 == pytest.approx(0.5e-6, rel=1e-15)  # (1 - h) lambda regardless

    def test_unrecoverable_step_raises(self):
        A, b = np.array([[0.5]]), np.array([60.0])
        problem = make_moment_matching(A, b)
        # start glued to the boundary with a huge outward pull: halving the
        # increment 30 times still lands outside, so the step gives up
        with pytest.raises(DomainError):
            euler_step(problem, np.array([1.0 - 1e-15]), 1e-9, 0.9, exact_directions())


# ---------------------------------------------------------------- run_path


class TestRunPath:
    def test_lambda_endpoint_reached(self, quad30, quad30_start):
        _, _, problem = quad30
        for method, K in (("euler", 60), ("trapezoid", 40), ("rk4", 40)):
            cfg = StepperConfig(method=method, K=K, lambda_min=0.01, lambda_max=10.0)
            path, _ = run_path(problem, quad30_start, cfg)
            assert path.lams[0] == 10.0
            assert path.lams[-1] == pytest.approx(0.01, rel=1e-9)

    def test_lambda_ratio_constant(self, quad30, quad30_start):
        _, _, problem = quad30
        cfg = StepperConfig(method="trapezoid", K=25, lambda_min=0.01, lambda_max=10.0)
        path, _ = run_path(problem, quad30_start, cfg)
        h = cfg.h
        ratios = path.lams[1:] / path.lams[:-1]
        assert np.allclose(ratios, 1.0 - h + 0.5 * h * h, rtol=1e-13)

    def test_exact_counter_contract(self, quad30, quad30_start):
        _, _, problem = quad30
        expected = {"euler": 1, "trapezoid": 2, "rk4": 4}
        for method, per_step in expected.items():
            K = 12
            cfg = StepperConfig(method=method, K=K, lambda_min=0.01, lambda_max=10.0)
            _, rep = run_path(problem, quad30_start, cfg)
            c = rep.counters
            assert c.grad_f == per_step * K
            assert c.hess_builds == per_step * K
            assert c.linear_solves == per_step * K
            assert c.hessvec == 0 and c.cg_iters_total == 0
            assert c.metric_evals == K + 1  # one residual per knot

    def test_cg_mode_swaps_solves_for_hessvec(self, quad30, quad30_start):
        _, _, problem = quad30
        cfg = StepperConfig(
            method="euler", K=12, lambda_min=0.01, lambda_max=10.0,
            direction_mode="cg", delta=1e-6,
        )
        path, rep = run_path(problem, quad30_start, cfg)
        c = rep.counters
        assert rep.method == "euler-cg"
        assert c.linear_solves == 0 and c.hess_builds == 0
        assert c.hessvec > 0 and c.cg_iters_total > 0

    def test_cg_direction_residuals_within_delta(self, quad30, quad30_start):
        _, _, problem = quad30
        delta = 1e-5
        cfg = StepperConfig(
            method="trapezoid", K=16, lambda_min=0.01, lambda_max=10.0,
            direction_mode="cg", delta=delta, record_diagnostics=True,
        )
        _, rep = run_path(problem, quad30_start, cfg)
        for diag in rep.step_diagnostics:
            assert len(diag.direction_residuals) == 2  # one per stage
            for r in diag.direction_residuals:
                assert r <= delta * (1.0 + 1e-12)

    def test_diagnostics_stage_counts(self, quad30, quad30_start):
        _, _, problem = quad30
        for method, stages in (("euler", 1), ("trapezoid", 2), ("rk4", 4)):
            cfg = StepperConfig(
                method=method, K=12, lambda_min=0.01, lambda_max=10.0,
                record_diagnostics=True,
            )
            _, rep = run_path(problem, quad30_start, cfg)
            assert len(rep.step_diagnostics) == 12
            for k, diag in enumerate(rep.step_diagnostics):
                assert diag.k == k
                assert len(diag.stage_lambdas) == stages
                assert len(diag.direction_norms) == stages
                assert np.isfinite(diag.residual_r_k)

    def test_no_diagnostics_by_default(self, quad30, quad30_start):
        _, _, problem = quad30
        cfg = StepperConfig(method="euler", K=5, lambda_min=0.01, lambda_max=10.0)
        _, rep = run_path(problem, quad30_start, cfg)
        assert rep.step_diagnostics == []

    def test_domain_violating_start_rejected(self):
        A, b = build_moment_problem(np.array([0.5, 0.0]), np.array([0.5, 0.5]), 1)
        problem = make_moment_matching(A, b)
        cfg = StepperConfig(method="euler", K=10, lambda_min=0.1, lambda_max=1.0)
        with pytest.raises(DomainError):
            run_path(problem, np.array([1.5]), cfg)

    def test_degenerate_omega_needs_opt_in(self):
        X, y = generate_synthetic_logistic(20, 3, 2)
        problem = make_logistic_reweighted(X, y)
        cfg = StepperConfig(method="euler", K=10, lambda_min=0.1, lambda_max=1.0)
        with pytest.raises(DegenerateProblemError):
            run_path(problem, np.zeros(3), cfg)
        path, _ = run_path(problem, np.zeros(3), cfg, allow_degenerate=True)
        assert len(path.knots) == 11

    def test_deterministic_across_runs(self, quad30, quad30_start):
        _, _, problem = quad30
        cfg = StepperConfig(method="rk4", K=20, lambda_min=0.01, lambda_max=10.0)
        p1, _ = run_path(problem, quad30_start, cfg)
        p2, _ = run_path(problem, quad30_start, cfg)
        X1 = np.vstack([k.x for k in p1.knots])
        X2 = np.vstack([k.x for k in p2.knots])
        assert np.array_equal(X1, X2)


# ------------------------------------------- knot accuracy vs K, by family


class TestKnotConvergence:
    def test_euler_knots_on_quadratics_sit_at_rounding_level(self, quad30, quad30_start):
        # On quadratic objectives the semi-implicit Euler knot recursion is
        # exact up to rounding when started on the path (measured ~1e-14):
        # the per-step remainder is the Hessian-variation term, which
        # vanishes for constant Hessians.  First-order knot decay is
        # therefore invisible here; see the logistic test below for it.
        _, _, problem = quad30
        cfg = StepperConfig(method="euler", K=200, lambda_min=0.01, lambda_max=10.0)
        path, _ = run_path(problem, quad30_start, cfg)
        assert max(kn.residual for kn in path.knots[1:]) <= 1e-10

    def test_trapezoid_knots_on_quadratics_beat_second_order(self, quad30, quad30_start):
        # Same mechanism: the h^3 local term carries the cubic Taylor
        # remainder constant, zero for quadratics, so knots decay faster
        # than the generic second-order rate (measured pair slope ~ -3.05).
        _, _, problem = quad30
        vals = {}
        for K in (100, 400):
            cfg = StepperConfig(method="trapezoid", K=K, lambda_min=0.01, lambda_max=10.0)
            path, _ = run_path(problem, quad30_start, cfg)
            vals[K] = max(kn.residual for kn in path.knots[1:])
        slope = fit_loglog_slope([100, 400], [vals[100], vals[400]])
        assert slope <= -2.5

    @pytest.mark.slow
    def test_euler_knots_first_order_on_logistic(self, logistic_newton_start):
        # Non-quadratic curvature restores the generic O(1/K) knot decay
        # (measured slope -1.005 on this instance)
        problem, x0 = logistic_newton_start
        vals = {}
        for K in (400, 1600):
            cfg = StepperConfig(method="euler", K=K, lambda_min=0.01, lambda_max=100.0)
            path, _ = run_path(problem, x0, cfg)
            vals[K] = max(kn.residual for kn in path.knots[1:])
        slope = fit_loglog_slope([400, 1600], [vals[400], vals[1600]])
        assert -1.2 <= slope <= -0.8


# -------------------------------------------------------------- initializers


class TestInitializers:
    def test_from_omega_quadratic_one_step_is_exact(self, quad30):
        A, b, problem = quad30
        x0, bound = initialize_from_omega(problem, 10.0)
        # constant Hessian: one Newton step lands on the path point exactly
        from pathode import quadratic_path_point

        assert np.allclose(x0, quadratic_path_point(A, b, 10.0), rtol=1e-12, atol=1e-14)
        measured = residual_norm(problem, x0, 10.0)
        assert measured <= bound + 1e-10
        assert measured <= 1e-10

    def test_from_omega_zero_gradient_start(self):
        # b = 0 puts the Omega minimizer on the path; the bound collapses to 0
        problem = make_quadratic_ridge(np.array([[1.0]]), np.array([0.0]))
        x0, bound = initialize_from_omega(problem, 5.0)
        assert np.array_equal(x0, np.zeros(1))
        assert bound == 0.0

    def test_from_omega_needs_a_minimizer(self):
        X, y = generate_synthetic_logistic(20, 3, 2)
        problem = make_logistic_reweighted(X, y)
        with pytest.raises(ValueError):
            initialize_from_omega(problem, 1.0)

    def test_newton_reaches_tight_tolerance(self, quad30):
        _, _, problem = quad30
        x0 = initialize_by_newton(problem, 10.0, 1e-12)
        assert residual_norm(problem, x0, 10.0) <= 1e-12

    def test_newton_respects_given_start(self, quad30):
        A, b, problem = quad30
        from pathode import quadratic_path_point

        exact = quadratic_path_point(A, b, 10.0)
        x0 = initialize_by_newton(problem, 10.0, 1e-8, x_start=exact)
        assert np.array_equal(x0, exact)  # already feasible, returned as-is

    @pytest.mark.slow
    def test_newton_reaches_float_floor_on_logistic(self, logistic_newton_start):
        problem, _ = logistic_newton_start
        x0 = initialize_by_newton(problem, 100.0, 1e-15)
        assert residual_norm(problem, x0, 100.0) <= 1e-15
