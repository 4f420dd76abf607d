"""ODE-style path steppers: vector field, schedules, update schemes, initializers.

The exact path x(lambda) solves grad F_lambda(x) = 0.  Differentiating along
the exponential schedule lambda(t) = lambda_max exp(-t) gives the autonomous
system

    dx/dt = v(x, lambda) = -(hess f + lambda hess Omega)^{-1} grad f,
    dlambda/dt = -lambda,

which the three schemes below discretize with a fixed multiplicative
lambda-decay per step.  Directions come from a pluggable oracle: exact
Cholesky solves, or warm-started CG with a residual tolerance delta.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .linsolve import NotPositiveDefiniteError, cg_solve, solve_spd
from .paths import PathKnot, PiecewiseLinearPath, residual_norm
from .problems import DegenerateProblemError, DomainError, ProblemOracle
from .reports import OracleCounters, RunReport, Stopwatch

METHODS = ("euler", "trapezoid", "rk4")
MAX_DOMAIN_BACKOFFS = 30
STEPSIZE_ROOT_TOL = 1e-14


class CGNoConvergenceError(RuntimeError):
    """CG exhausted its iteration cap before reaching delta."""


class MaxIterationsError(RuntimeError):
    """An iterative routine hit its cap before meeting its tolerance."""


class PathRunError(RuntimeError):
    """A step failed mid-run; carries the partial results computed so far."""

    def __init__(self, message: str, knots, diagnostics, step_index: int):
        super().__init__(message)
        self.knots = knots
        self.diagnostics = diagnostics
        self.step_index = step_index


def decay_polynomial(h: float) -> float:
    """Per-step lambda factor of the RK4 scheme, the quartic Taylor of exp(-h)."""
    return 1.0 - h + h * h / 2.0 - h**3 / 6.0 + h**4 / 24.0


def stepsize(method: str, K: int, lambda_min: float, lambda_max: float) -> float:
    """Step size h making K steps of the scheme contract lambda_max to lambda_min.

    euler:     lambda shrinks by (1 - h) per step, h = 1 - rho^(1/K).
    trapezoid: shrinks by (1 - h + h^2/2), h = 1 - sqrt(2 rho^(1/K) - 1),
               which only exists for K > log2(lambda_max/lambda_min).
    rk4:       shrinks by the quartic decay polynomial; h found by Newton
               root-finding on its log with initial guess 1 - rho^(1/K).
    """
    if K < 1:
        raise ValueError("K must be a positive integer")
    if not (0.0 < lambda_min < lambda_max):
        raise ValueError(f"need 0 < lambda_min < lambda_max, got [{lambda_min}, {lambda_max}]")
    rho = lambda_min / lambda_max
    ratio = rho ** (1.0 / K)
    if method == "euler":
        return 1.0 - ratio
    if method == "trapezoid":
        s = 2.0 * ratio - 1.0
        if s <= 0.0:
            raise ValueError(
                "trapezoid schedule needs K > log2(lambda_max/lambda_min) "
                f"= {math.log2(1.0 / rho):.3f}, got K = {K}"
            )
        return 1.0 - math.sqrt(s)
    if method == "rk4":
        target = math.log(rho) / K
        h = 1.0 - ratio
        for _ in range(100):
            poly = decay_polynomial(h)
            fval = math.log(poly) - target
            if abs(fval) <= STEPSIZE_ROOT_TOL:
                return h
            dpoly = -(1.0 - h + 0.5 * h * h - h**3 / 6.0)
            h -= fval * poly / dpoly
        raise MaxIterationsError("rk4 step-size root-finding did not converge")
    raise ValueError(f"unknown method {method!r}; expected one of {METHODS}")


@dataclass
class StepperConfig:
    """Immutable description of one path run; h is derived, not chosen."""

    method: str
    K: int
    lambda_min: float
    lambda_max: float
    direction_mode: str = "exact"
    delta: float | None = None
    cg_max_iters: int | None = None
    record_diagnostics: bool = False
    h: float = field(init=False)

    def __post_init__(self):
        if self.direction_mode not in ("exact", "cg"):
            raise ValueError(f"direction_mode must be 'exact' or 'cg', got {self.direction_mode!r}")
        if self.direction_mode == "cg":
            if self.delta is None or self.delta <= 0.0:
                raise ValueError("cg mode needs delta > 0")
        self.h = stepsize(self.method, self.K, self.lambda_min, self.lambda_max)

    @property
    def method_label(self) -> str:
        return self.method if self.direction_mode == "exact" else f"{self.method}-cg"


@dataclass
class StepDiagnostics:
    """Per-step record: one entry per stage in the stage-ordered lists.

    Vector payloads (direction_vectors, residual_vectors, stage_points) are
    populated only when the run records diagnostics, so long production runs
    do not hold O(K p) memory.
    """

    k: int
    lambda_k: float
    residual_r_k: float
    direction_norms: list[float]
    cg_iterations: list[int]
    direction_residuals: list[float]
    cg_initial_residuals: list[float]
    stage_lambdas: list[float]
    domain_backoffs: int = 0
    direction_vectors: list[np.ndarray] | None = None
    residual_vectors: list[np.ndarray] | None = None
    stage_points: list[np.ndarray] | None = None

    def as_dict(self) -> dict:
        return {
            "k": self.k,
            "lambda_k": self.lambda_k,
            "residual_r_k": self.residual_r_k,
            "direction_norms": self.direction_norms,
            "cg_iterations": self.cg_iterations,
            "direction_residuals": self.direction_residuals,
            "cg_initial_residuals": self.cg_initial_residuals,
            "stage_lambdas": self.stage_lambdas,
            "domain_backoffs": self.domain_backoffs,
        }


class ExactDirections:
    """Direction oracle backed by Cholesky solves of the assembled Hessian."""

    mode = "exact"

    def __init__(self, counters: OracleCounters):
        self.counters = counters

    def direction(self, problem: ProblemOracle, x, lam, slot="d", warm_from=None):
        g = problem.f_grad(x)
        self.counters.grad_f += 1
        H = problem.f_hess(x) + lam * problem.omega_hess(x)
        self.counters.hess_builds += 1
        result = solve_spd(H, g)
        self.counters.linear_solves += 1
        return result


class CGDirections:
    """Direction oracle running warm-started CG to residual tolerance delta.

    Warm starts chain through named slots: each call warm-starts from the
    vector stored under warm_from (its own slot by default) and stores its
    result under slot, so consecutive steps and stages hand directions along.
    """

    mode = "cg"

    def __init__(self, counters: OracleCounters, delta: float, max_iters: int):
        if delta <= 0.0:
            raise ValueError("delta must be positive")
        self.counters = counters
        self.delta = delta
        self.max_iters = max_iters
        self.warm: dict[str, np.ndarray] = {}

    def direction(self, problem: ProblemOracle, x, lam, slot="d", warm_from=None):
        g = problem.f_grad(x)
        self.counters.grad_f += 1

        def hessvec(v):
            self.counters.hessvec += 1
            return problem.f_hessvec(x, v) + lam * problem.omega_hessvec(x, v)

        start = self.warm.get(warm_from if warm_from is not None else slot)
        if start is None:
            start = np.zeros(problem.dim)
        result = cg_solve(hessvec, g, start, self.delta, self.max_iters)
        self.counters.cg_iters_total += result.inner_iterations
        self.warm[slot] = result.direction
        if not result.converged:
            raise CGNoConvergenceError(
                f"CG stopped at {self.max_iters} iterations with residual "
                f"{result.residual_norm:.3e} > delta = {self.delta:.3e}"
            )
        return result


def vector_field(problem: ProblemOracle, x: np.ndarray, lam: float) -> np.ndarray:
    """Exact ODE direction v(x, lambda) = -(hess F_lambda)^{-1} grad f (uncounted)."""
    H = problem.total_hess(x, lam)
    return solve_spd(H, problem.f_grad(x)).direction


def _require_domain(problem: ProblemOracle, x: np.ndarray, what: str) -> None:
    if not problem.domain_check(x):
        raise DomainError(f"{what} left the domain")


def _backoff(scale: float, backoffs: int) -> tuple[float, int]:
    backoffs += 1
    if backoffs > MAX_DOMAIN_BACKOFFS:
        raise DomainError(
            f"step still leaves the domain after {MAX_DOMAIN_BACKOFFS} increment halvings"
        )
    return scale * 0.5, backoffs


def _diag(lambda_k, results, stage_lambdas, stage_points, backoffs, record):
    return StepDiagnostics(
        k=-1,
        lambda_k=lambda_k,
        residual_r_k=float("nan"),
        direction_norms=[float(np.linalg.norm(r.direction)) for r in results],
        cg_iterations=[r.inner_iterations for r in results],
        direction_residuals=[r.residual_norm for r in results],
        cg_initial_residuals=[r.initial_residual for r in results],
        stage_lambdas=list(stage_lambdas),
        domain_backoffs=backoffs,
        direction_vectors=[r.direction for r in results] if record else None,
        residual_vectors=[r.residual_vector for r in results] if record else None,
        stage_points=[np.array(p) for p in stage_points] if record else None,
    )


def euler_step(problem, x_k, lambda_k, h, directions, record=False):
    """Semi-implicit Euler: Hessian at the new lambda, gradient at the old point.

    x_{k+1} = x_k - h (hess f(x_k) + lambda_{k+1} hess Omega(x_k))^{-1} grad f(x_k),
    lambda_{k+1} = (1 - h) lambda_k.
    """
    lam_next = (1.0 - h) * lambda_k
    res = directions.direction(problem, x_k, lam_next, slot="d")
    scale, backoffs = 1.0, 0
    while True:
        x_next = x_k + (scale * h) * res.direction
        if problem.domain_check(x_next):
            break
        scale, backoffs = _backoff(scale, backoffs)
    diag = _diag(lambda_k, [res], [lam_next], [x_k], backoffs, record)
    return x_next, lam_next, diag


def trapezoid_step(problem, x_k, lambda_k, h, directions, record=False):
    """Two-stage trapezoid step.

    d1 at (x_k, lambda_k); d2 at (x_k + h d1, (1 - h + h^2) lambda_k);
    x_{k+1} = x_k + h (d1 + d2)/2; lambda_{k+1} = (1 - h + h^2/2) lambda_k.
    """
    lam_stage = (1.0 - h + h * h) * lambda_k
    lam_next = (1.0 - h + 0.5 * h * h) * lambda_k
    res1 = directions.direction(problem, x_k, lambda_k, slot="d1")
    d1 = res1.direction
    scale, backoffs = 1.0, 0
    while True:
        try:
            s = scale * h
            x_stage = x_k + s * d1
            _require_domain(problem, x_stage, "trapezoid stage point")
            res2 = directions.direction(problem, x_stage, lam_stage, slot="d2", warm_from="d1")
            x_next = x_k + (0.5 * s) * (d1 + res2.direction)
            _require_domain(problem, x_next, "trapezoid step")
            break
        except DomainError:
            scale, backoffs = _backoff(scale, backoffs)
    diag = _diag(lambda_k, [res1, res2], [lambda_k, lam_stage], [x_k, x_stage], backoffs, record)
    return x_next, lam_next, diag


def rk4_step(problem, x_k, lambda_k, h, directions, record=False):
    """Classical RK4 on the joint (x, lambda) system, fully explicit in lambda.

    Stage lambdas follow the exact polynomial recursion of dlambda/dt = -lambda;
    the new lambda is lambda_k times the quartic decay polynomial.
    """
    lam2 = (1.0 - 0.5 * h) * lambda_k
    lam3 = (1.0 - 0.5 * h + 0.25 * h * h) * lambda_k
    lam4 = (1.0 - h + 0.5 * h * h - 0.25 * h**3) * lambda_k
    lam_next = decay_polynomial(h) * lambda_k
    res1 = directions.direction(problem, x_k, lambda_k, slot="d")
    d1 = res1.direction
    scale, backoffs = 1.0, 0
    while True:
        try:
            s = scale * h
            x2 = x_k + (0.5 * s) * d1
            _require_domain(problem, x2, "rk4 stage 2")
            res2 = directions.direction(problem, x2, lam2, slot="d")
            x3 = x_k + (0.5 * s) * res2.direction
            _require_domain(problem, x3, "rk4 stage 3")
            res3 = directions.direction(problem, x3, lam3, slot="d")
            x4 = x_k + s * res3.direction
            _require_domain(problem, x4, "rk4 stage 4")
            res4 = directions.direction(problem, x4, lam4, slot="d")
            x_next = x_k + (s / 6.0) * (
                d1 + 2.0 * res2.direction + 2.0 * res3.direction + res4.direction
            )
            _require_domain(problem, x_next, "rk4 step")
            break
        except DomainError:
            scale, backoffs = _backoff(scale, backoffs)
    diag = _diag(
        lambda_k,
        [res1, res2, res3, res4],
        [lambda_k, lam2, lam3, lam4],
        [x_k, x2, x3, x4],
        backoffs,
        record,
    )
    return x_next, lam_next, diag


_STEP_FUNCTIONS = {"euler": euler_step, "trapezoid": trapezoid_step, "rk4": rk4_step}


def run_path(
    problem: ProblemOracle,
    x0: np.ndarray,
    config: StepperConfig,
    *,
    allow_degenerate: bool = False,
    problem_label: str | None = None,
    seed: int | None = None,
) -> tuple[PiecewiseLinearPath, RunReport]:
    """Run K steps of the configured scheme from (x0, lambda_max).

    Returns the piecewise-linear path over the K + 1 knots and a report whose
    counters tally every oracle call the run made.  Knot residuals are charged
    to the metric counter, not to solver gradients.  A failed step raises
    PathRunError carrying the partial knots and diagnostics.
    """
    if problem.sigma <= 0.0 and not allow_degenerate:
        raise DegenerateProblemError(
            "Omega is not strongly convex (sigma = 0); pass allow_degenerate=True "
            "to run anyway without the accompanying guarantees"
        )
    x0 = np.asarray(x0, dtype=float)
    if x0.shape != (problem.dim,):
        raise ValueError(f"x0 has shape {x0.shape}, expected ({problem.dim},)")
    if not problem.domain_check(x0):
        raise DomainError("x0 violates the problem domain")
    counters = OracleCounters()
    if config.direction_mode == "exact":
        directions = ExactDirections(counters)
    else:
        max_iters = config.cg_max_iters if config.cg_max_iters is not None else 20 * problem.dim
        directions = CGDirections(counters, config.delta, max_iters)
    step_fn = _STEP_FUNCTIONS[config.method]
    knots: list[PathKnot] = []
    diags: list[StepDiagnostics] = []
    with Stopwatch() as sw:
        x, lam = x0.copy(), config.lambda_max
        knots.append(PathKnot(lam, x.copy(), residual_norm(problem, x, lam, counters)))
        for k in range(config.K):
            try:
                x, lam_next, diag = step_fn(
                    problem, x, lam, config.h, directions, record=config.record_diagnostics
                )
            except (DomainError, NotPositiveDefiniteError, CGNoConvergenceError) as exc:
                raise PathRunError(
                    f"step {k} failed: {exc}", knots=knots, diagnostics=diags, step_index=k
                ) from exc
            diag.k = k
            diag.residual_r_k = knots[-1].residual
            lam = lam_next
            knots.append(PathKnot(lam, x.copy(), residual_norm(problem, x, lam, counters)))
            if config.record_diagnostics:
                diags.append(diag)
    report = RunReport(
        method=config.method_label,
        K=config.K,
        h=config.h,
        counters=counters,
        wall_time_seconds=sw.elapsed,
        delta=config.delta if config.direction_mode == "cg" else None,
        lambda_min=config.lambda_min,
        lambda_max=config.lambda_max,
        problem=problem_label or problem.name,
        seed=seed,
        step_diagnostics=diags,
    )
    return PiecewiseLinearPath(knots), report


def initialize_from_omega(problem: ProblemOracle, lambda_max: float):
    """One Newton step from the Omega minimizer, with its analytic residual bound.

    x0 = x_omega - (hess f + lambda_max hess Omega)^{-1} grad f(x_omega), and
    ||grad F_{lambda_max}(x0)|| <= L (1 + lambda_max) ||grad f(x_omega)||^2
    / (2 (mu + lambda_max sigma)^2).  The bound is inf when the problem
    carries no Lipschitz certificate.
    """
    if problem.omega_minimizer is None:
        raise ValueError("problem has no omega_minimizer to initialize from")
    x_om = np.array(problem.omega_minimizer, dtype=float, copy=True)
    g = problem.f_grad(x_om)
    H = problem.total_hess(x_om, lambda_max)
    x0 = x_om + solve_spd(H, g).direction
    gnorm = float(np.linalg.norm(g))
    denom = problem.mu + lambda_max * problem.sigma
    if problem.lipschitz is None or denom <= 0.0:
        bound = math.inf
    else:
        bound = problem.lipschitz * (1.0 + lambda_max) * gnorm**2 / (2.0 * denom**2)
    return x0, float(bound)


def initialize_by_newton(
    problem: ProblemOracle,
    lambda_max: float,
    tol: float,
    x_start: np.ndarray | None = None,
    max_iters: int = 100,
) -> np.ndarray:
    """Damped Newton on F_{lambda_max} until the gradient norm reaches tol.

    Starts from x_start, else the Omega minimizer, else zero.  Steps are
    undamped Newton with halving until the objective stops increasing and
    the iterate stays in the domain.
    """
    if tol <= 0.0:
        raise ValueError("tol must be positive")
    if x_start is not None:
        x = np.array(x_start, dtype=float, copy=True)
    elif problem.omega_minimizer is not None:
        x = np.array(problem.omega_minimizer, dtype=float, copy=True)
    else:
        x = np.zeros(problem.dim)
    if not problem.domain_check(x):
        raise DomainError("starting point violates the problem domain")
    for _ in range(max_iters):
        g = problem.total_grad(x, lambda_max)
        if float(np.linalg.norm(g)) <= tol:
            return x
        H = problem.total_hess(x, lambda_max)
        d = solve_spd(H, g).direction
        f0 = problem.total_value(x, lambda_max)
        t = 1.0
        for _ in range(MAX_DOMAIN_BACKOFFS + 1):
            cand = x + t * d
            if problem.domain_check(cand):
                if problem.total_value(cand, lambda_max) <= f0 + 1e-12 * (1.0 + abs(f0)):
                    x = cand
                    break
            t *= 0.5
        else:
            raise MaxIterationsError("newton damping found no acceptable step")
    g = problem.total_grad(x, lambda_max)
    if float(np.linalg.norm(g)) <= tol:
        return x
    raise MaxIterationsError(f"newton stalled above tol = {tol} after {max_iters} iterations")
