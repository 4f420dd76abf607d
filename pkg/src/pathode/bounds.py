"""Closed-form iteration bounds, per-step recursion bounds, and constant estimation.

Every calculator here is a pure function of its inputs and totals: out-of-range
inputs that merely void a guarantee produce a warning inside the returned
report, never an exception.  The per-step bounds return right-hand sides of
the corresponding one-step inequalities so invariant checkers can compare
measured runs against them.
"""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .problems import ProblemOracle, TheoryConstants

POWER_ITER_TOL = 1e-6
POWER_ITER_CAP = 1000


@dataclass
class BoundReport:
    """An evaluated iteration bound with its term breakdown.

    binding_term names the term that attained the max; terms maps each term
    name to its value; inputs_echo repeats every input so serialized reports
    are self-contained.
    """

    method: str
    K_required: int
    binding_term: str
    terms: dict[str, float]
    inputs_echo: dict
    warnings: list[str] = field(default_factory=list)

    def as_dict(self) -> dict:
        return {
            "method": self.method,
            "K_required": int(self.K_required),
            "binding_term": self.binding_term,
            "terms": {k: float(v) for k, v in self.terms.items()},
            "inputs_echo": self.inputs_echo,
            "warnings": list(self.warnings),
        }

    def to_json(self) -> str:
        return json.dumps(self.as_dict(), sort_keys=True, indent=2) + "\n"


def _finish(method: str, terms: dict[str, float], echo: dict, warns: list[str]) -> BoundReport:
    binding = max(terms, key=terms.get)
    K = max(1, math.ceil(terms[binding]))
    return BoundReport(
        method=method,
        K_required=K,
        binding_term=binding,
        terms=terms,
        inputs_echo=echo,
        warnings=warns,
    )


def _echo(c: TheoryConstants, eps: float, **extra) -> dict:
    echo = {"constants": c.as_dict(), "eps": float(eps)}
    echo.update({k: float(v) for k, v in extra.items()})
    return echo


def k_euler(c: TheoryConstants, eps: float, f_gap: float) -> BoundReport:
    """Step count guaranteeing an eps-accurate path for exact semi-implicit Euler.

    ceil of max{2T, sqrt(LG) tau T / sqrt 3, 4 f_gap tau L T / eps,
    2 sqrt(L) (tau G + 1) T / sqrt(eps)} with T = ln(lambda_max/lambda_min).
    """
    if eps <= 0.0:
        raise ValueError("eps must be positive")
    if f_gap < 0.0:
        raise ValueError("f_gap must be nonnegative")
    T = c.T_euler
    terms = {
        "horizon": 2.0 * T,
        "curvature": math.sqrt(c.L * c.G) * c.tau * T / math.sqrt(3.0),
        "objective_gap": 4.0 * f_gap * c.tau * c.L * T / eps,
        "interpolation": 2.0 * math.sqrt(c.L) * (c.tau * c.G + 1.0) * T / math.sqrt(eps),
    }
    return _finish("euler", terms, _echo(c, eps, f_gap=f_gap), [])


def k_trapezoid(c: TheoryConstants, eps: float) -> BoundReport:
    """Step count for the exact trapezoid scheme, with the inflated horizon T_trap.

    ceil of max{10T, 8LT(1+G)/mu_tilde, 6 sqrt(L) (1+G)^{3/2} T / sqrt(eps),
    5 tau^{2/3} L (1+G)^{4/3} T / eps^{1/3}}.
    """
    if eps <= 0.0:
        raise ValueError("eps must be positive")
    T = c.T_trap
    onepg = 1.0 + c.G
    terms = {
        "horizon": 10.0 * T,
        "conditioning": 8.0 * c.L * T * onepg / c.mu_tilde,
        "third_order": 6.0 * math.sqrt(c.L) * onepg**1.5 * T / math.sqrt(eps),
        "fourth_order": 5.0 * c.tau ** (2.0 / 3.0) * c.L * onepg ** (4.0 / 3.0) * T / eps ** (1.0 / 3.0),
    }
    return _finish("trapezoid", terms, _echo(c, eps), [])


def _approx_warning(c: TheoryConstants, eps: float) -> list[str]:
    if eps > c.mu_tilde:
        msg = (
            f"eps = {eps:g} exceeds mu + lambda_min sigma = {c.mu_tilde:g}; the "
            "inexact-direction guarantee assumes eps <= mu_tilde, so this bound "
            "is evaluated outside its precondition"
        )
        warnings.warn(msg, stacklevel=3)
        return [msg]
    return []


def k_euler_approx(c: TheoryConstants, eps: float, f_gap: float) -> BoundReport:
    """Euler step count under delta-approximate directions (delta = eps/4).

    ceil of max{2T, sqrt(LG) tau T / sqrt 3, 8 f_gap tau L T / eps,
    4 sqrt(L) (tau (G + eps) + 1) T / sqrt(eps)}.  eps > mu_tilde voids the
    guarantee and is reported as a warning, not an error.
    """
    if eps <= 0.0:
        raise ValueError("eps must be positive")
    if f_gap < 0.0:
        raise ValueError("f_gap must be nonnegative")
    warns = _approx_warning(c, eps)
    T = c.T_euler
    terms = {
        "horizon": 2.0 * T,
        "curvature": math.sqrt(c.L * c.G) * c.tau * T / math.sqrt(3.0),
        "objective_gap": 8.0 * f_gap * c.tau * c.L * T / eps,
        "interpolation": 4.0 * math.sqrt(c.L) * (c.tau * (c.G + eps) + 1.0) * T / math.sqrt(eps),
    }
    return _finish("euler-cg", terms, _echo(c, eps, f_gap=f_gap), warns)


def k_trapezoid_approx(c: TheoryConstants, eps: float) -> BoundReport:
    """Trapezoid step count under delta-approximate directions.

    ceil of max{10T, 8LT(2+G)/mu_tilde, 6 sqrt(L) (2+G)^{3/2} T / sqrt(eps),
    6 L tau^{2/3} (2+G)^{4/3} T / eps^{1/3}}.
    """
    if eps <= 0.0:
        raise ValueError("eps must be positive")
    warns = _approx_warning(c, eps)
    T = c.T_trap
    twopg = 2.0 + c.G
    terms = {
        "horizon": 10.0 * T,
        "conditioning": 8.0 * c.L * T * twopg / c.mu_tilde,
        "third_order": 6.0 * math.sqrt(c.L) * twopg**1.5 * T / math.sqrt(eps),
        "fourth_order": 6.0 * c.L * c.tau ** (2.0 / 3.0) * twopg ** (4.0 / 3.0) * T / eps ** (1.0 / 3.0),
    }
    return _finish("trapezoid-cg", terms, _echo(c, eps), warns)


def lipschitz_v(c: TheoryConstants, C: float = 1.0) -> float:
    """Lipschitz modulus of the path vector field.

    L C / (mu + lambda_min sigma) + L^2 C (1 + lambda_max) / (mu + lambda_min sigma)^2,
    where C bounds |xi(lambda)/lambda| (C = 1 for the exponential schedule).
    """
    return c.L * C / c.mu_tilde + c.L**2 * C * (1.0 + c.lambda_max) / c.mu_tilde**2


def grid_epsilon_prime(eps: float, L: float) -> tuple[float, float]:
    """Objective-gap tolerances matching a gradient-norm target eps.

    Returns (eps_prime, eps_c) = (eps^2 / (2L), eps^2 / (4L)): a point with
    objective gap eps_c <= eps_prime/2 on an L-smooth function has gradient
    norm at most eps.  Exposed for reporting; the grid solver stops on the
    gradient norm directly.
    """
    if eps <= 0.0 or L <= 0.0:
        raise ValueError("eps and L must be positive")
    eps_prime = eps * eps / (2.0 * L)
    return eps_prime, eps_prime / 2.0


@dataclass
class StepSizeCheck:
    """Result of the step-size admissibility test; truthy iff both clauses hold."""

    ok: bool
    general_ok: bool
    simplified_ok: bool
    general_bound: float
    simplified_bound: float
    failed: list[str]

    def __bool__(self) -> bool:
        return self.ok


def stepsize_conditions(
    c: TheoryConstants, h: float, lambda_j: float, lambda_j1: float
) -> StepSizeCheck:
    """Check h against the general and simplified admissibility conditions.

    With the exponential schedule xi(lambda) = -lambda, the general condition
    is h <= min{1/2, (mu + lambda_{j+1} sigma) sqrt(3/(LG))} and the
    simplified one is h <= min{1/2, sqrt(3/(tau^2 L G))}.
    """
    if h <= 0.0 or lambda_j <= 0.0 or lambda_j1 <= 0.0:
        raise ValueError("h and lambdas must be positive")
    general = min(0.5, (c.mu + lambda_j1 * c.sigma) * math.sqrt(3.0 / (c.L * c.G)))
    simplified = min(0.5, math.sqrt(3.0 / (c.tau**2 * c.L * c.G)))
    general_ok = h <= general
    simplified_ok = h <= simplified
    failed = []
    if not general_ok:
        failed.append("general")
    if not simplified_ok:
        failed.append("simplified")
    return StepSizeCheck(
        ok=general_ok and simplified_ok,
        general_ok=general_ok,
        simplified_ok=simplified_ok,
        general_bound=general,
        simplified_bound=simplified,
        failed=failed,
    )


def step_bound_euler(
    r_k: float, lambda_k: float, lambda_k1: float, h: float, L: float, v_norm: float
) -> float:
    """One-step residual bound for exact Euler.

    (lambda_{k+1}/lambda_k) r_k + h^2 L (1 + lambda_{k+1}) / 2 * ||v||^2 with
    v evaluated at (x_k, lambda_{k+1}).
    """
    return (lambda_k1 / lambda_k) * r_k + h * h * L * (1.0 + lambda_k1) / 2.0 * v_norm**2


def step_bound_trapezoid(
    r_k: float, lambda_ratio: float, h: float, L: float, G: float, tau: float
) -> float:
    """One-step residual bound for exact trapezoid (needs r_k <= mu_tilde)."""
    onepg = 1.0 + G
    return lambda_ratio * r_k + 3.0 * h**3 * L * onepg**3 + 2.0 * h**4 * L**3 * tau**2 * onepg**4


def step_bound_euler_approx(
    r_k: float,
    lambda_k: float,
    lambda_k1: float,
    h: float,
    L: float,
    d_hat_norm: float,
    delta_norm: float,
) -> float:
    """One-step residual bound for Euler with a delta-approximate direction.

    Same as the exact bound with the computed direction's norm in the
    quadratic term, plus the linear leakage h ||delta_k||.
    """
    return (
        (lambda_k1 / lambda_k) * r_k
        + h * h * L * (1.0 + lambda_k1) / 2.0 * d_hat_norm**2
        + h * delta_norm
    )


def step_bound_trapezoid_approx(
    r_k: float,
    lambda_ratio: float,
    h: float,
    L: float,
    G: float,
    tau: float,
    delta1: np.ndarray,
    delta2: np.ndarray,
) -> float:
    """One-step residual bound for trapezoid with delta-approximate stages.

    delta1/delta2 are the residual vectors of the two stage solves (the bound
    involves ||delta1 - delta2||, so vectors are required, not norms).
    """
    delta1 = np.asarray(delta1, dtype=float)
    delta2 = np.asarray(delta2, dtype=float)
    twopg = 2.0 + G
    return (
        lambda_ratio * r_k
        + 3.0 * h**3 * L * twopg**3
        + 2.0 * h**4 * L**3 * tau**2 * twopg**4
        + (h / 2.0) * float(np.linalg.norm(delta1 - delta2))
        + (h * h / 2.0) * float(np.linalg.norm(delta1))
    )


def _power_norm(M: np.ndarray) -> float:
    """Spectral norm of a symmetric matrix by power iteration, 1e-6 relative.

    The start vector is a fixed ramp so repeated calls on the same matrix
    agree bit-for-bit, keeping estimates monotone over growing sample sets.
    """
    p = M.shape[0]
    v = np.linspace(1.0, 2.0, p)
    v /= np.linalg.norm(v)
    est = 0.0
    for _ in range(POWER_ITER_CAP):
        w = M @ v
        norm_w = float(np.linalg.norm(w))
        if norm_w == 0.0:
            return 0.0
        new_est = norm_w
        v = w / norm_w
        if abs(new_est - est) <= POWER_ITER_TOL * max(new_est, 1e-300):
            return new_est
        est = new_est
    return est


def estimate_f_gap(
    problem: ProblemOracle,
    x0: np.ndarray,
    sample_count: int,
    seed: int,
    radius: float = 1.0,
) -> float:
    """Plug-in estimate of f(x0) - f*: the drop to the best sampled f value.

    Samples perturbations of x0 (shrunk into the domain as needed) and
    returns max(0, f(x0) - min f).  This is a sample-based stand-in for the
    unobservable optimal value and is only used when no analytic gap exists.
    """
    if sample_count < 1:
        raise ValueError("sample_count must be at least 1")
    rng = np.random.Generator(np.random.Philox(seed))
    x0 = np.asarray(x0, dtype=float)
    f0 = problem.f_value(x0)
    best = f0
    for _ in range(sample_count):
        step = radius * rng.normal(size=problem.dim)
        cand = x0 + step
        shrink = 0
        while not problem.domain_check(cand) and shrink < 60:
            step *= 0.5
            cand = x0 + step
            shrink += 1
        if problem.domain_check(cand):
            best = min(best, problem.f_value(cand))
    return max(0.0, f0 - best)


def estimate_constants(
    problem: ProblemOracle,
    lambda_range: tuple[float, float],
    sample_count: int,
    seed: int,
    radius: float = 1.0,
) -> TheoryConstants:
    """Sample-based estimates of (mu, sigma, L, G), marked as estimated.

    Draws sample_count perturbations of the base point (the Omega minimizer,
    else zero), shrinks each toward the base until it satisfies the domain,
    and keeps those passing the level-set filter f(x) <= f(base).  Over the
    kept points plus the base: L-hat is the max of Hessian spectral norms
    (power iteration) and pairwise Hessian-difference ratios, G-hat the max
    gradient norm, mu-hat and sigma-hat the min Hessian eigenvalues.  The
    draw stream is prefix-stable in sample_count, so estimates from a larger
    sample dominate those from a smaller one.
    """
    if sample_count < 1:
        raise ValueError("sample_count must be at least 1")
    lambda_min, lambda_max = lambda_range
    rng = np.random.Generator(np.random.Philox(seed))
    if problem.omega_minimizer is not None:
        base = np.array(problem.omega_minimizer, dtype=float, copy=True)
    else:
        base = np.zeros(problem.dim)
    if not problem.domain_check(base):
        raise ValueError("base point violates the problem domain")
    f_base = problem.f_value(base)
    points = [base]
    for _ in range(sample_count):
        step = radius * rng.normal(size=problem.dim)
        cand = base + step
        shrink = 0
        while not problem.domain_check(cand) and shrink < 60:
            step *= 0.5
            cand = base + step
            shrink += 1
        if not problem.domain_check(cand):
            continue
        if problem.f_value(cand) <= f_base + 1e-12 * (1.0 + abs(f_base)):
            points.append(cand)

    L_hat = 0.0
    G_hat = 0.0
    mu_hat = math.inf
    sigma_hat = math.inf
    hessians_f = []
    for x in points:
        Hf = np.asarray(problem.f_hess(x), dtype=float)
        Ho = np.asarray(problem.omega_hess(x), dtype=float)
        hessians_f.append((x, Hf))
        L_hat = max(L_hat, _power_norm(Hf), _power_norm(Ho))
        G_hat = max(
            G_hat,
            float(np.linalg.norm(problem.f_grad(x))),
            float(np.linalg.norm(problem.omega_grad(x))),
        )
        mu_hat = min(mu_hat, float(np.linalg.eigvalsh(Hf)[0]))
        sigma_hat = min(sigma_hat, float(np.linalg.eigvalsh(Ho)[0]))
    for (x_a, H_a), (x_b, H_b) in zip(hessians_f, hessians_f[1:]):
        gap = float(np.linalg.norm(x_a - x_b))
        if gap > 1e-12:
            L_hat = max(L_hat, _power_norm(H_a - H_b) / gap)

    return TheoryConstants.derive(
        mu=max(0.0, mu_hat),
        sigma=max(0.0, sigma_hat),
        L=L_hat,
        G=G_hat,
        lambda_min=lambda_min,
        lambda_max=lambda_max,
        estimated=True,
    )
