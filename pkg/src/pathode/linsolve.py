"""SPD linear solves and warm-started conjugate gradients for step directions.

Both entry points solve H y = -g and return the direction together with an
explicitly computed residual certificate ||H y + g||; callers never have to
trust a recurrence.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import LinAlgError, cho_factor, cho_solve

RECOMPUTE_EVERY = 50  # CG refreshes the true residual this often


class NotPositiveDefiniteError(ValueError):
    """The assembled Hessian failed the Cholesky or curvature test."""


@dataclass
class DirectionResult:
    """A computed step direction with its residual certificate.

    direction solves (or approximates) H y = -g.  residual_norm is the
    explicitly evaluated ||H y + g||.  inner_iterations is 0 for exact
    solves and the CG iteration count otherwise.  initial_residual is
    ||H y0 + g|| at the warm start (equal to ||g|| from a cold start).
    """

    direction: np.ndarray
    residual_norm: float
    inner_iterations: int
    mode: str
    initial_residual: float
    converged: bool
    residual_vector: np.ndarray


def solve_spd(H: np.ndarray, g: np.ndarray) -> DirectionResult:
    """Cholesky solve of H y = -g for symmetric positive definite H."""
    H = np.asarray(H, dtype=float)
    g = np.asarray(g, dtype=float)
    if not (np.all(np.isfinite(H)) and np.all(np.isfinite(g))):
        raise ValueError("non-finite entries in linear system")
    try:
        factor = cho_factor(H, lower=True, check_finite=False)
    except LinAlgError as exc:
        raise NotPositiveDefiniteError(f"Cholesky factorization failed: {exc}") from exc
    y = cho_solve(factor, -g, check_finite=False)
    residual = H @ y + g
    rnorm = float(np.linalg.norm(residual))
    return DirectionResult(
        direction=y,
        residual_norm=rnorm,
        inner_iterations=0,
        mode="exact",
        initial_residual=float(np.linalg.norm(g)),
        converged=True,
        residual_vector=residual,
    )


def cg_solve(
    hessvec,
    g: np.ndarray,
    warm_start: np.ndarray,
    delta: float,
    max_iters: int,
) -> DirectionResult:
    """Conjugate gradients on H y = -g from warm_start, stopping at ||H y + g|| <= delta.

    hessvec(v) must apply the SPD operator H.  Termination is decided only
    on explicitly recomputed residuals: the recurrence residual triggers a
    candidate check, and every RECOMPUTE_EVERY iterations the true residual
    replaces the recurrence to stop drift.  Exhausting max_iters returns the
    best iterate with converged=False rather than raising.
    """
    if delta <= 0.0:
        raise ValueError("delta must be positive")
    if max_iters < 0:
        raise ValueError("max_iters must be nonnegative")
    g = np.asarray(g, dtype=float)
    y = np.array(warm_start, dtype=float, copy=True)
    if y.shape != g.shape:
        raise ValueError(f"warm start shape {y.shape} does not match {g.shape}")

    def true_residual():
        return -g - hessvec(y)  # residual of H y = -g

    r = -g.copy() if not y.any() else true_residual()
    rnorm = float(np.linalg.norm(r))
    initial = rnorm
    if rnorm <= delta:
        return DirectionResult(y, rnorm, 0, "cg", initial, True, -r)

    p = r.copy()
    rs = float(r @ r)
    iters = 0
    while iters < max_iters:
        Hp = hessvec(p)
        pHp = float(p @ Hp)
        if not math.isfinite(pHp) or pHp <= 0.0:
            raise NotPositiveDefiniteError(
                f"CG met nonpositive curvature p'Hp = {pHp:.3e}; operator is not SPD"
            )
        alpha = rs / pHp
        y += alpha * p
        r -= alpha * Hp
        iters += 1
        rs_new = float(r @ r)
        if math.sqrt(rs_new) <= delta or iters % RECOMPUTE_EVERY == 0:
            r = true_residual()
            rs_new = float(r @ r)
            if math.sqrt(rs_new) <= delta:
                return DirectionResult(y, math.sqrt(rs_new), iters, "cg", initial, True, -r)
        beta = rs_new / rs
        p = r + beta * p
        rs = rs_new

    r = true_residual()
    rnorm = float(np.linalg.norm(r))
    return DirectionResult(y, rnorm, iters, "cg", initial, rnorm <= delta, -r)


def cg_iteration_bound(kappa: float, initial_residual: float, delta: float) -> int:
    """Worst-case CG iterations to reduce the residual from initial_residual to delta.

    ceil((sqrt(kappa) + 1) / 2 * ln(2 sqrt(kappa) initial / delta)), clamped
    at zero when the start already satisfies the tolerance.
    """
    if kappa < 1.0:
        raise ValueError("condition number must be >= 1")
    if delta <= 0.0:
        raise ValueError("delta must be positive")
    if initial_residual <= delta:
        return 0
    n = math.ceil((math.sqrt(kappa) + 1.0) / 2.0 * math.log(2.0 * math.sqrt(kappa) * initial_residual / delta))
    return max(n, 0)
