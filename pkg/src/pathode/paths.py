"""Path containers, interpolation, and accuracy metrics.

A discrete run produces knots (lambda_k, x_k, r_k) with strictly decreasing
lambda.  Between knots the continuous surrogate is piecewise linear in
lambda for ODE methods and piecewise constant for grid search.  Accuracy is
always the gradient-norm residual ||grad F_lambda(x(lambda))||, charged to a
metric counter separate from solver work.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .problems import ProblemOracle
from .reports import OracleCounters

DENSE_CHUNK = 262144  # residual evaluations per batched block


@dataclass(frozen=True)
class PathKnot:
    """One computed path point: parameter value, iterate, and its residual."""

    lam: float
    x: np.ndarray
    residual: float


class _PathBase:
    def __init__(self, knots: list[PathKnot]):
        if len(knots) < 2:
            raise ValueError("a path needs at least two knots")
        lams = np.array([k.lam for k in knots], dtype=float)
        if not np.all(np.diff(lams) < 0.0):
            raise ValueError("knot lambdas must be strictly decreasing")
        if lams[-1] <= 0.0:
            raise ValueError("lambdas must stay positive")
        self.knots = list(knots)
        self.lams = lams
        self._asc = lams[::-1]
        self._X = np.vstack([k.x for k in knots])

    @property
    def lambda_max(self) -> float:
        return float(self.lams[0])

    @property
    def lambda_min(self) -> float:
        return float(self.lams[-1])

    def _check_range(self, lam: np.ndarray) -> None:
        if np.any(lam < self.lambda_min) or np.any(lam > self.lambda_max):
            raise ValueError(
                f"lambda outside path range [{self.lambda_min}, {self.lambda_max}]"
            )

    def _owning_knot(self, lam: np.ndarray) -> np.ndarray:
        # index k with lambda in (lambda_{k+1}, lambda_k], via the ascending view
        j = np.searchsorted(self._asc, lam, side="left")
        j = np.clip(j, 1, len(self.lams) - 1)
        return len(self.lams) - 1 - j

    def query(self, lam: float) -> np.ndarray:
        return self.query_batch(np.array([lam], dtype=float))[0]

    def query_batch(self, lam: np.ndarray) -> np.ndarray:
        raise NotImplementedError


class PiecewiseLinearPath(_PathBase):
    """Linear-in-lambda interpolation between consecutive knots."""

    def query_batch(self, lam: np.ndarray) -> np.ndarray:
        lam = np.asarray(lam, dtype=float)
        self._check_range(lam)
        k = self._owning_knot(lam)
        lam_k = self.lams[k]
        lam_k1 = self.lams[k + 1]
        alpha = (lam - lam_k1) / (lam_k - lam_k1)
        return alpha[:, None] * self._X[k] + (1.0 - alpha)[:, None] * self._X[k + 1]


class PiecewiseConstantPath(_PathBase):
    """Holds each knot's iterate across the interval below it (grid search)."""

    def query_batch(self, lam: np.ndarray) -> np.ndarray:
        lam = np.asarray(lam, dtype=float)
        self._check_range(lam)
        # x_k owns (lambda_{k+1}, lambda_k]; the bottom endpoint maps to x_K
        j = np.searchsorted(self._asc, lam, side="left")
        return self._X[len(self.lams) - 1 - j]


def interpolate(path: _PathBase, lam: float) -> np.ndarray:
    """Evaluate the path surrogate at one lambda (range-checked)."""
    return path.query(lam)


def residual_norm(
    problem: ProblemOracle,
    x: np.ndarray,
    lam: float,
    counters: OracleCounters | None = None,
) -> float:
    """||grad f(x) + lambda grad Omega(x)||, charged to metric_evals."""
    if lam <= 0.0 or not math.isfinite(lam):
        raise ValueError(f"lambda must be positive and finite, got {lam}")
    g = problem.f_grad(x) + lam * problem.omega_grad(x)
    if counters is not None:
        counters.metric_evals += 1
    return float(np.linalg.norm(g))


def _residuals_batch(
    problem: ProblemOracle,
    X: np.ndarray,
    lams: np.ndarray,
    counters: OracleCounters | None,
) -> np.ndarray:
    if problem.f_grad_batch is not None and problem.omega_grad_batch is not None:
        G = problem.f_grad_batch(X) + lams[:, None] * problem.omega_grad_batch(X)
        out = np.linalg.norm(G, axis=1)
    else:
        out = np.array(
            [
                np.linalg.norm(problem.f_grad(x) + lam * problem.omega_grad(x))
                for x, lam in zip(X, lams)
            ]
        )
    if counters is not None:
        counters.metric_evals += len(lams)
    return out


def accuracy_midpoint(
    problem: ProblemOracle,
    path: _PathBase,
    counters: OracleCounters | None = None,
) -> float:
    """Max residual over all knots and arithmetic midpoints of knot intervals."""
    lams = path.lams
    mids = 0.5 * (lams[:-1] + lams[1:])
    eval_lams = np.concatenate([lams, mids])
    worst = 0.0
    for start in range(0, len(eval_lams), DENSE_CHUNK):
        chunk = eval_lams[start : start + DENSE_CHUNK]
        X = path.query_batch(chunk)
        res = _residuals_batch(problem, X, chunk, counters)
        worst = max(worst, float(np.max(res)))
    return worst


def accuracy_dense(
    problem: ProblemOracle,
    path: _PathBase,
    points_per_interval: int,
    counters: OracleCounters | None = None,
) -> float:
    """Max residual over a uniform lambda grid of the stated density per interval.

    Each interval contributes points_per_interval equispaced points
    including both endpoints (so points_per_interval >= 2).  Work is
    chunked so dense sweeps over long paths stay within memory.
    """
    if points_per_interval < 2:
        raise ValueError("points_per_interval must be at least 2")
    lams = path.lams
    n_int = len(lams) - 1
    t = np.linspace(0.0, 1.0, points_per_interval)
    worst = 0.0
    per_chunk = max(1, DENSE_CHUNK // points_per_interval)
    for start in range(0, n_int, per_chunk):
        stop = min(start + per_chunk, n_int)
        hi = lams[start:stop, None]
        lo = lams[start + 1 : stop + 1, None]
        grid = (hi + (lo - hi) * t[None, :]).ravel()
        X = path.query_batch(grid)
        res = _residuals_batch(problem, X, grid, counters)
        worst = max(worst, float(np.max(res)))
    return worst


def export_path_csv(path: _PathBase, file_path: str) -> None:
    """Write knots as CSV with header lambda,x_1,...,x_p at 17 significant digits."""
    dim = path._X.shape[1]
    header = "lambda," + ",".join(f"x_{j}" for j in range(1, dim + 1))
    with open(file_path, "w", encoding="utf-8") as fh:
        fh.write(header + "\n")
        for knot in path.knots:
            row = [format(knot.lam, ".17g")] + [format(v, ".17g") for v in knot.x]
            fh.write(",".join(row) + "\n")
