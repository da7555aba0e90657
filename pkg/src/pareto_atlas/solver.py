"""Damped Newton solver for weighted scalarizations.

For a weight w on the simplex the scalarized objective g = sum_i w_i f_i is
strongly convex, so the mixed Hessian sum_i w_i H(f_i) is positive definite
wherever at least one weight is positive and Newton steps (with Armijo
backtracking) converge to the unique minimizer, which is the Pareto point
attached to w.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np
from scipy.linalg import cho_factor, cho_solve

from .diagnostics import DEFAULT_RANK_TOL, rank_report
from .problems import Weight, restrict

__all__ = [
    "SolverConfig",
    "SolverError",
    "SingularNewtonSystem",
    "MaxIterExceeded",
    "ParetoPoint",
    "minimize_weighted",
    "scalarize",
    "subproblem_solve",
    "x_star_derivative",
]


class SolverError(RuntimeError):
    pass


class SingularNewtonSystem(SolverError):
    """Mixed Hessian failed its Cholesky factorization."""


class MaxIterExceeded(SolverError):
    """Iteration budget exhausted; carries the best iterate seen."""

    def __init__(self, x: np.ndarray, residual: float, iterations: int, tol: float):
        super().__init__(
            f"no convergence after {iterations} iterations "
            f"(residual {residual:.3e}, tol {tol:.3e})"
        )
        self.x = x
        self.residual = residual
        self.iterations = iterations
        self.tol = tol


@dataclass(frozen=True)
class SolverConfig:
    grad_tol: float = 1e-10  # scaled by max(1, initial gradient norm)
    max_iter: int = 200
    armijo_c: float = 1e-4
    armijo_shrink: float = 0.5
    initial_point: np.ndarray | None = None
    rank_tol: float = DEFAULT_RANK_TOL


DEFAULT_CONFIG = SolverConfig()


@dataclass
class ParetoPoint:
    """A solved scalarization: weight, minimizer, values and rank data."""

    weight: Weight
    x: np.ndarray
    fx: np.ndarray
    kkt_residual: float
    jacobian_sv: np.ndarray
    corank: int
    iterations: int
    grad_tol: float  # the effective (scaled) tolerance this solve used
    converged: bool = True


def _mixed(weights: np.ndarray, stack: np.ndarray) -> np.ndarray:
    return np.tensordot(weights, stack, axes=(0, 0))


def minimize_weighted(problem, weights, config: SolverConfig = DEFAULT_CONFIG, x0=None):
    """Minimize sum_i weights_i f_i by damped Newton.

    ``weights`` is any nonnegative, nonzero vector (no simplex normalization
    required here; the minimizer is invariant under positive scaling).
    Returns (x, residual, iterations, effective_tol).  Raises
    SingularNewtonSystem or MaxIterExceeded on failure.
    """
    w = np.asarray(weights, dtype=float)
    if w.shape != (problem.m,):
        raise ValueError(f"expected {problem.m} weights, got shape {w.shape}")
    if (w < 0).any() or not w.any():
        raise ValueError("weights must be nonnegative and not all zero")

    if x0 is not None:
        x = np.array(x0, dtype=float)
    elif config.initial_point is not None:
        x = np.array(config.initial_point, dtype=float)
    else:
        x = np.zeros(problem.n)

    grad = w @ problem.gradients(x)
    tol = config.grad_tol * max(1.0, float(np.linalg.norm(grad)))
    best_x, best_res = x.copy(), float(np.linalg.norm(grad))
    for iteration in range(config.max_iter):
        res = float(np.linalg.norm(grad))
        if res < best_res:
            best_x, best_res = x.copy(), res
        if res <= tol:
            return x, res, iteration, tol
        hess = _mixed(w, problem.hessians(x))
        try:
            factor = cho_factor(hess, lower=True)
        except np.linalg.LinAlgError as exc:
            raise SingularNewtonSystem(
                f"mixed Hessian not positive definite at iteration {iteration}"
            ) from exc
        direction = cho_solve(factor, -grad)
        slope = float(grad @ direction)
        value = float(w @ problem.values(x))
        alpha, accepted = 1.0, False
        while alpha > 1e-14:
            trial = x + alpha * direction
            if float(w @ problem.values(trial)) <= value + config.armijo_c * alpha * slope:
                accepted = True
                break
            alpha *= config.armijo_shrink
        if not accepted:
            break  # flat to rounding; final residual check decides below
        x = trial
        grad = w @ problem.gradients(x)

    res = float(np.linalg.norm(grad))
    if res <= tol:
        return x, res, config.max_iter, tol
    if best_res <= tol:
        return best_x, best_res, config.max_iter, tol
    raise MaxIterExceeded(best_x, best_res, config.max_iter, tol)


def _finish(problem, weight: Weight, x, res, iters, tol, rank_tol) -> ParetoPoint:
    jac = problem.gradients(x)
    rep = rank_report(jac, rank_tol)
    return ParetoPoint(
        weight=weight,
        x=x,
        fx=problem.values(x),
        kkt_residual=res,
        jacobian_sv=rep.singular_values,
        corank=rep.corank,
        iterations=iters,
        grad_tol=tol,
    )


def scalarize(problem, weight, config: SolverConfig = DEFAULT_CONFIG, x0=None) -> ParetoPoint:
    """Pareto point for a simplex weight.

    Accepts a Weight or a raw coordinate vector (validated on the way in).
    The returned point stores the Jacobian singular values and corank at the
    minimizer so downstream certificates can reuse or recompute them.
    """
    if not isinstance(weight, Weight):
        weight = Weight.of(weight)
    if weight.m != problem.m:
        raise ValueError(f"weight has {weight.m} coordinates, problem has m={problem.m}")
    x, res, iters, tol = minimize_weighted(problem, weight.coordinates, config, x0=x0)
    return _finish(problem, weight, x, res, iters, tol, config.rank_tol)


def subproblem_solve(problem, indices, face_weight, config: SolverConfig = DEFAULT_CONFIG, x0=None) -> ParetoPoint:
    """Pareto point of the restricted problem keeping objectives ``indices``.

    ``face_weight`` may be given in face coordinates (length = len(indices))
    or as a full-length weight supported on the face.  The returned point is
    a point of the restricted problem: its weight and values have one entry
    per kept objective.
    """
    sub = restrict(problem, indices)
    w = np.asarray(getattr(face_weight, "coordinates", face_weight), dtype=float)
    if w.shape == (problem.m,):
        off = np.delete(w, sub.indices)
        if off.size and np.abs(off).max() != 0.0:
            raise ValueError("full-length face weight has mass outside the face")
        w = w[list(sub.indices)]
    if w.shape != (sub.m,):
        raise ValueError(f"face weight must have length {sub.m} or {problem.m}")
    weight = Weight.of(w)
    x, res, iters, tol = minimize_weighted(sub, weight.coordinates, config, x0=x0)
    return _finish(sub, weight, x, res, iters, tol, config.rank_tol)


def x_star_derivative(problem, point: ParetoPoint) -> np.ndarray:
    """Derivative of the minimizer map in simplex chart coordinates.

    The chart takes the first m-1 weight coordinates z = (w_1, ..., w_{m-1})
    as free parameters with w_m = 1 - sum(z).  Column j (0-based) is

        d x*(z) / d z_j = -A (grad f_{j+1} - grad f_m)

    where A is the inverse of the mixed Hessian at the minimizer.  Shape
    (n, m-1); for a single objective the chart is empty.
    """
    w = point.weight.coordinates
    x = point.x
    m = problem.m
    if m == 1:
        return np.zeros((problem.n, 0))
    grads = problem.gradients(x)
    mixed = _mixed(w, problem.hessians(x))
    try:
        factor = cho_factor(mixed, lower=True)
    except np.linalg.LinAlgError as exc:
        raise SingularNewtonSystem("mixed Hessian not positive definite") from exc
    rhs = (grads[:-1] - grads[-1]).T  # (n, m-1)
    return -cho_solve(factor, rhs)
