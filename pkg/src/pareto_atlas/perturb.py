"""Linear perturbations: genericity trials, corank-2 tracking, stability.

A linear perturbation adds pi_i . x to objective i.  Gradients shift by a
constant, Hessians (hence strong convexity) are untouched.  Draws are seeded
and scale linearly: the same seed at a smaller scale gives the same
direction, shrunk.
"""
from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import linprog

from .atlas import ParetoAtlas, build_atlas
from .diagnostics import (
    DEFAULT_RANK_TOL,
    CorankCertificate,
    certify_corank_on_atlas,
    cokernel_basis,
    corank_at,
)
from .solver import DEFAULT_CONFIG, SolverConfig, scalarize

__all__ = [
    "LinearPerturbation",
    "PerturbedProblem",
    "perturb_problem",
    "GenericityTrial",
    "GenericityReport",
    "genericity_experiment",
    "DBlockSingular",
    "TrackerDiverged",
    "TrackerReport",
    "corank2_system",
    "corank2_tracker",
    "StabilityReport",
    "stability_experiment",
    "default_workers",
]

WORKERS_ENV = "PARETO_ATLAS_WORKERS"


def default_workers() -> int:
    try:
        return max(1, int(os.environ.get(WORKERS_ENV, "1")))
    except ValueError:
        return 1


@dataclass(frozen=True)
class LinearPerturbation:
    """Per-objective linear terms pi (m, n), drawn uniformly from [-scale, scale]."""

    coefficients: np.ndarray
    seed: int | None = None
    scale: float = 0.0

    def __post_init__(self):
        object.__setattr__(
            self, "coefficients", np.asarray(self.coefficients, dtype=float)
        )

    @classmethod
    def draw(cls, n: int, m: int, seed: int, scale: float) -> "LinearPerturbation":
        rng = np.random.default_rng(seed)
        coeff = rng.uniform(-scale, scale, size=(m, n))
        return cls(coeff, seed=seed, scale=scale)

    @classmethod
    def zero(cls, n: int, m: int) -> "LinearPerturbation":
        return cls(np.zeros((m, n)), seed=None, scale=0.0)


class PerturbedProblem:
    """Base problem with pi_i . x added to objective i."""

    def __init__(self, base, perturbation: LinearPerturbation):
        if perturbation.coefficients.shape != (base.m, base.n):
            raise ValueError(
                f"perturbation shape {perturbation.coefficients.shape} does not "
                f"match problem (m={base.m}, n={base.n})"
            )
        self.base = base
        self.perturbation = perturbation
        self.n = base.n
        self.m = base.m
        self.family = None

    def values(self, x):
        return self.base.values(x) + self.perturbation.coefficients @ np.asarray(x, float)

    def gradients(self, x):
        return self.base.gradients(x) + self.perturbation.coefficients

    def hessians(self, x):
        return self.base.hessians(x)

    def evaluate(self, x):
        f, g, h = self.base.evaluate(x)
        coeff = self.perturbation.coefficients
        return f + coeff @ np.asarray(x, float), g + coeff, h

    def __repr__(self):
        return f"PerturbedProblem({self.base!r}, scale={self.perturbation.scale:g})"


def perturb_problem(problem, perturbation: LinearPerturbation) -> PerturbedProblem:
    return PerturbedProblem(problem, perturbation)


# ---------------------------------------------------------------------------
# Genericity experiment
# ---------------------------------------------------------------------------


@dataclass
class GenericityTrial:
    trial: int
    seed: int
    scale: float
    certificates: dict[float, CorankCertificate]
    max_kkt_residual: float

    def max_corank(self, tol: float) -> int:
        return self.certificates[tol].max_corank


@dataclass
class GenericityReport:
    """Coranks of randomly perturbed problems over an atlas sample.

    For families below the dimension threshold, perturbed problems should
    show corank <= 1 everywhere; a corank-2 witness in any trial refutes
    genericity at the sampled resolution.
    """

    trials: int
    scale: float
    resolution: int
    base_seed: int
    rank_tols: tuple[float, ...]
    results: list[GenericityTrial]

    def corank2_trials(self, tol: float) -> list[int]:
        return [t.trial for t in self.results if t.max_corank(tol) >= 2]

    def all_simplicial(self, tol: float) -> bool:
        return not self.corank2_trials(tol)

    def as_dict(self) -> dict:
        return {
            "schema": "pareto-atlas/genericity-v1",
            "trials": self.trials,
            "scale": self.scale,
            "resolution": self.resolution,
            "base_seed": self.base_seed,
            "rank_tols": list(self.rank_tols),
            "results": [
                {
                    "trial": t.trial,
                    "seed": t.seed,
                    "max_corank": {str(tol): t.max_corank(tol) for tol in self.rank_tols},
                    "corank2_witnesses": {
                        str(tol): t.certificates[tol].witnesses for tol in self.rank_tols
                    },
                    "max_kkt_residual": t.max_kkt_residual,
                }
                for t in self.results
            ],
            "corank2_trials": {
                str(tol): self.corank2_trials(tol) for tol in self.rank_tols
            },
        }


def genericity_experiment(
    problem,
    trials: int,
    scale: float,
    resolution: int,
    rank_tols=(DEFAULT_RANK_TOL,),
    seed: int = 0,
    config: SolverConfig = DEFAULT_CONFIG,
    workers: int | None = None,
) -> GenericityReport:
    """Atlas + corank sweep for ``trials`` seeded random perturbations.

    Trial t draws its perturbation with seed ``seed + t``, so runs are
    reproducible point by point.  Worker count defaults to the
    PARETO_ATLAS_WORKERS environment variable (1 = sequential).
    """
    tols = tuple(float(t) for t in np.atleast_1d(rank_tols))

    def run(trial: int) -> GenericityTrial:
        pi = LinearPerturbation.draw(problem.n, problem.m, seed + trial, scale)
        atlas = build_atlas(perturb_problem(problem, pi), resolution, config)
        certs = {tol: certify_corank_on_atlas(atlas, tol) for tol in tols}
        return GenericityTrial(
            trial=trial,
            seed=seed + trial,
            scale=scale,
            certificates=certs,
            max_kkt_residual=atlas.summary.max_kkt_residual,
        )

    count = workers if workers is not None else default_workers()
    if count > 1:
        with ThreadPoolExecutor(max_workers=count) as pool:
            results = list(pool.map(run, range(trials)))
    else:
        results = [run(t) for t in range(trials)]
    return GenericityReport(
        trials=trials,
        scale=scale,
        resolution=resolution,
        base_seed=seed,
        rank_tols=tols,
        results=results,
    )


# ---------------------------------------------------------------------------
# Corank-2 tracker for square (n = m = 4) mappings
# ---------------------------------------------------------------------------


class DBlockSingular(RuntimeError):
    """Trailing 2x2 block of the transposed Jacobian is singular."""


class TrackerDiverged(RuntimeError):
    """Newton iteration on the reduced system failed to converge."""


def corank2_system(problem, x):
    """Schur complement E and its derivative for a square 4 -> 4 mapping.

    Splits the transposed Jacobian (rows = variables, columns = objectives)
    into 2x2 blocks [[A, B], [C, D]] and returns E = A - B D^-1 C together
    with dE (shape (4, 2, 2); dE[l] is the derivative in x_l).  Zeros of E
    are exactly the points where the Jacobian drops rank by 2, as long as D
    stays invertible.
    """
    x = np.asarray(x, dtype=float)
    if problem.n != 4 or problem.m != 4:
        raise ValueError("corank-2 tracking expects a square 4 -> 4 mapping")
    mt = problem.gradients(x).T
    a, b = mt[:2, :2], mt[:2, 2:]
    c, d = mt[2:, :2], mt[2:, 2:]
    try:
        y = np.linalg.solve(d, c)  # D^-1 C
        z = np.linalg.solve(d.T, b.T).T  # B D^-1
    except np.linalg.LinAlgError as exc:
        raise DBlockSingular(f"D block singular at x={x.tolist()}") from exc
    e = a - b @ y
    hess = problem.hessians(x)
    de = np.zeros((4, 2, 2))
    for l in range(4):
        dmt = hess[:, :, l].T  # (variables, objectives)
        da, db = dmt[:2, :2], dmt[:2, 2:]
        dc, dd = dmt[2:, :2], dmt[2:, 2:]
        de[l] = da - db @ y - z @ dc + z @ dd @ y
    return e, de


@dataclass
class TrackerReport:
    x_hat: np.ndarray
    e_norm: float
    iterations: int
    corank: int
    singular_values: np.ndarray
    cokernel: np.ndarray  # (4, k) orthonormal
    meets_simplex_interior: bool
    interior_margin: float
    interior_witness: np.ndarray | None
    perturbation: LinearPerturbation

    def as_dict(self) -> dict:
        return {
            "schema": "pareto-atlas/tracker-v1",
            "x_hat": self.x_hat.tolist(),
            "e_norm": self.e_norm,
            "iterations": self.iterations,
            "corank": self.corank,
            "singular_values": self.singular_values.tolist(),
            "cokernel": self.cokernel.tolist(),
            "meets_simplex_interior": self.meets_simplex_interior,
            "interior_margin": self.interior_margin,
            "interior_witness": (
                None if self.interior_witness is None else self.interior_witness.tolist()
            ),
            "perturbation": {
                "seed": self.perturbation.seed,
                "scale": self.perturbation.scale,
                "coefficients": self.perturbation.coefficients.tolist(),
            },
        }


def _interior_intersection(cok: np.ndarray):
    """Maximize t with K c >= t componentwise and sum(K c) = 1 (an LP).

    A positive optimum exhibits a cokernel vector inside the open simplex;
    infeasibility or t <= 0 means the cokernel misses the interior.
    """
    k = cok.shape[1]
    if k == 0:
        return False, -np.inf, None
    c_obj = np.zeros(k + 1)
    c_obj[-1] = -1.0  # maximize t
    a_ub = np.hstack([-cok, np.ones((cok.shape[0], 1))])
    b_ub = np.zeros(cok.shape[0])
    a_eq = np.concatenate([cok.sum(axis=0), [0.0]])[None, :]
    res = linprog(
        c_obj,
        A_ub=a_ub,
        b_ub=b_ub,
        A_eq=a_eq,
        b_eq=[1.0],
        bounds=[(None, None)] * (k + 1),
        method="highs",
    )
    if res.status != 0:
        return False, -np.inf, None
    margin = float(res.x[-1])
    witness = cok @ res.x[:-1]
    return margin > 1e-9, margin, (witness if margin > 1e-9 else None)


def corank2_tracker(
    problem,
    perturbation: LinearPerturbation | None = None,
    config: SolverConfig = DEFAULT_CONFIG,
    rank_tol: float = DEFAULT_RANK_TOL,
    e_tol: float = 1e-12,
    max_iter: int = 60,
) -> TrackerReport:
    """Track the corank-2 point of a square 4 -> 4 mapping under perturbation.

    Newton-solves E(x, pi) = 0 for the Schur complement of ``corank2_system``
    starting from the configured initial point (default: origin).  Reports
    the corank and cokernel at the root and whether the cokernel meets the
    open weight simplex, which is what makes the degenerate point a genuine
    obstruction rather than an invisible one.
    """
    if perturbation is None:
        perturbation = LinearPerturbation.zero(problem.n, problem.m)
    target = perturb_problem(problem, perturbation)
    x = (
        np.array(config.initial_point, dtype=float)
        if config.initial_point is not None
        else np.zeros(4)
    )
    e, de = corank2_system(target, x)
    iterations = 0
    while np.linalg.norm(e) > e_tol and iterations < max_iter:
        jac = de.transpose(1, 2, 0).reshape(4, 4)
        try:
            step = np.linalg.solve(jac, -e.reshape(4))
        except np.linalg.LinAlgError as exc:
            raise TrackerDiverged("reduced Newton system singular") from exc
        x = x + step
        e, de = corank2_system(target, x)
        iterations += 1
    e_norm = float(np.linalg.norm(e))
    if e_norm > e_tol:
        raise TrackerDiverged(
            f"no root after {max_iter} iterations (|E| = {e_norm:.3e})"
        )
    rep = corank_at(target, x, rank_tol)
    cok = cokernel_basis(target, x, rank_tol)
    meets, margin, witness = _interior_intersection(cok)
    return TrackerReport(
        x_hat=x,
        e_norm=e_norm,
        iterations=iterations,
        corank=rep.corank,
        singular_values=rep.singular_values,
        cokernel=cok,
        meets_simplex_interior=meets,
        interior_margin=margin,
        interior_witness=witness,
        perturbation=perturbation,
    )


# ---------------------------------------------------------------------------
# Stability under shrinking perturbations
# ---------------------------------------------------------------------------


@dataclass
class StabilityRow:
    scale: float
    seed: int
    sup_displacement: float
    mean_displacement: float


@dataclass
class StabilityReport:
    resolution: int
    seed: int
    rows: list[StabilityRow]

    def as_dict(self) -> dict:
        return {
            "schema": "pareto-atlas/stability-v1",
            "resolution": self.resolution,
            "seed": self.seed,
            "rows": [r.__dict__.copy() for r in self.rows],
        }


def stability_experiment(
    problem,
    scales,
    resolution: int,
    seed: int = 0,
    config: SolverConfig = DEFAULT_CONFIG,
) -> StabilityReport:
    """Sup-displacement of the solution map under one shrinking perturbation.

    All scales reuse the same seed, so they perturb along a single direction
    with decreasing magnitude; displacements should decrease accordingly.
    Each perturbed solve warm-starts at the unperturbed minimizer.
    """
    base = build_atlas(problem, resolution, config)
    rows = []
    for scale in scales:
        pi = LinearPerturbation.draw(problem.n, problem.m, seed, float(scale))
        target = perturb_problem(problem, pi)
        gaps = np.empty(base.grid.node_count)
        for i, pt in enumerate(base.points):
            moved = scalarize(target, pt.weight, config, x0=pt.x)
            gaps[i] = np.linalg.norm(moved.x - pt.x)
        rows.append(
            StabilityRow(
                scale=float(scale),
                seed=seed,
                sup_displacement=float(gaps.max()),
                mean_displacement=float(gaps.mean()),
            )
        )
    return StabilityReport(resolution=resolution, seed=seed, rows=rows)
