"""Application instances: facility location, anisotropic traits, ridge paths.

These wire the atlas machinery to families with known structure, and check
the computed sets against independent routes (closed forms, hull membership
by linear programming, normal-equation solves).
"""
from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np
from scipy.optimize import linprog

from .atlas import (
    FaceConsistencyReport,
    InjectivityReport,
    ParetoAtlas,
    build_atlas,
    face_consistency,
    injectivity_scan,
)
from .diagnostics import DEFAULT_RANK_TOL, CorankCertificate, certify_corank_on_atlas
from .problems import DistanceSquared, Phenotypic, RidgePair, Weight, build_problem
from .solver import DEFAULT_CONFIG, SolverConfig, scalarize

__all__ = [
    "LocationInstance",
    "LocationReport",
    "location_pareto_set",
    "PhenotypicReport",
    "phenotypic_pareto_set",
    "RidgeInstance",
    "RidgePathRow",
    "RidgePathReport",
    "ridge_path",
    "write_ridge_csv",
]


# ---------------------------------------------------------------------------
# Facility location (squared Euclidean distances)
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class LocationInstance:
    """Demand points for the squared-distance location problem."""

    points: np.ndarray  # (m, n)

    def __post_init__(self):
        object.__setattr__(self, "points", np.asarray(self.points, dtype=float))

    @property
    def general_position(self) -> bool:
        """Affine independence of the demand points."""
        p = self.points
        if p.shape[0] == 1:
            return True
        span = p[1:] - p[0]
        sv = np.linalg.svd(span, compute_uv=False)
        return bool(sv.size == p.shape[0] - 1 and sv[-1] > 1e-9 * max(sv[0], 1.0))


def _hull_violation(points: np.ndarray, x: np.ndarray) -> float:
    """Distance (inf-norm) from x to the convex hull of the rows, by LP.

    Minimizes t subject to |P^T lam - x|_inf <= t over barycentric lam.
    """
    m, n = points.shape
    c = np.zeros(m + 1)
    c[-1] = 1.0
    rows = []
    rhs = []
    for j in range(n):
        rows.append(np.concatenate([points[:, j], [-1.0]]))
        rhs.append(x[j])
        rows.append(np.concatenate([-points[:, j], [-1.0]]))
        rhs.append(-x[j])
    a_eq = np.concatenate([np.ones(m), [0.0]])[None, :]
    res = linprog(
        c,
        A_ub=np.array(rows),
        b_ub=np.array(rhs),
        A_eq=a_eq,
        b_eq=[1.0],
        bounds=[(0.0, None)] * m + [(0.0, None)],
        method="highs",
    )
    if res.status != 0:
        return np.inf
    return float(res.x[-1])


@dataclass
class LocationReport:
    atlas: ParetoAtlas
    general_position: bool
    max_barycentric_error: float  # |x(w) - sum_i w_i p_i|, max over nodes
    max_hull_violation: float  # LP hull membership, max over nodes
    corank_certificate: CorankCertificate
    injectivity: InjectivityReport

    def as_dict(self) -> dict:
        return {
            "schema": "pareto-atlas/location-v1",
            "general_position": self.general_position,
            "max_barycentric_error": self.max_barycentric_error,
            "max_hull_violation": self.max_hull_violation,
            "corank": {
                "tolerance": self.corank_certificate.tolerance,
                "max_corank": self.corank_certificate.max_corank,
                "witnesses": self.corank_certificate.witnesses,
            },
            "injective_on_sample": self.injectivity.injective_on_sample,
            "summary": self.atlas.summary.as_dict(),
        }


def location_pareto_set(
    instance: LocationInstance,
    resolution: int,
    config: SolverConfig = DEFAULT_CONFIG,
    rank_tol: float = DEFAULT_RANK_TOL,
) -> LocationReport:
    """Atlas for a location instance, checked two independent ways.

    The minimizer for weight w has the closed form sum_i w_i p_i, so every
    atlas point is compared against that barycenter and, separately, run
    through an LP membership test for the convex hull of the demand points.
    """
    problem = build_problem(DistanceSquared(instance.points))
    atlas = build_atlas(problem, resolution, config)
    ws = atlas.w_array()
    xs = atlas.x_array()
    expected = ws @ instance.points
    bary_err = float(np.linalg.norm(xs - expected, axis=1).max())
    hull = max(_hull_violation(instance.points, x) for x in xs)
    cert = certify_corank_on_atlas(atlas, rank_tol)
    return LocationReport(
        atlas=atlas,
        general_position=instance.general_position,
        max_barycentric_error=bary_err,
        max_hull_violation=float(hull),
        corank_certificate=cert,
        injectivity=injectivity_scan(atlas),
    )


# ---------------------------------------------------------------------------
# Anisotropic squared distances
# ---------------------------------------------------------------------------


@dataclass
class PhenotypicReport:
    atlas: ParetoAtlas
    corank_certificate: CorankCertificate
    face_report: FaceConsistencyReport
    weakly_simplicial_on_sample: bool

    def as_dict(self) -> dict:
        return {
            "schema": "pareto-atlas/phenotypic-v1",
            "weakly_simplicial_on_sample": self.weakly_simplicial_on_sample,
            "corank": {
                "tolerance": self.corank_certificate.tolerance,
                "max_corank": self.corank_certificate.max_corank,
                "witnesses": self.corank_certificate.witnesses,
            },
            "face_consistency": {
                "consistent": self.face_report.consistent,
                "max_discrepancy": self.face_report.max_discrepancy,
                "tolerance": self.face_report.tolerance,
                "checked": self.face_report.checked,
            },
            "summary": self.atlas.summary.as_dict(),
        }


def phenotypic_pareto_set(
    mats,
    points,
    resolution: int,
    config: SolverConfig = DEFAULT_CONFIG,
    rank_tol: float = DEFAULT_RANK_TOL,
) -> PhenotypicReport:
    """Atlas plus per-instance certificates for anisotropic distances.

    The verdict is sampled: corank <= 1 at every node and face-nesting
    consistency on every boundary node.  It holds for the instance at this
    resolution; it is not a statement about the family.
    """
    problem = build_problem(Phenotypic(np.asarray(mats, float), np.asarray(points, float)))
    atlas = build_atlas(problem, resolution, config)
    cert = certify_corank_on_atlas(atlas, rank_tol)
    faces = face_consistency(atlas, config)
    return PhenotypicReport(
        atlas=atlas,
        corank_certificate=cert,
        face_report=faces,
        weakly_simplicial_on_sample=cert.simplicial_on_sample and faces.consistent,
    )


# ---------------------------------------------------------------------------
# Ridge regularization paths
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class RidgeInstance:
    x_data: np.ndarray
    y_data: np.ndarray
    mu: float

    def __post_init__(self):
        object.__setattr__(self, "x_data", np.asarray(self.x_data, dtype=float))
        object.__setattr__(self, "y_data", np.asarray(self.y_data, dtype=float))

    @classmethod
    def from_csv(cls, path, mu: float) -> "RidgeInstance":
        """Load a numeric design matrix; last column is the response.

        A non-numeric first row is treated as a header and skipped.
        """
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
        if not rows:
            raise ValueError(f"{path}: empty file")
        start = 0
        try:
            float(rows[0][0])
        except ValueError:
            start = 1
        data = np.array([[float(v) for v in row] for row in rows[start:] if row])
        if data.ndim != 2 or data.shape[1] < 2:
            raise ValueError(f"{path}: need at least one feature column plus a response")
        return cls(data[:, :-1], data[:, -1], mu)


def ridge_lambda(w1: float, w2: float, mu: float) -> float:
    """Regularization strength mu + w2/w1, with w1 clamped at machine epsilon."""
    return mu + w2 / max(w1, np.finfo(float).eps)


@dataclass
class RidgePathRow:
    w1: float
    w2: float
    lam: float
    theta: np.ndarray
    kkt_residual: float
    oracle_gap: float  # distance to the normal-equations solution


@dataclass
class RidgePathReport:
    mu: float
    resolution: int
    rows: list[RidgePathRow]
    max_oracle_gap: float

    def theta_norms(self) -> np.ndarray:
        return np.array([np.linalg.norm(r.theta) for r in self.rows])

    def lambdas(self) -> np.ndarray:
        return np.array([r.lam for r in self.rows])


def ridge_path(
    instance: RidgeInstance,
    resolution: int,
    config: SolverConfig = DEFAULT_CONFIG,
) -> RidgePathReport:
    """Sweep the two-objective trade-off from pure fit to pure shrinkage.

    Rows go from w = (1, 0) to w = (1/r, 1 - 1/r); the w1 = 0 vertex is
    appended explicitly with lambda = inf and theta = 0.  Every solved theta
    is compared against an independent normal-equations solve of
    (X^T X + lambda I) theta = X^T y.
    """
    problem = build_problem(RidgePair(instance.x_data, instance.y_data, instance.mu))
    xtx = instance.x_data.T @ instance.x_data
    xty = instance.x_data.T @ instance.y_data
    p = problem.n
    rows: list[RidgePathRow] = []
    warm = None
    for k in range(resolution, 0, -1):
        w1 = k / resolution
        w2 = 1.0 - w1
        face = (0,) if k == resolution else (0, 1)
        pt = scalarize(problem, Weight(np.array([w1, w2]), face), config, x0=warm)
        warm = pt.x
        lam = ridge_lambda(w1, w2, instance.mu)
        oracle = np.linalg.solve(xtx + lam * np.eye(p), xty)
        rows.append(
            RidgePathRow(
                w1=w1,
                w2=w2,
                lam=lam,
                theta=pt.x,
                kkt_residual=pt.kkt_residual,
                oracle_gap=float(np.linalg.norm(pt.x - oracle)),
            )
        )
    vertex = scalarize(problem, Weight(np.array([0.0, 1.0]), (1,)), config, x0=warm)
    rows.append(
        RidgePathRow(
            w1=0.0,
            w2=1.0,
            lam=np.inf,
            theta=vertex.x,
            kkt_residual=vertex.kkt_residual,
            oracle_gap=float(np.linalg.norm(vertex.x)),
        )
    )
    return RidgePathReport(
        mu=instance.mu,
        resolution=resolution,
        rows=rows,
        max_oracle_gap=max(r.oracle_gap for r in rows),
    )


def write_ridge_csv(report: RidgePathReport, path) -> None:
    """Columns: w1, w2, lambda, theta_1..theta_p, residual."""
    p = report.rows[0].theta.size
    header = ["w1", "w2", "lambda"] + [f"theta_{i + 1}" for i in range(p)] + ["residual"]
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for r in report.rows:
            writer.writerow(
                [f"{r.w1:.17g}", f"{r.w2:.17g}", f"{r.lam:.17g}"]
                + [f"{v:.17g}" for v in r.theta]
                + [f"{r.kkt_residual:.17g}"]
            )
