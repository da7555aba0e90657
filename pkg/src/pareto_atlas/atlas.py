"""Atlas of Pareto points over a barycentric grid on the weight simplex.

The grid puts nodes at integer combinations k/r (k nonnegative integers
summing to r).  Nodes are solved in breadth-first order from the barycenter
so that each solve warm-starts from an already-solved neighbor; for the
quadratic families this makes every solve a single Newton step.
"""
from __future__ import annotations

import csv
import json
from collections import deque
from dataclasses import dataclass
from functools import cached_property

import numpy as np
from scipy.spatial.distance import cdist

from .ordering import DOMINANCE_TOL, dominating_pairs
from .problems import Weight
from .solver import (
    DEFAULT_CONFIG,
    MaxIterExceeded,
    ParetoPoint,
    SolverConfig,
    scalarize,
    subproblem_solve,
)

__all__ = [
    "SimplexGrid",
    "ParetoAtlas",
    "AtlasSummary",
    "FaceConsistencyReport",
    "InjectivityReport",
    "build_atlas",
    "face_consistency",
    "injectivity_scan",
]


def _compositions(total: int, parts: int):
    if parts == 1:
        yield (total,)
        return
    for head in range(total + 1):
        for rest in _compositions(total - head, parts - 1):
            yield (head,) + rest


class SimplexGrid:
    """Barycentric integer grid of resolution r on the (m-1)-simplex."""

    def __init__(self, m: int, resolution: int):
        if m < 1:
            raise ValueError("m must be >= 1")
        if resolution < 1:
            raise ValueError("resolution must be >= 1")
        self.m = m
        self.resolution = resolution
        self.nodes = np.array(list(_compositions(resolution, m)), dtype=int)
        self.weights = self.nodes / float(resolution)
        self._index = {tuple(k): i for i, k in enumerate(self.nodes.tolist())}

    @property
    def node_count(self) -> int:
        return self.nodes.shape[0]

    @property
    def step(self) -> float:
        """Euclidean length of one grid move (a unit transposition)."""
        return np.sqrt(2.0) / self.resolution

    def face_of(self, i: int) -> tuple[int, ...]:
        return tuple(int(j) for j in np.nonzero(self.nodes[i])[0])

    def weight_of(self, i: int) -> Weight:
        return Weight(self.weights[i], self.face_of(i))

    def neighbors(self, i: int) -> list[int]:
        k = self.nodes[i]
        out = []
        for a in range(self.m):
            if k[a] == 0:
                continue
            for b in range(self.m):
                if b == a:
                    continue
                moved = k.copy()
                moved[a] -= 1
                moved[b] += 1
                out.append(self._index[tuple(moved.tolist())])
        return sorted(set(out))

    @cached_property
    def adjacency(self) -> list[tuple[int, int]]:
        pairs = set()
        for i in range(self.node_count):
            for j in self.neighbors(i):
                pairs.add((min(i, j), max(i, j)))
        return sorted(pairs)

    def bfs_order(self) -> tuple[list[int], dict[int, int]]:
        """Visit order from the node nearest the barycenter, with parents."""
        center = np.full(self.m, 1.0 / self.m)
        start = int(np.argmin(np.linalg.norm(self.weights - center, axis=1)))
        order, parent = [], {start: -1}
        queue = deque([start])
        while queue:
            i = queue.popleft()
            order.append(i)
            for j in self.neighbors(i):
                if j not in parent:
                    parent[j] = i
                    queue.append(j)
        return order, parent


def _face_label(face: tuple[int, ...]) -> str:
    return ";".join(str(i + 1) for i in face)


@dataclass
class AtlasSummary:
    node_count: int
    resolution: int
    unconverged: int
    max_kkt_residual: float
    corank_histogram: dict[int, int]
    dominance_violations: int
    min_pairwise_x_distance: float
    max_adjacent_x_distance: float

    def as_dict(self) -> dict:
        d = self.__dict__.copy()
        d["corank_histogram"] = {str(k): v for k, v in self.corank_histogram.items()}
        return d


class ParetoAtlas:
    """Solved grid: one Pareto point per node, index-aligned with the grid."""

    def __init__(self, problem, grid: SimplexGrid, points: list[ParetoPoint],
                 config: SolverConfig, failures: list[int]):
        self.problem = problem
        self.grid = grid
        self.points = points
        self.config = config
        self.failures = failures

    def w_array(self) -> np.ndarray:
        return self.grid.weights.copy()

    def x_array(self) -> np.ndarray:
        return np.array([pt.x for pt in self.points])

    def f_array(self) -> np.ndarray:
        return np.array([pt.fx for pt in self.points])

    @cached_property
    def summary(self) -> AtlasSummary:
        coranks = [pt.corank for pt in self.points]
        hist: dict[int, int] = {}
        for c in coranks:
            hist[c] = hist.get(c, 0) + 1
        xs = self.x_array()
        dx = cdist(xs, xs)
        np.fill_diagonal(dx, np.inf)
        min_pair = float(dx.min()) if self.grid.node_count > 1 else np.inf
        adj = self.grid.adjacency
        max_adj = max((float(np.linalg.norm(xs[a] - xs[b])) for a, b in adj), default=0.0)
        return AtlasSummary(
            node_count=self.grid.node_count,
            resolution=self.grid.resolution,
            unconverged=len(self.failures),
            max_kkt_residual=max(pt.kkt_residual for pt in self.points),
            corank_histogram=hist,
            dominance_violations=len(dominating_pairs(self.f_array(), DOMINANCE_TOL)),
            min_pairwise_x_distance=min_pair,
            max_adjacent_x_distance=max_adj,
        )

    def report_dict(self) -> dict:
        fam = getattr(self.problem, "family", None)
        nodes = []
        for i, pt in enumerate(self.points):
            nodes.append(
                {
                    "node": i,
                    "w": pt.weight.coordinates.tolist(),
                    "face": [j + 1 for j in self.grid.face_of(i)],
                    "x": pt.x.tolist(),
                    "f": pt.fx.tolist(),
                    "kkt_residual": pt.kkt_residual,
                    "singular_values": pt.jacobian_sv.tolist(),
                    "corank": pt.corank,
                    "converged": pt.converged,
                }
            )
        return {
            "schema": "pareto-atlas/atlas-v1",
            "family": getattr(fam, "tag", None),
            "n": self.problem.n,
            "m": self.problem.m,
            "resolution": self.grid.resolution,
            "tolerances": {
                "grad_tol": self.config.grad_tol,
                "rank_tol": self.config.rank_tol,
            },
            "summary": self.summary.as_dict(),
            "failures": self.failures,
            "nodes": nodes,
        }

    def to_json(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.report_dict(), fh, indent=2)

    def to_csv(self, path) -> None:
        """Delimited export, one row per node.

        Columns: w_1..w_m, x_1..x_n, f_1..f_m, kkt_residual, corank, face
        (face is the 1-based support, ';'-separated).
        """
        m, n = self.problem.m, self.problem.n
        header = (
            [f"w_{i + 1}" for i in range(m)]
            + [f"x_{i + 1}" for i in range(n)]
            + [f"f_{i + 1}" for i in range(m)]
            + ["kkt_residual", "corank", "face"]
        )
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(header)
            for i, pt in enumerate(self.points):
                row = (
                    [f"{v:.17g}" for v in pt.weight.coordinates]
                    + [f"{v:.17g}" for v in pt.x]
                    + [f"{v:.17g}" for v in pt.fx]
                    + [f"{pt.kkt_residual:.17g}", str(pt.corank),
                       _face_label(self.grid.face_of(i))]
                )
                writer.writerow(row)


def build_atlas(problem, resolution: int, config: SolverConfig = DEFAULT_CONFIG) -> ParetoAtlas:
    """Solve every grid node, warm-starting each from its BFS parent."""
    grid = SimplexGrid(problem.m, resolution)
    order, parent = grid.bfs_order()
    points: list[ParetoPoint | None] = [None] * grid.node_count
    failures: list[int] = []
    for i in order:
        p = parent[i]
        warm = points[p].x if p >= 0 else None
        weight = grid.weight_of(i)
        try:
            points[i] = scalarize(problem, weight, config, x0=warm)
        except MaxIterExceeded as exc:
            failures.append(i)
            points[i] = ParetoPoint(
                weight=weight,
                x=exc.x,
                fx=problem.values(exc.x),
                kkt_residual=exc.residual,
                jacobian_sv=np.linalg.svd(problem.gradients(exc.x), compute_uv=False),
                corank=-1,
                iterations=exc.iterations,
                grad_tol=exc.tol,
                converged=False,
            )
    return ParetoAtlas(problem, grid, points, config, sorted(failures))


@dataclass
class FaceConsistencyReport:
    """Agreement between boundary-node solutions and face subproblems."""

    consistent: bool
    max_discrepancy: float
    tolerance: float
    checked: int
    worst_node: int | None
    per_face: dict[tuple[int, ...], float]


def face_consistency(atlas: ParetoAtlas, config: SolverConfig | None = None) -> FaceConsistencyReport:
    """Re-solve every boundary node as a subproblem of its face.

    The subproblem solves start cold (no warm start from the atlas), so the
    comparison is a genuinely independent route to the same minimizer.  The
    acceptance tolerance is 10x the scaled gradient tolerance: for strongly
    convex objectives the minimizer displacement is bounded by the residual
    over the convexity constant.
    """
    config = config or atlas.config
    problem = atlas.problem
    worst, worst_node = 0.0, None
    per_face: dict[tuple[int, ...], float] = {}
    tolerance = 0.0
    checked = 0
    for i, pt in enumerate(atlas.points):
        face = atlas.grid.face_of(i)
        if len(face) == problem.m:
            continue  # improper face: the subproblem is the problem itself
        sub = subproblem_solve(problem, face, pt.weight.coordinates[list(face)], config)
        gap = float(np.linalg.norm(pt.x - sub.x))
        checked += 1
        tolerance = max(tolerance, 10.0 * max(pt.grad_tol, sub.grad_tol))
        per_face[face] = max(per_face.get(face, 0.0), gap)
        if gap > worst:
            worst, worst_node = gap, i
    return FaceConsistencyReport(
        consistent=worst <= tolerance,
        max_discrepancy=worst,
        tolerance=tolerance,
        checked=checked,
        worst_node=worst_node,
        per_face=per_face,
    )


@dataclass
class InjectivityReport:
    """Collapsed node pairs: far apart in weight, same minimizer."""

    injective_on_sample: bool
    collapsed_pairs: list[tuple[int, int]]
    collapse_tol: float
    weight_threshold: float

    def pair_weights(self, atlas: ParetoAtlas):
        return [
            (atlas.grid.weights[a].copy(), atlas.grid.weights[b].copy())
            for a, b in self.collapsed_pairs
        ]


def injectivity_scan(atlas: ParetoAtlas, collapse_tol: float = 1e-6) -> InjectivityReport:
    """Find weight pairs more than two grid steps apart mapping to one point.

    Adjacent or nearly-adjacent nodes legitimately map to nearby minimizers,
    so only pairs with weight distance above twice the grid step count as
    collapses.
    """
    xs = atlas.x_array()
    ws = atlas.grid.weights
    threshold = 2.0 * atlas.grid.step * (1.0 + 1e-9)
    dx = cdist(xs, xs)
    dw = cdist(ws, ws)
    mask = np.triu((dx <= collapse_tol) & (dw > threshold), k=1)
    rows, cols = np.nonzero(mask)
    pairs = list(zip(rows.tolist(), cols.tolist()))
    return InjectivityReport(
        injective_on_sample=not pairs,
        collapsed_pairs=pairs,
        collapse_tol=collapse_tol,
        weight_threshold=threshold,
    )
