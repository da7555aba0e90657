"""Command line interface.

Exit codes: 0 all requested certificates pass, 1 a certificate fails,
2 input or format error, 3 solver failure.
"""
from __future__ import annotations

import argparse
import hashlib
import json
import sys
from pathlib import Path

import numpy as np

from .apps import (
    LocationInstance,
    RidgeInstance,
    location_pareto_set,
    ridge_path,
    write_ridge_csv,
)
from .atlas import build_atlas, face_consistency, injectivity_scan
from .diagnostics import DEFAULT_RANK_TOL, certify_corank_on_atlas
from .perturb import (
    DBlockSingular,
    LinearPerturbation,
    TrackerDiverged,
    corank2_tracker,
    default_workers,
    genericity_experiment,
    stability_experiment,
)
from .problems import (
    BUILTIN_NAMES,
    DistanceSquared,
    ProblemFormatError,
    build_problem,
    builtin_problem,
    check_strong_convexity,
    parse_problem,
    serialize_problem,
)
from .solver import SolverConfig, SolverError, scalarize

OK, CERT_FAIL, INPUT_ERROR, SOLVER_ERROR = 0, 1, 2, 3


def _fmt_vec(v) -> str:
    return "[" + ", ".join(f"{x:.12g}" for x in np.asarray(v).ravel()) + "]"


def _add_problem_args(sub, positional=True):
    if positional:
        sub.add_argument("problem", nargs="?", help="problem JSON file")
    sub.add_argument(
        "--builtin", choices=BUILTIN_NAMES, help="use a named fixture instead of a file"
    )
    sub.add_argument(
        "--epsilon", type=float, default=0.1,
        help="epsilon for --builtin example31_perturbed (default 0.1)",
    )


def _add_solver_args(sub):
    sub.add_argument("--grad-tol", type=float, default=1e-10,
                     help="gradient tolerance, scaled by the initial gradient norm")
    sub.add_argument("--max-iter", type=int, default=200)
    sub.add_argument("--rank-tol", type=float, default=DEFAULT_RANK_TOL,
                     help="relative singular value threshold for rank decisions")


def _config(args) -> SolverConfig:
    return SolverConfig(
        grad_tol=args.grad_tol, max_iter=args.max_iter, rank_tol=args.rank_tol
    )


def _load_problem(args, parser):
    """Problem plus provenance (label, sha256 of the defining JSON)."""
    if getattr(args, "builtin", None):
        if getattr(args, "problem", None):
            parser.error("give either a problem file or --builtin, not both")
        problem = builtin_problem(args.builtin, epsilon=args.epsilon)
        text = serialize_problem(problem)
        return problem, f"builtin:{args.builtin}", hashlib.sha256(text.encode()).hexdigest()
    if not getattr(args, "problem", None):
        parser.error("a problem file or --builtin is required")
    raw = Path(args.problem).read_bytes()
    spec = parse_problem(raw.decode())
    return build_problem(spec), str(args.problem), hashlib.sha256(raw).hexdigest()


def _report(args, doc: dict, lines: list[str]) -> None:
    if getattr(args, "json", False):
        print(json.dumps(doc, indent=2))
    else:
        for line in lines:
            print(line)
    out = getattr(args, "out_report", None)
    if out:
        with open(out, "w") as fh:
            json.dump(doc, fh, indent=2)


def _cert_line(name: str, ok: bool, detail: str) -> str:
    return f"[{'ok' if ok else 'FAIL'}] {name}: {detail}"


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------


def cmd_solve(args, parser) -> int:
    problem, label, digest = _load_problem(args, parser)
    config = _config(args)
    points = []
    lines = [f"problem: {label} (n={problem.n}, m={problem.m}) sha256={digest[:16]}"]
    for spec in args.weight:
        w = np.array([float(t) for t in spec.split(",")])
        pt = scalarize(problem, w, config)
        points.append(
            {
                "w": pt.weight.coordinates.tolist(),
                "x": pt.x.tolist(),
                "f": pt.fx.tolist(),
                "kkt_residual": pt.kkt_residual,
                "corank": pt.corank,
                "iterations": pt.iterations,
            }
        )
        lines.append(
            f"w={_fmt_vec(pt.weight.coordinates)} x={_fmt_vec(pt.x)} "
            f"f={_fmt_vec(pt.fx)} kkt={pt.kkt_residual:.3e} corank={pt.corank}"
        )
    doc = {
        "schema": "pareto-atlas/run-v1",
        "command": "solve",
        "input": {"problem": label, "sha256": digest},
        "points": points,
        "exit_status": OK,
    }
    _report(args, doc, lines)
    return OK


def _convexity_line(problem, count: int, seed: int):
    cert = check_strong_convexity(problem, count=count, seed=seed)
    return cert, cert.describe()


def cmd_atlas(args, parser) -> int:
    problem, label, digest = _load_problem(args, parser)
    config = _config(args)
    lines = [f"problem: {label} (n={problem.n}, m={problem.m}) sha256={digest[:16]}"]
    if args.spot_check > 0:
        cert, text = _convexity_line(problem, args.spot_check, args.seed)
        lines.append(text)
        if not cert.ok:
            print("\n".join(lines), file=sys.stderr)
            print("error: sampled Hessian not positive definite", file=sys.stderr)
            return INPUT_ERROR
    atlas = build_atlas(problem, args.resolution, config)
    s = atlas.summary
    lines.append(
        f"atlas: resolution {s.resolution}, {s.node_count} nodes, "
        f"{s.unconverged} unconverged, max KKT residual {s.max_kkt_residual:.3e}"
    )
    lines.append(f"corank histogram: {s.corank_histogram}")
    outputs = []
    csv_path, json_path = f"{args.out}.csv", f"{args.out}.json"
    atlas.to_csv(csv_path)
    atlas.to_json(json_path)
    outputs = [csv_path, json_path]
    lines.append(f"wrote {csv_path} and {json_path}")
    status = SOLVER_ERROR if atlas.failures else OK
    doc = {
        "schema": "pareto-atlas/run-v1",
        "command": "atlas",
        "input": {"problem": label, "sha256": digest},
        "options": {"resolution": args.resolution, "grad_tol": args.grad_tol,
                    "rank_tol": args.rank_tol},
        "summary": s.as_dict(),
        "outputs": outputs,
        "exit_status": status,
    }
    _report(args, doc, lines)
    if atlas.failures:
        print(f"error: {len(atlas.failures)} nodes failed to converge", file=sys.stderr)
    return status


def cmd_verify(args, parser) -> int:
    problem, label, digest = _load_problem(args, parser)
    config = _config(args)
    lines = [f"problem: {label} (n={problem.n}, m={problem.m}) sha256={digest[:16]}"]
    if args.spot_check > 0:
        cert, text = _convexity_line(problem, args.spot_check, args.seed)
        lines.append(text)
        if not cert.ok:
            print("\n".join(lines), file=sys.stderr)
            return INPUT_ERROR
    atlas = build_atlas(problem, args.resolution, config)
    if atlas.failures:
        print(f"error: {len(atlas.failures)} nodes failed to converge", file=sys.stderr)
        return SOLVER_ERROR
    s = atlas.summary
    lines.append(
        f"atlas: resolution {s.resolution}, {s.node_count} nodes, "
        f"max KKT residual {s.max_kkt_residual:.3e}"
    )

    corank = certify_corank_on_atlas(atlas, args.rank_tol)
    faces = face_consistency(atlas, config)
    inject = injectivity_scan(atlas, args.collapse_tol)
    nondom = s.dominance_violations == 0

    checks = {
        "corank": (
            corank.simplicial_on_sample,
            f"max corank {corank.max_corank} over {s.node_count} nodes "
            f"(tol {corank.tolerance:g})",
        ),
        "face-consistency": (
            faces.consistent,
            f"max discrepancy {faces.max_discrepancy:.3e} over {faces.checked} "
            f"boundary nodes (tol {faces.tolerance:.3e})",
        ),
        "injectivity": (
            inject.injective_on_sample,
            f"{len(inject.collapsed_pairs)} collapsed pairs "
            f"(collapse tol {inject.collapse_tol:g})",
        ),
        "non-domination": (
            nondom,
            f"{s.dominance_violations} dominating pairs among node values",
        ),
    }
    for name, (ok, detail) in checks.items():
        lines.append(_cert_line(name, ok, detail))
    for idx in corank.witnesses[:10]:
        lines.append(
            f"       corank witness: node {idx} w={_fmt_vec(atlas.grid.weights[idx])} "
            f"corank={corank.coranks[idx]}"
        )
    for a, b in inject.collapsed_pairs[:10]:
        gap = float(np.linalg.norm(atlas.points[a].x - atlas.points[b].x))
        lines.append(
            f"       collapse: w={_fmt_vec(atlas.grid.weights[a])} vs "
            f"w={_fmt_vec(atlas.grid.weights[b])} |dx|={gap:.3e}"
        )
    status = OK if all(ok for ok, _ in checks.values()) else CERT_FAIL
    lines.append(f"verify: {'all certificates pass' if status == OK else 'FAILED'}")
    doc = {
        "schema": "pareto-atlas/run-v1",
        "command": "verify",
        "input": {"problem": label, "sha256": digest},
        "options": {
            "resolution": args.resolution,
            "grad_tol": args.grad_tol,
            "rank_tol": args.rank_tol,
            "collapse_tol": args.collapse_tol,
        },
        "certificates": {
            name: {"ok": ok, "detail": detail} for name, (ok, detail) in checks.items()
        },
        "corank_witnesses": corank.witnesses,
        "collapsed_pairs": inject.collapsed_pairs,
        "summary": s.as_dict(),
        "exit_status": status,
    }
    _report(args, doc, lines)
    return status


def cmd_perturb(args, parser) -> int:
    problem, label, digest = _load_problem(args, parser)
    config = _config(args)
    lines = [f"problem: {label} (n={problem.n}, m={problem.m}) sha256={digest[:16]}"]

    if args.track:
        pi = (
            LinearPerturbation.draw(problem.n, problem.m, args.seed, args.scale)
            if args.scale > 0
            else LinearPerturbation.zero(problem.n, problem.m)
        )
        rep = corank2_tracker(problem, pi, config, rank_tol=args.rank_tol)
        ok = rep.corank == 2 and rep.meets_simplex_interior
        lines.append(
            f"tracker: x_hat={_fmt_vec(rep.x_hat)} |E|={rep.e_norm:.3e} "
            f"({rep.iterations} iterations, scale {args.scale:g}, seed {args.seed})"
        )
        lines.append(_cert_line("corank-2 persistence", ok,
                                f"corank {rep.corank}, interior margin {rep.interior_margin:.6g}"))
        if rep.interior_witness is not None:
            lines.append(f"       interior weight: {_fmt_vec(rep.interior_witness)}")
        doc = {
            "schema": "pareto-atlas/run-v1",
            "command": "perturb",
            "mode": "track",
            "input": {"problem": label, "sha256": digest},
            "options": {"scale": args.scale, "seed": args.seed, "rank_tol": args.rank_tol},
            "tracker": rep.as_dict(),
            "exit_status": OK if ok else CERT_FAIL,
        }
        _report(args, doc, lines)
        return OK if ok else CERT_FAIL

    if args.stability:
        scales = sorted((float(t) for t in args.scales.split(",")), reverse=True)
        rep = stability_experiment(problem, scales, args.resolution, args.seed, config)
        sups = [row.sup_displacement for row in rep.rows]
        monotone = all(a >= b - 1e-15 for a, b in zip(sups, sups[1:]))
        lines.append(f"stability: resolution {args.resolution}, seed {args.seed}")
        for row in rep.rows:
            lines.append(
                f"  scale {row.scale:<10g} sup displacement {row.sup_displacement:.6e} "
                f"mean {row.mean_displacement:.6e}"
            )
        lines.append(_cert_line("stability", monotone,
                                "sup displacement decreases with the scale"))
        doc = {
            "schema": "pareto-atlas/run-v1",
            "command": "perturb",
            "mode": "stability",
            "input": {"problem": label, "sha256": digest},
            "options": {"resolution": args.resolution, "seed": args.seed},
            "stability": rep.as_dict(),
            "exit_status": OK if monotone else CERT_FAIL,
        }
        _report(args, doc, lines)
        return OK if monotone else CERT_FAIL

    tols = tuple(args.rank_tols) if args.rank_tols else (args.rank_tol,)
    rep = genericity_experiment(
        problem,
        trials=args.trials,
        scale=args.scale,
        resolution=args.resolution,
        rank_tols=tols,
        seed=args.seed,
        config=config,
        workers=args.workers,
    )
    ok = all(rep.all_simplicial(t) for t in tols)
    lines.append(
        f"genericity: {args.trials} trials, scale {args.scale:g}, "
        f"resolution {args.resolution}, seeds {args.seed}..{args.seed + args.trials - 1}"
    )
    for tol in tols:
        bad = rep.corank2_trials(tol)
        lines.append(
            _cert_line(
                f"corank <= 1 at tol {tol:g}",
                not bad,
                f"{len(bad)} trial(s) with corank >= 2" + (f": {bad}" if bad else ""),
            )
        )
    doc = {
        "schema": "pareto-atlas/run-v1",
        "command": "perturb",
        "mode": "genericity",
        "input": {"problem": label, "sha256": digest},
        "options": {
            "trials": args.trials,
            "scale": args.scale,
            "resolution": args.resolution,
            "seed": args.seed,
            "rank_tols": list(tols),
            "workers": args.workers or default_workers(),
        },
        "genericity": rep.as_dict(),
        "exit_status": OK if ok else CERT_FAIL,
    }
    _report(args, doc, lines)
    return OK if ok else CERT_FAIL


def cmd_ridge(args, parser) -> int:
    instance = RidgeInstance.from_csv(args.data, args.mu)
    rep = ridge_path(instance, args.resolution, _config(args))
    norms = rep.theta_norms()
    lines = [
        f"ridge path: {len(rep.rows)} rows, mu={args.mu:g}, resolution {args.resolution}",
        f"lambda range: [{rep.rows[0].lam:.6g}, {rep.rows[-1].lam:.6g}]",
        f"|theta| range: [{norms.min():.6g}, {norms.max():.6g}]",
        _cert_line(
            "normal-equations oracle",
            rep.max_oracle_gap <= args.oracle_tol,
            f"max gap {rep.max_oracle_gap:.3e} (tol {args.oracle_tol:g})",
        ),
    ]
    outputs = []
    if args.out:
        write_ridge_csv(rep, args.out)
        outputs.append(args.out)
        lines.append(f"wrote {args.out}")
    ok = rep.max_oracle_gap <= args.oracle_tol
    doc = {
        "schema": "pareto-atlas/run-v1",
        "command": "ridge",
        "input": {"data": args.data, "mu": args.mu},
        "options": {"resolution": args.resolution, "oracle_tol": args.oracle_tol},
        "max_oracle_gap": rep.max_oracle_gap,
        "outputs": outputs,
        "exit_status": OK if ok else CERT_FAIL,
    }
    _report(args, doc, lines)
    return OK if ok else CERT_FAIL


def cmd_locate(args, parser) -> int:
    problem, label, digest = _load_problem(args, parser)
    family = getattr(problem, "family", None)
    if not isinstance(family, DistanceSquared):
        raise ProblemFormatError("locate requires a distance_squared problem")
    instance = LocationInstance(family.points)
    rep = location_pareto_set(instance, args.resolution, _config(args), args.rank_tol)
    checks = {
        "barycentric closed form": (
            rep.max_barycentric_error <= args.bary_tol,
            f"max error {rep.max_barycentric_error:.3e} (tol {args.bary_tol:g})",
        ),
        "hull membership": (
            rep.max_hull_violation <= args.hull_tol,
            f"max violation {rep.max_hull_violation:.3e} (tol {args.hull_tol:g})",
        ),
        "injectivity": (
            rep.injectivity.injective_on_sample,
            f"{len(rep.injectivity.collapsed_pairs)} collapsed pairs",
        ),
    }
    if rep.general_position:
        checks["corank (general position)"] = (
            rep.corank_certificate.simplicial_on_sample,
            f"max corank {rep.corank_certificate.max_corank}",
        )
    lines = [
        f"problem: {label} (n={problem.n}, m={problem.m}) sha256={digest[:16]}",
        f"demand points in general position: {rep.general_position}",
    ]
    for name, (ok, detail) in checks.items():
        lines.append(_cert_line(name, ok, detail))
    outputs = []
    if args.out:
        csv_path, json_path = f"{args.out}.csv", f"{args.out}.json"
        rep.atlas.to_csv(csv_path)
        rep.atlas.to_json(json_path)
        outputs = [csv_path, json_path]
        lines.append(f"wrote {csv_path} and {json_path}")
    status = OK if all(ok for ok, _ in checks.values()) else CERT_FAIL
    doc = {
        "schema": "pareto-atlas/run-v1",
        "command": "locate",
        "input": {"problem": label, "sha256": digest},
        "options": {"resolution": args.resolution, "bary_tol": args.bary_tol,
                    "hull_tol": args.hull_tol},
        "report": rep.as_dict(),
        "outputs": outputs,
        "exit_status": status,
    }
    _report(args, doc, lines)
    return status


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="pareto-atlas",
        description="Pareto sets of strongly convex problems by weighted scalarization, "
        "with numerical rank and genericity certificates.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("solve", help="solve single weights")
    _add_problem_args(p)
    _add_solver_args(p)
    p.add_argument("-w", "--weight", action="append", required=True,
                   help="comma-separated simplex weight, repeatable")
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("atlas", help="solve a full weight grid and export it")
    _add_problem_args(p)
    _add_solver_args(p)
    p.add_argument("--resolution", "-r", type=int, required=True)
    p.add_argument("--out", "-o", default="atlas", help="output prefix (default: atlas)")
    p.add_argument("--spot-check", type=int, default=1000,
                   help="strong-convexity sample count (0 to skip)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_atlas)

    p = sub.add_parser("verify", help="corank, face, injectivity and ordering certificates")
    _add_problem_args(p)
    _add_solver_args(p)
    p.add_argument("--resolution", "-r", type=int, default=20)
    p.add_argument("--collapse-tol", type=float, default=1e-6)
    p.add_argument("--spot-check", type=int, default=1000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--json", action="store_true")
    p.add_argument("--out-report", help="also write the JSON report here")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("perturb", help="genericity trials, corank-2 tracking, stability")
    _add_problem_args(p)
    _add_solver_args(p)
    p.add_argument("--trials", type=int, default=20)
    p.add_argument("--scale", type=float, default=0.1)
    p.add_argument("--resolution", "-r", type=int, default=20)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--rank-tols", type=float, action="append",
                   help="repeatable rank tolerance sweep (default: --rank-tol)")
    p.add_argument("--workers", type=int, default=None,
                   help=f"trial parallelism (default: ${'{'}PARETO_ATLAS_WORKERS{'}'} or 1)")
    p.add_argument("--track", action="store_true",
                   help="track the corank-2 point of a square 4 -> 4 mapping")
    p.add_argument("--stability", action="store_true",
                   help="sup-displacement table over --scales")
    p.add_argument("--scales", default="0.1,0.01,0.001",
                   help="comma-separated scales for --stability")
    p.add_argument("--json", action="store_true")
    p.add_argument("--out-report", help="also write the JSON report here")
    p.set_defaults(func=cmd_perturb)

    p = sub.add_parser("ridge", help="two-objective ridge trade-off path")
    p.add_argument("data", help="CSV with feature columns and the response last")
    p.add_argument("--mu", type=float, required=True, help="strong-convexity shift (> 0)")
    p.add_argument("--resolution", "-r", type=int, default=100)
    p.add_argument("--out", "-o", help="write the path CSV here")
    p.add_argument("--oracle-tol", type=float, default=1e-8)
    _add_solver_args(p)
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_ridge)

    p = sub.add_parser("locate", help="squared-distance location atlas with hull checks")
    _add_problem_args(p)
    _add_solver_args(p)
    p.add_argument("--resolution", "-r", type=int, default=20)
    p.add_argument("--bary-tol", type=float, default=1e-8)
    p.add_argument("--hull-tol", type=float, default=1e-9)
    p.add_argument("--out", "-o", help="atlas export prefix")
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_locate)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args, parser)
    except (ProblemFormatError, FileNotFoundError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return INPUT_ERROR
    except (SolverError, TrackerDiverged, DBlockSingular) as exc:
        print(f"solver error: {exc}", file=sys.stderr)
        return SOLVER_ERROR


if __name__ == "__main__":
    sys.exit(main())
