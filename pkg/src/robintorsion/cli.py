"""Command-line interface.

Exit codes: 0 when every check passes, 1 when any check fails, 2 when some
check is indeterminate and none fails, 3 on a configuration or I/O error.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path
from typing import Any, Optional, Sequence

from . import fem, harness, radial
from .geometry import GeometryError, regular_polygon, unit_square
from .harness import ConfigError, ExperimentConfig, TestDomain
from .report import (
    FORMATS,
    ReportError,
    read_polygon,
    read_report,
    render,
    run_metadata,
)

EXIT_CONFIG = 3

DEFAULTS: dict[str, Any] = {
    "dim": None,
    "alpha": None,
    "constraint": "perimeter",
    "seed": 0,
    "mesh_h": 0.25,
    "grid": 10_000,
    "out": None,
    "format": "csv",
    "tolerance": None,
    "family": "random-convex",
    "count": 20,
    "fractions": list(harness.DEFAULT_FRACTIONS),
    "levels": 3,
    "radius": 1.0,
    "inner_radius": None,
    "polygon": None,
    "ngon": None,
    "steklov_count": 4,
    "dump_mesh": None,
    "figures": False,
    "curves": None,
}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def _number_list(text: str) -> list[float]:
    try:
        return [float(x) for x in str(text).split(",") if x.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"not a comma-separated number list: {text!r}") from exc


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False, argument_default=argparse.SUPPRESS)
    g = common.add_argument_group("common options")
    g.add_argument("--config", help="JSON file with option values; flags override it")
    g.add_argument("--dim", type=str, help="dimension (comma list for thresholds)")
    g.add_argument("--alpha", type=float, help="Robin parameter")
    g.add_argument("--constraint", choices=("perimeter", "volume"))
    g.add_argument("--seed", type=int)
    g.add_argument("--mesh-h", dest="mesh_h", type=float, help="coarsest mesh size")
    g.add_argument("--grid", type=int, help="threshold grid nodes")
    g.add_argument("--out", help="output file (stdout when omitted)")
    g.add_argument("--format", choices=FORMATS)
    g.add_argument("--tolerance", type=float, help="extra slack added to error budgets")
    g.add_argument("--figures", action="store_true", help="render PNG figures next to --out")

    sweep = _Parser(add_help=False, argument_default=argparse.SUPPRESS)
    s = sweep.add_argument_group("domain family")
    s.add_argument("--family", choices=harness.FAMILIES)
    s.add_argument("--count", type=int)
    s.add_argument("--fractions", type=_number_list, help="alpha grid as fractions of sigma1")
    s.add_argument("--levels", type=int, help="mesh levels for the error budget")
    s.add_argument("--polygon", help="polygon file to use instead of a family")

    parser = _Parser(prog="robintorsion", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    p = sub.add_parser("radial", parents=[common], help="closed-form ball and shell values")
    p.add_argument("--radius", type=float, default=argparse.SUPPRESS)
    p.add_argument("--inner-radius", dest="inner_radius", type=float, default=argparse.SUPPRESS)
    p = sub.add_parser("thresholds", parents=[common], help="threshold certification suite")
    p.add_argument("--curves", default=argparse.SUPPRESS, help="also write threshold curves (CSV)")
    sub.add_parser("lowerbound", parents=[common, sweep], help="parallel-coordinates sandwich")
    p = sub.add_parser("fem", parents=[common], help="single finite-element solve")
    p.add_argument("--polygon", default=argparse.SUPPRESS)
    p.add_argument("--ngon", type=int, default=argparse.SUPPRESS)
    p.add_argument("--levels", type=int, default=argparse.SUPPRESS)
    p.add_argument("--steklov-count", dest="steklov_count", type=int, default=argparse.SUPPRESS)
    p.add_argument("--dump-mesh", dest="dump_mesh", default=argparse.SUPPRESS)
    sub.add_parser("verify", parents=[common, sweep], help="theorem and lemma sweeps")
    p = sub.add_parser("report", parents=[common], help="convert a report and render figures")
    p.add_argument("input")
    return parser


def load_config(path) -> dict:
    try:
        doc = json.loads(Path(path).read_text())
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror or exc}") from exc
    except ValueError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise ConfigError(f"config {path} must hold one object")
    out = {}
    for key, value in doc.items():
        name = key.replace("-", "_")
        if name not in DEFAULTS:
            raise ConfigError(f"unknown config key {key!r}")
        out[name] = value
    return out


def resolve(args: argparse.Namespace) -> dict:
    opts = dict(DEFAULTS)
    given = vars(args)
    if "config" in given:
        opts.update(load_config(given["config"]))
    opts.update({k: v for k, v in given.items() if k not in ("config", "command", "input")})
    return opts


def _dims(value, default: Sequence[int]) -> list[int]:
    if value is None:
        return list(default)
    items = value if isinstance(value, list) else str(value).split(",")
    try:
        return [int(x) for x in items]
    except ValueError as exc:
        raise ConfigError(f"invalid dimension list {value!r}") from exc


def _planar(opts) -> None:
    if _dims(opts["dim"], [2]) != [2]:
        raise ConfigError("this subcommand is planar; --dim must be 2")


def _experiment(opts) -> ExperimentConfig:
    alphas = () if opts["alpha"] is None else (float(opts["alpha"]),)
    return ExperimentConfig(
        family=opts["family"],
        count=int(opts["count"]),
        seed=int(opts["seed"]),
        constraint=opts["constraint"],
        alpha_fractions=tuple(opts["fractions"]),
        mesh_h=float(opts["mesh_h"]),
        levels=int(opts["levels"]),
        tolerance=float(opts["tolerance"] or 0.0),
        alphas=alphas,
    )


def _domains(opts, config: ExperimentConfig) -> Optional[list[TestDomain]]:
    if opts["polygon"] is None:
        return None
    poly = read_polygon(opts["polygon"])
    return [TestDomain(Path(opts["polygon"]).stem, "file", poly)]


def _write(records, opts, metadata) -> None:
    text = render(records, opts["format"], metadata)
    if opts["out"] is None:
        sys.stdout.write(text)
        return
    path = Path(opts["out"])
    try:
        path.write_text(text)
    except OSError as exc:
        raise ReportError(f"cannot write report to {path}: {exc.strerror or exc}") from exc
    if opts["figures"] and metadata.get("kind") in ("verification", "lowerbound", "thresholds"):
        from .plotting import render_figures

        render_figures(metadata["kind"], records, path.with_suffix(""))


def _summary(statuses) -> None:
    counts = {s: 0 for s in harness.STATUSES}
    for s in statuses:
        counts[s] += 1
    print(" ".join(f"{k}={v}" for k, v in counts.items()), file=sys.stderr)


def cmd_radial(opts) -> int:
    d = _dims(opts["dim"], [3])[0]
    R = float(opts["radius"])
    rows = []
    if opts["inner_radius"] is not None:
        shell = radial.ShellGeometry(d, float(opts["inner_radius"]), R)
        rows.append({"quantity": "tau_dn_shell", "value": radial.dn_torsion_shell(shell)})
        rows.append({"quantity": "shell_plateau", "value": radial.plateau_value(shell)})
    ball = radial.BallGeometry(d, R)
    rows.append({"quantity": "tau_dirichlet_ball", "value": radial.dirichlet_torsion_ball(ball)})
    rows.append({"quantity": "critical_alpha", "value": radial.critical_alpha(ball)})
    rows.append({"quantity": "steklov_1", "value": radial.steklov_ball(ball, 1)})
    alpha = opts["alpha"]
    if alpha is not None:
        if alpha == 0:
            raise ConfigError("alpha = 0 is the Neumann problem, which has no solution")
        rows.append({"quantity": "tau_robin_ball", "value": radial.robin_torsion_ball(ball, alpha)})
        rows.append({"quantity": "resonant", "value": radial.is_resonant(ball, alpha)})
        rows.append({"quantity": "sign_class", "value": radial.ball_sign_class(ball, alpha)})
    _write(rows, opts, run_metadata("radial", dim=d, radius=R, alpha=alpha))
    return 0


def cmd_thresholds(opts) -> int:
    dims = _dims(opts["dim"], range(3, 13))
    tol = 1e-9 if opts["tolerance"] is None else float(opts["tolerance"])
    grid = int(opts["grid"])
    if grid < 2:
        raise ConfigError("--grid must be at least 2")
    records = harness.run_threshold_suite(dims, grid, tol)
    _write(records, opts, run_metadata("thresholds", dims=",".join(map(str, dims)), grid=grid))
    if opts["curves"]:
        from .thresholds import threshold_curve

        rows = []
        rows += list(threshold_curve("planar-perimeter", None, grid).rows())
        for kind in ("3d-perimeter", "3d-volume"):
            rows += list(threshold_curve(kind, None, grid).rows())
        for d in dims:
            for c in ("perimeter", "volume"):
                rows += list(threshold_curve(f"general-{c}", d, grid).rows())
        Path(opts["curves"]).write_text(render(rows, "csv"))
    statuses = [r.status for r in records]
    _summary(statuses)
    return harness.exit_code(statuses)


def cmd_lowerbound(opts) -> int:
    _planar(opts)
    config = _experiment(opts)
    records = harness.run_parallel_coordinates_suite(config, _domains(opts, config))
    meta = run_metadata("lowerbound", seed=config.seed, mesh_h=config.mesh_h,
                        family=config.family, constraint=config.constraint)
    _write(records, opts, meta)
    statuses = [r.status for r in records]
    _summary(statuses)
    return harness.exit_code(statuses)


def cmd_verify(opts) -> int:
    _planar(opts)
    config = _experiment(opts)
    result = harness.sweep(config, _domains(opts, config))
    for s in result.skipped:
        print(f"skipped {s.domain_id} alpha={s.alpha:.6g}: {s.reason}", file=sys.stderr)
    meta = run_metadata("verification", seed=config.seed, mesh_h=config.mesh_h,
                        family=config.family, constraint=config.constraint,
                        skipped=len(result.skipped))
    if result.records:
        _write(result.records, opts, meta)
    _summary(result.statuses)
    return harness.exit_code(result.statuses)


def cmd_fem(opts) -> int:
    _planar(opts)
    if opts["polygon"] is not None:
        poly = read_polygon(opts["polygon"])
    elif opts["ngon"] is not None:
        poly = regular_polygon(int(opts["ngon"]))
    else:
        poly = unit_square()
    alpha = opts["alpha"]
    study = fem.study_domain(poly, float(opts["mesh_h"]), int(opts["levels"]),
                             int(opts["steklov_count"]))
    if opts["dump_mesh"]:
        study.systems[-1].mesh.dump(opts["dump_mesh"])
    rows = []

    def row(name, est):
        rows.append({"quantity": name, "value": est.extrapolated, "budget": est.budget,
                     "finest": est.finest, "order": est.order, "monotone": est.monotone})

    row("tau_dirichlet", study.tau_dirichlet)
    row("sigma1", study.sigma1)
    status = "pass"
    if alpha is not None:
        if alpha == 0:
            raise ConfigError("alpha = 0 is the Neumann problem, which has no solution")
        try:
            row("tau_robin", study.robin(alpha))
        except fem.ResonanceError as exc:
            print(f"resonance: {exc} (nearest Steklov value {exc.nearest_sigma})",
                  file=sys.stderr)
            status = "indeterminate"
    meta = run_metadata("fem", mesh_h=float(opts["mesh_h"]), alpha=alpha,
                        nodes=study.systems[-1].mesh.n_nodes)
    _write(rows, opts, meta)
    return harness.exit_code([status])


def cmd_report(opts, source: str) -> int:
    rep = read_report(source)
    if not rep.records:
        raise ReportError(f"{source} holds no records")
    meta = dict(rep.metadata)
    _write(rep.records, opts, meta)
    from .plotting import render_figures

    stem = Path(opts["out"]).with_suffix("") if opts["out"] else Path(source).with_suffix("")
    for path in render_figures(rep.kind, rep.records, stem):
        print(f"wrote {path}", file=sys.stderr)
    statuses = [getattr(r, "status", "pass") for r in rep.records]
    return harness.exit_code([s for s in statuses if s in harness.STATUSES])


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        opts = resolve(args)
        if opts["format"] not in FORMATS:
            raise ConfigError(f"unknown format {opts['format']!r}")
        harness.worker_count()
        if opts["out"] is not None and not Path(opts["out"]).resolve().parent.is_dir():
            raise ReportError(f"cannot write report to {opts['out']}: no such directory")
        if args.command == "radial":
            return cmd_radial(opts)
        if args.command == "thresholds":
            return cmd_thresholds(opts)
        if args.command == "lowerbound":
            return cmd_lowerbound(opts)
        if args.command == "verify":
            return cmd_verify(opts)
        if args.command == "fem":
            return cmd_fem(opts)
        return cmd_report(opts, args.input)
    except (ConfigError, GeometryError, ReportError, fem.MeshError, ValueError) as exc:
        print(f"robintorsion: error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
