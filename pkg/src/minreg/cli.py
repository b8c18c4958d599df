"""Command-line entry point: ``minreg classify|build|verify|simulate|steer``."""
from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import __version__
from . import io as mio
from .errors import MalformedInput, MinRegError
from .integrator import IntegratorConfig, integrate_schedule
from .network import CORNER_ORDER, check_epsilon, classify_case, corner_points, detailed_balance_point, special_points
from .region import Region, build_region
from . import verify as V

SUITES = ("invariance", "corners", "containment", "attraction", "eigen", "minimal-attraction", "steer")
FORMATS = ("json", "csv", "svg")


# -- argument helpers ------------------------------------------------------------------


def _point(text: str) -> np.ndarray:
    try:
        x, y = (float(v) for v in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected 'x,y', got {text!r}") from None
    return np.array([x, y])


def _formats(text: str) -> list[str]:
    out = [f.strip() for f in text.split(",") if f.strip()]
    bad = [f for f in out if f not in FORMATS]
    if bad:
        raise argparse.ArgumentTypeError(f"unknown format(s) {bad}; choose from {FORMATS}")
    return out


def _suites(text: str) -> list[str]:
    out = [s.strip() for s in text.split(",") if s.strip()]
    if "all" in out:
        return list(SUITES)
    bad = [s for s in out if s not in SUITES]
    if bad:
        raise argparse.ArgumentTypeError(f"unknown suite(s) {bad}; choose from {SUITES + ('all',)}")
    return out


def _epsilons(text: str) -> list[float]:
    try:
        return [float(v) for v in text.split(",")]
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad epsilon list {text!r}") from None


def _seed(args) -> int:
    if args.seed is not None:
        return args.seed
    env = os.environ.get("MINREG_SEED")
    if env is None:
        return 0
    try:
        return int(env)
    except ValueError:
        raise MalformedInput(f"MINREG_SEED must be an integer, got {env!r}") from None


def _integrator(args) -> IntegratorConfig:
    return IntegratorConfig(rtol=args.rtol, atol=args.atol, t_max=args.tmax)


def _config(args, eps: float, **extra) -> dict:
    """Resolved settings echoed into every artifact."""
    cfg = {"epsilon": eps, "rtol": args.rtol, "atol": args.atol, "tmax": args.tmax}
    cfg.update(extra)
    return cfg


def _read_text(path: str) -> str:
    try:
        return Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise MalformedInput(f"cannot read {path}: {exc.strerror}") from None


def _load_network(args):
    rp, eps = mio.read_network(_read_text(args.network))
    if args.epsilon is not None:
        eps = check_epsilon(args.epsilon)
    return rp, eps


def _emit(text: str, out: Optional[str], name: str) -> None:
    """Write ``text`` to ``out/name`` when an output directory is given, else stdout."""
    if out is None:
        sys.stdout.write(text)
        return
    path = Path(out) / name
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text, encoding="utf-8")
    print(path)


def _header(config: dict, seed: Optional[int]) -> str:
    meta = {"tool": "minreg", "version": __version__, "config": config, "seed": seed}
    return "# " + json.dumps(meta) + "\n"


# -- subcommands ----------------------------------------------------------------------


def cmd_classify(args) -> int:
    rp, eps = _load_network(args)
    label = classify_case(rp)
    corners = corner_points(rp, eps)
    rows = {c: {"point": corners[c].tolist(), "tag": corners.tags[c]} for c in CORNER_ORDER}
    doc = {"case": label.case, "subcase": label.subcase, "slopes": list(label.slopes),
           "p": list(label.p), "q": list(label.q), "epsilon": eps, "corners": rows}
    if label.mixed:
        sp = special_points(rp, eps)
        doc["special"] = {k: None if v is None else v.tolist() for k, v in (("E", sp.E), ("F", sp.F))}
    if args.format == "json":
        sys.stdout.write(mio.dumps(doc))
        return 0
    print(label)
    print(f"slopes  {label.slopes[0]:.6g}  {label.slopes[1]:.6g}")
    print(f"p = ({label.p[0]:.6g}, {label.p[1]:.6g})  q = ({label.q[0]:.6g}, {label.q[1]:.6g})")
    print(f"epsilon {eps:g}")
    print(f"{'corner':<8}{'x':>26}{'y':>26}  tag")
    for c, row in rows.items():
        x, y = row["point"]
        print(f"{c:<8}{x:>26.17g}{y:>26.17g}  {row['tag']}")
    for k, v in doc.get("special", {}).items():
        print(f"{k:<8}" + ("   (none)" if v is None else f"{v[0]:>26.17g}{v[1]:>26.17g}"))
    return 0


def cmd_build(args) -> int:
    rp, eps = _load_network(args)
    formats = args.format or list(FORMATS)
    stem = Path(args.network).stem
    epsilons = args.epsilon_list or [eps]
    cfg = _integrator(args)
    for e in epsilons:
        e = check_epsilon(e)
        region = build_region(rp, e, cfg, n_out=args.resolution)
        config = _config(args, e, resolution=args.resolution)
        name = stem if args.epsilon_list is None else f"{stem}_eps{e:g}"
        if "json" in formats:
            _emit(mio.write_region(region, config, None), args.out, f"{name}.json")
        if "csv" in formats:
            _emit(_header(config, None) + mio.boundary_csv(region), args.out, f"{name}.csv")
        if "svg" in formats:
            _emit(mio.region_svg(region, log_log=args.log_log), args.out, f"{name}.svg")
    return 0


def _region_for(args) -> tuple[Region, float]:
    text = _read_text(args.input)
    try:
        is_region = "boundary" in json.loads(text)
    except (json.JSONDecodeError, TypeError):
        raise MalformedInput(f"{args.input} is not JSON") from None
    if is_region:
        region, _ = mio.read_region(text)
        if args.epsilon is not None and check_epsilon(args.epsilon) != region.eps:
            raise MalformedInput("--epsilon conflicts with the region file; rebuild instead")
        return region, region.eps
    rp, eps = mio.read_network(text)
    if args.epsilon is not None:
        eps = check_epsilon(args.epsilon)
    return build_region(rp, eps, _integrator(args)), eps


def _probes(region: Region) -> list:
    """Unit-rate balance point, the middle of the first side and a point between them."""
    centre = detailed_balance_point(region.rp, np.ones(4))
    if not region.sides:
        return [centre]
    s = region.sides[0]
    mid = region.boundary[(s.first + s.last) // 2]
    between = 0.5 * (centre + mid)
    pts = [centre, mid]
    if region.index.within(between[None], 0.0)[0]:
        pts.insert(1, between)
    return pts


def cmd_verify(args) -> int:
    seed = _seed(args)
    region, build_eps = _region_for(args)
    rp = region.rp
    eps = build_eps if args.schedule_epsilon is None else check_epsilon(args.schedule_epsilon)
    if args.scale is not None:
        region = region.scaled(args.scale, log=args.scale_mode == "log")
    n = args.samples
    reports = []
    for suite in args.suite:
        done = len(reports)
        if suite == "invariance":
            reports.append(V.check_invariance(region, rp, eps, **({"n_samples": n} if n else {})))
        elif suite == "corners":
            reports.append(V.check_corner_convergence(rp, eps, cfg=_integrator(args)))
        elif suite == "containment":
            reports.append(V.check_containment(region, rp, eps, seed=seed, sampler=args.sampler,
                                               **({"n_schedules": n} if n else {})))
        elif suite == "attraction":
            reports.append(V.check_attraction(region, rp, eps, seed=seed, **({"n_schedules": n} if n else {})))
        elif suite == "eigen":
            sinks = [c for c in CORNER_ORDER if region.corners.tags[c] == "sink"]
            reports += [V.check_eigen_approach(rp, eps, corner=c) for c in sinks]
        elif suite == "minimal-attraction":
            reports.append(V.check_minimal_attraction(region, rp, eps, probes=_probes(region), seed=seed))
        elif suite == "steer":
            reports.append(V.check_steer(region, rp, eps, seed=seed, **({"n_targets": n} if n else {})))
        sys.stdout.write(mio.report_lines(reports[done:]))
        sys.stdout.flush()
    if args.out:
        _emit(mio.report_lines(reports), args.out, "report.jsonl")
    for r in reports:
        print(r.line(), file=sys.stderr)
    return 0 if all(r.passed for r in reports) else 1


def cmd_simulate(args) -> int:
    rp, eps = _load_network(args)
    seed = _seed(args)
    T = args.time
    sched = mio.parse_schedule(args.schedule, eps, T, seed)
    traj = integrate_schedule(rp, sched, args.start, _integrator(args), T=T)
    config = _config(args, eps, schedule=args.schedule, start=args.start.tolist(), time=T)
    _emit(_header(config, seed) + mio.trajectory_csv(traj, sched), args.out, "trajectory.csv")
    return 0


def cmd_steer(args) -> int:
    rp, eps = _load_network(args)
    region = build_region(rp, eps, _integrator(args))
    sched, traj = V.steer(rp, eps, args.start, args.target, args.xi, region=region)
    dist = float(np.linalg.norm(traj.z[-1] - args.target))
    config = _config(args, eps, start=args.start.tolist(), target=args.target.tolist(), xi=args.xi)
    doc = {"tool": "minreg", "version": __version__, "config": config, "seed": None,
           "schedule": mio.schedule_doc(sched), "final": traj.z[-1].tolist(), "distance": dist,
           "reached": dist <= args.xi}
    if args.out:
        _emit(mio.dumps(doc), args.out, "schedule.json")
        _emit(_header(config, None) + mio.trajectory_csv(traj, sched), args.out, "trajectory.csv")
    else:
        sys.stdout.write(mio.dumps(doc))
    print(f"{'reached' if dist <= args.xi else 'missed'} target: distance {dist:.3e}, "
          f"{len(sched.times)} switches", file=sys.stderr)
    return 0 if dist <= args.xi else 1


# -- parser -----------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--epsilon", type=float, help="override the network file's epsilon")
    common.add_argument("--rtol", type=float, default=1e-9, help="integrator relative tolerance")
    common.add_argument("--atol", type=float, default=1e-12, help="integrator absolute tolerance")
    common.add_argument("--tmax", type=float, default=1e3, help="integration time cap")
    common.add_argument("--out", help="output directory (default: stdout)")

    p = argparse.ArgumentParser(prog="minreg", description="Minimal invariant regions of two-reaction "
                                "mass-action networks with rates in a box.")
    p.add_argument("--version", action="version", version=f"minreg {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("classify", parents=[common], help="case label, slopes and corners")
    s.add_argument("network")
    s.add_argument("--format", choices=("text", "json"), default="text")
    s.set_defaults(func=cmd_classify)

    s = sub.add_parser("build", parents=[common], help="trace the region and export it")
    s.add_argument("network")
    s.add_argument("--format", type=_formats, help="comma list of json,csv,svg (default: all)")
    s.add_argument("--log-log", action="store_true", help="log axes in the SVG")
    s.add_argument("--epsilon-list", type=_epsilons, help="build once per comma-separated epsilon")
    s.add_argument("--resolution", type=int, default=2000, help="boundary vertices per diameter")
    s.set_defaults(func=cmd_build)

    s = sub.add_parser("verify", parents=[common], help="run verification checks")
    s.add_argument("input", help="region JSON or network JSON")
    s.add_argument("--suite", type=_suites, default=list(SUITES), help="comma list of checks or 'all'")
    s.add_argument("--seed", type=int, help="master seed (default: $MINREG_SEED or 0)")
    s.add_argument("--samples", type=int, help="sample count for the sampled checks")
    s.add_argument("--sampler", choices=("uniform", "extremal"), default="uniform")
    s.add_argument("--scale", type=float, help="scale the region first (negative control)")
    s.add_argument("--scale-mode", choices=("log", "linear"), default="linear")
    s.add_argument("--schedule-epsilon", type=float, help="draw schedules from a different rate box")
    s.set_defaults(func=cmd_verify)

    s = sub.add_parser("simulate", parents=[common], help="integrate under a rate schedule")
    s.add_argument("network")
    s.add_argument("--schedule", required=True,
                   help="constant:k1,k2,k3,k4 | pattern:i..iv | random:DT | switch:P,Q,DT | file.json")
    s.add_argument("--start", type=_point, required=True, help="x,y")
    s.add_argument("--time", type=float, default=50.0, help="final time")
    s.add_argument("--seed", type=int, help="seed for random schedules")
    s.set_defaults(func=cmd_simulate)

    s = sub.add_parser("steer", parents=[common], help="schedule from one point to near another")
    s.add_argument("network")
    s.add_argument("--start", type=_point, required=True, help="x,y")
    s.add_argument("--target", type=_point, required=True, help="x,y")
    s.add_argument("--xi", type=float, default=1e-3, help="arrival tolerance")
    s.set_defaults(func=cmd_steer)
    return p


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except MinRegError as exc:
        print(f"minreg: {type(exc).__name__}: {exc}", file=sys.stderr)
        return exc.exit_code
    except BrokenPipeError:
        # Reader closed early (e.g. piped into head); silence the flush at exit.
        os.dup2(os.open(os.devnull, os.O_WRONLY), sys.stdout.fileno())
        return 0


if __name__ == "__main__":
    sys.exit(main())
