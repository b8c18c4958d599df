"""Reading and writing networks, regions, schedules, trajectories and reports.

JSON floats are written with ``repr``, which is the shortest string that
reads back to the same double, so ``read(write(x))`` is exact. CSV columns
use 17 significant digits for the same reason. No output carries a
timestamp, so identical inputs give identical bytes.
"""
from __future__ import annotations

import io
import json
import math
import re
from typing import Optional

import numpy as np
import shapely

from . import __version__
from .errors import MalformedInput, ScheduleOutOfBox
from .integrator import RateSchedule, Trajectory
from .network import (
    CORNER_LEVELS,
    CORNER_ORDER,
    CornerSet,
    ReactionPair,
    band_log,
    check_epsilon,
    classify_case,
    read_network,
)
from .region import Region, Side

FORMAT_VERSION = 1


def _floats(a) -> list:
    return np.asarray(a, dtype=float).tolist()


_FLAT_LIST = re.compile(r"\[\s*([^\[\]{}\"]*?)\s*\]")


def dumps(doc) -> str:
    """Indented JSON with arrays of scalars kept on one line."""
    text = json.dumps(doc, indent=1, sort_keys=False, ensure_ascii=False)
    return _FLAT_LIST.sub(lambda m: "[" + re.sub(r",\s+", ", ", m.group(1)) + "]", text) + "\n"


# -- networks -------------------------------------------------------------------------


def network_doc(rp: ReactionPair, eps: float) -> dict:
    return {"reactions": rp.to_json(), "epsilon": eps}


def load_network(path: str) -> tuple[ReactionPair, float]:
    with open(path, encoding="utf-8") as fh:
        return read_network(fh.read())


# -- regions ---------------------------------------------------------------------------


def region_doc(region: Region, config: Optional[dict] = None, seed: Optional[int] = None) -> dict:
    label = region.case
    return {
        "tool": "minreg",
        "version": __version__,
        "format": FORMAT_VERSION,
        "config": config or {},
        "seed": seed,
        "network": region.rp.to_json(),
        "case": label.case,
        "subcase": label.subcase,
        "epsilon": region.eps,
        "corners": {c: _floats(region.corners[c]) for c in CORNER_ORDER},
        "corner_tags": {c: region.corners.tags[c] for c in CORNER_ORDER},
        "special": {k: _floats(v) for k, v in region.special.items()},
        "provenance": [s.to_json() for s in region.sides],
        "junctions": [int(j) for j in region.junctions],
        "boundary": _floats(region.boundary),
    }


def write_region(region: Region, config: Optional[dict] = None, seed: Optional[int] = None) -> str:
    return dumps(region_doc(region, config, seed))


def read_region(text: str) -> tuple[Region, dict]:
    """Parse region JSON; returns the region and the metadata it was written with."""
    try:
        doc = json.loads(text)
        reactions = doc["network"]
        pairs = []
        for r in reactions:
            pairs += [tuple(r["reactant"]), tuple(r["product"])]
        rp = ReactionPair(*pairs)
        eps = check_epsilon(doc["epsilon"])
        corners = CornerSet(eps, {c: np.array(doc["corners"][c], dtype=float) for c in CORNER_ORDER},
                            dict(CORNER_LEVELS), dict(doc["corner_tags"]))
        sides = [Side(s["side"], np.array(s["start"], dtype=float), np.array(s["end"], dtype=float),
                      np.array(s["rates"], dtype=float), int(s["trajectory"]), bool(s["against_flow"]),
                      int(s["vertices"][0]), int(s["vertices"][1]),
                      None if s["origin"] is None else np.array(s["origin"], dtype=float))
                 for s in doc["provenance"]]
        region = Region(np.array(doc["boundary"], dtype=float), eps, classify_case(rp), corners, sides,
                        {k: np.array(v, dtype=float) for k, v in doc["special"].items()}, rp,
                        np.array(doc["junctions"], dtype=int))
    except (KeyError, TypeError, ValueError, json.JSONDecodeError) as exc:
        raise MalformedInput(f"region file is malformed: {exc}") from None
    meta = {k: doc.get(k) for k in ("tool", "version", "format", "config", "seed")}
    return region, meta


def load_region(path: str) -> tuple[Region, dict]:
    with open(path, encoding="utf-8") as fh:
        return read_region(fh.read())


# -- CSV ----------------------------------------------------------------------------------


def _csv(header: list[str], rows: np.ndarray) -> str:
    buf = io.StringIO()
    buf.write(",".join(header) + "\n")
    for row in np.asarray(rows, dtype=float):
        buf.write(",".join(format(v, ".17g") for v in row) + "\n")
    return buf.getvalue()


def boundary_csv(region: Region) -> str:
    return _csv(["x", "y"], region.boundary)


def trajectory_csv(traj: Trajectory, sched: Optional[RateSchedule] = None, k=None) -> str:
    """Rows of ``t, x, y, k1..k4``; rates come from ``traj``, ``sched`` or a constant ``k``."""
    if traj.rates is not None:
        rates = traj.rates
    elif sched is not None:
        rates = np.array([sched.rate_at(t) for t in traj.t])
    else:
        rates = np.tile(np.asarray(k, dtype=float), (len(traj.t), 1))
    return _csv(["t", "x", "y", "k1", "k2", "k3", "k4"], np.column_stack([traj.t, traj.z, rates]))


def read_csv(text: str) -> np.ndarray:
    lines = [ln for ln in text.splitlines() if ln.strip() and not ln.startswith("#")][1:]
    return np.array([[float(v) for v in ln.split(",")] for ln in lines])


# -- schedules ------------------------------------------------------------------------


def schedule_doc(sched: RateSchedule) -> dict:
    return sched.to_json()


def read_schedule(doc: dict) -> RateSchedule:
    return RateSchedule(np.array(doc["times"], dtype=float), np.array(doc["rates"], dtype=float),
                        doc["epsilon"])


def parse_schedule(spec: str, eps: float, T: float, seed: Optional[int] = None) -> RateSchedule:
    """Schedule from a command-line spec.

    ``constant:k1,k2,k3,k4``, ``pattern:i`` to ``pattern:iv`` (extremal
    rates making corner A to D the attractor), ``random:DT`` (uniform rates
    redrawn every ``DT``, seeded), ``switch:P,Q,DT`` (alternate two patterns
    every ``DT``) or a path to a schedule JSON file.
    """
    from .field import PATTERN_CORNER, corner_rates

    kind, _, arg = spec.partition(":")
    try:
        if kind == "constant":
            return RateSchedule.constant([float(v) for v in arg.split(",")], eps)
        if kind == "pattern":
            return RateSchedule.constant(corner_rates(eps, PATTERN_CORNER[arg]), eps)
        if kind == "random":
            rng = np.random.default_rng(np.random.SeedSequence(0 if seed is None else seed))
            return RateSchedule.random(eps, float(arg), T, rng)
        if kind == "switch":
            p, q, dt = arg.split(",")
            dt = float(dt)
            n = max(1, math.ceil(T / dt - 1e-9))
            ks = [corner_rates(eps, PATTERN_CORNER[p if j % 2 == 0 else q]) for j in range(n)]
            return RateSchedule(np.arange(n) * dt, np.array(ks), eps)
    except ScheduleOutOfBox:
        raise
    except (KeyError, ValueError) as exc:
        raise MalformedInput(f"bad schedule spec {spec!r}: {exc}") from None
    try:
        with open(spec, encoding="utf-8") as fh:
            return read_schedule(json.load(fh))
    except OSError:
        raise MalformedInput(f"unknown schedule spec {spec!r}") from None
    except (KeyError, TypeError, json.JSONDecodeError) as exc:
        raise MalformedInput(f"schedule file {spec!r} is malformed: {exc}") from None


# -- reports ----------------------------------------------------------------------------


def report_lines(reports) -> str:
    return "".join(json.dumps(r.to_json(), sort_keys=False) + "\n" for r in reports)


# -- SVG ------------------------------------------------------------------------------------

_SIDE_COLOURS = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#e377c2", "#17becf")
_BAND_COLOURS = ("#d62728", "#1f77b4")


def _band_polygon(rp: ReactionPair, eps: float, i: int, box_log: np.ndarray, n: int = 400) -> np.ndarray:
    """The band of reaction ``i`` clipped to a log-space box, as log-space vertices."""
    (x0, y0), (x1, y1) = box_log
    g = rp.vectors[i]  # log level is g . log z
    nrm = float(np.hypot(*g))
    d, t = g / nrm, np.array([-g[1], g[0]]) / nrm
    edge = band_log(eps, 1)
    big = 10 * (abs(x1 - x0) + abs(y1 - y0) + 1)
    c = np.array([(x0 + x1) / 2, (y0 + y1) / 2])
    lo_pt = c + d * ((-edge - g @ c) / nrm)
    hi_pt = c + d * ((edge - g @ c) / nrm)
    strip = shapely.Polygon([lo_pt - big * t, lo_pt + big * t, hi_pt + big * t, hi_pt - big * t])
    clip = strip.intersection(shapely.box(x0, y0, x1, y1))
    if clip.is_empty or clip.geom_type != "Polygon":
        return np.zeros((0, 2))
    clip = shapely.segmentize(clip, max(x1 - x0, y1 - y0) / n)
    return np.array(clip.exterior.coords)


def region_svg(region: Region, log_log: bool = False, size: int = 720) -> str:
    """Boundary, uncertainty bands, corners and special points as a standalone SVG."""
    pts = [region.boundary] + [np.array([region.corners[c] for c in CORNER_ORDER])]
    if region.special:
        pts.append(np.array(list(region.special.values())))
    allp = np.vstack(pts)
    if log_log:
        fwd = np.log10
        lo, hi = fwd(allp.min(axis=0)), fwd(allp.max(axis=0))
    else:
        def fwd(a):
            return np.asarray(a, dtype=float)
        lo, hi = np.zeros(2), allp.max(axis=0)
    pad = 0.08 * (hi - lo)
    lo, hi = lo - pad * (1 if log_log else 0), hi + pad
    margin, legend_w = 64, 230
    w = h = size

    def to_px(p):
        q = (fwd(p) - lo) / (hi - lo)
        return np.column_stack([margin + q[:, 0] * (w - 2 * margin), h - margin - q[:, 1] * (h - 2 * margin)])

    def path(p, close=True):
        px = to_px(np.atleast_2d(p))
        if len(px) > 2:  # drop sub-pixel detail
            px = np.array(shapely.simplify(shapely.LineString(px), 0.2).coords)
        d = "M" + " L".join(f"{x:.2f},{y:.2f}" for x, y in px)
        return d + (" Z" if close else "")

    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{w + legend_w}" height="{h}" '
           f'viewBox="0 0 {w + legend_w} {h}" font-family="sans-serif" font-size="12">',
           '<rect width="100%" height="100%" fill="white"/>',
           f'<clipPath id="plot"><rect x="{margin}" y="{margin}" width="{w - 2 * margin}" '
           f'height="{h - 2 * margin}"/></clipPath>']
    # bands, computed in natural-log space
    if log_log:
        box_log = np.array([lo, hi]) * math.log(10)
    else:
        pos = allp[allp.min(axis=1) > 0]
        box_log = np.log(np.array([pos.min(axis=0) * 1e-3, np.maximum(hi, pos.max(axis=0) * 1.5)]))
    for i in range(2):
        poly = _band_polygon(region.rp, region.eps, i, box_log)
        if len(poly):
            out.append(f'<path d="{path(np.exp(poly))}" fill="{_BAND_COLOURS[i]}" fill-opacity="0.12" '
                       f'stroke="none" clip-path="url(#plot)"/>')
    out.append(f'<rect x="{margin}" y="{margin}" width="{w - 2 * margin}" height="{h - 2 * margin}" '
               'fill="none" stroke="#444"/>')
    for j, side in enumerate(region.sides):
        seg = region.boundary[side.first:side.last + 1]
        out.append(f'<path d="{path(seg, close=False)}" fill="none" stroke="{_SIDE_COLOURS[j % 8]}" '
                   'stroke-width="2" clip-path="url(#plot)"/>')
    if not region.sides:
        out.append(f'<path d="{path(region.boundary)}" fill="none" stroke="black" stroke-width="2"/>')
    marks = [(c, region.corners[c], "black") for c in CORNER_ORDER]
    marks += [(k, v, "#555") for k, v in region.special.items()]
    for name, p, colour in marks:
        x, y = to_px(np.asarray(p)[None])[0]
        out.append(f'<circle cx="{x:.2f}" cy="{y:.2f}" r="4" fill="{colour}"/>')
        out.append(f'<text x="{x + 6:.2f}" y="{y - 6:.2f}">{name}</text>')
    # axes
    scale = "log10 " if log_log else ""
    for k, (a, b) in enumerate(zip(lo, hi)):
        for f in np.linspace(0, 1, 5):
            v = a + f * (b - a)
            if k == 0:
                x = margin + f * (w - 2 * margin)
                out.append(f'<text x="{x:.2f}" y="{h - margin + 16}" text-anchor="middle">{v:.3g}</text>')
            else:
                y = h - margin - f * (h - 2 * margin)
                out.append(f'<text x="{margin - 6}" y="{y + 4:.2f}" text-anchor="end">{v:.3g}</text>')
    out.append(f'<text x="{w / 2:.0f}" y="{h - 10}" text-anchor="middle">{scale}x</text>')
    out.append(f'<text x="14" y="{h / 2:.0f}" transform="rotate(-90 14 {h / 2:.0f})" '
               f'text-anchor="middle">{scale}y</text>')
    # legend
    lx, ly = w + 10, margin
    out.append(f'<text x="{lx}" y="{ly}" font-weight="bold">{region.case}, eps={region.eps:g}</text>')
    for j, side in enumerate(region.sides):
        ly += 18
        k = ", ".join(f"{v:g}" for v in side.rates)
        out.append(f'<line x1="{lx}" y1="{ly - 4}" x2="{lx + 20}" y2="{ly - 4}" '
                   f'stroke="{_SIDE_COLOURS[j % 8]}" stroke-width="3"/>')
        out.append(f'<text x="{lx + 26}" y="{ly}">{side.name} k=({k})</text>')
    for i in range(2):
        ly += 18
        out.append(f'<rect x="{lx}" y="{ly - 10}" width="20" height="10" fill="{_BAND_COLOURS[i]}" '
                   'fill-opacity="0.3"/>')
        out.append(f'<text x="{lx + 26}" y="{ly}">band of reaction {i + 1}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"
