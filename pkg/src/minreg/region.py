"""Assembly of the minimal region boundary from extremal-rate trajectories.

The four band-boundary curves meet in four corners; consecutive corners are
joined by an arc lying on one curve. Every corner is either a source (the
admissible cone points out of the central region) or a sink. Each arc is
replaced by a boundary piece built from trajectories under corner rates:

* source to sink: the trajectory from the source under the sink's rates;
* sink to sink: from the split point on the arc, where the other reaction's
  vector is tangent to the curve, one trajectory to each sink;
* source to source: the trajectories in both directions, spliced at their
  first crossing so that the outer arcs are kept.

In the equal-sign slope cases the sources and sinks alternate and only the
first kind occurs.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from functools import cached_property
from typing import Optional

import numpy as np
import shapely

from .errors import ConstructionError, EpsilonTooLarge, NonIntersectingTrajectories, RegionInvalid, TrajectoryEscaped
from .field import corner_rates
from .geometry import (
    BOUNDARY,
    INSIDE,
    OUTSIDE,
    PolygonIndex,
    centroid,
    close_ring,
    first_crossing,
    is_simple,
    overlaps,
    polyline_crossings,
    signed_area,
)
from .integrator import CONVERGED, IntegratorConfig, Trajectory, integrate
from .network import (
    CORNER_LEVELS,
    CORNER_ORDER,
    HI,
    LO,
    CaseLabel,
    CornerSet,
    ReactionPair,
    arc_position,
    band_log,
    check_epsilon,
    classify_case,
    corner_points,
    detailed_balance_point,
    ray_point,
    special_points,
)

# Arcs between consecutive corners: (from, to, reaction whose curve carries the arc, its level).
ARCS = (("A", "B", 2, HI), ("B", "C", 1, HI), ("C", "D", 2, LO), ("D", "A", 1, LO))

# The source/sink pattern is compared against this epsilon to detect
# constructions that only exist for smaller epsilon.
LIMIT_EPS = 1e-12

LEVEL_TOL = 1e-8


@dataclass(frozen=True)
class Side:
    """One boundary piece traced along a single trajectory."""

    name: str
    start: np.ndarray
    end: np.ndarray
    rates: np.ndarray
    traj_id: int
    reversed: bool  # traversed against the flow
    first: int  # vertex range [first, last] in the boundary
    last: int
    origin: Optional[np.ndarray] = None  # where the underlying trajectory starts

    def to_json(self) -> dict:
        return {"side": self.name, "start": self.start.tolist(), "end": self.end.tolist(),
                "rates": self.rates.tolist(), "trajectory": self.traj_id, "against_flow": self.reversed,
                "vertices": [self.first, self.last],
                "origin": None if self.origin is None else self.origin.tolist()}


@dataclass
class Region:
    boundary: np.ndarray  # closed (first == last), counterclockwise
    eps: float
    case: Optional[CaseLabel] = None
    corners: Optional[CornerSet] = None
    sides: list = field(default_factory=list)
    special: dict = field(default_factory=dict)
    rp: Optional[ReactionPair] = None
    junctions: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=int))

    @cached_property
    def index(self) -> PolygonIndex:
        return PolygonIndex(self.boundary)

    @property
    def diameter(self) -> float:
        return self.index.diameter

    @property
    def band(self) -> float:
        return 1e-9 * self.diameter

    def scaled(self, factor: float, about=None, log: bool = False) -> "Region":
        """Scaled copy about ``about``, without provenance.

        With ``log=False`` this is a homothety about the centroid by default.
        With ``log=True`` the log coordinates are scaled, ``z -> c * (z / c)**factor``,
        about the unit-rate balance point by default; the copy stays in the
        positive quadrant for any factor.
        """
        if log:
            if about is None:
                about = detailed_balance_point(self.rp, np.ones(4)) if self.rp is not None else \
                    np.exp(np.log(self.boundary).mean(axis=0))
            c = np.log(np.asarray(about, dtype=float))
            ring = np.exp(c + factor * (np.log(self.boundary) - c))
        else:
            c = centroid(self.boundary) if about is None else np.asarray(about, dtype=float)
            ring = c + factor * (self.boundary - c)
        return Region(ring, self.eps, self.case, self.corners,
                      [], dict(self.special), self.rp, self.junctions.copy())

    def __getstate__(self):
        state = dict(self.__dict__)
        state.pop("index", None)
        return state


def contains(region: Region, pt) -> str:
    code = int(region.index.classify(np.asarray(pt, dtype=float).reshape(1, 2), region.band)[0])
    return {INSIDE: "inside", BOUNDARY: "boundary", OUTSIDE: "outside"}[code]


def _points(t) -> np.ndarray:
    return t.z if isinstance(t, Trajectory) else np.asarray(t, dtype=float)


def outer_union(traj1, traj2, tol: Optional[float] = None) -> tuple[np.ndarray, np.ndarray]:
    """Splice two opposite trajectories between the same pair of endpoints.

    Follows ``traj1`` from its start to the first transversal crossing ``M``
    with ``traj2`` and then ``traj2`` backwards from ``M`` to its start.
    Touches at the shared endpoints do not count as crossings. If the two
    polylines coincide, ``traj1`` is returned with ``M`` at its end.
    """
    p, q = _points(traj1), _points(traj2)
    scale = float(np.ptp(np.vstack([p, q]), axis=0).max()) or 1.0
    tol = 1e-9 * scale if tol is None else tol
    if overlaps(p, q[::-1], tol) and overlaps(q, p, tol):
        return p.copy(), p[-1].copy()
    lp = float(np.linalg.norm(np.diff(p, axis=0), axis=1).sum())
    lq = float(np.linalg.norm(np.diff(q, axis=0), axis=1).sum())
    for sp, sq, m in polyline_crossings(p, q):
        near_ends = (min(np.linalg.norm(m - p[0]), np.linalg.norm(m - p[-1]),
                         np.linalg.norm(m - q[0]), np.linalg.norm(m - q[-1])) <= 1e3 * tol)
        if near_ends or sp <= tol or sq <= tol or sp >= lp - tol or sq >= lq - tol:
            continue
        head = _cut(p, sp)
        tail = _cut(q, sq)[::-1]
        return np.vstack([head, tail[1:]]), m
    raise NonIntersectingTrajectories("the two trajectories never cross away from their endpoints")


def outer_trajectory(traj1, traj2, centre) -> tuple[np.ndarray, np.ndarray]:
    """Outer of two non-crossing trajectories joining the same endpoints.

    The outer one sweeps the larger area as seen from ``centre``, a point of
    the central region. Returns the outer polyline oriented like ``traj1``
    and the endpoint where the inner trajectory leaves it.
    """
    p, q = _points(traj1), _points(traj2)
    c = np.asarray(centre, dtype=float)

    def swept(poly):
        return abs(signed_area(np.vstack([c, poly])))

    if swept(p) >= swept(q):
        return p.copy(), p[-1].copy()
    return q[::-1].copy(), q[-1].copy()


def _cut(poly: np.ndarray, s: float) -> np.ndarray:
    """Prefix of ``poly`` up to arc length ``s``, ending exactly there."""
    seg = np.linalg.norm(np.diff(poly, axis=0), axis=1)
    cum = np.concatenate([[0.0], np.cumsum(seg)])
    j = int(np.searchsorted(cum, s, side="right")) - 1
    j = min(max(j, 0), len(seg) - 1)
    frac = (s - cum[j]) / seg[j] if seg[j] > 0 else 0.0
    pt = poly[j] + frac * (poly[j + 1] - poly[j])
    return np.vstack([poly[: j + 1], pt])


def _limit_tags(rp: ReactionPair) -> dict:
    from .field import _corner_tag

    return {c: _corner_tag(rp, LIMIT_EPS, CORNER_LEVELS[c]) for c in CORNER_ORDER}


def _check_side(rp: ReactionPair, eps: float, pts: np.ndarray, name: str) -> None:
    """Every sample must lie in at least one of the two bands."""
    ll = rp.log_levels(pts)
    edge = band_log(eps, HI)
    in_band = np.abs(ll) <= edge + LEVEL_TOL
    bad = ~in_band.any(axis=1)
    if bad.any():
        i = int(np.flatnonzero(bad)[0])
        raise TrajectoryEscaped(f"side {name} leaves both bands at {pts[i].tolist()}")


class _Builder:
    def __init__(self, rp: ReactionPair, eps: float, cfg: IntegratorConfig):
        self.rp, self.eps, self.cfg = rp, eps, cfg
        self.trajectories: list[Trajectory] = []

    def run(self, start, target_label: str) -> tuple[int, np.ndarray]:
        k = corner_rates(self.eps, target_label)
        target = self.corners[target_label]
        tr = integrate(self.rp, k, start, self.cfg, target=target)
        if tr.reason != CONVERGED:
            raise ConstructionError(f"trajectory towards {target_label} did not settle ({tr.reason})")
        pts = tr.z.copy()
        if np.linalg.norm(pts[-1] - target) > 0:
            pts = np.vstack([pts, target])
        self.trajectories.append(tr)
        return len(self.trajectories) - 1, pts


def build_region(rp: ReactionPair, eps: float, cfg: Optional[IntegratorConfig] = None,
                 n_out: int = 2000) -> Region:
    """Trace the boundary of the minimal region for ``rp`` at ``eps``.

    ``n_out`` sets the output resolution: consecutive boundary vertices are
    at most ``diameter / n_out`` apart, with the diameter estimated from
    the corners.
    """
    eps = check_epsilon(eps)
    label = classify_case(rp)
    corners = corner_points(rp, eps)
    special: dict = {}
    if label.mixed:
        sp = special_points(rp, eps)
        if corners.tags != _limit_tags(rp):
            raise EpsilonTooLarge(f"epsilon {eps} is too large for the mixed-slope construction")
        if sp.F is not None:
            special["F"] = sp.F
    elif sorted(corners.tags.values()) != ["sink", "sink", "source", "source"] or \
            corners.tags["A"] == corners.tags["B"]:
        raise ConstructionError(f"unexpected corner pattern {corners.tags}")

    pts_c = np.array([corners[c] for c in CORNER_ORDER])
    diam = float(np.linalg.norm(pts_c.max(axis=0) - pts_c.min(axis=0)))
    cfg = cfg or IntegratorConfig()
    if cfg.h_out is None:
        cfg = replace(cfg, h_out=diam / n_out, chord_tol=max(cfg.chord_tol, 1e-8))
    b = _Builder(rp, eps, cfg)
    centre = detailed_balance_point(rp, np.ones(4))
    b.corners = corners

    pieces = []  # (polyline from P to Q, [(side name, start, end, rates, traj id, reversed, n vertices)])
    n_split = n_splice = 0
    for p_lab, q_lab, reaction, level in ARCS:
        tp, tq = corners.tags[p_lab], corners.tags[q_lab]
        P, Q = corners[p_lab], corners[q_lab]
        if tp == "source" and tq == "sink":
            tid, pts = b.run(P, q_lab)
            if not label.mixed:
                _check_side(rp, eps, pts, f"{p_lab}->{q_lab}")
            pieces.append((pts, [(f"{p_lab}→{q_lab}", P, Q, corner_rates(eps, q_lab), tid, False, len(pts))]))
        elif tp == "sink" and tq == "source":
            tid, pts = b.run(Q, p_lab)
            if not label.mixed:
                _check_side(rp, eps, pts, f"{q_lab}->{p_lab}")
            pieces.append((pts[::-1], [(f"{q_lab}→{p_lab}", Q, P, corner_rates(eps, p_lab), tid, True, len(pts))]))
        elif tp == "sink" and tq == "sink":
            S = ray_point(rp, reaction, band_log(eps, level))
            t = arc_position(rp, P, Q, S)
            if not 0.0 < t < 1.0:
                raise EpsilonTooLarge(f"no split point between sinks {p_lab} and {q_lab} at eps={eps}")
            name = "E" if n_split == 0 else f"E{n_split + 1}"
            n_split += 1
            special[name] = S
            t1, left = b.run(S, p_lab)
            t2, right = b.run(S, q_lab)
            if not label.mixed:
                _check_side(rp, eps, left, f"{name}->{p_lab}")
                _check_side(rp, eps, right, f"{name}->{q_lab}")
            poly = np.vstack([left[::-1], right[1:]])
            pieces.append((poly, [(f"{name}→{p_lab}", S, P, corner_rates(eps, p_lab), t1, True, len(left)),
                                  (f"{name}→{q_lab}", S, Q, corner_rates(eps, q_lab), t2, False, len(right))]))
        else:
            t1, fwd = b.run(P, q_lab)
            t2, bwd = b.run(Q, p_lab)
            try:
                poly, M = outer_union(fwd, bwd)
            except NonIntersectingTrajectories:
                # no crossing: keep the outer one; invariance repairs add the splice later
                poly, M = outer_trajectory(fwd, bwd, centre)
            else:
                name = _splice_name(n_splice)
                n_splice += 1
                special[name] = M
            if not label.mixed:
                _check_side(rp, eps, poly, f"{p_lab}->{q_lab}")
            n_head = int(np.flatnonzero(np.all(poly == M, axis=1))[0]) + 1
            pieces.append((poly, [(f"{p_lab}→{q_lab}", P, M, corner_rates(eps, q_lab), t1, False, n_head),
                                  (f"{q_lab}→{p_lab}", M, Q, corner_rates(eps, p_lab), t2, True,
                                   len(poly) - n_head + 1)]))

    ring_pieces = []
    for poly, recs in pieces:
        first = 0
        for name, s0, e0, k, tid, rev, n in recs:
            if n < 2:
                continue
            ring_pieces.append(_Piece(poly[first:first + n].copy(), name, k, tid, rev,
                                      b.trajectories[tid].z[0].copy()))
            first += n - 1
    ring_pieces = _orient(ring_pieces)
    ring_pieces, splices = _saturate(b, ring_pieces, diam, n_splice)
    for i, pt in enumerate(splices):
        special[_splice_name(n_splice + i)] = pt
    region = _assemble(ring_pieces, eps, label, corners, special, rp)
    validate_region(region)
    return region


@dataclass
class _Piece:
    """A stretch of boundary along one trajectory, stored in ring order."""

    pts: np.ndarray
    name: str
    rates: np.ndarray
    traj_id: int
    reversed: bool
    origin: np.ndarray

    @property
    def length(self) -> float:
        return float(np.linalg.norm(np.diff(self.pts, axis=0), axis=1).sum())

    def flipped(self) -> "_Piece":
        return replace(self, pts=self.pts[::-1].copy(), reversed=not self.reversed)

    def sliced(self, u: float, v: float) -> "_Piece":
        """The part between arc positions ``u <= v``, with exact end points."""
        return replace(self, pts=_slice(self.pts, u, v))


def _slice(poly: np.ndarray, u: float, v: float) -> np.ndarray:
    seg = np.linalg.norm(np.diff(poly, axis=0), axis=1)
    cum = np.concatenate([[0.0], np.cumsum(seg)])

    def at(s):
        j = min(max(int(np.searchsorted(cum, s, side="right")) - 1, 0), len(seg) - 1)
        f = (s - cum[j]) / seg[j] if seg[j] > 0 else 0.0
        return j, poly[j] + min(max(f, 0.0), 1.0) * (poly[j + 1] - poly[j])

    ju, pu = at(u)
    jv, pv = at(v)
    mid = poly[ju + 1:jv + 1]
    out = np.vstack([pu, mid, pv])
    keep = np.concatenate([[True], np.any(np.diff(out, axis=0) != 0, axis=1)])
    return out[keep]


def _orient(pieces: list) -> list:
    """Make the ring counterclockwise."""
    ring = np.vstack([pieces[0].pts] + [p.pts[1:] for p in pieces[1:]])
    if signed_area(ring) >= 0:
        return pieces
    return [p.flipped() for p in reversed(pieces)]


def _ring(pieces: list) -> tuple[np.ndarray, np.ndarray]:
    """Closed ring and the arc position where each piece starts (plus the total)."""
    ring = np.vstack([pieces[0].pts] + [p.pts[1:] for p in pieces[1:]])
    ring[-1] = ring[0]
    starts = np.concatenate([[0.0], np.cumsum([p.length for p in pieces])])
    return ring, starts


def _sub_arc(pieces: list, a: float, b: float) -> list:
    """Pieces covering the forward arc from position ``a`` to ``b`` (cyclic)."""
    _, starts = _ring(pieces)
    total = starts[-1]
    spans = [(a, b)] if a <= b else [(a, total), (0.0, b)]
    out = []
    for u, v in spans:
        for i, p in enumerate(pieces):
            lo, hi = max(u, starts[i]), min(v, starts[i + 1])
            if hi - lo > 0:
                sl = p.sliced(lo - starts[i], hi - starts[i])
                if len(sl.pts) >= 2:
                    out.append(sl)
    return out


def _outward_patterns(rp: ReactionPair, eps: float, pieces: list, diam: float):
    """Per piece, vertex margins and the corner whose rates push outward the most.

    The margin is the smallest ``velocity . n`` over the rate box, scaled by
    the largest possible speed; the minimizing rates are always the rates
    of one corner.
    """
    from .field import _normal_coefficients, monomials, velocity

    vn = np.linalg.norm(rp.vectors, axis=1)
    out = []
    for p in pieces:
        pts = p.pts
        v = velocity(rp, p.rates, pts)
        nv = np.linalg.norm(v, axis=1, keepdims=True)
        t = (-v if p.reversed else v) / np.where(nv > 0, nv, 1.0)
        n = np.column_stack([-t[:, 1], t[:, 0]])
        c = _normal_coefficients(rp, pts, n)
        k = np.where(c > 0, eps, 1.0 / eps)
        m = monomials(rp, pts)
        scale = (m[:, 0:2].sum(axis=1) * vn[0] + m[:, 2:4].sum(axis=1) * vn[1]) / eps
        margin = (k * c).sum(axis=1) / scale
        # ends are junctions, where the tangent is one-sided
        d0 = np.linalg.norm(pts - pts[0], axis=1)
        d1 = np.linalg.norm(pts - pts[-1], axis=1)
        margin[(d0 < 1e-6 * diam) | (d1 < 1e-6 * diam) | (nv[:, 0] == 0)] = np.inf
        out.append((margin, k))
    return out


REPAIR_TOL = 1e-9
MAX_REPAIRS = 8


def _corner_of_rates(eps: float, k: np.ndarray) -> str:
    for c in CORNER_ORDER:
        if np.allclose(corner_rates(eps, c), k, rtol=1e-12, atol=0):
            return c
    raise ConstructionError(f"rates {k.tolist()} are not a corner pattern")


def _splice_name(i: int) -> str:
    return "M" if i == 0 else f"M{i + 1}"


def _saturate(b: "_Builder", pieces: list, diam: float, n_named: int = 0) -> tuple[list, list]:
    """Extend the boundary until no admissible rate points out of it.

    Where some corner's rates push outward across a piece, the trajectory of
    those rates from the first point (in flow order) where they become
    tangent to the piece is also a solution starting in the region, so the
    region must contain it. That trajectory is spliced in, replacing the
    part of the ring it encloses, and the check is repeated.
    """
    from .field import velocity
    from .integrator import Event

    rp, eps = b.rp, b.eps
    splices = []
    for _ in range(MAX_REPAIRS):
        checks = _outward_patterns(rp, eps, pieces, diam)
        bad = [(i, np.flatnonzero(m < -REPAIR_TOL)) for i, (m, _) in enumerate(checks)]
        bad = [(i, idx) for i, idx in bad if len(idx)]
        if not bad:
            return pieces, splices
        i, idx = bad[0]
        piece = pieces[i]
        j = int(idx[-1] if piece.reversed else idx[0])  # first bad vertex in flow order
        k_out = checks[i][1][j]
        target = _corner_of_rates(eps, k_out)
        sigma = -1.0 if piece.reversed else 1.0

        def g(t, z, k_s=piece.rates):
            fs = velocity(rp, k_s, z)
            fo = velocity(rp, k_out, z)
            return sigma * float(fs[0] * fo[1] - fs[1] * fo[0])

        sink = _corner_of_rates(eps, piece.rates)
        tr = integrate(rp, piece.rates, piece.origin, b.cfg, events=[Event(g, "tangency", -1)],
                       target=b.corners[sink])
        T = tr.end.copy() if tr.event is not None else piece.pts[j].copy()
        tid, path = b.run(T, target)
        ring, starts = _ring(pieces)
        total = starts[-1]
        line = shapely.LineString(ring)
        s_T = float(line.project(shapely.Point(T)))
        hit = first_crossing(path, PolygonIndex(ring, n_cells=64), skip=1e-6 * diam)
        if hit is None:
            X = path[-1]
            if line.distance(shapely.Point(X)) > 1e-8 * diam:
                raise ConstructionError(f"outward trajectory from {T.tolist()} ends off the boundary")
        else:
            path = _slice(path, 0.0, hit[0])
            X = path[-1]
        s_X = float(line.project(shapely.Point(X)))
        path[0], path[-1] = ring_point(ring, s_T), ring_point(ring, s_X)
        new = _Piece(path, f"{_splice_name(n_named + len(splices))}→{target}",
                     corner_rates(eps, target), tid, False, T.copy())
        cands = [_sub_arc(pieces, s_X, s_T) + [new], _sub_arc(pieces, s_T, s_X) + [new.flipped()]]
        cands = [c for c in cands if is_simple(_ring(c)[0]) and signed_area(_ring(c)[0]) > 0]
        if not cands:
            raise ConstructionError("splicing the outward trajectory breaks the boundary")
        pieces = max(cands, key=lambda c: signed_area(_ring(c)[0]))
        splices.append(path[0].copy())  # the splice vertex on the ring, within chord error of T
    raise ConstructionError(f"boundary still not invariant after {MAX_REPAIRS} repairs")


def ring_point(ring: np.ndarray, s: float) -> np.ndarray:
    """Point at arc position ``s`` along a polyline."""
    return _cut(ring, s)[-1].copy()


def _assemble(pieces: list, eps, label, corners, special, rp) -> "Region":
    ring, _ = _ring(pieces)
    sides, first = [], 0
    for p in pieces:
        last = first + len(p.pts) - 1
        a, z = (p.pts[-1], p.pts[0]) if p.reversed else (p.pts[0], p.pts[-1])
        sides.append(Side(p.name, a.copy(), z.copy(), np.asarray(p.rates), p.traj_id, p.reversed,
                          first, last, p.origin))
        first = last
    junctions = np.array(sorted({s.first % (len(ring) - 1) for s in sides}), dtype=int)
    return Region(ring, eps, label, corners, sides, special, rp, junctions)


def validate_region(region: Region) -> None:
    ring = region.boundary
    if len(ring) < 4 or np.linalg.norm(ring[0] - ring[-1]) > 1e-10:
        raise RegionInvalid("boundary is not closed")
    if not np.all(ring > 0):
        raise RegionInvalid("boundary leaves the positive quadrant")
    if signed_area(ring) <= 0:
        raise RegionInvalid("boundary is not counterclockwise")
    if not is_simple(ring):
        raise RegionInvalid("boundary intersects itself")
    pts = [v for k, v in region.special.items() if k != "F"]
    if pts:
        d = region.index.distance(np.array(pts))
        if d.max() > 1e-8:
            raise RegionInvalid(f"a special point is {d.max():.3g} away from the boundary")
    if region.corners is not None:
        c = np.array([region.corners[k] for k in CORNER_ORDER])
        if np.any(region.index.classify(c, 1e-8) == OUTSIDE):
            raise RegionInvalid("a corner lies outside the region")
