"""Numerical checks of invariance, attraction and reachability for a built region.

Every check returns a :class:`VerificationReport`. Random draws come from
``numpy.random.SeedSequence(seed).spawn``, one child per task, so reports
are reproducible bit for bit.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import Optional, Sequence

import numpy as np
import shapely

from .errors import BudgetExceeded, TargetOutsideRegion
from .field import (
    PATTERN_CORNER,
    corner_rates,
    eigen2,
    jacobian_matrix,
    monomials,
    normal_extremes,
    velocity,
)
from .geometry import OUTSIDE
from .integrator import (
    CONVERGED,
    TIMEOUT,
    Event,
    IntegratorConfig,
    RateSchedule,
    Trajectory,
    _advance,
    integrate,
    integrate_schedule,
    simulate_batch,
)
from .network import CORNER_LEVELS, HI, LO, ReactionPair, band_log, check_epsilon, corner_point
from .region import ARCS, Region


@dataclass
class VerificationReport:
    check: str
    passed: bool
    margin: float
    worst_sample: Optional[list] = None
    seed: Optional[int] = None
    config: dict = field(default_factory=dict)
    details: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        out = {"check": self.check, "pass": bool(self.passed), "margin": _plain(self.margin),
               "worst_sample": _plain(self.worst_sample), "seed": self.seed, "config": _plain(self.config)}
        if self.details:
            out["details"] = _plain(self.details)
        return out

    def line(self) -> str:
        return f"{'PASS' if self.passed else 'FAIL'} {self.check} margin={self.margin:.3e}"


def _plain(x):
    if isinstance(x, dict):
        return {k: _plain(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_plain(v) for v in x]
    if isinstance(x, np.ndarray):
        return _plain(x.tolist())
    if isinstance(x, (np.floating, np.integer, np.bool_)):
        return x.item()
    return x


def _rngs(seed: int, n: int) -> list[np.random.Generator]:
    return [np.random.default_rng(s) for s in np.random.SeedSequence(seed).spawn(n)]


def _field_scale(rp: ReactionPair, eps: float, pts) -> np.ndarray:
    """Largest possible speed over the rate box at each point."""
    m = monomials(rp, pts)
    vn = np.linalg.norm(rp.vectors, axis=1)
    return (m[..., 0:2].sum(axis=-1) * vn[0] + m[..., 2:4].sum(axis=-1) * vn[1]) / eps


# -- invariance -------------------------------------------------------------------------


def boundary_samples(region: Region, n_samples: int, exclude: float = 1e-6):
    """Points spread evenly in arc length, skipping those near junction vertices.

    Returns the points, their segment indices and the unit polygon tangents.
    """
    ring = region.boundary
    seg = np.diff(ring, axis=0)
    seg_len = np.linalg.norm(seg, axis=1)
    cum = np.concatenate([[0.0], np.cumsum(seg_len)])
    total = cum[-1]
    s = (np.arange(n_samples) + 0.5) * total / n_samples
    if len(region.junctions):
        js = cum[region.junctions]
        gap = np.abs(s[:, None] - js[None, :])
        gap = np.minimum(gap, total - gap)
        s = s[gap.min(axis=1) > exclude]
    idx = np.clip(np.searchsorted(cum, s, side="right") - 1, 0, len(seg) - 1)
    frac = (s - cum[idx]) / np.where(seg_len[idx] > 0, seg_len[idx], 1.0)
    pts = ring[idx] + frac[:, None] * seg[idx]
    tangents = seg[idx] / np.where(seg_len[idx] > 0, seg_len[idx], 1.0)[:, None]
    return pts, idx, tangents


def check_invariance(region: Region, rp: ReactionPair, eps: Optional[float] = None,
                     n_samples: int = 2000, tol: float = 1e-8) -> VerificationReport:
    """Inward-pointing test of the admissible field along the boundary.

    At each sample the inward normal is the counterclockwise rotation of
    the tangent. Where a side records the rates of the trajectory that
    traced it, the tangent is the velocity under those rates; elsewhere it
    is the polygon edge. The margin is the minimum of ``velocity . n`` over
    the rate box divided by the largest possible speed there.
    """
    eps = check_epsilon(region.eps if eps is None else eps)
    pts, idx, tangents = boundary_samples(region, n_samples)
    for side in region.sides:
        on = (idx >= side.first) & (idx < side.last)
        if on.any():
            v = velocity(rp, side.rates, pts[on])
            nv = np.linalg.norm(v, axis=1, keepdims=True)
            ok = nv[:, 0] > 0
            t = np.where(ok[:, None], v / np.where(nv > 0, nv, 1.0), tangents[on])
            tangents[on] = -t if side.reversed else t
    normals = np.column_stack([-tangents[:, 1], tangents[:, 0]])
    vmin, _ = normal_extremes(rp, eps, pts, normals)
    margins = vmin / _field_scale(rp, eps, pts)
    worst = int(np.argmin(margins))
    return VerificationReport(
        "invariance", bool(margins[worst] >= -tol), float(margins[worst]), pts[worst].tolist(),
        config={"n_samples": n_samples, "tol": tol, "eps": eps, "used": int(len(pts))})


# -- corner convergence -------------------------------------------------------------


def check_corner_convergence(rp: ReactionPair, eps: float, starts: Sequence = ((1.0, 1.0),),
                             t_max: float = 200.0, tol: float = 1e-6,
                             cfg: Optional[IntegratorConfig] = None) -> VerificationReport:
    eps = check_epsilon(eps)
    cfg = cfg or IntegratorConfig(t_max=t_max)
    worst, worst_pt, rows = 0.0, None, []
    for pattern, corner in PATTERN_CORNER.items():
        target = corner_point(rp, eps, CORNER_LEVELS[corner])
        for x0 in starts:
            tr = integrate(rp, corner_rates(eps, corner), x0, cfg)
            d = float(np.linalg.norm(tr.end - target))
            rows.append({"pattern": pattern, "corner": corner, "start": list(map(float, x0)),
                         "distance": d, "reason": tr.reason, "t_end": float(tr.t[-1])})
            if d >= worst:
                worst, worst_pt = d, tr.end.tolist()
    return VerificationReport("corners", worst < tol, tol - worst, worst_pt,
                              config={"eps": eps, "t_max": cfg.t_max, "tol": tol}, details={"runs": rows})


# -- Monte-Carlo containment and attraction -------------------------------------


def interior_points(region: Region, n: int, rng: np.random.Generator) -> np.ndarray:
    """Uniform random points strictly inside the region."""
    lo, hi = region.index.lo, region.index.hi
    out = []
    while sum(len(o) for o in out) < n:
        cand = rng.uniform(lo, hi, size=(4 * n, 2))
        keep = region.index.classify(cand, region.band) == 1
        out.append(cand[keep])
    return np.concatenate(out)[:n]


MC_CONFIG = IntegratorConfig(rtol=1e-9, atol=1e-12)


def random_rates(rng: np.random.Generator, eps: float, n_int: int, sampler: str = "uniform") -> np.ndarray:
    """Per-interval rates, uniform on the box or on its vertices (``"extremal"``)."""
    if sampler == "uniform":
        return rng.uniform(eps, 1.0 / eps, size=(n_int, 4))
    if sampler == "extremal":
        return np.where(rng.random((n_int, 4)) < 0.5, eps, 1.0 / eps)
    raise ValueError(f"unknown sampler {sampler!r}")


def check_containment(region: Region, rp: ReactionPair, eps: Optional[float] = None,
                      n_schedules: int = 200, n_starts: int = 20, T: float = 50.0, seed: int = 0,
                      dt: float = 0.1, dilation: float = 1e-6, sampler: str = "uniform",
                      cfg: IntegratorConfig = MC_CONFIG) -> VerificationReport:
    """Random admissible schedules from random interior starts must stay inside.

    Every start is paired with every schedule. ``eps`` sets the rate box the
    schedules are drawn from and defaults to the region's own.
    """
    eps = check_epsilon(region.eps if eps is None else eps)
    rngs = _rngs(seed, n_schedules + 1)
    starts = interior_points(region, n_starts, rngs[0])
    n_int = max(1, math.ceil(T / dt - 1e-9))
    sched = np.stack([random_rates(g, eps, n_int, sampler) for g in rngs[1:]])
    rates = np.repeat(sched, n_starts, axis=0)
    z0 = np.tile(starts, (n_schedules, 1))
    delta = dilation * region.diameter
    index = region.index
    first_bad: dict = {}

    def observe(lanes, z):
        ok = index.within(z, delta)
        if not ok.all():
            for lane, pt in zip(lanes[~ok], z[~ok]):
                d = float(index.distance(pt)[0])
                if lane not in first_bad or d > first_bad[lane][0]:
                    first_bad[int(lane)] = (d, pt.tolist())

    simulate_batch(rp, z0, rates, dt, cfg, observe)
    worst = max(first_bad.values(), default=(0.0, None))
    margin = (delta - worst[0]) / region.diameter
    return VerificationReport(
        "containment", not first_bad, margin, worst[1], seed,
        config={"n_schedules": n_schedules, "n_starts": n_starts, "T": T, "dt": dt, "eps": eps,
                "region_eps": region.eps, "dilation": dilation, "sampler": sampler},
        details={"escaped_lanes": len(first_bad), "lanes": int(len(z0))})


def perimeter_grid(lo: float = 0.05, hi: float = 20.0, n: int = 5) -> np.ndarray:
    """Boundary nodes of an ``n`` by ``n`` log-spaced grid."""
    g = np.geomspace(lo, hi, n)
    pts = [(x, y) for y in g for x in g if x in (g[0], g[-1]) or y in (g[0], g[-1])]
    return np.array(pts)


def check_attraction(region: Region, rp: ReactionPair, eps: Optional[float] = None,
                     starts=None, n_schedules: int = 50, T: float = 100.0, tol: float = 1e-3,
                     seed: int = 0, dt: float = 0.1, dilation: float = 1e-6,
                     cfg: IntegratorConfig = MC_CONFIG) -> VerificationReport:
    """Exterior starts under random schedules must reach the region and stay.

    A lane enters once it is inside the region dilated by ``dilation``
    times the diameter. After entry its distance to the region must stay
    within that dilation, and at time ``T`` its distance must be below
    ``tol``.
    """
    eps = check_epsilon(region.eps if eps is None else eps)
    starts = perimeter_grid() if starts is None else np.asarray(starts, dtype=float)
    starts = starts[region.index.classify(starts, region.band) == OUTSIDE]
    rngs = _rngs(seed, n_schedules)
    n_int = max(1, math.ceil(T / dt - 1e-9))
    sched = np.stack([random_rates(g, eps, n_int) for g in rngs])
    n_st = len(starts)
    rates = np.repeat(sched, n_st, axis=0)
    z0 = np.tile(starts, (n_schedules, 1))
    delta = dilation * region.diameter
    index = region.index
    entered = np.zeros(len(z0), dtype=bool)
    left_again = np.zeros(len(z0), dtype=bool)
    bad_pt: dict = {}

    def observe(lanes, z):
        ok = index.within(z, delta)
        was = entered[lanes]
        lost = was & ~ok
        if lost.any():
            for lane, pt in zip(lanes[lost], z[lost]):
                left_again[lane] = True
                bad_pt.setdefault(int(lane), pt.tolist())
        entered[lanes[ok]] = True

    hist = simulate_batch(rp, z0, rates, dt, cfg, observe)
    final = hist[-1]
    d_final = np.where(index.winding(final) != 0, 0.0, index.distance(final))
    worst = int(np.argmax(d_final))
    passed = bool(d_final.max() < tol and not left_again.any())
    sample = bad_pt[min(bad_pt)] if bad_pt else final[worst].tolist()
    return VerificationReport(
        "attraction", passed, float(tol - d_final.max()), sample, seed,
        config={"starts": starts.tolist(), "n_schedules": n_schedules, "T": T, "tol": tol, "dt": dt,
                "eps": eps},
        details={"max_final_distance": float(d_final.max()), "left_after_entry": int(left_again.sum()),
                 "never_entered": int((~entered).sum()), "lanes": int(len(z0))})


# -- steering -------------------------------------------------------------------------


@dataclass
class SteerConfig:
    integrator: IntegratorConfig = field(default_factory=lambda: IntegratorConfig(t_max=1e3))
    approach: float = 1e-9  # how close phase 1 gets to the side's starting point, relative
    n_intervals: int = 200  # neutralization intervals in the last phase
    max_switches: int = 20_000
    t_leg: float = 500.0  # time budget of a single leg


def _balance_rates(rp: ReactionPair, eps: float, pt) -> np.ndarray:
    """Rates in the box whose detailed-balance point is ``pt`` (levels clipped to the band)."""
    ll = np.clip(rp.log_levels(pt), band_log(eps, LO), band_log(eps, HI))
    r = np.exp(0.5 * ll)
    return np.clip(np.array([r[0], 1 / r[0], r[1], 1 / r[1]]), eps, 1 / eps)


class _Steerer:
    """Builds a schedule leg by leg, replaying each leg with the plain primitive."""

    def __init__(self, rp: ReactionPair, eps: float, z0, t0: float, cfg: SteerConfig):
        self.rp, self.eps, self.cfg = rp, eps, cfg
        self.z = np.asarray(z0, dtype=float)
        self.t = float(t0)
        self.times: list[float] = []
        self.rates: list[np.ndarray] = []

    def leg(self, k, events: Sequence[Event] = (), duration: Optional[float] = None, target=None):
        """Run ``k`` until an event, or for ``duration``; commit the leg and return the stop reason."""
        if len(self.times) >= self.cfg.max_switches:
            raise BudgetExceeded(f"steering needs more than {self.cfg.max_switches} switches")
        k = np.asarray(k, dtype=float)
        span = self.cfg.t_leg if duration is None else duration
        probe = _advance(self.rp, k, self.z, self.t, self.t + span, self.cfg.integrator, events, target)
        t_end = float(probe.t[-1])
        if t_end <= self.t:
            return probe.reason
        plain = _advance(self.rp, k, self.z, self.t, t_end, self.cfg.integrator)
        self.times.append(self.t)
        self.rates.append(k)
        self.t, self.z = float(plain.t[-1]), plain.end.copy()
        return probe.reason

    def schedule(self) -> RateSchedule:
        return RateSchedule(np.array(self.times), np.array(self.rates), self.eps)


def _near_event(target, radius: float) -> Event:
    target = np.asarray(target, dtype=float)
    return Event(lambda t, z: float(np.hypot(z[0] - target[0], z[1] - target[1]) - radius), "near", -1)


def _line_event(point, direction, name="line") -> Event:
    px, py = map(float, point)
    dx, dy = map(float, direction)
    return Event(lambda t, z: (z[0] - px) * dy - (z[1] - py) * dx, name)


def _ray_exit(region: Region, p, direction) -> tuple[np.ndarray, int]:
    """First boundary point hit from ``p`` moving along ``direction``, and its edge index."""
    d = np.asarray(direction, dtype=float)
    d = d / np.linalg.norm(d)
    far = p + d * 4 * region.diameter
    ring = region.boundary
    hits = shapely.LineString([p, far]).intersection(shapely.LineString(ring))
    pts = [np.array(g.coords[0]) for g in getattr(hits, "geoms", [hits]) if not g.is_empty
           for _ in [0] if g.geom_type == "Point"]
    if not pts:
        raise TargetOutsideRegion(f"no boundary point behind {p.tolist()}")
    q = min(pts, key=lambda x: np.linalg.norm(x - p))
    a, b = ring[:-1], ring[1:]
    from .geometry import segment_distance

    edge = int(np.argmin(segment_distance(q, a, b)))
    return q, edge


def steer(rp: ReactionPair, eps: float, p1, p2, xi: float, region: Optional[Region] = None,
          cfg: Optional[SteerConfig] = None, t0: float = 0.0) -> tuple[RateSchedule, Trajectory]:
    """Schedule that brings the state from ``p1`` to within ``xi`` of ``p2``.

    If both levels of ``p2`` are inside their bands, ``p2`` is the
    detailed-balance point of admissible constant rates, which are used
    until the state is within ``xi / 2``. Otherwise exactly one reaction
    ``j`` is out of band at ``p2``. The line through ``p2`` along the
    attracting direction of ``j`` meets the boundary at a point ``Q`` on a
    traced side. The schedule first drives the state to the start of that
    side, then follows the side under its rates until it meets the line,
    and finally moves along the line with reaction ``j`` pushed at its
    extreme ratio while the other reaction is kept in balance. The returned
    trajectory is the replay of the schedule from ``p1``.
    """
    eps = check_epsilon(eps)
    cfg = cfg or SteerConfig()
    p1, p2 = np.asarray(p1, dtype=float), np.asarray(p2, dtype=float)
    if region is not None and region.index.classify(p2.reshape(1, 2), region.band)[0] == OUTSIDE:
        raise TargetOutsideRegion(f"target {p2.tolist()} is outside the region")
    st = _Steerer(rp, eps, p1, t0, cfg)
    ll = rp.log_levels(p2)
    edge = band_log(eps, HI)
    out = np.abs(ll) > edge
    if not out.any():
        k = _balance_rates(rp, eps, p2)
        reason = st.leg(k, [_near_event(p2, 0.5 * xi)], target=p2)
        if reason == CONVERGED:  # settled without the event, e.g. started there
            pass
    else:
        if out.all() or region is None:
            raise TargetOutsideRegion(f"target {p2.tolist()} is outside both bands; no two-phase route")
        j = int(np.flatnonzero(out)[0])
        i = 1 - j
        s = 1.0 if ll[j] < 0 else -1.0
        d = s * rp.vectors[j]
        q, edge_idx = _ray_exit(region, p2, -d)
        side = next((sd for sd in region.sides if sd.first <= edge_idx < sd.last), None)
        if side is None:
            raise TargetOutsideRegion("target's boundary point has no recorded trajectory")
        origin = side.origin
        scale = 1.0 + float(np.linalg.norm(origin))
        if np.linalg.norm(st.z - origin) > cfg.approach * scale:
            st.leg(_balance_rates(rp, eps, origin), [_near_event(origin, cfg.approach * scale)], target=origin)
        # follow the side until it meets the line through p2
        if np.linalg.norm(q - p2) > 0.25 * xi:
            st.leg(side.rates, [_line_event(p2, d)], target=None)
            # move along the line, keeping reaction i balanced
            k = np.empty(4)
            k[2 * j:2 * j + 2] = (1 / eps, eps) if s > 0 else (eps, 1 / eps)
            passed = Event(lambda t, z: float((z - p2) @ d), "passed", +1)
            dist0 = float(np.linalg.norm(p2 - st.z))
            v0 = float(np.linalg.norm(velocity(rp, k_with(k, i, 1.0, 1.0), st.z)))
            t_est = dist0 / max(v0, 1e-300)
            for _ in range(20 * cfg.n_intervals):
                remaining = float((p2 - st.z) @ d) / float(d @ d) * float(np.linalg.norm(d))
                if remaining <= 0:
                    break
                kk = k_with(k, i, 1.0, 1.0)
                v = velocity(rp, kk, st.z)
                speed = float(np.linalg.norm(v))
                tau = min(t_est / cfg.n_intervals, max(remaining / max(speed, 1e-300), t_est / (10 * cfg.n_intervals)))
                mid = st.z + 0.5 * tau * v
                if np.any(mid <= 0):
                    mid = st.z
                c = math.exp(float(rp.log_levels(mid)[i]))
                c = min(max(c, eps * eps), 1 / (eps * eps))
                kk = k_with(k, i, math.sqrt(c), 1 / math.sqrt(c))
                if st.leg(kk, [passed], duration=tau) != TIMEOUT:
                    break
            else:
                raise BudgetExceeded("line phase did not pass the target")
        else:
            # the target sits on the side itself: stop where the flow crosses the normal line at p2
            v = velocity(rp, side.rates, p2)
            st.leg(side.rates, [Event(lambda t, z: float((z - p2) @ v), "passed", +1)], target=None)
    sched = st.schedule()
    traj = integrate_schedule(rp, sched, p1, cfg.integrator, T=st.t) if len(sched.times) else \
        Trajectory(np.array([t0]), p1.reshape(1, 2), TIMEOUT)
    return sched, traj


def k_with(k: np.ndarray, i: int, kf: float, kr: float) -> np.ndarray:
    out = np.array(k, dtype=float)
    out[2 * i] = kf
    out[2 * i + 1] = kr
    return out


# -- eigen-direction approach -----------------------------------------------------


def check_eigen_approach(rp: ReactionPair, eps: float, corner: str = "A", pattern: Optional[str] = None,
                         max_angle: float = 2.0, cfg: Optional[IntegratorConfig] = None) -> VerificationReport:
    """Linearization at a corner and the direction trajectories arrive from.

    Checks real negative eigenvalues, a fast eigenvector with components of
    opposite sign, and that trajectories from the two neighbouring corners
    arrive within ``max_angle`` degrees of the slow eigendirection. When the
    scaled discriminant is below ``1e-12`` the eigenvalues coincide, the
    direction test is skipped and the report says so.
    """
    eps = check_epsilon(eps)
    levels = CORNER_LEVELS[corner]
    if pattern is not None and PATTERN_CORNER.get(pattern, pattern) != corner:
        raise ValueError(f"pattern {pattern} does not make {corner} an attractor")
    k = corner_rates(eps, corner)
    z = corner_point(rp, eps, levels)
    jm = eigen2(jacobian_matrix(rp, k, z))
    details: dict = {"eigenvalues": [complex(v).real if jm.real else str(v) for v in jm.eigenvalues],
                     "disc_scaled": jm.disc / jm.trace ** 2}
    if jm.disc / jm.trace ** 2 < 1e-12:
        details["equal_eigenvalues"] = True
        ok = jm.trace < 0
        return VerificationReport("eigen", ok, 0.0, z.tolist(), config={"eps": eps, "corner": corner},
                                  details=details)
    real_neg = jm.real and max(jm.eigenvalues) < 0
    fast = jm.e_fast
    opposite = bool(fast[0] * fast[1] < 0)
    details.update({"e_slow": jm.e_slow.tolist(), "e_fast": fast.tolist(), "fast_opposite_signs": opposite})
    cfg = cfg or IntegratorConfig(t_max=1e3, tol_conv=1e-12)
    angles = []
    neighbours = [a for a, b, *_ in ARCS if b == corner] + [b for a, b, *_ in ARCS if a == corner]
    for nb in neighbours:
        start = corner_point(rp, eps, CORNER_LEVELS[nb])
        tr = integrate(rp, k, start, cfg, target=z)
        dist = np.linalg.norm(tr.z - z, axis=1)
        scale = 1.0 + float(np.linalg.norm(z))
        close = np.flatnonzero((dist < 1e-5 * scale) & (dist > 0))
        if not len(close):
            angles.append(180.0)
            continue
        u = (tr.z[close[0]] - z) / dist[close[0]]
        cosang = min(1.0, abs(float(u @ jm.e_slow)))
        angles.append(math.degrees(math.acos(cosang)))
    details["approach_angles_deg"] = angles
    worst = max(angles)
    passed = bool(real_neg and opposite and worst <= max_angle)
    return VerificationReport("eigen", passed, max_angle - worst, z.tolist(),
                              config={"eps": eps, "corner": corner, "max_angle": max_angle}, details=details)


# -- omega-limit reachability ---------------------------------------------------------


def check_minimal_attraction(region: Region, rp: ReactionPair, eps: Optional[float] = None,
                             probes: Sequence = ((1.0, 1.0),), partner=None, start=(10.0, 10.0),
                             seed: int = 0, rounds: int = 5, xi0: float = 1e-2,
                             cfg: Optional[SteerConfig] = None) -> VerificationReport:
    """Revisit each probe point ever more closely along one admissible schedule.

    The schedule alternates between the probe ``Q`` and a partner point,
    reaching ``Q`` within ``xi0 / 2**r`` in round ``r``. The concatenated
    schedule is then replayed from ``start`` and each revisit is checked on
    the replay. The partner defaults to a random interior point drawn from
    ``seed``.
    """
    eps = check_epsilon(region.eps if eps is None else eps)
    cfg = cfg or SteerConfig()
    rng = _rngs(seed, 1)[0]
    rows, worst, worst_pt, passed = [], -math.inf, None, True
    for probe in probes:
        q = np.asarray(probe, dtype=float)
        if region.index.classify(q.reshape(1, 2), region.band)[0] == OUTSIDE:
            raise TargetOutsideRegion(f"probe {q.tolist()} is outside the region")
        p2 = np.asarray(partner, dtype=float) if partner is not None else interior_points(region, 1, rng)[0]
        z, t = np.asarray(start, dtype=float), 0.0
        scheds, visits = [], []
        for r in range(rounds):
            xi = xi0 / 2 ** r
            for target, is_probe in ((p2, False), (q, True)):
                sc, tr = steer(rp, eps, z, target, xi, region, cfg, t0=t)
                scheds.append(sc)
                z, t = tr.end.copy(), float(tr.t[-1])
                if is_probe:
                    visits.append((t, xi))
        full = scheds[0]
        for sc in scheds[1:]:
            full = full.then(sc)
        replay = integrate_schedule(rp, full, start, cfg.integrator, T=t)
        ok_all = True
        times = []
        for tv, xi in visits:
            i = int(np.flatnonzero(replay.t == tv)[-1]) if np.any(replay.t == tv) else \
                int(np.argmin(np.abs(replay.t - tv)))
            d = float(np.linalg.norm(replay.z[i] - q))
            times.append(tv)
            ok_all &= d <= xi
            worst = max(worst, d / xi)
            if d / xi >= worst:
                worst_pt = replay.z[i].tolist()
            rows.append({"probe": q.tolist(), "xi": xi, "time": tv, "distance": d})
        increasing = all(b > a for a, b in zip(times, times[1:]))
        passed &= ok_all and increasing
    return VerificationReport("minimal_attraction", bool(passed), float(1.0 - worst), worst_pt, seed,
                              config={"rounds": rounds, "xi0": xi0, "start": list(start), "eps": eps},
                              details={"visits": rows})


def check_steer(region: Region, rp: ReactionPair, eps: Optional[float] = None, n_targets: int = 10,
                start=(10.0, 10.0), xi: float = 1e-3, seed: int = 0,
                cfg: Optional[SteerConfig] = None) -> VerificationReport:
    """Steer from ``start`` to random interior targets and replay each schedule."""
    eps = check_epsilon(region.eps if eps is None else eps)
    rng = _rngs(seed, 1)[0]
    targets = interior_points(region, n_targets, rng)
    rows, worst, worst_pt = [], 0.0, None
    for p2 in targets:
        sc, tr = steer(rp, eps, start, p2, xi, region, cfg)
        d = float(np.linalg.norm(tr.end - p2))
        in_box = bool(np.all(sc.rates >= eps) and np.all(sc.rates <= 1 / eps))
        rows.append({"target": p2.tolist(), "distance": d, "switches": int(len(sc.times)), "in_box": in_box})
        if d / xi >= worst or not in_box:
            worst, worst_pt = max(worst, d / xi), p2.tolist()
    passed = all(r["distance"] <= xi and r["in_box"] for r in rows)
    return VerificationReport("steer", passed, 1.0 - worst, worst_pt, seed,
                              config={"n_targets": n_targets, "xi": xi, "start": list(start), "eps": eps},
                              details={"targets": rows})
