"""Adaptive Dormand-Prince 5(4) integration of the planar field.

Two drivers share the same tableau and step controller:

* a scalar driver for single trajectories, with dense output, event
  location by bisection, convergence detection and arc-length resampling;
* a batch driver that advances many independent lanes at once with
  per-lane step sizes, used for Monte-Carlo verification.

Piecewise-constant rate schedules are integrated leg by leg; every leg
starts afresh at its switch time, so a schedule can be replayed bit for bit.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

from .errors import NonPositiveExcursion, ScheduleOutOfBox, StepUnderflow
from .network import ReactionPair, check_epsilon, detailed_balance_point

# Dormand-Prince 5(4) tableau.
C = (0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0)
A = (
    (),
    (1 / 5,),
    (3 / 40, 9 / 40),
    (44 / 45, -56 / 15, 32 / 9),
    (19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729),
    (9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656),
    (35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84),
)
B = A[6] + (0.0,)
# fifth minus fourth order weights
E = (71 / 57600, 0.0, -71 / 16695, 71 / 1920, -17253 / 339200, 22 / 525, -1 / 40)
# Quartic dense output: y(t0 + th*h) = y0 + h * K^T P [th, th^2, th^3, th^4]
P = np.array([
    [1, -8048581381 / 2820520608, 8663915743 / 2820520608, -12715105075 / 11282082432],
    [0, 0, 0, 0],
    [0, 131558114200 / 32700410799, -68118460800 / 10900136933, 87487479700 / 32700410799],
    [0, -1754552775 / 470086768, 14199869525 / 1410260304, -10690763975 / 1880347072],
    [0, 127303824393 / 49829197408, -318862633887 / 49829197408, 701980252875 / 199316789632],
    [0, -282668133 / 205662961, 2019193451 / 616988883, -1453857185 / 822651844],
    [0, 40617522 / 29380423, -110615467 / 29380423, 69997945 / 29380423],
])

SAFETY = 0.9
MIN_FACTOR = 0.2
MAX_FACTOR = 10.0
BETA = 0.04  # PI control, integral part
ALPHA = 0.2 - 0.75 * BETA

CONVERGED = "Converged"
TIMEOUT = "TimeOut"
DOMAIN_EXIT = "DomainExit"
EVENT_HIT = "EventHit"


@dataclass(frozen=True)
class IntegratorConfig:
    """Tolerances and budgets for one integration.

    ``h_out`` caps the arc length between output samples (``None`` means no
    cap) and ``chord_tol`` caps the distance between an output chord and the
    integrated curve, relative to ``1 + |z|``.
    """

    rtol: float = 1e-9
    atol: float = 1e-12
    t_max: float = 1e3
    tol_conv: float = 1e-8
    min_step: float = 1e-12
    max_steps: int = 2_000_000
    h_out: Optional[float] = None
    chord_tol: float = 1e-9

    def __post_init__(self):
        for name in ("rtol", "atol", "tol_conv", "min_step", "chord_tol"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if not (0 < self.t_max < math.inf):
            raise ValueError("t_max must be positive and finite")


@dataclass(frozen=True)
class Event:
    """Zero crossing of ``fn(t, z)`` that stops integration.

    ``direction`` restricts detection to increasing (+1) or decreasing (-1)
    crossings; 0 catches both.
    """

    fn: Callable[[float, np.ndarray], float]
    name: str = "event"
    direction: int = 0
    reason: str = EVENT_HIT


@dataclass
class Trajectory:
    t: np.ndarray
    z: np.ndarray
    reason: str
    steps: int = 0
    rejected: int = 0
    event: Optional[str] = None
    rates: Optional[np.ndarray] = None  # per-sample rate vector, if known

    @property
    def end(self) -> np.ndarray:
        return self.z[-1]

    def __len__(self) -> int:
        return len(self.t)

    def arc_length(self) -> float:
        return float(np.linalg.norm(np.diff(self.z, axis=0), axis=1).sum())


def _make_field(rp: ReactionPair, k) -> Callable[[float, float], tuple[float, float]]:
    (a1, b1), (a1p, b1p), (a2, b2), (a2p, b2p) = (tuple(map(float, e)) for e in rp.exponents)
    (v1x, v1y), (v2x, v2y) = (tuple(map(float, v)) for v in rp.vectors)
    k1, k2, k3, k4 = (float(c) for c in k)
    exp, log = math.exp, math.log

    def f(x: float, y: float):
        lx, ly = log(x), log(y)
        f1 = k1 * exp(a1 * lx + b1 * ly) - k2 * exp(a1p * lx + b1p * ly)
        f2 = k3 * exp(a2 * lx + b2 * ly) - k4 * exp(a2p * lx + b2p * ly)
        return f1 * v1x + f2 * v2x, f1 * v1y + f2 * v2y

    return f


def _speed_scale(rp: ReactionPair, k, x: float, y: float) -> float:
    """Velocity magnitude if every one-way rate pushed the same way."""
    from .field import gross_rate

    return float(gross_rate(rp, k, (x, y))) * float(np.max(np.linalg.norm(rp.vectors, axis=1)))


def _initial_step(f, x, y, fx, fy, cfg: IntegratorConfig, span: float) -> float:
    sx = cfg.atol + abs(x) * cfg.rtol
    sy = cfg.atol + abs(y) * cfg.rtol
    d0 = math.hypot(x / sx, y / sy) / math.sqrt(2)
    d1 = math.hypot(fx / sx, fy / sy) / math.sqrt(2)
    h0 = 1e-6 if d0 < 1e-5 or d1 < 1e-5 else 0.01 * d0 / d1
    h0 = min(h0, span)
    x1, y1 = x + h0 * fx, y + h0 * fy
    if x1 <= 0 or y1 <= 0:
        return max(h0 * 1e-3, cfg.min_step * 10)
    gx, gy = f(x1, y1)
    d2 = math.hypot((gx - fx) / sx, (gy - fy) / sy) / math.sqrt(2) / h0
    if d1 <= 1e-15 and d2 <= 1e-15:
        h1 = max(1e-6, h0 * 1e-3)
    else:
        h1 = (0.01 / max(d1, d2)) ** 0.2
    return min(100 * h0, h1, span)


@dataclass
class _Step:
    t0: float
    h: float
    x0: float
    y0: float
    kx: list
    ky: list

    def at(self, theta: float) -> tuple[float, float]:
        w = P @ np.array([theta, theta ** 2, theta ** 3, theta ** 4])
        return (self.x0 + self.h * float(np.dot(self.kx, w)),
                self.y0 + self.h * float(np.dot(self.ky, w)))


def _resample(steps: list[_Step], x_end: float, y_end: float, t_end: float, cfg: IntegratorConfig):
    """Turn accepted steps into a polyline obeying the arc and chord caps."""
    ts, xs, ys = [], [], []
    for s in steps:
        xa, ya = s.x0, s.y0
        xb, yb = s.at(1.0) if s is not steps[-1] else (x_end, y_end)
        length = math.hypot(xb - xa, yb - ya)
        xm, ym = s.at(0.5)
        sag = math.hypot(xm - 0.5 * (xa + xb), ym - 0.5 * (ya + yb))
        tol = cfg.chord_tol * (1.0 + math.hypot(xa, ya))
        n = max(1, math.ceil(math.sqrt(sag / tol)) if sag > tol else 1)
        if cfg.h_out is not None:
            n = max(n, math.ceil(length / cfg.h_out))
        ts.append(s.t0)
        xs.append(xa)
        ys.append(ya)
        for j in range(1, n):
            th = j / n
            xj, yj = s.at(th)
            ts.append(s.t0 + th * s.h)
            xs.append(xj)
            ys.append(yj)
    ts.append(t_end)
    xs.append(x_end)
    ys.append(y_end)
    return np.array(ts), np.column_stack([xs, ys])


def _advance(
    rp: ReactionPair,
    k,
    z0,
    t0: float,
    t1: float,
    cfg: IntegratorConfig,
    events: Sequence[Event] = (),
    target=None,
) -> Trajectory:
    """Integrate under constant rates ``k`` from ``(t0, z0)`` to ``t1`` or a stop.

    This is the single primitive every driver is built on; its result is a
    pure function of its arguments.
    """
    f = _make_field(rp, k)
    x, y = float(z0[0]), float(z0[1])
    if not (x > 0 and y > 0):
        raise NonPositiveExcursion(f"start point {z0} is not strictly positive")
    t = float(t0)
    fx, fy = f(x, y)
    steps: list[_Step] = []
    n_steps = n_rej = 0
    reason, hit = TIMEOUT, None

    conv_dist = conv_speed = None
    if target is not None:
        target = np.asarray(target, dtype=float)
        conv_dist = cfg.tol_conv * (1.0 + float(np.linalg.norm(target)))
        conv_speed = cfg.tol_conv * _speed_scale(rp, k, *target)

    def converged(x, y, fx, fy):
        return (conv_dist is not None
                and math.hypot(x - target[0], y - target[1]) < conv_dist
                and math.hypot(fx, fy) < conv_speed)

    g_prev = [ev.fn(t, np.array([x, y])) for ev in events]

    if converged(x, y, fx, fy) or t1 <= t:
        tt, zz = np.array([t]), np.array([[x, y]])
        return Trajectory(tt, zz, CONVERGED if t1 > t else TIMEOUT)

    h = _initial_step(f, x, y, fx, fy, cfg, t1 - t)
    facold = 1e-4
    rejected_last = False
    while True:
        if n_steps + n_rej >= cfg.max_steps:
            raise StepUnderflow(f"step budget {cfg.max_steps} exhausted at t={t}")
        h = min(h, t1 - t)
        last = t + h >= t1
        kx, ky = [fx], [fy]
        ok = True
        for s in range(1, 7):
            a = A[s]
            xs = x + h * sum(a[j] * kx[j] for j in range(s))
            ys = y + h * sum(a[j] * ky[j] for j in range(s))
            if not (xs > 0 and ys > 0):
                ok = False
                break
            gx, gy = f(xs, ys)
            kx.append(gx)
            ky.append(gy)
        if not ok:
            n_rej += 1
            h *= 0.25
            rejected_last = True
            if h < cfg.min_step:
                raise NonPositiveExcursion(f"positivity lost at t={t}, z=({x}, {y}) even at the minimum step")
            continue
        xn, yn = xs, ys  # stage 7 is the fifth-order solution
        ex = h * sum(E[j] * kx[j] for j in range(7))
        ey = h * sum(E[j] * ky[j] for j in range(7))
        sx = cfg.atol + cfg.rtol * max(abs(x), abs(xn))
        sy = cfg.atol + cfg.rtol * max(abs(y), abs(yn))
        err = math.sqrt(0.5 * ((ex / sx) ** 2 + (ey / sy) ** 2))
        if err <= 1.0:
            fac = err ** ALPHA / facold ** BETA if err > 0 else 0.0
            fac = max(1.0 / MAX_FACTOR, min(1.0 / MIN_FACTOR, fac / SAFETY))
            h_next = h / fac if fac > 0 else h * MAX_FACTOR
            if rejected_last:
                h_next = min(h_next, h)
            facold = max(err, 1e-4)
            rejected_last = False
            step = _Step(t, h, x, y, kx, ky)
            n_steps += 1
            t_new = t1 if last else t + h
            # events
            stop_theta = None
            for i, ev in enumerate(events):
                g_new = ev.fn(t_new, np.array([xn, yn]))
                gp = g_prev[i]
                crossed = (gp < 0 <= g_new) if ev.direction > 0 else (
                    (gp > 0 >= g_new) if ev.direction < 0 else (gp * g_new <= 0 and gp != 0))
                if crossed:
                    lo, hi = 0.0, 1.0
                    for _ in range(60):
                        mid = 0.5 * (lo + hi)
                        zm = step.at(mid)
                        gm = ev.fn(t + mid * h, np.array(zm))
                        if (gp < 0) == (gm < 0) and gm != 0:
                            lo = mid
                        else:
                            hi = mid
                        if hi - lo < 1e-15:
                            break
                    if stop_theta is None or hi < stop_theta:
                        stop_theta, hit = hi, ev
                g_prev[i] = g_new
            if stop_theta is not None:
                if stop_theta < 1.0:
                    xe, ye = step.at(stop_theta)
                    te = t + stop_theta * h
                else:
                    xe, ye, te = xn, yn, t_new
                steps.append(_Truncated(step, stop_theta))
                t, x, y = te, xe, ye
                reason = hit.reason
                break
            steps.append(step)
            fx, fy = kx[6], ky[6]
            t, x, y = t_new, xn, yn
            if converged(x, y, fx, fy):
                reason = CONVERGED
                break
            if last:
                reason = TIMEOUT
                break
            h = h_next
        else:
            n_rej += 1
            fac = min(1.0 / MIN_FACTOR, err ** ALPHA / SAFETY)
            h = h / fac
            rejected_last = True
            if h < cfg.min_step:
                raise StepUnderflow(f"step size {h} below minimum at t={t}")

    tt, zz = _resample(steps, x, y, t, cfg)
    return Trajectory(tt, zz, reason, n_steps, n_rej, hit.name if hit is not None else None,
                      np.tile(np.asarray(k, dtype=float), (len(tt), 1)))


class _Truncated(_Step):
    """A step cut short at ``theta``; dense output is rescaled to [0, 1]."""

    def __init__(self, step: _Step, theta: float):
        super().__init__(step.t0, step.h * theta, step.x0, step.y0, step.kx, step.ky)
        self._full, self._theta = step, theta

    def at(self, theta: float):
        return self._full.at(theta * self._theta)


def integrate(
    rp: ReactionPair,
    k,
    x0,
    cfg: IntegratorConfig = IntegratorConfig(),
    events: Sequence[Event] = (),
    target="balance",
    t0: float = 0.0,
) -> Trajectory:
    """Integrate under constant rates until convergence, an event, or ``cfg.t_max``.

    By default the run stops once it settles at the detailed-balance point
    of ``k``, the unique positive equilibrium of the constant-rate system.
    Pass ``target=None`` to integrate for the full time.
    """
    k = np.asarray(k, dtype=float)
    if isinstance(target, str):
        target = detailed_balance_point(rp, k)
    return _advance(rp, k, np.asarray(x0, dtype=float), t0, t0 + cfg.t_max, cfg, events, target)


# -- schedules -------------------------------------------------------------------------


@dataclass(frozen=True)
class RateSchedule:
    """Piecewise-constant rates: ``rates[j]`` applies on ``[times[j], times[j+1])``.

    The last interval extends indefinitely.
    """

    times: np.ndarray
    rates: np.ndarray
    eps: float

    def __post_init__(self):
        times = np.asarray(self.times, dtype=float).reshape(-1)
        rates = np.asarray(self.rates, dtype=float).reshape(-1, 4)
        eps = check_epsilon(self.eps)
        if len(times) != len(rates) or len(times) == 0:
            raise ValueError("need one rate vector per switch time")
        if np.any(np.diff(times) <= 0):
            raise ValueError("switch times must be strictly increasing")
        slack = 1e-12
        if np.any(rates < eps * (1 - slack)) or np.any(rates > (1 / eps) * (1 + slack)):
            bad = rates[(rates < eps * (1 - slack)) | (rates > (1 / eps) * (1 + slack))]
            raise ScheduleOutOfBox(f"rate {bad[0]} outside [{eps}, {1 / eps}]")
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "rates", rates)
        object.__setattr__(self, "eps", eps)

    @classmethod
    def constant(cls, k, eps: float) -> "RateSchedule":
        return cls(np.array([0.0]), np.asarray(k, dtype=float).reshape(1, 4), eps)

    @classmethod
    def random(cls, eps: float, dt: float, T: float, rng: np.random.Generator) -> "RateSchedule":
        n = max(1, math.ceil(T / dt - 1e-9))
        times = np.arange(n) * dt
        return cls(times, rng.uniform(eps, 1.0 / eps, size=(n, 4)), eps)

    def rate_at(self, t: float) -> np.ndarray:
        j = int(np.searchsorted(self.times, t, side="right")) - 1
        return self.rates[max(j, 0)]

    def legs(self, T: float):
        """Yield ``(t_start, t_end, k)`` for each interval up to time ``T``."""
        for j, ts in enumerate(self.times):
            if ts >= T:
                break
            te = self.times[j + 1] if j + 1 < len(self.times) else T
            yield float(ts), float(min(te, T)), self.rates[j]

    def then(self, other: "RateSchedule") -> "RateSchedule":
        """Concatenate ``other`` (already in absolute times) after this schedule."""
        return RateSchedule(np.concatenate([self.times, other.times]),
                            np.concatenate([self.rates, other.rates]), self.eps)

    def to_json(self) -> dict:
        return {"epsilon": self.eps, "times": self.times.tolist(), "rates": self.rates.tolist()}


def concatenate(trajs: Sequence[Trajectory]) -> Trajectory:
    """Join legs that share endpoints into one trajectory."""
    ts, zs, ks = [trajs[0].t], [trajs[0].z], [trajs[0].rates]
    for tr in trajs[1:]:
        ts.append(tr.t[1:])
        zs.append(tr.z[1:])
        ks.append(tr.rates[1:] if tr.rates is not None else None)
    rates = np.concatenate(ks) if all(r is not None for r in ks) else None
    last = trajs[-1]
    return Trajectory(np.concatenate(ts), np.concatenate(zs), last.reason,
                      sum(tr.steps for tr in trajs), sum(tr.rejected for tr in trajs), last.event, rates)


def integrate_schedule(
    rp: ReactionPair,
    sched: RateSchedule,
    x0,
    cfg: IntegratorConfig = IntegratorConfig(),
    T: Optional[float] = None,
) -> Trajectory:
    """Integrate a piecewise-constant schedule from ``sched.times[0]`` to ``T``.

    Each interval is a fresh constant-rate leg, so no step straddles a switch.
    """
    T = float(cfg.t_max if T is None else T)
    z = np.asarray(x0, dtype=float)
    legs = []
    for ts, te, k in sched.legs(T):
        leg = _advance(rp, k, z, ts, te, cfg)
        legs.append(leg)
        z = leg.end
    if not legs:
        return Trajectory(np.array([sched.times[0]]), z.reshape(1, 2), TIMEOUT)
    out = concatenate(legs)
    out.reason = TIMEOUT
    return out


# -- batch driver ----------------------------------------------------------------------


def _batch_field(rp: ReactionPair):
    ex = rp.exponents.T.copy()
    vec = rp.vectors

    def f(k, z):
        m = np.exp(np.log(z) @ ex) * k
        return np.stack([m[:, 0] - m[:, 1], m[:, 2] - m[:, 3]], axis=1) @ vec

    return f


def advance_batch(
    rp: ReactionPair,
    k: np.ndarray,
    z0: np.ndarray,
    dt: float,
    cfg: IntegratorConfig,
    h0: Optional[np.ndarray] = None,
    observer: Optional[Callable[[np.ndarray, np.ndarray], None]] = None,
) -> tuple[np.ndarray, np.ndarray, dict]:
    """Advance many independent lanes by ``dt`` under per-lane constant rates.

    ``observer(idx, z)`` is called after every accepted batch step with the
    lane indices that moved and their new states. Returns the final states,
    the suggested next step sizes and step statistics.
    """
    f = _batch_field(rp)
    n = len(z0)
    z = np.array(z0, dtype=float)
    t = np.zeros(n)
    fz = f(k, z)
    if h0 is None:
        scale = cfg.atol + cfg.rtol * np.abs(z)
        d0 = np.sqrt(np.mean((z / scale) ** 2, axis=1))
        d1 = np.sqrt(np.mean((fz / scale) ** 2, axis=1))
        h = np.where((d0 < 1e-5) | (d1 < 1e-5), 1e-6, 0.01 * d0 / np.maximum(d1, 1e-300))
        h = np.minimum(h, dt)
    else:
        h = np.minimum(np.asarray(h0, dtype=float), dt)
    facold = np.full(n, 1e-4)
    active = np.ones(n, dtype=bool)
    stats = {"steps": 0, "rejected": 0}
    aT = [np.array(a) for a in A]
    while active.any():
        idx = np.flatnonzero(active)
        hi = np.minimum(h[idx], dt - t[idx])
        zi, ki = z[idx], k[idx]
        K = np.empty((7, len(idx), 2))
        K[0] = fz[idx]
        bad = np.zeros(len(idx), dtype=bool)
        for s in range(1, 7):
            zs = zi + hi[:, None] * np.tensordot(aT[s], K[:s], axes=(0, 0))
            neg = ~np.all(zs > 0, axis=1)
            bad |= neg
            zs[neg] = zi[neg]
            K[s] = f(ki, zs)
        zn = zi + hi[:, None] * np.tensordot(np.array(B[:6]), K[:6], axes=(0, 0))
        err_v = hi[:, None] * np.tensordot(np.array(E), K, axes=(0, 0))
        sc = cfg.atol + cfg.rtol * np.maximum(np.abs(zi), np.abs(zn))
        err = np.sqrt(np.mean((err_v / sc) ** 2, axis=1))
        err[bad] = np.inf
        acc = err <= 1.0
        fac = np.where(err > 0, np.power(np.where(np.isfinite(err), err, 1.0), ALPHA)
                       / facold[idx] ** BETA, 0.0)
        fac = np.clip(fac / SAFETY, 1.0 / MAX_FACTOR, 1.0 / MIN_FACTOR)
        h_acc = np.where(fac > 0, hi / np.where(fac > 0, fac, 1.0), hi * MAX_FACTOR)
        rej_fac = np.where(np.isfinite(err), np.clip(
            np.power(np.where(np.isfinite(err), err, 1.0), ALPHA) / SAFETY, 1.0, 1.0 / MIN_FACTOR), 4.0)
        h_rej = hi / rej_fac
        a_idx, r_idx = idx[acc], idx[~acc]
        stats["steps"] += int(acc.sum())
        stats["rejected"] += int((~acc).sum())
        if len(r_idx) and np.any(h_rej[~acc] < cfg.min_step):
            raise StepUnderflow("batch lane step size fell below the minimum")
        h[r_idx] = h_rej[~acc]
        # a lane that reaches the end keeps its pre-truncation step suggestion
        reached = acc & (hi >= dt - t[idx])
        z[a_idx] = zn[acc]
        fz[a_idx] = K[6][acc]
        t[a_idx] = np.where(reached[acc], dt, t[a_idx] + hi[acc])
        h[a_idx] = np.where(reached[acc], np.maximum(h_acc[acc], h[a_idx]), h_acc[acc])
        facold[a_idx] = np.maximum(err[acc], 1e-4)
        active[a_idx[reached[acc]]] = False
        if observer is not None and len(a_idx):
            observer(a_idx, z[a_idx])
    return z, h, stats


def simulate_batch(
    rp: ReactionPair,
    z0: np.ndarray,
    rates: np.ndarray,
    dt: float,
    cfg: IntegratorConfig,
    observer: Optional[Callable[[np.ndarray, np.ndarray], None]] = None,
) -> np.ndarray:
    """Integrate lanes through piecewise-constant schedules on a common switch grid.

    ``rates`` has shape (lanes, intervals, 4). Returns the states at the end
    of every interval, shape (intervals + 1, lanes, 2).
    """
    z = np.array(z0, dtype=float)
    out = [z.copy()]
    h = None
    for j in range(rates.shape[1]):
        z, h, _ = advance_batch(rp, rates[:, j], z, dt, cfg, h, observer)
        out.append(z.copy())
    return np.array(out)
