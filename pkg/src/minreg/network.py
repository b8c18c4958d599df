"""Two reversible reactions in species X, Y and the algebra of their level curves.

A reversible reaction ``aX + bY <=> a'X + b'Y`` has reaction vector
``v = (a' - a, b' - b)`` and level function ``L(x, y) = x**v[0] * y**v[1]``.
Under constant rates ``k_fwd, k_rev`` the reaction is at equilibrium exactly
on the curve ``L = k_fwd / k_rev``; with rates confined to ``[eps, 1/eps]``
those curves sweep the band ``eps**2 <= L <= 1/eps**2``.

Every curve computation here is done on log-levels ``v . log(z)``, which
turns the curves into straight lines and corner finding into a 2x2 solve.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Optional

import numpy as np

from .errors import (
    DegenerateSlope,
    EpsilonTooLarge,
    MalformedInput,
    NonPositivePoint,
    ParallelReactions,
    WrongCase,
)

LO = -1  # curve level eps**2
HI = +1  # curve level 1/eps**2

# Corner labels keyed to the (reaction 1, reaction 2) level pair.
CORNER_LEVELS = {"A": (LO, HI), "B": (HI, HI), "C": (HI, LO), "D": (LO, LO)}
CORNER_ORDER = ("A", "B", "C", "D")

_REL_TOL = 1e-12


def check_epsilon(eps) -> float:
    try:
        eps = float(eps)
    except (TypeError, ValueError):
        raise MalformedInput(f"epsilon must be a number, got {eps!r}") from None
    if not (0.0 < eps < 1.0) or not math.isfinite(eps):
        raise MalformedInput(f"epsilon must lie in (0, 1), got {eps}")
    return eps


def band_log(eps: float, side: int) -> float:
    """Log of the band edge: ``log(eps**2)`` for LO, ``log(1/eps**2)`` for HI."""
    return -2.0 * side * math.log(eps)


def _pair(value, what: str) -> tuple[float, float]:
    try:
        a, b = (float(v) for v in value)
    except (TypeError, ValueError):
        raise MalformedInput(f"{what} must be a pair of numbers, got {value!r}") from None
    if not (math.isfinite(a) and math.isfinite(b)) or a < 0 or b < 0:
        raise MalformedInput(f"{what} exponents must be finite and nonnegative, got {value!r}")
    return a, b


@dataclass(frozen=True)
class ReactionPair:
    """Stoichiometric exponents of two reversible reactions.

    Rates are ordered ``(k1, k2, k3, k4)``: ``k1`` drives reaction 1 forward
    (reactant -> product), ``k2`` backward, ``k3``/``k4`` likewise for
    reaction 2.
    """

    r1_reactant: tuple[float, float]
    r1_product: tuple[float, float]
    r2_reactant: tuple[float, float]
    r2_product: tuple[float, float]

    def __post_init__(self):
        for name in ("r1_reactant", "r1_product", "r2_reactant", "r2_product"):
            object.__setattr__(self, name, _pair(getattr(self, name), name))
        for i, v in enumerate(self.vectors, start=1):
            if v[0] == 0 and v[1] == 0:
                raise MalformedInput(f"reaction {i} has a zero reaction vector")
        v1, v2 = self.vectors
        cross = v1[0] * v2[1] - v1[1] * v2[0]
        if abs(cross) <= 1e-12 * np.linalg.norm(v1) * np.linalg.norm(v2):
            raise ParallelReactions(f"reaction vectors {v1.tolist()} and {v2.tolist()} are parallel")
        for i, v in enumerate(self.vectors, start=1):
            if v[0] == 0 or v[1] == 0:
                raise DegenerateSlope(f"reaction {i} has axis-parallel vector {tuple(v)}")
            if v[1] == -v[0]:
                raise DegenerateSlope(f"reaction {i} has slope exactly -1")

    @cached_property
    def exponents(self) -> np.ndarray:
        """Monomial exponents, rows in rate order k1..k4."""
        return np.array([self.r1_reactant, self.r1_product, self.r2_reactant, self.r2_product])

    @cached_property
    def vectors(self) -> np.ndarray:
        e = self.exponents
        return np.array([e[1] - e[0], e[3] - e[2]])

    @property
    def v1(self) -> np.ndarray:
        return self.vectors[0]

    @property
    def v2(self) -> np.ndarray:
        return self.vectors[1]

    @property
    def slopes(self) -> tuple[float, float]:
        v = self.vectors
        return float(v[0, 1] / v[0, 0]), float(v[1, 1] / v[1, 0])

    @cached_property
    def _inverse(self) -> np.ndarray:
        v = self.vectors
        det = v[0, 0] * v[1, 1] - v[0, 1] * v[1, 0]
        return np.array([[v[1, 1], -v[0, 1]], [-v[1, 0], v[0, 0]]]) / det

    def log_levels(self, pts) -> np.ndarray:
        """Log-levels of both reactions at ``pts`` (shape (..., 2))."""
        pts = np.asarray(pts, dtype=float)
        if np.any(pts <= 0):
            raise NonPositivePoint("curve levels need strictly positive coordinates")
        return np.log(pts) @ self.vectors.T

    def solve_log_levels(self, log_levels) -> np.ndarray:
        """The unique positive point with the given pair of log-levels."""
        lz = np.asarray(log_levels, dtype=float) @ self._inverse.T
        return np.exp(lz)

    def reversed(self, i: int) -> "ReactionPair":
        """Same network with reaction ``i`` (1 or 2) written backwards."""
        r = [self.r1_reactant, self.r1_product, self.r2_reactant, self.r2_product]
        j = 2 * (i - 1)
        r[j], r[j + 1] = r[j + 1], r[j]
        return ReactionPair(*r)

    def swapped(self) -> "ReactionPair":
        """Same network with the two reactions exchanged."""
        return ReactionPair(self.r2_reactant, self.r2_product, self.r1_reactant, self.r1_product)

    def species_swapped(self) -> "ReactionPair":
        """Same network with the roles of X and Y exchanged."""
        return ReactionPair(*(p[::-1] for p in (self.r1_reactant, self.r1_product,
                                                 self.r2_reactant, self.r2_product)))

    def to_json(self) -> list:
        return [
            {"reactant": list(self.r1_reactant), "product": list(self.r1_product)},
            {"reactant": list(self.r2_reactant), "product": list(self.r2_product)},
        ]


def read_network(text: str) -> tuple[ReactionPair, float]:
    """Parse the JSON network format into a pair and its epsilon."""
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise MalformedInput(f"network file is not valid JSON: {exc}") from None
    if not isinstance(doc, dict) or "reactions" not in doc:
        raise MalformedInput("network file needs a 'reactions' list")
    reactions = doc["reactions"]
    if not isinstance(reactions, list) or len(reactions) != 2:
        raise MalformedInput("exactly two reversible reactions are supported")
    pairs = []
    for i, r in enumerate(reactions, start=1):
        if not isinstance(r, dict) or "reactant" not in r or "product" not in r:
            raise MalformedInput(f"reaction {i} needs 'reactant' and 'product'")
        pairs += [_pair(r["reactant"], f"reaction {i} reactant"), _pair(r["product"], f"reaction {i} product")]
    if "epsilon" not in doc:
        raise MalformedInput("network file needs 'epsilon'")
    return ReactionPair(*pairs), check_epsilon(doc["epsilon"])


def parse_network(text: str) -> ReactionPair:
    return read_network(text)[0]


# -- case classification -------------------------------------------------------


@dataclass(frozen=True)
class Normalization:
    """Relabeling that brings a mixed-slope network into the standard frame.

    In the standard frame reaction 1 has vector ``(-p1, q1)`` with
    ``p1 > q1 > 0`` and reaction 2 has ``(-p2, q2)`` with ``p2 < 0 < q2``.
    ``order[j]`` is the original (0-based) index of standard reaction ``j``
    and ``flip[j]`` says whether it was written backwards.
    """

    swap_species: bool = False
    order: tuple[int, int] = (0, 1)
    flip: tuple[bool, bool] = (False, False)

    def apply(self, rp: ReactionPair) -> ReactionPair:
        out = rp.species_swapped() if self.swap_species else rp
        if self.order != (0, 1):
            out = out.swapped()
        for j in (0, 1):
            if self.flip[j]:
                out = out.reversed(j + 1)
        return out

    def point_to_original(self, pt):
        pt = np.asarray(pt, dtype=float)
        return pt[..., ::-1].copy() if self.swap_species else pt

    point_to_standard = point_to_original  # the species swap is an involution

    def rates_to_original(self, k) -> np.ndarray:
        k = np.asarray(k, dtype=float)
        out = np.empty_like(k)
        for j in (0, 1):
            pair = k[..., 2 * j:2 * j + 2]
            if self.flip[j]:
                pair = pair[..., ::-1]
            i = self.order[j]
            out[..., 2 * i:2 * i + 2] = pair
        return out

    def rates_to_standard(self, k) -> np.ndarray:
        k = np.asarray(k, dtype=float)
        out = np.empty_like(k)
        for j in (0, 1):
            i = self.order[j]
            pair = k[..., 2 * i:2 * i + 2]
            if self.flip[j]:
                pair = pair[..., ::-1]
            out[..., 2 * j:2 * j + 2] = pair
        return out

    def levels_to_original(self, levels: tuple[int, int]) -> tuple[int, int]:
        """Map a (LO/HI, LO/HI) level pair from the standard frame back."""
        out = [0, 0]
        for j in (0, 1):
            out[self.order[j]] = -levels[j] if self.flip[j] else levels[j]
        return tuple(out)

    def levels_to_standard(self, levels: tuple[int, int]) -> tuple[int, int]:
        out = [0, 0]
        for j in (0, 1):
            s = levels[self.order[j]]
            out[j] = -s if self.flip[j] else s
        return tuple(out)


@dataclass(frozen=True)
class CaseLabel:
    case: str
    subcase: Optional[str]
    slopes: tuple[float, float]
    p: tuple[float, float]
    q: tuple[float, float]
    normalization: Normalization = field(default_factory=Normalization)

    @property
    def mixed(self) -> bool:
        return self.case in ("V", "VI")

    def __str__(self) -> str:
        return f"case {self.case}" + (f", subcase {self.subcase}" if self.subcase else "")


def _band(s: float) -> str:
    if s > 0:
        return "pos"
    return "shallow" if s > -1 else "steep"


def classify_case(rp: ReactionPair, eps: Optional[float] = None) -> CaseLabel:
    """Orientation case of the two uncertainty bands.

    The label depends on the slopes alone; ``eps`` is accepted for symmetry
    with the other operations and ignored.
    """
    s1, s2 = rp.slopes
    for s in (s1, s2):
        if s == 0 or s == -1 or not math.isfinite(s):
            raise DegenerateSlope(f"slope {s} is on a case boundary")
    bands = {_band(s1), _band(s2)}
    if bands == {"shallow", "steep"}:
        case = "I"
    elif bands == {"shallow"}:
        case = "II"
    elif bands == {"steep"}:
        case = "III"
    elif bands == {"pos"}:
        case = "IV"
    elif bands == {"pos", "shallow"}:
        case = "V"
    else:
        case = "VI"

    if case not in ("V", "VI"):
        v = rp.vectors
        return CaseLabel(case, None, (s1, s2), (float(-v[0, 0]), float(-v[1, 0])),
                         (float(v[0, 1]), float(v[1, 1])))

    swap = case == "VI"
    vecs = rp.vectors[:, ::-1] if swap else rp.vectors
    blue = 0 if vecs[0, 1] / vecs[0, 0] < 0 else 1
    red = 1 - blue
    # standard frame: blue = (-p1, q1) points up-left, red = (-p2, q2) points up-right
    norm = Normalization(swap, (blue, red), (bool(vecs[blue, 1] < 0), bool(vecs[red, 1] < 0)))
    std = norm.apply(rp).vectors
    p = (float(-std[0, 0]), float(-std[1, 0]))
    q = (float(std[0, 1]), float(std[1, 1]))
    assert p[0] > q[0] > 0 and p[1] < 0 < q[1], (p, q)
    d = p[0] + p[1] - q[0] - q[1]
    sub = "a" if d < 0 else ("b" if d > 0 else "c")
    return CaseLabel(case, sub, (s1, s2), p, q, norm)


# -- curves and corners ----------------------------------------------------------


@dataclass(frozen=True)
class CurveLevel:
    reaction: int
    log_level: float

    @property
    def level(self) -> float:
        return math.exp(self.log_level)

    @classmethod
    def of(cls, reaction: int, level: float) -> "CurveLevel":
        if level <= 0:
            raise ValueError("curve levels are positive")
        return cls(reaction, math.log(level))


def curve_level(rp: ReactionPair, i: int, pt) -> CurveLevel:
    if i not in (1, 2):
        raise ValueError("reaction index is 1 or 2")
    return CurveLevel(i, float(rp.log_levels(pt)[i - 1]))


def intersect_curves(rp: ReactionPair, c1: CurveLevel, c2: CurveLevel) -> np.ndarray:
    if c1.reaction == c2.reaction:
        raise ParallelReactions("both curves belong to the same reaction")
    if c1.reaction == 2:
        c1, c2 = c2, c1
    return rp.solve_log_levels([c1.log_level, c2.log_level])


def corner_point(rp: ReactionPair, eps: float, levels: tuple[int, int]) -> np.ndarray:
    return rp.solve_log_levels([band_log(eps, levels[0]), band_log(eps, levels[1])])


@dataclass(frozen=True)
class CornerSet:
    eps: float
    points: dict
    levels: dict
    tags: dict

    def __getitem__(self, label: str) -> np.ndarray:
        return self.points[label]

    @property
    def sources(self) -> list[str]:
        return [c for c in CORNER_ORDER if self.tags[c] == "source"]

    @property
    def sinks(self) -> list[str]:
        return [c for c in CORNER_ORDER if self.tags[c] == "sink"]


def corner_points(rp: ReactionPair, eps: float) -> CornerSet:
    from .field import corner_cone

    eps = check_epsilon(eps)
    points, tags = {}, {}
    for label in CORNER_ORDER:
        points[label] = corner_point(rp, eps, CORNER_LEVELS[label])
        tags[label] = corner_cone(rp, eps, CORNER_LEVELS[label]).tag
    return CornerSet(eps, points, dict(CORNER_LEVELS), tags)


def detailed_balance_point(rp: ReactionPair, k) -> np.ndarray:
    k = np.asarray(k, dtype=float)
    if k.shape != (4,) or np.any(k <= 0):
        raise ValueError("need four positive rate constants")
    return rp.solve_log_levels([math.log(k[0] / k[1]), math.log(k[2] / k[3])])


def tangent_slope(rp: ReactionPair, i: int, pt) -> float:
    """dy/dx of the level curve of reaction ``i`` through ``pt``."""
    pt = np.asarray(pt, dtype=float)
    if np.any(pt <= 0):
        raise NonPositivePoint("tangent slope needs a positive point")
    v = rp.vectors[i - 1]
    return float(-(v[0] / v[1]) * (pt[1] / pt[0]))


# -- mixed-slope special points -------------------------------------------------


def ray_ratio(rp: ReactionPair) -> float:
    """``y/x`` on the ray where each reaction vector is tangent to the other's curves.

    Only defined when the reaction slopes have opposite signs.
    """
    v = rp.vectors
    r = -(v[0, 1] * v[1, 1]) / (v[0, 0] * v[1, 0])
    if r <= 0:
        raise WrongCase("tangency ray exists only for slopes of opposite sign")
    return float(r)


def ray_point(rp: ReactionPair, reaction: int, log_level: float) -> np.ndarray:
    """Point where the level curve of ``reaction`` meets the tangency ray."""
    v = rp.vectors[reaction - 1]
    lr = math.log(ray_ratio(rp))
    # log y = log x + lr, v . (log x, log y) = log_level
    lx = (log_level - v[1] * lr) / (v[0] + v[1])
    return np.exp(np.array([lx, lx + lr]))


def arc_position(rp: ReactionPair, start, end, pt) -> float:
    """Position of ``pt`` along the log-space segment from ``start`` to ``end``."""
    a, b, p = (np.log(np.asarray(z, dtype=float)) for z in (start, end, pt))
    d = b - a
    return float((p - a) @ d / (d @ d))


@dataclass(frozen=True)
class SpecialPoints:
    """Tangency points of a mixed-slope network, in the original frame.

    ``E`` is the split point on the arc where the boundary starts two
    trajectories; ``F`` is its counterpart on the curve of the other
    reaction used to bound the E-trajectories. Either may be ``None`` in
    subcase c, where at most one point per family exists on its arc.
    """

    E: Optional[np.ndarray]
    F: Optional[np.ndarray]
    e_curve: Optional[tuple[int, int]]  # (reaction, LO/HI) in the original frame
    f_curve: Optional[tuple[int, int]]
    subcase: str


def _standard_E_F(p, q, eps):
    """Closed forms in the standard frame for the E (lower red) and F (upper blue) points."""
    p1, p2 = p
    q1, q2 = q
    r = -q1 * q2 / (p1 * p2)
    xe = r ** (q2 / (p2 - q2)) * eps ** (-2.0 / (p2 - q2))
    ye = r ** (p2 / (p2 - q2)) * eps ** (-2.0 / (p2 - q2))
    xf = r ** (q1 / (p1 - q1)) * eps ** (2.0 / (p1 - q1))
    return np.array([xe, ye]), np.array([xf, r * xf])


def _on_arc(std: ReactionPair, eps: float, reaction: int, side: int, pt) -> bool:
    other = [(LO, side), (HI, side)] if reaction == 2 else [(side, LO), (side, HI)]
    a, b = (corner_point(std, eps, lv) for lv in other)
    t = arc_position(std, a, b, pt)
    return 0.0 < t < 1.0


def special_points(rp: ReactionPair, eps: float) -> SpecialPoints:
    eps = check_epsilon(eps)
    label = classify_case(rp)
    if not label.mixed:
        raise WrongCase(f"special points exist only in cases V/VI, not {label.case}")
    norm = label.normalization
    std = norm.apply(rp)
    lo, hi = band_log(eps, LO), band_log(eps, HI)

    if label.subcase == "a":
        e_std, f_std = _standard_E_F(label.p, label.q, eps)
        e_curve, f_curve = (2, LO), (1, HI)
        if not _on_arc(std, eps, 2, LO, e_std):
            raise EpsilonTooLarge(f"no split point on the lower arc of reaction 2 at eps={eps}")
    elif label.subcase == "b":
        e_std, f_std = ray_point(std, 1, lo), ray_point(std, 2, hi)
        e_curve, f_curve = (1, LO), (2, HI)
        if not _on_arc(std, eps, 1, LO, e_std):
            raise EpsilonTooLarge(f"no split point on the lower arc of reaction 1 at eps={eps}")
    else:
        e_std = f_std = e_curve = f_curve = None
        for side, lv in ((LO, lo), (HI, hi)):
            pt = ray_point(std, 2, lv)
            if e_std is None and _on_arc(std, eps, 2, side, pt):
                e_std, e_curve = pt, (2, side)
            pt = ray_point(std, 1, lv)
            if f_std is None and _on_arc(std, eps, 1, side, pt):
                f_std, f_curve = pt, (1, side)
        if e_std is None and f_std is None:
            raise EpsilonTooLarge(f"no tangency point on any arc at eps={eps}")

    def back(pt, curve):
        if pt is None:
            return None, None
        j, side = curve
        i = norm.order[j - 1]
        s = -side if norm.flip[j - 1] else side
        return norm.point_to_original(pt), (i + 1, s)

    E, ec = back(e_std, e_curve)
    F, fc = back(f_std, f_curve)
    return SpecialPoints(E, F, ec, fc, label.subcase)
