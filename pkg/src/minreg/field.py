"""Planar mass-action vector field, its rate-box extremes, and its Jacobian.

For rates ``k = (k1, k2, k3, k4)`` and a point ``z = (x, y)`` the velocity is
``flux1 * v1 + flux2 * v2`` with ``flux_i = k_fwd * z**reactant - k_rev * z**product``.
Monomials are evaluated as ``exp(exponents @ log z)``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence, Union

import numpy as np

from .errors import NonPositivePoint
from .network import CORNER_LEVELS, HI, LO, ReactionPair, check_epsilon, corner_point, detailed_balance_point

# Extremal rate patterns, keyed by the corner they make attracting.
PATTERN_CORNER = {"i": "A", "ii": "B", "iii": "C", "iv": "D"}


def _positive(pts) -> np.ndarray:
    pts = np.asarray(pts, dtype=float)
    if not np.all(pts > 0):
        raise NonPositivePoint(f"field evaluated at a non-positive point: {pts}")
    return pts


def corner_rates(eps: float, levels: Union[str, tuple[int, int]]) -> np.ndarray:
    """Extremal rates whose detailed-balance point is the corner with ``levels``.

    A LO level needs ``k_fwd/k_rev = eps**2``, i.e. ``(eps, 1/eps)``; HI the reverse.
    """
    if isinstance(levels, str):
        levels = CORNER_LEVELS[levels]
    s1, s2 = levels
    return np.array([eps ** -s1, eps ** s1, eps ** -s2, eps ** s2], dtype=float)


def monomials(rp: ReactionPair, pts) -> np.ndarray:
    """The four rate monomials at ``pts`` (shape (..., 2) -> (..., 4))."""
    pts = _positive(pts)
    return np.exp(np.log(pts) @ rp.exponents.T)


def fluxes(rp: ReactionPair, k, pts) -> np.ndarray:
    m = monomials(rp, pts) * np.asarray(k, dtype=float)
    return np.stack([m[..., 0] - m[..., 1], m[..., 2] - m[..., 3]], axis=-1)


def velocity(rp: ReactionPair, k, pts) -> np.ndarray:
    """Vectorized velocity; ``k`` broadcasts against ``pts`` on leading axes."""
    return fluxes(rp, k, pts) @ rp.vectors


def gross_rate(rp: ReactionPair, k, pts) -> np.ndarray:
    """Sum of the four one-way rates, a natural scale for the field near balance."""
    return (monomials(rp, pts) * np.asarray(k, dtype=float)).sum(axis=-1)


@dataclass(frozen=True)
class FieldValue:
    velocity: np.ndarray
    flux1: float
    flux2: float


def eval_field(rp: ReactionPair, k, pt) -> FieldValue:
    f = fluxes(rp, k, pt)
    return FieldValue(f @ rp.vectors, float(f[0]), float(f[1]))


def _normal_coefficients(rp: ReactionPair, pts, normals) -> np.ndarray:
    """Coefficient of each rate in ``velocity . n``."""
    vn = np.asarray(normals, dtype=float) @ rp.vectors.T  # (..., 2)
    m = monomials(rp, pts)
    sign = np.array([1.0, -1.0, 1.0, -1.0])
    return m * sign * np.repeat(vn, 2, axis=-1)


def normal_extremes(rp: ReactionPair, eps: float, pts, normals) -> tuple[np.ndarray, np.ndarray]:
    """Vectorized min and max of ``velocity . n`` over the rate box."""
    c = _normal_coefficients(rp, pts, normals)
    lo, hi = eps, 1.0 / eps
    vmin = np.where(c > 0, lo * c, hi * c).sum(axis=-1)
    vmax = np.where(c > 0, hi * c, lo * c).sum(axis=-1)
    return vmin, vmax


def field_normal_extremes(rp: ReactionPair, eps: float, pt, n) -> tuple[float, float]:
    """Exact (min, max) of ``velocity . n`` over ``k in [eps, 1/eps]**4``.

    The product is affine in each rate with a fixed-sign coefficient, so
    each rate is pushed to the box edge that the sign of its coefficient
    selects.
    """
    vmin, vmax = normal_extremes(rp, eps, pt, n)
    return float(vmin), float(vmax)


def attracting_direction(rp: ReactionPair, eps: float, i: int, pt) -> Optional[np.ndarray]:
    """Direction reaction ``i`` pushes ``pt`` for every admissible rate.

    Returns ``+v_i`` below the band, ``-v_i`` above it and ``None`` inside
    the closed band, where the sign of the flux depends on the rates.
    """
    eps = check_epsilon(eps)
    ll = float(rp.log_levels(_positive(pt))[i - 1])
    edge = -2.0 * math.log(eps)
    v = rp.vectors[i - 1]
    if ll > edge:
        return -v
    if ll < -edge:
        return v.copy()
    return None


def coupling(rp: ReactionPair, pts) -> np.ndarray:
    """``v1 . diag(1/z) . v2``: rate of change of log L2 when moving along v1."""
    pts = _positive(pts)
    v1, v2 = rp.vectors
    return (v1 * v2 / pts).sum(axis=-1)


def coupling_sign_log(rp: ReactionPair, log_pt) -> int:
    """Sign of :func:`coupling` from log coordinates, safe for extreme points."""
    v1, v2 = rp.vectors
    a, b = v1[0] * v2[0], v1[1] * v2[1]
    lx, ly = log_pt
    if a * b >= 0:
        return int(np.sign(a + b))
    ta, tb = math.log(abs(a)) - lx, math.log(abs(b)) - ly
    if ta == tb:
        return 0
    return int(np.sign(a)) if ta > tb else int(np.sign(b))


@dataclass(frozen=True)
class CornerCone:
    levels: tuple[int, int]
    point: np.ndarray
    generators: np.ndarray  # rows: signed v1, signed v2
    tag: str  # "sink", "source" or "neutral"


def _corner_tag(rp: ReactionPair, eps: float, levels: tuple[int, int]) -> str:
    lz = np.array([-2.0 * levels[0] * math.log(eps), -2.0 * levels[1] * math.log(eps)]) @ rp._inverse.T
    s = coupling_sign_log(rp, lz)
    # generator sign is +1 on a LO curve and -1 on a HI curve
    s *= levels[0] * levels[1]
    return "sink" if s > 0 else ("source" if s < 0 else "neutral")


def corner_cone(rp: ReactionPair, eps: float, corner: Union[str, tuple[int, int]]) -> CornerCone:
    """Cone of admissible velocities at a corner and its source/sink role.

    The cone is spanned by the two attracting directions at the corner.
    Moving along one generator changes the other reaction's log-level at
    the rate ``+-coupling``; the corner is a sink when both generators move
    the levels into the central region and a source when both move them out.
    """
    eps = check_epsilon(eps)
    levels = CORNER_LEVELS[corner] if isinstance(corner, str) else tuple(corner)
    gens = np.array([-levels[0] * rp.vectors[0], -levels[1] * rp.vectors[1]], dtype=float)
    return CornerCone(levels, corner_point(rp, eps, levels), gens, _corner_tag(rp, eps, levels))


# -- Jacobian ------------------------------------------------------------------------


@dataclass(frozen=True)
class JacobianMatrix:
    matrix: np.ndarray
    trace: float
    det: float
    disc: float
    eigenvalues: tuple  # (slow, fast); complex if disc < 0
    e_slow: Optional[np.ndarray]
    e_fast: Optional[np.ndarray]

    @property
    def real(self) -> bool:
        return self.disc >= 0


def _eigvec(J: np.ndarray, lam: float) -> np.ndarray:
    a = np.array([J[0, 1], lam - J[0, 0]])
    b = np.array([lam - J[1, 1], J[1, 0]])
    v = a if np.linalg.norm(a) >= np.linalg.norm(b) else b
    nv = np.linalg.norm(v)
    if nv == 0:  # scalar matrix, every direction is an eigenvector
        return np.array([1.0, 0.0])
    return v / nv


def eigen2(J) -> JacobianMatrix:
    """Closed-form eigen-decomposition of a real 2x2 matrix."""
    J = np.asarray(J, dtype=float)
    tr = J[0, 0] + J[1, 1]
    det = J[0, 0] * J[1, 1] - J[0, 1] * J[1, 0]
    disc = (J[0, 0] - J[1, 1]) ** 2 + 4.0 * J[0, 1] * J[1, 0]
    if disc < 0:
        s = 1j * math.sqrt(-disc)
        lam = ((tr + s) / 2, (tr - s) / 2)
        return JacobianMatrix(J, tr, det, disc, lam, None, None)
    root = math.sqrt(disc)
    big = (tr + math.copysign(root, tr)) / 2 if tr != 0 else root / 2
    small = det / big if big != 0 else tr - big
    if abs(small) > abs(big):
        small, big = big, small
    return JacobianMatrix(J, tr, det, disc, (small, big), _eigvec(J, small), _eigvec(J, big))


def jacobian_matrix(rp: ReactionPair, k, pt) -> np.ndarray:
    pt = _positive(pt)
    m = monomials(rp, pt) * np.asarray(k, dtype=float)
    e = rp.exponents
    g1 = (m[0] * e[0] - m[1] * e[1]) / pt
    g2 = (m[2] * e[2] - m[3] * e[3]) / pt
    return np.outer(rp.vectors[0], g1) + np.outer(rp.vectors[1], g2)


def jacobian(rp: ReactionPair, k, pt) -> JacobianMatrix:
    return eigen2(jacobian_matrix(rp, k, pt))


def _pattern_levels(pattern) -> tuple[int, int]:
    if isinstance(pattern, str):
        return CORNER_LEVELS[PATTERN_CORNER.get(pattern, pattern)]
    return tuple(pattern)


def _normalized_disc(rp: ReactionPair, levels, eps: float) -> float:
    k = corner_rates(eps, levels)
    J = jacobian_matrix(rp, k, detailed_balance_point(rp, k))
    tr = J[0, 0] + J[1, 1]
    return ((J[0, 0] - J[1, 1]) ** 2 + 4.0 * J[0, 1] * J[1, 0]) / (tr * tr)


def equal_eigenvalue_scan(
    rp: ReactionPair,
    pattern: Union[str, Sequence[int]] = "i",
    eps_range: tuple[float, float] = (0.05, 0.95),
    n_grid: int = 10_000,
    tol: float = 1e-12,
) -> list[float]:
    """Values of eps at which the Jacobian at the pattern's corner has a double eigenvalue.

    The discriminant is scaled by ``trace**2`` and sampled on a uniform
    grid. Sign changes are bisected. At a detailed-balance point the
    Jacobian is similar to a symmetric matrix, so the discriminant cannot go
    negative and its zeros are touching zeros; those are found by refining
    grid-local minima and accepted when the scaled discriminant is below
    ``1e-9``.
    """
    from scipy.optimize import minimize_scalar

    levels = _pattern_levels(pattern)
    lo, hi = eps_range
    grid = np.linspace(lo, hi, n_grid)
    d = np.array([_normalized_disc(rp, levels, e) for e in grid])
    roots = []
    for i in range(n_grid - 1):
        if d[i] == 0:
            roots.append(float(grid[i]))
        elif d[i] * d[i + 1] < 0:
            a, b = grid[i], grid[i + 1]
            fa = d[i]
            while b - a > tol:
                m = 0.5 * (a + b)
                fm = _normalized_disc(rp, levels, m)
                if fm == 0:
                    a = b = m
                    break
                if fa * fm < 0:
                    b = m
                else:
                    a, fa = m, fm
            roots.append(float(0.5 * (a + b)))
    for i in range(1, n_grid - 1):
        if d[i] > 0 and d[i] <= d[i - 1] and d[i] <= d[i + 1]:
            res = minimize_scalar(lambda e: _normalized_disc(rp, levels, e),
                                  bounds=(grid[i - 1], grid[i + 1]), method="bounded",
                                  options={"xatol": tol})
            if res.fun < 1e-9:
                roots.append(float(res.x))
    roots.sort()
    merged: list[float] = []
    for r in roots:
        if not merged or r - merged[-1] > 10 * (hi - lo) / n_grid:
            merged.append(r)
    return merged
