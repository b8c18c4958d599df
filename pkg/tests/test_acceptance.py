"""Acceptance criteria 1-10 at their stated tolerances.

Each test records one PASS/FAIL line; the lines are repeated together in
the terminal summary. Runtime budgets are checked as part of each line.
"""
import math
import time

import numpy as np
import pytest

from minreg import cli
from minreg.field import corner_rates, eigen2, equal_eigenvalue_scan, jacobian_matrix
from minreg.geometry import INSIDE, is_simple
from minreg.integrator import IntegratorConfig, integrate
from minreg.network import (
    CORNER_LEVELS,
    band_log,
    classify_case,
    corner_points,
    detailed_balance_point,
    special_points,
    tangent_slope,
)
from minreg.region import build_region, contains
from minreg.verify import (
    check_attraction,
    check_containment,
    check_eigen_approach,
    check_invariance,
    check_minimal_attraction,
    check_steer,
)

from conftest import CASE_V, DOUBLE_EIG, NETWORK2, record
from oracles import brute_balance_point, brute_corner, brute_tangency, corner_slopes

EXPECTED_CORNERS = {"A": (0.629961, 1.587401), "B": (4.0, 4.0), "C": (1.587401, 0.629961), "D": (0.25, 0.25)}


def _rel(a, b):
    a, b = np.asarray(a, dtype=float), np.asarray(b, dtype=float)
    return float(np.max(np.abs(a - b) / np.maximum(np.abs(b), 1e-300)))


def test_criterion_1_corner_attractors():
    eps, worst, slowest = 0.5, 0.0, 0.0
    for corner, expected in EXPECTED_CORNERS.items():
        oracle = brute_corner(NETWORK2, eps, CORNER_LEVELS[corner])
        assert oracle == pytest.approx(expected, abs=1e-6)
        t0 = time.perf_counter()
        tr = integrate(NETWORK2, corner_rates(eps, corner), [1.0, 1.0], IntegratorConfig(t_max=200, tol_conv=1e-10))
        slowest = max(slowest, time.perf_counter() - t0)
        worst = max(worst, float(np.linalg.norm(tr.end - oracle)))
    ok = worst < 1e-6 and slowest < 1.0
    assert record(1, ok, f"max distance to corner {worst:.2e} (< 1e-6), slowest trajectory {slowest:.2f} s (< 1 s)")


def test_criterion_2_closed_forms():
    worst = {}
    rng = np.random.default_rng(2)
    # corners and balance points against bisection oracles
    errs = []
    for rp in (NETWORK2, CASE_V):
        for eps in (0.5, 0.1, 0.05):
            cs = corner_points(rp, eps)
            errs += [_rel(cs[c], brute_corner(rp, eps, lv)) for c, lv in CORNER_LEVELS.items()]
        for k in rng.uniform(0.1, 10, size=(20, 4)):
            errs.append(_rel(detailed_balance_point(rp, k), brute_balance_point(rp, k)))
    worst["corners/balance"] = max(errs)
    # all eight corner slope closed forms
    label = classify_case(CASE_V)
    std = label.normalization.apply(CASE_V)
    errs = []
    for eps in (0.1, 0.05):
        cs = corner_points(std, eps)
        for c, (m1, m2) in corner_slopes(label.p, label.q, eps).items():
            errs += [_rel(tangent_slope(std, 1, cs[c]), m1), _rel(tangent_slope(std, 2, cs[c]), m2)]
    worst["slopes"] = max(errs)
    # E and F on the mixed-slope fixture
    errs = []
    for eps in (0.1, 0.05):
        sp = special_points(CASE_V, eps)
        errs += [_rel(sp.E, brute_tangency(CASE_V, eps, 2, -1, 1)), _rel(sp.F, brute_tangency(CASE_V, eps, 1, +1, 2))]
    e01 = special_points(CASE_V, 0.1).E
    worst["E/F"] = max(errs)
    ok = max(worst.values()) < 1e-9 and e01 == pytest.approx([0.141421, 0.070711], abs=1e-6)
    detail = ", ".join(f"{k} {v:.1e}" for k, v in worst.items())
    assert record(2, ok, f"max relative error {detail} (< 1e-9); E(0.1) = ({e01[0]:.6f}, {e01[1]:.6f})")


def test_criterion_3_invariance(region2):
    t0 = time.perf_counter()
    rep = check_invariance(region2, NETWORK2, n_samples=2000)
    shrunk = check_invariance(region2.scaled(0.99), NETWORK2, n_samples=2000)
    dt = time.perf_counter() - t0
    ok = rep.passed and rep.margin >= -1e-8 and not shrunk.passed and dt < 10
    assert record(3, ok, f"margin {rep.margin:.2e} (>= -1e-8, scaled); 1% shrink "
                         f"{'FAILS' if not shrunk.passed else 'passes'} with margin {shrunk.margin:.2e}; {dt:.1f} s")


def test_criterion_4_containment(region2):
    t0 = time.perf_counter()
    rep = check_containment(region2, NETWORK2, n_schedules=200, n_starts=20, T=50, seed=42, dilation=1e-6)
    dt = time.perf_counter() - t0
    ok = rep.passed and dt < 60
    assert record(4, ok, f"{rep.details['escaped_lanes']} of {rep.details['lanes']} lanes left the "
                         f"1e-6-dilated region; {dt:.1f} s (< 60 s)")


def test_criterion_5_attraction(region2):
    t0 = time.perf_counter()
    rep = check_attraction(region2, NETWORK2, n_schedules=50, T=100, tol=1e-3, seed=42)
    dt = time.perf_counter() - t0
    d = rep.details
    ok = rep.passed and dt < 120
    assert record(5, ok, f"{d['lanes']} lanes: max final distance {d['max_final_distance']:.1e} (< 1e-3), "
                         f"{d['never_entered']} never entered, {d['left_after_entry']} left after entry; {dt:.1f} s")


def test_criterion_6_reachability(region2):
    t0 = time.perf_counter()
    st = check_steer(region2, NETWORK2, n_targets=10, start=(10, 10), xi=1e-3, seed=42)
    da = next(s for s in region2.sides if s.name == "D→A")
    mid = region2.boundary[(da.first + da.last) // 2]
    probes = [(1.0, 1.0), (2.0, 1.5), tuple(mid)]
    ma = check_minimal_attraction(region2, NETWORK2, probes=probes, rounds=5, xi0=1e-2, seed=42)
    dt = time.perf_counter() - t0
    worst = max(t["distance"] for t in st.details["targets"])
    ok = st.passed and ma.passed and dt < 60 and len(ma.details["visits"]) == 15
    assert record(6, ok, f"steer: 10 targets, worst distance {worst:.1e} (<= 1e-3); minimal attraction: "
                         f"{len(ma.details['visits'])} visits over 3 probes x 5 rounds "
                         f"{'complete' if ma.passed else 'incomplete'}; {dt:.1f} s (< 60 s)")


def test_criterion_7_eigen_directions():
    rep = check_eigen_approach(NETWORK2, 0.5, "A", pattern="i", max_angle=2.0)
    toy = eigen2(jacobian_matrix(NETWORK2, np.ones(4), [1.0, 1.0]))
    toy_ok = tuple(toy.eigenvalues) == (-1.0, -9.0) and np.array_equal(toy.matrix, [[-5, 4], [4, -5]])
    stable = True
    for rp in (NETWORK2, DOUBLE_EIG):
        for pattern in ("i", "ii", "iii", "iv"):
            a = equal_eigenvalue_scan(rp, pattern, n_grid=1000)
            b = equal_eigenvalue_scan(rp, pattern, n_grid=10_000)
            stable &= len(a) == len(b) and np.allclose(a, b, atol=1e-7)
    roots = equal_eigenvalue_scan(DOUBLE_EIG, "i")
    ok = rep.passed and toy_ok and stable and len(roots) == 1
    ang = max(rep.details["approach_angles_deg"])
    lam = rep.details["eigenvalues"]
    assert record(7, ok, f"corner A eigenvalues ({lam[0]:.3f}, {lam[1]:.3f}), fast vector opposite signs "
                         f"{rep.details['fast_opposite_signs']}, approach angle {ang:.4f} deg (<= 2); toy Jacobian "
                         f"eigenvalues ({toy.eigenvalues[0]:g}, {toy.eigenvalues[1]:g}); scan stable under 10x refinement {stable} "
                         f"(double root at {roots[0]:.9f})")


def test_criterion_8_mixed_case():
    eps = 0.05
    t0 = time.perf_counter()
    region = build_region(CASE_V, eps)
    build_s = time.perf_counter() - t0
    ring = region.boundary
    simple = bool(np.array_equal(ring[0], ring[-1]) and is_simple(ring))
    e_on = contains(region, region.special["E"]) == "boundary"
    m_on = contains(region, region.special["M"]) == "boundary"
    levels = CASE_V.log_levels(region.special["M"])
    edge = band_log(eps, 1)
    m_out = bool(np.any(np.abs(levels) > edge))
    inv = check_invariance(region, CASE_V, n_samples=2000)
    con = check_containment(region, CASE_V, n_schedules=200, n_starts=20, T=50, seed=42, dilation=1e-6)
    ok = simple and e_on and m_on and m_out and inv.passed and con.passed
    assert record(8, ok, f"eps 0.05: closed simple boundary {simple}, E and M on boundary {e_on and m_on}, "
                         f"M log-levels ({levels[0]:.3f}, {levels[1]:.3f}) vs band +-{edge:.3f}; invariance "
                         f"margin {inv.margin:.1e}; containment {con.details['escaped_lanes']} of "
                         f"{con.details['lanes']} escaped; build {build_s:.1f} s")


def test_criterion_9_nesting():
    t0 = time.perf_counter()
    regions = {e: build_region(NETWORK2, e) for e in (0.6, 0.5, 0.4)}
    ok, gaps = True, []
    for big_eps, small_eps in ((0.5, 0.6), (0.4, 0.5)):
        inner = regions[small_eps].boundary
        outer = regions[big_eps].index
        inside = outer.classify(inner, 1e-9) == INSIDE
        ok &= bool(inside.all())
        gaps.append(float(outer.distance(inner).min()))
    dt = time.perf_counter() - t0
    ok &= dt < 30
    assert record(9, ok, f"M(0.6) in M(0.5) in M(0.4) strictly: min vertex clearance {gaps[0]:.3f}, {gaps[1]:.3f} "
                         f"(> 1e-9); {dt:.1f} s (< 30 s)")


def test_criterion_10_determinism(tmp_path, capsys):
    import json

    net = tmp_path / "network2.json"
    net.write_text(json.dumps({"reactions": NETWORK2.to_json(), "epsilon": 0.5}))
    outs = []
    for run in ("a", "b"):
        d = tmp_path / run
        assert cli.main(["build", str(net), "--out", str(d)]) == 0
        assert cli.main(["verify", str(d / "network2.json"), "--suite", "all", "--samples", "10", "--seed", "42",
                         "--out", str(d)]) == 0
        outs.append({p.name: p.read_bytes() for p in sorted(d.iterdir())})
    capsys.readouterr()
    same = outs[0] == outs[1]
    names = sorted(outs[0])
    assert record(10, same, f"two runs of build + verify (seed 42) byte-identical across {names}")
