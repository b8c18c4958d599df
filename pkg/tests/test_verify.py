import json
import math

import numpy as np
import pytest

from minreg.errors import TargetOutsideRegion
from minreg.verify import (
    VerificationReport,
    boundary_samples,
    check_attraction,
    check_containment,
    check_corner_convergence,
    check_eigen_approach,
    check_invariance,
    check_minimal_attraction,
    check_steer,
    random_rates,
    steer,
)

from conftest import DOUBLE_EIG, NETWORK2


def test_invariance_passes(region2):
    rep = check_invariance(region2, NETWORK2, n_samples=500)
    assert rep.passed and rep.margin >= -1e-8


def test_shrunken_region_fails_invariance(region2):
    rep = check_invariance(region2.scaled(0.99), NETWORK2, n_samples=500)
    assert not rep.passed and rep.margin < 0


def test_larger_rate_box_breaks_invariance(region2):
    rep = check_invariance(region2, NETWORK2, eps=0.4, n_samples=500)
    assert not rep.passed


def test_boundary_samples_avoid_junctions(region2):
    pts, _, tangents = boundary_samples(region2, 300)
    assert np.allclose(np.linalg.norm(tangents, axis=1), 1.0)
    corners = np.array([region2.corners[c] for c in "ABCD"])
    d = np.linalg.norm(pts[:, None] - corners[None], axis=2).min(axis=1)
    assert d.min() > 0


def test_corner_convergence():
    rep = check_corner_convergence(NETWORK2, 0.5)
    assert rep.passed and len(rep.details["runs"]) == 4


def test_eigen_approach_at_sink():
    rep = check_eigen_approach(NETWORK2, 0.5, "A", pattern="i")
    assert rep.passed
    lam = rep.details["eigenvalues"]
    assert max(lam) < 0 and rep.details["fast_opposite_signs"]


def test_eigen_equal_eigenvalue_branch():
    rep = check_eigen_approach(DOUBLE_EIG, 1 / math.sqrt(2), "A")
    assert rep.details.get("equal_eigenvalues") is True


def test_random_rates_samplers(rng):
    u = random_rates(rng, 0.5, 100)
    e = random_rates(rng, 0.5, 100, sampler="extremal")
    assert u.shape == e.shape == (100, 4)
    assert np.all((u >= 0.5) & (u <= 2.0))
    assert set(np.unique(e)) <= {0.5, 2.0}


def test_containment_small(region2):
    rep = check_containment(region2, NETWORK2, n_schedules=8, n_starts=4, T=10, seed=1)
    assert rep.passed


def test_containment_negative_control(region2):
    rep = check_containment(region2, NETWORK2, eps=0.4, n_schedules=8, n_starts=4, T=10, seed=1,
                            sampler="extremal")
    assert not rep.passed


def test_containment_is_seeded(region2):
    a = check_containment(region2, NETWORK2, eps=0.3, n_schedules=4, n_starts=4, T=5, seed=9)
    b = check_containment(region2, NETWORK2, eps=0.3, n_schedules=4, n_starts=4, T=5, seed=9)
    assert a.to_json() == b.to_json()


def test_attraction_small(region2):
    starts = np.array([[0.05, 0.05], [20.0, 20.0], [20.0, 0.05]])
    rep = check_attraction(region2, NETWORK2, starts=starts, n_schedules=4, T=100, seed=2)
    assert rep.passed


def test_steer_interior_target(region2):
    sched, traj = steer(NETWORK2, 0.5, [10.0, 10.0], [1.5, 2.0], 1e-3, region=region2)
    assert np.linalg.norm(traj.end - [1.5, 2.0]) <= 1e-3
    assert np.all((sched.rates >= 0.5) & (sched.rates <= 2.0))


def test_steer_outside_target(region2):
    with pytest.raises(TargetOutsideRegion):
        steer(NETWORK2, 0.5, [1.0, 1.0], [10.0, 10.0], 1e-3, region=region2)


def test_check_steer_small(region2):
    assert check_steer(region2, NETWORK2, n_targets=2, seed=4).passed


def test_minimal_attraction_small(region2):
    rep = check_minimal_attraction(region2, NETWORK2, probes=[(1.0, 1.0)], rounds=2)
    assert rep.passed


def test_report_json_schema():
    rep = VerificationReport("x", True, np.float64(0.5), [np.float64(1.0), 2.0], 3, {"a": np.int64(1)})
    doc = json.loads(json.dumps(rep.to_json()))
    assert set(doc) == {"check", "pass", "margin", "worst_sample", "seed", "config"}
    assert doc["pass"] is True and doc["config"] == {"a": 1}
    assert rep.line().startswith("PASS x")
