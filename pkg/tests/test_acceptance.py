"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line."""
import math
import subprocess
import sys
import time

import numpy as np
import pytest

from sigmageom.core import Skeleton, WorldFunction, gram_determinant
from sigmageom.distorted import (
    mass_shift, predicted_cosh, sampled_segment_radius, segment_radius_closed,
    segment_radius_numeric, simulate_worldline, wobble_statistics,
)
from sigmageom.envelopes import tube_coincidence_check
from sigmageom.errors import NotMetricCandidate
from sigmageom.predicates import DirectionGrid, check_metric_axioms, degeneracy_classify
from sigmageom.verify import verify_euclidean


@pytest.fixture
def report(capsys):
    def emit(num, ok, detail):
        with capsys.disabled():
            print(f"\nacceptance {num:>2}: {'PASS' if ok else 'FAIL'}  {detail}")
        return ok
    return emit


def test_criterion_01_euclidean_theorem_suite(report):
    start = time.perf_counter()
    worst, passed = 0.0, True
    for n in (1, 2, 3):
        rep = verify_euclidean(WorldFunction.euclidean(n), n, n_samples=200, box=(-10, 10), seed=n)
        passed &= rep.overall
        worst = max(worst, max(c.max_residual for c in rep.conditions.values()))
    elapsed = time.perf_counter() - start
    ok = passed and worst <= 1e-9 and elapsed < 10
    report(1, ok, f"n=1,2,3 all conditions pass={passed}, max residual {worst:.3g}, {elapsed:.2f}s")
    assert ok


def test_criterion_02_dimension_detection(report):
    start = time.perf_counter()
    g = WorldFunction.euclidean(3)
    rng = np.random.default_rng(2)
    f4, f3 = [], []
    for _ in range(20):
        pts = rng.uniform(-1, 1, size=(5, 3))
        f4.append(abs(gram_determinant(g, Skeleton(pts))))
        f3.append(abs(gram_determinant(g, Skeleton(pts[:4]))))
    elapsed = time.perf_counter() - start
    ok = max(f4) <= 1e-8 and np.median(f3) >= 1e-3 and elapsed < 5
    report(2, ok, f"max |F4| {max(f4):.3g}, median |F3| {np.median(f3):.3g}, {elapsed:.2f}s")
    assert ok


def test_criterion_03_discrimination(report):
    mk = verify_euclidean(WorldFunction.minkowski(), 4)
    sig = mk.conditions["IV"].detail["signature"]
    eig = mk.conditions["IV"].detail["eigenvalues"]
    ds = verify_euclidean(WorldFunction.distorted(0.01, 0.001), 4)
    wit = ds.conditions["III"].max_residual
    ok = (mk.failed() == ["IV"] and sig["negative"] == 3 and sig["positive"] == 1
          and not ds.conditions["III"].passed and wit >= 1e-3)
    report(3, ok, f"Minkowski fails {mk.failed()} (eigenvalue signs {sig}, min {min(eig):.3g}); "
                  f"distorted fails III with witness residual {wit:.3g}")
    assert ok


def test_criterion_04_segment_radius(report):
    start = time.perf_counter()
    d, s0 = 0.01, 0.001
    g = WorldFunction.distorted(d, s0)
    target = math.sqrt(1.5 * d)
    taus = np.array([0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8])
    sampled = sampled_segment_radius(g, 1.0, taus, grid=128)
    numeric = np.array([segment_radius_numeric(g, 1.0, t) for t in taus])
    closed = segment_radius_closed(d, s0, 1.0, taus)
    elapsed = time.perf_counter() - start
    mid = sampled[3]
    sym = np.max(np.abs(sampled - sampled[::-1]) / sampled)
    gap = np.max(np.abs(numeric - closed) / closed)
    ok = (abs(mid - target) <= 0.05 * target and sym <= 0.05 and gap <= 0.05
          and abs(numeric[3] - target) <= 0.05 * target and elapsed < 60)
    report(4, ok, f"grid-128 r(0.5) {mid:.5f} vs {target:.5f}, symmetry gap {sym:.3g}, "
                  f"closed-vs-numeric gap {gap:.3g}, {elapsed:.1f}s")
    assert ok


def test_criterion_05_mass_shift(report):
    d, s0 = 0.1, 0.01
    g = WorldFunction.distorted(d, s0)
    rng = np.random.default_rng(5)
    worst, count = 0.0, 0
    while count < 100:
        p, q = rng.uniform(-3, 3, size=(2, 4))
        mu_m2 = 2 * g.minkowski_sigma(p, q)
        if mu_m2 <= 2 * s0:
            continue
        mu_d2 = 2 * g(p, q)
        worst = max(worst, abs(mu_d2 - mu_m2 - 2 * d),
                    abs(mass_shift(math.sqrt(mu_m2), d, s0) ** 2 - mu_m2 - 2 * d))
        count += 1
    ok = worst <= 1e-12
    report(5, ok, f"100 timelike vectors, max |mu_d^2 - mu_M^2 - 2d| = {worst:.3g}")
    assert ok


def test_criterion_06_wobble_angle(report):
    start = time.perf_counter()
    d, s0, mu = 0.005, 0.0005, 1.0
    tube = simulate_worldline(WorldFunction.distorted(d, s0), 6, 10_000, mu)
    st = wobble_statistics(tube)
    elapsed = time.perf_counter() - start
    want = predicted_cosh(mu, d)
    ok_cosh = st.max_cosh_deviation <= 1e-6
    ok_theta = abs(st.theta_rms - math.sqrt(2 * d) / mu) <= 0.01 * math.sqrt(2 * d) / mu
    ok = ok_cosh and ok_theta and elapsed < 120
    report(6, ok, f"cosh per link {st.mean_cosh:.9f} vs {want:.9f} (max dev "
                  f"{st.max_cosh_deviation:.3g}); theta {st.theta_rms:.5f} vs "
                  f"{math.sqrt(2 * d) / mu:.5f}; {elapsed:.1f}s")
    assert ok


def test_criterion_07_mass_dependence(report):
    d, s0 = 0.005, 0.0005
    g = WorldFunction.distorted(d, s0)
    th = {mu: wobble_statistics(simulate_worldline(g, 7, 50, mu)).theta_rms for mu in (1.0, 2.0)}
    ratio = th[2.0] / th[1.0]
    ok = abs(ratio - 0.5) <= 0.02 * 0.5
    report(7, ok, f"theta(2)/theta(1) = {ratio:.5f}")
    assert ok


def test_criterion_08_degeneracy(report):
    grid = DirectionGrid()
    e3 = WorldFunction.euclidean(3)
    rng = np.random.default_rng(8)
    p0 = rng.uniform(-2, 2, size=3)
    euclid_ok = 0
    for _ in range(20):
        q0 = rng.uniform(-2, 2, size=3)
        q = q0 + rng.normal(size=3)
        v = degeneracy_classify(e3, p0, q0, q, rng.uniform(0.5, 3), grid)
        euclid_ok += v.solution_count == 1 and v.verdict == "degenerate"
    m4 = WorldFunction.minkowski()
    o = np.zeros(4)
    t = degeneracy_classify(m4, o, [0.5, 0, 0, 0], [1.7, 0.3, -0.2, 0.1], 2.0, grid)
    s = degeneracy_classify(m4, o, o, [0.2, 1, 0.3, 0], 1.0, grid)
    ok = (euclid_ok == 20 and t.verdict == "degenerate"
          and s.verdict == "nondegenerate" and s.solution_count >= 2)
    report(8, ok, f"Euclidean {euclid_ok}/20 degenerate; Minkowski timelike {t.verdict} "
                  f"(count {t.solution_count}); spacelike {s.verdict} (count {s.solution_count}, "
                  f"resolution {grid.resolution})")
    assert ok


def test_criterion_09_tube_coincidence(report):
    eu = tube_coincidence_check(WorldFunction.euclidean(3), [1.0, 0.5, 0.2],
                                Skeleton.axes(np.zeros(3)), grid=16)
    d = 0.04
    g = WorldFunction.distorted(d, 0.001, dim=2)
    ds = tube_coincidence_check(g, [1.0, 0.0], Skeleton.axes(np.zeros(2)),
                                box=[[-0.2, 1.5], [-0.8, 0.8]], grid=64)
    ext = ds.tube_transverse_extent
    cross = max(eu.tube_residual_on_coordinate_tube, eu.coordinate_residual_on_tube)
    ok = (eu.coincide and cross <= 1e-6 and not ds.coincide
          and 0.5 * math.sqrt(d) <= ext <= 3 * math.sqrt(d))
    report(9, ok, f"Euclidean coincide={eu.coincide} (cross residual {cross:.3g}); distorted "
                  f"coincide={ds.coincide}, tube extent {ext:.4f} in "
                  f"[{0.5 * math.sqrt(d):.2f}, {3 * math.sqrt(d):.2f}]")
    assert ok


def test_criterion_10_metric_axioms(report):
    pts = np.random.default_rng(10).uniform(-5, 5, size=(40, 2))
    eu = check_metric_axioms(WorldFunction.euclidean(2), pts)
    quartic = WorldFunction.custom(lambda p, q: 0.5 * np.sum((p - q) ** 2, axis=-1) ** 2, 1,
                                   name="quartic")
    qr = check_metric_axioms(quartic, np.array([[0.0], [1.0], [2.0]]))
    tri = [w for w in qr.violation_witnesses if w[0] == "triangle"]
    try:
        check_metric_axioms(WorldFunction.minkowski(),
                            np.array([[0, 0, 0, 0], [0, 1, 0, 0], [1, 0, 0, 0.0]]))
        flagged = False
    except NotMetricCandidate:
        flagged = True
    ok = eu.all_ok and not qr.triangle_ok and bool(tri) and flagged
    report(10, ok, f"Euclidean all axioms {eu.all_ok}; quartic triangle witness {tri[:1]}; "
                   f"Minkowski NotMetricCandidate {flagged}")
    assert ok


def test_criterion_11_determinism(report, tmp_path):
    outs = []
    for run in ("a", "b"):
        dest = tmp_path / run
        proc = subprocess.run([sys.executable, "-m", "sigmageom", "simulate-worldline",
                               "--seed", "11", "--links", "2000", "--out", str(dest)],
                              capture_output=True, text=True)
        assert proc.returncode == 0, proc.stderr
        outs.append(((dest / "chain.csv").read_bytes(), (dest / "stats.json").read_bytes()))
    ok = outs[0] == outs[1]
    report(11, ok, f"two runs with seed 11: chain.csv and stats.json byte-identical={ok}")
    assert ok
