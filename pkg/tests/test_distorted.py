import math

import numpy as np
import pytest

from sigmageom.core import WorldFunction, distortion_map
from sigmageom.distorted import (
    consistent_cosh, mass_shift, mass_unshift, next_link_solutions, predicted_cosh,
    segment_radius_closed, segment_radius_closed_sq, segment_radius_numeric,
    simulate_worldline, solve_joint, wobble_statistics,
)
from sigmageom.errors import BelowThreshold, BranchDomainError, SolverFailure

D, S0 = 0.005, 0.0005
GD = WorldFunction.distorted(D, S0)


def test_mass_shift_examples():
    assert mass_shift(1.0, 0.1, 0.01) == pytest.approx(math.sqrt(1.2))
    assert mass_shift(1.3, 0.0, 0.01) == 1.3
    with pytest.raises(BelowThreshold):
        mass_shift(math.sqrt(0.02), 0.1, 0.01)
    assert mass_unshift(mass_shift(1.7, 0.1, 0.01), 0.1, 0.01) == pytest.approx(1.7)


def test_closed_radius_values():
    d, s0 = 0.01, 0.001
    assert segment_radius_closed(d, s0, 1.0, 0.5) == pytest.approx(math.sqrt(1.5 * d))
    assert segment_radius_closed(d, s0, 1.0, 0.0) == 0.0
    taus = np.linspace(0, 1, 41)
    r2 = segment_radius_closed_sq(d, s0, 1.0, taus)
    np.testing.assert_allclose(r2, r2[::-1], rtol=1e-12, atol=1e-15)


def test_closed_radius_branch_domain():
    with pytest.raises(BranchDomainError):
        segment_radius_closed(0.01, 0.001, 0.25, 0.5)


def test_numeric_radius_matches_closed_form():
    g = WorldFunction.distorted(0.01, 0.001)
    for tau in (0.05, 0.2, 0.5, 0.7, 0.9):
        num = segment_radius_numeric(g, 1.0, tau)
        assert num == pytest.approx(segment_radius_closed(0.01, 0.001, 1.0, tau), rel=1e-9)


def test_numeric_radius_vanishes_without_distortion():
    g = WorldFunction.distorted(0.0, 0.001)
    assert segment_radius_numeric(g, 1.0, 0.5) <= 1e-9


def test_numeric_radius_profile_rises_and_falls():
    g = WorldFunction.distorted(0.01, 0.001)
    r = [segment_radius_numeric(g, 1.0, t) for t in (0.02, 0.1, 0.5, 0.9, 0.98)]
    assert r[0] < r[1] < r[2] and r[2] > r[3] > r[4]


def test_joint_cone_value():
    for mu in (1.0, 2.0, 4.0):
        sol = solve_joint(GD, math.sqrt(mu * mu - 2 * D), mu)
        mu_m = math.sqrt(mu * mu - 2 * D)
        assert sol.alpha / mu_m == pytest.approx(consistent_cosh(mu, D), rel=1e-12)


def test_next_link_without_distortion_is_straight():
    g = WorldFunction.minkowski()
    sols, failed = next_link_solutions(g, [0, 0, 0, 0], [1, 0, 0, 0], 1.0, count=6)
    assert failed == 0
    np.testing.assert_allclose(sols, np.tile([2.0, 0, 0, 0], (6, 1)), atol=1e-9)


def test_next_link_solutions_fill_a_cone():
    mu_m = math.sqrt(1 - 2 * D)
    sols, _ = next_link_solutions(GD, [0, 0, 0, 0], [mu_m, 0, 0, 0], 1.0, count=32)
    radial = np.linalg.norm(sols[:, 1:], axis=1)
    assert np.ptp(radial) <= 1e-12
    assert np.linalg.norm(sols[:, 1:].mean(axis=0)) <= 0.05 * radial[0]
    for p in sols:
        assert 2 * GD([mu_m, 0, 0, 0], p) == pytest.approx(1.0, abs=1e-12)


def test_simulation_invariants():
    tube = simulate_worldline(GD, 3, 500, 1.0)
    assert np.all(np.abs(tube.residual_length) <= 1e-9)
    assert np.all(np.abs(tube.residual_parallel) <= 1e-9)
    assert np.ptp(tube.theta_dM) <= 1e-6
    assert np.all(tube.theta_dM >= 0)


def test_simulation_is_deterministic():
    a = simulate_worldline(GD, 11, 200, 1.0)
    b = simulate_worldline(GD, 11, 200, 1.0)
    assert a.chain.tobytes() == b.chain.tobytes()
    c = simulate_worldline(GD, 12, 200, 1.0)
    assert a.chain.tobytes() != c.chain.tobytes()


def test_straight_chain_without_distortion():
    tube = simulate_worldline(WorldFunction.distorted(0.0, S0), 0, 50, 1.0)
    assert np.all(tube.theta_dM == 0)
    np.testing.assert_allclose(tube.chain[:, 1:], 0, atol=1e-12)
    st = wobble_statistics(tube)
    assert st.theta_rms == 0 and st.displacement == 0


def test_unused_branch_does_not_matter():
    # replace the map below 1/2 mu_d^2 - (sigma0 + d) with something else
    mu = 1.0
    cut = 0.5 * mu * mu - (S0 + D)

    def other(s):
        s = np.asarray(s, dtype=float)
        out = np.where(s < cut, 7.0 * s - 3.0, distortion_map(s, D, S0))
        return out if out.ndim else float(out)

    g2 = WorldFunction.distorted(D, S0, distortion=other)
    a = simulate_worldline(GD, 5, 300, mu)
    b = simulate_worldline(g2, 5, 300, mu)
    assert a.chain.tobytes() == b.chain.tobytes()
    assert a.local.tobytes() == b.local.tobytes()


def test_mass_monotonicity():
    thetas = [wobble_statistics(simulate_worldline(GD, 0, 10, mu)).theta_mean
              for mu in (1.0, 2.0, 4.0)]
    assert thetas[0] > thetas[1] > thetas[2]


def test_wobble_statistics_fields():
    st = wobble_statistics(simulate_worldline(GD, 1, 400, 1.0))
    assert st.mean_cosh == pytest.approx(consistent_cosh(1.0, D), abs=1e-12)
    assert st.predicted_cosh == pytest.approx(predicted_cosh(1.0, D))
    assert st.predicted_theta == pytest.approx(0.1)
    # independent isotropic kicks: summed length ~ kick * sqrt(N)
    assert 0.2 < st.displacement / st.expected_displacement < 3.0


def test_kick_walk_is_diffusive():
    ratios = []
    for seed in range(40):
        st = wobble_statistics(simulate_worldline(GD, seed, 400, 1.0))
        ratios.append((st.displacement / st.expected_displacement) ** 2)
    assert np.mean(ratios) == pytest.approx(1.0, abs=0.3)


def test_solver_failure_keeps_partial_chain():
    g = WorldFunction.distorted(0.0, S0, distortion=lambda s: np.minimum(s, 0.6))
    with pytest.raises(SolverFailure) as info:
        simulate_worldline(g, 0, 10, 1.0)
    assert info.value.partial.n_links == 1


def test_chain_csv(tmp_path):
    tube = simulate_worldline(GD, 2, 5, 1.0)
    tube.to_csv(tmp_path / "c.csv")
    lines = (tmp_path / "c.csv").read_text().splitlines()
    assert lines[0] == "link_index,t,x,y,z,theta_dM,residual_parallel,residual_length"
    assert len(lines) == 6
