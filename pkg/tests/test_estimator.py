import math

import numpy as np
import pytest

from conftest import instance_states, pair, random_valid_instance
from rangeconsensus.errors import (
    AmbiguousSign, AmbiguousSpectrum, DegenerateRadius, IndexClash, NoPeak, NoWindow,
)
from rangeconsensus.estimator import (
    admissible_indices, choose_window, estimate_neighbor, forward_riuw, frame_link,
    identify_k2, norm_only_estimate, recover_state, resolve_omega_sign, solve_riuw,
    speed_norm_fallback, speed_norm_from_R,
)
from rangeconsensus.kinematics import (
    AgentState, Vec2, Window, analysis_frame, distance_trace,
)
from rangeconsensus.scenario import preset
from rangeconsensus.spectral import pair_model, spectrum_of_squared_trace

TWO_PI = 2 * math.pi


def spectrum(a, b, k1, k2, M=8192, n_max=60):
    w = Window(TWO_PI, M, (k1, k2))
    return spectrum_of_squared_trace(distance_trace(a, b, w), w, n_max), w


def test_pair_model_matches_spectrum(rng):
    for _ in range(10):
        inst = random_valid_instance(rng)
        a, b = instance_states(inst)
        s, w = spectrum(a, b, inst["k1"], inst["k2"])
        blk = forward_riuw(inst["d"], *inst["v"], inst["r1"], inst["r2"],
                           inst["phi1"], inst["phi2"], w.T)
        idx = admissible_indices(s.n_max, inst["k1"], inst["k2"])
        model = pair_model(idx, blk.R, blk.I, blk.U, blk.W, inst["k1"], inst["k2"])
        np.testing.assert_allclose(s.coefficients[idx], model, atol=1e-8)


def test_solve_stationary_pair_is_zero():
    a, b = pair(30.0)
    s, _ = spectrum(a, b, 5, -3)
    blk = solve_riuw(s, 5, -3)
    for x in (blk.R, blk.I, blk.U, blk.W):
        assert abs(x) <= 1e-9


def test_solve_matches_forward_constants():
    d, v, r1, r2, p1, p2 = 45.0, (1.2, -0.7), 2.5, 3.5, 0.3, -1.1
    a, b = pair(d, v, r1, r2, 5, -3, p1, p2)
    s, w = spectrum(a, b, 5, -3)
    got = solve_riuw(s, 5, -3)
    want = forward_riuw(d, *v, r1, r2, p1, p2, w.T)
    for g, e in zip((got.R, got.I, got.U, got.W), (want.R, want.I, want.U, want.W)):
        assert abs(g - e) <= 1e-6 * abs(e)
    assert abs(got.R.imag) <= 1e-6 * (1 + abs(got.R) + abs(got.I))


def test_solve_rejects_peak_index():
    a, b = pair(30.0)
    s, _ = spectrum(a, b, 5, -3)
    with pytest.raises(IndexClash):
        solve_riuw(s, 5, -3, [1, 2, 4, 5, 6])


@pytest.mark.parametrize("phi1", [0.0, math.pi / 4])
def test_recover_stationary(phi1):
    a, b = pair(30.0, r1=2.0, r2=3.0, w1=5.0, w2=-3.0, phi1=phi1)
    s, w = spectrum(a, b, 5, -3)
    blk = solve_riuw(s, 5, -3)
    est = recover_state(s, blk, 5, -3, 2.0, w.T)
    assert est.d_hat == pytest.approx(30.0, abs=1e-3)
    assert est.phi1_hat == pytest.approx(phi1, abs=1e-3)
    assert abs(est.v_hat.x) <= 1e-3 and abs(est.v_hat.y) <= 1e-3


def test_recover_requires_radius():
    a, b = pair(30.0)
    s, w = spectrum(a, b, 5, -3)
    with pytest.raises(DegenerateRadius):
        recover_state(s, solve_riuw(s, 5, -3), 5, -3, 0.0, w.T)


def test_recover_moving_pair_and_norm_consistency():
    d, v = 50.0, (2.0, -1.5)
    a, b = pair(d, v, 2.0, 3.0, 5, -3, 0.7, 2.0)
    s, w = spectrum(a, b, 5, -3)
    idx = admissible_indices(s.n_max, 5, -3)
    blk = solve_riuw(s, 5, -3, idx)
    est = recover_state(s, blk, 5, -3, 2.0, w.T, idx)
    assert est.d_hat == pytest.approx(d, rel=1e-6)
    assert est.phi1_hat == pytest.approx(0.7, abs=1e-6)
    assert tuple(est.v_hat) == pytest.approx(v, rel=1e-6)
    assert speed_norm_from_R(blk.R, w.T) == pytest.approx(est.v_hat.norm(), rel=1e-6)
    assert est.speed_norm == pytest.approx(est.v_hat.norm(), rel=1e-9)
    assert est.residual >= 0


def test_first_window_of_formation_preset():
    sc = preset("preset:formation")
    a, b = sc.agents[0], sc.agents[1]
    w = Window(sc.gains.T, 8192, sc.harmonics)
    est = estimate_neighbor(distance_trace(a, b, w), w, sc.harmonics[0], a.radius)
    assert est.speed_norm == pytest.approx(math.hypot(7, 5), rel=1e-2)
    link = frame_link(a.phase, est.phi1_hat)
    assert tuple(link.vector(est.v_hat)) == pytest.approx((7, -5), rel=1e-6)


def test_identify_stationary_pair():
    a, b = pair(30.0)
    s, _ = spectrum(a, b, 5, -3)
    k2, signs = identify_k2(s, 5)
    assert k2 == 3
    assert set(signs) == {1, -1}


def test_identify_non_rotating_neighbor():
    a, b = pair(30.0, (0.5, 0.2), r2=0.0)
    s, _ = spectrum(a, b, 5, -3)
    with pytest.raises(NoPeak):
        identify_k2(s, 5)


def test_identify_equal_omega():
    a, b = pair(30.0, (0.3, 0.1), w1=5.0, w2=5.0, phi2=1.0)
    w = Window(TWO_PI, 8192, (5,))
    s = spectrum_of_squared_trace(distance_trace(a, b, w), w, 60)
    with pytest.raises(AmbiguousSpectrum):
        identify_k2(s, 5, r1=2.0)
    with pytest.raises((AmbiguousSpectrum, NoPeak)):
        estimate_neighbor(distance_trace(a, b, w), w, 5, 2.0)


def test_identify_counter_rotating_twin():
    a, b = pair(30.0, (0.3, 0.1), w1=5.0, w2=-5.0, phi2=1.0)
    w = Window(TWO_PI, 8192, (5, -5))
    s = spectrum_of_squared_trace(distance_trace(a, b, w), w, 60)
    with pytest.raises(AmbiguousSpectrum):
        identify_k2(s, 5, r1=2.0)


@pytest.mark.parametrize("w2", [-3.0, 3.0])
def test_resolve_sign(w2):
    a, b = pair(40.0, (0.8, -0.6), 2.0, 3.0, 5.0, w2, 0.5, -0.4)
    s, w = spectrum(a, b, 5, int(w2))
    assert resolve_omega_sign(s, 5, 3) == pytest.approx(w2)


def test_resolve_sign_degenerate():
    a, b = pair(30.0, (0.0, 0.0), r2=0.0)
    s, _ = spectrum(a, b, 5, -3)
    with pytest.raises(AmbiguousSign):
        resolve_omega_sign(s, 5, 3)


def test_speed_norm_from_R():
    assert speed_norm_from_R(0, TWO_PI) == 0
    assert speed_norm_from_R(8, TWO_PI) == pytest.approx(2.0)
    assert speed_norm_from_R(-1e-9, TWO_PI) == 0


def test_speed_norm_fallback_with_zero_own_radius():
    a, b = pair(40.0, (1.0, 2.0), r1=0.0)
    w = Window(TWO_PI, 8192, (5, -3))
    speed = speed_norm_fallback(distance_trace(a, b, w), w, 5)
    assert speed == pytest.approx(math.sqrt(5), rel=1e-6)


def test_choose_window_commensurate():
    w = choose_window(5, 3, 0.01, 100)
    assert w.T == pytest.approx(TWO_PI)
    assert w.k == (5, 3)


def test_choose_window_sqrt2_matches_exhaustive_search():
    tol = 0.02
    m = next(m for m in range(1, 1000)
             if abs(math.sqrt(2) * m - round(math.sqrt(2) * m)) <= tol)
    w = choose_window(1, math.sqrt(2), tol, 1000 * TWO_PI)
    assert w.T == pytest.approx(m * TWO_PI)
    assert w.k == (m, round(math.sqrt(2) * m))
    with pytest.raises(NoWindow):
        choose_window(1, math.sqrt(2), 1e-9, 100 * TWO_PI)


def test_frame_link_examples():
    assert frame_link(0.0, 0.0).rotation == 0.0
    assert frame_link(math.pi / 4, math.pi / 4).rotation == 0.0
    v = Vec2(3.0, -4.0)
    assert frame_link(1.0, -0.5).vector(v).norm() == pytest.approx(5.0)


def test_frame_link_reconstructs_neighbor(rng):
    for _ in range(20):
        c1 = Vec2(*rng.uniform(-100, 100, 2))
        bearing, d = rng.uniform(-math.pi, math.pi), rng.uniform(20, 80)
        c2 = c1 + Vec2(d * math.cos(bearing), d * math.sin(bearing))
        v1, v2 = Vec2(*rng.uniform(-2, 2, 2)), Vec2(*rng.uniform(-2, 2, 2))
        a = AgentState(c1, v1, 3.0 + 0.35 * 4, 5.0, rng.uniform(-math.pi, math.pi))
        b = AgentState(c2, v2, 3.0 + 0.35 * 4, -3.0, rng.uniform(-math.pi, math.pi))
        w = Window(TWO_PI, 8192, (5, -3))
        est = estimate_neighbor(distance_trace(a, b, w), w, 5, a.radius, omega2_sign=-1)
        link = frame_link(a.phase, est.phi1_hat)
        got = c1 + link.offset(est.d_hat)
        assert math.dist(got, c2) <= 1e-3 * d
        assert est.phi1_hat == pytest.approx(analysis_frame(a, b).phase_a, abs=1e-6)
        assert tuple(link.vector(est.v_hat)) == pytest.approx(tuple(v2 - v1), abs=1e-6)


def test_norm_only_zero_radii():
    d, v = 35.0, (0.9, -1.3)
    a, b = pair(d, v, 0.0, 0.0)
    s, _ = spectrum(a, b, 5, -3, n_max=40)
    d_hat, speed, vx, vy_abs = norm_only_estimate(s)
    assert d_hat == pytest.approx(d, rel=1e-6)
    assert speed == pytest.approx(math.hypot(*v), rel=1e-6)
    assert vx == pytest.approx(0.9, rel=1e-6)
    assert vy_abs == pytest.approx(1.3, rel=1e-6)
