import math

import numpy as np
import pytest

from cogarch_ii import _kernels
from cogarch_ii.aux_ar import aux_estimate
from cogarch_ii.cogarch import (
    SimConfig,
    VolatilityPath,
    k_process,
    pathwise_gradient,
    read_returns_csv,
    rescale_beta,
    simulate_from_increments,
    simulate_returns,
    write_returns_csv,
)
from cogarch_ii.errors import NonStationaryError
from cogarch_ii.levy import CogarchParams, PureBrownian, VarianceGamma

from conftest import THETA0, batch_se

SMALL = SimConfig(n=2000, substeps=10, burn_in=200, seed=(1, 2))


def test_deterministic(vg):
    a, va = simulate_returns(THETA0, vg, SMALL)
    b, vb = simulate_returns(THETA0, vg, SMALL)
    assert np.array_equal(a.values, b.values)
    assert np.array_equal(va.sigma2, vb.sigma2)
    assert len(a) == SMALL.n
    assert a.theta_used == THETA0 and a.seed_used == (1, 2)


def test_volatility_positive_and_above_envelope(vg):
    _, vol = simulate_returns(THETA0, vg, SMALL, record="full")
    assert np.all(vol.sigma2 > 0)
    # sigma^2 >= beta/eta (1 - e^{-eta t}) from a zero start; a stationary start only raises it
    floor = THETA0.beta / THETA0.eta * -np.expm1(-THETA0.eta * vol.times)
    assert np.all(vol.sigma2 >= floor * (1 - 1e-12))


def test_non_stationary_rejected(vg):
    with pytest.raises(NonStationaryError):
        simulate_returns(CogarchParams(0.04, 0.03, 0.05), vg, SMALL)


def test_zero_jump_decay_is_exact():
    theta = CogarchParams(0.3, 0.8, 0.2)
    dt, s0 = 0.1, 2.5
    _, _, v_in = simulate_from_increments(theta, np.zeros(3), None, dt, 1, s0, record_inner=True)
    level = theta.beta / theta.eta
    t = dt * np.arange(1, 4)
    expected = level + (s0 - level) * np.exp(-theta.eta * t)
    np.testing.assert_allclose(v_in, expected, rtol=1e-14)


def test_rescale_beta(vg):
    base, _ = simulate_returns(THETA0.with_beta(1.0), vg, SMALL)
    same = rescale_beta(base, 1.0)
    assert np.array_equal(same.values, base.values)
    four = rescale_beta(base, 4.0)
    np.testing.assert_array_equal(four.values, 2.0 * base.values)
    assert four.theta_used.beta == 4.0 and four.seed_used == base.seed_used
    direct, _ = simulate_returns(THETA0, vg, SMALL)
    np.testing.assert_allclose(rescale_beta(base, THETA0.beta).values, direct.values, rtol=1e-12, atol=0)
    with pytest.raises(ValueError):
        rescale_beta(direct, 2.0)


def test_aux_estimate_scales_with_beta(vg):
    base, _ = simulate_returns(THETA0.with_beta(1.0), vg, SimConfig(n=5000, seed=4))
    b = 0.04
    p1, pb = aux_estimate(base, 10), aux_estimate(rescale_beta(base, b), 10)
    assert pb.mu == pytest.approx(b * p1.mu, rel=1e-12)
    assert pb.gamma0 == pytest.approx(b * b * p1.gamma0, rel=1e-12)
    np.testing.assert_allclose(pb.a, p1.a, rtol=1e-9, atol=1e-12)


def test_k_process():
    empty = VolatilityPath(np.arange(1.0, 4.0), np.ones(3), 1.0, np.array([]), np.array([]))
    assert k_process(empty, 0.5)(10.0) == 0.0
    one = VolatilityPath(np.arange(1.0, 4.0), np.ones(3), 1.0, np.array([2.0]), np.array([1.5]))
    k = k_process(one, 0.5)
    assert k(1.9) == 0.0
    assert k(2.0) == pytest.approx(2.25 / (1 + 0.5 * 2.25))
    with pytest.raises(ValueError):
        k_process(one, 0.0)


def test_k_process_bounded_by_jump_count(vg):
    phi = THETA0.phi
    _, vol = simulate_returns(THETA0, vg, SimConfig(n=50, substeps=5, burn_in=10, seed=8), record="full")
    k = k_process(vol, phi)
    s = np.linspace(0, vol.times[-1], 57)
    counts = np.searchsorted(vol.jump_times, s, side="right")
    assert np.all(k(s) <= counts / phi + 1e-12)
    assert np.all(np.diff(k(s)) >= 0)


def test_gradient_zero_jump_hand_derivative():
    eta, dt, s0, n = 0.7, 0.05, 3.0, 40
    v, de, dp = _kernels.grad(np.zeros(n), math.exp(-eta * dt), 1 / eta, -1 / eta**2, dt, 0.3, s0, 0.0, 0.0)
    t = dt * np.arange(1, n + 1)
    e = np.exp(-eta * t)
    hand = -1 / eta**2 + e / eta**2 - t * (s0 - 1 / eta) * e
    np.testing.assert_allclose(de, hand, rtol=1e-12, atol=1e-14)
    assert np.all(dp == 0)


def test_gradient_pure_brownian_is_stationary_level():
    theta = CogarchParams(0.2, 0.5, 0.1)
    cfg = SimConfig(n=30, substeps=4, burn_in=5, seed=1)
    g = pathwise_gradient(theta, PureBrownian(), cfg)
    np.testing.assert_allclose(g.sigma2, theta.beta / theta.eta, rtol=1e-12)
    np.testing.assert_allclose(g.d_eta, -theta.beta / theta.eta**2, rtol=1e-10)
    assert np.all(g.d_phi == 0)


def _fd_order(vg, which):
    cfg = SimConfig(n=200, substeps=20, burn_in=100, seed=(5, 5))
    g = pathwise_gradient(THETA0, vg, cfg)
    exact = {"eta": g.d_eta, "phi": g.d_phi}[which][-1]
    errs = []
    for h in (1e-3, 1e-4):
        lo, hi = THETA0.as_array(), THETA0.as_array()
        j = {"eta": 1, "phi": 2}[which]
        lo[j] -= h
        hi[j] += h
        up = simulate_returns(CogarchParams.from_array(hi), vg, cfg)[1].sigma2[-1]
        dn = simulate_returns(CogarchParams.from_array(lo), vg, cfg)[1].sigma2[-1]
        errs.append(abs(exact - (up - dn) / (2 * h)))
    return math.log10(errs[0] / errs[1])


@pytest.mark.parametrize("which", ["eta", "phi"])
def test_gradient_matches_finite_differences(vg, which):
    assert _fd_order(vg, which) >= 1.8


def test_gradient_deterministic_and_beta_column(vg):
    cfg = SimConfig(n=100, substeps=5, burn_in=50, seed=3)
    a = pathwise_gradient(THETA0, vg, cfg, resolution="inner")
    b = pathwise_gradient(THETA0, vg, cfg, resolution="inner")
    assert np.array_equal(a.d_eta, b.d_eta) and np.array_equal(a.d_phi, b.d_phi)
    np.testing.assert_allclose(a.d_beta * THETA0.beta, a.sigma2, rtol=1e-14)
    _, vol = simulate_returns(THETA0, vg, cfg, record="full")
    np.testing.assert_allclose(a.sigma2, vol.sigma2, rtol=1e-12)


def test_stationary_halves(vg):
    _, vol = simulate_returns(THETA0, vg, SimConfig(n=200_000, seed=21))
    first, second = np.split(vol.sigma2, 2)
    se = math.hypot(batch_se(first), batch_se(second))
    assert abs(first.mean() - second.mean()) < 3 * se


def test_refinement_changes_mean_less_than_mc_error(vg):
    n, burn, fine = 100_000, 500, 40
    dt = 1.0 / fine
    jumps, _ = vg.sample_parts(np.random.default_rng(17), dt, (n + burn) * fine)
    coarse = jumps.reshape(-1, 2).sum(axis=1)
    theta = THETA0.with_beta(1.0)
    s0 = 1.0 / 0.015
    g_f = simulate_from_increments(theta, jumps, None, dt, fine, s0)[0][burn:]
    g_c = simulate_from_increments(theta, coarse, None, 2 * dt, fine // 2, s0)[0][burn:]
    se = batch_se(g_c**2)
    assert abs(np.mean(g_f**2) - np.mean(g_c**2)) < se


def test_csv_roundtrip(vg, tmp_path):
    series, vol = simulate_returns(THETA0, vg, SimConfig(n=50, seed=2))
    path = tmp_path / "g.csv"
    write_returns_csv(path, series, vol)
    header = path.read_text().splitlines()[0]
    assert header == "index,G,t,sigma2"
    back = read_returns_csv(path)
    np.testing.assert_array_equal(back.values, series.values)


def test_kernels_numba_and_numpy_agree(vg):
    jumps, bm = VarianceGamma(1.0, c_L=0.2).sample_parts(np.random.default_rng(0), 0.05, 20_000)
    args = (jumps, bm, math.exp(-0.053 * 0.05), 1 / 0.053, 0.038, 10.0, 20, True)
    for a, b in zip(_kernels.path(*args, use_numba=True), _kernels.path(*args, use_numba=False)):
        np.testing.assert_allclose(a, b, rtol=1e-10)
    gargs = (jumps, math.exp(-0.053 * 0.05), 1 / 0.053, -1 / 0.053**2, 0.05, 0.038, 10.0, -100.0, 3.0)
    for a, b in zip(_kernels.grad(*gargs, use_numba=True), _kernels.grad(*gargs, use_numba=False)):
        np.testing.assert_allclose(a, b, rtol=1e-9)


def test_affine_scan_long_products():
    rng = np.random.default_rng(1)
    a = np.exp(rng.normal(0, 2, 10_000))
    b = rng.random(10_000)
    x, ref = 0.5, np.empty(10_000)
    for j in range(10_000):
        x = a[j] * x + b[j]
        ref[j] = x
    np.testing.assert_allclose(_kernels.affine_scan(a, b, 0.5), ref, rtol=1e-9)
