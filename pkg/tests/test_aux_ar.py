import numpy as np
import pytest

from cogarch_ii.aux_ar import (
    AuxParams,
    aux_estimate,
    aux_from_squares,
    ar_residuals,
    default_truncation,
    estimate_sigma_star,
    project_stationary,
    sample_acvf,
    toeplitz_acvf,
    yule_walker,
)
from cogarch_ii.binding import Analytic, binding
from cogarch_ii.cogarch import SimConfig, simulate_returns
from cogarch_ii.errors import ClampWarning, DegenerateAutocovarianceError, InsufficientDataError

from conftest import THETA0, batch_se


@pytest.fixture(scope="module")
def long_w():
    from cogarch_ii.levy import VarianceGamma

    g, _ = simulate_returns(THETA0, VarianceGamma(1.0), SimConfig(n=100_000, seed=(7, 7)))
    return g.values**2


def test_acvf_hand_example():
    est = sample_acvf([1.0, 2.0, 3.0, 4.0], 1)
    assert est.mean == 2.5
    assert est.gamma[0] == pytest.approx(1.25, abs=1e-15)
    assert est.gamma[1] == pytest.approx(0.3125, abs=1e-15)


def test_acvf_constant_series():
    assert np.all(sample_acvf(np.full(50, 3.2), 5).gamma == 0)


def test_acvf_lag_too_large():
    with pytest.raises(InsufficientDataError):
        sample_acvf(np.ones(5), 5)


def test_acvf_known_mean_close_to_sample_mean(long_w):
    mu = THETA0.beta / 0.015
    a, b = sample_acvf(long_w, 5), sample_acvf(long_w, 5, mean=mu)
    c = long_w - mu
    for h in range(6):
        se = batch_se(c[: len(c) - h] * c[h:])
        assert abs(a.gamma[h] - b.gamma[h]) < 3 * se


def test_acvf_matrix_psd(long_w):
    g = sample_acvf(long_w[:5000], 30).gamma
    assert np.all(np.abs(g) <= g[0])
    assert np.linalg.eigvalsh(toeplitz_acvf(g)).min() >= -1e-10


def test_yule_walker_hand_cases():
    np.testing.assert_allclose(yule_walker([1.0, 0.0, 0.0], 2), [0.0, 0.0], atol=1e-15)
    a = yule_walker([1.0, 0.25, 0.125], 2)
    np.testing.assert_allclose(a, [7 / 30, 1 / 15], rtol=0, atol=1e-12)
    assert a[0] * 1.0 + a[1] * 0.25 == pytest.approx(0.25, abs=1e-12)
    assert a[0] * 0.25 + a[1] * 1.0 == pytest.approx(0.125, abs=1e-12)


def test_yule_walker_degenerate():
    with pytest.raises(DegenerateAutocovarianceError, match="degenerate autocovariance"):
        yule_walker([1.0, 1.0, 1.0], 2)
    with pytest.raises(DegenerateAutocovarianceError):
        aux_from_squares(np.full(100, 2.0), 3)


def test_aux_estimate_validation():
    with pytest.raises(ValueError):
        aux_estimate(np.ones(100), 1)
    with pytest.raises(InsufficientDataError):
        aux_estimate(np.arange(10.0), 5)
    with pytest.raises(ValueError):
        aux_estimate(np.random.default_rng(0).normal(size=100), 3, method="burg")


def test_aux_deterministic_and_shape(long_w):
    p = aux_from_squares(long_w, 5)
    q = aux_from_squares(long_w, 5)
    assert np.array_equal(p.as_vector(), q.as_vector())
    assert p.r == 5 and p.as_vector().shape == (7,)
    assert AuxParams.from_vector(p.as_vector()).gamma0 == p.gamma0


def test_shift_only_moves_mean(long_w):
    p, q = aux_from_squares(long_w, 5), aux_from_squares(long_w + 3.0, 5)
    assert q.mu == pytest.approx(p.mu + 3.0, rel=1e-12)
    np.testing.assert_allclose(q.a, p.a, atol=1e-12)
    assert q.gamma0 == pytest.approx(p.gamma0, rel=1e-12)


def test_residuals_orthogonal_to_regressors(long_w):
    p = aux_from_squares(long_w, 5, method="LS")
    u = ar_residuals(long_w, p.mu, p.a)
    c = long_w - p.mu
    n = len(long_w)
    for j in range(1, 6):
        corr = np.corrcoef(u, c[5 - j : n - j])[0, 1]
        assert abs(corr) < 3 / np.sqrt(n)


def test_yw_and_ls_asymptotically_equivalent():
    from cogarch_ii.levy import VarianceGamma

    g, _ = simulate_returns(THETA0, VarianceGamma(1.0), SimConfig(n=100_000, seed=(7, 8)))
    w = g.values**2
    scaled = []
    for n in (1_000, 10_000, 100_000):
        a = aux_from_squares(w[:n], 5, "YW").a
        b = aux_from_squares(w[:n], 5, "LS").a
        scaled.append(np.sqrt(n) * np.linalg.norm(a - b))
    assert max(scaled) < 5.0
    assert scaled[-1] <= 2 * scaled[0]


def test_consistency_error_shrinks(vg):
    pi0 = binding(THETA0, vg, 1.0, 5, Analytic()).as_vector()
    errs = {}
    for n in (50_000, 200_000):
        e = []
        for s in range(6):
            g, _ = simulate_returns(THETA0, vg, SimConfig(n=n, seed=(31, s)))
            e.append(np.linalg.norm((aux_estimate(g, 5).as_vector() - pi0) / np.abs(pi0)))
        errs[n] = np.mean(e)
    assert errs[200_000] < errs[50_000]


def test_project_stationary():
    a, changed = project_stationary([0.2, 0.1])
    assert not changed and np.allclose(a, [0.2, 0.1])
    a, changed = project_stationary([1.2, -0.1])
    assert changed
    roots = np.roots(np.concatenate((-a[::-1], [1.0])))
    assert np.abs(roots).min() == pytest.approx(1.001, rel=1e-9)


def test_ls_clamp_flagged():
    # an explosive recursion puts the LS root inside the unit circle
    e = np.random.default_rng(3).normal(size=300)
    w = np.empty(300)
    w[0] = 1.0
    for t in range(1, 300):
        w[t] = 1.05 * w[t - 1] + e[t]
    with pytest.warns(ClampWarning):
        p = aux_from_squares(w, 2, method="LS")
    assert p.clamped
    roots = np.roots(np.concatenate((-p.a[::-1], [1.0])))
    assert np.abs(roots).min() >= 1.001 * (1 - 1e-9)


def test_sigma_star_gram_and_symmetry(long_w):
    w = long_w[:20_000]
    p = aux_from_squares(w, 3)
    s0 = estimate_sigma_star(w, p, L=0)
    assert np.linalg.eigvalsh(s0.sigma_star).min() >= -1e-8 * np.abs(s0.sigma_star).max()
    s = estimate_sigma_star(w, p)
    assert s.truncation == default_truncation(20_000) == 44
    assert np.array_equal(s.sigma, s.sigma.T)
    assert s.sigma.shape == (5, 5) and np.all(np.isfinite(s.sigma))
    with pytest.raises(InsufficientDataError):
        estimate_sigma_star(w[:100], p, L=97)


@pytest.mark.slow
def test_sigma_star_replication_oracle(vg):
    n, reps, L = 20_000, 200, 300
    mus, diag = [], []
    for i in range(reps):
        g, _ = simulate_returns(THETA0, vg, SimConfig(n=n, seed=(404, i)))
        w = g.values**2
        p = aux_from_squares(w, 3)
        mus.append(p.mu)
        if i < 20:
            diag.append(estimate_sigma_star(w, p, L=L).sigma[0, 0])
    ratio = np.mean(diag) / (n * np.var(mus))
    assert 0.5 <= ratio <= 2.0
