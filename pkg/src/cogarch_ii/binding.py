"""Binding function theta -> pi_theta and the moment summary behind it.

The squared returns of a stationary COGARCH(1,1) have an autocovariance of
the form ``gamma(h) = gamma(0) k exp(-h rho)`` for h >= 1, so the AR(r)
projection is fixed by four numbers ``(mu, gamma(0), k, rho)``.  With
``a1 = |Psi(1)|``, ``s1 = E sigma^2 = beta/a1`` and
``s2 = E sigma^4 = 2 beta^2 / (a1 |Psi(2)|)`` the analytic backend uses::

    mu      = s1 * delta
    rho     = a1 * delta
    A       = (1 + phi m4) s2 - s1^2
    gamma(h)= A (1 - e^-rho)^2 / a1^2 * e^{-rho (h - 1)}          h >= 1
    gamma(0)= 2 mu^2 + 6 A / a1 (delta - (1 - e^-rho) / a1) + m4 s2 delta

where ``m4`` is the fourth jump moment.  These follow from Ito's formula
for ``P_t^2 sigma_t^2`` and ``P_t^4`` on one observation interval; the
Monte Carlo backend is the independent check.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Optional, Union

import numpy as np

from .aux_ar import AuxParams, sample_acvf, yule_walker
from .cogarch import SimConfig, simulate_returns
from .errors import BoundaryWarning, MomentShapeError, OutsideParameterSpaceError, RankWarning
from .levy import CogarchParams, LevyModel, psi
from .rng import BINDING, Seed, child

__all__ = [
    "MomentSummary",
    "Analytic",
    "MonteCarlo",
    "moment_map",
    "acvf_from_moments",
    "recover_k_rho",
    "fit_k_rho",
    "binding",
    "gradient_binding",
    "invert_moments",
]


@dataclass(frozen=True)
class MomentSummary:
    mu: float
    gamma0: float
    k: float
    rho: float
    delta: float = 1.0
    se: Optional[dict] = field(default=None, compare=False)

    def as_array(self) -> np.ndarray:
        return np.array([self.mu, self.gamma0, self.k, self.rho])

    def to_dict(self) -> dict:
        d = {"mu": self.mu, "gamma0": self.gamma0, "k": self.k, "rho": self.rho, "delta": self.delta}
        if self.se is not None:
            d["se"] = dict(self.se)
        return d


@dataclass(frozen=True)
class Analytic:
    kind = "analytic"


@dataclass(frozen=True)
class MonteCarlo:
    """Long simulated paths at theta; ``k, rho`` from a log-linear ACF fit over lags 1..fit_lags."""

    paths: int = 16
    n_per_path: int = 200_000
    seed: Seed = 0
    fit_lags: int = 70
    substeps: int = 20
    burn_in: int = 500
    kind = "montecarlo"

    def __post_init__(self):
        if self.paths < 1 or self.n_per_path <= self.fit_lags:
            raise ValueError("need paths >= 1 and n_per_path > fit_lags")


Backend = Union[Analytic, MonteCarlo]


def _require_m(theta: CogarchParams, model: LevyModel):
    p1, p2 = psi(model, theta, 1), psi(model, theta, 2)
    if p2 >= 0 or p1 >= 0:
        raise OutsideParameterSpaceError(f"theta={theta} is outside M: Psi(1)={p1:.6g}, Psi(2)={p2:.6g}")
    return p1, p2


def _analytic(theta: CogarchParams, model: LevyModel, delta: float) -> MomentSummary:
    p1, p2 = _require_m(theta, model)
    a1, b, phi = -p1, theta.beta, theta.phi
    m4 = model.jump_moment(2) if model.has_jumps else 0.0
    s1 = b / a1
    s2 = 2.0 * b * b / (a1 * -p2)
    big_a = (1.0 + phi * m4) * s2 - s1 * s1
    rho = a1 * delta
    q = -math.expm1(-rho)  # 1 - e^-rho
    gamma1 = big_a * q * q / (a1 * a1)
    mu = s1 * delta
    gamma0 = 2.0 * mu * mu + 6.0 * big_a / a1 * (delta - q / a1) + m4 * s2 * delta
    k = gamma1 * math.exp(rho) / gamma0
    return MomentSummary(mu, gamma0, k, rho, delta)


def fit_k_rho(gamma, lags=None):
    """Least-squares fit of ``log gamma(h) = log(gamma0 k) - rho h`` over positive ``gamma(h)``.

    ``gamma`` holds lags 0..r.  Returns ``(k, rho, n_used)``.
    """
    gamma = np.asarray(gamma, dtype=float)
    h = np.arange(1, len(gamma)) if lags is None else np.asarray(lags)
    g = gamma[h]
    keep = g > 0
    if keep.sum() < 3:
        raise MomentShapeError(f"moment shape violated: only {int(keep.sum())} positive autocovariances")
    slope, icpt = np.polyfit(h[keep].astype(float), np.log(g[keep]), 1)
    return float(math.exp(icpt) / gamma[0]), float(-slope), int(keep.sum())


def _monte_carlo(theta: CogarchParams, model: LevyModel, delta: float, be: MonteCarlo) -> MomentSummary:
    _require_m(theta, model)
    r = be.fit_lags
    means, acvfs, fits = [], [], []
    for p in range(be.paths):
        cfg = SimConfig(delta, be.n_per_path, be.substeps, be.burn_in, child(be.seed, BINDING, p))
        series, _ = simulate_returns(theta, model, cfg)
        ac = sample_acvf(series.squared, r)
        means.append(ac.mean)
        acvfs.append(ac.gamma)
        try:
            fits.append(fit_k_rho(ac.gamma)[:2])
        except MomentShapeError:
            fits.append((np.nan, np.nan))
    means, acvfs, fits = np.array(means), np.array(acvfs), np.array(fits)
    pooled = acvfs.mean(axis=0)
    k, rho, _ = fit_k_rho(pooled)
    root = math.sqrt(be.paths)
    se = {
        "mu": float(means.std(ddof=1) / root) if be.paths > 1 else float("nan"),
        "gamma0": float(acvfs[:, 0].std(ddof=1) / root) if be.paths > 1 else float("nan"),
        "k": float(np.nanstd(fits[:, 0], ddof=1) / root) if be.paths > 1 else float("nan"),
        "rho": float(np.nanstd(fits[:, 1], ddof=1) / root) if be.paths > 1 else float("nan"),
    }
    if be.paths < 4:
        warnings.warn(f"only {be.paths} Monte Carlo paths: standard errors are unreliable", UserWarning,
                      stacklevel=3)
    return MomentSummary(float(means.mean()), float(pooled[0]), float(k), float(rho), delta, se)


def moment_map(theta: CogarchParams, model: LevyModel, delta: float = 1.0,
               backend: Optional[Backend] = None) -> MomentSummary:
    """``(mu, gamma(0), k, rho)`` of the squared returns at ``theta``."""
    if backend is None or isinstance(backend, Analytic):
        return _analytic(theta, model, delta)
    return _monte_carlo(theta, model, delta, backend)


def acvf_from_moments(ms: MomentSummary, h) -> Union[float, np.ndarray]:
    """``gamma(h) = gamma0 k exp(-h rho)`` for h >= 1."""
    h_arr = np.asarray(h)
    if np.any(h_arr < 1):
        raise ValueError("h must be >= 1")
    out = ms.gamma0 * ms.k * np.exp(-h_arr * ms.rho)
    return out if out.ndim else float(out)


def recover_k_rho(gamma0: float, gamma1: float, gamma2: float):
    """``k = gamma1^2 / (gamma0 gamma2)`` and ``rho = log(gamma1 / gamma2)``."""
    if min(gamma0, gamma1, gamma2) <= 0:
        raise MomentShapeError(
            f"outside moment cone: need positive gamma(0..2), got ({gamma0}, {gamma1}, {gamma2})"
        )
    k = gamma1 * gamma1 / (gamma0 * gamma2)
    rho = math.log(gamma1 / gamma2)
    if rho <= 0:
        warnings.warn(f"rho = {rho:.3g} is on or beyond the boundary rho > 0", BoundaryWarning, stacklevel=2)
    return k, rho


def _acvf_vector(ms: MomentSummary, r: int) -> np.ndarray:
    return np.concatenate(([ms.gamma0], acvf_from_moments(ms, np.arange(1, r + 1))))


def binding(theta: CogarchParams, model: LevyModel, delta: float = 1.0, r: int = 70,
            backend: Optional[Backend] = None) -> AuxParams:
    """``pi_theta = (mu, a_1..a_r, gamma(0))`` of the AR(r) projection of squared returns."""
    if r < 2:
        raise ValueError("binding needs r >= 2: (k, rho) are not recoverable from one lag")
    ms = moment_map(theta, model, delta, backend)
    a = yule_walker(_acvf_vector(ms, r), r)
    return AuxParams(ms.mu, a, ms.gamma0)


def gradient_binding(theta: CogarchParams, model: LevyModel, delta: float = 1.0, r: int = 70,
                     backend: Optional[Backend] = None, step_scale: float = 1e-5) -> np.ndarray:
    """Central-difference Jacobian of ``binding`` with respect to ``(beta, eta, phi)``.

    Step ``h_i = step_scale * max(1, |theta_i|)``.  The Monte Carlo backend
    keeps its seed across the stencil.  Returns an ``(r + 2, 3)`` matrix.
    """
    x = theta.as_array()
    cols = []
    for i in range(3):
        h = step_scale * max(1.0, abs(x[i]))
        up, dn = x.copy(), x.copy()
        up[i] += h
        dn[i] -= h
        f_up = binding(CogarchParams.from_array(up), model, delta, r, backend).as_vector()
        f_dn = binding(CogarchParams.from_array(dn), model, delta, r, backend).as_vector()
        cols.append((f_up - f_dn) / (2.0 * h))
    jac = np.column_stack(cols)
    sv = np.linalg.svd(jac, compute_uv=False)
    if sv[-1] < 1e-8 * sv[0]:
        warnings.warn(f"binding Jacobian is rank deficient: singular values {sv}", RankWarning, stacklevel=2)
    return jac


def invert_moments(ms: MomentSummary, model: LevyModel) -> CogarchParams:
    """Closed-form ``theta`` from ``(mu, gamma(0), k, rho)``.

    Uses only ``m2 = 1 - c_L`` from the model: the fourth jump moment is
    eliminated between the ``gamma(0)`` and ``gamma(1)`` equations.
    Raises :class:`MomentShapeError` when the summary lies outside the image.
    """
    d = ms.delta
    if ms.k <= 0 or ms.rho <= 0 or ms.mu <= 0 or ms.gamma0 <= 0:
        raise MomentShapeError(f"moment shape violated: {ms.to_dict()}")
    a1 = ms.rho / d
    beta = ms.mu * a1 / d
    q = -math.expm1(-ms.rho)
    big_a = ms.gamma0 * ms.k * math.exp(-ms.rho) * a1 * a1 / (q * q)
    m4s2 = (ms.gamma0 - 2.0 * ms.mu**2 - 6.0 * big_a / a1 * (d - q / a1)) / d
    if m4s2 <= 0:
        raise MomentShapeError(f"moment shape violated: implied m4*E sigma^4 = {m4s2:.4g} <= 0")
    phi = -a1 + math.sqrt(a1 * a1 + 2.0 * a1 * big_a / m4s2)
    m2 = model.jump_moment(1) if model.has_jumps else 0.0
    return CogarchParams(beta, phi * m2 + a1, phi)
