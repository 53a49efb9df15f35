"""Simulation of COGARCH(1,1) returns on an equally spaced grid.

The volatility decays exactly between inner steps and jumps
multiplicatively by ``1 + phi * (jump)^2`` at the end of each inner step,
treating the aggregated Lévy increment of the step as a single jump.  The
stationary start is obtained by a discarded burn-in.  Paths are always
simulated at ``beta = 1`` and rescaled, so returns are exactly linear in
``sqrt(beta)``.
"""
from __future__ import annotations

import csv
import math
import warnings
from dataclasses import dataclass, replace
from typing import Optional

import numpy as np

from . import _kernels
from .errors import NonStationaryError
from .levy import CogarchParams, LevyModel, psi
from .rng import Seed, as_key, stream

__all__ = [
    "SimConfig",
    "ReturnsSeries",
    "VolatilityPath",
    "GradientPath",
    "StepFunction",
    "draw_increments",
    "simulate_returns",
    "simulate_from_increments",
    "rescale_beta",
    "k_process",
    "pathwise_gradient",
    "write_returns_csv",
    "read_returns_csv",
]


@dataclass(frozen=True)
class SimConfig:
    delta: float = 1.0
    n: int = 10_000
    substeps: int = 20
    burn_in: int = 500
    seed: Seed = 0

    def __post_init__(self):
        if self.delta <= 0:
            raise ValueError("delta must be positive")
        if self.n < 1 or self.substeps < 1 or self.burn_in < 0:
            raise ValueError("need n >= 1, substeps >= 1, burn_in >= 0")
        object.__setattr__(self, "seed", as_key(self.seed))

    @property
    def dt(self) -> float:
        return self.delta / self.substeps

    @property
    def n_steps(self) -> int:
        return (self.burn_in + self.n) * self.substeps


@dataclass
class ReturnsSeries:
    values: np.ndarray
    delta: float
    theta_used: Optional[CogarchParams] = None
    seed_used: Optional[tuple] = None

    def __len__(self):
        return len(self.values)

    @property
    def squared(self) -> np.ndarray:
        return self.values * self.values


@dataclass
class VolatilityPath:
    """Volatility after burn-in.

    ``times``/``sigma2`` are on the observation grid unless the path was
    simulated with ``record="full"``, in which case they are on the inner
    grid and ``jump_times``/``jump_sizes`` hold the jump part of every
    non-zero increment.
    """

    times: np.ndarray
    sigma2: np.ndarray
    sigma2_0: float
    jump_times: Optional[np.ndarray] = None
    jump_sizes: Optional[np.ndarray] = None


@dataclass
class GradientPath:
    times: np.ndarray
    sigma2: np.ndarray
    d_beta: np.ndarray
    d_eta: np.ndarray
    d_phi: np.ndarray


class StepFunction:
    """Right-continuous step function, zero before the first knot."""

    def __init__(self, knots: np.ndarray, values: np.ndarray):
        self.knots = np.asarray(knots, dtype=float)
        self.values = np.asarray(values, dtype=float)

    def __call__(self, s):
        s_arr = np.asarray(s, dtype=float)
        idx = np.searchsorted(self.knots, s_arr, side="right")
        out = np.concatenate(([0.0], self.values))[idx]
        return out if out.ndim else float(out)


def _check_stationary(theta: CogarchParams, model: LevyModel) -> float:
    psi1 = psi(model, theta, 1)
    if psi1 >= 0:
        raise NonStationaryError(f"Psi(1) = {psi1:.6g} >= 0: no stationary volatility for {theta}")
    return psi1


def _decay_warning(eta: float, dt: float):
    if eta * dt >= 1.0:
        warnings.warn(f"eta*dt = {eta * dt:.3g} >= 1; exact decay is used but the jump aggregation is coarse",
                      RuntimeWarning, stacklevel=3)


def draw_increments(model: LevyModel, cfg: SimConfig):
    """Jump and Brownian parts for every inner step of ``cfg`` (burn-in included)."""
    return model.sample_parts(stream(cfg.seed), cfg.dt, cfg.n_steps)


def simulate_from_increments(theta: CogarchParams, jumps, brownian, dt: float, substeps: int,
                             sigma2_0: float, record_inner: bool = False):
    """Low-level path from given increments and starting volatility.

    Returns ``(G, sigma2_obs, sigma2_inner)`` with burn-in *not* removed.
    """
    level = 1.0 / theta.eta
    decay = math.exp(-theta.eta * dt)
    g, v_obs, v_in = _kernels.path(jumps, brownian, decay, level, theta.phi,
                                   sigma2_0 / theta.beta, substeps, record_inner)
    b = theta.beta
    return math.sqrt(b) * g, b * v_obs, b * v_in


def simulate_returns(theta: CogarchParams, model: LevyModel, cfg: SimConfig, record: str = "obs",
                     increments=None):
    """Simulate ``cfg.n`` returns after a burn-in of ``cfg.burn_in`` periods.

    ``increments`` may carry pre-drawn ``(jumps, brownian)`` (common random
    numbers); otherwise they are drawn from ``cfg.seed``.
    """
    psi1 = _check_stationary(theta, model)
    _decay_warning(theta.eta, cfg.dt)
    jumps, bm = draw_increments(model, cfg) if increments is None else increments
    v0 = 1.0 / -psi1  # stationary mean at beta = 1
    full = record == "full"
    g, v_obs, v_in = _kernels.path(jumps, bm, math.exp(-theta.eta * cfg.dt), 1.0 / theta.eta,
                                   theta.phi, v0, cfg.substeps, full)
    b = theta.beta
    burn = cfg.burn_in
    series = ReturnsSeries(math.sqrt(b) * g[burn:], cfg.delta, theta, cfg.seed)
    s0 = b * (v_obs[burn - 1] if burn > 0 else v0)
    if full:
        start = burn * cfg.substeps
        times = cfg.dt * np.arange(1, cfg.n * cfg.substeps + 1)
        js = np.asarray(jumps[start:])
        nz = np.flatnonzero(js)
        vol = VolatilityPath(times, b * v_in[start:], s0, times[nz], js[nz])
    else:
        vol = VolatilityPath(cfg.delta * np.arange(1, cfg.n + 1), b * v_obs[burn:], s0)
    return series, vol


def rescale_beta(base: ReturnsSeries, beta: float) -> ReturnsSeries:
    """Map returns simulated at ``beta = 1`` to ``beta`` (multiply by sqrt(beta))."""
    if base.theta_used is None or base.theta_used.beta != 1.0:
        raise ValueError("rescale_beta needs a series simulated at beta = 1")
    if not beta > 0:
        raise ValueError("beta must be positive")
    return replace(base, values=math.sqrt(beta) * base.values, theta_used=base.theta_used.with_beta(beta))


def k_process(path: VolatilityPath, phi: float) -> StepFunction:
    """``K_s(phi) = sum_{u <= s} dL_u^2 / (1 + phi dL_u^2)`` over the path's jumps."""
    if not phi > 0:
        raise ValueError("phi must be positive")
    if path.jump_times is None:
        raise ValueError("path has no recorded jumps; simulate with record='full'")
    x2 = np.asarray(path.jump_sizes, dtype=float) ** 2
    return StepFunction(path.jump_times, np.cumsum(x2 / (1.0 + phi * x2)))


def pathwise_gradient(theta: CogarchParams, model: LevyModel, cfg: SimConfig, resolution: str = "obs",
                      increments=None) -> GradientPath:
    """Gradient of the simulated volatility with respect to ``(beta, eta, phi)``.

    The ``(eta, phi)`` tangents are carried through the recursion with the
    same jump realisation (dY/deta = s, dY/dphi = -K_s(phi)); the beta
    derivative is ``sigma2 / beta`` exactly.
    """
    psi1 = _check_stationary(theta, model)
    jumps, _ = draw_increments(model, cfg) if increments is None else increments
    eta, phi, b = theta.eta, theta.phi, theta.beta
    m2 = model.jump_moment(1) if model.has_jumps else 0.0
    v0 = 1.0 / -psi1
    v, de, dp = _kernels.grad(jumps, math.exp(-eta * cfg.dt), 1.0 / eta, -1.0 / eta**2, cfg.dt, phi,
                              v0, -v0 * v0, m2 * v0 * v0)
    start = cfg.burn_in * cfg.substeps
    if resolution == "inner":
        sl = slice(start, None)
        times = cfg.dt * np.arange(1, cfg.n * cfg.substeps + 1)
    else:
        sl = slice(start + cfg.substeps - 1, None, cfg.substeps)
        times = cfg.delta * np.arange(1, cfg.n + 1)
    v = v[sl]
    return GradientPath(times, b * v, v.copy(), b * de[sl], b * dp[sl])


def write_returns_csv(path, series: ReturnsSeries, vol: Optional[VolatilityPath] = None):
    """Write ``index,G`` (plus ``t,sigma2`` for an observation-grid ``vol``) to a path or open file."""
    if hasattr(path, "write"):
        _write_rows(path, series, vol)
        return
    with open(path, "w", newline="") as fh:
        _write_rows(fh, series, vol)


def _write_rows(fh, series, vol):
    w = csv.writer(fh, lineterminator="\n")
    obs_vol = vol is not None and len(vol.sigma2) == len(series.values)
    w.writerow(["index", "G"] + (["t", "sigma2"] if obs_vol else []))
    for i, g in enumerate(series.values, start=1):
        row = [i, repr(float(g))]
        if obs_vol:
            row += [repr(float(vol.times[i - 1])), repr(float(vol.sigma2[i - 1]))]
        w.writerow(row)


def read_returns_csv(path, delta: float = 1.0) -> ReturnsSeries:
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    if not rows or "G" not in rows[0]:
        raise ValueError(f"{path}: expected a CSV with columns index,G")
    return ReturnsSeries(np.array([float(r["G"]) for r in rows]), delta)
