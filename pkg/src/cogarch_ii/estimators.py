"""COGARCH(1,1) parameter estimators.

* :func:`mm_estimate`   method of moments on ``(mu, gamma(0), k, rho)``.
* :func:`iie_star`      indirect inference against the analytic binding function.
* :func:`iie_sim`       indirect inference against simulated auxiliary estimates
                        (common random numbers, grid search).

All objectives are ``(pi_hat - pi)^T Omega (pi_hat - pi)``.
"""
from __future__ import annotations

import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Optional, Sequence

import numpy as np
from scipy import linalg, optimize

from .aux_ar import AuxParams, SigmaEstimate, aux_estimate, sample_acvf
from .binding import (
    Analytic,
    Backend,
    MomentSummary,
    binding,
    fit_k_rho,
    invert_moments,
    moment_map,
    recover_k_rho,
)
from .cogarch import ReturnsSeries, SimConfig, draw_increments, simulate_returns
from .errors import (
    CogarchError,
    ConvergenceWarning,
    MomentShapeError,
    OutsideParameterSpaceError,
    SingularMatrixError,
)
from .levy import CogarchParams, LevyModel, psi
from .rng import SIM, Seed, as_key, child

if TYPE_CHECKING:
    from .bench.grid import ParameterGrid

__all__ = [
    "WeightMatrix",
    "EstimationResult",
    "SimTable",
    "IIEConfig",
    "mm_estimate",
    "iie_star",
    "iie_sim",
    "build_sim_table",
    "asymptotic_cov",
    "start_from_aux",
    "DEFAULT_DOMAIN",
]

Box = Sequence[Sequence[float]]
DEFAULT_DOMAIN = ((1e-4, 1.0), (1e-4, 2.0), (1e-4, 2.0))
_RESTART_FACTORS = np.array([1.1, 0.9, 1.1])


# --------------------------------------------------------------------------
# containers


class WeightMatrix:
    """Symmetric positive definite weight ``Omega`` with its Cholesky factor."""

    def __init__(self, omega):
        omega = np.asarray(omega, dtype=float)
        if omega.ndim != 2 or omega.shape[0] != omega.shape[1]:
            raise ValueError("omega must be a square matrix")
        if not np.allclose(omega, omega.T, rtol=0.0, atol=1e-12):
            raise ValueError("omega must be symmetric")
        try:
            self.chol = np.linalg.cholesky(omega)
        except np.linalg.LinAlgError as exc:
            raise ValueError("omega must be positive definite") from exc
        self.omega = omega
        self.is_identity = bool(np.array_equal(omega, np.eye(len(omega))))

    @classmethod
    def identity(cls, dim: int) -> "WeightMatrix":
        return cls(np.eye(dim))

    @property
    def dim(self) -> int:
        return self.omega.shape[0]

    def quad(self, d: np.ndarray) -> float:
        d = np.asarray(d, dtype=float)
        if self.is_identity:
            return float(d @ d)
        return float(d @ self.omega @ d)


@dataclass
class EstimationResult:
    theta_hat: CogarchParams
    method: str
    objective: float
    feasible: bool
    diagnostics: dict = field(default_factory=dict)
    xi: Optional[np.ndarray] = None
    pi_hat: Optional[AuxParams] = None

    def to_dict(self) -> dict:
        d = {
            "method": self.method,
            "theta_hat": self.theta_hat.to_dict(),
            "objective": self.objective,
            "feasible": self.feasible,
            "diagnostics": _jsonable(self.diagnostics),
        }
        if self.xi is not None:
            d["xi"] = np.asarray(self.xi).tolist()
        if self.pi_hat is not None:
            d["pi_hat"] = self.pi_hat.to_dict()
        return d


def _jsonable(x):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, np.ndarray):
        return x.tolist()
    if isinstance(x, np.generic):
        return x.item()
    return x


def _feasible(theta: CogarchParams, model: LevyModel) -> bool:
    return psi(model, theta, 4) < 0


def _weight(omega, dim: int) -> WeightMatrix:
    if omega is None:
        return WeightMatrix.identity(dim)
    w = omega if isinstance(omega, WeightMatrix) else WeightMatrix(omega)
    if w.dim != dim:
        raise ValueError(f"omega has dimension {w.dim}, expected {dim}")
    return w


def _clip(x, domain: Box) -> np.ndarray:
    lo = np.array([b[0] for b in domain])
    hi = np.array([b[1] for b in domain])
    return np.clip(np.asarray(x, dtype=float), lo, hi)


def _empirical_summary(w: np.ndarray, r: int, delta: float) -> MomentSummary:
    ac = sample_acvf(w, r)
    k, rho, _ = fit_k_rho(ac.gamma)
    if k <= 0 or rho <= 0:
        raise MomentShapeError(f"moment shape violated: fitted k={k:.4g}, rho={rho:.4g}")
    return MomentSummary(ac.mean, float(ac.gamma[0]), k, rho, delta)


# --------------------------------------------------------------------------
# method of moments


def mm_estimate(returns: ReturnsSeries, r: int, model: LevyModel, domain: Box = DEFAULT_DOMAIN,
                method: str = "inversion") -> EstimationResult:
    """Method-of-moments estimate from ``(mu, gamma(0))`` and a log-linear ACF fit over lags 1..r.

    ``method="inversion"`` solves the moment equations in closed form
    (exactly identified: the fourth jump moment is treated as unknown);
    ``"distance"`` minimises the relative squared distance to
    :func:`~cogarch_ii.binding.moment_map` over ``domain``.  The inversion
    falls back to the distance fit when the summary is outside the image.
    """
    w = np.asarray(returns.squared, dtype=float)
    if len(w) <= 2 * r:
        raise ValueError(f"need n > 2r, got n={len(w)}, r={r}")
    ms = _empirical_summary(w, r, returns.delta)
    diag = {"summary": ms.to_dict(), "method": method, "fallback": False, "clipped": False}
    theta = None
    if method == "inversion":
        try:
            theta = invert_moments(ms, model)
        except MomentShapeError as exc:
            diag["fallback"] = True
            diag["fallback_reason"] = str(exc)
    elif method != "distance":
        raise ValueError(f"method must be 'inversion' or 'distance', got {method!r}")
    if theta is None:
        theta, dist = _mm_distance(ms, model, domain)
        diag["distance"] = dist
    x = theta.as_array()
    xc = _clip(x, domain)
    if not np.array_equal(x, xc):
        diag["clipped"] = True
        theta = CogarchParams.from_array(xc)
    try:
        fit = moment_map(theta, model, returns.delta).as_array()
        objective = float(np.sum(((ms.as_array() - fit) / ms.as_array()) ** 2))
    except OutsideParameterSpaceError:
        objective = math.inf
    return EstimationResult(theta, "MM", objective, _feasible(theta, model), diag)


def _mm_distance(ms: MomentSummary, model: LevyModel, domain: Box):
    target = ms.as_array()

    def f(x):
        if np.any(x <= 0):
            return 1e12
        try:
            m = moment_map(CogarchParams.from_array(x), model, ms.delta).as_array()
        except OutsideParameterSpaceError:
            return 1e12
        return float(np.sum(((target - m) / target) ** 2))

    a1 = ms.rho / ms.delta
    m2 = model.jump_moment(1) if model.has_jumps else 0.0
    phi0 = 0.5 * a1
    x0 = _clip([ms.mu * a1 / ms.delta, phi0 * m2 + a1 + phi0, phi0], domain)
    res = optimize.minimize(f, x0, method="Nelder-Mead", bounds=domain,
                            options={"xatol": 1e-10, "fatol": 1e-14, "maxfev": 4000})
    return CogarchParams.from_array(res.x), float(res.fun)


# --------------------------------------------------------------------------
# IIE with the analytic binding function


def start_from_aux(pi: AuxParams, model: LevyModel, delta: float = 1.0) -> CogarchParams:
    """Invert ``pi`` back to ``theta`` through ``gamma(1), gamma(2)`` and the moment equations."""
    g0, a = pi.gamma0, np.asarray(pi.a)
    r = len(a)
    # Yule-Walker rows h = 1..r are linear in gamma(1..r) once gamma(0) is known
    mat = np.eye(r)
    rhs = g0 * a.copy()
    for h in range(1, r + 1):
        for j in range(1, r + 1):
            lag = abs(h - j)
            if lag > 0:
                mat[h - 1, lag - 1] -= a[j - 1]
    gam = np.linalg.solve(mat, rhs)
    k, rho = recover_k_rho(g0, gam[0], gam[1])
    return invert_moments(MomentSummary(pi.mu, g0, k, rho, delta), model)


def iie_star(pi_hat: AuxParams, model: LevyModel, delta: float = 1.0, omega=None,
             domain: Box = DEFAULT_DOMAIN, backend: Optional[Backend] = None,
             start: Optional[CogarchParams] = None, max_evals: int = 2000, tol: float = 1e-8,
             polish: bool = True) -> EstimationResult:
    """``argmin_theta (pi_hat - pi_theta)^T Omega (pi_hat - pi_theta)`` over ``domain``.

    Nelder-Mead with box bounds from ``start`` (default: ``pi_hat`` inverted
    through the moment equations), one restart from a perturbed optimum,
    then a bounded least-squares polish accepted only if it lowers the
    objective.  Points with ``Psi(2) >= 0`` have infinite objective.
    """
    backend = backend or Analytic()
    r = pi_hat.r
    target = pi_hat.as_vector()
    w = _weight(omega, r + 2)
    lo = np.array([b[0] for b in domain])
    hi = np.array([b[1] for b in domain])
    n_evals = 0

    def residual(x):
        theta = CogarchParams.from_array(x)
        return target - binding(theta, model, delta, r, backend).as_vector()

    def f(x):
        nonlocal n_evals
        n_evals += 1
        if np.any(x <= 0):
            return math.inf
        try:
            return w.quad(residual(x))
        except CogarchError:
            return math.inf

    diag = {"start_source": "given"}
    if start is None:
        try:
            start = start_from_aux(pi_hat, model, delta)
            diag["start_source"] = "aux-inversion"
        except CogarchError:
            start = CogarchParams.from_array(np.sqrt(lo * hi))
            diag["start_source"] = "domain"
    x0 = _into_m(_clip(start.as_array(), domain), model, lo)
    diag["start"] = x0.tolist()

    opts = {"xatol": tol, "fatol": tol, "maxfev": max_evals}
    runs = [optimize.minimize(f, x0, method="Nelder-Mead", bounds=domain, options=opts)]
    x1 = _into_m(_clip(runs[0].x * _RESTART_FACTORS, domain), model, lo)
    runs.append(optimize.minimize(f, x1, method="Nelder-Mead", bounds=domain, options=opts))
    best = min(runs, key=lambda res: res.fun)
    x_best, f_best = best.x, float(best.fun)
    converged = bool(best.success)
    diag["restart_objectives"] = [float(res.fun) for res in runs]

    if polish and math.isfinite(f_best):
        lt = w.chol.T

        def wres(x):
            try:
                return lt @ residual(x)
            except CogarchError:
                return np.full(r + 2, 1e8)

        try:
            ls = optimize.least_squares(wres, x_best, bounds=(lo, hi), method="trf",
                                        xtol=1e-15, ftol=1e-15, gtol=1e-15, max_nfev=200)
            f_ls = f(ls.x)
            diag["polish_objective"] = f_ls
            if f_ls < f_best:
                x_best, f_best = ls.x, f_ls
                converged = converged or bool(ls.success)
        except (ValueError, np.linalg.LinAlgError):
            diag["polish_objective"] = None
    if not converged:
        warnings.warn("IIE* optimiser stopped without meeting its tolerance", ConvergenceWarning, stacklevel=2)
    diag.update(converged=converged, evaluations=n_evals, iterations=int(sum(res.nit for res in runs)))
    theta = CogarchParams.from_array(x_best)
    return EstimationResult(theta, "IIE_STAR", max(f_best, 0.0), _feasible(theta, model), diag, pi_hat=pi_hat)


def _into_m(x: np.ndarray, model: LevyModel, lo: np.ndarray) -> np.ndarray:
    """Shrink phi towards the lower bound until Psi(2) < 0."""
    x = x.copy()
    for _ in range(200):
        if psi(model, CogarchParams.from_array(x), 2) < 0:
            return x
        x[2] = max(lo[2], 0.8 * x[2])
    return x


# --------------------------------------------------------------------------
# IIE with simulated auxiliary estimates


@dataclass(frozen=True)
class SimTable:
    """Mean auxiliary estimate over K paths at ``beta = 1`` for every ``(eta, phi)``."""

    eta_phi: np.ndarray
    pibar: np.ndarray  # (P, r + 2)
    K: int
    n_sim: int
    r: int
    delta: float
    sim_seed: tuple

    def transformed(self, beta: float) -> np.ndarray:
        """Rows ``(beta mu, a, beta^2 gamma0)``: the exact effect of scaling returns by sqrt(beta)."""
        out = self.pibar.copy()
        out[:, 0] *= beta
        out[:, -1] *= beta * beta
        return out


def _sim_config(seed: Seed, k: int, n_sim: int, delta: float, substeps: int, burn_in: int) -> SimConfig:
    return SimConfig(delta, n_sim, substeps, burn_in, child(seed, SIM, k))


def build_sim_table(eta_phi, model: LevyModel, r: int, K: int, n_sim: int, delta: float = 1.0,
                    sim_seed: Seed = 0, substeps: int = 20, burn_in: int = 500, threads: int = 1) -> SimTable:
    """Precompute the simulated binding table with common random numbers.

    Path ``k`` uses the stream ``(sim_seed, SIM, k)`` for every ``(eta, phi)``,
    so the increments are drawn once per ``k`` and reused.
    """
    pairs = np.asarray(getattr(eta_phi, "eta_phi", eta_phi), dtype=float)
    if pairs.ndim != 2 or pairs.shape[1] != 2 or len(pairs) == 0:
        raise ValueError("eta_phi must be a non-empty (P, 2) array")
    if K < 1:
        raise ValueError("K must be >= 1")
    cfgs = [_sim_config(sim_seed, k, n_sim, delta, substeps, burn_in) for k in range(K)]
    incs = [draw_increments(model, c) for c in cfgs]

    def row(j):
        theta = CogarchParams(1.0, pairs[j, 0], pairs[j, 1])
        acc = np.zeros(r + 2)
        for cfg, inc in zip(cfgs, incs):
            series, _ = simulate_returns(theta, model, cfg, increments=inc)
            acc += aux_estimate(series, r).as_vector()
        return acc / K

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as ex:
            rows = list(ex.map(row, range(len(pairs))))
    else:
        rows = [row(j) for j in range(len(pairs))]
    return SimTable(pairs.copy(), np.array(rows), K, n_sim, r, delta, as_key(sim_seed))


@dataclass
class IIEConfig:
    grid: "ParameterGrid"
    K: int = 20
    omega: Optional[WeightMatrix] = None
    sim_seed: Seed = 0
    n_sim: Optional[int] = None
    substeps: int = 20
    burn_in: int = 500
    table: Optional[SimTable] = None
    threads: int = 1

    def __post_init__(self):
        if self.K < 1:
            raise ValueError("K must be >= 1")
        if len(self.grid) == 0:
            raise ValueError("grid must be non-empty")


def iie_sim(returns: ReturnsSeries, model: LevyModel, r: int, cfg: IIEConfig) -> EstimationResult:
    """Grid argmin of the simulated IIE objective.

    Ties are broken by the lexicographically smallest ``(beta, eta, phi)``,
    so the result does not depend on the order of the grid points.
    """
    n_sim = cfg.n_sim or len(returns)
    table = cfg.table
    if table is None:
        table = build_sim_table(cfg.grid, model, r, cfg.K, n_sim, returns.delta, cfg.sim_seed,
                                cfg.substeps, cfg.burn_in, cfg.threads)
    elif table.r != r or table.K != cfg.K or table.n_sim != n_sim:
        raise ValueError("precomputed table does not match (r, K, n_sim)")
    pi_hat = aux_estimate(returns, r)
    target = pi_hat.as_vector()
    w = _weight(cfg.omega, r + 2)
    betas = np.asarray(cfg.grid.betas, dtype=float)
    obj = np.empty((len(betas), len(table.eta_phi)))
    for i, b in enumerate(betas):
        d = target[None, :] - table.transformed(b)
        if w.is_identity:
            obj[i] = np.einsum("ij,ij->i", d, d)
        else:
            obj[i] = np.einsum("ij,ij->i", d @ w.omega, d)
    best = obj.min()
    bi, pj = np.nonzero(obj == best)
    cand = np.column_stack([betas[bi], table.eta_phi[pj]])
    pick = np.lexsort(cand.T[::-1])[0]
    theta = CogarchParams.from_array(cand[pick])
    diag = {
        "grid_index": [int(bi[pick]), int(pj[pick])],
        "grid_size": int(obj.size),
        "ties": int(len(cand)),
        "K": cfg.K,
        "n_sim": n_sim,
        "note": "grid-only search; a local refinement around the argmin is not attempted",
    }
    return EstimationResult(theta, "IIE_SIM", max(float(best), 0.0), _feasible(theta, model), diag, pi_hat=pi_hat)


# --------------------------------------------------------------------------
# asymptotics


def asymptotic_cov(grad_pi, sigma, omega=None, K: Optional[float] = None,
                   theta_hat: Optional[CogarchParams] = None) -> np.ndarray:
    """Sandwich ``J^-1 I J^-1`` with ``J = G^T W G`` and ``I = (1 + 1/K) G^T W Sigma W G``.

    ``K=None`` drops the simulation factor (IIE* or K -> infinity).
    """
    g = np.asarray(grad_pi, dtype=float)
    s = np.asarray(sigma.sigma if isinstance(sigma, SigmaEstimate) else sigma, dtype=float)
    w = _weight(omega, g.shape[0]).omega
    jmat = g.T @ w @ g
    sv = np.linalg.svd(jmat, compute_uv=False)
    if sv[-1] <= 1e-12 * sv[0]:
        raise SingularMatrixError(f"J is singular: smallest singular value {sv[-1]:.3g} (largest {sv[0]:.3g})")
    factor = 1.0 if K is None else 1.0 + 1.0 / K
    imat = factor * (g.T @ w @ s @ w @ g)
    jinv = linalg.inv(jmat)
    xi = jinv @ imat @ jinv
    return 0.5 * (xi + xi.T)
