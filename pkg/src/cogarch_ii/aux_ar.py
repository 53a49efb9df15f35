"""Auxiliary AR(r) model for squared returns.

``pi = (mu, a_1..a_r, gamma(0))`` is estimated from the sample mean, the
divisor-n autocovariances and either the Yule-Walker or the least-squares
AR coefficients.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy import linalg

from .errors import ClampWarning, DegenerateAutocovarianceError, InsufficientDataError

__all__ = [
    "AuxParams",
    "AcvfEstimate",
    "SigmaEstimate",
    "sample_acvf",
    "toeplitz_acvf",
    "yule_walker",
    "aux_estimate",
    "aux_from_squares",
    "ar_residuals",
    "project_stationary",
    "estimate_sigma_star",
    "default_truncation",
]

EPS = 1e-6
ROOT_MARGIN = 1.001
COND_MAX = 1e12


@dataclass
class AuxParams:
    mu: float
    a: np.ndarray
    gamma0: float
    clamped: bool = False

    @property
    def r(self) -> int:
        return len(self.a)

    def as_vector(self) -> np.ndarray:
        return np.concatenate(([self.mu], self.a, [self.gamma0]))

    @classmethod
    def from_vector(cls, v) -> "AuxParams":
        v = np.asarray(v, dtype=float)
        return cls(float(v[0]), v[1:-1].copy(), float(v[-1]))

    def scaled(self, beta: float) -> "AuxParams":
        """Auxiliary parameter of the same path with returns scaled by sqrt(beta)."""
        return AuxParams(beta * self.mu, self.a.copy(), beta * beta * self.gamma0, self.clamped)

    def to_dict(self) -> dict:
        return {"mu": self.mu, "a": [float(x) for x in self.a], "gamma0": self.gamma0, "r": self.r,
                "clamped": self.clamped}


@dataclass
class AcvfEstimate:
    mean: float
    gamma: np.ndarray  # lags 0..r, divisor n
    n: int = 0


@dataclass
class SigmaEstimate:
    sigma: np.ndarray
    truncation: int
    sigma_star: Optional[np.ndarray] = field(default=None, repr=False)


def sample_acvf(w, r: int, mean: Optional[float] = None) -> AcvfEstimate:
    """Mean and autocovariances ``(1/n) sum_{i<=n-h} (w_i - m)(w_{i+h} - m)`` for h = 0..r.

    ``mean`` replaces the sample mean when the true mean is known.
    """
    w = np.asarray(w, dtype=float)
    n = w.shape[0]
    if r < 0 or r >= n:
        raise InsufficientDataError(f"need more than {r} observations, got {n}")
    # fsum keeps the mean of a constant series exact
    m = math.fsum(w) / n if mean is None else float(mean)
    c = w - m
    gamma = np.array([c[: n - h] @ c[h:] for h in range(r + 1)]) / n
    return AcvfEstimate(m, gamma, n)


def toeplitz_acvf(gamma) -> np.ndarray:
    """Symmetric Toeplitz matrix ``(gamma(|i-j|))``."""
    return linalg.toeplitz(np.asarray(gamma, dtype=float))


def yule_walker(acvf, r: int) -> np.ndarray:
    """AR(r) coefficients from ``Gamma a = (gamma(1), .., gamma(r))``.

    Accepts an :class:`AcvfEstimate` or a plain sequence gamma(0..r).
    """
    gamma = np.asarray(acvf.gamma if isinstance(acvf, AcvfEstimate) else acvf, dtype=float)
    if gamma.shape[0] < r + 1:
        raise InsufficientDataError(f"need autocovariances up to lag {r}")
    big = toeplitz_acvf(gamma[:r])
    ev = np.linalg.eigvalsh(big)
    if ev[0] <= 0 or ev[-1] / ev[0] > COND_MAX:
        raise DegenerateAutocovarianceError(
            f"degenerate autocovariance: Toeplitz eigenvalues in [{ev[0]:.3g}, {ev[-1]:.3g}]"
        )
    return linalg.solve(big, gamma[1 : r + 1], assume_a="pos")


def ar_residuals(w, mu: float, a) -> np.ndarray:
    """``U_i = w~_{i+r} - sum_j a_j w~_{i+r-j}`` for i = 1..n-r, with w~ = w - mu."""
    c = np.asarray(w, dtype=float) - mu
    a = np.asarray(a, dtype=float)
    r, n = len(a), len(c)
    u = c[r:].copy()
    for j in range(1, r + 1):
        u -= a[j - 1] * c[r - j : n - j]
    return u


def _design(c: np.ndarray, r: int):
    n = len(c)
    x = np.column_stack([c[r - j : n - j] for j in range(1, r + 1)])
    return x, c[r:]


def project_stationary(a, margin: float = ROOT_MARGIN):
    """Shrink ``a_j -> a_j lam^j`` so every root of ``1 - sum a_j z^j`` has modulus >= margin.

    Returns ``(a, changed)``.  Scaling by ``lam^j`` divides all roots by ``lam``.
    """
    a = np.asarray(a, dtype=float)
    # sum |a_j| m^j < 1 already rules out roots with |z| <= m
    if np.sum(np.abs(a) * margin ** np.arange(1, len(a) + 1)) < 1.0:
        return a.copy(), False
    # roots of 1 - a_1 z - ... - a_r z^r; np.roots wants highest degree first
    coeffs = np.concatenate((-a[::-1], [1.0]))
    while coeffs.size > 1 and coeffs[0] == 0.0:
        coeffs = coeffs[1:]
    if coeffs.size <= 1:
        return a.copy(), False
    rmin = float(np.min(np.abs(np.roots(coeffs))))
    if rmin >= margin:
        return a.copy(), False
    lam = rmin / margin
    return a * lam ** np.arange(1, len(a) + 1), True


def aux_estimate(returns, r: int, method: str = "YW") -> AuxParams:
    """Estimate ``pi = (mu, a, gamma(0))`` from returns (squares are taken here).

    ``returns`` is a :class:`~cogarch_ii.cogarch.ReturnsSeries` or an array of returns.
    """
    g = np.asarray(getattr(returns, "values", returns), dtype=float)
    return aux_from_squares(g * g, r, method)


def aux_from_squares(w, r: int, method: str = "YW") -> AuxParams:
    """As :func:`aux_estimate`, for an already squared series ``w``."""
    w = np.asarray(w, dtype=float)
    n = len(w)
    if r < 2:
        raise ValueError("the auxiliary AR order must be at least 2")
    if n <= 2 * r:
        raise InsufficientDataError(f"need n > 2r, got n={n}, r={r}")
    acvf = sample_acvf(w, r)
    method = method.upper()
    if method == "YW":
        a = yule_walker(acvf, r)
    elif method == "LS":
        x, y = _design(w - acvf.mean, r)
        xtx = x.T @ x
        ev = np.linalg.eigvalsh(xtx)
        if ev[0] <= 0 or ev[-1] / ev[0] > COND_MAX:
            raise DegenerateAutocovarianceError("degenerate autocovariance: singular LS design")
        a = linalg.solve(xtx, x.T @ y, assume_a="pos")
    else:
        raise ValueError(f"method must be 'YW' or 'LS', got {method!r}")
    return _clamp(AuxParams(acvf.mean, a, float(acvf.gamma[0])))


def _clamp(p: AuxParams) -> AuxParams:
    a, hit = project_stationary(p.a)
    mu = min(max(p.mu, -1.0 / EPS), 1.0 / EPS)
    g0 = min(max(p.gamma0, EPS), 1.0 / EPS)
    hit = hit or mu != p.mu or g0 != p.gamma0
    if hit:
        warnings.warn("auxiliary estimate projected onto the compact parameter set", ClampWarning, stacklevel=3)
    return AuxParams(mu, a, g0, clamped=hit)


def default_truncation(n: int) -> int:
    return int(math.ceil(10.0 * math.log10(n)))


def estimate_sigma_star(w, pi_hat: AuxParams, L: Optional[int] = None) -> SigmaEstimate:
    """Plug-in long-run covariance of the auxiliary estimator.

    Builds ``C_k = (w~_k, U_k w~_{k+r-1}, .., U_k w~_k, w~_k^2 - gamma0)``,
    sums lagged cross-moment matrices up to ``L`` (symmetrised) and returns
    the sandwich ``B Sigma* B^T`` with ``B = diag(1, Gamma^-1, 1)``.
    """
    w = np.asarray(w, dtype=float)
    n, r = len(w), pi_hat.r
    if L is None:
        L = default_truncation(n)
    m = n - r
    if L < 0 or L > m - 1:
        raise InsufficientDataError(f"truncation L={L} must lie in [0, {m - 1}]")
    c = w - pi_hat.mu
    u = ar_residuals(w, pi_hat.mu, pi_hat.a)
    cols = [c[:m]]
    for j in range(1, r + 1):
        cols.append(u * c[r - j : n - j])
    cols.append(c[:m] ** 2 - pi_hat.gamma0)
    C = np.column_stack(cols)
    star = C.T @ C / m
    for i in range(1, L + 1):
        mi = C[: m - i].T @ C[i:] / (m - i)
        star += mi + mi.T
    star = 0.5 * (star + star.T)
    gamma = sample_acvf(w, r - 1).gamma
    B = np.zeros((r + 2, r + 2))
    B[0, 0] = B[-1, -1] = 1.0
    B[1:-1, 1:-1] = np.linalg.inv(toeplitz_acvf(gamma))
    sigma = B @ star @ B.T
    sigma = 0.5 * (sigma + sigma.T)
    return SigmaEstimate(sigma, L, star)
