"""Driving Lévy processes, their even jump moments and the Laplace exponent.

Every model is normalised to E L_1 = 0 and Var L_1 = 1, with a symmetric
jump law so that the third jump moment vanishes.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Union

import numpy as np
from scipy import integrate, special

from .errors import MomentUndefinedError, UnsupportedModelError
from .rng import Seed, stream

__all__ = [
    "CogarchParams",
    "LevyModel",
    "VarianceGamma",
    "CompoundPoisson",
    "PureBrownian",
    "Rademacher",
    "NormalJumps",
    "StudentTJumps",
    "levy_moment",
    "psi",
    "sample_increments",
    "model_from_dict",
]

QUAD_TOL = 1e-10


@dataclass(frozen=True, order=True)
class CogarchParams:
    """COGARCH(1,1) parameter ``(beta, eta, phi)``; all strictly positive."""

    beta: float
    eta: float
    phi: float

    def __post_init__(self):
        for name in ("beta", "eta", "phi"):
            v = getattr(self, name)
            if not (np.isfinite(v) and v > 0):
                raise ValueError(f"{name} must be positive and finite, got {v!r}")
            object.__setattr__(self, name, float(v))

    @classmethod
    def from_array(cls, x) -> "CogarchParams":
        b, e, f = (float(v) for v in x)
        return cls(b, e, f)

    def as_array(self) -> np.ndarray:
        return np.array([self.beta, self.eta, self.phi])

    def with_beta(self, beta: float) -> "CogarchParams":
        return CogarchParams(beta, self.eta, self.phi)

    def to_dict(self) -> dict:
        return {"beta": self.beta, "eta": self.eta, "phi": self.phi}


# --------------------------------------------------------------------------
# jump laws for compound Poisson drivers


@dataclass(frozen=True)
class Rademacher:
    """Jumps of size +-scale with probability 1/2 each."""

    scale: float = 1.0

    def abs_moment(self, k: int) -> float:
        return self.scale ** (2 * k)

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        return self.scale * (2.0 * rng.integers(0, 2, size=size) - 1.0)


@dataclass(frozen=True)
class NormalJumps:
    """Centred normal jumps with standard deviation ``scale``."""

    scale: float = 1.0

    def abs_moment(self, k: int) -> float:
        # E Z^{2k} = (2k-1)!!
        return self.scale ** (2 * k) * float(special.factorial2(2 * k - 1, exact=True))

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        return self.scale * rng.standard_normal(size)


@dataclass(frozen=True)
class StudentTJumps:
    """Scaled Student-t jumps; the 2k-th moment exists only for 2k < df."""

    df: float
    scale: float = 1.0

    def abs_moment(self, k: int) -> float:
        if 2 * k >= self.df:
            raise MomentUndefinedError(
                f"moment undefined: E|J|^{2 * k} diverges for Student-t jumps with df={self.df}"
            )
        nu = self.df
        log_m = (
            k * math.log(nu)
            + special.gammaln(k + 0.5)
            + special.gammaln(nu / 2 - k)
            - 0.5 * math.log(math.pi)
            - special.gammaln(nu / 2)
        )
        return self.scale ** (2 * k) * math.exp(log_m)

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        return self.scale * rng.standard_t(self.df, size=size)


JumpLaw = Union[Rademacher, NormalJumps, StudentTJumps]


# --------------------------------------------------------------------------
# Lévy models


class LevyModel:
    """Base class.  Subclasses define ``c_L``, ``jump_moment`` and ``sample_parts``."""

    c_L: float = 0.0
    has_jumps: bool = True

    def jump_moment(self, k: int) -> float:
        raise NotImplementedError

    def sample_parts(self, rng: np.random.Generator, delta: float, count: int):
        """Return ``(jump_part, brownian_part)`` increments over ``count`` steps of ``delta``.

        ``brownian_part`` is ``None`` when the model has no Gaussian component.
        """
        raise NotImplementedError

    def psi_quad(self, eta: float, phi: float, p: float) -> float:
        raise UnsupportedModelError(
            f"non-integer Laplace exponent is only available for VarianceGamma, not {type(self).__name__}"
        )

    def to_dict(self) -> dict:
        raise NotImplementedError

    def check_variance(self) -> float:
        """Total variance c_L + m_2; equal to 1 for a valid model."""
        return self.c_L + (self.jump_moment(1) if self.has_jumps else 0.0)

    def _brownian(self, rng, delta, count):
        if self.c_L == 0.0:
            return None
        return math.sqrt(self.c_L * delta) * rng.standard_normal(count)


@dataclass(frozen=True)
class VarianceGamma(LevyModel):
    """Symmetric VG process with Lévy density ``C/|x| exp(-sqrt(2C)|x|)``.

    With ``c_L > 0`` the jumps are shrunk by ``sqrt(1 - c_L)`` so that the
    total variance stays one.
    """

    C: float = 1.0
    c_L: float = 0.0

    def __post_init__(self):
        if not self.C > 0:
            raise ValueError(f"C must be positive, got {self.C}")
        if not 0.0 <= self.c_L < 1.0:
            raise ValueError(f"c_L must lie in [0, 1), got {self.c_L}")

    @property
    def jump_scale(self) -> float:
        return math.sqrt(1.0 - self.c_L)

    def jump_moment(self, k: int) -> float:
        return self.jump_scale ** (2 * k) * math.factorial(2 * k - 1) / (2.0 * self.C) ** (k - 1)

    def sample_parts(self, rng, delta, count):
        shape = self.C * delta
        scale = self.jump_scale / math.sqrt(2.0 * self.C)
        up = rng.gamma(shape, scale, size=count)
        down = rng.gamma(shape, scale, size=count)
        return up - down, self._brownian(rng, delta, count)

    def density(self, x):
        """Lévy density of the (possibly rescaled) jump part."""
        x = np.abs(np.asarray(x, dtype=float))
        s = self.jump_scale
        return self.C / x * np.exp(-math.sqrt(2.0 * self.C) * x / s)

    def psi_quad(self, eta, phi, p):
        s2 = self.jump_scale**2
        lam = math.sqrt(2.0 * self.C)

        def f(y):
            if y == 0.0:
                return 0.0
            return math.expm1(p * math.log1p(phi * s2 * y * y)) / y * math.exp(-lam * y)

        val, _ = integrate.quad(f, 0.0, np.inf, epsabs=QUAD_TOL, epsrel=1e-12, limit=400)
        return -p * eta + 2.0 * self.C * val

    def to_dict(self):
        return {"kind": "vg", "C": self.C, "c_L": self.c_L}


@dataclass(frozen=True)
class CompoundPoisson(LevyModel):
    """Compound Poisson jumps (plus optional Brownian part) with symmetric law.

    ``rate * E J^2 + c_L`` must equal one; use :meth:`standardized` to pick
    the jump scale automatically.
    """

    rate: float
    jumps: JumpLaw = field(default_factory=Rademacher)
    c_L: float = 0.0

    def __post_init__(self):
        if not self.rate > 0:
            raise ValueError("rate must be positive")
        if not 0.0 <= self.c_L < 1.0:
            raise ValueError(f"c_L must lie in [0, 1), got {self.c_L}")
        total = self.c_L + self.rate * self.jumps.abs_moment(1)
        if abs(total - 1.0) > 1e-10:
            raise ValueError(f"Var L_1 must be 1, got {total}")

    @classmethod
    def standardized(cls, rate: float, law: str = "rademacher", c_L: float = 0.0, df: float = 10.0):
        unit = {"rademacher": Rademacher(1.0), "normal": NormalJumps(1.0), "student_t": StudentTJumps(df, 1.0)}[law]
        scale = math.sqrt((1.0 - c_L) / (rate * unit.abs_moment(1)))
        jumps = type(unit)(df, scale) if law == "student_t" else type(unit)(scale)
        return cls(rate=rate, jumps=jumps, c_L=c_L)

    def jump_moment(self, k: int) -> float:
        return self.rate * self.jumps.abs_moment(k)

    def sample_parts(self, rng, delta, count):
        counts = rng.poisson(self.rate * delta, size=count)
        total = int(counts.sum())
        sizes = self.jumps.sample(rng, total)
        idx = np.repeat(np.arange(count), counts)
        jumps = np.bincount(idx, weights=sizes, minlength=count).astype(float)
        return jumps, self._brownian(rng, delta, count)

    def to_dict(self):
        law = self.jumps
        d = {"kind": "cp", "rate": self.rate, "c_L": self.c_L, "law": type(law).__name__, "scale": law.scale}
        if isinstance(law, StudentTJumps):
            d["df"] = law.df
        return d


@dataclass(frozen=True)
class PureBrownian(LevyModel):
    """Standard Brownian motion.  Degenerate driver: no jumps, so the
    volatility is deterministic; violates the requirement c_L < 1 and is
    only meant for plumbing checks."""

    c_L: float = 1.0
    has_jumps = False

    def jump_moment(self, k: int) -> float:
        return 0.0

    def sample_parts(self, rng, delta, count):
        return np.zeros(count), math.sqrt(delta) * rng.standard_normal(count)

    def to_dict(self):
        return {"kind": "bm"}


def model_from_dict(d: dict) -> LevyModel:
    d = dict(d)
    kind = d.pop("kind", "vg")
    if kind == "vg":
        return VarianceGamma(C=float(d.get("C", 1.0)), c_L=float(d.get("c_L", 0.0)))
    if kind == "cp":
        laws = {"Rademacher": Rademacher, "NormalJumps": NormalJumps}
        name = d.get("law", "Rademacher")
        if name == "StudentTJumps":
            law = StudentTJumps(float(d["df"]), float(d["scale"]))
        else:
            law = laws[name](float(d.get("scale", 1.0)))
        return CompoundPoisson(rate=float(d["rate"]), jumps=law, c_L=float(d.get("c_L", 0.0)))
    if kind == "bm":
        return PureBrownian()
    raise ValueError(f"unknown Lévy model kind {kind!r}")


# --------------------------------------------------------------------------
# operations


def levy_moment(model: LevyModel, k: int) -> float:
    """Even jump moment ``m_{2k} = int x^{2k} nu(dx)``."""
    if int(k) != k or k < 1:
        raise ValueError(f"k must be a positive integer, got {k}")
    return model.jump_moment(int(k))


def psi(model: LevyModel, theta, p: float, method: str = "auto") -> float:
    """Laplace exponent ``Psi_theta(p) = -p*eta + int((1+phi x^2)^p - 1) nu(dx)``.

    Integer ``p`` uses the binomial expansion in the even jump moments;
    other ``p`` (or ``method="quad"``) integrates against the VG density
    with absolute tolerance 1e-10.
    """
    if p < 0:
        raise ValueError("p must be nonnegative")
    if p == 0:
        return 0.0
    eta, phi = theta.eta, theta.phi
    if method == "quad" or (method == "auto" and float(p) != int(p)):
        return model.psi_quad(eta, phi, float(p))
    p = int(p)
    total = -p * eta
    if model.has_jumps:
        for k in range(1, p + 1):
            total += math.comb(p, k) * phi**k * model.jump_moment(k)
    return total


def sample_increments(model: LevyModel, delta: float, count: int, seed: Seed) -> np.ndarray:
    """I.i.d. increments of L over steps of length ``delta``; deterministic in ``seed``."""
    if count < 1 or delta <= 0:
        raise ValueError("count must be >= 1 and delta > 0")
    jumps, bm = model.sample_parts(stream(seed), delta, int(count))
    return jumps if bm is None else jumps + bm
