"""Lattice of candidate parameters restricted to ``Psi(4) < 0``.

``Psi`` does not depend on ``beta``, so the filter acts on ``(eta, phi)``
pairs only and the ``beta`` axis is kept separate: simulation-based
estimators never re-simulate along it.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Iterator, Sequence

import numpy as np

from ..errors import EmptyGridError
from ..levy import CogarchParams, LevyModel, psi

__all__ = ["ParameterGrid", "build_grid", "load_grid", "axis_values", "default_bounds"]

Box = Sequence[Sequence[float]]


def axis_values(lo: float, hi: float, step: float) -> np.ndarray:
    """``lo + i * step`` for all i with value <= hi (rounded to 12 decimals)."""
    if not step > 0:
        raise ValueError("grid spacing must be positive")
    if not 0 < lo <= hi:
        raise ValueError(f"need 0 < lo <= hi, got ({lo}, {hi})")
    count = int(math.floor((hi - lo) / step + 1e-9)) + 1
    return np.round(lo + step * np.arange(count), 12)


def default_bounds(theta: CogarchParams, spacing: Sequence[float], factor: float = 3.0):
    """From one spacing above zero up to ``factor`` times the true value, per axis."""
    return tuple((float(d), float(factor * v)) for d, v in zip(spacing, theta.as_array()))


@dataclass(frozen=True)
class ParameterGrid:
    betas: np.ndarray
    eta_phi: np.ndarray  # (P, 2) feasible pairs, sorted lexicographically
    psi4: np.ndarray  # Psi(4) at each pair
    spacing: tuple
    bounds: tuple
    lattice_size: int

    def __len__(self) -> int:
        return len(self.betas) * len(self.eta_phi)

    @property
    def n_filtered(self) -> int:
        return self.lattice_size - len(self)

    def __iter__(self) -> Iterator[CogarchParams]:
        for b in self.betas:
            for e, f in self.eta_phi:
                yield CogarchParams(b, e, f)

    @property
    def points(self) -> list:
        return list(self)

    def as_array(self) -> np.ndarray:
        """All points as an ``(N, 3)`` array in lexicographic (beta, eta, phi) order."""
        nb, npair = len(self.betas), len(self.eta_phi)
        out = np.empty((nb * npair, 3))
        out[:, 0] = np.repeat(self.betas, npair)
        out[:, 1:] = np.tile(self.eta_phi, (nb, 1))
        return out

    def to_dict(self) -> dict:
        return {"bounds": [list(b) for b in self.bounds], "spacing": list(self.spacing)}


def build_grid(bounds: Box, spacing: Sequence[float], model: LevyModel) -> ParameterGrid:
    """Rectangular lattice over ``bounds`` with the given spacing, filtered by ``Psi(4) < 0``."""
    if len(bounds) != 3 or len(spacing) != 3:
        raise ValueError("bounds and spacing need one entry per (beta, eta, phi)")
    axes = [axis_values(lo, hi, d) for (lo, hi), d in zip(bounds, spacing)]
    betas, etas, phis = axes
    ee, ff = np.meshgrid(etas, phis, indexing="ij")
    pairs = np.column_stack([ee.ravel(), ff.ravel()])
    p4 = np.array([psi(model, CogarchParams(1.0, e, f), 4) for e, f in pairs])
    keep = p4 < 0
    if not keep.any():
        raise EmptyGridError(f"empty grid: no (eta, phi) in bounds {bounds} satisfies Psi(4) < 0")
    return ParameterGrid(
        betas=betas,
        eta_phi=pairs[keep],
        psi4=p4[keep],
        spacing=tuple(float(d) for d in spacing),
        bounds=tuple((float(lo), float(hi)) for lo, hi in bounds),
        lattice_size=len(betas) * len(pairs),
    )


def load_grid(path, model: LevyModel) -> ParameterGrid:
    with open(path) as fh:
        d = json.load(fh)
    return build_grid(d["bounds"], d["spacing"], model)
