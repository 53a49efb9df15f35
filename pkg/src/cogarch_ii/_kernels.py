"""Hot loops of the volatility recursion.

Each kernel exists twice: a sequential numba loop and a numpy version that
solves the same affine recursion ``v[j+1] = A[j] v[j] + B[j]`` blockwise via
cumulative log-products (the discrete form of
``sigma^2_t = (beta int e^{Y_s} ds + sigma^2_0) e^{-Y_t}``).  The two agree
to rounding; :data:`USE_NUMBA` picks one at import time.

All kernels work at ``beta = 1``: callers rescale by ``beta`` afterwards.
Per inner step of length ``dt`` with increment ``x = jump + brownian``::

    pre  = decay * v + level * (1 - decay)     # decay = exp(-eta dt), level = 1/eta
    G   += sqrt(pre) * x                        # left-limit volatility
    v    = pre * (1 + phi * jump**2)
"""
from __future__ import annotations

import numpy as np

from ._accel import USE_NUMBA, njit

_MAX_LOG = 600.0
_BLOCK = 4096


# --------------------------------------------------------------------------
# numba


@njit(cache=True, nogil=True)
def _path_nb(jumps, brownian, decay, level, phi, v0, substeps, record_inner):
    n_steps = jumps.shape[0]
    n_obs = n_steps // substeps
    has_bm = brownian.shape[0] == n_steps
    g = np.zeros(n_obs)
    v_obs = np.empty(n_obs)
    v_inner = np.empty(n_steps if record_inner else 0)
    drift = level * (1.0 - decay)
    v = v0
    j = 0
    for i in range(n_obs):
        acc = 0.0
        for _ in range(substeps):
            x = jumps[j]
            pre = decay * v + drift
            if has_bm:
                acc += np.sqrt(pre) * (x + brownian[j])
            else:
                acc += np.sqrt(pre) * x
            v = pre * (1.0 + phi * x * x)
            if record_inner:
                v_inner[j] = v
            j += 1
        g[i] = acc
        v_obs[i] = v
    return g, v_obs, v_inner


@njit(cache=True, nogil=True)
def _grad_nb(jumps, decay, level, dlevel, dt, phi, v0, dv0_eta, dv0_phi):
    n = jumps.shape[0]
    v_out = np.empty(n)
    de_out = np.empty(n)
    dp_out = np.empty(n)
    v = v0
    de = dv0_eta
    dp = dv0_phi
    drift = level * (1.0 - decay)
    ddrift = dlevel * (1.0 - decay) + level * dt * decay
    for j in range(n):
        x2 = jumps[j] * jumps[j]
        pre = decay * v + drift
        dpre_e = decay * de - dt * decay * v + ddrift
        dpre_p = decay * dp
        fac = 1.0 + phi * x2
        v = pre * fac
        de = dpre_e * fac
        # x2 / fac is the increment of K_s(phi)
        dp = dpre_p * fac + v * (x2 / fac)
        v_out[j] = v
        de_out[j] = de
        dp_out[j] = dp
    return v_out, de_out, dp_out


# --------------------------------------------------------------------------
# numpy


def affine_scan(a: np.ndarray, b: np.ndarray, x0: float) -> np.ndarray:
    """Solve ``x[j+1] = a[j] x[j] + b[j]`` for ``j = 0..N-1``; returns ``x[1..N]``.

    ``a`` must be strictly positive.  Blocks are cut so the running
    log-product stays within +-600.
    """
    n = a.shape[0]
    out = np.empty(n)
    loga = np.log(a)
    s = 0
    x = float(x0)
    while s < n:
        stop = min(n, s + _BLOCK)
        logp = np.cumsum(loga[s:stop])
        over = np.flatnonzero(np.abs(logp) > _MAX_LOG)
        if over.size:
            stop = s + max(int(over[0]), 1)
            logp = logp[: stop - s]
        p = np.exp(logp)
        blk = p * (x + np.cumsum(b[s:stop] / p))
        out[s:stop] = blk
        x = blk[-1]
        s = stop
    return out


def _path_np(jumps, brownian, decay, level, phi, v0, substeps, record_inner):
    n_obs = jumps.shape[0] // substeps
    jumps = jumps[: n_obs * substeps]
    fac = 1.0 + phi * jumps * jumps
    drift = level * (1.0 - decay)
    v_post = affine_scan(decay * fac, drift * fac, v0)
    v_prev = np.empty_like(v_post)
    v_prev[0] = v0
    v_prev[1:] = v_post[:-1]
    pre = decay * v_prev + drift
    x = jumps if brownian.shape[0] != jumps.shape[0] else jumps + brownian[: jumps.shape[0]]
    g = (np.sqrt(pre) * x).reshape(n_obs, substeps).sum(axis=1)
    v_obs = v_post[substeps - 1 :: substeps].copy()
    return g, v_obs, (v_post if record_inner else np.empty(0))


def _grad_np(jumps, decay, level, dlevel, dt, phi, v0, dv0_eta, dv0_phi):
    x2 = jumps * jumps
    fac = 1.0 + phi * x2
    drift = level * (1.0 - decay)
    a = decay * fac
    v = affine_scan(a, drift * fac, v0)
    v_prev = np.concatenate(([v0], v[:-1]))
    ddrift = dlevel * (1.0 - decay) + level * dt * decay
    de = affine_scan(a, fac * (ddrift - dt * decay * v_prev), dv0_eta)
    dp = affine_scan(a, v * (x2 / fac), dv0_phi)
    return v, de, dp


_EMPTY = np.empty(0)


def path(jumps, brownian, decay, level, phi, v0, substeps, record_inner=False, use_numba=None):
    """Run the recursion over ``len(jumps)`` inner steps; see module docstring."""
    use_numba = USE_NUMBA if use_numba is None else use_numba
    jumps = np.ascontiguousarray(jumps, dtype=np.float64)
    bm = _EMPTY if brownian is None else np.ascontiguousarray(brownian, dtype=np.float64)
    f = _path_nb if use_numba else _path_np
    return f(jumps, bm, float(decay), float(level), float(phi), float(v0), int(substeps), bool(record_inner))


def grad(jumps, decay, level, dlevel, dt, phi, v0, dv0_eta, dv0_phi, use_numba=None):
    """Volatility path and its (eta, phi) tangents at every inner step."""
    use_numba = USE_NUMBA if use_numba is None else use_numba
    jumps = np.ascontiguousarray(jumps, dtype=np.float64)
    f = _grad_nb if use_numba else _grad_np
    return f(jumps, float(decay), float(level), float(dlevel), float(dt), float(phi),
             float(v0), float(dv0_eta), float(dv0_phi))
