import os
import subprocess
import sys

import numpy as np
import pytest

from cogarch_ii import _kernels
from cogarch_ii._accel import HAVE_NUMBA
from cogarch_ii.cogarch import SimConfig, simulate_returns

from conftest import THETA0


def _flag_env(value):
    env = dict(os.environ)
    env["COGARCH_II_DISABLE_NUMBA"] = value
    return env


@pytest.mark.parametrize("value, expected", [("1", "False"), ("0", str(HAVE_NUMBA))])
def test_env_flag_selects_backend(value, expected):
    code = "from cogarch_ii import _kernels; print(_kernels.USE_NUMBA)"
    out = subprocess.run([sys.executable, "-c", code], env=_flag_env(value), capture_output=True, text=True,
                         check=True)
    assert out.stdout.strip() == expected


def test_numpy_backend_reproduces_simulation(vg, tmp_path):
    cfg = SimConfig(n=500, substeps=10, burn_in=50, seed=(12, 1))
    here, _ = simulate_returns(THETA0, vg, cfg)
    out = tmp_path / "g.npy"
    code = (
        "import numpy as np\n"
        "from cogarch_ii.cogarch import SimConfig, simulate_returns\n"
        "from cogarch_ii.levy import CogarchParams, VarianceGamma\n"
        "g, _ = simulate_returns(CogarchParams(0.04, 0.053, 0.038), VarianceGamma(1.0),\n"
        "                        SimConfig(n=500, substeps=10, burn_in=50, seed=(12, 1)))\n"
        f"np.save({str(out)!r}, g.values)\n"
    )
    subprocess.run([sys.executable, "-c", code], env=_flag_env("1"), check=True)
    np.testing.assert_allclose(np.load(out), here.values, rtol=1e-10, atol=0)


def test_path_without_brownian_part():
    jumps = np.random.default_rng(2).normal(0, 0.1, 400)
    for use in (True, False):
        g, v, inner = _kernels.path(jumps, None, 0.999, 20.0, 0.04, 20.0, 4, False, use_numba=use)
        assert g.shape == (100,) and v.shape == (100,) and inner.size == 0
