import csv
import json

import numpy as np
import pytest

from cogarch_ii.bench.grid import axis_values, build_grid, default_bounds, load_grid
from cogarch_ii.bench.study import StudyConfig, _aggregate, metrics, qq_table, run_study, write_outputs
from cogarch_ii.errors import CogarchError, ConfigError, EmptyGridError
from cogarch_ii.levy import psi

from conftest import THETA0, THETA1, THETA2

TINY = dict(n=1_000, reps=4, r=5, K=2, methods=("mm", "iie-star", "iie-sim"), master_seed=(11,),
            bounds=((0.02, 0.06), (0.046, 0.060), (0.032, 0.044)), spacing=(0.01, 0.004, 0.004),
            substeps=5, burn_in=100)


def test_axis_values():
    np.testing.assert_array_equal(axis_values(0.002, 0.01, 0.002), [0.002, 0.004, 0.006, 0.008, 0.01])
    assert len(axis_values(0.002, 0.12, 0.002)) == 60
    with pytest.raises(ValueError):
        axis_values(0.1, 0.2, 0.0)


def test_default_grid_counts(vg):
    bounds = default_bounds(THETA0, (0.002,) * 3)
    assert bounds[0] == (0.002, pytest.approx(0.12))
    grid = build_grid(bounds, (0.002,) * 3, vg)
    n_eta = len(axis_values(*bounds[1], 0.002))
    n_phi = len(axis_values(*bounds[2], 0.002))
    assert grid.lattice_size == 60 * n_eta * n_phi
    assert len(grid) == 60 * len(grid.eta_phi)
    assert len(grid) + grid.n_filtered == grid.lattice_size
    assert np.all(grid.psi4 < 0)
    pts = grid.as_array()
    assert all(psi(vg, p, 4) < 0 for p in [grid.points[i] for i in range(0, len(grid), 9973)])
    assert np.array_equal(pts[np.lexsort(pts.T[::-1])], pts)


def test_reference_points_feasible(vg):
    for theta in (THETA0, THETA1, THETA2):
        assert psi(vg, theta, 4) < 0


def test_empty_grid(vg):
    with pytest.raises(EmptyGridError, match="empty grid"):
        build_grid(((0.01, 0.02), (0.001, 0.002), (0.5, 0.6)), (0.01, 0.001, 0.1), vg)


def test_load_grid(vg, tmp_path):
    p = tmp_path / "g.json"
    p.write_text(json.dumps({"bounds": TINY["bounds"], "spacing": TINY["spacing"]}))
    g = load_grid(p, vg)
    assert len(g.betas) == 5 and len(g) > 0


def test_table_arithmetic():
    m = metrics(np.array([[0.04698, 0.053, 0.038]]), np.array([0.04, 0.053, 0.038]))
    assert m["rb"]["beta"] == pytest.approx(0.00698 / 0.04, rel=1e-12)
    # a mean printed as 0.04698 lies in [0.046975, 0.046985), which covers RB 0.17457
    lo, hi = (metrics(np.array([[b, 0.053, 0.038]]), np.array([0.04, 0.053, 0.038]))["rb"]["beta"]
              for b in (0.046975, 0.046985))
    assert lo <= 0.17457 < hi
    rmse = np.sqrt(0.02032**2 + (0.04698 - 0.04) ** 2)
    assert rmse == pytest.approx(0.02148, abs=5e-5)


def test_single_rep_metrics():
    truth = np.array([0.04, 0.053, 0.038])
    est = np.array([[0.05, 0.05, 0.04]])
    m = metrics(est, truth)
    assert all(v == 0 for v in m["std"].values())
    np.testing.assert_allclose([m["rmse"][c] for c in ("beta", "eta", "phi")], np.abs(est[0] - truth))


def test_rmse_identity():
    rng = np.random.default_rng(0)
    truth = np.array([0.04, 0.053, 0.038])
    m = metrics(truth + rng.normal(0.01, 0.02, size=(50, 3)), truth)
    for c in ("beta", "eta", "phi"):
        bias = m["mean"][c] - truth[("beta", "eta", "phi").index(c)]
        assert m["rmse"][c] ** 2 == pytest.approx(m["std"][c] ** 2 + bias**2, abs=1e-10)


def test_qq_monotone():
    est = np.random.default_rng(1).standard_t(3, size=(40, 3))
    rows = qq_table(est, "mm")
    assert len(rows) == 120
    for c in ("beta", "eta", "phi"):
        s = [r["sample_quantile"] for r in rows if r["component"] == c]
        t = [r["theoretical_quantile"] for r in rows if r["component"] == c]
        assert np.all(np.diff(s) >= 0) and np.all(np.diff(t) > 0)


def test_config_validation(tmp_path):
    with pytest.raises(ConfigError, match="unknown config keys"):
        StudyConfig.from_dict({"reps": 3, "colour": "blue"})
    with pytest.raises(ConfigError):
        StudyConfig(n=100, r=70)
    with pytest.raises(ConfigError):
        StudyConfig(reps=0)
    with pytest.raises(ConfigError):
        StudyConfig(methods=("mm", "opb"))
    p = tmp_path / "c.json"
    p.write_text(json.dumps({"reps": 3, "theta_true": [0.04, 0.053, 0.038], "model": {"kind": "vg", "C": 1.0}}))
    cfg = StudyConfig.from_file(p)
    assert cfg.reps == 3 and cfg.theta_true == THETA0
    assert StudyConfig.from_dict(cfg.to_dict()).to_dict() == cfg.to_dict()
    p.write_text("[1, 2]")
    with pytest.raises(ConfigError):
        StudyConfig.from_file(p)


def test_default_config():
    cfg = StudyConfig()
    assert (cfg.n, cfg.reps, cfg.r, cfg.K) == (10_000, 200, 70, 20)
    assert cfg.bounds[1] == (0.002, pytest.approx(0.159))


@pytest.fixture(scope="module")
def tiny_reports():
    cfg = StudyConfig(**TINY)
    return run_study(cfg, threads=1), run_study(cfg, threads=2)


def test_study_independent_of_threads(tiny_reports):
    a, b = tiny_reports
    assert a.to_json() == b.to_json()
    assert set(a.rows) == {"mm", "iie-star", "iie-sim"}


def test_study_outputs(tiny_reports, tmp_path):
    report = tiny_reports[0]
    paths = write_outputs(report, tmp_path / "out")
    data = json.loads(paths["report"].read_text())
    assert data["n_excluded"] + data["n_included"] == 4
    with open(paths["estimates"]) as fh:
        rows = list(csv.DictReader(fh))
    assert len(rows) == 12
    assert list(rows[0]) == ["rep", "method", "beta", "eta", "phi", "objective", "feasible"]
    with open(paths["qq"]) as fh:
        header = next(csv.reader(fh))
    assert header == ["method", "component", "theoretical_quantile", "sample_quantile"]


def test_all_excluded_is_an_error():
    cfg = StudyConfig(**{**TINY, "reps": 2, "methods": ("mm",)})
    bad = [{"mm": {"theta": [1.0, 1.0, 1.0], "objective": 0.0, "feasible": False, "error": None}}] * 2
    with pytest.raises(CogarchError, match="all replications"):
        _aggregate(cfg, bad, None)


def test_joint_exclusion():
    cfg = StudyConfig(**{**TINY, "reps": 3, "methods": ("mm", "iie-star")})
    ok = {"theta": [0.04, 0.05, 0.03], "objective": 0.0, "feasible": True, "error": None}
    bad = {**ok, "feasible": False}
    res = [{"mm": ok, "iie-star": ok}, {"mm": ok, "iie-star": bad}, {"mm": bad, "iie-star": ok}]
    report = _aggregate(cfg, res, None)
    assert report.excluded == [1, 2]
    assert report.rows["mm"]["std"]["beta"] == 0.0
