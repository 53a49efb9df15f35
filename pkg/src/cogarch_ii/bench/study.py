"""Monte Carlo replication study.

Replication ``i`` simulates its data from the stream ``(master_seed, DATA, i)``
and runs every configured estimator on it.  The simulated binding table of
``iie-sim`` is built once from ``(master_seed, SIM, k)``.  A replication is
excluded when any method fails or returns ``Psi(4) >= 0``.  Results are
collected by replication index, so the report does not depend on the
number of worker processes.
"""
from __future__ import annotations

import csv
import dataclasses
import json
import math
import os
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np
from scipy import stats

from ..aux_ar import aux_estimate
from ..cogarch import SimConfig, simulate_returns
from ..errors import CogarchError, ConfigError
from ..estimators import IIEConfig, SimTable, build_sim_table, iie_sim, iie_star, mm_estimate
from ..levy import CogarchParams, LevyModel, VarianceGamma, model_from_dict
from ..rng import DATA, as_key, child
from .grid import ParameterGrid, build_grid, default_bounds

__all__ = ["StudyConfig", "StudyReport", "run_study", "metrics", "qq_table", "write_outputs", "METHODS"]

METHODS = ("mm", "iie-star", "iie-sim")
COMPONENTS = ("beta", "eta", "phi")


@dataclass
class StudyConfig:
    theta_true: CogarchParams = field(default_factory=lambda: CogarchParams(0.04, 0.053, 0.038))
    model: LevyModel = field(default_factory=VarianceGamma)
    n: int = 10_000
    reps: int = 200
    r: int = 70
    methods: tuple = ("mm", "iie-star")
    K: int = 20
    master_seed: tuple = (2024,)
    delta: float = 1.0
    spacing: tuple = (0.002, 0.002, 0.002)
    bounds: Optional[tuple] = None
    substeps: int = 20
    burn_in: int = 500
    mm_method: str = "inversion"
    output_dir: Optional[str] = None

    def __post_init__(self):
        self.master_seed = as_key(self.master_seed)
        self.methods = tuple(self.methods)
        self.spacing = tuple(float(s) for s in self.spacing)
        if self.bounds is None:
            self.bounds = default_bounds(self.theta_true, self.spacing)
        self.bounds = tuple((float(lo), float(hi)) for lo, hi in self.bounds)
        bad = [m for m in self.methods if m not in METHODS]
        if bad:
            raise ConfigError(f"unknown methods {bad}; choose from {METHODS}")
        if self.reps < 1:
            raise ConfigError("reps must be >= 1")
        if self.n <= 2 * self.r:
            raise ConfigError(f"need n > 2r, got n={self.n}, r={self.r}")
        if self.r < 2 or self.K < 1:
            raise ConfigError("need r >= 2 and K >= 1")

    @classmethod
    def from_dict(cls, d: dict) -> "StudyConfig":
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = sorted(set(d) - known)
        if unknown:
            raise ConfigError(f"unknown config keys: {unknown}")
        d = dict(d)
        try:
            if "theta_true" in d:
                t = d["theta_true"]
                d["theta_true"] = CogarchParams(**t) if isinstance(t, dict) else CogarchParams.from_array(t)
            if "model" in d:
                d["model"] = model_from_dict(d["model"])
            return cls(**d)
        except (TypeError, ValueError) as exc:
            raise ConfigError(str(exc)) from exc

    @classmethod
    def from_file(cls, path) -> "StudyConfig":
        try:
            with open(path) as fh:
                d = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        if not isinstance(d, dict):
            raise ConfigError("config must be a JSON object")
        return cls.from_dict(d)

    def to_dict(self) -> dict:
        return {
            "theta_true": self.theta_true.to_dict(),
            "model": self.model.to_dict(),
            "n": self.n,
            "reps": self.reps,
            "r": self.r,
            "methods": list(self.methods),
            "K": self.K,
            "master_seed": list(self.master_seed),
            "delta": self.delta,
            "spacing": list(self.spacing),
            "bounds": [list(b) for b in self.bounds],
            "substeps": self.substeps,
            "burn_in": self.burn_in,
            "mm_method": self.mm_method,
        }


@dataclass
class StudyReport:
    config: dict
    rows: dict  # method -> metric -> component -> value
    excluded: list
    estimates: list  # per replication: {"rep", "method", "beta", ..., "objective", "feasible"}
    qq: list
    grid: Optional[dict] = None

    @property
    def n_excluded(self) -> int:
        return len(self.excluded)

    def to_dict(self) -> dict:
        return {
            "config": self.config,
            "grid": self.grid,
            "metrics": self.rows,
            "excluded": self.excluded,
            "n_excluded": self.n_excluded,
            "n_included": self.config["reps"] - self.n_excluded,
            "std_convention": "population (divisor = number of included replications)",
            "estimates": self.estimates,
            "qq": self.qq,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=1, allow_nan=True)


def metrics(estimates: np.ndarray, truth: np.ndarray) -> dict:
    """Mean, population Std, RMSE and relative bias per component."""
    est = np.asarray(estimates, dtype=float).reshape(-1, len(truth))
    mean = est.mean(axis=0)
    std = est.std(axis=0)
    bias = mean - truth
    rmse = np.sqrt(std**2 + bias**2)
    rb = bias / truth
    out = {}
    for name, vals in (("mean", mean), ("std", std), ("rmse", rmse), ("rb", rb)):
        out[name] = {c: float(v) for c, v in zip(COMPONENTS, vals)}
    return out


def qq_table(estimates: np.ndarray, method: str) -> list:
    """Standardised sample quantiles against normal quantiles at ``(i - 0.5) / m``."""
    est = np.asarray(estimates, dtype=float)
    m = len(est)
    theo = stats.norm.ppf((np.arange(1, m + 1) - 0.5) / m)
    rows = []
    for j, c in enumerate(COMPONENTS):
        x = np.sort(est[:, j])
        sd = x.std()
        z = (x - x.mean()) / sd if sd > 0 else np.zeros(m)
        rows += [{"method": method, "component": c, "theoretical_quantile": float(t),
                  "sample_quantile": float(s)} for t, s in zip(theo, z)]
    return rows


# --------------------------------------------------------------------------
# worker side

_STATE: dict = {}


def _init_worker(cfg: StudyConfig, grid: Optional[ParameterGrid], table: Optional[SimTable]):
    _STATE.update(cfg=cfg, grid=grid, table=table)
    warnings.simplefilter("ignore")


def _one_rep(i: int) -> dict:
    cfg: StudyConfig = _STATE["cfg"]
    out = {}
    sim = SimConfig(cfg.delta, cfg.n, cfg.substeps, cfg.burn_in, child(cfg.master_seed, DATA, i))
    series, _ = simulate_returns(cfg.theta_true, cfg.model, sim)
    mm, mm_error = None, None
    if "mm" in cfg.methods or "iie-star" in cfg.methods:
        try:
            mm = mm_estimate(series, cfg.r, cfg.model, cfg.bounds, cfg.mm_method)
        except CogarchError as exc:
            mm_error = exc
    for method in cfg.methods:
        try:
            if method == "mm":
                if mm_error is not None:
                    raise mm_error
                res = mm
            elif method == "iie-star":
                # without an MM start iie_star inverts pi_hat for its own starting point
                start = mm.theta_hat if mm is not None else None
                res = iie_star(aux_estimate(series, cfg.r), cfg.model, cfg.delta, domain=cfg.bounds,
                               start=start)
            else:
                icfg = IIEConfig(_STATE["grid"], cfg.K, table=_STATE["table"], n_sim=cfg.n,
                                 substeps=cfg.substeps, burn_in=cfg.burn_in, sim_seed=cfg.master_seed)
                res = iie_sim(series, cfg.model, cfg.r, icfg)
            out[method] = {"theta": res.theta_hat.as_array().tolist(), "objective": float(res.objective),
                           "feasible": bool(res.feasible), "error": None}
        except CogarchError as exc:
            out[method] = {"theta": [math.nan] * 3, "objective": math.nan, "feasible": False,
                           "error": f"{type(exc).__name__}: {exc}"}
    return out


def run_study(cfg: StudyConfig, threads: Optional[int] = None, table: Optional[SimTable] = None) -> StudyReport:
    """Run all replications and aggregate per-method metrics."""
    threads = threads or int(os.environ.get("COGARCH_II_THREADS", os.cpu_count() or 1))
    grid = None
    if "iie-sim" in cfg.methods:
        grid = build_grid(cfg.bounds, cfg.spacing, cfg.model)
        if table is None:
            table = build_sim_table(grid, cfg.model, cfg.r, cfg.K, cfg.n, cfg.delta, cfg.master_seed,
                                    cfg.substeps, cfg.burn_in, threads)
    if threads > 1:
        with ProcessPoolExecutor(max_workers=threads, initializer=_init_worker,
                                 initargs=(cfg, grid, table)) as ex:
            results = list(ex.map(_one_rep, range(cfg.reps), chunksize=max(1, cfg.reps // (4 * threads))))
    else:
        with warnings.catch_warnings():
            _init_worker(cfg, grid, table)
            results = [_one_rep(i) for i in range(cfg.reps)]
            _STATE.clear()
    return _aggregate(cfg, results, grid)


def _aggregate(cfg: StudyConfig, results: list, grid: Optional[ParameterGrid]) -> StudyReport:
    truth = cfg.theta_true.as_array()
    estimates, excluded = [], []
    for i, res in enumerate(results):
        ok = True
        for method in cfg.methods:
            e = res[method]
            estimates.append({"rep": i, "method": method, **dict(zip(COMPONENTS, e["theta"])),
                              "objective": e["objective"], "feasible": e["feasible"], "error": e["error"]})
            ok = ok and e["feasible"]
        if not ok:
            excluded.append(i)
    if len(excluded) == len(results):
        raise CogarchError("all replications were excluded")
    keep = [i for i in range(len(results)) if i not in set(excluded)]
    rows, qq = {}, []
    for method in cfg.methods:
        est = np.array([results[i][method]["theta"] for i in keep])
        rows[method] = metrics(est, truth)
        qq += qq_table(est, method)
    grid_info = None
    if grid is not None:
        grid_info = {**grid.to_dict(), "points": len(grid), "lattice": grid.lattice_size,
                     "filtered": grid.n_filtered}
    return StudyReport(cfg.to_dict(), rows, excluded, estimates, qq, grid_info)


def write_outputs(report: StudyReport, out_dir) -> dict:
    """Write ``report.json``, ``estimates.csv`` and ``qq.csv``; returns their paths."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = {"report": out / "report.json", "estimates": out / "estimates.csv", "qq": out / "qq.csv"}
    paths["report"].write_text(report.to_json() + "\n")
    with open(paths["estimates"], "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["rep", "method", "beta", "eta", "phi", "objective", "feasible"])
        for e in report.estimates:
            w.writerow([e["rep"], e["method"], repr(e["beta"]), repr(e["eta"]), repr(e["phi"]),
                        repr(e["objective"]), int(e["feasible"])])
    with open(paths["qq"], "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["method", "component", "theoretical_quantile", "sample_quantile"])
        for q in report.qq:
            w.writerow([q["method"], q["component"], repr(q["theoretical_quantile"]), repr(q["sample_quantile"])])
    return paths
