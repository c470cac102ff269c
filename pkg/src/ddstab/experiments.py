"""Deterministic experiment harness writing CSV/JSON artifacts.

Every command is a pure function of its configuration and master seed: cell
seeds derive from (master, grid indices, batch index) through SeedSequence
spawn keys, grid cells may run in parallel but rows are emitted in grid
order, and every CSV starts with a comment line carrying the schema version,
the configuration hash and the tolerance record.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ddstab import consistency, datagen, overapprox, synthesis
from ddstab.datagen import DataSet

SCHEMAS = {
    "example1_quadrics": "example1-quadrics-v1",
    "example1_boundary": "example1-boundary-v1",
    "sweep_c_boundary": "sweep-c-boundary-v1",
    "sweep_ibar_boundary": "sweep-ibar-boundary-v1",
    "sweep_i_grid": "sweep-i-grid-v1",
    "size_ratio": "size-ratio-v1",
    "timing": "timing-v1",
    "heatmap": "heatmap-v1",
}

FILENAMES = {
    "example1_quadrics": "example1_quadrics.csv",
    "example1_boundary": "example1_boundary.csv",
    "sweep_c_boundary": "sweep_c_boundary.csv",
    "sweep_ibar_boundary": "sweep_ibar_boundary.csv",
    "sweep_i_grid": "sweep_i_grid.csv",
    "size_ratio_scalar": "size_ratio_scalar.csv",
    "size_ratio_thirdorder": "size_ratio_thirdorder.csv",
    "timing": "timing.csv",
    "heatmap": "heatmap.csv",
}


class ConfigError(ValueError):
    """Invalid experiment configuration."""


@dataclass(frozen=True)
class ExperimentConfig:
    system: str = "thirdorder"
    eps_grid: tuple[float, ...] = tuple(round(0.05 * k, 2) for k in range(1, 21))
    T_grid: tuple[int, ...] = tuple(range(100, 1001, 100))
    batch: int = 100
    master_seed: int = 0
    repeats: int = 5
    workers: int = 1
    feas_tol: float = 1e-7
    epsilon: float = 0.1
    sweep_T_grid: tuple[int, ...] = (3, 250, 500, 750, 1000)
    scalar_T_grid: tuple[int, ...] = (3, 50, 100, 150, 200, 250, 500, 750, 1000)
    thirdorder_T_grid: tuple[int, ...] = (20, 50, 100, 200, 400, 700, 1000)
    grid_resolution: int = 101
    boundary_points: int = 256
    window: tuple[float, float, float, float] = (-2.0, 3.0, -2.0, 3.0)

    def validate(self) -> None:
        if self.system not in ("thirdorder", "example1"):
            raise ConfigError(f"unknown system preset {self.system!r}")
        for name in ("eps_grid", "T_grid", "sweep_T_grid", "scalar_T_grid",
                     "thirdorder_T_grid"):
            if len(getattr(self, name)) == 0:
                raise ConfigError(f"{name} must not be empty")
        if self.batch < 1 or self.repeats < 1 or self.workers < 1:
            raise ConfigError("batch, repeats and workers must be positive")
        if self.grid_resolution < 2 or self.boundary_points < 8:
            raise ConfigError("grid_resolution/boundary_points too small")

    def replace(self, **kw) -> "ExperimentConfig":
        return dataclasses.replace(self, **kw)

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        for k, v in d.items():
            if isinstance(v, tuple):
                d[k] = list(v)
        return d

    def config_hash(self) -> str:
        payload = json.dumps(self.to_dict(), sort_keys=True)
        return hashlib.sha256(payload.encode()).hexdigest()[:12]

    @classmethod
    def from_file(cls, path: str | Path) -> "ExperimentConfig":
        text = Path(path).read_text()
        stripped = text.lstrip()
        if stripped.startswith("{"):
            raw = json.loads(text)
        else:
            raw = {}
            for line in text.splitlines():
                line = line.split("#", 1)[0].strip()
                if not line:
                    continue
                if "=" not in line:
                    raise ConfigError(f"cannot parse config line {line!r}")
                key, value = (part.strip() for part in line.split("=", 1))
                raw[key] = value
        return cls.from_dict(raw)

    @classmethod
    def from_dict(cls, raw: dict) -> "ExperimentConfig":
        fields = {f.name: f for f in dataclasses.fields(cls)}
        kw = {}
        for key, value in raw.items():
            if key not in fields:
                raise ConfigError(f"unknown config key {key!r}")
            target = fields[key].type
            if isinstance(value, str):
                if target.startswith("tuple"):
                    parts = [p for p in value.split(",") if p.strip()]
                    conv = int if "int" in target else float
                    value = tuple(conv(p) for p in parts)
                elif target == "int":
                    value = int(value)
                elif target == "float":
                    value = float(value)
            elif isinstance(value, list):
                conv = int if "int" in fields[key].type else float
                value = tuple(conv(p) for p in value)
            kw[key] = value
        cfg = cls(**kw)
        cfg.validate()
        return cfg


def cell_rng(master_seed: int, *indices: int) -> np.random.Generator:
    """Reproducible per-cell generator derived from the master seed and indices."""
    ss = np.random.SeedSequence(entropy=master_seed, spawn_key=tuple(indices))
    return np.random.default_rng(ss)


def _fmt(value) -> str:
    if isinstance(value, float):
        return format(value, ".17g")
    return str(value)


def write_csv(path: Path, schema: str, cfg: ExperimentConfig,
              columns: list[str], rows: list[tuple]) -> None:
    header = (f"# schema={schema} config={cfg.config_hash()} "
              f"feas_tol={cfg.feas_tol!r} seed={cfg.master_seed}")
    lines = [header, ",".join(columns)]
    lines.extend(",".join(_fmt(v) for v in row) for row in rows)
    path.write_text("\n".join(lines) + "\n")


def read_csv(path: str | Path) -> tuple[dict, list[str], np.ndarray]:
    """Parse an artifact CSV into (header metadata, column names, string rows)."""
    lines = [ln for ln in Path(path).read_text().splitlines() if ln.strip()]
    if not lines or not lines[0].startswith("# "):
        raise ValueError(f"{path}: missing schema header")
    meta = dict(tok.split("=", 1) for tok in lines[0][2:].split())
    columns = lines[1].split(",")
    rows = np.array([ln.split(",") for ln in lines[2:]], dtype=object)
    return meta, columns, rows


def write_run_config(cfg: ExperimentConfig, out_dir: Path) -> None:
    payload = {"config": cfg.to_dict(), "hash": cfg.config_hash()}
    (out_dir / "run_config.json").write_text(json.dumps(payload, indent=2, sort_keys=True))


def _dataset_for(system: str, T: int, epsilon: float,
                 rng: np.random.Generator) -> DataSet:
    if system == "example1":
        return datagen.scalar_study_dataset(T, rng)
    return datagen.third_order_dataset(T, epsilon, rng)


# --- example1 -----------------------------------------------------------

def run_example1(cfg: ExperimentConfig, out_dir: Path) -> list[Path]:
    """Closed-form quadric coefficients and boundaries of the three shortest
    aggregate sets of the scalar reference data."""
    out_dir.mkdir(parents=True, exist_ok=True)
    coeff_rows = []
    boundary_rows = []
    for T in (1, 2, 3):
        cs = consistency.build(datagen.example1_dataset(T))
        a = cs.aggregate
        coeff_rows.append((T, a.AI[0, 0], a.AI[0, 1], a.AI[1, 1],
                           a.BI[0, 0], a.BI[1, 0], a.CI[0, 0]))
        polylines = consistency.aggregate_boundary(
            cs, cfg.boundary_points, cfg.window)
        for seg, line in enumerate(polylines):
            for idx, (av, bv) in enumerate(line):
                boundary_rows.append((T, seg, idx, av, bv))
    p1 = out_dir / FILENAMES["example1_quadrics"]
    write_csv(p1, SCHEMAS["example1_quadrics"], cfg,
              ["T", "a11", "a12", "a22", "b1", "b2", "c"], coeff_rows)
    p2 = out_dir / FILENAMES["example1_boundary"]
    write_csv(p2, SCHEMAS["example1_boundary"], cfg,
              ["T", "segment", "idx", "A", "B"], boundary_rows)
    return [p1, p2]


# --- ellipse sweep ------------------------------------------------------

def run_ellipse_sweep(cfg: ExperimentConfig, out_dir: Path) -> list[Path]:
    """Scalar-study sweep: aggregate boundaries, cover boundaries, and the
    intersection membership grid over nested data prefixes."""
    out_dir.mkdir(parents=True, exist_ok=True)
    T_max = max(cfg.sweep_T_grid)
    full = datagen.scalar_study_dataset(T_max, cell_rng(cfg.master_seed, 0))
    c_rows, ibar_rows, grid_rows = [], [], []
    a_vals = np.linspace(cfg.window[0], cfg.window[1], cfg.grid_resolution)
    b_vals = np.linspace(cfg.window[2], cfg.window[3], cfg.grid_resolution)
    for T in cfg.sweep_T_grid:
        cs = consistency.build(full.prefix(T))
        for seg, line in enumerate(consistency.aggregate_boundary(
                cs, cfg.boundary_points, cfg.window)):
            for idx, (av, bv) in enumerate(line):
                c_rows.append((T, seg, idx, av, bv))
        result = overapprox.compute_overapprox(
            cs, overapprox.OverapproxSettings(feas_tol=cfg.feas_tol))
        cover = result.to_ellipsoid()
        from ddstab.ellipsoid import quadric_boundary_2d

        for seg, line in enumerate(quadric_boundary_2d(
                cover.A, cover.B, float(cover.C[0, 0]),
                cfg.boundary_points, cfg.window)):
            for idx, (av, bv) in enumerate(line):
                ibar_rows.append((T, seg, idx, av, bv))
        slacks = consistency.membership_grid(cs, a_vals, b_vals)
        for i, av in enumerate(a_vals):
            for j, bv in enumerate(b_vals):
                s = slacks[i, j]
                grid_rows.append((T, av, bv, s, int(s >= 0.0)))
    paths = []
    for key, cols, rows in (
        ("sweep_c_boundary", ["T", "segment", "idx", "A", "B"], c_rows),
        ("sweep_ibar_boundary", ["T", "segment", "idx", "A", "B"], ibar_rows),
        ("sweep_i_grid", ["T", "A", "B", "slack", "member"], grid_rows),
    ):
        p = out_dir / FILENAMES[key]
        write_csv(p, SCHEMAS[key], cfg, cols, rows)
        paths.append(p)
    return paths


# --- size ratio ---------------------------------------------------------

def run_size_ratio(cfg: ExperimentConfig, out_dir: Path, study: str) -> Path:
    """Aggregate-set size versus cover size over nested data prefixes."""
    if study not in ("scalar", "thirdorder"):
        raise ConfigError(f"unknown study {study!r}")
    out_dir.mkdir(parents=True, exist_ok=True)
    T_grid = cfg.scalar_T_grid if study == "scalar" else cfg.thirdorder_T_grid
    T_max = max(T_grid)
    rng = cell_rng(cfg.master_seed, 1 if study == "scalar" else 2)
    if study == "scalar":
        full = datagen.scalar_study_dataset(T_max, rng)
    else:
        full = datagen.third_order_dataset(T_max, cfg.epsilon, rng)
    from ddstab.ellipsoid import size as ell_size

    rows = []
    for T in T_grid:
        cs = consistency.build(full.prefix(T))
        size_c = ell_size(cs.aggregate_ellipsoid())
        result = overapprox.compute_overapprox(
            cs, overapprox.OverapproxSettings(feas_tol=cfg.feas_tol))
        rows.append((T, size_c, result.size, size_c / result.size))
    name = FILENAMES["size_ratio_scalar" if study == "scalar" else "size_ratio_thirdorder"]
    p = out_dir / name
    write_csv(p, SCHEMAS["size_ratio"], cfg,
              ["T", "size_C", "size_Ibar", "ratio"], rows)
    return p


# --- timing -------------------------------------------------------------

def run_timing(cfg: ExperimentConfig, out_dir: Path) -> Path:
    """Median wall-clock design time per approach over the T grid."""
    out_dir.mkdir(parents=True, exist_ok=True)
    settings = synthesis.DesignSettings(feas_tol=cfg.feas_tol)
    warm = _dataset_for(cfg.system, min(cfg.T_grid), cfg.epsilon,
                        cell_rng(cfg.master_seed, 3, 0))
    synthesis.design(warm, "energy", settings)
    synthesis.design(warm, "instantaneous", settings)
    rows = []
    for i_T, T in enumerate(cfg.T_grid):
        ds = _dataset_for(cfg.system, T, cfg.epsilon, cell_rng(cfg.master_seed, 3, 1 + i_T))
        te, ti = [], []
        for _ in range(cfg.repeats):
            t0 = time.perf_counter()
            synthesis.design(ds, "energy", settings)
            te.append(time.perf_counter() - t0)
            t0 = time.perf_counter()
            synthesis.design(ds, "instantaneous", settings)
            ti.append(time.perf_counter() - t0)
        rows.append((T, float(np.median(te)), float(np.median(ti)), cfg.repeats))
    p = out_dir / FILENAMES["timing"]
    write_csv(p, SCHEMAS["timing"], cfg,
              ["T", "median_seconds_energy", "median_seconds_instantaneous", "repeats"],
              rows)
    return p


# --- feasibility heatmap -------------------------------------------------

def _heatmap_cell(args) -> tuple[int, int, int, int]:
    """Worker: feasible counts for one (eps, T) cell, both approaches."""
    system, eps, T, batch, master_seed, i_eps, i_T, feas_tol = args
    settings = synthesis.DesignSettings(feas_tol=feas_tol)
    n_energy = 0
    n_inst = 0
    for b in range(batch):
        ds = _dataset_for(system, T, eps, cell_rng(master_seed, 4, i_eps, i_T, b))
        if synthesis.design(ds, "energy", settings).solved:
            n_energy += 1
        if synthesis.design(ds, "instantaneous", settings).solved:
            n_inst += 1
    return i_eps, i_T, n_energy, n_inst


def run_heatmap(cfg: ExperimentConfig, out_dir: Path) -> Path:
    """Fraction of feasible design problems per (eps, T) cell and approach."""
    out_dir.mkdir(parents=True, exist_ok=True)
    tasks = [(cfg.system, eps, T, cfg.batch, cfg.master_seed, i_eps, i_T, cfg.feas_tol)
             for i_eps, eps in enumerate(cfg.eps_grid)
             for i_T, T in enumerate(cfg.T_grid)]
    results: dict[tuple[int, int], tuple[int, int]] = {}
    if cfg.workers > 1:
        with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
            for i_eps, i_T, n_e, n_i in pool.map(_heatmap_cell, tasks):
                results[(i_eps, i_T)] = (n_e, n_i)
    else:
        for task in tasks:
            i_eps, i_T, n_e, n_i = _heatmap_cell(task)
            results[(i_eps, i_T)] = (n_e, n_i)
    rows = []
    for i_eps, eps in enumerate(cfg.eps_grid):
        for i_T, T in enumerate(cfg.T_grid):
            n_e, n_i = results[(i_eps, i_T)]
            rows.append((eps, T, "energy", n_e / cfg.batch))
            rows.append((eps, T, "instantaneous", n_i / cfg.batch))
    p = out_dir / FILENAMES["heatmap"]
    write_csv(p, SCHEMAS["heatmap"], cfg,
              ["epsilon", "T", "approach", "feasible_ratio"], rows)
    return p
