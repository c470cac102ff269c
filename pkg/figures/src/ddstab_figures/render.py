"""Figure rendering from schema-tagged CSV artifacts.

Three figure kinds cover the eight analogues: ``set-plot`` overlays set
boundaries and shaded membership grids in the (A, B) plane, ``line-plot``
draws per-T series (size ratios, solve times), and ``heatmap`` draws the
feasibility fraction over the (eps, T) grid.  Rendering is deterministic:
a fixed style, no timestamps in the output metadata, and input rows are
consumed in file order.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

KINDS = ("set-plot", "line-plot", "heatmap")

BOUNDARY_SCHEMAS = {"example1-boundary-v1", "sweep-c-boundary-v1", "sweep-ibar-boundary-v1"}
GRID_SCHEMA = "sweep-i-grid-v1"
LINE_SCHEMAS = {"size-ratio-v1", "timing-v1"}
HEATMAP_SCHEMA = "heatmap-v1"

STYLE = {
    "figure.figsize": (6.0, 4.5),
    "figure.dpi": 120,
    "savefig.dpi": 120,
    "font.size": 9,
    "axes.grid": True,
    "grid.alpha": 0.3,
}


class SchemaMismatch(ValueError):
    """The CSV carries a schema this figure kind does not accept."""


@dataclass(frozen=True)
class FigureSpec:
    inputs: tuple[Path, ...]
    kind: str
    output: Path
    options: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown figure kind {self.kind!r}")
        object.__setattr__(self, "inputs", tuple(Path(p) for p in self.inputs))
        object.__setattr__(self, "output", Path(self.output))


@dataclass(frozen=True)
class Table:
    schema: str
    meta: dict
    columns: list[str]
    rows: list[list[str]]

    def column(self, name: str, convert=float) -> np.ndarray:
        idx = self.columns.index(name)
        return np.array([convert(r[idx]) for r in self.rows])


def load_table(path: Path) -> Table:
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"input CSV {path} does not exist")
    lines = [ln for ln in path.read_text().splitlines() if ln.strip()]
    if not lines or not lines[0].startswith("# "):
        raise SchemaMismatch(f"{path}: missing schema header line")
    meta = dict(tok.split("=", 1) for tok in lines[0][2:].split())
    schema = meta.get("schema", "")
    if len(lines) < 2:
        raise ValueError(f"{path}: missing column header")
    columns = lines[1].split(",")
    rows = [ln.split(",") for ln in lines[2:]]
    if not rows:
        raise ValueError(f"{path}: no data rows")
    return Table(schema=schema, meta=meta, columns=columns, rows=rows)


def _check_schema(table: Table, allowed: set[str], path: Path) -> None:
    if table.schema not in allowed:
        raise SchemaMismatch(
            f"{path}: schema {table.schema!r} not accepted (expected one of {sorted(allowed)})")


def _shade_of(i: int, count: int) -> float:
    # light to dark gray as the series index grows
    if count <= 1:
        return 0.35
    return 0.75 - 0.6 * i / (count - 1)


def _draw_boundaries(ax, table: Table, dashed: bool) -> None:
    Ts = sorted({int(float(v)) for v in table.column("T", str)})
    t_col = table.column("T")
    seg_col = table.column("segment", convert=lambda s: int(float(s)))
    a_col = table.column("A")
    b_col = table.column("B")
    for i, T in enumerate(Ts):
        gray = str(_shade_of(i, len(Ts)))
        for seg in sorted(set(seg_col[t_col == T])):
            sel = (t_col == T) & (seg_col == seg)
            ax.plot(a_col[sel], b_col[sel], linestyle="--" if dashed else "-",
                    linewidth=1.2, color=gray,
                    label=f"T={T}" if seg == 0 else None)


def _draw_grid(ax, table: Table) -> None:
    t_col = table.column("T")
    Ts = sorted(set(t_col))
    a_col, b_col = table.column("A"), table.column("B")
    member = table.column("member")
    for i, T in enumerate(Ts):
        sel = (t_col == T) & (member > 0)
        if sel.any():
            gray = _shade_of(i, len(Ts))
            ax.scatter(a_col[sel], b_col[sel], s=4, marker="s",
                       color=str(gray), alpha=0.6, linewidths=0)


def _render_set_plot(spec: FigureSpec) -> None:
    fig, ax = plt.subplots()
    drew_any = False
    for path in spec.inputs:
        table = load_table(path)
        _check_schema(table, BOUNDARY_SCHEMAS | {GRID_SCHEMA}, path)
        if table.schema == GRID_SCHEMA:
            _draw_grid(ax, table)
        else:
            _draw_boundaries(ax, table, dashed="ibar" in table.schema)
        drew_any = True
    if not drew_any:
        raise ValueError("set-plot needs at least one input CSV")
    ax.set_xlabel("A")
    ax.set_ylabel("B")
    ax.legend(loc="upper right", fontsize=7)
    ax.set_aspect("equal", adjustable="box")
    fig.savefig(spec.output, metadata={})
    plt.close(fig)


def _render_line_plot(spec: FigureSpec) -> None:
    fig, ax = plt.subplots()
    for path in spec.inputs:
        table = load_table(path)
        _check_schema(table, LINE_SCHEMAS, path)
        T = table.column("T")
        if table.schema == "size-ratio-v1":
            ax.plot(T, table.column("ratio"), marker="o", color="0.15")
            ax.set_ylabel("size ratio")
            ax.set_yscale("log")
        else:
            ax.plot(T, table.column("median_seconds_energy"), marker="o",
                    color="0.15", label="energy bound")
            ax.plot(T, table.column("median_seconds_instantaneous"), marker="s",
                    color="0.55", label="instantaneous bound")
            ax.set_ylabel("median solve seconds")
            ax.legend(fontsize=7)
    ax.set_xlabel("T")
    fig.savefig(spec.output, metadata={})
    plt.close(fig)


def _render_heatmap(spec: FigureSpec) -> None:
    if len(spec.inputs) != 1:
        raise ValueError("heatmap takes exactly one input CSV")
    table = load_table(spec.inputs[0])
    _check_schema(table, {HEATMAP_SCHEMA}, spec.inputs[0])
    approach = spec.options.get("approach", "energy")
    app_col = table.column("approach", convert=str)
    sel = app_col == approach
    if not sel.any():
        raise ValueError(f"no rows for approach {approach!r}")
    eps = table.column("epsilon")[sel]
    T = table.column("T")[sel]
    ratio = table.column("feasible_ratio")[sel]
    eps_vals = np.unique(eps)
    T_vals = np.unique(T)
    grid = np.zeros((len(eps_vals), len(T_vals)))
    for e, t, r in zip(eps, T, ratio):
        grid[np.searchsorted(eps_vals, e), np.searchsorted(T_vals, t)] = r
    fig, ax = plt.subplots()
    mesh = ax.pcolormesh(T_vals, eps_vals, grid, cmap="viridis", vmin=0.0, vmax=1.0,
                         shading="nearest")
    fig.colorbar(mesh, ax=ax, label="feasible fraction")
    ax.set_xlabel("T")
    ax.set_ylabel("epsilon")
    ax.set_title(approach)
    fig.savefig(spec.output, metadata={})
    plt.close(fig)


def render(spec: FigureSpec) -> Path:
    """Render one figure; returns the output path."""
    with plt.rc_context(STYLE):
        if spec.kind == "set-plot":
            _render_set_plot(spec)
        elif spec.kind == "line-plot":
            _render_line_plot(spec)
        else:
            _render_heatmap(spec)
    return spec.output


# the eight analogues rendered from one artifact directory
ARTIFACT_FIGURES = (
    ("fig1_example1_sets.png", "set-plot", ("example1_boundary.csv",), {}),
    ("fig2_aggregate_boundaries.png", "set-plot", ("sweep_c_boundary.csv",), {}),
    ("fig3_cover_and_intersection.png", "set-plot",
     ("sweep_i_grid.csv", "sweep_ibar_boundary.csv"), {}),
    ("fig4_size_ratio_scalar.png", "line-plot", ("size_ratio_scalar.csv",), {}),
    ("fig5_size_ratio_thirdorder.png", "line-plot", ("size_ratio_thirdorder.csv",), {}),
    ("fig6_timing.png", "line-plot", ("timing.csv",), {}),
    ("fig7_heatmap_energy.png", "heatmap", ("heatmap.csv",), {"approach": "energy"}),
    ("fig8_heatmap_instantaneous.png", "heatmap", ("heatmap.csv",),
     {"approach": "instantaneous"}),
)


def render_all(artifact_dir: Path, out_dir: Path) -> list[Path]:
    """Render every figure analogue from a complete CLI artifact run."""
    artifact_dir = Path(artifact_dir)
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    outputs = []
    for name, kind, inputs, options in ARTIFACT_FIGURES:
        spec = FigureSpec(inputs=tuple(artifact_dir / f for f in inputs),
                          kind=kind, output=out_dir / name, options=options)
        outputs.append(render(spec))
    return outputs
