from pathlib import Path

import pytest

from ddstab_figures.cli import main
from ddstab_figures.render import (
    ARTIFACT_FIGURES,
    FigureSpec,
    SchemaMismatch,
    load_table,
    render,
    render_all,
)

HEATMAP_HEADER = ("# schema=heatmap-v1 config=abc feas_tol=1e-07 seed=0\n"
                  "epsilon,T,approach,feasible_ratio\n")


def write_zero_heatmap(path: Path) -> Path:
    rows = []
    for eps in (0.1, 0.5, 1.0):
        for T in (100, 200):
            rows.append(f"{eps},{T},energy,0.0")
            rows.append(f"{eps},{T},instantaneous,0.0")
    path.write_text(HEATMAP_HEADER + "\n".join(rows) + "\n")
    return path


class TestLoading:
    def test_missing_file(self, tmp_path):
        spec = FigureSpec(inputs=(tmp_path / "nope.csv",), kind="heatmap",
                          output=tmp_path / "o.png")
        with pytest.raises(FileNotFoundError):
            render(spec)

    def test_schema_mismatch(self, tmp_path):
        bad = tmp_path / "bad.csv"
        bad.write_text("# schema=unknown-v1 config=x\nT,ratio\n1,2\n")
        spec = FigureSpec(inputs=(bad,), kind="line-plot", output=tmp_path / "o.png")
        with pytest.raises(SchemaMismatch):
            render(spec)

    def test_missing_header(self, tmp_path):
        bad = tmp_path / "bad.csv"
        bad.write_text("T,ratio\n1,2\n")
        with pytest.raises(SchemaMismatch):
            load_table(bad)

    def test_empty_rows(self, tmp_path):
        empty = tmp_path / "empty.csv"
        empty.write_text(HEATMAP_HEADER)
        spec = FigureSpec(inputs=(empty,), kind="heatmap", output=tmp_path / "o.png")
        with pytest.raises(ValueError):
            render(spec)

    def test_unknown_kind(self, tmp_path):
        with pytest.raises(ValueError):
            FigureSpec(inputs=(), kind="pie", output=tmp_path / "o.png")


class TestRendering:
    def test_zero_heatmap_renders_uniform(self, tmp_path):
        csv = write_zero_heatmap(tmp_path / "hm.csv")
        out = render(FigureSpec(inputs=(csv,), kind="heatmap",
                                output=tmp_path / "hm.png",
                                options={"approach": "energy"}))
        assert out.exists() and out.stat().st_size > 0

    def test_heatmap_missing_approach(self, tmp_path):
        csv = write_zero_heatmap(tmp_path / "hm.csv")
        spec = FigureSpec(inputs=(csv,), kind="heatmap",
                          output=tmp_path / "o.png", options={"approach": "robust"})
        with pytest.raises(ValueError):
            render(spec)

    def test_pixel_determinism(self, tmp_path):
        csv = write_zero_heatmap(tmp_path / "hm.csv")
        a = render(FigureSpec(inputs=(csv,), kind="heatmap", output=tmp_path / "a.png"))
        b = render(FigureSpec(inputs=(csv,), kind="heatmap", output=tmp_path / "b.png"))
        assert a.read_bytes() == b.read_bytes()


class TestArtifactRun:
    def test_all_eight_figures(self, artifact_dir, tmp_path):
        outputs = render_all(artifact_dir, tmp_path / "figs")
        assert len(outputs) == len(ARTIFACT_FIGURES) == 8
        for path in outputs:
            assert path.exists() and path.stat().st_size > 0

    def test_all_is_pixel_deterministic(self, artifact_dir, tmp_path):
        first = render_all(artifact_dir, tmp_path / "f1")
        second = render_all(artifact_dir, tmp_path / "f2")
        for a, b in zip(first, second):
            assert a.read_bytes() == b.read_bytes()

    def test_cli_single_render(self, artifact_dir, tmp_path):
        out = tmp_path / "fig2.png"
        code = main(["render", str(artifact_dir / "sweep_c_boundary.csv"),
                     "--kind", "set-plot", "--out", str(out)])
        assert code == 0
        assert out.exists()

    def test_cli_all(self, artifact_dir, tmp_path):
        code = main(["all", "--artifact-dir", str(artifact_dir),
                     "--out-dir", str(tmp_path / "figs")])
        assert code == 0
        assert len(list((tmp_path / "figs").glob("*.png"))) == 8

    def test_cli_schema_error_exit_code(self, tmp_path):
        bad = tmp_path / "bad.csv"
        bad.write_text("# schema=unknown-v1 config=x\nT,ratio\n1,2\n")
        code = main(["render", str(bad), "--kind", "line-plot",
                     "--out", str(tmp_path / "o.png")])
        assert code == 2
