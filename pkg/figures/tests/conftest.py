import json
import subprocess
import sys

import pytest


@pytest.fixture(scope="session")
def artifact_dir(tmp_path_factory):
    """A complete (small) artifact run produced through the ddstab CLI."""
    root = tmp_path_factory.mktemp("artifacts")
    cfg = root / "config.json"
    cfg.write_text(json.dumps({
        "eps_grid": [0.1, 1.0],
        "T_grid": [30, 60],
        "batch": 2,
        "repeats": 1,
        "master_seed": 5,
        "sweep_T_grid": [3, 40],
        "scalar_T_grid": [10, 40],
        "thirdorder_T_grid": [20, 40],
        "grid_resolution": 15,
        "boundary_points": 64,
    }))
    out = root / "run"
    commands = (
        ["example1"],
        ["ellipse-sweep"],
        ["size-ratio", "--study", "scalar"],
        ["size-ratio", "--study", "thirdorder"],
        ["timing"],
        ["heatmap"],
    )
    for cmd in commands:
        proc = subprocess.run(
            [sys.executable, "-m", "ddstab.cli", *cmd,
             "--config", str(cfg), "--out-dir", str(out)],
            capture_output=True, text=True)
        assert proc.returncode == 0, f"{cmd}: {proc.stderr}"
    return out
