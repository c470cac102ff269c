"""Command-line harness for the numerical studies.

Exit codes: 0 on success, 2 on configuration errors, 3 on solver failure.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from ddstab import consistency, datagen, experiments, overapprox, synthesis
from ddstab.experiments import ConfigError, ExperimentConfig
from ddstab.sdp import SolverFailure


def _load_config(args) -> ExperimentConfig:
    cfg = ExperimentConfig() if args.config is None else ExperimentConfig.from_file(args.config)
    overrides = {}
    if getattr(args, "seed", None) is not None:
        overrides["master_seed"] = args.seed
    if getattr(args, "workers", None) is not None:
        overrides["workers"] = args.workers
    if getattr(args, "batch", None) is not None:
        overrides["batch"] = args.batch
    if overrides:
        cfg = cfg.replace(**overrides)
    cfg.validate()
    return cfg


def _out_dir(args) -> Path:
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _load_dataset(args) -> datagen.DataSet:
    if args.data is not None:
        path = Path(args.data)
        if not path.exists():
            raise ConfigError(f"data file {path} does not exist")
        text = path.read_text()
        if path.suffix == ".json":
            return datagen.DataSet.from_json(text)
        return datagen.DataSet.from_csv(text)
    rng = experiments.cell_rng(args.seed if args.seed is not None else 0)
    if args.preset == "example1":
        return datagen.scalar_study_dataset(args.T, rng)
    return datagen.third_order_dataset(args.T, args.epsilon, rng)


def _add_common(sub, with_batch: bool = False):
    sub.add_argument("--config", default=None, help="JSON or key=value config file")
    sub.add_argument("--seed", type=int, default=None, help="master seed override")
    sub.add_argument("--out-dir", default="artifacts", help="output directory")
    sub.add_argument("--workers", type=int, default=None, help="parallel worker count")
    if with_batch:
        sub.add_argument("--batch", type=int, default=None, help="designs per grid cell")


def _add_dataset_args(sub):
    sub.add_argument("--preset", choices=["example1", "thirdorder"], default="thirdorder")
    sub.add_argument("--epsilon", type=float, default=0.1)
    sub.add_argument("--T", type=int, default=100)
    sub.add_argument("--data", default=None, help="dataset file (.json or .csv)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ddstab",
                                     description="data-driven stabilization experiments")
    subs = parser.add_subparsers(dest="command", required=True)

    _add_common(subs.add_parser("example1", help="closed-form scalar reference sets"))
    _add_common(subs.add_parser("ellipse-sweep", help="scalar study set boundaries/grids"))

    sr = subs.add_parser("size-ratio", help="aggregate vs cover size over T")
    sr.add_argument("--study", choices=["scalar", "thirdorder"], default="scalar")
    _add_common(sr)

    _add_common(subs.add_parser("timing", help="design solve-time trend over T"))
    _add_common(subs.add_parser("heatmap", help="feasibility fractions over (eps, T)"),
                with_batch=True)

    dg = subs.add_parser("design", help="run one controller design")
    dg.add_argument("--approach", choices=["energy", "instantaneous"], required=True)
    _add_dataset_args(dg)
    _add_common(dg)

    ov = subs.add_parser("overapprox", help="compute the covering ellipsoid")
    _add_dataset_args(ov)
    _add_common(ov)
    return parser


def _cmd_design(args) -> int:
    ds = _load_dataset(args)
    out = _out_dir(args)
    result = synthesis.design(ds, args.approach)
    path = out / f"design_{args.approach}.json"
    path.write_text(result.to_json())
    print(f"{args.approach}: {result.status} -> {path}")
    return 3 if result.status == "numerical-failure" else 0


def _cmd_overapprox(args) -> int:
    ds = _load_dataset(args)
    out = _out_dir(args)
    cs = consistency.build(ds)
    path = out / "overapprox.json"
    try:
        result = overapprox.compute_overapprox(cs)
    except overapprox.InfeasibleContainment as exc:
        path.write_text(json.dumps({"status": "infeasible-containment", "reason": str(exc)}))
        print(f"overapprox: infeasible containment -> {path}")
        return 0
    path.write_text(result.to_json())
    if ds.n == 1 and ds.m == 1:
        from ddstab.ellipsoid import quadric_boundary_2d

        cover = result.to_ellipsoid()
        rows = []
        for seg, line in enumerate(quadric_boundary_2d(cover.A, cover.B,
                                                       float(cover.C[0, 0]))):
            for idx, (av, bv) in enumerate(line):
                rows.append((0, seg, idx, av, bv))
        experiments.write_csv(out / "overapprox_boundary.csv",
                              experiments.SCHEMAS["sweep_ibar_boundary"],
                              ExperimentConfig(), ["T", "segment", "idx", "A", "B"], rows)
    print(f"overapprox: size={result.size:.6g} -> {path}")
    return 0


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "design":
            return _cmd_design(args)
        if args.command == "overapprox":
            return _cmd_overapprox(args)
        cfg = _load_config(args)
        out = _out_dir(args)
        experiments.write_run_config(cfg, out)
        if args.command == "example1":
            paths = experiments.run_example1(cfg, out)
        elif args.command == "ellipse-sweep":
            paths = experiments.run_ellipse_sweep(cfg, out)
        elif args.command == "size-ratio":
            paths = [experiments.run_size_ratio(cfg, out, args.study)]
        elif args.command == "timing":
            paths = [experiments.run_timing(cfg, out)]
        elif args.command == "heatmap":
            paths = [experiments.run_heatmap(cfg, out)]
        else:  # pragma: no cover - argparse enforces the choices
            raise ConfigError(f"unknown command {args.command!r}")
        for p in paths:
            print(f"wrote {p}")
        return 0
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except (ValueError, OSError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except SolverFailure as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
