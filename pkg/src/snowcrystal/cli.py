"""Command-line driver.

Subcommands: simulate (one trajectory), generate (a dataset), features
(morphology CSV from a manifest), evaluate (distance report between two
morphology CSVs), bench (timing of the simulation engine).

Exit codes: 0 success, 1 runtime failure, 2 usage error (bad flags, values
outside the supported range, malformed inputs).  Every command writes a
run-log JSON capturing its fully resolved configuration, and every command
is deterministic given its flags and seeds, timing numbers excepted.

Settings resolve in order: packaged defaults, then --config file, then
explicit flags.  Worker counts fall back to the CGNE_WORKERS environment
variable, then to the machine's CPU count.
"""

from __future__ import annotations

import argparse
import json
import os
import statistics
import sys
import time
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import __version__, config, dataset, lca, morphology, rng, transport
from .errors import SnowcrystalError
from .grid import reconstruct_full, render_cartesian, write_pgm
from .lca import PARAM_ORDER, RHO_REFERENCE_RANGE


class UsageError(Exception):
    """A problem the user can fix by changing flags or inputs."""


def _flag(name: str) -> str:
    return "--" + name.replace("_", "-")


def _add_param_flags(parser: argparse.ArgumentParser) -> None:
    for name in PARAM_ORDER:
        parser.add_argument(_flag(name), type=float, default=None,
                            help=f"model parameter {name}")


def _add_run_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--side", type=int, default=None, help="wedge side length")
    parser.add_argument("--max-steps", type=int, default=None)
    parser.add_argument("--snapshot-every", type=int, default=None)
    parser.add_argument("--halt-margin", type=int, default=None)
    parser.add_argument("--boundary-mode", choices=lca.BOUNDARY_MODES, default=None)
    parser.add_argument("--fold-mode", choices=("reflect", "rotate"), default=None)
    parser.add_argument("--seed", type=int, default=None)


def _add_common_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", type=Path, default=None,
                        help="key = value parameter file layered under the flags")
    parser.add_argument("--run-log", type=Path, default=None,
                        help="where to write the resolved-configuration log")
    parser.add_argument("--allow-out-of-range", action="store_true",
                        help="accept rho outside the calibrated range "
                             f"[{RHO_REFERENCE_RANGE[0]}, {RHO_REFERENCE_RANGE[1]}]")


def _resolve(args: argparse.Namespace) -> tuple[lca.LcaParams, lca.RunConfig, dict]:
    """Merge defaults, config file, and explicit flags into validated
    parameters plus the raw merged dict for the run-log."""
    merged = config.defaults_dict()
    if getattr(args, "config", None):
        try:
            merged.update(config.read_config_file(args.config))
        except (OSError, ValueError) as exc:
            raise UsageError(f"config file: {exc}") from exc
    for key in config.KNOWN_KEYS:
        value = getattr(args, key, None)
        if value is not None:
            merged[key] = value
    try:
        params, cfg = config.materialize(merged)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    return params, cfg, merged


def _check_rho(value: float, args: argparse.Namespace) -> None:
    lo, hi = RHO_REFERENCE_RANGE
    if not lo <= value <= hi and not args.allow_out_of_range:
        raise UsageError(
            f"rho={value} lies outside the calibrated range [{lo}, {hi}]; "
            "pass --allow-out-of-range to proceed anyway"
        )


def _workers(args: argparse.Namespace) -> int:
    if getattr(args, "workers", None):
        return args.workers
    env = os.environ.get("CGNE_WORKERS")
    if env:
        try:
            value = int(env)
        except ValueError as exc:
            raise UsageError(f"CGNE_WORKERS must be an integer, got {env!r}") from exc
        if value < 1:
            raise UsageError("CGNE_WORKERS must be at least 1")
        return value
    return os.cpu_count() or 1


def _write_runlog(path: Path | None, default: Path, payload: dict) -> None:
    target = path or default
    target.parent.mkdir(parents=True, exist_ok=True)
    target.write_text(json.dumps(payload, indent=2, default=str) + "\n",
                      encoding="utf-8")


def _runlog_payload(command: str, merged: dict, extra: dict) -> dict:
    payload = {
        "tool": {"name": "snowcrystal", "version": __version__},
        "command": command,
        "resolved": {k: merged[k] for k in sorted(merged)},
    }
    payload.update(extra)
    return payload


def cmd_simulate(args: argparse.Namespace) -> int:
    params, cfg, merged = _resolve(args)
    _check_rho(params.rho, args)
    traj = lca.run(params, cfg)
    out: Path = args.out
    out.parent.mkdir(parents=True, exist_ok=True)
    dataset.write_trajectory(traj, out)
    rendered = []
    if args.render_dir is not None:
        args.render_dir.mkdir(parents=True, exist_ok=True)
        for k, frame in enumerate(traj.frames):
            image = render_cartesian(reconstruct_full(frame), args.render_scale)
            target = args.render_dir / f"frame_{k:05d}.pgm"
            write_pgm(image, target)
            rendered.append(str(target))
    _write_runlog(args.run_log, Path(str(out) + ".runlog.json"), _runlog_payload(
        "simulate", merged,
        {"out": str(out), "frames": traj.frame_count,
         "raw_steps": traj.raw_steps, "rendered": rendered},
    ))
    return 0


def cmd_generate(args: argparse.Namespace) -> int:
    params, cfg, merged = _resolve(args)
    lo, hi = args.rho_range
    if not lo < hi:
        raise UsageError("--rho-range must be increasing")
    for bound in (lo, hi):
        _check_rho(bound, args)
    workers = _workers(args)
    manifest = dataset.generate_dataset(
        n=args.n,
        params=params,
        cfg=cfg,
        out_dir=args.out,
        rho_range=(lo, hi),
        master_seed=args.master_seed,
        workers=workers,
    )
    failed = [e.index for e in manifest.entries if e.status == "failed"]
    if failed:
        print(f"warning: {len(failed)} of {args.n} runs failed "
              f"(indices {failed[:8]}{'...' if len(failed) > 8 else ''})",
              file=sys.stderr)
    _write_runlog(args.run_log, Path(args.out) / "run_log.json", _runlog_payload(
        "generate", merged,
        {"out": str(args.out), "n": args.n, "master_seed": args.master_seed,
         "rho_range": [lo, hi], "workers": workers,
         "failed": len(failed)},
    ))
    return 0


def cmd_features(args: argparse.Namespace) -> int:
    try:
        manifest = dataset.DatasetManifest.load(args.manifest)
    except (OSError, KeyError, ValueError, json.JSONDecodeError) as exc:
        raise UsageError(f"cannot read manifest {args.manifest}: {exc}") from exc
    entries = manifest.ok_entries()
    if args.split:
        entries = [e for e in entries if e.split == args.split]
    if not entries:
        raise UsageError("manifest holds no successful trajectories to summarize")
    base = Path(args.manifest).parent
    samples = []
    for entry in entries:
        traj = dataset.read_trajectory(base / entry.file)
        samples.append(morphology.features(traj))
    args.out.parent.mkdir(parents=True, exist_ok=True)
    morphology.write_samples_csv(samples, args.out)
    _write_runlog(args.run_log, Path(str(args.out) + ".runlog.json"), _runlog_payload(
        "features",
        {"manifest": str(args.manifest), "split": args.split or "all"},
        {"out": str(args.out), "rows": len(samples)},
    ))
    return 0


def _read_samples(path) -> list[morphology.MorphologySample]:
    try:
        return morphology.read_samples_csv(path)
    except (OSError, ValueError) as exc:
        raise UsageError(f"cannot read morphology CSV {path}: {exc}") from exc


def cmd_evaluate(args: argparse.Namespace) -> int:
    model = _read_samples(args.model)
    reference = _read_samples(args.reference)
    lo, hi = args.rho_range
    if not lo < hi:
        raise UsageError("--rho-range must be increasing")
    edges = transport.default_bin_edges(args.bins, lo, hi)
    report = transport.ewd(model, reference, edges,
                           min_count=args.min_count,
                           standardize=args.standardized)
    if args.ci:
        report.ci = transport.bootstrap_ci(
            model, reference, edges,
            resamples=args.ci,
            seed=args.ci_seed,
            min_count=args.min_count,
            standardize=args.standardized,
        )
    args.out.parent.mkdir(parents=True, exist_ok=True)
    report.save(args.out)
    if args.density_out is not None:
        _write_density_grids(args.density_out, model, reference, edges,
                             args.density_bins)
    _write_runlog(args.run_log, Path(str(args.out) + ".runlog.json"), _runlog_payload(
        "evaluate",
        {"model": str(args.model), "reference": str(args.reference),
         "bins": args.bins, "rho_range": [lo, hi],
         "min_count": args.min_count, "standardized": args.standardized,
         "ci_resamples": args.ci or 0, "ci_seed": args.ci_seed},
        {"out": str(args.out), "ewd": report.ewd},
    ))
    print(f"ewd = {report.ewd:.6g}")
    return 0


def _write_density_grids(path: Path, model, reference, edges, grid_bins: int) -> None:
    """Binned 2-d histograms of (area, boundary_length) per rho bin, for
    side-by-side contour plots of the two distributions."""
    all_pts = np.array(
        [(s.area, s.boundary_length) for s in list(model) + list(reference)],
        dtype=np.float64,
    )
    area_edges = np.histogram_bin_edges(all_pts[:, 0], bins=grid_bins)
    blen_edges = np.histogram_bin_edges(all_pts[:, 1], bins=grid_bins)
    model_bins = transport.bin_by_rho(model, edges)
    ref_bins = transport.bin_by_rho(reference, edges)
    grids = []
    for k, (mb, rb) in enumerate(zip(model_bins, ref_bins)):
        entry = {"rho_range": [float(edges[k]), float(edges[k + 1])]}
        for name, joint in (("model", mb), ("reference", rb)):
            hist, _, _ = np.histogram2d(
                joint.points[:, 0], joint.points[:, 1],
                bins=[area_edges, blen_edges],
            )
            entry[name] = hist.astype(int).tolist()
        grids.append(entry)
    payload = {
        "schema": "density-grids/1",
        "rho_bin_edges": [float(e) for e in edges],
        "area_edges": [float(e) for e in area_edges],
        "boundary_edges": [float(e) for e in blen_edges],
        "bins": grids,
    }
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(payload, indent=2) + "\n", encoding="utf-8")


def cmd_bench(args: argparse.Namespace) -> int:
    params, cfg, merged = _resolve(args)
    _check_rho(params.rho, args)
    gen = rng.keyed_generator(cfg.seed, rng.DOMAIN_BENCH)
    seeds = gen.integers(0, 2**63, size=args.runs, dtype=np.uint64)
    times_ms = []
    raw_steps = []
    for i in range(args.runs):
        run_cfg = replace(cfg, seed=int(seeds[i]))
        t0 = time.perf_counter()
        traj = lca.run(params, run_cfg)
        times_ms.append((time.perf_counter() - t0) * 1e3)
        raw_steps.append(traj.raw_steps)
    q1, med, q3 = (float(q) for q in np.percentile(times_ms, [25, 50, 75]))
    cells = cfg.side * cfg.side
    payload = {
        "schema": "bench-report/1",
        "tool": {"name": "snowcrystal", "version": __version__},
        "runs": args.runs,
        "median_ms": med,
        "iqr_ms": [q1, q3],
        "times_ms": [float(t) for t in times_ms],
        "raw_steps": [int(s) for s in raw_steps],
        "cell_updates": int(sum(raw_steps)) * cells,
        "config": {k: merged[k] for k in sorted(merged)},
    }
    if args.emulator_log is not None:
        try:
            other = json.loads(args.emulator_log.read_text(encoding="utf-8"))
            other_median = float(other["median_ms"])
        except (OSError, KeyError, ValueError, json.JSONDecodeError) as exc:
            raise UsageError(f"cannot read timing log {args.emulator_log}: {exc}") from exc
        payload["comparison"] = {
            "lca_median_ms": med,
            "emulator_median_ms": other_median,
            "median_ratio": med / other_median if other_median > 0 else None,
        }
    args.out.parent.mkdir(parents=True, exist_ok=True)
    args.out.write_text(json.dumps(payload, indent=2) + "\n", encoding="utf-8")
    _write_runlog(args.run_log, Path(str(args.out) + ".runlog.json"), _runlog_payload(
        "bench", merged, {"out": str(args.out), "runs": args.runs},
    ))
    print(f"median {med:.1f} ms, IQR [{q1:.1f}, {q3:.1f}] ms over {args.runs} runs")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="snowcrystal",
        description="Simulate snow-crystal growth, summarize morphology, "
                    "and compare morphology distributions.",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="run one trajectory and write it")
    _add_param_flags(p)
    _add_run_flags(p)
    _add_common_flags(p)
    p.add_argument("--out", type=Path, required=True, help="trajectory file to write")
    p.add_argument("--render-dir", type=Path, default=None,
                   help="also render each frame as a PGM image here")
    p.add_argument("--render-scale", type=int, default=3,
                   help="pixels per lattice spacing for rendering")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("generate", help="run a dataset of trajectories")
    _add_param_flags(p)
    _add_run_flags(p)
    _add_common_flags(p)
    p.add_argument("-n", "--n", type=int, required=True, dest="n",
                   help="number of trajectories")
    p.add_argument("--out", type=Path, required=True, help="dataset directory")
    p.add_argument("--master-seed", type=int, default=0)
    p.add_argument("--rho-range", type=float, nargs=2, default=list(RHO_REFERENCE_RANGE),
                   metavar=("LO", "HI"))
    p.add_argument("--workers", type=int, default=None,
                   help="concurrent runs (default: CGNE_WORKERS or CPU count)")
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("features", help="morphology CSV from a dataset manifest")
    p.add_argument("--manifest", type=Path, required=True)
    p.add_argument("--out", type=Path, required=True, help="CSV file to write")
    p.add_argument("--split", choices=dataset.SPLITS, default=None,
                   help="restrict to one split")
    p.add_argument("--run-log", type=Path, default=None)
    p.set_defaults(func=cmd_features)

    p = sub.add_parser("evaluate", help="distance report between two morphology CSVs")
    p.add_argument("--model", type=Path, required=True)
    p.add_argument("--reference", type=Path, required=True)
    p.add_argument("--out", type=Path, required=True, help="report JSON to write")
    p.add_argument("--bins", type=int, default=transport.DEFAULT_BIN_COUNT)
    p.add_argument("--rho-range", type=float, nargs=2,
                   default=list(transport.DEFAULT_RHO_RANGE), metavar=("LO", "HI"))
    p.add_argument("--min-count", type=int, default=transport.DEFAULT_MIN_COUNT)
    p.add_argument("--standardized", action="store_true",
                   help="z-score both sides by the reference before measuring")
    p.add_argument("--ci", type=int, default=0, metavar="RESAMPLES",
                   help="bootstrap confidence interval with this many resamples")
    p.add_argument("--ci-seed", type=int, default=0)
    p.add_argument("--density-out", type=Path, default=None,
                   help="also write per-bin 2-d density grids to this JSON")
    p.add_argument("--density-bins", type=int, default=40)
    p.add_argument("--run-log", type=Path, default=None)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("bench", help="time the simulation engine")
    _add_param_flags(p)
    _add_run_flags(p)
    _add_common_flags(p)
    p.add_argument("-m", "--runs", type=int, default=5, dest="runs")
    p.add_argument("--out", type=Path, required=True, help="timing JSON to write")
    p.add_argument("--emulator-log", type=Path, default=None,
                   help="timing JSON from a surrogate to juxtapose medians with")
    p.set_defaults(func=cmd_bench)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 2
    except SnowcrystalError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
