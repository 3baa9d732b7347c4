"""Command-line entry point for the characterization pipeline.

Subcommands: plan (triplets + batches), characterize (simultaneous
benchmarking on the virtual backend), sweep (layout fidelity comparison),
collisions (frequency-collision screening).  Every run writes a manifest;
re-running with the same seed and inputs reproduces result files byte for
byte.  Exit codes: 0 success, 2 usage/input error, 3 internal numerical
failure.
"""

from __future__ import annotations

import argparse
import csv
import datetime
import json
import sys
from pathlib import Path

from . import __version__
from . import bench, device, rb
from .backend import VirtualBackend
from .noise import CrosstalkInjection, CrosstalkTable, build_standard_model

CONFIGS = {"paper": rb.PAPER_CONFIG, "desk": rb.DESK_CONFIG}


class CliError(Exception):
    """Input or usage problem; maps to exit code 2."""


def _write_json(path: Path, payload) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")


def _load_snapshot(path: str) -> device.DeviceSnapshot:
    p = Path(path)
    if not p.exists():
        raise CliError(f"calibration file not found: {path}")
    try:
        return device.load_snapshot(p.read_bytes())
    except device.CalibrationError as exc:
        raise CliError(f"invalid calibration data: {exc}") from exc


def _load_injection(path: str | None) -> CrosstalkInjection | None:
    if path is None:
        return None
    p = Path(path)
    if not p.exists():
        raise CliError(f"injection file not found: {path}")
    try:
        return CrosstalkInjection.from_json(json.loads(p.read_text()))
    except (json.JSONDecodeError, KeyError, ValueError) as exc:
        raise CliError(f"invalid injection file: {exc}") from exc


def _manifest(args, inputs: dict, outputs: list[Path], started: str) -> dict:
    return {
        "command": args.command,
        "argv": sys.argv[1:],
        "inputs": inputs,
        "seed": getattr(args, "seed", None),
        "config": getattr(args, "config", None),
        "outputs": [str(p) for p in outputs],
        "version": __version__,
        "started": started,
        "finished": datetime.datetime.now(datetime.timezone.utc).isoformat(),
    }


def _now() -> str:
    return datetime.datetime.now(datetime.timezone.utc).isoformat()


def cmd_plan(args) -> int:
    started = _now()
    snapshot = _load_snapshot(args.calibration)
    triplets = device.extract_triplets(snapshot)
    batches = device.schedule_batches(triplets, snapshot)
    violations = device.validate_batches(batches, snapshot, triplets=triplets, separated=True)
    if violations:
        print("internal error: scheduled batches failed validation", file=sys.stderr)
        for v in violations:
            print(f"  {v}", file=sys.stderr)
        return 3
    out = Path(args.out)
    triplets_path = out / "triplets.json"
    batches_path = out / "batches.json"
    _write_json(triplets_path, [t.to_json() for t in triplets])
    _write_json(batches_path, device.batches_to_json(batches))
    manifest_path = out / "manifest.json"
    _write_json(
        manifest_path,
        _manifest(args, {"calibration": args.calibration}, [triplets_path, batches_path], started),
    )
    print(f"{len(triplets)} triplets, {len(batches)} batches")
    return 0


def cmd_characterize(args) -> int:
    started = _now()
    snapshot = _load_snapshot(args.calibration)
    injection = _load_injection(args.inject)
    config = CONFIGS[args.config].replace(seed=args.seed)
    triplets = device.extract_triplets(snapshot)
    batches = device.schedule_batches(triplets, snapshot)
    backend = VirtualBackend(
        snapshot, noise=build_standard_model(snapshot), injection=injection, seed=args.seed
    )
    result = rb.characterize(backend, batches, config)
    out = Path(args.out)
    table_path = out / "table.json"
    diag_path = out / "diagnostics.json"
    _write_json(table_path, result.table.to_json())
    _write_json(diag_path, result.to_json())
    manifest_path = out / "manifest.json"
    _write_json(
        manifest_path,
        _manifest(
            args,
            {"calibration": args.calibration, "inject": args.inject},
            [table_path, diag_path],
            started,
        ),
    )
    warned = sum(1 for r in result.results.values() if r.warnings)
    print(f"characterized {len(result.table.rates)} triplets over {len(batches)} batches"
          + (f" ({warned} with fit warnings)" if warned else ""))
    return 0


def cmd_sweep(args) -> int:
    started = _now()
    snapshot = _load_snapshot(args.calibration)
    injection = _load_injection(args.inject)
    if not 1 <= args.ladder <= snapshot.num_qubits:
        raise CliError(f"ladder size {args.ladder} exceeds the {snapshot.num_qubits}-qubit topology")
    sources = ["measured-run-1", "measured-run-2"]
    if args.model in ("standard", "both"):
        sources.append("model-standard")
    table = None
    if args.model in ("crosstalk", "both"):
        if args.table is None:
            raise CliError("--table is required when the crosstalk model is requested")
        table_path = Path(args.table)
        if not table_path.exists():
            raise CliError(f"table file not found: {args.table}")
        try:
            table = CrosstalkTable.from_json(json.loads(table_path.read_text()))
        except (json.JSONDecodeError, KeyError, ValueError) as exc:
            raise CliError(f"invalid table file: {exc}") from exc
        sources.append("model-crosstalk")
    twirl = bench.TwirlSpec.parse(args.twirl) if args.twirl else None
    template = bench.hadamard_ladder(args.ladder)
    layouts = device.enumerate_chains(snapshot, args.ladder)
    backend = VirtualBackend(
        snapshot, noise=build_standard_model(snapshot), injection=injection, seed=args.seed
    )
    records = bench.sweep(
        template,
        layouts,
        backend,
        tuple(sources),
        table=table,
        shots=args.shots,
        twirl=twirl,
        seed=args.seed,
    )
    by_source = bench.records_by_source(records)
    flagged = bench.filter_outliers(
        by_source["measured-run-1"], by_source["measured-run-2"], threshold=0.02
    )
    flagged_set = set(flagged)

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    records_path = out / "records.csv"
    with records_path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["layout", "source", "fidelity", "flagged"])
        for r in sorted(records, key=lambda r: (r.layout, r.source)):
            writer.writerow(
                ["-".join(map(str, r.layout)), r.source, repr(r.fidelity), int(r.layout in flagged_set)]
            )
    comparison = {"flagged_layouts": ["-".join(map(str, l)) for l in flagged], "rms": {}, "rms_reduced": {}}
    plot_data = {"flagged": ["-".join(map(str, l)) for l in flagged], "panels": {}}
    for model_source in ("model-standard", "model-crosstalk"):
        if model_source not in by_source:
            continue
        for run_source in ("measured-run-1", "measured-run-2"):
            comp = bench.compare(by_source[run_source], by_source[model_source], flagged)
            key = f"{model_source} vs {run_source}"
            comparison["rms"][key] = comp.rms
            comparison["rms_reduced"][key] = comp.rms_reduced
        measured = {r.layout: r.fidelity for r in by_source["measured-run-1"]}
        simulated = {r.layout: r.fidelity for r in by_source[model_source]}
        plot_data["panels"][model_source] = [
            {
                "layout": "-".join(map(str, l)),
                "measured": measured[l],
                "simulated": simulated[l],
                "flagged": l in flagged_set,
            }
            for l in sorted(measured)
        ]
    run_comp = bench.compare(by_source["measured-run-1"], by_source["measured-run-2"], flagged)
    comparison["rms"]["measured-run-2 vs measured-run-1"] = run_comp.rms
    comparison["rms_reduced"]["measured-run-2 vs measured-run-1"] = run_comp.rms_reduced
    comparison_path = out / "comparison.json"
    plot_path = out / "plot_data.json"
    _write_json(comparison_path, comparison)
    _write_json(plot_path, plot_data)
    manifest_path = out / "manifest.json"
    _write_json(
        manifest_path,
        _manifest(
            args,
            {"calibration": args.calibration, "table": args.table, "inject": args.inject},
            [records_path, comparison_path, plot_path],
            started,
        ),
    )
    print(
        f"{len(layouts)} layouts, {len(sources)} sources, {len(flagged)} flagged; "
        + "; ".join(f"rms[{k}]={v:.4f}" for k, v in sorted(comparison["rms"].items()))
    )
    return 0


def cmd_collisions(args) -> int:
    started = _now()
    snapshot = _load_snapshot(args.calibration)
    thresholds = device.CollisionThresholds()
    if args.thresholds:
        p = Path(args.thresholds)
        if not p.exists():
            raise CliError(f"thresholds file not found: {args.thresholds}")
        try:
            thresholds = device.CollisionThresholds.from_json(json.loads(p.read_text()))
        except (json.JSONDecodeError, ValueError) as exc:
            raise CliError(f"invalid thresholds file: {exc}") from exc
    try:
        thresholds.validate()
    except ValueError as exc:
        raise CliError(str(exc)) from exc
    reports = device.detect_collisions(snapshot, thresholds)
    payload = [r.to_json() for r in reports]
    if args.out:
        out_path = Path(args.out) / "collisions.json"
        _write_json(out_path, payload)
        manifest_path = Path(args.out) / "manifest.json"
        _write_json(
            manifest_path,
            _manifest(args, {"calibration": args.calibration, "thresholds": args.thresholds},
                      [out_path], started),
        )
    print(json.dumps(payload, indent=2, sort_keys=True))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="crosstalksim",
        description="Crosstalk characterization pipeline on a virtual transmon backend",
    )
    parser.add_argument("--manifest", help="replay a previous run from its manifest file")
    sub = parser.add_subparsers(dest="command")

    p_plan = sub.add_parser("plan", help="extract triplets and schedule batches")
    p_plan.add_argument("--calibration", required=True)
    p_plan.add_argument("--out", required=True)
    p_plan.add_argument("--seed", type=int, default=0)
    p_plan.set_defaults(func=cmd_plan)

    p_char = sub.add_parser("characterize", help="simultaneous benchmarking of all triplets")
    p_char.add_argument("--calibration", required=True)
    p_char.add_argument("--inject", default=None)
    p_char.add_argument("--config", choices=sorted(CONFIGS), default="desk")
    p_char.add_argument("--seed", type=int, default=0)
    p_char.add_argument("--out", required=True)
    p_char.set_defaults(func=cmd_characterize)

    p_sweep = sub.add_parser("sweep", help="layout sweep of the chain benchmark circuit")
    p_sweep.add_argument("--calibration", required=True)
    p_sweep.add_argument("--table", default=None)
    p_sweep.add_argument("--inject", default=None)
    p_sweep.add_argument("--ladder", type=int, required=True)
    p_sweep.add_argument("--model", choices=("standard", "crosstalk", "both"), default="standard")
    p_sweep.add_argument("--twirl", default=None, help="randomizations x shots, e.g. 100x100")
    p_sweep.add_argument("--shots", type=int, default=10_000)
    p_sweep.add_argument("--seed", type=int, default=0)
    p_sweep.add_argument("--out", required=True)
    p_sweep.set_defaults(func=cmd_sweep)

    p_col = sub.add_parser("collisions", help="frequency-collision screening")
    p_col.add_argument("--calibration", required=True)
    p_col.add_argument("--thresholds", default=None)
    p_col.add_argument("--out", default=None)
    p_col.add_argument("--seed", type=int, default=0)
    p_col.set_defaults(func=cmd_collisions)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.manifest:
        manifest_path = Path(args.manifest)
        if not manifest_path.exists():
            print(f"manifest not found: {args.manifest}", file=sys.stderr)
            return 2
        try:
            recorded = json.loads(manifest_path.read_text())
            replay_argv = [a for a in recorded["argv"] if not a.startswith("--manifest")]
        except (json.JSONDecodeError, KeyError) as exc:
            print(f"invalid manifest: {exc}", file=sys.stderr)
            return 2
        args = parser.parse_args(replay_argv)
    if not getattr(args, "command", None):
        parser.print_help()
        return 2
    try:
        return args.func(args)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (ValueError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except ArithmeticError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
