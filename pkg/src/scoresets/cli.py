"""Command-line surface: experts -> ensemble -> calibrate -> predict -> report.

One binary with subcommands so every stage shares the same format code and
stamps the same version into its outputs. Every command is deterministic
given its flags and input files; all randomness is behind explicit seeds.

Failures print exactly one machine-parsable stderr line
``ERROR <name>: <detail>`` and exit with the error's own code (see
--help for the table). Exit code 2 is argparse usage, 3 means a
coverage-check ran fine but landed outside the stated bounds, 4 is an
OS-level I/O failure.
"""

from __future__ import annotations

import argparse
import os
import shlex
import sys

import numpy as np

from . import __version__
from .conformal import calibrate as _calibrate
from .conformal import coverage_bounds, predict_sets
from .core import UNKNOWN_LABEL, LabeledScores
from .ensemble import align_by_id, average_scores
from .errors import ERROR_CODES, IdSetMismatch, ScoresetsError
from .io_formats import (
    FORMAT_VERSION,
    read_calibration,
    read_labels_csv,
    read_manifest,
    read_prediction_sets,
    read_scores_csv,
    write_calibration,
    write_manifest,
    write_prediction_sets,
    write_report,
    write_scores_csv,
)
from .metrics import build_report, coverage_by_set_size, uncertainty_histograms
from .simulator import SimulatorConfig, coverage_trial, default_config, load_config, simulate
from .splits import DEFAULT_RATIOS, apply_split, make_split

EXIT_USAGE = 2
EXIT_COVERAGE_OUT_OF_BOUNDS = 3
EXIT_IO = 4


def _provenance(argv: list[str]) -> dict[str, str]:
    return {
        "tool_version": __version__,
        "invocation": "scoresets " + " ".join(shlex.quote(a) for a in argv),
    }


def _parse_ratios(text: str) -> tuple[float, ...]:
    try:
        return tuple(float(p) for p in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"ratios must be comma-separated numbers, got {text!r}")


def _parse_weights(text: str) -> tuple[float, ...]:
    try:
        return tuple(float(p) for p in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"weights must be comma-separated numbers, got {text!r}")


def _maybe_filter(data: LabeledScores, manifest_path: str | None, tag: str) -> LabeledScores:
    if manifest_path is None:
        return data
    manifest = read_manifest(manifest_path)
    return apply_split(data, manifest, tag)


def _cmd_split(args, argv) -> int:
    if os.path.exists(args.labels):
        with open(args.labels, "r", encoding="utf-8") as fh:
            first = fh.readline().strip()
    else:
        first = ""
    if first.startswith("sample_id,true_label,p_0"):
        data = read_scores_csv(args.labels)
        ids, labels = list(data.ids), data.labels
    else:
        ids, labels = read_labels_csv(args.labels)
    stratified = not args.no_stratify and bool(np.all(np.asarray(labels) != UNKNOWN_LABEL))
    manifest = make_split(
        ids, labels, ratios=args.ratios, seed=args.seed, stratified=stratified
    )
    write_manifest(manifest, args.out, _provenance(argv))
    counts = manifest.counts()
    print(
        "split sizes: "
        + " ".join(f"{tag}={counts[tag]}" for tag in ("train", "val", "calib", "test"))
        + f" stratified={str(stratified).lower()}"
    )
    return 0


def _cmd_calibrate(args, argv) -> int:
    data = read_scores_csv(args.scores)
    if args.manifest is not None:
        manifest = read_manifest(args.manifest)
        data = apply_split(data, manifest, "calib")
        created_from = f"scores={args.scores} manifest={args.manifest} tag=calib"
    else:
        created_from = f"scores={args.scores} (all rows)"
    artifact = _calibrate(data, args.alpha, created_from=created_from)
    write_calibration(artifact, args.out, _provenance(argv))
    print(f"q_hat={artifact.q_hat:.12g} n_calibration={artifact.n_calibration}")
    return 0


def _cmd_ensemble(args, argv) -> int:
    models = [read_scores_csv(p) for p in args.scores]
    models = align_by_id(models)
    fused = average_scores(models, weights=args.weights)
    write_scores_csv(fused, args.out, _provenance(argv))
    print(f"ensembled {len(models)} models over {len(fused)} samples")
    return 0


def _cmd_predict(args, argv) -> int:
    data = read_scores_csv(args.scores)
    data = _maybe_filter(data, args.manifest, args.tag)
    artifact = read_calibration(args.calibration)
    batch = predict_sets(data, artifact, allow_empty=not args.force_argmax)
    write_prediction_sets(batch, args.out, _provenance(argv))
    sizes = batch.sizes()
    avg = float(sizes.mean()) if len(batch) else float("nan")
    print(f"predicted {len(batch)} sets, avg size {avg:.6g}, q_hat={artifact.q_hat:.12g}")
    return 0


def _cmd_evaluate(args, argv) -> int:
    data = read_scores_csv(args.scores)
    data = _maybe_filter(data, args.manifest, args.tag)
    batch = read_prediction_sets(args.sets)
    row_of = {sid: i for i, sid in enumerate(batch.ids)}
    missing = [sid for sid in data.ids if sid not in row_of]
    if missing:
        raise IdSetMismatch(f"sets file lacks id {missing[0]!r} present in scores")
    batch = batch.subset([row_of[sid] for sid in data.ids])
    report = build_report(data, batch, bins=args.bins)
    write_report(report, args.out, _provenance(argv))
    if args.plot_data is not None:
        _write_plot_data(args.plot_data, data, batch, args.bins)
    print(
        f"coverage={report.coverage:.6g} avg_set_size={report.avg_set_size:.6g} "
        f"accuracy={report.accuracy:.6g} n_test={report.n_test}"
    )
    return 0


def _write_plot_data(out_dir, data: LabeledScores, batch, bins: int) -> None:
    os.makedirs(out_dir, exist_ok=True)
    by_size = coverage_by_set_size(batch, data.labels)
    hist_c, hist_i = uncertainty_histograms(data.scores, data.labels, bins=bins)

    def dump(name: str, header: list[str], rows) -> None:
        with open(os.path.join(out_dir, name), "w", encoding="utf-8", newline="\n") as fh:
            fh.write(",".join(header) + "\n")
            for row in rows:
                fh.write(",".join(format(v, ".12g") if isinstance(v, float) else str(v) for v in row) + "\n")

    dump(
        "coverage_by_set_size.csv",
        ["set_size", "count", "coverage"],
        ((k, b.count, b.coverage) for k, b in sorted(by_size.per_size.items())),
    )
    dump(
        "coverage_by_set_size_cumulative.csv",
        ["set_size", "count", "coverage"],
        ((k, b.count, b.coverage) for k, b in sorted(by_size.cumulative.items())),
    )
    for name, hist in (
        ("uncertainty_correct.csv", hist_c),
        ("uncertainty_incorrect.csv", hist_i),
    ):
        dump(
            name,
            ["bin_lower", "bin_upper", "count"],
            (
                (float(hist.bin_edges[i]), float(hist.bin_edges[i + 1]), int(hist.counts[i]))
                for i in range(len(hist.counts))
            ),
        )


def _cmd_simulate(args, argv) -> int:
    config = load_config(args.config) if args.config else default_config()
    models = simulate(config)
    os.makedirs(args.out_dir, exist_ok=True)
    for m, model in enumerate(models):
        write_scores_csv(model, os.path.join(args.out_dir, f"expert_{m}.csv"), _provenance(argv))
    print(f"wrote {len(models)} expert score files ({len(models[0])} samples each)")
    return 0


def _cmd_coverage_check(args, argv) -> int:
    config = load_config(args.config) if args.config else default_config()
    result = coverage_trial(config, args.alpha, args.n_calib, args.n_test, args.trials)
    for t, c in enumerate(result.per_trial):
        print(f"trial {t} coverage {c:.6f}")
    lower, upper = result.lower_bound, result.upper_bound
    ok = lower - args.tolerance <= result.mean_coverage <= upper + args.tolerance
    print(f"mean_coverage {result.mean_coverage:.6f}")
    print(f"eq_bounds [{lower:.6f}, {upper:.6f}] tolerance {args.tolerance:.6f}")
    print(f"within_bounds {str(ok).lower()}")
    return 0 if ok else EXIT_COVERAGE_OUT_OF_BOUNDS


def _build_parser() -> argparse.ArgumentParser:
    codes = ", ".join(f"{name}={code}" for name, code in ERROR_CODES.items())
    parser = argparse.ArgumentParser(
        prog="scoresets",
        description=__doc__.splitlines()[0],
        epilog=(
            "exit codes: 0 ok; 2 usage; 3 coverage-check outside bounds; "
            f"4 I/O failure; domain errors: {codes}"
        ),
    )
    parser.add_argument("--version", action="version", version=f"scoresets {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("split", help="assign samples to train/val/calib/test")
    p.add_argument("--labels", required=True, help="scores CSV or sample_id,true_label CSV")
    p.add_argument("--ratios", type=_parse_ratios, default=DEFAULT_RATIOS,
                   help="train,val,calib,test fractions (default 0.6,0.1,0.2,0.1)")
    p.add_argument("--seed", type=int, required=True, help="shuffle seed (u64)")
    p.add_argument("--no-stratify", action="store_true",
                   help="disable per-class stratification")
    p.add_argument("--out", required=True, help="manifest CSV path (sidecar added)")
    p.set_defaults(func=_cmd_split)

    p = sub.add_parser("calibrate", help="compute the conformal threshold")
    p.add_argument("--scores", required=True)
    p.add_argument("--manifest", default=None,
                   help="split manifest; uses its calib rows (omit to use all rows)")
    p.add_argument("--alpha", type=float, required=True)
    p.add_argument("--out", required=True, help="calibration JSON path")
    p.set_defaults(func=_cmd_calibrate)

    p = sub.add_parser("ensemble", help="average several experts' score files")
    p.add_argument("--scores", nargs="+", required=True, help="two or more scores CSVs")
    p.add_argument("--weights", type=_parse_weights, default=None,
                   help="comma-separated weights summing to 1 (default: uniform)")
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_ensemble)

    p = sub.add_parser("predict", help="build prediction sets from a calibration")
    p.add_argument("--scores", required=True)
    p.add_argument("--calibration", required=True)
    g = p.add_mutually_exclusive_group()
    g.add_argument("--allow-empty", action="store_true",
                   help="allow empty sets (default behavior, stated explicitly)")
    g.add_argument("--force-argmax", action="store_true",
                   help="never emit an empty set; include the argmax class")
    p.add_argument("--manifest", default=None, help="optional manifest to filter rows")
    p.add_argument("--tag", default="test", choices=["train", "val", "calib", "test"],
                   help="split tag to keep when --manifest is given")
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_predict)

    p = sub.add_parser("evaluate", help="score prediction sets against true labels")
    p.add_argument("--scores", required=True)
    p.add_argument("--sets", required=True)
    p.add_argument("--bins", type=int, default=20, help="uncertainty histogram bins")
    p.add_argument("--manifest", default=None, help="optional manifest to filter rows")
    p.add_argument("--tag", default="test", choices=["train", "val", "calib", "test"],
                   help="split tag to keep when --manifest is given")
    p.add_argument("--out", required=True, help="report JSON path")
    p.add_argument("--plot-data", default=None,
                   help="directory for set-size and uncertainty (x,y) series")
    p.set_defaults(func=_cmd_evaluate)

    p = sub.add_parser("simulate", help="write synthetic per-expert score files")
    p.add_argument("--config", default=None, help="simulator JSON config (omit for default)")
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=_cmd_simulate)

    p = sub.add_parser("coverage-check",
                       help="Monte Carlo validation of the coverage interval")
    p.add_argument("--config", default=None, help="simulator JSON config (omit for default)")
    p.add_argument("--alpha", type=float, required=True)
    p.add_argument("--n-calib", type=int, required=True)
    p.add_argument("--n-test", type=int, required=True)
    p.add_argument("--trials", type=int, required=True)
    p.add_argument("--tolerance", type=float, default=0.01,
                   help="slack around the interval for the exit status (default 0.01)")
    p.set_defaults(func=_cmd_coverage_check)

    return parser


def main(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args, argv)
    except ScoresetsError as exc:
        detail = " ".join(str(exc).split())
        print(f"ERROR {exc.name}: {detail}", file=sys.stderr)
        return exc.exit_code
    except OSError as exc:
        detail = " ".join(str(exc).split())
        print(f"ERROR IOFailure: {detail}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
