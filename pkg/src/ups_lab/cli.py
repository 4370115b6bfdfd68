"""Command-line entry points.

Commands:

* ``make-dataset``        generate a synthetic dataset CSV (plus provenance sidecar)
* ``run-supervised``      train on the labeled split only
* ``run-ssl``             run the full iterative self-training loop
* ``analyze-calibration`` reliability report and uncertainty sweep for a dump
* ``selection-report``    selection counts/accuracy for a saved checkpoint

Exit codes: 0 success, 1 usage or configuration error, 2 data error,
3 runtime numerical error. All outputs are deterministic given identical
inputs and seeds; the only timestamp lives in the provenance sidecar.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import replace

import numpy as np

from . import calibration, data, pipeline, selection
from .config import RunConfig, load_run_config
from .errors import (
    ConfigError,
    CsvParseError,
    CsvSchemaError,
    EmptyInputError,
    InvalidDatasetError,
    InvalidParameterError,
    UpsLabError,
)
from .model import load_model, save_model
from .seeding import derive_seed
from .uncertainty import combine_confidence, estimate

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_RUNTIME = 3

_DATA_ERRORS = (CsvParseError, CsvSchemaError, InvalidDatasetError,
                EmptyInputError, FileNotFoundError, IsADirectoryError)
_USAGE_ERRORS = (ConfigError, InvalidParameterError)


class _Parser(argparse.ArgumentParser):
    """argparse defaults to exit code 2 on usage errors; we reserve 2 for data."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="ups-lab",
                     description="Desk-scale pseudo-label selection laboratory")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("make-dataset", parents=[], help="generate a synthetic dataset CSV")
    p.add_argument("generator", choices=["two-moons", "blobs"])
    p.add_argument("--n", type=int, required=True, help="training sample count")
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--out", required=True, help="output CSV path")
    p.add_argument("--noise", type=float, default=0.1, help="two-moons noise sigma")
    p.add_argument("--classes", type=int, default=4, help="blobs class count")
    p.add_argument("--overlap", type=float, default=0.0, help="blobs label-radius excess")
    p.add_argument("--n-test", type=int, default=None)
    p.add_argument("--n-labeled", type=int, default=None,
                   help="if set, split off a labeled subset of this size")
    p.add_argument("--split-seed", type=int, default=None,
                   help="seed for the labeled split (defaults to --seed)")
    p.add_argument("--no-stratify", action="store_true")

    p = sub.add_parser("run-ssl", help="run the iterative self-training loop")
    p.add_argument("--config", required=True, help="JSON run configuration")
    p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                   dest="overrides", help="override a config key (dotted path)")

    p = sub.add_parser("run-supervised", help="train on the labeled split only")
    p.add_argument("--config", required=True)
    p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                   dest="overrides")

    p = sub.add_parser("analyze-calibration", help="ECE report and sweep for a dump CSV")
    p.add_argument("--dump", required=True, help="prediction dump CSV")
    p.add_argument("--bins", type=int, default=calibration.DEFAULT_BINS)
    p.add_argument("--sweep", default=None,
                   help="comma-separated ascending uncertainty thresholds (inf allowed)")
    p.add_argument("--out-dir", required=True)

    p = sub.add_parser("selection-report", help="selection counts for a checkpoint")
    p.add_argument("--config", required=True)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--iteration", type=int, default=0,
                   help="iteration index recorded in the report rows")

    return parser


def _write_selection_report_csv(rows: list[dict], path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("iteration,class,pos_selected,neg_selected,accuracy\n")
        for row in rows:
            acc = "" if row["accuracy"] is None else repr(row["accuracy"])
            fh.write(f"{row['iteration']},{row['class']},{row['pos_selected']},"
                     f"{row['neg_selected']},{acc}\n")


def _load_dataset(run_cfg: RunConfig) -> data.SslDataset:
    return data.load_csv(run_cfg.dataset_path, mode=run_cfg.dataset_mode)


def _run_and_export(run_cfg: RunConfig, supervised_only: bool) -> None:
    dataset = _load_dataset(run_cfg)
    out = run_cfg.output_dir
    os.makedirs(out, exist_ok=True)
    if supervised_only:
        result = pipeline.run_supervised(dataset, run_cfg.pipeline)
    else:
        result = pipeline.run_ssl(dataset, run_cfg.pipeline)

    for message in result.warnings:
        print(f"warning: {message}", file=sys.stderr)

    pipeline.write_records_csv(result.records, os.path.join(out, "iterations.csv"))
    report_rows = []
    for record, report in zip(result.records, result.selection_reports):
        if report is not None:
            report_rows.extend(selection.report_rows(report, record.iteration))
    _write_selection_report_csv(report_rows, os.path.join(out, "selection_report.csv"))
    save_model(result.model, os.path.join(out, "model.npz"))

    final = result.records[-1]
    metrics = {
        "iterations_executed": len(result.records),
        "converged": result.converged,
        "final_test_metric": final.test_metric,
        "final_ece": final.ece,
        "final_pos_selected": final.pos_selected,
        "final_neg_selected": final.neg_selected,
        "mode": dataset.mode,
    }
    with open(os.path.join(out, "metrics.json"), "w", encoding="utf-8") as fh:
        json.dump(metrics, fh, indent=2, sort_keys=True)
        fh.write("\n")
    with open(os.path.join(out, "config_resolved.json"), "w", encoding="utf-8") as fh:
        json.dump(run_cfg.resolved, fh, indent=2, sort_keys=True)
        fh.write("\n")
    data.write_provenance(os.path.join(out, "run.provenance.json"),
                          {"command": "run-supervised" if supervised_only else "run-ssl",
                           "config_echo": run_cfg.resolved})
    print(f"wrote iterations.csv, selection_report.csv, model.npz, metrics.json to {out}")


def _cmd_make_dataset(args) -> None:
    if args.generator == "two-moons":
        dataset = data.make_two_moons(args.n, args.noise, args.seed, n_test=args.n_test)
        params = {"generator": "two-moons", "n": args.n, "noise": args.noise,
                  "seed": args.seed, "n_test": args.n_test}
    else:
        dataset = data.make_blobs_multilabel(args.n, args.classes, args.overlap,
                                             args.seed, n_test=args.n_test)
        params = {"generator": "blobs", "n": args.n, "classes": args.classes,
                  "overlap": args.overlap, "seed": args.seed, "n_test": args.n_test}
    if args.n_labeled is not None:
        split_seed = args.seed if args.split_seed is None else args.split_seed
        dataset = data.split_labeled(dataset, args.n_labeled, split_seed,
                                     stratified=not args.no_stratify)
        params.update({"n_labeled": args.n_labeled, "split_seed": split_seed,
                       "stratified": not args.no_stratify})
    data.save_csv(dataset, args.out)
    data.write_provenance(args.out + ".provenance.json", params)
    print(f"wrote {args.out} ({dataset.n} train, {len(dataset.test_features)} test)")


def _cmd_analyze_calibration(args) -> None:
    dump = calibration.read_dump_csv(args.dump)
    os.makedirs(args.out_dir, exist_ok=True)
    report = calibration.compute_ece(dump, n_bins=args.bins)
    calibration.write_ece_report_csv(report, os.path.join(args.out_dir, "ece_report.csv"))
    written = "ece_report.csv"
    if args.sweep is not None:
        try:
            thresholds = [float(v) for v in args.sweep.split(",") if v.strip()]
        except ValueError:
            raise InvalidParameterError(f"--sweep must be comma-separated floats, got {args.sweep!r}")
        rows = calibration.ece_vs_uncertainty_sweep(dump, thresholds, n_bins=args.bins)
        calibration.write_sweep_csv(rows, os.path.join(args.out_dir, "ece_sweep.csv"))
        written += ", ece_sweep.csv"
    print(f"ece={report.ece!r} over {report.n_samples} samples; wrote {written} to {args.out_dir}")


def _cmd_selection_report(args) -> None:
    run_cfg = load_run_config(args.config)
    dataset = _load_dataset(run_cfg)
    model = load_model(args.checkpoint)
    cfg = run_cfg.pipeline
    view = dataset.train_view()
    if len(view.unlabeled_features) == 0:
        raise InvalidDatasetError("dataset has no unlabeled samples to report on")
    est = estimate(
        model, view.unlabeled_features,
        replace(cfg.estimator,
                base_seed=derive_seed(cfg.master_seed, args.iteration, "mc")),
        cfg.temperature,
    )
    probs = combine_confidence(est)
    labels = selection.generate_labels(probs, cfg.selection.gamma_mode)
    masks = selection.select(probs, est.std_probs, labels, cfg.selection, dataset.mode)
    pseudo = selection.PseudoLabelSet(labels=labels, masks=masks, mode=dataset.mode,
                                      iteration=args.iteration)
    report = selection.selection_stats(pseudo, dataset.unlabeled_ground_truth())
    _write_selection_report_csv(selection.report_rows(report, args.iteration), args.out)
    print(f"wrote {args.out}: {report.total_pos} positive, "
          f"{report.total_neg} negative selections")


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "make-dataset":
            _cmd_make_dataset(args)
        elif args.command in ("run-ssl", "run-supervised"):
            run_cfg = load_run_config(args.config, overrides=args.overrides)
            _run_and_export(run_cfg, supervised_only=args.command == "run-supervised")
        elif args.command == "analyze-calibration":
            _cmd_analyze_calibration(args)
        elif args.command == "selection-report":
            _cmd_selection_report(args)
    except _USAGE_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except _DATA_ERRORS as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (UpsLabError, FloatingPointError, np.linalg.LinAlgError) as exc:
        print(f"runtime error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
