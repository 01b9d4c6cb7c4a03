"""Command-line front end.

Subcommands: ``calibrate`` (detection thresholds), ``pd-curve``
(Pd-versus-SINR sweeps), ``trials`` (per-trial detector records),
``classify`` (sparse detector/classifier experiment), and ``reproduce``
(preset figure configurations).  Scenario files are JSON; see the README
for the schema and output formats.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from dataclasses import replace
from pathlib import Path

from . import harness, presets
from .detectors import DETECTOR_IDS
from .scenario import ScenarioConfig
from .sparse import AngleGrid


def _parse_sinr_grid(text: str) -> tuple[float, ...]:
    """Parse 'lo:hi:step' (inclusive ends) or a comma list of dB values."""
    if ":" in text:
        lo, hi, step = (float(part) for part in text.split(":"))
        if step <= 0 or hi < lo:
            raise argparse.ArgumentTypeError(f"bad SINR range {text!r}")
        values = []
        current = lo
        while current <= hi + 1e-9:
            values.append(round(current, 10))
            current += step
        return tuple(values)
    return tuple(float(part) for part in text.split(","))


def _parse_detectors(text: str) -> tuple[str, ...]:
    detectors = tuple(part.strip() for part in text.split(",") if part.strip())
    unknown = [d for d in detectors if d not in DETECTOR_IDS]
    if unknown:
        raise argparse.ArgumentTypeError(f"unknown detectors {unknown}; choose from {DETECTOR_IDS}")
    return detectors


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--pfa", type=float, default=1e-3, help="false-alarm probability")
    parser.add_argument("--seed", type=int, default=0, help="base seed for all trial streams")
    parser.add_argument("--threads", type=int, default=1, help="worker processes for trials")


def _add_rank_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument(
        "--rank-rule",
        choices=("aic", "bic", "gic", "eig"),
        default="bic",
        help="rank-selection rule for pipelines that need one",
    )
    parser.add_argument("--gic-rho", type=float, default=2.0, help="GIC penalty parameter (>= 1)")
    parser.add_argument(
        "--eig-threshold", type=float, default=10.0, help="eigenvalue-gap threshold"
    )
    parser.add_argument("--known-rank", type=int, default=None, help="rank for IDT-AMF (known r)")
    parser.add_argument("--n-max", type=int, default=None, help="rank search bound (default n/2)")
    parser.add_argument("--loading", type=float, default=0.0, help="diagonal loading level")


def _experiment_config(args, detectors: tuple[str, ...]) -> harness.ExperimentConfig:
    scenario = ScenarioConfig.load(args.scenario)
    return harness.ExperimentConfig(
        scenario=scenario,
        detectors=detectors,
        pfa=args.pfa,
        n_calib_trials=args.calib_trials or max(1, round(100.0 / args.pfa)),
        n_pd_trials=getattr(args, "trials", 2000) or 2000,
        sinr_grid_db=getattr(args, "sinr", ()) or (),
        base_seed=args.seed,
        known_rank=args.known_rank,
        n_max=args.n_max,
        gic_rho=args.gic_rho,
        eig_threshold=args.eig_threshold,
        loading=args.loading,
        workers=args.threads,
    )


def _cmd_calibrate(args) -> int:
    config = _experiment_config(args, args.detectors)
    thresholds = harness.calibrate_thresholds(config, cache_path=args.threshold_cache)
    payload = {
        "thresholds": thresholds,
        "pfa": config.pfa,
        "n_calib_trials": config.n_calib_trials,
        "base_seed": config.base_seed,
    }
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")
    for det, thr in thresholds.items():
        print(f"{det}: threshold {thr:.6g}")
    print(f"wrote {out}")
    return 0


def _cmd_pd_curve(args) -> int:
    if not args.sinr:
        raise SystemExit("pd-curve needs --sinr")
    config = _experiment_config(args, args.detectors)
    if args.thresholds:
        thresholds = {
            k: float(v) for k, v in json.loads(Path(args.thresholds).read_text())["thresholds"].items()
        }
    else:
        thresholds = harness.calibrate_thresholds(config, cache_path=args.threshold_cache)
    curves = harness.pd_sweep(config, thresholds)
    result = harness.PdSweepResult(config=config, thresholds=thresholds, curves=curves)
    csv_path, sidecar = harness.emit_results(result, args.out)
    print(f"wrote {csv_path} and {sidecar}")
    return 0


def _cmd_trials(args) -> int:
    config = _experiment_config(args, (args.detector,))
    records = harness.run_detector_trials(
        config,
        detector=args.detector,
        hypothesis=args.hypothesis,
        sinr_db=args.sinr_db,
        threshold=args.threshold,
        n_trials=args.trials,
    )
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    with out.open("w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(harness.TRIAL_HEADER)
        for rec in records:
            writer.writerow(
                [
                    rec["trial"],
                    rec["seed"],
                    repr(rec["statistic"]),
                    "" if rec["r_hat"] is None else rec["r_hat"],
                    rec["decision"],
                ]
            )
    print(f"wrote {out} ({len(records)} trials)")
    return 0


def _classification_config(args, scenario: ScenarioConfig) -> harness.ClassificationConfig:
    grid = AngleGrid.from_span(
        args.grid_lo, args.grid_hi, args.grid_step, args.subset_size, scenario.target_aoa_deg
    )
    return harness.ClassificationConfig(
        scenario=scenario,
        grid=grid,
        pfa=args.pfa,
        false_target_prob=args.false_target_prob,
        n_calib_trials=args.calib_trials or 5000,
        n_trials=args.trials or 500,
        sinr_grid_db=args.sinr or (5.0, 9.0, 11.0, 13.0, 15.0, 17.0, 19.0, 21.0),
        confusion_sinr_db=args.confusion_sinr,
        rank_method=args.rank_rule,
        known_rank=args.known_rank,
        n_max=args.n_max,
        gic_rho=args.gic_rho,
        eig_threshold=args.eig_threshold,
        loading=args.loading,
        base_seed=args.seed,
        workers=args.threads,
    )


def _cmd_classify(args) -> int:
    scenario = ScenarioConfig.load(args.scenario)
    config = _classification_config(args, scenario)
    result = harness.run_classification_experiment(config)
    paths = harness.write_classification_outputs(result, args.out, stem=args.stem)
    for name, path in paths.items():
        print(f"wrote {name}: {path}")
    return 0


def _cmd_reproduce(args) -> int:
    config = presets.figure_experiment(
        args.figure,
        pfa=args.pfa,
        n_calib_trials=args.calib_trials,
        n_trials=args.trials,
        base_seed=args.seed,
        workers=args.threads,
    )
    if args.sinr:
        config = replace(config, sinr_grid_db=args.sinr)
    out = Path(args.out)
    stem = f"figure{args.figure}"
    if isinstance(config, harness.ExperimentConfig):
        result = harness.run_pd_experiment(config)
        csv_path, sidecar = harness.emit_results(result, out / f"{stem}.csv")
        print(f"wrote {csv_path} and {sidecar}")
    else:
        result = harness.run_classification_experiment(config)
        paths = harness.write_classification_outputs(result, out, stem=stem)
        for name, path in paths.items():
            print(f"wrote {name}: {path}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="eccmsim",
        description="Monte Carlo toolkit for jammer-robust adaptive radar detection",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    cal = sub.add_parser("calibrate", help="calibrate detection thresholds under H00")
    cal.add_argument("--scenario", required=True, help="scenario JSON file")
    cal.add_argument("--detectors", type=_parse_detectors, default=("MF", "IDT-AMF-BIC"))
    cal.add_argument("--calib-trials", type=int, default=None, help="default 100/pfa")
    cal.add_argument("--threshold-cache", default=None, help="JSON threshold cache file")
    cal.add_argument("--out", required=True, help="output thresholds JSON")
    _add_common(cal)
    _add_rank_flags(cal)
    cal.set_defaults(func=_cmd_calibrate)

    curve = sub.add_parser("pd-curve", help="detection probability versus SINR")
    curve.add_argument("--scenario", required=True)
    curve.add_argument("--detectors", type=_parse_detectors, default=("MF", "IDT-AMF-BIC"))
    curve.add_argument("--sinr", type=_parse_sinr_grid, default=(), help="lo:hi:step or list (dB)")
    curve.add_argument("--trials", type=int, default=2000, help="Pd trials per SINR point")
    curve.add_argument("--calib-trials", type=int, default=None)
    curve.add_argument("--thresholds", default=None, help="reuse thresholds JSON from calibrate")
    curve.add_argument("--threshold-cache", default=None)
    curve.add_argument("--out", required=True, help="output CSV path")
    _add_common(curve)
    _add_rank_flags(curve)
    curve.set_defaults(func=_cmd_pd_curve)

    trials = sub.add_parser("trials", help="per-trial detector records to CSV")
    trials.add_argument("--scenario", required=True)
    trials.add_argument("--detector", required=True, choices=DETECTOR_IDS)
    trials.add_argument("--hypothesis", default="H00", choices=("H00", "H1", "H2", "H3"))
    trials.add_argument("--sinr-db", type=float, default=15.0, help="target SINR for H1/H3")
    trials.add_argument("--threshold", type=float, required=True)
    trials.add_argument("--trials", type=int, default=1000)
    trials.add_argument("--calib-trials", type=int, default=1)
    trials.add_argument("--out", required=True)
    _add_common(trials)
    _add_rank_flags(trials)
    trials.set_defaults(func=_cmd_trials)

    classify = sub.add_parser("classify", help="sparse detector/classifier experiment")
    classify.add_argument("--scenario", required=True)
    classify.add_argument("--sinr", type=_parse_sinr_grid, default=(), help="sweep grid (dB)")
    classify.add_argument("--confusion-sinr", type=float, default=20.0)
    classify.add_argument("--trials", type=int, default=500)
    classify.add_argument("--calib-trials", type=int, default=5000)
    classify.add_argument("--false-target-prob", type=float, default=1e-2)
    classify.add_argument("--grid-lo", type=float, default=-22.0)
    classify.add_argument("--grid-hi", type=float, default=22.0)
    classify.add_argument("--grid-step", type=float, default=1.0)
    classify.add_argument("--subset-size", type=int, default=5)
    classify.add_argument("--stem", default="classification", help="output file stem")
    classify.add_argument("--out", required=True, help="output directory")
    _add_common(classify)
    _add_rank_flags(classify)
    classify.set_defaults(func=_cmd_classify)

    rep = sub.add_parser("reproduce", help="run a preset figure configuration")
    rep.add_argument("--figure", type=int, required=True, choices=presets.FIGURES)
    rep.add_argument("--trials", type=int, default=None, help="per-point trials")
    rep.add_argument("--calib-trials", type=int, default=None)
    rep.add_argument("--sinr", type=_parse_sinr_grid, default=(), help="override SINR grid")
    rep.add_argument("--out", required=True, help="output directory")
    _add_common(rep)
    rep.set_defaults(func=_cmd_reproduce)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
