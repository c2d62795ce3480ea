"""Command-line pipeline: datagen, train, simulate, bench.

Exit codes: 0 success, 1 runtime failure, 2 usage or configuration error.
Wall-clock data and timestamps appear only in a ``meta`` block (or on
stdout) so reruns with the same inputs produce the same artifacts.
"""
from __future__ import annotations

import argparse
import dataclasses
import datetime as dt
import json
import sys
import time
from pathlib import Path

import numpy as np

from . import mlp
from .config import load_config
from .dsss import (Provenance, generate_dataset, read_dataset, split_test_validation,
                   write_dataset)
from .exceptions import (ConfigError, DatasetParseError, DomainError, ModelLoadError,
                         TrainingError)
from .harmonics import OperatingPoint
from .ripple import compare_methods
from .solver import shifts_for_operating_point

EXIT_OK, EXIT_RUNTIME, EXIT_USAGE = 0, 1, 2


def _meta(**extra) -> dict:
    return {"created": dt.datetime.now(dt.timezone.utc).isoformat(timespec="seconds"), **extra}


def _write_json(path, doc) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(doc, indent=2) + "\n")


def _positive_int(text):
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError(f"must be >= 1, got {value}")
    return value


def _float_list(n):
    def parse(text):
        try:
            values = [float(v) for v in text.split(",")]
        except ValueError:
            raise argparse.ArgumentTypeError(f"expected {n} comma-separated numbers, got {text!r}") from None
        if len(values) != n:
            raise argparse.ArgumentTypeError(f"expected {n} comma-separated numbers, got {len(values)}")
        return values
    return parse


def _seed_list(text):
    """``5`` means seeds 0..4; ``3,7,11`` lists them explicitly."""
    try:
        if "," in text:
            return [int(s) for s in text.split(",")]
        count = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a count or a comma list, got {text!r}") from None
    if count < 1:
        raise argparse.ArgumentTypeError("need at least one seed")
    return list(range(count))


# -- datagen -----------------------------------------------------------------

def cmd_datagen(args) -> int:
    cfg = load_config(args.config)
    which = Provenance(args.which)
    expected = cfg.sweep.n_data(which)
    start = time.perf_counter()
    ds = generate_dataset(cfg.sweep, which, cfg.system)
    write_dataset(ds, args.out)
    elapsed = time.perf_counter() - start
    print(f"{which.value}: {len(ds)} rows (lattice product {expected}) -> {args.out} in {elapsed:.2f} s")
    return EXIT_OK


# -- train -------------------------------------------------------------------

def _train_config(cfg, args):
    fields = {"hidden_layers": args.hidden, "width": args.width, "dropout": args.dropout,
              "batch_size": args.batch_size, "learning_rate": args.learning_rate,
              "max_epochs": args.max_epochs, "patience": args.patience,
              "lr_patience": args.lr_patience, "lr_factor": args.lr_factor, "min_lr": args.min_lr}
    overrides = {k: v for k, v in fields.items() if v is not None}
    return dataclasses.replace(cfg.train, **overrides)


def _summary(runs, key, best):
    values = [r["test"][key] for r in runs]
    return {"mean": float(np.mean(values)), "best": float(best(values))}


def cmd_train(args) -> int:
    cfg = load_config(args.config)
    base = _train_config(cfg, args)
    train_ds = read_dataset(args.train, Provenance.TRAIN)
    testval = read_dataset(args.testval, Provenance.TESTVAL)
    test, val = split_test_validation(testval, args.split_seed)
    seeds = args.seeds if args.seeds is not None else [args.seed if args.seed is not None else base.seed]

    runs, models = [], []
    for seed in seeds:
        run_cfg = dataclasses.replace(base, seed=seed)
        start = time.perf_counter()
        model, history = mlp.fit(train_ds.features, train_ds.targets, val.features, val.targets,
                                 run_cfg, verbose=args.verbose)
        elapsed = time.perf_counter() - start
        report = mlp.evaluate(model, test.features, test.targets, cfg.counter_ratio)
        runs.append({"seed": seed, "best_epoch": history.best_epoch,
                     "epochs": len(history.val_mse), "val_mse": min(history.val_mse),
                     "test": report.to_dict(), "wall_time_s": elapsed})
        models.append(model)
        print(f"seed {seed}: test MAE {report.mae_deg:.3f} deg, PII3 {report.pii3:.2f} %, "
              f"epochs {len(history.val_mse)}, {elapsed:.1f} s")

    # deploy the run with the lowest validation loss, never peek at the test half
    chosen = int(np.argmin([r["val_mse"] for r in runs]))
    fused = mlp.fuse_normalization(models[chosen])
    mlp.save_model(fused, args.out)

    timings = [r.pop("wall_time_s") for r in runs]
    doc = {
        "config": dataclasses.asdict(base),
        "split_seed": args.split_seed,
        "rows": {"train": len(train_ds), "val": len(val), "test": len(test)},
        "params": mlp.count_params(fused),
        "flops": mlp.count_flops(fused),
        "runs": runs,
        "mae_deg": _summary(runs, "mae_deg", min),
        "pii3": _summary(runs, "pii3", max),
        "mse": _summary(runs, "mse", min),
        "deployed_seed": runs[chosen]["seed"],
        "deployed": runs[chosen]["test"],
        "meta": _meta(wall_time_s=timings),
    }
    report_path = args.report or Path(args.out).with_suffix(".report.json")
    _write_json(report_path, doc)
    print(f"deployed seed {runs[chosen]['seed']} -> {args.out}; report -> {report_path}")
    return EXIT_OK


# -- simulate ----------------------------------------------------------------

def _warn_extrapolation(model, features):
    outside = [i for i, x in enumerate(features)
               if x < model.x_min[i] - 1e-12 or x > model.x_max[i] + 1e-12]
    if outside:
        names = ", ".join(("iout1", "iout2", "iout3", "d1", "d2", "d3", "vin")[i] for i in outside)
        print(f"warning: operating point outside the trained range ({names}); "
              "the network extrapolates", file=sys.stderr)
    return outside


def cmd_simulate(args) -> int:
    cfg = load_config(args.config)
    model = mlp.load_model(args.model)
    if len(args.iout) != cfg.system.n_phases:
        raise ConfigError(f"--iout needs {cfg.system.n_phases} values")
    if args.duty is not None:
        op = OperatingPoint(tuple(args.iout), tuple(args.duty), args.vin)
    else:
        op = OperatingPoint.from_vin(cfg.system, args.iout, args.vin)
    outside = _warn_extrapolation(model, op.as_features())

    cmp = compare_methods(cfg.system, op, model, cfg.counter_ratio,
                          samples_per_period=args.samples, k_max=args.k_max)
    out = Path(args.out)
    spectra = {}
    for method, result in cmp.results.items():
        path = out.with_name(f"{out.stem}.{method.value}.spectrum.csv")
        path.parent.mkdir(parents=True, exist_ok=True)
        result.spectrum.write_csv(path)
        spectra[method.value] = path.name
    doc = {
        "operating_point": {"i_out": list(op.i_out), "d": list(op.d), "v_in": op.v_in},
        "k": cfg.system.k,
        "counter_ratio": cfg.counter_ratio,
        "samples_per_period": args.samples,
        "extrapolated_features": outside,
        "methods": cmp.to_dict(),
        "spectra": spectra,
        "meta": _meta(),
    }
    _write_json(out, doc)
    for name, res in doc["methods"].items():
        print(f"{name:>10}: A_in1 {res['A_in1']:.6g} A, rms {res['rms']:.6g} A")
    return EXIT_OK


# -- bench -------------------------------------------------------------------

def _latency(fn, inputs):
    times = np.empty(len(inputs))
    for i, x in enumerate(inputs):
        start = time.perf_counter()
        fn(x)
        times[i] = time.perf_counter() - start
    return {"median_us": float(np.median(times) * 1e6), "p99_us": float(np.percentile(times, 99) * 1e6)}


def cmd_bench(args) -> int:
    cfg = load_config(args.config)
    model = mlp.load_model(args.model)
    if not model.fused:
        model = mlp.fuse_normalization(model)
    rng = np.random.default_rng(args.seed)
    spv, epv = np.array(cfg.sweep.spv), np.array(cfg.sweep.epv)
    points = []
    for _ in range(args.iters):
        i_out = rng.uniform(spv[:3], epv[:3])
        v_in = rng.uniform(spv[6], epv[6])
        points.append(OperatingPoint.from_vin(cfg.system, i_out, v_in))
    features = [p.as_features() for p in points]

    doc = {
        "iters": args.iters,
        "seed": args.seed,
        "params": mlp.count_params(model),
        "flops": mlp.count_flops(model),
        "methods": {
            "analytic": _latency(lambda op: shifts_for_operating_point(cfg.system, op), points),
            "mlp_fused": _latency(lambda x: mlp.forward(model, x), features),
        },
        "meta": _meta(),
    }
    text = json.dumps(doc, indent=2, sort_keys=True)
    if args.out:
        _write_json(args.out, json.loads(text))
    print(text)
    return EXIT_OK


# -- entry point -------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="phaseshift",
                                     description="Optimum phase shifts for parallel buck converters.")
    parser.add_argument("--config", help="JSON run config (defaults: 3-phase 200 kHz prototype, desk sweep)")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("datagen", help="write a DSSS dataset CSV")
    p.add_argument("--which", choices=[v.value for v in Provenance], required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_datagen)

    p = sub.add_parser("train", help="train the surrogate and write a fused model")
    p.add_argument("--train", required=True, help="training CSV")
    p.add_argument("--testval", required=True, help="test/validation CSV (split 50/50)")
    p.add_argument("--out", required=True, help="fused model JSON")
    p.add_argument("--report", help="EvalReport JSON (default: <out>.report.json)")
    p.add_argument("--hidden", type=_positive_int)
    p.add_argument("--width", type=_positive_int)
    p.add_argument("--dropout", type=float)
    p.add_argument("--batch-size", type=_positive_int)
    p.add_argument("--learning-rate", type=float)
    p.add_argument("--max-epochs", type=_positive_int)
    p.add_argument("--patience", type=_positive_int)
    p.add_argument("--lr-patience", type=int)
    p.add_argument("--lr-factor", type=float)
    p.add_argument("--min-lr", type=float)
    seeds = p.add_mutually_exclusive_group()
    seeds.add_argument("--seed", type=int)
    seeds.add_argument("--seeds", type=_seed_list, help="count (5 -> 0..4) or comma list")
    p.add_argument("--split-seed", type=int, default=0)
    p.add_argument("--verbose", action="store_true")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("simulate", help="compare no/even/optimum/ANN phase shifting")
    p.add_argument("--model", required=True)
    p.add_argument("--iout", type=_float_list(3), required=True, help="a,b,c amps")
    p.add_argument("--vin", type=float, required=True)
    p.add_argument("--duty", type=_float_list(3), help="a,b,c (default v_out/v_in)")
    p.add_argument("--samples", type=_positive_int, default=4096)
    p.add_argument("--k-max", type=int, default=20)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("bench", help="latency of the analytic solver vs the fused network")
    p.add_argument("--model", required=True)
    p.add_argument("--iters", type=_positive_int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out")
    p.set_defaults(func=cmd_bench)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, DatasetParseError, ModelLoadError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (TrainingError, DomainError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
