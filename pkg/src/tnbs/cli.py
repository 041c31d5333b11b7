"""Command-line front end: fit, predict, simulate, synth, cv.

Data files are two-column CSVs with header ``u,y``. Every command echoes its
fully resolved configuration and can write a machine-readable JSON report
next to the human-readable output; report contents are deterministic for a
fixed seed and inputs (wall time is printed but kept out of the sidecar).
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
import time
from pathlib import Path

import numpy as np

from .bspline import make_basis
from .model import LagSpec, Scaling, TnbsModel, rmse
from .solver import FitConfig, NumericalError, als_fit, cross_validate_lambda
from .synth import SynthSpec, make_dataset

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_NUMERIC = 3


def read_signal_csv(path) -> tuple[np.ndarray, np.ndarray]:
    u, y = [], []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [c.strip().lower() for c in header] != ["u", "y"]:
            raise ValueError(f"{path}: row 1: expected header 'u,y'")
        for line_no, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 2:
                raise ValueError(f"{path}: row {line_no}: expected 2 columns, got {len(row)}")
            try:
                u.append(float(row[0]))
                y.append(float(row[1]))
            except ValueError:
                raise ValueError(f"{path}: row {line_no}: cannot parse {row!r} as numbers") from None
    if not u:
        raise ValueError(f"{path}: no data rows")
    return np.asarray(u), np.asarray(y)


def write_signal_csv(path, u, y) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write("u,y\n")
        for a, b in zip(u, y):
            fh.write(f"{float(a)!r},{float(b)!r}\n")


def _write_report(path, payload: dict) -> None:
    if path:
        Path(path).write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n",
                              encoding="utf-8")


def _echo_config(config: dict) -> None:
    print("resolved configuration:")
    for key in sorted(config):
        print(f"  {key} = {config[key]}")


def _int_list(text: str) -> list[int]:
    try:
        return [int(part) for part in text.split(",") if part.strip() != ""]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")


def _float_list(text: str) -> list[float]:
    try:
        return [float(part) for part in text.split(",") if part.strip() != ""]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")


def _scalar_or_tuple(values: list):
    return values[0] if len(values) == 1 else tuple(values)


def _fit_inputs(args):
    lags = LagSpec(tuple(args.lags_u), tuple(args.lags_y))
    basis = make_basis(args.degree, args.knots)
    cfg = FitConfig(
        ranks=_scalar_or_tuple(args.ranks),
        penalty_order=args.alpha,
        lambdas=_scalar_or_tuple(args.lam) if hasattr(args, "lam") else 0.0,
        max_sweeps=args.sweeps,
        epsilon=args.epsilon,
        seed=args.seed,
        batch_size=args.batch_size,
    )
    scaling = Scaling.identity() if args.scaling == "unit" else None
    return lags, basis, cfg, scaling


def _fit_config_echo(args, extra=None) -> dict:
    config = {
        "data": str(args.data),
        "degree": args.degree,
        "knots": args.knots,
        "ranks": args.ranks,
        "lags_u": args.lags_u,
        "lags_y": args.lags_y,
        "alpha": args.alpha,
        "sweeps": args.sweeps,
        "epsilon": args.epsilon,
        "seed": args.seed,
        "batch_size": args.batch_size,
        "scaling": args.scaling,
    }
    if hasattr(args, "lam"):
        config["lambda"] = args.lam
    if extra:
        config.update(extra)
    return config


def cmd_fit(args) -> int:
    u, y = read_signal_csv(args.data)
    lags, basis, cfg, scaling = _fit_inputs(args)
    config = _fit_config_echo(args, {"out": str(args.out)})
    _echo_config(config)

    start_time = time.perf_counter()
    model, trace = als_fit(u, y, lags, basis, cfg, scaling=scaling)
    wall = time.perf_counter() - start_time

    pred = model.predict(u, y)
    train_rmse = rmse(y[lags.start_index:], pred)
    model.save(args.out)

    print(f"training rmse: {train_rmse:.6g}")
    print(f"parameters: {model.parameter_count}")
    print(f"sweeps: {trace.sweeps_run} (stopped early: {trace.stopped_early})")
    print(f"wall time: {wall:.2f} s")
    print(f"model written to {args.out}")
    _write_report(args.report, {
        "command": "fit",
        "config": config,
        "train_rmse": train_rmse,
        "parameter_count": model.parameter_count,
        "sweeps_run": trace.sweeps_run,
        "stopped_early": trace.stopped_early,
        "first_core_objectives": trace.first_core_objectives,
        "clipped_regressors": trace.clipped_regressors,
        "fallback_solves": trace.fallback_solves,
    })
    return EXIT_OK


def _write_prediction_csv(path, offset, truth, predicted) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write("n,y,yhat\n")
        for i, (a, b) in enumerate(zip(truth, predicted)):
            fh.write(f"{offset + i},{float(a)!r},{float(b)!r}\n")


def cmd_predict(args) -> int:
    model = TnbsModel.load(args.model)
    u, y = read_signal_csv(args.data)
    config = {"model": str(args.model), "data": str(args.data)}
    _echo_config(config)
    pred = model.predict(u, y)
    start = model.lags.start_index
    score = rmse(y[start:], pred)
    print(f"prediction rmse: {score:.6g} over {len(pred)} samples")
    if args.out:
        _write_prediction_csv(args.out, start, y[start:], pred)
        print(f"per-sample output written to {args.out}")
    _write_report(args.report, {
        "command": "predict",
        "config": config,
        "rmse": score,
        "samples": len(pred),
        "start_index": start,
    })
    return EXIT_OK


def cmd_simulate(args) -> int:
    model = TnbsModel.load(args.model)
    u, y = read_signal_csv(args.data)
    config = {"model": str(args.model), "data": str(args.data)}
    _echo_config(config)
    start = model.lags.start_index
    if len(y) <= start:
        raise ValueError(f"data of length {len(y)} is too short for maximum lag {start}")
    sim = model.simulate(u, y[:start])
    score = rmse(y[start:], sim)
    print(f"simulation rmse: {score:.6g} over {len(sim)} samples")
    if args.out:
        _write_prediction_csv(args.out, start, y[start:], sim)
        print(f"per-sample output written to {args.out}")
    _write_report(args.report, {
        "command": "simulate",
        "config": config,
        "rmse": score,
        "samples": len(sim),
        "start_index": start,
    })
    return EXIT_OK


def cmd_synth(args) -> int:
    spec = SynthSpec(
        input_lags=tuple(args.lags_u),
        output_lags=tuple(args.lags_y),
        degree=args.degree,
        knot_param=args.knots,
        ranks=_scalar_or_tuple(args.ranks),
        w_min=args.w_min,
        w_max=args.w_max,
        n_samples=args.n,
        smoothing_window=args.window,
        seed=args.seed,
    )
    config = {
        "degree": spec.degree, "knots": spec.knot_param, "ranks": args.ranks,
        "lags_u": args.lags_u, "lags_y": args.lags_y,
        "w_min": spec.w_min, "w_max": spec.w_max,
        "n": spec.n_samples, "split": args.split, "snr_db": args.snr,
        "window": spec.smoothing_window, "seed": spec.seed,
        "out_prefix": args.out_prefix,
    }
    _echo_config(config)
    data = make_dataset(spec, snr_db=args.snr, n_estimation=args.split)
    est_path = f"{args.out_prefix}_est.csv"
    test_path = f"{args.out_prefix}_test.csv"
    model_path = f"{args.out_prefix}_true_model.json"
    write_signal_csv(est_path, data.u_est, data.y_est)
    write_signal_csv(test_path, data.u_test, data.y_test)
    data.true_model.save(model_path)
    print(f"estimation set ({len(data.u_est)} rows) written to {est_path}")
    print(f"test set ({len(data.u_test)} rows) written to {test_path}")
    print(f"true model written to {model_path}")
    _write_report(args.report, {
        "command": "synth",
        "config": config,
        "estimation_rows": len(data.u_est),
        "test_rows": len(data.u_test),
        "files": [est_path, test_path, model_path],
    })
    return EXIT_OK


def cmd_cv(args) -> int:
    u, y = read_signal_csv(args.data)
    lags, basis, cfg, scaling = _fit_inputs(args)
    config = _fit_config_echo(args, {"lambdas": args.lambdas, "folds": args.folds})
    _echo_config(config)
    best, scores = cross_validate_lambda(
        u, y, lags, basis, cfg, args.lambdas, args.folds, scaling=scaling
    )
    print(f"{'lambda':>12}  " + "  ".join(f"fold {f}" for f in range(args.folds)) + "    mean")
    for lam, row in zip(args.lambdas, scores):
        cells = "  ".join(f"{v:6.4g}" for v in row)
        print(f"{lam:>12g}  {cells}  {row.mean():6.4g}")
    print(f"chosen lambda: {best:g}")
    _write_report(args.report, {
        "command": "cv",
        "config": config,
        "lambda_grid": args.lambdas,
        "scores": [[float(v) for v in row] for row in scores],
        "mean_scores": [float(v) for v in scores.mean(axis=1)],
        "chosen_lambda": best,
    })
    return EXIT_OK


def _add_model_flags(p, with_lambda: bool) -> None:
    p.add_argument("--degree", type=int, default=2, help="B-spline degree")
    p.add_argument("--knots", type=int, default=6,
                   help="knot parameter m (the sequence has m+1 knots)")
    p.add_argument("--ranks", type=_int_list, default=[4],
                   help="interior train ranks: scalar or comma list")
    p.add_argument("--lags-u", type=_int_list, default=[1], help="input lags, comma list")
    p.add_argument("--lags-y", type=_int_list, default=[1], help="output lags, comma list")
    p.add_argument("--alpha", type=int, default=1, help="difference penalty order")
    if with_lambda:
        p.add_argument("--lam", type=_float_list, default=[0.0],
                       help="penalty weight: scalar or per-dimension comma list")
    p.add_argument("--sweeps", type=int, default=16, help="maximum number of sweeps")
    p.add_argument("--epsilon", type=float, default=0.0,
                   help="stopping tolerance on the first-core objective")
    p.add_argument("--batch-size", type=int, default=None,
                   help="rows sampled per core update (default: all)")
    p.add_argument("--scaling", choices=("data", "unit"), default="data",
                   help="min-max scaling fitted from data, or identity for data in [0,1]")
    p.add_argument("--seed", type=int, default=0, help="RNG seed")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="tnbs",
        description="NARX identification with tensor-train B-spline surfaces",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("fit", help="fit a model to a data CSV")
    p.add_argument("--data", required=True, help="estimation CSV (header u,y)")
    p.add_argument("--out", default="model.json", help="model output path")
    p.add_argument("--report", default=None, help="JSON report sidecar path")
    _add_model_flags(p, with_lambda=True)
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("predict", help="one-step prediction with a saved model")
    p.add_argument("--model", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--out", default=None, help="per-sample CSV (n,y,yhat)")
    p.add_argument("--report", default=None)
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("simulate", help="free-run simulation with a saved model")
    p.add_argument("--model", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--out", default=None, help="per-sample CSV (n,y,yhat)")
    p.add_argument("--report", default=None)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("synth", help="generate the synthetic benchmark dataset")
    p.add_argument("--seed", type=int, default=0, help="RNG seed")
    p.add_argument("--out-prefix", default="synth", help="prefix for the emitted files")
    p.add_argument("--n", type=int, default=3000, help="total signal length")
    p.add_argument("--split", type=int, default=2000, help="estimation rows")
    p.add_argument("--snr", type=float, default=float("inf"),
                   help="SNR in dB for estimation noise ('inf' for none)")
    p.add_argument("--degree", type=int, default=2)
    p.add_argument("--knots", type=int, default=6)
    p.add_argument("--ranks", type=_int_list, default=[5])
    p.add_argument("--lags-u", type=_int_list, default=[1, 2, 3, 4])
    p.add_argument("--lags-y", type=_int_list, default=[1, 2, 3, 4])
    p.add_argument("--w-min", type=float, default=-4.0)
    p.add_argument("--w-max", type=float, default=5.0)
    p.add_argument("--window", type=int, default=5, help="Gaussian smoothing window")
    p.add_argument("--report", default=None)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("cv", help="choose the penalty weight by cross-validation")
    p.add_argument("--data", required=True)
    p.add_argument("--lambdas", type=_float_list, required=True,
                   help="comma-separated candidate penalty weights")
    p.add_argument("--folds", type=int, default=3)
    p.add_argument("--report", default=None)
    _add_model_flags(p, with_lambda=False)
    p.set_defaults(func=cmd_cv)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (NumericalError, np.linalg.LinAlgError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
