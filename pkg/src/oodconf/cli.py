"""Command-line surface tying generators, training, scoring and metrics
into reproducible experiments.

Subcommands: gen-data, train, confidence-map, ood-eval, sweep-epsilon,
calibrate. Exit codes: 0 success, 1 usage error, 2 data error, 3 numeric
failure. Output files are written atomically (temp file + rename).
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import sys

import numpy as np

from . import metrics, scorers
from .data import (DatasetFormatError, GridSpec, gen_grid, gen_noise_ood,
                   gen_xor, load_csv, load_features_csv, save_csv,
                   save_features_csv)
from .metrics import CalibrationError
from .net import NetworkSpec, NumericError, forward
from .trainer import (ModelFormatError, ModelShapeError, ModelVersionError,
                      TrainConfig, atomic_write_text, evaluate, load_model,
                      save_model, train)

SCORER_CHOICES = ("confidence", "softmax", "odin")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _parse_bounds(text: str) -> list:
    """'-1:1,-2:2' -> [(-1.0, 1.0), (-2.0, 2.0)]."""
    try:
        pairs = []
        for part in text.split(","):
            lo, hi = part.split(":")
            pairs.append((float(lo), float(hi)))
        return pairs
    except ValueError:
        raise UsageError(
            f"bad bounds {text!r} (expected lo:hi pairs joined by commas)"
        ) from None


def _parse_int_list(text: str) -> tuple:
    try:
        return tuple(int(v) for v in text.split(",") if v.strip())
    except ValueError:
        raise UsageError(f"bad integer list {text!r}") from None


def _read_config_file(path) -> dict:
    """Flat key=value file; keys mirror CLI flag names."""
    values = {}
    with open(path) as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise DatasetFormatError(
                    f"{path}: line {lineno}: expected key=value"
                )
            key, _, value = line.partition("=")
            values[key.strip().replace("-", "_")] = value.strip()
    return values


def build_parser() -> _Parser:
    parser = _Parser(prog="oodconf")
    sub = parser.add_subparsers(dest="command", metavar="command")

    p = sub.add_parser("gen-data", help="generate synthetic datasets")
    p.add_argument("kind", choices=("xor", "uniform", "gaussian", "grid"))
    p.add_argument("--n", type=int, default=500)
    p.add_argument("--noise", type=float, default=0.0,
                   help="label-flip probability (xor only)")
    p.add_argument("--dim", type=int, default=2)
    p.add_argument("--bounds", type=str, default=None,
                   help="per-axis lo:hi pairs, e.g. '-1:1,-1:1'")
    p.add_argument("--exclude", type=str, default=None,
                   help="reject samples inside this box (noise kinds)")
    p.add_argument("--resolution", type=str, default="50",
                   help="grid points per axis (grid only)")
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--out", required=True)

    p = sub.add_parser("train", help="train a confidence model")
    p.add_argument("--data", required=True, help="labeled dataset CSV")
    p.add_argument("--out", required=True, help="model JSON path")
    p.add_argument("--history", default=None, help="history CSV path")
    p.add_argument("--config", default=None, help="key=value config file")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--epochs", type=int, default=None)
    p.add_argument("--batch-size", type=int, default=None)
    p.add_argument("--lr", type=float, default=None)
    p.add_argument("--momentum", type=float, default=None)
    p.add_argument("--beta", type=float, default=None)
    p.add_argument("--lambda-init", type=float, default=None)
    p.add_argument("--adjust-factor", type=float, default=None)
    p.add_argument("--hint-prob", type=float, default=None)
    p.add_argument("--trunk", type=str, default=None,
                   help="trunk widths, e.g. '100,100,100'")
    p.add_argument("--head-width", type=int, default=None)

    p = sub.add_parser("confidence-map",
                       help="evaluate p and c on a 2D grid")
    p.add_argument("--model", required=True)
    p.add_argument("--bounds", default="-1:1,-1:1")
    p.add_argument("--resolution", type=str, default="100")
    p.add_argument("--out", required=True)

    p = sub.add_parser("ood-eval", help="score and report detection metrics")
    p.add_argument("--model", required=True)
    p.add_argument("--in-data", required=True)
    p.add_argument("--out-data", required=True)
    p.add_argument("--scorer", choices=SCORER_CHOICES + ("all",),
                   default="confidence")
    p.add_argument("--epsilon", type=float, default=0.0)
    p.add_argument("--temperature", type=float, default=1000.0)
    p.add_argument("--report", default=None, help="report JSON path")
    p.add_argument("--scores-dir", default=None,
                   help="write per-sample score CSVs here")

    p = sub.add_parser("sweep-epsilon",
                       help="grid search the perturbation magnitude")
    p.add_argument("--model", required=True)
    p.add_argument("--in-data", required=True)
    p.add_argument("--out-data", required=True)
    p.add_argument("--scorer", choices=SCORER_CHOICES, default="confidence")
    p.add_argument("--temperature", type=float, default=1000.0)
    p.add_argument("--grid", type=str, default=None,
                   help="comma-separated epsilon values; default is a "
                        "21-point grid scaled to the in-data spread")

    p = sub.add_parser("calibrate", help="choose a detection threshold")
    p.add_argument("--model", required=True)
    p.add_argument("--method", choices=("true-ood", "misclassified"),
                   default="true-ood")
    p.add_argument("--in-data", default=None,
                   help="in-distribution features (true-ood method)")
    p.add_argument("--out-data", default=None,
                   help="OOD features (true-ood method)")
    p.add_argument("--data", default=None,
                   help="labeled holdout CSV (misclassified method)")
    p.add_argument("--scorer", choices=("confidence", "softmax"),
                   default="confidence")
    p.add_argument("--epsilon", type=float, default=0.0)
    p.add_argument("--report", default=None, help="report JSON path")
    return parser


def _cmd_gen_data(args) -> int:
    if args.kind == "xor":
        dataset = gen_xor(args.n, args.noise, args.seed)
        save_csv(dataset, args.out)
    elif args.kind in ("uniform", "gaussian"):
        bounds = _parse_bounds(args.bounds) if args.bounds else None
        exclude = _parse_bounds(args.exclude) if args.exclude else None
        features = gen_noise_ood(args.n, args.kind, args.dim, args.seed,
                                 bounds=bounds, exclude=exclude)
        save_features_csv(features, args.out)
    else:
        bounds = _parse_bounds(args.bounds or "-1:1,-1:1")
        res = _parse_int_list(args.resolution)
        if len(res) == 1:
            res = res * len(bounds)
        features = gen_grid(GridSpec(tuple(bounds), res))
        save_features_csv(features, args.out)
    print(f"wrote {args.out}")
    return 0


_TRAIN_KEYS = {
    "seed": int, "epochs": int, "batch_size": int, "lr": float,
    "momentum": float, "beta": float, "lambda_init": float,
    "adjust_factor": float, "hint_prob": float,
}


def _cmd_train(args) -> int:
    file_values = _read_config_file(args.config) if args.config else {}

    def pick(key, cast, default):
        flag = getattr(args, key)
        if flag is not None:
            return flag
        if key in file_values:
            try:
                return cast(file_values[key])
            except ValueError:
                raise DatasetFormatError(
                    f"{args.config}: bad value for {key}: "
                    f"{file_values[key]!r}"
                ) from None
        return default

    seed = pick("seed", int, None)
    if seed is None:
        raise UsageError("a seed is required (--seed or seed= in --config)")
    config = TrainConfig(
        epochs=pick("epochs", int, 30),
        batch_size=pick("batch_size", int, 10),
        learning_rate=pick("lr", float, 0.1),
        momentum=pick("momentum", float, 0.9),
        beta=pick("beta", float, 0.3),
        lambda_init=pick("lambda_init", float, 0.1),
        adjust_factor=pick("adjust_factor", float, 1.01),
        hint_probability=pick("hint_prob", float, 0.5),
        seed=seed,
    )

    dataset = load_csv(args.data)
    trunk = args.trunk or file_values.get("trunk")
    head_width = args.head_width or file_values.get("head_width")
    network = NetworkSpec(
        input_dim=dataset.features.shape[1],
        trunk_widths=_parse_int_list(trunk) if trunk else (100, 100, 100),
        head_width=int(head_width) if head_width else 100,
        num_classes=dataset.num_classes,
    )

    params, history = train(config, dataset, network)
    save_model(params, args.out)
    if args.history:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(
            ["epoch", "task_loss", "confidence_loss", "lambda",
             "train_accuracy"]
        )
        for h in history:
            writer.writerow(
                [h.epoch, repr(h.task_loss), repr(h.confidence_loss),
                 repr(h.lam), repr(h.train_accuracy)]
            )
        atomic_write_text(args.history, buf.getvalue())
    final = history[-1]
    print(
        f"trained {config.epochs} epochs: accuracy={final.train_accuracy:.4f} "
        f"task_loss={final.task_loss:.4f} "
        f"confidence_loss={final.confidence_loss:.4f} lambda={final.lam:.4g}"
    )
    print(f"wrote {args.out}")
    return 0


def _cmd_confidence_map(args) -> int:
    params, spec = load_model(args.model)
    if spec.input_dim != 2:
        raise ValueError(
            f"confidence-map needs a 2D model, got input_dim={spec.input_dim}"
        )
    bounds = _parse_bounds(args.bounds)
    if len(bounds) != 2:
        raise UsageError("confidence-map bounds must cover exactly 2 axes")
    res = _parse_int_list(args.resolution)
    if len(res) == 1:
        res = res * 2
    grid = gen_grid(GridSpec(tuple(bounds), res))

    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    m = spec.num_classes
    writer.writerow(["x1", "x2"] + [f"p{i}" for i in range(m)] + ["c"])
    for row in grid:
        out, _ = forward(params, row)
        writer.writerow(
            [repr(v) for v in row]
            + [repr(v) for v in out.p]
            + [repr(out.c)]
        )
    atomic_write_text(args.out, buf.getvalue())
    print(f"wrote {args.out} ({grid.shape[0]} points)")
    return 0


def _write_scores_csv(path, scores) -> None:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["sample_id", "score"])
    for i, s in enumerate(scores):
        writer.writerow([i, repr(float(s))])
    atomic_write_text(path, buf.getvalue())


def _report_object(name, args, in_scores, out_scores,
                   calibration_method="true-ood") -> dict:
    report = metrics.metric_report(in_scores, out_scores)
    obj = {"scorer": name, "epsilon": args.epsilon}
    if name == "odin":
        obj["temperature"] = args.temperature
    obj.update(report.to_dict())
    obj["calibration_method"] = calibration_method
    return obj


def _cmd_ood_eval(args) -> int:
    params, _ = load_model(args.model)
    in_features = load_features_csv(args.in_data)
    out_features = load_features_csv(args.out_data)

    names = SCORER_CHOICES if args.scorer == "all" else (args.scorer,)
    objects = []
    for name in names:
        in_scores = scorers.score_batch(
            params, in_features, name, args.epsilon, args.temperature
        )
        out_scores = scorers.score_batch(
            params, out_features, name, args.epsilon, args.temperature
        )
        obj = _report_object(name, args, in_scores, out_scores)
        objects.append(obj)
        if args.scores_dir:
            import os

            os.makedirs(args.scores_dir, exist_ok=True)
            _write_scores_csv(
                os.path.join(args.scores_dir, f"{name}_in.csv"), in_scores
            )
            _write_scores_csv(
                os.path.join(args.scores_dir, f"{name}_out.csv"), out_scores
            )
        print(
            f"{name}: fpr@95tpr={obj['fpr_at_95_tpr']:.4f} "
            f"detection_error={obj['detection_error']:.4f} "
            f"auroc={obj['auroc']:.4f} aupr_in={obj['aupr_in']:.4f} "
            f"aupr_out={obj['aupr_out']:.4f} delta={obj['delta']}"
        )
    if args.report:
        payload = objects[0] if len(objects) == 1 else objects
        atomic_write_text(args.report, json.dumps(payload, indent=2) + "\n")
        print(f"wrote {args.report}")
    return 0


def _cmd_sweep_epsilon(args) -> int:
    params, _ = load_model(args.model)
    in_features = load_features_csv(args.in_data)
    out_features = load_features_csv(args.out_data)
    if args.grid:
        try:
            grid = [float(v) for v in args.grid.split(",") if v.strip()]
        except ValueError:
            raise UsageError(f"bad epsilon grid {args.grid!r}") from None
    else:
        grid = scorers.default_epsilon_grid(in_features).tolist()
    table = scorers.epsilon_error_table(
        params, in_features, out_features, grid, args.scorer,
        args.temperature
    )
    best_eps, best_err = table[0]
    for eps, err in table:
        if err < best_err:
            best_eps, best_err = eps, err
    for eps, err in table:
        marker = "  <-- best" if eps == best_eps else ""
        print(f"epsilon={eps:.6g} detection_error={err:.4f}{marker}")
    print(f"best_epsilon={best_eps:.6g}")
    return 0


def _cmd_calibrate(args) -> int:
    params, _ = load_model(args.model)
    if args.method == "true-ood":
        if not args.in_data or not args.out_data:
            raise UsageError("true-ood calibration needs --in-data and --out-data")
        in_scores = scorers.score_batch(
            params, load_features_csv(args.in_data), args.scorer, args.epsilon
        )
        out_scores = scorers.score_batch(
            params, load_features_csv(args.out_data), args.scorer, args.epsilon
        )
        delta = metrics.calibrate_threshold(in_scores, out_scores)
        err = metrics.detection_error(in_scores, out_scores)
    else:
        if not args.data:
            raise UsageError("misclassified calibration needs --data")
        dataset = load_csv(args.data)
        records, _ = evaluate(params, dataset)
        score_field = (
            "confidence" if args.scorer == "confidence" else "max_softmax"
        )
        delta = metrics.calibrate_threshold_misclassified(records, score_field)
        correct = [getattr(r, score_field) for r in records if r.correct]
        incorrect = [getattr(r, score_field) for r in records if not r.correct]
        err = metrics.detection_error(correct, incorrect)
    print(f"method={args.method} scorer={args.scorer} "
          f"delta={metrics._json_float(delta)} detection_error={err:.4f}")
    if args.report:
        payload = {
            "method": args.method,
            "scorer": args.scorer,
            "delta": metrics._json_float(delta),
            "detection_error": err,
        }
        atomic_write_text(args.report, json.dumps(payload, indent=2) + "\n")
        print(f"wrote {args.report}")
    return 0


_COMMANDS = {
    "gen-data": _cmd_gen_data,
    "train": _cmd_train,
    "confidence-map": _cmd_confidence_map,
    "ood-eval": _cmd_ood_eval,
    "sweep-epsilon": _cmd_sweep_epsilon,
    "calibrate": _cmd_calibrate,
}


def cli(argv) -> int:
    """Run one command; returns the process exit status."""
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command is None:
            raise UsageError("a subcommand is required (see --help)")
        return _COMMANDS[args.command](args)
    except SystemExit as e:  # argparse --help
        return int(e.code or 0)
    except UsageError as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    except NumericError as e:
        print(f"error: {e}", file=sys.stderr)
        return 3
    except (DatasetFormatError, ModelFormatError, ModelVersionError,
            ModelShapeError, CalibrationError, OSError, ValueError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2


def main() -> None:
    sys.exit(cli(sys.argv[1:]))
