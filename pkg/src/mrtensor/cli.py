"""Command-line front-end: synth, split, fit, predict, eval, gridsearch, bench.

Every command prints a one-line JSON summary (inputs hash, seed, key outputs)
to stdout and writes its artifacts to the requested output paths. Exit codes:
0 success, 1 usage error, 2 data/validation error, 3 numerical failure.
Randomized commands default to seed 42.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys
from dataclasses import replace

from .errors import (
    FormatError,
    MrTensorError,
    NumericalError,
    ValidationError,
)
from .evaluation import (
    benchmark,
    evaluate_model,
    grid_search,
    grid_table_csv,
    merge_tensors,
    selection_score,
    slice_scores,
)
from .losses import LOGISTIC, SMOOTH_HINGE, LossAssignment
from .model import load_model, save_model
from .optimizer import FitConfig, fit
from .synthgen import SynthConfig, generate
from .tensor_data import (
    SplitSpec,
    apply_class_reweighting,
    format_value,
    read_tensor,
    split,
)

DEFAULT_SEED = 42

USAGE_EXIT = 1
DATA_EXIT = 2
NUMERICAL_EXIT = 3

LOSS_CHOICES = ("auto", "quadratic", "hinge", "logistic")


class _Parser(argparse.ArgumentParser):
    """argparse parser exiting with code 1 on usage errors."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(USAGE_EXIT, f"{self.prog}: error: {message}\n")


def _hash_file(path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            digest.update(chunk)
    return digest.hexdigest()[:16]


def _hash_config(payload) -> str:
    return hashlib.sha256(
        json.dumps(payload, sort_keys=True).encode()
    ).hexdigest()[:16]


def _loss_assignment(tag: str, slice_types) -> LossAssignment:
    if tag == "quadratic":
        return LossAssignment.all_quadratic(slice_types)
    if tag == "logistic":
        return LossAssignment.for_binary_loss(LOGISTIC, slice_types)
    # "auto" and "hinge": smooth hinge on binary slices, quadratic on real.
    return LossAssignment.for_binary_loss(SMOOTH_HINGE, slice_types)


def _add_fit_flags(sub):
    sub.add_argument("--rank", type=int, required=True)
    sub.add_argument("--loss", choices=LOSS_CHOICES, default="auto")
    sub.add_argument("--reg", type=float, default=1.0)
    sub.add_argument("--unweighted", action="store_true")
    sub.add_argument("--per-slice", action="store_true")
    sub.add_argument("--pos-weight", type=float, default=1.0)
    sub.add_argument("--init", choices=("eigen", "random"), default="eigen")
    sub.add_argument("--eig-order", choices=("magnitude", "algebraic"),
                     default="magnitude")
    sub.add_argument("--mem", type=int, default=10)
    sub.add_argument("--tol", type=float, default=1e-5)
    sub.add_argument("--obj-tol", type=float, default=1e-9)
    sub.add_argument("--max-iters", type=int, default=500)


def _fit_config(args) -> FitConfig:
    return FitConfig(
        rank=args.rank,
        reg=args.reg,
        lbfgs_memory=args.mem,
        max_iterations=args.max_iters,
        gradient_tolerance=args.tol,
        relative_objective_tolerance=args.obj_tol,
        init=args.init,
        eig_order=args.eig_order,
        seed=args.seed,
        mode="per_slice" if args.per_slice else "joint",
        weighted=not args.unweighted,
    )


def build_parser() -> _Parser:
    parser = _Parser(prog="mrtensor", description=__doc__)
    commands = parser.add_subparsers(dest="command", required=True)

    synth = commands.add_parser("synth", help="generate a synthetic tensor")
    synth.add_argument("--objects", type=int, required=True)
    synth.add_argument("--binary-slices", type=int, default=0)
    synth.add_argument("--real-slices", type=int, default=0)
    synth.add_argument("--rank", type=int, required=True)
    synth.add_argument("--noise", type=float, default=0.1)
    synth.add_argument("--percentile", type=float, default=90.0)
    synth.add_argument("--include-diagonal", action="store_true")
    synth.add_argument("--seed", type=int, default=DEFAULT_SEED)
    synth.add_argument("--out", required=True)
    synth.add_argument("--planted-out")

    split_cmd = commands.add_parser("split", help="train/validation/test split")
    split_cmd.add_argument("--data", required=True)
    split_cmd.add_argument("--train-frac", type=float, required=True)
    split_cmd.add_argument("--val-frac", type=float, default=0.0)
    split_cmd.add_argument("--seed", type=int, default=DEFAULT_SEED)
    split_cmd.add_argument("--out", required=True,
                           help="prefix for <out>.{train,val,test}.mrt")

    fit_cmd = commands.add_parser("fit", help="fit a factor model")
    fit_cmd.add_argument("--data", required=True)
    _add_fit_flags(fit_cmd)
    fit_cmd.add_argument("--seed", type=int, default=DEFAULT_SEED)
    fit_cmd.add_argument("--out", required=True)
    fit_cmd.add_argument("--trace-out")

    predict = commands.add_parser("predict", help="score a tensor's pairs")
    predict.add_argument("--model", required=True)
    predict.add_argument("--data", required=True)
    predict.add_argument("--out", required=True)

    eval_cmd = commands.add_parser("eval", help="per-slice metrics on a tensor")
    eval_cmd.add_argument("--model", required=True)
    eval_cmd.add_argument("--data", required=True)
    eval_cmd.add_argument("--out", required=True)

    grid = commands.add_parser(
        "gridsearch", help="split, search regularization, refit on train+val"
    )
    grid.add_argument("--data", required=True)
    grid.add_argument("--train-frac", type=float, required=True)
    grid.add_argument("--val-frac", type=float, default=0.25)
    _add_fit_flags(grid)
    grid.add_argument("--reg-min", type=float, default=1e-3)
    grid.add_argument("--reg-max", type=float, default=1e3)
    grid.add_argument("--steps", type=int, default=7)
    grid.add_argument("--seed", type=int, default=DEFAULT_SEED)
    grid.add_argument("--out", required=True, help="grid table CSV")
    grid.add_argument("--model-out", help="refit model path")
    grid.add_argument("--report-out", help="test-set metrics CSV")

    bench = commands.add_parser("bench", help="weighted vs unweighted timing")
    bench.add_argument("--sizes", required=True,
                       help="comma-separated ascending object counts")
    bench.add_argument("--train-frac", type=float, default=0.1)
    bench.add_argument("--runs", type=int, default=10)
    bench.add_argument("--rank", type=int, default=10)
    bench.add_argument("--reg", type=float, default=1.0)
    bench.add_argument("--max-iters", type=int, default=25)
    bench.add_argument("--seed", type=int, default=DEFAULT_SEED)
    bench.add_argument("--out", required=True)
    return parser


def _cmd_synth(args):
    cfg = SynthConfig(
        num_objects=args.objects,
        num_binary_slices=args.binary_slices,
        num_real_slices=args.real_slices,
        rank=args.rank,
        noise_std=args.noise,
        positive_percentile=args.percentile,
        include_diagonal=args.include_diagonal,
        seed=args.seed,
    )
    tensor, planted = generate(cfg)
    tensor.write(args.out)
    if args.planted_out:
        save_model(planted, args.planted_out)
    return {
        "command": "synth",
        "inputs_hash": _hash_config(
            {"objects": args.objects, "binary": args.binary_slices,
             "real": args.real_slices, "rank": args.rank, "noise": args.noise,
             "percentile": args.percentile,
             "include_diagonal": args.include_diagonal}
        ),
        "seed": args.seed,
        "out": args.out,
        "entries": tensor.num_entries,
    }


def _cmd_split(args):
    tensor = read_tensor(args.data)
    spec = SplitSpec(args.train_frac, args.val_frac, args.seed)
    train, val, test = split(tensor, spec)
    paths = {}
    for name, part in (("train", train), ("val", val), ("test", test)):
        path = f"{args.out}.{name}.mrt"
        part.write(path)
        paths[name] = path
    return {
        "command": "split",
        "inputs_hash": _hash_file(args.data),
        "seed": args.seed,
        "out": paths,
        "pairs": {
            name: sum(part.num_pairs(k) for k in range(part.num_slices))
            for name, part in (("train", train), ("val", val), ("test", test))
        },
    }


def _trace_csv(trace) -> str:
    lines = ["iteration,objective,grad_inf_norm,step_length,seconds"]
    for rec in trace.iterations:
        lines.append(
            f"{rec.iteration},{format_value(rec.objective)},"
            f"{format_value(rec.grad_inf_norm)},{format_value(rec.step_length)},"
            f"{format_value(rec.seconds)}"
        )
    return "\n".join(lines) + "\n"


def _cmd_fit(args):
    data = read_tensor(args.data)
    if args.pos_weight != 1.0:
        data = apply_class_reweighting(data, args.pos_weight)
    losses = _loss_assignment(args.loss, data.slice_types)
    model, trace = fit(data, losses, _fit_config(args))
    save_model(model, args.out)
    if args.trace_out:
        with open(args.trace_out, "w", encoding="utf-8") as fh:
            fh.write(_trace_csv(trace))
    return {
        "command": "fit",
        "inputs_hash": _hash_file(args.data),
        "seed": args.seed,
        "out": args.out,
        "objective": trace.final_objective,
        "iterations": trace.num_iterations,
        "termination": trace.termination,
    }


def _cmd_predict(args):
    model = load_model(args.model)
    data = read_tensor(args.data)
    if data.num_objects != model.num_objects or data.num_slices != model.num_slices:
        raise ValidationError("model and data dimensions disagree")
    lines = ["slice,i,j,score,label"]
    count = 0
    for k, slice_type in enumerate(data.slice_types):
        i, j, _, _ = data.pairs(k)
        scores, _ = slice_scores(model, data, k)
        for e in range(i.size):
            score = scores[e]
            if slice_type == "binary":
                label = 1.0 if score >= 0.0 else -1.0
            else:
                label = score
            lines.append(
                f"{k},{i[e]},{j[e]},{format_value(score)},{format_value(label)}"
            )
            count += 1
    with open(args.out, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")
    return {
        "command": "predict",
        "inputs_hash": _hash_file(args.data),
        "model_hash": _hash_file(args.model),
        "seed": None,
        "out": args.out,
        "pairs": count,
    }


def _cmd_eval(args):
    model = load_model(args.model)
    data = read_tensor(args.data)
    report = evaluate_model(model, data)
    with open(args.out, "w", encoding="utf-8") as fh:
        fh.write(report.to_csv())
    try:
        score = selection_score(report, data.slice_types)
    except MrTensorError:
        score = None
    return {
        "command": "eval",
        "inputs_hash": _hash_file(args.data),
        "model_hash": _hash_file(args.model),
        "seed": None,
        "out": args.out,
        "selection_score": score,
        "metrics": {
            str(sm.slice_index): sm.value for sm in report.slice_metrics
        },
    }


def _cmd_gridsearch(args):
    data = read_tensor(args.data)
    if args.pos_weight != 1.0:
        data = apply_class_reweighting(data, args.pos_weight)
    losses = _loss_assignment(args.loss, data.slice_types)
    spec = SplitSpec(args.train_frac, args.val_frac, args.seed)
    train, val, test = split(data, spec)
    cfg = _fit_config(args)
    best_reg, table = grid_search(
        train, val, losses, cfg, args.reg_min, args.reg_max, args.steps
    )
    with open(args.out, "w", encoding="utf-8") as fh:
        fh.write(grid_table_csv(table))
    summary = {
        "command": "gridsearch",
        "inputs_hash": _hash_file(args.data),
        "seed": args.seed,
        "out": args.out,
        "best_lambda": best_reg,
    }
    if args.model_out:
        refit_data = merge_tensors(train, val)
        model, _ = fit(refit_data, losses, replace(cfg, reg=best_reg))
        save_model(model, args.model_out)
        summary["model_out"] = args.model_out
        if args.report_out:
            report = evaluate_model(model, test)
            with open(args.report_out, "w", encoding="utf-8") as fh:
                fh.write(report.to_csv())
            summary["report_out"] = args.report_out
            try:
                summary["test_score"] = selection_score(report, test.slice_types)
            except MrTensorError:
                summary["test_score"] = None
    return summary


def _cmd_bench(args):
    try:
        sizes = [int(tok) for tok in args.sizes.split(",") if tok]
    except ValueError:
        raise ValidationError("--sizes must be comma-separated integers") from None
    cfg = FitConfig(
        rank=args.rank,
        reg=args.reg,
        max_iterations=args.max_iters,
        seed=args.seed,
    )
    table = benchmark(sizes, args.train_frac, args.runs, cfg, seed=args.seed)
    with open(args.out, "w", encoding="utf-8") as fh:
        fh.write(table.to_csv())
    return {
        "command": "bench",
        "inputs_hash": _hash_config({"sizes": sizes, "train_frac": args.train_frac,
                                     "runs": args.runs, "rank": args.rank}),
        "seed": args.seed,
        "out": args.out,
        "summary": {
            f"{n}/{mode}": mean for (n, mode), (mean, _) in table.summary().items()
        },
    }


_HANDLERS = {
    "synth": _cmd_synth,
    "split": _cmd_split,
    "fit": _cmd_fit,
    "predict": _cmd_predict,
    "eval": _cmd_eval,
    "gridsearch": _cmd_gridsearch,
    "bench": _cmd_bench,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else USAGE_EXIT
    try:
        summary = _HANDLERS[args.command](args)
    except NumericalError as exc:
        print(f"mrtensor: numerical failure: {exc}", file=sys.stderr)
        return NUMERICAL_EXIT
    except (FormatError, ValidationError, OSError) as exc:
        print(f"mrtensor: error: {exc}", file=sys.stderr)
        return DATA_EXIT
    print(json.dumps(summary, sort_keys=True))
    return 0


def entry():  # console-script entry point
    raise SystemExit(main())
