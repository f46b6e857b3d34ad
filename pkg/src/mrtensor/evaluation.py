"""Prediction metrics, model evaluation, grid search, and timing benchmarks."""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field, replace

import numpy as np

from . import kernels
from .errors import MrTensorError, UndefinedMetricError, ValidationError
from .losses import LossAssignment
from .model import FactorModel
from .objective import evaluate as evaluate_objective
from .optimizer import FitConfig, fit
from .synthgen import SynthConfig, generate
from .tensor_data import BINARY, REAL, ObservedTensor, SplitSpec, format_value, split

AUPRC = "auprc"
MSE = "mse"


def auprc(scores, labels) -> float:
    """Area under the precision-recall curve by step-wise integration.

    Pairs are ranked by descending score; each distinct score is one
    threshold (ties are processed as a single step), and the area adds
    (recall_t - recall_{t-1}) * precision_t per step.
    """
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.float64)
    if scores.shape != labels.shape or scores.ndim != 1:
        raise ValidationError("scores and labels must be equal-length 1-d sequences")
    if labels.size and np.any(np.abs(labels) != 1.0):
        raise ValidationError("labels must be ±1")
    num_pos = int(np.count_nonzero(labels == 1.0))
    if num_pos == 0:
        raise UndefinedMetricError("AUPRC undefined without positive labels")

    order = np.argsort(-scores, kind="stable")
    sorted_scores = scores[order]
    sorted_labels = labels[order]
    # Last index of each tie group = one threshold step.
    boundaries = np.nonzero(np.diff(sorted_scores))[0]
    step_ends = np.append(boundaries, sorted_scores.size - 1)
    true_pos = np.cumsum(sorted_labels == 1.0)[step_ends]
    predicted = step_ends + 1
    precision = true_pos / predicted
    recall = true_pos / num_pos
    prev_recall = np.concatenate([[0.0], recall[:-1]])
    return math.fsum((recall - prev_recall) * precision)


def mse(predicted, truth) -> float:
    """Mean squared error; errors on empty or mismatched input."""
    predicted = np.asarray(predicted, dtype=np.float64)
    truth = np.asarray(truth, dtype=np.float64)
    if predicted.shape != truth.shape or predicted.ndim != 1:
        raise ValidationError("sequences must be equal-length and 1-d")
    if predicted.size == 0:
        raise ValidationError("mse of empty sequences is undefined")
    return float(np.mean((predicted - truth) ** 2))


@dataclass
class SliceMetric:
    slice_index: int
    kind: str  # "auprc" | "mse"
    value: float | None  # None when the metric is undefined for this slice
    num_pairs: int


@dataclass
class EvalReport:
    slice_metrics: list
    seconds: float = 0.0

    def to_csv(self) -> str:
        lines = ["slice,type,metric,value,n_pairs"]
        for sm in self.slice_metrics:
            slice_type = BINARY if sm.kind == AUPRC else REAL
            value = "" if sm.value is None else format_value(sm.value)
            lines.append(f"{sm.slice_index},{slice_type},{sm.kind},{value},{sm.num_pairs}")
        return "\n".join(lines) + "\n"


def slice_scores(model: FactorModel, data: ObservedTensor, k: int):
    """(scores, values) over slice k's unordered pairs (each counted once)."""
    i, j, y, _ = data.pairs(k)
    factors = model.factor_matrix(k)
    scores = kernels.pair_scores(i, j, factors @ model.interactions[k], factors)
    return scores + model.biases[k], y


def evaluate_model(
    model: FactorModel, test: ObservedTensor, losses: LossAssignment | None = None
) -> EvalReport:
    """Per-slice AUPRC (binary, on raw scores) or MSE (real) on test pairs.

    A binary slice with no positive test labels gets a missing metric rather
    than failing.
    """
    if model.num_objects != test.num_objects or model.num_slices != test.num_slices:
        raise ValidationError("model and test tensor dimensions disagree")
    if losses is not None and losses.slice_types != test.slice_types:
        raise ValidationError("loss assignment slice types disagree with the data")
    start = time.perf_counter()
    metrics = []
    for k, slice_type in enumerate(test.slice_types):
        scores, truth = slice_scores(model, test, k)
        if slice_type == BINARY:
            try:
                value = auprc(scores, truth)
            except UndefinedMetricError:
                value = None
            metrics.append(SliceMetric(k, AUPRC, value, truth.size))
        else:
            value = mse(scores, truth) if truth.size else None
            metrics.append(SliceMetric(k, MSE, value, truth.size))
    return EvalReport(metrics, time.perf_counter() - start)


def selection_score(report: EvalReport, slice_types) -> float:
    """Model-selection score from a report.

    All-binary tensors use the arithmetic mean of slice AUPRCs; tensors with
    any real slice use the harmonic mean over per-slice components (AUPRC for
    binary, max(0, 1 - MSE) for real), which is 0 whenever a component is 0.
    Slices with missing metrics are excluded.
    """
    slice_types = tuple(slice_types)
    if len(slice_types) != len(report.slice_metrics):
        raise ValidationError("slice_types does not match the report")
    components = []
    for sm, slice_type in zip(report.slice_metrics, slice_types):
        if sm.value is None:
            continue
        if slice_type == BINARY:
            components.append(sm.value)
        else:
            components.append(max(0.0, 1.0 - sm.value))
    if not components:
        raise UndefinedMetricError("no slice has a defined metric")
    if all(t == BINARY for t in slice_types):
        return float(np.mean(components))
    if any(c == 0.0 for c in components):
        return 0.0
    return len(components) / math.fsum(1.0 / c for c in components)


@dataclass
class GridPoint:
    reg: float
    score: float | None
    error: str | None = None

    @property
    def converged(self) -> bool:
        return self.error is None


def regularization_grid(reg_min=1e-3, reg_max=1e3, steps=7) -> np.ndarray:
    if steps < 2:
        raise ValidationError("steps must be >= 2")
    if not 0 < reg_min < reg_max:
        raise ValidationError("need 0 < reg_min < reg_max")
    return np.logspace(math.log10(reg_min), math.log10(reg_max), steps)


def grid_search(
    train: ObservedTensor,
    val: ObservedTensor,
    losses: LossAssignment,
    cfg_base: FitConfig,
    reg_min: float = 1e-3,
    reg_max: float = 1e3,
    steps: int = 7,
):
    """Fit at log-spaced regularization strengths, score on validation.

    Returns (best_reg, [GridPoint...]); ties prefer the smaller strength.
    Per-point fit failures are recorded; only all points failing is an error.
    """
    table = []
    best_reg, best_score = None, -math.inf
    for reg in regularization_grid(reg_min, reg_max, steps):
        cfg = replace(cfg_base, reg=float(reg))
        try:
            model, _ = fit(train, losses, cfg)
            report = evaluate_model(model, val, losses)
            score = selection_score(report, val.slice_types)
        except MrTensorError as exc:
            table.append(GridPoint(float(reg), None, str(exc)))
            continue
        table.append(GridPoint(float(reg), score))
        if score > best_score:
            best_reg, best_score = float(reg), score
    if best_reg is None:
        raise ValidationError("every grid point failed")
    return best_reg, table


def grid_table_csv(table) -> str:
    lines = ["lambda,score,converged"]
    for point in table:
        score = "" if point.score is None else format_value(point.score)
        lines.append(f"{format_value(point.reg)},{score},{str(point.converged).lower()}")
    return "\n".join(lines) + "\n"


def merge_tensors(a: ObservedTensor, b: ObservedTensor) -> ObservedTensor:
    """Union of two disjoint tensors over the same objects and slices."""
    if a.num_objects != b.num_objects or a.slice_types != b.slice_types:
        raise ValidationError("tensors disagree on shape")
    slices = []
    for k in range(a.num_slices):
        parts = list(zip(a.entries(k), b.entries(k)))
        slices.append(tuple(np.concatenate(pair) for pair in parts))
    return ObservedTensor(a.num_objects, a.slice_types, slices)


def time_per_evaluation(
    model: FactorModel,
    data: ObservedTensor,
    losses: LossAssignment,
    reg: float,
    evaluations: int = 10,
) -> float:
    """Mean wall seconds of one objective+gradient evaluation."""
    evaluate_objective(model, data, losses, reg)  # warm-up
    start = time.perf_counter()
    for _ in range(evaluations):
        evaluate_objective(model, data, losses, reg)
    return (time.perf_counter() - start) / evaluations


@dataclass
class BenchmarkRow:
    num_objects: int
    mode: str  # "weighted" | "unweighted"
    run: int
    seconds: float | None  # None when the run failed (e.g. out of memory)
    error: str | None = None


@dataclass
class BenchmarkTable:
    rows: list = field(default_factory=list)

    def to_csv(self) -> str:
        lines = ["n,mode,run,seconds"]
        for row in self.rows:
            seconds = "" if row.seconds is None else format_value(row.seconds)
            lines.append(f"{row.num_objects},{row.mode},{row.run},{seconds}")
        return "\n".join(lines) + "\n"

    def summary(self):
        """{(n, mode): (mean, std)} over successful runs."""
        grouped: dict = {}
        for row in self.rows:
            if row.seconds is not None:
                grouped.setdefault((row.num_objects, row.mode), []).append(row.seconds)
        return {
            key: (float(np.mean(vals)), float(np.std(vals)))
            for key, vals in grouped.items()
        }


def benchmark(
    sizes,
    train_fraction: float,
    runs: int,
    cfg: FitConfig,
    num_slices: int = 3,
    seed: int = 42,
) -> BenchmarkTable:
    """Fit wall-time of weighted vs unweighted modes on synthetic tensors.

    For each size n a fresh all-binary tensor is generated and subsampled to
    `train_fraction`; each mode is fit `runs` times. Runs are serialized.
    An out-of-memory failure marks that row failed and later sizes still run.
    """
    sizes = list(sizes)
    if sizes != sorted(sizes):
        raise ValidationError("sizes must be ascending")
    if runs < 1:
        raise ValidationError("runs must be >= 1")
    table = BenchmarkTable()
    for n in sizes:
        synth_cfg = SynthConfig(
            num_objects=n,
            num_binary_slices=num_slices,
            num_real_slices=0,
            rank=cfg.rank,
            seed=seed,
        )
        try:
            full, _ = generate(synth_cfg)
            train, _, _ = split(full, SplitSpec(train_fraction, 0.0, seed))
        except MemoryError as exc:
            for mode in ("weighted", "unweighted"):
                for run in range(runs):
                    table.rows.append(BenchmarkRow(n, mode, run, None, str(exc) or "OOM"))
            continue
        losses = LossAssignment.auto(train.slice_types)
        for mode in ("weighted", "unweighted"):
            run_cfg = replace(cfg, weighted=(mode == "weighted"))
            for run in range(runs):
                try:
                    start = time.perf_counter()
                    fit(train, losses, run_cfg)
                    table.rows.append(
                        BenchmarkRow(n, mode, run, time.perf_counter() - start)
                    )
                except MemoryError as exc:
                    table.rows.append(BenchmarkRow(n, mode, run, None, str(exc) or "OOM"))
    return table
