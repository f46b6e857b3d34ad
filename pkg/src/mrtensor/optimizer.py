"""Model fitting: L-BFGS over the flattened parameters with strong Wolfe
line search, warm-started from a per-slice eigendecomposition.

The optimizer is deterministic: identical inputs and seed produce bitwise
identical parameters.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from .errors import NumericalError, ValidationError
from .losses import LossAssignment
from .model import JOINT, MODES, FactorModel, SYMMETRY_RTOL
from .objective import ParamLayout, evaluate_flat
from .tensor_data import REAL, ObservedTensor

EIGEN = "eigen"
RANDOM = "random"
INITS = (EIGEN, RANDOM)

MAGNITUDE = "magnitude"
ALGEBRAIC = "algebraic"
EIG_ORDERS = (MAGNITUDE, ALGEBRAIC)

GRADIENT_TOL = "gradient_tol"
OBJECTIVE_TOL = "objective_tol"
MAX_ITERS = "max_iters"
LINE_SEARCH_FAILURE = "line_search_failure"

RANDOM_INIT_SCALE = 0.01


@dataclass(frozen=True)
class FitConfig:
    """Everything a fit needs besides the data and loss assignment."""

    rank: int
    reg: float = 1.0
    lbfgs_memory: int = 10
    max_iterations: int = 500
    gradient_tolerance: float = 1e-5
    relative_objective_tolerance: float = 1e-9
    wolfe_c1: float = 1e-4
    wolfe_c2: float = 0.9
    line_search_max_trials: int = 20
    init: str = EIGEN
    eig_order: str = MAGNITUDE
    seed: int = 42
    mode: str = JOINT
    weighted: bool = True

    def __post_init__(self):
        if self.rank < 1:
            raise ValidationError("rank must be >= 1")
        if self.reg < 0:
            raise ValidationError("regularization must be >= 0")
        if self.lbfgs_memory < 1:
            raise ValidationError("lbfgs_memory must be >= 1")
        if self.max_iterations < 1:
            raise ValidationError("max_iterations must be >= 1")
        if not (self.gradient_tolerance > 0 and self.relative_objective_tolerance > 0):
            raise ValidationError("tolerances must be > 0")
        if not 0.0 < self.wolfe_c1 < self.wolfe_c2 < 1.0:
            raise ValidationError("need 0 < c1 < c2 < 1")
        if self.line_search_max_trials < 1:
            raise ValidationError("line_search_max_trials must be >= 1")
        if self.init not in INITS:
            raise ValidationError(f"init must be one of {INITS}")
        if self.eig_order not in EIG_ORDERS:
            raise ValidationError(f"eig_order must be one of {EIG_ORDERS}")
        if self.mode not in MODES:
            raise ValidationError(f"mode must be one of {MODES}")


@dataclass
class IterationRecord:
    iteration: int
    objective: float
    grad_inf_norm: float
    step_length: float
    seconds: float  # cumulative wall time


@dataclass
class FitTrace:
    iterations: list = field(default_factory=list)
    termination: str = ""
    init_fallback: bool = False

    @property
    def num_iterations(self) -> int:
        return max(0, len(self.iterations) - 1)

    @property
    def final_objective(self) -> float:
        return self.iterations[-1].objective if self.iterations else float("nan")


def densify_slice(data: ObservedTensor, k: int) -> np.ndarray:
    """Dense n x n matrix of slice k with zeros at unobserved cells."""
    n = data.num_objects
    dense = np.zeros((n, n))
    rows, cols, vals, _ = data.entries(k)
    dense[rows, cols] = vals
    return dense


def _canonicalize_signs(vectors: np.ndarray) -> np.ndarray:
    """Flip each column so its largest-magnitude coordinate is positive."""
    out = vectors.copy()
    for c in range(out.shape[1]):
        col = out[:, c]
        lead = col[np.argmax(np.abs(col))]
        if lead < 0:
            out[:, c] = -col
    return out


def eigen_init(
    data: ObservedTensor,
    losses: LossAssignment,
    rank: int,
    mode: str = JOINT,
    eig_order: str = MAGNITUDE,
) -> FactorModel:
    """Warm start from the eigendecomposition of each zero-filled slice.

    R_k holds the selected eigenvalues on its diagonal; in joint mode A is
    the average of the slices' eigenvector matrices (eigenvector signs are
    canonicalized first), in per_slice mode A_k is slice k's eigenvector
    matrix. Biases start at the observed slice means.
    """
    n, m = data.num_objects, data.num_slices
    if rank > n:
        raise ValidationError("rank must not exceed the number of objects")
    vec_blocks, interactions, biases = [], [], np.zeros(m)
    for k in range(m):
        try:
            eigvals, eigvecs = np.linalg.eigh(densify_slice(data, k))
        except np.linalg.LinAlgError as exc:
            raise NumericalError(f"eigendecomposition failed on slice {k}") from exc
        if eig_order == MAGNITUDE:
            order = np.argsort(-np.abs(eigvals), kind="stable")[:rank]
        else:
            order = np.argsort(-eigvals, kind="stable")[:rank]
        chosen = eigvals[order]
        vectors = _canonicalize_signs(eigvecs[:, order])
        vec_blocks.append(vectors)
        interactions.append(np.diag(chosen))
        biases[k] = data.slice_mean(k)
    if mode == JOINT:
        factors = sum(vec_blocks) / m
    else:
        factors = vec_blocks
    return FactorModel(factors, interactions, biases, mode, losses)


def random_init(
    data: ObservedTensor,
    losses: LossAssignment,
    rank: int,
    mode: str = JOINT,
    seed: int = 42,
) -> FactorModel:
    """Small-scale normal initialization; biases at the observed slice means."""
    n, m = data.num_objects, data.num_slices
    rng = np.random.default_rng(seed)
    if mode == JOINT:
        factors = RANDOM_INIT_SCALE * rng.standard_normal((n, rank))
    else:
        factors = [RANDOM_INIT_SCALE * rng.standard_normal((n, rank)) for _ in range(m)]
    interactions = []
    for _ in range(m):
        raw = RANDOM_INIT_SCALE * rng.standard_normal((rank, rank))
        interactions.append(0.5 * (raw + raw.T))
    biases = np.array([data.slice_mean(k) for k in range(m)])
    return FactorModel(factors, interactions, biases, mode, losses)


def densify_unweighted(data: ObservedTensor) -> ObservedTensor:
    """Materialize every cell: observed values keep y, unobserved become 0,
    all weights 1. Slices are retagged as real so the zero null value is
    storable; the quadratic loss is forced on this representation."""
    n = data.num_objects
    rows = np.repeat(np.arange(n, dtype=np.int32), n)
    cols = np.tile(np.arange(n, dtype=np.int32), n)
    weights = np.ones(n * n)
    slices = []
    for k in range(data.num_slices):
        slices.append((rows, cols, densify_slice(data, k).ravel(), weights))
    return ObservedTensor(n, (REAL,) * data.num_slices, slices, _validated=True)


def _cubic_step(a_lo, f_lo, d_lo, a_hi, f_hi, d_hi):
    """Minimizer of the cubic through two (step, value, slope) points."""
    d1 = d_lo + d_hi - 3.0 * (f_lo - f_hi) / (a_lo - a_hi)
    disc = d1 * d1 - d_lo * d_hi
    if not np.isfinite(disc) or disc < 0.0:
        return None
    d2 = np.sign(a_hi - a_lo) * np.sqrt(disc)
    denom = d_hi - d_lo + 2.0 * d2
    if denom == 0.0 or not np.isfinite(denom):
        return None
    step = a_hi - (a_hi - a_lo) * (d_hi + d2 - d1) / denom
    if not np.isfinite(step):
        return None
    return step


class _LineSearchBudget(Exception):
    pass


def _strong_wolfe(phi, f0, slope0, c1, c2, max_trials):
    """Strong Wolfe line search with cubic-interpolation zoom.

    `phi(alpha)` returns (f, slope, payload). Returns the accepted
    (alpha, f, slope, payload) or None when the trial budget is exhausted.
    """
    trials = 0

    def probe(alpha):
        nonlocal trials
        if trials >= max_trials:
            raise _LineSearchBudget()
        trials += 1
        return phi(alpha)

    def zoom(a_lo, f_lo, d_lo, a_hi, f_hi, d_hi):
        while True:
            width = a_hi - a_lo
            trial = _cubic_step(a_lo, f_lo, d_lo, a_hi, f_hi, d_hi)
            lo, hi = (a_lo, a_hi) if a_lo < a_hi else (a_hi, a_lo)
            margin = 0.1 * abs(width)
            if trial is None or not (lo + margin <= trial <= hi - margin):
                trial = 0.5 * (a_lo + a_hi)
            f_t, d_t, payload = probe(trial)
            if f_t > f0 + c1 * trial * slope0 or f_t >= f_lo:
                a_hi, f_hi, d_hi = trial, f_t, d_t
            else:
                if abs(d_t) <= -c2 * slope0:
                    return trial, f_t, d_t, payload
                if d_t * width >= 0.0:
                    a_hi, f_hi, d_hi = a_lo, f_lo, d_lo
                a_lo, f_lo, d_lo = trial, f_t, d_t

    alpha_prev, f_prev, d_prev = 0.0, f0, slope0
    alpha = 1.0
    first = True
    try:
        while True:
            f_a, d_a, payload = probe(alpha)
            if f_a > f0 + c1 * alpha * slope0 or (not first and f_a >= f_prev):
                return zoom(alpha_prev, f_prev, d_prev, alpha, f_a, d_a)
            if abs(d_a) <= -c2 * slope0:
                return alpha, f_a, d_a, payload
            if d_a >= 0.0:
                return zoom(alpha, f_a, d_a, alpha_prev, f_prev, d_prev)
            alpha_prev, f_prev, d_prev = alpha, f_a, d_a
            alpha = 2.0 * alpha
            first = False
    except _LineSearchBudget:
        return None


def _two_loop_direction(grad, memory):
    """L-BFGS two-loop recursion over the stored (s, y, rho) triples."""
    q = grad.copy()
    alphas = []
    for s, y, rho in reversed(memory):
        a = rho * np.dot(s, q)
        alphas.append(a)
        q -= a * y
    if memory:
        s, y, _ = memory[-1]
        gamma = np.dot(s, y) / np.dot(y, y)
        q *= gamma
    for (s, y, rho), a in zip(memory, reversed(alphas)):
        b = rho * np.dot(y, q)
        q += (a - b) * s
    return -q


def fit(data: ObservedTensor, losses: LossAssignment, cfg: FitConfig):
    """Minimize the regularized weighted objective; returns (model, trace).

    With cfg.weighted False the tensor is densified first (zeros at
    unobserved cells, unit weights) and the quadratic loss is used on every
    slice, reproducing the unweighted baseline inside the same optimizer.
    """
    if losses.slice_types != data.slice_types:
        raise ValidationError("loss assignment slice types disagree with the data")
    report_losses = losses
    if not cfg.weighted:
        fit_data = densify_unweighted(data)
        fit_losses = LossAssignment.all_quadratic(fit_data.slice_types)
        report_losses = LossAssignment(
            data.slice_types,
            ("quadratic",) * data.num_slices,
            losses.mappings,
        )
    else:
        fit_data = data
        fit_losses = losses

    trace = FitTrace()
    if cfg.init == EIGEN:
        try:
            start = eigen_init(fit_data, fit_losses, cfg.rank, cfg.mode, cfg.eig_order)
        except NumericalError:
            trace.init_fallback = True
            start = random_init(fit_data, fit_losses, cfg.rank, cfg.mode, cfg.seed)
    else:
        start = random_init(fit_data, fit_losses, cfg.rank, cfg.mode, cfg.seed)

    layout = ParamLayout.of(start)
    x = layout.flatten(start.factors, start.interactions, start.biases)

    def objective_flat(vec):
        state = evaluate_flat(vec, layout, fit_data, fit_losses, cfg.reg)
        return state.value, state.flat_gradient()

    t0 = time.perf_counter()
    f, grad = objective_flat(x)
    grad_inf = float(np.max(np.abs(grad))) if grad.size else 0.0
    trace.iterations.append(
        IterationRecord(0, f, grad_inf, 0.0, time.perf_counter() - t0)
    )

    memory: list = []
    termination = MAX_ITERS
    if grad_inf <= cfg.gradient_tolerance:
        termination = GRADIENT_TOL
    else:
        for it in range(1, cfg.max_iterations + 1):
            direction = _two_loop_direction(grad, memory)
            slope = float(np.dot(grad, direction))
            if slope >= 0.0:  # lost descent: restart from steepest descent
                memory.clear()
                direction = -grad
                slope = float(np.dot(grad, direction))

            def phi(alpha):
                trial_x = x + alpha * direction
                try:
                    trial_f, trial_g = objective_flat(trial_x)
                except NumericalError:
                    return float("inf"), float("inf"), None
                return trial_f, float(np.dot(trial_g, direction)), (trial_x, trial_g)

            found = _strong_wolfe(
                phi, f, slope, cfg.wolfe_c1, cfg.wolfe_c2, cfg.line_search_max_trials
            )
            if found is None or found[3] is None:
                if len(trace.iterations) == 1:
                    raise NumericalError(
                        "line search failed before any accepted step"
                    )
                termination = LINE_SEARCH_FAILURE
                break
            alpha, f_new, _, (x_new, grad_new) = found

            s = x_new - x
            yv = grad_new - grad
            sy = float(np.dot(s, yv))
            if sy > 1e-10 * float(np.linalg.norm(s)) * float(np.linalg.norm(yv)):
                memory.append((s, yv, 1.0 / sy))
                if len(memory) > cfg.lbfgs_memory:
                    memory.pop(0)

            f_prev, x, f, grad = f, x_new, f_new, grad_new
            grad_inf = float(np.max(np.abs(grad)))
            trace.iterations.append(
                IterationRecord(it, f, grad_inf, alpha, time.perf_counter() - t0)
            )
            if grad_inf <= cfg.gradient_tolerance:
                termination = GRADIENT_TOL
                break
            if f_prev - f <= cfg.relative_objective_tolerance * max(1.0, abs(f_prev)):
                termination = OBJECTIVE_TOL
                break
    trace.termination = termination

    factors, interactions, biases = layout.unflatten(x)
    for k, rk in enumerate(interactions):
        asym = np.linalg.norm(rk - rk.T)
        if asym > SYMMETRY_RTOL * (1.0 + np.linalg.norm(rk)):
            raise NumericalError(f"interaction {k} lost symmetry during optimization")
    model = FactorModel(factors, interactions, biases, cfg.mode, report_losses)
    return model, trace
