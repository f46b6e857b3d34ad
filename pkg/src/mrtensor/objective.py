"""Regularized weighted objective and its gradients over stored entries only.

The sparse path touches each stored entry a constant number of times, giving
O(m * n_w * r + m * n * r^2) work per evaluation. A dense brute-force oracle
with independently written scalar loss formulas is provided for testing.

The loss sum runs slice-major in stored-entry order, so values are
reproducible bit-for-bit on a fixed machine and backend.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import kernels
from .errors import NumericalError, ValidationError
from .losses import LossAssignment
from .model import JOINT, PER_SLICE, FactorModel

DENSE_ORACLE_MAX_OBJECTS = 64


@dataclass(frozen=True)
class ParamLayout:
    """Bijection between (factors, interactions, biases) and one flat vector.

    Order: factor matrices row-major (the single A in joint mode, A_0..A_{m-1}
    in per_slice mode), then R_0..R_{m-1} row-major, then the bias vector.
    """

    mode: str
    num_objects: int
    num_slices: int
    rank: int

    @property
    def num_factor_blocks(self) -> int:
        return 1 if self.mode == JOINT else self.num_slices

    @property
    def size(self) -> int:
        n, m, r = self.num_objects, self.num_slices, self.rank
        return self.num_factor_blocks * n * r + m * r * r + m

    @classmethod
    def of(cls, model: FactorModel) -> "ParamLayout":
        return cls(model.mode, model.num_objects, model.num_slices, model.rank)

    def flatten(self, factors, interactions, biases) -> np.ndarray:
        blocks = [factors] if self.mode == JOINT else list(factors)
        parts = [np.ravel(b) for b in blocks]
        parts.extend(np.ravel(rk) for rk in interactions)
        parts.append(np.asarray(biases, dtype=np.float64))
        flat = np.concatenate(parts)
        assert flat.size == self.size
        return flat

    def unflatten(self, flat: np.ndarray):
        """Split a flat vector into (factors, interactions, biases) arrays."""
        n, m, r = self.num_objects, self.num_slices, self.rank
        if flat.shape != (self.size,):
            raise ValidationError(f"parameter vector must have length {self.size}")
        pos = 0
        blocks = []
        for _ in range(self.num_factor_blocks):
            blocks.append(flat[pos : pos + n * r].reshape(n, r))
            pos += n * r
        interactions = []
        for _ in range(m):
            interactions.append(flat[pos : pos + r * r].reshape(r, r))
            pos += r * r
        biases = flat[pos:]
        factors = blocks[0] if self.mode == JOINT else blocks
        return factors, interactions, biases


def flatten_model(model: FactorModel) -> np.ndarray:
    return ParamLayout.of(model).flatten(
        model.factors, model.interactions, model.biases
    )


def model_from_flat(flat, layout: ParamLayout, losses: LossAssignment) -> FactorModel:
    factors, interactions, biases = layout.unflatten(np.asarray(flat, np.float64))
    return FactorModel(factors, interactions, biases, layout.mode, losses)


@dataclass
class ObjectiveState:
    """Objective value together with gradients in parameter shapes."""

    value: float
    grad_factors: object  # ndarray in joint mode, list of ndarrays otherwise
    grad_interactions: list
    grad_biases: np.ndarray
    layout: ParamLayout

    def flat_gradient(self) -> np.ndarray:
        return self.layout.flatten(
            self.grad_factors, self.grad_interactions, self.grad_biases
        )


def _check_loss_compat(losses: LossAssignment, data, model_n, model_m):
    if losses.num_slices != data.num_slices:
        raise ValidationError("loss assignment does not cover every slice")
    if losses.slice_types != data.slice_types:
        raise ValidationError("loss assignment slice types disagree with the data")
    if model_n != data.num_objects or model_m != data.num_slices:
        raise ValidationError("model and data dimensions disagree")


def evaluate_arrays(factors, interactions, biases, data, losses, reg) -> ObjectiveState:
    """Sparse objective/gradient evaluation on raw parameter arrays.

    `factors` is one (n, r) array in joint mode or a list of m arrays in
    per_slice mode. Raises NumericalError naming the slice if any
    intermediate is non-finite.
    """
    if reg < 0:
        raise ValidationError("regularization strength must be >= 0")
    joint = not isinstance(factors, (list, tuple))
    mode = JOINT if joint else PER_SLICE
    m = data.num_slices
    n = data.num_objects
    r = interactions[0].shape[0]
    layout = ParamLayout(mode, n, m, r)

    value = 0.0
    if joint:
        grad_factors = reg * factors
        value += 0.5 * reg * float(np.dot(factors.ravel(), factors.ravel()))
    else:
        grad_factors = [reg * a for a in factors]
        for a in factors:
            value += 0.5 * reg * float(np.dot(a.ravel(), a.ravel()))
    grad_interactions = []
    grad_biases = np.zeros(m)

    for k in range(m):
        a = factors if joint else factors[k]
        rk = interactions[k]
        value += 0.5 * reg * float(np.dot(rk.ravel(), rk.ravel()))
        rows, cols, y, w = data.entries(k)
        if rows.size == 0:
            grad_interactions.append(reg * rk)
            continue
        # overflow here is handled by the explicit finiteness checks below
        with np.errstate(over="ignore", invalid="ignore"):
            scores = kernels.pair_scores(rows, cols, a @ rk, a) + biases[k]
            if not np.all(np.isfinite(scores)):
                raise NumericalError(f"non-finite score in slice {k}")
            vals, derivs = losses.loss_function(k)(y, scores)
            coeff = w * derivs
            loss_sum = float(np.dot(w, vals))
        if not (math.isfinite(loss_sum) and np.all(np.isfinite(coeff))):
            raise NumericalError(f"non-finite objective term in slice {k}")
        value += loss_sum
        grad_biases[k] = coeff.sum()
        target = grad_factors if joint else grad_factors[k]
        propagated = np.zeros_like(a)
        kernels.scatter_rows(rows, cols, coeff, a @ rk.T, propagated)
        target += 2.0 * propagated
        weighted_a = np.zeros_like(a)
        kernels.scatter_rows(rows, cols, coeff, a, weighted_a)
        # (G + G^T)/2 is bitwise symmetric, so with symmetric data the
        # interaction gradient (and hence every optimizer iterate) stays
        # exactly symmetric instead of accumulating roundoff drift.
        raw = a.T @ weighted_a
        grad_interactions.append(reg * rk + 0.5 * (raw + raw.T))

    if not math.isfinite(value):
        raise NumericalError("non-finite objective value")
    return ObjectiveState(value, grad_factors, grad_interactions, grad_biases, layout)


def evaluate(model: FactorModel, data, losses: LossAssignment, reg: float) -> ObjectiveState:
    """Objective value and gradients, touching only stored entries."""
    _check_loss_compat(losses, data, model.num_objects, model.num_slices)
    return evaluate_arrays(
        model.factors, model.interactions, model.biases, data, losses, reg
    )


def evaluate_flat(flat, layout: ParamLayout, data, losses, reg) -> ObjectiveState:
    """Evaluate directly on a flat parameter vector.

    Used by the optimizer and by coordinate-wise derivative checks; skips
    model construction so perturbed parameters need not satisfy the model
    invariants (e.g. interaction symmetry).
    """
    factors, interactions, biases = layout.unflatten(np.asarray(flat, np.float64))
    return evaluate_arrays(factors, interactions, biases, data, losses, reg)


def _scalar_loss(tag, y, x):
    """Scalar loss formulas written independently of the vectorized module."""
    if tag == "quadratic":
        return 0.5 * (y - x) ** 2, x - y
    z = y * x
    if tag == "smooth_hinge":
        if z <= 0.0:
            return 0.5 - z, -y
        if z < 1.0:
            return 0.5 * (1.0 - z) ** 2, x - y
        return 0.0, 0.0
    if tag == "logistic":
        if z >= 0.0:
            value = math.log1p(math.exp(-z))
        else:
            value = -z + math.log1p(math.exp(z))
        return value, -y / (1.0 + math.exp(min(z, 700.0)))
    raise ValidationError(f"unknown loss {tag!r}")


def dense_oracle_evaluate(model: FactorModel, data, losses, reg) -> ObjectiveState:
    """Brute-force evaluation via dense W, Y, X matrices; testing oracle.

    Guarded to small problems (n <= 64); applies the literal dense formulas
    value = reg/2 ||A||^2 + sum_k [reg/2 ||R_k||^2 + tr(W_k l_k(Y_k, X_k)^T)],
    grad_A = reg A + sum_k 2 (W_k . dL_k) A R_k^T,
    grad_R_k = reg R_k + A^T (W_k . dL_k) A,
    grad_b_k = tr(W_k dL_k^T).
    """
    n = data.num_objects
    if n > DENSE_ORACLE_MAX_OBJECTS:
        raise ValidationError(
            f"dense oracle limited to n <= {DENSE_ORACLE_MAX_OBJECTS}"
        )
    _check_loss_compat(losses, data, model.num_objects, model.num_slices)
    m = model.num_slices
    joint = model.mode == JOINT
    layout = ParamLayout.of(model)

    value = 0.0
    if joint:
        grad_factors = reg * model.factors.copy()
        value += 0.5 * reg * np.linalg.norm(model.factors) ** 2
    else:
        grad_factors = [reg * a.copy() for a in model.factors]
        value += sum(0.5 * reg * np.linalg.norm(a) ** 2 for a in model.factors)
    grad_interactions = []
    grad_biases = np.zeros(m)

    for k in range(m):
        a = model.factor_matrix(k)
        rk = model.interactions[k]
        value += 0.5 * reg * np.linalg.norm(rk) ** 2
        dense_y = np.zeros((n, n))
        dense_w = np.zeros((n, n))
        rows, cols, yv, wv = data.entries(k)
        dense_y[rows, cols] = yv
        dense_w[rows, cols] = wv
        x = a @ rk @ a.T + model.biases[k]
        dloss = np.zeros((n, n))
        tag = losses.losses[k]
        for i in range(n):
            for j in range(n):
                lv, dv = _scalar_loss(tag, dense_y[i, j], x[i, j])
                value += dense_w[i, j] * lv
                dloss[i, j] = dv
        s = dense_w * dloss
        target = grad_factors if joint else grad_factors[k]
        target += 2.0 * s @ (a @ rk.T)
        grad_interactions.append(reg * rk + a.T @ s @ a)
        grad_biases[k] = np.trace(dense_w @ dloss.T)
    return ObjectiveState(
        float(value), grad_factors, grad_interactions, grad_biases, layout
    )
