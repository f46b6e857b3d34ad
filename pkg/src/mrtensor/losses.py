"""Element-wise loss functions and the per-slice loss/mapping assignment.

Each loss returns (value, dvalue_dx) in one call; the objective kernel always
needs both. All three are vectorized over numpy arrays and accept scalars.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import expit

from .errors import ValidationError
from .tensor_data import BINARY, REAL

QUADRATIC = "quadratic"
SMOOTH_HINGE = "smooth_hinge"
LOGISTIC = "logistic"
LOSS_TAGS = (QUADRATIC, SMOOTH_HINGE, LOGISTIC)

IDENTITY = "identity"
SIGN = "sign"
MAPPING_TAGS = (IDENTITY, SIGN)


def _prepare(y, x, require_binary):
    scalar = np.isscalar(y) and np.isscalar(x)
    y = np.asarray(y, dtype=np.float64)
    x = np.asarray(x, dtype=np.float64)
    if require_binary and y.size and np.any(np.abs(y) != 1.0):
        raise ValidationError("labels must be ±1")
    return y, x, scalar


def _finish(value, grad, scalar):
    if scalar:
        return float(value), float(grad)
    return value, grad


def quadratic(y, x):
    """value = (y - x)^2 / 2, dvalue_dx = x - y."""
    y, x, scalar = _prepare(y, x, require_binary=False)
    diff = x - y
    return _finish(0.5 * diff * diff, diff, scalar)


def smooth_hinge(y, x):
    """Piecewise-quadratic large-margin loss of z = y*x, smooth everywhere.

    value = 1/2 - z for z <= 0, (1 - z)^2 / 2 for 0 < z < 1, 0 for z >= 1;
    dvalue_dx = p*x - q*y with p = [0 < z < 1] and q = [z < 1].
    """
    y, x, scalar = _prepare(y, x, require_binary=True)
    z = y * x
    p = (0.0 < z) & (z < 1.0)
    q = z < 1.0
    # clip before squaring: the quadratic branch is only selected for
    # 0 < z < 1, and (1 - z)^2 would overflow for extreme scores
    zc = np.clip(z, -1.0, 2.0)
    value = np.where(z <= 0.0, 0.5 - z, np.where(p, 0.5 * (1.0 - zc) ** 2, 0.0))
    grad = p * x - q * y
    return _finish(value, grad, scalar)


def logistic(y, x):
    """value = log(1 + exp(-y*x)), dvalue_dx = -y / (1 + exp(y*x)).

    The value is computed as max(-z, 0) + log1p(exp(-|z|)) so it never
    overflows in double precision.
    """
    y, x, scalar = _prepare(y, x, require_binary=True)
    z = y * x
    value = np.maximum(-z, 0.0) + np.log1p(np.exp(-np.abs(z)))
    grad = -y * expit(-z)
    return _finish(value, grad, scalar)


LOSSES = {QUADRATIC: quadratic, SMOOTH_HINGE: smooth_hinge, LOGISTIC: logistic}


def default_mapping(slice_type: str) -> str:
    return SIGN if slice_type == BINARY else IDENTITY


@dataclass(frozen=True)
class LossAssignment:
    """Per-slice loss tags and prediction mappings, validated against types."""

    slice_types: tuple
    losses: tuple
    mappings: tuple

    def __post_init__(self):
        object.__setattr__(self, "slice_types", tuple(self.slice_types))
        object.__setattr__(self, "losses", tuple(self.losses))
        object.__setattr__(self, "mappings", tuple(self.mappings))
        if not (len(self.slice_types) == len(self.losses) == len(self.mappings)):
            raise ValidationError("per-slice tag sequences must have equal length")
        for k, (t, loss, mapping) in enumerate(
            zip(self.slice_types, self.losses, self.mappings)
        ):
            if t not in (BINARY, REAL):
                raise ValidationError(f"slice {k}: unknown slice type {t!r}")
            if loss not in LOSS_TAGS:
                raise ValidationError(f"slice {k}: unknown loss {loss!r}")
            if mapping not in MAPPING_TAGS:
                raise ValidationError(f"slice {k}: unknown mapping {mapping!r}")
            if loss in (SMOOTH_HINGE, LOGISTIC) and t != BINARY:
                raise ValidationError(f"slice {k}: {loss} requires a binary slice")
            if mapping == IDENTITY and t != REAL:
                raise ValidationError(f"slice {k}: identity mapping requires a real slice")
            if mapping == SIGN and t != BINARY:
                raise ValidationError(f"slice {k}: sign mapping requires a binary slice")

    @property
    def num_slices(self) -> int:
        return len(self.slice_types)

    def loss_function(self, k):
        return LOSSES[self.losses[k]]

    @classmethod
    def build(cls, slice_types, losses):
        """Assignment with the given loss tags and type-derived mappings."""
        slice_types = tuple(slice_types)
        mappings = tuple(default_mapping(t) for t in slice_types)
        return cls(slice_types, tuple(losses), mappings)

    @classmethod
    def for_binary_loss(cls, binary_loss: str, slice_types):
        """binary_loss on binary slices, quadratic on real slices."""
        tags = tuple(
            binary_loss if t == BINARY else QUADRATIC for t in slice_types
        )
        return cls.build(slice_types, tags)

    @classmethod
    def auto(cls, slice_types):
        """Smooth hinge for binary slices, quadratic for real slices."""
        return cls.for_binary_loss(SMOOTH_HINGE, slice_types)

    @classmethod
    def all_quadratic(cls, slice_types):
        return cls.build(slice_types, (QUADRATIC,) * len(tuple(slice_types)))
