"""Synthetic multi-relational tensors with planted low-rank structure.

Binary slices threshold a noisy low-rank matrix at a per-slice percentile
(heavily skewed towards the negative class); real slices are rescaled to
unit standard deviation. The generated tensor is fully observed with unit
weights; callers subsample via tensor_data.split.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ValidationError
from .losses import LossAssignment
from .model import JOINT, FactorModel
from .tensor_data import BINARY, REAL, ObservedTensor


@dataclass(frozen=True)
class SynthConfig:
    num_objects: int
    num_binary_slices: int
    num_real_slices: int
    rank: int
    noise_std: float = 0.1
    positive_percentile: float = 90.0
    include_diagonal: bool = False
    seed: int = 42

    def __post_init__(self):
        if self.num_objects < 1:
            raise ValidationError("num_objects must be positive")
        if self.num_binary_slices < 0 or self.num_real_slices < 0:
            raise ValidationError("slice counts must be non-negative")
        if self.num_binary_slices + self.num_real_slices < 1:
            raise ValidationError("at least one slice required")
        if not 1 <= self.rank <= self.num_objects:
            raise ValidationError("rank must be in [1, num_objects]")
        if self.noise_std < 0:
            raise ValidationError("noise_std must be >= 0")
        if not 0.0 < self.positive_percentile < 100.0:
            raise ValidationError("positive_percentile must be in (0, 100)")

    @property
    def slice_types(self):
        """Binary slices first, then real slices."""
        return (BINARY,) * self.num_binary_slices + (REAL,) * self.num_real_slices


def nearest_rank_percentile(values: np.ndarray, percentile: float) -> float:
    """Nearest-rank percentile: the ceil(p/100 * N)-th smallest value."""
    ordered = np.sort(np.asarray(values, dtype=np.float64))
    rank = math.ceil(percentile / 100.0 * ordered.size)
    return float(ordered[max(rank, 1) - 1])


def _symmetric_noise(rng, n, std):
    raw = std * rng.standard_normal((n, n))
    upper = np.triu(raw)
    return upper + np.triu(raw, 1).T


def generate(cfg: SynthConfig):
    """Sample a planted tensor; returns (full ObservedTensor, planted model).

    Per slice: X = A R_k A^T + E with A, R_k standard normal (R_k
    symmetrized) and E symmetric N(0, noise_std^2) noise. Binary slices are
    thresholded at the per-slice percentile of the upper-triangle values
    (strictly above -> +1); real slices are rescaled so the stored values
    have unit population standard deviation, with R_k scaled to match.
    """
    n, r = cfg.num_objects, cfg.rank
    rng = np.random.default_rng(cfg.seed)
    factors = rng.standard_normal((n, r))
    diag_offset = 0 if cfg.include_diagonal else 1
    iu = np.triu_indices(n, k=diag_offset)

    slice_types = cfg.slice_types
    pair_slices = []
    planted_interactions = []
    for k, slice_type in enumerate(slice_types):
        raw = rng.standard_normal((r, r))
        interaction = 0.5 * (raw + raw.T)
        noise = _symmetric_noise(rng, n, cfg.noise_std)
        dense = factors @ interaction @ factors.T + noise
        if slice_type == BINARY:
            # Percentile over the upper triangle including the diagonal.
            threshold = nearest_rank_percentile(
                dense[np.triu_indices(n)], cfg.positive_percentile
            )
            values = np.where(dense[iu] > threshold, 1.0, -1.0)
            planted_interactions.append(interaction)
        else:
            stored = dense[iu]
            scale = 1.0 / float(np.std(stored))
            values = stored * scale
            planted_interactions.append(interaction * scale)
        pair_slices.append(
            (iu[0].astype(np.int32), iu[1].astype(np.int32), values, np.ones(values.size))
        )

    tensor = ObservedTensor.from_pairs(n, slice_types, pair_slices, _validated=True)
    planted = FactorModel(
        factors,
        planted_interactions,
        np.zeros(len(slice_types)),
        JOINT,
        LossAssignment.all_quadratic(slice_types),
    )
    return tensor, planted
