"""Factorization parameters, score prediction, and model serialization.

A score is the bilinear form a_i R_k a_j^T + b_k; the full score tensor is
never materialized densely. For symmetric R_k the score of an unordered pair
is orientation-independent, which is made bit-exact by always evaluating with
the smaller index on the left.
"""

from __future__ import annotations

import numpy as np

from .errors import FormatError, ValidationError
from .losses import LossAssignment
from .tensor_data import BINARY, format_number

JOINT = "joint"
PER_SLICE = "per_slice"
MODES = (JOINT, PER_SLICE)

MODEL_HEADER = "#mrmodel v1"

# R_k must satisfy ||R - R^T||_F <= tol * (1 + ||R||_F).
SYMMETRY_RTOL = 1e-8


class FactorModel:
    """Latent factors A (global or per slice), interactions R_k, biases b_k."""

    __slots__ = ("factors", "interactions", "biases", "mode", "losses")

    def __init__(self, factors, interactions, biases, mode, losses):
        if mode not in MODES:
            raise ValidationError(f"unknown mode {mode!r}")
        interactions = [np.ascontiguousarray(r, dtype=np.float64) for r in interactions]
        biases = np.ascontiguousarray(biases, dtype=np.float64)
        m = len(interactions)
        if biases.shape != (m,):
            raise ValidationError("biases length must equal the number of slices")
        if not isinstance(losses, LossAssignment) or losses.num_slices != m:
            raise ValidationError("losses must be a LossAssignment covering every slice")
        if mode == JOINT:
            factors = np.ascontiguousarray(factors, dtype=np.float64)
            factor_list = [factors]
        else:
            factors = [np.ascontiguousarray(a, dtype=np.float64) for a in factors]
            if len(factors) != m:
                raise ValidationError("per_slice mode needs one factor matrix per slice")
            factor_list = factors
        first = factor_list[0]
        if first.ndim != 2 or first.shape[1] < 1:
            raise ValidationError("factor matrices must be n x r with r >= 1")
        n, r = first.shape
        for a in factor_list:
            if a.shape != (n, r):
                raise ValidationError("factor matrices must share one (n, r) shape")
            if not np.all(np.isfinite(a)):
                raise ValidationError("non-finite factor entry")
        for k, rk in enumerate(interactions):
            if rk.shape != (r, r):
                raise ValidationError(f"interaction {k} must be {r} x {r}")
            if not np.all(np.isfinite(rk)):
                raise ValidationError(f"non-finite entry in interaction {k}")
            asym = np.linalg.norm(rk - rk.T)
            if asym > SYMMETRY_RTOL * (1.0 + np.linalg.norm(rk)):
                raise ValidationError(f"interaction {k} is not symmetric")
        if not np.all(np.isfinite(biases)):
            raise ValidationError("non-finite bias")
        self.factors = factors
        self.interactions = interactions
        self.biases = biases
        self.mode = mode
        self.losses = losses

    @property
    def num_objects(self) -> int:
        return (self.factors if self.mode == JOINT else self.factors[0]).shape[0]

    @property
    def num_slices(self) -> int:
        return len(self.interactions)

    @property
    def rank(self) -> int:
        return (self.factors if self.mode == JOINT else self.factors[0]).shape[1]

    def factor_matrix(self, k) -> np.ndarray:
        """The factor matrix scoring slice k (shared A in joint mode)."""
        return self.factors if self.mode == JOINT else self.factors[k]

    def __eq__(self, other):
        if not isinstance(other, FactorModel):
            return NotImplemented
        if self.mode != other.mode or self.losses != other.losses:
            return False
        if self.mode == JOINT:
            if not np.array_equal(self.factors, other.factors):
                return False
        elif not all(
            np.array_equal(a, b) for a, b in zip(self.factors, other.factors)
        ):
            return False
        return all(
            np.array_equal(a, b)
            for a, b in zip(self.interactions, other.interactions)
        ) and np.array_equal(self.biases, other.biases)

    def __repr__(self):
        return (
            f"FactorModel(n={self.num_objects}, m={self.num_slices}, "
            f"r={self.rank}, mode={self.mode!r})"
        )


def predict_score(model: FactorModel, i: int, j: int, k: int) -> float:
    """Bilinear score a_i R_k a_j^T + b_k for one (i, j, k) cell.

    Evaluated with the smaller index on the left so that mirrored queries are
    bit-identical.
    """
    n, m = model.num_objects, model.num_slices
    if not (0 <= i < n and 0 <= j < n and 0 <= k < m):
        raise ValidationError(f"index ({i}, {j}, {k}) out of range")
    a, b = (i, j) if i <= j else (j, i)
    factors = model.factor_matrix(k)
    return float(
        (factors[a] @ model.interactions[k]) @ factors[b] + model.biases[k]
    )


def predict_label(model: FactorModel, i: int, j: int, k: int, slice_type: str) -> float:
    """Mapped prediction: sign of the score on binary slices (0 maps to +1),
    the raw score on real slices."""
    score = predict_score(model, i, j, k)
    if slice_type == BINARY:
        return 1.0 if score >= 0.0 else -1.0
    return score


def write_model(model: FactorModel) -> str:
    """Serialize to the mrmodel v1 text format (17 significant digits)."""
    n, m, r = model.num_objects, model.num_slices, model.rank
    lines = [
        MODEL_HEADER,
        f"n {n}",
        f"m {m}",
        f"r {r}",
        f"mode {model.mode}",
    ]
    la = model.losses
    for k in range(m):
        lines.append(f"slice {k} {la.slice_types[k]} {la.losses[k]} {la.mappings[k]}")
    factor_blocks = [model.factors] if model.mode == JOINT else model.factors
    for block in factor_blocks:
        for row in block:
            lines.append(" ".join(format_number(v) for v in row))
    for rk in model.interactions:
        for row in rk:
            lines.append(" ".join(format_number(v) for v in row))
    lines.append(" ".join(format_number(v) for v in model.biases))
    return "\n".join(lines) + "\n"


def _read_matrix(rows, n_rows, n_cols, what):
    block = rows[:n_rows]
    if len(block) < n_rows:
        raise FormatError(f"truncated file: expected {n_rows} rows of {what}")
    out = np.empty((n_rows, n_cols))
    for idx, line in enumerate(block):
        parts = line.split()
        if len(parts) != n_cols:
            raise FormatError(
                f"dimension mismatch in {what}: expected {n_cols} columns, "
                f"got {len(parts)}"
            )
        try:
            out[idx] = [float(p) for p in parts]
        except ValueError:
            raise FormatError(f"malformed number in {what}") from None
    if not np.all(np.isfinite(out)):
        raise FormatError(f"non-finite value in {what}")
    return out, rows[n_rows:]


def read_model(text: str) -> FactorModel:
    """Parse the mrmodel v1 text format; the inverse of :func:`write_model`."""
    lines = [ln.strip() for ln in text.splitlines()]
    lines = [ln for ln in lines if ln]
    if not lines or lines[0] != MODEL_HEADER:
        raise FormatError(f"version mismatch: expected '{MODEL_HEADER}'")
    header = {}
    for field in ("n", "m", "r"):
        idx = len(header) + 1
        if idx >= len(lines):
            raise FormatError("truncated file: incomplete header")
        tokens = lines[idx].split()
        if len(tokens) != 2 or tokens[0] != field:
            raise FormatError(f"expected '{field} <int>' in header")
        try:
            header[field] = int(tokens[1])
        except ValueError:
            raise FormatError(f"expected '{field} <int>' in header") from None
    n, m, r = header["n"], header["m"], header["r"]
    if min(n, m, r) < 1:
        raise FormatError("n, m, r must all be positive")
    if len(lines) < 5:
        raise FormatError("truncated file: incomplete header")
    tokens = lines[4].split()
    if len(tokens) != 2 or tokens[0] != "mode" or tokens[1] not in MODES:
        raise FormatError("expected 'mode <joint|per_slice>'")
    mode = tokens[1]

    slice_types, loss_tags, mapping_tags = [], [], []
    for k in range(m):
        idx = 5 + k
        if idx >= len(lines):
            raise FormatError("truncated file: missing slice tag lines")
        tokens = lines[idx].split()
        if len(tokens) != 5 or tokens[0] != "slice" or tokens[1] != str(k):
            raise FormatError(f"expected 'slice {k} <type> <loss> <mapping>'")
        slice_types.append(tokens[2])
        loss_tags.append(tokens[3])
        mapping_tags.append(tokens[4])
    try:
        losses = LossAssignment(
            tuple(slice_types), tuple(loss_tags), tuple(mapping_tags)
        )
    except ValidationError as exc:
        raise FormatError(str(exc)) from exc

    rest = lines[5 + m :]
    if mode == JOINT:
        factors, rest = _read_matrix(rest, n, r, "factor matrix")
    else:
        factors = []
        for k in range(m):
            block, rest = _read_matrix(rest, n, r, f"factor matrix {k}")
            factors.append(block)
    interactions = []
    for k in range(m):
        block, rest = _read_matrix(rest, r, r, f"interaction matrix {k}")
        interactions.append(block)
    biases, rest = _read_matrix(rest, 1, m, "bias vector")
    if rest:
        raise FormatError(f"{len(rest)} unexpected trailing lines")
    try:
        return FactorModel(factors, interactions, biases[0], mode, losses)
    except ValidationError as exc:
        raise FormatError(str(exc)) from exc


def save_model(model: FactorModel, path):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(write_model(model))


def load_model(path) -> FactorModel:
    with open(path, "r", encoding="utf-8") as fh:
        return read_model(fh.read())
