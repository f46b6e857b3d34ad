"""Sparse symmetric multi-relational tensor storage, I/O, and splitting.

An :class:`ObservedTensor` holds one entry per stored (slice, row, col) cell;
both mirror orientations of an unordered pair are materialized so that sums
over stored entries match the symmetric objective exactly. Unobserved cells
are simply absent (a zero weight means "not stored").
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateSplitError, FormatError, ValidationError

BINARY = "binary"
REAL = "real"
SLICE_TYPES = (BINARY, REAL)

TENSOR_HEADER = "#mrtensor v1"


def format_number(x: float) -> str:
    """Render a float with 17 significant digits (exact round-trip)."""
    return f"{float(x):.17g}"


def format_value(x: float) -> str:
    """Shortest decimal that round-trips exactly (for text files and CSVs)."""
    return repr(float(x))


class ObservedTensor:
    """Sparse symmetric 3-mode observations with per-entry confidence weights.

    Entries per slice are kept sorted by (row, col); construction validates
    index ranges, weight non-negativity, symmetry of mirrored entries,
    binary values in {-1, +1}, and absence of duplicate keys. Entries with
    zero weight are dropped (unobserved means absent). Instances are
    immutable after construction.
    """

    __slots__ = ("num_objects", "slice_types", "_rows", "_cols", "_vals", "_wgts")

    def __init__(self, num_objects, slice_types, slices, _validated=False):
        if num_objects < 1:
            raise ValidationError("num_objects must be positive")
        slice_types = tuple(slice_types)
        if not slice_types:
            raise ValidationError("at least one slice required")
        for t in slice_types:
            if t not in SLICE_TYPES:
                raise ValidationError(f"unknown slice type {t!r}")
        if len(slices) != len(slice_types):
            raise ValidationError("slices and slice_types lengths differ")
        self.num_objects = int(num_objects)
        self.slice_types = slice_types
        self._rows, self._cols, self._vals, self._wgts = [], [], [], []
        for k, (i, j, y, w) in enumerate(slices):
            i = np.ascontiguousarray(i, dtype=np.int32)
            j = np.ascontiguousarray(j, dtype=np.int32)
            y = np.ascontiguousarray(y, dtype=np.float64)
            w = np.ascontiguousarray(w, dtype=np.float64)
            if not (i.shape == j.shape == y.shape == w.shape) or i.ndim != 1:
                raise ValidationError(f"slice {k}: entry arrays must be equal-length 1-d")
            if not _validated:
                i, j, y, w = self._validate_slice(k, i, j, y, w)
            for arr in (i, j, y, w):
                arr.flags.writeable = False
            self._rows.append(i)
            self._cols.append(j)
            self._vals.append(y)
            self._wgts.append(w)

    def _validate_slice(self, k, i, j, y, w):
        n = self.num_objects
        if i.size and (i.min() < 0 or i.max() >= n or j.min() < 0 or j.max() >= n):
            raise ValidationError(f"slice {k}: index out of range [0, {n})")
        if np.any(w < 0):
            raise ValidationError(f"slice {k}: negative weight")
        if np.any(~np.isfinite(y)) or np.any(~np.isfinite(w)):
            raise ValidationError(f"slice {k}: non-finite value or weight")
        keep = w > 0
        i, j, y, w = i[keep], j[keep], y[keep], w[keep]
        if self.slice_types[k] == BINARY and i.size and np.any(np.abs(y) != 1.0):
            raise ValidationError(f"slice {k}: binary value must be ±1")
        order = np.lexsort((j, i))
        i, j, y, w = i[order], j[order], y[order], w[order]
        key = i.astype(np.int64) * n + j
        if i.size > 1 and np.any(np.diff(key) == 0):
            raise ValidationError(f"slice {k}: duplicate (row, col) key")
        # Mirror check: the (col, row)-sorted view must equal the
        # (row, col)-sorted view entry for entry.
        t_order = np.lexsort((i, j))
        if (
            not np.array_equal(j[t_order], i)
            or not np.array_equal(i[t_order], j)
            or not np.array_equal(y[t_order], y)
            or not np.array_equal(w[t_order], w)
        ):
            raise ValidationError(f"slice {k}: entries are not symmetric")
        return i, j, y, w

    @classmethod
    def from_entries(cls, num_objects, slice_types, entries):
        """Build from an iterable of (k, i, j, y, w) tuples (mirrors included)."""
        m = len(tuple(slice_types))
        per_slice = [([], [], [], []) for _ in range(m)]
        for k, i, j, y, w in entries:
            if not 0 <= k < m:
                raise ValidationError(f"slice index {k} out of range [0, {m})")
            cols = per_slice[k]
            cols[0].append(i)
            cols[1].append(j)
            cols[2].append(y)
            cols[3].append(w)
        slices = [
            (np.asarray(c[0], np.int32), np.asarray(c[1], np.int32),
             np.asarray(c[2], np.float64), np.asarray(c[3], np.float64))
            for c in per_slice
        ]
        return cls(num_objects, slice_types, slices)

    @classmethod
    def from_pairs(cls, num_objects, slice_types, pair_slices, _validated=False):
        """Build from per-slice unordered pairs (i <= j); mirrors are added."""
        slices = []
        for i, j, y, w in pair_slices:
            i = np.asarray(i, np.int32)
            j = np.asarray(j, np.int32)
            y = np.asarray(y, np.float64)
            w = np.asarray(w, np.float64)
            off = i != j
            fi = np.concatenate([i, j[off]])
            fj = np.concatenate([j, i[off]])
            fy = np.concatenate([y, y[off]])
            fw = np.concatenate([w, w[off]])
            order = np.lexsort((fj, fi))
            slices.append((fi[order], fj[order], fy[order], fw[order]))
        return cls(num_objects, slice_types, slices, _validated=_validated)

    @property
    def num_slices(self) -> int:
        return len(self.slice_types)

    @property
    def num_entries(self) -> int:
        """Total stored entries, mirrors counted separately."""
        return int(sum(r.size for r in self._rows))

    def entries(self, k):
        """(rows, cols, values, weights) arrays for slice k, sorted by (i, j)."""
        return self._rows[k], self._cols[k], self._vals[k], self._wgts[k]

    def num_pairs(self, k) -> int:
        """Stored unordered pairs in slice k (diagonal entries count once)."""
        return int(np.count_nonzero(self._rows[k] <= self._cols[k]))

    def pairs(self, k):
        """(i, j, y, w) restricted to the i <= j representative of each pair."""
        i, j, y, w = self.entries(k)
        keep = i <= j
        return i[keep], j[keep], y[keep], w[keep]

    def slice_mean(self, k) -> float:
        """Mean of stored values in slice k, 0.0 when the slice is empty."""
        v = self._vals[k]
        return float(v.mean()) if v.size else 0.0

    def __eq__(self, other):
        if not isinstance(other, ObservedTensor):
            return NotImplemented
        if self.num_objects != other.num_objects or self.slice_types != other.slice_types:
            return False
        for k in range(self.num_slices):
            for a, b in zip(self.entries(k), other.entries(k)):
                if not np.array_equal(a, b):
                    return False
        return True

    def __hash__(self):
        parts = [self.num_objects, self.slice_types]
        for k in range(self.num_slices):
            parts.extend(arr.tobytes() for arr in self.entries(k))
        return hash(tuple(parts))

    def __repr__(self):
        return (
            f"ObservedTensor(n={self.num_objects}, m={self.num_slices}, "
            f"entries={self.num_entries})"
        )

    def to_text(self) -> str:
        """Serialize to the mrtensor v1 format (one line per unordered pair)."""
        lines = [TENSOR_HEADER, f"n {self.num_objects}", f"m {self.num_slices}"]
        for k, t in enumerate(self.slice_types):
            lines.append(f"slice {k} {t}")
        for k in range(self.num_slices):
            i, j, y, w = self.pairs(k)
            for e in range(i.size):
                line = f"{k} {i[e]} {j[e]} {format_value(y[e])}"
                if w[e] != 1.0:
                    line += f" {format_value(w[e])}"
                lines.append(line)
        return "\n".join(lines) + "\n"

    def write(self, path):
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(self.to_text())


def _parse_header_int(tokens, name, lineno):
    if len(tokens) != 2 or tokens[0] != name:
        raise FormatError(f"line {lineno}: expected '{name} <int>'")
    try:
        value = int(tokens[1])
    except ValueError:
        raise FormatError(f"line {lineno}: expected '{name} <int>'") from None
    if value < 1:
        raise FormatError(f"line {lineno}: {name} must be positive")
    return value


def parse_tensor(stream) -> ObservedTensor:
    """Parse the mrtensor v1 text format from a stream or string.

    Each unordered pair may be listed once (the mirror is materialized) or
    twice (the mirrors must agree exactly).
    """
    if isinstance(stream, str):
        lines = stream.splitlines()
    else:
        lines = stream.read().splitlines()
    stripped = [(no, line.strip()) for no, line in enumerate(lines, start=1)]
    nonempty = [(no, line) for no, line in stripped if line]
    if not nonempty:
        raise FormatError("empty input: expected header")
    lineno, line = nonempty[0]
    if line != TENSOR_HEADER:
        raise FormatError(f"line {lineno}: version mismatch, expected '{TENSOR_HEADER}'")
    # Beyond the version line, '#'-prefixed lines are comments.
    content = [(no, line) for no, line in nonempty[1:] if not line.startswith("#")]

    pos = 0

    def next_line(expect):
        nonlocal pos
        if pos >= len(content):
            raise FormatError(f"unexpected end of file: expected {expect}")
        item = content[pos]
        pos += 1
        return item

    lineno, line = next_line("'n <num_objects>'")
    n = _parse_header_int(line.split(), "n", lineno)
    lineno, line = next_line("'m <num_slices>'")
    m = _parse_header_int(line.split(), "m", lineno)

    slice_types = []
    for k in range(m):
        lineno, line = next_line(f"'slice {k} <binary|real>'")
        tokens = line.split()
        if (
            len(tokens) != 3
            or tokens[0] != "slice"
            or tokens[1] != str(k)
            or tokens[2] not in SLICE_TYPES
        ):
            raise FormatError(f"line {lineno}: expected 'slice {k} <binary|real>'")
        slice_types.append(tokens[2])

    # seen[key] = (y, w, orientations) with key the ordered (k, i, j), i <= j
    seen: dict[tuple[int, int, int], tuple[float, float, set]] = {}
    for lineno, line in content[pos:]:
        tokens = line.split()
        if len(tokens) not in (4, 5):
            raise FormatError(
                f"line {lineno}: expected '<k> <i> <j> <value> [<weight>]'"
            )
        try:
            k, i, j = int(tokens[0]), int(tokens[1]), int(tokens[2])
            y = float(tokens[3])
            w = float(tokens[4]) if len(tokens) == 5 else 1.0
        except ValueError:
            raise FormatError(f"line {lineno}: malformed entry line") from None
        if not 0 <= k < m:
            raise FormatError(f"line {lineno}: slice index {k} out of range [0, {m})")
        if not (0 <= i < n and 0 <= j < n):
            raise FormatError(f"line {lineno}: index out of range [0, {n})")
        if not math.isfinite(y) or not math.isfinite(w):
            raise FormatError(f"line {lineno}: non-finite value or weight")
        if w < 0:
            raise FormatError(f"line {lineno}: negative weight")
        if slice_types[k] == BINARY and y not in (-1.0, 1.0):
            raise FormatError(f"line {lineno}: binary value must be ±1")
        key = (k, i, j) if i <= j else (k, j, i)
        orientation = i <= j
        if key in seen:
            y0, w0, orients = seen[key]
            if orientation in orients:
                raise FormatError(f"line {lineno}: duplicate key {key}")
            if y != y0 or w != w0:
                raise FormatError(
                    f"line {lineno}: mirror of {key} disagrees "
                    f"(value {y0} vs {y}, weight {w0} vs {w})"
                )
            orients.add(orientation)
        else:
            seen[key] = (y, w, {orientation})

    pair_slices = [([], [], [], []) for _ in range(m)]
    for (k, i, j), (y, w, _) in seen.items():
        cols = pair_slices[k]
        cols[0].append(i)
        cols[1].append(j)
        cols[2].append(y)
        cols[3].append(w)
    return ObservedTensor.from_pairs(n, slice_types, pair_slices)


def read_tensor(path) -> ObservedTensor:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_tensor(fh)


@dataclass(frozen=True)
class SplitSpec:
    """Per-slice random partition of unordered pairs into train/val/test."""

    train_fraction: float
    validation_fraction_of_train: float = 0.25
    seed: int = 42

    def __post_init__(self):
        if not 0.0 < self.train_fraction <= 1.0:
            raise ValidationError("train_fraction must be in (0, 1]")
        if not 0.0 <= self.validation_fraction_of_train < 1.0:
            raise ValidationError("validation_fraction_of_train must be in [0, 1)")


def split(tensor: ObservedTensor, spec: SplitSpec):
    """Partition each slice's unordered pairs into (train, validation, test).

    Train receives floor(train_fraction * P_k) pairs, validation then removes
    floor(validation_fraction_of_train * train) of them, and the remainder is
    the test set. Mirrored entries always land in the same partition, and the
    result is deterministic for a fixed seed.
    """
    rng = np.random.default_rng(spec.seed)
    parts = ([], [], [])  # per-slice pair arrays for train / val / test
    for k in range(tensor.num_slices):
        i, j, y, w = tensor.pairs(k)
        p_k = i.size
        t_k = int(spec.train_fraction * p_k)
        if t_k == 0:
            raise DegenerateSplitError(
                f"slice {k}: train_fraction {spec.train_fraction} of {p_k} "
                "pairs yields an empty training set"
            )
        v_k = int(spec.validation_fraction_of_train * t_k)
        perm = rng.permutation(p_k)
        selections = (perm[: t_k - v_k], perm[t_k - v_k : t_k], perm[t_k:])
        for part, sel in zip(parts, selections):
            sel = np.sort(sel)
            part.append((i[sel], j[sel], y[sel], w[sel]))
    return tuple(
        ObservedTensor.from_pairs(
            tensor.num_objects, tensor.slice_types, part, _validated=True
        )
        for part in parts
    )


def apply_class_reweighting(tensor: ObservedTensor, positive_multiplier: float):
    """Multiply the weights of y = +1 entries on binary slices.

    Real slices are untouched. Raises for a non-positive multiplier.
    """
    if not positive_multiplier > 0:
        raise ValidationError("positive_multiplier must be > 0")
    slices = []
    for k in range(tensor.num_slices):
        i, j, y, w = tensor.entries(k)
        if tensor.slice_types[k] == BINARY:
            w = np.where(y == 1.0, w * positive_multiplier, w)
        slices.append((i, j, y, w))
    return ObservedTensor(
        tensor.num_objects, tensor.slice_types, slices, _validated=True
    )
