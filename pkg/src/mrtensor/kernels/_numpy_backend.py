"""Numpy/scipy fallback for the compiled COO kernels.

scipy's COO product walks the entries sequentially per output column, so
results are deterministic for a fixed input, matching the compiled path's
contract (up to floating-point summation order).
"""

import numpy as np
from scipy import sparse


def pair_scores(rows, cols, left, right):
    """Return out[e] = dot(left[rows[e]], right[cols[e]])."""
    return np.einsum("er,er->e", left[rows], right[cols])


def scatter_rows(rows, cols, coeff, source, out):
    """Accumulate out[rows[e]] += coeff[e] * source[cols[e]]."""
    mat = sparse.coo_matrix(
        (coeff, (rows, cols)), shape=(out.shape[0], source.shape[0])
    )
    out += mat @ source
