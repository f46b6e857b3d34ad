import numpy as np
import pytest

from mrtensor import LossAssignment, ObservedTensor
from mrtensor import kernels
from mrtensor.losses import QUADRATIC, SMOOTH_HINGE


@pytest.fixture(params=kernels.available_backends())
def kernel_backend(request):
    """Run the test once per available kernel backend."""
    previous = kernels.use(request.param)
    yield request.param
    kernels.use(previous)


def random_tensor(rng, n, slice_types, fill=0.5, diagonal=False):
    """Random symmetric tensor with `fill` of the unordered pairs observed."""
    offset = 0 if diagonal else 1
    iu = np.triu_indices(n, k=offset)
    total = iu[0].size
    pair_slices = []
    for slice_type in slice_types:
        count = max(1, int(fill * total))
        chosen = rng.choice(total, size=count, replace=False)
        i = iu[0][chosen].astype(np.int32)
        j = iu[1][chosen].astype(np.int32)
        if slice_type == "binary":
            y = rng.choice([-1.0, 1.0], size=count)
        else:
            y = rng.standard_normal(count)
        w = rng.uniform(0.2, 2.0, size=count)
        pair_slices.append((i, j, y, w))
    return ObservedTensor.from_pairs(n, slice_types, pair_slices)


def random_model_arrays(rng, n, m, r, mode="joint", scale=0.5):
    if mode == "joint":
        factors = scale * rng.standard_normal((n, r))
    else:
        factors = [scale * rng.standard_normal((n, r)) for _ in range(m)]
    interactions = []
    for _ in range(m):
        raw = scale * rng.standard_normal((r, r))
        interactions.append(0.5 * (raw + raw.T))
    biases = scale * rng.standard_normal(m)
    return factors, interactions, biases


def assignment_for(slice_types, binary_loss=SMOOTH_HINGE):
    tags = tuple(binary_loss if t == "binary" else QUADRATIC for t in slice_types)
    return LossAssignment.build(slice_types, tags)


def assert_valid_tensor(tensor):
    """Re-run full construction-time validation on an existing tensor."""
    rebuilt = ObservedTensor(
        tensor.num_objects,
        tensor.slice_types,
        [tensor.entries(k) for k in range(tensor.num_slices)],
    )
    assert rebuilt == tensor
