import numpy as np
import pytest

from mrtensor import SynthConfig, ValidationError, generate
from mrtensor.optimizer import densify_slice
from mrtensor.synthgen import nearest_rank_percentile

from conftest import assert_valid_tensor


class TestNearestRankPercentile:
    def test_small_arrays(self):
        values = np.array([1.0, 2.0, 3.0, 4.0])
        assert nearest_rank_percentile(values, 50.0) == 2.0
        assert nearest_rank_percentile(values, 75.0) == 3.0
        assert nearest_rank_percentile(values, 76.0) == 4.0
        assert nearest_rank_percentile(values, 10.0) == 1.0

    def test_unsorted_input(self):
        assert nearest_rank_percentile(np.array([5.0, 1.0, 3.0]), 90.0) == 5.0


def base_config(**overrides):
    defaults = dict(
        num_objects=40,
        num_binary_slices=2,
        num_real_slices=1,
        rank=4,
        seed=9,
    )
    defaults.update(overrides)
    return SynthConfig(**defaults)


class TestGenerate:
    def test_output_is_a_valid_tensor(self):
        tensor, _ = generate(base_config())
        assert_valid_tensor(tensor)
        assert tensor.slice_types == ("binary", "binary", "real")

    def test_binary_values_are_unit(self):
        tensor, _ = generate(base_config())
        for k in (0, 1):
            assert set(np.unique(tensor.entries(k)[2])) <= {-1.0, 1.0}

    def test_fully_observed_off_diagonal(self):
        cfg = base_config()
        tensor, _ = generate(cfg)
        n = cfg.num_objects
        for k in range(3):
            assert tensor.num_pairs(k) == n * (n - 1) // 2
            assert np.all(tensor.entries(k)[3] == 1.0)

    def test_include_diagonal(self):
        cfg = base_config(include_diagonal=True)
        tensor, _ = generate(cfg)
        n = cfg.num_objects
        assert tensor.num_pairs(0) == n * (n + 1) // 2

    def test_determinism_and_seed_sensitivity(self):
        cfg = base_config()
        a, _ = generate(cfg)
        b, _ = generate(cfg)
        c, _ = generate(base_config(seed=10))
        assert a == b
        assert a != c
        assert hash(a) == hash(b)
        assert hash(a) != hash(c)

    def test_real_slice_unit_standard_deviation(self):
        tensor, _ = generate(base_config(num_objects=60))
        _, _, values, _ = tensor.pairs(2)
        assert abs(float(np.std(values)) - 1.0) < 1e-6

    def test_positive_fraction_tracks_percentile(self):
        # ~10% positives at the default 90th percentile, across 20 seeds
        fractions = []
        for seed in range(20):
            cfg = SynthConfig(
                num_objects=200, num_binary_slices=1, num_real_slices=0,
                rank=10, seed=seed,
            )
            tensor, _ = generate(cfg)
            _, _, y, _ = tensor.pairs(0)
            fractions.append(float(np.mean(y == 1.0)))
        assert all(0.08 <= f <= 0.12 for f in fractions)

    def test_noiseless_real_slice_is_planted_low_rank(self):
        cfg = base_config(
            num_binary_slices=0, num_real_slices=1, noise_std=0.0,
            include_diagonal=True,
        )
        tensor, planted = generate(cfg)
        dense = densify_slice(tensor, 0)
        expected = (
            planted.factors @ planted.interactions[0] @ planted.factors.T
        )
        np.testing.assert_allclose(dense, expected, atol=1e-12)
        singular_values = np.linalg.svd(dense, compute_uv=False)
        assert np.all(singular_values[cfg.rank :] < 1e-8)

    def test_noise_scaled_consistently_with_planted_model(self):
        # with noise the planted interactions absorb the same rescaling as
        # the stored values, so residuals stay at the noise level
        cfg = base_config(num_binary_slices=0, num_real_slices=1, noise_std=0.05)
        tensor, planted = generate(cfg)
        dense = densify_slice(tensor, 0)
        expected = planted.factors @ planted.interactions[0] @ planted.factors.T
        np.fill_diagonal(dense, np.diag(expected))  # diagonal not stored
        residual = dense - expected
        assert np.std(residual) < 3 * 0.05

    def test_config_validation(self):
        with pytest.raises(ValidationError):
            base_config(num_binary_slices=0, num_real_slices=0)
        with pytest.raises(ValidationError):
            base_config(rank=80)
        with pytest.raises(ValidationError):
            base_config(noise_std=-0.1)
        with pytest.raises(ValidationError):
            base_config(positive_percentile=100.0)
