import numpy as np
import pytest

from mrtensor import (
    FactorModel,
    FormatError,
    LossAssignment,
    ValidationError,
    predict_label,
    predict_score,
    read_model,
    write_model,
)

from conftest import random_model_arrays


def make_model(rng=None, n=7, m=2, r=3, mode="joint", types=("binary", "real")):
    rng = rng or np.random.default_rng(0)
    factors, interactions, biases = random_model_arrays(rng, n, m, r, mode)
    return FactorModel(
        factors, interactions, biases, mode, LossAssignment.auto(types)
    )


class TestPredict:
    def test_bilinear_example(self):
        factors = np.array([[1.0, 0.0], [0.0, 1.0]])
        interactions = [np.array([[0.0, 2.0], [2.0, 0.0]])]
        model = FactorModel(
            factors, interactions, [0.5], "joint", LossAssignment.auto(("real",))
        )
        assert predict_score(model, 0, 1, 0) == 2.5

    def test_bias_only_model(self):
        model = FactorModel(
            np.zeros((4, 2)),
            [np.zeros((2, 2))],
            [3.25],
            "joint",
            LossAssignment.auto(("real",)),
        )
        for i in range(4):
            for j in range(4):
                assert predict_score(model, i, j, 0) == 3.25

    def test_score_symmetry_is_exact(self):
        model = make_model(np.random.default_rng(5))
        for i in range(model.num_objects):
            for j in range(model.num_objects):
                for k in range(model.num_slices):
                    assert predict_score(model, i, j, k) == predict_score(model, j, i, k)

    def test_index_out_of_range(self):
        model = make_model()
        with pytest.raises(ValidationError):
            predict_score(model, 0, 99, 0)

    def test_labels(self):
        model = make_model()
        score = predict_score(model, 0, 1, 0)
        label = predict_label(model, 0, 1, 0, "binary")
        assert label == (1.0 if score >= 0 else -1.0)
        assert predict_label(model, 0, 1, 1, "real") == predict_score(model, 0, 1, 1)

    def test_sign_zero_is_positive(self):
        model = FactorModel(
            np.zeros((3, 2)),
            [np.zeros((2, 2))],
            [0.0],
            "joint",
            LossAssignment.auto(("binary",)),
        )
        assert predict_label(model, 0, 1, 0, "binary") == 1.0

    def test_label_idempotent_on_binary(self):
        model = make_model(np.random.default_rng(9))
        label = predict_label(model, 2, 3, 0, "binary")
        assert label in (-1.0, 1.0)
        assert np.sign(label) == label

    def test_per_slice_mode_uses_slice_factors(self):
        rng = np.random.default_rng(2)
        model = make_model(rng, mode="per_slice")
        a0 = model.factor_matrix(0)
        expected = float(a0[1] @ model.interactions[0] @ a0[2] + model.biases[0])
        assert predict_score(model, 1, 2, 0) == pytest.approx(expected, rel=1e-15)


class TestValidation:
    def test_rank_zero_rejected(self):
        with pytest.raises(ValidationError):
            FactorModel(
                np.zeros((3, 0)),
                [np.zeros((0, 0))],
                [0.0],
                "joint",
                LossAssignment.auto(("real",)),
            )

    def test_asymmetric_interaction_rejected(self):
        with pytest.raises(ValidationError, match="symmetric"):
            FactorModel(
                np.zeros((3, 2)),
                [np.array([[0.0, 1.0], [0.0, 0.0]])],
                [0.0],
                "joint",
                LossAssignment.auto(("real",)),
            )

    def test_non_finite_rejected(self):
        factors = np.zeros((3, 2))
        factors[0, 0] = np.nan
        with pytest.raises(ValidationError):
            FactorModel(
                factors,
                [np.zeros((2, 2))],
                [0.0],
                "joint",
                LossAssignment.auto(("real",)),
            )

    def test_bias_length_mismatch(self):
        with pytest.raises(ValidationError):
            FactorModel(
                np.zeros((3, 2)),
                [np.zeros((2, 2))],
                [0.0, 1.0],
                "joint",
                LossAssignment.auto(("real",)),
            )

    def test_per_slice_needs_factor_per_slice(self):
        with pytest.raises(ValidationError):
            FactorModel(
                [np.zeros((3, 2))],
                [np.zeros((2, 2)), np.zeros((2, 2))],
                [0.0, 0.0],
                "per_slice",
                LossAssignment.auto(("real", "real")),
            )


class TestSerialization:
    @pytest.mark.parametrize("mode", ["joint", "per_slice"])
    def test_round_trip_bit_for_bit(self, mode):
        for seed in range(5):
            model = make_model(np.random.default_rng(seed), mode=mode)
            assert read_model(write_model(model)) == model

    def test_round_trip_extreme_values(self):
        factors = np.array([[1e-300, 1.0 / 3.0], [np.pi, -1e300]])
        model = FactorModel(
            factors,
            [np.array([[0.1, 0.2], [0.2, 0.3]])],
            [1e-17],
            "joint",
            LossAssignment.auto(("real",)),
        )
        assert read_model(write_model(model)) == model

    def test_truncated_file(self):
        text = write_model(make_model())
        truncated = "\n".join(text.splitlines()[:-3])
        with pytest.raises(FormatError, match="truncated|expected"):
            read_model(truncated)

    def test_version_mismatch(self):
        with pytest.raises(FormatError, match="version"):
            read_model("#mrmodel v9\n")

    def test_dimension_mismatch(self):
        text = write_model(make_model())
        lines = text.splitlines()
        lines[7] = lines[7] + " 1.0"  # widen one factor row
        with pytest.raises(FormatError, match="dimension|columns"):
            read_model("\n".join(lines))

    def test_non_finite_value_rejected(self):
        text = write_model(make_model()).replace("slice", "slice", 1)
        lines = text.splitlines()
        parts = lines[7].split()
        parts[0] = "nan"
        lines[7] = " ".join(parts)
        with pytest.raises(FormatError, match="non-finite"):
            read_model("\n".join(lines))

    def test_trailing_garbage_rejected(self):
        text = write_model(make_model()) + "0.0 0.0\n"
        with pytest.raises(FormatError, match="trailing"):
            read_model(text)
