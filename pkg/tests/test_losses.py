import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mrtensor import LossAssignment, ValidationError, logistic, quadratic, smooth_hinge
from mrtensor.losses import LOSSES


class TestQuadratic:
    def test_basic_values(self):
        assert quadratic(2.0, 1.0) == (0.5, -1.0)
        assert quadratic(3.0, 3.0) == (0.0, 0.0)
        assert quadratic(0.0, 3.0) == (4.5, 3.0)

    def test_error_sign_symmetry(self):
        value_a, _ = quadratic(1.7, -0.4)
        value_b, _ = quadratic(-0.4, 1.7)
        assert value_a == value_b


class TestSmoothHinge:
    def test_boundary_and_branch_values(self):
        assert smooth_hinge(1.0, 0.0) == (0.5, -1.0)
        assert smooth_hinge(1.0, 1.0) == (0.0, 0.0)
        # interior branch: value (1-z)^2/2, derivative x - y
        assert smooth_hinge(1.0, 0.5) == (0.125, -0.5)
        assert smooth_hinge(-1.0, 0.5) == (1.0, 1.0)

    def test_continuity_at_branch_points(self):
        eps = 1e-12
        for y in (-1.0, 1.0):
            for z0 in (0.0, 1.0):
                x0 = z0 / y
                below = smooth_hinge(y, x0 - eps * y)
                at = smooth_hinge(y, x0)
                above = smooth_hinge(y, x0 + eps * y)
                assert abs(below[0] - at[0]) < 1e-11
                assert abs(above[0] - at[0]) < 1e-11
                assert abs(below[1] - at[1]) < 1e-11
                assert abs(above[1] - at[1]) < 1e-11

    def test_rejects_non_unit_labels(self):
        with pytest.raises(ValidationError):
            smooth_hinge(0.5, 1.0)


class TestLogistic:
    def test_symmetry_point(self):
        value, grad = logistic(1.0, 0.0)
        assert value == pytest.approx(math.log(2.0), rel=1e-15)
        assert grad == -0.5

    def test_saturation(self):
        value, grad = logistic(1.0, 50.0)
        assert value < 1e-20
        assert abs(grad) < 1e-20

    def test_closed_form_high_precision(self):
        value, grad = logistic(1.0, -1.0)
        assert value == pytest.approx(math.log1p(math.e), rel=1e-15)
        assert grad == pytest.approx(-math.e / (1.0 + math.e), rel=1e-15)

    def test_no_overflow_for_extreme_scores(self):
        value, grad = logistic(-1.0, 1e4)
        assert value == pytest.approx(1e4)
        assert grad == pytest.approx(1.0)
        assert np.isfinite(value) and np.isfinite(grad)

    def test_sign_symmetry(self):
        rng = np.random.default_rng(0)
        x = rng.uniform(-30, 30, size=256)
        for y in (-1.0, 1.0):
            va, ga = logistic(y, x)
            vb, gb = logistic(-y, -x)
            np.testing.assert_array_equal(va, vb)
            np.testing.assert_array_equal(ga, -gb)

    def test_rejects_non_unit_labels(self):
        with pytest.raises(ValidationError):
            logistic(0.0, 1.0)


def central_difference(fn, y, x, h=1e-6):
    return (fn(y, x + h)[0] - fn(y, x - h)[0]) / (2.0 * h)


class TestDerivativeConsistency:
    def test_derivatives_match_central_differences(self):
        # 1000 random points per loss; points within 10h of the hinge branch
        # boundaries are nudged away since the difference quotient is only
        # first-order accurate across a second-derivative jump.
        rng = np.random.default_rng(42)
        h = 1e-6
        for tag, fn in LOSSES.items():
            checked = 0
            while checked < 1000:
                x = float(rng.uniform(-3, 3))
                if tag == "quadratic":
                    y = float(rng.uniform(-3, 3))
                else:
                    y = float(rng.choice([-1.0, 1.0]))
                    z = y * x
                    if min(abs(z), abs(z - 1.0)) < 10 * h:
                        continue
                _, grad = fn(y, x)
                fd = central_difference(fn, y, x, h)
                assert abs(grad - fd) < 1e-6 * max(1.0, abs(grad)), (tag, y, x)
                checked += 1


class TestSharedProperties:
    @settings(max_examples=200, deadline=None)
    @given(
        x=st.floats(-50, 50, allow_nan=False),
        y_sign=st.sampled_from([-1.0, 1.0]),
    )
    def test_nonnegative_and_monotone_in_margin(self, x, y_sign):
        for fn in (smooth_hinge, logistic):
            value, _ = fn(y_sign, x)
            assert value >= 0.0
            # non-increasing in z = y*x: a larger margin never costs more
            bigger, _ = fn(y_sign, x + y_sign * 0.5)
            assert bigger <= value + 1e-12

    @settings(max_examples=100, deadline=None)
    @given(y=st.floats(-10, 10, allow_nan=False), x=st.floats(-10, 10, allow_nan=False))
    def test_quadratic_nonnegative(self, y, x):
        value, _ = quadratic(y, x)
        assert value >= 0.0

    def test_vectorized_matches_scalar(self):
        rng = np.random.default_rng(3)
        x = rng.uniform(-4, 4, size=64)
        y = rng.choice([-1.0, 1.0], size=64)
        for fn in (quadratic, smooth_hinge, logistic):
            values, grads = fn(y, x)
            for e in range(x.size):
                ve, ge = fn(float(y[e]), float(x[e]))
                assert values[e] == ve
                assert grads[e] == ge


class TestLossAssignment:
    def test_auto_assignment(self):
        la = LossAssignment.auto(("binary", "real", "binary"))
        assert la.losses == ("smooth_hinge", "quadratic", "smooth_hinge")
        assert la.mappings == ("sign", "identity", "sign")

    def test_margin_losses_require_binary(self):
        with pytest.raises(ValidationError):
            LossAssignment.build(("real",), ("smooth_hinge",))
        with pytest.raises(ValidationError):
            LossAssignment.build(("real",), ("logistic",))

    def test_mapping_type_constraints(self):
        with pytest.raises(ValidationError):
            LossAssignment(("binary",), ("quadratic",), ("identity",))
        with pytest.raises(ValidationError):
            LossAssignment(("real",), ("quadratic",), ("sign",))

    def test_quadratic_allowed_everywhere(self):
        la = LossAssignment.all_quadratic(("binary", "real"))
        assert la.losses == ("quadratic", "quadratic")
        assert la.mappings == ("sign", "identity")
