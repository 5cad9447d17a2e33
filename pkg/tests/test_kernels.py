import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from mslab.kernels import (
    KERNEL_ALPHAS,
    Profile,
    kernel_eval,
    profile_deriv,
    profile_eval,
    weight_eval,
)


class TestProfileEval:
    def test_at_zero(self):
        assert profile_eval(Profile(2), 0.0) == 1.0

    def test_support_boundary(self):
        assert profile_eval(Profile(2), 1.0) == 0.0

    def test_midpoint(self):
        # direct evaluation of (1 - 0.5)^2
        assert profile_eval(Profile(2), 0.5) == pytest.approx((1 - 0.5) ** 2, abs=0)

    def test_hard_truncation_is_exact_zero(self):
        for t in (1.0, 1.0 + 1e-12, 1.5, 100.0):
            assert profile_eval(Profile(3), t) == 0.0

    def test_negative_rejected(self):
        with pytest.raises(ValueError):
            profile_eval(Profile(2), -1e-9)

    def test_array_input(self):
        out = profile_eval(Profile(2), np.array([0.0, 0.5, 2.0]))
        assert out.tolist() == [1.0, 0.25, 0.0]


class TestProfileDeriv:
    def test_at_zero_equals_minus_alpha(self):
        for a in (2, 3, 4):
            assert profile_deriv(Profile(a), 0.0) == -a

    def test_support_boundary(self):
        assert profile_deriv(Profile(3), 1.0) == 0.0

    def test_quarter(self):
        # -2 * (1 - 0.25)
        assert profile_deriv(Profile(2), 0.25) == pytest.approx(-1.5, abs=0)

    def test_negative_rejected(self):
        with pytest.raises(ValueError):
            profile_deriv(Profile(2), -0.1)

    @pytest.mark.parametrize("alpha", [2, 3, 4])
    def test_strictly_negative_inside_support(self, alpha):
        for t in np.linspace(0.0, 0.999, 50):
            assert profile_deriv(Profile(alpha), float(t)) < 0

    @pytest.mark.parametrize("alpha", [2, 3, 4])
    def test_finite_difference(self, alpha):
        p = Profile(alpha)
        eps = 1e-6
        for t in np.arange(0.1, 0.95, 0.1):
            fd = (profile_eval(p, t + eps) - profile_eval(p, t - eps)) / (2 * eps)
            assert abs(profile_deriv(p, float(t)) - fd) <= 1e-6


@pytest.mark.parametrize("alpha", [2, 3, 4])
def test_convexity_chord_inequality(alpha):
    p = Profile(alpha)
    rng = np.random.default_rng(1)
    for _ in range(300):
        t1, t2, t3 = np.sort(rng.uniform(0.0, 1.0, size=3))
        if t3 - t1 < 1e-9:
            continue
        lam = (t2 - t1) / (t3 - t1)
        chord = (1 - lam) * profile_eval(p, t1) + lam * profile_eval(p, t3)
        assert profile_eval(p, float(t2)) <= chord + 1e-12


class TestKernelAndWeight:
    def test_kernel_at_origin(self):
        assert kernel_eval(Profile(2), np.zeros(3)) == 1.0

    def test_kernel_at_unit_norm(self):
        assert kernel_eval(Profile(2), np.array([1.0, 0.0])) == 0.0

    def test_kernel_inside(self):
        # (1 - 0.04)^2
        assert kernel_eval(Profile(2), np.array([0.2, 0.0])) == pytest.approx(
            0.9216, abs=1e-15
        )

    def test_weight_at_origin(self):
        assert weight_eval(Profile(2), np.zeros(2)) == 2.0

    def test_weight_inside(self):
        # 2 * (1 - 0.04)
        assert weight_eval(Profile(2), np.array([-0.2, 0.0])) == pytest.approx(
            1.92, abs=1e-15
        )

    def test_weight_outside_support(self):
        assert weight_eval(Profile(2), np.array([1.5, 0.0])) == 0.0

    def test_weight_positive_iff_inside_unit_ball(self):
        p = Profile(3)
        for r in (0.0, 0.3, 0.999):
            assert weight_eval(p, np.array([r, 0.0])) > 0
        for r in (1.0, 1.001, 5.0):
            assert weight_eval(p, np.array([r, 0.0])) == 0.0


@given(
    st.floats(min_value=-3.0, max_value=3.0, allow_nan=False),
    st.floats(min_value=-3.0, max_value=3.0, allow_nan=False),
    st.floats(min_value=0.0, max_value=2 * math.pi),
)
def test_weight_is_radially_symmetric(x, y, angle):
    p = Profile(2)
    u = np.array([x, y])
    rot = np.array(
        [[math.cos(angle), -math.sin(angle)], [math.sin(angle), math.cos(angle)]]
    )
    assert abs(weight_eval(p, rot @ u) - weight_eval(p, u)) <= 1e-15


class TestProfileType:
    def test_alpha_below_two_rejected(self):
        with pytest.raises(ValueError):
            Profile(1)

    def test_non_integer_rejected(self):
        with pytest.raises(ValueError):
            Profile(2.5)

    def test_from_name(self):
        for name, alpha in KERNEL_ALPHAS.items():
            assert Profile.from_name(name).alpha == alpha

    def test_from_name_unknown(self):
        with pytest.raises(ValueError, match="unknown kernel"):
            Profile.from_name("gaussian")

    def test_name_roundtrip(self):
        assert Profile(2).name == "biweight"
        assert Profile(4).name == "quadweight"
