import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy.integrate import quad

from robinbose.testfunctions import (
    AxisProfile,
    ShiftSpec,
    TestFunction,
    bump,
    check_support,
    exponential_moment,
    inner,
    l2_norm_sq,
    random_bump,
    shift,
)


def _quad_c(fun, a, b):
    re, _ = quad(lambda x: fun(x).real, a, b, epsabs=1e-14, epsrel=1e-13, limit=200)
    im, _ = quad(lambda x: fun(x).imag, a, b, epsabs=1e-14, epsrel=1e-13, limit=200)
    return complex(re, im)


class TestProfiles:
    def test_support_and_vanishing(self):
        p = AxisProfile(0.3, 0.5, (1.0, 2.0))
        assert p.support == (-0.2, 0.8)
        assert np.all(p(np.array([-0.2, 0.8, -1.0, 2.0])) == 0)
        assert p(0.3) == pytest.approx(math.exp(-1.0))

    def test_rejects_bad_width(self):
        with pytest.raises(ValueError):
            AxisProfile(0.0, 0.0)

    def test_needs_terms(self):
        with pytest.raises(ValueError):
            TestFunction(())

    def test_scalar_and_array_evaluation(self):
        f = bump()
        assert isinstance(f(0.0), complex)
        assert f(np.linspace(-1, 1, 7)).shape == (7,)
        g = bump(nu=2)
        assert g(np.array([0.0, 0.0])) == pytest.approx(math.exp(-2.0))
        assert g(np.zeros((4, 2))).shape == (4,)


class TestIntegrals:
    def test_norm_against_quad(self):
        f = bump(half_width=0.7, center=0.2, coeffs=(1.0, 0.5j, -0.3))
        ref = _quad_c(lambda x: abs(f(x)) ** 2 + 0j, -0.5, 0.9).real
        assert l2_norm_sq(f) == pytest.approx(ref, rel=1e-12)

    def test_inner_conjugate_linear_first(self):
        f, g = bump(), bump(center=0.3, half_width=0.8)
        assert inner(1j * f, g) == pytest.approx(-1j * inner(f, g), abs=1e-15)
        assert inner(f, 1j * g) == pytest.approx(1j * inner(f, g), abs=1e-15)
        assert inner(f, g) == pytest.approx(np.conj(inner(g, f)), abs=1e-15)

    @given(st.integers(0, 2 ** 32 - 1))
    def test_sum_is_bilinear(self, seed):
        rng = np.random.default_rng(seed)
        f, g, h = (random_bump(rng) for _ in range(3))
        lhs = inner(f + g, h)
        assert lhs == pytest.approx(inner(f, h) + inner(g, h), abs=1e-12 * (1 + abs(lhs)))

    def test_difference_vanishes(self, rng):
        f = random_bump(rng)
        assert l2_norm_sq(f - f) == pytest.approx(0.0, abs=1e-15)

    def test_exponential_moment(self):
        f = bump(half_width=0.6, coeffs=(1.0, 1.0))
        ref = _quad_c(lambda x: f(x) * math.exp(1.5 * x), -0.6, 0.6)
        assert exponential_moment(f, -1.5, (1,)) == pytest.approx(ref, rel=1e-12)
        mirror = _quad_c(lambda x: f(x) * math.exp(-1.5 * x), -0.6, 0.6)
        assert exponential_moment(f, -1.5, (-1,)) == pytest.approx(mirror, rel=1e-12)

    def test_moment_separable_2d(self):
        f = bump(nu=2, half_width=0.5)
        one = exponential_moment(bump(half_width=0.5), -1.0, (1,))
        assert exponential_moment(f, -1.0, (1, -1)) == pytest.approx(one * one,
                                                                      rel=1e-12)


class TestShift:
    def test_offsets(self):
        s = ShiftSpec(20.0, -1.0, (1, -1), (1.0, 2.0))
        want = [10 - math.log(20) / 2, -(10 - math.log(20) / 4)]
        assert np.allclose(s.offsets, want, rtol=1e-15)
        assert s.at(40.0).L == 40.0

    @pytest.mark.parametrize("kw", [dict(signs=(2,), a=(1.0,)), dict(signs=(1,), a=(0.0,)),
                                    dict(signs=(1, 1), a=(1.0,))])
    def test_shiftspec_validation(self, kw):
        with pytest.raises(ValueError):
            ShiftSpec(20.0, -1.0, **kw)

    def test_repulsive_rejected(self):
        with pytest.raises(ValueError, match="attractive"):
            ShiftSpec(20.0, 1.0, (1,), (1.0,))

    def test_round_trip(self):
        f = bump(half_width=0.8, coeffs=(1.0, 0.4j))
        g = shift(f, 30.0, 1, 1.0, -1.0)
        assert g.shift is not None
        back = g.unshifted()
        x = np.linspace(-1, 1, 31)
        assert np.allclose(back(x), f(x), atol=1e-12)
        off = g.shift.offsets[0]
        assert np.allclose(g(x + off), f(x), atol=1e-12)

    def test_sign_mirrors(self):
        f = bump(half_width=0.5)
        plus = shift(f, 30.0, 1, 2.0, -1.0).support_box()[0]
        minus = shift(f, 30.0, -1, 2.0, -1.0).support_box()[0]
        assert plus[0] == pytest.approx(-minus[1]) and plus[1] == pytest.approx(-minus[0])

    def test_radius_admissibility(self):
        with pytest.raises(ValueError, match="support radius"):
            shift(bump(), 5.0, 1, 1.0, -1.0)

    def test_box_admissibility(self):
        # radius fine but a large scale pushes the support through the wall
        with pytest.raises(ValueError, match="violates"):
            shift(bump(half_width=1.2), 20.0, 1, 100.0, -1.0)

    def test_no_double_shift(self):
        g = shift(bump(), 30.0, 1, 1.0, -1.0)
        with pytest.raises(ValueError, match="already"):
            shift(g, 30.0, 1, 1.0, -1.0)

    def test_combination_keeps_shift(self):
        f = shift(bump(), 30.0, 1, 1.0, -1.0)
        g = shift(bump(half_width=0.5), 30.0, 1, 1.0, -1.0)
        assert (f - g).shift == f.shift
        with pytest.raises(ValueError):
            f + bump()

    def test_check_support(self):
        check_support(bump(), 2.5)
        with pytest.raises(ValueError):
            check_support(bump(), 2.0)
