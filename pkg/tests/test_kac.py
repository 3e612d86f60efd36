import itertools
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy import stats
from scipy.integrate import quad

from robinbose.kac import (
    KacLimitLaw,
    CharFunSample,
    canonical_partition,
    charfun_finite,
    charfun_limit,
    invert_charfun,
    kac_cdf_finite,
    kac_density_limit,
    kac_masses_finite,
    limit_moment,
    log_canonical_partitions,
    mixture_charfun,
    sample_charfun,
    sample_charfun_limit,
    single_mode_weights,
    symmetric_grid,
    taper_width,
    gaussian_smoothed_masses,
)
from robinbose.spectral import BoxGeometry, all_modes, build_spectrum_1d
from robinbose.thermo import solve_mu


@pytest.fixture(scope="module")
def toy():
    spec = build_spectrum_1d(BoxGeometry(1, 6.0, -1.0), 8)
    th = solve_mu(spec, 1, 1.0, 1.0 / 3.0, tol=1e-300)
    return spec, th


class TestLimitLaw:
    def test_point_mass_symbolic(self):
        law = KacLimitLaw(1, 0.1, 0.2)
        assert law.is_point_mass
        with pytest.raises(ValueError):
            law.density(0.1)

    def test_zero_below_rho_c(self):
        law = KacLimitLaw(1, 1.0, 0.2)
        assert kac_density_limit(law, np.array([-1.0, 0.0, 0.2])).tolist() == [0, 0, 0]

    @pytest.mark.parametrize("nu", [1, 2, 3])
    def test_matches_scipy_gamma(self, nu):
        law = KacLimitLaw(nu, 1.3, 0.3)
        xi = np.linspace(0.31, 4.0, 50)
        ref = stats.gamma(a=2 ** nu, loc=0.3, scale=1.0 / 2 ** nu).pdf(xi)
        assert np.allclose(law.density(xi), ref, rtol=1e-12, atol=1e-300)

    @pytest.mark.parametrize("nu", [1, 2, 3])
    def test_moments(self, nu):
        law = KacLimitLaw(nu, 0.8, 0.3)
        assert limit_moment(law, 0) == pytest.approx(1.0, abs=1e-8)
        assert limit_moment(law, 1) == pytest.approx(0.8, abs=1e-6)
        var = limit_moment(law, 2) - limit_moment(law, 1) ** 2
        assert var == pytest.approx(0.25 / 2 ** nu, abs=1e-6)
        assert law.variance == pytest.approx(0.25 / 2 ** nu, rel=1e-14)

    def test_charfun_unit_modulus_below(self):
        t = np.linspace(-50, 50, 101)
        assert np.allclose(np.abs(charfun_limit(t, 0.1, 0.2, 1)), 1.0)
        assert charfun_limit(0.0, 1.0, 0.2, 2) == 1

    def test_charfun_decay_rate(self):
        t = np.array([1e3, 1e4])
        v = np.abs(charfun_limit(t, 1.2, 0.2, 1))
        assert math.log(v[0] / v[1]) / math.log(10) == pytest.approx(2.0, rel=1e-3)

    def test_charfun_is_fourier_of_density(self):
        law = KacLimitLaw(1, 1.0, 0.2)
        for t in [0.5, 3.0]:
            re, _ = quad(lambda x: math.cos(t * x) * law.density(x), 0.2, 40, limit=400)
            im, _ = quad(lambda x: math.sin(t * x) * law.density(x), 0.2, 40, limit=400)
            assert complex(re, im) == pytest.approx(law.charfun(t), abs=1e-9)


class TestCharfunFinite:
    def test_zero(self, state_factory):
        spec, th = state_factory(40.0, 0.5)
        assert charfun_finite(spec, 1, th, 0.0) == 1.0

    @given(st.floats(0.1, 30.0))
    def test_conjugate_symmetry(self, t):
        from robinbose.spectral import spectrum_for
        spec = spectrum_for(BoxGeometry(1, 20.0, -1.0), 1.0)
        th = solve_mu(spec, 1, 1.0, 0.5)
        a, b = charfun_finite(spec, 1, th, np.array([t, -t]))
        assert a == pytest.approx(np.conj(b), abs=1e-14)

    def test_mean_from_derivative(self, state_factory):
        spec, th = state_factory(40.0, 0.5)
        h = 1e-4
        d = (charfun_finite(spec, 1, th, h) - charfun_finite(spec, 1, th, -h)) / (2 * h)
        assert d == pytest.approx(0.5j, abs=1e-6)

    def test_tail_bound_against_full_set(self):
        spec = build_spectrum_1d(BoxGeometry(1, 20.0, -1.0), 400)
        th = solve_mu(spec, 1, 1.0, 0.5)
        t = np.linspace(-30, 30, 13)
        a = charfun_finite(spec, 1, th, t)
        b = charfun_finite(spec, 1, th, t, tail_tol=None)
        assert np.max(np.abs(a - b)) < 1e-10

    def test_direct_product_oracle(self, toy):
        spec, th = toy
        z = np.exp(-th.beta * (all_modes(spec, 1).excitations + th.gap))
        for t in [0.7, -3.0, 11.0]:
            w = np.exp(1j * t / 6.0)
            want = np.prod((1 - z) / (1 - z * w))
            assert charfun_finite(spec, 1, th, t, tail_tol=None) == pytest.approx(want, rel=1e-12)

    def test_convergence_to_limit(self, state_factory, rho_c):
        t = np.linspace(-20, 20, 161)
        dists = []
        for L in [20.0, 40.0, 80.0]:
            spec, th = state_factory(L, rho_c + 0.3)
            diff = charfun_finite(spec, 1, th, t) - charfun_limit(t, rho_c + 0.3, rho_c, 1)
            dists.append(np.max(np.abs(diff)))
        assert dists[0] > dists[1] > dists[2]


class TestInversion:
    def test_limit_gamma(self, rho_c):
        rho = rho_c + 1.0
        sample = sample_charfun_limit(rho, rho_c, 1, 800.0, 4096)
        xi = np.linspace(rho_c - 1.0, rho_c + 10.0, 4096)
        est = invert_charfun(sample, xi)
        err = np.max(np.abs(est - KacLimitLaw(1, rho, rho_c).density(xi)))
        assert err < 2e-2
        dx = xi[1] - xi[0]
        assert np.sum(est) * dx == pytest.approx(1.0, abs=1e-3)

    def test_point_mass(self):
        sample = sample_charfun_limit(0.1, 0.2, 1, 400.0, 2049)
        xi = np.linspace(-0.5, 0.7, 3001)
        est = invert_charfun(sample, xi)
        dx = xi[1] - xi[0]
        assert np.sum(est) * dx == pytest.approx(1.0, abs=1e-3)
        assert xi[np.argmax(est)] == pytest.approx(0.1, abs=2 * dx)
        ref = gaussian_smoothed_masses([0.1], [1.0], xi, taper_width(sample))
        assert np.max(np.abs(est - ref)) < 1e-6 * ref.max()

    def test_finite_mean(self, state_factory):
        spec, th = state_factory(40.0, 0.5)
        sample = sample_charfun(spec, 1, th, 400.0, 2049)
        xi = np.linspace(-1.0, 3.0, 4001)
        est = invert_charfun(sample, xi)
        dx = xi[1] - xi[0]
        assert np.sum(xi * est) * dx == pytest.approx(0.5, abs=1e-3)

    def test_variance_shrinks_below_rho_c(self, state_factory):
        variances = []
        for L in [20.0, 40.0, 80.0]:
            spec, th = state_factory(L, 0.1)
            sample = sample_charfun(spec, 1, th, 600.0, 2049)
            xi = np.linspace(-0.4, 0.8, 3001)
            est = invert_charfun(sample, xi)
            dx = xi[1] - xi[0]
            m = np.sum(xi * est) * dx
            variances.append(np.sum((xi - m) ** 2 * est) * dx - taper_width(sample) ** 2)
        assert variances[0] > variances[1] > variances[2] > 0

    def test_rejects_bad_grids(self):
        t = np.linspace(0, 10, 11)
        with pytest.raises(ValueError):
            invert_charfun(CharFunSample(t, np.ones(11), None, None, 1.0), [0.0])
        t = np.linspace(-10, 10, 11)
        with pytest.raises(ValueError, match="alias"):
            invert_charfun(CharFunSample(t, np.ones(11), None, None, 1.0), [0.0, 100.0])


class TestCanonical:
    def test_trivial(self):
        b = [0.3, 0.1, 0.05]
        assert canonical_partition(b, 0) == 1.0
        assert canonical_partition(b, 1) == pytest.approx(0.3)

    def test_single_mode(self):
        E, beta = 0.7, 1.3
        b = [math.exp(-j * beta * E) for j in range(1, 11)]
        for n in range(11):
            assert canonical_partition(b, n) == pytest.approx(math.exp(-n * beta * E), rel=1e-13)

    def test_three_mode_brute_force(self):
        energies = np.array([0.2, 0.5, 1.1])
        beta = 1.0
        b = [math.fsum(np.exp(-j * beta * energies)) for j in range(1, 8)]
        for n in range(8):
            brute = math.fsum(math.exp(-beta * float(np.dot(occ, energies)))
                              for occ in itertools.product(range(n + 1), repeat=3)
                              if sum(occ) == n)
            assert canonical_partition(b, n) == pytest.approx(brute, rel=1e-12)

    def test_weights(self, toy):
        spec, _ = toy
        b = single_mode_weights(spec, 1, 1.0, 3)
        want = [math.fsum(np.exp(-j * spec.eigenvalues)) for j in (1, 2, 3)]
        assert np.allclose(b, want, rtol=1e-13)
        pos = single_mode_weights(spec, 1, 1.0, 5, shift=spec.eigenvalues[0] - 1.0)
        assert np.all(np.diff(pos) < 0)

    def test_grand_canonical_product(self, toy):
        spec, th = toy
        masses = kac_masses_finite(spec, 1, th, 60)
        assert masses.tail < 1e-12
        assert math.fsum(masses.p.tolist()) == pytest.approx(1.0, rel=1e-10)

    def test_mixture_identity(self, toy):
        spec, th = toy
        masses = kac_masses_finite(spec, 1, th, 60)
        t = np.linspace(-25, 25, 20)
        gc = charfun_finite(spec, 1, th, t, tail_tol=None)
        assert np.max(np.abs(gc - mixture_charfun(masses, t))) < 1e-10


class TestKacCdf:
    def test_zero(self, toy):
        spec, th = toy
        masses = kac_masses_finite(spec, 1, th, 60)
        assert kac_cdf_finite(spec, 1, th, 0.0, 60) == pytest.approx(masses.p[0], rel=1e-14)
        assert masses.p[0] == pytest.approx(math.exp(-masses.log_xi), rel=1e-12)

    def test_step_and_monotone(self, toy):
        spec, th = toy
        V = 6.0
        xi = np.linspace(0, 8, 500)
        c = kac_cdf_finite(spec, 1, th, xi, 60)
        assert np.all(np.diff(c) >= 0)
        assert c[-1] == pytest.approx(1.0, abs=1e-12)
        left = kac_cdf_finite(spec, 1, th, 3 / V - 1e-9, 60)
        at = kac_cdf_finite(spec, 1, th, 3 / V, 60)
        assert at > left

    def test_cutoff_guard(self, toy):
        spec, th = toy
        with pytest.raises(ValueError):
            kac_cdf_finite(spec, 1, th, 5.0, 10)

    def test_smoothed_cdf_matches_inversion(self, toy):
        spec, th = toy
        masses = kac_masses_finite(spec, 1, th, 60)
        t = symmetric_grid(60.0, 2049)
        sample = CharFunSample(t, charfun_finite(spec, 1, th, t, tail_tol=None),
                               6.0, 1.0, th.rho)
        xi = np.linspace(-0.5, 2.5, 1201)
        est = invert_charfun(sample, xi)
        ref = gaussian_smoothed_masses(masses.xi, masses.p, xi, taper_width(sample))
        assert np.max(np.abs(est - ref)) < 2e-2
