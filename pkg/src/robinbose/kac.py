"""Kac measure: finite-L characteristic functions, canonical recursion, limit law.

The finite-volume particle-density distribution is reached two ways: as the
Fourier inverse of the grand-canonical quasi-free product, and directly as
the canonical mixture weights exp(n beta mu) Z_n / Xi.  The limit law is a
point mass at rho below criticality and a gamma law of shape 2^nu, shifted
by rho_c, above it.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.special import erfc, gammaln, logsumexp

from robinbose.quadrature import integrate
from robinbose.spectral import ModeSet, RobinSpectrum1D, all_modes, modes_within
from robinbose.thermo import ThermoState

CHARFUN_TAIL_TOL = 1e-10
CDF_TAIL_TOL = 1e-12
TAPER_SIGMAS = 6.0


@dataclass(frozen=True)
class KacLimitLaw:
    """Limiting Kac law for (nu, rho, rho_c)."""

    nu: int
    rho: float
    rho_c: float

    def __post_init__(self):
        if not self.rho > 0 or not self.rho_c > 0:
            raise ValueError("rho and rho_c must be positive")

    @property
    def is_point_mass(self) -> bool:
        return self.rho <= self.rho_c

    @property
    def shape(self) -> int:
        return 2 ** self.nu

    @property
    def scale(self) -> float:
        return (self.rho - self.rho_c) / self.shape

    @property
    def mean(self) -> float:
        return self.rho

    @property
    def variance(self) -> float:
        if self.is_point_mass:
            return 0.0
        return (self.rho - self.rho_c) ** 2 / self.shape

    def density(self, xi):
        return kac_density_limit(self, xi)

    def charfun(self, t):
        return charfun_limit(t, self.rho, self.rho_c, self.nu)


@dataclass(frozen=True)
class CharFunSample:
    """Characteristic function of N_L/V sampled on a uniform symmetric grid.

    ``L`` is None for the thermodynamic-limit law.
    """

    t: np.ndarray
    values: np.ndarray
    L: float | None
    beta: float | None
    rho: float


# -- limit law ---------------------------------------------------------------

def charfun_limit(t, rho: float, rho_c: float, nu: int):
    """exp(it rho) below rho_c; (1 - i t 2^-nu (rho - rho_c))^(-2^nu) exp(i t rho_c) above."""
    t = np.asarray(t, dtype=float)
    if rho <= rho_c:
        out = np.exp(1j * t * rho)
    else:
        m = 2 ** nu
        out = (1.0 - 1j * t * (rho - rho_c) / m) ** (-m) * np.exp(1j * t * rho_c)
    return complex(out) if out.ndim == 0 else out


def kac_density_limit(law: KacLimitLaw, xi):
    """Shifted gamma density of the condensed phase; zero for xi <= rho_c."""
    if law.is_point_mass:
        raise ValueError("rho <= rho_c: the limit law is the point mass at rho")
    xi = np.asarray(xi, dtype=float)
    m = law.shape
    width = law.rho - law.rho_c
    u = np.where(xi > law.rho_c, m * (xi - law.rho_c) / width, 0.0)
    with np.errstate(divide="ignore"):
        logp = (math.log(m / width) - gammaln(m) + (m - 1) * np.log(u) - u)
    out = np.where(xi > law.rho_c, np.exp(logp), 0.0)
    return float(out) if out.ndim == 0 else out


def limit_moment(law: KacLimitLaw, order: int, tol: float = 1e-13) -> float:
    """Raw moment of the limit law by quadrature (closed form for the point mass)."""
    if law.is_point_mass:
        return law.rho ** order
    hi = law.rho_c + 80.0 * law.scale * law.shape
    return float(integrate(lambda x: x ** order * kac_density_limit(law, x),
                           law.rho_c, hi, tol=tol, n_panels=32))


# -- finite-volume characteristic function ----------------------------------

def _heat_trace_tail(spec: RobinSpectrum1D, beta: float, weight: float) -> float:
    """Bound on sum_{k > k_max} exp(-weight*beta*(eps_k - eps_0))."""
    L, K = spec.geometry.L, spec.k_max
    c = weight * beta * (math.pi / L) ** 2
    shift = weight * beta * (spec.geometry.s ** 2 - spec.ground_offsets[0])
    first = math.exp(-c * K * K)
    integral = 0.5 * math.sqrt(math.pi / c) * erfc(K * math.sqrt(c))
    return math.exp(-shift) * (first + integral)


def _charfun_modes(spec, nu, thermo, tmax_scaled, tail_tol):
    """Mode set whose omitted log-terms sum below ``tail_tol`` for |t/V| <= tmax_scaled."""
    beta, gap = thermo.beta, thermo.gap
    exc = spec.excitations
    s_half = math.fsum(np.exp(-0.5 * beta * exc).tolist()) + _heat_trace_tail(spec, beta, 0.5)
    s_one = math.fsum(np.exp(-beta * exc).tolist()) + _heat_trace_tail(spec, beta, 1.0)
    beyond = nu * s_one ** (nu - 1) * _heat_trace_tail(spec, beta, 1.0) * math.exp(-beta * gap)
    chernoff = math.exp(-0.5 * beta * gap) * s_half ** nu
    tau = max(tmax_scaled, 1e-300)
    # |sum of omitted terms| <= tau * (exp(-X/2) * chernoff + beyond) / (1 - exp(-X))
    need = tail_tol / tau - 2.0 * beyond
    if need <= 0:
        raise ValueError("spectrum cutoff k_max too small for the charfun tail tolerance")
    X = max(2.0 * math.log(2.0 * chernoff / need), 1.0)
    budget = X / beta - gap
    return modes_within(spec, nu, budget)


def _log_terms(x: np.ndarray, tau: float) -> np.ndarray:
    return np.log(-np.expm1(-x)) - np.log(-np.expm1(-x + 1j * tau))


def charfun_finite(spec: RobinSpectrum1D, nu: int | None, thermo: ThermoState, t,
                   tail_tol: float | None = CHARFUN_TAIL_TOL):
    """<exp(i t N_L / V)> in the grand-canonical state as a product over modes.

    Evaluated as exp(sum of complex logs).  With ``tail_tol`` set, the mode
    set is chosen from an analytic bound so the truncation error stays below
    it; ``tail_tol=None`` takes the spectrum's full truncated set
    {0..k_max}^nu as the system.
    """
    nu = thermo.nu if nu is None else nu
    t = np.asarray(t, dtype=float)
    flat = np.atleast_1d(t).ravel()
    V = spec.geometry.L ** nu
    if tail_tol is None:
        modes = all_modes(spec, nu)
    else:
        modes = _charfun_modes(spec, nu, thermo, float(np.max(np.abs(flat), initial=0.0)) / V,
                               tail_tol)
    x = thermo.beta * (modes.excitations + thermo.gap)
    out = np.empty(flat.size, dtype=complex)
    for i, ti in enumerate(flat):
        if ti == 0.0:
            out[i] = 1.0
            continue
        terms = _log_terms(x, ti / V)
        out[i] = np.exp(complex(math.fsum(terms.real.tolist()), math.fsum(terms.imag.tolist())))
    return complex(out[0]) if t.ndim == 0 else out.reshape(t.shape)


def sample_charfun(spec, nu, thermo, t_max: float, n: int = 4096) -> CharFunSample:
    t = symmetric_grid(t_max, n)
    return CharFunSample(t, charfun_finite(spec, nu, thermo, t), spec.geometry.L,
                         thermo.beta, thermo.rho)


def sample_charfun_limit(rho: float, rho_c: float, nu: int, t_max: float,
                         n: int = 4096) -> CharFunSample:
    t = symmetric_grid(t_max, n)
    return CharFunSample(t, charfun_limit(t, rho, rho_c, nu), None, None, rho)


def symmetric_grid(t_max: float, n: int) -> np.ndarray:
    """n uniform points symmetric about 0 spanning [-t_max, t_max]."""
    return np.linspace(-t_max, t_max, n)


# -- Fourier inversion -------------------------------------------------------

def taper_width(sample: CharFunSample) -> float:
    """Standard deviation (in xi) of the Gaussian the taper convolves with."""
    return TAPER_SIGMAS / float(np.max(np.abs(sample.t)))


def invert_charfun(sample: CharFunSample, xi_grid, chunk: int = 512) -> np.ndarray:
    """Density estimate (1/2pi) int phi(t) w(t) exp(-i t xi) dt on ``xi_grid``.

    The taper w is Gaussian with the grid edge at six standard deviations,
    so the result is the true law convolved with a normal of standard
    deviation ``taper_width(sample)``.  Trapezoidal weights on the t-grid.
    """
    t = np.asarray(sample.t, dtype=float)
    xi = np.asarray(xi_grid, dtype=float)
    if t.ndim != 1 or t.size < 3:
        raise ValueError("t grid must be one-dimensional with at least three points")
    dt = np.diff(t)
    if not np.allclose(dt, dt[0], rtol=1e-9, atol=0) or not math.isclose(
            t[0], -t[-1], rel_tol=1e-12):
        raise ValueError("t grid must be uniform and symmetric about 0")
    period = 2.0 * math.pi / dt[0]
    if xi.size and np.ptp(xi) >= period:
        raise ValueError(f"xi grid spans {np.ptp(xi):g}, beyond the alias period {period:g}")
    t_edge = t[-1]
    w = np.exp(-0.5 * (TAPER_SIGMAS * t / t_edge) ** 2) * dt[0]
    w[0] *= 0.5
    w[-1] *= 0.5
    weighted = np.asarray(sample.values) * w
    out = np.empty(xi.size)
    for start in range(0, xi.size, chunk):
        block = xi[start:start + chunk]
        phase = np.exp(-1j * np.outer(block, t))
        out[start:start + chunk] = np.sum(phase * weighted[None, :], axis=1).real / (2.0 * math.pi)
    low = out.min(initial=0.0)
    if low < -1e-6:
        warnings.warn(f"inverted density dips to {low:.3g}; check grid resolution",
                      RuntimeWarning, stacklevel=2)
    return np.where(out < 0, 0.0, out)


def gaussian_smoothed_masses(positions, masses, xi_grid, width: float) -> np.ndarray:
    """Sum of point masses convolved with a normal of standard deviation ``width``."""
    xi = np.asarray(xi_grid, dtype=float)
    z = (xi[:, None] - np.asarray(positions)[None, :]) / width
    return np.sum(np.exp(-0.5 * z * z) * np.asarray(masses)[None, :], axis=1) / (
        width * math.sqrt(2.0 * math.pi))


# -- canonical recursion -------------------------------------------------------

def single_mode_weights(spec: RobinSpectrum1D, nu: int | None, beta: float, j_max: int,
                        shift: float = 0.0, modes: ModeSet | None = None) -> np.ndarray:
    """b_j = sum_k exp(-j beta (E_k - shift)), j = 1..j_max (index 0 holds j = 1).

    ``modes`` defaults to the full truncated set {0..k_max}^nu.  A ``shift``
    equal to the ground energy keeps the weights O(1) for attractive walls.
    """
    nu = spec.geometry.nu if nu is None else nu
    if j_max < 1:
        raise ValueError("j_max must be at least 1")
    modes = all_modes(spec, nu) if modes is None else modes
    e = modes.energies - shift
    j = np.arange(1, j_max + 1)
    return np.array([math.fsum(row) for row in np.exp(-beta * np.outer(j, e)).tolist()])


def log_canonical_partitions(b, n_max: int) -> np.ndarray:
    """log Z_n, n = 0..n_max, from Z_n = (1/n) sum_{j=1}^n b_j Z_{n-j}, Z_0 = 1."""
    b = np.asarray(b, dtype=float)
    if n_max > b.size:
        raise ValueError("need b_j for j up to n_max")
    if np.any(b <= 0):
        raise ValueError("cycle weights must be positive")
    logb = np.log(b)
    logz = np.empty(n_max + 1)
    logz[0] = 0.0
    for n in range(1, n_max + 1):
        # terms j = 1..n pair b_j with Z_{n-j}
        logz[n] = logsumexp(logb[:n] + logz[n - 1::-1]) - math.log(n)
    return logz


def canonical_partition(b, n: int) -> float:
    """Z_n of the boson cycle recursion."""
    if n < 0:
        raise ValueError("n must be nonnegative")
    if n == 0:
        return 1.0
    return float(math.exp(log_canonical_partitions(b, n)[-1]))


@dataclass(frozen=True)
class KacMasses:
    """Discrete finite-L Kac measure: probability ``p[n]`` at xi = n / V."""

    xi: np.ndarray
    p: np.ndarray
    tail: float
    log_xi: float



def kac_masses_finite(spec: RobinSpectrum1D, nu: int | None, thermo: ThermoState,
                      n_cutoff: int) -> KacMasses:
    """exp(n beta mu) Z_n / Xi for n = 0..n_cutoff over the truncated mode set.

    ``Xi`` is the exact grand-canonical product, so ``tail`` = 1 - sum p
    measures the mass lost beyond the particle cutoff.
    """
    nu = thermo.nu if nu is None else nu
    modes = all_modes(spec, nu)
    beta, gap = thermo.beta, thermo.gap
    e0 = nu * spec.eigenvalues[0]
    b = single_mode_weights(spec, nu, beta, max(n_cutoff, 1), shift=e0, modes=modes)
    logz = log_canonical_partitions(b, n_cutoff)
    x = beta * (modes.excitations + gap)
    log_xi = -math.fsum(np.log(-np.expm1(-x)).tolist())
    n = np.arange(n_cutoff + 1)
    p = np.exp(logz - n * beta * gap - log_xi)
    V = spec.geometry.L ** nu
    return KacMasses(n / V, p, max(0.0, 1.0 - math.fsum(p.tolist())), log_xi)


def kac_cdf_finite(spec: RobinSpectrum1D, nu: int | None, thermo: ThermoState, xi,
                   n_cutoff: int = 1000) -> np.ndarray | float:
    """K_{L,beta,mu}(xi) = sum_{n <= [V xi]} exp(n beta mu) Z_n / Xi.

    Raises ValueError when some requested xi reaches beyond the particle
    cutoff while the neglected tail mass exceeds 1e-12.
    """
    nu = thermo.nu if nu is None else nu
    masses = kac_masses_finite(spec, nu, thermo, n_cutoff)
    V = spec.geometry.L ** nu
    xi = np.asarray(xi, dtype=float)
    n = np.floor(xi * V * (1 + 1e-15)).astype(np.int64)
    if np.any(n > n_cutoff) and masses.tail > CDF_TAIL_TOL:
        raise ValueError(f"particle cutoff {n_cutoff} leaves tail mass {masses.tail:.3g}")
    csum = np.cumsum(masses.p)
    out = np.where(n < 0, 0.0, csum[np.clip(n, 0, n_cutoff)])
    return float(out) if out.ndim == 0 else out


def mixture_charfun(masses: KacMasses, t) -> np.ndarray:
    """sum_n p_n exp(i t n / V)."""
    t = np.atleast_1d(np.asarray(t, dtype=float))
    return np.sum(np.exp(1j * np.outer(t, masses.xi)) * masses.p[None, :], axis=1)
