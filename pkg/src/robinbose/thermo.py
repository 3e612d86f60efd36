"""Grand-canonical scalar thermodynamics at finite L and in the bulk limit."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq

from robinbose.quadrature import integrate
from robinbose.spectral import (
    BoxGeometry,
    ModeSet,
    RobinSpectrum1D,
    modes_within,
    occupation_budget,
)

log = logging.getLogger(__name__)

MODE_TOL = 1e-14
DENSITY_RTOL = 1e-10


class ThermoError(RuntimeError):
    """The density equation could not be solved in floating point."""


def bose_occupation(E, beta: float, mu: float):
    """1/(exp(beta(E - mu)) - 1), via expm1 so small gaps keep full precision."""
    x = beta * (np.asarray(E, dtype=float) - mu)
    if np.any(x <= 0):
        raise ValueError("occupation undefined for E <= mu")
    with np.errstate(over="ignore"):
        out = 1.0 / np.expm1(x)
    return float(out) if np.ndim(out) == 0 else out


def _occupations(excitations: np.ndarray, beta: float, gap: float) -> np.ndarray:
    with np.errstate(over="ignore"):
        return 1.0 / np.expm1(beta * (excitations + gap))


def fsum(values) -> float:
    return math.fsum(np.asarray(values, dtype=float).ravel().tolist())


# -- bulk (thermodynamic-limit) densities -----------------------------------

def _bulk_series(beta: float, mu: float, nu: int, rtol: float = 1e-16) -> float:
    x = math.exp(beta * mu)
    terms = []
    n, xn = 1, x
    while True:
        terms.append(xn * n ** (-0.5 * nu))
        total = math.fsum(terms)
        tail = x * xn * (n + 1) ** (-0.5 * nu) / (1.0 - x)
        if tail < rtol * total or n > 10 ** 6:
            break
        n += 1
        xn *= x
    return (4.0 * math.pi * beta) ** (-0.5 * nu) * total


def _bulk_integral(beta: float, mu: float, nu: int, rtol: float = 1e-13) -> float:
    # radial reduction of pi^-nu * int_{R_+^nu} dk / (exp(beta(k^2 - mu)) - 1)
    pref = math.pi ** (-0.5 * nu) / (2.0 ** (nu - 1) * math.gamma(0.5 * nu))
    r_max = math.sqrt(80.0 / beta)
    scale = (4.0 * math.pi * beta) ** (-0.5 * nu) * math.exp(beta * mu)

    def f(r):
        return r ** (nu - 1) / np.expm1(beta * (r * r - mu))

    return pref * float(integrate(f, 0.0, r_max, tol=rtol * scale / pref, n_panels=4))


def bulk_density(beta: float, mu: float, nu: int, method: str = "auto") -> float:
    """pi^-nu * int_{R_+^nu} dk (exp(beta(k^2 - mu)) - 1)^-1 for mu < 0.

    Equal to the heat-kernel series (4 pi beta)^(-nu/2) sum_n exp(n beta mu) n^(-nu/2).
    ``method`` is "series", "integral" or "auto" (series when exp(beta mu)
    is small enough for fast geometric convergence).
    """
    if not mu < 0:
        raise ValueError("bulk density needs mu < 0")
    if beta <= 0:
        raise ValueError("beta must be positive")
    if method == "auto":
        method = "series" if beta * mu < -0.25 else "integral"
    if method == "series":
        return _bulk_series(beta, mu, nu)
    if method == "integral":
        return _bulk_integral(beta, mu, nu)
    raise ValueError(f"unknown method {method!r}")


def critical_density(beta: float, sigma: float, nu: int, method: str = "auto") -> float:
    """rho_c(beta): the bulk density at mu = -nu sigma^2."""
    if not sigma < 0:
        raise ValueError("attractive boundary required (sigma < 0)")
    return bulk_density(beta, -nu * sigma * sigma, nu, method)


def mu_asymptotic(L: float, beta: float, rho: float, rho_c: float, nu: int,
                  sigma: float) -> float:
    """Leading large-L chemical potential above criticality."""
    if not rho > rho_c:
        raise ValueError("asymptotics only hold for rho > rho_c")
    return -nu * sigma * sigma - 2.0 ** nu / (beta * (rho - rho_c) * L ** nu)


@dataclass(frozen=True)
class LimitState:
    """Thermodynamic-limit scalars: mu_bar(beta, rho), rho_c and rho_0."""

    beta: float
    rho: float
    sigma: float
    nu: int
    mu_bar: float
    rho_c: float
    rho_0: float

    @property
    def condensed(self) -> bool:
        return self.rho_0 > 0


def limit_state(beta: float, rho: float, sigma: float, nu: int) -> LimitState:
    """Solve the bulk density equation; mu_bar sticks at -nu sigma^2 above rho_c."""
    if not rho > 0:
        raise ValueError("rho must be positive")
    rho_c = critical_density(beta, sigma, nu)
    top = -nu * sigma * sigma
    if rho >= rho_c:
        return LimitState(beta, rho, sigma, nu, top, rho_c, rho - rho_c)

    # density is increasing in mu; parameterise the distance below the top
    def F(u):
        return bulk_density(beta, top - math.exp(u), nu) - rho

    hi = math.log(10.0 / beta)
    while F(hi) > 0:
        hi += math.log(10.0)
        if hi > 700:
            raise ThermoError("bulk chemical potential escapes numeric range")
    lo = hi - 1.0
    while F(lo) < 0:
        lo -= 2.0
        if lo < -700:
            raise ThermoError("bulk chemical potential escapes numeric range")
    u = brentq(F, lo, hi, xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=500)
    return LimitState(beta, rho, sigma, nu, top - math.exp(u), rho_c, 0.0)


# -- finite volume ----------------------------------------------------------

@dataclass(frozen=True)
class ThermoState:
    """Solved finite-L grand-canonical state.

    ``gap`` is nu*eps_L(0) - mu_bar, kept separately because it can be far
    smaller than the float spacing around mu_bar.  ``rho_0`` is the limit-law
    excess max(0, rho - rho_c); ``rho_0_finite`` the density held by the 2^nu
    near-ground modes at this L.
    """

    geometry: BoxGeometry
    beta: float
    rho: float
    mu_bar: float
    gap: float
    rho_c: float
    rho_0: float
    rho_0_finite: float
    residual: float
    modes: ModeSet = field(repr=False, compare=False)

    @property
    def nu(self) -> int:
        return self.geometry.nu

    @property
    def volume(self) -> float:
        return self.geometry.volume

    def occupations(self, modes: ModeSet | None = None) -> np.ndarray:
        modes = self.modes if modes is None else modes
        return _occupations(modes.excitations, self.beta, self.gap)


def density_from_modes(modes: ModeSet, beta: float, gap: float, volume: float) -> float:
    return fsum(_occupations(modes.excitations, beta, gap)) / volume


def _near_ground_density(spec: RobinSpectrum1D, nu: int, beta: float, gap: float,
                         volume: float) -> float:
    e1 = spec.excitations[1]
    terms = [math.comb(nu, j) / math.expm1(beta * (j * e1 + gap)) for j in range(nu + 1)]
    return math.fsum(terms) / volume


def solve_mu(spec: RobinSpectrum1D, nu: int | None, beta: float, rho: float,
             tol: float = MODE_TOL) -> ThermoState:
    """Finite-L chemical potential solving rho = <N_L>/V.

    The density is strictly increasing in mu, so the root is unique; it is
    bracketed in log(gap) and polished with Brent's method.
    """
    nu = spec.geometry.nu if nu is None else nu
    if not rho > 0:
        raise ValueError("rho must be positive")
    if not beta > 0:
        raise ValueError("beta must be positive")
    geom = spec.geometry.with_nu(nu)
    V = geom.volume
    modes = modes_within(spec, nu, occupation_budget(beta, tol) / beta)
    if not modes.complete:
        log.warning("truncated system: k_max=%d below the occupation cutoff %g",
                    spec.k_max, tol)

    def F(lg):
        return density_from_modes(modes, beta, math.exp(lg), V) - rho

    lo = -math.log(beta * (2.0 * rho * V + 1.0))
    hi = math.log(10.0 / beta)
    while F(hi) > 0:
        hi += math.log(10.0)
        if hi > 690:
            raise ThermoError("chemical potential escapes numeric range")
    if lo >= hi:
        lo = hi - 1.0
    while F(lo) < 0:
        lo -= 1.0
        if lo < -740:
            raise ThermoError("chemical potential escapes numeric range")
    lg = brentq(F, lo, hi, xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=500)
    gap = math.exp(lg)
    resid = abs(F(lg))
    if resid > DENSITY_RTOL * rho:
        raise ThermoError(f"density residual {resid:g} above {DENSITY_RTOL:g}*rho")

    rho_c = critical_density(beta, geom.sigma, nu)
    mu_bar = nu * spec.eigenvalues[0] - gap
    return ThermoState(
        geometry=geom,
        beta=beta,
        rho=rho,
        mu_bar=mu_bar,
        gap=gap,
        rho_c=rho_c,
        rho_0=max(0.0, rho - rho_c),
        rho_0_finite=_near_ground_density(spec, nu, beta, gap, V),
        residual=resid,
        modes=modes,
    )


def condensate_density_finite(spec: RobinSpectrum1D, nu: int | None,
                              thermo: ThermoState) -> float:
    """(1/L^nu) * sum of occupations over the 2^nu modes with every k_i in {0, 1}."""
    nu = thermo.nu if nu is None else nu
    return _near_ground_density(spec, nu, thermo.beta, thermo.gap, spec.geometry.L ** nu)
