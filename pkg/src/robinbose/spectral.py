"""One-dimensional attractive-Robin spectrum and its tensor extension.

The interval is [-L/2, L/2] with boundary condition d(phi)/dn + sigma*phi = 0,
sigma < 0.  Writing s = |sigma|, the secular equations are

    negative, even:  kappa * tanh(kappa L/2) = s,      eps = -kappa**2
    negative, odd:   kappa * coth(kappa L/2) = s,      eps = -kappa**2
    positive, even:  q * tan(q L/2) = -s,              eps = q**2
    positive, odd:   tan(q L/2) = q / s,               eps = q**2

The two negative eigenvalues sit exponentially close to -s**2.  To keep that
splitting resolvable for large L, they are solved in the offset variable
delta = kappa - s and the exact offsets eps + s**2 are stored alongside the
eigenvalues.
"""

from __future__ import annotations

import enum
import logging
import math
from dataclasses import dataclass, field
from typing import Iterator, Sequence

import numpy as np

log = logging.getLogger(__name__)

BISECTION_CAP = 2000


class SpectrumError(RuntimeError):
    """Secular-equation failure: no sign change in a bracket, or no convergence."""


class ModeKind(enum.Enum):
    NEGATIVE_EVEN = "negative-even"
    NEGATIVE_ODD = "negative-odd"
    POSITIVE_EVEN = "positive-even"
    POSITIVE_ODD = "positive-odd"


@dataclass(frozen=True)
class BoxGeometry:
    """Cube [-L/2, L/2]^nu with attractive boundary parameter sigma."""

    nu: int
    L: float
    sigma: float

    def __post_init__(self):
        if not isinstance(self.nu, (int, np.integer)) or self.nu < 1:
            raise ValueError(f"nu must be a positive integer, got {self.nu!r}")
        if not self.sigma < 0:
            raise ValueError("attractive boundary required (sigma < 0)")
        if not self.L > 0:
            raise ValueError(f"L must be positive, got {self.L!r}")
        if not self.L * abs(self.sigma) > 2:
            raise ValueError(
                f"L*|sigma| = {self.L * abs(self.sigma):g} must exceed 2 "
                "for the odd negative mode to exist")

    @property
    def s(self) -> float:
        return -self.sigma

    @property
    def volume(self) -> float:
        return self.L ** self.nu

    def with_nu(self, nu: int) -> "BoxGeometry":
        return BoxGeometry(nu, self.L, self.sigma)


def _readonly(a) -> np.ndarray:
    a = np.array(a)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class RobinSpectrum1D:
    """Immutable solution set of the 1-D secular equations for k = 0..k_max.

    Attributes:
        eigenvalues: eps_L(k).
        wavenumbers: kappa_k for the two negative modes, q_k for the rest.
        excitations: eps_L(k) - eps_L(0), computed without cancellation.
        ground_offsets: (eps_L(0) + s**2, eps_L(1) + s**2).
        log_norm: log of the integral of the unnormalised profile squared;
            the normalisation prefactor is exp(-log_norm / 2).
        residuals: normalised secular residual at each stored root.
    """

    geometry: BoxGeometry
    k_max: int
    eigenvalues: np.ndarray
    wavenumbers: np.ndarray
    excitations: np.ndarray
    ground_offsets: tuple[float, float]
    kinds: tuple[ModeKind, ...]
    log_norm: np.ndarray
    residuals: np.ndarray

    @property
    def norm_constants(self) -> np.ndarray:
        return np.exp(-0.5 * self.log_norm)

    def kind(self, k: int) -> ModeKind:
        return self.kinds[k]

    def __len__(self) -> int:
        return self.k_max + 1


# -- negative modes ---------------------------------------------------------

def _bisect_scalar(g, lo: float, hi: float, what: str) -> float:
    """Bisect a monotone scalar function down to adjacent floats."""
    glo, ghi = g(lo), g(hi)
    # an endpoint can be a root once the offset is below float resolution
    if ghi == 0.0:
        return hi
    if glo == 0.0:
        return lo
    if not (glo < 0 < ghi or ghi < 0 < glo):
        raise SpectrumError(f"no sign change in bracket for {what}")
    sign_lo = glo > 0
    for _ in range(BISECTION_CAP):
        mid = 0.5 * (lo + hi)
        if mid == lo or mid == hi:
            return lo if abs(g(lo)) <= abs(g(hi)) else hi
        if (g(mid) > 0) == sign_lo:
            lo = mid
        else:
            hi = mid
    raise SpectrumError(f"bisection did not converge for {what}")


def _even_offset(s: float, L: float) -> float:
    # kappa*tanh(kappa L/2) = s  <=>  delta = 2s / expm1((s + delta) L)
    def g(d):
        arg = (s + d) * L
        return d - (2.0 * s / math.expm1(arg) if arg < 700.0 else 0.0)
    if s * L >= 700.0:
        return 0.0
    hi = 2.0 * s / math.expm1(s * L)
    return _bisect_scalar(g, 0.0, hi, "even negative mode")


def _odd_offset(s: float, L: float) -> float:
    # kappa*coth(kappa L/2) = s  <=>  delta = -2s / (exp((s + delta) L) + 1)
    def h(d):
        arg = (s + d) * L
        return d + (2.0 * s / (math.exp(arg) + 1.0) if arg < 700.0 else 0.0)
    kappa_lo = 0.5 * s
    for _ in range(200):
        if h(kappa_lo - s) < 0:
            break
        kappa_lo *= 0.5
    else:
        raise SpectrumError("no sign change in bracket for odd negative mode")
    if h(0.0) == 0.0:
        return 0.0
    return _bisect_scalar(h, kappa_lo - s, 0.0, "odd negative mode")


def _log_sinh_ratio_pm1(y: float, sign: int) -> float:
    """log(sinh(y)/y + sign) for y > 0, sign = +1 or -1, without overflow."""
    if y > 20.0:
        ey = math.exp(-y)
        return y - math.log(2.0 * y) + math.log1p(-ey * ey + sign * 2.0 * y * ey)
    if sign < 0 and y < 0.5:
        # sinh(y)/y - 1 = sum_{m>=1} y^(2m) / (2m+1)!
        total, term = 0.0, 1.0
        for m in range(1, 12):
            term *= y * y / ((2 * m) * (2 * m + 1))
            total += term
        return math.log(total)
    return math.log(math.sinh(y) / y + sign)


# -- positive modes ---------------------------------------------------------

def _positive_secular(q, L, s, even):
    half = 0.5 * q * L
    norm = np.hypot(q, s)
    return np.where(even, q * np.sin(half) + s * np.cos(half),
                    q * np.cos(half) - s * np.sin(half)) / norm


def _solve_positive(L: float, s: float, k_max: int) -> tuple[np.ndarray, np.ndarray]:
    k = np.arange(2, k_max + 1)
    even = (k % 2) == 0
    lo = (k - 1) * math.pi / L
    hi = k * math.pi / L
    flo = _positive_secular(lo, L, s, even)
    fhi = _positive_secular(hi, L, s, even)
    if np.any(flo * fhi >= 0):
        bad = int(k[np.argmax(flo * fhi >= 0)])
        raise SpectrumError(f"no sign change in bracket for positive mode k={bad}")
    sign_lo = flo > 0
    for _ in range(BISECTION_CAP):
        mid = 0.5 * (lo + hi)
        done = (mid == lo) | (mid == hi)
        if np.all(done):
            break
        fm = _positive_secular(mid, L, s, even)
        go_lo = (fm > 0) == sign_lo
        lo = np.where(go_lo & ~done, mid, lo)
        hi = np.where(~go_lo & ~done, mid, hi)
    else:
        raise SpectrumError("bisection did not converge for positive modes")
    flo = np.abs(_positive_secular(lo, L, s, even))
    fhi = np.abs(_positive_secular(hi, L, s, even))
    q = np.where(flo <= fhi, lo, hi)
    return q, np.minimum(flo, fhi)


def build_spectrum_1d(geom: BoxGeometry, k_max: int) -> RobinSpectrum1D:
    """Solve the 1-D secular equations for k = 0..k_max.

    Positive roots are bracketed by ((k-1)pi/L, k pi/L); the two negative
    roots are bisected in the offset variable kappa - |sigma|.  Raises
    SpectrumError if a bracket has no sign change.
    """
    if k_max < 2:
        raise ValueError("k_max must be at least 2")
    L, s = float(geom.L), geom.s

    d0 = _even_offset(s, L)
    d1 = _odd_offset(s, L)
    k0, k1 = s + d0, s + d1
    off0 = -d0 * (2.0 * s + d0)
    off1 = -d1 * (2.0 * s + d1)
    if not off0 < off1:
        log.warning("negative modes not resolved at L|sigma|=%g: offsets %r, %r",
                    L * s, off0, off1)

    q, pos_res = _solve_positive(L, s, k_max)

    eig = np.empty(k_max + 1)
    eig[0], eig[1] = -k0 * k0, -k1 * k1
    eig[2:] = q * q
    exc = np.empty(k_max + 1)
    exc[0], exc[1] = 0.0, off1 - off0
    exc[2:] = q * q + s * s - off0

    waven = np.concatenate([[k0, k1], q])

    log_norm = np.empty(k_max + 1)
    log_norm[0] = math.log(0.5 * L) + _log_sinh_ratio_pm1(k0 * L, +1)
    log_norm[1] = math.log(0.5 * L) + _log_sinh_ratio_pm1(k1 * L, -1)
    k = np.arange(2, k_max + 1)
    ratio = np.sin(q * L) / (q * L)
    log_norm[2:] = np.log(0.5 * L) + np.log1p(np.where(k % 2 == 0, ratio, -ratio))

    res = np.empty(k_max + 1)
    res[0] = abs(k0 * math.tanh(0.5 * k0 * L) - s) / math.hypot(k0, s)
    res[1] = abs(k1 / math.tanh(0.5 * k1 * L) - s) / math.hypot(k1, s)
    res[2:] = pos_res

    kinds = (ModeKind.NEGATIVE_EVEN, ModeKind.NEGATIVE_ODD) + tuple(
        ModeKind.POSITIVE_EVEN if kk % 2 == 0 else ModeKind.POSITIVE_ODD for kk in k)

    return RobinSpectrum1D(
        geometry=geom,
        k_max=int(k_max),
        eigenvalues=_readonly(eig),
        wavenumbers=_readonly(waven),
        excitations=_readonly(exc),
        ground_offsets=(off0, off1),
        kinds=kinds,
        log_norm=_readonly(log_norm),
        residuals=_readonly(res),
    )


def kmax_for(geom: BoxGeometry, beta: float, tol: float = 1e-30) -> int:
    """Smallest cutoff whose first dropped mode has occupation below ``tol``.

    Evaluated in the worst case mu -> nu*eps_L(0), with all other axes in the
    ground mode.  Uses the lower bracket eps_L(k+1) > (k pi / L)**2.
    """
    budget = math.log1p(1.0 / tol) / beta - geom.s ** 2
    k = math.ceil(geom.L * math.sqrt(max(budget, 0.0)) / math.pi)
    return max(int(k), 2)


def spectrum_for(geom: BoxGeometry, beta: float, tol: float = 1e-30) -> RobinSpectrum1D:
    return build_spectrum_1d(geom, kmax_for(geom, beta, tol))


# -- eigenfunctions ---------------------------------------------------------

def _check_inside(spec: RobinSpectrum1D, x: np.ndarray):
    half = 0.5 * spec.geometry.L
    if np.any(np.abs(x) > half * (1 + 1e-12)):
        raise ValueError("x outside the box [-L/2, L/2]")


def eigenfunction_matrix(spec: RobinSpectrum1D, x, ks=None) -> np.ndarray:
    """Rows phi_k(x) for k in ``ks`` (default 0..k_max), columns over ``x``."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    _check_inside(spec, x)
    ks = np.arange(spec.k_max + 1) if ks is None else np.asarray(ks, dtype=int)
    if np.any(ks < 0) or np.any(ks > spec.k_max):
        raise IndexError("mode index outside 0..k_max")
    out = np.empty((ks.size, x.size))
    for row, k in enumerate(ks):
        w = spec.wavenumbers[k]
        lp = -0.5 * spec.log_norm[k]
        if k == 0:
            out[row] = 0.5 * (np.exp(w * x + lp) + np.exp(-w * x + lp))
        elif k == 1:
            # sinh(-kappa x), the sign used in the closed-form eigenfunctions
            out[row] = -0.5 * (np.exp(w * x + lp) - np.exp(-w * x + lp))
        elif k % 2 == 0:
            out[row] = math.exp(lp) * np.cos(w * x)
        else:
            out[row] = math.exp(lp) * np.sin(w * x)
    return out


def eigenfunction(spec: RobinSpectrum1D, k: int, x):
    """Normalised eigenfunction phi_k^L evaluated at ``x`` (scalar or array)."""
    vals = eigenfunction_matrix(spec, x, [k])[0]
    return float(vals[0]) if np.ndim(x) == 0 else vals


# -- tensor modes -----------------------------------------------------------

def tensor_energy(spec: RobinSpectrum1D, k: Sequence[int]) -> float:
    """E_L(k) = sum of 1-D eigenvalues over the components of ``k``."""
    k = tuple(int(i) for i in k)
    if any(i < 0 or i > spec.k_max for i in k):
        raise IndexError("mode index outside 0..k_max")
    return math.fsum(spec.eigenvalues[i] for i in k)


@dataclass(frozen=True)
class ModeSet:
    """Lexicographically ordered tensor modes with their energies.

    ``complete`` is False when the spectrum cutoff may hide modes that would
    otherwise pass the occupation threshold.
    """

    indices: np.ndarray
    energies: np.ndarray
    excitations: np.ndarray
    complete: bool = True
    nu: int = field(default=1)

    def __len__(self) -> int:
        return len(self.energies)

    def __iter__(self) -> Iterator[tuple[tuple[int, ...], float]]:
        for idx, e in zip(self.indices, self.energies):
            yield tuple(int(i) for i in idx), float(e)


def _modes_below(spec: RobinSpectrum1D, nu: int, budget: float):
    """All k in {0..k_max}^nu with sum of 1-D excitations <= budget."""
    exc = spec.excitations
    n1 = int(np.searchsorted(exc, budget, side="right"))
    if n1 == 0:
        return np.zeros((0, nu), dtype=int), np.zeros(0)
    if nu == 1:
        idx = np.arange(n1)[:, None]
        return idx, exc[:n1].copy()
    blocks_i, blocks_e = [], []
    for k0 in range(n1):
        sub_i, sub_e = _modes_below(spec, nu - 1, budget - exc[k0])
        if len(sub_e) == 0:
            continue
        blocks_i.append(np.hstack([np.full((len(sub_e), 1), k0), sub_i]))
        blocks_e.append(exc[k0] + sub_e)
    return np.vstack(blocks_i), np.concatenate(blocks_e)


def modes_within(spec: RobinSpectrum1D, nu: int, budget: float) -> ModeSet:
    """Modes with E_L(k) - nu*eps_L(0) <= budget, lexicographic order."""
    idx, exc = _modes_below(spec, nu, budget)
    # next unseen 1-D level is bounded below by (k_max pi / L)^2
    L = spec.geometry.L
    next_exc = (spec.k_max * math.pi / L) ** 2 + spec.geometry.s ** 2 - spec.ground_offsets[0]
    complete = next_exc > budget
    energies = nu * spec.eigenvalues[0] + exc
    return ModeSet(_readonly(idx), _readonly(energies), _readonly(exc), complete, nu)


def all_modes(spec: RobinSpectrum1D, nu: int) -> ModeSet:
    """The full truncated set {0..k_max}^nu."""
    grids = np.meshgrid(*([np.arange(spec.k_max + 1)] * nu), indexing="ij")
    idx = np.stack([g.ravel() for g in grids], axis=1)
    exc = spec.excitations[idx].sum(axis=1)
    energies = nu * spec.eigenvalues[0] + exc
    return ModeSet(_readonly(idx), _readonly(energies), _readonly(exc), True, nu)


def occupation_budget(beta: float, tol: float) -> float:
    """Largest beta*(E - mu) with Bose occupation >= tol."""
    return math.log1p(1.0 / tol)


def enumerate_modes(spec: RobinSpectrum1D, nu: int | None, beta: float, mu: float,
                    tol: float, *, gap: float | None = None) -> ModeSet:
    """Every mode with occupation 1/(exp(beta(E - mu)) - 1) >= tol.

    ``gap`` = nu*eps_L(0) - mu may be passed instead of relying on ``mu``
    when the gap is far below the resolution of mu itself.
    """
    nu = spec.geometry.nu if nu is None else nu
    if tol <= 0:
        raise ValueError("tol must be positive")
    if gap is None:
        gap = nu * spec.eigenvalues[0] - mu
    if not gap > 0:
        raise ValueError("mu must lie strictly below the ground energy")
    budget = occupation_budget(beta, tol) / beta - gap
    ms = modes_within(spec, nu, budget)
    if not ms.complete:
        log.warning("spectrum cutoff k_max=%d may omit modes with occupation >= %g",
                    spec.k_max, tol)
    return ms
