"""Two-point functions and Weyl generating functionals of the quasi-free state.

At finite L the state is fixed by its two-point function

    <a*(f) a(f)> = sum_k |fhat(k)|^2 n_k,   fhat(k) = (psi_k, f),

and the Weyl generating functional is exp(-(f,f)/4 - <a*(f) a(f)>/2).  In the
thermodynamic limit the two-point function becomes (f, g f) with the
heat-kernel series

    G(r) = (4 pi beta)^(-nu/2) sum_{n>=1} exp(n beta mu_bar - r^2/(4 n beta)) n^(-nu/2),

plus, for test functions moved to a homothety point near the boundary, a
condensate term C = rho_0 |sigma|^nu |int f prod exp(+-|sigma| x)|^2 chi,
where chi in {0, 1, inf} is decided by sum(1/a) against nu.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from robinbose.quadrature import QuadratureError, integrate, panel_rule
from robinbose.spectral import RobinSpectrum1D, eigenfunction_matrix
from robinbose.testfunctions import (
    AxisProfile,
    ShiftSpec,
    TestFunction,
    check_support,
    exponential_moment,
    inner,
    l2_norm_sq,
)
from robinbose.thermo import LimitState, ThermoState, fsum

FHAT_TOL = 1e-13
SERIES_TOL = 1e-13
PSD_TOL = 1e-9


class Chi(enum.Enum):
    ZERO = 0
    ONE = 1
    INFINITE = math.inf

    @classmethod
    def classify(cls, a: Sequence[float], nu: int | None = None) -> "Chi":
        nu = len(a) if nu is None else nu
        total = math.fsum(1.0 / ai for ai in a)
        if math.isclose(total, nu, rel_tol=1e-12):
            return cls.ONE
        # homothety points farther from the corner than the 1/a = 1 tuning see nothing
        return cls.ZERO if total > nu else cls.INFINITE


# -- finite volume ----------------------------------------------------------

def axis_transform(spec: RobinSpectrum1D, profile: AxisProfile, ks=None,
                   tol: float = FHAT_TOL) -> np.ndarray:
    """Vector of int phi_k(x) profile(x) dx for k in ``ks``."""
    ks = np.arange(spec.k_max + 1) if ks is None else np.asarray(ks, dtype=int)
    a, b = profile.support
    half = 0.5 * spec.geometry.L
    a, b = max(a, -half), min(b, half)
    if b <= a:
        return np.zeros(ks.size, dtype=complex)
    return integrate(lambda x: profile(x) * eigenfunction_matrix(spec, x, ks), a, b,
                     tol=tol, n_panels=2)


def fhat(f: TestFunction, spec: RobinSpectrum1D, k=None, tol: float = FHAT_TOL) -> np.ndarray:
    """(psi_k, f) for tensor indices ``k``: one index tuple, or an (M, nu) array.

    Eigenfunctions are real, so no conjugation is needed.  Each separable
    term contributes a product of one-dimensional transforms.
    """
    check_support(f, spec.geometry.L)
    nu = f.nu
    scalar = k is not None and np.ndim(k) <= 1
    if k is None:
        grids = np.meshgrid(*[np.arange(spec.k_max + 1)] * nu, indexing="ij")
        idx = np.stack([g.ravel() for g in grids], axis=-1)
    else:
        idx = np.asarray(k, dtype=int).reshape(-1, nu) if scalar else np.asarray(k, dtype=int)
        if idx.ndim != 2 or idx.shape[-1] != nu:
            raise ValueError("mode index dimension does not match the test function")
    used = np.unique(idx)
    pos = np.searchsorted(used, idx)
    out = np.zeros(len(idx), dtype=complex)
    for term in f.terms:
        prod = np.full(len(idx), complex(term.coeff))
        for alpha, prof in enumerate(term.axes):
            prod = prod * axis_transform(spec, prof, used, tol)[pos[:, alpha]]
        out = out + prod
    return complex(out[0]) if scalar else out


def two_point_finite(f: TestFunction, spec: RobinSpectrum1D, nu: int | None,
                     thermo: ThermoState, modes: np.ndarray | None = None) -> float:
    """<a*(f) a(f)> = sum_k |fhat(k)|^2 n_k over the solved state's modes."""
    nu = thermo.nu if nu is None else nu
    if f.nu != nu:
        raise ValueError("test function dimension does not match nu")
    sel = slice(None) if modes is None else modes
    idx = thermo.modes.indices[sel]
    occ = thermo.occupations()[sel]
    amp = fhat(f, spec, idx)
    return fsum((amp.real ** 2 + amp.imag ** 2) * occ)


def condensate_part_finite(f: TestFunction, spec: RobinSpectrum1D, thermo: ThermoState) -> float:
    """The part of two_point_finite carried by the 2^nu modes with every k_i in {0, 1}."""
    near = np.all(thermo.modes.indices <= 1, axis=1)
    return two_point_finite(f, spec, thermo.nu, thermo, modes=near)


def gf_finite(f: TestFunction, spec: RobinSpectrum1D, nu: int | None,
              thermo: ThermoState) -> float:
    return math.exp(-0.25 * l2_norm_sq(f) - 0.5 * two_point_finite(f, spec, nu, thermo))


# -- thermodynamic limit ----------------------------------------------------

def _check_mu(mu_bar: float, beta: float):
    if not mu_bar < 0:
        raise ValueError("heat-kernel series diverges for mu_bar >= 0")
    if not beta > 0:
        raise ValueError("beta must be positive")


def kernel_G(r, beta: float, mu_bar: float, nu: int, tol: float = SERIES_TOL):
    """Limit two-point kernel G(r), truncated once the geometric tail is below ``tol``."""
    _check_mu(mu_bar, beta)
    r2 = np.asarray(r, dtype=float) ** 2
    x = math.exp(beta * mu_bar)
    pref = (4.0 * math.pi * beta) ** (-0.5 * nu)
    terms = []
    n = 1
    while True:
        terms.append(pref * x ** n * n ** (-0.5 * nu) * np.exp(-r2 / (4.0 * n * beta)))
        if pref * x ** (n + 1) * (n + 1) ** (-0.5 * nu) / (1.0 - x) < tol:
            break
        n += 1
    stacked = np.stack([np.broadcast_to(t, r2.shape) for t in terms], axis=-1)
    out = np.apply_along_axis(lambda v: math.fsum(v.tolist()), -1, stacked) if r2.ndim \
        else math.fsum(stacked.tolist())
    return float(out) if np.ndim(out) == 0 else out


@dataclass(frozen=True)
class _AxisRule:
    x: np.ndarray
    w: np.ndarray


def _axis_rule(profile: AxisProfile, n_panels: int) -> _AxisRule:
    a, b = profile.support
    x, w = panel_rule(a, b, n_panels)
    return _AxisRule(x, w)


def _gauss_pair(p: AxisProfile, q: AxisProfile, widths2: np.ndarray, n_panels: int) -> np.ndarray:
    """int int conj(p(x)) q(y) exp(-(x-y)^2 / w) dx dy for every width w.

    About the midpoint c of the two supports, with a = x - c, b = y - c and
    R the half-span,

        exp(-(x-y)^2/w) = exp(-a^2/w) exp(-b^2/w) sum_m (2R^2/w)^m/m! (a/R)^m (b/R)^m,

    so each width costs two sets of one-dimensional moments.  Every summand is
    bounded by int|p| int|q|, hence the error is absolute at rounding level.
    """
    rp, rq = _axis_rule(p, n_panels), _axis_rule(q, n_panels)
    lo = min(p.support[0], q.support[0])
    hi = max(p.support[1], q.support[1])
    c, R = 0.5 * (lo + hi), 0.5 * (hi - lo)
    a, b = rp.x - c, rq.x - c
    u = np.conj(p(rp.x)) * rp.w
    v = q(rq.x) * rq.w
    out = np.empty(len(widths2), dtype=complex)
    for i, w in enumerate(widths2):
        z = 2.0 * R * R / w
        n_terms = _series_length(z)
        m = np.arange(n_terms)
        pa = np.power((a / R)[None, :], m[:, None])
        pb = np.power((b / R)[None, :], m[:, None])
        P = np.sum(pa * (u * np.exp(-a * a / w))[None, :], axis=1)
        Q = np.sum(pb * (v * np.exp(-b * b / w))[None, :], axis=1)
        coef = np.exp(m * math.log(z) - _log_factorials(n_terms)) if z > 0 else (m == 0) * 1.0
        out[i] = np.sum(coef * P * Q)
    return out


def _series_length(z: float, eps: float = 1e-18) -> int:
    # smallest M with z^M / M! < eps past the peak at m ~ z
    m, log_term = 0, 0.0
    while m <= z or log_term > math.log(eps):
        m += 1
        log_term += math.log(z) - math.log(m) if z > 0 else -math.inf
    return m + 1


def _log_factorials(n: int) -> np.ndarray:
    return np.concatenate(([0.0], np.cumsum(np.log(np.arange(1, n)))))


def _gauss_form(f: TestFunction, widths2, n_panels: int) -> np.ndarray:
    widths2 = np.atleast_1d(np.asarray(widths2, dtype=float))
    total = np.zeros(len(widths2), dtype=complex)
    for tf in f.terms:
        for tg in f.terms:
            prod = np.full(len(widths2), np.conj(tf.coeff) * tg.coeff)
            for pa, pb in zip(tf.axes, tg.axes):
                prod = prod * _gauss_pair(pa, pb, widths2, n_panels)
            total = total + prod
    return total.real


def _abs_mass(f: TestFunction) -> float:
    total = 0.0
    for term in f.terms:
        prod = abs(term.coeff)
        for prof in term.axes:
            a, b = prof.support
            prod *= float(integrate(lambda x: np.abs(prof(x)), a, b, tol=1e-12))
        total += prod
    return total


def _panels_for(f: TestFunction, width2: float, tol: float, max_panels: int = 256) -> int:
    n_panels = 2
    prev = _gauss_form(f, width2, n_panels)[0]
    while n_panels < max_panels:
        cur = _gauss_form(f, width2, 2 * n_panels)[0]
        if abs(cur - prev) < tol:
            return 2 * n_panels
        prev = cur
        n_panels *= 2
    raise QuadratureError("double integral did not converge within the panel budget")


def quadratic_form_limit(f: TestFunction, beta: float, mu_bar: float, nu: int | None = None,
                         tol: float = SERIES_TOL) -> float:
    """(f, g f) = sum_n exp(n beta mu_bar) (4 pi n beta)^(-nu/2) <f, exp(-|x-y|^2/4n beta) f>.

    Separability turns each double integral into a product of one-dimensional
    double integrals; the n = 1 term has the narrowest Gaussian, so the panel
    count it needs is reused for every n.
    """
    nu = f.nu if nu is None else nu
    if nu != f.nu:
        raise ValueError("test function dimension does not match nu")
    _check_mu(mu_bar, beta)
    f = f.unshifted()
    x = math.exp(beta * mu_bar)
    mass2 = _abs_mass(f) ** 2
    if mass2 == 0.0:
        return 0.0
    n_panels = _panels_for(f, 4.0 * beta, tol * max(1.0, mass2))
    # the tail bound needs only |f|_1, so the series length is known up front
    n_max = 1
    while (x ** (n_max + 1) * (4.0 * math.pi * (n_max + 1) * beta) ** (-0.5 * nu)
           * mass2 / (1.0 - x)) >= tol:
        n_max += 1
    n = np.arange(1, n_max + 1, dtype=float)
    w = x ** n * (4.0 * math.pi * n * beta) ** (-0.5 * nu)
    terms = (w * _gauss_form(f, 4.0 * n * beta, n_panels)).tolist()
    return max(math.fsum(terms), 0.0)


@dataclass(frozen=True)
class CondensateTerm:
    value: float
    chi: Chi
    moment: complex

    @property
    def is_infinite(self) -> bool:
        return math.isinf(self.value)


def condensate_term(f: TestFunction, sigma: float, rho_0: float, signs: Sequence[int] | int,
                    a: Sequence[float] | float, nu: int | None = None) -> CondensateTerm:
    """rho_0 |sigma|^nu |int f prod exp(+-|sigma| x)|^2 chi(a); ``f`` unshifted.

    An infinite chi with rho_0 = 0 gives 0: nothing condenses, so nothing blows up.
    """
    if rho_0 < 0:
        raise ValueError("rho_0 must be nonnegative")
    nu = f.nu if nu is None else nu
    signs = tuple(int(x) for x in np.broadcast_to(np.asarray(signs), (nu,)))
    a = tuple(float(x) for x in np.broadcast_to(np.asarray(a, dtype=float), (nu,)))
    chi = Chi.classify(a, nu)
    mom = exponential_moment(f.unshifted(), sigma, signs)
    base = rho_0 * (-sigma) ** nu * abs(mom) ** 2
    if chi is Chi.ZERO or rho_0 == 0.0:
        value = 0.0
    elif chi is Chi.ONE:
        value = base
    else:
        value = math.inf if base > 0 else 0.0
    return CondensateTerm(value, chi, mom)


@dataclass(frozen=True)
class GFValue:
    l2_norm_sq: float
    quadratic_form: float
    condensate_term: float
    chi: Chi | None
    value: float

    @property
    def log_value(self) -> float:
        return -math.inf if self.value == 0.0 else math.log(self.value)


def gf_value(f: TestFunction, limit: LimitState, shift: ShiftSpec | None = None,
             tol: float = SERIES_TOL) -> GFValue:
    """Limit generating functional, at the origin or at the homothety point of ``shift``.

    A test function carrying shift metadata uses it when ``shift`` is omitted.
    """
    if shift is None:
        shift = f.shift
    base = f.unshifted()
    ff = l2_norm_sq(base)
    q = quadratic_form_limit(base, limit.beta, limit.mu_bar, limit.nu, tol)
    if shift is None:
        return GFValue(ff, q, 0.0, None, math.exp(-0.25 * ff - 0.5 * q))
    if shift.nu != base.nu:
        raise ValueError("shift dimension does not match the test function")
    ct = condensate_term(base, limit.sigma, limit.rho_0, shift.signs, shift.a, base.nu)
    if ct.is_infinite:
        return GFValue(ff, q, math.inf, ct.chi, 0.0)
    return GFValue(ff, q, ct.value, ct.chi, math.exp(-0.25 * ff - 0.5 * ct.value - 0.5 * q))


# -- positivity -------------------------------------------------------------

@dataclass(frozen=True)
class GramCheck:
    passed: bool
    min_eigenvalue: float
    matrix: np.ndarray


def weyl_gram(evaluator: Callable[[TestFunction], float],
              f_list: Sequence[TestFunction]) -> np.ndarray:
    """M_ij = E(f_i - f_j) exp((i/2) Im(f_i, f_j))."""
    n = len(f_list)
    M = np.empty((n, n), dtype=complex)
    for i in range(n):
        M[i, i] = evaluator(f_list[i] - f_list[i])
        for j in range(i + 1, n):
            phase = np.exp(0.5j * inner(f_list[i], f_list[j]).imag)
            M[i, j] = evaluator(f_list[i] - f_list[j]) * phase
            M[j, i] = np.conj(M[i, j])
    return M


def psd_gram_check(evaluator: Callable[[TestFunction], float],
                   f_list: Sequence[TestFunction], tol: float = PSD_TOL) -> GramCheck:
    """Positive-definiteness of a generating functional on ``f_list``."""
    M = weyl_gram(evaluator, f_list)
    lam = float(np.linalg.eigvalsh(M)[0])
    return GramCheck(lam >= -tol, lam, M)
