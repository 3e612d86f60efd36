"""Separable, compactly supported complex test functions and homothety shifts.

A TestFunction is a finite linear combination of separable terms, each a
product of one-dimensional bump profiles

    b(u) * sum_j c_j u^j,   u = (x - center) / half_width,
    b(u) = exp(-1 / (1 - u^2))  on |u| < 1, zero elsewhere.

Linear combinations are closed under +, - and scalar multiplication, which
the positivity check on Weyl generating functionals needs (f_i - f_j is not
separable in general).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from robinbose.quadrature import integrate

AXIS_TOL = 1e-14


@dataclass(frozen=True)
class AxisProfile:
    center: float = 0.0
    half_width: float = 1.0
    coeffs: tuple[complex, ...] = (1.0,)

    def __post_init__(self):
        if not self.half_width > 0:
            raise ValueError("half_width must be positive")

    @property
    def support(self) -> tuple[float, float]:
        return self.center - self.half_width, self.center + self.half_width

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        u = (x - self.center) / self.half_width
        inside = np.abs(u) < 1.0
        uu = np.where(inside, u, 0.0)
        env = np.where(inside, np.exp(-1.0 / np.where(inside, 1.0 - uu * uu, 1.0)), 0.0)
        poly = np.polynomial.polynomial.polyval(uu, np.asarray(self.coeffs, dtype=complex))
        return env * poly

    def translated(self, d: float) -> "AxisProfile":
        return replace(self, center=self.center + d)

    @property
    def is_real(self) -> bool:
        return all(complex(c).imag == 0 for c in self.coeffs)


@dataclass(frozen=True)
class ShiftSpec:
    """Homothety shift: axis alpha moves by signs[alpha] * (L/2 - ln L / (2 a_alpha |sigma|))."""

    L: float
    sigma: float
    signs: tuple[int, ...]
    a: tuple[float, ...]

    def __post_init__(self):
        if len(self.signs) != len(self.a):
            raise ValueError("signs and a must have one entry per axis")
        if any(sg not in (-1, 1) for sg in self.signs):
            raise ValueError("signs must be +1 or -1")
        if any(not ai > 0 for ai in self.a):
            raise ValueError("scales a must be positive")
        if not self.sigma < 0:
            raise ValueError("attractive boundary required (sigma < 0)")

    @property
    def nu(self) -> int:
        return len(self.a)

    @property
    def offsets(self) -> np.ndarray:
        s = -self.sigma
        return np.array([sg * (0.5 * self.L - math.log(self.L) / (2.0 * ai * s))
                         for sg, ai in zip(self.signs, self.a)])

    def at(self, L: float) -> "ShiftSpec":
        return replace(self, L=L)


@dataclass(frozen=True)
class SeparableTerm:
    coeff: complex
    axes: tuple[AxisProfile, ...]

    def __call__(self, points: np.ndarray):
        out = np.full(points.shape[:-1], complex(self.coeff))
        for alpha, prof in enumerate(self.axes):
            out = out * prof(points[..., alpha])
        return out


@dataclass(frozen=True)
class TestFunction:
    """f(x) = sum_a coeff_a prod_alpha profile_{a,alpha}(x_alpha).

    ``shift`` records a homothety shift already applied to the terms.
    """

    __test__ = False  # not a pytest class

    terms: tuple[SeparableTerm, ...]
    shift: ShiftSpec | None = field(default=None)

    def __post_init__(self):
        if not self.terms:
            raise ValueError("a test function needs at least one term")
        nus = {len(t.axes) for t in self.terms}
        if len(nus) != 1:
            raise ValueError("all terms must have the same dimension")

    @property
    def nu(self) -> int:
        return len(self.terms[0].axes)

    def __call__(self, points):
        pts = np.asarray(points, dtype=float)
        if self.nu == 1 and (pts.ndim == 0 or pts.shape[-1] != 1):
            pts = pts[..., None]
        out = sum(term(pts) for term in self.terms)
        return complex(out) if np.ndim(out) == 0 else out

    def support_box(self) -> list[tuple[float, float]]:
        return [(min(t.axes[a].support[0] for t in self.terms),
                 max(t.axes[a].support[1] for t in self.terms)) for a in range(self.nu)]

    def translated(self, d: Sequence[float]) -> "TestFunction":
        terms = tuple(SeparableTerm(t.coeff, tuple(p.translated(float(di))
                                                   for p, di in zip(t.axes, d)))
                      for t in self.terms)
        return TestFunction(terms, self.shift)

    def unshifted(self) -> "TestFunction":
        if self.shift is None:
            return self
        return replace(self.translated(-self.shift.offsets), shift=None)

    def _combine(self, other: "TestFunction", sign: float) -> "TestFunction":
        if other.nu != self.nu:
            raise ValueError("dimension mismatch")
        shift = self.shift if self.shift == other.shift else None
        if shift is None and (self.shift is not None or other.shift is not None):
            raise ValueError("cannot combine test functions carrying different shifts")
        flipped = tuple(SeparableTerm(sign * t.coeff, t.axes) for t in other.terms)
        return TestFunction(self.terms + flipped, shift)

    def __add__(self, other):
        return self._combine(other, 1.0)

    def __sub__(self, other):
        return self._combine(other, -1.0)

    def __mul__(self, lam):
        return TestFunction(tuple(SeparableTerm(lam * t.coeff, t.axes) for t in self.terms),
                            self.shift)

    __rmul__ = __mul__

    def __neg__(self):
        return self * -1.0


def bump(nu: int = 1, half_width: float = 1.0, center=0.0, coeffs=(1.0,),
         amplitude: complex = 1.0) -> TestFunction:
    """Product of identical bump profiles; ``center`` may be a scalar or per-axis."""
    centers = np.broadcast_to(np.asarray(center, dtype=float), (nu,))
    axes = tuple(AxisProfile(float(c), half_width, tuple(coeffs)) for c in centers)
    return TestFunction((SeparableTerm(complex(amplitude), axes),))


def random_bump(rng: np.random.Generator, nu: int = 1, max_center: float = 0.5,
                half_width_range=(0.4, 1.0), degree: int = 2) -> TestFunction:
    """Complex bump with random center, width, amplitude and polynomial modulation."""
    axes = []
    for _ in range(nu):
        hw = float(rng.uniform(*half_width_range))
        c = float(rng.uniform(-max_center, max_center))
        coeffs = tuple(complex(*rng.normal(size=2)) for _ in range(degree + 1))
        axes.append(AxisProfile(c, hw, coeffs))
    amp = complex(*rng.normal(size=2))
    return TestFunction((SeparableTerm(amp, tuple(axes)),))


# -- integrals ---------------------------------------------------------------

def axis_integral(profile: AxisProfile, weight, tol: float = AXIS_TOL):
    """int profile(x) * weight(x) dx over the profile's support.

    ``weight`` maps nodes to an array whose last axis runs over the nodes, so
    many weights (e.g. all eigenfunctions) go through in one pass.
    """
    a, b = profile.support
    return integrate(lambda x: profile(x) * weight(x), a, b, tol=tol, n_panels=2)


def axis_inner(p: AxisProfile, q: AxisProfile, tol: float = AXIS_TOL) -> complex:
    """int conj(p) q over the overlap of the supports."""
    lo = max(p.support[0], q.support[0])
    hi = min(p.support[1], q.support[1])
    if hi <= lo:
        return 0.0j
    return complex(integrate(lambda x: np.conj(p(x)) * q(x), lo, hi, tol=tol, n_panels=2))


def inner(f: TestFunction, g: TestFunction) -> complex:
    """(f, g) = int conj(f) g."""
    total = 0.0j
    for tf in f.terms:
        for tg in g.terms:
            prod = np.conj(tf.coeff) * tg.coeff
            for pa, pb in zip(tf.axes, tg.axes):
                prod *= axis_inner(pa, pb)
            total += prod
    return complex(total)


def l2_norm_sq(f: TestFunction) -> float:
    return inner(f, f).real


def exponential_moment(f: TestFunction, sigma: float, signs: Sequence[int]) -> complex:
    """int f(x) prod_alpha exp(signs[alpha] |sigma| x_alpha) dx."""
    s = -sigma
    total = 0.0j
    for term in f.terms:
        prod = complex(term.coeff)
        for prof, sg in zip(term.axes, signs):
            prod *= complex(axis_integral(prof, lambda x, sg=sg: np.exp(sg * s * x)))
        total += prod
    return total


def check_support(f: TestFunction, L: float):
    """Raise ValueError unless supp f lies strictly inside (-L/2, L/2)^nu."""
    for lo, hi in f.support_box():
        if lo <= -0.5 * L or hi >= 0.5 * L:
            raise ValueError(f"support [{lo:g}, {hi:g}] violates the box (-{L / 2:g}, {L / 2:g})")


def shift(f: TestFunction, L: float, signs: Sequence[int] | int, a: Sequence[float] | float,
          sigma: float) -> TestFunction:
    """Translate every axis by signs * (L/2 - ln L / (2 a |sigma|)) and record it.

    The unshifted support radius must stay below ln L / (2|sigma|) and the
    shifted support must stay inside the box.
    """
    if f.shift is not None:
        raise ValueError("test function is already shifted")
    nu = f.nu
    signs = tuple(int(x) for x in np.broadcast_to(np.asarray(signs), (nu,)))
    a = tuple(float(x) for x in np.broadcast_to(np.asarray(a, dtype=float), (nu,)))
    spec = ShiftSpec(float(L), float(sigma), signs, a)
    delta = max(max(abs(lo), abs(hi)) for lo, hi in f.support_box())
    if not delta < math.log(L) / (2.0 * -sigma):
        raise ValueError(f"support radius {delta:g} not below ln L/(2|sigma|) = "
                         f"{math.log(L) / (2.0 * -sigma):g}")
    out = replace(f.translated(spec.offsets), shift=spec)
    check_support(out, L)
    return out
