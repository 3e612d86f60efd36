"""Local particle and condensate densities, homothety points, corner scans."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from robinbose.spectral import BoxGeometry, RobinSpectrum1D, eigenfunction_matrix, spectrum_for
from robinbose.thermo import ThermoState, bulk_density, solve_mu

_CHUNK = 1 << 22  # mode-by-point entries held at once


def _points(x, nu: int) -> np.ndarray:
    pts = np.asarray(x, dtype=float)
    if nu == 1 and (pts.ndim == 0 or pts.shape[-1] != 1):
        pts = pts[..., None]
    if pts.shape[-1] != nu:
        raise ValueError(f"points must have {nu} coordinates")
    return pts.reshape(-1, nu)


def _mode_density(spec: RobinSpectrum1D, nu: int, thermo: ThermoState, x,
                  select: np.ndarray | None) -> np.ndarray:
    pts = _points(x, nu)
    half = 0.5 * spec.geometry.L
    if np.any(np.abs(pts) > half):
        raise ValueError(f"points must lie in the box [-{half:g}, {half:g}]^{nu}")
    idx = thermo.modes.indices
    occ = thermo.occupations()
    if select is not None:
        idx, occ = idx[select], occ[select]
    used = np.unique(idx)
    pos = np.searchsorted(used, idx)
    out = np.empty(len(pts))
    step = max(1, _CHUNK // max(len(idx), 1))
    for start in range(0, len(pts), step):
        chunk = pts[start:start + step]
        # per-axis |phi_k(x)|^2, then a product over axes for every tensor mode
        prod = np.ones((len(idx), len(chunk)))
        for alpha in range(nu):
            phi2 = eigenfunction_matrix(spec, chunk[:, alpha], used) ** 2
            prod = prod * phi2[pos[:, alpha]]
        out[start:start + step] = np.sum(prod * occ[:, None], axis=0)
    return out


def local_density_finite(spec: RobinSpectrum1D, nu: int | None, thermo: ThermoState, x):
    """sum_k |psi_k(x)|^2 n_k at one point or an array of points."""
    nu = thermo.nu if nu is None else nu
    out = _mode_density(spec, nu, thermo, x, None)
    single = np.ndim(x) == 0 or (np.ndim(x) == 1 and nu > 1)
    return float(out[0]) if single else out


def local_condensate_finite(spec: RobinSpectrum1D, nu: int | None, thermo: ThermoState, x):
    """Contribution of the 2^nu modes with every k_alpha in {0, 1}."""
    nu = thermo.nu if nu is None else nu
    near = np.all(thermo.modes.indices <= 1, axis=1)
    out = _mode_density(spec, nu, thermo, x, near)
    single = np.ndim(x) == 0 or (np.ndim(x) == 1 and nu > 1)
    return float(out[0]) if single else out


def local_density_limit(beta: float, mu_bar: float, nu: int) -> float:
    """Bulk density at the limiting chemical potential; seen at any fixed point."""
    return bulk_density(beta, mu_bar, nu)


def homothety_point(L: float, sigma: float, a: Sequence[float] | float,
                    signs: Sequence[int] | int = 1) -> np.ndarray:
    """x_alpha = sign_alpha (L/2 - ln L / (2 a_alpha |sigma|))."""
    if not sigma < 0:
        raise ValueError("attractive boundary required (sigma < 0)")
    if not L * -sigma > 2:
        raise ValueError("L|sigma| must exceed 2")
    a = np.atleast_1d(np.asarray(a, dtype=float))
    signs = np.broadcast_to(np.asarray(signs), a.shape)
    if np.any(a <= 0):
        raise ValueError("homothety scales must be positive")
    if np.any((signs != 1) & (signs != -1)):
        raise ValueError("signs must be +1 or -1")
    x = signs * (0.5 * L - math.log(L) / (2.0 * a * -sigma))
    if np.any(np.abs(x) >= 0.5 * L):
        raise ValueError(f"homothety point {x} escapes the box of side {L:g}")
    return x


@dataclass
class DensityProfile:
    points: np.ndarray
    local_density: np.ndarray
    local_condensate: np.ndarray
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        self.points = np.atleast_2d(np.asarray(self.points, dtype=float))
        if self.points.shape[0] != len(self.local_density):
            self.points = self.points.T
        if np.any(self.local_density < 0) or np.any(self.local_condensate < 0):
            raise ValueError("local densities must be nonnegative")
        # the condensate is a subset of the modes, up to rounding
        if np.any(self.local_condensate > self.local_density * (1 + 1e-12)):
            raise ValueError("local condensate exceeds local density")

    @property
    def nu(self) -> int:
        return self.points.shape[1]

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow([f"x_{i + 1}" for i in range(self.nu)] + ["local_density", "local_condensate"])
        for p, d, c in zip(self.points, self.local_density, self.local_condensate):
            w.writerow([f"{v:.17g}" for v in (*p, d, c)])
        return buf.getvalue()


def density_profile(spec: RobinSpectrum1D, nu: int | None, thermo: ThermoState, points,
                    **params) -> DensityProfile:
    nu = thermo.nu if nu is None else nu
    pts = _points(points, nu)
    return DensityProfile(pts, local_density_finite(spec, nu, thermo, pts),
                          local_condensate_finite(spec, nu, thermo, pts), dict(params))


def fit_growth_exponent(L_values: Sequence[float], values: Sequence[float]) -> float:
    """Least-squares slope of log(value) against log(L)."""
    L_values = np.asarray(L_values, dtype=float)
    values = np.asarray(values, dtype=float)
    if len(L_values) < 2 or np.any(values <= 0):
        raise ValueError("need at least two positive values to fit an exponent")
    return float(np.polyfit(np.log(L_values), np.log(values), 1)[0])


@dataclass(frozen=True)
class CornerScan:
    L_values: tuple[float, ...]
    a: tuple[float, ...]
    signs: tuple[int, ...]
    points: np.ndarray
    local_condensate: np.ndarray
    exponent: float
    predicted: float

    @property
    def plateau(self) -> float:
        return float(self.local_condensate[-1])


def corner_scan(L_values: Sequence[float], beta: float, rho: float, sigma: float, nu: int,
                a_grid: Sequence[Sequence[float]], signs: Sequence[int] | int = 1
                ) -> list[CornerScan]:
    """Local condensate at the homothety points of each scale vector over an L-sequence.

    The near-ground occupations hold rho_0 L^nu particles while each squared
    eigenfunction contributes |sigma| L^(-1/a_alpha) per axis, so the fitted
    exponent should approach nu - sum(1/a).
    """
    L_values = tuple(float(L) for L in L_values)
    states = []
    for L in L_values:
        spec = spectrum_for(BoxGeometry(nu, L, sigma), beta)
        states.append((spec, solve_mu(spec, nu, beta, rho)))
    out = []
    for a in a_grid:
        a = tuple(float(x) for x in np.broadcast_to(np.asarray(a, dtype=float), (nu,)))
        sg = tuple(int(x) for x in np.broadcast_to(np.asarray(signs), (nu,)))
        pts, vals = [], []
        for L, (spec, th) in zip(L_values, states):
            x = homothety_point(L, sigma, a, sg)
            v = local_condensate_finite(spec, nu, th, x[None, :])[0]
            pts.append(x)
            vals.append(v)
        vals = np.asarray(vals)
        predicted = nu - math.fsum(1.0 / ai for ai in a)
        out.append(CornerScan(L_values, a, sg, np.asarray(pts), vals,
                              fit_growth_exponent(L_values, vals), predicted))
    return out
