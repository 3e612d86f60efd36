"""Finite-volume laboratory for the free Bose gas with attractive (Robin) walls."""

from robinbose.correlation import (
    Chi,
    GFValue,
    fhat,
    gf_finite,
    gf_value,
    kernel_G,
    psd_gram_check,
    quadratic_form_limit,
    two_point_finite,
)
from robinbose.kac import KacLimitLaw, charfun_finite, charfun_limit, invert_charfun
from robinbose.localization import (
    corner_scan,
    homothety_point,
    local_condensate_finite,
    local_density_finite,
)
from robinbose.spectral import (
    BoxGeometry,
    ModeKind,
    ModeSet,
    RobinSpectrum1D,
    build_spectrum_1d,
    eigenfunction,
    enumerate_modes,
    kmax_for,
    spectrum_for,
    tensor_energy,
)
from robinbose.testfunctions import ShiftSpec, TestFunction, bump, shift
from robinbose.thermo import (
    LimitState,
    ThermoState,
    bose_occupation,
    bulk_density,
    condensate_density_finite,
    critical_density,
    limit_state,
    mu_asymptotic,
    solve_mu,
)

__version__ = "0.1.0"

__all__ = [
    "BoxGeometry",
    "Chi",
    "GFValue",
    "KacLimitLaw",
    "LimitState",
    "ModeKind",
    "ModeSet",
    "RobinSpectrum1D",
    "ShiftSpec",
    "TestFunction",
    "ThermoState",
    "bose_occupation",
    "build_spectrum_1d",
    "bulk_density",
    "bump",
    "charfun_finite",
    "charfun_limit",
    "condensate_density_finite",
    "corner_scan",
    "critical_density",
    "eigenfunction",
    "enumerate_modes",
    "fhat",
    "gf_finite",
    "gf_value",
    "homothety_point",
    "invert_charfun",
    "kernel_G",
    "kmax_for",
    "limit_state",
    "local_condensate_finite",
    "local_density_finite",
    "mu_asymptotic",
    "psd_gram_check",
    "quadratic_form_limit",
    "shift",
    "solve_mu",
    "spectrum_for",
    "tensor_energy",
    "two_point_finite",
]
