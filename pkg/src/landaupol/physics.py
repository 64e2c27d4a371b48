"""Bare matter-mode dispersions of a 2DEG in a slot cavity.

All public frequencies are ordinary frequencies in THz.  The formulas are
written in angular units (rad/s); :func:`to_angular` and :func:`to_thz` are
the only places where the two are converted.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from types import MappingProxyType
from typing import Mapping


@dataclass(frozen=True)
class PhysConstants:
    """CODATA 2018 values in SI units."""

    elementary_charge: float = 1.602176634e-19  # C
    electron_mass: float = 9.1093837015e-31  # kg
    vacuum_permittivity: float = 8.8541878128e-12  # F/m
    speed_of_light: float = 299792458.0  # m/s
    reduced_planck: float = 1.054571817e-34  # J s


CONST = PhysConstants()

THZ = 1e12
DEFAULT_MP_LIFETIME = 1.2e-12  # s
DEFAULT_MOBILITY = 120.0  # m^2/(V s), i.e. 1.2e6 cm^2/(V s)


class DomainError(ValueError):
    """An argument lies outside the domain of a dispersion formula."""


class NoSolutionError(ValueError):
    """No magnetic field reaches the requested frequency.

    ``min_frequency`` is the lowest frequency (THz) the mode attains.
    """

    def __init__(self, message: str, min_frequency: float):
        super().__init__(message)
        self.min_frequency = min_frequency


def to_angular(nu_thz):
    """THz (ordinary) -> rad/s."""
    return nu_thz * (2.0 * math.pi * THZ)


def to_thz(omega):
    """rad/s -> THz (ordinary)."""
    return omega / (2.0 * math.pi * THZ)


def mobility_lifetime(mobility: float, mass_ratio: float) -> float:
    """Momentum relaxation time tau = mu m* / e, mobility in m^2/(V s)."""
    return mobility * mass_ratio * CONST.electron_mass / CONST.elementary_charge


def _check_odd_modes(keys) -> None:
    for n in keys:
        if not isinstance(n, int) or isinstance(n, bool) or n < 1 or n % 2 == 0:
            raise DomainError(f"mode index must be an odd positive integer, got {n!r}")


@dataclass(frozen=True)
class SampleParams:
    """2DEG and slot parameters in SI units.

    ``mp_lifetimes`` maps odd mode index -> lifetime (s); modes missing from
    the map fall back to ``default_mp_lifetime``.
    """

    electron_density: float  # 1/m^2
    effective_mass_ratio: float
    rel_permittivity: float
    slot_width: float  # m
    qw_thickness: float = 30e-9  # m
    cr_lifetime: float | None = None  # s; None -> derived from DEFAULT_MOBILITY
    mp_lifetimes: Mapping[int, float] = field(default_factory=dict)
    default_mp_lifetime: float = DEFAULT_MP_LIFETIME

    def __post_init__(self):
        if self.cr_lifetime is None:
            object.__setattr__(
                self,
                "cr_lifetime",
                mobility_lifetime(DEFAULT_MOBILITY, self.effective_mass_ratio),
            )
        for name in (
            "electron_density",
            "effective_mass_ratio",
            "rel_permittivity",
            "slot_width",
            "qw_thickness",
            "cr_lifetime",
            "default_mp_lifetime",
        ):
            v = getattr(self, name)
            if not (math.isfinite(v) and v > 0):
                raise DomainError(f"{name} must be finite and > 0, got {v!r}")
        _check_odd_modes(self.mp_lifetimes)
        for n, tau in self.mp_lifetimes.items():
            if not (math.isfinite(tau) and tau > 0):
                raise DomainError(f"mp lifetime for mode {n} must be > 0, got {tau!r}")
        object.__setattr__(self, "mp_lifetimes", MappingProxyType(dict(self.mp_lifetimes)))

    @property
    def effective_mass(self) -> float:
        return self.effective_mass_ratio * CONST.electron_mass

    def mp_lifetime(self, n: int) -> float:
        return self.mp_lifetimes.get(n, self.default_mp_lifetime)


def gaas_sample(**overrides) -> SampleParams:
    """The GaAs 2DEG of the experiment (n_e = 3.6e11 cm^-2, m* = 0.076 m0)."""
    params = dict(
        electron_density=3.6e15,
        effective_mass_ratio=0.076,
        rel_permittivity=6.98,
        slot_width=4e-6,
    )
    params.update(overrides)
    return SampleParams(**params)


def _nonneg(name: str, x: float) -> float:
    x = float(x)
    if not math.isfinite(x) or x < 0:
        raise DomainError(f"{name} must be finite and >= 0, got {x!r}")
    return x


def plasmon_frequency(k: float, s: SampleParams) -> float:
    """Long-wavelength 2D plasmon frequency (THz) at in-plane wave vector k (1/m)."""
    k = _nonneg("k", k)
    c = CONST
    omega2 = k * c.elementary_charge**2 * s.electron_density / (
        2.0 * s.effective_mass * c.vacuum_permittivity * s.rel_permittivity
    )
    return to_thz(math.sqrt(omega2))


def cyclotron_frequency(B: float, s: SampleParams) -> float:
    """Cyclotron frequency (THz) at field B (T)."""
    B = _nonneg("B", B)
    return to_thz(CONST.elementary_charge * B / s.effective_mass)


def magnetoplasmon_frequency(k: float, B: float, s: SampleParams) -> float:
    nu_p = plasmon_frequency(k, s)
    nu_c = cyclotron_frequency(B, s)
    return math.sqrt(nu_p * nu_p + nu_c * nu_c)


def slot_momentum(n: int, d: float) -> float:
    """In-plane momentum n*pi/d supplied by a slot of width d; n must be odd."""
    if isinstance(n, bool) or int(n) != n or n < 1 or n % 2 == 0:
        raise DomainError(f"slot harmonic must be an odd positive integer, got {n!r}")
    if not (math.isfinite(d) and d > 0):
        raise DomainError(f"slot width must be > 0, got {d!r}")
    return int(n) * math.pi / d


def mode_momentum(n: int, s: SampleParams) -> float:
    return slot_momentum(n, s.slot_width)


def zero_detuning_field(target: float, k: float, s: SampleParams) -> float:
    """Field (T) at which the magnetoplasmon at wave vector k reaches ``target`` THz."""
    if not math.isfinite(target):
        raise DomainError(f"target frequency must be finite, got {target!r}")
    nu_p = plasmon_frequency(k, s)
    excess = target * target - nu_p * nu_p
    if excess < 0:
        raise NoSolutionError(
            f"target {target:g} THz lies below the plasmon frequency {nu_p:.6g} THz",
            min_frequency=nu_p,
        )
    return s.effective_mass * to_angular(math.sqrt(excess)) / CONST.elementary_charge
