"""Permittivity models, normal-incidence transfer matrices and peak picking.

Time dependence is ``exp(-i omega t)``: absorbing media have ``Im eps >= 0``
and refractive indices are taken on the branch ``Im n >= 0``.  Frequencies
are ordinary frequencies in THz throughout.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.signal import find_peaks

from .hopfield import CouplingSet, matter_frequencies
from .physics import CONST, THZ, SampleParams


class ConfigError(ValueError):
    """Invalid configuration or model parameters; messages name the key or location."""


# ---------------------------------------------------------------- permittivities


def drude_metal(plasma_freq: float, scattering: float, nu):
    """``1 - nu_pl^2 / (nu (nu + i gamma))``."""
    nu = np.asarray(nu, dtype=float)
    return 1.0 - plasma_freq**2 / (nu * (nu + 1j * scattering))


def _damping(tau: float) -> float:
    # amplitude damping 1/tau expressed as an ordinary frequency in THz
    return 1.0 / (2.0 * math.pi * tau * THZ)


def plasma_frequency_sq(g: float, eps_bg: float, L_eff: float, d_qw: float) -> float:
    """Squared 2DEG plasma frequency (THz^2) equivalent to coupling g (THz)."""
    return g * g * eps_bg * L_eff / d_qw


def qw_permittivity(
    s: SampleParams,
    c: CouplingSet,
    L_eff: float,
    B,
    nu,
    polarization: str = "active",
):
    """Gyrotropic permittivity of the quantum-well layer.

    The CR pole sits at ``+nu_c`` for the CR-active and ``-nu_c`` for the
    CR-inactive circular polarisation.  Magnetoplasmon poles stay at
    ``+nu_MP`` in both, so the two polarisations coincide at B = 0.
    ``B`` and ``nu`` broadcast against each other.
    """
    if not (L_eff > 0 and s.qw_thickness > 0):
        raise ConfigError("L_eff and the quantum-well thickness must be > 0")
    if polarization not in ("active", "inactive"):
        raise ValueError(f"polarization must be 'active' or 'inactive', got {polarization!r}")
    sigma = 1.0 if polarization == "active" else -1.0
    B, nu = np.broadcast_arrays(np.asarray(B, dtype=float), np.asarray(nu, dtype=float))
    if np.any(nu <= 0):
        raise ValueError("frequency must be > 0")
    eps_bg = s.rel_permittivity
    matter = matter_frequencies(c, B, s)
    eps = np.full(nu.shape, eps_bg, dtype=complex)
    wpl2 = plasma_frequency_sq(c.cr_coupling, eps_bg, L_eff, s.qw_thickness)
    if wpl2:
        eps -= wpl2 / (nu * (nu - sigma * matter[..., 0] + 1j * _damping(s.cr_lifetime)))
    for j, (n, g) in enumerate(c.mp_couplings.items(), start=1):
        wpl2 = plasma_frequency_sq(g, eps_bg, L_eff, s.qw_thickness)
        if wpl2:
            gamma = _damping(s.mp_lifetime(n))
            eps -= wpl2 / (nu * (nu - matter[..., j] + 1j * gamma))
    return eps


@dataclass(frozen=True)
class Constant:
    eps: complex

    def __call__(self, nu, B=0.0):
        return np.full(np.broadcast(np.asarray(nu), np.asarray(B)).shape, self.eps, dtype=complex)


@dataclass(frozen=True)
class DrudeMetal:
    plasma_freq: float
    scattering_rate: float

    def __post_init__(self):
        if not (self.plasma_freq > 0 and self.scattering_rate > 0):
            raise ConfigError("Drude plasma frequency and scattering rate must be > 0")

    def __call__(self, nu, B=0.0):
        nu, _ = np.broadcast_arrays(np.asarray(nu, dtype=float), np.asarray(B, dtype=float))
        return drude_metal(self.plasma_freq, self.scattering_rate, nu)


@dataclass(frozen=True)
class Gyrotropic2DEG:
    sample: SampleParams
    couplings: CouplingSet
    L_eff: float
    polarization: str = "active"

    def __call__(self, nu, B=0.0):
        return qw_permittivity(self.sample, self.couplings, self.L_eff, B, nu, self.polarization)


# ---------------------------------------------------------------- stacks


@dataclass(frozen=True)
class Layer:
    thickness: float  # m
    model: object

    def __post_init__(self):
        if not (math.isfinite(self.thickness) and self.thickness > 0):
            raise ConfigError(f"layer thickness must be > 0, got {self.thickness!r}")


@dataclass(frozen=True)
class LayerStack:
    """Layers ordered from the incidence side; same ambient on both sides."""

    layers: tuple[Layer, ...]
    ambient: object = field(default_factory=lambda: Constant(1.0))

    def __post_init__(self):
        object.__setattr__(self, "layers", tuple(self.layers))
        if not self.layers:
            raise ConfigError("a stack needs at least one layer")

    def reversed(self) -> LayerStack:
        return LayerStack(self.layers[::-1], self.ambient)


def _index(eps):
    n = np.sqrt(eps.astype(complex))
    return np.where(n.imag < 0, -n, n)


def transfer_matrix_transmittance(stack: LayerStack, nu, B=0.0):
    """Power transmittance and reflectance ``(T, R)`` at normal incidence.

    Characteristic-matrix product over the layers; ``nu`` (THz) and ``B`` (T)
    broadcast, so whole (B, frequency) grids are evaluated in one call.
    """
    nu, B = np.broadcast_arrays(np.asarray(nu, dtype=float), np.asarray(B, dtype=float))
    if np.any(nu <= 0):
        raise ValueError("frequency must be > 0")
    eps_amb = np.asarray(stack.ambient(nu, B))
    if np.any(np.abs(eps_amb.imag) > 0) or np.any(eps_amb.real <= 0):
        raise ConfigError("ambient permittivity must be real and positive")
    eta0 = np.sqrt(eps_amb.real)
    m11 = np.ones(nu.shape, dtype=complex)
    m12 = np.zeros(nu.shape, dtype=complex)
    m21 = np.zeros(nu.shape, dtype=complex)
    m22 = np.ones(nu.shape, dtype=complex)
    k0 = 2.0 * math.pi * nu * THZ / CONST.speed_of_light
    for layer in stack.layers:
        n = _index(np.asarray(layer.model(nu, B)))
        delta = k0 * n * layer.thickness
        cs, sn = np.cos(delta), np.sin(delta)
        a12 = -1j * sn / n
        a21 = -1j * n * sn
        m11, m12, m21, m22 = (
            m11 * cs + m12 * a21,
            m11 * a12 + m12 * cs,
            m21 * cs + m22 * a21,
            m21 * a12 + m22 * cs,
        )
    b = m11 + m12 * eta0
    c = m21 + m22 * eta0
    denom = eta0 * b + c
    t = 2.0 * eta0 / denom
    r = (eta0 * b - c) / denom
    return np.abs(t) ** 2, np.abs(r) ** 2


@dataclass(frozen=True)
class CavityGeometry:
    """Fabry-Perot realisation of the slot cavity (all lengths in m)."""

    L_eff: float = 84.2e-6
    gaas_thickness: float = 22.35e-6
    gaas_value: float = 3.6
    gaas_value_is_index: bool = False
    gold_thickness: float = 10e-9
    gold_plasma: float = 2180.0  # THz
    gold_scattering: float = 6.45  # THz

    def __post_init__(self):
        for name in ("L_eff", "gaas_thickness", "gaas_value", "gold_thickness"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v > 0):
                raise ConfigError(f"{name} must be > 0, got {v!r}")

    @property
    def gaas_permittivity(self) -> float:
        return self.gaas_value**2 if self.gaas_value_is_index else self.gaas_value


def cavity_stack(
    s: SampleParams,
    c: CouplingSet,
    geom: CavityGeometry,
    polarization: str = "active",
) -> LayerStack:
    """vacuum | Au | GaAs | QW | GaAs | Au | vacuum."""
    gold = DrudeMetal(geom.gold_plasma, geom.gold_scattering)
    gaas = Constant(geom.gaas_permittivity)
    qw = Gyrotropic2DEG(s, c, geom.L_eff, polarization)
    return LayerStack(
        (
            Layer(geom.gold_thickness, gold),
            Layer(geom.gaas_thickness, gaas),
            Layer(s.qw_thickness, qw),
            Layer(geom.gaas_thickness, gaas),
            Layer(geom.gold_thickness, gold),
        )
    )


# ---------------------------------------------------------------- maps and peaks


def _ascending(name, axis) -> np.ndarray:
    axis = np.asarray(axis, dtype=float)
    if axis.ndim != 1 or axis.size == 0:
        raise ValueError(f"{name} must be a non-empty 1-D sequence")
    if np.any(np.diff(axis) <= 0):
        raise ValueError(f"{name} must be strictly ascending")
    return axis


@dataclass
class TransmissionMap:
    field_axis: np.ndarray
    freq_axis: np.ndarray
    values: np.ndarray  # (n_fields, n_freqs)

    def column(self, B: float) -> np.ndarray:
        """Spectrum at the field-axis point nearest to B."""
        return self.values[int(np.argmin(np.abs(self.field_axis - B)))]

    def write_long_csv(self, fh, comment: str | None = None) -> None:
        if comment:
            fh.write(comment)
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["B_T", "freq_THz", "T"])
        for B, row in zip(self.field_axis, self.values):
            for f, v in zip(self.freq_axis, row):
                w.writerow([repr(float(B)), repr(float(f)), repr(float(v))])

    def write_matrix_csv(self, fh, comment: str | None = None) -> None:
        """Rows are fields, columns frequencies; first row is the frequency axis."""
        if comment:
            fh.write(comment)
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["B_T\\freq_THz"] + [repr(float(f)) for f in self.freq_axis])
        for B, row in zip(self.field_axis, self.values):
            w.writerow([repr(float(B))] + [repr(float(v)) for v in row])


def transmission_map(stack: LayerStack, fields, freqs) -> TransmissionMap:
    fields = _ascending("fields", fields)
    freqs = _ascending("freqs", freqs)
    T, _ = transfer_matrix_transmittance(stack, freqs[None, :], fields[:, None])
    return TransmissionMap(fields, freqs, T)


@dataclass(frozen=True)
class Peak:
    B: float
    freq: float
    height: float


def _parabolic(x, y, i):
    if i == 0 or i == len(y) - 1:
        return x[i], y[i]
    x0, x1, x2 = x[i - 1], x[i], x[i + 1]
    y0, y1, y2 = y[i - 1], y[i], y[i + 1]
    d0 = (y1 - y0) / (x1 - x0)
    d1 = (y2 - y1) / (x2 - x1)
    a = (d1 - d0) / (x2 - x0)
    if a >= 0:
        return x1, y1
    b = d0 - a * (x0 + x1)
    xv = -b / (2 * a)
    xv = min(max(xv, x0), x2)
    return xv, y1 + d0 * (xv - x1) + a * (xv - x0) * (xv - x1)


def extract_peaks(tmap: TransmissionMap, prominence: float = 0.05, max_peaks: int | None = None) -> list[Peak]:
    """Local maxima per field column, refined by 3-point parabolic interpolation.

    A maximum is kept when its topographic prominence is at least
    ``prominence * (column max - column min)``.  With ``max_peaks`` set only
    the most prominent maxima of each column survive.
    """
    if not prominence > 0:
        raise ValueError("prominence must be > 0")
    out = []
    x = tmap.freq_axis
    for B, col in zip(tmap.field_axis, tmap.values):
        span = float(col.max() - col.min())
        if span <= 0:
            continue
        idx, props = find_peaks(col, prominence=prominence * span)
        if max_peaks is not None and len(idx) > max_peaks:
            keep = np.sort(np.argsort(props["prominences"], kind="stable")[::-1][:max_peaks])
            idx = idx[keep]
        for i in idx:
            f, h = _parabolic(x, col, int(i))
            out.append(Peak(float(B), float(f), float(h)))
    return out


def write_peaks_csv(peaks, fh, comment: str | None = None) -> None:
    if comment:
        fh.write(comment)
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(["B_T", "freq_THz", "height"])
    for p in peaks:
        w.writerow([repr(p.B), repr(p.freq), repr(p.height)])
