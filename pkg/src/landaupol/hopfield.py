"""Multimode Hopfield model of a cavity photon coupled to CR and magnetoplasmons.

The CR-active dynamical matrix acts on the operator set
``(a+, a-^dag, b, c_1, c_3, ...)``.  Its right eigenvectors are the Bogoliubov
coefficients ``(w, y, x, x_1, x_3, ...)`` of the polariton annihilation
operator, normalised so that ``|w|^2 - |y|^2 + |x|^2 + sum |x_n|^2 = 1``.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from types import MappingProxyType
from typing import Iterable, Mapping, Sequence

import numpy as np
from scipy.optimize import linear_sum_assignment

from . import linalg
from .linalg import NumericalError
from .physics import (
    DomainError,
    SampleParams,
    cyclotron_frequency,
    mode_momentum,
    plasmon_frequency,
)

POSITIVE_THRESHOLD = 1e-9  # x nu0


@dataclass(frozen=True)
class CouplingSet:
    """Bare cavity frequency and zero-detuning couplings, all in THz."""

    cavity_frequency: float
    cr_coupling: float
    mp_couplings: Mapping[int, float] = field(default_factory=dict)

    def __post_init__(self):
        if not (math.isfinite(self.cavity_frequency) and self.cavity_frequency > 0):
            raise DomainError(f"cavity_frequency must be > 0, got {self.cavity_frequency!r}")
        if not (math.isfinite(self.cr_coupling) and self.cr_coupling >= 0):
            raise DomainError(f"cr_coupling must be >= 0, got {self.cr_coupling!r}")
        ordered = {}
        for n in sorted(self.mp_couplings):
            g = self.mp_couplings[n]
            if isinstance(n, bool) or not isinstance(n, int) or n < 1 or n % 2 == 0:
                raise DomainError(f"mode index must be an odd positive integer, got {n!r}")
            if not (math.isfinite(g) and g >= 0):
                raise DomainError(f"coupling of mode {n} must be >= 0, got {g!r}")
            ordered[n] = float(g)
        object.__setattr__(self, "mp_couplings", MappingProxyType(ordered))

    @classmethod
    def normalized(cls, nu0: float, g: float, gn: Mapping[int, float] | None = None):
        """Build from couplings given as fractions of ``nu0``."""
        gn = gn or {}
        return cls(nu0, g * nu0, {n: v * nu0 for n, v in gn.items()})

    @property
    def modes(self) -> tuple[int, ...]:
        return tuple(self.mp_couplings)

    @property
    def n_matter(self) -> int:
        return 1 + len(self.mp_couplings)

    @property
    def dimension(self) -> int:
        return 2 + self.n_matter

    def scaled(self, factor: float) -> CouplingSet:
        return CouplingSet(
            self.cavity_frequency,
            self.cr_coupling * factor,
            {n: g * factor for n, g in self.mp_couplings.items()},
        )

    def replace(self, **kw) -> CouplingSet:
        args = dict(
            cavity_frequency=self.cavity_frequency,
            cr_coupling=self.cr_coupling,
            mp_couplings=dict(self.mp_couplings),
        )
        args.update(kw)
        return CouplingSet(**args)


@dataclass(frozen=True)
class EffectiveCouplings:
    gbar: float
    gbar_n: Mapping[int, float]


@dataclass(frozen=True)
class HopfieldMatrix:
    entries: np.ndarray
    field_point: float
    polarization: str = "active"

    @property
    def dimension(self) -> int:
        return self.entries.shape[0]


@dataclass(frozen=True)
class Branch:
    label: str
    frequency: float
    coefficients: np.ndarray  # (w, y, x, x_1, x_3, ...)

    @property
    def w(self) -> complex:
        return self.coefficients[0]

    @property
    def y(self) -> complex:
        return self.coefficients[1]

    @property
    def x(self) -> complex:
        return self.coefficients[2]

    @property
    def x_n(self) -> np.ndarray:
        return self.coefficients[3:]

    @property
    def photon_weight(self) -> float:
        return float(abs(self.coefficients[0]) ** 2)

    @property
    def bogoliubov_norm(self) -> float:
        c2 = np.abs(self.coefficients) ** 2
        return float(c2[0] - c2[1] + c2[2:].sum())


def branch_labels(count: int) -> list[str]:
    return ["LP"] + [f"UP{i}" for i in range(1, count)]


@dataclass
class PolaritonSpectrum:
    """Positive-frequency CR-active branches over a field sweep.

    ``branches[i]`` holds the records at ``field_values[i]`` sorted by
    frequency; ``labels`` is the fixed set of branch names.
    """

    field_values: np.ndarray
    labels: list[str]
    branches: list[list[Branch]]
    modes: tuple[int, ...] = ()

    def frequencies(self) -> np.ndarray:
        """(n_fields, n_branches) frequencies, columns in ``labels`` order."""
        out = np.empty((len(self.field_values), len(self.labels)))
        col = {lab: j for j, lab in enumerate(self.labels)}
        for i, recs in enumerate(self.branches):
            for r in recs:
                out[i, col[r.label]] = r.frequency
        return out

    def branch(self, label: str) -> np.ndarray:
        return self.frequencies()[:, self.labels.index(label)]

    def photon_weights(self) -> np.ndarray:
        out = np.empty((len(self.field_values), len(self.labels)))
        col = {lab: j for j, lab in enumerate(self.labels)}
        for i, recs in enumerate(self.branches):
            for r in recs:
                out[i, col[r.label]] = r.photon_weight
        return out

    def csv_header(self) -> list[str]:
        return ["B_T", "branch_label", "freq_THz", "w2", "y2", "x2"] + [
            f"x{n}_2" for n in self.modes
        ]

    def to_csv(self, fh, comment: str | None = None) -> None:
        if comment:
            fh.write(comment)
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(self.csv_header())
        for B, recs in zip(self.field_values, self.branches):
            for r in recs:
                c2 = np.abs(r.coefficients) ** 2
                writer.writerow([repr(float(B)), r.label, repr(r.frequency)] + [repr(float(v)) for v in c2])

    def to_csv_string(self) -> str:
        buf = io.StringIO()
        self.to_csv(buf)
        return buf.getvalue()


def matter_frequencies(c: CouplingSet, B, s: SampleParams) -> np.ndarray:
    """Bare matter frequencies ``(nu_c, nu_MP_1, nu_MP_3, ...)``; B may be an array."""
    B = np.asarray(B, dtype=float)
    if np.any(~np.isfinite(B)) or np.any(B < 0):
        raise DomainError("magnetic field must be finite and >= 0")
    nu_c = B * cyclotron_frequency(1.0, s)
    cols = [nu_c]
    for n in c.modes:
        nu_p = plasmon_frequency(mode_momentum(n, s), s)
        cols.append(np.sqrt(nu_p * nu_p + nu_c * nu_c))
    return np.stack(cols, axis=-1)


def bare_frequencies(c: CouplingSet, B, s: SampleParams) -> dict[str, np.ndarray]:
    """Uncoupled cavity, CR and MP frequencies (THz) keyed by mode name."""
    m = matter_frequencies(c, B, s)
    out = {"cavity": np.full(np.shape(B), c.cavity_frequency), "CR": m[..., 0]}
    for j, n in enumerate(c.modes, start=1):
        out[f"MP{n}"] = m[..., j]
    return out


def _coupling_vector(c: CouplingSet) -> np.ndarray:
    return np.array([c.cr_coupling] + list(c.mp_couplings.values()))


def effective_couplings(c: CouplingSet, B: float, s: SampleParams) -> EffectiveCouplings:
    """Field-dependent couplings ``g * sqrt(nu_matter / nu0)``."""
    gbar = _coupling_vector(c) * np.sqrt(matter_frequencies(c, B, s) / c.cavity_frequency)
    return EffectiveCouplings(
        float(gbar[0]), MappingProxyType({n: float(g) for n, g in zip(c.modes, gbar[1:])})
    )


def diamagnetic_coefficient(c: CouplingSet) -> float:
    g = _coupling_vector(c)
    return float(g @ g) / c.cavity_frequency


def _assemble(nu0: float, D: float, gbar: np.ndarray, matter: np.ndarray) -> np.ndarray:
    """Stack of active matrices; ``gbar`` and ``matter`` have shape (..., n_matter)."""
    shape = matter.shape[:-1]
    nm = matter.shape[-1]
    m = np.zeros(shape + (2 + nm, 2 + nm), dtype=complex)
    m[..., 0, 0] = nu0 + D
    m[..., 0, 1] = -D
    m[..., 1, 0] = D
    m[..., 1, 1] = -nu0 - D
    ig = 1j * gbar
    m[..., 0, 2:] = ig
    m[..., 1, 2:] = ig
    m[..., 2:, 0] = -ig
    m[..., 2:, 1] = ig
    idx = np.arange(2, 2 + nm)
    m[..., idx, idx] = matter
    return m


def _conjugate_set(m: np.ndarray) -> np.ndarray:
    # (a-, a+^dag, b^dag, c_n^dag): conjugated equations with the photon rows swapped
    p = np.arange(m.shape[-1])
    p[[0, 1]] = [1, 0]
    return -np.conj(m[..., p, :][..., :, p])


def _matrices(c: CouplingSet, fields, s: SampleParams, polarization: str = "active"):
    matter = matter_frequencies(c, fields, s)
    gbar = _coupling_vector(c) * np.sqrt(matter / c.cavity_frequency)
    m = _assemble(c.cavity_frequency, diamagnetic_coefficient(c), gbar, matter)
    if polarization == "inactive":
        return _conjugate_set(m)
    if polarization != "active":
        raise ValueError(f"polarization must be 'active' or 'inactive', got {polarization!r}")
    return m


def build_matrix(
    c: CouplingSet, B: float, s: SampleParams, polarization: str = "active"
) -> HopfieldMatrix:
    """Hopfield matrix at field B.

    With ``polarization="inactive"`` the matrix of the conjugate operator set
    ``(a-, a+^dag, b^dag, c_n^dag)`` is returned; its spectrum is the image of
    the active spectrum under ``lambda -> -conj(lambda)``.
    """
    return HopfieldMatrix(_matrices(c, float(B), s, polarization), float(B), polarization)


def eigendecompose(m: HopfieldMatrix | np.ndarray, tol: float = 1e-12, method: str = "lapack"):
    """Full eigenspectrum, sorted by real part; vectors are unit-norm columns.

    Raises :class:`NumericalError` if any pair violates
    ``||M v - lambda v|| <= tol * ||M||``.
    """
    a = m.entries if isinstance(m, HopfieldMatrix) else np.asarray(m, dtype=complex)
    if a.shape[-1] > 16:
        raise ValueError("eigendecompose is meant for matrices of dimension <= 16")
    return linalg.eig(a, tol=tol, method=method)


def metric(dim: int) -> np.ndarray:
    eta = np.ones(dim)
    eta[1] = -1.0
    return eta


def _normalize(vec: np.ndarray, B: float) -> np.ndarray:
    eta = metric(vec.shape[0])
    norm = float(np.sum(eta * np.abs(vec) ** 2))
    if norm <= 0:
        raise NumericalError(f"non-positive Bogoliubov norm {norm:.3e} at B = {B} T")
    vec = vec / math.sqrt(norm)
    ref = vec[np.argmax(np.abs(vec))]
    return vec * (abs(ref) / ref)


def positive_branches(values, vectors, nu0: float, B: float) -> tuple[np.ndarray, np.ndarray]:
    keep = values.real > POSITIVE_THRESHOLD * nu0
    freqs = values.real[keep]
    vecs = np.stack([_normalize(v, B) for v in vectors[:, keep].T], axis=0)
    return freqs, vecs


def _label_by_continuity(freqs: list[np.ndarray], labels: list[str]) -> list[list[int]]:
    """For each field point, the label index of each sorted branch."""
    n = len(labels)
    assignment = [list(range(n))]
    prev = freqs[0]
    order_penalty = 1e-12 * (1.0 + float(np.max(np.abs(prev))))
    for cur in freqs[1:]:
        # prev is indexed by label, cur by sort position
        cost = np.abs(prev[:, None] - cur[None, :])
        cost += order_penalty * np.abs(np.arange(n)[:, None] - np.arange(n)[None, :])
        rows, cols = linear_sum_assignment(cost)
        lab_of = [0] * n
        new_prev = np.empty(n)
        for lab, pos in zip(rows, cols):
            lab_of[pos] = lab
            new_prev[lab] = cur[pos]
        assignment.append(lab_of)
        prev = new_prev
    return assignment


def polariton_sweep(
    c: CouplingSet,
    s: SampleParams,
    fields: Sequence[float],
    tol: float = 1e-12,
    method: str = "lapack",
) -> PolaritonSpectrum:
    """Diagonalise at every field and label positive branches by continuity.

    Fields must be strictly positive and ascending; at B = 0 the CR row
    decouples to a zero eigenvalue and branch counting is ill-defined.
    """
    fields = np.asarray(fields, dtype=float)
    if fields.ndim != 1 or fields.size == 0:
        raise ValueError("fields must be a non-empty 1-D sequence")
    if np.any(fields <= 0):
        raise DomainError("polariton_sweep needs fields > 0 (B = 0 leaves a zero mode)")
    if np.any(np.diff(fields) <= 0):
        raise ValueError("fields must be strictly ascending")
    mats = _matrices(c, fields, s)
    try:
        values, vectors = linalg.eig(mats, tol=tol, method=method)
    except NumericalError as exc:
        bad = _first_failure(fields, mats, tol, method)
        raise NumericalError(f"{exc} (first failing field B = {bad} T)", exc.residual) from exc
    expected = c.n_matter + 1
    labels = branch_labels(expected)
    per_field = []
    for B, vals, vecs in zip(fields, values, vectors):
        f, v = positive_branches(vals, vecs, c.cavity_frequency, B)
        if f.size != expected:
            raise NumericalError(
                f"expected {expected} positive branches at B = {B} T, found {f.size}"
            )
        per_field.append((f, v))
    lab_idx = _label_by_continuity([f for f, _ in per_field], labels)
    branches = [
        [Branch(labels[li], float(fr), vec) for li, fr, vec in zip(lab, f, v)]
        for lab, (f, v) in zip(lab_idx, per_field)
    ]
    return PolaritonSpectrum(fields, labels, branches, c.modes)


def _first_failure(fields, mats, tol, method):
    for B, m in zip(fields, mats):
        try:
            linalg.eig(m, tol=tol, method=method)
        except NumericalError:
            return float(B)
    return None


def branch_frequencies(c: CouplingSet, s: SampleParams, fields: Iterable[float]) -> np.ndarray:
    """Sorted positive eigenfrequencies, shape (n_fields, n_matter + 1).

    Eigenvalue-only fast path used inside the fitter; rows with the wrong
    number of positive eigenvalues are filled with NaN.
    """
    fields = np.atleast_1d(np.asarray(fields, dtype=float))
    vals = np.linalg.eigvals(_matrices(c, fields, s)).real
    vals.sort(axis=-1)
    keep = vals > POSITIVE_THRESHOLD * c.cavity_frequency
    n = c.n_matter + 1
    out = np.full((fields.size, n), np.nan)
    ok = keep.sum(axis=-1) == n
    out[ok] = vals[ok][:, -n:]
    return out
