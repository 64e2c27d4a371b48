"""Least-squares extraction of coupling strengths from peak frequencies.

The objective re-assigns every peak to its nearest polariton branch on each
evaluation, so it is only piecewise smooth; minimisation uses a bounded
Nelder-Mead simplex.
"""

from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass, field, replace
from typing import Callable, Mapping, Sequence

import numpy as np

from .hopfield import CouplingSet, PolaritonSpectrum, branch_frequencies, branch_labels
from .linalg import NumericalError
from .physics import DomainError, SampleParams

log = logging.getLogger(__name__)

PENALTY = 1e6


class AssignmentError(ValueError):
    def __init__(self, message: str, points=()):
        super().__init__(message)
        self.points = list(points)


class SchemaError(ValueError):
    """Malformed peak CSV; ``rows`` lists offending 1-based line numbers."""

    def __init__(self, message: str, rows=()):
        super().__init__(message)
        self.rows = list(rows)


OPTIONAL_COLUMNS = ("weight", "label", "height")


@dataclass(frozen=True)
class PeakPoint:
    B: float
    freq: float
    weight: float = 1.0
    label: str | None = None


@dataclass
class PeakDataset:
    points: list[PeakPoint]

    def __post_init__(self):
        if not self.points:
            raise ValueError("a peak dataset needs at least one point")
        for p in self.points:
            if not (math.isfinite(p.B) and math.isfinite(p.freq) and math.isfinite(p.weight)):
                raise ValueError(f"non-finite peak {p}")
            if p.weight < 0:
                raise ValueError(f"negative weight in {p}")

    def __len__(self):
        return len(self.points)

    @property
    def fields(self) -> np.ndarray:
        return np.array([p.B for p in self.points])

    @property
    def freqs(self) -> np.ndarray:
        return np.array([p.freq for p in self.points])

    @property
    def weights(self) -> np.ndarray:
        return np.array([p.weight for p in self.points])

    @classmethod
    def from_csv(cls, fh, field_range: tuple[float, float] | None = None) -> PeakDataset:
        """Read ``B_T, freq_THz`` plus optional ``weight``, ``label`` and ``height``.

        '#' lines are comments.  ``height`` (written by the peak extractor)
        is accepted and ignored.
        """
        lines = [(i, ln) for i, ln in enumerate(fh, start=1) if ln.strip() and not ln.lstrip().startswith("#")]
        if not lines:
            raise SchemaError("peak file is empty")
        reader = csv.reader(ln for _, ln in lines)
        header = [h.strip() for h in next(reader)]
        if header[:2] != ["B_T", "freq_THz"] or any(h not in OPTIONAL_COLUMNS for h in header[2:]):
            raise SchemaError(f"bad header {header}; expected B_T,freq_THz[,weight][,label][,height]", [lines[0][0]])
        points, bad, outside = [], [], []
        for (lineno, _), row in zip(lines[1:], reader):
            rec = dict(zip(header, (r.strip() for r in row)))
            try:
                if len(row) != len(header):
                    raise ValueError
                p = PeakPoint(
                    float(rec["B_T"]),
                    float(rec["freq_THz"]),
                    float(rec["weight"]) if rec.get("weight") else 1.0,
                    rec.get("label") or None,
                )
                if not (math.isfinite(p.B) and math.isfinite(p.freq) and p.weight >= 0):
                    raise ValueError
            except ValueError:
                bad.append(lineno)
                continue
            if field_range and not (field_range[0] <= p.B <= field_range[1]):
                outside.append(lineno)
            points.append(p)
        if bad:
            raise SchemaError(f"unparseable rows at lines {bad}", bad)
        if outside:
            raise SchemaError(
                f"rows at lines {outside} lie outside the field range {field_range}", outside
            )
        if not points:
            raise SchemaError("peak file has no data rows")
        return cls(points)

    def to_csv(self, fh, comment: str | None = None) -> None:
        if comment:
            fh.write(comment)
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["B_T", "freq_THz", "weight", "label"])
        for p in self.points:
            w.writerow([repr(p.B), repr(p.freq), repr(p.weight), p.label or ""])


@dataclass(frozen=True)
class Assignment:
    point: PeakPoint
    label: str
    residual: float  # peak - branch, THz
    ambiguous: bool


def _assign_row(freq: float, row: np.ndarray, resolution: float, hint_index: int | None):
    if hint_index is not None:
        return hint_index, False
    d = np.abs(row - freq)
    order = np.argsort(d, kind="stable")  # stable -> lower branch wins exact ties
    best = int(order[0])
    ambiguous = len(order) > 1 and d[order[1]] - d[best] <= 2.0 * resolution
    return best, bool(ambiguous)


def assign_branches(
    peaks: PeakDataset, spectrum: PolaritonSpectrum, resolution: float = 1e-3
) -> list[Assignment]:
    """Match each peak to the nearest branch at the nearest sweep field.

    A point is ambiguous when the two closest branches are within
    ``2 * resolution`` (THz) of being equidistant; exact ties go to the
    lower branch.  Label hints override the distance rule.
    """
    fields = np.asarray(spectrum.field_values)
    F = spectrum.frequencies()
    step = float(np.max(np.diff(fields))) if fields.size > 1 else 0.0
    slack = 1e-12 * max(1.0, float(np.max(np.abs(fields))))
    out, outside = [], []
    for p in peaks.points:
        i = int(np.argmin(np.abs(fields - p.B)))
        if abs(fields[i] - p.B) > step + slack:
            outside.append(p)
            continue
        hint = None
        if p.label is not None:
            if p.label not in spectrum.labels:
                raise AssignmentError(f"unknown branch hint {p.label!r}", [p])
            hint = spectrum.labels.index(p.label)
        j, amb = _assign_row(p.freq, F[i], resolution, hint)
        out.append(Assignment(p, spectrum.labels[j], p.freq - F[i, j], amb))
    if outside:
        raise AssignmentError(f"{len(outside)} peak(s) outside the spectrum field range", outside)
    return out


# ---------------------------------------------------------------- problem definition

COUPLING_PARAMS = ("g", "g_shared")
SAMPLE_PARAMS = {"mass_ratio": "effective_mass_ratio", "eps_r": "rel_permittivity"}


def _param_kind(name: str) -> str:
    if name in COUPLING_PARAMS or (name.startswith("g") and name[1:].isdigit()):
        return "coupling"
    if name == "nu0":
        return "nu0"
    if name in SAMPLE_PARAMS:
        return "sample"
    raise ValueError(f"unknown fit parameter {name!r}")


@dataclass
class FitProblem:
    """Free parameters with bounds and initial guesses.

    Parameter names: ``g`` (CR), ``g1``, ``g3``, ... (individual MP modes),
    ``g_shared`` (one value for every MP mode), ``nu0``, ``mass_ratio``,
    ``eps_r``.  With ``normalized=True`` coupling parameters are fractions of
    the fixed ``nu0``; otherwise they are in THz.
    """

    free_params: list[str]
    bounds: Mapping[str, tuple[float, float]]
    initial: Mapping[str, float]
    sample: SampleParams
    couplings: CouplingSet
    normalized: bool = False

    def __post_init__(self):
        if not self.free_params:
            raise ValueError("at least one free parameter is required")
        if len(set(self.free_params)) != len(self.free_params):
            raise ValueError("duplicate free parameters")
        for name in self.free_params:
            kind = _param_kind(name)
            if kind == "coupling" and name not in COUPLING_PARAMS:
                if int(name[1:]) not in self.couplings.mp_couplings:
                    raise ValueError(f"{name} refers to a mode that is not configured")
            if name not in self.bounds or name not in self.initial:
                raise ValueError(f"{name} needs bounds and an initial guess")
            lo, hi = self.bounds[name]
            if not (math.isfinite(lo) and math.isfinite(hi) and lo < hi):
                raise ValueError(f"bounds for {name} must be finite with lower < upper")
            if not lo <= self.initial[name] <= hi:
                raise ValueError(f"initial guess for {name} lies outside its bounds")
        if "g_shared" in self.free_params and any(
            n != "g_shared" and n.startswith("g") and n[1:].isdigit() for n in self.free_params
        ):
            raise ValueError("g_shared cannot be combined with individual g_n")
        if "nu0" in self.free_params and self.normalized:
            raise ValueError("normalized couplings need a fixed nu0")

    @property
    def lower(self) -> np.ndarray:
        return np.array([self.bounds[n][0] for n in self.free_params])

    @property
    def upper(self) -> np.ndarray:
        return np.array([self.bounds[n][1] for n in self.free_params])

    @property
    def x0(self) -> np.ndarray:
        return np.array([self.initial[n] for n in self.free_params])

    def unit_scale(self) -> np.ndarray:
        """Factor converting each parameter to THz (1 for dimensionless ones)."""
        nu0 = self.couplings.cavity_frequency
        return np.array(
            [nu0 if self.normalized and _param_kind(n) == "coupling" else 1.0 for n in self.free_params]
        )

    def model(self, params) -> tuple[SampleParams, CouplingSet]:
        values = dict(zip(self.free_params, map(float, params)))
        c, s = self.couplings, self.sample
        nu0 = values.get("nu0", c.cavity_frequency)
        scale = c.cavity_frequency if self.normalized else 1.0
        g = values["g"] * scale if "g" in values else c.cr_coupling
        gn = dict(c.mp_couplings)
        for n in gn:
            if "g_shared" in values:
                gn[n] = values["g_shared"] * scale
            elif f"g{n}" in values:
                gn[n] = values[f"g{n}"] * scale
        c = CouplingSet(nu0, g, gn)
        sample_kw = {SAMPLE_PARAMS[k]: v for k, v in values.items() if k in SAMPLE_PARAMS}
        if sample_kw:
            s = replace(s, **sample_kw)
        return s, c

    def describe(self, params) -> dict[str, float]:
        """Resolved model values: couplings in THz and as fractions of nu0."""
        s, c = self.model(params)
        out = {"nu0_THz": c.cavity_frequency, "g_THz": c.cr_coupling, "g/nu0": c.cr_coupling / c.cavity_frequency}
        for n, g in c.mp_couplings.items():
            out[f"g{n}_THz"] = g
            out[f"g{n}/nu0"] = g / c.cavity_frequency
        out["mass_ratio"] = s.effective_mass_ratio
        out["eps_r"] = s.rel_permittivity
        return out


@dataclass
class FitResult:
    best_params: dict[str, float]
    residual_rms: float
    per_point_residuals: np.ndarray
    iterations: int
    converged: bool
    objective: float = float("nan")
    labels: list[str] = field(default_factory=list)
    model: dict[str, float] = field(default_factory=dict)

    def summary(self) -> str:
        lines = [
            "fit result",
            f"  converged       {self.converged}",
            f"  iterations      {self.iterations}",
            f"  objective       {self.objective:.6e}",
            f"  residual rms    {self.residual_rms:.6e} THz",
        ]
        for k, v in self.best_params.items():
            lines.append(f"  {k:<15} {v:.8g}")
        for k, v in self.model.items():
            lines.append(f"  {k:<15} {v:.8g}")
        return "\n".join(lines) + "\n"

    def to_csv(self, fh, comment: str | None = None) -> None:
        if comment:
            fh.write(comment)
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["quantity", "value"])
        for k, v in self.best_params.items():
            w.writerow([k, repr(float(v))])
        for k, v in self.model.items():
            w.writerow([k, repr(float(v))])
        w.writerow(["residual_rms_THz", repr(self.residual_rms)])
        w.writerow(["objective", repr(self.objective)])
        w.writerow(["iterations", self.iterations])
        w.writerow(["converged", int(self.converged)])


# ---------------------------------------------------------------- objective


def _model_residuals(problem: FitProblem, peaks: PeakDataset, params):
    s, c = problem.model(params)
    fields = peaks.fields
    uniq, inv = np.unique(fields, return_inverse=True)
    F = branch_frequencies(c, s, uniq)
    if np.isnan(F).any():
        raise NumericalError("wrong number of positive branches")
    labels = branch_labels(F.shape[1])
    resid = np.empty(len(peaks))
    chosen = []
    for k, p in enumerate(peaks.points):
        row = F[inv[k]]
        hint = labels.index(p.label) if p.label in labels else None
        j, _ = _assign_row(p.freq, row, 0.0, hint)
        resid[k] = p.freq - row[j]
        chosen.append(labels[j])
    return resid, chosen


def objective(problem: FitProblem, peaks: PeakDataset, params) -> float:
    """Weighted sum of squared peak-branch distances (THz^2)."""
    try:
        resid, _ = _model_residuals(problem, peaks, params)
    except (NumericalError, DomainError, np.linalg.LinAlgError) as exc:
        log.warning("objective evaluation failed at %s: %s", list(map(float, params)), exc)
        return PENALTY
    return float(np.sum(peaks.weights * resid * resid))


# ---------------------------------------------------------------- optimizer


@dataclass
class SimplexResult:
    x: np.ndarray
    fun: float
    iterations: int
    converged: bool


def nelder_mead(
    fun: Callable[[np.ndarray], float],
    x0: Sequence[float],
    lower: Sequence[float],
    upper: Sequence[float],
    scale: Sequence[float] | None = None,
    xtol: float = 1e-6,
    max_iter: int = 2000,
    initial_step: float = 0.05,
) -> SimplexResult:
    """Bounded Nelder-Mead (reflection 1, expansion 2, contraction 0.5, shrink 0.5).

    Trial points are projected onto the box.  Converged once every vertex is
    within ``xtol`` of the best one, measured in ``scale``-weighted units.
    """
    lower = np.asarray(lower, float)
    upper = np.asarray(upper, float)
    scale = np.ones_like(lower) if scale is None else np.asarray(scale, float)
    proj = lambda x: np.clip(x, lower, upper)  # noqa: E731
    x0 = proj(np.asarray(x0, float))
    n = x0.size
    simplex = [x0]
    for i in range(n):
        step = initial_step * (upper[i] - lower[i])
        v = x0.copy()
        v[i] = v[i] + step if v[i] + step <= upper[i] else v[i] - step
        simplex.append(proj(v))
    simplex = np.array(simplex)
    fvals = np.array([fun(v) for v in simplex])
    it = 0
    converged = False
    while True:
        order = np.argsort(fvals, kind="stable")
        simplex, fvals = simplex[order], fvals[order]
        spread = np.max(np.abs((simplex[1:] - simplex[0]) * scale))
        if spread < xtol:
            converged = True
            break
        if it >= max_iter:
            break
        it += 1
        centroid = simplex[:-1].mean(axis=0)
        worst = simplex[-1]
        xr = proj(centroid + (centroid - worst))
        fr = fun(xr)
        if fr < fvals[0]:
            xe = proj(centroid + 2.0 * (centroid - worst))
            fe = fun(xe)
            simplex[-1], fvals[-1] = (xe, fe) if fe < fr else (xr, fr)
            continue
        if fr < fvals[-2]:
            simplex[-1], fvals[-1] = xr, fr
            continue
        if fr < fvals[-1]:
            xc = proj(centroid + 0.5 * (xr - centroid))
            fc = fun(xc)
            if fc <= fr:
                simplex[-1], fvals[-1] = xc, fc
                continue
        else:
            xc = proj(centroid + 0.5 * (worst - centroid))
            fc = fun(xc)
            if fc < fvals[-1]:
                simplex[-1], fvals[-1] = xc, fc
                continue
        best = simplex[0]
        simplex[1:] = best + 0.5 * (simplex[1:] - best)
        fvals[1:] = [fun(v) for v in simplex[1:]]
    return SimplexResult(simplex[0].copy(), float(fvals[0]), it, converged)


def fit(problem: FitProblem, peaks: PeakDataset, max_iter: int = 2000, xtol: float = 1e-6) -> FitResult:
    """Minimise :func:`objective` from ``problem.x0``; deterministic."""
    res = nelder_mead(
        lambda x: objective(problem, peaks, x),
        problem.x0,
        problem.lower,
        problem.upper,
        scale=problem.unit_scale(),
        xtol=xtol,
        max_iter=max_iter,
    )
    try:
        resid, labels = _model_residuals(problem, peaks, res.x)
    except NumericalError:
        resid, labels = np.full(len(peaks), np.nan), []
    w = peaks.weights
    wsum = w.sum()
    rms = float(np.sqrt(np.sum(w * resid**2) / wsum)) if wsum > 0 else 0.0
    return FitResult(
        best_params=dict(zip(problem.free_params, map(float, res.x))),
        residual_rms=rms,
        per_point_residuals=resid,
        iterations=res.iterations,
        converged=res.converged,
        objective=res.fun,
        labels=labels,
        model=problem.describe(res.x),
    )


# ---------------------------------------------------------------- synthetic data


def synthetic_peaks(
    c: CouplingSet,
    s: SampleParams,
    fields: Sequence[float],
    noise: float = 0.0,
    seed: int | None = None,
    branches: Sequence[str] | None = None,
    min_photon_weight: float | None = None,
) -> PeakDataset:
    """Peaks on the Hopfield branches, optionally with relative Gaussian noise.

    ``branches`` restricts the labels used; ``min_photon_weight`` drops
    branch points whose photon weight is too small to be seen.
    """
    from .hopfield import polariton_sweep

    spec = polariton_sweep(c, s, np.asarray(fields, float))
    rng = np.random.default_rng(seed)
    pts = []
    for B, recs in zip(spec.field_values, spec.branches):
        for r in recs:
            if branches is not None and r.label not in branches:
                continue
            if min_photon_weight is not None and r.photon_weight < min_photon_weight:
                continue
            pts.append((float(B), r.frequency))
    freqs = np.array([f for _, f in pts])
    if noise:
        freqs = freqs * (1.0 + noise * rng.standard_normal(freqs.size))
    return PeakDataset([PeakPoint(B, float(f)) for (B, _), f in zip(pts, freqs)])
