"""Command-line frontend.

Usage::

    landaupol [--config FILE] [--out DIR] [--pol active|inactive] COMMAND ...

Commands are ``zerodetune``, ``dispersion``, ``polaritons``, ``transmission``
and ``fit``.  Every file written starts with a ``#`` comment block holding the
fully resolved configuration, so ``--config <output file>`` reproduces it.

Exit codes: 0 success, 2 configuration error, 3 numerical failure,
4 data-schema error.
"""

from __future__ import annotations

import argparse
import csv
import logging
import math
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .config import Config, load_config
from .fit import AssignmentError, PeakDataset, SchemaError, assign_branches, fit, synthetic_peaks
from .hopfield import bare_frequencies, polariton_sweep
from .linalg import NumericalError
from .optics import ConfigError, extract_peaks, cavity_stack, transmission_map, write_peaks_csv
from .physics import DomainError, NoSolutionError, mode_momentum, plasmon_frequency, zero_detuning_field

log = logging.getLogger("landaupol")

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3
EXIT_SCHEMA = 4

DISPERSION_K_POINTS = 200


@dataclass(frozen=True)
class ZeroDetuningRow:
    mode: str
    k: float  # 1/m
    field: float | None  # T, None when unreachable
    min_frequency: float | None = None  # THz, set when unreachable

    def text(self) -> str:
        k_um = self.k * 1e-6
        if self.field is None:
            return f"{self.mode:<5} k = {k_um:8.4f} /um   no solution (min {self.min_frequency:.4f} THz)"
        return f"{self.mode:<5} k = {k_um:8.4f} /um   B = {self.field:.4f} T"


def _write(path: Path, cfg: Config, writer) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        fh.write(cfg.echo())
        writer(fh)
    return path


def _out_dir(cfg: Config) -> Path:
    return Path(cfg.values["output"]["dir"])


# ---------------------------------------------------------------- commands


def cmd_zerodetune(cfg: Config) -> list[ZeroDetuningRow]:
    s = cfg.sample_params()
    nu0 = cfg.values["cavity"]["nu0_THz"]
    rows = [ZeroDetuningRow("CR", 0.0, zero_detuning_field(nu0, 0.0, s))]
    for n in cfg.modes:
        k = mode_momentum(n, s)
        try:
            rows.append(ZeroDetuningRow(f"MP{n}", k, zero_detuning_field(nu0, k, s)))
        except NoSolutionError as exc:
            rows.append(ZeroDetuningRow(f"MP{n}", k, None, exc.min_frequency))
    return rows


def _write_zerodetune(cfg: Config, rows) -> Path:
    def body(fh):
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["mode", "k_per_um", "B_T", "min_freq_THz"])
        for r in rows:
            w.writerow([
                r.mode,
                repr(r.k * 1e-6),
                "" if r.field is None else repr(r.field),
                "" if r.min_frequency is None else repr(r.min_frequency),
            ])

    return _write(_out_dir(cfg) / "zerodetune.csv", cfg, body)


def cmd_dispersion(cfg: Config) -> tuple[Path, Path]:
    """Bare plasmon dispersion versus k and bare mode frequencies versus B."""
    s, c = cfg.sample_params(), cfg.couplings()
    k_max = (max(cfg.modes, default=1) + 2) * math.pi / s.slot_width
    ks = np.linspace(0.0, k_max, DISPERSION_K_POINTS)

    def k_body(fh):
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["k_per_um", "plasmon_THz"])
        for k in ks:
            w.writerow([repr(float(k) * 1e-6), repr(plasmon_frequency(float(k), s))])

    fields = cfg.field_axis()
    bare = bare_frequencies(c, fields, s)

    def b_body(fh):
        w = csv.writer(fh, lineterminator="\n")
        names = list(bare)
        w.writerow(["B_T"] + [f"{n}_THz" for n in names])
        for i, B in enumerate(fields):
            w.writerow([repr(float(B))] + [repr(float(np.broadcast_to(bare[n], fields.shape)[i])) for n in names])

    out = _out_dir(cfg)
    return _write(out / "dispersion_k.csv", cfg, k_body), _write(out / "dispersion_B.csv", cfg, b_body)


def cmd_polaritons(cfg: Config):
    fields = cfg.field_axis()
    if fields[0] <= 0:
        raise ConfigError("polaritons needs [sweep] B_min_T > 0 (B = 0 leaves a zero mode)")
    spectrum = polariton_sweep(cfg.couplings(), cfg.sample_params(), fields)
    path = _write(_out_dir(cfg) / "polaritons.csv", cfg, spectrum.to_csv)
    return spectrum, path


def cmd_transmission(cfg: Config, peaks: bool = False):
    stack = cavity_stack(
        cfg.sample_params(), cfg.couplings(), cfg.geometry(), cfg.values["output"]["polarization"]
    )
    tmap = transmission_map(stack, cfg.field_axis(), cfg.freq_axis())
    out = _out_dir(cfg)
    paths = [
        _write(out / "transmission_long.csv", cfg, tmap.write_long_csv),
        _write(out / "transmission_matrix.csv", cfg, tmap.write_matrix_csv),
    ]
    found = None
    if peaks:
        sw = cfg.values["sweep"]
        found = extract_peaks(tmap, sw["peak_prominence"], sw["max_peaks"])
        paths.append(_write(out / "peaks.csv", cfg, lambda fh: write_peaks_csv(found, fh)))
    return tmap, found, paths


def _synthetic(cfg: Config) -> PeakDataset:
    fv = cfg.values["fit"]
    fields = np.linspace(fv["synthetic_B_min_T"], fv["synthetic_B_max_T"], fv["synthetic_B_count"])
    return synthetic_peaks(
        cfg.couplings(),
        cfg.sample_params(),
        fields,
        noise=fv["synthetic_noise"],
        seed=fv["synthetic_seed"],
        min_photon_weight=fv["synthetic_min_photon_weight"],
    )


def cmd_fit(cfg: Config, peaks_csv: str | Path | None = None):
    """Fit the configured free parameters to a peak file or to synthetic peaks.

    Synthetic mode is selected by ``[fit] synthetic_seed``; the generated
    peaks are written next to the result.
    """
    out = _out_dir(cfg)
    fv = cfg.values["fit"]
    if fv["synthetic_seed"] is not None:
        peaks = _synthetic(cfg)
        _write(out / "synthetic_peaks.csv", cfg, peaks.to_csv)
    else:
        if peaks_csv is None:
            raise ConfigError("fit needs a peak CSV or --synthetic SEED")
        sw = cfg.values["sweep"]
        try:
            with open(peaks_csv, encoding="utf-8") as fh:
                peaks = PeakDataset.from_csv(fh, (sw["B_min_T"], sw["B_max_T"]))
        except OSError as exc:
            raise ConfigError(f"cannot read peak file {peaks_csv}: {exc}") from exc
    problem = cfg.fit_problem()
    result = fit(problem, peaks, max_iter=fv["max_iter"], xtol=fv["xtol_THz"])
    _write(out / "fit_result.csv", cfg, result.to_csv)
    _write(out / "fit_summary.txt", cfg, lambda fh: fh.write(result.summary()))
    if math.isfinite(result.residual_rms):
        s, c = problem.model(np.array([result.best_params[p] for p in problem.free_params]))
        spectrum = polariton_sweep(c, s, np.unique(peaks.fields))
        table = assign_branches(peaks, spectrum, fv["assign_resolution_THz"])

        def body(fh):
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["B_T", "freq_THz", "branch_label", "residual_THz", "ambiguous"])
            for a in table:
                w.writerow([repr(a.point.B), repr(a.point.freq), a.label, repr(a.residual), int(a.ambiguous)])

        _write(out / "fit_assignments.csv", cfg, body)
    return result


# ---------------------------------------------------------------- argument handling


def _global_options(parser: argparse.ArgumentParser, suppress: bool) -> None:
    default = argparse.SUPPRESS if suppress else None
    parser.add_argument("--config", default=default, help="config file or bundled name (default paper.cfg)")
    parser.add_argument("--out", default=default, help="output directory (overrides [output] dir)")
    parser.add_argument("--pol", choices=("active", "inactive"), default=default, help="circular polarization")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="landaupol", description="Multimode Landau polariton toolkit")
    _global_options(parser, suppress=False)
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, help_text):
        p = sub.add_parser(name, help=help_text)
        _global_options(p, suppress=True)
        return p

    add("zerodetune", "zero-detuning fields of CR and each MP mode")
    add("dispersion", "bare plasmon and magnetoplasmon dispersions")
    add("polaritons", "Hopfield polariton branches over the field sweep")
    p = add("transmission", "transfer-matrix transmittance map")
    p.add_argument("--peaks", action="store_true", help="also extract ridge peaks")
    p.add_argument("--passive", action="store_true", help="zero all couplings (empty cavity)")
    p = add("fit", "fit couplings to peak frequencies")
    p.add_argument("peaks_csv", nargs="?", help="CSV with columns B_T,freq_THz[,weight][,label]")
    p.add_argument("--synthetic", type=int, metavar="SEED", help="fit noisy synthetic peaks instead")
    p.add_argument("--shared-gn", action="store_true", help="fit a single g_n shared by all MP modes")
    return parser


def resolve_config(args: argparse.Namespace) -> Config:
    """Load the config and fold command-line overrides into it.

    Folding the flags in means the echoed header alone reproduces a run.
    """
    cfg = load_config(args.config or "paper.cfg").copy()
    if args.out is not None:
        cfg.values["output"]["dir"] = args.out
    if args.pol is not None:
        cfg.values["output"]["polarization"] = args.pol
    if getattr(args, "passive", False):
        cfg = cfg.zero_couplings()
    if getattr(args, "shared_gn", False):
        cfg = cfg.share_gn()
    if getattr(args, "synthetic", None) is not None:
        if args.synthetic < 0:
            raise ConfigError("--synthetic seed must be >= 0")
        cfg.values["fit"]["synthetic_seed"] = args.synthetic
    return cfg


def run(args: argparse.Namespace) -> int:
    cfg = resolve_config(args)
    cmd = args.command
    if cmd == "zerodetune":
        rows = cmd_zerodetune(cfg)
        for r in rows:
            print(r.text())
        _write_zerodetune(cfg, rows)
    elif cmd == "dispersion":
        for path in cmd_dispersion(cfg):
            print(path)
    elif cmd == "polaritons":
        spectrum, path = cmd_polaritons(cfg)
        print(f"{len(spectrum.labels)} positive branches ({', '.join(spectrum.labels)}) -> {path}")
    elif cmd == "transmission":
        _, found, paths = cmd_transmission(cfg, peaks=args.peaks)
        if found is not None:
            print(f"{len(found)} peaks")
        for path in paths:
            print(path)
    elif cmd == "fit":
        if args.peaks_csv is not None and args.synthetic is not None:
            raise ConfigError("give either a peak CSV or --synthetic, not both")
        result = cmd_fit(cfg, args.peaks_csv)
        print(result.summary(), end="")
        if not result.converged:
            print("fit did not converge; partial result written", file=sys.stderr)
            return EXIT_NUMERICAL
    return EXIT_OK


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        return run(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except DomainError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (SchemaError, AssignmentError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_SCHEMA
    except (NumericalError, ArithmeticError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
