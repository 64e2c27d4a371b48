"""Sectioned key-value configuration with explicit units in key names.

Values are kept in the units of their key names (``slot_width_um`` in um,
``nu0_THz`` in THz); couplings given with ``normalized = true`` are turned
into THz once, at load.  :meth:`Config.to_text` writes the fully resolved
configuration, which reloads to identical values.
"""

from __future__ import annotations

import configparser
import copy
import re
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Any, Callable

import numpy as np

from .fit import FitProblem
from .hopfield import CouplingSet
from .optics import CavityGeometry, ConfigError
from .physics import DomainError, SampleParams, mobility_lifetime

ECHO_BEGIN = "# --- landaupol config ---"
ECHO_END = "# --- end config ---"


def _float(text: str) -> float:
    return float(text)


def _int(text: str) -> int:
    return int(text)


def _bool(text: str) -> bool:
    t = text.strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _floats(text: str) -> tuple[float, ...]:
    return tuple(float(t) for t in text.replace(",", " ").split())


def _ints(text: str) -> tuple[int, ...]:
    return tuple(int(t) for t in text.replace(",", " ").split())


def _names(text: str) -> tuple[str, ...]:
    return tuple(t for t in text.replace(",", " ").split())


def _str(text: str) -> str:
    return text.strip()


positive = (lambda v: v > 0, "must be > 0")
nonneg = (lambda v: v >= 0, "must be >= 0")
count = (lambda v: v >= 1, "must be >= 1")
anything = (lambda v: True, "")


@dataclass(frozen=True)
class Key:
    parse: Callable[[str], Any]
    default: Any = None
    check: tuple = anything
    required: bool = False


SCHEMA: dict[str, dict[str, Key]] = {
    "sample": {
        "ne_per_cm2": Key(_float, check=positive, required=True),
        "mass_ratio": Key(_float, check=positive, required=True),
        "eps_r": Key(_float, check=positive, required=True),
        "slot_width_um": Key(_float, check=positive, required=True),
        "qw_thickness_nm": Key(_float, 30.0, positive),
        "mobility_cm2_per_Vs": Key(_float, 1.2e6, positive),
        "cr_lifetime_ps": Key(_float, None, positive),
        "mp_lifetime_ps": Key(_float, 1.2, positive),
    },
    "cavity": {
        "nu0_THz": Key(_float, check=positive, required=True),
        "L_eff_um": Key(_float, 84.2, positive),
        "gaas_thickness_um": Key(_float, 22.35, positive),
        "gaas_value": Key(_float, 3.6, positive),
        "gaas_value_is_index": Key(_bool, False),
        "gold_thickness_nm": Key(_float, 10.0, positive),
        "gold_plasma_THz": Key(_float, 2180.0, positive),
        "gold_scattering_THz": Key(_float, 6.45, positive),
    },
    "couplings": {
        "normalized": Key(_bool, False),
        "g": Key(_float, 0.0, nonneg),
        "mp_modes": Key(_ints, None),
    },
    "sweep": {
        "B_min_T": Key(_float, 0.01, nonneg),
        "B_max_T": Key(_float, 7.0, positive),
        "B_count": Key(_int, 200, count),
        "freq_min_THz": Key(_float, 0.2, positive),
        "freq_max_THz": Key(_float, 1.6, positive),
        "freq_count": Key(_int, 400, count),
        "peak_prominence": Key(_float, 0.05, positive),
        "max_peaks": Key(_int, 6, count),
    },
    "fit": {
        "free": Key(_names, ("g", "g_shared")),
        "max_iter": Key(_int, 2000, count),
        "xtol_THz": Key(_float, 1e-6, positive),
        "synthetic_seed": Key(_int, None, nonneg),
        "synthetic_noise": Key(_float, 0.005, nonneg),
        "synthetic_B_min_T": Key(_float, 0.25, positive),
        "synthetic_B_max_T": Key(_float, 4.0, positive),
        "synthetic_B_count": Key(_int, 24, count),
        "synthetic_min_photon_weight": Key(_float, 0.05, nonneg),
        "assign_resolution_THz": Key(_float, 1e-3, positive),
    },
    "output": {
        "dir": Key(_str, "out"),
        "polarization": Key(_str, "active"),
    },
}

# keys with a numeric suffix: prefix -> Key
PATTERNS: dict[str, dict[str, Key]] = {
    "sample": {"mp_lifetime_ps_": Key(_float, check=positive)},
    "couplings": {"g": Key(_float, check=nonneg)},
    "fit": {"bounds_": Key(_floats), "initial_": Key(_float)},
}

SECTION_RE = re.compile(r"^\s*\[([^\]]*)\]")
KEY_RE = re.compile(r"^\s*([^=:#;\s][^=:]*?)\s*[=:]")


def _key_lines(text: str) -> dict[tuple[str, str], tuple[int, int]]:
    """(section, key) -> (line, column), both 1-based."""
    where, section = {}, None
    for lineno, line in enumerate(text.splitlines(), start=1):
        m = SECTION_RE.match(line)
        if m:
            section = m.group(1).strip()
            where[(section, "")] = (lineno, m.start(1))
            continue
        m = KEY_RE.match(line)
        if m and section is not None and not line[:1].isspace():
            where[(section, m.group(1))] = (lineno, m.start(1) + 1)
    return where


def _strip_echo(text: str) -> str:
    lines = text.splitlines()
    if ECHO_BEGIN not in (ln.strip() for ln in lines):
        return text
    out, inside = [], False
    for ln in lines:
        s = ln.strip()
        if s == ECHO_BEGIN:
            inside = True
            continue
        if s == ECHO_END:
            break
        if inside:
            out.append(ln[2:] if ln.startswith("# ") else ln.lstrip("#"))
    return "\n".join(out) + "\n"


@dataclass
class Config:
    values: dict[str, dict[str, Any]]
    source: str = "<memory>"

    # ---- builders
    def sample_params(self) -> SampleParams:
        v = self.values["sample"]
        mass = v["mass_ratio"]
        if v.get("cr_lifetime_ps") is not None:
            tau = v["cr_lifetime_ps"] * 1e-12
        else:
            tau = mobility_lifetime(v["mobility_cm2_per_Vs"] * 1e-4, mass)
        per_mode = {
            int(k[len("mp_lifetime_ps_") :]): val * 1e-12
            for k, val in v.items()
            if k.startswith("mp_lifetime_ps_")
        }
        return SampleParams(
            electron_density=v["ne_per_cm2"] * 1e4,
            effective_mass_ratio=mass,
            rel_permittivity=v["eps_r"],
            slot_width=v["slot_width_um"] * 1e-6,
            qw_thickness=v["qw_thickness_nm"] * 1e-9,
            cr_lifetime=tau,
            mp_lifetimes=per_mode,
            default_mp_lifetime=v["mp_lifetime_ps"] * 1e-12,
        )

    @property
    def modes(self) -> tuple[int, ...]:
        return tuple(self.values["couplings"]["mp_modes"])

    def couplings(self) -> CouplingSet:
        v = self.values["couplings"]
        return CouplingSet(
            self.values["cavity"]["nu0_THz"], v["g"], {n: v[f"g{n}"] for n in self.modes}
        )

    def geometry(self) -> CavityGeometry:
        v = self.values["cavity"]
        return CavityGeometry(
            L_eff=v["L_eff_um"] * 1e-6,
            gaas_thickness=v["gaas_thickness_um"] * 1e-6,
            gaas_value=v["gaas_value"],
            gaas_value_is_index=v["gaas_value_is_index"],
            gold_thickness=v["gold_thickness_nm"] * 1e-9,
            gold_plasma=v["gold_plasma_THz"],
            gold_scattering=v["gold_scattering_THz"],
        )

    def field_axis(self) -> np.ndarray:
        v = self.values["sweep"]
        return np.linspace(v["B_min_T"], v["B_max_T"], v["B_count"])

    def freq_axis(self) -> np.ndarray:
        v = self.values["sweep"]
        return np.linspace(v["freq_min_THz"], v["freq_max_THz"], v["freq_count"])

    def fit_problem(self) -> FitProblem:
        v = self.values["fit"]
        free = list(v["free"])
        return FitProblem(
            free_params=free,
            bounds={p: tuple(v[f"bounds_{p}"]) for p in free},
            initial={p: v[f"initial_{p}"] for p in free},
            sample=self.sample_params(),
            couplings=self.couplings(),
        )

    # ---- edits used by CLI flags
    def copy(self) -> Config:
        return Config(copy.deepcopy(self.values), self.source)

    def zero_couplings(self) -> Config:
        new = self.copy()
        cv = new.values["couplings"]
        cv["g"] = 0.0
        for n in new.modes:
            cv[f"g{n}"] = 0.0
        return new

    def share_gn(self) -> Config:
        """Replace individual g_n fit parameters with one shared parameter."""
        new = self.copy()
        fv = new.values["fit"]
        individual = [p for p in fv["free"] if re.fullmatch(r"g\d+", p)]
        if not individual and "g_shared" in fv["free"]:
            return new
        rest = [p for p in fv["free"] if p not in individual and p != "g_shared"]
        fv["free"] = tuple(rest + ["g_shared"])
        _fill_fit_defaults(new.values)
        return new

    # ---- serialisation
    def to_text(self) -> str:
        lines = []
        for section, keys in self.values.items():
            lines.append(f"[{section}]")
            for k, val in keys.items():
                if val is None:
                    continue
                lines.append(f"{k} = {_format(val)}")
            lines.append("")
        return "\n".join(lines)

    def echo(self) -> str:
        """The resolved config as a '#'-comment block for output headers."""
        body = "".join(f"# {ln}\n" if ln else "#\n" for ln in self.to_text().splitlines())
        return f"{ECHO_BEGIN}\n{body}{ECHO_END}\n"


def _format(val) -> str:
    if isinstance(val, bool):
        return "true" if val else "false"
    if isinstance(val, float):
        return repr(val)
    if isinstance(val, tuple):
        return ", ".join(_format(x) for x in val)
    return str(val)


def _fill_fit_defaults(values: dict) -> None:
    nu0 = values["cavity"]["nu0_THz"]
    fv = values["fit"]
    defaults = {
        "g": ((0.0, 0.5 * nu0), 0.1 * nu0),
        "g_shared": ((0.0, 0.5 * nu0), 0.05 * nu0),
        "nu0": ((0.5 * nu0, 1.5 * nu0), nu0),
        "mass_ratio": (
            (0.5 * values["sample"]["mass_ratio"], 1.5 * values["sample"]["mass_ratio"]),
            values["sample"]["mass_ratio"],
        ),
        "eps_r": (
            (0.5 * values["sample"]["eps_r"], 1.5 * values["sample"]["eps_r"]),
            values["sample"]["eps_r"],
        ),
    }
    for n in values["couplings"]["mp_modes"]:
        defaults[f"g{n}"] = ((0.0, 0.5 * nu0), 0.05 * nu0)
    for p in fv["free"]:
        if p not in defaults:
            raise ConfigError(f"[fit] free: unknown or unconfigured parameter {p!r}")
        b, x0 = defaults[p]
        fv.setdefault(f"bounds_{p}", b)
        fv.setdefault(f"initial_{p}", x0)


def parse_config(text: str, source: str = "<memory>") -> Config:
    text = _strip_echo(text)
    parser = configparser.ConfigParser(
        interpolation=None, inline_comment_prefixes=("#", ";"), strict=True
    )
    parser.optionxform = str  # keys are case-sensitive (units)
    try:
        parser.read_string(text, source=source)
    except configparser.MissingSectionHeaderError as exc:
        raise ConfigError(f"{source}:{exc.lineno}:1: key outside any [section]") from exc
    except configparser.ParsingError as exc:
        lineno = exc.errors[0][0]
        line = text.splitlines()[lineno - 1]
        col = len(line) - len(line.lstrip()) + 1
        raise ConfigError(f"{source}:{lineno}:{col}: cannot parse {line.strip()!r}") from exc
    except (configparser.DuplicateOptionError, configparser.DuplicateSectionError) as exc:
        raise ConfigError(f"{source}:{exc.lineno}:1: {exc}") from exc

    where = _key_lines(text)

    def loc(section, key=""):
        ln, col = where.get((section, key), (0, 0))
        return f"{source}:{ln}:{col}" if ln else source

    values: dict[str, dict[str, Any]] = {}
    for section in parser.sections():
        if section not in SCHEMA:
            raise ConfigError(f"{loc(section)}: unknown section [{section}]")
    for section, keys in SCHEMA.items():
        raw = parser[section] if parser.has_section(section) else {}
        out: dict[str, Any] = {}
        for name, text_val in raw.items():
            key = keys.get(name)
            if key is None:
                key = _match_pattern(section, name)
            if key is None:
                raise ConfigError(f"{loc(section, name)}: unknown key [{section}] {name}")
            try:
                val = key.parse(text_val)
            except ValueError as exc:
                raise ConfigError(f"{loc(section, name)}: [{section}] {name}: {exc}") from exc
            ok, why = key.check
            if val is not None and not _check(ok, val):
                raise ConfigError(f"{loc(section, name)}: [{section}] {name} {why}, got {text_val!r}")
            out[name] = val
        for name, key in keys.items():
            if name not in out:
                if key.required:
                    raise ConfigError(f"{source}: missing required key [{section}] {name}")
                out[name] = key.default
        values[section] = out

    _resolve_couplings(values, loc)
    _validate(values, loc)
    _fill_fit_defaults(values)
    return Config(values, source)


def _check(ok, val) -> bool:
    if isinstance(val, tuple):
        return all(ok(v) for v in val)
    return bool(ok(val))


def _match_pattern(section: str, name: str) -> Key | None:
    for prefix, key in PATTERNS.get(section, {}).items():
        rest = name[len(prefix) :]
        if not name.startswith(prefix):
            continue
        if prefix in ("bounds_", "initial_"):
            return key if rest else None
        if rest.isdigit():
            return key
    return None


def _odd(n: int) -> bool:
    return n >= 1 and n % 2 == 1


def _resolve_couplings(values: dict, loc) -> None:
    cv = values["couplings"]
    mode_keys = sorted(int(k[1:]) for k in cv if re.fullmatch(r"g\d+", k))
    modes = cv["mp_modes"]
    if modes is None:
        modes = tuple(mode_keys)
    for n in list(modes) + mode_keys:
        if not _odd(n):
            raise ConfigError(f"{loc('couplings', 'mp_modes')}: mode index {n} must be an odd positive integer")
    if len(set(modes)) != len(modes):
        raise ConfigError(f"{loc('couplings', 'mp_modes')}: duplicate mode in mp_modes")
    for n in mode_keys:
        if n not in modes:
            raise ConfigError(f"{loc('couplings', f'g{n}')}: g{n} given but mode {n} is not in mp_modes")
    modes = tuple(sorted(modes))
    cv["mp_modes"] = modes
    for n in modes:
        cv.setdefault(f"g{n}", 0.0)
    for n in modes:  # keep g<n> keys in mode order
        cv[f"g{n}"] = cv.pop(f"g{n}")
    per_mode = [k for k in values["sample"] if k.startswith("mp_lifetime_ps_")]
    for k in per_mode:
        n = int(k.rsplit("_", 1)[1])
        if not _odd(n):
            raise ConfigError(f"{loc('sample', k)}: {k} must refer to an odd mode index")
    if cv["normalized"]:
        nu0 = values["cavity"]["nu0_THz"]
        cv["g"] = cv["g"] * nu0
        for n in modes:
            cv[f"g{n}"] = cv[f"g{n}"] * nu0
        fv = values["fit"]
        for k in list(fv):
            p = k.split("_", 1)[1] if k.startswith(("bounds_", "initial_")) else None
            if p and (p in ("g", "g_shared") or re.fullmatch(r"g\d+", p)):
                fv[k] = tuple(x * nu0 for x in fv[k]) if isinstance(fv[k], tuple) else fv[k] * nu0
        cv["normalized"] = False


def _validate(values: dict, loc) -> None:
    sw = values["sweep"]
    if sw["B_min_T"] >= sw["B_max_T"] and sw["B_count"] > 1:
        raise ConfigError(f"{loc('sweep', 'B_max_T')}: B_max_T must exceed B_min_T")
    if sw["freq_min_THz"] >= sw["freq_max_THz"] and sw["freq_count"] > 1:
        raise ConfigError(f"{loc('sweep', 'freq_max_THz')}: freq_max_THz must exceed freq_min_THz")
    fv = values["fit"]
    if fv["synthetic_B_min_T"] >= fv["synthetic_B_max_T"] and fv["synthetic_B_count"] > 1:
        raise ConfigError(f"{loc('fit', 'synthetic_B_max_T')}: must exceed synthetic_B_min_T")
    pol = values["output"]["polarization"]
    if pol not in ("active", "inactive"):
        raise ConfigError(f"{loc('output', 'polarization')}: polarization must be active or inactive")
    for k, v in fv.items():
        if k.startswith("bounds_"):
            if len(v) != 2 or not v[0] < v[1]:
                raise ConfigError(f"{loc('fit', k)}: {k} needs two values lower < upper")
    free = fv["free"]
    if not free:
        raise ConfigError(f"{loc('fit', 'free')}: at least one free parameter is required")
    try:
        s = Config(values).sample_params()
    except DomainError as exc:
        raise ConfigError(f"[sample]: {exc}") from exc
    del s


def bundled_config_names() -> list[str]:
    return sorted(p.name for p in resources.files("landaupol.configs").iterdir() if p.name.endswith(".cfg"))


def resolve_path(path: str | Path) -> Path:
    """A filesystem path, or the name of a config shipped with the package."""
    p = Path(path)
    if p.exists():
        return p
    name = p.name if p.suffix == ".cfg" else f"{p.name}.cfg"
    if name in bundled_config_names():
        return Path(str(resources.files("landaupol.configs") / name))
    raise ConfigError(f"config file not found: {path}")


def load_config(path: str | Path) -> Config:
    p = resolve_path(path)
    try:
        text = p.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read {p}: {exc}") from exc
    return parse_config(text, source=str(p))
