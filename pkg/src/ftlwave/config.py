"""INI-style run configuration: declared keys, typed access, verbatim echo."""

from __future__ import annotations

import configparser
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Callable, Optional

from .errors import ConfigError


def _float(text: str) -> float:
    return float(text)


def _int(text: str) -> int:
    return int(text)


def _floats(text: str) -> list[float]:
    return [float(t) for t in text.replace(",", " ").split()]


def _pairs(text: str) -> list[tuple[float, float]]:
    out = []
    for item in text.replace(",", " ").split():
        lo, sep, hi = item.partition(":")
        if not sep:
            raise ValueError(f"pair {item!r} must look like rho_minus:rho_plus")
        out.append((float(lo), float(hi)))
    return out


def _choice(*options: str) -> Callable[[str], str]:
    def parse(text: str) -> str:
        if text not in options:
            raise ValueError(f"expected one of {', '.join(options)}")
        return text

    return parse


@dataclass(frozen=True)
class Key:
    section: str
    name: str
    parse: Callable[[str], Any]
    default: Optional[str]
    help: str
    positive: bool = False


KEYS: tuple[Key, ...] = (
    Key("model", "ell", _float, "0.5", "car length", positive=True),
    Key("model", "V", _float, "1.0", "speed limit", positive=True),
    Key("model", "law", _choice("linear", "table"), "linear", "velocity law: linear (phi = 1 - rho) or table"),
    Key("model", "table_rho", _floats, None, "table law: densities from 0 to 1"),
    Key("model", "table_phi", _floats, None, "table law: phi at table_rho"),
    Key("problem", "rho_minus", _float, None, "left state; the conjugate of rho_plus when omitted"),
    Key("problem", "rho_plus", _float, None, "right state"),
    Key("problem", "pairs", _pairs, None, "bvp batch: space separated rho_minus:rho_plus pairs"),
    Key("solver", "h", _float, None, "profile step (default ell/128)", positive=True),
    Key("solver", "plateau_tol", _float, "1e-9", "plateau stop of the backward solve", positive=True),
    Key("solver", "x_hat", _float, "1.0", "profile-solve: tail anchor"),
    Key("solver", "delta", _float, "0.2", "profile-solve: tail size, W = rho_plus - delta exp(-lambda_plus x)", positive=True),
    Key("solver", "x_min", _float, None, "profile-solve: left end (default x_hat - 1000 ell)"),
    Key("solver", "delta0", _float, "0.2", "bvp: tail amplitude at the first anchor", positive=True),
    Key("solver", "n_anchors", _int, "8", "bvp: number of anchors", positive=True),
    Key("solver", "anchor_spacing", _float, "2.0", "bvp: anchors at k * spacing / lambda_plus", positive=True),
    Key("solver", "anchors", _floats, None, "bvp: explicit anchor list, overrides n_anchors/anchor_spacing"),
    Key("solver", "bvp_tol", _float, "1e-6", "bvp: convergence tolerance on the left limit", positive=True),
    Key("solver", "dt", _float, None, "time step (default: largest divisor of the save interval below 0.1 ell/V)", positive=True),
    Key("run", "n_periods", _float, "3", "run length in periods ell/f_bar", positive=True),
    Key("run", "saves_per_period", _int, "20", "saved states per period", positive=True),
    Key("run", "initial", _choice("profile", "uniform"), "profile", "simulate: profile-generated or uniform platoon"),
    Key("run", "rho", _float, None, "simulate: density of a uniform platoon", positive=True),
    Key("run", "n_back", _int, "100", "simulate: cars behind the anchor car"),
    Key("run", "n_fwd", _int, "99", "simulate: cars ahead of the anchor car"),
    Key("run", "pattern", _choice("bump", "balanced"), "bump", "stability: perturbation shape"),
    Key("run", "amplitude", _float, "0.02", "stability: perturbation size", positive=True),
    Key("run", "seed", _int, None, "stability: seed for random perturbation weights"),
    Key("run", "margin", _float, "1e-6", "stability: admissible distance from the end states", positive=True),
    Key("run", "stability_periods", _float, "20", "stability: run length in periods", positive=True),
    Key("run", "sigma", _float, "0.0", "moving-frame: wave speed as a fraction of V"),
    Key("run", "probe_sigma", _float, None, "moving-frame: speed used to measure the trace error"),
    Key("run", "window", _floats, "-10 10", "x window for sampled profiles (compare.csv, family_profiles.csv)"),
    Key("run", "n_samples", _int, "401", "rows per sampled profile", positive=True),
    Key("macro", "epsilon", _float, None, "compare-macro: viscosity (default V ell / 2)", positive=True),
    Key("macro", "ells", _floats, None, "compare-macro: car lengths for the sweep table"),
)

_BY_NAME = {(k.section, k.name): k for k in KEYS}


def key_help() -> str:
    lines = []
    section = None
    for k in KEYS:
        if k.section != section:
            section = k.section
            lines.append(f"[{section}]")
        default = "" if k.default is None else f" (default {k.default})"
        lines.append(f"  {k.name}: {k.help}{default}")
    return "\n".join(lines)


class RunConfig:
    """Raw strings as given plus typed lookups against :data:`KEYS`."""

    def __init__(self, raw: Optional[dict[tuple[str, str], str]] = None):
        self.raw: dict[tuple[str, str], str] = {}
        for (section, name), text in (raw or {}).items():
            self.set(section, name, text)

    def set(self, section: str, name: str, text: str) -> None:
        if (section, name) not in _BY_NAME:
            raise ConfigError(f"unknown key {section}.{name}")
        self.raw[(section, name)] = text.strip()

    def get(self, section: str, name: str) -> Any:
        key = _BY_NAME[(section, name)]
        text = self.raw.get((section, name), key.default)
        if text is None or text == "":
            return None
        try:
            value = key.parse(text)
        except ValueError as exc:
            raise ConfigError(f"{section}.{name}: {exc}") from None
        if key.positive and not value > 0:
            raise ConfigError(f"{section}.{name} must be positive")
        return value

    def require(self, section: str, name: str) -> Any:
        value = self.get(section, name)
        if value is None:
            raise ConfigError(f"{name} required")
        return value

    def echo(self) -> list[tuple[str, str]]:
        """Explicitly set keys in declaration order."""
        return [(f"{k.section}.{k.name}", self.raw[(k.section, k.name)]) for k in KEYS if (k.section, k.name) in self.raw]

    def defaults(self) -> list[tuple[str, str]]:
        return [(f"{k.section}.{k.name}", k.default) for k in KEYS if k.default is not None and (k.section, k.name) not in self.raw]


def load_config(path=None, overrides=()) -> RunConfig:
    """Read an INI file (optional) and apply ``section.key=value`` overrides."""
    cfg = RunConfig()
    if path is not None:
        parser = configparser.ConfigParser(interpolation=None)
        parser.optionxform = str
        try:
            with open(Path(path), encoding="utf-8") as fh:
                parser.read_file(fh)
        except OSError as exc:
            raise ConfigError(f"cannot read {path}: {exc.strerror}") from None
        except configparser.Error as exc:
            raise ConfigError(str(exc).splitlines()[0]) from None
        for section in parser.sections():
            for name, text in parser.items(section):
                cfg.set(section, name, text)
    for item in overrides:
        dotted, sep, text = item.partition("=")
        section, dot, name = dotted.strip().partition(".")
        if not sep or not dot:
            raise ConfigError(f"override {item!r} must look like section.key=value")
        cfg.set(section, name, text)
    return cfg
