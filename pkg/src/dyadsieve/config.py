"""Config files for the command-line frontend.

Flat key=value text with sections, read by configparser:

    [sequence]
    kind = geometric
    t1 = 4
    q = 4

    [schedule]
    preset = constant
    delta = 1/256
    h.const = 5
    eta = 1/2

    [run]
    N = 10
    mode = full

Every key can be overridden on the command line as
--section.key=value.  Values that are rational parameters accept
"p/q", integer, or decimal strings and are parsed exactly.  The
resolved configuration (defaults applied, overrides folded in) is
canonicalized and hashed; the hash is embedded in every report so a
report names the exact inputs that produced it.
"""

from __future__ import annotations

import configparser
import hashlib
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Dict, Optional, Tuple

from .errors import ParameterError
from . import sequences
from .sequences import SequenceSpec

KNOWN_KEYS = {
    "sequence": {
        "kind", "t1", "q", "primes", "terms",
        "gamma", "gamma1", "gamma2", "beta",
    },
    "schedule": {
        "preset", "eta", "kappa", "h.const", "delta", "delta.shape",
        "c1", "c2", "beta", "gamma", "n_probe",
    },
    "run": {"N", "mode", "pick", "check_mode", "tau"},
    "output": {"dir"},
    "precision": {"bits"},
    "dimension": {
        "source", "eps", "k_max", "nu",
        "sigma", "m", "stages", "rho", "first", "eta",
    },
}

DEFAULTS = {
    "run": {"mode": "full", "pick": "left", "check_mode": "chain"},
    "output": {"dir": "out"},
    "precision": {"bits": "128"},
}

_KIND_ALIASES = {
    "geometric": "geometric",
    "smooth": "smooth",
    "smooth-numbers": "smooth",
    "explicit": "explicit",
    "explicit-list": "explicit",
    "subexponential": "subexponential",
    "sublacunary": "sublacunary",
}


def parse_fraction(text: str, where: str) -> Fraction:
    try:
        return Fraction(text.strip())
    except (ValueError, ZeroDivisionError) as e:
        raise ParameterError(f"{where}: cannot parse {text!r} as a rational") from e


def parse_int(text: str, where: str) -> int:
    try:
        return int(text.strip())
    except ValueError as e:
        raise ParameterError(f"{where}: cannot parse {text!r} as an integer") from e


@dataclass
class RunConfig:
    raw: Dict[str, Dict[str, str]] = field(default_factory=dict)

    def get(self, section: str, key: str, default: Optional[str] = None) -> Optional[str]:
        return self.raw.get(section, {}).get(key, default)

    def require(self, section: str, key: str) -> str:
        v = self.get(section, key)
        if v is None:
            raise ParameterError(f"missing required config key {section}.{key}")
        return v

    def fraction(self, section: str, key: str, default: Optional[str] = None) -> Optional[Fraction]:
        v = self.get(section, key, default)
        return None if v is None else parse_fraction(v, f"{section}.{key}")

    def int(self, section: str, key: str, default: Optional[str] = None) -> Optional[int]:
        v = self.get(section, key, default)
        return None if v is None else parse_int(v, f"{section}.{key}")

    # ------------------------------------------------------------------
    @property
    def precision(self) -> int:
        return self.int("precision", "bits", DEFAULTS["precision"]["bits"])

    @property
    def mode(self) -> str:
        m = self.get("run", "mode", DEFAULTS["run"]["mode"])
        if m not in ("full", "path"):
            raise ParameterError(f"run.mode must be 'full' or 'path', got {m!r}")
        return m

    @property
    def pick(self) -> str:
        p = self.get("run", "pick", DEFAULTS["run"]["pick"])
        if p == "left":
            return "leftmost"
        if p in ("leftmost", "middle") or p.startswith("random:"):
            return p
        raise ParameterError(
            f"run.pick must be left, middle or random:<seed>, got {p!r}"
        )

    @property
    def check_mode(self) -> str:
        m = self.get("run", "check_mode", DEFAULTS["run"]["check_mode"])
        if m not in ("chain", "universal"):
            raise ParameterError(
                f"run.check_mode must be 'chain' or 'universal', got {m!r}"
            )
        return m

    @property
    def out_dir(self) -> str:
        return self.get("output", "dir", DEFAULTS["output"]["dir"])

    # ------------------------------------------------------------------
    def sequence_spec(self) -> SequenceSpec:
        kind_raw = self.require("sequence", "kind")
        kind = _KIND_ALIASES.get(kind_raw)
        if kind is None:
            raise ParameterError(f"sequence.kind: unknown kind {kind_raw!r}")
        if kind == "geometric":
            q = self.fraction("sequence", "q")
            if q is None:
                _missing("sequence.q")
            return sequences.geometric(
                t1=self.fraction("sequence", "t1", "1"), q=q
            )
        if kind == "smooth":
            primes_text = self.get("sequence", "primes", "2,3")
            primes = tuple(
                parse_int(p, "sequence.primes") for p in primes_text.split(",") if p.strip()
            )
            return sequences.smooth(primes=primes)
        if kind == "explicit":
            terms_text = self.require("sequence", "terms")
            terms = tuple(
                parse_fraction(t, "sequence.terms")
                for t in terms_text.replace(",", " ").split()
            )
            return sequences.explicit(terms)
        if kind == "subexponential":
            g1 = self.fraction("sequence", "gamma1")
            if g1 is None:
                g1 = self.fraction("sequence", "gamma")
            if g1 is None:
                _missing("sequence.gamma1")
            g2 = self.fraction("sequence", "gamma2")
            if g2 is None:
                g2 = g1
            beta = self.fraction("sequence", "beta")
            if beta is None:
                _missing("sequence.beta")
            return sequences.subexponential(g1, g2, beta)
        # sublacunary
        gamma = self.fraction("sequence", "gamma")
        if gamma is None:
            _missing("sequence.gamma")
        beta = self.fraction("sequence", "beta", "0")
        return sequences.sublacunary(gamma, beta)

    # ------------------------------------------------------------------
    def resolved(self) -> Dict[str, Dict[str, str]]:
        out: Dict[str, Dict[str, str]] = {}
        for section, defaults in DEFAULTS.items():
            for key, val in defaults.items():
                out.setdefault(section, {})[key] = val
        for section, items in self.raw.items():
            for key, val in items.items():
                out.setdefault(section, {})[key] = val
        return out

    def fingerprint(self) -> str:
        """sha256 over the resolved instance; output location excluded
        so the same computation fingerprints identically anywhere."""
        lines = []
        for section, items in sorted(self.resolved().items()):
            if section == "output":
                continue
            for key, val in sorted(items.items()):
                lines.append(f"{section}.{key}={val}")
        blob = "\n".join(lines).encode()
        return hashlib.sha256(blob).hexdigest()


def _missing(name: str):
    raise ParameterError(f"missing required config key {name}")


def _validate(section: str, key: str):
    if section not in KNOWN_KEYS:
        raise ParameterError(f"unknown config section [{section}]")
    if key not in KNOWN_KEYS[section]:
        raise ParameterError(f"unknown config key {section}.{key}")


def load_config(path: Optional[str], overrides: Dict[Tuple[str, str], str]) -> RunConfig:
    """Read a config file, validate keys, apply --section.key overrides."""
    raw: Dict[str, Dict[str, str]] = {}
    if path is not None:
        parser = configparser.ConfigParser(interpolation=None)
        parser.optionxform = str  # keep key case and dots as written
        try:
            with open(path, "r", encoding="utf-8") as f:
                parser.read_file(f)
        except OSError as e:
            raise ParameterError(f"cannot read config file {path}: {e}") from e
        except configparser.Error as e:
            raise ParameterError(f"config parse error in {path}: {e}") from e
        for section in parser.sections():
            for key, val in parser.items(section):
                _validate(section, key)
                raw.setdefault(section, {})[key] = val.strip()
    for (section, key), val in overrides.items():
        _validate(section, key)
        raw.setdefault(section, {})[key] = val.strip()
    return RunConfig(raw=raw)
