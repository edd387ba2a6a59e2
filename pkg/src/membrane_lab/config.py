"""Experiment configuration: an INI-style grammar with typed, validated keys.

Grammar::

    # comment
    [section]
    key = value          ; scalars: int, float, bool (true/false), string
    slope = 1.0, 0.5     ; vectors: comma separated floats

Sections and keys are fixed by :data:`SCHEMA`; anything else is an error
that names the offending line.  Missing keys take the documented defaults.
"""

from __future__ import annotations

import configparser
import math
import re
from dataclasses import dataclass, field

__all__ = ["SCHEMA", "EXPERIMENTS", "EXPERIMENT_DEFAULTS", "ConfigError", "ExperimentConfig", "parse_config", "apply_override"]

EXPERIMENTS = ("verify-exact", "linear-decay", "stability", "nash-moser", "tame-sweep")


class ConfigError(ValueError):
    """Parse or validation failure; ``line`` is 1-based when known."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        super().__init__(f"line {line}: {message}" if line is not None else message)


def _vector(text: str) -> tuple:
    parts = [p.strip() for p in text.split(",") if p.strip()]
    if not parts:
        raise ValueError("empty vector")
    return tuple(float(p) for p in parts)


def _bool(text: str) -> bool:
    t = text.strip().lower()
    if t in ("true", "yes", "on", "1"):
        return True
    if t in ("false", "no", "off", "0"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _fmt(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, tuple):
        return ", ".join(repr(float(v)) for v in value)
    return str(value)


# section -> key -> (parser, default)
SCHEMA = {
    "grid": {
        "dim": (int, 1),
        "half_width": (float, 10.0),
        "points": (int, 128),
        "sponge_width": (int, 16),
    },
    "physics": {
        "slope": (_vector, None),
        "offset": (float, 0.0),
        "p": (float, 1.0),
        "eps": (float, 1e-2),
        "c": (float, 1.5),
        "sigma": (float, 1.5),
        "sigma0": (float, 3.0),
    },
    "solver": {
        "cfl": (float, 0.5),
        "t_end": (float, 20.0),
        "corrections": (int, 1),
        "sponge": (_bool, True),
        "sponge_strength": (float, 4.0),
        "draws": (int, 10),
    },
    "nash_moser": {
        "n0": (float, 2.0),
        "m_max": (int, 5),
        "k_bar": (float, 1.0),
        "k": (float, 2.0),
        "t_end": (float, 2.0),
        "profile_width": (float, 1.25),
        "window": (float, 2.0),
        "taper": (float, 2.0),
        "smooth_iterates": (_bool, False),
        "norm_rounding": (str, "floor"),
    },
    "output": {
        "dir": (str, "membrane-out"),
        "snapshots": (_bool, False),
        "seed": (int, 0),
    },
}


@dataclass
class ExperimentConfig:
    """Validated configuration; ``values[section][key]`` holds typed values."""

    values: dict = field(default_factory=dict)
    experiment: str | None = None

    def __getitem__(self, dotted: str):
        section, key = dotted.split(".", 1)
        return self.values[section][key]

    @property
    def slope(self) -> tuple:
        s = self.values["physics"]["slope"]
        if s is None:
            dim = self.values["grid"]["dim"]
            return (1.0,) + (0.0,) * (dim - 1)
        return s

    def serialize(self) -> str:
        lines = []
        for section, keys in SCHEMA.items():
            lines.append(f"[{section}]")
            for key in keys:
                v = self.values[section][key]
                if v is not None:
                    lines.append(f"{key} = {_fmt(v)}")
            lines.append("")
        return "\n".join(lines)

    def __eq__(self, other):
        return isinstance(other, ExperimentConfig) and self.values == other.values


# defaults that differ per experiment; explicit values in the file still win
EXPERIMENT_DEFAULTS = {
    "stability": {"grid": {"dim": 2}},
    "linear-decay": {"solver": {"t_end": 160.0}},
}


def _defaults(experiment: str | None = None) -> dict:
    values = {s: {k: d for k, (_, d) in keys.items()} for s, keys in SCHEMA.items()}
    for section, keys in EXPERIMENT_DEFAULTS.get(experiment, {}).items():
        values[section].update(keys)
    return values


def _find_line(text: str, section: str | None, key: str | None) -> int | None:
    current = None
    for i, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        m = re.match(r"\[([^\]]+)\]", line)
        if m:
            current = m.group(1).strip()
            if key is None and current == section:
                return i
            continue
        if key is not None and current == section and re.match(rf"{re.escape(key)}\s*[=:]", line, re.IGNORECASE):
            return i
    return None


def _validate(values: dict, lines: dict):
    def fail(msg, section, key):
        raise ConfigError(msg, lines.get((section, key)))

    g, ph, so, nm = values["grid"], values["physics"], values["solver"], values["nash_moser"]
    if g["dim"] not in (1, 2, 3):
        fail(f"dim must be 1, 2 or 3, got {g['dim']}", "grid", "dim")
    if not g["half_width"] > 0:
        fail("half_width must be positive", "grid", "half_width")
    if g["points"] < 8:
        fail("points must be at least 8", "grid", "points")
    if not 0 <= g["sponge_width"] < g["points"] / 4:
        fail("sponge_width must lie in [0, points/4)", "grid", "sponge_width")
    if ph["slope"] is not None:
        if len(ph["slope"]) != g["dim"]:
            fail(f"slope needs {g['dim']} components, got {len(ph['slope'])}", "physics", "slope")
        if all(a == 0 for a in ph["slope"]):
            fail("slope must be nonzero", "physics", "slope")
    if not ph["p"] > 0.5:
        fail(f"p must exceed 1/2, got {ph['p']}", "physics", "p")
    if not 0 <= ph["eps"] < 1:
        fail(f"eps must lie in [0, 1), got {ph['eps']}", "physics", "eps")
    if not ph["c"] > 1:
        fail(f"c must exceed 1, got {ph['c']}", "physics", "c")
    if not 1 < ph["sigma"] < ph["sigma0"]:
        fail("need 1 < sigma < sigma0", "physics", "sigma")
    if not 0 < so["cfl"] < 1:
        fail(f"cfl must lie in (0, 1), got {so['cfl']}", "solver", "cfl")
    if not so["t_end"] > 0:
        fail("t_end must be positive", "solver", "t_end")
    if so["corrections"] < 0:
        fail("corrections must be nonnegative", "solver", "corrections")
    if so["draws"] < 1:
        fail("draws must be positive", "solver", "draws")
    if not nm["n0"] > 1:
        fail("n0 must exceed 1", "nash_moser", "n0")
    if not 1 <= nm["k_bar"] < nm["k"]:
        fail("need 1 <= k_bar < k", "nash_moser", "k_bar")
    if nm["m_max"] < 0:
        fail("m_max must be nonnegative", "nash_moser", "m_max")
    if nm["norm_rounding"] not in ("floor", "ceil"):
        fail("norm_rounding must be floor or ceil", "nash_moser", "norm_rounding")
    for key in ("t_end", "profile_width", "window", "taper"):
        if not nm[key] > 0:
            fail(f"{key} must be positive", "nash_moser", key)
    for section in values:
        for key, v in values[section].items():
            if isinstance(v, float) and not math.isfinite(v):
                fail(f"{key} must be finite", section, key)


def parse_config(text: str, experiment: str | None = None) -> ExperimentConfig:
    """Parse and validate configuration text; empty text gives all defaults."""
    if experiment is not None and experiment not in EXPERIMENTS:
        raise ConfigError(f"unknown experiment {experiment!r}")
    cp = configparser.ConfigParser(
        inline_comment_prefixes=("#", ";"), comment_prefixes=("#", ";"), interpolation=None, strict=True
    )
    try:
        cp.read_string(text)
    except configparser.MissingSectionHeaderError as exc:
        raise ConfigError("key outside of any section", exc.lineno) from exc
    except (configparser.DuplicateOptionError, configparser.DuplicateSectionError) as exc:
        raise ConfigError(str(exc).split(":")[-1].strip() or str(exc), exc.lineno) from exc
    except configparser.ParsingError as exc:
        lineno = exc.errors[0][0] if exc.errors else None
        raise ConfigError(f"cannot parse {exc.errors[0][1] if exc.errors else ''}".strip(), lineno) from exc

    values = _defaults(experiment)
    lines = {}
    for section in cp.sections():
        if section not in SCHEMA:
            raise ConfigError(f"unknown section [{section}]", _find_line(text, section, None))
        for key, raw in cp.items(section):
            line = _find_line(text, section, key)
            if key not in SCHEMA[section]:
                raise ConfigError(f"unknown key {key!r} in [{section}]", line)
            parser, _ = SCHEMA[section][key]
            try:
                values[section][key] = parser(raw)
            except ValueError as exc:
                raise ConfigError(f"bad value for {key}: {exc}", line) from exc
            lines[(section, key)] = line
    _validate(values, lines)
    return ExperimentConfig(values, experiment)


def apply_override(config: ExperimentConfig, override: str) -> ExperimentConfig:
    """Apply ``section.key=value`` and revalidate."""
    if "=" not in override or "." not in override.split("=", 1)[0]:
        raise ConfigError(f"override must look like section.key=value, got {override!r}")
    lhs, rhs = override.split("=", 1)
    section, key = (s.strip() for s in lhs.split(".", 1))
    if section not in SCHEMA or key not in SCHEMA[section]:
        raise ConfigError(f"unknown override target {lhs.strip()!r}")
    parser, _ = SCHEMA[section][key]
    values = {s: dict(v) for s, v in config.values.items()}
    try:
        values[section][key] = parser(rhs.strip())
    except ValueError as exc:
        raise ConfigError(f"bad value for {lhs.strip()}: {exc}") from exc
    _validate(values, {})
    return ExperimentConfig(values, config.experiment)
