"""Flat key = value run configurations for the command-line driver.

One assignment per line, ``#`` starts a comment, blank lines are
ignored.  Unknown and duplicate keys are rejected so a typo cannot
silently fall back to a default.  Every run report echoes the full
effective configuration, defaults included.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Tuple

from .geodesic import DEFAULT_EPSILONS

EXPERIMENTS = ("rigidbody", "fluid2d", "helmholtz", "geodesic-check",
               "variation-so3")

# experiments whose default horizon is a long simulation rather than a
# unit time interval
_LONG_RUNS = ("rigidbody", "fluid2d")


class ParseError(ValueError):
    """Malformed configuration text; carries the offending line number."""

    def __init__(self, line: int, message: str):
        super().__init__(f"line {line}: {message}")
        self.line = line


class MissingKey(ValueError):
    """A required key is absent; `key` names the field."""

    def __init__(self, key: str, why: str = ""):
        tail = f" ({why})" if why else ""
        super().__init__(f"missing required key {key!r}{tail}")
        self.key = key


@dataclass(frozen=True)
class RunConfig:
    """Fully resolved run description: parsed values plus defaults.

    `inertia` holds the six independent entries of the symmetric inertia
    matrix in row-major upper-triangle order (I11 I12 I13 I22 I23 I33);
    it stays None for experiments that do not involve a rigid body.
    """

    experiment: str
    grid_n: int = 64
    dt: float = 1e-3
    t_end: float = 1.0
    seed: int = 0
    inertia: Optional[Tuple[float, ...]] = None
    mass: Optional[float] = None
    omega0: Optional[Tuple[float, float, float]] = None
    v0: Tuple[float, float, float] = (0.0, 0.0, 0.0)
    epsilons: Tuple[float, ...] = DEFAULT_EPSILONS
    output_dir: str = "."
    emit_svg: bool = False

    def as_dict(self) -> dict:
        """JSON-ready echo of every effective field."""
        return {
            "experiment": self.experiment,
            "grid_n": self.grid_n,
            "dt": self.dt,
            "t_end": self.t_end,
            "seed": self.seed,
            "inertia": None if self.inertia is None else list(self.inertia),
            "mass": self.mass,
            "omega0": None if self.omega0 is None else list(self.omega0),
            "v0": list(self.v0),
            "epsilons": list(self.epsilons),
            "output_dir": self.output_dir,
            "emit_svg": self.emit_svg,
        }


# ---------------------------------------------------------------------------
# value converters (raise ValueError; parse_config adds the line number)
# ---------------------------------------------------------------------------

def _as_int(text, name, minimum=None):
    try:
        value = int(text, 10)
    except ValueError:
        raise ValueError(f"{name} must be an integer, got {text!r}") from None
    if minimum is not None and value < minimum:
        raise ValueError(f"{name} must be >= {minimum}, got {value}")
    return value


def _as_float(text, name, positive=False):
    try:
        value = float(text)
    except ValueError:
        raise ValueError(f"{name} must be a real number, got {text!r}") from None
    if not math.isfinite(value):
        raise ValueError(f"{name} must be finite, got {text!r}")
    if positive and value <= 0.0:
        raise ValueError(f"{name} must be positive, got {value}")
    return value


def _as_floats(text, name, count=None):
    parts = text.split()
    if count is not None and len(parts) != count:
        raise ValueError(
            f"{name} needs exactly {count} space-separated reals, got {len(parts)}")
    return tuple(_as_float(p, name) for p in parts)


def _as_bool(text, name):
    lowered = text.lower()
    if lowered in ("true", "yes", "on", "1"):
        return True
    if lowered in ("false", "no", "off", "0"):
        return False
    raise ValueError(f"{name} must be true/false, got {text!r}")


def _as_experiment(text, name):
    if text not in EXPERIMENTS:
        raise ValueError(
            f"{name} must be one of {', '.join(EXPERIMENTS)}; got {text!r}")
    return text


def _as_grid_n(text, name):
    value = _as_int(text, name, minimum=16)
    if value % 2 != 0:
        raise ValueError(f"{name} must be even, got {value}")
    return value


def _as_epsilons(text, name):
    values = _as_floats(text, name)
    if not values:
        raise ValueError(f"{name} must not be empty")
    if any(e <= 0.0 for e in values):
        raise ValueError(f"{name} must be positive, got {values}")
    if any(nxt >= prv for prv, nxt in zip(values, values[1:])):
        raise ValueError(f"{name} must be strictly decreasing, got {values}")
    return values


_FIELDS = {
    "experiment": lambda t: _as_experiment(t, "experiment"),
    "grid_n": lambda t: _as_grid_n(t, "grid_n"),
    "dt": lambda t: _as_float(t, "dt", positive=True),
    "t_end": lambda t: _as_float(t, "t_end", positive=True),
    "seed": lambda t: _as_int(t, "seed", minimum=0),
    "inertia": lambda t: _as_floats(t, "inertia", count=6),
    "mass": lambda t: _as_float(t, "mass", positive=True),
    "omega0": lambda t: _as_floats(t, "omega0", count=3),
    "v0": lambda t: _as_floats(t, "v0", count=3),
    "epsilons": lambda t: _as_epsilons(t, "epsilons"),
    "output_dir": lambda t: t,
    "emit_svg": lambda t: _as_bool(t, "emit_svg"),
}

_REQUIRED = {
    "rigidbody": ("inertia", "mass", "omega0"),
}


def parse_config(text: str) -> RunConfig:
    """Parse flat key = value text into a RunConfig with defaults applied."""
    raw = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        if "=" not in stripped:
            raise ParseError(lineno, f"expected 'key = value', got {stripped!r}")
        key, _, value = stripped.partition("=")
        key = key.strip()
        value = value.strip()
        if key not in _FIELDS:
            raise ParseError(lineno, f"unknown key {key!r}")
        if key in raw:
            raise ParseError(lineno, f"duplicate key {key!r}")
        if not value:
            raise ParseError(lineno, f"empty value for {key!r}")
        raw[key] = (lineno, value)

    if "experiment" not in raw:
        raise MissingKey("experiment")

    parsed = {}
    for key, (lineno, value) in raw.items():
        try:
            parsed[key] = _FIELDS[key](value)
        except ValueError as exc:
            raise ParseError(lineno, str(exc)) from None

    experiment = parsed["experiment"]
    for key in _REQUIRED.get(experiment, ()):
        if key not in parsed:
            raise MissingKey(key, f"required by experiment {experiment!r}")
    parsed.setdefault("t_end", 10.0 if experiment in _LONG_RUNS else 1.0)
    return RunConfig(**parsed)


def load_config(path) -> RunConfig:
    """Read a UTF-8 config file and parse it."""
    with open(path, "r", encoding="utf-8") as fh:
        return parse_config(fh.read())
