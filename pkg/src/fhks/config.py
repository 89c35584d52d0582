"""Run manifests: a small INI-like text grammar, defaults, and initial-data presets.

Grammar::

    # comment (whole line, or trailing after a value)
    [section]
    key = value

Lists are comma separated. Booleans are ``true``/``false``. Every key has a
default, so the empty text is a valid manifest.
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field

import numpy as np

from .domain import SYMBOL_MODES, DomainSpec, GridField
from .evolution import FLUXES, MODELS, SPLITTINGS, SimConfig
from .operators import FracParams

PRESETS = ("constant", "bump", "two_bumps", "riemann_step", "random_clipped")
OUTPUTS = ("series", "snapshots", "sweep")
SWEEP_AXES = ("s", "epsilon", "sigma")


class ConfigError(ValueError):
    """Malformed or out-of-range manifest; ``line`` is set for syntax errors."""

    def __init__(self, message: str, line: int | None = None):
        super().__init__(f"line {line}: {message}" if line is not None else message)
        self.line = line


@dataclass(frozen=True)
class RunManifest:
    domain: DomainSpec = field(default_factory=lambda: DomainSpec((1.0,), (128,)))
    config: SimConfig = field(default_factory=SimConfig)
    preset: str = "bump"
    level: float = 0.5  # value of the constant preset
    seed: int = 0
    snapshots: int = 1  # evenly spaced output times in (0, t_end]
    outputs: tuple[str, ...] = ("series", "snapshots")
    output_dir: str = "out"
    sweep_axis: str | None = None
    sweep_values: tuple[float, ...] = ()
    sweep_defect: bool = False
    defect_window: tuple[int, int] = (4, 4)

    def __post_init__(self):
        if self.preset not in PRESETS:
            raise ConfigError(f"initial.preset must be one of {PRESETS}, got {self.preset!r}")
        if not 0.0 <= self.level <= 1.0:
            raise ConfigError(f"initial.level must lie in [0, 1], got {self.level}")
        if self.seed < 0:
            raise ConfigError(f"initial.seed must be >= 0, got {self.seed}")
        if self.snapshots < 1:
            raise ConfigError(f"output.snapshots must be >= 1, got {self.snapshots}")
        bad = [o for o in self.outputs if o not in OUTPUTS]
        if bad:
            raise ConfigError(f"output.artifacts entries must be among {OUTPUTS}, got {bad}")
        if self.sweep_axis is not None:
            if self.sweep_axis not in SWEEP_AXES:
                raise ConfigError(f"sweep.axis must be one of {SWEEP_AXES} or none, got {self.sweep_axis!r}")
            if len(self.sweep_values) < 2:
                raise ConfigError(f"sweep.values needs at least 2 entries, got {len(self.sweep_values)}")
        if min(self.defect_window) < 1:
            raise ConfigError(f"sweep.defect_window entries must be >= 1, got {self.defect_window}")

    @property
    def output_times(self) -> tuple[float, ...]:
        t_end = self.config.t_end
        return tuple(t_end * (i + 1) / self.snapshots for i in range(self.snapshots))


# -- value codecs ----------------------------------------------------------


def _float(text: str) -> float:
    v = float(text)
    if not math.isfinite(v):
        raise ValueError(f"not a finite number: {text!r}")
    return v


def _bool(text: str) -> bool:
    low = text.lower()
    if low not in ("true", "false"):
        raise ValueError(f"expected true or false, got {text!r}")
    return low == "true"


def _list(conv):
    def parse(text: str):
        items = [t.strip() for t in text.split(",") if t.strip()]
        return tuple(conv(t) for t in items)

    return parse


def _optional_axis(text: str):
    return None if text.lower() == "none" else text


def _fmt(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, tuple):
        return ", ".join(_fmt(x) for x in v)
    if v is None:
        return "none"
    return str(v)


# (section, key) -> (flat field name, parser)
_KEYS: dict[tuple[str, str], tuple[str, object]] = {
    ("domain", "lengths"): ("lengths", _list(_float)),
    ("domain", "cells"): ("cells", _list(int)),
    ("domain", "symbol_mode"): ("symbol_mode", str),
    ("model", "s"): ("s", _float),
    ("model", "sigma"): ("sigma", _float),
    ("model", "epsilon"): ("epsilon", _float),
    ("model", "model"): ("model", str),
    ("time", "t_end"): ("t_end", _float),
    ("time", "cfl"): ("cfl", _float),
    ("time", "splitting"): ("splitting", str),
    ("time", "flux"): ("flux", str),
    ("initial", "preset"): ("preset", str),
    ("initial", "level"): ("level", _float),
    ("initial", "seed"): ("seed", int),
    ("output", "artifacts"): ("outputs", _list(str)),
    ("output", "dir"): ("output_dir", str),
    ("output", "snapshots"): ("snapshots", int),
    ("output", "diag_levels"): ("diag_levels", _list(_float)),
    ("sweep", "axis"): ("sweep_axis", _optional_axis),
    ("sweep", "values"): ("sweep_values", _list(_float)),
    ("sweep", "defect"): ("sweep_defect", _bool),
    ("sweep", "defect_window"): ("defect_window", _list(int)),
}

_LEGAL = {
    "lengths": "positive reals, one per axis",
    "cells": "integers >= 2, one per axis (1 or 2 axes)",
    "symbol_mode": f"one of {SYMBOL_MODES}",
    "s": "the open interval (0, 1)",
    "sigma": "the closed interval [0, 1]",
    "epsilon": "reals > 0",
    "model": f"one of {MODELS}",
    "t_end": "reals > 0",
    "cfl": "the half-open interval (0, 1]",
    "splitting": f"one of {SPLITTINGS}",
    "flux": f"one of {FLUXES}",
    "diag_levels": "sorted reals in [0, 1]",
}


def _build(flat: dict) -> RunManifest:
    d = RunManifest()
    c = d.config
    get = flat.get

    def guarded(name, make):
        try:
            return make()
        except ConfigError:
            raise
        except (ValueError, TypeError) as exc:
            raise ConfigError(f"invalid {name}: {exc}; legal range is {_LEGAL.get(name, 'see docs')}") from None

    lengths = get("lengths", d.domain.lengths)
    cells = get("cells", d.domain.cells)
    if len(lengths) == 1 and len(cells) == 2:
        lengths = lengths * 2
    if len(cells) == 1 and len(lengths) == 2:
        cells = cells * 2
    domain = guarded(
        "cells" if "cells" in flat else "lengths",
        lambda: DomainSpec(tuple(lengths), tuple(cells), get("symbol_mode", d.domain.symbol_mode)),
    )
    for name in ("s", "sigma"):
        if name in flat:
            guarded(name, lambda: FracParams(**{name: flat[name]}))
    frac = FracParams(get("s", c.frac.s), get("sigma", c.frac.sigma))
    config = c
    for name in ("epsilon", "model", "t_end", "cfl", "splitting", "flux", "diag_levels"):
        if name in flat:
            config = guarded(name, lambda: dataclasses.replace(config, **{name: flat[name]}))
    config = dataclasses.replace(config, frac=frac)
    extra = {k: flat[k] for k in ("preset", "level", "seed", "outputs", "output_dir", "snapshots",
                                    "sweep_axis", "sweep_values", "sweep_defect") if k in flat}
    if "defect_window" in flat:
        w = flat["defect_window"]
        if len(w) != 2:
            raise ConfigError(f"sweep.defect_window needs 2 integers (cells, steps), got {len(w)}")
        extra["defect_window"] = tuple(w)
    return RunManifest(domain=domain, config=config, **extra)


def parse_config(text: str) -> RunManifest:
    section = None
    flat: dict = {}
    seen: set[tuple[str, str]] = set()
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("["):
            if not line.endswith("]"):
                raise ConfigError(f"unterminated section header {raw.strip()!r}", lineno)
            section = line[1:-1].strip()
            if section not in {s for s, _ in _KEYS}:
                raise ConfigError(f"unknown section [{section}]", lineno)
            continue
        if "=" not in line:
            raise ConfigError(f"expected 'key = value', got {raw.strip()!r}", lineno)
        if section is None:
            raise ConfigError("key outside of any [section]", lineno)
        key, value = (t.strip() for t in line.split("=", 1))
        if (section, key) not in _KEYS:
            raise ConfigError(f"unknown key {key!r} in [{section}]", lineno)
        if (section, key) in seen:
            raise ConfigError(f"duplicate key {key!r} in [{section}]", lineno)
        seen.add((section, key))
        name, conv = _KEYS[(section, key)]
        try:
            flat[name] = conv(value)
        except ValueError as exc:
            raise ConfigError(f"bad value for {section}.{key}: {exc}", lineno) from None
    return _build(flat)


def render_config(m: RunManifest) -> str:
    """Inverse of parse_config: every key written explicitly."""
    c = m.config
    values = {
        "lengths": m.domain.lengths,
        "cells": m.domain.cells,
        "symbol_mode": m.domain.symbol_mode,
        "s": c.frac.s,
        "sigma": c.frac.sigma,
        "epsilon": c.epsilon,
        "model": c.model,
        "t_end": c.t_end,
        "cfl": c.cfl,
        "splitting": c.splitting,
        "flux": c.flux,
        "preset": m.preset,
        "level": m.level,
        "seed": m.seed,
        "outputs": m.outputs,
        "output_dir": m.output_dir,
        "snapshots": m.snapshots,
        "diag_levels": c.diag_levels,
        "sweep_axis": m.sweep_axis,
        "sweep_values": m.sweep_values,
        "sweep_defect": m.sweep_defect,
        "defect_window": m.defect_window,
    }
    lines: list[str] = []
    current = None
    for (section, key), (name, _) in _KEYS.items():
        if section != current:
            if lines:
                lines.append("")
            lines.append(f"[{section}]")
            current = section
        lines.append(f"{key} = {_fmt(values[name])}")
    return "\n".join(lines) + "\n"


# -- initial data ----------------------------------------------------------


def _gauss(x: np.ndarray, center: float, width: float) -> np.ndarray:
    return np.exp(-(((x - center) / width) ** 2))


def make_initial_data(preset: str, domain: DomainSpec, *, level: float = 0.5, seed: int = 0) -> GridField:
    """Initial density in [0, 1] on the cell midpoints.

    In 2D the profiles are products of the 1D profile along each axis, except
    ``riemann_step`` which splits along the first axis only.
    """
    if preset not in PRESETS:
        raise ConfigError(f"preset must be one of {PRESETS}, got {preset!r}")
    mesh = domain.mesh()
    L = domain.lengths
    if preset == "constant":
        if not 0.0 <= level <= 1.0:
            raise ConfigError(f"constant level must lie in [0, 1], got {level}")
        u = np.full(domain.shape, float(level))
    elif preset == "bump":
        u = 0.9 * np.prod([_gauss(x, l / 2, l / 8) for x, l in zip(mesh, L)], axis=0)
    elif preset == "two_bumps":
        u = 0.8 * np.prod([_gauss(x, 0.3 * l, l / 10) + _gauss(x, 0.7 * l, l / 10) for x, l in zip(mesh, L)], axis=0)
    elif preset == "riemann_step":
        u = np.where(mesh[0] < L[0] / 2, 0.9, 0.1)
    else:
        u = np.random.default_rng(seed).uniform(0.0, 1.0, domain.shape)
    return GridField(np.clip(u, 0.0, 1.0), domain)


def manifest_initial_data(m: RunManifest) -> GridField:
    return make_initial_data(m.preset, m.domain, level=m.level, seed=m.seed)
