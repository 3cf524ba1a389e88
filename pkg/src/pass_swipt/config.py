"""Run-configuration files.

A run is described by an INI file with sections [system], [ius], [eus],
[pso], and [sweep]. Units sit in the key names: transmit and noise powers
cross the boundary in dBm (40 dBm = 10 W), geometry in metres, harvest
thresholds in watts. Omitted [system] keys fall back to the default
simulation setup (28 GHz carrier, -90 dBm noise, 40 dBm budget, four
antennas on a 20 m guide at 3 m height, rectifier efficiency 0.5).

A minimal file::

    [ius]
    iu1 = -4, 5

    [eus]
    eu1 = -5, -3

The [eus] section must be present even when empty, so that a run without
harvesters is a visible choice rather than a typo.
"""

from __future__ import annotations

import configparser
import re
from dataclasses import dataclass, field

import numpy as np

from .model import (
    ConfigurationError,
    Scenario,
    SystemParams,
    UserPos,
    dbm_to_watts,
)
from .pso import PsoConfig

PROTOCOLS = ("single-pair", "fdma", "tdma", "noma", "con1", "con2")
MA_SCHEMES = ("fdma", "tdma", "noma")

_SECTIONS = ("system", "ius", "eus", "pso", "sweep")

# [system] key -> (SystemParams field, cast); powers are converted below
_SYSTEM_KEYS = {
    "carrier_ghz": ("carrier_frequency_hz", float),
    "power_dbm": ("total_power_w", float),
    "noise_dbm": ("noise_power_w", float),
    "antennas": ("num_antennas", int),
    "length_m": ("waveguide_length_m", float),
    "height_m": ("waveguide_height_m", float),
    "rectifier_eff": ("energy_conversion_eff", float),
    "refractive_index": ("refractive_index", float),
    "min_spacing_m": ("min_spacing_m", float),
}

_PSO_KEYS = {
    "swarm_size": int,
    "max_iters": int,
    "inertia_start": float,
    "inertia_end": float,
    "cognitive": float,
    "social": float,
    "penalty_spacing": float,
    "penalty_range": float,
    "penalty_energy": float,
    "max_stages": int,
    "restart_tol": float,
}

_SWEEP_KEYS = ("protocol", "ma", "rho_min", "rho_max", "rho_step",
               "eps_points", "eps_max_frac", "eps_w")


def default_rho_grid(lo: float = 0.0, hi: float = 1.0,
                     step: float = 0.05) -> tuple[float, ...]:
    """lo, lo+step, ... hi; values rounded so the text form stays clean."""
    if step <= 0.0:
        raise ConfigurationError(f"rho_step must be > 0, got {step}")
    if not 0.0 <= lo < hi <= 1.0:
        raise ConfigurationError(
            f"rho grid must satisfy 0 <= min < max <= 1, got [{lo}, {hi}]")
    count = int(np.floor((hi - lo) / step + 1e-9)) + 1
    grid = [round(lo + i * step, 10) for i in range(count)]
    if grid[-1] < hi - 1e-9:
        grid.append(round(hi, 10))
    return tuple(float(g) for g in grid)


@dataclass(frozen=True)
class RunConfig:
    """Everything a run needs: the scenario, swarm overrides, and the grids.

    seed / out / jobs are command-line concerns; they default here and the
    CLI fills them in with dataclasses.replace.
    """

    source: str
    scenario: Scenario
    pso: PsoConfig | None = None
    protocol: str | None = None
    ma: str = "fdma"                       # resource scheme for con1 / con2
    rho_grid: tuple[float, ...] = field(default_factory=default_rho_grid)
    eps_grid_w: tuple[float, ...] | None = None   # explicit grid, if any
    eps_points: int = 12
    eps_max_frac: float = 0.95
    seed: int = 0
    out: str | None = None
    jobs: int = 1

    def __post_init__(self):
        if not self.rho_grid:
            raise ConfigurationError("rho grid must be non-empty")
        if any(b <= a for a, b in zip(self.rho_grid, self.rho_grid[1:])):
            raise ConfigurationError("rho grid must be strictly increasing")
        if self.eps_grid_w is not None:
            if not self.eps_grid_w:
                raise ConfigurationError("eps grid must be non-empty")
            if any(b <= a for a, b in
                   zip(self.eps_grid_w, self.eps_grid_w[1:])):
                raise ConfigurationError("eps grid must be strictly increasing")


def eps_grid_from_ceiling(e_max: float, points: int = 12,
                          max_frac: float = 0.95,
                          span_decades: float = 2.0) -> tuple[float, ...]:
    """Harvest-threshold grid: 0 (unconstrained), then log-spaced up to
    max_frac * e_max. Log spacing cannot literally start at zero, so the
    first positive point sits span_decades below the top.
    """
    if points < 1:
        raise ConfigurationError(f"eps_points must be >= 1, got {points}")
    if not 0.0 < max_frac <= 1.0:
        raise ConfigurationError(
            f"eps_max_frac must be in (0, 1], got {max_frac}")
    if not np.isfinite(e_max) or e_max <= 0.0:
        raise ConfigurationError(
            f"harvest ceiling must be positive and finite, got {e_max}")
    if points == 1:
        return (0.0,)
    top = max_frac * e_max
    tail = np.geomspace(top / 10.0 ** span_decades, top, points - 1)
    return (0.0,) + tuple(float(v) for v in tail)


def _option_line(path: str, section: str, option: str) -> int | None:
    """Line number of `option` inside `[section]`, scanned from the text."""
    pat = re.compile(rf"\s*{re.escape(option)}\s*[=:]", re.IGNORECASE)
    inside = False
    try:
        with open(path, "r", encoding="utf-8") as fh:
            for num, raw in enumerate(fh, start=1):
                stripped = raw.strip()
                if stripped.startswith("[") and stripped.endswith("]"):
                    inside = stripped[1:-1].strip().lower() == section.lower()
                elif inside and pat.match(raw):
                    return num
    except OSError:
        return None
    return None


def _fail(path: str, section: str, option: str | None, msg: str):
    line = _option_line(path, section, option) if option else None
    where = f"{path}:{line}" if line else path
    opt = f" {option}" if option else ""
    raise ConfigurationError(f"{where}: [{section}]{opt}: {msg}")


def _get(cp, path, section, option, cast, default):
    if not cp.has_option(section, option):
        return default
    raw = cp.get(section, option)
    try:
        value = cast(raw)
    except ValueError:
        _fail(path, section, option,
              f"expected {cast.__name__}, got {raw!r}")
    return value


def _parse_users(cp, path, section, kind, half_len):
    users = []
    for name, raw in cp.items(section):
        parts = [p.strip() for p in raw.split(",")]
        if len(parts) != 2:
            _fail(path, section, name,
                  f"expected 'x, y' in metres, got {raw!r}")
        try:
            x, y = float(parts[0]), float(parts[1])
        except ValueError:
            _fail(path, section, name,
                  f"coordinates must be numbers, got {raw!r}")
        if abs(x) > half_len or abs(y) > half_len:
            _fail(path, section, name,
                  f"({x}, {y}) lies outside the served square "
                  f"|x|, |y| <= {half_len} m")
        users.append(UserPos(x, y, kind=kind))
    return tuple(users)


def load_config(path: str) -> RunConfig:
    cp = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    try:
        with open(path, "r", encoding="utf-8") as fh:
            cp.read_file(fh)
    except OSError as exc:
        raise ConfigurationError(f"cannot read {path}: {exc}") from exc
    except configparser.Error as exc:
        # configparser messages already carry line numbers
        raise ConfigurationError(f"{path}: {exc}") from exc

    for section in cp.sections():
        if section not in _SECTIONS:
            raise ConfigurationError(
                f"{path}: unknown section [{section}] "
                f"(expected one of {', '.join(_SECTIONS)})")
    for section, known in (("system", _SYSTEM_KEYS), ("pso", _PSO_KEYS),
                           ("sweep", _SWEEP_KEYS)):
        if cp.has_section(section):
            for option in cp.options(section):
                if option not in known:
                    _fail(path, section, option, "unknown key")

    kwargs = {}
    if cp.has_section("system"):
        for key, (fld, cast) in _SYSTEM_KEYS.items():
            if cp.has_option("system", key):
                kwargs[fld] = _get(cp, path, "system", key, cast, None)
    if "carrier_frequency_hz" in kwargs:
        kwargs["carrier_frequency_hz"] *= 1e9
    for fld in ("total_power_w", "noise_power_w"):
        if fld in kwargs:
            kwargs[fld] = dbm_to_watts(kwargs[fld])
    try:
        params = SystemParams(**kwargs)
    except ConfigurationError as exc:
        raise ConfigurationError(f"{path}: [system]: {exc}") from exc

    if not cp.has_section("ius"):
        raise ConfigurationError(f"{path}: missing [ius] section")
    if not cp.has_section("eus"):
        raise ConfigurationError(
            f"{path}: missing [eus] section (declare it even when empty)")
    half = params.half_length_m
    ius = _parse_users(cp, path, "ius", "IU", half)
    eus = _parse_users(cp, path, "eus", "EU", half)
    if not ius:
        raise ConfigurationError(f"{path}: [ius] lists no users")
    try:
        scenario = Scenario(params, ius, eus)
    except ConfigurationError as exc:
        raise ConfigurationError(f"{path}: {exc}") from exc

    pso = None
    if cp.has_section("pso") and cp.options("pso"):
        overrides = {key: _get(cp, path, "pso", key, cast, None)
                     for key, cast in _PSO_KEYS.items()
                     if cp.has_option("pso", key)}
        for key, value in overrides.items():
            if key != "inertia_end" and value <= 0:
                _fail(path, "pso", key, f"must be positive, got {value}")
        pso = PsoConfig(**overrides)

    protocol = None
    ma = "fdma"
    rho_args = {}
    eps_points, eps_max_frac, eps_grid = 12, 0.95, None
    if cp.has_section("sweep"):
        protocol = _get(cp, path, "sweep", "protocol", str, None)
        if protocol is not None:
            protocol = protocol.strip().lower()
            if protocol not in PROTOCOLS:
                _fail(path, "sweep", "protocol",
                      f"must be one of {', '.join(PROTOCOLS)}")
        ma = _get(cp, path, "sweep", "ma", str, "fdma").strip().lower()
        if ma not in MA_SCHEMES:
            _fail(path, "sweep", "ma",
                  f"must be one of {', '.join(MA_SCHEMES)}")
        for key, name in (("rho_min", "lo"), ("rho_max", "hi"),
                          ("rho_step", "step")):
            if cp.has_option("sweep", key):
                rho_args[name] = _get(cp, path, "sweep", key, float, None)
        eps_points = _get(cp, path, "sweep", "eps_points", int, 12)
        eps_max_frac = _get(cp, path, "sweep", "eps_max_frac", float, 0.95)
        if cp.has_option("sweep", "eps_w"):
            raw = cp.get("sweep", "eps_w")
            try:
                eps_grid = tuple(float(tok) for tok in raw.split(","))
            except ValueError:
                _fail(path, "sweep", "eps_w",
                      f"expected comma-separated watts, got {raw!r}")
            if any(e < 0 for e in eps_grid):
                _fail(path, "sweep", "eps_w", "thresholds must be >= 0")

    try:
        rho_grid = default_rho_grid(**rho_args)
        return RunConfig(
            source=path, scenario=scenario, pso=pso, protocol=protocol,
            ma=ma, rho_grid=rho_grid, eps_grid_w=eps_grid,
            eps_points=eps_points, eps_max_frac=eps_max_frac)
    except ConfigurationError as exc:
        raise ConfigurationError(f"{path}: [sweep]: {exc}") from exc


def load_scenario(path: str) -> Scenario:
    """Just the physical scenario from a run file."""
    return load_config(path).scenario
