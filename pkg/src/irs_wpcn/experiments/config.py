"""Scenario configuration: JSON files, presets and validation.

A config file is one JSON object.  Every key is optional when defaults are
enabled; missing values come from the chosen ``preset``.  Power fields
(``p_max``, ``noise``) accept watts or strings such as ``"43dBm"``; gain
fields (``gamma_th``, ``pathloss_ref``, ``rician_hap_irs``,
``rician_irs_user``) accept linear values or strings such as ``"10dB"``.

Schema::

    {
      "preset": "full" | "desk" | "full_position" | "desk_position",
      "geometry": {"hap": [x, y, z], "irs": [x, y, z],
                   "user_center": [x, y, z], "user_radius": r,
                   "spacing": d_over_lambda},
      "channel": {"antennas": N, "elements": M, "users": K,
                  "pathloss_ref": C0, "alpha": .., "beta": .., "o": ..,
                  "rician_hap_irs": kappa, "rician_irs_user": vartheta},
      "system": {"p_max": .., "noise": .., "gamma_th": .., "xi": .., "a": ..,
                 "b": .., "eps_mode": "relative" | "absolute",
                 "eps_scale": .., "threshold": .., "tau_init": ..,
                 "max_ao_iters": .., "dc_max_iters": .., "dc_eps_rel": ..,
                 "sdr_candidates": .., "solver_tol": ..},
      "sweep": {"name": <sweep>, "values": [..]},
      "trials": T, "master_seed": s, "variants": [..], "workers": w
    }

``sweep.values`` defaults to the preset grid of the named sweep.  Sweep
values are in natural units except ``sinr`` (dB) and ``irs_position``
(x coordinate of the IRS in metres).
"""

from __future__ import annotations

import copy
import hashlib
import json
import re
from dataclasses import dataclass, field

import numpy as np

from ..ao import Variant
from ..channel import ChannelParams, Geometry, sample_user_positions
from ..errors import ConfigInvalid, ConfigParseError
from ..params import SystemParams
from ..robust import EhParams, db_to_linear, dbm_to_watts

SWEEPS = ("convergence", "antennas", "elements", "users", "sinr", "epsilon", "irs_position")

_FULL = {
    "geometry": {"hap": [0.0, 0.0, 15.0], "irs": [50.0, 50.0, 15.0], "user_center": [50.0, 45.0, 0.0], "user_radius": 5.0, "spacing": 0.5},
    "channel": {
        "antennas": 6,
        "elements": 20,
        "users": 4,
        "pathloss_ref": "-30dB",
        "alpha": 3.0,
        "beta": 2.2,
        "o": 2.5,
        "rician_hap_irs": "3dB",
        "rician_irs_user": "3dB",
    },
    "system": {
        "p_max": "43dBm",
        "noise": "-70dBm",
        "gamma_th": "10dB",
        "xi": 0.024,
        "a": 150.0,
        "b": 0.024,
        "eps_mode": "relative",
        "eps_scale": 0.01,
        "threshold": 1e-3,
        "tau_init": 0.5,
        "max_ao_iters": 100,
        "dc_max_iters": 50,
        "dc_eps_rel": 1e-6,
        "sdr_candidates": 1000,
        "solver_tol": 1e-8,
    },
    "grids": {
        "convergence": [20, 40, 60],
        "antennas": [4, 5, 6, 7, 8],
        "elements": [20, 40, 60],
        "users": [2, 3, 4],
        "sinr": [5.0, 10.0, 15.0],
        "epsilon": [1e-3, 3e-3, 1e-2, 3e-2],
        "irs_position": [10.0, 20.0, 30.0, 40.0, 50.0],
    },
    "sweep": {"name": "convergence", "values": [20]},
    "trials": 20,
    "master_seed": 0,
    "variants": [v.value for v in Variant],
    "workers": 1,
}

#: large-scale layout used for the IRS-position study
_POSITION_GEOMETRY = {"hap": [0.0, 0.0, 0.0], "irs": [30.0, 0.0, 0.0], "user_center": [60.0, 0.0, 0.0], "user_radius": 10.0, "spacing": 0.5}

#: distances shrink by this factor in the desk presets
DESK_SCALE = 0.1


def _scaled(geom: dict, s: float) -> dict:
    out = dict(geom)
    for key in ("hap", "irs", "user_center"):
        out[key] = [s * float(v) for v in geom[key]]
    out["user_radius"] = s * float(geom["user_radius"])
    return out


def _presets() -> dict:
    full = copy.deepcopy(_FULL)
    desk = copy.deepcopy(_FULL)
    desk["geometry"] = _scaled(_FULL["geometry"], DESK_SCALE)
    desk["system"]["noise"] = "-100dBm"
    desk["system"]["eps_scale"] = 1e-3
    desk["grids"]["epsilon"] = [1e-4, 3e-4, 1e-3, 3e-3]
    desk["grids"]["irs_position"] = [DESK_SCALE * v for v in _FULL["grids"]["irs_position"]]
    pos = copy.deepcopy(full)
    pos["geometry"] = copy.deepcopy(_POSITION_GEOMETRY)
    pos["channel"]["alpha"] = 2.5
    pos["channel"]["beta"] = 2.5
    pos["sweep"] = {"name": "irs_position", "values": list(full["grids"]["irs_position"])}
    desk_pos = copy.deepcopy(desk)
    desk_pos["geometry"] = _scaled(_POSITION_GEOMETRY, DESK_SCALE)
    desk_pos["channel"]["alpha"] = 2.5
    desk_pos["channel"]["beta"] = 2.5
    desk_pos["sweep"] = {"name": "irs_position", "values": list(desk["grids"]["irs_position"])}
    return {"full": full, "desk": desk, "full_position": pos, "desk_position": desk_pos}


PRESETS = _presets()

_NUM_DB = re.compile(r"^\s*([-+]?(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?)\s*(dBm|dB)?\s*$")
_POWER_FIELDS = {"p_max", "noise"}
_GAIN_FIELDS = {"gamma_th", "pathloss_ref", "rician_hap_irs", "rician_irs_user"}


def parse_quantity(value, kind: str) -> float:
    """Convert a number or dB/dBm string to a linear float.

    ``kind`` is ``"power"`` (``dBm`` to watts, plain numbers are watts),
    ``"gain"`` (``dB`` to linear) or ``"plain"`` (no unit allowed).
    """
    if isinstance(value, bool):
        raise ValueError("boolean is not a number")
    if isinstance(value, (int, float)):
        return float(value)
    if not isinstance(value, str):
        raise ValueError(f"expected a number or string, got {type(value).__name__}")
    mt = _NUM_DB.match(value)
    if mt is None:
        raise ValueError(f"cannot parse {value!r}")
    num, unit = float(mt.group(1)), mt.group(2)
    if unit is None:
        return num
    if kind == "power" and unit == "dBm":
        return dbm_to_watts(num)
    if kind == "power" and unit == "dB":
        # dBW
        return db_to_linear(num)
    if kind == "gain" and unit == "dB":
        return db_to_linear(num)
    raise ValueError(f"unit {unit!r} not allowed here")


@dataclass(frozen=True)
class GeometryConfig:
    hap: tuple
    irs: tuple
    user_center: tuple
    user_radius: float
    spacing: float = 0.5

    def realise(self, users: int, seed: int, irs_x: float | None = None) -> Geometry:
        irs = np.array(self.irs, dtype=float)
        if irs_x is not None:
            irs[0] = irs_x
        pos = sample_user_positions(self.user_center, self.user_radius, users, seed)
        return Geometry(np.array(self.hap, dtype=float), irs, pos, self.spacing)


@dataclass(frozen=True)
class SweepConfig:
    name: str
    values: tuple


@dataclass(frozen=True)
class ScenarioConfig:
    geometry: GeometryConfig
    channel: ChannelParams
    system: SystemParams
    sweep: SweepConfig
    trials: int = 20
    master_seed: int = 0
    variants: tuple = tuple(v.value for v in Variant)
    workers: int = 1
    raw: dict = field(default_factory=dict, compare=False, repr=False)

    def digest(self) -> str:
        """Short hash of the resolved settings (independent of ``workers``)."""
        payload = {k: v for k, v in self.raw.items() if k != "workers"}
        text = json.dumps(payload, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(text.encode()).hexdigest()[:16]

    def with_overrides(self, trials=None, master_seed=None, variants=None, sweep=None, workers=None) -> "ScenarioConfig":
        """Re-resolve with command-line style overrides applied."""
        raw = copy.deepcopy(self.raw)
        if trials is not None:
            raw["trials"] = trials
        if master_seed is not None:
            raw["master_seed"] = master_seed
        if variants is not None:
            raw["variants"] = list(variants)
        if workers is not None:
            raw["workers"] = workers
        if sweep is not None and sweep != raw["sweep"]["name"]:
            raw["sweep"] = {"name": sweep, "values": list(raw["grids"].get(sweep, []))}
        return resolve(raw, defaults=False)


def _merge(base: dict, over: dict) -> dict:
    out = copy.deepcopy(base)
    for k, v in over.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = _merge(out[k], v)
        else:
            out[k] = copy.deepcopy(v)
    return out


_REQUIRED = {
    "geometry": ("hap", "irs", "user_center", "user_radius"),
    "channel": ("antennas", "elements", "users", "pathloss_ref", "alpha", "beta", "o", "rician_hap_irs", "rician_irs_user"),
    "system": ("p_max", "noise", "gamma_th", "xi", "a", "b", "eps_mode", "eps_scale", "threshold"),
}

_KNOWN_TOP = {"preset", "geometry", "channel", "system", "grids", "sweep", "trials", "master_seed", "variants", "workers"}


def resolve(data: dict, defaults: bool = True) -> ScenarioConfig:
    """Validate a config mapping and build a :class:`ScenarioConfig`.

    All violations are collected and raised together as
    :class:`ConfigInvalid`.
    """
    errors = []
    if not isinstance(data, dict):
        raise ConfigInvalid([("<root>", "config must be a JSON object")])
    for key in data:
        if key not in _KNOWN_TOP:
            errors.append((key, "unknown field"))
    preset = data.get("preset", "full")
    if preset not in PRESETS:
        errors.append(("preset", f"unknown preset {preset!r}; choose from {sorted(PRESETS)}"))
        preset = "full"
    if defaults:
        raw = _merge(PRESETS[preset], {k: v for k, v in data.items() if k != "preset"})
        if "sweep" in data and isinstance(data["sweep"], dict) and "values" not in data["sweep"]:
            name = data["sweep"].get("name")
            raw["sweep"]["values"] = list(raw["grids"].get(name, [])) if isinstance(name, str) else []
    else:
        raw = copy.deepcopy(data)
        for sect, keys in _REQUIRED.items():
            for key in keys:
                if key not in raw.get(sect, {}):
                    errors.append((f"{sect}.{key}", "missing"))
        for key in ("sweep", "trials", "master_seed", "variants"):
            if key not in raw:
                errors.append((key, "missing"))
        raw.setdefault("grids", PRESETS[preset]["grids"])
    raw["preset"] = preset
    if any(msg == "missing" for _, msg in errors):
        raise ConfigInvalid(errors)

    def num(path, value, kind="plain", integer=False, lo=None, lo_open=False, hi=None):
        try:
            x = parse_quantity(value, kind)
        except ValueError as exc:
            errors.append((path, str(exc)))
            return None
        if not np.isfinite(x):
            errors.append((path, "must be finite"))
            return None
        if integer and x != int(x):
            errors.append((path, "must be an integer"))
            return None
        if lo is not None and (x < lo or (lo_open and x == lo)):
            errors.append((path, f"must be {'>' if lo_open else '>='} {lo}"))
        if hi is not None and x > hi:
            errors.append((path, f"must be <= {hi}"))
        return int(x) if integer else x

    def vec3(path, value):
        if not isinstance(value, (list, tuple)) or len(value) != 3:
            errors.append((path, "must be a list of three numbers"))
            return (0.0, 0.0, 0.0)
        return tuple(num(f"{path}[{i}]", v) or 0.0 for i, v in enumerate(value))

    g = raw.get("geometry", {})
    geom = GeometryConfig(
        vec3("geometry.hap", g.get("hap")),
        vec3("geometry.irs", g.get("irs")),
        vec3("geometry.user_center", g.get("user_center")),
        num("geometry.user_radius", g.get("user_radius"), lo=0.0) or 0.0,
        num("geometry.spacing", g.get("spacing", 0.5), lo=0.0, lo_open=True) or 0.5,
    )
    for key in g:
        if key not in ("hap", "irs", "user_center", "user_radius", "spacing"):
            errors.append((f"geometry.{key}", "unknown field"))

    c = raw.get("channel", {})
    ch_kw = {}
    for key in ("antennas", "elements", "users"):
        ch_kw[key] = num(f"channel.{key}", c.get(key), integer=True, lo=1)
    ch_kw["pathloss_ref"] = num("channel.pathloss_ref", c.get("pathloss_ref"), "gain", lo=0.0, lo_open=True)
    for key in ("alpha", "beta", "o"):
        ch_kw[key] = num(f"channel.{key}", c.get(key), lo=0.0)
    for key in ("rician_hap_irs", "rician_irs_user"):
        ch_kw[key] = num(f"channel.{key}", c.get(key), "gain", lo=0.0)
    for key in c:
        if key not in ch_kw:
            errors.append((f"channel.{key}", "unknown field"))

    s = raw.get("system", {})
    eh_kw = {
        "xi": num("system.xi", s.get("xi"), lo=0.0, lo_open=True),
        "a": num("system.a", s.get("a"), lo=0.0, lo_open=True),
        "b": num("system.b", s.get("b"), lo=0.0),
    }
    sys_kw = {
        "p_max": num("system.p_max", s.get("p_max"), "power", lo=0.0, lo_open=True),
        "noise": num("system.noise", s.get("noise"), "power", lo=0.0, lo_open=True),
        "gamma_th": num("system.gamma_th", s.get("gamma_th"), "gain", lo=0.0, lo_open=True),
        "eps_scale": num("system.eps_scale", s.get("eps_scale"), lo=0.0),
        "threshold": num("system.threshold", s.get("threshold"), lo=0.0, lo_open=True),
    }
    mode = s.get("eps_mode", "relative")
    if mode not in ("relative", "absolute"):
        errors.append(("system.eps_mode", "must be 'relative' or 'absolute'"))
    sys_kw["eps_mode"] = mode
    optional = {
        "tau_init": dict(lo=0.0, lo_open=True, hi=1.0),
        "max_ao_iters": dict(integer=True, lo=1),
        "max_hap_iters": dict(integer=True, lo=1),
        "dc_max_iters": dict(integer=True, lo=1),
        "dc_eps_rel": dict(lo=0.0, lo_open=True),
        "sdr_candidates": dict(integer=True, lo=1),
        "solver_tol": dict(lo=0.0, lo_open=True),
    }
    for key, kw in optional.items():
        if key in s:
            sys_kw[key] = num(f"system.{key}", s[key], **kw)
    known_sys = set(eh_kw) | set(sys_kw)
    for key in s:
        if key not in known_sys:
            errors.append((f"system.{key}", "unknown field"))

    sw = raw.get("sweep", {})
    name = sw.get("name") if isinstance(sw, dict) else None
    if name not in SWEEPS:
        errors.append(("sweep.name", f"must be one of {list(SWEEPS)}"))
    values = sw.get("values", []) if isinstance(sw, dict) else []
    if not isinstance(values, (list, tuple)) or len(values) == 0:
        errors.append(("sweep.values", "grid must be a non-empty list"))
        values = []
    integer_sweep = name in ("convergence", "antennas", "elements", "users")
    vals = tuple(num(f"sweep.values[{i}]", v, integer=integer_sweep, lo=1 if integer_sweep else None) for i, v in enumerate(values))
    if name == "epsilon":
        for i, v in enumerate(vals):
            if v is not None and v < 0:
                errors.append((f"sweep.values[{i}]", "radius must be >= 0"))

    trials = num("trials", raw.get("trials"), integer=True, lo=1)
    seed = num("master_seed", raw.get("master_seed"), integer=True, lo=0)
    workers = num("workers", raw.get("workers", 1), integer=True, lo=1)
    variants = raw.get("variants")
    if not isinstance(variants, (list, tuple)) or not variants:
        errors.append(("variants", "must be a non-empty list"))
        variants = []
    good = []
    for i, v in enumerate(variants):
        try:
            good.append(Variant(v).value)
        except ValueError:
            errors.append((f"variants[{i}]", f"unknown variant {v!r}"))
    if len(set(good)) != len(good):
        errors.append(("variants", "duplicate entries"))

    if errors:
        raise ConfigInvalid(errors)
    channel = ChannelParams(**ch_kw)
    try:
        system = SystemParams(eh=EhParams(**eh_kw), **sys_kw)
    except Exception as exc:  # EH parameter domain
        raise ConfigInvalid([("system", str(exc))]) from exc
    # canonical copy for hashing: what the run actually uses
    raw["sweep"] = {"name": name, "values": list(vals)}
    raw["variants"] = good
    raw["trials"], raw["master_seed"], raw["workers"] = trials, seed, workers
    return ScenarioConfig(geom, channel, system, SweepConfig(name, vals), trials, seed, tuple(good), workers, raw)


def load_config(path, defaults: bool = True) -> ScenarioConfig:
    """Read, parse and validate a JSON config file.

    An empty (or whitespace-only) file yields the preset defaults when
    ``defaults`` is true.

    Raises
    ------
    ConfigParseError
        Malformed JSON; the error names the line and column.
    ConfigInvalid
        Validation failures, all listed with their field paths.
    """
    with open(path, encoding="utf-8") as fh:
        text = fh.read()
    if not text.strip():
        data = {}
    else:
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigParseError([(f"line {exc.lineno} column {exc.colno}", exc.msg)]) from exc
    return resolve(data, defaults=defaults)


def default_config(preset: str = "full", **overrides) -> ScenarioConfig:
    """Config of a preset with top-level fields replaced by ``overrides``."""
    return resolve(dict(preset=preset, **overrides))


__all__ = [
    "DESK_SCALE",
    "GeometryConfig",
    "PRESETS",
    "SWEEPS",
    "ScenarioConfig",
    "SweepConfig",
    "default_config",
    "load_config",
    "parse_quantity",
    "resolve",
]
