"""Experiment configuration: JSON files whose physical values carry unit strings.

Every physical entry is written as ``"<number> <unit>"`` (``"100 G"``,
``"2 kHz"``, ``"20 us"``, ``"0.15 nm"``). Bare numbers are rejected for
physical keys so a file can never be misread in the wrong units. Times may
also be given in ``tc1``, the first critical time of the constant-field
quench at the reference field, which is resolved when the scenario runs.
"""

import copy
import json
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

from .constants import TWO_PI

SCENARIOS = ("field-quench", "central-quench", "sweep", "fisher", "validate", "entanglement")

_UNITS = {
    "field": {"G": 1.0, "mT": 10.0, "T": 1.0e4},
    "frequency": {"Hz": TWO_PI, "kHz": TWO_PI * 1e3, "MHz": TWO_PI * 1e6, "GHz": TWO_PI * 1e9},
    "time": {"s": 1.0, "ms": 1e-3, "us": 1e-6, "μs": 1e-6, "ns": 1e-9, "tc1": None},
    "length": {"m": 1.0, "nm": 1e-9, "pm": 1e-12, "A": 1e-10},
}
_QUANTITY = re.compile(r"^\s*([-+]?(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?)\s*([A-Za-zμ0-9]+)\s*$")


class ConfigError(ValueError):
    """Schema or unit violation, with the offending key and line when known."""

    def __init__(self, message, key=None, line=None):
        self.key = key
        self.line = line
        where = f" (line {line})" if line else ""
        super().__init__(f"{message}{where}")


@dataclass(frozen=True)
class Quantity:
    """A parsed value in SI/internal units; ``in_tc1`` marks a deferred multiple of tc1."""

    value: float
    text: str
    in_tc1: bool = False

    def resolve(self, tc1: Optional[float] = None) -> float:
        if not self.in_tc1:
            return self.value
        if tc1 is None:
            raise ConfigError(f"'{self.text}' needs the reference critical time")
        return self.value * tc1


def parse_quantity(text, kind: str, key: str = "?", line=None) -> Quantity:
    if isinstance(text, bool) or not isinstance(text, str):
        raise ConfigError(f"'{key}' must be a string with a {kind} unit, got {text!r}", key, line)
    m = _QUANTITY.match(text)
    if not m:
        raise ConfigError(f"'{key}' = {text!r} is not '<number> <unit>'", key, line)
    number, unit = float(m.group(1)), m.group(2)
    table = _UNITS[kind]
    if unit not in table:
        raise ConfigError(f"'{key}' has unit {unit!r}; expected one of {sorted(table)}", key, line)
    if table[unit] is None:
        return Quantity(number, text, in_tc1=True)
    return Quantity(number * table[unit], text)


# key -> unit kind for every physical entry, per section
_SCHEMA = {
    "scenario": None,
    "name": None,
    "system": {
        "n_nuclei": int, "beta": "frequency", "dataset": str, "ms": int, "initial_state": str,
    },
    "fields": {
        "kind": str, "bx": "field", "bz": "field", "bx0": "field", "amplitude": "field",
        "period": "time", "center": "time", "width": "time", "reference_bx": "field",
    },
    "grid": {"t_end": "time", "step": "time", "dt": "time"},
    "sweep": {"bx_min": "field", "bx_max": "field", "bx_points": int,
              "bz_min": "field", "bz_max": "field", "bz_points": int,
              "bz_values": "field_list", "horizon": "time", "n_output": int},
    "probe": {"state": str, "measured_site": int, "delta_beta": "frequency"},
    "validation": {"t2n_star": "time", "t2e": "time", "distance": "length", "method": str},
    "observables": {"concurrence": bool, "tangle": bool, "phase_profile": bool},
    "output": {"dir": str, "svg": bool},
    "runs": "runs",
}

DEFAULTS = {
    "system": {"n_nuclei": 2, "beta": "2 kHz", "ms": 1},
    "fields": {"kind": "constant", "bx": "100 G", "bz": "50 G", "reference_bx": "100 G"},
    "grid": {"t_end": "20 us", "step": "10 ns", "dt": "1 ns"},
    "output": {"dir": "out", "svg": False},
}


@dataclass
class ExperimentConfig:
    """Validated configuration. ``raw`` keeps the unit strings for echoing."""

    scenario: str
    name: str
    raw: dict
    runs: list = field(default_factory=list)

    def section(self, name: str, run: Optional[dict] = None) -> dict:
        base = dict(self.raw.get(name, {}))
        if run is not None:
            base.update(run.get(name, {}))
        return base

    def quantity(self, section: str, key: str, run=None) -> Optional[Quantity]:
        val = self.section(section, run).get(key)
        if val is None:
            return None
        return parse_quantity(val, _SCHEMA[section][key], f"{section}.{key}")

    @property
    def output_dir(self) -> str:
        return self.raw["output"]["dir"]

    @property
    def svg(self) -> bool:
        return bool(self.raw["output"].get("svg", False))


def _line_of(text: Optional[str], key: str):
    if not text:
        return None
    pat = re.compile(r'"%s"\s*:' % re.escape(key))
    for n, ln in enumerate(text.splitlines(), start=1):
        if pat.search(ln):
            return n
    return None


def _check_section(name, body, text, where=""):
    spec = _SCHEMA[name]
    if not isinstance(body, dict):
        raise ConfigError(f"section '{where}{name}' must be an object", name, _line_of(text, name))
    for key, val in body.items():
        line = _line_of(text, key)
        if key not in spec:
            raise ConfigError(f"unknown key '{where}{name}.{key}'", key, line)
        kind = spec[key]
        label = f"{where}{name}.{key}"
        if kind in _UNITS:
            parse_quantity(val, kind, label, line)
        elif kind == "field_list":
            if not isinstance(val, list) or not val:
                raise ConfigError(f"'{label}' must be a nonempty list", key, line)
            for v in val:
                parse_quantity(v, "field", label, line)
        elif kind is bool:
            if not isinstance(val, bool):
                raise ConfigError(f"'{label}' must be true or false", key, line)
        elif kind is int:
            if isinstance(val, bool) or not isinstance(val, int):
                raise ConfigError(f"'{label}' must be an integer", key, line)
        elif kind is str:
            if not isinstance(val, str):
                raise ConfigError(f"'{label}' must be a string", key, line)


def validate(raw: dict, text: Optional[str] = None) -> ExperimentConfig:
    """Check keys, types and units; fill defaults; return an :class:`ExperimentConfig`."""
    if not isinstance(raw, dict):
        raise ConfigError("configuration must be a JSON object")
    for key in raw:
        if key not in _SCHEMA:
            raise ConfigError(f"unknown key '{key}'", key, _line_of(text, key))
    scenario = raw.get("scenario")
    if scenario not in SCENARIOS:
        raise ConfigError(f"scenario must be one of {list(SCENARIOS)}, got {scenario!r}", "scenario",
                          _line_of(text, "scenario"))
    cfg = copy.deepcopy(raw)
    for sec, defaults in DEFAULTS.items():
        merged = dict(defaults)
        if sec == "fields" and "kind" in cfg.get(sec, {}) and cfg[sec]["kind"] != "constant":
            merged = {"kind": cfg[sec]["kind"], "bz": defaults["bz"], "reference_bx": defaults["reference_bx"]}
        merged.update(cfg.get(sec, {}))
        cfg[sec] = merged
    for sec in _SCHEMA:
        if isinstance(_SCHEMA[sec], dict) and sec in cfg:
            _check_section(sec, cfg[sec], text)
    kind = cfg["fields"].get("kind")
    if kind not in ("constant", "oscillating", "gaussian"):
        raise ConfigError(f"fields.kind must be constant, oscillating or gaussian, got {kind!r}", "kind",
                          _line_of(text, "kind"))
    runs = cfg.get("runs", [])
    if not isinstance(runs, list):
        raise ConfigError("'runs' must be a list", "runs", _line_of(text, "runs"))
    for k, run in enumerate(runs):
        if not isinstance(run, dict) or not isinstance(run.get("label"), str):
            raise ConfigError(f"runs[{k}] must be an object with a string 'label'", "runs", _line_of(text, "runs"))
        for sec, body in run.items():
            if sec == "label":
                continue
            if sec not in _SCHEMA or not isinstance(_SCHEMA[sec], dict) or sec == "output":
                raise ConfigError(f"runs[{k}] cannot override '{sec}'", sec, _line_of(text, sec))
            _check_section(sec, body, text, where=f"runs[{k}].")
    name = cfg.get("name") or scenario
    if not isinstance(name, str) or not re.fullmatch(r"[A-Za-z0-9_.-]+", name):
        raise ConfigError(f"name {name!r} must be a plain file stem", "name", _line_of(text, "name"))
    cfg["name"] = name
    return ExperimentConfig(scenario, name, cfg, runs)


def load_config(path) -> ExperimentConfig:
    """Read and validate a configuration file."""
    p = Path(path)
    if not p.is_file():
        raise FileNotFoundError(f"config file not found: {p}")
    text = p.read_text(encoding="utf-8")
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"invalid JSON: {exc.msg}", line=exc.lineno) from None
    return validate(raw, text)


# --------------------------------------------------------------------------- aliases

SCENARIO_ALIASES = {
    "fig2": {
        "scenario": "field-quench", "name": "fig2",
        "fields": {"kind": "constant", "bx": "100 G", "bz": "50 G"},
        "grid": {"t_end": "20 us", "step": "10 ns"},
    },
    "fig3": {
        "scenario": "sweep", "name": "fig3",
        "sweep": {"bx_min": "0 G", "bx_max": "300 G", "bx_points": 60,
                  "bz_min": "0 G", "bz_max": "100 G", "bz_points": 60,
                  "bz_values": ["5 G", "50 G"], "horizon": "20 us", "n_output": 2000},
    },
    "fig4": {
        "scenario": "central-quench", "name": "fig4",
        "system": {"ms": 1},
        "fields": {"kind": "constant", "bx": "0 G", "bz": "0 G"},
        "grid": {"t_end": "60 us", "step": "10 ns"},
        "runs": [{"label": "dreau", "system": {"dataset": "dreau"}},
                 {"label": "nizovtsev", "system": {"dataset": "nizovtsev"}}],
    },
    "fig5a": {
        "scenario": "field-quench", "name": "fig5a",
        "fields": {"kind": "oscillating", "bx0": "50 G", "amplitude": "50 G", "period": "2 tc1", "bz": "50 G"},
        "grid": {"t_end": "15 us", "step": "10 ns", "dt": "1 ns"},
        "runs": [{"label": "T2tc1", "fields": {"period": "2 tc1"}},
                 {"label": "T6tc1", "fields": {"period": "6 tc1"}}],
    },
    "fig5b": {
        "scenario": "field-quench", "name": "fig5b",
        "fields": {"kind": "gaussian", "amplitude": "200 G", "center": "3 tc1", "width": "1.5 tc1", "bz": "50 G"},
        "grid": {"t_end": "20 us", "step": "10 ns", "dt": "1 ns"},
    },
    "fig6": {
        "scenario": "fisher", "name": "fig6",
        "fields": {"kind": "constant", "bx": "0 G", "bz": "50 G"},
        "grid": {"t_end": "20 us", "step": "50 ns", "dt": "1 ns"},
        "probe": {"state": "↑↓", "measured_site": 1},
        "runs": [
            {"label": "bx0"},
            {"label": "gaussian", "probe": {"state": "↓↓"},
             "fields": {"kind": "gaussian", "amplitude": "200 G", "center": "3 tc1", "width": "1.5 tc1"}},
        ],
    },
    "fig8": {
        "scenario": "entanglement", "name": "fig8",
        "fields": {"kind": "constant", "bx": "100 G", "bz": "5 G"},
        "grid": {"t_end": "40 us", "step": "10 ns"},
        "observables": {"concurrence": True, "phase_profile": True},
    },
    "fig9": {
        "scenario": "entanglement", "name": "fig9",
        "system": {"n_nuclei": 3},
        "fields": {"kind": "constant", "bx": "100 G", "bz": "5 G"},
        "grid": {"t_end": "40 us", "step": "10 ns"},
        "observables": {"tangle": True},
    },
    "fig10": {
        "scenario": "field-quench", "name": "fig10",
        "fields": {"kind": "constant", "bx": "100 G", "bz": "50 G"},
        "grid": {"t_end": "10 us", "step": "10 ns"},
        "runs": [{"label": "N2", "system": {"n_nuclei": 2}},
                 {"label": "N4", "system": {"n_nuclei": 4}},
                 {"label": "N8", "system": {"n_nuclei": 8}}],
    },
    "validate": {
        "scenario": "validate", "name": "validate",
        "fields": {"kind": "constant", "bx": "100 G", "bz": "50 G"},
        "grid": {"t_end": "20 us", "step": "20 ns", "dt": "1 ns"},
        "validation": {"t2n_star": "0.5 ms", "t2e": "7 us", "distance": "3 nm", "method": "split"},
    },
}
for _s in SCENARIOS:
    SCENARIO_ALIASES.setdefault(_s, {"scenario": _s})


def alias_config(name: str) -> ExperimentConfig:
    try:
        raw = SCENARIO_ALIASES[name]
    except KeyError:
        raise ConfigError(f"unknown scenario alias {name!r}; known: {sorted(SCENARIO_ALIASES)}") from None
    return validate(copy.deepcopy(raw))
