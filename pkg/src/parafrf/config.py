"""Run configuration: JSON schema, defaults and digest."""
from __future__ import annotations

import copy
import json
from dataclasses import dataclass
from pathlib import Path

import jsonschema

from . import _io
from .errors import InvalidArgumentError

FORMAT_VERSION = 1

_num = {"type": "number"}
_pos = {"type": "number", "exclusiveMinimum": 0}
_nonneg = {"type": "number", "minimum": 0}
_posint = {"type": "integer", "minimum": 1}
_optposint = {"type": ["integer", "null"], "minimum": 1}


def _obj(props: dict, required=()) -> dict:
    return {"type": "object", "properties": props, "additionalProperties": False,
            "required": list(required)}


SCHEMA = _obj({
    "format_version": {"const": FORMAT_VERSION},
    "seed": {"type": "integer", "minimum": 0},
    "plant": {"type": ["string", "null"]},
    "loads": {"type": ["array", "null"], "items": _pos, "minItems": 1},
    "band_hz": {"type": "array", "items": _nonneg, "minItems": 2, "maxItems": 2},
    "acquisition": _obj({
        "sample_rate_hz": _pos,
        "block_duration_s": _pos,
        "n_blocks": _posint,
        "snr_db": {"type": ["number", "null"]},
        "chirp_f0_hz": _pos,
        "chirp_f1_hz": _pos,
        "max_freq_hz": _pos,
    }),
    "smoothing": _obj({"sigma_bins": {"type": ["number", "null"], "exclusiveMinimum": 0}}),
    "decimate": _obj({"factor": _posint}),
    "vf": _obj({
        "order": _posint,
        "tol": _pos,
        "max_iters": _posint,
        "relaxed": {"type": "boolean"},
        "enforce_stability": {"type": "boolean"},
    }),
    "paaa": _obj({
        "tol": _pos,
        "max_l": _optposint,
        "max_q": _optposint,
        "stagnation_window": _posint,
        "stagnation_drop": _nonneg,
    }),
    "inversion": _obj({
        "magnitude_floor": _nonneg,
        "regularization_eps": _nonneg,
        "detrend": {"type": "boolean"},
    }),
    "test": _obj({
        "shape": {"enum": ["periodic_chirp", "sine", "triangle", "square"]},
        "freq_hz": _pos,
        "target_rms": {"type": ["number", "null"], "exclusiveMinimum": 0},
        "loads": {"type": ["array", "null"], "items": _pos, "minItems": 1},
    }),
}, required=["format_version"])

DEFAULTS = {
    "format_version": FORMAT_VERSION,
    "seed": 0,
    "plant": None,
    "loads": None,
    "band_hz": [3.0, 70.0],
    "acquisition": {
        "sample_rate_hz": 256.0,
        "block_duration_s": 128.0,
        "n_blocks": 20,
        "snr_db": 40.0,
        "chirp_f0_hz": 0.01,
        "chirp_f1_hz": 100.0,
        "max_freq_hz": 100.0,
    },
    "smoothing": {"sigma_bins": 8.0},
    "decimate": {"factor": 8},
    "vf": {"order": 10, "tol": 1e-6, "max_iters": 30, "relaxed": False, "enforce_stability": True},
    "paaa": {"tol": 1e-3, "max_l": None, "max_q": None, "stagnation_window": 5,
             "stagnation_drop": 1e-3},
    "inversion": {"magnitude_floor": 0.0, "regularization_eps": 0.0, "detrend": True},
    "test": {"shape": "periodic_chirp", "freq_hz": 10.0, "target_rms": None, "loads": None},
}


class ConfigError(InvalidArgumentError):
    """Schema or semantic violations; ``violations`` lists every one found."""

    def __init__(self, violations: list[str]):
        self.violations = list(violations)
        super().__init__("; ".join(self.violations))


@dataclass(frozen=True)
class RunConfig:
    data: dict
    source: str | None = None

    def __getitem__(self, key):
        return self.data[key]

    def section(self, name: str) -> dict:
        return dict(self.data[name])

    def to_json(self) -> str:
        return _io.dumps_json(self.data)

    def digest(self) -> str:
        return _io.digest_json(self.data)

    def provenance(self, tool_version: str) -> dict:
        return {"tool": "parafrf", "version": tool_version, "config_digest": self.digest()}


def _path(err) -> str:
    return ".".join(str(p) for p in err.absolute_path) or "<root>"


def _merge(defaults: dict, given: dict) -> dict:
    out = copy.deepcopy(defaults)
    for key, val in given.items():
        if isinstance(val, dict) and isinstance(out.get(key), dict):
            out[key] = _merge(out[key], val)
        else:
            out[key] = copy.deepcopy(val)
    return out


def _semantic_checks(cfg: dict) -> list[str]:
    v = []
    lo, hi = cfg["band_hz"]
    if not lo < hi:
        v.append("band_hz: lower edge must be below upper edge")
    acq = cfg["acquisition"]
    nyq = acq["sample_rate_hz"] / 2
    if acq["chirp_f0_hz"] > acq["chirp_f1_hz"]:
        v.append("acquisition.chirp_f0_hz: must not exceed chirp_f1_hz")
    if acq["chirp_f1_hz"] >= nyq:
        v.append(f"acquisition.chirp_f1_hz: must be below Nyquist ({nyq:g} Hz)")
    if acq["max_freq_hz"] > nyq:
        v.append(f"acquisition.max_freq_hz: must not exceed Nyquist ({nyq:g} Hz)")
    if cfg["test"]["freq_hz"] >= nyq:
        v.append(f"test.freq_hz: must be below Nyquist ({nyq:g} Hz)")
    inv = cfg["inversion"]
    if inv["magnitude_floor"] > 0 and inv["regularization_eps"] > 0:
        v.append("inversion: set at most one of magnitude_floor and regularization_eps")
    for key in ("loads",):
        vals = cfg[key]
        if vals is not None and any(b <= a for a, b in zip(vals, vals[1:])):
            v.append(f"{key}: must be strictly increasing")
    return v


def validate_config(raw) -> RunConfig:
    """Validate a parsed config and fill defaults. Every violation is reported."""
    if not isinstance(raw, dict):
        raise ConfigError(["<root>: config must be a JSON object"])
    validator = jsonschema.Draft202012Validator(SCHEMA)
    errors = sorted(validator.iter_errors(raw), key=lambda e: (_path(e), e.message))
    if errors:
        raise ConfigError([f"{_path(e)}: {e.message}" for e in errors])
    cfg = _merge(DEFAULTS, raw)
    sem = _semantic_checks(cfg)
    if sem:
        raise ConfigError(sem)
    return RunConfig(cfg)


def load_config(path) -> RunConfig:
    path = Path(path)
    try:
        raw = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError([f"<root>: not valid JSON ({exc.msg} at line {exc.lineno})"]) from None
    cfg = validate_config(raw)
    return RunConfig(cfg.data, str(path))


def default_config() -> RunConfig:
    return RunConfig(copy.deepcopy(DEFAULTS))
