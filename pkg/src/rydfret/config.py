"""Run configuration text format and run manifest.

One ``key = value unit`` entry per line; ``#`` starts a comment. Physical
quantities must carry a unit; lists are comma separated and ranges use
``start:stop:step`` (stop included). Example::

    experiment = time-scan
    seed = 7
    field_noise = 10 mV/cm
    separations = 20, 30, 40, 50 um
    times = 0:25:0.5 us
"""

from __future__ import annotations

import hashlib
import json
import re
from dataclasses import asdict, dataclass, fields, replace

import numpy as np

from . import __version__
from .atomic import StarkModel
from .ensemble import NoiseModel, ShotConfig, TruncationPolicy, VolumeSpec
from .errors import ConfigError

EXPERIMENTS = ("pair", "field-scan", "position-scan", "time-scan", "converge")

# unit -> factor to the canonical unit, grouped by dimension
UNITS = {
    "field": ("V/cm", {"V/cm": 1.0, "mV/cm": 1e-3}),
    "length": ("um", {"um": 1.0, "mm": 1e3, "nm": 1e-3}),
    "time": ("us", {"us": 1.0, "ns": 1e-3, "ms": 1e3}),
    "energy": ("MHz", {"MHz": 1.0, "kHz": 1e-3, "GHz": 1e3}),
    "rate": ("kHz", {"kHz": 1.0, "Hz": 1e-3, "MHz": 1e3}),
    "slope": ("MHz/(V/cm)", {"MHz/(V/cm)": 1.0, "kHz/(mV/cm)": 1.0}),
    "count": ("atoms", {"atoms": 1.0}),
    "fraction": ("", {"": 1.0}),
    "int": ("", {"": 1.0}),
    "text": ("", {"": 1.0}),
    "bool": ("", {"": 1.0}),
}
FIELD_NOISE_UNITS = {"mV/cm": 1.0, "V/cm": 1e3}

_FIELDS = tuple(np.round(np.arange(0.34, 0.45 + 1e-9, 0.001), 6).tolist())
_TIMES = tuple(np.round(np.arange(0.0, 25.0 + 1e-9, 0.5), 6).tolist())


@dataclass(frozen=True)
class RunConfig:
    """Validated run configuration; physical values in canonical units."""

    experiment: str = "pair"
    seed: int = 0
    shots: int = 200
    workers: int = 1
    out: str = "results"
    stark_mode: str = "empirical"
    f1: float = 0.38  # V/cm
    f2: float = 0.41  # V/cm
    stark_slope: float = 127.0  # MHz/(V/cm)
    field: float = 0.38  # V/cm, pair and converge runs
    fields: tuple = _FIELDS  # V/cm
    branch: str = "F1"
    separation: float = 40.0  # um
    separations: tuple = (20.0, 30.0, 40.0, 50.0)  # um
    time: float = 10.0  # us
    times: tuple = _TIMES  # us
    s_count: float = 12.5
    d_count: float = 16.0
    s_diameter: float = 11.6  # um, 1/sqrt(e) full width
    d_diameter: float = 16.3  # um
    cloud_length: float = 500.0  # um
    spectators_42p: float = 0.0
    spectators_43p: float = 0.0
    field_noise: float = 2.0  # mV/cm
    magnetic: float = 1.4  # MHz
    blackbody: float = 0.0  # kHz
    decay: float = 0.0  # kHz
    truncation: str = "fixed"
    trunc_s: int = 2
    trunc_d: int = 3
    trunc_p42: int = 0
    tolerance: float = 0.01
    atom_cap: int = 8
    basis_cap: int = 20000
    mode: str = "scalar"
    exchange: bool = True
    close_pairs: str = "reject"
    position_blur: float = 0.0  # um
    threshold: float = 0.17


# key -> (dimension, list?)
SCHEMA = {
    "experiment": ("text", False), "seed": ("int", False), "shots": ("int", False),
    "workers": ("int", False), "out": ("text", False), "stark_mode": ("text", False),
    "f1": ("field", False), "f2": ("field", False), "stark_slope": ("slope", False),
    "field": ("field", False), "fields": ("field", True), "branch": ("text", False),
    "separation": ("length", False), "separations": ("length", True), "time": ("time", False),
    "times": ("time", True), "s_count": ("count", False), "d_count": ("count", False),
    "s_diameter": ("length", False), "d_diameter": ("length", False), "cloud_length": ("length", False),
    "spectators_42p": ("count", False), "spectators_43p": ("count", False),
    "field_noise": ("field_noise", False), "magnetic": ("energy", False), "blackbody": ("rate", False),
    "decay": ("rate", False), "truncation": ("text", False), "trunc_s": ("int", False),
    "trunc_d": ("int", False), "trunc_p42": ("int", False), "tolerance": ("fraction", False),
    "atom_cap": ("int", False), "basis_cap": ("int", False), "mode": ("text", False),
    "exchange": ("bool", False), "close_pairs": ("text", False), "position_blur": ("length", False),
    "threshold": ("fraction", False),
}

CHOICES = {
    "experiment": EXPERIMENTS,
    "stark_mode": ("empirical", "perturbative"),
    "branch": ("F1", "F2"),
    "truncation": ("fixed", "convergence"),
    "mode": ("scalar", "tensor"),
    "close_pairs": ("reject", "cap"),
}


def _unit_table(dim):
    if dim == "field_noise":
        return "mV/cm", FIELD_NOISE_UNITS
    return UNITS[dim]


def _number(tok, line_no, key):
    try:
        return float(tok)
    except ValueError:
        raise ConfigError(f"line {line_no}: {key}: {tok!r} is not a number") from None


def _split_unit(raw, line_no, key, dim):
    canon, table = _unit_table(dim)
    if dim in ("text", "bool", "int", "fraction"):
        return raw.strip(), 1.0
    # longest unit suffix that matches
    for unit in sorted(table, key=len, reverse=True):
        if unit and raw.endswith(unit) and (len(raw) == len(unit) or raw[-len(unit) - 1].isspace()):
            return raw[: -len(unit)].strip(), table[unit]
    m = re.search(r"\s([^\s\d][^\s]*)$", raw)
    if m:
        raise ConfigError(f"line {line_no}: {key}: unit {m.group(1)!r} not accepted; use {canon}")
    raise ConfigError(f"line {line_no}: {key}: missing unit (expected {canon})")


def _parse_values(body, line_no, key, is_list):
    items = []
    for part in (p.strip() for p in body.split(",")):
        if not part:
            raise ConfigError(f"line {line_no}: {key}: empty list entry")
        if ":" in part:
            if not is_list:
                raise ConfigError(f"line {line_no}: {key}: ranges only allowed for list keys")
            a, b, s = (_number(t, line_no, key) for t in part.split(":"))
            if s <= 0 or b < a:
                raise ConfigError(f"line {line_no}: {key}: bad range {part!r}")
            n = int(np.floor((b - a) / s + 1e-9)) + 1
            items += [round(a + k * s, 12) for k in range(n)]
        else:
            items.append(_number(part, line_no, key))
    if not is_list and len(items) != 1:
        raise ConfigError(f"line {line_no}: {key}: expected one value")
    return items


def _convert(key, raw, line_no):
    dim, is_list = SCHEMA[key]
    body, factor = _split_unit(raw, line_no, key, dim)
    if dim == "text":
        if key in CHOICES and body not in CHOICES[key]:
            raise ConfigError(f"line {line_no}: {key}: {body!r} not one of {', '.join(CHOICES[key])}")
        if not body:
            raise ConfigError(f"line {line_no}: {key}: empty value")
        return body
    if dim == "bool":
        if body.lower() not in ("true", "false"):
            raise ConfigError(f"line {line_no}: {key}: expected true or false")
        return body.lower() == "true"
    if dim == "int":
        try:
            return int(body)
        except ValueError:
            raise ConfigError(f"line {line_no}: {key}: {body!r} is not an integer") from None
    if dim == "fraction" and re.search(r"[^\d.eE+\-\s]", body):
        raise ConfigError(f"line {line_no}: {key}: dimensionless value expected, got {body!r}")
    vals = [v * factor for v in _parse_values(body, line_no, key, bool(is_list))]
    return tuple(vals) if is_list else vals[0]


def validate(cfg):
    """Range checks shared by the parser and programmatic construction."""
    pos = ("shots", "workers", "atom_cap", "basis_cap", "trunc_s")
    for k in pos:
        if getattr(cfg, k) < 1:
            raise ConfigError(f"{k} must be >= 1")
    nonneg = ("s_count", "d_count", "spectators_42p", "spectators_43p", "field_noise", "magnetic", "blackbody",
              "decay", "field", "trunc_d", "trunc_p42", "position_blur")
    for k in nonneg:
        if getattr(cfg, k) < 0:
            raise ConfigError(f"{k} must be non-negative")
    for k in ("s_diameter", "d_diameter", "cloud_length", "stark_slope"):
        if getattr(cfg, k) <= 0:
            raise ConfigError(f"{k} must be positive")
    if not cfg.f1 < cfg.f2:
        raise ConfigError("f1 must be below f2")
    if not 0 < cfg.threshold < 1 or not 0 < cfg.tolerance < 1:
        raise ConfigError("threshold and tolerance must lie in (0, 1)")
    if not 0 <= cfg.seed < 2**64:
        raise ConfigError("seed must be a 64-bit unsigned integer")
    for k in ("fields", "separations", "times"):
        v = getattr(cfg, k)
        if len(v) == 0 or any(b <= a for a, b in zip(v, v[1:])):
            raise ConfigError(f"{k} must be a non-empty strictly increasing list")
    if cfg.times[0] != 0.0 or cfg.times[0] < 0:
        raise ConfigError("times must start at 0 us")
    if min(cfg.fields) < 0 or cfg.separation <= 0:
        raise ConfigError("fields must be non-negative and separation positive")
    return cfg


def parse_config(text):
    """Strict parse of the key = value unit format."""
    values = {}
    for line_no, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {line_no}: expected 'key = value unit'")
        key, raw = (s.strip() for s in line.split("=", 1))
        if key not in SCHEMA:
            raise ConfigError(f"line {line_no}: unknown key {key!r}")
        if key in values:
            raise ConfigError(f"line {line_no}: duplicate key {key!r}")
        if not raw:
            raise ConfigError(f"line {line_no}: {key}: empty value")
        values[key] = _convert(key, raw, line_no)
    return validate(RunConfig(**values))


def _fmt(v):
    return repr(float(v))


# execution settings that never change results
RUNTIME_KEYS = ("workers", "out")


def serialize_config(cfg, runtime=True):
    """Text form that parses back to an equal RunConfig.

    ``runtime=False`` drops the execution-only keys, giving the form that is
    hashed and stored next to results.
    """
    lines = []
    for key, (dim, is_list) in SCHEMA.items():
        if not runtime and key in RUNTIME_KEYS:
            continue
        v = getattr(cfg, key)
        canon, _ = _unit_table(dim)
        if dim == "bool":
            body = "true" if v else "false"
        elif dim in ("text", "int"):
            body = str(v)
        elif is_list:
            body = ", ".join(_fmt(x) for x in v)
        else:
            body = _fmt(v)
        lines.append(f"{key} = {body} {canon}".rstrip())
    return "\n".join(lines) + "\n"


def config_hash(cfg):
    return hashlib.sha256(serialize_config(cfg, runtime=False).encode()).hexdigest()[:16]


def stark_model(cfg):
    if cfg.stark_mode == "perturbative":
        return StarkModel.perturbative()
    return StarkModel(resonance_fields=(cfg.f1, cfg.f2), slope=cfg.stark_slope)


def shot_config(cfg, separation=None):
    """The ensemble-level configuration implied by a RunConfig."""
    d = cfg.separation if separation is None else separation
    vols = (
        VolumeSpec((float(d), 0.0, 0.0), (cfg.s_diameter, cfg.s_diameter, cfg.cloud_length), cfg.s_count, "s"),
        VolumeSpec((0.0, 0.0, 0.0), (cfg.d_diameter, cfg.d_diameter, cfg.cloud_length), cfg.d_count, "d"),
    )
    trunc = TruncationPolicy(cfg.truncation, cfg.trunc_s, cfg.trunc_d, cfg.trunc_p42, cfg.tolerance, cfg.atom_cap)
    noise = NoiseModel(cfg.field_noise, cfg.magnetic, cfg.blackbody, cfg.decay)
    return ShotConfig(
        seed=cfg.seed, volumes=vols, spectators=(cfg.spectators_42p, cfg.spectators_43p), stark=stark_model(cfg),
        branches=(cfg.branch,), electric_field=cfg.field, times=tuple(cfg.times), truncation=trunc, noise=noise,
        mode="scalar", exchange=cfg.exchange, close_pairs=cfg.close_pairs, position_blur=cfg.position_blur,
    )


def with_overrides(cfg, **kw):
    kw = {k: v for k, v in kw.items() if v is not None}
    unknown = set(kw) - {f.name for f in fields(cfg)}
    if unknown:
        raise ConfigError(f"unknown override(s): {sorted(unknown)}")
    return validate(replace(cfg, **kw))


@dataclass(frozen=True)
class RunManifest:
    config_hash: str
    seed: int
    version: str
    experiment: str
    outputs: dict  # file name -> sha256
    warnings: tuple = ()
    timestamp: str = ""

    def to_json(self):
        d = asdict(self)
        d["warnings"] = list(self.warnings)
        return json.dumps(d, indent=2, sort_keys=True) + "\n"

    @classmethod
    def build(cls, cfg, files, warnings=(), timestamp=""):
        sums = {name: hashlib.sha256(data.encode()).hexdigest() for name, data in sorted(files.items())}
        return cls(config_hash(cfg), cfg.seed, __version__, cfg.experiment, sums, tuple(warnings), timestamp)
