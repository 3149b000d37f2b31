"""Experiment specifications: JSON loading, defaults and validation."""

from __future__ import annotations

import dataclasses
import json
import math
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np

from fibermi.channels import InputDistribution
from fibermi.dsp import LinkConfig, validate_oversampling
from fibermi.estimators import EstimatorConfig

PRESET_KINDS = ("awgn", "mimo2x2", "zero-dispersion", "dispersive", "realistic", "custom")
CHANNELS = PRESET_KINDS[:-1]

# sweep variable accepted by each channel
SWEEP_VARIABLES = {
    "awgn": ("snr_db",),
    "mimo2x2": ("alpha_rad",),
    "zero-dispersion": ("power_dbm",),
    "dispersive": ("spans",),
    "realistic": ("power_dbm",),
}

# real dimensions of (x, y) per channel for a block size b
_DIMS = {
    "awgn": lambda b: (2, 2),
    "mimo2x2": lambda b: (4, 4),
    "zero-dispersion": lambda b: (2, 2),
    "dispersive": lambda b: (2, 2 * b),
    "realistic": lambda b: (2, 2),
}

_CHANNEL_DEFAULTS = {
    "awgn": {},
    "mimo2x2": {"snr_db": 6.0},
    "zero-dispersion": {},
    "dispersive": {"power_dbm": -30.0, "oversampling": 4, "rolloff": 0.2},
    "realistic": {"oversampling": 8, "rolloff": 0.2, "step_km": 0.1, "dbp_step_km": None},
}


class ConfigError(ValueError):
    """Invalid experiment configuration; ``field`` names the offending entry."""

    def __init__(self, field_name: str, message: str):
        self.field = field_name
        super().__init__(f"{field_name}: {message}")


@dataclass(frozen=True)
class Sweep:
    variable: str
    values: tuple

    def __post_init__(self):
        if not self.values:
            raise ConfigError("sweep", "sweep must contain at least one point")


@dataclass
class ExperimentSpec:
    name: str
    preset: str
    channel: str
    sweep: Sweep
    estimators: list
    inputs: list
    n: int
    seed: int = 0
    link: LinkConfig | None = None
    params: dict = field(default_factory=dict)
    outputs: dict = field(default_factory=dict)
    plot: dict = field(default_factory=dict)
    description: str = ""
    record_wall_time: bool = False

    def replace(self, **kw) -> "ExperimentSpec":
        return dataclasses.replace(self, **kw)

    def with_n(self, n: int) -> "ExperimentSpec":
        if n < 100:
            raise ConfigError("n_override", f"n must be >= 100, got {n}")
        spec = self.replace(n=int(n))
        validate(spec)
        return spec

    @property
    def dims(self):
        return _DIMS[self.channel]

    @property
    def block_sizes(self) -> list:
        return sorted({e.block for e in self.estimators})


def _require(obj: dict, key: str, where: str):
    if key not in obj:
        raise ConfigError(f"{where}{key}", "missing required field")
    return obj[key]


def _number(value, name, kind=float):
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(name, f"expected a number, got {value!r}")
    if kind is int:
        if int(value) != value:
            raise ConfigError(name, f"expected an integer, got {value!r}")
        return int(value)
    if not math.isfinite(value):
        raise ConfigError(name, "must be finite")
    return float(value)


def _parse_sweep(raw) -> Sweep:
    if not isinstance(raw, dict):
        raise ConfigError("sweep", "expected an object")
    var = _require(raw, "variable", "sweep.")
    scale = raw.get("multiplier", 1)
    if scale == "pi":
        scale = math.pi
    scale = _number(scale, "sweep.multiplier")
    if "values" in raw:
        vals = raw["values"]
        if not isinstance(vals, list):
            raise ConfigError("sweep.values", "expected a list")
        vals = [_number(v, "sweep.values") for v in vals]
    elif "start" in raw and "stop" in raw:
        start = _number(raw["start"], "sweep.start")
        stop = _number(raw["stop"], "sweep.stop")
        if "num" in raw:
            num = _number(raw["num"], "sweep.num", int)
            if num < 1:
                raise ConfigError("sweep.num", "must be >= 1")
            vals = list(np.linspace(start, stop, num))
        else:
            step = _number(_require(raw, "step", "sweep."), "sweep.step")
            if step <= 0:
                raise ConfigError("sweep.step", "must be > 0")
            count = int(math.floor((stop - start) / step + 1e-9)) + 1
            if count < 1:
                raise ConfigError("sweep", "stop lies before start")
            vals = [round(start + i * step, 12) for i in range(count)]
    else:
        raise ConfigError("sweep.values", "missing required field (or start/stop)")
    vals = tuple(float(v) * scale for v in vals)
    return Sweep(str(var), vals)


def _parse_estimator(raw, i) -> EstimatorConfig:
    where = f"estimators[{i}]."
    if not isinstance(raw, dict):
        raise ConfigError(f"estimators[{i}]", "expected an object")
    known = {f.name for f in dataclasses.fields(EstimatorConfig)}
    extra = set(raw) - known
    if extra:
        raise ConfigError(where + sorted(extra)[0], "unknown estimator field")
    method = _require(raw, "method", where)
    try:
        return EstimatorConfig(**{**raw, "method": str(method).lower()})
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"estimators[{i}]", str(exc)) from None


def _parse_input(raw, i) -> InputDistribution:
    where = f"inputs[{i}]"
    if not isinstance(raw, dict):
        raise ConfigError(where, "expected an object")
    try:
        return InputDistribution(raw.get("kind", "cscg"), float(raw.get("power", 1.0)), raw.get("order"))
    except (TypeError, ValueError) as exc:
        raise ConfigError(where, str(exc)) from None


def _parse_link(raw) -> LinkConfig:
    if not isinstance(raw, dict):
        raise ConfigError("link", "expected an object")
    known = {f.name for f in dataclasses.fields(LinkConfig)}
    extra = set(raw) - known
    if extra:
        raise ConfigError(f"link.{sorted(extra)[0]}", "unknown link field")
    for key in ("span_length_km", "span_count"):
        _require(raw, key, "link.")
    try:
        return LinkConfig(**raw)
    except (TypeError, ValueError) as exc:
        raise ConfigError("link", str(exc)) from None


def parse_spec(raw: dict) -> ExperimentSpec:
    if not isinstance(raw, dict):
        raise ConfigError("spec", "top level must be a JSON object")
    preset = str(_require(raw, "preset", "")).lower()
    if preset not in PRESET_KINDS:
        raise ConfigError("preset", f"unknown preset {preset!r}; expected one of {PRESET_KINDS}")
    channel = preset
    if preset == "custom":
        channel = str(_require(raw, "channel", "")).lower()
        if channel not in CHANNELS:
            raise ConfigError("channel", f"unknown channel {channel!r}; expected one of {CHANNELS}")
    n = _number(_require(raw, "n", ""), "n", int)
    seed = _number(raw.get("seed", 0), "seed", int)
    if not 0 <= seed < 2**64:
        raise ConfigError("seed", "must be a 64-bit unsigned integer")
    ests = _require(raw, "estimators", "")
    if not isinstance(ests, list) or not ests:
        raise ConfigError("estimators", "need a non-empty list")
    inputs = raw.get("inputs", [{"kind": "cscg", "power": 1.0}])
    if not isinstance(inputs, list) or not inputs:
        raise ConfigError("inputs", "need a non-empty list")
    params = dict(_CHANNEL_DEFAULTS[channel])
    extra = raw.get("params", {})
    if not isinstance(extra, dict):
        raise ConfigError("params", "expected an object")
    params.update(extra)
    spec = ExperimentSpec(
        name=str(raw.get("name", preset)),
        preset=preset,
        channel=channel,
        sweep=_parse_sweep(_require(raw, "sweep", "")),
        estimators=[_parse_estimator(e, i) for i, e in enumerate(ests)],
        inputs=[_parse_input(e, i) for i, e in enumerate(inputs)],
        n=n,
        seed=seed,
        link=_parse_link(raw["link"]) if "link" in raw else None,
        params=params,
        outputs=dict(raw.get("outputs", {})),
        plot=dict(raw.get("plot", {})),
        description=str(raw.get("description", "")),
        record_wall_time=bool(raw.get("record_wall_time", False)),
    )
    validate(spec)
    return spec


def validate(spec: ExperimentSpec):
    """Cross-field checks; raises :class:`ConfigError`."""
    if spec.n < 100:
        raise ConfigError("n", f"must be >= 100, got {spec.n}")
    allowed = SWEEP_VARIABLES[spec.channel]
    if spec.sweep.variable not in allowed:
        raise ConfigError("sweep.variable", f"{spec.channel} sweeps over {allowed}, got {spec.sweep.variable!r}")
    needs_link = spec.channel in ("zero-dispersion", "dispersive", "realistic")
    if needs_link and spec.link is None:
        raise ConfigError("link", "missing required field")
    if spec.channel == "mimo2x2":
        if not all(0 <= a <= math.pi + 1e-12 for a in spec.sweep.values):
            raise ConfigError("sweep.values", "rotation angles must lie in [0, pi]")
        _number(spec.params.get("snr_db"), "params.snr_db")
    if spec.channel == "dispersive":
        if not all(v >= 0 and v == int(v) for v in spec.sweep.values):
            raise ConfigError("sweep.values", "span counts must be non-negative integers")
        try:
            validate_oversampling(int(spec.params["oversampling"]), float(spec.params["rolloff"]))
        except ValueError as exc:
            raise ConfigError("params.oversampling", str(exc)) from None
    if spec.channel == "realistic":
        if not spec.link.dispersion_compensation:
            raise ConfigError("link.dispersion_compensation", "the realistic link needs per-span compensation")
        try:
            validate_oversampling(int(spec.params["oversampling"]), float(spec.params["rolloff"]))
        except ValueError as exc:
            raise ConfigError("params.oversampling", str(exc)) from None
        step = _number(spec.params["step_km"], "params.step_km")
        if not 0 < step <= spec.link.span_length_km:
            raise ConfigError("params.step_km", "step must be in (0, span length]")
    for i, e in enumerate(spec.estimators):
        if e.block != 1 and spec.channel != "dispersive":
            raise ConfigError(f"estimators[{i}].block", "output blocks only apply to the dispersive channel")
        for inp in spec.inputs:
            if inp.discrete and e.method in ("kraskov", "local-gaussian"):
                raise ConfigError(f"estimators[{i}].method",
                                  f"{e.method} is not defined for the discrete {inp.label} input")
        dx, dy = spec.dims(e.block)
        n_eff = spec.n - (e.block - 1)
        if e.method == "glb" and e.block != 1:
            raise ConfigError(f"estimators[{i}].block", "glb is symbol-wise (block 1)")
        try:
            e.validate_for(n_eff, dx, dy)
        except ValueError as exc:
            raise ConfigError(f"estimators[{i}]", str(exc)) from None
    for inp in spec.inputs:
        if spec.channel == "realistic" and not inp.discrete:
            raise ConfigError("inputs", "the realistic link is defined for a QAM input")


def load_spec(path) -> ExperimentSpec:
    """Load a JSON spec from ``path``, or a bundled preset by name."""
    p = Path(path)
    if not p.exists():
        if str(path) in preset_names():
            return parse_spec(json.loads(preset_text(str(path))))
        raise ConfigError("path", f"no such spec file or preset: {path}")
    try:
        raw = json.loads(p.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ConfigError("json", f"{p}: {exc}") from None
    return parse_spec(raw)


def _preset_dir():
    return resources.files("fibermi.experiments") / "presets"


def preset_names() -> list:
    return sorted(f.name[:-5] for f in _preset_dir().iterdir()
                  if f.name.endswith(".json") and not f.name.endswith(".plot.json"))


def preset_text(name: str) -> str:
    return (_preset_dir() / f"{name}.json").read_text(encoding="utf-8")


def load_preset(name: str) -> ExperimentSpec:
    if name not in preset_names():
        raise ConfigError("preset", f"no bundled preset {name!r}")
    return parse_spec(json.loads(preset_text(name)))
