"""JSON run configuration: converter system, sweep lattice, training schedule.

Every block is optional. Missing blocks fall back to the three-phase
reference prototype (200 kHz, k = 1), the desk-scale sweep (0.2 A and
0.3 V steps, duty derived from v_in), :meth:`TrainConfig.tuned` and a PWM
counter ratio of 120.
"""
from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field
from pathlib import Path

import jsonschema

from .dsss import DutyMode, SweepSpec
from .exceptions import ConfigError, DomainError
from .harmonics import ConverterPhase, SystemParams, reference_system
from .mlp import TrainConfig

DESK_CURRENT_STEP = 0.2
DESK_VIN_STEP = 0.3

_VEC7 = {"type": "array", "items": {"type": "number"}, "minItems": 7, "maxItems": 7}

SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "properties": {
        "system": {
            "type": "object",
            "additionalProperties": False,
            "required": ["phases", "f_sw"],
            "properties": {
                "f_sw": {"type": "number", "exclusiveMinimum": 0},
                "k": {"type": "integer", "minimum": 1},
                "phases": {
                    "type": "array",
                    "minItems": 1,
                    "items": {
                        "type": "object",
                        "additionalProperties": False,
                        "required": ["inductance", "v_out_target", "rated_power"],
                        "properties": {
                            "inductance": {"type": "number", "exclusiveMinimum": 0},
                            "v_out_target": {"type": "number", "exclusiveMinimum": 0},
                            "rated_power": {"type": "number", "exclusiveMinimum": 0},
                        },
                    },
                },
            },
        },
        "sweep": {
            "type": "object",
            "additionalProperties": False,
            "required": ["spv", "epv", "ssv"],
            "properties": {
                "spv": _VEC7,
                "epv": _VEC7,
                "ssv": _VEC7,
                "duty_mode": {"enum": [m.value for m in DutyMode]},
            },
        },
        "train": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "hidden_layers": {"type": "integer", "minimum": 1},
                "width": {"type": "integer", "minimum": 1},
                "dropout": {"type": "number", "minimum": 0, "exclusiveMaximum": 1},
                "batch_size": {"type": "integer", "minimum": 1},
                "learning_rate": {"type": "number", "exclusiveMinimum": 0},
                "max_epochs": {"type": "integer", "minimum": 1},
                "patience": {"type": "integer", "minimum": 1},
                "seed": {"type": "integer"},
                "lr_patience": {"type": "integer", "minimum": 0},
                "lr_factor": {"type": "number", "exclusiveMinimum": 0, "maximum": 1},
                "min_lr": {"type": "number", "minimum": 0},
            },
        },
        "counter_ratio": {"type": "integer", "minimum": 1},
    },
}


def desk_sweep(sys: SystemParams) -> SweepSpec:
    return SweepSpec.for_system(sys, i_step=DESK_CURRENT_STEP, v_step=DESK_VIN_STEP)


@dataclass
class RunConfig:
    system: SystemParams = field(default_factory=reference_system)
    sweep: SweepSpec | None = None
    train: TrainConfig = field(default_factory=TrainConfig.tuned)
    counter_ratio: int = 120

    def __post_init__(self):
        if self.sweep is None:
            self.sweep = desk_sweep(self.system)

    def to_dict(self) -> dict:
        return {
            "system": {
                "f_sw": self.system.f_sw,
                "k": self.system.k,
                "phases": [{"inductance": p.inductance, "v_out_target": p.v_out_target,
                            "rated_power": p.rated_power} for p in self.system.phases],
            },
            "sweep": self.sweep.to_dict(),
            "train": dataclasses.asdict(self.train),
            "counter_ratio": self.counter_ratio,
        }


def config_from_dict(doc: dict) -> RunConfig:
    try:
        jsonschema.validate(doc, SCHEMA)
    except jsonschema.ValidationError as exc:
        where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise ConfigError(f"config field {where}: {exc.message}") from None
    try:
        if "system" in doc:
            s = doc["system"]
            phases = tuple(ConverterPhase(p["inductance"], p["v_out_target"], p["rated_power"], index=n)
                           for n, p in enumerate(s["phases"], start=1))
            system = SystemParams(phases, s["f_sw"], s.get("k", 1))
        else:
            system = reference_system()
        sweep = SweepSpec.from_dict(doc["sweep"]) if "sweep" in doc else None
        train = TrainConfig.tuned(**doc.get("train", {}))
        return RunConfig(system, sweep, train, doc.get("counter_ratio", 120))
    except DomainError as exc:
        raise ConfigError(str(exc)) from None


def load_config(path=None) -> RunConfig:
    """Read a JSON config; ``None`` gives the all-defaults configuration."""
    if path is None:
        return RunConfig()
    path = Path(path)
    try:
        doc = json.loads(path.read_text())
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from None
    return config_from_dict(doc)
