"""Run configuration: one JSON document, validated up front, flags override keys.

Sections and defaults:

    dataset:      count, scars_per_mesh, seed, split_ratios, subdivisions,
                  radius_range, depth_range
    architecture: ratios, widths, activation, elu_alpha, m_clamp
    training:     lr, beta1, beta2, eps, batch_size, epochs, patience,
                  max_steps, loss_target, loss_metric, seed
    extraction:   k_sigma
    paths:        data_dir, out_dir (flags take precedence)

Unknown sections or keys are errors, not warnings.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

from .errors import ConfigError
from .losses import LossSpec
from .model import Architecture
from .scars import ScarRanges
from .train import TrainSettings

__all__ = ["RunConfig"]

_DEFAULTS = {
    "dataset": {
        "count": 8,
        "scars_per_mesh": 1,
        "seed": 0,
        "split_ratios": [0.8, 0.1, 0.1],
        "subdivisions": 2,
        "radius_range": [3, 8],
        "depth_range": [0.5, 2.0],
    },
    "architecture": {
        "ratios": [1.0, 0.25],
        "widths": [3, 16],
        "activation": "elu",
        "elu_alpha": 1.0,
        "m_clamp": [4, 17],
    },
    "training": {
        "lr": 1e-3,
        "beta1": 0.9,
        "beta2": 0.999,
        "eps": 1e-8,
        "batch_size": 4,
        "epochs": 200,
        "patience": 20,
        "max_steps": None,
        "loss_target": "ground_truth",
        "loss_metric": "l2",
        "seed": 0,
    },
    "extraction": {
        "k_sigma": 2.0,
    },
    "paths": {
        "data_dir": None,
        "out_dir": None,
    },
}


@dataclass
class RunConfig:
    dataset: dict = field(default_factory=dict)
    architecture: dict = field(default_factory=dict)
    training: dict = field(default_factory=dict)
    extraction: dict = field(default_factory=dict)
    paths: dict = field(default_factory=dict)

    def resolve_path(self, key: str, flag_value, flag_name: str):
        """Flag wins over the config's paths section; one of them must be set."""
        value = flag_value if flag_value is not None else self.paths.get(key)
        if value is None:
            raise ConfigError(f"missing {flag_name} (flag) or paths.{key} (config)")
        return value

    @classmethod
    def load(cls, path=None, overrides: dict | None = None) -> "RunConfig":
        """Merge defaults <- config file <- explicit overrides, then validate."""
        merged = {sec: dict(keys) for sec, keys in _DEFAULTS.items()}

        def apply(doc: dict, origin: str):
            for sec, keys in doc.items():
                if sec not in merged:
                    raise ConfigError(f"{origin}: unknown config section {sec!r}")
                if not isinstance(keys, dict):
                    raise ConfigError(f"{origin}: section {sec!r} must be an object")
                for key, value in keys.items():
                    if key not in merged[sec]:
                        raise ConfigError(f"{origin}: unknown key {sec}.{key}")
                    merged[sec][key] = value

        if path is not None:
            try:
                doc = json.loads(Path(path).read_text())
            except OSError as exc:
                raise ConfigError(f"cannot read config {path}: {exc}") from None
            except json.JSONDecodeError as exc:
                raise ConfigError(f"config {path} is not valid JSON: {exc}") from None
            if not isinstance(doc, dict):
                raise ConfigError(f"config {path} must be a JSON object")
            apply(doc, str(path))
        if overrides:
            apply(overrides, "flags")
        cfg = cls(**merged)
        cfg.validate()
        return cfg

    def validate(self):
        ds = self.dataset
        if ds["count"] < 1 or ds["scars_per_mesh"] < 1:
            raise ConfigError("dataset.count and dataset.scars_per_mesh must be >= 1")
        if len(ds["split_ratios"]) != 3:
            raise ConfigError("dataset.split_ratios needs exactly three entries")
        if abs(sum(ds["split_ratios"]) - 1.0) > 1e-9:
            raise ConfigError(f"dataset.split_ratios must sum to 1, got {ds['split_ratios']}")
        if ds["subdivisions"] < 1:
            raise ConfigError("dataset.subdivisions must be >= 1")
        self.scar_ranges()  # validates ranges
        self.model_architecture()  # validates architecture keys
        tr = self.training
        if tr["batch_size"] < 1 or tr["epochs"] < 1 or tr["patience"] < 0:
            raise ConfigError("training.batch_size/epochs must be >= 1, patience >= 0")
        if tr["max_steps"] is not None and tr["max_steps"] < 1:
            raise ConfigError("training.max_steps must be >= 1 or null")
        if not (0 <= tr["beta1"] < 1 and 0 <= tr["beta2"] < 1):
            raise ConfigError("training.beta1/beta2 must lie in [0, 1)")
        if tr["lr"] <= 0 or tr["eps"] <= 0:
            raise ConfigError("training.lr and training.eps must be > 0")
        LossSpec(tr["loss_target"], tr["loss_metric"]).validate()
        if self.extraction["k_sigma"] <= 0:
            raise ConfigError("extraction.k_sigma must be > 0")

    def scar_ranges(self) -> ScarRanges:
        r = ScarRanges(tuple(self.dataset["radius_range"]), tuple(self.dataset["depth_range"]))
        try:
            r.validate()
        except Exception as exc:
            raise ConfigError(str(exc)) from None
        return r

    def model_architecture(self) -> Architecture:
        a = self.architecture
        arch = Architecture(
            ratios=tuple(a["ratios"]),
            widths=tuple(a["widths"]),
            activation=a["activation"],
            elu_alpha=a["elu_alpha"],
            m_clamp=tuple(a["m_clamp"]),
        )
        arch.validate()
        return arch

    def train_settings(self) -> TrainSettings:
        tr = self.training
        return TrainSettings(
            lr=tr["lr"],
            beta1=tr["beta1"],
            beta2=tr["beta2"],
            eps=tr["eps"],
            batch_size=tr["batch_size"],
            epochs=tr["epochs"],
            patience=tr["patience"],
            max_steps=tr["max_steps"],
            loss=LossSpec(tr["loss_target"], tr["loss_metric"]),
            seed=tr["seed"],
        )
