"""Run configuration: a strict JSON file mirroring the pipeline's knobs.

The file is the single source of truth for an experiment; command-line
``--set section.key=value`` overrides exist for sweeps but the resolved
configuration is what gets echoed into the output directory. Unknown keys are
rejected by name. Defaults follow the lab's standard operating point
(tau_p=0.7, tau_n=0.05, kappa_p=0.05, kappa_n=0.005, T=2, 10 passes,
dropout 0.3, base_lr=0.03).
"""

from __future__ import annotations

import json
from dataclasses import dataclass

from .data import MODES
from .errors import ConfigError, InvalidParameterError, UpsLabError
from .model import TemperatureConfig
from .pipeline import OptimizerConfig, PipelineConfig
from .selection import SelectionConfig
from .uncertainty import EstimatorConfig

_DEFAULTS = {
    "dataset": {"path": None, "mode": "single_label"},
    "model": {"hidden_dims": [32, 32], "dropout_rate": 0.3},
    "optimizer": {"base_lr": 0.03, "min_lr": 0.0},
    "temperature": {"T": 2.0},
    "estimator": {"estimator": "mc_dropout", "passes": 10, "jitter_sigma": 0.0},
    "selection": {
        "tau_p": 0.7,
        "tau_n": 0.05,
        "kappa_p": 0.05,
        "kappa_n": 0.005,
        "gamma_mode": "argmax",
        "regime": "ups",
        "balance_iters": 10,
    },
    "pipeline": {
        "max_iterations": 20,
        "epochs_per_iteration": 50,
        "batch_size": 64,
        "convergence_delta": 0.01,
        "master_seed": 0,
        "use_negative_learning": True,
        "negatives_with_positive": False,
    },
    "output_dir": None,
}


@dataclass(frozen=True)
class RunConfig:
    dataset_path: str
    dataset_mode: str
    pipeline: PipelineConfig
    output_dir: str
    resolved: dict


def _merge_strict(defaults: dict, supplied: dict, prefix: str = "") -> dict:
    merged = {}
    for key, default in defaults.items():
        merged[key] = default
    for key, value in supplied.items():
        path = f"{prefix}{key}"
        if key not in defaults:
            raise ConfigError(f"unknown config key: {path}")
        if isinstance(defaults[key], dict):
            if not isinstance(value, dict):
                raise ConfigError(f"config key {path} must be an object")
            merged[key] = _merge_strict(defaults[key], value, prefix=f"{path}.")
        else:
            merged[key] = value
    return merged


def apply_override(resolved: dict, dotted: str, raw_value: str) -> None:
    """Apply one ``section.key=value`` override onto the resolved tree."""
    parts = dotted.split(".")
    node = resolved
    for part in parts[:-1]:
        if not isinstance(node, dict) or part not in node:
            raise ConfigError(f"unknown config key: {dotted}")
        node = node[part]
    leaf = parts[-1]
    if not isinstance(node, dict) or leaf not in node:
        raise ConfigError(f"unknown config key: {dotted}")
    if isinstance(node[leaf], dict):
        raise ConfigError(f"config key {dotted} is a section, not a value")
    try:
        node[leaf] = json.loads(raw_value)
    except json.JSONDecodeError:
        node[leaf] = raw_value


def build_run_config(resolved: dict) -> RunConfig:
    if resolved["dataset"]["path"] is None:
        raise ConfigError("config key dataset.path is required")
    if resolved["output_dir"] is None:
        raise ConfigError("config key output_dir is required")
    if resolved["dataset"]["mode"] not in MODES:
        raise ConfigError(
            f"config key dataset.mode must be one of {list(MODES)}"
        )
    try:
        pipeline = PipelineConfig(
            hidden_dims=tuple(int(h) for h in resolved["model"]["hidden_dims"]),
            dropout_rate=float(resolved["model"]["dropout_rate"]),
            max_iterations=int(resolved["pipeline"]["max_iterations"]),
            epochs_per_iteration=int(resolved["pipeline"]["epochs_per_iteration"]),
            batch_size=int(resolved["pipeline"]["batch_size"]),
            convergence_delta=float(resolved["pipeline"]["convergence_delta"]),
            selection=SelectionConfig(
                tau_p=float(resolved["selection"]["tau_p"]),
                tau_n=float(resolved["selection"]["tau_n"]),
                kappa_p=float(resolved["selection"]["kappa_p"]),
                kappa_n=float(resolved["selection"]["kappa_n"]),
                gamma_mode=resolved["selection"]["gamma_mode"],
                regime=resolved["selection"]["regime"],
                balance_iters=int(resolved["selection"]["balance_iters"]),
            ),
            estimator=EstimatorConfig(
                estimator=resolved["estimator"]["estimator"],
                passes=int(resolved["estimator"]["passes"]),
                jitter_sigma=float(resolved["estimator"]["jitter_sigma"]),
            ),
            temperature=TemperatureConfig(T=float(resolved["temperature"]["T"])),
            optimizer=OptimizerConfig(
                base_lr=float(resolved["optimizer"]["base_lr"]),
                min_lr=float(resolved["optimizer"]["min_lr"]),
            ),
            master_seed=int(resolved["pipeline"]["master_seed"]),
            use_negative_learning=bool(resolved["pipeline"]["use_negative_learning"]),
            negatives_with_positive=bool(resolved["pipeline"]["negatives_with_positive"]),
        )
    except (InvalidParameterError, TypeError, ValueError) as exc:
        raise ConfigError(f"invalid config value: {exc}")
    return RunConfig(
        dataset_path=str(resolved["dataset"]["path"]),
        dataset_mode=resolved["dataset"]["mode"],
        pipeline=pipeline,
        output_dir=str(resolved["output_dir"]),
        resolved=resolved,
    )


def load_run_config(path, overrides: list[str] | None = None) -> RunConfig:
    """Load, override, validate. Raises ConfigError naming any bad key."""
    try:
        with open(path, "r", encoding="utf-8") as fh:
            supplied = json.load(fh)
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}")
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config file is not valid JSON: {exc}")
    if not isinstance(supplied, dict):
        raise ConfigError("config file must contain a JSON object")
    resolved = _merge_strict(_DEFAULTS, supplied)
    for item in overrides or []:
        if "=" not in item:
            raise ConfigError(f"override must look like section.key=value, got {item!r}")
        dotted, raw = item.split("=", 1)
        apply_override(resolved, dotted, raw)
    return build_run_config(resolved)
