"""Run configuration: defaults, file loading (TOML or JSON), validation.

The shipped g-tensors are physically plausible placeholders for the
dominant erbium site (correct symmetry class and magnitude range, with a
much weaker optical field sensitivity along the C2 axis than transverse
to it). Quantitative angular-map comparisons require the measured
tensors; install them in the config and set
``emitter.reference_g_tensors = true`` to enable the conditional checks.
"""

from __future__ import annotations

import json

try:
    import tomllib
except ModuleNotFoundError:  # Python 3.10
    import tomli as tomllib
from copy import deepcopy
from pathlib import Path
from typing import Any, Optional

import numpy as np

from .bathfield import EmitterModel, GTensor
from .cavity import CavityParams, EmitterPhotonics
from .lattice import BathConfig


class ConfigError(ValueError):
    """Invalid configuration; the message names the offending key."""


# Placeholder tensors: diagonal in the crystal frame (C2v site symmetry),
# max principal g near the upper end of what erbium doublets exhibit, and
# a transverse/axial sensitivity contrast of ~7.
PLACEHOLDER_G_GROUND = [7.0, 0.0, 0.0, 0.0, 7.0, 0.0, 0.0, 0.0, 13.8]
PLACEHOLDER_G_EXCITED = [8.4, 0.0, 0.0, 0.0, 8.4, 0.0, 0.0, 0.0, 14.0]

DEFAULTS: dict[str, Any] = {
    "emitter": {
        "g_ground": PLACEHOLDER_G_GROUND,
        "g_excited": PLACEHOLDER_G_EXCITED,
        "c2_axis": [0.0, 0.0, 1.0],
        "branch_selection": "lower_lower",
        "reference_g_tensors": False,
    },
    "bath": {
        "abundance": 0.047,
        "er_concentration_per_cm3": 0.0,
        "region_radius_nm": 10.0,
        "orientation_model": "isotropic",
        "er_placement": "poisson",
    },
    "sweep": {
        "b_ext_mT": 100.0,
        "b_ext_direction": [0.0, 0.0, 1.0],
        "realizations": 30000,
        "field_mT": [],  # empty: 24 log-spaced points, 1-300 mT
        "angle_grid": {"n_theta": 17, "n_phi": 33, "arc_points": 181},
        "histogram_bins": 0,  # 0: Freedman-Diaconis
        "fwhm_method": "interpolated_histogram",
    },
    "cavity": {
        "resonance_frequency_hz": 1.95e14,
        "linewidth_hz": 75e6,
        "waist_um": 3.8,
        "effective_length_um": 28.5,
        "refractive_index": 3.48,
    },
    "photonics": {
        "branching_ratio": 0.23,
        "orientation_factor": 1.0 / 3.0,
        "bulk_lifetime_s": 1.4e-4,
    },
    "detection": {
        "p_detect_per_shot": 0.009,
        "losses": [0.82, 0.73, 0.33, 0.97],
    },
    "lineshape": {
        "scaling_points": [[1e15, 4e6], [1e16, 20e6], [2e17, 100e6]],
        "censored": [False, False, True],  # the highest point is a lower bound
    },
    "execution": {
        "seed": 1,
        "workers": 1,
    },
}

_SCALARS = (int, float, bool, str)


def default_config() -> dict:
    return deepcopy(DEFAULTS)


def load_config(path: Optional[str]) -> dict:
    """Resolved configuration: defaults overlaid with the user file."""
    cfg = default_config()
    if path is None:
        return cfg
    p = Path(path)
    if not p.exists():
        raise ConfigError(f"config file not found: {path}")
    try:
        if p.suffix == ".json":
            user = json.loads(p.read_text())
        else:
            with open(p, "rb") as fh:
                user = tomllib.load(fh)
    except (json.JSONDecodeError, tomllib.TOMLDecodeError) as exc:
        raise ConfigError(f"cannot parse {path}: {exc}") from exc
    _merge(cfg, user, key_path="")
    _validate(cfg)
    return cfg


def _merge(base: dict, user: Any, key_path: str) -> None:
    if not isinstance(user, dict):
        raise ConfigError(f"config section {key_path or '<root>'} must be a table/object")
    for key, value in user.items():
        path = f"{key_path}.{key}" if key_path else key
        if key not in base:
            raise ConfigError(f"unknown config key: {path}")
        if isinstance(base[key], dict):
            _merge(base[key], value, path)
        else:
            if isinstance(base[key], _SCALARS) and not isinstance(value, _SCALARS):
                raise ConfigError(f"config key {path} must be a scalar")
            if isinstance(base[key], list) and not isinstance(value, list):
                raise ConfigError(f"config key {path} must be a list")
            base[key] = value


def _validate(cfg: dict) -> None:
    for section, key, n in (("emitter", "g_ground", 9), ("emitter", "g_excited", 9), ("emitter", "c2_axis", 3), ("sweep", "b_ext_direction", 3)):
        value = cfg[section][key]
        if len(value) != n or not all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in value):
            raise ConfigError(f"config key {section}.{key} must be a list of {n} numbers")
    try:
        build_emitter(cfg)
        build_bath(cfg)
        build_cavity(cfg)
        build_photonics(cfg)
    except ConfigError:
        raise
    except ValueError as exc:
        raise ConfigError(f"invalid configuration: {exc}") from exc
    if cfg["sweep"]["realizations"] < 100:
        raise ConfigError("config key sweep.realizations must be at least 100")
    if cfg["execution"]["workers"] < 1:
        raise ConfigError("config key execution.workers must be at least 1")


def reference_g_tensors_installed(cfg: dict) -> bool:
    return bool(cfg["emitter"]["reference_g_tensors"])


def build_emitter(cfg: dict) -> EmitterModel:
    e = cfg["emitter"]
    axis = np.asarray(e["c2_axis"], dtype=float)
    norm = np.linalg.norm(axis)
    if norm == 0:
        raise ConfigError("config key emitter.c2_axis must be nonzero")
    try:
        return EmitterModel(
            g_ground=GTensor(np.asarray(e["g_ground"], dtype=float).reshape(3, 3)),
            g_excited=GTensor(np.asarray(e["g_excited"], dtype=float).reshape(3, 3)),
            c2_axis=tuple(axis / norm),
            branch_selection=e["branch_selection"],
        )
    except ValueError as exc:
        raise ConfigError(f"invalid emitter configuration: {exc}") from exc


def build_bath(cfg: dict, seed: Optional[int] = None) -> BathConfig:
    b = cfg["bath"]
    try:
        return BathConfig(
            region_radius_nm=float(b["region_radius_nm"]),
            abundance=float(b["abundance"]),
            er_concentration_per_cm3=float(b["er_concentration_per_cm3"]),
            orientation_model=b["orientation_model"],
            seed=int(seed if seed is not None else cfg["execution"]["seed"]),
            er_placement=b["er_placement"],
        )
    except ValueError as exc:
        raise ConfigError(f"invalid bath configuration: {exc}") from exc


def build_cavity(cfg: dict) -> CavityParams:
    c = cfg["cavity"]
    try:
        return CavityParams(
            resonance_frequency_hz=float(c["resonance_frequency_hz"]),
            linewidth_hz=float(c["linewidth_hz"]),
            waist_um=float(c["waist_um"]),
            effective_length_um=float(c["effective_length_um"]),
            refractive_index=float(c["refractive_index"]),
        )
    except ValueError as exc:
        raise ConfigError(f"invalid cavity configuration: {exc}") from exc


def build_photonics(cfg: dict) -> EmitterPhotonics:
    p = cfg["photonics"]
    try:
        return EmitterPhotonics(
            branching_ratio=float(p["branching_ratio"]),
            orientation_factor=float(p["orientation_factor"]),
            bulk_lifetime_s=float(p["bulk_lifetime_s"]),
        )
    except ValueError as exc:
        raise ConfigError(f"invalid photonics configuration: {exc}") from exc
