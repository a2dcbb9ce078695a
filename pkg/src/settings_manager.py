"""
Settings manager for CatSynth.

Loads a scenario config JSON file, migrates renamed keys, fills in
defaults and validates everything strictly before any computation runs.
Angles are degrees in the file and radians everywhere else.
"""
import hashlib
import json
import logging
import math
import os
from dataclasses import dataclass, replace
from typing import Dict, FrozenSet, Optional, Tuple

from css_fidelity import GridSpec, Parity, SqueezeAxis, grid_axis
from fock_core import Cutoff
from herald import HeraldScenario, ScenarioError
from tomography import MleConfig

logger = logging.getLogger(__name__)

SCHEMA_VERSION = 1
SETTINGS_FILE = "catsynth_scenario.json"

EMIT_KEYS = ("density", "landscape", "wigner", "samples", "reconstruction", "report")

DEFAULT_SETTINGS = {
    "schema_version": SCHEMA_VERSION,
    "output_dir": "catsynth_out",
    "seed": 0,
    "workers": 1,
    "scenario": None,           # required
    "lambda_inference": None,
    "output_loss": None,
    "phase_noise": None,
    "landscape": None,
    "wigner": None,
    "tomography": None,
    "sweep": None,
    "fig1": None,
    "emit": {key: True for key in EMIT_KEYS},
}

# Defaults for the optional blocks; a block is active when present in the file.
BLOCK_DEFAULTS = {
    "lambda_inference": {"alpha_sq_target": 3.0, "theta_deg": None, "lambda_min": 0.02, "lambda_max": 0.45},
    "output_loss": {"include_detection": True},
    "phase_noise": {"sigma_phi": None, "target_fidelity": None},
    "landscape": {
        "alpha_sq_min": 0.2, "alpha_sq_max": 6.0, "alpha_sq_step": 0.05,
        "db_min": 0.0, "db_max": 8.0, "db_step": 0.1, "axis": "x", "parity": None,
    },
    "wigner": {"half_range": 5.0, "step": 0.05},
    "tomography": {
        "n_phases": 12, "n_samples": 50000, "eta": 1.0, "phase_bins": 12,
        "quad_bin_width": 0.1, "quad_range": 6.0, "max_iters": 2000, "tol": 1e-6, "cutoff": None,
    },
    "sweep": {"thetas_deg": [0.5, 1.0, 1.5, 2.0, 2.5, 3.0, 3.5, 4.0, 4.5]},
    "fig1": {"n": 2, "lambda": 0.05, "ratio_min": 0.0, "ratio_max": 2.0, "ratio_step": 0.05},
}

_SCENARIO_TYPES = {
    "lambda": float, "theta_deg": float, "epsilon": float, "n_herald": int,
    "detector": str, "eta_opo": float, "eta_det": float, "eta_herald": float,
    "cutoff": int, "bs_phase": float, "dark_click_prob": float,
}

_INT_FIELDS = {"seed", "workers", "n_phases", "n_samples", "phase_bins", "max_iters", "cutoff", "n"}
_STR_FIELDS = {"output_dir", "axis", "parity"}
_BOOL_FIELDS = {"include_detection"}

# Renamed keys, old -> new, migrated automatically on load. Empty while schema 1 is the only layout.
_KEY_MIGRATIONS: Dict[str, str] = {}


class ConfigError(ValueError):
    """The scenario config is malformed, inconsistent or out of range."""


@dataclass(frozen=True)
class LambdaInference:
    alpha_sq_target: float
    theta_deg: Optional[float]
    lambda_range: Tuple[float, float]


@dataclass(frozen=True)
class PhaseNoise:
    """Either a fixed jitter or a fidelity the jitter is fitted to."""
    sigma_phi: Optional[float]
    target_fidelity: Optional[float]


@dataclass(frozen=True)
class LandscapeSpec:
    grid: GridSpec
    parity: Optional[Parity]


@dataclass(frozen=True)
class WignerSpec:
    half_range: float
    step: float


@dataclass(frozen=True)
class TomographySpec:
    n_phases: int
    n_samples: int
    mle: MleConfig


@dataclass(frozen=True)
class Fig1Spec:
    n: int
    lam: float
    ratios: Tuple[float, ...]


@dataclass(frozen=True)
class ScenarioConfig:
    """Validated, immutable run description."""
    scenario: HeraldScenario
    output_dir: str
    seed: int
    workers: int
    emit: FrozenSet[str]
    lambda_inference: Optional[LambdaInference] = None
    include_detection: Optional[bool] = None
    phase_noise: Optional[PhaseNoise] = None
    landscape: Optional[LandscapeSpec] = None
    wigner: Optional[WignerSpec] = None
    tomography: Optional[TomographySpec] = None
    thetas_deg: Tuple[float, ...] = ()
    fig1: Optional[Fig1Spec] = None
    source: str = "{}"

    def config_hash(self) -> str:
        """SHA-256 of the normalized settings the config was built from."""
        return hashlib.sha256(self.source.encode("utf-8")).hexdigest()

    def with_scenario(self, scenario: HeraldScenario) -> "ScenarioConfig":
        data = json.loads(self.source)
        data["scenario"] = scenario.to_dict()
        return replace(self, scenario=scenario, source=json.dumps(data, sort_keys=True))


def _migrate(block: dict) -> dict:
    out = dict(block)
    for old_key, new_key in _KEY_MIGRATIONS.items():
        if old_key in out:
            if new_key in out:
                raise ConfigError(f"both '{old_key}' and its replacement '{new_key}' are set")
            out[new_key] = out.pop(old_key)
    return out


def _check_type(where: str, key: str, value, expected) -> None:
    if value is None:
        return
    if expected is bool:
        ok = isinstance(value, bool)
    elif expected is int:
        ok = isinstance(value, int) and not isinstance(value, bool)
    elif expected is float:
        ok = isinstance(value, (int, float)) and not isinstance(value, bool) and math.isfinite(value)
    elif expected is list:
        ok = isinstance(value, list)
    else:
        ok = isinstance(value, expected)
    if not ok:
        raise ConfigError(f"{where}.{key} must be of type {expected.__name__}, got {value!r}")


def _field_type(key: str, default):
    if key in _INT_FIELDS:
        return int
    if key in _STR_FIELDS:
        return str
    if key in _BOOL_FIELDS:
        return bool
    if isinstance(default, list):
        return list
    return float


def _merge_block(name: str, block) -> dict:
    if not isinstance(block, dict):
        raise ConfigError(f"'{name}' must be an object")
    block = _migrate(block)
    defaults = BLOCK_DEFAULTS[name]
    unknown = set(block) - set(defaults)
    if unknown:
        raise ConfigError(f"unknown key(s) in '{name}': {', '.join(sorted(unknown))}")
    merged = dict(defaults)
    merged.update(block)
    for key, value in merged.items():
        _check_type(name, key, value, _field_type(key, defaults[key]))
    return merged


def _require(condition: bool, message: str) -> None:
    if not condition:
        raise ConfigError(message)


class SettingsManager:
    """Loads and validates a scenario config file."""

    def __init__(self, settings_file=SETTINGS_FILE):
        self.settings_file = settings_file
        self.settings = dict(DEFAULT_SETTINGS)
        self.load()

    def load(self):
        """Read, migrate and merge the config file over the defaults."""
        try:
            with open(self.settings_file, 'r', encoding='utf-8') as f:
                saved = json.load(f)
        except FileNotFoundError as e:
            raise ConfigError(f"config file not found: {self.settings_file}") from e
        except json.JSONDecodeError as e:
            raise ConfigError(f"config file is not valid JSON: {e}") from e
        if not isinstance(saved, dict):
            raise ConfigError("config root must be an object")
        saved = _migrate(saved)
        unknown = set(saved) - set(DEFAULT_SETTINGS)
        if unknown:
            raise ConfigError(f"unknown top-level key(s): {', '.join(sorted(unknown))}")
        if saved.get("schema_version") != SCHEMA_VERSION:
            raise ConfigError(f"schema_version must be {SCHEMA_VERSION}, got {saved.get('schema_version')!r}")
        self.settings.update(saved)
        logger.debug("loaded config %s", self.settings_file)

    def get(self, key, default=None):
        """Get a setting value by key."""
        if default is not None:
            return self.settings.get(key, default)
        return self.settings.get(key, DEFAULT_SETTINGS.get(key))

    def set(self, key, value):
        """Set a setting value (used for command-line overrides)."""
        if key not in DEFAULT_SETTINGS:
            raise ConfigError(f"unknown setting: {key}")
        self.settings[key] = value

    def override_cutoff(self, n_max: int):
        scenario = self.settings.get("scenario")
        if not isinstance(scenario, dict):
            raise ConfigError("the config has no 'scenario' block")
        self.settings["scenario"] = dict(scenario, cutoff=n_max)

    # ── Validation ────────────────────────────────────────────────────────────

    def _scenario(self) -> HeraldScenario:
        block = self.settings.get("scenario")
        if not isinstance(block, dict):
            raise ConfigError("the config needs a 'scenario' object")
        block = _migrate(block)
        for key, value in block.items():
            if key in _SCENARIO_TYPES:
                _check_type("scenario", key, value, _SCENARIO_TYPES[key])
        try:
            return HeraldScenario.from_dict(block)
        except ScenarioError as e:
            raise ConfigError(f"scenario: {e}") from e

    def _normalized(self) -> dict:
        """All settings with every active block merged over its defaults."""
        data = {}
        for key, value in self.settings.items():
            if key in BLOCK_DEFAULTS:
                data[key] = None if value is None else _merge_block(key, value)
            elif key == "scenario":
                data[key] = self._scenario().to_dict()
            elif key == "emit":
                data[key] = self._emit(value)
            else:
                _check_type("config", key, value, _field_type(key, DEFAULT_SETTINGS[key]))
                data[key] = value
        return data

    @staticmethod
    def _emit(value) -> dict:
        if not isinstance(value, dict):
            raise ConfigError("'emit' must be an object")
        unknown = set(value) - set(EMIT_KEYS)
        if unknown:
            raise ConfigError(f"unknown emit flag(s): {', '.join(sorted(unknown))}")
        merged = dict(DEFAULT_SETTINGS["emit"])
        merged.update(value)
        for key, flag in merged.items():
            _check_type("emit", key, flag, bool)
        return merged

    def to_config(self) -> ScenarioConfig:
        """Validate the loaded settings and build the immutable run config."""
        data = self._normalized()
        scenario = self._scenario()
        _require(data["seed"] >= 0, "seed must be >= 0")
        _require(data["workers"] >= 1, "workers must be >= 1")
        _require(bool(data["output_dir"]), "output_dir must not be empty")

        config = ScenarioConfig(
            scenario=scenario,
            output_dir=data["output_dir"],
            seed=data["seed"],
            workers=data["workers"],
            emit=frozenset(k for k, on in data["emit"].items() if on),
            source=json.dumps(data, sort_keys=True),
        )
        fields: Dict[str, object] = {}
        if data["lambda_inference"] is not None:
            fields["lambda_inference"] = self._lambda_inference(data["lambda_inference"])
        if data["output_loss"] is not None:
            fields["include_detection"] = bool(data["output_loss"]["include_detection"])
        if data["phase_noise"] is not None:
            fields["phase_noise"] = self._phase_noise(data["phase_noise"])
        if data["landscape"] is not None:
            fields["landscape"] = self._landscape(data["landscape"])
        if data["wigner"] is not None:
            block = data["wigner"]
            _require(block["half_range"] > 0 and 0 < block["step"] < block["half_range"],
                     "wigner needs half_range > step > 0")
            fields["wigner"] = WignerSpec(float(block["half_range"]), float(block["step"]))
        if data["tomography"] is not None:
            fields["tomography"] = self._tomography(data["tomography"], scenario.cutoff)
        if data["sweep"] is not None:
            thetas = data["sweep"]["thetas_deg"]
            _require(len(thetas) > 0, "sweep.thetas_deg must not be empty")
            for theta in thetas:
                _check_type("sweep", "thetas_deg", theta, float)
                _require(0.0 <= theta <= 45.0, f"sweep angle {theta} outside [0, 45] degrees")
            fields["thetas_deg"] = tuple(float(t) for t in thetas)
        if data["fig1"] is not None:
            fields["fig1"] = self._fig1(data["fig1"])
        return replace(config, **fields)

    @staticmethod
    def _lambda_inference(block: dict) -> LambdaInference:
        _require(block["alpha_sq_target"] > 0, "lambda_inference.alpha_sq_target must be > 0")
        _require(0 < block["lambda_min"] < block["lambda_max"] < 1,
                 "lambda_inference needs 0 < lambda_min < lambda_max < 1")
        theta = block["theta_deg"]
        _require(theta is None or 0.0 <= theta <= 45.0, "lambda_inference.theta_deg outside [0, 45]")
        return LambdaInference(float(block["alpha_sq_target"]), None if theta is None else float(theta),
                               (float(block["lambda_min"]), float(block["lambda_max"])))

    @staticmethod
    def _phase_noise(block: dict) -> PhaseNoise:
        sigma, target = block["sigma_phi"], block["target_fidelity"]
        _require((sigma is None) != (target is None), "phase_noise needs exactly one of sigma_phi or target_fidelity")
        _require(sigma is None or sigma >= 0, "phase_noise.sigma_phi must be >= 0")
        _require(target is None or 0 < target < 1, "phase_noise.target_fidelity must lie in (0, 1)")
        return PhaseNoise(None if sigma is None else float(sigma), None if target is None else float(target))

    @staticmethod
    def _landscape(block: dict) -> LandscapeSpec:
        try:
            axis = SqueezeAxis(block["axis"])
            parity = None if block["parity"] is None else Parity(block["parity"])
            grid = GridSpec(
                float(block["alpha_sq_min"]), float(block["alpha_sq_max"]), float(block["alpha_sq_step"]),
                float(block["db_min"]), float(block["db_max"]), float(block["db_step"]), axis,
            )
        except ValueError as e:
            raise ConfigError(f"landscape: {e}") from e
        return LandscapeSpec(grid, parity)

    @staticmethod
    def _tomography(block: dict, scenario_cutoff: Cutoff) -> TomographySpec:
        _require(block["n_phases"] >= 1, "tomography.n_phases must be >= 1")
        _require(block["n_samples"] >= 1, "tomography.n_samples must be >= 1")
        try:
            cutoff = scenario_cutoff if block["cutoff"] is None else Cutoff(block["cutoff"])
            mle = MleConfig(
                cutoff=cutoff,
                eta=float(block["eta"]),
                phase_bins=block["phase_bins"],
                quad_bin_width=float(block["quad_bin_width"]),
                quad_range=float(block["quad_range"]),
                max_iters=block["max_iters"],
                tol=float(block["tol"]),
            )
        except ValueError as e:
            raise ConfigError(f"tomography: {e}") from e
        return TomographySpec(block["n_phases"], block["n_samples"], mle)

    @staticmethod
    def _fig1(block: dict) -> Fig1Spec:
        _require(block["n"] >= 2, "fig1.n must be >= 2")
        _require(0 < block["lambda"] < 1, "fig1.lambda must lie in (0, 1)")
        _require(block["ratio_step"] > 0 and 0 <= block["ratio_min"] <= block["ratio_max"],
                 "fig1 needs 0 <= ratio_min <= ratio_max and ratio_step > 0")
        ratios = grid_axis(block["ratio_min"], block["ratio_max"], block["ratio_step"])
        return Fig1Spec(block["n"], float(block["lambda"]), tuple(float(r) for r in ratios))


def load_config(path: str, output_dir: Optional[str] = None, seed: Optional[int] = None,
                workers: Optional[int] = None, cutoff: Optional[int] = None) -> ScenarioConfig:
    """Load ``path`` and apply command-line overrides before validation."""
    manager = SettingsManager(path)
    if output_dir is not None:
        manager.set("output_dir", output_dir)
    if seed is not None:
        manager.set("seed", seed)
    if workers is not None:
        manager.set("workers", workers)
    if cutoff is not None:
        manager.override_cutoff(cutoff)
    config = manager.to_config()
    logger.info("config %s (hash %s)", os.path.basename(path), config.config_hash()[:12])
    return config
