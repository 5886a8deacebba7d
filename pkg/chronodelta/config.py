import copy
import hashlib
import json
from pathlib import Path
from typing import Any, Dict, List, Optional

import yaml

CONFIG_FILE = ".chronodelta.yml"

COUPLING_KINDS = ("zero", "constant", "oscillating", "synthesized", "sampled")
INITIAL_DATA_KINDS = ("gaussian", "bound_state", "sampled")
SOLVER_METHODS = ("picard", "march")
ROUTES = ("fourier", "duhamel")
LOG_LEVELS = ("DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL")
LOG_FORMATS = ("text", "rich")
SWEEP_QUANTITIES = ("charge", "jump", "routes")

# Every allowed key with its default. A dict value is a section.
SCHEMA: Dict[str, Any] = {
    "seed": 0,
    "threads": 1,
    "strict": False,
    "output_dir": "runs/latest",
    "logging": {"level": "INFO", "format": "text"},
    "coupling": {
        "kind": "constant",
        "value": -2.0,
        "amplitude": 1.0,
        "frequency": 1.0,
        "nu": 0.3,
        "seed": 0,
        "support": 4.0,
        "count": 2049,
        "T": 4.0,
        "plateau": 0.3,
        "edge": 0.45,
        "path": None,
    },
    "initial_data": {
        "kind": "gaussian",
        "width": 1.0,
        "center": 0.0,
        "momentum": 0.0,
        "alpha": -2.0,
        "path": None,
    },
    "space": {"length": 40.0, "count": 4096},
    "time": {"start": 0.0, "end": 1.2, "count": 2049},
    "snapshots": {"start": 0.0, "end": 1.0, "count": 5},
    "solver": {
        "method": "picard",
        "tol": 1e-10,
        "target_contraction": 0.5,
        "min_window": 1e-3,
        "max_iterations": 200,
        "initial_window": None,
        "max_refinements": 2,
    },
    "reconstruction": {"route": "fourier"},
    "guards": {
        "leakage_tol": 1e-6,
        "source_leakage_tol": 1e-3,
        "support_floor": 1e-8,
        "spectral_tail_tol": 1e-6,
        "trace_padding": 8,
    },
    "acceptance": {
        "criteria": [1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11],
        "mass_drift": 1e-3,
        "eigen_error": 1e-2,
        "jump_residual": 1e-3,
        "route_agreement": 1e-4,
        "solver_agreement": 1e-6,
        "manufactured": 1e-8,
        "cross_oracle": 1e-2,
        "exponent_tol": 0.05,
        "ratio_drift": 0.2,
        "bony": 1e-8,
        "unity": 1e-10,
        "smoothing_samples": 100,
    },
    "sweep": {"resolutions": [257, 513, 1025, 2049], "quantities": ["charge", "jump", "routes"]},
    "lemmas": {
        "nus": [0.0, 0.25, 0.4],
        "mus": [0.0, 0.25, 0.75],
        "gaps": None,
        "dilations": None,
        "samples": 20,
        "law_count": 1024,
    },
}

_POSITIVE_INTS = {
    "threads",
    "coupling.count",
    "space.count",
    "time.count",
    "snapshots.count",
    "solver.max_iterations",
    "guards.trace_padding",
    "acceptance.smoothing_samples",
    "lemmas.samples",
    "lemmas.law_count",
}
_POSITIVE_FLOATS = {
    "coupling.support",
    "coupling.T",
    "initial_data.width",
    "space.length",
    "solver.tol",
    "solver.min_window",
}
_CHOICES = {
    "coupling.kind": COUPLING_KINDS,
    "initial_data.kind": INITIAL_DATA_KINDS,
    "solver.method": SOLVER_METHODS,
    "reconstruction.route": ROUTES,
    "logging.level": LOG_LEVELS,
    "logging.format": LOG_FORMATS,
}


class ConfigError(Exception):
    """Custom exception for configuration-related errors."""

    pass


def _merge(defaults: Dict[str, Any], values: Dict[str, Any], prefix: str = "") -> Dict[str, Any]:
    if not isinstance(values, dict):
        raise ConfigError(f"section '{prefix.rstrip('.') or '<root>'}' must be a mapping")
    merged = copy.deepcopy(defaults)
    for key, value in values.items():
        dotted = f"{prefix}{key}"
        if key not in defaults:
            raise ConfigError(f"Unknown configuration key '{dotted}'")
        if isinstance(defaults[key], dict):
            merged[key] = _merge(defaults[key], value or {}, f"{dotted}.")
        else:
            merged[key] = value
    return merged


def _is_power_of_two(n: int) -> bool:
    return n > 0 and n & (n - 1) == 0


class Config:
    """
    Run configuration for chronodelta, loaded from a YAML file and checked
    against SCHEMA before anything is computed.
    """

    def __init__(self, config_path: Optional[Path] = None, data: Optional[Dict[str, Any]] = None):
        self._config_path = config_path
        raw = self._load_config() if data is None else data
        self._config = _merge(SCHEMA, raw or {})
        try:
            self._validate()
        except TypeError as e:
            raise ConfigError(f"Invalid value type in configuration: {e}")

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "Config":
        return cls(data=data)

    def _load_config(self) -> Dict[str, Any]:
        """Loads the configuration from the YAML file."""
        if self._config_path is None or not self._config_path.is_file():
            raise ConfigError(f"Configuration file not found: {self._config_path}")
        try:
            with open(self._config_path, "r") as f:
                config = yaml.safe_load(f)
        except yaml.YAMLError as e:
            raise ConfigError(f"Invalid YAML in configuration file {self._config_path}: {e}")
        except Exception as e:
            raise ConfigError(f"Error reading configuration file {self._config_path}: {e}")
        return config or {}

    def _validate(self):
        for key in _POSITIVE_INTS:
            value = self.lookup(key)
            if isinstance(value, bool) or not isinstance(value, int) or value < 1:
                raise ConfigError(f"'{key}' must be a positive integer, got {value!r}")
        for key in _POSITIVE_FLOATS:
            value = self.lookup(key)
            if isinstance(value, bool) or not isinstance(value, (int, float)) or value <= 0:
                raise ConfigError(f"'{key}' must be a positive number, got {value!r}")
        for key, choices in _CHOICES.items():
            if self.lookup(key) not in choices:
                raise ConfigError(
                    f"'{key}' must be one of {', '.join(choices)}, got {self.lookup(key)!r}"
                )
        if not _is_power_of_two(self.lookup("space.count")):
            raise ConfigError("'space.count' must be a power of two")
        if not 0 < self.lookup("solver.target_contraction") < 1:
            raise ConfigError("'solver.target_contraction' must lie in (0, 1)")
        if not 0 < self.lookup("coupling.plateau") < self.lookup("coupling.edge") < 0.5:
            raise ConfigError("coupling cutoff needs 0 < plateau < edge < 0.5")
        if self.lookup("time.count") < 3 or self.lookup("snapshots.count") < 2:
            raise ConfigError("'time.count' must be >= 3 and 'snapshots.count' >= 2")
        if not self.lookup("time.start") <= 0 <= self.lookup("time.end"):
            raise ConfigError("the time window [time.start, time.end] must contain 0")
        if not self.lookup("time.end") > self.lookup("time.start"):
            raise ConfigError("'time.end' must be greater than 'time.start'")
        if not self.lookup("snapshots.end") > self.lookup("snapshots.start"):
            raise ConfigError("'snapshots.end' must be greater than 'snapshots.start'")
        for kind_key, path_key in (("coupling.kind", "coupling.path"), ("initial_data.kind", "initial_data.path")):
            if self.lookup(kind_key) == "sampled" and not self.lookup(path_key):
                raise ConfigError(f"'{path_key}' is required when '{kind_key}' is sampled")
        if self.lookup("initial_data.kind") == "bound_state" and not self.lookup("initial_data.alpha") < 0:
            raise ConfigError("'initial_data.alpha' must be negative for a bound state")
        quantities = self.lookup("sweep.quantities")
        unknown = [q for q in quantities or [] if q not in SWEEP_QUANTITIES]
        if unknown:
            raise ConfigError(f"unknown sweep quantities: {', '.join(map(str, unknown))}")

    def get(self, key: str, default: Any = None) -> Any:
        """Retrieves a configuration value."""
        return self._config.get(key, default)

    def lookup(self, dotted: str) -> Any:
        value: Any = self._config
        for part in dotted.split("."):
            value = value[part]
        return value

    def as_dict(self) -> Dict[str, Any]:
        return copy.deepcopy(self._config)

    def with_overrides(self, **overrides: Any) -> "Config":
        """Command-line flags over file values; None leaves a value alone."""
        data = self.as_dict()
        for key, value in overrides.items():
            if value is None:
                continue
            if key not in SCHEMA or isinstance(SCHEMA[key], dict):
                raise ConfigError(f"'{key}' cannot be overridden from the command line")
            data[key] = str(value) if isinstance(value, Path) else value
        return Config(self._config_path, data)

    @property
    def config_hash(self) -> str:
        canonical = json.dumps(self._config, sort_keys=True, default=str)
        return hashlib.sha256(canonical.encode()).hexdigest()

    @property
    def seed(self) -> int:
        return self.get("seed", 0)

    @property
    def threads(self) -> int:
        return self.get("threads", 1)

    @property
    def strict(self) -> bool:
        return bool(self.get("strict", False))

    @property
    def output_dir(self) -> Path:
        return Path(self.get("output_dir", "runs/latest"))

    @property
    def logging_config(self) -> Dict[str, str]:
        return self.get("logging", {"level": "INFO", "format": "text"})

    @property
    def coupling(self) -> Dict[str, Any]:
        return self.get("coupling")

    @property
    def initial_data(self) -> Dict[str, Any]:
        return self.get("initial_data")

    @property
    def space(self) -> Dict[str, Any]:
        return self.get("space")

    @property
    def time(self) -> Dict[str, Any]:
        return self.get("time")

    @property
    def snapshots(self) -> Dict[str, Any]:
        return self.get("snapshots")

    @property
    def solver(self) -> Dict[str, Any]:
        return self.get("solver")

    @property
    def route(self) -> str:
        reconstruction = self.get("reconstruction", {})
        return reconstruction.get("route", "fourier")

    @property
    def guards(self) -> Dict[str, Any]:
        return self.get("guards")

    @property
    def acceptance(self) -> Dict[str, Any]:
        return self.get("acceptance")

    @property
    def sweep_resolutions(self) -> List[int]:
        sweep = self.get("sweep", {})
        return list(sweep.get("resolutions") or [])

    @property
    def sweep_quantities(self) -> List[str]:
        sweep = self.get("sweep", {})
        return list(sweep.get("quantities") or [])

    @property
    def lemmas(self) -> Dict[str, Any]:
        return self.get("lemmas")


def get_config(config_path: Optional[Path] = None, repo_root: Path = Path(".")) -> Config:
    """
    Factory function to get the configuration.
    """
    if config_path is None:
        config_path = repo_root / CONFIG_FILE
    return Config(config_path)
