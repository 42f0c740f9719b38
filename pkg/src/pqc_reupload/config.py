"""Run configuration for pqc-reupload.

Settings are layered, each source overriding the previous one:

1. ``RunConfig`` defaults
2. dataset presets (filled in by ``resolve`` for settings left unset)
3. a YAML file (``RunConfig.from_yaml``)
4. ``PQC_*`` environment variables (``RunConfig.from_env``)
5. command-line flags (``RunConfig.with_overrides``)

Every run writes the resolved configuration next to its outputs; passing that file back with
``--config`` replays the run.

Example:
    >>> config = RunConfig.from_yaml(Path("pqc-config.yaml")).resolve()
    >>> config.train_config().learning_rate
    0.5
"""

import math
import os
import types
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path
from typing import Any, Union, cast, get_args, get_origin, get_type_hints

import yaml

from pqc_reupload.circuits import ARCH_IDS, CircuitTemplate, FSimParams, build_template
from pqc_reupload.datasets import DATASETS
from pqc_reupload.encoding import ConvSpec
from pqc_reupload.errors import ConfigurationError, PQCError
from pqc_reupload.training import CostKind, TrainConfig

ENV_PREFIX = "PQC_"
DEFAULT_CONFIG_PATH = Path(__file__).parent / "pqc-config.yaml"
SNAPSHOT_NAME = "resolved-config.yaml"


@dataclass(frozen=True)
class DatasetPreset:
    """Defaults that depend on the dataset."""

    arch: str
    learning_rate: float
    cost_gamma: float
    iterations: int
    batch_size: int
    split_ratio: float


PRESETS: dict[str, DatasetPreset] = {
    "parity": DatasetPreset("simple-a", 0.5, 0.0, 100, 8, 1.0),
    "cancer": DatasetPreset("simple-a", 0.1, 0.0, 20, 64, 2.0),
    "wines": DatasetPreset("simple-a", 0.1, 0.0, 20, 64, 2.0),
    "mnist": DatasetPreset("mnist-c", 0.02, 0.01, 100, 64, 2.0),
}


@dataclass(frozen=True)
class RunConfig:
    """All settings of a run. ``None`` means "use the dataset preset"."""

    # Data
    dataset: str = "parity"
    data_dir: str = "data"
    crop: str = "right"
    stump_k: int | None = None
    split_ratio: float | None = None
    n_splits: int = 6
    balance_sigma: float = 0.05

    # Circuit
    arch: str | None = None
    lrf_rows: int = 3
    lrf_cols: int = 3
    stride: int = 2
    fsim_theta: float = math.pi / 2
    fsim_phi: float = 0.1 * math.pi

    # Training
    learning_rate: float | None = None
    momentum: float = 0.9
    batch_size: int | None = None
    cost: str = "log"
    cost_beta: float = 10.0
    cost_gamma: float | None = None
    iterations: int | None = None
    shots: int = 0
    seed: int = 0

    # Execution
    threads: int = 1
    out: str = "runs"

    # Analysis
    landscape_half_range: float = math.pi
    landscape_resolution: int = 41
    scan_param: int = 0
    scan_points: int = 32
    sweep_thetas: list[float] = field(default_factory=lambda: [0.2, 0.5, 0.8])
    sweep_phis: list[float] = field(default_factory=lambda: [-0.5, 0.0, 0.5])
    timing_shots: int = 1000
    timing_t_rep_us: float = 50.0
    timing_t_rewrite_s: float = 1.45
    timing_iterations: int = 100

    @classmethod
    def field_names(cls) -> list[str]:
        return [f.name for f in fields(cls)]

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "RunConfig":
        unknown = sorted(set(data) - set(cls.field_names()))
        if unknown:
            raise ConfigurationError(f"unknown configuration keys: {unknown}")
        return cls(**data)

    @classmethod
    def from_yaml(cls, config_path: Path) -> "RunConfig":
        """Load configuration from a YAML file."""
        with open(config_path) as f:
            data = yaml.safe_load(f) or {}
        if not isinstance(data, dict):
            raise ConfigurationError(f"{config_path}: expected a mapping of settings")
        return cls.from_dict(data)

    @classmethod
    def from_env(cls, base: "RunConfig | None" = None) -> "RunConfig":
        """Apply ``PQC_<SETTING>`` environment variables on top of ``base``."""
        base = base or cls()
        hints = get_type_hints(cls)
        updates = {}
        for name in cls.field_names():
            raw = os.getenv(ENV_PREFIX + name.upper())
            if raw is not None:
                updates[name] = _coerce(name, raw, hints[name])
        return replace(base, **updates)

    def with_overrides(self, **overrides: Any) -> "RunConfig":
        """Override settings that are not ``None`` (unset command-line flags)."""
        return replace(self, **{k: v for k, v in overrides.items() if v is not None})

    def resolve(self) -> "RunConfig":
        """Fill unset settings from the dataset preset and validate the result."""
        if self.dataset not in PRESETS:
            raise ConfigurationError(
                f"unknown dataset {self.dataset!r}; choose from {sorted(DATASETS)}"
            )
        preset = PRESETS[self.dataset]
        resolved = replace(
            self,
            arch=self.arch if self.arch is not None else preset.arch,
            learning_rate=_pick(self.learning_rate, preset.learning_rate),
            cost_gamma=_pick(self.cost_gamma, preset.cost_gamma),
            iterations=_pick(self.iterations, preset.iterations),
            batch_size=_pick(self.batch_size, preset.batch_size),
            split_ratio=_pick(self.split_ratio, preset.split_ratio),
        )
        resolved.validate()
        return resolved

    def validate(self) -> None:
        if self.arch not in ARCH_IDS:
            raise ConfigurationError(f"unknown architecture {self.arch!r}; choose from {ARCH_IDS}")
        if self.crop not in ("right", "left"):
            raise ConfigurationError(f"crop must be 'right' or 'left', got {self.crop!r}")
        if self.threads < 1 or self.n_splits < 1:
            raise ConfigurationError("threads and n_splits must be >= 1")
        if self.balance_sigma < 0:
            raise ConfigurationError("balance_sigma must be >= 0")
        template = self.template()
        if self.stump_k is not None and self.stump_k != template.n_features:
            raise ConfigurationError(
                f"stump_k={self.stump_k} but {self.arch} encodes {template.n_features} features"
            )
        try:
            self.train_config()
        except PQCError as e:
            raise ConfigurationError(str(e)) from e

    @property
    def is_image(self) -> bool:
        return self.dataset == "mnist"

    def conv_spec(self) -> ConvSpec | None:
        """Convolution geometry for image datasets, ``None`` for tabular ones."""
        if not self.is_image:
            return None
        return ConvSpec(lrf_rows=self.lrf_rows, lrf_cols=self.lrf_cols, stride=self.stride)

    def fsim(self) -> FSimParams:
        return FSimParams(self.fsim_theta, self.fsim_phi)

    def template(self) -> CircuitTemplate:
        assert self.arch is not None, "resolve() the configuration first"
        try:
            return build_template(self.arch, self.conv_spec(), self.fsim())
        except PQCError as e:
            raise ConfigurationError(str(e)) from e

    def train_config(self) -> TrainConfig:
        assert self.learning_rate is not None, "resolve() the configuration first"
        assert self.batch_size is not None and self.iterations is not None
        assert self.cost_gamma is not None
        return TrainConfig(
            learning_rate=self.learning_rate,
            momentum=self.momentum,
            batch_size=self.batch_size,
            cost_beta=self.cost_beta,
            cost_gamma=self.cost_gamma,
            iterations=self.iterations,
            cost=cast(CostKind, self.cost),
            shots=self.shots,
            master_seed=self.seed,
        )

    def to_dict(self) -> dict[str, Any]:
        return asdict(self)

    def to_yaml(self, path: Path) -> None:
        """Write the configuration as flat YAML."""
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w") as f:
            yaml.safe_dump(self.to_dict(), f, sort_keys=False)


def _pick(value: Any, default: Any) -> Any:
    return default if value is None else value


def _coerce(name: str, raw: str, hint: Any) -> Any:
    """Convert an environment string to the annotated type of setting ``name``."""
    if get_origin(hint) in (Union, types.UnionType):
        if raw.strip().lower() in ("", "none", "null"):
            return None
        hint = next(arg for arg in get_args(hint) if arg is not type(None))
    try:
        if get_origin(hint) is list:
            return [float(part) for part in raw.split(",") if part.strip()]
        return hint(raw)
    except ValueError as e:
        raise ConfigurationError(f"{ENV_PREFIX}{name.upper()}: cannot parse {raw!r}") from e


def load_config(config_file: Path | None) -> RunConfig:
    """Defaults, then the YAML file (if it exists), then the environment."""
    base = RunConfig.from_yaml(config_file) if config_file and config_file.exists() else RunConfig()
    return RunConfig.from_env(base)
