"""Training hyperparameters, extraction profiles, and config resolution.

``TrainConfig`` collects every knob of the two training stages in one frozen
dataclass; ``ExtractProfile`` holds the per-dataset inference presets; and
``resolve_run_config`` implements the precedence rule used by the service and
CLI: explicit overrides > config file > profile preset > defaults.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, fields, replace
from pathlib import Path
from typing import Any

from .errors import ConfigError

LINE_TO_WINDOW = "line_to_window"
COARSE_TO_FINE = "coarse_to_fine"


@dataclass(frozen=True)
class TrainConfig:
    """Hyperparameters of both training stages.

    Defaults are the published operating point of the method: 100 points per
    epipolar line, a 0.1 (normalized) search window, 16 px descriptor query
    grid, 8 px detector cell grid, reward threshold 2 px with rewards
    (1, -0.25) and regularizer -0.001, and SGD with nesterov momentum at
    learning rate 1e-3.
    """

    n_line: int = 100
    w_patch: float = 0.1
    g_d: int = 16
    g_k: int = 8
    epsilon: float = 2.0
    lambda_p: float = 1.0
    lambda_n: float = -0.25
    lambda_reg: float = -0.001
    lr: float = 1e-3
    momentum: float = 0.9
    batch_size: int = 1
    iterations: int = 1000
    pm_truncation: float = 0.9
    descriptor_channels: int = 128
    stride: int = 4
    patch_lattice_s: int = 8
    seed: int = 0
    l2_normalize: bool = False
    search_strategy: str = LINE_TO_WINDOW
    joint: bool = False

    def validate(self) -> "TrainConfig":
        if self.n_line < 2:
            raise ConfigError(f"n_line must be >= 2, got {self.n_line}")
        if not 0.0 < self.w_patch < 1.0:
            raise ConfigError(f"w_patch must be in (0, 1), got {self.w_patch}")
        if self.g_d < 1 or self.g_k < 1:
            raise ConfigError("grid sizes g_d and g_k must be >= 1")
        if not 0.0 < self.pm_truncation <= 1.0:
            raise ConfigError(f"pm_truncation must be in (0, 1], got {self.pm_truncation}")
        if self.patch_lattice_s < 2:
            raise ConfigError(f"patch_lattice_s must be >= 2, got {self.patch_lattice_s}")
        if self.epsilon < 0:
            raise ConfigError(f"epsilon must be >= 0, got {self.epsilon}")
        if self.batch_size < 1 or self.iterations < 0:
            raise ConfigError("batch_size must be >= 1 and iterations >= 0")
        if self.stride < 1 or self.descriptor_channels < 1:
            raise ConfigError("stride and descriptor_channels must be >= 1")
        if self.search_strategy not in (LINE_TO_WINDOW, COARSE_TO_FINE):
            raise ConfigError(f"unknown search_strategy {self.search_strategy!r}")
        return self


@dataclass(frozen=True)
class ExtractProfile:
    """Inference-time keypoint selection settings."""

    nms_size: int = 3
    max_keypoints: int = 8192
    score_threshold: float = 0.0
    ratio: float | None = None

    def validate(self) -> "ExtractProfile":
        if self.nms_size < 1 or self.nms_size % 2 == 0:
            raise ConfigError(f"nms_size must be odd and >= 1, got {self.nms_size}")
        if self.max_keypoints < 1:
            raise ConfigError(f"max_keypoints must be >= 1, got {self.max_keypoints}")
        if self.ratio is not None and not 0.0 < self.ratio <= 1.0:
            raise ConfigError(f"ratio must be in (0, 1], got {self.ratio}")
        return self


# Published per-dataset presets: small-image benchmark (3x3 NMS, 8192 cap),
# high-resolution localization (7x7 NMS, 16k cap, 0.9 score filter), and
# reconstruction (7x7 NMS, 20k cap, 0.9 score filter, 0.8 ratio test).
PROFILES: dict[str, ExtractProfile] = {
    "hpatches": ExtractProfile(nms_size=3, max_keypoints=8192, score_threshold=0.0, ratio=None),
    "aachen": ExtractProfile(nms_size=7, max_keypoints=16000, score_threshold=0.9, ratio=None),
    "eth": ExtractProfile(nms_size=7, max_keypoints=20000, score_threshold=0.9, ratio=0.8),
}


@dataclass(frozen=True)
class RunConfig:
    """Fully-resolved configuration of one command invocation."""

    train: TrainConfig = TrainConfig()
    extract: ExtractProfile = ExtractProfile()
    profile: str | None = None
    threads: int | None = None

    def validate(self) -> "RunConfig":
        self.train.validate()
        self.extract.validate()
        if self.profile is not None and self.profile not in PROFILES:
            raise ConfigError(f"unknown profile {self.profile!r}; known: {sorted(PROFILES)}")
        if self.threads is not None and self.threads < 1:
            raise ConfigError(f"threads must be >= 1, got {self.threads}")
        return self

    def to_dict(self) -> dict[str, Any]:
        return {
            "train": asdict(self.train),
            "extract": asdict(self.extract),
            "profile": self.profile,
            "threads": self.threads,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2) + "\n"


def _dataclass_from_dict(cls, data: dict[str, Any]):
    known = {f.name for f in fields(cls)}
    unknown = set(data) - known
    if unknown:
        raise ConfigError(f"unknown {cls.__name__} keys: {sorted(unknown)}")
    return cls(**data)


def run_config_from_dict(data: dict[str, Any]) -> RunConfig:
    data = dict(data)
    train = _dataclass_from_dict(TrainConfig, data.pop("train", {}))
    extract = _dataclass_from_dict(ExtractProfile, data.pop("extract", {}))
    profile = data.pop("profile", None)
    threads = data.pop("threads", None)
    if data:
        raise ConfigError(f"unknown RunConfig keys: {sorted(data)}")
    return RunConfig(train=train, extract=extract, profile=profile, threads=threads)


def resolve_run_config(
    config_file: str | Path | None = None,
    profile: str | None = None,
    train_overrides: dict[str, Any] | None = None,
    extract_overrides: dict[str, Any] | None = None,
    threads: int | None = None,
) -> RunConfig:
    """Merge defaults, profile preset, config file, and explicit overrides.

    Precedence, lowest to highest: dataclass defaults, ``profile`` preset,
    ``config_file`` contents, explicit override dicts.
    """
    cfg = RunConfig()
    if profile is not None:
        if profile not in PROFILES:
            raise ConfigError(f"unknown profile {profile!r}; known: {sorted(PROFILES)}")
        cfg = replace(cfg, extract=PROFILES[profile], profile=profile)
    if config_file is not None:
        path = Path(config_file)
        if not path.is_file():
            raise ConfigError(f"config file not found: {path}")
        try:
            raw = json.loads(path.read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config file is not valid JSON: {exc}") from exc
        file_cfg = dict(raw)
        file_train = file_cfg.pop("train", {})
        file_extract = file_cfg.pop("extract", {})
        file_profile = file_cfg.pop("profile", None)
        file_threads = file_cfg.pop("threads", None)
        if file_cfg:
            raise ConfigError(f"unknown config file keys: {sorted(file_cfg)}")
        if file_profile is not None and profile is None:
            if file_profile not in PROFILES:
                raise ConfigError(f"unknown profile {file_profile!r}")
            cfg = replace(cfg, extract=PROFILES[file_profile], profile=file_profile)
        cfg = replace(
            cfg,
            train=replace(cfg.train, **_checked(TrainConfig, file_train)),
            extract=replace(cfg.extract, **_checked(ExtractProfile, file_extract)),
        )
        if file_threads is not None:
            cfg = replace(cfg, threads=file_threads)
    if train_overrides:
        cfg = replace(cfg, train=replace(cfg.train, **_checked(TrainConfig, train_overrides)))
    if extract_overrides:
        cfg = replace(cfg, extract=replace(cfg.extract, **_checked(ExtractProfile, extract_overrides)))
    if threads is not None:
        cfg = replace(cfg, threads=threads)
    return cfg.validate()


def _checked(cls, data: dict[str, Any]) -> dict[str, Any]:
    known = {f.name for f in fields(cls)}
    unknown = set(data) - known
    if unknown:
        raise ConfigError(f"unknown {cls.__name__} keys: {sorted(unknown)}")
    return data


def write_config_echo(cfg: RunConfig, target: str | Path) -> Path:
    """Write the fully-resolved config next to a command's outputs.

    ``target`` is the command's primary output path; directories receive
    ``config.json`` inside, files receive a sibling ``<name>.config.json``.
    """
    target = Path(target)
    if target.is_dir():
        echo = target / "config.json"
    else:
        echo = target.with_name(target.name + ".config.json")
    echo.write_text(cfg.to_json(), encoding="utf-8")
    return echo
