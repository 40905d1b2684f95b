"""Declarative configuration (YAML) and defaults for the toolkit."""
from __future__ import annotations

import os
from dataclasses import dataclass, fields
from pathlib import Path

import yaml

from .errors import InvalidParam, IoError, ParseError

DATA_DIR_ENV = "GIRTHKIT_DATA"


@dataclass
class Config:
    data_dir: str = "./girthkit-data"
    rig_file: str = ""
    # measurement
    ray_count: int = 10_000
    slice_h: float = 1.0
    # pre-processing chain defaults
    z_max: float = 150.0
    median_window: int = 5
    bilateral_sigma_s: float = 3.0
    bilateral_sigma_r: float = 2.0
    sor_k: int = 50
    sor_stddev_mult: float = 1.0
    normals_k: int = 30
    # calibration defaults
    marker_edge: float = 30.0
    ransac_threshold: float = 1.0
    ransac_iterations: int = 500

    def __post_init__(self):
        if self.ray_count < 8:
            raise InvalidParam("ray_count must be >= 8")
        if self.slice_h <= 0 or self.z_max <= 0:
            raise InvalidParam("slice_h and z_max must be > 0")
        if self.median_window < 3 or self.median_window % 2 == 0:
            raise InvalidParam("median_window must be an odd integer >= 3")
        if self.bilateral_sigma_s <= 0 or self.bilateral_sigma_r <= 0:
            raise InvalidParam("bilateral sigmas must be > 0")
        if self.sor_k < 1 or self.sor_stddev_mult <= 0:
            raise InvalidParam("sor_k must be >= 1 and sor_stddev_mult > 0")
        if self.normals_k < 3:
            raise InvalidParam("normals_k must be >= 3")
        if self.marker_edge <= 0 or self.ransac_threshold <= 0:
            raise InvalidParam("marker_edge and ransac_threshold must be > 0")
        env = os.environ.get(DATA_DIR_ENV)
        if env:
            self.data_dir = env

    @property
    def data_path(self) -> Path:
        return Path(self.data_dir)


def load_config(path=None) -> Config:
    """Load YAML config; missing path yields defaults (+env override)."""
    if path is None:
        return Config()
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise IoError(str(exc)) from exc
    try:
        data = yaml.safe_load(text) or {}
    except yaml.YAMLError as exc:
        raise ParseError(f"{path}: {exc}") from exc
    if not isinstance(data, dict):
        raise ParseError(f"{path}: config must be a mapping")
    known = {f.name for f in fields(Config)}
    unknown = set(data) - known
    if unknown:
        raise ParseError(f"{path}: unknown config keys {sorted(unknown)}")
    return Config(**data)
