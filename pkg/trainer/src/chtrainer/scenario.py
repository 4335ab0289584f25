"""Reader for the scenario interchange binary.

Layout (little-endian): magic "CHSC", version u32, path count u64, path
length u64, seed u64, u32-length-prefixed UTF-8 model tag, then M x L
float64 prices row-major.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

MAGIC = b"CHSC"
VERSION = 1


class ScenarioFormatError(ValueError):
    pass


@dataclass
class ScenarioFile:
    paths: np.ndarray
    seed: int
    model_tag: str

    @property
    def n_paths(self) -> int:
        return self.paths.shape[0]

    @property
    def n_steps(self) -> int:
        return self.paths.shape[1] - 1


def read_scenarios(path) -> ScenarioFile:
    with open(path, "rb") as fh:
        if fh.read(4) != MAGIC:
            raise ScenarioFormatError(f"{path}: not a scenario file")
        (version,) = struct.unpack("<I", fh.read(4))
        if version != VERSION:
            raise ScenarioFormatError(f"{path}: unsupported version {version}")
        m, row_len, seed = struct.unpack("<QQQ", fh.read(24))
        (tag_len,) = struct.unpack("<I", fh.read(4))
        tag = fh.read(tag_len).decode("utf-8")
        data = fh.read()
    if len(data) != m * row_len * 8:
        raise ScenarioFormatError(f"{path}: truncated data section")
    paths = np.frombuffer(data, dtype="<f8").reshape(m, row_len).copy()
    if not np.isfinite(paths).all() or not (paths > 0).all():
        raise ScenarioFormatError(f"{path}: prices must be positive and finite")
    return ScenarioFile(paths=paths, seed=seed, model_tag=tag)
