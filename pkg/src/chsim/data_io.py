"""File interchange: price CSVs, the scenario binary, stats and weights JSON.

Scenario binary layout (normative, little-endian):

    magic  "CHSC"                      4 bytes
    version                            u32   (currently 1)
    M      number of paths             u64
    L      path length (steps + 1)     u64
    seed                               u64
    tag length                         u32
    model tag                          UTF-8 bytes
    prices M x L float64, row-major

All floating-point interchange is IEEE-754 float64; JSON floats are written
with shortest round-trip representation and non-finite values are rejected on
read.
"""

from __future__ import annotations

import csv
import datetime
import hashlib
import json
import struct
import sys
from dataclasses import dataclass

import numpy as np

from .errors import FileFormatError, InsufficientDataError, ParameterError, WeightsFormatError
from .hedging import BatchNormStats, PolicyLayer, PolicyWeights
from .simulator import ScenarioSet
from .stylized_facts import StylizedFactsTarget

if sys.version_info >= (3, 11):
    import tomllib as _toml
else:
    import tomli as _toml

SCENARIO_MAGIC = b"CHSC"
SCENARIO_VERSION = 1


@dataclass
class PriceHistory:
    """Validated daily close series with strictly increasing dates."""

    dates: list
    closes: np.ndarray
    source: str = ""

    def __post_init__(self):
        self.closes = np.asarray(self.closes, dtype=float)
        if len(self.dates) != self.closes.size:
            raise FileFormatError("dates and closes must have equal length")
        if not np.all(self.closes > 0):
            raise FileFormatError("all closes must be positive")
        for a, b in zip(self.dates, self.dates[1:]):
            if not a < b:
                raise FileFormatError(f"dates not strictly increasing at {b}")

    def __len__(self):
        return self.closes.size


@dataclass(frozen=True)
class SplitSpec:
    calibration_len: int = 3000
    test_len: int = 3000

    def __post_init__(self):
        if self.calibration_len < 1 or self.test_len < 1:
            raise ParameterError("split lengths must be positive")


def ingest_csv(path, date_column: str = "date", close_column: str = "close",
               source: str = None) -> PriceHistory:
    """Read a daily price CSV with a header row and ISO-8601 dates.

    Rows with unparseable or nonpositive prices, and out-of-order dates, are
    rejected with the offending line number.
    """
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None:
            raise FileFormatError(f"{path}: empty file")
        for col in (date_column, close_column):
            if col not in reader.fieldnames:
                raise FileFormatError(f"{path}: missing column {col!r}")
        dates = []
        closes = []
        for lineno, row in enumerate(reader, start=2):
            raw_date = (row.get(date_column) or "").strip()
            raw_close = (row.get(close_column) or "").strip()
            try:
                date = datetime.date.fromisoformat(raw_date)
            except ValueError:
                raise FileFormatError(
                    f"{path}: line {lineno}: bad date {raw_date!r}") from None
            try:
                close = float(raw_close)
            except ValueError:
                raise FileFormatError(
                    f"{path}: line {lineno}: bad close {raw_close!r}") from None
            if not np.isfinite(close) or close <= 0:
                raise FileFormatError(
                    f"{path}: line {lineno}: nonpositive close {raw_close!r}")
            if dates and not dates[-1] < date:
                raise FileFormatError(
                    f"{path}: line {lineno}: dates not strictly increasing")
            dates.append(date)
            closes.append(close)
    if not dates:
        raise FileFormatError(f"{path}: no data rows")
    return PriceHistory(dates=dates, closes=np.array(closes),
                        source=source if source is not None else str(path))


def split_history(history: PriceHistory, spec: SplitSpec = SplitSpec()):
    """First calibration_len rows and the following test_len rows, disjoint."""
    need = spec.calibration_len + spec.test_len
    if len(history) < need:
        raise InsufficientDataError(
            f"history has {len(history)} rows, split needs {need}")
    a = PriceHistory(dates=history.dates[:spec.calibration_len],
                     closes=history.closes[:spec.calibration_len],
                     source=history.source)
    b = PriceHistory(
        dates=history.dates[spec.calibration_len:need],
        closes=history.closes[spec.calibration_len:need],
        source=history.source)
    return a, b


def write_scenarios(scenarios: ScenarioSet, path) -> None:
    """Write the normative scenario binary."""
    tag = scenarios.model_tag.encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(SCENARIO_MAGIC)
        fh.write(struct.pack("<I", SCENARIO_VERSION))
        fh.write(struct.pack("<QQQ", scenarios.n_paths, scenarios.paths.shape[1],
                             int(scenarios.seed) % (1 << 64)))
        fh.write(struct.pack("<I", len(tag)))
        fh.write(tag)
        fh.write(np.ascontiguousarray(scenarios.paths, dtype="<f8").tobytes())


def read_scenarios(path) -> ScenarioSet:
    """Read the scenario binary back; validates magic, version, and size."""
    with open(path, "rb") as fh:
        magic = fh.read(4)
        if magic != SCENARIO_MAGIC:
            raise FileFormatError(f"{path}: bad magic {magic!r}")
        (version,) = struct.unpack("<I", fh.read(4))
        if version != SCENARIO_VERSION:
            raise FileFormatError(f"{path}: unsupported version {version}")
        m, row_len, seed = struct.unpack("<QQQ", fh.read(24))
        (tag_len,) = struct.unpack("<I", fh.read(4))
        tag = fh.read(tag_len).decode("utf-8")
        data = fh.read()
    expected = m * row_len * 8
    if len(data) != expected:
        raise FileFormatError(
            f"{path}: expected {expected} data bytes, found {len(data)}")
    paths = np.frombuffer(data, dtype="<f8").reshape(m, row_len).copy()
    return ScenarioSet(paths=paths, seed=seed, model_tag=tag)


def write_scenarios_csv(scenarios: ScenarioSet, path) -> None:
    """One path per row, plain numeric CSV for interchange."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        for row in scenarios.paths:
            writer.writerow([repr(float(v)) for v in row])


def read_scenarios_csv(path, seed: int = 0, model_tag: str = "csv") -> ScenarioSet:
    rows = []
    with open(path, newline="") as fh:
        for lineno, row in enumerate(csv.reader(fh), start=1):
            if not row:
                continue
            try:
                rows.append([float(v) for v in row])
            except ValueError:
                raise FileFormatError(f"{path}: line {lineno}: non-numeric value") from None
    if not rows:
        raise FileFormatError(f"{path}: no data rows")
    lengths = {len(r) for r in rows}
    if len(lengths) != 1:
        raise FileFormatError(f"{path}: rows have unequal lengths {sorted(lengths)}")
    return ScenarioSet(paths=np.array(rows), seed=seed, model_tag=model_tag)


def _reject_nonfinite(value):
    raise FileFormatError(f"non-finite number {value!r} in JSON input")


def load_json(path):
    with open(path) as fh:
        return json.load(fh, parse_constant=_reject_nonfinite)


def dump_json(obj, path) -> None:
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=2, sort_keys=False)
        fh.write("\n")


def target_to_dict(target: StylizedFactsTarget) -> dict:
    return {
        "hill": target.hill,
        "vol": target.vol,
        "acf_returns": [float(v) for v in target.acf_returns],
        "acf_sq_returns": [float(v) for v in target.acf_sq_returns],
        "max_lag": target.max_lag,
        "tail_fraction": target.tail_fraction,
        "degenerate_tail": bool(target.degenerate_tail),
    }


def target_from_dict(doc: dict) -> StylizedFactsTarget:
    try:
        return StylizedFactsTarget(
            hill=float(doc["hill"]), vol=float(doc["vol"]),
            acf_returns=np.array(doc["acf_returns"], dtype=float),
            acf_sq_returns=np.array(doc["acf_sq_returns"], dtype=float),
            max_lag=int(doc["max_lag"]),
            tail_fraction=float(doc["tail_fraction"]),
            degenerate_tail=bool(doc.get("degenerate_tail", False)))
    except KeyError as exc:
        raise FileFormatError(f"stats document missing key {exc}") from None


def save_stats(target: StylizedFactsTarget, path) -> None:
    dump_json(target_to_dict(target), path)


def load_stats(path) -> StylizedFactsTarget:
    return target_from_dict(load_json(path))


def _bn_to_dict(bn: BatchNormStats):
    if bn is None:
        return None
    return {"mean": [float(v) for v in bn.mean],
            "var": [float(v) for v in bn.var],
            "scale": [float(v) for v in bn.scale],
            "shift": [float(v) for v in bn.shift],
            "epsilon": float(bn.epsilon)}


def save_policy_weights(weights: PolicyWeights, path) -> None:
    weights.validate()
    doc = {
        "schema_version": weights.schema_version,
        "input_offset": [float(v) for v in weights.input_offset],
        "input_scale": [float(v) for v in weights.input_scale],
        "output_scale": float(weights.output_scale),
        "layers": [
            {
                "weight": [[float(v) for v in row] for row in np.asarray(layer.weight)],
                "bias": [float(v) for v in layer.bias],
                "activation": layer.activation,
                "batch_norm": _bn_to_dict(layer.batch_norm),
            }
            for layer in weights.layers
        ],
    }
    dump_json(doc, path)


def load_policy_weights(path) -> PolicyWeights:
    try:
        doc = load_json(path)
    except FileFormatError:
        raise
    except (OSError, json.JSONDecodeError) as exc:
        raise WeightsFormatError(f"{path}: {exc}") from None
    try:
        layers = []
        for entry in doc["layers"]:
            bn = entry.get("batch_norm")
            stats = None
            if bn is not None:
                stats = BatchNormStats(
                    mean=np.array(bn["mean"], dtype=float),
                    var=np.array(bn["var"], dtype=float),
                    scale=np.array(bn["scale"], dtype=float),
                    shift=np.array(bn["shift"], dtype=float),
                    epsilon=float(bn.get("epsilon", 1e-5)))
            layers.append(PolicyLayer(
                weight=np.array(entry["weight"], dtype=float),
                bias=np.array(entry["bias"], dtype=float),
                activation=entry.get("activation", "none"),
                batch_norm=stats))
        weights = PolicyWeights(
            layers=layers,
            input_offset=np.array(doc["input_offset"], dtype=float),
            input_scale=np.array(doc["input_scale"], dtype=float),
            output_scale=float(doc.get("output_scale", 100.0)),
            schema_version=int(doc.get("schema_version", -1)))
    except (KeyError, TypeError, ValueError) as exc:
        raise WeightsFormatError(f"{path}: malformed weights document: {exc}") from None
    weights.validate()
    return weights


def load_toml(path) -> dict:
    with open(path, "rb") as fh:
        try:
            return _toml.load(fh)
        except _toml.TOMLDecodeError as exc:
            raise FileFormatError(f"{path}: {exc}") from None


def sha256_file(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()
