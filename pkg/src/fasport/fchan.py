"""fchan v1 channel files and JSON scenario configs.

fchan v1 layout:
    {"version": 1, "array": {...}, "scenario": {...}, "B": int,
     "data": [B x [N x [K x [re, im]]]]}
Floats are written with 17 significant decimal digits, which round-trips
IEEE-754 doubles exactly. Unknown keys are rejected on read.
"""

import json

import numpy as np

from .channel import ArrayConfig, ChannelBatch, ScenarioConfig
from .errors import ConfigError

FCHAN_VERSION = 1


def format_float(x: float) -> str:
    if not np.isfinite(x):
        raise ConfigError(f"cannot serialize non-finite number {x!r}")
    return format(float(x), ".17g")


def _dump(obj) -> str:
    if isinstance(obj, bool):
        return "true" if obj else "false"
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        return format_float(obj)
    if isinstance(obj, str):
        return json.dumps(obj)
    if obj is None:
        return "null"
    if isinstance(obj, dict):
        return "{" + ",".join(f"{json.dumps(k)}:{_dump(v)}" for k, v in obj.items()) + "}"
    if isinstance(obj, (list, tuple)):
        return "[" + ",".join(_dump(v) for v in obj) + "]"
    raise ConfigError(f"cannot serialize {type(obj).__name__}")


def dumps_fchan(batch: ChannelBatch) -> str:
    b, n, k = batch.realizations.shape
    re = batch.realizations.real
    im = batch.realizations.imag
    rows = []
    for bi in range(b):
        ports = []
        for ni in range(n):
            users = ",".join(
                f"[{format_float(re[bi, ni, ki])},{format_float(im[bi, ni, ki])}]"
                for ki in range(k))
            ports.append(f"[{users}]")
        rows.append("[" + ",".join(ports) + "]")
    head = (f'{{"version":{FCHAN_VERSION},'
            f'"array":{_dump(batch.array.to_dict())},'
            f'"scenario":{_dump(batch.scenario.to_dict())},'
            f'"B":{b},"data":[')
    return head + ",".join(rows) + "]}"


def write_fchan(batch: ChannelBatch, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(dumps_fchan(batch))
        fh.write("\n")


def loads_fchan(text: str) -> ChannelBatch:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"invalid fchan JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise ConfigError("fchan document must be a JSON object")
    unknown = set(doc) - {"version", "array", "scenario", "B", "data"}
    if unknown:
        raise ConfigError(f"unknown keys in fchan document: {sorted(unknown)}")
    if doc.get("version") != FCHAN_VERSION:
        raise ConfigError(f"unsupported fchan version {doc.get('version')!r}")
    for key in ("array", "scenario", "B", "data"):
        if key not in doc:
            raise ConfigError(f"fchan document missing {key!r}")
    array = ArrayConfig.from_dict(doc["array"])
    scenario = ScenarioConfig.from_dict(doc["scenario"])
    data = np.asarray(doc["data"], dtype=float)
    if data.ndim != 4 or data.shape[3] != 2:
        raise ConfigError("fchan data must be B x N x K x [re, im]")
    b, n, k = data.shape[:3]
    if b != doc["B"]:
        raise ConfigError(f"B={doc['B']} does not match data length {b}")
    if n != array.total_ports:
        raise ConfigError(f"data has {n} ports, array config says {array.total_ports}")
    if k != scenario.users_k:
        raise ConfigError(f"data has {k} users, scenario says {scenario.users_k}")
    realizations = data[..., 0] + 1j * data[..., 1]
    return ChannelBatch(realizations=realizations, scenario=scenario, array=array)


def read_fchan(path) -> ChannelBatch:
    with open(path, encoding="utf-8") as fh:
        return loads_fchan(fh.read())


def load_scenario_file(path) -> tuple[ArrayConfig, ScenarioConfig, int]:
    """Scenario JSON: {"array": {...}, "scenario": {...}, "B": int}."""
    with open(path, encoding="utf-8") as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"invalid scenario JSON in {path}: {exc}") from exc
    if not isinstance(doc, dict):
        raise ConfigError("scenario file must be a JSON object")
    unknown = set(doc) - {"array", "scenario", "B"}
    if unknown:
        raise ConfigError(f"unknown keys in scenario file: {sorted(unknown)}")
    for key in ("array", "scenario"):
        if key not in doc:
            raise ConfigError(f"scenario file missing {key!r}")
    batch = doc.get("B", 1)
    if not isinstance(batch, int) or batch < 1:
        raise ConfigError("B must be a positive integer")
    return ArrayConfig.from_dict(doc["array"]), ScenarioConfig.from_dict(doc["scenario"]), batch
