"""
JSON artifacts
--------------
net.json, field.json, boundary values and reports, all tagged with
``"schema": "roydennet/1"``. Writes are atomic (tmp file + rename) and
key-sorted so identical runs give byte-identical files.
"""

import csv
import json
import logging
import os
from contextlib import contextmanager
from typing import Any, Iterable, Iterator, TextIO

from roydennet.config import SCHEMA
from roydennet.errors import InputError
from roydennet.geometry import ProxySpace, load_space, write_space
from roydennet.net import KappaNet
from roydennet.transfer import ScalarField
from roydennet.verify import VerificationReport

logger = logging.getLogger("RoydenNet.artifacts")


@contextmanager
def _atomic_open(path: str, newline: str | None = None) -> Iterator[TextIO]:
    """Write to ``path + ".tmp"`` and rename over ``path`` on success."""
    directory = os.path.dirname(path)
    if directory:
        os.makedirs(directory, exist_ok=True)
    tmp = path + ".tmp"
    with open(tmp, "w", newline=newline) as f:
        yield f
    os.replace(tmp, path)


def write_json(path: str, payload: dict) -> str:
    with _atomic_open(path) as f:
        json.dump(payload, f, indent=2, sort_keys=True, allow_nan=False)
        f.write("\n")
    logger.debug(f"Wrote {path}")
    return path


def read_json(path: str) -> dict:
    if not os.path.exists(path):
        raise InputError(f"no such file: {path}")
    try:
        with open(path) as f:
            data = json.load(f)
    except json.JSONDecodeError as e:
        raise InputError(f"{path}: invalid JSON ({e})") from None
    if not isinstance(data, dict):
        raise InputError(f"{path}: expected a JSON object")
    return data


def _tagged(path: str) -> dict:
    data = read_json(path)
    if data.get("schema") != SCHEMA:
        raise InputError(f"{path}: schema must be {SCHEMA!r}, got {data.get('schema')!r}")
    return data


def read_space(path: str) -> ProxySpace:
    if not os.path.exists(path):
        raise InputError(f"no such file: {path}")
    with open(path) as f:
        return load_space(f)


def write_space_file(path: str, space: ProxySpace) -> str:
    with _atomic_open(path) as f:
        write_space(space, f)
    logger.debug(f"Wrote {path}")
    return path


# --- Nets ---

def write_net(path: str, net: KappaNet) -> str:
    return write_json(path, {"schema": SCHEMA, **net.to_dict()})


def read_net(path: str, space: ProxySpace) -> KappaNet:
    """Rebuild a net on ``space``; the stored adjacency must match the recomputed one."""
    data = _tagged(path)
    try:
        kappa = float(data["kappa"])
        points = [int(g) for g in data["points"]]
        factor = float(data.get("adjacency_factor", 3.0))
        stored = {int(g): sorted(int(h) for h in nbrs) for g, nbrs in data["adjacency"].items()}
    except (KeyError, TypeError, ValueError, AttributeError) as e:
        raise InputError(f"{path}: malformed net ({e})") from None
    net = KappaNet.from_points(space, kappa, points, factor)
    for g in net.ids:
        if stored.get(g, []) != list(net.adjacency[g]):
            raise InputError(f"{path}: stored adjacency of net point {g} disagrees with the space")
    return net


# --- Fields ---

def write_field(path: str, field: ScalarField) -> str:
    return write_json(path, {"schema": SCHEMA, **field.to_dict()})


def read_field(path: str) -> ScalarField:
    data = _tagged(path)
    try:
        return ScalarField.from_mapping(
            data["domain"], {int(k): float(v) for k, v in data["values"].items()}
        )
    except (KeyError, TypeError, ValueError, AttributeError) as e:
        raise InputError(f"{path}: malformed field ({e})") from None


def read_boundary(path: str) -> dict[int, float]:
    """Boundary values: ``{"values": {id: value}}`` (schema tag optional) or a bare mapping."""
    data = read_json(path)
    values = data.get("values", {k: v for k, v in data.items() if k != "schema"})
    try:
        return {int(k): float(v) for k, v in values.items()}
    except (TypeError, ValueError, AttributeError) as e:
        raise InputError(f"{path}: malformed boundary values ({e})") from None


# --- Reports ---

def write_report(path: str, payload: dict) -> str:
    return write_json(path, {"schema": SCHEMA, **payload})


def write_verification(path: str, reports: list[VerificationReport]) -> str:
    if len(reports) == 1:
        return write_json(path, reports[0].to_dict())
    return write_json(path, {"schema": SCHEMA, "reports": [r.to_dict() for r in reports]})


def read_verification(path: str) -> list[VerificationReport]:
    data = _tagged(path)
    if "reports" in data:
        return [VerificationReport.from_dict(r) for r in data["reports"]]
    return [VerificationReport.from_dict(data)]


def write_curves(directory: str, reports: Iterable[VerificationReport]) -> list[str]:
    """One CSV per report curve, columns in the curve's key order."""
    os.makedirs(directory, exist_ok=True)
    written = []
    for report in reports:
        if not report.curve:
            continue
        columns = list(report.curve)
        path = os.path.join(directory, f"{report.check}.csv")
        with _atomic_open(path, newline="") as f:
            writer = csv.writer(f)
            writer.writerow(columns)
            for row in zip(*(report.curve[c] for c in columns)):
                writer.writerow(["" if v is None else _cell(v) for v in row])
        written.append(path)
    return written


def _cell(value: Any) -> str:
    return repr(float(value)) if isinstance(value, float) else str(value)
