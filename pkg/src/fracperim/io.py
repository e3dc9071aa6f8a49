"""JSON readers and writers for spaces, sets and reports."""

from __future__ import annotations

import csv
import json
from pathlib import Path
from typing import Any, Iterable, Sequence

import numpy as np

from .errors import ArgumentError, FracPerimError
from .space import DiscreteSpace, GridInfo, IndicatorSet


class SpaceFileError(FracPerimError, ValueError):
    """Malformed space or set file."""


def _load_json(path) -> Any:
    text = Path(path).read_text()
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise SpaceFileError(f"{path}: line {exc.lineno}, column {exc.colno}: {exc.msg}") from None


def space_to_dict(space: DiscreteSpace) -> dict:
    out: dict[str, Any] = {"weights": space.weights.tolist(), "resolution_h": space.resolution_h}
    if space.metric == "table":
        d = space.distance_matrix()
        iu = np.triu_indices(space.n, k=1)
        out["metric"] = "table"
        out["distances"] = d[iu].tolist()
        if space.points is not None:
            out["points"] = space.points.tolist()
    else:
        out["metric"] = "euclidean"
        out["points"] = space.points.tolist()
    if space.grid is not None:
        g = space.grid
        out["grid"] = {"shape": list(g.shape), "spacing": g.spacing, "origin": list(g.origin)}
    return out


def space_from_dict(data: dict, source: str = "<space>") -> DiscreteSpace:
    if not isinstance(data, dict):
        raise SpaceFileError(f"{source}: top level must be an object")
    for key in ("weights", "resolution_h"):
        if key not in data:
            raise SpaceFileError(f"{source}: missing field '{key}'")
    metric = data.get("metric", "euclidean")
    try:
        weights = np.asarray(data["weights"], dtype=float)
        h = float(data["resolution_h"])
    except (TypeError, ValueError) as exc:
        raise SpaceFileError(f"{source}: field 'weights'/'resolution_h': {exc}") from None
    points = None
    if "points" in data:
        try:
            points = np.asarray(data["points"], dtype=float)
        except (TypeError, ValueError) as exc:
            raise SpaceFileError(f"{source}: field 'points': {exc}") from None
    table = None
    if metric == "table":
        if "distances" not in data:
            raise SpaceFileError(f"{source}: metric 'table' needs field 'distances'")
        n = weights.size
        tri = np.asarray(data["distances"], dtype=float)
        if tri.size != n * (n - 1) // 2:
            raise SpaceFileError(
                f"{source}: field 'distances' has {tri.size} entries, expected {n * (n - 1) // 2}")
        table = np.zeros((n, n))
        iu = np.triu_indices(n, k=1)
        table[iu] = tri
        table = table + table.T
    elif metric != "euclidean":
        raise SpaceFileError(f"{source}: field 'metric' must be 'euclidean' or 'table', got {metric!r}")
    elif points is None:
        raise SpaceFileError(f"{source}: missing field 'points'")
    grid = None
    if "grid" in data:
        g = data["grid"]
        grid = GridInfo(tuple(int(v) for v in g["shape"]), float(g["spacing"]),
                        tuple(float(v) for v in g["origin"]))
    try:
        return DiscreteSpace(points, weights, h, distances=table, grid=grid)
    except ArgumentError as exc:
        raise SpaceFileError(f"{source}: {exc}") from None


def load_space(path) -> DiscreteSpace:
    return space_from_dict(_load_json(path), str(path))


def save_space(space: DiscreteSpace, path) -> None:
    write_json(space_to_dict(space), path)


def load_set(path, space: DiscreteSpace) -> IndicatorSet:
    data = _load_json(path)
    if not isinstance(data, list):
        raise SpaceFileError(f"{path}: a set file must be a JSON array of 0/1")
    if len(data) != space.n:
        raise SpaceFileError(f"{path}: set has {len(data)} entries, space has {space.n} points")
    for k, v in enumerate(data):
        if v not in (0, 1) or isinstance(v, float) and v not in (0.0, 1.0):
            raise SpaceFileError(f"{path}: entry {k} is {v!r}, expected 0 or 1")
    return IndicatorSet(space, np.asarray(data, dtype=bool))


def save_set(E: IndicatorSet, path) -> None:
    Path(path).write_text(json.dumps(E.mask.astype(int).tolist(), separators=(",", ":")) + "\n")


def _default(obj):
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.floating):
        return float(obj)
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, np.bool_):
        return bool(obj)
    return str(obj)


def dumps(obj) -> str:
    return json.dumps(obj, default=_default, sort_keys=True, indent=2) + "\n"


def write_json(obj, path) -> None:
    Path(path).write_text(dumps(obj))


def write_csv(path, header: Sequence[str], rows: Iterable[Sequence]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in row])
