"""JSON and CSV serialization of grids, weights, functions, measures and reports."""

import csv
import io
import json
import math
from pathlib import Path

import numpy as np

from . import __version__
from ._validation import ValidationError
from .carleson import BallMeasure
from .capacity import CapacityResult
from .geometry import QuadratureGrid
from .holomorphic import HoloFunction
from .potentials import SphereMeasure
from .weights import WeightField

SIGNIFICANT = 12


def format_number(x):
    """Locale-independent text for a CSV cell; floats carry 12 significant digits."""
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        x = float(x)
        if math.isnan(x):
            return "nan"
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        return format(x, f".{SIGNIFICANT}g")
    if x is None:
        return ""
    return str(x)


def _complex_pairs(z):
    z = np.asarray(z, dtype=complex)
    return np.stack([z.real, z.imag], axis=-1).tolist()


def _from_pairs(pairs):
    a = np.asarray(pairs, dtype=float)
    if a.shape[-1] != 2:
        raise ValidationError("complex numbers are stored as [re, im] pairs")
    return a[..., 0] + 1j * a[..., 1]


def grid_to_dict(grid, weight=None):
    out = {
        "dim": grid.dim,
        "nodes": _complex_pairs(grid.nodes),
        "weights": grid.weights.tolist(),
        "resolution": grid.resolution,
    }
    if grid.levels is not None:
        out["levels"] = np.asarray(grid.levels).tolist()
    if weight is not None:
        out["weight"] = weight_to_dict(weight)
    return out


def grid_from_dict(data):
    levels = data.get("levels")
    return QuadratureGrid(
        int(data["dim"]),
        _from_pairs(data["nodes"]),
        np.asarray(data["weights"], dtype=float),
        data.get("resolution"),
        None if levels is None else np.asarray(levels, dtype=np.int64),
    )


def weight_to_dict(w):
    return {"descriptor": dict(w.descriptor), "values": w.values.tolist()}


def weight_from_dict(data):
    return WeightField(np.asarray(data["values"], dtype=float), dict(data.get("descriptor", {"kind": "custom"})))


def holo_to_dict(f):
    return f.to_dict()


def holo_from_dict(data, n=None):
    return HoloFunction.from_dict(data, n)


def measure_to_dict(mu):
    """``{atoms: [{node, mass}]}`` on the sphere, ``{atoms: [{coords, mass}]}`` in the ball."""
    if isinstance(mu, SphereMeasure):
        return {"atoms": [{"node": int(i), "mass": float(m)} for i, m in zip(mu.nodes, mu.masses)]}
    if isinstance(mu, BallMeasure):
        return {
            "dim": int(mu.points.shape[1]),
            "atoms": [{"coords": _complex_pairs(z), "mass": float(m)} for z, m in zip(mu.points, mu.masses)],
        }
    raise ValidationError(f"cannot serialize {type(mu).__name__}")


def measure_from_dict(data):
    atoms = data.get("atoms", [])
    if not atoms:
        if "dim" in data:
            return BallMeasure.empty(int(data["dim"]))
        return SphereMeasure.empty()
    if all("node" in a for a in atoms):
        return SphereMeasure([a["node"] for a in atoms], [a["mass"] for a in atoms])
    if all("coords" in a for a in atoms):
        return BallMeasure(np.array([_from_pairs(a["coords"]) for a in atoms]), [a["mass"] for a in atoms])
    raise ValidationError("every atom needs either a node or coords, not a mix")


def capacity_result_to_dict(res):
    return {
        "value": res.value,
        "status": res.status,
        "converged": res.converged,
        "method": res.method,
        "iterations": res.iterations,
        "residual": res.residual,
        "gap": res.gap,
        "optimizer": np.asarray(res.optimizer).tolist(),
        "dual": None if res.dual is None else np.asarray(res.dual).tolist(),
        "info": {k: float(v) if isinstance(v, (float, np.floating)) else v for k, v in res.info.items()},
    }


def capacity_result_from_dict(data):
    return CapacityResult(
        float(data["value"]),
        np.asarray(data["optimizer"], dtype=float),
        float(data["residual"]),
        bool(data["converged"]),
        int(data["iterations"]),
        data["method"],
        None if data.get("dual") is None else np.asarray(data["dual"], dtype=float),
        data.get("gap"),
        dict(data.get("info", {})),
    )


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        return x if math.isfinite(x) else str(x)
    if isinstance(obj, complex):
        return [obj.real, obj.imag]
    return obj


def dumps_json(obj):
    return json.dumps(_jsonable(obj), indent=2, sort_keys=True) + "\n"


def write_json(path, obj, config=None):
    """Write ``obj`` as JSON; with ``config`` the payload is wrapped with the config and version."""
    if config is not None:
        obj = {"version": __version__, "config": config, "result": obj}
    Path(path).write_text(dumps_json(obj), encoding="utf-8")


def read_json(path):
    try:
        return json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ValidationError(f"{path}: invalid JSON ({exc})") from exc


def csv_text(rows, columns=None, config=None):
    """RFC-4180 CSV text.  A leading ``#`` line records the version and resolved config."""
    rows = list(rows)
    if columns is None:
        columns = []
        for row in rows:
            columns.extend(k for k in row if k not in columns)
    buf = io.StringIO(newline="")
    if config is not None:
        meta = json.dumps({"version": __version__, "config": _jsonable(config)}, sort_keys=True)
        buf.write("# nonisopot " + meta + "\r\n")
    writer = csv.writer(buf, lineterminator="\r\n", quoting=csv.QUOTE_MINIMAL)
    writer.writerow(columns)
    for row in rows:
        writer.writerow([format_number(row.get(c)) for c in columns])
    return buf.getvalue()


def write_csv(path, rows, columns=None, config=None):
    Path(path).write_bytes(csv_text(rows, columns, config).encode("utf-8"))


def read_csv(path):
    """Rows of a CSV written by :func:`write_csv` as string dicts, plus the metadata line if any."""
    text = Path(path).read_bytes().decode("utf-8")
    meta = None
    if text.startswith("#"):
        first, _, text = text.partition("\n")
        meta = json.loads(first.split(" ", 2)[2])
    return list(csv.DictReader(io.StringIO(text, newline=""))), meta
