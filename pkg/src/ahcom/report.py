"""CSV and JSON rendering of pipeline results.

Files written into the output directory:

``charges.csv``
    label, R, Q, Q_limit, exponent, status (one row per ladder radius)
``leaves.csv``
    rhat, H, residual, sup_f, roundness_radial, roundness_tracefree,
    radius_gap, C0..C3, z1..z3 (one row per CMC leaf)
``evolution.csv``
    label, rate, fd_rate, target, abs_dev, rel_dev, residual_exponent,
    hypotheses_ok
``report.json``
    every result above plus mass vector, center and boost check, with
    ``schema_version`` and the effective configuration.

Output is deterministic: no timestamps, keys in fixed order, floats in
shortest round-trip form.  Non-finite floats become ``null`` (NaN) or the
strings ``"inf"``/``"-inf"`` in JSON and ``nan``/``inf`` in CSV.
"""

from __future__ import annotations

import csv
import json
import math
import os

import numpy as np

from .minkowski import HyperbolicPoint

__all__ = ["SCHEMA_VERSION", "ReportError", "to_jsonable", "render", "write_error"]

SCHEMA_VERSION = "ahcom-report/1"

CHARGE_FIELDS = ("label", "R", "Q", "Q_limit", "exponent", "status")
LEAF_FIELDS = ("rhat", "H", "residual", "sup_f", "roundness_radial", "roundness_tracefree",
               "radius_gap", "C0", "C1", "C2", "C3", "z1", "z2", "z3")
EVOLUTION_FIELDS = ("label", "rate", "fd_rate", "target", "abs_dev", "rel_dev",
                    "residual_exponent", "hypotheses_ok")


class ReportError(OSError):
    pass


def _float(x):
    x = float(x)
    if math.isnan(x):
        return None
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return x + 0.0  # no negative zeros in reports


def to_jsonable(obj):
    if obj is None or isinstance(obj, (bool, str)):
        return obj
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        return _float(obj)
    if isinstance(obj, HyperbolicPoint):
        return {"r": _float(obj.r), "chart": [_float(c) for c in obj.chart]}
    if isinstance(obj, np.ndarray):
        return [to_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if hasattr(obj, "__dataclass_fields__"):
        return {k: to_jsonable(getattr(obj, k)) for k in obj.__dataclass_fields__
                if k not in ("coefficients",)}
    raise TypeError(f"cannot serialise {type(obj).__name__}")


def _csv_value(v):
    if isinstance(v, (float, np.floating)):
        return repr(float(v) + 0.0)
    if v is None:
        return ""
    return str(v)


def _write_csv(path, fields, rows):
    try:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(fields)
            for row in rows:
                w.writerow([_csv_value(row[f]) for f in fields])
    except OSError as exc:
        raise ReportError(f"cannot write {path}: {exc.strerror}") from None


def _write_json(path, payload):
    try:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(payload, fh, indent=2, allow_nan=False)
            fh.write("\n")
    except OSError as exc:
        raise ReportError(f"cannot write {path}: {exc.strerror}") from None


def render(results, cfg, out_dir, model_label=""):
    """Write every applicable file; returns the list of paths written."""
    try:
        os.makedirs(out_dir, exist_ok=True)
    except OSError as exc:
        raise ReportError(f"cannot create {out_dir}: {exc.strerror}") from None
    written = []
    payload = {"schema_version": SCHEMA_VERSION, "model": model_label,
               "config": to_jsonable(cfg), "results": {}}
    if "charges" in results:
        rows = [r for q in results["charges"].values() for r in q.rows()]
        path = os.path.join(out_dir, "charges.csv")
        _write_csv(path, CHARGE_FIELDS, rows)
        written.append(path)
        payload["results"]["charges"] = {
            lb: {"limit": q.limit, "exponent": q.exponent, "status": q.status,
                 "tail_variation": q.tail_variation, "bandlimit": q.bandlimit,
                 "radii": q.radii, "values": q.values}
            for lb, q in results["charges"].items()}
    if "center" in results:
        payload["results"]["center"] = results["center"]
    if "leaves" in results:
        path = os.path.join(out_dir, "leaves.csv")
        _write_csv(path, LEAF_FIELDS, [lf.row() for lf in results["leaves"]])
        written.append(path)
        payload["results"]["leaves"] = [lf.row() for lf in results["leaves"]]
        payload["results"]["center_limit"] = results.get("center_limit")
    if "evolution" in results:
        rep = results["evolution"]
        path = os.path.join(out_dir, "evolution.csv")
        _write_csv(path, EVOLUTION_FIELDS, [r.as_dict() for r in rep.rows])
        written.append(path)
        payload["results"]["evolution"] = {"rows": [r.as_dict() for r in rep.rows],
                                           "hypotheses": rep.hypotheses,
                                           "annotations": rep.annotations}
    path = os.path.join(out_dir, "report.json")
    _write_json(path, to_jsonable(payload))
    written.append(path)
    return written


def write_error(out_dir, exc, exit_code):
    """Machine-readable error record; returns it as a dict (and writes error.json if possible)."""
    record = {"schema_version": SCHEMA_VERSION,
              "error": {"type": type(exc).__name__, "message": str(exc), "exit_code": exit_code}}
    if out_dir:
        try:
            os.makedirs(out_dir, exist_ok=True)
            _write_json(os.path.join(out_dir, "error.json"), record)
        except (OSError, ReportError):
            pass
    return record
