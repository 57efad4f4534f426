"""Model construction from a configuration and the four batch pipelines.

Each ``run_*`` function returns a plain dict of results; :mod:`ahcom.report`
turns those into files.  Every number in a report comes from one of the
library calls made here with the knobs from the configuration.
"""

from __future__ import annotations

import math

import numpy as np

from . import charges, cmc, evolution, models
from .minkowski import HyperbolicIsometry, HyperbolicPoint, NotFutureTimelikeError, boost

__all__ = ["build_model", "run_charges", "run_center", "run_cmc", "run_evolve", "run_pipeline",
           "PIPELINE_ORDER"]

PIPELINE_ORDER = ("charges", "center", "cmc", "evolve")


def _kappa_kwargs(cfg):
    kind = cfg["kappa"]
    kw = {"amplitude": cfg["kappa_amplitude"]}
    if kind in ("scalar_l1", "momentum", "profile"):
        kw["direction"] = tuple(cfg["kappa_direction"])
    if kind == "scalar_l1":
        kw["order"] = cfg["kappa_order"]
    if kind == "rotation":
        i, j = (int(p) - 1 for p in cfg["kappa_plane"])
        kw["plane"] = (i, j)
    return kw


def build_model(cfg, boosted=True):
    """ChartData described by ``cfg``; ``boosted=False`` skips the chart boost."""
    n, kind = cfg["n"], cfg["model"]
    if kind == "hyperbolic":
        data = models.model_hyperbolic(n)
    elif kind == "kottler":
        data = models.model_kottler(n, cfg["mass"], r_min=cfg["r_min"])
    else:
        data = models.model_perturbed(n, cfg["mass_aspect"], remainder=cfg["remainder"],
                                      r_min=cfg["r_min"])
    if cfg["kappa"] != "none":
        data = models.model_with_k(data, cfg["kappa"], strict=cfg["strict_decay"],
                                   **_kappa_kwargs(cfg))
    else:
        models.decay_ladder(data, strict=cfg["strict_decay"])
    if boosted and cfg["boost_rapidity"] != 0.0:
        data = models.model_boosted(data, boost_matrix(cfg))
    return data


def boost_matrix(cfg):
    return boost(cfg["boost_rapidity"], cfg["boost_axis"], cfg["n"])


def run_charges(cfg, data):
    n = data.n
    out = {}
    for label in charges.kid_labels(n):
        out[label] = charges.evaluate_charge(data, charges.kid(label, n), cfg["ladder"],
                                             cfg["bandlimit"], cfg["charge_tol"])
    return {"charges": out}


def _center_from(P):
    try:
        return charges.center_of_mass(None, P=P)
    except NotFutureTimelikeError:
        return None


def run_center(cfg, data, required=True):
    """Mass vector along both paths, mass, center and the boosted-image check."""
    kw = {"ladder": cfg["ladder"], "bandlimit": cfg["bandlimit"]}
    P_charges = charges.mass_vector(data, "charges", **kw)
    P_moments = (charges.mass_vector(data, "moments", bandlimit=cfg["bandlimit"])
                 if data.mass_tensor is not None else None)
    P = P_moments if P_moments is not None else P_charges
    q = -(P[0] ** 2) + float(np.dot(P[1:], P[1:]))
    z = _center_from(P)
    if z is None and required:
        charges.center_of_mass(None, P=P)  # raises with the standard message
    result = {"P": P, "P_charges": P_charges, "P_moments": P_moments,
              "mass": math.sqrt(-q) if q < 0 and P[0] > 0 else None,
              "center": z, "boost_check": None}
    if cfg["boost_rapidity"] != 0.0 and z is not None:
        base = build_model(cfg, boosted=False)
        Pb = charges.mass_vector(base, "auto", **kw)
        zb = charges.center_of_mass(base, P=Pb)
        expected = HyperbolicIsometry(boost_matrix(cfg)).inverse()(zb.chart)
        exp_pt = HyperbolicPoint.from_chart(expected)
        dist = z.distance(exp_pt)
        result["boost_check"] = {"expected": exp_pt, "distance": dist,
                                 "tolerance": cfg["boost_check_tol"],
                                 "status": "pass" if dist < cfg["boost_check_tol"] else "fail"}
    return result


def run_cmc(cfg, data):
    leaves = cmc.foliate(data, cfg["schedule"], cfg["bandlimit"], cfg["cmc_tol"])
    limit = cmc.center_limit(leaves, tol=cfg["center_tol"]) if len(leaves) >= 3 else None
    return {"leaves": leaves, "center_limit": limit}


def run_evolve(cfg, data):
    return {"evolution": evolution.verify_evolution(data, cfg["evolution_ladder"],
                                                    cfg["bandlimit"])}


def run_pipeline(cfg, data=None):
    """Run the configured pipeline(s); returns (data, merged results)."""
    if data is None:
        data = build_model(cfg)
    which = PIPELINE_ORDER if cfg["pipeline"] == "all" else (cfg["pipeline"],)
    results = {}
    for name in which:
        if name == "charges":
            results.update(run_charges(cfg, data))
        elif name == "center":
            results["center"] = run_center(cfg, data, required=cfg["pipeline"] == "center")
        elif name == "cmc":
            results.update(run_cmc(cfg, data))
        else:
            results.update(run_evolve(cfg, data))
    return data, results
