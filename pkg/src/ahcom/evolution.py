"""First-order evolution of the charges at t = 0.

With lapse N = V_(0) = cosh r and zero shift the metric moves by
g_dot = 2 cosh(r) kappa.  The rate of a lapse-type charge is the flux of
the lapse part of U evaluated on g_dot, which is linear in its argument.
Expanding that density with the KID identity
V_(i) grad V_(0) - V_(0) grad V_(i) = C_(i) gives

    dU_{B_i}/dt = U_(0, C_i) + 2 V_(0) V_(i) J_b,

with J_b = div_b kappa - d tr_b kappa.  Replacing J_b by the momentum
constraint J_g of the actual metric leaves the residual
2 V_(0) V_(i) (J_b - J_g), which is quadratic in (gamma, kappa).
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field, replace

import numpy as np

from . import background as bg
from .charges import (DEFAULT_BANDLIMIT, Charge, charge_density,
                      evaluate_charge, kid)
from .models import DecayWarning

__all__ = [
    "FD_STEP",
    "RATE_TOL",
    "EVOLUTION_LADDER",
    "metric_rate",
    "charge_rate",
    "fd_charge_rate",
    "momentum_constraint",
    "residual_density_decay",
    "hypothesis_ladder",
    "EvolutionRow",
    "EvolutionReport",
    "verify_evolution",
]

FD_STEP = 1e-5
RATE_TOL = 1e-6
# the finite-difference rate check loses eps * (sinh r / r)^4 / t per rung,
# which the default charge ladder pushes past 1e-7 at R = 8
EVOLUTION_LADDER = (3.0, 4.0, 5.0, 6.0, 7.0)
RESIDUAL_LADDER = (3.0, 4.0, 5.0, 6.0, 7.0, 8.0)
# roundoff of chart-component densities grows like eps * (sinh r / r)^4
NOISE_FACTOR = 8.0


def metric_rate(data):
    """g_dot = 2 cosh(r) kappa, packaged as ChartData (gamma slot, no kappa).

    The result supports ``gamma``/``dgamma`` like any data set, so the
    charge machinery applies to it unchanged.
    """
    if data.kappa_fn is None:
        raise ValueError(f"{data.label}: no second fundamental form, metric rate undefined")
    kap = data.kappa_fn

    def gdot(x):
        return 2.0 * np.cosh(bg.radius(x))[..., None, None] * kap(x)

    return replace(data, gamma_fn=gdot, kappa_fn=None, mass_tensor=None,
                   label=f"rate({data.label})")


def charge_rate(data, label, ladder=EVOLUTION_LADDER, bandlimit=DEFAULT_BANDLIMIT):
    """d/dt Q_(V,0) at t = 0 for a lapse label (T or B_i)."""
    k = kid(label, data.n)
    if not k.has_lapse:
        raise ValueError(f"charge rate is defined for lapse KIDs only, got {label!r}")
    if data.kappa_fn is None:
        # kappa = 0: nothing moves
        radii = [float(R) for R in ladder]
        return Charge(label, radii, [0.0] * len(radii), 0.0, math.inf, "converged",
                      0.0, bandlimit)
    return evaluate_charge(metric_rate(data), k, ladder, bandlimit)


def fd_charge_rate(data, label, ladder=EVOLUTION_LADDER, bandlimit=DEFAULT_BANDLIMIT, t=FD_STEP):
    """(Q[gamma + t g_dot] - Q[gamma - t g_dot]) / 2t, extrapolated like any charge."""
    k = kid(label, data.n)
    if data.kappa_fn is None:
        return 0.0
    rate = metric_rate(data).gamma_fn
    base = data.gamma_fn

    def shifted(sign):
        return replace(data, gamma_fn=lambda x: base(x) + sign * t * rate(x), kappa_fn=None)

    plus = evaluate_charge(shifted(1.0), k, ladder, bandlimit)
    minus = evaluate_charge(shifted(-1.0), k, ladder, bandlimit)
    if plus.limit is None or minus.limit is None:
        return math.nan
    return (plus.limit - minus.limit) / (2.0 * t)


def momentum_constraint(data, x, metric="g"):
    """J = div kappa - d tr kappa with respect to g (default) or b."""
    x = np.asarray(x, dtype=float)
    kap = data.kappa(x)
    dkap = data.dkappa(x)
    if metric == "b":
        ginv = bg.inverse_metric(x)
        dg = bg.metric_derivative(x)
    else:
        ginv = np.linalg.inv(bg.metric(x) + data.gamma(x))
        dg = bg.metric_derivative(x) + data.dgamma(x)
    G = bg.christoffel_from(ginv, dg)
    nab = bg.covariant_derivative(kap, dkap, G)
    return (np.einsum("...ik,...kij->...j", ginv, nab)
            - np.einsum("...ij,...kij->...k", ginv, nab))


def _sphere_sample(n, R, npts=96, seed=11):
    rng = np.random.default_rng(seed)
    u = rng.normal(size=(npts, n))
    u /= np.linalg.norm(u, axis=1, keepdims=True)
    return R * u


def _bnorm(v, binv):
    return np.sqrt(np.einsum("...i,...ij,...j->...", v, binv, v))


def residual_density_decay(data, label, radii=RESIDUAL_LADDER, noise=NOISE_FACTOR):
    """Sup over sampled spheres of |dU_{B_i}/dt - U_(0,C_i) - 2 V0 V_i J_g|_b.

    Returns (radii, sups, floors, exponent).  A rung counts only when its
    sup exceeds ``noise * eps`` times the size of the cancelling terms;
    the exponent is the negated slope of log(sup) over counted rungs, and
    inf when fewer than two remain (residual identically zero at roundoff).
    """
    k = kid(label, data.n)
    (i,) = k.indices
    c = kid(f"C{i + 1}", data.n)
    t = kid("T", data.n)
    rate = metric_rate(data)
    sups, floors = [], []
    for R in radii:
        x = _sphere_sample(data.n, R)
        binv = bg.inverse_metric(x)
        terms = [charge_density(rate, k, x), charge_density(data, c, x),
                 2.0 * (t.lapse(x) * k.lapse(x))[..., None] * momentum_constraint(data, x)]
        res = terms[0] - terms[1] - terms[2]
        sups.append(float(_bnorm(res, binv).max()))
        scale = max(float(_bnorm(v, binv).max()) for v in terms)
        floors.append(noise * np.finfo(float).eps * scale * (np.sinh(R) / R) ** 4)
    sups = np.asarray(sups)
    mask = sups > np.asarray(floors)
    if mask.sum() < 2:
        return list(radii), sups.tolist(), floors, math.inf
    slope = np.polyfit(np.asarray(radii, dtype=float)[mask], np.log(sups[mask]), 1)[0]
    return list(radii), sups.tolist(), floors, float(-slope)


def hypothesis_ladder(data, radii=RESIDUAL_LADDER, eps=0.25):
    """Check tau > n/2 and, on sampled spheres, kappa = O(e^{-(tau+1)r}) and
    J_g = O(e^{-(n+1+eps)r}).

    Returns a dict with the scaled sups and an ``ok`` flag per quantity; a
    quantity passes when its scaled sup does not grow by more than 2x
    along the ladder.  The energy constraint needs curvature by finite
    differences and is left to :func:`ahcom.models.constraint_densities`.
    """
    n = data.n
    eps = float(eps)
    out = {"radius": list(radii), "kappa": [], "J": []}
    zero = []
    for R in radii:
        x = _sphere_sample(n, R)
        binv = bg.inverse_metric(x)
        kap_sup = float(np.sqrt(bg.norm2(data.kappa(x), binv)).max())
        J = momentum_constraint(data, x) if data.kappa_fn is not None else np.zeros_like(x)
        J_sup = float(_bnorm(J, binv).max())
        out["kappa"].append(math.exp((data.tau + 1) * R) * kap_sup)
        out["J"].append(math.exp((n + 1 + eps) * R) * J_sup)
        # J below the roundoff floor of its own evaluation counts as zero
        zero.append(J_sup <= NOISE_FACTOR * np.finfo(float).eps * kap_sup * (np.sinh(R) / R) ** 4)
    scaled = {"kappa": np.asarray(out["kappa"]),
              "J": np.where(zero, 0.0, out["J"])}
    for key, v in scaled.items():
        out[f"{key}_ok"] = bool(np.all(v[1:] <= 2.0 * v[:-1]) or np.all(v[1:] == 0))
    out["tau_ok"] = bool(data.tau > n / 2)
    out["ok"] = out["kappa_ok"] and out["J_ok"] and out["tau_ok"]
    return out


@dataclass
class EvolutionRow:
    label: str
    rate: float
    fd_rate: float
    target: float
    abs_dev: float
    rel_dev: float
    residual_exponent: float
    hypotheses_ok: bool

    def as_dict(self):
        return {"label": self.label, "rate": self.rate, "fd_rate": self.fd_rate,
                "target": self.target, "abs_dev": self.abs_dev, "rel_dev": self.rel_dev,
                "residual_exponent": self.residual_exponent,
                "hypotheses_ok": self.hypotheses_ok}


@dataclass
class EvolutionReport:
    label: str
    tau: float
    rows: list
    hypotheses: dict = field(default_factory=dict)
    annotations: list = field(default_factory=list)

    def row(self, label):
        return next(r for r in self.rows if r.label == label)

    @property
    def max_deviation(self):
        return max(r.abs_dev for r in self.rows)


def _limit(charge):
    return charge.limit if charge.limit is not None else math.nan


def verify_evolution(data, ladder=EVOLUTION_LADDER, bandlimit=DEFAULT_BANDLIMIT,
                     residual_radii=RESIDUAL_LADDER):
    """Compare d/dt Q_{B_i} with Q_(0,C_i) and report d/dt Q_T.

    The T row has target 0.  Hypothesis failures are annotated, the
    computation still runs.
    """
    n = data.n
    hyp = hypothesis_ladder(data, residual_radii)
    notes = []
    if not hyp["ok"]:
        bad = [k for k in ("tau", "kappa", "J") if not hyp[f"{k}_ok"]]
        notes.append(f"decay hypotheses not met on the ladder: {bad}")
        warnings.warn(f"{data.label}: {notes[-1]}", DecayWarning, stacklevel=2)
    rows = []
    for label in ["T"] + [f"B{i}" for i in range(1, n + 1)]:
        rate = _limit(charge_rate(data, label, ladder, bandlimit))
        fd = fd_charge_rate(data, label, ladder, bandlimit)
        if label == "T":
            target, expo = 0.0, math.nan
        else:
            c = evaluate_charge(data, kid("C" + label[1:], n), ladder, bandlimit)
            target = _limit(c)
            expo = (residual_density_decay(data, label, residual_radii)[3]
                    if data.kappa_fn is not None else math.inf)
        dev = abs(rate - target)
        rows.append(EvolutionRow(label, rate, fd, target, dev,
                                 dev / max(abs(target), 1e-300) if target else dev,
                                 expo, hyp["ok"]))
    return EvolutionReport(data.label, data.tau, rows, hyp, notes)
