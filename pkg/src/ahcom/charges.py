"""Killing initial data of AdS, global charges and the quantities built from them.

KID labels: ``"T"`` (lapse cosh r), ``"B1".."Bn"`` (lapse xhat^i sinh r),
``"C1".."Cn"`` (shift, boost-type) and ``"O12"``, ``"O13"``, ... (rotation
shift, i < j).  The shifts are taken from the Poincare ball formulas and
pushed to chart coordinates, independently of the lapse functions.

Charges are evaluated on coordinate spheres {r = R} of a radius ladder
and extrapolated to R = infinity by polynomial interpolation in e^{-R}.
"""

from __future__ import annotations

import math
import re
import warnings
from dataclasses import dataclass, field

import numpy as np

from . import background as bg
from .minkowski import NotFutureTimelikeError, eta_inner, unembed
from .models import complex_step
from .sphere import build_grid, integrate

__all__ = [
    "Kid",
    "kid",
    "kid_labels",
    "ball_to_chart",
    "charge_density",
    "Charge",
    "evaluate_charge",
    "extrapolate",
    "DEFAULT_LADDER",
    "DEFAULT_BANDLIMIT",
    "dimensional_multiple",
    "calibrate_dimensional_multiple",
    "mass_vector",
    "center_of_mass",
    "balanced_check",
    "MassData",
    "momenta",
    "IntegrabilityWarning",
    "ChargeConvergenceError",
]

DEFAULT_LADDER = (4.0, 5.0, 6.0, 7.0, 8.0)
DEFAULT_BANDLIMIT = 16
CONVERGENCE_TOL = 1e-6


class IntegrabilityWarning(UserWarning):
    pass


class ChargeConvergenceError(ValueError):
    pass


# -- KIDs -------------------------------------------------------------------------

def ball_to_chart(y):
    """Chart point x = r(|y|) * y/|y| with r = arccosh((1+|y|^2)/(1-|y|^2))."""
    y = np.asarray(y)
    rho = np.sqrt(np.sum(y * y, axis=-1))
    r = np.arccosh((1 + rho ** 2) / (1 - rho ** 2))
    return (r / rho)[..., None] * y


def chart_to_ball(x):
    x = np.asarray(x)
    r = np.sqrt(np.sum(x * x, axis=-1))
    return (np.tanh(r / 2) / r)[..., None] * x


def _ball_jacobian(y):
    """dx/dy for the ball -> chart map."""
    rho = np.sqrt(np.sum(y * y, axis=-1))[..., None, None]
    yh = y[..., :, None] / rho
    r = 2 * np.arctanh(rho)
    P = yh * np.swapaxes(yh, -1, -2)
    return 2.0 / (1 - rho ** 2) * P + (r / rho) * (np.eye(y.shape[-1]) - P)


def _ball_shift_c(i, y):
    """C_(i) = -(1+|y|^2)/2 d_{y^i} + y^i y^j d_{y^j} in ball components."""
    n = y.shape[-1]
    rho2 = np.sum(y * y, axis=-1)
    v = y[..., i:i + 1] * y
    return v - 0.5 * (1 + rho2)[..., None] * np.eye(n)[i]


@dataclass(frozen=True)
class Kid:
    """Lapse/shift pair (V, Y) on H^n in chart coordinates."""

    label: str
    n: int

    @property
    def kind(self):
        return self.label[0]

    @property
    def indices(self):
        return tuple(int(c) - 1 for c in self.label[1:])

    def lapse(self, x):
        x = np.asarray(x)
        r = bg.radius(x)
        if self.kind == "T":
            return np.cosh(r)
        if self.kind == "B":
            (i,) = self.indices
            return x[..., i] * np.sinh(r) / r
        return np.zeros(x.shape[:-1], dtype=x.dtype)

    def dlapse(self, x):
        """Gradient dV as a covector, analytic (complex-safe)."""
        x = np.asarray(x)
        r = bg.radius(x)[..., None]
        xh = x / r
        if self.kind == "T":
            return np.sinh(r) * xh
        if self.kind == "B":
            (i,) = self.indices
            e = np.eye(self.n)[i]
            return (np.sinh(r) / r) * e + x[..., i:i + 1] * xh * (np.cosh(r) / r - np.sinh(r) / r ** 2)
        return np.zeros_like(x)

    def shift(self, x):
        """Shift vector Y in chart components."""
        x = np.asarray(x)
        if self.kind == "C":
            (i,) = self.indices
            y = chart_to_ball(x)
            return np.einsum("...ab,...b->...a", _ball_jacobian(y), _ball_shift_c(i, y))
        if self.kind == "O":
            i, j = self.indices
            out = np.zeros(x.shape, dtype=x.dtype)
            out[..., j] = x[..., i]
            out[..., i] = -x[..., j]
            return out
        return np.zeros(x.shape, dtype=x.dtype)

    def dshift(self, x):
        """d_k Y^a with k first, by complex step."""
        return complex_step(self.shift, x)

    @property
    def has_lapse(self):
        return self.kind in "TB"

    @property
    def has_shift(self):
        return self.kind in "CO"


def kid_labels(n, kinds="TBCO"):
    labels = []
    if "T" in kinds:
        labels.append("T")
    for k in "BC":
        if k in kinds:
            labels += [f"{k}{i}" for i in range(1, n + 1)]
    if "O" in kinds:
        labels += [f"O{i}{j}" for i in range(1, n + 1) for j in range(i + 1, n + 1)]
    return labels


def kid(label, n=3):
    if label not in kid_labels(n) or not re.fullmatch(r"T|[BC]\d|O\d\d", label):
        raise ValueError(f"invalid KID label {label!r} for n = {n}")
    return Kid(label, n)


# -- charge density -----------------------------------------------------------------

def charge_density(data, k, x):
    """The 1-form U_(V,Y)(gamma, kappa) at chart points x, shape (..., n).

    U = V (div gamma - d tr gamma) - gamma(grad V, .) + tr gamma dV
        + 2 (kappa(Y, .) - tr kappa Y_flat), all with respect to b.
    """
    x = np.asarray(x, dtype=float)
    binv = bg.inverse_metric(x)
    out = np.zeros_like(x)
    if k.has_lapse:
        G = bg.christoffel(x)
        gam = data.gamma(x)
        dgam = data.dgamma(x)
        V = k.lapse(x)
        dV = k.dlapse(x)
        nab = bg.covariant_derivative(gam, dgam, G)
        div = np.einsum("...ik,...kij->...j", binv, nab)
        dtr = np.einsum("...ij,...kij->...k", binv, nab)
        tr = bg.trace(gam, binv)
        gradV = bg.raise_index(dV, binv)
        out = out + (V[..., None] * (div - dtr) - np.einsum("...i,...ij->...j", gradV, gam)
                     + tr[..., None] * dV)
    if k.has_shift and not data.riemannian:
        kap = data.kappa(x)
        Y = k.shift(x)
        b = bg.metric(x)
        out = out + 2.0 * (np.einsum("...i,...ij->...j", Y, kap)
                           - bg.trace(kap, binv)[..., None] * np.einsum("...ij,...j->...i", b, Y))
    return out


def sphere_flux(data, k, R, grid):
    """int_{r=R} U(nu_b) dmu_b on the coordinate sphere of radius R."""
    xh = grid.nodes
    U = charge_density(data, k, R * xh)
    flux = np.einsum("...i,...i->...", U, xh)
    return float(np.sinh(R) ** (data.n - 1) * integrate(grid, flux))


# -- extrapolation -------------------------------------------------------------------

def extrapolate(radii, values):
    """Value at R = infinity of the interpolating polynomial in e^{-R}."""
    s = np.exp(-np.asarray(radii, dtype=float))
    v = np.array(values, dtype=float)
    # Neville's scheme evaluated at s = 0
    p = v.copy()
    m = len(s)
    for level in range(1, m):
        for i in range(m - level):
            j = i + level
            p[i] = (s[j] * p[i] - s[i] * p[i + 1]) / (s[j] - s[i])
    return float(p[0])


def _fit_exponent(radii, values, limit):
    d = np.abs(np.asarray(values) - limit)
    scale = max(abs(limit), np.max(np.abs(values)), 1e-300)
    mask = d > 1e-12 * scale
    if mask.sum() < 2:
        return math.inf
    slope = np.polyfit(np.asarray(radii)[mask], np.log(d[mask]), 1)[0]
    return float(-slope)


@dataclass
class Charge:
    """A global charge: ladder values, extrapolated limit and status."""

    label: str
    radii: list
    values: list
    limit: float | None
    exponent: float
    status: str
    tail_variation: float = 0.0
    bandlimit: int = DEFAULT_BANDLIMIT

    @property
    def converged(self):
        return self.status == "converged"

    def rows(self):
        for R, Q in zip(self.radii, self.values):
            yield {"label": self.label, "R": R, "Q": Q, "Q_limit": self.limit,
                   "exponent": self.exponent, "status": self.status}


def _analyse(label, radii, values, tol, bandlimit):
    full = extrapolate(radii, values)
    tails = [extrapolate(radii[j:], values[j:]) for j in (1, 2) if len(radii) - j >= 2]
    variation = max((abs(t - full) for t in tails), default=0.0)
    scale = max(abs(full), 1.0)
    ok = np.isfinite(full) and variation <= tol * scale
    return Charge(label, list(radii), list(values), full if ok else None,
                  _fit_exponent(radii, values, full), "converged" if ok else "diverged",
                  variation, bandlimit)


def evaluate_charge(data, k, ladder=DEFAULT_LADDER, bandlimit=DEFAULT_BANDLIMIT,
                    tol=CONVERGENCE_TOL, flux=None):
    """Q_(V,Y) on the ladder with extrapolation; retries once at 2L."""
    if isinstance(k, str):
        k = kid(k, data.n)
    radii = [float(R) for R in ladder]
    if len(radii) < 4 or np.any(np.diff(radii) <= 0):
        raise ValueError("ladder must be increasing with at least 4 radii")
    flux = flux or sphere_flux
    for L in (bandlimit, 2 * bandlimit):
        grid = build_grid(data.n - 1, L)
        values = [flux(data, k, R, grid) for R in radii]
        charge = _analyse(k.label, radii, values, tol, L)
        if charge.converged:
            break
    return charge


# -- mass vector --------------------------------------------------------------------

def dimensional_multiple(n):
    """Factor d_n with (Q_T, Q_B1, ..., Q_Bn) = d_n * P_moments.

    For gamma = sinh^2 r m e^{-nr} the T-flux through {r=R} is
    sinh^{n-1} R e^{-nR} (cosh R (n - coth R) + sinh R) int tr m, whose
    limit is n / 2^n int tr m; the B_i fluxes carry the same factor.
    The value is re-derived numerically by
    :func:`calibrate_dimensional_multiple`.
    """
    return n / 2.0 ** n


def calibrate_dimensional_multiple(n=3, ladder=DEFAULT_LADDER, bandlimit=8):
    """Ratio Q_T / P^0 on the perturbed family with constant mass aspect."""
    from .models import model_perturbed
    data = model_perturbed(n, mass_aspect="2")
    q = evaluate_charge(data, kid("T", n), ladder, bandlimit)
    return q.limit / mass_vector(data, path="moments")[0]


def mass_vector(data, path="auto", ladder=DEFAULT_LADDER, bandlimit=DEFAULT_BANDLIMIT):
    """Mass vector P in R^{n,1}.

    ``path="moments"`` integrates (1, xhat) tr_sigma m; ``path="charges"``
    uses (Q_T, Q_B1, ...) / d_n.  ``"auto"`` prefers the stored mass aspect.
    """
    n = data.n
    if path == "auto":
        path = "moments" if data.mass_tensor is not None else "charges"
    if path == "moments":
        if data.mass_tensor is None:
            raise ValueError(f"{data.label}: no mass aspect stored; use path='charges'")
        grid = build_grid(n - 1, bandlimit)
        t = data.mass_aspect(grid.nodes)
        return np.concatenate([[integrate(grid, t)], integrate(grid, t[:, None] * grid.nodes)])
    if path == "charges":
        labels = ["T"] + [f"B{i}" for i in range(1, n + 1)]
        qs = [evaluate_charge(data, kid(lb, n), ladder, bandlimit) for lb in labels]
        bad = [q.label for q in qs if not q.converged]
        if bad:
            raise ChargeConvergenceError(f"{data.label}: charges {bad} did not converge")
        return np.array([q.limit for q in qs]) / dimensional_multiple(n)
    raise ValueError(f"unknown mass vector path {path!r}")


def center_of_mass(data, path="auto", P=None, **kwargs):
    """z = I^{-1}(P / sqrt(-eta(P, P)))."""
    if P is None:
        P = mass_vector(data, path, **kwargs)
    try:
        return unembed(P)
    except NotFutureTimelikeError as exc:
        raise NotFutureTimelikeError(
            f"mass vector not future timelike: {np.asarray(P).tolist()}") from exc


def balanced_check(data, tol=1e-10, path="auto", **kwargs):
    """The moments int xhat^i tr_sigma m and whether all vanish within ``tol``."""
    P = mass_vector(data, path, **kwargs)
    moments = P[1:]
    return moments, bool(np.all(np.abs(moments) <= tol * max(1.0, abs(P[0]))))


# -- physical quantities -------------------------------------------------------------

@dataclass
class MassData:
    P: np.ndarray
    mass: float | None
    center: object | None
    linear_momentum: np.ndarray
    angular_momentum: dict
    charges: dict = field(default_factory=dict)
    positive_aspect: bool | None = None

    @property
    def timelike(self):
        return bool(eta_inner(self.P, self.P) < 0 and self.P[0] > 0)


def momenta(data, ladder=DEFAULT_LADDER, bandlimit=DEFAULT_BANDLIMIT, tol=CONVERGENCE_TOL):
    """All charges assembled into :class:`MassData`.

    P is reported in the moment normalisation (charges divided by d_n);
    linear and angular momenta are the raw charges Q_(0,C_i), Q_(0,O_ij).
    """
    n = data.n
    charges = {lb: evaluate_charge(data, kid(lb, n), ladder, bandlimit, tol)
               for lb in kid_labels(n)}
    diverged = [lb for lb, q in charges.items() if not q.converged]
    if diverged:
        warnings.warn(f"{data.label}: charges {diverged} did not converge",
                      IntegrabilityWarning, stacklevel=2)

    def lim(lb):
        q = charges[lb]
        return q.limit if q.converged else math.nan

    P = np.array([lim("T")] + [lim(f"B{i}") for i in range(1, n + 1)]) / dimensional_multiple(n)
    positive = None
    if data.mass_tensor is not None:
        grid = build_grid(n - 1, bandlimit)
        positive = bool(np.all(data.mass_aspect(grid.nodes) > 0))
    mass = center = None
    q = eta_inner(P, P)
    if np.all(np.isfinite(P)) and q < 0 and P[0] > 0:
        mass = float(np.sqrt(-q))
        center = unembed(P)
    elif positive:
        warnings.warn(f"{data.label}: positive mass aspect but P is not future timelike "
                      "(numerical failure)", IntegrabilityWarning, stacklevel=2)
    return MassData(P=P, mass=mass, center=center,
                    linear_momentum=np.array([lim(f"C{i}") for i in range(1, n + 1)]),
                    angular_momentum={lb: lim(lb) for lb in kid_labels(n, "O")},
                    charges=charges, positive_aspect=positive)
