"""Asymptotically hyperbolic data sets (g, k) in a chart at infinity.

A :class:`ChartData` stores gamma = g - b and kappa = k as closed-form,
complex-safe functions of chart coordinates x = r * xhat.  First
derivatives are obtained by complex-step differentiation, which is exact
to roundoff; second derivatives (curvature diagnostics only) use central
differences of those.

Tensors on S^{n-1} (mass aspect, profiles) are given by their ambient
components: a symmetric n x n matrix M(xhat) with M xhat = 0.  On the
unit sphere sigma is the tangential projector P = I - xhat xhat^T, so
tr_sigma M = trace(M), and the corresponding chart tensor at radius r is
P M P / r^2.
"""

from __future__ import annotations

import ast
import logging
import operator
import warnings
from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np
from numpy.polynomial import chebyshev
from scipy.integrate import solve_ivp

from . import background as bg
from .minkowski import HyperbolicIsometry, boost_sphere_action

__all__ = [
    "DomainError",
    "DecayWarning",
    "DecayError",
    "ChartData",
    "SpherePolynomial",
    "model_hyperbolic",
    "KottlerProfile",
    "model_kottler",
    "kottler_mass_aspect_constant",
    "model_boosted",
    "model_perturbed",
    "model_with_k",
    "scalar_l1_kappa",
    "rotation_kappa",
    "momentum_kappa",
    "profile_kappa",
    "decay_ladder",
    "constraint_densities",
    "constraint_densities_at",
]

log = logging.getLogger(__name__)

CSTEP = 1e-30
FD_STEP = 1e-3


class DomainError(ValueError):
    """Evaluation point lies outside the region where the data is defined."""


class DecayWarning(UserWarning):
    pass


class DecayError(ValueError):
    pass


def _zeros_like_tensor(x):
    return np.zeros(x.shape + (x.shape[-1],), dtype=np.result_type(x, float))


def _xhat_projector(x):
    r = bg.radius(x)
    xh = x / r[..., None]
    P = np.eye(x.shape[-1]) - xh[..., :, None] * xh[..., None, :]
    return r, xh, P


def sphere_tensor_to_chart(M, x):
    """Chart components of the sphere tensor with ambient matrix M at x."""
    r, _, P = _xhat_projector(x)
    return P @ M @ P / (r * r)[..., None, None]


def complex_step(fn, x):
    """Derivatives d_k fn(x) stacked at axis -3 (for tensor-valued fn)."""
    x = np.asarray(x, dtype=float)
    n = x.shape[-1]
    xc = x[None, ...] + 1j * CSTEP * np.eye(n).reshape((n,) + (1,) * (x.ndim - 1) + (n,))
    vals = fn(xc).imag / CSTEP
    return np.moveaxis(vals, 0, x.ndim - 1)


@dataclass(frozen=True)
class ChartData:
    """Initial data in a chart: gamma = g - b and kappa with decay order tau.

    ``gamma_fn`` and ``kappa_fn`` map chart points (..., n) to symmetric
    (..., n, n) arrays and must accept complex input.  ``mass_tensor``
    maps unit vectors to ambient mass-aspect matrices.
    """

    n: int
    tau: float
    gamma_fn: Callable
    kappa_fn: Callable | None = None
    mass_tensor: Callable | None = None
    r_min: float = 0.5
    label: str = "data"
    params: dict = field(default_factory=dict)

    @property
    def riemannian(self):
        return self.kappa_fn is None

    def check_domain(self, x):
        r = bg.radius(np.asarray(x).real)
        if np.any(r < self.r_min):
            raise DomainError(
                f"{self.label}: point at r = {float(np.min(r)):.4g} is inside the "
                f"data domain boundary r_min = {self.r_min}")

    def gamma(self, x):
        self.check_domain(x)
        return self.gamma_fn(np.asarray(x, dtype=float)).real

    def dgamma(self, x):
        self.check_domain(x)
        return complex_step(self.gamma_fn, x)

    def kappa(self, x):
        self.check_domain(x)
        if self.kappa_fn is None:
            return _zeros_like_tensor(np.asarray(x, dtype=float))
        return self.kappa_fn(np.asarray(x, dtype=float)).real

    def dkappa(self, x):
        self.check_domain(x)
        if self.kappa_fn is None:
            x = np.asarray(x, dtype=float)
            return np.zeros(x.shape + (x.shape[-1], x.shape[-1]))
        return complex_step(self.kappa_fn, x)

    def metric(self, x):
        g = bg.metric(np.asarray(x, dtype=float)) + self.gamma(x)
        w = np.linalg.eigvalsh(g)
        if np.any(w <= 0):
            raise DomainError(f"{self.label}: metric is not positive definite")
        return g

    def mass_aspect(self, xhat):
        """tr_sigma m at unit vectors, or None if no exact aspect is stored."""
        if self.mass_tensor is None:
            return None
        return np.trace(self.mass_tensor(np.asarray(xhat)), axis1=-2, axis2=-1).real


# -- polynomials on the sphere -------------------------------------------------

_BINOPS = {ast.Add: operator.add, ast.Sub: operator.sub, ast.Mult: operator.mul,
           ast.Div: operator.truediv, ast.Pow: operator.pow}


class SpherePolynomial:
    """Polynomial in xhat given as text, e.g. ``"2 + 0.5*x1 - x2*x3"``.

    Only numbers, x1..xn, + - * / and integer powers are accepted.
    """

    def __init__(self, text, n=3):
        self.text = str(text)
        self.n = n
        self._tree = ast.parse(self.text, mode="eval").body
        self._check(self._tree)

    def _check(self, node):
        if isinstance(node, ast.BinOp) and isinstance(node.op, ast.Pow):
            e = node.right
            if not (isinstance(e, ast.Constant) and type(e.value) is int and 0 <= e.value <= 32):
                raise ValueError(f"exponents must be small non-negative integers in {self.text!r}")
            self._check(node.left)
        elif isinstance(node, ast.BinOp) and type(node.op) in _BINOPS:
            self._check(node.left)
            self._check(node.right)
        elif isinstance(node, ast.UnaryOp) and isinstance(node.op, (ast.USub, ast.UAdd)):
            self._check(node.operand)
        elif isinstance(node, ast.Constant) and isinstance(node.value, (int, float)):
            pass
        elif isinstance(node, ast.Name) and node.id.startswith("x") and \
                node.id[1:].isdigit() and 1 <= int(node.id[1:]) <= self.n:
            pass
        else:
            raise ValueError(f"unsupported term in polynomial {self.text!r}")

    def _eval(self, node, xhat):
        if isinstance(node, ast.BinOp):
            return _BINOPS[type(node.op)](self._eval(node.left, xhat),
                                          self._eval(node.right, xhat))
        if isinstance(node, ast.UnaryOp):
            v = self._eval(node.operand, xhat)
            return -v if isinstance(node.op, ast.USub) else v
        if isinstance(node, ast.Constant):
            return node.value
        return xhat[..., int(node.id[1:]) - 1]

    def __call__(self, xhat):
        xhat = np.asarray(xhat)
        return self._eval(self._tree, xhat) + np.zeros(xhat.shape[:-1], dtype=xhat.dtype)

    def __repr__(self):
        return f"SpherePolynomial({self.text!r})"


def _as_poly(p, n):
    if p is None or callable(p):
        return p
    return SpherePolynomial(p, n)


def _trace_tensor(poly, n):
    """Ambient matrix (poly / (n-1)) * P, so that its sigma-trace is poly."""
    def tensor(xhat):
        P = np.eye(n) - xhat[..., :, None] * xhat[..., None, :]
        return poly(xhat)[..., None, None] * P / (n - 1)
    return tensor


def _tracefree_tensor(S, n):
    S = np.asarray(S, dtype=float)
    S = 0.5 * (S + S.T)

    def tensor(xhat):
        P = np.eye(n) - xhat[..., :, None] * xhat[..., None, :]
        T = P @ S @ P
        tr = np.trace(T, axis1=-2, axis2=-1)
        return T - tr[..., None, None] * P / (n - 1)
    return tensor


# -- model space ---------------------------------------------------------------

def model_hyperbolic(n=3, tau=None):
    """(H^n, b, 0)."""
    if n < 3:
        raise ValueError("dimension must be >= 3")
    n_ = n
    return ChartData(n=n, tau=float(tau or n), gamma_fn=_zeros_like_tensor,
                     mass_tensor=lambda xhat: np.zeros(xhat.shape + (n_,)),
                     r_min=1e-6, label="hyperbolic", params={"kind": "hyperbolic", "n": n})


# -- Kottler ---------------------------------------------------------------

def kottler_mass_aspect_constant(n):
    """c_n with tr_sigma m = c_n * m for the Kottler metric.

    From the asymptotic solution rho(r) - sinh r = (2^(n-1) m / n) e^{-(n-1) r}.
    """
    return (n - 1) * 2.0 ** (n + 1) / n


class KottlerProfile:
    """Radial chart change rho(r) for dr^2 = d rho^2 / (1 + rho^2 - 2m/rho^(n-2)).

    The deviation delta = rho - sinh r is stored as
    w(s) = delta * e^{(n-1) r}, s = e^{-r}, a Chebyshev interpolant on
    [0, e^{-r_min}] built from a DOP853 integration started deep in the
    asymptotic region (rho normalised so that delta -> 0).
    """

    def __init__(self, n, m, r_min=1.0, degree=48, r_top=45.0):
        self.n = n
        self.m = float(m)
        self.r_min = float(r_min)
        self.s_max = np.exp(-self.r_min)
        self.w_inf = self.m * 2.0 ** (n - 1) / n
        k = np.arange(degree)
        t = np.cos(np.pi * (k + 0.5) / degree)
        s = 0.5 * self.s_max * (t + 1.0)
        r_nodes = -np.log(s)
        order = np.argsort(-r_nodes)
        sol = solve_ivp(self._rhs, (r_top, self.r_min), [self.w_inf], method="DOP853",
                        t_eval=r_nodes[order], rtol=1e-13, atol=1e-16)
        if not sol.success:
            raise DomainError(f"Kottler chart change failed: {sol.message}")
        w = np.empty(degree)
        w[order] = sol.y[0]
        self.coef = chebyshev.chebfit(t, w, degree - 1)

    def _lapse2(self, r, delta):
        sh, ch = np.sinh(r), np.cosh(r)
        rho = sh + delta
        return ch * ch + delta * (2 * sh + delta) - 2 * self.m / rho ** (self.n - 2), rho

    def _rhs(self, r, y):
        n = self.n
        w = y[0]
        sh, ch = np.sinh(r), np.cosh(r)
        delta = w * np.exp(-(n - 1) * r)
        F, rho = self._lapse2(r, delta)
        if F <= 0:
            raise DomainError("Kottler chart change reached the horizon")
        num = delta * (2 * sh + delta) - 2 * self.m / rho ** (n - 2)
        ddelta = num / (np.sqrt(F) + ch)
        return [(ddelta + (n - 1) * delta) * np.exp((n - 1) * r)]

    def w(self, r):
        s = np.exp(-r)
        return chebyshev.chebval(2.0 * s / self.s_max - 1.0, self.coef)

    def delta(self, r):
        return self.w(r) * np.exp(-(self.n - 1) * r)

    def rho(self, r):
        return np.sinh(r) + self.delta(r)


def model_kottler(n=3, m=1.0, r_min=1.0):
    """Kottler (Schwarzschild-AdS) slice written as g = dr^2 + rho(r)^2 sigma."""
    if m <= 0:
        raise ValueError("Kottler mass parameter must be positive")
    prof = KottlerProfile(n, m, r_min=r_min)
    c = kottler_mass_aspect_constant(n) * m

    def gamma_fn(x):
        r = bg.radius(x)
        d = prof.delta(r)
        coef = d * (2 * np.sinh(r) + d)
        _, _, P = _xhat_projector(x)
        return coef[..., None, None] * P / (r * r)[..., None, None]

    mass = _trace_tensor(lambda xhat: np.full(xhat.shape[:-1], c), n)
    data = ChartData(n=n, tau=float(n), gamma_fn=gamma_fn, mass_tensor=mass, r_min=r_min,
                     label=f"kottler(m={m})",
                     params={"kind": "kottler", "n": n, "m": m, "r_min": r_min})
    object.__setattr__(data, "profile", prof)
    return data


# -- perturbed family ------------------------------------------------------------

def model_perturbed(n=3, mass_aspect="2", tracefree=None, remainder=0.0,
                    remainder_profile="1", r_min=1.0):
    """g = dr^2 + sinh^2 r (sigma + m e^{-nr} + remainder * R e^{-(n+1)r}).

    ``mass_aspect`` is tr_sigma m as a polynomial in xhat; ``tracefree``
    an optional symmetric n x n matrix S adding the trace-free part of
    P S P.  R is ``remainder_profile`` times sigma.
    """
    poly = _as_poly(mass_aspect, n)
    trace_part = _trace_tensor(poly, n)
    tf_part = _tracefree_tensor(tracefree, n) if tracefree is not None else None
    rem_poly = _as_poly(remainder_profile, n)
    rem_part = _trace_tensor(rem_poly, n)

    def mass(xhat):
        M = trace_part(xhat)
        if tf_part is not None:
            M = M + tf_part(xhat)
        return M

    def gamma_fn(x):
        r = bg.radius(x)
        xh = x / r[..., None]
        sh2 = np.sinh(r) ** 2
        M = mass(xh) * np.exp(-n * r)[..., None, None]
        if remainder:
            M = M + remainder * (n - 1) * rem_part(xh) * np.exp(-(n + 1) * r)[..., None, None]
        return sh2[..., None, None] * sphere_tensor_to_chart(M, x)

    def gamma_checked(x):
        return gamma_fn(x)

    data = ChartData(n=n, tau=float(n), gamma_fn=gamma_checked, mass_tensor=mass,
                     r_min=r_min, label=f"perturbed({poly!r})",
                     params={"kind": "perturbed", "n": n, "mass_aspect": getattr(poly, "text", None),
                             "tracefree": None if tracefree is None else np.asarray(tracefree).tolist(),
                             "remainder": remainder, "r_min": r_min})
    probe = _probe_points(n, r_min)
    if np.any(np.linalg.eigvalsh(bg.metric(probe) + gamma_fn(probe)) <= 0):
        raise DomainError("perturbed metric is indefinite at r_min")
    return data


def _probe_points(n, r):
    rng = np.random.default_rng(1234)
    u = rng.normal(size=(64, n))
    u /= np.linalg.norm(u, axis=1, keepdims=True)
    return r * u


# -- boosted charts ------------------------------------------------------------

def model_boosted(base, A):
    """Pullback of ``base`` under the hyperbolic isometry a = I^{-1} A I.

    The mass vector of the result is A^{-1} P(base) and its center of
    mass is a^{-1}(z(base)).  Boosting twice, first by A then by B, equals
    boosting once by A @ B.
    """
    iso = HyperbolicIsometry(A)
    n = base.n

    def pull(fn):
        def pulled(x):
            y = iso(x)
            rr = bg.radius(y.real)
            if np.any(rr < base.r_min):
                raise DomainError(
                    f"boosted point maps to r = {float(rr.min()):.4g} inside the base domain")
            J = iso.jacobian(x)
            return np.swapaxes(J, -1, -2) @ fn(y) @ J
        return pulled

    action = boost_sphere_action(A)
    mass = None
    if base.mass_tensor is not None:
        def mass(xhat):
            xhat = np.asarray(xhat)
            lam = 1.0 / action.factor(xhat)
            Ja = action.jacobian(xhat)
            P = np.eye(n) - xhat[..., :, None] * xhat[..., None, :]
            Jt = Ja @ P
            M = np.swapaxes(Jt, -1, -2) @ base.mass_tensor(action.map(xhat)) @ Jt
            return lam[..., None, None] ** (2 - n) * M

    r_min = base.r_min + float(np.arccosh(np.asarray(A)[0, 0]))
    return ChartData(n=n, tau=base.tau, gamma_fn=pull(base.gamma_fn),
                     kappa_fn=None if base.kappa_fn is None else pull(base.kappa_fn),
                     mass_tensor=mass, r_min=r_min, label=f"boosted({base.label})",
                     params={**base.params, "boost": np.asarray(A).tolist()})


# -- second fundamental forms ------------------------------------------------------

def scalar_l1_kappa(n=3, amplitude=1.0, direction=(1, 0, 0), order=None):
    """Exact solution of div_b k - d tr_b k = 0 in the l=1 scalar sector.

    With phi = a . xhat and any radial beta(r), the tensor
    (beta' + coth r beta) phi dr^2 + beta (dr dphi + dphi dr)
    + sinh r cosh r beta phi sigma is b-momentum-free; here
    beta = amplitude * e^{-order r} (default order n).
    """
    a = np.asarray(direction, dtype=float)
    a = a / np.linalg.norm(a)
    k = float(order if order is not None else n)

    def fn(x):
        r, xh, P = _xhat_projector(x)
        phi = xh @ a
        beta = amplitude * np.exp(-k * r)
        dbeta = -k * beta
        alpha = dbeta + beta / np.tanh(r)
        gam = np.sinh(r) * np.cosh(r) * beta
        Pa = P @ a
        ex = lambda v: v[..., None, None]
        return (ex(alpha * phi) * xh[..., :, None] * xh[..., None, :]
                + ex(beta / r) * (xh[..., :, None] * Pa[..., None, :] + Pa[..., :, None] * xh[..., None, :])
                + ex(gam * phi / r ** 2) * P)
    return fn, k - 1.0


def momentum_kappa(amplitude=1.0, direction=(1, 0, 0)):
    """n=3 l=1 mode K phi (sigma - dr^2 / sinh^2 r); carries linear momentum.

    It decays only like e^{-2r} and so lies outside the evolution theorem's
    hypotheses; it is exactly b-momentum-free.
    """
    a = np.asarray(direction, dtype=float)
    a = a / np.linalg.norm(a)

    def fn(x):
        r, xh, P = _xhat_projector(x)
        phi = amplitude * (xh @ a)
        ex = lambda v: v[..., None, None]
        return ex(phi) * (P / ex(r * r) - xh[..., :, None] * xh[..., None, :] / ex(np.sinh(r) ** 2))
    return fn, 1.0


def rotation_kappa(n=3, amplitude=1.0, plane=(0, 1)):
    """beta (dr W + W dr) for the rotation W of ``plane``; beta = amplitude / sinh^(n-1) r."""
    i, j = plane
    Om = np.zeros((n, n))
    Om[j, i] = 1.0
    Om[i, j] = -1.0

    def fn(x):
        r, xh, P = _xhat_projector(x)
        W = xh @ Om.T
        beta = amplitude / np.sinh(r) ** (n - 1)
        return (beta / r)[..., None, None] * (xh[..., :, None] * W[..., None, :]
                                              + W[..., :, None] * xh[..., None, :])
    return fn, float(n - 1)


def profile_kappa(n=3, amplitude=1.0, direction=(1, 0, 0), tracefree=None):
    """amplitude e^{-(n+1) r} * sinh^2 r * (a . xhat) T with T trace-free on the sphere.

    Generic (not constraint satisfying) profile for decay tests.
    """
    a = np.asarray(direction, dtype=float)
    S = np.eye(n) if tracefree is None else np.asarray(tracefree, dtype=float)
    if tracefree is None:
        S = np.diag(np.arange(1.0, n + 1))
    tf = _tracefree_tensor(S, n)

    def fn(x):
        r, xh, _ = _xhat_projector(x)
        coef = amplitude * np.exp(-(n + 1) * r) * np.sinh(r) ** 2 * (xh @ a)
        return coef[..., None, None] * sphere_tensor_to_chart(tf(xh), x)
    return fn, float(n)


KAPPA_FAMILIES = {
    "scalar_l1": scalar_l1_kappa,
    "rotation": rotation_kappa,
    "momentum": momentum_kappa,
    "profile": profile_kappa,
}


def model_with_k(base, kind=None, kappa_fn=None, strict=False, **kwargs):
    """Attach a second fundamental form to ``base``.

    Either a family name from ``KAPPA_FAMILIES`` with its parameters, or an
    explicit complex-safe ``kappa_fn``.  The decay order tau of the result
    is the smaller of the base order and (kappa decay - 1).
    """
    if kappa_fn is None:
        if kind is None:
            return replace(base, kappa_fn=None)
        if kind not in KAPPA_FAMILIES:
            raise ValueError(f"unknown kappa family {kind!r}")
        if kind != "momentum":
            kwargs.setdefault("n", base.n)
        elif base.n != 3:
            raise ValueError("the momentum family exists only for n = 3")
        kappa_fn, tau_k = KAPPA_FAMILIES[kind](**kwargs)
    else:
        tau_k = kwargs.pop("tau", base.tau)
    data = replace(base, kappa_fn=kappa_fn, tau=min(base.tau, tau_k),
                   label=f"{base.label}+k[{kind or 'custom'}]",
                   params={**base.params, "kappa": {"kind": kind, **kwargs}})
    decay_ladder(data, strict=strict)
    return data


# -- diagnostics -------------------------------------------------------------------

def decay_ladder(data, radii=(4.0, 5.0, 6.0, 7.0, 8.0, 9.0, 10.0), npts=64, strict=False):
    """Sampled sup of e^{tau r} |gamma|_b and e^{tau r} |kappa|_b on spheres.

    Returns a dict of per-radius maxima; warns (or raises when ``strict``)
    if a scaled norm grows by more than a factor 2 along the ladder.
    """
    rng = np.random.default_rng(7)
    u = rng.normal(size=(npts, data.n))
    u /= np.linalg.norm(u, axis=1, keepdims=True)
    out = {"radius": list(radii), "gamma": [], "kappa": []}
    for R in radii:
        x = R * u
        binv = bg.inverse_metric(x)
        scale = np.exp(data.tau * R)
        out["gamma"].append(float(scale * np.sqrt(bg.norm2(data.gamma(x), binv)).max()))
        out["kappa"].append(float(scale * np.sqrt(bg.norm2(data.kappa(x), binv)).max()))
    for key in ("gamma", "kappa"):
        vals = np.asarray(out[key])
        ok = bool(np.all(vals[1:] <= 2.0 * np.maximum(vals[:-1], 1e-300)) or np.all(vals == 0))
        out[f"{key}_ok"] = ok
        if not ok:
            msg = f"{data.label}: e^(tau r)|{key}|_b grows along the ladder: {vals}"
            if strict:
                raise DecayError(msg)
            warnings.warn(msg, DecayWarning, stacklevel=2)
    return out


def _metric_christoffel(data, x):
    g = bg.metric(x) + data.gamma(x)
    dg = bg.metric_derivative(x) + data.dgamma(x)
    ginv = np.linalg.inv(g)
    return g, ginv, bg.christoffel_from(ginv, dg)


def scalar_curvature(data, x, h=FD_STEP):
    """Scal_g with Christoffel derivatives from 4th-order central differences."""
    x = np.asarray(x, dtype=float)
    n = x.shape[-1]
    g, ginv, G = _metric_christoffel(data, x)
    dG = []
    for k in range(n):
        e = np.zeros(n)
        e[k] = h
        stencil = [_metric_christoffel(data, x + c * e)[2] for c in (-2, -1, 1, 2)]
        dG.append((stencil[0] - 8 * stencil[1] + 8 * stencil[2] - stencil[3]) / (12 * h))
    dG = np.stack(dG, axis=-4)  # dG[..., k, l, i, j] = d_k Gamma^l_ij
    ric = (np.einsum("...llij->...ij", dG) - np.einsum("...jlil->...ij", dG)
           + np.einsum("...llm,...mij->...ij", G, G) - np.einsum("...ljm,...mil->...ij", G, G))
    return np.einsum("...ij,...ij->...", ginv, ric)


def constraint_densities_at(data, x, h=FD_STEP):
    """Energy density mu and momentum density J (covector) at chart points."""
    x = np.asarray(x, dtype=float)
    r = bg.radius(x)
    if np.any(r - 3 * h < data.r_min):
        raise DomainError(f"{data.label}: finite-difference stencil leaves the data domain")
    n = data.n
    g, ginv, G = _metric_christoffel(data, x)
    scal = scalar_curvature(data, x, h)
    k = data.kappa(x)
    dk = data.dkappa(x)
    trk = bg.trace(k, ginv)
    mu = scal + n * (n - 1) - trk ** 2 + bg.norm2(k, ginv)
    # d tr_g k = g^{ij} nabla_j k_ij component-wise
    nab = bg.covariant_derivative(k, dk, G)
    J = bg.divergence(k, dk, ginv, G) - np.einsum("...ij,...kij->...k", ginv, nab)
    return mu, J


def constraint_densities(data, point, h=FD_STEP):
    return constraint_densities_at(data, np.asarray(point, dtype=float), h)
