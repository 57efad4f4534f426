"""Constant mean curvature spheres near infinity (n = 3).

A leaf is the graph {x = (rhat + f(xhat)) xhat} over the coordinate sphere,
with f expanded in real spherical harmonics up to ``bandlimit``.  Newton's
method solves

    H(f) = Hbar  (Galerkin projections onto every Y_k),
    |Sigma|_g = 4 pi sinh^2 rhat,

for the harmonic coefficients of f and the constant Hbar.  Quadrature runs on
a grid of twice the bandlimit so that the projections are alias free.
Sign convention: coordinate spheres of (H^3, b) have H = 2 coth R > 0.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import eigh

from . import background as bg
from .minkowski import HyperbolicPoint, chart_to_hyperboloid, unembed
from .sphere import build_grid, lm_index, n_coefficients, real_sh, tangent_frame

__all__ = [
    "LeafGeometry",
    "CmcLeaf",
    "CmcSolverError",
    "SurfaceGrid",
    "surface_grid",
    "leaf_geometry",
    "mean_curvature",
    "solve_leaf",
    "foliate",
    "leaf_center",
    "center_limit",
    "CenterLimit",
    "stability_diagnostic",
    "fit_decay",
]

DEFAULT_BANDLIMIT = 16
NEWTON_TOL = 1e-10
JET_STEP = 1e-3
KERNEL_TOL = 1e-5
NOISE_ULPS = 16


class CmcSolverError(RuntimeError):
    def __init__(self, message, residual=None, partial=None):
        super().__init__(message)
        self.residual = residual
        self.partial = partial or []


@dataclass(frozen=True, eq=False)
class SurfaceGrid:
    """Quadrature grid plus harmonic values/derivatives for graphs of bandlimit L."""

    bandlimit: int
    grid: object
    Y: np.ndarray
    Yt: np.ndarray
    Yp: np.ndarray
    Ytt: np.ndarray
    Ytp: np.ndarray
    Ypp: np.ndarray
    e_theta: np.ndarray
    e_phi: np.ndarray

    @property
    def size(self):
        return self.Y.shape[1]


_GRIDS = {}


def surface_grid(bandlimit=DEFAULT_BANDLIMIT):
    if bandlimit not in _GRIDS:
        grid = build_grid(2, 2 * bandlimit)
        parts = real_sh(bandlimit, grid.theta, grid.phi, diff=2)
        _GRIDS[bandlimit] = SurfaceGrid(bandlimit, grid, *parts, *tangent_frame(grid))
    return _GRIDS[bandlimit]


@dataclass
class LeafGeometry:
    """Pointwise geometry of a graph surface at the quadrature nodes."""

    points: np.ndarray      # chart positions (N, 3)
    H: np.ndarray
    tracefree2: np.ndarray  # |A - H h / 2|^2
    area_density: np.ndarray  # dmu_g / dmu_sigma
    area_density_b: np.ndarray
    radial_tangential2: np.ndarray  # |(d_r)^T|_g^2
    normal_flux: np.ndarray  # g(d_r, nu)


def _metric_and_christoffel(data, x):
    # the chart metric has condition number ~ sinh^2 r / r^2, so invert
    # g = b (1 + b^{-1} gamma) around the analytic b^{-1}
    binv = bg.inverse_metric(x)
    gam = data.gamma(x)
    g = bg.metric(x) + gam
    dg = bg.metric_derivative(x) + data.dgamma(x)
    ginv = np.linalg.solve(np.eye(x.shape[-1]) + binv @ gam, binv)
    return g, ginv, bg.christoffel_from(ginv, dg)


def _jet(sgrid, coeffs):
    c = np.asarray(coeffs, dtype=float)
    k = len(c)
    return [D[:, :k] @ c for D in (sgrid.Y, sgrid.Yt, sgrid.Yp, sgrid.Ytt, sgrid.Ytp, sgrid.Ypp)]


def leaf_geometry(data, rhat, coeffs, sgrid):
    """Evaluate the graph of ``coeffs`` (length <= (L+1)^2) over radius ``rhat``."""
    if data.n != 3:
        raise ValueError("CMC surfaces are only supported for n = 3")
    return _geometry_from_jet(data, rhat, _jet(sgrid, coeffs), sgrid)


def _geometry_from_jet(data, rhat, jet, sgrid):
    """Geometry at the nodes given (f, f_t, f_p, f_tt, f_tp, f_pp) there."""
    f, ft, fp, ftt, ftp, fpp = jet
    th = sgrid.grid.theta
    st, ct = np.sin(th), np.cos(th)
    u = sgrid.grid.nodes
    et, ep = sgrid.e_theta, sgrid.e_phi
    rho = rhat + f
    if np.any(rho <= 0):
        raise ValueError("graph crosses the origin")
    x = rho[:, None] * u
    data.check_domain(x)

    # tangential gradient and covariant Hessian of f on the unit sphere
    Gt, Gp = ft, fp / st
    G = Gt[:, None] * et + Gp[:, None] * ep
    h_tt = ftt
    h_tp = (ftp - ct / st * fp) / st
    h_pp = fpp / st ** 2 + ct / st * ft
    hess_s = (h_tt[:, None, None] * et[:, :, None] * et[:, None, :]
              + h_tp[:, None, None] * (et[:, :, None] * ep[:, None, :] + ep[:, :, None] * et[:, None, :])
              + h_pp[:, None, None] * ep[:, :, None] * ep[:, None, :])

    # level set F = |x| - rhat - f(x/|x|)
    r = rho[:, None, None]
    P = np.eye(3) - u[:, :, None] * u[:, None, :]
    dF = u - G / rho[:, None]
    hess_f = (hess_s - u[:, :, None] * G[:, None, :] - G[:, :, None] * u[:, None, :]) / r ** 2
    ddF = P / r - hess_f

    g, ginv, Gam = _metric_and_christoffel(data, x)
    nabla2F = ddF - np.einsum("nkij,nk->nij", Gam, dF)
    grad = np.einsum("nij,nj->ni", ginv, dF)
    norm = np.sqrt(np.einsum("ni,ni->n", grad, dF))
    nu = grad / norm[:, None]

    t1 = Gt[:, None] * u + rho[:, None] * et
    t2 = Gp[:, None] * u + rho[:, None] * ep
    T = np.stack([t1, t2], axis=1)                      # (N, 2, 3)
    h = np.einsum("nai,nij,nbj->nab", T, g, T)
    hinv = np.linalg.inv(h)
    A = np.einsum("nai,nij,nbj->nab", T, nabla2F, T) / norm[:, None, None]
    H = np.einsum("nab,nab->n", hinv, A)
    Ao = A - 0.5 * H[:, None, None] * h
    Ao2 = np.einsum("nac,nbd,nab,ncd->n", hinv, hinv, Ao, Ao)

    b = bg.metric(x)
    hb = np.einsum("nai,nij,nbj->nab", T, b, T)
    # |(d_r)^T|^2 from the tangential components g(d_r, t_a)
    gu_t = np.einsum("ni,nij,naj->na", u, g, T)
    return LeafGeometry(points=x, H=H, tracefree2=Ao2,
                        area_density=np.sqrt(np.linalg.det(h)),
                        area_density_b=np.sqrt(np.linalg.det(hb)),
                        radial_tangential2=np.einsum("na,nab,nb->n", gu_t, hinv, gu_t),
                        normal_flux=np.einsum("ni,nij,nj->n", u, g, nu))


def mean_curvature(data, rhat, coeffs, bandlimit=DEFAULT_BANDLIMIT):
    """Mean curvature at the nodes of the (2L) quadrature grid."""
    return leaf_geometry(data, rhat, coeffs, surface_grid(bandlimit)).H


# -- Newton solver ---------------------------------------------------------------------

def _residual(data, rhat, unknowns, sgrid):
    c, Hbar = unknowns[:-1], unknowns[-1]
    geo = leaf_geometry(data, rhat, c, sgrid)
    w = sgrid.grid.weights
    scale = math.sinh(rhat) ** 2
    proj = (w * (geo.H - Hbar)) @ sgrid.Y * scale
    area = w @ geo.area_density
    target = 4.0 * math.pi * scale
    return np.concatenate([proj, [(area - target) / target]]), geo


def _sensitivities(data, rhat, coeffs, sgrid, step=JET_STEP):
    """Nodal dH/dc (nodes x coefficients) and d|Sigma|/dc.

    H and the area density at a node depend only on the 2-jet of f there,
    so perturbing each jet component at all nodes at once (12 geometry
    evaluations) and chaining with the harmonic derivative tables gives
    every column.
    """
    jet = _jet(sgrid, coeffs)
    tables = (sgrid.Y, sgrid.Yt, sgrid.Yp, sgrid.Ytt, sgrid.Ytp, sgrid.Ypp)
    w = sgrid.grid.weights
    dH = np.zeros((sgrid.grid.size, sgrid.size))
    darea = np.zeros(sgrid.size)
    for j, D in enumerate(tables):
        plus, minus = list(jet), list(jet)
        plus[j] = jet[j] + step
        minus[j] = jet[j] - step
        gp = _geometry_from_jet(data, rhat, plus, sgrid)
        gm = _geometry_from_jet(data, rhat, minus, sgrid)
        dH += ((gp.H - gm.H) / (2 * step))[:, None] * D
        darea += (w * (gp.area_density - gm.area_density) / (2 * step)) @ D
    return dH, darea


def _jacobian(data, rhat, unknowns, sgrid):
    dH, darea = _sensitivities(data, rhat, unknowns[:-1], sgrid)
    w = sgrid.grid.weights
    scale = math.sinh(rhat) ** 2
    m = len(unknowns)
    J = np.empty((m, m))
    J[:-1, :-1] = sgrid.Y.T @ (w[:, None] * dH) * scale
    J[:-1, -1] = -(w @ sgrid.Y) * scale
    J[-1, :-1] = darea / (4.0 * math.pi * scale)
    J[-1, -1] = 0.0
    return J


@dataclass
class CmcLeaf:
    rhat: float
    coefficients: np.ndarray
    H: float
    residual: float
    iterations: int
    sup_f: float
    inner_radius: float
    outer_radius: float
    radial_roundness: float
    tracefree_roundness: float
    area: float
    center: HyperbolicPoint | None = None
    center_b: HyperbolicPoint | None = None
    C: np.ndarray | None = None
    bandlimit: int = DEFAULT_BANDLIMIT

    @property
    def radius_gap(self):
        return self.outer_radius - self.inner_radius

    def row(self):
        z = self.center.chart if self.center is not None else [math.nan] * 3
        C = self.C if self.C is not None else [math.nan] * 4
        return {"rhat": self.rhat, "H": self.H, "residual": self.residual,
                "sup_f": self.sup_f, "roundness_radial": self.radial_roundness,
                "roundness_tracefree": self.tracefree_roundness,
                "radius_gap": self.radius_gap,
                **{f"C{a}": float(C[a]) for a in range(4)},
                **{f"z{i + 1}": float(z[i]) for i in range(3)}}


def _finish(rhat, unknowns, geo, sgrid, iterations):
    w = sgrid.grid.weights
    c = unknowns[:-1]
    f = sgrid.Y @ c
    rho = rhat + f
    leaf = CmcLeaf(rhat=rhat, coefficients=c.copy(), H=float(unknowns[-1]),
                   residual=float(np.max(np.abs(geo.H - unknowns[-1]))),
                   iterations=iterations, sup_f=float(np.max(np.abs(f))),
                   inner_radius=float(rho.min()), outer_radius=float(rho.max()),
                   radial_roundness=float(w @ (geo.radial_tangential2 * geo.area_density)),
                   tracefree_roundness=float(w @ (geo.tracefree2 * geo.area_density)),
                   area=float(w @ geo.area_density), bandlimit=sgrid.bandlimit)
    leaf.C, leaf.center = _center(geo.points, w * geo.area_density)
    _, leaf.center_b = _center(geo.points, w * geo.area_density_b)
    return leaf


def _center(points, weights):
    C = weights @ chart_to_hyperboloid(points) / weights.sum()
    return C, unembed(C)


def _newton(data, rhat, x, sgrid, active, max_iter, tol=None):
    """Newton iterations on the unknowns/equations listed in ``active``.

    Stops once the step stops contracting (noise floor) or falls below
    1e-10, and, when ``tol`` is given, the pointwise residual is below it.
    """
    res, geo = _residual(data, rhat, x, sgrid)
    scale = math.sinh(rhat) ** 2
    prev = np.inf
    it = 0
    for it in range(1, max_iter + 1):
        J = _jacobian(data, rhat, x, sgrid)
        # H is carried in units of 1/sinh^2 rhat so that singular values are O(l^2)
        J[:, -1] /= scale
        Ja = J[np.ix_(active, active)]
        U, sv, Vt = np.linalg.svd(Ja)
        keep = sv > KERNEL_TOL  # exact kernels (isometries of b) are left untouched
        dx = Vt[keep].T @ ((U[:, keep].T @ -res[active]) / sv[keep])
        if active[-1] == len(x) - 1:
            dx[-1] /= scale
        x = x.copy()
        x[active] += dx
        res, geo = _residual(data, rhat, x, sgrid)
        step = float(np.max(np.abs(dx)))
        pointwise = float(np.max(np.abs(geo.H - x[-1])))
        settled = step < 1e-10 or step > 0.5 * prev
        if settled and (tol is None or pointwise < tol):
            break
        prev = step
    return x, res, geo, it


def solve_leaf(data, rhat, guess=None, bandlimit=DEFAULT_BANDLIMIT, tol=NEWTON_TOL,
               max_iter=12):
    """Newton solve for the CMC leaf of area radius ``rhat``.

    The first stage keeps the l = 1 coefficients of the guess fixed; these
    are the near-kernel directions (translations), weakly determined far
    out, and freezing them first stops the nonlinear l >= 2 residual of a
    rough guess from being converted into a large translation.  The second
    stage solves the full system.
    """
    sgrid = surface_grid(bandlimit)
    N = n_coefficients(bandlimit)
    c0 = np.zeros(N)
    if guess is not None:
        g = np.asarray(guess, dtype=float)[:N]
        c0[:len(g)] = g
    x = np.concatenate([c0, [0.0]])
    geo = leaf_geometry(data, rhat, c0, sgrid)
    x[-1] = (sgrid.grid.weights @ geo.H) / (4 * math.pi)
    # a guess that already solves the problem to a few ulps of H is kept:
    # any Newton step from it would be noise amplified by sinh^2 rhat
    res, geo = _residual(data, rhat, x, sgrid)
    floor = NOISE_ULPS * np.finfo(float).eps * abs(x[-1])
    if np.max(np.abs(geo.H - x[-1])) <= floor and abs(res[-1]) <= floor:
        return _finish(rhat, x, geo, sgrid, 0)
    everything = np.arange(N + 1)
    frozen = np.setdiff1d(everything, [lm_index(1, m) for m in (-1, 0, 1)])
    x, _, _, it1 = _newton(data, rhat, x, sgrid, frozen, max_iter)
    x, res, geo, it2 = _newton(data, rhat, x, sgrid, everything, max_iter, tol)
    pointwise = float(np.max(np.abs(geo.H - x[-1])))
    if not pointwise < tol:
        raise CmcSolverError(f"Newton did not converge at rhat={rhat}: residual {pointwise:.3e}",
                             residual=pointwise)
    return _finish(rhat, x, geo, sgrid, it1 + it2)


def foliate(data, schedule, bandlimit=DEFAULT_BANDLIMIT, tol=NEWTON_TOL, min_step=0.125):
    """Leaves along an increasing ``schedule``; each leaf seeds the next.

    On failure the step in rhat is halved down to ``min_step``; the leaves
    computed so far are attached to the raised :class:`CmcSolverError`.
    """
    schedule = [float(r) for r in schedule]
    if np.any(np.diff(schedule) <= 0):
        raise ValueError("schedule must be increasing")
    leaves = []
    guess = None
    current = None
    for target in schedule:
        step_from = current
        r = target
        while True:
            try:
                leaf = solve_leaf(data, r, guess, bandlimit, tol)
            except CmcSolverError as exc:
                if step_from is None or (r - step_from) / 2 < min_step:
                    raise CmcSolverError(str(exc), exc.residual, leaves) from exc
                r = step_from + (r - step_from) / 2
                continue
            guess = leaf.coefficients
            if r == target:
                leaves.append(leaf)
                current = r
                break
            step_from, r = r, target
    return leaves


def leaf_center(leaf, measure="g"):
    """(C, z) of a solved leaf with the g- or b-induced measure."""
    if measure == "g":
        return leaf.C, leaf.center
    if measure == "b":
        return None, leaf.center_b
    raise ValueError("measure must be 'g' or 'b'")


# -- center limit ----------------------------------------------------------------------

def fit_decay(radii, values, floor=1e-13):
    """Exponent a in |values| ~ C e^{-a r}; inf when every value is below ``floor``."""
    radii = np.asarray(radii, dtype=float)
    v = np.abs(np.asarray(values, dtype=float))
    mask = v > floor
    if mask.sum() < 2:
        return math.inf
    return float(-np.polyfit(radii[mask], np.log(v[mask]), 1)[0])


@dataclass
class CenterLimit:
    point: HyperbolicPoint
    error: float
    exponent: float
    status: str
    deviations: list


def center_limit(leaves, measure="g", tol=1e-6):
    """Extrapolate Z_rhat = Z_inf + c e^{-rhat} on the unit hyperboloid."""
    if len(leaves) < 3:
        raise ValueError("need at least three leaves")
    radii = np.array([lf.rhat for lf in leaves])
    pts = [leaf_center(lf, measure)[1] for lf in leaves]
    X = np.array([chart_to_hyperboloid(p.chart) for p in pts])
    def extrapolated(rows):
        r = radii[rows]
        M = np.stack([np.ones(len(r)), np.exp(-r)], axis=-1)
        return np.linalg.lstsq(M, X[rows], rcond=None)[0][0]

    Zinf = extrapolated(slice(-3, None))
    z = unembed(Zinf)
    if len(leaves) >= 4:
        other = extrapolated(slice(-4, -1))
    else:
        other = X[-1]
    err = float(np.max(np.abs(Zinf - other)))
    dev = [float(p.distance(z)) for p in pts]
    exponent = fit_decay(radii, dev)
    status = "converged" if err < tol else "non-cauchy"
    return CenterLimit(z, err, exponent, status, dev)


# -- stability -------------------------------------------------------------------------

def stability_diagnostic(leaf, data):
    """Smallest eigenvalue of the Jacobi operator on area-preserving variations.

    Radial variations delta f = Y_k move the leaf with normal speed
    phi_k = Y_k g(d_r, nu); the linearised mean curvature satisfies
    delta H = L phi.  We solve  S v = lambda M v  with
    S_kl = int phi_k dH_l,  M_kl = int phi_k phi_l  (both over dmu_g)
    on the subspace int phi dmu_g = 0.  The result is scaled by sinh^2 rhat,
    so a round sphere of (H^3, b) gives l(l+1) - 2 >= 0.
    """
    sgrid = surface_grid(leaf.bandlimit)
    geo = leaf_geometry(data, leaf.rhat, leaf.coefficients, sgrid)
    dH, _ = _sensitivities(data, leaf.rhat, leaf.coefficients, sgrid)
    w = sgrid.grid.weights * geo.area_density
    phi = sgrid.Y * geo.normal_flux[:, None]
    S = phi.T @ (w[:, None] * dH)
    M = phi.T @ (w[:, None] * phi)
    c = w @ phi
    Q = np.linalg.svd(c[None, :])[2][1:].T
    S = Q.T @ (0.5 * (S + S.T)) @ Q
    M = Q.T @ M @ Q
    return float(eigh(S, M, eigvals_only=True)[0] * math.sinh(leaf.rhat) ** 2)
