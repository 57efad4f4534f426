"""Minkowski space R^{n,1}, the hyperboloid model of H^n and surface centers.

Points of H^n are handled in two ways: as :class:`HyperbolicPoint`
(polar data r, x) and, in vectorised code, through "chart coordinates"
``x = r * xhat`` in R^n.  The embedding is

    I(r, xhat) = (cosh r, sinh r * xhat)

onto the future unit hyperboloid eta(X, X) = -1 with
eta = diag(-1, 1, ..., 1).

Every routine that may be fed complex arrays (complex-step derivatives in
:mod:`ahcom.models`) uses ``sqrt(v @ v)`` rather than ``abs``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "NotFutureTimelikeError",
    "HyperbolicPoint",
    "eta",
    "eta_inner",
    "embed",
    "unembed",
    "chart_to_hyperboloid",
    "hyperboloid_to_chart",
    "check_lorentz",
    "boost",
    "rotation",
    "boost_to_rest",
    "SphereAction",
    "boost_sphere_action",
    "HyperbolicIsometry",
    "surface_center",
]

LORENTZ_TOL = 1e-12


class NotFutureTimelikeError(ValueError):
    pass


def eta(n):
    """Minkowski metric of R^{n,1} as an (n+1) x (n+1) matrix."""
    m = np.eye(n + 1)
    m[0, 0] = -1.0
    return m


def eta_inner(u, v):
    u = np.asarray(u)
    v = np.asarray(v)
    return -u[..., 0] * v[..., 0] + np.sum(u[..., 1:] * v[..., 1:], axis=-1)


@dataclass(frozen=True)
class HyperbolicPoint:
    """Point of H^n in polar coordinates; at r = 0 the direction is e_1."""

    r: float
    direction: tuple

    def __post_init__(self):
        d = np.asarray(self.direction, dtype=float)
        if self.r < 0:
            raise ValueError("radial coordinate must be non-negative")
        if self.r == 0.0:
            d = np.zeros_like(d)
            d[0] = 1.0
        else:
            d = d / np.linalg.norm(d)
        object.__setattr__(self, "direction", tuple(float(c) for c in d))

    @property
    def dimension(self):
        return len(self.direction)

    @property
    def chart(self):
        """Chart coordinates r * xhat."""
        return self.r * np.asarray(self.direction)

    @classmethod
    def origin(cls, n=3):
        return cls(0.0, (1.0,) + (0.0,) * (n - 1))

    @classmethod
    def from_chart(cls, x):
        x = np.asarray(x, dtype=float)
        r = float(np.linalg.norm(x))
        if r == 0.0:
            return cls.origin(len(x))
        return cls(r, tuple(x / r))

    def distance(self, other):
        """Hyperbolic distance, 2 asinh(|I(p) - I(q)|_eta / 2).

        Same value as arccosh(-eta(I(p), I(q))) but accurate for nearby points.
        """
        D = embed(self) - embed(other)
        return float(2.0 * np.arcsinh(0.5 * np.sqrt(max(eta_inner(D, D), 0.0))))


def embed(p):
    """I(p) for a :class:`HyperbolicPoint`."""
    d = np.asarray(p.direction)
    return np.concatenate([[np.cosh(p.r)], np.sinh(p.r) * d])


def unembed(U, atol=0.0):
    """The point z of H^n with I(z) parallel to the future timelike U."""
    U = np.asarray(U, dtype=float)
    q = eta_inner(U, U)
    if not (q < -atol and U[0] > 0):
        raise NotFutureTimelikeError(
            f"vector {U.tolist()} is not future timelike (eta = {q:.3e})")
    Z = U / np.sqrt(-q)
    spatial = Z[1:]
    s = np.linalg.norm(spatial)
    r = float(np.arcsinh(s))
    if r == 0.0:
        return HyperbolicPoint.origin(len(spatial))
    return HyperbolicPoint(r, tuple(spatial / s))


def chart_to_hyperboloid(x):
    """I applied to chart coordinates, shape (..., n) -> (..., n+1)."""
    x = np.asarray(x)
    r = np.sqrt(np.sum(x * x, axis=-1))
    with np.errstate(invalid="ignore", divide="ignore"):
        s = np.where(r.real == 0, 1.0, np.sinh(r) / np.where(r.real == 0, 1.0, r))
    return np.concatenate([np.cosh(r)[..., None], s[..., None] * x], axis=-1)


def hyperboloid_to_chart(X):
    """Inverse of :func:`chart_to_hyperboloid` on the unit hyperboloid."""
    X = np.asarray(X)
    xi = X[..., 1:]
    rho = np.sqrt(np.sum(xi * xi, axis=-1))
    with np.errstate(invalid="ignore", divide="ignore"):
        g = np.where(rho.real == 0, 1.0, np.arcsinh(rho) / np.where(rho.real == 0, 1.0, rho))
    return g[..., None] * xi


def check_lorentz(A, tol=LORENTZ_TOL):
    """Raise unless A is in the restricted Lorentz group SO_0(n,1)."""
    A = np.asarray(A, dtype=float)
    n = A.shape[0] - 1
    e = eta(n)
    err = np.max(np.abs(A.T @ e @ A - e))
    if err > tol * max(1.0, np.max(np.abs(A)) ** 2):
        raise ValueError(f"matrix does not preserve eta (error {err:.2e})")
    if A[0, 0] < 1.0 - tol or np.linalg.det(A) < 0:
        raise ValueError("matrix is not in the restricted component SO_0(n,1)")
    return A


def boost(rapidity, axis, n=3):
    """Pure boost of given rapidity along the unit spatial ``axis``.

    Maps N = (1, 0, ..., 0) to (cosh b, sinh b * axis).
    """
    axis = np.asarray(axis, dtype=float)
    if axis.shape != (n,):
        raise ValueError(f"axis must have {n} components")
    axis = axis / np.linalg.norm(axis)
    ch, sh = np.cosh(rapidity), np.sinh(rapidity)
    A = np.eye(n + 1)
    A[0, 0] = ch
    A[0, 1:] = sh * axis
    A[1:, 0] = sh * axis
    A[1:, 1:] += (ch - 1.0) * np.outer(axis, axis)
    return A


def rotation(R):
    """Embed a spatial rotation matrix into SO_0(n,1)."""
    R = np.asarray(R, dtype=float)
    A = np.eye(R.shape[0] + 1)
    A[1:, 1:] = R
    return A


def boost_to_rest(P):
    """The pure boost A_P with A_P P = sqrt(-eta(P,P)) N."""
    P = np.asarray(P, dtype=float)
    q = eta_inner(P, P)
    if not (q < 0 and P[0] > 0):
        raise NotFutureTimelikeError(f"vector {P.tolist()} is not future timelike")
    U = P / np.sqrt(-q)
    n = len(P) - 1
    s = np.linalg.norm(U[1:])
    if s == 0.0:
        return np.eye(n + 1)
    return boost(-np.arcsinh(s), U[1:] / s, n)


@dataclass(frozen=True)
class SphereAction:
    """Boundary action of A on S^{n-1}.

    ``map(xhat)`` is the direction of A(1, xhat); ``factor(xhat)`` is
    u = 1 / A(1, xhat)^0, so that the pullback of sigma under ``map`` is
    u^2 sigma.
    """

    matrix: np.ndarray

    def _image(self, xhat):
        xhat = np.asarray(xhat)
        null = np.concatenate([np.ones(xhat.shape[:-1] + (1,)), xhat], axis=-1)
        return null @ self.matrix.T

    def map(self, xhat):
        Y = self._image(xhat)
        return Y[..., 1:] / Y[..., :1]

    def factor(self, xhat):
        return 1.0 / self._image(xhat)[..., 0]

    def jacobian(self, xhat):
        """Ambient derivative d(map)/d(xhat), shape (..., n, n)."""
        Y = self._image(xhat)
        A1 = self.matrix[1:, 1:]
        a0 = self.matrix[0, 1:]
        lam = Y[..., 0]
        return (A1 / lam[..., None, None]
                - Y[..., 1:, None] * a0[None, :] / lam[..., None, None] ** 2)


def boost_sphere_action(A):
    return SphereAction(check_lorentz(A))


class HyperbolicIsometry:
    """The isometry a = I^{-1} o A o I of H^n in chart coordinates.

    ``__call__`` and :meth:`jacobian` accept complex input so that outer
    complex-step differentiation stays exact.
    """

    def __init__(self, A):
        self.matrix = check_lorentz(A)
        self.n = self.matrix.shape[0] - 1

    def __call__(self, x):
        return hyperboloid_to_chart(chart_to_hyperboloid(x) @ self.matrix.T)

    def inverse(self):
        return HyperbolicIsometry(np.linalg.inv(self.matrix))

    def jacobian(self, x):
        """d a / d x at chart points x, shape (..., n, n)."""
        x = np.asarray(x)
        n = self.n
        eye = np.eye(n)
        r = np.sqrt(np.sum(x * x, axis=-1))[..., None, None]
        xh = x[..., :, None] / r
        s = np.sinh(r) / r
        ds = np.cosh(r) / r - np.sinh(r) / r ** 2
        J1 = s * eye + ds * xh * x[..., None, :]
        X = chart_to_hyperboloid(x)
        A10 = self.matrix[1:, 0]
        A11 = self.matrix[1:, 1:]
        xi = X[..., 1:]
        J2 = A10[:, None] * xi[..., None, :] / X[..., :1, None] + A11
        xi2 = xi @ A11.T + X[..., :1] * A10
        rho = np.sqrt(np.sum(xi2 * xi2, axis=-1))[..., None, None]
        g = np.arcsinh(rho) / rho
        dg = 1.0 / (rho * np.sqrt(1.0 + rho ** 2)) - np.arcsinh(rho) / rho ** 2
        J3 = g * eye + dg * xi2[..., :, None] * xi2[..., None, :] / rho
        return J3 @ J2 @ J1


def surface_center(points, weights):
    """Hyperbolic center of a sampled hypersurface.

    ``points`` are chart coordinates (N, n) and ``weights`` the induced
    area weights.  Returns the averaged embedding C and z = I^{-1}(C).
    """
    points = np.asarray(points, dtype=float)
    weights = np.asarray(weights, dtype=float)
    total = weights.sum()
    if not total > 0:
        raise ValueError("surface has zero total weight")
    C = weights @ chart_to_hyperboloid(points) / total
    return C, unembed(C)
