"""Hyperbolic background metric b = dr^2 + sinh^2 r sigma in chart coordinates.

In the chart x = r * xhat the metric is

    b_ij = xhat_i xhat_j + q(r) (delta_ij - xhat_i xhat_j),  q = (sinh r / r)^2,

and everything here is evaluated analytically.  Derivative arrays put the
differentiation index first: ``d[..., k, i, j] = d_k T_ij``, Christoffel
symbols are ``G[..., l, i, j] = Gamma^l_ij``.  The generic helpers at the
bottom work for any metric, so the same code serves b and g = b + gamma.
"""

import numpy as np

__all__ = [
    "radius",
    "metric",
    "inverse_metric",
    "metric_derivative",
    "christoffel",
    "christoffel_from",
    "covariant_derivative",
    "trace",
    "divergence",
    "raise_index",
    "norm2",
]


def radius(x):
    return np.sqrt(np.sum(x * x, axis=-1))


def _parts(x):
    r = radius(x)
    xh = x / r[..., None]
    n = x.shape[-1]
    Pr = xh[..., :, None] * xh[..., None, :]
    Pt = np.eye(n) - Pr
    return r, xh, Pr, Pt


def metric(x):
    r, _, Pr, Pt = _parts(x)
    q = (np.sinh(r) / r) ** 2
    return Pr + q[..., None, None] * Pt


def inverse_metric(x):
    r, _, Pr, Pt = _parts(x)
    q = (np.sinh(r) / r) ** 2
    return Pr + Pt / q[..., None, None]


def metric_derivative(x):
    """d_k b_ij, shape (..., n, n, n)."""
    r, xh, Pr, Pt = _parts(x)
    n = x.shape[-1]
    eye = np.eye(n)
    sh, ch = np.sinh(r), np.cosh(r)
    q = (sh / r) ** 2
    dq = 2.0 * sh * ch / r ** 2 - 2.0 * sh ** 2 / r ** 3
    rr = r[..., None, None, None]
    # d_k (xh_i xh_j) = (delta_ik xh_j + delta_jk xh_i - 2 xh_i xh_j xh_k) / r
    dPr = (eye[:, :, None] * xh[..., None, None, :]
           + eye[:, None, :] * xh[..., None, :, None]
           - 2.0 * xh[..., :, None, None] * Pr[..., None, :, :]) / rr
    return (dq[..., None, None, None] * xh[..., :, None, None] * Pt[..., None, :, :]
            + (1.0 - q)[..., None, None, None] * dPr)


def christoffel_from(ginv, dg):
    """Gamma^l_ij from the inverse metric and d_k g_ij."""
    # lower[..., i, j, m] = 1/2 (d_i g_jm + d_j g_im - d_m g_ij)
    lower = 0.5 * (dg + np.swapaxes(dg, -3, -2) - np.moveaxis(dg, -3, -1))
    return np.einsum("...lm,...ijm->...lij", ginv, lower)


def christoffel(x):
    return christoffel_from(inverse_metric(x), metric_derivative(x))


def covariant_derivative(T, dT, G):
    """(nabla_k T)_ij for a covariant 2-tensor."""
    return (dT - np.einsum("...lki,...lj->...kij", G, T)
            - np.einsum("...lkj,...il->...kij", G, T))


def trace(T, ginv):
    return np.einsum("...ij,...ij->...", ginv, T)


def divergence(T, dT, ginv, G):
    """(div T)_j = g^{ik} nabla_k T_ij."""
    return np.einsum("...ik,...kij->...j", ginv, covariant_derivative(T, dT, G))


def raise_index(w, ginv):
    return np.einsum("...ij,...j->...i", ginv, w)


def norm2(T, ginv):
    """|T|^2 for a covariant 2-tensor."""
    return np.einsum("...ia,...jb,...ij,...ab->...", ginv, ginv, T, T)
