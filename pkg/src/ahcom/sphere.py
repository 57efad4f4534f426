"""Quadrature and real spherical harmonics on the unit sphere.

Grids are tensor-product Gauss rules.  On S^2 the polar angle uses
Gauss-Legendre nodes in cos(theta) and the azimuth a uniform grid, so a
grid built for bandlimit L has (L+1) x (2L+2) nodes and integrates every
polynomial of degree <= 2L+1 exactly.  Higher spheres S^d are built
recursively with Gauss-Jacobi nodes in the first coordinate.

Real spherical harmonic convention (S^2 only)
---------------------------------------------
Coefficients are stored flat, index ``k = l*l + l + m`` for
``0 <= l <= L`` and ``-l <= m <= l``.  With the complex harmonics
Y_l^m of scipy (Condon-Shortley phase included) the real basis is

    m > 0:  sqrt(2) (-1)^m Re Y_l^m
    m = 0:  Y_l^0
    m < 0:  sqrt(2) (-1)^m Im Y_l^|m|

which is orthonormal in L^2(dmu_sigma) and free of the Condon-Shortley
sign, e.g. the l=1 functions are sqrt(3/4pi) * (x2, x3, x1) for
m = -1, 0, 1.  Parseval therefore reads  int f^2 = sum c_k^2.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from math import gamma, pi

import numpy as np
from scipy.special import roots_jacobi, roots_legendre, sph_harm_y

__all__ = [
    "SpectralUnavailableError",
    "SphericalGrid",
    "build_grid",
    "sphere_area",
    "integrate",
    "n_coefficients",
    "lm_index",
    "sh_analysis",
    "sh_synthesis",
    "real_sh",
    "tangent_frame",
]


class SpectralUnavailableError(ValueError):
    """Spectral operations were requested on a sphere other than S^2."""


def sphere_area(dimension):
    """Area of the unit sphere S^dimension."""
    return 2.0 * pi ** ((dimension + 1) / 2) / gamma((dimension + 1) / 2)


def n_coefficients(bandlimit):
    return (bandlimit + 1) ** 2


def lm_index(l, m):
    return l * l + l + m


def _circle_rule(count):
    phi = 2.0 * pi * np.arange(count) / count
    nodes = np.stack([np.cos(phi), np.sin(phi)], axis=-1)
    weights = np.full(count, 2.0 * pi / count)
    return nodes, weights


def _sphere_rule(dimension, bandlimit):
    """Product rule on S^dimension exact for degree <= 2*bandlimit+1."""
    if dimension == 1:
        return _circle_rule(2 * bandlimit + 2)
    npts = bandlimit + 1
    if dimension == 2:
        t, wt = roots_legendre(npts)
    else:
        a = (dimension - 2) / 2.0
        t, wt = roots_jacobi(npts, a, a)
    sub_nodes, sub_weights = _sphere_rule(dimension - 1, bandlimit)
    s = np.sqrt(1.0 - t * t)
    nodes = np.concatenate(
        [np.broadcast_to(t[:, None, None], (npts, len(sub_weights), 1)),
         s[:, None, None] * sub_nodes[None, :, :]], axis=-1)
    weights = wt[:, None] * sub_weights[None, :]
    return nodes.reshape(-1, dimension + 1), weights.reshape(-1)


@dataclass(frozen=True, eq=False)
class SphericalGrid:
    """Quadrature grid on S^dimension embedded in R^(dimension+1).

    For dimension 2 the nodes are ordered (theta-major, phi-minor) and
    use the Cartesian ordering (x1, x2, x3) with x3 = cos(theta).
    """

    dimension: int
    bandlimit: int
    nodes: np.ndarray
    weights: np.ndarray
    theta: np.ndarray | None = field(default=None, repr=False)
    phi: np.ndarray | None = field(default=None, repr=False)

    @property
    def size(self):
        return len(self.weights)

    @property
    def area(self):
        return sphere_area(self.dimension)

    @cached_property
    def basis(self):
        """Real harmonics Y_k at the nodes, shape (size, (L+1)^2)."""
        self._require_spectral()
        return real_sh(self.bandlimit, self.theta, self.phi)[0]

    @cached_property
    def basis_derivatives(self):
        """(Y, Y_theta, Y_phi, Y_thth, Y_thph, Y_phph) at the nodes."""
        self._require_spectral()
        return real_sh(self.bandlimit, self.theta, self.phi, diff=2)

    def _require_spectral(self):
        if self.dimension != 2:
            raise SpectralUnavailableError(
                f"spectral unavailable on S^{self.dimension}; only S^2 is supported")


def build_grid(dimension, bandlimit):
    """Product Gauss grid on S^dimension for fields of bandlimit ``bandlimit``."""
    if dimension < 2:
        raise ValueError("sphere dimension must be >= 2")
    if bandlimit < 4:
        raise ValueError("bandlimit must be >= 4")
    if dimension == 2:
        t, wt = roots_legendre(bandlimit + 1)
        theta = np.arccos(t)
        phi = 2.0 * pi * np.arange(2 * bandlimit + 2) / (2 * bandlimit + 2)
        th, ph = np.meshgrid(theta, phi, indexing="ij")
        st = np.sin(th)
        nodes = np.stack([st * np.cos(ph), st * np.sin(ph), np.cos(th)], axis=-1)
        weights = wt[:, None] * np.full(len(phi), 2.0 * pi / len(phi))[None, :]
        return SphericalGrid(2, bandlimit, nodes.reshape(-1, 3), weights.reshape(-1),
                             th.reshape(-1), ph.reshape(-1))
    nodes, weights = _sphere_rule(dimension, bandlimit)
    # put the recursive "first" coordinate last so x^n plays the role of cos(theta)
    nodes = np.roll(nodes, -1, axis=-1)
    return SphericalGrid(dimension, bandlimit, nodes, weights)


def integrate(grid, values):
    """Quadrature of node values; trailing axes are integrated componentwise."""
    values = np.asarray(values)
    if values.shape[:1] != (grid.size,):
        raise ValueError(
            f"field has {values.shape[:1]} leading entries, grid has {grid.size} nodes")
    return np.tensordot(grid.weights, values, axes=(0, 0))


def real_sh(bandlimit, theta, phi, diff=0):
    """Real orthonormal harmonics up to ``bandlimit`` at (theta, phi).

    Returns a tuple ``(Y,)`` or, for ``diff=2``,
    ``(Y, Y_t, Y_p, Y_tt, Y_tp, Y_pp)``; each array has shape
    ``theta.shape + ((L+1)^2,)``.
    """
    theta = np.asarray(theta, dtype=float)
    phi = np.asarray(phi, dtype=float)
    ls, ms = [], []
    for l in range(bandlimit + 1):
        for m in range(-l, l + 1):
            ls.append(l)
            ms.append(m)
    ls = np.array(ls)
    ms = np.array(ms)
    am = np.abs(ms)
    th = theta[..., None]
    ph = phi[..., None]
    y = sph_harm_y(ls, am, th, ph)
    if diff == 0:
        parts = [y]
    else:
        # derivatives from the values: ladder identity for d_theta, Legendre
        # equation for d_theta^2 (off the poles, where Gauss nodes live)
        y_up = sph_harm_y(ls, am + 1, th, ph)
        cot = 1.0 / np.tan(th)
        c = np.sqrt((ls - am) * (ls + am + 1.0))
        yt = am * cot * y + c * np.exp(-1j * ph) * y_up
        ytt = -cot * yt - (ls * (ls + 1.0) - am ** 2 / np.sin(th) ** 2) * y
        parts = [y, yt, 1j * am * y, ytt, 1j * am * yt, -(am ** 2) * y]
    sign = np.where(am % 2 == 1, -1.0, 1.0) * np.sqrt(2.0)
    result = []
    for z in parts:
        real = np.where(ms > 0, sign * z.real, np.where(ms < 0, sign * z.imag, z.real))
        result.append(np.ascontiguousarray(real))
    return tuple(result)


def sh_analysis(grid, values):
    """Real harmonic coefficients of a bandlimited scalar field on ``grid``."""
    values = np.asarray(values, dtype=float)
    return integrate(grid, values[:, None] * grid.basis)


def sh_synthesis(grid, coefficients):
    """Node values of the harmonic expansion with ``coefficients``."""
    coefficients = np.asarray(coefficients, dtype=float)
    if grid.dimension != 2:
        grid._require_spectral()
    nmax = n_coefficients(grid.bandlimit)
    if coefficients.shape[-1] > nmax:
        raise ValueError(
            f"{coefficients.shape[-1]} coefficients exceed the {nmax} supported "
            f"by bandlimit {grid.bandlimit}")
    return grid.basis[:, :coefficients.shape[-1]] @ coefficients


def tangent_frame(grid):
    """Orthonormal frame (e_theta, e_phi) of sigma at the S^2 nodes."""
    grid._require_spectral()
    th, ph = grid.theta, grid.phi
    e_t = np.stack([np.cos(th) * np.cos(ph), np.cos(th) * np.sin(ph), -np.sin(th)], -1)
    e_p = np.stack([-np.sin(ph), np.cos(ph), np.zeros_like(ph)], -1)
    return e_t, e_p
