import math

import numpy as np
import pytest

from ahcom import cmc, models
from ahcom.minkowski import HyperbolicIsometry, HyperbolicPoint, boost
from ahcom.sphere import n_coefficients

L = 8
JET_ERROR = 2e-6  # O(JET_STEP^2) error of the sensitivities, in sinh^2-scaled units


@pytest.fixture(scope="module")
def kottler():
    return models.model_kottler(3, 1.0)


def test_hyperbolic_coordinate_spheres():
    h = models.model_hyperbolic(3)
    for R in (2.0, 5.0):
        leaf = cmc.solve_leaf(h, R, bandlimit=L)
        assert abs(leaf.H - 2 / math.tanh(R)) < 1e-12
        assert leaf.sup_f == 0.0
        assert leaf.center.r < 1e-12
        assert abs(cmc.stability_diagnostic(leaf, h)) < JET_ERROR


@pytest.mark.parametrize("rhat", [3.0, 4.0, 6.0])
def test_kottler_leaves(kottler, rhat):
    # leaf of area radius rhat is {rho = sinh rhat}: H = 2 rho'/rho, lambda_1 = 6 m / rho^3 * sinh^2
    leaf = cmc.solve_leaf(kottler, rhat, bandlimit=L)
    rho = math.sinh(rhat)
    assert abs(leaf.H - 2 * math.sqrt(1 + rho ** 2 - 2 / rho) / rho) < 1e-11
    assert leaf.radius_gap < 64 * np.finfo(float).eps * rho ** 2  # Newton noise ~ eps sinh^2
    assert abs(float(kottler.profile.rho(leaf.inner_radius)) - rho) < 1e-10 * rho
    assert abs(cmc.stability_diagnostic(leaf, kottler) - 6 / rho) < JET_ERROR
    assert abs(leaf.area - 4 * math.pi * rho ** 2) < 1e-10 * rho ** 2


def test_first_variation_of_area():
    # d/dt |Sigma_t| = int H g(d_r, nu) Y_k dmu_g for f -> f + t Y_k
    data = models.model_perturbed(3, "2 + x1 + 0.5*x2*x3")
    sg = cmc.surface_grid(L)
    rng = np.random.default_rng(0)
    c = np.zeros(n_coefficients(L))
    c[:9] = 0.05 * rng.normal(size=9)
    geo = cmc.leaf_geometry(data, 2.5, c, sg)
    w = sg.grid.weights
    for k in (0, 2, 5, 11):
        h = 1e-5
        cp, cm = c.copy(), c.copy()
        cp[k] += h
        cm[k] -= h
        fd = (w @ cmc.leaf_geometry(data, 2.5, cp, sg).area_density
              - w @ cmc.leaf_geometry(data, 2.5, cm, sg).area_density) / (2 * h)
        exact = w @ (geo.H * geo.normal_flux * sg.Y[:, k] * geo.area_density)
        assert abs(fd - exact) < 1e-7 * max(1.0, abs(exact))


def test_solved_leaf_is_a_fixed_point():
    data = models.model_perturbed(3, "2 + 0.8*(x1**3 - 0.6*x1) + x1*x2")
    leaf = cmc.solve_leaf(data, 4.0, bandlimit=L)
    assert leaf.residual < 1e-10
    again = cmc.solve_leaf(data, 4.0, guess=leaf.coefficients, bandlimit=L)
    assert np.max(np.abs(again.coefficients - leaf.coefficients)) < 1e-9
    assert abs(again.H - leaf.H) < 1e-13


def test_solver_failure_is_reported():
    data = models.model_perturbed(3, "2 + x1*x2")
    with pytest.raises(cmc.CmcSolverError) as info:
        cmc.solve_leaf(data, 3.0, bandlimit=L, tol=1e-300, max_iter=2)
    assert info.value.residual is not None
    with pytest.raises(ValueError):
        cmc.foliate(data, [4.0, 3.0], bandlimit=L)


def test_boosted_kottler_foliation_centers(kottler):
    A = boost(0.3, [0.0, 1.0, 0.0])
    data = models.model_boosted(kottler, A)
    leaves = cmc.foliate(data, [4.0, 5.0, 6.0], bandlimit=12)
    expected = HyperbolicPoint.from_chart(HyperbolicIsometry(A).inverse()(np.zeros(3)))
    for leaf in leaves:
        assert leaf.center.distance(expected) < 1e-8
    lim = cmc.center_limit(leaves)
    assert lim.status == "converged"
    assert lim.point.distance(expected) < 1e-8


def test_center_limit_extrapolates_exact_model():
    # centers moving as Z = Z_inf + c e^{-rhat} are extrapolated exactly
    zinf = np.array([math.cosh(0.2), math.sinh(0.2), 0.0, 0.0])
    c = np.array([0.0, 0.0, 0.5, 0.0])
    leaves = []
    for r in (3.0, 4.0, 5.0, 6.0):
        Z = zinf + c * math.exp(-r)
        Z = Z / math.sqrt(Z[0] ** 2 - Z[1:] @ Z[1:])
        pt = HyperbolicPoint.from_chart(np.arcsinh(np.linalg.norm(Z[1:])) * Z[1:] / np.linalg.norm(Z[1:]))
        leaves.append(cmc.CmcLeaf(r, np.zeros(1), 0, 0, 0, 0, 0, 0, 0, 0, 0, center=pt))
    lim = cmc.center_limit(leaves, tol=1e-6)
    assert lim.point.distance(HyperbolicPoint.from_chart([0.2, 0, 0])) < 1e-4
    assert 0.8 < lim.exponent < 1.2


def test_center_limit_and_measure_validation():
    with pytest.raises(ValueError):
        cmc.center_limit([])
    leaf = cmc.CmcLeaf(3.0, np.zeros(1), 0, 0, 0, 0, 0, 0, 0, 0, 0)
    with pytest.raises(ValueError):
        cmc.leaf_center(leaf, "q")


def test_fit_decay():
    r = np.arange(3.0, 8.0)
    assert abs(cmc.fit_decay(r, 2 * np.exp(-1.5 * r)) - 1.5) < 1e-12
    assert cmc.fit_decay(r, np.zeros(5)) == math.inf
