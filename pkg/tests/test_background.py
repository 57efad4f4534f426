import numpy as np

from ahcom import background as bg


def fd_metric_derivative(x, h=1e-5):
    out = []
    for e in np.eye(x.shape[-1]):
        out.append((bg.metric(x + h * e) - bg.metric(x - h * e)) / (2 * h))
    return np.stack(out, axis=-3)


def test_metric_is_hyperbolic_in_polar_form():
    x = np.array([0.3, -1.2, 0.8])
    r = np.linalg.norm(x)
    b = bg.metric(x)
    xh = x / r
    assert abs(xh @ b @ xh - 1) < 1e-14
    t = np.cross(xh, [1.0, 0, 0])
    t /= np.linalg.norm(t)
    # tangential unit vector has length sinh r / r in the chart
    assert abs(t @ b @ t - (np.sinh(r) / r) ** 2) < 1e-13
    assert np.max(np.abs(bg.inverse_metric(x) @ b - np.eye(3))) < 1e-13


def test_metric_derivative_against_fd():
    rng = np.random.default_rng(0)
    x = rng.normal(size=(10, 3))
    assert np.max(np.abs(bg.metric_derivative(x) - fd_metric_derivative(x))) < 1e-8


def test_christoffel_against_fd_and_metric_parallel():
    rng = np.random.default_rng(1)
    x = rng.normal(size=(10, 3))
    ginv = bg.inverse_metric(x)
    G_fd = bg.christoffel_from(ginv, fd_metric_derivative(x))
    G = bg.christoffel(x)
    assert np.max(np.abs(G - G_fd)) < 1e-8
    nabla_b = bg.covariant_derivative(bg.metric(x), bg.metric_derivative(x), G)
    assert np.max(np.abs(nabla_b)) < 1e-12


def test_radial_lines_are_geodesics():
    # xdd^l + Gamma^l_ij xd^i xd^j = 0 with xdd = 0 along x = t e
    e = np.array([0.6, 0.0, 0.8])
    for t in (0.5, 1.5, 3.0):
        G = bg.christoffel(t * e)
        assert np.max(np.abs(np.einsum("lij,i,j->l", G, e, e))) < 1e-12


def test_divergence_of_metric_and_trace_and_norm():
    x = np.array([[0.4, 0.2, -1.0]])
    b, ginv = bg.metric(x), bg.inverse_metric(x)
    assert abs(bg.trace(b, ginv)[0] - 3) < 1e-13
    assert abs(bg.norm2(b, ginv)[0] - 3) < 1e-13
    div = bg.divergence(b, bg.metric_derivative(x), ginv, bg.christoffel(x))
    assert np.max(np.abs(div)) < 1e-12
    w = np.array([[1.0, 2.0, 3.0]])
    assert np.allclose(bg.raise_index(w, ginv)[0], ginv[0] @ w[0])
