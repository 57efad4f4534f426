import math

import numpy as np
import pytest

from ahcom import background as bg
from ahcom import evolution, models
from ahcom.models import DecayWarning

L = 8


@pytest.fixture(scope="module")
def kottler_k():
    return models.model_with_k(models.model_kottler(3, 1.0), "scalar_l1", order=4,
                               amplitude=2.0, direction=(0.0, 0.6, 0.8))


def test_metric_rate_is_two_cosh_kappa(kottler_k):
    x = np.array([[2.0, 0.5, -1.0], [0.0, 3.0, 0.1]])
    rate = evolution.metric_rate(kottler_k)
    r = bg.radius(x)
    assert np.allclose(rate.gamma(x), 2 * np.cosh(r)[:, None, None] * kottler_k.kappa(x),
                       rtol=1e-15, atol=0)
    assert rate.kappa_fn is None and rate.mass_tensor is None


def test_rates_need_kappa_and_lapse():
    k0 = models.model_kottler(3, 1.0)
    with pytest.raises(ValueError):
        evolution.metric_rate(k0)
    q = evolution.charge_rate(k0, "B1", bandlimit=L)
    assert q.limit == 0.0 and q.converged
    assert evolution.fd_charge_rate(k0, "T", bandlimit=L) == 0.0
    with pytest.raises(ValueError):
        evolution.charge_rate(k0, "C1", bandlimit=L)


def test_momentum_family_rates_match_linear_momentum():
    # on (H^3, b): J_g = J_b = 0, so dQ_B/dt = Q_C = 16 pi K a / 3 and dQ_T/dt = 0
    a = np.array([0.0, 0.6, 0.8])
    data = models.model_with_k(models.model_hyperbolic(3), "momentum", amplitude=0.5, direction=a)
    for i, label in enumerate(("B1", "B2", "B3")):
        rate = evolution.charge_rate(data, label, bandlimit=L).limit
        assert abs(rate - 16 * math.pi * 0.5 * a[i] / 3) < 1e-6
    assert abs(evolution.charge_rate(data, "T", bandlimit=L).limit) < 1e-6


def test_rate_agrees_with_finite_difference(kottler_k):
    for label in ("T", "B2", "B3"):
        exact = evolution.charge_rate(kottler_k, label, bandlimit=L).limit
        fd = evolution.fd_charge_rate(kottler_k, label, bandlimit=L)
        assert abs(exact - fd) < evolution.RATE_TOL


def test_residual_decays_faster_than_2tau_minus_1(kottler_k):
    radii, sups, floors, expo = evolution.residual_density_decay(kottler_k, "B3")
    assert kottler_k.tau == 3.0
    assert expo >= 2 * kottler_k.tau - 1 - 0.5
    assert sups[0] > floors[0]


def test_residual_vanishes_without_background_perturbation():
    data = models.model_with_k(models.model_hyperbolic(3), "rotation")
    *_, expo = evolution.residual_density_decay(data, "B1")
    assert expo == math.inf


def test_hypotheses(kottler_k):
    hyp = evolution.hypothesis_ladder(kottler_k)
    assert hyp["ok"] and hyp["tau_ok"]
    slow = models.model_with_k(models.model_hyperbolic(3), "momentum")
    hyp = evolution.hypothesis_ladder(slow)
    assert not hyp["tau_ok"] and not hyp["ok"]


def test_verify_evolution_report(kottler_k):
    rep = evolution.verify_evolution(kottler_k, bandlimit=L)
    assert [r.label for r in rep.rows] == ["T", "B1", "B2", "B3"]
    assert rep.max_deviation < evolution.RATE_TOL
    assert rep.row("T").target == 0.0 and math.isnan(rep.row("T").residual_exponent)
    assert all(r.hypotheses_ok for r in rep.rows) and not rep.annotations
    assert set(rep.row("B1").as_dict()) == {"label", "rate", "fd_rate", "target", "abs_dev",
                                            "rel_dev", "residual_exponent", "hypotheses_ok"}


def test_verify_evolution_annotates_failed_hypotheses():
    data = models.model_with_k(models.model_hyperbolic(3), "momentum", direction=(0, 0, 1))
    with pytest.warns(DecayWarning):
        rep = evolution.verify_evolution(data, bandlimit=L)
    assert rep.annotations and "tau" in rep.annotations[0]
    assert abs(rep.row("B3").rate - 16 * math.pi / 3) < 1e-6
    assert rep.row("B3").abs_dev < evolution.RATE_TOL
