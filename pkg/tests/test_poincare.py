import json
import math

import numpy as np
import pytest
from hypothesis import assume, given, strategies as st
from scipy import stats

from convex_transport import poincare as pc
from convex_transport.functionals import F
from convex_transport.measures import DiscreteMeasure, parse_model_id


def student(beta, scale=1.0):
    """(1 + x^2)^-beta on the line is a scaled Student t with 2 beta - 1 dof."""
    nu = 2 * beta - 1
    return stats.t(df=nu, scale=scale / math.sqrt(nu))


def raw_cauchy(beta, n=1):
    return parse_model_id(f"cauchy:beta={beta},n={n}", rescale=False)


def test_family_is_stable():
    fam = pc.test_family()
    assert len(fam) == 50
    assert len({f.label for f in fam}) == 50
    assert pc.family_hash(fam) == pc.family_hash() == pc.family_hash(list(fam))
    assert pc.family_hash(fam[:-1]) != pc.family_hash(fam)


def test_family_derivatives():
    x = np.linspace(-3, 3, 2001)[:, None]
    dx = 1e-6
    for f in pc.test_family():
        if f.label.startswith("tent"):
            continue
        fd = (f.value(x + dx) - f.value(x - dx)) / (2 * dx)
        assert np.max(np.abs(fd - f.dphi(x[:, 0]))) <= 1e-5, f.label


def test_zero_h_always_validates(cauchy2):
    est = pc.verify_weighted_poincare(cauchy2, 0.0)
    assert est.validated and est.worst_margin >= 0
    with pytest.raises(ValueError):
        pc.verify_weighted_poincare(cauchy2, -1.0)


def test_constant_function_contributes_nothing(ball2):
    const = pc.TestFunction1D("one", lambda t: np.ones_like(t), lambda t: np.zeros_like(t))
    est = pc.verify_weighted_poincare(ball2, 10.0, family=[const])
    assert est.margins == [0.0]


def test_median_examples():
    mu = pc.uniform_measure(-1, 1)
    x = mu.points[:, 0]
    assert pc.median_or_center(np.full(len(x), 3.5), mu) == 3.5
    assert abs(pc.median_or_center(x, mu)) <= 1e-12
    assert pc.median_or_center(x ** 2, mu) == pytest.approx(0.25, abs=1e-6)
    assert pc.median_or_center(x ** 2, mu, "mean") == pytest.approx(1 / 3, abs=1e-8)
    with pytest.raises(ValueError):
        pc.median_or_center(x, mu, "mode")


def test_median_square_cauchy():
    m = raw_cauchy(2)
    mu = pc.quadrature_measure(m)
    a = student(2).ppf(0.75)  # P(|X| <= a) = 1/2
    # a cloud median resolves to the atom spacing
    assert pc.median_or_center(mu.points[:, 0] ** 2, mu) == pytest.approx(a * a, rel=1e-4)


def test_transfer_uniform():
    res = pc.proposition1_transfer(pc.uniform_measure(0, 1), lambda X: np.ones(len(X)), 2.0)
    assert res["implication_holds"]
    assert len(res["hypothesis"]) == 50
    with pytest.raises(ValueError):
        pc.proposition1_transfer(pc.uniform_measure(0, 1), lambda X: np.ones(len(X)), 0.0)


def test_cheeger_linear_function_oracle():
    m = raw_cauchy(2)
    lin = pc.TestFunction1D("x", lambda t: t, lambda t: np.ones_like(t))
    res = pc.cheeger_l1_check(m, 1.0, family=[lin])
    d = student(2)
    e_abs = d.expect(abs)
    gm = math.exp(d.expect(lambda x: math.log(abs(x)) if x else 0.0))
    assert e_abs == pytest.approx(2 / math.pi, rel=1e-9)
    assert res.m == pytest.approx(gm, rel=1e-7)
    assert res.ratios[0] == pytest.approx(2 * e_abs / (gm + e_abs / (2 - 1)), rel=1e-5)
    with pytest.raises(ValueError):
        pc.cheeger_l1_check(parse_model_id("ball:sigma=1,beta=2,n=1"))
    with pytest.raises(ValueError):
        pc.cheeger_l1_check(raw_cauchy(1))


def test_mean_radius_values():
    r = pc.geometric_mean_radius(raw_cauchy(2))
    assert r.m1 == pytest.approx(2 / math.pi, rel=1e-10)
    assert r.m <= dict(r.m_q)[0.25] <= dict(r.m_q)[0.5] <= r.m1
    # the standard Cauchy law has E log|x| = 0
    assert pc.geometric_mean_radius(raw_cauchy(1), qs=()).m == pytest.approx(1.0, abs=1e-9)


def test_mean_radius_scaling():
    # pushforward under x -> 2x doubles the geometric mean radius
    d2 = student(3, scale=2.0)
    gm2 = math.exp(d2.expect(lambda x: math.log(abs(x)) if x else 0.0))
    assert gm2 == pytest.approx(2 * pc.geometric_mean_radius(raw_cauchy(3)).m, rel=1e-7)


def test_laplace_values():
    assert pc.radial_integral(0, 1) == pytest.approx(math.pi / 2, rel=1e-12)
    assert pc.radial_integral(1, 2) == pytest.approx(0.5, rel=1e-12)
    with pytest.raises(ValueError):
        pc.radial_integral(1, 1)
    ratios = [pc.laplace_In(2, b)[2] for b in (1e2, 1e3, 1e4)]
    assert all(r > 1 for r in ratios)
    assert ratios[0] > ratios[1] > ratios[2]
    assert abs(ratios[-1] - 1) < 1e-3


def test_envelope_constant():
    assert pc.envelope_constant() == pytest.approx(1.0, abs=1e-9)


@pytest.mark.filterwarnings("ignore::scipy.integrate.IntegrationWarning")
def test_chain_bound_degenerates_at_critical_beta():
    hs = [pc.cauchy_h_lower_bound(1, 1 + d, 1.0).h for d in (1e-1, 1e-2, 1e-3)]
    assert hs[0] > hs[1] > hs[2]
    assert hs[2] <= (1e-3) / 6 * (1 + 1e-9)
    with pytest.raises(ValueError):
        pc.cauchy_h_lower_bound(2, 2.0, 1.0)
    with pytest.raises(ValueError):
        pc.cauchy_h_lower_bound(1, 2.0, 0.0)


def test_chain_estimate_validates(cauchy2):
    est = pc.cauchy_chain_estimate(cauchy2)
    assert est.validated and est.method == "CauchyChain"
    d = est.details
    assert est.h_candidate == pytest.approx(min(1.0, d["w_scale"]) * d["h_raw"])
    assert d["C_kappa"] == d["C_kappa_empirical"]
    blob = json.loads(est.to_json())
    assert "margins" not in blob and blob["family_hash"] == pc.family_hash()


def test_search_h_ball(ball2):
    est = pc.search_h(ball2)
    assert est.validated and est.method == "NumericalSearch"
    assert est.h_candidate == pytest.approx(0.9 * est.details["h_max_family"])
    assert not pc.verify_weighted_poincare(ball2, 1.01 * est.details["h_max_family"]).validated


@given(st.floats(0, 1e4), st.floats(0, 1e4))
def test_F_product_bound(a, b):
    lhs, rhs = F(a * b), max(a, a * a) * F(b)
    assert lhs <= rhs * (1 + 1e-12) + 1e-300


@given(st.floats(0, 1e12))
def test_F_twelfth(t):
    assert F(t / 12) <= F(t) / 3 * (1 + 1e-12)


@given(st.floats(0, 1e6), st.floats(0, 1e6))
def test_F_monotone(a, b):
    assume(a <= b)
    assert F(a) <= F(b)
