import dataclasses

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from convex_transport import inequalities as iq
from convex_transport.functionals import CostSpec
from convex_transport.measures import density_grid, model_grid, parse_model_id
from convex_transport.poincare import search_h, verify_weighted_poincare


def grid_for(m, size=4097):
    return model_grid(m, size, iq.GRID_TAIL)


@pytest.fixture(scope="module")
def ball_h(ball2):
    return search_h(ball2)


def test_model_against_itself(cauchy2, ball2):
    for m in (cauchy2, ball2):
        case = iq.verify_thm1(m, density_grid(m, grid_for(m)))
        assert abs(case.lhs) <= 1e-12
        assert abs(case.rhs) <= 1e-10
        assert case.passed


@pytest.mark.parametrize("mid", ["cauchy:beta=2,n=1", "ball:sigma=1,beta=2,n=1"])
@pytest.mark.parametrize("family", ["bump", "odd", "even"])
def test_thm1_perturbations(mid, family):
    m = parse_model_id(mid)
    pert = iq.build_perturbation(m, family, 0.2, seed=3)
    case = iq.verify_thm1(m, iq.perturbed_grid(m, pert, grid_for(m)))
    assert case.lhs > 0 and case.rhs > 0
    assert case.passed, case.margin


def test_perturbation_input_checks(cauchy2):
    with pytest.raises(ValueError):
        iq.build_perturbation(cauchy2, "odd", 1.0)
    with pytest.raises(TypeError):
        iq.verify_thm1(cauchy2, np.ones(5))


@settings(max_examples=15)
@given(st.integers(0, 2**31), st.booleans())
def test_perturbation_moments(seed, match):
    m = parse_model_id("cauchy:beta=3,n=1")
    g = iq.build_perturbation(m, "bump", 0.5, match_center_of_mass=match, seed=seed)
    x = iq._dense_nodes(m)
    assert np.max(np.abs(g(x))) <= 1 + 1e-12
    assert np.all(g.factor(x) >= 0.5 - 1e-12)
    assert abs(iq._quad_model(g, m, g.params["kinks"])) <= 1e-10


def test_decomposition_second_order(cauchy2):
    pert = iq.build_perturbation(cauchy2, "odd", 0.1)
    r = [iq.decomposition_check(cauchy2, iq.perturbed_grid(cauchy2, pert, grid_for(cauchy2, n)))
         for n in (2049, 4097)]
    assert r[1]["residual"] <= 1e-4
    assert r[1]["residual"] / r[0]["residual"] <= 0.6
    d = r[1]
    assert d["entropy"] == pytest.approx(d["transport_term"] + d["hessian_term"], abs=1e-6)


def test_unvalidated_h_refused(ball2):
    pert = iq.build_perturbation(ball2, "odd", 0.1, match_center_of_mass=True)
    with pytest.raises(iq.HNotValidatedError):
        iq.verify_thm2(ball2, pert, 0.5)
    bad = verify_weighted_poincare(ball2, 1e6)
    assert not bad.validated
    with pytest.raises(iq.HNotValidatedError):
        iq.verify_thm2(ball2, pert, bad)


def test_thm2_monotone_in_h(ball2, ball_h):
    assert ball_h.validated
    pert = iq.build_perturbation(ball2, "bump", 0.2, match_center_of_mass=True, seed=1)
    full = iq.verify_thm2(ball2, pert, ball_h)
    half = iq.verify_thm2(ball2, pert, dataclasses.replace(ball_h, h_candidate=ball_h.h_candidate / 2))
    zero = iq.verify_thm2(ball2, pert, 0)
    assert full.passed and half.passed
    assert zero.rhs <= half.rhs <= full.rhs
    assert zero.rhs == pytest.approx(zero.extra["rhs_thm1"], abs=1e-14)


def test_remainder_needs_equal_centers(ball2, ball_h):
    pert = iq.build_perturbation(ball2, "odd", 0.2)  # shifts the centre of mass
    with pytest.raises(ValueError, match="center of mass"):
        iq.verify_thm2(ball2, pert, ball_h)


def test_case_mismatch(cauchy2, ball2):
    pert = iq.build_perturbation(cauchy2, "odd", 0.1, match_center_of_mass=True)
    with pytest.raises(ValueError):
        iq.verify_thm2(cauchy2, pert, 0)
    with pytest.raises(ValueError):
        iq.verify_thm3(ball2, pert, 0)


def test_remainder_vanishes_at_critical_beta():
    m = parse_model_id("cauchy:beta=1,n=1")
    assert CostSpec.for_model(m, c=0.3, h=1.0).tilde_prefactor == 0.0


def test_remainder_check(ball2, ball_h):
    pert = iq.build_perturbation(ball2, "even", 0.2, match_center_of_mass=True)
    rc = iq.remainder_check(ball2, pert, ball_h)
    assert rc.rhs > 0 and rc.passed


def test_entropy_linearization_zero_direction(cauchy2):
    zero = iq.PerturbationSpec(lambda X: np.zeros(X.shape[:-1]), 0.0, False, "zero")
    res = iq.entropy_linearization(cauchy2, zero)
    assert res.extrapolated == 0.0 and res.target == 0.0 and res.rel_error == 0.0


def test_entropy_linearization_limit(cauchy2):
    g = iq.build_perturbation(cauchy2, "odd", 0.0)
    res = iq.entropy_linearization(cauchy2, g)
    assert res.rel_error <= 1e-3
    with pytest.raises(ValueError):
        iq.entropy_linearization(cauchy2, g, (0.05, 0.1))


def test_transport_linearization_bound(ball2):
    g = iq.build_perturbation(ball2, "odd", 0.0)
    ests, lb = iq.transport_linearization_lb(ball2, g, eps_list=(0.1, 0.05))
    assert lb > 0
    assert min(ests) >= lb - 1e-6


def test_bl_linear_ball(ball2):
    tf = iq.orthogonalize(ball2, iq.polynomial_test_function([0.0, 1.0], "x"))
    case = iq.verify_bl(ball2, tf)
    assert case.passed and not case.extra["divergent"]


def test_bl_divergent_flag(cauchy2):
    tf = iq.polynomial_test_function([0.0, 1.0], "x")
    assert not iq.bl_integrable(cauchy2, tf)
    case = iq.verify_bl(cauchy2, tf)
    assert case.extra["divergent"] and case.extra["truncate"] > 0
    m3 = parse_model_id("cauchy:beta=3,n=1")
    assert iq.bl_integrable(m3, tf)
    assert iq.verify_bl(m3, tf).passed


def test_bl_requires_mean_zero(ball2):
    with pytest.raises(ValueError):
        iq.verify_bl(ball2, iq.polynomial_test_function([1.0, 0.0, 1.0]))


def test_orthogonalize_linear_growth():
    m = parse_model_id("cauchy:beta=3,n=1")
    tf = iq.orthogonalize(m, iq.bounded_test_functions()[1], against_linear=True)
    assert tf.degree == 1


def test_bl_quant(ball2, ball_h):
    for tf in (iq.polynomial_test_function([0, 0, 1.0]), iq.bounded_test_functions()[0]):
        tf = iq.orthogonalize(ball2, tf, against_linear=True)
        for p in (1, 2):
            case = iq.verify_bl_quant(ball2, tf, ball_h, h_power=p)
            assert case.passed
            assert case.lhs <= case.extra["lhs_thm5"] * (1 + 1e-12)
    with pytest.raises(ValueError):
        iq.verify_bl_quant(ball2, iq.polynomial_test_function([0, 1.0]), ball_h)


def test_bl_quant_rejects_divergent(cauchy2):
    tf = iq.orthogonalize(cauchy2, iq.polynomial_test_function([0, 0, 0, 1.0]), True)
    with pytest.raises(ValueError, match="integrable"):
        iq.verify_bl_quant(cauchy2, tf, 0)


def test_nd_thm1():
    m = parse_model_id("cauchy:beta=3,n=2")
    case = iq.verify_thm1(m, iq.build_perturbation(m, "bump", 0.2, seed=0))
    assert case.tolerance == iq.TOL_ND
    assert case.passed
