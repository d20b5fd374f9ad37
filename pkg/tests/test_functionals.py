import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from convex_transport import functionals as fn
from convex_transport.functionals import (
    F, CostSpec, G_kappa, G_scalar, SymmetricMatrixSample, cost_c, cost_tilde, cost_total,
    entropy_H, lemma_case1_bound, lemma_case2_bound, log_quadratic_bound, relative_entropy,
    sample_matrices, scalar_log_bound, sphere_norm_constant, sphere_norm_envelope,
    trace_F_sphere_bound,
)
from convex_transport.inequalities import build_perturbation, perturbed_grid
from convex_transport.measures import density_grid, kappa_limit_model, model_grid, parse_model_id, pdf

nonneg = st.floats(0, 1e6, allow_nan=False)


def test_F_values():
    assert F(0.0) == 0.0
    assert F(1.0) == pytest.approx(1 - math.log(2), rel=1e-15)
    with pytest.raises(ValueError):
        F(-0.1)


def test_F_two_sided_bound_dense():
    t = np.linspace(0, 100, 200001)
    m = np.minimum(t, t * t)
    assert np.all(F(t) <= m + 1e-15)
    assert np.all(F(t) >= 0.25 * m - 1e-15)
    assert np.all(np.diff(F(t)) > 0)


@given(nonneg, nonneg, st.floats(0, 1))
def test_F_convex(a, b, lam):
    assert F(lam * a + (1 - lam) * b) <= lam * F(a) + (1 - lam) * F(b) + 1e-12 * (1 + a + b)


def test_cost_closed_forms():
    c = parse_model_id("cauchy:beta=2,n=1", rescale=False)
    b = parse_model_id("ball:sigma=1,beta=1,n=1", rescale=False)
    x, y = np.array([0.3]), np.array([-0.4])
    assert cost_c(x, y, CostSpec.for_model(c)) == pytest.approx(0.49, rel=1e-13)
    assert cost_c(x, y, CostSpec.for_model(b)) == pytest.approx(2 * 0.49, rel=1e-13)
    assert cost_c(x, x, CostSpec.for_model(c)) == 0


def test_cost_case1_outside_support_rejected():
    b = parse_model_id("ball:sigma=1,beta=1,n=1", rescale=False)
    with pytest.raises(ValueError):
        cost_c(np.array([1.5]), np.array([0.0]), CostSpec.for_model(b))


@pytest.mark.parametrize("mid", ["cauchy:beta=3,n=2", "ball:sigma=1,beta=2,n=2"])
def test_cost_nonnegative_random(mid):
    m = parse_model_id(mid)
    rng = np.random.default_rng(0)
    x = rng.uniform(-0.7, 0.7, (100_000, 2))
    y = rng.uniform(-0.7, 0.7, (100_000, 2))
    v = cost_c(x, y, CostSpec.for_model(m))
    assert np.all(v >= 0)
    assert np.all(cost_c(x, x, CostSpec.for_model(m)) <= 1e-12)


def test_cost_tilde():
    b = parse_model_id("ball:sigma=1,beta=2,n=1")
    spec = CostSpec.for_model(b, c=1.0, h=1.0)
    assert cost_tilde(np.array([0.0]), np.array([1.0]), spec) == pytest.approx(1 - math.log(2))
    assert cost_tilde(np.array([0.2]), np.array([0.2]), spec) == 0
    deg = parse_model_id("cauchy:beta=1,n=1")
    assert CostSpec.for_model(deg, h=3.0).tilde_prefactor == 0
    both = CostSpec.for_model(b, h=2.0, combined=True)
    x, y = np.array([0.1]), np.array([-0.5])
    assert cost_total(x, y, both) == pytest.approx(cost_c(x, y, both) + cost_tilde(x, y, both))


def test_case2_tilde_prefactor():
    m = parse_model_id("cauchy:beta=6,n=2")
    assert CostSpec.for_model(m).tilde_prefactor == pytest.approx(0.3 / 6 * (1 - 2 / 6) ** 2)


def _grid_rho(m, eps, family="odd", size=4097):
    g = build_perturbation(m, family, eps)
    return perturbed_grid(m, g, model_grid(m, size, 1e-9))


def test_relative_entropy_zero_at_model(cauchy2):
    x = model_grid(cauchy2, 2049, 1e-9)
    assert abs(relative_entropy(density_grid(cauchy2, x), cauchy2)) < 1e-12


def test_case1_beta_form(ball2):
    # H equals int (beta rho^{1+1/beta} - (beta+1) rho W) + int W^{beta+1}
    from scipy import integrate
    rho = _grid_rho(ball2, 0.2)
    x, r = rho.x, rho.values
    b = ball2.beta
    W = ball2.W(x)
    beta_form = integrate.simpson(b * r ** (1 + 1 / b) - (b + 1) * r * W + W ** (b + 1), x=x)
    assert relative_entropy(rho, ball2) == pytest.approx(beta_form, abs=1e-10)
    H = entropy_H(rho, ball2) - entropy_H(density_grid(ball2, x), ball2)
    assert H == pytest.approx(beta_form, abs=1e-10)


def test_relative_entropy_against_fine_oracle(cauchy2):
    coarse = relative_entropy(_grid_rho(cauchy2, 0.1, size=4097), cauchy2)
    fine = relative_entropy(_grid_rho(cauchy2, 0.1, size=8 * 4096 + 1), cauchy2)
    assert coarse == pytest.approx(fine, abs=1e-6)


def test_relative_entropy_nonnegative_random():
    rng = np.random.default_rng(11)
    for i in range(100):
        mid = ["cauchy:beta=2,n=1", "ball:sigma=1,beta=2,n=1", "cauchy:beta=5,n=1"][i % 3]
        m = parse_model_id(mid)
        fam = ["bump", "odd", "even"][i % 3]
        g = build_perturbation(m, fam, float(rng.uniform(0, 0.3)), seed=i)
        rho = perturbed_grid(m, g, model_grid(m, 513, 1e-9))
        assert relative_entropy(rho, m) >= -1e-9


def test_relative_entropy_kl_limit():
    # shifted Gaussian-limit model: KL(N(a, 1/2) || N(0, 1/2)) = a^2
    m = kappa_limit_model(-1e-4)
    a = 0.3
    x = np.linspace(-12, 12, 20001)
    from convex_transport.measures import DensityGrid1D
    rho = DensityGrid1D(x, lambda t: np.exp(-(np.asarray(t) - a) ** 2) / math.sqrt(math.pi))
    assert relative_entropy(rho, m) == pytest.approx(a * a, abs=1e-3)


def test_entropy_infinite_for_heavy_tails():
    m = parse_model_id("cauchy:beta=1,n=1")
    x = model_grid(m, 257, 1e-6)
    assert entropy_H(density_grid(m, x), m) == math.inf


def test_G_examples():
    assert G_scalar(2.0, -0.5) == pytest.approx(3 - 2 * math.sqrt(2), rel=1e-14)
    for k in (0.5, -0.25, 2.0):
        assert G_kappa(np.eye(3), k) == pytest.approx(0, abs=1e-15)
    with pytest.raises(ValueError):
        G_kappa(np.diag([0.0, 1.0]), 0.5)
    # singular M, kappa < 0: det^(-kappa) extends by 0
    assert G_kappa(np.diag([0.0, 1.0]), -0.5) == pytest.approx(2.0 - 1.0, rel=1e-14)


def test_symmetric_sample_validation():
    s = SymmetricMatrixSample.from_matrix(np.array([[2.0, 0.5], [0.5, 1.0]]))
    assert np.allclose(s.eigenvectors @ np.diag(s.eigenvalues) @ s.eigenvectors.T, s.M, atol=1e-12)
    with pytest.raises(ValueError):
        SymmetricMatrixSample.from_matrix(np.array([[1.0, 2.0], [0.0, 1.0]]))
    with pytest.raises(ValueError):
        SymmetricMatrixSample.from_matrix(np.diag([1.0, -0.5]))
    SymmetricMatrixSample.from_matrix(np.diag([1.0, 0.0]), fn.NONNEGATIVE)


@pytest.mark.parametrize("n", [1, 2, 3, 5])
def test_G_nonnegative_random(n):
    rng = np.random.default_rng(n)
    for b in (1.0, 2.0, 5.0, float(n), 2.0 * n):
        M, _ = sample_matrices(n, 2000, fn.EIG_GT_MINUS_ONE, rng)
        assert G_kappa(M, 1 / b).min() >= -1e-12
        if b >= n:
            M, _ = sample_matrices(n, 2000, fn.NONNEGATIVE, rng)
            assert G_kappa(M, -1 / b).min() >= -1e-12


def test_lemma_case1_examples():
    assert lemma_case1_bound(np.eye(2), 1.0)[2] == pytest.approx(0, abs=1e-15)
    lhs, rhs, margin = lemma_case1_bound(np.array([[2.0]]), 1.0)
    assert (lhs, rhs, margin) == pytest.approx((0.5, 0.3, 0.2), rel=1e-14)
    lhs, rhs, margin = lemma_case1_bound(np.array([[2.0]]), 2.0)
    assert lhs == pytest.approx(math.sqrt(2) - 1, rel=1e-14)
    assert margin == pytest.approx(math.sqrt(2) - 1.3, rel=1e-13)


@pytest.mark.parametrize("n", [1, 3, 5])
@pytest.mark.parametrize("beta", [1.0, 2.0, 10.0])
def test_lemma_case1_random(n, beta):
    M, _ = sample_matrices(n, 3000, fn.EIG_GT_MINUS_ONE, np.random.default_rng(7))
    assert lemma_case1_bound(M, beta)[2].min() >= -1e-12


@pytest.mark.parametrize("n", [1, 2, 4])
@pytest.mark.parametrize("mult", [1, 2, 10])
def test_lemma_case2_random(n, mult):
    M, _ = sample_matrices(n, 3000, fn.NONNEGATIVE, np.random.default_rng(3))
    lhs, rhs, margin = lemma_case2_bound(M, mult * n, n)
    assert margin.min() >= -1e-12
    if mult == 1:
        assert np.all(rhs == 0)


def test_lemma_case2_rejects_small_beta():
    with pytest.raises(ValueError):
        lemma_case2_bound(np.eye(3), 2.0)


def test_scalar_bounds():
    assert scalar_log_bound(0.0) == 0
    assert scalar_log_bound(1.0) == pytest.approx(0.7 - math.log(2), rel=1e-13)
    assert scalar_log_bound(-1.0) == math.inf
    t = np.linspace(-1 + 1e-12, 1000, 1_000_001)
    assert scalar_log_bound(t).min() >= 0
    assert log_quadratic_bound(2.0, 1.0) == pytest.approx(1 - 1 / 8 - math.log(2), rel=1e-13)
    assert log_quadratic_bound(1.7, 1.7) == 0
    rng = np.random.default_rng(0)
    s, u = rng.uniform(1e-9, 100, (2, 100_000))
    assert log_quadratic_bound(s, u).min() >= -1e-12


def test_trace_sphere_examples():
    lhs, rhs, margin, se = trace_F_sphere_bound(np.zeros((2, 2)))
    assert (lhs, rhs, margin) == (0, 0, 0)
    lhs, rhs, margin, se = trace_F_sphere_bound(np.array([[-0.6]]))
    assert margin == pytest.approx(7 / 8 * F(0.6), rel=1e-14)


@pytest.mark.parametrize("n", [2, 3])
def test_trace_sphere_random(n):
    M, _ = sample_matrices(n, 200, fn.EIG_GT_MINUS_ONE, np.random.default_rng(n))
    lhs, rhs, margin, se = trace_F_sphere_bound(M - np.eye(n), rng=np.random.default_rng(1))
    assert np.all(margin >= -3 * se)


def test_sphere_norm_constant():
    assert sphere_norm_constant(1) == pytest.approx(1.0, rel=1e-14)
    assert sphere_norm_constant(2) == pytest.approx(2 / math.pi, rel=1e-14)
    # Monte Carlo oracle for n = 3: E|u_1| = 1/2
    assert sphere_norm_constant(3) == pytest.approx(0.5, rel=1e-14)
    lo, hi = sphere_norm_envelope(200)
    assert 0.79 <= lo and hi <= 1.0
