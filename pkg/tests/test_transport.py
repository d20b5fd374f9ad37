import itertools
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from convex_transport.functionals import CostSpec, cost_c
from convex_transport.inequalities import build_perturbation, perturbed_grid
from convex_transport.measures import DensityGrid1D, DiscreteMeasure, density_grid, model_grid
from convex_transport.transport import (
    MAX_ATOMS, ma_residual, monotone_map_1d, quantile_atoms, quantile_coupling_cost,
    solve_discrete_ot, transport_cost_along_map, wasserstein_p,
)


def uniform_cloud(pts):
    pts = np.asarray(pts, dtype=float)
    pts = pts[:, None] if pts.ndim == 1 else pts
    return DiscreteMeasure(pts, np.full(len(pts), 1.0 / len(pts)))


def brute_force(C):
    n = C.shape[0]
    return min(sum(C[i, p[i]] for i in range(n)) for p in itertools.permutations(range(n))) / n


def test_identical_measures_zero_cost():
    mu = uniform_cloud([0.0, 1.0, 2.0])
    C = np.abs(mu.points - mu.points.T) ** 2
    plan = solve_discrete_ot(mu, mu, C)
    assert plan.total_cost == 0 and plan.certified


def test_dirac_pair():
    a, b = uniform_cloud([0.0]), uniform_cloud([1.0])
    assert solve_discrete_ot(a, b, np.array([[1.0]])).total_cost == 1.0
    assert wasserstein_p(uniform_cloud([0.0]), uniform_cloud([2.5]), 2) == pytest.approx(6.25)


def test_lp_matches_permutation_oracle():
    rng = np.random.default_rng(0)
    for _ in range(20):
        mu = uniform_cloud(rng.normal(size=(4, 2)))
        nu = uniform_cloud(rng.normal(size=(4, 2)))
        C = rng.uniform(0, 5, (4, 4))
        plan = solve_discrete_ot(mu, nu, C)
        assert plan.total_cost == pytest.approx(brute_force(C), rel=1e-12)
        assert plan.certified
        assert plan.marginal_error() <= 1e-10


def test_solver_rejects_bad_input():
    mu = uniform_cloud([0.0, 1.0])
    nu = DiscreteMeasure(np.array([[0.0], [1.0]]), np.array([0.3, 0.7]))
    with pytest.raises(ValueError):
        solve_discrete_ot(mu, nu, -np.ones((2, 2)))
    with pytest.raises(ValueError):
        solve_discrete_ot(mu, nu, np.ones((3, 2)))
    big = uniform_cloud(np.arange(MAX_ATOMS + 1.0))
    with pytest.raises(ValueError):
        solve_discrete_ot(big, big, np.zeros((MAX_ATOMS + 1, MAX_ATOMS + 1)))


def test_plan_csv(tmp_path):
    rng = np.random.default_rng(2)
    mu, nu = uniform_cloud(rng.normal(size=5)), uniform_cloud(rng.normal(size=5))
    plan = solve_discrete_ot(mu, nu, (mu.points - nu.points.T) ** 2)
    path = tmp_path / "plan.csv"
    plan.to_csv(path)
    rows = path.read_text().splitlines()
    assert rows[0] == "i,j,mass"
    assert sum(float(r.split(",")[2]) for r in rows[1:]) == pytest.approx(1.0, abs=1e-14)


def _random_1d(rng, k):
    x = np.sort(rng.normal(size=k) * rng.uniform(0.5, 2))
    w = rng.uniform(0.1, 1.0, k)
    return DiscreteMeasure(x[:, None], w / w.sum())


def test_quantile_matches_lp():
    rng = np.random.default_rng(4)
    for _ in range(20):
        mu, nu = _random_1d(rng, 128), _random_1d(rng, 128)
        for p in (1.0, 2.0, 3.0):
            q = wasserstein_p(mu, nu, p, "quantile")
            lp = wasserstein_p(mu, nu, p, "lp")
            assert q == pytest.approx(lp, rel=1e-4)


@given(st.integers(0, 10_000))
def test_superadditivity_over_costs(seed):
    rng = np.random.default_rng(seed)
    k = int(rng.integers(2, 9))
    mu, nu = _random_1d(rng, k), _random_1d(rng, k)
    C1, C2 = rng.uniform(0, 1, (2, k, k))
    total = solve_discrete_ot(mu, nu, C1 + C2).total_cost
    parts = solve_discrete_ot(mu, nu, C1).total_cost + solve_discrete_ot(mu, nu, C2).total_cost
    assert total >= parts - 1e-9


@given(st.integers(0, 10_000), st.floats(0.01, 100))
def test_cost_scaling(seed, lam):
    rng = np.random.default_rng(seed)
    mu, nu = _random_1d(rng, 6), _random_1d(rng, 6)
    C = rng.uniform(0, 1, (6, 6))
    a = solve_discrete_ot(mu, nu, lam * C).total_cost
    b = lam * solve_discrete_ot(mu, nu, C).total_cost
    assert a == pytest.approx(b, rel=1e-12, abs=1e-300)


def test_monotone_map_identity(cauchy2):
    x = model_grid(cauchy2, 1025, 1e-9)
    g = density_grid(cauchy2, x)
    t = monotone_map_1d(g, g)
    assert np.max(np.abs(t.T - x)) <= 1e-10 * max(1, np.abs(x).max())
    assert np.all(np.diff(t.T) >= 0)


def test_monotone_map_uniform_scaling():
    x = np.linspace(0, 1, 1001)
    src = DensityGrid1D(x, lambda t: np.ones_like(np.asarray(t, dtype=float)))
    tgt = DensityGrid1D(2 * x, lambda t: 0.5 * np.ones_like(np.asarray(t, dtype=float)))
    t = monotone_map_1d(src, tgt)
    assert np.max(np.abs(t.T - 2 * x)) <= 1e-8
    assert ma_residual(t, src, tgt) <= 1e-12
    # translation: W_2^2 = shift^2
    tr = DensityGrid1D(x + 0.3, lambda t: np.ones_like(np.asarray(t, dtype=float)))
    tm = monotone_map_1d(src, tr)
    assert transport_cost_along_map(tm, lambda a, b: (a - b) ** 2) == pytest.approx(0.09, abs=1e-6)


def _perturbed_pair(m, size):
    x = model_grid(m, size, 1e-9)
    g = build_perturbation(m, "odd", 0.1)
    return density_grid(m, x), perturbed_grid(m, g, x)


def test_pushforward_cdf_residual(cauchy2):
    src, tgt = _perturbed_pair(cauchy2, 4097)
    t = monotone_map_1d(src, tgt)
    F_src = np.concatenate([[0], np.cumsum(src.cell_masses())]) / src.total()
    # target CDF at T(x): whole cells left of T plus the partial cell
    cum = np.concatenate([[0], np.cumsum(tgt.cell_masses())])
    k = np.clip(np.searchsorted(tgt.x, t.T, side="right") - 1, 0, len(tgt.x) - 2)
    F_tgt = (cum[k] + tgt.partial_mass(tgt.x[k], t.T)) / tgt.total()
    assert np.max(np.abs(F_src - F_tgt)) <= 1e-6


def test_ma_residual_second_order(cauchy2):
    r = []
    for size in (1025, 2049, 4097):
        src, tgt = _perturbed_pair(cauchy2, size)
        r.append(ma_residual(monotone_map_1d(src, tgt), src, tgt))
    assert r[2] < r[1] < r[0]
    assert r[2] / r[1] < 0.35  # ~1/4 for a second-order method


def test_map_cost_matches_lp(cauchy2):
    src, tgt = _perturbed_pair(cauchy2, 4097)
    spec = CostSpec.for_model(cauchy2)
    cost = lambda a, b: cost_c(a, b, spec)
    along = transport_cost_along_map(monotone_map_1d(src, tgt), cost)
    # LP oracle on 1500 equal-mass quantile atoms of each density
    k = 1500
    from convex_transport.measures import axis_rule
    xs, ws = axis_rule(cauchy2, 4001, 1e-9)
    mu = quantile_atoms(lambda X: src(X[..., 0]), [xs], [ws], k)
    nu = quantile_atoms(lambda X: tgt(X[..., 0]), [xs], [ws], k)
    C = np.maximum(cost(mu.points[:, None, :], nu.points[None, :, :]), 0.0)
    lp = solve_discrete_ot(mu, nu, C).total_cost
    assert lp == pytest.approx(along, rel=1e-4)
    assert quantile_coupling_cost(mu, nu, cost) == pytest.approx(lp, rel=1e-12)


def test_quantile_atoms_balanced():
    from convex_transport.measures import axis_rule, parse_model_id, pdf
    m = parse_model_id("cauchy:beta=3,n=2")
    x, w = axis_rule(m, 401, 1e-9)
    atoms = quantile_atoms(lambda X: pdf(m, X), [x, x], [w, w], 20)
    assert len(atoms) == 400
    assert np.allclose(atoms.mean(), 0, atol=1e-8)
