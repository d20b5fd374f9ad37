"""Transport-entropy inequalities, their remainder forms and the linearized Brascamp-Lieb forms.

n = 1 runs on the precision path: densities on a grid, the monotone map, Simpson
quadrature.  n = 2, 3 use tensor-grid atoms and the exact LP with a looser tolerance.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field, replace
from typing import Callable, Optional, Sequence

import numpy as np
from scipy import integrate

from .functionals import (LEMMA_C, CostSpec, G_scalar, cost_c, cost_total, cost_tilde,
                          psi, relative_entropy)
from .measures import (Case, DensityGrid1D, DensityModel, DiscreteMeasure, axis_rule,
                       density_grid, model_grid, pdf, tail_radius, tensor_quadrature)
from .transport import (monotone_map_1d, quantile_atoms, solve_discrete_ot,
                        transport_cost_along_map)

__all__ = [
    "TOL_1D",
    "TOL_ND",
    "PerturbationSpec",
    "build_perturbation",
    "perturbed_grid",
    "quadrature_cloud",
    "InequalityCase",
    "HNotValidatedError",
    "verify_thm1",
    "decomposition_check",
    "verify_thm2",
    "verify_thm3",
    "remainder_check",
    "LinearizationResult",
    "entropy_linearization",
    "transport_linearization_lb",
    "TestFunction",
    "polynomial_test_function",
    "bounded_test_functions",
    "orthogonalize",
    "bl_integrable",
    "verify_bl",
    "verify_bl_quant",
]

TOL_1D = 1e-6
TOL_ND = 1e-3
GRID_1D = 4097
GRID_TAIL = 1e-9


class HNotValidatedError(ValueError):
    """Raised when a remainder inequality is asked to run with an uncertified h."""


# -- 1D quadrature against the model -------------------------------------------------


def _quad_model(func, m: DensityModel, points: Sequence[float] = ()) -> float:
    """int func(x) pdf(x) dx over the real line (n = 1), by adaptive quadrature."""
    f = lambda t: float(func(np.array([t]))[0] * pdf(m, np.array([t]))[0])
    kw = dict(epsabs=1e-15, epsrel=1e-12, limit=500)
    # near-zero moments (odd integrands) cannot meet the relative target; that is fine
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", integrate.IntegrationWarning)
        if m.case is Case.CASE1:
            R = m.support_radius()
            pts = sorted(p for p in points if -R < p < R)
            return integrate.quad(f, -R, R, points=pts or None, **kw)[0]
        a = 8.0 * m.length_scale
        a = max(a, *(abs(p) + 1.0 for p in points)) if points else a
        pts = sorted(p for p in points if -a < p < a)
        mid = integrate.quad(f, -a, a, points=pts or None, **kw)[0]
        return mid + integrate.quad(f, a, np.inf, **kw)[0] + integrate.quad(f, -np.inf, -a, **kw)[0]


def _dense_nodes(m: DensityModel, size: int = 20001) -> np.ndarray:
    if m.case is Case.CASE1:
        R = m.support_radius()
        return np.linspace(-R, R, size)
    s = np.linspace(-math.pi / 2, math.pi / 2, size)[1:-1]
    return m.length_scale * np.tan(s)


# -- perturbations -------------------------------------------------------------------


def _pts(x, dim):
    x = np.asarray(x, dtype=float)
    if dim == 1 and (x.ndim <= 1 or x.shape[-1] != 1):
        x = x[..., None]
    return x


@dataclass(frozen=True)
class PerturbationSpec:
    """Direction g (bounded, mean zero under the model) and step epsilon.

    ``g`` and ``grad`` take points of shape (..., n); for n = 1 plain arrays of
    coordinates are accepted too.
    """

    g: Callable = field(repr=False)
    epsilon: float
    match_center_of_mass: bool
    label: str
    dim: int = 1
    grad: Optional[Callable] = field(default=None, repr=False)
    params: dict = field(default_factory=dict, compare=False)

    def __call__(self, x):
        return self.g(_pts(x, self.dim))

    def derivative(self, x):
        """g' for n = 1."""
        if self.grad is None:
            raise ValueError("this perturbation has no derivative")
        return self.grad(_pts(x, self.dim))[..., 0]

    def factor(self, x):
        return 1.0 + self.epsilon * self(x)

    def with_epsilon(self, epsilon: float) -> "PerturbationSpec":
        return replace(self, epsilon=epsilon)


def _profile(kind: str, params: dict, L: float):
    """Raw direction (value, gradient) on points (..., n)."""
    if kind == "bump":
        c = np.atleast_1d(np.asarray(params["center"], dtype=float)) * L
        w = float(params["width"]) * L

        def val(X):
            s2 = np.sum((X - c) ** 2, axis=-1) / w ** 2
            out = np.zeros(s2.shape)
            inside = s2 < 1
            out[inside] = np.exp(1.0 - 1.0 / (1.0 - s2[inside]))
            return out

        def grad(X):
            s2 = np.sum((X - c) ** 2, axis=-1) / w ** 2
            fac = np.zeros(s2.shape)
            inside = s2 < 1
            si = s2[inside]
            fac[inside] = np.exp(1.0 - 1.0 / (1.0 - si)) * (-2.0 / (1.0 - si) ** 2) / w ** 2
            return fac[..., None] * (X - c)

        return val, grad
    if kind == "odd":
        def val(X):
            T = X / L
            return T[..., 0] * np.exp(-0.5 * np.sum(T * T, axis=-1))

        def grad(X):
            T = X / L
            e = np.exp(-0.5 * np.sum(T * T, axis=-1))
            out = -(T[..., 0] * e)[..., None] * T / L
            out[..., 0] += e / L
            return out

        return val, grad
    if kind == "even":
        def val(X):
            T = X / L
            return np.exp(-0.5 * np.sum(T * T, axis=-1))

        def grad(X):
            T = X / L
            return -np.exp(-0.5 * np.sum(T * T, axis=-1))[..., None] * T / L

        return val, grad
    raise ValueError(f"unknown perturbation family {kind!r}")


def _constraint_basis(m: DensityModel, match: bool):
    """Bounded functions (value, gradient) spanning the corrections: d, and x_k d when matching."""
    n, L = m.dim, m.length_scale
    if m.case is Case.CASE2:
        d = lambda X: 1.0 / (1.0 + np.sum(X * X, axis=-1) / L ** 2)
        dd = lambda X: (-2.0 / L ** 2) * (d(X) ** 2)[..., None] * X
    else:
        d = lambda X: np.ones(X.shape[:-1])
        dd = lambda X: np.zeros(X.shape)
    basis = [(d, dd)]
    if match:
        for k in range(n):
            def bk(X, k=k):
                return X[..., k] * d(X) / L

            def gk(X, k=k):
                out = X[..., k][..., None] * dd(X) / L
                out[..., k] += d(X) / L
                return out

            basis.append((bk, gk))
    return basis


def _moment(func, m, reference, points=()):
    if reference is not None:
        return float(reference.weights @ func(reference.points))
    if m.dim != 1:
        raise ValueError("n >= 2 perturbations need a reference grid measure")
    return _quad_model(lambda t: func(t[..., None]), m, points)


def build_perturbation(m: DensityModel, family: str, epsilon: float,
                       match_center_of_mass: bool = False, params: Optional[dict] = None,
                       seed: Optional[int] = None,
                       reference: Optional[DiscreteMeasure] = None) -> PerturbationSpec:
    """Bounded direction g with int g rho = 0 (and int x g rho = 0 when matching), sup|g| = 1.

    The raw profile is corrected by an oblique projection onto bounded functions
    (1, or 1/(1 + |x|^2) for heavy tails, and x_k times that when matching the center
    of mass), which keeps 1 + eps g >= 1 - eps.  Moments are taken by adaptive
    quadrature (n = 1) or exactly on ``reference`` (n >= 2, default: the model's
    quadrature cloud).
    """
    if not 0 <= epsilon < 1:
        raise ValueError("epsilon must lie in [0, 1) so that 1 + eps g >= 0")
    n, L = m.dim, m.length_scale
    if n >= 2 and reference is None:
        reference = quadrature_cloud(m)
    params = dict(params or {})
    if family == "bump" and "center" not in params:
        rng = np.random.default_rng(seed)
        params["center"] = [float(v) for v in rng.uniform(-0.5, 0.5, n)]
        params["width"] = float(rng.uniform(0.5, 1.5))
    val, grad = _profile(family, params, L)
    basis = _constraint_basis(m, match_center_of_mass)
    tests = [lambda X: np.ones(X.shape[:-1])]
    if match_center_of_mass:
        tests += [lambda X, k=k: X[..., k] for k in range(n)]
    kinks = ()
    if family == "bump" and n == 1:
        c, w = params["center"][0] * L, params["width"] * L
        kinks = (c - w, c, c + w)
        params["kinks"] = list(kinks)
    A = np.array([[_moment(lambda X: t(X) * b(X), m, reference) for b, _ in basis] for t in tests])
    rhs = np.array([_moment(lambda X: t(X) * val(X), m, reference, kinks) for t in tests])
    coef = np.linalg.solve(A, rhs)

    def g0(X):
        return val(X) - sum(c * b(X) for c, (b, _) in zip(coef, basis))

    def dg0(X):
        return grad(X) - sum(c * gb(X) for c, (_, gb) in zip(coef, basis))

    nodes = reference.points if reference is not None else _dense_nodes(m)[:, None]
    sup = float(np.max(np.abs(g0(nodes))))
    if n == 1 and m.case is Case.CASE2:
        # the corrections tend to constants at infinity; include the limit
        far = np.array([[1e12 * L], [-1e12 * L]])
        sup = max(sup, float(np.max(np.abs(g0(far)))))
    if not sup > 0:
        raise ValueError("perturbation vanishes identically")
    g = lambda X: g0(X) / sup
    dg = lambda X: dg0(X) / sup
    spec = PerturbationSpec(g, float(epsilon), match_center_of_mass, family, n, dg,
                            {**params, "family": family})
    _check_moments(spec, m, reference, kinks)
    return spec


def _check_moments(spec: PerturbationSpec, m, reference, kinks=()):
    scale = m.length_scale
    mass = _moment(spec.g, m, reference, kinks)
    if abs(mass) > 1e-10:
        raise ValueError(f"perturbation has mean {mass:.3e}, not 0")
    if spec.match_center_of_mass:
        for k in range(m.dim):
            mk = _moment(lambda X: X[..., k] * spec.g(X), m, reference, kinks)
            if abs(mk) > 1e-10 * scale:
                raise ValueError(f"perturbation shifts the center of mass by {mk:.3e}")


def perturbed_grid(m: DensityModel, pert: PerturbationSpec, x) -> DensityGrid1D:
    return DensityGrid1D(x, lambda t: pdf(m, t) * pert.factor(t))


# -- records -------------------------------------------------------------------------


@dataclass
class InequalityCase:
    suite: str
    case_id: str
    model_id: str
    lhs: float
    rhs: float
    tolerance: float
    params: dict = field(default_factory=dict)
    seed: Optional[int] = None
    extra: dict = field(default_factory=dict)

    @property
    def margin(self) -> float:
        return self.lhs - self.rhs

    @property
    def passed(self) -> bool:
        return bool(self.margin >= -self.tolerance)


ATOMS = {2: 45, 3: 12}
FINE = {2: 401, 3: 81}
_CLOUDS: dict = {}
_ATOMS: dict = {}


def _key(m):
    return (m.model_id, m.normalized, m.scale_factor)


def quadrature_cloud(m: DensityModel) -> DiscreteMeasure:
    """Fine tensor-quadrature cloud of the model (n >= 2), cached per model."""
    k = _key(m)
    if k not in _CLOUDS:
        _CLOUDS[k] = tensor_quadrature(m, FINE[m.dim], GRID_TAIL)
    return _CLOUDS[k]


def _atoms(m: DensityModel, pert: Optional[PerturbationSpec] = None) -> DiscreteMeasure:
    k = ATOMS[m.dim]
    x, w = axis_rule(m, 2 * FINE[m.dim] - 1, GRID_TAIL)
    if pert is None:
        key = _key(m)
        if key not in _ATOMS:
            _ATOMS[key] = quantile_atoms(lambda X: pdf(m, X), [x] * m.dim, [w] * m.dim, k)
        return _ATOMS[key]
    return quantile_atoms(lambda X: pdf(m, X) * pert.factor(X), [x] * m.dim, [w] * m.dim, k)


def _prepare(m: DensityModel, rho):
    """Normalize the target: a DensityGrid1D for n = 1, a PerturbationSpec for n >= 2."""
    if not m.normalized:
        raise ValueError("model must be normalized")
    if isinstance(rho, PerturbationSpec):
        if rho.dim != m.dim:
            raise ValueError("perturbation and model dimensions differ")
        if m.dim == 1:
            return perturbed_grid(m, rho, model_grid(m, GRID_1D, GRID_TAIL))
        if m.dim not in ATOMS:
            raise ValueError("transport verification supports n <= 3")
        return rho
    if isinstance(rho, DensityGrid1D):
        if m.dim != 1:
            raise ValueError("a DensityGrid1D target needs a 1D model")
        return rho
    raise TypeError("rho must be a DensityGrid1D (n = 1) or a PerturbationSpec")


def _check_1d_grid(m: DensityModel, rho):
    if m.dim != 1:
        raise ValueError("expected a 1D model")
    if not isinstance(rho, DensityGrid1D):
        raise TypeError("this check takes a DensityGrid1D")


def _transport_cost(m: DensityModel, rho, spec: CostSpec, tmap=None):
    """W_cost(rho_model, rho): monotone map for n = 1, LP on quantile atoms otherwise."""
    if m.dim == 1:
        tmap = tmap or monotone_map_1d(density_grid(m, rho.x), rho)
        return transport_cost_along_map(tmap, lambda x, y: cost_total(x, y, spec))
    src, tgt = _atoms(m), _atoms(m, rho)
    C = cost_total(src.points[:, None, :], tgt.points[None, :, :], spec, extend=True)
    return solve_discrete_ot(src, tgt, np.maximum(C, 0.0)).total_cost


def _entropy(m, rho):
    if m.dim == 1:
        return relative_entropy(rho, m)
    q = quadrature_cloud(m)
    return float(q.weights @ (m.W(q.points) * psi(rho.factor(q.points), m.kappa)))


def _tol(m, tol):
    return tol if tol is not None else (TOL_1D if m.dim == 1 else TOL_ND)


def verify_thm1(m: DensityModel, rho, tol: Optional[float] = None, case_id: str = "",
                params: Optional[dict] = None, seed: Optional[int] = None) -> InequalityCase:
    """H(rho || rho_model) >= W_c(rho_model, rho).

    ``rho`` is a DensityGrid1D (n = 1) or a PerturbationSpec; for n >= 2 the entropy
    comes from a fine tensor quadrature and W_c from the exact LP between quantile atoms.
    """
    rho = _prepare(m, rho)
    lhs = _entropy(m, rho)
    rhs = _transport_cost(m, rho, CostSpec.for_model(m))
    return InequalityCase("thm1", case_id, m.model_id, lhs, rhs, _tol(m, tol),
                          dict(params or {}), seed)


def decomposition_check(m: DensityModel, rho: DensityGrid1D) -> dict:
    """Residual of H = int c(x, T x) rho0 + int W G_k(T') rho0 on the grid (n = 1)."""
    rho = _prepare(m, rho)
    _check_1d_grid(m, rho)
    src = density_grid(m, rho.x)
    tmap = monotone_map_1d(src, rho)
    spec = CostSpec.for_model(m)
    H = relative_entropy(rho, m)
    x = tmap.grid
    term_c = transport_cost_along_map(tmap, lambda a, b: cost_c(a, b, spec))
    W = m.W(x)
    live = (W > 0) & (tmap.source_density > 0)
    Gv = np.zeros_like(x)
    Gv[live] = G_scalar(tmap.dT[live], m.kappa)
    term_g = float(integrate.simpson(W * Gv * tmap.source_density, x=x))
    return {"entropy": H, "transport_term": term_c, "hessian_term": term_g,
            "residual": abs(H - term_c - term_g), "grid": len(x)}


def _resolve_h(h) -> float:
    if hasattr(h, "validated"):
        if not h.validated:
            raise HNotValidatedError(f"h = {h.h_candidate:g} was not validated ({h.method}); refusing")
        return float(h.h_candidate)
    if isinstance(h, (int, float)) and h == 0:
        return 0.0
    raise HNotValidatedError("pass a validated PoincareEstimate (or h = 0)")


def _center_matched(m, rho):
    if m.dim == 1:
        x = rho.x
        v = rho.values
        mass = integrate.simpson(v, x=x)
        shift = integrate.simpson(x * (v - pdf(m, x)), x=x) / mass
        return abs(shift) <= 1e-7 * m.length_scale
    q = quadrature_cloud(m)
    shift = (q.weights * rho(q.points)) @ q.points
    return bool(np.all(np.abs(rho.epsilon * shift) <= 1e-9 * m.length_scale))


def _remainder_case(suite, m, rho, h, c, tol, case_id, params, seed):
    hv = _resolve_h(h)
    rho = _prepare(m, rho)
    if not _center_matched(m, rho):
        raise ValueError("rho and the model must have the same center of mass")
    tmap = monotone_map_1d(density_grid(m, rho.x), rho) if m.dim == 1 else None
    lhs = _entropy(m, rho)
    base = CostSpec.for_model(m, c=c, h=hv)
    rhs1 = _transport_cost(m, rho, base, tmap)
    rhs = _transport_cost(m, rho, replace(base, combined=True), tmap)
    extra = {"h": hv, "c": c, "rhs_thm1": rhs1, "tilde_prefactor": base.tilde_prefactor}
    return InequalityCase(suite, case_id, m.model_id, lhs, rhs, _tol(m, tol),
                          dict(params or {}), seed, extra)


def verify_thm2(m: DensityModel, rho, h, c: float = LEMMA_C, tol: Optional[float] = None,
                case_id: str = "", params=None, seed=None) -> InequalityCase:
    """H(rho || rho_model) >= W_{c + c~}(rho_model, rho) for Case 1, equal centers of mass."""
    if m.case is not Case.CASE1:
        raise ValueError("the Case 1 remainder form needs a Case 1 model")
    return _remainder_case("thm2", m, rho, h, c, tol, case_id, params, seed)


def verify_thm3(m: DensityModel, rho, h, c: float = LEMMA_C, tol: Optional[float] = None,
                case_id: str = "", params=None, seed=None) -> InequalityCase:
    """Case 2 form, with prefactor (c/beta)(1 - n/beta)^2 on the remainder cost."""
    if m.case is not Case.CASE2:
        raise ValueError("the Case 2 remainder form needs a Case 2 model")
    return _remainder_case("thm3", m, rho, h, c, tol, case_id, params, seed)


def remainder_check(m: DensityModel, rho, h, c: float = LEMMA_C,
                    tol: Optional[float] = None, case_id: str = "", params=None,
                    seed=None) -> InequalityCase:
    """[H - W_c] - W_{c~} >= 0, each cost transported optimally on its own (n = 1)."""
    hv = _resolve_h(h)
    rho = _prepare(m, rho)
    _check_1d_grid(m, rho)
    if not _center_matched(m, rho):
        raise ValueError("rho and the model must have the same center of mass")
    tmap = monotone_map_1d(density_grid(m, rho.x), rho)
    spec = CostSpec.for_model(m, c=c, h=hv)
    H = relative_entropy(rho, m)
    wc = transport_cost_along_map(tmap, lambda a, b: cost_c(a, b, spec))
    wt = transport_cost_along_map(tmap, lambda a, b: cost_tilde(a, b, spec))
    return InequalityCase("remainder", case_id, m.model_id, H - wc, wt, _tol(m, tol),
                          dict(params or {}), seed, {"h": hv, "c": c})


# -- linearization -------------------------------------------------------------------


@dataclass
class LinearizationResult:
    eps: list
    ratios: list
    extrapolated: float
    target: float

    @property
    def rel_error(self) -> float:
        if self.target == 0:
            return abs(self.extrapolated)
        return abs(self.extrapolated - self.target) / abs(self.target)

    @property
    def errors(self) -> list:
        return [abs(r - self.target) for r in self.ratios]


def _richardson(eps, vals):
    """Eliminate the eps, eps^2, ... terms of vals(eps) = a + b eps + ... (eps halving)."""
    eps = np.asarray(eps, dtype=float)
    table = list(np.asarray(vals, dtype=float))
    for k in range(1, len(table)):
        table = [(eps[i] ** k * table[i + 1] - eps[i + k] ** k * table[i])
                 / (eps[i] ** k - eps[i + k] ** k) for i in range(len(table) - 1)]
    return float(table[0])


def _kinks(pert):
    p = pert.params
    if p.get("family") == "bump" and pert.dim == 1:
        return tuple(p.get("kinks", ()))
    return ()


def entropy_linearization(m: DensityModel, g: PerturbationSpec,
                          eps_list=(0.1, 0.05, 0.025, 0.0125)) -> LinearizationResult:
    """H((1 + eps g) rho || rho) / eps^2 -> ((k+1)/2) int g^2 rho^(1+k), via Richardson."""
    if m.dim != 1:
        raise ValueError("entropy linearization runs on n = 1")
    eps_list = [float(e) for e in eps_list]
    if any(b >= a for a, b in zip(eps_list, eps_list[1:])):
        raise ValueError("eps_list must be decreasing")
    nodes = _dense_nodes(m)
    gv = g(nodes)
    if np.any(1.0 + max(eps_list) * gv < 0):
        raise ValueError("1 + eps g < 0 somewhere")
    k = m.kappa
    W = lambda x: m.W(x)
    ratios = []
    for e in eps_list:
        # rho0 W psi(1 + eps g) = rho0 * [W psi]; the quadrature weight is rho0
        val = _quad_model(lambda x: W(x) * psi(1.0 + e * g(x), k), m, _kinks(g))
        ratios.append(val / e ** 2)
    # rho^(1+k) = rho W for a normalized model
    target = 0.5 * (k + 1.0) * _quad_model(lambda x: g(x) ** 2 * W(x), m, _kinks(g))
    if np.all(gv == 0):
        return LinearizationResult(eps_list, ratios, 0.0, 0.0)
    return LinearizationResult(eps_list, ratios, _richardson(eps_list, ratios), target)


def transport_linearization_lb(m: DensityModel, g: PerturbationSpec, f=None, df=None,
                               eps_list=(0.1, 0.05, 0.025, 0.0125), grid: int = GRID_1D):
    """W_c(rho, (1 + eps g) rho) / eps^2 along eps, and the lower bound
    (1/2) (int g f rho)^2 / int H^-1 f'^2 rho with H = ((k+1)/(-k)) W''.

    Defaults to f = g W.  Returns (estimates, lower_bound).
    """
    if m.dim != 1:
        raise ValueError("transport linearization runs on n = 1")
    Wv = lambda x: m.W(x)
    Wp = lambda x: m.w.grad(_pts(x, 1))[..., 0]
    Wpp = lambda x: m.w.hess(_pts(x, 1))[..., 0, 0]
    if f is None:
        f = lambda x: g(x) * Wv(x)
        df = lambda x: g.derivative(x) * Wv(x) + g(x) * Wp(x)
    Hy = lambda x: m.kp.cost_factor * Wpp(x)
    if np.any(Hy(_dense_nodes(m, 2001)) <= 0):
        raise ValueError("H_y must be positive definite")
    num = _quad_model(lambda x: g(x) * f(x), m)
    den = _quad_model(lambda x: df(x) ** 2 / Hy(x), m)
    lb = 0.0 if num == 0 else 0.5 * num ** 2 / den
    x = model_grid(m, grid, tail_mass=GRID_TAIL)
    spec = CostSpec.for_model(m)
    ests = []
    for e in eps_list:
        rho = perturbed_grid(m, g.with_epsilon(e), x)
        ests.append(_transport_cost(m, rho, spec) / e ** 2 if e > 0 else 0.0)
    return ests, lb


# -- Brascamp-Lieb forms -------------------------------------------------------------


@dataclass(frozen=True)
class TestFunction:
    """A 1D direction g with derivative, for the Brascamp-Lieb checks."""

    g: Callable = field(repr=False)
    dg: Callable = field(repr=False)
    label: str
    degree: Optional[int] = None  # growth degree at infinity, None if bounded

    __test__ = False


def polynomial_test_function(coeffs, label: Optional[str] = None) -> TestFunction:
    P = np.polynomial.Polynomial(coeffs)
    deg = P.degree() if np.any(P.coef) else 0
    return TestFunction(lambda x: P(np.asarray(x, dtype=float)),
                        lambda x: P.deriv()(np.asarray(x, dtype=float)),
                        label or f"poly{deg}", deg)


def bounded_test_functions() -> list:
    """Bounded rational directions, usable on every heavy-tailed model."""
    return [
        TestFunction(lambda x: np.asarray(x) ** 2 / (1 + np.asarray(x) ** 2),
                     lambda x: 2 * np.asarray(x) / (1 + np.asarray(x) ** 2) ** 2, "x2/(1+x2)", None),
        TestFunction(lambda x: np.asarray(x) ** 3 / (1 + np.asarray(x) ** 2) ** 1.5,
                     lambda x: 3 * np.asarray(x) ** 2 / (1 + np.asarray(x) ** 2) ** 2.5,
                     "x3/(1+x2)^1.5", None),
        TestFunction(lambda x: np.asarray(x) / (1 + np.asarray(x) ** 2),
                     lambda x: (1 - np.asarray(x) ** 2) / (1 + np.asarray(x) ** 2) ** 2, "x/(1+x2)", None),
    ]


def orthogonalize(m: DensityModel, tf: TestFunction, against_linear: bool = False) -> TestFunction:
    """Subtract the L2(rho) projection onto {1} (or {1, x})."""
    basis = [lambda x: np.ones_like(np.asarray(x, dtype=float))]
    dbasis = [lambda x: np.zeros_like(np.asarray(x, dtype=float))]
    if against_linear:
        basis.append(lambda x: np.asarray(x, dtype=float))
        dbasis.append(lambda x: np.ones_like(np.asarray(x, dtype=float)))
    G = np.array([[_quad_model(lambda x: a(x) * b(x), m) for b in basis] for a in basis])
    r = np.array([_quad_model(lambda x: a(x) * tf.g(x), m) for a in basis])
    coef = np.linalg.solve(G, r)
    g = lambda x: tf.g(x) - sum(c * b(x) for c, b in zip(coef, basis))
    dg = lambda x: tf.dg(x) - sum(c * b(x) for c, b in zip(coef, dbasis))
    suffix = "_perp01" if against_linear else "_perp0"
    degree = tf.degree
    if against_linear and abs(coef[1]) > 1e-14:
        # the linear correction sets the growth at infinity
        degree = max(degree or 0, 1)
    return TestFunction(g, dg, tf.label + suffix, degree)


def bl_integrable(m: DensityModel, tf: TestFunction) -> bool:
    """Finiteness of int g^2 W rho and int f'^2 rho for a degree-k growth on a Case 2 model."""
    if m.case is Case.CASE1 or tf.degree is None:
        return True
    return 2 * m.beta - 2 * tf.degree - 2 > m.dim


def _bl_parts(m: DensityModel, tf: TestFunction, shift: float, truncate: Optional[float]):
    Wv = lambda x: m.W(x)
    Wp = lambda x: m.w.grad(_pts(x, 1))[..., 0]
    Wpp = lambda x: m.w.hess(_pts(x, 1))[..., 0, 0]
    sign = -1.0 if m.case is Case.CASE1 else 1.0
    df = lambda x: tf.dg(x) * Wv(x) + tf.g(x) * Wp(x)
    lhs_int = lambda x: df(x) ** 2 / (sign * Wpp(x) + shift)
    rhs_int = lambda x: tf.g(x) ** 2 * Wv(x)
    if truncate is None:
        return _quad_model(lhs_int, m), m.beta * _quad_model(rhs_int, m)
    kw = dict(epsabs=1e-15, epsrel=1e-12, limit=500)
    q = lambda fn: integrate.quad(lambda t: float(fn(np.array([t]))[0] * pdf(m, np.array([t]))[0]),
                                  -truncate, truncate, points=[0.0], **kw)[0]
    return q(lhs_int), m.beta * q(rhs_int)


def verify_bl(m: DensityModel, tf: TestFunction, tol: float = 1e-9, case_id: str = "",
              truncate: Optional[float] = None) -> InequalityCase:
    """int (sign D^2 W)^-1 f'^2 rho >= beta int g^2 W rho with f = g W (n = 1).

    Non-integrable directions are evaluated on [-truncate, truncate] (default: the
    1e-6 quantile box) and flagged ``divergent``.
    """
    if m.dim != 1:
        raise ValueError("Brascamp-Lieb checks run on n = 1")
    if abs(_quad_model(tf.g, m)) > 1e-9:
        raise ValueError("g must have mean zero")
    divergent = not bl_integrable(m, tf)
    if divergent and truncate is None:
        truncate = tail_radius(m, 1e-6)
    lhs, rhs = _bl_parts(m, tf, 0.0, truncate if divergent else None)
    extra = {"divergent": divergent, "truncate": truncate if divergent else None}
    return InequalityCase("bl", case_id, m.model_id, lhs, rhs, tol, {"g": tf.label}, None, extra)


def bl_shift(m: DensityModel, h: float, c: float = LEMMA_C, h_power: int = 1) -> float:
    """Diagonal shift of the quantitative forms: c h / (beta + 1) or c (1 - n/beta)^2 h / (beta (beta - 1))."""
    b, n = m.beta, m.dim
    hh = h ** h_power
    if m.case is Case.CASE1:
        return c * hh / (b + 1.0)
    return c / (b * (b - 1.0)) * (1.0 - n / b) ** 2 * hh


def verify_bl_quant(m: DensityModel, tf: TestFunction, h, c: float = LEMMA_C, tol: float = 1e-9,
                    case_id: str = "", h_power: int = 1) -> InequalityCase:
    """Shifted-inverse form with moment conditions int g rho = int x g rho = 0.

    ``h_power`` = 1 uses the shift exactly as stated (linear in h); 2 uses the h^2
    that the second-order expansion of F(h|y - x|) produces.
    """
    hv = _resolve_h(h)
    if m.dim != 1:
        raise ValueError("Brascamp-Lieb checks run on n = 1")
    if abs(_quad_model(tf.g, m)) > 1e-9 or abs(_quad_model(lambda x: x * tf.g(x), m)) > 1e-9:
        raise ValueError("g must satisfy int g rho = 0 and int x g rho = 0")
    if not bl_integrable(m, tf):
        raise ValueError(f"{tf.label} is not integrable against this model")
    s = bl_shift(m, hv, c, h_power)
    lhs, rhs = _bl_parts(m, tf, s, None)
    lhs5, _ = _bl_parts(m, tf, 0.0, None)
    extra = {"h": hv, "c": c, "shift": s, "lhs_thm5": lhs5, "h_power": h_power}
    suite = "bl-quant"
    return InequalityCase(suite, case_id, m.model_id, lhs, rhs, tol, {"g": tf.label}, None, extra)
