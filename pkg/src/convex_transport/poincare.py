"""Weighted Poincare inequalities in F-form, the L1 -> F transfer, and the explicit Cauchy chain.

A constant h is only ever certified relative to a fixed, versioned family of test
functions; every estimate records the family hash.
"""

from __future__ import annotations

import hashlib
import json
import math
import warnings
from dataclasses import asdict, dataclass, field
from functools import lru_cache
from typing import Callable, Optional, Sequence

import numpy as np
from scipy import integrate, optimize, special

from .functionals import F
from .measures import Case, DensityModel, DiscreteMeasure, parse_model_id, tensor_quadrature

__all__ = [
    "FAMILY_VERSION",
    "TestFunction1D",
    "test_family",
    "family_hash",
    "quadrature_measure",
    "uniform_measure",
    "median_or_center",
    "PoincareEstimate",
    "verify_weighted_poincare",
    "search_h",
    "proposition1_transfer",
    "CheegerResult",
    "cheeger_l1_check",
    "GeometricMeanRadius",
    "geometric_mean_radius",
    "radial_integral",
    "laplace_In",
    "envelope_constant",
    "CauchyBound",
    "cauchy_h_lower_bound",
    "cauchy_chain_estimate",
]

FAMILY_VERSION = "pf-1"
VALIDATION_TOL = 1e-8
QUAD_SIZE = {1: 20001, 2: 401, 3: 81}


# -- test family ---------------------------------------------------------------------


@dataclass(frozen=True)
class TestFunction1D:
    """f(x) = phi(x_1 / L): a profile on the first coordinate, scaled to the model."""

    label: str
    phi: Callable = field(repr=False, compare=False)
    dphi: Callable = field(repr=False, compare=False)

    __test__ = False

    def value(self, X, L: float = 1.0):
        return self.phi(np.asarray(X)[..., 0] / L)

    def grad_norm(self, X, L: float = 1.0):
        return np.abs(self.dphi(np.asarray(X)[..., 0] / L)) / L


def _sech(t):
    e = np.exp(-np.abs(t))
    return 2 * e / (1 + e * e)


def _decays():
    return [
        ("rat2", lambda t: (1 + t * t) ** -2.0, lambda t: -4 * t * (1 + t * t) ** -3.0),
        ("rat3", lambda t: (1 + t * t) ** -3.0, lambda t: -6 * t * (1 + t * t) ** -4.0),
        ("gauss1", lambda t: np.exp(-t * t / 2), lambda t: -t * np.exp(-t * t / 2)),
        ("gauss2", lambda t: np.exp(-t * t / 8), lambda t: -t / 4 * np.exp(-t * t / 8)),
        ("sech", _sech, lambda t: -np.tanh(t) * _sech(t)),
    ]


def _poly_times(k, d, dd):
    return (lambda t: t ** k * d(t),
            lambda t: k * t ** (k - 1) * d(t) + t ** k * dd(t))


def _bump(c, w, amp=2.0):
    def phi(t):
        s2 = ((np.asarray(t, dtype=float) - c) / w) ** 2
        out = np.zeros(s2.shape)
        inside = s2 < 1
        out[inside] = amp * np.exp(1.0 - 1.0 / (1.0 - s2[inside]))
        return out

    def dphi(t):
        s = (np.asarray(t, dtype=float) - c) / w
        out = np.zeros(s.shape)
        inside = s * s < 1
        si = s[inside]
        out[inside] = amp * np.exp(1.0 - 1.0 / (1.0 - si * si)) * (-2.0 * si / (1.0 - si * si) ** 2) / w
        return out

    return phi, dphi


def _tent(c, w, amp=2.0):
    phi = lambda t: amp * np.maximum(0.0, 1.0 - np.abs(np.asarray(t, dtype=float) - c) / w)
    dphi = lambda t: np.where(np.abs(np.asarray(t, dtype=float) - c) < w,
                              -amp / w * np.sign(np.asarray(t, dtype=float) - c), 0.0)
    return phi, dphi


CENTERS = (-0.6, -0.3, 0.0, 0.3, 0.6)
WIDTHS = (0.15, 0.3, 0.6)


@lru_cache(maxsize=None)
def test_family() -> tuple:
    """The 50 fixed test functions: 20 decaying polynomials, 15 smooth bumps, 15 tents."""
    fam = []
    for k in range(1, 5):
        for name, d, dd in _decays():
            fam.append(TestFunction1D(f"t^{k}*{name}", *_poly_times(k, d, dd)))
    for c in CENTERS:
        for w in WIDTHS:
            fam.append(TestFunction1D(f"bump(c={c:g},w={w:g})", *_bump(c, w)))
    for c in CENTERS:
        for w in WIDTHS:
            fam.append(TestFunction1D(f"tent(c={c:g},w={w:g})", *_tent(c, w)))
    return tuple(fam)


def family_hash(family: Sequence[TestFunction1D] = None) -> str:
    family = test_family() if family is None else family
    text = FAMILY_VERSION + "|" + "|".join(f.label for f in family)
    return hashlib.sha256(text.encode()).hexdigest()[:16]


# -- quadrature measures -------------------------------------------------------------

_QUADS: dict = {}


def quadrature_measure(m: DensityModel, size: Optional[int] = None) -> DiscreteMeasure:
    """Cached probability cloud for expectations under the model."""
    size = size or QUAD_SIZE[m.dim]
    key = (m.model_id, m.scale_factor, size)
    if key not in _QUADS:
        _QUADS[key] = tensor_quadrature(m, size, 1e-12 if m.dim == 1 else 1e-9)
    return _QUADS[key]


def uniform_measure(a: float, b: float, size: int = 20001) -> DiscreteMeasure:
    """Uniform law on [a, b] as a Simpson cloud."""
    x = np.linspace(a, b, size)
    w = np.ones(size)
    w[1:-1:2], w[2:-1:2] = 4.0, 2.0
    return DiscreteMeasure(x[:, None], w / w.sum(), kind="cloud")


def median_or_center(values, mu: DiscreteMeasure, center: str = "median") -> float:
    """mu-median (interpolated between the straddling atoms) or mu-mean of f-values."""
    v = np.asarray(values, dtype=float)
    if center == "mean":
        return float(mu.weights @ v)
    if center != "median":
        raise ValueError("center must be 'median' or 'mean'")
    order = np.argsort(v, kind="stable")
    vs, w = v[order], mu.weights[order]
    # each atom's mass is centred on its value; interpolate the level 1/2
    mid = np.cumsum(w) - 0.5 * w
    return float(np.interp(0.5 * w.sum(), mid, vs))


# -- weighted Poincare ---------------------------------------------------------------


@dataclass
class PoincareEstimate:
    model_id: str
    h_candidate: float
    validated: bool
    method: str  # CauchyChain | NumericalSearch | UserSupplied
    test_family_size: int
    worst_margin: float
    family_hash: str = field(default_factory=family_hash)
    center: str = "median"
    margins: list = field(default_factory=list, repr=False)
    details: dict = field(default_factory=dict)

    def to_json(self) -> str:
        d = asdict(self)
        d.pop("margins")
        return json.dumps(d, sort_keys=True)


def _family_data(m: DensityModel, family, center, mu=None):
    mu = mu or quadrature_measure(m)
    L = m.length_scale
    X = mu.points
    W = m.W(X)
    out = []
    for f in family:
        v = f.value(X, L)
        out.append((v - median_or_center(v, mu, center), f.grad_norm(X, L)))
    return mu, W, out


def _poincare_margins(mu, W, data, h):
    lhs = np.array([mu.weights @ (F(g) * W) for _, g in data])
    rhs = np.array([mu.weights @ F(h * np.abs(d)) for d, _ in data])
    return lhs - rhs


def verify_weighted_poincare(m: DensityModel, h: float, family=None, center: str = "median",
                             method: str = "UserSupplied") -> PoincareEstimate:
    """int F(|grad f|) W dmu >= int F(h |f - m_f|) dmu over the test family."""
    if h < 0:
        raise ValueError("h must be nonnegative")
    family = test_family() if family is None else family
    mu, W, data = _family_data(m, family, center)
    margins = _poincare_margins(mu, W, data, h)
    worst = float(margins.min()) if len(margins) else 0.0
    return PoincareEstimate(m.model_id, float(h), bool(worst >= -VALIDATION_TOL), method,
                            len(family), worst, family_hash(family), center, margins.tolist())


def search_h(m: DensityModel, family=None, center: str = "median", safety: float = 0.9) -> PoincareEstimate:
    """Largest h passing every family member (bisection per f), times ``safety``."""
    family = test_family() if family is None else family
    mu, W, data = _family_data(m, family, center)
    best = math.inf
    for d, g in data:
        lhs = mu.weights @ (F(g) * W)
        ad = np.abs(d)
        if not np.any(ad > 0):
            continue
        gap = lambda h: lhs - mu.weights @ F(h * ad)
        hi = 1.0
        while gap(hi) > 0 and hi < 1e8:
            hi *= 2.0
        if gap(hi) > 0:
            continue
        best = min(best, optimize.brentq(gap, 0.0, hi, xtol=1e-14, rtol=1e-12))
    h = safety * best if math.isfinite(best) else 0.0
    est = verify_weighted_poincare(m, h, family, center, method="NumericalSearch")
    est.details["h_max_family"] = best
    return est


def proposition1_transfer(mu: DiscreteMeasure, omega: Callable, h: float, family=None,
                          center: str = "median", scale: float = 1.0) -> dict:
    """Hypothesis margins int |grad f / h| omega - int |f - m_f| and conclusion margins
    int F(omega |grad f| / h) - int F(|f - m_f|); the implication is checked where the
    hypothesis holds."""
    if not h > 0:
        raise ValueError("h must be positive")
    family = test_family() if family is None else family
    X = mu.points
    om = omega(X)
    hyp, con = [], []
    for f in family:
        v = f.value(X, scale)
        d = np.abs(v - median_or_center(v, mu, center))
        g = f.grad_norm(X, scale)
        hyp.append(mu.weights @ (g / h * om) - mu.weights @ d)
        con.append(mu.weights @ F(om * g / h) - mu.weights @ F(d))
    hyp, con = np.array(hyp), np.array(con)
    ok = bool(np.all(con[hyp >= 0] >= -VALIDATION_TOL))
    return {"hypothesis": hyp, "conclusion": con, "implication_holds": ok}


# -- Cheeger-type L1 form ------------------------------------------------------------


@dataclass
class CheegerResult:
    C_kappa: float
    margins: np.ndarray
    ratios: np.ndarray
    c_min: float
    m: float
    weight_slope: float  # omega(x) = m + slope |x|, slope = 1/(beta - n)

    @property
    def validated(self) -> bool:
        return bool(np.all(self.margins >= -VALIDATION_TOL))


def _require_cauchy(m: DensityModel):
    if m.case is not Case.CASE2:
        raise ValueError("this step needs a Case 2 model")
    if m.raw_w.kind != "cauchy":
        raise NotImplementedError("the explicit chain covers the Cauchy family")
    if not m.beta > m.dim:
        raise ValueError("the chain needs beta > n")


def cheeger_l1_check(m: DensityModel, C_kappa: float = 1.0, family=None,
                     center: str = "median") -> CheegerResult:
    """int |f - m_f| dmu <= (C/2) int |grad f| omega dmu with omega = m + |x| / (beta - n)."""
    _require_cauchy(m)
    family = test_family() if family is None else family
    gm = geometric_mean_radius(m).m
    slope = 1.0 / (m.beta - m.dim)
    mu = quadrature_measure(m)
    X = mu.points
    om = gm + slope * np.linalg.norm(X, axis=-1)
    L = m.length_scale
    lhs, grad = [], []
    for f in family:
        v = f.value(X, L)
        lhs.append(mu.weights @ np.abs(v - median_or_center(v, mu, center)))
        grad.append(mu.weights @ (f.grad_norm(X, L) * om))
    lhs, grad = np.array(lhs), np.array(grad)
    ratios = np.where(grad > 0, 2.0 * lhs / np.where(grad > 0, grad, 1.0), 0.0)
    margins = 0.5 * C_kappa * grad - lhs
    return CheegerResult(C_kappa, margins, ratios, float(ratios.max()), gm, slope)


# -- radial moments and the explicit bound -------------------------------------------


def radial_integral(n: float, beta: float) -> float:
    """I_n(beta) = int_0^inf r^n (1 + r^2)^(-beta) dr by adaptive quadrature."""
    if not 2 * beta > n + 1:
        raise ValueError("I_n(beta) diverges unless 2 beta > n + 1")
    f = lambda r: r ** n * (1.0 + r * r) ** (-beta)
    kw = dict(epsabs=0.0, epsrel=1e-12, limit=500)
    return integrate.quad(f, 0.0, 1.0, **kw)[0] + integrate.quad(f, 1.0, np.inf, **kw)[0]


@dataclass
class GeometricMeanRadius:
    m: float
    m_q: list  # (q, moment) pairs

    @property
    def m1(self) -> float:
        return dict(self.m_q)[1.0]


def geometric_mean_radius(m: DensityModel, qs=(0.25, 0.5, 1.0)) -> GeometricMeanRadius:
    """m = exp(E log|x|) and power means m_q = (E|x|^q)^(1/q), from radial integrals."""
    if m.case is not Case.CASE2 or m.raw_w.kind != "cauchy":
        raise ValueError("geometric mean radius is implemented for the Cauchy family")
    n, b = m.dim, m.beta
    norm = radial_integral(n - 1, b)
    f = lambda r: math.log(r) * r ** (n - 1) * (1.0 + r * r) ** (-b) if r > 0 else 0.0
    kw = dict(epsabs=0.0, epsrel=1e-12, limit=500)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", integrate.IntegrationWarning)
        elog = (integrate.quad(f, 0.0, 1.0, **kw)[0] + integrate.quad(f, 1.0, np.inf, **kw)[0]) / norm
    if not math.isfinite(elog):
        raise ValueError("log-moment diverges")
    gm = math.exp(elog)
    mq = []
    for q in qs:
        if not q < 2 * b - n:
            continue
        mq.append((float(q), (radial_integral(n - 1 + q, b) / norm) ** (1.0 / q)))
    out = GeometricMeanRadius(gm, mq)
    if 1.0 in dict(mq) and gm > out.m1 + 1e-10:
        raise AssertionError(f"geometric mean {gm} exceeds first moment {out.m1}")
    return out


def laplace_In(n: int, beta: float):
    """(numeric I_n(beta), (1/2) Gamma((n+1)/2) beta^(-(n+1)/2), ratio)."""
    num = radial_integral(n, beta)
    asym = 0.5 * math.exp(special.gammaln((n + 1) / 2)) * beta ** (-(n + 1) / 2)
    return num, asym, num / asym


@lru_cache(maxsize=None)
def envelope_constant(nmax: int = 3) -> float:
    """max of m / sqrt(n beta) over n <= nmax and beta in [n, 10^4] (log grid).

    m is finite at beta = n (unlike m_1 at n = 1), so the envelope is taken on m itself.
    """
    best = 0.0
    for n in range(1, nmax + 1):
        for b in np.geomspace(n, 1e4, 60):
            model = parse_model_id(f"cauchy:beta={float(b)!r},n={n}", rescale=False)
            best = max(best, geometric_mean_radius(model, qs=()).m / math.sqrt(n * b))
    return best


@dataclass
class CauchyBound:
    n: int
    beta: float
    C_kappa: float
    m: float
    h: float
    h_asymptotic: float
    envelope: float


def cauchy_h_lower_bound(n: int, beta: float, C_kappa: float) -> CauchyBound:
    """h = 1 / (6 C max{m, 1/(beta - n)}) for W = 1 + |x|^2, with the computed m.

    Also returns the coarser form with m replaced by C_env sqrt(n beta).
    """
    if not beta > n:
        raise ValueError("the bound needs beta > n")
    if not C_kappa > 0:
        raise ValueError("C_kappa must be positive")
    model = parse_model_id(f"cauchy:beta={float(beta)!r},n={n}", rescale=False)
    gm = geometric_mean_radius(model).m
    h = 1.0 / (6.0 * C_kappa * max(gm, 1.0 / (beta - n)))
    env = envelope_constant(max(3, n))
    h_asym = 1.0 / (6.0 * C_kappa * max(env * math.sqrt(n * beta), 1.0 / (beta - n)))
    return CauchyBound(n, float(beta), float(C_kappa), gm, h, h_asym, env)


def cauchy_chain_estimate(m: DensityModel, C_kappa: Optional[float] = None, family=None,
                          center: str = "median") -> PoincareEstimate:
    """Chain constant for ``m`` (raw or normalized W), validated on the test family.

    Without C_kappa, the empirical minimal constant from the L1 check is used.  For a
    normalized W = lambda (1 + |x|^2) the constant becomes min(1, lambda) h.
    """
    _require_cauchy(m)
    cheeger = cheeger_l1_check(m, 1.0, family, center)
    C = cheeger.c_min if C_kappa is None else C_kappa
    bound = cauchy_h_lower_bound(m.dim, m.beta, C)
    lam = m.scale_factor
    h = min(1.0, lam) * bound.h
    est = verify_weighted_poincare(m, h, family, center, method="CauchyChain")
    est.details.update({"C_kappa": C, "C_kappa_empirical": cheeger.c_min, "m": bound.m,
                        "h_raw": bound.h, "w_scale": lam, "h_asymptotic": bound.h_asymptotic})
    return est
