"""kappa-concave density families: construction, normalization, sampling, discretization.

A density is built from a pair (kappa, W) as ``rho = W**(1/kappa) / Z``.  Two cases:

* Case 1, ``kappa > 0`` (``beta = 1/kappa``): W concave on a bounded convex set {W > 0};
  typical example ``W(x) = sigma**2 - |x|**2`` (the "ball" family).
* Case 2, ``-1/n <= kappa < 0`` (``beta = -1/kappa >= n``): W convex on R^n;
  typical example ``W(x) = 1 + |x|**2`` (generalized Cauchy).

Downstream code works with normalized models, where W has been rescaled by
``Z**(-kappa)`` so that ``int W**(1/kappa) = 1`` and ``rho = W**(1/kappa)``.
"""

from __future__ import annotations

import enum
import importlib.util
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Callable, Optional

import numpy as np
from scipy import integrate, special

__all__ = [
    "Case",
    "KappaParam",
    "WSpec",
    "DensityModel",
    "DiscreteMeasure",
    "DensityGrid1D",
    "model_grid",
    "axis_nodes",
    "density_grid",
    "axis_rule",
    "tensor_quadrature",
    "DivergentIntegralError",
    "GridCoverageError",
    "normalize",
    "closed_form_constant",
    "pdf",
    "discretize",
    "sample",
    "midpoint_concavity_check",
    "tail_radius",
    "parse_model_id",
    "kappa_limit_model",
    "sphere_area",
]


class DivergentIntegralError(ValueError):
    """Raised when int W**(1/kappa) (or another required moment) is infinite."""


class GridCoverageError(ValueError):
    """Raised when a discretization grid misses more probability mass than allowed."""

    def __init__(self, captured: float, mass_tol: float):
        self.captured = captured
        self.mass_tol = mass_tol
        super().__init__(
            f"grid captures mass {captured:.17g}, below 1 - {mass_tol:g}; "
            f"missing mass {1.0 - captured:.3e}"
        )


class Case(enum.Enum):
    CASE1 = "case1"
    CASE2 = "case2"


@dataclass(frozen=True)
class KappaParam:
    kappa: float
    case: Case
    beta: float

    def __post_init__(self):
        if self.case is Case.CASE1:
            if not self.kappa > 0:
                raise ValueError("Case 1 requires kappa > 0")
            if self.beta < 0:
                raise ValueError("Case 1 requires beta >= 0")
        else:
            if not self.kappa < 0:
                raise ValueError("Case 2 requires kappa < 0")
            if self.beta <= 0:
                raise ValueError("Case 2 requires beta > 0")
        if math.isfinite(self.kappa) and abs(self.beta * abs(self.kappa) - 1.0) > 1e-15:
            raise ValueError("beta * |kappa| must equal 1")

    @classmethod
    def from_beta(cls, beta: float, case: Case | str) -> "KappaParam":
        case = Case(case)
        beta = float(beta)
        if case is Case.CASE1:
            kappa = math.inf if beta == 0 else 1.0 / beta
        else:
            if beta <= 0:
                raise ValueError("Case 2 requires beta > 0")
            kappa = -1.0 / beta
        return cls(kappa, case, beta)

    @classmethod
    def from_kappa(cls, kappa: float) -> "KappaParam":
        if kappa == 0:
            raise ValueError("kappa = 0 is the log-concave limit; use kappa_limit_model")
        if kappa > 0:
            return cls(float(kappa), Case.CASE1, 0.0 if math.isinf(kappa) else 1.0 / kappa)
        return cls(float(kappa), Case.CASE2, -1.0 / kappa)

    @property
    def cost_factor(self) -> float:
        """(kappa + 1) / (-kappa): -(beta + 1) in Case 1, beta - 1 in Case 2."""
        if self.case is Case.CASE1:
            return -(self.beta + 1.0)
        return self.beta - 1.0


def _fd_gate(value, grad, hess, dim, box, rng, in_support, tol=1e-6, count=64):
    pts = rng.uniform(-box, box, size=(count, dim))
    pts = pts[in_support(pts)]
    if len(pts) == 0:
        raise ValueError("could not find points in the support of W for the derivative check")
    step = 1e-5
    g = grad(pts)
    H = hess(pts)
    for k in range(dim):
        e = np.zeros(dim)
        e[k] = step
        fd_g = (value(pts + e) - value(pts - e)) / (2 * step)
        fd_h = (grad(pts + e) - grad(pts - e)) / (2 * step)
        if np.any(np.abs(g[:, k] - fd_g) > tol * np.maximum(1.0, np.abs(g[:, k]))):
            raise ValueError(f"gradient of W inconsistent with finite differences (component {k})")
        if np.any(np.abs(H[:, :, k] - fd_h) > tol * np.maximum(1.0, np.abs(H[:, :, k]))):
            raise ValueError(f"Hessian of W inconsistent with finite differences (column {k})")


@dataclass(frozen=True)
class WSpec:
    """The potential W with value, gradient and Hessian, vectorized over points (..., n).

    ``kind`` is ``"ball"`` (sigma**2 - |x|**2, clipped at 0), ``"cauchy"`` (1 + |x|**2)
    or ``"custom"`` (user callables).  ``scale`` multiplies everything; normalized models
    carry a rescaled copy.
    """

    kind: str
    dim: int
    sigma: float = 1.0
    scale: float = 1.0
    custom_value: Optional[Callable] = field(default=None, compare=False, repr=False)
    custom_grad: Optional[Callable] = field(default=None, compare=False, repr=False)
    custom_hess: Optional[Callable] = field(default=None, compare=False, repr=False)
    bound: float = 0.0
    label: str = ""

    def __post_init__(self):
        if self.kind not in ("ball", "cauchy", "custom"):
            raise ValueError(f"unknown W kind {self.kind!r}")
        if self.dim < 1:
            raise ValueError("dimension must be positive")
        if self.kind == "ball" and not self.sigma > 0:
            raise ValueError("ball family requires sigma > 0")
        if not self.scale > 0:
            raise ValueError("scale must be positive")
        if self.kind == "custom" and None in (self.custom_value, self.custom_grad, self.custom_hess):
            raise ValueError("custom W needs value, gradient and Hessian callables")

    @classmethod
    def custom(cls, value, grad, hess, dim, bound=5.0, label="custom", check=True, seed=0):
        w = cls("custom", dim, custom_value=value, custom_grad=grad, custom_hess=hess,
                bound=bound, label=label)
        if check:
            _fd_gate(w.value, w.grad, w.hess, dim, bound, np.random.default_rng(seed),
                     lambda p: w.value(p) > 0)
        return w

    def rescaled(self, factor: float) -> "WSpec":
        return replace(self, scale=self.scale * factor)

    def _pts(self, x):
        x = np.asarray(x, dtype=float)
        if self.dim == 1 and (x.ndim <= 1 or x.shape[-1] != 1):
            x = x[..., None]
        return x

    def value(self, x):
        x = self._pts(x)
        r2 = np.sum(x * x, axis=-1)
        if self.kind == "ball":
            v = np.maximum(self.sigma ** 2 - r2, 0.0)
        elif self.kind == "cauchy":
            v = 1.0 + r2
        else:
            v = np.asarray(self.custom_value(x), dtype=float)
        return self.scale * v

    def signed_value(self, x):
        """W without clipping; negative outside the support of a Case 1 W."""
        if self.kind == "ball":
            x = self._pts(x)
            return self.scale * (self.sigma ** 2 - np.sum(x * x, axis=-1))
        return self.value(x)

    def grad(self, x):
        x = self._pts(x)
        if self.kind == "ball":
            g = -2.0 * x
        elif self.kind == "cauchy":
            g = 2.0 * x
        else:
            g = np.asarray(self.custom_grad(x), dtype=float)
        return self.scale * g

    def hess(self, x):
        x = self._pts(x)
        eye = np.broadcast_to(np.eye(self.dim), x.shape[:-1] + (self.dim, self.dim))
        if self.kind == "ball":
            H = -2.0 * eye
        elif self.kind == "cauchy":
            H = 2.0 * eye
        else:
            H = np.asarray(self.custom_hess(x), dtype=float)
        return self.scale * H

    @property
    def radial(self) -> bool:
        return self.kind in ("ball", "cauchy")


@dataclass(frozen=True)
class DensityModel:
    kp: KappaParam
    w: WSpec
    Z: float
    normalized: bool
    raw_w: WSpec

    @property
    def dim(self) -> int:
        return self.w.dim

    @property
    def case(self) -> Case:
        return self.kp.case

    @property
    def kappa(self) -> float:
        return self.kp.kappa

    @property
    def beta(self) -> float:
        return self.kp.beta

    @property
    def scale_factor(self) -> float:
        """Factor applied to the raw W (Z**(-kappa) when normalized, else 1)."""
        return self.w.scale / self.raw_w.scale

    @property
    def model_id(self) -> str:
        w = self.raw_w
        beta = f"{self.beta:g}"
        if w.kind == "ball":
            return f"ball:sigma={w.sigma:g},beta={beta},n={w.dim}"
        if w.kind == "cauchy":
            return f"cauchy:beta={beta},n={w.dim}"
        return f"custom:{w.label}"

    @property
    def length_scale(self) -> float:
        if self.raw_w.kind == "ball":
            return self.raw_w.sigma
        if self.raw_w.kind == "cauchy":
            return 1.0
        return max(self.raw_w.bound / 4.0, 1e-3)

    def support_radius(self) -> float:
        """Radius of the support (Case 1) or inf (Case 2)."""
        if self.case is Case.CASE2:
            return math.inf
        if self.raw_w.kind == "ball":
            return self.raw_w.sigma
        return self.raw_w.bound

    def W(self, x):
        return self.w.value(x)

    def pdf(self, x):
        return pdf(self, x)

    def radial_pdf(self, r):
        """pdf as a function of |x| for the radial families."""
        r = np.asarray(r, dtype=float)
        e = np.zeros(r.shape + (self.dim,))
        e[..., 0] = r
        return pdf(self, e)


def sphere_area(n: int) -> float:
    """Surface measure of the unit sphere S^{n-1} in R^n (2 for n = 1)."""
    return 2.0 * math.pi ** (n / 2) / math.gamma(n / 2)


def closed_form_constant(family: str, n: int, beta: float, sigma: float = 1.0) -> float:
    """Normalizing constants of the ball and Cauchy families.

    ``BallBeta``: int (sigma^2 - |x|^2)_+^beta dx
    ``Cauchy``:   int (1 + |x|^2)^(-beta) dx, finite only for beta > n/2.
    """
    fam = family.lower()
    if n < 1:
        raise ValueError("dimension must be positive")
    if fam in ("ballbeta", "ball"):
        if not sigma > 0:
            raise ValueError("sigma must be positive")
        if beta < 0:
            raise ValueError("beta must be nonnegative")
        log_c = ((2 * beta + n) * math.log(sigma) + 0.5 * n * math.log(math.pi)
                 + special.gammaln(beta + 1) - special.gammaln(beta + n / 2 + 1))
        return math.exp(log_c)
    if fam == "cauchy":
        if not beta > n / 2:
            raise DivergentIntegralError(f"Cauchy constant diverges for beta={beta} <= n/2={n / 2}")
        log_c = (0.5 * n * math.log(math.pi) + special.gammaln(beta - n / 2)
                 - special.gammaln(beta))
        return math.exp(log_c)
    raise ValueError(f"unknown family {family!r}")


def _radial_quad(f, n, upper):
    area = sphere_area(n)
    val, _ = integrate.quad(lambda r: r ** (n - 1) * f(r), 0.0, upper, limit=500,
                            epsabs=0.0, epsrel=1e-13)
    return area * val


def _custom_Z(w: WSpec, kp: KappaParam) -> float:
    inv = 1.0 / kp.kappa

    def integrand(*x):
        v = np.asarray(w.value(np.array(x))).item()
        return v ** inv if v > 0 else 0.0

    b = w.bound
    if w.dim == 1:
        val, _ = integrate.quad(integrand, -b, b, limit=500, epsabs=0.0, epsrel=1e-12)
    elif w.dim <= 3:
        val, _ = integrate.nquad(integrand, [(-b, b)] * w.dim, opts={"epsrel": 1e-9})
    else:
        raise NotImplementedError("quadrature is only supported for n <= 3")
    return val


def normalize(w: WSpec, kp: KappaParam, rescale: bool = True) -> DensityModel:
    """Compute Z = int W**(1/kappa) and build the model, optionally rescaling W so Z = 1."""
    n = w.dim
    if w.kind == "ball" and not w.sigma > 0:
        raise ValueError("sigma must be positive")
    if kp.case is Case.CASE2:
        if w.kind == "cauchy" and 2 * kp.beta <= n:
            raise DivergentIntegralError(
                f"int (1+|x|^2)^(-beta) diverges for beta={kp.beta:g}, n={n} (2 beta <= n)")
        if kp.beta < n:
            raise ValueError(f"Case 2 requires beta >= n (kappa >= -1/n); got beta={kp.beta:g}")
    if w.kind == "ball":
        if kp.case is not Case.CASE1:
            raise ValueError("the ball family is a Case 1 (kappa > 0) potential")
        Z = closed_form_constant("BallBeta", n, kp.beta, w.sigma) * w.scale ** kp.beta
    elif w.kind == "cauchy":
        if kp.case is not Case.CASE2:
            raise ValueError("the Cauchy family is a Case 2 (kappa < 0) potential")
        Z = closed_form_constant("Cauchy", n, kp.beta) * w.scale ** (-kp.beta)
    else:
        Z = _custom_Z(w, kp)
        if not math.isfinite(Z) or Z <= 0:
            raise DivergentIntegralError("int W^(1/kappa) is not finite and positive")
    if rescale:
        factor = Z ** (-kp.kappa) if math.isfinite(kp.kappa) else 1.0
        return DensityModel(kp, w.rescaled(factor), Z, True, w)
    return DensityModel(kp, w, Z, False, w)


def pdf(m: DensityModel, x):
    """Density W(x)**(1/kappa) / Z, zero outside the support."""
    v = m.w.value(x)
    out = np.zeros_like(v)
    pos = v > 0
    if math.isinf(m.kappa):
        out[pos] = 1.0
    else:
        out[pos] = np.exp(np.log(v[pos]) / m.kappa)
    if not m.normalized:
        out = out / m.Z
    return out


def tail_radius(m: DensityModel, tail_mass: float = 1e-6) -> float:
    """Smallest radius R with P(|X| > R) <= tail_mass, by bisection on the radial CDF."""
    if m.case is Case.CASE1:
        return m.support_radius()
    n = m.dim
    if m.raw_w.radial:
        tail = lambda R: integrate.quad(lambda r: r ** (n - 1) * np.asarray(m.radial_pdf(r)).item(),
                                        R, np.inf, epsabs=0.0, epsrel=1e-10, limit=200)[0] \
            * sphere_area(n)
    elif n == 1:
        tail = lambda R: sum(integrate.quad(lambda t: float(pdf(m, np.array([t]))[0]), *iv,
                                            epsabs=0.0, epsrel=1e-10, limit=200)[0]
                             for iv in ((R, np.inf), (-np.inf, -R)))
    else:
        raise NotImplementedError("tail radius for non-radial models needs n = 1")
    lo, hi = 0.0, 1.0
    while tail(hi) > tail_mass:
        lo, hi = hi, hi * 2.0
        if hi > 1e12:
            raise DivergentIntegralError("tail mass does not decay")
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if tail(mid) > tail_mass:
            lo = mid
        else:
            hi = mid
        if hi - lo <= 1e-10 * hi:
            break
    return hi


# -- discrete measures ---------------------------------------------------------------


@dataclass(frozen=True)
class DiscreteMeasure:
    points: np.ndarray
    weights: np.ndarray
    kind: str = "cloud"
    cell_volume: Optional[float] = None
    captured_mass: float = 1.0
    shape: Optional[tuple] = None

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float)
        if pts.ndim == 1:
            pts = pts[:, None]
        wts = np.asarray(self.weights, dtype=float)
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "weights", wts)
        if self.kind not in ("grid", "cloud"):
            raise ValueError("kind must be 'grid' or 'cloud'")
        if wts.shape != (len(pts),):
            raise ValueError("one weight per point required")
        if np.any(wts < 0):
            raise ValueError("weights must be nonnegative")
        if abs(wts.sum() - 1.0) > 1e-12:
            raise ValueError(f"weights sum to {wts.sum():.17g}, not 1")

    @property
    def dim(self) -> int:
        return self.points.shape[1]

    def __len__(self):
        return len(self.weights)

    def densities(self) -> np.ndarray:
        if self.cell_volume is None:
            raise ValueError("cell densities need a grid measure")
        return self.weights / self.cell_volume

    def mean(self) -> np.ndarray:
        return self.weights @ self.points


_GL_CACHE: dict = {}


def gauss_legendre(k: int):
    if k not in _GL_CACHE:
        _GL_CACHE[k] = np.polynomial.legendre.leggauss(k)
    return _GL_CACHE[k]


def _cell_masses_1d(f, edges, order=8):
    t, w = gauss_legendre(order)
    a, b = edges[:-1], edges[1:]
    half = 0.5 * (b - a)
    xs = 0.5 * (a + b)[:, None] + half[:, None] * t[None, :]
    return (f(xs) * w[None, :]).sum(axis=1) * half


def discretize(m: DensityModel, cells, half_width: Optional[float] = None,
               mass_tol: float = 1e-6, tail_mass: float = 1e-6, factor=None) -> DiscreteMeasure:
    """Tensor-grid discretization of a model on [-half_width, half_width]^n.

    Cell weights are Gauss-Legendre quadratures of the pdf per cell, renormalized to sum 1.
    ``factor`` (a function of points) multiplies the pdf, e.g. 1 + eps g for perturbations.
    Without ``half_width`` the grid covers the support (Case 1) or the quantile box
    leaving ``tail_mass`` outside (Case 2).  Raises GridCoverageError when the captured
    mass falls below ``1 - mass_tol``.
    """
    n = m.dim
    if n > 3:
        raise NotImplementedError("quadrature paths support n <= 3")
    cells = (cells,) * n if np.isscalar(cells) else tuple(cells)
    if half_width is None:
        half_width = tail_radius(m, tail_mass)
    edges = [np.linspace(-half_width, half_width, c + 1) for c in cells]
    order = {1: 8, 2: 5, 3: 3}[n]
    t, wq = gauss_legendre(order)
    if factor is None:
        density = lambda x: pdf(m, x)
    else:
        density = lambda x: pdf(m, x) * factor(x)
    if n == 1:
        masses = _cell_masses_1d(density, edges[0], order)
    else:
        # tensor GL rule per cell
        axes_nodes, axes_w = [], []
        for e in edges:
            a, b = e[:-1], e[1:]
            half = 0.5 * (b - a)
            axes_nodes.append(0.5 * (a + b)[:, None] + half[:, None] * t[None, :])
            axes_w.append(half[:, None] * wq[None, :])
        if n == 2:
            X = axes_nodes[0][:, None, :, None]
            Y = axes_nodes[1][None, :, None, :]
            X, Y = np.broadcast_arrays(X, Y)
            vals = density(np.stack([X, Y], axis=-1))
            masses = np.einsum("ijab,ia,jb->ij", vals, axes_w[0], axes_w[1]).ravel()
        else:
            X = axes_nodes[0][:, None, None, :, None, None]
            Y = axes_nodes[1][None, :, None, None, :, None]
            Zc = axes_nodes[2][None, None, :, None, None, :]
            X, Y, Zc = np.broadcast_arrays(X, Y, Zc)
            vals = density(np.stack([X, Y, Zc], axis=-1))
            masses = np.einsum("ijkabc,ia,jb,kc->ijk", vals, *axes_w).ravel()
    captured = float(masses.sum())
    if captured < 1.0 - mass_tol:
        raise GridCoverageError(captured, mass_tol)
    centers = [0.5 * (e[:-1] + e[1:]) for e in edges]
    mesh = np.meshgrid(*centers, indexing="ij")
    pts = np.stack([g.ravel() for g in mesh], axis=-1)
    weights = masses / captured
    weights = weights / weights.sum()
    vol = float(np.prod([e[1] - e[0] for e in edges]))
    return DiscreteMeasure(pts, weights, kind="grid", cell_volume=vol,
                           captured_mass=captured, shape=cells)


@dataclass(frozen=True)
class DensityGrid1D:
    """A (not necessarily normalized) 1D density known on sorted nodes ``x``.

    ``func`` evaluates the density anywhere in [x[0], x[-1]]; cell masses and
    in-cell partial masses use Gauss-Legendre on ``func``.
    """

    x: np.ndarray
    func: Callable = field(compare=False, repr=False)

    def __post_init__(self):
        x = np.asarray(self.x, dtype=float)
        if x.ndim != 1 or len(x) < 2 or np.any(np.diff(x) <= 0):
            raise ValueError("grid nodes must be strictly increasing")
        object.__setattr__(self, "x", x)

    @classmethod
    def from_values(cls, x, values) -> "DensityGrid1D":
        x = np.asarray(x, dtype=float)
        values = np.asarray(values, dtype=float)
        if np.any(values < 0):
            raise ValueError("density values must be nonnegative")
        return cls(x, lambda t: np.interp(t, x, values))

    @property
    def values(self) -> np.ndarray:
        return np.asarray(self.func(self.x), dtype=float)

    def __call__(self, t):
        return self.func(t)

    def cell_masses(self, order: int = 8) -> np.ndarray:
        return _cell_masses_1d(self.func, self.x, order)

    def partial_mass(self, a, b, order: int = 8) -> np.ndarray:
        """Mass on [a_i, b_i] for arrays a, b lying inside single cells."""
        t, w = gauss_legendre(order)
        half = 0.5 * (np.asarray(b) - np.asarray(a))
        xs = 0.5 * (np.asarray(a) + np.asarray(b))[..., None] + half[..., None] * t
        return (self.func(xs) * w).sum(axis=-1) * half

    def total(self) -> float:
        return float(self.cell_masses().sum())


def model_grid(m: DensityModel, size: int, tail_mass: float = 1e-6) -> np.ndarray:
    """Nodes for the 1D precision path.

    Case 1: uniform on the support.  Case 2: uniform in s = arctan(x) on the
    quantile box leaving ``tail_mass`` outside, which concentrates nodes where the
    heavy-tailed density lives.
    """
    if m.dim != 1:
        raise ValueError("model_grid is for n = 1")
    R = tail_radius(m, tail_mass)
    if m.case is Case.CASE1:
        return np.linspace(-R, R, size)
    L = m.length_scale
    s = np.linspace(-math.atan(R / L), math.atan(R / L), size)
    x = L * np.tan(s)
    if size % 2:
        x[size // 2] = 0.0
    return x


def axis_nodes(m: DensityModel, size: int, tail_mass: float = 1e-9) -> np.ndarray:
    """1D nodes covering one coordinate axis of the quantile box, spaced as in model_grid."""
    return axis_rule(m, size, tail_mass)[0]


def _simpson_uniform(size: int, h: float) -> np.ndarray:
    if size < 3 or size % 2 == 0:
        raise ValueError("Simpson's rule needs an odd number of nodes >= 3")
    w = np.ones(size)
    w[1:-1:2] = 4.0
    w[2:-1:2] = 2.0
    return w * h / 3.0


def axis_rule(m: DensityModel, size: int, tail_mass: float = 1e-9):
    """(nodes, weights) of a composite Simpson rule on one axis of the quantile box.

    Case 2 nodes are x = L tan(s) with s uniform; the rule is Simpson in s with the
    Jacobian L sec^2 s folded into the weights.
    """
    R = tail_radius(m, tail_mass)
    if m.case is Case.CASE1:
        x = np.linspace(-R, R, size)
        return x, _simpson_uniform(size, x[1] - x[0])
    L = m.length_scale
    s = np.linspace(-math.atan(R / L), math.atan(R / L), size)
    x = L * np.tan(s)
    x[size // 2] = 0.0
    w = _simpson_uniform(size, s[1] - s[0]) * L / np.cos(s) ** 2
    return x, w


def tensor_quadrature(m: DensityModel, size: int, tail_mass: float = 1e-9) -> DiscreteMeasure:
    """Probability cloud from a tensor Simpson rule times the pdf on the quantile box.

    Expectations under the model become weighted sums; weights are renormalized to 1.
    """
    x, sw = axis_rule(m, size, tail_mass)
    mesh = np.meshgrid(*([x] * m.dim), indexing="ij")
    pts = np.stack([g.ravel() for g in mesh], axis=-1)
    wq = sw
    for _ in range(m.dim - 1):
        wq = np.multiply.outer(wq, sw)
    w = wq.ravel() * pdf(m, pts)
    keep = w > 0
    captured = float(w.sum())
    return DiscreteMeasure(pts[keep], w[keep] / w[keep].sum(), kind="cloud", captured_mass=captured)


def density_grid(m: DensityModel, x) -> DensityGrid1D:
    return DensityGrid1D(x, lambda t: pdf(m, t))


# -- sampling ------------------------------------------------------------------------


def _inverse_cdf_table(density, lo, hi, nodes=1 << 14, mapped=False):
    if mapped:
        s = np.linspace(math.atan(lo), math.atan(hi), nodes + 1)
        edges = np.tan(s)
    else:
        edges = np.linspace(lo, hi, nodes + 1)
    masses = _cell_masses_1d(density, edges)
    cdf = np.concatenate([[0.0], np.cumsum(masses)])
    return edges, cdf / cdf[-1]


def sample(m: DensityModel, count: int, seed: int, tail_mass: float = 1e-9) -> np.ndarray:
    """Draw ``count`` points; 1D by inverse CDF, radial families by radius inverse CDF."""
    if count < 1:
        raise ValueError("count must be >= 1")
    rng = np.random.default_rng(seed)
    n = m.dim
    mapped = m.case is Case.CASE2
    R = tail_radius(m, tail_mass)
    if n == 1:
        edges, cdf = _inverse_cdf_table(lambda x: pdf(m, x), -R, R, mapped=mapped)
        return np.interp(rng.random(count), cdf, edges)[:, None]
    if not m.raw_w.radial:
        raise NotImplementedError("n-D sampling is available for the radial families")
    radial = lambda r: r ** (n - 1) * m.radial_pdf(r)
    edges, cdf = _inverse_cdf_table(radial, 0.0, R, mapped=mapped)
    r = np.interp(rng.random(count), cdf, edges)
    d = rng.standard_normal((count, n))
    d /= np.linalg.norm(d, axis=1, keepdims=True)
    return r[:, None] * d


# -- concavity check -----------------------------------------------------------------


def midpoint_concavity_check(m: DensityModel, trials: int, seed: int, rtol: float = 1e-10,
                             box: Optional[float] = None):
    """Check p(tx + (1-t)y) >= (t p(x)^k + (1-t) p(y)^k)^(1/k) at random x, y, t.

    Half of the pairs are drawn globally, half as nearby pairs (local concavity defects).
    Returns ``(True, None)`` or ``(False, (x, y, t))`` with the first violating triple.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    rng = np.random.default_rng(seed)
    n, k = m.dim, m.kappa
    if box is None:
        box = m.support_radius() if m.case is Case.CASE1 else min(tail_radius(m, 1e-3), 10.0)

    def draw(size):
        pts = rng.uniform(-box, box, size=(size, n))
        if m.case is Case.CASE1:
            pts = pts[m.w.value(pts) > 0]
        return pts

    xs = draw(4 * trials)[:trials]
    ys = draw(4 * trials)[:trials]
    half = len(xs) // 2
    ys[:half] = xs[:half] + rng.normal(scale=0.05 * box, size=(half, n))
    if m.case is Case.CASE1:
        keep = m.w.value(ys) > 0
        xs, ys = xs[keep], ys[keep]
    t = rng.uniform(0.0, 1.0, size=len(xs))
    z = t[:, None] * xs + (1 - t[:, None]) * ys
    px, py, pz = pdf(m, xs), pdf(m, ys), pdf(m, z)
    with np.errstate(divide="ignore", over="ignore"):
        rhs = (t * px ** k + (1 - t) * py ** k) ** (1.0 / k)
    bad = pz < rhs * (1.0 - rtol)
    if np.any(bad):
        i = int(np.argmax(bad))
        return False, (xs[i], ys[i], float(t[i]))
    return True, None


# -- model ids -----------------------------------------------------------------------


def _parse_kv(body: str) -> dict:
    out = {}
    for item in filter(None, body.split(",")):
        key, _, val = item.partition("=")
        if not _:
            raise ValueError(f"malformed parameter {item!r}")
        out[key.strip()] = val.strip()
    return out


def _load_custom(path: str) -> DensityModel:
    p = Path(path)
    if not p.is_file():
        raise ValueError(f"custom model file {path!r} not found")
    spec = importlib.util.spec_from_file_location(f"_custom_w_{p.stem}", p)
    mod = importlib.util.module_from_spec(spec)
    spec.loader.exec_module(mod)
    for name in ("W", "grad_W", "hess_W", "BETA", "CASE", "DIM"):
        if not hasattr(mod, name):
            raise ValueError(f"custom model file must define {name}")
    w = WSpec.custom(mod.W, mod.grad_W, mod.hess_W, int(mod.DIM),
                     bound=float(getattr(mod, "BOUND", 5.0)), label=str(p))
    return normalize(w, KappaParam.from_beta(mod.BETA, mod.CASE))


def parse_model_id(model_id: str, rescale: bool = True) -> DensityModel:
    """Build a model from ``ball:sigma=1,beta=2,n=1``, ``cauchy:beta=2,n=1`` or ``custom:<file>``."""
    fam, _, body = model_id.partition(":")
    fam = fam.strip().lower()
    if fam == "custom":
        return _load_custom(body)
    kv = _parse_kv(body)
    try:
        n = int(kv.pop("n", 1))
        beta = float(kv.pop("beta"))
        if fam == "ball":
            sigma = float(kv.pop("sigma", 1.0))
            model = normalize(WSpec("ball", n, sigma=sigma), KappaParam.from_beta(beta, Case.CASE1),
                              rescale=rescale)
        elif fam == "cauchy":
            model = normalize(WSpec("cauchy", n), KappaParam.from_beta(beta, Case.CASE2),
                              rescale=rescale)
        else:
            raise ValueError(f"unknown model family {fam!r}")
    except KeyError as exc:
        raise ValueError(f"model id {model_id!r} lacks parameter {exc}") from None
    if kv:
        raise ValueError(f"unknown parameters {sorted(kv)} in model id {model_id!r}")
    return model


def kappa_limit_model(kappa: float, dim: int = 1) -> DensityModel:
    """W_kappa(x) = 1 - kappa |x|^2 for kappa < 0; tends to the Gaussian e^{-|x|^2} as kappa -> 0-."""
    if not kappa < 0:
        raise ValueError("the limit family is defined for kappa < 0")
    a = -kappa
    w = WSpec.custom(
        lambda x: 1.0 + a * np.sum(x * x, axis=-1),
        lambda x: 2.0 * a * x,
        lambda x: 2.0 * a * np.broadcast_to(np.eye(x.shape[-1]), x.shape[:-1] + (x.shape[-1],) * 2),
        dim, bound=max(12.0, 1.0), label=f"kappa-limit:kappa={kappa:g}", check=False,
    )
    beta = -1.0 / kappa
    Z = closed_form_constant("Cauchy", dim, beta) * a ** (-dim / 2)
    return DensityModel(KappaParam(kappa, Case.CASE2, beta), w.rescaled(Z ** (-kappa)), Z, True, w)
