"""Costs, entropies and matrix functionals, with the quantitative spectral lemmas.

Everything here is a plain function of arrays.  Matrix functions take stacks of
symmetric matrices with shape (..., n, n) and return arrays of shape (...).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy import integrate, special

from .measures import Case, DensityGrid1D, DensityModel, DiscreteMeasure, KappaParam, WSpec, pdf

__all__ = [
    "LEMMA_C",
    "F",
    "CostSpec",
    "cost_c",
    "cost_tilde",
    "cost_total",
    "psi",
    "entropy_H",
    "relative_entropy",
    "SymmetricMatrixSample",
    "sample_matrices",
    "G_kappa",
    "G_scalar",
    "lemma_case1_bound",
    "scalar_log_bound",
    "log_quadratic_bound",
    "lemma_case2_bound",
    "trace_F_sphere_bound",
    "sphere_norm_constant",
    "sphere_norm_envelope",
]

#: Constant in log(1+t) <= t - c min{t^2, |t|}; used for every unspecified "numerical constant".
LEMMA_C = 0.3


def F(t):
    """F(t) = t - log(1 + t) on t >= 0."""
    t = np.asarray(t, dtype=float)
    if np.any(t < 0):
        raise ValueError("F is defined on t >= 0")
    return t - np.log1p(t)


# -- costs ---------------------------------------------------------------------------


@dataclass(frozen=True)
class CostSpec:
    kp: KappaParam
    w: WSpec
    c: float = LEMMA_C
    h: float = 0.0
    combined: bool = False

    def __post_init__(self):
        if not self.c > 0:
            raise ValueError("the constant c must be positive")
        if self.h < 0:
            raise ValueError("h must be nonnegative")

    @classmethod
    def for_model(cls, m: DensityModel, **kw) -> "CostSpec":
        return cls(m.kp, m.w, **kw)

    @property
    def tilde_prefactor(self) -> float:
        if self.kp.case is Case.CASE1:
            return self.c
        b, n = self.kp.beta, self.w.dim
        return (self.c / b) * (1.0 - n / b) ** 2


def _as_points(x, dim):
    x = np.asarray(x, dtype=float)
    if dim == 1 and (x.ndim <= 1 or x.shape[-1] != 1):
        x = x[..., None]
    return x


def cost_c(x, y, spec: CostSpec, extend: bool = False):
    """Bregman cost ((k+1)/(-k)) [W(y) - W(x) - grad W(x).(y - x)].

    ``extend`` evaluates the unclipped W, so Case 1 grid cells straddling the
    boundary of the support get the Bregman cost of the smooth extension.
    """
    n = spec.w.dim
    x, y = _as_points(x, n), _as_points(y, n)
    if extend:
        value = spec.w.signed_value
    else:
        value = spec.w.value
        if spec.kp.case is Case.CASE1 and np.any(spec.w.signed_value(x) < -1e-12 * spec.w.scale):
            raise ValueError("Case 1 cost needs x in the closed support of W")
    bracket = value(y) - value(x) - np.sum(spec.w.grad(x) * (y - x), axis=-1)
    return spec.kp.cost_factor * bracket


def cost_tilde(x, y, spec: CostSpec):
    """Remainder cost prefactor * F(h |y - x|)."""
    n = spec.w.dim
    x, y = _as_points(x, n), _as_points(y, n)
    d = np.linalg.norm(y - x, axis=-1)
    return spec.tilde_prefactor * F(spec.h * d)


def cost_total(x, y, spec: CostSpec, extend: bool = False):
    if spec.combined:
        return cost_c(x, y, spec, extend) + cost_tilde(x, y, spec)
    return cost_c(x, y, spec, extend)


# -- entropies -----------------------------------------------------------------------


def psi(r, kappa: float):
    """((r^(k+1) - 1) - (k+1)(r - 1)) / k, written to stay accurate for small k and r ~ 1."""
    r = np.asarray(r, dtype=float)
    out = np.empty_like(r)
    pos = r > 0
    lr = np.log(r[pos])
    out[pos] = r[pos] * np.expm1(kappa * lr) / kappa - (r[pos] - 1.0)
    # r = 0: (-1 + (k+1)) / k = 1
    out[~pos] = 1.0
    return out


def _integrate(vals, x):
    return float(integrate.simpson(vals, x=x))


def _grid_data(rho, m: DensityModel, reference: Optional[DiscreteMeasure] = None):
    """Return (nodes, rho values, rho0 values, W values, integrator) for a 1D grid or a grid measure."""
    if isinstance(rho, DensityGrid1D):
        x = rho.x
        return rho.values, pdf(m, x), m.W(x), lambda v: _integrate(v, x)
    if isinstance(rho, DiscreteMeasure):
        if rho.kind != "grid":
            raise ValueError("entropies need a grid measure (cell densities)")
        vol = rho.cell_volume
        if reference is not None:
            rho0 = reference.densities()
        else:
            rho0 = pdf(m, rho.points)
        return rho.densities(), rho0, m.W(rho.points), lambda v: float(np.sum(v) * vol)
    raise TypeError("rho must be a DensityGrid1D or a grid DiscreteMeasure")


def _require_normalized(m):
    if not m.normalized:
        raise ValueError("entropies are defined for normalized models")
    if not math.isfinite(m.kappa):
        raise ValueError("entropies need a finite kappa")


def entropy_H(rho, m: DensityModel) -> float:
    """(kappa, W)-entropy (1/k) int (rho^(1+k) - rho) + ((k+1)/(-k)) int rho W.

    Returns inf when int rho W is infinite for the model family.
    """
    _require_normalized(m)
    k = m.kappa
    if m.raw_w.kind == "cauchy" and 2 * (m.beta - 1) <= m.dim:
        return math.inf
    r, _, W, quad = _grid_data(rho, m)
    return quad((r ** (1 + k) - r) / k) + m.kp.cost_factor * quad(r * W)


def relative_entropy(rho, m: DensityModel, reference: Optional[DiscreteMeasure] = None) -> float:
    """H(rho || rho_{k,W}) as the single nonnegative integral of rho0 W psi(rho / rho0).

    This equals (1/k) int (rho^(k+1) - (k+1) rho W) + int W^(1+1/k) pointwise, but
    avoids the cancellation between the three terms.
    """
    _require_normalized(m)
    k = m.kappa
    r, r0, W, quad = _grid_data(rho, m, reference)
    integrand = np.zeros_like(r)
    inside = r0 > 0
    ratio = r[inside] / r0[inside]
    integrand[inside] = r0[inside] * W[inside] * psi(ratio, k)
    out = ~inside & (r > 0)
    integrand[out] = r[out] ** (1 + k) / k - (1 + k) / k * r[out] * W[out]
    return quad(integrand)


# -- symmetric matrices --------------------------------------------------------------

EIG_GT_MINUS_ONE = "eig_gt_minus_one"
NONNEGATIVE = "nonnegative"


@dataclass(frozen=True)
class SymmetricMatrixSample:
    M: np.ndarray
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    domain: str

    @classmethod
    def from_matrix(cls, M, domain: str = EIG_GT_MINUS_ONE) -> "SymmetricMatrixSample":
        M = np.asarray(M, dtype=float)
        if M.ndim != 2 or M.shape[0] != M.shape[1]:
            raise ValueError("expected a square matrix")
        if not np.allclose(M, M.T, atol=1e-12, rtol=0):
            raise ValueError("matrix is not symmetric")
        lam, Q = np.linalg.eigh(M)
        if np.max(np.abs(Q @ np.diag(lam) @ Q.T - M)) > 1e-10 * max(1.0, np.abs(M).max()):
            raise ValueError("eigendecomposition does not reconstruct M")
        if domain == EIG_GT_MINUS_ONE and not np.all(lam > 0):
            raise ValueError("domain requires eigenvalues of M > 0 (eigenvalues of M - I > -1)")
        if domain == NONNEGATIVE and not np.all(lam >= -1e-12 * max(1.0, lam.max())):
            raise ValueError("domain requires a nonnegative matrix")
        if domain not in (EIG_GT_MINUS_ONE, NONNEGATIVE):
            raise ValueError(f"unknown domain {domain!r}")
        return cls(M, lam, Q, domain)

    @property
    def mu(self) -> np.ndarray:
        return self.eigenvalues - 1.0


def _haar(n, count, rng):
    A = rng.standard_normal((count, n, n))
    Q, R = np.linalg.qr(A)
    s = np.sign(np.diagonal(R, axis1=-2, axis2=-1))
    s[s == 0] = 1.0
    return Q * s[:, None, :]


def sample_matrices(n: int, count: int, domain: str, rng: np.random.Generator):
    """Random symmetric matrices Q diag(lam) Q^T with a spread of eigenvalue regimes.

    Returns (M, lam) where lam are the eigenvalues used.  ``eig_gt_minus_one`` draws
    lam > 0; ``nonnegative`` additionally plants exact zeros.
    """
    kind = rng.integers(0, 4, size=(count, n))
    lam = np.where(kind == 0, np.exp(rng.normal(0.0, 0.3, (count, n))),
          np.where(kind == 1, np.exp(rng.uniform(-6.0, 4.0, (count, n))),
          np.where(kind == 2, 1.0 + rng.uniform(-0.999, 3.0, (count, n)),
                   np.exp(rng.uniform(-1.0, 1.0, (count, n))))))
    if domain == NONNEGATIVE:
        zero = rng.random((count, n)) < 0.05
        lam = np.where(zero, 0.0, lam)
    elif domain != EIG_GT_MINUS_ONE:
        raise ValueError(f"unknown domain {domain!r}")
    Q = _haar(n, count, rng)
    M = np.einsum("kij,kj,klj->kil", Q, lam, Q)
    M = 0.5 * (M + np.swapaxes(M, -1, -2))
    return M, lam


def _eigs(M):
    if isinstance(M, SymmetricMatrixSample):
        return M.eigenvalues
    M = np.asarray(M, dtype=float)
    if M.ndim == 0:
        return M[None]
    if M.ndim == 1:
        raise ValueError("pass matrices with shape (..., n, n)")
    return np.linalg.eigvalsh(M)


def _G_from_eigs(lam, kappa):
    lam = np.asarray(lam, dtype=float)
    scale = np.maximum(1.0, np.abs(lam).max(axis=-1, keepdims=True))
    tiny = np.abs(lam) <= 1e-12 * scale
    if np.any((lam < 0) & ~tiny):
        raise ValueError("matrix has negative eigenvalues")
    singular = np.any(tiny | (lam <= 0), axis=-1)
    if kappa > 0 and np.any(singular):
        raise ValueError("det^(-kappa) is undefined for singular M when kappa > 0")
    trace = np.sum(lam - 1.0, axis=-1)
    with np.errstate(divide="ignore"):
        logdet = np.sum(np.log(np.where(tiny, 1.0, lam)), axis=-1)
    main = np.expm1(-kappa * logdet) / kappa
    # singular M with kappa < 0: det^(-kappa) extends by 0
    main = np.where(singular, -1.0 / kappa, main)
    return main + trace


def G_kappa(M, kappa: float):
    """(1/k) det^(-k)(M) - 1/k + tr(M - I)."""
    return _G_from_eigs(_eigs(M), kappa)


def G_scalar(m, kappa: float):
    """G_kappa for 1x1 matrices, vectorized over m."""
    return _G_from_eigs(np.asarray(m, dtype=float)[..., None], kappa)


def lemma_case1_bound(M, beta: float, c: float = LEMMA_C):
    """(lhs, rhs, margin) for G_{1/beta}(M) >= c sum_i min(mu_i^2, |mu_i|), mu = eig(M - I)."""
    if not beta > 0:
        raise ValueError("beta must be positive")
    lam = _eigs(M)
    if np.any(lam <= 0):
        raise ValueError("domain requires eigenvalues of M - I > -1")
    mu = lam - 1.0
    lhs = _G_from_eigs(lam, 1.0 / beta)
    rhs = c * np.sum(np.minimum(mu * mu, np.abs(mu)), axis=-1)
    return lhs, rhs, lhs - rhs


def scalar_log_bound(t, c: float = LEMMA_C):
    """Margin of log(1+t) <= t - c min(t^2, |t|), t >= -1 (+inf at t = -1)."""
    t = np.asarray(t, dtype=float)
    if np.any(t < -1):
        raise ValueError("t must be >= -1")
    with np.errstate(divide="ignore"):
        return t - c * np.minimum(t * t, np.abs(t)) - np.log1p(t)


def log_quadratic_bound(s, t):
    """Margin of log s <= log t + (s-t)/t - (s-t)^2 / (2 max(s,t)^2), s, t > 0."""
    s = np.asarray(s, dtype=float)
    t = np.asarray(t, dtype=float)
    if np.any(s <= 0) or np.any(t <= 0):
        raise ValueError("s and t must be positive")
    d = s - t
    return np.log(t / s) + d / t - d * d / (2.0 * np.maximum(s, t) ** 2)


def lemma_case2_bound(M, beta: float, n: Optional[int] = None):
    """(lhs, rhs, margin) for G_{-1/beta}(M) >= 3/(64 beta) (1 - n/beta)^2 F(||M - I||_HS)."""
    lam = _eigs(M)
    n = lam.shape[-1] if n is None else n
    if beta < n:
        raise ValueError("the Case 2 lemma needs beta >= n")
    lhs = _G_from_eigs(lam, -1.0 / beta)
    hs = np.sqrt(np.sum((lam - 1.0) ** 2, axis=-1))
    rhs = 3.0 / (64.0 * beta) * (1.0 - n / beta) ** 2 * F(hs)
    return lhs, rhs, lhs - rhs


def _sphere_points(n, count, rng):
    u = rng.standard_normal((count, n))
    return u / np.linalg.norm(u, axis=1, keepdims=True)


def trace_F_sphere_bound(M, mc_points: int = 10_000, rng: Optional[np.random.Generator] = None,
                         angles: int = 1024):
    """(lhs, rhs, margin, stderr) for tr F(M) >= (1/8) int_{S^{n-1}} F(sqrt(n) |M u|) dsigma(u).

    tr F(M) is taken spectrally as sum F(|lambda_i|).  The sphere average is exact
    for n = 1 (two points), a periodic trapezoid rule for n = 2 (stderr 0), and Monte
    Carlo with reported standard error for n >= 3.
    """
    M = np.asarray(M.M if isinstance(M, SymmetricMatrixSample) else M, dtype=float)
    single = M.ndim == 2
    if single:
        M = M[None]
    n = M.shape[-1]
    lam = np.linalg.eigvalsh(M)
    if np.any(lam <= -1):
        raise ValueError("eigenvalues must be > -1")
    lhs = np.sum(F(np.abs(lam)), axis=-1)
    if n == 1:
        vals = F(np.abs(M[:, 0, 0]))[:, None]
    elif n == 2:
        th = 2 * np.pi * np.arange(angles) / angles
        U = np.stack([np.cos(th), np.sin(th)], axis=-1)
        vals = F(math.sqrt(n) * np.linalg.norm(np.einsum("kij,pj->kpi", M, U), axis=-1))
    else:
        rng = rng if rng is not None else np.random.default_rng(0)
        U = _sphere_points(n, mc_points, rng)
        vals = F(math.sqrt(n) * np.linalg.norm(np.einsum("kij,pj->kpi", M, U), axis=-1))
    rhs = vals.mean(axis=1) / 8.0
    if n >= 3:
        stderr = vals.std(axis=1, ddof=1) / math.sqrt(vals.shape[1]) / 8.0
    else:
        stderr = np.zeros_like(rhs)
    out = lhs, rhs, lhs - rhs, stderr
    return tuple(float(v[0]) for v in out) if single else out


def sphere_norm_constant(n: int) -> float:
    """c_n = int_{S^{n-1}} |e_1 . u| dsigma(u) = Gamma(n/2) / (sqrt(pi) Gamma((n+1)/2))."""
    if n < 1:
        raise ValueError("n must be >= 1")
    return math.exp(special.gammaln(n / 2) - special.gammaln((n + 1) / 2)) / math.sqrt(math.pi)


def sphere_norm_envelope(nmax: int = 200):
    """(min, max) of c_n sqrt(n) over 1 <= n <= nmax."""
    vals = [sphere_norm_constant(n) * math.sqrt(n) for n in range(1, nmax + 1)]
    return min(vals), max(vals)
