"""Exact optimal transport: 1D monotone rearrangement and a network-simplex LP."""

from __future__ import annotations

import csv
import os
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy import integrate, sparse

from .measures import DensityGrid1D, DiscreteMeasure

for _backend in ("TENSORFLOW", "PYTORCH", "JAX", "CUPY"):
    os.environ.setdefault(f"POT_BACKEND_DISABLE_{_backend}", "1")

import ot  # noqa: E402

__all__ = [
    "MAX_ATOMS",
    "TransportPlan",
    "solve_discrete_ot",
    "MonotoneMap1D",
    "monotone_map_1d",
    "ma_residual",
    "transport_cost_along_map",
    "wasserstein_p",
    "quantile_coupling_cost",
    "quantile_atoms",
]

MAX_ATOMS = 2048


@dataclass(frozen=True)
class TransportPlan:
    source: DiscreteMeasure
    target: DiscreteMeasure
    coupling: sparse.coo_matrix
    total_cost: float
    dual_gap: float

    def marginal_error(self) -> float:
        P = self.coupling.tocsr()
        rows = np.asarray(P.sum(axis=1)).ravel()
        cols = np.asarray(P.sum(axis=0)).ravel()
        return float(max(np.abs(rows - self.source.weights).max(),
                         np.abs(cols - self.target.weights).max()))

    @property
    def certified(self) -> bool:
        return self.dual_gap <= 1e-9 * (1.0 + abs(self.total_cost))

    def to_csv(self, path) -> None:
        """Write the coupling as sparse (i, j, mass) triplets."""
        P = self.coupling
        with open(path, "w", newline="") as fh:
            out = csv.writer(fh)
            out.writerow(["i", "j", "mass"])
            for i, j, v in zip(P.row, P.col, P.data):
                out.writerow([int(i), int(j), repr(float(v))])


def solve_discrete_ot(mu: DiscreteMeasure, nu: DiscreteMeasure, cost) -> TransportPlan:
    """Exact Kantorovich LP with a dual-gap certificate."""
    C = np.ascontiguousarray(cost, dtype=float)
    a = np.ascontiguousarray(mu.weights, dtype=float)
    b = np.ascontiguousarray(nu.weights, dtype=float)
    if C.shape != (len(a), len(b)):
        raise ValueError(f"cost shape {C.shape} does not match marginals ({len(a)}, {len(b)})")
    if max(len(a), len(b)) > MAX_ATOMS:
        raise ValueError(f"at most {MAX_ATOMS} atoms per side")
    if not np.all(np.isfinite(C)) or np.any(C < 0):
        raise ValueError("cost must be finite and nonnegative")
    if abs(a.sum() - b.sum()) > 1e-12:
        raise ValueError("marginals carry different total mass")
    G, log = ot.emd(a, b, C, numItermax=50_000_000, log=True)
    if log.get("warning"):
        raise RuntimeError(f"network simplex did not converge: {log['warning']}")
    primal = float(np.sum(G * C))
    u, v = log["u"], log["v"]
    dual = float(u @ a + v @ b)
    # dual feasibility only matters where mass can sit
    viol = (u[:, None] + v[None, :] - C)[np.ix_(a > 0, b > 0)]
    infeas = max(0.0, float(viol.max())) if viol.size else 0.0
    P = sparse.coo_matrix(np.where(G > 0, G, 0.0))
    return TransportPlan(mu, nu, P, primal, abs(primal - dual) + infeas)


# -- 1D monotone rearrangement -------------------------------------------------------


@dataclass(frozen=True)
class MonotoneMap1D:
    grid: np.ndarray
    T: np.ndarray
    theta_grad: np.ndarray
    theta_hess: np.ndarray
    source_density: np.ndarray  # normalized source density at the grid nodes

    @property
    def dT(self) -> np.ndarray:
        return 1.0 + self.theta_hess


def _cumulative(grid: DensityGrid1D):
    m = grid.cell_masses()
    tot = m.sum()
    if not tot > 0:
        raise ValueError("density grid carries no mass")
    left = np.concatenate([[0.0], np.cumsum(m)]) / tot
    right = np.concatenate([np.cumsum(m[::-1])[::-1], [0.0]]) / tot
    return left, right, tot


def _quantile(grid: DensityGrid1D, level, from_right, iters: int = 60):
    """Inverse CDF; ``level`` is the left mass, or the right mass where ``from_right``."""
    x = grid.x
    left, right, tot = _cumulative(grid)
    level = np.asarray(level, dtype=float)
    from_right = np.asarray(from_right, dtype=bool)
    N = len(x) - 1
    jl = np.clip(np.searchsorted(left, level, side="right") - 1, 0, N - 1)
    # right masses decrease; cell j holds levels in (right[j+1], right[j]]
    jr = np.clip(np.searchsorted(-right, -level, side="left") - 1, 0, N - 1)
    j = np.where(from_right, jr, jl)
    resid = np.where(from_right, level - right[j + 1], level - left[j])
    lo, hi = x[j].copy(), x[j + 1].copy()
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        got = np.where(from_right,
                       grid.partial_mass(mid, x[j + 1]),
                       grid.partial_mass(x[j], mid)) / tot
        # left mass grows with y, right mass shrinks
        go_left = np.where(from_right, got < resid, got >= resid)
        hi = np.where(go_left, mid, hi)
        lo = np.where(go_left, lo, mid)
    y = 0.5 * (lo + hi)
    y = np.where(~from_right & (level <= 0), x[0], y)
    y = np.where(from_right & (level <= 0), x[-1], y)
    return y


def monotone_map_1d(src: DensityGrid1D, tgt: DensityGrid1D) -> MonotoneMap1D:
    """T = G^-1 o F on the source nodes; tails are inverted from the nearer end."""
    left, right, tot = _cumulative(src)
    from_right = left > 0.5
    level = np.where(from_right, right, left)
    T = _quantile(tgt, level, from_right)
    if np.any(np.diff(T) < 0):
        T = np.maximum.accumulate(T)
    x = src.x
    dT = np.gradient(T, x, edge_order=2)
    return MonotoneMap1D(x, T, T - x, dT - 1.0, src.values / tot)


def ma_residual(tmap: MonotoneMap1D, src: DensityGrid1D, tgt: DensityGrid1D) -> float:
    """sup over interior nodes of |rho_src(x) - rho_tgt(T(x)) T'(x)| (both normalized)."""
    s_tot, t_tot = src.total(), tgt.total()
    x = tmap.grid[1:-1]
    r = src(x) / s_tot - tgt(tmap.T[1:-1]) / t_tot * tmap.dT[1:-1]
    return float(np.max(np.abs(r)))


def transport_cost_along_map(tmap: MonotoneMap1D, costfn: Callable) -> float:
    """int c(x, T(x)) rho_src(x) dx by Simpson on the map grid."""
    vals = np.asarray(costfn(tmap.grid, tmap.T), dtype=float) * tmap.source_density
    return float(integrate.simpson(vals, x=tmap.grid))


def quantile_coupling_cost(mu: DiscreteMeasure, nu: DiscreteMeasure, costfn: Callable) -> float:
    """Cost of the monotone (north-west corner) coupling of two 1D discrete measures."""
    if mu.dim != 1 or nu.dim != 1:
        raise ValueError("quantile coupling needs 1D measures")
    ix, iy = np.argsort(mu.points[:, 0], kind="stable"), np.argsort(nu.points[:, 0], kind="stable")
    x, a = mu.points[ix, 0], mu.weights[ix]
    y, b = nu.points[iy, 0], nu.weights[iy]
    ca, cb = np.cumsum(a), np.cumsum(b)
    ca[-1] = cb[-1] = 1.0
    levels = np.union1d(ca, cb)
    du = np.diff(np.concatenate([[0.0], levels]))
    mid = levels - 0.5 * du
    i = np.minimum(np.searchsorted(ca, mid), len(x) - 1)
    j = np.minimum(np.searchsorted(cb, mid), len(y) - 1)
    return float(np.sum(du * costfn(x[i], y[j])))


def wasserstein_p(mu: DiscreteMeasure, nu: DiscreteMeasure, p: float = 2.0, method: str = "auto") -> float:
    """W_p^p.  ``method`` is 'quantile' (1D only), 'lp', or 'auto' (quantile in 1D)."""
    if p < 1:
        raise ValueError("p must be >= 1")
    if method == "auto":
        method = "quantile" if mu.dim == 1 and nu.dim == 1 else "lp"
    if method == "quantile":
        return quantile_coupling_cost(mu, nu, lambda x, y: np.abs(x - y) ** p)
    if method != "lp":
        raise ValueError(f"unknown method {method!r}")
    C = np.linalg.norm(mu.points[:, None, :] - nu.points[None, :, :], axis=-1) ** p
    return solve_discrete_ot(mu, nu, C).total_cost


def quantile_atoms(density: Callable, axes, weights, k: int) -> DiscreteMeasure:
    """Knothe-Rosenblatt image of the k^n midpoint grid of the unit cube.

    ``density`` maps points (..., n) to values; ``axes``/``weights`` give a fine
    quadrature rule per coordinate for the marginals.  The first n-1 coordinates
    use marginals tabulated on the fine nodes; the last is inverted from the
    density itself.  All k^n atoms carry weight k^-n.
    """
    n = len(axes)
    u = (np.arange(k) + 0.5) / k
    level, from_right = np.where(u > 0.5, 1.0 - u, u), u > 0.5
    atoms = []

    def at(prefix, tail_shape):
        return [np.full(tail_shape, p) for p in prefix]

    def recurse(prefix):
        d = len(prefix)
        x = axes[d]
        if d == n - 1:
            def cond(t):
                t = np.asarray(t, dtype=float)
                return density(np.stack(at(prefix, t.shape) + [t], axis=-1))
            grid = DensityGrid1D(x, cond)
        else:
            mesh = np.meshgrid(x, *axes[d + 1:], indexing="ij")
            vals = density(np.stack(at(prefix, mesh[0].shape) + list(mesh), axis=-1))
            for w in weights[d + 1:][::-1]:
                vals = vals @ w
            grid = DensityGrid1D.from_values(x, np.maximum(vals, 0.0))
        for q in _quantile(grid, level, from_right):
            if d == n - 1:
                atoms.append(prefix + (float(q),))
            else:
                recurse(prefix + (float(q),))

    recurse(())
    pts = np.array(atoms)
    return DiscreteMeasure(pts, np.full(len(pts), 1.0 / len(pts)), kind="cloud")
