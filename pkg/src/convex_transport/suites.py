"""Verification suites: each suite plans a list of independent jobs, and each job
returns one or more records.  Jobs are pure functions of their arguments, so a
pool can run them in any order; the report sorts records by (suite, case id)."""

from __future__ import annotations

import math
import time
import zlib
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from . import functionals as fn
from . import inequalities as iq
from . import poincare as pc
from .measures import Case, model_grid, parse_model_id

SUITES = ("lemmas", "thm1", "decomp", "thm2", "thm3", "linearize", "bl", "bl-quant", "poincare")
RANDOMIZED = {"lemmas", "thm1", "thm2", "thm3", "all"}

BALLS_1D = ("ball:sigma=1,beta=1,n=1", "ball:sigma=1,beta=2,n=1", "ball:sigma=1,beta=5,n=1")
CAUCHY_1D = ("cauchy:beta=2,n=1", "cauchy:beta=3,n=1", "cauchy:beta=6,n=1")
BUILTIN_1D = BALLS_1D + CAUCHY_1D
BUILTIN_ND = ("ball:sigma=1,beta=2,n=2", "cauchy:beta=3,n=2")
CHAIN_MODELS = ("cauchy:beta=2,n=1", "cauchy:beta=3,n=1", "cauchy:beta=6,n=1",
                "cauchy:beta=4,n=2", "cauchy:beta=6,n=3")

THM1_EPS = (0.05, 0.1, 0.2)
REMAINDER_EPS = (0.1, 0.2)
PROFILES = ("bump", "odd", "even")
DECOMP_GRID = 4096
LINEARIZE_EPS = (0.1, 0.05, 0.025, 0.0125)


@dataclass
class SuiteConfig:
    suites: tuple = ("all",)
    models: Optional[tuple] = None
    grid: Optional[int] = None
    eps: Optional[tuple] = None
    seed: Optional[int] = None
    tol: dict = field(default_factory=dict)  # suite -> tolerance; "*" for all
    c_kappa: Optional[float] = None
    h: Optional[float] = None
    out: Optional[str] = None
    format: str = "json"
    jobs: int = 1

    def expanded(self) -> tuple:
        return SUITES if "all" in self.suites else tuple(self.suites)

    def tol_for(self, suite: str, default: Optional[float]):
        return self.tol.get(suite, self.tol.get("*", default))

    def echo(self) -> dict:
        return {"suites": list(self.suites), "models": list(self.models) if self.models else None,
                "grid": self.grid, "eps": list(self.eps) if self.eps else None, "seed": self.seed,
                "tol": dict(sorted(self.tol.items())), "c_kappa": self.c_kappa, "h": self.h,
                "format": self.format}


@dataclass
class Record:
    suite: str
    case_id: str
    model: str
    params: dict
    lhs: float
    rhs: float
    tol: float
    passed: bool
    extra: dict = field(default_factory=dict)
    runtime: float = 0.0

    @property
    def margin(self) -> float:
        return self.lhs - self.rhs

    @classmethod
    def from_case(cls, case: iq.InequalityCase, extra_ok: bool = True, **extra):
        params = dict(case.params)
        if case.seed is not None:
            params["seed"] = case.seed
        return cls(case.suite, case.case_id, case.model_id, params, float(case.lhs), float(case.rhs),
                   float(case.tolerance), bool(case.passed and extra_ok), {**case.extra, **extra})


@dataclass(frozen=True)
class Job:
    suite: str
    case_id: str
    func: Callable
    kwargs: dict

    def run(self) -> list:
        t0 = time.perf_counter()
        out = self.func(**self.kwargs)
        out = out if isinstance(out, list) else [out]
        dt = (time.perf_counter() - t0) / max(len(out), 1)
        for r in out:
            r.runtime = dt
        return out


def case_seed(seed: int, case_id: str) -> int:
    """Per-case seed derived from the run seed and the case id."""
    ss = np.random.SeedSequence(seed, spawn_key=(zlib.crc32(case_id.encode()),))
    return int(ss.generate_state(1)[0])


def _eps_tag(e: float) -> str:
    return f"{e:g}"


def _grid_nodes(grid: Optional[int], default: int) -> int:
    """Simpson needs an odd node count: ``grid`` counts intervals."""
    g = grid or default - 1
    return g + 1 if g % 2 == 0 else g + 2


# -- validated Poincare constants ----------------------------------------------------

_H_CACHE: dict = {}


def _empirical_c(m) -> float:
    key = ("C", m.model_id)
    if key not in _H_CACHE:
        _H_CACHE[key] = pc.cheeger_l1_check(m).c_min
    return _H_CACHE[key]


def validated_h(model_id: str, c_kappa: Optional[float] = None, h: Optional[float] = None):
    """PoincareEstimate for the normalized model: user h, the Cauchy chain, or a search."""
    key = (model_id, c_kappa, h)
    if key in _H_CACHE:
        return _H_CACHE[key]
    m = parse_model_id(model_id)
    if h is not None:
        est = pc.verify_weighted_poincare(m, h, method="UserSupplied")
    elif m.case is Case.CASE2 and m.raw_w.kind == "cauchy" and m.beta > m.dim:
        C = c_kappa if c_kappa is not None else _empirical_c(m)
        est = pc.cauchy_chain_estimate(m, C)
    else:
        est = pc.search_h(m)
    _H_CACHE[key] = est
    return est


# -- lemmas --------------------------------------------------------------------------


def _rng(seed, tag):
    return np.random.default_rng(case_seed(seed, tag))


def _batch(case_id, lhs, rhs, tol, **params):
    return Record("lemmas", case_id, "-", params, float(lhs), float(rhs), tol,
                  bool(lhs - rhs >= -tol))


def job_g_nonneg(n, beta, sign, seed, count, tol):
    kappa = sign / beta
    dom = fn.EIG_GT_MINUS_ONE if kappa > 0 else fn.NONNEGATIVE
    cid = f"G/n={n}/kappa={'+' if sign > 0 else '-'}1/{beta:g}"
    M, lam = fn.sample_matrices(n, count, dom, _rng(seed, cid))
    G = fn.G_kappa(M, kappa)
    return _batch(cid, float(G.min()), 0.0, tol, n=n, kappa=kappa, samples=count, domain=dom)


def job_lemma_case1(n, beta, seed, count, tol):
    cid = f"case1-lemma/n={n}/beta={beta:g}"
    M, _ = fn.sample_matrices(n, count, fn.EIG_GT_MINUS_ONE, _rng(seed, cid))
    lhs, rhs, margin = fn.lemma_case1_bound(M, beta)
    i = int(np.argmin(margin))
    return _batch(cid, lhs[i], rhs[i], tol, n=n, beta=beta, c=fn.LEMMA_C, samples=count,
                  worst_index=i)


def job_lemma_case2(n, beta, seed, count, tol):
    cid = f"case2-lemma/n={n}/beta={beta:g}"
    M, _ = fn.sample_matrices(n, count, fn.NONNEGATIVE, _rng(seed, cid))
    lhs, rhs, margin = fn.lemma_case2_bound(M, beta, n)
    i = int(np.argmin(margin))
    return _batch(cid, lhs[i], rhs[i], tol, n=n, beta=beta, samples=count, worst_index=i)


def job_scalar_bounds(tol):
    t = np.concatenate([np.linspace(-1.0, 3.0, 400001), np.geomspace(3.0, 1e8, 20001)])
    m1 = fn.scalar_log_bound(t)
    s = np.geomspace(1e-6, 1e6, 1201)
    S, T = np.meshgrid(s, s, indexing="ij")
    m2 = fn.log_quadratic_bound(S, T)
    x = np.linspace(-50.0, 50.0, 100001)
    m3 = 3 * (1 + x * x) - (1 + np.abs(x)) ** 2
    return [_batch("scalar/log1p-c", float(m1.min()), 0.0, tol, c=fn.LEMMA_C, points=len(t)),
            _batch("scalar/log-quadratic", float(m2.min()), 0.0, tol, points=m2.size),
            _batch("scalar/square-of-sum", float(m3.min()), 0.0, tol, points=len(x))]


def job_trace_sphere(n, seed, count, mc_points):
    cid = f"trace-F-sphere/n={n}"
    M, _ = fn.sample_matrices(n, count, fn.EIG_GT_MINUS_ONE, _rng(seed, cid))
    M = M - np.eye(n)
    rng = _rng(seed, cid + "/sphere")
    worst = (math.inf, 0.0, 0.0, 0.0)
    for k in range(0, count, 50):
        lhs, rhs, margin, se = fn.trace_F_sphere_bound(M[k:k + 50], mc_points, rng)
        j = int(np.argmin(margin + 3 * se))
        if margin[j] + 3 * se[j] < worst[0]:
            worst = (margin[j] + 3 * se[j], lhs[j], rhs[j], se[j])
    allowance = 3 * worst[3]
    return Record("lemmas", cid, "-", {"n": n, "samples": count, "sphere_points": mc_points},
                  float(worst[1]), float(worst[2]), float(allowance), bool(worst[0] >= 0),
                  {"stderr": float(worst[3])})


def plan_lemmas(cfg: SuiteConfig) -> list:
    tol = cfg.tol_for("lemmas", 1e-12)
    count = 10_000
    jobs = []
    for n in range(1, 6):
        betas = sorted({1.0, 2.0, 5.0, float(n), 2.0 * n})
        for b in betas:
            jobs.append(Job("lemmas", f"G/n={n}/+{b:g}", job_g_nonneg,
                            dict(n=n, beta=b, sign=1.0, seed=cfg.seed, count=count, tol=tol)))
            if b >= n:
                jobs.append(Job("lemmas", f"G/n={n}/-{b:g}", job_g_nonneg,
                                dict(n=n, beta=b, sign=-1.0, seed=cfg.seed, count=count, tol=tol)))
        for b in betas:
            jobs.append(Job("lemmas", f"case1/n={n}/{b:g}", job_lemma_case1,
                            dict(n=n, beta=b, seed=cfg.seed, count=count, tol=tol)))
            if b >= n:
                jobs.append(Job("lemmas", f"case2/n={n}/{b:g}", job_lemma_case2,
                                dict(n=n, beta=b, seed=cfg.seed, count=count, tol=tol)))
    jobs.append(Job("lemmas", "scalar", job_scalar_bounds, dict(tol=tol)))
    for n in (1, 2, 3):
        jobs.append(Job("lemmas", f"sphere/n={n}", job_trace_sphere,
                        dict(n=n, seed=cfg.seed, count=1000, mc_points=10_000)))
    return jobs


# -- Theorem 1 -----------------------------------------------------------------------


def job_thm1(case_id, model_id, family, eps, seed, grid, tol):
    m = parse_model_id(model_id)
    pert = iq.build_perturbation(m, family, eps, seed=seed)
    rho = pert
    if m.dim == 1:
        rho = iq.perturbed_grid(m, pert, model_grid(m, grid, iq.GRID_TAIL))
    params = {"family": family, "eps": eps, "grid": grid if m.dim == 1 else iq.ATOMS[m.dim] ** m.dim}
    case = iq.verify_thm1(m, rho, tol, case_id, params, seed)
    return Record.from_case(case)


def _models(cfg, default):
    return tuple(cfg.models) if cfg.models else default


def plan_thm1(cfg: SuiteConfig) -> list:
    grid = _grid_nodes(cfg.grid, iq.GRID_1D)
    if cfg.models:
        plan = [(mid, ("bump",), cfg.eps or (0.2,)) for mid in cfg.models]
    else:
        plan = [(mid, PROFILES, cfg.eps or THM1_EPS) for mid in BUILTIN_1D]
        plan += [(mid, ("bump", "odd"), cfg.eps or (0.1, 0.2)) for mid in BUILTIN_ND]
    jobs = []
    for mid, fams, epss in plan:
        dim = parse_model_id(mid).dim
        for fam in fams:
            for e in epss:
                cid = f"{mid}/{fam}/eps={_eps_tag(e)}"
                jobs.append(Job("thm1", cid, job_thm1, dict(
                    case_id=cid, model_id=mid, family=fam, eps=float(e),
                    seed=case_seed(cfg.seed, cid), grid=grid,
                    tol=cfg.tol_for("thm1", iq.TOL_1D if dim == 1 else iq.TOL_ND))))
    return jobs


# -- decomposition -------------------------------------------------------------------


def job_decomp(case_id, model_id, family, eps, grid, tol):
    m = parse_model_id(model_id)
    pert = iq.build_perturbation(m, family, eps, seed=0)
    res = []
    for nodes in (grid, 2 * grid - 1):
        rho = iq.perturbed_grid(m, pert, model_grid(m, nodes, iq.GRID_TAIL))
        res.append(iq.decomposition_check(m, rho))
    ratio = res[1]["residual"] / res[0]["residual"] if res[0]["residual"] > 0 else 0.0
    ok = ratio <= 0.6
    return Record("decomp", case_id, model_id, {"family": family, "eps": eps, "grid": grid - 1},
                  tol, res[0]["residual"], 0.0, bool(res[0]["residual"] <= tol and ok),
                  {"residual_fine": res[1]["residual"], "ratio": ratio,
                   "entropy": res[0]["entropy"], "transport_term": res[0]["transport_term"],
                   "hessian_term": res[0]["hessian_term"]})


def plan_decomp(cfg: SuiteConfig) -> list:
    grid = _grid_nodes(cfg.grid, DECOMP_GRID + 1)
    tol = cfg.tol_for("decomp", 1e-4)
    jobs = []
    for mid in _models(cfg, BUILTIN_1D):
        if parse_model_id(mid).dim != 1:
            continue
        for fam in ("bump", "odd"):
            for e in cfg.eps or (0.1,):
                cid = f"{mid}/{fam}/eps={_eps_tag(e)}"
                jobs.append(Job("decomp", cid, job_decomp, dict(
                    case_id=cid, model_id=mid, family=fam, eps=float(e), grid=grid, tol=tol)))
    return jobs


# -- Theorems 2 and 3, remainder form ------------------------------------------------


def job_remainder(suite, case_id, model_id, family, eps, seed, c_kappa, h, tol):
    m = parse_model_id(model_id)
    est = validated_h(model_id, c_kappa, h)
    pert = iq.build_perturbation(m, family, eps, match_center_of_mass=True, seed=seed)
    params = {"family": family, "eps": eps, "h_method": est.method, "family_hash": est.family_hash}
    if not est.validated:
        return Record(suite, case_id, model_id, {**params, "h": est.h_candidate}, math.nan, math.nan,
                      tol or 0.0, False, {"reason": "h not validated", "worst_margin": est.worst_margin})
    verify = iq.verify_thm2 if m.case is Case.CASE1 else iq.verify_thm3
    case = verify(m, pert, est, tol=tol, case_id=case_id, params=params, seed=seed)
    stronger = case.rhs >= case.extra["rhs_thm1"] - 1e-12
    out = [Record.from_case(case, stronger, rhs_dominates=bool(stronger))]
    if m.dim == 1:
        rc = iq.remainder_check(m, pert, est, tol=tol, case_id=case_id + "/remainder", params=params,
                                seed=seed)
        rc.suite = suite
        out.append(Record.from_case(rc))
    return out


def _plan_remainder(cfg, suite, models_1d, model_nd):
    jobs = []
    models = cfg.models or models_1d + (model_nd,)
    for mid in models:
        m = parse_model_id(mid)
        want = Case.CASE1 if suite == "thm2" else Case.CASE2
        if m.case is not want:
            continue
        fams = PROFILES if m.dim == 1 else ("bump", "odd")
        epss = cfg.eps or (REMAINDER_EPS if m.dim == 1 else (0.1,))
        for fam in fams:
            for e in epss:
                cid = f"{mid}/{fam}/eps={_eps_tag(e)}"
                jobs.append(Job(suite, cid, job_remainder, dict(
                    suite=suite, case_id=cid, model_id=mid, family=fam, eps=float(e),
                    seed=case_seed(cfg.seed, cid), c_kappa=cfg.c_kappa, h=cfg.h,
                    tol=cfg.tol_for(suite, iq.TOL_1D if m.dim == 1 else iq.TOL_ND))))
    return jobs


def plan_thm2(cfg):
    return _plan_remainder(cfg, "thm2", BALLS_1D, BUILTIN_ND[0])


def plan_thm3(cfg):
    return _plan_remainder(cfg, "thm3", CAUCHY_1D, BUILTIN_ND[1])


# -- linearization -------------------------------------------------------------------


def job_linearize(case_id, model_id, family, eps_list, tol, transport):
    m = parse_model_id(model_id)
    g = iq.build_perturbation(m, family, 0.0, params={"center": [0.2], "width": 1.0}
                              if family == "bump" else None)
    res = iq.entropy_linearization(m, g, eps_list)
    errs = res.errors
    # at most one non-monotone step along the sweep
    floor = 1e-12 * max(abs(res.target), 1e-300)
    bumps = sum(1 for a, b in zip(errs, errs[1:]) if b > a + floor)
    out = [Record("linearize", case_id + "/entropy", model_id, {"family": family, "eps": list(eps_list)},
                  tol, res.rel_error, 0.0, bool(res.rel_error <= tol and bumps <= 1),
                  {"extrapolated": res.extrapolated, "target": res.target,
                   "ratios": list(res.ratios), "non_monotone_steps": bumps})]
    if transport:
        ests, lb = iq.transport_linearization_lb(m, g, eps_list=eps_list)
        out.append(Record("linearize", case_id + "/transport", model_id,
                          {"family": family, "eps": list(eps_list)}, float(min(ests)), float(lb),
                          iq.TOL_1D, bool(min(ests) - lb >= -iq.TOL_1D), {"estimates": list(ests)}))
    return out


def plan_linearize(cfg):
    eps = tuple(cfg.eps) if cfg.eps and len(cfg.eps) > 1 else LINEARIZE_EPS
    tol = cfg.tol_for("linearize", 1e-3)
    jobs = []
    for mid in _models(cfg, BUILTIN_1D):
        if parse_model_id(mid).dim != 1:
            continue
        for fam in ("odd", "even", "bump"):
            cid = f"{mid}/{fam}"
            jobs.append(Job("linearize", cid, job_linearize, dict(
                case_id=cid, model_id=mid, family=fam, eps_list=eps, tol=tol,
                transport=fam == "odd")))
    return jobs


# -- Brascamp-Lieb -------------------------------------------------------------------


def _bl_functions(m, against_linear):
    out = []
    degrees = range(2, 5) if against_linear else range(1, 5)
    for d in degrees:
        out.append(iq.orthogonalize(m, iq.polynomial_test_function([0.0] * d + [1.0], f"x^{d}"),
                                    against_linear))
    for tf in iq.bounded_test_functions():
        out.append(iq.orthogonalize(m, tf, against_linear))
    return out


def job_bl(model_id, tol):
    m = parse_model_id(model_id)
    out = []
    for tf in _bl_functions(m, False):
        case = iq.verify_bl(m, tf, tol, f"{model_id}/{tf.label}")
        out.append(Record.from_case(case))
    return out


def job_bl_quant(model_id, tol, c_kappa, h):
    m = parse_model_id(model_id)
    est = validated_h(model_id, c_kappa, h)
    out = []
    for tf in _bl_functions(m, True):
        if not iq.bl_integrable(m, tf):
            continue
        cid = f"{model_id}/{tf.label}"
        if not est.validated:
            out.append(Record("bl-quant", cid, model_id, {"g": tf.label, "h": est.h_candidate},
                              math.nan, math.nan, tol, False, {"reason": "h not validated"}))
            continue
        case = iq.verify_bl_quant(m, tf, est, tol=tol, case_id=cid)
        sharper = case.lhs <= case.extra["lhs_thm5"] * (1 + 1e-12)
        case.params.update({"h_method": est.method})
        out.append(Record.from_case(case, sharper, sharpens=bool(sharper)))
    return out


def plan_bl(cfg):
    tol = cfg.tol_for("bl", 1e-9)
    return [Job("bl", mid, job_bl, dict(model_id=mid, tol=tol))
            for mid in _models(cfg, BUILTIN_1D) if parse_model_id(mid).dim == 1]


def plan_bl_quant(cfg):
    tol = cfg.tol_for("bl-quant", 1e-9)
    return [Job("bl-quant", mid, job_bl_quant, dict(model_id=mid, tol=tol, c_kappa=cfg.c_kappa, h=cfg.h))
            for mid in _models(cfg, BUILTIN_1D) if parse_model_id(mid).dim == 1]


# -- weighted Poincare ---------------------------------------------------------------


def job_poincare_model(model_id, c_kappa, h):
    m = parse_model_id(model_id)
    out = []
    est = validated_h(model_id, c_kappa, h)
    out.append(Record("poincare", f"{model_id}/h", model_id,
                      {"method": est.method, "h": est.h_candidate, "family_hash": est.family_hash,
                       "family_size": est.test_family_size, "center": est.center},
                      est.worst_margin, 0.0, pc.VALIDATION_TOL, est.validated, dict(est.details)))
    if m.case is Case.CASE2 and m.raw_w.kind == "cauchy" and m.beta > m.dim:
        # the L1 step holds on the family exactly when C >= the empirical minimal constant
        C = c_kappa if c_kappa is not None else _empirical_c(m)
        ch = pc.cheeger_l1_check(m, C)
        out.append(Record("poincare", f"{model_id}/cheeger", model_id,
                          {"C_kappa": C, "m": ch.m, "C_source": "user" if c_kappa else "empirical"},
                          C, ch.c_min, 1e-12, ch.validated, {"C_kappa_empirical": ch.c_min}))
        raw = parse_model_id(model_id, rescale=False)
        gm = pc.geometric_mean_radius(raw)
        qs = [v for _, v in gm.m_q]
        mono = all(b >= a - 1e-12 for a, b in zip(qs, qs[1:]))
        out.append(Record("poincare", f"{model_id}/m-vs-m1", model_id,
                          {"m_q": [list(p) for p in gm.m_q]}, gm.m1 if 1.0 in dict(gm.m_q) else math.inf,
                          gm.m, 1e-10, bool(mono and gm.m <= (gm.m1 if 1.0 in dict(gm.m_q) else math.inf)
                                            + 1e-10), {"power_means_monotone": mono}))
        mu = pc.quadrature_measure(m)
        omega = lambda X: gm.m + np.linalg.norm(X, axis=-1) / (m.beta - m.dim)
        tr = pc.proposition1_transfer(mu, omega, est.h_candidate or 1.0)
        hyp, con = tr["hypothesis"], tr["conclusion"]
        held = con[hyp >= 0]
        out.append(Record("poincare", f"{model_id}/transfer", model_id,
                          {"h": est.h_candidate, "hypothesis_holds": int((hyp >= 0).sum())},
                          float(held.min()) if held.size else 0.0, 0.0, pc.VALIDATION_TOL,
                          tr["implication_holds"]))
    return out


def job_laplace(n):
    beta = 100.0 * (n + 1)
    num, asym, ratio = pc.laplace_In(n, beta)
    return Record("poincare", f"laplace/n={n}", "-", {"n": n, "beta": beta}, 0.05, abs(ratio - 1.0),
                  0.0, bool(abs(ratio - 1.0) <= 0.05), {"numeric": num, "asymptotic": asym})


def job_f_algebra():
    a = np.concatenate([np.linspace(0, 10, 2001), np.geomspace(10, 1e6, 400)])
    b = np.concatenate([np.linspace(0, 10, 2001), np.geomspace(10, 1e6, 400)])
    A, B = np.meshgrid(a, b, indexing="ij")
    bound = np.maximum(A, A * A) * fn.F(B)
    m1 = (bound - fn.F(A * B)) / (1.0 + bound)  # relative: the products reach 1e18
    t = np.concatenate([np.linspace(0, 100, 100001), np.geomspace(100, 1e12, 2001)])
    m2 = fn.F(t) / 3.0 - fn.F(t / 12.0)
    tol = 1e-12
    return [Record("poincare", "F-algebra/product", "-", {"points": m1.size}, float(m1.min()), 0.0,
                   tol, bool(m1.min() >= -tol)),
            Record("poincare", "F-algebra/twelfth", "-", {"points": t.size}, float(m2.min()), 0.0,
                   tol, bool(m2.min() >= -tol))]


def plan_poincare(cfg):
    models = _models(cfg, CHAIN_MODELS + BALLS_1D)
    jobs = [Job("poincare", mid, job_poincare_model, dict(model_id=mid, c_kappa=cfg.c_kappa, h=cfg.h))
            for mid in models]
    jobs += [Job("poincare", f"laplace/{n}", job_laplace, dict(n=n)) for n in range(4)]
    jobs.append(Job("poincare", "F-algebra", job_f_algebra, {}))
    return jobs


PLANNERS = {"lemmas": plan_lemmas, "thm1": plan_thm1, "decomp": plan_decomp, "thm2": plan_thm2,
            "thm3": plan_thm3, "linearize": plan_linearize, "bl": plan_bl, "bl-quant": plan_bl_quant,
            "poincare": plan_poincare}


def plan(cfg: SuiteConfig) -> list:
    jobs = []
    for s in cfg.expanded():
        jobs.extend(PLANNERS[s](cfg))
    return jobs
