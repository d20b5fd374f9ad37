"""Command line entry point: ``verify --suite thm1 --seed 7``.

Exit status: 0 all cases pass, 1 some case fails, 2 bad configuration, 3 a case
raised (the partial report is still written).
"""

from __future__ import annotations

import argparse
import os
import sys
import traceback
from concurrent.futures import ProcessPoolExecutor

from .measures import parse_model_id
from .report import VerificationReport, emit_table
from .suites import RANDOMIZED, SUITES, SuiteConfig, plan

EXIT_OK, EXIT_FAIL, EXIT_CONFIG, EXIT_RUNTIME = 0, 1, 2, 3


class ConfigError(ValueError):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise ConfigError(message)


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="verify", description="Numerically verify transport inequalities.")
    p.add_argument("--suite", action="append", choices=SUITES + ("all",),
                   help="suite to run (repeatable)")
    p.add_argument("--model", action="append", help="model id, e.g. cauchy:beta=2,n=1 (repeatable)")
    p.add_argument("--grid", type=int, help="1D grid intervals (default 4096)")
    p.add_argument("--eps", help="comma-separated perturbation sizes")
    p.add_argument("--seed", type=int)
    p.add_argument("--tol", help="tolerance, or suite=tol pairs separated by ';'")
    p.add_argument("--c-kappa", type=float, dest="c_kappa", help="constant of the L1 isoperimetric step")
    p.add_argument("--h", type=float, help="user-supplied Poincare constant")
    p.add_argument("--out", help="output path (default stdout)")
    p.add_argument("--format", choices=("json", "csv"))
    p.add_argument("--jobs", type=int, help="worker processes (default $CT_JOBS or 1)")
    p.add_argument("--config", help="key = value file mirroring the flags")
    return p


def read_config_file(path: str) -> dict:
    """``key = value`` lines; '#' comments; repeated keys accumulate for suite/model."""
    out: dict = {}
    try:
        lines = open(path).read().splitlines()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path!r}: {exc}") from None
    for num, line in enumerate(lines, 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, val = line.partition("=")
        if not sep:
            raise ConfigError(f"{path}:{num}: expected key = value")
        key = key.strip().replace("-", "_")
        val = val.strip()
        if key in ("suite", "model"):
            out.setdefault(key, []).append(val)
        else:
            out[key] = val
    return out


def _parse_tol(text):
    if text is None:
        return {}
    text = str(text).strip()
    if "=" not in text:
        return {"*": float(text)}
    out = {}
    for item in filter(None, (s.strip() for s in text.split(";"))):
        k, _, v = item.partition("=")
        if k.strip() not in SUITES:
            raise ConfigError(f"unknown suite {k!r} in --tol")
        out[k.strip()] = float(v)
    return out


def make_config(argv=None) -> SuiteConfig:
    args = build_parser().parse_args(argv)
    file_vals = read_config_file(args.config) if args.config else {}
    unknown = set(file_vals) - {"suite", "model", "grid", "eps", "seed", "tol", "c_kappa", "h", "out",
                                "format", "jobs"}
    if unknown:
        raise ConfigError(f"unknown config keys {sorted(unknown)}")

    def pick(name, conv=str):
        v = getattr(args, name)
        if v is not None:
            return v
        if name in file_vals:
            try:
                return conv(file_vals[name])
            except ValueError:
                raise ConfigError(f"bad value for {name}: {file_vals[name]!r}") from None
        return None

    try:
        suites = args.suite or file_vals.get("suite") or []
        if not suites:
            raise ConfigError("--suite is required")
        bad = [s for s in suites if s not in SUITES + ("all",)]
        if bad:
            raise ConfigError(f"unknown suite {bad[0]!r}")
        models = args.model or file_vals.get("model")
        for mid in models or ():
            try:
                parse_model_id(mid)
            except (ValueError, OSError) as exc:
                raise ConfigError(f"bad model id {mid!r}: {exc}") from None
        eps = pick("eps")
        eps = tuple(float(e) for e in str(eps).split(",") if e.strip()) if eps is not None else None
        if eps and any(not 0 <= e < 1 for e in eps):
            raise ConfigError("eps values must lie in [0, 1)")
        grid = pick("grid", int)
        if grid is not None and grid < 16:
            raise ConfigError("--grid must be at least 16")
        jobs = pick("jobs", int) or int(os.environ.get("CT_JOBS", "1") or 1)
        cfg = SuiteConfig(tuple(suites), tuple(models) if models else None, grid, eps,
                          pick("seed", int), _parse_tol(pick("tol")), pick("c_kappa", float),
                          pick("h", float), pick("out"), pick("format") or "json", max(1, jobs))
    except ValueError as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(str(exc)) from None
    if cfg.format not in ("json", "csv"):
        raise ConfigError(f"unknown format {cfg.format!r}")
    if cfg.seed is None and RANDOMIZED & set(cfg.suites):
        raise ConfigError("--seed is required for randomized suites")
    if cfg.c_kappa is not None and not cfg.c_kappa > 0:
        raise ConfigError("--c-kappa must be positive")
    if cfg.h is not None and cfg.h < 0:
        raise ConfigError("--h must be nonnegative")
    return cfg


def _run_job(job):
    return job.run()


def run(cfg: SuiteConfig) -> tuple:
    """Execute the configured suites; returns (report, exit status)."""
    report = VerificationReport(cfg.echo())
    status = EXIT_OK
    try:
        jobs = plan(cfg)
        if cfg.jobs > 1 and len(jobs) > 1:
            with ProcessPoolExecutor(cfg.jobs) as pool:
                for recs in pool.map(_run_job, jobs):
                    report.add(recs)
        else:
            for job in jobs:
                report.add(job.run())
    except Exception as exc:  # partial reports are valid documents
        report.complete = False
        report.error = f"{type(exc).__name__}: {exc}"
        traceback.print_exc(file=sys.stderr)
        status = EXIT_RUNTIME
    if status == EXIT_OK and not report.passed:
        status = EXIT_FAIL
    return report, status


def main(argv=None) -> int:
    try:
        cfg = make_config(argv)
    except ConfigError as exc:
        print(f"verify: error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    report, status = run(cfg)
    try:
        text = emit_table(report, cfg.format, cfg.out)
    except OSError as exc:
        print(f"verify: cannot write {cfg.out!r}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    if cfg.out is None:
        sys.stdout.write(text)
    s = report.summary()
    for suite, v in s.items():
        print(f"{suite}: {v['passed']}/{v['cases']} passed, worst margin {v['worst_margin']:.3e}",
              file=sys.stderr)
    return status


if __name__ == "__main__":
    sys.exit(main())
