"""``polyflux <command> --config <file> [--out <dir>] [--seed N] [--figures]``

Exit codes: 0 success, 1 an asserted check failed, 2 usage or config error.
"""

from __future__ import annotations

import argparse
import os
import sys

import numpy as np

from . import data as data_mod
from .config import COMMANDS, ConfigError, RunConfig, parse_config
from .io import FIELD_HEADER, field_rows, read_field_csv, write_csv, write_json
from .mollify import convergence_study
from .pwl import biconjugate, conjugate
from .stochastic import EnsembleConfigError, PathConfig, ensemble_run, variance_profile
from .variational import SharpKernel, solve_field
from .verify import (TestBump, VerifyReport, entropy_check, field_consistency_check,
                     lipschitz_bounds_check, monotonicity_check, tv_bound_check, weak_residual)

EXIT_OK, EXIT_CHECK, EXIT_USAGE = 0, 1, 2


class _Run:
    """Output plumbing shared by the commands."""

    def __init__(self, cfg: RunConfig, out_dir: str, figures: bool):
        self.cfg = cfg
        self.dir = out_dir
        self.figures = figures
        self.sha = cfg.sha256
        self.written: list[str] = []

    def path(self, name: str) -> str:
        prefix = self.cfg.output.get("prefix")
        return os.path.join(self.dir, f"{prefix}_{name}" if prefix else name)

    def csv(self, name, header, rows):
        self.written.append(write_csv(self.path(name), header, rows, self.sha))

    def json(self, name, payload):
        self.written.append(write_json(self.path(name), payload, self.sha, self.cfg.resolved))

    def figure(self, fn, name, *args):
        if self.figures:
            from . import plotting
            self.written.append(getattr(plotting, fn)(*args, self.path(name)))


def _build_data(cfg: RunConfig):
    obj = dict(cfg.data)
    if obj["kind"] == "brownian" and obj.get("seed") is None:
        obj["seed"] = cfg.seed
    try:
        return data_mod.from_json(obj)
    except (OSError, ValueError, KeyError) as exc:
        raise ConfigError(f"data: {exc}") from None


def _report_rows(reports):
    return [(r.check, "" if r.passed is None else r.passed, r.value, r.tolerance) for r in reports]


def _failed(reports) -> bool:
    return any(r.passed is False for r in reports)


# ------------------------------------------------------------------ commands

def cmd_conjugate(run: _Run) -> int:
    H = run.cfg.flux
    L = conjugate(H)
    slopes = list(L.segment_slopes) + [None]
    run.csv("conjugate.csv", ("p", "L", "slope_right"),
            zip(L.break_points, L.values_at_breaks, slopes))
    q = np.linspace(min(H.break_points) - 2.0, max(H.break_points) + 2.0, 1001)
    err = float(np.max(np.abs(biconjugate(L)(q) - H(q))))
    check = VerifyReport("biconjugate_round_trip", err <= 1e-10, err, 1e-10, {"points": q.size})
    run.json("conjugate.json", {"conjugate": L.to_json(), "checks": [check.to_json()]})
    run.figure("conjugate_figure", "conjugate.png", L)
    return EXIT_CHECK if not check.passed else EXIT_OK


def _solve_all(run: _Run, g, name: str):
    kernel = SharpKernel(run.cfg.flux)
    x = run.cfg.x_grid()
    workers = max(1, int(os.environ.get("POLYFLUX_THREADS", "1") or 1))
    fields = [solve_field(kernel, g, x, t, run.cfg.search, workers=workers) for t in run.cfg.times]
    for k, fld in enumerate(fields):
        run.csv(f"{name}_t{k}.csv", FIELD_HEADER, field_rows(fld))
    return kernel, fields


def cmd_solve(run: _Run) -> int:
    g = _build_data(run.cfg)
    _, fields = _solve_all(run, g, "solve")
    run.json("solve.json", {"fields": [f.to_json() for f in fields]})
    run.figure("field_figure", "solve.png", fields)
    return EXIT_OK


def cmd_discrete(run: _Run) -> int:
    g = _build_data(run.cfg)
    if not isinstance(g, data_mod.PiecewiseConstantDerivative):
        raise ConfigError("data.kind: discrete needs piecewise_constant data")
    if not g.matches(run.cfg.flux):
        raise ConfigError("data.values: discrete data values must be break points of the flux")
    _, fields = _solve_all(run, g, "discrete")
    breaks = set(run.cfg.flux.break_points)
    checks = []
    for fld in fields:
        outside = [float(w) for w in fld.w_values if float(w) not in breaks]
        checks.append(VerifyReport("range_confinement", not outside, float(len(outside)), 0.0,
                                   {"t": fld.t, "values": sorted({float(w) for w in fld.w_values})}))
    run.csv("discrete_report.csv", ("check", "passed", "value", "tolerance"), _report_rows(checks))
    run.json("discrete.json", {"fields": [f.to_json() for f in fields],
                               "checks": [c.to_json() for c in checks]})
    run.figure("field_figure", "discrete.png", fields)
    return EXIT_CHECK if _failed(checks) else EXIT_OK


def cmd_mollify(run: _Run) -> int:
    cfg = run.cfg
    g = _build_data(cfg)
    delta = None if cfg.delta_mode == "eps2" else float(cfg.delta_mode)
    t = cfg.times[0]
    rep = convergence_study(cfg.flux, g, cfg.x_grid(), t, cfg.epsilons, cfg.blend_width_factor,
                            cfg.blend, cfg.search, delta=delta)
    run.csv("mollify.csv", ("epsilon", "conj_gap", "w_err", "rate"), rep.rows())
    run.json("mollify.json", {"t": t, "report": rep.to_json()})
    run.figure("convergence_figure", "mollify.png", rep)
    return EXIT_OK


def cmd_verify(run: _Run) -> int:
    cfg = run.cfg
    g = _build_data(cfg)
    vcfg = cfg.verify
    reports = []
    if vcfg["field_file"] is not None:
        t = vcfg["field_t"] if vcfg["field_t"] is not None else cfg.times[0]
        if not os.path.isfile(vcfg["field_file"]):
            raise ConfigError(f"verify.field_file: file not found: {vcfg['field_file']}")
        try:
            fld = read_field_csv(vcfg["field_file"], t)
        except ValueError as exc:
            # a file that exists but does not parse is a failed check, not a usage error
            fld = None
            reports.append(VerifyReport("field_file_readable", False, 1.0, 0.0, {"error": str(exc)}))
        if fld is not None:
            reports += [monotonicity_check(fld, cfg.search.eta),
                        field_consistency_check(fld, g, vcfg["tol"]),
                        tv_bound_check(fld, g)]
    else:
        kernel, fields = _solve_all(run, g, "verify_field")
        for fld in fields:
            reports += [monotonicity_check(fld, cfg.search.eta),
                        field_consistency_check(fld, g, vcfg["tol"]),
                        tv_bound_check(fld, g), entropy_check(fld, [0.05, 0.1, 0.5])]
        x = cfg.x_grid()
        picks = x[:: max(1, x.size // 8)]
        times = cfg.times
        x_pairs = list(zip(picks[:-1], picks[1:]))
        t_pairs = list(zip(times[:-1], times[1:])) or [(times[0], times[0] * 1.5)]
        reports += lipschitz_bounds_check(kernel, g, x_pairs, t_pairs, cfg=cfg.search)
        for b in vcfg["bumps"]:
            bump = TestBump(*b)

            def w_fn(xs, t, _k=kernel):
                if t == 0.0:
                    return np.asarray(g.gprime(xs), dtype=float)
                return solve_field(_k, g, xs, t, cfg.search).w_values

            res = [weak_residual(w_fn, cfg.flux, g.gprime, bump, h) for h in vcfg["h"]]
            reports.append(VerifyReport("weak_residual", None, abs(res[-1]), float("nan"),
                                        {"bump": list(b), "h": vcfg["h"], "residuals": res}))
    run.csv("verify.csv", ("check", "passed", "value", "tolerance"), _report_rows(reports))
    run.json("verify.json", {"reports": [r.to_json() for r in reports]})
    return EXIT_CHECK if _failed(reports) else EXIT_OK


def cmd_stochastic(run: _Run) -> int:
    cfg = run.cfg
    sc = cfg.stochastic
    x = np.asarray(sc["x"]) if sc["x"] is not None else cfg.x_grid()
    t = cfg.times[0]
    pcfg = PathConfig(step=sc["step"], scale=sc["scale"], margin=sc["margin"])
    try:
        stats = ensemble_run(cfg.flux, pcfg, x, t, sc["n_paths"], cfg.seed, cfg.search,
                             n_crosscheck=sc["crosscheck"])
    except EnsembleConfigError as exc:
        raise ConfigError(f"stochastic: {exc}") from None
    prof = variance_profile(stats)
    z = np.abs(stats.mean_w) / np.maximum(stats.ci_half / 3.0, 1e-300)
    # the mean-zero band is measured and reported; the trend and per-path checks are asserted
    mean_band = VerifyReport("mean_within_3se", None, float(np.max(z)), 3.0,
                             {"passed_per_x": (z <= 3.0).tolist(), "asserted": False})
    checks = list(stats.checks) + [prof["trend"], mean_band]
    run.csv("stochastic.csv", ("x", "mean_w", "var_w", "mean_ystar", "ci_half"), stats.rows())
    run.json("stochastic.json", {"stats": stats.to_json(),
                                 "variance_profile": {k: v for k, v in prof.items() if k != "trend"},
                                 "checks": [c.to_json() for c in checks]})
    run.figure("ensemble_figure", "stochastic.png", stats)
    return EXIT_CHECK if _failed(checks) else EXIT_OK


DISPATCH = {"conjugate": cmd_conjugate, "solve": cmd_solve, "discrete": cmd_discrete,
            "mollify": cmd_mollify, "verify": cmd_verify, "stochastic": cmd_stochastic}


def execute(cfg: RunConfig, out_dir: str | None = None, figures: bool = False) -> int:
    run = _Run(cfg, out_dir or cfg.output["dir"], figures)
    code = DISPATCH[cfg.command](run)
    for path in run.written:
        print(path)
    return code


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="polyflux", description=__doc__.splitlines()[0])
    ap.add_argument("command", choices=COMMANDS)
    ap.add_argument("--config", required=True, help="JSON file or inline JSON object")
    ap.add_argument("--out", default=None, help="output directory (overrides output.dir)")
    ap.add_argument("--seed", type=int, default=None)
    ap.add_argument("--figures", action="store_true", help="also write PNG figures (needs matplotlib)")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)      # exits 2 on usage errors
    try:
        cfg = parse_config(args.config, command=args.command, seed=args.seed)
        return execute(cfg, args.out, args.figures)
    except ConfigError as exc:
        print(f"polyflux: config error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except RuntimeError as exc:
        if "matplotlib" in str(exc):
            print(f"polyflux: {exc}", file=sys.stderr)
            return EXIT_USAGE
        raise


if __name__ == "__main__":
    sys.exit(main())
