"""Command-line entry points.

    dged simulate     --config RUN.json --out DIR
    dged audit-kernel --config RUN.json --cap 30 [--out DIR]
    dged sweep        --config RUN.json --n-list 16,32,64 --out DIR
    dged equilibrium  --config RUN.json --rho 1.0 [--out DIR]

Exit codes: 0 ok, 2 config error, 3 kernel-audit failure, 4 integrator
abort (or unbracketable equilibrium mass), 5 partial sweep failure.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from . import analysis
from .analysis import (EquilibriumError, detailed_balance_residual, equilibrium_from_mass, lyapunov_v,
                       profile_from_spec, stationarity, truncation_convergence)
from .config import ConfigError, RunConfig
from .integrate import IntegrationError, integrate
from .io import moment_summary, to_json_text, write_json, write_sweep, write_timeseries
from .kernels import audit_structure, certify_bound
from .state import build_initial

log = logging.getLogger("dged")

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_AUDIT = 3
EXIT_INTEGRATOR = 4
EXIT_PARTIAL = 5

DEFAULT_DRIFT_THRESHOLD = 1e-8


def _out_dir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _audit_or_fail(cfg: RunConfig, kernel, N: int, out: Path):
    rep = audit_structure(kernel, max(N, 2))
    if not rep.passed:
        for v in rep.violations[:20]:
            log.error("kernel audit: %s at %s (%s)", v.kind, v.triple, v.detail)
        write_json(cfg.output_path("audit", out), {"structure": rep.to_dict()})
    return rep


def cmd_simulate(args) -> int:
    try:
        cfg = RunConfig.load(args.config)
    except ConfigError as exc:
        log.error("%s", exc)
        return EXIT_CONFIG
    out = _out_dir(args)
    kernel = cfg.build_kernel()
    if not _audit_or_fail(cfg, kernel, cfg.N, out).passed:
        return EXIT_AUDIT
    try:
        state0 = build_initial(cfg.initial_spec(), cfg.variant, cfg.bath)
    except ValueError as exc:
        log.error("initial data: %s", exc)
        return EXIT_CONFIG

    diag = cfg.diagnostics
    sigma = None
    if diag.get("sigma"):
        s = diag["sigma"]
        sigma = analysis.SigmaFunction(s.get("family", "power"), exponent=s.get("exponent"),
                                       m_sigma=s.get("m_sigma"))
    O = None
    lyap = None
    if "lyapunov_profile" in diag:
        O = profile_from_spec(diag["lyapunov_profile"], cfg.N)
        lyap = lambda st: lyapunov_v(st, O)  # noqa: E731

    try:
        traj = integrate(kernel, state0, cfg.integrator_config(), sigma=sigma, lyapunov=lyap)
    except IntegrationError as exc:
        log.error("integrator abort: %s", exc)
        write_json(cfg.output_path("summary", out), {"config": cfg.to_dict(), "error": str(exc)})
        return EXIT_INTEGRATOR

    write_timeseries(cfg.output_path("timeseries", out), traj)
    summary = {"config": cfg.to_dict(), **moment_summary(traj.times, traj.values()),
               "step_stats": traj.stats.to_dict()}
    threshold = float(diag.get("drift_threshold", DEFAULT_DRIFT_THRESHOLD))
    flagged = []
    if summary["p1_drift"] > threshold:
        flagged.append("p1")
    # number is not conserved with a bath of void clusters
    if cfg.variant.value == "isolated" and summary["p0_drift"] > threshold:
        flagged.append("p0")
    summary["conservation"] = {"threshold": threshold, "flagged": flagged}
    for name in flagged:
        log.warning("conservation drift in %s exceeds %g", name, threshold)
    if sigma is not None:
        summary["sigma_moment"] = {"sigma": sigma.describe(),
                                   "series": [s.moments.sigma for s in traj.samples]}
        cert = cfg.certificate()
        if cert is not None and cfg.variant.value == "isolated":
            summary["sigma_moment"]["bound"] = analysis.check_moment_bound(traj, sigma, cert).to_dict()
    if lyap is not None:
        summary["lyapunov_series"] = [s.moments.lyapunov for s in traj.samples]
    write_json(cfg.output_path("summary", out), summary)
    return EXIT_OK


def cmd_audit_kernel(args) -> int:
    try:
        cfg = RunConfig.load(args.config)
    except ConfigError as exc:
        log.error("%s", exc)
        return EXIT_CONFIG
    if args.cap < 2:
        log.error("--cap must be >= 2")
        return EXIT_CONFIG
    kernel = cfg.build_kernel()
    report = {"kernel": kernel.describe(), "structure": audit_structure(kernel, args.cap).to_dict()}
    cert = cfg.certificate()
    if cert is not None:
        report["certificate"] = certify_bound(kernel, cert, args.cap).to_dict()
    passed = all(report[k]["passed"] for k in ("structure", "certificate") if k in report)
    report["passed"] = passed
    if args.out:
        write_json(cfg.output_path("audit", _out_dir(args)), report)
    else:
        sys.stdout.write(to_json_text(report))
    return EXIT_OK if passed else EXIT_AUDIT


def cmd_sweep(args) -> int:
    try:
        cfg = RunConfig.load(args.config)
        n_list = [int(x) for x in args.n_list.split(",") if x.strip()]
        if not n_list or any(b <= a for a, b in zip(n_list, n_list[1:])) or n_list[0] < 1:
            raise ConfigError(f"--n-list must be strictly increasing positive integers, got {args.n_list!r}")
    except (ConfigError, ValueError) as exc:
        log.error("%s", exc)
        return EXIT_CONFIG
    out = _out_dir(args)
    kernel = cfg.build_kernel()
    if not _audit_or_fail(cfg, kernel, n_list[-1], out).passed:
        return EXIT_AUDIT
    icfg = cfg.integrator_config()
    try:
        table = truncation_convergence(kernel, cfg.initial_spec(n_list[0]), icfg.sample_times, n_list,
                                       cfg.variant, cfg.bath, icfg)
    except ValueError as exc:
        log.error("%s", exc)
        return EXIT_CONFIG
    write_sweep(cfg.output_path("sweep", out), table)
    for N, msg in table.failures.items():
        log.error("N=%d failed: %s", N, msg)
    return EXIT_PARTIAL if table.failures else EXIT_OK


def cmd_equilibrium(args) -> int:
    try:
        cfg = RunConfig.load(args.config)
        O = profile_from_spec(cfg.diagnostics.get("lyapunov_profile"), cfg.N)
    except (ConfigError, ValueError) as exc:
        log.error("%s", exc)
        return EXIT_CONFIG
    if not args.rho > 0:
        log.error("--rho must be positive")
        return EXIT_CONFIG
    try:
        eq = equilibrium_from_mass(O, cfg.N, args.rho)
    except EquilibriumError as exc:
        log.error("%s", exc)
        return EXIT_INTEGRATOR
    kernel = cfg.build_kernel()
    state = eq.state(cfg.variant)
    if cfg.variant.value == "non-isolated":
        log.info("equilibrium state carries c_0 = O_0 = 1 regardless of the configured bath")
    res = detailed_balance_residual(kernel, O, cfg.N)
    rhs_max, scale = stationarity(kernel, state)
    payload = {"config": cfg.to_dict(), "rho": args.rho, **eq.to_dict(),
               "detailed_balance_residual": res.to_dict(),
               "rhs_max_norm": rhs_max, "flux_scale": scale,
               "lyapunov_v": lyapunov_v(state, O)}
    if args.out:
        write_json(cfg.output_path("equilibrium", _out_dir(args)), payload)
    else:
        sys.stdout.write(to_json_text(payload))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="dged", description="Truncated generalized exchange-driven cluster system")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="integrate one configuration")
    p.add_argument("--config", required=True)
    p.add_argument("--out", default=".")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("audit-kernel", help="check kernel structure and an optional growth certificate")
    p.add_argument("--config", required=True)
    p.add_argument("--cap", type=int, default=30)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_audit_kernel)

    p = sub.add_parser("sweep", help="truncation-convergence sweep")
    p.add_argument("--config", required=True)
    p.add_argument("--n-list", required=True)
    p.add_argument("--out", default=".")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("equilibrium", help="detailed-balance equilibrium at a given mass")
    p.add_argument("--config", required=True)
    p.add_argument("--rho", type=float, required=True)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_equilibrium)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO,
                        format="%(levelname)s %(name)s: %(message)s")
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
