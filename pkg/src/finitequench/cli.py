"""Command-line runner for quench experiments.

    finitequench run            --config exp.toml --out-dir results --jobs 4
    finitequench timeseries     --config exp.toml --n 10 --T 1000
    finitequench verify-bounds  --config exp.toml --k-scale 0.5
    finitequench quench-compare --config exp.toml --n 8 --T 1e-4

Exit codes: 0 success, 1 a checked bound was violated, 2 configuration
error (including protocols without a decay certificate), 3 numerical failure.
"""

from __future__ import annotations

import argparse
import sys

from .config import ExperimentConfig, load_config
from .errors import ConfigError, NumericalError, UncertifiableProtocolError
from .experiments import quench_compare, run_sweep, run_timeseries, run_verify_bounds

EXIT_OK = 0
EXIT_BOUND_VIOLATION = 1
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="TOML experiment file (defaults apply when omitted)")
    p.add_argument("--out-dir", help="output directory (overrides output.out_dir)")
    p.add_argument("--format", choices=("csv", "json"), help="output format (overrides output.format)")
    p.add_argument("--jobs", type=int, default=1, help="parallel sweep cells (default: 1)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="finitequench", description=__doc__.split("\n")[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="sweep (N, T) and write summary plus per-cell reports")
    _common(p)

    p = sub.add_parser("timeseries", help="<A>(t) through and after the ramp")
    _common(p)
    p.add_argument("--n", type=int, help="chain length (default: chain.n)")
    p.add_argument("--T", type=float, help="ramp duration (default: protocol.ramp_duration_T)")

    p = sub.add_parser("verify-bounds", help="check the decay certificate and Dyson bounds")
    _common(p)
    p.add_argument("--n", type=int, help="chain length (default: chain.n)")
    p.add_argument("--k-scale", type=float, help="multiply K of the certificate (falsification)")

    p = sub.add_parser("quench-compare", help="linear ramp of duration T against a sudden quench")
    _common(p)
    p.add_argument("--n", type=int, help="chain length (default: chain.n)")
    p.add_argument("--T", type=float, help="ramp duration (default: protocol.ramp_duration_T)")
    return parser


def _load(args) -> ExperimentConfig:
    config = load_config(args.config) if args.config else ExperimentConfig()
    overrides = {}
    if args.out_dir:
        overrides["output"] = {"out_dir": args.out_dir}
    if args.format:
        overrides.setdefault("output", {})["format"] = args.format
    if getattr(args, "k_scale", None) is not None:
        overrides["protocol"] = {"certificate_k_scale": args.k_scale}
    config = config.with_overrides(**overrides)
    n = getattr(args, "n", None)
    if n is not None:
        config.with_overrides(chain={"n": n})  # validates the range
    T = getattr(args, "T", None)
    if T is not None:
        config.with_overrides(protocol={"ramp_duration_T": T})
    if args.jobs < 1:
        raise ConfigError("--jobs must be >= 1", field="jobs")
    return config


def _cmd_run(args, config) -> int:
    out = config.output
    result = run_sweep(config, jobs=args.jobs, out_dir=out.out_dir, fmt=out.format)
    for o in result.outcomes:
        if o.report is None:
            print(f"N={o.cell.n:2d} T={o.cell.T:<8g} {o.status}: {o.error}")
        else:
            r = o.report
            flag = "ok" if r.bound_satisfied else "VIOLATED"
            print(f"N={o.cell.n:2d} T={o.cell.T:<8g} d_eff={r.d_eff:9.4f} "
                  f"fluct={r.fluct_closed:.4e} bound={r.bound:.4e} {flag}")
    print(f"wrote {result.paths[0]}")
    if result.any_violation:
        return EXIT_BOUND_VIOLATION
    return EXIT_NUMERICAL if result.any_failure else EXIT_OK


def _cmd_timeseries(args, config) -> int:
    r = run_timeseries(config, args.n, args.T, out_dir=config.output.out_dir, fmt=config.output.format)
    print(f"N={r.n} T={r.T:g}: post-ramp std {r.post_ramp_std:.3e}, "
          f"amplitude {r.post_ramp_amplitude:.3e}")
    return EXIT_OK


def _cmd_verify(args, config) -> int:
    report = run_verify_bounds(config, args.n, out_dir=config.output.out_dir, fmt=config.output.format)
    for name, group in report.groups().items():
        failed = sum(not s.passed for s in group)
        print(f"{name:18s} {len(group) - failed}/{len(group)} pass")
    print(f"| ||dH_I|| - ||dH|| | <= {report.interaction_norm_defect:.2e}")
    return EXIT_OK if report.all_passed else EXIT_BOUND_VIOLATION


def _cmd_compare(args, config) -> int:
    r = quench_compare(config, args.n, args.T, out_dir=config.output.out_dir, fmt=config.output.format)
    s = r.summary()
    print(f"N={r.n} T={r.T:g}: max |<A>_ramp - <A>_sudden| = {s['max_pointwise_difference']:.3e}, "
          f"d_eff {s['d_eff_ramp']:.6f} vs {s['d_eff_quench_formula']:.6f}")
    return EXIT_OK


COMMANDS = {"run": _cmd_run, "timeseries": _cmd_timeseries,
            "verify-bounds": _cmd_verify, "quench-compare": _cmd_compare}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        config = _load(args)
        return COMMANDS[args.command](args, config)
    except (ConfigError, OSError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except UncertifiableProtocolError as exc:
        print(f"refusing to verify bounds: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (NumericalError, ArithmeticError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except ValueError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
