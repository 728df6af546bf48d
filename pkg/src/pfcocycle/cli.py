"""Command-line entry points.

Verbs: reference, sweep-perturb, sweep-fejer, check-ly, check-hyperbolic,
assemble.  Exit codes: 0 success, 2 invalid config, 3 numerical failure,
4 certificate required but failed.
"""

import argparse
import json
import sys
from pathlib import Path

from . import harness, report, transfer
from .errors import ConfigError, NumericsError

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERICS = 3
EXIT_CERTIFICATE = 4


def _common(parser: argparse.ArgumentParser):
    parser.add_argument("--config", required=True, help="experiment config (JSON)")
    parser.add_argument("--out", default=None, help="output directory (overrides config)")
    parser.add_argument("--seed", type=int, default=None, help="override the config seed")
    parser.add_argument("--threads", type=int, default=1, help="worker threads for sweep points")
    parser.add_argument("--no-plots", action="store_true", help="skip figure rendering")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="pfcocycle", description=__doc__)
    sub = parser.add_subparsers(dest="verb", required=True)
    for verb in ("reference", "sweep-perturb", "sweep-fejer", "check-ly", "check-hyperbolic", "assemble"):
        _common(sub.add_parser(verb))
    return parser


def _load_config(args) -> tuple[harness.ExperimentConfig, Path]:
    cfg = harness.ExperimentConfig.from_json(args.config)
    if args.seed is not None:
        d = cfg.canonical_dict()
        d["seed"] = args.seed
        d["output_dir"] = cfg.out_dir
        cfg = harness.ExperimentConfig.from_dict(d)
    out_dir = Path(args.out or cfg.out_dir or "out")
    return cfg, out_dir


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg, out_dir = _load_config(args)
    except (ConfigError, OSError, json.JSONDecodeError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    try:
        return _dispatch(args, cfg, out_dir)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericsError as exc:
        print(f"numerical failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERICS


def _dispatch(args, cfg: harness.ExperimentConfig, out_dir: Path) -> int:
    if args.verb == "assemble":
        out_dir.mkdir(parents=True, exist_ok=True)
        mats = harness.build_matrices(cfg)
        for mid, m in mats.items():
            path = out_dir / f"{mid}_n{m.order}.pfm"
            transfer.save_matrix(path, m)
            print(f"wrote {path}")
        return EXIT_OK

    if args.verb == "reference":
        bundle = harness.run_reference(cfg)
        paths = harness.write_reference(bundle, out_dir)
        if not args.no_plots:
            report.render_reference(bundle, out_dir)
        _print_reference(bundle)
        print(f"wrote {paths['json']}")
        if cfg.require_hyperbolic and not bundle.result.certificate.passed:
            print("certificate required but failed", file=sys.stderr)
            return EXIT_CERTIFICATE
        return EXIT_OK

    if args.verb == "check-hyperbolic":
        bundle = harness.run_reference(cfg)
        cert = bundle.result.certificate
        _print_reference(bundle)
        harness.write_reference(bundle, out_dir)
        return EXIT_OK if cert.passed else EXIT_CERTIFICATE

    if args.verb == "sweep-perturb":
        bundle = harness.run_reference(cfg)
        if cfg.require_hyperbolic and not bundle.result.certificate.passed:
            print("certificate required but failed; not sweeping", file=sys.stderr)
            return EXIT_CERTIFICATE
        _, records, analysis = harness.sweep_perturbation(cfg, reference=bundle, threads=args.threads)
        paths = harness.emit(records, out_dir, cfg, analysis, basename="sweep_perturb")
        if not args.no_plots:
            report.render_perturbation_sweep(records, out_dir)
        _print_analysis(analysis)
        print(f"wrote {paths['csv']} and {paths['json']}")
        return EXIT_OK

    if args.verb == "sweep-fejer":
        ref_bundle, records, analysis = harness.sweep_fejer(cfg, threads=args.threads)
        if cfg.require_hyperbolic and not ref_bundle.result.certificate.passed:
            print("certificate required but failed; not sweeping", file=sys.stderr)
            return EXIT_CERTIFICATE
        paths = harness.emit(records, out_dir, cfg, analysis, basename="sweep_fejer")
        if not args.no_plots:
            report.render_fejer_sweep(records, out_dir)
        _print_analysis(analysis)
        print(f"wrote {paths['csv']} and {paths['json']}")
        return EXIT_OK

    if args.verb == "check-ly":
        rep = harness.check_ly(cfg)
        out_dir.mkdir(parents=True, exist_ok=True)
        path = out_dir / "check_ly.json"
        with open(path, "w") as fh:
            json.dump(rep.to_json_dict(), fh, sort_keys=True, indent=1)
            fh.write("\n")
        print(f"growth fit at r = {rep.r:.6f}, R = {rep.fit.big_r}: {'pass' if rep.passed else 'FAIL'}")
        for f in rep.fit.fits:
            print(f"  power {f.power}: C1 = {f.c1}, C2 = {f.c2}, ok = {f.ok}")
        print(f"wrote {path}")
        return EXIT_OK

    raise AssertionError(f"unhandled verb {args.verb}")


def _print_reference(bundle: harness.ReferenceBundle) -> None:
    spec = bundle.result.spectrum
    cert = bundle.result.certificate
    print(f"exponents: {[round(x, 6) for x in spec.exponents]} multiplicities {list(spec.multiplicities)}")
    print(f"det-exponent (top block): {bundle.det_estimate.value:.6f} +- {bundle.det_estimate.stderr:.2e}")
    print(
        f"certificate: theta = {cert.theta:.4f}, C = {cert.c:.4f}, eta = {cert.eta:.4f}, "
        f"min gap = {cert.min_gap:.4f} -> {'pass' if cert.passed else 'FAIL'}"
    )


def _print_analysis(analysis: dict) -> None:
    for key in sorted(analysis):
        print(f"  {key}: {analysis[key]}")


if __name__ == "__main__":
    sys.exit(main())
