"""Command-line entry point: ``privsample {sample,audit,params,gen}``."""

from __future__ import annotations

import argparse
import json
import sys

from privsample.budget import PrivacyBudget
from privsample.errors import InvalidInputError
from privsample.experiment import (
    EXIT_ERROR,
    EXIT_OK,
    PRODUCT,
    TASKS,
    AuditConfig,
    ExperimentConfig,
    derive_parameters,
    run_audit_suite,
    run_experiment,
)
from privsample.io import parse_generator, write_csv
from privsample.noise import make_rng
from privsample.profile import ConstantsProfile

AUDIT_MECHANISMS = ("known_cov", "product_sampler", "leaky_mock")


def _profile(args) -> ConstantsProfile:
    overrides = {}
    for item in args.multiplier or []:
        name, sep, value = item.partition("=")
        if not sep:
            raise InvalidInputError(f"--multiplier expects name=value, got {item!r}")
        overrides[name.strip()] = float(value)
    if args.profile == "paper":
        if overrides:
            raise InvalidInputError("multiplier overrides apply only to the practical profile")
        if args.c is None or args.C is None:
            raise InvalidInputError("--profile paper needs explicit --c and --C")
        return ConstantsProfile.paper(args.c, args.C)
    return ConstantsProfile(c=args.c, C=args.C, overrides=overrides)


def _add_common(p: argparse.ArgumentParser, data: bool = True):
    p.add_argument("--task", choices=TASKS, required=True)
    p.add_argument("--eps", type=float, default=1.0)
    p.add_argument("--delta", type=float, default=None,
                   help="defaults to 1e-6, or 0 for the pure-DP product task")
    p.add_argument("--alpha", type=float, default=0.1)
    p.add_argument("--kappa", type=float, default=1.0)
    p.add_argument("--R", type=float, default=0.0)
    p.add_argument("--n2", type=int, default=None, help="bounded-covariance pair count (practical only)")
    p.add_argument("--profile", choices=("paper", "practical"), default="practical")
    p.add_argument("--c", type=float, default=None)
    p.add_argument("--C", type=float, default=None)
    p.add_argument("--multiplier", action="append", metavar="NAME=VALUE")
    p.add_argument("--product-stage", choices=("pipeline", "sampler"), default="pipeline")
    p.add_argument("--buckets", default=None, help="comma-separated bucket indices for the sampler stage")
    p.add_argument("--seed", type=int, default=0)
    if data:
        src = p.add_mutually_exclusive_group(required=True)
        src.add_argument("--data", help="CSV dataset")
        src.add_argument("--gen", help="synthetic generator, e.g. 'gaussian:d=2'")
    p.add_argument("--out", default=None)


def _config(args) -> ExperimentConfig:
    delta = args.delta if args.delta is not None else (0.0 if args.task == PRODUCT else 1e-6)
    buckets = None if args.buckets is None else tuple(int(v) for v in args.buckets.split(","))
    return ExperimentConfig(
        task=args.task, budget=PrivacyBudget(args.eps, delta), alpha=args.alpha,
        profile=_profile(args), seed=args.seed, data_path=getattr(args, "data", None),
        generator=getattr(args, "gen", None), output_path=args.out, kappa=args.kappa, R=args.R,
        n2=args.n2, product_stage=args.product_stage, buckets=buckets,
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="privsample", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    _add_common(sub.add_parser("sample", help="run one sampler and write a JSON report"))

    p = sub.add_parser("params", help="print derived parameters only")
    _add_common(p, data=False)
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--data")
    src.add_argument("--gen")
    src.add_argument("--d", type=int)

    p = sub.add_parser("audit", help="empirical epsilon audit of one or more mechanisms")
    p.add_argument("--mechanisms", default="known_cov",
                   help=f"comma-separated subset of {','.join(AUDIT_MECHANISMS)}")
    p.add_argument("--d", type=int, default=2)
    p.add_argument("--eps", type=float, default=1.0)
    p.add_argument("--delta", type=float, default=1e-5)
    p.add_argument("--alpha", type=float, default=0.1)
    p.add_argument("--trials", type=int, default=10_000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default=None)

    p = sub.add_parser("gen", help="write synthetic data as CSV")
    p.add_argument("--gen", required=True)
    p.add_argument("--rows", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    return parser


def _emit(text: str, out: str | None):
    if out:
        with open(out, "w", encoding="utf-8") as fh:
            fh.write(text + "\n")
    else:
        print(text)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "sample":
            report = run_experiment(_config(args))
            if not args.out:
                print(report.to_json())
            return report.exit_code
        if args.command == "params":
            if args.d is not None:
                args.gen = "gaussian:d=%d" % args.d if args.task != PRODUCT else "product:p=" + ",".join(
                    ["0.5"] * args.d)
            cfg = _config(args)
            _emit(json.dumps({"task": cfg.task, "derived": derive_parameters(cfg)}, sort_keys=True, indent=2),
                  args.out)
            return EXIT_OK
        if args.command == "audit":
            names = [m.strip() for m in args.mechanisms.split(",") if m.strip()]
            unknown = set(names) - set(AUDIT_MECHANISMS)
            if unknown:
                raise InvalidInputError(f"unknown audit mechanisms {sorted(unknown)}")
            configs = [AuditConfig(m, d=args.d, alpha=args.alpha,
                                   budget=PrivacyBudget(args.eps, 0.0 if m == "product_sampler" else args.delta))
                       for m in names]
            doc, code = run_audit_suite(configs, args.trials, args.seed)
            _emit(json.dumps(doc, sort_keys=True, indent=2), args.out)
            return code
        spec = parse_generator(args.gen)
        write_csv(args.out, spec.sample(args.rows, make_rng(args.seed)))
        return EXIT_OK
    except (ValueError, OSError) as exc:  # InvalidInputError is a ValueError
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
