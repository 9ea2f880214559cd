"""Command-line entry point: ``driftfilter {gen,train,eval,verify,bench}``.

Exit status is 0 on success, 1 when a verification check fails and 2 on a
usage error (bad arguments, unreadable or invalid spec files).
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import harness, verify
from .data import GENERATORS, write_benchmark

EXIT_OK, EXIT_CHECK_FAILED, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    pass


def _load_spec(path):
    try:
        raw = json.loads(Path(path).read_text())
    except OSError as exc:
        raise UsageError(f"cannot read spec {path}: {exc.strerror or exc}") from exc
    except json.JSONDecodeError as exc:
        raise UsageError(f"{path}: invalid JSON ({exc.msg} at line {exc.lineno})") from exc
    if not isinstance(raw, dict):
        raise UsageError(f"{path}: spec must be a JSON object")
    try:
        return harness.PipelineSpec.from_dict(raw)
    except (TypeError, ValueError) as exc:
        raise UsageError(f"{path}: {exc}") from exc


def _out_dir(path):
    d = Path(path)
    if not d.is_dir():
        raise UsageError(f"output directory does not exist: {d}")
    return d


def cmd_gen(args):
    out = _out_dir(args.out)
    bench = GENERATORS[args.benchmark](args.n_train, args.n_test, args.seed, args.variance)
    for p in write_benchmark(out, bench, keep_target_labels=args.keep_target_labels):
        print(p)
    return EXIT_OK


def cmd_train(args):
    spec = _load_spec(args.spec)
    if spec.adapter not in ("sf", "psf"):
        raise UsageError("train needs a learned adapter (sf or psf)")
    out = _out_dir(args.out)
    bench = harness.load_benchmark(spec)
    seed = harness.trial_seed(spec.seed, args.trial)
    _, model = harness.fit_adapter(spec, bench, seed)
    for p in harness.save_model(out, model, spec):
        print(p)
    return EXIT_OK


def cmd_eval(args):
    spec = _load_spec(args.spec)
    report = harness.run_benchmark(spec, threads=args.threads, audit=args.audit)
    if args.out:
        harness.emit_report(report, args.format, args.out)
    else:
        json.dump(report.to_dict(), sys.stdout, sort_keys=True, indent=2)
        sys.stdout.write("\n")
    return EXIT_OK


def cmd_verify(args):
    reports = verify.run_suite(seed=args.seed, scale=args.scale)
    text = json.dumps([r.to_dict() for r in reports], sort_keys=True, indent=2) + "\n"
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    for r in reports:
        print(f"{'PASS' if r.passed else 'FAIL'} {r.name} worst={r.worst_violation:.3g}",
              file=sys.stderr)
    return EXIT_OK if all(r.passed for r in reports) else EXIT_CHECK_FAILED


def cmd_bench(args):
    doc = harness.bench(args.out, trials=args.trials, seed=args.seed, threads=args.threads)
    if not args.out:
        json.dump(doc, sys.stdout, sort_keys=True, indent=2)
        sys.stdout.write("\n")
    return EXIT_OK


def build_parser():
    p = argparse.ArgumentParser(prog="driftfilter",
                                description="Sparse filtering adapters for covariate shift.")
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen", help="write train/target/test CSVs of a synthetic benchmark")
    g.add_argument("benchmark", choices=sorted(GENERATORS))
    g.add_argument("--out", required=True, help="existing output directory")
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--n-train", type=int, default=500)
    g.add_argument("--n-test", type=int, default=500)
    g.add_argument("--keep-target-labels", action="store_true")
    g.add_argument("--variance", action="store_true",
                   help="read the generator scale parameters as variances")
    g.set_defaults(func=cmd_gen)

    t = sub.add_parser("train", help="fit an adapter and write a model bundle")
    t.add_argument("spec", help="pipeline spec JSON")
    t.add_argument("--out", required=True, help="existing output directory")
    t.add_argument("--trial", type=int, default=0, help="trial index whose seed is used")
    t.set_defaults(func=cmd_train)

    e = sub.add_parser("eval", help="run every trial of a pipeline spec")
    e.add_argument("spec", help="pipeline spec JSON")
    e.add_argument("--out", help="report path (stdout JSON if omitted)")
    e.add_argument("--format", choices=("json", "csv"), default="json")
    e.add_argument("--threads", type=int, default=None)
    e.add_argument("--audit", action="store_true",
                   help="check that baselines do not depend on the target split")
    e.set_defaults(func=cmd_eval)

    v = sub.add_parser("verify", help="run the numerical verification suite")
    v.add_argument("--seed", type=int, default=0)
    v.add_argument("--scale", type=float, default=1.0, help="fraction of the default instance counts")
    v.add_argument("--out")
    v.set_defaults(func=cmd_verify)

    b = sub.add_parser("bench", help="every adapter on every synthetic benchmark")
    b.add_argument("--trials", type=int, default=10)
    b.add_argument("--seed", type=int, default=0)
    b.add_argument("--threads", type=int, default=None)
    b.add_argument("--out")
    b.set_defaults(func=cmd_bench)
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"driftfilter: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ValueError, FileNotFoundError) as exc:
        print(f"driftfilter: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
