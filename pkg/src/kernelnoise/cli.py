"""Command-line entry point: ``kernelnoise <experiment> [options]``.

Exit status is 0 when every check passes, 1 when any check fails and 2 on a
configuration error.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys

from . import config as C
from .errors import ConfigError, KernelNoiseError
from .experiments import run
from .report import Report, Row, emit

log = logging.getLogger("kernelnoise")

HELP = {
    "psd-check": "certify positive semidefiniteness of kernel Gram matrices",
    "rkhs-norm": "membership constants and RKHS norms along nested samples",
    "dominance": "smallest constant C with K1 <= C K2 on a sample",
    "simulate": "white-noise covariance E[X_A X_B] against mu(A & B)",
    "ito-isometry": "Ito isometry, characteristic functional, isometry pairs",
    "qv": "quadratic variation along a dyadic ladder",
    "ito-lemma": "residual of the discrete Ito formula",
    "fourier": "covariance of the Fourier-exponential process",
    "markov-interpolate": "nested Ito integrals against a Markov kernel",
    "frames": "Parseval frame and continuous-frame identities",
    "transforms": "feature transforms J, L and the projection Q",
    "functionals": "pairings of derivative-Dirac functionals",
    "factorize": "kernel factorization through white noise",
}


def _json_arg(text):
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise argparse.ArgumentTypeError(f"invalid JSON: {exc}") from None


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON experiment config")
    common.add_argument("--seed", type=int, help="master seed (overrides config)")
    common.add_argument("--out", help="output path; stdout when omitted")
    common.add_argument("--format", choices=("csv", "json"), default="csv")
    common.add_argument("--threads", type=int, default=1)
    common.add_argument("--replicas", type=int)
    common.add_argument("-v", "--verbose", action="store_true")

    p = argparse.ArgumentParser(prog="kernelnoise", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)
    sub.add_parser("run", parents=[common], help="run the experiment named in --config")
    for name in C.EXPERIMENTS:
        sp = sub.add_parser(name, parents=[common], help=HELP[name])
        if name == "simulate":
            sp.add_argument("--cells", type=int)
            sp.add_argument("--sets", type=_json_arg, help="JSON list of set specs")
        if name == "markov-interpolate":
            sp.add_argument("--states", type=int)
            sp.add_argument("--kernel-file")
            sp.add_argument("--x", type=int)
            sp.add_argument("--n", type=int, nargs="+")
            sp.add_argument("--sets", type=_json_arg, help="JSON list of set specs")
    return p


def config_from_args(args) -> dict:
    cfg = C.load(args.config) if args.config else {}
    if args.command != "run":
        if cfg.get("experiment", args.command) != args.command:
            raise ConfigError(f"config.experiment: {cfg['experiment']!r} does not match "
                              f"subcommand {args.command!r}")
        cfg["experiment"] = args.command
    elif "experiment" not in cfg:
        raise ConfigError("config.experiment: 'run' needs a config naming the experiment")
    if args.replicas is not None:
        cfg["replicas"] = args.replicas
    if getattr(args, "cells", None) is not None:
        cfg["space"] = dict(cfg.get("space", {"kind": "interval"}), cells=args.cells)
    for key in ("sets", "states", "kernel_file", "x", "n"):
        v = getattr(args, key, None)
        if v is not None:
            cfg[key] = v
    if args.seed is not None:
        cfg["seed"] = args.seed
    return C.validate(cfg)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        cfg = config_from_args(args)
    except (ConfigError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    try:
        report = run(cfg, threads=args.threads)
    except (ConfigError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (KernelNoiseError, ArithmeticError, ValueError, IndexError) as exc:
        report = Report(cfg["experiment"], meta={"seed": cfg.get("seed", 0)})
        report.add(Row.failed("run", f"{type(exc).__name__}: {exc}"))
    text = emit(report, args.format, args.out)
    if args.out is None:
        sys.stdout.write(text)
    n_fail = sum(not r.passed for r in report.rows)
    log.info("%s: %d rows, %d failed", report.command, len(report.rows), n_fail)
    return 0 if report.all_pass else 1


if __name__ == "__main__":
    sys.exit(main())
