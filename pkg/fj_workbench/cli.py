"""Command line front door: ``fjwb certify | verify | analyze | dirichlet | hyperelem | flow | torsion``.

Exit codes: 0 pass, 1 usage error, 2 refutation or failed certificate,
3 exhausted resource cap.
"""

import argparse
import logging
import sys
from pathlib import Path
from typing import Any, Dict, List, Optional

from fj_workbench.advanced.client import FLOW_OPERATIONS, AdvancedWorkbenchClient
from fj_workbench.base.client import HyperelemRequest, WorkbenchClient
from fj_workbench.base.codec import dumps, load_json, parse_generating_set, parse_matrix
from fj_workbench.base.group_core import IntMatrix
from fj_workbench.config import WorkbenchConfig, configure_logging
from fj_workbench.errors import EXIT_PASS, EXIT_REFUTED, EXIT_USAGE, WorkbenchError

logger = logging.getLogger("fjwb.cli")

DEFAULT_MATRIX = [[2, 1], [1, 1]]


class UsageParser(argparse.ArgumentParser):
    """Argument parser that reports usage errors with exit code 1."""

    def error(self, message: str) -> None:  # type: ignore[override]
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    parser = UsageParser(prog="fjwb", description="Farrell-Jones workbench")
    parser.add_argument("--env", help="Env file with FJWB_* settings")
    parser.add_argument("--log-level", help="Override LOG_LEVEL")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=UsageParser)

    certify = sub.add_parser("certify", help="Run the Farrell-Hsiang pipeline")
    certify.add_argument("--matrix", required=True, help="Matrix JSON file, JSON text or whitespace rows")
    certify.add_argument("--L", type=int, required=True, dest="L")
    certify.add_argument("--eps", required=True, help="Target contraction, e.g. 0.5 or 1/2")
    certify.add_argument("--gens", help="Generating set JSON; standard generators when omitted")
    certify.add_argument("--mode", choices=["sampling", "exhaustive"])
    certify.add_argument("--samples", type=int)
    certify.add_argument("--seed", type=int)
    certify.add_argument("--out", help="Write the certificate here instead of stdout")

    verify = sub.add_parser("verify", help="Replay a certificate")
    verify.add_argument("certificate")

    analyze = sub.add_parser("analyze", help="i_k, K and the root-of-unity test")
    analyze.add_argument("--matrix", required=True)
    analyze.add_argument("--L", type=int, default=5, dest="L")

    dirichlet = sub.add_parser("dirichlet", help="Primes p = 1 mod K with p >= lower")
    dirichlet.add_argument("--K", type=int, required=True, dest="K")
    dirichlet.add_argument("--lower", type=int, required=True)
    dirichlet.add_argument("--count", type=int, default=2)

    hyperelem = sub.add_parser("hyperelem", help="Hyper-elementary subgroups of a finite quotient")
    hyperelem.add_argument("--s", type=int, required=True, dest="s")
    hyperelem.add_argument("--r", type=int, dest="r")
    hyperelem.add_argument("--matrix")
    group = hyperelem.add_mutually_exclusive_group()
    group.add_argument("--exhaustive", action="store_true", default=True)
    group.add_argument("--sampling", action="store_false", dest="exhaustive")
    hyperelem.add_argument("--samples", type=int)
    hyperelem.add_argument("--seed", type=int)

    flow = sub.add_parser("flow", help="Flow-space computations")
    flow.add_argument("operation", choices=FLOW_OPERATIONS)
    flow.add_argument("--args", required=True, dest="arguments", help="Arguments as JSON file or JSON text")

    torsion = sub.add_parser("torsion", help="Self-torsion of a chain equivalence")
    torsion.add_argument("pack", help="Pack description as JSON file or JSON text")
    return parser


def _emit(data: Any, out: Optional[str] = None) -> None:
    text = dumps(data)
    if out:
        Path(out).write_text(text + "\n")
        logger.info(f"Wrote {out}")
    else:
        print(text)


def _matrix(source: Optional[str]) -> IntMatrix:
    return parse_matrix(source) if source else IntMatrix.from_rows(DEFAULT_MATRIX)


def run(args: argparse.Namespace, config: WorkbenchConfig) -> int:
    base = WorkbenchClient(config)
    advanced = AdvancedWorkbenchClient(base)

    if args.command == "certify":
        gens = parse_generating_set(args.gens) if args.gens else None
        cert = advanced.certify(
            parse_matrix(args.matrix), args.L, args.eps, gens, args.mode, args.samples, args.seed
        )
        _emit(cert, args.out)
        return EXIT_PASS if cert["status"] == "PASSED" else EXIT_REFUTED
    if args.command == "verify":
        report = advanced.verify(load_json(args.certificate))
        _emit(report)
        return EXIT_PASS if report["passed"] else EXIT_REFUTED
    if args.command == "analyze":
        _emit(base.analyze(parse_matrix(args.matrix), args.L))
        return EXIT_PASS
    if args.command == "dirichlet":
        _emit(base.dirichlet(args.K, args.lower, args.count))
        return EXIT_PASS
    if args.command == "hyperelem":
        req = HyperelemRequest(
            _matrix(args.matrix),
            args.s,
            args.r,
            args.exhaustive,
            args.samples or config.samples,
            config.seed if args.seed is None else args.seed,
        )
        report = base.hyperelem(req)
        _emit(report)
        falsified: List[Dict[str, Any]] = report.get("lemma_hyp_elm", {}).get("falsifiers", [])
        falsified += report.get("lemma_prime_power", {}).get("falsifiers", [])
        return EXIT_REFUTED if falsified else EXIT_PASS
    if args.command == "flow":
        _emit(advanced.flow(args.operation, load_json(args.arguments)))
        return EXIT_PASS
    if args.command == "torsion":
        _emit(base.torsion(load_json(args.pack)))
        return EXIT_PASS
    raise AssertionError(f"unhandled command {args.command}")


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    config = WorkbenchConfig.from_env(args.env)
    if args.log_level:
        config.log_level = args.log_level.upper()
    configure_logging(config)
    try:
        return run(args, config)
    except WorkbenchError as e:
        logger.error(f"{type(e).__name__}: {e.message}")
        print(dumps(e.to_dict()), file=sys.stderr)
        return e.exit_code
    except (KeyError, ValueError) as e:
        logger.error(f"Invalid input: {e}")
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
