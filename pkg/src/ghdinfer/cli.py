"""Command-line entry points.

``infer`` runs exact inference on a UAI network and prints MAR-style
marginals; ``sparsify`` thins factor tables reproducibly.  Exit statuses:
0 success, 1 usage or parse error, 2 inconsistent evidence/model,
3 timeout, 4 resource limit.
"""

from __future__ import annotations

import argparse
import statistics
import sys
from pathlib import Path
from typing import Sequence

from .engine import EngineConfig, format_stats, run_inference
from .errors import (
    EngineError,
    InconsistentModelError,
    InferenceTimeoutError,
    ResourceLimitError,
    UaiFormatError,
    UsageError,
)
from .hybrid import MODES
from .model import factor_sparsity
from .oracle import induce_sparsity
from .uai import parse_evidence, parse_uai, write_marginals, write_uai

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_INCONSISTENT = 2
EXIT_TIMEOUT = 3
EXIT_RESOURCE = 4


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):  # noqa: A003 - argparse API
        raise UsageError(message)


def _read(path: str) -> str:
    try:
        return Path(path).read_text()
    except OSError as exc:
        raise UsageError(f"cannot read {path}: {exc}") from exc


def infer_main(argv: Sequence[str] | None = None) -> int:
    parser = _Parser(prog="infer", description="Exact marginal inference on UAI networks.")
    parser.add_argument("network", help="UAI network file")
    parser.add_argument("--evidence", help="UAI evidence file")
    parser.add_argument("--mode", choices=MODES, default="hybrid")
    parser.add_argument("--stats", action="store_true", help="diagnostics on stderr")
    parser.add_argument("--timeout", type=float, default=None, metavar="SECONDS")
    parser.add_argument(
        "--tolerance",
        type=float,
        default=1e-5,
        help="bar for the internal consistency report printed with --stats",
    )
    parser.add_argument("--out", help="write marginals here instead of stdout")
    parser.add_argument("--hybrid-beta", type=float, default=1.0)
    parser.add_argument("--hybrid-sigma", type=float, default=0.9)
    parser.add_argument("--dense-cap", type=int, default=2**31, metavar="CELLS")
    parser.add_argument(
        "--compare-kernels",
        action="store_true",
        help="test mode: run both kernels per bag and report both counters",
    )

    try:
        args = parser.parse_args(argv)
        model = parse_uai(_read(args.network))
        if args.evidence:
            evidence = parse_evidence(_read(args.evidence), model.domain_sizes)
            model = model.with_evidence(evidence)
        config = EngineConfig(
            mode=args.mode,
            dense_table_cap=args.dense_cap,
            hybrid_beta=args.hybrid_beta,
            hybrid_sigma=args.hybrid_sigma,
            timeout_seconds=args.timeout,
            collect_stats=args.stats,
            compare_kernels=args.compare_kernels,
        )
        result = run_inference(model, config)
    except (UsageError, UaiFormatError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except InferenceTimeoutError as exc:
        print(f"timeout: {exc}", file=sys.stderr)
        return EXIT_TIMEOUT
    except ResourceLimitError as exc:
        print(f"resource limit: {exc}", file=sys.stderr)
        return EXIT_RESOURCE
    except InconsistentModelError as exc:
        print(f"inconsistent evidence: {exc}", file=sys.stderr)
        return EXIT_INCONSISTENT
    except EngineError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE

    text = write_marginals(result.marginals)
    if args.out:
        Path(args.out).write_text(text + "\n")
    else:
        print(text)
    if args.stats and result.stats is not None:
        print(format_stats(result.stats), file=sys.stderr)
        gap = result.stats.calibration_gap
        if gap is not None:
            verdict = "ok" if gap <= args.tolerance else "ABOVE TOLERANCE"
            print(f"consistency at tolerance {args.tolerance}: {verdict}", file=sys.stderr)
    return EXIT_OK


def sparsify_main(argv: Sequence[str] | None = None) -> int:
    parser = _Parser(prog="sparsify", description="Randomly thin factor tables of a UAI network.")
    parser.add_argument("network", help="UAI network file")
    parser.add_argument("--keep", type=float, required=True, help="fraction of entries kept in (0, 1]")
    parser.add_argument("--seed", type=int, required=True)
    parser.add_argument("--out", required=True, help="output UAI file")

    try:
        args = parser.parse_args(argv)
        if not 0.0 < args.keep <= 1.0:
            raise UsageError("--keep must lie in (0, 1]")
        if args.seed < 0:
            raise UsageError("--seed must be a non-negative integer")
        model = parse_uai(_read(args.network))
        thinned = induce_sparsity(model, args.keep, args.seed)
        Path(args.out).write_text(write_uai(thinned))
    except (UsageError, UaiFormatError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE

    levels = [
        100.0 * factor_sparsity(f, thinned.domain_sizes) for f in thinned.factors
    ]
    if levels:
        print(
            f"sparsity median/mean: {statistics.median(levels):.1f}%/"
            f"{statistics.fmean(levels):.1f}%",
            file=sys.stderr,
        )
    return EXIT_OK


def serve_main(argv: Sequence[str] | None = None) -> int:
    parser = _Parser(prog="ghdinfer-serve", description="Run the inference HTTP service.")
    parser.add_argument("--host", default="127.0.0.1")
    parser.add_argument("--port", type=int, default=8000)
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE

    import uvicorn

    from .service import app

    uvicorn.run(app, host=args.host, port=args.port)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(infer_main())
