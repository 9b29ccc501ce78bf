"""
Command-line entry point.

    python -m anthem_analysis run --config anthem_config.json --seed 7 --out results
    python -m anthem_analysis synth --out demo --seed 7

Exit codes: 0 success, 1 partial (files dropped or a stage skipped), 2 failure.
"""

import argparse
import logging
import sys
from pathlib import Path
from typing import List, Optional

from . import __version__
from .config import FORMATS, load_config
from .errors import AnthemAnalysisError
from .indices import JOIN_MODES
from .pipeline import SUCCESS, print_summary, run_stages
from .synthetic import write_demo_corpus, write_scale_corpus

logger = logging.getLogger(__name__)

EXIT_SUCCESS, EXIT_PARTIAL, EXIT_FAILURE = 0, 1, 2
STAGE_COMMANDS = ("extract", "ingest", "cluster", "correlate", "report", "run")
LOG_FILE = "run.log"


def setup_logging(output_dir: Optional[str] = None, level: str = "INFO") -> None:
    handlers: List[logging.Handler] = [logging.StreamHandler()]
    if output_dir:
        Path(output_dir).mkdir(parents=True, exist_ok=True)
        handlers.append(logging.FileHandler(Path(output_dir) / LOG_FILE, mode="w", encoding="utf-8"))
    logging.basicConfig(
        level=getattr(logging, level.upper(), logging.INFO),
        format="%(asctime)s - %(levelname)s - %(message)s",
        handlers=handlers,
        force=True,
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="anthem-analysis",
        description="National-anthem MIDI features versus global country indices",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    stage_help = {
        "extract": "parse the MIDI corpus and write the feature store",
        "ingest": "read and canonicalise the index CSV files",
        "cluster": "join features with indices and cluster anthems and indices",
        "correlate": "cluster, then correlation matrices, agreement and qualitative tables",
        "report": "correlate, then render heatmaps and print the summary",
        "run": "every stage from the raw corpus",
    }
    for command in STAGE_COMMANDS:
        p = sub.add_parser(command, help=stage_help[command])
        p.add_argument("--config", help="JSON run configuration")
        p.add_argument("--corpus-dir", help="directory of anthem MIDI files")
        p.add_argument("--out", help="output directory")
        p.add_argument("--seed", type=int, help="K-means seed (required here or in the config)")
        p.add_argument("--k-max", type=int, help="largest k tried during model selection")
        p.add_argument("--format", action="append", choices=FORMATS, dest="formats",
                       help="artifact format to write (repeatable; default all)")
        p.add_argument("--join-mode", choices=JOIN_MODES)
        p.add_argument("--n-jobs", type=int, help="joblib workers for parsing and model selection")
        p.add_argument("--log-level", default="INFO")

    p = sub.add_parser("synth", help="write a synthetic demo or scale corpus with indices and config")
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=7)
    p.add_argument("--count", type=int, help="generate a scale corpus of this many anthems instead of the demo")
    p.add_argument("--corrupt", action="store_true", help="add an unparseable file to the demo corpus")
    p.add_argument("--log-level", default="INFO")
    return parser


def _run_synth(args: argparse.Namespace) -> int:
    if args.count is not None:
        paths = write_scale_corpus(args.out, count=args.count, seed=args.seed)
    else:
        paths = write_demo_corpus(args.out, seed=args.seed, corrupt=args.corrupt)
    print(f"Corpus: {paths['corpus']}")
    print(f"Config: {paths['config']}")
    return EXIT_SUCCESS


def run_cli(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    setup_logging(None, args.log_level)
    try:
        if args.command == "synth":
            return _run_synth(args)

        config = load_config(args.config, overrides={
            "corpus_dir": args.corpus_dir,
            "output_dir": args.out,
            "seed": args.seed,
            "k_max": args.k_max,
            "formats": args.formats,
            "join_mode": args.join_mode,
            "n_jobs": args.n_jobs,
        })
        setup_logging(config.output_dir, args.log_level)
        logger.info(f"Starting {args.command} (anthem-analysis {__version__}, seed {config.seed})")

        manifest, report = run_stages(config, args.command)
        if args.command in ("report", "run", "extract", "correlate"):
            print_summary(manifest, report)
        if manifest.status == SUCCESS:
            logger.info(f"{args.command} completed successfully")
            return EXIT_SUCCESS
        logger.warning(f"{args.command} completed with dropped files or skipped steps")
        return EXIT_PARTIAL

    except KeyboardInterrupt:
        logger.info("Interrupted by user")
        return EXIT_FAILURE
    except AnthemAnalysisError as e:
        logger.error(f"{args.command} failed: {e}")
        return EXIT_FAILURE
    except OSError as e:
        logger.error(f"{args.command} failed on I/O: {e}")
        return EXIT_FAILURE


def main(argv: Optional[List[str]] = None) -> None:
    sys.exit(run_cli(argv))
