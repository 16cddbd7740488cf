import argparse
import asyncio
import json
import logging
import os
import sys
from pathlib import Path
from typing import Any, Optional

from dotenv import load_dotenv

import context
from errors import StgError
from processors.pipeline.pipeline_processor import PipelineProcessor, replay, run_pipeline
from settings import Settings, load_config

# --- Configuration ---
load_dotenv()

logger = logging.getLogger(__name__)


def configure_logging(debug: bool) -> None:
    logging.basicConfig(
        level=logging.DEBUG if debug else logging.INFO,
        format="%(asctime)s - %(name)s - %(levelname)s - %(message)s",
        datefmt="%Y-%m-%d %H:%M:%S",
        force=True,
    )
    # Suppress verbose logging from libraries in non-debug mode
    if not debug:
        logging.getLogger("asyncio").setLevel(logging.WARNING)
        logging.getLogger("genai_processors").setLevel(logging.WARNING)
    else:
        logging.getLogger("genai_processors").setLevel(logging.DEBUG)


def _common_flags() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, help="Run seed (default: STG_SEED or 0)")
    common.add_argument("--workers", type=int, help="Worker processes (default: STG_WORKERS or logical cores)")
    common.add_argument("--solver", help="SMT solver binary (default: STG_SOLVER, then z3 on PATH)")
    common.add_argument("--out", type=Path, help="Output directory (default: out)")
    common.add_argument("--config", type=Path, help="KEY=VALUE pipeline config file")
    common.add_argument("--levels", help="Comma-separated levels to keep, top to bottom")
    common.add_argument("--exhaustive", action="store_true", default=None, help="Exact alignment by enumeration")
    common.add_argument("--debug", action="store_true", help="Verbose DEBUG logging")
    return common


def build_parser() -> argparse.ArgumentParser:
    common = _common_flags()
    parser = argparse.ArgumentParser(prog="stg", description="Structural temporal graphs of analyzed music.")
    commands = parser.add_subparsers(dest="command", required=True)

    for name, help_text in (
        ("ingest", "Build a compressed STG from an analysis record"),
        ("validate", "Check a graph against the structural rules"),
        ("augment", "Convert to the augmented form"),
        ("compress", "Convert an augmented graph or repaired matrix back to compressed form"),
        ("repair", "Repair an approximate centroid matrix with the SMT solver"),
    ):
        command = commands.add_parser(name, parents=[common], help=help_text)
        command.add_argument("input", type=Path)
        if name == "repair":
            command.add_argument("--dump-smt", dest="dump_smt", action="store_true", default=None, help="Keep the solver scripts under out/smt")

    distance = commands.add_parser("distance", parents=[common], help="Structural distance between two graphs")
    distance.add_argument("inputs", type=Path, nargs=2)
    distance.add_argument("--dump-perm", dest="dump_perm", action="store_true", default=None, help="Also write the best row permutation")

    for name, help_text in (
        ("distance-matrix", "Pairwise distances over a corpus"),
        ("ablation", "Distance matrices with lower levels removed"),
    ):
        command = commands.add_parser(name, parents=[common], help=help_text)
        command.add_argument("inputs", type=Path, nargs="+")

    centroid = commands.add_parser("centroid", parents=[common], help="Derive and repair a corpus centroid")
    centroid.add_argument("inputs", type=Path, nargs="+")
    centroid.add_argument("--steps", dest="centroid_steps", type=int)
    centroid.add_argument("--no-repair", dest="repair", action="store_false", default=None)
    centroid.add_argument("--timeout", dest="solver_timeout", type=float, help="Seconds per solver partition")
    centroid.add_argument("--dump-smt", dest="dump_smt", action="store_true", default=None, help="Keep the solver scripts under out/smt")

    synth = commands.add_parser("synth", parents=[common], help="Synthetic corpus around a base graph")
    synth.add_argument("--base", type=Path, required=True)
    synth.add_argument("--k", type=int)
    synth.add_argument("--edits", type=int, help="Edits per variant (default: half the base's edges)")

    study = commands.add_parser("study", help="Error studies on synthetic corpora")
    studies = study.add_subparsers(dest="study", required=True)
    dist_error = studies.add_parser("dist-error", parents=[common], help="Computed vs ground-truth distance")
    dist_error.add_argument("inputs", type=Path, nargs="+")
    dist_error.add_argument("--p-grid", dest="p_grid", help="Comma-separated edit rates")
    centroid_error = studies.add_parser("centroid-error", parents=[common], help="Derived and naive centroid loss error")
    centroid_error.add_argument("--base", type=Path, required=True)
    centroid_error.add_argument("--k-values", dest="k_values", help="Comma-separated corpus sizes")
    centroid_error.add_argument("--edits", type=int)
    centroid_error.add_argument("--no-repair", dest="repair", action="store_false", default=None)

    mantel = commands.add_parser("mantel", parents=[common], help="Mantel test between two distance CSVs")
    mantel.add_argument("inputs", type=Path, nargs=2)
    mantel.add_argument("--perms", dest="permutations", type=int)
    mantel.add_argument("--exact", action="store_true", default=None, help="Enumerate every permutation")

    mine = commands.add_parser("mine", parents=[common], help="Common subgraphs and centroid containment")
    mine.add_argument("inputs", type=Path, nargs="+")
    mine.add_argument("--size", dest="subgraph_size", type=int)
    mine.add_argument("--centroid", type=Path)

    run = commands.add_parser("run", parents=[common], help="Run the pipeline a config file describes")
    run.add_argument("run_config", type=Path)

    replay_command = commands.add_parser("replay", parents=[common], help="Re-run a manifest and compare outputs")
    replay_command.add_argument("manifest", type=Path)
    return parser


_PASSTHROUGH = (
    "seed",
    "workers",
    "solver",
    "out",
    "levels",
    "exhaustive",
    "dump_perm",
    "dump_smt",
    "centroid_steps",
    "repair",
    "solver_timeout",
    "k",
    "edits",
    "p_grid",
    "k_values",
    "permutations",
    "exact",
    "subgraph_size",
    "centroid",
)


def overrides_from(args: argparse.Namespace) -> dict[str, Any]:
    overrides = {key: getattr(args, key) for key in _PASSTHROUGH if getattr(args, key, None) is not None}
    if args.command == "study":
        overrides["pipeline"] = args.study
    elif args.command != "run":
        overrides["pipeline"] = args.command
    if getattr(args, "input", None) is not None:
        overrides["inputs"] = [args.input]
    elif getattr(args, "inputs", None) is not None:
        overrides["inputs"] = list(args.inputs)
    elif getattr(args, "base", None) is not None:
        overrides["inputs"] = [args.base]
    return overrides


async def dispatch(args: argparse.Namespace, argv: list[str]) -> int:
    if args.command == "replay":
        report = await replay(context.pipeline_processor, args.manifest, args.out or Path("replay"))
        print(json.dumps(report, indent=2))
        return report["exit_code"] or (0 if report["reproduced"] else 5)

    config_file: Optional[Path] = args.run_config if args.command == "run" else args.config
    config = load_config(config_file, overrides_from(args), context.settings)
    outcome = await run_pipeline(context.pipeline_processor, config, argv)
    print(json.dumps(outcome.result, indent=2))
    if outcome.exit_code:
        logger.error(f"[{outcome.result.get('stage')}] {outcome.result.get('error')}")
        return outcome.exit_code
    if config.pipeline == "validate" and not outcome.result["summary"]["valid"]:
        return 3
    return 0


def main(argv: Optional[list[str]] = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    args = build_parser().parse_args(argv)
    debug = args.debug or os.getenv("DEBUG_MODE", "false").lower() == "true"
    configure_logging(debug)
    logger.debug(f"Debug mode is {'ENABLED' if debug else 'DISABLED'}.")

    try:
        context.settings = Settings.from_env()
        context.pipeline_processor = PipelineProcessor()
        return asyncio.run(dispatch(args, argv))
    except StgError as e:
        logger.error(f"[{e.stage}] {e}")
        return e.exit_code
    except Exception as e:
        logger.critical(f"Unexpected failure: {e}", exc_info=True)
        return 5


if __name__ == "__main__":
    sys.exit(main())
