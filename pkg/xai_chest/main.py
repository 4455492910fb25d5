"""
xai-chest command-line entry point

    xai-chest <subcommand> --config <path> [--out <dir>] [--workers N]
              [--seed S] [--desk-scale]

Subcommands run one step of the pipeline (gen-data, train-u, train-n,
sweep, ber, flops, probe) or a whole study (suite <name>). Exit status is 0
on success and the exception's exit code otherwise (2 config/usage,
3 artifacts, 4 numerics).
"""

from __future__ import annotations

import argparse
import logging
import sys
from typing import Optional, Sequence

from pythonjsonlogger import jsonlogger

from xai_chest.config import Settings, get_settings, load_experiment_config, progress_enabled, resolve_out_dir
from xai_chest.models.experiment_models import ExperimentConfig
from xai_chest.repos.results_repos import ArtifactRepository
from xai_chest.services.eval_service import parse_dims
from xai_chest.services.experiment_service import ExperimentService
from xai_chest.services.suite_service import SUITES, SuiteService
from xai_chest.utils.errors import UsageError, XaiChestError

LOG_FORMAT = "%(asctime)s %(levelname)s [%(name)s] %(message)s"

logger = logging.getLogger(__name__)

COMMANDS = ("gen-data", "train-u", "train-n", "sweep", "ber", "flops", "probe", "suite")


def configure_logging(settings: Settings) -> None:
    """Один обработчик в stdout: текстовый формат или JSON-строки"""
    handler = logging.StreamHandler(sys.stdout)
    if settings.log_json:
        handler.setFormatter(jsonlogger.JsonFormatter(LOG_FORMAT))
    else:
        handler.setFormatter(logging.Formatter(LOG_FORMAT))
    logging.basicConfig(level=settings.log_level.upper(), handlers=[handler], force=True)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="xai-chest",
        description="OFDM link simulator and explainability lab for neural channel estimation",
    )
    sub = parser.add_subparsers(dest="command", metavar="<subcommand>")

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="YAML experiment config")
    common.add_argument("--out", help="output root (overrides XAI_CHEST_OUT and paths.out_dir)")
    common.add_argument("--workers", type=int, help="worker processes (default: XAI_CHEST_WORKERS or 1)")
    common.add_argument("--seed", type=int, help="override master_seed")
    common.add_argument("--desk-scale", action="store_true", help="reduced frames and epochs for a laptop run")

    for name in COMMANDS:
        p = sub.add_parser(name, parents=[common])
        if name == "flops":
            p.add_argument("--dims", action="append", help="layer sizes, e.g. 104,15,15,15,104 (repeatable)")
        elif name == "ber":
            p.add_argument("--genie", action="store_true", help="also evaluate ideal channel knowledge")
        elif name == "suite":
            p.add_argument("name", nargs="?", default="", help=f"one of: {', '.join(SUITES)}")
    return parser


def _experiment_config(args: argparse.Namespace) -> ExperimentConfig:
    if args.config:
        config = load_experiment_config(args.config)
    elif args.command == "flops":
        config = ExperimentConfig()
    else:
        raise UsageError(f"{args.command} requires --config")
    if args.seed is not None:
        config = config.model_copy(update={"master_seed": args.seed})
    if args.desk_scale:
        config = config.desk_scaled()
    return config


def run(args: argparse.Namespace, settings: Settings) -> None:
    config = _experiment_config(args)
    workers = args.workers if args.workers is not None else settings.workers
    if workers < 1:
        raise UsageError("--workers must be at least 1")
    repo = ArtifactRepository(resolve_out_dir(config, args.out, settings))
    progress = progress_enabled(settings)
    logger.info(f"{args.command}: output in {repo.root}, {workers} worker(s)")

    if args.command == "suite":
        SuiteService(config, repo, workers, progress).run(args.name)
        return
    service = ExperimentService(config, repo, workers, progress)
    if args.command == "gen-data":
        service.gen_data()
    elif args.command == "train-u":
        service.train_u()
    elif args.command == "train-n":
        service.train_n()
    elif args.command == "sweep":
        service.sweep()
    elif args.command == "ber":
        service.ber(genie=args.genie)
    elif args.command == "flops":
        service.flops([parse_dims(d) for d in args.dims] if args.dims else None)
    elif args.command == "probe":
        service.probe()


def main(argv: Optional[Sequence[str]] = None) -> int:
    settings = get_settings()
    configure_logging(settings)
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command is None:
        parser.print_usage(sys.stderr)
        return UsageError.exit_code
    try:
        run(args, settings)
    except XaiChestError as e:
        logger.error(f"{args.command} failed: {e}")
        return e.exit_code
    return 0


if __name__ == "__main__":
    sys.exit(main())
