"""
Command-line entry point.

    python -m app.main run --smoke
    python -m app.main evaluate --config experiment.json --upload
    python -m app.main mi-study

Exit codes: 0 success, 2 configuration error, 3 stage failure, 1 anything else.
"""

import argparse
import json
import logging
import sys
from pathlib import Path
from typing import List, Optional, Sequence

import numpy as np

from app import settings
from app.errors import ConfigError, DataFormatError, StageFailure
from app.schemas import ExperimentConfig, load_config, parse_config

logger = logging.getLogger(__name__)

LOG_FORMAT = "%(asctime)s %(levelname)s %(name)s %(message)s"

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_CONFIG = 2
EXIT_STAGE = 3

# subcommand -> pipeline targets
PIPELINE_COMMANDS = {
    "gen-corpus": ("corpus",),
    "calibrate-world": ("world",),
    "gen-personas": ("personas",),
    "train-surrogate": ("surrogate",),
    "train-obfuscator": ("obfuscator",),
    "evaluate": ("evaluation",),
    "train-denoiser": ("denoiser",),
    "adversary": ("adversary",),
    "sweep": ("sweep",),
    "personalize": ("personalization",),
    "mi-study": ("mi_study",),
    "acceptance": ("acceptance",),
}


def configure_logging(level: str = settings.LOG_LEVEL, cloud: bool = settings.CLOUD_LOGGING_ENABLED) -> None:
    logging.basicConfig(level=level, format=LOG_FORMAT)
    if not cloud:
        return
    try:
        import google.cloud.logging

        client = google.cloud.logging.Client()
        handler = client.get_default_handler()
        handler.setFormatter(logging.Formatter(LOG_FORMAT))
        logging.getLogger().addHandler(handler)
        client.setup_logging()
    except Exception as e:
        logger.warning("Cloud logging unavailable, continuing with local logs: %s", e)


def _resolve_config(args: argparse.Namespace) -> ExperimentConfig:
    if args.config:
        config = load_config(args.config)
    elif args.smoke:
        config = ExperimentConfig.smoke()
    else:
        config = ExperimentConfig()
    if args.seed is not None:
        config = parse_config({**config.model_dump(mode="json"), "seed": args.seed})
    return config


def _add_run_options(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="experiment config JSON file")
    parser.add_argument("--smoke", action="store_true", help="use the small preset when no --config is given")
    parser.add_argument("--seed", type=int, help="override the experiment seed")
    parser.add_argument("--output-dir", help="root directory for run artifacts")
    parser.add_argument("--database-url", help="stage registry URL (default: SQLite in the output directory)")
    parser.add_argument("--force", action="store_true", help="recompute stages even if already completed")
    parser.add_argument("--upload", action="store_true", help="copy the run directory to Cloud Storage")
    parser.add_argument("--bucket", help="artifacts bucket (default: ARTIFACTS_BUCKET_NAME)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="testbed", description="Recommender obfuscation/denoising testbed")
    parser.add_argument("--log-level", default=settings.LOG_LEVEL)
    sub = parser.add_subparsers(dest="command", required=True)

    for name in PIPELINE_COMMANDS:
        _add_run_options(sub.add_parser(name))
    run = sub.add_parser("run", help="whole pipeline")
    _add_run_options(run)
    run.add_argument("--with-studies", action="store_true", help="also run the sweep, personalization and MI studies")

    denoise = sub.add_parser("denoise", help="estimate C^u for one (V^u, V^o, C^o) record")
    denoise.add_argument("--model", required=True, help="denoiser checkpoint (.npz)")
    denoise.add_argument("--embeddings", required=True, help="corpus embeddings (.npy)")
    denoise.add_argument("--input", required=True,
                         help='JSON file {"user_videos": [...], "obfuscated_videos": [...], "c_o": [...]}')

    repop = sub.add_parser("repopulate", help="materialize a recommendation list for a class distribution")
    repop.add_argument("--bank", required=True, help="bank JSON written by gen-personas")
    repop.add_argument("--target", required=True, help="comma-separated class weights")
    repop.add_argument("--count", type=int, required=True)
    repop.add_argument("--corpus", help="corpus directory; reports the class mix of the served videos")
    return parser


def _run_pipeline_command(args: argparse.Namespace, targets: Sequence[str]) -> dict:
    from app.harness.pipeline import run_pipeline

    config = _resolve_config(args)
    result = run_pipeline(
        config,
        targets=targets,
        output_dir=args.output_dir,
        database_url=args.database_url,
        force=args.force,
        upload=args.upload,
        bucket_name=args.bucket,
    )
    return {
        "config_hash": result.artifacts.config_hash,
        "run_dir": str(result.run_dir),
        "stages": result.stages,
        "skipped": result.skipped,
        "uploaded": len(result.uploaded),
    }


def _denoise_command(args: argparse.Namespace) -> dict:
    from app.denoiser.model import DenoiserNetwork, denoise

    try:
        record = json.loads(Path(args.input).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as e:
        raise DataFormatError(f"cannot read denoise input ({e})", path=args.input) from e
    model = DenoiserNetwork.load(args.model)
    embeddings = np.load(args.embeddings)
    v_u = embeddings[np.asarray(record["user_videos"], dtype=np.int64)]
    v_o = embeddings[np.asarray(record["obfuscated_videos"], dtype=np.int64)]
    c_hat = denoise(model, v_u, v_o, np.asarray(record["c_o"], dtype=np.float64))
    return {"c_u_hat": [float(x) for x in c_hat]}


def _repopulate_command(args: argparse.Namespace) -> dict:
    from app.corpus.bank import VideoBank
    from app.denoiser.repopulation import repopulate

    bank = VideoBank.from_json(json.loads(Path(args.bank).read_text(encoding="utf-8")))
    try:
        target = np.array([float(x) for x in args.target.split(",")])
    except ValueError as e:
        raise ConfigError(f"--target must be comma-separated numbers ({e})") from e
    membership = None
    if args.corpus:
        from app.corpus.store import load_corpus

        membership = load_corpus(args.corpus)[0].membership
    result = repopulate(bank, target, args.count, membership=membership)
    return {
        "video_ids": result.video_ids,
        "allocation": [int(a) for a in result.allocation],
        "distribution": [float(x) for x in result.distribution],
        "tv_gap": result.tv_gap,
        "spills": [list(s) for s in result.spills],
    }


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    configure_logging(args.log_level.upper())
    try:
        if args.command in PIPELINE_COMMANDS:
            output = _run_pipeline_command(args, PIPELINE_COMMANDS[args.command])
        elif args.command == "run":
            from app.harness.stages import CORE_STAGES, STUDY_STAGES

            targets = CORE_STAGES + (STUDY_STAGES if args.with_studies else ())
            output = _run_pipeline_command(args, targets)
        elif args.command == "denoise":
            output = _denoise_command(args)
        else:
            output = _repopulate_command(args)
    except ConfigError as e:
        logger.error("Configuration error: %s", e)
        return EXIT_CONFIG
    except StageFailure as e:
        logger.error("Pipeline aborted in stage '%s': %s", e.stage, e.cause)
        return EXIT_STAGE
    except Exception as e:
        logger.error("Unexpected error: %s", str(e), exc_info=True)
        return EXIT_ERROR
    print(json.dumps(output, indent=2, sort_keys=True))
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
