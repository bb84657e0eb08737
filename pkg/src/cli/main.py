"""
Command-line entry point
"""
import argparse
import logging
import sys
from typing import List, Optional, Sequence

from config.settings import EXIT_DATA, EXIT_NUMERIC, EXIT_OK, EXIT_USAGE
from src.utils.errors import ConfigError, DataError, NumericError
from .commands import build_systems, load_matrix, run_evaluate, run_separate, run_simulate, run_train
from .config import RunConfig

logger = logging.getLogger(__name__)

LOG_FORMAT = "%(asctime)s %(levelname)s %(name)s: %(message)s"


def _common_parser() -> argparse.ArgumentParser:
    """Flags shared by every subcommand: the recipe, logging and one flag per config key"""
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument('--config', help="Flat JSON recipe; flags win over its values")
    common.add_argument('--log-level', default='INFO',
                        choices=['DEBUG', 'INFO', 'WARNING', 'ERROR'], help="Logging level (default: INFO)")
    group = common.add_argument_group('configuration')
    for name, kwargs in RunConfig.flag_spec().items():
        group.add_argument(f"--{name.replace('_', '-')}", dest=name, **kwargs)
    return common


def _comma_list(text: str) -> List[str]:
    return [item.strip() for item in text.split(',') if item.strip()]


def build_parser() -> argparse.ArgumentParser:
    common = _common_parser()
    parser = argparse.ArgumentParser(
        prog='adsep',
        description="Channel-count and channel-order invariant multi-channel speech separation",
    )
    sub = parser.add_subparsers(dest='command', required=True)

    simulate = sub.add_parser('simulate', parents=[common], help="Render a simulated corpus")
    simulate.add_argument('--n', type=int, required=True, help="Number of mixtures")
    simulate.add_argument('--out-dir', required=True, help="Output directory")
    simulate.add_argument('--no-progress', action='store_true', help="Hide the progress bar")

    train = sub.add_parser('train', parents=[common], help="Train a separation network")
    train.add_argument('--manifest', required=True, help="Training manifest")
    train.add_argument('--val-manifest', help="Validation manifest (default: the training set)")
    train.add_argument('--out', required=True, help="Checkpoint path (best validation SI-SNR)")
    train.add_argument('--resume', help="Checkpoint to resume from, e.g. <out>.last")
    train.add_argument('--log', help="Training log CSV (default: <out>.log.csv)")
    train.add_argument('--plot', action='store_true', help="Write the training curve as HTML")

    separate = sub.add_parser('separate', parents=[common], help="Separate one recording")
    separate.add_argument('--checkpoint', required=True, help="Trained network")
    separate.add_argument('--inputs', nargs='+', help="One mono WAV per channel")
    separate.add_argument('--manifest', help="Manifest holding the example to separate")
    separate.add_argument('--example', help="Example id within --manifest")
    separate.add_argument('--out-dir', required=True, help="Output directory")

    evaluate = sub.add_parser('evaluate', parents=[common], help="Score systems on a test manifest")
    evaluate.add_argument('--manifest', required=True, help="Test manifest")
    evaluate.add_argument('--checkpoint', action='append', default=[], help="Checkpoint to score (repeatable)")
    evaluate.add_argument('--matrix', help="JSON array of systems; replaces the checkpoint/mode/policy grid")
    evaluate.add_argument('--modes', type=_comma_list, help="Comma list of modes (default: --mode)")
    evaluate.add_argument('--policies', type=_comma_list, help="Comma list of reference policies "
                                                               "(default: --ref-policy)")
    evaluate.add_argument('--oracle', action='store_true', help="Add the ideal-ratio-mask system")
    evaluate.add_argument('--mixture', action='store_true', help="Add the unprocessed-mixture system")
    evaluate.add_argument('--sweep-channels', help="Channel counts, e.g. 2..7 or 2,4,7")
    evaluate.add_argument('--limit', type=int, help="Evaluate only the first N utterances")
    evaluate.add_argument('--out-dir', required=True, help="Report directory")
    evaluate.add_argument('--plot', action='store_true', help="Write the sweep chart as HTML")
    evaluate.add_argument('--no-progress', action='store_true', help="Hide the progress bar")
    return parser


def _run(args: argparse.Namespace, cfg: RunConfig) -> List[str]:
    """Dispatch a parsed command; returns the paths to report"""
    if args.command == 'simulate':
        return [str(run_simulate(cfg, args.n, args.out_dir, progress=not args.no_progress))]

    if args.command == 'train':
        paths = run_train(cfg, args.manifest, args.out, args.val_manifest, args.resume, args.log, args.plot)
        return [str(p) for p in paths.values()]

    if args.command == 'separate':
        return [str(p) for p in run_separate(cfg, args.checkpoint, args.out_dir, args.inputs,
                                              args.manifest, args.example)]

    if args.matrix:
        systems = load_matrix(args.matrix)
    else:
        systems = build_systems(cfg, args.checkpoint, args.modes or [cfg.mode],
                                args.policies or [cfg.ref_policy], args.oracle, args.mixture)
    if not systems:
        raise ConfigError("evaluate needs --checkpoint, --oracle, --mixture or --matrix")
    return [str(p) for p in run_evaluate(cfg, args.manifest, args.out_dir, systems, args.sweep_channels,
                                          args.limit, args.plot, progress=not args.no_progress)]


def main(argv: Optional[Sequence[str]] = None) -> int:
    """
    Parse, configure logging once, run, and map failures to exit codes

    Returns:
        0 on success, 1 for usage/config errors, 2 for data errors, 3 for
        numeric failures
    """
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return EXIT_OK if e.code in (0, None) else EXIT_USAGE

    logging.basicConfig(level=getattr(logging, args.log_level), format=LOG_FORMAT, force=True)
    overrides = {name: getattr(args, name) for name in RunConfig.model_fields}

    try:
        cfg = RunConfig.load(args.config, overrides)
        for path in _run(args, cfg):
            print(path)
    except ConfigError as e:
        logger.error("%s", e)
        return EXIT_USAGE
    except NumericError as e:
        logger.error("%s", e)
        return EXIT_NUMERIC
    except (DataError, OSError) as e:
        logger.error("%s", e)
        return EXIT_DATA
    except ValueError as e:
        logger.error("%s", e)
        return EXIT_USAGE
    return EXIT_OK


if __name__ == '__main__':
    sys.exit(main())
