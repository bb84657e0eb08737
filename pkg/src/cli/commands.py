"""
Subcommand bodies: simulate, train, separate, evaluate
"""
import json
import logging
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Union

import numpy as np

from src.dsp.stft import stft
from src.dsp.wavio import read_multichannel, write_wav
from src.enhance.pipeline import enhance_utterance
from src.evalx.harness import EvalReport, SystemSpec, parse_channel_sweep, run_matrix
from src.evalx.plots import sweep_figure, training_figure, write_figure
from src.model.network import build_network, load_network
from src.model.params import count_parameters, init_params
from src.simroom.dataset import build_dataset, load_example, load_examples, read_manifest
from src.simroom.scenario import SimulationRanges
from src.train.trainer import Trainer, read_log
from src.utils.errors import ConfigError, DataError
from .config import RunConfig

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]
SIDECAR_NAME = 'separation.json'
MASKS_NAME = 'masks.npy'


def run_simulate(cfg: RunConfig, n: int, out_dir: PathLike, progress: bool = True) -> Path:
    """Render n simulated mixtures; returns the manifest path"""
    return build_dataset(
        n,
        out_dir,
        seed=cfg.seed,
        ranges=SimulationRanges(),
        num_channels=cfg.channels,
        max_order=cfg.max_order,
        utterance_seconds=cfg.utterance_seconds,
        rir_seconds=cfg.rir_seconds,
        source_dir=cfg.source_dir,
        noise_dir=cfg.noise_dir,
        sample_rate=cfg.sample_rate,
        jobs=cfg.jobs,
        progress=progress,
    )


def run_train(
    cfg: RunConfig,
    manifest: PathLike,
    out_checkpoint: PathLike,
    val_manifest: Optional[PathLike] = None,
    resume: Optional[PathLike] = None,
    log_csv: Optional[PathLike] = None,
    plot: bool = False,
) -> Dict[str, Path]:
    """
    Train a network on a simulated corpus

    Args:
        cfg: Run configuration (model, training and STFT settings)
        manifest: Training manifest
        out_checkpoint: Best-validation checkpoint path
        val_manifest: Validation manifest; the training set is reused when None
        resume: Checkpoint to continue from (usually `<out>.last`)
        log_csv: Training log path, `<out>.log.csv` by default
        plot: Also write the training curve as HTML

    Returns:
        Paths written, keyed by 'checkpoint', 'last', 'log' and optionally 'plot'
    """
    out_checkpoint = Path(out_checkpoint)
    log_csv = Path(log_csv) if log_csv else out_checkpoint.with_name(out_checkpoint.name + '.log.csv')

    train_set = load_examples(manifest)
    val_set = load_examples(val_manifest) if val_manifest else train_set
    if val_manifest is None:
        logger.warning("No validation manifest; validating on the training set")

    model_cfg = cfg.network_config()
    stft_cfg = cfg.stft_config()
    for example in train_set + val_set:
        if example.mixture.sample_rate != stft_cfg.sample_rate:
            raise DataError(f"{example.example_id}: sample rate {example.mixture.sample_rate} Hz, "
                            f"config expects {stft_cfg.sample_rate} Hz")

    params = init_params(model_cfg, np.random.default_rng(cfg.seed))
    logger.info("Model %s/%s with %d parameters", model_cfg.architecture, model_cfg.topology,
                count_parameters(params))
    trainer = Trainer(build_network(model_cfg, params), stft_cfg, cfg.train_config())
    trainer.fit(train_set, val_set, out_checkpoint, log_csv, resume=resume)

    paths = {
        'checkpoint': out_checkpoint,
        'last': out_checkpoint.with_name(out_checkpoint.name + '.last'),
        'log': log_csv,
    }
    if plot:
        paths['plot'] = write_figure(training_figure(read_log(log_csv)),
                                     log_csv.with_name(log_csv.name + '.html'))
    return paths


def _manifest_entry(manifest: PathLike, example_id: str) -> Dict[str, Any]:
    for record in read_manifest(manifest):
        if record['id'] == example_id:
            return record
    raise DataError(f"{manifest}: no example with id {example_id!r}")


def run_separate(
    cfg: RunConfig,
    checkpoint: PathLike,
    out_dir: PathLike,
    inputs: Optional[Sequence[PathLike]] = None,
    manifest: Optional[PathLike] = None,
    example_id: Optional[str] = None,
) -> List[Path]:
    """
    Separate one recording into two source WAVs plus a sidecar

    Input is either one mono WAV per channel or a manifest entry; the
    entry's references and activity enable the oracle policy and VAD.

    Args:
        cfg: Run configuration (enhancement options)
        checkpoint: Trained network
        out_dir: Output directory
        inputs: Channel WAVs
        manifest: Manifest holding example_id
        example_id: Entry to separate

    Returns:
        Paths of the source WAVs, then the sidecar JSON and the masks file
    """
    if (inputs is None) == (manifest is None):
        raise ConfigError("separate needs either input WAVs or a manifest entry")

    net, stft_cfg, _ = load_network(checkpoint)
    references = activity = None
    if manifest is not None:
        if example_id is None:
            raise ConfigError("--example is required with --manifest")
        example = load_example(_manifest_entry(manifest, example_id), Path(manifest).parent)
        wave, references, activity = example.mixture, example.references, example.activity
    else:
        wave = read_multichannel(list(inputs), stft_cfg.sample_rate)

    spec = stft(wave, stft_cfg)
    if net.cfg.architecture == 'single_channel':
        masks: Any = net.per_channel_masks(spec)
    else:
        masks = net.masks(spec)
    options = cfg.enhance_options()
    result = enhance_utterance(spec, masks, options, wave.length, references, activity)

    out_dir = Path(out_dir)
    outputs = [write_wav(out_dir / f"source{k}.wav", w, stft_cfg.sample_rate)
               for k, w in enumerate(result.waves)]
    sidecar = out_dir / SIDECAR_NAME
    masks_path = out_dir / MASKS_NAME
    try:
        with open(sidecar, 'w') as f:
            json.dump({
                'checkpoint': str(checkpoint),
                'channels': wave.num_channels,
                'outputs': [p.name for p in outputs],
                **result.sidecar(),
            }, f, indent=2)
        np.save(masks_path, result.masks.astype(np.float32))
    except OSError as e:
        raise DataError(f"{out_dir}: cannot write separation outputs ({e})") from e
    return outputs + [sidecar, masks_path]


def build_systems(
    cfg: RunConfig,
    checkpoints: Sequence[PathLike],
    modes: Sequence[str],
    policies: Sequence[str],
    with_oracle: bool = False,
    with_mixture: bool = False,
) -> List[SystemSpec]:
    """Every checkpoint x mode x policy, plus the oracle and mixture rows when asked"""
    systems = []
    for path in checkpoints:
        for mode in modes:
            for policy in policies:
                systems.append(SystemSpec(name=Path(path).stem, kind='checkpoint', checkpoint=str(path),
                                          mode=mode, ref_policy=policy, vad=cfg.vad))
    if with_oracle:
        for mode in modes:
            for policy in policies:
                systems.append(SystemSpec(name='oracle', kind='oracle', mode=mode, ref_policy=policy, vad=cfg.vad))
    if with_mixture:
        systems.append(SystemSpec(name='mixture', kind='mixture'))
    return systems


def load_matrix(path: PathLike) -> List[SystemSpec]:
    """System list from a JSON array of SystemSpec objects"""
    try:
        with open(path) as f:
            entries = json.load(f)
    except (OSError, json.JSONDecodeError) as e:
        raise ConfigError(f"{path}: cannot read matrix ({e})") from e
    if not isinstance(entries, list):
        raise ConfigError(f"{path}: matrix must be a JSON array of systems")
    try:
        return [SystemSpec(**entry) for entry in entries]
    except (TypeError, ValueError) as e:
        raise ConfigError(f"{path}: {e}") from e


def run_evaluate(
    cfg: RunConfig,
    manifest: PathLike,
    out_dir: PathLike,
    systems: Sequence[SystemSpec],
    sweep: Optional[str] = None,
    limit: Optional[int] = None,
    plot: bool = False,
    progress: bool = True,
) -> List[Path]:
    """
    Score systems on a test manifest

    Args:
        cfg: Run configuration (seed and worker count)
        manifest: Test manifest
        out_dir: Report directory
        systems: Systems to compare
        sweep: Channel counts ('2..7' or '2,4,7'); all channels when None
        limit: Evaluate only the first `limit` entries
        plot: Also write the sweep chart as HTML
        progress: Show a progress bar

    Returns:
        Paths of the per-utterance and aggregate CSVs (and the chart)
    """
    try:
        counts = parse_channel_sweep(sweep) if sweep else None
    except ValueError as e:
        raise ConfigError(str(e)) from e

    report: EvalReport = run_matrix(manifest, systems, out_dir, counts, seed=cfg.seed,
                                    limit=limit, jobs=cfg.jobs, progress=progress)
    paths = [report.rows_path, report.aggregate_path]
    if plot:
        paths.append(write_figure(sweep_figure(report.aggregate), Path(out_dir) / 'sweep.html'))
    return paths
