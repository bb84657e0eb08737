"""
Evaluation harness: systems x modes x policies x channel counts over a test set
"""
import logging
from dataclasses import dataclass
from functools import lru_cache
from pathlib import Path
from typing import Any, Dict, List, Literal, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd
from pydantic import BaseModel, ConfigDict, model_validator

from src.dsp.stft import MultiChannelWave, StftConfig, stft
from src.enhance.masking import ideal_ratio_masks
from src.enhance.pipeline import EnhanceOptions, enhance_utterance
from src.model.network import SeparationNet, load_network
from src.simroom.dataset import load_examples
from src.train.example import TrainingExample
from src.utils.errors import DataError
from src.utils.parallel import parallel_map
from .metrics import ROW_COLUMNS, SeparationMetrics

logger = logging.getLogger(__name__)

REPORT_NAME = 'report.csv'
AGGREGATE_NAME = 'aggregate.csv'


class SystemSpec(BaseModel):
    """One evaluated system: where its masks come from and how they are used"""
    model_config = ConfigDict(extra='forbid', frozen=True)

    name: str
    kind: Literal['checkpoint', 'oracle', 'mixture'] = 'checkpoint'
    checkpoint: Optional[str] = None
    mode: Literal['masking', 'mvdr'] = 'mvdr'
    ref_policy: Literal['max-snr', 'random', 'oracle'] = 'max-snr'
    vad: Literal['none', 'oracle', 'energy'] = 'none'

    @model_validator(mode='after')
    def check_checkpoint(self) -> 'SystemSpec':
        if self.kind == 'checkpoint' and not self.checkpoint:
            raise ValueError(f"System {self.name!r} needs a checkpoint path")
        return self

    @property
    def policy_label(self) -> str:
        return 'none' if self.kind == 'mixture' else self.ref_policy

    @property
    def mode_label(self) -> str:
        return 'none' if self.kind == 'mixture' else self.mode


@dataclass
class EvalReport:
    """Per-utterance rows and their per-cell means"""
    rows: pd.DataFrame
    aggregate: pd.DataFrame
    rows_path: Optional[Path] = None
    aggregate_path: Optional[Path] = None

    @classmethod
    def from_rows(cls, rows: Sequence[Dict[str, Any]]) -> 'EvalReport':
        frame = pd.DataFrame(list(rows), columns=ROW_COLUMNS)
        return cls(frame, SeparationMetrics.aggregate(frame))

    def write(self, out_dir: Union[str, Path]) -> Tuple[Path, Path]:
        """Write report.csv and aggregate.csv into out_dir"""
        out_dir = Path(out_dir)
        try:
            out_dir.mkdir(parents=True, exist_ok=True)
            self.rows_path = out_dir / REPORT_NAME
            self.aggregate_path = out_dir / AGGREGATE_NAME
            self.rows.to_csv(self.rows_path, index=False, float_format='%.6f')
            self.aggregate.to_csv(self.aggregate_path, index=False, float_format='%.6f')
        except OSError as e:
            raise DataError(f"{out_dir}: cannot write evaluation report ({e})") from e
        return self.rows_path, self.aggregate_path


def select_channels(
    example: TrainingExample,
    num_channels: int,
    rng: np.random.Generator,
) -> List[int]:
    """
    Microphone subset of size num_channels

    Microphone 0 always stays first since the references are its images.
    Each source's geometrically closest microphone is then forced in, and
    the remaining slots are filled at random. Without scenario geometry the
    subset is mic 0 plus a random fill.

    Args:
        example: Example whose metadata may carry scenario mics/sources
        num_channels: Subset size C
        rng: Selection generator

    Returns:
        Channel indices, mic 0 first, the rest ascending
    """
    available = example.mixture.num_channels
    if num_channels > available:
        raise DataError(f"{example.example_id}: {num_channels} channels requested, "
                        f"only {available} recorded")
    if num_channels < 1:
        raise ValueError(f"Channel count must be >= 1, got {num_channels}")

    chosen = [0]
    scenario = example.metadata.get('scenario') or {}
    if 'mics' in scenario and 'sources' in scenario:
        mics = np.asarray(scenario['mics'], dtype=np.float64)
        sources = np.asarray(scenario['sources'], dtype=np.float64)
        for source in sources:
            nearest = int(np.argmin(np.linalg.norm(mics - source, axis=1)))
            if nearest not in chosen and len(chosen) < num_channels:
                chosen.append(nearest)
    rest = [c for c in range(available) if c not in chosen]
    fill = rng.choice(rest, num_channels - len(chosen), replace=False) if num_channels > len(chosen) else []
    return [0] + sorted(chosen[1:] + [int(c) for c in fill])


@lru_cache(maxsize=8)
def _cached_network(path: str) -> Tuple[SeparationNet, StftConfig]:
    net, stft_cfg, _ = load_network(path)
    return net, stft_cfg


def oracle_masks(example: TrainingExample, cfg: StftConfig) -> np.ndarray:
    """Ideal ratio masks at mic 0 from the source images and the residual noise (S, T, F)"""
    refs = example.references
    noise = example.mixture.samples[0] - refs.sum(axis=0)
    source_spec = stft(MultiChannelWave(refs, example.mixture.sample_rate), cfg).bins
    noise_spec = stft(MultiChannelWave(noise[None], example.mixture.sample_rate), cfg).bins[0]
    return ideal_ratio_masks(source_spec, noise_spec).masks


def separate_with(
    system: SystemSpec,
    example: TrainingExample,
    seed: int,
) -> np.ndarray:
    """
    Separated signals (S, L) of one system on one (channel-subset) example
    """
    length = example.mixture.length
    if system.kind == 'mixture':
        return np.repeat(example.mixture.samples[:1], example.num_sources, axis=0)

    if system.kind == 'oracle':
        cfg = StftConfig(sample_rate=example.mixture.sample_rate)
        spec = stft(example.mixture, cfg)
        masks: Any = oracle_masks(example, cfg)
    else:
        net, cfg = _cached_network(str(system.checkpoint))
        if cfg.sample_rate != example.mixture.sample_rate:
            raise DataError(f"{example.example_id}: recorded at {example.mixture.sample_rate} Hz, "
                            f"{system.checkpoint} expects {cfg.sample_rate} Hz")
        spec = stft(example.mixture, cfg)
        if net.cfg.architecture == 'single_channel':
            masks = net.per_channel_masks(spec)
        else:
            masks = net.masks(spec)

    options = EnhanceOptions(mode=system.mode, ref_policy=system.ref_policy, vad=system.vad, seed=seed)
    result = enhance_utterance(spec, masks, options, length, example.references, example.activity)
    return result.waves


def _evaluate_job(job: Tuple[int, TrainingExample, Tuple[SystemSpec, ...], Tuple[int, ...], int]) -> List[Dict[str, Any]]:
    index, example, systems, channel_counts, seed = job
    rows = []
    for num_channels in channel_counts:
        rng = np.random.default_rng([seed, index, num_channels])
        channels = select_channels(example, num_channels, rng)
        subset = example.select_channels(channels)
        for system in systems:
            cell_seed = int(np.random.default_rng([seed, index, num_channels, 1]).integers(2 ** 31))
            estimates = separate_with(system, subset, cell_seed)
            for score in SeparationMetrics.score_utterance(estimates, subset.references, subset.mixture.samples[0]):
                rows.append({
                    'utt_id': example.example_id,
                    'system': system.name,
                    'mode': system.mode_label,
                    'policy': system.policy_label,
                    'C': num_channels,
                    **score,
                })
        logger.debug("Scored %s at C=%d (channels %s)", example.example_id, num_channels, channels)
    return rows


def run_matrix(
    test_set: Union[str, Path, Sequence[TrainingExample]],
    systems: Sequence[SystemSpec],
    out_dir: Optional[Union[str, Path]] = None,
    channel_counts: Optional[Sequence[int]] = None,
    seed: int = 0,
    limit: Optional[int] = None,
    jobs: Optional[int] = 1,
    progress: bool = False,
) -> EvalReport:
    """
    Evaluate every (system, C) cell on every utterance

    Args:
        test_set: Manifest path or loaded examples
        systems: Systems to compare (mode and policy are part of each)
        out_dir: Where report.csv and aggregate.csv go; nothing is written
            when None
        channel_counts: Channel counts to sweep; defaults to all recorded
            channels
        seed: Seeds channel subsets and random reference choices
        limit: Evaluate only the first `limit` manifest entries
        jobs: Worker count
        progress: Show a progress bar

    Returns:
        EvalReport with utterances x sources rows per cell
    """
    if not systems:
        raise ValueError("run_matrix needs at least one system")
    names = [s.name for s in systems]
    for system in systems:
        if system.kind == 'checkpoint' and not Path(system.checkpoint).exists():
            raise DataError(f"{system.checkpoint}: checkpoint not found")

    examples = load_examples(test_set, limit) if isinstance(test_set, (str, Path)) else list(test_set)[:limit]
    if not examples:
        raise DataError("Test set is empty")
    available = min(ex.mixture.num_channels for ex in examples)
    counts = tuple(channel_counts) if channel_counts else (available,)
    if max(counts) > available:
        raise DataError(f"Channel count {max(counts)} exceeds the {available} channels in the test set")

    logger.info("Evaluating %d systems (%s) on %d utterances, C in %s",
                len(systems), ', '.join(names), len(examples), list(counts))
    jobs_list = [(i, ex, tuple(systems), counts, seed) for i, ex in enumerate(examples)]
    per_utt = parallel_map(_evaluate_job, jobs_list, jobs, 'evaluate' if progress else None)

    rows = [row for utt_rows in per_utt for row in utt_rows]
    report = EvalReport.from_rows(rows)
    if out_dir is not None:
        report.write(out_dir)
    return report


def parse_channel_sweep(text: str) -> List[int]:
    """'2..7' or '2,4,7' to a list of channel counts"""
    try:
        if '..' in text:
            low, high = (int(v) for v in text.split('..', 1))
            counts = list(range(low, high + 1))
        else:
            counts = [int(v) for v in text.split(',') if v.strip()]
    except ValueError as e:
        raise ValueError(f"Invalid channel sweep {text!r}: expected 'LOW..HIGH' or a comma list") from e
    if not counts or min(counts) < 1:
        raise ValueError(f"Invalid channel sweep {text!r}")
    return counts
