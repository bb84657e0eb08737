"""
Simulated corpus generation and manifest I/O

The manifest is JSON Lines: one record per example with its id, ordered
channel and reference WAV paths (relative to the manifest), a scenario
summary, the overlap ratio, the noise SNR, per-source activity spans and the
example's seed.
"""
import json
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Union

import numpy as np

from config.settings import (
    DEFAULT_NUM_CHANNELS,
    MAX_ORDER_TRAIN,
    NUM_CANDIDATE_POINTS,
    PEAK_LEVEL,
    RIR_SECONDS,
    SAMPLE_RATE,
    UTTERANCE_SECONDS,
)
from src.dsp.wavio import read_multichannel, read_wav, write_wav
from src.train.example import TrainingExample
from src.utils.errors import DataError
from src.utils.parallel import parallel_map
from .mixture import peak_normalize, render_mixture
from .rir import RirSet, compute_rirs
from .scenario import SimulationRanges, sample_scenario
from .sources import NoisePool, SourcePool

logger = logging.getLogger(__name__)

MANIFEST_NAME = 'manifest.jsonl'
_REQUIRED_FIELDS = ('id', 'channels', 'references')


@dataclass(frozen=True)
class DatasetJob:
    """Everything one worker needs to render example `index`"""
    index: int
    seed: int
    out_dir: Path
    ranges: SimulationRanges
    num_channels: int
    max_order: int
    utterance_seconds: float
    rir_seconds: float
    source_dir: Optional[Path]
    noise_dir: Optional[Path]
    sample_rate: int


def example_rng(seed: int, index: int) -> np.random.Generator:
    """Independent stream per example, identical for any worker count"""
    return np.random.default_rng(np.random.SeedSequence([seed, index]))


def _rounded(values: np.ndarray) -> List:
    return np.round(np.asarray(values, dtype=np.float64), 6).tolist()


def render_example(job: DatasetJob) -> Dict[str, Any]:
    """Simulate, render and write one example; returns its manifest record"""
    rng = example_rng(job.seed, job.index)
    example_id = f"ex{job.index:05d}"

    scenario = sample_scenario(rng, job.ranges)
    mic_idx = np.sort(rng.choice(NUM_CANDIDATE_POINTS, job.num_channels, replace=False))
    picks = rng.choice(NUM_CANDIDATE_POINTS, 3, replace=False)
    source_idx, noise_idx = picks[:2], picks[2]

    mics = scenario.mics[mic_idx]
    positions = scenario.sources[np.append(source_idx, noise_idx)]
    rir_length = int(round(job.rir_seconds * job.sample_rate))
    rirs = compute_rirs(scenario, mics, positions, job.max_order, rir_length, job.sample_rate)

    pool = SourcePool(job.source_dir, job.utterance_seconds, job.sample_rate)
    utterances = [pool.draw(rng), pool.draw(rng)]
    overlap_ratio = float(rng.uniform(*job.ranges.overlap_ratio))
    snr_db = float(rng.uniform(*job.ranges.snr_db))

    total = max(len(u) for u in utterances) * 2 + rir_length
    noise = NoisePool(job.noise_dir, sample_rate=job.sample_rate).draw_length(rng, total)

    example = render_mixture(
        utterances,
        RirSet(rirs.responses[:, :2], job.sample_rate),
        overlap_ratio,
        noise=noise,
        noise_rir=rirs.responses[:, 2],
        snr_db=snr_db,
        example_id=example_id,
        sample_rate=job.sample_rate,
    )
    example, gain = peak_normalize(example, PEAK_LEVEL)

    rel_dir = Path(example_id)
    channel_paths = [rel_dir / f"ch{c}.wav" for c in range(job.num_channels)]
    reference_paths = [rel_dir / f"ref{k}.wav" for k in range(example.num_sources)]
    for path, samples in zip(channel_paths, example.mixture.samples):
        write_wav(job.out_dir / path, samples, job.sample_rate)
    for path, samples in zip(reference_paths, example.references):
        write_wav(job.out_dir / path, samples, job.sample_rate)

    logger.debug("Rendered %s (overlap %.2f, snr %.1f dB)", example_id, overlap_ratio, snr_db)
    return {
        'id': example_id,
        'channels': [p.as_posix() for p in channel_paths],
        'references': [p.as_posix() for p in reference_paths],
        'scenario': {
            **{k: (_rounded(v) if isinstance(v, list) else round(v, 6)) for k, v in scenario.summary().items()},
            'mics': _rounded(mics),
            'sources': _rounded(positions[:2]),
            'noise_source': _rounded(positions[2]),
        },
        'overlap_ratio': round(overlap_ratio, 6),
        'snr_db': round(snr_db, 6),
        'gain': round(gain, 6),
        'spans': [list(s) for s in example.metadata['spans']],
        'length': example.mixture.length,
        'sample_rate': job.sample_rate,
        'seed': [job.seed, job.index],
    }


def build_dataset(
    n_examples: int,
    out_dir: Union[str, Path],
    seed: int = 0,
    ranges: SimulationRanges = SimulationRanges(),
    num_channels: int = DEFAULT_NUM_CHANNELS,
    max_order: int = MAX_ORDER_TRAIN,
    utterance_seconds: float = UTTERANCE_SECONDS,
    rir_seconds: float = RIR_SECONDS,
    source_dir: Optional[Union[str, Path]] = None,
    noise_dir: Optional[Union[str, Path]] = None,
    sample_rate: int = SAMPLE_RATE,
    jobs: Optional[int] = 1,
    progress: bool = False,
) -> Path:
    """
    Render a simulated corpus and write its manifest

    Args:
        n_examples: Number of mixtures
        out_dir: Output directory (created if needed)
        seed: Corpus seed; example i uses the stream (seed, i)
        ranges: Scenario sampling ranges
        num_channels: Microphones per example, at most the candidate count
        max_order: Image-method reflection order
        utterance_seconds: Dry utterance duration
        rir_seconds: Impulse-response duration
        source_dir: WAV directory for speech (synthetic signals when None)
        noise_dir: WAV directory for noise (white noise when None)
        sample_rate: Hz
        jobs: Worker count
        progress: Show a progress bar

    Returns:
        Path of the manifest
    """
    if n_examples < 1:
        raise ValueError(f"n_examples must be >= 1, got {n_examples}")
    if not 1 <= num_channels <= NUM_CANDIDATE_POINTS:
        raise ValueError(
            f"num_channels must be in [1, {NUM_CANDIDATE_POINTS}] "
            f"(candidate microphone points per scenario), got {num_channels}"
        )

    out_dir = Path(out_dir)
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
    except OSError as e:
        raise DataError(f"Cannot create output directory {out_dir}: {e}") from e

    work = [
        DatasetJob(i, seed, out_dir, ranges, num_channels, max_order, utterance_seconds, rir_seconds,
                   Path(source_dir) if source_dir else None, Path(noise_dir) if noise_dir else None,
                   sample_rate)
        for i in range(n_examples)
    ]
    records = parallel_map(render_example, work, jobs=jobs, progress='simulate' if progress else None)

    manifest = out_dir / MANIFEST_NAME
    try:
        with open(manifest, 'w') as f:
            for record in records:
                f.write(json.dumps(record, sort_keys=True) + '\n')
    except OSError as e:
        raise DataError(f"Cannot write manifest {manifest}: {e}") from e
    logger.info("Wrote %d examples to %s", len(records), manifest)
    return manifest


def read_manifest(path: Union[str, Path]) -> List[Dict[str, Any]]:
    """
    Parse a manifest, reporting the 1-based line of the first malformed record

    Raises:
        DataError naming the file and line
    """
    path = Path(path)
    try:
        lines = path.read_text().splitlines()
    except OSError as e:
        raise DataError(f"Cannot read manifest {path}: {e}") from e

    records = []
    for lineno, line in enumerate(lines, start=1):
        if not line.strip():
            continue
        try:
            record = json.loads(line)
        except json.JSONDecodeError as e:
            raise DataError(f"{path}:{lineno}: malformed manifest line ({e.msg})") from e
        if not isinstance(record, dict):
            raise DataError(f"{path}:{lineno}: malformed manifest line (expected an object)")
        missing = [k for k in _REQUIRED_FIELDS if k not in record]
        if missing:
            raise DataError(f"{path}:{lineno}: malformed manifest line (missing {', '.join(missing)})")
        record['_line'] = lineno
        records.append(record)
    if not records:
        raise DataError(f"{path}: manifest has no records")
    return records


def spans_to_activity(spans: Sequence[Sequence[int]], length: int) -> np.ndarray:
    flags = np.zeros((len(spans), length), dtype=bool)
    for k, (start, end) in enumerate(spans):
        flags[k, start:end] = True
    return flags


def load_example(record: Dict[str, Any], root: Union[str, Path]) -> TrainingExample:
    """Read one manifest record's WAVs"""
    root = Path(root)
    rate = int(record.get('sample_rate', SAMPLE_RATE))
    mixture = read_multichannel([root / p for p in record['channels']], rate)
    references = np.stack([read_wav(root / p, rate)[0] for p in record['references']])
    if references.shape[1] != mixture.length:
        raise DataError(f"{record['id']}: references and channels differ in length")
    activity = None
    if 'spans' in record:
        activity = spans_to_activity(record['spans'], mixture.length)
    metadata = {k: v for k, v in record.items() if k not in ('channels', 'references')}
    return TrainingExample(record['id'], mixture, references, metadata, activity)


def load_examples(manifest: Union[str, Path], limit: Optional[int] = None) -> List[TrainingExample]:
    """All (or the first `limit`) examples of a manifest"""
    manifest = Path(manifest)
    records = read_manifest(manifest)[:limit]
    examples = []
    for record in records:
        try:
            examples.append(load_example(record, manifest.parent))
        except (DataError, ValueError) as e:
            raise DataError(f"{manifest}:{record['_line']}: {e}") from e
    return examples
