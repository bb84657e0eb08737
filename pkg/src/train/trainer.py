"""
Training loop: per-example gradients, Adam updates, plateau LR decay
"""
import logging
import math
from pathlib import Path
from typing import Any, Dict, List, Literal, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd
from pydantic import BaseModel, ConfigDict, Field

from config.settings import (
    DEFAULT_BATCH_SIZE,
    DEFAULT_LEARNING_RATE,
    DEFAULT_MAX_EPOCHS,
    DEFAULT_PRECISION,
    GRAD_CLIP_NORM,
    LR_DECAY_FACTOR,
    PLATEAU_PATIENCE,
)
from src.dsp.stft import ComplexSpectrogram, StftConfig, istft_adjoint_array, istft_array, stft
from src.graph.precision import precision
from src.graph.tensor import OpGraph, Tensor, backward
from src.model.checkpoint import load_checkpoint, save_checkpoint
from src.model.config import ModelConfig
from src.model.layers import normalize_spectra, relational_features
from src.model.network import SeparationNet, build_network, network_metadata
from src.model.params import params_from_arrays
from src.utils.errors import ConfigError, NumericError
from src.utils.parallel import parallel_map
from .example import TrainingExample
from .objectives import Permutation, pit_loss, pit_loss_graph
from .optimizer import Adam, clip_by_global_norm
from .scheduler import PlateauScheduler

logger = logging.getLogger(__name__)

LOG_COLUMNS = ['epoch', 'train_loss', 'val_sisnr', 'lr']


class TrainConfig(BaseModel):
    """Optimization settings of one training run"""
    model_config = ConfigDict(extra='forbid', frozen=True)

    learning_rate: float = Field(DEFAULT_LEARNING_RATE, gt=0)
    batch_size: int = Field(DEFAULT_BATCH_SIZE, ge=1)
    max_epochs: int = Field(DEFAULT_MAX_EPOCHS, ge=1)
    plateau_patience: int = Field(PLATEAU_PATIENCE, ge=1)
    lr_decay_factor: float = Field(LR_DECAY_FACTOR, gt=0, lt=1)
    grad_clip: float = Field(GRAD_CLIP_NORM, gt=0)
    seed: int = 0
    precision: Literal['float32', 'float64'] = DEFAULT_PRECISION
    jobs: Optional[int] = Field(1, ge=1)


def _masked_synthesis(g: OpGraph, mask: Tensor, bins: np.ndarray, cfg: StftConfig, length: int) -> Tensor:
    """istft(mask * bins) as a tracked linear map of the (T, F) mask"""
    num_frames = bins.shape[0]

    def synthesize(m: np.ndarray) -> np.ndarray:
        return istft_array(m * bins, cfg, length)

    def adjoint(grad: np.ndarray) -> np.ndarray:
        return np.real(np.conj(bins) * istft_adjoint_array(grad, cfg, num_frames))

    return g.linear_map(mask, synthesize, adjoint, 'masked_istft')


def build_masks(g: OpGraph, net: SeparationNet, spec: ComplexSpectrogram) -> Tensor:
    """
    Record the mask estimate used for training

    The single-channel model is trained on channel 0, with that channel's
    relational feature taken from every channel when configured.
    """
    if net.cfg.architecture == 'spatiotemporal':
        return net.build(g, spec)
    relational = None
    if net.cfg.relational:
        relational = relational_features(normalize_spectra(spec.magnitude() ** 2))[:1]
    return net.build(g, spec.select([0]), relational)


def separate_channel0(
    g: OpGraph,
    masks: Tensor,
    spec: ComplexSpectrogram,
    length: int,
) -> Tensor:
    """Masked channel-0 estimates (S, length) recorded in g"""
    bins = spec.bins[0]
    estimates = []
    for k in range(masks.shape[0]):
        wave = _masked_synthesis(g, g.slice(masks, (k,)), bins, spec.config, length)
        estimates.append(g.reshape(wave, (1, length)))
    return g.concat(estimates, axis=0)


def training_step(
    example: TrainingExample,
    net: SeparationNet,
    stft_cfg: StftConfig,
) -> Tuple[float, Dict[str, np.ndarray], Permutation]:
    """
    Forward, PIT loss and backward for one example

    Args:
        example: Mixture with its references
        net: Network whose params are tracked
        stft_cfg: Analysis settings

    Returns:
        Tuple of (loss, gradient per parameter name, winning permutation)
    """
    spec = stft(example.mixture, stft_cfg)
    g = OpGraph()
    masks = build_masks(g, net, spec)
    estimates = separate_channel0(g, masks, spec, example.mixture.length)
    loss, perm = pit_loss_graph(g, estimates, example.references)

    value = float(loss.data)
    if not math.isfinite(value):
        raise NumericError(f"Non-finite loss on example {example.example_id}")
    grads = backward(g, loss, net.params)
    return value, grads, perm


def evaluate_loss(example: TrainingExample, net: SeparationNet, stft_cfg: StftConfig) -> float:
    """PIT loss of one example without recording gradients"""
    spec = stft(example.mixture, stft_cfg)
    mask_data = build_masks(OpGraph(), net, spec).data.astype(np.float64)
    bins = spec.bins[0]
    estimates = np.stack([
        istft_array(mask_data[k] * bins, stft_cfg, example.mixture.length)
        for k in range(mask_data.shape[0])
    ])
    loss, _ = pit_loss(estimates, example.references)
    return loss


def _gradient_job(job: Tuple[TrainingExample, Dict[str, Any], Dict[str, np.ndarray], Dict[str, Any]]):
    """Worker entry: rebuild the network from plain arrays and run one step"""
    example, model_dump, arrays, stft_fields = job
    cfg = ModelConfig(**model_dump)
    net = build_network(cfg, params_from_arrays(arrays, cfg))
    return training_step(example, net, StftConfig(**stft_fields))


def _validation_job(job: Tuple[TrainingExample, Dict[str, Any], Dict[str, np.ndarray], Dict[str, Any]]) -> float:
    example, model_dump, arrays, stft_fields = job
    cfg = ModelConfig(**model_dump)
    net = build_network(cfg, params_from_arrays(arrays, cfg))
    return -evaluate_loss(example, net, StftConfig(**stft_fields))


class Trainer:
    """Epoch loop with validation, plateau decay and best-checkpoint retention"""

    def __init__(self, net: SeparationNet, stft_cfg: StftConfig, cfg: Optional[TrainConfig] = None):
        self.net = net
        self.stft_cfg = stft_cfg
        self.cfg = cfg or TrainConfig()
        self.optimizer = Adam()
        self.scheduler = PlateauScheduler(
            self.cfg.learning_rate, self.cfg.plateau_patience, self.cfg.lr_decay_factor
        )
        self.epoch = 0
        self.best_val: Optional[float] = None
        self.history: List[Dict[str, float]] = []

    # Parameter arrays shipped to workers
    def _jobs(self, examples: Sequence[TrainingExample]) -> List[tuple]:
        arrays = {name: t.data for name, t in self.net.params.items()}
        model_dump = self.net.cfg.model_dump()
        stft_fields = network_metadata(self.net.cfg, self.stft_cfg)['stft']
        return [(ex, model_dump, arrays, stft_fields) for ex in examples]

    def batch_gradients(self, batch: Sequence[TrainingExample]) -> Tuple[float, Dict[str, np.ndarray]]:
        """
        Mean loss and mean gradients of a batch

        Gradients are summed in example order, so the result does not depend on
        the worker count.
        """
        if self.cfg.jobs == 1:
            results = [training_step(ex, self.net, self.stft_cfg) for ex in batch]
        else:
            results = parallel_map(_gradient_job, self._jobs(batch), jobs=self.cfg.jobs)

        losses = [loss for loss, _, _ in results]
        total: Dict[str, np.ndarray] = {}
        for _, grads, _ in results:
            for name, grad in grads.items():
                total[name] = total[name] + grad if name in total else grad.astype(np.float64)
        mean = {name: grad / len(results) for name, grad in total.items()}
        return float(np.mean(losses)), mean

    def step(self, batch: Sequence[TrainingExample]) -> float:
        """One clipped optimizer update; returns the batch loss"""
        loss, grads = self.batch_gradients(batch)
        grads, norm = clip_by_global_norm(grads, self.cfg.grad_clip)
        if norm > self.cfg.grad_clip:
            logger.debug("Clipped gradient norm %.3f to %.1f", norm, self.cfg.grad_clip)
        cast = {name: grad.astype(self.net.params[name].data.dtype) for name, grad in grads.items()}
        self.optimizer.step(self.net.params, cast, self.scheduler.lr)
        return loss

    def validate(self, examples: Sequence[TrainingExample]) -> float:
        """Mean PIT SI-SNR (dB) over examples"""
        if self.cfg.jobs == 1:
            scores = [-evaluate_loss(ex, self.net, self.stft_cfg) for ex in examples]
        else:
            scores = parallel_map(_validation_job, self._jobs(examples), jobs=self.cfg.jobs)
        return float(np.mean(scores))

    def checkpoint_metadata(self) -> Dict[str, Any]:
        metadata = network_metadata(self.net.cfg, self.stft_cfg)
        metadata.update({
            'train': self.cfg.model_dump(),
            'epoch': self.epoch,
            'optimizer_step': self.optimizer.step_count,
            'scheduler': self.scheduler.state_dict(),
            'best_val_sisnr': self.best_val,
        })
        return metadata

    def save(self, path: Union[str, Path], with_optimizer: bool = True) -> Path:
        tensors: Dict[str, Any] = dict(self.net.params)
        if with_optimizer:
            tensors.update(self.optimizer.state_tensors())
        return save_checkpoint(path, tensors, self.checkpoint_metadata())

    def resume(self, path: Union[str, Path]) -> None:
        """Restore parameters, optimizer moments and scheduler state"""
        arrays, metadata = load_checkpoint(path)
        if metadata.get('model') != self.net.cfg.model_dump():
            raise ConfigError(f"{path}: checkpoint model config differs from the configured model")
        for name, tensor in self.net.params.items():
            tensor.data = arrays[name].astype(tensor.data.dtype)
        self.optimizer.load_state(
            {k: v.astype(self.net.params[k.split('.', 2)[2]].data.dtype)
             for k, v in arrays.items() if k.startswith('optim.')},
            int(metadata.get('optimizer_step', 0)),
        )
        if 'scheduler' in metadata:
            self.scheduler.load_state_dict(metadata['scheduler'])
        self.epoch = int(metadata.get('epoch', 0))
        self.best_val = metadata.get('best_val_sisnr')
        logger.info("Resumed from %s at epoch %d (lr %.2e)", path, self.epoch, self.scheduler.lr)

    def _append_log(self, log_csv: Path, row: Dict[str, float]) -> None:
        frame = pd.DataFrame([row], columns=LOG_COLUMNS)
        frame.to_csv(log_csv, mode='a', header=not log_csv.exists(), index=False)

    def fit(
        self,
        train_set: Sequence[TrainingExample],
        val_set: Sequence[TrainingExample],
        out_checkpoint: Union[str, Path],
        log_csv: Union[str, Path],
        resume: Optional[Union[str, Path]] = None,
    ) -> pd.DataFrame:
        """
        Train until max_epochs

        Args:
            train_set: Training examples
            val_set: Validation examples
            out_checkpoint: Best-validation checkpoint path; the latest state
                is kept next to it with a `.last` suffix
            log_csv: Append-only CSV log (epoch,train_loss,val_sisnr,lr)
            resume: Checkpoint to continue from

        Returns:
            The rows logged by this call
        """
        if not train_set or not val_set:
            raise ValueError("fit needs non-empty training and validation sets")

        out_checkpoint = Path(out_checkpoint)
        last_checkpoint = out_checkpoint.with_name(out_checkpoint.name + '.last')
        log_csv = Path(log_csv)
        log_csv.parent.mkdir(parents=True, exist_ok=True)
        if resume is not None:
            self.resume(resume)

        with precision(self.cfg.precision):
            # Parameters follow the run's precision
            for tensor in self.net.params.values():
                tensor.data = tensor.data.astype(np.float64 if self.cfg.precision == 'float64' else np.float32)

            while self.epoch < self.cfg.max_epochs:
                self.epoch += 1
                order = np.random.default_rng([self.cfg.seed, self.epoch]).permutation(len(train_set))
                losses = []
                for start in range(0, len(order), self.cfg.batch_size):
                    batch = [train_set[i] for i in order[start:start + self.cfg.batch_size]]
                    losses.append(self.step(batch))

                val_sisnr = self.validate(val_set)
                lr = self.scheduler.lr
                row = {'epoch': self.epoch, 'train_loss': float(np.mean(losses)),
                       'val_sisnr': val_sisnr, 'lr': lr}
                self.history.append(row)
                self._append_log(log_csv, row)
                logger.info("epoch %d  loss %.4f  val SI-SNR %.3f dB  lr %.2e",
                            self.epoch, row['train_loss'], val_sisnr, lr)

                if self.scheduler.step(val_sisnr):
                    logger.info("Validation plateau: lr decayed to %.2e", self.scheduler.lr)
                if self.best_val is None or val_sisnr > self.best_val:
                    self.best_val = val_sisnr
                    self.save(out_checkpoint, with_optimizer=False)
                self.save(last_checkpoint)

        return pd.DataFrame(self.history, columns=LOG_COLUMNS)


def read_log(log_csv: Union[str, Path]) -> pd.DataFrame:
    """Training log as a frame"""
    return pd.read_csv(log_csv)


def mixture_sisnr(examples: Sequence[TrainingExample]) -> float:
    """Mean PIT SI-SNR of the unprocessed channel 0, the baseline for improvement"""
    scores = []
    for ex in examples:
        ch0 = np.repeat(ex.mixture.samples[:1], ex.num_sources, axis=0)
        loss, _ = pit_loss(ch0, ex.references)
        scores.append(-loss)
    return float(np.mean(scores))

