"""
Scale-invariant SNR and permutation-invariant losses
"""
import itertools
import math
from typing import Dict, Tuple

import numpy as np

from config.settings import SISNR_EPS
from src.graph.tensor import OpGraph, Tensor, constant
from src.utils.errors import ShapeError

Permutation = Tuple[int, ...]

_DB = 10.0 / math.log(10.0)
# SI-SNR is bounded to [10 log10(eps), -10 log10(eps)] dB
SISNR_FLOOR_DB = 10.0 * math.log10(SISNR_EPS)
SISNR_CAP_DB = -SISNR_FLOOR_DB


def _centered_reference(reference: np.ndarray) -> Tuple[np.ndarray, float]:
    ref = reference - reference.mean()
    energy = float(np.dot(ref, ref))
    if energy <= 0.0:
        raise ValueError("degenerate reference: zero energy after mean removal")
    return ref, energy


def si_snr(estimate: np.ndarray, reference: np.ndarray, eps: float = SISNR_EPS) -> float:
    """
    Scale-invariant signal-to-noise ratio in dB

    Both signals are mean-subtracted; the estimate is projected onto the
    reference and the residual energy is floored at eps times the projected
    energy, so values lie in [10 log10(eps), -10 log10(eps)].

    Args:
        estimate: Estimated signal (L,)
        reference: Reference signal (L,)
        eps: Relative floor

    Returns:
        SI-SNR in dB
    """
    estimate = np.asarray(estimate, dtype=np.float64)
    reference = np.asarray(reference, dtype=np.float64)
    if estimate.shape != reference.shape or estimate.ndim != 1:
        raise ShapeError(f"si_snr: shapes {estimate.shape} vs {reference.shape}")

    ref, ref_energy = _centered_reference(reference)
    est = estimate - estimate.mean()
    target = (np.dot(est, ref) / ref_energy) * ref
    residual = est - target

    target_energy = float(np.dot(target, target))
    residual_energy = float(np.dot(residual, residual))
    if target_energy <= 0.0:
        return SISNR_FLOOR_DB
    ratio = target_energy / max(residual_energy, eps * target_energy)
    return 10.0 * math.log10(max(ratio, eps))


def pit_scores(estimates: np.ndarray, references: np.ndarray) -> Dict[Permutation, float]:
    """
    Mean SI-SNR of every output-to-reference assignment

    perm[k] is the reference index matched to estimate k.

    Args:
        estimates: (S, L)
        references: (S, L)

    Returns:
        Map of permutation to mean SI-SNR
    """
    if estimates.shape != references.shape:
        raise ShapeError(f"pit: shapes {estimates.shape} vs {references.shape}")
    num = estimates.shape[0]
    pair = np.array([[si_snr(estimates[i], references[j]) for j in range(num)] for i in range(num)])
    return {
        perm: float(np.mean([pair[k, perm[k]] for k in range(num)]))
        for perm in itertools.permutations(range(num))
    }


def best_permutation(estimates: np.ndarray, references: np.ndarray) -> Tuple[Permutation, float]:
    """Assignment with the highest mean SI-SNR; ties keep the first in lexicographic order"""
    scores = pit_scores(estimates, references)
    perm = max(scores, key=lambda p: (scores[p], tuple(-i for i in p)))
    return perm, scores[perm]


def pit_loss(estimates: np.ndarray, references: np.ndarray) -> Tuple[float, Permutation]:
    """
    Permutation-invariant negative SI-SNR

    Args:
        estimates: (S, L) with S = 2
        references: (S, L)

    Returns:
        Tuple of (negative best mean SI-SNR, winning permutation)
    """
    if estimates.shape[0] != 2:
        raise ShapeError(f"pit_loss expects 2 sources, got {estimates.shape[0]}")
    perm, score = best_permutation(estimates, references)
    return -score, perm


def _center(x: np.ndarray) -> np.ndarray:
    return x - x.mean()


def si_snr_graph(g: OpGraph, estimate: Tensor, reference: np.ndarray, eps: float = SISNR_EPS) -> Tensor:
    """
    SI-SNR of a tracked estimate against a fixed reference, as a graph scalar

    Uses ||target||^2 = <est, ref>^2 / ||ref||^2 and
    ||residual||^2 = ||est||^2 - ||target||^2 on the centered estimate. When the
    floor or cap of si_snr is active the result is a constant.

    Args:
        g: Graph to record into
        estimate: Tracked signal (L,)
        reference: Reference signal (L,)
        eps: Relative floor

    Returns:
        Scalar tensor in dB
    """
    ref, ref_energy = _centered_reference(np.asarray(reference, dtype=np.float64))
    centered = g.linear_map(estimate, _center, _center, 'center')

    projection = g.sum(g.mul(centered, constant(ref)))
    energy = g.sum(g.mul(centered, centered))
    target_energy = g.scale(g.mul(projection, projection), 1.0 / ref_energy)
    residual_energy = g.sub(energy, target_energy)

    t, r = float(target_energy.data), float(residual_energy.data)
    if t <= 0.0 or t < eps * r:
        return constant(SISNR_FLOOR_DB)
    if r <= eps * t:
        return constant(SISNR_CAP_DB)
    return g.scale(g.log(g.div(target_energy, residual_energy)), _DB)


def pit_loss_graph(g: OpGraph, estimates: Tensor, references: np.ndarray) -> Tuple[Tensor, Permutation]:
    """
    Permutation-invariant loss whose gradient flows through the winning assignment only

    Args:
        g: Graph to record into
        estimates: Tracked estimates (S, L)
        references: (S, L)

    Returns:
        Tuple of (scalar loss tensor, winning permutation)
    """
    _, perm = pit_loss(estimates.data.astype(np.float64), references)
    terms = [
        si_snr_graph(g, g.slice(estimates, (k,)), references[perm[k]])
        for k in range(len(perm))
    ]
    total = terms[0]
    for term in terms[1:]:
        total = g.add(total, term)
    return g.scale(total, -1.0 / len(terms)), perm


def scale_allowing_sdr(estimate: np.ndarray, reference: np.ndarray, eps: float = SISNR_EPS) -> float:
    """
    10 log10(||s||^2 / ||s - a * est||^2) at the optimal scalar a

    No mean removal; the error energy is floored at eps times the reference
    energy, like si_snr.

    Args:
        estimate: Estimated signal (L,)
        reference: Reference signal (L,)
        eps: Relative floor

    Returns:
        SDR in dB
    """
    estimate = np.asarray(estimate, dtype=np.float64)
    reference = np.asarray(reference, dtype=np.float64)
    if estimate.shape != reference.shape or estimate.ndim != 1:
        raise ShapeError(f"sdr: shapes {estimate.shape} vs {reference.shape}")
    ref_energy = float(np.dot(reference, reference))
    if ref_energy <= 0.0:
        raise ValueError("degenerate reference: zero energy")
    est_energy = float(np.dot(estimate, estimate))
    scale = float(np.dot(estimate, reference)) / est_energy if est_energy > 0 else 0.0
    error = reference - scale * estimate
    return 10.0 * math.log10(ref_energy / max(float(np.dot(error, error)), eps * ref_energy))
