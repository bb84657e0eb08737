"""
Separation quality metrics
"""
from typing import Dict, List, Sequence

import numpy as np
import pandas as pd

from src.train.objectives import Permutation, best_permutation, scale_allowing_sdr, si_snr
from src.utils.validators import Validators

ROW_COLUMNS = ['utt_id', 'system', 'mode', 'policy', 'C', 'source', 'sisnri_db', 'sdr_db', 'assignment']
CELL_KEYS = ['system', 'mode', 'policy', 'C']


class SeparationMetrics:
    """Calculate separation metrics per utterance and per report"""

    @staticmethod
    def si_snr_improvement(estimate: np.ndarray, reference: np.ndarray, mixture_ch0: np.ndarray) -> float:
        """
        SI-SNR gain of an estimate over the unprocessed reference microphone

        Args:
            estimate: Separated signal (L,)
            reference: Clean source image (L,)
            mixture_ch0: Mixture at the reference microphone (L,)

        Returns:
            si_snr(estimate) - si_snr(mixture_ch0), in dB
        """
        Validators.require_same_length(np.asarray(estimate), np.asarray(mixture_ch0), "si_snr_improvement")
        return si_snr(estimate, reference) - si_snr(mixture_ch0, reference)

    @staticmethod
    def sdr(estimate: np.ndarray, reference: np.ndarray) -> float:
        """
        Scale-allowing SDR in dB

        Args:
            estimate: Separated signal (L,)
            reference: Clean source image (L,)

        Returns:
            SDR at the optimal scale of the estimate
        """
        return scale_allowing_sdr(estimate, reference)

    @staticmethod
    def assignment(estimates: np.ndarray, references: np.ndarray) -> Permutation:
        """Output-to-source mapping with the highest mean SI-SNR"""
        perm, _ = best_permutation(estimates, references)
        return perm

    @staticmethod
    def score_utterance(
        estimates: np.ndarray,
        references: np.ndarray,
        mixture_ch0: np.ndarray,
    ) -> List[Dict[str, float]]:
        """
        Per-source scores under the best assignment

        Args:
            estimates: Separated signals (S, L)
            references: Clean source images (S, L)
            mixture_ch0: Mixture at the reference microphone (L,)

        Returns:
            One dict per source (ordered by source index) with source,
            sisnri_db, sdr_db and assignment
        """
        estimates = np.asarray(estimates, dtype=np.float64)
        references = np.asarray(references, dtype=np.float64)
        perm = SeparationMetrics.assignment(estimates, references)
        label = '-'.join(str(p) for p in perm)

        rows = []
        for k, source in sorted(enumerate(perm), key=lambda item: item[1]):
            rows.append({
                'source': source,
                'sisnri_db': SeparationMetrics.si_snr_improvement(estimates[k], references[source], mixture_ch0),
                'sdr_db': SeparationMetrics.sdr(estimates[k], references[source]),
                'assignment': label,
            })
        return rows

    @staticmethod
    def aggregate(rows: pd.DataFrame) -> pd.DataFrame:
        """
        Mean scores per (system, mode, policy, C) cell

        Args:
            rows: Per-utterance, per-source rows

        Returns:
            DataFrame with one row per cell: the cell keys, mean sisnri_db,
            mean sdr_db and the number of rows averaged
        """
        if rows.empty:
            return pd.DataFrame(columns=CELL_KEYS + ['sisnri_db', 'sdr_db', 'rows'])
        grouped = rows.groupby(CELL_KEYS, sort=False)
        aggregate = grouped[['sisnri_db', 'sdr_db']].mean()
        aggregate['rows'] = grouped.size()
        return aggregate.reset_index()

    @staticmethod
    def dominance(rows: pd.DataFrame, upper: str, lower: str, cell: Sequence[str] = ('C',)) -> float:
        """
        Share of utterances where system `upper` scores at least system `lower`

        Utterance scores are the mean SI-SNRi over sources; utterances are
        matched on utt_id and the given cell keys.
        """
        keys = ['utt_id'] + list(cell)
        per_utt = rows.groupby(['system'] + keys, sort=False)['sisnri_db'].mean()
        paired = pd.concat([per_utt.loc[upper], per_utt.loc[lower]], axis=1, keys=['upper', 'lower']).dropna()
        if paired.empty:
            return float('nan')
        return float((paired['upper'] >= paired['lower']).mean())
