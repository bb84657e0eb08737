"""
HTML figures for channel sweeps and training logs
"""
from pathlib import Path
from typing import Union

import pandas as pd
import plotly.graph_objects as go

from src.utils.errors import DataError

COLORS = ['#1f77b4', '#ff7f0e', '#2ca02c', '#d62728', '#9467bd', '#8c564b', '#e377c2']


def sweep_figure(aggregate: pd.DataFrame) -> go.Figure:
    """
    SI-SNRi against channel count, one line per (system, mode, policy)

    Args:
        aggregate: Per-cell means as produced by the evaluation harness

    Returns:
        Plotly figure
    """
    fig = go.Figure()
    cells = aggregate.groupby(['system', 'mode', 'policy'], sort=False)
    for i, ((system, mode, policy), frame) in enumerate(cells):
        frame = frame.sort_values('C')
        fig.add_trace(go.Scatter(
            x=frame['C'],
            y=frame['sisnri_db'],
            mode='lines+markers',
            name=f"{system} ({mode}, {policy})",
            line=dict(color=COLORS[i % len(COLORS)], width=2)
        ))

    fig.update_layout(
        title="SI-SNR Improvement vs Number of Channels",
        xaxis_title="Channels (C)",
        yaxis_title="SI-SNRi (dB)",
        hovermode='x unified',
        template='plotly_white',
        height=400
    )
    return fig


def training_figure(log: pd.DataFrame) -> go.Figure:
    """Training loss and validation SI-SNR per epoch"""
    fig = go.Figure()
    fig.add_trace(go.Scatter(
        x=log['epoch'],
        y=-log['train_loss'],
        mode='lines',
        name='Train SI-SNR (dB)',
        line=dict(color='#1f77b4', width=2)
    ))
    fig.add_trace(go.Scatter(
        x=log['epoch'],
        y=log['val_sisnr'],
        mode='lines',
        name='Validation SI-SNR (dB)',
        line=dict(color='#2ca02c', width=2)
    ))

    # Mark LR decays
    decays = log['epoch'][log['lr'].diff() < 0]
    for epoch in decays:
        fig.add_vline(x=float(epoch), line_dash="dash", line_color="gray")

    fig.update_layout(
        title="Training Progress",
        xaxis_title="Epoch",
        yaxis_title="SI-SNR (dB)",
        hovermode='x unified',
        template='plotly_white',
        height=400
    )
    return fig


def write_figure(fig: go.Figure, path: Union[str, Path]) -> Path:
    """Write a standalone HTML file"""
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        fig.write_html(str(path), include_plotlyjs='cdn')
    except OSError as e:
        raise DataError(f"{path}: cannot write figure ({e})") from e
    return path
