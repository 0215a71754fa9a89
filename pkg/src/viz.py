"""Figures for the self-test studies."""

import logging
from pathlib import Path
from typing import Optional

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np
import pandas as pd
import plotly.express as px
import plotly.graph_objects as go

from src.config import FIGURES_DIR, FIGURE_DPI, FIGURE_FORMAT, FIGURE_SIZE

logger = logging.getLogger(__name__)


def save_figure(fig, filename: str, format: str = FIGURE_FORMAT, figures_dir: Path = FIGURES_DIR) -> Path:
    """Save a plotly or matplotlib figure; plotly falls back to HTML without kaleido."""
    figures_dir = Path(figures_dir)
    figures_dir.mkdir(parents=True, exist_ok=True)
    output_path = figures_dir / f"{filename}.{format}"
    try:
        if hasattr(fig, "write_image"):  # Plotly figure
            try:
                fig.write_image(str(output_path), width=FIGURE_SIZE[0] * 100, height=FIGURE_SIZE[1] * 100)
            except Exception as e:
                logger.warning(f"Could not save as {format}, saving as HTML instead: {e}")
                output_path = figures_dir / f"{filename}.html"
                fig.write_html(str(output_path))
        else:  # Matplotlib figure
            fig.savefig(output_path, dpi=FIGURE_DPI, bbox_inches="tight")
            plt.close(fig)
        logger.info(f"Saved figure: {output_path}")
    except Exception as e:
        logger.error(f"Error saving figure {filename}: {e}")
    return output_path


def plot_noise_growth(
    summary: pd.DataFrame,
    save: bool = True,
    filename: Optional[str] = None,
    figures_dir: Path = FIGURES_DIR,
):
    """Plot log2 of the observed noise relative to the decryption bound.

    Args:
        summary: Output of metrics.noise_summary
        save: Whether to save the figure
        filename: Optional filename (defaults to noise_growth)
        figures_dir: Output directory
    """
    frame = summary.copy()
    frame["log2_ratio"] = np.log2(frame["observed_mean"].clip(lower=1e-300) / frame["bound"])

    fig = px.line(
        frame,
        x="step",
        y="log2_ratio",
        color="scheme",
        facet_col="op",
        markers=True,
        labels={"step": "Operations applied", "log2_ratio": "log2(noise / bound)"},
    )
    fig.add_hline(y=0, line_dash="dot", line_color="red", annotation_text="decryption bound")
    fig.update_layout(title="Noise Growth per Scheme", hovermode="x unified", height=500)

    if save:
        save_figure(fig, filename or "noise_growth", figures_dir=figures_dir)
    return fig


def plot_failure_rates(
    rates: pd.DataFrame,
    expected: Optional[float] = None,
    save: bool = True,
    filename: Optional[str] = None,
    figures_dir: Path = FIGURES_DIR,
):
    """Bar chart of measured rates with confidence intervals.

    ``rates`` needs label, rate, ci_lower and ci_upper columns.
    """
    fig = go.Figure()
    fig.add_trace(
        go.Bar(
            x=rates["label"],
            y=rates["rate"],
            name="Rate",
            error_y=dict(
                type="data",
                array=rates["ci_upper"] - rates["rate"],
                arrayminus=rates["rate"] - rates["ci_lower"],
            ),
            marker_color="steelblue",
        )
    )
    if expected is not None:
        fig.add_hline(
            y=expected,
            line_dash="dot",
            line_color="red",
            annotation_text=f"Expected: {expected:.4f}",
        )
    fig.update_layout(
        title="Decryption Failure Rates",
        xaxis_title="Measurement",
        yaxis_title="Rate",
        height=500,
    )

    if save:
        save_figure(fig, filename or "failure_rates", figures_dir=figures_dir)
    return fig


def plot_ckks_errors(
    errors: pd.DataFrame,
    save: bool = True,
    filename: Optional[str] = None,
    figures_dir: Path = FIGURES_DIR,
):
    """Histogram of log2 pipeline errors, one series per varied setting."""
    fig, ax = plt.subplots(figsize=FIGURE_SIZE)
    for (factor, value), group in errors.groupby(["factor", "value"]):
        logs = np.log2(group["error"].clip(lower=1e-300))
        ax.hist(logs, bins=20, alpha=0.5, label=f"{factor}={value:g}")
    ax.set_xlabel("log2 max-norm error")
    ax.set_ylabel("Trials")
    ax.set_title("Approximate Pipeline Error")
    ax.legend()

    if save:
        save_figure(fig, filename or "ckks_errors", figures_dir=figures_dir)
    return fig
