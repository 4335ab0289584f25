"""Figure rendering for the CLI report paths.

Every plotting command also emits its underlying numbers as CSV/JSON; the
figures here are the human-readable companions (autocorrelation panels for
the stylized-facts reports, P&L histograms for hedging evaluations).
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

_DPI = 120


def acf_figure(stats_by_label: dict, path) -> None:
    """Two panels: return ACF and squared-return ACF by lag, one line per label."""
    fig, axes = plt.subplots(1, 2, figsize=(9, 3.6), sharex=True)
    for label, stats in stats_by_label.items():
        lags = np.arange(1, stats.max_lag + 1)
        axes[0].plot(lags, stats.acf_returns, marker="o", ms=3, label=label)
        axes[1].plot(lags, stats.acf_sq_returns, marker="o", ms=3, label=label)
    for ax, title in zip(axes, ("autocorrelation of returns",
                                "autocorrelation of squared returns")):
        ax.axhline(0.0, color="grey", lw=0.8)
        ax.set_xlabel("lag (days)")
        ax.set_title(title, fontsize=10)
        ax.grid(alpha=0.3)
    axes[0].set_ylabel("autocorrelation")
    axes[0].legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=_DPI)
    plt.close(fig)


def pnl_histogram(pnls_by_label: dict, path, bins: int = 60) -> None:
    """Overlaid per-episode P&L histograms, one entry per strategy."""
    fig, ax = plt.subplots(figsize=(7, 4))
    allv = np.concatenate([np.asarray(v, dtype=float) for v in pnls_by_label.values()])
    lo, hi = np.quantile(allv, [0.001, 0.999])
    edges = np.linspace(lo, hi, bins + 1)
    for label, pnls in pnls_by_label.items():
        ax.hist(np.clip(pnls, lo, hi), bins=edges, alpha=0.55, label=label)
    ax.set_xlabel("episode P&L ($)")
    ax.set_ylabel("episodes")
    ax.legend(fontsize=8)
    ax.grid(alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=_DPI)
    plt.close(fig)


def divergence_histogram(samples_by_label: dict, path, bins: int = 40) -> None:
    """Histogram of per-scenario divergence values for each compared source."""
    fig, ax = plt.subplots(figsize=(7, 4))
    allv = np.concatenate([np.asarray(v, dtype=float) for v in samples_by_label.values()])
    edges = np.linspace(allv.min(), allv.max(), bins + 1)
    for label, vals in samples_by_label.items():
        ax.hist(vals, bins=edges, alpha=0.55, label=label)
    ax.set_xlabel("divergence from reference")
    ax.set_ylabel("scenarios")
    ax.legend(fontsize=8)
    ax.grid(alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=_DPI)
    plt.close(fig)
