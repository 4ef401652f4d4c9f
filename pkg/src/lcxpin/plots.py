"""Figure rendering for the CLI report paths.

All figures go straight to files (Agg backend), one PNG next to each
CSV the commands emit.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

_LABELS = {
    "lcx_optimized": "cable array, optimized",
    "lcx_initial": "cable array, nearest assignment",
    "fixed_antenna": "fixed central antenna",
}
_MARKERS = {"lcx_optimized": "o", "lcx_initial": "s", "fixed_antenna": "^"}


def plot_trial(result, path) -> None:
    """Grouped per-user rate bars, one group per benchmark."""
    names = list(result.reports)
    n_users = len(result.reports[names[0]].rates)
    width = 0.8 / max(len(names), 1)
    fig, ax = plt.subplots(figsize=(7, 4))
    xs = np.arange(n_users)
    for j, name in enumerate(names):
        rep = result.reports[name]
        ax.bar(xs + (j - (len(names) - 1) / 2) * width, rep.rates,
               width=width, label=_LABELS.get(name, name))
    if result.reports[names[0]].r_min > 0:
        ax.axhline(result.reports[names[0]].r_min, color="k", ls=":", lw=1,
                   label="rate target")
    ax.set_xlabel("user")
    ax.set_ylabel("rate (bits/s/Hz)")
    ax.set_xticks(xs)
    ax.legend(fontsize=8)
    ax.grid(axis="y", alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def plot_sweep(result, path) -> None:
    """Mean sum rate and outage fraction versus the swept value."""
    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(10, 4))
    names = sorted({row.benchmark for row in result.rows})
    for name in names:
        rows = [r for r in result.rows if r.benchmark == name]
        rows.sort(key=lambda r: r.value)
        vals = [r.value for r in rows]
        means = [r.mean_sum_rate for r in rows]
        cis = [r.ci_halfwidth for r in rows]
        outs = [r.outage for r in rows]
        marker = _MARKERS.get(name, "x")
        if all(np.isfinite(cis)):
            ax1.errorbar(vals, means, yerr=cis, marker=marker, capsize=3,
                         label=_LABELS.get(name, name))
        else:
            ax1.plot(vals, means, marker=marker, label=_LABELS.get(name, name))
        ax2.plot(vals, outs, marker=marker, label=_LABELS.get(name, name))
    ax1.set_xlabel(result.var)
    ax1.set_ylabel("mean sum rate (bits/s/Hz)")
    ax1.grid(alpha=0.3)
    ax1.legend(fontsize=8)
    ax2.set_xlabel(result.var)
    ax2.set_ylabel("outage fraction")
    ax2.grid(alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def plot_impact_curve(curve, path) -> None:
    """Rate along the cable for the three channel variants."""
    fig, ax = plt.subplots(figsize=(7, 4))
    ax.plot(curve.distance, curve.rate_full, label="full model")
    ax.plot(curve.distance, curve.rate_los_only, "--", label="no scattering")
    ax.plot(curve.distance, curve.rate_no_attenuation, ":", label="no cable loss")
    ax.set_xlabel("position along cable (m)")
    ax.set_ylabel("rate (bits/s/Hz)")
    ax.grid(alpha=0.3)
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
