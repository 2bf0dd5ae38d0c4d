"""Figure rendering for comparison reports."""

from __future__ import annotations

from typing import Sequence

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt

from .metrics import ComparisonRow

_POLICY_LABELS = {
    "dynamic": "Dynamic durable",
    "ephemeral": "Ephemeral only",
    "static": "Static durable",
}


def render_makespan_figure(rows: Sequence[ComparisonRow], path) -> None:
    """Grouped bar chart of mean makespan per oversubscription level, with 95% CIs."""
    levels = sorted({r.level for r in rows})
    policies = sorted({r.policy for r in rows})
    by_key = {(r.policy, r.level): r for r in rows}

    fig, ax = plt.subplots(figsize=(7, 4.2))
    width = 0.8 / max(1, len(policies))
    for i, policy in enumerate(policies):
        xs, ys, errs = [], [], []
        for j, level in enumerate(levels):
            row = by_key.get((policy, level))
            if row is None:
                continue
            xs.append(j + (i - (len(policies) - 1) / 2) * width)
            ys.append(row.makespan_mean_s)
            errs.append(0.0 if row.ci95_half_width_s != row.ci95_half_width_s else row.ci95_half_width_s)
        ax.bar(xs, ys, width=width * 0.92, yerr=errs, capsize=3,
               label=_POLICY_LABELS.get(policy, policy))
    ax.set_xticks(range(len(levels)))
    ax.set_xticklabels([str(lv) for lv in levels])
    ax.set_xlabel("Oversubscription level (tasks per window)")
    ax.set_ylabel("Makespan (s)")
    ax.legend(frameon=False)
    ax.spines["top"].set_visible(False)
    ax.spines["right"].set_visible(False)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
