"""Figures written to files with the non-interactive Agg backend."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

_META = {"Software": None}


def _save(fig, path, fingerprint=None):
    path = Path(path)
    fig.tight_layout()
    meta = dict(_META, Description=f"fingerprint: {fingerprint}") if fingerprint else _META
    fig.savefig(path, dpi=110, metadata=meta)
    plt.close(fig)
    return path


def plot_trajectory(traj, path, title=None, fingerprint=None):
    """Pack temperature, compressor power and SoC against time."""
    t = traj["t"] / 3600.0
    fig, ax = plt.subplots(3, 1, figsize=(8, 7), sharex=True)
    ax[0].plot(t, traj["t_bat"], lw=1)
    ax[0].axhline(25.0, color="grey", ls="--", lw=0.8)
    ax[0].set_ylabel("T_bat [degC]")
    ax[1].plot(t, traj["p_comp"], lw=0.5)
    ax[1].set_ylabel("P_comp [W]")
    ax[2].plot(t, traj["soc"], lw=1)
    ax[2].set_ylabel("SoC [-]")
    ax[2].set_xlabel("time [h]")
    ax[0].set_title(title or f"{traj.cycle} / {traj.controller}")
    return _save(fig, path, fingerprint)


def plot_comparison(trajs, path, title=None, fingerprint=None):
    """Temperature and accrued capacity loss of several runs on the same cycle."""
    fig, ax = plt.subplots(2, 1, figsize=(8, 6), sharex=True)
    for label, tr in trajs.items():
        t = tr["t"] / 3600.0
        ax[0].plot(t, tr["t_bat"], lw=1, label=label)
        ax[1].plot(t, 100.0 * np.cumsum(tr["dq_loss"]), lw=1, label=label)
    ax[0].set_ylabel("T_bat [degC]")
    ax[1].set_ylabel("accrued loss [%]")
    ax[1].set_xlabel("time [h]")
    ax[0].legend(fontsize=8)
    if title:
        ax[0].set_title(title)
    return _save(fig, path, fingerprint)


def plot_rule_scatter(traj, stages, path, fingerprint=None):
    """Compressor power against traction power, split by controller stage."""
    stages = np.asarray(stages)
    fig, ax = plt.subplots(1, 3, figsize=(11, 3.6), sharey=True)
    for a, name in zip(ax, ("fast", "slow", "maintain")):
        m = stages == name
        a.scatter(traj["p_d"][m] / 1000.0, traj["p_comp"][m], s=2)
        a.set_title(f"{name} ({int(m.sum())} s)")
        a.set_xlabel("P_d [kW]")
    ax[0].set_ylabel("P_comp [W]")
    return _save(fig, path, fingerprint)


def plot_economy(report, path, fingerprint=None):
    """Degradation reduction and cost saving per case, cycle and trip length."""
    comps = list(report.comparisons)
    if not comps:
        fig, ax = plt.subplots(figsize=(6, 2))
        ax.text(0.5, 0.5, "no comparisons", ha="center")
        ax.axis("off")
        return _save(fig, path, fingerprint)
    labels = [f"{c.case}\n{c.cycle}\n{c.trip}\n{c.strategy}" for c in comps]
    x = np.arange(len(comps))
    fig, ax = plt.subplots(2, 1, figsize=(max(6, 0.45 * len(comps)), 6), sharex=True)
    ax[0].bar(x, [c.degradation_reduction for c in comps])
    ax[0].set_ylabel("degradation reduction [%]")
    ax[1].bar(x, [c.cost_reduction_per_100km for c in comps], color="tab:orange")
    ax[1].set_ylabel("cost saving [USD/100 km]")
    ax[1].set_xticks(x, labels, fontsize=6)
    return _save(fig, path, fingerprint)
