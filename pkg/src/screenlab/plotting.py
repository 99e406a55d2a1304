"""Figure rendering for the CLI report path.

Each function takes the row dictionaries produced by the experiment
harnesses and writes a PNG next to the CSV.  Rendering is strictly a
presentation layer: nothing here feeds back into any computation.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402


def _save(fig, path):
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def render_figure1(rows, rho_list, path):
    """One panel per correlation: revenue curves against the signal count."""
    fig, axes = plt.subplots(1, len(rho_list), figsize=(4.2 * len(rho_list), 3.6),
                             sharey=True, squeeze=False)
    series = [("r_sb_upper", "second-best upper bound", "C3", "--"),
              ("r_mix", "mixed bundling", "C2", "-"),
              ("r_bd", "pure bundling", "C0", "-"),
              ("r_sep", "separate prices", "C1", "-")]
    for ax, rho in zip(axes[0], rho_list):
        sub = [r for r in rows if r["rho"] == rho]
        ns = [r["n"] for r in sub]
        ax.axhline(sub[0]["r_fb"], color="k", lw=0.8, label="first best")
        for key, label, color, style in series:
            ax.plot(ns, [r[key] for r in sub], style, color=color, label=label)
        ax.set_xscale("log")
        ax.set_xlabel("signal count n")
        ax.set_title(f"correlation = {rho:g}")
    axes[0][0].set_ylabel("expected revenue")
    axes[0][0].legend(fontsize=8)
    _save(fig, path)


def render_rates(rows, path):
    fig, ax = plt.subplots(figsize=(5.0, 3.6))
    ns = [r["n"] for r in rows]
    ax.plot(ns, [r["ratio_bd"] for r in rows], "o-", label="grand bundle")
    ax.plot(ns, [r["ratio_sep"] for r in rows], "s-", label="separate prices")
    ax.axhline(1.0, color="k", lw=0.8)
    ax.set_xscale("log")
    ax.set_xlabel("signal count n")
    ax.set_ylabel("scaled gap / limit coefficient")
    ax.legend(fontsize=8)
    _save(fig, path)


def render_margins(rows, columns, path):
    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(8.4, 3.6))
    ns = [r["n"] for r in rows]
    ax1.loglog(ns, [r["ext_over_int"] for r in rows], "o-")
    ax1.set_xlabel("signal count n")
    ax1.set_ylabel("rejection / shading loss at the optimum")
    for col in columns:
        if col.startswith("scaled_ext_delta_"):
            ax2.loglog(ns, [r[col] for r in rows], "o-",
                       label=f"delta = {col.rsplit('_', 1)[1]}")
    ax2.set_xlabel("signal count n")
    ax2.set_ylabel("rejection loss / sqrt(ln n / n)")
    ax2.legend(fontsize=8)
    _save(fig, path)


def render_mle_price(rows, path):
    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(8.4, 3.6))
    ns = [r["n"] for r in rows]
    scaled = [r["scaled_gap"] for r in rows]
    ax1.errorbar(ns, scaled,
                 yerr=[3 * r["se_revenue"] * (r["scaled_gap"] / max(r["mean_gap"], 1e-300))
                       for r in rows], fmt="o-")
    ax1.set_xscale("log")
    ax1.set_xlabel("signal count n")
    ax1.set_ylabel("scaled revenue gap")
    ax2.errorbar(ns, [r["sale_freq"] for r in rows],
                 yerr=[3 * r["se_sale_freq"] for r in rows], fmt="o-")
    ax2.set_xscale("log")
    ax2.set_xlabel("signal count n")
    ax2.set_ylabel("sale frequency")
    _save(fig, path)


def render_tails(rows, path):
    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(8.4, 3.6))
    ns = [r["n"] for r in rows]
    ax1.plot(ns, [r["scaled_ratio"] for r in rows], "o-")
    ax1.axhline(1.0, color="k", lw=0.8)
    ax1.set_xscale("log")
    ax1.set_xlabel("signal count n")
    ax1.set_ylabel("gap / tail rate")
    ax2.plot(ns, [r["ext_over_int"] for r in rows], "o-", label="margin ratio")
    ax2.plot(ns, [r["elasticity_ratio"] for r in rows], "s--",
             label="hazard ratio at gamma*")
    ax2.set_xscale("log")
    ax2.set_yscale("log")
    ax2.set_xlabel("signal count n")
    ax2.legend(fontsize=8)
    _save(fig, path)


def render_onedim_demo(rows, path):
    fig, ax = plt.subplots(figsize=(5.0, 3.6))
    taus = [r["tau"] for r in rows]
    ax.plot(taus, [r["indirect_utility"] for r in rows], "-", label="buyer utility")
    ax.set_xlabel("segment type tau")
    ax.set_ylabel("indirect utility")
    ax.legend(fontsize=8)
    _save(fig, path)


def render_single_bundle(rows, path):
    fig, ax = plt.subplots(figsize=(5.0, 3.6))
    ns = [r["n"] for r in rows]
    ax.plot(ns, [r["profit"] for r in rows], "o-", label="best single bundle")
    ax.plot(ns, [r["first_best"] for r in rows], "k-", lw=0.8, label="first best")
    ax.set_xscale("log")
    ax.set_xlabel("signal count n")
    ax.set_ylabel("expected profit")
    ax.legend(fontsize=8)
    _save(fig, path)
