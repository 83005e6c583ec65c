"""Figure rendering for the CLI report paths.

Each renderer takes the already-computed structured result and writes one PNG
next to the delimited output.  Matplotlib is imported lazily with the Agg
backend so headless runs and library users that never plot pay nothing.
"""

import numpy as np


def _plt():
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    return plt


_KIND_STYLE = {
    "inherited": ("k", "|", "inherited"),
    "gap_root": ("tab:blue", "o", "gap roots"),
    "negative_root": ("tab:red", "v", "negative root"),
    "above_top_root": ("tab:green", "^", "above-top root"),
}


def plot_spectrum(report, path) -> None:
    plt = _plt()
    fig, ax = plt.subplots(figsize=(9, 3))
    for kind, (color, marker, label) in _KIND_STYLE.items():
        vals = [e.value for e in report.entries if e.kind == kind]
        if vals:
            ax.plot(vals, np.zeros(len(vals)), marker, color=color, ms=9, label=label)
    ax.axvline(0.0, color="0.7", lw=0.8)
    ax.set_yticks([])
    ax.set_xlabel(r"$\lambda$")
    ax.legend(loc="upper left", fontsize=8)
    ax.grid(True, axis="x", linestyle="--", alpha=0.5)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def plot_phase_diagram(alphas, sigmas, grid, path) -> None:
    plt = _plt()
    fig, ax = plt.subplots(figsize=(6, 5))
    mesh = ax.pcolormesh(alphas, sigmas, np.asarray(grid).T, cmap="coolwarm",
                         vmin=0, vmax=1, shading="nearest")
    fig.colorbar(mesh, ax=ax, label="bound states")
    ax.set_xlabel(r"$\alpha$")
    ax.set_ylabel(r"$\sigma$")
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def plot_heat_kernel(rows, path) -> None:
    """rows: (t, x, y, value, tail_bound) tuples."""
    plt = _plt()
    fig, ax = plt.subplots(figsize=(6, 4.5))
    pairs = sorted({(r[1], r[2]) for r in rows})
    for x, y in pairs:
        ts = [r[0] for r in rows if (r[1], r[2]) == (x, y)]
        vals = [r[3] for r in rows if (r[1], r[2]) == (x, y)]
        ax.loglog(ts, vals, marker=".", label=f"x={x}, y={y}")
    ax.set_xlabel("t")
    ax.set_ylabel("p(t, x, y)")
    ax.grid(True, which="both", linestyle="--", alpha=0.4)
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def plot_sparse_ess(ess, path) -> None:
    plt = _plt()
    fig, ax = plt.subplots(figsize=(9, 3))
    for lam in ess.inherited:
        ax.axvline(lam, color="0.6", lw=0.8)
    intervals = list(ess.intervals) + ([ess.negative] if ess.negative else [])
    for iv in intervals:
        ax.axvspan(iv.lo, iv.hi, color="tab:orange", alpha=0.6)
    ax.set_yticks([])
    ax.set_xlabel(r"$\lambda$")
    ax.set_title("essential spectrum: inherited lines and amplitude-window bands", fontsize=9)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def plot_localize(moment, distances, loc_report, path) -> None:
    plt = _plt()
    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(10, 4))
    means = [m for _, m, _ in moment.per_location]
    errs = [e for _, _, e in moment.per_location]
    ax1.errorbar(distances, means, yerr=errs, fmt="o")
    ax1.set_xscale("log")
    ax1.set_yscale("log")
    slope, intercept = np.polyfit(np.log(distances), np.log(means), 1)
    dd = np.array([min(distances), max(distances)], dtype=float)
    ax1.plot(dd, np.exp(intercept) * dd**slope, "k--",
             label=f"slope {slope:.3f}")
    ax1.set_xlabel("d(a_j, y)")
    ax1.set_ylabel(f"mean |R_V|^{moment.s:g}")
    ax1.legend(fontsize=8)
    ax1.grid(True, which="both", linestyle="--", alpha=0.4)
    if len(loc_report.decay_slopes):
        ax2.hist(loc_report.decay_slopes, bins=30, color="tab:purple", alpha=0.8)
        ax2.axvline(loc_report.median_slope, color="k", linestyle="--",
                    label=f"median {loc_report.median_slope:.2f}")
        ax2.legend(fontsize=8)
    ax2.set_xlabel("eigenvector decay slope in ln(1+d)")
    ax2.set_ylabel("count")
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
