"""Figure rendering for the CLI report paths.

Each function takes the same row dictionaries the CSV writers consume and
saves a matplotlib figure, so every delimited output can be rendered to a
file alongside it.  The Agg backend is forced: this module only ever writes
image files.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .constellation import LabeledConstellation, distance_spectrum, project_2d


def plot_analysis(c: LabeledConstellation, path: str) -> str:
    """2D projections of both polarizations plus the distance histogram with
    the Hamming-distance-one pairs highlighted."""
    fig, axes = plt.subplots(1, 3, figsize=(13, 4.2))
    for pol, ax in zip((1, 2), axes[:2]):
        coords, counts = project_2d(c, pol)
        ax.scatter(coords[:, 0], coords[:, 1], s=18 + 6 * counts, c="tab:blue")
        for (x, y), n in zip(coords, counts):
            ax.annotate(str(int(n)), (x, y), fontsize=7,
                        textcoords="offset points", xytext=(4, 4))
        ax.axhline(0, color="gray", lw=0.5)
        ax.axvline(0, color="gray", lw=0.5)
        ax.set_aspect("equal")
        ax.set_title(f"polarization {pol} (marker size = multiplicity)")
        ax.set_xlabel("in-phase")
        ax.set_ylabel("quadrature")
    spec = distance_spectrum(c)
    d2 = [e.d2 for e in spec.entries]
    other = [e.count - e.hd1_count for e in spec.entries]
    hd1 = [e.hd1_count for e in spec.entries]
    width = 0.8 * min(np.diff(sorted(set(d2))), default=0.1)
    axes[2].bar(d2, other, width=width, color="tab:blue", label="HD > 1")
    axes[2].bar(d2, hd1, width=width, bottom=other, color="tab:red", label="HD = 1")
    axes[2].set_xlabel("squared Euclidean distance")
    axes[2].set_ylabel("pair count")
    axes[2].set_title(f"{c.name()}: distance spectrum (E_s = {c.mean_energy:.3g})")
    axes[2].legend()
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path


def plot_air_sweep(rows: list[dict], name: str, path: str) -> str:
    fig, ax = plt.subplots(figsize=(7, 5))
    snr = [r["snr_db"] for r in rows]
    if rows and rows[0].get("mi") is not None:
        ax.plot(snr, [r["mi"] for r in rows], "o-", label="MI")
    if rows and rows[0].get("gmi") is not None:
        ax.plot(snr, [r["gmi"] for r in rows], "s-", label="GMI")
    ax.set_xlabel("SNR (dB)")
    ax.set_ylabel("rate (bit/4D-sym)")
    ax.set_title(name)
    ax.grid(alpha=0.3)
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path


def plot_prs_surface(rows, r_opt: float, theta_opt: float, path: str) -> str:
    rs = sorted({r for r, _, _ in rows})
    ths = sorted({t for _, t, _ in rows})
    grid = np.full((len(ths), len(rs)), np.nan)
    ridx = {v: i for i, v in enumerate(rs)}
    tidx = {v: i for i, v in enumerate(ths)}
    for r, t, g in rows:
        grid[tidx[t], ridx[r]] = g
    fig, ax = plt.subplots(figsize=(7, 5))
    pc = ax.pcolormesh(rs, ths, grid, shading="nearest", cmap="viridis")
    fig.colorbar(pc, ax=ax, label="GMI (bit/4D-sym)")
    ax.plot([r_opt], [theta_opt], "r*", markersize=14,
            label=f"optimum ({r_opt:.3f}, {theta_opt:.2f} deg)")
    ax.set_xlabel("ring ratio r")
    ax.set_ylabel("angle theta (deg)")
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path


def plot_prs_opt(rows: list[dict], path: str) -> str:
    fig, ax = plt.subplots(figsize=(7, 5))
    snr = [r["snr_db"] for r in rows]
    ax.plot(snr, [r["r_opt"] for r in rows], "o-", color="tab:blue",
            label="ring ratio r*")
    ax.plot(snr, [r["theta_opt"] / 45.0 for r in rows], "s-", color="tab:orange",
            label="normalized angle theta*/45")
    ax.set_xlabel("SNR (dB)")
    ax.set_ylabel("optimized parameter")
    ax.grid(alpha=0.3)
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path


def plot_link_power(rows: list[dict], name: str, path: str) -> str:
    fig, ax = plt.subplots(figsize=(7, 5))
    p = [r["p_dbm"] for r in rows]
    ax.plot(p, [r["snr_eff_db"] for r in rows], "o-", color="tab:blue")
    ax.set_xlabel("launch power (dBm)")
    ax.set_ylabel("effective SNR (dB)", color="tab:blue")
    if rows and rows[0].get("gmi") is not None:
        ax2 = ax.twinx()
        ax2.plot(p, [r["gmi"] for r in rows], "s--", color="tab:orange")
        ax2.set_ylabel("GMI (bit/4D-sym)", color="tab:orange")
    ax.set_title(name)
    ax.grid(alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path


def plot_link_distance(rows: list[dict], name: str, path: str) -> str:
    fig, ax = plt.subplots(figsize=(7, 5))
    d = [r["distance_km"] for r in rows]
    ax.plot(d, [r["gmi"] for r in rows], "o-", color="tab:blue")
    ax.set_xlabel("distance (km)")
    ax.set_ylabel("GMI (bit/4D-sym)")
    ax.set_title(f"{name}: rate vs distance at optimal launch power")
    ax.grid(alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path
