#!/usr/bin/env python3
"""Plot the CSV outputs of `mlkr` runs.

Each argument is a run directory; the figures drawn depend on which CSV
files it contains. PNGs are written next to the CSVs unless --out is given.
"""

import argparse
import pathlib

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np


def load(path):
    return np.genfromtxt(path, delimiter=",", names=True, dtype=None, encoding="utf-8")


def energy(run, ax):
    d = load(run / "energy.csv")
    t, e = d["t"], d["E_mean"]
    ax.loglog(t[1:], e[1:], lw=1)
    ax.set_xlabel("t (kicks)")
    ax.set_ylabel(r"$\langle E \rangle$")


def histograms(run, ax):
    for name in ("histogram_p1", "histogram_p2", "marginal_p1", "marginal_p2"):
        f = run / f"{name}.csv"
        if f.exists():
            d = load(f)
            mid = 0.5 * (d["p_lo"] + d["p_hi"])
            ax.semilogy(mid, np.where(d["density"] > 0, d["density"], np.nan), lw=1, label=name)
    ax.set_xlabel("p")
    ax.set_ylabel("density")
    ax.legend(fontsize="small")


def section(run, ax):
    d = load(run / "section.csv")
    for tid in np.unique(d["traj_id"]):
        m = d["traj_id"] == tid
        ax.plot(d["x1"][m], d["p1"][m], ",", ms=1)
    ax.set_xlabel(r"$x_1$")
    ax.set_ylabel(r"$p_1$")


def lyapunov(run, ax):
    d = np.atleast_1d(load(run / "lyapunov.csv"))
    ax.errorbar(d["Ks"], d["lambda_map"], yerr=d["stderr"], fmt="o", ms=3, label="tangent")
    ax.plot(d["Ks"], d["lambda_jprod"], "s", ms=3, mfc="none", label="Jacobian product")
    ax.plot(d["Ks"], d["lambda_analytic"], "-", lw=1, label=r"$\ln K_s$")
    ax.set_xscale("log")
    ax.set_xlabel(r"$K_s$")
    ax.set_ylabel(r"$\lambda_{\max}$")
    ax.legend(fontsize="small")


def phase_diagram(run, ax):
    d = load(run / "phase_diagram.csv")
    ks, kps = np.unique(d["K"]), np.unique(d["k_p"])
    beta = np.full((len(ks), len(kps)), np.nan)
    for row in d:
        beta[np.searchsorted(ks, row["K"]), np.searchsorted(kps, row["k_p"])] = row["beta"]
    mesh = ax.pcolormesh(kps, ks, beta, shading="nearest", cmap="viridis", vmin=-0.1, vmax=1.2)
    plt.colorbar(mesh, ax=ax, label=r"$\beta$")
    kp_line = np.geomspace(kps.min(), kps.max(), 100)
    ax.plot(kp_line, 1 / kp_line, "w--", lw=1)
    ax.set_xscale("log")
    ax.set_yscale("log")
    ax.set_ylim(ks.min(), ks.max())
    ax.set_xlabel(r"$k_p$")
    ax.set_ylabel("K")


def entanglement(run, ax):
    d = load(run / "entanglement.csv")
    ax.plot(d["t"], d["S"], lw=1, label="S")
    ax.plot(d["t"], d["S_rmt"], "--", lw=1, label=r"$S_{\rm rmt}$")
    ax.set_xlabel("t (kicks)")
    ax.set_ylabel("entropy (nats)")
    ax.legend(fontsize="small")


PLOTS = [
    ("energy.csv", "energy", energy),
    ("histogram_p1.csv", "histograms", histograms),
    ("marginal_p1.csv", "marginals", histograms),
    ("section.csv", "section", section),
    ("lyapunov.csv", "lyapunov", lyapunov),
    ("phase_diagram.csv", "phase_diagram", phase_diagram),
    ("entanglement.csv", "entanglement", entanglement),
]


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("runs", nargs="+", type=pathlib.Path)
    ap.add_argument("--out", type=pathlib.Path, help="directory for the PNGs")
    args = ap.parse_args()
    for run in args.runs:
        out = args.out or run
        out.mkdir(parents=True, exist_ok=True)
        drawn = 0
        for csv, name, draw in PLOTS:
            if not (run / csv).exists():
                continue
            fig, ax = plt.subplots(figsize=(5, 4), layout="constrained")
            draw(run, ax)
            ax.set_title(f"{run.name}: {name}", fontsize="small")
            fig.savefig(out / f"{run.name}_{name}.png", dpi=120)
            plt.close(fig)
            drawn += 1
        if drawn == 0:
            print(f"{run}: no recognised CSV files")


if __name__ == "__main__":
    main()
