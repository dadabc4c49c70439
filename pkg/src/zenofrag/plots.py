"""Figure rendering and plot-script emission for experiment outputs.

Figures are rendered headless (Agg) to PNG files next to the CSVs they
visualize.  Each CSV also gets a small gnuplot script so the plots can be
regenerated without Python.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .units import FS_TO_AU

_DPI = 150


def _save(fig, path: Path) -> Path:
    fig.tight_layout()
    fig.savefig(path, dpi=_DPI)
    plt.close(fig)
    return path


def survival_figure(t_fs, p, path, fit=None, title="Survival probability"):
    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    ax.semilogy(t_fs, np.maximum(p, 1e-16), lw=1.2, label="P(t)")
    if fit is not None and fit.gamma_cm1 > 0:
        lo, hi = fit.fit_window
        t_au = np.asarray(t_fs) * FS_TO_AU
        mask = (t_au >= lo) & (t_au <= hi)
        tt = np.asarray(t_fs)[mask][::20]
        model = fit.amplitude * np.exp(-fit.rate_au * tt * FS_TO_AU)
        ax.semilogy(tt, model, "o", ms=4, mfc="none",
                    label=f"fit: {fit.gamma_cm1:.3g} cm$^{{-1}}$")
    ax.set_xlabel("t (fs)")
    ax.set_ylabel("P(t)")
    ax.set_title(title)
    ax.legend()
    ax.grid(alpha=0.3)
    return _save(fig, Path(path))


def populations_figure(t_fs, series: dict, path, title="Channel accounting"):
    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    for name, values in series.items():
        ax.plot(t_fs, values, lw=1.1, label=name)
    ax.set_xlabel("t (fs)")
    ax.set_ylabel("probability")
    ax.set_title(title)
    ax.legend(fontsize=8, ncol=2)
    ax.grid(alpha=0.3)
    return _save(fig, Path(path))


def rates_figure(tau_fs, gamma_cm1, gamma_free, path):
    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    ax.plot(tau_fs, gamma_cm1, "o-", lw=1.2, label=r"$\gamma(\tau)$")
    if gamma_free is not None:
        ax.axhline(gamma_free, color="crimson", ls="--", lw=1.0,
                   label=f"free: {gamma_free:.3g} cm$^{{-1}}$")
    ax.set_xlabel(r"$\tau$ (fs)")
    ax.set_ylabel(r"$\gamma$ (cm$^{-1}$)")
    ax.set_title("Measurement-modified decay rate")
    ax.legend()
    ax.grid(alpha=0.3)
    return _save(fig, Path(path))


def survival_overlay_figure(curves, path):
    """curves: list of (label, t_fs, P)."""
    fig, ax = plt.subplots(figsize=(6.4, 4.2))
    for label, t_fs, p in curves:
        ax.semilogy(t_fs, np.maximum(p, 1e-16), lw=1.1, label=label)
    ax.set_xlabel("t (fs)")
    ax.set_ylabel("P(t)")
    ax.set_title("Survival under repeated measurement")
    ax.legend(fontsize=8)
    ax.grid(alpha=0.3)
    return _save(fig, Path(path))


def spectral_figure(omega_cm1, g, omega_b_cm1, path):
    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    ax.plot(omega_cm1, g, lw=1.0)
    ax.axvline(omega_b_cm1, color="crimson", ls="--", lw=1.0, label=r"$\omega_b$")
    ax.set_xlabel(r"$\omega$ (cm$^{-1}$)")
    ax.set_ylabel(r"G($\omega$) (a.u.)")
    ax.set_title("Final-state spectral density")
    ax.legend()
    ax.grid(alpha=0.3)
    return _save(fig, Path(path))


def write_survival_gnuplot(path, csv_name="survival.csv",
                           png_name="survival_gp.png"):
    text = "\n".join([
        "# gnuplot script: survival probability",
        f"set output '{png_name}'",
        "set terminal pngcairo size 900,600",
        "set datafile separator ','",
        "set logscale y",
        "set xlabel 't (fs)'",
        "set ylabel 'P(t)'",
        "set grid",
        f"plot '{csv_name}' using 1:2 skip 1 with lines title 'P(t)'",
        "",
    ])
    Path(path).write_text(text, encoding="utf-8")
    return Path(path)


def write_rates_gnuplot(path, csv_name="rates.csv", png_name="rates_gp.png"):
    text = "\n".join([
        "# gnuplot script: measurement-modified decay rates",
        f"set output '{png_name}'",
        "set terminal pngcairo size 900,600",
        "set datafile separator ','",
        "set xlabel 'tau (fs)'",
        "set ylabel 'gamma (cm^-1)'",
        "set grid",
        f"plot '{csv_name}' using 1:2 skip 1 with linespoints title 'gamma(tau)'",
        "",
    ])
    Path(path).write_text(text, encoding="utf-8")
    return Path(path)
