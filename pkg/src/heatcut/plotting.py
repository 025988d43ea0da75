"""Figures written next to CLI reports (matplotlib, non-interactive backend)."""

from __future__ import annotations


import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402


def _save(fig, path):
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path


def plot_psi_trajectory(result, path):
    """Total deviation per iteration against the certificate threshold ``(1 + eps)/n``."""
    trace = result.trace
    t = [r.t for r in trace]
    psi = [r.psi for r in trace]
    fig, ax = plt.subplots(figsize=(5.5, 3.6))
    ax.semilogy(t, psi, "o-", label="total deviation")
    params = result.params
    ax.axhline((1 + params["eps"]) / params["n"], color="k", ls="--", lw=1, label="threshold")
    for r in trace:
        ax.annotate(r.case, (r.t, r.psi), textcoords="offset points", xytext=(4, 4), fontsize=7)
    ax.set_xlabel("iteration")
    ax.set_ylabel("psi")
    ax.set_title(f"{result.kind} after {result.iteration} iteration(s)")
    ax.legend(fontsize=8)
    return _save(fig, path)


def plot_degree_scaling(widths, degrees, path, lower=None, delta=None):
    """Empirical minimal degree against interval width with a ``sqrt(W)`` reference."""
    widths = np.asarray(widths, dtype=float)
    degrees = np.asarray(degrees, dtype=float)
    fig, ax = plt.subplots(figsize=(5.0, 3.6))
    ax.loglog(widths, degrees, "o-", label="minimal degree")
    ref = degrees[0] * np.sqrt(widths / widths[0])
    ax.loglog(widths, ref, ":", color="gray", label="sqrt(W) reference")
    if lower is not None:
        ax.loglog(widths, np.maximum(lower, 1e-1), "s--", label="lower bound")
    ax.set_xlabel("interval width W")
    ax.set_ylabel("degree")
    if delta is not None:
        ax.set_title(f"exp(-x) on [a, a+W], delta = {delta:g}")
    ax.legend(fontsize=8)
    return _save(fig, path)


def plot_residual(p, path):
    """Relative residual of an ``exp(-x)`` approximant over its interval."""
    a, b = p.interval
    x = np.linspace(a, b, 4000)
    r = np.exp(-(x - a)) - p.relative(x)
    fig, ax = plt.subplots(figsize=(5.5, 3.2))
    ax.plot(x, r, lw=1)
    ax.axhline(0, color="k", lw=0.5)
    ax.set_xlabel("x")
    ax.set_ylabel("relative residual")
    ax.set_title(f"degree {p.degree}, sup error {p.measured_error:.3g}")
    return _save(fig, path)


