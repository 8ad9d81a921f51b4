"""Figure rendering for simulation traces.

Two report figures accompany a trace: the per-step deviation from the
unencrypted loop, and the plant state trajectory.  Everything renders
through the Agg backend straight to files next to the CSV.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402  (backend must be set first)
import numpy as np  # noqa: E402


def plot_error(trace, sampling: float, out_path, label: str = None):
    """Per-step ||u(k) - u'(k)|| over time, one line per trace."""
    traces = trace if isinstance(trace, (list, tuple)) else [trace]
    fig, ax = plt.subplots(figsize=(6.4, 3.6))
    for tr in traces:
        t = np.array([r.k for r in tr.records]) * sampling
        err = [float(np.max(np.abs(r.u - r.u_ref))) for r in tr.records]
        ax.plot(t, err, lw=1.4, label=getattr(tr, "kind", None))
    ax.set_xlabel("Time (s)")
    ax.set_ylabel(r"$\|u(k)-u'(k)\|$")
    if label:
        ax.set_title(label)
    if len(traces) > 1:
        ax.legend()
    ax.grid(True, alpha=0.4)
    fig.tight_layout()
    fig.savefig(out_path, dpi=150)
    plt.close(fig)
    return Path(out_path)


def plot_states(trace, sampling: float, out_path, label: str = None):
    """Plant state components over time."""
    xp = trace.xp if not isinstance(trace, np.ndarray) else trace
    xp = np.atleast_2d(xp)
    t = np.arange(xp.shape[0]) * sampling
    fig, ax = plt.subplots(figsize=(6.4, 3.6))
    for i in range(xp.shape[1]):
        ax.plot(t, xp[:, i], lw=1.2, label=rf"$x_p^{{{i + 1}}}$")
    ax.set_xlabel("Time (s)")
    ax.set_ylabel("plant state")
    if label:
        ax.set_title(label)
    ax.legend(ncol=min(xp.shape[1], 5), fontsize=8)
    ax.grid(True, alpha=0.4)
    fig.tight_layout()
    fig.savefig(out_path, dpi=150)
    plt.close(fig)
    return Path(out_path)


def render_run(trace, sampling: float, csv_path) -> list:
    """Write the error and state figures next to a trace CSV."""
    base = Path(csv_path).with_suffix("")
    out = [plot_error(trace, sampling, base.parent / f"{base.name}_error.png"),
           plot_states(trace, sampling, base.parent / f"{base.name}_states.png")]
    return out
