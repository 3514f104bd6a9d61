"""Matplotlib figures written as standalone, byte-reproducible SVG files.

Data curves carry a ``gid`` starting with ``trace-`` and critical-time
markers one starting with ``critical-``, so the SVG can be inspected
programmatically.
"""

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .analysis import ObservableSeries, PhaseDiagram  # noqa: E402
from .metrology import FisherSeries  # noqa: E402

STYLE = {
    "svg.hashsalt": "dqpt-sim",
    "svg.fonttype": "path",
    "font.size": 9,
    "axes.labelsize": 9,
    "legend.fontsize": 8,
    "lines.linewidth": 1.2,
}


def _trace(ax, x, y, name, **kw):
    if len(x) < 2:
        return None
    (line,) = ax.plot(x, y, **kw)
    line.set_gid(f"trace-{name}")
    return line


def _markers(axes, times_us):
    for k, t in enumerate(times_us):
        for n, ax in enumerate(axes):
            ln = ax.axvline(t, color="0.4", ls=":", lw=0.8)
            ln.set_gid(f"critical-{k}" if n == 0 else f"critical-{k}-{n}")


def _save(fig, path):
    path = Path(path)
    fig.savefig(path, format="svg", metadata={"Date": None, "Creator": None})
    plt.close(fig)
    return path


def render_observables(series: ObservableSeries, path, critical_times=(), title=None):
    """Stacked panels: rate function, magnetization, then entanglement if present."""
    panels = [("lambda", series.lam, r"$\lambda(t)$"), ("mz", series.mz, r"$\langle M_z\rangle$")]
    if series.concurrence is not None:
        panels.append(("concurrence", series.concurrence, r"$C$"))
    if series.tangle is not None:
        panels.append(("tangle", series.tangle, r"$\tau_{123}$"))
    t = np.asarray(series.times) * 1e6
    with plt.rc_context(STYLE):
        fig, axes = plt.subplots(len(panels), 1, sharex=True, figsize=(4.0, 1.6 * len(panels) + 0.4))
        axes = np.atleast_1d(axes)
        for ax, (name, y, label) in zip(axes, panels):
            _trace(ax, t, y, name, color="C0" if name != "lambda" else "C3")
            ax.set_ylabel(label)
        if len(t) >= 2:
            axes[1].axhline(0.0, color="0.7", lw=0.6)
        _markers(axes, [c * 1e6 for c in critical_times])
        axes[-1].set_xlabel(r"$t$ ($\mu$s)")
        if title:
            axes[0].set_title(title)
        fig.tight_layout()
        return _save(fig, path)


def render_fisher(series: FisherSeries, path, title=None):
    t = np.asarray(series.times) * 1e6
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots(figsize=(4.0, 2.6))
        _trace(ax, t, series.fi * 1e12, "fi", color="C0", label="FI")
        _trace(ax, t, t ** 2, "t2", color="0.5", ls="--", label=r"$t^2$")
        ax.set_xlabel(r"$t$ ($\mu$s)")
        ax.set_ylabel(r"FI ($\mu$s$^2$)")
        if len(t) >= 2:
            ax.legend(frameon=False)
        if title:
            ax.set_title(title)
        fig.tight_layout()
        return _save(fig, path)


def render_phase_diagram(diagram: PhaseDiagram, path, title=None):
    with plt.rc_context(STYLE):
        fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(7.0, 2.8))
        extent = [diagram.bx_grid.min(), diagram.bx_grid.max(), diagram.bz_grid.min(), diagram.bz_grid.max()]
        im1 = ax1.imshow(diagram.dqpt_flag.T.astype(float), origin="lower", aspect="auto", extent=extent,
                         cmap="viridis", vmin=0, vmax=1, interpolation="nearest")
        im1.set_gid("trace-dqpt")
        ax1.set_title("DQPT within horizon")
        im2 = ax2.imshow(diagram.mean_mz.T, origin="lower", aspect="auto", extent=extent,
                         cmap="coolwarm", interpolation="nearest")
        im2.set_gid("trace-mean-mz")
        fig.colorbar(im2, ax=ax2, label=r"$\overline{\langle M_z\rangle}$")
        for ax in (ax1, ax2):
            ax.set_xlabel(r"$B_x$ (G)")
            ax.set_ylabel(r"$B_z$ (G)")
        if title:
            fig.suptitle(title)
        fig.tight_layout()
        return _save(fig, path)


def render_comparison(times, curves: dict, path, ylabel, title=None):
    """Overlay of named curves on one axis (used for model validation)."""
    t = np.asarray(times) * 1e6
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots(figsize=(4.0, 2.6))
        for k, (name, y) in enumerate(curves.items()):
            _trace(ax, t, y, name, color=f"C{k}", label=name)
        ax.set_xlabel(r"$t$ ($\mu$s)")
        ax.set_ylabel(ylabel)
        if len(t) >= 2:
            ax.legend(frameon=False)
        if title:
            ax.set_title(title)
        fig.tight_layout()
        return _save(fig, path)


def render_svg(series, path, critical_times=(), title=None):
    """Dispatch on the series type."""
    if isinstance(series, ObservableSeries):
        return render_observables(series, path, critical_times, title)
    if isinstance(series, FisherSeries):
        return render_fisher(series, path, title)
    if isinstance(series, PhaseDiagram):
        return render_phase_diagram(series, path, title)
    raise TypeError(f"no SVG renderer for {type(series).__name__}")
