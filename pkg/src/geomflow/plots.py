"""SVG line plots rendered from already-written CSV artifacts.

Each function reads one CSV produced by the command-line driver and
writes one self-contained SVG next to it.  The CSV stays the source of
truth; plots are regenerated from it in a single pass and never from
in-memory state.  Rendering is pinned to the Agg backend with a fixed
hash salt and no embedded date so repeated runs give identical bytes.
"""

from __future__ import annotations

import csv

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402  (backend must be set first)

matplotlib.rcParams["svg.hashsalt"] = "geomflow"

# the SVG backend renders at 72 dpi, so this figure size gives a fixed
# 800 x 500 viewport
FIGSIZE = (800.0 / 72.0, 500.0 / 72.0)

# floor for log-scale plots of quantities that can reach exact zero
PLOT_FLOOR = 1e-18


def _read_columns(path):
    """Read a headed CSV into {column: list of floats-or-strings}."""
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        columns = {name: [] for name in header}
        for row in reader:
            for name, cell in zip(header, row):
                columns[name].append(cell)
    return columns


def _floats(cells):
    return [float(c) for c in cells]


def _save(fig, path):
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)


def _rel_drift(series):
    base = series[0]
    scale = max(abs(base), PLOT_FLOOR)
    return [max(abs(q - base) / scale, PLOT_FLOOR) for q in series]


def plot_rigidbody_conservation(csv_path, svg_path) -> None:
    """Semilog drift of energy, Casimir, and spatial momentum over time."""
    cols = _read_columns(csv_path)
    t = _floats(cols["t"])
    energy = _rel_drift(_floats(cols["energy"]))
    casimir = _rel_drift(_floats(cols["casimir"]))
    mx, my, mz = (_floats(cols[k]) for k in ("mx", "my", "mz"))
    m0 = (mx[0] ** 2 + my[0] ** 2 + mz[0] ** 2) ** 0.5
    scale = max(m0, PLOT_FLOOR)
    momentum = [max(((x - mx[0]) ** 2 + (y - my[0]) ** 2
                     + (z - mz[0]) ** 2) ** 0.5 / scale, PLOT_FLOOR)
                for x, y, z in zip(mx, my, mz)]
    fig, ax = plt.subplots(figsize=FIGSIZE)
    ax.semilogy(t, energy, label="energy")
    ax.semilogy(t, casimir, label="|I w|^2")
    ax.semilogy(t, momentum, label="spatial momentum")
    ax.set_xlabel("t")
    ax.set_ylabel("relative drift")
    ax.set_title("Rigid body conservation")
    ax.legend()
    _save(fig, svg_path)


def plot_fluid_conservation(csv_path, svg_path) -> None:
    """Semilog drift of kinetic energy and enstrophy over time."""
    cols = _read_columns(csv_path)
    t = _floats(cols["t"])
    fig, ax = plt.subplots(figsize=FIGSIZE)
    ax.semilogy(t, _rel_drift(_floats(cols["energy"])), label="energy")
    ax.semilogy(t, _rel_drift(_floats(cols["enstrophy"])), label="enstrophy")
    ax.set_xlabel("t")
    ax.set_ylabel("relative drift")
    ax.set_title("2D Euler conservation")
    ax.legend()
    _save(fig, svg_path)


def plot_action_response(csv_path, svg_path) -> None:
    """Log-log action change against perturbation strength, with an
    order-two guide line anchored at the largest strength."""
    cols = _read_columns(csv_path)
    eps = _floats(cols["epsilon"])
    delta = [max(d, PLOT_FLOOR) for d in _floats(cols["abs_delta"])]
    fig, ax = plt.subplots(figsize=FIGSIZE)
    ax.loglog(eps, delta, "o-", label="|A(eps) - A(0)|")
    guide = [delta[0] * (e / eps[0]) ** 2 for e in eps]
    ax.loglog(eps, guide, "--", color="gray", label="order 2 guide")
    ax.set_xlabel("eps")
    ax.set_ylabel("action change")
    ax.set_title("Action response to perturbation strength")
    ax.legend()
    _save(fig, svg_path)


def plot_residual_orders(csv_path, svg_path) -> None:
    """Log-log mixed-partial residual against stencil width, with an
    order-two guide line anchored at the largest width."""
    cols = _read_columns(csv_path)
    h = _floats(cols["h"])
    resid = [max(r, PLOT_FLOOR) for r in _floats(cols["residual"])]
    fig, ax = plt.subplots(figsize=FIGSIZE)
    ax.loglog(h, resid, "o-", label="residual")
    guide = [resid[0] * (x / h[0]) ** 2 for x in h]
    ax.loglog(h, guide, "--", color="gray", label="order 2 guide")
    ax.set_xlabel("h")
    ax.set_ylabel("sup-norm residual")
    ax.set_title("Mixed-partial residual vs stencil width")
    ax.legend()
    _save(fig, svg_path)
