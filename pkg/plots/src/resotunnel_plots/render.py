"""Render figures from resotunnel CSV files.

This package never recomputes physics: it is a pure function of its input
files.  Four figure kinds are supported:

  splitting-vs-N    semilog splittings against the integer N, one panel per
                    (phi, n) group; exact data as dots, the complex-path
                    prediction as a solid line, the perturbative ladder
                    dashed, the unperturbed and direct predictions as lines
  splitting-vs-phi  semilog splittings against the phase, one panel per N
  portrait          level-set polylines of the Hamiltonian, one panel per file
  complex-3d        trajectories projected on (Re p, Re q, Im p)

Rendering is deterministic: identical CSVs produce identical image bytes.
"""

from __future__ import annotations

import argparse
import csv
import math
import sys
from dataclasses import dataclass
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

KINDS = ("splitting-vs-N", "splitting-vs-phi", "portrait", "complex-3d")

SPLITTING_HEADER = ["N", "phi", "b_mod", "n", "E_n", "dE_exact", "dE_cpath",
                    "dE_direct", "dE_rat", "dE_unpert", "sigma_c",
                    "sigma_tilde", "Sigma", "S_in", "S_out", "denom", "flags"]
PORTRAIT_HEADER = ["E", "piece", "p", "q"]
TRACE_HEADER = ["s", "Re_p", "Im_p", "Re_q", "Im_q"]
TORUS_HEADER = ["s", "p", "q"]


class SchemaError(Exception):
    """Input CSV does not match the expected resotunnel schema."""


@dataclass
class FigureSpec:
    """What to render: input CSVs, figure kind and styling options."""

    kind: str
    inputs: list
    out: Path = Path("figure.png")
    dpi: int = 150
    panel_size: tuple = (3.6, 2.8)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise SchemaError(f"unknown figure kind {self.kind!r}")
        self.inputs = [Path(p) for p in self.inputs]
        self.out = Path(self.out)


def _read_csv(path, expected_header):
    path = Path(path)
    try:
        with open(path, newline="") as fh:
            reader = csv.reader(fh)
            try:
                header = next(reader)
            except StopIteration:
                raise SchemaError(f"{path}: empty file, expected a header")
            if header != expected_header:
                raise SchemaError(
                    f"{path}: header {header!r} does not match the "
                    f"{expected_header[0]}… schema")
            rows = list(reader)
    except OSError as exc:
        raise SchemaError(f"{path}: {exc}")
    for k, row in enumerate(rows, 2):
        if len(row) != len(expected_header):
            raise SchemaError(f"{path}:{k}: expected {len(expected_header)} columns")
    return rows


def _to_float(tok):
    if tok in ("", "nan", "None"):
        return math.nan
    if tok == "inf":
        return math.inf
    return float(tok)


def load_splittings(path):
    """Parse the master splitting CSV into a list of row dicts."""
    rows = _read_csv(path, SPLITTING_HEADER)
    out = []
    for row in rows:
        rec = {key: (row[i] if key == "flags" else _to_float(row[i]))
               for i, key in enumerate(SPLITTING_HEADER)}
        out.append(rec)
    return out


def load_portrait(path):
    rows = _read_csv(path, PORTRAIT_HEADER)
    return np.array([[_to_float(t) for t in row] for row in rows]) \
        if rows else np.empty((0, 4))


def load_xyz_trace(path):
    """Trace or torus CSV -> (Re p, Re q, Im p) arrays."""
    with open(path, newline="") as fh:
        header = next(csv.reader(fh))
    if header == TRACE_HEADER:
        data = np.genfromtxt(path, delimiter=",", skip_header=1)
        data = np.atleast_2d(data)
        if data.size == 0:
            return np.empty(0), np.empty(0), np.empty(0)
        return data[:, 1], data[:, 3], data[:, 2]
    if header == TORUS_HEADER:
        data = np.atleast_2d(np.genfromtxt(path, delimiter=",", skip_header=1))
        if data.size == 0:
            return np.empty(0), np.empty(0), np.empty(0)
        return data[:, 1], data[:, 2], np.zeros(len(data))
    raise SchemaError(f"{path}: neither a trace nor a torus file")


#: line styling per prediction column: exact data as black dots,
#: complex-path solid, perturbative ladder dashed, unperturbed and
#: direct as thin lines
SERIES_STYLE = {
    "dE_exact": dict(color="black", marker="o", linestyle="none",
                     markersize=3.5, label="exact"),
    "dE_cpath": dict(color="tab:blue", linestyle="-", label="complex path"),
    "dE_rat": dict(color="tab:red", linestyle="--", label="perturbative"),
    "dE_unpert": dict(color="magenta", linestyle="-", linewidth=0.9,
                      label="unperturbed"),
    "dE_direct": dict(color="tab:green", linestyle="-", linewidth=0.9,
                      label="direct"),
}


def _panel_grid(n_panels, panel_size):
    cols = min(2, max(1, n_panels))
    rows = max(1, math.ceil(n_panels / cols)) if n_panels else 1
    fig, axes = plt.subplots(rows, cols, squeeze=False,
                             figsize=(panel_size[0] * cols, panel_size[1] * rows))
    return fig, [ax for row in axes for ax in row]


def _render_splittings(spec, versus):
    records = []
    for path in spec.inputs:
        records.extend(load_splittings(path))
    if versus == "N":
        group_key = lambda r: (r["phi"], r["n"])
        x_key, x_label = "N", "N"
    else:
        group_key = lambda r: (r["N"], r["n"])
        x_key, x_label = "phi", "phi"
    groups = {}
    for rec in records:
        groups.setdefault(group_key(rec), []).append(rec)
    fig, axes = _panel_grid(len(groups), spec.panel_size)
    for ax in axes[len(groups):]:
        ax.set_axis_off()
    for ax, key in zip(axes, sorted(groups)):
        rows = sorted(groups[key], key=lambda r: r[x_key])
        xs = np.array([r[x_key] for r in rows])
        for column, style in SERIES_STYLE.items():
            ys = np.array([r[column] for r in rows])
            keep = np.isfinite(ys) & (ys > 0)
            if not np.any(keep):
                continue
            ax.plot(xs[keep], ys[keep], **style)
        ax.set_yscale("log")
        ax.set_xlabel(x_label)
        ax.set_ylabel("Delta E")
        if versus == "N":
            ax.set_title(f"phi={key[0]:.4f}, n={int(key[1])}", fontsize=9)
        else:
            ax.set_title(f"N={int(key[0])}, n={int(key[1])}", fontsize=9)
        if ax is axes[0] and ax.get_legend_handles_labels()[0]:
            ax.legend(fontsize=7)
    return fig


def _render_portrait(spec):
    fig, axes = _panel_grid(len(spec.inputs), (3.2, 3.2))
    for ax in axes[len(spec.inputs):]:
        ax.set_axis_off()
    for ax, path in zip(axes, spec.inputs):
        data = load_portrait(path)
        if data.size:
            for E in np.unique(data[:, 0]):
                at_e = data[data[:, 0] == E]
                for piece in np.unique(at_e[:, 1]):
                    sel = at_e[at_e[:, 1] == piece]
                    ax.plot(sel[:, 3], sel[:, 2], color="black", linewidth=0.5)
        ax.set_xlim(-math.pi, math.pi)
        ax.set_ylim(-math.pi, math.pi)
        ax.set_aspect("equal")
        ax.set_xlabel("q")
        ax.set_ylabel("p")
        ax.set_title(Path(path).stem, fontsize=8)
    return fig


def _render_complex3d(spec):
    fig = plt.figure(figsize=(5.0, 4.2))
    ax = fig.add_subplot(projection="3d")
    palette = ("tab:red", "tab:orange", "tab:blue", "green", "black",
               "tab:purple")
    for k, path in enumerate(spec.inputs):
        re_p, re_q, im_p = load_xyz_trace(path)
        if len(re_p) == 0:
            continue
        ax.plot(re_p, re_q, im_p, color=palette[k % len(palette)],
                linewidth=1.0, label=Path(path).stem)
    ax.set_xlabel("Re p")
    ax.set_ylabel("Re q")
    ax.set_zlabel("Im p")
    if spec.inputs:
        ax.legend(fontsize=6)
    return fig


def render(spec: FigureSpec):
    """Render the figure described by `spec`; returns the matplotlib figure.

    The caller saves it with save_figure (or lets the CLI do it)."""
    plt.rcParams["svg.hashsalt"] = "resotunnel-plots"
    if spec.kind == "splitting-vs-N":
        return _render_splittings(spec, "N")
    if spec.kind == "splitting-vs-phi":
        return _render_splittings(spec, "phi")
    if spec.kind == "portrait":
        return _render_portrait(spec)
    return _render_complex3d(spec)


def save_figure(fig, out, dpi=150):
    """Deterministic save: identical figures give identical bytes."""
    out = Path(out)
    out.parent.mkdir(parents=True, exist_ok=True)
    metadata = {"Date": None} if out.suffix == ".svg" else {"Software": None}
    fig.savefig(out, dpi=dpi, metadata=metadata)
    plt.close(fig)


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(prog="resotunnel-plots")
    subs = ap.add_subparsers(dest="command", required=True)
    rd = subs.add_parser("render", help="render one figure from CSV inputs")
    rd.add_argument("--kind", choices=KINDS, required=True)
    rd.add_argument("--in", dest="inputs", nargs="+", required=True)
    rd.add_argument("--out", required=True)
    rd.add_argument("--dpi", type=int, default=150)
    args = ap.parse_args(argv)
    try:
        spec = FigureSpec(kind=args.kind, inputs=args.inputs, out=args.out,
                          dpi=args.dpi)
        fig = render(spec)
        save_figure(fig, spec.out, dpi=spec.dpi)
    except SchemaError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    print(f"wrote {args.out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
