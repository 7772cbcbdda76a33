"""Render figures from wavetrefftz experiment artifacts.

One figure per invocation, static vector output only.  The renderer never
reinterprets numbers: every plotted curve carries exactly the values read
from the CSV, which the round-trip test checks by extracting the line data
back out of the figure.

Figure kinds
------------
convergence : log-log error vs h, one curve per CSV, with a dashed
              h^(p - 1/2) reference slope per curve when the degree is
              known (taken from ``--p`` or inferred from ``_p<k>`` in the
              file name).
p-refine    : semilog error vs polynomial degree.
energy      : physical energy vs time per CSV, optional horizontal line
              at the conserved exact energy.
highfreq    : scaled final-time error vs h/delta, one curve per delta.
walltime    : log-log error vs wall time, read from summary JSON files.
"""

from __future__ import annotations

import argparse
import json
import re
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import List, Optional

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

# Deterministic SVG output: fixed hash salt, no timestamps.
matplotlib.rcParams["svg.hashsalt"] = "wavetrefftz"

KINDS = ("convergence", "p-refine", "energy", "highfreq", "walltime")

SCHEMAS = {
    "convergence": ["N", "h", "dofs", "error", "order"],
    "p-refine": ["p", "dofs", "error"],
    "energy": ["t", "E", "E_h"],
    "highfreq": ["delta", "h", "h_over_delta", "error_delta"],
}


class RenderError(ValueError):
    pass


@dataclass
class FigureSpec:
    kind: str
    csv_paths: List[str]
    out_path: Optional[str] = None
    labels: List[str] = field(default_factory=list)
    p_values: List[int] = field(default_factory=list)
    exact_energy: Optional[float] = None
    title: Optional[str] = None

    def validate(self):
        if self.kind not in KINDS:
            raise RenderError(f"unknown figure kind {self.kind!r}")
        if not self.csv_paths:
            raise RenderError("at least one input file is required")
        if self.labels and len(self.labels) != len(self.csv_paths):
            raise RenderError("need one label per input file")
        if self.p_values and len(self.p_values) != len(self.csv_paths):
            raise RenderError("need one degree per input file")


def read_csv(path: str, kind: str) -> dict:
    """Read and validate one experiment CSV; empty data is an error."""
    text = Path(path).read_text()
    lines = [ln for ln in text.strip().split("\n") if ln]
    if not lines:
        raise RenderError(f"{path}: empty file")
    header = lines[0].split(",")
    expected = SCHEMAS[kind]
    if header != expected:
        raise RenderError(f"{path}: header {header} does not match the "
                          f"{kind} schema {expected}")
    if len(lines) < 2:
        raise RenderError(f"{path}: no data rows")
    cols: dict = {name: [] for name in header}
    for ln in lines[1:]:
        parts = ln.split(",")
        if len(parts) != len(header):
            raise RenderError(f"{path}: ragged row {ln!r}")
        for name, val in zip(header, parts):
            cols[name].append(float(val) if val != "" else np.nan)
    return {name: np.array(vals) for name, vals in cols.items()}


def infer_degree(path: str) -> Optional[int]:
    m = re.search(r"_p(\d+)", Path(path).name)
    return int(m.group(1)) if m else None


def _label(spec: FigureSpec, i: int) -> str:
    if spec.labels:
        return spec.labels[i]
    return Path(spec.csv_paths[i]).stem


def _new_axes(title: Optional[str]):
    fig, ax = plt.subplots(figsize=(5.0, 3.75), dpi=100)
    if title:
        ax.set_title(title)
    return fig, ax


def render(spec: FigureSpec):
    """Build the figure; write it to spec.out_path when given.

    Returns the matplotlib Figure (with the data lines carrying exactly
    the CSV values), so callers can inspect it without re-reading files.
    """
    spec.validate()
    if spec.kind == "walltime":
        fig = _render_walltime(spec)
    else:
        data = [read_csv(p, spec.kind) for p in spec.csv_paths]
        fig = {
            "convergence": _render_convergence,
            "p-refine": _render_p_refine,
            "energy": _render_energy,
            "highfreq": _render_highfreq,
        }[spec.kind](spec, data)
    if spec.out_path:
        fig.savefig(spec.out_path, format="svg", metadata={"Date": None})
    return fig


def _render_convergence(spec: FigureSpec, data: List[dict]):
    fig, ax = _new_axes(spec.title)
    for i, cols in enumerate(data):
        h, err = cols["h"], cols["error"]
        ax.loglog(h, err, marker="o", label=_label(spec, i))
        p = spec.p_values[i] if spec.p_values else infer_degree(spec.csv_paths[i])
        if p is not None:
            rate = p - 0.5
            # dashed reference slope anchored at the finest point
            ref = err[-1] * (h / h[-1]) ** rate
            ax.loglog(h, ref, linestyle="--", color="gray", linewidth=0.9,
                      label=f"h^{rate:g}", zorder=1)
    ax.set_xlabel("h")
    ax.set_ylabel("error")
    ax.legend(fontsize=8)
    fig.tight_layout()
    return fig


def _render_p_refine(spec: FigureSpec, data: List[dict]):
    fig, ax = _new_axes(spec.title)
    for i, cols in enumerate(data):
        ax.semilogy(cols["p"], cols["error"], marker="s", label=_label(spec, i))
    ax.set_xlabel("polynomial degree p")
    ax.set_ylabel("error")
    ax.legend(fontsize=8)
    fig.tight_layout()
    return fig


def _render_energy(spec: FigureSpec, data: List[dict]):
    fig, ax = _new_axes(spec.title)
    for i, cols in enumerate(data):
        ax.plot(cols["t"], cols["E"], label=_label(spec, i))
    if spec.exact_energy is not None:
        ax.axhline(spec.exact_energy, linestyle="--", color="black",
                   linewidth=0.9, label="conserved energy")
    ax.set_xlabel("t")
    ax.set_ylabel("energy")
    ax.legend(fontsize=8)
    fig.tight_layout()
    return fig


def _render_highfreq(spec: FigureSpec, data: List[dict]):
    fig, ax = _new_axes(spec.title)
    for i, cols in enumerate(data):
        # one curve per pulse width, sorted by the resolution ratio
        for delta in sorted(set(cols["delta"])):
            mask = cols["delta"] == delta
            ratio = cols["h_over_delta"][mask]
            err = cols["error_delta"][mask]
            order = np.argsort(ratio)
            ax.loglog(ratio[order], err[order], marker="o",
                      label=f"{_label(spec, i)} delta={delta:g}")
    ax.set_xlabel("h / delta")
    ax.set_ylabel("scaled error")
    ax.legend(fontsize=8)
    fig.tight_layout()
    return fig


def _render_walltime(spec: FigureSpec):
    fig, ax = _new_axes(spec.title)
    for i, path in enumerate(spec.csv_paths):
        summary = json.loads(Path(path).read_text())
        try:
            times = np.array(summary["timings"], dtype=float)
            errs = np.array(summary["errors"], dtype=float)
        except KeyError as err:
            raise RenderError(f"{path}: summary lacks {err} for a walltime figure")
        if times.size == 0 or times.size != errs.size:
            raise RenderError(f"{path}: timings/errors missing or mismatched")
        ax.loglog(times, errs, marker="o", label=_label(spec, i))
    ax.set_xlabel("wall time [s]")
    ax.set_ylabel("error")
    ax.legend(fontsize=8)
    fig.tight_layout()
    return fig


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="render", description="Render a figure from experiment CSV output.")
    parser.add_argument("--kind", choices=KINDS, required=True)
    parser.add_argument("--csv", nargs="+", required=True,
                        help="input CSV files (summary JSONs for --kind walltime)")
    parser.add_argument("--out", required=True, help="output SVG path")
    parser.add_argument("--labels", nargs="*", default=[])
    parser.add_argument("--p", nargs="*", type=int, default=[],
                        help="polynomial degree per CSV, for reference slopes")
    parser.add_argument("--exact-energy", type=float, default=None)
    parser.add_argument("--title", default=None)
    args = parser.parse_args(argv)
    spec = FigureSpec(kind=args.kind, csv_paths=args.csv, out_path=args.out,
                      labels=args.labels, p_values=args.p,
                      exact_energy=args.exact_energy, title=args.title)
    try:
        render(spec)
    except (RenderError, OSError) as err:
        print(f"render error: {err}", file=sys.stderr)
        return 1
    print(f"wrote {args.out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
