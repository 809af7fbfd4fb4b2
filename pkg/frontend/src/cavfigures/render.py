"""Render one figure panel from simulation CSV artifacts.

Invoked as ``render_panel <spec-file>``. A panel spec is plain key-value
text (``key = value`` lines, ``#`` comments). Input CSV paths resolve
relative to the spec file's directory; the output image path resolves
relative to the current working directory. Rendering is a pure function
of the CSV contents: rerunning produces byte-identical images for fixed
tool versions.

Panel kinds
    distribution   one momentum histogram CSV: simulated density (solid),
                   initial density (dashed), analytic prediction (circles)
    histpair       two histogram CSVs side by side, same conventions
    timetrace      time-series CSV: chosen columns (solid) with optional
                   prediction columns (dash-dotted)

Spec keys
    kind, out, csv [, csv2]            required (csv2 for histpair only)
    columns = a,b                      timetrace: columns to draw
    pred = pa,pb                       timetrace: prediction overlays
    pred_column                        distribution/histpair: prediction
                                       column (default pred_density)
    logy = on|off, title, xlabel, ylabel
"""

from __future__ import annotations

import sys
from dataclasses import dataclass, field
from pathlib import Path

import matplotlib
import numpy as np

matplotlib.use("Agg")
matplotlib.rcParams["svg.hashsalt"] = "render_panel"

import matplotlib.pyplot as plt  # noqa: E402  (backend must be set first)

KINDS = ("distribution", "histpair", "timetrace")
_KEYS = {"kind", "out", "csv", "csv2", "columns", "pred", "pred_column",
         "logy", "title", "xlabel", "ylabel"}


class PanelError(ValueError):
    """Invalid panel spec or unusable CSV input."""


@dataclass
class PanelSpec:
    kind: str
    out: Path
    csv: Path
    csv2: Path | None = None
    columns: tuple[str, ...] = ()
    pred: tuple[str, ...] = ()
    pred_column: str = "pred_density"
    logy: bool = False
    title: str = ""
    xlabel: str = ""
    ylabel: str = ""
    extra: dict = field(default_factory=dict)


def parse_spec(text: str, base_dir: Path) -> PanelSpec:
    values: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise PanelError(f"line {lineno}: expected 'key = value', "
                             f"got {line!r}")
        key, _, value = line.partition("=")
        key, value = key.strip(), value.strip()
        if key not in _KEYS:
            raise PanelError(f"line {lineno}: unknown key {key!r}")
        if key in values:
            raise PanelError(f"line {lineno}: duplicate key {key!r}")
        values[key] = value

    for required in ("kind", "out", "csv"):
        if required not in values:
            raise PanelError(f"missing required key {required!r}")
    kind = values["kind"]
    if kind not in KINDS:
        raise PanelError(f"kind must be one of {'|'.join(KINDS)}, "
                         f"got {kind!r}")
    if kind == "histpair" and "csv2" not in values:
        raise PanelError("histpair panels require the 'csv2' key")
    if kind == "timetrace" and "columns" not in values:
        raise PanelError("timetrace panels require the 'columns' key")

    def split(key: str) -> tuple[str, ...]:
        if key not in values or not values[key]:
            return ()
        return tuple(col.strip() for col in values[key].split(","))

    return PanelSpec(
        kind=kind,
        out=Path(values["out"]),
        csv=base_dir / values["csv"],
        csv2=base_dir / values["csv2"] if "csv2" in values else None,
        columns=split("columns"),
        pred=split("pred"),
        pred_column=values.get("pred_column", "pred_density"),
        logy=values.get("logy", "off") == "on",
        title=values.get("title", ""),
        xlabel=values.get("xlabel", ""),
        ylabel=values.get("ylabel", ""),
    )


def read_csv(path: Path) -> dict[str, np.ndarray]:
    """Columns of a '#'-commented CSV as name -> float array."""
    if not path.exists():
        raise PanelError(f"input CSV not found: {path}")
    lines = [l for l in path.read_text().splitlines()
             if l and not l.startswith("#")]
    if len(lines) < 2:
        raise PanelError(f"CSV has no data rows: {path}")
    names = lines[0].split(",")
    rows = [line.split(",") for line in lines[1:]]
    if any(len(row) != len(names) for row in rows):
        raise PanelError(f"ragged CSV rows in {path}")
    data = np.array(rows, dtype=float)
    return {name: data[:, j] for j, name in enumerate(names)}


def column(table: dict[str, np.ndarray], name: str, path: Path) -> np.ndarray:
    if name not in table:
        raise PanelError(f"column {name!r} not found in {path} "
                         f"(has: {', '.join(table)})")
    return table[name]


def _draw_distribution(ax, table, path: Path, spec: PanelSpec) -> None:
    p = column(table, "p", path)
    ax.plot(p, column(table, "density", path), "-", color="tab:blue",
            label="simulation")
    if "initial_density" in table:
        ax.plot(p, table["initial_density"], "--", color="0.4",
                label="initial")
    pred = column(table, spec.pred_column, path)
    keep = np.isfinite(pred)
    ax.plot(p[keep][::3], pred[keep][::3], "o", mfc="none",
            color="tab:red", markersize=4, label="prediction")
    ax.set_xlabel(spec.xlabel or "p")
    ax.set_ylabel(spec.ylabel or "f(p)")
    if spec.logy:
        ax.set_yscale("log")
        dens = column(table, "density", path)
        floor = dens[dens > 0]
        if floor.size:
            ax.set_ylim(bottom=0.5 * floor.min())
    ax.legend(frameon=False, fontsize=8)


def _draw_timetrace(ax, table, path: Path, spec: PanelSpec) -> None:
    t = column(table, "t", path)
    for name in spec.columns:
        ax.plot(t, column(table, name, path), "-", label=name)
    for name in spec.pred:
        ax.plot(t, column(table, name, path), "-.", color="0.2",
                label=name)
    ax.set_xlabel(spec.xlabel or "t")
    if spec.ylabel:
        ax.set_ylabel(spec.ylabel)
    if spec.logy:
        ax.set_yscale("log")
    ax.legend(frameon=False, fontsize=8)


def render(spec: PanelSpec) -> Path:
    """Draw the panel and write the image; returns the output path."""
    if spec.kind == "histpair":
        fig, axes = plt.subplots(1, 2, figsize=(8.0, 3.2))
        for ax, path in zip(axes, (spec.csv, spec.csv2)):
            _draw_distribution(ax, read_csv(path), path, spec)
            ax.set_title(path.name, fontsize=9)
    else:
        fig, ax = plt.subplots(figsize=(4.8, 3.2))
        table = read_csv(spec.csv)
        if spec.kind == "distribution":
            _draw_distribution(ax, table, spec.csv, spec)
        else:
            _draw_timetrace(ax, table, spec.csv, spec)
    if spec.title:
        fig.suptitle(spec.title, fontsize=10)
    fig.tight_layout()
    spec.out.parent.mkdir(parents=True, exist_ok=True)
    # empty metadata keeps the bytes free of timestamps
    fig.savefig(spec.out, dpi=150, metadata={})
    plt.close(fig)
    return spec.out


def main(argv: list[str] | None = None) -> int:
    args = sys.argv[1:] if argv is None else argv
    if len(args) != 1:
        print("usage: render_panel <spec-file>", file=sys.stderr)
        return 2
    spec_path = Path(args[0])
    try:
        if not spec_path.exists():
            raise PanelError(f"panel spec not found: {spec_path}")
        spec = parse_spec(spec_path.read_text(), spec_path.parent)
        out = render(spec)
    except PanelError as exc:
        print(f"panel error: {exc}", file=sys.stderr)
        return 2
    print(f"wrote {out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
