#!/usr/bin/env python3
"""Shaded-band figures from experiment summary CSVs.

Consumes the harness summary schema
(sweep_param,sweep_value,estimator,mean_rel_bias,std_rel_bias,n_ok,n_skipped)
and draws one mean-relative-bias line per estimator with a +-1 std band, a
zero reference line, and a legend.

Two files are written per invocation: a PNG raster and an SVG vector. The
SVG's data layer is emitted in *data coordinates* inside a transformed
group, so the plotted series can be read back from the file at full float
precision.

Usage:
    render.py --in summary.csv --x r --out fig.png [--title "..."]
"""

from __future__ import annotations

import argparse
import csv
import sys
from dataclasses import dataclass, field
from pathlib import Path
from xml.sax.saxutils import escape

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
from matplotlib.ticker import MaxNLocator

EXPECTED_HEADER = [
    "sweep_param",
    "sweep_value",
    "estimator",
    "mean_rel_bias",
    "std_rel_bias",
    "n_ok",
    "n_skipped",
]

# interpolation variants in blues/greens, baselines in warm/dark colors
DEFAULT_COLORS = {
    "pi_crd_k": "#1f77b4",
    "pi_brd_khat": "#2ca02c",
    "pi_brd_p": "#17becf",
    "two_point": "#aec7e8",
    "dm": "#d62728",
    "dm_thresh": "#ff7f0e",
    "ls_num": "#9467bd",
    "ls_prop": "#8c564b",
}
FALLBACK_COLOR = "#7f7f7f"
DEFAULT_LABELS = {
    "pi_crd_k": "PI (CRD targets)",
    "pi_brd_khat": "PI (realized counts)",
    "pi_brd_p": "PI (Bernoulli targets)",
    "two_point": "Two-point linear",
    "dm": "Difference in means",
    "dm_thresh": "DM (threshold)",
    "ls_num": "LS (count)",
    "ls_prop": "LS (proportion)",
}

WIDTH, HEIGHT = 720, 480
MARGIN_LEFT, MARGIN_RIGHT, MARGIN_TOP, MARGIN_BOTTOM = 78, 24, 46, 56


class SchemaError(ValueError):
    """The input CSV does not match the expected summary schema."""


@dataclass
class FigureSpec:
    input_csv: Path
    x_param: str
    output: Path
    title: str = ""
    colors: dict = field(default_factory=lambda: dict(DEFAULT_COLORS))
    labels: dict = field(default_factory=lambda: dict(DEFAULT_LABELS))


@dataclass
class Series:
    estimator: str
    xs: list[float]
    means: list[float]
    stds: list[float]


def load_summary(path: Path) -> list[dict]:
    if not path.exists():
        raise SchemaError(f"summary file not found: {path}")
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        rows = list(reader)
    if not rows or rows[0] != EXPECTED_HEADER:
        raise SchemaError(
            f"unexpected header in {path}; expected: {','.join(EXPECTED_HEADER)}"
        )
    records = [dict(zip(EXPECTED_HEADER, row)) for row in rows[1:] if row]
    if not records:
        raise SchemaError(f"no data rows in {path}; expected: {','.join(EXPECTED_HEADER)}")
    return records


def collect_series(records: list[dict], x_param: str) -> list[Series]:
    params = {record["sweep_param"] for record in records}
    if params != {x_param}:
        raise SchemaError(
            f"x-axis parameter {x_param!r} does not match sweep_param column {sorted(params)}"
        )
    by_tag: dict[str, list[tuple[float, float, float]]] = {}
    for record in records:
        if record["mean_rel_bias"] == "" or record["std_rel_bias"] == "":
            continue  # group with no usable draws
        by_tag.setdefault(record["estimator"], []).append(
            (
                float(record["sweep_value"]),
                float(record["mean_rel_bias"]),
                float(record["std_rel_bias"]),
            )
        )
    series = []
    for tag in sorted(by_tag):
        points = sorted(by_tag[tag])
        series.append(
            Series(
                estimator=tag,
                xs=[p[0] for p in points],
                means=[p[1] for p in points],
                stds=[p[2] for p in points],
            )
        )
    if not series:
        raise SchemaError("every summary group is empty; nothing to plot")
    return series


def _color(spec: FigureSpec, tag: str) -> str:
    return spec.colors.get(tag, FALLBACK_COLOR)


def _label(spec: FigureSpec, tag: str) -> str:
    return spec.labels.get(tag, tag)


def _axis_range(values: list[float]) -> tuple[float, float]:
    lo, hi = min(values), max(values)
    if lo == hi:
        lo, hi = lo - 0.5, hi + 0.5
    pad = 0.06 * (hi - lo)
    return lo - pad, hi + pad


def _svg_header(spec: FigureSpec, x_lim, y_lim) -> list[str]:
    x0, x1 = x_lim
    y0, y1 = y_lim
    plot_w = WIDTH - MARGIN_LEFT - MARGIN_RIGHT
    plot_h = HEIGHT - MARGIN_TOP - MARGIN_BOTTOM
    sx = plot_w / (x1 - x0)
    sy = plot_h / (y1 - y0)
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
        f'viewBox="0 0 {WIDTH} {HEIGHT}">',
        f'<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
    ]
    # ticks and frame live in display coordinates
    xticks = [t for t in MaxNLocator(nbins=6).tick_values(x0, x1) if x0 <= t <= x1]
    yticks = [t for t in MaxNLocator(nbins=7).tick_values(y0, y1) if y0 <= t <= y1]

    def to_disp(x, y):
        return MARGIN_LEFT + (x - x0) * sx, MARGIN_TOP + (y1 - y) * sy

    for t in xticks:
        dx, _ = to_disp(t, y0)
        parts.append(
            f'<line x1="{dx:.2f}" y1="{HEIGHT - MARGIN_BOTTOM}" x2="{dx:.2f}" '
            f'y2="{HEIGHT - MARGIN_BOTTOM + 5}" stroke="black" stroke-width="1"/>'
        )
        parts.append(
            f'<text x="{dx:.2f}" y="{HEIGHT - MARGIN_BOTTOM + 20}" text-anchor="middle" '
            f'font-family="sans-serif" font-size="12">{t:g}</text>'
        )
    for t in yticks:
        _, dy = to_disp(x0, t)
        parts.append(
            f'<line x1="{MARGIN_LEFT - 5}" y1="{dy:.2f}" x2="{MARGIN_LEFT}" y2="{dy:.2f}" '
            f'stroke="black" stroke-width="1"/>'
        )
        parts.append(
            f'<text x="{MARGIN_LEFT - 9}" y="{dy:.2f}" text-anchor="end" dominant-baseline="middle" '
            f'font-family="sans-serif" font-size="12">{t:g}</text>'
        )
    if y0 < 0 < y1:
        _, zero_y = to_disp(x0, 0.0)
        parts.append(
            f'<line x1="{MARGIN_LEFT}" y1="{zero_y:.2f}" x2="{WIDTH - MARGIN_RIGHT}" '
            f'y2="{zero_y:.2f}" stroke="#555555" stroke-width="1" stroke-dasharray="5,4"/>'
        )
    parts.append(
        f'<rect x="{MARGIN_LEFT}" y="{MARGIN_TOP}" width="{plot_w}" height="{plot_h}" '
        f'fill="none" stroke="black" stroke-width="1"/>'
    )
    parts.append(
        f'<text x="{(MARGIN_LEFT + WIDTH - MARGIN_RIGHT) / 2:.1f}" y="{HEIGHT - 14}" '
        f'text-anchor="middle" font-family="sans-serif" font-size="14">{escape(spec.x_param)}</text>'
    )
    parts.append(
        f'<text x="18" y="{(MARGIN_TOP + HEIGHT - MARGIN_BOTTOM) / 2:.1f}" text-anchor="middle" '
        f'font-family="sans-serif" font-size="14" '
        f'transform="rotate(-90 18 {(MARGIN_TOP + HEIGHT - MARGIN_BOTTOM) / 2:.1f})">relative bias</text>'
    )
    if spec.title:
        parts.append(
            f'<text x="{WIDTH / 2:.1f}" y="26" text-anchor="middle" font-family="sans-serif" '
            f'font-size="16">{escape(spec.title)}</text>'
        )
    return parts


def build_svg(spec: FigureSpec, series: list[Series]) -> str:
    xs_all = [x for s in series for x in s.xs]
    ys_all = [m + sd for s in series for m, sd in zip(s.means, s.stds)]
    ys_all += [m - sd for s in series for m, sd in zip(s.means, s.stds)]
    ys_all.append(0.0)
    x_lim = _axis_range(xs_all)
    y_lim = _axis_range(ys_all)

    parts = _svg_header(spec, x_lim, y_lim)

    plot_w = WIDTH - MARGIN_LEFT - MARGIN_RIGHT
    plot_h = HEIGHT - MARGIN_TOP - MARGIN_BOTTOM
    sx = plot_w / (x_lim[1] - x_lim[0])
    sy = plot_h / (y_lim[1] - y_lim[0])
    # data -> display affine map: x' = sx*x + e, y' = -sy*y + f
    e = MARGIN_LEFT - x_lim[0] * sx
    f = MARGIN_TOP + y_lim[1] * sy
    parts.append(
        f'<g id="data-layer" transform="matrix({sx!r} 0 0 {-sy!r} {e!r} {f!r})">'
    )
    for s in series:
        color = _color(spec, s.estimator)
        lower = [(x, m - sd) for x, m, sd in zip(s.xs, s.means, s.stds)]
        upper = [(x, m + sd) for x, m, sd in zip(s.xs, s.means, s.stds)]
        band_points = " ".join(f"{x!r},{y!r}" for x, y in lower + upper[::-1])
        mean_points = " ".join(f"{x!r},{y!r}" for x, y in zip(s.xs, s.means))
        parts.append(f'<g id="series-{escape(s.estimator)}">')
        parts.append(
            f'<polygon id="band-{escape(s.estimator)}" points="{band_points}" '
            f'fill="{color}" fill-opacity="0.2" stroke="none"/>'
        )
        parts.append(
            f'<polyline id="mean-{escape(s.estimator)}" points="{mean_points}" fill="none" '
            f'stroke="{color}" stroke-width="1.8" vector-effect="non-scaling-stroke"/>'
        )
        parts.append("</g>")
    parts.append("</g>")

    # legend, top-right inside the frame
    legend_x = WIDTH - MARGIN_RIGHT - 190
    legend_y = MARGIN_TOP + 14
    for index, s in enumerate(series):
        y = legend_y + 18 * index
        color = _color(spec, s.estimator)
        parts.append(
            f'<line x1="{legend_x}" y1="{y}" x2="{legend_x + 24}" y2="{y}" '
            f'stroke="{color}" stroke-width="2.5"/>'
        )
        parts.append(
            f'<text x="{legend_x + 30}" y="{y + 4}" font-family="sans-serif" '
            f'font-size="12">{escape(_label(spec, s.estimator))}</text>'
        )
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def render_png(spec: FigureSpec, series: list[Series], destination: Path) -> None:
    fig, ax = plt.subplots(figsize=(WIDTH / 96, HEIGHT / 96), dpi=96)
    for s in series:
        color = _color(spec, s.estimator)
        lower = [m - sd for m, sd in zip(s.means, s.stds)]
        upper = [m + sd for m, sd in zip(s.means, s.stds)]
        ax.fill_between(s.xs, lower, upper, color=color, alpha=0.2, linewidth=0)
        ax.plot(s.xs, s.means, color=color, label=_label(spec, s.estimator), linewidth=1.8)
    ax.axhline(0.0, color="#555555", linewidth=1, linestyle="--")
    ax.set_xlabel(spec.x_param)
    ax.set_ylabel("relative bias")
    if spec.title:
        ax.set_title(spec.title)
    ax.legend(fontsize=9)
    fig.tight_layout()
    fig.savefig(destination, format="png")
    plt.close(fig)


def render(spec: FigureSpec) -> tuple[Path, Path]:
    """Render the figure; returns (raster path, vector path)."""
    records = load_summary(Path(spec.input_csv))
    series = collect_series(records, spec.x_param)
    raster = Path(spec.output)
    vector = raster.with_suffix(".svg")
    render_png(spec, series, raster)
    vector.write_text(build_svg(spec, series), encoding="utf-8")
    return raster, vector


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--in", dest="input_csv", required=True)
    parser.add_argument("--x", dest="x_param", required=True)
    parser.add_argument("--out", dest="output", required=True)
    parser.add_argument("--title", default="")
    args = parser.parse_args(argv)
    spec = FigureSpec(
        input_csv=Path(args.input_csv),
        x_param=args.x_param,
        output=Path(args.output),
        title=args.title,
    )
    try:
        raster, vector = render(spec)
    except SchemaError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    print(f"wrote {raster} and {vector}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
