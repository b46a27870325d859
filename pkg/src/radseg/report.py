"""Comparison tables, long-form CSV and SVG charts over several evaluation runs."""

from __future__ import annotations

import math
from dataclasses import dataclass
from html import escape

from radseg.errors import BinMismatch
from radseg.evaluate import METRICS, TABLE_SNRS, EvalReport

# Published test-set means (percent) at -20/-15/-10/-5 dB, for side-by-side
# display only. Desk-scale runs are not expected to reach them.
REFERENCE_ROWS: dict[tuple[str, int | None], dict[str, tuple[float, ...]]] = {
    ("UNet1D", None): {"f1": (58.3, 84.9, 96.8, 98.4), "dice": (67.6, 86.9, 96.4, 97.7),
                       "iou": (66.0, 85.2, 95.7, 97.3)},
    ("MS-UNet1D", 1): {"f1": (65.8, 89.2, 98.1, 99.1), "dice": (77.4, 93.1, 98.9, 99.2),
                       "iou": (76.3, 92.0, 98.5, 99.0)},
    ("MS-UNet1D", 2): {"f1": (69.6, 89.3, 98.0, 99.2), "dice": (79.3, 93.6, 98.8, 99.4),
                       "iou": (78.2, 92.5, 98.3, 99.2)},
    ("TCN", None): {"f1": (62.7, 90.0, 98.1, 99.1), "dice": (74.8, 93.3, 98.7, 98.9),
                    "iou": (73.4, 92.2, 98.3, 98.7)},
    ("MS-TCN", 1): {"f1": (64.4, 91.1, 98.0, 99.4), "dice": (73.2, 93.8, 99.0, 99.6),
                    "iou": (71.9, 92.7, 98.6, 99.4)},
    ("MS-TCN", 2): {"f1": (66.1, 91.8, 98.5, 99.3), "dice": (74.4, 94.8, 98.9, 99.5),
                    "iou": (73.3, 93.7, 98.5, 99.3)},
}

METRIC_NAMES = {"f1": "F1", "dice": "Dice", "iou": "IoU"}
_ARCH_NAMES = {"ms_unet1d": "MS-UNet1D", "ms_tcn": "MS-TCN"}


@dataclass
class Run:
    """One evaluated model with the labels used in tables and legends."""
    name: str
    stages: int | None
    report: EvalReport

    @classmethod
    def from_report(cls, report: EvalReport, name: str | None = None) -> "Run":
        meta = report.metadata
        arch = meta.get("architecture") or {}
        stages = meta.get("stages", arch.get("stages"))
        if name is None:
            name = meta.get("model") or _ARCH_NAMES.get(arch.get("arch"), arch.get("arch", "model"))
        return cls(name, None if stages is None else int(stages), report)

    @property
    def label(self) -> str:
        return self.name if self.stages is None else f"{self.name} ({self.stages})"


def check_bins(runs: list[Run]):
    if not runs:
        return
    first = runs[0].report.bins
    for r in runs[1:]:
        if r.report.bins != first:
            raise BinMismatch(f"{r.label} has SNR bins {r.report.bins}, {runs[0].label} has {first}")


def _pct(v) -> str:
    return "-" if v is None else f"{100.0 * v:.1f}"


def report_table(runs: list[Run], snrs=TABLE_SNRS, reference: bool = True) -> str:
    """Plain-text table: one row per run, F1/Dice/IoU groups at each SNR in percent."""
    check_bins(runs)
    snrs = [float(s) for s in snrs]
    threshold = runs[0].report.threshold if runs else 0.5
    f1_average = runs[0].report.f1_average if runs else "micro"
    head_cells = [f"{METRIC_NAMES[m]}@{s:g}" for m in METRICS for s in snrs]
    widths = [max(18, *(len(r.label) for r in runs))] if runs else [18]
    lines = [
        f"# threshold {threshold:g}; F1 {f1_average} over channels and samples; "
        "Dice/IoU per channel, channels empty in both masks skipped",
        f"{'Model':<{widths[0]}} {'Stages':>6} " + " ".join(f"{c:>9}" for c in head_cells),
    ]
    for r in runs:
        summary = r.report.summary(snrs)
        cells = [_pct(summary[m][s]) for m in METRICS for s in snrs]
        st = "-" if r.stages is None else str(r.stages)
        lines.append(f"{r.label:<{widths[0]}} {st:>6} " + " ".join(f"{c:>9}" for c in cells))
    if reference and tuple(snrs) == TABLE_SNRS:
        lines.append("")
        lines.append("# published reference (large-scale training; shown for comparison only)")
        for (name, stages), row in REFERENCE_ROWS.items():
            cells = [f"{v:.1f}" for m in METRICS for v in row[m]]
            st = "-" if stages is None else str(stages)
            lines.append(f"{name:<{widths[0]}} {st:>6} " + " ".join(f"{c:>9}" for c in cells))
    return "\n".join(lines) + "\n"


def report_csv(runs: list[Run]) -> str:
    """Long-form CSV over every SNR bin: model, stages, metric, snr_db, mean, std, n."""
    check_bins(runs)
    lines = ["model,stages,metric,snr_db,mean,std,n"]
    for r in runs:
        st = "" if r.stages is None else str(r.stages)
        for row in r.report.rows:
            for m in METRICS:
                mean = "" if row.mean[m] is None else repr(float(row.mean[m]))
                std = "" if row.std[m] is None else repr(float(row.std[m]))
                lines.append(f"{r.name},{st},{m},{row.snr_db:g},{mean},{std},{row.n[m]}")
    return "\n".join(lines) + "\n"


_COLOURS = ("#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf")


def render_svg(runs: list[Run], metrics=METRICS, panel_w: int = 320, panel_h: int = 240) -> str:
    """SVG with one panel per metric: mean curves over SNR with shaded +-1 std bands."""
    check_bins(runs)
    margin = 40
    legend_h = 18 * max(1, len(runs)) + 10
    width = len(metrics) * (panel_w + margin) + margin
    height = panel_h + 2 * margin + legend_h
    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
           f'viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="11">',
           f'<rect width="{width}" height="{height}" fill="white"/>']
    bins = runs[0].report.bins if runs else []
    lo, hi = (min(bins), max(bins)) if bins else (0.0, 1.0)
    if hi == lo:
        lo, hi = lo - 1.0, hi + 1.0
    for p, m in enumerate(metrics):
        x0 = margin + p * (panel_w + margin)
        y0 = margin

        def sx(v, x0=x0):
            return x0 + (v - lo) / (hi - lo) * panel_w

        def sy(v, y0=y0):
            return y0 + (1.0 - v) * panel_h

        out.append(f'<rect x="{x0}" y="{y0}" width="{panel_w}" height="{panel_h}" fill="none" stroke="#444"/>')
        out.append(f'<text x="{x0 + panel_w / 2}" y="{y0 - 8}" text-anchor="middle">{escape(METRIC_NAMES.get(m, m))}</text>')
        for t in (0.0, 0.5, 1.0):
            out.append(f'<text x="{x0 - 4}" y="{sy(t) + 4:.1f}" text-anchor="end">{t:g}</text>')
        for t in (lo, (lo + hi) / 2, hi):
            out.append(f'<text x="{sx(t):.1f}" y="{y0 + panel_h + 14}" text-anchor="middle">{t:g}</text>')
        out.append(f'<text x="{x0 + panel_w / 2}" y="{y0 + panel_h + 28}" text-anchor="middle">SNR (dB)</text>')
        for k, r in enumerate(runs):
            colour = _COLOURS[k % len(_COLOURS)]
            pts = [(row.snr_db, row.mean[m], row.std[m]) for row in r.report.rows
                   if row.mean[m] is not None and not math.isnan(row.mean[m])]
            if not pts:
                continue
            upper = [f"{sx(s):.2f},{sy(min(1.0, mu + sd)):.2f}" for s, mu, sd in pts]
            lower = [f"{sx(s):.2f},{sy(max(0.0, mu - sd)):.2f}" for s, mu, sd in reversed(pts)]
            out.append(f'<polygon points="{" ".join(upper + lower)}" fill="{colour}" fill-opacity="0.2" stroke="none"/>')
            line = " ".join(f"{sx(s):.2f},{sy(mu):.2f}" for s, mu, _ in pts)
            out.append(f'<polyline points="{line}" fill="none" stroke="{colour}" stroke-width="1.5"/>')
            for s, mu, _ in pts:
                out.append(f'<circle cx="{sx(s):.2f}" cy="{sy(mu):.2f}" r="2" fill="{colour}"/>')
    ly = margin + panel_h + 44
    for k, r in enumerate(runs):
        colour = _COLOURS[k % len(_COLOURS)]
        y = ly + 18 * k
        out.append(f'<line x1="{margin}" y1="{y}" x2="{margin + 20}" y2="{y}" stroke="{colour}" stroke-width="2"/>')
        out.append(f'<text x="{margin + 26}" y="{y + 4}">{escape(r.label)}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"
