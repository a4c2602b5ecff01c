"""Dependency-free SVG box plots of the benchmark summary."""

from __future__ import annotations

import math
from xml.sax.saxutils import escape

FIGURES = {
    "fig2": ("beta_sq_T_sq", "bits_per_subpulse", "Normalized RMS bandwidth vs. data rate"),
    "fig3": ("beta_sq_T_sq", "complexity", "Normalized RMS bandwidth vs. detector complexity"),
    "fig4": ("psl", "bits_per_subpulse", "Peak sidelobe level vs. data rate"),
    "fig5": ("psl", "complexity", "Peak sidelobe level vs. detector complexity"),
}

_LABELS = {
    "beta_sq_T_sq": "beta^2 T^2",
    "psl": "PSL (linear)",
    "bits_per_subpulse": "bits per subpulse",
    "complexity": "operations per subpulse (log2)",
}

_COLORS = ["#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2"]

W, H = 720, 480
ML, MR, MT, MB = 80, 170, 40, 60


def _ticks(lo, hi, n=5):
    if hi <= lo:
        hi = lo + 1.0
    raw = (hi - lo) / n
    mag = 10 ** math.floor(math.log10(raw))
    step = min((s * mag for s in (1, 2, 2.5, 5, 10) if s * mag >= raw), default=10 * mag)
    start = math.floor(lo / step) * step
    out, v = [], start
    while v <= hi + 1e-9 * step:
        out.append(round(v, 12))
        v += step
    return out


def _fmt(v):
    return f"{v:.4g}"


def render_box_figure(summary: dict, metric: str, xkey: str, title: str) -> str:
    schemes = list(summary["schemes"].items())
    logx = xkey == "complexity"

    def xval(s):
        v = float(s[xkey])
        return math.log2(v) if logx else v

    xs = [xval(s) for _, s in schemes]
    ys = []
    for _, s in schemes:
        b = s[metric]
        ys += [b["whisker_low"], b["whisker_high"], *b["outliers"]]
    xlo, xhi = min(xs), max(xs)
    pad = max(0.5, 0.08 * (xhi - xlo))
    xlo, xhi = xlo - pad, xhi + pad
    ylo, yhi = min(ys), max(ys)
    ypad = 0.06 * (yhi - ylo) or max(abs(yhi) * 0.05, 1e-3)
    ylo, yhi = ylo - ypad, yhi + ypad

    pw, ph = W - ML - MR, H - MT - MB

    def px(x):
        return ML + (x - xlo) / (xhi - xlo) * pw

    def py(y):
        return MT + (1 - (y - ylo) / (yhi - ylo)) * ph

    # schemes that share an x position are spread horizontally
    groups = {}
    for i, x in enumerate(xs):
        groups.setdefault(round(x, 9), []).append(i)
    half = min(14.0, pw / (4 * max(len(groups), 1)))
    offset = {}
    for members in groups.values():
        k = len(members)
        for j, i in enumerate(members):
            offset[i] = (j - (k - 1) / 2) * (2.4 * half)

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="12">',
        f"<title>{escape(title)}</title>",
        f'<rect x="0" y="0" width="{W}" height="{H}" fill="white"/>',
        f'<text x="{W / 2:.1f}" y="22" text-anchor="middle" font-size="15">{escape(title)}</text>',
        f'<rect x="{ML}" y="{MT}" width="{pw}" height="{ph}" fill="none" stroke="black"/>',
    ]
    for t in _ticks(ylo, yhi):
        if ylo <= t <= yhi:
            y = py(t)
            out.append(f'<line x1="{ML - 5}" y1="{y:.2f}" x2="{ML}" y2="{y:.2f}" stroke="black"/>')
            out.append(f'<text x="{ML - 8}" y="{y + 4:.2f}" text-anchor="end">{_fmt(t)}</text>')
    for t in _ticks(xlo, xhi):
        if xlo <= t <= xhi:
            x = px(t)
            out.append(f'<line x1="{x:.2f}" y1="{MT + ph}" x2="{x:.2f}" y2="{MT + ph + 5}" stroke="black"/>')
            out.append(f'<text x="{x:.2f}" y="{MT + ph + 18}" text-anchor="middle">{_fmt(t)}</text>')
    out.append(f'<text x="{ML + pw / 2:.1f}" y="{H - 15}" text-anchor="middle">{escape(_LABELS[xkey])}</text>')
    out.append(
        f'<text x="20" y="{MT + ph / 2:.1f}" text-anchor="middle" transform="rotate(-90 20 {MT + ph / 2:.1f})">{escape(_LABELS[metric])}</text>'
    )

    for i, (name, s) in enumerate(schemes):
        b = s[metric]
        c = _COLORS[i % len(_COLORS)]
        cx = px(xs[i]) + offset[i]
        x0, x1 = cx - half, cx + half
        out.append(f'<g class="box" data-scheme="{escape(name)}" stroke="{c}" fill="none">')
        out.append(f'<line x1="{cx:.2f}" y1="{py(b["whisker_low"]):.2f}" x2="{cx:.2f}" y2="{py(b["q1"]):.2f}"/>')
        out.append(f'<line x1="{cx:.2f}" y1="{py(b["q3"]):.2f}" x2="{cx:.2f}" y2="{py(b["whisker_high"]):.2f}"/>')
        for w in (b["whisker_low"], b["whisker_high"]):
            out.append(f'<line x1="{cx - half / 2:.2f}" y1="{py(w):.2f}" x2="{cx + half / 2:.2f}" y2="{py(w):.2f}"/>')
        top, bot = py(b["q3"]), py(b["q1"])
        out.append(f'<rect x="{x0:.2f}" y="{top:.2f}" width="{x1 - x0:.2f}" height="{max(bot - top, 0.5):.2f}" fill="{c}" fill-opacity="0.25"/>')
        out.append(f'<line x1="{x0:.2f}" y1="{py(b["median"]):.2f}" x2="{x1:.2f}" y2="{py(b["median"]):.2f}" stroke-width="2"/>')
        out.append(f'<circle class="mean" cx="{cx:.2f}" cy="{py(b["mean"]):.2f}" r="3" fill="{c}"/>')
        for o in b["outliers"]:
            out.append(f'<circle class="outlier" cx="{cx:.2f}" cy="{py(o):.2f}" r="2.5"/>')
        out.append("</g>")
        ly = MT + 10 + 20 * i
        out.append(f'<rect x="{W - MR + 15}" y="{ly:.1f}" width="12" height="12" fill="{c}" fill-opacity="0.6"/>')
        out.append(f'<text x="{W - MR + 33}" y="{ly + 10:.1f}">{escape(name)}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def render_figures(summary: dict) -> dict:
    return {name: render_box_figure(summary, m, x, t) for name, (m, x, t) in FIGURES.items()}
