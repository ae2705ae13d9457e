"""Deterministic SVG renderer for the criterion-prevalence forest plot.

One row per determinant category, one color per criterion; each entry is
a point at the estimated proportion with a horizontal whisker spanning
the bootstrap confidence interval on a shared [0, 1] axis. The output is
a plain hand-assembled SVG string with fixed formatting, so identical
inputs yield identical bytes.
"""

_COLORS = (
    "#1f77b4",  # blue
    "#d62728",  # red
    "#2ca02c",  # green
    "#9467bd",  # purple
    "#ff7f0e",  # orange
    "#8c564b",  # brown
    "#17becf",
    "#7f7f7f",
)

_LEFT = 190.0
_PLOT_W = 480.0
_ROW_PAD = 6.0
_LANE_H = 9.0
_TOP = 64.0


def _x(p):
    return _LEFT + p * _PLOT_W


def _fmt(v):
    return f"{v:.2f}"


def render_forest_svg(data, title="Criterion prevalence by subgroup (95% CI)"):
    """Render forest-plot data (ForestDatum sequence) to an SVG string."""
    criteria = []
    rows = []
    for d in data:
        if d.criterion not in criteria:
            criteria.append(d.criterion)
        key = (d.determinant, d.category)
        if key not in rows:
            rows.append(key)
    lanes = max(1, len(criteria))
    row_h = lanes * _LANE_H + 2 * _ROW_PAD
    height = _TOP + len(rows) * row_h + 40.0
    width = _LEFT + _PLOT_W + 40.0
    color_of = {c: _COLORS[i % len(_COLORS)] for i, c in enumerate(criteria)}
    cells = {(d.determinant, d.category, d.criterion): d for d in data}

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width:.0f}" height="{height:.0f}" '
        f'font-family="sans-serif" font-size="11">',
        f'<text x="{_LEFT:.1f}" y="18" font-size="14">{title}</text>',
    ]
    # legend
    lx = _LEFT
    for crit in criteria:
        parts.append(f'<rect x="{lx:.1f}" y="28" width="10" height="10" fill="{color_of[crit]}"/>')
        parts.append(f'<text x="{lx + 14:.1f}" y="37">{crit}</text>')
        lx += 14 + 7.0 * len(crit) + 18
    # axis
    axis_y = height - 22.0
    parts.append(
        f'<line x1="{_x(0):.1f}" y1="{_TOP:.1f}" x2="{_x(0):.1f}" y2="{axis_y:.1f}" stroke="#999"/>'
    )
    for tick in (0.0, 0.25, 0.5, 0.75, 1.0):
        parts.append(
            f'<line x1="{_x(tick):.1f}" y1="{axis_y:.1f}" x2="{_x(tick):.1f}" y2="{axis_y + 5:.1f}" stroke="#333"/>'
        )
        parts.append(f'<text x="{_x(tick) - 8:.1f}" y="{axis_y + 16:.1f}">{_fmt(tick)}</text>')
    parts.append(
        f'<line x1="{_x(0):.1f}" y1="{axis_y:.1f}" x2="{_x(1):.1f}" y2="{axis_y:.1f}" stroke="#333"/>'
    )

    prev_det = None
    for r, (det, cat) in enumerate(rows):
        y0 = _TOP + r * row_h
        if det != prev_det:
            parts.append(f'<text x="6" y="{y0 + row_h / 2 + 4:.1f}" font-weight="bold">{det}</text>')
            prev_det = det
        parts.append(f'<text x="78" y="{y0 + row_h / 2 + 4:.1f}">{cat}</text>')
        if r % 2 == 0:
            parts.append(
                f'<rect x="{_LEFT:.1f}" y="{y0:.1f}" width="{_PLOT_W:.1f}" height="{row_h:.1f}" '
                f'fill="#000" opacity="0.04"/>'
            )
        for lane, crit in enumerate(criteria):
            d = cells.get((det, cat, crit))
            cy = y0 + _ROW_PAD + lane * _LANE_H + _LANE_H / 2
            if d is None or d.ci is None:
                parts.append(f'<text x="{_x(0) + 4:.1f}" y="{cy + 3:.1f}" fill="#999">n/a</text>')
                continue
            color = color_of[crit]
            parts.append(
                f'<line x1="{_x(d.ci.lo):.2f}" y1="{cy:.2f}" x2="{_x(d.ci.hi):.2f}" y2="{cy:.2f}" '
                f'stroke="{color}" stroke-width="1.5"/>'
            )
            parts.append(f'<circle cx="{_x(d.ci.point):.2f}" cy="{cy:.2f}" r="2.6" fill="{color}"/>')
    parts.append("</svg>")
    return "\n".join(parts) + "\n"
