"""Static SVG figures and summary tables.

Everything here is deterministic: identical specs give byte-identical SVG
text.  Coordinates are written with two decimals and there are no
timestamps or random ids.
"""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Mapping, Optional, Sequence, Tuple
from xml.sax.saxutils import escape

import numpy as np

from .icons import ICONS
from .rough import GROUP_LABELS, Dendrogram

DATA_COLOR = "#d62728"
TREND_COLOR = "#000000"
BAND_COLOR = "#808080"
BAND_OPACITY = 0.4
PALETTE = ("#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd",
           "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf")
MAX_PANELS = 16
GRID_COLS = 4
KINDS = ("RawData", "StdData", "TrendOverlay", "TrendPanel", "GroupPanel", "Dendrogram", "IconTable")


class ReportError(ValueError):
    pass


@dataclass
class Series:
    y: np.ndarray
    color: str = TREND_COLOR
    width: float = 1.5
    label: str = ""


@dataclass
class Panel:
    title: str
    series: List[Series]
    band: Optional[Tuple[np.ndarray, np.ndarray]] = None
    members: List[str] = field(default_factory=list)


@dataclass
class SummaryRow:
    group: str
    target: str
    members: List[str]
    icon: int


@dataclass
class SummaryTable:
    rows: List[SummaryRow]

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["group", "target", "members", "icon", "icon_name"])
        for r in self.rows:
            w.writerow([r.group, r.target, " ".join(r.members), r.icon, ICONS[r.icon].name])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str) -> "SummaryTable":
        rows = []
        for rec in csv.DictReader(io.StringIO(text)):
            rows.append(SummaryRow(rec["group"], rec["target"], rec["members"].split(),
                                   int(rec["icon"])))
        return cls(rows)


@dataclass
class FigureSpec:
    """What to draw.

    ``panels`` drive every kind except Dendrogram (``dendrogram`` plus
    ``leaf_groups``) and IconTable (``table`` plus ``trends``).
    """

    kind: str
    x: Sequence[float] = ()
    panels: List[Panel] = field(default_factory=list)
    title: str = ""
    page_size: Tuple[float, float] = (1000.0, 760.0)
    dendrogram: Optional[Dendrogram] = None
    leaf_groups: Mapping[str, str] = field(default_factory=dict)
    table: Optional[SummaryTable] = None
    trends: Mapping[str, np.ndarray] = field(default_factory=dict)
    max_panels: int = MAX_PANELS
    shared_y: bool = False


def summary_table(assignment, icons: Mapping[str, int]) -> SummaryTable:
    """One row per target, groups ordered Downward, Upward, Flat."""
    rows = []
    for group in GROUP_LABELS:
        for target in assignment.group_targets.get(group, []):
            if target not in icons:
                raise ReportError(f"no icon for target {target}")
            rows.append(SummaryRow(group, target, list(assignment.memberships.get(target, [])),
                                   int(icons[target])))
    return SummaryTable(rows)


# ---------------------------------------------------------------------------
# SVG primitives


def _f(v: float) -> str:
    s = f"{v:.2f}".rstrip("0").rstrip(".")
    return "0" if s in ("-0", "") else s


def _label(v: float) -> str:
    if float(v).is_integer() and abs(v) < 1e15:
        return str(int(v))
    return f"{v:.4g}"


class _Canvas:
    def __init__(self, width: float, height: float):
        self.width, self.height = width, height
        self.parts: List[str] = []

    def add(self, s: str):
        self.parts.append(s)

    def text(self, x, y, s, size=11, anchor="middle", weight="normal", color="#000", rotate=None):
        tr = f' transform="rotate({_f(rotate)} {_f(x)} {_f(y)})"' if rotate is not None else ""
        bold = ' font-weight="bold"' if weight != "normal" else ""
        self.add(f'<text x="{_f(x)}" y="{_f(y)}" font-size="{_f(size)}" text-anchor="{anchor}" '
                 f'fill="{color}"{bold}{tr}>{escape(str(s))}</text>')

    def line(self, x1, y1, x2, y2, color="#000", width=1.0):
        self.add(f'<line x1="{_f(x1)}" y1="{_f(y1)}" x2="{_f(x2)}" y2="{_f(y2)}" '
                 f'stroke="{color}" stroke-width="{_f(width)}"/>')

    def rect(self, x, y, w, h, stroke="#000", fill="none", width=1.0):
        self.add(f'<rect x="{_f(x)}" y="{_f(y)}" width="{_f(w)}" height="{_f(h)}" '
                 f'fill="{fill}" stroke="{stroke}" stroke-width="{_f(width)}"/>')

    def polyline(self, pts, color, width=1.5):
        if len(pts) < 1:
            return
        coords = " ".join(f"{_f(x)},{_f(y)}" for x, y in pts)
        self.add(f'<polyline points="{coords}" fill="none" stroke="{color}" '
                 f'stroke-width="{_f(width)}" stroke-linejoin="round"/>')

    def polygon(self, pts, fill, opacity):
        coords = " ".join(f"{_f(x)},{_f(y)}" for x, y in pts)
        self.add(f'<polygon points="{coords}" fill="{fill}" fill-opacity="{_f(opacity)}" '
                 f'stroke="none"/>')

    def render(self) -> str:
        head = (f'<svg xmlns="http://www.w3.org/2000/svg" width="{_f(self.width)}" '
                f'height="{_f(self.height)}" viewBox="0 0 {_f(self.width)} {_f(self.height)}" '
                f'font-family="Helvetica, Arial, sans-serif">')
        body = "\n".join(self.parts)
        return (f'<?xml version="1.0" encoding="UTF-8"?>\n{head}\n'
                f'<rect width="100%" height="100%" fill="#fff"/>\n{body}\n</svg>\n')


def nice_ticks(lo: float, hi: float, n: int = 5) -> List[float]:
    if not (math.isfinite(lo) and math.isfinite(hi)):
        return []
    if hi <= lo:
        return [lo]
    raw = (hi - lo) / max(n - 1, 1)
    mag = 10 ** math.floor(math.log10(raw))
    step = next(m * mag for m in (1, 2, 2.5, 5, 10) if m * mag >= raw)
    start = math.ceil(lo / step - 1e-9) * step
    ticks = []
    v = start
    while v <= hi + 1e-9 * step:
        ticks.append(round(v, 12))
        v += step
    return ticks


def _segments(x: np.ndarray, y: np.ndarray):
    """Split at NaNs so gaps in raw data stay visible."""
    seg = []
    for xi, yi in zip(x, y):
        if np.isnan(yi):
            if seg:
                yield seg
            seg = []
        else:
            seg.append((xi, yi))
    if seg:
        yield seg


def _value_range(panels: Sequence[Panel]) -> Tuple[float, float]:
    ys = []
    for panel in panels:
        ys += [s.y for s in panel.series]
        if panel.band is not None:
            ys += list(panel.band)
    allv = np.concatenate([np.asarray(v, dtype=float) for v in ys]) if ys else np.zeros(1)
    allv = allv[np.isfinite(allv)]
    return (float(allv.min()), float(allv.max())) if allv.size else (0.0, 1.0)


def _draw_panel(c: _Canvas, box, x: np.ndarray, panel: Panel, yrange=None):
    left, top, w, h = box
    ylo, yhi = yrange if yrange is not None else _value_range([panel])
    if yhi - ylo < 1e-12:
        ylo, yhi = ylo - 1.0, yhi + 1.0
    pad = 0.05 * (yhi - ylo)
    ylo, yhi = ylo - pad, yhi + pad
    xlo, xhi = float(x[0]), float(x[-1])
    if xhi == xlo:
        xhi = xlo + 1.0

    def px(v):
        return left + (v - xlo) / (xhi - xlo) * w

    def py(v):
        return top + h - (v - ylo) / (yhi - ylo) * h

    c.rect(left, top, w, h, stroke="#444")
    c.text(left + w / 2, top - 5, panel.title, size=11, weight="bold")
    for t in nice_ticks(xlo, xhi, 4):
        c.line(px(t), top + h, px(t), top + h + 3, "#444")
        c.text(px(t), top + h + 13, _label(t), size=9)
    for t in nice_ticks(ylo, yhi, 5):
        c.line(left - 3, py(t), left, py(t), "#444")
        c.text(left - 5, py(t) + 3, _label(t), size=9, anchor="end")
    if panel.band is not None:
        lo, hi = panel.band
        pts = [(px(a), py(b)) for a, b in zip(x, hi)] + [(px(a), py(b)) for a, b in zip(x[::-1], lo[::-1])]
        c.polygon(pts, BAND_COLOR, BAND_OPACITY)
    for s in panel.series:
        for seg in _segments(x, np.asarray(s.y, dtype=float)):
            c.polyline([(px(a), py(b)) for a, b in seg], s.color, s.width)


def _grid_pages(spec: FigureSpec) -> List[str]:
    if not spec.panels:
        raise ReportError(f"{spec.kind}: nothing to draw")
    x = np.asarray(spec.x, dtype=float)
    W, H = spec.page_size
    pages = []
    per_page = spec.max_panels
    yrange = _value_range(spec.panels) if spec.shared_y else None
    chunks = [spec.panels[i:i + per_page] for i in range(0, len(spec.panels), per_page)]
    for pno, chunk in enumerate(chunks, start=1):
        cols = min(GRID_COLS, len(chunk))
        rows = math.ceil(len(chunk) / cols)
        c = _Canvas(W, H)
        title = spec.title if len(chunks) == 1 else f"{spec.title} ({pno}/{len(chunks)})"
        c.text(W / 2, 24, title, size=16, weight="bold")
        cell_w = (W - 40) / cols
        cell_h = (H - 60) / rows
        for k, panel in enumerate(chunk):
            r, q = divmod(k, cols)
            box = (40 + q * cell_w + 30, 50 + r * cell_h + 20, cell_w - 50, cell_h - 50)
            _draw_panel(c, box, x, panel, yrange)
        pages.append(c.render())
    return pages


def _overlay_page(spec: FigureSpec) -> List[str]:
    if not spec.panels or not spec.panels[0].series:
        raise ReportError(f"{spec.kind}: nothing to draw")
    W, H = spec.page_size
    c = _Canvas(W, H)
    c.text(W / 2, 24, spec.title, size=16, weight="bold")
    panel = spec.panels[0]
    _draw_panel(c, (70, 50, W - 230, H - 100), np.asarray(spec.x, dtype=float), panel)
    for k, s in enumerate(panel.series):
        y = 60 + 16 * k
        c.line(W - 145, y - 4, W - 120, y - 4, s.color, 2)
        c.text(W - 114, y, s.label, size=11, anchor="start")
    return [c.render()]


def _dendrogram_page(spec: FigureSpec) -> List[str]:
    d = spec.dendrogram
    if d is None or not d.leaves:
        raise ReportError("Dendrogram: no tree given")
    W, H = spec.page_size
    c = _Canvas(W, H)
    c.text(W / 2, 24, spec.title, size=16, weight="bold")
    n = len(d.leaves)
    order = d.leaf_order()
    left, top, w, h = 80.0, 50.0, W - 120.0, H - 130.0
    heights = [m.height for m in d.merges] or [1.0]
    hmax = max(heights) or 1.0
    xpos: Dict[int, float] = {}
    slot = w / n
    for i, name in enumerate(order):
        xpos[d.leaves.index(name)] = left + slot * (i + 0.5)

    def py(v):
        return top + h - v / hmax * h

    for t in nice_ticks(0.0, hmax, 5):
        c.line(left - 4, py(t), left, py(t), "#444")
        c.text(left - 6, py(t) + 3, _label(t), size=9, anchor="end")
    c.line(left, top, left, top + h, "#444")
    c.text(24, top + h / 2, "centroid distance of discriminant scores", size=11, rotate=-90)
    ypos = {i: py(0.0) for i in range(n)}
    for k, m in enumerate(d.merges):
        node = n + k
        xa, xb = xpos[m.left], xpos[m.right]
        ya, yb, ym = ypos[m.left], ypos[m.right], py(m.height)
        c.polyline([(xa, ya), (xa, ym), (xb, ym), (xb, yb)], "#000", 1.2)
        xpos[node] = (xa + xb) / 2
        ypos[node] = ym
    for i, name in enumerate(order):
        group = spec.leaf_groups.get(name, "")
        color = {"Upward": "#1f77b4", "Flat": "#2ca02c", "Downward": "#d62728"}.get(group, "#000")
        c.text(left + slot * (i + 0.5), top + h + 16, name, size=11, color=color)
    return [c.render()]


def _icon_points(icon: int, box) -> Optional[list]:
    left, top, w, h = box
    curve = ICONS[icon].curve(25)
    if curve is None:
        return None
    s = np.linspace(0, 1, 25)
    return [(left + a * w, top + h / 2 - b * h / 2.4) for a, b in zip(s, curve)]


def _icon_table_page(spec: FigureSpec) -> List[str]:
    table = spec.table
    if table is None or not table.rows:
        raise ReportError("IconTable: empty table")
    groups = [g for g in GROUP_LABELS if any(r.group == g for r in table.rows)]
    row_h, head_h = 70.0, 26.0
    W = spec.page_size[0]
    H = 70 + len(table.rows) * row_h + len(groups) * head_h
    c = _Canvas(W, H)
    c.text(W / 2, 24, spec.title, size=16, weight="bold")
    cols = (40.0, 160.0, 420.0, 700.0)
    for x, name in zip(cols, ("target", "group members", "trend", "icon")):
        c.text(x, 52, name, size=12, anchor="start", weight="bold")
    # one y-scale for every thumbnail so slopes compare across rows
    shown = [np.asarray(spec.trends[m], dtype=float)
             for r in table.rows for m in r.members if m in spec.trends]
    lo, hi = (float(min(v.min() for v in shown)), float(max(v.max() for v in shown))) if shown else (0.0, 1.0)
    span = hi - lo if hi > lo else 1.0
    y = 62.0
    for g in groups:
        c.text(cols[0], y + 18, g, size=13, anchor="start", weight="bold")
        y += head_h
        for r in (r for r in table.rows if r.group == g):
            c.line(30, y, W - 30, y, "#ccc")
            c.text(cols[0], y + row_h / 2 + 4, r.target, size=12, anchor="start")
            c.text(cols[1], y + row_h / 2 + 4, ", ".join(r.members), size=12, anchor="start")
            box = (cols[2], y + 8, 220.0, row_h - 16)
            curves = [np.asarray(spec.trends[m], dtype=float) for m in r.members if m in spec.trends]
            if curves:
                for k, cur in enumerate(curves):
                    s = np.linspace(0, 1, len(cur))
                    pts = [(box[0] + a * box[2], box[1] + box[3] - (b - lo) / span * box[3])
                           for a, b in zip(s, cur)]
                    c.polyline(pts, PALETTE[k % len(PALETTE)], 1.5)
            ibox = (cols[3], y + 10, 80.0, row_h - 20)
            c.rect(*ibox, stroke="#444")
            pts = _icon_points(r.icon, ibox)
            if pts is None:
                c.text(ibox[0] + ibox[2] / 2, ibox[1] + ibox[3] / 2 + 10, "?", size=28)
            else:
                c.polyline(pts, "#000", 3)
            c.text(cols[3] + 95, y + row_h / 2 + 4, f"icon {r.icon}", size=11, anchor="start")
            y += row_h
    return [c.render()]


def render_figure(spec: FigureSpec) -> List[str]:
    """SVG text of every page of a figure (one page unless panels overflow)."""
    if spec.kind not in KINDS:
        raise ReportError(f"unknown figure kind {spec.kind!r}")
    if spec.kind == "Dendrogram":
        return _dendrogram_page(spec)
    if spec.kind == "IconTable":
        return _icon_table_page(spec)
    if spec.kind == "TrendOverlay":
        return _overlay_page(spec)
    return _grid_pages(spec)


# ---------------------------------------------------------------------------
# figure builders for the workflow steps


def raw_data_spec(time_labels, variables: Mapping[str, np.ndarray],
                  titles: Mapping[str, str] | None = None) -> FigureSpec:
    titles = titles or {}
    panels = [Panel(titles.get(k, k), [Series(np.asarray(v, dtype=float), DATA_COLOR)], members=[k])
              for k, v in variables.items()]
    return FigureSpec("RawData", list(time_labels), panels, title="Observed data")


def std_data_spec(time_labels, variables: Mapping[str, np.ndarray]) -> FigureSpec:
    panels = [Panel(k, [Series(v, DATA_COLOR)], members=[k]) for k, v in variables.items()]
    return FigureSpec("StdData", list(time_labels), panels, title="Standardized data")


def trend_panel_spec(time_labels, variables: Mapping[str, np.ndarray], fits: Mapping) -> FigureSpec:
    panels = []
    for k, f in fits.items():
        panels.append(Panel(f"{k} (degree {f.degree})",
                            [Series(variables[k], DATA_COLOR, 1.2), Series(f.fitted, TREND_COLOR, 2.0)],
                            band=(f.band_lower, f.band_upper), members=[k]))
    return FigureSpec("TrendPanel", list(time_labels), panels,
                      title="Standardized data, trends and 95% bands")


def trend_overlay_spec(time_labels, fits: Mapping) -> FigureSpec:
    series = [Series(f.fitted, PALETTE[i % len(PALETTE)], 2.0, k) for i, (k, f) in enumerate(fits.items())]
    return FigureSpec("TrendOverlay", list(time_labels), [Panel("", series)], title="Estimated trends")


def group_panel_spec(time_labels, fits: Mapping, groups: Mapping[str, str], title: str) -> FigureSpec:
    panels = []
    for g in ("Upward", "Flat", "Downward"):
        members = [v for v, lab in groups.items() if lab == g]
        if not members:
            continue
        series = [Series(fits[v].fitted, PALETTE[i % len(PALETTE)], 2.0, v) for i, v in enumerate(members)]
        panels.append(Panel(f"{g}: {', '.join(members)}", series, members=members))
    return FigureSpec("GroupPanel", list(time_labels), panels, title=title,
                      page_size=(1000.0, 400.0), shared_y=True)


def dendrogram_spec(dend: Dendrogram, groups: Mapping[str, str]) -> FigureSpec:
    return FigureSpec("Dendrogram", dendrogram=dend, leaf_groups=dict(groups),
                      title="Centroid-linkage dendrogram of discriminant scores",
                      page_size=(900.0, 560.0))


def icon_table_spec(table: SummaryTable, fits: Mapping) -> FigureSpec:
    trends = {k: f.fitted for k, f in fits.items()}
    return FigureSpec("IconTable", table=table, trends=trends, title="Common trends and icons")


def write_pages(pages: Sequence[str], outdir, stem: str, numbered: bool = True) -> List[str]:
    """Write pages as ``stem_1.svg``, ``stem_2.svg``... (or ``stem.svg``)."""
    paths = []
    for i, page in enumerate(pages, start=1):
        name = f"{stem}_{i}.svg" if numbered else (f"{stem}.svg" if i == 1 else f"{stem}_{i}.svg")
        path = Path(outdir) / name
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(page)
        paths.append(str(path))
    return paths
