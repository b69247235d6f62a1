"""Minimal deterministic SVG output: line plots, bar charts and maps.

Every element that tests or downstream tools may want to find carries a
``class`` attribute (``curve``, ``bar``, ``cell``, ``vessel legal`` ...).
"""
from __future__ import annotations

from xml.sax.saxutils import escape

PALETTE = ("#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f")


def _f(x: float) -> str:
    return f"{x:.2f}"


class Svg:
    def __init__(self, width, height):
        self.width, self.height = width, height
        self.parts = []

    def add(self, tag, text=None, **attrs):
        attr = " ".join(f'{k.rstrip("_").replace("_", "-")}="{escape(str(v))}"' for k, v in attrs.items())
        if text is None:
            self.parts.append(f"<{tag} {attr}/>")
        else:
            self.parts.append(f"<{tag} {attr}>{escape(text)}</{tag}>")

    def raw(self, markup):
        self.parts.append(markup)

    def text(self, x, y, s, size=12, anchor="start", **attrs):
        self.add("text", s, x=_f(x), y=_f(y), font_size=size, text_anchor=anchor, font_family="sans-serif", **attrs)

    def render(self) -> str:
        head = (f'<svg xmlns="http://www.w3.org/2000/svg" width="{self.width}" height="{self.height}" '
                f'viewBox="0 0 {self.width} {self.height}">')
        body = "\n".join(self.parts)
        return f"{head}\n<rect x=\"0\" y=\"0\" width=\"{self.width}\" height=\"{self.height}\" fill=\"white\"/>\n{body}\n</svg>\n"


def line_plot(series, title="", xlabel="", ylabel="", width=520, height=420, xlim=(0, 1), ylim=(0, 1)):
    """``series`` is a list of ``(label, xs, ys)``."""
    svg = Svg(width, height)
    left, right, top, bottom = 60, 20, 40, 50
    pw, ph = width - left - right, height - top - bottom

    def sx(x):
        return left + (x - xlim[0]) / (xlim[1] - xlim[0]) * pw

    def sy(y):
        return top + ph - (y - ylim[0]) / (ylim[1] - ylim[0]) * ph

    svg.add("rect", x=left, y=top, width=pw, height=ph, fill="none", stroke="black", class_="frame")
    for k in range(6):
        v = xlim[0] + k * (xlim[1] - xlim[0]) / 5
        svg.text(sx(v), top + ph + 16, f"{v:.1f}", size=10, anchor="middle")
        v = ylim[0] + k * (ylim[1] - ylim[0]) / 5
        svg.text(left - 6, sy(v) + 4, f"{v:.1f}", size=10, anchor="end")
    svg.text(width / 2, 22, title, size=14, anchor="middle")
    svg.text(left + pw / 2, height - 12, xlabel, anchor="middle")
    svg.text(16, top + ph / 2, ylabel, anchor="middle", transform=f"rotate(-90 16 {_f(top + ph / 2)})")
    for n, (label, xs, ys) in enumerate(series):
        color = PALETTE[n % len(PALETTE)]
        pts = " ".join(f"{_f(sx(x))},{_f(sy(y))}" for x, y in zip(xs, ys))
        svg.add("polyline", points=pts, fill="none", stroke=color, stroke_width=1.8, class_="curve", data_label=label)
        ly = top + 14 + 16 * n
        svg.add("line", x1=_f(left + pw - 110), y1=_f(ly - 4), x2=_f(left + pw - 90), y2=_f(ly - 4), stroke=color, stroke_width=2)
        svg.text(left + pw - 85, ly, label, size=11)
    return svg.render()


def bar_chart(pairs, title="", xlabel="", width=520, bar_height=24):
    """Horizontal bars for ``(label, value)`` pairs, drawn in the given order."""
    pairs = list(pairs)
    left, right, top = 200, 60, 40
    height = top + bar_height * max(len(pairs), 1) + 40
    svg = Svg(width, height)
    svg.text(width / 2, 22, title, size=14, anchor="middle")
    vmax = max((v for _, v in pairs), default=0.0) or 1.0
    pw = width - left - right
    for n, (label, value) in enumerate(pairs):
        y = top + n * bar_height
        w = pw * value / vmax
        svg.add("rect", x=left, y=_f(y + 3), width=_f(w), height=bar_height - 6, fill=PALETTE[0], class_="bar", data_label=label)
        svg.text(left - 6, y + bar_height / 2 + 4, label, size=11, anchor="end")
        svg.text(left + w + 4, y + bar_height / 2 + 4, f"{value:.3g}", size=10)
    svg.text(left + pw / 2, height - 10, xlabel, anchor="middle")
    return svg.render()


def seascape_map(field, class_id, legal, illegal, eez_rings=(), title="", width=560):
    """Map of one seascape class with legal/illegal vessel markers and the EEZ line.

    ``legal``/``illegal`` are lists of ``(lat, lon)``; ``eez_rings`` a list of
    ``[(lat, lon), ...]`` rings.
    """
    lats, lons = field.cell_lats(), field.cell_lons()
    half_lat, half_lon = abs(field.dlat) / 2, abs(field.dlon) / 2
    lat_lo, lat_hi = lats.min() - half_lat, lats.max() + half_lat
    lon_lo, lon_hi = lons.min() - half_lon, lons.max() + half_lon
    margin = 30
    pw = width - 2 * margin
    ph = pw * (lat_hi - lat_lo) / (lon_hi - lon_lo)
    svg = Svg(width, int(ph + 2 * margin + 10))

    def sx(lon):
        return margin + (lon - lon_lo) / (lon_hi - lon_lo) * pw

    def sy(lat):
        return margin + 10 + (lat_hi - lat) / (lat_hi - lat_lo) * ph

    svg.text(width / 2, 22, title, size=13, anchor="middle")
    svg.add("rect", x=margin, y=margin + 10, width=_f(pw), height=_f(ph), fill="#f4f4f4", stroke="black", class_="frame")
    svg.raw(f'<clipPath id="map-clip"><rect x="{margin}" y="{margin + 10}" width="{_f(pw)}" height="{_f(ph)}"/></clipPath>')
    cw = pw * abs(field.dlon) / (lon_hi - lon_lo)
    chh = ph * abs(field.dlat) / (lat_hi - lat_lo)
    for i, lat in enumerate(lats):
        for j, lon in enumerate(lons):
            if field.values[i, j] == class_id:
                svg.add("rect", x=_f(sx(lon - half_lon)), y=_f(sy(lat + half_lat)), width=_f(cw), height=_f(chh),
                        fill="#08306b", fill_opacity=0.75, class_=f"cell seascape-{class_id}")
    for ring in eez_rings:
        pts = " ".join(f"{_f(sx(lon))},{_f(sy(lat))}" for lat, lon in ring)
        svg.add("polyline", points=pts, fill="none", stroke="orange", stroke_width=2, stroke_dasharray="6,4",
                clip_path="url(#map-clip)", class_="eez")
    for lat, lon in legal:
        svg.add("circle", cx=_f(sx(lon)), cy=_f(sy(lat)), r=2.5, fill="black", class_="vessel legal")
    for lat, lon in illegal:
        svg.add("circle", cx=_f(sx(lon)), cy=_f(sy(lat)), r=3, fill="red", class_="vessel illegal")
    return svg.render()
