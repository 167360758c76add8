"""Minimal self-contained SVG plotting (line, scatter, heatmap).

Deliberately tiny: enough to emit figure-class plots from the CLI without an
external plotting stack. Axes are linear or log10.
"""

import math

import numpy as np

_MARGIN = dict(left=70, right=20, top=30, bottom=50)


def _fmt(v):
    if v == 0:
        return "0"
    if abs(v) >= 1e4 or abs(v) < 1e-3:
        return f"{v:.2g}"
    return f"{v:g}" if v == round(v, 6) else f"{v:.4g}"


class SvgFigure:
    def __init__(self, width=640, height=420, title="", xlabel="", ylabel="",
                 xlog=False, ylog=False):
        self.width, self.height = width, height
        self.title, self.xlabel, self.ylabel = title, xlabel, ylabel
        self.xlog, self.ylog = xlog, ylog
        self._elems = []
        self._xlim = [math.inf, -math.inf]
        self._ylim = [math.inf, -math.inf]

    # --- data -> pixel mapping -------------------------------------------

    def _expand(self, xs, ys):
        xs = [x for x in xs if not self.xlog or x > 0]
        ys = [y for y in ys if not self.ylog or y > 0]
        if xs:
            self._xlim = [min(self._xlim[0], min(xs)), max(self._xlim[1], max(xs))]
        if ys:
            self._ylim = [min(self._ylim[0], min(ys)), max(self._ylim[1], max(ys))]

    def _tx(self, x):
        lo, hi = self._xlim
        if self.xlog:
            lo, hi, x = math.log10(lo), math.log10(hi), math.log10(max(x, 1e-300))
        span = (hi - lo) or 1.0
        w = self.width - _MARGIN["left"] - _MARGIN["right"]
        return _MARGIN["left"] + (x - lo) / span * w

    def _ty(self, y):
        lo, hi = self._ylim
        if self.ylog:
            lo, hi, y = math.log10(lo), math.log10(hi), math.log10(max(y, 1e-300))
        span = (hi - lo) or 1.0
        h = self.height - _MARGIN["top"] - _MARGIN["bottom"]
        return self.height - _MARGIN["bottom"] - (y - lo) / span * h

    # --- primitives -------------------------------------------------------

    def line(self, x, y, color="#1f77b4", width=1.5, dash=None):
        x, y = np.asarray(x, float), np.asarray(y, float)
        ok = np.isfinite(x) & np.isfinite(y)
        self._expand(x[ok].tolist(), y[ok].tolist())
        self._elems.append(("line", x[ok], y[ok], color, width, dash))

    def scatter(self, x, y, color="#d62728", radius=2.5):
        x, y = np.asarray(x, float), np.asarray(y, float)
        ok = np.isfinite(x) & np.isfinite(y)
        self._expand(x[ok].tolist(), y[ok].tolist())
        self._elems.append(("scatter", x[ok], y[ok], color, radius, None))

    def errorbars(self, x, y, yerr, color="#d62728"):
        x, y, e = (np.asarray(a, float) for a in (x, y, yerr))
        ok = np.isfinite(x) & np.isfinite(y) & np.isfinite(e)
        self._expand(x[ok].tolist(), (y[ok] - e[ok]).tolist())
        self._expand(x[ok].tolist(), (y[ok] + e[ok]).tolist())
        self._elems.append(("errorbars", x[ok], np.stack([y[ok], e[ok]]),
                            color, 1.0, None))

    def heatmap(self, x_edges, y_edges, grid, label=""):
        grid = np.asarray(grid, float)
        self._expand([x_edges[0], x_edges[-1]], [y_edges[0], y_edges[-1]])
        self._elems.append(("heatmap", np.asarray(x_edges, float),
                            np.asarray(y_edges, float), grid, label, None))

    # --- rendering --------------------------------------------------------

    def _ticks(self, lo, hi, log):
        if log:
            d0, d1 = math.floor(math.log10(lo)), math.ceil(math.log10(hi))
            return [10.0 ** d for d in range(d0, d1 + 1)
                    if lo <= 10.0 ** d <= hi]
        span = hi - lo or 1.0
        step = 10.0 ** math.floor(math.log10(span / 4))
        for mult in (1, 2, 5, 10):
            if span / (step * mult) <= 6:
                step *= mult
                break
        t0 = math.ceil(lo / step) * step
        return [t0 + i * step for i in range(int((hi - t0) / step) + 1)]

    def to_svg(self):
        if not math.isfinite(self._xlim[0]):
            self._xlim = [0.0, 1.0]
        if not math.isfinite(self._ylim[0]):
            self._ylim = [0.0, 1.0]
        if self._xlim[0] == self._xlim[1]:
            self._xlim[1] = self._xlim[0] + 1.0
        if self._ylim[0] == self._ylim[1]:
            self._ylim[1] = self._ylim[0] + 1.0
        out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{self.width}" '
               f'height="{self.height}" viewBox="0 0 {self.width} {self.height}">',
               f'<rect width="{self.width}" height="{self.height}" fill="white"/>']
        x0, x1 = _MARGIN["left"], self.width - _MARGIN["right"]
        y0, y1 = _MARGIN["top"], self.height - _MARGIN["bottom"]
        for kind, a, b, c, d, e in self._elems:
            out.append(self._render(kind, a, b, c, d, e))
        out.append(f'<rect x="{x0}" y="{y0}" width="{x1 - x0}" height="{y1 - y0}" '
                   'fill="none" stroke="black"/>')
        for t in self._ticks(*self._xlim, self.xlog):
            px = self._tx(t)
            out.append(f'<line x1="{px:.1f}" y1="{y1}" x2="{px:.1f}" y2="{y1 + 5}" stroke="black"/>')
            out.append(f'<text x="{px:.1f}" y="{y1 + 18}" font-size="11" '
                       f'text-anchor="middle">{_fmt(t)}</text>')
        for t in self._ticks(*self._ylim, self.ylog):
            py = self._ty(t)
            out.append(f'<line x1="{x0 - 5}" y1="{py:.1f}" x2="{x0}" y2="{py:.1f}" stroke="black"/>')
            out.append(f'<text x="{x0 - 8}" y="{py + 4:.1f}" font-size="11" '
                       f'text-anchor="end">{_fmt(t)}</text>')
        out.append(f'<text x="{(x0 + x1) / 2}" y="{self.height - 10}" font-size="13" '
                   f'text-anchor="middle">{self.xlabel}</text>')
        out.append(f'<text x="16" y="{(y0 + y1) / 2}" font-size="13" text-anchor="middle" '
                   f'transform="rotate(-90 16 {(y0 + y1) / 2})">{self.ylabel}</text>')
        out.append(f'<text x="{(x0 + x1) / 2}" y="18" font-size="14" '
                   f'text-anchor="middle">{self.title}</text>')
        out.append("</svg>")
        return "\n".join(out)

    def _render(self, kind, a, b, color, d, e):
        if kind == "line":
            pts = " ".join(f"{self._tx(x):.2f},{self._ty(y):.2f}"
                           for x, y in zip(a, b))
            dash = f' stroke-dasharray="{e}"' if e else ""
            return (f'<polyline points="{pts}" fill="none" stroke="{color}" '
                    f'stroke-width="{d}"{dash}/>')
        if kind == "scatter":
            return "\n".join(
                f'<circle cx="{self._tx(x):.2f}" cy="{self._ty(y):.2f}" '
                f'r="{d}" fill="{color}"/>' for x, y in zip(a, b))
        if kind == "errorbars":
            y, err = b
            parts = []
            for xi, yi, ei in zip(a, y, err):
                px = self._tx(xi)
                parts.append(f'<line x1="{px:.2f}" y1="{self._ty(yi - ei):.2f}" '
                             f'x2="{px:.2f}" y2="{self._ty(yi + ei):.2f}" '
                             f'stroke="{color}"/>')
                parts.append(f'<circle cx="{px:.2f}" cy="{self._ty(yi):.2f}" '
                             f'r="2.2" fill="{color}"/>')
            return "\n".join(parts)
        if kind == "heatmap":
            x_edges, y_edges, grid = a, b, color
            vmax = grid.max() or 1.0
            parts = []
            for i in range(grid.shape[0]):
                for j in range(grid.shape[1]):
                    v = grid[i, j]
                    if v <= 0:
                        continue
                    px0, px1 = self._tx(x_edges[i]), self._tx(x_edges[i + 1])
                    py0, py1 = self._ty(y_edges[j]), self._ty(y_edges[j + 1])
                    parts.append(
                        f'<rect x="{min(px0, px1):.2f}" y="{min(py0, py1):.2f}" '
                        f'width="{abs(px1 - px0):.2f}" height="{abs(py1 - py0):.2f}" '
                        f'fill="{_colormap(v / vmax)}"/>')
            return "\n".join(parts)
        raise ValueError(kind)

    def save(self, path):
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(self.to_svg())


_ANCHORS = [(0.267, 0.005, 0.329), (0.283, 0.141, 0.458), (0.254, 0.265, 0.530),
            (0.207, 0.372, 0.553), (0.164, 0.471, 0.558), (0.128, 0.567, 0.551),
            (0.135, 0.659, 0.518), (0.267, 0.749, 0.441), (0.478, 0.821, 0.318),
            (0.741, 0.873, 0.150), (0.993, 0.906, 0.144)]


def _colormap(v):
    """Viridis-like interpolation on [0, 1]."""
    v = min(max(v, 0.0), 1.0) * (len(_ANCHORS) - 1)
    i = min(int(v), len(_ANCHORS) - 2)
    f = v - i
    rgb = [(1 - f) * _ANCHORS[i][k] + f * _ANCHORS[i + 1][k] for k in range(3)]
    return "#" + "".join(f"{int(c * 255):02x}" for c in rgb)
