"""Raster surfaces from point estimates: IDW interpolation and map export."""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import cKDTree

from .errors import AllMasked, BadGridSpec, EmptySamples

EXACT_DISTANCE = 1e-9
DEFAULT_PALETTE = ("#313695", "#74add1", "#ffffbf", "#f46d43", "#a50026")


@dataclass(frozen=True)
class Raster:
    """Regular grid; row 0 is the southernmost row, ``origin`` its lower-left corner.

    ``values`` has shape ``(nrows, ncols)`` and NaN marks masked cells.
    """

    origin: tuple
    cell_size: float
    ncols: int
    nrows: int
    values: np.ndarray = None
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        if not (self.cell_size > 0 and math.isfinite(self.cell_size)):
            raise BadGridSpec(f"cell_size must be positive, got {self.cell_size}")
        if self.ncols < 1 or self.nrows < 1:
            raise BadGridSpec("grid needs at least one row and column")
        if self.values is None:
            object.__setattr__(self, "values", np.full((self.nrows, self.ncols), np.nan))
        vals = np.asarray(self.values, dtype=float)
        if vals.size != self.ncols * self.nrows:
            raise BadGridSpec(f"{vals.size} values for a {self.nrows}x{self.ncols} grid")
        object.__setattr__(self, "values", vals.reshape(self.nrows, self.ncols))

    def centers(self):
        """Cell centres in row-major order, shape ``(nrows * ncols, 2)``."""
        u0, v0 = self.origin
        cu = u0 + (np.arange(self.ncols) + 0.5) * self.cell_size
        cv = v0 + (np.arange(self.nrows) + 0.5) * self.cell_size
        gu, gv = np.meshgrid(cu, cv)
        return np.column_stack([gu.ravel(), gv.ravel()])

    def with_values(self, values, **metadata):
        return Raster(self.origin, self.cell_size, self.ncols, self.nrows, values,
                      {**self.metadata, **metadata})

    @property
    def mask(self):
        return np.isnan(self.values)


def make_grid(coords, ncols_major=100, cell_size=None) -> Raster:
    """Empty grid whose cell centres cover the bounding box plus one cell on each side.

    The cell size is the major-axis extent divided by ``ncols_major``
    unless given explicitly.
    """
    c = np.asarray(coords, dtype=float)
    if c.ndim != 2 or c.shape[0] == 0:
        raise EmptySamples("no sample coordinates")
    lo, hi = c.min(axis=0), c.max(axis=0)
    span = hi - lo
    if cell_size is None:
        if ncols_major < 1:
            raise BadGridSpec("ncols_major must be at least 1")
        major = float(span.max())
        cell_size = major / ncols_major if major > 0 else 1.0
    cell_size = float(cell_size)
    if not cell_size > 0:
        raise BadGridSpec(f"cell_size must be positive, got {cell_size}")
    counts = np.ceil(span / cell_size - 1e-9).astype(int) + 3
    origin = lo - 1.5 * cell_size
    return Raster((float(origin[0]), float(origin[1])), cell_size, int(counts[0]), int(counts[1]))


def idw_interpolate(samples, grid: Raster, power=2.0, k_neighbors=12, mask_radius=None) -> Raster:
    """Inverse-distance weighting over the ``k_neighbors`` nearest samples.

    ``samples`` is an ``(m, 3)`` array of ``(u, v, value)``; rows with a
    NaN value are treated as absent (masked estimates). Cells farther than
    ``mask_radius`` from every sample are set to NaN.
    """
    s = np.asarray(samples, dtype=float)
    if s.ndim != 2 or s.shape[1] != 3:
        raise EmptySamples("samples must be (u, v, value) rows")
    s = s[np.isfinite(s[:, 2])]
    if s.shape[0] == 0:
        raise EmptySamples("no unmasked samples")
    if not power > 0:
        raise BadGridSpec(f"power must be positive, got {power}")
    if k_neighbors < 1:
        raise BadGridSpec("k_neighbors must be at least 1")
    k = min(int(k_neighbors), s.shape[0])
    tree = cKDTree(s[:, :2])
    d, idx = tree.query(grid.centers(), k=k)
    if k == 1:
        d, idx = d[:, None], idx[:, None]
    vals = s[idx, 2]
    exact = d[:, 0] < EXACT_DISTANCE
    out = vals[:, 0].copy()
    far = ~exact
    # relative to the nearest distance so large powers do not underflow
    w = (d[far] / d[far, :1]) ** -float(power)
    out[far] = np.sum(w * vals[far], axis=1) / np.sum(w, axis=1)
    if mask_radius is not None:
        out[d[:, 0] > mask_radius] = np.nan
    return grid.with_values(out.reshape(grid.nrows, grid.ncols))


def export_geojson(r: Raster, path=None, metadata=None):
    """FeatureCollection of cell polygons (counter-clockwise rings), row-major, masked cells omitted."""
    features = []
    u0, v0 = r.origin
    h = r.cell_size
    for row in range(r.nrows):
        for col in range(r.ncols):
            v = r.values[row, col]
            if np.isnan(v):
                continue
            x0, y0 = u0 + col * h, v0 + row * h
            ring = [[x0, y0], [x0 + h, y0], [x0 + h, y0 + h], [x0, y0 + h], [x0, y0]]
            features.append({
                "type": "Feature",
                "geometry": {"type": "Polygon", "coordinates": [ring]},
                "properties": {"row": row, "col": col, "value": float(v)},
            })
    doc = {"type": "FeatureCollection", "features": features}
    meta = {**r.metadata, **(metadata or {})}
    if meta:
        doc["metadata"] = meta
    text = json.dumps(doc, separators=(",", ":"))
    if path is not None:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(text + "\n")
    return doc


def export_csv(r: Raster, path):
    """One ``u,v,value`` row per cell centre; masked cells have an empty value."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        wr = csv.writer(fh, lineterminator="\n")
        wr.writerow(["u", "v", "value"])
        for (u, v), val in zip(r.centers(), r.values.ravel()):
            wr.writerow([repr(float(u)), repr(float(v)), "" if np.isnan(val) else repr(float(val))])


def _hex_to_rgb(h):
    h = h.lstrip("#")
    return np.array([int(h[i:i + 2], 16) for i in (0, 2, 4)], dtype=float)


def palette_position(values, vmin, vmax):
    """Position in [0, 1] along the ramp; a constant raster maps to 0."""
    values = np.asarray(values, dtype=float)
    if vmax == vmin:
        return np.zeros_like(values)
    return np.clip((values - vmin) / (vmax - vmin), 0.0, 1.0)


def ramp_color(t, palette=DEFAULT_PALETTE):
    """Piecewise-linear interpolation between evenly spaced palette stops."""
    stops = np.array([_hex_to_rgb(c) for c in palette])
    x = np.linspace(0.0, 1.0, len(stops))
    rgb = [np.interp(t, x, stops[:, ch]) for ch in range(3)]
    return "#" + "".join(f"{int(round(c)):02x}" for c in rgb)


def render_svg_heatmap(r: Raster, path=None, palette=DEFAULT_PALETTE, cell_px=6, title=None,
                       ticks=5):
    """SVG 1.1 heat map with one rect per unmasked cell and a labelled legend."""
    finite = r.values[~r.mask]
    if finite.size == 0:
        raise AllMasked("raster has no unmasked cells")
    vmin, vmax = float(finite.min()), float(finite.max())
    w, h = r.ncols * cell_px, r.nrows * cell_px
    legend_w = 90
    top = 24 if title else 4
    parts = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{w + legend_w + 8}" '
        f'height="{max(h, 120) + top + 4}">',
    ]
    if title:
        parts.append(f'<text x="4" y="16" font-size="12">{_escape(title)}</text>')
    parts.append(f'<g id="cells" transform="translate(4,{top})">')
    pos = palette_position(r.values, vmin, vmax)
    for row in range(r.nrows):
        y = (r.nrows - 1 - row) * cell_px  # north up
        for col in range(r.ncols):
            if np.isnan(r.values[row, col]):
                continue
            parts.append(f'<rect x="{col * cell_px}" y="{y}" width="{cell_px}" '
                         f'height="{cell_px}" fill="{ramp_color(pos[row, col], palette)}" '
                         f'data-value="{r.values[row, col]:.6g}"/>')
    parts.append("</g>")

    lx, bar_h = w + 14, 100
    parts.append(f'<g id="legend" transform="translate({lx},{top})">')
    steps = 50
    for s in range(steps):
        t = 1.0 - s / (steps - 1)
        parts.append(f'<rect x="0" y="{s * bar_h / steps:.3f}" width="14" '
                     f'height="{bar_h / steps + 0.5:.3f}" fill="{ramp_color(t, palette)}"/>')
    labels = [vmin] if vmin == vmax else list(np.linspace(vmax, vmin, ticks))
    for i, val in enumerate(labels):
        y = 0.0 if len(labels) == 1 else i * bar_h / (len(labels) - 1)
        parts.append(f'<text class="tick" x="18" y="{y + 4:.3f}" font-size="9">{val:.4g}</text>')
    if vmin == vmax:
        parts.append(f'<text class="note" x="18" y="{bar_h:.3f}" font-size="9">min = max</text>')
    parts.append("</g></svg>")
    text = "\n".join(parts) + "\n"
    if path is not None:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(text)
    return text


def _escape(s):
    return str(s).replace("&", "&amp;").replace("<", "&lt;").replace(">", "&gt;")
