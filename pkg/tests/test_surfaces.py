import json
import xml.etree.ElementTree as ET

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from geomediate.errors import AllMasked, BadGridSpec, EmptySamples
from geomediate.surfaces import (
    DEFAULT_PALETTE,
    Raster,
    export_csv,
    export_geojson,
    idw_interpolate,
    make_grid,
    palette_position,
    render_svg_heatmap,
)

SVG = "{http://www.w3.org/2000/svg}"

# the subset of RFC 7946 the exporter emits
GEOJSON_SCHEMA = {
    "type": "object",
    "required": ["type", "features"],
    "properties": {
        "type": {"const": "FeatureCollection"},
        "features": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["type", "geometry", "properties"],
                "properties": {
                    "type": {"const": "Feature"},
                    "properties": {"type": ["object", "null"]},
                    "geometry": {
                        "type": "object",
                        "required": ["type", "coordinates"],
                        "properties": {
                            "type": {"const": "Polygon"},
                            "coordinates": {
                                "type": "array",
                                "items": {
                                    "type": "array",
                                    "minItems": 4,
                                    "items": {"type": "array", "minItems": 2, "maxItems": 3,
                                              "items": {"type": "number"}},
                                },
                            },
                        },
                    },
                },
            },
        },
    },
}


def raster_at(points):
    """A 1-row grid whose cell centres sit exactly on ``points`` along the u axis."""
    pts = np.asarray(points, dtype=float)
    return Raster((pts[0] - 0.5, -0.5), 1.0, len(pts), 1)


def test_exact_at_samples(rng):
    s = np.column_stack([np.arange(5.0), np.zeros(5), rng.standard_normal(5)])
    r = idw_interpolate(s, raster_at(np.arange(5.0)))
    np.testing.assert_array_equal(r.values.ravel(), s[:, 2])


@pytest.mark.parametrize("power", [0.5, 1.0, 2.0, 7.0])
def test_midpoint_symmetry(power):
    s = np.array([[0.0, 0.0, 1.0], [2.0, 0.0, 3.0]])
    r = idw_interpolate(s, raster_at([1.0]), power=power)
    assert r.values[0, 0] == pytest.approx(2.0, abs=1e-14)


def nn_agreement(power, seed, tol=0.01):
    """Share of cells within ``tol`` (fraction of the value range) of the nearest sample."""
    rng = np.random.default_rng(seed)
    pts = rng.uniform(0, 100, (60, 2))
    s = np.column_stack([pts, rng.standard_normal(60)])
    grid = make_grid(pts, ncols_major=50)
    centers = grid.centers()
    d = np.hypot(*(centers[:, None, :] - pts[None, :, :]).transpose(2, 0, 1))
    nn = s[np.argmin(d, axis=1), 2]
    r = idw_interpolate(s, grid, power=power)
    return np.mean(np.abs(r.values.ravel() - nn) <= tol * np.ptp(s[:, 2]))


@pytest.mark.xfail(strict=True, reason="power 10 is far from nearest-neighbour assignment near "
                                       "Voronoi edges; see the decisions ledger")
def test_power_ten_is_nearest_neighbour():
    assert nn_agreement(10.0, seed=1) >= 0.99


def test_high_power_converges_to_nearest_neighbour():
    shares = [nn_agreement(p, seed=1) for p in (10.0, 50.0, 200.0, 500.0)]
    assert all(b > a for a, b in zip(shares, shares[1:]))
    assert shares[-1] >= 0.98


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 2**31), power=st.floats(0.5, 8), k=st.integers(1, 20))
def test_convex_combination(seed, power, k):
    rng = np.random.default_rng(seed)
    pts = rng.uniform(0, 10, (25, 2))
    s = np.column_stack([pts, rng.standard_normal(25) * 5])
    r = idw_interpolate(s, make_grid(pts, 20), power, k)
    assert r.values.min() >= s[:, 2].min() - 1e-12
    assert r.values.max() <= s[:, 2].max() + 1e-12


def test_grid_covers_expanded_bbox(rng):
    pts = rng.uniform([0, 0], [1000, 400], (30, 2))
    g = make_grid(pts)
    c = g.centers()
    lo, hi = pts.min(axis=0), pts.max(axis=0)
    assert np.all(c.min(axis=0) <= lo - g.cell_size + 1e-9)
    assert np.all(c.max(axis=0) >= hi + g.cell_size - 1e-9)
    assert g.cell_size == pytest.approx((hi - lo).max() / 100)
    assert g.ncols * g.nrows == g.values.size


def test_errors():
    with pytest.raises(EmptySamples):
        idw_interpolate(np.empty((0, 3)), Raster((0, 0), 1.0, 2, 2))
    with pytest.raises(EmptySamples):
        idw_interpolate(np.array([[0, 0, np.nan]]), Raster((0, 0), 1.0, 2, 2))
    with pytest.raises(BadGridSpec):
        Raster((0, 0), 0.0, 2, 2)
    with pytest.raises(BadGridSpec):
        Raster((0, 0), 1.0, 2, 2, np.zeros(5))
    with pytest.raises(BadGridSpec):
        idw_interpolate(np.array([[0, 0, 1.0]]), Raster((0, 0), 1.0, 2, 2), power=0)


def test_masked_samples_and_radius():
    s = np.array([[0.0, 0.0, 1.0], [1.0, 0.0, np.nan], [10.0, 0.0, 5.0]])
    r = idw_interpolate(s, raster_at([1.0, 2.0, 3.0]), k_neighbors=1, mask_radius=2.0)
    assert r.values[0, 0] == 1.0 and r.values[0, 1] == 1.0
    assert np.isnan(r.values[0, 2])


def ring_area(ring):
    x, y = np.array(ring).T
    return 0.5 * np.sum(x[:-1] * y[1:] - x[1:] * y[:-1])


def test_geojson_2x2(tmp_path):
    r = Raster((10.0, 20.0), 5.0, 2, 2, np.array([[1.0, 2.0], [3.0, 4.0]]))
    doc = export_geojson(r, tmp_path / "r.geojson")
    feats = doc["features"]
    assert len(feats) == 4
    assert [f["properties"]["value"] for f in feats] == [1.0, 2.0, 3.0, 4.0]
    ring = feats[3]["geometry"]["coordinates"][0]
    assert ring == [[15.0, 25.0], [20.0, 25.0], [20.0, 30.0], [15.0, 30.0], [15.0, 25.0]]
    assert all(ring_area(f["geometry"]["coordinates"][0]) > 0 for f in feats)


def test_geojson_fully_masked(tmp_path):
    r = Raster((0.0, 0.0), 1.0, 3, 2)
    export_geojson(r, tmp_path / "empty.geojson")
    doc = json.loads((tmp_path / "empty.geojson").read_text())
    assert doc == {"type": "FeatureCollection", "features": []}


def test_geojson_roundtrip_and_schema(tmp_path, rng):
    jsonschema = pytest.importorskip("jsonschema")
    vals = rng.standard_normal((4, 6))
    vals[1, 2] = np.nan
    r = Raster((0.0, 0.0), 2.5, 6, 4, vals)
    export_geojson(r, tmp_path / "r.geojson", {"column": "indirect"})
    doc = json.loads((tmp_path / "r.geojson").read_text())
    jsonschema.validate(doc, GEOJSON_SCHEMA)
    back = np.full((4, 6), np.nan)
    for f in doc["features"]:
        back[f["properties"]["row"], f["properties"]["col"]] = f["properties"]["value"]
    np.testing.assert_allclose(back, vals, atol=1e-9)
    assert len(doc["features"]) == 23


def test_csv_export(tmp_path):
    r = Raster((0.0, 0.0), 1.0, 2, 1, np.array([1.5, np.nan]))
    export_csv(r, tmp_path / "r.csv")
    assert (tmp_path / "r.csv").read_text() == "u,v,value\n0.5,0.5,1.5\n1.5,0.5,\n"


def cell_fills(svg_text):
    root = ET.fromstring(svg_text)
    cells = root.find(f"{SVG}g[@id='cells']")
    return [(float(c.get("data-value")), c.get("fill")) for c in cells]


def test_svg_constant_raster():
    text = render_svg_heatmap(Raster((0, 0), 1.0, 3, 2, np.full(6, 4.0)))
    fills = {f for _, f in cell_fills(text)}
    assert len(fills) == 1
    root = ET.fromstring(text)
    legend = root.find(f"{SVG}g[@id='legend']")
    ticks = [t.text for t in legend if t.get("class") == "tick"]
    assert ticks == ["4"]
    assert any(t.get("class") == "note" and "min = max" in t.text for t in legend)


def test_svg_two_cells_hit_palette_ends():
    text = render_svg_heatmap(Raster((0, 0), 1.0, 2, 1, np.array([0.0, 1.0])))
    fills = cell_fills(text)
    assert len(fills) == 2
    assert fills[0][1] == DEFAULT_PALETTE[0] and fills[1][1] == DEFAULT_PALETTE[-1]


def test_svg_ramp_monotone(rng):
    vals = rng.standard_normal(40)
    pos = palette_position(vals, vals.min(), vals.max())
    order = np.argsort(vals)
    assert np.all(np.diff(pos[order]) >= 0)
    text = render_svg_heatmap(Raster((0, 0), 1.0, 8, 5, vals))
    assert len(cell_fills(text)) == 40


def test_svg_all_masked():
    with pytest.raises(AllMasked):
        render_svg_heatmap(Raster((0, 0), 1.0, 2, 2))
