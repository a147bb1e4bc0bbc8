"""Shared fixtures: tiny synthetic CSV extracts for the ingestion recipes.

Each fixture writes a file whose aggregation can be checked by hand; the
docstrings record the expected cells and values the tests assert.
"""

import numpy as np
import pytest


def _write_csv(path, header, rows):
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(str(v) for v in row))
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return str(path)


@pytest.fixture
def chicago_csv(tmp_path):
    """Ten points on a 3x3 lattice (data-driven extent).

    Latitude edges linspace(41, 42, 4), longitude linspace(-87.95, -87, 4).
    Occupied cells in lexicographic order: (0,0) x2, (0,2) x1, (1,1) x3,
    (2,2) x4; the (42, -87) point sits on both maxima and lands in the
    last bin.
    """
    rows = [
        (41.0, -87.9), (41.1, -87.95),            # cell (0, 0)
        (41.05, -87.1),                           # cell (0, 2)
        (41.4, -87.5), (41.45, -87.45), (41.5, -87.4),   # cell (1, 1)
        (42.0, -87.0), (41.9, -87.05), (41.8, -87.2), (41.95, -87.01),  # (2, 2)
    ]
    return _write_csv(tmp_path / "chicago_mini.csv",
                      ["latitude", "longitude"], rows)


@pytest.fixture
def chicago_big_csv(tmp_path):
    """Sixty random points in a unit square; enough occupied 4x4 cells to
    clear the CLI minimum-unit check."""
    rng = np.random.default_rng(0)
    pts = rng.random((60, 2))
    rows = [(41.0 + la, -88.0 + lo) for la, lo in pts]
    return _write_csv(tmp_path / "chicago_big.csv",
                      ["latitude", "longitude"], rows)


@pytest.fixture
def california_csv(tmp_path):
    """Six tracts on a 2x2 lattice.

    Cells (0,0): values 100000, 200000 -> mean 150000; (0,1): 300000;
    (1,1): 150000, 250000, 200000 -> mean 200000.  Derived occupancy
    population/households per row is 3, 2.5, 3.2, 4, 2, 2, so the cell
    means are 2.75, 3.2, 8/3.
    """
    header = ["latitude", "longitude", "median_house_value", "median_income",
              "housing_median_age", "population", "households"]
    rows = [
        (34.5, -121.5, 100000, 2.0, 20, 300, 100),
        (35.0, -120.5, 200000, 4.0, 30, 500, 200),
        (34.2, -119.0, 300000, 6.0, 40, 800, 250),
        (37.0, -119.5, 150000, 3.0, 25, 400, 100),
        (36.5, -118.5, 250000, 5.0, 35, 600, 300),
        (38.0, -118.0, 200000, 4.0, 45, 1000, 500),
    ]
    return _write_csv(tmp_path / "california_mini.csv", header, rows)


@pytest.fixture
def california_zero_households_csv(tmp_path):
    header = ["latitude", "longitude", "median_house_value", "median_income",
              "housing_median_age", "population", "households"]
    rows = [
        (34.5, -121.5, 100000, 2.0, 20, 300, 100),
        (35.0, -120.5, 200000, 4.0, 30, 500, 0),
        (36.5, -118.5, 250000, 5.0, 35, 600, 300),
    ]
    return _write_csv(tmp_path / "california_zero.csv", header, rows)


@pytest.fixture
def ozone_csv(tmp_path):
    """Three sites: (39,-104) one reading 0.07, (40,-105) readings 0.03 and
    0.05, (41,-106) readings 0.02, 0.04, 0.06."""
    rows = [
        (40.0, -105.0, 0.03), (40.0, -105.0, 0.05),
        (39.0, -104.0, 0.07),
        (41.0, -106.0, 0.02), (41.0, -106.0, 0.04), (41.0, -106.0, 0.06),
    ]
    return _write_csv(tmp_path / "ozone_mini.csv",
                      ["latitude", "longitude", "ozone"], rows)


@pytest.fixture
def ozone_big_csv(tmp_path):
    """Ten distinct sites with one or two readings each (values in (0, 1))."""
    rng = np.random.default_rng(7)
    rows = []
    for s in range(10):
        lat, lon = 39.0 + 0.1 * s, -105.0 - 0.2 * s
        for _ in range(1 + s % 2):
            rows.append((lat, lon, round(float(0.02 + 0.08 * rng.random()), 6)))
    return _write_csv(tmp_path / "ozone_big.csv",
                      ["latitude", "longitude", "ozone"], rows)


@pytest.fixture
def rearrange_csv(tmp_path):
    """Columns y, u1, u2 over y = 1, 2, 3.

    u1 levels (0.8, 0.3) are non-monotone and rearrange to (0.3, 0.8, 1);
    u2 levels (0.1, 0.2) are already sorted and pass through unchanged.
    The third row's fitted values are beyond the last order statistic and
    ignored.
    """
    rows = [(1.0, 0.8, 0.1), (2.0, 0.3, 0.2), (3.0, 0.99, 0.5)]
    return _write_csv(tmp_path / "curves.csv", ["y", "u1", "u2"], rows)
