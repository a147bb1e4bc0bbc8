"""CSV ingestion and spatial aggregation into regression-ready samples.

Raw point data (events, houses, monitor readings) become one response per
spatial cell or site:

  * grid aggregation bins rows into an R x C lattice over the coordinate
    bounding box (half-open cells, the maximum lands in the last bin),
    reduces each occupied cell by count or mean, and optionally transforms;
  * site aggregation groups rows sharing an exact coordinate pair and
    averages.

Cells/sites are ordered lexicographically by coordinates, and that order is
the index axis the shape-constrained estimators fit along.  Named recipes
bundle the column names, lattice sizes, transforms, and evaluation windows
for the bundled dataset preparations.
"""

from __future__ import annotations

import csv
import warnings
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .core import Sample


class DataError(RuntimeError):
    """Input data unusable; carries a short machine-readable code."""

    def __init__(self, code: str, message: str):
        super().__init__(message)
        self.code = code


@dataclass(frozen=True)
class Table:
    """Parsed numeric columns plus a count of rows dropped while parsing."""

    columns: dict
    n_dropped: int = 0

    @property
    def n_rows(self) -> int:
        if not self.columns:
            return 0
        return next(iter(self.columns.values())).size


def load_csv(path, columns) -> Table:
    """Read the named columns from a CSV file with a header row.

    columns maps name -> "float" (anything else is kept as str).  Rows with
    a missing or unparseable value in any requested column are dropped and
    counted.  A missing column in the header is an error; a file that
    parses to zero rows emits a warning.
    """
    try:
        fh = open(path, newline="", encoding="utf-8")
    except OSError as err:
        raise DataError("file-not-found", f"cannot open {path}: {err}") from err
    with fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None:
            raise DataError("empty-file", f"{path} has no header row")
        missing = [c for c in columns if c not in reader.fieldnames]
        if missing:
            raise DataError("missing-column",
                            f"{path} lacks column(s) {', '.join(missing)}")
        out = {c: [] for c in columns}
        dropped = 0
        for row in reader:
            parsed = {}
            ok = True
            for c, kind in columns.items():
                cell = row.get(c)
                if cell is None or cell == "":
                    ok = False
                    break
                if kind == "float":
                    try:
                        parsed[c] = float(cell)
                    except ValueError:
                        ok = False
                        break
                else:
                    parsed[c] = cell
            if ok:
                for c in columns:
                    out[c].append(parsed[c])
            else:
                dropped += 1
    arrays = {}
    for c, kind in columns.items():
        if kind == "float":
            arrays[c] = np.asarray(out[c], dtype=float)
        else:
            arrays[c] = np.asarray(out[c], dtype=object)
    table = Table(arrays, dropped)
    if table.n_rows == 0:
        warnings.warn(f"{path}: no usable rows after parsing")
    return table


@dataclass(frozen=True)
class GridSpec:
    """How to lattice and reduce point data."""

    row_col: str
    col_col: str
    nrows: int
    ncols: int
    aggregate: str = "count"  # "count" | "mean"
    value_col: Optional[str] = None
    transform: str = "none"  # "none" | "log" | "log1p"
    drop_empty: bool = True
    covariate_cols: tuple = ()
    include_cell_coords: bool = False

    def __post_init__(self):
        if self.nrows < 1 or self.ncols < 1:
            raise ValueError("lattice dimensions must be positive")
        if self.aggregate not in ("count", "mean"):
            raise ValueError("aggregate must be 'count' or 'mean'")
        if self.aggregate == "mean" and self.value_col is None:
            raise ValueError("mean aggregation needs value_col")
        if self.transform not in ("none", "log", "log1p"):
            raise ValueError("transform must be 'none', 'log', or 'log1p'")


@dataclass(frozen=True)
class AggregatedSample:
    """Aggregation output: the sample plus cell bookkeeping."""

    sample: Sample
    cells: np.ndarray  # (k, 2) bin or site coordinates, lexicographic order
    counts: np.ndarray  # rows aggregated into each cell


def _bin_index(v: np.ndarray, nbins: int):
    lo, hi = v.min(), v.max()
    if not lo < hi:
        raise DataError("degenerate-extent",
                        "coordinate has zero range; cannot lattice")
    edges = np.linspace(lo, hi, nbins + 1)
    idx = np.searchsorted(edges, v, side="right") - 1
    return np.clip(idx, 0, nbins - 1)


def _apply_transform(y: np.ndarray, transform: str) -> np.ndarray:
    if transform == "log":
        if np.any(y <= 0):
            raise DataError("nonpositive-log",
                            "log transform needs strictly positive values")
        return np.log(y)
    if transform == "log1p":
        if np.any(y < 0):
            raise DataError("negative-log1p",
                            "log1p transform needs nonnegative values")
        return np.log1p(y)
    return y.copy()


def grid_aggregate(table: Table, spec: GridSpec) -> AggregatedSample:
    """Bin rows into the lattice and reduce each occupied cell.

    Cells come back ordered by (row bin, column bin).  With
    drop_empty=False, count aggregation keeps zero-count cells; mean
    aggregation cannot (the mean of nothing is undefined) and errors.
    """
    if table.n_rows == 0:
        raise DataError("no-rows", "cannot aggregate an empty table")
    r = _bin_index(table.columns[spec.row_col], spec.nrows)
    c = _bin_index(table.columns[spec.col_col], spec.ncols)
    flat = r * spec.ncols + c
    counts_all = np.bincount(flat, minlength=spec.nrows * spec.ncols)

    if spec.drop_empty:
        occupied = np.flatnonzero(counts_all > 0)
    else:
        if spec.aggregate == "mean":
            raise DataError("empty-cells-mean",
                            "keeping empty cells is incompatible with mean "
                            "aggregation")
        occupied = np.arange(spec.nrows * spec.ncols)
    counts = counts_all[occupied]

    if spec.aggregate == "count":
        y = counts.astype(float)
    else:
        vals = table.columns[spec.value_col]
        sums = np.bincount(flat, weights=vals,
                           minlength=spec.nrows * spec.ncols)[occupied]
        y = sums / counts
    y = _apply_transform(y, spec.transform)

    cells = np.stack([occupied // spec.ncols, occupied % spec.ncols], axis=1)
    x_parts = []
    if spec.include_cell_coords:
        x_parts.append(cells.astype(float))
    for col in spec.covariate_cols:
        vals = table.columns[col]
        sums = np.bincount(flat, weights=vals,
                           minlength=spec.nrows * spec.ncols)[occupied]
        with np.errstate(invalid="ignore"):
            means = np.where(counts > 0, sums / np.maximum(counts, 1), 0.0)
        x_parts.append(means[:, None])
    x = np.hstack(x_parts) if x_parts else None
    return AggregatedSample(Sample(y, x), cells, counts)


def site_aggregate(table: Table, site_cols, value_col: str,
                   covariate_cols=()) -> AggregatedSample:
    """Average the value column over rows sharing an exact coordinate pair.

    Sites are ordered lexicographically by the two coordinates.
    """
    if table.n_rows == 0:
        raise DataError("no-rows", "cannot aggregate an empty table")
    c0 = table.columns[site_cols[0]]
    c1 = table.columns[site_cols[1]]
    keys = np.stack([c0, c1], axis=1)
    sites, inverse = np.unique(keys, axis=0, return_inverse=True)
    counts = np.bincount(inverse)
    y = np.bincount(inverse, weights=table.columns[value_col]) / counts
    x_parts = [sites.astype(float)]
    for col in covariate_cols:
        x_parts.append(
            (np.bincount(inverse, weights=table.columns[col]) / counts)[:, None])
    x = np.hstack(x_parts)
    return AggregatedSample(Sample(y, x), sites, counts)


def jitter_ties(y, seed: int, scale: Optional[float] = None) -> np.ndarray:
    """Break exact ties by deterministic tiny offsets.

    Tied groups get symmetric offsets spanning +-scale (so two equal values
    end up at most 2*scale apart), shuffled within the group by the seeded
    generator.  Untied values are returned unchanged; an input with no ties
    comes back as an identical copy.  scale defaults to 1e-9 times the data
    range, which must be positive.
    """
    y = np.asarray(y, dtype=float).copy()
    if y.ndim != 1 or y.size == 0:
        raise ValueError("jitter_ties expects a nonempty 1-D array")
    rng = np.random.default_rng(np.random.SeedSequence([seed]))
    span = y.max() - y.min()
    if scale is None:
        if span <= 0:
            raise DataError("zero-range",
                            "all values equal; pass an explicit scale")
        scale = 1e-9 * span
    if scale <= 0:
        raise ValueError("scale must be positive")
    values, inverse, counts = np.unique(y, return_inverse=True,
                                        return_counts=True)
    for g in np.flatnonzero(counts > 1):
        pos = np.flatnonzero(inverse == g)
        k = pos.size
        offsets = (np.arange(k) - (k - 1) / 2.0) * (2.0 * scale / (k - 1))
        rng.shuffle(offsets)
        y[pos] += offsets
    if np.unique(y).size != y.size:
        raise DataError("jitter-collision",
                        "jitter failed to separate all values; increase scale")
    return y


@dataclass(frozen=True)
class DatasetRecipe:
    """Named end-to-end preparation of a raw CSV into a sample.

    expected_cells documents the unit count the preparation produced on the
    full source data; it is informational, not enforced.
    """

    name: str
    kind: str  # "grid" | "site"
    columns: dict
    eval_lo: float
    eval_hi: float
    relu_hidden: tuple
    expected_cells: int
    grid_spec: Optional[GridSpec] = None
    site_cols: tuple = ()
    value_col: Optional[str] = None
    covariate_cols: tuple = ()
    derived_ratio: tuple = ()  # (new_col, numerator_col, denominator_col)


RECIPES = {
    "chicago-crime": DatasetRecipe(
        name="chicago-crime",
        kind="grid",
        columns={"latitude": "float", "longitude": "float"},
        eval_lo=-1.0, eval_hi=6.0,
        relu_hidden=(64, 64, 64, 64, 64),
        expected_cells=3844,
        grid_spec=GridSpec(row_col="latitude", col_col="longitude",
                           nrows=100, ncols=100, aggregate="count",
                           transform="log", drop_empty=True,
                           include_cell_coords=True),
    ),
    "california-housing": DatasetRecipe(
        name="california-housing",
        kind="grid",
        columns={"latitude": "float", "longitude": "float",
                 "median_house_value": "float", "median_income": "float",
                 "housing_median_age": "float", "population": "float",
                 "households": "float"},
        eval_lo=5.0, eval_hi=15.0,
        relu_hidden=(30, 30, 30),
        expected_cells=3165,
        grid_spec=GridSpec(row_col="latitude", col_col="longitude",
                           nrows=200, ncols=200, aggregate="mean",
                           value_col="median_house_value", transform="log",
                           drop_empty=True, include_cell_coords=True,
                           covariate_cols=("median_income",
                                           "housing_median_age",
                                           "average_occupancy")),
        derived_ratio=("average_occupancy", "population", "households"),
    ),
    "ozone": DatasetRecipe(
        name="ozone",
        kind="site",
        columns={"latitude": "float", "longitude": "float", "ozone": "float"},
        eval_lo=0.0, eval_hi=1.0,
        relu_hidden=(100, 100),
        expected_cells=1189,
        site_cols=("latitude", "longitude"),
        value_col="ozone",
    ),
}


def load_recipe(name: str, path, nrows: Optional[int] = None,
                ncols: Optional[int] = None) -> AggregatedSample:
    """Run a named recipe against a raw CSV file.

    nrows/ncols override the lattice dimensions (useful on small extracts;
    the presets match the full source data).
    """
    if name not in RECIPES:
        raise DataError("unknown-dataset",
                        f"unknown dataset {name!r}; known: {sorted(RECIPES)}")
    recipe = RECIPES[name]
    table = load_csv(path, dict(recipe.columns))
    if table.n_rows == 0:
        raise DataError("no-rows", f"{path} parsed to zero usable rows")
    if recipe.derived_ratio:
        new_col, num, den = recipe.derived_ratio
        denom = table.columns[den]
        if np.any(denom == 0):
            raise DataError("zero-denominator",
                            f"column {den} contains zeros; cannot form {new_col}")
        cols = dict(table.columns)
        cols[new_col] = table.columns[num] / denom
        table = Table(cols, table.n_dropped)
    if recipe.kind == "grid":
        spec = recipe.grid_spec
        if nrows is not None or ncols is not None:
            from dataclasses import replace as dc_replace
            spec = dc_replace(spec, nrows=nrows or spec.nrows,
                              ncols=ncols or spec.ncols)
        return grid_aggregate(table, spec)
    return site_aggregate(table, recipe.site_cols, recipe.value_col,
                          recipe.covariate_cols)
