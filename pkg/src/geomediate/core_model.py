"""Dataset representation, CSV ingestion and standardization.

A :class:`Dataset` holds one row per sampling location: planar or
geographic coordinates, a block of predictor scores, a mediator and an
outcome. It is immutable; transformations return new instances.
"""

from __future__ import annotations

import csv
import json
import os
import math
from dataclasses import dataclass, field, replace
from typing import NamedTuple, Sequence

import numpy as np

from . import _rng
from .errors import (
    BadConfig,
    DuplicateCoordinate,
    InconsistentSpec,
    MissingColumn,
    NonNumericCell,
    TooFewRows,
    ZeroVariance,
)

PLANAR = "planar_meters"
WGS84 = "wgs84_degrees"
COORD_SYSTEMS = (PLANAR, WGS84)


class SpatialSample(NamedTuple):
    u: float
    v: float
    predictors: tuple
    mediator: float
    outcome: float
    id: str


@dataclass(frozen=True)
class Schema:
    """Maps dataset roles onto CSV column names.

    ``predictors=None`` means "every column not used for another role".
    With ``id=None`` a column literally named ``id`` is taken as the row
    identifier when present.
    """

    u: str = "u"
    v: str = "v"
    predictors: Sequence[str] | None = None
    mediator: str = "SA"
    outcome: str = "AC"
    id: str | None = None
    coord_system: str = PLANAR

    def __post_init__(self):
        if self.coord_system not in COORD_SYSTEMS:
            raise BadConfig(f"unknown coord_system {self.coord_system!r}")


@dataclass(frozen=True)
class ModelSpec:
    outcome_name: str
    mediator_name: str
    predictor_subset: tuple
    include_intercept: bool = True

    def __post_init__(self):
        object.__setattr__(self, "predictor_subset", tuple(self.predictor_subset))
        if self.mediator_name in self.predictor_subset:
            raise InconsistentSpec(
                f"mediator {self.mediator_name!r} also listed as a predictor",
                mediator=self.mediator_name,
            )
        if self.outcome_name in self.predictor_subset:
            raise InconsistentSpec("outcome listed as a predictor", outcome=self.outcome_name)
        if not self.predictor_subset:
            raise InconsistentSpec("at least one predictor is required")

    def check(self, data: "Dataset"):
        unknown = [p for p in self.predictor_subset if p not in data.predictor_names]
        if unknown:
            raise InconsistentSpec(f"predictors not in dataset: {unknown}", predictors=unknown)
        for name in (self.outcome_name, self.mediator_name):
            data.column(name)


@dataclass(frozen=True)
class ScalingInfo:
    """Per-column mean and standard deviation used by :func:`standardize`."""

    mean: dict
    sd: dict

    def to_json(self, path=None):
        text = json.dumps({"mean": self.mean, "sd": self.sd}, indent=2, sort_keys=True)
        if path is not None:
            with open(path, "w", encoding="utf-8") as fh:
                fh.write(text + "\n")
        return text

    @classmethod
    def from_json(cls, text_or_path):
        text = str(text_or_path) if isinstance(text_or_path, os.PathLike) else text_or_path
        if not text.lstrip().startswith("{"):
            with open(text_or_path, encoding="utf-8") as fh:
                text = fh.read()
        raw = json.loads(text)
        return cls(mean=raw["mean"], sd=raw["sd"])

    def coefficient_to_raw(self, beta, term, response):
        """Slope on standardized scale -> raw units of ``response`` per unit ``term``."""
        return np.asarray(beta) * self.sd[response] / self.sd[term]


@dataclass(frozen=True, eq=False)
class Dataset:
    coords: np.ndarray
    predictors: np.ndarray
    predictor_names: tuple
    mediator: np.ndarray
    outcome: np.ndarray
    mediator_name: str = "SA"
    outcome_name: str = "AC"
    ids: tuple = ()
    coord_system: str = PLANAR
    standardized: bool = False
    _index: dict = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        coords = np.asarray(self.coords, dtype=float).reshape(-1, 2)
        n = coords.shape[0]
        X = np.asarray(self.predictors, dtype=float).reshape(n, -1)
        names = tuple(self.predictor_names)
        if X.shape[1] != len(names):
            raise BadConfig("predictor block width does not match predictor_names")
        if not np.all(np.isfinite(coords)):
            raise BadConfig("coordinates must be finite")
        ids = tuple(self.ids) if self.ids else tuple(str(i) for i in range(n))
        for arr in (coords, X):
            arr.setflags(write=False)
        m = np.asarray(self.mediator, dtype=float).reshape(n)
        y = np.asarray(self.outcome, dtype=float).reshape(n)
        m.setflags(write=False)
        y.setflags(write=False)
        set_ = object.__setattr__
        set_(self, "coords", coords)
        set_(self, "predictors", X)
        set_(self, "predictor_names", names)
        set_(self, "mediator", m)
        set_(self, "outcome", y)
        set_(self, "ids", ids)
        index = {name: ("x", j) for j, name in enumerate(names)}
        index[self.mediator_name] = ("m", None)
        index[self.outcome_name] = ("y", None)
        set_(self, "_index", index)
        if n < len(names) + 3:
            raise TooFewRows(f"need at least p + 3 = {len(names) + 3} rows, got {n}", n=n)

    @property
    def n(self):
        return self.coords.shape[0]

    @property
    def p(self):
        return self.predictors.shape[1]

    @property
    def variable_names(self):
        return (*self.predictor_names, self.mediator_name, self.outcome_name)

    @property
    def samples(self):
        return [
            SpatialSample(float(u), float(v), tuple(map(float, x)), float(m), float(y), i)
            for (u, v), x, m, y, i in zip(
                self.coords, self.predictors, self.mediator, self.outcome, self.ids
            )
        ]

    def column(self, name):
        try:
            kind, j = self._index[name]
        except KeyError:
            raise MissingColumn(f"unknown variable {name!r}", column=name) from None
        if kind == "x":
            return self.predictors[:, j]
        return self.mediator if kind == "m" else self.outcome

    def design(self, response, terms, intercept=True):
        """Return ``(y, X, names)`` with an optional leading intercept column."""
        cols = [self.column(t) for t in terms]
        names = list(terms)
        if intercept:
            cols.insert(0, np.ones(self.n))
            names.insert(0, "Intercept")
        X = np.column_stack(cols) if cols else np.empty((self.n, 0))
        return np.array(self.column(response)), X, names

    def subset(self, rows):
        rows = np.asarray(rows)
        return replace(
            self,
            coords=self.coords[rows],
            predictors=self.predictors[rows],
            mediator=self.mediator[rows],
            outcome=self.outcome[rows],
            ids=tuple(self.ids[i] for i in rows),
        )

    def to_csv(self, path):
        """Write with ``repr`` floats so a reload is bit-identical."""
        u_name, v_name = ("lon", "lat") if self.coord_system == WGS84 else ("u", "v")
        header = ["id", u_name, v_name, *self.predictor_names, self.mediator_name, self.outcome_name]
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh)
            w.writerow(header)
            for s in self.samples:
                w.writerow([s.id, repr(s.u), repr(s.v), *map(repr, s.predictors),
                            repr(s.mediator), repr(s.outcome)])
        return Schema(u=u_name, v=v_name, predictors=list(self.predictor_names),
                      mediator=self.mediator_name, outcome=self.outcome_name, id="id",
                      coord_system=self.coord_system)


def _parse_float(text, row, col):
    try:
        value = float(text)
    except (TypeError, ValueError):
        raise NonNumericCell(f"row {row}, column {col!r}: {text!r} is not a number",
                             row=row, col=col) from None
    if not math.isfinite(value):
        raise NonNumericCell(f"row {row}, column {col!r}: non-finite value", row=row, col=col)
    return value


def load_dataset(path, schema: Schema | None = None, *, jitter=False, seed=42) -> Dataset:
    """Read a CSV file with a header row into a :class:`Dataset`.

    Duplicate coordinates raise :class:`DuplicateCoordinate` unless ``jitter``
    is set, in which case repeated locations are displaced by a uniform
    offset of 1e-6 of the coordinate span.
    """
    schema = schema or Schema()
    with open(path, newline="", encoding="utf-8-sig") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise TooFewRows("file is empty", n=0) from None
        rows = [r for r in reader if any(cell.strip() for cell in r)]

    id_col = schema.id or ("id" if "id" in header else None)
    reserved = {schema.u, schema.v, schema.mediator, schema.outcome, id_col}
    predictors = (list(schema.predictors) if schema.predictors is not None
                  else [h for h in header if h not in reserved])
    needed = [schema.u, schema.v, *predictors, schema.mediator, schema.outcome]
    if id_col:
        needed.append(id_col)
    missing = [c for c in needed if c not in header]
    if missing:
        raise MissingColumn(f"missing columns: {missing}", columns=missing)
    if len(rows) < len(predictors) + 3:
        raise TooFewRows(f"need at least {len(predictors) + 3} data rows, got {len(rows)}",
                         n=len(rows))

    pos = {h: i for i, h in enumerate(header)}

    def numeric(name):
        k = pos[name]
        return np.array([_parse_float(r[k] if k < len(r) else "", i + 1, name)
                         for i, r in enumerate(rows)])

    coords = np.column_stack([numeric(schema.u), numeric(schema.v)])
    X = np.column_stack([numeric(c) for c in predictors]) if predictors else np.empty((len(rows), 0))
    ids = (tuple(r[pos[id_col]] for r in rows) if id_col
           else tuple(str(i) for i in range(len(rows))))
    coords = _resolve_duplicates(coords, ids, jitter, seed)
    return Dataset(coords=coords, predictors=X, predictor_names=tuple(predictors),
                   mediator=numeric(schema.mediator), outcome=numeric(schema.outcome),
                   mediator_name=schema.mediator, outcome_name=schema.outcome, ids=ids,
                   coord_system=schema.coord_system)


def _resolve_duplicates(coords, ids, jitter, seed):
    _, first, counts = np.unique(coords, axis=0, return_index=True, return_counts=True)
    if np.all(counts == 1):
        return coords
    seen = set(first.tolist())
    dupes = [i for i in range(len(coords)) if i not in seen]
    if not jitter:
        raise DuplicateCoordinate("samples share identical coordinates",
                                  ids=[ids[i] for i in dupes])
    span = float(np.max(np.ptp(coords, axis=0))) or 1.0
    rng = _rng.stream(seed, 0xD0)
    out = coords.copy()
    for i in dupes:
        out[i] += rng.uniform(-1e-6, 1e-6, size=2) * span
    return _resolve_duplicates(out, ids, jitter, seed + 1)


def standardize(d: Dataset) -> tuple[Dataset, ScalingInfo]:
    """Z-score every variable column (sample sd, ``ddof=1``)."""
    mean, sd = {}, {}
    for name in d.variable_names:
        col = d.column(name)
        s = float(np.std(col, ddof=1))
        if not s > 0:
            raise ZeroVariance(f"column {name!r} is constant", column=name)
        mean[name], sd[name] = float(np.mean(col)), s

    def z(name):
        return (d.column(name) - mean[name]) / sd[name]

    X = np.column_stack([z(c) for c in d.predictor_names]) if d.p else d.predictors
    out = replace(d, predictors=X, mediator=z(d.mediator_name), outcome=z(d.outcome_name),
                  standardized=True)
    return out, ScalingInfo(mean=mean, sd=sd)


def unstandardize(d: Dataset, scaling: ScalingInfo) -> Dataset:
    def raw(name):
        return d.column(name) * scaling.sd[name] + scaling.mean[name]

    X = np.column_stack([raw(c) for c in d.predictor_names]) if d.p else d.predictors
    return replace(d, predictors=X, mediator=raw(d.mediator_name), outcome=raw(d.outcome_name),
                   standardized=False)
