"""Typed columnar datasets: schemas, CSV ingestion, and preprocessing.

A :class:`Dataset` stores one numpy array per column. Numeric columns are
``float64``; categorical columns are ``int64`` codes into an ordered level
set carried by the schema. Cells that were missing in the source file are
tracked in per-column boolean masks until :func:`replace_missing` fills
them, so downstream model fitting always sees complete data.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import DataError, SchemaError

NUMERIC = "numeric"
CATEGORICAL = "categorical"

# Code stored in a categorical column while the cell is flagged missing.
_MISSING_CODE = -1

DEFAULT_MISSING_TOKENS = ("", "NA")


@dataclass(frozen=True)
class ColumnKind:
    """Column type tag. Categorical columns carry an ordered level set.

    ``levels=None`` on a categorical column means "infer the levels from the
    data at load time"; datasets themselves only ever carry concrete levels.
    """

    tag: str
    levels: tuple[str, ...] | None = None

    def __post_init__(self) -> None:
        if self.tag not in (NUMERIC, CATEGORICAL):
            raise SchemaError(f"unknown column kind {self.tag!r}")
        if self.tag == NUMERIC and self.levels is not None:
            raise SchemaError("numeric columns do not carry levels")
        if self.tag == CATEGORICAL and self.levels is not None:
            if not self.levels:
                raise SchemaError("categorical level set must be non-empty")
            if len(set(self.levels)) != len(self.levels):
                raise SchemaError("categorical levels contain duplicates")

    @staticmethod
    def numeric() -> ColumnKind:
        return ColumnKind(NUMERIC)

    @staticmethod
    def categorical(levels=None) -> ColumnKind:
        return ColumnKind(CATEGORICAL, None if levels is None else tuple(levels))

    @property
    def is_categorical(self) -> bool:
        return self.tag == CATEGORICAL

    @property
    def is_numeric(self) -> bool:
        return self.tag == NUMERIC

    @property
    def n_levels(self) -> int:
        if self.levels is None:
            raise SchemaError("level set not yet inferred")
        return len(self.levels)


@dataclass(frozen=True)
class Column:
    name: str
    kind: ColumnKind


@dataclass(frozen=True)
class Schema:
    """Ordered column list with unique, non-empty names."""

    columns: tuple[Column, ...]

    def __post_init__(self) -> None:
        if not self.columns:
            raise SchemaError("schema must declare at least one column")
        names = [c.name for c in self.columns]
        if any(not n for n in names):
            raise SchemaError("column names must be non-empty")
        if len(set(names)) != len(names):
            raise SchemaError("duplicate column names in schema")

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(c.name for c in self.columns)

    def index(self, name: str) -> int:
        for i, c in enumerate(self.columns):
            if c.name == name:
                return i
        raise SchemaError(f"unknown column {name!r}")

    def kind(self, name: str) -> ColumnKind:
        return self.columns[self.index(name)].kind

    def __len__(self) -> int:
        return len(self.columns)

    def replace_kind(self, name: str, kind: ColumnKind) -> Schema:
        i = self.index(name)
        cols = list(self.columns)
        cols[i] = Column(name, kind)
        return Schema(tuple(cols))

    @staticmethod
    def from_dict(doc: dict) -> Schema:
        if not isinstance(doc, dict) or "columns" not in doc:
            raise SchemaError("schema document must be an object with a 'columns' list")
        cols = []
        for entry in doc["columns"]:
            if not isinstance(entry, dict) or "name" not in entry or "kind" not in entry:
                raise SchemaError(f"bad column entry: {entry!r}")
            name = entry["name"]
            kind_tag = entry["kind"]
            if kind_tag == NUMERIC:
                kind = ColumnKind.numeric()
            elif kind_tag == CATEGORICAL:
                if entry.get("infer", False):
                    kind = ColumnKind.categorical(None)
                elif "levels" in entry:
                    kind = ColumnKind.categorical(entry["levels"])
                else:
                    raise SchemaError(
                        f"categorical column {name!r} needs 'levels' or 'infer': true"
                    )
            else:
                raise SchemaError(f"unknown column kind {kind_tag!r}")
            cols.append(Column(name, kind))
        return Schema(tuple(cols))

    def to_dict(self) -> dict:
        out = []
        for c in self.columns:
            if c.kind.is_numeric:
                out.append({"name": c.name, "kind": NUMERIC})
            elif c.kind.levels is None:
                out.append({"name": c.name, "kind": CATEGORICAL, "infer": True})
            else:
                out.append({"name": c.name, "kind": CATEGORICAL, "levels": list(c.kind.levels)})
        return {"columns": out}


def load_schema(path: str | Path) -> Schema:
    """Read a schema from a JSON document (grammar documented in the README)."""
    try:
        doc = json.loads(Path(path).read_text())
    except json.JSONDecodeError as err:
        raise SchemaError(f"schema file is not valid JSON: {err}") from err
    return Schema.from_dict(doc)


def _freeze(arr: np.ndarray) -> np.ndarray:
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True)
class Dataset:
    """Immutable columnar dataset aligned with its schema.

    ``missing[i]`` is a boolean mask over rows for column i, or None when the
    column has no missing cells. Arrays are marked read-only; operations
    return new datasets.
    """

    schema: Schema
    columns: tuple[np.ndarray, ...]
    missing: tuple[np.ndarray | None, ...] = field(default=None)  # type: ignore[assignment]

    def __post_init__(self) -> None:
        if self.missing is None:
            object.__setattr__(self, "missing", tuple(None for _ in self.columns))
        if len(self.columns) != len(self.schema):
            raise DataError("column arrays do not match schema")
        if len(self.missing) != len(self.columns):
            raise DataError("missing masks do not match schema")
        n = self.columns[0].shape[0] if self.columns else 0
        cols = []
        masks = []
        for col, arr, mask in zip(self.schema.columns, self.columns, self.missing):
            if arr.ndim != 1 or arr.shape[0] != n:
                raise DataError(f"column {col.name!r} has wrong shape")
            if col.kind.is_numeric:
                arr = np.ascontiguousarray(arr, dtype=np.float64)
            else:
                if col.kind.levels is None:
                    raise SchemaError(f"column {col.name!r} has no concrete level set")
                arr = np.ascontiguousarray(arr, dtype=np.int64)
                ok = (arr >= 0) & (arr < col.kind.n_levels)
                if mask is not None:
                    ok |= mask
                if not bool(ok.all()):
                    raise DataError(f"column {col.name!r} holds out-of-range level codes")
            if mask is not None:
                mask = np.ascontiguousarray(mask, dtype=bool)
                if mask.shape != (n,):
                    raise DataError(f"missing mask for {col.name!r} has wrong shape")
                if not mask.any():
                    mask = None
                else:
                    mask = _freeze(mask.copy())
            cols.append(_freeze(arr.copy() if arr.flags.writeable else arr))
            masks.append(mask)
        object.__setattr__(self, "columns", tuple(cols))
        object.__setattr__(self, "missing", tuple(masks))

    @property
    def n_rows(self) -> int:
        return int(self.columns[0].shape[0])

    @property
    def n_cols(self) -> int:
        return len(self.columns)

    @property
    def has_missing(self) -> bool:
        return any(m is not None for m in self.missing)

    def column(self, name: str) -> np.ndarray:
        return self.columns[self.schema.index(name)]

    def take(self, rows: np.ndarray) -> Dataset:
        """Row subset/resample by index array; masks follow along."""
        rows = np.asarray(rows, dtype=np.int64)
        cols = tuple(arr[rows] for arr in self.columns)
        masks = tuple(None if m is None else m[rows] for m in self.missing)
        return Dataset(self.schema, cols, masks)

    def with_column(self, name: str, values: np.ndarray) -> Dataset:
        i = self.schema.index(name)
        cols = list(self.columns)
        cols[i] = values
        masks = list(self.missing)
        masks[i] = None
        return Dataset(self.schema, tuple(cols), tuple(masks))


def load_csv(
    path: str | Path,
    schema: Schema,
    missing_tokens: tuple[str, ...] = DEFAULT_MISSING_TOKENS,
) -> tuple[Dataset, Schema]:
    """Parse an RFC-4180 CSV with a header row against ``schema``.

    The header must contain exactly the schema's column names (any order).
    Cells equal to a missing token are flagged missing. Categorical columns
    marked "infer" get their level set from the data in first-appearance
    order. Returns the dataset and the (possibly concretised) schema.
    """
    missing_set = set(missing_tokens)
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DataError(f"{path}: empty file") from None
        if set(header) != set(schema.names) or len(header) != len(schema.names):
            extra = sorted(set(header) - set(schema.names))
            absent = sorted(set(schema.names) - set(header))
            raise DataError(
                f"{path}: header mismatch (unexpected {extra}, missing {absent})"
            )
        rows = list(reader)

    pos = {name: header.index(name) for name in schema.names}
    n = len(rows)
    out_cols: list[np.ndarray] = []
    out_masks: list[np.ndarray | None] = []
    out_schema = schema
    for col in schema.columns:
        j = pos[col.name]
        cells = [row[j] if j < len(row) else "" for row in rows]
        mask = np.zeros(n, dtype=bool)
        if col.kind.is_numeric:
            values = np.empty(n, dtype=np.float64)
            for i, cell in enumerate(cells):
                if cell in missing_set:
                    mask[i] = True
                    values[i] = np.nan
                    continue
                try:
                    values[i] = float(cell)
                except ValueError:
                    raise DataError(
                        f"{path}: row {i + 2}, column {col.name!r}: "
                        f"cannot parse {cell!r} as a number"
                    ) from None
        else:
            if col.kind.levels is None:
                levels: list[str] = []
                lookup: dict[str, int] = {}
                codes = np.empty(n, dtype=np.int64)
                for i, cell in enumerate(cells):
                    if cell in missing_set:
                        mask[i] = True
                        codes[i] = _MISSING_CODE
                        continue
                    code = lookup.get(cell)
                    if code is None:
                        code = len(levels)
                        lookup[cell] = code
                        levels.append(cell)
                    codes[i] = code
                if not levels:
                    raise DataError(
                        f"{path}: column {col.name!r} has no observed levels to infer"
                    )
                kind = ColumnKind.categorical(levels)
                out_schema = out_schema.replace_kind(col.name, kind)
                values = codes
            else:
                lookup = {lvl: k for k, lvl in enumerate(col.kind.levels)}
                codes = np.empty(n, dtype=np.int64)
                for i, cell in enumerate(cells):
                    if cell in missing_set:
                        mask[i] = True
                        codes[i] = _MISSING_CODE
                        continue
                    code = lookup.get(cell)
                    if code is None:
                        raise DataError(
                            f"{path}: row {i + 2}, column {col.name!r}: "
                            f"label {cell!r} is not a declared level"
                        )
                    codes[i] = code
                values = codes
        out_cols.append(values)
        out_masks.append(mask if mask.any() else None)

    ds = Dataset(out_schema, tuple(out_cols), tuple(out_masks))
    return ds, out_schema


def write_csv(ds: Dataset, path: str | Path) -> None:
    """Write the dataset as CSV. Numeric cells use shortest round-trip text;
    categorical cells are written as their level labels. Missing cells come
    out as the empty string."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(ds.schema.names)
        formatted: list[list[str]] = []
        for col, arr, mask in zip(ds.schema.columns, ds.columns, ds.missing):
            if col.kind.is_numeric:
                cells = [repr(float(v)) for v in arr]
            else:
                levels = col.kind.levels
                cells = [levels[code] if code >= 0 else "" for code in arr]
            if mask is not None:
                cells = ["" if m else c for c, m in zip(cells, mask)]
            formatted.append(cells)
        for row in zip(*formatted):
            writer.writerow(row)


def replace_missing(ds: Dataset, seed: int) -> Dataset:
    """Fill every missing cell with a uniform draw from the column's observed
    values. Deterministic given ``seed``; columns are visited in schema order.
    """
    if not ds.has_missing:
        return ds
    rng = np.random.default_rng(seed)
    cols = list(ds.columns)
    masks: list[np.ndarray | None] = list(ds.missing)
    for i, (col, arr, mask) in enumerate(zip(ds.schema.columns, ds.columns, ds.missing)):
        if mask is None:
            continue
        donors = arr[~mask]
        if donors.size == 0:
            raise DataError(f"column {col.name!r} has no observed values to sample from")
        filled = arr.copy()
        picks = rng.integers(0, donors.size, size=int(mask.sum()))
        filled[mask] = donors[picks]
        cols[i] = filled
        masks[i] = None
    return Dataset(ds.schema, tuple(cols), tuple(masks))


@dataclass(frozen=True)
class LevelMapping:
    """Coarsening map for one categorical column: original label -> coarse label."""

    column: str
    mapping: dict[str, str]

    def __post_init__(self) -> None:
        if not self.mapping:
            raise SchemaError("level mapping must be non-empty")


def coarsen_levels(ds: Dataset, mapping: LevelMapping) -> Dataset:
    """Merge categorical levels according to ``mapping``.

    The map must cover every current level exactly once and mention no
    unknown labels. Coarse labels become the new level set, ordered by first
    appearance along the original level order.
    """
    i = ds.schema.index(mapping.column)
    kind = ds.schema.columns[i].kind
    if not kind.is_categorical:
        raise SchemaError(f"column {mapping.column!r} is not categorical")
    levels = kind.levels
    assert levels is not None
    unknown = sorted(set(mapping.mapping) - set(levels))
    if unknown:
        raise SchemaError(f"mapping mentions unknown levels {unknown}")
    uncovered = sorted(set(levels) - set(mapping.mapping))
    if uncovered:
        raise SchemaError(f"mapping leaves levels uncovered: {uncovered}")

    coarse_levels: list[str] = []
    coarse_index: dict[str, int] = {}
    code_map = np.empty(len(levels), dtype=np.int64)
    for k, lvl in enumerate(levels):
        target = mapping.mapping[lvl]
        if target not in coarse_index:
            coarse_index[target] = len(coarse_levels)
            coarse_levels.append(target)
        code_map[k] = coarse_index[target]

    arr = ds.columns[i]
    mask = ds.missing[i]
    new_codes = arr.copy()
    observed = ~mask if mask is not None else slice(None)
    new_codes[observed] = code_map[arr[observed]]

    schema = ds.schema.replace_kind(mapping.column, ColumnKind.categorical(coarse_levels))
    cols = list(ds.columns)
    cols[i] = new_codes
    return Dataset(schema, tuple(cols), ds.missing)


def head_n(ds: Dataset, n: int) -> Dataset:
    """First ``n`` rows in order."""
    if n < 0 or n > ds.n_rows:
        raise DataError(f"cannot take {n} rows from a dataset of {ds.n_rows}")
    return ds.take(np.arange(n, dtype=np.int64))


def drop_column(ds: Dataset, name: str) -> Dataset:
    """Remove one column; at least one column must remain."""
    i = ds.schema.index(name)
    if len(ds.schema) == 1:
        raise SchemaError("cannot drop the last remaining column")
    cols = tuple(arr for k, arr in enumerate(ds.columns) if k != i)
    masks = tuple(m for k, m in enumerate(ds.missing) if k != i)
    schema = Schema(tuple(c for k, c in enumerate(ds.schema.columns) if k != i))
    return Dataset(schema, cols, masks)
