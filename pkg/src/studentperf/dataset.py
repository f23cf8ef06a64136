"""Student dataset ingestion: parsing, encoding, labeling, splitting, scaling.

The schema is fixed to the public student-performance table: 30 mixed
categorical/integer attributes followed by the three period grades G1, G2,
G3 (integers 0..20). Categorical attributes are label-encoded with one
integer column per attribute, keeping the feature width at 30.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import (
    DatasetTooSmall,
    EmptyInput,
    GradeOutOfRange,
    MalformedRow,
    RatioOutOfRange,
    UnknownCategory,
)
from .rng import STREAM_SHUFFLE, Xoshiro256StarStar

# Column order of the source table. Grades come last.
COLUMNS: tuple[str, ...] = (
    "school", "sex", "age", "address", "famsize", "Pstatus",
    "Medu", "Fedu", "Mjob", "Fjob", "reason", "guardian",
    "traveltime", "studytime", "failures", "schoolsup", "famsup", "paid",
    "activities", "nursery", "higher", "internet", "romantic",
    "famrel", "freetime", "goout", "Dalc", "Walc", "health", "absences",
    "G1", "G2", "G3",
)

GRADE_COLUMNS: tuple[str, ...] = ("G1", "G2", "G3")

# Category sets per nominal/binary column. Tuples are alphabetically
# ordered; their positions are the ordinal codes.
_YES_NO = ("no", "yes")
CATEGORY_LEVELS: dict[str, tuple[str, ...]] = {
    "school": ("GP", "MS"),
    "sex": ("F", "M"),
    "address": ("R", "U"),
    "famsize": ("GT3", "LE3"),
    "Pstatus": ("A", "T"),
    "Mjob": ("at_home", "health", "other", "services", "teacher"),
    "Fjob": ("at_home", "health", "other", "services", "teacher"),
    "reason": ("course", "home", "other", "reputation"),
    "guardian": ("father", "mother", "other"),
    "schoolsup": _YES_NO,
    "famsup": _YES_NO,
    "paid": _YES_NO,
    "activities": _YES_NO,
    "nursery": _YES_NO,
    "higher": _YES_NO,
    "internet": _YES_NO,
    "romantic": _YES_NO,
}

CATEGORICAL_COLUMNS: tuple[str, ...] = tuple(
    c for c in COLUMNS if c in CATEGORY_LEVELS
)
NUMERIC_COLUMNS: tuple[str, ...] = tuple(
    c for c in COLUMNS if c not in CATEGORY_LEVELS
)

GRADE_MIN, GRADE_MAX = 0, 20

# Default class bin edges over G3: [0, 10) fail, [10, 16) pass, [16, 20] excellent.
DEFAULT_GRADE_BINS: tuple[int, ...] = (10, 16)
DEFAULT_BIN_LABELS: tuple[str, ...] = ("fail", "pass", "excellent")


@dataclass(frozen=True)
class RawStudentRecord:
    """One validated row: categorical fields as strings, numeric as ints."""

    values: dict[str, str | int]

    def __getitem__(self, column: str) -> str | int:
        return self.values[column]


@dataclass(frozen=True)
class EncodingScheme:
    """Per-column category -> code tables. Codes follow alphabetical order
    of the category names, so a scheme version pins the mapping for good."""

    version: str
    tables: dict[str, dict[str, int]]

    def inverse(self) -> dict[str, dict[int, str]]:
        return {c: {v: k for k, v in t.items()} for c, t in self.tables.items()}


DEFAULT_SCHEME = EncodingScheme(
    version="v1",
    tables={c: {cat: i for i, cat in enumerate(levels)}
            for c, levels in CATEGORY_LEVELS.items()},
)


@dataclass(frozen=True)
class DataMatrix:
    """Dense row-major numeric matrix with named columns."""

    columns: tuple[str, ...]
    values: np.ndarray  # shape (n_rows, n_cols), float64

    def __post_init__(self):
        if len(set(self.columns)) != len(self.columns):
            raise ValueError("duplicate column names")
        if self.values.ndim != 2 or self.values.shape[1] != len(self.columns):
            raise ValueError("values shape does not match column count")

    @property
    def n_rows(self) -> int:
        return self.values.shape[0]

    @property
    def n_cols(self) -> int:
        return self.values.shape[1]

    def column(self, name: str) -> np.ndarray:
        return self.values[:, self.columns.index(name)]

    def select(self, names: tuple[str, ...]) -> "DataMatrix":
        idx = [self.columns.index(n) for n in names]
        return DataMatrix(tuple(names), self.values[:, idx].copy())

    def drop(self, names: tuple[str, ...]) -> "DataMatrix":
        keep = tuple(c for c in self.columns if c not in names)
        return self.select(keep)

    def take_rows(self, indices) -> "DataMatrix":
        return DataMatrix(self.columns, self.values[np.asarray(indices, dtype=int)])

    def write_csv(self, target) -> None:
        """Encoded matrix as comma-separated text with a header row."""
        def _dump(fh):
            fh.write(",".join(self.columns) + "\n")
            for row in self.values:
                fh.write(",".join(_fmt_number(v) for v in row) + "\n")
        if hasattr(target, "write"):
            _dump(target)
        else:
            with open(target, "w", encoding="utf-8", newline="") as fh:
                _dump(fh)


def _fmt_number(v: float) -> str:
    return str(int(v)) if float(v).is_integer() else repr(float(v))


@dataclass(frozen=True)
class LabeledDataset:
    """Feature matrix (grades excluded) plus per-row class labels."""

    features: DataMatrix
    labels: np.ndarray          # shape (n,), int class indices
    n_classes: int

    def __post_init__(self):
        for g in GRADE_COLUMNS:
            if g in self.features.columns:
                raise ValueError(f"grade column {g} leaked into features")
        if self.labels.shape != (self.features.n_rows,):
            raise ValueError("label count does not match feature rows")

    @property
    def n_rows(self) -> int:
        return self.features.n_rows

    def one_hot(self) -> np.ndarray:
        out = np.zeros((self.n_rows, self.n_classes))
        out[np.arange(self.n_rows), self.labels] = 1.0
        return out

    def take_rows(self, indices) -> "LabeledDataset":
        idx = np.asarray(indices, dtype=int)
        return LabeledDataset(self.features.take_rows(idx),
                              self.labels[idx], self.n_classes)


@dataclass(frozen=True)
class SplitDataset:
    train: LabeledDataset
    validation: LabeledDataset
    test: LabeledDataset
    seed: int
    train_ratio: float
    validation_ratio: float
    indices: dict[str, list[int]] = field(default_factory=dict)


def _detect_delimiter(header_line: str) -> str:
    return ";" if header_line.count(";") >= header_line.count(",") else ","


def parse_csv(source, delimiter: str | None = None) -> list[RawStudentRecord]:
    """Parse the delimited student table into validated records.

    `source` may be a path, a text/byte stream, or a str/bytes payload.
    The delimiter is auto-detected from the header (comma vs semicolon)
    unless given. Rows must match the 33-column schema exactly; any
    unknown category, non-integer numeric field, or grade outside 0..20
    rejects the row with row numbers counted from 1.
    """
    text = _read_text(source)
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines:
        raise EmptyInput("no content in input stream")
    delim = delimiter or _detect_delimiter(lines[0])
    reader = csv.reader(lines, delimiter=delim)
    header = [h.strip().strip('"') for h in next(reader)]
    if header != list(COLUMNS):
        raise MalformedRow(
            f"header does not match the {len(COLUMNS)}-column student schema "
            f"(got {len(header)} columns)"
        )
    records: list[RawStudentRecord] = []
    for rownum, fields in enumerate(reader, start=1):
        if len(fields) != len(COLUMNS):
            raise MalformedRow(
                f"row {rownum}: expected {len(COLUMNS)} fields, got {len(fields)}"
            )
        values: dict[str, str | int] = {}
        for col, raw in zip(COLUMNS, fields):
            raw = raw.strip().strip('"')
            if col in CATEGORY_LEVELS:
                if raw not in CATEGORY_LEVELS[col]:
                    raise UnknownCategory(
                        f"row {rownum}: {col}={raw!r} not in "
                        f"{CATEGORY_LEVELS[col]}"
                    )
                values[col] = raw
            else:
                try:
                    num = int(raw)
                except ValueError:
                    raise MalformedRow(
                        f"row {rownum}: {col}={raw!r} is not an integer"
                    ) from None
                if col in GRADE_COLUMNS and not GRADE_MIN <= num <= GRADE_MAX:
                    raise GradeOutOfRange(
                        f"row {rownum}: {col}={num} outside "
                        f"[{GRADE_MIN}, {GRADE_MAX}]"
                    )
                values[col] = num
        records.append(RawStudentRecord(values))
    if not records:
        raise EmptyInput("input has a header but no data rows")
    return records


def _read_text(source) -> str:
    if isinstance(source, (str, Path)) and "\n" not in str(source):
        p = Path(source)
        if p.exists():
            return p.read_text(encoding="utf-8")
    if isinstance(source, bytes):
        return source.decode("utf-8")
    if isinstance(source, str):
        return source
    data = source.read()
    return data.decode("utf-8") if isinstance(data, bytes) else data


def encode(records: list[RawStudentRecord],
           scheme: EncodingScheme = DEFAULT_SCHEME) -> DataMatrix:
    """33-column numeric matrix: ordinal codes for categoricals, numeric
    fields copied verbatim."""
    if not records:
        raise EmptyInput("no records to encode")
    values = np.empty((len(records), len(COLUMNS)))
    for i, rec in enumerate(records):
        for j, col in enumerate(COLUMNS):
            v = rec[col]
            if col in scheme.tables:
                table = scheme.tables[col]
                if v not in table:
                    raise UnknownCategory(f"{col}={v!r} not in scheme "
                                          f"{scheme.version}")
                values[i, j] = table[v]
            else:
                values[i, j] = float(v)
    return DataMatrix(COLUMNS, values)


def decode(matrix: DataMatrix,
           scheme: EncodingScheme = DEFAULT_SCHEME) -> list[RawStudentRecord]:
    """Inverse of encode, restoring the original categorical strings."""
    inv = scheme.inverse()
    records = []
    for row in matrix.values:
        values: dict[str, str | int] = {}
        for j, col in enumerate(matrix.columns):
            if col in inv:
                values[col] = inv[col][int(row[j])]
            else:
                values[col] = int(row[j])
        records.append(RawStudentRecord(values))
    return records


def bin_grade(g3: int, edges: tuple[int, ...] = DEFAULT_GRADE_BINS) -> int:
    """Class index of a final grade under half-open bins.

    With the default edges (10, 16): 0 for g3 < 10, 1 for 10 <= g3 < 16,
    2 for g3 >= 16.
    """
    if not GRADE_MIN <= g3 <= GRADE_MAX:
        raise GradeOutOfRange(f"g3={g3} outside [{GRADE_MIN}, {GRADE_MAX}]")
    label = 0
    for edge in edges:
        if g3 >= edge:
            label += 1
    return label


def bin_labels(edges: tuple[int, ...] = DEFAULT_GRADE_BINS) -> tuple[str, ...]:
    """Human names for the class bins."""
    if tuple(edges) == DEFAULT_GRADE_BINS:
        return DEFAULT_BIN_LABELS
    return tuple(f"bin_{i}" for i in range(len(edges) + 1))


def make_labeled(matrix: DataMatrix,
                 edges: tuple[int, ...] = DEFAULT_GRADE_BINS) -> LabeledDataset:
    """Attribute features plus class labels derived from the G3 column."""
    features = matrix.drop(GRADE_COLUMNS)
    g3 = matrix.column("G3")
    labels = np.array([bin_grade(int(g), edges) for g in g3], dtype=int)
    return LabeledDataset(features, labels, n_classes=len(edges) + 1)


def split(dataset: LabeledDataset, train_ratio: float,
          validation_ratio: float, seed: int) -> SplitDataset:
    """Deterministic shuffled partition into train/validation/test.

    Row order is a seeded Fisher-Yates permutation (xoshiro256**, shuffle
    stream). The first ceil(train_ratio * n) rows form the training block;
    the last ceil(validation_ratio * block) of that block become the
    validation set; the remainder of the permutation is the test set.
    """
    if not 0.0 < train_ratio < 1.0:
        raise RatioOutOfRange(f"train_ratio={train_ratio} outside (0, 1)")
    if not 0.0 <= validation_ratio < 1.0:
        raise RatioOutOfRange(
            f"validation_ratio={validation_ratio} outside [0, 1)")
    n = dataset.n_rows
    order = Xoshiro256StarStar(seed, stream=STREAM_SHUFFLE).permutation(n)
    block = math.ceil(train_ratio * n)
    n_val = math.ceil(validation_ratio * block)
    train_idx = order[: block - n_val]
    val_idx = order[block - n_val: block]
    test_idx = order[block:]
    if not train_idx:
        raise DatasetTooSmall("training partition is empty")
    if validation_ratio > 0 and not val_idx:
        raise DatasetTooSmall("validation partition is empty")
    if not test_idx:
        raise DatasetTooSmall("test partition is empty")
    return SplitDataset(
        train=dataset.take_rows(train_idx),
        validation=dataset.take_rows(val_idx),
        test=dataset.take_rows(test_idx),
        seed=seed,
        train_ratio=train_ratio,
        validation_ratio=validation_ratio,
        indices={"train": train_idx, "validation": val_idx, "test": test_idx},
    )


@dataclass(frozen=True)
class MinMaxScale:
    """Train-fitted per-column affine map onto [0, 1].

    Constant columns map to 0. Values outside the fitted range extrapolate
    linearly; no clipping.
    """

    columns: tuple[str, ...]
    mins: np.ndarray
    maxs: np.ndarray

    @classmethod
    def fit(cls, train: DataMatrix) -> "MinMaxScale":
        if train.n_rows == 0:
            raise EmptyInput("cannot fit scaler on an empty matrix")
        return cls(train.columns, train.values.min(axis=0),
                   train.values.max(axis=0))

    def transform(self, matrix: DataMatrix) -> DataMatrix:
        if matrix.columns != self.columns:
            raise ValueError("column mismatch between scaler and matrix")
        span = self.maxs - self.mins
        safe = np.where(span == 0.0, 1.0, span)
        scaled = (matrix.values - self.mins) / safe
        scaled[:, span == 0.0] = 0.0
        return DataMatrix(matrix.columns, scaled)

    def bounds(self) -> list[tuple[float, float]]:
        return [(float(lo), float(hi)) for lo, hi in zip(self.mins, self.maxs)]


def scale_features(train: DataMatrix, others: list[DataMatrix]
                   ) -> tuple[DataMatrix, list[DataMatrix], MinMaxScale]:
    """Min-max scale `train` and apply the same transform to `others`."""
    scaler = MinMaxScale.fit(train)
    return scaler.transform(train), [scaler.transform(m) for m in others], scaler


def write_split_manifest(split_data: SplitDataset, target) -> None:
    """Partition membership as JSON row-index lists."""
    doc = {
        "seed": split_data.seed,
        "train_ratio": split_data.train_ratio,
        "validation_ratio": split_data.validation_ratio,
        "partitions": {k: list(map(int, v))
                       for k, v in split_data.indices.items()},
    }
    if hasattr(target, "write"):
        json.dump(doc, target, indent=2)
    else:
        with open(target, "w", encoding="utf-8") as fh:
            json.dump(doc, fh, indent=2)
            fh.write("\n")


def records_to_csv(records: list[RawStudentRecord], target,
                   delimiter: str = ";") -> None:
    """Write records back in the source format (quoted categoricals)."""
    def _dump(fh):
        fh.write(delimiter.join(COLUMNS) + "\n")
        for rec in records:
            cells = []
            for col in COLUMNS:
                v = rec[col]
                cells.append(f'"{v}"' if isinstance(v, str) else str(v))
            fh.write(delimiter.join(cells) + "\n")
    if hasattr(target, "write"):
        _dump(target)
    else:
        with open(target, "w", encoding="utf-8", newline="") as fh:
            _dump(fh)


def load_matrix(path, delimiter: str | None = None) -> DataMatrix:
    """Parse + encode in one step."""
    return encode(parse_csv(path, delimiter))


ATTRIBUTE_COLUMNS: tuple[str, ...] = tuple(
    c for c in COLUMNS if c not in GRADE_COLUMNS
)


def parse_prediction_rows(source, delimiter: str | None = None,
                          scheme: EncodingScheme = DEFAULT_SCHEME) -> DataMatrix:
    """Parse rows for prediction: the full 33-column schema or the
    30-attribute schema without grades. Returns the encoded attribute
    matrix either way."""
    text = _read_text(source)
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines:
        raise EmptyInput("no content in input stream")
    delim = delimiter or _detect_delimiter(lines[0])
    header = [h.strip().strip('"') for h in
              next(csv.reader([lines[0]], delimiter=delim))]
    if header == list(COLUMNS):
        return encode(parse_csv(text, delim)).drop(GRADE_COLUMNS)
    if header != list(ATTRIBUTE_COLUMNS):
        raise MalformedRow(
            "prediction rows must carry the full 33-column schema or the "
            "30 attribute columns")
    # Re-parse via the full-schema path by appending placeholder grades.
    rows = [lines[0] + delim + delim.join(GRADE_COLUMNS)]
    for ln in lines[1:]:
        rows.append(ln + delim + delim.join(["0", "0", "0"]))
    return encode(parse_csv("\n".join(rows), delim)).drop(GRADE_COLUMNS)
