"""Dataset loading (ARFF and CSV), synthetic generation and fold splitting.

Datasets hold a dense float feature matrix (nominal attributes encoded as
category indices), a label matrix in {-1, +1}, and the attribute schema.
Label columns in files use {0, 1}; 0 maps to -1 and 1 to +1.
"""

from __future__ import annotations

import csv
import io
import xml.etree.ElementTree as ElementTree
from dataclasses import dataclass

import numpy as np

NUMERIC = "numeric"
NOMINAL = "nominal"

MISSING_TOKENS = {"?", ""}


class ParseError(ValueError):
    def __init__(self, message: str, line: int | None = None):
        self.line = line
        super().__init__(message if line is None else f"line {line}: {message}")


class MissingValueError(ValueError):
    """Missing cells encountered while imputation is disabled."""


class InvalidFoldCount(ValueError):
    pass


@dataclass(frozen=True)
class Dataset:
    features: np.ndarray
    labels: np.ndarray
    attribute_kinds: tuple[str, ...]
    attribute_names: tuple[str, ...]
    label_names: tuple[str, ...]
    categories: tuple[tuple[str, ...] | None, ...]

    def __post_init__(self):
        object.__setattr__(self, "features", np.asarray(self.features, dtype=np.float64))
        object.__setattr__(self, "labels", np.asarray(self.labels, dtype=np.int8))
        if self.features.shape[0] != self.labels.shape[0]:
            raise ValueError("feature and label row counts differ")
        if not np.isin(self.labels, (-1, 1)).all():
            raise ValueError("labels must be encoded as -1/+1")

    @property
    def example_count(self) -> int:
        return self.features.shape[0]

    @property
    def attribute_count(self) -> int:
        return self.features.shape[1]

    @property
    def label_count(self) -> int:
        return self.labels.shape[1]

    def take(self, indices: np.ndarray) -> "Dataset":
        """Materialize the rows selected by an index array."""
        return Dataset(
            self.features[indices],
            self.labels[indices],
            self.attribute_kinds,
            self.attribute_names,
            self.label_names,
            self.categories,
        )


def dataset_from_arrays(features, labels, kinds=None) -> Dataset:
    """Convenience constructor with generated names (toy datasets, tests)."""
    features = np.asarray(features, dtype=np.float64)
    labels = np.asarray(labels)
    a = features.shape[1]
    kinds = tuple(kinds) if kinds is not None else (NUMERIC,) * a
    return Dataset(
        features,
        labels,
        kinds,
        tuple(f"x{i}" for i in range(a)),
        tuple(f"y{i}" for i in range(labels.shape[1])),
        tuple(None for _ in range(a)),
    )


# -- missing values ----------------------------------------------------------


def _resolve_missing(columns, kinds, names, impute):
    """Replace None cells per column (mean/mode) or reject them."""
    missing = [
        (row, col)
        for col, values in enumerate(columns)
        for row, v in enumerate(values)
        if v is None
    ]
    if not missing:
        return
    if impute != "meanmode":
        shown = ", ".join(f"(row {r}, {names[c]})" for r, c in missing[:10])
        more = "" if len(missing) <= 10 else f" and {len(missing) - 10} more"
        raise MissingValueError(f"missing cells: {shown}{more}")
    for col, values in enumerate(columns):
        present = [v for v in values if v is not None]
        if not present:
            raise MissingValueError(f"column {names[col]} has no observed values to impute from")
        if kinds[col] == NUMERIC:
            fill = float(np.mean(present))
        else:
            counts: dict = {}
            for v in present:
                counts[v] = counts.get(v, 0) + 1
            fill = max(sorted(counts), key=lambda k: counts[k])
        columns[col] = [fill if v is None else v for v in values]


def _encode(columns, kinds, names, label_positions, impute):
    """Turn parsed per-column cell lists into a Dataset."""
    _resolve_missing(columns, kinds, names, impute)
    label_set = set(label_positions)
    feature_cols = [i for i in range(len(columns)) if i not in label_set]
    n = len(columns[0]) if columns else 0
    features = np.empty((n, len(feature_cols)))
    out_kinds = []
    out_names = []
    out_categories = []
    for out_col, col in enumerate(feature_cols):
        values = columns[col]
        if kinds[col] == NUMERIC:
            features[:, out_col] = np.asarray(values, dtype=np.float64)
            out_categories.append(None)
        else:
            seen: dict = {}
            codes = np.empty(n)
            for row, v in enumerate(values):
                if v not in seen:
                    seen[v] = len(seen)
                codes[row] = seen[v]
            features[:, out_col] = codes
            out_categories.append(tuple(seen))
        out_kinds.append(kinds[col])
        out_names.append(names[col])
    labels = np.empty((n, len(label_positions)), dtype=np.int8)
    for out_col, col in enumerate(label_positions):
        for row, v in enumerate(columns[col]):
            text = str(v).strip()
            if text in ("0", "0.0"):
                labels[row, out_col] = -1
            elif text in ("1", "1.0"):
                labels[row, out_col] = 1
            else:
                raise ParseError(f"label {names[col]!r} has value {v!r} outside {{0, 1}}")
    return Dataset(
        features,
        labels,
        tuple(out_kinds),
        tuple(out_names),
        tuple(names[c] for c in label_positions),
        tuple(out_categories),
    )


# -- ARFF --------------------------------------------------------------------


def _strip_quotes(token: str) -> str:
    token = token.strip()
    if len(token) >= 2 and token[0] == token[-1] and token[0] in "'\"":
        return token[1:-1]
    return token


def _split_csv_like(text: str) -> list[str]:
    return next(csv.reader(io.StringIO(text), skipinitialspace=True))


def _parse_attribute_line(rest: str, line_no: int):
    rest = rest.strip()
    if rest.startswith(("'", '"')):
        quote = rest[0]
        end = rest.find(quote, 1)
        if end < 0:
            raise ParseError("unterminated attribute name", line_no)
        name, type_text = rest[1:end], rest[end + 1:].strip()
    else:
        parts = rest.split(None, 1)
        if len(parts) != 2:
            raise ParseError("attribute needs a name and a type", line_no)
        name, type_text = parts[0], parts[1].strip()
    if type_text.startswith("{"):
        if not type_text.endswith("}"):
            raise ParseError("unterminated nominal value list", line_no)
        values = [_strip_quotes(v) for v in _split_csv_like(type_text[1:-1])]
        return name, NOMINAL, tuple(values)
    kind = type_text.split()[0].lower()
    if kind in ("numeric", "real", "integer"):
        return name, NUMERIC, None
    raise ParseError(f"unsupported attribute type {type_text!r}", line_no)


def read_label_names_xml(path) -> list[str]:
    """Label attribute names from a Mulan-style XML label list."""
    root = ElementTree.parse(path).getroot()
    names = [
        element.attrib["name"]
        for element in root.iter()
        if element.tag.rsplit("}", 1)[-1] == "label" and "name" in element.attrib
    ]
    if not names:
        raise ParseError(f"no label entries found in {path}")
    return names


def load_arff(path, label_count: int | None = None, labels_xml=None, impute: str = "none") -> Dataset:
    """Load an ARFF file (dense or sparse data section).

    Labels are selected either as the trailing `label_count` attributes or by
    naming them in a Mulan-style XML file.  File label values must be 0 or 1.
    """
    if (label_count is None) == (labels_xml is None):
        raise ValueError("exactly one of label_count and labels_xml is required")
    names: list[str] = []
    kinds: list[str] = []
    nominal_values: list[tuple[str, ...] | None] = []
    rows: list[list] = []
    in_data = False
    with open(path, "r", encoding="utf-8") as handle:
        for line_no, raw in enumerate(handle, start=1):
            line = raw.strip()
            if not line or line.startswith("%"):
                continue
            lowered = line.lower()
            if not in_data:
                if lowered.startswith("@relation"):
                    continue
                if lowered.startswith("@attribute"):
                    name, kind, values = _parse_attribute_line(line[len("@attribute"):], line_no)
                    names.append(name)
                    kinds.append(kind)
                    nominal_values.append(values)
                    continue
                if lowered.startswith("@data"):
                    in_data = True
                    continue
                raise ParseError(f"unexpected header line {line!r}", line_no)
            rows.append(_parse_arff_row(line, line_no, kinds, nominal_values))
    if not in_data:
        raise ParseError("no @data section found")
    if not rows:
        raise ParseError("empty @data section")
    if not names:
        raise ParseError("no attributes declared")
    columns = [[row[c] for row in rows] for c in range(len(names))]
    label_positions = _label_positions(names, label_count, labels_xml)
    return _encode(columns, kinds, names, label_positions, impute)


def _parse_arff_row(line: str, line_no: int, kinds, nominal_values) -> list:
    if line.startswith("{"):
        if not line.endswith("}"):
            raise ParseError("unterminated sparse row", line_no)
        row = [_sparse_default(kinds[c], nominal_values[c]) for c in range(len(kinds))]
        body = line[1:-1].strip()
        if body:
            for item in _split_csv_like(body):
                parts = item.strip().split(None, 1)
                if len(parts) != 2:
                    raise ParseError(f"bad sparse entry {item!r}", line_no)
                try:
                    index = int(parts[0])
                except ValueError:
                    raise ParseError(f"bad sparse index {parts[0]!r}", line_no) from None
                if not 0 <= index < len(kinds):
                    raise ParseError(f"sparse index {index} out of range", line_no)
                row[index] = _parse_cell(parts[1], kinds[index], nominal_values[index], line_no)
        return row
    cells = _split_csv_like(line)
    if len(cells) != len(kinds):
        raise ParseError(f"expected {len(kinds)} values, got {len(cells)}", line_no)
    return [
        _parse_cell(cell, kinds[c], nominal_values[c], line_no) for c, cell in enumerate(cells)
    ]


def _sparse_default(kind: str, values):
    if kind == NUMERIC:
        return 0.0
    return values[0]  # ARFF sparse semantics: index 0 of the nominal list


def _parse_cell(text: str, kind: str, values, line_no: int):
    token = _strip_quotes(str(text).strip())
    if token in MISSING_TOKENS:
        return None
    if kind == NUMERIC:
        try:
            return float(token)
        except ValueError:
            raise ParseError(f"bad numeric value {token!r}", line_no) from None
    if token not in values:
        raise ParseError(f"value {token!r} not among the declared {values}", line_no)
    return token


def _label_positions(names: list[str], label_count, labels_xml) -> list[int]:
    if labels_xml is not None:
        wanted = set(read_label_names_xml(labels_xml))
        positions = [i for i, name in enumerate(names) if name in wanted]
        if len(positions) != len(wanted):
            found = {names[i] for i in positions}
            raise ParseError(f"label names missing from the data: {sorted(wanted - found)}")
        return positions
    if not 0 < label_count < len(names):
        raise ParseError(f"label count {label_count} out of range for {len(names)} attributes")
    return list(range(len(names) - label_count, len(names)))


# -- CSV ---------------------------------------------------------------------


def load_csv(path, label_count: int | None = None, label_prefix: str | None = None,
             impute: str = "none") -> Dataset:
    """Load a delimited file with a header row.

    Labels are the trailing `label_count` columns or all columns whose name
    starts with `label_prefix`.  Columns with any non-numeric observed value
    become nominal attributes.
    """
    if (label_count is None) == (label_prefix is None):
        raise ValueError("exactly one of label_count and label_prefix is required")
    with open(path, "r", encoding="utf-8", newline="") as handle:
        reader = csv.reader(handle)
        try:
            names = [name.strip() for name in next(reader)]
        except StopIteration:
            raise ParseError("empty file; a header row is required") from None
        raw_rows = [row for row in reader if row]
    if not raw_rows:
        raise ParseError("no data rows")
    for i, row in enumerate(raw_rows, start=2):
        if len(row) != len(names):
            raise ParseError(f"expected {len(names)} values, got {len(row)}", i)
    if label_prefix is not None:
        label_positions = [i for i, name in enumerate(names) if name.startswith(label_prefix)]
        if not label_positions:
            raise ParseError(f"no columns start with {label_prefix!r}")
    else:
        if not 0 < label_count < len(names):
            raise ParseError(f"label count {label_count} out of range for {len(names)} columns")
        label_positions = list(range(len(names) - label_count, len(names)))
    label_set = set(label_positions)
    columns = []
    kinds = []
    for col in range(len(names)):
        raw = [row[col].strip() for row in raw_rows]
        present = [v for v in raw if v not in MISSING_TOKENS]
        numeric = True
        for v in present:
            try:
                float(v)
            except ValueError:
                numeric = False
                break
        if col in label_set:
            numeric = False  # keep label tokens verbatim for 0/1 validation
        kinds.append(NUMERIC if numeric else NOMINAL)
        if numeric:
            columns.append([None if v in MISSING_TOKENS else float(v) for v in raw])
        else:
            columns.append([None if v in MISSING_TOKENS else v for v in raw])
    return _encode(columns, kinds, names, label_positions, impute)


def save_csv(dataset: Dataset, path) -> None:
    """Write a Dataset back to CSV; labels are written as 0/1."""
    with open(path, "w", encoding="utf-8", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(list(dataset.attribute_names) + list(dataset.label_names))
        for row in range(dataset.example_count):
            cells = []
            for col in range(dataset.attribute_count):
                value = dataset.features[row, col]
                if dataset.attribute_kinds[col] == NOMINAL:
                    cells.append(dataset.categories[col][int(value)])
                else:
                    cells.append(repr(float(value)))
            cells.extend("1" if v > 0 else "0" for v in dataset.labels[row])
            writer.writerow(cells)


# -- synthetic data ----------------------------------------------------------


def synth_dataset(n: int, a: int, l: int, label_correlation: float, seed: int) -> Dataset:
    """Reproducible synthetic dataset with tunable label correlation.

    Features are uniform in [0, 1).  Each label thresholds a mixture of one
    shared random linear score and its own random linear score, mixed by
    `label_correlation` (1 = all labels share the same score, 0 = independent).
    Thresholds sit at a common quantile so correlation 1 yields identical
    label columns.
    """
    if n < 1 or a < 1 or l < 1:
        raise ValueError("n, a and l must all be positive")
    if not 0.0 <= label_correlation <= 1.0:
        raise ValueError("label_correlation must be in [0, 1]")
    rng = np.random.default_rng(seed)
    features = rng.random((n, a))
    shared_direction = rng.standard_normal(a)
    own_directions = rng.standard_normal((a, l))
    quantile = rng.uniform(0.3, 0.7)
    shared = features @ shared_direction
    own = features @ own_directions
    scores = label_correlation * shared[:, None] + (1.0 - label_correlation) * own
    thresholds = np.quantile(scores, quantile, axis=0)
    labels = np.where(scores > thresholds[None, :], 1, -1).astype(np.int8)
    return dataset_from_arrays(features, labels)


# -- cross validation --------------------------------------------------------


def kfold_split(dataset: Dataset, k: int, seed: int) -> list[tuple[np.ndarray, np.ndarray]]:
    """Disjoint shuffled folds as (train_indices, test_indices) pairs."""
    n = dataset.example_count
    if k < 2 or k > n:
        raise InvalidFoldCount(f"fold count {k} must be in [2, {n}]")
    rng = np.random.default_rng(seed)
    permutation = rng.permutation(n)
    folds = np.array_split(permutation, k)
    splits = []
    for i in range(k):
        test = np.sort(folds[i])
        train = np.sort(np.concatenate([folds[j] for j in range(k) if j != i]))
        splits.append((train, test))
    return splits
