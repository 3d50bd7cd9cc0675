"""Rectangular dataset container: discrete feature codes plus a binary
outcome, with optional train/test tags and CSV round-tripping."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, replace
from typing import Optional, TextIO, Union

import numpy as np

TRAIN, TEST = 0, 1
SPLIT_COLUMN = "__split__"
_SPLIT_NAMES = {TRAIN: "Train", TEST: "Test"}
_SPLIT_CODES = {"Train": TRAIN, "Test": TEST}


class DataError(ValueError):
    """Malformed input data (files, tables, encodings)."""


@dataclass(frozen=True)
class Dataset:
    feature_names: tuple[str, ...]
    features: np.ndarray  # (rows, features) small non-negative ints
    outcome: np.ndarray  # (rows,) values in {0, 1}
    cards: tuple[int, ...]  # declared cardinality per feature column
    split: Optional[np.ndarray] = None  # per-row TRAIN/TEST tag

    def __post_init__(self) -> None:
        feats = np.asarray(self.features, dtype=np.int64)
        out = np.asarray(self.outcome, dtype=np.int64)
        object.__setattr__(self, "features", feats)
        object.__setattr__(self, "outcome", out)
        if feats.ndim != 2:
            raise DataError("features must be a 2-D table")
        if len(self.feature_names) != feats.shape[1]:
            raise DataError("one name per feature column required")
        if len(set(self.feature_names)) != len(self.feature_names):
            raise DataError("feature names must be unique")
        if len(self.cards) != feats.shape[1]:
            raise DataError("one cardinality per feature column required")
        if out.shape != (feats.shape[0],):
            raise DataError("outcome must align with the feature rows")
        if feats.size and feats.min() < 0:
            raise DataError("feature codes must be non-negative")
        for j, card in enumerate(self.cards):
            if card < 2:
                raise DataError(f"column {j} needs cardinality >= 2")
            if feats.shape[0] and feats[:, j].max() >= card:
                raise DataError(
                    f"column {self.feature_names[j]} holds a code >= its "
                    f"cardinality {card}"
                )
        if out.size and not np.isin(out, (0, 1)).all():
            raise DataError("outcome values must be 0 or 1")
        if self.split is not None:
            tags = np.asarray(self.split, dtype=np.int64)
            object.__setattr__(self, "split", tags)
            if tags.shape != out.shape:
                raise DataError("split tags must align with the rows")
            if tags.size and not np.isin(tags, (TRAIN, TEST)).all():
                raise DataError("split tags must be Train/Test codes")

    @property
    def row_count(self) -> int:
        return self.features.shape[0]

    @property
    def feature_count(self) -> int:
        return self.features.shape[1]

    def subset(self, mask: np.ndarray) -> "Dataset":
        return replace(
            self,
            features=self.features[mask],
            outcome=self.outcome[mask],
            split=None if self.split is None else self.split[mask],
        )

    def train_view(self) -> "Dataset":
        if self.split is None:
            raise DataError("dataset carries no split tags")
        return self.subset(self.split == TRAIN)

    def test_view(self) -> "Dataset":
        if self.split is None:
            raise DataError("dataset carries no split tags")
        return self.subset(self.split == TEST)


def split(data: Dataset, train_fraction: float, seed: int) -> Dataset:
    """Tag rows Train/Test by a uniform random permutation.

    The train count is round(fraction * rows), so counts stay within one
    row of the requested proportions; no stratification.
    """
    if not 0 < train_fraction < 1:
        raise DataError("train_fraction must lie strictly between 0 and 1")
    n = data.row_count
    if n == 0:
        raise DataError("cannot split an empty dataset")
    rng = np.random.default_rng(seed)
    order = rng.permutation(n)
    n_train = int(round(train_fraction * n))
    tags = np.full(n, TEST, dtype=np.int64)
    tags[order[:n_train]] = TRAIN
    return replace(data, split=tags)


def to_csv(
    data: Dataset, target: Union[str, TextIO], outcome_name: str = "Y"
) -> None:
    """Write the dataset with a header row; split tags go to a trailing
    ``__split__`` column when present."""
    close = False
    if isinstance(target, str):
        handle: TextIO = open(target, "w", newline="")
        close = True
    else:
        handle = target
    try:
        writer = csv.writer(handle, lineterminator="\n")
        header = list(data.feature_names) + [outcome_name]
        if data.split is not None:
            header.append(SPLIT_COLUMN)
        writer.writerow(header)
        for i in range(data.row_count):
            row = [int(v) for v in data.features[i]] + [int(data.outcome[i])]
            if data.split is not None:
                row.append(_SPLIT_NAMES[int(data.split[i])])
            writer.writerow(row)
    finally:
        if close:
            handle.close()


def from_csv(source: Union[str, TextIO], outcome_name: str = "Y") -> Dataset:
    """Read a dataset written by :func:`to_csv` (or any integer CSV with a
    header naming the outcome column)."""
    close = False
    if isinstance(source, str):
        handle: TextIO = open(source, "r", newline="")
        close = True
    else:
        handle = source
    try:
        reader = csv.reader(handle)
        try:
            header = next(reader)
        except StopIteration:
            raise DataError("empty CSV") from None
        if outcome_name not in header:
            raise DataError(f"no {outcome_name!r} column in the CSV header")
        y_col = header.index(outcome_name)
        split_col = header.index(SPLIT_COLUMN) if SPLIT_COLUMN in header else None
        feat_cols = [
            k for k in range(len(header)) if k != y_col and k != split_col
        ]
        rows: list[list[int]] = []
        outcome: list[int] = []
        tags: list[int] = []
        for line_no, record in enumerate(reader, start=2):
            if len(record) != len(header):
                raise DataError(f"line {line_no}: expected {len(header)} fields")
            try:
                rows.append([int(record[k]) for k in feat_cols])
                outcome.append(int(record[y_col]))
            except ValueError as exc:
                raise DataError(f"line {line_no}: {exc}") from None
            if split_col is not None:
                if record[split_col] not in _SPLIT_CODES:
                    raise DataError(f"line {line_no}: bad split tag")
                tags.append(_SPLIT_CODES[record[split_col]])
        if not rows:
            raise DataError("CSV holds no data rows")
        features = np.asarray(rows, dtype=np.int64)
        cards = tuple(max(2, int(features[:, j].max()) + 1) for j in range(features.shape[1]))
        return Dataset(
            feature_names=tuple(header[k] for k in feat_cols),
            features=features,
            outcome=np.asarray(outcome, dtype=np.int64),
            cards=cards,
            split=np.asarray(tags, dtype=np.int64) if tags else None,
        )
    finally:
        if close:
            handle.close()


def dataset_to_csv_text(data: Dataset, outcome_name: str = "Y") -> str:
    buf = io.StringIO()
    to_csv(data, buf, outcome_name=outcome_name)
    return buf.getvalue()
