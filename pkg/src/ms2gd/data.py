"""Datasets: LibSVM text I/O, synthetic generators, row normalization.

LibSVM indices are 1-based on disk and 0-based in memory; the conversion
happens only in :func:`parse_libsvm` and :func:`format_libsvm`.
"""

from __future__ import annotations

import io
import math
from dataclasses import dataclass
from typing import IO, Iterable, Iterator, NamedTuple, Union

import numpy as np
from scipy import sparse

__all__ = [
    "LibSVMParseError",
    "SparseRow",
    "LabeledDataset",
    "SyntheticSpec",
    "parse_libsvm",
    "load_libsvm",
    "format_libsvm",
    "write_libsvm",
    "generate_synthetic",
    "normalize_rows",
]


class LibSVMParseError(ValueError):
    def __init__(self, lineno: int, msg: str):
        super().__init__(f"line {lineno}: {msg}")
        self.lineno = lineno


class SparseRow(NamedTuple):
    """0-based strictly increasing ``indices`` with finite ``values``."""

    indices: np.ndarray
    values: np.ndarray


@dataclass(frozen=True, eq=False)
class LabeledDataset:
    """Rows stored as a CSR matrix of shape ``(n, d)`` plus a label vector."""

    matrix: sparse.csr_matrix
    labels: np.ndarray

    def __post_init__(self):
        if self.matrix.shape[0] != len(self.labels):
            raise ValueError("row count does not match label count")

    @property
    def n(self) -> int:
        return self.matrix.shape[0]

    @property
    def d(self) -> int:
        return self.matrix.shape[1]

    def rows(self) -> Iterator[SparseRow]:
        m = self.matrix
        for i in range(self.n):
            lo, hi = m.indptr[i], m.indptr[i + 1]
            yield SparseRow(m.indices[lo:hi], m.data[lo:hi])

    def __eq__(self, other):
        if not isinstance(other, LabeledDataset):
            return NotImplemented
        if self.matrix.shape != other.matrix.shape:
            return False
        a, b = self.matrix, other.matrix
        return (np.array_equal(a.indptr, b.indptr)
                and np.array_equal(a.indices, b.indices)
                and np.array_equal(a.data, b.data)
                and np.array_equal(self.labels, other.labels))

    @classmethod
    def from_dense(cls, X, y) -> "LabeledDataset":
        X = np.asarray(X, dtype=float)
        m = sparse.csr_matrix(X)
        m.sort_indices()
        return cls(m, np.asarray(y, dtype=float))


def _parse_float(tok: str, lineno: int, what: str) -> float:
    try:
        v = float(tok)
    except ValueError:
        raise LibSVMParseError(lineno, f"non-numeric {what} {tok!r}") from None
    if not math.isfinite(v):
        raise LibSVMParseError(lineno, f"non-finite {what} {tok!r}")
    return v


def parse_libsvm(stream: Union[IO[str], Iterable[str], str],
                 binary_labels: bool = False) -> LabeledDataset:
    """Read LibSVM text: ``label idx:val idx:val ...`` per line.

    ``#`` starts a comment, blank lines are skipped. With ``binary_labels`` a
    ``{0, 1}`` label set is mapped to ``{-1, +1}``. The stream is consumed one
    line at a time.
    """
    if isinstance(stream, str):
        stream = io.StringIO(stream)
    labels: list[float] = []
    indptr = [0]
    indices: list[int] = []
    values: list[float] = []
    d = 0
    for lineno, line in enumerate(stream, start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        tokens = line.split()
        labels.append(_parse_float(tokens[0], lineno, "label"))
        prev = 0
        for tok in tokens[1:]:
            idx_s, sep, val_s = tok.partition(":")
            if not sep or not idx_s or not val_s:
                raise LibSVMParseError(lineno, f"malformed pair {tok!r}")
            try:
                idx = int(idx_s)
            except ValueError:
                raise LibSVMParseError(lineno, f"non-integer index {idx_s!r}") from None
            if idx < 1:
                raise LibSVMParseError(lineno, f"nonpositive index {idx}")
            if idx <= prev:
                kind = "duplicate" if idx == prev else "non-increasing"
                raise LibSVMParseError(lineno, f"{kind} index {idx}")
            prev = idx
            indices.append(idx - 1)
            values.append(_parse_float(val_s, lineno, "value"))
        d = max(d, prev)
        indptr.append(len(indices))

    y = np.asarray(labels, dtype=float)
    if binary_labels and len(y) and set(np.unique(y)) <= {0.0, 1.0}:
        y = 2.0 * y - 1.0
    m = sparse.csr_matrix(
        (np.asarray(values, dtype=float), np.asarray(indices, dtype=np.int64),
         np.asarray(indptr, dtype=np.int64)),
        shape=(len(y), d),
    )
    return LabeledDataset(m, y)


def load_libsvm(path, binary_labels: bool = False) -> LabeledDataset:
    with open(path, encoding="utf-8") as fh:
        return parse_libsvm(fh, binary_labels=binary_labels)


def _fmt(v: float) -> str:
    return "%.17g" % v


def format_libsvm(ds: LabeledDataset) -> str:
    """Serialize with 17 significant digits so reparsing is exact."""
    out = io.StringIO()
    write_libsvm(ds, out)
    return out.getvalue()


def write_libsvm(ds: LabeledDataset, stream: IO[str]) -> None:
    for label, row in zip(ds.labels, ds.rows()):
        pairs = " ".join(f"{j + 1}:{_fmt(v)}" for j, v in zip(row.indices, row.values))
        stream.write(f"{_fmt(label)} {pairs}\n" if pairs else f"{_fmt(label)}\n")


@dataclass(frozen=True)
class SyntheticSpec:
    """Desk-scale stand-in for a real dataset.

    ``condition`` is the ratio between the largest and smallest feature scale
    before rows are normalized; ``noise`` is a label flip rate for
    classification and a Gaussian noise level for regression.
    """

    n: int
    d: int
    condition: float = 1.0
    noise: float = 0.0
    seed: int = 0
    task: str = "classification"

    def __post_init__(self):
        if self.n < 1 or self.d < 1:
            raise ValueError("n and d must be positive")
        if self.noise < 0:
            raise ValueError("noise must be nonnegative")
        if self.condition < 1:
            raise ValueError("condition must be >= 1")
        if self.task not in ("classification", "regression"):
            raise ValueError(f"unknown task {self.task!r}")


def generate_synthetic(spec: SyntheticSpec) -> LabeledDataset:
    rng = np.random.default_rng(spec.seed)
    scales = np.geomspace(1.0, 1.0 / math.sqrt(spec.condition), spec.d)
    X = rng.standard_normal((spec.n, spec.d)) * scales
    norms = np.linalg.norm(X, axis=1)
    X = X / np.where(norms > 0, norms, 1.0)[:, None]
    w = rng.standard_normal(spec.d)
    score = X @ w
    if spec.task == "classification":
        y = np.where(score >= 0, 1.0, -1.0)
        flips = rng.random(spec.n) < spec.noise
        y[flips] = -y[flips]
    else:
        y = score + spec.noise * rng.standard_normal(spec.n)
    return LabeledDataset.from_dense(X, y)


def normalize_rows(ds: LabeledDataset) -> LabeledDataset:
    """Scale each nonzero row to unit Euclidean norm; zero rows stay zero."""
    m = ds.matrix.copy().astype(float)
    norms = np.sqrt(np.asarray(m.multiply(m).sum(axis=1)).ravel())
    scale = np.where(norms > 0, 1.0 / np.where(norms > 0, norms, 1.0), 1.0)
    m = sparse.csr_matrix(sparse.diags(scale) @ m)
    m.sort_indices()
    return LabeledDataset(m, ds.labels.copy())
