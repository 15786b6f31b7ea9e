"""CSV ingestion and synthetic data generators."""

from __future__ import annotations

import csv
import dataclasses
import math
from pathlib import Path

import numpy as np

from privsample.errors import InvalidInputError, ParseError
from privsample.noise import gaussian_vector_sample

REAL_CSV = "real_csv"
BIT_CSV = "bit_csv"


def ingest_dataset(path, schema: str) -> np.ndarray:
    """Read a headerless CSV into a float matrix (real_csv) or int8 bit matrix (bit_csv).

    Blank lines are skipped. Every row must have the width of the first one.

    Raises:
        ParseError: On a ragged, non-numeric or non-finite row, or a value
            other than 0/1 under bit_csv; the message carries the line number.
    """
    if schema not in (REAL_CSV, BIT_CSV):
        raise InvalidInputError(f"unknown schema {schema!r}")
    rows, width = [], None
    with open(path, newline="") as fh:
        for lineno, record in enumerate(csv.reader(fh), start=1):
            if not record or all(not f.strip() for f in record):
                continue
            if width is None:
                width = len(record)
            elif len(record) != width:
                raise ParseError(f"expected {width} fields, found {len(record)}", line=lineno)
            rows.append(_parse_row(record, schema, lineno))
    if not rows:
        raise ParseError("file contains no data rows")
    if schema == BIT_CSV:
        return np.array(rows, dtype=np.int8)
    return np.array(rows, dtype=float)


def _parse_row(record, schema, lineno):
    out = []
    for field in record:
        field = field.strip()
        if schema == BIT_CSV:
            if field not in ("0", "1"):
                raise ParseError(f"bit_csv value must be 0 or 1, got {field!r}", line=lineno)
            out.append(int(field))
            continue
        try:
            value = float(field)
        except ValueError:
            raise ParseError(f"not a number: {field!r}", line=lineno) from None
        if not math.isfinite(value):
            raise ParseError(f"non-finite value {field!r}", line=lineno)
        out.append(value)
    return out


def write_csv(path, data) -> None:
    X = np.asarray(data)
    fmt = "%d" if np.issubdtype(X.dtype, np.integer) else "%.17g"
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    np.savetxt(path, X, delimiter=",", fmt=fmt)


# --- generators ---------------------------------------------------------------


@dataclasses.dataclass(frozen=True)
class GeneratorSpec:
    """A parsed generator string.

    Forms::

        gaussian:d=3                     N(0, I_3)
        gaussian:mean=1,2;cov_diag=1,4   N(mean, diag)
        gaussian:mean=0,0;cov=2,1|1,2    N(mean, full covariance, rows split by |)
        constant:value=0,0               every row equal to value
        product:p=0.1,0.9                independent Bernoulli bits
    """

    kind: str
    mean: np.ndarray | None = None
    cov: np.ndarray | None = None
    p: np.ndarray | None = None

    @property
    def d(self) -> int:
        return int((self.p if self.kind == "product" else self.mean).size)

    @property
    def schema(self) -> str:
        return BIT_CSV if self.kind == "product" else REAL_CSV

    def sample(self, n: int, rng: np.random.Generator) -> np.ndarray:
        if n < 0:
            raise InvalidInputError("row count must be nonnegative")
        if self.kind == "product":
            return (rng.random((n, self.d)) < self.p).astype(np.int8)
        if self.kind == "constant":
            return np.tile(self.mean, (n, 1))
        return gaussian_vector_sample(self.mean, self.cov, rng, size=n)


def _floats(text: str, key: str) -> np.ndarray:
    try:
        vals = np.array([float(v) for v in text.split(",")], dtype=float)
    except ValueError:
        raise InvalidInputError(f"bad number list for {key!r}: {text!r}") from None
    if vals.size == 0 or not np.all(np.isfinite(vals)):
        raise InvalidInputError(f"bad number list for {key!r}: {text!r}")
    return vals


def parse_generator(text: str) -> GeneratorSpec:
    """Parse a generator string (see :class:`GeneratorSpec`)."""
    kind, _, rest = text.partition(":")
    kind = kind.strip()
    fields = {}
    for part in filter(None, (p.strip() for p in rest.split(";"))):
        key, sep, value = part.partition("=")
        if not sep:
            raise InvalidInputError(f"generator field {part!r} is not key=value")
        fields[key.strip()] = value.strip()
    if kind == "product":
        p = _floats(fields.get("p", ""), "p")
        if np.any((p < 0) | (p > 1)):
            raise InvalidInputError("product probabilities must lie in [0, 1]")
        return GeneratorSpec("product", p=p)
    if kind == "constant":
        return GeneratorSpec("constant", mean=_floats(fields.get("value", ""), "value"))
    if kind != "gaussian":
        raise InvalidInputError(f"unknown generator kind {kind!r}")
    if "d" in fields:
        try:
            d = int(fields["d"])
        except ValueError:
            raise InvalidInputError(f"bad dimension {fields['d']!r}") from None
        if d < 1:
            raise InvalidInputError(f"dimension must be >= 1, got {d}")
        mean = np.zeros(d)
    else:
        mean = _floats(fields.get("mean", ""), "mean")
        d = mean.size
    if "cov" in fields:
        cov = np.vstack([_floats(r, "cov") for r in fields["cov"].split("|")])
    elif "cov_diag" in fields:
        cov = np.diag(_floats(fields["cov_diag"], "cov_diag"))
    else:
        cov = np.eye(d)
    if cov.shape != (d, d):
        raise InvalidInputError(f"covariance shape {cov.shape} does not match dimension {d}")
    return GeneratorSpec("gaussian", mean=mean, cov=cov)
