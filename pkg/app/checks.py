import logging
from typing import Sequence

import numpy as np
import pandas as pd
from numpy.typing import ArrayLike

from .errors import DegenerateSample, NonMonotoneTime, NonUnitQuaternion, ParseError

logger = logging.getLogger(__name__)

# Data row i of a CSV file with a header sits on line i + 2
FIRST_DATA_LINE = 2


def assert_columns(df: pd.DataFrame, required: Sequence[str]):
    """Ensure every required column is present in the header"""
    missing = [c for c in required if c not in df.columns]
    if missing:
        raise ParseError(1, f"missing columns: {', '.join(missing)}")
    logger.debug("✓ Column check passed: %s", ", ".join(required))


def assert_numeric(df: pd.DataFrame, columns: Sequence[str]) -> pd.DataFrame:
    """Convert columns to float, rejecting empty, non-numeric and non-finite cells"""
    out = pd.DataFrame(index=df.index)
    for column in columns:
        values = pd.to_numeric(df[column], errors="coerce").astype(np.float64)
        bad = ~np.isfinite(values.to_numpy())
        if bad.any():
            row = int(np.flatnonzero(bad)[0])
            value = df[column].iloc[row]
            reason = f"non-numeric value {value!r} in column '{column}'"
            raise ParseError(row + FIRST_DATA_LINE, reason)
        out[column] = values
    return out


def assert_monotone(t: ArrayLike):
    """Timestamps must be strictly increasing"""
    t = np.asarray(t, dtype=np.float64)
    bad = np.flatnonzero(np.diff(t) <= 0)
    if bad.size:
        row = int(bad[0]) + 1
        raise NonMonotoneTime(
            row + FIRST_DATA_LINE, reason=f"timestamp {t[row]!r} not after {t[row - 1]!r}"
        )


def assert_nonzero_norm(vectors: ArrayLike, name: str, tol: float = 1e-9):
    """Every row of an (N, 3) array must have norm >= tol"""
    norms = np.linalg.norm(np.asarray(vectors, dtype=np.float64), axis=-1)
    bad = np.flatnonzero(norms < tol)
    if bad.size:
        row = int(bad[0])
        raise DegenerateSample(
            row + FIRST_DATA_LINE, reason=f"{name} norm {norms[row]:.3g} below {tol:g}"
        )


def assert_unit_quaternions(q: ArrayLike, tol: float = 1e-9):
    norms = np.linalg.norm(np.asarray(q, dtype=np.float64), axis=-1)
    bad = np.flatnonzero(np.abs(norms - 1.0) > tol)
    if bad.size:
        raise NonUnitQuaternion(
            f"quaternion at row {int(bad[0])} has norm {norms[bad[0]]!r}", batch_index=int(bad[0])
        )
