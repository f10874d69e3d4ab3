"""Shared value-matrix types, validation, and witness re-checking.

Every detector in this package operates on a finite matrix of values in
[0, 1].  The matrix itself is orientation-neutral: each operation documents
which axis plays which role.  The one convention shared package-wide is the
pairing rule for witness re-checks, see :func:`check_witness`.

Finite-sample semantics: existential claims ("some point satisfies ...")
always range over the sampled rows/columns of the matrix at hand.  Nothing
is extrapolated beyond the data.

All comparisons against a threshold pair (r, s) are closed with a shared
tolerance: "low" means ``value <= r + tol``, "high" means ``value >= s - tol``
with ``tol`` defaulting to :data:`DEFAULT_TOL`.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Mapping, Optional, Sequence, Union

import numpy as np

DEFAULT_TOL = 1e-9

# Slack used when re-checking an exact witness gap against float arithmetic.
GAP_SLACK = 1e-12

CHAIN_VARIANTS = ("direct", "successor")


class ValidationError(ValueError):
    """A domain object failed its construction invariants."""


class MatrixValidationError(ValidationError):
    """Raw matrix input is malformed; carries the first offending position."""

    def __init__(self, message: str, position: tuple[int, int] | None = None):
        super().__init__(message)
        self.position = position


class WitnessBoundsError(IndexError):
    """A witness references indices outside the matrix it is checked against."""


class WitnessCheckError(ValidationError):
    """An operation received a certificate that fails its own re-check."""


# ---------------------------------------------------------------------------
# Value matrices
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class ValueMatrix:
    """A finite matrix of values in [0, 1], immutable after validation.

    ``point_coords`` optionally attaches a coordinate vector to every column
    (used by continuity diagnostics); ``metric`` names the distance on those
    coordinates.  Construct through :func:`validate_matrix` so invariants are
    enforced; the raw constructor trusts its inputs.
    """

    values: np.ndarray
    row_labels: tuple[str, ...] | None = None
    col_labels: tuple[str, ...] | None = None
    point_coords: np.ndarray | None = None
    metric: str = "euclidean"

    @property
    def n_rows(self) -> int:
        return int(self.values.shape[0])

    @property
    def n_cols(self) -> int:
        return int(self.values.shape[1])

    def transposed(self) -> "ValueMatrix":
        """Swap axes.  Column coordinates do not transfer to rows."""
        return ValueMatrix(
            values=self.values.T,
            row_labels=self.col_labels,
            col_labels=self.row_labels,
            point_coords=None,
            metric=self.metric,
        )

    def submatrix(self, rows: Sequence[int] | None = None,
                  cols: Sequence[int] | None = None) -> "ValueMatrix":
        rows = range(self.n_rows) if rows is None else rows
        cols = range(self.n_cols) if cols is None else cols
        vals = self.values[np.ix_(list(rows), list(cols))]
        coords = None
        if self.point_coords is not None:
            coords = self.point_coords[list(cols)]
        return ValueMatrix(values=_freeze(vals), point_coords=coords,
                           metric=self.metric)


def _freeze(a: np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(a, dtype=float)
    a.flags.writeable = False
    return a


def validate_matrix(
    entries: Union[Sequence[float], Sequence[Sequence[float]], np.ndarray],
    n_rows: int | None = None,
    n_cols: int | None = None,
    *,
    row_labels: Sequence[str] | None = None,
    col_labels: Sequence[str] | None = None,
    point_coords: Sequence | None = None,
    metric: str = "euclidean",
) -> ValueMatrix:
    """Build a :class:`ValueMatrix` from raw entries, checking every invariant.

    ``entries`` may be a nested sequence (rows) or a flat row-major sequence
    together with explicit ``n_rows``/``n_cols``.  Raises
    :class:`MatrixValidationError` naming the first offending entry.
    """
    arr = np.asarray(entries, dtype=float)
    if arr.ndim == 1:
        if n_rows is None or n_cols is None:
            raise MatrixValidationError(
                "flat entry list requires explicit n_rows and n_cols")
        if arr.size != n_rows * n_cols:
            raise MatrixValidationError(
                f"dimension mismatch: {arr.size} entries for "
                f"{n_rows}x{n_cols} matrix")
        arr = arr.reshape(n_rows, n_cols)
    elif arr.ndim == 2:
        if n_rows is not None and arr.shape[0] != n_rows:
            raise MatrixValidationError(
                f"dimension mismatch: got {arr.shape[0]} rows, declared {n_rows}")
        if n_cols is not None and arr.shape[1] != n_cols:
            raise MatrixValidationError(
                f"dimension mismatch: got {arr.shape[1]} columns, declared {n_cols}")
    else:
        raise MatrixValidationError(f"entries must be 1- or 2-dimensional, got shape {arr.shape}")

    if arr.shape[0] < 1 or arr.shape[1] < 1:
        raise MatrixValidationError("matrix must have at least one row and one column")

    bad = ~((arr >= 0.0) & (arr <= 1.0))  # catches NaN as well
    if bad.any():
        i, j = map(int, np.argwhere(bad)[0])
        raise MatrixValidationError(
            f"entry out of range at ({i},{j}): {arr[i, j]!r} not in [0,1]",
            position=(i, j))

    coords = None
    if point_coords is not None:
        coords = np.asarray(point_coords, dtype=float)
        if coords.ndim == 1:
            coords = coords.reshape(-1, 1)
        if coords.shape[0] != arr.shape[1]:
            raise MatrixValidationError(
                f"point_coords length {coords.shape[0]} != n_cols {arr.shape[1]}")
        coords = _freeze(coords)

    def _tup(x):
        return None if x is None else tuple(str(v) for v in x)

    return ValueMatrix(values=_freeze(arr), row_labels=_tup(row_labels),
                       col_labels=_tup(col_labels), point_coords=coords,
                       metric=metric)


def value_grid_of(M: ValueMatrix, include_midpoints: bool = False) -> tuple[float, ...]:
    """Sorted distinct entries of ``M``; optionally closed under midpoints.

    Supplies candidate thresholds: a pattern realized at some real (r, s) is
    realized at a pair drawn from the matrix's own values (see the blocking
    sweep in :mod:`stabilitylab.detectors` for the endpoint-augmented form).
    """
    grid = np.unique(M.values)
    if include_midpoints and grid.size > 1:
        grid = np.unique(np.concatenate([grid, (grid[:-1] + grid[1:]) / 2.0]))
    return tuple(float(v) for v in grid)


# ---------------------------------------------------------------------------
# Thresholds and witnesses
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ThresholdPair:
    """A pair r < s in [0,1]; the scale at which every pattern is defined."""

    r: float
    s: float

    def __post_init__(self):
        if not (0.0 <= self.r <= 1.0 and 0.0 <= self.s <= 1.0):
            raise ValidationError(f"thresholds must lie in [0,1]: ({self.r}, {self.s})")
        if not self.r < self.s:
            raise ValidationError(f"thresholds require r < s strictly: ({self.r}, {self.s})")

    @property
    def gap(self) -> float:
        return self.s - self.r


def _check_increasing(name: str, seq: Sequence[int]) -> tuple[int, ...]:
    t = tuple(int(v) for v in seq)
    if any(b <= a for a, b in zip(t, t[1:])):
        raise ValidationError(f"{name} must be strictly increasing: {t}")
    return t


@dataclass(frozen=True)
class OrderWitness:
    """A staircase: rows are the probe points, columns the function family.

    Checked against a matrix with ``M[row, col] = value of (point, function)``.
    For every pair of positions i < j the witness claims
    ``M[row_j, col_i] <= r`` and ``M[row_i, col_j] >= s``.
    """

    row_indices: tuple[int, ...]
    col_indices: tuple[int, ...]
    thresholds: ThresholdPair

    def __post_init__(self):
        rows = _check_increasing("row_indices", self.row_indices)
        cols = _check_increasing("col_indices", self.col_indices)
        object.__setattr__(self, "row_indices", rows)
        object.__setattr__(self, "col_indices", cols)
        if len(rows) != len(cols) or not rows:
            raise ValidationError("row and column index lists must be nonempty and equal length")

    def __len__(self) -> int:
        return len(self.row_indices)


@dataclass(frozen=True)
class ShatteringWitness:
    """Rows shattered by columns at (r, s): every low/high pattern realized.

    ``realizers`` maps each subset of positions {0..d-1} (the positions forced
    low, i.e. ``<= r``) to a column index realizing that pattern; remaining
    positions must be high (``>= s``).  Stored as a sorted tuple of
    ``(positions, column)`` pairs so the witness stays hashable.
    """

    row_indices: tuple[int, ...]
    realizers: tuple[tuple[tuple[int, ...], int], ...]
    thresholds: ThresholdPair

    def __post_init__(self):
        rows = tuple(int(v) for v in self.row_indices)
        if len(set(rows)) != len(rows) or not rows:
            raise ValidationError("row_indices must be nonempty and distinct")
        object.__setattr__(self, "row_indices", rows)
        d = len(rows)
        canon = tuple(sorted((tuple(sorted(int(p) for p in E)), int(c))
                             for E, c in self.realizers))
        object.__setattr__(self, "realizers", canon)
        seen = {E for E, _ in canon}
        expected = 1 << d
        if len(canon) != expected or len(seen) != expected:
            raise ValidationError(
                f"realizers must cover all {expected} position subsets exactly once")
        for E, _ in canon:
            if any(p < 0 or p >= d for p in E):
                raise ValidationError(f"realizer positions out of range: {E}")

    @property
    def dimension(self) -> int:
        return len(self.row_indices)

    def realizer_map(self) -> dict[frozenset[int], int]:
        return {frozenset(E): c for E, c in self.realizers}


@dataclass(frozen=True)
class StrictOrderWitness:
    """A monotone chain of functions with an epsilon gap exhibited by probes.

    Checked against a matrix with ``M[row, col] = value of (point, function)``.
    Columns ``a_indices`` must be pointwise nondecreasing along the chain, up
    to ``tolerance``, over *all* rows.  The gap condition pairs the chain with
    probe rows ``b_rows`` (one per chain position):

    - variant ``"direct"``:    for i < j, ``M[b_j, a_i] + epsilon <= M[b_i, a_j]``
    - variant ``"successor"``: for i < j, ``M[b_j, a_i] + epsilon <= M[b_{i+1}, a_j]``
    """

    a_indices: tuple[int, ...]
    b_rows: tuple[int, ...]
    epsilon: float
    variant: str = "direct"
    tolerance: float = DEFAULT_TOL

    def __post_init__(self):
        cols = _check_increasing("a_indices", self.a_indices)
        object.__setattr__(self, "a_indices", cols)
        rows = tuple(int(v) for v in self.b_rows)
        object.__setattr__(self, "b_rows", rows)
        if len(rows) != len(cols) or not rows:
            raise ValidationError("a_indices and b_rows must be nonempty and equal length")
        if len(set(rows)) != len(rows):
            raise ValidationError("b_rows must be distinct")
        if not self.epsilon > 0:
            raise ValidationError(f"epsilon must be positive, got {self.epsilon}")
        if self.tolerance < 0:
            raise ValidationError("tolerance must be nonnegative")
        if self.variant not in CHAIN_VARIANTS:
            raise ValidationError(f"variant must be one of {CHAIN_VARIANTS}")

    def __len__(self) -> int:
        return len(self.a_indices)


@dataclass(frozen=True)
class BlockingCertificate:
    """A pattern size N and low-position set proving a family is blocked.

    The certified claim: for every increasing N-tuple of sequence indices, no
    evaluation point realizes the pattern "low (<= r) at positions in
    ``low_set``, high (>= s) elsewhere".  ``thresholds is None`` means the
    claim holds at every threshold pair r < s (uniform scope); otherwise it
    holds at the stored pair only.  Positions are 0-based.
    """

    size: int
    low_set: frozenset[int]
    thresholds: ThresholdPair | None = None

    def __post_init__(self):
        if self.size < 1:
            raise ValidationError(f"certificate size must be >= 1, got {self.size}")
        low = frozenset(int(p) for p in self.low_set)
        object.__setattr__(self, "low_set", low)
        if any(p < 0 or p >= self.size for p in low):
            raise ValidationError(f"low_set {sorted(low)} not within 0..{self.size - 1}")

    @property
    def uniform(self) -> bool:
        return self.thresholds is None


Witness = Union[OrderWitness, ShatteringWitness, StrictOrderWitness, BlockingCertificate]

# A coefficient vector is any finite sequence of reals; operations validate
# length and finiteness where they consume one.
CoefficientVector = Sequence[float]


# ---------------------------------------------------------------------------
# Witness re-checking
# ---------------------------------------------------------------------------


def _bounds(name: str, idx: Iterable[int], limit: int) -> None:
    for v in idx:
        if v < 0 or v >= limit:
            raise WitnessBoundsError(f"{name} index {v} out of range [0, {limit})")


def _check_order_witness(M: ValueMatrix, w: OrderWitness, tol: float) -> bool:
    _bounds("row", w.row_indices, M.n_rows)
    _bounds("col", w.col_indices, M.n_cols)
    sub = M.values[np.ix_(w.row_indices, w.col_indices)]
    k = len(w)
    upper = np.triu(np.ones((k, k), dtype=bool), 1)
    r, s = w.thresholds.r, w.thresholds.s
    low_ok = (sub.T[upper] <= r + tol).all()     # sub[j,i] for i<j
    high_ok = (sub[upper] >= s - tol).all()      # sub[i,j] for i<j
    return bool(low_ok and high_ok)


def _check_shattering_witness(M: ValueMatrix, w: ShatteringWitness, tol: float) -> bool:
    _bounds("row", w.row_indices, M.n_rows)
    _bounds("col", (c for _, c in w.realizers), M.n_cols)
    r, s = w.thresholds.r, w.thresholds.s
    rows = np.asarray(w.row_indices)
    for E, col in w.realizers:
        vals = M.values[rows, col]
        in_E = np.zeros(len(rows), dtype=bool)
        in_E[list(E)] = True
        if not ((vals[in_E] <= r + tol).all() and (vals[~in_E] >= s - tol).all()):
            return False
    return True


def _check_strict_order_witness(M: ValueMatrix, w: StrictOrderWitness, tol: float) -> bool:
    _bounds("col", w.a_indices, M.n_cols)
    _bounds("row", w.b_rows, M.n_rows)
    vals = M.values
    for a, b in zip(w.a_indices, w.a_indices[1:]):
        if (vals[:, a] > vals[:, b] + w.tolerance).any():
            return False
    k = len(w)
    for i in range(k):
        for j in range(i + 1, k):
            hi_row = w.b_rows[i] if w.variant == "direct" else w.b_rows[i + 1]
            gap = vals[hi_row, w.a_indices[j]] - vals[w.b_rows[j], w.a_indices[i]]
            if gap + GAP_SLACK < w.epsilon:
                return False
    return True


def check_witness(M: ValueMatrix, witness: Witness, tol: float = DEFAULT_TOL) -> bool:
    """Re-verify a witness against ``M`` by direct entry inspection.

    Orientation rule: the witness's probe objects index rows.  Order and
    strict-order witnesses therefore expect a (points x functions) matrix;
    shattering witnesses expect (functions x points).  Blocking certificates
    expect (sequence x points) and are delegated to the blocking checker.

    Returns False when the pattern is broken; raises
    :class:`WitnessBoundsError` on out-of-range indices.
    """
    if isinstance(witness, OrderWitness):
        return _check_order_witness(M, witness, tol)
    if isinstance(witness, ShatteringWitness):
        return _check_shattering_witness(M, witness, tol)
    if isinstance(witness, StrictOrderWitness):
        return _check_strict_order_witness(M, witness, tol)
    if isinstance(witness, BlockingCertificate):
        from . import detectors  # local import: detectors builds on core

        return detectors.verify_blocking_certificate(M, witness, tol=tol)
    raise TypeError(f"unknown witness type: {type(witness).__name__}")
