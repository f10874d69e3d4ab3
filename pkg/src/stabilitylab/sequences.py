"""Function-sequence diagnostics: variation, discretization, limits, continuity.

A function sequence is a :class:`~stabilitylab.core.ValueMatrix` whose rows
are the functions f_i (in sequence order) and whose columns are sample
points; ``point_coords`` supplies per-point coordinates for the continuity
diagnostics.

The "pointwise limit" at finite scale is a trailing-window statistic with an
explicit residual; nothing is extrapolated.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import (
    DEFAULT_TOL,
    BlockingCertificate,
    ValidationError,
    ValueMatrix,
    WitnessCheckError,
)
from .detectors import verify_blocking_certificate


class ConvergenceExtractionError(RuntimeError):
    """No subsequence of the requested length meets the oscillation bound.

    At finite scale this signals oscillation in the data; it is not by itself
    evidence of an independence pattern.
    """


class MissingCoordinatesError(ValidationError):
    """Continuity diagnostics need point coordinates and none were provided."""


@dataclass(frozen=True)
class LimitEstimate:
    """Per-point trailing-window mean with residual = max deviation in window."""

    values: np.ndarray
    residuals: np.ndarray
    tail_window: int

    def __post_init__(self):
        if (self.residuals < 0).any():
            raise ValidationError("residuals must be nonnegative")


@dataclass(frozen=True)
class BoundCheckResult:
    """Outcome of the blocked-variation bound check; records both sides."""

    passed: bool
    variation_sup: float
    bound: float
    size: int


def variation_sum(seq: ValueMatrix, point_index: int) -> float:
    """Sum of |f_i(x) - f_{i+1}(x)| along the sequence at one sample point."""
    col = seq.values[:, point_index]
    return float(np.abs(np.diff(col)).sum())


def variation_profile(seq: ValueMatrix) -> np.ndarray:
    """Per-point variation sums (vector over columns)."""
    return np.abs(np.diff(seq.values, axis=0)).sum(axis=0)


def variation_sup(seq: ValueMatrix) -> float:
    """Max over sample points of the variation sum."""
    if seq.n_rows == 1:
        return 0.0
    return float(variation_profile(seq).max())


def discretized_variation(seq: ValueMatrix, n: int, point_index: int) -> float:
    """Variation of the floor-discretized sequence v -> floor(n*v)/n.

    Values are snapped to 12 decimal digits before flooring so results are
    reproducible at boundaries where n*v is an integer up to float noise.
    """
    if n < 1:
        raise ValidationError(f"discretization level must be >= 1, got {n}")
    col = seq.values[:, point_index]
    snapped = np.round(col * 1e12) / 1e12
    disc = np.floor(snapped * n) / n
    return float(np.abs(np.diff(disc)).sum())


def extract_convergent_subsequence(seq: ValueMatrix, tol: float,
                                   min_len: int = 2) -> tuple[int, ...]:
    """A subsequence of rows whose per-point oscillation is <= tol.

    Greedy refinement in column order: at each sample point, keep the indices
    whose values fall in the most populated window of width tol (ties break
    to the window anchored at the smallest value).  Raises
    :class:`ConvergenceExtractionError` when fewer than ``min_len`` indices
    survive.
    """
    if tol <= 0:
        raise ValidationError(f"tol must be positive, got {tol}")
    keep = np.arange(seq.n_rows)
    for col in range(seq.n_cols):
        vals = seq.values[keep, col]
        if vals.max() - vals.min() <= tol:
            continue
        order = np.argsort(vals, kind="stable")
        sorted_vals = vals[order]
        # two-pointer max-count window of width tol over sorted values
        best_count, best_start = 0, 0
        j = 0
        for i in range(len(sorted_vals)):
            if j < i:
                j = i
            while j + 1 < len(sorted_vals) and sorted_vals[j + 1] - sorted_vals[i] <= tol:
                j += 1
            count = j - i + 1
            if count > best_count:
                best_count, best_start = count, i
        lo = sorted_vals[best_start]
        keep = keep[(vals >= lo) & (vals <= lo + tol)]
        if len(keep) < min_len:
            raise ConvergenceExtractionError(
                f"no convergent subsequence of length >= {min_len} at tol={tol}")
    return tuple(int(i) for i in keep)


def limit_estimate(seq: ValueMatrix, tail_window: int) -> LimitEstimate:
    """Trailing-window mean per point, with residual = max deviation in window."""
    if not (1 <= tail_window <= seq.n_rows):
        raise ValidationError(
            f"tail_window must be in [1, {seq.n_rows}], got {tail_window}")
    tail = seq.values[seq.n_rows - tail_window:]
    means = tail.mean(axis=0)
    residuals = np.abs(tail - means).max(axis=0)
    return LimitEstimate(values=means, residuals=residuals, tail_window=tail_window)


def continuity_defect(values: np.ndarray, point_coords: np.ndarray | None,
                      delta: float, metric: str = "euclidean") -> float:
    """Max |f(x) - f(y)| over distinct point pairs at distance <= delta.

    A defect bounded away from 0 as delta shrinks flags a discontinuity of
    the sampled function.  Coordinates are required.
    """
    if point_coords is None:
        raise MissingCoordinatesError("continuity_defect requires point coordinates")
    if delta <= 0:
        raise ValidationError(f"delta must be positive, got {delta}")
    if metric != "euclidean":
        raise ValidationError(f"unsupported metric {metric!r}")
    vals = np.asarray(values, dtype=float).reshape(-1)
    coords = np.asarray(point_coords, dtype=float)
    if coords.ndim == 1:
        coords = coords.reshape(-1, 1)
    if coords.shape[0] != vals.shape[0]:
        raise ValidationError("values and point_coords must have equal length")
    diff = coords[:, None, :] - coords[None, :, :]
    dist = np.sqrt((diff ** 2).sum(axis=-1))
    close = (dist <= delta) & ~np.eye(len(vals), dtype=bool)
    if not close.any():
        return 0.0
    jumps = np.abs(vals[:, None] - vals[None, :])
    return float(jumps[close].max())


def variation_bound_check(seq: ValueMatrix, certificate: BlockingCertificate,
                          tol: float = DEFAULT_TOL) -> BoundCheckResult:
    """Check variation_sup(seq) <= 2N - 2 for a verified uniform certificate.

    The certificate is re-checked first (uniform scope, all grid pairs); a
    failing certificate is rejected rather than reported as a bound result.
    """
    if not certificate.uniform:
        raise WitnessCheckError("variation bound requires a uniform-scope certificate")
    if not verify_blocking_certificate(seq, certificate, tol=tol):
        raise WitnessCheckError("blocking certificate failed re-check; input rejected")
    v = variation_sup(seq)
    bound = 2.0 * certificate.size - 2.0
    return BoundCheckResult(passed=bool(v <= bound + tol), variation_sup=v,
                            bound=bound, size=certificate.size)
