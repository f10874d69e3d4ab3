"""Constructive machinery: derived preorders, epsilon chains, pivot search.

Given a family that is both blocked (a certificate) and ordered (a staircase
witness), the pivot search replays a swap walk over Boolean threshold
patterns on a base tuple of the chain: starting from the blocked pattern and
repeatedly flipping an adjacent (high, low) pair of instances into
(low, high), it locates a pivot position where an unrealized pattern sits
next to a realized one, uniformly across a grid of high-side levels.  The
conjunction fixed by that pivot synthesizes a new family of values on which
the derived preorder exhibits long epsilon chains.

Orientation: the pivot search takes points x functions, like the staircase
detector; the derived preorder compares columns.
"""

from __future__ import annotations

import itertools
import logging
from dataclasses import dataclass

import numpy as np

from .core import (
    DEFAULT_TOL,
    BlockingCertificate,
    OrderWitness,
    ValidationError,
    ValueMatrix,
    WitnessCheckError,
    check_witness,
)
from .detectors import check_blocking
from .ramsey import RamseyExhaustedError, extract_indiscernible

logger = logging.getLogger(__name__)

DEFAULT_GRID_LEVELS = 8
CHAIN_CAP = 16


def derived_preorder(M: ValueMatrix) -> np.ndarray:
    """psi[y1, y2] = max over rows z of max(M[z, y1] - M[z, y2], 0).

    The result is reflexive (zero diagonal) and satisfies the triangle
    inequality exactly; entry (y1, y2) measures how far column y1 is from
    being pointwise below column y2.
    """
    v = M.values
    psi = np.clip(v[:, :, None] - v[:, None, :], 0.0, None).max(axis=0)
    np.fill_diagonal(psi, 0.0)
    return psi


def check_epsilon_chain(psi: np.ndarray, seq, epsilon: float) -> bool:
    """Re-check: max backward entry + epsilon <= min forward entry."""
    seq = list(seq)
    if len(seq) <= 1:
        return True
    fwd = min(psi[seq[i], seq[j]] for i in range(len(seq)) for j in range(i + 1, len(seq)))
    back = max(psi[seq[j], seq[i]] for i in range(len(seq)) for j in range(i + 1, len(seq)))
    return bool(back + epsilon <= fwd + 1e-12)


def longest_epsilon_chain(psi: np.ndarray, epsilon: float,
                          cap: int = CHAIN_CAP,
                          max_nodes: int = 500_000) -> tuple[int, ...]:
    """Longest index sequence with every forward entry at least epsilon above
    every backward entry.

    Exact depth-first search up to ``cap`` elements (lexicographically first
    among the longest), then greedy extension by index order.  Length 1 is
    always achievable; the empty input aside, the chain is never empty.
    """
    if epsilon <= 0:
        raise ValidationError(f"epsilon must be positive, got {epsilon}")
    n = psi.shape[0]
    if n == 0:
        return ()
    best: list[int] = []
    nodes = 0

    def extend(seq: list[int], max_back: float, min_fwd: float):
        nonlocal best, nodes
        if len(seq) > len(best):
            best = list(seq)
        if len(seq) >= cap or nodes > max_nodes:
            return
        used = set(seq)
        for y in range(n):
            if y in used:
                continue
            nodes += 1
            nb = max(max_back, max(psi[y, t] for t in seq))
            nf = min(min_fwd, min(psi[t, y] for t in seq))
            if nb + epsilon <= nf + 1e-12:
                seq.append(y)
                extend(seq, nb, nf)
                seq.pop()

    for start in range(n):
        extend([start], -np.inf, np.inf)
        if len(best) >= cap:
            break
    chain = list(best) if best else [0]
    if len(chain) >= cap:  # greedy extension beyond the exact horizon
        for y in range(n):
            if y in chain:
                continue
            trial = chain + [y]
            if check_epsilon_chain(psi, trial, epsilon):
                chain = trial
    return tuple(chain)


# ---------------------------------------------------------------------------
# Pivot search
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class PivotResult:
    """A pivot located by the swap walk.

    ``eta`` is the realized-side pattern over the base tuple (1 = low, i.e.
    value <= r; 0 = high), with ``eta[pivot_pos] = 1`` and
    ``eta[pivot_pos + 1] = 0`` at the distinguished adjacent pair.  The
    unrealized mirror pattern swaps the two distinguished sides.  Residual
    positions (all others) are fixed at the level ``s0``; the distinguished
    high side is certified at every grid level up to ``s0``.
    """

    base_columns: tuple[int, ...]
    pivot_pos: int
    eta: tuple[int, ...]
    s0: float
    r: float
    s_grid: tuple[float, ...]

    def __post_init__(self):
        n = len(self.base_columns)
        if not (0 <= self.pivot_pos < n - 1):
            raise ValidationError("pivot position must have a right neighbor")
        if len(self.eta) != n:
            raise ValidationError("eta length must match the base tuple")
        if self.eta[self.pivot_pos] != 1 or self.eta[self.pivot_pos + 1] != 0:
            raise ValidationError("eta must be low at the pivot and high after it")

    @property
    def residual_positions(self) -> tuple[int, ...]:
        return tuple(p for p in range(len(self.base_columns))
                     if p not in (self.pivot_pos, self.pivot_pos + 1))

    def residual_formula(self) -> dict:
        """Description record of the fixed conjunction combined with the free
        argument: value(x, y) = max(residual defect at x, M[x, y])."""
        terms = [
            {"column": int(self.base_columns[p]),
             "side": "le_r" if self.eta[p] == 1 else "ge_s0"}
            for p in self.residual_positions
        ]
        return {"r": self.r, "s0": self.s0, "terms": terms,
                "combined_with": "pointwise max against the free column"}

    def residual_defect(self, M: ValueMatrix, tol: float = 0.0) -> np.ndarray:
        """Per-row defect of the fixed conjunction (0 = satisfied)."""
        defect = np.zeros(M.n_rows)
        for p in self.residual_positions:
            col = M.values[:, self.base_columns[p]]
            term = np.clip(col - self.r, 0.0, None) if self.eta[p] == 1 \
                else np.clip(self.s0 - col, 0.0, None)
            defect = np.maximum(defect, term)
        return defect


def default_level_grid(r: float, s: float,
                       levels: int = DEFAULT_GRID_LEVELS) -> tuple[float, ...]:
    """Evenly spaced high-side levels in (r, s], the last level exactly s."""
    g = (s - r) / levels
    out = [r + g * t for t in range(1, levels)]
    out.append(s)
    return tuple(out)


def _swap_walk(start: tuple[int, ...]) -> list[tuple[int, tuple[int, ...]]]:
    """Bubble the low marks leftward one adjacent swap at a time.

    Each step flips the leftmost (high, low) adjacent pair to (low, high);
    returns [(pivot_pos, pattern_after_swap), ...] ending at the sorted
    pattern with all lows first.
    """
    eta = list(start)
    steps = []
    while True:
        pos = next((p for p in range(len(eta) - 1)
                    if eta[p] == 0 and eta[p + 1] == 1), None)
        if pos is None:
            return steps
        eta[pos], eta[pos + 1] = 1, 0
        steps.append((pos, tuple(eta)))


def _refine_witness(M: ValueMatrix, witness: OrderWitness, size: int,
                    grid: tuple[float, ...], tol: float) -> OrderWitness:
    """Indiscernibility pre-pass over the witness columns; raw on failure."""
    seq = M.submatrix(cols=witness.col_indices).transposed()
    target = max(size + 1, min(len(witness), size + 2))
    try:
        picked = extract_indiscernible(seq, size, grid, target, tol=tol)
    except (RamseyExhaustedError, ValidationError) as exc:
        logger.warning("indiscernibility pre-pass skipped (%s); using raw sequence", exc)
        return witness
    return OrderWitness(
        row_indices=tuple(witness.row_indices[p] for p in picked),
        col_indices=tuple(witness.col_indices[p] for p in picked),
        thresholds=witness.thresholds)


def find_strict_order_pivot(M: ValueMatrix, certificate: BlockingCertificate,
                            order_witness: OrderWitness,
                            s_grid: tuple[float, ...] | None = None,
                            tol: float = DEFAULT_TOL) -> PivotResult | None:
    """Locate a pivot pattern on a blocked-and-ordered family.

    ``M`` is points x functions; the certificate must block (at the witness's
    low threshold paired with every grid level) the column sequence, and the
    staircase witness must re-check.  Returns None when no pivot pattern
    survives every grid level at the sampled points, which refutes only this
    finite instance.
    """
    r, s = order_witness.thresholds.r, order_witness.thresholds.s
    grid = tuple(s_grid) if s_grid is not None else default_level_grid(r, s)
    if not grid or any(g <= r or g > s for g in grid):
        raise ValidationError("s_grid levels must lie in (r, s]")
    grid = tuple(sorted(grid))

    if not check_witness(M, order_witness, tol=tol):
        raise WitnessCheckError("order witness failed re-check; input rejected")
    seq_view = M.transposed()  # rows = the function sequence
    for level in grid:
        if not check_blocking(seq_view, certificate.size, certificate.low_set,
                              type(order_witness.thresholds)(r, level), tol=tol):
            raise WitnessCheckError(
                f"blocking certificate fails at level {level}; input rejected")

    size = certificate.size
    witness = order_witness
    if len(witness) < size:
        raise ValidationError(
            f"order witness of length {len(witness)} cannot seed a size-{size} pivot")
    witness = _refine_witness(M, witness, size, (r,) + grid, tol)
    if len(witness) < size:
        witness = order_witness

    n_lows = len(certificate.low_set)
    if len(witness) >= size + 1:
        positions = list(range(n_lows)) + list(range(n_lows + 1, size + 1))
    else:
        positions = list(range(size))
    base_cols = tuple(witness.col_indices[p] for p in positions)

    base_vals = M.values[:, list(base_cols)]
    low_mask = base_vals <= r + tol
    high_masks = [base_vals >= level - tol for level in grid]

    def evaluate(pos: int, eta: tuple[int, ...]) -> float | None:
        """Largest level s0 whose every lower level keeps the realized pattern
        realized and the swapped pattern unrealized; None if even the lowest
        level fails."""
        best = None
        for l0 in range(len(grid)):
            res_ok = np.ones(M.n_rows, dtype=bool)
            for p in range(len(eta)):
                if p in (pos, pos + 1):
                    continue
                res_ok &= low_mask[:, p] if eta[p] == 1 else high_masks[l0][:, p]
            ok = True
            for ls in range(l0 + 1):
                realized = res_ok & low_mask[:, pos] & high_masks[ls][:, pos + 1]
                mirrored = res_ok & high_masks[ls][:, pos] & low_mask[:, pos + 1]
                if not realized.any() or mirrored.any():
                    ok = False
                    break
            if ok:
                best = grid[l0]
            elif best is not None:
                break
        return best

    start = tuple(1 if p in certificate.low_set else 0 for p in range(size))
    walk = _swap_walk(start)
    candidates: list[tuple[int, tuple[int, ...]]] = list(walk)
    seen = set(candidates)
    m = size - 2
    for pos in range(size - 1):
        others = [p for p in range(size) if p not in (pos, pos + 1)]
        for t in range(1 << m):
            gray = t ^ (t >> 1)
            eta = [0] * size
            eta[pos] = 1
            for b, p in enumerate(others):
                eta[p] = (gray >> b) & 1
            cand = (pos, tuple(eta))
            if cand not in seen:
                seen.add(cand)
                candidates.append(cand)

    walk_set = set(walk)
    best_pick: tuple[bool, float, int] | None = None  # (is_walk, s0, -order)
    best_result = None
    for order, (pos, eta) in enumerate(candidates):
        s0 = evaluate(pos, eta)
        if s0 is None:
            continue
        key = ((pos, eta) in walk_set, s0, -order)
        if best_pick is None or key > best_pick:
            best_pick = key
            best_result = PivotResult(base_columns=base_cols, pivot_pos=pos,
                                      eta=eta, s0=s0, r=r, s_grid=grid)
    if best_result is not None:
        margin = _pivot_margin(M, best_result, tol)
        if margin < tol:
            logger.debug("pivot accepted with residual margin %.3e below tol", margin)
    return best_result


def _pivot_margin(M: ValueMatrix, pivot: PivotResult, tol: float) -> float:
    """Distance by which the mirrored pattern misses being realized."""
    vals = M.values[:, list(pivot.base_columns)]
    worst = np.inf
    for level in pivot.s_grid:
        if level > pivot.s0:
            break
        deficit = np.zeros(M.n_rows)
        for p in range(len(pivot.eta)):
            if p == pivot.pivot_pos:
                deficit = np.maximum(deficit, level - vals[:, p])
            elif p == pivot.pivot_pos + 1:
                deficit = np.maximum(deficit, vals[:, p] - pivot.r)
            elif pivot.eta[p] == 1:
                deficit = np.maximum(deficit, vals[:, p] - pivot.r)
            else:
                deficit = np.maximum(deficit, pivot.s0 - vals[:, p])
        worst = min(worst, float(deficit.max(initial=np.inf)))
    return worst


def verify_pivot(M: ValueMatrix, pivot: PivotResult, tol: float = DEFAULT_TOL) -> bool:
    """Re-check the pivot post-conditions at every grid level up to s0."""
    vals = M.values[:, list(pivot.base_columns)]
    low_mask = vals <= pivot.r + tol
    pos = pivot.pivot_pos
    res_ok = np.ones(M.n_rows, dtype=bool)
    for p in range(len(pivot.eta)):
        if p in (pos, pos + 1):
            continue
        if pivot.eta[p] == 1:
            res_ok &= low_mask[:, p]
        else:
            res_ok &= vals[:, p] >= pivot.s0 - tol
    for level in pivot.s_grid:
        if level > pivot.s0:
            break
        high = vals >= level - tol
        realized = res_ok & low_mask[:, pos] & high[:, pos + 1]
        mirrored = res_ok & high[:, pos] & low_mask[:, pos + 1]
        if not realized.any() or mirrored.any():
            return False
    return True


def synthesize_chain_values(M: ValueMatrix, pivot: PivotResult) -> np.ndarray:
    """Values of the pivot's conjunction combined with each free column.

    Entry (x, y) = max(residual defect at x, M[x, y]): the pointwise-max
    reading of conjoining the fixed pattern with the free instance.  Feeding
    the result to :func:`derived_preorder` exposes the synthesized ordering.
    """
    defect = pivot.residual_defect(M)
    return np.maximum(M.values, defect[:, None])
