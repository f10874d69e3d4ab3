"""Pattern detectors: order staircases, shattering, blocking, strict-order chains.

Each detector has an exact mode (complete search with pruning, capped by
``SearchBudget.max_subset_size``) and a greedy mode (cheaper, never
overestimates, flagged as inexact).  All detectors are pure functions of
immutable inputs.

Orientation conventions, per operation:

- :func:`find_order_staircase` / :func:`order_gap`: ``M[i, j]`` pairs probe
  point i with family member j (points x functions).
- :func:`shattering_dimension`: rows are the shattered family members,
  columns the evaluation points (functions x points).
- blocking operations: rows are the sequence being blocked, columns the
  evaluation points (functions x points).
- :func:`find_strict_order_chain`: points x functions, like the staircase.
"""

from __future__ import annotations

import itertools
import logging
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .core import (
    DEFAULT_TOL,
    BlockingCertificate,
    OrderWitness,
    ShatteringWitness,
    StrictOrderWitness,
    ThresholdPair,
    ValidationError,
    ValueMatrix,
    WitnessCheckError,
    check_witness,
)

logger = logging.getLogger(__name__)

EXACT_CAP = 16


class BudgetExhaustedError(RuntimeError):
    """The search could not certify its answer within the configured budget.

    Distinct from "no pattern exists": carries whatever partial result was
    available in ``partial``.
    """

    def __init__(self, message: str, partial=None):
        super().__init__(message)
        self.partial = partial


@dataclass(frozen=True)
class SearchBudget:
    """Caps for the combinatorial searches.

    ``max_subset_size`` bounds witness length / pattern size N,
    ``max_candidates`` bounds node expansions, ``mode`` selects exact or
    greedy search.  Exact mode refuses subset caps above ``EXACT_CAP``.
    """

    max_subset_size: int = 12
    max_candidates: int = 2_000_000
    mode: str = "exact"

    def __post_init__(self):
        if self.mode not in ("exact", "greedy"):
            raise ValidationError(f"budget mode must be 'exact' or 'greedy', got {self.mode!r}")
        if self.max_subset_size < 1 or self.max_candidates < 1:
            raise ValidationError("budget sizes must be positive")
        if self.mode == "exact" and self.max_subset_size > EXACT_CAP:
            raise ValidationError(
                f"exact mode caps max_subset_size at {EXACT_CAP}, got {self.max_subset_size}")


DEFAULT_BUDGET = SearchBudget()


# ---------------------------------------------------------------------------
# Threshold candidate sweeps
# ---------------------------------------------------------------------------


def _clustered_values(vals: np.ndarray, tol: float) -> list[tuple[float, float]]:
    """Distinct values clustered at radius 2*tol; returns (min, max) per cluster.

    Sub-tolerance jitter (e.g. certified noise) collapses onto one candidate;
    genuinely distinct levels are assumed separated by more than 4*tol.
    """
    u = np.unique(vals)
    clusters: list[tuple[float, float]] = []
    lo = hi = float(u[0])
    for v in u[1:]:
        v = float(v)
        if v - hi <= 2 * tol:
            hi = v
        else:
            clusters.append((lo, hi))
            lo = hi = v
    clusters.append((lo, hi))
    return clusters


def threshold_pairs(M: ValueMatrix, tol: float = DEFAULT_TOL,
                    augment_endpoints: bool = False) -> list[ThresholdPair]:
    """Candidate (r, s) pairs covering every pattern realizable at real thresholds.

    For two-sided patterns, pairs of data values suffice (optima occur at
    data values).  One-sided patterns (an empty low or high side) additionally
    need the interval endpoints 0 and 1 as candidates; blocking sweeps request
    them via ``augment_endpoints``.
    """
    clusters = _clustered_values(M.values, tol)
    r_cands = sorted({hi for _, hi in clusters} | ({0.0} if augment_endpoints else set()))
    s_cands = sorted({lo for lo, _ in clusters} | ({1.0} if augment_endpoints else set()))
    out = []
    for r in r_cands:
        for s in s_cands:
            if s > r + 2 * tol:
                out.append(ThresholdPair(r, s))
    return out


# ---------------------------------------------------------------------------
# Order staircases
# ---------------------------------------------------------------------------


def _staircase_exact(low: np.ndarray, high: np.ndarray, min_len: int,
                     budget: SearchBudget) -> Optional[list[tuple[int, int]]]:
    """Depth-first search over increasing (row, col) pairs, all-pairs checked.

    Returns the lexicographically first chain of maximal length, or None.
    Raises BudgetExhaustedError if node expansions exceed the candidate cap
    (the answer would otherwise be uncertifiable).
    """
    n, m = low.shape
    cap = budget.max_subset_size
    best: list[tuple[int, int]] = []
    nodes = 0

    def compatible(chain, i, j) -> bool:
        for (ri, ci) in chain:
            if not (low[i, ci] and high[ri, j]):
                return False
        return True

    def extend(chain: list[tuple[int, int]]):
        nonlocal best, nodes
        last_i = chain[-1][0] if chain else -1
        last_j = chain[-1][1] if chain else -1
        potential = min(n - last_i - 1, m - last_j - 1)
        if len(chain) + potential <= len(best) or len(chain) >= cap:
            return
        for i in range(last_i + 1, n):
            for j in range(last_j + 1, m):
                nodes += 1
                if nodes > budget.max_candidates:
                    raise BudgetExhaustedError(
                        "staircase search exceeded candidate budget",
                        partial=list(best))
                if compatible(chain, i, j):
                    chain.append((i, j))
                    if len(chain) > len(best):
                        best = list(chain)
                    extend(chain)
                    chain.pop()

    extend([])
    return best if len(best) >= min_len else None


def _staircase_greedy(low: np.ndarray, high: np.ndarray, min_len: int,
                      budget: SearchBudget) -> Optional[list[tuple[int, int]]]:
    """Longest-chain DP on the consecutive dominance relation, then a pairwise
    validation sweep that trims the reconstructed path to a sound witness."""
    n, m = low.shape
    pairs = [(i, j) for i in range(n) for j in range(m)]
    if len(pairs) ** 2 > budget.max_candidates:
        pairs = pairs[: int(budget.max_candidates ** 0.5)]
    length = {p: 1 for p in pairs}
    parent: dict[tuple[int, int], tuple[int, int] | None] = {p: None for p in pairs}
    for idx, v in enumerate(pairs):
        for u in pairs[:idx]:
            if u[0] < v[0] and u[1] < v[1] and low[v[0], u[1]] and high[u[0], v[1]]:
                if length[u] + 1 > length[v]:
                    length[v] = length[u] + 1
                    parent[v] = u
    if not pairs:
        return None
    tip = max(pairs, key=lambda p: length[p])
    path = []
    node: tuple[int, int] | None = tip
    while node is not None:
        path.append(node)
        node = parent[node]
    path.reverse()
    kept: list[tuple[int, int]] = []
    for (i, j) in path:  # consecutive validity does not imply all pairs
        if all(low[i, cj] and high[ri, j] for (ri, cj) in kept):
            kept.append((i, j))
    return kept if len(kept) >= min_len else None


def find_order_staircase(M: ValueMatrix, thresholds: ThresholdPair,
                         min_len: int = 2, budget: SearchBudget | None = None,
                         tol: float = DEFAULT_TOL) -> Optional[OrderWitness]:
    """Longest staircase witness at (r, s): low below the diagonal, high above.

    ``M[i, j]`` pairs probe point i with family member j.  Exact mode
    guarantees that None means no witness of length >= min_len exists (up to
    the subset cap); greedy mode may miss witnesses but never fabricates one.
    """
    if min_len < 2:
        raise ValidationError(f"min_len must be >= 2, got {min_len}")
    budget = budget or DEFAULT_BUDGET
    low = M.values <= thresholds.r + tol
    high = M.values >= thresholds.s - tol
    search = _staircase_exact if budget.mode == "exact" else _staircase_greedy
    chain = search(low, high, min_len, budget)
    if chain is None:
        return None
    return OrderWitness(row_indices=tuple(i for i, _ in chain),
                        col_indices=tuple(j for _, j in chain),
                        thresholds=thresholds)


def order_gap(M: ValueMatrix, min_len: int = 2, budget: SearchBudget | None = None,
              tol: float = DEFAULT_TOL) -> Optional[tuple[ThresholdPair, OrderWitness]]:
    """Widest threshold gap admitting a staircase of length >= min_len.

    Sweeps the matrix's value-grid pairs in descending gap order and returns
    the first success; None when no grid pair admits a staircase.  A gap of 0
    at all lengths is the finite double-limit condition.
    """
    pairs = threshold_pairs(M, tol)
    pairs.sort(key=lambda p: (-(p.gap), p.r))
    for tp in pairs:
        w = find_order_staircase(M, tp, min_len=min_len, budget=budget, tol=tol)
        if w is not None:
            return tp, w
    return None


# ---------------------------------------------------------------------------
# Shattering
# ---------------------------------------------------------------------------


def _patterns_realized(vals: np.ndarray, rows: tuple[int, ...],
                       low: np.ndarray, high: np.ndarray) -> dict[frozenset[int], int] | None:
    """Map each fully-realized low-set pattern to its smallest column, or None
    if some pattern is unrealized.  A column contributes at most one pattern;
    columns with an unclassifiable entry contribute none."""
    d = len(rows)
    sub_low = low[list(rows)]        # (d, n_cols)
    sub_high = high[list(rows)]
    classifiable = (sub_low | sub_high).all(axis=0)
    found: dict[frozenset[int], int] = {}
    weights = 1 << np.arange(d)
    codes = (sub_low.astype(np.int64).T @ weights)  # low-mask per column
    for col in np.flatnonzero(classifiable):
        code = int(codes[col])
        # entries that are both low and high (wide tolerance) favor low here;
        # for shattering we need every pattern, so recover the exact mask:
        E = frozenset(p for p in range(d) if sub_low[p, col])
        amb = [p for p in range(d) if sub_low[p, col] and sub_high[p, col]]
        if amb:
            # ambiguous entries satisfy either side; enumerate both choices
            for bits in itertools.product((False, True), repeat=len(amb)):
                Ev = set(E)
                for p, as_low in zip(amb, bits):
                    if not as_low:
                        Ev.discard(p)
                fs = frozenset(Ev)
                if fs not in found:
                    found[fs] = int(col)
        else:
            if E not in found:
                found[E] = int(col)
    if len(found) == (1 << d):
        return found
    return None


def shattering_dimension(M: ValueMatrix, thresholds: ThresholdPair,
                         budget: SearchBudget | None = None,
                         tol: float = DEFAULT_TOL) -> tuple[int, Optional[ShatteringWitness]]:
    """Largest d such that some d-subset of rows is (r, s)-shattered by columns.

    Rows are the family members, columns the evaluation points.  Exact mode
    runs a level-wise search (a set can only be shattered if all its subsets
    are); greedy mode grows one subset by iterative row addition and never
    exceeds the exact dimension.  d = 0 when no single row attains both sides.
    """
    budget = budget or DEFAULT_BUDGET
    vals = M.values
    low = vals <= thresholds.r + tol
    high = vals >= thresholds.s - tol
    n = M.n_rows

    def witness_for(rows: tuple[int, ...]) -> Optional[ShatteringWitness]:
        found = _patterns_realized(vals, rows, low, high)
        if found is None:
            return None
        realizers = tuple((tuple(sorted(E)), c) for E, c in found.items())
        return ShatteringWitness(row_indices=rows, realizers=realizers,
                                 thresholds=thresholds)

    if budget.mode == "greedy":
        current: tuple[int, ...] = ()
        best_w = None
        for i in range(n):
            if len(current) >= budget.max_subset_size:
                break
            cand = current + (i,)
            w = witness_for(cand)
            if w is not None:
                current, best_w = cand, w
        return len(current), best_w

    level: list[tuple[int, ...]] = [()]
    best: tuple[int, Optional[ShatteringWitness]] = (0, None)
    size = 0
    nodes = 0
    while level and size < min(n, budget.max_subset_size):
        size += 1
        prev = set(level)
        nxt: list[tuple[int, ...]] = []
        first_witness = None
        for S in level:
            start = S[-1] + 1 if S else 0
            for j in range(start, n):
                cand = S + (j,)
                nodes += 1
                if nodes > budget.max_candidates:
                    raise BudgetExhaustedError("shattering search exceeded candidate budget",
                                               partial=best)
                if size > 1 and any(cand[:k] + cand[k + 1:] not in prev
                                    for k in range(size - 1)):
                    continue
                w = witness_for(cand)
                if w is not None:
                    nxt.append(cand)
                    if first_witness is None:
                        first_witness = w
        if nxt:
            best = (size, first_witness)
        level = nxt
    if level and size >= budget.max_subset_size and size < n:
        raise BudgetExhaustedError(
            f"shattered sets of size {size} exist at the subset cap; larger sets unexplored",
            partial=best)
    return best


# ---------------------------------------------------------------------------
# Blocking
# ---------------------------------------------------------------------------


def _blocked_masks(vals: np.ndarray, size: int, pairs: Sequence[ThresholdPair],
                   masks: Sequence[int], tol: float) -> np.ndarray:
    """For each pattern mask (bit p set = position p low), decide whether the
    pattern is unrealized on every increasing row tuple, at every pair.

    Realization test per column is greedy earliest-match subsequence scanning,
    vectorized over (mask, pair, column).  Returns bool array over masks.
    """
    n_rows, n_cols = vals.shape
    if size > n_rows:
        return np.ones(len(masks), dtype=bool)  # vacuous: no tuples exist
    n_pairs = len(pairs)
    lows = np.stack([vals <= p.r + tol for p in pairs])    # (P, rows, cols)
    highs = np.stack([vals >= p.s - tol for p in pairs])
    # need_low[mask_idx, position]; sentinel False row for matched columns
    need_low = np.zeros((len(masks), size + 1), dtype=bool)
    for mi, mask in enumerate(masks):
        for p in range(size):
            need_low[mi, p] = bool(mask >> p & 1)
    pos = np.zeros((len(masks), n_pairs, n_cols), dtype=np.int64)
    mrange = np.arange(len(masks))
    for i in range(n_rows):
        need = need_low[mrange[:, None, None], np.minimum(pos, size)]
        hit = np.where(need, lows[None, :, i, :], highs[None, :, i, :])
        pos += (hit & (pos < size))
    realized = (pos >= size).any(axis=2)       # (masks, pairs)
    return ~realized.any(axis=1)


def check_blocking(M: ValueMatrix, size: int, low_set: frozenset[int] | set[int],
                   thresholds: ThresholdPair, tol: float = DEFAULT_TOL) -> bool:
    """True iff no evaluation point realizes the pattern on any increasing
    N-tuple of rows at the given thresholds.

    Rows of ``M`` are the sequence, columns the evaluation points.  Positions
    in ``low_set`` (0-based, within 0..size-1) demand value <= r; the rest
    demand value >= s.  Vacuously true when size exceeds the row count.
    """
    low_set = frozenset(int(p) for p in low_set)
    if any(p < 0 or p >= size for p in low_set):
        raise ValidationError(f"low_set {sorted(low_set)} not within 0..{size - 1}")
    mask = sum(1 << p for p in low_set)
    return bool(_blocked_masks(M.values, size, [thresholds], [mask], tol)[0])


def verify_blocking_certificate(M: ValueMatrix, cert: BlockingCertificate,
                                tol: float = DEFAULT_TOL) -> bool:
    """Re-check a certificate: single pair for per-threshold scope, a full
    endpoint-augmented value-grid sweep for uniform scope."""
    mask = sum(1 << p for p in cert.low_set)
    if cert.thresholds is not None:
        pairs = [cert.thresholds]
    else:
        pairs = threshold_pairs(M, tol, augment_endpoints=True)
        if not pairs:
            return True
    return bool(_blocked_masks(M.values, cert.size, pairs, [mask], tol)[0])


def min_uniform_blocking(M: ValueMatrix, budget: SearchBudget | None = None,
                         tol: float = DEFAULT_TOL) -> BlockingCertificate:
    """Minimal N with some low-set blocking at every threshold pair.

    Sweeps the endpoint-augmented value grid; exhaustive over low sets at each
    N up to the subset cap.  Ties between low sets break to the smallest
    bitmask.  Raises BudgetExhaustedError when the cap is reached before the
    (always blocking, vacuous) N = n_rows + 1.
    """
    budget = budget or DEFAULT_BUDGET
    pairs = threshold_pairs(M, tol, augment_endpoints=True)
    top = min(M.n_rows + 1, budget.max_subset_size)
    for size in range(1, top + 1):
        masks = list(range(1 << size))
        if not pairs:
            blocked = np.ones(len(masks), dtype=bool)
        else:
            blocked = _blocked_masks(M.values, size, pairs, masks, tol)
        hits = np.flatnonzero(blocked)
        if hits.size:
            mask = int(hits[0])
            low = frozenset(p for p in range(size) if mask >> p & 1)
            return BlockingCertificate(size=size, low_set=low, thresholds=None)
    raise BudgetExhaustedError(
        f"no blocking pattern of size <= {top}; raise max_subset_size", partial=None)


def blocking_number(M: ValueMatrix, thresholds: ThresholdPair,
                    budget: SearchBudget | None = None,
                    tol: float = DEFAULT_TOL) -> int:
    """Minimal N with some low-set blocking at the single pair (r, s).

    Equals n_rows + 1 when even the full row set is shattered at (r, s)
    (the N = n_rows + 1 pattern is vacuously unrealized).
    """
    cert = blocking_certificate_at(M, thresholds, budget=budget, tol=tol)
    return cert.size


def blocking_certificate_at(M: ValueMatrix, thresholds: ThresholdPair,
                            budget: SearchBudget | None = None,
                            tol: float = DEFAULT_TOL) -> BlockingCertificate:
    """Like :func:`blocking_number` but returns the certifying (N, low_set)."""
    budget = budget or DEFAULT_BUDGET
    top = min(M.n_rows + 1, budget.max_subset_size)
    for size in range(1, top + 1):
        masks = list(range(1 << size))
        blocked = _blocked_masks(M.values, size, [thresholds], masks, tol)
        hits = np.flatnonzero(blocked)
        if hits.size:
            mask = int(hits[0])
            low = frozenset(p for p in range(size) if mask >> p & 1)
            return BlockingCertificate(size=size, low_set=low, thresholds=thresholds)
    raise BudgetExhaustedError(
        f"no blocking pattern of size <= {top} at {thresholds}; raise max_subset_size",
        partial=None)


# ---------------------------------------------------------------------------
# Strict-order chains
# ---------------------------------------------------------------------------


def _chain_gaps_ok(vals: np.ndarray, cols: list[int], rows: list[int],
                   variant: str, eps: float) -> bool:
    k = len(cols)
    for i in range(k):
        for j in range(i + 1, k):
            hi = rows[i] if variant == "direct" else rows[i + 1]
            if vals[hi, cols[j]] - vals[rows[j], cols[i]] < eps:
                return False
    return True


def find_strict_order_chain(M: ValueMatrix, b_rows: Sequence[int],
                            min_len: int = 2, variant: str = "direct",
                            tolerance: float = DEFAULT_TOL,
                            budget: SearchBudget | None = None) -> Optional[StrictOrderWitness]:
    """Best epsilon chain: pointwise-monotone columns with a gap pattern.

    ``M`` is points x functions; ``b_rows`` is the ordered pool of candidate
    probe rows.  The search selects strictly increasing column indices paired
    with strictly increasing pool positions, maximizing first the minimal gap
    epsilon, then the chain length at that epsilon (within tolerance); ties
    break to the lexicographically smallest indices.  Returns None when no
    chain of length >= min_len has positive epsilon.
    """
    if min_len < 2:
        raise ValidationError(f"min_len must be >= 2, got {min_len}")
    pool = [int(b) for b in b_rows]
    if len(set(pool)) != len(pool) or len(pool) < min_len:
        raise ValidationError("b_rows must be distinct and at least min_len long")
    budget = budget or DEFAULT_BUDGET
    vals = M.values
    n_cols = M.n_cols

    mono = np.zeros((n_cols, n_cols), dtype=bool)
    for a in range(n_cols):
        diffs = vals - vals[:, a][:, None]
        mono[a] = (diffs >= -tolerance).all(axis=0)
    if not all(mono[a, a + 1] for a in range(n_cols - 1)):
        logger.info("columns not a chain: searching monotone column subsequences")

    nodes = 0
    cap = min(budget.max_subset_size, len(pool), n_cols)

    def search(required_len: int, min_gap: float, maximize_eps: bool):
        """DFS over (column, pool position) pairs.

        With maximize_eps, returns the best achievable minimal gap at length
        exactly required_len; otherwise returns the longest chain whose
        minimal gap stays >= min_gap, lex-first among the longest.
        """
        nonlocal nodes
        best_eps = min_gap
        best_chain: list[tuple[int, int]] = []

        def pair_gap(chain_cols, chain_pos, new_col, new_pos) -> float:
            g = np.inf
            cols_all = chain_cols + [new_col]
            pos_all = chain_pos + [new_pos]
            k = len(cols_all)
            j = k - 1
            for i in range(j):
                hi_pos = pos_all[i] if variant == "direct" else pos_all[i + 1]
                g = min(g, vals[pool[hi_pos], cols_all[j]] - vals[pool[pos_all[j]], cols_all[i]])
            return g

        def extend(chain_cols, chain_pos, cur_gap):
            nonlocal best_eps, best_chain, nodes
            if maximize_eps:
                if len(chain_cols) == required_len:
                    if cur_gap > best_eps:
                        best_eps = cur_gap
                        best_chain = list(zip(chain_cols, chain_pos))
                    return
            else:
                if len(chain_cols) > len(best_chain):
                    best_chain = list(zip(chain_cols, chain_pos))
            if len(chain_cols) >= cap:
                return
            start_c = chain_cols[-1] + 1 if chain_cols else 0
            start_p = chain_pos[-1] + 1 if chain_pos else 0
            for c in range(start_c, n_cols):
                if chain_cols and not mono[chain_cols[-1], c]:
                    continue
                for p in range(start_p, len(pool)):
                    nodes += 1
                    if nodes > budget.max_candidates:
                        raise BudgetExhaustedError("chain search exceeded candidate budget",
                                                   partial=best_chain)
                    g = min(cur_gap, pair_gap(chain_cols, chain_pos, c, p))
                    feasible_len = len(chain_cols) + 1 + min(n_cols - c - 1, len(pool) - p - 1)
                    if maximize_eps:
                        if g <= best_eps or feasible_len < required_len:
                            continue
                    else:
                        if g < min_gap or feasible_len <= len(best_chain):
                            continue
                    chain_cols.append(c)
                    chain_pos.append(p)
                    extend(chain_cols, chain_pos, g)
                    chain_cols.pop()
                    chain_pos.pop()

        extend([], [], np.inf)
        return best_eps, best_chain

    eps, chain = search(min_len, 0.0, maximize_eps=True)
    if not chain or eps <= 0.0:
        return None
    _, long_chain = search(0, eps - DEFAULT_TOL, maximize_eps=False)
    if len(long_chain) < min_len:
        long_chain = chain
    cols = [c for c, _ in long_chain]
    pos = [p for _, p in long_chain]
    true_eps = np.inf
    for i in range(len(cols)):
        for j in range(i + 1, len(cols)):
            hi = pos[i] if variant == "direct" else pos[i + 1]
            true_eps = min(true_eps, vals[pool[hi], cols[j]] - vals[pool[pos[j]], cols[i]])
    return StrictOrderWitness(a_indices=tuple(cols),
                              b_rows=tuple(pool[p] for p in pos),
                              epsilon=float(true_eps), variant=variant,
                              tolerance=tolerance)


def order_witness_from_chain(M: ValueMatrix, witness: StrictOrderWitness,
                             tol: float = DEFAULT_TOL) -> Optional[OrderWitness]:
    """Build a staircase witness from a strict-order chain when the chain's
    low/high entries admit a uniform threshold pair with gap >= epsilon.

    Always possible for two-valued chains (the generator families); for
    general chains the pairwise gaps need not align into one (r, s), in which
    case None is returned.
    """
    if not check_witness(M, witness, tol=tol):
        raise WitnessCheckError("strict-order witness failed re-check")
    vals = M.values
    k = len(witness)
    lows, highs = [], []
    for i in range(k):
        for j in range(i + 1, k):
            lows.append(vals[witness.b_rows[j], witness.a_indices[i]])
            highs.append(vals[witness.b_rows[i], witness.a_indices[j]])
    r, s = max(lows), min(highs)
    if s <= r:
        return None
    rows = tuple(sorted(witness.b_rows))
    if rows != witness.b_rows:
        return None  # probe rows not increasing; cannot reuse indices directly
    w = OrderWitness(row_indices=rows, col_indices=witness.a_indices,
                     thresholds=ThresholdPair(float(r), float(s)))
    return w if check_witness(M, w, tol=tol) else None
