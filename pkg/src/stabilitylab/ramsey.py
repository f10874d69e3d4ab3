"""Threshold-type fingerprints and monochromatic subsequence extraction.

A tuple of rows gets a fingerprint: the truth values of every quantified
threshold condition over the matrix columns.  Conditions assign each tuple
position an independent (side, threshold) atom with thresholds drawn from a
finite grid A, under either quantifier:

- exists: some column satisfies every positional atom (conjunction),
- forall: every column satisfies at least one positional atom (disjunction).

That yields exactly 2 * (2|A|)^n conditions for an n-tuple.  A subsequence is
indiscernible at level k when all its k-subsets share one fingerprint;
extraction is a best-effort pigeonhole search whose output is certified by
re-checking, never by construction.
"""

from __future__ import annotations

import itertools
import logging
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .core import DEFAULT_TOL, ValidationError, ValueMatrix

logger = logging.getLogger(__name__)

DEFAULT_CONDITION_CAP = 4096


class RamseyExhaustedError(RuntimeError):
    """No monochromatic subsequence of the requested length was found.

    ``colors`` reports how many distinct fingerprints the input's k-subsets
    exhibited (capped count when the subset space is large).
    """

    def __init__(self, message: str, colors: int):
        super().__init__(message)
        self.colors = colors


@dataclass(frozen=True)
class TypeFingerprint:
    """Packed truth table over the enumerated condition space.

    Condition order: quantifier-major (all exists first, then all forall);
    within a quantifier, positional atoms enumerate mixed-radix with position
    0 most significant, and atom index = side * |A| + threshold_index where
    side 0 is "<=", side 1 is ">=", thresholds ascending.
    """

    bits: bytes
    n: int
    grid: tuple[float, ...]

    @property
    def n_conditions(self) -> int:
        return 2 * (2 * len(self.grid)) ** self.n

    def __post_init__(self):
        if len(self.bits) * 8 < self.n_conditions:
            raise ValidationError("fingerprint bit vector shorter than condition space")

    def as_bool_array(self) -> np.ndarray:
        return np.unpackbits(np.frombuffer(self.bits, dtype=np.uint8))[: self.n_conditions]


def _atom_table(M: ValueMatrix, grid: Sequence[float], tol: float) -> np.ndarray:
    """sat[row, atom, col] for the 2|A| positional atoms."""
    g = np.asarray(sorted(set(float(v) for v in grid)))
    vals = M.values
    le = vals[:, None, :] <= g[None, :, None] + tol    # (rows, |A|, cols)
    ge = vals[:, None, :] >= g[None, :, None] - tol
    return np.concatenate([le, ge], axis=1)            # (rows, 2|A|, cols)


def type_fingerprint(M: ValueMatrix, tuple_rows: Sequence[int],
                     grid: Sequence[float], tol: float = DEFAULT_TOL,
                     cap: int = DEFAULT_CONDITION_CAP,
                     _atoms: np.ndarray | None = None) -> TypeFingerprint:
    """Fingerprint of a row tuple; rows are the sequence, columns the probes.

    ``M[i, y]`` is the value of sequence member i at probe y; the quantified
    variable ranges over columns.  Raises when the condition space
    (2|A|)^n exceeds ``cap``.
    """
    rows = tuple(int(i) for i in tuple_rows)
    gl = sorted(set(float(v) for v in grid))
    if not gl:
        raise ValidationError("threshold grid must be nonempty")
    n = len(rows)
    width = 2 * len(gl)
    if width ** n > cap:
        raise ValidationError(
            f"condition space (2|A|)^n = {width ** n} exceeds cap {cap}")
    atoms = _atoms if _atoms is not None else _atom_table(M, gl, tol)
    exists_acc = atoms[rows[0]]          # ((2|A|)^t, cols) conjunction fold
    forall_acc = atoms[rows[0]]
    n_cols = atoms.shape[2]
    for i in rows[1:]:
        a = atoms[i]
        exists_acc = (exists_acc[:, None, :] & a[None, :, :]).reshape(-1, n_cols)
        forall_acc = (forall_acc[:, None, :] | a[None, :, :]).reshape(-1, n_cols)
    truth = np.concatenate([exists_acc.any(axis=1), forall_acc.all(axis=1)])
    return TypeFingerprint(bits=np.packbits(truth.astype(np.uint8)).tobytes(),
                           n=n, grid=tuple(gl))


def _count_colors(M, indices, k, grid, tol, atoms, cap_subsets=2000) -> int:
    seen = set()
    for count, sub in enumerate(itertools.combinations(indices, k)):
        if count >= cap_subsets:
            break
        seen.add(type_fingerprint(M, sub, grid, tol, _atoms=atoms).bits)
    return len(seen)


def extract_indiscernible(M: ValueMatrix, k: int, grid: Sequence[float],
                          target_len: int, tol: float = DEFAULT_TOL,
                          max_steps: int = 50_000) -> tuple[int, ...]:
    """Longest-first search for a subsequence whose k-subsets share one type.

    Earliest-index preference everywhere: at k = 1 the largest fingerprint
    class wins (ties to the class appearing first); at k >= 2 a depth-first
    end-extension keeps each candidate only if every new k-subset matches the
    reference fingerprint, with bounded backtracking.  The returned indices
    re-verify exhaustively.  Raises :class:`RamseyExhaustedError` (reporting
    the observed color count) when nothing of ``target_len`` is found.
    """
    if k < 1:
        raise ValidationError(f"k must be >= 1, got {k}")
    if target_len < k:
        raise ValidationError(f"target_len must be >= k, got {target_len} < {k}")
    n = M.n_rows
    gl = sorted(set(float(v) for v in grid))
    atoms = _atom_table(M, gl, tol)

    if k == 1:
        classes: dict[bytes, list[int]] = {}
        order: list[bytes] = []
        for i in range(n):
            fp = type_fingerprint(M, (i,), gl, tol, _atoms=atoms).bits
            if fp not in classes:
                classes[fp] = []
                order.append(fp)
            classes[fp].append(i)
        best = max(order, key=lambda fp: len(classes[fp]))
        chosen = classes[best]
        if len(chosen) < target_len:
            raise RamseyExhaustedError(
                f"sequence of length {n} admits no monochromatic subsequence of "
                f"length {target_len} under {len(order)} colors", colors=len(order))
        return tuple(chosen)

    fp_cache: dict[tuple[int, ...], bytes] = {}

    def fp_of(sub: tuple[int, ...]) -> bytes:
        hit = fp_cache.get(sub)
        if hit is None:
            hit = type_fingerprint(M, sub, gl, tol, _atoms=atoms).bits
            fp_cache[sub] = hit
        return hit

    steps = 0
    best_found: list[int] = []

    def extend(selection: list[int], reference: bytes | None) -> list[int] | None:
        nonlocal steps, best_found
        if len(selection) > len(best_found):
            best_found = list(selection)
        if len(selection) >= target_len:
            return list(selection)
        start = selection[-1] + 1 if selection else 0
        if len(selection) + (n - start) < target_len:
            return None
        for cand in range(start, n):
            steps += 1
            if steps > max_steps:
                return None
            ref = reference
            ok = True
            if len(selection) >= k - 1:
                for prefix in itertools.combinations(selection, k - 1):
                    sub = tuple(sorted(prefix + (cand,)))
                    fp = fp_of(sub)
                    if ref is None:
                        ref = fp
                    elif fp != ref:
                        ok = False
                        break
            if not ok:
                continue
            selection.append(cand)
            out = extend(selection, ref)
            selection.pop()
            if out is not None:
                return out
        return None

    result = extend([], None)
    if result is None:
        colors = _count_colors(M, range(n), k, gl, tol, atoms)
        raise RamseyExhaustedError(
            f"sequence of length {n} admits no monochromatic subsequence of "
            f"length {target_len} under the color count ({colors} colors observed)",
            colors=colors)
    return tuple(result)


def verify_indiscernible(M: ValueMatrix, indices: Sequence[int], k: int,
                         grid: Sequence[float], tol: float = DEFAULT_TOL) -> bool:
    """Exhaustively confirm all k-subsets of ``indices`` share one fingerprint."""
    idx = tuple(int(i) for i in indices)
    gl = sorted(set(float(v) for v in grid))
    atoms = _atom_table(M, gl, tol)
    ref: bytes | None = None
    for sub in itertools.combinations(idx, k):
        fp = type_fingerprint(M, sub, gl, tol, _atoms=atoms).bits
        if ref is None:
            ref = fp
        elif fp != ref:
            return False
    return True
