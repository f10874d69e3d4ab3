"""A small dense two-phase simplex solver with Bland's rule.

Solves   min c.x   s.t.  A_ub x <= b_ub,  A_eq x = b_eq,  x >= 0.

Self-contained on purpose: the norm diagnostics need a deterministic solver
with a fixed pivoting rule so results are bit-reproducible across platforms.
Bland's rule guarantees termination on the degenerate (b = 0) constraint rows
these problems produce.  Not meant for large programs.
"""

from __future__ import annotations

import numpy as np

PIVOT_TOL = 1e-9


class LpError(RuntimeError):
    """Infeasible or unbounded program, or iteration limit reached."""


def _simplex_iterate(T: np.ndarray, basis: list[int], n_real: int,
                     max_iter: int) -> None:
    """Run simplex pivots in place on tableau T (objective in last row).

    Columns 0..n_real-1 are decision+slack+artificial variables; the last
    column holds the right-hand side.  Bland's rule: entering = smallest
    index with negative reduced cost, leaving = smallest basis index among
    minimum-ratio rows.
    """
    m = T.shape[0] - 1
    for _ in range(max_iter):
        costs = T[-1, :n_real]
        entering = -1
        for j in range(n_real):
            if costs[j] < -PIVOT_TOL:
                entering = j
                break
        if entering < 0:
            return
        col = T[:m, entering]
        ratios = np.full(m, np.inf)
        ok = col > PIVOT_TOL
        ratios[ok] = T[:m, -1][ok] / col[ok]
        best = np.inf
        leaving = -1
        for i in range(m):
            if ratios[i] < best - PIVOT_TOL or (
                    ratios[i] < best + PIVOT_TOL and leaving >= 0
                    and basis[i] < basis[leaving]):
                if ratios[i] < np.inf:
                    best = min(best, ratios[i])
                    leaving = i
        if leaving < 0:
            raise LpError("unbounded linear program")
        piv = T[leaving, entering]
        T[leaving] /= piv
        for i in range(m + 1):
            if i != leaving and abs(T[i, entering]) > 0:
                T[i] -= T[i, entering] * T[leaving]
        basis[leaving] = entering
    raise LpError("simplex iteration limit reached")


def solve_lp_min(c, a_ub=None, b_ub=None, a_eq=None, b_eq=None,
                 max_iter: int = 20_000) -> tuple[np.ndarray, float]:
    """Return (x, objective) for the standard-form minimization above."""
    c = np.asarray(c, dtype=float)
    n = c.size
    rows = []
    rhs = []
    kinds = []  # "ub" or "eq"
    if a_ub is not None:
        a_ub = np.atleast_2d(np.asarray(a_ub, dtype=float))
        for row, b in zip(a_ub, np.atleast_1d(b_ub)):
            rows.append(row)
            rhs.append(float(b))
            kinds.append("ub")
    if a_eq is not None:
        a_eq = np.atleast_2d(np.asarray(a_eq, dtype=float))
        for row, b in zip(a_eq, np.atleast_1d(b_eq)):
            rows.append(row)
            rhs.append(float(b))
            kinds.append("eq")
    m = len(rows)
    A = np.vstack(rows) if m else np.zeros((0, n))
    b = np.asarray(rhs, dtype=float)

    n_slack = sum(1 for k in kinds if k == "ub")
    slack_of = {}
    si = 0
    for i, k in enumerate(kinds):
        if k == "ub":
            slack_of[i] = n + si
            si += 1

    # Normalize to b >= 0; negated ub rows lose their slack as a basis seat.
    full = np.zeros((m, n + n_slack))
    full[:, :n] = A
    for i, k in enumerate(kinds):
        if k == "ub":
            full[i, slack_of[i]] = 1.0
    for i in range(m):
        if b[i] < 0:
            full[i] *= -1.0
            b[i] *= -1.0

    need_art = []
    basis: list[int] = []
    for i in range(m):
        j = slack_of.get(i)
        if j is not None and full[i, j] == 1.0:
            basis.append(j)
        else:
            need_art.append(i)
            basis.append(-1)
    n_art = len(need_art)
    total = n + n_slack + n_art
    T = np.zeros((m + 1, total + 1))
    T[:m, : n + n_slack] = full
    T[:m, -1] = b
    for a_idx, i in enumerate(need_art):
        col = n + n_slack + a_idx
        T[i, col] = 1.0
        basis[i] = col

    if n_art:
        # Phase 1: minimize the artificial sum.
        T[-1, n + n_slack: total] = 1.0
        for i in need_art:
            T[-1] -= T[i]
        _simplex_iterate(T, basis, total, max_iter)
        if T[-1, -1] < -PIVOT_TOL * max(1.0, abs(b).max()):
            raise LpError("infeasible linear program")
        for i in range(m):  # pivot lingering artificials out of the basis
            if basis[i] >= n + n_slack:
                for j in range(n + n_slack):
                    if abs(T[i, j]) > PIVOT_TOL:
                        piv = T[i, j]
                        T[i] /= piv
                        for ii in range(m + 1):
                            if ii != i and abs(T[ii, j]) > 0:
                                T[ii] -= T[ii, j] * T[i]
                        basis[i] = j
                        break
        T = np.delete(T, np.s_[n + n_slack: total], axis=1)
        total = n + n_slack

    T[-1, :] = 0.0
    T[-1, :n] = c
    for i in range(m):
        if basis[i] < total and abs(T[-1, basis[i]]) > 0:
            T[-1] -= T[-1, basis[i]] * T[i]
    _simplex_iterate(T, basis, total, max_iter)

    x = np.zeros(total)
    for i in range(m):
        if basis[i] >= 0:
            x[basis[i]] = T[i, -1]
    return x[:n], float(c @ x[:n])
