"""Finite-dimensional norm diagnostics for function families.

Sup-norm combinations, the summing-basis norm, the dominance inequality for
monotone chains, and the lower equivalence constant against the unit basis of
l1 (computed exactly by one linear program per sign orthant).

Orientation: :func:`sup_norm_combo` takes rows = functions.  The dominance
check takes the chain matrix in detector orientation (points x functions)
because its witness indices refer to that view; it transposes internally.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from .core import (
    DEFAULT_TOL,
    CoefficientVector,
    StrictOrderWitness,
    ValidationError,
    ValueMatrix,
    WitnessCheckError,
    check_witness,
)
from .simplex import solve_lp_min

EXACT_L1_CAP = 12


@dataclass(frozen=True)
class L1ConstantResult:
    """Lower equivalence constant against the unit l1 basis.

    ``constant`` is (an upper bound on, exact when ``exact``) the infimum of
    the sup norm over unit-l1-norm combinations of the selected rows; the
    minimizer attains it.
    """

    constant: float
    minimizer: tuple[float, ...]
    exact: bool
    k: int


@dataclass(frozen=True)
class DominanceResult:
    """Outcome of the summing-basis dominance sweep."""

    passed: bool
    max_violation: float
    trials: int


def _coeffs(coeffs: CoefficientVector) -> np.ndarray:
    c = np.asarray(list(coeffs), dtype=float)
    if c.ndim != 1 or c.size < 1:
        raise ValidationError("coefficient vector must be a nonempty 1-d sequence")
    if not np.isfinite(c).all():
        raise ValidationError("coefficient vector must be finite")
    return c


def sup_norm_combo(seq: ValueMatrix, coeffs: CoefficientVector) -> float:
    """Max over sample points of |sum_i c_i f_i(x)|; rows of seq are the f_i."""
    c = _coeffs(coeffs)
    if c.size > seq.n_rows:
        raise ValidationError(
            f"{c.size} coefficients for {seq.n_rows} rows")
    return float(np.abs(c @ seq.values[: c.size]).max())


def summing_basis_norm(coeffs: CoefficientVector) -> float:
    """Max absolute tail sum max_j |sum_{i>=j} c_i| of the coefficient vector."""
    c = _coeffs(coeffs)
    tails = np.cumsum(c[::-1])[::-1]
    return float(np.abs(tails).max())


def sample_l1_sphere(k: int, trials: int, seed: int = 0) -> np.ndarray:
    """Seeded uniform samples on the unit l1 sphere, shape (trials, k)."""
    rng = np.random.default_rng(seed)
    mags = rng.dirichlet(np.ones(k), size=trials)
    signs = rng.choice((-1.0, 1.0), size=(trials, k))
    return mags * signs


def summing_dominance_check(chain_matrix: ValueMatrix, witness: StrictOrderWitness,
                            trials: int = 10_000, seed: int = 0,
                            tol: float = DEFAULT_TOL) -> DominanceResult:
    """Sweep random l1-sphere coefficients over a verified chain: the sup-norm
    combination must never exceed the summing-basis norm.

    ``chain_matrix`` is points x functions; the witness is re-checked against
    it first and rejected if broken.
    """
    if not check_witness(chain_matrix, witness, tol=tol):
        raise WitnessCheckError("strict-order witness failed re-check; input rejected")
    funcs = chain_matrix.values[:, list(witness.a_indices)].T  # (k, points)
    k = funcs.shape[0]
    C = sample_l1_sphere(k, trials, seed)
    sups = np.abs(C @ funcs).max(axis=1)
    tails = np.abs(np.cumsum(C[:, ::-1], axis=1)[:, ::-1]).max(axis=1)
    violation = float((sups - tails).max())
    return DominanceResult(passed=bool(violation <= tol),
                           max_violation=violation, trials=trials)


def _orthant_lp(F: np.ndarray, sigma: np.ndarray) -> tuple[np.ndarray, float]:
    """Minimize max_x |sum_i c_i F[i,x]| over the orthant slice sigma_i c_i >= 0,
    sum |c_i| = 1.  Substituting u_i = sigma_i c_i >= 0 gives an LP in (u, t).
    """
    k, npts = F.shape
    G = sigma[:, None] * F
    # variables: u_1..u_k, t ; minimize t
    c = np.zeros(k + 1)
    c[-1] = 1.0
    a_ub = np.zeros((2 * npts, k + 1))
    a_ub[:npts, :k] = G.T
    a_ub[npts:, :k] = -G.T
    a_ub[:, -1] = -1.0
    b_ub = np.zeros(2 * npts)
    a_eq = np.ones((1, k + 1))
    a_eq[0, -1] = 0.0
    x, val = solve_lp_min(c, a_ub, b_ub, a_eq, [1.0])
    return sigma * x[:k], val


def l1_lower_constant(seq: ValueMatrix, row_subset,
                      mode: str = "exact", trials: int = 2000,
                      seed: int = 0) -> L1ConstantResult:
    """inf over unit-l1-norm coefficients of the sup norm of the combination.

    Exact mode solves one LP per sign orthant (the objective is convex
    piecewise-linear inside each orthant slice of the l1 sphere); capped at
    k <= 12 rows.  Sampling mode takes the best of seeded sphere samples plus
    the uniform vector of every sign pattern, and only overestimates.
    """
    rows = [int(i) for i in row_subset]
    if not rows:
        raise ValidationError("row_subset must be nonempty")
    if len(set(rows)) != len(rows):
        raise ValidationError("row_subset must be distinct")
    k = len(rows)
    F = seq.values[rows]
    if mode == "exact":
        if k > EXACT_L1_CAP:
            raise ValidationError(f"exact mode caps k at {EXACT_L1_CAP}, got {k}")
        best_val = np.inf
        best_c = None
        for sigma_bits in itertools.product((1.0, -1.0), repeat=k):
            sigma = np.array(sigma_bits)
            cvec, val = _orthant_lp(F, sigma)
            if val < best_val - 1e-15:
                best_val, best_c = val, cvec
        c = best_c
        exact = True
    elif mode == "sampling":
        cands = [sample_l1_sphere(k, trials, seed)]
        for sigma_bits in itertools.product((1.0, -1.0), repeat=min(k, 10)):
            sig = np.array(sigma_bits + (1.0,) * (k - len(sigma_bits)))
            cands.append((sig / k).reshape(1, -1))
        C = np.vstack(cands)
        sups = np.abs(C @ F).max(axis=1)
        idx = int(np.argmin(sups))
        c = C[idx]
        exact = False
    else:
        raise ValidationError(f"mode must be 'exact' or 'sampling', got {mode!r}")

    norm = np.abs(c).sum()
    c = c / norm if norm > 0 else np.ones(k) / k
    constant = float(np.abs(c @ F).max())
    return L1ConstantResult(constant=constant,
                            minimizer=tuple(float(v) for v in c),
                            exact=exact, k=k)
