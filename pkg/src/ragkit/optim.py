"""Dense LP and strictly convex QP solvers.

Sized for the many small problems this toolkit generates (tens of rows,
at most ~10 variables): support functions, redundancy tests, emptiness
checks and the per-piece governor programs. Determinism matters more
than raw speed here, so the simplex always pivots with Bland's rule and
the active-set method breaks every tie by lowest constraint index.
Identical inputs produce bit-identical outputs.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Optional, Sequence

import numpy as np

from .errors import RagkitError

FEAS_TOL = 1e-9
PHASE1_TOL = 1e-9
PIVOT_TOL = 1e-11
UNBOUNDED_TOL = 1e-7
MAX_ITER = 100_000


class SolverStalled(RagkitError):
    """Pivot iteration cap exceeded."""


class Status(Enum):
    OPTIMAL = "optimal"
    INFEASIBLE = "infeasible"
    UNBOUNDED = "unbounded"


@dataclass(frozen=True)
class SolveOutcome:
    """Result of an LP/QP solve.

    ``multipliers`` (QP only) are the inequality multipliers, zero off the
    active set. ``infeasibility`` carries the phase-1 objective when the
    status is INFEASIBLE.
    """

    status: Status
    solution: Optional[np.ndarray] = None
    objective: Optional[float] = None
    iterations: int = 0
    multipliers: Optional[np.ndarray] = None
    infeasibility: Optional[float] = None

    def __post_init__(self):
        if (self.solution is not None) != (self.status is Status.OPTIMAL):
            raise ValueError("solution must be present exactly when status is OPTIMAL")


def _as_matrix(A, n_cols=None) -> np.ndarray:
    A = np.asarray(A, dtype=float)
    if A.ndim == 1:
        A = A.reshape(1, -1) if A.size else A.reshape(0, 0 if n_cols is None else n_cols)
    if A.ndim != 2:
        raise ValueError("expected a 2-d constraint matrix")
    return A


@dataclass(frozen=True)
class LinearProgram:
    """min c.x  subject to  A x <= b, plus optional per-variable bounds."""

    c: np.ndarray
    A: np.ndarray
    b: np.ndarray
    bounds: Optional[Sequence[tuple]] = None

    def __post_init__(self):
        c = np.asarray(self.c, dtype=float).reshape(-1)
        A = _as_matrix(self.A, c.size)
        b = np.asarray(self.b, dtype=float).reshape(-1)
        if A.shape[0] != b.size:
            raise ValueError(f"A has {A.shape[0]} rows but b has {b.size}")
        if A.shape[0] and A.shape[1] != c.size:
            raise ValueError(f"A has {A.shape[1]} columns but c has {c.size}")
        if not (np.isfinite(c).all() and np.isfinite(A).all() and np.isfinite(b).all()):
            raise ValueError("LP data must be finite")
        if self.bounds is not None and len(self.bounds) != c.size:
            raise ValueError("bounds must give one (lo, hi) pair per variable")
        object.__setattr__(self, "c", c)
        object.__setattr__(self, "A", A if A.size else A.reshape(0, c.size))
        object.__setattr__(self, "b", b)

    def stacked(self) -> tuple[np.ndarray, np.ndarray]:
        """Constraint system with finite variable bounds folded in as rows."""
        if self.bounds is None:
            return self.A, self.b
        n = self.c.size
        rows, rhs = [self.A], [self.b]
        for i, (lo, hi) in enumerate(self.bounds):
            if lo is not None and np.isfinite(lo):
                r = np.zeros(n)
                r[i] = -1.0
                rows.append(r.reshape(1, -1))
                rhs.append(np.array([-float(lo)]))
            if hi is not None and np.isfinite(hi):
                r = np.zeros(n)
                r[i] = 1.0
                rows.append(r.reshape(1, -1))
                rhs.append(np.array([float(hi)]))
        return np.vstack(rows), np.concatenate(rhs)


@dataclass(frozen=True)
class QuadraticProgram:
    """min (u - target).S.(u - target)  subject to  A u <= b.

    S must be symmetric positive definite; this is checked at construction
    by an explicit symmetry test plus a Cholesky factorization.
    """

    S: np.ndarray
    target: np.ndarray
    A: np.ndarray
    b: np.ndarray

    def __post_init__(self):
        S = np.asarray(self.S, dtype=float)
        if S.ndim == 0:
            S = S.reshape(1, 1)
        t = np.asarray(self.target, dtype=float).reshape(-1)
        A = _as_matrix(self.A, t.size)
        b = np.asarray(self.b, dtype=float).reshape(-1)
        if S.shape != (t.size, t.size):
            raise ValueError("S must be square and match the target dimension")
        if np.max(np.abs(S - S.T)) > 1e-9:
            raise ValueError("S must be symmetric")
        try:
            np.linalg.cholesky(S)
        except np.linalg.LinAlgError:
            raise ValueError("S must be positive definite") from None
        if A.shape[0] != b.size:
            raise ValueError(f"A has {A.shape[0]} rows but b has {b.size}")
        if A.shape[0] and A.shape[1] != t.size:
            raise ValueError("A column count must match the target dimension")
        if not (np.isfinite(S).all() and np.isfinite(t).all() and np.isfinite(A).all() and np.isfinite(b).all()):
            raise ValueError("QP data must be finite")
        object.__setattr__(self, "S", S)
        object.__setattr__(self, "target", t)
        object.__setattr__(self, "A", A if A.size else A.reshape(0, t.size))
        object.__setattr__(self, "b", b)


def _pivot(T: np.ndarray, basis: np.ndarray, row: int, col: int) -> None:
    T[row] /= T[row, col]
    colvals = T[:, col].copy()
    colvals[row] = 0.0
    T -= np.outer(colvals, T[row])
    basis[row] = col


def _run_simplex(T: np.ndarray, basis: np.ndarray, allowed: np.ndarray, budget: int):
    """Minimize the objective encoded in the last tableau row.

    Bland's rule throughout: entering column = lowest-index allowed column
    with reduced cost < -tol; leaving row = minimum ratio, ties broken by
    lowest basis-variable index. Columns whose reduced cost is only
    tolerance-level negative but whose tableau column has no usable pivot
    are numerical debris and get skipped; UNBOUNDED needs a strongly
    negative reduced cost. Returns (status, iterations).
    """
    m = T.shape[0] - 1
    it = 0
    while True:
        red = T[-1, :-1]
        cand = np.nonzero(allowed & (red < -FEAS_TOL))[0]
        if cand.size == 0:
            return Status.OPTIMAL, it
        pivoted = False
        for col in cand:
            colvec = T[:m, col]
            rows = np.nonzero(colvec > PIVOT_TOL)[0]
            if rows.size == 0:
                if red[col] < -UNBOUNDED_TOL:
                    return Status.UNBOUNDED, it
                continue
            num = np.maximum(T[rows, -1], 0.0)
            ratios = num / colvec[rows]
            best = ratios.min()
            ties = rows[ratios <= best + 1e-12]
            row = int(ties[np.argmin(basis[ties])])
            _pivot(T, basis, row, int(col))
            pivoted = True
            break
        if not pivoted:
            # only tolerance-level negative reduced costs remain
            return Status.OPTIMAL, it
        it += 1
        if it > budget:
            raise SolverStalled("stalled")


def solve_lp(lp: LinearProgram) -> SolveOutcome:
    """Two-phase dense simplex with Bland's anti-cycling rule.

    Free variables are split into positive parts; rows with negative rhs
    get artificial variables whose sum is minimized in phase 1.
    """
    A, b = lp.stacked()
    c = lp.c
    m, n = A.shape[0], c.size
    if m == 0:
        if np.any(np.abs(c) > 0.0):
            return SolveOutcome(Status.UNBOUNDED)
        return SolveOutcome(Status.OPTIMAL, np.zeros(n), 0.0, 0)

    sign = np.where(b < 0.0, -1.0, 1.0)
    art_rows = np.nonzero(sign < 0.0)[0]
    k = art_rows.size
    ncols = 2 * n + m + k
    T = np.zeros((m + 1, ncols + 1))
    T[:m, :n] = A * sign[:, None]
    T[:m, n:2 * n] = -T[:m, :n]
    T[np.arange(m), 2 * n + np.arange(m)] = sign
    T[art_rows, 2 * n + m + np.arange(k)] = 1.0
    T[:m, -1] = b * sign

    basis = np.empty(m, dtype=int)
    pos_rows = np.nonzero(sign > 0.0)[0]
    basis[pos_rows] = 2 * n + pos_rows
    basis[art_rows] = 2 * n + m + np.arange(k)
    allowed = np.ones(ncols, dtype=bool)
    iterations = 0

    if k:
        T[-1, :] = 0.0
        T[-1, 2 * n + m:-1] = 1.0
        for r in art_rows:
            T[-1, :] -= T[r, :]
        status, it = _run_simplex(T, basis, allowed, MAX_ITER)
        iterations += it
        phase1_obj = -T[-1, -1]
        if phase1_obj > PHASE1_TOL:
            return SolveOutcome(Status.INFEASIBLE, iterations=iterations,
                                infeasibility=float(phase1_obj))
        allowed[2 * n + m:] = False
        for r in range(m):
            if basis[r] >= 2 * n + m:
                piv = np.nonzero(allowed & (np.abs(T[r, :-1]) > FEAS_TOL))[0]
                if piv.size:
                    _pivot(T, basis, r, int(piv[0]))
                    iterations += 1
                # else: the row is redundant; its artificial stays basic at
                # level ~0 and can never re-enter the objective.

    T[-1, :] = 0.0
    T[-1, :n] = c
    T[-1, n:2 * n] = -c
    for r in range(m):
        cb = T[-1, basis[r]]
        if cb != 0.0:
            T[-1, :] -= cb * T[r, :]
    status, it = _run_simplex(T, basis, allowed, MAX_ITER - iterations)
    iterations += it
    if status is Status.UNBOUNDED:
        return SolveOutcome(Status.UNBOUNDED, iterations=iterations)

    vals = np.zeros(ncols)
    vals[basis] = T[:m, -1]
    x = vals[:n] - vals[n:2 * n]
    return SolveOutcome(Status.OPTIMAL, x, float(c @ x), iterations)


def _solve_kkt(S2: np.ndarray, St2: np.ndarray, AW: np.ndarray, bW: np.ndarray):
    n = St2.size
    ksz = AW.shape[0]
    KKT = np.zeros((n + ksz, n + ksz))
    KKT[:n, :n] = S2
    if ksz:
        KKT[:n, n:] = AW.T
        KKT[n:, :n] = AW
    rhs = np.concatenate([St2, bW])
    try:
        sol = np.linalg.solve(KKT, rhs)
    except np.linalg.LinAlgError:
        sol, *_ = np.linalg.lstsq(KKT, rhs, rcond=None)
    return sol[:n], sol[n:]


def solve_qp(qp: QuadraticProgram, max_iter: int = MAX_ITER) -> SolveOutcome:
    """Primal active-set method for a strictly convex inequality QP.

    A feasible vertex comes from the phase-1 simplex; the working set then
    grows/shrinks one constraint at a time. On OPTIMAL returns, the KKT
    conditions hold to solver tolerance and ``multipliers`` carries the
    full inequality multiplier vector.
    """
    S, t, A, b = qp.S, qp.target, qp.A, qp.b
    n, m = t.size, A.shape[0]
    if m == 0:
        return SolveOutcome(Status.OPTIMAL, t.copy(), 0.0, 0, multipliers=np.zeros(0))

    feas = solve_lp(LinearProgram(np.zeros(n), A, b))
    if feas.status is not Status.OPTIMAL:
        return SolveOutcome(Status.INFEASIBLE, iterations=feas.iterations,
                            infeasibility=feas.infeasibility)
    u = feas.solution.copy()
    work: list[int] = []
    S2 = 2.0 * S
    St2 = S2 @ t
    it = 0
    while True:
        it += 1
        if it > max_iter:
            raise SolverStalled("stalled")
        AW = A[work] if work else np.zeros((0, n))
        u_eqp, lam = _solve_kkt(S2, St2, AW, b[np.asarray(work, dtype=int)] if work else np.zeros(0))
        if np.max(np.abs(u_eqp - u), initial=0.0) <= 1e-11:
            neg = [i for i, w in enumerate(work) if lam[i] < -1e-9]
            if not neg:
                mu = np.zeros(m)
                if work:
                    mu[np.asarray(work, dtype=int)] = lam
                obj = float((u - t) @ S @ (u - t))
                return SolveOutcome(Status.OPTIMAL, u, obj, it, multipliers=mu)
            # drop the lowest-index violating constraint (work is sorted)
            work.pop(neg[0])
            continue
        d = u_eqp - u
        Ad = A @ d
        slack = b - A @ u
        mask = np.ones(m, dtype=bool)
        if work:
            mask[np.asarray(work, dtype=int)] = False
        mask &= Ad > 1e-12
        if not mask.any():
            u = u_eqp
            continue
        idxs = np.nonzero(mask)[0]
        alphas = np.maximum(slack[idxs], 0.0) / Ad[idxs]
        amin = float(alphas.min())
        if amin >= 1.0 - 1e-12:
            u = u_eqp
            continue
        blocking = int(idxs[alphas <= amin + 1e-12][0])
        u = u + amin * d
        work.append(blocking)
        work.sort()
