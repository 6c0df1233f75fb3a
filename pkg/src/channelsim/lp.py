"""Dense two-phase primal simplex with Bland's anti-cycling rule.

Small self-contained solver for the linear programs that appear in the
meta-converse and smoothing computations. Design choices, deliberately
boring: a dense tableau (the programs here are dense anyway), Bland's
smallest-index entering rule with ratio ties broken by the smallest
basic variable index, equality rows handled through phase-1 artificial
variables. Identical input therefore produces an identical pivot
sequence and bit-identical output.

Tolerances: reduced costs count as negative below -1e-9, pivot entries
below 1e-11 are never used (an LpNumericsError is raised if no usable
pivot exists), and solutions are rejected unless every constraint
residual is within 1e-8.
"""

from __future__ import annotations

import dataclasses
import math

import numpy as np

RC_TOL = 1e-9
PIVOT_TOL = 1e-11
FEAS_TOL = 1e-8


class LpNumericsError(RuntimeError):
    """Raised when the tableau degrades past the documented tolerances."""


@dataclasses.dataclass(frozen=True, eq=False)
class LpProblem:
    """minimize c.x  subject to  A x (<=, =, >=) b  and  lower <= x <= upper.

    senses is one string per row, each '<=', '=' or '>='. Bounds default
    to [0, +inf); use -inf/+inf entries for free or unbounded variables.
    """

    c: np.ndarray
    a: np.ndarray
    b: np.ndarray
    senses: tuple
    lower: np.ndarray = None
    upper: np.ndarray = None

    def __post_init__(self):
        c = np.asarray(self.c, dtype=np.float64)
        a = np.atleast_2d(np.asarray(self.a, dtype=np.float64))
        b = np.asarray(self.b, dtype=np.float64)
        senses = tuple(self.senses)
        if a.shape != (b.size, c.size):
            raise ValueError("constraint matrix shape mismatch")
        if len(senses) != b.size or any(s not in ("<=", "=", ">=") for s in senses):
            raise ValueError("senses must be '<=', '=' or '>=' per row")
        lower = (np.zeros(c.size) if self.lower is None
                 else np.asarray(self.lower, dtype=np.float64))
        upper = (np.full(c.size, np.inf) if self.upper is None
                 else np.asarray(self.upper, dtype=np.float64))
        if lower.size != c.size or upper.size != c.size:
            raise ValueError("bound vector size mismatch")
        if np.any(lower > upper):
            raise ValueError("empty box: lower > upper")
        for name, arr in (("c", c), ("a", a), ("b", b)):
            if not np.all(np.isfinite(arr)):
                raise ValueError(f"{name} must be finite")
        object.__setattr__(self, "c", c)
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "senses", senses)
        object.__setattr__(self, "lower", lower)
        object.__setattr__(self, "upper", upper)

    @property
    def num_vars(self) -> int:
        return int(self.c.size)

    @property
    def num_rows(self) -> int:
        return int(self.b.size)


@dataclasses.dataclass(frozen=True, eq=False)
class LpSolution:
    status: str            # 'optimal' | 'infeasible' | 'unbounded'
    value: float
    x: np.ndarray          # None unless optimal
    iterations: int


def _pivot(tab: np.ndarray, obj: np.ndarray, basis: np.ndarray, row: int, col: int):
    piv = tab[row, col]
    tab[row] /= piv
    pivot_row = tab[row]
    factors = tab[:, col].copy()
    factors[row] = 0.0
    tab -= np.outer(factors, pivot_row)
    obj -= obj[col] * pivot_row
    basis[row] = col


def _run_simplex(tab, obj, basis, allowed, max_iters):
    """Bland iterations on the current tableau. Returns (status, iters)."""
    iters = 0
    ncols = tab.shape[1] - 1
    while True:
        if iters > max_iters:
            raise LpNumericsError("simplex iteration limit exceeded")
        entering = -1
        saw_tiny_only = False
        for j in range(ncols):
            if not allowed[j] or obj[j] >= -RC_TOL:
                continue
            col = tab[:, j]
            pos = col > PIVOT_TOL
            if not pos.any():
                if np.any(col > 0.0):
                    saw_tiny_only = True   # only sub-tolerance pivots here
                    continue
                return "unbounded", iters
            entering = j
            break
        if entering < 0:
            if saw_tiny_only:
                raise LpNumericsError("no pivot above 1e-11 in any improving column")
            return "optimal", iters
        col = tab[:, entering]
        rows = np.flatnonzero(col > PIVOT_TOL)
        ratios = tab[rows, -1] / col[rows]
        best = ratios.min()
        # Bland tie-break: smallest basic variable index among minimal ratios
        tied = rows[ratios <= best + 1e-12 * max(1.0, abs(best))]
        leave = tied[np.argmin(basis[tied])]
        _pivot(tab, obj, basis, int(leave), entering)
        iters += 1


def solve_lp(problem: LpProblem, max_iters: int = None) -> LpSolution:
    """Solve an LpProblem, returning an optimal basic solution.

    Raises LpNumericsError when the tableau cannot be trusted; returns
    status 'infeasible' or 'unbounded' (with x = None) for well-posed
    programs without an optimum.
    """
    n = problem.num_vars
    m = problem.num_rows

    # ---- rewrite bounds: shift finite lowers, split free vars, rows for uppers
    shift = np.where(np.isfinite(problem.lower), problem.lower, 0.0)
    col_of = []            # (variable, +1) and, for free variables, (variable, -1)
    for j in range(n):
        col_of.append((j, 1.0))
    for j in range(n):
        if not np.isfinite(problem.lower[j]):
            col_of.append((j, -1.0))
    ncols_struct = len(col_of)

    a_rows = []
    b_vals = []
    senses = []
    base_b = problem.b - problem.a @ shift
    for i in range(m):
        row = np.zeros(ncols_struct)
        for jcol, (var, sign) in enumerate(col_of):
            row[jcol] = sign * problem.a[i, var]
        a_rows.append(row)
        b_vals.append(base_b[i])
        senses.append(problem.senses[i])
    for j in range(n):
        if np.isfinite(problem.upper[j]):
            row = np.zeros(ncols_struct)
            for jcol, (var, sign) in enumerate(col_of):
                if var == j:
                    row[jcol] = sign
            a_rows.append(row)
            b_vals.append(problem.upper[j] - shift[j])
            senses.append("<=")

    A = np.array(a_rows)
    b = np.array(b_vals)
    rows_total = b.size
    neg = b < 0.0
    A[neg] *= -1.0
    b[neg] = -b[neg]
    flipped = {"<=": ">=", ">=": "<=", "=": "="}
    senses = [flipped[s] if f else s for s, f in zip(senses, neg)]

    # ---- slack and artificial blocks
    n_slack = sum(1 for s in senses if s in ("<=", ">="))
    n_art = sum(1 for s in senses if s in (">=", "="))
    ncols = ncols_struct + n_slack + n_art
    tab = np.zeros((rows_total, ncols + 1))
    tab[:, :ncols_struct] = A
    tab[:, -1] = b
    basis = np.empty(rows_total, dtype=np.int64)
    s_at = ncols_struct
    a_at = ncols_struct + n_slack
    art_cols = []
    for i, s in enumerate(senses):
        if s == "<=":
            tab[i, s_at] = 1.0
            basis[i] = s_at
            s_at += 1
        elif s == ">=":
            tab[i, s_at] = -1.0
            s_at += 1
            tab[i, a_at] = 1.0
            basis[i] = a_at
            art_cols.append(a_at)
            a_at += 1
        else:
            tab[i, a_at] = 1.0
            basis[i] = a_at
            art_cols.append(a_at)
            a_at += 1

    if max_iters is None:
        max_iters = 200 * (rows_total + ncols) + 2000

    iters_total = 0
    allowed = np.ones(ncols, dtype=bool)
    if art_cols:
        # phase 1: minimize the sum of artificials, expressed in reduced form
        obj = np.zeros(ncols + 1)
        for i in np.flatnonzero(np.isin(basis, art_cols)):
            obj -= tab[i]
        obj[art_cols] = 0.0
        status, it1 = _run_simplex(tab, obj, basis, allowed, max_iters)
        iters_total += it1
        if status == "unbounded":
            raise LpNumericsError("phase 1 reported unbounded")
        phase1_val = float(tab[np.isin(basis, art_cols), -1].sum())
        if phase1_val > FEAS_TOL:
            return LpSolution("infeasible", math.inf, None, iters_total)
        # drive remaining artificials out of the basis, drop redundant rows
        keep_rows = np.ones(rows_total, dtype=bool)
        art_set = set(art_cols)
        for i in range(rows_total):
            if int(basis[i]) not in art_set:
                continue
            cand = np.flatnonzero(np.abs(tab[i, : ncols_struct + n_slack]) > PIVOT_TOL)
            if cand.size:
                _pivot(tab, obj, basis, i, int(cand[0]))
                iters_total += 1
            else:
                keep_rows[i] = False
        tab = tab[keep_rows]
        basis = basis[keep_rows]
        rows_total = tab.shape[0]
    # artificial columns are dead from here on
    allowed[ncols_struct + n_slack:] = False

    # phase 2 objective in reduced form
    c_ext = np.zeros(ncols + 1)
    for jcol, (var, sign) in enumerate(col_of):
        c_ext[jcol] = sign * problem.c[var]
    obj = c_ext.copy()
    for i in range(rows_total):
        if obj[basis[i]] != 0.0:
            obj -= obj[basis[i]] * tab[i]
    status, it2 = _run_simplex(tab, obj, basis, allowed, max_iters)
    iters_total += it2
    if status == "unbounded":
        return LpSolution("unbounded", -math.inf, None, iters_total)

    # ---- recover x in the original variable space and validate
    x_std = np.zeros(ncols)
    x_std[basis] = tab[:, -1]
    if x_std.min() < -FEAS_TOL:
        raise LpNumericsError("negative basic value beyond tolerance")
    x = shift.copy()
    for jcol, (var, sign) in enumerate(col_of):
        x[var] += sign * max(x_std[jcol], 0.0)

    resid = problem.a @ x - problem.b
    for i, s in enumerate(problem.senses):
        bad = (s == "<=" and resid[i] > FEAS_TOL) or \
              (s == ">=" and resid[i] < -FEAS_TOL) or \
              (s == "=" and abs(resid[i]) > FEAS_TOL)
        if bad:
            raise LpNumericsError(f"row {i} residual {resid[i]:.3e} out of tolerance")
    if np.any(x < problem.lower - FEAS_TOL) or np.any(x > problem.upper + FEAS_TOL):
        raise LpNumericsError("bound violation beyond tolerance")

    value = float(problem.c @ x)
    tableau_value = -float(obj[-1]) + float(problem.c @ shift)
    if abs(value - tableau_value) > 1e-9 * max(1.0, abs(value)):
        raise LpNumericsError("tableau objective drifted from recomputed value")
    return LpSolution("optimal", value, x, iters_total)
