"""Channel max-information and no-signaling simulation cost programs.

The one-shot cost of simulating a channel W within TVD eps under
no-signaling assistance is the ceiling of 2 to the smoothed channel
max-information

    I_max^eps(W) = log2 min sum_y zeta(y)

over row-stochastic substitutes W~ with W~(y|x) <= zeta(y) and per-row TVD
to W at most eps. Both directions of the tradeoff are exposed: minimal cost
at fixed eps, and minimal eps at fixed integer cost. For BSC tensor powers
the permutation symmetry collapses the exponential-size program onto the
Hamming-weight classes, which is what makes blocklengths in the hundreds
tractable; see ``bsc_ns_cost``.

Witness conventions: LP witnesses are renormalized row-wise before being
returned, and reported reference weights zeta are the raw LP values whose
sum is the (fractional) cost.
"""

from __future__ import annotations

import dataclasses
import math

import numpy as np

from .divergences import d_max, d_max_smooth, d_s_plus
from .lp import LpProblem, solve_lp
from .prob import Dmc

# Presolve thresholds for the symmetrized LPs, see _bsc_reduction.
_CAP_SLACK = 4.0
_CAP_W_FRACTION = 0.5
_TAIL_PIN = 1e-9
_BULK_PIN = 1e-15


def _channel_rows(w) -> np.ndarray:
    return w.rows if hasattr(w, "rows") else np.asarray(w, dtype=np.float64)


def i_max(w) -> float:
    """Unsmoothed channel max-information log2 sum_y max_x W(y|x)."""
    rows = _channel_rows(w)
    return float(math.log2(rows.max(axis=0).sum()))


@dataclasses.dataclass(frozen=True)
class SmoothImax:
    """Value of I_max^eps together with the optimizing substitute channel."""

    value: float
    w_tilde: np.ndarray
    zeta: np.ndarray

    @property
    def reference(self) -> np.ndarray:
        """The witness output pmf zeta normalized to unit mass."""
        return self.zeta / self.zeta.sum()


@dataclasses.dataclass(frozen=True)
class NsCostResult:
    i_max_eps: float
    cost: int
    w_tilde: np.ndarray
    zeta: np.ndarray


def _clamped_ceil(value: float) -> int:
    """Ceiling after snapping to the nearest integer within 1e-9."""
    nearest = round(value)
    if abs(value - nearest) <= 1e-9:
        return int(nearest)
    return int(math.ceil(value))


def _clean_rows(raw: np.ndarray) -> np.ndarray:
    """Row-normalize an LP witness after dropping solver dust below 1e-13.

    The dust matters: a 1e-15 entry left where the optimal zeta is zero
    would blow the max divergence of the witness row up to infinity.
    """
    rows = np.where(raw < 1e-13, 0.0, raw)
    return rows / rows.sum(axis=1, keepdims=True)


def i_max_smooth(w, eps: float) -> SmoothImax:
    """Smoothed channel max-information, the simulation meta-converse.

    Solved as one LP over variables W~ (k x m), zeta (m) and the TVD slacks
    mu (k x m): minimize sum zeta subject to W~ row-stochastic,
    W~(y|x) <= zeta(y), mu >= W~ - W and sum_y mu(x, y) <= eps per row.
    """
    rows = _channel_rows(w)
    if not 0.0 <= eps < 1.0:
        raise ValueError("eps must lie in [0, 1)")
    k, m = rows.shape
    # Variable layout: W~ flat (k*m), zeta (m), mu flat (k*m).
    km = k * m
    nv = 2 * km + m
    a_rows, rhs, senses = [], [], []
    for x in range(k):
        row = np.zeros(nv)
        row[x * m:(x + 1) * m] = 1.0
        a_rows.append(row)
        rhs.append(1.0)
        senses.append("=")
    for x in range(k):
        for y in range(m):
            row = np.zeros(nv)
            row[x * m + y] = 1.0
            row[km + y] = -1.0
            a_rows.append(row)
            rhs.append(0.0)
            senses.append("<=")
            row = np.zeros(nv)
            row[x * m + y] = 1.0
            row[km + m + x * m + y] = -1.0
            a_rows.append(row)
            rhs.append(rows[x, y])
            senses.append("<=")
    for x in range(k):
        row = np.zeros(nv)
        row[km + m + x * m:km + m + (x + 1) * m] = 1.0
        a_rows.append(row)
        rhs.append(eps)
        senses.append("<=")
    cost = np.zeros(nv)
    cost[km:km + m] = 1.0
    sol = solve_lp(LpProblem(c=cost, a=np.array(a_rows), b=np.array(rhs),
                             senses=tuple(senses)))
    if sol.status != "optimal":
        raise ArithmeticError(f"max-information LP status {sol.status}")
    w_tilde = _clean_rows(sol.x[:km].reshape(k, m))
    zeta = sol.x[km:km + m].copy()
    return SmoothImax(value=float(math.log2(sol.value)), w_tilde=w_tilde,
                      zeta=zeta)


def ns_cost(w, eps: float) -> NsCostResult:
    """Minimal no-signaling simulation cost ceil(2^{I_max^eps})."""
    smooth = i_max_smooth(w, eps)
    return NsCostResult(
        i_max_eps=smooth.value,
        cost=_clamped_ceil(2.0 ** smooth.value),
        w_tilde=smooth.w_tilde,
        zeta=smooth.zeta,
    )


@dataclasses.dataclass(frozen=True)
class NsEpsResult:
    eps: float
    w_tilde: np.ndarray
    zeta: np.ndarray


def ns_eps_for_cost(w, c: int) -> NsEpsResult:
    """Minimal simulation deviation achievable with message alphabet size c.

    Minimizes gamma over W~ row-stochastic, W~(y|x) <= zeta(y), sum zeta = c,
    mu >= W~ - W, sum_y mu(x, y) <= gamma.
    """
    rows = _channel_rows(w)
    if int(c) != c or c < 2:
        raise ValueError("cost must be an integer >= 2")
    c = int(c)
    k, m = rows.shape
    # Variable layout: W~ flat, zeta, mu flat, gamma.
    km = k * m
    nv = 2 * km + m + 1
    a_rows, rhs, senses = [], [], []
    for x in range(k):
        row = np.zeros(nv)
        row[x * m:(x + 1) * m] = 1.0
        a_rows.append(row)
        rhs.append(1.0)
        senses.append("=")
    for x in range(k):
        for y in range(m):
            row = np.zeros(nv)
            row[x * m + y] = 1.0
            row[km + y] = -1.0
            a_rows.append(row)
            rhs.append(0.0)
            senses.append("<=")
            row = np.zeros(nv)
            row[x * m + y] = 1.0
            row[km + m + x * m + y] = -1.0
            a_rows.append(row)
            rhs.append(rows[x, y])
            senses.append("<=")
    for x in range(k):
        row = np.zeros(nv)
        row[km + m + x * m:km + m + (x + 1) * m] = 1.0
        row[-1] = -1.0
        a_rows.append(row)
        rhs.append(0.0)
        senses.append("<=")
    row = np.zeros(nv)
    row[km:km + m] = 1.0
    a_rows.append(row)
    rhs.append(float(c))
    senses.append("=")
    cost = np.zeros(nv)
    cost[-1] = 1.0
    sol = solve_lp(LpProblem(c=cost, a=np.array(a_rows), b=np.array(rhs),
                             senses=tuple(senses)))
    if sol.status != "optimal":
        raise ArithmeticError(f"deviation LP status {sol.status}")
    return NsEpsResult(eps=float(max(sol.value, 0.0)),
                       w_tilde=_clean_rows(sol.x[:km].reshape(k, m)),
                       zeta=sol.x[km:km + m].copy())


def d_s_plus_channel(w, q, eps: float) -> float:
    """sup over inputs p of D_s+^eps(p W || p x q).

    The exceedance probability of the joint log-ratio is linear in p, with
    per-input coefficients given by the rows, so the supremum over the
    simplex is attained at a point mass and a row maximum suffices.
    """
    rows = _channel_rows(w)
    return max(d_s_plus(eps, row, q) for row in rows)


def channel_d_max_smooth(w, q, eps: float) -> float:
    """min over channels W~ with channel-TVD <= eps of max_x D_max(W~(.|x)||q).

    Both the constraint (worst row TVD) and the objective (worst row
    max-divergence) decouple across rows, so the program splits into one
    smoothed max-divergence per row.
    """
    rows = _channel_rows(w)
    return max(d_max_smooth(eps, row, q) for row in rows)


def smoothing_witness(w, q, eps: float):
    """Explicit substitute channel relating spectrum and max divergence.

    With a = max_x D_s+^eps(W(.|x) || q), keep each row on its sub-threshold
    set A_x = {y : log2 W(y|x)/q(y) <= a} (closed, so the threshold atom
    itself is kept) and refill the clipped mass eps_x < eps with q:

        W^(y|x) = W(y|x) 1[y in A_x] + eps_x q(y).

    Every row then satisfies tvd <= eps_x and W^(y|x) <= (2^a + 1) q(y),
    giving max_x D_max(W^(.|x) || q) <= a + 1 for a >= 0.

    Returns (hat_rows, a, eps_x vector).
    """
    rows = _channel_rows(w)
    qa = np.asarray(q, dtype=np.float64)
    a = d_s_plus_channel(rows, qa, eps)
    if math.isinf(a):
        raise ValueError("spectrum threshold is infinite, no witness exists")
    hat = np.zeros_like(rows)
    eps_x = np.zeros(rows.shape[0])
    for x in range(rows.shape[0]):
        row = rows[x]
        keep = np.zeros(row.size, dtype=bool)
        pos = (row > 0.0) & (qa > 0.0)
        keep[pos] = np.log2(row[pos] / qa[pos]) <= a
        keep[(row > 0.0) & (qa == 0.0)] = False
        keep[row == 0.0] = True
        eps_x[x] = float(row[~keep].sum())
        hat[x] = row * keep + eps_x[x] * qa
    return hat, a, eps_x


# ----------------------------------------------------------------------
# Symmetrized programs for BSC tensor powers.
#
# On W = BSC(delta)^{(x) n} permutation symmetry lets the optimum be taken
# constant on each Hamming-weight class: with w_k = (1-delta)^(n-k) delta^k,
# C_k = binom(n, k) and b_k = C_k w_k, the cost form becomes
#
#   minimize 2^n s  s.t.  sum_k u_k = 1,  u_k - v_k <= b_k,
#                         sum_k v_k <= eps,  0 <= u_k <= C_k s,  v >= 0,
#
# in bin totals u_k = C_k r_k, v_k (r_k is the per-string substitute mass).
# Eliminating u gives the closed-form lower envelope
#
#   s* = min{ s : G(s) >= 1 - eps },   G(s) = sum_k C_k min(w_k, s),
#
# which is solved exactly by _bsc_waterfill and used to scale and presolve
# the LP before the simplex sees it.
# ----------------------------------------------------------------------


def _bsc_weights(n: int, delta: float):
    """Class counts C_k, per-string masses w_k and class masses b_k."""
    k = np.arange(n + 1, dtype=np.float64)
    log_w = (n - k) * math.log(1.0 - delta) + k * math.log(delta)
    log_c = np.array([
        math.lgamma(n + 1) - math.lgamma(j + 1) - math.lgamma(n - j + 1)
        for j in range(n + 1)
    ])
    return np.exp(log_c), np.exp(log_w), np.exp(log_c + log_w)


def _bsc_waterfill(n: int, delta: float, eps: float) -> float:
    """Exact closed-form optimum s* of the symmetrized cost program.

    G(s) = sum_k C_k min(w_k, s) is piecewise linear and increasing; s* is
    where it first reaches 1 - eps, found by scanning the distinct w levels.
    """
    c, w, _ = _bsc_weights(n, delta)
    target = 1.0 - eps
    vals, inv = np.unique(w, return_inverse=True)
    c_level = np.zeros(vals.size)
    b_level = np.zeros(vals.size)
    np.add.at(c_level, inv, c)
    np.add.at(b_level, inv, c * w)
    # cap_c[t]: total count of strings with w >= vals[t];
    # tail_b[t]: total mass of strings with w < vals[t].
    cap_c = np.cumsum(c_level[::-1])[::-1]
    tail_b = np.concatenate([[0.0], np.cumsum(b_level)])[:-1]
    g_at = vals * cap_c + tail_b
    if g_at[0] >= target:
        return float(target / c.sum())
    t = int(np.searchsorted(g_at, target))
    if t >= vals.size:
        return float(vals[-1])
    s = vals[t] - (g_at[t] - target) / cap_c[t]
    return float(max(s, vals[t - 1]))


def _bsc_reduction(n: int, delta: float, eps: float):
    """Shared presolve for the symmetrized LPs.

    Returns (kept index array, C, w, b, s_wf, rhs_mass). Three reductions,
    the first two exact, keep every simplex pivot well-scaled:

    * cap rows with C_k s_wf >= _CAP_SLACK and w_k < _CAP_W_FRACTION s_wf
      are never binding: relaxing them changes G(s) only below
      _CAP_W_FRACTION s_wf, where the program is infeasible anyway;
    * bins with b_k < _BULK_PIN and w_k < _CAP_W_FRACTION s_wf sit below
      the water level, so pinning u_k = b_k and folding the mass into the
      right-hand side leaves G identical near the optimum;
    * bins whose total room C_k s_wf falls below _TAIL_PIN are dropped,
      forfeiting at most (n+1) _TAIL_PIN of mass (relative shift in s*
      around 1e-8, far inside every tolerance used downstream; no-op for
      small n where exact agreement with the general LP is asserted).
    """
    c, w, b = _bsc_weights(n, delta)
    s_wf = _bsc_waterfill(n, delta, eps)
    room = c * s_wf
    below = w < _CAP_W_FRACTION * s_wf
    drop_bulk = (b < _BULK_PIN) & below
    drop_tail = room < _TAIL_PIN
    keep = ~(drop_bulk | drop_tail)
    rhs_mass = 1.0 - float(b[drop_bulk].sum())
    capped = keep & ~((room >= _CAP_SLACK) & below)
    return (np.flatnonzero(keep), np.flatnonzero(capped), c, w, b, s_wf,
            rhs_mass, drop_bulk, drop_tail)


@dataclasses.dataclass(frozen=True)
class BscNsCost:
    """Symmetrized-LP simulation cost of BSC(delta)^{(x) n}."""

    n: int
    delta: float
    eps: float
    i_max_eps: float
    log2_cost: float
    cost: int
    s: float
    r: np.ndarray


def _validate_bsc_args(n: int, delta: float) -> None:
    if int(n) != n or n < 1:
        raise ValueError("blocklength must be a positive integer")
    if not 0.0 < delta <= 0.5:
        raise ValueError("crossover must lie in (0, 0.5]")


def bsc_ns_cost(n: int, delta: float, eps: float) -> BscNsCost:
    """No-signaling cost of BSC(delta)^{(x) n} via the symmetrized LP."""
    _validate_bsc_args(n, delta)
    if not 0.0 <= eps < 1.0:
        raise ValueError("eps must lie in [0, 1)")
    (keep, capped, c, w, b, s_wf, rhs_mass, drop_bulk,
     drop_tail) = _bsc_reduction(n, delta, eps)
    kk = keep.size
    pos = {int(k): j for j, k in enumerate(keep)}
    # Variables: u over kept bins, v over kept bins, sigma = s / s_wf.
    nv = 2 * kk + 1
    a_rows, rhs, senses = [], [], []
    row = np.zeros(nv)
    row[:kk] = 1.0
    a_rows.append(row)
    rhs.append(rhs_mass)
    senses.append("=")
    row = np.zeros(nv)
    row[kk:2 * kk] = 1.0
    a_rows.append(row)
    rhs.append(eps)
    senses.append("<=")
    for j, k in enumerate(keep):
        row = np.zeros(nv)
        row[j] = 1.0
        row[kk + j] = -1.0
        a_rows.append(row)
        rhs.append(b[k])
        senses.append("<=")
    for k in capped:
        row = np.zeros(nv)
        row[pos[int(k)]] = 1.0
        row[-1] = -c[k] * s_wf
        a_rows.append(row)
        rhs.append(0.0)
        senses.append("<=")
    cost_vec = np.zeros(nv)
    cost_vec[-1] = 1.0
    sol = solve_lp(LpProblem(c=cost_vec, a=np.array(a_rows), b=np.array(rhs),
                             senses=tuple(senses)))
    if sol.status != "optimal":
        raise ArithmeticError(f"symmetrized cost LP status {sol.status}")
    s = float(sol.x[-1]) * s_wf
    # Per-string substitute masses: LP bins, pinned bulk at w_k, tail at 0.
    r = np.zeros(n + 1)
    r[keep] = sol.x[:kk] / c[keep]
    r[drop_tail] = 0.0
    r[drop_bulk] = w[drop_bulk]
    log2_cost = n + math.log2(s)
    return BscNsCost(
        n=n, delta=delta, eps=eps,
        i_max_eps=log2_cost,
        log2_cost=log2_cost,
        cost=_clamped_ceil(2.0 ** log2_cost) if log2_cost < 62 else int(
            math.ceil(2.0 ** log2_cost)),
        s=s, r=r,
    )


def bsc_ns_eps(n: int, delta: float, c: int) -> float:
    """Minimal deviation for simulating BSC(delta)^{(x) n} at cost c.

    Fixing s = c / 2^n makes the caps constant, so the symmetrized program
    is solved with variable upper bounds instead of coupling rows.
    """
    _validate_bsc_args(n, delta)
    if int(c) != c or c < 2:
        raise ValueError("cost must be an integer >= 2")
    counts, w, b = _bsc_weights(n, delta)
    s = float(c) / float(2.0 ** n) if n < 63 else float(c) * math.pow(2.0, -n)
    room = counts * s
    # Caps far above any feasible bin mass can never bind.
    room = np.minimum(room, 2.0)
    kk = n + 1
    nv = 2 * kk
    a_rows, rhs, senses = [], [], []
    row = np.zeros(nv)
    row[:kk] = 1.0
    a_rows.append(row)
    rhs.append(1.0)
    senses.append("=")
    for j in range(kk):
        row = np.zeros(nv)
        row[j] = 1.0
        row[kk + j] = -1.0
        a_rows.append(row)
        rhs.append(b[j])
        senses.append("<=")
    cost_vec = np.zeros(nv)
    cost_vec[kk:] = 1.0
    upper = np.concatenate([room, np.full(kk, math.inf)])
    sol = solve_lp(LpProblem(c=cost_vec, a=np.array(a_rows), b=np.array(rhs),
                             senses=tuple(senses), upper=upper))
    if sol.status == "infeasible":
        # Total room below one unit of mass: cannot happen for c >= 2
        # because G(1) = 1, but guard the contract anyway.
        raise ArithmeticError("deviation LP infeasible")
    if sol.status != "optimal":
        raise ArithmeticError(f"symmetrized deviation LP status {sol.status}")
    return float(max(sol.value, 0.0))


def bsc_channel(n: int, delta: float) -> Dmc:
    """Dense BSC(delta)^{(x) n} for cross-checking against the general LPs."""
    from .prob import tensor_power

    return tensor_power(Dmc.bsc(delta), n)
