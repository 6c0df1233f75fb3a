"""Divergences between finite distributions, plus smoothed and spectral forms.

Everything is measured in bits. Functions take raw mass vectors (anything
``np.asarray`` accepts) so that joint distributions can be passed flattened;
wrap ``Pmf.probs`` at call sites. Where a quantity diverges because absolute
continuity fails, the functions return ``math.inf`` rather than raising,
except ``var_div`` whose variance is undefined without a finite mean.

The hypothesis-testing quantity ``beta_star`` is evaluated exactly by subset
enumeration. A likelihood-ratio prefix is optimal only for randomized tests;
over deterministic test sets it can miss the minimum (take p = (.09, .9, .01)
against q = (.01, .98, .01) at eps = 0.2: every ratio prefix reaching mass
0.8 costs q-mass 1.0 while the singleton {1} costs 0.98), so no greedy
shortcut is offered.
"""

from __future__ import annotations

import math

import numpy as np

from .lp import LpProblem, solve_lp

_MASS_TOL = 1e-9

# Effective support cap for beta_star's subset enumeration (2^20 subset sums).
_ENUM_LIMIT = 20


def _as_pmf_pair(p, q):
    pa = np.asarray(p, dtype=np.float64).reshape(-1)
    qa = np.asarray(q, dtype=np.float64).reshape(-1)
    if pa.size != qa.size or pa.size == 0:
        raise ValueError("distributions must share a nonempty alphabet")
    for name, vec in (("p", pa), ("q", qa)):
        if np.any(vec < 0.0) or not np.all(np.isfinite(vec)):
            raise ValueError(f"{name} must be finite and nonnegative")
        if abs(float(vec.sum()) - 1.0) > _MASS_TOL:
            raise ValueError(f"{name} must sum to 1 within {_MASS_TOL}")
    return pa, qa


def kl(p, q) -> float:
    """Relative entropy sum p log2(p/q); +inf if p is not dominated by q."""
    pa, qa = _as_pmf_pair(p, q)
    on = pa > 0.0
    if np.any(qa[on] == 0.0):
        return math.inf
    return float((pa[on] * np.log2(pa[on] / qa[on])).sum())


def var_div(p, q) -> float:
    """Variance of the log-ratio, sum p (log2(p/q) - kl)^2, in bits^2."""
    pa, qa = _as_pmf_pair(p, q)
    on = pa > 0.0
    if np.any(qa[on] == 0.0):
        raise ValueError("variance undefined: p has mass outside supp(q)")
    logs = np.log2(pa[on] / qa[on])
    mean = float((pa[on] * logs).sum())
    return float((pa[on] * (logs - mean) ** 2).sum())


def d_max(p, q) -> float:
    """Max-divergence max over supp(p) of log2(p/q)."""
    pa, qa = _as_pmf_pair(p, q)
    on = pa > 0.0
    if np.any(qa[on] == 0.0):
        return math.inf
    return float(np.log2(pa[on] / qa[on]).max())


def beta_star(eps: float, p, q) -> float:
    """Least q-mass of a subset A with p(A) >= 1 - eps, exactly.

    Symbols with p = 0 never help, and symbols with q = 0 are free, so the
    enumeration only runs over the symbols charged by both distributions;
    alphabets whose charged part exceeds 20 symbols are rejected.
    """
    pa, qa = _as_pmf_pair(p, q)
    if not 0.0 <= eps < 1.0:
        raise ValueError("eps must lie in [0, 1)")
    free = (qa == 0.0) & (pa > 0.0)
    required = (1.0 - eps) - float(pa[free].sum())
    if required <= 1e-12:
        return 0.0
    charged = (pa > 0.0) & (qa > 0.0)
    pc, qc = pa[charged], qa[charged]
    if pc.size > _ENUM_LIMIT:
        raise ValueError(
            f"beta_star enumerates subsets of the charged support, "
            f"capped at {_ENUM_LIMIT} symbols; got {pc.size}"
        )
    p_sums = np.zeros(1)
    q_sums = np.zeros(1)
    for i in range(pc.size):
        p_sums = np.concatenate([p_sums, p_sums + pc[i]])
        q_sums = np.concatenate([q_sums, q_sums + qc[i]])
    feasible = p_sums >= required - 1e-12
    if not feasible.any():
        # Total charged p-mass falls short of the requirement, which cannot
        # happen for valid pmfs (the full set always qualifies).
        return math.inf
    return float(q_sums[feasible].min())


def d_h(eps: float, p, q) -> float:
    """Hypothesis-testing divergence -log2 beta_star; +inf when beta_star = 0."""
    beta = beta_star(eps, p, q)
    if beta <= 0.0:
        return math.inf
    return -math.log2(beta)


def d_s_plus(eps: float, p, q) -> float:
    """Spectrum divergence inf{a >= 0 : Pr_p[log2 p/q > a] < eps}.

    The exceedance probability is a right-continuous step function of a, so
    the infimum is attained at a log-ratio atom (or at the clamp point 0) and
    a scan over the distinct atoms suffices. When the p-mass outside supp(q)
    already reaches eps no threshold works and the value is +inf.
    """
    pa, qa = _as_pmf_pair(p, q)
    if eps < 0.0:
        raise ValueError("eps must be nonnegative")
    if eps == 0.0:
        return math.inf
    on = pa > 0.0
    null_mass = float(pa[on & (qa == 0.0)].sum())
    if null_mass >= eps:
        return math.inf
    both = on & (qa > 0.0)
    if not both.any():
        return 0.0
    ratios = np.log2(pa[both] / qa[both])
    vals, inv = np.unique(ratios, return_inverse=True)
    masses = np.zeros(vals.size)
    np.add.at(masses, inv, pa[both])
    # exceed[i] = p-mass with log-ratio strictly above vals[i], plus the
    # q-null mass that exceeds every finite threshold.
    above = np.concatenate([np.cumsum(masses[::-1])[::-1][1:], [0.0]])
    exceed = above + null_mass
    if null_mass + float(masses.sum()) < eps:
        return 0.0
    idx = np.flatnonzero(exceed < eps)
    return float(max(vals[idx[0]], 0.0))


def d_max_smooth(eps: float, p, q) -> float:
    """Smoothed max-divergence via a linear program.

    Minimizes m over substitutes p' with 0 <= p' <= m q, sum p' = 1 and
    tvd(p', p) <= eps, the last written with one-sided slacks mu >= p' - p,
    sum mu <= eps. Returns log2 of the optimum. When every eps-ball member
    keeps mass outside supp(q) there is no feasible substitute and the
    value is +inf.
    """
    pa, qa = _as_pmf_pair(p, q)
    if not 0.0 <= eps < 1.0:
        raise ValueError("eps must lie in [0, 1)")
    n = pa.size
    # Variables: p' (n), mu (n), m.
    nv = 2 * n + 1
    rows, rhs, senses = [], [], []
    row = np.zeros(nv)
    row[:n] = 1.0
    rows.append(row)
    rhs.append(1.0)
    senses.append("=")
    for i in range(n):
        row = np.zeros(nv)
        row[i] = 1.0
        row[-1] = -qa[i]
        rows.append(row)
        rhs.append(0.0)
        senses.append("<=")
        row = np.zeros(nv)
        row[i] = 1.0
        row[n + i] = -1.0
        rows.append(row)
        rhs.append(pa[i])
        senses.append("<=")
    row = np.zeros(nv)
    row[n:2 * n] = 1.0
    rows.append(row)
    rhs.append(eps)
    senses.append("<=")
    cost = np.zeros(nv)
    cost[-1] = 1.0
    sol = solve_lp(LpProblem(c=cost, a=np.array(rows), b=np.array(rhs),
                             senses=tuple(senses)))
    if sol.status == "infeasible":
        return math.inf
    if sol.status != "optimal":
        raise ArithmeticError(f"smoothing LP ended with status {sol.status}")
    return float(math.log2(max(sol.x[-1], 1.0)))
