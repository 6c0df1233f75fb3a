"""Capacity, dispersion and finite-blocklength rate expansions.

Everything here feeds the asymptotic side of the simulation-versus-coding
comparison: Blahut-Arimoto traces with a-priori certificates, the channel
dispersion extracted from the capacity-achieving input set, the Gaussian
quantile, and the second-order and moderate-deviation rate formulas. The
unquantified residual terms (O(log n) at second order, o(a_n) in the
moderate regime) are never folded into the returned numbers; callers that
serialize results attach a "band: unquantified" marker instead.
"""

from __future__ import annotations

import dataclasses
import math

import numpy as np

from .divergences import var_div
from .prob import Pmf

_LOG2E = math.log2(math.e)


@dataclasses.dataclass(frozen=True)
class BaTrace:
    """Blahut-Arimoto iterate history with its convergence certificate.

    Each entry of ``iterates`` is (step index, estimate in bits, the input
    pmf the step produced). The estimate at step t is computed from the
    input of step t-1 and is monotonically nondecreasing; the true optimum
    lies in [estimate, estimate + k * log2(num_inputs) / t] at every step.
    """

    iterates: tuple
    k: int
    num_inputs: int

    @property
    def value(self) -> float:
        return self.iterates[-1][1]

    @property
    def final_input(self) -> Pmf:
        return self.iterates[-1][2]

    def bound(self, step: int | None = None) -> float:
        if step is None:
            step = self.iterates[-1][0]
        return self.k * math.log2(self.num_inputs) / step

    @property
    def final_bound(self) -> float:
        return self.bound()


def _drop_dead_letters(rows: np.ndarray, out_sizes: tuple):
    """Remove per-receiver output letters that no input ever produces."""
    cube = rows.reshape((rows.shape[0],) + tuple(out_sizes))
    keeps = []
    for axis, size in enumerate(out_sizes):
        other = tuple(i for i in range(cube.ndim) if i != axis + 1)
        keeps.append(np.flatnonzero(cube.sum(axis=other) > 0.0))
    cube = cube[np.ix_(np.arange(rows.shape[0]), *keeps)]
    sizes = tuple(k.size for k in keeps)
    return cube.reshape(rows.shape[0], -1), sizes


def _row_divergences(rows: np.ndarray, ref: np.ndarray,
                     row_terms: np.ndarray) -> np.ndarray:
    """D(row_x || ref) in bits given precomputed sum_y W log2 W per row."""
    with np.errstate(divide="ignore"):
        log_ref = np.log2(ref)
    cross = np.where(rows > 0.0, rows * log_ref, 0.0).sum(axis=1)
    return row_terms - cross


def _ba_core(rows: np.ndarray, out_sizes: tuple, k: int, max_iter: int,
             tol: float, init) -> BaTrace:
    """Multiplicative-update ascent shared by capacity and the C-tilde runs.

    Update: p <- p * 2^(D(W(.|x) || prod_i p_Yi) / k), normalized; the
    normalizer Z gives the estimate k * log2 Z. Stops when the estimate
    increment drops below tol or the a-priori bound k*log2|X|/t does.
    """
    if tol <= 0.0:
        raise ValueError("tolerance must be positive")
    if max_iter < 1:
        raise ValueError("max_iter must be at least 1")
    rows, out_sizes = _drop_dead_letters(rows, out_sizes)
    kx = rows.shape[0]
    if init is None:
        p = np.full(kx, 1.0 / kx)
    else:
        p = init.probs.copy() if isinstance(init, Pmf) else np.asarray(
            init, dtype=np.float64).copy()
        if p.size != kx or np.any(p <= 0.0):
            raise ValueError("initial input pmf must be strictly positive "
                             "on the full alphabet")
        p /= p.sum()
    with np.errstate(divide="ignore"):
        row_terms = np.where(rows > 0.0, rows * np.log2(
            np.where(rows > 0.0, rows, 1.0)), 0.0).sum(axis=1)
    cube_shape = (kx,) + out_sizes
    iterates = []
    prev = -math.inf
    log_inputs = math.log2(kx) if kx > 1 else 0.0
    for t in range(1, max_iter + 1):
        out = (p @ rows).reshape(out_sizes)
        ref = np.ones(out_sizes)
        for axis in range(len(out_sizes)):
            other = tuple(i for i in range(len(out_sizes)) if i != axis)
            marg = out.sum(axis=other)
            shape = [1] * len(out_sizes)
            shape[axis] = out_sizes[axis]
            ref = ref * marg.reshape(shape)
        d = _row_divergences(rows, ref.reshape(-1), row_terms)
        weights = p * np.exp2(d / k)
        z = weights.sum()
        est = k * math.log2(z)
        p = weights / z
        iterates.append((t, est, Pmf(p)))
        if est - prev < tol or k * log_inputs / t < tol:
            break
        prev = est
    return BaTrace(iterates=tuple(iterates), k=k, num_inputs=kx)


def capacity_ba(w, max_iter: int = 1_000_000, tol: float = 1e-9,
                init=None) -> BaTrace:
    """Channel capacity by Blahut-Arimoto.

    Returns the full trace; the capacity estimate is ``trace.value`` and the
    optimum is certified to lie within ``trace.final_bound`` above it.
    ``init`` defaults to the uniform input and must have full support.
    """
    rows = w.rows if hasattr(w, "rows") else np.asarray(w, dtype=np.float64)
    return _ba_core(rows, (rows.shape[1],), 1, max_iter, tol, init)


@dataclasses.dataclass(frozen=True)
class SecondOrderParams:
    """Capacity and dispersion range of a channel.

    v_min and v_max are the extreme values of the divergence variance over
    the capacity-achieving input set; they differ only when that set is not
    a single point. capacity_achieving_inputs holds the refined, deduplicated
    representatives found within tol_cap of capacity.
    """

    capacity: float
    v_min: float
    v_max: float
    capacity_achieving_inputs: tuple
    tol_cap: float


def _simplex_grid(dim: int, steps: int, limit: int = 2_000_000) -> np.ndarray:
    """All compositions of ``steps`` into ``dim`` parts, scaled to the simplex."""
    count = math.comb(steps + dim - 1, dim - 1)
    if count > limit:
        raise ValueError(
            f"grid of {count} points exceeds the {limit} cap; "
            "pass a coarser grid_resolution")
    out = np.empty((count, dim), dtype=np.float64)
    row = 0

    def fill(prefix, remaining, slot):
        nonlocal row
        if slot == dim - 1:
            out[row, :slot] = prefix
            out[row, slot] = remaining
            row += 1
            return
        for v in range(remaining + 1):
            fill(prefix + [v], remaining - v, slot + 1)

    fill([], steps, 0)
    return out / steps


def _mutual_information_batch(grid: np.ndarray, rows: np.ndarray,
                              row_terms: np.ndarray) -> np.ndarray:
    """I(p; W) for every grid row, via I = sum_x p_x c_x + H(pW)."""
    q = grid @ rows
    with np.errstate(divide="ignore", invalid="ignore"):
        h = -np.where(q > 0.0, q * np.log2(np.where(q > 0.0, q, 1.0)),
                      0.0).sum(axis=1)
    return grid @ row_terms + h


def _divergence_variance(p: np.ndarray, rows: np.ndarray) -> float:
    q = p @ rows
    joint = (p[:, None] * rows).ravel()
    ref = np.outer(p, q).ravel()
    return var_div(joint, ref)


def dispersion(w, grid_resolution: float = 1e-3,
               tol_cap: float = 1e-7) -> SecondOrderParams:
    """Capacity-achieving input set and its dispersion range.

    Grid search over the input simplex followed by multiplicative-update
    refinement of every near-optimal grid point. The candidate slack adds
    twice the grid resolution to tol_cap so optima falling between grid
    points are not missed; refinement then closes the gap. With a
    non-unique optimizer the refined set samples the optimal face rather
    than enumerating it, which is as much as a grid method can promise.
    """
    rows = w.rows if hasattr(w, "rows") else np.asarray(w, dtype=np.float64)
    kx = rows.shape[0]
    if kx > 4:
        raise ValueError("grid dispersion search supports at most 4 inputs")
    if not 0.0 < grid_resolution <= 0.5:
        raise ValueError("grid_resolution must lie in (0, 0.5]")
    steps = max(int(round(1.0 / grid_resolution)), 1)
    grid = _simplex_grid(kx, steps)
    with np.errstate(divide="ignore"):
        row_terms = np.where(rows > 0.0, rows * np.log2(
            np.where(rows > 0.0, rows, 1.0)), 0.0).sum(axis=1)
    scores = _mutual_information_batch(grid, rows, row_terms)
    top = float(scores.max())
    candidate_idx = np.flatnonzero(scores >= top - (tol_cap + 2.0 * grid_resolution))
    # Refining an unbounded candidate list is wasteful on flat optimal
    # faces; keep everything within tol_cap plus the best of the rest.
    tight = candidate_idx[scores[candidate_idx] >= top - tol_cap]
    if candidate_idx.size > 256:
        order = candidate_idx[np.argsort(scores[candidate_idx])[::-1][:256]]
        candidate_idx = np.union1d(order, tight)
    # Two refinement stages: a batched loose pass first, because most
    # candidates collapse onto the same optimizer and polishing each of
    # them separately to full precision is pure waste; only the distinct
    # survivors get polished. The batch update is the same multiplicative
    # ascent as _ba_core, vectorized over candidates. A reference entry of
    # zero can only sit under an all-zero channel column, so log2(1) there
    # is exact, not a fudge.
    batch = np.maximum(grid[candidate_idx], 1e-12)
    batch /= batch.sum(axis=1, keepdims=True)
    for _ in range(50_000):
        out = batch @ rows
        log_out = np.log2(np.where(out > 0.0, out, 1.0))
        gains = np.exp2(row_terms[None, :] - log_out @ rows.T)
        weights = batch * gains
        stepped = weights / weights.sum(axis=1, keepdims=True)
        moved = float(np.max(np.abs(stepped - batch)))
        batch = stepped
        if moved <= 1e-10:
            break
    survivors = []
    for p in batch:
        if not any(np.max(np.abs(p - q)) <= 1e-6 for q in survivors):
            survivors.append(p)
    refined = []
    for p in survivors:
        trace = _ba_core(rows, (rows.shape[1],), 1, 5000, 3e-15, p)
        out = trace.final_input.probs
        refined.append((float(_mutual_information_batch(
            out[None, :], rows, row_terms)[0]), out))
    capacity = max(score for score, _ in refined)
    kept = []
    for score, p in refined:
        if score < capacity - tol_cap:
            continue
        if any(np.max(np.abs(p - q)) <= 1e-6 for q in kept):
            continue
        kept.append(p)
    variances = [_divergence_variance(p, rows) for p in kept]
    return SecondOrderParams(
        capacity=capacity,
        v_min=min(variances),
        v_max=max(variances),
        capacity_achieving_inputs=tuple(Pmf(p) for p in kept),
        tol_cap=tol_cap,
    )


def normal_cdf(x: float) -> float:
    """Standard normal CDF via the error function."""
    return 0.5 * (1.0 + math.erf(x / math.sqrt(2.0)))


# Rational minimax coefficients for the initial quantile guess
# (relative error below 1.2e-9 on its own, then polished by Newton).
_QA = (-3.969683028665376e+01, 2.209460984245205e+02,
       -2.759285104469687e+02, 1.383577518672690e+02,
       -3.066479806614716e+01, 2.506628277459239e+00)
_QB = (-5.447609879822406e+01, 1.615858368580409e+02,
       -1.556989798598866e+02, 6.680131188771972e+01,
       -1.328068155288572e+01)
_QC = (-7.784894002430293e-03, -3.223964580411365e-01,
       -2.400758277161838e+00, -2.549732539343734e+00,
       4.374664141464968e+00, 2.938163982698783e+00)
_QD = (7.784695709041462e-03, 3.224671290700398e-01,
       2.445134137142996e+00, 3.754408661907416e+00)


def _quantile_guess(p: float) -> float:
    if p < 0.02425:
        q = math.sqrt(-2.0 * math.log(p))
        return ((((((_QC[0] * q + _QC[1]) * q + _QC[2]) * q + _QC[3]) * q
                  + _QC[4]) * q + _QC[5])
                / ((((_QD[0] * q + _QD[1]) * q + _QD[2]) * q + _QD[3]) * q
                   + 1.0))
    if p > 1.0 - 0.02425:
        return -_quantile_guess(1.0 - p)
    q = p - 0.5
    r = q * q
    return ((((((_QA[0] * r + _QA[1]) * r + _QA[2]) * r + _QA[3]) * r
              + _QA[4]) * r + _QA[5]) * q
            / (((((_QB[0] * r + _QB[1]) * r + _QB[2]) * r + _QB[3]) * r
                + _QB[4]) * r + 1.0))


def inv_normal_cdf(eps: float) -> float:
    """Standard normal quantile, safeguarded Newton to ~1e-12 absolute."""
    if not 0.0 < eps < 1.0:
        raise ValueError("quantile argument must lie strictly in (0, 1)")
    x = _quantile_guess(eps)
    lo, hi = x - 1e-6, x + 1e-6
    while normal_cdf(lo) > eps:
        lo -= 0.1
    while normal_cdf(hi) < eps:
        hi += 0.1
    for _ in range(60):
        f = normal_cdf(x) - eps
        if f > 0.0:
            hi = min(hi, x)
        elif f < 0.0:
            lo = max(lo, x)
        density = math.exp(-0.5 * x * x) / math.sqrt(2.0 * math.pi)
        step = f / density if density > 0.0 else 0.0
        nxt = x - step
        if not lo <= nxt <= hi:
            nxt = 0.5 * (lo + hi)
        if abs(nxt - x) < 1e-13 and abs(f) < 1e-13:
            return nxt
        x = nxt
    return x


def _v_at(params: SecondOrderParams, level: float) -> float:
    return params.v_min if level < 0.5 else params.v_max


def second_order_coding(params: SecondOrderParams, n: int,
                        eps: float) -> float:
    """Gaussian-approximation log code size n C + sqrt(n V_eps) * quantile.

    The O(log n) residual is not included; serializers mark the value with
    an unquantified band instead.
    """
    if n < 1:
        raise ValueError("blocklength must be at least 1")
    if not 0.0 < eps < 1.0:
        raise ValueError("eps must lie strictly in (0, 1)")
    v = _v_at(params, eps)
    return n * params.capacity + math.sqrt(n * v) * inv_normal_cdf(eps)


def second_order_simulation(params: SecondOrderParams, n: int,
                            eps: float) -> float:
    """Gaussian-approximation log simulation cost.

    Same shape as the coding expansion but evaluated at 1 - eps, so for
    eps < 1/2 the Gaussian term is positive and scales with v_max: paying
    above capacity is the price of a faithful simulation, where coding
    gets to undershoot.
    """
    if n < 1:
        raise ValueError("blocklength must be at least 1")
    if not 0.0 < eps < 1.0:
        raise ValueError("eps must lie strictly in (0, 1)")
    level = 1.0 - eps
    v = _v_at(params, level)
    return n * params.capacity + math.sqrt(n * v) * inv_normal_cdf(level)


@dataclasses.dataclass(frozen=True)
class ModerateRates:
    """First-order rates in the moderate-deviation regime eps_n = 2^(-n a_n^2).

    The o(a_n) residual is excluded, recorded by the band marker.
    """

    a_n: float
    eps_n: float
    simulation_at_eps: float
    simulation_at_complement: float
    coding_at_eps: float
    coding_at_complement: float
    band: str = "unquantified"


def moderate_deviation_rates(params: SecondOrderParams, n: int,
                             a_n: float | None = None) -> ModerateRates:
    """Simulation and coding rates at deviation eps_n and 1 - eps_n.

    Vanishing error makes simulation expensive and coding cheap, so the
    eps_n pair is (C + sqrt(2 v_max) a_n, C - sqrt(2 v_min) a_n); the
    complement pair swaps roles. Default sequence a_n = n^(-1/3).
    """
    if n < 1:
        raise ValueError("blocklength must be at least 1")
    if a_n is None:
        a_n = float(n) ** (-1.0 / 3.0)
    if a_n <= 0.0:
        raise ValueError("a_n must be positive")
    up = math.sqrt(2.0 * params.v_max) * a_n
    down = math.sqrt(2.0 * params.v_min) * a_n
    c = params.capacity
    return ModerateRates(
        a_n=a_n,
        eps_n=2.0 ** (-n * a_n * a_n),
        simulation_at_eps=c + up,
        simulation_at_complement=c - down,
        coding_at_eps=c - down,
        coding_at_complement=c + up,
    )


def cs_cc_bracket(log_n_low: float, log_n_high: float,
                  delta: float) -> tuple:
    """Bracket on log simulation cost from two coding log sizes.

    Given log N* at error 1 - eps - delta (low) and 1 - eps + delta (high),
    the simulation cost at error eps satisfies

        log_n_low + log2(delta) <= log M* <= log_n_high + log2(2/delta)
                                             + log2(log2(4/delta^2)).
    """
    if not 0.0 < delta < 1.0:
        raise ValueError("delta must lie strictly in (0, 1)")
    lower = log_n_low + math.log2(delta)
    upper = (log_n_high + math.log2(2.0 / delta)
             + math.log2(math.log2(4.0 / (delta * delta))))
    return lower, upper
