"""Executable one-shot simulation protocols and their exact verifiers.

Three protocol families live here. Rejection sampling turns a reference
pmf and a round budget into an approximate sampler for a target pmf, with
the residual error known in closed form. The sender-side achievability
construction sizes the message alphabet needed to simulate a channel
within a TVD budget. The two-receiver broadcast protocol distributes
correlated indices into shared reference lists; its induced channel is
computed exactly by two independent routes (a literal per-atom enumeration
and a vectorized scatter) so one can certify the other.

Every Monte Carlo path draws from RngStream, a fixed xorshift-class
generator, so runs are bit-reproducible from the seed alone. Trials are
partitioned into fixed-size chunks with per-chunk derived substreams;
CHANNELSIM_THREADS only controls how many chunks run concurrently and
never changes the output.
"""

from __future__ import annotations

import concurrent.futures
import dataclasses
import itertools
import math
import os

import numpy as np

from .divergences import d_max, d_s_plus
from .ns_meta import i_max_smooth
from .prob import BroadcastDmc, Pmf, channel_tvd, tvd

_MASK64 = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15
_CHUNK = 1 << 16


def _splitmix(z: int) -> int:
    z = (z + _GOLDEN) & _MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return z ^ (z >> 31)


class RngStream:
    """Deterministic xorshift64-star generator.

    The seed is scrambled through a splitmix round so that nearby seeds
    give unrelated streams. ``counter`` records how many raw 64-bit words
    have been drawn. Identical seeds always reproduce identical sequences;
    ``spawn`` derives an independent child stream from (seed, index).
    """

    def __init__(self, seed: int):
        self.seed = int(seed) & _MASK64
        self._state = _splitmix(self.seed)
        if self._state == 0:
            self._state = _GOLDEN
        self.counter = 0

    def next_uint64(self) -> int:
        x = self._state
        x ^= (x >> 12)
        x = (x ^ (x << 25)) & _MASK64
        x ^= (x >> 27)
        self._state = x
        self.counter += 1
        return (x * 0x2545F4914F6CDD1D) & _MASK64

    def uniform(self) -> float:
        """Uniform double in [0, 1) with 53 random bits."""
        return (self.next_uint64() >> 11) * (2.0 ** -53)

    def pick(self, cumulative) -> int:
        """Index sample given an inclusive cumulative mass sequence."""
        idx = int(np.searchsorted(cumulative, self.uniform(), side="right"))
        return min(idx, len(cumulative) - 1)

    def spawn(self, index: int) -> "RngStream":
        child = _splitmix(self.seed ^ ((index + 1) * _GOLDEN & _MASK64))
        return RngStream(child)


def _thread_count() -> int:
    raw = os.environ.get("CHANNELSIM_THREADS", "1")
    try:
        return max(int(raw), 1)
    except ValueError:
        return 1


def _run_chunked(total: int, stream: RngStream, work):
    """Apply work(substream, chunk_trials) over fixed-size trial chunks.

    The chunk layout depends only on ``total``, and each chunk's stream
    only on the root seed and chunk index, so results are independent of
    the worker count.
    """
    chunks = [(i, min(_CHUNK, total - i * _CHUNK))
              for i in range((total + _CHUNK - 1) // _CHUNK)]
    threads = _thread_count()
    if threads == 1 or len(chunks) == 1:
        return [work(stream.spawn(i), n) for i, n in chunks]
    with concurrent.futures.ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(lambda c: work(stream.spawn(c[0]), c[1]),
                             chunks))


@dataclasses.dataclass(frozen=True)
class RejectionPlan:
    """Accept-reject sampler description for target p against reference q.

    lam = 2^(-D_max(p || q)) is the acceptance scale; lam * p(y) / q(y)
    never exceeds 1, entries above it by at most 1e-12 of rounding are
    clamped. accept holds those per-symbol acceptance probabilities.
    """

    p: Pmf
    q: Pmf
    m: int
    lam: float
    accept: np.ndarray

    @classmethod
    def build(cls, p: Pmf, q: Pmf, m: int) -> "RejectionPlan":
        if m < 1 or int(m) != m:
            raise ValueError("round budget must be a positive integer")
        if p.size != q.size:
            raise ValueError("target and reference sizes differ")
        div = d_max(p.probs, q.probs)
        if math.isinf(div):
            raise ValueError("target is not absolutely continuous with "
                             "respect to the reference")
        lam = 2.0 ** (-div)
        with np.errstate(divide="ignore", invalid="ignore"):
            ratio = np.where(q.probs > 0.0, lam * p.probs / np.where(
                q.probs > 0.0, q.probs, 1.0), 0.0)
        if np.any(ratio > 1.0 + 1e-12):
            raise ValueError("acceptance ratio exceeds 1 beyond rounding")
        return cls(p=p, q=q, m=int(m), lam=lam,
                   accept=np.minimum(ratio, 1.0))


def rejection_exact_marginal(plan: RejectionPlan):
    """Closed-form output law and failure probability of the plan.

    All M rounds rejecting leaves the last reference draw as the output,
    so the marginal is a mixture of the target and the tilted remainder
    (q - lam p) / (1 - lam), weighted by the reject probability
    (1 - lam)^M.
    """
    rho = (1.0 - plan.lam) ** plan.m
    if plan.lam >= 1.0:
        return plan.p, 0.0
    residual = (plan.q.probs - plan.lam * plan.p.probs) / (1.0 - plan.lam)
    mixed = (1.0 - rho) * plan.p.probs + rho * np.maximum(residual, 0.0)
    return Pmf.normalized(mixed), float(rho)


@dataclasses.dataclass(frozen=True)
class RejectionRun:
    """Empirical output of a batch of accept-reject executions."""

    empirical: Pmf
    accept_counts: np.ndarray
    rejects: int
    trials: int


def rejection_sample_run(plan: RejectionPlan, stream: RngStream,
                         trials: int) -> RejectionRun:
    """Run the sequential accept-reject loop for a batch of trials.

    Each trial draws up to M reference samples; the decision variable is
    drawn on the final round too, even though the output is the last
    sample either way. accept_counts[j-1] counts trials accepted in
    round j.
    """
    if trials < 1:
        raise ValueError("trials must be at least 1")
    cum = np.cumsum(plan.q.probs)
    accept = plan.accept
    m = plan.m

    def work(sub: RngStream, count: int):
        out = np.zeros(plan.q.size, dtype=np.int64)
        acc = np.zeros(m, dtype=np.int64)
        rej = 0
        for _ in range(count):
            for j in range(1, m + 1):
                y = sub.pick(cum)
                u = sub.uniform()
                if u <= accept[y]:
                    acc[j - 1] += 1
                    break
                if j == m:
                    rej += 1
            out[y] += 1
        return out, acc, rej

    parts = _run_chunked(trials, stream, work)
    out = sum(p[0] for p in parts)
    acc = sum(p[1] for p in parts)
    rej = sum(p[2] for p in parts)
    return RejectionRun(empirical=Pmf.normalized(out.astype(np.float64)),
                        accept_counts=acc, rejects=int(rej), trials=trials)


def achievability_size(w, eps: float, delta: float):
    """Message alphabet size sufficient for one-shot channel simulation.

    Splits the budget as eps = (eps - delta) + delta: the smoothed
    max-information witness W~ sits within eps - delta of W, and M
    rejection rounds against the witness reference q* leave at most delta
    of residual per row. Returns (M, bound) with the analytic size bound
    log2 M <= I_max^(eps - delta) + log2 log2(1/delta) + 1; the bound is
    meaningful for delta <= 1/2.
    """
    if not 0.0 < delta <= eps < 1.0:
        raise ValueError("need 0 < delta <= eps < 1")
    smooth = i_max_smooth(w, eps - delta)
    q_star = smooth.zeta / smooth.zeta.sum()
    lam_min = min(2.0 ** (-d_max(row, q_star)) for row in smooth.w_tilde)
    if lam_min >= 1.0:
        m = 1
    else:
        guess = max(int(math.ceil(math.log(delta) / math.log(1.0 - lam_min))),
                    1)
        m = guess
        while m > 1 and (1.0 - lam_min) ** (m - 1) <= delta:
            m -= 1
        while (1.0 - lam_min) ** m > delta:
            m += 1
    bound = smooth.value + math.log2(math.log2(1.0 / delta)) + 1.0
    return m, bound


@dataclasses.dataclass(frozen=True)
class ConvexSplitParams:
    """Budget split (eps_i, delta_i) for the two-receiver convex split."""

    eps1: float
    eps2: float
    eps3: float
    delta1: float
    delta2: float
    delta3: float

    @property
    def delta_norm(self) -> float:
        return math.sqrt(self.delta1 ** 2 + self.delta2 ** 2
                         + self.delta3 ** 2)

    @property
    def bound(self) -> float:
        return self.eps1 + self.eps2 + self.eps3 + self.delta_norm


@dataclasses.dataclass(frozen=True)
class ConvexSplitReport:
    tvd: float
    bound: float
    hypotheses_hold: bool
    thresholds: tuple


def convex_split_mixture(joint_xyz: np.ndarray, q: np.ndarray,
                         r: np.ndarray, m: int, n: int,
                         cap: int = 1 << 20) -> np.ndarray:
    """Uniform position mixture over (X, Y_1..Y_M, Z_1..Z_N).

    Component (j, k) plants the correlated pair at positions (j, k) and
    fills every other slot with the reference; summing with uniform
    weights gives the tensor whose distance to the full product the
    convex split lemma controls.
    """
    kx, sy, sz = joint_xyz.shape
    atoms = kx * sy ** m * sz ** n
    if atoms > cap:
        raise ValueError(f"state space of {atoms} atoms exceeds cap {cap}")
    letters = "abcdefghijklmnopqrstuvwxyz"
    x_l = letters[0]
    y_ls = letters[1:1 + m]
    z_ls = letters[1 + m:1 + m + n]
    out_sub = x_l + y_ls + z_ls
    total = np.zeros((kx,) + (sy,) * m + (sz,) * n)
    for j in range(m):
        for k in range(n):
            operands = [joint_xyz]
            subs = [x_l + y_ls[j] + z_ls[k]]
            for i in range(m):
                if i != j:
                    operands.append(q)
                    subs.append(y_ls[i])
            for ell in range(n):
                if ell != k:
                    operands.append(r)
                    subs.append(z_ls[ell])
            total += np.einsum(",".join(subs) + "->" + out_sub, *operands)
    return total / (m * n)


def convex_split_check(joint, q: Pmf, r: Pmf, m: int, n: int,
                       eps_params, cap: int = 1 << 20) -> ConvexSplitReport:
    """Exact TVD of the convex-split mixture against its certified bound.

    eps_params is a ConvexSplitParams (or a 6-sequence in the same order).
    The report's bound is eps_1 + eps_2 + eps_3 + sqrt(sum delta_i^2);
    hypotheses_hold records whether (M, N) and the parameters satisfy the
    lemma's gates, in which case tvd <= bound is guaranteed. A violated
    hypothesis is reported, not raised.
    """
    if not isinstance(eps_params, ConvexSplitParams):
        eps_params = ConvexSplitParams(*eps_params)
    sizes = tuple(joint.factor_sizes)
    if len(sizes) != 3:
        raise ValueError("joint must have factors (X, Y, Z)")
    if q.size != sizes[1] or r.size != sizes[2]:
        raise ValueError("reference sizes do not match the joint factors")
    cube = joint.probs.reshape(sizes)
    p_x = cube.sum(axis=(1, 2))
    p_xy = cube.sum(axis=2)
    p_xz = cube.sum(axis=1)
    t1 = d_s_plus(eps_params.eps1, p_xy.reshape(-1),
                  np.outer(p_x, q.probs).reshape(-1))
    t2 = d_s_plus(eps_params.eps2, p_xz.reshape(-1),
                  np.outer(p_x, r.probs).reshape(-1))
    ref3 = np.einsum("a,b,c->abc", p_x, q.probs, r.probs)
    t3 = d_s_plus(eps_params.eps3, cube.reshape(-1), ref3.reshape(-1))
    params_ok = (
        all(0.0 < v < 1.0 for v in (eps_params.eps1, eps_params.eps2,
                                    eps_params.eps3, eps_params.delta1,
                                    eps_params.delta2, eps_params.delta3))
        and eps_params.bound < 1.0)
    slack = 1e-12
    sizes_ok = (
        math.log2(m) >= t1 - math.log2(eps_params.delta1 ** 2) - slack
        and math.log2(n) >= t2 - math.log2(eps_params.delta2 ** 2) - slack
        and math.log2(m) + math.log2(n)
        >= t3 - math.log2(eps_params.delta3 ** 2) - slack)
    mixture = convex_split_mixture(cube, q.probs, r.probs, m, n, cap=cap)
    product = p_x
    for _ in range(m):
        product = np.multiply.outer(product, q.probs)
    for _ in range(n):
        product = np.multiply.outer(product, r.probs)
    exact = 0.5 * float(np.abs(mixture - product).sum())
    return ConvexSplitReport(tvd=exact, bound=eps_params.bound,
                             hypotheses_hold=bool(params_ok and sizes_ok),
                             thresholds=(t1, t2, t3))


def _string_atoms(size: int, length: int) -> np.ndarray:
    """All strings of the given length as digit rows, shape (size^len, len)."""
    atoms = np.array(list(itertools.product(range(size), repeat=length)),
                     dtype=np.intp)
    return atoms.reshape(size ** length, length)


def induced_channel_literal(w: BroadcastDmc, q: Pmf, r: Pmf, m: int, n: int,
                            cap: int = 1 << 20) -> np.ndarray:
    """Protocol-induced channel by direct per-atom enumeration.

    Follows the protocol definition symbol by symbol: for every shared
    string pair, the index posterior is assembled from the literal
    products prod_{i != j} q(y_i) prod_{l != k} r(z_l), normalized, and
    accumulated with the string probability. Kept deliberately naive as
    the reference route; induced_channel_scatter is the fast one.
    """
    sy, sz = w.output_sizes
    if sy ** m * sz ** n * w.input_size > cap:
        raise ValueError("state space exceeds the enumeration cap")
    rows3 = w.rows.reshape(w.input_size, sy, sz)
    qv, rv = q.probs, r.probs
    out = np.zeros((w.input_size, sy * sz))
    for x in range(w.input_size):
        wx = rows3[x]
        for ys in itertools.product(range(sy), repeat=m):
            for zs in itertools.product(range(sz), repeat=n):
                weight = 1.0
                for y in ys:
                    weight *= qv[y]
                for z in zs:
                    weight *= rv[z]
                if weight == 0.0:
                    continue
                nums = np.empty((m, n))
                for j in range(m):
                    for k in range(n):
                        term = wx[ys[j], zs[k]]
                        for i in range(m):
                            if i != j:
                                term *= qv[ys[i]]
                        for ell in range(n):
                            if ell != k:
                                term *= rv[zs[ell]]
                        nums[j, k] = term
                denom = nums.sum()
                if denom <= 0.0:
                    post = np.full((m, n), 1.0 / (m * n))
                else:
                    post = nums / denom
                for j in range(m):
                    for k in range(n):
                        out[x, ys[j] * sz + zs[k]] += weight * post[j, k]
    # Each row sums to the total string mass, exactly 1 in exact
    # arithmetic; divide out the float drift so strict pmf checks pass.
    return out / out.sum(axis=1, keepdims=True)


def induced_channel_scatter(w: BroadcastDmc, q: Pmf, r: Pmf, m: int, n: int,
                            cap: int = 1 << 20) -> np.ndarray:
    """Protocol-induced channel, vectorized.

    Shares no intermediate algebra with the literal route: numerators are
    reduced to W(y_j, z_k | x) / (q(y_j) r(z_k)) after factoring out the
    full string probability, and the accumulation runs as one scatter-add
    over precomputed digit arrays.
    """
    sy, sz = w.output_sizes
    if sy ** m * sz ** n * w.input_size > cap:
        raise ValueError("state space exceeds the enumeration cap")
    if np.any(q.probs <= 0.0) or np.any(r.probs <= 0.0):
        raise ValueError("references must have full support")
    rows3 = w.rows.reshape(w.input_size, sy, sz)
    y_atoms = _string_atoms(sy, m)
    z_atoms = _string_atoms(sz, n)
    qy = np.prod(q.probs[y_atoms], axis=1)
    rz = np.prod(r.probs[z_atoms], axis=1)
    inv_q = 1.0 / q.probs[y_atoms]
    inv_r = 1.0 / r.probs[z_atoms]
    # Flat output cell y_j * sz + z_k per (y-atom, z-atom, j, k).
    cell = (y_atoms[:, None, :, None] * sz
            + z_atoms[None, :, None, :]).reshape(-1)
    out = np.zeros((w.input_size, sy * sz))
    for x in range(w.input_size):
        ratio = rows3[x][y_atoms[:, None, :, None],
                         z_atoms[None, :, None, :]]
        ratio = ratio * inv_q[:, None, :, None] * inv_r[None, :, None, :]
        denom = ratio.sum(axis=(2, 3))
        safe = denom > 0.0
        post = np.where(safe[:, :, None, None],
                        ratio / np.where(safe, denom, 1.0)[:, :, None, None],
                        1.0 / (m * n))
        weight = (qy[:, None] * rz[None, :])[:, :, None, None]
        np.add.at(out[x], cell, (weight * post).reshape(-1))
    return out / out.sum(axis=1, keepdims=True)


@dataclasses.dataclass(frozen=True)
class BroadcastRun:
    empirical: BroadcastDmc
    exact: BroadcastDmc
    worst_tvd: float


def broadcast_protocol_run(w: BroadcastDmc, q: Pmf, r: Pmf, m: int, n: int,
                           stream: RngStream, trials: int,
                           cap: int = 1 << 20) -> BroadcastRun:
    """Run the two-receiver index protocol and compare against the target.

    Per trial and input x: draw the shared lists, draw (J, K) from the
    index posterior, record (Y_J, Z_K). The exact induced channel comes
    from the vectorized enumeration; worst_tvd measures it against w. A
    posterior can degenerate to all-zero numerators when a sparse row
    misses every drawn list entry; the protocol then falls back to a
    uniform index pair, matching the exact computation.
    """
    if w.num_receivers != 2:
        raise ValueError("protocol is defined for exactly 2 receivers")
    if trials < 1:
        raise ValueError("trials must be at least 1")
    if np.any(q.probs <= 0.0) or np.any(r.probs <= 0.0):
        raise ValueError("references must have full support")
    sy, sz = w.output_sizes
    rows3 = w.rows.reshape(w.input_size, sy, sz)
    exact = induced_channel_scatter(w, q, r, m, n, cap=cap)
    cum_q = np.cumsum(q.probs)
    cum_r = np.cumsum(r.probs)

    def work(sub: RngStream, count: int):
        counts = np.zeros((w.input_size, sy * sz), dtype=np.int64)
        for _ in range(count):
            ys = [sub.pick(cum_q) for _ in range(m)]
            zs = [sub.pick(cum_r) for _ in range(n)]
            inv_qy = 1.0 / q.probs[ys]
            inv_rz = 1.0 / r.probs[zs]
            for x in range(w.input_size):
                nums = (rows3[x][np.ix_(ys, zs)]
                        * inv_qy[:, None] * inv_rz[None, :]).reshape(-1)
                total = nums.sum()
                if total <= 0.0:
                    nums = np.full(m * n, 1.0 / (m * n))
                    total = 1.0
                jk = sub.pick(np.cumsum(nums / total))
                j, k = divmod(jk, n)
                counts[x, ys[j] * sz + zs[k]] += 1
        return counts

    parts = _run_chunked(trials, stream, work)
    counts = sum(parts)
    empirical = BroadcastDmc(rows=counts.astype(np.float64) / trials,
                             output_sizes=(sy, sz))
    exact_dmc = BroadcastDmc(rows=exact, output_sizes=(sy, sz))
    return BroadcastRun(empirical=empirical, exact=exact_dmc,
                        worst_tvd=channel_tvd(exact_dmc, w))
