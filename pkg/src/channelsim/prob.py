"""Finite-alphabet probability primitives shared by the rest of the package.

Conventions used everywhere:

* logs are base 2 and all information quantities are in bits,
* pmfs are dense float64 vectors over symbols 0..n-1,
* channels are row-stochastic matrices, rows indexed by the input symbol,
* multi-receiver outputs are flattened row-major with receiver 0 as the
  most significant digit, so output (y0, y1) of sizes (m0, m1) lives at
  flat index y0 * m1 + y1.

Mass bookkeeping is validated to 1e-12; constructors never renormalize
silently, use the ``normalized`` classmethods when the input is a weight
vector rather than an exact pmf.
"""

from __future__ import annotations

import dataclasses
import json
import math
from typing import Iterable, Sequence

import numpy as np

MASS_TOL = 1e-12


def _freeze(arr: np.ndarray) -> np.ndarray:
    out = np.array(arr, dtype=np.float64)
    out.setflags(write=False)
    return out


def _check_mass(vec: np.ndarray, what: str) -> None:
    if vec.ndim != 1 or vec.size == 0:
        raise ValueError(f"{what} must be a nonempty vector")
    if np.any(vec < 0.0) or not np.all(np.isfinite(vec)):
        raise ValueError(f"{what} must be finite and nonnegative")
    total = float(vec.sum())
    if abs(total - 1.0) > MASS_TOL:
        raise ValueError(f"{what} must sum to 1 within {MASS_TOL}, got {total!r}")


@dataclasses.dataclass(frozen=True, eq=False)
class Pmf:
    """Probability mass function over a finite alphabet."""

    probs: np.ndarray

    def __post_init__(self):
        arr = _freeze(self.probs)
        _check_mass(arr, "pmf")
        object.__setattr__(self, "probs", arr)

    @classmethod
    def uniform(cls, n: int) -> "Pmf":
        return cls(np.full(n, 1.0 / n))

    @classmethod
    def point(cls, n: int, i: int) -> "Pmf":
        probs = np.zeros(n)
        probs[i] = 1.0
        return cls(probs)

    @classmethod
    def normalized(cls, weights) -> "Pmf":
        """Build a pmf from nonnegative weights, rescaling to unit mass."""
        arr = np.asarray(weights, dtype=np.float64)
        total = arr.sum()
        if not np.all(arr >= 0.0) or total <= 0.0:
            raise ValueError("weights must be nonnegative with positive total")
        return cls(arr / total)

    @property
    def size(self) -> int:
        return int(self.probs.size)

    def support(self) -> np.ndarray:
        return np.flatnonzero(self.probs > 0.0)


@dataclasses.dataclass(frozen=True, eq=False)
class Dmc:
    """Discrete memoryless channel W(y|x) as a row-stochastic matrix."""

    rows: np.ndarray

    def __post_init__(self):
        arr = _freeze(self.rows)
        if arr.ndim != 2 or arr.size == 0:
            raise ValueError("channel matrix must be 2-d and nonempty")
        for x in range(arr.shape[0]):
            _check_mass(arr[x], f"channel row {x}")
        object.__setattr__(self, "rows", arr)

    @classmethod
    def bsc(cls, delta: float) -> "Dmc":
        if not 0.0 <= delta <= 1.0:
            raise ValueError("crossover must lie in [0, 1]")
        return cls(np.array([[1.0 - delta, delta], [delta, 1.0 - delta]]))

    @classmethod
    def identity(cls, n: int) -> "Dmc":
        return cls(np.eye(n))

    @classmethod
    def normalized(cls, rows) -> "Dmc":
        arr = np.asarray(rows, dtype=np.float64)
        return cls(arr / arr.sum(axis=1, keepdims=True))

    @property
    def input_size(self) -> int:
        return int(self.rows.shape[0])

    @property
    def output_size(self) -> int:
        return int(self.rows.shape[1])

    def row(self, x: int) -> Pmf:
        return Pmf(self.rows[x])


@dataclasses.dataclass(frozen=True, eq=False)
class BroadcastDmc:
    """Channel from one sender to K receivers, outputs flattened row-major."""

    rows: np.ndarray
    output_sizes: tuple

    def __post_init__(self):
        sizes = tuple(int(m) for m in self.output_sizes)
        if not sizes or any(m < 1 for m in sizes):
            raise ValueError("output sizes must be positive")
        arr = _freeze(self.rows)
        if arr.ndim != 2 or arr.shape[1] != math.prod(sizes):
            raise ValueError("row width must equal the product of output sizes")
        for x in range(arr.shape[0]):
            _check_mass(arr[x], f"channel row {x}")
        object.__setattr__(self, "rows", arr)
        object.__setattr__(self, "output_sizes", sizes)

    @property
    def input_size(self) -> int:
        return int(self.rows.shape[0])

    @property
    def num_receivers(self) -> int:
        return len(self.output_sizes)

    def row(self, x: int) -> Pmf:
        return Pmf(self.rows[x])


@dataclasses.dataclass(frozen=True, eq=False)
class JointPmf:
    """Joint pmf over a product alphabet, stored flat with explicit factor sizes."""

    probs: np.ndarray
    factor_sizes: tuple

    def __post_init__(self):
        sizes = tuple(int(m) for m in self.factor_sizes)
        arr = _freeze(np.ravel(self.probs))
        if math.prod(sizes) != arr.size:
            raise ValueError("factor sizes do not match table size")
        _check_mass(arr, "joint pmf")
        object.__setattr__(self, "probs", arr)
        object.__setattr__(self, "factor_sizes", sizes)

    def table(self) -> np.ndarray:
        return self.probs.reshape(self.factor_sizes)

    def marginal(self, axes) -> Pmf:
        """Marginal over the given axis or axes, kept in original order."""
        keep = sorted({axes} if isinstance(axes, int) else set(axes))
        if not keep or any(a < 0 or a >= len(self.factor_sizes) for a in keep):
            raise ValueError("axes out of range")
        drop = tuple(a for a in range(len(self.factor_sizes)) if a not in keep)
        marg = self.table().sum(axis=drop) if drop else self.table()
        return Pmf(marg.reshape(-1))

    def as_pmf(self) -> Pmf:
        return Pmf(self.probs)


def tvd(p: Pmf, q: Pmf) -> float:
    """Total variation distance (1/2) * sum |p - q|."""
    if p.size != q.size:
        raise ValueError("alphabets differ")
    return 0.5 * float(np.abs(p.probs - q.probs).sum())


def channel_tvd(w, v) -> float:
    """Worst-case row distance: max over inputs of tvd between the rows."""
    if w.rows.shape != v.rows.shape:
        raise ValueError("channel shapes differ")
    return 0.5 * float(np.abs(w.rows - v.rows).sum(axis=1).max())


def entropy_bits(p) -> float:
    """Shannon entropy in bits; accepts a Pmf or a raw mass vector."""
    vec = p.probs if isinstance(p, Pmf) else np.asarray(p, dtype=np.float64)
    pos = vec[vec > 0.0]
    return float(-(pos * np.log2(pos)).sum())


def tensor_power(w: Dmc, n: int, max_entries: int = 1 << 20) -> Dmc:
    """n-fold product channel; index order is big-endian in symbol 1.

    The dense matrix has |X|^n * |Y|^n entries, guarded by max_entries.
    """
    if n < 1:
        raise ValueError("power must be >= 1")
    entries = (w.input_size ** n) * (w.output_size ** n)
    if entries > max_entries:
        raise ValueError(f"tensor power needs {entries} entries, cap is {max_entries}")
    rows = w.rows
    for _ in range(n - 1):
        rows = np.kron(rows, w.rows)
    return Dmc(rows)


def push_forward(p: Pmf, w) -> JointPmf:
    """Joint law p(x) W(y|x) of input and output(s)."""
    if p.size != w.input_size:
        raise ValueError("input alphabet mismatch")
    joint = p.probs[:, None] * w.rows
    sizes = (p.size,) + (tuple(w.output_sizes) if isinstance(w, BroadcastDmc)
                         else (w.output_size,))
    return JointPmf(joint.reshape(-1), sizes)


def output_marginal(p: Pmf, w) -> Pmf:
    """Output law of w under input p; for broadcast channels the joint output."""
    if p.size != w.input_size:
        raise ValueError("input alphabet mismatch")
    return Pmf(p.probs @ w.rows)


def reduce_broadcast(w: BroadcastDmc, keep: Iterable[int]):
    """Marginalize a broadcast channel onto a subset of receivers.

    Receivers are kept in their original order regardless of the order
    given. Returns a Dmc for a single receiver, else a BroadcastDmc.
    """
    keep_sorted = sorted(set(int(i) for i in keep))
    if not keep_sorted or any(i < 0 or i >= w.num_receivers for i in keep_sorted):
        raise ValueError("receiver subset out of range")
    shaped = w.rows.reshape((w.input_size,) + w.output_sizes)
    drop = tuple(1 + i for i in range(w.num_receivers) if i not in keep_sorted)
    reduced = shaped.sum(axis=drop) if drop else shaped
    flat = reduced.reshape(w.input_size, -1)
    if len(keep_sorted) == 1:
        return Dmc(flat)
    return BroadcastDmc(flat, tuple(w.output_sizes[i] for i in keep_sorted))


def channel_from_json(source):
    """Parse the channel interchange schema.

    Accepts a dict or a JSON string shaped like
    {"input_size": 2, "output_sizes": [2], "rows": [[...], [...]]}.
    A single output gives a Dmc, several give a BroadcastDmc.
    """
    obj = json.loads(source) if isinstance(source, str) else source
    sizes = [int(m) for m in obj["output_sizes"]]
    rows = np.asarray(obj["rows"], dtype=np.float64)
    if rows.shape[0] != int(obj["input_size"]):
        raise ValueError("row count disagrees with input_size")
    if len(sizes) == 1:
        if rows.shape[1] != sizes[0]:
            raise ValueError("row width disagrees with output size")
        return Dmc(rows)
    return BroadcastDmc(rows, tuple(sizes))


def channel_to_json(w) -> dict:
    sizes = list(w.output_sizes) if isinstance(w, BroadcastDmc) else [w.output_size]
    return {
        "input_size": w.input_size,
        "output_sizes": sizes,
        "rows": [[float(v) for v in row] for row in w.rows],
    }
