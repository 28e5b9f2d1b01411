"""Problem instances, random generation, matchings, feasibility and cost."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Callable

import numpy as np

__all__ = [
    "BipartiteInstance",
    "ManyToOneMatching",
    "RngStream",
    "STREAM_WEIGHTS",
    "STREAM_TRIALS",
    "STREAM_COLORING",
    "many_side_size",
    "gen_instance",
    "matching_cost",
    "is_feasible",
    "format_instance",
    "dump_instance",
    "load_instance",
    "mix_seed",
]

MASK64 = (1 << 64) - 1

STREAM_WEIGHTS = 0
STREAM_TRIALS = 1
STREAM_COLORING = 2


def mix_seed(x: int) -> int:
    """SplitMix64 finalizer; a bijection on 64-bit integers."""
    z = (x + 0x9E3779B97F4A7C15) & MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return z ^ (z >> 31)


@dataclass(frozen=True)
class RngStream:
    """A reproducible random stream identified by ``(seed, stream)``.

    Distinct stream ids give statistically independent generators for the
    same seed. The generator is Philox, a counter-based bit generator, so
    draws are bit-exact across runs on one build.
    """

    seed: int
    stream: int = STREAM_WEIGHTS

    def generator(self) -> np.random.Generator:
        ss = np.random.SeedSequence([self.seed & MASK64, self.stream & MASK64])
        return np.random.Generator(np.random.Philox(ss))


def many_side_size(n: int, alpha: float) -> int:
    """Return ``ceil(n / alpha)`` computed exactly on the binary value of alpha."""
    m = math.ceil(Fraction(n) / Fraction(alpha))
    # guard against any drift: m - 1 < n/alpha <= m
    assert (m - 1) * Fraction(alpha) < n <= m * Fraction(alpha)
    return m


def exponential_weights(rng: np.random.Generator, mean: float, shape) -> np.ndarray:
    """Inverse-CDF exponential draws: ``-mean * log(1 - U)``."""
    u = rng.random(shape)
    return -mean * np.log1p(-u)


@dataclass(frozen=True, eq=False)
class BipartiteInstance:
    """Complete bipartite graph ``K_{n,m}`` with dense edge weights.

    Rows index the one side A (size n), columns the many side B (size m).
    """

    n: int
    m: int
    alpha: float
    weights: np.ndarray = field(repr=False)
    seed: int = 0

    def __post_init__(self):
        w = np.ascontiguousarray(self.weights, dtype=np.float64)
        if w.shape != (self.n, self.m):
            raise ValueError(f"weights shape {w.shape} != ({self.n}, {self.m})")
        if not (1 <= self.m <= self.n):
            raise ValueError(f"need 1 <= m <= n, got n={self.n}, m={self.m}")
        if not np.all(np.isfinite(w)) or np.any(w < 0):
            raise ValueError("weights must be finite and nonnegative")
        w.setflags(write=False)
        object.__setattr__(self, "weights", w)

    @classmethod
    def from_weights(cls, weights, alpha: float | None = None, seed: int = 0):
        """Wrap an explicit matrix; alpha defaults to ``n / m``."""
        w = np.asarray(weights, dtype=np.float64)
        if w.ndim != 2:
            raise ValueError("weights must be a 2-d matrix")
        n, m = w.shape
        return cls(n=n, m=m, alpha=float(n / m) if alpha is None else alpha,
                   weights=w, seed=seed)


@dataclass(frozen=True, eq=False)
class ManyToOneMatching:
    """An assignment A -> B. Feasible when the map is onto."""

    assign: np.ndarray
    m: int

    def __post_init__(self):
        a = np.asarray(self.assign, dtype=np.int64).copy()
        if a.ndim != 1:
            raise ValueError("assign must be one-dimensional")
        if a.size and (a.min() < 0 or a.max() >= self.m):
            raise ValueError("assign entries out of range")
        a.setflags(write=False)
        object.__setattr__(self, "assign", a)

    @property
    def n(self) -> int:
        return self.assign.size

    @property
    def bdegree(self) -> np.ndarray:
        return np.bincount(self.assign, minlength=self.m)

    def edges(self) -> set[tuple[int, int]]:
        return {(a, int(b)) for a, b in enumerate(self.assign)}


def gen_instance(
    n: int,
    alpha: float,
    seed: int,
    sampler: Callable[[np.random.Generator, float, tuple], np.ndarray] = exponential_weights,
) -> BipartiteInstance:
    """Random instance on ``K_{n, ceil(n/alpha)}`` with i.i.d. Exp(mean n) weights.

    ``sampler(rng, mean, shape)`` may be swapped for another weight law; only
    the exponential one ships.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    if not alpha > 1:
        raise ValueError("alpha must be > 1")
    m = many_side_size(n, alpha)
    rng = RngStream(seed, STREAM_WEIGHTS).generator()
    w = sampler(rng, float(n), (n, m))
    return BipartiteInstance(n=n, m=m, alpha=float(alpha), weights=w, seed=seed)


def _check_dims(inst: BipartiteInstance, M: ManyToOneMatching):
    if M.n != inst.n or M.m != inst.m:
        raise ValueError(
            f"matching is {M.n}->{M.m} but instance is {inst.n}x{inst.m}"
        )


def matching_cost(inst: BipartiteInstance, M: ManyToOneMatching) -> float:
    """Sum of the chosen edge weights. Feasibility is not required."""
    _check_dims(inst, M)
    return float(inst.weights[np.arange(inst.n), M.assign].sum())


def is_feasible(inst: BipartiteInstance, M: ManyToOneMatching) -> bool:
    _check_dims(inst, M)
    return bool(M.m == 0 or M.bdegree.min() >= 1)


def format_instance(inst: BipartiteInstance) -> str:
    """Text format: ``n m alpha seed`` header, then n rows of m weights.

    Weights carry 17 significant digits, which round-trips float64 exactly.
    """
    lines = [f"{inst.n} {inst.m} {inst.alpha!r} {inst.seed}"]
    for row in inst.weights:
        lines.append(" ".join(f"{x:.17g}" for x in row))
    return "\n".join(lines) + "\n"


def dump_instance(inst: BipartiteInstance, path) -> None:
    Path(path).write_text(format_instance(inst))


def load_instance(path) -> BipartiteInstance:
    with open(path) as fh:
        header = fh.readline().split()
        if len(header) != 4:
            raise ValueError("bad header, expected 'n m alpha seed'")
        n, m, alpha, seed = int(header[0]), int(header[1]), float(header[2]), int(header[3])
        w = np.loadtxt(fh, dtype=np.float64, ndmin=2)
    return BipartiteInstance(n=n, m=m, alpha=alpha, weights=w.reshape(n, m), seed=seed)
