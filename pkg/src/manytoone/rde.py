"""Fixed-point constants, closed-form laws and population dynamics.

The two-step recursion on a Poisson process ``xi_1 < xi_2 < ...`` of rate 1

    X_o = min_i (alpha * xi_i - X_m_i)
    X_m = min_i (xi_i - X_o_i)^+

has the explicit solution below: ``F`` and ``G`` are the complementary cdfs of
``X_o`` and ``X_m``, parametrized by ``w_o`` (root of ``w + exp(-w) = alpha``)
and ``gamma = w_o * exp(w_o)``.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from scipy import integrate

__all__ = [
    "QuadratureError",
    "solve_wo",
    "dilog",
    "RdeConstants",
    "constants",
    "F_eval",
    "G_eval",
    "f_eval",
    "c_star",
    "c_star_integral",
    "c_star_tail_cutoff",
    "sample_F",
    "sample_G",
    "ks_distance",
    "ks_to_F",
    "ks_to_G",
    "SamplePool",
    "BivariatePool",
    "poisson_points",
    "t_step",
    "bivariate_step",
    "init_bivariate",
    "popdyn",
    "endogeny",
    "GridLaw",
    "grid_t_step",
]

PI2_6 = math.pi ** 2 / 6


class QuadratureError(ArithmeticError):
    def __init__(self, msg, value=None, abserr=None):
        super().__init__(msg)
        self.value = value
        self.abserr = abserr


def solve_wo(alpha: float) -> float:
    """Positive root of ``w + exp(-w) = alpha`` by bracketed Newton.

    The residual is formed as ``w + expm1(-w) - (alpha - 1)`` so it keeps full
    relative accuracy when alpha is close to 1.
    """
    if not alpha > 1:
        raise ValueError("alpha must be > 1")
    excess = alpha - 1.0

    def h(w):
        return w + math.expm1(-w) - excess

    lo, hi = max(excess, 0.0), float(alpha)
    # for small excess the root is ~ sqrt(2 * excess)
    w = min(max(math.sqrt(2.0 * excess), lo), hi) if excess < 1 else alpha - math.exp(-alpha)
    for _ in range(200):
        hw = h(w)
        if hw == 0:
            return w
        if hw < 0:
            lo = w
        else:
            hi = w
        dh = -math.expm1(-w)
        step = w - hw / dh if dh > 0 else 0.5 * (lo + hi)
        if not lo < step < hi:
            step = 0.5 * (lo + hi)
        if step == w or hi - lo <= 4 * np.finfo(float).eps * hi:
            return step
        w = step
    return w


def _dilog_series(x: float) -> float:
    # sum x^k / k^2 for |x| <= 1/2
    total, term, k = 0.0, x, 1
    while True:
        add = term / (k * k)
        total += add
        if abs(add) < 1e-18 * max(abs(total), 1e-300):
            return total
        k += 1
        term *= x


def dilog(z: float) -> float:
    """Real dilogarithm ``Li2(z)`` for ``z <= 0``.

    ``[-1/2, 0]`` uses the power series; ``[-1, -1/2)`` the Landen identity
    ``Li2(z) = -Li2(z/(z-1)) - log(1-z)^2 / 2``; ``z < -1`` the inversion
    ``Li2(z) = -Li2(1/z) - pi^2/6 - log(-z)^2 / 2``.
    """
    z = float(z)
    if z > 0:
        raise ValueError("dilog is only supported for z <= 0")
    if z == 0:
        return 0.0
    if z >= -0.5:
        return _dilog_series(z)
    if z >= -1.0:
        return -_dilog_series(z / (z - 1.0)) - 0.5 * math.log1p(-z) ** 2
    return -dilog(1.0 / z) - PI2_6 - 0.5 * math.log(-z) ** 2


@dataclass(frozen=True)
class RdeConstants:
    alpha: float
    w_o: float
    gamma: float

    @classmethod
    def from_alpha(cls, alpha: float) -> "RdeConstants":
        w = solve_wo(alpha)
        return cls(alpha=float(alpha), w_o=w, gamma=w * math.exp(w))

    @property
    def w_m(self) -> float:
        """Mean of ``X_m``; from ``w_o = alpha * exp(-w_m / alpha)``."""
        return -self.alpha * math.log(self.w_o / self.alpha)

    @property
    def G0(self) -> float:
        """``G(0) = alpha / (1 + gamma)``, which equals ``alpha - w_o``."""
        return self.alpha / (1.0 + self.gamma)

    @cached_property
    def c_star(self) -> float:
        inv = 1.0 / self.gamma
        L = math.log1p(inv)
        return -dilog(-inv) - 0.5 * L * L + self.w_o * L + self.w_o

    def F(self, t):
        return F_eval(self, t)

    def G(self, t):
        return G_eval(self, t)

    def f(self, t):
        return f_eval(self, t)


def constants(alpha: float) -> RdeConstants:
    return RdeConstants.from_alpha(alpha)


def F_eval(consts: RdeConstants, t):
    """Complementary cdf of ``X_o``."""
    t = np.asarray(t, dtype=float)
    a, w, g = consts.alpha, consts.w_o, consts.gamma
    pos = (w / a) * np.exp(-np.maximum(t, 0.0) / a)
    # 1 - 1/(1 + g e^{-t}) = g / (g + e^{t})
    neg = g / (g + np.exp(np.minimum(t, 0.0)))
    out = np.where(t >= 0, pos, neg)
    return out if out.ndim else float(out)


def G_eval(consts: RdeConstants, t):
    """Complementary cdf of ``X_m``; equal to 1 on the negative half-line."""
    t = np.asarray(t, dtype=float)
    a, g = consts.alpha, consts.gamma
    # alpha / (1 + g e^t) = alpha e^{-t} / (e^{-t} + g); underflows to 0, never overflows
    em = np.exp(-np.maximum(t, 0.0))
    out = np.where(t >= 0, a * em / (em + g), 1.0)
    return out if out.ndim else float(out)


def f_eval(consts: RdeConstants, t):
    """Density of ``X_o``."""
    t = np.asarray(t, dtype=float)
    a, w, g = consts.alpha, consts.w_o, consts.gamma
    pos = (w / a ** 2) * np.exp(-np.maximum(t, 0.0) / a)
    # g e^{-t} / (1 + g e^{-t})^2 = g e^{t} / (e^{t} + g)^2
    et = np.exp(np.minimum(t, 0.0))
    neg = g * et / (et + g) ** 2
    out = np.where(t > 0, pos, neg)
    return out if out.ndim else float(out)


def c_star(alpha: float) -> float:
    """Limit of ``E[min cost] / n`` on ``K_{n, n/alpha}`` (closed form)."""
    return constants(alpha).c_star


def c_star_tail_cutoff(consts: RdeConstants, tol: float = 1e-10) -> float:
    """Smallest doubling ``Z`` with the outer integrand's tail mass below ``tol``.

    Uses ``P(X + Y > z) <= F(z/2) + G(z/2)`` and
    ``int_Z^inf z e^{-cz} dz = e^{-cZ} (Z/c + 1/c^2)``.
    """
    a, w, g = consts.alpha, consts.w_o, consts.gamma

    def tail(Z):
        c1 = 1.0 / (2 * a)
        t1 = (w / a) * math.exp(-c1 * Z) * (Z / c1 + 1 / c1 ** 2)
        t2 = (a / g) * math.exp(-0.5 * Z) * (2 * Z + 4)
        return (t1 + t2) / a

    Z = 8.0 * a
    while tail(Z) >= tol:
        Z *= 1.25
    return Z


def _quad(fun, a, b, points=None, epsabs=1e-12, limit=200):
    with warnings.catch_warnings():
        warnings.simplefilter("error", integrate.IntegrationWarning)
        try:
            if points is not None and np.isfinite(a) and np.isfinite(b):
                val, err = integrate.quad(fun, a, b, points=points, epsabs=epsabs,
                                          epsrel=1e-12, limit=limit)
            else:
                val, err = integrate.quad(fun, a, b, epsabs=epsabs, epsrel=1e-12,
                                          limit=limit)
        except integrate.IntegrationWarning as exc:
            val, err = integrate.quad(fun, a, b, epsabs=epsabs, epsrel=1e-12, limit=limit)
            if err > 1e3 * epsabs:
                raise QuadratureError(str(exc), val, err) from None
    return val, err


def c_star_integral(alpha: float, z_max: float | None = None,
                    return_error: bool = False):
    """Limit constant by direct 2-d quadrature.

    Integrates ``z * G(z - x) * f(x) / alpha`` over ``x`` in R and ``z >= 0``
    using only the closed forms of ``G`` and ``f``. The inner integral is split
    at ``x = 0`` and ``x = z`` where the integrand has kinks. ``z_max``
    defaults to :func:`c_star_tail_cutoff`. Raises :class:`QuadratureError`
    carrying the achieved error if a panel fails to converge.
    """
    consts = constants(alpha)
    a = consts.alpha
    Z = c_star_tail_cutoff(consts) if z_max is None else float(z_max)
    G = consts.G
    f = consts.f
    inner_err = 0.0

    def inner(z):
        nonlocal inner_err
        v1, e1 = _quad(lambda x: G(z - x) * f(x), -np.inf, 0.0)
        v2, e2 = _quad(lambda x: G(z - x) * f(x), 0.0, z) if z > 0 else (0.0, 0.0)
        v3, e3 = _quad(f, z, np.inf)
        inner_err = max(inner_err, e1 + e2 + e3)
        return z * (v1 + v2 + v3) / a

    val, err = _quad(inner, 0.0, Z, epsabs=1e-11)
    # crude propagation of the worst inner error through the outer weight z/alpha
    total_err = err + 0.5 * Z * Z * inner_err / a
    return (val, total_err) if return_error else val


# --------------------------------------------------------------------------
# samplers and KS


def sample_F(consts: RdeConstants, rng: np.random.Generator, size=None):
    """Draw ``X_o`` by inverting ``F`` piecewise."""
    u = np.minimum(1.0 - rng.random(size), 1.0 - 2.0 ** -53)  # (0, 1)
    a, w, g = consts.alpha, consts.w_o, consts.gamma
    p0 = w / a
    with np.errstate(divide="ignore", invalid="ignore"):
        pos = -a * np.log(u / p0)
        neg = np.log(g) + np.log1p(-u) - np.log(u)
    return np.where(u < p0, pos, neg)


def sample_G(consts: RdeConstants, rng: np.random.Generator, size=None):
    """Draw ``X_m``: an atom at 0 of mass ``1 - G(0)`` plus a logistic-type tail."""
    u = 1.0 - rng.random(size)
    a, g = consts.alpha, consts.gamma
    with np.errstate(divide="ignore", invalid="ignore"):
        tail = np.log(a - u) - np.log(u) - np.log(g)
    return np.where(u < consts.G0, np.maximum(tail, 0.0), 0.0)


def ks_distance(samples, ccdf, ccdf_left=None) -> float:
    """Kolmogorov distance between an empirical law and a complementary cdf.

    ``ccdf_left(x)`` is ``P(X >= x)``; pass it when the law has atoms.
    """
    x = np.sort(np.asarray(samples, dtype=float).ravel())
    n = x.size
    vals, counts = np.unique(x, return_counts=True)
    right = np.cumsum(counts) / n
    left = right - counts / n
    cdf = 1.0 - np.asarray(ccdf(vals))
    cdf_left = cdf if ccdf_left is None else 1.0 - np.asarray(ccdf_left(vals))
    return float(max(np.max(np.abs(right - cdf)), np.max(np.abs(left - cdf_left))))


def ks_to_F(consts, samples) -> float:
    return ks_distance(samples, consts.F)


def ks_to_G(consts, samples) -> float:
    def left(t):
        t = np.asarray(t, dtype=float)
        return np.where(t <= 0, 1.0, G_eval(consts, t))

    return ks_distance(samples, consts.G, left)


# --------------------------------------------------------------------------
# population dynamics


@dataclass
class SamplePool:
    samples: np.ndarray
    side: str = "m"
    generation: int = 0
    trunc: int = 64

    def __post_init__(self):
        self.samples = np.asarray(self.samples, dtype=float)
        if self.side not in ("o", "m"):
            raise ValueError("side must be 'o' or 'm'")
        if self.side == "m" and np.any(self.samples < 0):
            raise ValueError("m-side pool must be nonnegative")

    def __len__(self):
        return self.samples.size


@dataclass
class BivariatePool:
    pairs: np.ndarray  # N x 2, o-side
    generation: int = 0
    trunc: int = 64
    history: list[float] = field(default_factory=list)
    stderr_history: list[float] = field(default_factory=list)

    @property
    def delta(self) -> float:
        """Mean absolute discrepancy between the two coordinates."""
        return float(np.mean(np.abs(self.pairs[:, 0] - self.pairs[:, 1])))

    @property
    def delta_stderr(self) -> float:
        d = np.abs(self.pairs[:, 0] - self.pairs[:, 1])
        return float(d.std(ddof=1) / math.sqrt(d.size)) if d.size > 1 else 0.0

    def _record(self):
        self.history.append(self.delta)
        self.stderr_history.append(self.delta_stderr)


def poisson_points(rng: np.random.Generator, n: int, P: int) -> np.ndarray:
    """First ``P`` points of ``n`` independent rate-1 Poisson processes."""
    return np.cumsum(rng.standard_exponential((n, P)), axis=1)


SAFE_FRACTION = 0.999


def _argmin_ok(argmins: np.ndarray, P: int) -> bool:
    return np.mean(argmins < P // 2) >= SAFE_FRACTION


def _o_from_m(xm, alpha, N, P, rng):
    xi = poisson_points(rng, N, P)
    idx = rng.integers(0, xm.shape[0], size=(N, P))
    if xm.ndim == 1:
        terms = alpha * xi - xm[idx]
        return terms.min(axis=1), np.argmin(terms, axis=1)
    terms = alpha * xi[:, :, None] - xm[idx]
    return terms.min(axis=1), np.argmin(terms, axis=1).max(axis=1)


def _m_from_o(xo, N, P, rng):
    xi = poisson_points(rng, N, P)
    idx = rng.integers(0, xo.shape[0], size=(N, P))
    if xo.ndim == 1:
        terms = np.maximum(xi - xo[idx], 0.0)
        return terms.min(axis=1), np.argmin(terms, axis=1)
    terms = np.maximum(xi[:, :, None] - xo[idx], 0.0)
    return terms.min(axis=1), np.argmin(terms, axis=1).max(axis=1)


def t_step(pool: SamplePool, consts: RdeConstants, rng: np.random.Generator,
           P: int | None = None) -> SamplePool:
    """Apply ``T`` sample-wise to an m-side pool (through an o-side pool).

    ``P`` points of each Poisson process are kept. If fewer than 99.9% of the
    minimizers fall in the first ``P/2`` points, ``P`` is doubled and the
    step redone.
    """
    if pool.side != "m":
        raise ValueError("t_step expects an m-side pool")
    P = pool.trunc if P is None else P
    if P < 16:
        raise ValueError("truncation P must be >= 16")
    N = len(pool)
    while True:
        xo, ao = _o_from_m(pool.samples, consts.alpha, N, P, rng)
        xm, am = _m_from_o(xo, N, P, rng)
        if _argmin_ok(ao, P) and _argmin_ok(am, P):
            break
        P *= 2
    return SamplePool(xm, side="m", generation=pool.generation + 1, trunc=P)


def init_bivariate(consts: RdeConstants, N: int, rng: np.random.Generator,
                   P: int = 64) -> BivariatePool:
    """Independent coordinates, each drawn from ``F``."""
    pairs = np.column_stack([sample_F(consts, rng, N), sample_F(consts, rng, N)])
    pool = BivariatePool(pairs, trunc=P)
    pool._record()
    return pool


def bivariate_step(pool: BivariatePool, consts: RdeConstants,
                   rng: np.random.Generator, P: int | None = None) -> BivariatePool:
    """Two-step update of o-side pairs with Poisson points shared by both coordinates."""
    P = pool.trunc if P is None else P
    N = pool.pairs.shape[0]
    while True:
        xm, am = _m_from_o(pool.pairs, N, P, rng)
        xo, ao = _o_from_m(xm, consts.alpha, N, P, rng)
        if _argmin_ok(am, P) and _argmin_ok(ao, P):
            break
        P *= 2
    out = BivariatePool(xo, generation=pool.generation + 1, trunc=P,
                        history=list(pool.history),
                        stderr_history=list(pool.stderr_history))
    out._record()
    return out


def popdyn(alpha: float, steps: int, N: int = 100_000, P: int = 64,
           init: str = "G", rng: np.random.Generator | None = None):
    """Iterate ``T`` from an initial m-side law; yield ``(generation, KS to G)``.

    ``init`` is ``"G"`` (the fixed point), ``"exp"`` (Exp(1)) or ``"zero"``.
    """
    consts = constants(alpha)
    rng = np.random.default_rng() if rng is None else rng
    if init == "G":
        x0 = sample_G(consts, rng, N)
    elif init == "exp":
        x0 = rng.standard_exponential(N)
    elif init == "zero":
        x0 = np.zeros(N)
    else:
        raise ValueError(f"unknown init {init!r}")
    pool = SamplePool(x0, side="m", trunc=P)
    yield 0, ks_to_G(consts, pool.samples)
    for _ in range(steps):
        pool = t_step(pool, consts, rng)
        yield pool.generation, ks_to_G(consts, pool.samples)


def endogeny(alpha: float, steps: int, N: int = 100_000, P: int = 64,
             rng: np.random.Generator | None = None, with_stderr: bool = False):
    """Discrepancy ``mean|X1 - X2|`` per generation, starting from ``F x F``.

    With ``with_stderr`` the standard errors of those means come back as a
    second list.
    """
    consts = constants(alpha)
    rng = np.random.default_rng() if rng is None else rng
    pool = init_bivariate(consts, N, rng, P)
    for _ in range(steps):
        pool = bivariate_step(pool, consts, rng)
    return (pool.history, pool.stderr_history) if with_stderr else pool.history


# --------------------------------------------------------------------------
# deterministic grid iteration of T (coarse cross-check)


@dataclass
class GridLaw:
    """An m-side complementary cdf tabulated on ``[0, L]`` with spacing ``h``."""

    G: np.ndarray
    h: float

    @property
    def t(self):
        return np.arange(self.G.size) * self.h

    @classmethod
    def from_function(cls, fun, L: float, h: float):
        t = np.arange(int(round(L / h)) + 1) * h
        return cls(np.asarray(fun(t), dtype=float), h)


def _tail_integral(y, h):
    # int_{t_i}^{t_end} y by the trapezoid rule
    seg = 0.5 * (y[1:] + y[:-1]) * h
    out = np.zeros_like(y)
    out[:-1] = np.cumsum(seg[::-1])[::-1]
    return out


def grid_t_step(law: GridLaw, alpha: float) -> GridLaw:
    """One application of ``T = Gamma o phi`` on the grid.

    ``phi G(t) = exp(-int_{-t}^inf G / alpha)`` and
    ``Gamma F(t) = exp(-int_{-t}^inf F)`` for ``t >= 0``; both tails beyond
    the grid are dropped.
    """
    h = law.h
    G = law.G
    IG = _tail_integral(G, h)  # int_{t}^{L} G for t >= 0
    K = G.size
    # F on the symmetric grid s_j = (j - (K-1)) h, j = 0..2K-2
    F_neg = np.exp(-IG[::-1] / alpha)  # s <= 0: int_{-s}^inf G
    s_pos = np.arange(1, K) * h
    F_pos = np.exp(-(s_pos + IG[0]) / alpha)  # s > 0: G = 1 on [-s, 0]
    F = np.concatenate([F_neg, F_pos])
    IF = _tail_integral(F, h)  # int_{s_j}^{L} F
    # Gamma F(t) at t = i h uses s = -t, index (K-1) - i
    newG = np.exp(-IF[K - 1 - np.arange(K)])
    return GridLaw(newG, h)
