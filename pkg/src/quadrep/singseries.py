"""Truncated singular series, its Euler-product form and modulus bookkeeping."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import QuadrepError, StabilizationError
from .expsum import DIRECT_BUDGET, ExpSumQuery, expsum, factorize, local_density
from .quadform import QuadraticForm

STABILIZATION_TOL = 1e-9
SQUAREFULL_MAX = 10**8


@dataclass(frozen=True)
class ModulusSplit:
    q: int
    q1: int
    q2: int


@dataclass
class SeriesEstimate:
    N: int
    Qmax: int
    value: float
    dyadic_tails: list = field(default_factory=list)
    euler_value: float | None = None

    @property
    def tail_slope(self) -> float | None:
        return tail_slope(self.dyadic_tails)

    def to_json(self) -> dict:
        return {"N": self.N, "Qmax": self.Qmax, "value": self.value,
                "dyadic_tails": [[L, t] for L, t in self.dyadic_tails],
                "tail_slope": self.tail_slope, "euler_value": self.euler_value}


def split_modulus(q: int) -> ModulusSplit:
    """q = q1 q2 with q1 the product of primes dividing q exactly once."""
    if q < 1:
        raise QuadrepError("q must be at least 1")
    q1 = 1
    for p, e in factorize(q):
        if e == 1:
            q1 *= p
    return ModulusSplit(q, q1, q // q1)


def series_term(q: int, N: int, form: QuadraticForm, budget: int = DIRECT_BUDGET) -> float:
    """q^-n Re S_0(q, 0, N)."""
    val = expsum(ExpSumQuery(q, 0, (0,) * form.n, N), form, budget).value
    # relative to the trivial bound phi(q) q^n, since S_0 itself may vanish
    scale = float(q) ** (form.n + 1)
    if abs(val.imag) > 1e-9 * scale:
        raise QuadrepError(f"S_0({q}, 0, {N}) has imaginary part {val.imag:.3e}")
    return val.real / float(q) ** form.n


def _dyadic_levels(Qmax: int) -> list:
    levels = []
    L = Qmax / 2
    while L >= 1:
        levels.append(L)
        L /= 2
    return levels


def singular_series(N: int, Qmax: int, form: QuadraticForm, budget: int = DIRECT_BUDGET) -> SeriesEstimate:
    """sum_{q <= Qmax} q^-n S_0(q, 0, N) with |sum_{L < q <= 2L}| for L = Qmax/2, Qmax/4, ..."""
    if Qmax < 1:
        raise QuadrepError("Qmax must be at least 1")
    terms = [series_term(q, N, form, budget) for q in range(1, Qmax + 1)]
    tails = []
    for L in _dyadic_levels(Qmax):
        lo, hi = math.floor(L) + 1, math.floor(2 * L)
        tails.append((L, abs(math.fsum(terms[lo - 1:hi]))))
    return SeriesEstimate(N, Qmax, math.fsum(terms), tails)


def tail_slope(tails, levels=None) -> float | None:
    """Least-squares slope of log|tail| against log L, optionally on chosen L only."""
    pts = [(L, t) for L, t in tails if t > 0 and (levels is None or L in levels)]
    if len(pts) < 2:
        return None
    x = np.log([L for L, _ in pts])
    y = np.log([t for _, t in pts])
    return float(np.polyfit(x, y, 1)[0])


def primes_upto(n: int) -> list[int]:
    if n < 2:
        return []
    sieve = np.ones(n + 1, dtype=bool)
    sieve[:2] = False
    for p in range(2, math.isqrt(n) + 1):
        if sieve[p]:
            sieve[p * p::p] = False
    return [int(p) for p in np.flatnonzero(sieve)]


def stabilized_density(p: int, N: int, form: QuadraticForm, kMax: int, budget: int = DIRECT_BUDGET):
    """(density, k) at the first k with |d(k) - d(k+1)| <= tol, or at kMax for p | 2 det."""
    if kMax < 1:
        raise QuadrepError("kMax must be at least 1")
    if (2 * form.det) % p == 0:
        return local_density(p, kMax, N, form, budget), kMax
    prev = local_density(p, 1, N, form, budget)
    for k in range(1, kMax):
        nxt = local_density(p, k + 1, N, form, budget)
        if abs(prev - nxt) <= STABILIZATION_TOL:
            return prev, k
        prev = nxt
    raise StabilizationError(p, kMax, (local_density(p, kMax - 1, N, form, budget) if kMax > 1 else None, prev))


def singular_series_euler(N: int, pMax: int, kMax: int, form: QuadraticForm,
                          budget: int = DIRECT_BUDGET) -> float:
    """Product of stabilized local densities over primes p <= pMax."""
    value = 1.0
    for p in primes_upto(pMax):
        value *= stabilized_density(p, N, form, kMax, budget)[0]
    return value


def count_squarefull(X: int) -> int:
    """Number of square-full x <= X, counting 1.

    Every square-full number is uniquely a^2 b^3 with b square-free.
    """
    if not 1 <= X <= SQUAREFULL_MAX:
        raise QuadrepError(f"X must lie in [1, {SQUAREFULL_MAX}]")
    bmax = 1
    while (bmax + 1) ** 3 <= X:
        bmax += 1
    squarefree = np.ones(bmax + 1, dtype=bool)
    for d in range(2, math.isqrt(bmax) + 1):
        squarefree[d * d::d * d] = False
    return sum(math.isqrt(X // b ** 3) for b in range(1, bmax + 1) if squarefree[b])
