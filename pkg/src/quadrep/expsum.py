"""Complete exponential sums S_u(q, b, N) and solution counts modulo q.

    S_u(q, b, N) = sum_{s mod q, (s,q)=1} sum_{v mod q} e_q(s'(F(v) - N) + u s - b.v)

where s' is the inverse of s modulo q and e_q(x) = exp(2 pi i x / q).

The v-sum only depends on v through the residues F(v) mod q and b.v mod q,
so it is evaluated by tabulating

    H[a] = sum_{v : F(v) = a mod q} e_q(-b.v)

once per (q, b) and then summing over units.  When the form splits into
blocks without cross terms, H is the cyclic convolution of the block
tables, which makes diagonal forms cost O(q^2) instead of O(q^n).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .errors import BudgetExceeded, QuadrepError
from .quadform import QuadraticForm

DIRECT_BUDGET = 10**9
COUNT_BUDGET = 10**9

METHODS = ("direct", "multiplicative", "gauss-fastpath")


def mod_inverse(s: int, q: int) -> int:
    if q < 1:
        raise QuadrepError("modulus must be positive")
    if math.gcd(s, q) != 1:
        raise QuadrepError(f"{s} is not invertible modulo {q}")
    return pow(s, -1, q) if q > 1 else 0


def factorize(q: int) -> list[tuple[int, int]]:
    """Prime factorization of q >= 1 as [(p, e), ...] in increasing p."""
    if q < 1:
        raise QuadrepError("can only factor positive integers")
    out = []
    p = 2
    while p * p <= q:
        if q % p == 0:
            e = 0
            while q % p == 0:
                q //= p
                e += 1
            out.append((p, e))
        p += 1 if p == 2 else 2
    if q > 1:
        out.append((q, 1))
    return out


def units(q: int) -> np.ndarray:
    r = np.arange(1, q + 1, dtype=np.int64) % q if q > 1 else np.array([0], dtype=np.int64)
    return r[np.gcd(r, q) == 1] if q > 1 else r


def roots_of_unity(q: int) -> np.ndarray:
    """e_q(k) for k = 0..q-1; arguments are always reduced before lookup."""
    return np.exp(2j * np.pi * np.arange(q) / q)


@dataclass(frozen=True)
class ExpSumQuery:
    q: int
    u: int
    b: tuple[int, ...]
    N: int

    def __post_init__(self):
        if self.q < 1:
            raise QuadrepError("q must be at least 1")
        object.__setattr__(self, "b", tuple(int(v) for v in self.b))


@dataclass(frozen=True)
class ExpSumValue:
    value: complex
    q: int
    u: int
    b: tuple[int, ...]
    N: int
    method: str
    work: int = field(default=0, compare=False)

    def to_json(self) -> dict:
        return {"q": self.q, "u": self.u, "b": list(self.b), "N": self.N,
                "value_re": self.value.real, "value_im": self.value.imag,
                "abs": abs(self.value), "method": self.method}


# -- residue tables ---------------------------------------------------------

def _block_residues(q: int, sub: np.ndarray):
    """Yield (F(v) mod q, v) chunks over all v in (Z/q)^m for one block.

    The last coordinate is peeled off so each chunk holds q^(m-1) vectors.
    """
    m = sub.shape[0]
    d = int(sub[m - 1, m - 1]) // 2
    if m == 1:
        x = np.arange(q, dtype=np.int64)
        yield (d * x * x) % q, x[:, None]
        return
    grids = np.meshgrid(*([np.arange(q, dtype=np.int64)] * (m - 1)), indexing="ij")
    head = np.stack([g.ravel() for g in grids], axis=1)
    head_mat = sub[: m - 1, : m - 1]
    fp = (np.einsum("ij,jk,ik->i", head, head_mat, head) // 2) % q
    lin = (head @ sub[m - 1, : m - 1]) % q
    for xn in range(q):
        vals = (fp + xn * lin + d * xn * xn) % q
        yield vals, (head, xn)


def _block_work(q: int, form: QuadraticForm) -> int:
    blocks = form.blocks()
    return sum(q ** len(bl) for bl in blocks) + (len(blocks) - 1) * q * q


@lru_cache(maxsize=1024)
def _value_distribution(q: int, mat: tuple) -> np.ndarray:
    """Exact counts #{v mod q : F(v) = a mod q} for a = 0..q-1."""
    form = QuadraticForm(mat, strict=False)
    full = form.matrix
    dist = None
    for block in form.blocks():
        sub = full[np.ix_(block, block)]
        part = np.zeros(q, dtype=np.int64)
        for vals, _ in _block_residues(q, sub):
            part += np.bincount(vals, minlength=q)
        dist = part if dist is None else _cconv_int(dist, part, q)
    dist.setflags(write=False)
    return dist


def _cconv_int(x: np.ndarray, y: np.ndarray, q: int) -> np.ndarray:
    out = np.zeros(q, dtype=np.int64)
    for i in np.flatnonzero(x):
        out += int(x[i]) * np.roll(y, i)
    return out


@lru_cache(maxsize=4096)
def _twisted_distribution(q: int, mat: tuple, b: tuple) -> np.ndarray:
    """H[a] = sum over v with F(v) = a mod q of e_q(-b.v)."""
    if all(v % q == 0 for v in b):
        h = _value_distribution(q, mat).astype(complex)
        h.setflags(write=False)
        return h
    form = QuadraticForm(mat, strict=False)
    full = form.matrix
    roots = roots_of_unity(q)
    bvec = np.array(b, dtype=np.int64)
    h = None
    for block in form.blocks():
        sub = full[np.ix_(block, block)]
        bb = bvec[block] % q
        part = np.zeros(q, dtype=complex)
        for vals, coords in _block_residues(q, sub):
            if isinstance(coords, tuple):
                head, xn = coords
                phase = (head @ bb[:-1] + bb[-1] * xn) % q
            else:
                phase = (coords @ bb) % q
            w = roots[(-phase) % q]
            part += np.bincount(vals, weights=w.real, minlength=q)
            part += 1j * np.bincount(vals, weights=w.imag, minlength=q)
        h = part if h is None else np.fft.ifft(np.fft.fft(h) * np.fft.fft(part))
    h.setflags(write=False)
    return h


def _sum_over_units(q: int, h: np.ndarray, u: int, N: int) -> complex:
    us = units(q)
    if q == 1:
        return complex(h[0])
    roots = roots_of_unity(q)
    sbar = np.array([pow(int(s), -1, q) for s in us], dtype=np.int64)
    shifted = (np.arange(q, dtype=np.int64) - N) % q
    phase = (sbar[:, None] * shifted[None, :] + (u * us)[:, None]) % q
    # every row of e_q(phase) sums to zero over a, so a constant can be taken
    # out of h; removing its mean keeps the cancellation out of floating point
    if not np.any(h.imag):
        # s -> -s pairs conjugate phases, so only the cosine part survives
        hr = h.real - np.round(h.real.mean())
        return complex(float(np.sum(roots.real[phase] @ hr)))
    return complex(np.sum(roots[phase] @ (h - h.mean())))


def direct_work(q: int, form: QuadraticForm) -> int:
    """Number of elementary summands evaluated by :func:`expsum_direct`."""
    phi = len(units(q)) if q > 1 else 1
    return _block_work(q, form) + phi * q


def expsum_direct(query: ExpSumQuery, form: QuadraticForm, budget: int = DIRECT_BUDGET) -> ExpSumValue:
    """S_u(q, b, N) summed over the full modulus q without factoring it."""
    q = query.q
    if len(query.b) != form.n:
        raise QuadrepError("b has the wrong length")
    work = direct_work(q, form)
    if work > budget:
        raise BudgetExceeded(f"direct sum at q={q} needs {work} operations > budget {budget}")
    h = _twisted_distribution(q, form.mat, tuple(v % q for v in query.b))
    val = _sum_over_units(q, h, query.u % q, query.N % q)
    return ExpSumValue(val, q, query.u, query.b, query.N, "direct", work)


def legendre(a: int, p: int) -> int:
    a %= p
    if a == 0:
        return 0
    return 1 if pow(a, (p - 1) // 2, p) == 1 else -1


def fastpath_applies(p: int, form: QuadraticForm) -> bool:
    return p > 2 and len(factorize(p)) == 1 and factorize(p)[0][1] == 1 and (2 * form.det) % p != 0


def kloosterman_shift(p: int, b, form: QuadraticForm, inverse_of: int = 2) -> int:
    """(inverse_of)' * b^T mat^{-1} b modulo p.

    With F = x^T mat x / 2, completing the square gives the shift with
    ``inverse_of=2``; ``inverse_of=4`` is the shift written for the matrix
    convention F = x^T M x (M = mat / 2).
    """
    inv = form.inverse_mod(p)
    bv = np.array(b, dtype=np.int64) % p
    c = int(bv @ inv @ bv) % p
    return mod_inverse(inverse_of % p, p) * c % p


def expsum_gauss(query: ExpSumQuery, form: QuadraticForm) -> ExpSumValue:
    """S_u(p, b, N) for an odd prime p not dividing 2 det via Gauss sums.

    For such p the v-sum equals G(s') e_p(-s 2' b^T mat^-1 b) with
    G(t) = (t|p)^n (2'^n det|p) g^n and g the quadratic Gauss sum, so the
    whole sum collapses to a Kloosterman (n even) or Salie (n odd) sum.
    """
    p = query.q
    if not fastpath_applies(p, form):
        raise QuadrepError(f"Gauss-sum fast path needs an odd prime not dividing 2 det, got {p}")
    n = form.n
    g1 = math.sqrt(p) if p % 4 == 1 else 1j * math.sqrt(p)
    const = legendre(form.det * pow(mod_inverse(2, p), n, p), p) * g1 ** n
    shift = kloosterman_shift(p, query.b, form, 2)
    roots = roots_of_unity(p)
    total = 0j
    for s in range(1, p):
        t = pow(s, -1, p)
        g = const * (legendre(t, p) ** n)
        total += roots[(s * (query.u - shift) - t * query.N) % p] * g
    return ExpSumValue(complex(total), p, query.u, query.b, query.N, "gauss-fastpath", p)


def twisted_targets(q: int, N: int) -> list[tuple[int, int]]:
    """[(p^e, N_p)] with N_p = ((q / p^e)')^2 N mod p^e.

    S_u(rs, b, N) = S_u(r, b, s'^2 N) S_u(s, b, r'^2 N) for coprime r, s,
    where s' is the inverse of s mod r and r' the inverse of r mod s.
    """
    out = []
    for p, e in factorize(q):
        pe = p ** e
        cof = mod_inverse((q // pe) % pe, pe) if pe > 1 else 0
        out.append((pe, (cof * cof * N) % pe))
    return out


def expsum(query: ExpSumQuery, form: QuadraticForm, budget: int = DIRECT_BUDGET,
           fast: bool = False) -> ExpSumValue:
    """S_u(q, b, N) as a product over the prime-power factors of q."""
    if query.q == 1:
        return ExpSumValue(1 + 0j, 1, query.u, query.b, query.N, "multiplicative", 1)
    val = 1 + 0j
    work = 0
    used_fast = False
    for pe, n_twist in twisted_targets(query.q, query.N):
        sub = ExpSumQuery(pe, query.u, query.b, n_twist)
        if fast and fastpath_applies(pe, form):
            part = expsum_gauss(sub, form)
            used_fast = True
        else:
            part = expsum_direct(sub, form, budget)
        val *= part.value
        work += part.work
    method = "gauss-fastpath" if used_fast else "multiplicative"
    return ExpSumValue(val, query.q, query.u, query.b, query.N, method, work)


def prime_sum_bound(p: int, u: int, b, N: int, form: QuadraticForm, inverse_of: int = 2) -> float:
    """2 p^((n+1)/2) gcd(p, u - shift, N)^(1/2) for odd p not dividing 2 det.

    The gcd is taken on residues mod p with gcd(p, 0) = p, so it is p when
    both u - shift and N vanish mod p and 1 otherwise.
    """
    shift = kloosterman_shift(p, b, form, inverse_of)
    g = p if (u - shift) % p == 0 and N % p == 0 else 1
    return 2.0 * p ** ((form.n + 1) / 2) * math.sqrt(g)


def count_work(q: int, form: QuadraticForm) -> int:
    return _block_work(q, form)


def count_solutions_mod(q: int, N: int, form: QuadraticForm, budget: int = COUNT_BUDGET) -> int:
    """#{v mod q : F(v) = N mod q}, exact."""
    if q < 1:
        raise QuadrepError("q must be at least 1")
    if q == 1:
        return 1
    work = count_work(q, form)
    if work > budget:
        raise BudgetExceeded(f"counting mod {q} needs {work} operations > budget {budget}")
    if form.n * math.log2(q) >= 62:
        raise BudgetExceeded(f"q^n overflows 64-bit counts at q={q}")
    return int(_value_distribution(q, form.mat)[N % q])


def local_density(p: int, k: int, N: int, form: QuadraticForm, budget: int = COUNT_BUDGET) -> float:
    """p^(k(1-n)) #{v mod p^k : F(v) = N mod p^k}."""
    if k < 1:
        raise QuadrepError("k must be positive")
    q = p ** k
    return count_solutions_mod(q, N, form, budget) / float(q) ** (form.n - 1)
