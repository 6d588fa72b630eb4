"""Exact and weighted counts of integer solutions of F(x) = N.

Solutions are found by solving the quadratic in one pivot coordinate
exactly for every choice of the remaining n-1 coordinates, so a box of side
L costs O(L^(n-1)) integer operations.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy import special

from .errors import BudgetExceeded, QuadrepError
from .expsum import roots_of_unity, units
from .quadform import (Box, Diagonalization, QuadraticForm, SmoothingParams, bounding_region,
                       dilation_factor, rotated_intervals)
from .oscillatory import I_gaussian

WEIGHT_KINDS = ("char", "gauss", "wplus", "wminus")
DEFAULT_TOL = 1e-9
ENUM_BUDGET = 5 * 10**9
_INT_LIMIT = 2**62


@dataclass(frozen=True)
class CountResult:
    N: int
    P: float
    weight: str
    value: float
    lattice_points_visited: int
    solutions_found: int

    def to_json(self) -> dict:
        return {"N": self.N, "P": self.P, "weight": self.weight, "value": self.value,
                "lattice_points_visited": self.lattice_points_visited,
                "solutions_found": self.solutions_found}


# -- weights -------------------------------------------------------------

def weight_w(x, params: SmoothingParams):
    """pi^(-n/2) K^(An) exp(-|x - P x0|^2 P^-2 K^2A)."""
    x = np.asarray(x, dtype=float)
    n = x.shape[-1]
    d2 = np.sum((x - params.P * np.array(params.x0)) ** 2, axis=-1)
    return math.pi ** (-n / 2) * params.K ** (params.A * n) * np.exp(-d2 * params.alpha)


def _erf_window(lo, hi):
    """(erf(hi) - erf(lo)) / 2 without cancellation in the tails."""
    lo, hi = np.broadcast_arrays(lo, hi)
    out = np.empty(lo.shape)
    right = lo >= 0
    left = hi <= 0
    mid = ~(right | left)
    out[right] = 0.5 * (special.erfc(lo[right]) - special.erfc(hi[right]))
    out[left] = 0.5 * (special.erfc(-hi[left]) - special.erfc(-lo[left]))
    out[mid] = 1.0 - 0.5 * (special.erfc(-lo[mid]) + special.erfc(hi[mid]))
    return out


def weight_Wpm(x, sign: int, params: SmoothingParams, box: Box, diag: Diagonalization):
    """x0-average of w over the dilated box (1 +/- K^-A/2) Gamma + c.

    Per rotated coordinate this is pi^-1/2 times the Gaussian integral over
    [K^A(-d g + c - x/P), K^A(d g + c - x/P)], i.e. half an erf difference.
    """
    d = dilation_factor(params.P, params.A, sign)
    ka = params.K ** params.A
    xs = diag.rotate(x) / params.P
    c = np.array(box.c_star)
    g = np.array(box.gamma_star)
    lo = ka * (-d * g + c - xs)
    hi = ka * (d * g + c - xs)
    return np.prod(_erf_window(lo, hi), axis=-1)


# -- enumeration -----------------------------------------------------------

def _pivot(form: QuadraticForm) -> int:
    diag = [abs(form.mat[i][i]) for i in range(form.n)]
    return diag.index(max(diag))


def _isqrt_exact(d: np.ndarray) -> np.ndarray:
    """floor(sqrt(d)) for non-negative int64 d; the float root only seeds it."""
    r = np.floor(np.sqrt(d.astype(float))).astype(np.int64)
    while True:
        hi = r * r > d
        if not hi.any():
            break
        r[hi] -= 1
    while True:
        lo = (r + 1) * (r + 1) <= d
        if not lo.any():
            break
        r[lo] += 1
    return r


def _grid(ranges) -> np.ndarray:
    axes = [np.arange(lo, hi + 1, dtype=np.int64) for lo, hi in ranges]
    if not axes:
        return np.zeros((1, 0), dtype=np.int64)
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.stack([m.ravel() for m in mesh], axis=1)


def _check_region(region, n):
    if len(region) != n:
        raise QuadrepError(f"region has {len(region)} intervals for {n} variables")
    out = []
    for lo, hi in region:
        if not (math.isfinite(lo) and math.isfinite(hi)):
            raise QuadrepError("region must be bounded")
        out.append((math.ceil(lo), math.floor(hi)))
    return out


def _solution_chunks(N: int, region, form: QuadraticForm, stats: dict | None = None):
    """Yield arrays of solutions; ``stats['visited']`` counts tuples examined."""
    n = form.n
    region = _check_region(region, n)
    if any(lo > hi for lo, hi in region):
        return
    mat = form.matrix
    p = _pivot(form)
    a = int(mat[p, p]) // 2
    span = max(max(abs(lo), abs(hi)) for lo, hi in region)
    bound = (int(np.abs(mat).sum()) * span * span + abs(N)) * (abs(a) + 1) * 8
    if bound >= _INT_LIMIT:
        raise BudgetExceeded("coordinates too large for exact 64-bit arithmetic")
    visited = 0
    sides = [hi - lo + 1 for lo, hi in region]
    if a == 0:
        total = math.prod(sides)
        if total > ENUM_BUDGET:
            raise BudgetExceeded(f"full enumeration of {total} points exceeds budget")
        first, rest = region[0], region[1:]
        for x1 in range(first[0], first[1] + 1):
            pts = _grid([(x1, x1)] + rest)
            visited += pts.shape[0]
            vals = np.einsum("ij,jk,ik->i", pts, mat, pts) // 2
            hit = pts[vals == N]
            if hit.size:
                yield hit
        if stats is not None:
            stats["visited"] = stats.get("visited", 0) + visited
        return
    others = [j for j in range(n) if j != p]
    total = math.prod(sides[j] for j in others)
    if total > ENUM_BUDGET:
        raise BudgetExceeded(f"enumeration of {total} tuples exceeds budget")
    sub = mat[np.ix_(others, others)]
    row = mat[p, others]
    plo, phi = region[p]
    outer = others[0]
    inner_ranges = [region[j] for j in others[1:]]
    tail = _grid(inner_ranges)
    for x_out in range(region[outer][0], region[outer][1] + 1):
        rest = np.concatenate([np.full((tail.shape[0], 1), x_out, dtype=np.int64), tail], axis=1)
        visited += rest.shape[0]
        b = rest @ row
        c = np.einsum("ij,jk,ik->i", rest, sub, rest) // 2 - N
        disc = b * b - 4 * a * c
        ok = disc >= 0
        if not ok.any():
            continue
        rest, b, disc = rest[ok], b[ok], disc[ok]
        r = _isqrt_exact(disc)
        square = r * r == disc
        rest, b, r = rest[square], b[square], r[square]
        for sgn in (1, -1):
            num = -b + sgn * r
            keep = (num % (2 * a) == 0)
            if sgn == -1:
                keep &= r != 0
            xp = num[keep] // (2 * a)
            inside = (xp >= plo) & (xp <= phi)
            if not inside.any():
                continue
            sol = np.empty((int(inside.sum()), n), dtype=np.int64)
            sol[:, others] = rest[keep][inside]
            sol[:, p] = xp[inside]
            yield sol
    if stats is not None:
        stats["visited"] = stats.get("visited", 0) + visited


def solutions_array(N: int, region, form: QuadraticForm, stats: dict | None = None) -> np.ndarray:
    chunks = list(_solution_chunks(N, region, form, stats))
    if not chunks:
        return np.zeros((0, form.n), dtype=np.int64)
    sols = np.concatenate(chunks)
    order = np.lexsort(sols.T[::-1])
    return sols[order]


def enumerate_solutions(N: int, region, form: QuadraticForm):
    """Yield every integer vector x in ``region`` with F(x) = N as a tuple."""
    for chunk in _solution_chunks(N, region, form):
        for row in chunk:
            yield tuple(int(v) for v in row)


# -- counts ------------------------------------------------------------------

def _in_rotated_box(sols, diag, lo, hi):
    ys = diag.rotate(sols)
    slack = 1e-9 * np.maximum(1.0, np.maximum(np.abs(lo), np.abs(hi)))
    return np.all((ys >= lo - slack) & (ys <= hi + slack), axis=1)


def count(N: int, weight: str, form: QuadraticForm, diag: Diagonalization,
          params: SmoothingParams, box: Box | None = None, tol: float = DEFAULT_TOL,
          dilation: float = 1.0) -> CountResult:
    """Weighted number of integer solutions of F(x) = N.

    char   exact count of solutions in P(dilation Gamma + c)
    gauss  sum of w(x) over solutions within P K^-A sqrt(log 1/tol) + n of P x0
    wplus / wminus  sum of W+/-(x) over solutions where W+/- can exceed tol
    """
    if weight not in WEIGHT_KINDS:
        raise QuadrepError(f"unknown weight {weight!r}; expected one of {WEIGHT_KINDS}")
    if weight != "gauss" and box is None:
        raise QuadrepError(f"weight {weight!r} needs a box")
    if weight != "char" and not 0 < tol < 1:
        raise QuadrepError("tol must lie in (0, 1)")
    P = params.P
    stats: dict = {}
    if weight == "char":
        region = bounding_region(box, diag, P, dilation)
        sols = solutions_array(N, region, form, stats)
        ivs = np.array(rotated_intervals(box, P, dilation))
        sols = sols[_in_rotated_box(sols, diag, ivs[:, 0], ivs[:, 1])] if len(sols) else sols
        value = float(len(sols))
    elif weight == "gauss":
        centre = P * np.array(params.x0)
        r = P * params.K ** (-params.A) * math.sqrt(math.log(1 / tol)) + form.n
        region = [(math.floor(c - r), math.ceil(c + r)) for c in centre]
        sols = solutions_array(N, region, form, stats)
        if len(sols):
            sols = sols[np.sum((sols - centre) ** 2, axis=1) <= r * r]
        value = float(np.sum(weight_w(sols, params))) if len(sols) else 0.0
    else:
        sign = 1 if weight == "wplus" else -1
        d = dilation_factor(P, params.A, sign)
        pad = P * params.K ** (-params.A) * math.sqrt(math.log(1 / tol)) + 1
        region = bounding_region(box, diag, P, d, pad)
        sols = solutions_array(N, region, form, stats)
        if len(sols):
            ivs = np.array(rotated_intervals(box, P, d))
            sols = sols[_in_rotated_box(sols, diag, ivs[:, 0] - pad, ivs[:, 1] + pad)]
        value = float(np.sum(weight_Wpm(sols, sign, params, box, diag))) if len(sols) else 0.0
    return CountResult(N, P, weight, value, stats.get("visited", 0), int(len(sols)))


# -- theta sums ----------------------------------------------------------------

def default_truncation_radius(params: SmoothingParams, n: int, mass: float = 1e-12) -> float:
    """Radius around P x0 outside which w carries < ``mass`` of its total."""
    rho2 = special.gammainccinv(n / 2, mass)
    return math.sqrt(rho2 / params.alpha) + 1.0


@lru_cache(maxsize=32)
def _theta_window(params: SmoothingParams, mat: tuple, N: int, radius: float):
    """Window weights grouped by the integer value m = F(x) - N."""
    form = QuadraticForm(mat, strict=False)
    centre = params.P * np.array(params.x0)
    lo = np.floor(centre - radius).astype(int)
    hi = np.ceil(centre + radius).astype(int)
    fm = form.matrix
    vals_all, w_all = [], []
    tail = _grid([(int(l), int(h)) for l, h in zip(lo[1:], hi[1:])])
    for x1 in range(int(lo[0]), int(hi[0]) + 1):
        pts = np.concatenate([np.full((tail.shape[0], 1), x1, dtype=np.int64), tail], axis=1)
        pts = pts[np.sum((pts - centre) ** 2, axis=1) <= radius * radius]
        if not len(pts):
            continue
        vals_all.append(np.einsum("ij,jk,ik->i", pts, fm, pts) // 2 - N)
        w_all.append(weight_w(pts, params))
    vals = np.concatenate(vals_all)
    w = np.concatenate(w_all)
    m, inv = np.unique(vals, return_inverse=True)
    grouped = np.bincount(inv, weights=w)
    m.setflags(write=False)
    grouped.setflags(write=False)
    return m, grouped, len(vals)


def theta_window(params: SmoothingParams, form: QuadraticForm, N: int, radius: float | None = None):
    if radius is None:
        radius = default_truncation_radius(params, form.n)
    return _theta_window(params, form.mat, int(N), float(radius))


def theta_sum(alpha, params: SmoothingParams, form: QuadraticForm, N: int,
              truncation_radius: float | None = None):
    """S(alpha) = sum of w(x) e(alpha (F(x) - N)) over the truncated window.

    Terms are grouped by the integer m = F(x) - N before the phase is applied.
    Accepts a scalar or an array of alphas.
    """
    m, wm, _ = theta_window(params, form, N, truncation_radius)
    a = np.asarray(alpha, dtype=float)
    out = np.exp(2j * math.pi * np.multiply.outer(a, m)) @ wm
    return complex(out) if out.ndim == 0 else out


def _theta_rational(num: int, den: int, z: float, m, wm):
    """S(num/den + z), reducing num*m modulo den exactly before exponentiating."""
    phase = roots_of_unity(den)[(num * m) % den]
    return complex(np.sum(wm * phase * np.exp(2j * math.pi * z * m)))


def fourier_count_check(N: int, params: SmoothingParams, form: QuadraticForm, diag: Diagonalization,
                        M: int | None = None, tol: float = DEFAULT_TOL,
                        truncation_radius: float | None = None):
    """(1/M) sum_j S(j/M) against the Gaussian-weighted solution count.

    Exact once M exceeds max |F(x) - N| over the window.  Returns
    (lhs, rhs, threshold).
    """
    m, wm, _ = theta_window(params, form, N, truncation_radius)
    threshold = int(np.max(np.abs(m))) + 1
    if M is None:
        M = threshold
    if M < threshold:
        raise QuadrepError(f"M = {M} is below the exactness threshold {threshold}")
    roots = roots_of_unity(M)
    j = np.arange(M, dtype=np.int64)
    total = 0j
    mm = m % M
    for start in range(0, M, 512):
        jj = j[start:start + 512]
        total += np.sum(roots[(jj[:, None] * mm[None, :]) % M] @ wm)
    lhs = total / M
    rhs = count(N, "gauss", form, diag, params, tol=tol).value
    return lhs, rhs, threshold


def poisson_b_radius(q: int, z: float, params: SmoothingParams) -> float:
    """B0 = q K^s (1/P + |z| P)."""
    return q * params.K ** params.s * (1 / params.P + abs(z) * params.P)


def all_expsums_mod(q: int, u: int, N: int, form: QuadraticForm) -> np.ndarray:
    """S_u(q, b, N) for every residue vector b mod q, as an n-dim array.

    S_u(q, b, N) is the discrete Fourier transform in v of
    phi(v) = sum_s e_q(u s + s'(F(v) - N)).
    """
    n = form.n
    grid = _grid([(0, q - 1)] * n)
    vals = (np.einsum("ij,jk,ik->i", grid, form.matrix, grid) // 2 - N) % q
    roots = roots_of_unity(q)
    phi = np.zeros(grid.shape[0], dtype=complex)
    for s in units(q):
        s = int(s)
        sbar = pow(s, -1, q) if q > 1 else 0
        phi += roots[(u * s) % q] * roots[(sbar * vals) % q]
    return np.fft.fftn(phi.reshape((q,) * n))


def poisson_check(q: int, u: int, z: float, params: SmoothingParams, form: QuadraticForm,
                  diag: Diagonalization, N: int, b_radius: float | None = None,
                  truncation_radius: float | None = None):
    """Both sides of S_u(q, z) = q^-n sum_b S_u(q, b) I(z, b/q).

    direct sums theta sums at s'/q + z; expanded sums the Poisson dual over
    |b| <= b_radius (default 2 B0).  Returns (direct, expanded).
    """
    n = form.n
    b0 = poisson_b_radius(q, z, params)
    if b_radius is None:
        b_radius = 2 * b0
    m, wm, _ = theta_window(params, form, N, truncation_radius)
    direct = 0j
    for s in units(q):
        s = int(s)
        sbar = pow(s, -1, q) if q > 1 else 0
        direct += roots_of_unity(q)[(u * s) % q] * _theta_rational(sbar, q, z, m, wm)
    table = all_expsums_mod(q, u, N, form)
    R = int(math.floor(b_radius))
    bs = _grid([(-R, R)] * n)
    bs = bs[np.sum(bs * bs, axis=1) <= b_radius * b_radius]
    svals = table[tuple((bs % q).T)]
    ivals = I_gaussian(z, bs / q, N, params, diag)
    expanded = complex(np.sum(svals * ivals)) / q ** n
    return direct, expanded
