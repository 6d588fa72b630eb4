"""Slow, obviously-correct reference implementations used only by the tests."""

import cmath
import itertools
import math


def form_value(mat, x):
    n = len(x)
    return sum(mat[i][j] * x[i] * x[j] for i in range(n) for j in range(n)) // 2


def brute_expsum(q, u, b, N, mat):
    """Literal double sum over units s and all v mod q."""
    n = len(mat)
    total = 0j
    for s in range(q):
        if math.gcd(s, q) != 1:
            continue
        sbar = pow(s, -1, q) if q > 1 else 0
        for v in itertools.product(range(q), repeat=n):
            arg = sbar * (form_value(mat, v) - N) + u * s - sum(bi * vi for bi, vi in zip(b, v))
            total += cmath.exp(2j * math.pi * (arg % q) / q)
    return total


def brute_count_mod(q, N, mat):
    n = len(mat)
    return sum(1 for v in itertools.product(range(q), repeat=n) if (form_value(mat, v) - N) % q == 0)


def brute_solutions(N, region, mat):
    ranges = [range(lo, hi + 1) for lo, hi in region]
    return sorted(x for x in itertools.product(*ranges) if form_value(mat, x) == N)


def brute_r4(N):
    r = math.isqrt(N)
    return sum(1 for x in itertools.product(range(-r, r + 1), repeat=4) if sum(v * v for v in x) == N)


def squarefull_sieve(X):
    """Square-full x <= X via smallest-prime-factor sieve."""
    spf = list(range(X + 1))
    for p in range(2, math.isqrt(X) + 1):
        if spf[p] == p:
            for m in range(p * p, X + 1, p):
                if spf[m] == m:
                    spf[m] = p
    out = [1] if X >= 1 else []
    for x in range(2, X + 1):
        y, ok = x, True
        while y > 1:
            p, e = spf[y], 0
            while y % p == 0:
                y //= p
                e += 1
            if e == 1:
                ok = False
                break
        if ok:
            out.append(x)
    return out


def gaussian_factor_quadrature(z, lam, beta_star, x0_star, P, K, A):
    """(K^A / sqrt(pi)) int exp(-alpha (x - P x0)^2) e(z lam x^2 + beta x) dx by QUADPACK."""
    import numpy as np
    from scipy import integrate

    alpha = P ** -2 * K ** (2 * A)
    centre = P * x0_star
    half = 12 / math.sqrt(alpha)

    def phase(x):
        return 2 * math.pi * (z * lam * x * x + beta_star * x)

    def re(x):
        return math.exp(-alpha * (x - centre) ** 2) * math.cos(phase(x))

    def im(x):
        return math.exp(-alpha * (x - centre) ** 2) * math.sin(phase(x))

    lo, hi = centre - half, centre + half
    cycles = abs(z * lam) * max(lo * lo, hi * hi) + abs(beta_star) * half * 2
    pts = np.linspace(lo, hi, int(min(2000, 4 + 2 * cycles)))
    total = 0j
    for a, b in zip(pts[:-1], pts[1:]):
        total += complex(integrate.quad(re, a, b, epsabs=0, epsrel=1e-10, limit=200)[0],
                         integrate.quad(im, a, b, epsabs=0, epsrel=1e-10, limit=200)[0])
    return K ** A / math.sqrt(math.pi) * total


def hermite_tensor(f, n, nodes=40, chunk_dim=1):
    """int_{R^n} exp(-|t|^2) f(t) dt by a tensor Gauss-Hermite rule; f takes (m, n) arrays."""
    import numpy as np

    t, w = np.polynomial.hermite.hermgauss(nodes)
    total = 0j
    rest = np.stack(np.meshgrid(*([t] * (n - 1)), indexing="ij"), axis=-1).reshape(-1, n - 1)
    wrest = np.prod(np.stack(np.meshgrid(*([w] * (n - 1)), indexing="ij"), axis=-1).reshape(-1, n - 1), axis=1)
    for ti, wi in zip(t, w):
        pts = np.concatenate([np.full((rest.shape[0], 1), ti), rest], axis=1)
        total += wi * np.sum(wrest * f(pts))
    return total


def lattice_trapezoid(f, centre, radius, h):
    """h^n * sum of f over the grid centre + h Z^n inside a ball; f takes (m, n) arrays.

    For analytic integrands with Gaussian decay this converges spectrally in h.
    """
    import numpy as np

    n = len(centre)
    ax = np.arange(-math.ceil(radius / h), math.ceil(radius / h) + 1) * h
    rest = np.stack(np.meshgrid(*([ax] * (n - 1)), indexing="ij"), -1).reshape(-1, n - 1)
    total = 0j
    for x1 in ax:
        pts = np.concatenate([np.full((len(rest), 1), x1), rest], 1)
        pts = pts[np.sum(pts ** 2, 1) <= radius * radius] + centre
        total += np.sum(f(pts))
    return total * h ** n


def grid_solutions(N, region, mat):
    """Every integer point of ``region`` with F(x) = N, by evaluating F on the full grid."""
    import numpy as np

    axes = [np.arange(lo, hi + 1) for lo, hi in region]
    pts = np.stack(np.meshgrid(*axes, indexing="ij"), -1).reshape(-1, len(region))
    vals = np.einsum("ij,jk,ik->i", pts, np.array(mat), pts) // 2
    return sorted(map(tuple, pts[vals == N].tolist()))
