"""Archimedean side: Gaussian Fourier factors, singular integrals, Fresnel pieces.

Conventions: e(x) = exp(2 pi i x); alpha = P^-2 K^(2A) is the decay rate of
the Gaussian weight; starred quantities live in the rotated frame where
F(M y) = sum(lam_i y_i^2).
"""

from __future__ import annotations

import collections
import itertools
import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate, optimize, special

from .errors import DimensionError, QuadrepError
from .quadform import Box, Diagonalization, QuadraticForm, SmoothingParams, rotated_intervals
from .quadrature import gk15

TWO_PI = 2.0 * math.pi
METHODS = ("closed-form", "adaptive-quadrature", "monte-carlo")


@dataclass(frozen=True)
class IntegralEstimate:
    value: complex
    abs_error: float
    z_cut: float
    method: str
    std_error: float | None = None
    contour_shift: float = 0.0

    def to_json(self) -> dict:
        out = {"value_re": float(np.real(self.value)), "value_im": float(np.imag(self.value)),
               "abs_error": self.abs_error, "z_cut": self.z_cut, "method": self.method}
        if self.std_error is not None:
            out["std_error"] = self.std_error
        return out


# -- Gaussian weight -------------------------------------------------------

def _log_gaussian_factor(z, lam, beta_star, x0_star, P, K, A):
    alpha = P ** -2 * K ** (2 * A)
    a = alpha - 2j * math.pi * z * lam
    b = 2 * P * x0_star * alpha + 2j * math.pi * beta_star
    c = -(P * x0_star) ** 2 * alpha
    return A * math.log(K) - 0.5 * np.log(a) + c + b * b / (4 * a)


def gaussian_factor(z, lam, beta_star, x0_star, P, K, A):
    """One-dimensional factor K^A a^(-1/2) exp(c + b^2 / 4a), principal branch.

    Re a = alpha > 0 on the real z-axis, so the principal square root is the
    one obtained by continuity from z = 0.
    """
    return np.exp(_log_gaussian_factor(np.asarray(z, dtype=complex), lam, beta_star, x0_star, P, K, A))


def gaussian_factor_modulus(z, lam, beta_star, x0_star, P, K, A):
    """|exp(c + b^2/4a)| in the closed real form."""
    num = math.pi ** 2 * K ** (2 * A) * (2 * z * lam * x0_star + beta_star / P) ** 2
    den = P ** -4 * K ** (4 * A) + 4 * math.pi ** 2 * z ** 2 * lam ** 2
    return np.exp(-num / den)


def I_gaussian(z, beta, N, params: SmoothingParams, diag: Diagonalization):
    """I(z, beta) = integral of w(x) e(z(F(x) - N) + beta.x) over R^n.

    ``z`` may be complex (used for contour shifts) and either a scalar or a
    1-d array; ``beta`` is a vector of length n or an (m, n) array of them.
    """
    z = np.asarray(z, dtype=complex)
    beta = np.asarray(beta, dtype=float)
    beta_star = beta @ diag.M
    x0_star = np.array(params.x0) @ diag.M
    if z.ndim and beta_star.ndim == 2:
        raise DimensionError("vectorize over z or over beta, not both")
    zz = z[..., None] if z.ndim else z
    logs = _log_gaussian_factor(zz, diag.lambdas, beta_star, x0_star, params.P, params.K, params.A)
    total = logs.sum(axis=-1) - 2j * math.pi * z * N
    return np.exp(total)


def I_gaussian_envelope(z, params: SmoothingParams, diag: Diagonalization, const: float | None = None):
    """C K^(2An) min(P^n, |z|^(-n/2)) with C = 10^n prod max(1, |lam|^-1/2)."""
    n = len(diag.lambdas)
    if const is None:
        const = 10.0 ** n * float(np.prod(np.maximum(1.0, np.abs(diag.lambdas) ** -0.5)))
    z = np.abs(np.asarray(z, dtype=float))
    with np.errstate(divide="ignore"):
        decay = np.where(z > 0, z ** (-n / 2), np.inf)
    return const * params.K ** (2 * params.A * n) * np.minimum(params.P ** n, decay)


def _saddle_shift(N, params: SmoothingParams, diag: Diagonalization):
    """Imaginary shift eta minimizing |I(-i eta, 0)| along the imaginary axis.

    Returns None when the integrand can be pushed to zero (the density of F
    vanishes at N), otherwise eta.
    """
    lam = diag.lambdas
    alpha = params.alpha
    x0s = np.array(params.x0) @ diag.M
    pos, neg = lam[lam > 0], lam[lam < 0]
    hi = alpha / (TWO_PI * pos.max()) if pos.size else math.inf
    lo = alpha / (TWO_PI * neg.min()) if neg.size else -math.inf
    if (lo == -math.inf and N <= 0) or (hi == math.inf and N >= 0):
        return None
    P2 = params.P ** 2

    def h(eta):
        a = alpha - TWO_PI * eta * lam
        if np.any(a <= 0):
            return math.inf
        return (-TWO_PI * eta * N - 0.5 * np.sum(np.log(a))
                + np.sum(P2 * x0s ** 2 * alpha * TWO_PI * eta * lam / a))

    span = alpha / (TWO_PI * np.abs(lam).max()) + len(lam) / (math.pi * max(abs(N), 1e-300))
    a_lo = lo if lo > -math.inf else -10 * span
    a_hi = hi if hi < math.inf else 10 * span
    pad = 1e-12 * (a_hi - a_lo)
    res = optimize.minimize_scalar(h, bounds=(a_lo + pad, a_hi - pad), method="bounded",
                                   options={"xatol": 1e-14 * (a_hi - a_lo), "maxiter": 500})
    return float(res.x)


def singular_integral_gaussian(N, params: SmoothingParams, diag: Diagonalization,
                               rtol: float = 1e-6, max_panels: int = 2_000_000) -> IntegralEstimate:
    """I_w(N) = integral over R of I(z, 0) dz.

    The integration line is moved to Im z = -eta, with eta at the saddle on
    the imaginary axis; this removes the exp(-alpha N)-sized cancellation
    along the real axis.  The line integral is 2 Re of the half line by
    conjugate symmetry; [0, zCut] goes through adaptive Gauss-Kronrod and
    the tail through QUADPACK's Fourier-integral routine unless the
    |z|^(-n/2) envelope already bounds it below tolerance.
    """
    n = len(diag.lambdas)
    eta = _saddle_shift(N, params, diag)
    if eta is None:
        return IntegralEstimate(0.0, 0.0, 0.0, "closed-form")

    def f(t):
        return 2.0 * np.real(I_gaussian(t - 1j * eta, np.zeros(n), N, params, diag))

    lam = diag.lambdas
    a_shift = np.abs(params.alpha - TWO_PI * eta * lam)
    scale = float(np.min(a_shift / (TWO_PI * np.abs(lam))))
    z_cut = max(64.0 * scale, params.alpha / (TWO_PI * np.abs(lam).min()) * 2.0)
    panels = int(min(max(32, math.ceil(2 * z_cut * abs(N))), max_panels // 4))
    head = gk15(f, 0.0, z_cut, rtol=rtol * 1e-2, panels=panels, max_panels=max_panels)
    value = head.value.real
    err = head.abs_error

    damp = math.exp(-TWO_PI * eta * N)
    env_const = damp * params.K ** (params.A * n) * float(np.prod((TWO_PI * np.abs(lam)) ** -0.5))
    envelope = 2.0 * env_const * z_cut ** (1 - n / 2) / (n / 2 - 1) if n > 2 else math.inf
    if envelope <= 1e-2 * rtol * abs(value):
        err += envelope
    else:
        omega = TWO_PI * N
        eps = max(1e-3 * rtol * abs(value), 1e-300)

        def g_re(t):
            return np.real(I_gaussian(t - 1j * eta, np.zeros(n), N, params, diag)
                           * np.exp(2j * math.pi * t * N))

        def g_im(t):
            return np.imag(I_gaussian(t - 1j * eta, np.zeros(n), N, params, diag)
                           * np.exp(2j * math.pi * t * N))

        if omega == 0:
            tr, er = integrate.quad(g_re, z_cut, np.inf, limit=500, epsabs=eps, epsrel=0)
            tail, terr = 2 * tr, 2 * er
        else:
            tr, er = integrate.quad(g_re, z_cut, np.inf, weight="cos", wvar=abs(omega),
                                    limlst=200, epsabs=eps)
            ti, ei = integrate.quad(g_im, z_cut, np.inf, weight="sin", wvar=abs(omega),
                                    limlst=200, epsabs=eps)
            tail = 2 * (tr + math.copysign(1.0, omega) * ti)
            terr = 2 * (er + ei)
        value += tail
        err += terr
    return IntegralEstimate(value, err, z_cut, "adaptive-quadrature", contour_shift=eta)


def singular_integral_gaussian_closed(N, params: SmoothingParams, n: int) -> float:
    """Exact I_w(N) for sum of n squares with x0 = 0 (chi-square density)."""
    if N <= 0:
        return 0.0
    return (params.K ** (params.A * n) * N ** (n / 2 - 1) * math.exp(-params.alpha * N)
            / math.gamma(n / 2))


# -- Fresnel pieces --------------------------------------------------------

_SMALL = 4.0


def _E(x):
    s, c = special.fresnel(x)
    return c + 1j * s


def _T(x):
    """int_x^inf exp(i pi u^2 / 2) du for x >= 0."""
    fp, _ = special.modfresnelp(x * math.sqrt(math.pi / 2))
    return math.sqrt(2 / math.pi) * fp


def _fresnel_difference(sa, sb):
    """int_sa^sb exp(i pi u^2/2) du, elementwise, sa <= sb."""
    sa, sb = np.broadcast_arrays(np.asarray(sa, float), np.asarray(sb, float))
    out = np.empty(sa.shape, dtype=complex)
    big_same = ((sa >= _SMALL) | (sb <= -_SMALL)) & (np.sign(sa) == np.sign(sb))
    if np.any(big_same):
        a, b = sa[big_same], sb[big_same]
        sgn = np.sign(b)
        out[big_same] = sgn * (_T(np.abs(a)) - _T(np.abs(b)))
    rest = ~big_same
    if np.any(rest):
        a, b = sa[rest], sb[rest]
        ea = np.where(np.abs(a) <= _SMALL, _E(a), np.sign(a) * ((1 + 1j) / 2 - _T(np.abs(a))))
        eb = np.where(np.abs(b) <= _SMALL, _E(b), np.sign(b) * ((1 + 1j) / 2 - _T(np.abs(b))))
        out[rest] = eb - ea
    return out


def fresnel_interval(z, lam: float, a: float, b: float):
    """int_a^b e(z lam v^2) dv, vectorized over z."""
    if a > b:
        raise QuadrepError("fresnel_interval needs a <= b")
    z = np.asarray(z, dtype=float)
    zl = z * lam
    out = np.full(zl.shape, complex(b - a))
    nz = zl != 0
    if np.any(nz):
        c = 2.0 * np.sqrt(np.abs(zl[nz]))
        val = _fresnel_difference(c * a, c * b) / c
        out[nz] = np.where(zl[nz] > 0, val, np.conj(val))
    return out if out.ndim else complex(out)


def fresnel_envelope(z, lam: float, const: float = 3.0):
    return const * np.abs(np.asarray(z, dtype=float) * lam) ** -0.5


def _box_intervals(box: Box, P: float, boxes):
    out = []
    for sign, dil in boxes:
        out.append((float(sign), rotated_intervals(box, P, dil)))
    return out


def _char_integrand(z, N, lam, signed):
    z = np.asarray(z, dtype=float)
    acc = np.zeros(z.shape, dtype=complex)
    for sign, ivs in signed:
        prod = np.ones(z.shape, dtype=complex)
        # repeated (lam, interval) factors, as for cubes, are evaluated once
        reps = collections.Counter(zip(lam.tolist(), ivs))
        for (l, (lo, hi)), k in reps.items():
            prod *= fresnel_interval(z, l, lo, hi) ** k
        acc += sign * prod
    return acc * np.exp(-2j * math.pi * z * N)


def _tail_terms(lam, signed):
    """Leading coefficient and remainder-bound terms of the integrand at large z.

    Each factor is kappa z^(-1/2) + r(z) with |r(z)| <= rho / z, where kappa
    comes from the stationary point v = 0 and rho from the endpoints
    (|int_s^inf exp(i pi u^2/2) du| <= 2/(pi s)).
    """
    n = len(lam)
    kappa_total = 0j
    rem = []  # (coefficient, exponent) pairs of a bound sum c z^-e
    for sign, ivs in signed:
        kap, rho = [], []
        for l, (lo, hi) in zip(lam, ivs):
            w = 1.0 if lo < 0 < hi else (0.5 if (lo == 0) != (hi == 0) else 0.0)
            kap.append(w * (1 + 1j * math.copysign(1.0, l)) / (2 * math.sqrt(abs(l))))
            rho.append(sum(1.0 / (TWO_PI * abs(l) * abs(e)) for e in (lo, hi) if e != 0))
        kappa_total += sign * np.prod(kap)
        for size in range(1, n + 1):
            for S in itertools.combinations(range(n), size):
                coef = np.prod([rho[i] if i in S else abs(kap[i]) for i in range(n)])
                if coef:
                    rem.append((float(coef), (n + size) / 2))
    return kappa_total, rem


def _remainder_bound(rem, Z):
    return 2.0 * sum(c * Z ** (1 - e) / (e - 1) for c, e in rem)


def singular_integral_char(N, P: float, boxes, box: Box, form: QuadraticForm,
                           diag: Diagonalization, rtol: float = 1e-6,
                           max_panels: int = 4_000_000) -> IntegralEstimate:
    """I_chi(N) = int_R e(-zN) sum_k sign_k int_{P B_k} e(z F(x)) dx dz.

    ``boxes`` is a list of (sign, dilation) pairs applied to ``box``: [(1, 1)]
    is the box itself, [(1, d), (-1, 1)] the shell between the dilated box
    and the box.  Each inner integral factorizes into Fresnel pieces in the
    rotated frame.  [0, zCut] is integrated adaptively; beyond zCut the
    stationary-point term (a pure power times e(-zN)) is integrated exactly
    and the endpoint terms are bounded rigorously, the bound entering
    ``abs_error``.
    """
    n = form.n
    if n < 4:
        raise DimensionError("the characteristic singular integral needs n >= 4 "
                             "(|z|^(-n/2) is not integrable for n = 3)")
    lam = diag.lambdas
    signed = _box_intervals(box, P, boxes)
    omega_max = abs(N) + max(sum(abs(l) * max(lo * lo, hi * hi) for l, (lo, hi) in zip(lam, ivs))
                             for _, ivs in signed)
    ends = [abs(l) * e * e for _, ivs in signed for l, iv in zip(lam, ivs) for e in iv if e != 0]
    z_cut = 4.0 / min(ends)
    kappa, rem = _tail_terms(lam, signed)

    def f(z):
        return 2.0 * np.real(_char_integrand(z, N, lam, signed))

    def piece(za, zb, atol):
        panels = int(max(8, math.ceil((zb - za) * omega_max)))
        return gk15(f, za, zb, rtol=rtol * 1e-2, atol=atol, panels=panels, max_panels=max_panels)

    # mean density vol(PB) / range of F: the tolerance floor when I_chi ~ 0
    floor = max(float(np.prod([hi - lo for lo, hi in ivs])) for _, ivs in signed) / omega_max
    first = piece(0.0, z_cut, 1e-2 * rtol * floor)
    value, err = first.value.real, first.abs_error
    used = first.panels
    while _remainder_bound(rem, z_cut) > 0.25 * rtol * max(abs(value), floor):
        nxt = piece(z_cut, 2 * z_cut, 1e-3 * rtol * max(abs(value), floor))
        value += nxt.value.real
        err += nxt.abs_error
        used += nxt.panels
        z_cut *= 2
        if used > max_panels:
            break

    omega = TWO_PI * N
    p = n / 2
    if kappa != 0:
        if omega == 0:
            lead, lerr = z_cut ** (1 - p) / (p - 1), 0.0
            tail = 2 * kappa.real * lead
        else:
            c, ce = integrate.quad(lambda t: t ** -p, z_cut, np.inf, weight="cos", wvar=abs(omega))
            s, se = integrate.quad(lambda t: t ** -p, z_cut, np.inf, weight="sin", wvar=abs(omega))
            tail = 2 * (kappa.real * c + math.copysign(1.0, omega) * kappa.imag * s)
            lerr = 2 * abs(kappa) * (ce + se)
        value += tail
        err += lerr
    err += _remainder_bound(rem, z_cut)
    return IntegralEstimate(value, err, z_cut, "adaptive-quadrature")


# -- J integral ----------------------------------------------------------

def j_integral(alpha: float, z: float, x0, N, P: float, form: QuadraticForm, diag: Diagonalization):
    """J = int_{R^n} exp(-|x|^2) e(z (F(alpha x + x0) - N/P^2)) dx, closed form."""
    x0s = np.asarray(x0, dtype=float) @ diag.M
    lam = diag.lambdas
    a = 1 - 2j * math.pi * z * lam * alpha ** 2
    b = 4j * math.pi * z * lam * alpha * x0s
    c = 2j * math.pi * z * lam * x0s ** 2
    logs = 0.5 * math.log(math.pi) - 0.5 * np.log(a) + c + b * b / (4 * a)
    return complex(np.exp(np.sum(logs) - 2j * math.pi * z * N / P ** 2))


# -- Monte Carlo shell oracle ------------------------------------------------

def volume_density_oracle(N, P: float, box: Box, form: QuadraticForm, diag: Diagonalization,
                          epsilon: float | None = None, samples: int = 10**7, seed: int = 0,
                          batch: int = 10**6) -> IntegralEstimate:
    """(2 eps)^-1 vol{x in PB : |F(x) - N| < eps} by uniform sampling.

    Generator: numpy PCG64, one child SeedSequence per batch of ``batch``
    samples, so the estimate only depends on (seed, samples, batch).
    """
    if samples < 10**4:
        raise QuadrepError("need at least 10^4 samples")
    if epsilon is None:
        epsilon = abs(N) / 100 if N != 0 else 1.0
    if not epsilon > 0:
        raise QuadrepError("epsilon must be positive")
    vol = box.volume(P)
    if not vol > 0:
        raise QuadrepError("box has zero volume")
    lo = P * (np.array(box.c_star) - np.array(box.gamma_star))
    hi = P * (np.array(box.c_star) + np.array(box.gamma_star))
    mat = form.matrix.astype(float)
    nb = -(-samples // batch)
    children = np.random.SeedSequence(seed).spawn(nb)
    hits = 0
    left = samples
    for child in children:
        m = min(batch, left)
        left -= m
        rng = np.random.Generator(np.random.PCG64(child))
        ys = lo + (hi - lo) * rng.random((m, form.n))
        xs = ys @ diag.M.T
        vals = 0.5 * np.einsum("ij,jk,ik->i", xs, mat, xs)
        hits += int(np.count_nonzero(np.abs(vals - N) < epsilon))
    frac = hits / samples
    scale = vol / (2 * epsilon)
    se = scale * math.sqrt(frac * (1 - frac) / samples)
    return IntegralEstimate(scale * frac, se, 0.0, "monte-carlo", std_error=se)
