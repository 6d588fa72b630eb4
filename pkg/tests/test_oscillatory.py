import itertools
import math
import warnings

import numpy as np
import pytest
from scipy import integrate

from oracles import gaussian_factor_quadrature, hermite_tensor, lattice_trapezoid
from quadrep.errors import DimensionError, QuadrepError
from quadrep.oscillatory import (I_gaussian, I_gaussian_envelope, fresnel_envelope, fresnel_interval,
                                 gaussian_factor, gaussian_factor_modulus, j_integral,
                                 singular_integral_char, singular_integral_gaussian,
                                 singular_integral_gaussian_closed, volume_density_oracle)
from quadrep.quadform import Box, QuadraticForm, SmoothingParams, diagonalize, dilation_factor

GRID = list(itertools.product((0.0, 0.01, 0.3), (0.5, 1.0, -2.0), (0.0, 0.05, -0.1), (0.0, 0.3, -1.0)))


def _exp_part(z, lam, beta, x0, P, K, A):
    alpha = P ** -2 * K ** (2 * A)
    a = alpha - 2j * math.pi * z * lam
    b = 2 * P * x0 * alpha + 2j * math.pi * beta
    c = -(P * x0) ** 2 * alpha
    return np.exp(c + b * b / (4 * a))


def test_gaussian_factor_trivial():
    for P, A in [(10, 1), (37.5, 2.5)]:
        K = math.log(P)
        assert complex(gaussian_factor(0.0, 1.3, 0.0, 0.0, P, K, A)) == pytest.approx(P, rel=1e-14)


def test_modulus_identity_random():
    rng = np.random.default_rng(3)
    for _ in range(1000):
        P = rng.uniform(2, 200)
        A = rng.uniform(0.2, 3)
        K = math.log(P)
        z, lam, beta, x0 = rng.normal(scale=(0.5, 2, 1, 1))
        lhs = abs(_exp_part(z, lam, beta, x0, P, K, A))
        rhs = gaussian_factor_modulus(z, lam, beta, x0, P, K, A)
        assert lhs == pytest.approx(rhs, rel=1e-10, abs=1e-300)


@pytest.mark.parametrize("z, lam, beta, x0", GRID)
def test_gaussian_factor_against_quadrature(z, lam, beta, x0):
    P, A = 10.0, 1.0
    K = math.log(P)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", integrate.IntegrationWarning)
        ref = gaussian_factor_quadrature(z, lam, beta, x0, P, K, A)
    got = complex(gaussian_factor(z, lam, beta, x0, P, K, A))
    assert abs(got - ref) <= 1e-6 * abs(ref)


def test_I_gaussian_trivial(squares_diag):
    p = SmoothingParams(7, 1.5, (0, 0, 0, 0))
    assert complex(I_gaussian(0.0, np.zeros(4), 5, p, squares_diag)) == pytest.approx(7 ** 4, rel=1e-13)


def test_I_gaussian_conjugate_symmetry(a4):
    d = diagonalize(a4)
    p = SmoothingParams(12, 1, (0.2, -0.1, 0.0, 0.3))
    beta = np.array([0.3, -0.2, 0.1, 0.05])
    for z in (1e-4, 0.01, 0.7, 5.0):
        plus = complex(I_gaussian(z, beta, 150, p, d))
        minus = complex(I_gaussian(-z, -beta, 150, p, d))
        assert abs(plus - minus.conjugate()) <= 1e-12 * abs(plus)


def test_I_gaussian_envelope(a4, indef):
    zs = np.logspace(-6, 3, 200)
    for form in (a4, indef):
        d = diagonalize(form)
        for P, A in [(10, 1), (50, 2)]:
            p = SmoothingParams(P, A, (0.1, 0.0, -0.2, 0.0))
            vals = np.abs(I_gaussian(zs, np.zeros(4), 7, p, d))
            assert np.all(vals <= I_gaussian_envelope(zs, p, d))


def test_I_gaussian_against_lattice_quadrature(a4):
    d = diagonalize(a4)
    p = SmoothingParams(5, 1, (0.1, 0.0, -0.2, 0.0))
    N, z = 3, 0.1
    centre = 5 * np.array(p.x0)

    def f(x):
        fx = 0.5 * np.einsum("ij,jk,ik->i", x, a4.matrix, x)
        return np.exp(-p.alpha * np.sum((x - centre) ** 2, 1) + 2j * math.pi * z * (fx - N))

    ref = lattice_trapezoid(f, centre, math.sqrt(25 / p.alpha), 0.4) * math.pi ** -2 * p.K ** 4
    got = complex(I_gaussian(z, np.zeros(4), N, p, d))
    assert abs(got - ref) <= 1e-4 * abs(ref)


@pytest.mark.parametrize("P, N", [(20, 400), (20, 37), (50, 2500), (50, 7001), (8, 1)])
def test_singular_integral_gaussian_closed_form(squares_diag, P, N):
    p = SmoothingParams(P, 1, (0, 0, 0, 0))
    est = singular_integral_gaussian(N, p, squares_diag)
    exact = singular_integral_gaussian_closed(N, p, 4)
    assert est.value == pytest.approx(exact, rel=1e-6)
    assert abs(est.value - exact) <= max(est.abs_error, 1e-12 * exact)
    assert np.imag(est.value) == 0
    assert est.method == "adaptive-quadrature"


def test_singular_integral_gaussian_zero_cases(squares_diag):
    p = SmoothingParams(20, 1, (0, 0, 0, 0))
    for N in (0, -5):
        est = singular_integral_gaussian(N, p, squares_diag)
        assert est.value == 0 and est.method == "closed-form"


def test_singular_integral_gaussian_tolerance_halving(squares_diag):
    p = SmoothingParams(50, 1, (0, 0, 0, 0))
    a = singular_integral_gaussian(2500, p, squares_diag, rtol=1e-6).value
    b = singular_integral_gaussian(2500, p, squares_diag, rtol=5e-7).value
    assert abs(a - b) <= 1e-5 * abs(a)


@pytest.mark.parametrize("form_name", ["a4", "indef"])
def test_singular_integral_gaussian_against_sampling(form_name, request):
    """I_w(N) = P^n * density of F(X) at N, X distributed like the weight."""
    form = request.getfixturevalue(form_name)
    d = diagonalize(form)
    p = SmoothingParams(10, 1, (0.1, 0.0, -0.1, 0.2))
    N = 40
    est = singular_integral_gaussian(N, p, d)
    rng = np.random.default_rng(11)
    samples, eps = 4_000_000, 2.0
    x = 10 * np.array(p.x0) + rng.normal(scale=math.sqrt(0.5 / p.alpha), size=(samples, 4))
    fx = 0.5 * np.einsum("ij,jk,ik->i", x, form.matrix.astype(float), x)
    frac = np.mean(np.abs(fx - N) < eps)
    mc = 10 ** 4 * frac / (2 * eps)
    se = 10 ** 4 * math.sqrt(frac * (1 - frac) / samples) / (2 * eps)
    # eps-smoothing bias is second order in eps; allow 4 standard errors plus 1%
    assert abs(est.value - mc) <= 4 * se + 0.01 * mc


def test_singular_integral_gaussian_cap(squares_diag):
    for P, N in [(20, 400), (50, 2500), (50, 100)]:
        p = SmoothingParams(P, 1, (0, 0, 0, 0))
        val = singular_integral_gaussian(N, p, squares_diag).value
        assert abs(val) <= 1e3 * P ** 2 * p.K ** (8 * p.A + 1)


def test_fresnel_zero_frequency():
    assert fresnel_interval(0.0, 2.0, -1.5, 3.0) == 4.5
    assert fresnel_interval(1.0, 2.0, 1.0, 1.0) == 0
    with pytest.raises(QuadrepError):
        fresnel_interval(1.0, 1.0, 2.0, 1.0)


@pytest.mark.filterwarnings("ignore::scipy.integrate.IntegrationWarning")
def test_fresnel_against_quadrature():
    rng = np.random.default_rng(5)
    for _ in range(100):
        z = rng.uniform(-3, 3)
        lam = rng.choice([-2.0, -0.5, 0.7, 1.0, 3.0])
        a, b = np.sort(rng.uniform(-6, 6, 2))
        w = 2 * math.pi * z * lam
        cycles = abs(z * lam) * max(a * a, b * b) + 1
        pts = np.linspace(a, b, int(4 * cycles) + 2)
        re = sum(integrate.quad(lambda v: math.cos(w * v * v), s, t, epsabs=0, epsrel=1e-12)[0]
                 for s, t in zip(pts[:-1], pts[1:]))
        im = sum(integrate.quad(lambda v: math.sin(w * v * v), s, t, epsabs=0, epsrel=1e-12)[0]
                 for s, t in zip(pts[:-1], pts[1:]))
        got = fresnel_interval(z, lam, a, b)
        assert abs(got - complex(re, im)) <= 1e-8 * abs(complex(re, im))


def test_fresnel_large_arguments_vectorized():
    zs = np.linspace(-400, 400, 2001)
    for lam, a, b in [(1.0, 30.0, 31.0), (-0.5, -50.0, 20.0), (2.0, -7.0, -6.5)]:
        vals = fresnel_interval(zs, lam, a, b)
        for z in zs[::250]:
            assert vals[np.searchsorted(zs, z)] == pytest.approx(fresnel_interval(z, lam, a, b), abs=1e-15)


def test_fresnel_envelope():
    for z, lam in itertools.product((0.5, 3.0, 40.0), (0.5, 1.0, -2.0)):
        for a, b in [(1.0, 2.0), (-3.0, 5.0), (-8.0, -1.0), (0.0, 10.0)]:
            if abs(z * lam) * min(abs(a), abs(b)) ** 2 < 1 and min(abs(a), abs(b)) > 0:
                continue
            assert abs(fresnel_interval(z, lam, a, b)) <= fresnel_envelope(z, lam)


def test_char_integral_sphere_inside_box(squares, squares_diag, cube2):
    for P in (20, 30):
        est = singular_integral_char(P * P, P, [(1, 1.0)], cube2, squares, squares_diag)
        exact = math.pi ** 2 * P * P  # surface measure of the 3-sphere over |grad F|
        assert est.value == pytest.approx(exact, rel=1e-6)
        assert abs(est.value - exact) <= est.abs_error


def test_char_integral_outside_range(squares, squares_diag, cube2):
    N = 17000  # F <= 6400 on 20 [-2, 2]^4
    est = singular_integral_char(N, 20, [(1, 1.0)], cube2, squares, squares_diag)
    assert abs(est.value) <= est.abs_error


def test_char_integral_against_monte_carlo(squares, squares_diag, cube2):
    P, N = 20, 400
    est = singular_integral_char(N, P, [(1, 1.0)], cube2, squares, squares_diag)
    mc = volume_density_oracle(N, P, cube2, squares, squares_diag, samples=4 * 10 ** 7, seed=1)
    assert abs(est.value - mc.value) <= 0.02 * est.value


def test_char_integral_shells(squares, squares_diag, cube2):
    P, A = 50, 3
    K = math.log(P)
    for sign in (1, -1):
        boxes = [(1, dilation_factor(P, A, sign)), (-1, 1.0)]
        for N in (P * P, 5 * P * P):
            est = singular_integral_char(N, P, boxes, cube2, squares, squares_diag)
            assert abs(est.value) <= 1e2 * P ** 2 * K ** (-A / 6)


def test_char_integral_indefinite_against_monte_carlo(indef):
    d = diagonalize(indef)
    box = Box((0.2, -0.1, 0.0, 0.3), (1.0, 0.8, 1.2, 0.9))
    P, N = 10, 13
    est = singular_integral_char(N, P, [(1, 1.0)], box, indef, d)
    mc = volume_density_oracle(N, P, box, indef, d, epsilon=1.0, samples=4 * 10 ** 6, seed=2)
    assert abs(est.value - mc.value) <= 4 * mc.std_error + 0.01 * abs(est.value)


def test_char_integral_rejects_three_variables():
    f = QuadraticForm(((2, 0, 0), (0, 2, 0), (0, 0, 2)), strict=False)
    with pytest.raises(DimensionError):
        singular_integral_char(4, 5, [(1, 1.0)], Box.cube(3, 1.0), f, diagonalize(f))


def test_j_integral_alpha_zero(a4):
    d = diagonalize(a4)
    x0 = (0.2, -0.4, 0.1, 0.3)
    from quadrep.quadform import evaluate_form
    for z in (0.0, 0.3, -1.7):
        expect = math.pi ** 2 * np.exp(2j * math.pi * z * (evaluate_form(a4, x0) - 50 / 100))
        assert j_integral(0.0, z, x0, 50, 10, a4, d) == pytest.approx(expect, rel=1e-12)


def test_j_integral_against_hermite(a4):
    d = diagonalize(a4)
    x0 = np.array([0.2, -0.1, 0.3, 0.0])
    z, alpha, N, P = 0.7, 0.3, 2.0, 5.0

    def f(t):
        x = alpha * t + x0
        fx = 0.5 * np.einsum("ij,jk,ik->i", x, a4.matrix, x)
        return np.exp(2j * math.pi * z * (fx - N / P ** 2))

    ref = hermite_tensor(f, 4, nodes=30)
    assert abs(j_integral(alpha, z, x0, N, P, a4, d) - ref) <= 1e-5 * abs(ref)


def test_j_integral_lipschitz(a4):
    d = diagonalize(a4)
    norm = np.abs(a4.matrix).sum(axis=1).max()
    for P, A in [(50, 1), (200, 2)]:
        K = math.log(P)
        delta = K ** -A
        for x0 in [(0, 0, 0, 0), (0.3, -0.5, 0.2, 0.1)]:
            C = 10 * (1 + np.linalg.norm(x0)) * norm
            for z in np.linspace(-K ** (A / 3), K ** (A / 3), 9):
                diff = abs(j_integral(delta, z, x0, P * P, P, a4, d) - j_integral(0, z, x0, P * P, P, a4, d))
                assert diff <= C * abs(z) * delta + 1e-12


def test_volume_oracle_basics(squares, squares_diag, cube2):
    assert volume_density_oracle(-10, 20, cube2, squares, squares_diag, samples=10 ** 4).value == 0
    a = volume_density_oracle(400, 20, cube2, squares, squares_diag, samples=10 ** 5, seed=3)
    b = volume_density_oracle(400, 20, cube2, squares, squares_diag, samples=10 ** 5, seed=3)
    assert a == b
    with pytest.raises(QuadrepError):
        volume_density_oracle(400, 20, cube2, squares, squares_diag, samples=100)
    with pytest.raises(QuadrepError):
        volume_density_oracle(400, 20, cube2, squares, squares_diag, epsilon=0.0)


def test_volume_oracle_standard_error_scaling(squares, squares_diag, cube2):
    se = {m: volume_density_oracle(400, 20, cube2, squares, squares_diag, samples=m, seed=4).std_error
          for m in (10 ** 6, 2 * 10 ** 6, 4 * 10 ** 6)}
    assert se[2 * 10 ** 6] / se[10 ** 6] == pytest.approx(1 / math.sqrt(2), rel=0.2)
    assert se[4 * 10 ** 6] / se[10 ** 6] == pytest.approx(0.5, rel=0.2)


def test_estimate_json(squares_diag):
    p = SmoothingParams(20, 1, (0, 0, 0, 0))
    d = singular_integral_gaussian(400, p, squares_diag).to_json()
    assert set(d) == {"value_re", "value_im", "abs_error", "z_cut", "method"}
