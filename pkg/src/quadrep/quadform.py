"""Quadratic forms, their orthogonal diagonalization and box geometry.

A form is given by its integer matrix ``mat`` with F(x) = x^T mat x / 2.  The
diagonal of ``mat`` must be even so that F is integer valued on Z^n.  Boxes
are stored in the rotated frame, where the diagonalizing matrix M turns F
into sum(lam_i * y_i**2) and the box edges are parallel to the axes.
"""

from __future__ import annotations

import json
import math
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import DimensionError, QuadrepError, SingularFormError

X0_BOUND = 4.0


def _bareiss_det(rows: list[list[int]]) -> int:
    """Exact integer determinant by fraction-free elimination."""
    a = [list(r) for r in rows]
    n = len(a)
    sign = 1
    prev = 1
    for k in range(n - 1):
        if a[k][k] == 0:
            for r in range(k + 1, n):
                if a[r][k] != 0:
                    a[k], a[r] = a[r], a[k]
                    sign = -sign
                    break
            else:
                return 0
        for i in range(k + 1, n):
            for j in range(k + 1, n):
                a[i][j] = (a[i][j] * a[k][k] - a[i][k] * a[k][j]) // prev
        prev = a[k][k]
    return sign * a[n - 1][n - 1]


@dataclass(frozen=True)
class QuadraticForm:
    """Integral quadratic form F(x) = x^T mat x / 2.

    ``strict`` enforces the working dimension policy: n >= 4, n == 3 is
    accepted with a warning on stderr, n < 3 is rejected.  Low-dimensional
    forms can still be built with ``strict=False`` for algebraic checks.
    """

    mat: tuple[tuple[int, ...], ...]
    strict: bool = field(default=True, compare=False)

    def __post_init__(self):
        rows = tuple(tuple(int(v) for v in r) for r in self.mat)
        object.__setattr__(self, "mat", rows)
        n = len(rows)
        if n == 0 or any(len(r) != n for r in rows):
            raise DimensionError("form matrix must be square and non-empty")
        for i in range(n):
            if rows[i][i] % 2:
                raise QuadrepError(f"diagonal entry {i} of the form matrix is odd")
            for j in range(i):
                if rows[i][j] != rows[j][i]:
                    raise QuadrepError("form matrix is not symmetric")
        if self.strict:
            if n < 3:
                raise DimensionError(f"need at least 3 variables, got {n}")
            if n == 3:
                print("warning: n = 3 is below the range n >= 4 where the asymptotic "
                      "formula is established", file=sys.stderr)

    @classmethod
    def sum_of_squares(cls, n: int = 4) -> "QuadraticForm":
        return cls(tuple(tuple(2 if i == j else 0 for j in range(n)) for i in range(n)))

    @property
    def n(self) -> int:
        return len(self.mat)

    @property
    def det(self) -> int:
        return _bareiss_det([list(r) for r in self.mat])

    @property
    def matrix(self) -> np.ndarray:
        return np.array(self.mat, dtype=np.int64)

    def is_sum_of_squares(self) -> bool:
        return self == QuadraticForm.sum_of_squares(self.n) if self.n >= 3 else False

    def blocks(self) -> list[list[int]]:
        """Index sets of the connected components of the cross-term graph."""
        n = self.n
        seen = [False] * n
        comps = []
        for start in range(n):
            if seen[start]:
                continue
            stack, comp = [start], []
            seen[start] = True
            while stack:
                i = stack.pop()
                comp.append(i)
                for j in range(n):
                    if not seen[j] and self.mat[i][j] != 0:
                        seen[j] = True
                        stack.append(j)
            comps.append(sorted(comp))
        return comps

    def inverse_mod(self, p: int) -> np.ndarray:
        """Inverse of the form matrix modulo a prime p not dividing det."""
        n = self.n
        a = [[self.mat[i][j] % p for j in range(n)] + [int(i == j) for j in range(n)]
             for i in range(n)]
        for col in range(n):
            piv = next((r for r in range(col, n) if a[r][col] % p), None)
            if piv is None:
                raise SingularFormError(f"form matrix is singular modulo {p}")
            a[col], a[piv] = a[piv], a[col]
            inv = pow(a[col][col], -1, p)
            a[col] = [v * inv % p for v in a[col]]
            for r in range(n):
                if r != col and a[r][col]:
                    f = a[r][col]
                    a[r] = [(v - f * w) % p for v, w in zip(a[r], a[col])]
        return np.array([row[n:] for row in a], dtype=np.int64)


def evaluate_form(form: QuadraticForm, x):
    """F(x) = x^T mat x / 2.  Exact Python int for integer input."""
    if len(x) != form.n:
        raise DimensionError(f"vector of length {len(x)} for a form in {form.n} variables")
    if all(isinstance(v, (int, np.integer)) for v in x):
        xi = [int(v) for v in x]
        total = 0
        for i, row in enumerate(form.mat):
            total += xi[i] * sum(c * v for c, v in zip(row, xi))
        return total // 2
    xv = np.asarray(x, dtype=float)
    return 0.5 * float(xv @ form.matrix @ xv)


@dataclass(frozen=True)
class Diagonalization:
    M: np.ndarray
    lambdas: np.ndarray

    def rotate(self, x) -> np.ndarray:
        """Rotated-frame coordinates M^T x (works on stacked rows too)."""
        return np.asarray(x, dtype=float) @ self.M


def diagonalize(form: QuadraticForm, tol: float = 1e-12, max_sweeps: int = 60) -> Diagonalization:
    """Orthogonal diagonalization of mat/2 by cyclic Jacobi rotations.

    Eigenvalues come out sorted in descending order and the first nonzero
    entry of every eigenvector is made positive.
    """
    if form.det == 0:
        raise SingularFormError("form is singular (det = 0)")
    a = 0.5 * form.matrix.astype(float)
    n = form.n
    v = np.eye(n)
    scale = max(np.abs(a).max(), 1.0)
    for _ in range(max_sweeps):
        off = np.sqrt(np.sum(np.triu(a, 1) ** 2))
        if off <= tol * scale:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                if abs(a[p, q]) <= 1e-300:
                    continue
                theta = (a[q, q] - a[p, p]) / (2.0 * a[p, q])
                t = math.copysign(1.0, theta) / (abs(theta) + math.hypot(theta, 1.0))
                c = 1.0 / math.hypot(t, 1.0)
                s = t * c
                rot = np.eye(n)
                rot[p, p] = rot[q, q] = c
                rot[p, q] = s
                rot[q, p] = -s
                a = rot.T @ a @ rot
                v = v @ rot
    else:
        raise QuadrepError("Jacobi iteration did not converge")
    lam = np.diag(a).copy()
    order = np.argsort(-lam, kind="stable")
    lam = lam[order]
    v = v[:, order]
    for j in range(n):
        col = v[:, j]
        k = int(np.flatnonzero(np.abs(col) > 1e-14)[0])
        if col[k] < 0:
            v[:, j] = -col
    if np.min(np.abs(lam)) <= 0:
        raise SingularFormError("zero eigenvalue")
    return Diagonalization(M=v, lambdas=lam)


@dataclass(frozen=True)
class Box:
    """Hyperrectangle B = M * prod[c*_i - g*_i, c*_i + g*_i] in the rotated frame."""

    c_star: tuple[float, ...]
    gamma_star: tuple[float, ...]

    def __post_init__(self):
        c = tuple(float(v) for v in self.c_star)
        g = tuple(float(v) for v in self.gamma_star)
        if len(c) != len(g):
            raise DimensionError("box centre and half-widths differ in length")
        if any(not v > 0 for v in g):
            raise QuadrepError("box half-widths must be positive")
        object.__setattr__(self, "c_star", c)
        object.__setattr__(self, "gamma_star", g)

    @classmethod
    def cube(cls, n: int, half_width: float, centre: float = 0.0) -> "Box":
        return cls((centre,) * n, (half_width,) * n)

    @property
    def n(self) -> int:
        return len(self.c_star)

    def centre(self, diag: Diagonalization) -> np.ndarray:
        """Standard-frame centre c = M c*."""
        return diag.M @ np.array(self.c_star)

    def volume(self, P: float = 1.0) -> float:
        return float(np.prod(2.0 * P * np.array(self.gamma_star)))


def rotated_intervals(box: Box, P: float, dilation: float = 1.0) -> list[tuple[float, float]]:
    """Rotated-frame intervals of P((dilation * Gamma) + c)."""
    if not dilation > 0:
        raise QuadrepError("dilation must be positive")
    return [(P * (c - dilation * g), P * (c + dilation * g))
            for c, g in zip(box.c_star, box.gamma_star)]


def bounding_region(box: Box, diag: Diagonalization, P: float, dilation: float = 1.0,
                    pad: float = 0.0) -> list[tuple[int, int]]:
    """Integer standard-frame bounding intervals of the dilated box P(dB + c).

    ``pad`` widens every rotated half-width before mapping back; one extra
    unit on each side guards against rounding in the rotation.
    """
    c = P * np.array(box.c_star)
    g = P * dilation * np.array(box.gamma_star) + pad
    centre = diag.M @ c
    half = np.abs(diag.M) @ g
    return [(math.floor(lo) - 1, math.ceil(hi) + 1) for lo, hi in zip(centre - half, centre + half)]


def dilation_factor(P: float, A: float, sign: int) -> float:
    """1 +/- K^(-A/2) with K = log P."""
    return 1.0 + sign * math.log(P) ** (-A / 2.0)


@dataclass(frozen=True)
class SmoothingParams:
    P: float
    A: float
    x0: tuple[float, ...]
    x0_bound: float = X0_BOUND

    def __post_init__(self):
        if not self.P >= 2:
            raise QuadrepError("P must be at least 2")
        if not self.A > 0:
            raise QuadrepError("A must be positive")
        x0 = tuple(float(v) for v in self.x0)
        object.__setattr__(self, "x0", x0)
        if math.sqrt(sum(v * v for v in x0)) > self.x0_bound:
            raise QuadrepError(f"|x0| exceeds the configured bound {self.x0_bound}")

    @property
    def K(self) -> float:
        return math.log(self.P)

    @property
    def s(self) -> float:
        return 2.0 + self.A

    @property
    def delta(self) -> float:
        return self.K ** (-self.A)

    @property
    def Q(self) -> int:
        return math.floor(self.P)

    @property
    def alpha(self) -> float:
        """Gaussian decay rate P^-2 K^2A of the weight."""
        return self.P ** -2 * self.K ** (2 * self.A)


def load_form(path) -> QuadraticForm:
    """Read ``{"matrix": [[...], ...]}`` from a JSON file."""
    data = _read_json(path)
    if set(data) - {"matrix", "name"}:
        raise QuadrepError(f"{path}: unknown form fields {sorted(set(data) - {'matrix', 'name'})}")
    return QuadraticForm(tuple(tuple(r) for r in data["matrix"]))


def load_box(path) -> Box:
    """Read ``{"c_star": [...], "gamma_star": [...]}`` (rotated frame)."""
    data = _read_json(path)
    extra = set(data) - {"c_star", "gamma_star", "name"}
    if extra:
        raise QuadrepError(f"{path}: unknown box fields {sorted(extra)}")
    return Box(tuple(data["c_star"]), tuple(data["gamma_star"]))


def _read_json(path):
    try:
        return json.loads(Path(path).read_text())
    except OSError as exc:
        raise QuadrepError(f"cannot read {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise QuadrepError(f"{path}: invalid JSON: {exc}") from exc
