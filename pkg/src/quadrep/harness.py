"""Convergence experiments: counts against singular integral times singular series.

Configuration is one JSON file (``schema_version`` 1)::

    {
      "schema_version": 1,
      "form": "form.json",            # paths relative to the config file
      "box": "box.json",
      "P_values": [21, 41, 81],       # strictly increasing
      "N_rule": {"kind": "nearest_odd_square"},   # or {"kind": "fixed", "N": 961}
                                                  # or {"kind": "scaled", "c": 1.0}
      "A": 1.0,
      "Qmax": 400,
      "quad_rtol": 1e-6,
      "count_tol": 1e-9,
      "x0": null,                     # null means the box centre
      "seed": 0,
      "mc_samples": 0,                # > 0 adds a Monte Carlo estimate of I_char
      "checks": ["char", "gauss", "series", "jacobi"],
      "record_timings": false,
      "output": null
    }

Unknown keys are rejected.  Rows are emitted in order of P.
"""

from __future__ import annotations

import csv
import io
import json
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .counting import count
from .errors import QuadrepError
from .oscillatory import singular_integral_char, singular_integral_gaussian, volume_density_oracle
from .quadform import Box, QuadraticForm, SmoothingParams, diagonalize, load_box, load_form
from .singseries import singular_series

SCHEMA_VERSION = 1
CHECKS = ("char", "gauss", "series", "jacobi")
N_RULES = ("nearest_odd_square", "fixed", "scaled")

ROW_FIELDS = (
    "P", "N", "R_char", "R_gauss", "I_char", "I_char_err", "I_gauss", "I_gauss_err",
    "S_trunc", "S_tail_slope", "ratio_char", "ratio_gauss", "jacobi", "sphere_contained",
    "I_mc", "I_mc_se", "flags", "error", "timings",
)
TIMING_STAGES = ("count_char", "count_gauss", "integral_char", "integral_gauss", "series", "monte_carlo")
CSV_FIELDS = ROW_FIELDS[:-1] + tuple(f"t_{s}" for s in TIMING_STAGES)


def jacobi_r4(N: int) -> int:
    """8 * sum of divisors d of N with 4 not dividing d."""
    if N < 1:
        raise QuadrepError("jacobi_r4 needs N >= 1")
    total = 0
    for d in range(1, math.isqrt(N) + 1):
        if N % d == 0:
            for e in {d, N // d}:
                if e % 4:
                    total += e
    return 8 * total


@dataclass
class ExperimentConfig:
    form: str
    box: str
    P_values: list
    N_rule: dict = field(default_factory=lambda: {"kind": "nearest_odd_square"})
    A: float = 1.0
    Qmax: int = 400
    quad_rtol: float = 1e-6
    count_tol: float = 1e-9
    x0: list | None = None
    seed: int = 0
    mc_samples: int = 0
    checks: list = field(default_factory=lambda: list(CHECKS))
    record_timings: bool = False
    output: str | None = None
    schema_version: int = SCHEMA_VERSION
    base_dir: str = "."

    def __post_init__(self):
        if self.schema_version != SCHEMA_VERSION:
            raise QuadrepError(f"unsupported schema_version {self.schema_version}")
        ps = list(self.P_values)
        if any(b <= a for a, b in zip(ps, ps[1:])):
            raise QuadrepError("P_values must be strictly increasing")
        if any(not p >= 2 for p in ps):
            raise QuadrepError("every P must be at least 2")
        kind = self.N_rule.get("kind")
        if kind not in N_RULES:
            raise QuadrepError(f"unknown N_rule kind {kind!r}")
        allowed = {"nearest_odd_square": set(), "fixed": {"N"}, "scaled": {"c"}}[kind]
        if set(self.N_rule) - {"kind"} != allowed:
            raise QuadrepError(f"N_rule {kind!r} takes exactly the fields {sorted(allowed)}")
        bad = set(self.checks) - set(CHECKS)
        if bad:
            raise QuadrepError(f"unknown checks {sorted(bad)}")
        if self.Qmax < 1 or self.mc_samples < 0:
            raise QuadrepError("Qmax must be positive and mc_samples non-negative")
        for name in ("form", "box"):
            if not self.path(getattr(self, name)).is_file():
                raise QuadrepError(f"{name} file {self.path(getattr(self, name))} does not exist")

    def path(self, p) -> Path:
        p = Path(p)
        return p if p.is_absolute() else Path(self.base_dir) / p

    @classmethod
    def from_dict(cls, data: dict, base_dir=".") -> "ExperimentConfig":
        known = set(cls.__dataclass_fields__) - {"base_dir"}
        extra = set(data) - known
        if extra:
            raise QuadrepError(f"unknown config fields {sorted(extra)}")
        if "schema_version" not in data:
            raise QuadrepError("config needs a schema_version field")
        for key in ("form", "box", "P_values"):
            if key not in data:
                raise QuadrepError(f"config is missing {key!r}")
        return cls(**data, base_dir=str(base_dir))

    @classmethod
    def load(cls, path) -> "ExperimentConfig":
        path = Path(path)
        try:
            data = json.loads(path.read_text())
        except OSError as exc:
            raise QuadrepError(f"cannot read config {path}: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise QuadrepError(f"{path}: invalid JSON: {exc}") from exc
        return cls.from_dict(data, base_dir=path.parent)


@dataclass
class ConvergenceRow:
    P: float
    N: int | None = None
    R_char: float | None = None
    R_gauss: float | None = None
    I_char: float | None = None
    I_char_err: float | None = None
    I_gauss: float | None = None
    I_gauss_err: float | None = None
    S_trunc: float | None = None
    S_tail_slope: float | None = None
    ratio_char: float | None = None
    ratio_gauss: float | None = None
    jacobi: int | None = None
    sphere_contained: bool | None = None
    I_mc: float | None = None
    I_mc_se: float | None = None
    flags: list = field(default_factory=list)
    error: str | None = None
    timings: dict | None = None

    def to_dict(self) -> dict:
        d = asdict(self)
        return {k: d[k] for k in ROW_FIELDS}


def choose_N(P: float, rule: dict) -> int:
    kind = rule["kind"]
    if kind == "fixed":
        return int(rule["N"])
    if kind == "scaled":
        return math.floor(rule["c"] * P * P)
    sq = P * P
    lo = math.floor(sq)
    # nearest odd integer; an even square sits between two odds, take the upper one
    cands = [lo - 1, lo, lo + 1, lo + 2]
    odd = [m for m in cands if m % 2]
    return min(odd, key=lambda m: (abs(m - sq), -m))


def sphere_contained(N: int, P: float, box: Box, diag) -> bool:
    """Whether {F = N} lies inside PB, for a positive definite form."""
    lam = diag.lambdas
    if np.any(lam <= 0) or N < 0:
        return False
    r = np.sqrt(N / lam)
    c = P * np.array(box.c_star)
    g = P * np.array(box.gamma_star)
    return bool(np.all(c - g <= -r) and np.all(r <= c + g))


def _ratio(num, den, row, name, den_err=0.0):
    """num / den, or None with a flag when den cannot be told apart from zero."""
    if num is None or den is None:
        return None
    if not math.isfinite(den) or abs(den) <= den_err:
        row.flags.append(f"{name}_zero_denominator")
        return None
    return num / den


def run_row(P: float, config: ExperimentConfig, form: QuadraticForm, box: Box) -> ConvergenceRow:
    """One row of the sweep; any stage error is recorded and the row returned."""
    row = ConvergenceRow(P=P)
    timings = {}

    def stage(name, fn):
        t0 = time.perf_counter()
        try:
            return fn()
        finally:
            timings[name] = time.perf_counter() - t0

    try:
        diag = diagonalize(form)
        N = choose_N(P, config.N_rule)
        row.N = N
        x0 = tuple(config.x0) if config.x0 is not None else tuple(float(v) for v in box.centre(diag))
        params = SmoothingParams(P, config.A, x0)
        checks = set(config.checks)
        if "char" in checks:
            row.R_char = stage("count_char", lambda: count(N, "char", form, diag, params, box)).value
            est = stage("integral_char", lambda: singular_integral_char(
                N, P, [(1, 1.0)], box, form, diag, rtol=config.quad_rtol))
            row.I_char, row.I_char_err = float(np.real(est.value)), float(est.abs_error)
        if "gauss" in checks:
            row.R_gauss = stage("count_gauss", lambda: count(
                N, "gauss", form, diag, params, tol=config.count_tol)).value
            est = stage("integral_gauss", lambda: singular_integral_gaussian(
                N, params, diag, rtol=config.quad_rtol))
            row.I_gauss, row.I_gauss_err = float(np.real(est.value)), float(est.abs_error)
        if "series" in checks:
            ser = stage("series", lambda: singular_series(N, config.Qmax, form))
            row.S_trunc, row.S_tail_slope = ser.value, ser.tail_slope
        if config.mc_samples:
            est = stage("monte_carlo", lambda: volume_density_oracle(
                N, P, box, form, diag, samples=config.mc_samples, seed=config.seed))
            row.I_mc, row.I_mc_se = float(np.real(est.value)), float(est.std_error)
        if "jacobi" in checks and form.is_sum_of_squares() and form.n == 4 and N >= 1:
            row.jacobi = jacobi_r4(N)
            row.sphere_contained = sphere_contained(N, P, box, diag)
            if row.sphere_contained and row.R_char is not None and row.R_char != row.jacobi:
                row.flags.append("jacobi_mismatch")
        if row.S_trunc is not None:
            if row.I_char is not None:
                row.ratio_char = _ratio(row.R_char, row.I_char * row.S_trunc, row, "char",
                                       row.I_char_err * abs(row.S_trunc))
            if row.I_gauss is not None:
                row.ratio_gauss = _ratio(row.R_gauss, row.I_gauss * row.S_trunc, row, "gauss",
                                        row.I_gauss_err * abs(row.S_trunc))
    except Exception as exc:  # noqa: BLE001 - recorded per row by design
        row.error = f"{type(exc).__name__}: {exc}"
    if config.record_timings:
        row.timings = {k: timings.get(k) for k in TIMING_STAGES}
    return row


def run_convergence(config: ExperimentConfig, sink=None, threads: int = 1) -> list[ConvergenceRow]:
    """Run every P of the config; ``sink(row)`` is called in order of P as rows finish."""
    form = load_form(config.path(config.form))
    box = load_box(config.path(config.box))
    if box.n != form.n:
        raise QuadrepError("box and form dimensions differ")
    rows = []
    prev_dev = None

    def deliver(row):
        nonlocal prev_dev
        if row.ratio_char is not None:
            dev = abs(row.ratio_char - 1)
            if prev_dev is not None and dev > prev_dev:
                row.flags.append("trend_inversion")
            prev_dev = dev
        rows.append(row)
        if sink is not None:
            sink(row)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            futures = [pool.submit(run_row, P, config, form, box) for P in config.P_values]
            for fut in futures:
                deliver(fut.result())
    else:
        for P in config.P_values:
            deliver(run_row(P, config, form, box))
    return rows


def trend_inversions(rows) -> int:
    return sum("trend_inversion" in r.flags for r in rows)


# -- output -----------------------------------------------------------------

def row_to_json(row: ConvergenceRow) -> str:
    return json.dumps(row.to_dict(), allow_nan=True)


def _csv_record(row: ConvergenceRow) -> list:
    d = row.to_dict()
    out = []
    for key in ROW_FIELDS[:-1]:
        v = d[key]
        if v is None:
            out.append("")
        elif key == "flags":
            out.append(";".join(v))
        elif isinstance(v, (float, np.floating)):
            out.append(repr(float(v)))
        else:
            out.append(str(v))
    t = d["timings"] or {}
    out.extend("" if t.get(s) is None else repr(float(t[s])) for s in TIMING_STAGES)
    return out


def format_rows(rows, fmt: str = "jsonl") -> str:
    if fmt == "jsonl":
        return "".join(row_to_json(r) + "\n" for r in rows)
    if fmt == "csv":
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(CSV_FIELDS)
        for r in rows:
            w.writerow(_csv_record(r))
        return buf.getvalue()
    raise QuadrepError(f"unknown format {fmt!r}; expected jsonl or csv")


def emit(rows, path, fmt: str = "jsonl") -> None:
    """Write rows to ``path`` (sorted by P) as JSON lines or CSV."""
    rows = sorted(rows, key=lambda r: r.P)
    text = format_rows(rows, fmt)
    try:
        Path(path).write_text(text)
    except OSError as exc:
        raise QuadrepError(f"cannot write {path}: {exc}") from exc


class StreamWriter:
    """Appends rows to an open file as they arrive; CSV header written first."""

    def __init__(self, handle, fmt: str = "jsonl"):
        if fmt not in ("jsonl", "csv"):
            raise QuadrepError(f"unknown format {fmt!r}; expected jsonl or csv")
        self.handle = handle
        self.fmt = fmt
        if fmt == "csv":
            self._csv = csv.writer(handle, lineterminator="\n")
            self._csv.writerow(CSV_FIELDS)

    def __call__(self, row: ConvergenceRow):
        if self.fmt == "jsonl":
            self.handle.write(row_to_json(row) + "\n")
        else:
            self._csv.writerow(_csv_record(row))
        self.handle.flush()


def parse_csv(text: str) -> list[dict]:
    """Read CSV written by :func:`format_rows` back into typed dicts."""
    ints = {"N", "jacobi"}
    out = []
    for rec in csv.DictReader(io.StringIO(text)):
        d = {}
        for key in ROW_FIELDS[:-1]:
            v = rec[key]
            if key == "flags":
                d[key] = v.split(";") if v else []
            elif v == "":
                d[key] = None
            elif key == "error":
                d[key] = v
            elif key == "sphere_contained":
                d[key] = v == "True"
            elif key in ints:
                d[key] = int(v)
            else:
                d[key] = float(v)
        out.append(d)
    return out
