"""Interpolation, error norms, convergence rates and numerical identity checks."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
import sympy

from .assembly import DiscreteField, LinearSystem, NormMatrices, element_geometry
from .errors import ConfigurationError, UndefinedRateError
from .linalg import spmv
from .mesh import ShishkinMesh, Subdomain
from .problem import ProblemSpec, eval_exact
from .quadrature import QuadRule, triangle_rule

NORM_DEGREE = 6


@dataclass(frozen=True)
class NormWeights:
    mu0: float
    epsilon: float

    def __post_init__(self):
        if not (self.mu0 > 0 and self.epsilon > 0):
            raise ConfigurationError("norm weights must be positive")

    @classmethod
    def of(cls, problem: ProblemSpec) -> "NormWeights":
        return cls(mu0=problem.mu0, epsilon=problem.epsilon)


def nodal_interpolant(mesh: ShishkinMesh, g: Callable) -> DiscreteField:
    values = np.asarray(g(mesh.node_x, mesh.node_y), dtype=float)
    return DiscreteField(mesh, np.broadcast_to(values, (mesh.n_nodes,)))


def discrete_norms(fld: DiscreteField, matrices: NormMatrices,
                   weights: NormWeights) -> tuple[float, float]:
    """Energy and SD norms of a piecewise linear field, via the assembled matrices."""
    v = np.asarray(fld.values)
    if matrices.mass.shape[0] != len(v):
        raise ValueError("field and matrices have different sizes")
    energy2 = (weights.epsilon * v @ spmv(matrices.stiffness, v)
               + weights.mu0 * v @ spmv(matrices.mass, v))
    sd2 = energy2 + v @ spmv(matrices.streamline, v)
    # quadratic forms of PSD matrices can dip below zero by rounding
    return math.sqrt(max(energy2, 0.0)), math.sqrt(max(sd2, 0.0))


def continuous_error_energy_norm(mesh: ShishkinMesh, exact: Callable, discrete,
                                 weights: NormWeights, quad: Optional[QuadRule] = None) -> float:
    """sqrt(sum_K int_K eps |grad(u - w)|^2 + mu0 (u - w)^2) by per-triangle quadrature.

    ``exact(x, y)`` returns ``(u, u_x, u_y)``; ``discrete`` is a
    :class:`DiscreteField` or a postprocessed quadratic field (anything with
    ``evaluate_on_triangles``).
    """
    quad = quad or triangle_rule(NORM_DEGREE)
    if quad.degree < 6:
        raise ConfigurationError("error norms need a quadrature rule of degree >= 6")
    geo = element_geometry(mesh)
    qx, qy = quad.map(geo.vx, geo.vy)
    u, ux, uy = exact(qx, qy)
    w, wx, wy = discrete.evaluate_on_triangles(quad)
    integrand = weights.epsilon * ((ux - wx) ** 2 + (uy - wy) ** 2) + weights.mu0 * (u - w) ** 2
    return math.sqrt(float(np.sum((integrand @ quad.weights) * geo.area)))


def compute_rates(errors: Sequence[float]) -> list[float]:
    """log2(e[k] / e[k+1]) for a sequence produced by doubling N."""
    errors = [float(e) for e in errors]
    if len(errors) < 2:
        raise ValueError("need at least two errors to form a rate")
    if any(not e > 0 for e in errors):
        raise UndefinedRateError("rates need strictly positive errors")
    return [math.log2(a / b) for a, b in zip(errors[:-1], errors[1:])]


# ---------------------------------------------------------------- smooth functions

_X, _Y = sympy.symbols("x y")


@dataclass(frozen=True, eq=False)
class SmoothFunction:
    """A symbolic function of (x, y) with lazily lambdified partial derivatives."""

    expr: sympy.Expr
    _cache: dict = field(default_factory=dict, repr=False)

    @classmethod
    def parse(cls, text: str) -> "SmoothFunction":
        return cls(sympy.sympify(text, locals={"x": _X, "y": _Y, "pi": sympy.pi}))

    def derivative(self, nx: int = 0, ny: int = 0) -> Callable:
        key = (nx, ny)
        if key not in self._cache:
            d = self.expr
            if nx:
                d = sympy.diff(d, _X, nx)
            if ny:
                d = sympy.diff(d, _Y, ny)
            fn = sympy.lambdify((_X, _Y), d, "numpy")
            self._cache[key] = lambda x, y, fn=fn: np.broadcast_to(
                np.asarray(fn(x, y), dtype=float), np.broadcast(x, y).shape)
        return self._cache[key]

    def __call__(self, x, y):
        return self.derivative()(x, y)

    def __str__(self):
        return str(self.expr)


# ---------------------------------------------------------------- patch identity

@dataclass
class PatchReport:
    direction: str
    i: np.ndarray
    j: np.ndarray
    lhs: np.ndarray
    bound: np.ndarray
    ratio: np.ndarray  # nan where the bound vanishes
    skipped: int

    @property
    def max_lhs(self) -> float:
        return float(np.max(self.lhs)) if len(self.lhs) else 0.0

    @property
    def max_ratio(self) -> float:
        r = self.ratio[np.isfinite(self.ratio)]
        return float(np.max(r)) if len(r) else 0.0

    def rows(self):
        return zip(self.i.tolist(), self.j.tolist(), self.lhs.tolist(),
                   self.bound.tolist(), self.ratio.tolist())


def _sample_grid(n: int = 5) -> np.ndarray:
    """n x n grid on the unit square collapsed onto the triangle (barycentric)."""
    u, v = np.meshgrid(np.linspace(0, 1, n), np.linspace(0, 1, n), indexing="ij")
    s = u.ravel()
    t = (v * (1 - u)).ravel()
    return np.column_stack([1 - s - t, s, t])


def verify_patch_identity(mesh: ShishkinMesh, w: SmoothFunction, direction: str = "x",
                          quad: Optional[QuadRule] = None) -> PatchReport:
    """Compare |int_Q (w - w^I)_x| with its local bound on every two-triangle patch.

    direction "x": Q_ij = K2_{i,j-1} U K1_{i,j} (needs h_{y,j-1} = h_{y,j}).
    direction "y": S_ij = K2_{i-1,j} U K1_{i,j} (needs h_{x,i-1} = h_{x,i}).
    Patches straddling a spacing change are skipped.
    """
    if direction not in ("x", "y"):
        raise ValueError("direction must be 'x' or 'y'")
    quad = quad or triangle_rule(NORM_DEGREE)
    n = mesh.N
    hx, hy = mesh.hx, mesh.hy
    if direction == "x":
        jj, ii = np.divmod(np.arange(n * (n - 1)), n)
        jj = jj + 1
        other = (ii, jj - 1)
        ok = np.isclose(hy[jj - 1], hy[jj], rtol=1e-12, atol=0.0)
    else:
        jj, ii = np.divmod(np.arange((n - 1) * n), n - 1)
        ii = ii + 1
        other = (ii - 1, jj)
        ok = np.isclose(hx[ii - 1], hx[ii], rtol=1e-12, atol=0.0)
    skipped = int(np.sum(~ok))
    ii, jj = ii[ok], jj[ok]
    other = (other[0][ok], other[1][ok])
    t_k1 = 2 * (ii + jj * n)
    t_k2 = 2 * (other[0] + other[1] * n) + 1

    geo = element_geometry(mesh)
    wi = nodal_interpolant(mesh, w).values
    d = (1, 0) if direction == "x" else (0, 1)
    dw = w.derivative(*d)
    grads = geo.gx if direction == "x" else geo.gy

    lhs = np.zeros(len(ii))
    for t in (t_k1, t_k2):
        qx, qy = quad.map(geo.vx[t], geo.vy[t])
        interp_d = np.sum(wi[mesh.triangles[t]] * grads[t], axis=1)
        lhs += geo.area[t] * ((dw(qx, qy) - interp_d[:, None]) @ quad.weights)
    lhs = np.abs(lhs)

    samples = _sample_grid(5)
    sups = []
    for l in range(3):
        m = 2 - l
        order = (l + 1, m) if direction == "x" else (l, m + 1)
        deriv = w.derivative(*order)
        sup = np.zeros(len(ii))
        for t in (t_k1, t_k2):
            sx, sy = geo.vx[t] @ samples.T, geo.vy[t] @ samples.T
            sup = np.maximum(sup, np.max(np.abs(deriv(sx, sy)), axis=1))
        sups.append((l, m, sup))
    meas = geo.area[t_k1] + geo.area[t_k2]
    h_x, h_y = hx[ii], hy[jj]
    bound = meas * sum(h_x ** l * h_y ** m * sup for l, m, sup in sups)
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(bound > 0, lhs / np.where(bound > 0, bound, 1.0), np.nan)
    return PatchReport(direction, ii, jj, lhs, bound, ratio, skipped)


def verify_orthogonality(system: LinearSystem, solution: np.ndarray) -> float:
    """Relative algebraic residual; zero iff a_SD(u - u^N, phi_i) = 0 for all interior phi_i."""
    r = system.rhs - spmv(system.A, np.asarray(solution, dtype=float))
    bnorm = float(np.linalg.norm(system.rhs))
    return float(np.linalg.norm(r) / bnorm) if bnorm > 0 else float(np.linalg.norm(r))


# ---------------------------------------------------------------- interpolation bounds

_SEVEN_POINTS = np.array([
    [1 / 3, 1 / 3, 1 / 3],
    [0.5, 0.5, 0.0], [0.0, 0.5, 0.5], [0.5, 0.0, 0.5],
    [2 / 3, 1 / 6, 1 / 6], [1 / 6, 2 / 3, 1 / 6], [1 / 6, 1 / 6, 2 / 3],
])


@dataclass
class InterpolationBoundReport:
    N: int
    sup_error: dict  # Subdomain -> max |u - u^I| over sample points
    ref_n2: float  # N^-2
    ref_n2_log2: float  # N^-2 ln^2 N

    def as_row(self) -> dict:
        row = {"N": self.N}
        row.update({f"sup_{s.name}": v for s, v in self.sup_error.items()})
        row["N^-2"] = self.ref_n2
        row["N^-2 ln^2 N"] = self.ref_n2_log2
        return row


def interpolation_bound_report(mesh: ShishkinMesh, problem: ProblemSpec) -> InterpolationBoundReport:
    geo = element_geometry(mesh)
    uI = nodal_interpolant(mesh, lambda x, y: eval_exact(problem, x, y)[0]).values
    px, py = geo.vx @ _SEVEN_POINTS.T, geo.vy @ _SEVEN_POINTS.T
    u = eval_exact(problem, px, py)[0]
    err = np.max(np.abs(u - uI[mesh.triangles] @ _SEVEN_POINTS.T), axis=1)
    sup = {}
    for s in Subdomain:
        mask = mesh.tri_subdomain == s
        sup[s] = float(np.max(err[mask])) if np.any(mask) else 0.0
    n = mesh.N
    return InterpolationBoundReport(n, sup, n ** -2.0, n ** -2.0 * math.log(n) ** 2)


# ---------------------------------------------------------------- error report

CSV_COLUMNS = [
    "N", "epsilon", "err_interp_energy", "rate_ie", "err_interp_sd", "rate_is",
    "err_energy", "rate_e", "err_post_energy", "rate_p", "gmres_iters", "residual",
]
_ERROR_RATE_PAIRS = [
    ("err_interp_energy", "rate_ie"),
    ("err_interp_sd", "rate_is"),
    ("err_energy", "rate_e"),
    ("err_post_energy", "rate_p"),
]
MISSING = "---"


@dataclass
class ErrorRow:
    N: int
    epsilon: float
    err_interp_energy: Optional[float] = None
    err_interp_sd: Optional[float] = None
    err_energy: Optional[float] = None
    err_post_energy: Optional[float] = None
    gmres_iters: Optional[int] = None
    residual: Optional[float] = None
    failure: Optional[str] = None


@dataclass
class ErrorReport:
    rows: list = field(default_factory=list)
    meta: dict = field(default_factory=dict)

    def sorted_rows(self) -> list:
        return sorted(self.rows, key=lambda r: (-r.epsilon, r.N))

    def epsilons(self) -> list:
        return sorted({r.epsilon for r in self.rows}, reverse=True)

    def series(self, epsilon: float, column: str) -> tuple[list, list]:
        rows = [r for r in self.sorted_rows() if r.epsilon == epsilon]
        return [r.N for r in rows], [getattr(r, column) for r in rows]

    def rates(self) -> dict:
        """{(epsilon, N, rate_column): rate} for consecutive doubled N with both errors present."""
        out = {}
        for eps in self.epsilons():
            rows = [r for r in self.sorted_rows() if r.epsilon == eps]
            for a, b in zip(rows[:-1], rows[1:]):
                if b.N != 2 * a.N:
                    continue
                for err_col, rate_col in _ERROR_RATE_PAIRS:
                    ea, eb = getattr(a, err_col), getattr(b, err_col)
                    if ea is not None and eb is not None and ea > 0 and eb > 0:
                        out[(eps, a.N, rate_col)] = compute_rates([ea, eb])[0]
        return out

    def table(self) -> list[dict]:
        rates = self.rates()
        out = []
        for r in self.sorted_rows():
            rec = {"N": r.N, "epsilon": r.epsilon}
            for err_col, rate_col in _ERROR_RATE_PAIRS:
                rec[err_col] = getattr(r, err_col)
                rec[rate_col] = rates.get((r.epsilon, r.N, rate_col))
            rec["gmres_iters"] = r.gmres_iters
            rec["residual"] = r.residual
            out.append(rec)
        return out

    def to_csv(self) -> str:
        buf = io.StringIO()
        if self.meta:
            buf.write("# " + " ".join(f"{k}={v}" for k, v in self.meta.items()) + "\n")
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(CSV_COLUMNS)
        for rec in self.table():
            writer.writerow([_fmt_csv(col, rec[col]) for col in CSV_COLUMNS])
        return buf.getvalue()

    def to_markdown(self) -> str:
        headers = ["N", "epsilon", "||uI-uN||_eps", "rate", "||uI-uN||_SD", "rate",
                   "||u-uN||_eps", "rate", "||u-PuN||_eps", "rate", "iters", "residual"]
        body = []
        for rec in self.table():
            body.append([_fmt_md(col, rec[col]) for col in CSV_COLUMNS])
        widths = [max(len(h), *(len(row[k]) for row in body)) if body else len(h)
                  for k, h in enumerate(headers)]
        lines = []
        if self.meta:
            lines.append(", ".join(f"{k} = {v}" for k, v in self.meta.items()))
            lines.append("")
        lines.append("| " + " | ".join(h.rjust(w) for h, w in zip(headers, widths)) + " |")
        lines.append("|" + "|".join("-" * (w + 1) + ":" for w in widths) + "|")
        for row in body:
            lines.append("| " + " | ".join(c.rjust(w) for c, w in zip(row, widths)) + " |")
        return "\n".join(lines) + "\n"

    @staticmethod
    def read_csv(text: str) -> list[dict]:
        lines = [ln for ln in text.splitlines() if not ln.startswith("#")]
        out = []
        for rec in csv.DictReader(lines):
            out.append({k: (None if v == MISSING else float(v)) for k, v in rec.items()})
        return out

    @classmethod
    def from_csv(cls, text: str) -> "ErrorReport":
        """Rebuild a report from ``to_csv`` output; rates are recomputed, not read."""
        meta = {}
        for ln in text.splitlines():
            if ln.startswith("#"):
                meta.update(kv.split("=", 1) for kv in ln[1:].split() if "=" in kv)
        rows = []
        for rec in cls.read_csv(text):
            iters = rec["gmres_iters"]
            rows.append(ErrorRow(
                N=int(rec["N"]), epsilon=rec["epsilon"],
                err_interp_energy=rec["err_interp_energy"], err_interp_sd=rec["err_interp_sd"],
                err_energy=rec["err_energy"], err_post_energy=rec["err_post_energy"],
                gmres_iters=None if iters is None else int(iters), residual=rec["residual"]))
        return cls(rows=rows, meta=meta)


def _fmt_csv(col, value):
    if value is None:
        return MISSING
    if col == "N" or col == "gmres_iters":
        return str(int(value))
    if col.startswith("rate"):
        return f"{value:.6f}"
    return f"{value:.10e}"


def _fmt_md(col, value):
    if value is None:
        return MISSING
    if col in ("N", "gmres_iters"):
        return str(int(value))
    if col == "epsilon":
        return f"{value:.0e}"
    if col.startswith("rate"):
        return f"{value:.2f}"
    return f"{value:.4e}"
