"""Reference error values and the pass/fail criteria evaluated on a convergence sweep.

The reference columns are epsilon-independent (one column covers
eps = 1e-4, 1e-6, 1e-8, 1e-10) and are stored as ``{N: value}`` dicts.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

from .analysis import ErrorReport, compute_rates

REFERENCE_SUPERCLOSE = {  # ||u^I - u^N||_eps
    8: 1.0496e-1, 16: 6.2921e-2, 32: 2.8978e-2, 64: 1.1762e-2,
    128: 4.5131e-3, 256: 1.6965e-3, 512: 6.3617e-4, 1024: 2.3980e-4,
}
REFERENCE_SUPERCLOSE_SD = {  # ||u^I - u^N||_SD
    8: 1.2058e-1, 16: 6.3435e-2, 32: 2.9027e-2, 64: 1.1769e-2,
    128: 4.5143e-3, 256: 1.6967e-3, 512: 6.3620e-4, 1024: 2.3981e-4,
}
REFERENCE_ENERGY = {  # ||u - u^N||_eps
    8: 3.05e-1, 16: 2.11e-1, 32: 1.36e-1, 64: 8.38e-2,
    128: 4.99e-2, 256: 2.90e-2, 512: 1.65e-2, 1024: 9.28e-3,
}
REFERENCE_POST = {  # ||u - P u^N||_eps
    8: 1.55e-1, 16: 8.95e-2, 32: 4.19e-2, 64: 1.67e-2,
    128: 6.12e-3, 256: 2.15e-3, 512: 7.46e-4, 1024: 2.60e-4,
}

TABLE_NS = (8, 16, 32, 64, 128, 256)
REFERENCE_EPS = 1e-8
UNIFORMITY_EPS = (1e-4, 1e-10)


@dataclass
class CriterionResult:
    number: int
    title: str
    passed: bool
    details: list = field(default_factory=list)

    def line(self) -> str:
        return f"criterion {self.number} [{'PASS' if self.passed else 'FAIL'}] {self.title}"


def _column(report: ErrorReport, epsilon: float, column: str) -> dict:
    Ns, vals = report.series(epsilon, column)
    return {N: v for N, v in zip(Ns, vals) if v is not None}


def _relative_check(computed: dict, reference: dict, Ns: Sequence[int], tol: float,
                    label: str, details: list) -> bool:
    ok = True
    for N in Ns:
        if N not in computed:
            details.append(f"{label} N={N}: missing")
            ok = False
            continue
        rel = abs(computed[N] - reference[N]) / reference[N]
        good = rel <= tol
        ok &= good
        details.append(f"{label} N={N}: {computed[N]:.4e} vs {reference[N]:.4e} "
                       f"(rel {rel:.3%}) {'ok' if good else 'OUT'}")
    return ok


def _rates_by_N(values: dict, Ns: Sequence[int]) -> dict:
    """{N: log2(e(N)/e(2N))} for the consecutive pairs present in ``values``."""
    out = {}
    for a, b in zip(Ns[:-1], Ns[1:]):
        if a in values and b in values and b == 2 * a:
            out[a] = compute_rates([values[a], values[b]])[0]
    return out


def criterion_superclose_reference(report: ErrorReport, Ns: Sequence[int] = TABLE_NS,
                     tol: float = 0.02, rate_tol: float = 0.05) -> CriterionResult:
    details: list = []
    ok = True
    for col, ref, label in (("err_interp_energy", REFERENCE_SUPERCLOSE, "||uI-uN||_eps"),
                            ("err_interp_sd", REFERENCE_SUPERCLOSE_SD, "||uI-uN||_SD")):
        got = _column(report, REFERENCE_EPS, col)
        ok &= _relative_check(got, ref, Ns, tol, label, details)
        ours, theirs = _rates_by_N(got, Ns), _rates_by_N(ref, Ns)
        for N in sorted(theirs):
            if N not in ours:
                ok = False
                details.append(f"{label} rate N={N}: missing")
                continue
            diff = abs(ours[N] - theirs[N])
            ok &= diff <= rate_tol
            details.append(f"{label} rate N={N}: {ours[N]:.3f} vs {theirs[N]:.3f} "
                           f"(diff {diff:.3f}) {'ok' if diff <= rate_tol else 'OUT'}")
    return CriterionResult(1, "supercloseness reference values, 2% / rates +-0.05", ok, details)


def criterion_uniformity(report: ErrorReport, Ns: Sequence[int] = TABLE_NS,
                         tol: float = 0.01) -> CriterionResult:
    details: list = []
    ok = True
    for col in ("err_interp_energy", "err_interp_sd"):
        base = _column(report, REFERENCE_EPS, col)
        for eps in UNIFORMITY_EPS:
            other = _column(report, eps, col)
            for N in Ns:
                if N not in base or N not in other:
                    ok = False
                    details.append(f"{col} eps={eps:g} N={N}: missing")
                    continue
                rel = abs(other[N] - base[N]) / base[N]
                ok &= rel < tol
                details.append(f"{col} eps={eps:g} N={N}: rel change {rel:.3%} "
                               f"{'ok' if rel < tol else 'OUT'}")
    return CriterionResult(2, "epsilon-uniformity, every cell within 1%", ok, details)


def criterion_error_reference(report: ErrorReport, Ns: Sequence[int] = TABLE_NS,
                     tol: float = 0.05, post_rate_min: float = 1.45,
                     post_rate_rows: Sequence[int] = (64, 128, 256),
                     plain_rate_band: tuple = (0.5, 0.9)) -> CriterionResult:
    details: list = []
    energy = _column(report, REFERENCE_EPS, "err_energy")
    post = _column(report, REFERENCE_EPS, "err_post_energy")
    ok = _relative_check(energy, REFERENCE_ENERGY, Ns, tol, "||u-uN||_eps", details)
    ok &= _relative_check(post, REFERENCE_POST, Ns, tol, "||u-PuN||_eps", details)

    all_ns = sorted(post)
    post_rates = _rates_by_N(post, all_ns)
    for N in post_rate_rows:
        if N not in post_rates:
            details.append(f"post rate N={N}: not computable (needs N={2 * N}); not evaluated")
            continue
        good = post_rates[N] >= post_rate_min
        ok &= good
        details.append(f"post rate N={N}: {post_rates[N]:.3f} {'ok' if good else 'OUT'} "
                       f"(>= {post_rate_min})")
    lo, hi = plain_rate_band
    for N, r in sorted(_rates_by_N(energy, sorted(energy)).items()):
        good = lo <= r <= hi
        ok &= good
        details.append(f"plain rate N={N}: {r:.3f} {'ok' if good else 'OUT'} (in [{lo}, {hi}])")
    return CriterionResult(3, "energy-error reference values, 5% / post rates >= 1.45 /"
                           " plain rates in [0.5, 0.9]",
                           ok, details)


def criterion_order(report: ErrorReport, Ns: Sequence[int] = (32, 64, 128, 256),
                    band: tuple = (1.30, 1.45)) -> CriterionResult:
    details: list = []
    sd = _column(report, REFERENCE_EPS, "err_interp_sd")
    rates = _rates_by_N(sd, list(Ns))
    ok = len(rates) == len(Ns) - 1
    lo, hi = band
    for N, r in sorted(rates.items()):
        good = lo <= r <= hi
        ok &= good
        details.append(f"SD rate N={N}->{2 * N}: {r:.3f} {'ok' if good else 'OUT'} (in [{lo}, {hi}])")
    return CriterionResult(4, "supercloseness order of ||uI-uN||_SD in [1.30, 1.45]", ok, details)


def criterion_properties(suites: list, report: Optional[ErrorReport] = None,
                         tol: float = 1e-12) -> CriterionResult:
    """All property suites pass; sweep rows that converged also meet the residual bound."""
    details = []
    ok = True
    for s in suites:
        ok &= s.passed
        details.append(s.line())
        if not s.passed:
            details.extend("    " + d for d in s.details)
    if report is not None:
        bad = [r for r in report.rows if r.residual is not None and r.failure is None
               and r.residual > tol]
        ok &= not bad
        details.append(f"sweep residuals <= {tol:g}: "
                       + ("ok" if not bad else ", ".join(f"N={r.N} eps={r.epsilon:g}" for r in bad)))
    return CriterionResult(5, "property suite", ok, details)


def criterion_runtime(seconds: float, limit: float = 300.0) -> CriterionResult:
    ok = math.isfinite(seconds) and seconds < limit
    return CriterionResult(6, f"full suite from one config file in under {limit:.0f} s", ok,
                           [f"elapsed {seconds:.1f} s"])


def evaluate_sweep(report: ErrorReport) -> list[CriterionResult]:
    return [criterion_superclose_reference(report), criterion_uniformity(report),
            criterion_error_reference(report), criterion_order(report)]
