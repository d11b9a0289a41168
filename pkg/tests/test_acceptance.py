"""Acceptance criteria, each checked at its stated tolerance.

One end-to-end run of ``sdfem acceptance`` over configs/acceptance.json
(epsilon in {1e-4, 1e-8, 1e-10}, N = 8..256) is shared by every test.  The
error table it writes is re-read and each criterion is evaluated from it,
printing one PASS/FAIL line per criterion.
"""

import subprocess
import sys
import time
from pathlib import Path

import pytest

from sdfem import acceptance, verify
from sdfem.analysis import ErrorReport

CONFIG = Path(__file__).resolve().parents[1] / "configs" / "acceptance.json"


@pytest.fixture(scope="module")
def run(tmp_path_factory):
    out = tmp_path_factory.mktemp("acceptance")
    start = time.perf_counter()
    proc = subprocess.run(
        [sys.executable, "-m", "sdfem.cli", "acceptance", "--config", str(CONFIG), "--out", str(out)],
        capture_output=True, text=True)
    elapsed = time.perf_counter() - start
    assert proc.returncode in (0, 3), proc.stderr
    report = ErrorReport.from_csv((out / "errors.csv").read_text())
    return {"report": report, "elapsed": elapsed, "stdout": proc.stdout, "code": proc.returncode}


def check(result):
    print()
    print(result.line())
    for d in result.details:
        print("    " + d)
    assert result.passed, "\n".join([result.line(), *result.details])


def test_criterion_1_superclose_table(run):
    """||u^I - u^N|| in energy and SD norms within 2 %, rates within 0.05."""
    check(acceptance.criterion_superclose_reference(run["report"]))


def test_criterion_2_epsilon_uniformity(run):
    """Same columns at eps = 1e-4 and 1e-10 within 1 % of eps = 1e-8."""
    check(acceptance.criterion_uniformity(run["report"]))


def test_criterion_3_energy_and_postprocessed_errors(run):
    """||u - u^N|| and ||u - P u^N|| within 5 %, postprocessed rates >= 1.45."""
    check(acceptance.criterion_error_reference(run["report"]))


def test_criterion_4_sd_order(run):
    """SD-norm superclose rates for N = 32..256 in [1.30, 1.45]."""
    check(acceptance.criterion_order(run["report"]))


def test_criterion_5_property_suites(run):
    """Every numerical property suite passes and sweep residuals are <= 1e-12."""
    check(acceptance.criterion_properties(verify.run_all(), run["report"]))


def test_criterion_6_runtime(run):
    """The whole acceptance run from one config file finishes in under 300 s."""
    check(acceptance.criterion_runtime(run["elapsed"]))


def test_cli_reports_every_criterion(run):
    lines = [ln for ln in run["stdout"].splitlines() if ln.startswith("criterion ")]
    assert [ln.split()[1] for ln in lines] == ["1", "2", "3", "4", "5", "6"]
    assert (run["code"] == 0) == all("[PASS]" in ln for ln in lines)
