import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sdfem.analysis import (
    CSV_COLUMNS,
    ErrorReport,
    ErrorRow,
    NormWeights,
    SmoothFunction,
    compute_rates,
    continuous_error_energy_norm,
    discrete_norms,
    interpolation_bound_report,
    nodal_interpolant,
    verify_orthogonality,
    verify_patch_identity,
)
from sdfem.assembly import DiscreteField, assemble_norm_matrices, assemble_system
from sdfem.errors import ConfigurationError, UndefinedRateError
from sdfem.experiments import solve_case
from sdfem.linalg import gmres
from sdfem.mesh import MeshParams, build_macro_mesh, build_mesh
from sdfem.problem import eval_exact, get_problem, make_test_problem
from sdfem.quadrature import triangle_rule
from sdfem.verify import norm_oracle_suite, quadratic_field_of


def shishkin(N, eps):
    return build_mesh(MeshParams(N=N, epsilon=eps, beta1=2.0, beta2=1.0))


def uniform(N):
    return shishkin(N, 1.0)  # transition points clamp to 1/2


def zero_exact(x, y):
    z = np.zeros(np.broadcast(x, y).shape)
    return z, z, z


# ------------------------------------------------------------------ interpolation

def test_interpolant_of_hat_is_unit_vector():
    mesh = shishkin(8, 1e-4)
    k = mesh.node_id(3, 5)
    xk, yk = mesh.node_x[k], mesh.node_y[k]
    v = nodal_interpolant(mesh, lambda x, y: ((x == xk) & (y == yk)).astype(float)).values
    expected = np.zeros(mesh.n_nodes)
    expected[k] = 1.0
    np.testing.assert_array_equal(v, expected)


def test_interpolant_of_exact_vanishes_on_boundary():
    mesh = shishkin(16, 1e-8)
    p = make_test_problem(1e-8)
    field = nodal_interpolant(mesh, lambda x, y: eval_exact(p, x, y)[0])
    assert field.boundary_max() == 0.0


def test_linear_reproduction_energy_norm():
    mesh = uniform(4)
    eps = 0.01
    field = nodal_interpolant(mesh, lambda x, y: x + y)
    mats = assemble_norm_matrices(mesh, make_test_problem(eps), 1.0)
    energy, _ = discrete_norms(field, mats, NormWeights(mu0=1.0, epsilon=eps))
    assert energy == pytest.approx(math.sqrt(2 * eps + 7 / 6), rel=1e-13)


# ------------------------------------------------------------------ norms

def test_zero_field_norms():
    mesh = shishkin(8, 1e-4)
    mats = assemble_norm_matrices(mesh, make_test_problem(1e-4), 1.0)
    assert discrete_norms(DiscreteField(mesh, np.zeros(mesh.n_nodes)), mats,
                          NormWeights(1.0, 1e-4)) == (0.0, 0.0)


def test_sd_equals_energy_without_stabilization():
    mesh = shishkin(8, 1e-4)
    p = make_test_problem(1e-4)
    v = DiscreteField(mesh, np.random.default_rng(0).standard_normal(mesh.n_nodes))
    e, sd = discrete_norms(v, assemble_norm_matrices(mesh, p, 0.0), NormWeights.of(p))
    assert sd == e


def test_norm_dimension_mismatch():
    p = make_test_problem(1e-4)
    mats = assemble_norm_matrices(shishkin(8, 1e-4), p, 1.0)
    with pytest.raises(ValueError):
        discrete_norms(DiscreteField(shishkin(16, 1e-4), np.zeros(289)), mats, NormWeights.of(p))


def test_bubble_norm_converges_with_order_two():
    result = norm_oracle_suite(Ns=(8, 16, 32, 64))
    assert result.passed, result.details
    # the finest value sits within O(N^-2) of sqrt(eps/45 + mu0/900)
    exact = math.sqrt(0.01 / 45 + 1 / 900)
    assert exact == pytest.approx(3.65148e-2, rel=1e-5)


@pytest.mark.parametrize("N,eps", [(8, 1e-4), (16, 1e-8), (8, 1.0)])
def test_discrete_and_continuous_norms_agree(N, eps):
    mesh = shishkin(N, eps)
    p = make_test_problem(eps)
    weights = NormWeights.of(p)
    rng = np.random.default_rng(N)
    values = rng.standard_normal(mesh.n_nodes)
    values[mesh.boundary_mask()] = 0.0
    v = DiscreteField(mesh, values)
    discrete, _ = discrete_norms(v, assemble_norm_matrices(mesh, p, 1.0), weights)
    continuous = continuous_error_energy_norm(mesh, zero_exact, v, weights)
    assert continuous == pytest.approx(discrete, rel=1e-12)


def test_continuous_norm_vanishes_for_reproduced_quadratic():
    mesh = shishkin(8, 1e-4)
    macro = build_macro_mesh(mesh)

    def q(x, y):
        return 1.0 + x - 2 * y + 3 * x * x - x * y + 0.5 * y * y

    def q_exact(x, y):
        return q(x, y), 1.0 + 6 * x - y, -2.0 - x + y

    weights = NormWeights(mu0=1.0, epsilon=1e-4)
    err = continuous_error_energy_norm(mesh, q_exact, quadratic_field_of(macro, q), weights)
    assert err < 1e-12


def test_continuous_norm_needs_degree_six():
    mesh = shishkin(8, 1e-4)
    v = DiscreteField(mesh, np.zeros(mesh.n_nodes))
    with pytest.raises(ConfigurationError):
        continuous_error_energy_norm(mesh, zero_exact, v, NormWeights(1.0, 1e-4), triangle_rule(4))


def test_interpolation_error_order_n_inverse_log():
    p = make_test_problem(1e-8)
    weights = NormWeights.of(p)
    Ns = [16, 32, 64, 128]
    errs = []
    for N in Ns:
        mesh = shishkin(N, 1e-8)
        uI = nodal_interpolant(mesh, lambda x, y: eval_exact(p, x, y)[0])
        errs.append(continuous_error_energy_norm(mesh, lambda x, y: eval_exact(p, x, y), uI, weights))
    scaled = [e / math.log(N) for e, N in zip(errs, Ns)]
    orders = compute_rates(scaled)
    assert all(0.8 <= r <= 1.1 for r in orders), orders


def test_degree_six_norm_close_to_degree_ten():
    p = make_test_problem(1e-8)
    case = solve_case(p, 32)
    exact = lambda x, y: eval_exact(p, x, y)  # noqa: E731
    w = NormWeights.of(p)
    e6 = continuous_error_energy_norm(case.mesh, exact, case.field, w, triangle_rule(6))
    e10 = continuous_error_energy_norm(case.mesh, exact, case.field, w, triangle_rule(10))
    assert abs(e6 - e10) / e10 <= 1e-3


def test_energy_error_n64_matches_reference():
    p = make_test_problem(1e-8)
    case = solve_case(p, 64)
    err = continuous_error_energy_norm(case.mesh, lambda x, y: eval_exact(p, x, y), case.field,
                                       NormWeights.of(p))
    assert err == pytest.approx(8.38e-2, rel=0.03)


# ------------------------------------------------------------------ rates

def test_rates_examples():
    assert round(compute_rates([1.0496e-1, 6.2921e-2])[0], 2) == 0.74
    assert round(compute_rates([2.8978e-2, 1.1762e-2])[0], 2) == 1.30
    assert compute_rates([0.3, 0.3]) == [0.0]


def test_recomputed_n16_rate():
    # rates are recomputed from the reference errors: 1.12 for N=16
    assert round(compute_rates([6.2921e-2, 2.8978e-2])[0], 2) == 1.12


def test_rates_errors():
    with pytest.raises(UndefinedRateError):
        compute_rates([1e-2, 0.0])
    with pytest.raises(UndefinedRateError):
        compute_rates([-1e-2, 1e-3])
    with pytest.raises(ValueError):
        compute_rates([1e-2])


@settings(max_examples=50, deadline=None)
@given(c=st.floats(1e-6, 1e3), p=st.floats(-2, 4), n=st.integers(2, 8))
def test_rates_of_geometric_sequence(c, p, n):
    errors = [c * 2.0 ** (-p * k) for k in range(n)]
    rates = compute_rates(errors)
    assert len(rates) == n - 1
    np.testing.assert_allclose(rates, p, atol=1e-9)
    assert sum(rates) == pytest.approx(math.log2(errors[0] / errors[-1]), abs=1e-9)


# ------------------------------------------------------------------ patch identity

def test_smooth_function_derivatives():
    w = SmoothFunction.parse("x**3*y + sin(pi*y)")
    assert w(0.5, 0.5) == pytest.approx(0.0625 + 1.0)
    assert w.derivative(1, 0)(0.5, 2.0) == pytest.approx(3 * 0.25 * 2.0)
    assert w.derivative(2, 1)(0.5, 0.3) == pytest.approx(6 * 0.5)
    assert np.shape(w.derivative(4, 0)(np.zeros(3), np.zeros(3))) == (3,)


@pytest.mark.parametrize("N,eps", [(8, 1.0), (16, 1e-4), (32, 1e-8)])
def test_patch_identity_exact_for_quadratics(N, eps):
    mesh = shishkin(N, eps)
    rep = verify_patch_identity(mesh, SmoothFunction.parse("x**2"), "x")
    assert len(rep.lhs) > 0
    assert rep.max_lhs <= 1e-13
    rep = verify_patch_identity(mesh, SmoothFunction.parse("y**2"), "y")
    assert rep.max_lhs <= 1e-13


def test_patch_identity_linear_is_zero():
    rep = verify_patch_identity(shishkin(16, 1e-4), SmoothFunction.parse("3*x - 2*y + 1"), "x")
    assert rep.max_lhs <= 1e-15
    assert np.all(np.isnan(rep.ratio))  # the bound vanishes too


def test_patch_identity_sweep_on_uniform_meshes():
    # on uniform meshes functions of x alone cancel exactly by symmetry;
    # sin(pi x) sin(pi y) shows the O(h^2 meas(Q)) size of the left-hand side
    ratios, scaled = [], []
    for N in (8, 16, 32, 64):
        mesh = uniform(N)
        assert verify_patch_identity(mesh, SmoothFunction.parse("x**3"), "x").max_lhs <= 1e-15
        rep = verify_patch_identity(mesh, SmoothFunction.parse("sin(pi*x)*sin(pi*y)"), "x")
        ratios.append(rep.max_ratio)
        scaled.append(rep.max_lhs * N ** 2)
    assert max(ratios) <= 1.0
    assert all(r >= 1.9 for r in compute_rates(scaled))


@pytest.mark.parametrize("text", ["x**3", "x**2*y", "sin(pi*x)*sin(pi*y)"])
@pytest.mark.parametrize("direction", ["x", "y"])
def test_patch_ratio_bounded(text, direction):
    for N in (8, 16, 32):
        rep = verify_patch_identity(shishkin(N, 1e-4), SmoothFunction.parse(text), direction)
        assert rep.max_ratio <= 1.0


def test_patches_across_transition_are_skipped():
    mesh = shishkin(8, 1e-4)
    rep = verify_patch_identity(mesh, SmoothFunction.parse("x**2"), "x")
    assert rep.skipped == 8  # the row of patches straddling y = 1 - lambda_y
    assert len(rep.lhs) + rep.skipped == 8 * 7


def test_patch_direction_validated():
    with pytest.raises(ValueError):
        verify_patch_identity(shishkin(8, 1e-4), SmoothFunction.parse("x"), "z")


# ------------------------------------------------------------------ orthogonality

def test_orthogonality_residual():
    p = make_test_problem(1e-4)
    system = assemble_system(shishkin(8, 1e-4), p, 1.0)
    x, stats = gmres(system.A, system.rhs, tol=1e-12)
    assert stats.converged
    assert verify_orthogonality(system, x) <= 1e-12
    assert verify_orthogonality(system, np.zeros(system.size)) == 1.0
    k, delta = 10, 1e-6
    e = np.zeros(system.size)
    e[k] = 1.0
    grown = verify_orthogonality(system, x + delta * e)
    expected = np.linalg.norm(system.A @ e) * delta / np.linalg.norm(system.rhs)
    assert grown == pytest.approx(expected, rel=1e-5)


# ------------------------------------------------------------------ interpolation bounds

def test_interpolation_bound_orders():
    p = make_test_problem(1e-8)
    reports = [interpolation_bound_report(shishkin(N, 1e-8), p) for N in (16, 32, 64, 128)]
    coarse = [r.sup_error[0] for r in reports]
    assert all(1.8 <= r <= 2.2 for r in compute_rates(coarse))
    for s in (1, 2, 3):
        normalized = [r.sup_error[s] / r.ref_n2_log2 for r in reports]
        assert max(normalized) / min(normalized) < 1.5  # ~ N^-2 ln^2 N


def test_interpolation_bound_linear_exact():
    p = get_problem("linear-exact", 1e-6)
    rep = interpolation_bound_report(shishkin(16, 1e-6), p)
    assert max(rep.sup_error.values()) <= 1e-13
    row = rep.as_row()
    assert row["N"] == 16 and "sup_S" in row and "N^-2 ln^2 N" in row


# ------------------------------------------------------------------ error report

def make_report():
    rows = [
        ErrorRow(N=16, epsilon=1e-8, err_interp_energy=4.0e-2, err_interp_sd=4.1e-2,
                 err_energy=0.2, err_post_energy=8e-2, gmres_iters=80, residual=5e-13),
        ErrorRow(N=8, epsilon=1e-8, err_interp_energy=7.0e-2, err_interp_sd=7.5e-2,
                 err_energy=0.3, err_post_energy=0.15, gmres_iters=40, residual=3e-13),
        ErrorRow(N=32, epsilon=1e-8, err_interp_energy=2.0e-2, err_interp_sd=2.1e-2,
                 err_energy=0.13, err_post_energy=None, gmres_iters=170, residual=9e-13),
        ErrorRow(N=8, epsilon=1e-4, err_interp_energy=7.1e-2, err_interp_sd=7.6e-2,
                 err_energy=0.31, gmres_iters=41, residual=4e-13),
    ]
    return ErrorReport(rows=rows, meta={"problem": "outflow-layers", "mu0": 1.0})


def test_report_csv_layout():
    text = make_report().to_csv()
    lines = text.splitlines()
    assert lines[0] == "# problem=outflow-layers mu0=1.0"
    assert lines[1].split(",") == CSV_COLUMNS
    records = ErrorReport.read_csv(text)
    assert [(r["epsilon"], r["N"]) for r in records] == [(1e-4, 8), (1e-8, 8), (1e-8, 16), (1e-8, 32)]
    last = records[-1]
    assert last["rate_ie"] is None and last["err_post_energy"] is None
    assert records[2]["rate_p"] is None  # no N=32 post error to pair with


def test_report_rates_round_trip():
    records = ErrorReport.read_csv(make_report().to_csv())
    eps8 = [r for r in records if r["epsilon"] == 1e-8]
    for err_col, rate_col in (("err_interp_energy", "rate_ie"), ("err_interp_sd", "rate_is"),
                              ("err_energy", "rate_e")):
        rates = compute_rates([r[err_col] for r in eps8])
        assert [r[rate_col] for r in eps8[:-1]] == pytest.approx(rates, abs=1e-6)


def test_report_markdown():
    md = make_report().to_markdown()
    assert "||uI-uN||_eps" in md and "---" in md
    assert md.splitlines()[0] == "problem = outflow-layers, mu0 = 1.0"


def test_report_csv_deterministic():
    assert make_report().to_csv() == make_report().to_csv()


def test_report_from_csv_round_trip():
    report = make_report()
    again = ErrorReport.from_csv(report.to_csv())
    assert again.to_csv() == report.to_csv()
    assert again.meta == {"problem": "outflow-layers", "mu0": "1.0"}
