import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sdfem.analysis import nodal_interpolant
from sdfem.assembly import DiscreteField
from sdfem.errors import ConfigurationError
from sdfem.mesh import MeshParams, build_macro_mesh, build_mesh
from sdfem.postprocess import eval_quadratic, locate, postprocess
from sdfem.verify import _edge_continuity, _sample_points, postprocess_suite, quadratic_field_of


def setup(N=8, eps=1e-4):
    mesh = build_mesh(MeshParams(N=N, epsilon=eps, beta1=2.0, beta2=1.0))
    return mesh, build_macro_mesh(mesh)


def quad(a):
    return lambda x, y: a[0] + a[1] * x + a[2] * y + a[3] * x * x + a[4] * x * y + a[5] * y * y


@settings(max_examples=30, deadline=None)
@given(a=st.lists(st.floats(-10, 10), min_size=6, max_size=6),
       eps=st.sampled_from([1.0, 1e-4, 1e-8]), seed=st.integers(0, 2 ** 16))
def test_quadratics_reproduced(a, eps, seed):
    mesh, macro = setup(8, eps)
    q = quad(a)
    pq = postprocess(mesh, macro, nodal_interpolant(mesh, q))
    m, px, py = _sample_points(macro, 5, np.random.default_rng(seed))
    val, _ = eval_quadratic(pq, px, py, macro_index=m)
    scale = max(1.0, max(abs(c) for c in a))
    assert np.max(np.abs(val - q(px, py))) <= 1e-12 * scale


def test_zero_field():
    mesh, macro = setup()
    pf = postprocess(mesh, macro, DiscreteField(mesh, np.zeros(mesh.n_nodes)))
    val, (gx, gy) = eval_quadratic(pf, np.array([0.3, 0.99999]), np.array([0.7, 0.2]))
    assert np.all(val == 0) and np.all(gx == 0) and np.all(gy == 0)


def test_interpolant_and_function_give_same_postprocess():
    mesh, macro = setup(16, 1e-8)
    v = lambda x, y: np.exp(x) * np.sin(3 * y)  # noqa: E731
    a = postprocess(mesh, macro, nodal_interpolant(mesh, v)).coeffs
    b = quadratic_field_of(macro, v).coeffs
    np.testing.assert_array_equal(a, b)


def test_constant_has_zero_gradient():
    mesh, macro = setup(8, 1.0)
    pf = postprocess(mesh, macro, nodal_interpolant(mesh, lambda x, y: 0 * x + 2.5))
    pts = np.random.default_rng(0).random((2, 40))
    val, (gx, gy) = eval_quadratic(pf, *pts)
    np.testing.assert_allclose(val, 2.5, rtol=1e-14)
    assert np.max(np.abs(gx)) < 1e-12 and np.max(np.abs(gy)) < 1e-12


def test_gradient_of_x_squared():
    mesh, macro = setup(8, 1.0)
    pf = postprocess(mesh, macro, nodal_interpolant(mesh, lambda x, y: x * x))
    x, y = np.random.default_rng(1).random((2, 40))
    _, (gx, gy) = eval_quadratic(pf, x, y)
    np.testing.assert_allclose(gx, 2 * x, atol=1e-12)
    np.testing.assert_allclose(gy, 0.0, atol=1e-12)


@pytest.mark.parametrize("eps", [1e-4, 1e-8])
def test_continuity_across_macro_edges(eps):
    mesh, macro = setup(16, eps)
    assert _edge_continuity(mesh, macro, np.random.default_rng(2), points=50) <= 1e-13


def test_continuity_at_physical_points_on_uniform_mesh():
    mesh, macro = setup(8, 1.0)
    rng = np.random.default_rng(3)
    pf = postprocess(mesh, macro, DiscreteField(mesh, rng.standard_normal(mesh.n_nodes)))
    # diagonal of block (1, 2): from (0.5, 0.5) to (0.25, 0.75)
    tau = rng.random(20)
    x, y = 0.5 - 0.25 * tau, 0.5 + 0.25 * tau
    lower = 2 * (1 + 2 * 4)
    a, _ = eval_quadratic(pf, x, y, macro_index=lower)
    b, _ = eval_quadratic(pf, x, y, macro_index=lower + 1)
    np.testing.assert_allclose(a, b, atol=1e-13)


def test_locate_ties_and_errors():
    mesh, macro = setup(8, 1.0)
    # the centre of block 0's diagonal lies on both macros; ties go to the lower index
    assert locate(macro, 0.125, 0.125) == 0
    assert locate(macro, 0.2, 0.2) == 1
    assert locate(macro, 0.0, 0.0) == 0
    assert locate(macro, 1.0, 1.0) == len(macro) - 1
    for x, y in ((1.5, 0.5), (-0.1, 0.2), (np.nan, 0.3)):
        with pytest.raises(ValueError):
            locate(macro, x, y)


def test_mismatched_mesh_rejected():
    mesh, macro = setup(8)
    other, _ = setup(8)
    with pytest.raises(ConfigurationError):
        postprocess(mesh, macro, DiscreteField(other, np.zeros(other.n_nodes)))


def test_stability_constant_bounded():
    result = postprocess_suite(Ns=(8,), epsilons=(1e-4,), stability_samples=20)
    assert result.passed, result.details
    assert result.value <= 10.0
