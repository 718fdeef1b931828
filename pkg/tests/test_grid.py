"""Spectral grid tests: quadrature, transforms, derivatives, serialization."""

import numpy as np
import pytest
from numpy.testing import assert_allclose

from logmink.errors import InvalidParameter
from logmink.grid import (
    HarmonicCoeffs,
    ScalarField,
    analyze,
    build_grid,
    covariant_hessian,
    evaluate_harmonics,
    field_from_csv,
    field_to_csv,
    harmonic_field,
    integrate,
    laplace_beltrami,
    lm_index,
    synthesize,
    tangential_gradient,
)


@pytest.fixture(scope="module")
def grid():
    return build_grid(16)


def test_node_count_and_layout(grid):
    assert grid.L == 16
    assert grid.n_nodes == 2 * (16 + 1) ** 2
    assert grid.n_coeffs == (16 + 1) ** 2
    assert grid.nodes.shape == (grid.n_nodes, 3)
    # colatitude-major ordering: theta constant over each longitude block
    nlon = 2 * (grid.L + 1)
    assert_allclose(grid.theta_nodes[:nlon], grid.theta_nodes[0])
    assert grid.theta_nodes[0] < grid.theta_nodes[nlon]


def test_quadrature_weights_exact(grid):
    assert abs(np.sum(grid.weights) - 4.0 * np.pi) < 1e-12
    # second moment of a coordinate: integral of (u.e3)^2 = 4 pi / 3
    field = ScalarField(grid, grid.nodes[:, 2] ** 2)
    assert abs(integrate(field) - 4.0 * np.pi / 3.0) < 1e-12


def test_harmonics_orthonormal(grid):
    pairs = [(0, 0), (1, -1), (2, 0), (3, 2), (5, -4), (8, 8)]
    for la, ma in pairs:
        for lb, mb in pairs:
            prod = harmonic_field(grid, la, ma).values * \
                harmonic_field(grid, lb, mb).values
            want = 1.0 if (la, ma) == (lb, mb) else 0.0
            assert abs(integrate(ScalarField(grid, prod)) - want) < 1e-12


def test_analyze_synthesize_roundtrip(grid):
    rng = np.random.default_rng(5)
    coeffs = HarmonicCoeffs(16, rng.standard_normal(grid.n_coeffs))
    field = synthesize(coeffs, grid)
    back = analyze(field)
    assert_allclose(back.values, coeffs.values, atol=1e-12)


def test_lower_bandwidth_coeffs_embed(grid):
    coeffs = HarmonicCoeffs(4, np.arange(25, dtype=float))
    field = synthesize(coeffs, grid)
    back = analyze(field)
    assert_allclose(back.values[:25], coeffs.values, atol=1e-12)
    assert_allclose(back.values[25:], 0.0, atol=1e-12)


def test_laplacian_eigenvalues(grid):
    for l, m in [(0, 0), (1, 0), (2, 1), (5, 3), (9, -7), (16, 16)]:
        y = harmonic_field(grid, l, m)
        lap = laplace_beltrami(y)
        assert_allclose(lap.values, -l * (l + 1) * y.values, atol=5e-10)


def test_degree_one_hessian_identity(grid):
    # Hess(v . u) + (v . u) I = 0 for every linear height function
    for axis in range(3):
        field = ScalarField(grid, grid.nodes[:, axis])
        H = covariant_hessian(field)
        W = H + field.values[:, None, None] * np.eye(2)[None, :, :]
        assert np.max(np.abs(W)) < 5e-12


def test_hessian_trace_is_laplacian(grid):
    rng = np.random.default_rng(9)
    coeffs = np.zeros(grid.n_coeffs)
    coeffs[: lm_index(6, 6) + 1] = rng.standard_normal(lm_index(6, 6) + 1)
    field = synthesize(HarmonicCoeffs(16, coeffs), grid)
    H = covariant_hessian(field)
    lap = laplace_beltrami(field)
    assert_allclose(H[:, 0, 0] + H[:, 1, 1], lap.values, atol=1e-9)


def test_gradient_matches_finite_difference(grid):
    # gradient of u.e3 = cos(theta) is -sin(theta) e_theta
    field = ScalarField(grid, grid.nodes[:, 2])
    grad = tangential_gradient(field)
    expected = -np.sin(grid.theta_nodes)[:, None] * grid.e_theta
    assert_allclose(grad, expected, atol=1e-12)


def test_gradient_is_tangential(grid):
    rng = np.random.default_rng(13)
    field = synthesize(HarmonicCoeffs(16, rng.standard_normal(grid.n_coeffs)), grid)
    grad = tangential_gradient(field)
    radial = np.einsum("ij,ij->i", grad, grid.nodes)
    assert np.max(np.abs(radial)) < 1e-9


def test_evaluate_harmonics_off_grid(grid):
    coeffs = np.zeros(grid.n_coeffs)
    coeffs[lm_index(1, 0)] = 1.0
    hc = HarmonicCoeffs(16, coeffs)
    theta = np.array([0.3, 1.2, 2.5])
    phi = np.array([0.1, 3.0, 5.9])
    norm = np.sqrt(3.0 / (4.0 * np.pi))
    assert_allclose(evaluate_harmonics(hc, theta, phi), norm * np.cos(theta),
                    atol=1e-12)


def test_build_grid_validation():
    with pytest.raises(InvalidParameter):
        build_grid(3)
    with pytest.raises(InvalidParameter):
        build_grid(65)
    with pytest.raises(InvalidParameter):
        build_grid(16.5)


def test_grid_cache_identity():
    assert build_grid(8) is build_grid(8)


def test_field_csv_roundtrip(grid):
    rng = np.random.default_rng(3)
    field = synthesize(HarmonicCoeffs(16, rng.standard_normal(grid.n_coeffs)), grid)
    text = field_to_csv(field)
    assert text.splitlines()[0] == "# grid_L=16"
    assert text.splitlines()[1] == "theta,phi,value"
    back = field_from_csv(text)
    assert back.grid is grid
    assert_allclose(back.values, field.values, rtol=0, atol=0)
    # serialization is exact: a second round trip is byte-identical
    assert field_to_csv(back) == text


def test_field_csv_rejects_wrong_grid(grid):
    field = ScalarField(grid, np.ones(grid.n_nodes))
    text = field_to_csv(field)
    with pytest.raises(InvalidParameter):
        field_from_csv(text, grid=build_grid(8))


def test_scalar_field_validation(grid):
    with pytest.raises(InvalidParameter):
        ScalarField(grid, np.ones(7))
    with pytest.raises(InvalidParameter):
        HarmonicCoeffs(16, np.ones(12))
