import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from quasimild import DomainError, assemble_operator, build_grid, dalpha_norm, default_rho_grid, fractional_power
from quasimild import linear_heat_model
from quasimild.fractional import domain_comparison_constant


@pytest.fixture(scope="module")
def lap16():
    g = build_grid(1.0, 16, "dirichlet")
    return assemble_operator(linear_heat_model(), np.zeros(g.m), g)


def _rel(a, b):
    return np.linalg.norm(a - b, 2) / np.linalg.norm(b, 2)


def test_trivial_exponents(lap16):
    np.testing.assert_array_equal(fractional_power(lap16, 0.0), np.eye(16))
    assert _rel(fractional_power(lap16, 1.0), -lap16.entries) <= 1e-13
    assert _rel(fractional_power(lap16, 1.0, "dunford"), -lap16.entries) <= 1e-13


def test_law_of_exponents(lap16):
    comp = fractional_power(lap16, 0.3) @ fractional_power(lap16, 0.7)
    assert _rel(comp, -lap16.entries) <= 1e-8


@pytest.mark.parametrize("alpha", [0.25, 0.5, 0.75, 1.3, -0.4, 2.5])
def test_dunford_matches_spectral(lap16, alpha):
    assert _rel(fractional_power(lap16, alpha, "dunford"), fractional_power(lap16, alpha)) <= 1e-6


def test_dunford_on_nonsymmetric_sectorial_matrix():
    rng = np.random.default_rng(1)
    q = rng.standard_normal((6, 6))
    b = q @ np.diag([1.0, 2.0, 3.0, 5.0, 8.0, 13.0]) @ np.linalg.inv(q)
    half = fractional_power(-b, 0.5, "dunford")
    assert _rel(half @ half, b) <= 1e-8


@given(alpha=st.floats(0.05, 0.95))
def test_spectral_powers_commute_with_operator(lap16, alpha):
    a = lap16.entries
    p = fractional_power(lap16, alpha)
    assert np.linalg.norm(p @ a - a @ p, 2) <= 1e-10 * np.linalg.norm(p, 2) * np.linalg.norm(a, 2)


@given(a=st.floats(0.05, 0.9), b=st.floats(0.05, 0.9))
def test_law_of_exponents_property(lap16, a, b):
    comp = fractional_power(lap16, a, "dunford") @ fractional_power(lap16, b, "dunford")
    assert _rel(comp, fractional_power(lap16, a + b)) <= 1e-8


def test_non_sectorial_input_rejected():
    with pytest.raises(DomainError):
        fractional_power(np.diag([1.0, -1.0]), 0.5, "dunford")
    with pytest.raises(DomainError):
        fractional_power(np.diag([1.0, -1.0]), 0.5, "spectral")
    g = build_grid(1.0, 6, "neumann")
    singular = assemble_operator(linear_heat_model(), np.zeros(6), g)
    with pytest.raises(DomainError):
        fractional_power(singular, 0.5, "dunford")


def test_unknown_method():
    with pytest.raises(ValueError):
        fractional_power(np.diag([-1.0, -2.0]), 0.5, "magic")


def test_dalpha_zero_vector_and_empty_grid(lap16):
    assert dalpha_norm(lap16, np.zeros(16), 0.5, default_rho_grid(lap16)) == 0.0
    with pytest.raises(ValueError):
        dalpha_norm(lap16, np.ones(16), 0.5, [])


@pytest.mark.parametrize("alpha", [0.25, 0.5, 0.75])
def test_dalpha_eigenvector_closed_form(lap16, alpha):
    rho = default_rho_grid(lap16, 200)
    for k in (0, 8, 15):
        mu = -lap16.eigenvalues[k]
        closed = alpha**alpha * (1 - alpha) ** (1 - alpha) * mu**alpha
        val = dalpha_norm(lap16, lap16.eigenvectors[:, k], alpha, rho)
        assert val == pytest.approx(closed, rel=1e-3)
        assert val <= closed * (1 + 1e-12)


def test_dalpha_dense_route_agrees_with_spectral(lap16):
    rho = default_rho_grid(lap16, 50)
    v = np.random.default_rng(0).standard_normal(16)
    assert dalpha_norm(lap16.entries, v, 0.4, rho) == pytest.approx(dalpha_norm(lap16, v, 0.4, rho), rel=1e-10)


@given(n=st.integers(20, 80))
def test_dalpha_monotone_under_grid_refinement(lap16, n):
    v = np.arange(16.0) - 3.0
    coarse = default_rho_grid(lap16, n)
    fine = np.union1d(coarse, default_rho_grid(lap16, 2 * n))
    assert dalpha_norm(lap16, v, 0.5, fine) >= dalpha_norm(lap16, v, 0.5, coarse)


def test_domain_comparison_direction(lap16):
    c = domain_comparison_constant(lap16, 0.5, n_samples=32)
    assert 0 < c <= 1.0 + 1e-12
