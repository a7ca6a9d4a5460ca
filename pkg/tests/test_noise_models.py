import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from quasimild import (NoisePath, ParameterConditionError, SigmaSpec, SolverTag, TimeMesh, Trajectory,
                       bounded_diffusion_model, build_grid, hoelder_seminorm, hs_norm_sq, ito_cumulative,
                       ito_integral, linear_heat_model, sample_path, sample_refinable_path, sigma_apply, skt_model)
from quasimild.models import estimate_sigma_constants
from quasimild.noise import hs_tail, sigma_matrix


def test_path_shapes_and_cumulative():
    p = sample_path(7, TimeMesh(0.0, 1.0, 10), 3)
    assert p.increments.shape == (10, 3)
    assert np.all(p.cumulative[0] == 0)
    np.testing.assert_allclose(np.diff(p.cumulative, axis=0), p.increments, rtol=0, atol=1e-15)


@given(seed=st.integers(0, 2**63 - 1), K=st.integers(1, 64), M=st.integers(1, 5))
def test_determinism(seed, K, M):
    a = sample_path(seed, TimeMesh(0.0, 1.0, K), M)
    b = sample_path(seed, TimeMesh(0.0, 1.0, K), M)
    np.testing.assert_array_equal(a.increments, b.increments)


def test_distinct_seeds_differ():
    m = TimeMesh(0.0, 1.0, 16)
    assert not np.array_equal(sample_path(1, m, 2).increments, sample_path(2, m, 2).increments)


def test_zero_modes_rejected():
    with pytest.raises(ValueError):
        sample_path(0, TimeMesh(0.0, 1.0, 4), 0)


@given(seed=st.integers(0, 10_000), levels=st.integers(2, 4))
def test_refinement_consistency(seed, levels):
    fine = sample_refinable_path(seed, TimeMesh(0.0, 1.0, 8), 2, levels)
    assert fine.mesh.K == 8 * 2 ** (levels - 1)
    half = fine.coarsen(2)
    np.testing.assert_array_equal(half.increments, fine.increments[0::2] + fine.increments[1::2])
    coarse = fine.level(8)
    np.testing.assert_allclose(coarse.cumulative[-1], fine.cumulative[-1], rtol=1e-13, atol=1e-15)


def test_dump_load_round_trip(tmp_path):
    p = sample_path(11, TimeMesh(0.0, 0.5, 6), 3)
    p.dump(tmp_path / "path.csv")
    q = NoisePath.load(tmp_path / "path.csv")
    assert (q.seed, q.mesh, q.n_modes) == (p.seed, p.mesh, p.n_modes)
    np.testing.assert_array_equal(q.increments, p.increments)


def test_sigma_apply_constant_additive():
    g = build_grid(1.0, 5, "dirichlet")
    model = linear_heat_model(sigma_spec=SigmaSpec((1.0,), basis="constant"))
    np.testing.assert_array_equal(sigma_apply(model, np.zeros(5), 0, g), np.ones(5))
    with pytest.raises(IndexError):
        sigma_apply(model, np.zeros(5), 1, g)


def test_sigma_matrix_matches_sigma_apply(skt, skt_grid):
    state = np.linspace(0, 1, skt_grid.m)
    s = sigma_matrix(skt, state, skt_grid)
    for q in range(skt.n_modes):
        np.testing.assert_allclose(s[:, q], sigma_apply(skt, state, q, skt_grid), rtol=1e-15)


def test_hs_norm_monotone_in_modes():
    g = build_grid(1.0, 32, "dirichlet")
    vals = [hs_norm_sq(linear_heat_model(sigma_spec=SigmaSpec.decaying(M, 1.0)), np.zeros(g.m), g)
            for M in range(1, 10)]
    assert np.all(np.diff(vals) >= 0)
    assert hs_tail(1.0, 1.0, 8) == pytest.approx(np.pi**2 / 6 - np.sum(1 / np.arange(1, 9) ** 2.0), rel=1e-12)


@given(seed=st.integers(0, 10_000), cut=st.integers(0, 12))
def test_ito_additivity(seed, cut):
    g = build_grid(1.0, 6, "neumann", 2)
    model = skt_model((1, 1), (1, 1), (2, 2), (1, 1), np.ones((2, 2)), SigmaSpec.decaying(3, kind="affine"))
    path = sample_path(seed, TimeMesh(0.0, 1.0, 12), model.n_modes)
    states = np.random.default_rng(seed).uniform(0, 1, (13, g.m))
    whole = ito_integral(model, states, path, 0, 12, g)
    split = ito_integral(model, states, path, 0, cut, g) + ito_integral(model, states, path, cut, 12, g)
    np.testing.assert_allclose(split, whole, rtol=1e-13, atol=1e-15)
    np.testing.assert_allclose(ito_cumulative(model, states, path, g)[-1], whole, rtol=1e-13, atol=1e-15)
    with pytest.raises(IndexError):
        ito_integral(model, states, path, 5, 2, g)


def test_ito_isometry_statistics():
    g = build_grid(1.0, 8, "dirichlet")
    model = linear_heat_model(sigma_spec=SigmaSpec.decaying(3, 1.0))
    mesh = TimeMesh(0.0, 0.5, 4)
    zero = np.zeros((5, g.m))
    sq = [g.norm(ito_cumulative(model, zero, sample_path(s, mesh, 3), g)[-1]) ** 2 for s in range(4000)]
    ratio = np.mean(sq) / hs_norm_sq(model, zero[0], g)
    assert 0.9 * 0.5 <= ratio <= 1.1 * 0.5


def test_hoelder_seminorm_trivial_cases():
    mesh = TimeMesh(0.0, 1.0, 16)
    const = Trajectory(mesh, np.ones((17, 3)), SolverTag.WEAK_GALERKIN)
    assert hoelder_seminorm(const, 0.5) == 0.0
    w = np.array([3.0, 4.0])
    lin = Trajectory(mesh, mesh.nodes[:, None] * w, SolverTag.WEAK_GALERKIN)
    assert hoelder_seminorm(lin, 1.0) == pytest.approx(5.0, rel=1e-12)
    with pytest.raises(ValueError):
        hoelder_seminorm(lin, 0.0)


def test_hoelder_seminorm_brownian_stable_under_refinement():
    fine = sample_path(3, TimeMesh(0.0, 1.0, 2048), 1)
    vals = []
    for path in (fine.coarsen(2), fine):
        traj = Trajectory(path.mesh, path.cumulative, SolverTag.EXACT_ORACLE)
        vals.append(hoelder_seminorm(traj, 0.4))
    assert np.isfinite(vals).all() and vals[1] < 1.25 * vals[0]


def test_trajectory_rejects_wrong_length():
    with pytest.raises(ValueError):
        Trajectory(TimeMesh(0.0, 1.0, 4), np.zeros((3, 2)), SolverTag.LINEAR_MILD)


def test_skt_parameter_condition():
    skt_model((1, 1), (1, 1), (2, 2), (1, 1), np.ones((2, 2)))
    with pytest.raises(ParameterConditionError) as err:
        skt_model((1, 1), (1, 1), (3, 2), (1, 1), np.ones((2, 2)))
    assert "gamma1^2 < 8 alpha1 beta1" in str(err.value)
    with pytest.raises(ParameterConditionError):
        skt_model((1, 0), (1, 1), (1, 1), (1, 1), np.ones((2, 2)))


def test_skt_drift_vanishes_at_unit_state():
    model = skt_model((1, 1), (1, 1), (2, 2), (1, 1), np.ones((2, 2)))
    np.testing.assert_allclose(model.F(np.ones(6), 3), 0.0, atol=0)


@given(u=st.lists(st.floats(0, 50), min_size=2, max_size=2))
def test_skt_b_positive_diagonal_and_definite(u):
    model = skt_model((1, 1), (1, 1), (2, 2), (1, 1), np.ones((2, 2)))
    b = model.B(np.array(u))
    assert b[0, 0] > 0 and b[1, 1] > 0
    assert np.linalg.eigvalsh(0.5 * (b + b.T)).min() > 0
    np.testing.assert_array_equal(b, model.B(np.array(u)))


def test_bounded_model_bounds():
    model = bounded_diffusion_model(lambda x: 2 + np.tanh(x), 1, 3)
    assert all(c.passed for c in model.constraints)
    with pytest.raises(ParameterConditionError) as err:
        bounded_diffusion_model(lambda x: x**2, 1, 100)
    assert "b(" in str(err.value)
    with pytest.raises(ParameterConditionError):
        bounded_diffusion_model(lambda x: 2.0, 0.0, 3)


def test_sigma_constants_series_oracle():
    weights = tuple(1 / k**2 for k in range(1, 9))
    spec = SigmaSpec(weights, kind="multiplicative", basis="constant")
    consts = estimate_sigma_constants(spec, (-5.0, 5.0))
    assert consts["lipschitz"] == pytest.approx(sum(1 / k**4 for k in range(1, 9)), rel=1e-10)
    assert np.isfinite(consts["growth"])
    assert consts["lipschitz"] < np.pi**4 / 90
