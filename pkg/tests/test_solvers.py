import numpy as np
import pytest
import scipy.linalg as sla
from hypothesis import given
from hypothesis import strategies as st

from quasimild import (BlowUpError, FixedPointError, SigmaSpec, SolverConfig, TimeMesh, build_grid,
                       cross_solver_gap, linear_heat_model, mild_residual, sample_path, skt_model,
                       solve_linear_pathwise_mild, solve_quasilinear_fixed_point, solve_weak_galerkin,
                       stochastic_convolution_oracle, weak_residual)
from quasimild.operators import operator_entries
from quasimild.solvers import relative_sup_error


def _zero_noise_skt():
    return skt_model((1, 1), (1, 1), (2, 2), (1, 1), np.ones((2, 2)), SigmaSpec((0.0,), kind="affine"))


def test_config_validation():
    for bad in (dict(theta=1.5), dict(fp_tol=0.0), dict(fp_max_iter=0), dict(relaxation=0.0)):
        with pytest.raises(ValueError):
            SolverConfig(**bad)


def test_zero_noise_zero_state_is_a_fixed_point():
    model = _zero_noise_skt()
    grid = build_grid(1.0, 8, "neumann", 2)
    path = sample_path(0, TimeMesh(0.0, 0.1, 32), model.n_modes)
    u0 = np.zeros(grid.m)
    mild = solve_quasilinear_fixed_point(model, u0, path, grid)
    weak = solve_weak_galerkin(model, u0, path, grid)
    assert mild.iterations_used == 1
    assert np.all(mild.states == 0) and np.all(weak.states == 0)
    assert cross_solver_gap(weak, mild) == 0.0
    assert weak_residual(mild, model, path, grid).weak_residual_static == 0.0
    assert weak_residual(mild, model, path, grid, mode="evolution").weak_residual_evolution == 0.0
    assert mild_residual(mild, model, path, grid) == 0.0


def test_linear_model_needs_two_picard_iterations(heat, dirichlet_grid):
    path = sample_path(4, TimeMesh(0.0, 0.1, 64), heat.n_modes)
    traj = solve_quasilinear_fixed_point(heat, np.zeros(dirichlet_grid.m), path, dirichlet_grid)
    assert traj.iterations_used == 2
    assert traj.metadata["increments"][1] <= 1e-12


def test_deterministic_heat_against_closed_form():
    grid = build_grid(1.0, 63, "dirichlet")
    model = linear_heat_model(1.0, SigmaSpec((0.0,)))
    T = 0.1
    path = sample_path(0, TimeMesh(0.0, T, 256), 1)
    u0 = np.sin(np.pi * grid.nodes)
    exact = np.exp(-np.pi**2 * T) * u0
    mild = solve_quasilinear_fixed_point(model, u0, path, grid)
    weak = solve_weak_galerkin(model, u0, path, grid)
    assert grid.norm(mild.states[-1] - exact) / grid.norm(exact) < 1e-3
    assert grid.norm(weak.states[-1] - exact) / grid.norm(exact) < 5e-3


def test_mild_matches_exact_oracle_on_linear_additive(heat, dirichlet_grid):
    errs = []
    for K in (128, 512):
        path = sample_path(9, TimeMesh(0.0, 0.25, K), heat.n_modes)
        u0 = np.zeros(dirichlet_grid.m)
        oracle = stochastic_convolution_oracle(heat, u0, path, dirichlet_grid)
        mild = solve_quasilinear_fixed_point(heat, u0, path, dirichlet_grid)
        errs.append(relative_sup_error(mild, oracle))
    assert errs[1] < errs[0] and errs[1] < 0.02


def test_oracle_mean_matches_semigroup(dirichlet_grid):
    """Averaging over paths removes the noise: the mean is ``e^{tA} u0``."""
    model = linear_heat_model(1.0, SigmaSpec.decaying(4, 0.5))
    mesh = TimeMesh(0.0, 0.05, 16)
    u0 = np.sin(np.pi * dirichlet_grid.nodes)
    finals = [stochastic_convolution_oracle(model, u0, sample_path(s, mesh, 4), dirichlet_grid).states[-1]
              for s in range(400)]
    a = operator_entries(model, u0, dirichlet_grid)
    expected = sla.expm(0.05 * a) @ u0
    assert dirichlet_grid.norm(np.mean(finals, axis=0) - expected) < 0.05


def test_oracle_rejects_nonlinear(skt, skt_grid):
    path = sample_path(0, TimeMesh(0.0, 0.1, 4), skt.n_modes)
    with pytest.raises(ValueError):
        stochastic_convolution_oracle(skt, np.zeros(skt_grid.m), path, skt_grid)


@given(cut=st.integers(4, 31))
def test_adaptedness(cut):
    """Perturbing increments after ``cut`` leaves the weak path before ``cut`` untouched."""
    skt = skt_model((1, 1), (1, 1), (2, 2), (1, 1), np.ones((2, 2)), SigmaSpec.decaying(4, 0.05, kind="affine"))
    skt_grid = build_grid(1.0, 8, "neumann", 2)
    path = sample_path(1, TimeMesh(0.0, 0.1, 32), skt.n_modes)
    bumped = path.truncated(cut, path.increments[cut:] + 1.0)
    u0 = np.full(skt_grid.m, 0.5)
    a = solve_weak_galerkin(skt, u0, path, skt_grid).states
    b = solve_weak_galerkin(skt, u0, bumped, skt_grid).states
    np.testing.assert_array_equal(a[:cut + 1], b[:cut + 1])


def test_mild_adaptedness_with_matching_iteration_counts(skt, skt_grid):
    path = sample_path(2, TimeMesh(0.0, 0.1, 32), skt.n_modes)
    cut = 20
    bumped = path.truncated(cut, path.increments[cut:] * 1.001)
    u0 = np.full(skt_grid.m, 0.5)
    cfg = SolverConfig(fp_tol=1e-300, fp_max_iter=6)
    with pytest.raises(FixedPointError) as ea:
        solve_quasilinear_fixed_point(skt, u0, path, skt_grid, cfg)
    with pytest.raises(FixedPointError) as eb:
        solve_quasilinear_fixed_point(skt, u0, bumped, skt_grid, cfg)
    va, vb = ea.value.last_iterates[1], eb.value.last_iterates[1]
    np.testing.assert_array_equal(va[:cut + 1], vb[:cut + 1])


def test_skt_picard_contracts(skt, skt_grid):
    path = sample_path(5, TimeMesh(0.0, 0.25, 128), skt.n_modes)
    traj = solve_quasilinear_fixed_point(skt, np.zeros(skt_grid.m), path, skt_grid)
    assert traj.iterations_used <= 10
    assert max(traj.contraction_ratios) < 1
    assert mild_residual(traj, skt, path, skt_grid) <= 2 * SolverConfig().fp_tol + 1e-6


def test_residuals_and_gap_on_skt(skt, skt_grid):
    path = sample_path(6, TimeMesh(0.0, 0.25, 256), skt.n_modes)
    u0 = np.zeros(skt_grid.m)
    mild = solve_quasilinear_fixed_point(skt, u0, path, skt_grid)
    weak = solve_weak_galerkin(skt, u0, path, skt_grid)
    static = weak_residual(mild, skt, path, skt_grid).weak_residual_static
    evo = weak_residual(mild, skt, path, skt_grid, mode="evolution")
    assert cross_solver_gap(weak, mild) < 1e-2
    assert static < 1e-3
    assert evo.weak_residual_evolution <= 3 * static + 1e-6
    assert evo.l1_term >= 0 and evo.l2_term >= 0
    with pytest.raises(ValueError):
        weak_residual(mild, skt, path, skt_grid, mode="bogus")


def test_fixed_point_error_carries_iterates(skt, skt_grid):
    path = sample_path(7, TimeMesh(0.0, 0.1, 16), skt.n_modes)
    with pytest.raises(FixedPointError) as err:
        solve_quasilinear_fixed_point(skt, np.zeros(skt_grid.m), path, skt_grid,
                                      SolverConfig(fp_tol=1e-300, fp_max_iter=2))
    prev, last = err.value.last_iterates
    assert prev.shape == last.shape == (17, skt_grid.m)
    assert len(err.value.ratios) == 1


def test_blowup_is_reported_with_step(heat, dirichlet_grid):
    path = sample_path(0, TimeMesh(0.0, 0.1, 16), heat.n_modes)
    cfg = SolverConfig(blowup_threshold=1e-6)
    with pytest.raises(BlowUpError) as err:
        solve_weak_galerkin(heat, np.zeros(dirichlet_grid.m), path, dirichlet_grid, cfg)
    assert err.value.step == 1


def test_input_shape_checks(heat, dirichlet_grid):
    path = sample_path(0, TimeMesh(0.0, 0.1, 4), heat.n_modes)
    with pytest.raises(ValueError):
        solve_weak_galerkin(heat, np.zeros(3), path, dirichlet_grid)
    with pytest.raises(ValueError):
        solve_weak_galerkin(heat, np.zeros(dirichlet_grid.m), sample_path(0, path.mesh, 2), dirichlet_grid)
    with pytest.raises(ValueError):
        solve_linear_pathwise_mild(np.zeros((3, dirichlet_grid.m)), heat, np.zeros(dirichlet_grid.m),
                                   path, dirichlet_grid)


def test_identity_defect_shrinks_with_the_step(heat, dirichlet_grid):
    fine = sample_path(3, TimeMesh(0.0, 0.1, 1024), heat.n_modes)
    defects = []
    for K in (64, 256, 1024):
        frozen = np.zeros((K + 1, dirichlet_grid.m))
        traj = solve_linear_pathwise_mild(frozen, heat, frozen[0], fine.level(K), dirichlet_grid)
        defects.append(traj.metadata["identity_defect"])
    assert defects[0] > defects[1] > defects[2]
