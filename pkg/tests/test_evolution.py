import numpy as np
import pytest
import scipy.linalg as sla
from hypothesis import given
from hypothesis import strategies as st

from quasimild import (BuildError, TimeMesh, adjoint_family, build_family, check_T_properties,
                       fundamental_identity_residual, propagator, smoothing_diagnostics)
from quasimild.evolution import fundamental_identity_terms
from quasimild.harness.batteries import _autonomous_family, dirichlet_laplacian


def scalar_path(mesh):
    return (-1.0 - mesh.nodes)[:, None, None]


def sym_path(mesh, dim=5, seed=0):
    rng = np.random.default_rng(seed)
    q, _ = np.linalg.qr(rng.standard_normal((dim, dim)))
    base = (q * np.linspace(0.5, 6.0, dim)) @ q.T
    return np.stack([-base * (1 + t) for t in mesh.nodes])


def test_mesh_validation():
    with pytest.raises(ValueError):
        TimeMesh(0.0, 1.0, 0)
    with pytest.raises(ValueError):
        TimeMesh(1.0, 1.0, 4)
    m = TimeMesh(0.0, 1.0, 8)
    assert m.dt == 0.125 and m.nodes[-1] == 1.0
    assert m.coarsen(2).K == 4 and m.refine(2).K == 16


def test_scalar_one_step():
    fam = build_family(np.full((2, 1, 1), -1.0), TimeMesh(0.0, 1.0, 1))
    assert fam.steps[0, 0, 0] == pytest.approx(0.3678794, abs=1e-7)


def test_autonomous_matches_matrix_exponential():
    op, _ = dirichlet_laplacian(8)
    a = np.asarray(op.entries)
    mesh = TimeMesh(0.0, 0.1, 20)
    fam = build_family(np.broadcast_to(a, (21, 8, 8)), mesh)
    for j, i in ((5, 2), (20, 0), (13, 7)):
        exact = (op.eigenvectors * np.exp((j - i) * mesh.dt * op.eigenvalues)) @ op.eigenvectors.T
        got = propagator(fam, j, i)
        assert np.linalg.norm(got - exact, 2) <= 1e-10 * np.linalg.norm(exact, 2)


def test_propagator_identity_and_order():
    mesh = TimeMesh(0.0, 1.0, 10)
    fam = build_family(sym_path(mesh), mesh)
    np.testing.assert_array_equal(propagator(fam, 3, 3), np.eye(5))
    with pytest.raises(IndexError):
        propagator(fam, 2, 5)
    tail = list(fam.from_zero())[-1]
    np.testing.assert_allclose(propagator(fam, 10, 0), tail, rtol=0, atol=0)


@given(triple=st.lists(st.integers(0, 16), min_size=3, max_size=3))
def test_cocycle_property(triple):
    l, i, j = sorted(triple)
    mesh = TimeMesh(0.0, 1.0, 16)
    fam = build_family(sym_path(mesh), mesh)
    lhs = propagator(fam, j, i) @ propagator(fam, i, l)
    rhs = propagator(fam, j, l)
    assert np.linalg.norm(lhs - rhs, 2) <= 1e-12 * np.linalg.norm(rhs, 2)


@given(i=st.integers(0, 16), j=st.integers(0, 16))
def test_contraction_for_dissipative_symmetric_path(i, j):
    i, j = min(i, j), max(i, j)
    mesh = TimeMesh(0.0, 1.0, 16)
    fam = build_family(sym_path(mesh), mesh)
    assert np.linalg.norm(propagator(fam, j, i), 2) <= 1 + 1e-10


def test_build_error_names_step():
    mesh = TimeMesh(0.0, 1.0, 3)
    path = np.full((4, 1, 1), -1.0)
    path[2] = 1e6
    with pytest.raises(BuildError) as err:
        build_family(path, mesh)
    assert err.value.step == 2


@given(seed=st.integers(0, 1000))
def test_adjoint_duality(seed):
    rng = np.random.default_rng(seed)
    mesh = TimeMesh(0.0, 1.0, 12)
    ops = np.stack([-np.eye(4) * (1 + t) + 0.3 * t * rng.standard_normal((4, 4)) for t in mesh.nodes])
    fam = build_family(ops, mesh)
    adj = adjoint_family(fam)
    i, j = sorted(rng.integers(0, 13, size=2))
    u = propagator(fam, j, i)
    v = propagator(adj, mesh.K - i, mesh.K - j)
    assert np.max(np.abs(v - u.T)) <= 1e-14 * max(1.0, np.abs(u).max())
    x, y = rng.standard_normal(4), rng.standard_normal(4)
    assert (u @ x) @ y == pytest.approx(x @ (v @ y), rel=1e-12, abs=1e-14)


def test_adjoint_of_symmetric_autonomous_is_itself():
    op, _ = dirichlet_laplacian(6)
    mesh = TimeMesh(0.0, 0.1, 5)
    fam = build_family(np.broadcast_to(op.entries, (6, 6, 6)), mesh)
    adj = adjoint_family(fam)
    np.testing.assert_allclose(adj.steps, fam.steps, rtol=0, atol=1e-15)


def test_adjoint_nonautonomous_diagonal_closed_form():
    mesh = TimeMesh(0.0, 1.0, 8)
    ops = np.stack([np.diag([-1.0 - t, -2.0 * (1 + t * t)]) for t in mesh.nodes])
    adj = adjoint_family(build_family(ops, mesh))
    i, j = 2, 7
    rates = np.array([np.diag(ops[k]) for k in range(i, j)])
    exact = np.diag(np.exp(mesh.dt * rates.sum(axis=0)))
    np.testing.assert_allclose(propagator(adj, mesh.K - i, mesh.K - j), exact, rtol=1e-13)


def test_T_properties_scalar_taylor_bound():
    for K in (64, 128):
        mesh = TimeMesh(0.0, 1.0, K)
        rep = check_T_properties(build_family(np.full((K + 1, 1, 1), -1.0), mesh))
        assert rep["t1_identity"] == 0.0
        assert rep["t5_derivative"] <= np.e / 2 * mesh.dt


def test_T5_smoothing_scalar_time_varying():
    mesh = TimeMesh(0.0, 1.0, 256)
    rep = check_T_properties(build_family(scalar_path(mesh), mesh))
    s, t = np.meshgrid(mesh.nodes, mesh.nodes, indexing="xy")
    closed = np.where(t > s, (t - s) * (1 + t) * np.exp(-(t - s) - (t**2 - s**2) / 2), 0.0)
    assert rep["t5_smoothing"] <= 1.2
    assert rep["t5_smoothing"] == pytest.approx(closed.max(), rel=0.02)


def test_fundamental_identity_scalar():
    fam = _autonomous_family(np.array([[-1.0]]), TimeMesh(0.0, 1.0, 128))
    quad, rhs = fundamental_identity_terms(fam, np.ones(1), np.ones(1))
    assert rhs == pytest.approx(np.exp(-1) - 1, abs=1e-12)
    assert abs(quad - rhs) <= 1e-4
    assert fundamental_identity_residual(fam, np.zeros(1), np.ones(1)) == 0.0


@given(seed=st.integers(0, 10_000))
def test_fundamental_identity_order_one_on_smooth_path(seed):
    # the left-frozen family is first order, so the nonautonomous residual is O(dt);
    # coordinate pairs avoid cancellation between components of a random (x, x*)
    rng = np.random.default_rng(seed)
    rates = -rng.uniform(0.5, 2.0, 3)
    i = int(rng.integers(3))
    e = np.eye(3)[i]
    res = []
    for K in (64, 128):
        mesh = TimeMesh(0.0, 1.0, K)
        ops = np.stack([np.diag(rates) * (1 + 0.5 * np.sin(t)) for t in mesh.nodes])
        res.append(fundamental_identity_residual(build_family(ops, mesh), e, e))
    assert 1.7 <= res[0] / res[1] <= 2.3


def test_smoothing_closed_form():
    op, _ = dirichlet_laplacian(16)
    fam = _autonomous_family(np.asarray(op.entries), TimeMesh(0.0, 0.25, 512))
    rep = smoothing_diagnostics(fam, theta=0.0, gamma=0.5, lam=0.0, max_starts=1)
    assert rep["gamma_bound"] == pytest.approx((2 * np.e) ** -0.5, rel=1e-2)
    assert rep["gamma_bound"] <= (2 * np.e) ** -0.5 + 1e-12
    assert rep["theta_bound"] <= 1 + 1e-10
    deg = smoothing_diagnostics(fam, theta=0.0, gamma=0.0, lam=0.0, max_starts=1)
    t5 = check_T_properties(fam, n_triples=2, max_starts=1)["t5_smoothing"]
    assert deg["mixed_bound"] == pytest.approx(t5, rel=1e-10)
