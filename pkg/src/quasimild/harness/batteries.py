"""Self-contained numerical batteries; each returns a list of :class:`Check` records."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..assumptions import check_assumptions
from ..errors import ParameterConditionError
from ..evolution import (EvolutionFamily, TimeMesh, build_family, check_T_properties,
                         fundamental_identity_residual, smoothing_diagnostics)
from ..fractional import dalpha_norm, default_rho_grid, domain_comparison_constant, fractional_power
from ..grid import build_grid
from ..models import SigmaSpec, bounded_diffusion_model, linear_heat_model, skt_model
from ..noise import NoisePath, hs_norm_sq, ito_cumulative, sample_path
from ..operators import assemble_operator, operator_entries
from ..solvers import solve_weak_galerkin


@dataclass(frozen=True)
class Check:
    name: str
    value: float
    threshold: str
    passed: bool
    topic: str = ""


def _check(name, value, ok, threshold, topic):
    return Check(name, float(value), threshold, bool(ok), topic)


def halving_factors(values) -> np.ndarray:
    v = np.asarray(values, dtype=float)
    return v[:-1] / v[1:]


def _autonomous_family(a: np.ndarray, mesh: TimeMesh) -> EvolutionFamily:
    """Family of a constant generator without a K-fold batch exponential."""
    from scipy.linalg import expm
    step = expm(mesh.dt * a)
    return EvolutionFamily(mesh, np.broadcast_to(step, (mesh.K,) + a.shape),
                           np.broadcast_to(a, (mesh.K + 1,) + a.shape))


def frozen_skt_operator(n_points: int = 16) -> tuple:
    grid = build_grid(1.0, n_points, "neumann", 2)
    model = skt_model((1, 1), (1, 1), (2, 2), (1, 1), np.ones((2, 2)))
    x = grid.nodes
    state = np.concatenate([0.5 + 0.3 * np.cos(np.pi * x), 0.5 + 0.2 * np.cos(2 * np.pi * x)])
    return operator_entries(model, state, grid), grid


def smooth_pair(grid, seed: int = 0, n_modes: int = 3) -> tuple:
    """Random combinations of the lowest smooth modes, used as ``x`` and ``x*``."""
    rng = np.random.default_rng(seed)
    basis = grid.test_basis(n_modes)
    return basis @ rng.standard_normal(basis.shape[1]), basis @ rng.standard_normal(basis.shape[1])


def identity_battery(levels=(512, 1024, 2048, 4096), seed: int = 0) -> list:
    checks = []
    mesh = TimeMesh(0.0, 1.0, 128)
    fam = _autonomous_family(np.array([[-1.0]]), mesh)
    res = fundamental_identity_residual(fam, np.ones(1), np.ones(1))
    checks.append(_check("fundamental identity, scalar a=-1, t=1, K=128", res, res <= 1e-4, "<= 1e-4", "identity"))

    a, grid = frozen_skt_operator()
    x, xstar = smooth_pair(grid, seed)
    residuals = [fundamental_identity_residual(_autonomous_family(a, TimeMesh(0.0, 0.25, K)), x, xstar)
                 for K in levels]
    factors = halving_factors(residuals)
    for K, r in zip(levels, residuals):
        checks.append(_check(f"fundamental identity, frozen SKT, K={K}", r, True, "reported", "identity"))
    checks.append(_check("fundamental identity order-2 factor (min over doublings)", factors.min(),
                         np.all((factors >= 3.3) & (factors <= 4.7)), "in [3.3, 4.7]", "identity"))
    checks.append(_check("fundamental identity order-2 factor (max over doublings)", factors.max(),
                         np.all((factors >= 3.3) & (factors <= 4.7)), "in [3.3, 4.7]", "identity"))
    return checks


def _scalar_path(mesh: TimeMesh) -> np.ndarray:
    return (-1.0 - mesh.nodes)[:, None, None]


def _matrix_path(mesh: TimeMesh, seed: int = 0, dim: int = 4) -> np.ndarray:
    rng = np.random.default_rng(seed)
    q, _ = np.linalg.qr(rng.standard_normal((dim, dim)))
    base = (q * np.linspace(1.0, 4.0, dim)) @ q.T
    skew = rng.standard_normal((dim, dim))
    skew = 0.5 * (skew - skew.T)
    return np.stack([-(base * (1.0 + 0.5 * t) + t * skew) for t in mesh.nodes])


def evolution_battery(K: int = 256, seed: int = 0) -> list:
    checks = []
    for label, path_fn in (("scalar a(t)=-1-t", _scalar_path), ("4x4 nonsymmetric path", _matrix_path)):
        reports = [check_T_properties(build_family(path_fn(m), m), n_triples=100, seed=seed)
                   for m in (TimeMesh(0.0, 1.0, K), TimeMesh(0.0, 1.0, 2 * K))]
        coarse, fine = reports
        checks.append(_check(f"T1 identity deviation, {label}", coarse["t1_identity"],
                             coarse["t1_identity"] == 0.0, "== 0", "evolution family"))
        t2 = max(coarse["t2_cocycle"], fine["t2_cocycle"])
        checks.append(_check(f"T2 cocycle relative deviation, {label}", t2, t2 <= 1e-12, "<= 1e-12",
                             "evolution family"))
        factor = coarse["t5_derivative"] / fine["t5_derivative"]
        checks.append(_check(f"T5 derivative residual halving factor, {label}", factor, 1.7 <= factor <= 2.3,
                             "in [1.7, 2.3]", "evolution family"))
        drift = abs(fine["t5_smoothing"] - coarse["t5_smoothing"]) / coarse["t5_smoothing"]
        checks.append(_check(f"sup (t-s)|A U| refinement drift, {label}", drift, drift < 0.1, "< 0.1",
                             "evolution family"))
        checks.append(_check(f"sup (t-s)|A U|, {label}", fine["t5_smoothing"], np.isfinite(fine["t5_smoothing"]),
                             "finite", "evolution family"))
        checks.append(_check(f"sup |U(t,s)|, {label}", fine["t4_bound"], fine["t4_bound"] <= 1.0 + 1e-10,
                             "<= 1 + 1e-10", "evolution family"))
    return checks


def dirichlet_laplacian(n_points: int = 16) -> tuple:
    grid = build_grid(1.0, n_points, "dirichlet")
    return assemble_operator(linear_heat_model(), np.zeros(grid.m), grid), grid


def smoothing_battery(K: int = 256) -> list:
    op, _ = dirichlet_laplacian()
    a = np.asarray(op.entries)
    values = []
    for k in (K, 2 * K):
        fam = _autonomous_family(a, TimeMesh(0.0, 0.25, k))
        values.append(smoothing_diagnostics(fam, theta=0.5, gamma=0.5, lam=0.25, max_starts=1))
    exact = (2 * np.e) ** -0.5
    g = values[1]["gamma_bound"]
    checks = [_check("(t-s)^0.5 |U (-A)^0.5| vs (2e)^-1/2", abs(g - exact) / exact, abs(g - exact) / exact <= 0.01,
                     "<= 0.01 relative", "smoothing")]
    for key in ("gamma_bound", "theta_bound", "mixed_bound"):
        lo, hi = values[0][key], values[1][key]
        drift = abs(hi - lo) / lo
        checks.append(_check(f"smoothing {key} refinement drift", drift, np.isfinite(hi) and drift < 0.1,
                             "finite, drift < 0.1", "smoothing"))
    return checks


def fractional_battery(n_points: int = 16) -> list:
    op, _ = dirichlet_laplacian(n_points)
    b = -np.asarray(op.entries)
    nb = np.linalg.norm(b, 2)
    checks = []
    comp = fractional_power(op, 0.3) @ fractional_power(op, 0.7)
    defect = np.linalg.norm(comp - b, 2) / nb
    checks.append(_check("law of exponents 0.3 + 0.7 (spectral)", defect, defect <= 1e-8, "<= 1e-8", "fractional"))
    comp = fractional_power(op, 0.3, "dunford") @ fractional_power(op, 0.7, "dunford")
    defect = np.linalg.norm(comp - b, 2) / nb
    checks.append(_check("law of exponents 0.3 + 0.7 (Dunford)", defect, defect <= 1e-8, "<= 1e-8", "fractional"))
    for alpha in (0.25, 0.5, 0.75):
        s = fractional_power(op, alpha, "spectral")
        d = fractional_power(op, alpha, "dunford")
        rel = np.linalg.norm(s - d, 2) / np.linalg.norm(s, 2)
        checks.append(_check(f"Dunford vs spectral, alpha={alpha}", rel, rel <= 1e-6, "<= 1e-6", "fractional"))
    rho = default_rho_grid(op, 200)
    mu = -op.eigenvalues
    worst = 0.0
    for alpha in (0.25, 0.5, 0.75):
        for k in (0, len(mu) // 2, len(mu) - 1):
            closed = alpha**alpha * (1 - alpha) ** (1 - alpha) * mu[k] ** alpha
            val = dalpha_norm(op, op.eigenvectors[:, k], alpha, rho)
            worst = max(worst, abs(val - closed) / closed)
    checks.append(_check("eigenvector D_alpha norm vs closed form (200-point grid)", worst, worst <= 1e-3,
                         "<= 1e-3", "fractional"))
    c = domain_comparison_constant(op, 0.5)
    checks.append(_check("domain comparison constant |v|_D / |(-A)^0.5 v|", c, np.isfinite(c), "finite",
                         "fractional"))
    return checks


def audit_battery(n_points: int = 24, K: int = 256, seed: int = 0) -> list:
    checks = []
    grid = build_grid(1.0, n_points, "neumann", 2)
    skt = skt_model((1, 1), (1, 1), (2, 2), (1, 1), np.ones((2, 2)))
    rng = np.random.default_rng(seed)
    x = grid.nodes
    states = [np.full(grid.m, c) for c in (0.0, 0.5, 2.0, 10.0)]
    for _ in range(6):
        amp = rng.uniform(0.0, 3.0, size=(2, 3))
        prof = [amp[s, 0] + amp[s, 1] * (1 + np.cos(np.pi * x)) + amp[s, 2] * (1 + np.cos(2 * np.pi * x))
                for s in range(2)]
        states.append(np.concatenate(prof))
    rep = check_assumptions(skt, states, grid)
    checks.append(_check("SKT gamma=(2,2): kappa_est on nonnegative states", rep.kappa_est, rep.kappa_est > 0,
                         "> 0", "coercivity"))
    checks.append(_check("SKT gamma=(2,2): resolvent constant", rep.resolvent_M, np.isfinite(rep.resolvent_M),
                         "finite", "resolvent"))

    for ratio, expect_ok in ((7.9, True), (8.1, False)):
        g = np.sqrt(ratio)
        try:
            skt_model((1, 1), (1, 1), (g, g), (1, 1), np.ones((2, 2)))
            accepted = True
        except ParameterConditionError:
            accepted = False
        checks.append(_check(f"SKT gamma^2 = {ratio} alpha beta {'accepted' if expect_ok else 'rejected'}",
                             float(accepted), accepted == expect_ok, "accepted" if expect_ok else "rejected",
                             "parameter condition"))

    dgrid = build_grid(1.0, 32, "dirichlet")
    bd = bounded_diffusion_model(lambda xi: 2 + np.tanh(xi), 1.0, 3.0)
    dx = dgrid.nodes
    bstates = [np.full(dgrid.m, c) for c in np.linspace(-8.0, 8.0, 9)] + [3 * np.sin(np.pi * dx)]
    brep = check_assumptions(bd, bstates, dgrid)
    checks.append(_check("bounded diffusion b=2+tanh: kappa_est", brep.kappa_est,
                         1 - 1e-6 <= brep.kappa_est <= 1.1, "in [1 - 1e-6, 1.1]", "coercivity"))
    checks.append(_check("bounded diffusion b=2+tanh: continuity M", brep.continuity_M,
                         brep.continuity_M <= 3 + 1e-6, "<= 3 + 1e-6", "continuity"))

    mesh = TimeMesh(0.0, 0.25, K)
    u0 = np.concatenate([0.5 + 0.3 * np.cos(np.pi * x), 0.5 - 0.3 * np.cos(np.pi * x)])
    traj = solve_weak_galerkin(skt, u0, NoisePath(mesh, 0, seed, np.zeros((K, 0))), grid)
    sub = np.arange(0, K + 1, K // 8)
    hrep = check_assumptions(skt, [traj.states[i] for i in sub], grid, times=mesh.nodes,
                             path_states=traj.states)
    nu, delta = hrep.hoelder_delta
    checks.append(_check("Hoelder regression nu + delta along smooth SKT trajectory (nu = 1)", nu + delta,
                         nu + delta > 1, "> 1", "hoelder"))
    checks.append(_check("Lipschitz quotient along smooth SKT trajectory", hrep.lipschitz_L,
                         np.isfinite(hrep.lipschitz_L), "finite", "lipschitz"))
    checks.append(_check("adjoint kappa_est along smooth SKT trajectory", hrep.adjoint["kappa_est"],
                         hrep.adjoint["kappa_est"] > 0, "> 0", "adjoint"))
    return checks


def noise_battery(n_samples: int = 10_000, n_seeds: int = 10_000, seed: int = 0, T: float = 0.25) -> list:
    checks = []
    mesh = TimeMesh(0.0, T, n_samples)
    z = sample_path(seed, mesh, 1).increments[:, 0] / np.sqrt(mesh.dt)
    checks.append(_check("increment mean after sqrt(dt) scaling", z.mean(), abs(z.mean()) <= 0.04, "|.| <= 0.04",
                         "noise"))
    var = z.var(ddof=1)
    checks.append(_check("increment variance after sqrt(dt) scaling", var, 0.94 <= var <= 1.06, "in [0.94, 1.06]",
                         "noise"))

    grid = build_grid(1.0, 16, "dirichlet")
    model = linear_heat_model(sigma_spec=SigmaSpec.decaying(4, 1.0))
    small = TimeMesh(0.0, T, 8)
    zero = np.zeros((small.K + 1, grid.m))
    hs = hs_norm_sq(model, zero[0], grid)
    sq = np.empty(n_seeds)
    for i in range(n_seeds):
        path = sample_path(seed + i, small, model.n_modes)
        sq[i] = grid.norm(ito_cumulative(model, zero, path, grid)[-1]) ** 2
    ratio = sq.mean() / hs
    checks.append(_check(f"Ito isometry E|I(T)|^2 / |sigma|_HS^2 over {n_seeds} seeds (T={T})", ratio,
                         0.9 * T <= ratio <= 1.1 * T, f"in [{0.9 * T:g}, {1.1 * T:g}]", "noise"))

    fine = sample_path(seed, TimeMesh(0.0, T, 64), 3)
    coarse = fine.coarsen(2)
    exact = bool(np.array_equal(coarse.increments, fine.increments[0::2] + fine.increments[1::2]))
    checks.append(_check("coarsened increments equal sums of fine increments", float(exact), exact, "bit-exact",
                         "noise"))
    return checks
