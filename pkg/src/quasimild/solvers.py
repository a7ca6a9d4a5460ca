"""Weak (Galerkin) and pathwise-mild solvers plus the residual functionals that
compare them.

The pathwise-mild representation evaluated here is

    u(t) = U(t,0) u0 + U(t,0) I(t) - int_0^t U(t,s) A(s) (I(t) - I(s)) ds
           + int_0^t U(t,s) F(s) ds,       I(t) = int_0^t sigma dW,

with ``U`` the evolution family of the frozen operator path.  The double
integral is accumulated in O(K) matrix work via

    M_{j+1} = P_j (M_j + dt A_j),   C_{j+1} = P_j (C_j + dt A_j I_j),

so that ``int_0^{t_j} U A (I_j - I(s)) ds ~ M_j I_j - C_j``.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla

from .errors import BlowUpError, FixedPointError, SolverError
from .evolution import EvolutionFamily, build_family
from .grid import SpatialGrid
from .models import DiffusionModel
from .noise import NoisePath, SolverTag, Trajectory, ito_cumulative, sigma_matrix, sup_l2_distance
from .operators import operator_entries


@dataclass(frozen=True)
class SolverConfig:
    theta: float = 1.0
    fp_tol: float = 1e-8
    fp_max_iter: int = 50
    include_drift: bool = True
    output_stride: int = 1
    relaxation: float = 1.0
    blowup_threshold: float = 1e6
    midpoint: bool = False

    def __post_init__(self):
        if not 0.0 <= self.theta <= 1.0:
            raise ValueError(f"theta must lie in [0, 1], got {self.theta}")
        if not self.fp_tol > 0:
            raise ValueError("fp_tol must be positive")
        if self.fp_max_iter < 1:
            raise ValueError("fp_max_iter must be at least 1")
        if not 0 < self.relaxation <= 1:
            raise ValueError("relaxation must lie in (0, 1]")


@dataclass(frozen=True)
class ResidualReport:
    """Residuals of one trajectory; ``None`` marks a quantity that was not requested."""

    weak_residual_static: float | None = None
    weak_residual_evolution: float | None = None
    mild_residual: float | None = None
    l1_term: float | None = None
    l2_term: float | None = None


def _check_inputs(model, u0, path, grid):
    u0 = np.asarray(u0, dtype=float)
    if u0.shape != (grid.m,):
        raise ValueError(f"u0 has shape {u0.shape}, expected ({grid.m},)")
    if model.n_species != grid.n_species:
        raise ValueError("model and grid disagree on the number of species")
    if path.n_modes != model.n_modes:
        raise ValueError(f"path has {path.n_modes} modes, model needs {model.n_modes}")
    return u0


def _guard(state, step, cfg: SolverConfig, grid: SpatialGrid):
    if not np.all(np.isfinite(state)):
        raise BlowUpError("non-finite state", step=step)
    if grid.norm(state) > cfg.blowup_threshold:
        raise BlowUpError(f"state norm above {cfg.blowup_threshold:g}", step=step)


def _strided(traj_states, cfg):
    return traj_states if cfg.output_stride == 1 else traj_states[::cfg.output_stride]


def solve_weak_galerkin(model: DiffusionModel, u0, path: NoisePath, grid: SpatialGrid,
                        cfg: SolverConfig = SolverConfig()) -> Trajectory:
    """theta-scheme in the operator, explicit drift and Euler-Maruyama noise."""
    u0 = _check_inputs(model, u0, path, grid)
    K, dt = path.mesh.K, path.mesh.dt
    eye = np.eye(grid.m)
    states = np.empty((K + 1, grid.m))
    states[0] = u0
    drift = cfg.include_drift and model.has_drift
    for i in range(K):
        u = states[i]
        a = operator_entries(model, u, grid)
        rhs = u.copy()
        if cfg.theta < 1.0:
            rhs += (1.0 - cfg.theta) * dt * (a @ u)
        if drift:
            rhs += dt * model.F(u, grid.n_points)
        if model.n_modes:
            rhs += sigma_matrix(model, u, grid) @ path.increments[i]
        lhs = eye - cfg.theta * dt * a if cfg.theta > 0 else eye
        try:
            states[i + 1] = sla.solve(lhs, rhs, check_finite=False)
        except (np.linalg.LinAlgError, sla.LinAlgError) as exc:
            raise SolverError(f"singular implicit matrix: {exc}", step=i) from None
        _guard(states[i + 1], i + 1, cfg, grid)
    return Trajectory(path.mesh, states, SolverTag.WEAK_GALERKIN, seed=path.seed, grid=grid,
                      metadata={"theta": cfg.theta})


def _frozen_operators(model, frozen_states, grid):
    return np.stack([operator_entries(model, v, grid) for v in frozen_states])


def solve_linear_pathwise_mild(frozen_states, model: DiffusionModel, u0, path: NoisePath,
                               grid: SpatialGrid, cfg: SolverConfig = SolverConfig(),
                               family: EvolutionFamily | None = None) -> Trajectory:
    """Pathwise-mild formula with ``A`` and ``sigma`` frozen along ``frozen_states``."""
    u0 = _check_inputs(model, u0, path, grid)
    frozen = np.asarray(frozen_states, dtype=float)
    K, dt = path.mesh.K, path.mesh.dt
    if frozen.shape != (K + 1, grid.m):
        raise ValueError(f"frozen states have shape {frozen.shape}, expected {(K + 1, grid.m)}")
    if family is None:
        family = build_family(_frozen_operators(model, frozen, grid), path.mesh, midpoint=cfg.midpoint)
    ops, steps = family.operators, family.steps
    ito = ito_cumulative(model, frozen, path, grid)
    drift = cfg.include_drift and model.has_drift
    forcing = np.stack([model.F(v, grid.n_points) for v in frozen]) if drift else None

    m = grid.m
    eye = np.eye(m)
    states = np.empty((K + 1, m))
    states[0] = u0
    prop = eye.copy()            # U(t_j, 0)
    acc = np.zeros((m, m))       # M_j
    corr = np.zeros(m)           # C_j
    free = u0.copy()             # U(t_j, 0) u0
    bochner = np.zeros(m)        # int_0^{t_j} U(t_j, s) F(s) ds
    identity_defect = 0.0
    for j in range(K):
        p = steps[j]
        acc = p @ (acc + dt * ops[j])
        corr = p @ (corr + dt * (ops[j] @ ito[j]))
        prop = p @ prop
        free = p @ free
        if drift:
            bochner = p @ (bochner + 0.5 * dt * forcing[j]) + 0.5 * dt * forcing[j + 1]
        it = ito[j + 1]
        double = acc @ it - corr
        states[j + 1] = free + prop @ it - double + bochner
        _guard(states[j + 1], j + 1, cfg, grid)
        scale = np.linalg.norm(it)
        if scale > 0:
            defect = np.linalg.norm(acc @ it - (prop @ it - it)) / scale
            identity_defect = max(identity_defect, float(defect))
    return Trajectory(path.mesh, states, SolverTag.LINEAR_MILD, seed=path.seed, grid=grid,
                      metadata={"identity_defect": identity_defect})


def solve_quasilinear_fixed_point(model: DiffusionModel, u0, path: NoisePath, grid: SpatialGrid,
                                  cfg: SolverConfig = SolverConfig()) -> Trajectory:
    """Picard iteration ``v <- mild(v)`` started from ``u0`` held constant in time.

    Stops once ``sup_j |v_new(t_j) - v(t_j)|`` drops to ``cfg.fp_tol``.
    """
    u0 = _check_inputs(model, u0, path, grid)
    K = path.mesh.K
    v = np.tile(u0, (K + 1, 1))
    increments, ratios = [], []
    prev = None
    for k in range(1, cfg.fp_max_iter + 1):
        new = solve_linear_pathwise_mild(v, model, u0, path, grid, cfg).states
        if cfg.relaxation != 1.0:
            new = v + cfg.relaxation * (new - v)
        diff = sup_l2_distance(new, v, grid.h)
        if increments and increments[-1] > 0:
            ratios.append(diff / increments[-1])
        increments.append(diff)
        prev, v = v, new
        if diff <= cfg.fp_tol:
            return Trajectory(path.mesh, v, SolverTag.PATHWISE_MILD, seed=path.seed,
                              iterations_used=k, contraction_ratios=ratios, grid=grid,
                              metadata={"increments": tuple(increments)})
    raise FixedPointError(
        f"no convergence to {cfg.fp_tol:g} in {cfg.fp_max_iter} iterations "
        f"(last increment {increments[-1]:.3e})", last_iterates=(prev, v), ratios=ratios)


def stochastic_convolution_oracle(model: DiffusionModel, u0, path: NoisePath,
                                  grid: SpatialGrid) -> Trajectory:
    """``e^{t_j A} u0 + sum_{i<j} e^{(t_j - t_i) A} sigma dW_i`` for autonomous linear models."""
    u0 = _check_inputs(model, u0, path, grid)
    if model.state_dependent or not model.additive_noise or model.has_drift:
        raise ValueError("the exact oracle needs a state-independent operator, additive noise and no drift")
    a = operator_entries(model, np.zeros(grid.m), grid)
    p = sla.expm(path.mesh.dt * a)
    s = sigma_matrix(model, np.zeros(grid.m), grid)
    forcing = path.increments @ s.T
    states = np.empty((path.mesh.K + 1, grid.m))
    states[0] = u0
    for j in range(path.mesh.K):
        states[j + 1] = p @ (states[j] + forcing[j])
    return Trajectory(path.mesh, states, SolverTag.EXACT_ORACLE, seed=path.seed, grid=grid)


def cross_solver_gap(weak: Trajectory, mild: Trajectory) -> float:
    """``sup_j |u_weak - u_mild| / (1 + sup_j |u_weak|)`` in the discrete L2 norm."""
    h = weak.norm_weight
    return sup_l2_distance(weak.states, mild.states, h) / (1.0 + float(np.max(weak.l2_norms())))


def relative_sup_error(traj: Trajectory, reference: Trajectory) -> float:
    h = reference.norm_weight
    scale = float(np.max(reference.l2_norms()))
    return sup_l2_distance(traj.states, reference.states, h) / scale


def _trapezoid(values: np.ndarray, dt: float) -> np.ndarray:
    if values.shape[0] < 2:
        return np.zeros(values.shape[1:])
    return dt * (values.sum(axis=0) - 0.5 * (values[0] + values[-1]))


def weak_residual(traj: Trajectory, model: DiffusionModel, path: NoisePath, grid: SpatialGrid,
                  t_index: int | None = None, mode: str = "static", n_test: int = 8,
                  family: EvolutionFamily | None = None, include_drift: bool = True) -> ResidualReport:
    """Weak-form defect of ``traj`` at ``t_index`` (default: final time).

    ``static`` tests with time-independent smooth vectors ``x*``.  ``evolution``
    tests with ``phi(s) = U(t,s)^T x*`` built from the trajectory's own
    operator path, so ``phi' = -A(s)^T phi``; the two product-rule terms
    ``L1 = int <u, phi'>`` and ``L2 = -int <I(s), phi'>`` are reported
    (largest magnitude over the test vectors).  Time integrals use the
    trapezoid rule on the mesh.
    """
    if traj.mesh != path.mesh:
        raise ValueError("trajectory and noise path live on different meshes")
    j = path.mesh.K if t_index is None else int(t_index)
    dt = path.mesh.dt
    states = traj.states[:j + 1]
    u0 = states[0]
    ito = ito_cumulative(model, traj.states, path, grid)[:j + 1]
    drift = include_drift and model.has_drift
    forcing = np.stack([model.F(u, grid.n_points) for u in states]) if drift else np.zeros_like(states)
    xs = grid.test_basis(n_test)
    h = grid.h
    mode = mode.lower()

    if mode == "static":
        if family is not None:
            ops = family.operators[:j + 1]
        else:
            ops = _frozen_operators(model, states, grid)
        rate = np.einsum("imn,in->im", ops, states) + forcing
        r = states[-1] - u0 - _trapezoid(rate, dt) - ito[-1]
        value = float(np.max(np.abs(h * (r @ xs))))
        return ResidualReport(weak_residual_static=value)
    if mode not in ("evolution", "evolutiontest", "evolution_test"):
        raise ValueError(f"unknown residual mode {mode!r}")

    if family is None:
        family = build_family(_frozen_operators(model, traj.states, grid), path.mesh)
    ops = family.operators[:j + 1]
    phi = family.apply_adjoint_path(j, xs)                       # (j+1, m, r)
    dphi = -np.einsum("inm,inr->imr", ops, phi)                  # -A(s)^T phi(s)
    a_term = _trapezoid(h * np.einsum("imn,in,imr->ir", ops, states, phi) * -1.0, dt)
    l1 = _trapezoid(h * np.einsum("im,imr->ir", states, dphi), dt)
    l2 = -_trapezoid(h * np.einsum("im,imr->ir", ito, dphi), dt)
    f_term = _trapezoid(h * np.einsum("im,imr->ir", forcing, phi), dt)
    lhs = h * (states[-1] @ xs)
    init = h * (u0 @ phi[0])
    noise_term = h * (ito[-1] @ xs)
    resid = lhs - (init - a_term + l1 + l2 + noise_term + f_term)
    return ResidualReport(weak_residual_evolution=float(np.max(np.abs(resid))),
                          l1_term=float(np.max(np.abs(l1))), l2_term=float(np.max(np.abs(l2))))


def mild_residual(traj: Trajectory, model: DiffusionModel, path: NoisePath, grid: SpatialGrid,
                  t_index: int | None = None, cfg: SolverConfig = SolverConfig()) -> float:
    """``|u(t) - RHS_mild(u)(t)|`` with the family rebuilt from ``traj``'s own states.

    ``t_index=None`` returns the supremum over the mesh.
    """
    rhs = solve_linear_pathwise_mild(traj.states, model, traj.states[0], path, grid, cfg).states
    diff = np.sqrt(grid.h) * np.linalg.norm(traj.states - rhs, axis=1)
    return float(diff.max() if t_index is None else diff[int(t_index)])


def timed(fn, *args, **kwargs):
    start = time.perf_counter()
    out = fn(*args, **kwargs)
    return out, time.perf_counter() - start
