"""Seeded truncated cylindrical Wiener paths, noise coefficients and Ito sums."""

from __future__ import annotations

import io
from functools import lru_cache
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from types import MappingProxyType
from typing import Mapping

import numpy as np
from scipy.special import zeta

from .evolution import TimeMesh
from .grid import SpatialGrid
from .models import DiffusionModel


@dataclass(frozen=True, eq=False)
class NoisePath:
    """Brownian increments ``increments[i, k] = beta_k(t_{i+1}) - beta_k(t_i)``."""

    mesh: TimeMesh
    n_modes: int
    seed: int
    increments: np.ndarray
    cumulative: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        inc = np.array(self.increments, dtype=float)
        if inc.shape != (self.mesh.K, self.n_modes):
            raise ValueError(f"increments have shape {inc.shape}, expected {(self.mesh.K, self.n_modes)}")
        inc.setflags(write=False)
        object.__setattr__(self, "increments", inc)
        cum = np.zeros((self.mesh.K + 1, self.n_modes))
        np.cumsum(inc, axis=0, out=cum[1:])
        cum.setflags(write=False)
        object.__setattr__(self, "cumulative", cum)

    def coarsen(self, factor: int = 2) -> "NoisePath":
        """Same Brownian path on a mesh ``factor`` times coarser (increments summed)."""
        mesh = self.mesh.coarsen(factor)
        inc = self.increments.reshape(mesh.K, factor, self.n_modes)
        total = inc[:, 0, :].copy()
        for r in range(1, factor):
            total += inc[:, r, :]
        return NoisePath(mesh, self.n_modes, self.seed, total)

    def level(self, K: int) -> "NoisePath":
        if K == self.mesh.K:
            return self
        if self.mesh.K % K:
            raise ValueError(f"cannot coarsen K={self.mesh.K} to K={K}")
        return self.coarsen(self.mesh.K // K)

    def truncated(self, i_to: int, values: np.ndarray | None = None) -> "NoisePath":
        """Copy whose increments from step ``i_to`` on are replaced by ``values`` (zeros by default)."""
        inc = np.array(self.increments)
        inc[i_to:] = 0.0 if values is None else values
        return NoisePath(self.mesh, self.n_modes, self.seed, inc)

    def dump(self, target) -> None:
        """Write ``seed,t0,T,K,M`` then the increments row-major as CSV (round-trip exact)."""
        buf = io.StringIO()
        buf.write("seed,t0,T,K,M\n")
        buf.write(f"{self.seed},{self.mesh.t0!r},{self.mesh.T!r},{self.mesh.K},{self.n_modes}\n")
        for row in self.increments:
            buf.write(",".join(repr(float(x)) for x in row) + "\n")
        Path(target).write_text(buf.getvalue())

    @classmethod
    def load(cls, source) -> "NoisePath":
        lines = Path(source).read_text().splitlines()
        seed, t0, T, K, M = lines[1].split(",")
        mesh = TimeMesh(float(t0), float(T), int(K))
        inc = np.array([[float(x) for x in line.split(",")] for line in lines[2:2 + int(K)]])
        return cls(mesh, int(M), int(seed), inc.reshape(int(K), int(M)))


def sample_path(seed: int, mesh: TimeMesh, n_modes: int) -> NoisePath:
    """Independent ``N(0, dt)`` increments from a PCG64 stream keyed by ``seed`` alone."""
    if n_modes < 1:
        raise ValueError("need at least one noise mode")
    rng = np.random.Generator(np.random.PCG64(seed))
    inc = rng.standard_normal((mesh.K, n_modes)) * np.sqrt(mesh.dt)
    return NoisePath(mesh, n_modes, int(seed), inc)


def sample_refinable_path(seed: int, mesh: TimeMesh, n_modes: int, levels: int) -> NoisePath:
    """Path on the finest of ``levels`` meshes, ``mesh`` being the coarsest."""
    return sample_path(seed, mesh.refine(2 ** (levels - 1)), n_modes)


def _mode_index(model: DiffusionModel, mode: int):
    if not 0 <= mode < model.n_modes:
        raise IndexError(f"mode {mode} outside 0..{model.n_modes - 1}")
    return divmod(mode, model.sigma.n_modes)


def sigma_apply(model: DiffusionModel, state, mode: int, grid: SpatialGrid) -> np.ndarray:
    """``sigma(u) e_mode`` at the nodes; zero outside the species the mode drives."""
    species, k = _mode_index(model, mode)
    u = grid.split(np.asarray(state, dtype=float))
    out = np.zeros((grid.n_species, grid.n_points))
    out[species] = model.sigma.value(k + 1, grid.nodes, u[species], grid.length, grid.bc)
    return out.reshape(-1)


@lru_cache(maxsize=64)
def _weighted_modes(spec, grid: SpatialGrid) -> np.ndarray:
    out = np.stack([spec.weights[k] * spec.spatial(k + 1, grid.nodes, grid.length, grid.bc)
                    for k in range(spec.n_modes)], axis=1)
    out.setflags(write=False)
    return out


def sigma_matrix(model: DiffusionModel, state, grid: SpatialGrid) -> np.ndarray:
    """All modes at once: column ``q`` is ``sigma(u) e_q``; shape ``(m, n_modes)``."""
    out = np.zeros((grid.m, model.n_modes))
    if model.sigma is None:
        return out
    spec = model.sigma
    u = grid.split(np.asarray(state, dtype=float))
    N, M = grid.n_points, spec.n_modes
    spatial = _weighted_modes(spec, grid)
    for s in range(grid.n_species):
        out[s * N:(s + 1) * N, s * M:(s + 1) * M] = spatial * spec.amplitude(u[s])[:, None]
    return out


def hs_norm_sq(model: DiffusionModel, state, grid: SpatialGrid) -> float:
    """Truncated ``sum_k |sigma(u) e_k|^2`` in the discrete L2 norm."""
    return float(grid.h * np.sum(sigma_matrix(model, state, grid) ** 2))


def hs_tail(c0: float, power: float, n_modes: int) -> float:
    """``sum_{k > n_modes} (c0 / k**power)^2``, the weight mass dropped by truncation."""
    if 2 * power <= 1:
        return float("inf")
    return float(c0**2 * zeta(2 * power, n_modes + 1))


def ito_integral(model: DiffusionModel, traj_states, path: NoisePath, i_from: int, i_to: int,
                 grid: SpatialGrid) -> np.ndarray:
    """Left-point sum ``sum_{i_from <= i < i_to} sigma(u(t_i)) dW_i``."""
    if i_from > i_to:
        raise IndexError(f"need i_from <= i_to, got {i_from} > {i_to}")
    states = np.asarray(traj_states, dtype=float)
    total = np.zeros(grid.m)
    for i in range(i_from, i_to):
        total += sigma_matrix(model, states[i], grid) @ path.increments[i]
    return total


def ito_cumulative(model: DiffusionModel, traj_states, path: NoisePath, grid: SpatialGrid) -> np.ndarray:
    """``I_j = int_0^{t_j} sigma(u) dW`` for every node, shape ``(K+1, m)``."""
    states = np.asarray(traj_states, dtype=float)
    K = path.mesh.K
    out = np.zeros((K + 1, grid.m))
    if model.sigma is None:
        return out
    if model.additive_noise:
        s = sigma_matrix(model, states[0], grid)
        np.cumsum(path.increments @ s.T, axis=0, out=out[1:])
        return out
    for i in range(K):
        out[i + 1] = out[i] + sigma_matrix(model, states[i], grid) @ path.increments[i]
    return out


class SolverTag(str, Enum):
    WEAK_GALERKIN = "WeakGalerkin"
    PATHWISE_MILD = "PathwiseMild"
    LINEAR_MILD = "LinearMild"
    EXACT_ORACLE = "ExactOracle"


@dataclass(frozen=True, eq=False)
class Trajectory:
    mesh: TimeMesh
    states: np.ndarray
    solver_tag: SolverTag
    seed: int | None = None
    iterations_used: int = 0
    contraction_ratios: tuple = ()
    grid: SpatialGrid | None = None
    metadata: Mapping = field(default_factory=dict)

    def __post_init__(self):
        st = np.array(self.states, dtype=float)
        if st.ndim == 1:
            st = st[:, None]
        if st.shape[0] != self.mesh.K + 1:
            raise ValueError(f"states have {st.shape[0]} rows, mesh needs {self.mesh.K + 1}")
        st.setflags(write=False)
        object.__setattr__(self, "states", st)
        object.__setattr__(self, "solver_tag", SolverTag(self.solver_tag))
        object.__setattr__(self, "metadata", MappingProxyType(dict(self.metadata)))
        object.__setattr__(self, "contraction_ratios", tuple(self.contraction_ratios))

    @property
    def norm_weight(self) -> float:
        return 1.0 if self.grid is None else self.grid.h

    def l2_norms(self) -> np.ndarray:
        return np.sqrt(self.norm_weight) * np.linalg.norm(self.states, axis=1)


def sup_l2_distance(a, b, weight: float = 1.0) -> float:
    """``max_j |a_j - b_j|`` in the weighted L2 norm."""
    diff = np.asarray(a) - np.asarray(b)
    return float(np.sqrt(weight) * np.max(np.linalg.norm(diff.reshape(diff.shape[0], -1), axis=1)))


def hoelder_seminorm(traj: Trajectory, exponent: float) -> float:
    """``max_{i<j} |u(t_j) - u(t_i)| / |t_j - t_i|^exponent`` over all mesh pairs."""
    if not 0 < exponent <= 1:
        raise ValueError("exponent must lie in (0, 1]")
    states = traj.states
    K, dt = traj.mesh.K, traj.mesh.dt
    w = np.sqrt(traj.norm_weight)
    best = 0.0
    for lag in range(1, K + 1):
        d = w * np.linalg.norm(states[lag:] - states[:-lag], axis=1).max()
        best = max(best, d / (lag * dt) ** exponent)
    return float(best)
