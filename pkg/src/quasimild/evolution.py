"""Discrete evolution families built from a time-indexed operator path.

The family on a uniform mesh is the product of left-frozen step propagators
``P_i = exp(dt A(t_i))``; ``U(t_j, t_i) = P_{j-1} ... P_i``.  Propagators are
never inverted.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla

from .errors import BuildError
from .fractional import fractional_power
from .operators import OperatorMatrix, as_array, is_symmetric


@dataclass(frozen=True)
class TimeMesh:
    t0: float
    T: float
    K: int

    def __post_init__(self):
        if int(self.K) != self.K or self.K < 1:
            raise ValueError(f"need at least one time step, got K={self.K}")
        if not self.T > self.t0:
            raise ValueError(f"need T > t0, got t0={self.t0}, T={self.T}")
        object.__setattr__(self, "K", int(self.K))
        object.__setattr__(self, "t0", float(self.t0))
        object.__setattr__(self, "T", float(self.T))

    @property
    def dt(self) -> float:
        return (self.T - self.t0) / self.K

    @property
    def nodes(self) -> np.ndarray:
        return self.t0 + self.dt * np.arange(self.K + 1)

    def coarsen(self, factor: int = 2) -> "TimeMesh":
        if self.K % factor:
            raise ValueError(f"K={self.K} not divisible by {factor}")
        return TimeMesh(self.t0, self.T, self.K // factor)

    def refine(self, factor: int = 2) -> "TimeMesh":
        return TimeMesh(self.t0, self.T, self.K * factor)


def _stack(operator_path) -> np.ndarray:
    if isinstance(operator_path, np.ndarray):
        ops = np.asarray(operator_path, dtype=float)
    else:
        ops = np.stack([as_array(op) for op in operator_path])
    if ops.ndim != 3 or ops.shape[1] != ops.shape[2]:
        raise ValueError(f"operator path must have shape (K+1, m, m), got {ops.shape}")
    return ops


class EvolutionFamily:
    """Immutable evolution family on a uniform mesh.

    ``steps[i]`` is the propagator from ``t_i`` to ``t_{i+1}`` and
    ``operators[i]`` the frozen generator at ``t_i``.
    """

    def __init__(self, mesh: TimeMesh, steps: np.ndarray, operators: np.ndarray):
        steps = np.array(steps, dtype=float)
        operators = np.array(operators, dtype=float)
        if steps.shape[0] != mesh.K or operators.shape[0] != mesh.K + 1:
            raise ValueError("steps/operators do not match the mesh")
        steps.setflags(write=False)
        operators.setflags(write=False)
        self._mesh = mesh
        self._steps = steps
        self._operators = operators

    @property
    def mesh(self) -> TimeMesh:
        return self._mesh

    @property
    def steps(self) -> np.ndarray:
        return self._steps

    @property
    def operators(self) -> np.ndarray:
        return self._operators

    @property
    def dim(self) -> int:
        return self._steps.shape[1]

    def propagator(self, j: int, i: int) -> np.ndarray:
        return propagator(self, j, i)

    def from_zero(self):
        """Yield ``U(t_j, 0)`` for ``j = 0..K``."""
        u = np.eye(self.dim)
        yield u.copy()
        for p in self._steps:
            u = p @ u
            yield u.copy()

    def apply_adjoint_path(self, j: int, xstar: np.ndarray) -> np.ndarray:
        """``U(t_j, t_i)^T x*`` for ``i = 0..j`` (rows), by backward recursion.

        ``xstar`` may be a vector or an ``(m, r)`` block of test vectors.
        """
        xstar = np.asarray(xstar, dtype=float)
        out = np.empty((j + 1,) + xstar.shape)
        out[j] = xstar
        for i in range(j - 1, -1, -1):
            out[i] = self._steps[i].T @ out[i + 1]
        return out


def build_family(operator_path, mesh: TimeMesh, midpoint: bool = False) -> EvolutionFamily:
    """Family with ``P_i = exp(dt A(t_i))`` (or the average of both endpoints when ``midpoint``)."""
    ops = _stack(operator_path)
    if ops.shape[0] != mesh.K + 1:
        raise ValueError(f"operator path has {ops.shape[0]} entries, mesh needs {mesh.K + 1}")
    gen = 0.5 * (ops[:-1] + ops[1:]) if midpoint else ops[:-1]
    with np.errstate(over="ignore", invalid="ignore"):
        steps = sla.expm(mesh.dt * gen)
    finite = np.isfinite(steps).all(axis=(1, 2))
    if not finite.all():
        raise BuildError("matrix exponential overflow", step=int(np.flatnonzero(~finite)[0]))
    return EvolutionFamily(mesh, steps, ops)


def propagator(family: EvolutionFamily, j: int, i: int) -> np.ndarray:
    """``U(t_j, t_i) = P_{j-1} ... P_i``; identity when ``i == j``."""
    if i > j:
        raise IndexError(f"propagator needs i <= j, got i={i}, j={j}")
    if i < 0 or j > family.mesh.K:
        raise IndexError(f"indices out of range 0..{family.mesh.K}")
    u = np.eye(family.dim)
    for p in family.steps[i:j]:
        u = p @ u
    return u


def adjoint_family(family: EvolutionFamily) -> EvolutionFamily:
    """Family ``V`` on the mirrored mesh with ``V(K-i, K-j) = U(t_j, t_i)^T``."""
    steps = np.ascontiguousarray(np.swapaxes(family.steps[::-1], 1, 2))
    ops = np.ascontiguousarray(np.swapaxes(family.operators[::-1], 1, 2))
    return EvolutionFamily(family.mesh, steps, ops)


def _pair_starts(K: int, max_starts: int) -> np.ndarray:
    stride = max(1, int(np.ceil(K / max_starts)))
    return np.arange(0, K, stride)


def check_T_properties(family: EvolutionFamily, n_triples: int = 100, seed: int = 0,
                       max_starts: int = 64) -> dict:
    """Measured identity, cocycle, boundedness and derivative properties of the family.

    The derivative residual is
    ``|(U(t_{j+1}, t_i) - U(t_j, t_i))/dt - A(t_j) U(t_j, t_i)|_2``, which is
    ``O(dt)``; the smoothing bound is ``sup (t_j - t_i) |A(t_j) U(t_j, t_i)|_2``.
    Pairs start at up to ``max_starts`` evenly spaced indices ``i``.
    """
    K, dt = family.mesh.K, family.mesh.dt
    eye = np.eye(family.dim)
    t1 = max(float(np.max(np.abs(propagator(family, i, i) - eye))) for i in range(0, K + 1, max(1, K // 8)))

    rng = np.random.default_rng(seed)
    t2 = 0.0
    for _ in range(n_triples):
        l, i, j = np.sort(rng.integers(0, K + 1, size=3))
        lhs = propagator(family, j, i) @ propagator(family, i, l)
        rhs = propagator(family, j, l)
        t2 = max(t2, float(np.linalg.norm(lhs - rhs, 2) / max(np.linalg.norm(rhs, 2), 1e-300)))

    t4 = 0.0
    t5 = 0.0
    smoothing = 0.0
    for i in _pair_starts(K, max_starts):
        u = eye
        for j in range(i, K):
            au = family.operators[j] @ u
            nxt = family.steps[j] @ u
            t4 = max(t4, float(np.linalg.norm(u, 2)))
            t5 = max(t5, float(np.linalg.norm((nxt - u) / dt - au, 2)))
            if j > i:
                smoothing = max(smoothing, (j - i) * dt * float(np.linalg.norm(au, 2)))
            u = nxt
        t4 = max(t4, float(np.linalg.norm(u, 2)))
    return {"t1_identity": t1, "t2_cocycle": t2, "t4_bound": t4,
            "t5_derivative": t5, "t5_smoothing": smoothing}


def fundamental_identity_terms(family: EvolutionFamily, x, xstar, t_index: int | None = None):
    """Trapezoid quadrature of ``s -> <U(t,s) A(s) x, x*>`` and ``<U(t,0)x, x*> - <x, x*>``."""
    j = family.mesh.K if t_index is None else int(t_index)
    if not 0 <= j <= family.mesh.K:
        raise IndexError(f"t_index {j} outside 0..{family.mesh.K}")
    x = np.asarray(x, dtype=float)
    xstar = np.asarray(xstar, dtype=float)
    psi = family.apply_adjoint_path(j, xstar)
    g = np.einsum("imn,n,im->i", family.operators[:j + 1], x, psi)
    quad = family.mesh.dt * (g.sum() - 0.5 * (g[0] + g[-1])) if j > 0 else 0.0
    rhs = float(x @ psi[0] - x @ xstar)
    return float(quad), rhs


def fundamental_identity_residual(family: EvolutionFamily, x, xstar, t_index: int | None = None) -> float:
    quad, rhs = fundamental_identity_terms(family, x, xstar, t_index)
    return abs(quad - rhs)


def _powers(op: np.ndarray, exponents) -> dict:
    method = "spectral" if is_symmetric(op, rtol=1e-12) else "dunford"
    return {e: fractional_power(op, e, method) for e in exponents}


def smoothing_diagnostics(family: EvolutionFamily, theta: float, gamma: float, lam: float,
                          max_starts: int = 32) -> dict:
    """Measured constants of the parabolic smoothing estimates along the family.

    Returns sups over mesh pairs ``s = t_i < t = t_j`` of
    ``(t-s)^gamma |U(t,s)(-A(s))^gamma|``,
    ``|(-A(t))^theta U(t,s) (-A(s))^{-theta}|`` (``s <= t``) and
    ``(t-s)^{1+gamma-lam} |(-A(t))^{-lam} U(t,s) (-A(s))^{1+gamma}|``.
    """
    K, dt = family.mesh.K, family.mesh.dt
    ops = family.operators
    cache = {}

    def powers(idx):
        if idx not in cache:
            cache[idx] = _powers(ops[idx], {gamma, theta, -theta, -lam, 1.0 + gamma})
        return cache[idx]

    q_gamma = q_theta = q_mixed = 0.0
    for i in _pair_starts(K, max_starts):
        ps = powers(i)
        u = np.eye(family.dim)
        for j in range(i, K + 1):
            if j > i:
                u = family.steps[j - 1] @ u
            pt = powers(j)
            q_theta = max(q_theta, float(np.linalg.norm(pt[theta] @ u @ ps[-theta], 2)))
            if j > i:
                tau = (j - i) * dt
                q_gamma = max(q_gamma, tau**gamma * float(np.linalg.norm(u @ ps[gamma], 2)))
                q_mixed = max(q_mixed, tau ** (1 + gamma - lam)
                              * float(np.linalg.norm(pt[-lam] @ u @ ps[1.0 + gamma], 2)))
    return {"gamma_bound": q_gamma, "theta_bound": q_theta, "mixed_bound": q_mixed}
