"""Concrete quasilinear systems: the stochastic SKT cross-diffusion model and a
scalar bounded-diffusion model.

A :class:`DiffusionModel` bundles the edge diffusion matrix ``B``, the linear
damping ``Gamma``, an optional reaction drift ``F`` and the noise coefficients.
The operator it induces is ``A_u w = div(B(u) grad w) - Gamma w``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from types import MappingProxyType
from typing import Callable, Mapping

import numpy as np

from .errors import ParameterConditionError
from .grid import BoundaryCondition

_BOUND_SLACK = 1e-8


@dataclass(frozen=True)
class ParameterCondition:
    name: str
    passed: bool
    detail: str = ""


@dataclass(frozen=True)
class SigmaSpec:
    """Noise coefficients ``sigma_k(x, xi) = c_k * phi_k(x) * g(xi)``.

    ``kind`` selects ``g``: ``additive`` (1), ``multiplicative`` (xi) or
    ``affine`` (offset + xi).  ``basis`` selects ``phi_k``: the grid's smooth
    modes (``auto``), explicit ``sine`` / ``cosine`` or ``constant`` (1).
    Each species carries its own ``len(weights)`` independent modes.
    """

    weights: tuple
    kind: str = "additive"
    basis: str = "auto"
    offset: float = 1.0
    normalized: bool = True

    def __post_init__(self):
        object.__setattr__(self, "weights", tuple(float(c) for c in self.weights))
        if self.kind not in ("additive", "multiplicative", "affine"):
            raise ValueError(f"unknown sigma kind {self.kind!r}")
        if self.basis not in ("auto", "sine", "cosine", "constant"):
            raise ValueError(f"unknown sigma basis {self.basis!r}")

    @classmethod
    def decaying(cls, n_modes: int, c0: float = 0.05, power: float = 1.0, **kwargs) -> "SigmaSpec":
        """Weights ``c_k = c0 / k**power`` for ``k = 1..n_modes``."""
        k = np.arange(1, n_modes + 1, dtype=float)
        return cls(tuple(c0 / k**power), **kwargs)

    @property
    def n_modes(self) -> int:
        return len(self.weights)

    def amplitude(self, xi):
        xi = np.asarray(xi, dtype=float)
        if self.kind == "additive":
            return np.ones_like(xi)
        if self.kind == "multiplicative":
            return xi
        return self.offset + xi

    def spatial(self, k: int, x, length: float, bc) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        basis = self.basis
        if basis == "auto":
            basis = "sine" if BoundaryCondition.parse(bc) is BoundaryCondition.DIRICHLET else "cosine"
        if basis == "constant":
            return np.ones_like(x)
        arg = k * np.pi * x / length
        phi = np.sin(arg) if basis == "sine" else np.cos(arg)
        return np.sqrt(2.0 / length) * phi if self.normalized else phi

    def value(self, k: int, x, xi, length: float, bc) -> np.ndarray:
        """``sigma_k(x, xi)`` for 1-based mode ``k``."""
        return self.weights[k - 1] * self.spatial(k, x, length, bc) * self.amplitude(xi)


@dataclass(frozen=True, eq=False)
class DiffusionModel:
    name: str
    n_species: int
    bc: BoundaryCondition
    diffusion: Callable[[np.ndarray], np.ndarray]
    gamma: np.ndarray
    drift: Callable[[np.ndarray], np.ndarray] | None = None
    sigma: SigmaSpec | None = None
    constraints: tuple = ()
    params: Mapping = field(default_factory=dict)
    demands_definite: bool = False
    state_dependent: bool = True
    sigma_constants: Mapping = field(default_factory=dict)

    def __post_init__(self):
        g = np.array(self.gamma, dtype=float).reshape(self.n_species, self.n_species)
        g.setflags(write=False)
        object.__setattr__(self, "gamma", g)
        object.__setattr__(self, "params", MappingProxyType(dict(self.params)))
        object.__setattr__(self, "sigma_constants", MappingProxyType(dict(self.sigma_constants)))
        object.__setattr__(self, "constraints", tuple(self.constraints))

    @property
    def n_modes(self) -> int:
        return 0 if self.sigma is None else self.n_species * self.sigma.n_modes

    @property
    def has_drift(self) -> bool:
        return self.drift is not None

    @property
    def additive_noise(self) -> bool:
        return self.sigma is None or self.sigma.kind == "additive"

    def B(self, state) -> np.ndarray:
        """Diffusion matrix at a single point state (length ``n_species``)."""
        s = np.asarray(state, dtype=float).reshape(self.n_species, 1)
        return self.diffusion(s)[0]

    def F(self, u: np.ndarray, n_points: int) -> np.ndarray:
        """Drift evaluated nodewise on a species-major state vector."""
        u = np.asarray(u, dtype=float)
        if self.drift is None:
            return np.zeros_like(u)
        return np.asarray(self.drift(u.reshape(self.n_species, n_points))).reshape(-1)


def skt_model(alpha, beta, gamma, delta, theta, sigma_spec: SigmaSpec | None = None) -> DiffusionModel:
    """Two-species SKT cross-diffusion model with Lotka-Volterra drift and no-flux boundaries.

    ``theta`` is the 2x2 competition matrix ``[[theta11, theta12], [theta21, theta22]]``.
    Raises :class:`ParameterConditionError` unless ``gamma_i**2 < 8 alpha_i beta_i``.
    """
    a1, a2 = map(float, alpha)
    b1, b2 = map(float, beta)
    g1, g2 = map(float, gamma)
    d1, d2 = map(float, delta)
    th = np.asarray(theta, dtype=float).reshape(2, 2)

    positive = {"alpha1": a1, "alpha2": a2, "beta1": b1, "beta2": b2, "delta1": d1, "delta2": d2,
                "theta11": th[0, 0], "theta12": th[0, 1], "theta21": th[1, 0], "theta22": th[1, 1]}
    for key, val in positive.items():
        if not val > 0:
            raise ParameterConditionError(f"{key} > 0", f"{key}={val}")
    for key, val in (("gamma1", g1), ("gamma2", g2)):
        if not val >= 0:
            raise ParameterConditionError(f"{key} >= 0", f"{key}={val}")

    constraints = []
    for i, (g, a, b) in enumerate(((g1, a1, b1), (g2, a2, b2)), start=1):
        ok = g * g < 8.0 * a * b
        detail = f"gamma{i}^2={g * g:.6g} vs 8*alpha{i}*beta{i}={8 * a * b:.6g}"
        constraints.append(ParameterCondition(f"cross-diffusion definiteness gamma{i}^2 < 8 alpha{i} beta{i}", ok, detail))
    for c in constraints:
        if not c.passed:
            raise ParameterConditionError(c.name, c.detail)

    def diffusion(states):
        u1, u2 = np.asarray(states, dtype=float)
        out = np.empty(u1.shape + (2, 2))
        out[..., 0, 0] = a1 + 2 * b1 * u1 + g1 * u2
        out[..., 0, 1] = g1 * u1
        out[..., 1, 0] = g2 * u2
        out[..., 1, 1] = a2 + 2 * b2 * u2 + g2 * u1
        return out

    def drift(u):
        u1, u2 = u
        return np.stack([
            2 * d1 * u1 - th[0, 0] * u1**2 - th[0, 1] * u1 * u2,
            2 * d2 * u2 - th[1, 0] * u1 * u2 - th[1, 1] * u2**2,
        ])

    params = dict(alpha1=a1, alpha2=a2, beta1=b1, beta2=b2, gamma1=g1, gamma2=g2,
                  delta1=d1, delta2=d2, theta11=th[0, 0], theta12=th[0, 1],
                  theta21=th[1, 0], theta22=th[1, 1])
    return DiffusionModel(
        name="skt", n_species=2, bc=BoundaryCondition.NEUMANN, diffusion=diffusion,
        gamma=np.diag([d1, d2]), drift=drift, sigma=sigma_spec, constraints=tuple(constraints),
        params=params, demands_definite=False,
    )


def _as_vector_fn(fn):
    def wrapped(xi):
        xi = np.asarray(xi, dtype=float)
        return np.broadcast_to(np.asarray(fn(xi), dtype=float), xi.shape)
    return wrapped


def estimate_sigma_constants(sigma: SigmaSpec | None, state_box, length: float = 1.0,
                             bc=BoundaryCondition.DIRICHLET, n_x: int = 65, n_xi: int = 401) -> dict:
    """Sampled Lipschitz and linear-growth constants of the noise coefficients.

    Lipschitz: max over x and neighbouring xi samples of
    ``sum_k |sigma_k(x, xi1) - sigma_k(x, xi2)|^2 / |xi1 - xi2|^2``.
    Growth: max of ``sum_k |sigma_k(x, xi)|^2 / (1 + xi^2)``.
    """
    if sigma is None or sigma.n_modes == 0:
        return {"lipschitz": 0.0, "growth": 0.0}
    x = np.linspace(0.0, length, n_x)
    xi = np.linspace(state_box[0], state_box[1], n_xi)
    X, XI = np.meshgrid(x, xi, indexing="ij")
    vals = np.stack([sigma.value(k, X, XI, length, bc) for k in range(1, sigma.n_modes + 1)])
    diff = np.diff(vals, axis=2)
    dxi = np.diff(xi)
    lip = float(np.max(np.sum(diff**2, axis=0) / dxi**2))
    growth = float(np.max(np.sum(vals**2, axis=0) / (1.0 + XI**2)))
    return {"lipschitz": lip, "growth": growth}


def bounded_diffusion_model(b_scalar: Callable, kappa: float, C: float,
                            sigma_spec: SigmaSpec | None = None, state_box=(-10.0, 10.0),
                            n_samples: int = 2001, length: float = 1.0, name: str = "bounded_diffusion",
                            state_dependent: bool = True) -> DiffusionModel:
    """Scalar equation ``du = div(b(u) grad u) dt + sigma(u) dW`` with Dirichlet boundaries.

    ``b`` is sampled on ``state_box`` and must stay within ``[kappa, C]``.
    """
    if not kappa > 0:
        raise ParameterConditionError("kappa > 0", f"kappa={kappa}")
    if not C >= kappa:
        raise ParameterConditionError("C >= kappa", f"kappa={kappa}, C={C}")
    b = _as_vector_fn(b_scalar)
    xi = np.linspace(state_box[0], state_box[1], n_samples)
    vals = b(xi)
    violation = np.maximum(kappa - _BOUND_SLACK - vals, vals - C - _BOUND_SLACK)
    bad = np.flatnonzero(~np.isfinite(vals) | (violation > 0))
    bounds = ParameterCondition("uniform bounds kappa <= b <= C", bad.size == 0,
                                f"sampled b in [{np.nanmin(vals):.6g}, {np.nanmax(vals):.6g}]")
    if bad.size:
        worst = bad[np.argmax(np.where(np.isfinite(vals[bad]), violation[bad], np.inf))]
        raise ParameterConditionError(bounds.name, f"b({xi[worst]:.6g}) = {vals[worst]:.6g} outside [{kappa}, {C}]")

    def diffusion(states):
        s = np.asarray(states, dtype=float)[0]
        return b(s)[..., None, None]

    consts = estimate_sigma_constants(sigma_spec, state_box, length, BoundaryCondition.DIRICHLET)
    params = dict(kappa=float(kappa), C=float(C), box_lo=float(state_box[0]), box_hi=float(state_box[1]))
    return DiffusionModel(
        name=name, n_species=1, bc=BoundaryCondition.DIRICHLET, diffusion=diffusion,
        gamma=np.zeros((1, 1)), drift=None, sigma=sigma_spec, constraints=(bounds,),
        params=params, demands_definite=True, state_dependent=state_dependent,
        sigma_constants=consts,
    )


def linear_heat_model(diffusivity: float = 1.0, sigma_spec: SigmaSpec | None = None,
                      length: float = 1.0) -> DiffusionModel:
    """Autonomous linear model ``B = diffusivity * I`` with Dirichlet boundaries."""
    return bounded_diffusion_model(lambda xi: diffusivity, diffusivity, diffusivity, sigma_spec,
                                   length=length, name="linear", state_dependent=False)
