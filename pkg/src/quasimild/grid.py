"""One-dimensional grids, difference operators and discrete norms.

States of an ``n``-species system are stored species-major: entries
``[s * N:(s + 1) * N]`` hold species ``s`` at the ``N`` grid nodes.

Dirichlet grids use the ``N`` interior nodes ``x_j = j h`` with
``h = L / (N + 1)``; the ``N + 1`` edges include the two boundary edges,
where the outside value is zero.  Neumann grids are cell-centred,
``x_j = (j + 1/2) h`` with ``h = L / N``; only the ``N - 1`` interior edges
carry flux, which realises the no-flux condition.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .errors import ConfigurationError


class BoundaryCondition(str, Enum):
    DIRICHLET = "dirichlet"
    NEUMANN = "neumann"

    @classmethod
    def parse(cls, value) -> "BoundaryCondition":
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).strip().lower())
        except ValueError:
            raise ConfigurationError(f"unknown boundary condition {value!r}") from None


@dataclass(frozen=True)
class SpatialGrid:
    length: float
    n_points: int
    bc: BoundaryCondition
    n_species: int = 1
    _gradient: np.ndarray = field(init=False, repr=False, compare=False)
    _full_gradient: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "bc", BoundaryCondition.parse(self.bc))
        if not np.isfinite(self.length) or self.length <= 0:
            raise ConfigurationError(f"domain length must be positive, got {self.length}")
        if int(self.n_points) != self.n_points or self.n_points < 2:
            raise ConfigurationError(f"need at least 2 grid points, got {self.n_points}")
        if int(self.n_species) != self.n_species or self.n_species < 1:
            raise ConfigurationError(f"need at least one species, got {self.n_species}")
        object.__setattr__(self, "n_points", int(self.n_points))
        object.__setattr__(self, "n_species", int(self.n_species))
        grad = _gradient_matrix(self.n_points, self.h, self.bc)
        grad.setflags(write=False)
        object.__setattr__(self, "_gradient", grad)
        full = np.kron(np.eye(self.n_species), grad)
        full.setflags(write=False)
        object.__setattr__(self, "_full_gradient", full)

    @property
    def h(self) -> float:
        if self.bc is BoundaryCondition.DIRICHLET:
            return self.length / (self.n_points + 1)
        return self.length / self.n_points

    @property
    def m(self) -> int:
        """Total state dimension ``n_species * n_points``."""
        return self.n_species * self.n_points

    @property
    def n_edges(self) -> int:
        return self._gradient.shape[0]

    @property
    def nodes(self) -> np.ndarray:
        j = np.arange(self.n_points)
        if self.bc is BoundaryCondition.DIRICHLET:
            return (j + 1) * self.h
        return (j + 0.5) * self.h

    @property
    def gradient(self) -> np.ndarray:
        """Single-species difference matrix of shape ``(n_edges, N)``."""
        return self._gradient

    @property
    def full_gradient(self) -> np.ndarray:
        """Block-diagonal gradient acting on all species at once."""
        return self._full_gradient

    def split(self, u: np.ndarray) -> np.ndarray:
        """View a state as an ``(n_species, N)`` array."""
        return np.asarray(u).reshape(self.n_species, self.n_points)

    def edge_states(self, u: np.ndarray) -> np.ndarray:
        """Average of the two nodal values adjacent to each edge, shape ``(n_species, n_edges)``.

        Dirichlet boundary edges average with the zero boundary value.
        """
        v = self.split(u)
        if self.bc is BoundaryCondition.DIRICHLET:
            padded = np.pad(v, ((0, 0), (1, 1)))
            return 0.5 * (padded[:, :-1] + padded[:, 1:])
        return 0.5 * (v[:, :-1] + v[:, 1:])

    def inner(self, a, b) -> float:
        return float(self.h * np.dot(np.ravel(a), np.ravel(b)))

    def norm(self, a) -> float:
        return float(np.sqrt(self.h) * np.linalg.norm(np.ravel(a)))

    def grad_norm(self, a) -> float:
        g = self.full_gradient @ np.ravel(a)
        return float(np.sqrt(self.h) * np.linalg.norm(g))

    def h1_norm(self, a) -> float:
        return float(np.hypot(self.norm(a), self.grad_norm(a)))

    def mode(self, k: int, normalized: bool = True) -> np.ndarray:
        """Smooth mode ``k >= 1`` at the nodes: sine (Dirichlet) or cosine (Neumann)."""
        arg = k * np.pi * self.nodes / self.length
        phi = np.sin(arg) if self.bc is BoundaryCondition.DIRICHLET else np.cos(arg)
        if normalized:
            phi = np.sqrt(2.0 / self.length) * phi
        return phi

    def test_basis(self, n_modes: int) -> np.ndarray:
        """Smooth test vectors with unit discrete L2 norm, one column per (species, mode)."""
        cols = []
        for s in range(self.n_species):
            for k in range(1, n_modes + 1):
                v = np.zeros(self.m)
                phi = self.mode(k)
                v[s * self.n_points:(s + 1) * self.n_points] = phi / self.norm(phi)
                cols.append(v)
        return np.column_stack(cols)


def _gradient_matrix(n: int, h: float, bc: BoundaryCondition) -> np.ndarray:
    if bc is BoundaryCondition.DIRICHLET:
        d = np.zeros((n + 1, n))
        idx = np.arange(n)
        d[idx, idx] = 1.0
        d[idx + 1, idx] = -1.0
    else:
        d = np.zeros((n - 1, n))
        idx = np.arange(n - 1)
        d[idx, idx + 1] = 1.0
        d[idx, idx] = -1.0
    return d / h


def build_grid(length: float, n_points: int, bc, n_species: int = 1) -> SpatialGrid:
    return SpatialGrid(length, n_points, bc, n_species)
