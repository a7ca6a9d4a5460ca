"""Assembly of the frozen quasilinear operator and its bilinear form.

With the discrete gradient ``D`` of the grid and the edge diffusion blocks
``B_e = B(midpoint state at e)`` the operator is

    A_v = -D^T blockdiag(B_e) D - Gamma (x) I_N,

so that ``a(v; w1, w2) = <-A_v w1, w2>_h`` holds exactly at matrix level when
the discrete inner product is ``<a, b>_h = h * a.b``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla

from .errors import AssemblyError
from .grid import SpatialGrid
from .models import DiffusionModel


@dataclass(frozen=True, eq=False)
class OperatorMatrix:
    entries: np.ndarray
    symmetric_part_definite: bool
    eigenvalues: np.ndarray | None = None
    eigenvectors: np.ndarray | None = None

    @classmethod
    def from_entries(cls, entries, spectral: bool = True) -> "OperatorMatrix":
        a = np.array(entries, dtype=float)
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise ValueError(f"operator must be square, got shape {a.shape}")
        a.setflags(write=False)
        vals = vecs = None
        if spectral:
            if is_symmetric(a):
                vals, vecs = np.linalg.eigh(0.5 * (a + a.T))
            else:
                vals, vecs = np.linalg.eig(a)
            vals.setflags(write=False)
            vecs.setflags(write=False)
        return cls(a, _negative_definite(a), vals, vecs)

    @property
    def shape(self):
        return self.entries.shape

    @property
    def symmetric(self) -> bool:
        return is_symmetric(self.entries)

    @property
    def T(self) -> "OperatorMatrix":
        """Adjoint with respect to the (uniformly weighted) discrete inner product."""
        vals = self.eigenvalues
        vecs = None
        if vals is not None:
            if self.symmetric:
                vecs = self.eigenvectors
            else:
                vals = vecs = None
        return OperatorMatrix(np.ascontiguousarray(self.entries.T), self.symmetric_part_definite, vals, vecs)

    def spectrum(self) -> np.ndarray:
        if self.eigenvalues is not None:
            return self.eigenvalues
        return np.linalg.eigvals(self.entries)

    def __matmul__(self, other):
        return self.entries @ (other.entries if isinstance(other, OperatorMatrix) else other)

    def __array__(self, dtype=None, copy=None):
        return self.entries if dtype is None else self.entries.astype(dtype)


def is_symmetric(a: np.ndarray, rtol: float = 1e-13) -> bool:
    a = np.asarray(a)
    scale = max(np.max(np.abs(a)), 1e-300)
    return bool(np.max(np.abs(a - a.T)) <= rtol * scale)


def _negative_definite(a: np.ndarray) -> bool:
    try:
        np.linalg.cholesky(-0.5 * (a + a.T))
    except np.linalg.LinAlgError:
        return False
    return True


def as_array(op) -> np.ndarray:
    return op.entries if isinstance(op, OperatorMatrix) else np.asarray(op, dtype=float)


def edge_blocks(model: DiffusionModel, state, grid: SpatialGrid) -> np.ndarray:
    """Diffusion matrices at the edge midpoints, shape ``(n_edges, n, n)``."""
    state = np.asarray(state, dtype=float)
    if state.shape != (grid.m,):
        raise ValueError(f"state has shape {state.shape}, expected ({grid.m},)")
    blocks = np.asarray(model.diffusion(grid.edge_states(state)), dtype=float)
    n = model.n_species
    blocks = np.broadcast_to(blocks, (grid.n_edges, n, n))
    finite = np.isfinite(blocks).all(axis=(1, 2))
    if not finite.all():
        raise AssemblyError("non-finite diffusion matrix", edge=int(np.flatnonzero(~finite)[0]))
    if model.demands_definite:
        sym = 0.5 * (blocks + np.swapaxes(blocks, 1, 2))
        lam_min = np.linalg.eigvalsh(sym)[:, 0]
        bad = np.flatnonzero(lam_min <= 0)
        if bad.size:
            raise AssemblyError("diffusion matrix not positive definite", edge=int(bad[0]))
    return blocks


def operator_entries(model: DiffusionModel, state, grid: SpatialGrid, include_gamma: bool = True) -> np.ndarray:
    """Dense matrix of ``A_v`` without building an :class:`OperatorMatrix`."""
    if model.n_species != grid.n_species:
        raise ValueError("model and grid disagree on the number of species")
    blocks = edge_blocks(model, state, grid)
    d = grid.gradient
    n, N = model.n_species, grid.n_points
    out = np.empty((grid.m, grid.m))
    for i in range(n):
        for j in range(n):
            out[i * N:(i + 1) * N, j * N:(j + 1) * N] = -(d.T * blocks[:, i, j]) @ d
    if include_gamma and np.any(model.gamma):
        diag = np.arange(N)
        for i in range(n):
            for j in range(n):
                if model.gamma[i, j]:
                    out[i * N + diag, j * N + diag] -= model.gamma[i, j]
    return out


def assemble_operator(model: DiffusionModel, state, grid: SpatialGrid, include_gamma: bool = True,
                      spectral: bool = True) -> OperatorMatrix:
    return OperatorMatrix.from_entries(operator_entries(model, state, grid, include_gamma), spectral=spectral)


def bilinear_form(model: DiffusionModel, v, w1, w2, grid: SpatialGrid, include_gamma: bool = True) -> float:
    """``<B(v) grad w1, grad w2>_h + <Gamma w1, w2>_h`` from edge difference quotients."""
    w1 = np.asarray(w1, dtype=float)
    w2 = np.asarray(w2, dtype=float)
    if w1.shape != (grid.m,) or w2.shape != (grid.m,):
        raise ValueError(f"fields must have shape ({grid.m},)")
    blocks = edge_blocks(model, v, grid)
    d = grid.gradient
    g1 = grid.split(w1) @ d.T
    g2 = grid.split(w2) @ d.T
    flux = np.einsum("eij,je->ie", blocks, g1)
    value = grid.h * np.sum(flux * g2)
    if include_gamma:
        value += grid.h * np.sum((model.gamma @ grid.split(w1)) * grid.split(w2))
    return float(value)


def resolvent_norm(a: np.ndarray, lam: complex) -> float:
    """Spectral norm of ``(lam I - A)^{-1}``."""
    a = as_array(a)
    s = sla.svdvals(lam * np.eye(a.shape[0]) - a)
    return float(np.inf) if s[-1] == 0 else float(1.0 / s[-1])
