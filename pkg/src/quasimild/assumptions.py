"""Numerical diagnostics for the structural assumptions on the operator path.

Every constant is measured on the discrete operators at the supplied states:

* coercivity ``kappa``: smallest generalized Rayleigh quotient
  ``a(v; w, w) / |grad w|^2`` over the range of the discrete gradient;
* continuity ``M``: norm of the bilinear form in the discrete H1 norm;
* resolvent constant: ``max (|lambda| + 1) |(lambda - A)^{-1}|_2`` over
  samples on both rays ``|arg lambda| = vartheta``;
* Lipschitz quotient ``|(-A_u)^nu ((-A_u)^{-1} - (-A_v)^{-1})| / |u - v|_Y``;
* Hoelder exponent ``delta`` of ``t -> A(t)^{-1}`` by log-log regression.

The adjoint variants rerun the same measurements on transposed matrices.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from types import MappingProxyType
from typing import Mapping

import numpy as np
import scipy.linalg as sla

from .fractional import fractional_power
from .grid import SpatialGrid
from .models import DiffusionModel
from .operators import edge_blocks, is_symmetric, operator_entries

DEFAULT_SECTOR_ANGLE = 0.75 * np.pi


@dataclass(frozen=True)
class AssumptionReport:
    kappa_est: float
    continuity_M: float
    resolvent_M: float
    lipschitz_L: float
    hoelder_delta: tuple
    passed: Mapping
    adjoint: Mapping = field(default_factory=dict)
    details: Mapping = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "passed", MappingProxyType(dict(self.passed)))
        object.__setattr__(self, "adjoint", MappingProxyType(dict(self.adjoint)))
        object.__setattr__(self, "details", MappingProxyType(dict(self.details)))

    @property
    def all_passed(self) -> bool:
        return all(self.passed.values())


def sector_samples(spectral_radius: float, theta: float = DEFAULT_SECTOR_ANGLE, n_per_ray: int = 16,
                   lo: float = 1e-2, decades_above: float = 1.0) -> np.ndarray:
    """``n_per_ray`` log-spaced moduli on each ray ``arg lambda = +-theta``."""
    if not np.pi / 2 < theta < np.pi:
        raise ValueError("sector angle must lie in (pi/2, pi)")
    hi = max(spectral_radius, 1.0) * 10.0**decades_above
    r = np.logspace(np.log10(lo), np.log10(hi), n_per_ray)
    return np.concatenate([r * np.exp(1j * theta), r * np.exp(-1j * theta)])


def _form_matrix(model, state, grid, transpose=False):
    """``G`` with ``a(v; w1, w2) = h * w2 . G w1``."""
    g = -operator_entries(model, state, grid)
    return g.T if transpose else g


def _coercivity(g: np.ndarray, grid: SpatialGrid) -> float:
    d = grid.full_gradient
    _, s, vt = np.linalg.svd(d, full_matrices=False)
    keep = s > 1e-10 * s.max()
    basis = vt[keep].T
    sym = 0.5 * (g + g.T)
    lhs = basis.T @ sym @ basis
    rhs = np.diag(s[keep] ** 2)
    return float(sla.eigh(lhs, rhs, eigvals_only=True)[0])


def _h1_inverse_sqrt(grid: SpatialGrid) -> np.ndarray:
    d = grid.full_gradient
    vals, vecs = np.linalg.eigh(d.T @ d + np.eye(grid.m))
    return (vecs / np.sqrt(vals)) @ vecs.T


def _resolvent_constant(a: np.ndarray, lambdas) -> float:
    eye = np.eye(a.shape[0])
    best = 0.0
    for lam in lambdas:
        smin = sla.svdvals(lam * eye - a)[-1]
        if smin <= 1e-14 * max(abs(lam), 1.0):
            return float("inf")
        best = max(best, (abs(lam) + 1.0) / smin)
    return float(best)


def _invertible(a: np.ndarray) -> bool:
    s = sla.svdvals(a)
    return bool(s[-1] > 1e-12 * s[0])


def _nu_power(neg_a: np.ndarray, nu: float) -> np.ndarray:
    if nu == 1.0:
        return neg_a
    method = "spectral" if is_symmetric(neg_a, rtol=1e-12) else "dunford"
    return fractional_power(-neg_a, nu, method)


def lipschitz_quotient(a_u: np.ndarray, a_v: np.ndarray, nu: float = 1.0) -> float:
    """``|(-A_u)^nu ((-A_u)^{-1} - (-A_v)^{-1})|_2``."""
    bu, bv = -a_u, -a_v
    diff = np.linalg.inv(bu) - np.linalg.inv(bv)
    return float(np.linalg.norm(_nu_power(bu, nu) @ diff, 2))


def _y_norm(grid: SpatialGrid, v: np.ndarray, y_norm: str) -> float:
    return grid.h1_norm(v) if y_norm == "H1" else grid.norm(v)


def hoelder_regression(ops, times, nu: float = 1.0, n_lags: int = 12,
                       max_lag_fraction: float = 0.25) -> tuple:
    """Fit ``q(tau) ~ c tau^delta`` for ``q(tau) = max_j |(-A_j)^nu ((-A_j)^{-1} - (-A_{j-tau})^{-1})|``.

    Only lags up to ``max_lag_fraction`` of the path enter the fit, so that
    saturation at long lags does not flatten the slope.  Returns
    ``(nu, delta)``; ``delta = inf`` when the path is constant.
    """
    ops = np.asarray(ops, dtype=float)
    times = np.asarray(times, dtype=float)
    n = ops.shape[0]
    if n < 3:
        raise ValueError("need at least three operators for a Hoelder fit")
    invs = np.stack([np.linalg.inv(-a) for a in ops])
    pows = [_nu_power(-a, nu) for a in ops]
    max_lag = max(2, int(max_lag_fraction * (n - 1)))
    lags = np.unique(np.geomspace(1, min(max_lag, n - 1), n_lags).astype(int))
    taus, qs = [], []
    for lag in lags:
        q = max(float(np.linalg.norm(pows[j] @ (invs[j] - invs[j - lag]), 2)) for j in range(lag, n))
        tau = float(np.max(times[lag:] - times[:-lag]))
        if q > 0:
            taus.append(tau)
            qs.append(q)
    if len(qs) < 2:
        return (float(nu), float("inf"))
    slope = np.polyfit(np.log(taus), np.log(qs), 1)[0]
    return (float(nu), float(slope))


def _measure(model, states, grid, lambdas, y_norm, nu, transpose):
    h1_isqrt = _h1_inverse_sqrt(grid)
    kappa = np.inf
    cont = 0.0
    resolvent = 0.0
    sectorial = True
    abscissa = -np.inf
    ops = []
    for v in states:
        g = _form_matrix(model, v, grid, transpose)
        a = -g
        ops.append(a)
        kappa = min(kappa, _coercivity(g, grid))
        cont = max(cont, float(np.linalg.norm(h1_isqrt @ g @ h1_isqrt, 2)))
        eig = np.linalg.eigvals(a)
        abscissa = max(abscissa, float(eig.real.max()))
        ok = _invertible(a) and eig.real.max() < 0
        sectorial = bool(sectorial and ok)
        resolvent = max(resolvent, _resolvent_constant(a, lambdas) if ok else float("inf"))

    lip = 0.0
    skipped = 0
    for (u, a_u), (v, a_v) in zip(zip(states[:-1], ops[:-1]), zip(states[1:], ops[1:])):
        dist = _y_norm(grid, u - v, y_norm)
        if dist == 0.0:
            skipped += 1
            continue
        if not (_invertible(a_u) and _invertible(a_v)):
            lip = float("inf")
            continue
        lip = max(lip, lipschitz_quotient(a_u, a_v, nu) / dist)
    return dict(kappa=float(kappa), continuity=cont, resolvent=float(resolvent), lipschitz=float(lip),
                sectorial=sectorial, abscissa=abscissa, skipped_pairs=skipped, ops=ops)


def check_assumptions(model: DiffusionModel, states, grid: SpatialGrid, lambda_samples=None,
                      y_norm: str = "H1", nu: float = 1.0, times=None,
                      kappa_min: float = 0.0, theta: float = DEFAULT_SECTOR_ANGLE,
                      path_states=None) -> AssumptionReport:
    """Measure the assumption constants at ``states`` (a list of fields).

    ``times`` enables the Hoelder regression, run on ``path_states`` when
    given (a denser trajectory, same length as ``times``) and on ``states``
    otherwise; without ``times`` ``hoelder_delta`` is ``(nu, nan)`` and not
    judged.  A singular or unstable operator is reported through the
    ``sectorial`` flag and an infinite resolvent constant rather than raised.
    """
    states = [np.asarray(s, dtype=float) for s in states]
    if not states:
        raise ValueError("need at least one state")
    y_norm = str(y_norm).upper()
    if y_norm not in ("L2", "H1"):
        raise ValueError(f"y_norm must be L2 or H1, got {y_norm!r}")
    if lambda_samples is None:
        radius = max(float(np.max(np.abs(np.linalg.eigvals(operator_entries(model, s, grid))))) for s in states)
        lambda_samples = sector_samples(radius, theta)
    lambdas = np.asarray(lambda_samples, dtype=complex)

    primal = _measure(model, states, grid, lambdas, y_norm, nu, transpose=False)
    dual = _measure(model, states, grid, lambdas, y_norm, nu, transpose=True)

    delta = dual_delta = float("nan")
    if times is not None and primal["sectorial"]:
        if path_states is None:
            ops = primal["ops"]
        else:
            ops = [operator_entries(model, np.asarray(s, dtype=float), grid) for s in path_states]
        if len(ops) != len(times):
            raise ValueError("times and the Hoelder path differ in length")
        if len(ops) >= 3:
            delta = hoelder_regression(ops, times, nu)[1]
            dual_delta = hoelder_regression([a.T for a in ops], times, nu)[1]

    blocks_definite = True
    for v in states:
        b = edge_blocks(model, v, grid)
        sym = 0.5 * (b + np.swapaxes(b, 1, 2))
        blocks_definite = blocks_definite and bool(np.all(np.linalg.eigvalsh(sym)[:, 0] > 0))

    passed = {
        "coercivity": primal["kappa"] > kappa_min,
        "continuity": bool(np.isfinite(primal["continuity"])),
        "sectoriality": primal["sectorial"],
        "resolvent bound": bool(np.isfinite(primal["resolvent"])),
        "lipschitz": bool(np.isfinite(primal["lipschitz"])),
    }
    if not np.isnan(delta):
        passed["hoelder nu + delta > 1"] = nu + delta > 1.0
    for c in model.constraints:
        passed[c.name] = c.passed

    adjoint = {
        "kappa_est": dual["kappa"], "continuity_M": dual["continuity"], "resolvent_M": dual["resolvent"],
        "lipschitz_L": dual["lipschitz"], "hoelder_delta": (float(nu), dual_delta),
        "sectorial": dual["sectorial"],
    }
    details = {
        "y_norm": y_norm, "sector_angle": float(theta), "n_lambda": int(lambdas.size),
        "n_states": len(states), "spectral_abscissa": primal["abscissa"],
        "skipped_identical_pairs": primal["skipped_pairs"], "edge_blocks_definite": blocks_definite,
        "min_state": float(min(s.min() for s in states)),
    }
    return AssumptionReport(primal["kappa"], primal["continuity"], primal["resolvent"], primal["lipschitz"],
                            (float(nu), delta), passed, adjoint, details)
