"""Experiment configuration: flat ``section.key = value`` files mapped onto dataclasses."""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field, fields, replace
from enum import Enum
from pathlib import Path

import numpy as np

from ..errors import ConfigurationError, ParameterConditionError
from ..evolution import TimeMesh
from ..grid import BoundaryCondition, SpatialGrid, build_grid
from ..models import DiffusionModel, SigmaSpec, bounded_diffusion_model, linear_heat_model, skt_model
from ..solvers import SolverConfig


class ExperimentKind(str, Enum):
    EQUIVALENCE = "equivalence"
    IDENTITY_SUITE = "identities"
    ASSUMPTION_AUDIT = "audit"
    CONVERGENCE = "convergence"
    ORACLE_SANITY = "oracle"

    @classmethod
    def parse(cls, value) -> "ExperimentKind":
        if isinstance(value, cls):
            return value
        key = str(value).strip().lower().replace("_", "").replace("-", "")
        aliases = {"equivalence": cls.EQUIVALENCE, "identitysuite": cls.IDENTITY_SUITE,
                   "identities": cls.IDENTITY_SUITE, "assumptionaudit": cls.ASSUMPTION_AUDIT,
                   "audit": cls.ASSUMPTION_AUDIT, "check": cls.ASSUMPTION_AUDIT,
                   "convergence": cls.CONVERGENCE, "oraclesanity": cls.ORACLE_SANITY,
                   "oracle": cls.ORACLE_SANITY}
        if key not in aliases:
            raise ConfigurationError(f"unknown experiment kind {value!r}")
        return aliases[key]


@dataclass(frozen=True)
class ModelSpec:
    """``name`` is ``skt``, ``bounded`` (``b = b_offset + b_amplitude tanh``) or ``linear``."""

    name: str = "skt"
    alpha1: float = 1.0
    alpha2: float = 1.0
    beta1: float = 1.0
    beta2: float = 1.0
    gamma1: float = 2.0
    gamma2: float = 2.0
    delta1: float = 1.0
    delta2: float = 1.0
    theta11: float = 1.0
    theta12: float = 1.0
    theta21: float = 1.0
    theta22: float = 1.0
    b_offset: float = 2.0
    b_amplitude: float = 1.0
    kappa: float = 1.0
    C: float = 3.0
    diffusivity: float = 1.0


@dataclass(frozen=True)
class GridSpec:
    L: float = 1.0
    N: int = 48
    bc: str = "neumann"


@dataclass(frozen=True)
class MeshSpec:
    T: float = 0.25
    K: int = 1024


@dataclass(frozen=True)
class NoiseSpec:
    """Per-species modes ``c_k = c0 / k**power``; seeds ``seed0 .. seed0 + n_seeds - 1``."""

    M: int = 8
    c0: float = 0.05
    power: float = 1.0
    kind: str = "affine"
    basis: str = "auto"
    offset: float = 1.0
    seed0: int = 0
    n_seeds: int = 16


@dataclass(frozen=True)
class InitSpec:
    """``zero`` or ``bump``: a smooth positive profile of size ``amplitude`` around ``level``."""

    kind: str = "zero"
    level: float = 0.5
    amplitude: float = 0.25


@dataclass(frozen=True)
class AcceptanceSpec:
    min_converged_fraction: float = 0.9
    min_decreasing_fraction: float = 0.9
    max_gap: float = float("inf")
    max_iterations: int = 10


@dataclass(frozen=True)
class ExperimentConfig:
    kind: ExperimentKind = ExperimentKind.EQUIVALENCE
    out: str = "results"
    levels: int = 3
    workers: int = 1
    model: ModelSpec = field(default_factory=ModelSpec)
    grid: GridSpec = field(default_factory=GridSpec)
    mesh: MeshSpec = field(default_factory=MeshSpec)
    noise: NoiseSpec = field(default_factory=NoiseSpec)
    init: InitSpec = field(default_factory=InitSpec)
    solver: SolverConfig = field(default_factory=SolverConfig)
    acceptance: AcceptanceSpec = field(default_factory=AcceptanceSpec)

    def __post_init__(self):
        object.__setattr__(self, "kind", ExperimentKind.parse(self.kind))
        if self.levels < 1:
            raise ConfigurationError("experiment.levels must be at least 1")
        if self.workers < 1:
            raise ConfigurationError("experiment.workers must be at least 1")
        if self.noise.n_seeds < 1:
            raise ConfigurationError("noise.n_seeds must be at least 1")
        if self.mesh.K % 2 ** (self.levels - 1):
            raise ConfigurationError(f"mesh.K={self.mesh.K} cannot be halved {self.levels - 1} times")

    @property
    def seeds(self) -> list:
        return list(range(self.noise.seed0, self.noise.seed0 + self.noise.n_seeds))

    def with_seeds(self, first: int, last: int) -> "ExperimentConfig":
        if last < first:
            raise ConfigurationError(f"empty seed range {first}..{last}")
        return replace(self, noise=replace(self.noise, seed0=first, n_seeds=last - first + 1))

    def build_grid(self) -> SpatialGrid:
        model = self.build_model()
        return build_grid(self.grid.L, self.grid.N, self.grid.bc, model.n_species)

    def build_mesh(self) -> TimeMesh:
        return TimeMesh(0.0, self.mesh.T, self.mesh.K)

    def sigma_spec(self) -> SigmaSpec | None:
        if self.noise.M == 0:
            return None
        return SigmaSpec.decaying(self.noise.M, self.noise.c0, self.noise.power, kind=self.noise.kind,
                                  basis=self.noise.basis, offset=self.noise.offset)

    def build_model(self) -> DiffusionModel:
        return build_model(self.model, self.sigma_spec(), self.grid.L)

    def initial_state(self, grid: SpatialGrid) -> np.ndarray:
        return initial_state(self.init, grid)

    def validate(self) -> "ExperimentConfig":
        """Build model and grid once; raises :class:`ConfigurationError` on any inconsistency."""
        try:
            model = self.build_model()
            grid = build_grid(self.grid.L, self.grid.N, self.grid.bc, model.n_species)
            self.build_mesh()
        except ParameterConditionError as exc:
            raise ConfigurationError(str(exc)) from exc
        except (ValueError, TypeError) as exc:
            raise ConfigurationError(str(exc)) from exc
        if grid.bc is not model.bc:
            raise ConfigurationError(
                f"grid.bc={grid.bc.value} does not match the {model.name} model's {model.bc.value} boundary")
        return self


def build_model(spec: ModelSpec, sigma: SigmaSpec | None, length: float = 1.0) -> DiffusionModel:
    name = spec.name.lower()
    if name == "skt":
        return skt_model((spec.alpha1, spec.alpha2), (spec.beta1, spec.beta2), (spec.gamma1, spec.gamma2),
                         (spec.delta1, spec.delta2),
                         [[spec.theta11, spec.theta12], [spec.theta21, spec.theta22]], sigma)
    if name in ("bounded", "bounded_diffusion"):
        off, amp = spec.b_offset, spec.b_amplitude
        return bounded_diffusion_model(lambda xi: off + amp * np.tanh(xi), spec.kappa, spec.C, sigma,
                                       length=length)
    if name in ("linear", "heat"):
        return linear_heat_model(spec.diffusivity, sigma, length)
    raise ConfigurationError(f"unknown model {spec.name!r}")


def initial_state(spec: InitSpec, grid: SpatialGrid) -> np.ndarray:
    kind = spec.kind.lower()
    if kind == "zero":
        return np.zeros(grid.m)
    if kind != "bump":
        raise ConfigurationError(f"unknown init.kind {spec.kind!r}")
    x = grid.nodes / grid.length
    if grid.bc is BoundaryCondition.NEUMANN:
        profiles = [spec.level + (-1) ** s * spec.amplitude * np.cos(np.pi * x) for s in range(grid.n_species)]
    else:
        profiles = [(spec.level + spec.amplitude) * np.sin(np.pi * x) for _ in range(grid.n_species)]
    return np.concatenate(profiles)


_SECTIONS = {"model": "model", "grid": "grid", "mesh": "mesh", "noise": "noise", "init": "init",
             "solver": "solver", "acceptance": "acceptance"}
_TOP_LEVEL = {"experiment.kind": "kind", "experiment.out": "out", "experiment.levels": "levels",
              "experiment.workers": "workers", "convergence.levels": "levels"}


def _convert(raw: str, default, key: str):
    text = raw.strip()
    if len(text) >= 2 and text[0] == text[-1] and text[0] in "\"'":
        text = text[1:-1]
    try:
        if isinstance(default, bool):
            low = text.lower()
            if low in ("true", "yes", "on", "1"):
                return True
            if low in ("false", "no", "off", "0"):
                return False
            raise ValueError(text)
        if isinstance(default, int):
            return int(text)
        if isinstance(default, float):
            return float(text)
    except ValueError:
        raise ConfigurationError(f"{key}: cannot read {raw.strip()!r} as {type(default).__name__}") from None
    return text


def parse_config_text(text: str) -> ExperimentConfig:
    """Parse ``section.key = value`` lines (``#`` comments); unknown keys are errors."""
    base = ExperimentConfig()
    sections = {name: {} for name in _SECTIONS}
    top = {}
    seen = set()
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        if "=" not in stripped:
            raise ConfigurationError(f"line {lineno}: expected 'key = value', got {line.strip()!r}")
        key, value = (part.strip() for part in stripped.split("=", 1))
        if key in seen:
            raise ConfigurationError(f"line {lineno}: duplicate key {key!r}")
        seen.add(key)
        if key in _TOP_LEVEL:
            attr = _TOP_LEVEL[key]
            default = getattr(base, attr)
            top[attr] = value.strip().strip("\"'") if attr == "kind" else _convert(value, default, key)
            continue
        section, _, name = key.partition(".")
        if section not in _SECTIONS or not name:
            raise ConfigurationError(f"line {lineno}: unknown key {key!r}")
        target = getattr(base, section)
        known = {f.name for f in fields(target)}
        if name not in known:
            raise ConfigurationError(f"line {lineno}: unknown key {key!r}")
        sections[section][name] = _convert(value, getattr(target, name), key)
    try:
        parts = {sec: replace(getattr(base, sec), **vals) for sec, vals in sections.items()}
        return ExperimentConfig(**top, **parts)
    except (TypeError, ValueError) as exc:
        if isinstance(exc, ConfigurationError):
            raise
        raise ConfigurationError(str(exc)) from exc


def load_config(path) -> ExperimentConfig:
    path = Path(path)
    if not path.is_file():
        raise ConfigurationError(f"config file {path} not found")
    return parse_config_text(path.read_text())


def config_to_text(cfg: ExperimentConfig) -> str:
    """Inverse of :func:`parse_config_text` (every key written explicitly)."""
    lines = [f"experiment.kind = {cfg.kind.value}", f"experiment.out = {cfg.out}",
             f"experiment.levels = {cfg.levels}", f"experiment.workers = {cfg.workers}"]
    for section in _SECTIONS:
        obj = getattr(cfg, section)
        for f in fields(obj):
            val = getattr(obj, f.name)
            lines.append(f"{section}.{f.name} = {val!r}" if isinstance(val, float) else f"{section}.{f.name} = {val}")
    return "\n".join(lines) + "\n"


def as_dict(cfg: ExperimentConfig) -> dict:
    out = dataclasses.asdict(cfg)
    out["kind"] = cfg.kind.value
    return out
