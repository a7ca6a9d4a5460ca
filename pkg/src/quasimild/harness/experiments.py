"""Experiment runners and result persistence.

Every runner returns an :class:`ExperimentReport`; :meth:`ExperimentReport.write`
produces ``metrics.csv``, ``refinement.csv`` and ``report.txt``.  The CSV files
hold only deterministic quantities, so re-running a config with the same seeds
reproduces them byte for byte; wall-clock times and the timestamp live in the
header of ``report.txt``.
"""

from __future__ import annotations

import csv
import io
import math
import platform
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from datetime import datetime, timezone
from pathlib import Path

import numpy as np
import scipy

from .. import __version__
from ..errors import QuasimildError
from ..noise import sample_path
from ..solvers import (cross_solver_gap, mild_residual, relative_sup_error, solve_quasilinear_fixed_point,
                       solve_weak_galerkin, stochastic_convolution_oracle, weak_residual)
from . import batteries
from .batteries import Check
from .config import ExperimentConfig, ExperimentKind, config_to_text

EXIT_OK = 0
EXIT_ACCEPTANCE = 2
EXIT_CONFIG = 3
EXIT_BLOWUP = 4

METRIC_COLUMNS = ("seed", "status", "gap_supL2", "weak_res_static", "weak_res_evo", "mild_res",
                  "l1_term", "l2_term", "iters", "max_ratio", "min_state", "gap_decreasing")
REFINEMENT_COLUMNS = ("level", "K", "dt", "gap", "observed_order", "mild_res", "weak_res_static",
                      "weak_res_evo", "n_seeds")
SEED_LEVEL_COLUMNS = ("seed", "level", "K", "dt", "gap", "mild_res", "weak_res_static", "weak_res_evo",
                      "l1_term", "l2_term", "iters", "max_ratio", "min_state")


@dataclass
class ExperimentReport:
    kind: ExperimentKind
    config: ExperimentConfig
    rows: list = field(default_factory=list)
    refinement: list = field(default_factory=list)
    seed_levels: list = field(default_factory=list)
    checks: list = field(default_factory=list)
    aggregates: dict = field(default_factory=dict)
    failures: dict = field(default_factory=dict)
    runtimes: dict = field(default_factory=dict)
    seeds_attempted: int = 0
    metric_columns: tuple = METRIC_COLUMNS
    refinement_columns: tuple = REFINEMENT_COLUMNS

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    @property
    def all_seeds_failed(self) -> bool:
        return self.seeds_attempted > 0 and len(self.failures) == self.seeds_attempted

    @property
    def exit_code(self) -> int:
        if self.all_seeds_failed:
            return EXIT_BLOWUP
        return EXIT_OK if self.passed else EXIT_ACCEPTANCE

    def environment(self) -> dict:
        return {"package": __version__, "python": platform.python_version(), "numpy": np.__version__,
                "scipy": scipy.__version__, "seeds": ",".join(str(s) for s in self.config.seeds)}

    def write(self, out_dir) -> Path:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        (out / "metrics.csv").write_text(_csv_text(self.metric_columns, self.rows))
        (out / "refinement.csv").write_text(_csv_text(self.refinement_columns, self.refinement))
        if self.seed_levels:
            (out / "refinement_seeds.csv").write_text(_csv_text(SEED_LEVEL_COLUMNS, self.seed_levels))
        if self.checks:
            check_rows = [{"check": c.name, "topic": c.topic, "value": c.value, "threshold": c.threshold,
                           "passed": c.passed} for c in self.checks]
            (out / "checks.csv").write_text(_csv_text(("check", "topic", "value", "threshold", "passed"),
                                                      check_rows))
        (out / "config.cfg").write_text(config_to_text(self.config))
        (out / "report.txt").write_text(self.summary())
        return out

    def summary(self) -> str:
        stamp = datetime.now(timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ")
        buf = io.StringIO()
        total = sum(self.runtimes.values())
        buf.write(f"# generated {stamp}; wall time {total:.2f} s\n")
        if self.runtimes:
            buf.write("# runtime_s " + " ".join(f"{k}={v:.2f}" for k, v in self.runtimes.items()) + "\n")
        buf.write(f"experiment: {self.kind.value}\n")
        buf.write("environment: " + ", ".join(f"{k}={v}" for k, v in self.environment().items()) + "\n\n")
        if self.aggregates:
            buf.write("aggregates\n")
            for k, v in self.aggregates.items():
                buf.write(f"  {k}: {_fmt(v)}\n")
            buf.write("\n")
        if self.refinement:
            buf.write("refinement\n")
            for r in self.refinement:
                buf.write("  " + ", ".join(f"{c}={_fmt(r.get(c, ''))}" for c in self.refinement_columns) + "\n")
            buf.write("\n")
        if self.failures:
            buf.write("failed seeds\n")
            for seed, msg in sorted(self.failures.items()):
                buf.write(f"  seed {seed}: {msg}\n")
            buf.write("\n")
        buf.write("checks\n")
        width = max((len(c.name) for c in self.checks), default=10)
        for c in self.checks:
            topic = f"[{c.topic}] " if c.topic else ""
            buf.write(f"  {'PASS' if c.passed else 'FAIL'}  {c.name:<{width}}  {_fmt(c.value)}  "
                      f"(want {c.threshold}) {topic}\n")
        buf.write(f"\noverall: {'PASS' if self.passed else 'FAIL'}\n")
        return buf.getvalue()


def _fmt(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def _csv_text(columns, rows) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for r in rows:
        writer.writerow([_fmt(r.get(c, "")) for c in columns])
    return buf.getvalue()


def _map_seeds(fn, cfg: ExperimentConfig, seeds, workers: int):
    if workers <= 1 or len(seeds) <= 1:
        return [fn(cfg, s) for s in seeds]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, [cfg] * len(seeds), seeds))


def _strictly_decreasing(values, slack: float = 0.0) -> bool:
    """Each entry below its predecessor (times ``1 + slack``); an all-zero sequence counts as decreasing."""
    v = [float(x) for x in values]
    return all(b < a * (1.0 + slack) or (a == 0.0 and b == 0.0) for a, b in zip(v, v[1:]))


def _levels(cfg: ExperimentConfig) -> list:
    return [cfg.mesh.K // 2 ** (cfg.levels - 1 - i) for i in range(cfg.levels)]


def _equivalence_seed(cfg: ExperimentConfig, seed: int) -> dict:
    """Weak and fixed-point mild solves on one refinement-consistent noise path, every level."""
    model = cfg.build_model()
    grid = cfg.build_grid()
    u0 = cfg.initial_state(grid)
    finest = sample_path(seed, cfg.build_mesh(), model.n_modes) if model.n_modes else None
    levels = []
    start = time.perf_counter()
    try:
        for K in _levels(cfg):
            path = finest.level(K) if finest is not None else _silent_path(cfg, K, seed)
            weak = solve_weak_galerkin(model, u0, path, grid, cfg.solver)
            mild = solve_quasilinear_fixed_point(model, u0, path, grid, cfg.solver)
            static = weak_residual(mild, model, path, grid, mode="static")
            evo = weak_residual(mild, model, path, grid, mode="evolution")
            levels.append({
                "seed": seed, "K": K, "dt": path.mesh.dt,
                "gap": cross_solver_gap(weak, mild),
                "mild_res": mild_residual(weak, model, path, grid, cfg=cfg.solver),
                "weak_res_static": static.weak_residual_static,
                "weak_res_evo": evo.weak_residual_evolution,
                "l1_term": evo.l1_term, "l2_term": evo.l2_term,
                "iters": mild.iterations_used,
                "max_ratio": max(mild.contraction_ratios, default=0.0),
                "min_state": float(min(weak.states.min(), mild.states.min())),
            })
    except QuasimildError as exc:
        return {"seed": seed, "status": "failed", "error": f"{type(exc).__name__}: {exc}", "levels": levels,
                "runtime": time.perf_counter() - start}
    return {"seed": seed, "status": "ok", "levels": levels, "runtime": time.perf_counter() - start}


def _silent_path(cfg, K, seed):
    from ..evolution import TimeMesh
    from ..noise import NoisePath
    return NoisePath(TimeMesh(0.0, cfg.mesh.T, K), 0, seed, np.zeros((K, 0)))


def _seed_converged(res: dict, cfg: ExperimentConfig) -> bool:
    return res["status"] == "ok" and all(
        lv["max_ratio"] < 1.0 and lv["iters"] <= cfg.acceptance.max_iterations for lv in res["levels"])


def run_equivalence(cfg: ExperimentConfig, workers: int | None = None) -> ExperimentReport:
    cfg.validate()
    workers = cfg.workers if workers is None else workers
    results = sorted(_map_seeds(_equivalence_seed, cfg, cfg.seeds, workers), key=lambda r: r["seed"])
    report = ExperimentReport(ExperimentKind.EQUIVALENCE, cfg, seeds_attempted=len(results))
    n_levels = cfg.levels
    converged, decreasing = [], []
    for res in results:
        seed = res["seed"]
        report.runtimes[f"seed{seed}"] = res["runtime"]
        if res["status"] != "ok":
            report.failures[seed] = res["error"]
            report.rows.append({"seed": seed, "status": "failed"})
            continue
        lv = res["levels"]
        for i, row in enumerate(lv):
            report.seed_levels.append({**row, "level": i})
        fin = lv[-1]
        dec = _strictly_decreasing([r["gap"] for r in lv])
        conv = _seed_converged(res, cfg)
        converged.append(conv)
        if conv:
            decreasing.append(dec)
        report.rows.append({
            "seed": seed, "status": "ok", "gap_supL2": fin["gap"], "weak_res_static": fin["weak_res_static"],
            "weak_res_evo": fin["weak_res_evo"], "mild_res": fin["mild_res"], "l1_term": fin["l1_term"],
            "l2_term": fin["l2_term"], "iters": fin["iters"], "max_ratio": fin["max_ratio"],
            "min_state": fin["min_state"], "gap_decreasing": dec,
        })

    ok = [r for r in results if r["status"] == "ok" and len(r["levels"]) == n_levels]
    prev_gap = None
    for i in range(n_levels):
        if not ok:
            break
        per = [r["levels"][i] for r in ok]
        gap = float(np.median([p["gap"] for p in per]))
        order = math.log2(prev_gap / gap) if prev_gap and gap > 0 else float("nan")
        report.refinement.append({
            "level": i, "K": per[0]["K"], "dt": per[0]["dt"], "gap": gap, "observed_order": order,
            "mild_res": float(np.median([p["mild_res"] for p in per])),
            "weak_res_static": float(np.median([p["weak_res_static"] for p in per])),
            "weak_res_evo": float(np.median([p["weak_res_evo"] for p in per])),
            "n_seeds": len(per),
        })
        prev_gap = gap

    n_total = len(results)
    frac_conv = sum(converged) / n_total if n_total else 0.0
    frac_dec = sum(decreasing) / len(decreasing) if decreasing else 0.0
    acc = cfg.acceptance
    report.aggregates.update({
        "seeds": n_total, "failed_seeds": len(report.failures), "converged_fraction": frac_conv,
        "gap_decreasing_fraction_of_converged": frac_dec,
        "max_iterations": max((r["iters"] for r in report.rows if r["status"] == "ok"), default=0),
        "min_state": min((r["min_state"] for r in report.rows if r["status"] == "ok"), default=float("nan")),
        "initial_data": cfg.init.kind,
    })
    if any(r["status"] == "ok" and r["min_state"] < 0 for r in report.rows):
        report.aggregates["negative_states"] = "flagged (not clipped)"
    report.checks.append(Check("fixed point converged with ratios < 1 within the iteration budget", frac_conv,
                               f">= {acc.min_converged_fraction}", frac_conv >= acc.min_converged_fraction,
                               "fixed point"))
    report.checks.append(Check("cross-solver gap decreasing across refinement levels", frac_dec,
                               f">= {acc.min_decreasing_fraction}", frac_dec >= acc.min_decreasing_fraction,
                               "equivalence"))
    if report.refinement:
        for key, label in (("mild_res", "mild residual of the weak trajectory"),
                           ("weak_res_static", "static weak residual of the mild trajectory"),
                           ("weak_res_evo", "evolution-test weak residual of the mild trajectory")):
            seq = [r[key] for r in report.refinement]
            report.checks.append(Check(f"{label} decreasing (median over seeds)", seq[-1],
                                       "decreasing", _strictly_decreasing(seq), "equivalence"))
    if math.isfinite(acc.max_gap):
        worst = max((r["gap_supL2"] for r in report.rows if r["status"] == "ok"), default=float("inf"))
        report.checks.append(Check("cross-solver gap at the finest level", worst, f"<= {acc.max_gap}",
                                   worst <= acc.max_gap, "equivalence"))
    return report


def _oracle_seed(cfg: ExperimentConfig, seed: int) -> dict:
    model = cfg.build_model()
    grid = cfg.build_grid()
    u0 = cfg.initial_state(grid)
    finest = sample_path(seed, cfg.build_mesh(), model.n_modes)
    start = time.perf_counter()
    out = []
    try:
        for K in _levels(cfg):
            path = finest.level(K)
            oracle = stochastic_convolution_oracle(model, u0, path, grid)
            mild = solve_quasilinear_fixed_point(model, u0, path, grid, cfg.solver)
            weak = solve_weak_galerkin(model, u0, path, grid, cfg.solver)
            out.append({"K": K, "dt": path.mesh.dt, "mild_err": relative_sup_error(mild, oracle),
                        "weak_err": relative_sup_error(weak, oracle), "iters": mild.iterations_used})
    except QuasimildError as exc:
        return {"seed": seed, "status": "failed", "error": f"{type(exc).__name__}: {exc}", "levels": out,
                "runtime": time.perf_counter() - start}
    return {"seed": seed, "status": "ok", "levels": out, "runtime": time.perf_counter() - start}


ORACLE_COLUMNS = ("seed", "status", "mild_err", "weak_err", "mild_factor_min", "mild_factor_max", "iters")


def run_convergence(cfg: ExperimentConfig, workers: int | None = None, mild_tol: float = 0.02,
                    weak_tol: float = 0.05, factor_band=(1.6, 2.4)) -> ExperimentReport:
    """Refinement study.

    For autonomous linear models with additive noise both solvers are compared
    with the exact stochastic convolution on each level; otherwise this is the
    equivalence study with its refinement table.
    """
    cfg.validate()
    model = cfg.build_model()
    if model.state_dependent or not model.additive_noise or model.has_drift or model.n_modes == 0:
        report = run_equivalence(cfg, workers)
        report.kind = ExperimentKind.CONVERGENCE
        return report
    workers = cfg.workers if workers is None else workers
    results = sorted(_map_seeds(_oracle_seed, cfg, cfg.seeds, workers), key=lambda r: r["seed"])
    report = ExperimentReport(ExperimentKind.CONVERGENCE, cfg, metric_columns=ORACLE_COLUMNS,
                              refinement_columns=("level", "K", "dt", "mild_err", "weak_err", "observed_order",
                                                  "n_seeds"), seeds_attempted=len(results))
    mild_ok = weak_ok = order_ok = 0
    for res in results:
        seed = res["seed"]
        report.runtimes[f"seed{seed}"] = res["runtime"]
        if res["status"] != "ok":
            report.failures[seed] = res["error"]
            report.rows.append({"seed": seed, "status": "failed"})
            continue
        lv = res["levels"]
        factors = batteries.halving_factors([r["mild_err"] for r in lv]) if len(lv) > 1 else np.array([2.0])
        fin = lv[-1]
        mild_ok += fin["mild_err"] <= mild_tol
        weak_ok += fin["weak_err"] <= weak_tol
        order_ok += bool(np.all((factors >= factor_band[0]) & (factors <= factor_band[1])))
        report.rows.append({"seed": seed, "status": "ok", "mild_err": fin["mild_err"], "weak_err": fin["weak_err"],
                            "mild_factor_min": float(factors.min()), "mild_factor_max": float(factors.max()),
                            "iters": fin["iters"]})
    ok = [r for r in results if r["status"] == "ok"]
    prev = None
    for i in range(cfg.levels):
        if not ok:
            break
        per = [r["levels"][i] for r in ok]
        err = float(np.median([p["mild_err"] for p in per]))
        report.refinement.append({"level": i, "K": per[0]["K"], "dt": per[0]["dt"], "mild_err": err,
                                  "weak_err": float(np.median([p["weak_err"] for p in per])),
                                  "observed_order": math.log2(prev / err) if prev else float("nan"),
                                  "n_seeds": len(per)})
        prev = err
    n = len(results)
    report.checks += [
        Check(f"mild vs exact stochastic convolution <= {mild_tol} (seeds passing)", mild_ok / n, "== 1",
              mild_ok == n, "oracle"),
        Check(f"weak vs exact stochastic convolution <= {weak_tol} (seeds passing)", weak_ok / n, "== 1",
              weak_ok == n, "oracle"),
        Check(f"mild error halving factor in [{factor_band[0]}, {factor_band[1]}] (seeds passing)",
              order_ok / n, "== 1", order_ok == n, "oracle"),
    ]
    return report


def _battery_report(kind, cfg, funcs) -> ExperimentReport:
    report = ExperimentReport(kind, cfg, metric_columns=("check", "topic", "value", "threshold", "passed"),
                              refinement_columns=("check", "value"))
    for fn in funcs:
        start = time.perf_counter()
        checks = fn()
        report.runtimes[fn.__name__] = time.perf_counter() - start
        report.checks.extend(checks)
    report.rows = [{"check": c.name, "topic": c.topic, "value": c.value, "threshold": c.threshold,
                    "passed": c.passed} for c in report.checks]
    report.refinement = [{"check": c.name, "value": c.value} for c in report.checks
                         if "K=" in c.name or "factor" in c.name or "drift" in c.name]
    return report


def run_identity_suite(cfg: ExperimentConfig | None = None) -> ExperimentReport:
    cfg = cfg or ExperimentConfig(kind=ExperimentKind.IDENTITY_SUITE)
    return _battery_report(ExperimentKind.IDENTITY_SUITE, cfg,
                           [batteries.identity_battery, batteries.evolution_battery,
                            batteries.smoothing_battery, batteries.fractional_battery])


def run_assumption_audit(cfg: ExperimentConfig | None = None) -> ExperimentReport:
    """Fixed audit batteries plus ``check_assumptions`` along the configured model's weak trajectory."""
    cfg = cfg or ExperimentConfig(kind=ExperimentKind.ASSUMPTION_AUDIT)
    report = _battery_report(ExperimentKind.ASSUMPTION_AUDIT, cfg, [batteries.audit_battery])
    start = time.perf_counter()
    report.checks.extend(_configured_audit(cfg))
    report.runtimes["configured_model"] = time.perf_counter() - start
    report.rows = [{"check": c.name, "topic": c.topic, "value": c.value, "threshold": c.threshold,
                    "passed": c.passed} for c in report.checks]
    return report


def _configured_audit(cfg: ExperimentConfig) -> list:
    from ..assumptions import check_assumptions
    cfg.validate()
    model = cfg.build_model()
    grid = cfg.build_grid()
    K = min(cfg.mesh.K, 256)
    small = replace(cfg, mesh=replace(cfg.mesh, K=K), levels=1)
    u0 = small.initial_state(grid)
    if small.noise.M:
        path = sample_path(cfg.seeds[0], small.build_mesh(), model.n_modes)
    else:
        path = _silent_path(small, K, cfg.seeds[0])
    traj = solve_weak_galerkin(model, u0, path, grid, cfg.solver)
    sub = np.arange(0, K + 1, max(1, K // 8))
    rep = check_assumptions(model, [traj.states[i] for i in sub], grid, times=path.mesh.nodes,
                            path_states=traj.states)
    label = f"{model.name} along seed {cfg.seeds[0]} trajectory"
    checks = [Check(f"{label}: kappa_est", rep.kappa_est, "> 0", rep.kappa_est > 0, "coercivity"),
              Check(f"{label}: continuity M", rep.continuity_M, "finite", math.isfinite(rep.continuity_M),
                    "continuity"),
              Check(f"{label}: resolvent constant", rep.resolvent_M, "finite", math.isfinite(rep.resolvent_M),
                    "resolvent"),
              Check(f"{label}: Lipschitz quotient", rep.lipschitz_L, "finite", math.isfinite(rep.lipschitz_L),
                    "lipschitz")]
    nu, delta = rep.hoelder_delta
    if not math.isnan(delta):
        checks.append(Check(f"{label}: Hoelder nu + delta", nu + delta, "> 1", nu + delta > 1, "hoelder"))
    checks.append(Check(f"{label}: minimum state", rep.details["min_state"], "reported", True, "positivity"))
    return checks


def run_oracle_sanity(cfg: ExperimentConfig | None = None) -> ExperimentReport:
    cfg = cfg or ExperimentConfig(kind=ExperimentKind.ORACLE_SANITY)
    seed = cfg.noise.seed0
    return _battery_report(ExperimentKind.ORACLE_SANITY, cfg,
                           [lambda: batteries.noise_battery(seed=seed, T=cfg.mesh.T)])


RUNNERS = {
    ExperimentKind.EQUIVALENCE: run_equivalence,
    ExperimentKind.CONVERGENCE: run_convergence,
    ExperimentKind.IDENTITY_SUITE: lambda cfg, workers=None: run_identity_suite(cfg),
    ExperimentKind.ASSUMPTION_AUDIT: lambda cfg, workers=None: run_assumption_audit(cfg),
    ExperimentKind.ORACLE_SANITY: lambda cfg, workers=None: run_oracle_sanity(cfg),
}


def run_experiment(cfg: ExperimentConfig, workers: int | None = None) -> ExperimentReport:
    return RUNNERS[cfg.kind](cfg, workers=workers)
