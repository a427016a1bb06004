"""Configurable synthetic experiments: recovery sweeps, solver races, step sweeps, bound audits.

An experiment is described by a JSON document (see :data:`CONFIG_SCHEMA`)
and is a deterministic function of it: all randomness flows from the
instance seeds and wall-clock columns are written as ``nan`` unless
``"timing": true``. Tables are written with ``repr`` floats so reruns are
byte-identical.
"""

from __future__ import annotations

import hashlib
import json
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np

from .datagen import GeneratedInstance, InstanceSpec, generate_instance
from .linalg import spectral_norm
from .model import MultiLayerModel, default_radius, fixed_point_residual, objective, recovery_error, theorem_constants
from .solvers import SOLVERS, SolverParams, admm, default_layer_steps, fista, ml_fista, ml_ista_canonical, run_solver
from .svg import plot_csv

KINDS = ("lambda-sweep", "solver-race", "mu-sweep", "bound-audit")

DEFAULT_LAMBDA2_GRID = {"logspace": [-3, 0, 20]}
DEFAULT_LAMBDA1_GRID = [0.0, {"logspace": [-4, -1, 10]}]
DEFAULT_MU_GRID = {"logspace": [0, -2.5, 6]}
DEFAULT_EPS_GRID = [1e-2, 1e-4, 1e-6, 1e-8]
DEFAULT_RACE_SOLVERS = ["admm_ista", "admm_fista", "s_fista", "ml_ista", "ml_fista"]

# keys accepted at the top level of a config file, with a one-line description
CONFIG_SCHEMA = {
    "kind": "one of lambda-sweep | solver-race | mu-sweep | bound-audit (required)",
    "name": "label used in file names (default: the kind)",
    "instance": "InstanceSpec fields: n, m1, m2, s1, s2, snr, snr_db, seed",
    "instance_path": "directory written by `mlbp gen`; alternative to 'instance', single trial only",
    "trials": "number of instances; trial i uses seed 'instance.seed + i' (default 1)",
    "lambdas": "[lambda1, lambda2] for solver-race, mu-sweep and bound-audit",
    "lambda2_grid": "grid for lambda-sweep (default 20 log-spaced points in [1e-3, 1])",
    "lambda1_grid": "grid for lambda-sweep (default 0 plus 10 log-spaced points in [1e-4, 1e-1])",
    "mu_grid": "step grid as multiples of 0.99/||D1'D1|| (default 6 log-spaced points in [10^-2.5, 1])",
    "eps_grid": "fixed-point accuracies for bound-audit (default [1e-2, 1e-4, 1e-6, 1e-8])",
    "t_factor": "t = t_factor * 4 mu / (3 ||D2||), in (0, 1) (default 0.99)",
    "solvers": "solver names for solver-race",
    "params": "SolverParams overrides shared by all solvers of a race",
    "max_iter": "iteration budget per solver run",
    "tol": "stopping residual per solver run",
    "reference": "{max_iter, tol, rho} for the ADMM reference (default 50000, 1e-10, 1)",
    "radius": "bound-audit norm bound R: 'auto' or null (twice the norm of the unconstrained reference) or a number",
    "nonnegative": "constrain codes to be nonnegative (default false)",
    "warm_start": "lambda-sweep: warm-start each lambda1 from the previous one (default true)",
    "timing": "record wall-clock time in trace tables; breaks byte-identical reruns (default false)",
    "output_dir": "default output directory when the CLI gets no --out",
}

ALL_KEYS = tuple(CONFIG_SCHEMA)


class ConfigError(ValueError):
    """An experiment configuration is malformed or violates a precondition."""


class ReferenceNotConverged(RuntimeError):
    """The ADMM reference did not reach its residual target."""


def expand_grid(spec, name="grid") -> tuple:
    """Turn a grid description into a tuple of floats.

    A grid is a number, a list of numbers, ``{"logspace": [a, b, n]}`` (the
    points ``10**linspace(a, b, n)``), or a list mixing both; list entries are
    concatenated in order.
    """
    if isinstance(spec, (int, float)) and not isinstance(spec, bool):
        return (float(spec),)
    if isinstance(spec, dict):
        if set(spec) != {"logspace"} or len(spec["logspace"]) != 3:
            raise ConfigError(f"{name}: expected {{'logspace': [start, stop, num]}}")
        a, b, n = spec["logspace"]
        if int(n) != n or n < 1:
            raise ConfigError(f"{name}: logspace count must be a positive integer")
        return tuple(float(v) for v in np.logspace(float(a), float(b), int(n)))
    if isinstance(spec, list):
        out = []
        for item in spec:
            out.extend(expand_grid(item, name))
        if not out:
            raise ConfigError(f"{name} is empty")
        return tuple(out)
    raise ConfigError(f"{name}: cannot read {spec!r}")


@dataclass
class ExperimentConfig:
    kind: str
    name: str = ""
    instance: InstanceSpec = field(default_factory=InstanceSpec)
    instance_path: str | None = None
    trials: int = 1
    lambdas: tuple = (0.02, 0.05)
    lambda2_grid: tuple = ()
    lambda1_grid: tuple = ()
    mu_grid: tuple = ()
    eps_grid: tuple = ()
    t_factor: float = 0.99
    solvers: tuple = tuple(DEFAULT_RACE_SOLVERS)
    params: dict = field(default_factory=dict)
    max_iter: int | None = None
    tol: float | None = None
    reference: dict = field(default_factory=dict)
    radius: object = None
    nonnegative: bool = False
    warm_start: bool = True
    timing: bool = False
    output_dir: str | None = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ConfigError(f"kind must be one of {', '.join(KINDS)}, got {self.kind!r}")
        self.name = self.name or self.kind
        if int(self.trials) != self.trials or self.trials < 1:
            raise ConfigError("trials must be an integer >= 1")
        self.trials = int(self.trials)
        if self.instance_path is not None and self.trials != 1:
            raise ConfigError("instance_path gives a single instance; set trials to 1")
        if len(self.lambdas) != 2 or any(not (isinstance(v, (int, float)) and v >= 0) for v in self.lambdas):
            raise ConfigError("lambdas must be two nonnegative numbers")
        self.lambdas = tuple(float(v) for v in self.lambdas)
        if not 0 < self.t_factor < 1:
            raise ConfigError("t_factor must lie in (0, 1)")
        for g in ("lambda2_grid", "lambda1_grid", "mu_grid", "eps_grid"):
            vals = getattr(self, g)
            if any(not (math.isfinite(v) and v >= 0) for v in vals):
                raise ConfigError(f"{g} entries must be finite and nonnegative")
        if any(v <= 0 for v in self.mu_grid + self.eps_grid):
            raise ConfigError("mu_grid and eps_grid entries must be positive")
        if any(m * 0.99 >= 1 for m in self.mu_grid):
            raise ConfigError("mu_grid multiples must keep mu below 1/||D1'D1|| (need factor < 1/0.99)")
        if self.max_iter is not None and (int(self.max_iter) != self.max_iter or self.max_iter < 1):
            raise ConfigError("max_iter must be a positive integer")
        if self.tol is not None and not self.tol >= 0:
            raise ConfigError("tol must be nonnegative")
        unknown = set(self.params) - {f.name for f in fields(SolverParams)}
        if unknown:
            raise ConfigError(f"unknown solver params: {sorted(unknown)}")
        bad_ref = set(self.reference) - {"max_iter", "tol", "rho"}
        if bad_ref:
            raise ConfigError(f"unknown reference keys: {sorted(bad_ref)}")
        if not (self.radius is None or self.radius == "auto"
                or (isinstance(self.radius, (int, float)) and self.radius > 0)):
            raise ConfigError("radius must be null, 'auto' or a positive number")
        for s in self.solvers:
            if s not in SOLVERS:
                raise ConfigError(f"unknown solver {s!r}")
        try:
            self.solver_params()
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc

    # -- construction --------------------------------------------------

    @classmethod
    def from_dict(cls, doc: dict, base_dir=None) -> "ExperimentConfig":
        if not isinstance(doc, dict):
            raise ConfigError("config must be a JSON object")
        unknown = set(doc) - set(ALL_KEYS)
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        if "kind" not in doc:
            raise ConfigError("config needs a 'kind'")
        if "instance" in doc and "instance_path" in doc:
            raise ConfigError("give either 'instance' or 'instance_path', not both")
        kw = dict(doc)
        kind = kw["kind"]
        try:
            if "instance" in kw:
                kw["instance"] = InstanceSpec.from_dict(kw["instance"])
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"instance: {exc}") from exc
        if kw.get("instance_path") is not None and base_dir is not None:
            kw["instance_path"] = str(Path(base_dir) / kw["instance_path"])
        defaults = {
            "lambda2_grid": DEFAULT_LAMBDA2_GRID if kind == "lambda-sweep" else None,
            "lambda1_grid": DEFAULT_LAMBDA1_GRID if kind == "lambda-sweep" else None,
            "mu_grid": DEFAULT_MU_GRID if kind in ("mu-sweep", "bound-audit") else None,
            "eps_grid": DEFAULT_EPS_GRID if kind == "bound-audit" else None,
        }
        for g, default in defaults.items():
            spec = kw.get(g, default)
            kw[g] = () if spec is None else expand_grid(spec, g)
        for key in ("lambdas", "solvers"):
            if key in kw:
                if not isinstance(kw[key], list):
                    raise ConfigError(f"{key} must be a list")
                kw[key] = tuple(kw[key])
        for key in ("params", "reference"):
            if key in kw and not isinstance(kw[key], dict):
                raise ConfigError(f"{key} must be an object")
        try:
            return cls(**kw)
        except TypeError as exc:
            raise ConfigError(str(exc)) from exc

    @classmethod
    def from_file(cls, path) -> "ExperimentConfig":
        path = Path(path)
        try:
            doc = json.loads(path.read_text())
        except OSError as exc:
            raise ConfigError(f"cannot read {path}: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path} is not valid JSON: {exc}") from exc
        return cls.from_dict(doc, base_dir=path.parent)

    def solver_params(self, **over) -> SolverParams:
        kw = dict(self.params)
        if self.max_iter is not None:
            kw["max_iter"] = int(self.max_iter)
        if self.tol is not None:
            kw["stop_residual"] = float(self.tol)
        kw.update(over)
        return SolverParams(**kw)

    def instances(self) -> list:
        if self.instance_path is not None:
            return [GeneratedInstance.load(self.instance_path)]
        return [generate_instance(self.instance.with_seed(self.instance.seed + i)) for i in range(self.trials)]

    def ref_settings(self) -> tuple:
        r = self.reference
        return int(r.get("max_iter", 50_000)), float(r.get("tol", 1e-10)), float(r.get("rho", 1.0))


# -- shared plumbing ----------------------------------------------------


def n_workers() -> int:
    """Worker processes allowed by ``MLBP_THREADS`` (default 1)."""
    raw = os.environ.get("MLBP_THREADS", "1")
    try:
        n = int(raw)
    except ValueError:
        raise ConfigError(f"MLBP_THREADS must be an integer, got {raw!r}") from None
    return max(1, n)


def parallel_map(fn, items) -> list:
    """``[fn(x) for x in items]``, spread over ``MLBP_THREADS`` processes; order is kept."""
    items = list(items)
    workers = min(n_workers(), len(items))
    if workers <= 1:
        return [fn(x) for x in items]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "1" if v else "0"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, str):
        return v
    return repr(float(v))


def write_table(path, header, rows) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    lines = [",".join(header)] + [",".join(_fmt(v) for v in row) for row in rows]
    path.write_text("\n".join(lines) + "\n")
    return path


def reference_solution(model, y, settings):
    """High-accuracy ADMM solution; raises if it misses its residual target."""
    K, tol, rho = settings
    tr = admm(model, y, rho=rho, K=K, stop=tol)
    if tr.stop_reason != "residual":
        raise ReferenceNotConverged(
            f"ADMM reference stopped after {tr.iterations} iterations at residual "
            f"{tr.final_residual:.3e} > {tol:.1e}; raise reference.max_iter"
        )
    return tr


def param_hash(*parts) -> str:
    blob = json.dumps(parts, sort_keys=True, default=str).encode()
    return hashlib.sha1(blob).hexdigest()[:8]


def step_pair(model, factor, t_factor) -> tuple:
    """``mu = factor * 0.99 / ||D1'D1||`` and ``t = t_factor * 4 mu / (3 ||D2||)``."""
    mu = factor * 0.99 / spectral_norm(model.dictionaries[0]) ** 2
    t = t_factor * 4.0 * mu / (3.0 * spectral_norm(model.dictionaries[1]))
    return mu, t


@dataclass
class ExperimentResult:
    kind: str
    tables: list
    figures: list
    passed: bool = True
    summary: dict = field(default_factory=dict)


# -- recovery versus lambda ----------------------------------------------


def _sweep_cell(args):
    inst, lam2_grid, lam1_grid, K, tol, nonneg, warm = args
    A = inst.D1 @ inst.D2
    err2 = np.empty((len(lam2_grid), len(lam1_grid)))
    err1 = np.empty_like(err2)
    for i, lam2 in enumerate(lam2_grid):
        start = None
        for j, lam1 in enumerate(lam1_grid):
            if lam1 == 0:
                g = fista(A, inst.y, lam2, K=K, stop=tol, nonnegative=nonneg).gamma
            else:
                model = MultiLayerModel((inst.D1, inst.D2), (lam1, lam2), nonnegative_mode=nonneg)
                g = ml_fista(model, inst.y, default_layer_steps(model), K=K, stop=tol,
                             x0=start if warm else None).gamma
                start = g
            err2[i, j] = recovery_error(g, inst.gamma2)
            err1[i, j] = recovery_error(inst.D2 @ g, inst.gamma1)
    return err2, err1


def run_lambda_sweep(config: ExperimentConfig, out_dir, instances=None) -> ExperimentResult:
    """Median recovery error of plain BP and of multi-layer BP along a lambda2 grid.

    Plain BP (``lambda1 = 0``) uses FISTA on ``D1 D2``; every positive
    ``lambda1`` uses ML-FISTA. For each lambda2 and each layer the multi-layer
    curve takes the positive ``lambda1`` with the smallest median error; with
    no positive ``lambda1`` on the grid it coincides with the BP curve.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    instances = config.instances() if instances is None else instances
    lam2, lam1 = config.lambda2_grid, config.lambda1_grid
    K = int(config.max_iter or 5000)
    tol = 1e-7 if config.tol is None else float(config.tol)
    cells = parallel_map(_sweep_cell, [(inst, lam2, lam1, K, tol, config.nonnegative, config.warm_start)
                                       for inst in instances])
    E2 = np.median(np.stack([c[0] for c in cells]), axis=0)
    E1 = np.median(np.stack([c[1] for c in cells]), axis=0)
    lam1_arr = np.asarray(lam1)
    zero = np.flatnonzero(lam1_arr == 0)
    pos = np.flatnonzero(lam1_arr > 0)

    grid_rows = [(l2, l1, E2[i, j], E1[i, j]) for i, l2 in enumerate(lam2) for j, l1 in enumerate(lam1)]
    grid_path = write_table(out / f"{config.name}_grid.csv",
                            ("lambda2", "lambda1", "median_err_gamma2", "median_err_gamma1"), grid_rows)

    rows = []
    for i, l2 in enumerate(lam2):
        if zero.size:
            bp2, bp1 = E2[i, zero[0]], E1[i, zero[0]]
        else:
            bp2 = bp1 = math.nan
        if pos.size:
            j2 = pos[np.argmin(E2[i, pos])]
            j1 = pos[np.argmin(E1[i, pos])]
            ml2, ml1, b2, b1 = E2[i, j2], E1[i, j1], lam1[j2], lam1[j1]
        else:
            ml2, ml1, b2, b1 = bp2, bp1, 0.0, 0.0
        rows.append((l2, bp2, ml2, b2, bp1, ml1, b1))
    header = ("lambda2", "bp_gamma2", "mlbp_gamma2", "best_lambda1_gamma2",
              "bp_gamma1", "mlbp_gamma1", "best_lambda1_gamma1")
    table = write_table(out / f"{config.name}.csv", header, rows)
    figs = [
        plot_csv(table, out / f"{config.name}_gamma2.svg", x="lambda2", y=["bp_gamma2", "mlbp_gamma2"],
                 logx=True, logy=False, title="recovery error, deepest layer", ylabel="median relative error"),
        plot_csv(table, out / f"{config.name}_gamma1.svg", x="lambda2", y=["bp_gamma1", "mlbp_gamma1"],
                 logx=True, logy=False, title="recovery error, first layer", ylabel="median relative error"),
    ]
    return ExperimentResult(config.kind, [table, grid_path], figs,
                            summary={"rows": rows, "median_err_gamma2": E2, "median_err_gamma1": E1})


# -- solver race ---------------------------------------------------------


def run_solver_race(config: ExperimentConfig, out_dir, instances=None) -> ExperimentResult:
    """Objective gap and distance to an ADMM reference per iteration for several solvers."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    inst = (config.instances() if instances is None else instances)[0]
    model = inst.model(config.lambdas, nonnegative_mode=config.nonnegative)
    ref = reference_solution(model, inst.y, config.ref_settings())
    F_opt = ref.final_objective
    params = config.solver_params()
    inst_id = f"seed{inst.spec.seed}"

    traces = parallel_map(_RaceCell(model, inst.y, params, ref.gamma), config.solvers)
    curves, summary, tables = [], [], []
    for name, tr in zip(config.solvers, traces):
        h = param_hash(name, asdict(params), config.lambdas)
        tables.append(tr.to_csv(out / f"{name}_{inst_id}_{h}.csv", timing=config.timing))
        t = tr.time_s if config.timing else np.full(len(tr), math.nan)
        for i in range(len(tr)):
            curves.append((name, tr.k[i], t[i], tr.objective[i] - F_opt, tr.dist_ref[i]))
        summary.append((name, tr.iterations, tr.stop_reason, tr.final_objective, tr.final_objective - F_opt,
                        tr.dist_ref[-1]))
    xcol = "time_s" if config.timing else "k"
    curve_path = write_table(out / f"{config.name}_curves.csv", ("series", "k", "time_s", "gap", "dist_ref"),
                             curves)
    sum_path = write_table(out / f"{config.name}_summary.csv",
                           ("solver", "iterations", "stop_reason", "final_objective", "final_gap", "final_dist_ref"),
                           summary)
    figs = [
        plot_csv(curve_path, out / f"{config.name}_gap.svg", x=xcol, y=["gap"], logx=False, logy=True,
                 title="F(k) - F_opt", ylabel="objective gap"),
        plot_csv(curve_path, out / f"{config.name}_dist.svg", x=xcol, y=["dist_ref"], logx=False, logy=True,
                 title="distance to reference", ylabel="||g - g_ref||"),
    ]
    return ExperimentResult(config.kind, [curve_path, sum_path] + tables, figs,
                            summary={"F_opt": F_opt, "traces": dict(zip(config.solvers, traces)), "reference": ref})


@dataclass
class _RaceCell:
    model: MultiLayerModel
    y: np.ndarray
    params: SolverParams
    reference: np.ndarray

    def __call__(self, name):
        return run_solver(name, self.model, self.y, self.params, reference=self.reference)


# -- limiting gap versus mu ----------------------------------------------


def _mu_cell(args):
    inst, lambdas, nonneg, factors, t_factor, K, tol, ref_settings = args
    model = inst.model(lambdas, nonnegative_mode=nonneg)
    F_opt = reference_solution(model, inst.y, ref_settings).final_objective
    rows = []
    for f in factors:
        mu, t = step_pair(model, f, t_factor)
        a = ml_ista_canonical(model, inst.y, mu, t, K=K, stop=tol)
        b = ml_fista(model, inst.y, (mu, t / mu), K=K, stop=tol)
        rows.append((mu, t, a.final_objective - F_opt, b.final_objective - F_opt, a.iterations, b.iterations,
                     a.stop_reason == "residual" and b.stop_reason == "residual"))
    return rows


def run_mu_sweep(config: ExperimentConfig, out_dir, instances=None) -> ExperimentResult:
    """Limiting objective gap of ML-ISTA and ML-FISTA for each step on a grid.

    Each run goes until the fixed-point residual is below `tol` (default
    1e-9) or `max_iter` (default 10^6) is spent; gaps and iteration counts
    are medians over trials.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    instances = config.instances() if instances is None else instances
    K = int(config.max_iter or 1_000_000)
    tol = 1e-9 if config.tol is None else float(config.tol)
    cells = parallel_map(_mu_cell, [(inst, config.lambdas, config.nonnegative, config.mu_grid, config.t_factor, K,
                                     tol, config.ref_settings()) for inst in instances])
    arr = np.array([[r[:6] for r in c] for c in cells], dtype=float)
    med = np.median(arr, axis=0)
    converged = [all(c[i][6] for c in cells) for i in range(len(config.mu_grid))]
    rows = [(f, *med[i, :4], int(round(med[i, 4])), int(round(med[i, 5])), converged[i])
            for i, f in enumerate(config.mu_grid)]
    header = ("mu_factor", "mu", "t", "gap_ml_ista", "gap_ml_fista", "iters_ml_ista", "iters_ml_fista", "converged")
    table = write_table(out / f"{config.name}.csv", header, rows)
    fig = plot_csv(table, out / f"{config.name}.svg", x="mu", y=["gap_ml_ista", "gap_ml_fista"], logx=True,
                   logy=True, title="limiting objective gap", ylabel="F_inf - F_opt")
    return ExperimentResult(config.kind, [table], [fig], summary={"rows": rows})


# -- theorem bound audit ---------------------------------------------------


AUDIT_TOLERANCE = 1e-6


def _audit_cell(args):
    trial, inst, lambdas, nonneg, radius, factors, eps_grid, t_factor, K, ref_settings = args
    base = inst.model(lambdas, nonnegative_mode=nonneg)
    if radius == "auto" or radius is None:
        R = default_radius(reference_solution(base, inst.y, ref_settings).gamma)
    else:
        R = float(radius)
    model = base.replace(radius=R)
    F_opt = reference_solution(model, inst.y, ref_settings).final_objective
    consts = theorem_constants(model, inst.y, R)
    rows = []
    for f in factors:
        mu, t = step_pair(model, f, t_factor)
        mu_lim, t_lim = consts.step_limits()
        if not (0 < mu < mu_lim and 0 < t < t_lim * mu):
            raise ConfigError(f"mu={mu:.3e}, t={t:.3e} outside the admissible ranges")
        for eps in eps_grid:
            tr = ml_ista_canonical(model, inst.y, mu, t, K=K, stop=eps)
            reached = tr.stop_reason == "residual"
            # the final iterate is the prox step taken from an eps-fixed point
            res, alpha = fixed_point_residual(model, inst.y, mu, t, tr.previous)
            gap = objective(model, inst.y, alpha) - F_opt
            bound = consts.bound(eps, mu, t)
            slack = bound - gap
            rows.append((trial, inst.spec.seed, R, f, mu, t, eps, tr.iterations, res, gap, bound, slack,
                         reached and slack >= -AUDIT_TOLERANCE))
    return rows


def run_bound_audit(config: ExperimentConfig, out_dir=None, instances=None) -> ExperimentResult:
    """Check ``F(alpha) - F_opt <= eta eps + (beta + kappa t) mu`` on a (mu, eps) grid.

    For every instance, step and accuracy, ML-ISTA runs on the norm-bounded
    problem until its fixed-point residual is at most ``eps``; its last
    iterate is ``alpha``. ``F_opt`` comes from ADMM on the same bounded
    problem. A grid point passes when the residual target was met and the
    slack ``bound - gap`` is at least ``-1e-6``.
    """
    instances = config.instances() if instances is None else instances
    radius = "auto" if config.radius is None else config.radius
    K = int(config.max_iter or 2_000_000)
    cells = parallel_map(_audit_cell, [(i, inst, config.lambdas, config.nonnegative, radius, config.mu_grid,
                                        config.eps_grid, config.t_factor, K, config.ref_settings())
                                       for i, inst in enumerate(instances)])
    rows = [r for c in cells for r in c]
    passed = all(r[-1] for r in rows)
    header = ("trial", "seed", "R", "mu_factor", "mu", "t", "eps", "iterations", "residual", "gap", "bound",
              "slack", "pass")
    tables = []
    if out_dir is not None:
        tables.append(write_table(Path(out_dir) / f"{config.name}.csv", header, rows))
    return ExperimentResult(config.kind, tables, [], passed=passed,
                            summary={"rows": rows, "header": header,
                                     "min_slack": min(r[11] for r in rows)})


RUNNERS = {
    "lambda-sweep": run_lambda_sweep,
    "solver-race": run_solver_race,
    "mu-sweep": run_mu_sweep,
    "bound-audit": run_bound_audit,
}


def run_experiment(config: ExperimentConfig, out_dir) -> ExperimentResult:
    return RUNNERS[config.kind](config, out_dir)


__all__ = [
    "CONFIG_SCHEMA",
    "ConfigError",
    "ExperimentConfig",
    "ExperimentResult",
    "ReferenceNotConverged",
    "expand_grid",
    "parallel_map",
    "run_bound_audit",
    "run_experiment",
    "run_lambda_sweep",
    "run_mu_sweep",
    "run_solver_race",
    "step_pair",
    "write_table",
]
