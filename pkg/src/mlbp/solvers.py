"""Iterative solvers for (multi-layer) basis pursuit.

Every solver returns a :class:`Trace`, which records one row per iteration
(objective, elapsed time, fixed-point residual, distance to a reference) and
keeps the final estimates of all layers.

Residual conventions
--------------------
For proximal-gradient type methods the residual recorded at iteration ``k``
is ``||x^k - base^{k-1}|| / step``, with ``base`` the point the step was
taken from (the previous iterate, or the extrapolated point for accelerated
variants). For ML-ISTA this is the eps of an eps-fixed point evaluated at
``gamma_2^{k-1}``. Row ``k = 0`` describes the starting point and carries a
NaN residual.
"""

from __future__ import annotations

import csv
import io
import math
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .linalg import DimensionError, as_matrix, as_vector, spectral_norm
from .model import MultiLayerModel, QuadraticData, objective
from .prox import (
    ProxSpec,
    moreau_envelope_l1,
    nonneg_soft_threshold,
    soft_threshold,
)

CSV_HEADER = ("k", "objective", "time_s", "residual", "dist_ref")


@dataclass
class SolverParams:
    """Tuning knobs shared by the solver front end.

    ``None`` step sizes are replaced by :func:`default_steps`.
    """

    mu_per_layer: tuple | None = None
    mu: float | None = None
    t: float | None = None
    step: float | None = None
    max_iter: int = 1000
    stop_residual: float = 0.0
    admm_rho: float = 1.0
    admm_inner: str = "fista"
    admm_inner_iter: int = 50
    sfista_smoothing: float = 1e-4
    warm_start: bool = True

    def __post_init__(self):
        if self.max_iter < 1:
            raise ValueError("max_iter must be at least 1")
        for name in ("mu", "t", "step"):
            v = getattr(self, name)
            if v is not None and not v > 0:
                raise ValueError(f"{name} must be positive")
        if self.mu_per_layer is not None:
            self.mu_per_layer = tuple(float(m) for m in self.mu_per_layer)
            if any(not m > 0 for m in self.mu_per_layer):
                raise ValueError("mu_per_layer entries must be positive")
        if not self.admm_rho > 0:
            raise ValueError("admm_rho must be positive")
        if self.admm_inner not in ("ista", "fista"):
            raise ValueError("admm_inner must be 'ista' or 'fista'")
        if not self.sfista_smoothing > 0:
            raise ValueError("sfista_smoothing must be positive")


@dataclass
class Trace:
    """Per-iteration history and final estimates of a solver run."""

    solver: str
    k: np.ndarray
    objective: np.ndarray
    time_s: np.ndarray
    residual: np.ndarray
    dist_ref: np.ndarray
    layers: list
    previous: np.ndarray | None = None
    stop_reason: str = "max_iter"
    warnings: list = field(default_factory=list)

    @property
    def gamma(self) -> np.ndarray:
        """Final deepest representation."""
        return self.layers[-1]

    @property
    def iterations(self) -> int:
        return int(self.k[-1])

    @property
    def final_objective(self) -> float:
        return float(self.objective[-1])

    @property
    def final_residual(self) -> float:
        return float(self.residual[-1])

    def __len__(self):
        return len(self.k)

    def csv_text(self, timing: bool = True) -> str:
        """CSV rendering with header ``k,objective,time_s,residual,dist_ref``.

        With ``timing=False`` the time column is written as ``nan`` so that
        the output is a deterministic function of the inputs.
        """
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(CSV_HEADER)
        for i in range(len(self.k)):
            w.writerow(
                (
                    int(self.k[i]),
                    repr(float(self.objective[i])),
                    repr(float(self.time_s[i])) if timing else "nan",
                    repr(float(self.residual[i])),
                    repr(float(self.dist_ref[i])),
                )
            )
        return buf.getvalue()

    def to_csv(self, path, timing: bool = True) -> Path:
        path = Path(path)
        path.write_text(self.csv_text(timing))
        return path

    @classmethod
    def read_csv(cls, path, solver="") -> "Trace":
        """Rebuild the history columns of a trace; layer estimates are not stored."""
        with open(path, newline="") as fh:
            rows = list(csv.DictReader(fh))
        col = lambda name: np.array([float(r[name]) for r in rows])
        return cls(solver, col("k").astype(int), col("objective"), col("time_s"),
                   col("residual"), col("dist_ref"), layers=[])


class _Recorder:
    """Accumulates trace columns; the clock starts at construction."""

    def __init__(self, name, reference=None):
        self.name = name
        self.t0 = time.perf_counter()
        self.reference = None if reference is None else np.asarray(reference, dtype=np.float64)
        self.rows = ([], [], [], [], [])

    def add(self, k, obj, residual, gamma):
        ks, objs, ts, res, dist = self.rows
        ks.append(k)
        objs.append(obj)
        ts.append(time.perf_counter() - self.t0)
        res.append(residual)
        if self.reference is None:
            dist.append(math.nan)
        else:
            dist.append(float(np.linalg.norm(gamma - self.reference)))

    def finish(self, layers, previous=None, stop_reason="max_iter", warnings=None):
        ks, objs, ts, res, dist = self.rows
        return Trace(
            self.name,
            np.asarray(ks, dtype=int),
            np.asarray(objs),
            np.asarray(ts),
            np.asarray(res),
            np.asarray(dist),
            layers=[np.array(g) for g in layers],
            previous=None if previous is None else np.array(previous),
            stop_reason=stop_reason,
            warnings=list(warnings or []),
        )


def _next_momentum(tk):
    return (1.0 + math.sqrt(1.0 + 4.0 * tk * tk)) / 2.0


def _shrinker(nonnegative):
    return nonneg_soft_threshold if nonnegative else soft_threshold


def _check_signal(model, y):
    y = as_vector(y)
    if y.shape[0] != model.signal_dim:
        raise DimensionError(f"signal has dim {y.shape[0]}, model expects {model.signal_dim}")
    return y


def _check_code_start(model, x0):
    x0 = as_vector(x0).copy()
    if x0.shape[0] != model.code_dim:
        raise DimensionError(f"start point has dim {x0.shape[0]}, model expects {model.code_dim}")
    return x0


def _require_two_layers(model, name):
    if model.n_layers != 2:
        raise NotImplementedError(f"{name} is defined for two-layer models, got L={model.n_layers}")


def default_steps(model: MultiLayerModel) -> tuple[float, float]:
    """Default ``(mu, t)`` for the two-layer gradient-mapping solvers.

    ``mu = 0.99 / ||D1' D1||`` and ``t = 0.99 * 4 mu / (3 ||D2||)``, just inside
    the ranges for which the fixed-point suboptimality bound holds.
    """
    mu = 0.99 / spectral_norm(model.dictionaries[0]) ** 2
    if model.n_layers < 2:
        return mu, mu
    t = 0.99 * 4.0 * mu / (3.0 * spectral_norm(model.dictionaries[1]))
    return mu, t


def default_layer_steps(model: MultiLayerModel) -> tuple:
    """Per-layer steps for the layered solvers.

    For two layers these map onto :func:`default_steps` via ``mu_2 = t / mu_1``.
    """
    mus = [0.99 / spectral_norm(model.dictionaries[0]) ** 2]
    for D in model.dictionaries[1:]:
        mus.append(0.99 * 4.0 / (3.0 * spectral_norm(D)))
    return tuple(mus)


def layer_thresholds(lambdas: Sequence[float], mus: Sequence[float]) -> tuple:
    """Shrinkage levels used by the layered solvers.

    Layer ``i`` takes a prox step of effective size ``mu_1 ... mu_i`` on the
    problem weight ``lam_i``, so its threshold is ``lam_i * mu_1 ... mu_i``.
    For two layers this is ``(mu lam_1, t lam_2)`` with ``t = mu_1 mu_2``.
    """
    out, scale = [], 1.0
    for lam, mu in zip(lambdas, mus):
        scale *= mu
        out.append(lam * scale)
    return tuple(out)


# -- single layer ----------------------------------------------------------


def _bp_objective(D, y, lam):
    def F(g):
        r = y - D @ g
        return 0.5 * float(r @ r) + lam * float(np.abs(g).sum())

    return F


def _proximal_gradient(name, D, y, lam, step, K, stop, accelerate, prox, x0, reference):
    D = as_matrix(D)
    y = as_vector(y)
    if D.shape[0] != y.shape[0]:
        raise DimensionError(f"D has {D.shape[0]} rows but y has dim {y.shape[0]}")
    if step is None:
        step = 1.0 / spectral_norm(D) ** 2
    if not step > 0:
        raise ValueError("step must be positive")
    rec = _Recorder(name, reference)
    F = _bp_objective(D, y, lam)
    x = np.zeros(D.shape[1]) if x0 is None else as_vector(x0).copy()
    DtD = D.T @ D
    Dty = y @ D
    z, tk = x, 1.0
    rec.add(0, F(x), math.nan, x)
    reason = "max_iter"
    prev = x
    for k in range(1, K + 1):
        x_new = prox(z - step * (DtD @ z - Dty), step)
        res = float(np.linalg.norm(x_new - z)) / step
        if accelerate:
            tn = _next_momentum(tk)
            z = x_new + ((tk - 1.0) / tn) * (x_new - x)
            tk = tn
        else:
            z = x_new
        prev, x = x, x_new
        rec.add(k, F(x), res, x)
        if res <= stop:
            reason = "residual"
            break
    return rec.finish([x], prev, reason)


def ista(D, y, lam, step=None, K=1000, stop=0.0, *, nonnegative=False, radius=math.inf,
         x0=None, reference=None) -> Trace:
    """ISTA for ``1/2 ||y - D g||^2 + lam ||g||_1`` starting from zero.

    `step` defaults to ``1 / ||D' D||``.
    """
    spec = ProxSpec(lam, nonnegative, radius)
    return _proximal_gradient("ista", D, y, lam, step, K, stop, False, spec.prox, x0, reference)


def fista(D, y, lam, step=None, K=1000, stop=0.0, *, nonnegative=False, radius=math.inf,
          x0=None, reference=None) -> Trace:
    """FISTA (constant step, ``t_1 = 1``) for the same problem as :func:`ista`."""
    spec = ProxSpec(lam, nonnegative, radius)
    return _proximal_gradient("fista", D, y, lam, step, K, stop, True, spec.prox, x0, reference)


# -- two-layer canonical form ---------------------------------------------


def _fast_objective(model, y):
    """Objective closure reusing the cached dictionary products."""
    if math.isfinite(model.radius) or model.nonnegative_mode:
        return lambda g: objective(model, y, g)
    Dg = model.global_dictionary
    mids = [(lam, model.composed(i)) for i, lam in enumerate(model.lambdas[:-1], start=2) if lam]
    lamL = model.lambdas[-1]

    def F(g):
        r = y - Dg @ g
        v = 0.5 * float(r @ r) + lamL * float(np.abs(g).sum())
        for lam, C in mids:
            v += lam * float(np.abs(C @ g).sum())
        return v

    return F


def ml_ista_canonical(model: MultiLayerModel, y, mu=None, t=None, K=1000, stop=0.0,
                      *, reference=None) -> Trace:
    """Two-layer ML-ISTA written in terms of the gradient mapping.

    Each step is ``g2 <- prox_{t g2}(g2 - t D2' G_mu(D2 g2))`` where ``G_mu`` is
    the gradient mapping of ``1/2||y - D1 .||^2 + lam1 ||.||_1``. It stops
    once the recorded residual is at most `stop`.
    """
    _require_two_layers(model, "ml_ista_canonical")
    y = _check_signal(model, y)
    dmu, dt = default_steps(model) if mu is None or t is None else (None, None)
    mu = dmu if mu is None else mu
    t = dt if t is None else t
    if not (mu > 0 and t > 0):
        raise ValueError("mu and t must be positive")
    D1, D2 = model.dictionaries
    lam1 = model.lambdas[0]
    quad = QuadraticData.from_dictionary(D1, y)
    Q, b = quad.Q, quad.b
    shrink = _shrinker(model.nonnegative_mode)
    deep = model.deep_prox()
    F = _fast_objective(model, y)
    rec = _Recorder("ml_ista", reference)

    g2 = np.zeros(model.code_dim)
    rec.add(0, F(g2), math.nan, g2)
    prev = g2
    reason = "max_iter"
    for k in range(1, K + 1):
        g1 = D2 @ g2
        G = (g1 - shrink(g1 - mu * (Q @ g1 + b), mu * lam1)) / mu
        g2_new = deep.prox(g2 - t * (G @ D2), t)
        res = float(np.linalg.norm(g2_new - g2)) / t
        prev, g2 = g2, g2_new
        rec.add(k, F(g2), res, g2)
        if res <= stop:
            reason = "residual"
            break
    return rec.finish(model.layer_codes(g2), prev, reason)


# -- layered forms ---------------------------------------------------------


def _layered(name, model, y, mus, K, stop, accelerate, reference, x0=None):
    y = _check_signal(model, y)
    mus = default_layer_steps(model) if mus is None else tuple(float(m) for m in mus)
    if len(mus) != model.n_layers or any(not m > 0 for m in mus):
        raise ValueError(f"need {model.n_layers} positive layer steps")
    L = model.n_layers
    dicts = model.dictionaries
    chain = [model.composed(i + 1) for i in range(1, L)]  # D_(i+1, L) for i = 1..L-1
    thr = layer_thresholds(model.lambdas, mus)
    t_eff = math.prod(mus)
    shrink = _shrinker(model.nonnegative_mode)
    deep = model.deep_prox()
    F = _fast_objective(model, y)
    rec = _Recorder(name, reference)
    # Gram matrices and the stepped adjoints, reused every iteration
    grams = [D.T @ D for D in dicts]

    gL = np.zeros(model.code_dim) if x0 is None else _check_code_start(model, x0)
    z, tk = gL, 1.0
    rec.add(0, F(gL), math.nan, gL)
    prev = gL
    reason = "max_iter"
    for k in range(1, K + 1):
        hats = [C @ z for C in chain] + [z]
        below = y
        for i in range(L):
            h = hats[i]
            v = h - mus[i] * (grams[i] @ h - below @ dicts[i])
            if i < L - 1:
                below = shrink(v, thr[i])
            else:
                # deepest layer: the l1 weight may come with sign and norm constraints
                below = deep.prox(v, t_eff)
        g_new = below
        res = float(np.linalg.norm(g_new - z)) / t_eff
        if accelerate:
            tn = _next_momentum(tk)
            z = g_new + ((tk - 1.0) / tn) * (g_new - gL)
            tk = tn
        else:
            z = g_new
        prev, gL = gL, g_new
        rec.add(k, F(gL), res, gL)
        if res <= stop:
            reason = "residual"
            break
    return rec.finish(model.layer_codes(gL), prev, reason)


def ml_ista_layered(model: MultiLayerModel, y, mus=None, K=1000, stop=0.0, *, reference=None,
                    x0=None) -> Trace:
    """ML-ISTA as a sweep of per-layer thresholding steps, for any depth.

    Per iteration, ``hat_i = D_(i+1,L) g_L`` for every layer, then for
    ``i = 1..L``::

        g_i <- T_{thr_i}(hat_i - mu_i D_i'(D_i hat_i - g_{i-1})),   g_0 = y

    with thresholds from :func:`layer_thresholds`. The weights in `model`
    are the weights of the problem being solved, so a two-layer run with
    ``mus = (mu, t / mu)`` reproduces :func:`ml_ista_canonical` with ``(mu, t)``.
    """
    return _layered("ml_ista_layered", model, y, mus, K, stop, False, reference, x0)


def ml_fista(model: MultiLayerModel, y, mus=None, K=1000, stop=0.0, *, reference=None,
             x0=None) -> Trace:
    """Accelerated ML-ISTA: the layered sweep is taken from an extrapolated point.

    Momentum acts on the deepest code only, ``z <- g^{k+1} + (t_k - 1)/t_{k+1}
    (g^{k+1} - g^k)`` with ``t_1 = 1`` and ``z = 0`` initially (``z = x0`` when a
    warm start is given). The residual is ``||z^k - g^{k+1}|| / (mu_1 ... mu_L)``.
    """
    return _layered("ml_fista", model, y, mus, K, stop, True, reference, x0)


# -- ADMM -----------------------------------------------------------------


def _inner_bp(H, rhs, x, step, prox, iters, tol, accelerate):
    """Minimise ``1/2 x'Hx - rhs'x + g(x)`` by (F)ISTA; returns (x, residual, iterations)."""
    z, tk = x, 1.0
    res = math.inf
    for j in range(1, iters + 1):
        x_new = prox(z - step * (H @ z - rhs), step)
        res = float(np.linalg.norm(x_new - z)) / step
        if accelerate:
            tn = _next_momentum(tk)
            z = x_new + ((tk - 1.0) / tn) * (x_new - x)
            tk = tn
        else:
            z = x_new
        x = x_new
        if res <= tol:
            return x, res, j
    return x, res, iters


def admm(model: MultiLayerModel, y, rho=1.0, K=1000, stop=0.0, *, inner="fista", inner_iter=50,
         inner_tol=1e-12, warm_start=True, reference=None) -> Trace:
    """ADMM on the split ``g1 = D2 g2`` of the two-layer problem.

    Each outer iteration runs

    1. ``g2 <- argmin 1/2||y - D1 D2 g2||^2 + rho/2 ||g1 - D2 g2 + u||^2 + lam2 ||g2||_1``
       by `inner_iter` (F)ISTA steps, warm-started from the previous ``g2``;
    2. ``g1 <- T_{lam1/rho}(D2 g2 - u)``;
    3. ``u <- u + rho (g1 - D2 g2)``.

    The dual step keeps the factor `rho` of the multiplier update; with the
    scaled multiplier this is a relaxed update that converges for
    ``rho < (1 + sqrt(5)) / 2`` and is the textbook scaled update at ``rho = 1``.

    The residual is ``max(||g1 - D2 g2||, rho ||D2 (g2 - g2_prev)||)``. If the
    inner problem of the last outer iteration was not solved to `inner_tol`
    a warning is stored in the trace.
    """
    _require_two_layers(model, "admm")
    if not rho > 0:
        raise ValueError("rho must be positive")
    if inner not in ("ista", "fista"):
        raise ValueError("inner must be 'ista' or 'fista'")
    y = _check_signal(model, y)
    D1, D2 = model.dictionaries
    lam1 = model.lambdas[0]
    A = model.global_dictionary
    H = A.T @ A + rho * (D2.T @ D2)
    Aty = y @ A
    step = 1.0 / spectral_norm(H)
    deep = model.deep_prox()
    shrink = _shrinker(model.nonnegative_mode)
    F = _fast_objective(model, y)
    rec = _Recorder(f"admm_{inner}", reference)

    g2 = np.zeros(model.code_dim)
    g1 = np.zeros(D2.shape[0])
    u = np.zeros(D2.shape[0])
    rec.add(0, F(g2), math.nan, g2)
    prev = g2
    reason = "max_iter"
    inner_res = 0.0
    zero = np.zeros_like(g2)
    for k in range(1, K + 1):
        start = g2 if warm_start else zero
        rhs = Aty + rho * ((g1 + u) @ D2)
        g2_new, inner_res, _ = _inner_bp(H, rhs, start, step, deep.prox, inner_iter, inner_tol,
                                         inner == "fista")
        Dg = D2 @ g2_new
        g1 = shrink(Dg - u, lam1 / rho)
        u = u + rho * (g1 - Dg)
        primal = float(np.linalg.norm(g1 - Dg))
        dual = rho * float(np.linalg.norm(Dg - D2 @ g2))
        res = max(primal, dual)
        prev, g2 = g2, g2_new
        rec.add(k, F(g2), res, g2)
        if res <= stop:
            reason = "residual"
            break
    warns = []
    if inner_res > inner_tol:
        warns.append(f"inner {inner} stopped at residual {inner_res:.3e} > {inner_tol:.1e}")
    return rec.finish(model.layer_codes(g2), prev, reason, warns)


# -- smoothed FISTA -------------------------------------------------------


def smoothed_objective(model: MultiLayerModel, y, gamma, smoothing: float) -> float:
    """Objective with ``lam1 ||D2 g||_1`` replaced by its Moreau envelope."""
    _require_two_layers(model, "smoothed_objective")
    D1, D2 = model.dictionaries
    gamma = np.asarray(gamma, dtype=np.float64)
    r = y - model.global_dictionary @ gamma
    env, _ = moreau_envelope_l1(D2 @ gamma, model.lambdas[0], smoothing, model.nonnegative_mode)
    return 0.5 * float(r @ r) + env + model.deep_prox().value(gamma)


def s_fista(model: MultiLayerModel, y, smoothing=1e-4, step=None, K=1000, stop=0.0, *,
            reference=None) -> Trace:
    """FISTA on the problem with the intermediate l1 term smoothed.

    The smooth part ``1/2||y - D1 D2 g||^2 + env_mu(D2 g)`` has gradient
    ``(D1 D2)'(D1 D2 g - y) + D2' grad env_mu(D2 g)`` and Lipschitz constant
    ``||D1 D2||^2 + ||D2||^2 / mu``; `step` defaults to its inverse. The trace
    records the true (unsmoothed) objective.
    """
    _require_two_layers(model, "s_fista")
    if not smoothing > 0:
        raise ValueError("smoothing must be positive")
    y = _check_signal(model, y)
    D1, D2 = model.dictionaries
    A = model.global_dictionary
    if step is None:
        step = 1.0 / (spectral_norm(A) ** 2 + spectral_norm(D2) ** 2 / smoothing)
    if not step > 0:
        raise ValueError("step must be positive")
    lam1 = model.lambdas[0]
    AtA = A.T @ A
    Aty = y @ A
    shrink = _shrinker(model.nonnegative_mode)
    deep = model.deep_prox()
    F = _fast_objective(model, y)
    rec = _Recorder("s_fista", reference)

    x = np.zeros(model.code_dim)
    z, tk = x, 1.0
    rec.add(0, F(x), math.nan, x)
    prev = x
    reason = "max_iter"
    thr = lam1 * smoothing
    for k in range(1, K + 1):
        w = D2 @ z
        env_grad = (w - shrink(w, thr)) / smoothing
        grad = AtA @ z - Aty + env_grad @ D2
        x_new = deep.prox(z - step * grad, step)
        res = float(np.linalg.norm(x_new - z)) / step
        tn = _next_momentum(tk)
        z = x_new + ((tk - 1.0) / tn) * (x_new - x)
        tk = tn
        prev, x = x, x_new
        rec.add(k, F(x), res, x)
        if res <= stop:
            reason = "residual"
            break
    return rec.finish(model.layer_codes(x), prev, reason)


# -- heuristics and unrolled forms ---------------------------------------


def layered_bp(model: MultiLayerModel, y, lambdas=None, inner_K=2000, stop=1e-10) -> list:
    """Sequence of single-layer pursuits, each explaining the previous estimate.

    ``hat_i = argmin 1/2||hat_{i-1} - D_i g||^2 + lam_i ||g||_1`` for
    ``i = 1..L`` with ``hat_0 = y``, each solved by FISTA. The estimates
    returned are generally *not* consistent: ``hat_{i-1} != D_i hat_i``, so
    they do not minimise the multi-layer objective.
    """
    y = _check_signal(model, y)
    lambdas = model.lambdas if lambdas is None else tuple(lambdas)
    if len(lambdas) != model.n_layers:
        raise ValueError(f"need {model.n_layers} lambdas")
    out = []
    target = y
    for D, lam in zip(model.dictionaries, lambdas):
        tr = fista(D, target, lam, K=inner_K, stop=stop, nonnegative=model.nonnegative_mode)
        target = tr.gamma
        out.append(target)
    return out


def feed_forward(model: MultiLayerModel, y, thresholds=None) -> np.ndarray:
    """ReLU network forward pass ``g_i = ReLU(D_i' g_{i-1} - thr_i)`` with ``g_0 = y``.

    `thresholds` are the negated biases, one scalar or vector per layer, and
    default to the model weights. For a nonnegative two-layer model the first
    iterate of :func:`ml_ista_canonical` from zero equals ``t`` times this
    output (thresholds ``lam_1, lam_2``).
    """
    y = _check_signal(model, y)
    thresholds = model.lambdas if thresholds is None else thresholds
    g = y
    for D, thr in zip(model.dictionaries, thresholds):
        g = np.maximum(g @ D - np.asarray(thr, dtype=np.float64), 0.0)
    return g


def ml_lista_step(W_list, B_list, lambdas, gamma2, y, nonnegative=False) -> np.ndarray:
    """One two-layer ML-LISTA update with fixed matrices.

    ``g1 = B2' g2``; ``hat1 = T_{lam1}((I - W1'W1) g1 + B1 y)``;
    returns ``T_{lam2}((I - W2'W2) g2 + B2 hat1)``.
    """
    W1, W2 = (as_matrix(W) for W in W_list)
    B1, B2 = (as_matrix(B) for B in B_list)
    lam1, lam2 = lambdas
    gamma2 = as_vector(gamma2)
    y = as_vector(y)
    if B2.shape[0] != gamma2.shape[0] or W2.shape[1] != gamma2.shape[0]:
        raise DimensionError("W2/B2 do not match the state dimension")
    if B1.shape[1] != y.shape[0] or B1.shape[0] != B2.shape[1] or W1.shape[1] != B1.shape[0]:
        raise DimensionError("W1/B1 do not match the signal or intermediate dimension")
    shrink = _shrinker(nonnegative)
    g1 = gamma2 @ B2
    hat1 = shrink(g1 - (W1 @ g1) @ W1 + B1 @ y, lam1)
    return shrink(gamma2 - (W2 @ gamma2) @ W2 + B2 @ hat1, lam2)


def ml_lista_canonical_init(model: MultiLayerModel, mu: float):
    """ML-LISTA matrices that reproduce one layered ML-ISTA step.

    With ``W1 = sqrt(mu) D1``, ``B1 = mu D1'``, ``W2 = D2``, ``B2 = D2'`` and
    thresholds ``(mu lam1, mu lam2)``, :func:`ml_lista_step` equals one step of
    :func:`ml_ista_layered` with ``mus = (mu, 1)``. The second layer step has
    to be one because ``B2'`` also serves to lift the state to ``g1``.
    """
    _require_two_layers(model, "ml_lista_canonical_init")
    D1, D2 = model.dictionaries
    W = [math.sqrt(mu) * D1, D2]
    B = [mu * D1.T, D2.T]
    return W, B, layer_thresholds(model.lambdas, (mu, 1.0))


# -- front end -------------------------------------------------------------

SOLVERS = ("ista", "fista", "ml_ista", "ml_ista_layered", "ml_fista", "admm", "admm_ista",
           "admm_fista", "s_fista")


def run_solver(name: str, model: MultiLayerModel, y, params: SolverParams, reference=None) -> Trace:
    """Dispatch a named solver with shared :class:`SolverParams`.

    ``ista``/``fista`` act on the global dictionary with the deepest weight.
    """
    K, stop = params.max_iter, params.stop_residual
    if name in ("ista", "fista"):
        fn = ista if name == "ista" else fista
        return fn(model.global_dictionary, y, model.lambdas[-1], params.step, K, stop,
                  nonnegative=model.nonnegative_mode, radius=model.radius, reference=reference)
    if name == "ml_ista":
        mu, t = params.mu, params.t
        if mu is not None and t is None:
            t = 0.99 * 4.0 * mu / (3.0 * spectral_norm(model.dictionaries[1]))
        return ml_ista_canonical(model, y, mu, t, K, stop, reference=reference)
    if name in ("ml_ista_layered", "ml_fista"):
        mus = params.mu_per_layer
        if mus is None and params.mu is not None and model.n_layers == 2:
            t = params.t or 0.99 * 4.0 * params.mu / (3.0 * spectral_norm(model.dictionaries[1]))
            mus = (params.mu, t / params.mu)
        fn = ml_ista_layered if name == "ml_ista_layered" else ml_fista
        return fn(model, y, mus, K, stop, reference=reference)
    if name.startswith("admm"):
        inner = name.split("_", 1)[1] if "_" in name else params.admm_inner
        return admm(model, y, params.admm_rho, K, stop, inner=inner, inner_iter=params.admm_inner_iter,
                    warm_start=params.warm_start, reference=reference)
    if name == "s_fista":
        return s_fista(model, y, params.sfista_smoothing, params.step, K, stop, reference=reference)
    raise ValueError(f"unknown solver {name!r}; choose from {', '.join(SOLVERS)}")
