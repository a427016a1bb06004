"""Problem instances of multi-layer basis pursuit and the quantities derived from them.

The objective for an ``L``-layer model with dictionaries ``D_1 ... D_L`` and
weights ``lam_1 ... lam_L`` is::

    F(g) = 1/2 ||y - D_(1,L) g||^2 + sum_{i<L} lam_i ||D_(i+1,L) g||_1 + lam_L ||g||_1

where ``D_(i,L) = D_i ... D_L`` and ``g`` is the deepest representation.
"""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .linalg import (
    DimensionError,
    as_matrix,
    as_vector,
    compose_dictionaries,
    read_matrix_csv,
    spectral_norm,
    write_matrix_csv,
)
from .prox import ProxSpec, nonneg_soft_threshold, project_ball, soft_threshold

# relative slack on the norm-ball test so that radially projected points count as feasible
_BALL_SLACK = 1e-12


class IllPosedWarning(UserWarning):
    """The deepest penalty is zero while a shallower one is active."""


@dataclass(frozen=True, eq=False)
class MultiLayerModel:
    """Dictionaries ``D_1 ... D_L`` with per-layer l1 weights.

    `nonnegative_mode` constrains the deepest code to the nonnegative orthant
    and turns every shrinkage inside the layered solvers into a biased ReLU.
    `radius` adds the constraint ``||g||_2 <= radius`` on the deepest code.
    """

    dictionaries: tuple
    lambdas: tuple
    nonnegative_mode: bool = False
    radius: float = math.inf
    _chain: list = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        dicts = tuple(as_matrix(D) for D in self.dictionaries)
        lams = tuple(float(v) for v in self.lambdas)
        if not dicts:
            raise ValueError("need at least one dictionary")
        for k in range(len(dicts) - 1):
            if dicts[k].shape[1] != dicts[k + 1].shape[0]:
                raise DimensionError(
                    f"cols(D{k + 1}) = {dicts[k].shape[1]} but rows(D{k + 2}) = {dicts[k + 1].shape[0]}"
                )
        if len(lams) != len(dicts):
            raise ValueError(f"need {len(dicts)} lambdas, got {len(lams)}")
        if any(v < 0 for v in lams):
            raise ValueError("lambdas must be nonnegative")
        if not self.radius > 0:
            raise ValueError("radius must be positive or infinite")
        if lams[-1] == 0 and any(v > 0 for v in lams[:-1]):
            warnings.warn(
                "deepest penalty is zero while an intermediate penalty is positive; "
                "the problem has no unique solution when the dictionaries have a kernel",
                IllPosedWarning,
                stacklevel=3,
            )
        for D in dicts:
            D.setflags(write=False)
        object.__setattr__(self, "dictionaries", dicts)
        object.__setattr__(self, "lambdas", lams)
        object.__setattr__(self, "radius", float(self.radius))
        # chain[i] = D_(i+1, L) for i = 0..L-1, built right to left
        chain = [dicts[-1]]
        for D in reversed(dicts[:-1]):
            chain.insert(0, D @ chain[0])
        for C in chain:
            C.setflags(write=False)
        object.__setattr__(self, "_chain", chain)

    @property
    def n_layers(self) -> int:
        return len(self.dictionaries)

    @property
    def signal_dim(self) -> int:
        return self.dictionaries[0].shape[0]

    @property
    def code_dim(self) -> int:
        return self.dictionaries[-1].shape[1]

    def composed(self, i: int) -> np.ndarray:
        """``D_(i,L)`` with 1-based `i`; cached at construction."""
        return self._chain[i - 1]

    @property
    def global_dictionary(self) -> np.ndarray:
        return self._chain[0]

    def layer_codes(self, gamma) -> list:
        """All representations ``[g_1, ..., g_L]`` implied by the deepest code."""
        gamma = np.asarray(gamma, dtype=np.float64)
        return [self._chain[i] @ gamma for i in range(1, self.n_layers)] + [gamma]

    def deep_prox(self) -> ProxSpec:
        """Prox description of the penalty on the deepest code."""
        return ProxSpec(self.lambdas[-1], self.nonnegative_mode, self.radius)

    def replace(self, **changes) -> "MultiLayerModel":
        kw = dict(
            dictionaries=self.dictionaries,
            lambdas=self.lambdas,
            nonnegative_mode=self.nonnegative_mode,
            radius=self.radius,
        )
        kw.update(changes)
        return MultiLayerModel(**kw)

    # -- serialization -----------------------------------------------------

    def save(self, directory) -> Path:
        """Write ``model.json`` plus one CSV file per dictionary."""
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        files = []
        for k, D in enumerate(self.dictionaries, start=1):
            name = f"D{k}.csv"
            write_matrix_csv(directory / name, D)
            files.append(name)
        doc = {
            "dims": [self.signal_dim] + [D.shape[1] for D in self.dictionaries],
            "dictionaries": files,
            "lambdas": list(self.lambdas),
            "nonnegative_mode": self.nonnegative_mode,
            "radius": None if math.isinf(self.radius) else self.radius,
        }
        path = directory / "model.json"
        path.write_text(json.dumps(doc, indent=2) + "\n")
        return path

    @classmethod
    def load(cls, path) -> "MultiLayerModel":
        path = Path(path)
        if path.is_dir():
            path = path / "model.json"
        doc = json.loads(path.read_text())
        dicts = [read_matrix_csv(path.parent / name) for name in doc["dictionaries"]]
        dims = [dicts[0].shape[0]] + [D.shape[1] for D in dicts]
        if "dims" in doc and list(doc["dims"]) != dims:
            raise DimensionError(f"model.json declares dims {doc['dims']} but matrices give {dims}")
        radius = doc.get("radius")
        return cls(
            dicts,
            doc["lambdas"],
            nonnegative_mode=bool(doc.get("nonnegative_mode", False)),
            radius=math.inf if radius is None else float(radius),
        )


@dataclass(frozen=True, eq=False)
class QuadraticData:
    """``f(g1) = 1/2 g1' Q g1 + b' g1 + c`` equal to ``1/2 ||y - D1 g1||^2``."""

    Q: np.ndarray
    b: np.ndarray
    c: float

    @classmethod
    def from_dictionary(cls, D1, y) -> "QuadraticData":
        D1 = as_matrix(D1)
        y = as_vector(y)
        if D1.shape[0] != y.shape[0]:
            raise DimensionError("signal dimension does not match D1")
        return cls(D1.T @ D1, -(y @ D1), 0.5 * float(y @ y))

    def value(self, g1) -> float:
        return 0.5 * float(g1 @ (self.Q @ g1)) + float(self.b @ g1) + self.c

    def gradient(self, g1) -> np.ndarray:
        return self.Q @ g1 + self.b


@dataclass(frozen=True)
class TheoremConstants:
    """Constants of the suboptimality bound for eps-fixed points of ML-ISTA."""

    M: float
    R: float
    R1: float
    lg1: float
    lg2: float
    eta: float
    beta: float
    kappa: float
    C: float
    norm_Q: float
    norm_D2: float
    norm_b: float

    def bound(self, eps: float, mu: float, t: float) -> float:
        """``eta * eps + (beta + kappa * t) * mu``."""
        return self.eta * eps + (self.beta + self.kappa * t) * mu

    def step_limits(self) -> tuple[float, float]:
        """Upper ends of the admissible ``mu`` and the factor ``4/(3 ||D2||)`` for ``t``."""
        return 1.0 / self.norm_Q, 4.0 / (3.0 * self.norm_D2)


def _require_two_layers(model):
    if model.n_layers != 2:
        raise NotImplementedError(f"defined for two-layer models only, got L={model.n_layers}")


def _check_code(model, gamma):
    gamma = np.asarray(gamma, dtype=np.float64)
    if gamma.ndim != 1 or gamma.shape[0] != model.code_dim:
        raise DimensionError(f"code must have dim {model.code_dim}, got shape {gamma.shape}")
    return gamma


def objective(model: MultiLayerModel, y, gamma) -> float:
    """Multi-layer basis pursuit objective at the deepest code `gamma`.

    Returns ``inf`` outside the feasible set (norm ball, and the nonnegative
    orthant for the deepest code in nonnegative mode).
    """
    gamma = _check_code(model, gamma)
    y = np.asarray(y, dtype=np.float64)
    if y.shape != (model.signal_dim,):
        raise DimensionError(f"signal must have dim {model.signal_dim}")
    if np.linalg.norm(gamma) > model.radius * (1 + _BALL_SLACK):
        return math.inf
    if model.nonnegative_mode and np.any(gamma < 0):
        return math.inf
    r = y - model.global_dictionary @ gamma
    val = 0.5 * float(r @ r)
    for i, lam in enumerate(model.lambdas[:-1], start=2):
        if lam:
            val += lam * float(np.abs(model.composed(i) @ gamma).sum())
    return val + model.lambdas[-1] * float(np.abs(gamma).sum())


def gradient_mapping(quad: QuadraticData, lambda1: float, mu: float, gamma1, nonnegative=False) -> np.ndarray:
    """Gradient mapping of ``f + lambda1 ||.||_1`` with step `mu`.

    ``(g1 - prox_{mu g}(g1 - mu grad f(g1))) / mu``; it equals ``grad f`` when
    `lambda1` is zero and vanishes exactly at minimizers of ``f + g``.
    """
    if mu <= 0:
        raise ValueError("mu must be positive")
    gamma1 = np.asarray(gamma1, dtype=np.float64)
    shrink = nonneg_soft_threshold if nonnegative else soft_threshold
    forward = gamma1 - mu * quad.gradient(gamma1)
    return (gamma1 - shrink(forward, mu * lambda1)) / mu


def fixed_point_residual(model: MultiLayerModel, y, mu: float, t: float, gamma2):
    """Scaled displacement of one ML-ISTA step from `gamma2`.

    Returns
    -------
    residual : float
        ``||gamma2 - alpha||_2 / t``.
    alpha : ndarray
        ``prox_{t g2}(gamma2 - t D2' G(D2 gamma2))``, the ML-ISTA update.
    """
    _require_two_layers(model)
    if t <= 0 or mu <= 0:
        raise ValueError("mu and t must be positive")
    gamma2 = _check_code(model, gamma2)
    D1, D2 = model.dictionaries
    quad = QuadraticData.from_dictionary(D1, y)
    G = gradient_mapping(quad, model.lambdas[0], mu, D2 @ gamma2, model.nonnegative_mode)
    alpha = model.deep_prox().prox(gamma2 - t * (G @ D2), t)
    return float(np.linalg.norm(gamma2 - alpha)) / t, alpha


def theorem_constants(model: MultiLayerModel, y, R: float | None = None) -> TheoremConstants:
    """Compute ``M, R1, l_g1, l_g2, eta, beta, kappa, C`` for a two-layer model.

    `R` defaults to the model radius. The Lipschitz constants of the l1 terms
    are ``lam * sqrt(dim)``, the Euclidean Lipschitz constant of ``lam ||.||_1``.
    """
    _require_two_layers(model)
    if R is None:
        R = model.radius
    if not (R > 0 and math.isfinite(R)):
        raise ValueError("theorem constants need a finite positive radius")
    D1, D2 = model.dictionaries
    quad = QuadraticData.from_dictionary(D1, y)
    nQ = spectral_norm(quad.Q)
    nD2 = spectral_norm(D2)
    nb = float(np.linalg.norm(quad.b))
    return constants_from_norms(nQ, nD2, nb, R, model.lambdas, D2.shape)


def constants_from_norms(nQ, nD2, nb, R, lambdas, d2_shape) -> TheoremConstants:
    m1, m2 = d2_shape
    lam1, lam2 = lambdas
    R1 = nD2 * R
    M = nQ * R1 + nb
    lg1 = lam1 * math.sqrt(m1)
    lg2 = lam2 * math.sqrt(m2)
    G = M + lg1
    eta = 2.0 * R
    beta = 2 * R * nD2 * nQ * G + nQ**2 * R1**2 + 2 * nb * nQ * R1 + lg1**2 + 2 * lg1 * M
    kappa = nD2 * (nD2 * G + lg2) * nQ * G
    C = R1**2 * nQ**2 / 2 + nb * nQ * R1 + lg1**2 / 2 + lg1 * M
    return TheoremConstants(M, R, R1, lg1, lg2, eta, beta, kappa, C, nQ, nD2, nb)


def default_radius(reference) -> float:
    """Twice the norm of a high-accuracy solution, so the optimum is interior."""
    r = 2.0 * float(np.linalg.norm(reference))
    if r == 0:
        raise ValueError("reference solution is zero; pick a radius explicitly")
    return r


def recovery_error(estimate, truth) -> float:
    """``||estimate - truth|| / ||truth||``, or ``||estimate||`` when `truth` is zero."""
    estimate = np.asarray(estimate, dtype=np.float64)
    truth = np.asarray(truth, dtype=np.float64)
    if estimate.shape != truth.shape:
        raise DimensionError(f"shape mismatch {estimate.shape} vs {truth.shape}")
    nt = float(np.linalg.norm(truth))
    if nt == 0:
        return float(np.linalg.norm(estimate))
    return float(np.linalg.norm(estimate - truth)) / nt


def sample_ball(rng, dim: int, R: float, count: int) -> np.ndarray:
    """`count` points drawn uniformly from the Euclidean ball of radius `R`."""
    d = rng.standard_normal((count, dim))
    d /= np.linalg.norm(d, axis=1, keepdims=True)
    r = R * rng.random(count) ** (1.0 / dim)
    return d * r[:, None]


def counts_nonzero(x, threshold: float = 1e-8) -> int:
    return int(np.sum(np.abs(np.asarray(x)) > threshold))


__all__ = [
    "IllPosedWarning",
    "MultiLayerModel",
    "QuadraticData",
    "TheoremConstants",
    "constants_from_norms",
    "counts_nonzero",
    "default_radius",
    "fixed_point_residual",
    "gradient_mapping",
    "objective",
    "project_ball",
    "recovery_error",
    "sample_ball",
    "theorem_constants",
]
