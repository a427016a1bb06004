"""Synthetic two-layer instances that obey the multi-layer sparse model.

Randomness comes from numpy's Philox 4x64-10 counter-based generator keyed by
a :class:`numpy.random.SeedSequence`. Each instance seed is split into three
independent child streams (dictionaries, representation, noise), so changing
e.g. the noise level never perturbs the dictionaries.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np
from scipy.linalg import null_space

from .linalg import read_matrix_csv, read_vector_csv, write_matrix_csv
from .model import MultiLayerModel, counts_nonzero

ZERO_THRESHOLD = 1e-8
MAX_REJECTIONS = 100


class GenerationError(RuntimeError):
    """The sparsity pattern could not be realised."""


def make_rng(seed) -> np.random.Generator:
    """Philox-backed generator for an integer seed or a SeedSequence."""
    return np.random.Generator(np.random.Philox(seed))


def _streams(seed):
    return [make_rng(s) for s in np.random.SeedSequence(seed).spawn(3)]


@dataclass(frozen=True)
class InstanceSpec:
    """Dimensions, sparsity levels and noise level of a synthetic instance.

    `snr` is the linear power ratio ``||x||^2 / ||w||^2`` unless `snr_db` is
    set, in which case `snr` is read in decibels. ``snr = inf`` means no noise.
    """

    n: int = 50
    m1: int = 70
    m2: int = 60
    s1: int = 42
    s2: int = 30
    snr: float = 10.0
    snr_db: bool = False
    seed: int = 0

    def __post_init__(self):
        for name in ("n", "m1", "m2", "s1", "s2"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if self.s2 > self.m2 or self.s1 > self.m1:
            raise ValueError("sparsity exceeds dimension")
        if self.s1 < self.m1 and self.s2 <= self.m1 - self.s1:
            raise ValueError(
                f"need s2 > m1 - s1 for a nontrivial cosparse code (s2={self.s2}, m1 - s1={self.m1 - self.s1})"
            )
        if not self.snr_db and not self.snr > 0:
            raise ValueError("snr must be positive")

    @property
    def snr_linear(self) -> float:
        return 10.0 ** (self.snr / 10.0) if self.snr_db else float(self.snr)

    def with_seed(self, seed: int) -> "InstanceSpec":
        return InstanceSpec(**{**asdict(self), "seed": int(seed)})

    def to_dict(self) -> dict:
        d = asdict(self)
        if math.isinf(d["snr"]):
            d["snr"] = "inf"
        return d

    @classmethod
    def from_dict(cls, d) -> "InstanceSpec":
        d = dict(d)
        if isinstance(d.get("snr"), str):
            d["snr"] = float(d["snr"])
        return cls(**d)


@dataclass(frozen=True, eq=False)
class GeneratedInstance:
    spec: InstanceSpec
    D1: np.ndarray
    D2: np.ndarray
    gamma2: np.ndarray
    gamma1: np.ndarray
    x: np.ndarray
    y: np.ndarray
    noise: np.ndarray

    def model(self, lambdas=(0.0, 0.0), **kw) -> MultiLayerModel:
        return MultiLayerModel((self.D1, self.D2), lambdas, **kw)

    def save(self, directory) -> Path:
        """Write ``spec.json``, ``D1.csv``, ``D2.csv``, ``gamma2.csv`` and ``y.csv``."""
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        (directory / "spec.json").write_text(json.dumps(self.spec.to_dict(), indent=2) + "\n")
        write_matrix_csv(directory / "D1.csv", self.D1)
        write_matrix_csv(directory / "D2.csv", self.D2)
        write_matrix_csv(directory / "gamma2.csv", self.gamma2)
        write_matrix_csv(directory / "y.csv", self.y)
        return directory

    @classmethod
    def load(cls, directory) -> "GeneratedInstance":
        directory = Path(directory)
        spec = InstanceSpec.from_dict(json.loads((directory / "spec.json").read_text()))
        D1 = read_matrix_csv(directory / "D1.csv")
        D2 = read_matrix_csv(directory / "D2.csv")
        gamma2 = read_vector_csv(directory / "gamma2.csv")
        y = read_vector_csv(directory / "y.csv")
        gamma1 = D2 @ gamma2
        x = D1 @ gamma1
        return cls(spec, D1, D2, gamma2, gamma1, x, y, y - x)


def gen_dictionaries(n, m1, m2, seed):
    """Gaussian ``D1`` (n x m1) and ``D2`` (m1 x m2) with unit-norm columns."""
    if min(n, m1, m2) <= 0:
        raise ValueError("dimensions must be positive")
    rng = seed if isinstance(seed, np.random.Generator) else make_rng(seed)
    D1 = rng.standard_normal((n, m1))
    D2 = rng.standard_normal((m1, m2))
    D1 /= np.linalg.norm(D1, axis=0)
    D2 /= np.linalg.norm(D2, axis=0)
    return D1, D2


def gen_mlcsc_signal(D2, s1, s2, seed):
    """Draw ``gamma2`` with ``s2`` nonzeros such that ``D2 @ gamma2`` has exactly ``s1``.

    A support for ``gamma2`` and a zero set of size ``m1 - s1`` for
    ``gamma1`` are drawn uniformly; the nonzero values of ``gamma2`` are a
    random unit-norm combination of the null space of the corresponding
    ``(m1 - s1) x s2`` block of ``D2``. Draws whose nonzeros come out
    numerically zero are rejected and redrawn.

    Returns
    -------
    gamma2, gamma1 : ndarray
    """
    D2 = np.asarray(D2, dtype=np.float64)
    m1, m2 = D2.shape
    if not (0 < s2 <= m2 and 0 < s1 <= m1):
        raise ValueError("sparsity levels out of range")
    n_zero = m1 - s1
    if n_zero > 0 and s2 <= n_zero:
        raise ValueError(f"infeasible: s2={s2} must exceed m1 - s1 = {n_zero}")
    rng = seed if isinstance(seed, np.random.Generator) else make_rng(seed)
    for _ in range(MAX_REJECTIONS + 1):
        S2 = np.sort(rng.choice(m2, size=s2, replace=False))
        Z1 = np.sort(rng.choice(m1, size=n_zero, replace=False))
        if n_zero:
            basis = null_space(D2[np.ix_(Z1, S2)])
        else:
            basis = np.eye(s2)
        if basis.shape[1] == 0:
            continue
        coef = rng.standard_normal(basis.shape[1])
        values = basis @ coef
        values /= np.linalg.norm(values)
        gamma2 = np.zeros(m2)
        gamma2[S2] = values
        gamma1 = D2 @ gamma2
        gamma1[Z1] = 0.0  # exact zeros where the construction forces them
        off = np.ones(m1, dtype=bool)
        off[Z1] = False
        if np.min(np.abs(values)) < ZERO_THRESHOLD or np.min(np.abs(gamma1[off])) < ZERO_THRESHOLD:
            continue
        return gamma2, gamma1
    raise GenerationError(f"no valid representation after {MAX_REJECTIONS} rejections")


def add_noise_snr(x, snr_linear, seed):
    """Add white Gaussian noise scaled so that ``||x||^2 / ||w||^2 == snr_linear``.

    Returns
    -------
    y, w : ndarray
    """
    x = np.asarray(x, dtype=np.float64)
    nx = float(np.linalg.norm(x))
    if nx == 0:
        raise ValueError("cannot set an SNR for a zero signal")
    if not snr_linear > 0:
        raise ValueError("snr must be positive")
    if math.isinf(snr_linear):
        return x.copy(), np.zeros_like(x)
    rng = seed if isinstance(seed, np.random.Generator) else make_rng(seed)
    w = rng.standard_normal(x.shape)
    w *= nx / (math.sqrt(snr_linear) * np.linalg.norm(w))
    return x + w, w


def generate_instance(spec: InstanceSpec) -> GeneratedInstance:
    """Dictionaries, representations and noisy measurement for `spec`."""
    r_dict, r_code, r_noise = _streams(spec.seed)
    D1, D2 = gen_dictionaries(spec.n, spec.m1, spec.m2, r_dict)
    gamma2, _ = gen_mlcsc_signal(D2, spec.s1, spec.s2, r_code)
    gamma1 = D2 @ gamma2
    x = D1 @ gamma1
    y, w = add_noise_snr(x, spec.snr_linear, r_noise)
    return GeneratedInstance(spec, D1, D2, gamma2, gamma1, x, y, w)


def cosparsity(D2, gamma2, threshold=ZERO_THRESHOLD) -> int:
    """Number of rows of `D2` orthogonal to `gamma2`."""
    return int(np.sum(np.abs(np.asarray(D2) @ gamma2) <= threshold))


__all__ = [
    "GeneratedInstance",
    "GenerationError",
    "InstanceSpec",
    "add_noise_snr",
    "cosparsity",
    "counts_nonzero",
    "gen_dictionaries",
    "gen_mlcsc_signal",
    "generate_instance",
    "make_rng",
]
