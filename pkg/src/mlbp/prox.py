"""Closed-form proximal operators for l1-type penalties."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


def _check_tau(tau):
    if tau < 0:
        raise ValueError(f"threshold must be nonnegative, got {tau}")


def soft_threshold(x, tau):
    """Prox of ``tau * ||.||_1``: ``sign(x) * max(|x| - tau, 0)``."""
    _check_tau(tau)
    x = np.asarray(x, dtype=np.float64)
    return np.sign(x) * np.maximum(np.abs(x) - tau, 0.0)


def nonneg_soft_threshold(x, tau):
    """Prox of ``tau * ||.||_1`` plus the nonnegative-orthant indicator.

    This is a ReLU with bias ``-tau``.
    """
    _check_tau(tau)
    x = np.asarray(x, dtype=np.float64)
    return np.maximum(x - tau, 0.0)


def project_ball(z, R):
    """Radial projection onto the Euclidean ball of radius `R`."""
    if math.isinf(R):
        return z
    nz = np.linalg.norm(z)
    if nz > R:
        return z * (R / nz)
    return z


def prox_l1_ball(x, tau, R=math.inf, nonnegative=False):
    """Prox of ``tau * ||.||_1 + indicator(||.||_2 <= R)``.

    Shrink first, then scale radially onto the ball. The composition is exact
    because the l1 norm is positively homogeneous: radial scaling of the
    thresholded point keeps it on the same face of the shrinkage.
    """
    _check_tau(tau)
    if not R > 0:
        raise ValueError(f"radius must be positive, got {R}")
    z = nonneg_soft_threshold(x, tau) if nonnegative else soft_threshold(x, tau)
    return project_ball(z, R)


def moreau_envelope_l1(x, lam, mu, nonnegative=False):
    """Moreau envelope of ``lam * ||.||_1`` with smoothing `mu`.

    With `nonnegative` the envelope is taken of ``lam * ||.||_1`` plus the
    nonnegative-orthant indicator instead.

    Returns
    -------
    value : float
        Sum of Huber functions, quadratic for ``|x_j| <= lam * mu``
        (for every ``x_j <= lam * mu`` in the nonnegative case).
    gradient : ndarray
        ``(x - prox(x)) / mu``.
    """
    if mu <= 0:
        raise ValueError(f"smoothing parameter must be positive, got {mu}")
    _check_tau(lam)
    x = np.asarray(x, dtype=np.float64)
    a = x if nonnegative else np.abs(x)
    quad = a <= lam * mu
    value = float(np.sum(np.where(quad, x * x / (2 * mu), lam * a - lam * lam * mu / 2)))
    shrink = nonneg_soft_threshold if nonnegative else soft_threshold
    grad = (x - shrink(x, lam * mu)) / mu
    return value, grad


@dataclass(frozen=True)
class ProxSpec:
    """Penalty ``penalty_weight * ||.||_1`` with optional sign and norm constraints.

    ``prox(x, step)`` evaluates the prox of ``step`` times the penalty.
    """

    penalty_weight: float = 0.0
    nonnegative_mode: bool = False
    radius: float = math.inf

    def __post_init__(self):
        if self.penalty_weight < 0:
            raise ValueError("penalty_weight must be nonnegative")
        if not self.radius > 0:
            raise ValueError("radius must be positive or infinite")

    def prox(self, x, step=1.0):
        return prox_l1_ball(x, step * self.penalty_weight, self.radius, self.nonnegative_mode)

    def value(self, x):
        x = np.asarray(x, dtype=np.float64)
        if self.nonnegative_mode and np.any(x < 0):
            return math.inf
        if np.linalg.norm(x) > self.radius:
            return math.inf
        return self.penalty_weight * float(np.abs(x).sum())
