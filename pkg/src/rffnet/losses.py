"""Convex losses on feature-space models, with analytic (sub)gradients.

Both losses act on the linear model ``theta @ z`` in feature space.  The
gradients returned here drive the stochastic updates in :mod:`rffnet.learners`,
so their conventions (signs, the strict hinge indicator) are pinned by tests.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class LossEval:
    value: float
    grad: np.ndarray


def squared_loss(z: np.ndarray, y: float, theta: np.ndarray) -> LossEval:
    """Half squared prediction error: value 0.5*(y - theta@z)^2, grad -(y - theta@z)*z."""
    z = np.asarray(z, dtype=float)
    theta = np.asarray(theta, dtype=float)
    if z.shape != theta.shape or z.ndim != 1:
        raise ValueError(f"feature/parameter shape mismatch: {z.shape} vs {theta.shape}")
    err = y - theta @ z
    return LossEval(value=0.5 * err * err, grad=-err * z)


def hinge_reg_loss(z: np.ndarray, y: float, theta: np.ndarray, lam: float) -> LossEval:
    """L2-regularized hinge loss.

    value = lam/2 * ||theta||^2 + max(0, 1 - y * theta@z).  The subgradient
    uses the strict indicator of the hinge being active: at margin exactly 1
    the hinge term contributes nothing and the gradient is lam*theta.
    ``y`` must be -1 or +1.
    """
    z = np.asarray(z, dtype=float)
    theta = np.asarray(theta, dtype=float)
    if z.shape != theta.shape or z.ndim != 1:
        raise ValueError(f"feature/parameter shape mismatch: {z.shape} vs {theta.shape}")
    if lam <= 0:
        raise ValueError(f"regularization weight must be positive, got {lam}")
    if y not in (-1.0, 1.0):
        raise ValueError(f"labels must be -1 or +1, got {y}")
    margin_gap = 1.0 - y * (theta @ z)
    value = 0.5 * lam * theta.dot(theta) + max(0.0, margin_gap)
    grad = lam * theta
    if margin_gap > 0.0:
        grad = grad - y * z
    return LossEval(value=value, grad=grad)


@dataclass(frozen=True)
class LossModel:
    """A named loss with its parameters, evaluable at (z, y, theta).

    kind is "squared" or "hinge"; ``lam`` is the hinge regularization weight
    and is ignored by the squared loss.
    """

    kind: str
    lam: float = 0.0

    def __post_init__(self):
        if self.kind not in ("squared", "hinge"):
            raise ValueError(f"unknown loss {self.kind!r}")
        if self.kind == "hinge" and self.lam <= 0:
            raise ValueError("hinge loss requires a positive regularization weight")

    def evaluate(self, z: np.ndarray, y: float, theta: np.ndarray) -> LossEval:
        if self.kind == "squared":
            return squared_loss(z, y, theta)
        return hinge_reg_loss(z, y, theta, self.lam)


def make_loss(kind: str, lam: float = 0.0) -> LossModel:
    return LossModel(kind=kind, lam=lam)
