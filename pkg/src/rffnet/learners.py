"""Combine-then-adapt diffusion learning in random feature space.

Every node holds a parameter vector in R^D.  At iteration n (counted from 1)
each node averages its neighbors' parameters with combination weights, then
takes a stochastic (sub)gradient step on its own fresh sample:

    psi_k = sum_l A[k, l] * theta_l            (combine)
    theta_k = psi_k - mu_n * grad L(z_k, y_k, psi_k)   (adapt)

Rounds are synchronous and parameters start at zero.  The single-node solver
is the same loop with a 1x1 combination matrix, so their traces agree bitwise.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .features import FeatureMap, transform_batch
from .losses import LossModel
from .network import disagreement


@dataclass(frozen=True)
class StepSchedule:
    """Step-size sequence mu_n, n >= 1.

    kinds: "constant" (mu), "inverse_sqrt" (mu / sqrt(n)), "pegasos"
    (1 / (lam * n), which with the regularized hinge loss reproduces the
    Pegasos update).
    """

    kind: str
    mu: float = 1.0
    lam: float = 0.0

    def __post_init__(self):
        if self.kind not in ("constant", "inverse_sqrt", "pegasos"):
            raise ValueError(f"unknown schedule {self.kind!r}")
        if self.kind == "pegasos":
            if self.lam <= 0:
                raise ValueError("pegasos schedule requires a positive lam")
        elif self.mu <= 0:
            raise ValueError(f"step size must be positive, got {self.mu}")

    def rate(self, n: int) -> float:
        if n < 1:
            raise ValueError(f"iterations count from 1, got {n}")
        if self.kind == "constant":
            return self.mu
        if self.kind == "inverse_sqrt":
            return self.mu / np.sqrt(n)
        return 1.0 / (self.lam * n)


@dataclass
class NetworkState:
    """Stacked per-node parameters (one row each) after ``iteration`` updates."""

    thetas: np.ndarray
    iteration: int = 0


def combine(A: np.ndarray, thetas: np.ndarray) -> np.ndarray:
    """Neighborhood averaging: row k of the result is sum_l A[k, l] * thetas[l]."""
    A = np.asarray(A, dtype=float)
    thetas = np.asarray(thetas, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1] or A.shape[0] != thetas.shape[0]:
        raise ValueError(f"combination matrix {A.shape} does not match {thetas.shape[0]} nodes")
    return A @ thetas


def adapt(psi: np.ndarray, z: np.ndarray, y: float, loss: LossModel, mu: float) -> np.ndarray:
    """One stochastic step from the combined iterate: psi - mu * grad."""
    if mu <= 0:
        raise ValueError(f"step size must be positive, got {mu}")
    return psi - mu * loss.evaluate(z, y, psi).grad


@dataclass
class MetricsTrace:
    """Per-iteration diagnostics of one run.

    Columns are aligned with ``iterations`` and hold NaN where a metric was
    not evaluated.  ``psi_loss_sum`` is kept at full resolution (one entry per
    iteration, summed over nodes, evaluated at the combined iterate) because
    regret analysis needs every term.
    """

    iterations: np.ndarray
    network_mse: np.ndarray
    disagreement: np.ndarray
    test_error: np.ndarray
    regret: np.ndarray
    psi_loss_sum: np.ndarray
    final: NetworkState
    max_theta_norm: float
    dict_size: np.ndarray | None = None

    def to_csv(self, path) -> None:
        cols = ["iteration", "network_mse", "network_mse_db", "disagreement",
                "test_error", "regret"]
        if self.dict_size is not None:
            cols.append("dict_size")
        with np.errstate(divide="ignore", invalid="ignore"):
            mse_db = 10.0 * np.log10(self.network_mse)

        def cell(v) -> str:
            return repr(float(v)) if np.isfinite(v) else ""

        lines = [",".join(cols)]
        for i, n in enumerate(self.iterations):
            row = [str(int(n)), cell(self.network_mse[i]), cell(mse_db[i]),
                   cell(self.disagreement[i]), cell(self.test_error[i]),
                   cell(self.regret[i])]
            if self.dict_size is not None:
                row.append(str(int(self.dict_size[i])))
            lines.append(",".join(row))
        with open(path, "w") as fh:
            fh.write("\n".join(lines) + "\n")


def _recorded_iterations(horizon: int, metric_every: int | None) -> np.ndarray:
    if metric_every is None:
        metric_every = max(1, -(-horizon // 20000))
    if metric_every < 1:
        raise ValueError(f"metric cadence must be >= 1, got {metric_every}")
    recorded = np.arange(metric_every, horizon + 1, metric_every)
    if recorded.size == 0 or recorded[0] != 1:
        recorded = np.concatenate(([1], recorded))
    if recorded[-1] != horizon:
        recorded = np.concatenate((recorded, [horizon]))
    return recorded


def run_diffusion(
    fmap: FeatureMap,
    A: np.ndarray,
    streams: Sequence,
    loss: LossModel,
    schedule: StepSchedule,
    horizon: int,
    *,
    metric_every: int | None = None,
    test_hook: Callable[[np.ndarray], float] | None = None,
    test_every: int | None = None,
) -> MetricsTrace:
    """Run synchronous combine-then-adapt rounds over a network.

    Parameters
    ----------
    fmap : FeatureMap
        Shared by every node (all nodes use the same seed).
    A : ndarray (K, K)
        Combination weights; row k holds node k's neighborhood weights.
    streams : sequence of K sample streams
        Each with arrays ``xs`` (n, d) and ``ys`` (n,); node k consumes its
        stream in order, one sample per iteration, and must hold at least
        ``horizon`` samples.
    loss, schedule : update rule pieces.
    horizon : int
        Number of iterations, counted from 1.
    metric_every : record cadence for the trace (default keeps at most ~20k rows).
    test_hook : optional callable on the stacked parameters returning a test
        metric; evaluated at recorded iterations allowed by ``test_every``
        (default: only at the final iteration).  Exceptions propagate.
    """
    A = np.asarray(A, dtype=float)
    K = A.shape[0]
    if A.shape != (K, K):
        raise ValueError(f"combination matrix must be square, got {A.shape}")
    if len(streams) != K:
        raise ValueError(f"{len(streams)} streams for {K} nodes")
    if horizon < 1:
        raise ValueError(f"horizon must be >= 1, got {horizon}")
    for k, s in enumerate(streams):
        if len(s.ys) < horizon:
            raise RuntimeError(
                f"stream of node {k} exhausted: {len(s.ys)} samples < horizon {horizon}"
            )
        if s.xs.shape[1] != fmap.dim_in:
            raise ValueError(
                f"stream of node {k} has inputs of width {s.xs.shape[1]}, map expects {fmap.dim_in}"
            )

    D = fmap.dim_out
    thetas = np.zeros((K, D))
    recorded = _recorded_iterations(horizon, metric_every)
    rec_set = set(int(n) for n in recorded)
    m = recorded.size
    out_mse = np.full(m, np.nan)
    out_dis = np.full(m, np.nan)
    out_test = np.full(m, np.nan)
    out_regret = np.full(m, np.nan)
    psi_loss = np.empty(horizon)
    max_norm = 0.0
    squared = loss.kind == "squared"
    lam = loss.lam

    # With A = I the combine step is skipped outright so that every node's
    # trajectory is bit-identical to running that node on its own.
    identity_mix = np.array_equal(A, np.eye(K))

    row = 0
    with np.errstate(over="ignore", invalid="ignore"):
        for n in range(1, horizon + 1):
            X = np.stack([s.xs[n - 1] for s in streams])
            y = np.array([s.ys[n - 1] for s in streams], dtype=float)
            Z = transform_batch(fmap, X)
            mu_n = schedule.rate(n)
            psi = thetas if identity_mix else A @ thetas
            pred = np.einsum("kd,kd->k", psi, Z)
            if squared:
                err = y - pred
                psi_loss[n - 1] = 0.5 * float(err @ err)
                thetas = psi + mu_n * err[:, None] * Z
            else:
                gap = 1.0 - y * pred
                active = gap > 0.0
                sq_norms = np.einsum("kd,kd->k", psi, psi)
                psi_loss[n - 1] = float(
                    0.5 * lam * sq_norms.sum() + np.sum(gap[active])
                )
                thetas = (1.0 - mu_n * lam) * psi + mu_n * (active * y)[:, None] * Z
            norms = np.sqrt(np.einsum("kd,kd->k", thetas, thetas))
            cap = float(np.max(norms))
            if cap > max_norm:
                max_norm = cap
            if n in rec_set:
                if squared:
                    out_mse[row] = float(np.mean(err * err))
                out_dis[row] = disagreement(thetas)
                if test_hook is not None and (
                    n == horizon or (test_every is not None and n % test_every == 0)
                ):
                    out_test[row] = test_hook(thetas)
                row += 1

    return MetricsTrace(
        iterations=recorded,
        network_mse=out_mse,
        disagreement=out_dis,
        test_error=out_test,
        regret=out_regret,
        psi_loss_sum=psi_loss,
        final=NetworkState(thetas=thetas, iteration=horizon),
        max_theta_norm=max_norm,
    )


def run_single(
    fmap: FeatureMap,
    stream,
    loss: LossModel,
    schedule: StepSchedule,
    horizon: int,
    *,
    metric_every: int | None = None,
    test_hook: Callable[[np.ndarray], float] | None = None,
    test_every: int | None = None,
) -> MetricsTrace:
    """Single learner, no network: the K=1 diffusion loop verbatim."""
    return run_diffusion(
        fmap, np.ones((1, 1)), [stream], loss, schedule, horizon,
        metric_every=metric_every, test_hook=test_hook, test_every=test_every,
    )
