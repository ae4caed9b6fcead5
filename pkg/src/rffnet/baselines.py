"""Growing-dictionary kernel LMS and its quantized variant.

These single-node baselines keep the classical expansion f = sum_i a_i k(c_i, .)
instead of a fixed feature vector, so their state grows with the data unless
quantization merges nearby inputs.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .learners import MetricsTrace, NetworkState


@dataclass
class Dictionary:
    """Kernel expansion state: centers, coefficients, bandwidth, merge radius.

    ``quantization`` is the Euclidean radius within which a new input is
    merged into its nearest center instead of being inserted; zero keeps
    every distinct input.
    """

    sigma: float
    quantization: float = 0.0
    centers: np.ndarray = field(default=None)  # (M, d)
    coeffs: np.ndarray = field(default=None)   # (M,)

    def __post_init__(self):
        if self.sigma <= 0:
            raise ValueError(f"kernel bandwidth must be positive, got {self.sigma}")
        if self.quantization < 0:
            raise ValueError(f"merge radius must be >= 0, got {self.quantization}")
        if self.centers is None:
            self.centers = np.zeros((0, 0))
        if self.coeffs is None:
            self.coeffs = np.zeros(0)
        if self.centers.shape[0] != self.coeffs.shape[0]:
            raise ValueError("centers and coefficients differ in length")

    @property
    def size(self) -> int:
        return self.coeffs.shape[0]


def klms_predict(dic: Dictionary, x: np.ndarray) -> float:
    """Evaluate the expansion at ``x``; an empty dictionary predicts zero."""
    x = np.asarray(x, dtype=float)
    if dic.size == 0:
        return 0.0
    diff = dic.centers - x
    k = np.exp(-np.einsum("md,md->m", diff, diff) / (2.0 * dic.sigma ** 2))
    return float(k @ dic.coeffs)


def qklms_step(dic: Dictionary, x: np.ndarray, y: float, mu: float) -> tuple[Dictionary, float]:
    """One quantized kernel LMS update; returns the dictionary and prior error.

    The prediction error is computed first; if the nearest center lies within
    the merge radius its coefficient absorbs mu * error (nearest by Euclidean
    distance, earliest insertion winning ties), otherwise (x, mu * error) is
    inserted.  With merge radius zero every distinct input is inserted, which
    reproduces the plain growing kernel LMS.
    """
    if mu <= 0:
        raise ValueError(f"step size must be positive, got {mu}")
    x = np.asarray(x, dtype=float)
    err = y - klms_predict(dic, x)
    if dic.size > 0:
        diff = dic.centers - x
        dists = np.sqrt(np.einsum("md,md->m", diff, diff))
        j = int(np.argmin(dists))
        if dists[j] <= dic.quantization:
            dic.coeffs[j] += mu * err
            return dic, float(err)
    if dic.size == 0:
        dic.centers = x[None, :].copy()
        dic.coeffs = np.array([mu * err])
    else:
        dic.centers = np.vstack([dic.centers, x[None, :]])
        dic.coeffs = np.append(dic.coeffs, mu * err)
    return dic, float(err)


def run_kernel_lms(
    stream,
    sigma: float,
    quantization: float,
    mu: float,
    horizon: int,
    *,
    metric_every: int | None = None,
) -> MetricsTrace:
    """Run (quantized) kernel LMS over one stream, tracing MSE and dictionary size."""
    from .learners import _recorded_iterations

    if horizon < 1:
        raise ValueError(f"horizon must be >= 1, got {horizon}")
    if len(stream.ys) < horizon:
        raise RuntimeError(
            f"stream exhausted: {len(stream.ys)} samples < horizon {horizon}"
        )
    dic = Dictionary(sigma=sigma, quantization=quantization)
    recorded = _recorded_iterations(horizon, metric_every)
    rec_set = set(int(n) for n in recorded)
    m = recorded.size
    out_mse = np.full(m, np.nan)
    out_size = np.zeros(m)
    psi_loss = np.empty(horizon)
    row = 0
    for n in range(1, horizon + 1):
        dic, err = qklms_step(dic, stream.xs[n - 1], float(stream.ys[n - 1]), mu)
        psi_loss[n - 1] = 0.5 * err * err
        if n in rec_set:
            out_mse[row] = err * err
            out_size[row] = dic.size
            row += 1
    nan = np.full(m, np.nan)
    return MetricsTrace(
        iterations=recorded,
        network_mse=out_mse,
        disagreement=np.zeros(m),
        test_error=nan.copy(),
        regret=nan.copy(),
        psi_loss_sum=psi_loss,
        final=NetworkState(thetas=dic.coeffs[None, :].copy(), iteration=horizon),
        max_theta_norm=float(np.linalg.norm(dic.coeffs)),
        dict_size=out_size,
    )
