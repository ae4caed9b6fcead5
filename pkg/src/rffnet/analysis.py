"""Numerical verification toolkit: feature second moments, stability, regret.

This module carries the theory side of the package: closed forms for the
feature covariance under Gaussian inputs, the mean and mean-square stability
conditions of the networked recursion, the steady-state error of the
single-node filter, and empirical regret against a fixed comparator.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .features import FeatureMap, transform_batch
from .losses import LossModel


# ---------------------------------------------------------------------------
# feature second moments


def rzz_closed_form(fmap: FeatureMap, sigma_x: float) -> np.ndarray:
    """Exact E[z(x) z(x)^T] for x ~ N(0, sigma_x^2 I).

    Expanding the product of two cosines and using
    E[cos(w.x + phi)] = cos(phi) exp(-||w||^2 sigma_x^2 / 2) gives entries

        (1/D) [ exp(-||w_i - w_j||^2 s^2/2) cos(b_i - b_j)
              + exp(-||w_i + w_j||^2 s^2/2) cos(b_i + b_j) ].
    """
    if sigma_x <= 0:
        raise ValueError(f"input scale must be positive, got {sigma_x}")
    W = fmap.omegas
    b = fmap.phases
    G = W @ W.T
    nrm2 = np.diag(G).copy()
    d2_minus = nrm2[:, None] + nrm2[None, :] - 2.0 * G
    d2_plus = nrm2[:, None] + nrm2[None, :] + 2.0 * G
    np.maximum(d2_minus, 0.0, out=d2_minus)
    s2 = sigma_x * sigma_x
    R = (
        np.exp(-0.5 * s2 * d2_minus) * np.cos(b[:, None] - b[None, :])
        + np.exp(-0.5 * s2 * d2_plus) * np.cos(b[:, None] + b[None, :])
    ) / fmap.dim_out
    return 0.5 * (R + R.T)


def rzz_monte_carlo(
    fmap: FeatureMap,
    sigma_x: float,
    n_samples: int,
    seed: int,
    chunk_size: int = 200_000,
) -> np.ndarray:
    """Empirical feature second moment over n_samples Gaussian inputs."""
    if sigma_x <= 0:
        raise ValueError(f"input scale must be positive, got {sigma_x}")
    if n_samples < 1:
        raise ValueError(f"need at least one sample, got {n_samples}")
    rng = np.random.default_rng(seed)
    D = fmap.dim_out
    acc = np.zeros((D, D))
    done = 0
    while done < n_samples:
        m = min(chunk_size, n_samples - done)
        X = rng.normal(0.0, sigma_x, size=(m, fmap.dim_in))
        Z = transform_batch(fmap, X)
        acc += Z.T @ Z
        done += m
    return acc / n_samples


def theta_opt(fmap: FeatureMap, centers: np.ndarray, coeffs: np.ndarray) -> np.ndarray:
    """Feature-space image of a kernel expansion: sum_m coeffs[m] z(centers[m])."""
    centers = np.atleast_2d(np.asarray(centers, dtype=float))
    coeffs = np.asarray(coeffs, dtype=float).ravel()
    if centers.shape[0] != coeffs.size:
        raise ValueError(f"{centers.shape[0]} centers but {coeffs.size} coefficients")
    return transform_batch(fmap, centers).T @ coeffs


def mean_convergence_bound(R: np.ndarray, tol: float = 1e-10) -> tuple[float, np.ndarray]:
    """Largest stable constant step for the averaged recursion: 2 / lambda_max.

    Returns (mu_max, eigenvalues ascending).  ``R`` must be symmetric.
    """
    R = np.asarray(R, dtype=float)
    if R.ndim != 2 or R.shape[0] != R.shape[1]:
        raise ValueError(f"expected a square matrix, got {R.shape}")
    scale = max(1.0, float(np.max(np.abs(R))))
    if float(np.max(np.abs(R - R.T))) > tol * scale:
        raise ValueError("matrix is not symmetric")
    eig = np.linalg.eigvalsh(R)
    lam_max = float(eig[-1])
    if lam_max <= 0:
        raise ValueError(f"largest eigenvalue must be positive, got {lam_max}")
    return 2.0 / lam_max, eig


# ---------------------------------------------------------------------------
# block matrices and the mean-square stability operator


@dataclass(frozen=True, eq=False)
class BlockMatrix:
    """Dense matrix carrying a block partition of uniform block shape."""

    data: np.ndarray
    block_shape: tuple[int, int]

    def __post_init__(self):
        p, q = self.block_shape
        if self.data.ndim != 2:
            raise ValueError(f"expected a matrix, got shape {self.data.shape}")
        if p < 1 or q < 1 or self.data.shape[0] % p or self.data.shape[1] % q:
            raise ValueError(
                f"block shape {self.block_shape} does not tile {self.data.shape}"
            )

    @property
    def grid(self) -> tuple[int, int]:
        p, q = self.block_shape
        return self.data.shape[0] // p, self.data.shape[1] // q

    def block(self, k: int, l: int) -> np.ndarray:
        p, q = self.block_shape
        return self.data[k * p : (k + 1) * p, l * q : (l + 1) * q]


def vecbr(bm: BlockMatrix) -> np.ndarray:
    """Block-row vectorization: walk grid cells row by row, vec each block.

    Within a block the usual column-stacking vec applies; that convention is
    what makes vecbr(D C E^T) = block_kron(E, D') @ vecbr(C) hold exactly,
    with D' the block partition of D.
    """
    K, L = bm.grid
    p, q = bm.block_shape
    return bm.data.reshape(K, p, L, q).transpose(0, 2, 3, 1).reshape(-1)


def block_kron(left: np.ndarray, right: BlockMatrix) -> BlockMatrix:
    """Unbalanced Kronecker product: grid cell (k, l) is left kron right.block(k, l)."""
    left = np.asarray(left, dtype=float)
    if left.ndim != 2:
        raise ValueError(f"left factor must be a matrix, got shape {left.shape}")
    K, L = right.grid
    p, q = right.block_shape
    m, n = left.shape
    Cb = right.data.reshape(K, p, L, q)
    out = np.einsum("xy,kilj->kxilyj", left, Cb).reshape(K * m * p, L * n * q)
    return BlockMatrix(data=out, block_shape=(m * p, n * q))


@dataclass(frozen=True)
class StabilityReport:
    """Mean and mean-square stability of the networked recursion at a given step size."""

    mu_max_mean: float
    spectral_radius_ms: float
    stable_mean: bool
    stable_ms: bool

    def format(self) -> str:
        return (
            f"mu_max_mean={self.mu_max_mean!r}\n"
            f"spectral_radius_ms={self.spectral_radius_ms!r}\n"
            f"stable_mean={int(self.stable_mean)}\n"
            f"stable_ms={int(self.stable_ms)}\n"
        )


def ms_stability_check(
    rzz: np.ndarray, A: np.ndarray, mu: float, max_dim: int = 64
) -> StabilityReport:
    """Evaluate both stability conditions for a network with feature moment ``rzz``.

    Mean stability holds for 0 < mu < 2 / lambda_max(rzz).  Mean-square
    stability requires spectral radius below one for

        (I - mu (R (x) I + I (x) R)) (A (x) A)

    in the block-Kronecker sense, with R = I_K kron rzz and the network
    matrix lifted as A kron I_D.  The operator is (K D)^2 square, so K*D is
    capped at ``max_dim``.
    """
    rzz = np.asarray(rzz, dtype=float)
    A = np.asarray(A, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ValueError(f"combination matrix must be square, got {A.shape}")
    if mu < 0:
        raise ValueError(f"step size must be nonnegative, got {mu}")
    mu_max_mean, _ = mean_convergence_bound(rzz)
    K = A.shape[0]
    D = rzz.shape[0]
    if K * D > max_dim:
        raise ValueError(
            f"operator would be {(K * D) ** 2} square; K*D={K * D} exceeds cap {max_dim}"
        )
    R_big = np.kron(np.eye(K), rzz)
    A_big = np.kron(A, np.eye(D))
    blocks = (D, D)
    eye_bm = BlockMatrix(np.eye(K * D), blocks)
    R_bm = BlockMatrix(R_big, blocks)
    A_bm = BlockMatrix(A_big, blocks)
    T = (
        np.eye((K * D) ** 2)
        - mu * (block_kron(R_big, eye_bm).data + block_kron(np.eye(K * D), R_bm).data)
    ) @ block_kron(A_big, A_bm).data
    rho = float(np.max(np.abs(np.linalg.eigvals(T))))
    return StabilityReport(
        mu_max_mean=mu_max_mean,
        spectral_radius_ms=rho,
        stable_mean=bool(0.0 < mu < mu_max_mean),
        stable_ms=bool(rho < 1.0),
    )


def covariance_recursion_step(
    B: np.ndarray, A_big: np.ndarray, R_big: np.ndarray, mu: float, sigma_eta: float
) -> np.ndarray:
    """One step of the network error-covariance recursion.

    B' = A B A^T - mu (A B A^T) R - mu R (A B A^T) + mu^2 sigma_eta^2 R,
    with all factors dense (K D) x (K D).
    """
    B = np.asarray(B, dtype=float)
    A_big = np.asarray(A_big, dtype=float)
    R_big = np.asarray(R_big, dtype=float)
    if B.shape != A_big.shape or B.shape != R_big.shape or B.ndim != 2:
        raise ValueError(
            f"shape mismatch: B {B.shape}, A {A_big.shape}, R {R_big.shape}"
        )
    ABA = A_big @ B @ A_big.T
    return ABA - mu * (ABA @ R_big) - mu * (R_big @ ABA) + mu * mu * sigma_eta * sigma_eta * R_big


# ---------------------------------------------------------------------------
# single-node steady state


@dataclass(frozen=True)
class SteadyStateMSE:
    """Fixed point of the single-node weight-error covariance recursion."""

    mse: float
    mse_iterated: float
    n_iterations: int
    converged: bool
    trace_rzz: float


def steady_state_mse(
    rzz: np.ndarray,
    mu: float,
    sigma_eta: float,
    tol: float = 1e-12,
    max_iter: int = 10**6,
) -> SteadyStateMSE:
    """Predicted steady-state MSE of the single-node constant-step filter.

    The covariance recursion A' = A - mu (R A + A R) + mu^2 sigma_eta^2 R has
    the exact fixed point (mu sigma_eta^2 / 2) I, giving

        MSE = sigma_eta^2 (1 + (mu / 2) tr R).

    The same recursion is also run from zero until the Frobenius change drops
    below ``tol`` (or ``max_iter`` steps).  Started from zero it stays
    diagonal in the eigenbasis of R, where each mode evolves geometrically:
    a_i(n) = (mu sigma_eta^2 / 2)(1 - (1 - 2 mu lambda_i)^n).  The step-n
    change is exactly mu^2 sigma_eta^2 lambda_i (1 - 2 mu lambda_i)^n per
    mode, monotone in n, so the literal iteration count is found by bisection
    and the iterate evaluated there in closed form.  Requires
    0 < mu < 1 / lambda_max.
    """
    R = np.asarray(rzz, dtype=float)
    lam = np.linalg.eigvalsh(0.5 * (R + R.T))
    lam_max = float(lam[-1])
    if lam_max <= 0:
        raise ValueError(f"largest eigenvalue must be positive, got {lam_max}")
    if not (0.0 < mu < 1.0 / lam_max):
        raise ValueError(f"step size {mu} outside (0, {1.0 / lam_max})")
    if sigma_eta < 0:
        raise ValueError(f"noise level must be >= 0, got {sigma_eta}")
    # eigenvalues of a symmetric PSD moment matrix: tiny negatives are noise
    lam = np.maximum(lam, 0.0)
    trace = float(lam.sum())
    closed = sigma_eta * sigma_eta * (1.0 + 0.5 * mu * trace)

    c = mu * mu * sigma_eta * sigma_eta * lam  # per-mode step-n change is c * decay^n
    decay = np.abs(1.0 - 2.0 * mu * lam)

    def change_norm(n: int) -> float:
        with np.errstate(under="ignore"):
            terms = c * decay**n
        return float(np.sqrt(np.sum(terms * terms)))

    if change_norm(0) < tol:
        n_star, converged = 1, True
    elif change_norm(max_iter - 1) >= tol:
        n_star, converged = max_iter, False
    else:
        lo, hi = 0, max_iter - 1  # change at lo >= tol, change at hi < tol
        while hi - lo > 1:
            mid = (lo + hi) // 2
            if change_norm(mid) < tol:
                hi = mid
            else:
                lo = mid
        n_star, converged = hi + 1, True  # steps taken include the sub-tol one
    with np.errstate(under="ignore"):
        factors = (1.0 - 2.0 * mu * lam) ** n_star
        a_n = 0.5 * mu * sigma_eta * sigma_eta * (1.0 - factors)
        # Remaining distance of the iterate from its limit, mode by mode; the
        # identity iterated + tail = closed holds exactly and cross-checks the
        # two evaluation paths in every regime, capped runs included.
        tail = 0.5 * mu * sigma_eta * sigma_eta * float(lam @ factors)
    iterated = sigma_eta * sigma_eta + float(lam @ a_n)
    if abs(iterated + tail - closed) > 1e-10 * max(1.0, abs(closed)):
        raise RuntimeError(
            f"fixed-point paths disagree: closed {closed!r} vs iterated "
            f"{iterated!r} with remaining tail {tail!r}"
        )
    return SteadyStateMSE(
        mse=closed,
        mse_iterated=iterated,
        n_iterations=n_star,
        converged=converged,
        trace_rzz=trace,
    )


# ---------------------------------------------------------------------------
# regret


def fit_comparator(
    fmap: FeatureMap,
    streams: Sequence,
    loss: LossModel,
    horizon: int,
    radius: float | None = None,
    iters: int = 200,
) -> np.ndarray:
    """Batch minimizer of the pooled loss over every node's first ``horizon`` samples.

    Full-gradient descent with backtracking from zero; the result is
    projected onto the ball of the given radius when one is supplied.
    """
    Z = np.vstack([transform_batch(fmap, s.xs[:horizon]) for s in streams])
    y = np.concatenate([np.asarray(s.ys[:horizon], dtype=float) for s in streams])
    n = y.size

    def objective_grad(g: np.ndarray) -> tuple[float, np.ndarray]:
        pred = Z @ g
        if loss.kind == "squared":
            err = y - pred
            return 0.5 * float(err @ err) / n, -(Z.T @ err) / n
        gap = 1.0 - y * pred
        active = gap > 0.0
        value = 0.5 * loss.lam * float(g @ g) + float(np.sum(gap[active])) / n
        grad = loss.lam * g - Z.T @ (active * y) / n
        return value, grad

    g = np.zeros(fmap.dim_out)
    value, grad = objective_grad(g)
    for _ in range(iters):
        step = 1.0
        gnorm2 = float(grad @ grad)
        if gnorm2 == 0.0:
            break
        for _ in range(50):
            cand = g - step * grad
            cand_value, cand_grad = objective_grad(cand)
            if cand_value <= value - 1e-4 * step * gnorm2:
                break
            step *= 0.5
        else:
            break
        g, value, grad = cand, cand_value, cand_grad
    if radius is not None:
        norm = float(np.linalg.norm(g))
        if norm > radius > 0:
            g = g * (radius / norm)
    return g


def comparator_loss_series(
    fmap: FeatureMap,
    streams: Sequence,
    loss: LossModel,
    g: np.ndarray,
    horizon: int,
) -> np.ndarray:
    """Per-iteration loss of a fixed parameter: entry n-1 sums L(z_{k,n}, y_{k,n}, g) over nodes."""
    g = np.asarray(g, dtype=float)
    total = np.zeros(horizon)
    for s in streams:
        if len(s.ys) < horizon:
            raise RuntimeError(
                f"stream of node {s.node_id} exhausted: {len(s.ys)} < {horizon}"
            )
        Z = transform_batch(fmap, s.xs[:horizon])
        y = np.asarray(s.ys[:horizon], dtype=float)
        pred = Z @ g
        if loss.kind == "squared":
            total += 0.5 * (y - pred) ** 2
        else:
            total += 0.5 * loss.lam * float(g @ g) + np.maximum(0.0, 1.0 - y * pred)
    return total


def empirical_regret(psi_loss_sum: np.ndarray, comparator_series: np.ndarray) -> np.ndarray:
    """Cumulative regret S_N = sum_{n<=N} (network loss at psi - comparator loss)."""
    psi_loss_sum = np.asarray(psi_loss_sum, dtype=float)
    comparator_series = np.asarray(comparator_series, dtype=float)
    if psi_loss_sum.shape != comparator_series.shape:
        raise ValueError(
            f"series mismatch: {psi_loss_sum.shape} vs {comparator_series.shape}"
        )
    return np.cumsum(psi_loss_sum - comparator_series)
