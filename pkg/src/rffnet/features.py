"""Gaussian kernel and the random Fourier cosine feature map.

The map follows the classical construction of Rahimi and Recht: spectral
frequencies are drawn from the Fourier transform of the Gaussian kernel,
phases uniformly from ``[0, 2*pi)``, and inner products of the resulting
cosine features estimate kernel values without touching the kernel matrix.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

TWO_PI = 2.0 * np.pi


def gaussian_kernel(x: np.ndarray, y: np.ndarray, sigma: float) -> float:
    """Evaluate exp(-||x - y||^2 / (2 sigma^2)) for a single pair."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != y.shape or x.ndim != 1:
        raise ValueError(f"kernel arguments must be equal-length vectors, got {x.shape} and {y.shape}")
    if sigma <= 0:
        raise ValueError(f"kernel bandwidth must be positive, got {sigma}")
    diff = x - y
    return float(np.exp(-diff.dot(diff) / (2.0 * sigma * sigma)))


def gaussian_kernel_matrix(X: np.ndarray, Y: np.ndarray, sigma: float) -> np.ndarray:
    """Pairwise Gaussian kernel values between the rows of ``X`` and ``Y``.

    Parameters
    ----------
    X : ndarray (n, d)
    Y : ndarray (m, d)
    sigma : float
        Kernel bandwidth.

    Returns
    -------
    ndarray (n, m)
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    Y = np.atleast_2d(np.asarray(Y, dtype=float))
    if X.shape[1] != Y.shape[1]:
        raise ValueError(f"row dimension mismatch: {X.shape[1]} vs {Y.shape[1]}")
    if sigma <= 0:
        raise ValueError(f"kernel bandwidth must be positive, got {sigma}")
    sq = (
        np.sum(X * X, axis=1)[:, None]
        + np.sum(Y * Y, axis=1)[None, :]
        - 2.0 * (X @ Y.T)
    )
    np.maximum(sq, 0.0, out=sq)
    return np.exp(-sq / (2.0 * sigma * sigma))


@dataclass(frozen=True, eq=False)
class FeatureMap:
    """Frozen draw of spectral frequencies and phases.

    ``transform`` sends ``x`` in R^d to ``sqrt(2/D) * cos(omegas @ x + phases)``,
    so ``transform(x) @ transform(y)`` estimates the Gaussian kernel with
    bandwidth ``sigma``.  All nodes of a network share one instance (or,
    equivalently, the seed that regenerates it); instances are immutable.

    Fields
    ------
    omegas : ndarray (dim_out, dim_in)
        Frequency rows, i.i.d. N(0, sigma^-2 I).
    phases : ndarray (dim_out,)
        Phase offsets in [0, 2*pi).
    """

    omegas: np.ndarray
    phases: np.ndarray
    sigma: float
    dim_in: int
    dim_out: int
    seed: int

    def __post_init__(self):
        if self.dim_in < 1 or self.dim_out < 1:
            raise ValueError(f"dimensions must be >= 1, got d={self.dim_in}, D={self.dim_out}")
        if self.sigma <= 0:
            raise ValueError(f"kernel bandwidth must be positive, got {self.sigma}")
        if self.omegas.shape != (self.dim_out, self.dim_in):
            raise ValueError(f"omegas shape {self.omegas.shape} != {(self.dim_out, self.dim_in)}")
        if self.phases.shape != (self.dim_out,):
            raise ValueError(f"phases shape {self.phases.shape} != {(self.dim_out,)}")
        if np.any(self.phases < 0.0) or np.any(self.phases >= TWO_PI):
            raise ValueError("phases must lie in [0, 2*pi)")
        # Duplicate frequency rows would make the feature second-moment matrix
        # singular; duplicates from a degenerate draw are adjacent after a
        # lexicographic sort, so an adjacent-row check suffices at any D.
        if self.dim_out > 1:
            order = np.lexsort(self.omegas.T[::-1])
            gaps = np.diff(self.omegas[order], axis=0)
            if np.min(np.max(np.abs(gaps), axis=1)) < 1e-12:
                raise ValueError("frequency rows are not pairwise distinct")
        self.omegas.setflags(write=False)
        self.phases.setflags(write=False)

    def header(self) -> str:
        """Plain-text description sufficient to regenerate the map."""
        return (
            f"d {self.dim_in}\nD {self.dim_out}\nsigma {self.sigma!r}\nseed {self.seed}\n"
        )

    @staticmethod
    def from_header(text: str) -> "FeatureMap":
        fields = {}
        for line in text.strip().splitlines():
            key, _, value = line.strip().partition(" ")
            fields[key] = value
        try:
            return sample_feature_map(
                int(fields["d"]), int(fields["D"]), float(fields["sigma"]), int(fields["seed"])
            )
        except KeyError as missing:
            raise ValueError(f"feature map header is missing field {missing}") from None


def sample_feature_map(dim_in: int, dim_out: int, sigma: float, seed: int) -> FeatureMap:
    """Draw a feature map for the Gaussian kernel with bandwidth ``sigma``.

    Frequencies come first from the generator stream, phases second; the
    order is part of the regeneration contract used by ``FeatureMap.header``.
    """
    if dim_in < 1 or dim_out < 1:
        raise ValueError(f"dimensions must be >= 1, got d={dim_in}, D={dim_out}")
    if sigma <= 0:
        raise ValueError(f"kernel bandwidth must be positive, got {sigma}")
    rng = np.random.default_rng(seed)
    omegas = rng.normal(0.0, 1.0 / sigma, size=(dim_out, dim_in))
    phases = rng.uniform(0.0, TWO_PI, size=dim_out)
    return FeatureMap(
        omegas=omegas, phases=phases, sigma=float(sigma),
        dim_in=dim_in, dim_out=dim_out, seed=int(seed),
    )


def transform(fmap: FeatureMap, x: np.ndarray) -> np.ndarray:
    """Map a single input to its cosine feature vector of length ``dim_out``."""
    x = np.asarray(x, dtype=float)
    if x.shape != (fmap.dim_in,):
        raise ValueError(f"expected input of shape {(fmap.dim_in,)}, got {x.shape}")
    return transform_batch(fmap, x[None, :])[0]


def transform_batch(fmap: FeatureMap, X: np.ndarray) -> np.ndarray:
    """Row-wise ``transform`` for an (n, d) batch, returning (n, dim_out).

    The projection is accumulated one input coordinate at a time so each
    row's arithmetic is independent of how many rows are mapped together;
    a batch row is therefore bit-identical to mapping that row alone.
    """
    X = np.asarray(X, dtype=float)
    if X.ndim != 2 or X.shape[1] != fmap.dim_in:
        raise ValueError(f"expected batch of shape (n, {fmap.dim_in}), got {X.shape}")
    acc = X[:, 0, None] * fmap.omegas[None, :, 0]
    for j in range(1, fmap.dim_in):
        acc += X[:, j, None] * fmap.omegas[None, :, j]
    acc += fmap.phases
    scale = np.sqrt(2.0 / fmap.dim_out)
    return scale * np.cos(acc)


def approx_kernel(fmap: FeatureMap, x: np.ndarray, y: np.ndarray) -> float:
    """Feature-space estimate of the kernel value for one pair."""
    return float(transform(fmap, x) @ transform(fmap, y))


def kernel_expansion_eval(
    centers: np.ndarray, coeffs: np.ndarray, sigma: float, x: np.ndarray
) -> float | np.ndarray:
    """Evaluate sum_m coeffs[m] * k(centers[m], x).

    ``x`` may be one vector (returns a float) or a batch of rows (returns a
    vector).  An empty expansion evaluates to zero.
    """
    centers = np.atleast_2d(np.asarray(centers, dtype=float))
    coeffs = np.asarray(coeffs, dtype=float).ravel()
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    X = np.atleast_2d(x)
    if centers.shape[0] == 0 or coeffs.size == 0:
        out = np.zeros(X.shape[0])
        return float(out[0]) if single else out
    if centers.shape[0] != coeffs.size:
        raise ValueError(f"{centers.shape[0]} centers but {coeffs.size} coefficients")
    out = gaussian_kernel_matrix(X, centers, sigma) @ coeffs
    return float(out[0]) if single else out
