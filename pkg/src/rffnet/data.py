"""Synthetic sample streams, LIBSVM-format datasets, and node partitioning."""

from __future__ import annotations

import re
from dataclasses import dataclass

import numpy as np

from .features import kernel_expansion_eval


@dataclass(frozen=True, eq=False)
class SampleStream:
    """Ordered (x, y) pairs consumed by one node, one pair per iteration."""

    node_id: int
    xs: np.ndarray
    ys: np.ndarray

    def __post_init__(self):
        if self.xs.ndim != 2 or self.ys.ndim != 1 or self.xs.shape[0] != self.ys.shape[0]:
            raise ValueError(f"misaligned stream arrays: {self.xs.shape} vs {self.ys.shape}")

    def __len__(self) -> int:
        return self.ys.shape[0]


@dataclass(frozen=True, eq=False)
class Dataset:
    """Dense supervised dataset; binary labels are normalized to -1/+1."""

    X: np.ndarray
    y: np.ndarray
    name: str = ""

    def __post_init__(self):
        if self.X.ndim != 2 or self.y.ndim != 1 or self.X.shape[0] != self.y.shape[0]:
            raise ValueError(f"misaligned dataset arrays: {self.X.shape} vs {self.y.shape}")

    def __len__(self) -> int:
        return self.y.shape[0]


def _spawn_seeds(seed: int, count: int) -> list[np.random.SeedSequence]:
    return np.random.SeedSequence(seed).spawn(count)


def gen_kernel_expansion_stream(
    n_nodes: int,
    n_per_node: int,
    seed: int,
    *,
    dim: int = 5,
    n_centers: int = 10,
    sigma: float = 5.0,
    sigma_x: float = 1.0,
    sigma_eta: float = 0.1,
    coeff_std: float = 5.0,
) -> tuple[list[SampleStream], np.ndarray, np.ndarray]:
    """Streams whose targets are a noisy fixed Gaussian-kernel expansion.

    One expansion (centers and coefficients) is drawn per call and shared by
    all nodes; inputs are N(0, sigma_x^2 I) and targets get N(0, sigma_eta^2)
    noise.  Returns (streams, centers, coeffs) so the expansion itself is
    available to analysis.
    """
    if n_nodes < 1 or n_per_node < 1 or n_centers < 1:
        raise ValueError("node, sample and center counts must be >= 1")
    expansion_seq, *node_seqs = _spawn_seeds(seed, n_nodes + 1)
    rng = np.random.default_rng(expansion_seq)
    centers = rng.normal(0.0, sigma_x, size=(n_centers, dim))
    coeffs = rng.normal(0.0, coeff_std, size=n_centers)
    streams = []
    for k, seq in enumerate(node_seqs):
        rng = np.random.default_rng(seq)
        xs = rng.normal(0.0, sigma_x, size=(n_per_node, dim))
        clean = kernel_expansion_eval(centers, coeffs, sigma, xs)
        ys = clean + rng.normal(0.0, sigma_eta, size=n_per_node)
        streams.append(SampleStream(node_id=k, xs=xs, ys=ys))
    return streams, centers, coeffs


def gen_quadratic_stream(
    n_nodes: int,
    n_per_node: int,
    seed: int,
    *,
    dim: int = 5,
    sigma_eta: float = 0.05,
) -> list[SampleStream]:
    """Linear-plus-squared-term targets: y = w0.x + 0.1 (w1.x)^2 + noise.

    The direction vectors w0, w1 are one standard normal draw shared by all
    nodes; inputs are N(0, I).
    """
    if n_nodes < 1 or n_per_node < 1:
        raise ValueError("node and sample counts must be >= 1")
    model_seq, *node_seqs = _spawn_seeds(seed, n_nodes + 1)
    rng = np.random.default_rng(model_seq)
    w0 = rng.normal(size=dim)
    w1 = rng.normal(size=dim)
    streams = []
    for k, seq in enumerate(node_seqs):
        rng = np.random.default_rng(seq)
        xs = rng.normal(size=(n_per_node, dim))
        ys = xs @ w0 + 0.1 * (xs @ w1) ** 2 + rng.normal(0.0, sigma_eta, size=n_per_node)
        streams.append(SampleStream(node_id=k, xs=xs, ys=ys))
    return streams


def gen_chaotic1_stream(
    n_nodes: int,
    n_per_node: int,
    seed: int,
    *,
    sigma_u: float = 0.15,
    sigma_eta: float = 0.01,
    d_init: float = 1.0,
) -> list[SampleStream]:
    """First-order rational recursion observed through noise.

    Per node: d_1 = d_init and d_n = d_{n-1} / (1 + d_{n-1}^2) + u_{n-1}^3
    with u_n ~ N(0, sigma_u^2); observations y_n = d_n + noise.  The learner
    input is the previous observation, x_n = [y_{n-1}], so each stream emits
    pairs for n = 2 .. n_per_node + 1.
    """
    if n_nodes < 1 or n_per_node < 1:
        raise ValueError("node and sample counts must be >= 1")
    streams = []
    for k, seq in enumerate(_spawn_seeds(seed, n_nodes)):
        rng = np.random.default_rng(seq)
        total = n_per_node + 1
        u = rng.normal(0.0, sigma_u, size=total) if sigma_u > 0 else np.zeros(total)
        d = np.empty(total)
        d[0] = d_init
        for n in range(1, total):
            d[n] = d[n - 1] / (1.0 + d[n - 1] ** 2) + u[n - 1] ** 3
        eta = rng.normal(0.0, sigma_eta, size=total) if sigma_eta > 0 else np.zeros(total)
        y = d + eta
        streams.append(SampleStream(node_id=k, xs=y[:-1, None].copy(), ys=y[1:].copy()))
    return streams


def _saturation(d: np.ndarray) -> np.ndarray:
    """Piecewise output nonlinearity of the second-order benchmark recursion."""
    out = np.empty_like(d)
    pos = d >= 0
    out[pos] = d[pos] / np.sqrt(0.1 + 0.9 * d[pos] ** 2) / 3.0
    neg = ~pos
    out[neg] = -(d[neg] ** 2) * (1.0 - np.exp(0.7 * d[neg])) / 3.0
    return out


def gen_chaotic2_stream(
    n_nodes: int,
    n_per_node: int,
    seed: int,
    *,
    sigma_v2: float = 0.0156,
    sigma_eta: float = 0.001,
) -> list[SampleStream]:
    """Second-order linear recursion with a saturating output nonlinearity.

    Per node: d_n = u_n + 0.5 v_n - 0.2 d_{n-1} + 0.35 d_{n-2} with
    d_1 = d_2 = 1, where v_n is white noise of variance ``sigma_v2`` and
    u_n = 0.5 v_n + noise of the same variance; observations y_n pass d_n
    through a piecewise saturation and add N(0, sigma_eta^2).  Inputs are
    x_n = (u_n, v_n).
    """
    if n_nodes < 1 or n_per_node < 1:
        raise ValueError("node and sample counts must be >= 1")
    sigma_v = float(np.sqrt(sigma_v2))
    streams = []
    for k, seq in enumerate(_spawn_seeds(seed, n_nodes)):
        rng = np.random.default_rng(seq)
        v = rng.normal(0.0, sigma_v, size=n_per_node)
        u = 0.5 * v + rng.normal(0.0, sigma_v, size=n_per_node)
        d = np.empty(n_per_node)
        d[: min(2, n_per_node)] = 1.0
        for n in range(2, n_per_node):
            d[n] = u[n] + 0.5 * v[n] - 0.2 * d[n - 1] + 0.35 * d[n - 2]
        y = _saturation(d) + rng.normal(0.0, sigma_eta, size=n_per_node)
        streams.append(SampleStream(node_id=k, xs=np.column_stack([u, v]), ys=y))
    return streams


_LIBSVM_TOKEN = re.compile(r"^(\d+):([-+0-9.eE]+)$")


def load_libsvm(path) -> Dataset:
    """Read a LIBSVM-format file into a dense dataset.

    Lines look like ``<label> <index>:<value> ...`` with 1-based, strictly
    increasing indices; the dense width is the largest index seen.  Exactly
    two distinct labels are required and are mapped to -1/+1 (by value when
    already those, 0/1 otherwise, else by sort order).
    """
    rows: list[dict[int, float]] = []
    labels: list[float] = []
    width = 0
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split()
            try:
                label = float(parts[0])
            except ValueError:
                raise ValueError(f"{path}:{lineno}: bad label {parts[0]!r}") from None
            feats: dict[int, float] = {}
            last = 0
            for tok in parts[1:]:
                m = _LIBSVM_TOKEN.match(tok)
                if m is None:
                    raise ValueError(f"{path}:{lineno}: bad feature token {tok!r}")
                idx = int(m.group(1))
                if idx < 1 or idx <= last:
                    raise ValueError(f"{path}:{lineno}: indices must be 1-based and increasing")
                last = idx
                feats[idx] = float(m.group(2))
            width = max(width, last)
            rows.append(feats)
            labels.append(label)
    if not rows:
        raise ValueError(f"{path}: no samples")
    distinct = sorted(set(labels))
    if len(distinct) != 2:
        raise ValueError(f"{path}: expected two label values, found {distinct}")
    if distinct == [-1.0, 1.0]:
        mapping = {-1.0: -1.0, 1.0: 1.0}
    elif distinct == [0.0, 1.0]:
        mapping = {0.0: -1.0, 1.0: 1.0}
    else:
        mapping = {distinct[0]: -1.0, distinct[1]: 1.0}
    X = np.zeros((len(rows), width))
    for i, feats in enumerate(rows):
        for idx, value in feats.items():
            X[i, idx - 1] = value
    y = np.array([mapping[l] for l in labels])
    return Dataset(X=X, y=y)


def save_libsvm(path, dataset: Dataset) -> None:
    """Write a dataset in LIBSVM format (all features, 1-based indices)."""
    with open(path, "w") as fh:
        for x, label in zip(dataset.X, dataset.y):
            toks = [f"{int(label):+d}"] + [
                f"{j + 1}:{v:.6g}" for j, v in enumerate(x) if v != 0.0
            ]
            fh.write(" ".join(toks) + "\n")


def partition_dataset(dataset: Dataset, n_nodes: int, seed: int) -> list[SampleStream]:
    """Shuffle rows and split them into equal contiguous chunks, one per node.

    The remainder after dividing by ``n_nodes`` is dropped.
    """
    n = len(dataset)
    if n_nodes < 1:
        raise ValueError(f"need at least one node, got {n_nodes}")
    if n_nodes > n:
        raise ValueError(f"cannot split {n} samples across {n_nodes} nodes")
    rng = np.random.default_rng(seed)
    perm = rng.permutation(n)
    chunk = n // n_nodes
    streams = []
    for k in range(n_nodes):
        idx = perm[k * chunk : (k + 1) * chunk]
        streams.append(SampleStream(node_id=k, xs=dataset.X[idx].copy(), ys=dataset.y[idx].copy()))
    return streams


def train_test_split(dataset: Dataset, n_train: int) -> tuple[Dataset, Dataset]:
    """First ``n_train`` rows for training, the rest held out."""
    if not (0 < n_train < len(dataset)):
        raise ValueError(f"train size {n_train} out of range for {len(dataset)} samples")
    return (
        Dataset(X=dataset.X[:n_train], y=dataset.y[:n_train], name=dataset.name),
        Dataset(X=dataset.X[n_train:], y=dataset.y[n_train:], name=dataset.name),
    )


def make_banana_dataset(n_samples: int = 5300, seed: int = 20130527) -> Dataset:
    """Two interleaved banana-shaped classes in the plane.

    Each class lies on an arc of radius five with Gaussian spread, the arcs
    shifted against each other so the pockets overlap; features are then
    standardized.  Class priors are roughly 45/55.
    """
    if n_samples < 2:
        raise ValueError("need at least two samples")
    rng = np.random.default_rng(seed)
    radius, spread, offset = 5.0, 3.6, 0.5
    y = np.where(rng.random(n_samples) < 0.448, 1.0, -1.0)
    ang = np.empty(n_samples)
    pos = y > 0
    ang[pos] = rng.uniform(-np.pi / 2, np.pi / 2, size=int(pos.sum()))
    ang[~pos] = rng.uniform(np.pi / 2, 3 * np.pi / 2, size=int((~pos).sum()))
    X = np.column_stack([radius * np.cos(ang), radius * np.sin(ang)])
    X[~pos] += np.array([-offset * radius, -offset * radius * 0.4])
    X += rng.normal(0.0, spread, size=X.shape)
    X = (X - X.mean(axis=0)) / X.std(axis=0)
    return Dataset(X=X, y=y, name="banana")


def make_waveform_dataset(n_samples: int = 5000, seed: int = 19840101) -> Dataset:
    """Breiman's waveform data, binarized as wave 0 against waves 1 and 2.

    Each sample mixes two of three triangular base waveforms on 21 points
    with uniform weight and adds unit Gaussian noise.
    """
    if n_samples < 2:
        raise ValueError("need at least two samples")
    rng = np.random.default_rng(seed)
    t = np.arange(1, 22, dtype=float)
    base = np.stack([
        np.maximum(6.0 - np.abs(t - 7.0), 0.0),
        np.maximum(6.0 - np.abs(t - 15.0), 0.0),
        np.maximum(6.0 - np.abs(t - 11.0), 0.0),
    ])
    pair_of = {0: (0, 1), 1: (0, 2), 2: (1, 2)}
    cls = rng.integers(0, 3, size=n_samples)
    w = rng.uniform(0.0, 1.0, size=n_samples)
    X = np.empty((n_samples, 21))
    for i in range(n_samples):
        a, b = pair_of[int(cls[i])]
        X[i] = w[i] * base[a] + (1.0 - w[i]) * base[b]
    X += rng.normal(size=X.shape)
    y = np.where(cls == 0, 1.0, -1.0)
    return Dataset(X=X, y=y, name="waveform")
