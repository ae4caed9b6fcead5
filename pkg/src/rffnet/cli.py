"""Config-driven experiment runner.

Experiments are described by flat plain-text files of ``key = value`` lines
(``#`` starts a comment line; nested parameters use dotted keys such as
``data.sigma_eta``).  The ``run`` subcommand executes the configured number
of independent realizations, writes one trace CSV per realization plus an
aggregate ``summary.csv``, and is byte-reproducible for a fixed config and
master seed.  ``list`` names the bundled example configs and ``analyze``
prints the step-size stability report implied by a config.

Exit codes: 0 on success, 2 for configuration errors, 3 for missing or
malformed data.
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np

from .analysis import (
    StabilityReport,
    mean_convergence_bound,
    ms_stability_check,
    rzz_closed_form,
)
from .baselines import run_kernel_lms
from .data import (
    Dataset,
    SampleStream,
    gen_chaotic1_stream,
    gen_chaotic2_stream,
    gen_kernel_expansion_stream,
    gen_quadratic_stream,
    load_libsvm,
    make_banana_dataset,
    make_waveform_dataset,
    partition_dataset,
    train_test_split,
)
from .features import sample_feature_map, transform_batch
from .learners import MetricsTrace, StepSchedule, run_diffusion
from .losses import make_loss
from .network import metropolis_weights, random_connected_graph


class ConfigError(ValueError):
    """Unparsable, unknown, or mutually inconsistent configuration."""


class DataError(RuntimeError):
    """A referenced dataset is missing or malformed."""


LEARNERS = ("dklms", "pegasos", "rff_okl", "qklms", "klms")
NETWORK_LEARNERS = ("dklms", "pegasos")
FEATURE_LEARNERS = ("dklms", "pegasos", "rff_okl")
DICTIONARY_LEARNERS = ("qklms", "klms")
STREAM_SOURCES = ("kernel_expansion", "quadratic", "chaotic1", "chaotic2")
DATASET_SOURCES = ("banana", "waveform", "libsvm")

_GENERATOR_PARAMS = {
    "kernel_expansion": ("dim", "n_centers", "sigma", "sigma_x", "sigma_eta", "coeff_std"),
    "quadratic": ("dim", "sigma_eta"),
    "chaotic1": ("sigma_u", "sigma_eta", "d_init"),
    "chaotic2": ("sigma_v2", "sigma_eta"),
}

_SOURCE_DIM_IN = {"chaotic1": 1, "chaotic2": 2, "banana": 2, "waveform": 21}


@dataclass
class ExperimentConfig:
    """One experiment: learner, network, kernel, data source, and run sizes."""

    experiment: str = ""
    learner: str = ""
    graph: str = "random"
    graph_k: int = 1
    p_attach: float = 0.2
    sigma: float = 0.0
    dim_features: int = 0
    quantization: float = 0.0
    loss_kind: str = ""
    lam: float = 0.0
    schedule_kind: str = ""
    mu: float = 1.0
    schedule_lam: float = -1.0
    source: str = ""
    data_path: str = ""
    data_params: dict = field(default_factory=dict)
    n_samples: int = 0
    n_train: int = 0
    n_test: int = 0
    horizon: int = 0
    epochs: int = 1
    realizations: int = 20
    seed: int = 0
    metric_every: int = 0
    out: str = ""

    @property
    def n_nodes(self) -> int:
        return self.graph_k if self.learner in NETWORK_LEARNERS else 1

    def make_loss_model(self):
        return make_loss(self.loss_kind, lam=self.lam)

    def make_schedule(self) -> StepSchedule:
        return StepSchedule(self.schedule_kind, mu=self.mu, lam=self.schedule_lam)


def _to_int(v: str) -> int:
    return int(v, 10)


def _to_float(v: str) -> float:
    x = float(v)
    if not np.isfinite(x):
        raise ValueError("not finite")
    return x


def _to_str(v: str) -> str:
    if not v:
        raise ValueError("empty value")
    return v


def _choice(options):
    def conv(v: str) -> str:
        if v not in options:
            raise ValueError(f"must be one of {', '.join(options)}")
        return v

    return conv


# config key -> (ExperimentConfig attribute or "@"-prefixed data parameter, converter)
_KEYS = {
    "experiment": ("experiment", _to_str),
    "learner": ("learner", _choice(LEARNERS)),
    "graph": ("graph", _choice(("random", "identity"))),
    "graph.k": ("graph_k", _to_int),
    "graph.p_attach": ("p_attach", _to_float),
    "kernel.sigma": ("sigma", _to_float),
    "features.dim": ("dim_features", _to_int),
    "quantization": ("quantization", _to_float),
    "loss": ("loss_kind", _choice(("squared", "hinge"))),
    "loss.lam": ("lam", _to_float),
    "schedule": ("schedule_kind", _choice(("constant", "inverse_sqrt", "pegasos"))),
    "schedule.mu": ("mu", _to_float),
    "schedule.lam": ("schedule_lam", _to_float),
    "data": ("source", _choice(STREAM_SOURCES + DATASET_SOURCES)),
    "data.path": ("data_path", _to_str),
    "data.n_samples": ("n_samples", _to_int),
    "data.train": ("n_train", _to_int),
    "data.test": ("n_test", _to_int),
    "data.dim": ("@dim", _to_int),
    "data.n_centers": ("@n_centers", _to_int),
    "data.sigma": ("@sigma", _to_float),
    "data.sigma_x": ("@sigma_x", _to_float),
    "data.sigma_eta": ("@sigma_eta", _to_float),
    "data.coeff_std": ("@coeff_std", _to_float),
    "data.sigma_u": ("@sigma_u", _to_float),
    "data.sigma_v2": ("@sigma_v2", _to_float),
    "data.d_init": ("@d_init", _to_float),
    "horizon": ("horizon", _to_int),
    "epochs": ("epochs", _to_int),
    "realizations": ("realizations", _to_int),
    "seed": ("seed", _to_int),
    "metric_every": ("metric_every", _to_int),
    "out": ("out", _to_str),
}

_POSITIVE_INT_KEYS = {
    "graph.k", "features.dim", "data.n_samples", "data.train", "data.test",
    "horizon", "epochs", "realizations", "metric_every",
}


def parse_config_text(text: str) -> tuple[ExperimentConfig, set]:
    """Parse config text into an (unvalidated) config and the set of seen keys."""
    cfg = ExperimentConfig()
    seen: set = set()
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {line!r}")
        key, _, value = line.partition("=")
        key = key.strip()
        value = value.strip()
        if key not in _KEYS:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        if key in seen:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        seen.add(key)
        attr, conv = _KEYS[key]
        try:
            parsed = conv(value)
        except ValueError as exc:
            raise ConfigError(f"line {lineno}: key {key!r}: bad value {value!r} ({exc})") from exc
        if key in _POSITIVE_INT_KEYS and parsed < 1:
            raise ConfigError(f"line {lineno}: key {key!r} must be >= 1, got {parsed}")
        if key == "seed" and parsed < 0:
            raise ConfigError(f"line {lineno}: key 'seed' must be >= 0, got {parsed}")
        if attr.startswith("@"):
            cfg.data_params[attr[1:]] = parsed
        else:
            setattr(cfg, attr, parsed)
    return cfg, seen


def validate_config(cfg: ExperimentConfig, seen: set) -> ExperimentConfig:
    """Fill learner-dependent defaults and reject inconsistent settings."""
    for key, label in (("experiment", "experiment"), ("learner", "learner"), ("data", "data")):
        if key not in seen:
            raise ConfigError(f"missing required key {label!r}")
    if cfg.sigma <= 0:
        raise ConfigError("kernel.sigma is required and must be positive")

    if cfg.learner in FEATURE_LEARNERS:
        if cfg.dim_features < 1:
            raise ConfigError("features.dim is required for feature-based learners")
        if "quantization" in seen:
            raise ConfigError("quantization applies only to qklms")
    else:
        if "features.dim" in seen:
            raise ConfigError(f"features.dim is not used by {cfg.learner}")
        if cfg.learner == "klms" and "quantization" in seen:
            raise ConfigError("klms has no quantization; use qklms for q > 0")
        if cfg.quantization < 0:
            raise ConfigError("quantization must be >= 0")

    if cfg.learner in NETWORK_LEARNERS:
        if "graph.k" not in seen:
            raise ConfigError("graph.k is required for network learners")
        if not 0.0 < cfg.p_attach <= 1.0:
            raise ConfigError("graph.p_attach must lie in (0, 1]")
    else:
        for key in ("graph", "graph.k", "graph.p_attach"):
            if key in seen:
                raise ConfigError(f"{key} applies only to network learners")

    if not cfg.loss_kind:
        cfg.loss_kind = "hinge" if cfg.learner == "pegasos" else "squared"
    if cfg.learner == "pegasos" and cfg.loss_kind != "hinge":
        raise ConfigError("pegasos requires the hinge loss")
    if cfg.learner != "pegasos" and cfg.loss_kind == "hinge":
        raise ConfigError(f"{cfg.learner} requires the squared loss")
    if cfg.loss_kind == "hinge" and cfg.lam <= 0:
        raise ConfigError("hinge loss requires loss.lam > 0")

    if not cfg.schedule_kind:
        cfg.schedule_kind = "pegasos" if cfg.learner == "pegasos" else "constant"
    if cfg.schedule_lam < 0:
        cfg.schedule_lam = cfg.lam
    if cfg.schedule_kind == "pegasos" and cfg.schedule_lam <= 0:
        raise ConfigError("the pegasos schedule requires a positive schedule.lam (or loss.lam)")
    if cfg.mu <= 0:
        raise ConfigError("schedule.mu must be positive")

    if cfg.source in STREAM_SOURCES:
        if cfg.learner == "pegasos":
            raise ConfigError("pegasos needs a labeled dataset source, not a stream generator")
        if "horizon" not in seen:
            raise ConfigError("horizon is required for stream generators")
        if cfg.epochs != 1:
            raise ConfigError("epochs applies only to dataset sources")
        for key in ("data.path", "data.n_samples", "data.train", "data.test"):
            if key in seen:
                raise ConfigError(f"{key} applies only to dataset sources")
        allowed = _GENERATOR_PARAMS[cfg.source]
        for name in cfg.data_params:
            if name not in allowed:
                raise ConfigError(f"data.{name} is not a parameter of {cfg.source}")
    else:
        if cfg.learner in DICTIONARY_LEARNERS:
            raise ConfigError(f"{cfg.learner} supports stream generator sources only")
        if cfg.data_params:
            name = sorted(cfg.data_params)[0]
            raise ConfigError(f"data.{name} applies only to stream generators")
        if cfg.source == "libsvm":
            if not cfg.data_path:
                raise ConfigError("data.path is required for libsvm sources")
            if "data.n_samples" in seen:
                raise ConfigError("data.n_samples applies only to generated datasets")
        else:
            if "data.path" in seen:
                raise ConfigError("data.path applies only to libsvm sources")
            if cfg.n_samples == 0:
                cfg.n_samples = 5300 if cfg.source == "banana" else 5000
        if "data.train" not in seen:
            raise ConfigError("data.train is required for dataset sources")
        if cfg.n_samples and cfg.n_train >= cfg.n_samples:
            raise ConfigError("data.train must leave at least one test row")
        chunk = cfg.n_train // cfg.n_nodes
        if chunk < 1:
            raise ConfigError("data.train is smaller than the number of nodes")
        if cfg.horizon and cfg.horizon > chunk * cfg.epochs:
            raise ConfigError(
                f"horizon {cfg.horizon} exceeds the {chunk * cfg.epochs} samples per node"
            )
    return cfg


def load_config(path_or_name) -> ExperimentConfig:
    """Load a config from a file path or a bundled experiment name."""
    path = Path(path_or_name)
    if path.is_file():
        text = path.read_text()
    else:
        res = resources.files(__package__).joinpath("configs", f"{path_or_name}.cfg")
        if not res.is_file():
            raise ConfigError(f"config not found: {path_or_name}")
        text = res.read_text()
    cfg, seen = parse_config_text(text)
    return validate_config(cfg, seen)


def list_experiments() -> list[str]:
    """Names of the bundled experiment configs, sorted."""
    folder = resources.files(__package__).joinpath("configs")
    return sorted(p.name[: -len(".cfg")] for p in folder.iterdir() if p.name.endswith(".cfg"))


def _child_seeds(child: np.random.SeedSequence) -> tuple[int, int, int, int]:
    data_s, graph_s, map_s, part_s = (int(v) for v in child.generate_state(4, np.uint64))
    return data_s, graph_s, map_s, part_s


def _tile_stream(s: SampleStream, reps: int) -> SampleStream:
    return SampleStream(node_id=s.node_id, xs=np.tile(s.xs, (reps, 1)), ys=np.tile(s.ys, reps))


def _load_dataset(cfg: ExperimentConfig, data_seed: int) -> Dataset:
    if cfg.source == "banana":
        return make_banana_dataset(cfg.n_samples, seed=data_seed)
    if cfg.source == "waveform":
        return make_waveform_dataset(cfg.n_samples, seed=data_seed)
    try:
        return load_libsvm(cfg.data_path)
    except FileNotFoundError as exc:
        raise DataError(f"dataset file not found: {cfg.data_path}") from exc
    except ValueError as exc:
        raise DataError(f"cannot parse {cfg.data_path}: {exc}") from exc


def _build_streams(
    cfg: ExperimentConfig, data_seed: int, part_seed: int
) -> tuple[list[SampleStream], Dataset | None, int]:
    """Per-node streams, optional held-out test set, and the horizon to run."""
    K = cfg.n_nodes
    if cfg.source in STREAM_SOURCES:
        p = cfg.data_params
        if cfg.source == "kernel_expansion":
            streams, _, _ = gen_kernel_expansion_stream(K, cfg.horizon, data_seed, **p)
        elif cfg.source == "quadratic":
            streams = gen_quadratic_stream(K, cfg.horizon, data_seed, **p)
        elif cfg.source == "chaotic1":
            streams = gen_chaotic1_stream(K, cfg.horizon, data_seed, **p)
        else:
            streams = gen_chaotic2_stream(K, cfg.horizon, data_seed, **p)
        return streams, None, cfg.horizon

    ds = _load_dataset(cfg, data_seed)
    if cfg.n_train >= len(ds.y):
        raise DataError(
            f"data.train = {cfg.n_train} but {cfg.data_path or cfg.source} has {len(ds.y)} rows"
        )
    train, test = train_test_split(ds, cfg.n_train)
    if cfg.n_test:
        test = Dataset(X=test.X[: cfg.n_test], y=test.y[: cfg.n_test], name=test.name)
    streams = partition_dataset(train, K, seed=part_seed)
    if cfg.epochs > 1:
        streams = [_tile_stream(s, cfg.epochs) for s in streams]
    horizon = cfg.horizon or len(streams[0].ys)
    return streams, test, horizon


def _mixing_matrix(cfg: ExperimentConfig, graph_seed: int) -> np.ndarray:
    K = cfg.n_nodes
    if K == 1:
        return np.ones((1, 1))
    if cfg.graph == "identity":
        return np.eye(K)
    topo = random_connected_graph(K, cfg.p_attach, seed=graph_seed)
    return metropolis_weights(topo)


def _sign_error_hook(fmap, test: Dataset):
    Zt = transform_batch(fmap, test.X)
    labels = test.y[:, None]

    def hook(thetas: np.ndarray) -> float:
        preds = np.where(Zt @ thetas.T >= 0.0, 1.0, -1.0)
        return float(np.mean(preds != labels))

    return hook


def _run_realization(cfg: ExperimentConfig, child: np.random.SeedSequence) -> MetricsTrace:
    data_seed, graph_seed, map_seed, part_seed = _child_seeds(child)
    streams, test, horizon = _build_streams(cfg, data_seed, part_seed)
    metric_every = cfg.metric_every or None

    if cfg.learner in DICTIONARY_LEARNERS:
        q = cfg.quantization if cfg.learner == "qklms" else 0.0
        return run_kernel_lms(
            streams[0], cfg.sigma, q, cfg.mu, horizon, metric_every=metric_every
        )

    dim_in = streams[0].xs.shape[1]
    fmap = sample_feature_map(dim_in, cfg.dim_features, cfg.sigma, seed=map_seed)
    A = _mixing_matrix(cfg, graph_seed)
    hook = _sign_error_hook(fmap, test) if test is not None else None
    return run_diffusion(
        fmap,
        A,
        streams,
        cfg.make_loss_model(),
        cfg.make_schedule(),
        horizon,
        metric_every=metric_every,
        test_hook=hook,
    )


def _final_metric(cfg: ExperimentConfig, trace: MetricsTrace) -> tuple[str, float]:
    if cfg.source in DATASET_SOURCES:
        finite = trace.test_error[np.isfinite(trace.test_error)]
        if finite.size == 0:
            raise RuntimeError("no test evaluation was recorded")
        return "test_error", float(finite[-1])
    mse = trace.network_mse[np.isfinite(trace.network_mse)]
    if mse.size == 0:
        raise RuntimeError("no MSE values were recorded")
    window = mse[-max(1, mse.size // 10):]
    return "steady_mse_db", float(10.0 * np.log10(np.mean(window)))


def run_experiment(cfg: ExperimentConfig, out_dir: Path) -> Path:
    """Run all realizations, writing trace_r<r>.csv files and summary.csv."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    children = np.random.SeedSequence(cfg.seed).spawn(cfg.realizations)
    metric_name = ""
    values: list[float] = []
    dict_sizes: list[float] = []
    for r, child in enumerate(children, start=1):
        trace = _run_realization(cfg, child)
        trace.to_csv(out_dir / f"trace_r{r}.csv")
        metric_name, value = _final_metric(cfg, trace)
        values.append(value)
        if trace.dict_size is not None:
            dict_sizes.append(float(trace.dict_size[-1]))

    dim_col = cfg.dim_features if cfg.learner in FEATURE_LEARNERS else 0
    rows = ["experiment,learner,K,D,realizations,metric_name,mean,std"]

    def add_row(name: str, vals: list[float]) -> None:
        arr = np.asarray(vals, dtype=float)
        rows.append(
            f"{cfg.experiment},{cfg.learner},{cfg.n_nodes},{dim_col},{cfg.realizations},"
            f"{name},{float(np.mean(arr))!r},{float(np.std(arr))!r}"
        )

    add_row(metric_name, values)
    if dict_sizes:
        add_row("dict_size", dict_sizes)
    (out_dir / "summary.csv").write_text("\n".join(rows) + "\n")
    return out_dir


def _input_dim(cfg: ExperimentConfig, train: Dataset | None) -> int:
    if cfg.source in _SOURCE_DIM_IN:
        return _SOURCE_DIM_IN[cfg.source]
    if cfg.source in ("kernel_expansion", "quadratic"):
        return int(cfg.data_params.get("dim", 5))
    assert train is not None
    return train.X.shape[1]


def analyze_experiment(cfg: ExperimentConfig, ms_dim: int = 64) -> tuple[StabilityReport, int]:
    """Stability report for the config's feature moment, mixing matrix, and step size.

    The mean-stability bound uses the configured feature dimension.  The
    mean-square operator is quadratic in (nodes x features), so when the
    configured dimension would exceed ``ms_dim`` the radius is evaluated on
    a reduced feature map; the reduced dimension is returned alongside.
    """
    if cfg.learner in DICTIONARY_LEARNERS:
        raise ConfigError("analyze applies to feature-based learners only")
    children = np.random.SeedSequence(cfg.seed).spawn(1)
    data_seed, graph_seed, map_seed, part_seed = _child_seeds(children[0])

    train: Dataset | None = None
    xs: np.ndarray | None = None
    if cfg.source in DATASET_SOURCES:
        ds = _load_dataset(cfg, data_seed)
        if cfg.n_train >= len(ds.y):
            raise DataError(f"data.train = {cfg.n_train} but only {len(ds.y)} rows")
        train, _ = train_test_split(ds, cfg.n_train)
        xs = train.X
    elif cfg.source in ("chaotic1", "chaotic2"):
        streams, _, _ = _build_streams(cfg, data_seed, part_seed)
        xs = np.vstack([s.xs for s in streams])

    dim_in = _input_dim(cfg, train)
    mu = cfg.make_schedule().rate(1)

    def moment(dim_features: int) -> np.ndarray:
        fmap = sample_feature_map(dim_in, dim_features, cfg.sigma, seed=map_seed)
        if xs is None:
            sigma_x = float(cfg.data_params.get("sigma_x", 1.0))
            return rzz_closed_form(fmap, sigma_x)
        Z = transform_batch(fmap, xs)
        return (Z.T @ Z) / Z.shape[0]

    mu_max, _ = mean_convergence_bound(moment(cfg.dim_features))
    K = cfg.n_nodes
    ms_features = cfg.dim_features if K * cfg.dim_features <= ms_dim else max(1, ms_dim // K)
    if K * ms_features > ms_dim:
        raise ConfigError(f"ms-dim {ms_dim} is too small for a {K}-node network")
    A = _mixing_matrix(cfg, graph_seed)
    reduced = ms_stability_check(moment(ms_features), A, mu, max_dim=ms_dim)
    report = StabilityReport(
        mu_max_mean=mu_max,
        spectral_radius_ms=reduced.spectral_radius_ms,
        stable_mean=bool(0.0 < mu < mu_max),
        stable_ms=reduced.stable_ms,
    )
    return report, ms_features


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="rffnet",
        description="Run and analyze random-feature kernel learning experiments.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run an experiment config")
    p_run.add_argument("config", help="config file path or bundled experiment name")
    p_run.add_argument("--seed", type=int, help="override the master seed")
    p_run.add_argument("--out", help="override the output directory")
    p_run.add_argument("--realizations", type=int, help="override the realization count")

    sub.add_parser("list", help="list bundled experiment configs")

    p_an = sub.add_parser("analyze", help="print the stability report for a config")
    p_an.add_argument("config", help="config file path or bundled experiment name")
    p_an.add_argument("--seed", type=int, help="override the master seed")
    p_an.add_argument(
        "--ms-dim", type=int, default=64,
        help="cap on nodes x features for the mean-square radius (default 64)",
    )

    args = parser.parse_args(argv)
    try:
        if args.command == "list":
            for name in list_experiments():
                print(name)
            return 0
        cfg = load_config(args.config)
        if args.seed is not None:
            if args.seed < 0:
                raise ConfigError("--seed must be >= 0")
            cfg.seed = args.seed
        if args.command == "run":
            if args.realizations is not None:
                if args.realizations < 1:
                    raise ConfigError("--realizations must be >= 1")
                cfg.realizations = args.realizations
            out_dir = Path(args.out or cfg.out or f"runs/{cfg.experiment}")
            run_experiment(cfg, out_dir)
            print(f"wrote {cfg.realizations} trace file(s) and summary.csv under {out_dir}")
        else:
            if args.ms_dim < 1:
                raise ConfigError("--ms-dim must be >= 1")
            report, ms_features = analyze_experiment(cfg, ms_dim=args.ms_dim)
            sys.stdout.write(report.format())
            print(f"ms_feature_dim={ms_features}")
        return 0
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
