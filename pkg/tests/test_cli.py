import numpy as np
import pytest

from rffnet.cli import (
    ConfigError,
    analyze_experiment,
    list_experiments,
    load_config,
    main,
    parse_config_text,
    validate_config,
)

TINY_STREAM_CFG = """\
# three-node network on a short chaotic stream
experiment = tiny
learner = dklms
graph.k = 3
kernel.sigma = 0.05
features.dim = 20
data = chaotic1
horizon = 50
realizations = 2
seed = 42
"""

TINY_QKLMS_CFG = """\
experiment = tinyq
learner = qklms
kernel.sigma = 0.05
quantization = 0.1
schedule.mu = 1.0
data = chaotic1
horizon = 50
realizations = 2
seed = 43
"""

TINY_BANANA_CFG = """\
experiment = tinybanana
learner = pegasos
graph.k = 2
kernel.sigma = 0.7
features.dim = 10
loss.lam = 0.01
data = banana
data.n_samples = 150
data.train = 100
epochs = 2
realizations = 1
seed = 44
"""


def _validate(text: str):
    cfg, seen = parse_config_text(text)
    return validate_config(cfg, seen)


# ---------------------------------------------------------------------------
# parsing


def test_parse_rejects_unknown_duplicate_and_bad_values():
    with pytest.raises(ConfigError) as err:
        parse_config_text("experiment = a\nbogus.key = 1\n")
    assert "line 2" in str(err.value) and "bogus.key" in str(err.value)
    with pytest.raises(ConfigError) as err:
        parse_config_text("seed = 1\nseed = 2\n")
    assert "duplicate" in str(err.value)
    with pytest.raises(ConfigError):
        parse_config_text("horizon = soon\n")
    with pytest.raises(ConfigError):
        parse_config_text("horizon = 0\n")
    with pytest.raises(ConfigError):
        parse_config_text("seed = -3\n")
    with pytest.raises(ConfigError):
        parse_config_text("just words\n")
    with pytest.raises(ConfigError):
        parse_config_text("schedule.mu = inf\n")


def test_parse_accepts_comments_and_blank_lines():
    cfg, seen = parse_config_text("# top\n\nexperiment = x\n  seed = 7  \n")
    assert cfg.experiment == "x" and cfg.seed == 7
    assert seen == {"experiment", "seed"}


# ---------------------------------------------------------------------------
# validation


def test_validate_requires_core_keys():
    with pytest.raises(ConfigError, match="experiment"):
        _validate("learner = dklms\ndata = chaotic1\n")
    with pytest.raises(ConfigError, match="kernel.sigma"):
        _validate("experiment = x\nlearner = qklms\ndata = chaotic1\nhorizon = 10\n")


def test_validate_learner_loss_compatibility():
    with pytest.raises(ConfigError, match="hinge"):
        _validate(
            "experiment = x\nlearner = pegasos\ngraph.k = 2\nkernel.sigma = 1\n"
            "features.dim = 8\nloss = squared\ndata = banana\ndata.train = 50\n"
        )
    with pytest.raises(ConfigError, match="squared"):
        _validate(
            "experiment = x\nlearner = dklms\ngraph.k = 2\nkernel.sigma = 1\n"
            "features.dim = 8\nloss = hinge\nloss.lam = 0.1\ndata = chaotic1\nhorizon = 10\n"
        )
    with pytest.raises(ConfigError, match="loss.lam"):
        _validate(
            "experiment = x\nlearner = pegasos\ngraph.k = 2\nkernel.sigma = 1\n"
            "features.dim = 8\ndata = banana\ndata.train = 50\n"
        )


def test_validate_learner_specific_keys():
    with pytest.raises(ConfigError, match="quantization"):
        _validate(
            "experiment = x\nlearner = dklms\ngraph.k = 2\nkernel.sigma = 1\n"
            "features.dim = 8\nquantization = 0.1\ndata = chaotic1\nhorizon = 10\n"
        )
    with pytest.raises(ConfigError, match="features.dim"):
        _validate(
            "experiment = x\nlearner = qklms\nkernel.sigma = 1\nfeatures.dim = 8\n"
            "data = chaotic1\nhorizon = 10\n"
        )
    with pytest.raises(ConfigError, match="network"):
        _validate(
            "experiment = x\nlearner = rff_okl\ngraph.k = 3\nkernel.sigma = 1\n"
            "features.dim = 8\ndata = chaotic1\nhorizon = 10\n"
        )
    with pytest.raises(ConfigError, match="graph.k"):
        _validate(
            "experiment = x\nlearner = dklms\nkernel.sigma = 1\n"
            "features.dim = 8\ndata = chaotic1\nhorizon = 10\n"
        )


def test_validate_source_rules():
    with pytest.raises(ConfigError, match="epochs"):
        _validate(
            "experiment = x\nlearner = rff_okl\nkernel.sigma = 1\nfeatures.dim = 8\n"
            "data = chaotic1\nhorizon = 10\nepochs = 2\n"
        )
    with pytest.raises(ConfigError, match="data.train"):
        _validate(
            "experiment = x\nlearner = rff_okl\nkernel.sigma = 1\nfeatures.dim = 8\n"
            "data = chaotic1\nhorizon = 10\ndata.train = 50\n"
        )
    with pytest.raises(ConfigError, match="n_centers"):
        _validate(
            "experiment = x\nlearner = rff_okl\nkernel.sigma = 1\nfeatures.dim = 8\n"
            "data = chaotic1\nhorizon = 10\ndata.n_centers = 4\n"
        )
    with pytest.raises(ConfigError, match="stream generator"):
        _validate(
            "experiment = x\nlearner = qklms\nkernel.sigma = 1\n"
            "data = banana\ndata.train = 50\n"
        )
    with pytest.raises(ConfigError, match="data.path"):
        _validate(
            "experiment = x\nlearner = rff_okl\nkernel.sigma = 1\nfeatures.dim = 8\n"
            "data = libsvm\ndata.train = 50\n"
        )
    with pytest.raises(ConfigError, match="horizon"):
        _validate(
            "experiment = x\nlearner = rff_okl\nkernel.sigma = 1\nfeatures.dim = 8\n"
            "data = banana\ndata.n_samples = 150\ndata.train = 100\nhorizon = 300\n"
        )
    with pytest.raises(ConfigError, match="test row"):
        _validate(
            "experiment = x\nlearner = rff_okl\nkernel.sigma = 1\nfeatures.dim = 8\n"
            "data = banana\ndata.n_samples = 100\ndata.train = 100\n"
        )
    with pytest.raises(ConfigError, match="stream generators"):
        _validate(
            "experiment = x\nlearner = rff_okl\nkernel.sigma = 1\nfeatures.dim = 8\n"
            "data = banana\ndata.train = 50\ndata.sigma_eta = 0.1\n"
        )


def test_validate_fills_learner_defaults():
    cfg = _validate(TINY_STREAM_CFG)
    assert cfg.loss_kind == "squared"
    assert cfg.schedule_kind == "constant"
    assert cfg.n_nodes == 3
    peg = _validate(TINY_BANANA_CFG)
    assert peg.loss_kind == "hinge"
    assert peg.schedule_kind == "pegasos"
    assert peg.schedule_lam == peg.lam == pytest.approx(0.01)
    soloq = _validate(TINY_QKLMS_CFG)
    assert soloq.n_nodes == 1


# ---------------------------------------------------------------------------
# loading and listing


def test_load_config_from_path_and_bundled_name(tmp_path):
    path = tmp_path / "tiny.cfg"
    path.write_text(TINY_STREAM_CFG)
    cfg = load_config(path)
    assert cfg.experiment == "tiny" and cfg.dim_features == 20
    bundled = load_config("example3")
    assert bundled.experiment == "example3"
    with pytest.raises(ConfigError, match="not found"):
        load_config("no_such_experiment")


def test_bundled_experiments_are_listed_sorted():
    names = list_experiments()
    assert names == sorted(names)
    assert len(names) >= 14
    for expected in ("example1", "example7", "banana5", "banana20",
                     "waveform5", "waveform20", "adult5", "adult20"):
        assert expected in names
    for name in names:
        load_config(name)  # every bundled config validates


# ---------------------------------------------------------------------------
# end-to-end runs


def test_run_writes_traces_and_summary(tmp_path):
    cfg_path = tmp_path / "tiny.cfg"
    cfg_path.write_text(TINY_STREAM_CFG)
    out1 = tmp_path / "out1"
    assert main(["run", str(cfg_path), "--out", str(out1)]) == 0
    assert (out1 / "trace_r1.csv").is_file()
    assert (out1 / "trace_r2.csv").is_file()
    summary = (out1 / "summary.csv").read_text().splitlines()
    assert summary[0] == "experiment,learner,K,D,realizations,metric_name,mean,std"
    fields = summary[1].split(",")
    assert fields[:6] == ["tiny", "dklms", "3", "20", "2", "steady_mse_db"]
    float(fields[6]), float(fields[7])
    # Reruns are byte-identical.
    out2 = tmp_path / "out2"
    assert main(["run", str(cfg_path), "--out", str(out2)]) == 0
    for name in ("trace_r1.csv", "trace_r2.csv", "summary.csv"):
        assert (out1 / name).read_bytes() == (out2 / name).read_bytes()
    # Overrides change the run surface.
    out3 = tmp_path / "out3"
    assert main(["run", str(cfg_path), "--out", str(out3), "--realizations", "1"]) == 0
    assert (out3 / "trace_r1.csv").is_file()
    assert not (out3 / "trace_r2.csv").exists()
    out4 = tmp_path / "out4"
    assert main(["run", str(cfg_path), "--out", str(out4), "--seed", "99"]) == 0
    assert (out4 / "trace_r1.csv").read_bytes() != (out1 / "trace_r1.csv").read_bytes()


def test_run_dictionary_learner_reports_dict_size(tmp_path):
    cfg_path = tmp_path / "tinyq.cfg"
    cfg_path.write_text(TINY_QKLMS_CFG)
    out = tmp_path / "out"
    assert main(["run", str(cfg_path), "--out", str(out)]) == 0
    trace = (out / "trace_r1.csv").read_text().splitlines()
    assert trace[0].endswith(",dict_size")
    summary = (out / "summary.csv").read_text().splitlines()
    assert len(summary) == 3
    metric_rows = {ln.split(",")[5] for ln in summary[1:]}
    assert metric_rows == {"steady_mse_db", "dict_size"}
    dict_row = next(ln for ln in summary[1:] if ln.split(",")[5] == "dict_size")
    fields = dict_row.split(",")
    assert fields[3] == "0"  # no feature dimension for dictionary learners
    assert float(fields[6]) >= 1.0


def test_run_dataset_source_records_test_error(tmp_path):
    cfg_path = tmp_path / "tinyb.cfg"
    cfg_path.write_text(TINY_BANANA_CFG)
    out = tmp_path / "out"
    assert main(["run", str(cfg_path), "--out", str(out)]) == 0
    lines = (out / "trace_r1.csv").read_text().splitlines()
    # Two epochs over a 50-sample node chunk give a 100-iteration horizon.
    assert len(lines) == 101
    assert lines[-1].split(",")[0] == "100"
    final_test = lines[-1].split(",")[4]
    assert 0.0 <= float(final_test) <= 1.0
    summary = (out / "summary.csv").read_text().splitlines()
    fields = summary[1].split(",")
    assert fields[5] == "test_error"
    assert 0.0 <= float(fields[6]) <= 1.0


def test_run_identity_graph(tmp_path):
    cfg_path = tmp_path / "ident.cfg"
    cfg_path.write_text(TINY_STREAM_CFG.replace(
        "graph.k = 3", "graph.k = 3\ngraph = identity"))
    out = tmp_path / "out"
    assert main(["run", str(cfg_path), "--out", str(out)]) == 0
    assert (out / "summary.csv").is_file()


# ---------------------------------------------------------------------------
# exit codes and analyze


def test_main_exit_codes(tmp_path, capsys):
    bad_cfg = tmp_path / "bad.cfg"
    bad_cfg.write_text("experiment = x\nwhat = ever\n")
    assert main(["run", str(bad_cfg)]) == 2
    assert "config error:" in capsys.readouterr().err

    missing_data = tmp_path / "missing.cfg"
    missing_data.write_text(
        "experiment = x\nlearner = rff_okl\nkernel.sigma = 1\nfeatures.dim = 8\n"
        "data = libsvm\ndata.path = /no/such/file.libsvm\ndata.train = 50\n"
    )
    out = tmp_path / "out"
    assert main(["run", str(missing_data), "--out", str(out)]) == 3
    assert "data error:" in capsys.readouterr().err

    assert main(["run", str(tmp_path / "nope.cfg")]) == 2
    capsys.readouterr()

    qklms_cfg = tmp_path / "q.cfg"
    qklms_cfg.write_text(TINY_QKLMS_CFG)
    assert main(["analyze", str(qklms_cfg)]) == 2
    assert "feature-based" in capsys.readouterr().err


def test_list_command_prints_names(capsys):
    assert main(["list"]) == 0
    printed = capsys.readouterr().out.strip().splitlines()
    assert printed == list_experiments()


def test_analyze_command_prints_report(tmp_path, capsys):
    cfg_path = tmp_path / "tiny.cfg"
    cfg_path.write_text(TINY_STREAM_CFG)
    assert main(["analyze", str(cfg_path)]) == 0
    out = capsys.readouterr().out.splitlines()
    keys = [ln.split("=")[0] for ln in out]
    assert keys == ["mu_max_mean", "spectral_radius_ms", "stable_mean",
                    "stable_ms", "ms_feature_dim"]
    assert out[4] == "ms_feature_dim=20"  # 3 nodes x 20 features fits the cap
    assert out[2] in ("stable_mean=0", "stable_mean=1")


def test_analyze_reduces_feature_dimension_to_fit_cap(tmp_path):
    cfg_path = tmp_path / "wide.cfg"
    cfg_path.write_text(TINY_STREAM_CFG.replace("features.dim = 20",
                                                "features.dim = 100"))
    report, ms_features = analyze_experiment(load_config(cfg_path), ms_dim=64)
    assert ms_features == 21  # 64 // 3
    assert np.isfinite(report.mu_max_mean)
    assert np.isfinite(report.spectral_radius_ms)
    with pytest.raises(ConfigError, match="ms-dim"):
        analyze_experiment(load_config(cfg_path), ms_dim=2)
