import numpy as np
import pytest

from rffnet import (
    Dataset,
    SampleStream,
    gen_chaotic1_stream,
    gen_chaotic2_stream,
    gen_kernel_expansion_stream,
    gen_quadratic_stream,
    kernel_expansion_eval,
    load_libsvm,
    partition_dataset,
)
from rffnet.data import (
    _saturation,
    make_banana_dataset,
    make_waveform_dataset,
    save_libsvm,
    train_test_split,
)


# ---------------------------------------------------------------------------
# synthetic streams


def test_stream_and_dataset_shape_validation():
    with pytest.raises(ValueError):
        SampleStream(node_id=0, xs=np.zeros((3, 2)), ys=np.zeros(4))
    with pytest.raises(ValueError):
        Dataset(X=np.zeros((3, 2)), y=np.zeros(4))
    assert len(SampleStream(node_id=0, xs=np.zeros((3, 2)), ys=np.zeros(3))) == 3


def test_kernel_expansion_stream_shapes_and_determinism():
    streams, centers, coeffs = gen_kernel_expansion_stream(4, 50, seed=1)
    assert len(streams) == 4
    assert centers.shape == (10, 5) and coeffs.shape == (10,)
    for k, s in enumerate(streams):
        assert s.node_id == k
        assert s.xs.shape == (50, 5) and s.ys.shape == (50,)
    again, centers2, coeffs2 = gen_kernel_expansion_stream(4, 50, seed=1)
    assert np.array_equal(centers, centers2) and np.array_equal(coeffs, coeffs2)
    for a, b in zip(streams, again):
        assert np.array_equal(a.xs, b.xs) and np.array_equal(a.ys, b.ys)
    other, _, _ = gen_kernel_expansion_stream(4, 50, seed=2)
    assert not np.array_equal(streams[0].xs, other[0].xs)
    with pytest.raises(ValueError):
        gen_kernel_expansion_stream(0, 50, seed=1)
    with pytest.raises(ValueError):
        gen_kernel_expansion_stream(2, 50, seed=1, n_centers=0)


def test_kernel_expansion_targets_match_the_planted_expansion():
    streams, centers, coeffs = gen_kernel_expansion_stream(
        2, 40, seed=3, sigma_eta=0.0)
    for s in streams:
        clean = kernel_expansion_eval(centers, coeffs, 5.0, s.xs)
        assert np.allclose(s.ys, clean, atol=1e-12)
    flat, _, _ = gen_kernel_expansion_stream(2, 40, seed=3, sigma_eta=0.0,
                                             coeff_std=0.0)
    for s in flat:
        assert np.allclose(s.ys, 0.0, atol=1e-15)


def test_quadratic_stream_nodes_share_one_model():
    streams = gen_quadratic_stream(2, 20_000, seed=4, sigma_eta=0.0)
    # Same generating direction vectors for every node with i.i.d. inputs:
    # matching first and second moments across nodes.
    m0, m1 = (float(np.mean(s.ys)) for s in streams)
    v0, v1 = (float(np.var(s.ys)) for s in streams)
    assert m0 > 0.0 and m1 > 0.0  # the squared term has positive mean
    assert abs(m0 - m1) < 0.1 * max(m0, m1) + 0.05
    assert 0.8 < v0 / v1 < 1.25
    assert streams[0].xs.shape == (20_000, 5)
    with pytest.raises(ValueError):
        gen_quadratic_stream(1, 0, seed=4)


def test_chaotic1_noise_free_hand_values():
    stream = gen_chaotic1_stream(1, 2, seed=5, sigma_u=0.0, sigma_eta=0.0)[0]
    assert np.allclose(stream.xs, [[1.0], [0.5]], atol=1e-15)
    assert np.allclose(stream.ys, [0.5, 0.4], atol=1e-15)


def test_chaotic1_stays_bounded():
    stream = gen_chaotic1_stream(1, 100_000, seed=6)[0]
    assert stream.xs.shape == (100_000, 1)
    assert float(np.max(np.abs(stream.ys))) < 2.0
    two = gen_chaotic1_stream(2, 100, seed=6)
    assert not np.array_equal(two[0].ys, two[1].ys)


def test_saturation_hand_values_and_continuity():
    assert _saturation(np.array([0.0]))[0] == 0.0
    assert _saturation(np.array([1.0]))[0] == pytest.approx(1.0 / 3.0)
    left = _saturation(np.array([-1e-8]))[0]
    right = _saturation(np.array([1e-8]))[0]
    assert abs(left) < 1e-7 and abs(right) < 1e-7


def test_chaotic2_noise_free_recursion():
    stream = gen_chaotic2_stream(1, 5, seed=7, sigma_v2=0.0, sigma_eta=0.0)[0]
    assert np.array_equal(stream.xs, np.zeros((5, 2)))
    # d = (1, 1, 0.15, ...) with all drives at zero.
    d3 = -0.2 * 1.0 + 0.35 * 1.0
    assert d3 == pytest.approx(0.15)
    assert stream.ys[0] == pytest.approx(1.0 / 3.0)
    assert stream.ys[1] == pytest.approx(1.0 / 3.0)
    assert stream.ys[2] == pytest.approx(float(_saturation(np.array([d3]))[0]))


def test_chaotic2_default_shapes_and_determinism():
    a = gen_chaotic2_stream(2, 300, seed=8)
    b = gen_chaotic2_stream(2, 300, seed=8)
    assert a[0].xs.shape == (300, 2)
    for s, t in zip(a, b):
        assert np.array_equal(s.xs, t.xs) and np.array_equal(s.ys, t.ys)
    assert np.all(np.isfinite(a[0].ys))


# ---------------------------------------------------------------------------
# LIBSVM round trips


def test_load_libsvm_dense_layout(tmp_path):
    path = tmp_path / "toy.libsvm"
    path.write_text("# comment line\n\n+1 3:0.5\n-1 1:1.0 2:-2.5\n")
    ds = load_libsvm(path)
    assert ds.X.shape == (2, 3)
    assert np.allclose(ds.X[0], [0.0, 0.0, 0.5])
    assert np.allclose(ds.X[1], [1.0, -2.5, 0.0])
    assert np.array_equal(ds.y, [1.0, -1.0])


def test_load_libsvm_label_mappings(tmp_path):
    zero_one = tmp_path / "01.libsvm"
    zero_one.write_text("0 1:1.0\n1 1:2.0\n")
    assert np.array_equal(load_libsvm(zero_one).y, [-1.0, 1.0])
    arbitrary = tmp_path / "37.libsvm"
    arbitrary.write_text("7 1:1.0\n3 1:2.0\n")
    assert np.array_equal(load_libsvm(arbitrary).y, [1.0, -1.0])


def test_load_libsvm_errors_name_the_line(tmp_path):
    bad_token = tmp_path / "tok.libsvm"
    bad_token.write_text("+1 1:1.0\n-1 1:a\n")
    with pytest.raises(ValueError) as err:
        load_libsvm(bad_token)
    assert ":2:" in str(err.value)
    bad_order = tmp_path / "ord.libsvm"
    bad_order.write_text("+1 2:1.0 2:3.0\n")
    with pytest.raises(ValueError):
        load_libsvm(bad_order)
    bad_label = tmp_path / "lab.libsvm"
    bad_label.write_text("abc 1:1.0\n")
    with pytest.raises(ValueError):
        load_libsvm(bad_label)
    empty = tmp_path / "empty.libsvm"
    empty.write_text("")
    with pytest.raises(ValueError):
        load_libsvm(empty)
    mono = tmp_path / "mono.libsvm"
    mono.write_text("+1 1:1.0\n+1 1:2.0\n")
    with pytest.raises(ValueError):
        load_libsvm(mono)


def test_save_load_roundtrip(tmp_path):
    rng = np.random.default_rng(9)
    ds = Dataset(X=rng.normal(size=(40, 6)),
                 y=np.where(rng.random(40) < 0.5, 1.0, -1.0))
    path = tmp_path / "round.libsvm"
    save_libsvm(path, ds)
    back = load_libsvm(path)
    assert back.X.shape == ds.X.shape
    assert np.max(np.abs(back.X - ds.X)) < 1e-5
    assert np.array_equal(back.y, ds.y)


# ---------------------------------------------------------------------------
# partitioning


def test_partition_covers_dataset_disjointly():
    rng = np.random.default_rng(10)
    ds = Dataset(X=rng.normal(size=(4000, 2)),
                 y=np.where(rng.random(4000) < 0.5, 1.0, -1.0))
    streams = partition_dataset(ds, 5, seed=11)
    assert [len(s) for s in streams] == [800] * 5
    stacked = np.vstack([s.xs for s in streams])
    order_a = np.lexsort(stacked.T)
    order_b = np.lexsort(ds.X.T)
    assert np.allclose(stacked[order_a], ds.X[order_b])
    again = partition_dataset(ds, 5, seed=11)
    for a, b in zip(streams, again):
        assert np.array_equal(a.xs, b.xs) and np.array_equal(a.ys, b.ys)


def test_partition_edge_cases():
    rng = np.random.default_rng(12)
    ds = Dataset(X=rng.normal(size=(10, 2)), y=np.where(rng.random(10) < 0.5, 1.0, -1.0))
    single = partition_dataset(ds, 1, seed=0)
    assert len(single) == 1 and len(single[0]) == 10
    order_a = np.lexsort(single[0].xs.T)
    order_b = np.lexsort(ds.X.T)
    assert np.allclose(single[0].xs[order_a], ds.X[order_b])
    uneven = partition_dataset(ds, 3, seed=0)
    assert [len(s) for s in uneven] == [3, 3, 3]
    with pytest.raises(ValueError):
        partition_dataset(ds, 11, seed=0)
    with pytest.raises(ValueError):
        partition_dataset(ds, 0, seed=0)


def test_train_test_split_is_a_prefix_split():
    rng = np.random.default_rng(13)
    ds = Dataset(X=rng.normal(size=(20, 3)), y=np.where(rng.random(20) < 0.5, 1.0, -1.0))
    train, test = train_test_split(ds, 15)
    assert len(train) == 15 and len(test) == 5
    assert np.array_equal(train.X, ds.X[:15])
    assert np.array_equal(test.y, ds.y[15:])
    with pytest.raises(ValueError):
        train_test_split(ds, 0)
    with pytest.raises(ValueError):
        train_test_split(ds, 20)


# ---------------------------------------------------------------------------
# bundled benchmark datasets


def test_banana_dataset_statistics():
    ds = make_banana_dataset()
    assert ds.X.shape == (5300, 2)
    assert set(np.unique(ds.y)) == {-1.0, 1.0}
    assert np.allclose(ds.X.mean(axis=0), 0.0, atol=1e-10)
    assert np.allclose(ds.X.std(axis=0), 1.0, atol=1e-10)
    prior = float(np.mean(ds.y > 0))
    assert abs(prior - 0.448) < 0.02
    assert np.array_equal(ds.X, make_banana_dataset().X)
    with pytest.raises(ValueError):
        make_banana_dataset(n_samples=1)


def test_waveform_dataset_statistics():
    ds = make_waveform_dataset()
    assert ds.X.shape == (5000, 21)
    assert set(np.unique(ds.y)) == {-1.0, 1.0}
    prior = float(np.mean(ds.y > 0))
    assert abs(prior - 1.0 / 3.0) < 0.03
    assert np.array_equal(ds.X, make_waveform_dataset().X)
    with pytest.raises(ValueError):
        make_waveform_dataset(n_samples=1)
