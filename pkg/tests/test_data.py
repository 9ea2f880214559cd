import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra.numpy import arrays

from driftfilter._errors import CsvFormatError
from driftfilter.data import (
    GENERATORS, NEGATIVE, POSITIVE, UNLABELED, LabeledDataset, ShiftedBenchmark, csv_io,
    gen_diagonal, gen_periodic, gen_radial, gen_smooth, label_diagonal, label_periodic,
    label_radial, label_smooth, make_rng, read_benchmark, read_dataset, read_matrix,
    standard_normal, write_benchmark, write_dataset, write_matrix,
)


@pytest.mark.parametrize("gen", list(GENERATORS.values()), ids=list(GENERATORS))
def test_split_sizes(gen):
    b = gen(500, 500, seed=1)
    assert (b.train.n_samples, b.target.n_samples, b.test.n_samples) == (500, 250, 250)
    assert b.n_features == 2


@pytest.mark.parametrize("name", list(GENERATORS))
def test_generator_is_bitwise_deterministic(name):
    a, b = GENERATORS[name](seed=7), GENERATORS[name](seed=7)
    assert a.train == b.train and a.target == b.target and a.test == b.test
    c = GENERATORS[name](seed=8)
    assert not np.array_equal(a.train.x, c.train.x)


@pytest.mark.parametrize("name,fn", [("radial", label_radial), ("periodic", label_periodic),
                                     ("smooth", label_smooth), ("diagonal", label_diagonal)])
def test_labels_match_label_function(name, fn):
    b = GENERATORS[name](seed=3)
    for split in (b.train, b.target, b.test):
        np.testing.assert_array_equal(split.y, fn(split.x))


def test_label_examples():
    assert label_radial([1.0, 0.2])[0] == POSITIVE
    assert label_radial([0.2, 1.0])[0] == NEGATIVE
    assert label_periodic([math.pi / 2, 0])[0] == POSITIVE
    assert label_periodic([4.0, 0])[0] == NEGATIVE
    assert label_smooth([2, 3])[0] == POSITIVE
    assert label_smooth([0, 0])[0] == NEGATIVE
    assert label_diagonal([2.0, 2.1])[0] == POSITIVE
    assert label_diagonal([0, 0])[0] == NEGATIVE


def _within(sample, mean, sd):
    n = len(sample)
    assert np.all(np.abs(sample.mean(axis=0) - mean) <= 5 * np.asarray(sd) / math.sqrt(n))


@pytest.mark.parametrize("seed", range(10))
def test_gaussian_component_means(seed):
    r = gen_radial(seed=seed)
    _within(r.train.x, [0.5, 0.0], [0.2, 0.5])
    _within(np.vstack([r.target.x, r.test.x]), [-0.5, 0.0], [0.2, 0.5])
    p = gen_periodic(seed=seed)
    _within(p.train.x, [2 * np.pi, 0.0], [2.0, 0.5])
    _within(np.vstack([p.target.x, p.test.x]), [-2 * np.pi, 0.0], [2.0, 0.5])


def test_scale_parameters_read_as_standard_deviations():
    x = gen_radial(n_train=20000, seed=0).train.x
    np.testing.assert_allclose(x.std(axis=0), [0.2, 0.5], rtol=0.03)
    v = gen_radial(n_train=20000, seed=0, as_variance=True).train.x
    np.testing.assert_allclose(v.std(axis=0), np.sqrt([0.2, 0.5]), rtol=0.03)


def test_smooth_mixture_halves():
    b = gen_smooth(500, 500, seed=2)
    # first half of the training rows comes from the component centred at x1=+2
    assert b.train.x[:250, 0].mean() > 1.5 and b.train.x[250:, 0].mean() < -1.5
    assert b.target.x[:125, 0].mean() > 2.5 and b.target.x[125:, 0].mean() < 0.5
    assert b.test.x[:125, 0].mean() > 2.5


def test_diagonal_supports():
    b = gen_diagonal(seed=0)
    assert b.train.x[:, 0].min() >= 0 and b.train.x[:, 0].max() <= 3
    assert b.test.x[:, 0].max() <= 0 and b.target.x[:, 0].min() >= -3


@pytest.mark.parametrize("n_train,n_test", [(0, 500), (500, 0), (1, 500), (500, 501)])
def test_bad_counts(n_train, n_test):
    with pytest.raises(ValueError):
        gen_radial(n_train, n_test)


def test_smooth_rejects_odd_train():
    with pytest.raises(ValueError):
        gen_smooth(501, 500)


def test_box_muller_moments():
    z = standard_normal(make_rng(11), 100_001)
    assert abs(z.mean()) < 0.01 and abs(z.std() - 1) < 0.01
    assert standard_normal(make_rng(0), (3, 2)).shape == (3, 2)


def test_dataset_is_immutable_and_copies():
    x = np.zeros((3, 2))
    d = LabeledDataset(x, [1, 2, UNLABELED])
    assert x.flags.writeable
    with pytest.raises(ValueError):
        d.x[0, 0] = 1.0
    assert d.classes.tolist() == [1, 2]
    assert np.all(d.unlabeled().y == UNLABELED)


@pytest.mark.parametrize("x,y", [
    (np.zeros((2, 2)), [1]),
    (np.zeros((2, 2)), [0, 1]),
    (np.zeros((2, 2)), [1.5, 1]),
    ([[np.nan, 0.0]], [1]),
    (np.zeros((0, 2)), []),
])
def test_dataset_validation(x, y):
    with pytest.raises(ValueError):
        LabeledDataset(x, y)


def test_benchmark_requires_test_labels():
    a = LabeledDataset(np.zeros((2, 2)), [1, 2])
    with pytest.raises(ValueError):
        ShiftedBenchmark(a, a, a.unlabeled())
    with pytest.raises(ValueError):
        ShiftedBenchmark(a, LabeledDataset(np.zeros((2, 3)), [1, 1]), a)


def test_csv_roundtrip_small(tmp_path):
    d = LabeledDataset([[0.1, -2.0], [1e-300, 3.5], [123456.789, 0.0]], [1, UNLABELED, 2])
    p = tmp_path / "d.csv"
    csv_io(p, "write", d)
    text = p.read_text()
    assert text.splitlines()[0] == "f1,f2,label"
    assert text.splitlines()[2].endswith(",-1")
    assert csv_io(p, "read") == d


@given(arrays(np.float64, st.tuples(st.integers(1, 8), st.integers(1, 4)),
              elements=st.floats(-1e12, 1e12, allow_nan=False)),
       st.data())
def test_csv_roundtrip_property(tmp_path_factory, x, data):
    y = data.draw(arrays(np.int64, x.shape[0], elements=st.sampled_from([UNLABELED, 1, 2, 3])))
    d = LabeledDataset(x, y)
    p = tmp_path_factory.mktemp("rt") / "d.csv"
    write_dataset(p, d)
    back = read_dataset(p)
    np.testing.assert_allclose(back.x, d.x, rtol=1e-15, atol=0)
    np.testing.assert_array_equal(back.y, d.y)


def test_ragged_row_names_line(tmp_path):
    p = tmp_path / "bad.csv"
    p.write_text("f1,f2,label\n0.1,0.2,1\n0.1,0.2,0.3,1\n")
    with pytest.raises(CsvFormatError, match="line 3") as info:
        read_dataset(p)
    assert info.value.lineno == 3


@pytest.mark.parametrize("body", ["f1,f2\n1,2\n", "f1,label\nabc,1\n", "f1,label\n1,0\n",
                                  "f1,label\n1,inf\n", "f1,label\n", ""])
def test_malformed_files(tmp_path, body):
    p = tmp_path / "bad.csv"
    p.write_text(body)
    with pytest.raises(CsvFormatError):
        read_dataset(p)


def test_csv_io_modes(tmp_path):
    with pytest.raises(ValueError):
        csv_io(tmp_path / "x.csv", "write")
    with pytest.raises(ValueError):
        csv_io(tmp_path / "x.csv", "append")
    with pytest.raises(FileNotFoundError):
        csv_io(tmp_path / "missing.csv", "read")


def test_matrix_roundtrip(tmp_path):
    w = make_rng(0).random((3, 4))
    write_matrix(tmp_path / "w.csv", w)
    np.testing.assert_array_equal(read_matrix(tmp_path / "w.csv"), w)
    write_matrix(tmp_path / "m.csv", np.eye(2, dtype=np.int64))
    assert (tmp_path / "m.csv").read_text() == "f1,f2\n1,0\n0,1\n"


def test_benchmark_directory_roundtrip(tmp_path):
    b = gen_periodic(40, 20, seed=5)
    write_benchmark(tmp_path, b)
    back = read_benchmark(tmp_path, seed=5)
    assert back.train == b.train and back.test == b.test
    assert np.all(back.target.y == UNLABELED)
    np.testing.assert_array_equal(back.target.x, b.target.x)
    with pytest.raises(FileNotFoundError):
        write_benchmark(tmp_path / "nope", b)
