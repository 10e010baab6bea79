import gzip
import numpy as np
import numpy.testing as npt
import pytest

from qcmol.datasets import (
    Dataset, gen_hidden_manifold, load_csv_dataset, read_idx,
    load_mnist_pair, fit_scaler, apply_scaler, stratified_split, train_test,
    dataset_to_lines, dataset_from_lines, make_dataset, _allocate,
    IDX_IMAGES_MAGIC, IDX_LABELS_MAGIC,
)
from qcmol.errors import (
    DatasetFormatError, DegenerateDataError, ConfigurationError,
)


def idx_bytes(magic, arr):
    arr = np.asarray(arr, dtype=np.uint8)
    header = magic.to_bytes(4, "big")
    for dim in arr.shape:
        header += int(dim).to_bytes(4, "big")
    return header + arr.tobytes()


@pytest.fixture
def mnist_files(tmp_path):
    rng = np.random.default_rng(0)
    digits = np.array([3, 5, 3, 8, 5, 3, 5, 3, 5, 8, 3, 5])
    images = rng.integers(0, 256, size=(digits.size, 4, 4))
    img = tmp_path / "images.idx"
    img.write_bytes(idx_bytes(IDX_IMAGES_MAGIC, images))
    lbl = tmp_path / "labels.idx.gz"
    with gzip.open(lbl, "wb") as f:
        f.write(idx_bytes(IDX_LABELS_MAGIC, digits))
    return img, lbl


def write_table(path, text):
    path.write_text(text)
    return path


def test_hidden_manifold_shape():
    ds = gen_hidden_manifold(4, 101, seed=3)
    assert ds.features.shape == (101, 4)
    assert np.all(np.abs(ds.features) < 1)
    assert np.sum(ds.labels == 1) == 51
    assert np.sum(ds.labels == -1) == 50
    assert ds.name == "hm4"


def test_hidden_manifold_is_seeded():
    a = gen_hidden_manifold(5, 40, seed=7)
    b = gen_hidden_manifold(5, 40, seed=7)
    npt.assert_array_equal(a.features, b.features)
    npt.assert_array_equal(a.labels, b.labels)
    c = gen_hidden_manifold(5, 40, seed=8)
    assert not np.array_equal(a.features, c.features)


def test_hidden_manifold_arguments():
    with pytest.raises(ConfigurationError):
        gen_hidden_manifold(4, 3, seed=0)
    with pytest.raises(ConfigurationError):
        gen_hidden_manifold(0, 10, seed=0)


def test_dataset_validation():
    with pytest.raises(DatasetFormatError):
        Dataset(np.zeros((3, 2)), np.array([1, -1]))
    with pytest.raises(DatasetFormatError):
        Dataset(np.array([[np.nan], [0.0]]), np.array([1, -1]))
    with pytest.raises(DatasetFormatError):
        Dataset(np.zeros((2, 1)), np.array([1, 0]))
    with pytest.raises(DegenerateDataError):
        Dataset(np.zeros((2, 1)), np.array([1, 1]))


def test_load_csv(tmp_path):
    path = write_table(tmp_path / "flowers.csv",
                       "a,b,kind\n1.0,2,x\n0.5,-1,y\n3,4,x\n")
    ds = load_csv_dataset(path, ["b", "a"], "kind", "x")
    npt.assert_array_equal(ds.features, [[2, 1.0], [-1, 0.5], [4, 3]])
    npt.assert_array_equal(ds.labels, [1, -1, 1])
    assert ds.name == "flowers"


def test_csv_bad_cell(tmp_path):
    path = write_table(tmp_path / "d.csv", "a,kind\n1,x\nfoo,y\n")
    with pytest.raises(DatasetFormatError, match="row 3 column 'a'"):
        load_csv_dataset(path, ["a"], "kind", "x")


def test_csv_empty_cell(tmp_path):
    path = write_table(tmp_path / "d.csv", "a,kind\n1,x\n,y\n")
    with pytest.raises(DatasetFormatError, match="row 3"):
        load_csv_dataset(path, ["a"], "kind", "x")


def test_csv_missing_column(tmp_path):
    path = write_table(tmp_path / "d.csv", "a,kind\n1,x\n2,y\n")
    with pytest.raises(DatasetFormatError, match="missing columns"):
        load_csv_dataset(path, ["a", "b"], "kind", "x")


def test_csv_single_class(tmp_path):
    path = write_table(tmp_path / "d.csv", "a,kind\n1,x\n2,x\n")
    with pytest.raises(DegenerateDataError):
        load_csv_dataset(path, ["a"], "kind", "x")


def test_read_idx(mnist_files):
    img, lbl = mnist_files
    assert read_idx(img, IDX_IMAGES_MAGIC).shape == (12, 4, 4)
    assert list(read_idx(lbl, IDX_LABELS_MAGIC)[:3]) == [3, 5, 3]


def test_idx_bad_magic(mnist_files):
    img, _ = mnist_files
    with pytest.raises(DatasetFormatError, match="magic"):
        read_idx(img, IDX_LABELS_MAGIC)


def test_idx_truncated(tmp_path):
    path = tmp_path / "short.idx"
    path.write_bytes(idx_bytes(IDX_LABELS_MAGIC, [1, 2, 3])[:-1])
    with pytest.raises(DatasetFormatError):
        read_idx(path, IDX_LABELS_MAGIC)
    path.write_bytes(b"\x00\x00")
    with pytest.raises(DatasetFormatError):
        read_idx(path, IDX_LABELS_MAGIC)


def test_mnist_pair(mnist_files):
    img, lbl = mnist_files
    ds = load_mnist_pair(img, lbl, 3, 5)
    assert ds.features.shape == (10, 5)
    assert np.sum(ds.labels == 1) == 5
    assert ds.name == "mnist35"


def test_mnist_pair_subsample(mnist_files):
    img, lbl = mnist_files
    ds = load_mnist_pair(img, lbl, 3, 5, out_dim=2, n_per_class=3, seed=1)
    assert ds.features.shape == (6, 2)


def test_mnist_absent_digit(mnist_files):
    img, lbl = mnist_files
    with pytest.raises(DatasetFormatError, match="digit 7"):
        load_mnist_pair(img, lbl, 3, 7)


def test_scaler():
    train = Dataset(np.array([[0.0, -2.0], [1.0, 2.0], [0.5, 0.0]]),
                    np.array([1, -1, 1]))
    scaler = fit_scaler(train)
    npt.assert_allclose(apply_scaler(scaler, train.features),
                        [[0, 0], [np.pi, np.pi], [np.pi / 2, np.pi / 2]])
    outside = apply_scaler(scaler, [[2.0, -4.0]])
    npt.assert_allclose(outside, [[2 * np.pi, -np.pi / 2]])
    npt.assert_allclose(apply_scaler(scaler, [[2.0, -4.0]], clamp=True),
                        [[np.pi, 0.0]])


def test_scaler_constant_feature():
    train = Dataset(np.array([[1.0, 0.0], [1.0, 2.0]]), np.array([1, -1]))
    with pytest.raises(DegenerateDataError, match=r"\[0\]"):
        fit_scaler(train)


@pytest.mark.parametrize("total,sizes,expected", [
    (10, [3, 7], [3, 7]),
    (5, [1, 1], [3, 2]),
    (7, [10, 20, 30], [1, 2, 4]),
    (0, [4, 4], [0, 0]),
])
def test_allocate(total, sizes, expected):
    assert _allocate(total, sizes) == expected


def test_stratified_split():
    ds = gen_hidden_manifold(4, 40, seed=1)
    first, second = stratified_split(ds, 0.75, seed=2)
    assert (len(first), len(second)) == (30, 10)
    assert np.sum(first.labels == 1) == 15
    rows = {tuple(r) for r in first.features} | {tuple(r) for r in
                                                  second.features}
    assert len(rows) == 40
    again = stratified_split(ds, 0.75, seed=2)[0]
    npt.assert_array_equal(again.features, first.features)


def test_stratified_split_keeps_both_classes():
    ds = Dataset(np.arange(5.0)[:, None], np.array([1, 1, -1, -1, -1]))
    first, second = stratified_split(ds, 0.9, seed=0)
    assert set(first.labels) == {1, -1}
    assert set(second.labels) == {1, -1}
    with pytest.raises(ConfigurationError):
        stratified_split(ds, 1.0, seed=0)


def test_train_test():
    ds = gen_hidden_manifold(4, 100, seed=5)
    train, test = train_test(ds, 40, 20, seed=0)
    assert (len(train), len(test)) == (40, 20)
    assert np.sum(train.labels == 1) == 20
    assert np.sum(test.labels == 1) == 10
    seen = {tuple(r) for r in train.features}
    assert not any(tuple(r) in seen for r in test.features)
    with pytest.raises(ConfigurationError):
        train_test(ds, 90, 20, seed=0)


def test_dataset_lines_roundtrip():
    ds = gen_hidden_manifold(5, 12, seed=4)
    lines = list(dataset_to_lines(ds))
    assert len(lines) == 13
    back = dataset_from_lines(lines)
    npt.assert_array_equal(back.features, ds.features)
    npt.assert_array_equal(back.labels, ds.labels)
    assert (back.name, back.seed) == ("hm5", 4)


def test_dataset_lines_errors():
    with pytest.raises(DatasetFormatError):
        dataset_from_lines(["not json"])
    with pytest.raises(DatasetFormatError, match="line 3"):
        dataset_from_lines(['{"n": 2, "d": 2}', "1 0.5 0.5", "-1 0.5"])
    with pytest.raises(DatasetFormatError):
        dataset_from_lines(['{"n": 3, "d": 1}', "1 0.5", "-1 0.2"])


def test_make_dataset(tmp_path):
    assert make_dataset("hm5", 20, 0).features.shape == (20, 5)
    path = write_table(tmp_path / "d.csv", "a,b,kind\n1,2,x\n3,4,y\n")
    ds = make_dataset(f"csv:{path}:a,b:kind:y", 0, 0)
    npt.assert_array_equal(ds.labels, [-1, 1])


@pytest.mark.parametrize("source", ["hm3", "hm4:extra", "csv:only",
                                  "mnist:a:b:c:d", "bogus"])
def test_make_dataset_rejects(source):
    with pytest.raises(ConfigurationError):
        make_dataset(source, 10, 0)
