from typing import List, Optional, Sequence, Tuple, Iterable
from dataclasses import dataclass, replace
from pathlib import Path
import gzip
import json
import logging
import math
import numpy as np
import numpy.typing as npt

from .errors import (
    DatasetFormatError, DegenerateDataError, ConfigurationError,
)
from .fingerprint import pca_fit, pca_project
from .utils import read_csv, fmt

log = logging.getLogger(__name__)

IDX_IMAGES_MAGIC = 0x00000803
IDX_LABELS_MAGIC = 0x00000801
LATENT_DIM = 6
LABEL_NET_HIDDEN = 20


@dataclass(frozen=True)
class Dataset:
    features: npt.NDArray[np.float64]
    labels: npt.NDArray[np.int64]
    name: str = ""
    seed: Optional[int] = None

    def __post_init__(self):
        if self.features.ndim != 2 or \
                self.features.shape[0] != self.labels.shape[0]:
            raise DatasetFormatError(
                f"{self.features.shape} features for "
                f"{self.labels.shape[0]} labels")
        if not np.all(np.isfinite(self.features)):
            raise DatasetFormatError("features must be finite")
        if not np.all(np.isin(self.labels, (-1, 1))):
            raise DatasetFormatError("labels must be -1 or +1")
        if not (np.any(self.labels > 0) and np.any(self.labels < 0)):
            raise DegenerateDataError(f"dataset {self.name!r} has one class")

    def __len__(self):
        return self.labels.shape[0]

    @property
    def dim(self) -> int:
        return self.features.shape[1]

    def subset(self, idx: npt.ArrayLike) -> "Dataset":
        idx = np.asarray(idx, dtype=np.int64)
        return replace(self, features=self.features[idx],
                       labels=self.labels[idx])


@dataclass(frozen=True)
class FeatureScaler:
    low: npt.NDArray[np.float64]
    high: npt.NDArray[np.float64]
    scale: float = math.pi


def gen_hidden_manifold(d: int, n: int, seed: int) -> Dataset:
    # labels: random tanh network on the latent point, split at the median
    if n < 4:
        raise ConfigurationError(f"n must be >= 4, got {n}")
    if d < 1:
        raise ConfigurationError(f"d must be >= 1, got {d}")
    rng = np.random.default_rng(seed)
    projection = rng.standard_normal((d, LATENT_DIM))
    w_hidden = rng.standard_normal((LABEL_NET_HIDDEN, LATENT_DIM))
    w_out = rng.standard_normal(LABEL_NET_HIDDEN)
    z = rng.standard_normal((n, LATENT_DIM))
    x = np.tanh(z @ projection.T / math.sqrt(LATENT_DIM))
    score = np.tanh(z @ w_hidden.T / math.sqrt(LATENT_DIM)) @ w_out
    labels = -np.ones(n, dtype=np.int64)
    labels[np.argsort(score, kind="stable")[n // 2:]] = 1
    return Dataset(x, labels, name=f"hm{d}", seed=seed)


def _label_value(token: str, positive: str) -> int:
    return 1 if token.strip() == positive else -1


def load_csv_dataset(path: Path, feature_columns: Sequence[str],
                     label_column: str, positive: str) -> Dataset:
    rows = read_csv(path)
    if not rows:
        raise DatasetFormatError(f"{path}: no data rows")
    missing = [c for c in list(feature_columns) + [label_column]
               if c not in rows[0]]
    if missing:
        raise DatasetFormatError(f"{path}: missing columns {missing}")
    features = np.zeros((len(rows), len(feature_columns)))
    labels = np.zeros(len(rows), dtype=np.int64)
    # header is line 1
    for i, row in enumerate(rows):
        for j, col in enumerate(feature_columns):
            cell = row.get(col)
            if cell is None or cell.strip() == "":
                raise DatasetFormatError(
                    f"{path}: row {i + 2} column {col!r} is empty")
            try:
                features[i, j] = float(cell)
            except ValueError:
                raise DatasetFormatError(
                    f"{path}: row {i + 2} column {col!r} is not a number: "
                    f"{cell!r}")
        token = row.get(label_column)
        if token is None or token.strip() == "":
            raise DatasetFormatError(
                f"{path}: row {i + 2} column {label_column!r} is empty")
        labels[i] = _label_value(token, positive)
    if np.all(labels == labels[0]):
        raise DegenerateDataError(f"{path}: single-class label column")
    return Dataset(features, labels, name=path.stem)


def _open(path: Path):
    if path.suffix == ".gz":
        return gzip.open(path, "rb")
    return path.open("rb")


def read_idx(path: Path, magic: int) -> npt.NDArray[np.uint8]:
    with _open(path) as f:
        buf = f.read()
    if len(buf) < 4:
        raise DatasetFormatError(f"{path}: truncated IDX header")
    found = int.from_bytes(buf[:4], "big")
    if found != magic:
        raise DatasetFormatError(
            f"{path}: magic {found:#010x}, expected {magic:#010x}")
    n_dims = magic & 0xff
    header = 4 + 4 * n_dims
    shape = tuple(np.frombuffer(buf[4:header], dtype=">u4").astype(int))
    data = np.frombuffer(buf[header:], dtype=np.uint8)
    if data.size != int(np.prod(shape)):
        raise DatasetFormatError(
            f"{path}: {data.size} bytes of data for shape {shape}")
    return data.reshape(shape)


def load_mnist_pair(images: Path, labels: Path, digit_a: int, digit_b: int,
                    out_dim: int = 5, n_per_class: Optional[int] = None,
                    seed: int = 0) -> Dataset:
    pixels = read_idx(images, IDX_IMAGES_MAGIC)
    digits = read_idx(labels, IDX_LABELS_MAGIC)
    if pixels.shape[0] != digits.shape[0]:
        raise DatasetFormatError(
            f"{pixels.shape[0]} images for {digits.shape[0]} labels")
    rng = np.random.default_rng(seed)
    chosen = []
    for digit in (digit_a, digit_b):
        idx = np.flatnonzero(digits == digit)
        if idx.size == 0:
            raise DatasetFormatError(f"digit {digit} absent from {labels}")
        if n_per_class is not None and idx.size > n_per_class:
            idx = np.sort(rng.choice(idx, n_per_class, replace=False))
        chosen.append(idx)
    idx = np.concatenate(chosen)
    flat = pixels[idx].reshape(idx.size, -1).astype(np.float64) / 255.0
    model = pca_fit(flat, out_dim)
    y = np.where(digits[idx] == digit_a, 1, -1).astype(np.int64)
    log.info("mnist %d/%d: %d images reduced to %d components",
             digit_a, digit_b, idx.size, out_dim)
    return Dataset(pca_project(model, flat), y,
                   name=f"mnist{digit_a}{digit_b}", seed=seed)


def fit_scaler(train: Dataset) -> FeatureScaler:
    low = train.features.min(axis=0)
    high = train.features.max(axis=0)
    flat = np.flatnonzero(high <= low)
    if flat.size:
        raise DegenerateDataError(f"constant features: {flat.tolist()}")
    return FeatureScaler(low, high)


def apply_scaler(scaler: FeatureScaler, data: npt.ArrayLike,
                 clamp: bool = False) -> npt.NDArray[np.float64]:
    data = np.atleast_2d(np.asarray(data, dtype=np.float64))
    rv = scaler.scale * (data - scaler.low) / (scaler.high - scaler.low)
    if clamp:
        rv = np.clip(rv, 0.0, scaler.scale)
    return rv


def _allocate(total: int, sizes: Sequence[int]) -> List[int]:
    n = sum(sizes)
    shares = [total * s / n for s in sizes]
    rv = [math.floor(s) for s in shares]
    order = sorted(range(len(sizes)), key=lambda i: rv[i] - shares[i])
    for i in order[:total - sum(rv)]:
        rv[i] += 1
    return rv


def _class_indices(dataset: Dataset,
                   rng: np.random.Generator) -> List[npt.NDArray]:
    return [rng.permutation(np.flatnonzero(dataset.labels == c))
            for c in (1, -1)]


def stratified_split(dataset: Dataset, fraction: float,
                     seed: int) -> Tuple[Dataset, Dataset]:
    if not (0.0 < fraction < 1.0):
        raise ConfigurationError(f"fraction must be in (0, 1), got {fraction}")
    rng = np.random.default_rng(seed)
    first, second = [], []
    for idx in _class_indices(dataset, rng):
        if idx.size < 2:
            raise DegenerateDataError(
                "each class needs two points to be split")
        k = min(max(1, round(fraction * idx.size)), idx.size - 1)
        first.append(idx[:k])
        second.append(idx[k:])
    return (dataset.subset(np.sort(np.concatenate(first))),
            dataset.subset(np.sort(np.concatenate(second))))


def train_test(dataset: Dataset, n_train: int, n_test: int,
               seed: int) -> Tuple[Dataset, Dataset]:
    if n_train + n_test > len(dataset):
        raise ConfigurationError(
            f"train {n_train} + test {n_test} exceeds {len(dataset)} points")
    rng = np.random.default_rng(seed)
    classes = _class_indices(dataset, rng)
    k_train = _allocate(n_train, [c.size for c in classes])
    rest = [c[k:] for c, k in zip(classes, k_train)]
    k_test = _allocate(n_test, [c.size for c in rest])
    train = np.sort(np.concatenate([c[:k] for c, k in zip(classes, k_train)]))
    test = np.sort(np.concatenate([c[:k] for c, k in zip(rest, k_test)]))
    return dataset.subset(train), dataset.subset(test)


def dataset_to_lines(dataset: Dataset) -> Iterable[str]:
    yield json.dumps({"name": dataset.name, "seed": dataset.seed,
                      "n": len(dataset), "d": dataset.dim},
                     separators=(",", ":"))
    for label, row in zip(dataset.labels, dataset.features):
        yield " ".join([str(int(label))] + [fmt(float(v)) for v in row])


def dataset_from_lines(lines: Iterable[str]) -> Dataset:
    lines = iter(lines)
    try:
        header = json.loads(next(lines))
        d = int(header["d"])
    except (StopIteration, ValueError, KeyError, TypeError) as e:
        raise DatasetFormatError(f"bad dataset header: {e}")
    labels, features = [], []
    for lineno, line in enumerate(lines, start=2):
        if not line.strip():
            continue
        parts = line.split()
        if len(parts) != d + 1:
            raise DatasetFormatError(
                f"line {lineno}: {len(parts) - 1} values, expected {d}")
        labels.append(int(parts[0]))
        features.append([float(v) for v in parts[1:]])
    if len(labels) != header.get("n", len(labels)):
        raise DatasetFormatError(
            f"{len(labels)} records, header says {header['n']}")
    return Dataset(np.array(features, dtype=np.float64).reshape(-1, d),
                   np.array(labels, dtype=np.int64),
                   name=header.get("name", ""), seed=header.get("seed"))


def make_dataset(source: str, n: int, seed: int) -> Dataset:
    # hm4, hm5                            hidden-manifold, 4 or 5 features
    # csv:<path>:<c1,c2,..>:<label>:<pos> labelled CSV file
    # mnist:<images>:<labels>:<a>:<b>     two MNIST digits reduced to 5 dims
    kind, _, rest = source.partition(":")
    if kind in ("hm4", "hm5") and not rest:
        return gen_hidden_manifold(int(kind[2]), n, seed)
    parts = rest.split(":")
    if kind == "csv" and len(parts) == 4:
        path, cols, label, positive = parts
        return load_csv_dataset(Path(path), cols.split(","), label, positive)
    if kind == "mnist" and len(parts) == 4:
        images, labels, a, b = parts
        try:
            a, b = int(a), int(b)
        except ValueError:
            raise ConfigurationError(
                f"bad digits in dataset source {source!r}")
        return load_mnist_pair(Path(images), Path(labels), a, b,
                               n_per_class=(n + 1) // 2, seed=seed)
    raise ConfigurationError(f"unrecognised dataset source {source!r}")
