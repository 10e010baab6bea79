from typing import List, Iterable, NewType
from dataclasses import dataclass
import logging
import numpy as np
import numpy.typing as npt

from .errors import (
    DegenerateDataError, ShapeMismatchError, ConfigurationError,
)
from .molecule import Molecule

log = logging.getLogger(__name__)

FNV_OFFSET = 0xcbf29ce484222325
FNV_PRIME = 0x100000001b3
MASK_64 = (1 << 64) - 1
DEFAULT_WIDTH = 2048
DEFAULT_PATH_LEN = 7

FingerprintVector = NewType("FingerprintVector", npt.NDArray[np.int64])


def fnv1a_64(data: bytes) -> int:
    h = FNV_OFFSET
    for byte in data:
        h ^= byte
        h = (h * FNV_PRIME) & MASK_64
    return h


def _simple_paths(adjacency: List[List[int]], max_len: int):
    """Each undirected simple path of 1..max_len atoms, exactly once."""
    def extend(path, seen):
        if len(path) == 1 or path[0] < path[-1]:
            yield path
        if len(path) == max_len:
            return
        for nxt in adjacency[path[-1]]:
            if nxt not in seen:
                seen.add(nxt)
                yield from extend(path + [nxt], seen)
                seen.discard(nxt)

    for start in range(len(adjacency)):
        yield from extend([start], {start})


def path_fingerprint(mol: Molecule, max_path_len: int = DEFAULT_PATH_LEN,
                     width: int = DEFAULT_WIDTH) -> FingerprintVector:
    if max_path_len < 1:
        raise ConfigurationError(
            f"max_path_len must be >= 1, got {max_path_len}")
    if width < 16:
        raise ConfigurationError(f"width must be >= 16, got {width}")
    counts = np.zeros(width, dtype=np.int64)
    adjacency: List[List[int]] = [[] for _ in mol.atoms]
    for a, b in mol.bonds:
        adjacency[a].append(b)
        adjacency[b].append(a)
    tokens = [f"{atom.element.z % 128}:{len(adjacency[i])}"
              for i, atom in enumerate(mol.atoms)]
    for path in _simple_paths(adjacency, max_path_len):
        forward = "-".join(tokens[i] for i in path)
        backward = "-".join(tokens[i] for i in reversed(path))
        key = min(forward, backward)
        counts[fnv1a_64(key.encode()) % width] += 1
    return FingerprintVector(counts)


def fingerprint_matrix(mols: Iterable[Molecule],
                       max_path_len: int = DEFAULT_PATH_LEN,
                       width: int = DEFAULT_WIDTH) -> npt.NDArray[np.int64]:
    rows = [path_fingerprint(m, max_path_len, width) for m in mols]
    if not rows:
        return np.zeros((0, width), dtype=np.int64)
    return np.stack(rows)


@dataclass(frozen=True)
class PcaModel:
    mean: npt.NDArray[np.float64]
    components: npt.NDArray[np.float64]
    variances: npt.NDArray[np.float64]

    @property
    def width(self) -> int:
        return self.mean.shape[0]

    @property
    def k(self) -> int:
        return self.components.shape[0]


def pca_fit(data: npt.ArrayLike, k: int) -> PcaModel:
    data = np.asarray(data, dtype=np.float64)
    if data.ndim != 2:
        raise ShapeMismatchError(f"expected a matrix, got shape {data.shape}")
    n, d = data.shape
    if n < 2:
        raise DegenerateDataError(f"need at least 2 rows, got {n}")
    if not (1 <= k <= min(n, d)):
        raise ConfigurationError(f"k={k} outside 1..{min(n, d)}")
    mean = data.mean(axis=0)
    centered = data - mean
    if not np.any(centered):
        raise DegenerateDataError("all rows are identical")
    _, s, vt = np.linalg.svd(centered, full_matrices=False)
    components = vt[:k].copy()
    for c in components:
        if c[np.argmax(np.abs(c))] < 0:
            c *= -1
    variances = s[:k] ** 2 / (n - 1)
    return PcaModel(mean=mean, components=components, variances=variances)


def pca_project(model: PcaModel, rows: npt.ArrayLike) -> npt.NDArray:
    rows = np.atleast_2d(np.asarray(rows, dtype=np.float64))
    if rows.shape[1] != model.width:
        raise ShapeMismatchError(
            f"rows of width {rows.shape[1]}, model width {model.width}")
    return (rows - model.mean) @ model.components.T


def pca_reconstruct(model: PcaModel, scores: npt.ArrayLike) -> npt.NDArray:
    return np.atleast_2d(scores) @ model.components + model.mean
