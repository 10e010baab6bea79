from typing import Optional, TYPE_CHECKING
from functools import lru_cache
import logging
import numpy as np
import numpy.typing as npt

from .circuit import CircuitGrid, SlotKind, count_rz, circuit_digest
from .errors import ShapeMismatchError, DatasetFormatError
from .utils import array_digest

if TYPE_CHECKING:
    from .gram_cache import GramCache

log = logging.getLogger(__name__)


@lru_cache(maxsize=16)
def _bits(n_qubits: int) -> npt.NDArray[np.int64]:
    idx = np.arange(2 ** n_qubits)
    shifts = n_qubits - 1 - np.arange(n_qubits)
    return (idx[None, :] >> shifts[:, None]) & 1


def _signs(n_qubits: int) -> npt.NDArray[np.float64]:
    # +1 where the qubit's bit is 0, -1 where it is 1
    return 1.0 - 2.0 * _bits(n_qubits)


def _pad(x: npt.ArrayLike, n_qubits: int) -> npt.NDArray[np.float64]:
    x = np.atleast_2d(np.asarray(x, dtype=np.float64))
    if x.shape[1] > n_qubits:
        raise ShapeMismatchError(
            f"{x.shape[1]} features for {n_qubits} qubits")
    if not np.all(np.isfinite(x)):
        raise DatasetFormatError("features must be finite")
    rv = np.zeros((x.shape[0], n_qubits))
    rv[:, :x.shape[1]] = x
    return rv


def feature_states(xs: npt.ArrayLike, n_qubits: int) -> npt.NDArray:
    xs = _pad(xs, n_qubits)
    return np.exp(1j * (xs @ _signs(n_qubits))) / np.sqrt(2.0 ** n_qubits)


def feature_state(x: npt.ArrayLike, n_qubits: int) -> npt.NDArray:
    return feature_states(x, n_qubits)[0]


def _check_theta(grid: CircuitGrid, theta: npt.ArrayLike):
    theta = np.asarray(theta, dtype=np.float64).reshape(-1)
    if theta.shape[0] != count_rz(grid):
        raise ShapeMismatchError(
            f"theta has {theta.shape[0]} angles, circuit has "
            f"{count_rz(grid)} RZ gates")
    return theta


def evolve_batch(states: npt.NDArray, grid: CircuitGrid,
                 theta: npt.ArrayLike, xs: npt.ArrayLike) -> npt.NDArray:
    n = grid.n_qubits
    theta = _check_theta(grid, theta)
    xs = _pad(xs, n)
    states = np.array(states, dtype=np.complex128, copy=True)
    signs = _signs(n)
    bits = _bits(n)
    idx = np.arange(2 ** n)
    t_idx = 0
    for row, _, slot in grid.scan():
        if slot.kind == SlotKind.rz:
            phase = theta[t_idx] * np.outer(xs[:, row], signs[row])
            states *= np.exp(-1j * phase)
            t_idx += 1
        elif slot.kind == SlotKind.control:
            target = (row + slot.delta) % n
            perm = idx ^ (bits[row] << (n - 1 - target))
            states = states[:, perm]
    return states


def evolve(psi: npt.NDArray, grid: CircuitGrid, theta: npt.ArrayLike,
           x: npt.ArrayLike) -> npt.NDArray:
    return evolve_batch(np.atleast_2d(psi), grid, theta, x)[0]


def encoded_states(xs: npt.ArrayLike, grid: CircuitGrid,
                   theta: npt.ArrayLike) -> npt.NDArray:
    return evolve_batch(feature_states(xs, grid.n_qubits), grid, theta, xs)


def kernel_value(x: npt.ArrayLike, x_prime: npt.ArrayLike,
                 grid: CircuitGrid, theta: npt.ArrayLike) -> float:
    a = encoded_states(x, grid, theta)[0]
    b = encoded_states(x_prime, grid, theta)[0]
    return float(np.abs(np.vdot(b, a)) ** 2)


def gram_matrix(xs: npt.ArrayLike, xs_prime: npt.ArrayLike,
                grid: CircuitGrid, theta: npt.ArrayLike,
                cache: Optional["GramCache"] = None) -> npt.NDArray:
    xs = np.atleast_2d(np.asarray(xs, dtype=np.float64))
    xs_prime = np.atleast_2d(np.asarray(xs_prime, dtype=np.float64))
    key = None
    if cache is not None:
        key = cache.key(circuit_digest(grid), theta_digest(theta),
                        dataset_digest(xs), dataset_digest(xs_prime))
        hit = cache.get(key)
        if hit is not None:
            return hit
    a = encoded_states(xs, grid, theta)
    b = a if xs_prime is xs else encoded_states(xs_prime, grid, theta)
    rv = np.abs(a.conj() @ b.T) ** 2
    if cache is not None:
        cache.store(key, rv)
    return rv


def theta_digest(theta: npt.ArrayLike) -> str:
    return array_digest(np.asarray(theta).reshape(-1))


def dataset_digest(xs: npt.ArrayLike) -> str:
    return array_digest(xs)
