from typing import List, NamedTuple, NewType, Optional, Tuple
from dataclasses import dataclass, replace
from enum import Enum
import logging
import numpy as np
import numpy.typing as npt
import networkx as nx
from scipy.optimize import minimize
from scipy.spatial.distance import cdist, pdist

from .errors import (
    ValenceError, DisconnectedGraphError, CoincidentAtomsError,
    DegenerateDataError, ShapeMismatchError, ConfigurationError,
)

log = logging.getLogger(__name__)

DISTANCE_FLOOR = 1e-3
Coordinates2D = NewType("Coordinates2D", npt.NDArray[np.float64])
CoulombMatrix = NewType("CoulombMatrix", npt.NDArray[np.float64])


class Element(Enum):
    # (atomic number, valence)
    C = (6, 4)
    N = (7, 3)
    O = (8, 2)  # noqa: E741
    S = (16, 2)
    P = (15, 3)
    H = (1, 1)

    @property
    def z(self) -> int:
        return self.value[0]

    @property
    def valence(self) -> int:
        return self.value[1]


class Role(Enum):
    backbone = "backbone"
    branch = "branch"
    hydrogen = "hydrogen"


@dataclass(frozen=True)
class Atom:
    element: Element
    role: Role
    qubit: Optional[int] = None
    position: Optional[int] = None


@dataclass(frozen=True)
class Molecule:
    atoms: Tuple[Atom, ...]
    bonds: Tuple[Tuple[int, int], ...]
    n_qubits: Optional[int] = None

    def __len__(self):
        return len(self.atoms)

    def degrees(self) -> List[int]:
        rv = [0] * len(self.atoms)
        for a, b in self.bonds:
            rv[a] += 1
            rv[b] += 1
        return rv

    @property
    def z(self) -> npt.NDArray[np.float64]:
        return np.array([a.element.z for a in self.atoms], dtype=np.float64)


class GershgorinSummary(NamedTuple):
    r_min: float
    r_max: float


@dataclass(frozen=True)
class LayoutSettings:
    bond_length: float = 1.0
    tol: float = 1e-4
    max_iter: int = 2000
    jitter: float = 0.05
    bond_scale: float = 1.5


def molecule_graph(mol: Molecule) -> nx.Graph:
    g = nx.Graph()
    g.add_nodes_from(range(len(mol.atoms)))
    g.add_edges_from(mol.bonds)
    return g


def saturate_hydrogens(mol: Molecule) -> Molecule:
    degrees = mol.degrees()
    atoms = list(mol.atoms)
    bonds = list(mol.bonds)
    for idx, atom in enumerate(mol.atoms):
        missing = atom.element.valence - degrees[idx]
        if missing < 0:
            raise ValenceError(f"atom {idx} ({atom.element.name}) has "
                               f"{degrees[idx]} bonds, valence "
                               f"{atom.element.valence}")
        for _ in range(missing):
            atoms.append(Atom(Element.H, Role.hydrogen))
            bonds.append((idx, len(atoms) - 1))
    if len(atoms) == len(mol.atoms):
        return mol
    return replace(mol, atoms=tuple(atoms), bonds=tuple(bonds))


def check_molecule(mol: Molecule) -> List[str]:
    rv = []
    for idx, (atom, degree) in enumerate(zip(mol.atoms, mol.degrees())):
        if degree != atom.element.valence:
            rv.append(f"atom {idx} ({atom.element.name}) has {degree} bonds, "
                      f"valence {atom.element.valence}")
    g = molecule_graph(mol)
    if len(mol.atoms) and not nx.is_connected(g):
        rv.append("molecule is not connected")
    backbone = [i for i, a in enumerate(mol.atoms)
                if a.role == Role.backbone]
    if any(mol.atoms[i].element != Element.C for i in backbone):
        rv.append("backbone contains a non-carbon atom")
    if backbone:
        sub = g.subgraph(backbone)
        ends = [i for i in backbone if sub.degree(i) <= 1]
        if not (nx.is_connected(sub) and nx.is_tree(sub) and
                len(ends) == min(2, len(backbone))):
            rv.append("backbone is not a simple path")
    return rv


def _check_connected(mol: Molecule) -> nx.Graph:
    g = molecule_graph(mol)
    if len(mol.atoms) == 0:
        raise DisconnectedGraphError("molecule has no atoms")
    if not nx.is_connected(g):
        raise DisconnectedGraphError(
            f"molecule has {nx.number_connected_components(g)} components")
    return g


def _targets(mol: Molecule, settings: LayoutSettings):
    g = _check_connected(mol)
    d = nx.floyd_warshall_numpy(g, nodelist=list(range(len(mol.atoms))))
    n = len(mol.atoms)
    iu = np.triu_indices(n, k=1)
    d = d[iu]
    return iu, settings.bond_length * d, 1.0 / d ** 2


def _stress(flat: npt.NDArray, iu, lengths, springs):
    pos = flat.reshape(-1, 2)
    diff = pos[iu[0]] - pos[iu[1]]
    r = np.sqrt((diff ** 2).sum(axis=1))
    gap = r - lengths
    energy = 0.5 * np.sum(springs * gap ** 2)
    coef = springs * gap / np.maximum(r, 1e-12)
    pair = coef[:, None] * diff
    grad = np.zeros_like(pos)
    np.add.at(grad, iu[0], pair)
    np.add.at(grad, iu[1], -pair)
    return energy, grad.reshape(-1)


def _initial_layout(n: int, settings: LayoutSettings,
                    seed: int) -> npt.NDArray:
    rng = np.random.default_rng(seed)
    angles = 2 * np.pi * np.arange(n) / n
    radius = max(settings.bond_length * n / (2 * np.pi), settings.bond_length)
    pos = radius * np.stack([np.cos(angles), np.sin(angles)], axis=1)
    return pos + rng.normal(scale=settings.jitter, size=pos.shape)


def layout_stress(mol: Molecule, coords: Coordinates2D,
                  settings: LayoutSettings = LayoutSettings()) -> float:
    if len(mol.atoms) < 2:
        return 0.0
    iu, lengths, springs = _targets(mol, settings)
    return float(_stress(np.asarray(coords).reshape(-1), iu, lengths,
                         springs)[0])


def stress_gradient_norm(mol: Molecule, coords: Coordinates2D,
                         settings: LayoutSettings = LayoutSettings()
                         ) -> float:
    if len(mol.atoms) < 2:
        return 0.0
    iu, lengths, springs = _targets(mol, settings)
    grad = _stress(np.asarray(coords).reshape(-1), iu, lengths, springs)[1]
    return float(np.max(np.linalg.norm(grad.reshape(-1, 2), axis=1)))


def layout_2d(mol: Molecule, settings: LayoutSettings = LayoutSettings(),
              seed: int = 0) -> Coordinates2D:
    n = len(mol.atoms)
    if n == 1:
        _check_connected(mol)
        return Coordinates2D(np.zeros((1, 2)))
    iu, lengths, springs = _targets(mol, settings)
    start = _initial_layout(n, settings, seed).reshape(-1)
    initial = _stress(start, iu, lengths, springs)[0]
    # L-BFGS-B gtol bounds the largest gradient component; halve it so the
    # per-atom norm stays below tol
    res = minimize(_stress, start, args=(iu, lengths, springs), jac=True,
                   method="L-BFGS-B",
                   options={"gtol": settings.tol / 2, "ftol": 0.0,
                            "maxiter": settings.max_iter})
    if res.fun > initial:
        log.warning("layout of %d atoms did not lower stress", n)
        return Coordinates2D(start.reshape(-1, 2))
    if res.nit >= settings.max_iter:
        log.debug("layout of %d atoms hit the iteration cap", n)
    return Coordinates2D(res.x.reshape(-1, 2))


def coulomb_matrix(mol: Molecule, coords: Coordinates2D,
                   bond_scale: float = 1.5) -> CoulombMatrix:
    coords = np.asarray(coords, dtype=np.float64)
    if coords.shape != (len(mol.atoms), 2):
        raise ShapeMismatchError(f"coordinates of shape {coords.shape} for "
                                 f"{len(mol.atoms)} atoms")
    if bond_scale <= 0:
        raise ConfigurationError(
            f"bond_scale must be positive, got {bond_scale}")
    if len(mol.atoms) > 1 and pdist(coords).min() < DISTANCE_FLOOR:
        raise CoincidentAtomsError(
            f"atoms closer than {DISTANCE_FLOOR} layout units")
    z = mol.z
    r = bond_scale * cdist(coords, coords)
    np.fill_diagonal(r, 1.0)
    m = np.outer(z, z) / r
    np.fill_diagonal(m, 0.5 * z ** 2.4)
    return CoulombMatrix(m)


def gershgorin_radii(m: npt.ArrayLike) -> GershgorinSummary:
    m = np.asarray(m)
    if m.size == 0:
        raise DegenerateDataError("empty matrix")
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ShapeMismatchError(f"matrix of shape {m.shape} is not square")
    off = np.abs(m)
    np.fill_diagonal(off, 0.0)
    radii = off.sum(axis=1)
    return GershgorinSummary(float(radii.min()), float(radii.max()))


def coulomb_eigenvalues(m: CoulombMatrix) -> npt.NDArray[np.float64]:
    return np.linalg.eigvalsh(m)


def describe_molecule(mol: Molecule,
                      settings: LayoutSettings = LayoutSettings(),
                      seed: int = 0) -> GershgorinSummary:
    coords = layout_2d(mol, settings, seed)
    return gershgorin_radii(coulomb_matrix(mol, coords, settings.bond_scale))
