from typing import Dict, List, Tuple, Iterable
from pathlib import Path
import json
import logging
import math

from .circuit import (
    CircuitGrid, GateSlot, SlotKind, RZ, IDENTITY, TARGET, control,
    require_valid, strip_row,
)
from .errors import (
    UnmappableOffsetError, AnnotationError, InvalidGridError,
)
from .molecule import Atom, Element, Molecule, Role, saturate_hydrogens

log = logging.getLogger(__name__)

OFFSET_TO_ELEMENT: Dict[int, Element] = {
    1: Element.N,
    2: Element.O,
    3: Element.S,
    4: Element.P,
}
ELEMENT_TO_OFFSET = {v: k for k, v in OFFSET_TO_ELEMENT.items()}


def backbone_carbon_count(n_qubits: int) -> int:
    if n_qubits < 2:
        raise InvalidGridError(f"n_qubits must be >= 2, got {n_qubits}")
    return max(1, math.ceil(n_qubits / 2) - 1)


def branch_capacity(n_carbons: int) -> List[int]:
    if n_carbons == 1:
        return [4]
    return [3] + [2] * (n_carbons - 2) + [3]


def _branch_roots(n_qubits: int) -> List[int]:
    caps = branch_capacity(backbone_carbon_count(n_qubits))
    return [c for c, cap in enumerate(caps) for _ in range(cap)]


def _gate_element(slot: GateSlot, row: int, layer: int) -> Element:
    if slot.kind == SlotKind.rz:
        return Element.C
    if slot.delta not in OFFSET_TO_ELEMENT:
        raise UnmappableOffsetError(row, layer, slot.delta)
    return OFFSET_TO_ELEMENT[slot.delta]


def circuit_to_molecule(grid: CircuitGrid) -> Molecule:
    require_valid(grid)
    n_carbons = backbone_carbon_count(grid.n_qubits)
    roots = _branch_roots(grid.n_qubits)
    atoms: List[Atom] = [Atom(Element.C, Role.backbone)
                         for _ in range(n_carbons)]
    bonds: List[Tuple[int, int]] = [(c, c + 1) for c in range(n_carbons - 1)]
    for q in range(grid.n_qubits):
        parent = roots[q]
        position = 0
        for layer, slot in enumerate(grid.slots[q]):
            if slot.kind in (SlotKind.identity, SlotKind.target):
                continue
            atoms.append(Atom(_gate_element(slot, q, layer), Role.branch,
                              qubit=q, position=position))
            bonds.append((parent, len(atoms) - 1))
            parent = len(atoms) - 1
            position += 1
    return saturate_hydrogens(Molecule(tuple(atoms), tuple(bonds),
                                       n_qubits=grid.n_qubits))


def _branch_gates(mol: Molecule) -> List[List[GateSlot]]:
    if mol.n_qubits is None:
        raise AnnotationError("molecule carries no qubit count")
    n = mol.n_qubits
    chains: List[Dict[int, Element]] = [{} for _ in range(n)]
    for idx, atom in enumerate(mol.atoms):
        if atom.role != Role.branch:
            continue
        if atom.qubit is None or atom.position is None:
            raise AnnotationError(f"branch atom {idx} lacks qubit/position")
        if not (0 <= atom.qubit < n):
            raise AnnotationError(f"branch atom {idx} names qubit "
                                  f"{atom.qubit} of {n}")
        if atom.position in chains[atom.qubit]:
            raise AnnotationError(f"qubit {atom.qubit} has two atoms at "
                                  f"position {atom.position}")
        chains[atom.qubit][atom.position] = atom.element
    rv = []
    for q, chain in enumerate(chains):
        gates = []
        for position in sorted(chain):
            element = chain[position]
            if element == Element.C:
                gates.append(RZ)
            elif element in ELEMENT_TO_OFFSET:
                delta = ELEMENT_TO_OFFSET[element]
                if delta >= n:
                    raise AnnotationError(
                        f"offset {delta} on qubit {q} needs more than "
                        f"{n} qubits")
                gates.append(control(delta))
            else:
                raise AnnotationError(
                    f"{element.name} on qubit {q} encodes no gate")
        rv.append(gates)
    return rv


def molecule_to_circuit(mol: Molecule) -> CircuitGrid:
    branches = _branch_gates(mol)
    n = len(branches)
    layers: List[List[GateSlot]] = []
    # earliest layer each row may still use
    frontier = [0] * n

    def free(row: int, layer: int) -> bool:
        return (layer >= len(layers) or
                layers[layer][row].kind == SlotKind.identity)

    depth = max((len(b) for b in branches), default=0)
    for position in range(depth):
        for q in range(n):
            if position >= len(branches[q]):
                continue
            gate = branches[q][position]
            t = (q + gate.delta) % n if gate.kind == SlotKind.control else q
            layer = frontier[q]
            while not (free(q, layer) and free(t, layer)):
                layer += 1
            while layer >= len(layers):
                layers.append([IDENTITY] * n)
            layers[layer][q] = gate
            if gate.kind == SlotKind.control:
                layers[layer][t] = TARGET
            frontier[q] = layer + 1
    rows = [[layer[q] for layer in layers] for q in range(n)]
    grid = CircuitGrid(n, len(layers), tuple(tuple(r) for r in rows))
    require_valid(grid)
    return grid


def row_sequences(grid: CircuitGrid) -> List[List[GateSlot]]:
    return [strip_row(grid, q) for q in range(grid.n_qubits)]


def molecule_to_line(mol: Molecule) -> str:
    return json.dumps({
        "n_qubits": mol.n_qubits,
        "atoms": [[a.element.name, a.role.value, a.qubit, a.position]
                  for a in mol.atoms],
        "bonds": [list(b) for b in mol.bonds],
    }, separators=(",", ":"))


def molecule_from_line(text: str) -> Molecule:
    try:
        record = json.loads(text)
        atoms = tuple(Atom(Element[e], Role(r), q, p)
                      for e, r, q, p in record["atoms"])
        bonds = tuple((int(a), int(b)) for a, b in record["bonds"])
    except (ValueError, KeyError, TypeError) as e:
        raise AnnotationError(f"malformed molecule record: {e}")
    return Molecule(atoms, bonds, n_qubits=record.get("n_qubits"))


def write_molecules(path: Path, mols: Iterable[Molecule]):
    path.parent.mkdir(exist_ok=True, parents=True)
    with path.open("w") as f:
        for mol in mols:
            f.write(molecule_to_line(mol))
            f.write("\n")
