from typing import List, Optional, Tuple, Iterable
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
import json
import logging
import numpy as np

from .errors import InvalidPolicyError, InvalidGridError
from .utils import digest

log = logging.getLogger(__name__)


class SlotKind(Enum):
    identity = "I"
    rz = "RZ"
    control = "C"
    target = "T"


@dataclass(frozen=True)
class GateSlot:
    kind: SlotKind
    delta: Optional[int] = None

    def __post_init__(self):
        if (self.kind == SlotKind.control) != (self.delta is not None):
            raise InvalidGridError(
                f"delta {self.delta} not allowed on a {self.kind.name} slot")

    @property
    def code(self) -> str:
        if self.kind == SlotKind.control:
            return f"C{self.delta}"
        return self.kind.value

    @classmethod
    def from_code(cls, code: str) -> "GateSlot":
        if code.startswith("C"):
            try:
                return cls(SlotKind.control, int(code[1:]))
            except ValueError:
                raise InvalidGridError(f"bad slot code {code!r}")
        try:
            return cls(SlotKind(code))
        except ValueError:
            raise InvalidGridError(f"bad slot code {code!r}")


IDENTITY = GateSlot(SlotKind.identity)
RZ = GateSlot(SlotKind.rz)
TARGET = GateSlot(SlotKind.target)


def control(delta: int) -> GateSlot:
    return GateSlot(SlotKind.control, delta)


@dataclass(frozen=True)
class CircuitGrid:
    n_qubits: int
    n_layers: int
    # slots[row][layer]
    slots: Tuple[Tuple[GateSlot, ...], ...]

    def slot(self, row: int, layer: int) -> GateSlot:
        return self.slots[row][layer]

    def layer(self, layer: int) -> Tuple[GateSlot, ...]:
        return tuple(row[layer] for row in self.slots)

    def scan(self) -> Iterable[Tuple[int, int, GateSlot]]:
        # layer-major, then qubit; theta entries follow this order
        for layer in range(self.n_layers):
            for row in range(self.n_qubits):
                yield row, layer, self.slots[row][layer]

    @classmethod
    def from_rows(cls, rows) -> "CircuitGrid":
        rows = tuple(tuple(r) for r in rows)
        n_layers = len(rows[0]) if rows else 0
        return cls(n_qubits=len(rows), n_layers=n_layers, slots=rows)

    @classmethod
    def empty(cls, n_qubits: int) -> "CircuitGrid":
        return cls(n_qubits, 0, tuple(() for _ in range(n_qubits)))


@dataclass(frozen=True)
class GatePolicy:
    p_identity: float = 0.2
    p_rz: float = 0.5
    p_cnot: float = 0.3
    delta_max: Optional[int] = None

    def check(self):
        probs = (self.p_identity, self.p_rz, self.p_cnot)
        if any(not (0.0 <= p <= 1.0) for p in probs):
            raise InvalidPolicyError(f"probabilities out of [0, 1]: {probs}")
        if abs(sum(probs) - 1.0) > 1e-12:
            raise InvalidPolicyError(f"probabilities sum to {sum(probs)}")
        if self.delta_max is not None and self.delta_max < 1:
            raise InvalidPolicyError(f"delta_max {self.delta_max} < 1")

    def resolved_delta_max(self, n_qubits: int) -> int:
        if self.delta_max is None:
            return n_qubits - 1
        return min(self.delta_max, n_qubits - 1)


def _check_inputs(n_qubits: int, n_layers: int, policy: GatePolicy):
    if n_qubits < 2:
        raise InvalidGridError(f"n_qubits must be >= 2, got {n_qubits}")
    if n_layers < 0:
        raise InvalidGridError(f"n_layers must be >= 0, got {n_layers}")
    policy.check()


def _sample_layer(n_qubits: int, policy: GatePolicy,
                  rng: np.random.Generator) -> List[GateSlot]:
    delta_max = policy.resolved_delta_max(n_qubits)
    rz_edge = policy.p_identity + policy.p_rz
    layer: List[Optional[GateSlot]] = [None] * n_qubits
    for q in range(n_qubits):
        if layer[q] is not None:
            continue
        u = rng.random()
        if u < policy.p_identity:
            layer[q] = IDENTITY
        elif u < rz_edge:
            layer[q] = RZ
        else:
            delta = int(rng.integers(1, delta_max + 1))
            t = (q + delta) % n_qubits
            if layer[t] is not None:
                # target already taken this layer
                layer[q] = RZ
            else:
                layer[q] = control(delta)
                layer[t] = TARGET
    return layer


def _sample_layers(n_qubits: int, n_layers: int, policy: GatePolicy,
                   rng: np.random.Generator) -> List[List[GateSlot]]:
    return [_sample_layer(n_qubits, policy, rng) for _ in range(n_layers)]


def _from_layers(n_qubits: int, layers: List[List[GateSlot]]) -> CircuitGrid:
    rows = tuple(tuple(layer[q] for layer in layers)
                 for q in range(n_qubits))
    return CircuitGrid(n_qubits, len(layers), rows)


def sample_circuit(n_qubits: int, n_layers: int, policy: GatePolicy,
                   seed: int) -> CircuitGrid:
    _check_inputs(n_qubits, n_layers, policy)
    rng = np.random.default_rng(seed)
    return _from_layers(n_qubits,
                        _sample_layers(n_qubits, n_layers, policy, rng))


def extend_circuit(grid: CircuitGrid, extra_layers: int, policy: GatePolicy,
                   seed: int) -> CircuitGrid:
    require_valid(grid)
    _check_inputs(grid.n_qubits, extra_layers, policy)
    if extra_layers == 0:
        return grid
    rng = np.random.default_rng(seed)
    prefix = [list(grid.layer(layer)) for layer in range(grid.n_layers)]
    suffix = _sample_layers(grid.n_qubits, extra_layers, policy, rng)
    return _from_layers(grid.n_qubits, prefix + suffix)


def validate_grid(grid: CircuitGrid) -> List[str]:
    rv = []
    n = grid.n_qubits
    if n < 2:
        rv.append(f"n_qubits {n} < 2")
    if len(grid.slots) != n:
        rv.append(f"{len(grid.slots)} rows for {n} qubits")
        return rv
    for row, slots in enumerate(grid.slots):
        if len(slots) != grid.n_layers:
            rv.append(f"row {row} has {len(slots)} slots, "
                      f"expected {grid.n_layers}")
    if rv:
        return rv
    for layer in range(grid.n_layers):
        claims = [0] * n
        for row in range(n):
            slot = grid.slots[row][layer]
            if slot.kind != SlotKind.control:
                continue
            if not (1 <= slot.delta <= n - 1):
                rv.append(f"control at (row {row}, layer {layer}) has "
                          f"offset {slot.delta} outside 1..{n - 1}")
                continue
            t = (row + slot.delta) % n
            if grid.slots[t][layer].kind != SlotKind.target:
                rv.append(f"control at (row {row}, layer {layer}) has no "
                          f"target at row {t}")
                continue
            claims[t] += 1
        for row in range(n):
            if grid.slots[row][layer].kind != SlotKind.target:
                continue
            if claims[row] == 0:
                rv.append(f"target at (row {row}, layer {layer}) has no "
                          "control")
            elif claims[row] > 1:
                rv.append(f"target at (row {row}, layer {layer}) claimed by "
                          f"{claims[row]} controls")
    return rv


def require_valid(grid: CircuitGrid):
    violations = validate_grid(grid)
    if violations:
        raise InvalidGridError("; ".join(violations))


def _count(grid: CircuitGrid, kind: SlotKind) -> int:
    return sum(1 for row in grid.slots for s in row if s.kind == kind)


def count_rz(grid: CircuitGrid) -> int:
    return _count(grid, SlotKind.rz)


def count_cnots(grid: CircuitGrid) -> int:
    return _count(grid, SlotKind.control)


def count_identities(grid: CircuitGrid) -> int:
    return _count(grid, SlotKind.identity)


def strip_row(grid: CircuitGrid, row: int) -> List[GateSlot]:
    return [s for s in grid.slots[row]
            if s.kind in (SlotKind.rz, SlotKind.control)]


def circuit_to_line(grid: CircuitGrid) -> str:
    codes = [slot.code for _, _, slot in grid.scan()]
    return json.dumps({"n_qubits": grid.n_qubits,
                       "n_layers": grid.n_layers,
                       "slots": codes}, separators=(",", ":"))


def circuit_from_line(text: str) -> CircuitGrid:
    try:
        record = json.loads(text)
        n_qubits, n_layers = int(record["n_qubits"]), int(record["n_layers"])
        codes = record["slots"]
    except (ValueError, KeyError, TypeError) as e:
        raise InvalidGridError(f"malformed circuit record: {e}")
    if len(codes) != n_qubits * n_layers:
        raise InvalidGridError(
            f"{len(codes)} slot codes for a {n_qubits}x{n_layers} grid")
    layers = [[GateSlot.from_code(codes[layer * n_qubits + q])
               for q in range(n_qubits)] for layer in range(n_layers)]
    return _from_layers(n_qubits, layers)


def circuit_digest(grid: CircuitGrid) -> str:
    return digest(circuit_to_line(grid))


def read_circuits(path: Path) -> List[CircuitGrid]:
    with path.open("r") as f:
        return [circuit_from_line(line) for line in f if line.strip()]


def write_circuits(path: Path, grids: Iterable[CircuitGrid]):
    path.parent.mkdir(exist_ok=True, parents=True)
    with path.open("w") as f:
        for grid in grids:
            f.write(circuit_to_line(grid))
            f.write("\n")
