import pytest

from qcmol.circuit import CircuitGrid, GateSlot


def grid_from_codes(*rows: str) -> CircuitGrid:
    """Rows of space-separated slot codes.

    e.g. grid_from_codes("C1 RZ", "T I")
    """
    return CircuitGrid.from_rows(
        [[GateSlot.from_code(c) for c in row.split()] for row in rows])


@pytest.fixture
def make_grid():
    return grid_from_codes
