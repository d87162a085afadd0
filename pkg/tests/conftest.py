import numpy as np
import pytest

from trajmdn.grid import OccupancyGrid


def room_grid(rows=12, cols=16):
    """Walled rectangle with one free interior."""
    cells = np.ones((rows, cols), dtype=np.uint8)
    cells[1:-1, 1:-1] = 0
    return OccupancyGrid(cells)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def open_grid():
    return room_grid()
