import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from asknav import oracles
from asknav.geometry import (
    GridMap,
    distance_field,
    geodesic_distance,
    is_connected,
    line_of_sight,
    supercover_between,
    window_visibility,
)

from helpers import open_arena

# hand-built <= 7x7 maps used by the BFS oracle and the acceptance suite
MAPS = {
    "u_detour": [
        "#######",
        "#.....#",
        "#.###.#",
        "#.#.#.#",
        "#.#.#.#",
        "#...#.#",
        "#######",
    ],
    "u_closed": [
        "#######",
        "#.....#",
        "#.###.#",
        "#.#.#.#",
        "#.#####",
        "#.....#",
        "#######",
    ],
    "spiral": [
        "#######",
        "#.....#",
        "####..#",
        "#...#.#",
        "#.#...#",
        "#.#####",
        "#######",
    ],
    "open5": [
        "#####",
        "#...#",
        "#...#",
        "#...#",
        "#####",
    ],
    "split": [
        "######",
        "#..#.#",
        "#..#.#",
        "######",
    ],
}


def test_supercover_hand_enumerated():
    assert supercover_between(0, 0) == ()
    assert supercover_between(0, 4) == ((0, 1), (0, 2), (0, 3))
    assert set(supercover_between(1, 2)) == {(0, 1), (1, 1)}
    # exact diagonal touches the corner-adjacent cells as well
    assert set(supercover_between(2, 2)) == {(0, 1), (1, 0), (1, 1), (1, 2), (2, 1)}
    assert set(supercover_between(-2, -2)) == {(0, -1), (-1, 0), (-1, -1), (-1, -2), (-2, -1)}


def test_line_of_sight_examples():
    grid = GridMap(np.zeros((5, 5), dtype=bool))
    assert line_of_sight(grid, (2, 2), (2, 2))
    assert line_of_sight(grid, (2, 0), (2, 4))
    occ = np.zeros((5, 5), dtype=bool)
    occ[2, 2] = True
    walled = GridMap(occ)
    assert not line_of_sight(walled, (2, 0), (2, 4))
    assert not line_of_sight(walled, (0, 0), (4, 4))
    assert line_of_sight(walled, (0, 0), (4, 3)) is False  # passes through (2,1.5)->(2,2) edge
    assert line_of_sight(walled, (0, 0), (0, 4))
    # endpoint occupancy ignored
    assert line_of_sight(walled, (2, 0), (2, 2))


def test_line_of_sight_matches_oracle_on_walled_map():
    occ = GridMap.from_ascii(MAPS["spiral"]).occupied
    grid = GridMap(occ)
    cells = [(r, c) for r in range(7) for c in range(7)]
    for a in cells[::3]:
        for b in cells:
            assert line_of_sight(grid, a, b) == oracles.brute_line_of_sight(occ, a, b), (a, b)


occupancy = st.integers(0, 2**30).map(
    lambda s: np.random.default_rng(s).random((6, 6)) < 0.3
)
cell6 = st.tuples(st.integers(0, 5), st.integers(0, 5))


@settings(max_examples=150, deadline=None)
@given(occupancy, cell6, cell6)
def test_line_of_sight_symmetric_and_matches_brute_force(occ, a, b):
    grid = GridMap(occ)
    los = line_of_sight(grid, a, b)
    assert los == line_of_sight(grid, b, a)
    assert los == oracles.brute_line_of_sight(occ, a, b)


@pytest.mark.parametrize("name", sorted(MAPS))
def test_bfs_equals_path_enumeration(name):
    grid = GridMap.from_ascii(MAPS[name])
    free = grid.free_cells()
    for start in free:
        for goal in free:
            assert geodesic_distance(grid, start, [goal]) == oracles.enumerate_shortest_path(
                grid.occupied, start, [goal]
            ), (start, goal)


def test_geodesic_examples():
    grid = open_arena(7, 7)
    assert geodesic_distance(grid, (3, 3), [(3, 3), (1, 1)]) == 0
    assert geodesic_distance(grid, (3, 1), [(3, 4)]) == 3
    detour = GridMap.from_ascii(MAPS["u_detour"])
    # two cells apart as the crow flies, ten steps around the U
    assert geodesic_distance(detour, (3, 3), [(1, 3)]) == 10
    assert geodesic_distance(detour, (5, 1), [(5, 5)]) == 12


def test_unreachable_sentinel():
    grid = GridMap.from_ascii(MAPS["split"])
    assert geodesic_distance(grid, (1, 1), [(1, 4)]) is None
    assert not is_connected(grid)
    assert is_connected(open_arena())


def test_distance_field_multi_source():
    grid = open_arena(7, 7)
    d = distance_field(grid, [(1, 1), (5, 5)])
    assert d[1, 1] == 0 and d[5, 5] == 0 and d[3, 3] == 4 and d[0, 0] == -1


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2**30), st.integers(0, 3))
def test_window_visibility_agrees_with_line_of_sight(seed, heading):
    rng = np.random.default_rng(seed)
    occ = rng.random((9, 9)) < 0.25
    occ[0, :] = occ[-1, :] = occ[:, 0] = occ[:, -1] = True
    free = np.argwhere(~occ)
    if len(free) == 0:
        return
    cell = tuple(int(x) for x in free[rng.integers(len(free))])
    grid = GridMap(occ)
    world, inb, visible = window_visibility(grid, 7, cell, heading)
    for (r, c), i, v in zip(world, inb, visible):
        if not i:
            assert not v
        else:
            assert v == line_of_sight(grid, cell, (int(r), int(c)))
