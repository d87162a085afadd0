import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from trajmdn.metrics import DistanceKind, discrete_frechet, distance, dtw, dtw_path, mtd, mtd_all, traj_hausdorff

from .oracles import dtw_brute, frechet_brute, hausdorff_brute, point_cost

trajs = st.lists(st.tuples(st.floats(-20, 20), st.floats(-20, 20)), min_size=1, max_size=6).map(np.array)


def test_hausdorff_examples():
    a = np.array([[0, 0], [1, 2], [3, 1.5]])
    assert traj_hausdorff(a, a) == 0
    assert traj_hausdorff(a, a[::-1]) == 0
    assert traj_hausdorff([(0, 0), (10, 0)], [(0, 0)]) == 5.0


def test_frechet_examples():
    assert discrete_frechet([(0, 0), (1, 0)], [(0, 0), (1, 0)]) == 0
    assert discrete_frechet([(0, 0)], [(3, 4)]) == 5.0
    assert discrete_frechet([(0, 0), (1, 0)], [(0, 1), (1, 1)]) == 1.0


def test_dtw_examples():
    assert dtw([(0, 0), (2, 1)], [(0, 0), (2, 1)]) == 0
    assert dtw([(0, 0)], [(1, 0)]) == 1.0
    assert dtw([(0, 0), (1, 0)], [(0, 0), (1, 0), (1, 0)]) == 0.0


def test_dtw_sums_rather_than_averages():
    assert dtw([(0, 0), (0, 0)], [(1, 0), (1, 0)]) == 2.0


def test_empty_rejected():
    with pytest.raises(ValueError):
        dtw(np.empty((0, 2)), [(0, 0)])


@settings(max_examples=200, deadline=None)
@given(trajs, trajs)
def test_dp_matches_enumeration_exactly(a, b):
    assert discrete_frechet(a, b) == frechet_brute(a, b)
    assert dtw(a, b) == dtw_brute(a, b)
    assert traj_hausdorff(a, b) == hausdorff_brute(a, b)


@settings(max_examples=100, deadline=None)
@given(trajs, trajs)
def test_symmetry_and_ordering(a, b):
    for kind in DistanceKind:
        assert distance(kind, a, b) == distance(kind, b, a)
        assert distance(kind, a, a) == 0
    assert discrete_frechet(a, b) >= traj_hausdorff(a, b)


@settings(max_examples=100, deadline=None)
@given(trajs, trajs)
def test_dtw_path(a, b):
    value, path = dtw_path(a, b)
    assert value == dtw(a, b)
    assert path[0] == (0, 0) and path[-1] == (len(a) - 1, len(b) - 1)
    for (i0, j0), (i1, j1) in zip(path, path[1:]):
        assert (i1 - i0, j1 - j0) in {(1, 0), (0, 1), (1, 1)}
    costs = [point_cost(a[i], b[j]) for i, j in path]
    assert sum(costs) == pytest.approx(value, rel=1e-12, abs=1e-12)
    assert value >= max(costs)


def test_single_points_dtw_equals_frechet():
    assert dtw([(1, 1)], [(4, 5)]) == discrete_frechet([(1, 1)], [(4, 5)]) == 5.0


def test_mtd_examples():
    g = np.array([[0.0, 0.0], [1.0, 0.0]])
    others = [g + [0, 3.0], g + [0, 1.0]]
    assert mtd(g, [g + 5, g]) == 0
    assert mtd(g, [others[0]], "frechet") == discrete_frechet(g, others[0])
    assert mtd(g, others, "frechet") == 1.0
    with pytest.raises(ValueError):
        mtd(g, [])
    assert set(mtd_all(g, others)) == {"hausdorff", "frechet", "dtw"}


@settings(max_examples=50, deadline=None)
@given(trajs, st.lists(trajs, min_size=1, max_size=4), trajs)
def test_mtd_monotone(gen, gts, extra):
    for kind in DistanceKind:
        assert mtd(gen, gts + [extra], kind) <= mtd(gen, gts, kind)
