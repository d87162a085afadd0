import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from trajmdn.similarity import (
    KernelConfig,
    gram_features,
    gram_matrix,
    hausdorff_kernel,
    kernel_from_distance,
    one_sided_hausdorff,
    query_feature,
    symmetric_hausdorff,
)


def brute_one_sided(a, b):
    """Exhaustive pair enumeration."""
    best = 0.0
    for ax, ay in a:
        nearest = math.inf
        for bx, by in b:
            dx, dy = ax - bx, ay - by
            nearest = min(nearest, math.sqrt(dx * dx + dy * dy))
        best = max(best, nearest)
    return best


def brute_kernel(a, b, ell):
    d = 0.5 * (brute_one_sided(a, b) + brute_one_sided(b, a))
    return math.exp(-d * d / (2 * ell))


points = st.lists(st.tuples(st.floats(-50, 50), st.floats(-50, 50)), min_size=1, max_size=50)


def test_examples():
    assert one_sided_hausdorff([(0, 0)], [(3, 4)]) == 5.0
    assert one_sided_hausdorff([(0, 0), (10, 0)], [(0, 0)]) == 10.0
    assert symmetric_hausdorff([(0, 0), (10, 0)], [(0, 0)]) == 5.0
    assert symmetric_hausdorff([(0, 0)], [(0, 0), (10, 0)]) == 5.0
    a = [(1, 2), (3, 4)]
    assert one_sided_hausdorff(a, a) == 0.0
    assert hausdorff_kernel(a, a) == 1.0


def test_kernel_length_scale_unsquared():
    assert kernel_from_distance(5.0, KernelConfig(50.0)) == pytest.approx(math.exp(-0.25), abs=1e-15)
    assert math.exp(-0.25) == pytest.approx(0.7788, abs=1e-4)


def test_kernel_tends_to_one():
    values = [kernel_from_distance(5.0, KernelConfig(ell)) for ell in (1, 10, 100, 1e4, 1e8)]
    assert all(a < b for a, b in zip(values, values[1:]))
    assert values[-1] == pytest.approx(1.0, abs=1e-6)


def test_kernel_never_zero():
    assert 0 < kernel_from_distance(1e6, KernelConfig(1.0)) <= 1


def test_empty_set_rejected():
    with pytest.raises(ValueError):
        one_sided_hausdorff(np.empty((0, 2)), [(0, 0)])


@settings(max_examples=200, deadline=None)
@given(points, points)
def test_matches_brute_force_exactly(a, b):
    assert one_sided_hausdorff(a, b) == brute_one_sided(a, b)
    assert symmetric_hausdorff(a, b) == symmetric_hausdorff(b, a)


@settings(max_examples=100, deadline=None)
@given(points, st.floats(1e-3, 1e3))
def test_kernel_range(a, ell):
    b = np.asarray(a) + 1.7
    v = hausdorff_kernel(a, b, KernelConfig(ell))
    assert 0 < v <= 1


@settings(max_examples=60, deadline=None)
@given(points, points)
def test_zero_iff_subset(a, b):
    sub = a[: max(1, len(a) // 2)]
    assert one_sided_hausdorff(sub, a) == 0.0
    inside = all(min(math.dist(p, q) for q in b) <= 1e-12 for p in a)
    assert (one_sided_hausdorff(a, b) <= 1e-12) == inside


def test_gram_examples(rng):
    one = gram_features([rng.normal(size=(5, 2))])
    assert one[0].values.tolist() == [1.0]
    a, b = rng.normal(size=(7, 2)), rng.normal(size=(4, 2))
    g = gram_matrix([a, b])
    assert g[0, 1] == g[1, 0] == hausdorff_kernel(a, b)


def test_gram_invariants(rng):
    maps = [rng.uniform(0, 30, size=(rng.integers(1, 40), 2)) for _ in range(12)]
    cfg = KernelConfig(50.0)
    g = gram_matrix(maps, cfg)
    assert np.array_equal(np.diag(g), np.ones(12))
    assert np.max(np.abs(g - g.T)) <= 1e-12
    assert np.all((g > 0) & (g <= 1))
    for i in range(12):
        for j in range(12):
            if i != j:
                assert g[i, j] == pytest.approx(brute_kernel(maps[i], maps[j], 50.0), rel=0, abs=1e-15)


def test_query_feature(rng):
    maps = [rng.uniform(0, 30, size=(10, 2)) for _ in range(5)]
    f = query_feature(maps[3], maps)
    assert len(f.values) == 5
    assert f.values[3] == 1.0
    new = rng.uniform(0, 30, size=(8, 2))
    f = query_feature(new, maps, KernelConfig(20.0), ids=list("abcde"))
    assert f.reference_ids == tuple("abcde")
    assert f.values.tolist() == [hausdorff_kernel(new, m, KernelConfig(20.0)) for m in maps]
