import math

import numpy as np
import pytest

from onlineadvice.model import CoveringInstance, PackingInstance, SparseRow
from onlineadvice.objectives import LinearConcave, LinearObjective, PowerNormObjective, CallableObjective
from onlineadvice.oracles import (
    conjugate_fallback,
    enumerate_vertices,
    offline_opt_covering,
    offline_opt_packing,
    weak_duality_check,
)


def cover(n, rows, obj):
    return CoveringInstance(n, [SparseRow.from_pairs(i, r) for i, r in enumerate(rows)], obj)


@pytest.mark.parametrize("mode", ["auto", "enum", "fw", "grid"])
def test_symmetric_lp(mode):
    est = offline_opt_covering(cover(2, [[(0, 1.0), (1, 1.0)]], LinearObjective([1.0, 1.0])), mode)
    assert est.lower - 1e-9 <= 1.0 <= est.upper + 1e-9
    assert est.value == pytest.approx(1.0, abs=max(est.gap_bound, 1e-9))


@pytest.mark.parametrize("mode", ["enum", "fw"])
def test_two_row_lp(mode):
    est = offline_opt_covering(cover(2, [[(0, 1.0), (1, 1.0)], [(0, 1.0)]], LinearObjective([2.0, 1.0])), mode)
    assert est.value == pytest.approx(2.0, abs=1e-9)
    assert np.allclose(est.point, [1.0, 0.0], atol=1e-6)


@pytest.mark.parametrize("mode", ["grid", "fw"])
def test_euclidean_norm_bracket(mode):
    # ||x||_2 = sqrt(||x||_2^2); bracket the square and take roots
    est = offline_opt_covering(cover(2, [[(0, 1.0), (1, 1.0)]], PowerNormObjective(np.eye(2), 2.0)), mode)
    assert est.lower - 1e-9 <= 0.5 <= est.upper + 1e-9
    assert math.sqrt(est.upper) == pytest.approx(1 / math.sqrt(2), abs=1e-3)


def knapsack():
    # row 0: (w/v) y <= C; rows 1, 2: boxes y_i <= v_i
    rows = [SparseRow.from_pairs(0, [(0, 0.5), (1, 1.0)]), SparseRow.from_pairs(1, [(0, 2 / 3), (2, 1.0)])]
    return PackingInstance(3, [2.0, 2.0, 3.0], rows, LinearConcave([1.0, 1.0]))


@pytest.mark.parametrize("mode", ["auto", "greedy", "enum", "lp", "grid"])
def test_knapsack_opt(mode):
    est = offline_opt_packing(knapsack(), mode)
    assert est.lower - 1e-9 <= 3.5 <= est.upper + 1e-9


def test_empty_packing():
    est = offline_opt_packing(PackingInstance(1, [1.0], [], LinearConcave([])))
    assert est.value == 0.0


def test_single_item_huge_capacity():
    inst = PackingInstance(2, [1e9, 4.0], [SparseRow.from_pairs(0, [(0, 1.0), (1, 1.0)])], LinearConcave([1.0]))
    assert offline_opt_packing(inst).value == pytest.approx(4.0)


def test_weak_duality_check():
    assert weak_duality_check(1.0, math.log(2) / math.log(3))
    assert weak_duality_check(0.0, 0.0)
    assert not weak_duality_check(1.0, 1.1, tol=1e-9)


def test_conjugate_fallback_square():
    f = CallableObjective(1, lambda x: float(x[0] ** 2), lambda x: 2 * x, p=2.0)
    br = conjugate_fallback(f, [2.0], ([0.0], [5.0]))
    assert br.lower <= 1.0 + 1e-9 <= br.upper + 2e-9
    assert br.width <= 1e-6


def test_conjugate_fallback_linear():
    f = CallableObjective(1, lambda x: float(x[0]), lambda x: np.ones(1))
    assert conjugate_fallback(f, [1.0], ([0.0], [3.0])).lower == pytest.approx(0.0, abs=1e-12)
    assert conjugate_fallback(f, [0.5], ([0.0], [3.0])).upper == pytest.approx(0.0, abs=1e-12)


def test_enumerate_vertices_square():
    G = np.vstack([np.eye(2), -np.eye(2)])
    h = np.array([0.0, 0.0, -1.0, -1.0])
    V = enumerate_vertices(G, h)
    assert sorted(map(tuple, V)) == [(0.0, 0.0), (0.0, 1.0), (1.0, 0.0), (1.0, 1.0)]
