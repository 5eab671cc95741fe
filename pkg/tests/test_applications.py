import math

import networkx as nx
import numpy as np
import pytest

from onlineadvice import applications as apps
from onlineadvice.covering import PdlaConfig, run_pdla
from onlineadvice.objectives import Utility
from onlineadvice.oracles import offline_opt_packing


def test_knapsack_reduction():
    inst = apps.reduce_knapsack([apps.KnapsackItem(2, 1), apps.KnapsackItem(3, 2)], 2.0)
    assert np.allclose(inst.matrix()[:, 0], [0.5, 2 / 3])
    assert np.allclose(inst.b[1:], [2.0, 3.0])
    assert offline_opt_packing(inst).value == pytest.approx(3.5)


def test_knapsack_edge_cases():
    assert offline_opt_packing(apps.reduce_knapsack([apps.KnapsackItem(4, 1)], 5.0)).value == pytest.approx(4.0)
    zero = offline_opt_packing(apps.reduce_knapsack([apps.KnapsackItem(4, 1)], 0.0))
    assert zero.value == 0.0 and np.allclose(zero.point, 0.0)


def test_benefit_unit_job_is_unit_knapsack():
    inst = apps.reduce_resource_benefit([apps.Job(1.0, [{0: 1.0}])], [1.0])
    assert offline_opt_packing(inst).value == pytest.approx(1.0)


def test_benefit_two_alternatives():
    inst = apps.reduce_resource_benefit([apps.Job(2.0, [{0: 1.0}, {1: 1.0}])], [5.0, 5.0])
    est = offline_opt_packing(inst, "enum")
    assert est.value == pytest.approx(2.0)
    assert sum(est.point) == pytest.approx(2.0)


def test_benefit_zero_jobs_and_warning():
    inst = apps.reduce_resource_benefit([], [1.0, 2.0])
    assert inst.m == 0 and offline_opt_packing(inst).value == 0.0
    with pytest.warns(UserWarning):
        apps.reduce_resource_benefit([apps.Job(1.0, [{0: 0.01}])], [1.0], P=4.0)


def test_throughput_examples():
    g = nx.Graph()
    g.add_edge("a", "b", capacity=1.0)
    one = apps.reduce_throughput(g, [apps.FlowRequest("a", "b")])
    assert offline_opt_packing(one).value == pytest.approx(1.0)

    mg = nx.DiGraph()
    mg.add_edge("s", "u", capacity=1.0)
    mg.add_edge("u", "t", capacity=1.0)
    mg.add_edge("s", "t", capacity=1.0)
    two_paths = apps.reduce_throughput(mg, [apps.FlowRequest("s", "t")])
    assert two_paths.m == 2
    assert offline_opt_packing(two_paths, "enum").value == pytest.approx(1.0)

    shared = apps.reduce_throughput(g, [apps.FlowRequest("a", "b"), apps.FlowRequest("b", "a")])
    assert offline_opt_packing(shared, "enum").value == pytest.approx(1.0)


def test_throughput_unreachable_request_is_skipped():
    g = nx.Graph()
    g.add_edge(0, 1)
    g.add_node(2)
    inst = apps.reduce_throughput(g, [apps.FlowRequest(0, 2)])
    assert inst.m == 0


def test_ooic_examples():
    lin = apps.reduce_ooic([apps.RevenueRound(Utility()), apps.RevenueRound(Utility())], 1.0)
    assert offline_opt_packing(lin).value == pytest.approx(1.0)
    two = apps.reduce_ooic([apps.RevenueRound(Utility("linear", 2.0)), apps.RevenueRound(Utility())], 1.0)
    est = offline_opt_packing(two, "grid")
    assert est.lower - 1e-9 <= 2.0 <= est.upper + 1e-9
    with pytest.raises(ValueError):
        apps.reduce_ooic([apps.RevenueRound(Utility("linear", 2.0), d_max=1.0)], 1.0)


def test_onum_sqrt():
    inst = apps.reduce_onum([apps.OnumRequest(["a", "b"], 1.0, Utility("sqrt"))])
    est = offline_opt_packing(inst)
    assert est.lower - 1e-9 <= 1.0 <= est.upper + 1e-9


def test_onum_rejects_convex_utility():
    with pytest.raises(ValueError):
        apps.reduce_onum([apps.OnumRequest(["a", "b"], 2.0, lambda y: y * y)])


def test_packing_lp_beta_schedule():
    inst = apps.reduce_knapsack([apps.KnapsackItem(1, 1), apps.KnapsackItem(1, 8)], 10.0)
    sched = apps.packing_lp_beta(inst, 0.5)
    vals = [sched(i, None) for i in range(inst.m)]
    assert vals == sorted(vals) and vals[0] >= 1.0
    assert vals[1] == pytest.approx(max(1.0, math.log1p(inst.n * 8.0) / 0.5))


def test_mixed_q1_is_linear():
    B = np.array([[1.0, 2.0], [0.5, 0.0]])
    inst = apps.reduce_mixed_covering_packing(B, 1.0, [[(0, 1.0), (1, 1.0)]])
    lin = apps.reduce_mixed_covering_packing(np.array([[1.5, 2.0]]), 1.0, [[(0, 1.0), (1, 1.0)]])
    a = run_pdla(inst, None, PdlaConfig(lam=1.0))
    b = run_pdla(lin, None, PdlaConfig(lam=1.0))
    assert np.allclose(a.x, b.x, atol=1e-12)


def test_mixed_identity_q1():
    inst = apps.reduce_mixed_covering_packing(np.eye(1), 1.0, [[(0, 1.0)]])
    res = run_pdla(inst, None, PdlaConfig(lam=1.0))
    assert apps.mixed_norm(np.eye(1), 1.0, res.x) == pytest.approx(1.0)
