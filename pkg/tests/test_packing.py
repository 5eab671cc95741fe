import math

import numpy as np
import pytest

from onlineadvice.applications import KnapsackItem, knapsack_advice, reduce_knapsack
from onlineadvice.model import AdviceProfile, PackingInstance, SparseRow
from onlineadvice.objectives import LinearConcave
from onlineadvice.oracles import offline_opt_packing
from onlineadvice.packing import (
    GreedySaturation,
    OfflineReplay,
    PackingSubroutine,
    SubroutineFailure,
    SwitchState,
    certify_switching,
    run_subroutine,
    run_switching,
    switch_round,
)


def one_constraint(b, rows):
    return PackingInstance(1, [b], [SparseRow.from_pairs(i, [(0, a)]) for i, a in enumerate(rows)],
                           LinearConcave([1.0] * len(rows)))


@pytest.mark.parametrize("lam, ys, ya, expected", [(1.0, 0.7, 0.3, 0.7), (0.0, 0.4, 0.3, 0.3), (0.5, 0.4, 0.2, 0.3)])
def test_switch_round_interpolates(lam, ys, ya, expected):
    st = SwitchState.empty(1)
    y = switch_round(st, SparseRow.from_pairs(0, [(0, 1.0)]), ys, ya, lam, 1.0, [1.0])
    assert y == pytest.approx(expected)
    assert not st.discarded


def test_switch_round_discards_violating_advice():
    st = SwitchState.empty(1)
    st.kept_load[0] = 0.9
    y = switch_round(st, SparseRow.from_pairs(3, [(0, 1.0)]), 0.05, 0.2, 0.5, 1.0, [1.0])
    assert y == 0.05
    assert st.discarded == {3}
    assert st.kept_load[0] == 0.9


def test_switch_round_validates():
    st = SwitchState.empty(1)
    row = SparseRow.from_pairs(0, [(0, 1.0)])
    with pytest.raises(ValueError):
        switch_round(st, row, -1.0, 0.0, 0.5, 1.0, [1.0])
    with pytest.raises(ValueError):
        switch_round(st, row, 0.0, 0.0, 0.5, 0.5, [1.0])


def test_greedy_saturation_examples():
    assert np.allclose(run_subroutine(one_constraint(1.0, [1.0, 1.0]), GreedySaturation(0.0)), [1.0, 0.0])
    assert np.allclose(run_subroutine(one_constraint(2.0, [1.0, 1.0]), GreedySaturation(0.0)), [2.0, 0.0])
    assert np.all(run_subroutine(one_constraint(2.0, [1.0, 1.0]), GreedySaturation(math.inf)) == 0.0)


def knapsack():
    items = [KnapsackItem(2.0, 1.0), KnapsackItem(3.0, 2.0)]
    return items, reduce_knapsack(items, 2.0)


def test_full_trust_copies_optimal_advice():
    items, inst = knapsack()
    adv = knapsack_advice(items, [1.0, 0.5], 0.0)
    res = run_switching(inst, GreedySaturation(), adv)
    assert np.array_equal(res.y, adv.vector)
    assert res.metrics.primal_objective == pytest.approx(3.5)


def test_no_trust_matches_subroutine_bitwise():
    items, inst = knapsack()
    adv = AdviceProfile(np.array([0.0, 3.0]), 1.0)
    res = run_switching(inst, GreedySaturation(), adv)
    alone = run_subroutine(inst, GreedySaturation())
    assert np.array_equal(res.y, alone)


def test_knapsack_half_trust_bounds():
    items, inst = knapsack()
    adv = knapsack_advice(items, [1.0, 0.5], 0.5)
    assert np.allclose(adv.vector, [2.0, 1.5])
    res = run_switching(inst, GreedySaturation(), adv)
    assert res.metrics.primal_objective >= 0.5 * 3.5 - 1e-12
    assert np.all(inst.load(res.y) <= 1.5 * inst.b + 1e-12)
    certs = certify_switching(inst, res, adv, GreedySaturation())
    assert certs["feasibility"].ok and certs["consistency"].ok and certs["load_split"].ok


def test_offline_replay_alpha_and_robustness():
    items, inst = knapsack()
    opt = offline_opt_packing(inst)
    sub = OfflineReplay(opt.point, 0.5, opt.value)
    adv = AdviceProfile(np.zeros(inst.m), 0.25)
    res = run_switching(inst, sub, adv)
    assert sub.alpha == pytest.approx(2.0)
    certs = certify_switching(inst, res, adv, sub, opt.value)
    assert certs["robustness"].ok


def test_beta_schedule_must_not_decrease():
    _, inst = knapsack()
    adv = AdviceProfile(np.zeros(inst.m), 0.5)
    with pytest.raises(ValueError):
        run_switching(inst, GreedySaturation(), adv, lambda i, st: 2.0 - i)


class Broken(PackingSubroutine):
    def reset(self, instance):
        super().reset(instance)
        self.t = 0

    def step(self, row):
        self.t += 1
        if self.t == 2:
            raise RuntimeError("boom")
        return 0.1


def test_subroutine_failure_keeps_partial_state():
    _, inst = knapsack()
    with pytest.raises(SubroutineFailure) as err:
        run_switching(inst, Broken(), AdviceProfile(np.zeros(inst.m), 0.5))
    assert len(err.value.partial.y) == 1
