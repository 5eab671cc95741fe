import math

import numpy as np
import pytest

from onlineadvice.lq import (
    KappaTracker,
    certify_lq,
    dual_norm_bound,
    dual_norm_certificate,
    pd_ratio_certificate,
    run_lq,
)
from onlineadvice.model import CoveringInstance, SparseRow
from onlineadvice.objectives import LqSumObjective


def single_group(rows=((0, 1.0),), n=1):
    obj = LqSumObjective([([0], 1.0, 1.0)], n)
    return CoveringInstance(n, [SparseRow.from_pairs(i, [r]) for i, r in enumerate(rows)], obj)


def test_single_round_reduces_to_linear():
    res = run_lq(single_group(), None, 1.0)
    assert res.x[0] == pytest.approx(1.0, abs=1e-9)
    assert res.y[0] == pytest.approx(math.log(2), abs=1e-9)
    assert res.mu[0] == pytest.approx(math.log(2), abs=1e-9)
    assert res.mu[0] <= dual_norm_bound(1.0, res.kappa, res.d, 1.0)
    assert pd_ratio_certificate(1.0, res.y).ok
    assert res.metrics.primal_objective <= 2 * res.y.sum()


def test_free_variable_jumps():
    obj = LqSumObjective([([0], 1.0, 2.0)], 2)
    inst = CoveringInstance(2, [SparseRow.from_pairs(0, [(1, 4.0)])], obj)
    res = run_lq(inst, None, 1.0)
    assert res.x[1] == pytest.approx(0.25)
    assert res.y[0] == 0.0 and np.all(res.mu == 0.0)
    assert res.metrics.primal_objective == 0.0


def test_empty_run():
    inst = CoveringInstance(2, [], LqSumObjective([([0, 1], 1.0, 2.0)], 2))
    res = run_lq(inst, None, 0.5)
    assert np.all(res.mu == 0)
    certs = certify_lq(inst, res)
    assert all(c.ok is not False for c in certs.values())
    assert pd_ratio_certificate(0.0, res.y).ok


def test_second_round_satisfied_adds_no_dual():
    inst = single_group(rows=((0, 1.0), (0, 1.0)))
    res = run_lq(inst, None, 1.0)
    assert res.y[1] == 0.0
    assert res.metrics.primal_objective / res.y.sum() == pytest.approx(1 / math.log(2))


def test_certificates_hold_on_two_groups():
    obj = LqSumObjective([([0, 1], 1.0, 2.0), ([2], 2.0, 1.0)], 3)
    rows = [SparseRow.from_pairs(0, [(0, 1.0), (2, 0.5)]), SparseRow.from_pairs(1, [(1, 2.0), (2, 1.0)])]
    inst = CoveringInstance(3, rows, obj)
    for lam in (0.25, 0.5, 1.0):
        res = run_lq(inst, None, lam)
        certs = certify_lq(inst, res)
        bad = {k: c for k, c in certs.items() if c.ok is False}
        assert not bad, bad


def test_dual_norm_certificate_detects_violation():
    obj = LqSumObjective([([0], 1.0, 1.0)], 1)
    cert = dual_norm_certificate(np.array([50.0]), obj, 1.0, 1, 1.0)
    assert cert.ok is False


def test_kappa_tracker():
    kt = KappaTracker()
    assert kt.kappa == 1.0
    kt.update(SparseRow.from_pairs(0, [(0, 0.5), (1, 2.0)]))
    assert kt.kappa == 4.0


def test_run_lq_rejects_other_objectives():
    from onlineadvice.objectives import LinearObjective
    inst = CoveringInstance(1, [SparseRow.from_pairs(0, [(0, 1.0)])], LinearObjective([1.0]))
    with pytest.raises(TypeError):
        run_lq(inst)
