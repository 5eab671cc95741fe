import math

import numpy as np
import pytest

from onlineadvice.objectives import (
    CallableObjective,
    LinearConcave,
    LinearObjective,
    LqSumObjective,
    PowerNormObjective,
    SeparableConcave,
    Utility,
    dual_norm,
    gradient_check,
    lq_gradient,
    validate_concave,
    validate_objective,
)


def test_linear_report_is_clean(rng):
    f = LinearObjective([1.0, 1.0, 1.0])
    rep = validate_objective(f, rng.uniform(0, 5, size=(20, 3)))
    assert rep.ok and rep.checked == 20


def test_squared_norm_p2_clean():
    f = PowerNormObjective(np.eye(2), 2.0)
    x = np.array([1.0, 1.0])
    assert x @ f.grad(x) == pytest.approx(4.0)
    assert validate_objective(f, [x]).ok


def test_squared_norm_wrong_p_flagged():
    f = PowerNormObjective(np.eye(2), 2.0)
    f.p = 1.5
    rep = validate_objective(f, [[1.0, 1.0]])
    assert not rep.ok
    assert any("p" in v["check"] for v in rep.violations)


def test_gradient_check_linear_exact():
    f = LinearObjective([1.0, 2.0])
    assert gradient_check(f, [0.3, 0.7], h=1e-5) < 1e-9


def test_gradient_check_quadratic():
    f = CallableObjective(1, lambda x: float(x[0] ** 2), lambda x: 2 * x, p=2.0)
    assert gradient_check(f, [3.0], h=1e-4) <= 1e-7


def test_gradient_check_euclidean_norm():
    f = CallableObjective(2, lambda x: float(np.linalg.norm(x)), lambda x: x / np.linalg.norm(x))
    assert np.allclose(f.grad([3.0, 4.0]), [0.6, 0.8])
    assert gradient_check(f, [3.0, 4.0], h=1e-5) <= 1e-6


def test_lq_group_gradient():
    obj = LqSumObjective([([0, 1], 1.0, 2.0)], 2)
    assert np.allclose(obj.grad([3.0, 4.0]), [0.6, 0.8])


def test_lq_q1_gradient_constant():
    obj = LqSumObjective([([0, 1], 2.5, 1.0)], 3)
    for x in ([0.0, 0.0, 0.0], [1.0, 3.0, 2.0]):
        assert np.allclose(obj.grad(x)[:2], 2.5)


def test_lq_outside_groups_zero_gradient():
    obj = LqSumObjective([([0], 1.0, 2.0)], 3)
    g = obj.grad([1.0, 5.0, 7.0])
    assert g[1] == 0.0 and g[2] == 0.0
    assert obj.is_free(1) and not obj.is_free(0)


def test_lq_gradient_at_zero_group_is_finite():
    obj = LqSumObjective([([0, 1], 1.0, 2.0)], 2)
    g = lq_gradient(obj, np.zeros(2))
    assert np.all(np.isfinite(g)) and np.all(g > 0)


@pytest.mark.parametrize("mu, expected", [([1.0], 0.0), ([0.5], 0.0), ([1.5], math.inf)])
def test_linear_conjugate(mu, expected):
    assert LinearObjective([1.0]).conjugate(np.array(mu)) == expected


def test_square_conjugate():
    f = PowerNormObjective([[1.0]], 2.0)
    assert f.conjugate(np.array([2.0])) == pytest.approx(1.0)


def test_dual_norm_values():
    assert dual_norm(np.array([3.0, 4.0]), 2.0) == pytest.approx(5.0)
    assert dual_norm(np.array([3.0, 4.0]), 1.0) == pytest.approx(4.0)


def test_power_norm_rejects_negative_B():
    with pytest.raises(ValueError):
        PowerNormObjective([[-1.0]], 2.0)


def test_utilities_and_concave_validation(rng):
    g = SeparableConcave([Utility("sqrt"), Utility("log1p", 2.0), Utility("power", 1.0, 0.5), Utility()])
    assert validate_concave(g, rng.uniform(0, 4, size=(30, 4))).ok
    assert Utility("log1p", 3.0).derivative_at_zero() == 3.0
    assert math.isinf(Utility("sqrt").derivative_at_zero())
    with pytest.raises(ValueError):
        Utility("cubic")


def test_linear_concave_costs():
    g = LinearConcave([1.0, 2.0])
    assert g.value([1.0, 1.0]) == 3.0
    assert np.allclose(g.linear_costs(), [1.0, 2.0])
