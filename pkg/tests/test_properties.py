"""Property-based invariants over small random instances."""
import numpy as np
from hypothesis import HealthCheck, given, settings
from hypothesis import strategies as st

from onlineadvice.covering import PdlaConfig, certify_pdla, run_pdla
from onlineadvice.harness import random_covering
from onlineadvice.lq import certify_lq, run_lq
from onlineadvice.model import AdviceProfile
from onlineadvice.objectives import LqSumObjective, PowerNormObjective, validate_objective
from onlineadvice.packing import GreedySaturation, certify_switching, run_subroutine, run_switching
from onlineadvice import applications as apps

FAST = settings(max_examples=40, deadline=None, suppress_health_check=[HealthCheck.too_slow])
lams = st.sampled_from([0.0, 0.25, 0.5, 0.75, 1.0])


@FAST
@given(seed=st.integers(0, 2**32 - 1), lam=lams, kind=st.sampled_from(["linear", "power_norm"]))
def test_pdla_primal_invariants(seed, lam, kind):
    rng = np.random.default_rng(seed)
    inst = random_covering(rng, int(rng.integers(1, 5)), int(rng.integers(1, 6)), kind)
    adv = AdviceProfile(rng.uniform(0, 2, inst.n), lam)
    cfg = PdlaConfig(lam=lam, step_eta=1e-2)
    res = run_pdla(inst, adv, cfg)
    certs = certify_pdla(inst, res, adv, cfg)
    for name in ("feasibility", "monotonicity", "growth_rate", "consistency_step", "consistency"):
        assert certs[name].ok is not False, (name, certs[name])
    if res.dual is not None:
        assert certs["weak_duality"].ok and certs["dual_feasibility"].ok


@FAST
@given(seed=st.integers(0, 2**32 - 1), lam=st.sampled_from([0.25, 0.5, 1.0]))
def test_lq_invariants(seed, lam):
    rng = np.random.default_rng(seed)
    inst = random_covering(rng, int(rng.integers(1, 5)), int(rng.integers(1, 6)), "lq_sum")
    res = run_lq(inst, None, lam, step_eta=1e-2)
    certs = certify_lq(inst, res)
    bad = {k: c for k, c in certs.items() if c.ok is False}
    assert not bad, bad


@FAST
@given(seed=st.integers(0, 2**32 - 1), lam=lams)
def test_switching_with_feasible_advice(seed, lam):
    rng = np.random.default_rng(seed)
    inst = apps.random_knapsack(rng, int(rng.integers(1, 8)))
    # any vector scaled into the feasible region is 1-feasible advice
    raw = rng.uniform(0, 3, inst.m)
    viol = inst.violation(raw)
    adv = AdviceProfile(raw / max(1.0, viol), lam)
    res = run_switching(inst, GreedySaturation(), adv)
    certs = certify_switching(inst, res, adv, GreedySaturation())
    assert not res.state.discarded
    assert certs["feasibility"].ok and certs["consistency"].ok and certs["load_split"].ok
    if lam == 1.0:
        assert np.array_equal(res.y, run_subroutine(inst, GreedySaturation()))


@FAST
@given(seed=st.integers(0, 2**32 - 1), q=st.sampled_from([1.0, 1.5, 2.0, 3.0]))
def test_builtin_objectives_validate(seed, q):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(1, 5))
    samples = rng.uniform(0, 3, size=(5, n))
    assert validate_objective(PowerNormObjective(rng.uniform(0, 1, (2, n)), q), samples).ok
    assert validate_objective(LqSumObjective([(list(range(n)), 1.5, q)], n), samples).ok


@FAST
@given(vec=st.lists(st.floats(-1, 1), min_size=1, max_size=4), lam=st.floats(-0.5, 1.5))
def test_advice_profile_validation(vec, lam):
    ok = min(vec) >= 0 and 0 <= lam <= 1
    try:
        AdviceProfile(np.array(vec), lam)
        assert ok
    except ValueError:
        assert not ok
