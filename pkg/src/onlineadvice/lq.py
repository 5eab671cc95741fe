"""PDLA for online covering with objectives sum_e c_e ||x(S_e)||_{q_e}.

The primal update is the one used for general convex covering.  The dual
is simpler: y_t grows at rate 1 while round t is unsatisfied, is never
decremented, and mu = A^T y is maintained online.  Coordinates outside
every group cost nothing and are raised instantly; they never touch mu.
"""
from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .covering import (
    consistency_certificate,
    integrate_round,
    primal_certificates,
    step_certificates,
)
from .model import AdviceProfile, Certificate, CoveringInstance, RunMetrics, SolverTrace
from .objectives import LqSumObjective, dual_norm

__all__ = [
    "KappaTracker",
    "LqResult",
    "run_lq",
    "dual_norm_bound",
    "dual_norm_certificate",
    "pd_ratio_certificate",
    "certify_lq",
]


@dataclass
class KappaTracker:
    """Running extrema of the nonzero constraint coefficients."""

    a_max: float = 0.0
    a_min: float = math.inf

    def update(self, row) -> float:
        self.a_max = max(self.a_max, float(row.coefs.max()))
        self.a_min = min(self.a_min, float(row.coefs.min()))
        return self.kappa

    @property
    def kappa(self) -> float:
        return 1.0 if math.isinf(self.a_min) else self.a_max / self.a_min


@dataclass
class LqResult:
    x: np.ndarray
    y: np.ndarray
    mu: np.ndarray
    trace: SolverTrace
    metrics: RunMetrics
    kappa: float
    d: int
    lam: float
    y_history: list = field(default_factory=list)
    certificates: dict = field(default_factory=dict)


def run_lq(
    instance: CoveringInstance,
    advice: Optional[AdviceProfile] = None,
    lam: Optional[float] = None,
    eps_grad: float = 1e-12,
    step_eta: float = 1e-3,
    feas_tol: float = 1e-9,
    max_steps_per_round: int = 5_000_000,
) -> LqResult:
    """Run the l_q-sum PDLA over all rows.

    ``lam`` defaults to the advice's confidence, or 1 without advice.  The
    sparsity parameter is max(row sparsity so far, largest group), or the
    instance's declared bound when that is larger.
    """
    obj = instance.objective
    if not isinstance(obj, LqSumObjective):
        raise TypeError("run_lq needs an LqSumObjective (disjoint groups)")
    if obj.eps_grad != eps_grad:
        obj = LqSumObjective([(S, c, q) for S, c, q in obj.groups], obj.n, eps_grad)
    if lam is None:
        lam = advice.lam if advice is not None else 1.0
    if not 0.0 <= lam <= 1.0:
        raise ValueError("lam must lie in [0, 1]")
    x_prime = None
    if advice is not None:
        x_prime = advice.vector
        if x_prime.shape != (instance.n,):
            raise ValueError("covering advice must have length n")

    started = time.perf_counter()
    x = np.zeros(instance.n)
    y = np.zeros(instance.m)
    mu = np.zeros(instance.n)
    trace = SolverTrace()
    kappa = KappaTracker()
    d_run = max(1, obj.max_group_size)
    history = []
    for t, row in enumerate(instance.rows):
        kappa.update(row)
        d_run = max(d_run, row.sparsity)
        d_t = max(d_run, instance.d_bound or 0)
        rt = integrate_round(x, row, obj, lam, d_t, x_prime, step_eta, feas_tol, max_steps_per_round)
        trace.rounds.append(rt)
        for step in rt.steps:
            y[t] += step.dtau
        # y_t only moves during its own round, so mu can be settled at round end
        mu[row.cols] += row.coefs * y[t]
        history.append(y.copy())
    trace.x_final = x.copy()
    elapsed = time.perf_counter() - started

    metrics = RunMetrics(
        primal_objective=obj.value(x),
        advice_objective=obj.value(x_prime) if x_prime is not None else math.nan,
        dual_objective=float(y.sum()),
        max_constraint_violation=instance.violation(x),
        rounds=instance.m,
        steps=trace.n_steps,
        wall_time=elapsed,
    )
    if x_prime is not None and metrics.advice_objective > 0:
        metrics.consistency_ratio = metrics.primal_objective / metrics.advice_objective
    d_final = max(d_run, instance.d_bound or 0)
    return LqResult(x, y, mu, trace, metrics, kappa.kappa, d_final, lam, history)


def dual_norm_bound(c: float, kappa: float, d: float, lam: float) -> float:
    """c_e (1 + 9 ln(kappa d / lambda))."""
    return c * (1.0 + 9.0 * math.log(kappa * d / lam))


def dual_norm_certificate(mu, obj: LqSumObjective, kappa: float, d: float, lam: float, tol: float = 1e-6) -> Certificate:
    """Check ||mu(S_e)||_{p_e} against its bound for every group, and mu = 0 off the groups.

    The worst group's margin is returned as ``value - bound``.
    """
    mu = np.asarray(mu, dtype=float)
    if lam <= 0:
        return Certificate("dual_norm", None, detail="lambda = 0 leaves the bound undefined")
    worst, where = -math.inf, ""
    for e, (S, c, q) in enumerate(obj.groups):
        margin = dual_norm(mu[S], q) - dual_norm_bound(c, kappa, d, lam)
        if margin > worst:
            worst, where = margin, f"group {e}"
    outside = np.ones(obj.n, dtype=bool)
    for S, _, _ in obj.groups:
        outside[S] = False
    off = float(np.max(np.abs(mu[outside]), initial=0.0))
    ok = (worst <= tol) and off == 0.0
    if worst == -math.inf:
        worst = 0.0
    detail = f"worst {where}; max |mu_j| off the groups = {off:.3g}"
    return Certificate("dual_norm", ok, worst, tol, detail)


def pd_ratio_certificate(f_x: float, y, slack: float = 0.02) -> Certificate:
    """f(x) <= 2 sum(y) (1 + slack)."""
    bound = 2.0 * float(np.sum(y)) * (1.0 + slack)
    return Certificate("pd_ratio", f_x <= bound + 1e-12, f_x, bound)


def certify_lq(instance: CoveringInstance, result: LqResult, advice: Optional[AdviceProfile] = None,
               slack: float = 0.01, feas_tol: float = 1e-9, opt_upper: Optional[float] = None) -> dict:
    obj = instance.objective
    lam = result.lam
    certs = primal_certificates(instance, result.trace, result.x, feas_tol)
    certs.update(step_certificates(result.trace, lam, slack, advice is not None))
    certs["consistency"] = consistency_certificate(
        result.trace, result.metrics.primal_objective, result.metrics.advice_objective, lam, slack, advice is not None
    )
    certs["pd_ratio"] = pd_ratio_certificate(result.metrics.primal_objective, result.y, 2.0 * slack)
    certs["dual_norm"] = dual_norm_certificate(result.mu, obj, result.kappa, result.d, lam)

    recomputed = _at_y(instance, result.y)
    diff = float(np.max(np.abs(recomputed - result.mu), initial=0.0))
    certs["mu_equals_ATy"] = Certificate("mu_equals_ATy", diff <= 1e-12, diff, 1e-12)

    drops = 0.0
    prev = np.zeros(instance.m)
    for snap in result.y_history:
        drops = max(drops, float(np.max(prev - snap, initial=0.0)))
        prev = snap
    certs["dual_monotone"] = Certificate("dual_monotone", drops <= 0.0, drops, 0.0)

    # coordinates never pass 1/a_min once some row holding them has been processed
    a_min = min((float(r.coefs.min()) for r in instance.rows), default=math.inf)
    top = float(result.x.max(initial=0.0))
    certs["x_cap"] = Certificate("x_cap", top <= (1.0 + feas_tol) / a_min, top, 1.0 / a_min)

    # reported only: the per-column integral bound for q_e = 1 groups
    if lam > 0:
        worst = -math.inf
        for S, c, q in obj.groups:
            if q == 1.0:
                worst = max(worst, float(np.max(result.mu[S])) - c * math.log1p(result.kappa * result.d / lam))
        if worst > -math.inf:
            certs["q1_column_bound"] = Certificate("q1_column_bound", None, worst, 0.0, "reported, not asserted")

    if opt_upper is not None:
        certs["pd_vs_opt"] = Certificate("pd_vs_opt", None, result.metrics.primal_objective, opt_upper, "reported")
    return certs


def _at_y(instance: CoveringInstance, y) -> np.ndarray:
    out = np.zeros(instance.n)
    for row, v in zip(instance.rows, y):
        out[row.cols] += row.coefs * v
    return out
