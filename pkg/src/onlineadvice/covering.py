"""Primal-dual learning-augmented (PDLA) solver for online convex covering.

Each arriving row A_t x >= 1 is satisfied by raising every x_j with a_tj > 0
continuously in a virtual time tau,

    dx_j/dtau = a_tj / grad_j f(x) * (x_j + D_j),

where the offset D_j mixes a classical term lambda/(a_tj d) with an advice
term that pulls coordinates still below the advice.  The ODE is integrated
with exponential steps: over a step (x_j + D_j) grows by exp(k_j dtau),
where k_j averages a_tj / grad_j f at both ends of a predictor step
(Heun's rule in the exponent, second order in step_eta).  Steps are capped so no
(x_j + D_j) grows by more than a factor (1 + step_eta), stop exactly when a
coordinate reaches its advice value, and the last one is root-found so the
row ends tight.

The dual (y, mu) never feeds back into the primal update, so it is rebuilt
afterwards from the recorded round durations by :func:`reconstruct_dual`.
"""
from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.optimize import brentq

from .model import (
    AdviceProfile,
    Certificate,
    CoveringInstance,
    Jump,
    RoundTrace,
    RunMetrics,
    SolverTrace,
    SparseRow,
    Step,
)
from .objectives import ObjectiveOracle

__all__ = [
    "PdlaConfig",
    "RoundBranch",
    "DualSolution",
    "CoveringResult",
    "DualUnavailable",
    "DegenerateInstance",
    "log_term",
    "compute_delta_standard",
    "compute_delta_homogeneous",
    "round_branch",
    "integrate_round",
    "run_pdla",
    "reconstruct_dual",
    "robustness_constant",
    "primal_certificates",
    "step_certificates",
    "consistency_certificate",
    "certify_pdla",
]

# Stand-in for a zero partial derivative of a coordinate that is not free;
# the first step then lifts it by a (1 + step_eta) factor in negligible time.
GRAD_FLOOR = 1e-250


class DualUnavailable(ValueError):
    """Raised when lambda = 0: the dual growth rate is undefined (primal-only mode)."""


class DegenerateInstance(ValueError):
    pass


@dataclass
class PdlaConfig:
    lam: float = 0.5
    d: Optional[int] = None
    step_eta: float = 1e-3
    feas_tol: float = 1e-9
    variant: str = "standard"
    slack: float = 0.01
    dual_tol: float = 1e-9
    homogeneous_delta: str = "stated"
    max_steps_per_round: int = 5_000_000

    def __post_init__(self):
        if not 0.0 <= self.lam <= 1.0:
            raise ValueError("lam must lie in [0, 1]")
        if self.step_eta <= 0 or self.feas_tol <= 0:
            raise ValueError("step_eta and feas_tol must be positive")
        if self.d is not None and self.d < 1:
            raise ValueError("d must be >= 1")
        if self.variant not in ("standard", "homogeneous"):
            raise ValueError(f"unknown variant {self.variant!r}")
        if self.homogeneous_delta not in ("stated", "maximizer"):
            raise ValueError(f"unknown homogeneous_delta rule {self.homogeneous_delta!r}")


@dataclass
class RoundBranch:
    advice_feasible: bool
    D: np.ndarray


@dataclass
class DualSolution:
    y: np.ndarray
    mu: np.ndarray
    conjugate: float
    rates: np.ndarray
    delta: float

    @property
    def objective(self) -> float:
        return float(self.y.sum() - self.conjugate)


@dataclass
class CoveringResult:
    x: np.ndarray
    trace: SolverTrace
    metrics: RunMetrics
    dual: Optional[DualSolution] = None
    certificates: dict = field(default_factory=dict)


def log_term(d: float, lam: float) -> float:
    """ln(1 + 2 d^2 / lambda); natural log throughout."""
    if lam <= 0:
        raise DualUnavailable("lambda = 0 leaves the dual rate undefined")
    return math.log1p(2.0 * d * d / lam)


def compute_delta_standard(p: float, d: float, lam: float) -> float:
    """delta = 1 / (4 p ln(1 + 2 d^2 / lambda))^(p - 1)."""
    if p < 1 or d < 1:
        raise ValueError("need p >= 1 and d >= 1")
    return 1.0 / (4.0 * p * log_term(d, lam)) ** (p - 1.0)


def compute_delta_homogeneous(q: float, d: float, lam: float, rule: str = "stated") -> float:
    """Dual scale for objectives homogeneous of degree q.

    ``rule="stated"`` gives 1 / (q ln(1 + 2 d^2 / lambda)).  ``"maximizer"``
    gives 1 / (4 q ln(1 + 2 d^2 / lambda)), the delta that actually
    maximizes delta^(q-1) / (4 L) - (q - 1) delta^q; only there does the
    ratio bound reach 1 / (4 q L)^q.  For q = 1 the choice is immaterial
    because grad f(delta z) = grad f(z).
    """
    if q is None:
        raise ValueError("objective does not declare a homogeneous degree")
    if q < 1 or d < 1:
        raise ValueError("need q >= 1 and d >= 1")
    if rule == "maximizer":
        return 1.0 / (4.0 * q * log_term(d, lam))
    return 1.0 / (q * log_term(d, lam))


def _offsets(a, xs, xps, lam, d, feasible):
    if not feasible:
        return 1.0 / (a * d)
    D = lam / (a * d)
    if lam < 1.0 and xps is not None:
        below = xs < xps
        denom = float(a[below] @ xps[below])
        # every coordinate already at its advice: the advice term is 0/0, taken as 0
        if denom > 0:
            D = D + np.where(below, (1.0 - lam) * xps / denom, 0.0)
    return D


def round_branch(row: SparseRow, x_prime, lam: float, d: float, x=None) -> RoundBranch:
    """Pick the branch for an arriving row and the current offsets D_j.

    The advice term depends on which coordinates are still below the
    advice, so D is re-evaluated by the integrator as x grows.
    """
    a = row.coefs
    feasible = x_prime is not None and row.dot(np.asarray(x_prime, dtype=float)) >= 1.0
    xs = np.zeros(a.size) if x is None else np.asarray(x, dtype=float)[row.cols]
    xps = None if x_prime is None else np.asarray(x_prime, dtype=float)[row.cols]
    return RoundBranch(feasible, np.broadcast_to(_offsets(a, xs, xps, lam, d, feasible), a.shape).copy())


def integrate_round(
    x: np.ndarray,
    row: SparseRow,
    oracle: ObjectiveOracle,
    lam: float,
    d: float,
    x_prime=None,
    step_eta: float = 1e-3,
    feas_tol: float = 1e-9,
    max_steps: int = 5_000_000,
) -> RoundTrace:
    """Raise x (in place) until A_t x >= 1 and return the round's trace."""
    cols, a = row.cols, row.coefs
    feasible = x_prime is not None and row.dot(x_prime) >= 1.0
    rt = RoundTrace(row=row, d=int(d), advice_feasible=feasible)
    if a @ x[cols] >= 1.0 - feas_tol:
        rt.x_after = x.copy()
        return rt

    free = np.array([oracle.is_free(j) for j in cols])
    if free.any():
        need = 1.0 - a @ x[cols]
        af = a[free]
        amount = need * af / float(af @ af)
        rt.jumps.append(Jump(cols[free].copy(), x.copy(), amount))
        x[cols[free]] += amount
        rt.x_after = x.copy()
        return rt

    xps = None if x_prime is None else np.asarray(x_prime, dtype=float)[cols]
    track_advice = feasible and lam < 1.0
    growth_cap = math.log1p(step_eta)
    exact = oracle.constant_gradient

    for _ in range(max_steps):
        xs = x[cols]
        if a @ xs >= 1.0 - feas_tol:
            break
        g = oracle.grad(x)[cols]
        g = np.where(g > 0, g, GRAD_FLOOR)
        D = np.broadcast_to(_offsets(a, xs, xps, lam, d, feasible), a.shape)
        base = xs + D
        active = base > 0
        if not active.any():
            raise DegenerateInstance(f"row {row.index}: no coordinate can grow")
        k = np.where(active, a / g, 0.0)

        contrib = a * base
        if xps is not None:
            below = xs < xps
            rate_c = float(contrib[below].sum())
            rate_u = float(contrib[~below].sum())
        else:
            rate_c, rate_u = 0.0, float(contrib.sum())

        s = math.inf if exact else growth_cap / k[active].max()
        crossing = -1
        if track_advice:
            cand = active & (xs < xps)
            if cand.any():
                idx = np.flatnonzero(cand)
                s_cross = np.log((xps[idx] + D[idx]) / base[idx]) / k[idx]
                best = int(np.argmin(s_cross))
                if s_cross[best] < s:
                    s = float(s_cross[best])
                    crossing = int(idx[best])

        if not exact and not math.isinf(s):
            # Heun corrector: average the exponent rate over the step
            x_pred = x.copy()
            x_pred[cols] = np.where(active, base * np.exp(k * s) - D, xs)
            g1 = oracle.grad(x_pred)[cols]
            g1 = np.where(g1 > 0, g1, GRAD_FLOOR)
            k = np.where(active, 0.5 * (k + a / g1), 0.0)

        def advance(t):
            return np.where(active, base * np.exp(k * t) - D, xs)

        if math.isinf(s):
            # constant gradient and nothing to cross: bracket the finishing time
            s = 1.0 / k[active].max()
            while a @ advance(s) < 1.0:
                s *= 2.0
            crossing = -1

        x_new = advance(s)
        done = a @ x_new >= 1.0
        if done:
            s = brentq(lambda t: a @ advance(t) - 1.0, 0.0, s, xtol=1e-300, rtol=1e-15, maxiter=500)
            x_new = advance(s)
            if a @ x_new < 1.0 - feas_tol:
                raise DegenerateInstance(f"row {row.index}: could not reach the constraint")
        elif crossing >= 0:
            x_new[crossing] = xps[crossing]
        x_new = np.maximum(x_new, xs)

        rt.steps.append(Step(s, x.copy(), rate_c, rate_u, feasible))
        x[cols] = x_new
        if done:
            break
    else:
        raise DegenerateInstance(f"row {row.index}: step budget exhausted")
    rt.x_after = x.copy()
    return rt


def run_pdla(
    instance: CoveringInstance,
    advice: Optional[AdviceProfile] = None,
    config: Optional[PdlaConfig] = None,
    dual: bool = True,
) -> CoveringResult:
    """Run PDLA over all rows of ``instance``.

    With ``variant="homogeneous"`` the dual is rebuilt with
    mu = grad f(delta x) instead of delta grad f(x); the primal path is the
    same for both variants.
    """
    config = config or PdlaConfig(lam=advice.lam if advice is not None else 1.0)
    oracle = instance.objective
    if not oracle.monotone_gradient:
        raise ValueError("PDLA needs an objective with monotone gradient; use run_lq for l_q sums")
    if config.variant == "homogeneous" and oracle.homogeneous_degree is None:
        raise ValueError("the homogeneous variant needs an objective with a declared homogeneous degree")
    lam = config.lam
    x_prime = None
    if advice is not None:
        x_prime = advice.vector
        if x_prime.shape != (instance.n,):
            raise ValueError("covering advice must have length n")

    started = time.perf_counter()
    x = np.zeros(instance.n)
    trace = SolverTrace()
    d_run = 1
    for row in instance.rows:
        d_run = max(d_run, row.sparsity)
        d_t = config.d or instance.d_bound or d_run
        trace.rounds.append(
            integrate_round(
                x, row, oracle, lam, d_t, x_prime,
                config.step_eta, config.feas_tol, config.max_steps_per_round,
            )
        )
    trace.x_final = x.copy()
    elapsed = time.perf_counter() - started

    metrics = RunMetrics(
        primal_objective=oracle.value(x),
        advice_objective=oracle.value(x_prime) if x_prime is not None else math.nan,
        max_constraint_violation=instance.violation(x),
        rounds=instance.m,
        steps=trace.n_steps,
        wall_time=elapsed,
    )
    if x_prime is not None and metrics.advice_objective > 0:
        metrics.consistency_ratio = metrics.primal_objective / metrics.advice_objective
    result = CoveringResult(x, trace, metrics)
    if dual and lam > 0 and instance.m > 0:
        result.dual = reconstruct_dual(trace, x, oracle, config)
        metrics.dual_objective = result.dual.objective
    return result


def _dual_rates(trace: SolverTrace, x_bar, oracle: ObjectiveOracle, config: PdlaConfig):
    lam = config.lam
    d_final = max((r.d for r in trace.rounds), default=1)
    if config.variant == "standard":
        p = oracle.p
        delta = compute_delta_standard(p, d_final, lam)
        mu = delta * oracle.grad(x_bar)
        conj = oracle.conjugate_of_scaled_gradient(delta, x_bar)
        rates = np.array([compute_delta_standard(p, r.d, lam) / log_term(r.d, lam) for r in trace.rounds])
    else:
        q = oracle.homogeneous_degree
        delta = compute_delta_homogeneous(q, d_final, lam, config.homogeneous_delta)
        z = delta * np.asarray(x_bar, dtype=float)
        mu = oracle.grad(z)
        conj = float(z @ mu - oracle.value(z))
        g_bar = oracle.grad(x_bar)
        pos = g_bar > 0
        ratio = float(np.min(mu[pos] / g_bar[pos])) if pos.any() else delta ** (q - 1.0)
        rates = np.array([ratio / log_term(r.d, lam) for r in trace.rounds])
    return delta, mu, conj, rates


def reconstruct_dual(trace: SolverTrace, x_bar, oracle: ObjectiveOracle, config: PdlaConfig) -> DualSolution:
    """Replay the recorded steps to rebuild the dual packing solution.

    y_t grows at rate r during round t.  Whenever a column's load
    sum_i a_ij y_i would exceed mu_j, the variable with the largest
    coefficient in that column (ties to the earliest round) is lowered by
    exactly the excess, which is what the continuous decrement rule
    integrates to over the step.
    """
    if config.lam <= 0:
        raise DualUnavailable("lambda = 0: primal-only mode, no dual certificate")
    delta, mu, conj, rates = _dual_rates(trace, x_bar, oracle, config)
    if conj is None:
        from .oracles import conjugate_fallback

        hi = np.maximum(4.0 * np.asarray(x_bar, dtype=float), 1.0)
        conj = conjugate_fallback(oracle, mu, (np.zeros(len(mu)), hi)).upper

    m = len(trace.rounds)
    n = len(mu)
    y = np.zeros(m)
    load = np.zeros(n)
    members: list[list[int]] = [[] for _ in range(n)]
    rows = [rt.row for rt in trace.rounds]
    for t, rt in enumerate(trace.rounds):
        row = rt.row
        for j in row.cols:
            members[j].append(t)
        for step in rt.steps:
            inc = rates[t] * step.dtau
            y[t] += inc
            load[row.cols] += row.coefs * inc
            for j in row.cols:
                _settle_column(int(j), y, load, mu, members, rows)
    return DualSolution(y=y, mu=mu, conjugate=float(conj), rates=rates, delta=delta)


def _settle_column(j, y, load, mu, members, rows):
    for _ in range(4 * len(members[j]) + 4):
        excess = load[j] - mu[j]
        if excess <= 1e-15 * max(1.0, abs(mu[j])):
            return
        best, best_a = -1, -1.0
        for i in members[j]:
            if y[i] > 0:
                a_ij = _coef(rows[i], j)
                if a_ij > best_a:
                    best, best_a = i, a_ij
        if best < 0:
            return
        dec = min(excess / best_a, y[best])
        y[best] -= dec
        load[rows[best].cols] -= rows[best].coefs * dec


def _coef(row: SparseRow, j: int) -> float:
    hit = np.flatnonzero(row.cols == j)
    return float(row.coefs[hit[0]])


def robustness_constant(oracle: ObjectiveOracle, d: float, lam: float, variant: str = "standard") -> float:
    """(4 p ln(1 + 2 d^2 / lambda))^p, with p replaced by q for the homogeneous variant."""
    p = oracle.p if variant == "standard" else oracle.homogeneous_degree
    return (4.0 * p * log_term(d, lam)) ** p


def primal_certificates(instance: CoveringInstance, trace: SolverTrace, x, feas_tol: float) -> dict:
    """Row coverage at the end of each round and at the end, plus monotone snapshots."""
    worst = 0.0
    for rt in trace.rounds:
        if rt.x_after is not None:
            worst = max(worst, 1.0 - rt.row.dot(rt.x_after))
    worst = max(worst, instance.violation(x))
    drop = 0.0
    snaps = list(trace.snapshots())
    for prev, nxt in zip(snaps, snaps[1:]):
        drop = max(drop, float(np.max(prev - nxt, initial=0.0)))
    return {
        "feasibility": Certificate("feasibility", worst <= feas_tol, worst, feas_tol, "max_i (1 - A_i x)_+"),
        "monotonicity": Certificate("monotonicity", drop <= 0.0, drop, 0.0, "largest coordinate decrease"),
    }


def step_certificates(trace: SolverTrace, lam: float, slack: float, has_advice: bool) -> dict:
    """Step-level checks on the primal growth rate f' = r_c + r_u.

    ``growth_rate``: r_c + r_u <= 2 (1 + slack) at every step.
    ``consistency_step``: r_u <= (1 + lam) / (1 - lam) r_c (1 + slack) at
    every step taken on the advice-feasible branch (lam < 1 only).
    """
    steps = [s for r in trace.rounds for s in r.steps]
    growth = max((s.growth for s in steps), default=0.0)
    cap = 2.0 * (1.0 + slack)
    out = {"growth_rate": Certificate("growth_rate", growth <= cap, growth, cap)}
    if not has_advice or lam >= 1.0:
        out["consistency_step"] = Certificate("consistency_step", None, detail="no advice term")
        return out
    ratio = (1.0 + lam) / (1.0 - lam)
    worst = -math.inf
    for s in steps:
        if s.advice_feasible:
            worst = max(worst, s.rate_u - ratio * s.rate_c * (1.0 + slack))
    if worst == -math.inf:
        out["consistency_step"] = Certificate("consistency_step", None, detail="no advice-feasible step")
    else:
        out["consistency_step"] = Certificate(
            "consistency_step", worst <= 1e-12, worst, 0.0, "max over steps of r_u - (1+lam)/(1-lam) r_c (1+slack)"
        )
    return out


def consistency_certificate(trace: SolverTrace, f_x: float, f_adv: float, lam: float, slack: float, has_advice: bool):
    """f(x) <= 2 / (1 - lam) f(x') (1 + slack), when every round saw feasible advice."""
    if not has_advice:
        return Certificate("consistency", None, detail="no advice")
    if lam >= 1.0:
        return Certificate("consistency", None, detail="lambda = 1")
    if not all(r.advice_feasible for r in trace.rounds):
        return Certificate("consistency", None, detail="some round saw infeasible advice")
    bound = 2.0 / (1.0 - lam) * f_adv * (1.0 + slack)
    return Certificate("consistency", f_x <= bound + 1e-12, f_x, bound)


def certify_pdla(
    instance: CoveringInstance,
    result: CoveringResult,
    advice: Optional[AdviceProfile],
    config: PdlaConfig,
    opt_upper: Optional[float] = None,
) -> dict:
    """Check every guarantee that applies to a finished run.

    The multiplicative slack is ``config.slack`` for the consistency and
    growth-rate bounds and twice that for the robustness bounds.
    """
    x = result.x
    oracle = instance.objective
    lam = config.lam
    tol = config.feas_tol
    certs = {}

    certs.update(primal_certificates(instance, result.trace, x, tol))
    certs.update(step_certificates(result.trace, lam, config.slack, advice is not None))
    f_x = result.metrics.primal_objective
    certs["consistency"] = consistency_certificate(
        result.trace, f_x, result.metrics.advice_objective, lam, config.slack, advice is not None
    )

    dual = result.dual
    if dual is None:
        certs["dual_feasibility"] = Certificate("dual_feasibility", None, detail="primal-only mode")
        certs["weak_duality"] = Certificate("weak_duality", None, detail="primal-only mode")
        certs["robustness"] = Certificate("robustness", None, detail="primal-only mode")
    else:
        load = np.zeros(instance.n)
        for row, yv in zip(instance.rows, dual.y):
            load[row.cols] += row.coefs * yv
        excess = float(np.max(load - dual.mu, initial=-math.inf))
        ok = excess <= config.dual_tol and bool(np.all(dual.y >= 0))
        certs["dual_feasibility"] = Certificate("dual_feasibility", ok, excess, config.dual_tol, "max_j (A^T y - mu)_j")
        D = dual.objective
        certs["weak_duality"] = Certificate("weak_duality", f_x >= D - 1e-6, D, f_x)
        d_final = max((r.d for r in result.trace.rounds), default=1)
        R = robustness_constant(oracle, d_final, lam, config.variant)
        bound = R * D * (1.0 + 2.0 * config.slack)
        certs["robustness"] = Certificate("robustness", f_x <= bound + 1e-12, f_x, bound, f"R = {R:.6g}")
    if opt_upper is not None and lam > 0:
        d_final = max((r.d for r in result.trace.rounds), default=1)
        R = robustness_constant(oracle, d_final, lam, config.variant)
        bound = R * opt_upper * (1.0 + 2.0 * config.slack)
        certs["robustness_opt"] = Certificate("robustness_opt", f_x <= bound + 1e-12, f_x, bound)
    return certs
