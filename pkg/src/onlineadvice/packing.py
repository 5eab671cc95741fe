"""Switching meta-algorithm for online concave packing.

Each arriving variable y_i is set to lam * y_sub + (1 - lam) * y_adv, where
y_sub comes from a classical online subroutine that never sees the
advice.  Advice entries that would push the kept advice load past
beta_i * b are dropped for that round, and the subroutine's value is used
alone.
"""
from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from typing import Callable, Optional, Union

import numpy as np

from .model import AdviceProfile, Certificate, PackingInstance, RunMetrics, SparseRow

__all__ = [
    "SwitchState",
    "PackingSubroutine",
    "GreedySaturation",
    "OfflineReplay",
    "PackingResult",
    "SubroutineFailure",
    "switch_round",
    "run_subroutine",
    "run_switching",
    "certify_switching",
]


TRIM_RTOL = 1e-12


class SubroutineFailure(RuntimeError):
    """Raised when the subroutine errors; ``partial`` holds the state reached so far."""

    def __init__(self, message, partial=None):
        super().__init__(message)
        self.partial = partial


@dataclass
class SwitchState:
    kept_load: np.ndarray
    y: list = field(default_factory=list)
    y_sub: list = field(default_factory=list)
    discarded: set = field(default_factory=set)

    @classmethod
    def empty(cls, n: int) -> "SwitchState":
        return cls(kept_load=np.zeros(n))


def switch_round(
    state: SwitchState,
    row: SparseRow,
    y_sub: float,
    y_adv: float,
    lam: float,
    beta_i: float,
    b,
) -> float:
    """Combine the subroutine's and the advice's value for one arriving variable.

    The advice is kept when the kept advice load stays within beta_i * b on
    every constraint this variable touches; otherwise the round is recorded
    as discarded and the subroutine's value is used alone.
    """
    if y_sub < 0 or y_adv < 0 or not (math.isfinite(y_sub) and math.isfinite(y_adv)):
        raise ValueError("y_sub and y_adv must be finite and >= 0")
    if not 0.0 <= lam <= 1.0:
        raise ValueError("lam must lie in [0, 1]")
    if beta_i < 1.0:
        raise ValueError("beta_i must be >= 1")
    b = np.asarray(b, dtype=float)
    if b.shape != state.kept_load.shape or row.cols.max(initial=-1) >= b.size:
        raise ValueError("row, capacities and kept load disagree on n")

    trial = state.kept_load[row.cols] + row.coefs * y_adv
    # relative slack so that exactly tight advice is not lost to summation order
    if np.all(trial <= beta_i * b[row.cols] * (1.0 + TRIM_RTOL)):
        state.kept_load[row.cols] = trial
        y_i = lam * y_sub + (1.0 - lam) * y_adv
    else:
        state.discarded.add(row.index)
        y_i = y_sub
    state.y.append(y_i)
    state.y_sub.append(y_sub)
    return y_i


class PackingSubroutine:
    """Classical online algorithm plugged into the switching framework.

    ``step`` sees only the current row and whatever the subroutine kept from
    earlier rounds; it is never handed the advice.  ``alpha`` (competitive
    ratio) and ``beta`` (feasibility blowup) are declared when known.
    """

    name = "custom"
    alpha: Optional[float] = None
    beta: float = 1.0

    def reset(self, instance: PackingInstance) -> None:
        self.n = instance.n
        self.b = instance.b
        self.objective = instance.objective

    def step(self, row: SparseRow) -> float:
        raise NotImplementedError


class GreedySaturation(PackingSubroutine):
    """Take the largest feasible y_i when its value density beats ``threshold``.

    Density is the marginal objective gain per unit of consumption of the
    tightest (b-normalized) constraint.  Exactly 1-feasible; no competitive
    guarantee is claimed.
    """

    name = "greedy"

    def __init__(self, threshold: float = 0.0):
        self.threshold = threshold

    def reset(self, instance):
        super().reset(instance)
        self.load = np.zeros(instance.n)
        self.history = []

    def step(self, row):
        b = self.b[row.cols]
        room = np.maximum(b - self.load[row.cols], 0.0)
        cap = float(np.min(room / row.coefs))
        y = 0.0
        if cap > 0 and math.isfinite(self.threshold):
            before = self.objective.value(np.array(self.history + [0.0]))
            after = self.objective.value(np.array(self.history + [cap]))
            consumption = cap * float(np.max(row.coefs / b))
            if (after - before) / consumption > self.threshold:
                y = cap
        self.load[row.cols] += row.coefs * y
        self.history.append(y)
        return y


class OfflineReplay(PackingSubroutine):
    """Test subroutine that plays ``scale * y_star`` entry by entry.

    With ``opt_value`` given, alpha = OPT / g(scale * y_star) is known
    exactly, so the robustness bound can be asserted rather than reported.
    """

    name = "offline-replay"

    def __init__(self, y_star, scale: float = 1.0, opt_value: Optional[float] = None):
        self.y_star = np.asarray(y_star, dtype=float)
        self.scale = float(scale)
        self.opt_value = opt_value

    def reset(self, instance):
        super().reset(instance)
        if self.y_star.shape != (instance.m,):
            raise ValueError("offline solution length must equal the number of rounds")
        played = self.scale * self.y_star
        self.beta = max(1.0, instance.violation(played))
        self.alpha = None
        if self.opt_value is not None:
            g = instance.objective.value(played)
            self.alpha = self.opt_value / g if g > 0 else (1.0 if self.opt_value == 0 else math.inf)
        self._t = 0

    def step(self, row):
        y = self.scale * float(self.y_star[self._t])
        self._t += 1
        return y


@dataclass
class PackingResult:
    y: np.ndarray
    y_sub: np.ndarray
    state: SwitchState
    metrics: RunMetrics
    betas: list
    certificates: dict = field(default_factory=dict)


def _beta_at(schedule, i: int, state) -> float:
    return float(schedule(i, state)) if callable(schedule) else float(schedule)


def run_subroutine(instance: PackingInstance, sub: PackingSubroutine) -> np.ndarray:
    """Standalone run of the subroutine, for comparison with the switched run."""
    sub.reset(instance)
    return np.array([sub.step(row) for row in instance.rows])


def run_switching(
    instance: PackingInstance,
    sub: PackingSubroutine,
    advice: AdviceProfile,
    beta_schedule: Union[float, Callable[[int, SwitchState], float]] = 1.0,
) -> PackingResult:
    """Run the switching algorithm over every arriving variable.

    Parameters
    ----------
    beta_schedule : float or callable
        Constant beta, or ``beta(i, state)`` evaluated at round i; it must
        be non-decreasing and >= 1.
    """
    if advice.vector.size < instance.m:
        raise ValueError("advice must have one entry per arriving variable")
    lam = advice.lam
    started = time.perf_counter()
    state = SwitchState.empty(instance.n)
    betas = []
    sub.reset(instance)
    for i, row in enumerate(instance.rows):
        try:
            y_sub = float(sub.step(row))
        except Exception as exc:
            raise SubroutineFailure(f"subroutine failed at round {i}: {exc}", partial=state) from exc
        beta_i = _beta_at(beta_schedule, i, state)
        if betas and beta_i < betas[-1]:
            raise ValueError("beta schedule must be non-decreasing")
        betas.append(beta_i)
        switch_round(state, row, y_sub, float(advice.vector[i]), lam, beta_i, instance.b)
    elapsed = time.perf_counter() - started

    y = np.array(state.y, dtype=float)
    y_adv = advice.vector[: instance.m]
    metrics = RunMetrics(
        primal_objective=instance.objective.value(y),
        advice_objective=instance.objective.value(y_adv),
        max_constraint_violation=instance.violation(y),
        rounds=instance.m,
        wall_time=elapsed,
    )
    if metrics.primal_objective > 0:
        metrics.consistency_ratio = metrics.advice_objective / metrics.primal_objective
    return PackingResult(y, np.array(state.y_sub, dtype=float), state, metrics, betas)


def certify_switching(
    instance: PackingInstance,
    result: PackingResult,
    advice: AdviceProfile,
    sub: Optional[PackingSubroutine] = None,
    opt_value: Optional[float] = None,
    tol: float = 1e-9,
) -> dict:
    """Check the switching guarantees on a finished run.

    The (2 - lam) beta feasibility bound is asserted when the subroutine's
    own output is beta-feasible, and the (lam / alpha) OPT bound when alpha
    is known; otherwise they are reported with ``ok`` left as None.
    """
    lam = advice.lam
    g = instance.objective.value
    y, y_sub = result.y, result.y_sub
    y_adv = advice.vector[: instance.m]
    beta = result.betas[-1] if result.betas else 1.0
    certs = {}

    load = instance.load(y)
    bound = (2.0 - lam) * beta * instance.b
    excess = float(np.max(load - bound, initial=0.0))
    sub_load = instance.load(y_sub)
    sub_ok = bool(np.all(sub_load <= beta * instance.b + tol))
    certs["feasibility"] = Certificate(
        "feasibility", (excess <= tol) if sub_ok else None, excess, tol,
        "max_j (A^T y - (2 - lam) beta b)_j" + ("" if sub_ok else "; subroutine not beta-feasible"),
    )

    keep = np.array([i not in result.state.discarded for i in range(instance.m)], dtype=bool)
    trimmed = np.where(keep, y_adv, 0.0)
    split = lam * sub_load + (1.0 - lam) * instance.load(trimmed) + instance.load(np.where(keep, 0.0, y_sub))
    gap = float(np.max(load - split, initial=0.0))
    certs["load_split"] = Certificate("load_split", gap <= tol * max(1.0, float(np.max(load, initial=0.0))), gap, 0.0)

    trim_excess = float(np.max(result.state.kept_load - beta * instance.b, initial=0.0))
    certs["trimmed_advice"] = Certificate("trimmed_advice", trim_excess <= tol, trim_excess, 0.0)

    gy = g(y)
    certs["value_vs_subroutine"] = Certificate("value_vs_subroutine", gy >= lam * g(y_sub) - tol, gy, lam * g(y_sub))
    if not result.state.discarded:
        target = (1.0 - lam) * g(y_adv)
        certs["consistency"] = Certificate("consistency", gy >= target - tol, gy, target)
    else:
        certs["consistency"] = Certificate("consistency", None, detail=f"{len(result.state.discarded)} rounds discarded")

    alpha = getattr(sub, "alpha", None) if sub is not None else None
    if opt_value is not None and alpha is not None and math.isfinite(alpha) and alpha > 0:
        target = lam / alpha * opt_value
        certs["robustness"] = Certificate("robustness", gy >= target - tol, gy, target, f"alpha = {alpha:.6g}")
    else:
        certs["robustness"] = Certificate("robustness", None, detail="alpha unknown")
    return certs
