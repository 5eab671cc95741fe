"""Experiment driver: advice generation, lambda sweeps and CSV output.

A plan names instances (files, inline documents or seeded generators),
advice modes, a lambda grid and solvers.  ``run_sweep`` expands it into
jobs in a fixed order, runs them (optionally in worker processes), and
writes one CSV row per job in plan order.
"""
from __future__ import annotations

import csv
import io
import json
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from . import applications as apps
from .covering import PdlaConfig, certify_pdla, run_pdla
from .lq import certify_lq, run_lq
from .model import AdviceProfile, CoveringInstance, PackingInstance, SparseRow, instance_from_dict, load_instance
from .objectives import LinearObjective, LqSumObjective, PowerNormObjective
from .oracles import enumerate_vertices, offline_opt_covering, offline_opt_packing
from .packing import GreedySaturation, OfflineReplay, certify_switching, run_switching

__all__ = [
    "CSV_COLUMNS",
    "JOBS_ENV",
    "ExperimentPlan",
    "generate_advice",
    "random_covering",
    "expand_plan",
    "run_job",
    "run_sweep",
    "format_value",
]

JOBS_ENV = "ONLINEADVICE_JOBS"

CSV_COLUMNS = [
    "instance_id",
    "solver",
    "variant",
    "lambda",
    "advice_mode",
    "primal_objective",
    "advice_objective",
    "opt_lower",
    "opt_upper",
    "dual_objective",
    "consistency_ratio",
    "robustness_ratio",
    "max_violation",
    "certified_consistency",
    "certified_robustness",
    "certified_duality",
    "certified_feasibility",
    "rounds",
    "steps",
    "wall_time_ms",
]

ADVICE_MODES = ("optimal", "perturbed", "adversarial", "zero")


# --------------------------------------------------------------------------
# advice


def _parse_mode(mode: str):
    name, _, arg = mode.partition(":")
    if name not in ADVICE_MODES:
        raise ValueError(f"unknown advice mode {mode!r}")
    if name == "perturbed":
        sigma = float(arg) if arg else 0.0
        if sigma < 0:
            raise ValueError("sigma must be >= 0")
        return name, sigma
    return name, None


def _adversarial_covering(instance: CoveringInstance) -> np.ndarray:
    """Costliest vertex of {Ax >= 1, 0 <= x <= u}; it satisfies every row."""
    u = np.zeros(instance.n)
    for row in instance.rows:
        u[row.cols] = np.maximum(u[row.cols], 1.0 / row.coefs)
    try:
        A = instance.matrix()
        G = np.vstack([A, np.eye(instance.n), -np.eye(instance.n)])
        h = np.concatenate([np.ones(instance.m), np.zeros(instance.n), -u])
        V = enumerate_vertices(G, h)
    except ValueError:
        return u
    vals = [instance.objective.value(v) for v in V]
    return V[int(np.argmax(vals))].copy()


def _adversarial_packing(instance: PackingInstance) -> np.ndarray:
    """Feasible advice that spends capacity on the least valuable variables first."""
    y = np.zeros(instance.m)
    load = np.zeros(instance.n)
    order = []
    for i, row in enumerate(instance.rows):
        probe = np.zeros(instance.m)
        probe[i] = 1.0
        b = instance.b[row.cols]
        use = float(np.max(np.where(b > 0, row.coefs / np.where(b > 0, b, 1.0), math.inf)))
        order.append((instance.objective.value(probe) / use if use > 0 else math.inf, i))
    for _, i in sorted(order):
        row = instance.rows[i]
        room = np.maximum(instance.b[row.cols] - load[row.cols], 0.0)
        y[i] = float(np.min(room / row.coefs))
        load[row.cols] += row.coefs * y[i]
    return y


def generate_advice(instance, mode: str, seed: int = 0, lam: float = 0.5, opt=None) -> AdviceProfile:
    """Build advice for ``instance``.

    Parameters
    ----------
    mode : str
        ``optimal``, ``perturbed:SIGMA``, ``adversarial`` or ``zero``.
    opt : OptEstimate, optional
        Reused instead of calling the offline oracle again.
    """
    name, sigma = _parse_mode(mode)
    covering = isinstance(instance, CoveringInstance)
    size = instance.n if covering else instance.m
    if name == "zero":
        return AdviceProfile(np.zeros(size), lam)
    if name == "adversarial":
        vec = _adversarial_covering(instance) if covering else _adversarial_packing(instance)
        return AdviceProfile(vec, lam)
    if opt is None:
        opt = offline_opt_covering(instance) if covering else offline_opt_packing(instance)
    base = np.maximum(np.asarray(opt.point, dtype=float), 0.0)
    if name == "perturbed" and sigma > 0:
        rng = np.random.default_rng(seed)
        base = base * np.exp(rng.normal(0.0, sigma, size=base.shape))
    return AdviceProfile(np.maximum(base, 0.0), lam)


# --------------------------------------------------------------------------
# random corpora


def random_covering(rng: np.random.Generator, n: int, m: int, kind: str = "linear", coef_range=(0.5, 2.0)) -> CoveringInstance:
    """Random covering instance with rows of random support and the named objective.

    kind is ``linear``, ``power_norm`` or ``lq_sum``; q is drawn from {1, 1.5, 2, 3}.
    """
    rows = []
    for i in range(m):
        k = int(rng.integers(1, n + 1))
        cols = np.sort(rng.choice(n, size=k, replace=False))
        rows.append(SparseRow(i, cols, rng.uniform(*coef_range, size=k)))
    d = max(r.sparsity for r in rows) if rows else 1
    q = float(rng.choice([1.0, 1.5, 2.0, 3.0]))
    if kind == "linear":
        obj = LinearObjective(rng.uniform(0.5, 2.0, size=n))
    elif kind == "power_norm":
        k = int(rng.integers(1, n + 1))
        B = rng.uniform(0.0, 1.0, size=(k, n)) * (rng.random((k, n)) < 0.7)
        B[rng.integers(0, k, size=n), np.arange(n)] += rng.uniform(0.2, 1.0, size=n)
        obj = PowerNormObjective(B, q)
    elif kind == "lq_sum":
        perm = rng.permutation(n)
        cuts = np.sort(rng.choice(np.arange(1, n), size=int(rng.integers(0, n)), replace=False)) if n > 1 else []
        groups = [(g.tolist(), float(rng.uniform(0.5, 2.0)), float(rng.choice([1.0, 1.5, 2.0, 3.0])))
                  for g in np.split(perm, cuts) if len(g)]
        obj = LqSumObjective(groups, n)
    else:
        raise ValueError(f"unknown covering objective kind {kind!r}")
    return CoveringInstance(n, rows, obj, d_bound=d)


_PACKING_GENERATORS = {
    "knapsack": apps.random_knapsack,
    "benefit": apps.random_benefit,
    "throughput": apps.random_throughput,
}


# --------------------------------------------------------------------------
# plans


@dataclass
class ExperimentPlan:
    """What to run.

    ``instances`` entries are ``{"path": FILE}``, ``{"inline": DOC}`` or
    ``{"generate": KIND, "count": N, "seed": S, ...}`` with KIND one of
    covering/knapsack/benefit/throughput.
    """

    instances: list
    advice_modes: list = field(default_factory=lambda: ["optimal"])
    lambdas: list = field(default_factory=lambda: [0.0, 0.5, 1.0])
    solvers: list = field(default_factory=lambda: ["auto"])
    seeds: list = field(default_factory=lambda: [0])
    step_eta: float = 1e-3
    output: Optional[str] = None
    timing: bool = False

    def __post_init__(self):
        lams = {float(v) for v in self.lambdas}
        if any(not 0.0 <= v <= 1.0 for v in lams):
            raise ValueError("lambda grid must lie in [0, 1]")
        # the endpoints exercise the degenerate branches, so they are always run
        self.lambdas = sorted(lams | {0.0, 1.0})
        for mode in self.advice_modes:
            _parse_mode(mode)
        if not self.seeds:
            raise ValueError("at least one seed is required")

    @classmethod
    def from_dict(cls, doc: dict, base_dir: Optional[Path] = None) -> "ExperimentPlan":
        known = {"instances", "advice_modes", "lambdas", "solvers", "seeds", "step_eta", "output", "timing"}
        extra = set(doc) - known
        if extra:
            raise ValueError(f"unknown plan fields: {sorted(extra)}")
        plan = cls(**doc)
        if base_dir is not None:
            for spec in plan.instances:
                if "path" in spec and not Path(spec["path"]).is_absolute():
                    spec["path"] = str(Path(base_dir) / spec["path"])
        return plan

    @classmethod
    def load(cls, path) -> "ExperimentPlan":
        path = Path(path)
        return cls.from_dict(json.loads(path.read_text()), base_dir=path.parent)


def _materialize(spec: dict):
    """Yield (instance_id, instance, embedded advice or None) for one plan entry."""
    if "path" in spec:
        inst, adv = load_instance(spec["path"])
        yield spec.get("id", Path(spec["path"]).stem), inst, adv
    elif "inline" in spec:
        inst, adv = instance_from_dict(spec["inline"])
        yield spec.get("id", "inline"), inst, adv
    elif "generate" in spec:
        kind = spec["generate"]
        rng = np.random.default_rng(spec.get("seed", 0))
        for k in range(int(spec.get("count", 1))):
            if kind == "covering":
                n = int(rng.integers(1, spec.get("max_n", 6) + 1))
                m = int(rng.integers(1, spec.get("max_m", 10) + 1))
                obj = spec.get("objective") or str(rng.choice(["linear", "power_norm", "lq_sum"]))
                inst = random_covering(rng, n, m, obj)
            elif kind in _PACKING_GENERATORS:
                size = int(rng.integers(1, spec.get("max_size", 6) + 1))
                inst = _PACKING_GENERATORS[kind](rng, size)
            else:
                raise ValueError(f"unknown generator {kind!r}")
            yield f"{spec.get('id', kind)}-{k}", inst, None
    else:
        raise ValueError("instance entry needs path, inline or generate")


def _solvers_for(instance, requested):
    if isinstance(instance, PackingInstance):
        default = ["switching-greedy", "switching-replay"]
    elif isinstance(instance.objective, LqSumObjective):
        default = ["lq"]
    else:
        default = ["pdla"]
        if instance.objective.homogeneous_degree is not None:
            default.append("pdla-homogeneous")
    if requested == ["auto"]:
        return default
    return [s for s in requested if s in default]


@dataclass
class SweepJob:
    instance_id: str
    instance: object
    solver: str
    advice_mode: str
    seed: int
    lam: float
    step_eta: float
    opt: object
    embedded_advice: Optional[np.ndarray] = None
    timing: bool = False


def expand_plan(plan: ExperimentPlan) -> list:
    """Expand a plan into jobs, in the order their CSV rows appear."""
    jobs = []
    for spec in plan.instances:
        for iid, inst, adv in _materialize(spec):
            if inst.m == 0:
                continue
            covering = isinstance(inst, CoveringInstance)
            opt = offline_opt_covering(inst) if covering else offline_opt_packing(inst)
            for solver in _solvers_for(inst, plan.solvers):
                modes = list(plan.advice_modes) + (["embedded"] if adv is not None else [])
                for mode in modes:
                    random_mode = mode.startswith("perturbed") and _parse_mode(mode)[1] > 0
                    for seed in (plan.seeds if random_mode else plan.seeds[:1]):
                        for lam in plan.lambdas:
                            jobs.append(SweepJob(
                                iid if len(plan.seeds) == 1 or not random_mode else f"{iid}@{seed}",
                                inst, solver, mode, int(seed), float(lam), plan.step_eta, opt,
                                None if adv is None else adv.vector, plan.timing,
                            ))
    return jobs


def _flag(*certs):
    """Combine certificates: False if any failed, True if any passed, None if none apply."""
    states = [c.ok for c in certs if c is not None]
    if any(s is False for s in states):
        return False
    if any(s is True for s in states):
        return True
    return None


def run_job(job: SweepJob) -> dict:
    """Run one (instance, solver, advice, lambda) combination and return its CSV row."""
    inst = job.instance
    if job.advice_mode == "embedded":
        advice = AdviceProfile(job.embedded_advice, job.lam)
    else:
        advice = generate_advice(inst, job.advice_mode, job.seed, job.lam, job.opt)
    row = dict.fromkeys(CSV_COLUMNS)
    row.update(instance_id=job.instance_id, solver=job.solver, variant="", advice_mode=job.advice_mode, **{"lambda": job.lam})
    row["opt_lower"], row["opt_upper"] = job.opt.lower, job.opt.upper

    if job.solver.startswith("pdla"):
        variant = "homogeneous" if job.solver.endswith("homogeneous") else "standard"
        cfg = PdlaConfig(lam=job.lam, step_eta=job.step_eta, variant=variant)
        res = run_pdla(inst, advice, cfg)
        certs = certify_pdla(inst, res, advice, cfg, opt_upper=job.opt.upper)
        m = res.metrics
        row.update(
            variant=variant,
            dual_objective=m.dual_objective,
            certified_consistency=_flag(certs["consistency"], certs.get("consistency_step")),
            certified_robustness=_flag(certs["robustness"], certs.get("robustness_opt")),
            certified_duality=_flag(certs["dual_feasibility"], certs["weak_duality"]),
            certified_feasibility=_flag(certs["feasibility"], certs["monotonicity"], certs["growth_rate"]),
            robustness_ratio=m.primal_objective / job.opt.lower if job.opt.lower > 0 else math.nan,
        )
    elif job.solver == "lq":
        res = run_lq(inst, advice, job.lam, step_eta=job.step_eta)
        certs = certify_lq(inst, res, advice)
        m = res.metrics
        row.update(
            dual_objective=m.dual_objective,
            certified_consistency=_flag(certs["consistency"], certs.get("consistency_step")),
            certified_robustness=_flag(certs["dual_norm"]),
            certified_duality=_flag(certs["pd_ratio"], certs["mu_equals_ATy"], certs["dual_monotone"]),
            certified_feasibility=_flag(certs["feasibility"], certs["monotonicity"], certs["growth_rate"], certs["x_cap"]),
            robustness_ratio=m.primal_objective / job.opt.lower if job.opt.lower > 0 else math.nan,
        )
    else:
        if job.solver == "switching-greedy":
            sub = GreedySaturation(0.0)
        else:
            sub = OfflineReplay(job.opt.point, 1.0, job.opt.value)
        res = run_switching(inst, sub, advice, 1.0)
        certs = certify_switching(inst, res, advice, sub, job.opt.value)
        m = res.metrics
        row.update(
            certified_consistency=_flag(certs["consistency"]),
            certified_robustness=_flag(certs["robustness"], certs["value_vs_subroutine"]),
            certified_duality=None,
            certified_feasibility=_flag(certs["feasibility"], certs["trimmed_advice"], certs["load_split"]),
            robustness_ratio=job.opt.upper / m.primal_objective if m.primal_objective > 0 else math.nan,
        )
    row.update(
        primal_objective=m.primal_objective,
        advice_objective=m.advice_objective,
        consistency_ratio=m.consistency_ratio,
        max_violation=m.max_constraint_violation,
        rounds=m.rounds,
        steps=m.steps,
        wall_time_ms=m.wall_time * 1e3 if job.timing else None,
    )
    return row


def format_value(v) -> str:
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        if math.isnan(v):
            return ""
        return format(float(v), ".12g")
    return str(v)


def default_jobs() -> int:
    try:
        return max(1, int(os.environ.get(JOBS_ENV, "1")))
    except ValueError:
        return 1


def run_sweep(plan: ExperimentPlan, out=None, jobs: Optional[int] = None) -> list:
    """Run every job of ``plan`` and write the CSV to ``out`` (path or text stream).

    Rows come back in plan order whatever the completion order.  Returns the
    row dicts.
    """
    work = expand_plan(plan)
    jobs = jobs or default_jobs()
    if jobs > 1 and len(work) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            rows = list(pool.map(run_job, work, chunksize=max(1, len(work) // (4 * jobs))))
    else:
        rows = [run_job(j) for j in work]

    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    for r in rows:
        writer.writerow([format_value(r[c]) for c in CSV_COLUMNS])
    text = buf.getvalue()
    target = out if out is not None else plan.output
    if target is not None:
        if hasattr(target, "write"):
            target.write(text)
        else:
            Path(target).write_text(text)
    return rows


def any_failed(rows) -> bool:
    cols = ["certified_consistency", "certified_robustness", "certified_duality", "certified_feasibility"]
    return any(r[c] is False for r in rows for c in cols)
