"""Reducers from named online problems to packing and covering instances.

Packing variables are listed in arrival order; a problem whose arrival
carries several variables (job alternatives, request paths) emits them
consecutively.  Random generators for the test corpus live at the bottom.
"""
from __future__ import annotations

import logging
import math
import warnings
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import networkx as nx
import numpy as np

from .model import AdviceProfile, CoveringInstance, PackingInstance, SparseRow
from .objectives import LinearConcave, PowerNormObjective, SeparableConcave, Utility

__all__ = [
    "KnapsackItem",
    "Job",
    "FlowRequest",
    "OnumRequest",
    "RevenueRound",
    "reduce_knapsack",
    "knapsack_advice",
    "reduce_resource_benefit",
    "reduce_throughput",
    "reduce_onum",
    "reduce_ooic",
    "reduce_mixed_covering_packing",
    "mixed_norm",
    "packing_lp_beta",
    "random_knapsack",
    "random_benefit",
    "random_throughput",
]

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class KnapsackItem:
    v: float
    w: float

    def __post_init__(self):
        if not (self.v > 0 and self.w > 0):
            raise ValueError("knapsack items need v > 0 and w > 0")


@dataclass
class Job:
    """A job with benefit w and alternatives, each a {resource: amount} map."""

    w: float
    alternatives: list

    def __post_init__(self):
        if self.w <= 0:
            raise ValueError("job benefit must be positive")
        if not self.alternatives:
            raise ValueError("a job needs at least one alternative")


@dataclass(frozen=True)
class FlowRequest:
    s: object
    t: object


@dataclass
class OnumRequest:
    path: list  # vertex sequence of the fixed route
    budget: float
    utility: Callable[[float], float] = field(default_factory=Utility)


@dataclass
class RevenueRound:
    """Concave revenue g_t with declared bounds on g_t'(0)."""

    utility: Callable[[float], float]
    d_min: Optional[float] = None
    d_max: Optional[float] = None


def _check_scalar_concave(u, upper: float, label: str, samples: int = 33):
    """Spot-check u(0) = 0, monotone and midpoint concave on [0, upper]."""
    if abs(u(0.0)) > 1e-12:
        raise ValueError(f"{label}: utility must vanish at 0")
    upper = upper if math.isfinite(upper) and upper > 0 else 1.0
    ts = np.linspace(0.0, upper, samples)
    vals = np.array([u(t) for t in ts])
    if np.any(np.diff(vals) < -1e-12 * (1 + np.abs(vals[1:]))):
        raise ValueError(f"{label}: utility is not monotone")
    mids = np.array([u(0.5 * (a + b)) for a, b in zip(ts[:-2], ts[2:])])
    if np.any(mids < 0.5 * (vals[:-2] + vals[2:]) - 1e-12 * (1 + np.abs(mids))):
        raise ValueError(f"{label}: utility fails the concavity spot-check")


# --------------------------------------------------------------------------
# packing reducers


def reduce_knapsack(items: Sequence[KnapsackItem], C: float) -> PackingInstance:
    """Fractional knapsack as a packing LP over y_i = value taken from item i.

    Constraint 0 is the capacity (coefficient w_i / v_i); constraint 1 + i
    is the box y_i <= v_i, which the bare LP lacks.
    """
    if C < 0:
        raise ValueError("capacity must be nonnegative")
    m = len(items)
    b = np.concatenate([[float(C)], [it.v for it in items]])
    rows = [SparseRow(i, [0, 1 + i], [it.w / it.v, 1.0]) for i, it in enumerate(items)]
    return PackingInstance(1 + m, b, rows, LinearConcave(np.ones(m)), labels=[f"item{i}" for i in range(m)])


def knapsack_advice(items: Sequence[KnapsackItem], fractions, lam: float) -> AdviceProfile:
    """Advice 'take a fraction phi_i of item i' becomes y'_i = phi_i v_i."""
    phi = np.asarray(fractions, dtype=float)
    if phi.shape != (len(items),) or np.any(phi < 0) or np.any(phi > 1):
        raise ValueError("one fraction in [0, 1] per item")
    return AdviceProfile(phi * np.array([it.v for it in items]), lam)


def reduce_resource_benefit(jobs: Sequence[Job], capacities, P: Optional[float] = None) -> PackingInstance:
    """Resource management benefit LP.

    Constraints 0..n-1 are resources (coefficient a_ij^(k) / w_i against
    c_j); constraint n + i limits job i to sum_k y_i^(k) / w_i <= 1.
    """
    c = np.asarray(capacities, dtype=float)
    n_res = c.size
    rows, labels = [], []
    for i, job in enumerate(jobs):
        for k, alt in enumerate(job.alternatives):
            pairs = []
            for j, a in sorted(alt.items()):
                if not 0 <= j < n_res:
                    raise ValueError(f"job {i} uses unknown resource {j}")
                if a <= 0:
                    continue
                if P is not None and not (1.0 / P - 1e-12 <= a / c[j] <= 1.0 + 1e-12):
                    warnings.warn(f"job {i} alternative {k}: a/c = {a / c[j]:.4g} outside [1/P, 1]")
                pairs.append((j, a / job.w))
            pairs.append((n_res + i, 1.0 / job.w))
            rows.append(SparseRow.from_pairs(len(rows), pairs))
            labels.append(f"job{i}/alt{k}")
    b = np.concatenate([c, np.ones(len(jobs))])
    return PackingInstance(n_res + len(jobs), b, rows, LinearConcave(np.ones(len(rows))), labels=labels)


def _edge_key(graph, u, v):
    return (u, v) if graph.is_directed() else tuple(sorted((u, v), key=repr))


def reduce_throughput(graph: nx.Graph, requests: Sequence[FlowRequest], path_cap: int = 16) -> PackingInstance:
    """Throughput maximization over enumerated simple s-t paths.

    Edges carry a ``capacity`` attribute (default 1).  Constraints are the
    edges in sorted order, then one unit-demand row per request.
    """
    edges = sorted((_edge_key(graph, u, v) for u, v in graph.edges()), key=repr)
    eidx = {e: j for j, e in enumerate(edges)}
    caps = [float(graph.edges[e].get("capacity", 1.0)) for e in edges]
    n_e = len(edges)
    rows, labels = [], []
    for i, req in enumerate(requests):
        paths = []
        if req.s in graph and req.t in graph and req.s != req.t:
            gen = nx.all_simple_paths(graph, req.s, req.t)
            for path in gen:
                paths.append(path)
                if len(paths) > 4 * path_cap:
                    break
        paths = sorted(paths, key=lambda p: (len(p), repr(p)))[:path_cap]
        if not paths:
            log.warning("request %d (%r -> %r) has no path and contributes nothing", i, req.s, req.t)
            continue
        for path in paths:
            cols = [eidx[_edge_key(graph, u, v)] for u, v in zip(path, path[1:])]
            pairs = [(j, 1.0) for j in sorted(cols)] + [(n_e + i, 1.0)]
            rows.append(SparseRow.from_pairs(len(rows), pairs))
            labels.append(f"req{i}:" + "-".join(map(str, path)))
    b = np.concatenate([caps, np.ones(len(requests))])
    return PackingInstance(n_e + len(requests), b, rows, LinearConcave(np.ones(len(rows))), labels=labels)


def reduce_onum(requests: Sequence[OnumRequest]) -> PackingInstance:
    """Network utility maximization on fixed paths with unit edge capacities.

    Constraints are the edges used by any request (sorted), then the budget
    box y_i <= b_i of each request.
    """
    edge_set = set()
    for req in requests:
        if len(req.path) < 2:
            raise ValueError("each path needs at least one edge")
        edge_set.update(tuple(sorted((u, v), key=repr)) for u, v in zip(req.path, req.path[1:]))
    edges = sorted(edge_set, key=repr)
    eidx = {e: j for j, e in enumerate(edges)}
    n_e = len(edges)
    rows = []
    for i, req in enumerate(requests):
        if req.budget <= 0:
            raise ValueError("budgets must be positive")
        _check_scalar_concave(req.utility, req.budget, f"request {i}")
        cols = sorted({eidx[tuple(sorted((u, v), key=repr))] for u, v in zip(req.path, req.path[1:])})
        rows.append(SparseRow.from_pairs(i, [(j, 1.0) for j in cols] + [(n_e + i, 1.0)]))
    b = np.concatenate([np.ones(n_e), [r.budget for r in requests]])
    return PackingInstance(n_e + len(requests), b, rows, SeparableConcave([r.utility for r in requests]))


def reduce_ooic(rounds: Sequence[RevenueRound], delta: float) -> PackingInstance:
    """Inventory-constrained selling: one row sum_t y_t <= delta."""
    if delta <= 0:
        raise ValueError("inventory delta must be positive")
    for t, r in enumerate(rounds):
        _check_scalar_concave(r.utility, delta, f"round {t}")
        d0 = getattr(r.utility, "derivative_at_zero", None)
        if d0 is not None and (r.d_min is not None or r.d_max is not None):
            lo = r.d_min if r.d_min is not None else 0.0
            hi = r.d_max if r.d_max is not None else math.inf
            if not lo <= d0() <= hi:
                raise ValueError(f"round {t}: g'(0) = {d0()} outside the declared [{lo}, {hi}]")
    rows = [SparseRow(t, [0], [1.0]) for t in range(len(rounds))]
    return PackingInstance(1, [delta], rows, SeparableConcave([r.utility for r in rounds]))


def packing_lp_beta(instance: PackingInstance, B: float):
    """Schedule beta_i = max(1, ln(1 + n kappa_i) / B).

    kappa_i is the max/min nonzero coefficient ratio over rows 0..i, so the
    schedule only looks at the revealed prefix.
    """
    kappas, a_max, a_min = [], 0.0, math.inf
    for row in instance.rows:
        a_max = max(a_max, float(row.coefs.max()))
        a_min = min(a_min, float(row.coefs.min()))
        kappas.append(a_max / a_min)

    def schedule(i, _state):
        return max(1.0, math.log1p(instance.n * kappas[i]) / B)

    return schedule


# --------------------------------------------------------------------------
# covering reducer


def reduce_mixed_covering_packing(B, q: float, rows, d_bound: Optional[int] = None) -> CoveringInstance:
    """min ||Bx||_q s.t. Ax >= 1, solved through f(x) = ||Bx||_q^q.

    ``rows`` holds SparseRow objects or (column, coefficient) pair lists.
    """
    B = np.asarray(B, dtype=float)
    if np.any(B < 0):
        raise ValueError("B must be nonnegative")
    obj = PowerNormObjective(B, q)
    built = [r if isinstance(r, SparseRow) else SparseRow.from_pairs(i, r) for i, r in enumerate(rows)]
    return CoveringInstance(B.shape[1], built, obj, d_bound=d_bound)


def mixed_norm(B, q: float, x) -> float:
    """||Bx||_q, the q-th root of the solver's objective."""
    v = np.asarray(B, dtype=float) @ np.asarray(x, dtype=float)
    return float(np.sum(v ** q) ** (1.0 / q))


# --------------------------------------------------------------------------
# random corpus


def random_knapsack(rng: np.random.Generator, m: int):
    items = [KnapsackItem(float(rng.uniform(0.5, 3.0)), float(rng.uniform(0.2, 2.0))) for _ in range(m)]
    C = float(rng.uniform(0.2, 0.6) * sum(it.w for it in items))
    return reduce_knapsack(items, C)


def random_benefit(rng: np.random.Generator, jobs: int, resources: int = 3, P: float = 4.0):
    c = rng.uniform(1.0, 3.0, size=resources)
    out = []
    for _ in range(jobs):
        alts = []
        for _ in range(int(rng.integers(1, 3))):
            used = rng.choice(resources, size=int(rng.integers(1, resources + 1)), replace=False)
            alts.append({int(j): float(rng.uniform(1.0 / P, 1.0) * c[j]) for j in used})
        out.append(Job(float(rng.uniform(1.0, 3.0)), alts))
    return reduce_resource_benefit(out, c, P)


def random_throughput(rng: np.random.Generator, requests: int, nodes: int = 5, path_cap: int = 3):
    g = nx.cycle_graph(nodes)
    for _ in range(nodes // 2):
        u, v = (int(t) for t in rng.choice(nodes, size=2, replace=False))
        g.add_edge(u, v)
    for e in g.edges:
        g.edges[e]["capacity"] = float(rng.integers(1, 3))
    reqs = []
    for _ in range(requests):
        s, t = (int(v) for v in rng.choice(nodes, size=2, replace=False))
        reqs.append(FlowRequest(s, t))
    return reduce_throughput(g, reqs, path_cap)
