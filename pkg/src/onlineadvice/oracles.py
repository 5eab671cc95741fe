"""Offline ground truth for desk-scale instances.

Nothing here calls the online solvers.  Covering OPT comes from vertex
enumeration (linear objectives), a refined coordinate grid, or away-step
Frank-Wolfe over the enumerated vertices; each returns a certified bracket
``lower <= OPT <= upper``.  Packing OPT comes from density greedy,
enumeration, a grid, or an LP solve for instances past enumeration size.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.optimize import linprog, minimize, minimize_scalar

from .model import CoveringInstance, PackingInstance
from .objectives import (
    LinearObjective,
    LqSumObjective,
    ObjectiveOracle,
    SeparableConcave,
)

__all__ = [
    "OptEstimate",
    "ConjugateBracket",
    "enumerate_vertices",
    "offline_opt_covering",
    "offline_opt_packing",
    "weak_duality_check",
    "conjugate_fallback",
]

MAX_COMBINATIONS = 2_000_000


@dataclass
class OptEstimate:
    """Bracket on the offline optimum.

    ``value`` is the objective of ``point``, a feasible solution: an upper
    bound for covering and a lower bound for packing.
    """

    value: float
    method: str
    gap_bound: float
    lower: float
    upper: float
    point: Optional[np.ndarray] = None

    def to_dict(self):
        return {
            "value": self.value,
            "method": self.method,
            "gap_bound": self.gap_bound,
            "lower": self.lower,
            "upper": self.upper,
            "point": None if self.point is None else self.point.tolist(),
        }


@dataclass
class ConjugateBracket:
    lower: float
    upper: float
    argmax: np.ndarray
    status: str = "ok"

    @property
    def width(self) -> float:
        return self.upper - self.lower


def enumerate_vertices(G, h, tol: float = 1e-9) -> np.ndarray:
    """All vertices of the polyhedron {z : G z >= h}.

    Every choice of dim(z) linearly independent rows is solved as equalities
    and kept when the solution satisfies the remaining rows.
    """
    G = np.asarray(G, dtype=float)
    h = np.asarray(h, dtype=float)
    k, n = G.shape
    if n == 0:
        return np.zeros((1, 0))
    total = math.comb(k, n)
    if total > MAX_COMBINATIONS:
        raise ValueError(f"{total} active sets exceed the enumeration budget")
    combos = np.array(list(itertools.combinations(range(k), n)), dtype=int)
    out = []
    for chunk in np.array_split(combos, max(1, len(combos) // 50_000)):
        Gs = G[chunk]
        dets = np.linalg.det(Gs)
        scale = np.abs(Gs).max(axis=(1, 2)) ** n
        ok = np.abs(dets) > 1e-10 * np.maximum(scale, 1e-300)
        if not ok.any():
            continue
        Z = np.linalg.solve(Gs[ok], h[chunk[ok]][..., None])[..., 0]
        feas = np.all(Z @ G.T >= h - tol * (1.0 + np.abs(h)), axis=1)
        out.append(Z[feas])
    if not out:
        return np.zeros((0, n))
    V = np.concatenate(out)
    V = np.round(V, 12) + 0.0  # also folds -0.0 into 0.0
    return np.unique(V, axis=0)


# --------------------------------------------------------------------------
# covering


def _column_caps(inst: CoveringInstance) -> np.ndarray:
    """x_j never needs to exceed 1 / (smallest coefficient in column j)."""
    u = np.zeros(inst.n)
    for row in inst.rows:
        u[row.cols] = np.maximum(u[row.cols], 1.0 / row.coefs)
    # raising x_j to 1/a_ij satisfies row i alone, so the largest such value suffices
    return u


def _covering_polytope(inst: CoveringInstance):
    u = _column_caps(inst)
    A = inst.matrix()
    n = inst.n
    G = np.vstack([A, np.eye(n), -np.eye(n)])
    h = np.concatenate([np.ones(inst.m), np.zeros(n), -u])
    return G, h, u


def _feasible_cover(A, X, tol=1e-12):
    return np.all(X @ A.T >= 1.0 - tol, axis=1)


def _opt_cover_enum(inst: CoveringInstance) -> OptEstimate:
    obj = inst.objective
    if not isinstance(obj, LinearObjective):
        raise ValueError("enumeration mode needs a linear objective")
    G, h, _ = _covering_polytope(inst)
    V = enumerate_vertices(G, h)
    costs = V @ obj.c
    best = int(np.argmin(costs))
    val = float(costs[best])
    return OptEstimate(val, "exact_lp_enumeration", 0.0, val, val, V[best].copy())


def _grad_bound(obj: ObjectiveOracle, u: np.ndarray, X: np.ndarray):
    """Per-coordinate bound on the gradient over the box [0, u]; also says whether it is rigorous."""
    if obj.monotone_gradient:
        return obj.grad(u), True
    if isinstance(obj, LqSumObjective):
        bound = np.zeros(obj.n)
        for S, c, _q in obj.groups:
            bound[S] = c
        return bound, True
    return np.max([obj.grad(x) for x in X], axis=0), False


def _grid(lo, hi, r):
    axes = [np.linspace(a, b, r) for a, b in zip(lo, hi)]
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.stack([m.ravel() for m in mesh], axis=1)


def _opt_cover_grid(inst: CoveringInstance, resolution: Optional[int] = None, passes: int = 2) -> OptEstimate:
    n = inst.n
    if n > 6:
        raise ValueError("grid mode supports n <= 6")
    obj = inst.objective
    A = inst.matrix()
    u = _column_caps(inst)
    r = resolution or max(3, int(20_000 ** (1.0 / n)))
    X = _grid(np.zeros(n), u, r)
    X = X[_feasible_cover(A, X)]
    vals = np.array([obj.value(x) for x in X])
    best = int(np.argmin(vals))
    x_best, v_best = X[best].copy(), float(vals[best])
    # rounding OPT's minimizer up to the grid stays feasible and costs at most h . grad bound
    spacing = u / (r - 1)
    gbound, rigorous = _grad_bound(obj, u, X)
    lower = v_best - float(spacing @ gbound)

    half = spacing
    for _ in range(passes):
        lo = np.maximum(x_best - half, 0.0)
        hi = np.minimum(x_best + half, u)
        Y = _grid(lo, hi, r)
        Y = Y[_feasible_cover(A, Y)]
        if len(Y):
            yv = np.array([obj.value(y) for y in Y])
            k = int(np.argmin(yv))
            if yv[k] < v_best:
                x_best, v_best = Y[k].copy(), float(yv[k])
        half = half * 2.0 / (r - 1)
    lower = min(lower, v_best)
    method = "grid_refinement" if rigorous else "grid_refinement(sampled_gradient)"
    return OptEstimate(v_best, method, v_best - lower, lower, v_best, x_best)


def _opt_cover_fw(inst: CoveringInstance, max_iter: int = 3000, rtol: float = 1e-9) -> OptEstimate:
    """Away-step Frank-Wolfe over the vertices of {Ax >= 1, 0 <= x <= u}.

    The Frank-Wolfe gap g.(x - s) bounds f(x) - OPT for convex f, so the
    best f(x_k) - gap_k is a certified lower bound.
    """
    obj = inst.objective
    G, h, _ = _covering_polytope(inst)
    V = enumerate_vertices(G, h)
    vvals = np.array([obj.value(v) for v in V])
    start = int(np.argmin(vvals))
    weights = {start: 1.0}
    x = V[start].copy()
    fx = float(vvals[start])
    lower = -math.inf
    for _ in range(max_iter):
        g = obj.grad(x)
        scores = V @ g
        s = int(np.argmin(scores))
        gap = float(g @ x - scores[s])
        lower = max(lower, fx - gap)
        if gap <= rtol * max(abs(fx), 1e-12):
            break
        active = list(weights)
        a = active[int(np.argmax(scores[active]))]
        away_gap = float(scores[a] - g @ x)
        if gap >= away_gap or len(active) == 1:
            direction = V[s] - x
            gmax = 1.0
            fw = True
        else:
            direction = x - V[a]
            wa = weights[a]
            gmax = wa / (1.0 - wa) if wa < 1.0 else 1e12
            fw = False
        res = minimize_scalar(
            lambda t: obj.value(x + t * direction), bounds=(0.0, gmax), method="bounded",
            options={"xatol": 1e-13 * max(1.0, gmax)},
        )
        t = float(res.x)
        # keep the endpoints reachable; the bounded search stays strictly inside
        for cand in (0.0, gmax):
            if obj.value(x + cand * direction) < obj.value(x + t * direction):
                t = cand
        if t <= 0.0:
            if fw:
                break
            continue
        if fw:
            for k in weights:
                weights[k] *= 1.0 - t
            weights[s] = weights.get(s, 0.0) + t
        else:
            for k in weights:
                weights[k] *= 1.0 + t
            weights[a] -= t
        weights = {k: w for k, w in weights.items() if w > 1e-15}
        x = np.maximum(x + t * direction, 0.0)
        fx = obj.value(x)
    lower = min(lower, fx)
    return OptEstimate(fx, "frank_wolfe_vertices", fx - lower, lower, fx, x)


def offline_opt_covering(instance: CoveringInstance, mode: str = "auto", resolution: Optional[int] = None) -> OptEstimate:
    """Offline OPT of min f(x) s.t. Ax >= 1, x >= 0.

    Parameters
    ----------
    mode : {"auto", "enum", "grid", "fw"}
        ``auto`` uses enumeration for linear objectives; otherwise Frank-Wolfe,
        intersected with the grid bracket when n <= 4.
    resolution : int, optional
        Grid points per axis in grid mode.
    """
    if instance.m == 0:
        return OptEstimate(0.0, "empty", 0.0, 0.0, 0.0, np.zeros(instance.n))
    if mode == "enum":
        return _opt_cover_enum(instance)
    if mode == "grid":
        return _opt_cover_grid(instance, resolution)
    if mode == "fw":
        return _opt_cover_fw(instance)
    if mode != "auto":
        raise ValueError(f"unknown covering oracle mode {mode!r}")
    if isinstance(instance.objective, LinearObjective):
        return _opt_cover_enum(instance)
    est = _opt_cover_fw(instance)
    if instance.n <= 4:
        grid = _opt_cover_grid(instance, resolution)
        if grid.upper < est.upper:
            est.value, est.upper, est.point = grid.value, grid.upper, grid.point
        est.lower = max(est.lower, grid.lower)
        est.gap_bound = est.upper - est.lower
        est.method = "frank_wolfe+grid"
    return est


# --------------------------------------------------------------------------
# packing


def _packing_caps(inst: PackingInstance) -> np.ndarray:
    """Implied upper bound min_j b_j / a_ij per variable."""
    caps = np.zeros(inst.m)
    for i, row in enumerate(inst.rows):
        caps[i] = float(np.min(inst.b[row.cols] / row.coefs))
    return caps


def _knapsack_structure(inst: PackingInstance):
    """Return the shared column when every other column touches one variable, else None."""
    touched = [[] for _ in range(inst.n)]
    for i, row in enumerate(inst.rows):
        for j in row.cols:
            touched[j].append(i)
    shared = [j for j in range(inst.n) if len(touched[j]) > 1]
    if len(shared) > 1:
        return None
    return shared[0] if shared else -1


def _opt_pack_greedy(inst: PackingInstance) -> OptEstimate:
    c = inst.objective.linear_costs()
    if c is None:
        raise ValueError("density greedy needs a linear objective")
    shared = _knapsack_structure(inst)
    if shared is None:
        raise ValueError("density greedy needs one shared constraint plus private ones")
    m = inst.m
    cap = np.full(m, math.inf)
    w = np.zeros(m)
    for i, row in enumerate(inst.rows):
        for j, a in zip(row.cols, row.coefs):
            if j == shared:
                w[i] = a
            else:
                cap[i] = min(cap[i], inst.b[j] / a)
    y = np.zeros(m)
    budget = inst.b[shared] if shared >= 0 else math.inf
    density = np.where(w > 0, c[:m] / np.where(w > 0, w, 1.0), math.inf)
    for i in sorted(range(m), key=lambda i: (-density[i], i)):
        if c[i] <= 0:
            continue
        take = cap[i] if w[i] == 0 else min(cap[i], budget / w[i])
        if math.isinf(take):
            return OptEstimate(math.inf, "density_greedy", 0.0, math.inf, math.inf, None)
        y[i] = max(take, 0.0)
        budget -= w[i] * y[i]
    val = float(c[:m] @ y)
    return OptEstimate(val, "density_greedy", 0.0, val, val, y)


def _opt_pack_enum(inst: PackingInstance) -> OptEstimate:
    c = inst.objective.linear_costs()
    if c is None:
        raise ValueError("enumeration mode needs a linear objective")
    A = inst.matrix()
    m = inst.m
    G = np.vstack([-A.T, np.eye(m)])
    h = np.concatenate([-inst.b, np.zeros(m)])
    V = enumerate_vertices(G, h)
    vals = V @ c[:m]
    best = int(np.argmax(vals))
    val = float(vals[best])
    return OptEstimate(val, "exact_lp_enumeration", 0.0, val, val, V[best].copy())


def _opt_pack_lp(inst: PackingInstance) -> OptEstimate:
    c = inst.objective.linear_costs()
    if c is None:
        raise ValueError("lp mode needs a linear objective")
    A = inst.matrix()
    res = linprog(-c[: inst.m], A_ub=A.T, b_ub=inst.b, bounds=[(0, None)] * inst.m, method="highs")
    if res.status == 3:
        return OptEstimate(math.inf, "lp_highs", 0.0, math.inf, math.inf, None)
    if res.status != 0:
        raise RuntimeError(f"LP solve failed: {res.message}")
    y = np.maximum(res.x, 0.0)
    # shrink onto the feasible side so the point's value is a true lower bound
    load = A.T @ y
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(inst.b > 0, load / inst.b, np.where(load > 0, math.inf, 0.0))
    worst = float(ratio.max(initial=0.0))
    if worst > 1.0:
        y = y / worst
    val = float(c[: inst.m] @ y)
    upper = float(-res.fun)
    tol = 1e-9 * max(1.0, abs(upper))
    return OptEstimate(val, "lp_highs", upper + tol - val, val, upper + tol, y)


def _concave_grid_gap(obj, spacing):
    if obj.linear_costs() is not None:
        return float(obj.linear_costs()[: len(spacing)] @ spacing), True
    if isinstance(obj, SeparableConcave):
        # u(y) - u(y - h) <= u(h) for concave u with u(0) = 0
        return float(sum(u(h) for u, h in zip(obj.utilities, spacing))), True
    return math.nan, False


def _opt_pack_grid(inst: PackingInstance, resolution: Optional[int] = None, passes: int = 2) -> OptEstimate:
    m = inst.m
    if m > 6:
        raise ValueError("grid mode supports m <= 6")
    caps = _packing_caps(inst)
    A = inst.matrix()
    obj = inst.objective
    r = resolution or max(3, int(20_000 ** (1.0 / m)))

    def feasible(Y):
        return np.all(Y @ A <= inst.b * (1 + 1e-12) + 1e-15, axis=1)

    Y = _grid(np.zeros(m), caps, r)
    Y = Y[feasible(Y)]
    vals = np.array([obj.value(y) for y in Y])
    k = int(np.argmax(vals))
    y_best, v_best = Y[k].copy(), float(vals[k])
    spacing = caps / (r - 1)
    gap, _ = _concave_grid_gap(obj, spacing)
    upper = v_best + gap
    half = spacing
    for _ in range(passes):
        Z = _grid(np.maximum(y_best - half, 0.0), np.minimum(y_best + half, caps), r)
        Z = Z[feasible(Z)]
        if len(Z):
            zv = np.array([obj.value(z) for z in Z])
            k = int(np.argmax(zv))
            if zv[k] > v_best:
                y_best, v_best = Z[k].copy(), float(zv[k])
        half = half * 2.0 / (r - 1)
    upper = max(upper, v_best)
    return OptEstimate(v_best, "grid_refinement", upper - v_best, v_best, upper, y_best)


def offline_opt_packing(instance: PackingInstance, mode: str = "auto", resolution: Optional[int] = None) -> OptEstimate:
    """Offline OPT of max g(y) s.t. A^T y <= b, y >= 0.

    Parameters
    ----------
    mode : {"auto", "greedy", "enum", "grid", "lp"}
        ``auto`` picks density greedy for knapsack-shaped linear instances,
        enumeration for linear instances with m <= 6, the LP solver for larger
        linear ones, and the grid for concave objectives.
    """
    if instance.m == 0:
        return OptEstimate(0.0, "empty", 0.0, 0.0, 0.0, np.zeros(0))
    if mode == "greedy":
        return _opt_pack_greedy(instance)
    if mode == "enum":
        return _opt_pack_enum(instance)
    if mode == "grid":
        return _opt_pack_grid(instance, resolution)
    if mode == "lp":
        return _opt_pack_lp(instance)
    if mode != "auto":
        raise ValueError(f"unknown packing oracle mode {mode!r}")
    if instance.objective.linear_costs() is not None:
        if _knapsack_structure(instance) is not None:
            return _opt_pack_greedy(instance)
        if instance.m <= 6:
            return _opt_pack_enum(instance)
        return _opt_pack_lp(instance)
    return _opt_pack_grid(instance, resolution)


# --------------------------------------------------------------------------
# duality helpers


def weak_duality_check(primal_value: float, dual, tol: float = 1e-9) -> bool:
    """True iff primal_value >= dual objective - tol."""
    d = dual if isinstance(dual, (int, float)) else dual.objective
    return bool(primal_value >= d - tol)


def conjugate_fallback(
    oracle: ObjectiveOracle,
    mu,
    domain_box,
    resolution: Optional[int] = None,
    refine: int = 2,
    max_width: float = 1e-6,
) -> ConjugateBracket:
    """Bracket sup_{z in box} mu.z - f(z) for convex f.

    The lower end is the best point found (grid, refinement, then a
    bounded quasi-Newton polish).  The upper end linearizes the concave
    function h(z) = mu.z - f(z) at that point and maximizes the linear
    model over the box, which over-estimates h everywhere in the box.
    The box itself is trusted, not proven to contain the maximizer.
    """
    mu = np.asarray(mu, dtype=float)
    lo, hi = (np.asarray(v, dtype=float) for v in domain_box)
    n = mu.size

    def h(z):
        return float(mu @ z - oracle.value(z))

    r = resolution or (max(3, int(4096 ** (1.0 / n))) if n <= 4 else 0)
    if r:
        Z = _grid(lo, hi, r)
        vals = np.array([h(z) for z in Z])
        z0 = Z[int(np.argmax(vals))].copy()
        half = (hi - lo) / (r - 1)
        for _ in range(refine):
            Z = _grid(np.maximum(z0 - half, lo), np.minimum(z0 + half, hi), r)
            vals = np.array([h(z) for z in Z])
            z1 = Z[int(np.argmax(vals))]
            if h(z1) > h(z0):
                z0 = z1.copy()
            half = half * 2.0 / (r - 1)
    else:
        starts = [lo, hi, 0.5 * (lo + hi)]
        z0 = max(starts, key=h).copy()

    res = minimize(
        lambda z: -h(z), z0, jac=lambda z: -(mu - oracle.grad(z)),
        method="L-BFGS-B", bounds=list(zip(lo, hi)), options={"ftol": 1e-15, "gtol": 1e-12},
    )
    z1 = np.clip(res.x, lo, hi)
    if h(z1) > h(z0):
        z0 = z1
    low = h(z0)
    g = mu - oracle.grad(z0)
    up = low + float(np.sum(np.maximum(g * (lo - z0), g * (hi - z0))))
    status = "ok" if up - low <= max_width * max(1.0, abs(low)) else "wide"
    return ConjugateBracket(low, max(up, low), z0, status)
