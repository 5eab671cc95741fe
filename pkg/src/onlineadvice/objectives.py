"""Objective oracles for covering (convex) and packing (concave) programs.

Covering objectives expose ``value``, ``grad`` and, where it has a closed
form, ``conjugate``.  Each declares its growth exponent ``p`` (the supremum
of <x, grad f(x)> / f(x)); nothing here tries to infer it.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

__all__ = [
    "ObjectiveOracle",
    "LinearObjective",
    "PowerNormObjective",
    "LqSumObjective",
    "CallableObjective",
    "ConcaveOracle",
    "LinearConcave",
    "SeparableConcave",
    "Utility",
    "ValidationReport",
    "validate_objective",
    "validate_concave",
    "gradient_check",
]


class ObjectiveOracle:
    """Convex, monotone, differentiable f on the nonnegative orthant with f(0) = 0."""

    n: int
    p: float = 1.0
    monotone_gradient: bool = True
    homogeneous_degree: Optional[float] = None
    # True when grad f does not depend on x; the solver then integrates exactly.
    constant_gradient: bool = False

    def value(self, x: np.ndarray) -> float:
        raise NotImplementedError

    def grad(self, x: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def conjugate(self, mu: np.ndarray) -> Optional[float]:
        """sup_{z >= 0} mu.z - f(z), or None when no closed form is known."""
        return None

    def is_free(self, j: int) -> bool:
        """True when f does not depend on coordinate j at all."""
        return False

    def conjugate_of_scaled_gradient(self, scale: float, x: np.ndarray) -> Optional[float]:
        """f*(scale * grad f(x)) when it can be computed without a search.

        Uses f*(grad f(z)) = <z, grad f(z)> - f(z) together with positive
        homogeneity to move the scale inside the gradient.
        """
        if scale == 1.0:
            z = np.asarray(x, dtype=float)
        elif self.homogeneous_degree is not None and self.homogeneous_degree > 1:
            z = scale ** (1.0 / (self.homogeneous_degree - 1.0)) * np.asarray(x, dtype=float)
        else:
            mu = scale * self.grad(x)
            return self.conjugate(mu)
        g = self.grad(z)
        return float(z @ g - self.value(z))


def _as_vec(x, n: int) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.shape != (n,):
        raise ValueError(f"expected a vector of length {n}, got shape {x.shape}")
    return x


class LinearObjective(ObjectiveOracle):
    """f(x) = c.x with c >= 0."""

    constant_gradient = True

    def __init__(self, costs: Sequence[float]):
        self.c = np.asarray(costs, dtype=float)
        if self.c.ndim != 1 or np.any(self.c < 0):
            raise ValueError("linear costs must be a nonnegative vector")
        self.n = len(self.c)
        self.p = 1.0
        self.homogeneous_degree = 1.0

    def value(self, x):
        return float(self.c @ _as_vec(x, self.n))

    def grad(self, x):
        return self.c.copy()

    def conjugate(self, mu):
        mu = _as_vec(mu, self.n)
        # sup over z >= 0 of (mu - c).z
        return 0.0 if np.all(mu <= self.c * (1 + 1e-12) + 1e-15) else math.inf

    def is_free(self, j):
        return self.c[j] == 0.0

    def to_dict(self):
        return {"kind": "linear", "costs": self.c.tolist()}


class PowerNormObjective(ObjectiveOracle):
    """f(x) = ||Bx||_q^q for a nonnegative k-by-n matrix B and q >= 1.

    Homogeneous of degree q, so p = q, and the gradient is monotone.
    """

    def __init__(self, B, q: float):
        self.B = np.atleast_2d(np.asarray(B, dtype=float))
        if np.any(self.B < 0):
            raise ValueError("B must be nonnegative")
        if q < 1:
            raise ValueError("q must be >= 1")
        self.q = float(q)
        self.n = self.B.shape[1]
        self.p = self.q
        self.homogeneous_degree = self.q
        self.constant_gradient = self.q == 1.0
        self._free = ~np.any(self.B > 0, axis=0)

    def value(self, x):
        return float(np.sum((self.B @ _as_vec(x, self.n)) ** self.q))

    def grad(self, x):
        bx = self.B @ _as_vec(x, self.n)
        if self.q == 1.0:
            return self.B.sum(axis=0)
        return self.q * (self.B.T @ bx ** (self.q - 1.0))

    def conjugate(self, mu):
        mu = np.maximum(_as_vec(mu, self.n), 0.0)
        if self.q == 1.0:
            return LinearObjective(self.B.sum(axis=0)).conjugate(mu)
        # closed form only when every row of B touches a single column
        if np.all(np.count_nonzero(self.B, axis=1) <= 1):
            w = (self.B ** self.q).sum(axis=0)
            total = 0.0
            for j in range(self.n):
                if mu[j] == 0:
                    continue
                if w[j] == 0:
                    return math.inf
                z = (mu[j] / (self.q * w[j])) ** (1.0 / (self.q - 1.0))
                total += mu[j] * z - w[j] * z ** self.q
            return float(total)
        return None

    def is_free(self, j):
        return bool(self._free[j])

    def to_dict(self):
        return {"kind": "power_norm", "B": self.B.tolist(), "q": self.q}


class LqSumObjective(ObjectiveOracle):
    """f(x) = sum_e c_e ||x(S_e)||_{q_e} over pairwise disjoint index sets S_e.

    The gradient of an l_q norm (q > 1) is undefined at the origin of its
    group; coordinates of the group are floored at ``eps_grad`` before the
    gradient formula is applied.
    """

    monotone_gradient = False

    def __init__(self, groups: Sequence[tuple], n: int, eps_grad: float = 1e-12):
        self.n = int(n)
        self.eps_grad = float(eps_grad)
        self.groups = []
        seen = set()
        for S, c, q in groups:
            S = [int(j) for j in S]
            if c < 0 or q < 1:
                raise ValueError("each group needs c_e >= 0 and q_e >= 1")
            if not S or any(j < 0 or j >= self.n for j in S):
                raise ValueError(f"group index set {S} out of range")
            if seen.intersection(S):
                raise ValueError(
                    "index sets S_e must be pairwise disjoint; reduce overlapping "
                    "groups by duplicating shared variables first"
                )
            seen.update(S)
            self.groups.append((np.array(S, dtype=int), float(c), float(q)))
        self.p = 1.0
        self.homogeneous_degree = 1.0
        self.constant_gradient = all(q == 1.0 for _, _, q in self.groups)
        self._owner = np.full(self.n, -1, dtype=int)
        for e, (S, c, _) in enumerate(self.groups):
            if c > 0:
                self._owner[S] = e

    @property
    def max_group_size(self) -> int:
        return max((len(S) for S, _, _ in self.groups), default=0)

    def value(self, x):
        x = _as_vec(x, self.n)
        total = 0.0
        for S, c, q in self.groups:
            xs = x[S]
            total += c * (xs.sum() if q == 1.0 else float(np.sum(xs ** q) ** (1.0 / q)))
        return float(total)

    def grad(self, x):
        return lq_gradient(self, x, self.eps_grad)

    def conjugate(self, mu):
        mu = np.maximum(_as_vec(mu, self.n), 0.0)
        free = self._owner < 0
        if np.any(mu[free] > 0):
            return math.inf
        for S, c, q in self.groups:
            if dual_norm(mu[S], q) > c * (1 + 1e-12) + 1e-15:
                return math.inf
        return 0.0

    def is_free(self, j):
        return self._owner[j] < 0

    def to_dict(self):
        return {
            "kind": "lq_sum",
            "groups": [{"S": S.tolist(), "c": c, "q": q} for S, c, q in self.groups],
        }


def dual_norm(v: np.ndarray, q: float) -> float:
    """||v||_p with 1/p + 1/q = 1."""
    v = np.abs(np.asarray(v, dtype=float))
    if v.size == 0:
        return 0.0
    if q == 1.0:
        return float(v.max())
    p = q / (q - 1.0)
    return float(np.sum(v ** p) ** (1.0 / p))


def lq_gradient(obj: LqSumObjective, x, eps_grad: float = 1e-12) -> np.ndarray:
    """Gradient of sum_e c_e ||x(S_e)||_{q_e}.

    For j in S_e, grad_j = c_e x_j^{q_e-1} (sum_{k in S_e} x_k^{q_e})^{1/q_e - 1};
    with x_k floored at eps_grad inside the group when q_e > 1.  Coordinates
    outside every group get 0.
    """
    x = _as_vec(x, obj.n)
    g = np.zeros(obj.n)
    for S, c, q in obj.groups:
        if q == 1.0:
            g[S] = c
            continue
        xs = np.maximum(x[S], eps_grad)
        norm_q = np.sum(xs ** q)
        g[S] = c * xs ** (q - 1.0) * norm_q ** (1.0 / q - 1.0)
    return g


@dataclass
class CallableObjective(ObjectiveOracle):
    """User-supplied objective built from plain callables."""

    n: int
    f: Callable[[np.ndarray], float]
    df: Callable[[np.ndarray], np.ndarray]
    p: float = 1.0
    f_conj: Optional[Callable[[np.ndarray], float]] = None
    monotone_gradient: bool = True
    homogeneous_degree: Optional[float] = None
    constant_gradient: bool = False
    free: Sequence[int] = field(default_factory=tuple)

    def value(self, x):
        return float(self.f(_as_vec(x, self.n)))

    def grad(self, x):
        return np.asarray(self.df(_as_vec(x, self.n)), dtype=float)

    def conjugate(self, mu):
        return None if self.f_conj is None else float(self.f_conj(_as_vec(mu, self.n)))

    def is_free(self, j):
        return j in self.free


# --------------------------------------------------------------------------
# concave packing objectives


class ConcaveOracle:
    """Monotone concave g on the nonnegative orthant with g(0) = 0."""

    def value(self, y: np.ndarray) -> float:
        raise NotImplementedError

    def linear_costs(self) -> Optional[np.ndarray]:
        return None


class LinearConcave(ConcaveOracle):
    def __init__(self, costs: Sequence[float]):
        self.c = np.asarray(costs, dtype=float)
        if np.any(self.c < 0):
            raise ValueError("packing costs must be nonnegative")

    def value(self, y):
        y = np.asarray(y, dtype=float)
        return float(self.c[: len(y)] @ y)

    def linear_costs(self):
        return self.c

    def to_dict(self):
        return {"kind": "linear", "costs": self.c.tolist()}


@dataclass(frozen=True)
class Utility:
    """Scalar monotone concave utility with u(0) = 0.

    kind is one of ``linear`` (scale*y), ``sqrt`` (scale*sqrt(y)),
    ``log1p`` (scale*log(1+y)) or ``power`` (scale*y**exponent, exponent in (0, 1]).
    """

    kind: str = "linear"
    scale: float = 1.0
    exponent: float = 1.0

    def __post_init__(self):
        if self.kind not in ("linear", "sqrt", "log1p", "power"):
            raise ValueError(f"unknown utility kind {self.kind!r}")
        if self.scale < 0:
            raise ValueError("utility scale must be nonnegative")
        if self.kind == "power" and not 0 < self.exponent <= 1:
            raise ValueError("power utility needs exponent in (0, 1]")

    def __call__(self, y: float) -> float:
        y = max(float(y), 0.0)
        if self.kind == "linear":
            return self.scale * y
        if self.kind == "sqrt":
            return self.scale * math.sqrt(y)
        if self.kind == "log1p":
            return self.scale * math.log1p(y)
        return self.scale * y ** self.exponent

    def derivative_at_zero(self) -> float:
        if self.kind == "linear" or (self.kind == "power" and self.exponent == 1):
            return self.scale
        if self.kind == "log1p":
            return self.scale
        return math.inf

    def to_dict(self):
        return {"kind": self.kind, "scale": self.scale, "exponent": self.exponent}


class SeparableConcave(ConcaveOracle):
    """g(y) = sum_i u_i(y_i) with one scalar utility per packing variable."""

    def __init__(self, utilities: Sequence[Callable[[float], float]]):
        self.utilities = list(utilities)

    def value(self, y):
        y = np.asarray(y, dtype=float)
        return float(sum(u(v) for u, v in zip(self.utilities, y)))

    def linear_costs(self):
        if all(isinstance(u, Utility) and u.kind == "linear" for u in self.utilities):
            return np.array([u.scale for u in self.utilities])
        return None

    def to_dict(self):
        if not all(isinstance(u, Utility) for u in self.utilities):
            raise ValueError("custom utilities cannot be serialized")
        return {"kind": "separable_concave", "utilities": [u.to_dict() for u in self.utilities]}


# --------------------------------------------------------------------------
# property checks


@dataclass
class ValidationReport:
    violations: list = field(default_factory=list)
    checked: int = 0

    @property
    def ok(self) -> bool:
        return not self.violations

    def add(self, kind: str, point, detail: str):
        self.violations.append({"check": kind, "point": np.asarray(point).tolist(), "detail": detail})


def _close_le(a: float, b: float, rtol: float = 1e-9, atol: float = 1e-12) -> bool:
    return a <= b + rtol * max(abs(a), abs(b)) + atol


def validate_objective(oracle: ObjectiveOracle, samples, rtol: float = 1e-9) -> ValidationReport:
    """Spot-check the declared properties of a covering objective on sample points.

    Checks f(0) = 0, monotonicity along each coordinate, <x, grad f(x)> <= p f(x),
    f(delta x) <= delta^p f(x) for delta in {1, 2, 4}, and coordinatewise
    monotonicity of the gradient when the oracle declares it.
    """
    samples = np.atleast_2d(np.asarray(samples, dtype=float))
    if samples.shape[1] != oracle.n:
        raise ValueError(f"samples have dimension {samples.shape[1]}, oracle expects {oracle.n}")
    if np.any(samples < 0):
        raise ValueError("samples must be nonnegative")
    report = ValidationReport()
    zero = np.zeros(oracle.n)
    f0 = oracle.value(zero)
    if abs(f0) > 1e-12:
        report.add("f(0)=0", zero, f"f(0) = {f0}")
    p = oracle.p
    for x in samples:
        report.checked += 1
        fx = oracle.value(x)
        gx = oracle.grad(x)
        for j in range(oracle.n):
            step = 0.1 * (1.0 + x[j])
            xp = x.copy()
            xp[j] += step
            if not _close_le(fx, oracle.value(xp), rtol):
                report.add("monotone", x, f"f decreases along coordinate {j}")
            if oracle.monotone_gradient:
                gp = oracle.grad(xp)
                if np.any(gp < gx - rtol * np.maximum(np.abs(gx), 1.0)):
                    report.add("monotone_gradient", x, f"gradient decreases along coordinate {j}")
        xg = float(x @ gx)
        if not _close_le(xg, p * fx, rtol):
            report.add("growth_exponent", x, f"<x, grad f> = {xg:.6g} > p f(x) = {p * fx:.6g}")
        for delta in (1.0, 2.0, 4.0):
            lhs = oracle.value(delta * x)
            if not _close_le(lhs, delta ** p * fx, rtol):
                report.add("bounded_growth", x, f"f({delta} x) = {lhs:.6g} > {delta}^p f(x)")
    return report


def validate_concave(oracle: ConcaveOracle, samples, rtol: float = 1e-9) -> ValidationReport:
    """Spot-check g(0) = 0, monotonicity and g(t y) >= t g(y) for t in [0, 1]."""
    samples = np.atleast_2d(np.asarray(samples, dtype=float))
    report = ValidationReport()
    m = samples.shape[1]
    g0 = oracle.value(np.zeros(m))
    if abs(g0) > 1e-12:
        report.add("g(0)=0", np.zeros(m), f"g(0) = {g0}")
    for y in samples:
        report.checked += 1
        gy = oracle.value(y)
        for t in (0.25, 0.5, 0.75):
            if not _close_le(t * gy, oracle.value(t * y), rtol):
                report.add("concave_through_origin", y, f"g({t} y) < {t} g(y)")
        for i in range(m):
            yp = y.copy()
            yp[i] += 0.1 * (1.0 + y[i])
            if not _close_le(gy, oracle.value(yp), rtol):
                report.add("monotone", y, f"g decreases along coordinate {i}")
    return report


def gradient_check(oracle: ObjectiveOracle, x, h: float = 1e-6) -> float:
    """Max abs difference between grad f(x) and finite differences.

    Central differences, forward differences where x_j < h.
    """
    x = _as_vec(x, oracle.n)
    if np.any(x < 0) or h <= 0:
        raise ValueError("need x >= 0 and h > 0")
    g = oracle.grad(x)
    fx = oracle.value(x)
    err = 0.0
    for j in range(oracle.n):
        xp = x.copy()
        xp[j] += h
        if x[j] < h:
            fd = (oracle.value(xp) - fx) / h
        else:
            xm = x.copy()
            xm[j] -= h
            fd = (oracle.value(xp) - oracle.value(xm)) / (2 * h)
        err = max(err, abs(g[j] - fd))
    return err
