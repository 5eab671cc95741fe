"""Domain types shared by the online solvers, plus the instance file format.

Indices are 0-based everywhere: rounds, covering variables and packing
constraints.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Optional, Sequence

import numpy as np

from .objectives import (
    ConcaveOracle,
    LinearConcave,
    LinearObjective,
    LqSumObjective,
    ObjectiveOracle,
    PowerNormObjective,
    SeparableConcave,
    Utility,
)

__all__ = [
    "SparseRow",
    "CoveringInstance",
    "PackingInstance",
    "AdviceProfile",
    "Step",
    "Jump",
    "RoundTrace",
    "SolverTrace",
    "RunMetrics",
    "Certificate",
    "load_instance",
    "dump_instance",
    "instance_to_dict",
    "instance_from_dict",
]


@dataclass(frozen=True)
class SparseRow:
    """One arriving row: strictly positive coefficients on distinct columns."""

    index: int
    cols: np.ndarray
    coefs: np.ndarray

    def __post_init__(self):
        cols = np.asarray(self.cols, dtype=int)
        coefs = np.asarray(self.coefs, dtype=float)
        if cols.ndim != 1 or cols.shape != coefs.shape or cols.size == 0:
            raise ValueError("a row needs at least one (column, coefficient) entry")
        if np.any(coefs <= 0) or not np.all(np.isfinite(coefs)):
            raise ValueError(f"row {self.index}: coefficients must be finite and > 0")
        if len(set(cols.tolist())) != cols.size:
            raise ValueError(f"row {self.index}: duplicate column indices")
        if np.any(cols < 0):
            raise ValueError(f"row {self.index}: negative column index")
        cols.setflags(write=False)
        coefs.setflags(write=False)
        object.__setattr__(self, "cols", cols)
        object.__setattr__(self, "coefs", coefs)

    @classmethod
    def from_pairs(cls, index: int, pairs) -> "SparseRow":
        pairs = list(pairs)
        return cls(index, [j for j, _ in pairs], [a for _, a in pairs])

    @classmethod
    def from_dense(cls, index: int, dense) -> "SparseRow":
        dense = np.asarray(dense, dtype=float)
        nz = np.flatnonzero(dense)
        return cls(index, nz, dense[nz])

    @property
    def sparsity(self) -> int:
        return int(self.cols.size)

    def dot(self, x: np.ndarray) -> float:
        return float(self.coefs @ x[self.cols])

    def dense(self, n: int) -> np.ndarray:
        out = np.zeros(n)
        out[self.cols] = self.coefs
        return out

    def pairs(self):
        return [{"j": int(j), "a": float(a)} for j, a in zip(self.cols, self.coefs)]


def _check_columns(rows: Sequence[SparseRow], n: int):
    for row in rows:
        if row.cols.size and row.cols.max() >= n:
            raise ValueError(f"row {row.index} references column {row.cols.max()} >= n = {n}")


@dataclass
class CoveringInstance:
    """min f(x) subject to A x >= 1, x >= 0, rows of A revealed one at a time."""

    n: int
    rows: list
    objective: ObjectiveOracle
    d_bound: Optional[int] = None

    def __post_init__(self):
        self.rows = list(self.rows)
        if self.objective.n != self.n:
            raise ValueError("objective dimension does not match n")
        _check_columns(self.rows, self.n)
        if self.d_bound is not None:
            for row in self.rows:
                if row.sparsity > self.d_bound:
                    raise ValueError(f"row {row.index} has {row.sparsity} nonzeros > d_bound")

    @property
    def m(self) -> int:
        return len(self.rows)

    def matrix(self) -> np.ndarray:
        A = np.zeros((self.m, self.n))
        for i, row in enumerate(self.rows):
            A[i, row.cols] = row.coefs
        return A

    @property
    def row_sparsity(self) -> int:
        return max((r.sparsity for r in self.rows), default=1)

    def coef_range(self):
        vals = np.concatenate([r.coefs for r in self.rows]) if self.rows else np.ones(1)
        return float(vals.min()), float(vals.max())

    def violation(self, x) -> float:
        """max_i (1 - A_i x)_+."""
        x = np.asarray(x, dtype=float)
        return max((max(0.0, 1.0 - r.dot(x)) for r in self.rows), default=0.0)


@dataclass
class PackingInstance:
    """max g(y) subject to A^T y <= b, y >= 0; variable y_i arrives with row i.

    Row i lists the coefficients a_ij of y_i in the n packing constraints.
    """

    n: int
    b: np.ndarray
    rows: list
    objective: ConcaveOracle
    labels: Optional[list] = None

    def __post_init__(self):
        self.rows = list(self.rows)
        self.b = np.asarray(self.b, dtype=float)
        if self.b.shape != (self.n,):
            raise ValueError("capacity vector b must have length n")
        if np.any(self.b < 0):
            raise ValueError("capacities must be nonnegative")
        _check_columns(self.rows, self.n)

    @property
    def m(self) -> int:
        return len(self.rows)

    def matrix(self) -> np.ndarray:
        """The m-by-n matrix A (row i = variable i)."""
        A = np.zeros((self.m, self.n))
        for i, row in enumerate(self.rows):
            A[i, row.cols] = row.coefs
        return A

    def load(self, y) -> np.ndarray:
        y = np.asarray(y, dtype=float)
        out = np.zeros(self.n)
        for row, v in zip(self.rows, y):
            out[row.cols] += row.coefs * v
        return out

    def violation(self, y) -> float:
        """max_j (A^T y)_j / b_j, the multiplicative feasibility factor."""
        load = self.load(y)
        worst = 0.0
        for j in range(self.n):
            if self.b[j] > 0:
                worst = max(worst, load[j] / self.b[j])
            elif load[j] > 0:
                worst = math.inf
        return worst


@dataclass(frozen=True)
class AdviceProfile:
    vector: np.ndarray
    lam: float

    def __post_init__(self):
        v = np.asarray(self.vector, dtype=float)
        if v.ndim != 1 or np.any(v < 0) or not np.all(np.isfinite(v)):
            raise ValueError("advice entries must be finite and >= 0")
        if not 0.0 <= self.lam <= 1.0:
            raise ValueError(f"confidence lambda must lie in [0, 1], got {self.lam}")
        v.setflags(write=False)
        object.__setattr__(self, "vector", v)
        object.__setattr__(self, "lam", float(self.lam))


@dataclass
class Step:
    """One explicit integration step of a covering round."""

    dtau: float
    x_before: np.ndarray
    rate_c: float  # growth of f credited to coordinates still below the advice
    rate_u: float  # growth of f from coordinates at or past the advice
    advice_feasible: bool

    @property
    def growth(self) -> float:
        return self.rate_c + self.rate_u


@dataclass
class Jump:
    """Instant raise of zero-cost (free) coordinates."""

    cols: np.ndarray
    x_before: np.ndarray
    amount: np.ndarray


@dataclass
class RoundTrace:
    row: SparseRow
    d: int
    advice_feasible: bool
    steps: list = field(default_factory=list)
    jumps: list = field(default_factory=list)
    x_after: Optional[np.ndarray] = None

    @property
    def duration(self) -> float:
        return float(sum(s.dtau for s in self.steps))


@dataclass
class SolverTrace:
    rounds: list = field(default_factory=list)
    x_final: Optional[np.ndarray] = None

    @property
    def n_steps(self) -> int:
        return sum(len(r.steps) for r in self.rounds)

    def snapshots(self):
        """All recorded x values in time order, ending with the final x."""
        for r in self.rounds:
            for s in r.steps:
                yield s.x_before
            for jmp in r.jumps:
                yield jmp.x_before
        if self.x_final is not None:
            yield self.x_final

    def to_dict(self) -> dict:
        return {
            "rounds": [
                {
                    "row": r.row.pairs(),
                    "d": r.d,
                    "advice_feasible": r.advice_feasible,
                    "duration": r.duration,
                    "steps": [
                        {
                            "dtau": s.dtau,
                            "x_before": s.x_before.tolist(),
                            "rate_c": s.rate_c,
                            "rate_u": s.rate_u,
                        }
                        for s in r.steps
                    ],
                    "jumps": [
                        {"cols": j.cols.tolist(), "amount": j.amount.tolist()} for j in r.jumps
                    ],
                }
                for r in self.rounds
            ],
            "x_final": None if self.x_final is None else self.x_final.tolist(),
        }


@dataclass
class RunMetrics:
    primal_objective: float = math.nan
    advice_objective: float = math.nan
    opt_estimate: float = math.nan
    dual_objective: float = math.nan
    consistency_ratio: float = math.nan
    robustness_ratio: float = math.nan
    max_constraint_violation: float = math.nan
    rounds: int = 0
    steps: int = 0
    wall_time: float = 0.0

    def as_dict(self):
        return dict(self.__dict__)


@dataclass
class Certificate:
    """Outcome of one checked inequality ``value <= bound``.

    ``ok`` is None when the inequality does not apply to the run (for
    example the consistency bound when some round saw infeasible advice).
    """

    name: str
    ok: Optional[bool]
    value: float = math.nan
    bound: float = math.nan
    detail: str = ""

    def __bool__(self):
        return self.ok is not False


# --------------------------------------------------------------------------
# instance files


def _objective_from_dict(spec: dict, n: int):
    kind = spec.get("kind")
    if kind == "linear":
        return LinearObjective(spec["costs"])
    if kind == "power_norm":
        return PowerNormObjective(spec["B"], spec["q"])
    if kind == "lq_sum":
        groups = [(g["S"], g["c"], g["q"]) for g in spec["groups"]]
        return LqSumObjective(groups, n)
    if kind == "custom":
        raise ValueError("custom objectives cannot be stored in instance files")
    raise ValueError(f"unknown objective kind {kind!r}")


def _concave_from_dict(spec: dict):
    kind = spec.get("kind")
    if kind == "linear":
        return LinearConcave(spec["costs"])
    if kind == "separable_concave":
        return SeparableConcave([Utility(**u) for u in spec["utilities"]])
    if kind == "custom":
        raise ValueError("custom objectives cannot be stored in instance files")
    raise ValueError(f"unknown packing objective kind {kind!r}")


def instance_from_dict(doc: dict):
    """Build (instance, advice or None) from a parsed instance document."""
    kind = doc["kind"]
    n = int(doc["n"])
    rows = [
        SparseRow.from_pairs(i, [(e["j"], e["a"]) for e in entries])
        for i, entries in enumerate(doc.get("rows", []))
    ]
    if kind in ("covering", "lq_covering"):
        obj = _objective_from_dict(doc["objective"], n)
        if kind == "lq_covering" and not isinstance(obj, LqSumObjective):
            raise ValueError("lq_covering instances need an lq_sum objective")
        inst = CoveringInstance(n, rows, obj, d_bound=doc.get("d_bound"))
    elif kind == "packing":
        inst = PackingInstance(n, doc["b"], rows, _concave_from_dict(doc["objective"]), labels=doc.get("labels"))
    else:
        raise ValueError(f"unknown instance kind {kind!r}")
    advice = None
    if doc.get("advice") is not None:
        advice = AdviceProfile(np.asarray(doc["advice"], dtype=float), doc.get("lambda", 0.5))
    return inst, advice


def instance_to_dict(inst, advice: Optional[AdviceProfile] = None) -> dict:
    if isinstance(inst, CoveringInstance):
        kind = "lq_covering" if isinstance(inst.objective, LqSumObjective) else "covering"
        doc: dict[str, Any] = {"kind": kind, "n": inst.n}
        if inst.d_bound is not None:
            doc["d_bound"] = inst.d_bound
    else:
        doc = {"kind": "packing", "n": inst.n, "b": inst.b.tolist()}
    to_dict = getattr(inst.objective, "to_dict", None)
    if to_dict is None:
        raise ValueError("custom objectives cannot be stored in instance files")
    doc["objective"] = to_dict()
    doc["rows"] = [r.pairs() for r in inst.rows]
    if getattr(inst, "labels", None) is not None:
        doc["labels"] = list(inst.labels)
    if advice is not None:
        doc["advice"] = advice.vector.tolist()
        doc["lambda"] = advice.lam
    return doc


def load_instance(path):
    return instance_from_dict(json.loads(Path(path).read_text()))


def dump_instance(path, inst, advice: Optional[AdviceProfile] = None):
    Path(path).write_text(json.dumps(instance_to_dict(inst, advice), indent=2) + "\n")
