"""Graded Köthe spaces held as log-weight matrices, and their seminorms."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Any

import mpmath
import numpy as np
from scipy.special import logsumexp

from .errors import GradeOutOfRange, IndexOutOfRange, InvalidDescriptor
from .sequences import ExponentSequence, sequence_from_json

FINITE = "finite"
INFINITE = "infinite"
KOTHE = "kothe"


@dataclass(frozen=True, eq=False)
class GradedSpace:
    """A Köthe matrix in log form: ``log_weight(j, k) = log a_{j,k}``.

    Power series spaces of finite type use ``-alpha_j / k``, infinite type
    ``k * alpha_j``.  General matrices come from an explicit table.
    """

    kind: str
    seq: ExponentSequence | None = None
    table: np.ndarray | None = field(default=None, repr=False)
    label: str = ""

    def __post_init__(self):
        if self.kind in (FINITE, INFINITE):
            if self.seq is None:
                raise InvalidDescriptor("power series spaces need an exponent sequence")
        elif self.kind == KOTHE:
            t = np.asarray(self.table, dtype=np.float64)
            if t.ndim != 2 or t.shape[0] < 1 or t.shape[1] < 1:
                raise InvalidDescriptor("log_weights must be a non-empty matrix")
            if np.any(np.isnan(t)):
                raise InvalidDescriptor("log_weights contain NaN")
            with np.errstate(invalid="ignore"):
                bad = np.diff(t, axis=1) < 0
            if np.any(bad):
                j, k = np.argwhere(bad)[0]
                raise InvalidDescriptor(f"weights decrease in grade at row {j + 1}, grade {k + 1}")
            t.setflags(write=False)
            object.__setattr__(self, "table", t)
        else:
            raise InvalidDescriptor(f"unknown space kind {self.kind!r}")
        if not self.label:
            object.__setattr__(self, "label", self.default_label())

    # --- constructors ---------------------------------------------------
    @classmethod
    def finite(cls, seq: ExponentSequence) -> "GradedSpace":
        return cls(FINITE, seq)

    @classmethod
    def infinite(cls, seq: ExponentSequence) -> "GradedSpace":
        return cls(INFINITE, seq)

    @classmethod
    def kothe(cls, log_weights, label: str = "") -> "GradedSpace":
        return cls(KOTHE, table=np.asarray(log_weights, dtype=np.float64), label=label)

    def default_label(self):
        if self.kind == FINITE:
            return f"L0:{self.seq.to_dsl()}"
        if self.kind == INFINITE:
            return f"Linf:{self.seq.to_dsl()}"
        return f"kothe[{self.table.shape[0]}x{self.table.shape[1]}]"

    # --- shape ----------------------------------------------------------
    @property
    def is_power_series(self) -> bool:
        return self.kind in (FINITE, INFINITE)

    @property
    def rows(self) -> int | None:
        if self.kind == KOTHE:
            return self.table.shape[0]
        return self.seq.length

    @property
    def grades(self) -> int | None:
        return self.table.shape[1] if self.kind == KOTHE else None

    def check_grade(self, k):
        if k < 1:
            raise GradeOutOfRange(f"grades start at 1, got {k}")
        if self.grades is not None and k > self.grades:
            raise GradeOutOfRange(f"grade {k} exceeds the {self.grades} grades of {self.label}")

    def check_index(self, js):
        js = np.asarray(js, dtype=np.int64)
        if js.size and js.min() < 1:
            raise IndexOutOfRange("indices start at 1")
        if self.rows is not None and js.size and js.max() > self.rows:
            raise IndexOutOfRange(f"index {int(js.max())} beyond the {self.rows} rows of {self.label}")
        return js

    # --- weights --------------------------------------------------------
    def log_weights(self, js, k: float) -> np.ndarray:
        """Vectorized ``log a_{j,k}``; may contain ``inf`` when alpha_j overflows."""
        js = self.check_index(js)
        if self.kind == KOTHE:
            self.check_grade(k)
            return self.table[js - 1, int(k) - 1]
        if k <= 0:
            raise GradeOutOfRange(f"grades must be positive, got {k}")
        vals = self.seq.values_at(js)
        with np.errstate(over="ignore"):
            return -vals / k if self.kind == FINITE else k * vals

    def log_weight(self, j: int, k: float) -> float:
        return float(self.log_weights([j], k)[0])

    def log_weight_exact(self, j: int, k: float) -> mpmath.mpf:
        if self.kind == KOTHE:
            return mpmath.mpf(self.log_weight(j, k))
        self.check_index([j])
        a = self.seq.exact(j)
        return -a / k if self.kind == FINITE else k * a

    # --- serialization --------------------------------------------------
    def to_json(self) -> dict[str, Any]:
        if self.kind == KOTHE:
            rows, grades = self.table.shape
            return {"kind": KOTHE, "rows": rows, "grades": grades,
                    "log_weights": self.table.tolist(), "label": self.label}
        return {"kind": self.kind, "sequence": self.seq.to_json(), "label": self.label}

    @classmethod
    def from_json(cls, data) -> "GradedSpace":
        if isinstance(data, str):
            from .cli import parse_space_spec
            return parse_space_spec(data)
        kind = data.get("kind", KOTHE if "log_weights" in data else None)
        if kind == KOTHE:
            return kothe_from_json(data)
        return cls(kind, sequence_from_json(data["sequence"]), label=data.get("label", ""))

    def __eq__(self, other):
        return isinstance(other, GradedSpace) and self.to_json() == other.to_json()

    def __hash__(self):
        return hash(json.dumps(self.to_json(), sort_keys=True))


def kothe_from_json(data: dict[str, Any]) -> GradedSpace:
    """Load ``{rows: J, grades: K, log_weights: [[...]]}``."""
    try:
        weights = np.asarray(data["log_weights"], dtype=np.float64)
    except (KeyError, ValueError, TypeError) as exc:
        raise InvalidDescriptor(f"bad Köthe matrix: {exc}") from exc
    rows, grades = data.get("rows", weights.shape[0]), data.get("grades", weights.shape[-1])
    if weights.shape != (rows, grades):
        raise InvalidDescriptor(f"log_weights shape {weights.shape} != ({rows}, {grades})")
    return GradedSpace.kothe(weights, label=data.get("label", ""))


@dataclass(frozen=True)
class FiniteVector:
    support: tuple[tuple[int, float], ...]

    def __post_init__(self):
        support = tuple((int(i), float(c)) for i, c in self.support)
        idx = [i for i, _ in support]
        if any(i < 1 for i in idx):
            raise IndexOutOfRange("vector indices start at 1")
        if any(b <= a for a, b in zip(idx, idx[1:])):
            raise InvalidDescriptor("vector indices must be strictly increasing")
        if any(c == 0 or not math.isfinite(c) for _, c in support):
            raise InvalidDescriptor("vector coefficients must be finite and nonzero")
        object.__setattr__(self, "support", support)

    @classmethod
    def basis(cls, n: int) -> "FiniteVector":
        return cls(((n, 1.0),))

    @classmethod
    def from_dict(cls, coeffs: dict[int, float]) -> "FiniteVector":
        return cls(tuple(sorted((i, c) for i, c in coeffs.items() if c != 0)))

    @property
    def indices(self) -> np.ndarray:
        return np.array([i for i, _ in self.support], dtype=np.int64)

    @property
    def coefficients(self) -> np.ndarray:
        return np.array([c for _, c in self.support])


def log_basis_norm(space: GradedSpace, n: int, k: float) -> float:
    """``log ||e_n||_k``, the same for every p."""
    if n < 1 or k < 1:
        raise IndexOutOfRange("n and k must be at least 1")
    value = space.log_weight(n, k)
    if math.isinf(value):
        return space.log_weight_exact(n, k)
    return value


def log_lp(terms, p) -> float:
    """log of the l^p norm of ``exp(terms)``."""
    terms = np.asarray(terms, dtype=np.float64)
    if terms.size == 0:
        return -math.inf
    if p == math.inf:
        return float(np.max(terms))
    return float(logsumexp(p * terms) / p)


def log_lp_exact(terms, p) -> mpmath.mpf:
    if p == math.inf:
        return max(terms)
    m = max(terms)
    return m + mpmath.log(mpmath.fsum(mpmath.exp(p * (t - m)) for t in terms)) / p


def vector_norm(space: GradedSpace, x: FiniteVector, k: float, p: float = 1) -> float:
    """``log ||x||_k`` for the weighted l^p norm, computed in log domain."""
    if p not in (1, 2, math.inf):
        raise ValueError("p must be 1, 2 or inf")
    if not x.support:
        return -math.inf
    logc = np.log(np.abs(x.coefficients))
    w = space.log_weights(x.indices, k)
    if np.all(np.isfinite(w)):
        return log_lp(logc + w, p)
    terms = [mpmath.mpf(c) + space.log_weight_exact(int(j), k) for c, j in zip(logc, x.indices)]
    return log_lp_exact(terms, p)
