"""Quasi-diagonal operators ``T e_i = t_i e_{sigma(i)}`` between graded spaces."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Any

import mpmath
import numpy as np

from .errors import EmptyOperator, InvalidDescriptor
from .intmaps import MonotoneIntMap
from .sequences import MergedSequence, merge
from .spaces import FINITE, INFINITE, FiniteVector, GradedSpace

DIVERGED = "Diverged"


@dataclass(frozen=True, eq=False)
class QuasiDiagonalOperator:
    source: np.ndarray
    target: np.ndarray
    log_scalar: np.ndarray
    domain: GradedSpace
    codomain: GradedSpace

    def __post_init__(self):
        src = np.asarray(self.source, dtype=np.int64).reshape(-1)
        tgt = np.asarray(self.target, dtype=np.int64).reshape(-1)
        logt = np.asarray(self.log_scalar, dtype=np.float64).reshape(-1)
        if not (len(src) == len(tgt) == len(logt)):
            raise InvalidDescriptor("entry columns differ in length")
        if len(src) and (src.min() < 1 or tgt.min() < 1):
            raise InvalidDescriptor("operator indices start at 1")
        if np.any(np.diff(src) <= 0):
            raise InvalidDescriptor("source indices must be strictly increasing")
        if len(np.unique(tgt)) != len(tgt):
            raise InvalidDescriptor("target indices must be pairwise distinct (sigma injective)")
        if not np.all(np.isfinite(logt)):
            raise InvalidDescriptor("log scalars must be finite")
        self.domain.check_index(src)
        self.codomain.check_index(tgt)
        for name, arr in (("source", src), ("target", tgt), ("log_scalar", logt)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @classmethod
    def from_entries(cls, entries, domain, codomain) -> "QuasiDiagonalOperator":
        entries = sorted((int(i), int(m), float(t)) for i, m, t in entries)
        cols = list(zip(*entries)) if entries else ([], [], [])
        return cls(np.array(cols[0], dtype=np.int64), np.array(cols[1], dtype=np.int64),
                   np.array(cols[2], dtype=np.float64), domain, codomain)

    @classmethod
    def identity(cls, space: GradedSpace, depth: int, log_scale: float = 0.0):
        idx = np.arange(1, depth + 1)
        return cls(idx, idx, np.full(depth, float(log_scale)), space, space)

    @property
    def entries(self):
        return [(int(i), int(m), float(t)) for i, m, t in
                zip(self.source, self.target, self.log_scalar)]

    def __len__(self):
        return len(self.source)

    def restrict(self, depth: int) -> "QuasiDiagonalOperator":
        keep = self.source <= depth
        return QuasiDiagonalOperator(self.source[keep], self.target[keep], self.log_scalar[keep],
                                     self.domain, self.codomain)

    def scaled(self, log_c: float) -> "QuasiDiagonalOperator":
        return QuasiDiagonalOperator(self.source, self.target, self.log_scalar + log_c,
                                     self.domain, self.codomain)

    def apply(self, x: FiniteVector) -> FiniteVector:
        pos = {int(i): n for n, i in enumerate(self.source)}
        out = {}
        for i, c in x.support:
            n = pos.get(i)
            if n is not None:
                out[int(self.target[n])] = c * math.exp(self.log_scalar[n])
        return FiniteVector.from_dict(out)

    def to_json(self) -> dict[str, Any]:
        return {"domain": self.domain.to_json(), "codomain": self.codomain.to_json(),
                "entries": [[i, m, t] for i, m, t in self.entries]}

    @classmethod
    def from_json(cls, data) -> "QuasiDiagonalOperator":
        return cls.from_entries(data["entries"], GradedSpace.from_json(data["domain"]),
                                GradedSpace.from_json(data["codomain"]))


# ---------------------------------------------------------------------------
# norms


def entry_log_ratios(T: QuasiDiagonalOperator, k: float, r: float, depth: int | None = None):
    """Per-entry ``log ||T e_i||_k - log ||e_i||_r`` for sources ``i <= depth``.

    Returns a float array, or an object array in which the entries whose
    weights leave the float range are :class:`mpmath.mpf`.
    """
    keep = slice(None) if depth is None else T.source <= depth
    src, tgt, logt = T.source[keep], T.target[keep], T.log_scalar[keep]
    wb = T.codomain.log_weights(tgt, k)
    wa = T.domain.log_weights(src, r)
    with np.errstate(invalid="ignore"):
        fast = logt + wb - wa
    bad = ~(np.isfinite(wb) & np.isfinite(wa))
    if not bad.any():
        return fast
    # exact arithmetic only where a weight overflowed
    out = fast.astype(object)
    for n in np.flatnonzero(bad):
        out[n] = (mpmath.mpf(logt[n]) + T.codomain.log_weight_exact(int(tgt[n]), k)
                  - T.domain.log_weight_exact(int(src[n]), r))
    return out


def _as_real(v):
    if isinstance(v, mpmath.mpf):
        f = float(v)
        return f if math.isfinite(f) else v
    return float(v)


def qd_norm(T: QuasiDiagonalOperator, k: float, r: float, depth: int | None = None):
    """``log ||T||_{k,r}`` restricted to sources ``<= depth``.

    For a quasi-diagonal operator on weighted spaces the operator norm is the
    largest single-entry ratio, for every p.
    """
    vals = entry_log_ratios(T, k, r, depth)
    if len(vals) == 0:
        raise EmptyOperator(f"no entries with source index <= {depth}")
    return _as_real(max(vals))


@dataclass(frozen=True)
class NormReport:
    value: Any
    argmax: int
    diverging: bool
    evidence: dict

    def to_dict(self):
        return {"value": self.value, "argmax": self.argmax, "diverging": self.diverging,
                "evidence": self.evidence}


def qd_norm_report(T: QuasiDiagonalOperator, k: float, r: float, depth: int | None = None,
                   growth_window: int | None = None) -> NormReport:
    """``qd_norm`` plus the source index attaining it and the tail-growth flag."""
    vals = list(entry_log_ratios(T, k, r, depth))
    if not vals:
        raise EmptyOperator(f"no entries with source index <= {depth}")
    src = T.source if depth is None else T.source[T.source <= depth]
    best = max(range(len(vals)), key=lambda n: vals[n])
    ok, evidence = tail_bounded(vals, growth_window)
    return NormReport(_as_real(vals[best]), int(src[best]), not ok, evidence)


def tail_bounded(values, growth_window: int | None = None) -> tuple[bool, dict]:
    """Finite-truncation surrogate for ``sup < inf``.

    The tail (last ``growth_window`` entries, default a quarter) must not push
    the running maximum above what the head already reached.
    """
    n = len(values)
    if n < 2:
        return True, {"entries": n}
    w = growth_window or max(1, n // 4)
    w = min(w, n - 1)
    head, tail = values[:-w], values[-w:]
    hmax, tmax = max(head), max(tail)
    tol = 1e-9 * (1 + abs(float(hmax))) if not isinstance(hmax, mpmath.mpf) else \
        mpmath.mpf("1e-9") * (1 + abs(hmax))
    ok = bool(tmax <= hmax + tol)
    return ok, {"entries": n, "window": w, "head_max": _as_real(hmax), "tail_max": _as_real(tmax)}


@dataclass(frozen=True)
class GradeProfile:
    k: int
    pi: int | str
    norm_curve: tuple[tuple[int, Any], ...]

    def to_dict(self):
        return {"k": self.k, "pi": self.pi, "norm_curve": [[r, v] for r, v in self.norm_curve]}


@dataclass(frozen=True)
class ContinuityProfile:
    grades: tuple[GradeProfile, ...]
    depth: int
    r_max: int
    surrogate: str

    def pi(self, k: int):
        return self.grades[k - 1].pi

    def to_dict(self):
        return {"grades": [g.to_dict() for g in self.grades], "depth": self.depth,
                "r_max": self.r_max, "surrogate": self.surrogate}

    def csv_rows(self):
        rows = [("k", "r", "log_norm")]
        for g in self.grades:
            rows += [(g.k, r, v) for r, v in g.norm_curve]
        return rows


def continuity_characteristic(T: QuasiDiagonalOperator, k_max: int, r_max: int,
                              depth: int | None = None,
                              growth_window: int | None = None) -> ContinuityProfile:
    """Estimate ``pi_T(k)`` for ``k <= k_max`` by searching ``r <= r_max``."""
    if k_max > r_max:
        raise InvalidDescriptor("k_max must not exceed r_max")
    depth = depth if depth is not None else (int(T.source.max()) if len(T) else 1)
    T = T.restrict(depth)
    grades = []
    floor = 1
    for k in range(1, k_max + 1):
        curve, pi = [], DIVERGED
        for r in range(1, r_max + 1):
            vals = entry_log_ratios(T, k, r)
            if len(vals) == 0:
                curve.append((r, -math.inf))
                if pi == DIVERGED and r >= floor:
                    pi = r
                continue
            curve.append((r, _as_real(max(vals))))
            if pi == DIVERGED and r >= floor and tail_bounded(list(vals), growth_window)[0]:
                pi = r
        if pi != DIVERGED:
            floor = pi
        grades.append(GradeProfile(k, pi, tuple(curve)))
    surrogate = (f"tail of {growth_window or 'a quarter of the'} entries must not raise the "
                 "running max; pi_k searched from pi_(k-1) upward")
    return ContinuityProfile(tuple(grades), depth, r_max, surrogate)


@dataclass(frozen=True)
class STameResult:
    holds: bool
    k0: int | None
    failures: tuple[tuple[int, dict], ...]
    profile: ContinuityProfile

    def to_dict(self):
        return {"holds": self.holds, "k0": self.k0,
                "failures": [{"k": k, **stat} for k, stat in self.failures],
                "profile": self.profile.to_dict()}


def is_S_tame(T: QuasiDiagonalOperator, S: MonotoneIntMap, k_max: int, depth: int | None = None,
              r_max: int | None = None, growth_window: int | None = None) -> STameResult:
    """Check ``pi_T(k) <= S(k)`` on a tail of ``1..k_max``."""
    r_max = r_max or max(S(k_max + 1) if S.size is None or S.size > k_max else S(k_max), k_max) + 1
    prof = continuity_characteristic(T, k_max, r_max, depth, growth_window)
    failures = []
    for g in prof.grades:
        s = S(g.k)
        if g.pi == DIVERGED or g.pi > s:
            vals = entry_log_ratios(T.restrict(prof.depth), g.k, s) if len(T) else []
            stat = {"S(k)": s, "pi": g.pi}
            if len(vals):
                stat.update(first=_as_real(vals[0]), last=_as_real(vals[-1]),
                            max=_as_real(max(vals)))
            failures.append((g.k, stat))
    bad = {k for k, _ in failures}
    if k_max in bad:
        return STameResult(False, None, tuple(failures), prof)
    k0 = max(bad) + 1 if bad else 1
    return STameResult(True, k0, tuple(failures), prof)


# ---------------------------------------------------------------------------
# Lemma 4.1 embedding operators


@dataclass(frozen=True, eq=False)
class EmbeddingTriple:
    merged: MergedSequence
    gamma_space: GradedSpace
    alpha_space: GradedSpace
    beta_space: GradedSpace
    T1: QuasiDiagonalOperator   # gamma-indexed -> alpha-indexed: (x_n) -> (x_{t_n})
    T2: QuasiDiagonalOperator   # beta-indexed -> gamma-indexed: y_n placed at s_n

    def lift(self, x: FiniteVector) -> FiniteVector:
        """Right inverse of T1: place x_n at index t_n."""
        t = self.merged.t
        return FiniteVector(tuple((t[i - 1], c) for i, c in x.support))

    def conjugate(self, T: QuasiDiagonalOperator) -> QuasiDiagonalOperator:
        """``R = T2 o T o T1`` as a quasi-diagonal operator on the gamma space."""
        t, s = self.merged.t, self.merged.s
        d = self.merged.depth
        entries = [(t[i - 1], s[m - 1], lt) for i, m, lt in T.entries if i <= d and m <= d]
        return QuasiDiagonalOperator.from_entries(entries, self.gamma_space, self.gamma_space)


def build_embedding_triple(alpha, beta, space_type: str, depth: int) -> EmbeddingTriple:
    """Merge alpha and beta and build the selection/placement operators."""
    if space_type not in (FINITE, INFINITE):
        raise InvalidDescriptor("space_type must be 'finite' or 'infinite'")
    merged = merge(alpha, beta, depth)
    mk = GradedSpace.finite if space_type == FINITE else GradedSpace.infinite
    g, a, b = mk(merged.gamma), mk(alpha), mk(beta)
    idx = np.arange(1, depth + 1)
    T1 = QuasiDiagonalOperator(np.array(merged.t), idx, np.zeros(depth), g, a)
    T2 = QuasiDiagonalOperator(idx, np.array(merged.s), np.zeros(depth), b, g)
    return EmbeddingTriple(merged, g, a, b, T1, T2)
