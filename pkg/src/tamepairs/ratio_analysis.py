"""Finite limit points of the double ratio family and the Piszczek criterion.

Both analyses work on truncations, so their conclusions are evidence-graded
:class:`~tamepairs.verdicts.Verdict` values.  Built-in sequence families are
decided by analytic rules before any numerics run.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any

import numpy as np
from numba import njit

from .errors import GradeOutOfRange, IndexOutOfRange, InvalidDescriptor
from .intmaps import MonotoneIntMap, builtin_phi_family  # noqa: F401  (re-exported)
from .parallel import blocks, default_workers, map_blocks
from .sequences import (ExpPower, ExponentSequence, Factorial, Scaled,
                        analytic_stability, validate)
from .spaces import GradedSpace
from .verdicts import Verdict, Verdict3

TOL_C = 1e-6


@njit(cache=True, nogil=True)
def _piszczek_rows(num_b, num_a, den_b, den_a, didx, lo, hi, out):
    n_cols = num_a.shape[0]
    n_p = den_b.shape[1]
    for j in range(lo, hi):
        best = -np.inf
        t = 0
        for k in range(n_cols):
            den = -np.inf
            for p in range(n_p):
                v = den_b[j, p] - den_a[k, p]
                if v > den:
                    den = v
            f = num_b[j] - num_a[k] - den
            if f > best:
                best = f
            while t < didx.shape[0] and didx[t] == k:
                out[j - lo, t] = best
                t += 1


@dataclass(frozen=True)
class Cluster:
    center: float
    mass: int
    lo: float
    hi: float

    def to_dict(self):
        return {"center": self.center, "mass": self.mass, "lo": self.lo, "hi": self.hi}


@dataclass(frozen=True)
class LimitPointEstimate:
    clusters: tuple[Cluster, ...]
    sup_finite: float | None
    cutoff: float
    depth: int
    verdict: Verdict
    analytic: bool
    cluster_eps: float = 0.0

    def to_dict(self):
        return {"clusters": [c.to_dict() for c in self.clusters], "sup_finite": self.sup_finite,
                "cutoff": self.cutoff, "depth": self.depth, "cluster_eps": self.cluster_eps,
                "verdict": self.verdict.to_dict(), "analytic": self.analytic}

    def csv_rows(self):
        return [("center", "mass")] + [(c.center, c.mass) for c in self.clusters]


# ---------------------------------------------------------------------------
# analytic rules


def _factorial_scale(seq):
    """Return (scale, kind) for c*n! or c*exp(n^p) with p > 1, else None."""
    c = 1.0
    if isinstance(seq, Scaled):
        c, seq = seq.c, seq.inner
    if isinstance(seq, Factorial):
        return c, "factorial"
    if isinstance(seq, ExpPower) and seq.p > 1:
        return c, f"exp_power:{seq.p!r}"
    return None


def analytic_limit_points(beta: ExponentSequence, alpha: ExponentSequence):
    """Rule table for M_{beta,alpha}.  Returns ``(verdict, points, rule)`` or None.

    ``points`` is the exact set of finite limit points when the rule knows it.
    """
    sb, sa = analytic_stability(beta), analytic_stability(alpha)
    for name, rule in (("alpha", sa), ("beta", sb)):
        if rule and rule[0] is Verdict3.BOUNDED:
            return (Verdict3.UNBOUNDED, None,
                    f"{name} is stable with ratio bound q={rule[1]:.6g}: for every c>0 each interval "
                    "[c, q*c] meets the ratio family once per large index, so it holds a finite "
                    "limit point")
    fb, fa = _factorial_scale(beta), _factorial_scale(alpha)
    if fb and fa and fb[1] == fa[1]:
        c = fb[0] / fa[0]
        return (Verdict3.BOUNDED, (0.0, c),
                f"both sequences are {fa[1]}-type: ratios equal {c:.6g} on the diagonal and tend "
                "to 0 or infinity off it")
    if sb and sa and sb[0] is Verdict3.UNBOUNDED and sa[0] is Verdict3.UNBOUNDED:
        return (Verdict3.BOUNDED, None,
                "both sequences are non-stable, so the finite limit points are bounded (Remark 4.5)")
    return None


# ---------------------------------------------------------------------------
# numerics


def _window_depth(beta, alpha, depth):
    for seq in (beta, alpha):
        if seq.length is not None:
            depth = min(depth, seq.length)
    return depth


def window_ratios(beta, alpha, depth, cutoff, workers=None) -> np.ndarray:
    """Sorted ratios beta_i/alpha_j below cutoff for i in (depth/2, depth], j <= depth."""
    lb = beta.log_values(depth)[depth // 2:]
    la = alpha.log_values(depth)
    log_cut = math.log(cutoff)

    def run(lo, hi):
        logr = lb[lo:hi, None] - la[None, :]
        return np.exp(logr[logr < log_cut])

    parts = map_blocks(run, blocks(0, len(lb), 256), workers)
    out = np.concatenate(parts) if parts else np.empty(0)
    out.sort(kind="stable")
    return out


def greedy_clusters(values: np.ndarray, eps: float) -> list[Cluster]:
    """Greedy clustering of sorted values; ratios below eps form the zero cluster."""
    out = [Cluster(0.0, int(np.searchsorted(values, eps, side="left")), 0.0, eps)]
    i = out[0].mass
    n = len(values)
    while i < n:
        start = values[i]
        j = int(np.searchsorted(values, start + eps, side="right"))
        chunk = values[i:j]
        out.append(Cluster(float(chunk.mean()), int(j - i), float(chunk[0]), float(chunk[-1])))
        i = j
    return out


def _hits(values, lo, hi):
    return int(np.searchsorted(values, hi, side="right") - np.searchsorted(values, lo, side="left"))


def _candidates(beta, alpha, depth, cutoff, eps, workers):
    """Clusters at ``depth`` that persist in the window at ``depth // 2``."""
    here = window_ratios(beta, alpha, depth, cutoff, workers)
    before = window_ratios(beta, alpha, max(2, depth // 2), cutoff, workers)
    clusters = greedy_clusters(here, eps)
    keep = [c for c in clusters
            if c.center == 0.0 or _hits(before, c.lo - eps, c.hi + eps) > 0]
    return keep, here


def estimate_limit_points(beta: ExponentSequence, alpha: ExponentSequence, depth: int = 2000,
                          cutoff: float = 10.0, cluster_eps: float | None = None,
                          workers: int | None = None) -> LimitPointEstimate:
    """Estimate M_{beta,alpha}, the finite limit points of (beta_i / alpha_j)."""
    if depth < 10:
        raise InvalidDescriptor("limit point estimation needs depth >= 10")
    if cutoff <= 0:
        raise InvalidDescriptor("cutoff must be positive")
    eps = 1e-3 * cutoff if cluster_eps is None else cluster_eps
    if eps <= 0:
        raise InvalidDescriptor("cluster_eps must be positive")
    for seq in (beta, alpha):
        validate(seq, depth)
    depth = _window_depth(beta, alpha, depth)
    if depth < 10:
        raise IndexOutOfRange("tables are too short for limit point estimation (need 10 terms)")

    cands, here = _candidates(beta, alpha, depth, 2 * cutoff, eps, workers)
    low = [c for c in cands if c.hi < cutoff]
    sups = []
    for d in (max(10, depth // 4), max(10, depth // 2), depth):
        cs, _ = _candidates(beta, alpha, d, cutoff, eps, workers)
        sups.append(max(c.center for c in cs))
    near_cut = any(c.hi >= cutoff - eps for c in cands if c.lo < cutoff)
    near_2cut = any(c.hi >= 2 * cutoff - eps for c in cands)
    # doubling re-test: a persistent candidate beyond the cutoff means the sup moved
    beyond = [c.center for c in cands if c.lo >= cutoff]
    stable_sup = abs(sups[2] - sups[1]) <= eps and abs(sups[1] - sups[0]) <= eps
    evidence: dict[str, Any] = {
        "window": f"i in ({depth // 2}, {depth}], j in [1, {depth}]",
        "ratios_below_cutoff": int(np.searchsorted(here, cutoff)),
        "candidate_sup_by_depth": {str(d): s for d, s in
                                   zip((max(10, depth // 4), max(10, depth // 2), depth), sups)},
        "near_cutoff": near_cut, "near_double_cutoff": near_2cut,
        "candidates_beyond_cutoff": len(beyond),
        "cluster_eps": eps,
    }
    if near_cut and near_2cut:
        numeric = Verdict3.UNBOUNDED
    elif stable_sup and not near_cut and not beyond:
        numeric = Verdict3.BOUNDED
    else:
        numeric = Verdict3.INCONCLUSIVE
    evidence["numeric_verdict"] = numeric.value

    rule = analytic_limit_points(beta, alpha)
    if rule is None:
        clusters = tuple(low)
        sup = max(c.center for c in clusters) if numeric is Verdict3.BOUNDED else None
        evidence["rule"] = "numeric"
        return LimitPointEstimate(clusters, sup, cutoff, depth, Verdict(numeric, evidence),
                                  False, eps)
    value, points, text = rule
    evidence["rule"] = text
    if points is not None:
        below = here[here < cutoff]
        clusters = tuple(Cluster(p, _hits(below, p - eps, p + eps) if p else
                                 _hits(below, 0.0, eps), max(0.0, p - eps), p + eps)
                         for p in sorted(points) if p < cutoff)
    else:
        clusters = tuple(low)
    sup = max(c.center for c in clusters) if value is Verdict3.BOUNDED else None
    return LimitPointEstimate(clusters, sup, cutoff, depth, Verdict(value, evidence), True, eps)


# ---------------------------------------------------------------------------
# Piszczek criterion


@dataclass(frozen=True)
class PiszczekRun:
    psi: MonotoneIntMap
    phi: MonotoneIntMap
    m: int
    n_max: int
    constants: tuple[tuple[int, int, float], ...]
    verdict: Verdict
    argmax: tuple[tuple[int, int], ...] = field(default=())

    def to_dict(self):
        return {"psi": self.psi.to_json(), "phi": self.phi.to_json(), "m": self.m,
                "n_max": self.n_max,
                "constants": [{"depth": d, "n_used": n, "log_C": c} for d, n, c in self.constants],
                "argmax": [list(a) for a in self.argmax], "verdict": self.verdict.to_dict()}


def _grade_columns(space: GradedSpace, grades, rows: int) -> np.ndarray:
    for g in grades:
        space.check_grade(g)
    if space.rows is not None and space.rows < rows:
        raise IndexOutOfRange(f"{space.label} has {space.rows} rows, need {rows}")
    js = np.arange(1, rows + 1)
    return np.stack([space.log_weights(js, g) for g in grades], axis=1)


def check_piszczek(A: GradedSpace, B: GradedSpace, psi: MonotoneIntMap, phi: MonotoneIntMap,
                   m: int, depths, n_max: int, workers: int | None = None) -> PiszczekRun:
    """Track ``C(N) = sup_{j,k<=N} (b_{j,m}/a_{k,psi(m)}) / max_{p<=n_max} b_{j,p}/a_{k,phi(p)}``.

    Only the supplied ``phi`` is tested; the criterion quantifies over every
    increasing phi, which no finite run covers.
    """
    depths = [int(d) for d in depths]
    if not depths or any(b <= a for a, b in zip(depths, depths[1:])) or depths[0] < 1:
        raise InvalidDescriptor("depths must be positive and strictly increasing")
    if m < 1 or n_max < 1:
        raise GradeOutOfRange("m and n_max must be positive")
    N = depths[-1]
    try:
        a_grades = [psi(m)] + [phi(p) for p in range(1, n_max + 1)]
    except GradeOutOfRange as exc:
        raise GradeOutOfRange(f"grade map out of range: {exc}") from exc
    LA = _grade_columns(A, a_grades, N)          # column 0: psi(m), then phi(1..n)
    LB = _grade_columns(B, [m] + list(range(1, n_max + 1)), N)
    if not (np.all(np.isfinite(LA)) and np.all(np.isfinite(LB))):
        raise IndexOutOfRange("weights overflow the float range at this depth; reduce the depths")
    num_b, num_a = LB[:, 0].copy(), LA[:, 0].copy()
    den_b, den_a = np.ascontiguousarray(LB[:, 1:]), np.ascontiguousarray(LA[:, 1:])
    didx = np.array(depths, dtype=np.int64) - 1

    def run(lo, hi):
        out = np.empty((hi - lo, len(didx)))
        _piszczek_rows(num_b, num_a, den_b, den_a, didx, lo, hi, out)
        return out

    workers = default_workers() if workers is None else workers
    parts = map_blocks(run, blocks(0, N, max(1, -(-N // workers))), workers)
    vals = np.concatenate(parts, axis=0)

    constants, argmax = [], []
    for t, d in enumerate(depths):
        sub = vals[:d, t]
        j = int(np.argmax(sub))
        constants.append((d, n_max, float(sub[j])))
        row = num_b[j] - num_a[:d] - np.max(den_b[j][None, :] - den_a[:d], axis=1)
        argmax.append((j + 1, int(np.argmax(row)) + 1))
    logc = [c for _, _, c in constants]
    evidence: dict[str, Any] = {"log_C": logc, "depths": depths, "tol_C": TOL_C,
                                "phi_scope": "only the supplied phi is tested"}
    if len(logc) >= 2:
        last = logc[-1] - logc[-2]
        evidence["final_increase"] = last
        incs = np.diff(logc) / np.diff(np.log(depths))
        evidence["log_slope"] = [float(x) for x in incs]
        if last < TOL_C:
            value = Verdict3.BOUNDED
        else:
            value = Verdict3.INCONCLUSIVE
            superlinear = len(incs) >= 2 and bool(np.all(np.diff(incs) > 0)) or \
                (len(incs) == 1 and last > math.log(depths[-1] / depths[-2]))
            evidence["leaning"] = "Unbounded" if superlinear else "none"
    else:
        value = Verdict3.INCONCLUSIVE
        evidence["leaning"] = "none (single depth)"
    return PiszczekRun(psi, phi, m, n_max, tuple(constants), Verdict(value, evidence), tuple(argmax))
