"""Explicit non-tame operators and linear-tameness certificates."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any

import mpmath
import numpy as np
from numba import njit

from .errors import InvalidCertificate, InvalidDescriptor, InvalidS, PreconditionFailed
from .intmaps import MonotoneIntMap
from .operators import (DIVERGED, QuasiDiagonalOperator, continuity_characteristic,
                        entry_log_ratios, qd_norm)
from .ratio_analysis import _grade_columns, estimate_limit_points
from .sequences import ExponentSequence, sequence_from_json
from .spaces import INFINITE, GradedSpace
from .verdicts import Verdict3

E2_TOL = 1e-9


@dataclass(frozen=True)
class NotFound:
    depth: int
    reason: str
    detail: dict = field(default_factory=dict)

    def to_dict(self):
        return {"type": "NotFound", "depth": self.depth, "reason": self.reason, **self.detail}


@dataclass(frozen=True)
class Refuted:
    reason: str
    violation: dict = field(default_factory=dict)

    def to_dict(self):
        return {"type": "Refuted", "reason": self.reason, "violation": self.violation}


# ---------------------------------------------------------------------------
# failure certificates for the quasi-diagonal reduction


@dataclass(frozen=True)
class FailureRow:
    n: int
    k: int
    m_k: int
    i_n: int
    nu_n: int
    log_lhs: float
    log_rhs: float

    def as_list(self):
        return [self.n, self.k, self.m_k, self.i_n, self.nu_n, self.log_lhs, self.log_rhs]


@dataclass(frozen=True)
class FailureCertificate:
    psi: MonotoneIntMap
    phi: MonotoneIntMap
    rows: tuple[FailureRow, ...]
    domain: GradedSpace
    codomain: GradedSpace

    def to_json(self) -> dict[str, Any]:
        return {"type": "FailureCertificate", "psi": self.psi.to_json(), "phi": self.phi.to_json(),
                "domain": self.domain.to_json(), "codomain": self.codomain.to_json(),
                "rows": [r.as_list() for r in self.rows]}

    @classmethod
    def from_json(cls, data) -> "FailureCertificate":
        rows = tuple(FailureRow(int(n), int(k), int(m), int(i), int(v), float(lhs), float(rhs))
                     for n, k, m, i, v, lhs, rhs in data["rows"])
        return cls(MonotoneIntMap.from_json(data["psi"]), MonotoneIntMap.from_json(data["phi"]),
                   rows, GradedSpace.from_json(data["domain"]),
                   GradedSpace.from_json(data["codomain"]))


@njit(cache=True)
def _first_pair(lb_m, la_psi, LB, LA, n, logn, i0, nu0):
    for i in range(i0, la_psi.shape[0]):
        for nu in range(nu0, lb_m.shape[0]):
            thr = lb_m[nu] - la_psi[i] - logn
            ok = True
            for q in range(n):
                if LB[nu, q] - LA[i, q] > thr:
                    ok = False
                    break
            if ok:
                return i, nu
    return -1, -1


def _e2_terms(A: GradedSpace, B: GradedSpace, psi, phi, m, n, i, nu):
    lhs = B.log_weight(nu, m) - A.log_weight(i, psi(m))
    rhs = max(B.log_weight(nu, q) - A.log_weight(i, phi(q)) for q in range(1, n + 1))
    return lhs, rhs


def search_tameness_failure(A: GradedSpace, B: GradedSpace, psi: MonotoneIntMap,
                            phi: MonotoneIntMap, n_target: int, depth: int,
                            m_range=None):
    """Greedy search for rows of the failure inequality at a single grade pair.

    For each candidate ``m`` (the grade ``k`` is taken equal to ``m``), rows
    ``n = 1..n_target`` need indices ``i_n, nu_n`` with
    ``log b_{nu,m} - log a_{i,psi(m)} >= log n + max_{q<=n} (log b_{nu,q} - log a_{i,phi(q)})``,
    both strictly increasing.  Returns the first complete certificate.
    """
    if n_target < 1 or depth < 1:
        raise InvalidDescriptor("n_target and depth must be positive")
    m_range = list(m_range) if m_range is not None else list(range(1, max(2, n_target // 2) + 1))
    phis = [phi(q) for q in range(1, n_target + 1)]
    LA = _grade_columns(A, phis, depth)
    LB = _grade_columns(B, range(1, n_target + 1), depth)
    if not (np.all(np.isfinite(LA)) and np.all(np.isfinite(LB))):
        raise InvalidDescriptor("weights overflow at this depth; lower the depth")
    reached = {}
    for m in m_range:
        lb_m = np.ascontiguousarray(_grade_columns(B, [m], depth)[:, 0])
        la_psi = np.ascontiguousarray(_grade_columns(A, [psi(m)], depth)[:, 0])
        rows, i0, nu0 = [], 0, 0
        for n in range(1, n_target + 1):
            i, nu = _first_pair(lb_m, la_psi, np.ascontiguousarray(LB[:, :n]),
                                np.ascontiguousarray(LA[:, :n]), n, math.log(n), i0, nu0)
            if i < 0:
                break
            lhs = float(lb_m[nu] - la_psi[i])
            rhs = float(np.max(LB[nu, :n] - LA[i, :n]))
            rows.append(FailureRow(n, m, m, i + 1, nu + 1, lhs, rhs))
            i0, nu0 = i + 1, nu + 1
        if len(rows) == n_target:
            return FailureCertificate(psi, phi, tuple(rows), A, B)
        reached[m] = len(rows)
    return NotFound(depth, "no grade m admits n_target rows",
                    {"rows_reached": {str(m): r for m, r in reached.items()},
                     "n_target": n_target, "phi": phi.to_text(), "psi": psi.to_text()})


def search_phi_family(A, B, psi, phis: dict, n_target: int, depth: int, m_range=None):
    """Run :func:`search_tameness_failure` for each named phi."""
    return {name: search_tameness_failure(A, B, psi, phi, n_target, depth, m_range)
            for name, phi in phis.items()}


def verify_failure_certificate(cert: FailureCertificate, tol: float = E2_TOL) -> list[str]:
    """Recompute every row from the weights; return a list of problems."""
    A, B, problems = cert.domain, cert.codomain, []
    prev_i = prev_nu = 0
    for r in cert.rows:
        if r.m_k < r.k:
            problems.append(f"row {r.n}: m_k={r.m_k} < k={r.k}")
        if r.i_n <= prev_i or r.nu_n <= prev_nu:
            problems.append(f"row {r.n}: indices not strictly increasing")
        prev_i, prev_nu = r.i_n, r.nu_n
        lhs, rhs = _e2_terms(A, B, cert.psi, cert.phi, r.m_k, r.n, r.i_n, r.nu_n)
        if lhs < math.log(r.n) + rhs - tol:
            problems.append(f"row {r.n}: {lhs} < log {r.n} + {rhs}")
        if abs(lhs - r.log_lhs) > tol * (1 + abs(lhs)) or abs(rhs - r.log_rhs) > tol * (1 + abs(rhs)):
            problems.append(f"row {r.n}: stored logs differ from recomputed values")
    return problems


def build_qd_witness(cert: FailureCertificate, A: GradedSpace | None = None,
                     B: GradedSpace | None = None) -> QuasiDiagonalOperator:
    """``T e_{i_n} = t_n e_{nu_n}`` with ``1/t_n = max_{q<=n} b_{nu_n,q}/a_{i_n,phi(q)}``."""
    A = A or cert.domain
    B = B or cert.codomain
    if A != cert.domain or B != cert.codomain:
        cert = FailureCertificate(cert.psi, cert.phi, cert.rows, A, B)
    problems = verify_failure_certificate(cert)
    if problems:
        raise InvalidCertificate("; ".join(problems))
    entries = []
    for r in cert.rows:
        _, rhs = _e2_terms(A, B, cert.psi, cert.phi, r.m_k, r.n, r.i_n, r.nu_n)
        entries.append((r.i_n, r.nu_n, -rhs))
    T = QuasiDiagonalOperator.from_entries(entries, A, B)
    for r in cert.rows:
        ratio = B.log_weight(r.nu_n, r.m_k) - A.log_weight(r.i_n, cert.psi(r.m_k)) \
            + T.log_scalar[r.n - 1]
        if ratio < math.log(r.n) - E2_TOL:
            raise InvalidCertificate(f"row {r.n}: witness ratio {ratio} < log {r.n}")
    return T


def witness_row_ratios(T: QuasiDiagonalOperator, cert: FailureCertificate) -> list[float]:
    """``log ||T e_{i_n}||_{m_k} - log ||e_{i_n}||_{psi(m_k)}`` per row."""
    out = []
    for r in cert.rows:
        v = entry_log_ratios(T, r.m_k, cert.psi(r.m_k), r.i_n)[-1]
        out.append(float(v))
    return out


def witness_continuity_excess(T: QuasiDiagonalOperator, cert: FailureCertificate) -> float:
    """Largest ``log ||T e_{i_n}||_q - log ||e_{i_n}||_{phi(q)}`` over q <= n (must be <= 0)."""
    worst = -math.inf
    for r in cert.rows:
        for q in range(1, r.n + 1):
            v = T.log_scalar[r.n - 1] + T.codomain.log_weight(r.nu_n, q) \
                - T.domain.log_weight(r.i_n, cert.phi(q))
            worst = max(worst, float(v))
    return worst


# ---------------------------------------------------------------------------
# infinite-type witness built from the interval blocks I_k


@dataclass(frozen=True)
class WitnessBlock:
    k: int
    lo: float
    hi: float
    members: tuple[tuple[int, int], ...]

    def to_dict(self):
        return {"k": self.k, "lo": self.lo, "hi": self.hi, "members": [list(m) for m in self.members]}


@dataclass(frozen=True)
class InfiniteTypeWitness:
    S: MonotoneIntMap
    blocks: tuple[WitnessBlock, ...]
    operator: QuasiDiagonalOperator
    alpha: ExponentSequence
    beta: ExponentSequence

    def block(self, k: int) -> WitnessBlock:
        return next(b for b in self.blocks if b.k == k)

    def growth(self, k: int) -> list[float]:
        """``log ||Te_n||_k - log ||e_n||_{S(k)} = (S(k+1) - S(k)) alpha_n`` per member."""
        b = self.block(k)
        src = np.array([n for n, _ in b.members])
        T = self.operator
        pos = np.searchsorted(T.source, src)
        wb = T.codomain.log_weights(T.target[pos], k)
        wa = T.domain.log_weights(src, self.S(k))
        return [float(v) for v in T.log_scalar[pos] + wb - wa]

    def to_json(self) -> dict[str, Any]:
        return {"type": "InfiniteTypeWitness", "S": self.S.to_json(),
                "alpha": self.alpha.to_json(), "beta": self.beta.to_json(),
                "blocks": [b.to_dict() for b in self.blocks],
                "operator": self.operator.to_json()}

    @classmethod
    def from_json(cls, data) -> "InfiniteTypeWitness":
        blocks = tuple(WitnessBlock(int(b["k"]), float(b["lo"]), float(b["hi"]),
                                    tuple((int(n), int(m)) for n, m in b["members"]))
                       for b in data["blocks"])
        return cls(MonotoneIntMap.from_json(data["S"]), blocks,
                   QuasiDiagonalOperator.from_json(data["operator"]),
                   sequence_from_json(data["alpha"]), sequence_from_json(data["beta"]))


def block_interval(S: MonotoneIntMap, k: int) -> tuple[int, int]:
    return (k * (k - 1) * (S(k + 1) - S(k)), k * (k + 1) * (S(k + 2) - S(k + 1)))


def check_convex(S: MonotoneIntMap, k_max: int) -> None:
    for k in range(2, k_max + 2):
        d0, d1 = S(k) - S(k - 1), S(k + 1) - S(k)
        if not (d1 >= d0 > 0):
            raise InvalidS(f"S needs S(k+1)-S(k) >= S(k)-S(k-1) > 0; fails at k={k} "
                           f"({d1} vs {d0})")


def build_infinite_type_witness(alpha: ExponentSequence, beta: ExponentSequence,
                                S: MonotoneIntMap, k_max: int, depth: int,
                                min_block: int = 5, max_block: int | None = None):
    """Assemble blocks ``M_k`` with ``beta_m / alpha_n`` inside ``I_k``.

    Blocks are filled from the largest k down, since large k need large ratios
    and so small n.  Within a block n ascends and m is first-fit.
    """
    check_convex(S, k_max)
    max_block = max_block or min_block
    la, lb = alpha.log_values(depth), beta.log_values(depth)
    claimed_n = np.zeros(depth, dtype=bool)
    used_m = np.zeros(depth, dtype=bool)
    blocks, empty = {}, []
    for k in range(k_max, 0, -1):
        lo, hi = block_interval(S, k)
        log_lo = math.log(lo) if lo > 0 else -math.inf
        log_hi = math.log(hi)
        members = []
        for n in range(depth):
            if claimed_n[n]:
                continue
            lr = lb - la[n]
            ok = (lr > log_lo) & (lr < log_hi) & ~used_m
            hit = np.flatnonzero(ok)
            if hit.size:
                m = int(hit[0])
                members.append((n + 1, m + 1))
                claimed_n[n] = used_m[m] = True
                if len(members) >= max_block:
                    break
        if len(members) < min_block:
            empty.append(k)
        blocks[k] = WitnessBlock(k, float(lo), float(hi), tuple(members))
    if empty:
        return NotFound(depth, "ratio set misses some intervals I_k",
                        {"short_blocks": sorted(empty), "min_block": min_block,
                         "sizes": {str(k): len(b.members) for k, b in sorted(blocks.items())}})
    entries = []
    for k, b in blocks.items():
        s1 = S(k + 1)
        for n, m in b.members:
            entries.append((n, m, float(s1 * alpha.exact(n) - k * beta.exact(m))))
    T = QuasiDiagonalOperator.from_entries(entries, GradedSpace.infinite(alpha),
                                           GradedSpace.infinite(beta))
    return InfiniteTypeWitness(S, tuple(blocks[k] for k in sorted(blocks)), T, alpha, beta)


def upward_bound(S: MonotoneIntMap, j: int) -> int:
    """A grade r with ``log ||Te_n||_j <= log ||e_n||_r`` for members of blocks k < j.

    Blocks k >= j satisfy the chain bound ``S(j+1)``; for k < j the interval
    cap ``hi_k`` gives ``S(k+1) + (j-k) hi_k``.
    """
    r = S(j + 1)
    for k in range(1, j):
        r = max(r, S(k + 1) + (j - k) * block_interval(S, k)[1])
    return r


def _member_norms(w: InfiniteTypeWitness, b: WitnessBlock, j: int):
    T = w.operator
    src = np.array([n for n, _ in b.members])
    pos = np.searchsorted(T.source, src)
    return src, T.log_scalar[pos] + T.codomain.log_weights(T.target[pos], j)


def chain_violations(w: InfiniteTypeWitness, j_max: int | None = None, tol: float = E2_TOL):
    """Pairs (k, n, j) where ``log ||Te_n||_j > log ||e_n||_{S(j+1)}``."""
    j_max = j_max or max(b.k for b in w.blocks)
    out = []
    for b in w.blocks:
        for j in range(1, j_max + 1):
            src, norms = _member_norms(w, b, j)
            bound = w.S(j + 1) * w.alpha.values_at(src)
            for n, v, c in zip(src, norms, bound):
                if v > c + tol * (1 + abs(c)):
                    out.append((b.k, int(n), j))
    return out


def verify_infinite_type_witness(w: InfiniteTypeWitness, tol: float = E2_TOL) -> list[str]:
    """Recheck intervals, disjointness, the norm identity, the chain for j <= k
    and the interval-derived bound for j > k."""
    problems = []
    T, S = w.operator, w.S
    ns = [n for b in w.blocks for n, _ in b.members]
    ms = [m for b in w.blocks for _, m in b.members]
    if len(set(ns)) != len(ns) or len(set(ms)) != len(ms):
        problems.append("blocks overlap in n or reuse a target m")
    if len(T) != len(ns) or sorted(ns) != [int(i) for i in T.source]:
        problems.append("operator entries differ from block members")
        return problems
    k_max = max(b.k for b in w.blocks)
    for b in w.blocks:
        lo, hi = block_interval(S, b.k)
        if (float(lo), float(hi)) != (b.lo, b.hi):
            problems.append(f"block {b.k}: interval differs from S")
        for n, m in b.members:
            ratio = w.beta.exact(m) / w.alpha.exact(n)
            if not (lo < ratio < hi):
                problems.append(f"block {b.k}: beta_{m}/alpha_{n} = {float(ratio)} outside I_k")
            if T.target[np.searchsorted(T.source, n)] != m:
                problems.append(f"block {b.k}: entry {n} does not map to {m}")
        for j in range(1, k_max + 1):
            src, norms = _member_norms(w, b, j)
            a = w.alpha.values_at(src)
            bound = (S(j + 1) if j <= b.k else upward_bound(S, j)) * a
            for n, v, c in zip(src, norms, bound):
                if j == b.k and abs(v - c) > tol * (1 + abs(c)):
                    problems.append(f"block {b.k}, n={n}: identity off by {v - c}")
                if v > c + tol * (1 + abs(c)):
                    problems.append(f"block {b.k}, n={n}, j={j}: continuity bound violated")
    return problems


# ---------------------------------------------------------------------------
# linear tameness on infinite-type pairs with bounded limit points


@dataclass(frozen=True)
class LinearTameCertificate:
    A: float
    B: int
    log_D: tuple[float, ...]            # log D_k for k = 1..k_max
    exceptional: tuple[int, ...]        # source indices n_i whose ratio lies in I_3
    partition: dict                     # grade -> {"I1": count, "I2": count, "I3": count}
    pi: tuple[int, ...]
    depth: int
    max_excess: float                   # max over n, k of the checked log inequality slack

    def to_json(self):
        return {"type": "LinearTameCertificate", "A": self.A, "B": self.B,
                "log_D": list(self.log_D), "exceptional": list(self.exceptional),
                "partition": self.partition, "pi": list(self.pi), "depth": self.depth,
                "max_excess": self.max_excess}

    @classmethod
    def from_json(cls, data):
        return cls(float(data["A"]), int(data["B"]), tuple(float(v) for v in data["log_D"]),
                   tuple(int(v) for v in data["exceptional"]),
                   {str(k): dict(v) for k, v in data["partition"].items()},
                   tuple(int(v) for v in data["pi"]), int(data["depth"]),
                   float(data["max_excess"]))


def _log_ratio_seq(T: QuasiDiagonalOperator, depth: int) -> np.ndarray:
    """``log(beta_{sigma(n)} / alpha_n)`` per entry with source <= depth."""
    keep = T.source <= depth
    return (T.codomain.seq.log_values_at(T.target[keep])
            - T.domain.seq.log_values_at(T.source[keep]))


def linear_tame_certificate(T: QuasiDiagonalOperator, A: float, k_max: int, depth: int,
                            r_max: int | None = None, max_exceptional: int = 64,
                            limit_depth: int = 2000):
    """Build ``B = pi_T(1)`` and ``D_k`` so that
    ``log ||Te_n||_k - log ||e_n||_{A k + B} <= log D_k`` for every entry up to ``depth``."""
    if T.domain.kind != INFINITE or T.codomain.kind != INFINITE:
        raise PreconditionFailed("linear tameness certificates need infinite-type power series spaces")
    alpha, beta = T.domain.seq, T.codomain.seq
    est = estimate_limit_points(beta, alpha, depth=limit_depth)
    if est.verdict.value != Verdict3.BOUNDED:
        raise PreconditionFailed(f"finite limit points of beta/alpha are not bounded "
                                 f"({est.verdict.value.value}); no A can dominate them")
    if est.sup_finite is not None and not A > est.sup_finite:
        raise PreconditionFailed(f"A={A} does not exceed the limit point sup {est.sup_finite}")
    T = T.restrict(depth)
    if len(T) == 0:
        raise PreconditionFailed("operator has no entries up to this depth")
    r_max = r_max or 4 * (k_max + 2)
    prof = continuity_characteristic(T, k_max + 1, r_max, depth)
    pi = [g.pi for g in prof.grades]
    if DIVERGED in pi:
        raise PreconditionFailed(f"pi_T diverges at grade {pi.index(DIVERGED) + 1} (r <= {r_max})")
    B = pi[0]
    ratio = np.exp(_log_ratio_seq(T, depth))
    C1 = float(qd_norm(T, 1, pi[0]))
    log_D, partition, exceptional, excess = [], {}, set(), -math.inf
    for k in range(1, k_max + 1):
        in1 = ratio <= A
        in2 = ratio >= max(pi[k], 2 * A)
        in3 = ~(in1 | in2)
        partition[str(k)] = {"I1": int(in1.sum()), "I2": int(in2.sum()), "I3": int(in3.sum())}
        if in3.sum() > max_exceptional:
            return Refuted("too many exceptional entries; the ratio set is not finite in I_3",
                           {"k": k, "I3": int(in3.sum()), "max_exceptional": max_exceptional})
        vals = np.array([float(v) for v in entry_log_ratios(T, k, A * k + B)])
        Ck1 = float(qd_norm(T, k + 1, pi[k]))
        d = max([C1, Ck1] + [float(v) for v in vals[in3]])
        log_D.append(d)
        exceptional.update(int(n) for n in T.source[in3])
        worst = int(np.argmax(vals - d))
        excess = max(excess, float(vals[worst] - d))
        if vals[worst] > d + E2_TOL * (1 + abs(d)):
            return Refuted("checked inequality fails",
                           {"n": int(T.source[worst]), "k": k, "lhs": float(vals[worst]),
                            "log_D": d})
    return LinearTameCertificate(float(A), int(B), tuple(log_D), tuple(sorted(exceptional)),
                                 partition, tuple(int(p) for p in pi), depth, excess)


def verify_linear_tame_certificate(cert: LinearTameCertificate, T: QuasiDiagonalOperator,
                                   tol: float = E2_TOL) -> list[str]:
    problems = []
    T = T.restrict(cert.depth)
    for k, d in enumerate(cert.log_D, start=1):
        vals = entry_log_ratios(T, k, cert.A * k + cert.B)
        bad = [int(n) for n, v in zip(T.source, vals) if float(v) > d + tol * (1 + abs(d))]
        if bad:
            problems.append(f"grade {k}: entries {bad[:5]} exceed log D_k = {d}")
    return problems
