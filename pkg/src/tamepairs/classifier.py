"""Tameness cell of a pair of power series spaces, and of their products."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any

from .errors import UnsupportedSpace
from .ratio_analysis import estimate_limit_points
from .sequences import check_stability
from .spaces import FINITE, INFINITE, GradedSpace
from .verdicts import Verdict3

TAME = "Tame"
NON_TAME = "NonTame"
TAME_IFF_BOUNDED = "TameIffBounded"
UNDETERMINED = "Undetermined"
PROVEN = "Proven"
NUMERICAL = "Numerical"

# Result sources, keyed by the short labels used in the cells.
CITATIONS = {
    "T2": "Theorem 4.3 (T2)",
    "P1": "Proposition 4.2 (P1)",
    "T3": "Theorem 4.4 (T3)",
    "T4": "Theorem 4.6 (T4)",
    "T1": "Theorem 4.7 (T1)",
    "P2": "Proposition P2",
}
NOTES = {
    "T3_rule": "both sequences non-stable: finite limit points of beta_i/alpha_j are bounded",
    "T1_nonstable": "alpha and beta non-stable: (Linf(alpha), Linf(beta)) is tame",
    "P2": "tame iff every continuous linear operator between the spaces is bounded",
}


@dataclass(frozen=True)
class ClassificationReport:
    left: str
    right: str
    cell: str
    citation: str
    confidence: str
    resolved: str
    sub_verdicts: dict[str, Any] = field(default_factory=dict)
    notes: tuple[str, ...] = ()

    def to_dict(self):
        return {"left": self.left, "right": self.right, "cell": self.cell,
                "citation": self.citation, "confidence": self.confidence,
                "resolved": self.resolved, "sub_verdicts": self.sub_verdicts,
                "notes": list(self.notes)}


def _require_power_series(space: GradedSpace):
    if not isinstance(space, GradedSpace) or not space.is_power_series:
        label = getattr(space, "label", repr(space))
        raise UnsupportedSpace(f"{label} is not a power series space; use the Piszczek checker")


def _stable(report) -> bool | None:
    v = report.verdict.value
    if v is Verdict3.BOUNDED:
        return True
    if v is Verdict3.UNBOUNDED:
        return False
    return None


def _from_limit_points(est) -> str:
    return {Verdict3.BOUNDED: TAME, Verdict3.UNBOUNDED: NON_TAME}.get(est.verdict.value, UNDETERMINED)


def classify_pair(left: GradedSpace, right: GradedSpace, depth: int = 2000,
                  cutoff: float = 10.0, stability_depth: int = 10_000) -> ClassificationReport:
    """Place ``(left, right)`` in the tameness table; ``left`` is the domain (alpha)."""
    _require_power_series(left)
    _require_power_series(right)
    alpha, beta = left.seq, right.seq
    st_a = check_stability(alpha, stability_depth)
    st_b = check_stability(beta, stability_depth)
    subs = {"stability_left": st_a.to_dict(), "stability_right": st_b.to_dict()}
    analytic = st_a.analytic and st_b.analytic
    sa, sb = _stable(st_a), _stable(st_b)
    notes = []

    def report(cell, label, resolved=None, exact=analytic):
        return ClassificationReport(left.label, right.label, cell, CITATIONS[label],
                                    PROVEN if exact else NUMERICAL, resolved or cell,
                                    subs, tuple(notes))

    def limit_points():
        est = estimate_limit_points(beta, alpha, depth=depth, cutoff=cutoff)
        subs["limit_points"] = est.to_dict()
        return est

    if left.kind == FINITE:
        return report(TAME, "T2" if right.kind == FINITE else "P1", exact=True)

    if right.kind == FINITE:
        if sa or sb:
            return report(NON_TAME, "T4")
        if sa is False and sb is False:
            notes.append(NOTES["T3_rule"])
            return report(TAME, "T3")
        est = limit_points()
        cell = _from_limit_points(est)
        return report(cell if cell != UNDETERMINED else UNDETERMINED, "T3",
                      exact=analytic and est.analytic)

    # both infinite type
    if sa is False and sb is False:
        notes.append(NOTES["T1_nonstable"])
        return report(TAME, "T1")
    est = limit_points()
    resolved = _from_limit_points(est)
    exact = analytic and est.analytic
    if sa or sb:
        notes.append(NOTES["P2"])
        notes.append("resolved through the finite limit points of beta_i/alpha_j "
                     f"({est.verdict.value.value}) with {CITATIONS['T1']}")
        return report(TAME_IFF_BOUNDED, "P2", resolved=resolved, exact=exact)
    # stability undecided on at least one side: fall back on the limit point criterion
    return report(resolved if resolved != UNDETERMINED else TAME_IFF_BOUNDED, "T1",
                  resolved=resolved, exact=exact)


RATIO_SETS = {"T11": "(alpha_i/alpha_j)", "T12": "(beta_i/alpha_j)",
              "T21": "(alpha_i/beta_j)", "T22": "(beta_i/beta_j)"}


@dataclass(frozen=True)
class ProductReport:
    left: str
    right: str
    verdict: str
    confidence: str
    blocks: dict[str, ClassificationReport]
    ratio_sets: tuple[str, ...]

    def to_dict(self):
        return {"left": self.left, "right": self.right, "verdict": self.verdict,
                "confidence": self.confidence,
                "blocks": {k: v.to_dict() for k, v in self.blocks.items()},
                "ratio_sets_consulted": list(self.ratio_sets)}


def classify_product(left: GradedSpace, right: GradedSpace, depth: int = 2000,
                     cutoff: float = 10.0) -> ProductReport:
    """Classify ``left x right`` through its four operator blocks."""
    _require_power_series(left)
    _require_power_series(right)
    pairs = {"T11": (left, left), "T12": (left, right), "T21": (right, left), "T22": (right, right)}
    blocks = {k: classify_pair(a, b, depth, cutoff) for k, (a, b) in pairs.items()}
    # blocks with an infinite-type domain are the ones keyed on a ratio set
    consulted = tuple(RATIO_SETS[k] for k, (a, _) in pairs.items() if a.kind == INFINITE)
    outcomes = [b.resolved for b in blocks.values()]
    if all(o == TAME for o in outcomes):
        verdict = TAME
    elif NON_TAME in outcomes:
        verdict = NON_TAME
    else:
        verdict = UNDETERMINED
    confidence = PROVEN if all(b.confidence == PROVEN for b in blocks.values()) else NUMERICAL
    return ProductReport(left.label, right.label, verdict, confidence, blocks, consulted)
