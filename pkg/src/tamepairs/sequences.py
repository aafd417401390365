"""Exponent sequences: descriptors, evaluation, validation, stability, merging.

Every sequence is 1-indexed and is evaluated on demand.  Three views are
available for each term:

* ``values(depth)``  -- float64 array, ``inf`` where a term overflows;
* ``log_values(depth)`` -- float64 array of ``log alpha_n``, always finite;
* ``exact(n)`` -- an :class:`mpmath.mpf` with an unbounded exponent range,
  used where weights such as ``k * n!`` exceed the float range.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Any

import mpmath
import numpy as np
from scipy.special import gammaln

from . import dsl
from .errors import IndexOutOfRange, InvalidDescriptor
from .verdicts import Verdict, Verdict3

DEFAULT_VALIDATION_DEPTH = 200


class ExponentSequence:
    """Base class for sequence descriptors.  Subclasses are frozen dataclasses."""

    family = "abstract"
    length: int | None = None  # finite tables only

    # --- subclass hooks -------------------------------------------------
    def _values(self, ns: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def _log_values(self, ns: np.ndarray) -> np.ndarray:
        with np.errstate(over="ignore", divide="ignore"):
            v = self._values(ns)
            out = np.log(v)
        bad = ~np.isfinite(out)
        for idx in np.flatnonzero(bad):
            out[idx] = float(mpmath.log(self.exact(int(ns[idx]))))
        return out

    def exact(self, n: int) -> mpmath.mpf:
        raise NotImplementedError

    def to_dsl(self) -> str:
        raise NotImplementedError

    # --- public API -----------------------------------------------------
    def _check(self, ns):
        ns = np.asarray(ns, dtype=np.int64)
        if ns.size and ns.min() < 1:
            raise IndexOutOfRange(f"sequence indices start at 1, got {int(ns.min())}")
        if self.length is not None and ns.size and ns.max() > self.length:
            raise IndexOutOfRange(
                f"index {int(ns.max())} beyond table of length {self.length}")
        return ns

    def values_at(self, ns) -> np.ndarray:
        ns = self._check(ns)
        with np.errstate(over="ignore"):
            return np.asarray(self._values(ns), dtype=np.float64)

    def log_values_at(self, ns) -> np.ndarray:
        ns = self._check(ns)
        return np.asarray(self._log_values(ns), dtype=np.float64)

    def values(self, depth: int) -> np.ndarray:
        return self.values_at(np.arange(1, depth + 1))

    def log_values(self, depth: int) -> np.ndarray:
        return self.log_values_at(np.arange(1, depth + 1))

    def eval(self, n: int) -> float:
        return float(self.values_at([n])[0])

    def log_eval(self, n: int) -> float:
        return float(self.log_values_at([n])[0])

    def to_json(self) -> dict[str, Any]:
        return {"dsl": self.to_dsl()}

    def __str__(self):
        return self.to_dsl()


def _num(v: float) -> str:
    return str(int(v)) if float(v).is_integer() else repr(float(v))


@dataclass(frozen=True)
class Affine(ExponentSequence):
    a: float = 1.0
    b: float = 0.0
    family = "affine"

    def _values(self, ns):
        return self.a * ns + self.b

    def exact(self, n):
        return mpmath.mpf(self.a) * n + self.b

    def to_dsl(self):
        if self.a == 1 and self.b == 0:
            return "n"
        head = "n" if self.a == 1 else f"{_num(self.a)}*n"
        if self.b == 0:
            return head
        return f"{head}{'+' if self.b > 0 else '-'}{_num(abs(self.b))}"


@dataclass(frozen=True)
class Power(ExponentSequence):
    p: float = 2.0
    family = "power"

    def _values(self, ns):
        return ns.astype(np.float64) ** self.p

    def _log_values(self, ns):
        return self.p * np.log(ns)

    def exact(self, n):
        return mpmath.mpf(n) ** self.p

    def to_dsl(self):
        return f"n^{_num(self.p)}"


@dataclass(frozen=True)
class Log(ExponentSequence):
    c: float = 1.0
    family = "log"

    def _values(self, ns):
        return np.log(ns + self.c)

    def exact(self, n):
        return mpmath.log(mpmath.mpf(n) + self.c)

    def to_dsl(self):
        return "ln(n)" if self.c == 0 else f"ln(n+{_num(self.c)})"


@dataclass(frozen=True)
class Geometric(ExponentSequence):
    q: float = 2.0
    family = "geometric"

    def _values(self, ns):
        return np.power(self.q, ns.astype(np.float64))

    def _log_values(self, ns):
        return ns * math.log(self.q)

    def exact(self, n):
        return mpmath.mpf(self.q) ** n

    def to_dsl(self):
        return "exp(n)" if self.q == math.e else f"{_num(self.q)}^n"


# exact n! as floats while they fit
_FACTORIALS = np.array([float(math.factorial(n)) for n in range(171)])


@lru_cache(maxsize=8192)
def _mp_factorial(n: int) -> mpmath.mpf:
    return mpmath.factorial(n)


@dataclass(frozen=True)
class Factorial(ExponentSequence):
    family = "factorial"

    def _values(self, ns):
        out = np.full(ns.shape, np.inf)
        small = ns <= 170
        out[small] = _FACTORIALS[ns[small]]
        return out

    def _log_values(self, ns):
        return gammaln(ns + 1.0)

    def exact(self, n):
        return _mp_factorial(int(n))

    def to_dsl(self):
        return "n!"


@dataclass(frozen=True)
class ExpPower(ExponentSequence):
    """``exp(n^p)``; ``p > 1`` gives the non-stable ``e^{n^2}``-style family."""

    p: float = 2.0
    family = "exp_power"

    def _values(self, ns):
        return np.exp(ns.astype(np.float64) ** self.p)

    def _log_values(self, ns):
        return ns.astype(np.float64) ** self.p

    def exact(self, n):
        return mpmath.exp(mpmath.mpf(n) ** self.p)

    def to_dsl(self):
        return f"exp(n^{_num(self.p)})"


@dataclass(frozen=True)
class Scaled(ExponentSequence):
    c: float = 1.0
    inner: ExponentSequence = field(default_factory=Affine)
    family = "scaled"

    def __post_init__(self):
        object.__setattr__(self, "length", self.inner.length)

    def _values(self, ns):
        return self.c * self.inner._values(ns)

    def _log_values(self, ns):
        return math.log(self.c) + self.inner._log_values(ns)

    def exact(self, n):
        return self.c * self.inner.exact(n)

    def to_dsl(self):
        inner = self.inner.to_dsl()
        if isinstance(self.inner, (Affine, Merge)) or "+" in inner or "-" in inner:
            inner = f"({inner})"
        return f"{_num(self.c)}*{inner}"


@dataclass(frozen=True)
class Table(ExponentSequence):
    """Explicit finite prefix.  ``logs`` may carry exact log values for terms
    whose plain value overflows (as produced by :func:`merge`)."""

    table: tuple[float, ...] = ()
    logs: tuple[float, ...] | None = None
    family = "table"

    def __post_init__(self):
        vals = tuple(float(v) for v in self.table)
        object.__setattr__(self, "table", vals)
        object.__setattr__(self, "length", len(vals))
        if self.logs is not None:
            if len(self.logs) != len(vals):
                raise InvalidDescriptor("table and log table differ in length")
            object.__setattr__(self, "logs", tuple(float(v) for v in self.logs))
        if len(vals) < 2:
            raise InvalidDescriptor("a table needs at least two terms")

    @property
    def _logs(self):
        if self.logs is not None:
            return np.array(self.logs)
        with np.errstate(divide="ignore"):
            return np.log(np.array(self.table))

    def _values(self, ns):
        return np.array(self.table)[ns - 1]

    def _log_values(self, ns):
        return self._logs[ns - 1]

    def exact(self, n):
        self._check([n])
        v = self.table[n - 1]
        if math.isfinite(v) or self.logs is None:
            return mpmath.mpf(v)
        return mpmath.exp(mpmath.mpf(self.logs[n - 1]))

    def to_dsl(self):
        return "table:" + json.dumps([float(v) for v in self.table])

    def to_json(self):
        out = {"table": [float(v) for v in self.table]}
        if self.logs is not None:
            out["log_table"] = list(self.logs)
        return out


@dataclass(frozen=True)
class Merge(ExponentSequence):
    """Sorted union with multiplicity of two infinite sequences (left-first ties)."""

    left: ExponentSequence = field(default_factory=Affine)
    right: ExponentSequence = field(default_factory=Affine)
    family = "merge"

    def __post_init__(self):
        if self.left.length is not None or self.right.length is not None:
            raise InvalidDescriptor("merge() in the DSL needs two unbounded sequences; "
                                    "use merge(left, right, depth) for tables")

    def _order(self, depth):
        return _merge_order(self.left, self.right, depth)

    def _values(self, ns):
        src, idx = self._order(int(ns.max()) if ns.size else 1)
        lv = self.left.values(len(src))
        rv = self.right.values(len(src))
        pick = np.where(src == 0, lv[idx - 1], rv[idx - 1])
        return pick[ns - 1]

    def _log_values(self, ns):
        src, idx = self._order(int(ns.max()) if ns.size else 1)
        lv = self.left.log_values(len(src))
        rv = self.right.log_values(len(src))
        pick = np.where(src == 0, lv[idx - 1], rv[idx - 1])
        return pick[ns - 1]

    def exact(self, n):
        src, idx = self._order(n)
        side = self.left if src[n - 1] == 0 else self.right
        return side.exact(int(idx[n - 1]))

    def to_dsl(self):
        return f"merge({self.left.to_dsl()},{self.right.to_dsl()})"


@dataclass(frozen=True)
class Expr(ExponentSequence):
    """Generic DSL expression without a recognized built-in family."""

    node: tuple = ("var",)
    family = "expr"

    def _values(self, ns):
        with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
            return np.broadcast_to(_eval_numpy(self.node, ns.astype(np.float64)), ns.shape).copy()

    def exact(self, n):
        return _eval_mp(self.node, mpmath.mpf(n))

    def to_dsl(self):
        return dsl.format_node(self.node)


# ---------------------------------------------------------------------------
# expression evaluation for Expr


def _eval_numpy(node, n):
    tag = node[0]
    if tag == "num":
        return np.float64(node[1])
    if tag == "var":
        return n
    if tag == "neg":
        return -_eval_numpy(node[1], n)
    if tag == "fact":
        return np.exp(gammaln(_eval_numpy(node[1], n) + 1.0))
    if tag == "call":
        if node[1] == "merge":
            raise InvalidDescriptor("merge() cannot appear inside an arithmetic expression")
        fn = {"ln": np.log, "exp": np.exp, "sqrt": np.sqrt}[node[1]]
        return fn(_eval_numpy(node[2][0], n))
    a, b = _eval_numpy(node[1], n), _eval_numpy(node[2], n)
    return {"add": np.add, "sub": np.subtract, "mul": np.multiply,
            "div": np.divide, "pow": np.power}[tag](a, b)


def _eval_mp(node, n):
    tag = node[0]
    if tag == "num":
        return mpmath.mpf(node[1])
    if tag == "var":
        return n
    if tag == "neg":
        return -_eval_mp(node[1], n)
    if tag == "fact":
        return mpmath.factorial(_eval_mp(node[1], n))
    if tag == "call":
        fn = {"ln": mpmath.log, "exp": mpmath.exp, "sqrt": mpmath.sqrt}[node[1]]
        return fn(_eval_mp(node[2][0], n))
    a, b = _eval_mp(node[1], n), _eval_mp(node[2], n)
    if tag == "add":
        return a + b
    if tag == "sub":
        return a - b
    if tag == "mul":
        return a * b
    if tag == "div":
        return a / b
    return a ** b


# ---------------------------------------------------------------------------
# parsing


def _linear(node):
    """Return (a, b) when node is a*n + b, else None."""
    tag = node[0]
    c = dsl.constant_value(node)
    if c is not None:
        return (0.0, c)
    if tag == "var":
        return (1.0, 0.0)
    if tag == "neg":
        r = _linear(node[1])
        return None if r is None else (-r[0], -r[1])
    if tag in ("add", "sub"):
        x, y = _linear(node[1]), _linear(node[2])
        if x is None or y is None:
            return None
        s = 1 if tag == "add" else -1
        return (x[0] + s * y[0], x[1] + s * y[1])
    if tag == "mul":
        x, y = _linear(node[1]), _linear(node[2])
        if x is None or y is None or (x[0] and y[0]):
            return None
        return (x[0] * y[1] + y[0] * x[1], x[1] * y[1])
    if tag == "div":
        x, d = _linear(node[1]), dsl.constant_value(node[2])
        if x is None or not d:
            return None
        return (x[0] / d, x[1] / d)
    return None


def _recognize(node) -> ExponentSequence:
    tag = node[0]
    lin = _linear(node)
    if lin is not None:
        if lin[0] <= 0:
            raise InvalidDescriptor("a constant or decreasing affine expression does not tend to infinity")
        return Affine(lin[0], lin[1])
    if tag == "fact" and node[1] == ("var",):
        return Factorial()
    if tag == "pow":
        base, expo = node[1], node[2]
        bc, ec = dsl.constant_value(base), dsl.constant_value(expo)
        if base == ("var",) and ec is not None:
            return Power(ec) if ec != 1 else Affine(1.0, 0.0)
        if bc is not None and expo == ("var",):
            return Geometric(bc)
        if bc is not None and bc == math.e and expo[0] == "pow" and expo[1] == ("var",):
            pc = dsl.constant_value(expo[2])
            if pc is not None:
                return ExpPower(pc)
    if tag == "call":
        name, args = node[1], node[2]
        if name == "merge":
            return Merge(_recognize(args[0]), _recognize(args[1]))
        arg = args[0]
        if name == "ln":
            la = _linear(arg)
            if la is not None and la[0] == 1:
                return Log(la[1])
        if name == "exp":
            if arg == ("var",):
                return Geometric(math.e)
            if arg[0] == "pow" and arg[1] == ("var",):
                pc = dsl.constant_value(arg[2])
                if pc is not None:
                    return ExpPower(pc)
        if name == "sqrt" and arg == ("var",):
            return Power(0.5)
    if tag == "mul":
        for c_node, other in ((node[1], node[2]), (node[2], node[1])):
            c = dsl.constant_value(c_node)
            if c is not None:
                if c <= 0:
                    raise InvalidDescriptor("scale factor must be positive")
                inner = _recognize(other)
                if isinstance(inner, Scaled):
                    return Scaled(c * inner.c, inner.inner)
                return Scaled(c, inner)
    if tag == "call" and node[1] == "merge":
        raise InvalidDescriptor("merge() must be the outermost expression")
    return Expr(node)


def parse_sequence(text: str, validate_depth: int | None = DEFAULT_VALIDATION_DEPTH) -> ExponentSequence:
    """Parse DSL text such as ``"n!"``, ``"ln(n+1)"`` or ``"table:[1,2,4]"``."""
    text = text.strip()
    if text.startswith("table:"):
        try:
            raw = json.loads(text[len("table:"):])
        except json.JSONDecodeError as exc:
            raise InvalidDescriptor(f"bad table literal: {exc}") from exc
        seq = table_from_json(raw)
    else:
        seq = _recognize(dsl.parse_expression(text))
    if validate_depth:
        validate(seq, validate_depth)
    return seq


def table_from_json(raw) -> Table:
    if isinstance(raw, dict):
        seq = Table(tuple(raw["table"]), tuple(raw["log_table"]) if "log_table" in raw else None)
    else:
        if not isinstance(raw, list) or not all(isinstance(v, (int, float)) for v in raw):
            raise InvalidDescriptor("a table must be a JSON array of numbers")
        seq = Table(tuple(raw))
    validate(seq)
    return seq


def sequence_from_json(data) -> ExponentSequence:
    if isinstance(data, str):
        return parse_sequence(data)
    if isinstance(data, list) or "table" in data:
        return table_from_json(data)
    return parse_sequence(data["dsl"])


# ---------------------------------------------------------------------------
# validation and evaluation


def validate(seq: ExponentSequence, depth: int | None = None) -> None:
    """Check positivity, monotonicity and divergence on a prefix."""
    depth = seq.length if seq.length is not None else (depth or DEFAULT_VALIDATION_DEPTH)
    depth = min(depth, seq.length) if seq.length is not None else depth
    vals = seq.values(depth)
    logs = seq.log_values(depth)
    if np.any(np.isnan(vals)) or np.any(np.isnan(logs)):
        raise InvalidDescriptor(f"{seq} is undefined on its first {depth} terms")
    if np.any(vals <= 0):
        n = int(np.flatnonzero(vals <= 0)[0]) + 1
        raise InvalidDescriptor(f"{seq} is not positive at n={n}")
    drop = np.diff(logs) < 0
    finite = np.isfinite(vals)
    with np.errstate(invalid="ignore"):
        drop |= (np.diff(vals) < 0) & finite[1:] & finite[:-1]
    if np.any(drop):
        n = int(np.flatnonzero(drop)[0]) + 1
        raise InvalidDescriptor(f"{seq} decreases between n={n} and n={n + 1}")
    if seq.length is not None and not logs[-1] > logs[0]:
        raise InvalidDescriptor("table must end strictly above its first value")


def eval_term(seq: ExponentSequence, n: int) -> float:
    """Return the n-th term (1-indexed)."""
    if n < 1:
        raise IndexOutOfRange("n must be at least 1")
    return seq.eval(n)


# ---------------------------------------------------------------------------
# stability


@dataclass(frozen=True)
class StabilityReport:
    sup_ratio_observed: float
    depth: int
    verdict: Verdict
    analytic: bool

    def to_dict(self):
        return {"sup_ratio_observed": self.sup_ratio_observed, "depth": self.depth,
                "verdict": self.verdict.to_dict(), "analytic": self.analytic}


def analytic_stability(seq: ExponentSequence):
    """Return ``(verdict, sup_ratio, rule)`` from the family rule table, or None."""
    if isinstance(seq, Scaled):
        return analytic_stability(seq.inner)
    if isinstance(seq, Affine):
        return Verdict3.BOUNDED, (2 * seq.a + seq.b) / (seq.a + seq.b), "affine: ratio 1+a/(an+b) decreases"
    if isinstance(seq, Power):
        return Verdict3.BOUNDED, 2.0 ** seq.p, "power: ratio (1+1/n)^p decreases"
    if isinstance(seq, Log):
        return Verdict3.BOUNDED, math.log(2 + seq.c) / math.log(1 + seq.c), "log: ratio decreases to 1"
    if isinstance(seq, Geometric):
        return Verdict3.BOUNDED, seq.q, "geometric: constant ratio q"
    if isinstance(seq, Factorial):
        return Verdict3.UNBOUNDED, math.inf, "factorial: ratio n+1"
    if isinstance(seq, ExpPower):
        if seq.p > 1:
            return Verdict3.UNBOUNDED, math.inf, "exp(n^p), p>1: log ratio (n+1)^p-n^p grows"
        if seq.p == 1:
            return Verdict3.BOUNDED, math.e, "exp(n): constant ratio e"
        return Verdict3.BOUNDED, math.exp(2 ** seq.p - 1), "exp(n^p), p<1: ratio decreases to 1"
    if isinstance(seq, Merge):
        a, b = analytic_stability(seq.left), analytic_stability(seq.right)
        if a and b and a[0] is Verdict3.BOUNDED and b[0] is Verdict3.BOUNDED:
            return Verdict3.BOUNDED, max(a[1], b[1]), "merge of two stable sequences is stable"
    return None


def ratio_tends_to_one(seq: ExponentSequence) -> bool:
    """True for families whose consecutive ratio converges to 1."""
    if isinstance(seq, Scaled):
        return ratio_tends_to_one(seq.inner)
    if isinstance(seq, (Affine, Power, Log)):
        return True
    if isinstance(seq, ExpPower):
        return seq.p < 1
    if isinstance(seq, Merge):
        return ratio_tends_to_one(seq.left) and ratio_tends_to_one(seq.right)
    return False


def check_stability(seq: ExponentSequence, depth: int = 10_000) -> StabilityReport:
    """Decide whether sup alpha_{n+1}/alpha_n is finite."""
    if depth < 2:
        raise InvalidDescriptor("stability needs depth >= 2")
    if seq.length is not None:
        depth = min(depth, seq.length)
    logs = seq.log_values(depth)
    dlog = np.diff(logs)
    if np.any(dlog < 0):
        raise InvalidDescriptor(f"{seq} is not monotone")
    arg = int(np.argmax(dlog))
    with np.errstate(over="ignore"):
        observed = float(np.exp(dlog[arg]))
    evidence = {"argmax_n": arg + 1, "log_sup_ratio": float(dlog[arg]), "depth": depth}
    rule = analytic_stability(seq)
    if rule is not None:
        value, sup, text = rule
        evidence.update(rule=text, numeric_sup_ratio=observed)
        if value is Verdict3.BOUNDED:
            observed = sup
        return StabilityReport(max(1.0, observed), depth, Verdict(value, evidence), True)
    tail = dlog[-max(2, len(dlog) // 4):]
    increasing = bool(np.all(np.diff(tail) > 0))
    evidence.update(rule="numeric scan only", tail_ratio_increasing=increasing,
                    leaning="Unbounded" if increasing else "none")
    return StabilityReport(max(1.0, observed), depth, Verdict(Verdict3.INCONCLUSIVE, evidence), False)


# ---------------------------------------------------------------------------
# merging


@lru_cache(maxsize=64)
def _merge_order(left, right, depth):
    lk, rk = left.log_values(depth), right.log_values(depth)
    lv, rv = left.values(depth), right.values(depth)
    logs = np.concatenate([lk, rk])
    vals = np.concatenate([lv, rv])
    src = np.repeat([0, 1], depth)
    idx = np.concatenate([np.arange(1, depth + 1)] * 2)
    order = np.lexsort((idx, src, vals, logs))
    src, idx = src[order][:depth], idx[order][:depth]
    src.setflags(write=False)
    idx.setflags(write=False)
    return src, idx


@dataclass(frozen=True)
class MergedSequence:
    gamma: Table
    t: tuple[int, ...]
    s: tuple[int, ...]
    left: ExponentSequence
    right: ExponentSequence

    @property
    def depth(self):
        return len(self.t)

    def to_dict(self):
        return {"gamma": self.gamma.to_json(), "t": list(self.t), "s": list(self.s),
                "left": self.left.to_json(), "right": self.right.to_json()}


def merge(left: ExponentSequence, right: ExponentSequence, depth: int) -> MergedSequence:
    """Merge the first ``depth`` terms of two sequences, keeping duplicates.

    Ties are broken left-first, and both index maps are strictly increasing.
    """
    for seq in (left, right):
        if seq.length is not None and seq.length < depth:
            raise InvalidDescriptor(f"{seq} has only {seq.length} terms, need {depth}")
        validate(seq, depth)
    lk, rk = left.log_values(depth), right.log_values(depth)
    lv, rv = left.values(depth), right.values(depth)
    logs = np.concatenate([lk, rk])
    vals = np.concatenate([lv, rv])
    src = np.repeat([0, 1], depth)
    idx = np.concatenate([np.arange(1, depth + 1)] * 2)
    order = np.lexsort((idx, src, vals, logs))
    pos = np.empty(2 * depth, dtype=np.int64)
    pos[order] = np.arange(1, 2 * depth + 1)
    gamma = Table(tuple(vals[order]), tuple(logs[order]))
    return MergedSequence(gamma, tuple(int(p) for p in pos[:depth]),
                          tuple(int(p) for p in pos[depth:]), left, right)
