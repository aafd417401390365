"""Non-decreasing maps N -> N used as grade maps (psi, phi, S)."""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import mpmath

from . import dsl
from .errors import GradeOutOfRange, InvalidDescriptor, ParseError
from .sequences import _eval_mp


@dataclass(frozen=True)
class MonotoneIntMap:
    """``affine``: k -> ceil(a*k + b); ``table``: explicit values; ``expr``: ceil of a DSL
    expression in ``k``.  Values are checked to be positive and non-decreasing
    wherever they are evaluated."""

    form: str
    a: Fraction = Fraction(1)
    b: Fraction = Fraction(0)
    table: tuple[int, ...] = ()
    text: str = ""

    def __post_init__(self):
        if self.form == "affine":
            object.__setattr__(self, "a", Fraction(self.a))
            object.__setattr__(self, "b", Fraction(self.b))
            if self.a < 0:
                raise InvalidDescriptor("affine grade map needs a >= 0")
            if self(1) < 1:
                raise InvalidDescriptor("grade map must take positive values")
        elif self.form == "table":
            vals = tuple(int(v) for v in self.table)
            if not vals or vals[0] < 1 or any(y < x for x, y in zip(vals, vals[1:])):
                raise InvalidDescriptor("table grade map must be positive and non-decreasing")
            object.__setattr__(self, "table", vals)
        elif self.form == "expr":
            object.__setattr__(self, "_node", dsl.parse_expression(self.text))
            prev = 0
            for k in range(1, 33):
                v = self(k)
                if v < max(prev, 1):
                    raise InvalidDescriptor(f"{self.text} is not positive and non-decreasing at k={k}")
                prev = v
        else:
            raise InvalidDescriptor(f"unknown grade map form {self.form!r}")

    @classmethod
    def affine(cls, a, b=0) -> "MonotoneIntMap":
        return cls("affine", Fraction(a), Fraction(b))

    @classmethod
    def from_table(cls, values) -> "MonotoneIntMap":
        return cls("table", table=tuple(values))

    @classmethod
    def parse(cls, text: str) -> "MonotoneIntMap":
        """Accept ``table:[...]``, affine text such as ``2*k+1``, or any DSL
        expression in ``k`` (``k^2``, ``2^k``)."""
        text = text.strip()
        if text.startswith("table:"):
            import json
            return cls.from_table(json.loads(text[len("table:"):]))
        node = dsl.parse_expression(text)
        from .sequences import _linear
        lin = _linear(node)
        if lin is not None:
            return cls.affine(Fraction(lin[0]).limit_denominator(10**6),
                              Fraction(lin[1]).limit_denominator(10**6))
        return cls("expr", text=text)

    def __call__(self, k: int) -> int:
        if k < 1:
            raise GradeOutOfRange(f"grade maps are defined for k >= 1, got {k}")
        if self.form == "affine":
            return math.ceil(self.a * k + self.b)
        if self.form == "table":
            if k > len(self.table):
                raise GradeOutOfRange(f"table grade map has only {len(self.table)} entries")
            return self.table[k - 1]
        return int(mpmath.ceil(_eval_mp(self._node, mpmath.mpf(k)) - mpmath.mpf("1e-12")))

    @property
    def size(self) -> int | None:
        return len(self.table) if self.form == "table" else None

    def to_text(self) -> str:
        if self.form == "affine":
            a = str(self.a) if self.a.denominator == 1 else f"({self.a})"
            if self.b == 0:
                return f"{a}*k"
            sign = "+" if self.b > 0 else "-"
            b = abs(self.b)
            return f"{a}*k{sign}{b if b.denominator == 1 else f'({b})'}"
        if self.form == "table":
            return "table:[" + ",".join(map(str, self.table)) + "]"
        return self.text

    def to_json(self):
        return self.to_text()

    @classmethod
    def from_json(cls, data) -> "MonotoneIntMap":
        try:
            return cls.parse(data)
        except ParseError as exc:
            raise InvalidDescriptor(str(exc)) from exc

    def __str__(self):
        return self.to_text()


IDENTITY = MonotoneIntMap.affine(1)


def builtin_phi_family(depth: int = 64) -> dict[str, MonotoneIntMap]:
    """The grade maps tried when a criterion quantifies over all phi."""
    return {
        "k": MonotoneIntMap.affine(1),
        "k^2": MonotoneIntMap.parse("k^2"),
        "2^k": MonotoneIntMap.from_table([2 ** k for k in range(1, depth + 1)]),
    }
