"""Three-valued numerical verdicts with attached evidence."""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Any


class Verdict3(str, enum.Enum):
    BOUNDED = "Bounded"
    UNBOUNDED = "Unbounded"
    INCONCLUSIVE = "Inconclusive"


@dataclass(frozen=True)
class Verdict:
    value: Verdict3
    evidence: dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        if not self.evidence:
            raise ValueError("a verdict needs non-empty evidence")

    def to_dict(self) -> dict[str, Any]:
        return {"value": self.value.value, "evidence": dict(self.evidence)}

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "Verdict":
        return cls(Verdict3(data["value"]), dict(data["evidence"]))
