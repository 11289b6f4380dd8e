"""Structured verdicts shared by the checking operations."""

from __future__ import annotations

from dataclasses import dataclass, field

__all__ = ["PASS", "FAIL", "INCONCLUSIVE", "Report"]

PASS = "PASS"
FAIL = "FAIL"
INCONCLUSIVE = "INCONCLUSIVE"


@dataclass
class Report:
    """Verdict plus the evidence behind it.

    ``slack`` is the signed margin of the decisive inequality (positive =
    comfortable), ``witness`` names the point/direction that decided a
    FAIL, ``tolerances`` echoes every tolerance that was in effect, and
    ``details`` carries operation-specific values and sub-reports.
    """

    name: str
    verdict: str
    slack: float = 0.0
    witness: dict = field(default_factory=dict)
    tolerances: dict = field(default_factory=dict)
    details: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return self.verdict == PASS

    def to_dict(self) -> dict:
        def plain(v):
            if isinstance(v, Report):
                return v.to_dict()
            if isinstance(v, dict):
                return {k: plain(x) for k, x in sorted(v.items())}
            if isinstance(v, (list, tuple)):
                return [plain(x) for x in v]
            if hasattr(v, "tolist"):
                return v.tolist()
            if isinstance(v, (bool, int, str)) or v is None:
                return v
            return float(v)

        return {
            "name": self.name,
            "verdict": self.verdict,
            "slack": plain(self.slack),
            "witness": plain(self.witness),
            "tolerances": plain(self.tolerances),
            "details": plain(self.details),
        }

    def summary(self) -> str:
        extra = ""
        if self.witness:
            parts = ", ".join(f"{k}={v}" for k, v in sorted(self.witness.items()))
            extra = f"  [{parts}]"
        return f"{self.verdict:12s} {self.name}{extra}"
