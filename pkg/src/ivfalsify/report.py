"""Suite report container with deterministic JSON serialization."""
from __future__ import annotations

import json
from dataclasses import dataclass, field


@dataclass(frozen=True)
class Report:
    """Everything a falsification run produced, in stable order.

    ``results`` hold the primary test outcomes (the ones that decide
    rejection); ``diagnostics`` and ``qualification`` are informational.
    """

    plan: dict
    results: tuple
    caveats: tuple = ()
    diagnostics: tuple = ()
    qualification: tuple = ()
    meta: tuple = ()  # (key, value) pairs, e.g. scenario/seed/n

    @property
    def alpha(self) -> float:
        return float(self.plan["alpha"])

    @property
    def rejected(self) -> tuple:
        return tuple(r for r in self.results if r.p_value <= self.alpha)

    @property
    def exit_code(self) -> int:
        return 2 if self.rejected else 0

    def to_dict(self) -> dict:
        return {
            "plan": self.plan,
            "results": [r.to_dict() for r in self.results],
            "caveats": list(self.caveats),
            "diagnostics": [d.to_dict() for d in self.diagnostics],
            "qualification": [q for q in self.qualification],
            "meta": {k: v for k, v in self.meta},
            "verdict": "reject" if self.rejected else "pass",
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2) + "\n"

    def summary_lines(self) -> list:
        lines = []
        for r in self.results:
            flag = "REJECT" if r.p_value <= self.alpha else "pass  "
            lines.append(
                f"{flag} {r.kind:<18} p={r.p_value:.4g} stat={r.statistic:.4g}"
            )
        for c in self.caveats:
            lines.append(f"caveat: {c}")
        return lines


@dataclass(frozen=True)
class DiagnosticRow:
    nc: str
    abs_corr_iv: float
    abs_corr_outcome: float | None

    def to_dict(self) -> dict:
        return {
            "nc": self.nc,
            "abs_corr_iv": self.abs_corr_iv,
            "abs_corr_outcome": self.abs_corr_outcome,
        }
