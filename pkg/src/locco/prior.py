"""Count-based logic prior over logical-form parts.

Each part ``s`` carries a smoothed count ``Θ_s = τ + n_s`` where ``n_s`` is the
number of observed occurrences; ``θ_s = Θ_s / ΣΘ``.  Raw integer occurrences
are what get stored and merged so that τ is never counted twice.
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path

from .logical_forms import LogicalForm, part_counts

HEADER_PREFIX = "#locco-prior"


class PriorError(ValueError):
    pass


class NonPositiveSmoothing(PriorError):
    pass


class EmptyTableQuery(PriorError):
    pass


@dataclass
class PriorTable:
    tau: float = 1.0
    occurrences: dict[str, int] = field(default_factory=dict)
    n_observed: int = 0
    iteration: int = 0

    def __post_init__(self):
        if not self.tau > 0 or not math.isfinite(self.tau):
            raise NonPositiveSmoothing(f"tau must be positive, got {self.tau}")

    def __len__(self) -> int:
        return len(self.occurrences)

    def __contains__(self, part: str) -> bool:
        return part in self.occurrences

    def count(self, part: str) -> float:
        """Smoothed count Θ_s (0.0 for parts never observed)."""
        n = self.occurrences.get(part)
        return 0.0 if n is None else n + self.tau

    @property
    def total(self) -> float:
        return self.n_observed + self.tau * len(self.occurrences)

    def theta(self, part: str) -> float:
        return self.count(part) / self.total

    def observe(self, form: LogicalForm) -> "PriorTable":
        self.observe_counts(part_counts(form))
        return self

    def observe_counts(self, counts: Counter) -> None:
        for part, n in counts.items():
            self.occurrences[part] = self.occurrences.get(part, 0) + n
            self.n_observed += n

    def part_logprob(self, part: str, total: float | None = None) -> float:
        total = self.total if total is None else total
        n = self.occurrences.get(part)
        if n is None:
            # unseen part: pseudo-count τ against an enlarged denominator
            return math.log(self.tau / (total + self.tau))
        return math.log((n + self.tau) / total)

    def logprob(self, form: LogicalForm) -> float:
        counts = part_counts(form)
        if not counts:
            return 0.0
        total = self.total
        if total == 0:
            raise EmptyTableQuery("prior table has no observations")
        return math.fsum(k * self.part_logprob(p, total) for p, k in counts.items())

    def snapshot(self) -> "PriorTable":
        return PriorTable(self.tau, dict(self.occurrences), self.n_observed, self.iteration)

    def merge(self, other: "PriorTable") -> "PriorTable":
        if other.tau != self.tau:
            raise PriorError(f"cannot merge tables with tau {self.tau} and {other.tau}")
        merged = self.snapshot()
        merged.observe_counts(Counter(other.occurrences))
        return merged

    def probabilities(self) -> dict[str, float]:
        total = self.total
        return {p: (n + self.tau) / total for p, n in self.occurrences.items()}

    def save(self, path: str | Path) -> None:
        lines = [f"{HEADER_PREFIX}\ttau={self.tau!r}\ttotal={self.total!r}\titeration={self.iteration}"]
        for part in sorted(self.occurrences):
            lines.append(f"{part}\t{self.count(part)!r}")
        Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")

    @classmethod
    def load(cls, path: str | Path) -> "PriorTable":
        lines = Path(path).read_text(encoding="utf-8").splitlines()
        if not lines or not lines[0].startswith(HEADER_PREFIX):
            raise PriorError(f"{path}: missing prior header")
        header = dict(kv.split("=", 1) for kv in lines[0].split("\t")[1:])
        table = cls(float(header["tau"]), iteration=int(header.get("iteration", 0)))
        for line in lines[1:]:
            part, value = line.rsplit("\t", 1)
            smoothed = float(value)
            n = round(smoothed - table.tau)
            if n < 0 or n + table.tau != smoothed:
                raise PriorError(f"{path}: count {value} inconsistent with tau {table.tau}")
            table.occurrences[part] = n
            table.n_observed += n
        if table.total != float(header["total"]):
            raise PriorError(f"{path}: total mismatch")
        return table


def init_prior(tau: float = 1.0) -> PriorTable:
    return PriorTable(tau)


def observe(table: PriorTable, form: LogicalForm) -> PriorTable:
    return table.observe(form)


def prior_from_forms(forms, tau: float = 1.0, iteration: int = 0) -> PriorTable:
    table = PriorTable(tau, iteration=iteration)
    for form in forms:
        table.observe(form)
    return table
