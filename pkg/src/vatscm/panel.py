"""Monthly price-index panels and study-design windows."""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from types import MappingProxyType
from typing import Iterable, Iterator, Mapping

import numpy as np

from .errors import CoverageError, DataError

_MONTH_RE = re.compile(r"^(\d{4})-(\d{2})$")


@dataclass(frozen=True, order=True)
class MonthKey:
    year: int
    month: int

    def __post_init__(self) -> None:
        if not 1 <= self.month <= 12:
            raise ValueError(f"month must be in 1..12, got {self.month}")

    @classmethod
    def parse(cls, text: str) -> "MonthKey":
        """Parse strictly ``YYYY-MM``."""
        m = _MONTH_RE.match(text.strip())
        if m is None:
            raise ValueError(f"expected month as YYYY-MM, got {text!r}")
        return cls(int(m.group(1)), int(m.group(2)))

    @property
    def ordinal(self) -> int:
        return self.year * 12 + (self.month - 1)

    @classmethod
    def from_ordinal(cls, n: int) -> "MonthKey":
        return cls(n // 12, n % 12 + 1)

    def successor(self) -> "MonthKey":
        return self.shift(1)

    def shift(self, months: int) -> "MonthKey":
        return MonthKey.from_ordinal(self.ordinal + months)

    def __str__(self) -> str:
        return f"{self.year:04d}-{self.month:02d}"


def month_range(start: MonthKey, end: MonthKey) -> list[MonthKey]:
    """Inclusive list of months from ``start`` to ``end`` (empty if end < start)."""
    return [MonthKey.from_ordinal(n) for n in range(start.ordinal, end.ordinal + 1)]


def months_between(start: MonthKey, end: MonthKey) -> int:
    """Inclusive month count."""
    return max(0, end.ordinal - start.ordinal + 1)


@dataclass(frozen=True)
class PriceSeries:
    """One COICOP aggregate's monthly index values.

    ``observations`` is kept sorted by month and exposed read-only.
    Gaps and non-positive values are representable so that
    :func:`validate_panel` can report them; :meth:`slice` refuses them.
    """

    id: str
    label: str
    observations: Mapping[MonthKey, float] = field(default_factory=dict)

    def __post_init__(self) -> None:
        obs = {k: float(self.observations[k]) for k in sorted(self.observations)}
        object.__setattr__(self, "observations", MappingProxyType(obs))

    @classmethod
    def from_values(cls, id: str, label: str, start: MonthKey, values: Iterable[float]) -> "PriceSeries":
        return cls(id, label, {start.shift(i): float(v) for i, v in enumerate(values)})

    @property
    def first(self) -> MonthKey | None:
        return next(iter(self.observations), None)

    @property
    def last(self) -> MonthKey | None:
        return next(reversed(self.observations), None) if self.observations else None

    def __len__(self) -> int:
        return len(self.observations)

    def __iter__(self) -> Iterator[tuple[MonthKey, float]]:
        return iter(self.observations.items())

    def __getitem__(self, month: MonthKey) -> float:
        try:
            return self.observations[month]
        except KeyError:
            raise CoverageError(self.id, [month]) from None

    def missing_months(self, start: MonthKey, end: MonthKey) -> list[MonthKey]:
        return [m for m in month_range(start, end) if m not in self.observations]

    def gaps(self) -> list[MonthKey]:
        """Months absent between the first and last observation."""
        if not self.observations:
            return []
        return self.missing_months(self.first, self.last)

    def slice(self, start: MonthKey, end: MonthKey) -> np.ndarray:
        if end < start:
            raise ValueError(f"empty range {start}..{end}")
        missing = self.missing_months(start, end)
        if missing:
            raise CoverageError(self.id, missing)
        return np.array([self.observations[m] for m in month_range(start, end)], dtype=np.float64)

    def restrict(self, start: MonthKey, end: MonthKey) -> "PriceSeries":
        return PriceSeries(self.id, self.label, {m: v for m, v in self if start <= m <= end})

    def scaled(self, factor: float) -> "PriceSeries":
        return PriceSeries(self.id, self.label, {m: v * factor for m, v in self})

    def rebased(self, base: MonthKey, level: float = 100.0) -> "PriceSeries":
        """Rescale so the value at ``base`` equals ``level``."""
        return self.scaled(level / self[base])


def slice_series(series: PriceSeries, start: MonthKey, end: MonthKey) -> np.ndarray:
    return series.slice(start, end)


@dataclass(frozen=True)
class StudyDesign:
    pre_start: MonthKey
    pre_end: MonthKey
    treatment_start: MonthKey
    eval_end: MonthKey

    def __post_init__(self) -> None:
        if not (self.pre_start <= self.pre_end < self.treatment_start <= self.eval_end):
            raise ValueError(
                "design windows must satisfy pre_start <= pre_end < treatment_start <= eval_end, "
                f"got {self.pre_start}, {self.pre_end}, {self.treatment_start}, {self.eval_end}"
            )
        if self.treatment_start != self.pre_end.successor():
            raise ValueError("treatment_start must immediately follow pre_end")
        if self.pre_length < 2:
            raise ValueError("pre-treatment window needs at least 2 months")

    @classmethod
    def default(cls) -> "StudyDesign":
        """Twelve pre-months up to the announcement, evaluation through July 2024."""
        return cls(MonthKey(2022, 11), MonthKey(2023, 10), MonthKey(2023, 11), MonthKey(2024, 7))

    @classmethod
    def from_pre_window(cls, pre_start: MonthKey, pre_end: MonthKey, eval_end: MonthKey) -> "StudyDesign":
        return cls(pre_start, pre_end, pre_end.successor(), eval_end)

    @property
    def pre_length(self) -> int:
        return months_between(self.pre_start, self.pre_end)

    @property
    def post_length(self) -> int:
        return months_between(self.treatment_start, self.eval_end)

    def months(self) -> list[MonthKey]:
        return month_range(self.pre_start, self.eval_end)

    def pre_months(self) -> list[MonthKey]:
        return month_range(self.pre_start, self.pre_end)

    def post_months(self) -> list[MonthKey]:
        return month_range(self.treatment_start, self.eval_end)


@dataclass(frozen=True)
class Violation:
    message: str
    series_id: str | None = None
    month: MonthKey | None = None

    def __str__(self) -> str:
        where = []
        if self.series_id is not None:
            where.append(f"series {self.series_id}")
        if self.month is not None:
            where.append(f"month {self.month}")
        return self.message + (f" ({', '.join(where)})" if where else "")


@dataclass(frozen=True)
class Panel:
    treated: PriceSeries
    donors: tuple[PriceSeries, ...]
    design: StudyDesign
    rebased: bool = False

    def __post_init__(self) -> None:
        object.__setattr__(self, "donors", tuple(self.donors))

    @property
    def donor_ids(self) -> list[str]:
        return [d.id for d in self.donors]

    def donor(self, id: str) -> PriceSeries:
        for d in self.donors:
            if d.id == id:
                return d
        raise KeyError(id)

    def treated_vector(self, start: MonthKey | None = None, end: MonthKey | None = None) -> np.ndarray:
        return self.treated.slice(start or self.design.pre_start, end or self.design.eval_end)

    def donor_matrix(self, start: MonthKey | None = None, end: MonthKey | None = None) -> np.ndarray:
        """Months x donors array, columns in ``donor_ids`` order."""
        start = start or self.design.pre_start
        end = end or self.design.eval_end
        if not self.donors:
            return np.empty((months_between(start, end), 0))
        return np.column_stack([d.slice(start, end) for d in self.donors])

    def without_donor(self, id: str) -> "Panel":
        if id not in self.donor_ids:
            raise KeyError(id)
        return Panel(self.treated, tuple(d for d in self.donors if d.id != id), self.design, self.rebased)

    def as_placebo(self, id: str) -> "Panel":
        """Treat donor ``id`` as if treated; the real treated unit is dropped."""
        new_treated = self.donor(id)
        return Panel(new_treated, tuple(d for d in self.donors if d.id != id), self.design, self.rebased)

    def scaled(self, factor: float) -> "Panel":
        return Panel(self.treated.scaled(factor), tuple(d.scaled(factor) for d in self.donors), self.design, self.rebased)

    def rebase(self, level: float = 100.0) -> "Panel":
        """Rebase every series to ``level`` at ``pre_start``."""
        at = self.design.pre_start
        return Panel(
            self.treated.rebased(at, level),
            tuple(d.rebased(at, level) for d in self.donors),
            self.design,
            True,
        )


def validate_panel(panel: Panel) -> list[Violation]:
    """List every broken panel invariant; an empty list means the panel is usable."""
    out: list[Violation] = []
    design = panel.design
    ids = panel.donor_ids
    if panel.treated.id in ids:
        out.append(Violation("treated unit present in donor pool", panel.treated.id))
    seen: set[str] = set()
    for i in ids:
        if i in seen:
            out.append(Violation("duplicate donor id", i))
        seen.add(i)
    if len(panel.donors) < 2:
        out.append(Violation(f"donor pool needs at least 2 series, has {len(panel.donors)}"))
    for s in (panel.treated, *panel.donors):
        for m in s.missing_months(design.pre_start, design.eval_end):
            out.append(Violation("missing observation", s.id, m))
        for m, v in s:
            if not design.pre_start <= m <= design.eval_end:
                continue
            if not np.isfinite(v) or v <= 0:
                out.append(Violation(f"non-positive or non-finite value {v!r}", s.id, m))
    return out


def require_valid(panel: Panel) -> None:
    report = validate_panel(panel)
    if report:
        raise DataError("invalid panel: " + "; ".join(str(v) for v in report))
