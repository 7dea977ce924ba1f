"""Pipeline configuration and long-format CSV price data.

CSV wire format (UTF-8)::

    series_id,label,month,value
    CC13-11111,"Restaurants, cafes",2022-11,118.3

One row per series and month, months strictly ``YYYY-MM``, values use ``.``
as decimal separator. Row order does not matter.

Configuration is a flat TOML file; README.md lists every key.
"""

from __future__ import annotations

import csv
import io
import re
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .errors import ConfigError, CoverageError, DataError
from .panel import MonthKey, Panel, PriceSeries, StudyDesign, require_valid
from .passthrough import TaxChange
from .scm import SolverOptions

HEADER = ["series_id", "label", "month", "value"]
_NUMBER_RE = re.compile(r"^[+-]?(\d+(\.\d*)?|\.\d+)([eE][+-]?\d+)?$")

_KEYS = {
    "treated_id", "donor_ids", "data", "total_cpi_id", "output_dir",
    "pre_start", "pre_end", "treatment_start", "eval_end",
    "tax_old", "tax_new",
    "tolerance", "kkt_tol", "max_iters", "solver_method",
    "rebase", "trim_poor_fit", "workers",
}


@dataclass(frozen=True)
class PipelineConfig:
    treated_id: str
    donor_ids: tuple[str, ...]
    design: StudyDesign = field(default_factory=StudyDesign.default)
    tax_old: float = 0.07
    tax_new: float = 0.19
    solver: SolverOptions = field(default_factory=SolverOptions)
    output_dir: Path = Path("out")
    data: tuple[Path, ...] = ()
    total_cpi_id: str | None = None
    rebase: bool = False
    trim_poor_fit: bool = False
    workers: int = 1

    def __post_init__(self) -> None:
        object.__setattr__(self, "donor_ids", tuple(self.donor_ids))
        object.__setattr__(self, "data", tuple(Path(p) for p in self.data))
        object.__setattr__(self, "output_dir", Path(self.output_dir))
        if not self.donor_ids:
            raise ConfigError("donor pool is empty", field="donor_ids")
        if len(set(self.donor_ids)) != len(self.donor_ids):
            dup = sorted({d for d in self.donor_ids if self.donor_ids.count(d) > 1})
            raise ConfigError(f"duplicate donor ids {dup}", field="donor_ids")
        if self.treated_id in self.donor_ids:
            raise ConfigError(f"treated unit {self.treated_id!r} listed as donor", field="donor_ids")
        if self.tax_new == self.tax_old:
            raise ConfigError("degenerate tax change", field="tax_new")
        if not 0.0 <= self.tax_old < self.tax_new < 1.0:
            raise ConfigError("expected 0 <= tax_old < tax_new < 1", field="tax_old")
        if self.workers < 1:
            raise ConfigError("must be >= 1", field="workers")

    @property
    def tax(self) -> TaxChange:
        return TaxChange(self.tax_old, self.tax_new)

    def resolved(self) -> dict:
        """Plain-data view of every setting, used for hashing and reports."""
        d = self.design
        return {
            "treated_id": self.treated_id,
            "donor_ids": list(self.donor_ids),
            "total_cpi_id": self.total_cpi_id,
            "pre_start": str(d.pre_start),
            "pre_end": str(d.pre_end),
            "treatment_start": str(d.treatment_start),
            "eval_end": str(d.eval_end),
            "tax_old": self.tax_old,
            "tax_new": self.tax_new,
            "tolerance": self.solver.tolerance,
            "kkt_tol": self.solver.kkt_tol,
            "max_iters": self.solver.max_iters,
            "solver_method": self.solver.method,
            "rebase": self.rebase,
            "trim_poor_fit": self.trim_poor_fit,
            "data": [p.name for p in self.data],
        }


def _month(raw: dict, key: str) -> MonthKey | None:
    if key not in raw:
        return None
    try:
        return MonthKey.parse(str(raw[key]))
    except ValueError as exc:
        raise ConfigError(str(exc), field=key) from None


def _typed(raw: dict, key: str, kind, default):
    if key not in raw:
        return default
    v = raw[key]
    if kind is float and isinstance(v, int) and not isinstance(v, bool):
        v = float(v)
    if not isinstance(v, kind) or (kind is int and isinstance(v, bool)):
        raise ConfigError(f"expected {kind.__name__}, got {type(v).__name__}", field=key)
    return v


def _str_list(raw: dict, key: str) -> list[str] | None:
    if key not in raw:
        return None
    v = raw[key]
    if isinstance(v, str):
        v = [v]
    if not isinstance(v, list) or not all(isinstance(x, str) for x in v):
        raise ConfigError("expected a list of strings", field=key)
    return v


def _design(raw: dict) -> StudyDesign:
    default = StudyDesign.default()
    pre_start = _month(raw, "pre_start") or default.pre_start
    pre_end = _month(raw, "pre_end") or default.pre_end
    eval_end = _month(raw, "eval_end") or default.eval_end
    treatment_start = _month(raw, "treatment_start") or pre_end.successor()
    try:
        return StudyDesign(pre_start, pre_end, treatment_start, eval_end)
    except ValueError as exc:
        key = "treatment_start" if "treatment_start" in raw else "pre_end"
        raise ConfigError(str(exc), field=key) from None


def parse_config(text: str, base_dir: Path | None = None) -> PipelineConfig:
    try:
        raw = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        m = re.search(r"line (\d+)", str(exc))
        line = int(m.group(1)) if m else None
        context = ""
        if line is not None:
            lines = text.splitlines()
            if 0 < line <= len(lines):
                context = f": {lines[line - 1].strip()!r}"
        raise ConfigError(f"{exc}{context}", line=line) from None
    for k, v in raw.items():
        if k not in _KEYS:
            raise ConfigError("unknown key", field=k)
        if isinstance(v, dict):
            raise ConfigError("nested tables are not supported", field=k)
    if "treated_id" not in raw:
        raise ConfigError("required", field="treated_id")
    donors = _str_list(raw, "donor_ids")
    if donors is None:
        raise ConfigError("required", field="donor_ids")
    base = Path(base_dir) if base_dir is not None else Path(".")
    data = [base / p for p in (_str_list(raw, "data") or [])]
    out = base / _typed(raw, "output_dir", str, "out")
    try:
        solver = SolverOptions(
            tolerance=_typed(raw, "tolerance", float, 1e-10),
            kkt_tol=_typed(raw, "kkt_tol", float, 1e-7),
            max_iters=_typed(raw, "max_iters", int, 100_000),
            method=_typed(raw, "solver_method", str, "apg"),
        )
    except ValueError as exc:
        raise ConfigError(str(exc), field="solver_method") from None
    return PipelineConfig(
        treated_id=_typed(raw, "treated_id", str, None),
        donor_ids=tuple(donors),
        design=_design(raw),
        tax_old=_typed(raw, "tax_old", float, 0.07),
        tax_new=_typed(raw, "tax_new", float, 0.19),
        solver=solver,
        output_dir=out,
        data=tuple(data),
        total_cpi_id=_typed(raw, "total_cpi_id", str, None),
        rebase=_typed(raw, "rebase", bool, False),
        trim_poor_fit=_typed(raw, "trim_poor_fit", bool, False),
        workers=_typed(raw, "workers", int, 1),
    )


def load_config(path: str | Path) -> PipelineConfig:
    path = Path(path)
    text = path.read_text(encoding="utf-8")
    return parse_config(text, base_dir=path.parent)


@dataclass
class _Rows:
    labels: dict[str, str] = field(default_factory=dict)
    values: dict[str, dict[MonthKey, tuple[float, str]]] = field(default_factory=dict)


def _read_rows(paths: Iterable[str | Path], wanted: set[str] | None) -> _Rows:
    rows = _Rows()
    for path in paths:
        path = Path(path)
        text = path.read_text(encoding="utf-8")
        reader = csv.reader(io.StringIO(text, newline=""))
        header = next(reader, None)
        if header is None or [h.strip().lstrip("﻿") for h in header] != HEADER:
            raise DataError(f"{path}: expected header {','.join(HEADER)}, got {header}")
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            where = f"{path.name}:{lineno}"
            if len(row) != 4:
                raise DataError(f"{where}: expected 4 fields, got {len(row)}")
            sid, label, month_s, value_s = (c.strip() for c in row)
            try:
                month = MonthKey.parse(month_s)
            except ValueError as exc:
                raise DataError(f"{where}: {exc}") from None
            if not _NUMBER_RE.match(value_s):
                raise DataError(f"{where}: malformed value {value_s!r}")
            if wanted is not None and sid not in wanted:
                continue
            value = float(value_s)
            if not value > 0:
                raise DataError(f"{where}: non-positive value {value_s!r} for series {sid} at {month}")
            series = rows.values.setdefault(sid, {})
            if month in series:
                raise DataError(f"{where}: duplicate row for series {sid} at {month} (first at {series[month][1]})")
            series[month] = (value, where)
            rows.labels.setdefault(sid, label)
    return rows


def load_series(csv_paths: Sequence[str | Path], ids: Sequence[str] | None = None) -> dict[str, PriceSeries]:
    """Read the requested series (all series when ``ids`` is None)."""
    wanted = set(ids) if ids is not None else None
    rows = _read_rows(csv_paths, wanted)
    if ids is not None:
        missing = [i for i in ids if i not in rows.values]
        if missing:
            raise DataError(f"unknown series id(s) requested: {', '.join(missing)}")
    order = list(ids) if ids is not None else sorted(rows.values)
    return {
        i: PriceSeries(i, rows.labels[i], {m: v for m, (v, _) in rows.values[i].items()})
        for i in order
    }


def load_panel(csv_paths: Sequence[str | Path], config: PipelineConfig) -> Panel:
    ids = [config.treated_id, *config.donor_ids]
    series = load_series(csv_paths, ids)
    d = config.design
    for s in series.values():
        missing = s.missing_months(d.pre_start, d.eval_end)
        if missing:
            raise CoverageError(s.id, missing)
    restricted = {i: s.restrict(d.pre_start, d.eval_end) for i, s in series.items()}
    panel = Panel(restricted[config.treated_id], tuple(restricted[i] for i in config.donor_ids), d)
    require_valid(panel)
    return panel.rebase() if config.rebase else panel


def format_rows(series: Iterable[PriceSeries]) -> str:
    buf = io.StringIO(newline="")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(HEADER)
    for s in series:
        for m, v in s:
            w.writerow([s.id, s.label, str(m), repr(float(v))])
    return buf.getvalue()


def write_series(series: Iterable[PriceSeries], path: str | Path) -> None:
    from .report import atomic_write_text

    atomic_write_text(Path(path), format_rows(series))


def write_panel(panel: Panel, path: str | Path, extra: Iterable[PriceSeries] = ()) -> None:
    """Write treated, donors and any ``extra`` series in the CSV wire format."""
    write_series([panel.treated, *panel.donors, *extra], path)
