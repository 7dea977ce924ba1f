"""Leave-one-out refits and in-space placebo tests."""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Mapping

from .errors import DataError, VatScmError
from .panel import MonthKey, Panel, StudyDesign, require_valid
from .scm import ScmFit, SolverOptions, fit_weights, rmspe

POSITIVE_WEIGHT = 1e-8
POOR_FIT_FACTOR = 5.0


def _map(fn: Callable, items: list, workers: int) -> list:
    # results come back in input order regardless of completion order
    if workers <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


def rmspe_ratio(fit: ScmFit, design: StudyDesign) -> float:
    """Post-treatment RMSPE over pre-treatment RMSPE."""
    pre = rmspe(fit, design.pre_start, design.pre_end)
    post = rmspe(fit, design.treatment_start, design.eval_end)
    if pre == 0.0:
        return 0.0 if post == 0.0 else math.inf
    return post / pre


@dataclass(frozen=True)
class LooResult:
    baseline: ScmFit
    variants: Mapping[str, ScmFit]
    band: Mapping[MonthKey, tuple[float, float]]


def leave_one_out(panel: Panel, opts: SolverOptions | None = None, *, baseline: ScmFit | None = None,
                  workers: int = 1) -> LooResult:
    """Refit once per positive-weight donor with that donor removed."""
    require_valid(panel)
    if len(panel.donors) < 3:
        raise DataError(f"leave-one-out needs at least 3 donors, panel has {len(panel.donors)}")
    base = baseline if baseline is not None else fit_weights(panel, opts)
    excluded = [i for i in panel.donor_ids if base.weights[i] > POSITIVE_WEIGHT]
    if not excluded:
        raise DataError("baseline fit has no positive-weight donor")
    fits = _map(lambda i: fit_weights(panel.without_donor(i), opts), excluded, workers)
    variants = dict(zip(excluded, fits))
    band = {}
    for m in base.months:
        vals = [f.gap[m] for f in fits]
        band[m] = (min(vals), max(vals))
    return LooResult(base, variants, band)


@dataclass(frozen=True)
class PlaceboResult:
    treated_id: str
    treated_fit: ScmFit
    placebo_fits: Mapping[str, ScmFit]
    ratios: Mapping[str, float]
    ranking: tuple[str, ...]
    treated_rank: int
    failures: Mapping[str, str] = field(default_factory=dict)
    poor_fit: tuple[str, ...] = ()
    trimmed: bool = False

    def rank_of(self, unit: str) -> int:
        return self.ranking.index(unit) + 1

    def envelope(self, include_poor_fit: bool = True) -> dict[MonthKey, tuple[float, float]]:
        """Per-month min/max over placebo gaps."""
        fits = [f for i, f in self.placebo_fits.items() if include_poor_fit or i not in self.poor_fit]
        out = {}
        for m in self.treated_fit.months:
            vals = [f.gap[m] for f in fits]
            out[m] = (min(vals), max(vals))
        return out


def _rank(ratios: Mapping[str, float], post: Mapping[str, float]) -> list[str]:
    # ratio descending; infinite ratios ordered by post-RMSPE; ties by id
    def key(u: str):
        r = ratios[u]
        return (-r, -post[u] if math.isinf(r) else 0.0, u)

    return sorted(ratios, key=key)


def placebo_test(panel: Panel, opts: SolverOptions | None = None, *, treated_fit: ScmFit | None = None,
                 workers: int = 1, trim_poor_fit: bool = False) -> PlaceboResult:
    """Refit with each donor playing the treated unit.

    A placebo pool is the donor pool minus the placebo unit; the genuinely
    treated series is never used. Failed refits are recorded and left out of
    the ranking. With ``trim_poor_fit`` units whose pre-RMSPE exceeds five
    times the treated unit's are also left out of the ranking.
    """
    require_valid(panel)
    if len(panel.donors) < 3:
        raise DataError(f"placebo test needs at least 3 donors, panel has {len(panel.donors)}")
    design = panel.design
    tfit = treated_fit if treated_fit is not None else fit_weights(panel, opts)

    def run(unit: str):
        try:
            return fit_weights(panel.as_placebo(unit), opts)
        except VatScmError as exc:
            return exc

    outcomes = _map(run, panel.donor_ids, workers)
    fits: dict[str, ScmFit] = {}
    failures: dict[str, str] = {}
    for unit, out in zip(panel.donor_ids, outcomes):
        if isinstance(out, ScmFit):
            fits[unit] = out
        else:
            failures[unit] = f"{type(out).__name__}: {out}"

    poor = tuple(u for u, f in fits.items() if f.pre_rmspe > POOR_FIT_FACTOR * tfit.pre_rmspe)
    treated_id = panel.treated.id
    ratios = {treated_id: rmspe_ratio(tfit, design)}
    post = {treated_id: rmspe(tfit, design.treatment_start, design.eval_end)}
    for u, f in fits.items():
        if trim_poor_fit and u in poor:
            continue
        ratios[u] = rmspe_ratio(f, design)
        post[u] = rmspe(f, design.treatment_start, design.eval_end)
    ranking = tuple(_rank(ratios, post))
    return PlaceboResult(
        treated_id=treated_id,
        treated_fit=tfit,
        placebo_fits=fits,
        ratios=ratios,
        ranking=ranking,
        treated_rank=ranking.index(treated_id) + 1,
        failures=failures,
        poor_fit=poor,
        trimmed=trim_poor_fit,
    )
