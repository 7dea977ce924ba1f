"""Tax pass-through rates measured against a scaled synthetic counterfactual.

The synthetic series estimates prices under the old tax rate. Passing an
ad-valorem tax change fully through to consumers multiplies the gross price
by ``(1 + new) / (1 + old)``; the pass-through rate is the share of that
increment realised by the actual price::

    rate(t) = (actual(t) - synthetic(t)) / (synthetic(t) * (full_factor - 1))
"""

from __future__ import annotations

from dataclasses import dataclass

from .panel import MonthKey, PriceSeries, StudyDesign, month_range
from .scm import ScmFit


@dataclass(frozen=True)
class TaxChange:
    tax_old: float
    tax_new: float

    def __post_init__(self) -> None:
        for name in ("tax_old", "tax_new"):
            v = getattr(self, name)
            if not 0.0 <= v < 1.0:
                raise ValueError(f"{name} must be in [0, 1), got {v!r}")
        if self.tax_new == self.tax_old:
            raise ValueError("degenerate tax change: tax_new equals tax_old")

    @property
    def full_factor(self) -> float:
        return (1.0 + self.tax_new) / (1.0 + self.tax_old)


def passthrough_rate(actual: float, synthetic: float, tax: TaxChange) -> float:
    if not synthetic > 0:
        raise ValueError(f"synthetic value must be positive, got {synthetic!r}")
    return (actual - synthetic) / (synthetic * (tax.full_factor - 1.0))


def full_passthrough_series(fit: ScmFit, tax: TaxChange, design: StudyDesign) -> PriceSeries:
    """Synthetic series scaled by the full-pass-through factor, post-treatment only."""
    f = tax.full_factor
    obs = {m: fit.synthetic_at(m) * f for m in month_range(design.treatment_start, design.eval_end)}
    return PriceSeries(fit.treated.id + "_full_passthrough", "full pass-through", obs)


def passthrough_series(fit: ScmFit, tax: TaxChange, design: StudyDesign) -> dict[MonthKey, float]:
    return {
        m: passthrough_rate(fit.actual(m), fit.synthetic_at(m), tax)
        for m in month_range(design.treatment_start, design.eval_end)
    }


def treatment_effect(fit: ScmFit, t: MonthKey, design: StudyDesign | None = None) -> tuple[float, float]:
    """Gap in index points and the relative price effect at month ``t``."""
    start = design.treatment_start if design is not None else fit.pre_end.successor()
    if t < start:
        raise ValueError(f"{t} precedes the treatment start {start}")
    actual = fit.actual(t)
    synth = fit.synthetic_at(t)
    return fit.gap[t], actual / synth - 1.0
