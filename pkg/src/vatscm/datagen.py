"""Synthetic panels with known weights and treatment effects.

Donor processes mimic monthly CPI aggregates: a shared price trend that rises
steeply for the first two thirds of the window and then flattens, a
donor-specific loading on that trend, a small seasonal cycle and AR(1)
idiosyncratic noise. The treated series is an exact convex combination of
donors plus an optional injected effect and optional white noise.

Random draws come from ``numpy.random.Generator(PCG64(seed))`` in a fixed
order: donor levels, trend loadings, seasonal amplitudes, seasonal phases,
AR innovations (months x donors, row-major), then treated noise. Fixtures
meant for other tools should be exchanged as CSV, not as RNG streams.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

from .panel import MonthKey, Panel, PriceSeries, StudyDesign
from .scm import WeightVector

TREATED_ID = "T"


def donor_id(j: int) -> str:
    return f"D{j + 1:02d}"


@dataclass(frozen=True)
class GenSpec:
    donor_count: int = 6
    design: StudyDesign = field(default_factory=StudyDesign.default)
    # donor id -> weight; unnamed donors get weight 0
    true_weights: Mapping[str, float] = field(default_factory=lambda: {"D01": 0.5, "D02": 0.3, "D03": 0.2})
    base_level: float = 100.0
    level_spread: float = 0.08
    drift: float = 0.5  # index points per month while the shared trend is rising
    flatten_after: float = 2.0 / 3.0
    seasonal_amplitude: float = 0.4
    ar_coef: float = 0.6
    donor_noise_sd: float = 0.4
    noise_sd: float = 0.0  # white noise on the treated series
    effect: Mapping[MonthKey, float] = field(default_factory=dict)
    seed: int = 0

    def __post_init__(self) -> None:
        if self.donor_count < 2:
            raise ValueError(f"need at least 2 donors, got {self.donor_count}")
        if self.noise_sd < 0 or self.donor_noise_sd < 0:
            raise ValueError("noise standard deviations must be nonnegative")
        ids = {donor_id(j) for j in range(self.donor_count)}
        unknown = set(self.true_weights) - ids
        if unknown:
            raise ValueError(f"true_weights names unknown donors: {sorted(unknown)}")
        # raises if not on the simplex
        WeightVector(dict(self.true_weights))
        for m in self.effect:
            if m < self.design.treatment_start:
                raise ValueError(f"effect month {m} precedes treatment start")


@dataclass(frozen=True)
class Truth:
    weights: WeightVector
    effect: Mapping[MonthKey, float]
    counterfactual: PriceSeries


def ramp_effect(design: StudyDesign, points: float, start_offset: int = 0) -> dict[MonthKey, float]:
    """Constant ``points`` from ``treatment_start + start_offset`` to ``eval_end``."""
    first = design.treatment_start.shift(start_offset)
    return {m: float(points) for m in design.post_months() if m >= first}


def generate(spec: GenSpec) -> tuple[Panel, Truth]:
    d = spec.design
    months = d.months()
    n, J = len(months), spec.donor_count
    rng = np.random.Generator(np.random.PCG64(spec.seed))

    levels = spec.base_level * (1.0 + rng.uniform(-spec.level_spread, spec.level_spread, J))
    loadings = rng.uniform(0.5, 1.5, J)
    amps = spec.seasonal_amplitude * rng.uniform(0.0, 1.0, J)
    phases = rng.uniform(0.0, 2.0 * np.pi, J)
    innov = rng.normal(0.0, 1.0, (n, J)) * spec.donor_noise_sd

    knee = int(round(spec.flatten_after * (n - 1)))
    steps = np.where(np.arange(n) < knee, spec.drift, 0.15 * spec.drift)
    steps[0] = 0.0
    trend = np.cumsum(steps)

    ar = np.zeros((n, J))
    for t in range(n):
        ar[t] = (spec.ar_coef * ar[t - 1] if t else 0.0) + innov[t]

    cal = np.array([m.month for m in months], dtype=np.float64)
    season = amps * np.sin(2.0 * np.pi * cal[:, None] / 12.0 + phases)
    Y = levels + trend[:, None] * loadings + season + ar
    if np.any(Y <= 0):
        raise ValueError("generated a non-positive donor value; lower the noise or raise base_level")

    ids = [donor_id(j) for j in range(J)]
    w = np.array([spec.true_weights.get(i, 0.0) for i in ids])
    counterfactual = Y @ w
    effect = np.array([spec.effect.get(m, 0.0) for m in months])
    noise = rng.normal(0.0, 1.0, n) * spec.noise_sd if spec.noise_sd > 0 else np.zeros(n)
    treated = counterfactual + effect + noise

    donors = tuple(
        PriceSeries(i, f"generated donor {i}", dict(zip(months, Y[:, j].tolist()))) for j, i in enumerate(ids)
    )
    panel = Panel(PriceSeries(TREATED_ID, "generated treated", dict(zip(months, treated.tolist()))), donors, d)
    truth = Truth(
        weights=WeightVector(dict(zip(ids, w.tolist()))),
        effect={m: float(e) for m, e in zip(months, effect) if m >= d.treatment_start},
        counterfactual=PriceSeries(TREATED_ID + "_counterfactual", "true counterfactual",
                                   dict(zip(months, counterfactual.tolist()))),
    )
    return panel, truth
