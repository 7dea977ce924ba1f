"""Synthetic-control weights over all pre-treatment outcomes.

With every pre-period outcome used as a predictor and uniform predictor
weighting, the estimator reduces to a least-squares fit of the treated
pre-period path by a convex combination of donor paths::

    minimise  sum_t (Y_treated,t - sum_j w_j Y_j,t)^2   over the unit simplex

The problem is a small convex QP. It is solved by accelerated projected
gradient with a step of 1/L (L from power iteration on the Gram matrix),
plus periodic exact solves on the current support; a pairwise Frank-Wolfe
variant is available when projection is not wanted.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from types import MappingProxyType
from typing import Mapping, Sequence

import numpy as np

from . import _kernels as K
from .errors import ConvergenceError
from .panel import MonthKey, Panel, PriceSeries, month_range, require_valid

SYNTHETIC_SUFFIX = "_synthetic"


@dataclass(frozen=True)
class SolverOptions:
    tolerance: float = 1e-10
    kkt_tol: float = 1e-7
    max_iters: int = 100_000
    method: str = "apg"  # "apg" or "frank_wolfe"
    polish_every: int = 25
    clamp_threshold: float = 1e-10
    support_threshold: float = 1e-8

    def __post_init__(self) -> None:
        if self.method not in ("apg", "frank_wolfe"):
            raise ValueError(f"unknown solver method {self.method!r}")
        if self.tolerance <= 0 or self.kkt_tol <= 0:
            raise ValueError("solver tolerances must be positive")
        if self.max_iters < 1 or self.polish_every < 1:
            raise ValueError("max_iters and polish_every must be >= 1")


@dataclass(frozen=True)
class WeightVector:
    weights: Mapping[str, float]

    def __post_init__(self) -> None:
        w = {str(k): float(v) for k, v in self.weights.items()}
        if not w:
            raise ValueError("weight vector is empty")
        if any(v < -1e-12 or not math.isfinite(v) for v in w.values()):
            raise ValueError("weights must be nonnegative and finite")
        if abs(math.fsum(w.values()) - 1.0) > 1e-9:
            raise ValueError(f"weights sum to {math.fsum(w.values())!r}, expected 1")
        object.__setattr__(self, "weights", MappingProxyType(w))

    @classmethod
    def from_array(cls, ids: Sequence[str], values) -> "WeightVector":
        values = np.asarray(values, dtype=np.float64)
        if len(ids) != values.shape[0]:
            raise ValueError("ids and values differ in length")
        return cls(dict(zip(ids, (float(max(v, 0.0)) for v in values))))

    @classmethod
    def uniform(cls, ids: Sequence[str]) -> "WeightVector":
        return cls({i: 1.0 / len(ids) for i in ids})

    @property
    def ids(self) -> list[str]:
        return list(self.weights)

    def __getitem__(self, id: str) -> float:
        return self.weights[id]

    def as_array(self, ids: Sequence[str] | None = None) -> np.ndarray:
        ids = self.ids if ids is None else ids
        return np.array([self.weights[i] for i in ids], dtype=np.float64)

    def positive(self, threshold: float = 1e-8) -> list[str]:
        return [i for i, v in self.weights.items() if v > threshold]


@dataclass(frozen=True)
class ScmFit:
    weights: WeightVector
    treated: PriceSeries
    synthetic: PriceSeries
    gap: Mapping[MonthKey, float]
    pre_rmspe: float
    objective_value: float
    iterations: int
    kkt_residual: float
    duality_gap: float
    pre_start: MonthKey
    pre_end: MonthKey
    method: str = "apg"
    backend: str = field(default_factory=K.backend)

    @property
    def months(self) -> list[MonthKey]:
        return list(self.gap)

    @property
    def donor_ids(self) -> list[str]:
        return self.weights.ids

    def gap_vector(self, start: MonthKey | None = None, end: MonthKey | None = None) -> np.ndarray:
        months = self.months
        start = start or months[0]
        end = end or months[-1]
        return np.array([self.gap[m] for m in month_range(start, end)], dtype=np.float64)

    def actual(self, t: MonthKey) -> float:
        return self.treated[t]

    def synthetic_at(self, t: MonthKey) -> float:
        return self.synthetic[t]


class FitProblem:
    """Arrays for one weight problem, reusable across solver calls."""

    def __init__(self, panel: Panel) -> None:
        d = panel.design
        self.ids = panel.donor_ids
        self.y = np.ascontiguousarray(panel.treated_vector(d.pre_start, d.pre_end))
        self.X = np.ascontiguousarray(panel.donor_matrix(d.pre_start, d.pre_end))


def solve(X: np.ndarray, y: np.ndarray, opts: SolverOptions | None = None, w0: np.ndarray | None = None):
    """Solve the simplex least-squares problem on raw arrays.

    Returns ``(w, info)`` where info holds objective, kkt, gap and iterations.
    Raises :class:`ConvergenceError` when the iteration budget runs out.
    """
    opts = opts or SolverOptions()
    X = np.ascontiguousarray(X, dtype=np.float64)
    y = np.ascontiguousarray(y, dtype=np.float64)
    if X.ndim != 2 or y.shape != (X.shape[0],):
        raise ValueError(f"shape mismatch: X {X.shape}, y {y.shape}")
    if X.shape[0] < 2:
        raise ValueError("need at least 2 pre-treatment observations")
    n = X.shape[1]
    # On the simplex X w - y == (X - y 1') w, so subtracting the treated path
    # from every donor column leaves the objective unchanged and strips the
    # shared index level out of the Gram matrix.
    X = np.ascontiguousarray(X - y[:, None])
    y = np.zeros_like(y)
    XT = np.ascontiguousarray(X.T)
    start = np.full(n, 1.0 / n) if w0 is None else np.ascontiguousarray(w0, dtype=np.float64)
    if opts.method == "apg":
        G = np.ascontiguousarray(XT @ X)
        lam = K.power_iteration(G, 10_000, 1e-12)
        if not lam > 0.0:
            # trace bounds the top eigenvalue; a zero Gram leaves any point optimal
            lam = max(float(np.trace(G)), 1.0)
        L = 2.0 * lam * (1.0 + 1e-6)
        out = K.apg_solve(X, XT, y, start, L, opts.tolerance, opts.kkt_tol, opts.max_iters,
                          opts.polish_every, opts.clamp_threshold, opts.support_threshold)
    else:
        out = K.fw_solve(X, XT, y, start.copy(), opts.tolerance, opts.kkt_tol, opts.max_iters,
                         opts.polish_every, opts.clamp_threshold, opts.support_threshold)
    w, iters, status, f, kkt, gap = out
    info = {"objective": float(f), "kkt_residual": float(kkt), "duality_gap": float(gap),
            "iterations": int(iters), "status": int(status)}
    if status != K.CONVERGED:
        raise ConvergenceError(
            f"solver did not converge in {iters} iterations (kkt={kkt:.3g}, gap={gap:.3g})",
            weights=np.asarray(w), objective=float(f), kkt_residual=float(kkt), iterations=int(iters),
        )
    return np.asarray(w), info


def fit_weights(panel: Panel, opts: SolverOptions | None = None) -> ScmFit:
    opts = opts or SolverOptions()
    require_valid(panel)
    prob = FitProblem(panel)
    try:
        w, info = solve(prob.X, prob.y, opts)
    except ConvergenceError as exc:
        exc.weights = WeightVector.from_array(prob.ids, exc.weights / exc.weights.sum())
        raise
    weights = WeightVector.from_array(prob.ids, w)
    return _assemble(panel, weights, info, opts.method)


def _assemble(panel: Panel, weights: WeightVector, info: dict, method: str) -> ScmFit:
    d = panel.design
    months = d.months()
    w = weights.as_array(panel.donor_ids)
    synth = panel.donor_matrix(d.pre_start, d.eval_end) @ w
    actual = panel.treated_vector(d.pre_start, d.eval_end)
    gap = actual - synth
    pre_gap = gap[: d.pre_length]
    return ScmFit(
        weights=weights,
        treated=panel.treated.restrict(d.pre_start, d.eval_end),
        synthetic=PriceSeries(panel.treated.id + SYNTHETIC_SUFFIX, f"synthetic {panel.treated.label}".strip(),
                              dict(zip(months, synth.tolist()))),
        gap=MappingProxyType(dict(zip(months, gap.tolist()))),
        pre_rmspe=float(np.sqrt(np.mean(pre_gap**2))),
        objective_value=float(info["objective"]),
        iterations=int(info["iterations"]),
        kkt_residual=float(info["kkt_residual"]),
        duality_gap=float(info["duality_gap"]),
        pre_start=d.pre_start,
        pre_end=d.pre_end,
        method=method,
    )


def project_to_simplex(v) -> np.ndarray:
    v = np.asarray(v, dtype=np.float64)
    if v.ndim != 1 or v.size == 0:
        raise ValueError("expected a nonempty 1-d vector")
    if not np.all(np.isfinite(v)):
        raise ValueError("vector has non-finite entries")
    return K.project_simplex(np.ascontiguousarray(v))


def synthetic_value(panel: Panel, w: WeightVector, t: MonthKey) -> float:
    ids = panel.donor_ids
    if set(w.ids) != set(ids) or len(w.ids) != len(ids):
        raise ValueError(f"weight keys {sorted(w.ids)} do not match donors {sorted(ids)}")
    return math.fsum(w[d.id] * d[t] for d in panel.donors)


def rmspe(fit: ScmFit, start: MonthKey, end: MonthKey) -> float:
    if end < start:
        raise ValueError(f"empty window {start}..{end}")
    g = fit.gap_vector(start, end)
    return float(np.sqrt(np.mean(g**2)))


def kkt_residual(X: np.ndarray, y: np.ndarray, w: np.ndarray, support_threshold: float = 1e-8) -> float:
    """KKT residual of ``w`` for the simplex least-squares problem."""
    X = np.asarray(X, dtype=np.float64)
    g = 2.0 * X.T @ (X @ w - y)
    on = w > support_threshold
    if not on.any():
        return float("inf")
    return float(np.max(g[on]) - np.min(g))
