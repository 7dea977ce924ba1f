"""End-to-end pipeline run and the report artifacts it writes.

Files written to the output directory:

* ``figure1.csv/.svg``  treated index vs. total CPI (only with ``total_cpi_id``)
* ``figure2.csv/.svg``  actual, synthetic, full-pass-through, gap, pass-through rate
* ``figure3.csv/.svg``  baseline gap and leave-one-out band
* ``figure4.csv/.svg``  treated gap vs. placebo gaps
* ``weights.csv``       fitted donor weights
* ``placebo_ranks.csv`` post/pre RMSPE ratios and ranks, one row per unit
* ``results.json``      structured summary with run metadata

Nothing is written until every table has been computed, and each file is
replaced atomically, so a failed run leaves earlier outputs untouched.
"""

from __future__ import annotations

import datetime as _dt
import hashlib
import io
import csv
import json
import math
import os
import tempfile
from dataclasses import dataclass, field
from pathlib import Path

from . import __version__
from . import svg
from .ingest import PipelineConfig, load_config, load_panel, load_series
from .inference import LooResult, PlaceboResult, leave_one_out, placebo_test
from .panel import MonthKey, Panel, PriceSeries
from .passthrough import full_passthrough_series, passthrough_series, treatment_effect
from .scm import ScmFit, fit_weights

EURO_2024 = (MonthKey(2024, 6), MonthKey(2024, 7))
EURO_LABEL = "UEFA Euro 2024"
ANNOUNCEMENT = MonthKey(2023, 11)
IN_FORCE = MonthKey(2024, 1)


def pts(x: float) -> str:
    """Index points: 4 decimals."""
    return f"{x:.4f}"


def rate(x: float) -> str:
    """Dimensionless rates: 6 significant digits."""
    return f"{x:.6g}"


def atomic_write_text(path: Path, text: str) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", suffix=".tmp", dir=path.parent)
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        try:
            os.unlink(tmp)
        except FileNotFoundError:
            pass
        raise


def csv_text(header: list[str], rows: list[list[str]]) -> str:
    buf = io.StringIO(newline="")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def config_hash(config: PipelineConfig) -> str:
    blob = json.dumps(config.resolved(), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode("utf-8")).hexdigest()


def phase(m: MonthKey, treatment_start: MonthKey) -> str:
    if m < treatment_start:
        return "pre"
    if m < max(IN_FORCE, treatment_start):
        return "anticipation"
    return "post"


@dataclass
class ReportBundle:
    fit: ScmFit
    loo: LooResult
    placebo: PlaceboResult
    summary: dict
    files: dict[str, str] = field(default_factory=dict)

    @property
    def monthly(self) -> list[dict]:
        return self.summary["monthly"]


def weights_table(panel: Panel, fit: ScmFit) -> str:
    rows = [[d.id, d.label, rate(fit.weights[d.id])] for d in panel.donors]
    return csv_text(["donor_id", "label", "weight"], rows)


def ranks_table(res: PlaceboResult, design) -> str:
    from .scm import rmspe

    rows = []
    for i, unit in enumerate(res.ranking, start=1):
        f = res.treated_fit if unit == res.treated_id else res.placebo_fits[unit]
        rows.append([
            str(i), unit, "treated" if unit == res.treated_id else "placebo",
            pts(rmspe(f, design.pre_start, design.pre_end)),
            pts(rmspe(f, design.treatment_start, design.eval_end)),
            rate(res.ratios[unit]),
            "yes" if unit in res.poor_fit else "no",
        ])
    for unit, msg in sorted(res.failures.items()):
        rows.append(["", unit, "failed", "", "", "", msg])
    return csv_text(["rank", "unit", "role", "pre_rmspe", "post_rmspe", "ratio", "poor_pre_fit"], rows)


def loo_table(res: LooResult) -> str:
    ids = list(res.variants)
    header = ["month", "baseline_gap", "loo_min", "loo_max"] + [f"gap_without_{i}" for i in ids]
    rows = []
    for m in res.baseline.months:
        lo, hi = res.band[m]
        rows.append([str(m), pts(res.baseline.gap[m]), pts(lo), pts(hi)] + [pts(res.variants[i].gap[m]) for i in ids])
    return csv_text(header, rows)


def placebo_table(res: PlaceboResult) -> str:
    ids = list(res.placebo_fits)
    env = res.envelope()
    header = ["month", "treated_gap", "placebo_min", "placebo_max"] + [f"gap_{i}" for i in ids]
    rows = []
    for m in res.treated_fit.months:
        lo, hi = env[m]
        rows.append([str(m), pts(res.treated_fit.gap[m]), pts(lo), pts(hi)]
                    + [pts(res.placebo_fits[i].gap[m]) for i in ids])
    return csv_text(header, rows)


def _x_labels(months: list[MonthKey]) -> list[str]:
    return [str(m) for m in months]


def _euro_window(months: list[MonthKey]):
    idx = [i for i, m in enumerate(months) if EURO_2024[0] <= m <= EURO_2024[1]]
    return [(idx[0], idx[-1], EURO_LABEL)] if idx else []


def build(panel: Panel, config: PipelineConfig, total_cpi: PriceSeries | None = None,
          data_files: list[Path] | None = None) -> ReportBundle:
    """Run fit, leave-one-out and placebo refits and render every artifact in memory."""
    d = panel.design
    tax = config.tax
    opts = config.solver
    fit = fit_weights(panel, opts)
    loo = leave_one_out(panel, opts, baseline=fit, workers=config.workers)
    plc = placebo_test(panel, opts, treated_fit=fit, workers=config.workers, trim_poor_fit=config.trim_poor_fit)
    full = full_passthrough_series(fit, tax, d)
    rates = passthrough_series(fit, tax, d)
    months = d.months()
    pre_marker = len(d.pre_months()) - 0.5

    monthly = []
    rows2 = []
    for m in months:
        ph = phase(m, d.treatment_start)
        note = EURO_LABEL if EURO_2024[0] <= m <= EURO_2024[1] else ""
        actual, synth, gap = fit.actual(m), fit.synthetic_at(m), fit.gap[m]
        fp = full.observations.get(m)
        r = rates.get(m)
        monthly.append({
            "month": str(m), "actual": actual, "synthetic": synth,
            "full_passthrough": fp, "gap": gap, "passthrough_rate": r, "phase": ph, "note": note,
        })
        rows2.append([str(m), pts(actual), pts(synth), "" if fp is None else pts(fp), pts(gap),
                      "" if r is None else rate(r), ph, note])
    files: dict[str, str] = {}
    files["figure2.csv"] = csv_text(
        ["month", "actual", "synthetic", "full_passthrough", "gap", "passthrough_rate", "phase", "note"], rows2)
    files["figure3.csv"] = loo_table(loo)
    files["figure4.csv"] = placebo_table(plc)
    files["weights.csv"] = weights_table(panel, fit)
    files["placebo_ranks.csv"] = ranks_table(plc, d)

    labels = _x_labels(months)
    files["figure2.svg"] = svg.render(svg.Chart(
        title=f"Actual and synthetic {panel.treated.label}",
        x_labels=labels,
        lines=[
            svg.Line("actual", [fit.actual(m) for m in months], "#1f3b73"),
            svg.Line(f"synthetic ({tax.tax_old:.0%} VAT)", [fit.synthetic_at(m) for m in months], "#555555", "3,3"),
            svg.Line(f"full pass-through ({tax.tax_new:.0%} VAT)", [full.observations.get(m) for m in months],
                     "#a23b2c", "9,5"),
        ],
        markers=[(pre_marker, "announcement")],
        windows=_euro_window(months),
        point_labels=[(i, fit.actual(m), f"{rates[m]:.1%}") for i, m in enumerate(months) if m in rates],
        y_label="index",
    ))
    files["figure3.svg"] = svg.render(svg.Chart(
        title="Treatment effect and leave-one-out band",
        x_labels=labels,
        lines=[svg.Line("treated gap", [fit.gap[m] for m in months], "#1f3b73")],
        bands=[svg.Band("leave-one-out range", [loo.band[m][0] for m in months], [loo.band[m][1] for m in months])],
        markers=[(pre_marker, "")],
        y_label="index points",
        zero_line=True,
    ))
    plines = [svg.Line("", [f.gap[m] for m in months], "#b5b5b5", None, 1.0) for f in plc.placebo_fits.values()]
    if plines:
        plines[0].label = "placebo gaps"
    files["figure4.svg"] = svg.render(svg.Chart(
        title="Treatment effect and placebo gaps",
        x_labels=labels,
        lines=plines + [svg.Line("treated gap", [fit.gap[m] for m in months], "#1f3b73", None, 2.5)],
        markers=[(pre_marker, "")],
        y_label="index points",
        zero_line=True,
    ))
    if total_cpi is not None:
        cpi = total_cpi.restrict(d.pre_start, d.eval_end)
        files["figure1.csv"] = csv_text(
            ["month", panel.treated.id, total_cpi.id],
            [[str(m), pts(panel.treated[m]), pts(cpi[m])] for m in months],
        )
        files["figure1.svg"] = svg.render(svg.Chart(
            title=f"{panel.treated.label} and {total_cpi.label}",
            x_labels=labels,
            lines=[svg.Line(panel.treated.label, [panel.treated[m] for m in months], "#1f3b73"),
                   svg.Line(total_cpi.label, [cpi[m] for m in months], "#888888", "6,4")],
            markers=[(pre_marker, "")],
            y_label="index",
        ))

    effects = {str(m): dict(zip(("points", "percent"), treatment_effect(fit, m, d))) for m in d.post_months()}
    summary = {
        "fit": {
            "treated_id": panel.treated.id,
            "weights": {i: fit.weights[i] for i in fit.donor_ids},
            "positive_weight_donors": fit.weights.positive(),
            "pre_rmspe": fit.pre_rmspe,
            "objective": fit.objective_value,
            "kkt_residual": fit.kkt_residual,
            "duality_gap": fit.duality_gap,
            "iterations": fit.iterations,
            "solver": fit.method,
            "backend": fit.backend,
        },
        "donor_pool": [{"id": s.id, "label": s.label} for s in panel.donors],
        "passthrough": {str(m): r for m, r in rates.items()},
        "treatment_effect": effects,
        "monthly": monthly,
        "leave_one_out": {
            "excluded": list(loo.variants),
            "band": {str(m): list(b) for m, b in loo.band.items()},
        },
        "placebo": {
            "treated_rank": plc.treated_rank,
            "units": len(plc.ranking),
            "ratios": {u: (None if math.isinf(r) else r) for u, r in plc.ratios.items()},
            "infinite_ratio_units": [u for u, r in plc.ratios.items() if math.isinf(r)],
            "ranking": list(plc.ranking),
            "poor_pre_fit": list(plc.poor_fit),
            "failures": dict(plc.failures),
            "trimmed": plc.trimmed,
        },
        "metadata": {
            "config_hash": config_hash(config),
            "config": config.resolved(),
            "index_mode": "rebased to 100 at pre_start" if panel.rebased else "published levels",
            "data_sha256": {p.name: hashlib.sha256(p.read_bytes()).hexdigest() for p in (data_files or [])},
            "tool": "vatscm",
            "version": __version__,
            "generated_at": _dt.datetime.now(_dt.timezone.utc).replace(microsecond=0).isoformat(),
        },
    }
    files["results.json"] = json.dumps(summary, indent=2, sort_keys=False, allow_nan=False) + "\n"
    return ReportBundle(fit, loo, plc, summary, files)


def write_bundle(bundle: ReportBundle, out_dir: Path) -> list[Path]:
    out_dir = Path(out_dir)
    written = []
    for name in sorted(bundle.files):
        p = out_dir / name
        atomic_write_text(p, bundle.files[name])
        written.append(p)
    return written


def run_pipeline(config: PipelineConfig | str | Path, out_dir: Path | None = None,
                 data: list[Path] | None = None) -> ReportBundle:
    """Load config and data, run every estimate, then write all artifacts."""
    if not isinstance(config, PipelineConfig):
        config = load_config(config)
    paths = list(data) if data else list(config.data)
    if not paths:
        from .errors import ConfigError

        raise ConfigError("no data files given", field="data")
    panel = load_panel(paths, config)
    total = None
    if config.total_cpi_id:
        total = load_series(paths, [config.total_cpi_id])[config.total_cpi_id]
        if config.rebase:
            total = total.rebased(config.design.pre_start)
    bundle = build(panel, config, total, [Path(p) for p in paths])
    write_bundle(bundle, Path(out_dir) if out_dir is not None else config.output_dir)
    return bundle
