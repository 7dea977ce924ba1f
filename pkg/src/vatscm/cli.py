"""Command line entry point: ``vatscm {fit,loo,placebo,gen,report}``.

Exit codes: 0 success, 1 data/config/usage error, 2 solver non-convergence,
3 I/O error. Errors are reported on stderr as a single JSON object.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .errors import ConfigError, ConvergenceError, DataError, VatScmError
from .ingest import PipelineConfig, load_config, load_panel, format_rows
from .panel import MonthKey, StudyDesign

EXIT_OK, EXIT_DATA, EXIT_SOLVER, EXIT_IO = 0, 1, 2, 3


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):  # noqa: D401 - argparse hook
        self.print_usage(sys.stderr)
        _emit_error("UsageError", message, EXIT_DATA)
        sys.exit(EXIT_DATA)


def _emit_error(kind: str, message: str, code: int) -> None:
    print(json.dumps({"error": kind, "message": message, "exit_code": code}), file=sys.stderr)


def _month(text: str) -> MonthKey:
    try:
        return MonthKey.parse(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def _first_series_id(path: Path) -> str:
    import csv

    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        next(reader, None)
        for row in reader:
            if row:
                return row[0].strip()
    raise DataError(f"{path}: no data rows")


def resolve(args) -> tuple[PipelineConfig, list[Path]]:
    """Config from --config, or an ad-hoc one built from --data and id flags."""
    data = [Path(p) for p in (args.data or [])]
    if args.config:
        cfg = load_config(args.config)
        paths = data or list(cfg.data)
        if not paths:
            raise ConfigError("no data files given", field="data")
        return cfg, paths
    if not data:
        raise ConfigError("either --config or --data is required")
    from .ingest import load_series

    treated = args.treated or _first_series_id(data[0])
    if args.donors:
        donors = [d.strip() for d in args.donors.split(",") if d.strip()]
    else:
        donors = [i for i in load_series(data) if i != treated]
    default = StudyDesign.default()
    try:
        design = StudyDesign.from_pre_window(
            args.pre_start or default.pre_start, args.pre_end or default.pre_end, args.eval_end or default.eval_end
        )
    except ValueError as exc:
        raise ConfigError(str(exc), field="pre_end") from None
    return PipelineConfig(treated_id=treated, donor_ids=tuple(donors), design=design, data=tuple(data)), data


def _write_or_print(text: str, out: str | None) -> None:
    if out:
        from .report import atomic_write_text

        atomic_write_text(Path(out), text)
    else:
        sys.stdout.write(text)


def cmd_fit(args) -> int:
    from .report import weights_table
    from .scm import fit_weights

    cfg, paths = resolve(args)
    panel = load_panel(paths, cfg)
    fit = fit_weights(panel, cfg.solver)
    _write_or_print(weights_table(panel, fit), args.out)
    print(f"pre_rmspe={fit.pre_rmspe:.6g} objective={fit.objective_value:.6g} "
          f"kkt_residual={fit.kkt_residual:.3g} iterations={fit.iterations}", file=sys.stderr)
    return EXIT_OK


def cmd_loo(args) -> int:
    from .inference import leave_one_out
    from .report import loo_table

    cfg, paths = resolve(args)
    panel = load_panel(paths, cfg)
    res = leave_one_out(panel, cfg.solver, workers=args.workers or cfg.workers)
    _write_or_print(loo_table(res), args.out)
    return EXIT_OK


def cmd_placebo(args) -> int:
    from .inference import placebo_test
    from .report import ranks_table

    cfg, paths = resolve(args)
    panel = load_panel(paths, cfg)
    res = placebo_test(panel, cfg.solver, workers=args.workers or cfg.workers,
                       trim_poor_fit=args.trim or cfg.trim_poor_fit)
    _write_or_print(ranks_table(res, panel.design), args.out)
    print(f"treated_rank={res.treated_rank} of {len(res.ranking)}", file=sys.stderr)
    return EXIT_OK


def cmd_gen(args) -> int:
    from .datagen import GenSpec, generate, ramp_effect

    design = StudyDesign.default()
    if args.config:
        design = load_config(args.config).design
    n = args.donors
    k = min(3, n)
    weights = {f"D{j + 1:02d}": 1.0 / k for j in range(k)}
    effect = ramp_effect(design, args.effect, args.effect_start) if args.effect else {}
    spec = GenSpec(donor_count=n, design=design, true_weights=weights, noise_sd=args.noise,
                   effect=effect, seed=args.seed)
    panel, _ = generate(spec)
    _write_or_print(format_rows([panel.treated, *panel.donors]), args.out)
    return EXIT_OK


def cmd_report(args) -> int:
    from .report import run_pipeline

    cfg, paths = resolve(args)
    if args.workers:
        from dataclasses import replace

        cfg = replace(cfg, workers=args.workers)
    out = Path(args.out) if args.out else cfg.output_dir
    bundle = run_pipeline(cfg, out, paths)
    s = bundle.summary
    print(f"wrote {len(bundle.files)} files to {out}; treated placebo rank "
          f"{s['placebo']['treated_rank']} of {s['placebo']['units']}", file=sys.stderr)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="vatscm", description="Synthetic control estimates of VAT pass-through.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(sp, out_help: str):
        sp.add_argument("--config", help="pipeline config (TOML)")
        sp.add_argument("--data", action="append", help="price CSV file (repeatable); overrides config data")
        sp.add_argument("--out", help=out_help)
        sp.add_argument("--treated", help="treated series id without --config (default: first series in file)")
        sp.add_argument("--donors", help="comma-separated donor ids without --config (default: all others)")
        sp.add_argument("--pre-start", type=_month)
        sp.add_argument("--pre-end", type=_month)
        sp.add_argument("--eval-end", type=_month)
        sp.add_argument("--workers", type=int, default=0, help="threads for refits (default: from config or 1)")

    sp = sub.add_parser("fit", help="fit synthetic control weights")
    common(sp, "write weights CSV here instead of stdout")
    sp.set_defaults(func=cmd_fit)

    sp = sub.add_parser("loo", help="leave-one-out refits")
    common(sp, "write the band table here instead of stdout")
    sp.set_defaults(func=cmd_loo)

    sp = sub.add_parser("placebo", help="in-space placebo test")
    common(sp, "write the rank table here instead of stdout")
    sp.add_argument("--trim", action="store_true", help="drop placebo units with poor pre-fit from ranking")
    sp.set_defaults(func=cmd_placebo)

    sp = sub.add_parser("gen", help="generate a synthetic panel CSV")
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--out", help="output CSV (default stdout)")
    sp.add_argument("--config", help="take the study windows from this config")
    sp.add_argument("--donors", type=int, default=6, help="number of donors")
    sp.add_argument("--noise", type=float, default=0.0, help="treated noise sd in index points")
    sp.add_argument("--effect", type=float, default=0.0, help="injected post-treatment effect in index points")
    sp.add_argument("--effect-start", type=int, default=0, help="months after treatment start when the effect begins")
    sp.set_defaults(func=cmd_gen)

    sp = sub.add_parser("report", help="run the full pipeline and write all figures and tables")
    common(sp, "output directory (default: output_dir from config)")
    sp.set_defaults(func=cmd_report)
    return p


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConvergenceError as exc:
        _emit_error(type(exc).__name__, str(exc), EXIT_SOLVER)
        return EXIT_SOLVER
    except (VatScmError, ValueError) as exc:
        _emit_error(type(exc).__name__, str(exc), EXIT_DATA)
        return EXIT_DATA
    except OSError as exc:
        _emit_error(type(exc).__name__, str(exc), EXIT_IO)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
