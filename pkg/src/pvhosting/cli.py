"""
Command-line front end.

    pvhosting <command> [config.toml] [--set key=value ...] [--out DIR]

Commands: ``margin``, ``ranges``, ``locus``, ``simulate``, ``derive-grid``
and ``reproduce-tables``.  Without a config file the shipped default
profile is used.  Exit codes: 0 success, 1 invalid input, 2 engine
diagnostic, 3 I/O failure.
"""
from __future__ import annotations

import argparse
import sys
import warnings

from . import __version__
from .config import ConfigError, RunConfig, config_digest, load_config
from .errors import DiagnosticError, DomainError, InputError
from .inverter import delay_margin
from .report import LOCUS_HEADER, csv_text, dumps_json, staged_output
from .stability import find_ranges, locus_trace
from .system import compose, grid_impedance
from .tables import case_table, delay_table, range_record
from .timesim import build_statespace, detect_stability, run_linear, run_sampled

EXIT_OK, EXIT_INPUT, EXIT_DIAGNOSTIC, EXIT_IO = 0, 1, 2, 3


def _margin(cfg: RunConfig) -> dict:
    p = cfg.inverter_params()
    LT = cfg.leakage() if cfg.analysis.margin_include_LT else 0.0
    dm = delay_margin(p, step=cfg.analysis.margin_step_us * 1e-6, LT=LT)
    return {
        "margin.json": {
            "margin_us": None if dm.value is None else dm.value * 1e6,
            "tolerance_us": dm.tolerance * 1e6,
            "Td_range_us": [x * 1e6 for x in dm.Td_range],
            "LT_uH": LT * 1e6,
            "stable_throughout": dm.stable_throughout,
        }
    }


def _ranges(cfg: RunConfig) -> dict:
    m = compose(cfg.plant_groups(), cfg.grid_params())
    a = cfg.analysis
    r = find_ranges(m, cfg.swept, a.n_max, a.margin_tol_rad_s, a.workers)
    rec = range_record(r)
    rec["margin_tol_rad_s"] = a.margin_tol_rad_s
    return {"ranges.json": rec}


def _locus(cfg: RunConfig) -> dict:
    m = compose(cfg.plant_groups(), cfg.grid_params())
    lo, hi = cfg.analysis.locus_counts
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        rows = locus_trace(m, cfg.swept, range(lo, hi + 1), cfg.analysis.top_k)
    return {"locus.csv": csv_text(LOCUS_HEADER, rows)}


def _simulate(cfg: RunConfig) -> dict:
    m = compose(cfg.plant_groups(), cfg.grid_params())
    sc = cfg.sim_config()
    w = run_linear(build_statespace(m), sc) if sc.mode == "pade_linear" else run_sampled(m, sc)
    verdict = detect_stability(w, sc)
    labels = list(w.currents)
    header = ["t_s"] + [f"i_s_{lab}_A" for lab in labels] + ["v_pcc_V"]
    rows = zip(w.times, *(w.currents[lab] for lab in labels), w.pcc_voltage)
    return {
        "waveform.csv": csv_text(header, rows),
        "verdict.json": {
            "mode": sc.mode,
            "stable": verdict,
            "diverged_at_s": w.diverged_at,
            "duration_s": sc.duration,
            "counts": m.counts,
            "substeps_per_Ts": w.meta["substeps_per_Ts"],
        },
    }


def _derive_grid(cfg: RunConfig) -> dict:
    z = grid_impedance(cfg.grid_params())
    return {"grid.json": {"Rg_ohm": z.Rg, "Lg_H": z.Lg, "trace": z.trace}}


def _reproduce(cfg: RunConfig) -> dict:
    a = cfg.analysis
    base, LT, grid = cfg.inverter_params(), cfg.leakage(), cfg.grid_params()
    t2 = delay_table(base, LT, grid, a.Td_sweep_us, a.n_max, a.margin_tol_rad_s, a.workers)
    cases = case_table(base, LT, grid, None, a.n_max, a.margin_tol_rad_s, a.workers)
    return {
        "table_delay.json": {
            "rows": [dict(range_record(r), Td_us=td) for td, r in t2],
            "margin_tol_rad_s": a.margin_tol_rad_s,
        },
        "table_cases.json": {
            "rows": [
                dict(range_record(c.result), case=c.case, originals=c.originals, added=c.added)
                for c in cases
            ],
            "margin_tol_rad_s": a.margin_tol_rad_s,
        },
    }


COMMANDS = {
    "margin": _margin,
    "ranges": _ranges,
    "locus": _locus,
    "simulate": _simulate,
    "derive-grid": _derive_grid,
    "reproduce-tables": _reproduce,
}


def execute(command: str, cfg: RunConfig, digest: str, out_dir: str) -> list:
    """Run one command and write its files plus ``provenance.json``.

    Returns the written file names.  Nothing is written if the command fails.
    """
    if command not in COMMANDS:
        raise InputError(f"unknown command {command!r}")
    results = COMMANDS[command](cfg)
    results["provenance.json"] = {
        "command": command,
        "config_sha256": digest,
        "tool": "pvhosting",
        "tool_version": __version__,
    }
    with staged_output(out_dir) as put:
        for name in sorted(results):
            body = results[name]
            put(name, body if isinstance(body, str) else dumps_json(body))
    return sorted(results)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="pvhosting", description=__doc__.split("\n\n")[0].strip())
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = ap.add_subparsers(dest="command", required=True, metavar="command")
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("config", nargs="?", help="TOML config (default: shipped profile)")
        p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE", dest="overrides")
        p.add_argument("--out", default=None, help="output directory (overrides output.directory)")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg, text = load_config(args.config, args.overrides)
    except ConfigError as exc:
        for e in exc.errors:
            print(f"config error: {e}", file=sys.stderr)
        return EXIT_INPUT
    except OSError as exc:
        print(f"cannot read config: {exc}", file=sys.stderr)
        return EXIT_IO
    out_dir = args.out or cfg.output.directory
    try:
        names = execute(args.command, cfg, config_digest(text, args.overrides), out_dir)
    except (DiagnosticError, DomainError) as exc:
        print(f"engine diagnostic: {exc}", file=sys.stderr)
        return EXIT_DIAGNOSTIC
    except InputError as exc:
        print(f"invalid input: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except OSError as exc:
        print(f"output error: {exc}", file=sys.stderr)
        return EXIT_IO
    for n in names:
        print(f"{out_dir}/{n}")
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
