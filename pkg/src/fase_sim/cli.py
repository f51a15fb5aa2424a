"""fase-sim command line: simulate, attack, compare.

Exit status: 0 success, 1 validation error, 2 I/O error.
Set FASE_SIM_LOG (DEBUG, INFO, WARNING, ...) for log output on stderr.
"""
from __future__ import annotations

import argparse
import logging
import os
import sys
from dataclasses import replace
from pathlib import Path

from .attack import AttackConfig, VictimModel, infer_secret, run_prime_probe
from .config import dump_config, load_config, load_traces
from .errors import ConfigError
from .flush import Mode
from .reporting import compare_modes
from .sim import run_simulation

log = logging.getLogger("fase_sim")

EXIT_OK, EXIT_INVALID, EXIT_IO = 0, 1, 2


def _setup_logging():
    level = os.environ.get("FASE_SIM_LOG", "WARNING").upper()
    if level.isdigit():
        level = int(level)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)


def _parse_sets(text: str) -> tuple:
    if not text.strip():
        return ()
    try:
        return tuple(int(t, 0) for t in text.split(","))
    except ValueError:
        raise ConfigError(f"--secret must be comma-separated set indices, got {text!r}") from None


def _parse_modes(text: str) -> list:
    return [Mode.parse(t) for t in text.split(",") if t.strip()]


def _out_dir(args, cfg) -> Path:
    out = Path(args.out or cfg.output_dir or ".")
    out.mkdir(parents=True, exist_ok=True)
    return out


def _load(args):
    cfg = load_config(args.config)
    if getattr(args, "seed", None) is not None:
        cfg = replace(cfg, seed=args.seed)
    return cfg


def cmd_simulate(args) -> int:
    cfg = _load(args)
    if args.mode:
        cfg = cfg.with_mode(Mode.parse(args.mode))
    traces = load_traces(args.trace, allow_force=args.allow_force)
    report = run_simulation(cfg.sim_config(traces))
    out = _out_dir(args, cfg)
    (out / "config.txt").write_text(dump_config(cfg))
    (out / "summary.csv").write_text(report.summary_csv())
    (out / "flushes.csv").write_text(report.per_flush_csv())
    (out / "processes.csv").write_text(report.per_process_csv())
    print(report.summary_csv(), end="")
    return EXIT_OK


def cmd_attack(args) -> int:
    cfg = _load(args)
    mode = Mode.parse(args.mode) if args.mode else cfg.mode
    if args.samples < 1:
        raise ConfigError(f"--samples must be >= 1, got {args.samples}")
    victim = VictimModel(_parse_sets(args.secret), args.accesses_per_set, args.critical)
    victim.validate(cfg.geometry)
    attack_cfg = AttackConfig(cfg.geometry, cfg.latencies, cfg.cost, victim, args.noise, cfg.seed)
    matrix = run_prime_probe(attack_cfg, mode, args.samples)
    score = infer_secret(matrix, victim.secret, args.threshold)
    out = _out_dir(args, cfg)
    (out / "probe_matrix.csv").write_text(matrix.to_csv())
    (out / "leakage.csv").write_text(score.to_csv())
    print(score.to_csv(), end="")
    return EXIT_OK


def cmd_compare(args) -> int:
    cfg = _load(args)
    traces = load_traces(args.trace, allow_force=args.allow_force)
    comparison = compare_modes(cfg, traces, _parse_modes(args.modes))
    out = _out_dir(args, cfg)
    (out / "overhead.csv").write_text(comparison.overhead_csv())
    (out / "savings.csv").write_text(comparison.savings_csv())
    for mode, rep in comparison.reports.items():
        (out / f"summary_{mode.value}.csv").write_text(rep.summary_csv())
    print(comparison.table())
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="fase-sim", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--config", required=True, help="key=value config file")
        sp.add_argument("--out", help="output directory (default: output_dir from config, else .)")
        sp.add_argument("--seed", type=int, help="override the config seed")

    sp = sub.add_parser("simulate", help="run traces under the configured mode")
    common(sp)
    sp.add_argument("--trace", action="append", required=True, help="trace file (repeatable)")
    sp.add_argument("--mode", help="override the config mode")
    sp.add_argument("--allow-force", action="store_true", help="accept test-only force directives")
    sp.set_defaults(func=cmd_simulate)

    sp = sub.add_parser("attack", help="Prime+Probe against a synthetic victim")
    common(sp)
    sp.add_argument("--secret", default="0,2,3", help="comma-separated set indices the victim touches")
    sp.add_argument("--samples", type=int, default=100)
    sp.add_argument("--mode", help="baseline, naive, llsf or clsf (default: config mode)")
    sp.add_argument("--threshold", type=float, help="classification margin in cycles")
    sp.add_argument("--accesses-per-set", type=int, default=1)
    sp.add_argument("--critical", action=argparse.BooleanOptionalAction, default=True,
                    help="victim brackets its accesses with scf=1/scf=0")
    sp.add_argument("--noise", type=int, default=0, help="uniform +/- jitter per matrix entry")
    sp.set_defaults(func=cmd_attack)

    sp = sub.add_parser("compare", help="run the same traces under several modes")
    common(sp)
    sp.add_argument("--trace", action="append", required=True)
    sp.add_argument("--modes", default="baseline,naive,llsf,clsf")
    sp.add_argument("--allow-force", action="store_true")
    sp.set_defaults(func=cmd_compare)
    return p


def main(argv=None) -> int:
    _setup_logging()
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as e:
        print(f"fase-sim: error: {e}", file=sys.stderr)
        return EXIT_INVALID
    except OSError as e:
        print(f"fase-sim: I/O error: {e}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
