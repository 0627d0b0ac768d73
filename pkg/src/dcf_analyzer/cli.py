"""``dcf-analyzer`` command line.

Subcommands::

    solve      one operating point (analytic + linear model)
    sweep      vary one parameter, emit CSV or a gnuplot script
    simulate   replicated simulator runs with a manifest
    lambda-c   critical per-station load
    table2     lambda_c over payload/SNR/N
    validate   run the acceptance checks

Every configuration field can be set with ``--<field>`` (e.g. ``--cw_min_W 16``);
short aliases exist for the common ones. Randomness comes from ``--seed``,
default 1. ``DCF_ANALYZER_THREADS`` caps the sweep worker pool.
"""
from __future__ import annotations

import argparse
import sys
import warnings
from dataclasses import asdict, fields
from pathlib import Path

from . import linear, phy, report, solver
from .params import ConfigError, NetworkConfig, derive_slot_durations, load_config

ALIASES = {
    "n_stations_N": ("--n",),
    "capture_ratio_z0": ("--z0-db",),
    "capture_mode": ("--capture-mode",),
}
_CHOICES = {"capture_mode": ("power-control", "path-loss", "off"), "modulation": ("DBPSK", "DQPSK", "TABLE")}


def _config_args(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("network configuration")
    g.add_argument("--config", type=Path, help="flat TOML file; defaults to the shipped default.toml")
    for f in fields(NetworkConfig):
        g.add_argument(*ALIASES.get(f.name, ()), f"--{f.name}", dest=f.name, default=None,
                       choices=_CHOICES.get(f.name), metavar=None if f.name in _CHOICES else f.name.upper())


def _point_args(p: argparse.ArgumentParser, lam: bool = True) -> None:
    if lam:
        p.add_argument("--lambda", dest="lam", type=float, default=10.0, help="pkt/s per station (default 10)")
    p.add_argument("--snr-db", type=float, default=45.0, help="average SNR in dB (default 45)")


def _sim_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--replications", type=int, default=1)
    p.add_argument("--slots", type=int, default=10**6, help="slot budget per run (default 1e6)")
    p.add_argument("--duration-us", type=float, default=None, help="minimum simulated time per run")
    p.add_argument("--seed", type=int, default=report.DEFAULT_SEED)


def _out_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--out", type=Path, default=None, help="output directory (default: CSV on stdout)")
    p.add_argument("--format", choices=("csv", "plot"), default="csv")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="dcf-analyzer", description=__doc__.split("\n")[0])
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("solve", help="solve one operating point")
    _config_args(p)
    _point_args(p)

    p = sub.add_parser("sweep", help="sweep one parameter")
    _config_args(p)
    _point_args(p)
    p.add_argument("--axis", choices=report.AXES, default="lambda")
    p.add_argument("--values", required=True, help="comma-separated, strictly increasing")
    p.add_argument("--modes", default="analytic,linear", help="any of analytic,simulate,linear")
    _sim_args(p)
    _out_args(p)

    p = sub.add_parser("simulate", help="run the simulator")
    _config_args(p)
    _point_args(p)
    _sim_args(p)
    p.add_argument("--queue-capacity", type=int, default=1)
    p.add_argument("--post-backoff", action="store_true")
    p.add_argument("--out", type=Path, default=None)

    p = sub.add_parser("lambda-c", help="critical per-station load")
    _config_args(p)
    _point_args(p, lam=False)

    p = sub.add_parser("table2", help="lambda_c over payload/SNR/N")
    _config_args(p)
    _out_args(p)

    p = sub.add_parser("validate", help="run the acceptance checks")
    p.add_argument("--only", default=None, help="comma-separated criterion numbers")
    return ap


def _config(args) -> NetworkConfig:
    overrides = {f.name: getattr(args, f.name) for f in fields(NetworkConfig)
                 if getattr(args, f.name, None) is not None}
    return load_config(args.config, overrides)


def _write_rows(rows: list[dict], out: Path | None, name: str) -> None:
    if out is None:
        report.write_rows(sys.stdout, rows, tuple(rows[0].keys()))
        return
    out.mkdir(parents=True, exist_ok=True)
    path = report.write_csv(rows, out / name, columns=tuple(rows[0].keys()))
    print(path)


def cmd_solve(args) -> int:
    cfg = _config(args)
    try:
        res = solver.throughput(cfg, args.lam, args.snr_db)
    except solver.SolverError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    p_e = phy.fer(cfg, phy.db_to_linear(args.snr_db)).p_e_total
    print(f"S = {res.s_normalized!r}")
    if res.operating_point is not None:
        for k, v in asdict(res.operating_point).items():
            print(f"{k} = {v!r}")
    if p_e < 1:
        lm = linear.linear_model(cfg, p_e=p_e)
        print(f"S_linear = {lm(args.lam)!r}\nlambda_c = {lm.lambda_c!r}\ns_max = {lm.s_m!r}")
    return 0


def cmd_sweep(args) -> int:
    cfg = _config(args)
    try:
        values = tuple(float(v) for v in args.values.split(",") if v.strip())
        spec = report.SweepSpec(axis=args.axis, values=values, config=cfg, lam=args.lam, snr_db=args.snr_db,
                                modes=tuple(m.strip() for m in args.modes.split(",") if m.strip()),
                                replications=args.replications, base_seed=args.seed, slots=args.slots,
                                duration_us=args.duration_us)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    rows = report.run_sweep(spec)
    if args.out is None:
        report.write_rows(sys.stdout, rows)
    else:
        for path in report.emit_report(rows, args.format, args.out):
            print(path)
    bad = [r for r in rows if r.status != "ok"]
    for r in bad:
        print(f"{r.axis}={r.value}: {r.status}", file=sys.stderr)
    return 1 if bad else 0


def cmd_simulate(args) -> int:
    from .sim import BACKEND, run_sim

    cfg = _config(args)
    runs = []
    for r in range(args.replications):
        seed = args.seed + r
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always")
            st = run_sim(cfg, args.lam, args.snr_db, slots=args.slots, duration_us=args.duration_us, seed=seed,
                         queue_capacity=args.queue_capacity, post_backoff=args.post_backoff)
        for w in caught:
            print(f"warning (seed {seed}): {w.message}", file=sys.stderr)
        runs.append({"run": r, "seed": seed, **st.summary()})
    if args.out is not None:
        args.out.mkdir(parents=True, exist_ok=True)
        report.write_manifest(args.out / "manifest.json", cfg=cfg, lam=args.lam, snr_db=args.snr_db,
                              seed=args.seed, replications=args.replications, slots=args.slots,
                              duration_us=args.duration_us, backend=BACKEND)
    _write_rows(runs, args.out, "runs.csv")
    return 0


def cmd_lambda_c(args) -> int:
    cfg = _config(args)
    p_e = phy.fer(cfg, phy.db_to_linear(args.snr_db)).p_e_total
    if not p_e < 1:
        print(f"error: frame error rate {p_e} leaves no linear regime", file=sys.stderr)
        return 1
    print(repr(linear.lambda_c(cfg.n_stations_N, derive_slot_durations(cfg), p_e)))
    return 0


def cmd_table2(args) -> int:
    rows = report.table2_rows(_config(args))
    if args.out is None:
        sys.stdout.write(report.format_table2(rows))
    else:
        _write_rows(rows, args.out, "table2.csv")
    return 0


def cmd_validate(args) -> int:
    from . import validation

    numbers = [int(x) for x in args.only.split(",")] if args.only else None
    ok = True
    for n in numbers or sorted(validation.CRITERIA):
        res = validation.CRITERIA[n]()
        print(res.line(), flush=True)
        ok &= res.passed
    return 0 if ok else 1


COMMANDS = {"solve": cmd_solve, "sweep": cmd_sweep, "simulate": cmd_simulate, "lambda-c": cmd_lambda_c,
            "table2": cmd_table2, "validate": cmd_validate}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
