"""Parameter sweeps, CSV / gnuplot emission and simulator run manifests."""
from __future__ import annotations

import csv
import json
import math
import os
import subprocess
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np

from . import __version__, linear, phy, solver
from .params import NetworkConfig, derive_slot_durations

AXES = ("lambda", "snr", "N", "z0", "payload")
MODES = ("analytic", "simulate", "linear")
DEFAULT_SEED = 1
THREADS_ENV = "DCF_ANALYZER_THREADS"


@dataclass(frozen=True)
class SweepSpec:
    axis: str
    values: tuple
    config: NetworkConfig = field(default_factory=NetworkConfig)
    lam: float = 10.0
    snr_db: float = 45.0
    modes: tuple = ("analytic", "linear")
    replications: int = 1
    base_seed: int = DEFAULT_SEED
    slots: int = 10**6
    duration_us: float | None = None

    def __post_init__(self):
        if self.axis not in AXES:
            raise ValueError(f"axis must be one of {AXES}, got {self.axis!r}")
        if not self.values:
            raise ValueError("sweep needs at least one value")
        if any(b <= a for a, b in zip(self.values, self.values[1:])):
            raise ValueError("sweep values must be strictly increasing")
        unknown = set(self.modes) - set(MODES)
        if unknown:
            raise ValueError(f"unknown mode(s) {sorted(unknown)}; choose from {MODES}")
        if "simulate" in self.modes and self.replications < 1:
            raise ValueError("replications must be >= 1 when simulating")

    def point(self, value) -> tuple[NetworkConfig, float, float]:
        cfg, lam, snr = self.config, self.lam, self.snr_db
        if self.axis == "lambda":
            lam = float(value)
        elif self.axis == "snr":
            snr = float(value)
        elif self.axis == "N":
            cfg = cfg.replace(n_stations_N=int(value))
        elif self.axis == "z0":
            cfg = cfg.replace(capture_ratio_z0=float(value))
        else:
            cfg = cfg.replace(payload=int(value))
        return cfg, lam, snr


@dataclass
class ReportRow:
    axis: str
    value: float
    N: int
    lam: float
    snr_db: float
    z0_db: float
    payload: int
    capture_mode: str
    S_analytic: float | None = None
    S_linear: float | None = None
    lambda_c: float | None = None
    S_sim_mean: float | None = None
    S_sim_stderr: float | None = None
    tau_analytic: float | None = None
    tau_sim: float | None = None
    p_cap_analytic: float | None = None
    p_cap_sim: float | None = None
    residual: float | None = None
    seed: int | None = None
    status: str = "ok"


COLUMNS = tuple(f.name for f in fields(ReportRow))
_INT_COLUMNS = {"N", "payload", "seed"}
_STR_COLUMNS = {"axis", "capture_mode", "status"}


def replication_seed(base_seed: int, index: int, rep: int) -> int:
    """Seed of replication ``rep`` at sweep point ``index``: independent streams per run."""
    return int(np.random.SeedSequence([base_seed, index, rep]).generate_state(1, np.uint64)[0])


def worker_count(n_tasks: int) -> int:
    cap = os.environ.get(THREADS_ENV)
    n = os.cpu_count() or 1
    if cap:
        n = min(n, max(1, int(cap)))
    return max(1, min(n, n_tasks))


def _evaluate(args) -> ReportRow:
    spec, index, value = args
    cfg, lam, snr = spec.point(value)
    row = ReportRow(spec.axis, value, cfg.n_stations_N, lam, snr, cfg.capture_ratio_z0,
                    cfg.payload, cfg.capture_mode, seed=spec.base_seed)
    errors = []
    try:
        p_e = phy.fer(cfg, phy.db_to_linear(snr)).p_e_total
    except ValueError as exc:
        row.status = f"phy_error: {exc}"
        return row
    d = derive_slot_durations(cfg)
    if "linear" in spec.modes:
        if p_e < 1:
            lm = linear.linear_model(cfg, p_e=p_e)
            row.S_linear, row.lambda_c = lm(lam), lm.lambda_c
        else:
            row.S_linear, row.lambda_c = 0.0, 0.0
    if "analytic" in spec.modes:
        try:
            res = solver.throughput(cfg, lam, snr, p_e=p_e)
            row.S_analytic = res.s_normalized
            if res.operating_point is not None:
                op = res.operating_point
                row.tau_analytic, row.p_cap_analytic, row.residual = op.tau, op.p_cap, op.residual
        except solver.SolverError as exc:
            errors.append(f"solver_error: {exc}")
    if "simulate" in spec.modes:
        from .sim import run_sim

        S, taus, caps = [], [], []
        try:
            for r in range(spec.replications):
                with warnings.catch_warnings():
                    warnings.simplefilter("ignore")
                    st = run_sim(cfg, lam, snr, slots=spec.slots, duration_us=spec.duration_us,
                                 seed=replication_seed(spec.base_seed, index, r), p_e=p_e)
                S.append(st.s_empirical)
                taus.append(st.tau_empirical)
                caps.append(st.p_cap_empirical)
            row.S_sim_mean = float(np.mean(S))
            row.S_sim_stderr = float(np.std(S, ddof=1) / math.sqrt(len(S))) if len(S) > 1 else 0.0
            row.tau_sim, row.p_cap_sim = float(np.mean(taus)), float(np.mean(caps))
        except (ValueError, RuntimeError) as exc:
            errors.append(f"sim_error: {exc}")
    if errors:
        row.status = "; ".join(errors)
    return row


def run_sweep(spec: SweepSpec, workers: int | None = None) -> list[ReportRow]:
    """Evaluate every sweep point; rows come back in axis order whatever the pool does."""
    tasks = [(spec, i, v) for i, v in enumerate(spec.values)]
    n = worker_count(len(tasks)) if workers is None else workers
    if n <= 1:
        return [_evaluate(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=n) as pool:
        return list(pool.map(_evaluate, tasks))


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)
    return str(value)


def write_rows(fh, rows, columns=COLUMNS) -> None:
    """CSV with a header; floats printed with ``repr`` so they round-trip exactly."""
    w = csv.writer(fh)
    w.writerow(columns)
    for r in rows:
        d = r if isinstance(r, dict) else asdict(r)
        w.writerow([_fmt(d.get(c)) for c in columns])


def write_csv(rows, path: Path, columns=COLUMNS) -> Path:
    path = Path(path)
    with path.open("w", newline="") as fh:
        write_rows(fh, rows, columns)
    return path


def read_csv(path: Path) -> list[ReportRow]:
    rows = []
    with Path(path).open(newline="") as fh:
        for rec in csv.DictReader(fh):
            kw = {}
            for c in COLUMNS:
                v = rec[c]
                if c in _STR_COLUMNS:
                    kw[c] = v
                elif v == "":
                    kw[c] = None
                elif c in _INT_COLUMNS:
                    kw[c] = int(v)
                else:
                    kw[c] = float(v)
            rows.append(ReportRow(**kw))
    return rows


def plot_script(rows: list[ReportRow], csv_name: str) -> str:
    col = {c: i + 1 for i, c in enumerate(COLUMNS)}
    axis = rows[0].axis
    lines = [
        f"# throughput vs {axis}; data in {csv_name}",
        "set datafile separator ','",
        f"set xlabel '{axis}'",
        "set ylabel 'normalized throughput S'",
        "set key bottom right",
        "set grid",
    ]
    if axis == "lambda":
        lcs = {r.lambda_c for r in rows if r.lambda_c is not None}
        if len(lcs) == 1:
            lc = lcs.pop()
            lines.append(f"set arrow from {lc!r}, graph 0 to {lc!r}, graph 1 nohead dashtype 2")
            lines.append(f"set label 'lambda_c' at {lc!r}, graph 0.95 offset 0.5,0")
    plots = [f"'{csv_name}' skip 1 using {col['value']}:{col['S_analytic']} with lines title 'analytic'"]
    if any(r.S_sim_mean is not None for r in rows):
        plots.append(f"'{csv_name}' skip 1 using {col['value']}:{col['S_sim_mean']}:{col['S_sim_stderr']} "
                     "with yerrorbars pointtype 3 title 'simulated'")
    if any(r.S_linear is not None for r in rows) and axis == "lambda":
        plots.append(f"'{csv_name}' skip 1 using {col['value']}:{col['S_linear']} with lines dashtype 3 title 'linear'")
    lines.append("plot " + ", \\\n     ".join(plots))
    return "\n".join(lines) + "\n"


def emit_report(rows: list[ReportRow], fmt: str, out_dir, stem: str = "sweep") -> list[Path]:
    """Write ``<stem>.csv`` and, for ``fmt='plot'``, a gnuplot script next to it."""
    if not rows:
        raise ValueError("nothing to report")
    if fmt not in ("csv", "plot"):
        raise ValueError(f"format must be csv or plot, got {fmt!r}")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = [write_csv(rows, out / f"{stem}.csv")]
    if fmt == "plot":
        gp = out / f"{stem}.gp"
        gp.write_text(plot_script(rows, f"{stem}.csv"))
        paths.append(gp)
    return paths


def table2_rows(cfg: NetworkConfig | None = None) -> list[dict]:
    from .validation import TABLE_N, TABLE_ROWS, table2

    values = table2(cfg)
    return [{"payload": p, "snr_db": s, **{f"N={n}": values[(p, s, n)] for n in TABLE_N}}
            for p, s in TABLE_ROWS]


def format_table2(rows: list[dict]) -> str:
    out, last = [], None
    for r in rows:
        if r["payload"] != last:
            heads = [k for k in r if k.startswith("N=")]
            out.append(f"E[PL]={r['payload']} byte | " + " | ".join(f"{h:>10}" for h in heads))
            last = r["payload"]
        out.append(f"SNR={r['snr_db']:g}dB".ljust(len(f"E[PL]={r['payload']} byte")) + " | "
                   + " | ".join(f"{r[h]:10.4f}" for h in heads))
    return "\n".join(out) + "\n"


def git_describe() -> str:
    try:
        res = subprocess.run(["git", "describe", "--always", "--dirty", "--tags"],
                             cwd=Path(__file__).resolve().parent, capture_output=True, text=True, timeout=5)
        if res.returncode == 0 and res.stdout.strip():
            return f"{__version__}+{res.stdout.strip()}"
    except (OSError, subprocess.SubprocessError):
        pass
    return __version__


def write_manifest(path, *, cfg: NetworkConfig, lam: float, snr_db: float, seed: int,
                   replications: int, slots: int | None, duration_us: float | None, backend: str) -> Path:
    manifest = {
        "config": cfg.to_dict(), "lambda": lam, "snr_db": snr_db, "seed": seed,
        "replications": replications, "slots": slots, "duration_us": duration_us,
        "backend": backend, "version": git_describe(),
    }
    path = Path(path)
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return path
