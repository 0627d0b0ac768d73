"""Time the compiled slot loop against the pure-Python twin.

    python benchmarks/bench_kernel.py --slots 200000 --n 10 --lambda 20

Both backends run the same seed; the script checks they agree bit for bit
before reporting slots per second and the speed-up.
"""
import argparse
import time
import warnings

from dcf_analyzer import NetworkConfig
from dcf_analyzer.sim import kernels, run_sim


def bench(backend, cfg, lam, slots, seed, repeat):
    best, stats = float("inf"), None
    for _ in range(repeat):
        t0 = time.perf_counter()
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            stats = run_sim(cfg, lam, 45.0, slots=slots, seed=seed, backend=backend)
        best = min(best, time.perf_counter() - t0)
    return best, stats


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.split("\n")[0])
    ap.add_argument("--slots", type=int, default=200_000)
    ap.add_argument("--n", type=int, default=10)
    ap.add_argument("--lambda", dest="lam", type=float, default=20.0)
    ap.add_argument("--capture-mode", default="path-loss", choices=("off", "power-control", "path-loss"))
    ap.add_argument("--seed", type=int, default=1)
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args(argv)

    cfg = NetworkConfig(n_stations_N=args.n, capture_mode=args.capture_mode)
    available = kernels()
    results = {}
    for name in ("cython", "python"):
        if name not in available:
            print(f"{name:>7}: not built")
            continue
        # the Python twin is slow; one repetition is enough to measure it
        secs, stats = bench(name, cfg, args.lam, args.slots, args.seed, args.repeat if name == "cython" else 1)
        results[name] = (secs, stats)
        print(f"{name:>7}: {secs:8.3f} s  {stats.slots_total / secs:12.0f} slots/s  S={stats.s_empirical:.6f}")
    if len(results) == 2:
        (tc, sc), (tp, sp) = results["cython"], results["python"]
        print(f"speed-up: {tp / tc:.1f}x, identical counters: {sc.identical_to(sp)}")


if __name__ == "__main__":
    main()
