"""Command-line entry point: `ufft <experiment> [options]`.

Exit codes: 0 success, 2 configuration error, 3 numerical failure.
Progress goes to stderr; CSV to --out or stdout.
"""
import argparse
import sys

from .errors import UfftError
from .experiments import (
    AnalysisConfig, IsiConfig, RadarConfig,
    run_gabp_analysis, run_isi_experiment, run_radar_experiment,
)


def parse_snr_grid(text):
    """Grid syntax: 'start:step:stop' (inclusive) or comma-separated values."""
    if ":" in text:
        parts = text.split(":")
        if len(parts) != 3:
            raise ValueError("grid must be start:step:stop")
        start, step, stop = (float(p) for p in parts)
        if step <= 0:
            raise ValueError("grid step must be positive")
        n = int(round((stop - start) / step))
        grid = [start + i * step for i in range(n + 1)]
    else:
        grid = [float(p) for p in text.split(",") if p]
    if not grid:
        raise ValueError("empty SNR grid")
    return [int(g) if float(g).is_integer() else g for g in grid]


def _add_common(p):
    p.add_argument("--trials", type=int, default=100)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default=None)
    p.add_argument("--tau-conv", type=float, default=1e-5)
    p.add_argument("--max-layered-iters", type=int, default=50)


def build_parser():
    ap = argparse.ArgumentParser(prog="ufft", description=__doc__)
    sub = ap.add_subparsers(dest="cmd", required=True)

    g = sub.add_parser("gabp-analysis", help="GaBP iteration and accuracy study")
    g.add_argument("--n-min", type=int, default=8)
    g.add_argument("--n-max", type=int, default=4096)
    g.add_argument("--schedule", choices=["flooding", "layered", "both"], default="both")
    g.add_argument("--no-exact", action="store_true",
                   help="skip the dense exact posterior (iteration counts only)")
    _add_common(g)

    i = sub.add_parser("isi", help="BPSK detection over the ISI channel")
    i.add_argument("--snr", default="0:1:14")
    i.add_argument("--K", type=int, default=1000)
    i.add_argument("--L", type=int, default=4)
    i.add_argument("--beta", type=float, default=0.5)
    i.add_argument("--schedule", choices=["flooding", "layered"], default="flooding")
    i.add_argument("--methods", default="zf,lmmse,fftep,dftep,map")
    _add_common(i)

    r = sub.add_parser("radar", help="sparse radar channel estimation")
    r.add_argument("--snr", default="-15:1:15")
    r.add_argument("--N", type=int, default=1024)
    r.add_argument("--sparsity", type=float, default=0.01)
    r.add_argument("--c", type=float, default=3.25)
    r.add_argument("--L", type=int, default=4)
    r.add_argument("--beta", type=float, default=0.5)
    r.add_argument("--schedule", choices=["flooding", "layered"], default="flooding")
    r.add_argument("--methods", default="zf,lmmse_none,lmmse_gauss,dftep,fftep")
    _add_common(r)
    return ap


def main(argv=None):
    ap = build_parser()
    args = ap.parse_args(argv)
    try:
        if args.cmd == "gabp-analysis":
            cfg = AnalysisConfig(
                n_min=args.n_min, n_max=args.n_max, trials=args.trials,
                seed=args.seed, schedule=args.schedule, tau_conv=args.tau_conv,
                max_layered_iters=args.max_layered_iters,
                compute_errors=not args.no_exact, out=args.out,
            )
            if cfg.n_min < 2 or cfg.n_min & (cfg.n_min - 1) or cfg.n_max & (cfg.n_max - 1):
                raise ValueError("--n-min/--n-max must be powers of two >= 2")
        elif args.cmd == "isi":
            cfg = IsiConfig(
                snr_grid=parse_snr_grid(args.snr), trials=args.trials, K=args.K,
                L=args.L, beta=args.beta, schedule=args.schedule,
                tau_conv=args.tau_conv, max_layered_iters=args.max_layered_iters,
                seed=args.seed, methods=tuple(args.methods.split(",")), out=args.out,
            )
        else:
            cfg = RadarConfig(
                snr_grid=parse_snr_grid(args.snr), trials=args.trials, N=args.N,
                sparsity=args.sparsity, c=args.c, L=args.L, beta=args.beta,
                schedule=args.schedule, tau_conv=args.tau_conv,
                max_layered_iters=args.max_layered_iters, seed=args.seed,
                methods=tuple(args.methods.split(",")), out=args.out,
            )
        if args.trials < 1:
            raise ValueError("--trials must be >= 1")
    except ValueError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2

    try:
        if args.cmd == "gabp-analysis":
            run_gabp_analysis(cfg)
        elif args.cmd == "isi":
            run_isi_experiment(cfg)
        else:
            run_radar_experiment(cfg)
    except UfftError as exc:
        print(f"numerical failure (seed {args.seed}): {exc}", file=sys.stderr)
        return 3
    return 0


if __name__ == "__main__":
    sys.exit(main())
