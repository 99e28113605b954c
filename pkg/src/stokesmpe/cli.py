"""Command-line entry point: ``stokesmpe converge ...``."""
from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .harness import ConvergenceConfig, emit_report, rates, run_convergence_study

CONFIG_KEYS = {
    "levels": int, "n0": int, "dt": float, "t_final": float, "alpha_e": float, "out": str,
    "format": str, "jump": str, "include_eta_data": None, "initial_displacement": str, "parallel": None,
}


def _bool(text: str) -> bool:
    v = text.strip().lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def read_config(path) -> dict:
    """Parse ``key = value`` lines; ``#`` starts a comment."""
    out = {}
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"{path}:{lineno}: expected 'key = value'")
        key, value = (s.strip() for s in line.split("=", 1))
        key = key.replace("-", "_")
        if key not in CONFIG_KEYS:
            raise ValueError(f"{path}:{lineno}: unknown key {key!r}")
        conv = CONFIG_KEYS[key] or _bool
        out[key] = conv(value)
    return out


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="stokesmpe", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)
    c = sub.add_parser("converge", help="run the manufactured-solution convergence study")
    c.add_argument("--levels", type=int, default=4, help="number of refinement levels")
    c.add_argument("--n0", type=int, default=4, help="cells per square edge on the coarsest level")
    c.add_argument("--dt", type=float, default=1e-7, help="time step")
    c.add_argument("--t-final", dest="t_final", type=float, default=5e-7, help="final time")
    c.add_argument("--alpha-e", dest="alpha_e", type=float, default=0.5, help="Biot coefficient")
    c.add_argument("--out", default="convergence.csv", help="output file")
    c.add_argument("--format", choices=("csv", "svg"), default="csv")
    c.add_argument("--include-eta-data", dest="include_eta_data", action="store_true", default=False,
                   help="also compute the initial-data estimator (not added to eta_ok)")
    c.add_argument("--jump", choices=("traction", "symmetric"), default="traction",
                   help="norm used for interior face jumps")
    c.add_argument("--initial-displacement", dest="initial_displacement",
                   choices=("elastic_solve", "interpolate"), default="elastic_solve")
    c.add_argument("--parallel", action="store_true", default=False, help="run levels in parallel")
    c.add_argument("--config", type=Path, help="file of 'key = value' defaults; command-line values win")
    return parser


def parse_args(argv=None) -> argparse.Namespace:
    parser = build_parser()
    args = parser.parse_args(argv)
    if getattr(args, "config", None) is not None:
        sub = parser._subparsers._group_actions[0].choices[args.command]
        sub.set_defaults(**read_config(args.config))
        args = parser.parse_args(argv)
    return args


def main(argv=None) -> int:
    args = parse_args(argv)
    cfg = ConvergenceConfig(levels=args.levels, n0=args.n0, dt=args.dt, t_final=args.t_final,
                            alpha_e=args.alpha_e, jump=args.jump, include_eta_data=args.include_eta_data,
                            initial_displacement=args.initial_displacement, parallel=args.parallel)
    rows = run_convergence_study(cfg)
    print(f"{'n':>4} {'ndof':>7} {'ERR_e':>11} {'eta_ok':>11} {'I_eff':>8} {'eta_time':>11}")
    for r in rows:
        print(f"{r.n:4d} {r.ndof:7d} {r.ERR_e:11.4e} {r.eta_ok:11.4e} {r.I_eff:8.2f} {r.eta_time:11.4e}")
    for key in ("ERR_e", "eta_ok"):
        print(f"rate {key}: " + " ".join(f"{v:.2f}" for v in rates(rows, key)))
    path = emit_report(rows, args.out, args.format)
    print(f"wrote {path}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
