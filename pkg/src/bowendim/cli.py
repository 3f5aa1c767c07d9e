"""Command-line interface.

Every command resolves its configuration as defaults < --config file < flags,
writes a provenance header (version, config hash, seed, resolved config) at
the top of its primary artifact, and exits with 0 on success, 1 on a
computational failure and 2 on a usage or configuration error.
"""

from __future__ import annotations

import argparse
import io
import json
import os
import sys
from pathlib import Path

from . import __version__
from .config import Config, ConfigError, build, load_file
from .expfamily import DomainError

THREADS_ENV = "BOWENDIM_THREADS"


class UsageError(Exception):
    pass


# ------------------------------------------------------------------ helpers

def parse_floats(text: str) -> list[float]:
    """'1.1,1.2' or 'lo:hi:n' (n evenly spaced points, inclusive)."""
    text = text.strip()
    if ":" in text:
        parts = text.split(":")
        if len(parts) != 3:
            raise UsageError(f"range must be lo:hi:n, got {text!r}")
        lo, hi, n = float(parts[0]), float(parts[1]), int(parts[2])
        if n < 1:
            raise UsageError("range needs at least one point")
        if n == 1:
            return [lo]
        return [round(lo + (hi - lo) * i / (n - 1), 12) for i in range(n)]
    try:
        return [float(p) for p in text.replace(" ", "").split(",") if p]
    except ValueError as exc:
        raise UsageError(f"bad number list {text!r}") from exc


def _set_pairs(items) -> dict:
    out = {}
    for item in items or ():
        if "=" not in item:
            raise UsageError(f"--set expects key=value, got {item!r}")
        k, v = item.split("=", 1)
        out[k.strip().replace("-", "_")] = v.strip()
    return out


def resolve_config(args, overrides: dict) -> Config:
    file_values = load_file(args.config) if args.config else {}
    merged = dict(_set_pairs(args.set))
    merged.update({k: v for k, v in overrides.items() if v is not None})
    return build(file_values, merged)


def provenance(command: str, cfg: Config, seed, fmt: str) -> str:
    cfg_json = json.dumps(cfg.to_dict(), sort_keys=True, default=list)
    return (f"bowendim {__version__} format={fmt} command={command} "
            f"config={cfg.digest()} seed={seed}\nconfig {cfg_json}")


def json_provenance(command: str, cfg: Config, seed) -> dict:
    return {"header": provenance(command, cfg, seed, "json/1").splitlines()[0],
            "config": json.loads(json.dumps(cfg.to_dict(), default=list))}


def _comment(text: str, mark: str = "# ") -> str:
    return "".join(f"{mark}{line}\n" for line in text.splitlines())


def emit(args, data: bytes | str) -> None:
    blob = data.encode() if isinstance(data, str) else data
    if args.out and args.out != "-":
        Path(args.out).write_bytes(blob)
    else:
        sys.stdout.buffer.write(blob)
        sys.stdout.flush()


def set_threads(n: int | None) -> int:
    import numba

    if n is None:
        env = os.environ.get(THREADS_ENV)
        n = int(env) if env else numba.config.NUMBA_NUM_THREADS
    n = max(1, min(int(n), numba.config.NUMBA_NUM_THREADS))
    numba.set_num_threads(n)
    return n


def _law(cfg: Config, a: float, r: float):
    from .pressure import law_from_config

    return law_from_config(a, r, cfg)


def _fmt(x) -> str:
    return repr(float(x))


# ----------------------------------------------------------------- commands

def cmd_pressure(args) -> int:
    from .expfamily import Potential
    from .operator import BasePointFunctional, grid_from_config
    from .pressure import estimate_expected_pressure, tau_schedule
    from .randomdriver import sample_fiber

    over = {"steps": args.steps, "burn_in": args.burn_in}
    if args.tau is not None:
        over.update(tau_floor=args.tau, tau_numerator=0.0)
    cfg = resolve_config(args, over)
    law = _law(cfg, args.a, args.r)
    ts = parse_floats(args.t_grid)
    fiber = sample_fiber(law, args.seed, cfg.steps, cfg.cert_iters)
    grid = grid_from_config(cfg)
    l = BasePointFunctional(complex(cfg.xi0))
    out = io.StringIO()
    out.write(_comment(provenance("pressure", cfg, args.seed, "csv/1")))
    out.write("a,r,t,tau,ep,std_error,N,burn_in,seed\n")
    for t in ts:
        est = estimate_expected_pressure(fiber, Potential(t, tau_schedule(t, cfg)), l, cfg, grid)
        out.write(",".join([_fmt(args.a), _fmt(args.r), _fmt(t), _fmt(est.tau), _fmt(est.value),
                            _fmt(est.std_error), str(est.N), str(est.burn_in), str(args.seed)]))
        out.write("\n")
    emit(args, out.getvalue())
    return 0


DIM_COLUMNS = "a,r,h,residual,t_lo,t_hi,evaluations,seed\n"


def _dim_row(a, r, res, seed) -> str:
    if res is None:
        return f"{_fmt(a)},{_fmt(r)},nan,nan,nan,nan,0,{seed}\n"
    return ",".join([_fmt(a), _fmt(r), _fmt(res.h), _fmt(res.residual), _fmt(res.bracket[0]),
                     _fmt(res.bracket[1]), str(res.evaluations), str(seed)]) + "\n"


def _dim_overrides(args) -> dict:
    return {"steps": args.steps, "burn_in": args.burn_in}


def cmd_dimension(args) -> int:
    from .pressure import find_bowen_zero

    cfg = resolve_config(args, _dim_overrides(args))
    law = _law(cfg, args.a, args.r)
    res = find_bowen_zero(law, args.seed, cfg)
    emit(args, _comment(provenance("dimension", cfg, args.seed, "csv/1")) + DIM_COLUMNS
         + _dim_row(args.a, args.r, res, args.seed))
    return 0


def cmd_sweep(args) -> int:
    from .pressure import smoothness_from_cells, sweep_dimension

    over = _dim_overrides(args)
    over.update(seed_policy=args.seed_policy, workers=args.workers)
    cfg = resolve_config(args, over)
    a_grid, r_grid = parse_floats(args.a_grid), parse_floats(args.r_grid)
    for a in a_grid:
        for r in r_grid:
            _law(cfg, a, r)
    cells = sweep_dimension(a_grid, r_grid, args.seed, cfg)
    out = io.StringIO()
    out.write(_comment(provenance("sweep", cfg, args.seed, "csv/1")))
    out.write(DIM_COLUMNS)
    for c in cells:
        out.write(_dim_row(c.a, c.r, c.result, c.seed))
    emit(args, out.getvalue())
    failed = [c for c in cells if c.result is None]
    for c in failed:
        print(f"cell a={c.a} r={c.r}: {c.error}", file=sys.stderr)
    for r in r_grid:
        row = [c for c in cells if c.r == r and c.result is not None]
        if len(row) >= 12:
            rep = smoothness_from_cells(row)
            print(f"r={r}: chebyshev residual {rep.max_residual:.3g}, noise floor "
                  f"{rep.noise_floor:.3g}, smooth={rep.smooth}", file=sys.stderr)
    return 1 if failed else 0


def cmd_verify(args) -> int:
    from .verify import run_hypothesis_audit

    cfg = resolve_config(args, {})
    law = _law(cfg, args.a, args.r)
    rep = run_hypothesis_audit(law, args.seed, cfg)
    doc = json.loads(rep.to_json())
    doc["provenance"] = json_provenance("verify", cfg, args.seed)
    emit(args, json.dumps(doc, indent=2, sort_keys=True) + "\n")
    print(rep.summary(), file=sys.stderr)
    return 0 if rep.passed else 1


def cmd_julia(args) -> int:
    from .julia import backward_orbit_sample, rasterize
    from .randomdriver import sample_fiber

    over = {"julia_depth": args.depth, "julia_points": args.points, "julia_t": args.t,
            "window": args.window, "resolution": args.resolution}
    cfg = resolve_config(args, over)
    law = _law(cfg, args.a, args.r)
    depth = cfg.julia_depth
    fiber = sample_fiber(law, args.seed, max(depth, 1), cfg.cert_iters)
    sample = backward_orbit_sample(fiber, cfg.julia_points, depth, args.seed, cfg.julia_t,
                                   cfg.julia_eps_tail, cfg.xi0, cfg.delta)
    raster = rasterize(sample, cfg.window, cfg.resolution)
    emit(args, raster.to_pgm(provenance("julia", cfg, args.seed, "pgm/1")))
    worst = sample.residuals[-1] if sample.residuals else 0.0
    print(f"{len(sample)} points, {raster.total} in window, round-trip residual {worst:.3g}",
          file=sys.stderr)
    return 0


def cmd_oracle(args) -> int:
    from .expfamily import Potential
    from .oracle import monolithic_log_mass, oracle_bowen, tree_pressure
    from .randomdriver import sample_fiber

    over = {"oracle_depth": args.depth, "oracle_rel_tol": args.rel_tol,
            "node_budget": args.budget}
    cfg = resolve_config(args, over)
    law = _law(cfg, args.a, args.r)
    n = cfg.oracle_depth
    doc = {"a": args.a, "r": args.r, "mode": args.mode, "depth": n}
    if args.mode == "bowen":
        doc["h_oracle"] = oracle_bowen(law, cfg, n)
    else:
        t = cfg.oracle_t if args.t is None else args.t
        tau = cfg.oracle_tau if args.tau is None else args.tau
        pot = Potential(t, tau)
        doc.update(t=t, tau=tau)
        etas = sample_fiber(law, args.seed, n, cfg.cert_iters).etas
        if args.mode == "tree":
            tp = tree_pressure(list(etas), pot, complex(cfg.xi0), n, cfg.oracle_rel_tol,
                               cfg.node_budget)
            doc.update(log_value=tp.log_value, pressure=tp.log_value / n,
                       pruned_mass_bound=tp.pruned_mass_bound, nodes_expanded=tp.nodes_expanded)
        else:
            logs = monolithic_log_mass(list(etas), pot, n, cfg)
            doc.update(log_mass=[float(v) for v in logs], pressure=float(logs[-1]) / n,
                       step_ratio=float(logs[-1] - logs[-2]) if n > 1 else float(logs[0]))
    doc["provenance"] = json_provenance("oracle", cfg, args.seed)
    emit(args, json.dumps(doc, indent=2, sort_keys=True) + "\n")
    return 0


# ------------------------------------------------------------------- parser

def _common(p: argparse.ArgumentParser, law: bool = True) -> None:
    p.add_argument("--config", help="key = value configuration file")
    p.add_argument("--set", action="append", metavar="KEY=VALUE",
                   help="override any configuration key (repeatable)")
    p.add_argument("--seed", type=int, default=7)
    p.add_argument("--threads", type=int, default=None,
                   help=f"numba worker threads (default: ${THREADS_ENV} or all cores)")
    p.add_argument("--out", help="output file (default: stdout)")
    if law:
        p.add_argument("--a", type=float, required=True, help="centre of the parameter disk")
        p.add_argument("--r", type=float, default=0.0, help="radius of the parameter disk")


def _pair(text: str) -> tuple:
    vals = parse_floats(text)
    if len(vals) != 2:
        raise argparse.ArgumentTypeError("expected two numbers")
    return tuple(int(v) for v in vals)


def _window(text: str) -> tuple:
    vals = parse_floats(text)
    if len(vals) != 4:
        raise argparse.ArgumentTypeError("expected x0,x1,y0,y1")
    return tuple(vals)


def make_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="bowendim", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=f"bowendim {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("pressure", help="expected pressure on a t-grid (one shared fiber)")
    _common(p)
    p.add_argument("--t-grid", default="1.5", help="t values: 'a,b,c' or 'lo:hi:n'")
    p.add_argument("--tau", type=float, help="fixed tau instead of the schedule")
    p.add_argument("--steps", type=int)
    p.add_argument("--burn-in", type=int)
    p.set_defaults(func=cmd_pressure)

    p = sub.add_parser("dimension", help="zero h of the expected pressure")
    _common(p)
    p.add_argument("--steps", type=int)
    p.add_argument("--burn-in", type=int)
    p.set_defaults(func=cmd_dimension)

    p = sub.add_parser("sweep", help="dimension over an (a, r) grid")
    _common(p, law=False)
    p.add_argument("--a-grid", required=True, help="a values: 'a,b,c' or 'lo:hi:n'")
    p.add_argument("--r-grid", default="0", help="r values")
    p.add_argument("--seed-policy", choices=("per-cell", "shared"))
    p.add_argument("--workers", type=int, help="worker processes")
    p.add_argument("--steps", type=int)
    p.add_argument("--burn-in", type=int)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("verify", help="hypothesis audit (exit 0 iff all checks pass)")
    _common(p)
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("julia", help="backward-orbit image of a fiber Julia set (P5)")
    _common(p)
    p.add_argument("--depth", type=int)
    p.add_argument("--points", type=int)
    p.add_argument("--t", type=float, help="exponent of the branch weights")
    p.add_argument("--window", type=_window, help="x0,x1,y0,y1")
    p.add_argument("--resolution", type=_pair, help="width,height")
    p.set_defaults(func=cmd_julia)

    p = sub.add_parser("oracle", help="reference values by expansion")
    _common(p)
    p.add_argument("--mode", choices=("tree", "deep", "bowen"), default="deep")
    p.add_argument("--depth", type=int)
    p.add_argument("--t", type=float)
    p.add_argument("--tau", type=float)
    p.add_argument("--rel-tol", type=float)
    p.add_argument("--budget", type=int)
    p.set_defaults(func=cmd_oracle)
    return ap


def main(argv=None) -> int:
    ap = make_parser()
    args = ap.parse_args(argv)
    try:
        set_threads(args.threads)
        return args.func(args)
    except (UsageError, ConfigError, DomainError, ValueError, OSError) as exc:
        print(f"bowendim {args.command}: {exc}", file=sys.stderr)
        return 2
    except ArithmeticError as exc:
        print(f"bowendim {args.command}: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
