"""Command line front end.

Exit codes: 0 success, 1 invariant violation (or failed check), 2 usage or
configuration error.  Errors go to stderr; ``--json`` prints a machine
readable summary on stdout.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import sys
from pathlib import Path

import numpy as np

from .config import parse_config, serialize_config
from .core import FIELDS, ConfigError, PhysParams
from .diagnostics import check_bounds, write_violations_csv
from .driver import grid_from_config, setup_run, velocity_from_config
from .io import read_checkpoint
from .thermo import max_saturation_mixing_ratio
from .velocity import validate_velocity

EXIT_OK, EXIT_VIOLATION, EXIT_USAGE = 0, 1, 2

log = logging.getLogger("warmcloud")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else str(v)
    if isinstance(obj, np.integer):
        return int(obj)
    return obj


def _emit(args, payload: dict, text: str):
    if args.json:
        print(json.dumps(_jsonable(payload), indent=2))
    else:
        print(text)


def _config_path(args):
    path = args.config_pos or args.config
    if not path:
        raise ConfigError("a configuration file is required (positional or --config)")
    return path


def cmd_run(args) -> int:
    from .driver import run

    cfg = parse_config(_config_path(args))
    out = run(cfg, args.out, args.threads)
    s = out.summary()
    text = (f"t={s['t']:g} steps={s['steps']} violations={s['violations']} clip_events={s['clip_events']}\n"
            + "\n".join(f"{f}: min={s[f + '_min']:.6g} max={s[f + '_max']:.6g}" for f in FIELDS)
            + f"\noutput: {out.out_dir}")
    _emit(args, s, text)
    if out.error:
        print(f"error: {out.error}", file=sys.stderr)
        return EXIT_VIOLATION
    if out.result.violations:
        v = out.result.violations[0]
        print(f"invariant violation: {len(out.result.violations)} cells, first {v}", file=sys.stderr)
        return EXIT_VIOLATION
    return EXIT_OK


def cmd_validate_velocity(args) -> int:
    cfg = parse_config(_config_path(args))
    params = cfg.params()
    grid = grid_from_config(cfg, params)
    vel = velocity_from_config(cfg, grid)
    times = np.linspace(0.0, cfg["stepping"]["t_end"], 5)
    reports = []
    for t in times:
        rep = validate_velocity(vel(float(t)), grid, cfg["velocity"]["div_tol"], cfg["velocity"]["flux_tol"])
        reports.append({"t": float(t), **rep.as_dict()})
    ok = all(r["passed"] for r in reports)
    text = "\n".join(f"t={r['t']:g} div={r['max_divergence']:.3e} (tol {r['div_tol']:.3e}) "
                     f"normal={r['max_normal_flux']:.3e} (tol {r['flux_tol']:.3e}) "
                     f"face_div={r['max_face_divergence']:.3e} {'ok' if r['passed'] else 'FAIL'}"
                     for r in reports)
    _emit(args, {"passed": ok, "reports": reports}, text)
    return EXIT_OK if ok else EXIT_VIOLATION


def cmd_mms(args) -> int:
    from .mms import CASES, mms_convergence

    cfg = parse_config(_config_path(args))
    m = cfg["mms"]
    kw = {} if m["t_end"] is None else {"t_end": m["t_end"]}
    case = CASES[m["case"]](**kw)
    res = mms_convergence(case, m["levels"], workers=args.threads or cfg["run"]["workers"])
    exp = case.expected_order
    ok = not res.flagged
    if not math.isnan(exp):
        ok = ok and all(abs(o - exp) <= 0.2 for o in res.orders.values())
    else:
        ok = ok and all(max(e) <= 1e-12 for e in res.errors.values())
    payload = {"case": case.name, "expected_order": exp, "passed": ok, **res.as_dict()}
    lines = [f"case {case.name}: levels {res.levels}"]
    for f in FIELDS:
        lines.append(f"{f}: errors {', '.join(f'{e:.3e}' for e in res.errors[f])} order {res.orders[f]:.3f}")
    if res.flagged:
        lines.append(f"non-monotone error decay: {', '.join(res.flagged)}")
    _emit(args, payload, "\n".join(lines))
    return EXIT_OK if ok else EXIT_VIOLATION


def cmd_check(args) -> int:
    params = parse_config(args.config).params() if args.config else None
    path = args.config_pos
    if not path:
        raise ConfigError("check needs a snapshot path")
    state, grid, _ = read_checkpoint(path, params)
    params = params or PhysParams()
    qv_star = args.qv_star
    if qv_star is None:
        qv_star = max(float(state.interior("qv").max()), max_saturation_mixing_ratio(grid.p1, params))
    rep = check_bounds(state, grid, params, qv_star)
    rows = [v._asdict() for v in rep]
    if args.out:
        Path(args.out).mkdir(parents=True, exist_ok=True)
        write_violations_csv(Path(args.out) / "violations.csv", rep)
    text = f"{len(rows)} violations"
    if rows:
        text += "\n" + "\n".join(",".join(str(r[k]) for k in ("t", "field", "i", "j", "k", "value", "bound"))
                                 for r in rows)
    _emit(args, {"violations": rows, "qv_star": qv_star, "passed": not rows}, text)
    return EXIT_VIOLATION if rows else EXIT_OK


def cmd_print_params(args) -> int:
    cfg = parse_config(_config_path(args))
    params = cfg.params()
    s = setup_run(cfg, workers=1)
    out = params.as_dict()
    out.update(T_crit=params.T_crit, E=params.E, kappa1=params.kappa1, qv_star=s.qv_star,
               qvs_max_on_grid=max_saturation_mixing_ratio(s.grid.p1, params),
               w_min=float(s.grid.w.min()), w_max=float(s.grid.w.max()))
    text = "\n".join(f"{k} = {v!r}" for k, v in out.items())
    if args.echo:
        text += "\n\n" + serialize_config(cfg)
    _emit(args, out, text)
    return EXIT_OK


COMMANDS = {"run": cmd_run, "validate-velocity": cmd_validate_velocity, "mms": cmd_mms,
            "check": cmd_check, "print-params": cmd_print_params}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="configuration file (INI)")
    common.add_argument("--out", help="output directory")
    common.add_argument("--json", action="store_true", help="machine-readable summary on stdout")
    common.add_argument("--threads", type=int, default=None, help="worker threads for pointwise kernels")
    common.add_argument("--log-level", default="WARNING", help="logging level (default WARNING)")
    ap = _Parser(prog="warmcloud", description="Warm-cloud moisture transport simulator")
    sub = ap.add_subparsers(dest="command", required=True, parser_class=_Parser)
    helps = {"run": "run a simulation", "validate-velocity": "check the configured velocity field",
             "mms": "manufactured-solution convergence study", "check": "bound check of a checkpoint file",
             "print-params": "resolved constants and derived quantities"}
    for name, h in helps.items():
        p = sub.add_parser(name, help=h, parents=[common])
        p.add_argument("config_pos", nargs="?", metavar="snapshot" if name == "check" else "config")
        if name == "check":
            p.add_argument("--qv-star", type=float, default=None, dest="qv_star")
        if name == "print-params":
            p.add_argument("--echo", action="store_true", help="also print the fully resolved configuration")
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as err:
        return int(err.code) if isinstance(err.code, int) else EXIT_USAGE
    level = getattr(logging, str(args.log_level).upper(), None)
    if not isinstance(level, int):
        print(f"warmcloud: error: unknown log level {args.log_level!r}", file=sys.stderr)
        return EXIT_USAGE
    logging.basicConfig(level=level, stream=sys.stderr, format="%(levelname)s %(name)s: %(message)s")
    if args.threads is not None and args.threads < 1:
        print("warmcloud: error: --threads must be >= 1", file=sys.stderr)
        return EXIT_USAGE
    try:
        return COMMANDS[args.command](args)
    except ConfigError as err:
        print(f"warmcloud: config error: {err}", file=sys.stderr)
        return EXIT_USAGE
    except (FileNotFoundError, IsADirectoryError, PermissionError) as err:
        print(f"warmcloud: error: {err}", file=sys.stderr)
        return EXIT_USAGE
    except ValueError as err:
        print(f"warmcloud: error: {err}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
