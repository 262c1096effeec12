"""Command line entry point: ``rmkp-lab <subcommand> [flags]``.

Every output starts with a header block holding the only run-dependent
field (the timestamp); everything after it is a pure function of the config
and seed.  Config files are INI-style ``key = value`` with one section per
subcommand plus ``[global]``; flags override file values.
"""
import argparse
import configparser
import csv
import io
import json
import logging
import sys
from datetime import datetime, timezone

import numpy as np

from . import __version__
from . import dispersion as dsp
from . import estimates as est
from . import illposed as ill
from . import solver as sol
from .spectral import NormSpec, bourgain_norm, field_to_dict, free_evolution, load_field, make_grid, sobolev_norm

log = logging.getLogger("rmkplab")

EXIT_OK, EXIT_NUMERIC, EXIT_USAGE = 0, 1, 2


class UsageError(ValueError):
    pass


def _timestamp():
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


def _header(cmd):
    return {"tool": "rmkp-lab", "version": __version__, "command": cmd, "timestamp": _timestamp()}


def _write_json(path, cmd, config, result):
    doc = {"header": _header(cmd), "config": config, "result": result}
    text = json.dumps(doc, indent=2, sort_keys=True, allow_nan=True)
    _emit(path, text + "\n")


def _write_csv(path, cmd, config, columns, rows):
    buf = io.StringIO()
    buf.write(f"# {json.dumps(_header(cmd), sort_keys=True)}\n")
    buf.write(f"# config {json.dumps(config, sort_keys=True)}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for r in rows:
        w.writerow([_fmt(x) for x in r])
    _emit(path, buf.getvalue())


def _fmt(x):
    if isinstance(x, (bool, np.bool_)):
        return str(bool(x)).lower()
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    return x


def _emit(path, text):
    if path in (None, "-"):
        sys.stdout.write(text)
    else:
        with open(path, "w") as fh:
            fh.write(text)


def _read_config(path):
    cp = configparser.ConfigParser()
    if path:
        if not cp.read(path):
            raise UsageError(f"cannot read config file {path}")
    return cp


def _merge(args, cp, section, defaults):
    """Flag value if given, else config value, else default; returns a plain dict."""
    out = {}
    for key, (typ, default) in defaults.items():
        flag = getattr(args, key, None)
        if flag is not None:
            out[key] = flag
            continue
        for sec in (section, "global"):
            if cp.has_option(sec, key):
                raw = cp.get(sec, key)
                try:
                    out[key] = typ(raw)
                except ValueError as e:
                    raise UsageError(f"[{sec}] {key}: {e}") from None
                break
        else:
            out[key] = default
    return out


def _bool(s):
    if isinstance(s, bool):
        return s
    v = str(s).strip().lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {s!r}")


def _floats(s):
    if isinstance(s, (list, tuple)):
        return [float(x) for v in s for x in (v if isinstance(v, (list, tuple)) else [v])]
    return [float(x) for x in str(s).replace(";", ",").split(",") if x.strip()]


# ---------------------------------------------------------------- subcommands

SOLVE = {"nx": (int, 64), "ny": (int, 64), "lx": (float, 2 * np.pi * 4), "ly": (float, 2 * np.pi * 4),
         "t_end": (float, 0.5), "dt": (float, 1e-3), "amp": (float, 0.1), "ic": (str, "gaussian"),
         "ic_file": (str, ""), "sample_every": (int, 0), "beta": (float, -1.0), "gamma": (float, 1.0),
         "linear": (_bool, False), "s1": (float, 0.0), "s2": (float, 0.0), "seed": (int, 0), "csv": (str, "")}


def _initial(cfg):
    g = make_grid(cfg["nx"], cfg["ny"], cfg["lx"], cfg["ly"])
    ic = cfg["ic"]
    if ic == "gaussian":
        return sol.gaussian_ic(g, cfg["amp"])
    if ic == "mode":
        return sol.mode_ic(g, cfg["amp"])
    if ic == "random":
        return sol.random_ic(g, cfg["amp"], seed=cfg["seed"])
    if ic == "file":
        if not cfg["ic_file"]:
            raise UsageError("--ic file needs --ic-file PATH")
        return load_field(cfg["ic_file"])
    raise UsageError(f"unknown initial condition {ic!r}")


def cmd_solve(args, cp):
    cfg = _merge(args, cp, "solve", SOLVE)
    u0 = _initial(cfg)
    params = sol.ModelParams(cfg["beta"], cfg["gamma"])
    every = cfg["sample_every"] or None
    tr = sol.solve(u0, params, cfg["t_end"], cfg["dt"], every, not cfg["linear"], cfg["s1"], cfg["s2"])
    result = {"times": tr.times.tolist(), "l2": tr.l2.tolist(), "sobolev": tr.sobolev.tolist(),
              "energy": tr.energy.tolist(),
              "l2_drift": float(np.max(np.abs(tr.l2 - tr.l2[0])) / tr.l2[0]),
              "final": field_to_dict(tr.fields[-1])}
    _write_json(args.out, "solve", cfg, result)
    if cfg["csv"]:
        rows = zip(tr.times, tr.l2, tr.sobolev, tr.energy)
        _write_csv(cfg["csv"], "solve", cfg, ["t", "l2", "sobolev", "energy"], rows)
    return EXIT_OK


REGIONS = {"samples": (int, 1000), "seed": (int, 0), "xi2_min": (float, dsp.XI2_MIN), "points": (str, "")}


def _region_points(cfg):
    if cfg["points"]:
        with open(cfg["points"]) as fh:
            rows = [r for r in csv.reader(fh) if r and not r[0].startswith("#")]
        if rows and not _is_number(rows[0][0]):
            rows = rows[1:]
        a = np.array([[float(r[0]), float(r[1])] for r in rows])
        return a[:, 0], a[:, 1]
    rng = np.random.default_rng(cfg["seed"])
    n = cfg["samples"]
    if n < 1:
        raise UsageError("samples must be >= 1")
    xi2 = 10.0 ** rng.uniform(0, 9, n) * rng.choice([-1.0, 1.0], n)
    xi1 = xi2 * 10.0 ** rng.uniform(-12, 0, n) * rng.choice([-1.0, 1.0], n)
    return xi1, xi2


def _is_number(s):
    try:
        float(s)
        return True
    except ValueError:
        return False


def cmd_regions(args, cp):
    cfg = _merge(args, cp, "regions", REGIONS)
    xi1, xi2 = _region_points(cfg)
    ok = (xi1 != 0) & (xi2 != 0) & (xi1 + xi2 != 0)
    xi1, xi2 = xi1[ok], xi2[ok]
    m = dsp.region_masks(xi1, xi2, cfg["xi2_min"])
    cols = ["xi1", "xi2", "omega0", "omega1", "omega2", "A", "B", "regular", "singular"]
    rows = [[xi1[i], xi2[i]] + [bool(m[c][i]) for c in cols[2:]] for i in range(xi1.size)]
    _write_csv(args.out, "regions", cfg, cols, rows)
    return EXIT_OK


SWEEP = {"w_min_decade": (int, 2), "w_max_decade": (int, 8), "per_decade": (int, 2),
         "extend_decades": (int, 1), "trials": (int, 50), "seed": (int, 0),
         "eps": (float, est.EPS_DEFAULT), "tol": (float, 0.2)}


def cmd_verify(args, cp):
    sweep_cp = _read_config(args.sweep) if args.sweep else cp
    cfg = _merge(args, sweep_cp, "sweep", SWEEP)
    cfg["lemma"] = args.lemma
    sc = est.SweepConfig((cfg["w_min_decade"], cfg["w_max_decade"]), cfg["per_decade"],
                         cfg["extend_decades"], cfg["trials"], cfg["seed"], cfg["eps"], cfg["tol"])
    rep = est.verify(args.lemma, sc)
    _write_json(args.out, "verify", cfg, rep.to_dict() | {"extra": rep.extra})
    return EXIT_OK


ILLPOSED = {"k_min": (int, 6), "k_max": (int, 10), "k_step": (int, 2), "s1": (_floats, [-0.7, -0.5, -0.3]),
            "t0": (float, ill.T0_DEFAULT), "route": (str, "direct"), "cells": (int, 4)}


def cmd_illposed(args, cp):
    cfg = _merge(args, cp, "illposed", ILLPOSED)
    cfg["s1"] = _floats(cfg["s1"])
    if cfg["k_max"] < cfg["k_min"] or cfg["k_step"] < 1:
        raise UsageError("need k_min <= k_max and k_step >= 1")
    ks = list(range(cfg["k_min"], cfg["k_max"] + 1, cfg["k_step"]))
    sw = ill.inflation_sweep(ks, cfg["s1"], cfg["t0"], cfg["route"], cfg["cells"])
    cfg["slopes"] = {str(k): v for k, v in sw.slopes.items()}
    _write_csv(args.out, "illposed", cfg, ["k", "s1", "norm_u0", "norm_A3", "ratio", "converged"], sw.rows())
    return EXIT_OK


NORMS = dict(SOLVE)
NORMS.update({"field": (str, ""), "b": (float, 0.0), "sigma": (float, 0.0), "nt": (int, 64),
              "t_window": (float, 4.0)})


def cmd_norms(args, cp):
    cfg = _merge(args, cp, "norms", NORMS)
    u0 = load_field(cfg["field"]) if cfg["field"] else _initial(cfg)
    dt = cfg["t_window"] / cfg["nt"]
    st = free_evolution(u0, cfg["nt"], dt)
    spec = NormSpec(cfg["s1"], cfg["s2"], cfg["b"], cfg["sigma"])
    result = {"l2": sobolev_norm(u0), "sobolev": sobolev_norm(u0, cfg["s1"], cfg["s2"]),
              "bourgain_free": bourgain_norm(st, spec), "real": u0.is_real(),
              "zero_mean": u0.has_zero_mean()}
    _write_json(args.out, "norms", {k: cfg[k] for k in sorted(cfg)}, result)
    return EXIT_OK


# ---------------------------------------------------------------- parser


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(message)


def _grid_flags(p):
    for f, t in (("--nx", int), ("--ny", int), ("--lx", float), ("--ly", float), ("--amp", float),
                 ("--s1", float), ("--s2", float)):
        p.add_argument(f, type=t)
    p.add_argument("--ic", choices=["gaussian", "mode", "random", "file"])
    p.add_argument("--ic-file", dest="ic_file")


def build_parser():
    ver = (f"rmkp-lab {__version__} phase_sign={sol.PHASE_SIGN:+d} "
           f"duhamel_factor={sol.DUHAMEL_FACTOR:+g}")
    p = _Parser(prog="rmkp-lab", description="Numerical lab for the rotation-modified KP equation.")
    p.add_argument("--version", action="version", version=ver)
    p.add_argument("--config", help="INI file with [global] and per-command sections")
    p.add_argument("--seed", type=int)
    p.add_argument("--threads", type=int, help="recorded only; numpy reductions are serial")
    p.add_argument("--log-level", default="WARNING")
    sub = p.add_subparsers(dest="cmd", parser_class=_Parser)

    s = sub.add_parser("solve", help="integrate the equation and write a trajectory")
    _grid_flags(s)
    s.add_argument("--t-end", dest="t_end", type=float)
    s.add_argument("--dt", type=float)
    s.add_argument("--sample-every", dest="sample_every", type=int)
    s.add_argument("--beta", type=float)
    s.add_argument("--gamma", type=float)
    s.add_argument("--linear", action="store_const", const=True)
    s.add_argument("--csv", help="also write diagnostics as CSV")
    s.add_argument("--out", required=True)

    r = sub.add_parser("regions", help="classify frequency pairs into the interaction regions")
    r.add_argument("--samples", type=int)
    r.add_argument("--points", help="CSV with xi1, xi2 columns")
    r.add_argument("--xi2-min", dest="xi2_min", type=float)
    r.add_argument("--out", default="-")

    v = sub.add_parser("verify", help="run one estimate sweep")
    v.add_argument("--lemma", required=True)
    v.add_argument("--sweep", help="sweep config file ([sweep] section)")
    v.add_argument("--trials", type=int)
    v.add_argument("--eps", type=float)
    v.add_argument("--out", default="-")

    i = sub.add_parser("illposed", help="inflation sweep of the third Picard term")
    i.add_argument("--k-min", dest="k_min", type=int)
    i.add_argument("--k-max", dest="k_max", type=int)
    i.add_argument("--k-step", dest="k_step", type=int)
    i.add_argument("--s1", type=_floats, nargs="+", help="values separated by spaces or commas")
    i.add_argument("--t0", type=float)
    i.add_argument("--route", choices=["direct", "solver"])
    i.add_argument("--cells", type=int)
    i.add_argument("--out", default="-")

    n = sub.add_parser("norms", help="Sobolev and Bourgain norms of a field")
    _grid_flags(n)
    n.add_argument("--field", help="field JSON file")
    n.add_argument("--b", type=float)
    n.add_argument("--sigma", type=float)
    n.add_argument("--nt", type=int)
    n.add_argument("--out", default="-")
    return p


COMMANDS = {"solve": cmd_solve, "regions": cmd_regions, "verify": cmd_verify,
            "illposed": cmd_illposed, "norms": cmd_norms}


def dispatch(argv=None):
    p = build_parser()
    try:
        args = p.parse_args(argv)
        if args.cmd is None:
            p.print_help(sys.stderr)
            return EXIT_USAGE
        logging.basicConfig(level=getattr(logging, str(args.log_level).upper(), logging.WARNING))
        cp = _read_config(args.config)
        if args.seed is not None:
            cp.read_dict({"global": {"seed": str(args.seed)}})
        return COMMANDS[args.cmd](args, cp)
    except SystemExit as e:  # --help / --version
        return int(e.code or 0)
    except (UsageError, ValueError, TypeError, OSError, configparser.Error) as e:
        print(f"rmkp-lab: error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except (ArithmeticError, RuntimeError, np.linalg.LinAlgError) as e:
        print(f"rmkp-lab: numerical failure: {type(e).__name__}: {e}", file=sys.stderr)
        return EXIT_NUMERIC


def main():
    sys.exit(dispatch())
