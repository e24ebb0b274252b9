"""Command-line front end: uda | ssl | phase | ablate-k | ablate-kappa | verify.

Settings come from (lowest to highest precedence) built-in defaults, a key=value
config file given with --config, and --key value flags. Each run writes
results.csv, meta.json and figure.svg into the output directory.
"""

import argparse
import csv
import json
import math
import os
import platform
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .model import ModelParams, random_wstar, stream

OUT_ENV = "UDA_LAB_OUT"
EXPERIMENTS = ("uda", "ssl", "phase", "ablate-k", "ablate-kappa", "verify")
CSV_COLUMNS = ("experiment", "setting", "method", "gamma", "sigma_in", "sigma_sp", "d_in", "d_sp", "k", "kappa",
               "seed", "acc_closed", "acc_mc", "extra")


class ConfigError(ValueError):
    pass


def _pos_float(v):
    x = float(v)
    if not x > 0 or not math.isfinite(x):
        raise ValueError("must be a positive finite number")
    return x


def _nonneg_float(v):
    x = float(v)
    if not x >= 0 or not math.isfinite(x):
        raise ValueError("must be a non-negative finite number")
    return x


def _pos_int(v):
    x = int(v)
    if x < 1:
        raise ValueError("must be a positive integer")
    return x


def _nonneg_int(v):
    x = int(v)
    if x < 0:
        raise ValueError("must be a non-negative integer")
    return x


def _bool(v):
    s = str(v).strip().lower()
    if s in ("1", "true", "yes", "on"):
        return True
    if s in ("0", "false", "no", "off"):
        return False
    raise ValueError("must be a boolean")


def parse_grid(spec):
    """'lo:hi:Nlog', 'lo:hi:N' or a comma list."""
    s = str(spec).strip()
    if ":" in s:
        parts = s.split(":")
        if len(parts) != 3:
            raise ValueError("grid must look like lo:hi:N or lo:hi:Nlog")
        lo, hi = float(parts[0]), float(parts[1])
        n = parts[2]
        log = n.endswith("log")
        n = int(n[:-3] if log else n)
        if n < 1 or not (lo > 0 and hi >= lo):
            raise ValueError("grid needs 0 < lo <= hi and N >= 1")
        return [float(x) for x in (np.geomspace(lo, hi, n) if log else np.linspace(lo, hi, n))]
    vals = [float(x) for x in s.split(",") if x.strip()]
    if not vals or any(not v > 0 for v in vals):
        raise ValueError("grid values must be positive")
    return vals


def _int_list(spec):
    vals = [int(x) for x in str(spec).split(",") if x.strip()]
    if not vals or any(v < 1 for v in vals):
        raise ValueError("must be a comma list of positive integers")
    return vals


def _wstar(v):
    s = str(v).strip().lower()
    if s not in ("ones", "sphere"):
        raise ValueError("must be 'ones' or 'sphere'")
    return s


# key -> (parser, default, help)
KEYS = {
    "gamma": (_pos_float, 0.5, "invariant margin"),
    "sigma_in": (_nonneg_float, math.sqrt(0.05), "invariant noise std"),
    "sigma_sp": (_pos_float, 1.0, "spurious target std"),
    "d_in": (_pos_int, 5, "invariant dimension"),
    "d_sp": (_pos_int, 20, "spurious dimension"),
    "k": (_pos_int, 2, "feature dimension"),
    "kappa": (_pos_float, 0.5, "whitening penalty"),
    "seed": (_nonneg_int, 0, "root seed"),
    "wstar": (_wstar, "ones", "invariant direction: ones or sphere"),
    "eta": (_pos_float, 0.05, "self-training step size"),
    "max_iters": (_pos_int, 200000, "self-training iteration cap"),
    "mc": (_bool, False, "also report Monte Carlo accuracy"),
    "mc_n": (_pos_int, 200000, "Monte Carlo sample size"),
    "n_labeled": (_pos_int, 100, "labelled target points (ssl)"),
    "n_unlabeled": (_nonneg_int, 0, "unlabelled pool for ssl; 0 = population"),
    "gamma_over_sigmasp": (parse_grid, "0.1:4:20log", "phase grid of gamma/sigma_sp"),
    "ks": (_int_list, "1,2,3,4,5,10,15,20,25", "ablate-k list"),
    "kappas": (parse_grid, "0.01,0.05,0.1,0.5,1,10,100", "ablate-kappa list"),
    "kappa_k": (_pos_int, 10, "feature dimension for ablate-kappa"),
    "steps": (_pos_int, 20000, "contrastive training steps"),
    "lr": (_pos_float, 1e-3, "contrastive learning rate"),
    "jobs": (_pos_int, os.cpu_count() or 1, "worker processes for sweeps"),
    "out": (str, None, f"output directory (default ${OUT_ENV}/<experiment> or runs/<experiment>)"),
    "svg": (_bool, True, "write figure.svg"),
}


def read_config(path):
    """Parse a flat key=value file ('#' comments, blank lines allowed)."""
    out = {}
    with open(path) as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"{path}:{lineno}: expected key=value: {raw.rstrip()}")
            key, val = (x.strip() for x in line.split("=", 1))
            key = key.replace("-", "_")
            if key not in KEYS:
                raise ConfigError(f"{path}:{lineno}: unknown key {key!r}: {raw.rstrip()}")
            out[key] = val
    return out


def resolve(experiment, config_path=None, flags=None):
    raw = {}
    if config_path:
        raw.update(read_config(config_path))
    raw.update({k: v for k, v in (flags or {}).items() if v is not None})
    cfg = {}
    for key, (parse, default, _) in KEYS.items():
        if key in raw:
            try:
                cfg[key] = parse(raw[key])
            except (TypeError, ValueError) as exc:
                raise ConfigError(f"invalid value for {key}: {raw[key]!r} ({exc})") from None
        else:
            cfg[key] = parse(default) if isinstance(default, str) and key not in ("out", "wstar") else default
    cfg["experiment"] = experiment
    if cfg["out"] is None:
        cfg["out"] = str(Path(os.environ.get(OUT_ENV, "runs")) / experiment)
    return cfg


def params_from(cfg):
    w = None
    if cfg["wstar"] == "sphere":
        w = random_wstar(cfg["d_in"], stream(cfg["seed"], "wstar"))
    try:
        return ModelParams(gamma=cfg["gamma"], sigma_in=cfg["sigma_in"], sigma_sp=cfg["sigma_sp"], d_in=cfg["d_in"],
                           d_sp=cfg["d_sp"], w_star=w, k=cfg["k"], kappa=cfg["kappa"], seed=cfg["seed"])
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def fmt(v):
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        v = float(v)
        if math.isnan(v):
            return "nan"
        return f"{v:.10g}"
    return str(v)


def result_row(r):
    p = r.params
    extra = ";".join(f"{k}={fmt(v)}" for k, v in sorted(r.extra.items()))
    return [r.experiment, r.setting, r.method, fmt(p.gamma), fmt(p.sigma_in), fmt(p.sigma_sp), fmt(p.d_in),
            fmt(p.d_sp), fmt(r.k), fmt(r.kappa), fmt(p.seed), fmt(r.acc_closed), fmt(r.acc_mc), extra]


def write_csv(path, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CSV_COLUMNS)
        for row in rows:
            w.writerow(row)


def _figure(experiment, results):
    from .svg import bar_chart, line_chart
    if experiment in ("uda", "ssl"):
        return bar_chart([r.method for r in results], [r.acc_closed for r in results],
                         title=f"Target accuracy ({experiment.upper()})", ylabel="target accuracy")
    if experiment == "phase":
        from .analytics import phase_table
        tab = phase_table(results)
        series = [(m, *tab[m]) for m in ("ERM", "ST", "CL", "STOC") if m in tab]
        return line_chart(series, title="Target accuracy vs gamma / sigma_sp", xlabel="gamma / sigma_sp",
                          ylabel="target accuracy", logx=True, ylim=(0, 1))
    key = "k" if experiment == "ablate-k" else "kappa"
    series = []
    for m in ("CL", "STOC"):
        pts = [(getattr(r, key), r.acc_closed) for r in results if r.method == m]
        series.append((m, [x for x, _ in pts], [y for _, y in pts]))
    return line_chart(series, title=f"Ablation over {key}", xlabel=key, ylabel="target accuracy",
                      logx=(key == "kappa"), ylim=(0, 1))


def execute(cfg):
    """Run the configured experiment; returns (results, csv_rows, failed_checks)."""
    from . import analytics as an
    exp = cfg["experiment"]
    p = params_from(cfg)
    mc_n = cfg["mc_n"] if cfg["mc"] else 0
    failed = []
    if exp == "uda":
        res = an.uda_compare(p, mc_n=mc_n, eta=cfg["eta"], max_iters=cfg["max_iters"])
    elif exp == "ssl":
        res = an.ssl_compare(p, n_labeled=cfg["n_labeled"], n_unlabeled=cfg["n_unlabeled"] or None, mc_n=mc_n,
                             eta=cfg["eta"], max_iters=cfg["max_iters"])
    elif exp == "phase":
        grid = [(r * p.sigma_sp, p.sigma_sp) for r in cfg["gamma_over_sigmasp"]]
        res = an.phase_sweep(grid, p, mc_n=mc_n, eta=cfg["eta"], max_iters=cfg["max_iters"], jobs=cfg["jobs"])
    elif exp == "ablate-k":
        res = an.ablation_k(p, cfg["ks"], eta=cfg["eta"], max_iters=cfg["max_iters"], jobs=cfg["jobs"])
    elif exp == "ablate-kappa":
        res = an.ablation_kappa(p, cfg["kappas"], k=cfg["kappa_k"], steps=cfg["steps"], lr=cfg["lr"],
                                eta=cfg["eta"], max_iters=cfg["max_iters"], jobs=cfg["jobs"])
    elif exp == "verify":
        checks = an.verify_suite(p, seed=p.seed)
        res = None
        rows = []
        for name, ok, detail in checks:
            rows.append(["verify", "", name, fmt(p.gamma), fmt(p.sigma_in), fmt(p.sigma_sp), fmt(p.d_in),
                         fmt(p.d_sp), fmt(p.k), fmt(p.kappa), fmt(p.seed), "1" if ok else "0", "", detail])
            if not ok:
                failed.append(name)
        return res, rows, failed
    else:
        raise ConfigError(f"unknown experiment {exp!r}")
    return res, [result_row(r) for r in res], failed


def write_outputs(cfg, results, rows):
    out = Path(cfg["out"])
    out.mkdir(parents=True, exist_ok=True)
    write_csv(out / "results.csv", rows)
    meta = {
        "experiment": cfg["experiment"],
        "config": {k: v for k, v in cfg.items() if k not in ("out", "jobs")},
        "versions": {"uda_lab": __version__, "python": platform.python_version(), "numpy": np.__version__},
    }
    if cfg["experiment"] == "phase":
        meta["grid_note"] = "gamma varied at fixed sigma_sp; gamma/sigma_sp on the listed grid"
    (out / "meta.json").write_text(json.dumps(meta, indent=2, sort_keys=True, default=str) + "\n")
    if cfg["svg"] and results:
        (out / "figure.svg").write_text(_figure(cfg["experiment"], results))
    return out


def build_parser():
    ap = argparse.ArgumentParser(prog="uda-lab", description="Toy-model simulations of self-training and "
                                 "contrastive learning under spurious correlations.")
    ap.add_argument("experiment", choices=EXPERIMENTS)
    ap.add_argument("--config", help="key=value file; flags override it")
    for key, (_, default, hlp) in KEYS.items():
        ap.add_argument("--" + key.replace("_", "-"), dest=key, default=None, help=f"{hlp} (default {default})")
    return ap


def main(argv=None):
    ap = build_parser()
    args = ap.parse_args(argv)
    flags = {k: v for k, v in vars(args).items() if k not in ("experiment", "config")}
    try:
        cfg = resolve(args.experiment, args.config, flags)
        results, rows, failed = execute(cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # runtime failure inside an experiment
        print(f"runtime error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    try:
        out = write_outputs(cfg, results, rows)
    except OSError as exc:
        print(f"error: cannot write outputs: {exc}", file=sys.stderr)
        return 1
    for row in rows:
        print(f"{row[2]:>28s}  acc={row[11]:<14s} {row[13]}")
    print(f"wrote {out / 'results.csv'}")
    if failed:
        print(f"{len(failed)} check(s) failed: {', '.join(failed)}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
