"""Command-line front end.

    feedaudit audit --config run.toml
    feedaudit heatmap --config run.toml --jobs 8 --out-dir out/
    feedaudit fpr | cost | prop2 | validate-family ...

Exit codes: 0 on PASS or a finished experiment, 1 when an audit FAILs, 2 on any
configuration or source error (with a JSON error object on stderr).
"""
from __future__ import annotations

import argparse
import copy
import csv
import io
import json
import logging
import math
import sys
import warnings
from importlib import resources
from pathlib import Path

import jsonschema
import numpy as np
import tomli

from . import experiments as ex
from . import families as fam
from .engine import AlphaCapWarning, run_audit
from .errors import AuditAborted, ConfigError, FeedAuditError, SourceError
from .feedsim import build_source, generate_inputs
from .stats import Verdict

log = logging.getLogger("feedaudit")

EXIT_PASS, EXIT_FAIL, EXIT_ERROR = 0, 1, 2
COMMANDS = ("audit", "heatmap", "fpr", "cost", "prop2", "validate-family")

DEFAULTS = {
    "seed": 0,
    "jobs": 1,
    "out_dir": ".",
    "format": "csv",
    "plot": False,
    "family": {"id": "gaussian-mean-var"},
    "audit": {"alpha": 0.01, "m": 30, "n": 1, "mode": "full", "inputs": {}},
    "filter": {"kind": "parametric", "theta": [0.0, 1.0]},
    "baseline": {"kind": "parametric", "theta": [0.0, 1.0]},
    "fpr": {"theta0": [0.0, 1.0], "m_values": [30, 100, 300, 1000], "alpha": 0.01, "trials": 10_000},
    "heatmap": {"baseline": [0.0, 1.0], "mu": list(ex.DEFAULT_MU), "sigma2": list(ex.DEFAULT_SIGMA2),
                "m": 30, "alpha": 0.01, "trials": 1000, "threshold": 0.8},
    "cost": {"revenue": {}, "baseline": [0.0, 1.0], "mu": list(ex.DEFAULT_MU),
             "sigma2": list(ex.DEFAULT_SIGMA2), "m": 30, "alpha": 0.01, "trials": 1000, "feasibility": 0.8},
    "prop2": {"revenue": {}, "m": 30, "alpha": 0.01, "omega": [1], "reference": [0.0, 1.0],
              "trials": 1000, "feasibility": 0.8, "kappa_step": 0.25},
}


class CLIError(Exception):
    def __init__(self, kind, message, **extra):
        super().__init__(message)
        self.kind = kind
        self.extra = extra


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise CLIError("usage-error", message)


def load_schema(name):
    text = resources.files("feedaudit").joinpath("schemas", f"{name}.schema.json").read_text()
    return json.loads(text)


def _merge(base, override):
    out = copy.deepcopy(base)
    for key, val in override.items():
        if isinstance(val, dict) and isinstance(out.get(key), dict) and key not in ("filter", "baseline", "fixed"):
            out[key] = _merge(out[key], val)
        else:
            out[key] = copy.deepcopy(val)
    return out


def load_config(path=None, overrides=None) -> dict:
    """Read the TOML file, validate it, then layer defaults < file < command-line flags."""
    raw = {}
    if path is not None:
        try:
            with open(path, "rb") as fh:
                raw = tomli.load(fh)
        except FileNotFoundError:
            raise CLIError("config-error", f"config file not found: {path}") from None
        except tomli.TOMLDecodeError as exc:
            raise CLIError("config-error", f"invalid TOML in {path}: {exc}") from None
    merged = {k: v for k, v in (overrides or {}).items() if v is not None}
    raw = _merge(raw, merged)
    try:
        jsonschema.validate(raw, load_schema("config"))
    except jsonschema.ValidationError as exc:
        where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise CLIError("config-error", f"{where}: {exc.message}") from None
    return _merge(DEFAULTS, raw)


def axis_values(spec):
    if isinstance(spec, dict):
        start, stop, step = float(spec["start"]), float(spec["stop"]), float(spec["step"])
        k = int(math.floor((stop - start) / step + 1e-9))
        return [float(v) for v in np.round(start + step * np.arange(k + 1), 10)]
    return [float(v) for v in spec]


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        f = float(obj)
        return f if math.isfinite(f) else None
    return obj


def dumps(obj) -> str:
    return json.dumps(_jsonable(obj), indent=2, sort_keys=False) + "\n"


def _write_rows(path: Path, header, rows):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([_cell(row[h]) for h in header])
    path.write_text(buf.getvalue())


def _cell(v):
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def _emit(cfg, stem, header, rows, summary):
    """Raw rows as CSV or JSON (per --format) plus the JSON summary."""
    out = Path(cfg["out_dir"])
    out.mkdir(parents=True, exist_ok=True)
    if cfg["format"] == "csv":
        _write_rows(out / f"{stem}.csv", header, rows)
    else:
        (out / f"{stem}.json").write_text(dumps(rows))
    jsonschema.validate(_jsonable(summary), load_schema("summary"))
    (out / f"{stem}_summary.json").write_text(dumps(summary))
    sys.stdout.write(dumps(summary))


def _family(cfg):
    try:
        return fam.family_from_dict(cfg["family"])
    except (ValueError, KeyError, TypeError) as exc:
        raise CLIError("config-error", f"family: {exc}") from None


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------


def cmd_audit(cfg) -> int:
    family = _family(cfg)
    a = cfg["audit"]
    seed = int(cfg["seed"])
    sources = []
    try:
        F = build_source(cfg["filter"], family, a["m"], seed, "filter")
        sources.append(F)
        B = build_source(cfg["baseline"], family, a["m"], seed + 1, "baseline")
        sources.append(B)
        X = generate_inputs(int(a["n"]), a.get("inputs"), np.random.default_rng(np.random.SeedSequence(seed)))
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", AlphaCapWarning)
            report = run_audit(F, B, X, family, float(a["alpha"]), a["mode"], seed, a["m"], int(cfg["jobs"]))
    except AuditAborted as exc:
        _write_report(cfg, exc.partial_report)
        raise CLIError("source-error", str(exc.cause), source=exc.cause.source, input_id=exc.cause.input_id) from None
    except SourceError as exc:
        raise CLIError("source-error", str(exc), source=exc.source, input_id=exc.input_id) from None
    except (ConfigError, KeyError, TypeError, ValueError) as exc:
        raise CLIError("config-error", str(exc)) from None
    finally:
        for s in sources:
            s.close()
    _write_report(cfg, report)
    sys.stdout.write(json.dumps({"verdict": report.verdict.value, "n": len(report.results)}) + "\n")
    return EXIT_PASS if report.verdict is Verdict.PASS else EXIT_FAIL


def _write_report(cfg, report):
    out = Path(cfg["out_dir"])
    out.mkdir(parents=True, exist_ok=True)
    doc = report.to_dict()
    jsonschema.validate(_jsonable(doc), load_schema("report"))
    (out / "report.json").write_text(dumps(doc))
    if cfg["format"] == "csv":
        (out / "results.csv").write_text(report.to_csv())
    else:
        (out / "results.json").write_text(dumps(doc["results"]))


def cmd_fpr(cfg) -> int:
    family = _family(cfg)
    p = cfg["fpr"]
    try:
        rows = ex.run_fpr_experiment(family, p["theta0"], p["m_values"], p["alpha"], p["trials"],
                                     cfg["seed"], cfg["jobs"])
    except ValueError as exc:
        raise CLIError("config-error", str(exc)) from None
    table = [
        {"m": r.m, "trials": r.trials, "failures": r.failures, "fpr": r.fpr,
         "ci_low": float(r.ci_low), "ci_high": float(r.ci_high)}
        for r in rows
    ]
    at_largest = max(rows, key=lambda r: r.m)
    summary = {
        "command": "fpr",
        "seed": cfg["seed"],
        "parameters": dict(p, family=family.to_dict()),
        "rows": table,
        "max_fpr": at_largest.fpr,
        "max_fpr_m": at_largest.m,
        "worst_fpr": max(r.fpr for r in rows),
        "non_increasing": ex.fpr_non_increasing(rows),
    }
    _emit(cfg, "fpr", ["m", "trials", "failures", "fpr", "ci_low", "ci_high"], table, summary)
    if cfg["plot"]:
        _plot_fpr(cfg, rows, p["alpha"])
    return EXIT_PASS


def cmd_heatmap(cfg) -> int:
    family = _family(cfg)
    p = cfg["heatmap"]
    grid = ex.run_heatmap(p["baseline"], axis_values(p["mu"]), axis_values(p["sigma2"]), p["m"], p["alpha"],
                          p["trials"], cfg["seed"], cfg["jobs"], family)
    cls = ex.classify_distributions(grid, p["threshold"])
    rows = list(grid.rows())
    try:
        base_rate = grid.rate(*grid.baseline)
    except KeyError:
        base_rate = None
    summary = {
        "command": "heatmap",
        "seed": cfg["seed"],
        "parameters": dict(p, mu=grid.mu_values, sigma2=grid.sigma2_values, family=family.to_dict()),
        "shape": [len(grid.sigma2_values), len(grid.mu_values)],
        "baseline_failure_rate": base_rate,
        "passing": cls.passing,
        "failing": cls.failing,
        "curves": cls.curves,
    }
    _emit(cfg, "heatmap", ["sigma2", "mu", "trials", "failures", "failure_rate"], rows, summary)
    if cfg["plot"]:
        _plot_heatmap(cfg, grid, cls)
    return EXIT_PASS


def _revenue(spec):
    try:
        return ex.RevenueFunction(**spec)
    except (TypeError, ValueError) as exc:
        raise CLIError("config-error", f"revenue: {exc}") from None


def cmd_cost(cfg) -> int:
    family = _family(cfg)
    p = cfg["cost"]
    fn = _revenue(p["revenue"])
    try:
        res = ex.cost_of_auditing(fn, p["baseline"], p["m"], p["alpha"], axis_values(p["mu"]),
                                  axis_values(p["sigma2"]), p["feasibility"], p["trials"], cfg["seed"],
                                  cfg["jobs"], family)
    except ValueError as exc:
        raise CLIError("config-error", str(exc)) from None
    pass_rate = 1.0 - res.grid.failure_rate
    rows = []
    for row in res.grid.rows():
        i = ex._index(res.grid.sigma2_values, row["sigma2"])
        j = ex._index(res.grid.mu_values, row["mu"])
        rows.append({
            "sigma2": row["sigma2"],
            "mu": row["mu"],
            "pass_rate": float(pass_rate[i, j]),
            "revenue": float(fn(abs(row["mu"] - p["baseline"][0]))),
            "feasible": bool(pass_rate[i, j] >= p["feasibility"]),
        })
    summary = dict(res.summary(), command="cost", seed=cfg["seed"],
                   parameters=dict(p, mu=res.grid.mu_values, sigma2=res.grid.sigma2_values,
                                   revenue={"base": fn.base, "peak_gain": fn.peak_gain,
                                            "peak_distance": fn.peak_distance}))
    summary["recovered_fraction"] = (
        None if res.infeasible else res.constrained_max / res.unconstrained_max
    )
    _emit(cfg, "cost", ["sigma2", "mu", "pass_rate", "revenue", "feasible"], rows, summary)
    return EXIT_PASS


def cmd_prop2(cfg) -> int:
    family = _family(cfg)
    p = cfg["prop2"]
    fn = _revenue(p["revenue"])
    try:
        demo = ex.proposition2_construction(family, fn, p["m"], p["alpha"], p["omega"], p["reference"],
                                            p["trials"], p["feasibility"], p["kappa_step"], cfg["seed"])
    except (ValueError, FeedAuditError) as exc:
        raise CLIError("config-error", str(exc)) from None
    doc = demo.to_dict()
    scan = doc.pop("scan")
    rows = [{"kappa": e["kappa"], "quadratic_max": max(e["quadratic"]),
             "pass_rate": e.get("pass_rate", "")} for e in scan]
    summary = dict(doc, command="prop2", seed=cfg["seed"], parameters=dict(p, family=family.to_dict()))
    _emit(cfg, "prop2", ["kappa", "quadratic_max", "pass_rate"], rows, summary)
    return EXIT_PASS


def cmd_validate_family(cfg) -> int:
    family = _family(cfg)
    rep = fam.validate_regularity(family)
    doc = rep.to_dict()
    rows = [{"condition": c["name"], "passed": c["passed"], "witness": json.dumps(c.get("witness"))}
            for c in doc["checks"]]
    summary = {"command": "validate-family", "seed": cfg["seed"], "parameters": {},
               "family": family.to_dict(), "passed": rep.passed, "checks": doc["checks"]}
    _emit(cfg, "validate_family", ["condition", "passed", "witness"], rows, summary)
    return EXIT_PASS


# ---------------------------------------------------------------------------
# plots (optional, needs matplotlib)
# ---------------------------------------------------------------------------


def _pyplot():
    try:
        import matplotlib
    except ImportError:
        log.warning("matplotlib not installed; skipping plot")
        return None
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    return plt


def _plot_heatmap(cfg, grid, cls):
    plt = _pyplot()
    if plt is None:
        return
    fig, (ax0, ax1) = plt.subplots(1, 2, figsize=(11, 4))
    mu, s2 = grid.mu_values, grid.sigma2_values
    im = ax0.imshow(grid.failure_rate, origin="lower", aspect="auto", cmap="viridis",
                    extent=[mu[0], mu[-1], s2[0], s2[-1]], vmin=0, vmax=1)
    ax0.set_xlabel("mu")
    ax0.set_ylabel("sigma^2")
    fig.colorbar(im, ax=ax0, label="failure rate")
    x = cls.curves["x"]
    ax1.plot(x, cls.curves["baseline"], "k--", label="baseline")
    for c in cls.curves["passing"]:
        ax1.plot(x, c["pdf"], color="tab:green", alpha=0.7)
    for c in cls.curves["failing"]:
        ax1.plot(x, c["pdf"], color="tab:red", alpha=0.7)
    ax1.legend()
    fig.tight_layout()
    fig.savefig(Path(cfg["out_dir"]) / "heatmap.png", dpi=120)
    plt.close(fig)


def _plot_fpr(cfg, rows, alpha):
    plt = _pyplot()
    if plt is None:
        return
    fig, ax = plt.subplots(figsize=(5, 3.5))
    ms = [r.m for r in rows]
    ax.errorbar(ms, [r.fpr for r in rows],
                yerr=[[r.fpr - r.ci_low for r in rows], [r.ci_high - r.fpr for r in rows]], marker="o")
    ax.axhline(alpha, color="k", ls="--")
    ax.set_xscale("log")
    ax.set_xlabel("m")
    ax.set_ylabel("false positive rate")
    fig.tight_layout()
    fig.savefig(Path(cfg["out_dir"]) / "fpr.png", dpi=120)
    plt.close(fig)


HANDLERS = {
    "audit": cmd_audit,
    "heatmap": cmd_heatmap,
    "fpr": cmd_fpr,
    "cost": cmd_cost,
    "prop2": cmd_prop2,
    "validate-family": cmd_validate_family,
}


def build_parser():
    p = _Parser(prog="feedaudit", description="Decision-robustness audits of feed filtering.")
    p.add_argument("command", choices=COMMANDS)
    p.add_argument("--config", help="TOML run configuration")
    p.add_argument("--seed", type=int, help="root seed (overrides the config)")
    p.add_argument("--jobs", type=int, help="worker pool size")
    p.add_argument("--out-dir", help="directory for CSV/JSON outputs")
    p.add_argument("--format", choices=("csv", "json"), help="format of the raw result rows")
    p.add_argument("--plot", action="store_true", default=None, help="also render a PNG (needs matplotlib)")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, stream=sys.stderr,
                            format="%(levelname)s %(name)s: %(message)s")
        cfg = load_config(args.config, {"seed": args.seed, "jobs": args.jobs, "out_dir": args.out_dir,
                                        "format": args.format, "plot": args.plot})
        return HANDLERS[args.command](cfg)
    except CLIError as exc:
        err = {"error": dict({"type": exc.kind, "message": str(exc)}, **exc.extra)}
        sys.stderr.write(json.dumps(err) + "\n")
        return EXIT_ERROR
    except (FeedAuditError, ValueError) as exc:
        err = {"error": {"type": "config-error", "message": str(exc)}}
        sys.stderr.write(json.dumps(err) + "\n")
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
