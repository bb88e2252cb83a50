"""Command-line entry point: ``qgcnet {estimate,simulate,benchmark,theorem}``.

All outputs are plain CSV / JSON.  Results are computed in full before any
file is written, and a failed write removes whatever was already written, so
an output directory is either complete or untouched.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import os
import sys
import warnings
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import metrics
from .core import QGCError, ReturnPanel, validate_panel
from .networks import CVConfig, rolling_networks
from .sim import HubSimConfig, reorder_hubs_first, run_replicates

log = logging.getLogger("qgcnet")

TABLE1_COLUMNS = ["n", "p", "method", "tau", "sensitivity_mean", "sensitivity_sd",
                  "specificity_mean", "specificity_sd"]


class ParseError(QGCError, ValueError):
    pass


class ConfigError(QGCError, ValueError):
    pass


# ------------------------------------------------------------------ ingest

def _read_rows(path):
    try:
        with open(path, newline="", encoding="utf-8") as fh:
            return list(csv.reader(fh))
    except UnicodeDecodeError as exc:
        raise ParseError(f"{path}: not valid UTF-8 ({exc})") from exc


def ingest_csv(path) -> ReturnPanel:
    """Read ``date,<id1>,<id2>,...`` with one row per time point."""
    rows = [r for r in _read_rows(path) if r]
    if not rows:
        raise ParseError(f"{path}: empty file")
    header = [h.strip() for h in rows[0]]
    if not header or header[0].lower() != "date":
        raise ParseError(f"{path}: first header must be 'date', got {header[:1]}")
    ids = header[1:]
    stamps, values = [], []
    for lineno, row in enumerate(rows[1:], start=2):
        if len(row) != len(header):
            raise ParseError(f"{path}: row {lineno} has {len(row)} fields, expected {len(header)}")
        stamps.append(row[0].strip())
        vals = []
        for col, cell in zip(ids, row[1:]):
            try:
                vals.append(float(cell))
            except ValueError:
                raise ParseError(f"{path}: row {lineno}, column {col!r}: "
                                 f"non-numeric value {cell!r}") from None
        values.append(vals)
    matrix = np.array(values, dtype=float).reshape(len(values), len(ids))
    return validate_panel(matrix, stamps, ids)


def read_sectors(path) -> dict:
    rows = [r for r in _read_rows(path) if r]
    return {r[0].strip(): r[1].strip() for r in rows[1:] if len(r) >= 2}


def read_labeled_values(path) -> tuple[list, np.ndarray]:
    """Two-column CSV ``label,value`` with a header row."""
    rows = [r for r in _read_rows(path) if r]
    labels, vals = [], []
    for lineno, row in enumerate(rows[1:], start=2):
        if len(row) < 2:
            raise ParseError(f"{path}: row {lineno} needs a label and a value")
        labels.append(row[0].strip())
        try:
            vals.append(float(row[1]))
        except ValueError:
            raise ParseError(f"{path}: row {lineno}: non-numeric value {row[1]!r}") from None
    return labels, np.array(vals)


def read_degree_csv(path) -> tuple[list, np.ndarray]:
    rows = [r for r in _read_rows(path) if r]
    header = rows[0]
    if header[:2] != ["window_end", "average_degree"]:
        raise ParseError(f"{path}: expected a degree file starting 'window_end,average_degree'")
    labels = [r[0] for r in rows[1:]]
    try:
        avg = np.array([float(r[1]) for r in rows[1:]])
    except (ValueError, IndexError) as exc:
        raise ParseError(f"{path}: malformed degree row ({exc})") from exc
    return labels, avg


# ------------------------------------------------------------------ output

def _csv_text(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def _fmt(x) -> str:
    return repr(float(x))


def _json_text(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


def write_outputs(out_dir, files: dict) -> None:
    """Write ``{relative path: text}``; on any failure remove what was written."""
    out = Path(out_dir)
    written = []
    try:
        for rel, text in files.items():
            target = out / rel
            target.parent.mkdir(parents=True, exist_ok=True)
            target.write_text(text, encoding="utf-8")
            written.append(target)
    except OSError:
        for f in written:
            f.unlink(missing_ok=True)
        raise


# ---------------------------------------------------------------- commands

def _cv_from(args) -> CVConfig:
    return CVConfig(n_folds=args.folds, share_lambda=args.share_lambda)


def _check_tau(method, tau):
    if method == "qgc" and tau is None:
        raise ConfigError("--method qgc requires --tau")
    if method == "gc" and tau is not None:
        raise ConfigError("--tau is only valid with --method qgc")


def cmd_estimate(args) -> dict:
    (args.method,) = _parse_methods([args.method])
    _check_tau(args.method, args.tau)
    if not args.input:
        raise ConfigError("estimate requires --input")
    panel = ingest_csv(args.input)
    sectors = read_sectors(args.sectors) if args.sectors else {}
    nets, fallbacks = rolling_networks(
        panel, args.window, args.step, args.method, args.tau, _cv_from(args),
        multivariate=args.multivariate, alpha=args.alpha, garch=args.garch,
        n_jobs=args.jobs, return_fallbacks=True,
    )
    labels = [panel.timestamps[n.window.stop - 1] for n in nets]
    ids = panel.entity_ids

    edge_rows = []
    for lab, net in zip(labels, nets):
        iu, ju = np.nonzero(np.triu(net.adjacency, 1))
        pairs = sorted(tuple(sorted((ids[i], ids[j]))) for i, j in zip(iu, ju))
        edge_rows.extend([lab, a, b] for a, b in pairs)

    series = metrics.degree_series(nets, labels)
    degree_rows = []
    for lab, avg, sc, net in zip(labels, series.average_degree, series.scaled_average_degree, nets):
        degree_rows.append([lab, _fmt(avg), _fmt(sc)] + metrics.node_degrees(net).tolist())

    top_rows = []
    k = min(args.top_k, panel.p)
    for lab, net in zip(labels, nets):
        try:
            z = dict(zip(ids, metrics.standardized_degrees(net)))
        except metrics.ZeroVariance:
            z = {e: 0.0 for e in ids}
        for rank, (ent, deg) in enumerate(metrics.top_k_nodes(net, k), start=1):
            top_rows.append([lab, rank, ent, deg, _fmt(z[ent]), sectors.get(ent, "")])

    files = {
        "edges.csv": _csv_text(["window_end", "node_a", "node_b"], edge_rows),
        "degrees.csv": _csv_text(["window_end", "average_degree", "scaled_average_degree", *ids],
                                 degree_rows),
        "top_nodes.csv": _csv_text(["window_end", "rank", "entity", "degree",
                                    "standardized_degree", "sector"], top_rows),
    }
    for idx, (lab, net) in enumerate(zip(labels, nets)):
        rows = [[e, *row] for e, row in zip(ids, net.adjacency.tolist())]
        files[f"adjacency/window_{idx:04d}.csv"] = _csv_text(["entity", *ids], rows)
    summary = {
        "command": "estimate",
        "method": args.method,
        "tau": args.tau,
        "multivariate": args.multivariate,
        "window": args.window,
        "step": args.step,
        "garch": args.garch,
        "n_windows": len(nets),
        "window_ends": labels,
        "garch_fallbacks": {lab: fb for lab, fb in zip(labels, fallbacks) if fb},
    }
    files["run.json"] = _json_text(summary)
    for lab, fb in zip(labels, fallbacks):
        for msg in fb:
            print(f"garch fallback [{lab}]: {msg}", file=sys.stderr)
    write_outputs(args.out_dir, files)
    return summary


def _parse_methods(methods: Sequence[str]) -> list[str]:
    out = []
    for m in methods:
        m = str(m).lower()
        if m not in ("gc", "qgc"):
            raise ConfigError(f"unknown method {m!r}; expected gc or qgc")
        out.append(m)
    return out


def cmd_simulate(args) -> dict:
    methods = _parse_methods(args.method)
    tau = 0.05 if args.tau is None else args.tau
    cv = _cv_from(args)
    rows = []
    files = {}
    for p in args.p:
        for n in args.n:
            config = HubSimConfig(p=p, n=n, seed=args.seed, global_factor=args.global_factor)
            for m in methods:
                t = tau if m == "qgc" else None
                res = run_replicates(config, m, t, cv, args.reps, n_jobs=args.jobs)
                s = res.score
                rows.append([n, p, m, "" if t is None else _fmt(t), _fmt(s.sensitivity_mean),
                             _fmt(s.sensitivity_sd), _fmt(s.specificity_mean),
                             _fmt(s.specificity_sd)])
                heat = reorder_hubs_first(res.heatmap) if args.hubs_first else res.heatmap
                files[f"heatmaps/heatmap_n{n}_p{p}_{m}.csv"] = "".join(
                    ",".join(_fmt(v) for v in row) + "\n" for row in heat
                )
                log.info("n=%d p=%d %s: %s", n, p, m, s)
    files["table1.csv"] = _csv_text(TABLE1_COLUMNS, rows)
    summary = {"command": "simulate", "rows": len(rows), "reps": args.reps, "seed": args.seed,
               "global_factor": args.global_factor, "hubs_first": args.hubs_first}
    files["run.json"] = _json_text(summary)
    write_outputs(args.out_dir, files)
    return summary


def cmd_benchmark(args) -> dict:
    if not args.degrees:
        raise ConfigError("benchmark requires --degrees")
    labels, avg = read_degree_csv(args.degrees)
    report = {"command": "benchmark", "n_windows": len(labels)}
    if args.covariate:
        cov_labels, cov_vals = read_labeled_values(args.covariate)
        lookup = dict(zip(cov_labels, cov_vals))
        missing = [lab for lab in labels if lab not in lookup]
        if missing:
            raise ConfigError(f"covariate has no value for window(s) {missing[:5]}")
        r, pval = metrics.pearson_correlation_test(avg, [lookup[lab] for lab in labels])
        report["correlation"] = {"r": r, "p_value": pval}
    events = list(args.events or [])
    if args.events_file:
        events += [line.strip() for line in Path(args.events_file).read_text().splitlines()
                   if line.strip()]
    if events:
        unstable = metrics.label_stability(labels, events, args.radius)
        t, pval = metrics.welch_t_test_greater(avg[unstable], avg[~unstable])
        report["unstable_vs_stable"] = {
            "t_statistic": t, "p_value": pval, "radius": args.radius,
            "n_unstable": int(unstable.sum()), "n_stable": int((~unstable).sum()),
        }
    write_outputs(args.out_dir, {"benchmark.json": _json_text(report)})
    return report


def cmd_theorem(args) -> dict:
    from dataclasses import replace

    from .montecarlo import QVARScenario, empirical_limit_check

    if args.reps < 200:
        raise ConfigError(f"--reps must be at least 200, got {args.reps}")
    base = QVARScenario(tau=args.theorem_tau, n=args.theorem_n,
                        lambda_c=args.lambda_c, lambda_exponent=args.lambda_exponent)
    rules = ["zero", "power"] if args.lambda_rule == "both" else [args.lambda_rule]
    report = {"command": "theorem", "seed": args.seed, "scenarios": []}
    for rule in rules:
        sc = replace(base, lambda_rule=rule)
        rep = empirical_limit_check(sc, args.reps, args.seed).to_dict()
        rep["lambda_rule"] = rule
        if args.shrinkage_n:
            small = empirical_limit_check(replace(sc, n=args.shrinkage_n), args.reps, args.seed)
            rep["shrinkage"] = {
                "n_small": args.shrinkage_n,
                "error_small": small.cov_frobenius_rel_error,
                "error_large": rep["cov_frobenius_rel_error"],
                "passed": rep["cov_frobenius_rel_error"] < small.cov_frobenius_rel_error,
            }
        report["scenarios"].append(rep)
    write_outputs(args.out_dir, {"theorem.json": _json_text(report)})
    return report


# ------------------------------------------------------------------ parser

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON file of option values; flags override it")
    common.add_argument("--out-dir", default="out")
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--jobs", type=int, default=1, help="worker processes")
    common.add_argument("--tau", type=float, default=None)
    common.add_argument("--folds", type=int, default=10)
    common.add_argument("--share-lambda", action="store_true")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="qgcnet", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    est = sub.add_parser("estimate", parents=[common], help="rolling-window networks from a CSV")
    est.add_argument("--input")
    est.add_argument("--method", default="gc", help="gc or qgc")
    shape = est.add_mutually_exclusive_group()
    shape.add_argument("--multivariate", dest="multivariate", action="store_true", default=True)
    shape.add_argument("--bivariate", dest="multivariate", action="store_false")
    est.add_argument("--window", type=int, default=36)
    est.add_argument("--step", type=int, default=1)
    est.add_argument("--alpha", type=float, default=0.05, help="bivariate test level")
    est.add_argument("--garch", action=argparse.BooleanOptionalAction, default=True)
    est.add_argument("--sectors", help="CSV entity,sector side table")
    est.add_argument("--top-k", type=int, default=10)

    simp = sub.add_parser("simulate", parents=[common], help="hub-network recovery study")
    simp.add_argument("--n", type=int, nargs="+", default=[25, 50, 75, 100])
    simp.add_argument("--p", type=int, nargs="+", default=[30, 70])
    simp.add_argument("--method", nargs="+", default=["gc", "qgc"],
                      help="methods to run (tau applies to qgc, default 0.05)")
    simp.add_argument("--reps", type=int, default=50)
    simp.add_argument("--global-factor", action="store_true",
                      help="one crash indicator shared by all components")
    simp.add_argument("--hubs-first", action=argparse.BooleanOptionalAction, default=True,
                      help="order heatmap rows/columns with hubs first")

    ben = sub.add_parser("benchmark", parents=[common], help="degree vs covariate / events")
    ben.add_argument("--degrees", help="degrees.csv written by estimate")
    ben.add_argument("--covariate", help="CSV label,value")
    ben.add_argument("--events", nargs="*", help="event window labels")
    ben.add_argument("--events-file", help="file with one event label per line")
    ben.add_argument("--radius", type=int, default=2)

    th = sub.add_parser("theorem", parents=[common], help="Monte Carlo limit-law check")
    th.add_argument("--reps", type=int, default=1000)
    th.add_argument("--theorem-n", type=int, default=2000)
    th.add_argument("--theorem-tau", type=float, default=0.2)
    th.add_argument("--lambda-rule", choices=["zero", "power", "both"], default="both")
    th.add_argument("--lambda-c", type=float, default=0.5)
    th.add_argument("--lambda-exponent", type=float, default=0.6)
    th.add_argument("--shrinkage-n", type=int, default=None,
                    help="also run at this smaller n and compare covariance errors")
    return parser


COMMANDS = {
    "estimate": cmd_estimate,
    "simulate": cmd_simulate,
    "benchmark": cmd_benchmark,
    "theorem": cmd_theorem,
}


def parse_args(argv: Optional[Sequence[str]] = None) -> argparse.Namespace:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.config:
        try:
            cfg = json.loads(Path(args.config).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {args.config}: {exc}") from exc
        sub = parser._subparsers._group_actions[0].choices[args.command]
        known = {a.dest for a in sub._actions}
        unknown = set(cfg) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        sub.set_defaults(**cfg)
        args = parser.parse_args(argv)
    return args


def main(argv: Optional[Sequence[str]] = None) -> int:
    try:
        args = parse_args(argv)
        logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                            format="%(levelname)s %(name)s: %(message)s")
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RuntimeWarning)
            result = COMMANDS[args.command](args)
    except (QGCError, ValueError, OSError) as exc:
        print(json.dumps({"error": type(exc).__name__, "message": str(exc)}), file=sys.stderr)
        return 2
    if args.verbose:
        print(json.dumps(result, indent=2, default=str))
    return 0


if __name__ == "__main__":
    sys.exit(main())
