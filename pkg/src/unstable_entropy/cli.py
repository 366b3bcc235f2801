"""Command-line runner: ``unstable-entropy {estimate,sweep,verify,oracle}``.

Exit codes: 0 success, 1 property violation, 2 configuration error,
3 resource budget exceeded.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import os
import sys
import tempfile
from concurrent.futures import ProcessPoolExecutor
from datetime import datetime, timezone
from pathlib import Path

import numpy as np
import yaml

from . import __version__
from .config import ExperimentConfig, build_setup, canonical_json, load_config
from .covers import ball_cover_brute_force, interval_cover_greedy, oracle_interval_count
from .errors import BudgetExceeded, ConfigError, CoverageImpossible, TooManyCandidates
from .estimators import (CountRow, anchor_rows, count_from_classes, cylinder_mass_classes,
                         partition_count, sample_anchors, summarize)
from .geometry import leaf_ball_radius, shift_ball_depth
from .measures import PointMassMeasure, conditional_mass, disintegrate, uniform_on_interval
from .partitions import CylinderCell, refine_on_leaf, unstable_cell
from .systems import ShiftModel, Word
from .verify import VerifyContext, run_suites

EXIT_OK, EXIT_VIOLATION, EXIT_CONFIG, EXIT_BUDGET = 0, 1, 2, 3

COUNT_COLUMNS = ["run_id", "system", "formula", "anchor_index", "n", "epsilon", "delta",
                 "method", "count", "covered_mass", "naive_rate"]


# ---------------------------------------------------------------------------
# files


def atomic_write(path: Path, data: str):
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    with os.fdopen(fd, "w", newline="") as fh:
        fh.write(data)
    os.replace(tmp, path)


def sha256_file(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def _now() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


def _fmt(v):
    return repr(float(v)) if isinstance(v, (float, np.floating)) else str(v)


def csv_text(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([_fmt(v) for v in row])
    return buf.getvalue()


class Run:
    """Output directory bookkeeping plus the manifest written at the end."""

    def __init__(self, cfg: ExperimentConfig, out: Path, command: str):
        self.cfg, self.out, self.command = cfg, out, command
        self.config_text = cfg.dump()
        self.config_hash = hashlib.sha256(self.config_text.encode()).hexdigest()
        self.started = _now()
        self.files: list = []
        self.tasks: dict = {}
        self.status = "running"

    def previous_manifest(self):
        path = self.out / "manifest.json"
        if not path.exists():
            return None
        try:
            data = json.loads(path.read_text())
        except (OSError, ValueError):
            return None
        if data.get("config_hash") != self.config_hash:
            raise ConfigError(f"{self.out} holds a run of a different configuration; "
                              "choose another --out directory")
        return data

    def write(self, name: str, text: str):
        atomic_write(self.out / name, text)
        if name not in self.files:
            self.files.append(name)

    def finish(self, status: str):
        self.status = status
        self.write("config.yaml", self.config_text)
        files = [{"path": f, "sha256": sha256_file(self.out / f)} for f in sorted(self.files)]
        manifest = {
            "artifact_version": __version__,
            "command": self.command,
            "config_hash": self.config_hash,
            "run_id": self.cfg.run_id,
            "seed": self.cfg["seed"],
            "started": self.started,
            "finished": _now(),
            "status": status,
            "tasks": self.tasks,
            "files": files,
        }
        atomic_write(self.out / "manifest.json", canonical_json(manifest))


# ---------------------------------------------------------------------------
# estimate / sweep


def _system_label(system) -> str:
    return system.name if system.name not in ("linear", "shift") else system.identity


def _row_record(r: CountRow) -> list:
    return [r.anchor_index, r.formula, r.n, r.epsilon, r.delta, r.method, r.count, r.covered_mass]


def _record_row(rec) -> CountRow:
    return CountRow(int(rec[0]), rec[1], int(rec[2]), float(rec[3]), float(rec[4]), rec[5],
                    int(rec[6]), float(rec[7]))


def _task(setup, cfg_values, anchor_index, anchor):
    ns, epsilons, deltas, formulas, methods, samples, seed, budget = cfg_values
    return [_row_record(r) for r in anchor_rows(
        setup.system, setup.mu, setup.scheme, setup.xi, anchor_index, anchor, ns, epsilons,
        deltas, formulas, methods, samples, seed, budget)]


def _series_summary(rows, window):
    estimates, summary = summarize(rows, window)
    series = [dict(formula=s.formula, method=s.method, epsilon=s.epsilon, delta=s.delta,
                   median_slope=s.median_slope, iqr=s.iqr, anchors=s.anchors) for s in summary]
    fits = [dict(formula=f, method=m, epsilon=e, delta=d, anchor_index=a, slope=est.slope,
                 intercept=est.intercept, residual=est.residual, window=list(est.window))
            for (f, m, e, d, a), est in estimates.items()]
    ladder = []
    groups = {}
    for s in summary:
        if s.formula == "ball":
            groups.setdefault((s.method, s.delta), {})[s.epsilon] = s.median_slope
    for (method, delta), slopes in sorted(groups.items()):
        eps = sorted(slopes, reverse=True)
        diffs = [dict(a=a, b=b, difference=slopes[a] - slopes[b])
                 for i, a in enumerate(eps) for b in eps[i + 1:]]
        ladder.append(dict(method=method, delta=delta, slopes={repr(e): slopes[e] for e in eps},
                           pairwise_differences=diffs,
                           max_difference=max((abs(d["difference"]) for d in diffs), default=0.0)))
    return series, fits, ladder


def _headline(series):
    rank = {"partition": 0, "oracle_interval": 0, "oracle_cylinder": 0, "greedy": 1}
    if not series:
        return None
    best = min(series, key=lambda s: (s["formula"] != "partition", rank.get(s["method"], 2),
                                      -s["epsilon"], s["delta"]))
    return best["median_slope"]


def run_counts(cfg: ExperimentConfig, out: Path, workers: int, sweep: bool, max_tasks=None) -> int:
    ks = [cfg["partition"]["k"]]
    if sweep:
        if cfg["sweep"].get("k") is not None:
            ks = cfg["sweep"]["k"]
        if not isinstance(ks, list):
            raise cfg.error("expected a list of grid sizes", "sweep", "k")
        if not ks or not cfg["deltas"] or ("ball" in cfg["formulas"] and not cfg["epsilons"]) \
                or not cfg["formulas"]:
            raise cfg.error("the sweep grid is empty", "sweep")
    if not cfg["formulas"]:
        raise cfg.error("choose at least one formula", "formulas")
    if not cfg["deltas"]:
        raise cfg.error("choose at least one delta", "deltas")
    setups = {k: build_setup(cfg, k) for k in ks}  # validation before any output
    first = setups[ks[0]]
    shift = isinstance(first.system, ShiftModel)
    if shift:
        ks = ks[:1]
    run = Run(cfg, out, "sweep" if sweep else "estimate")
    previous = run.previous_manifest()
    done = dict(previous.get("tasks", {})) if previous else {}

    lo, hi = cfg["n_window"]
    values = (list(range(lo, hi + 1)), tuple(cfg["epsilons"]) if "ball" in cfg["formulas"] else (),
              list(cfg["deltas"]), tuple(cfg["formulas"]), tuple(cfg["ball_methods"]),
              cfg["sample_count"], cfg["seed"], cfg["budget"])
    anchors = sample_anchors(first.system, cfg["anchors"], cfg["seed"])
    keys = [(k, j) for k in ks for j in range(len(anchors))]
    key_name = {key: f"k{key[0]}-a{key[1]:04d}" for key in keys}
    parts = out / "parts"
    pending = [key for key in keys if not (done.get(key_name[key]) == "done"
                                           and (parts / f"{key_name[key]}.json").exists())]
    if max_tasks is not None:
        pending = pending[:max_tasks]
    run.tasks = {key_name[key]: done.get(key_name[key], "pending") for key in keys}
    run.files = [f"parts/{key_name[key]}.json" for key in keys if run.tasks[key_name[key]] == "done"]

    def job_args(key):
        return setups[key[0]], values, key[1], anchors[key[1]]

    status = "complete"
    try:
        if workers > 1 and len(pending) > 1:
            with ProcessPoolExecutor(max_workers=workers) as pool:
                results = pool.map(_task, *zip(*map(job_args, pending)))
                for key, recs in zip(pending, results):
                    _store_part(run, key_name[key], recs)
        else:
            for key in pending:
                _store_part(run, key_name[key], _task(*job_args(key)))
    except BudgetExceeded:
        for key in pending:
            if run.tasks[key_name[key]] != "done":
                run.tasks[key_name[key]] = "budget_exceeded"
        run.finish("budget_exceeded")
        raise

    if any(v != "done" for v in run.tasks.values()):
        run.finish("incomplete")
        print(f"stopped with {sum(v != 'done' for v in run.tasks.values())} tasks pending; "
              "rerun the same command to resume")
        return EXIT_OK

    label = _system_label(first.system)
    table, series_all, fits_all, ladder_all = [], [], [], []
    for k in ks:
        rows = []
        for j in range(len(anchors)):
            data = json.loads((parts / f"{key_name[(k, j)]}.json").read_text())
            rows.extend(_record_row(rec) for rec in data)
        rows.sort(key=lambda r: (r.anchor_index, r.formula, r.method, r.epsilon, r.delta, r.n))
        for r in rows:
            line = [cfg.run_id, label, r.formula, r.anchor_index, r.n, r.epsilon, r.delta,
                    r.method, r.count, r.covered_mass, r.naive_rate]
            table.append(line + [k] if sweep else line)
        series, fits, ladder = _series_summary(rows, (lo, hi))
        extra = {"k": k} if sweep and not shift else {}
        series_all += [dict(s, **extra) for s in series]
        fits_all += [dict(f, **extra) for f in fits]
        ladder_all += [dict(x, **extra) for x in ladder]
    header = COUNT_COLUMNS + (["k"] if sweep else [])
    run.write("counts.csv", csv_text(header, table))
    summary = {
        "run_id": cfg.run_id,
        "system": label,
        "seed": cfg["seed"],
        "n_window": [lo, hi],
        "median_slope": _headline([s for s in series_all if s.get("k", ks[0]) == ks[0]]),
        "series": series_all,
        "epsilon_ladder": ladder_all,
        "fits": fits_all,
    }
    run.write("summary.json", canonical_json(summary))
    run.finish(status)
    print(f"median slope {summary['median_slope']:.6f}; results in {out}")
    return EXIT_OK


def _store_part(run: Run, name: str, recs):
    run.write(f"parts/{name}.json", json.dumps(recs) + "\n")
    run.tasks[name] = "done"


# ---------------------------------------------------------------------------
# verify


def run_verify(cfg: ExperimentConfig, out: Path) -> int:
    setup = build_setup(cfg)
    v = cfg["verify"]
    faults = v.get("faults") or []
    if not isinstance(faults, list):
        raise cfg.error("expected a list", "verify", "faults")
    ctx = VerifyContext(setup.system, setup.mu, setup.scheme, setup.xi, seed=cfg["seed"],
                        pair_samples=int(v["pair_samples"]), triple_samples=int(v["triple_samples"]),
                        anchor_samples=int(v["anchor_samples"]), gamma=float(v["gamma"]),
                        max_n=int(v["max_n"]),
                        epsilon0=None if isinstance(setup.system, ShiftModel)
                        else float(cfg["partition"]["epsilon0"]),
                        faults=frozenset(faults))
    run = Run(cfg, out, "verify")
    report = run_suites(ctx)
    text = report.text()
    run.tasks = {s.name: ("skipped" if s.skipped else "pass" if s.passed else "fail")
                 for s in report.suites}
    run.write("report.txt", text)
    run.finish("pass" if report.passed else "fail")
    sys.stdout.write(text)
    return EXIT_OK if report.passed else EXIT_VIOLATION


# ---------------------------------------------------------------------------
# oracle


def _cover_instance(cfg: ExperimentConfig, spec):
    if isinstance(spec, str):
        base = cfg.source.parent if cfg.source else Path.cwd()
        path = (base / spec)
        try:
            spec = yaml.safe_load(path.read_text())
        except (OSError, yaml.YAMLError) as exc:
            raise cfg.error(f"cannot read cover instance {path}: {exc}", "oracle", "cover_instance")
    if not isinstance(spec, dict):
        raise cfg.error("expected a mapping or a file name", "oracle", "cover_instance")
    try:
        if spec.get("measure", "uniform") == "points":
            measure = PointMassMeasure.from_points(spec["positions"], spec.get("weights"))
        else:
            measure = uniform_on_interval(float(spec.get("length", 1.0)))
        centers = np.asarray(spec["centers"], dtype=float)
        radius = float(spec["radius"])
        delta = float(spec.get("delta", 0.1))
    except (KeyError, TypeError, ValueError) as exc:
        raise cfg.error(f"bad cover instance: {exc}", "oracle", "cover_instance") from None
    if centers.size > 20:
        raise cfg.error(f"{centers.size} candidates; the exhaustive oracle allows 20",
                        "oracle", "cover_instance")
    return measure, centers, radius, delta


def run_oracle(cfg: ExperimentConfig, out: Path) -> int:
    setup = build_setup(cfg)
    o = cfg["oracle"]
    n = o.get("n", 3)
    if not isinstance(n, int) or n < 1:
        raise cfg.error("expected a positive integer", "oracle", "n")
    instance = _cover_instance(cfg, o["cover_instance"]) if o.get("cover_instance") else None
    system = setup.system
    run = Run(cfg, out, "oracle")
    anchors = sample_anchors(system, int(o.get("anchors", 1)), cfg["seed"])
    cell_rows, count_rows = [], []
    label = _system_label(system)
    try:
        for j, anchor in enumerate(anchors):
            if isinstance(system, ShiftModel):
                cell = CylinderCell(setup.scheme, Word((int(anchor),), 0))
            else:
                cell = unstable_cell(setup.scheme, anchor)
            cond = disintegrate(setup.mu, setup.scheme, cell)
            cells = refine_on_leaf(system, setup.xi, cell, n, cfg["budget"])
            for c in cells:
                where = ("-".join(map(str, c.cylinder)) if c.cylinder is not None
                         else ";".join(f"{lo!r}:{hi!r}" for lo, hi in c.trace))
                cell_rows.append([cfg.run_id, j, n, "-".join(str(int(v)) for v in c.name), where,
                                  conditional_mass(cond, c)])
            for d in cfg["deltas"]:
                res = partition_count(cond, cells, d)
                count_rows.append([cfg.run_id, label, "partition", j, n, 0.0, d, "partition",
                                   res.count, res.covered_mass, np.log(res.count) / n])
                for e in cfg["epsilons"] if "ball" in cfg["formulas"] else ():
                    if isinstance(system, ShiftModel):
                        cnt, cov = count_from_classes(
                            cylinder_mass_classes(system, int(anchor), shift_ball_depth(n, e)), d)
                        method = "oracle_cylinder"
                    else:
                        r = leaf_ball_radius(system, n, e)
                        cnt = oracle_interval_count(cell.length, r, d)
                        cov, method = min(1.0, cnt * 2 * r / cell.length), "oracle_interval"
                    count_rows.append([cfg.run_id, label, "ball", j, n, e, d, method, cnt, cov,
                                       np.log(cnt) / n])
    except BudgetExceeded:
        run.finish("budget_exceeded")
        raise
    run.write("cells.csv", csv_text(["run_id", "anchor_index", "n", "name", "trace", "mass"], cell_rows))
    run.write("counts.csv", csv_text(COUNT_COLUMNS, count_rows))
    if instance is not None:
        measure, centers, radius, delta = instance
        traces = np.c_[centers - radius, centers + radius]
        try:
            brute = ball_cover_brute_force(measure, traces, delta, centers)
            greedy = interval_cover_greedy(measure, centers, radius, delta)
            row = [len(centers), radius, delta, greedy.count, brute.count, brute.covered_mass]
        except (CoverageImpossible, TooManyCandidates) as exc:
            raise cfg.error(str(exc), "oracle", "cover_instance") from None
        run.write("cover.csv", csv_text(["candidates", "radius", "delta", "greedy_count",
                                         "certified_min", "covered_mass"], [row]))
    run.finish("complete")
    print(f"{len(cell_rows)} cells written to {out}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# entry point


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="unstable-entropy",
                                     description="Katok-type estimates of unstable metric entropy.")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)
    for name, text in (("estimate", "run the counting formulas on random anchor leaves"),
                       ("sweep", "Cartesian sweep over grids, epsilons, deltas and anchors"),
                       ("verify", "run the sampled property suites"),
                       ("oracle", "dump exact itinerary cells and oracle counts")):
        p = sub.add_parser(name, help=text)
        p.add_argument("--config", required=True, help="YAML experiment file")
        p.add_argument("--out", help="output directory (default: the config's output)")
        p.add_argument("--seed", type=int, help="64-bit seed; overrides the config")
        p.add_argument("--workers", type=int, default=1, help="parallel worker processes")
        p.add_argument("--budget", type=int, help="crossing/cylinder budget; overrides the config")
        if name == "sweep":
            p.add_argument("--max-tasks", type=int, default=None,
                           help="stop after this many new tasks; rerun to resume")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config)
        if args.seed is not None:
            if not 0 <= args.seed < 2**64:
                raise ConfigError("--seed must be an unsigned 64-bit integer")
            cfg.data["seed"] = args.seed
        if args.budget is not None:
            if args.budget < 1:
                raise ConfigError("--budget must be positive")
            cfg.data["budget"] = args.budget
        if args.workers < 1:
            raise ConfigError("--workers must be positive")
        out = Path(args.out if args.out else cfg["output"])
        if args.command == "estimate":
            return run_counts(cfg, out, args.workers, sweep=False)
        if args.command == "sweep":
            return run_counts(cfg, out, args.workers, sweep=True, max_tasks=args.max_tasks)
        if args.command == "verify":
            return run_verify(cfg, out)
        return run_oracle(cfg, out)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except BudgetExceeded as exc:
        print(f"budget exceeded: {exc}", file=sys.stderr)
        return EXIT_BUDGET


if __name__ == "__main__":
    sys.exit(main())
