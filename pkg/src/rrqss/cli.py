"""Command-line front end.

Subcommands: ``sweep``, ``optimize``, ``simulate``, ``check`` and
``plot-data``. Curves are written as CSV (or JSON) with the column order in
``COLUMNS``; reports are JSON. Logging goes to stderr only.
"""
from __future__ import annotations

import argparse
import csv
import dataclasses
import io
import json
import logging
import sys
from concurrent.futures import ProcessPoolExecutor
from datetime import datetime, timezone
from pathlib import Path
from typing import Iterable, List, Optional

from . import __version__
from .config import ConfigError, RunConfig, load_config
from .keyrate import FiniteSizeParams, ProtocolParams
from .model import Geometry, plob_bound
from .optimizer import optimize
from .protocol_sim import (
    InsufficientStatistics,
    TrainConfig,
    run_batch,
    validate_against_analytic,
)
from .security_checks import equivalence_report

log = logging.getLogger("rrqss")

COLUMNS = [
    "distance_km", "objective", "tagging", "e_d", "N", "s", "rate", "clamped", "status",
    "mu", "L", "nu_th", "Q", "Q_A", "Q_B", "Q_hat", "e_b", "e_src", "e_p", "e_p_hat",
    "r1", "r2", "plob",
]

FIGURE_PRESETS = {
    "3": "inside and outside rates against the PLOB bound, e_d = 2%",
    "4": "inside rate for e_d in {2, 4, 6, 8}% against the PLOB bound",
    "5": "asymptotic inside rate against finite-size rates, N = 1e3 and 1e4, s = 100",
}


# --------------------------------------------------------------------------
# sweeps


def _distance_records(job) -> List[dict]:
    cfg, D = job
    geom = Geometry(float(D))
    plob = plob_bound(cfg.system, geom)
    base = {"distance_km": float(D), "e_d": cfg.system.e_d,
            "N": cfg.finite.N if cfg.finite else None,
            "s": cfg.finite.s if cfg.finite else None, "plob": plob}
    rows = []
    for objective in cfg.objectives:
        row = dict.fromkeys(COLUMNS)
        row.update(base, objective=objective)
        if objective == "plob":
            row.update(rate=plob, clamped=0, status="ok", N=None, s=None)
            rows.append(row)
            continue
        if objective != "inside_finite":
            row.update(N=None, s=None)
        if objective == "inside":
            row["tagging"] = cfg.tagging
        res = optimize(cfg.system, geom, cfg.search, objective,
                       fin=cfg.finite if objective == "inside_finite" else None,
                       tagging=cfg.tagging)
        if not res.feasible:
            row.update(rate=0.0, clamped=1, status="no_positive_rate")
        else:
            bd = res.breakdown
            row.update(rate=bd.R, clamped=int(bd.clamped), status="ok",
                       mu=res.best.mu, L=res.best.L, nu_th=res.best.nu_th,
                       Q=bd.Q, Q_A=bd.Q_A, Q_B=bd.Q_B, Q_hat=bd.Q_hat, e_b=bd.e_b,
                       e_src=bd.e_src, e_p=bd.e_p, e_p_hat=bd.e_p_hat, r1=bd.r1, r2=bd.r2)
        rows.append(row)
    log.info("D=%g km done: %s", D,
             ", ".join(f"{r['objective']}={r['rate']:.4g}" for r in rows))
    return rows


def sweep_records(cfg: RunConfig) -> List[dict]:
    """One record per (distance, objective), in distance order."""
    jobs = [(cfg, D) for D in cfg.distances]
    if cfg.workers > 1:
        with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
            chunks = list(pool.map(_distance_records, jobs))
    else:
        chunks = [_distance_records(job) for job in jobs]
    return [row for chunk in chunks for row in chunk]


def _cell(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v)
    return str(v)


def render_records(records: Iterable[dict], fmt: str, timestamp: bool,
                   meta: Optional[dict] = None) -> str:
    records = list(records)
    stamp = datetime.now(timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ")
    if fmt == "json":
        doc = {"columns": COLUMNS, "meta": meta or {}, "records": records}
        if timestamp:
            doc["generated"] = stamp
        return json.dumps(doc, indent=2, sort_keys=False) + "\n"
    buf = io.StringIO()
    if timestamp:
        buf.write(f"# generated {stamp}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(COLUMNS)
    for rec in records:
        w.writerow([_cell(rec.get(c)) for c in COLUMNS])
    return buf.getvalue()


def _write(path: Path, text: str) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text)
    return path


def figure_configs(figure: str, cfg: RunConfig) -> List[RunConfig]:
    rep = dataclasses.replace
    if figure == "3":
        return [rep(cfg, objectives=("inside", "outside", "plob"), finite=None)]
    if figure == "4":
        return [rep(cfg, system=cfg.system.replace(e_d=ed),
                    objectives=("inside", "plob") if i == 0 else ("inside",), finite=None)
                for i, ed in enumerate((0.02, 0.04, 0.06, 0.08))]
    if figure == "5":
        s = cfg.finite.s if cfg.finite else 100
        return [rep(cfg, objectives=("inside",), tagging="separate", finite=None)] + [
            rep(cfg, objectives=("inside_finite",), finite=FiniteSizeParams(N, s))
            for N in (1e3, 1e4)
        ]
    raise ConfigError(f"unknown figure preset {figure!r}")


# --------------------------------------------------------------------------
# validation


def run_checks(cfg: RunConfig, corrupt_ed: Optional[float] = None) -> dict:
    """Monte-Carlo agreement at the configured points plus the equivalence theorem.

    With ``check_trains == 0`` only the equivalence checks run.
    ``corrupt_ed`` swaps the analytic side's misalignment error, which must
    make the Monte-Carlo checks fail.
    """
    checks = []
    if cfg.check_trains > 0:
        ref = cfg.system.replace(e_d=corrupt_ed) if corrupt_ed is not None else None
        for i, pt in enumerate(cfg.check_points):
            name = f"monte_carlo[D={pt['distance']:g},mu={pt['mu']:g},L={pt['L']}]"
            tc = TrainConfig(cfg.system, ProtocolParams(pt["mu"], pt["L"], pt.get("nu_th", 2)),
                             Geometry(pt["distance"]), cfg.check_trains, (cfg.seed, i))
            try:
                rep = validate_against_analytic(tc, reference=ref, workers=cfg.workers)
                checks.append({"name": name, "passed": rep.passed, **rep.as_dict()})
            except InsufficientStatistics as exc:
                checks.append({"name": name, "passed": False, "error": str(exc)})
            log.info("%s: %s", name, "pass" if checks[-1]["passed"] else "FAIL")
    for L in cfg.equivalence_L:
        rep = equivalence_report(L, cfg.equivalence_trials, seed=cfg.seed)
        checks.append({"name": f"equivalence[L={L}]", **rep})
        log.info("equivalence L=%d: max deviation %.3g", L, rep["max_deviation"])
    return {"passed": all(c["passed"] for c in checks), "checks": checks}


# --------------------------------------------------------------------------
# argument handling


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="JSON configuration file")
    p.add_argument("--ed", type=float, help="misalignment error rate")
    p.add_argument("--N", type=float, help="sifted key length for finite-size rates")
    p.add_argument("--s", type=float, help="security exponent, eps = 2**-s")
    p.add_argument("--seed", type=int)
    p.add_argument("--out", help="output directory")
    p.add_argument("--format", choices=("csv", "json"))
    p.add_argument("--no-timestamp", action="store_true",
                   help="omit the generation timestamp so reruns are byte-identical")
    p.add_argument("--workers", type=int)
    p.add_argument("-v", "--verbose", action="store_true")


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="rrqss", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="cmd", required=True)

    s = sub.add_parser("sweep", help="optimized rates over a distance grid")
    _common(s)
    s.add_argument("--objective", action="append", dest="objectives",
                   help="outside, inside, inside_finite or plob (repeatable)")
    s.add_argument("--start", type=float)
    s.add_argument("--stop", type=float)
    s.add_argument("--step", type=float)
    s.add_argument("--tagging", choices=("merged", "separate"))

    o = sub.add_parser("optimize", help="optimize at a single distance")
    _common(o)
    o.add_argument("--distance", type=float, required=True)
    o.add_argument("--objective", default="inside",
                   choices=("outside", "inside", "inside_finite"))
    o.add_argument("--tagging", choices=("merged", "separate"))

    m = sub.add_parser("simulate", help="Monte-Carlo run at one parameter point")
    _common(m)
    m.add_argument("--distance", type=float)
    m.add_argument("--mu", type=float)
    m.add_argument("--L", type=int)
    m.add_argument("--nu-th", type=int)
    m.add_argument("--trains", type=int)
    m.add_argument("--trace", action="store_true", help="write per-train JSON lines")

    c = sub.add_parser("check", help="Monte-Carlo and measurement-equivalence checks")
    _common(c)
    c.add_argument("--trains", type=int, help="trains per Monte-Carlo point; 0 skips them")
    c.add_argument("--trials", type=int, help="random states per equivalence check")
    c.add_argument("--corrupt-ed", type=float,
                   help="compare against analytic values computed with this e_d")

    d = sub.add_parser("plot-data", help="sweep with a preset figure configuration")
    _common(d)
    d.add_argument("--figure", choices=sorted(FIGURE_PRESETS), required=True)
    d.add_argument("--start", type=float)
    d.add_argument("--stop", type=float)
    d.add_argument("--step", type=float)
    return p


def apply_overrides(cfg: RunConfig, args: argparse.Namespace) -> RunConfig:
    rep = {}
    if args.ed is not None:
        rep["system"] = cfg.system.replace(e_d=args.ed)
    if args.N is not None or args.s is not None:
        base = cfg.finite or FiniteSizeParams(1e4, 100)
        rep["finite"] = FiniteSizeParams(args.N if args.N is not None else base.N,
                                         args.s if args.s is not None else base.s,
                                         base.exact)
    for attr, key in (("seed", "seed"), ("out", "out_dir"), ("format", "fmt"),
                      ("workers", "workers"), ("start", "start"), ("stop", "stop"),
                      ("step", "step"), ("tagging", "tagging")):
        val = getattr(args, attr, None)
        if val is not None:
            rep[key] = val
    if getattr(args, "objectives", None):
        rep["objectives"] = tuple(args.objectives)
    if args.no_timestamp:
        rep["timestamp"] = False
    if getattr(args, "trains", None) is not None and args.cmd == "check":
        rep["check_trains"] = args.trains
    if getattr(args, "trials", None) is not None:
        rep["equivalence_trials"] = args.trials
    try:
        return dataclasses.replace(cfg, **rep)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


# --------------------------------------------------------------------------
# commands


def cmd_sweep(cfg: RunConfig, args) -> int:
    records = sweep_records(cfg)
    path = Path(cfg.out_dir) / f"sweep.{cfg.fmt}"
    _write(path, render_records(records, cfg.fmt, cfg.timestamp))
    print(path)
    return 0


def cmd_plot_data(cfg: RunConfig, args) -> int:
    records = []
    for sub in figure_configs(args.figure, cfg):
        records.extend(sweep_records(sub))
    meta = {"figure": args.figure, "description": FIGURE_PRESETS[args.figure]}
    path = Path(cfg.out_dir) / f"fig{args.figure}.{cfg.fmt}"
    _write(path, render_records(records, cfg.fmt, cfg.timestamp, meta))
    print(path)
    return 0


def cmd_optimize(cfg: RunConfig, args) -> int:
    if args.objective == "inside_finite" and cfg.finite is None:
        raise ConfigError("inside_finite needs --N/--s or a 'finite' config section")
    one = dataclasses.replace(cfg, start=args.distance, stop=args.distance, step=1.0,
                              objectives=(args.objective, "plob"))
    records = sweep_records(one)
    text = render_records(records, cfg.fmt, cfg.timestamp)
    _write(Path(cfg.out_dir) / f"optimize.{cfg.fmt}", text)
    sys.stdout.write(text)
    return 0


def cmd_simulate(cfg: RunConfig, args) -> int:
    sim = dict(cfg.simulate)
    for key, attr in (("distance", "distance"), ("mu", "mu"), ("L", "L"),
                      ("nu_th", "nu_th"), ("trains", "trains")):
        if getattr(args, attr) is not None:
            sim[key] = getattr(args, attr)
    try:
        tc = TrainConfig(cfg.system, ProtocolParams(sim["mu"], sim["L"], sim["nu_th"]),
                         Geometry(sim["distance"]), int(sim["trains"]), cfg.seed)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    if args.trace:
        with open(out / "trace.jsonl", "w") as fh:
            stats = run_batch(tc, workers=1, trace=fh)
    else:
        stats = run_batch(tc, workers=cfg.workers)
    report = {"params": sim, "seed": cfg.seed, "stats": stats.as_dict()}
    if cfg.timestamp:
        report["generated"] = datetime.now(timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ")
    text = json.dumps(report, indent=2) + "\n"
    _write(out / "simulate.json", text)
    sys.stdout.write(text)
    return 0


def cmd_check(cfg: RunConfig, args) -> int:
    report = run_checks(cfg, corrupt_ed=args.corrupt_ed)
    if cfg.timestamp:
        report["generated"] = datetime.now(timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ")
    _write(Path(cfg.out_dir) / "check.json", json.dumps(report, indent=2) + "\n")
    for c in report["checks"]:
        print(f"{'PASS' if c['passed'] else 'FAIL'}  {c['name']}")
    return 0 if report["passed"] else 1


COMMANDS = {
    "sweep": cmd_sweep,
    "optimize": cmd_optimize,
    "simulate": cmd_simulate,
    "check": cmd_check,
    "plot-data": cmd_plot_data,
}


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(name)s: %(message)s", stream=sys.stderr)
    try:
        cfg = apply_overrides(load_config(args.config), args)
        return COMMANDS[args.cmd](cfg, args)
    except ConfigError as exc:
        print(f"rrqss: config error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
