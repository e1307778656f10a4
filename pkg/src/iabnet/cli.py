"""Batch front-end: parse config/sweep files, run analytic and/or Monte
Carlo evaluations over a parameter sweep, emit CSV, and reproduce the canned
figure sweeps.

Config and sweep files are flat ``key = value`` lines with ``#`` comments;
config keys mirror the system-parameter notation (``lambda_m``, ``xi``,
``eta_db``, ``q_adc``, ...). CSV rows are written in deterministic axis
order regardless of worker completion order; the ``seconds`` column is
filled only with --timings so that default output is byte-reproducible
under a fixed seed.
"""
from __future__ import annotations

import argparse
import csv
import math
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

from . import analysis, montecarlo
from .config import ConfigError, SystemParams, db_to_linear, table_defaults, validate

EXIT_PARSE = 2
EXIT_EVAL = 3

AXES = ("bias_ratio_db", "eta_db", "xi", "density_ratio", "q_adc", "tau_db")
METRICS = ("association", "coverage", "cap_outage", "ergodic")
ENGINES = ("analytic", "mc", "both")

CSV_HEADER = ("axis_name", "axis_value", "engine", "metric", "link_class",
              "value", "ci95", "seconds")

FIGURES = ("assoc_vs_bias", "coverage_vs_bias", "capouter_vs_rsi",
           "capouter_vs_adc", "ergodic_vs_rsi", "ergodic_vs_xi")


class SweepError(ValueError):
    pass


def parse_kv_file(path):
    """Flat key = value file; '#' starts a comment; values parse as int,
    float, then string; comma-separated values parse as lists."""
    out = {}
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise SweepError(f"{path}:{lineno}: expected 'key = value'")
            key, val = (s.strip() for s in line.split("=", 1))
            if not key:
                raise SweepError(f"{path}:{lineno}: empty key")
            out[key] = _parse_value(val)
    return out


def _parse_scalar(tok):
    try:
        return int(tok)
    except ValueError:
        pass
    try:
        return float(tok)
    except ValueError:
        return tok


def _parse_value(val):
    if "," in val:
        return [_parse_scalar(t.strip()) for t in val.split(",") if t.strip()]
    return _parse_scalar(val)


@dataclass
class SweepSpec:
    axis: str
    values: list
    metrics: list
    engine: str = "analytic"
    mc_iterations: int = 100_000
    seed: int = 1
    tau_db: float = 0.0
    fidelity: str = "atom"

    @classmethod
    def from_mapping(cls, d):
        d = dict(d)
        axis = d.pop("axis", None)
        if axis not in AXES:
            raise SweepError(f"unknown axis {axis!r} (expected one of {AXES})")
        if "values" in d:
            values = d.pop("values")
            if not isinstance(values, list):
                values = [values]
        elif {"start", "stop", "count"} <= set(d):
            start, stop, count = d.pop("start"), d.pop("stop"), int(d.pop("count"))
            if count < 1:
                raise SweepError("count must be >= 1")
            step = (stop - start) / (count - 1) if count > 1 else 0.0
            values = [start + i * step for i in range(count)]
        else:
            raise SweepError("sweep needs 'values' or 'start'/'stop'/'count'")
        if not values:
            raise SweepError("sweep grid is empty")
        metrics = d.pop("metrics", ["coverage"])
        if not isinstance(metrics, list):
            metrics = [metrics]
        for m in metrics:
            if m not in METRICS:
                raise SweepError(f"unknown metric {m!r} (expected subset of {METRICS})")
        spec = cls(axis=axis, values=values, metrics=metrics)
        if "engines" in d:
            spec.engine = str(d.pop("engines"))
        if "engine" in d:
            spec.engine = str(d.pop("engine"))
        if spec.engine not in ENGINES:
            raise SweepError(f"unknown engine {spec.engine!r}")
        if "mc_iterations" in d:
            spec.mc_iterations = int(d.pop("mc_iterations"))
        if "seed" in d:
            spec.seed = int(d.pop("seed"))
        if "tau_db" in d:
            spec.tau_db = float(d.pop("tau_db"))
        if "fidelity" in d:
            spec.fidelity = str(d.pop("fidelity"))
        if d:
            raise SweepError(f"unknown sweep key(s): {sorted(d)}")
        return spec


def apply_axis(raw, axis, value):
    """Return a params object with one sweep axis applied to the raw config."""
    raw = dict(raw)
    if axis == "bias_ratio_db":
        raw.pop("bias_ratio", None)
        raw["bias_ratio_db"] = value
    elif axis == "eta_db":
        raw.pop("eta", None)
        raw["eta_db"] = value
    elif axis == "xi":
        raw["xi"] = value
    elif axis == "density_ratio":
        base = validate(dict(raw))
        raw["lambda_s"] = value * base.lambda_m
    elif axis == "q_adc":
        raw["q_adc"] = int(value)
    elif axis == "tau_db":
        pass  # threshold axis; params unchanged
    else:
        raise SweepError(f"unknown axis {axis!r}")
    return validate(raw)


def _tau_linear(spec, axis_value):
    tau_db = axis_value if spec.axis == "tau_db" else spec.tau_db
    return db_to_linear(tau_db)


def eval_point(raw, spec: SweepSpec, value, point_index):
    """All result rows for one sweep point (both engines as requested)."""
    params = apply_axis(raw, spec.axis, value)
    tau = _tau_linear(spec, value)
    rows = []

    def add(engine, metric, link, val, ci, secs):
        rows.append({"axis_name": spec.axis, "axis_value": value, "engine": engine,
                     "metric": metric, "link_class": link, "value": val,
                     "ci95": ci, "seconds": secs})

    engines = ("analytic", "mc") if spec.engine == "both" else (spec.engine,)
    for engine in engines:
        for metric in spec.metrics:
            t0 = time.perf_counter()
            if engine == "analytic":
                if metric == "association":
                    a = analysis.association_probabilities_cached(params)
                    vals = {"gnb": a.A_m, "iab_los": a.A_sL, "iab_nlos": a.A_sN,
                            "total": a.total}
                    for k, v in vals.items():
                        add(engine, metric, k, v, "", time.perf_counter() - t0)
                elif metric == "coverage":
                    r = analysis.sinr_coverage(tau, params)
                    add(engine, metric, "total", r.value, "", time.perf_counter() - t0)
                    for k, v in r.per_link.items():
                        add(engine, metric, k, v, "", time.perf_counter() - t0)
                elif metric == "cap_outage":
                    r = analysis.capacity_with_outage(tau, params)
                    add(engine, metric, "total", r.value, "", time.perf_counter() - t0)
                    for k, v in r.per_link.items():
                        add(engine, metric, k, v, "", time.perf_counter() - t0)
                else:
                    r = analysis.ergodic_capacity(params)
                    add(engine, metric, "total", r.value, "", time.perf_counter() - t0)
                    for k, v in r.per_link.items():
                        add(engine, metric, k, v, "", time.perf_counter() - t0)
            else:
                seed = spec.seed + 7919 * point_index
                kw = {"fidelity": spec.fidelity}
                if metric == "coverage":
                    kw["tau"] = tau
                if metric == "cap_outage":
                    kw["tau_min"] = tau
                est = montecarlo.estimate(metric, params, spec.mc_iterations, seed, **kw)
                for k, e in est.items():
                    if isinstance(e, montecarlo.McEstimate):
                        add(engine, metric, k, e.mean, e.half_width_95,
                            time.perf_counter() - t0)
    return rows


def _format(x):
    if isinstance(x, str):
        return x
    if isinstance(x, float):
        return format(x, ".10g")
    return str(x)


def write_csv(rows, out_path, timings=False):
    with open(out_path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(CSV_HEADER)
        for r in rows:
            secs = format(r["seconds"], ".3f") if timings and r["seconds"] != "" else ""
            w.writerow([r["axis_name"], _format(r["axis_value"]), r["engine"],
                        r["metric"], r["link_class"], _format(r["value"]),
                        _format(r["ci95"]), secs])


def _print_summary(rows, file=sys.stdout):
    print(f"{'axis':>14} {'value':>10} {'engine':>8} {'metric':>12} "
          f"{'link':>18} {'result':>14} {'ci95':>10}", file=file)
    for r in rows:
        if r["link_class"] in ("total", "gnb", "iab_los", "iab_nlos"):
            ci = _format(r["ci95"]) if r["ci95"] != "" else "-"
            print(f"{r['axis_name']:>14} {_format(r['axis_value']):>10} "
                  f"{r['engine']:>8} {r['metric']:>12} {r['link_class']:>18} "
                  f"{_format(r['value']):>14} {ci:>10}", file=file)


def run(config_path, sweep_path, out_path, overrides=None, timings=False):
    """Full sweep run; returns the process exit code."""
    try:
        raw = dict(table_defaults())
        if config_path:
            raw.update(parse_kv_file(config_path))
        validate(dict(raw))  # fail fast on config problems
        sweep = SweepSpec.from_mapping(parse_kv_file(sweep_path))
        for k, v in (overrides or {}).items():
            setattr(sweep, k, v)
    except (ConfigError, SweepError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PARSE

    try:
        rows = _run_points(raw, sweep)
    except Exception as exc:  # evaluator failure: report and signal
        print(f"evaluation error: {exc}", file=sys.stderr)
        return EXIT_EVAL

    write_csv(rows, out_path, timings=timings)
    _print_summary(rows)
    print(f"wrote {out_path} ({len(rows)} rows)")
    return 0


def _eval_star(args):
    return eval_point(*args)


def _run_points(raw, sweep):
    jobs = [(raw, sweep, v, i) for i, v in enumerate(sweep.values)]
    workers = int(os.environ.get("IABNET_WORKERS", "1"))
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_eval_star, jobs))
    else:
        results = [eval_point(*j) for j in jobs]
    rows = []
    for part in results:  # deterministic axis order
        rows.extend(part)
    return rows


# ---------------------------------------------------------------------------
# canned figure sweeps (analytic engine, Table defaults)

def _figure_jobs(figure_id):
    bias_grid = [-10, -5, 0, 5, 10, 15, 20]
    eta_grid = [-90, -80, -70, -60, -50, -40, -30, -20]
    if figure_id == "assoc_vs_bias":
        return [("association", "bias_ratio_db", bias_grid, {}, "")]
    if figure_id == "coverage_vs_bias":
        return [("coverage", "bias_ratio_db", bias_grid, {"tau_db": t}, f"_tau{t}db")
                for t in (0, 5, 10)]
    if figure_id == "capouter_vs_rsi":
        return [("cap_outage", "eta_db", eta_grid, {"duplex": dup}, f"_{dup.lower()}")
                for dup in ("IBFD", "HD")]
    if figure_id == "capouter_vs_adc":
        return [("cap_outage", "q_adc", list(range(1, 13)), {}, "")]
    if figure_id == "ergodic_vs_rsi":
        return [("ergodic", "eta_db", eta_grid, {"duplex": dup}, f"_{dup.lower()}")
                for dup in ("IBFD", "HD")]
    if figure_id == "ergodic_vs_xi":
        return [("ergodic", "xi", [0, 25, 50, 100], {"duplex": dup}, f"_{dup.lower()}")
                for dup in ("IBFD", "HD")]
    raise SweepError(f"unknown figure id {figure_id!r} (expected one of {FIGURES})")


def reproduce(figure_id, out_dir, timings=False):
    """Run the canned sweep for one named figure; CSV plus a gnuplot-ready
    .dat with one column per series."""
    try:
        jobs = _figure_jobs(figure_id)
    except SweepError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PARSE

    os.makedirs(out_dir, exist_ok=True)
    all_rows, series = [], {}
    try:
        for metric, axis, grid, over, suffix in jobs:
            raw = table_defaults()
            for k, v in over.items():
                if k == "duplex":
                    raw["duplex"] = v
                else:
                    raw[k] = v
            sweep = SweepSpec(axis=axis, values=grid, metrics=[metric],
                              engine="analytic",
                              tau_db=over.get("tau_db", 0.0))
            rows = _run_points(raw, sweep)
            for r in rows:
                r["metric"] = r["metric"] + suffix
            all_rows.extend(rows)
            for r in rows:
                if r["link_class"] in ("total", "gnb", "iab_los", "iab_nlos"):
                    name = (r["metric"] if r["link_class"] == "total"
                            else f"{r['metric']}_{r['link_class']}")
                    series.setdefault(name, {})[r["axis_value"]] = r["value"]
    except Exception as exc:
        print(f"evaluation error: {exc}", file=sys.stderr)
        return EXIT_EVAL

    csv_path = os.path.join(out_dir, f"{figure_id}.csv")
    write_csv(all_rows, csv_path, timings=timings)
    dat_path = os.path.join(out_dir, f"{figure_id}.dat")
    names = sorted(series)
    xs = sorted({x for s in series.values() for x in s})
    with open(dat_path, "w") as fh:
        fh.write("# " + " ".join(["axis"] + names) + "\n")
        for x in xs:
            cells = [_format(x)] + [
                _format(series[n].get(x, math.nan)) for n in names]
            fh.write(" ".join(cells) + "\n")
    _print_summary(all_rows)
    print(f"wrote {csv_path} and {dat_path}")
    return 0


def main(argv=None):
    ap = argparse.ArgumentParser(
        prog="iabnet",
        description="Coverage/capacity analysis and Monte Carlo validation "
                    "for mmWave full-duplex IAB networks")
    ap.add_argument("--config", help="system parameter file (defaults used if omitted)")
    ap.add_argument("--sweep", help="sweep specification file")
    ap.add_argument("--out", help="output CSV path (or directory for --figure)")
    ap.add_argument("--engine", choices=ENGINES, help="override the sweep engine")
    ap.add_argument("--seed", type=int, help="override the Monte Carlo seed")
    ap.add_argument("--mc-iters", type=int, help="override Monte Carlo iterations")
    ap.add_argument("--figure", help=f"reproduce a canned sweep: {', '.join(FIGURES)}")
    ap.add_argument("--timings", action="store_true",
                    help="fill the seconds column (non-reproducible bytes)")
    args = ap.parse_args(argv)

    if args.figure:
        return reproduce(args.figure, args.out or ".", timings=args.timings)

    if not args.sweep or not args.out:
        ap.print_usage(sys.stderr)
        print("error: --sweep and --out are required (or use --figure)", file=sys.stderr)
        return EXIT_PARSE
    overrides = {}
    if args.engine:
        overrides["engine"] = args.engine
    if args.seed is not None:
        overrides["seed"] = args.seed
    if args.mc_iters is not None:
        overrides["mc_iterations"] = args.mc_iters
    return run(args.config, args.sweep, args.out, overrides, timings=args.timings)


if __name__ == "__main__":
    sys.exit(main())
