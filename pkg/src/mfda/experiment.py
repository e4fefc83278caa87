"""Sweep execution and CSV/JSON emission.

One CSV per sweep (or a single-point CSV when no sweep is configured) with
one row per (sweep value, scheme). Rows are computed independently, so
``threads > 1`` fans them out to worker processes; results are gathered in
submission order and the CSV bytes do not depend on the thread count.
Wall-clock times go to the JSON manifest; the CSV ``wall_ms`` column stays
empty unless ``record_wall_time`` is set, which keeps reruns byte-identical.
"""

import csv
import json
import platform
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace
from pathlib import Path

import numpy as np
import scipy

from mfda import __version__
from mfda.beamforming import upper_bound
from mfda.channel import random_feasible_positions
from mfda.config import SWEEP_AXES
from mfda.errors import MFDAError
from mfda.majorization import bsum_sweep_positions
from mfda.orchestrate import SchemeSpec, TimingGrid, initial_array, run_scheme
from mfda.robust import bcd_line_search_positions, build_grid, robust_abv_solve, sample_channel_matrices

CSV_COLUMNS = (
    "sweep_value", "scheme", "capacity_bits", "ideal_capacity_bits", "upper_bound_bits",
    "iterations_stage1", "iterations_stage2", "seed", "wall_ms", "status",
)
TRACE_COLUMNS = ("start", "block", "iteration", "objective", "capacity_bits")


def point_seed(root, *index):
    """Seed for one sweep point, derived from the root seed and the point index."""
    return int(np.random.SeedSequence([int(root), *map(int, index)]).generate_state(1)[0])


def apply_axis(cfg, axis, value):
    """Config with one sweep axis set to ``value``."""
    section = SWEEP_AXES[axis]
    if section == "array":
        a = cfg.array
        if axis == "M":
            a = replace(a, M=int(value))
        elif axis == "fc_hz":
            a = replace(a, fc_hz=float(value))
        elif axis == "delta_f_hz":
            a = replace(a, delta_f_hz=float(value))
        elif axis == "delta_f_ratio":
            a = replace(a, delta_f_hz=float(value) * a.fc_hz)
        elif axis == "dmax_lambda":
            a = replace(a, dmax_m=float(value) * a.wavelength)
        elif axis == "dmax_m":
            a = replace(a, dmax_m=float(value))
        return cfg.replace(array=a)
    if section == "scenario":
        s = cfg.scenario
        if axis == "theta_e_deg":
            s = s.replace(theta_e=float(np.deg2rad(value)))
        elif axis == "theta_b_deg":
            s = s.replace(theta_b=float(np.deg2rad(value)))
        elif axis == "r_e_m":
            s = s.replace(r_e=float(value))
        elif axis == "r_b_m":
            s = s.replace(r_b=float(value))
        elif axis == "pmax_dbm":
            s = s.replace(p_max=10.0 ** (float(value) / 10.0))
        return cfg.replace(scenario=s)
    if section == "timing":
        return cfg.replace(timing=replace(cfg.timing, brf_hz=float(value)))
    u = cfg.uncertainty
    if axis == "delta_theta_deg":
        u = replace(u, delta_theta_deg=float(value))
    else:
        u = replace(u, delta_r_m=float(value))
    return cfg.replace(uncertainty=u)


def _grid(cfg):
    if cfg.csi != "imperfect":
        return None
    u = cfg.uncertainty
    return build_grid(cfg.scenario, u.delta_r_m, float(np.deg2rad(u.delta_theta_deg)), u.Y, u.Z)


def _timing(cfg):
    if cfg.timing is None:
        return None
    t = cfg.timing
    return TimingGrid.from_rates(t.T_s, t.brf_hz, t.crf_hz)


def _fmt(v):
    if v is None:
        return ""
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def solve_point(task):
    """Solve one (config, scheme) point into a CSV row dict; solver errors become a status."""
    cfg, sweep_value, scheme, seed = task
    row = dict.fromkeys(CSV_COLUMNS)
    row.update(sweep_value=sweep_value, scheme=scheme, seed=seed)
    t0 = time.perf_counter()
    try:
        template = cfg.array.template()
        row["upper_bound_bits"] = upper_bound(template.M, cfg.scenario)
        rep = run_scheme(
            SchemeSpec(scheme, cfg.csi), cfg.scenario, template, cfg.solver,
            timing=_timing(cfg), grid=_grid(cfg), rng_seed=seed, pairing=cfg.pairing,
            start=cfg.array.start(),
        )
        row.update(
            capacity_bits=rep.capacity,
            ideal_capacity_bits=rep.ideal_capacity,
            upper_bound_bits=rep.upper_bound,
            iterations_stage1=rep.iterations_stage1,
            iterations_stage2=rep.iterations_stage2,
            status="ok",
        )
    except MFDAError as exc:
        row["status"] = f"error: {type(exc).__name__}: {exc}"
    row["wall_ms"] = (time.perf_counter() - t0) * 1e3
    return row


def convergence_traces(task):
    """Trace rows for one random start of the position solver (and robust beamformer)."""
    cfg, start, seed = task
    rng = np.random.default_rng(seed)
    scheme = SchemeSpec("MFDA", cfg.csi)
    array = initial_array(scheme, cfg.array.template())
    array = array.with_positions(random_feasible_positions(array, rng))
    rows = []
    t0 = time.perf_counter()
    summary = dict.fromkeys(CSV_COLUMNS)
    summary.update(sweep_value=start, scheme="MFDA", seed=seed,
                   upper_bound_bits=upper_bound(array.M, cfg.scenario))
    try:
        grid = _grid(cfg)
        if grid is None:
            array, tr = bsum_sweep_positions(array, cfg.scenario, cfg.solver)
        else:
            array, tr = bcd_line_search_positions(array, cfg.scenario, grid, cfg.solver)
        rows += [(start, "position", it, obj, cap) for it, obj, cap in tr.rows]
        cap = tr.rows[-1][2]
        stage2 = 0
        if grid is not None:
            A, Bs = sample_channel_matrices(0.0, array, cfg.scenario, grid)
            res = robust_abv_solve(A, Bs, cfg.scenario.p_max, cfg.solver, rng_seed=seed, init="random")
            rows += [(start, "beamformer", it, rate, rate) for it, rate, _, _ in res.trace]
            cap = res.rate_bits
            stage2 = res.iterations
        summary.update(capacity_bits=max(cap, 0.0), ideal_capacity_bits=max(cap, 0.0),
                       iterations_stage1=tr.iterations, iterations_stage2=stage2, status="ok")
    except MFDAError as exc:
        summary["status"] = f"error: {type(exc).__name__}: {exc}"
    summary["wall_ms"] = (time.perf_counter() - t0) * 1e3
    return summary, rows


def _map(fn, tasks, threads):
    if threads <= 1 or len(tasks) <= 1:
        return [fn(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, tasks))


def _write_csv(path, header, rows):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([_fmt(v) for v in r])


def _row_values(row, record_wall_time):
    vals = [row[c] for c in CSV_COLUMNS]
    if not record_wall_time:
        vals[CSV_COLUMNS.index("wall_ms")] = None
    return vals


def plan(cfg):
    """List of ``(sweep name, axis, [(value, config)])``; a single empty-valued point without sweeps."""
    if not cfg.sweeps:
        return [("single", None, [(None, cfg)])]
    return [(s.name, s.axis, [(v, apply_axis(cfg, s.axis, v)) for v in s.values]) for s in cfg.sweeps]


def _axis_value(axis, v):
    if v is None:
        return None
    return int(v) if axis == "M" else float(v)


def run_experiment(cfg, output_dir=None, threads=1, record_wall_time=False):
    """Run every sweep of ``cfg`` and write CSVs plus ``manifest.json``.

    Returns ``(exit_status, written_paths)``; the status is 0 when every row
    solved and 3 when some rows carry an error status.
    """
    out = Path(output_dir or cfg.output_dir or Path("results") / cfg.name)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    manifest = {
        "name": cfg.name,
        "kind": cfg.kind,
        "config_sha256": cfg.digest(),
        "seed": cfg.seed,
        "threads": threads,
        "versions": {
            "mfda": __version__,
            "numpy": np.__version__,
            "scipy": scipy.__version__,
            "python": platform.python_version(),
        },
        "outputs": [],
    }
    failed = False
    if cfg.kind == "convergence":
        tasks = [(cfg, s, point_seed(cfg.seed, 0, s)) for s in range(cfg.starts)]
        results = _map(convergence_traces, tasks, threads)
        summary = out / f"{cfg.name}.csv"
        trace = out / f"{cfg.name}_trace.csv"
        _write_csv(summary, CSV_COLUMNS, [_row_values(r, record_wall_time) for r, _ in results])
        _write_csv(trace, TRACE_COLUMNS, [row for _, rows in results for row in rows])
        written += [summary, trace]
        failed = any(r["status"] != "ok" for r, _ in results)
        manifest["outputs"].append({
            "file": summary.name,
            "trace_file": trace.name,
            "seeds": [t[2] for t in tasks],
            "wall_ms": [r["wall_ms"] for r, _ in results],
        })
    else:
        for si, (name, axis, points) in enumerate(plan(cfg)):
            tasks = []
            seeds = []
            for pi, (value, pcfg) in enumerate(points):
                seed = point_seed(cfg.seed, si, pi)
                seeds.append(seed)
                tasks += [(pcfg, _axis_value(axis, value), s, seed) for s in cfg.schemes]
            rows = _map(solve_point, tasks, threads)
            path = out / f"{name}.csv"
            _write_csv(path, CSV_COLUMNS, [_row_values(r, record_wall_time) for r in rows])
            written.append(path)
            failed = failed or any(r["status"] != "ok" for r in rows)
            manifest["outputs"].append({
                "file": path.name,
                "sweep": name,
                "axis": axis,
                "values": [_axis_value(axis, v) for v, _ in points],
                "seeds": seeds,
                "wall_ms": [r["wall_ms"] for r in rows],
            })
    mpath = out / "manifest.json"
    mpath.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    written.append(mpath)
    return (3 if failed else 0), written
