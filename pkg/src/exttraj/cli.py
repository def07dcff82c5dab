"""Command-line harness: configuration, simulate/track/evaluate/mc, files and plots.

Exit codes: 0 success, 2 usage or configuration error, 3 numerical failure.
"""
from __future__ import annotations

import argparse
import copy
import csv
import json
import math
import os
import sys
import time
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Sequence

import numpy as np

from .core import NumericalFailure, TrackingError
from .metrics import Trajectory, online_trajectory_metric, per_step_gwd
from .models import build_model
from .partitioning import default_thresholds
from .simulation import (ScenarioConfig, TargetScript, generate_ground_truth,
                         generate_measurements, scenario1, scenario1_birth)
from .tracker import FILTERS, ReductionConfig, run_filter

EST_COLUMNS = ("run", "step", "traj_id", "start_step", "x", "y", "vx", "vy",
               "theta", "l1", "l2", "weight")
TRAJ_COLUMNS = ("run", "step", "traj_id", "start_step", "hist_step", "x", "y", "vx", "vy",
                "theta", "l1", "l2")
TRUTH_COLUMNS = ("target", "step", "x", "y", "vx", "vy", "theta", "l1", "l2")


class ConfigError(Exception):
    """Malformed configuration; carries a field path or a line number."""


DEFAULTS: dict[str, Any] = {
    "scenario": "scenario1",
    "duration_steps": None,
    "model": {
        "sampling_interval_s": 1.0,
        "kinematic_noise_std_mps2": 10.0,
        "orientation_noise_std_rad": 0.05,
        "axis_noise_std_m": 0.1,
        "measurement_noise_std_m": 10.0,
        "multiplicative_noise_var": 0.25,
        "detection_probability": 0.98,
        "survival_probability": 0.99,
        "measurement_rate_per_scan": 20.0,
        "clutter_rate_per_scan": 10.0,
        "region_m": [-100.0, 2100.0, -100.0, 2100.0],
        "max_cardinality": 50,
        "min_axis_m": 0.1,
    },
    "birth": {
        "weight": 0.1,
        "shape": {"theta_rad": 0.0, "l1_m": 45.0, "l2_m": 35.0},
        "kinematic_cov_diag_m2_m2ps2": [50.0, 50.0, 5.0, 5.0],
        "shape_cov_diag_rad2_m2": [0.2, 100.0, 100.0],
        "position_offset_std_m": [10.0, 10.0],
    },
    "reduction": {
        "prune_threshold": 1e-5,
        "kinematic_merge_threshold": 4.0,
        "shape_merge_threshold": 1.0,
        "max_components": 300,
    },
    "partitioning": {
        "thresholds_m": None,
        "threshold_factors": [1.0, 2.0, 3.0, 4.0],
        "pool_singletons": None,
    },
    "tcphd": {"pgf": "closed-form"},
    "metric": {"cutoff_m": 40.0, "order": 1.0, "switch_cost": 2.0},
    "uniform_extent": False,
}

_NULLABLE = {("duration_steps",), ("partitioning", "thresholds_m"),
             ("partitioning", "pool_singletons")}


def _merge(base: dict, user: dict, path: tuple[str, ...] = ()) -> dict:
    out = copy.deepcopy(base)
    for key, val in user.items():
        here = path + (key,)
        name = ".".join(here)
        if key not in base:
            raise ConfigError(f"unknown field '{name}'")
        ref = base[key]
        if isinstance(ref, dict):
            if not isinstance(val, dict):
                raise ConfigError(f"field '{name}' must be an object")
            out[key] = _merge(ref, val, here)
        elif key == "scenario" and not path:
            if not isinstance(val, (str, dict)):
                raise ConfigError("field 'scenario' must be a preset name or an object")
            out[key] = val
        elif val is None:
            if here not in _NULLABLE:
                raise ConfigError(f"field '{name}' may not be null")
            out[key] = None
        else:
            out[key] = _check_type(val, ref, name, here)
    return out


def _check_type(val, ref, name, here):
    if isinstance(ref, bool) or here == ("partitioning", "pool_singletons"):
        if not isinstance(val, bool):
            raise ConfigError(f"field '{name}' must be a boolean")
        return val
    if isinstance(ref, str):
        if not isinstance(val, str):
            raise ConfigError(f"field '{name}' must be a string")
        return val
    if isinstance(ref, list) or here == ("partitioning", "thresholds_m"):
        if not isinstance(val, list) or not all(_is_number(v) for v in val):
            raise ConfigError(f"field '{name}' must be a list of numbers")
        if isinstance(ref, list) and len(val) != len(ref) and name not in (
                "partitioning.threshold_factors",):
            raise ConfigError(f"field '{name}' must have {len(ref)} entries")
        return [float(v) for v in val]
    if isinstance(ref, int) or here == ("duration_steps",):
        if not (isinstance(val, int) and not isinstance(val, bool)):
            raise ConfigError(f"field '{name}' must be an integer")
        return val
    if not _is_number(val):
        raise ConfigError(f"field '{name}' must be a number")
    return float(val)


def _is_number(v) -> bool:
    return isinstance(v, (int, float)) and not isinstance(v, bool) and math.isfinite(v)


def load_config(path: str | os.PathLike | None) -> dict:
    """Read a JSON configuration and fill in defaults.

    Raises
    ------
    ConfigError
        On syntax errors (with line and column), unknown fields or wrong types.
    """
    if path is None:
        return copy.deepcopy(DEFAULTS)
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from exc
    try:
        user = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: line {exc.lineno}, column {exc.colno}: {exc.msg}") from exc
    if not isinstance(user, dict):
        raise ConfigError(f"{path}: top level must be an object")
    cfg = _merge(DEFAULTS, user)
    _validate(cfg)
    return cfg


def _validate(cfg: dict) -> None:
    mdl = cfg["model"]
    for key in ("detection_probability", "survival_probability"):
        if not 0.0 <= mdl[key] <= 1.0:
            raise ConfigError(f"field 'model.{key}' must lie in [0, 1]")
    if cfg["tcphd"]["pgf"] not in ("closed-form", "exact"):
        raise ConfigError("field 'tcphd.pgf' must be 'closed-form' or 'exact'")
    th = cfg["partitioning"]["thresholds_m"]
    if th is not None and (not th or any(b <= a for a, b in zip(th, th[1:])) or th[0] <= 0):
        raise ConfigError("field 'partitioning.thresholds_m' must be positive and strictly increasing")
    if cfg["duration_steps"] is not None and cfg["duration_steps"] < 1:
        raise ConfigError("field 'duration_steps' must be at least 1")
    scenario_from_config(cfg)


def scenario_from_config(cfg: dict) -> ScenarioConfig:
    sc = cfg["scenario"]
    if isinstance(sc, str):
        if sc != "scenario1":
            raise ConfigError(f"field 'scenario': unknown preset '{sc}'")
        out = scenario1()
        if cfg["duration_steps"] is not None:
            out = ScenarioConfig(cfg["duration_steps"], out.region,
                                 tuple(_clip_target(t, cfg["duration_steps"]) for t in out.targets),
                                 out.Ts, out.seed, out.name)
        return out
    try:
        targets = []
        for n, t in enumerate(sc["targets"]):
            st, sh = t["initial_state"], t["shape"]
            motion = tuple((int(mv["from_step"]), (float(mv["vx_mps"]), float(mv["vy_mps"])))
                           for mv in t.get("motion", []))
            targets.append(TargetScript(
                int(t["birth_step"]), int(t["death_step"]),
                (float(st["x_m"]), float(st["y_m"]), float(st["vx_mps"]), float(st["vy_mps"])),
                (float(sh["theta_rad"]), float(sh["l1_m"]), float(sh["l2_m"])),
                motion, bool(t.get("heading_aligned", True))))
        out = ScenarioConfig(int(sc["duration_steps"]), tuple(cfg["model"]["region_m"]),
                             tuple(targets), cfg["model"]["sampling_interval_s"], 0, "custom")
        out.validate()
    except KeyError as exc:
        raise ConfigError(f"field 'scenario': missing key {exc.args[0]!r}") from exc
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"field 'scenario': {exc}") from exc
    return out


def _clip_target(t: TargetScript, duration: int) -> TargetScript:
    return TargetScript(t.birth, min(t.death, duration), t.initial, t.shape, t.motion,
                        t.heading_aligned)


@dataclass
class RunArtifacts:
    estimates: Path
    truth: Path
    metrics: Path
    runtime_s: float


# -- pipeline ---------------------------------------------------------------

def simulate_run(cfg: dict, seed: int, run: int = 0):
    """Truth, measurement scans and the model (with seeded births) for one run."""
    sc = scenario_from_config(cfg)
    truth = generate_ground_truth(sc)
    mdl, b = cfg["model"], cfg["birth"]
    birth = scenario1_birth(truth, seed, run, weight=b["weight"],
                            shape=(b["shape"]["theta_rad"], b["shape"]["l1_m"], b["shape"]["l2_m"]),
                            cov_r=b["kinematic_cov_diag_m2_m2ps2"],
                            cov_s=b["shape_cov_diag_rad2_m2"],
                            offset_std=b["position_offset_std_m"])
    try:
        m = build_model(Ts=mdl["sampling_interval_s"], q_r=mdl["kinematic_noise_std_mps2"],
                        q_theta=mdl["orientation_noise_std_rad"], q_l=mdl["axis_noise_std_m"],
                        q_e=mdl["measurement_noise_std_m"], pD=mdl["detection_probability"],
                        pS=mdl["survival_probability"], gamma=mdl["measurement_rate_per_scan"],
                        lambdaC=mdl["clutter_rate_per_scan"], region=mdl["region_m"],
                        birth=birth, qh_scale=mdl["multiplicative_noise_var"],
                        Nmax=mdl["max_cardinality"], l_min=mdl["min_axis_m"])
    except ValueError as exc:
        raise ConfigError(f"field 'model': {exc}") from exc
    scans = generate_measurements(truth, m, seed, sc.duration, run=run,
                                  uniform_extent=cfg["uniform_extent"])
    return truth, scans, m


def track_run(cfg: dict, filter: str, seed: int, run: int = 0) -> dict:
    """Simulate and filter one run; returns truth, scans, the filter run and metrics."""
    truth, scans, m = simulate_run(cfg, seed, run)
    part, red = cfg["partitioning"], cfg["reduction"]
    th = part["thresholds_m"] or default_thresholds(m, part["threshold_factors"])
    fr = run_filter(scans, m, filter,
                    reduction=ReductionConfig(red["prune_threshold"], red["kinematic_merge_threshold"],
                                              red["shape_merge_threshold"], red["max_components"]),
                    thresholds=th, pgf=cfg["tcphd"]["pgf"], pool_singletons=part["pool_singletons"])
    metrics = evaluate(truth, _histories(fr), _current(fr), cfg["metric"], len(scans))
    metrics["runtime_s"] = fr.runtime_s
    return {"truth": truth, "scans": scans, "run": fr, "metrics": metrics}


def _histories(fr) -> dict[int, list[tuple[int, Trajectory]]]:
    return {s.step: [(c.track_id, Trajectory(c.start_time, c.means)) for c in s.estimates]
            for s in fr.steps}


def _current(fr) -> dict[int, np.ndarray]:
    return {s.step: np.array([c.last.mean for c in s.estimates]).reshape(-1, 7) for s in fr.steps}


def evaluate(truth: Sequence[Trajectory], histories: dict, current: dict, metric: dict,
             duration: int) -> dict:
    """Metrics report: per-step GWD per target and the time-averaged TM decomposition."""
    steps = list(range(1, duration + 1))
    est = {k: [t for _, t in histories.get(k, [])] for k in steps}
    tm = online_trajectory_metric(truth, est, metric["cutoff_m"], metric["order"],
                                  metric["switch_cost"])
    g = per_step_gwd(truth, current, steps)
    return {"per_step_gwd": [[None if np.isnan(v) else float(v) for v in row] for row in g],
            "tm": tm.as_dict(),
            "tm_per_step": [[float(v) for v in row] for row in tm.per_step],
            "cardinality": [len(histories.get(k, [])) for k in steps]}


# -- files ------------------------------------------------------------------

def _fmt(v) -> str:
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return format(float(v), ".12g")


def _write_csv(path: Path, header: Sequence[str], rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([_fmt(v) for v in r])


def write_truth(path: Path, truth: Sequence[Trajectory]) -> None:
    _write_csv(path, TRUTH_COLUMNS,
               ([i, t.start + n, *x] for i, t in enumerate(truth) for n, x in enumerate(t.states)))


def write_measurements(path: Path, scans: Sequence[np.ndarray]) -> None:
    _write_csv(path, ("step", "x", "y"), ([k, *z] for k, s in enumerate(scans, 1) for z in s))


def write_estimates(path: Path, fr, run: int = 0) -> None:
    _write_csv(path, EST_COLUMNS,
               ([run, s.step, c.track_id, c.start_time, *c.last.mean, c.weight]
                for s in fr.steps for c in s.estimates))


def write_trajectories(path: Path, fr, run: int = 0) -> None:
    def rows():
        for s in fr.steps:
            for c in s.estimates:
                for n, x in enumerate(c.means):
                    yield [run, s.step, c.track_id, c.start_time, c.start_time + n, *x]
    _write_csv(path, TRAJ_COLUMNS, rows())


def read_truth(path: Path) -> list[Trajectory]:
    rows = _read_csv(path, TRUTH_COLUMNS)
    out = []
    for tid in sorted({int(r["target"]) for r in rows}):
        rs = sorted((r for r in rows if int(r["target"]) == tid), key=lambda r: int(r["step"]))
        out.append(Trajectory(int(rs[0]["step"]),
                              [[float(r[c]) for c in TRUTH_COLUMNS[2:]] for r in rs]))
    return out


def read_trajectories(path: Path):
    rows = _read_csv(path, TRAJ_COLUMNS)
    hist: dict[int, dict[int, list]] = {}
    for r in rows:
        k, tid = int(r["step"]), int(r["traj_id"])
        hist.setdefault(k, {}).setdefault(tid, []).append(
            (int(r["hist_step"]), [float(r[c]) for c in TRAJ_COLUMNS[5:]]))
    histories, current = {}, {}
    for k, by_id in hist.items():
        trajs = []
        for tid in sorted(by_id):
            seq = sorted(by_id[tid])
            trajs.append((tid, Trajectory(seq[0][0], [x for _, x in seq])))
        histories[k] = trajs
        current[k] = np.array([t.states[-1] for _, t in trajs]).reshape(-1, 7)
    return histories, current


def _read_csv(path: Path, columns: Sequence[str]) -> list[dict]:
    try:
        with open(path, newline="") as fh:
            rd = csv.DictReader(fh)
            missing = set(columns) - set(rd.fieldnames or ())
            if missing:
                raise ConfigError(f"{path}: missing columns {sorted(missing)}")
            rows = list(rd)
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc.strerror}") from exc
    for n, r in enumerate(rows, 2):
        for c in columns:
            try:
                float(r[c])
            except (TypeError, ValueError):
                raise ConfigError(f"{path}: line {n}, field '{c}': not a number") from None
    return rows


def write_json(path: Path, obj) -> None:
    path.write_text(json.dumps(obj, indent=1, sort_keys=True, allow_nan=False) + "\n")


# -- plots ------------------------------------------------------------------

def emit_plots(out: Path, truth: Sequence[Trajectory], histories: dict, metrics: dict) -> list[Path]:
    """Trajectory overlay, GWD-vs-time and TM-decomposition SVGs."""
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt
    from matplotlib.patches import Ellipse

    matplotlib.rcParams["svg.hashsalt"] = "exttraj"
    meta = {"Date": None}
    paths = []

    fig, ax = plt.subplots(figsize=(6, 6))
    for i, t in enumerate(truth):
        ax.plot(t.states[:, 0], t.states[:, 1], "k-", lw=1, label="truth" if i == 0 else None)
        for x in t.states[::4]:
            ax.add_patch(Ellipse(x[:2], 2 * x[5], 2 * x[6], angle=np.degrees(x[4]),
                                 fill=False, ec="0.6", lw=0.5))
    if histories:
        last = histories[max(histories)]
        for n, (tid, tr) in enumerate(last):
            ax.plot(tr.states[:, 0], tr.states[:, 1], "--", lw=1, label=f"track {tid}")
            for x in tr.states[::4]:
                ax.add_patch(Ellipse(x[:2], 2 * x[5], 2 * x[6], angle=np.degrees(x[4]),
                                     fill=False, ec="C%d" % (n % 10), lw=0.5))
    ax.set_xlabel("x [m]")
    ax.set_ylabel("y [m]")
    ax.set_aspect("equal")
    ax.legend(fontsize=7, loc="best")
    paths.append(out / "trajectories.svg")
    fig.savefig(paths[-1], format="svg", metadata=meta)
    plt.close(fig)

    g = np.array([[np.nan if v is None else v for v in row] for row in metrics["per_step_gwd"]],
                 dtype=float).reshape(len(metrics["per_step_gwd"]), -1)
    fig, ax = plt.subplots(figsize=(6, 3.5))
    steps = np.arange(1, len(g) + 1)
    for i in range(g.shape[1]):
        ax.plot(steps, g[:, i], lw=1, label=f"target {i}")
    ax.set_xlabel("step")
    ax.set_ylabel("GWD [m$^2$]")
    ax.legend(fontsize=7)
    paths.append(out / "gwd.svg")
    fig.savefig(paths[-1], format="svg", metadata=meta)
    plt.close(fig)

    tm = np.asarray(metrics.get("tm_per_step", []), dtype=float).reshape(-1, 4)
    fig, ax = plt.subplots(figsize=(6, 3.5))
    if len(tm):
        ax.stackplot(np.arange(1, len(tm) + 1), tm.T,
                     labels=("location", "missed", "false", "switch"))
        ax.legend(fontsize=7, loc="upper left")
    ax.set_xlabel("step")
    ax.set_ylabel("TM")
    paths.append(out / "tm.svg")
    fig.savefig(paths[-1], format="svg", metadata=meta)
    plt.close(fig)
    return paths


# -- Monte Carlo ------------------------------------------------------------

def _mc_worker(args):
    cfg, filter, seed, run = args
    try:
        res = track_run(cfg, filter, seed, run)
    except TrackingError as exc:
        return run, None, f"{type(exc).__name__}: {exc}"
    return run, res["metrics"], None


def monte_carlo(cfg: dict, filter: str, runs: int, seed: int,
                workers: int | None = None) -> dict:
    """Average metrics over ``runs`` independent runs; failed runs are excluded and listed."""
    if runs < 1:
        raise ConfigError("--runs must be at least 1")
    jobs = [(cfg, filter, seed, r) for r in range(runs)]
    if workers == 1 or runs == 1:
        results = [_mc_worker(j) for j in jobs]
    else:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            results = list(ex.map(_mc_worker, jobs))
    results.sort(key=lambda r: r[0])
    ok = [m for _, m, err in results if err is None]
    failures = [{"run": r, "error": err} for r, _, err in results if err is not None]
    report: dict[str, Any] = {"filter": filter, "runs": runs, "seed": seed,
                              "completed": len(ok), "failures": failures}
    if not ok:
        return report
    g = np.array([[[np.nan if v is None else v for v in row] for row in m["per_step_gwd"]]
                  for m in ok], dtype=float)
    with warnings.catch_warnings():
        # all-NaN columns (target never matched at a step) stay NaN
        warnings.simplefilter("ignore", RuntimeWarning)
        gmean = np.nanmean(g, axis=0)
    report["per_step_gwd"] = [[None if np.isnan(v) else float(v) for v in row] for row in gmean]
    report["tm"] = {k: float(np.mean([m["tm"][k] for m in ok])) for k in ok[0]["tm"]}
    report["tm_per_run"] = [m["tm"]["total"] for m in ok]
    report["cardinality_mean"] = np.mean([m["cardinality"] for m in ok], axis=0).tolist()
    report["runtime_s"] = float(np.mean([m["runtime_s"] for m in ok]))
    return report


# -- entry point ------------------------------------------------------------

def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="exttraj", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, filt=True):
        sp.add_argument("--config", help="JSON configuration (defaults: Scenario 1)")
        sp.add_argument("--seed", type=int, default=0, help="master seed")
        sp.add_argument("--out", required=True, help="output directory")
        sp.add_argument("--uniform-extent", action="store_true",
                        help="draw target returns uniformly inside the ellipse")
        if filt:
            sp.add_argument("--filter", default="tphd-e", help="tphd-e or tcphd-e")
            sp.add_argument("--partition-thresholds",
                            help="comma-separated distance thresholds in meters")

    common(sub.add_parser("simulate", help="write truth and measurements"), filt=False)
    sp = sub.add_parser("track", help="simulate, filter and evaluate one run")
    common(sp)
    sp.add_argument("--plot", action="store_true", help="write SVG plots")
    sp = sub.add_parser("evaluate", help="recompute metrics from files in --out")
    sp.add_argument("--out", required=True)
    sp.add_argument("--config")
    sp.add_argument("--plot", action="store_true")
    sp = sub.add_parser("mc", help="Monte Carlo runs, aggregated metrics")
    common(sp)
    sp.add_argument("--runs", type=int, default=20)
    sp.add_argument("--workers", type=int, default=None, help="worker processes")
    return p


def _thresholds(text: str) -> list[float]:
    try:
        vals = [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise ConfigError(f"--partition-thresholds: cannot parse {text!r}") from None
    if not vals or vals[0] <= 0 or any(b <= a for a, b in zip(vals, vals[1:])):
        raise ConfigError("--partition-thresholds must be positive and strictly increasing")
    return vals


def _resolve(args) -> dict:
    cfg = load_config(args.config)
    if getattr(args, "uniform_extent", False):
        cfg["uniform_extent"] = True
    if getattr(args, "partition_thresholds", None):
        cfg["partitioning"]["thresholds_m"] = _thresholds(args.partition_thresholds)
    if hasattr(args, "filter") and args.filter not in FILTERS:
        raise ConfigError(f"--filter: unknown filter {args.filter!r}; expected one of {FILTERS}")
    return cfg


def run_tracking(cfg: dict, filter: str, seed: int, out: Path, plot: bool = False) -> RunArtifacts:
    out.mkdir(parents=True, exist_ok=True)
    res = track_run(cfg, filter, seed)
    fr = res["run"]
    write_truth(out / "truth.csv", res["truth"])
    write_measurements(out / "measurements.csv", res["scans"])
    write_estimates(out / "estimates.csv", fr)
    write_trajectories(out / "trajectories.csv", fr)
    write_json(out / "metrics.json", res["metrics"])
    if plot:
        emit_plots(out, res["truth"], _histories(fr), res["metrics"])
    return RunArtifacts(out / "estimates.csv", out / "truth.csv", out / "metrics.json",
                        fr.runtime_s)


def main(argv: Sequence[str] | None = None) -> int:
    parser = _parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        out = Path(args.out)
        if args.command == "simulate":
            cfg = _resolve(args)
            out.mkdir(parents=True, exist_ok=True)
            truth, scans, _ = simulate_run(cfg, args.seed)
            write_json(out / "scenario.json", cfg)
            write_truth(out / "truth.csv", truth)
            write_measurements(out / "measurements.csv", scans)
        elif args.command == "track":
            cfg = _resolve(args)
            art = run_tracking(cfg, args.filter, args.seed, out, args.plot)
            print(f"wrote {art.estimates} ({art.runtime_s:.2f} s)")
        elif args.command == "evaluate":
            cfg = load_config(args.config)
            truth = read_truth(out / "truth.csv")
            histories, current = read_trajectories(out / "trajectories.csv")
            duration = max(max((t.end for t in truth), default=0), max(histories, default=0))
            metrics = evaluate(truth, histories, current, cfg["metric"], duration)
            old = out / "metrics.json"
            if old.exists():
                try:
                    metrics["runtime_s"] = json.loads(old.read_text()).get("runtime_s")
                except json.JSONDecodeError:
                    pass
            write_json(out / "metrics.json", metrics)
            if args.plot:
                emit_plots(out, truth, histories, metrics)
        else:
            cfg = _resolve(args)
            out.mkdir(parents=True, exist_ok=True)
            t0 = time.perf_counter()
            rep = monte_carlo(cfg, args.filter, args.runs, args.seed, args.workers)
            rep["wall_clock_s"] = time.perf_counter() - t0
            write_json(out / f"mc_{args.filter}.json", rep)
            if "tm" in rep:
                print(f"{args.filter}: mean TM {rep['tm']['total']:.3f} over "
                      f"{rep['completed']}/{args.runs} runs")
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except NumericalFailure as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3
    return 0


if __name__ == "__main__":
    sys.exit(main())
