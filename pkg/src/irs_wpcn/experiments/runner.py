"""Monte-Carlo orchestration and CSV output."""

from __future__ import annotations

import csv
import logging
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace

import numpy as np

from ..ao import Variant, run_ao
from ..channel import sample_channels
from ..errors import IrsWpcnError, ScenarioInfeasible
from ..robust import db_to_linear
from .config import ScenarioConfig

log = logging.getLogger(__name__)

SCHEMA_VERSION = 1
COLUMNS = (
    "sweep_name",
    "sweep_value",
    "variant",
    "trial",
    "seed",
    "objective_joules",
    "iterations",
    "converged",
    "infeasible_stage",
    "large_scale_gain",
    "objective_trace",
)
#: environment variable overriding the configured worker count
WORKERS_ENV = "IRS_WPCN_WORKERS"


def trial_seed(master_seed: int, trial: int) -> int:
    """Seed of one Monte-Carlo trial, shared by every variant and sweep point."""
    ss = np.random.SeedSequence(entropy=int(master_seed), spawn_key=(int(trial),))
    return int(ss.generate_state(1, dtype=np.uint32)[0])


def large_scale_gain(cfg: ScenarioConfig, irs_x: float) -> float:
    """Distance-only gain of the direct plus reflected path to the user-disk
    centre: ``C0 d_htu^-alpha + C0^2 (d_htr^beta d_rtu^o)^-1``."""
    g = cfg.geometry
    hap = np.asarray(g.hap, dtype=float)
    irs = np.asarray(g.irs, dtype=float).copy()
    irs[0] = irs_x
    ctr = np.asarray(g.user_center, dtype=float)
    c = cfg.channel
    d_htu = float(np.linalg.norm(ctr - hap))
    d_htr = float(np.linalg.norm(irs - hap))
    d_rtu = float(np.linalg.norm(ctr - irs))
    return c.pathloss_ref * d_htu ** (-c.alpha) + c.pathloss_ref**2 * d_htr ** (-c.beta) * d_rtu ** (-c.o)


@dataclass(frozen=True)
class Point:
    """One sweep value resolved to concrete channel and system parameters."""

    value: float
    channel: object
    system: object
    irs_x: float | None


def sweep_points(cfg: ScenarioConfig) -> list:
    pts = []
    for v in cfg.sweep.values:
        ch, sysp, irs_x = cfg.channel, cfg.system, None
        name = cfg.sweep.name
        if name in ("convergence", "elements"):
            ch = replace(ch, elements=int(v))
        elif name == "antennas":
            ch = replace(ch, antennas=int(v))
        elif name == "users":
            ch = replace(ch, users=int(v))
        elif name == "sinr":
            sysp = sysp.with_(gamma_th=db_to_linear(float(v)))
        elif name == "epsilon":
            sysp = sysp.with_(eps_scale=float(v))
        elif name == "irs_position":
            irs_x = float(v)
        pts.append(Point(float(v), ch, sysp, irs_x))
    return pts


def _fmt(x) -> str:
    if isinstance(x, bool):
        return "1" if x else "0"
    if isinstance(x, float):
        return "" if math.isnan(x) else repr(x)
    return str(x)


def run_trial(cfg: ScenarioConfig, point: Point, trial: int) -> list:
    """All variants of one trial at one sweep point; returns CSV row dicts."""
    seed = trial_seed(cfg.master_seed, trial)
    geom = cfg.geometry.realise(point.channel.users, seed, point.irs_x)
    chans = sample_channels(point.channel, geom, seed)
    gain = large_scale_gain(cfg, point.irs_x if point.irs_x is not None else cfg.geometry.irs[0]) if cfg.sweep.name == "irs_position" else float("nan")
    rows = []
    for name in cfg.variants:
        v = Variant(name)
        row = dict(
            sweep_name=cfg.sweep.name,
            sweep_value=point.value,
            variant=v.value,
            trial=trial,
            seed=seed,
            objective_joules=float("nan"),
            iterations=0,
            converged=False,
            infeasible_stage="",
            large_scale_gain=gain,
            objective_trace="",
        )
        try:
            state, trace = run_ao(chans, point.system, v, seed)
            row.update(
                objective_joules=float(state.objective),
                iterations=trace.iterations,
                converged=bool(trace.converged),
                objective_trace=";".join(repr(float(x)) for x in trace.objectives),
            )
        except ScenarioInfeasible as exc:
            row["infeasible_stage"] = exc.stage
        except (IrsWpcnError, np.linalg.LinAlgError, ValueError) as exc:
            log.warning("trial %d variant %s failed: %s", trial, v.value, exc)
            row["infeasible_stage"] = f"error:{type(exc).__name__}"
        rows.append(row)
    return rows


def _task(args):
    cfg, point, trial = args
    return run_trial(cfg, point, trial)


def worker_count(cfg: ScenarioConfig) -> int:
    env = os.environ.get(WORKERS_ENV)
    if env:
        try:
            n = int(env)
        except ValueError:
            log.warning("ignoring non-integer %s=%r", WORKERS_ENV, env)
        else:
            if n >= 1:
                return n
    return cfg.workers


def iter_rows(cfg: ScenarioConfig, workers: int | None = None):
    """Yield row lists in (sweep value, trial) order, rows inside ordered by
    the configured variants."""
    tasks = [(cfg, pt, t) for pt in sweep_points(cfg) for t in range(cfg.trials)]
    workers = worker_count(cfg) if workers is None else workers
    if workers <= 1:
        for task in tasks:
            yield _task(task)
        return
    with ProcessPoolExecutor(max_workers=workers) as pool:
        # map preserves submission order whatever the completion order
        yield from pool.map(_task, tasks)


def _sort_key(cfg: ScenarioConfig):
    order = {v: i for i, v in enumerate(cfg.variants)}
    return lambda r: (r["sweep_value"], order[r["variant"]], r["trial"])


def run_experiment(cfg: ScenarioConfig, out_path, workers: int | None = None) -> list:
    """Run every (sweep value, variant, trial) and write the CSV.

    Rows are written in (sweep value, variant, trial) order.  Each sweep
    value is flushed to disk as soon as all its trials are done, so a crash
    keeps the completed part.  Returns all rows.
    """
    n_trials = cfg.trials
    key = _sort_key(cfg)
    all_rows = []
    with open(out_path, "w", newline="", encoding="utf-8") as fh:
        fh.write(f"# irs-wpcn results schema={SCHEMA_VERSION} config={cfg.digest()}\n")
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(COLUMNS)
        fh.flush()
        pending = []
        for rows in iter_rows(cfg, workers):
            pending.extend(rows)
            if len(pending) == n_trials * len(cfg.variants):
                pending.sort(key=key)
                for r in pending:
                    writer.writerow([_fmt(r[c]) for c in COLUMNS])
                fh.flush()
                all_rows.extend(pending)
                pending = []
    return all_rows


def read_results(path) -> list:
    """Parse a results CSV back into row dicts with typed values."""
    rows = []
    with open(path, encoding="utf-8") as fh:
        lines = [ln for ln in fh if not ln.startswith("#")]
    for r in csv.DictReader(lines):
        rows.append(
            dict(
                sweep_name=r["sweep_name"],
                sweep_value=float(r["sweep_value"]),
                variant=r["variant"],
                trial=int(r["trial"]),
                seed=int(r["seed"]),
                objective_joules=float(r["objective_joules"]) if r["objective_joules"] else float("nan"),
                iterations=int(r["iterations"]),
                converged=r["converged"] == "1",
                infeasible_stage=r["infeasible_stage"],
                large_scale_gain=float(r["large_scale_gain"]) if r["large_scale_gain"] else float("nan"),
                objective_trace=[float(x) for x in r["objective_trace"].split(";")] if r["objective_trace"] else [],
            )
        )
    return rows


@dataclass
class Summary:
    """Per (sweep value, variant) statistics of the final energy.

    ``mean``/``stderr``/``count`` use every feasible run; the ``paired_*``
    entries use only trials feasible for every variant at every sweep value,
    so all points average over the same channel draws.
    """

    values: list
    variants: list
    mean: dict
    stderr: dict
    count: dict
    paired_mean: dict
    paired_count: int
    gain: dict


def summarize(rows) -> Summary:
    values = sorted({r["sweep_value"] for r in rows})
    variants = list(dict.fromkeys(r["variant"] for r in rows))
    trials = sorted({r["trial"] for r in rows})
    ok = {(r["sweep_value"], r["variant"], r["trial"]): r["objective_joules"] for r in rows if not r["infeasible_stage"]}
    common = [t for t in trials if all((v, var, t) in ok for v in values for var in variants)]
    mean, stderr, count, paired, gain = {}, {}, {}, {}, {}
    for v in values:
        for var in variants:
            vals = np.array([ok[(v, var, t)] for t in trials if (v, var, t) in ok])
            count[(v, var)] = int(vals.size)
            mean[(v, var)] = float(np.mean(vals)) if vals.size else float("nan")
            stderr[(v, var)] = float(np.std(vals, ddof=1) / np.sqrt(vals.size)) if vals.size > 1 else float("nan")
            pv = np.array([ok[(v, var, t)] for t in common])
            paired[(v, var)] = float(np.mean(pv)) if pv.size else float("nan")
        gains = [r["large_scale_gain"] for r in rows if r["sweep_value"] == v]
        gain[v] = gains[0] if gains else float("nan")
    return Summary(values, variants, mean, stderr, count, paired, len(common), gain)


__all__ = [
    "COLUMNS",
    "SCHEMA_VERSION",
    "Summary",
    "WORKERS_ENV",
    "iter_rows",
    "large_scale_gain",
    "read_results",
    "run_experiment",
    "run_trial",
    "summarize",
    "sweep_points",
    "trial_seed",
    "worker_count",
]
