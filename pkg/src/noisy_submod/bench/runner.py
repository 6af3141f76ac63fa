"""Trial orchestration, CSV records and sweep aggregation."""

from __future__ import annotations

import csv
import io
import logging
import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import astuple, dataclass, fields
from pathlib import Path
from typing import Optional

import numpy as np

from ..algorithms import (InstanceTooLarge, brute_force_opt, ctg, eps_ap, exp_greedy, greedy_exact,
                          threshold_greedy_exact)
from ..core import AlgoConfig, GroundSet, derive_stream, stable_hash
from ..objectives import InfluenceObjective, Objective, load_graph, load_tagged_dataset, make_preset
from ..oracle import NoiseModel, NoisyMarginalOracle
from .spec import ConfigError, ExperimentSpec

log = logging.getLogger(__name__)

SCHEMA_VERSION = 1
SCHEMA_LINE = f"# noisy-submod records v{SCHEMA_VERSION}"


@dataclass
class ExperimentRecord:
    algorithm: str
    kappa: int
    epsilon: float
    delta: float
    alpha: float
    trial: int
    seed: int
    f_value: float
    f_opt_or_greedy_ref: float
    total_samples: int
    marginal_evaluations: int
    avg_samples: float
    wall_ms: float
    phase1_samples: int = 0
    ref_kind: str = ""
    status: str = "ok"


COLUMNS = [f.name for f in fields(ExperimentRecord)]
_TYPES = {f.name: f.type for f in fields(ExperimentRecord)}
_CASTS = {"int": int, "float": float, "str": str}


def build_objective(spec: ExperimentSpec) -> Objective:
    if spec.dataset:
        path = spec.resolve(spec.dataset)
        if spec.objective == "coverage":
            return load_tagged_dataset(path)
        return load_graph(path, rr_set_count=spec.rr_set_count, rr_seed=spec.gen_seed)
    if spec.objective == "graph":
        return make_preset(spec.preset, seed=spec.gen_seed, rr_set_count=spec.rr_set_count)
    return make_preset(spec.preset, seed=spec.gen_seed)


def noise_model(spec: ExperimentSpec) -> NoiseModel:
    if spec.noise == "none" or (spec.noise == "gaussian" and spec.sigma == 0):
        return NoiseModel.none()
    if spec.noise == "realization":
        return NoiseModel("realization", 0.0)
    return NoiseModel.gaussian(spec.sigma)


def trial_seed(kappa: int, epsilon: float, trial: int) -> int:
    """Stream id shared by all algorithms at one (point, trial), so runs are paired."""
    return stable_hash(kappa, float(epsilon), trial)


def reference_value(obj: Objective, kappa: int, limit: int) -> tuple:
    try:
        return float(brute_force_opt(obj, kappa, limit=limit)[1]), "opt"
    except InstanceTooLarge:
        return float(obj.value(greedy_exact(obj, kappa).accepted)), "greedy"


def run_algorithm(name: str, obj: Objective, cfg: AlgoConfig, noise: NoiseModel, stream_seed: int,
                  base_seed: int):
    ground = GroundSet(obj.n)
    if name == "tg_exact":
        return threshold_greedy_exact(obj, cfg), 0
    if name == "greedy_exact":
        return greedy_exact(obj, cfg.kappa), 0
    oracle = NoisyMarginalOracle(obj, noise, derive_stream(base_seed, stream_seed))
    if name == "ctg":
        trace = ctg(oracle, ground, cfg)
    elif name == "eps_ap":
        trace = eps_ap(oracle, ground, cfg)
    elif name == "exp_greedy":
        trace = exp_greedy(oracle, ground, cfg, k_prime=1)
    elif name == "exp_greedy_k":
        trace = exp_greedy(oracle, ground, cfg, k_prime=cfg.kappa)
    else:
        raise ConfigError(f"unknown algorithm {name!r}")
    return trace, oracle.count


_WORKER: dict = {}


def _init_worker(obj, noise):
    _WORKER["obj"] = obj
    _WORKER["noise"] = noise


def _run_task(task: tuple) -> ExperimentRecord:
    name, kappa, epsilon, delta, alpha, range_r, trial, seed, base_seed, ref, ref_kind = task
    obj, noise = _WORKER["obj"], _WORKER["noise"]
    cfg = AlgoConfig(kappa=kappa, epsilon=epsilon, delta=delta, alpha=alpha, range_r=range_r,
                     seed=base_seed)
    start = time.perf_counter()
    try:
        trace, counted = run_algorithm(name, obj, cfg, noise, seed, base_seed)
        if counted and counted != trace.total_samples:
            raise AssertionError(f"oracle count {counted} != trace total {trace.total_samples}")
        f_val = float(obj.value(trace.accepted))
        status = "degenerate" if trace.degenerate else "ok"
        rec = ExperimentRecord(name, kappa, epsilon, delta, alpha, trial, seed, f_val, ref,
                               trace.total_samples, trace.marginal_evaluations, trace.avg_samples,
                               0.0, trace.phase1_samples, ref_kind, status)
    except Exception as exc:  # a failed trial becomes a row; the sweep carries on
        log.warning("trial %s/%s/%s/%s failed: %s", name, kappa, epsilon, trial, exc)
        rec = ExperimentRecord(name, kappa, epsilon, delta, alpha, trial, seed, math.nan, ref,
                               0, 0, math.nan, 0.0, 0, ref_kind,
                               f"error:{type(exc).__name__}")
    rec.wall_ms = round((time.perf_counter() - start) * 1000.0, 3)
    return rec


def thread_count() -> int:
    env = os.environ.get("NOISY_SUBMOD_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            raise ConfigError(f"NOISY_SUBMOD_THREADS={env!r} is not an integer") from None
    return max(1, len(os.sched_getaffinity(0)) if hasattr(os, "sched_getaffinity") else os.cpu_count() or 1)


def run_experiment(spec: ExperimentSpec, write: bool = True, objective: Optional[Objective] = None) -> list:
    """Run every (algorithm, kappa, epsilon, trial) and optionally write the CSV."""
    obj = objective if objective is not None else build_objective(spec)
    if isinstance(obj, InfluenceObjective):
        obj.rr_sets  # build once here so workers inherit it
    noise = noise_model(spec)
    refs = {k: reference_value(obj, k, spec.opt_limit) for k in spec.kappas}
    tasks = []
    for name in spec.algorithms:
        if name.startswith("exp_greedy") and obj.n > spec.max_exp_n:
            log.warning("skipping %s: n=%d exceeds max_exp_n=%d", name, obj.n, spec.max_exp_n)
            continue
        deterministic = name in ("tg_exact", "greedy_exact")
        for kappa in spec.kappas:
            for eps in spec.epsilons:
                for trial in range(1 if deterministic else spec.trials):
                    seed = trial_seed(kappa, eps, trial)
                    tasks.append((name, kappa, eps, spec.delta, spec.alpha, spec.range_r, trial, seed,
                                  spec.seed, *refs[kappa]))
    workers = min(thread_count(), len(tasks)) if tasks else 1
    if workers <= 1:
        _init_worker(obj, noise)
        records = [_run_task(t) for t in tasks]
    else:
        with ProcessPoolExecutor(workers, initializer=_init_worker, initargs=(obj, noise)) as pool:
            records = list(pool.map(_run_task, tasks))
    order = {a: i for i, a in enumerate(spec.algorithms)}
    records.sort(key=lambda r: (order[r.algorithm], r.kappa, r.epsilon, r.trial))
    if write:
        write_records(records, spec.output_path)
    return records


# --- CSV --------------------------------------------------------------------

def _fmt(v) -> str:
    if isinstance(v, float):
        return repr(v)
    return str(v)


def records_to_csv(records: list, drop: tuple = ()) -> str:
    cols = [c for c in COLUMNS if c not in drop]
    buf = io.StringIO()
    buf.write(SCHEMA_LINE + "\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(cols)
    for r in records:
        row = dict(zip(COLUMNS, astuple(r)))
        w.writerow([_fmt(row[c]) for c in cols])
    return buf.getvalue()


def _atomic_write(path, text: str) -> None:
    path = Path(path)
    if path.parent and not path.parent.exists():
        path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_name(path.name + f".tmp{os.getpid()}")
    tmp.write_text(text, encoding="utf-8")
    os.replace(tmp, path)


def write_records(records: list, path) -> None:
    _atomic_write(path, records_to_csv(records))


def read_records(path) -> list:
    with open(path, encoding="utf-8") as fh:
        lines = [ln for ln in fh if not ln.startswith("#")]
    out = []
    for row in csv.DictReader(lines):
        kw = {c: _CASTS[_TYPES[c]](row[c]) for c in COLUMNS if c in row}
        out.append(ExperimentRecord(**kw))
    return out


# --- aggregation ------------------------------------------------------------

SWEEP_COLUMNS = ["algorithm", "axis", "value", "kappa", "epsilon", "trials", "failed",
                 "total_samples_median", "total_samples_mean", "total_samples_q1", "total_samples_q3",
                 "avg_samples_median", "avg_samples_mean", "f_value_median", "f_value_mean",
                 "phase1_samples_median"]


def aggregate(records: list, axis: str) -> list:
    """Per (algorithm, kappa, epsilon) medians, means and quartiles; pure in ``records``."""
    if axis not in ("epsilon", "kappa"):
        raise ConfigError(f"axis must be epsilon or kappa, got {axis!r}")
    groups: dict = {}
    algo_order: dict = {}
    for r in records:
        algo_order.setdefault(r.algorithm, len(algo_order))
        groups.setdefault((r.algorithm, r.kappa, r.epsilon), []).append(r)
    rows = []
    for (algo, kappa, eps), recs in sorted(groups.items(), key=lambda kv: (algo_order[kv[0][0]], kv[0][1], kv[0][2])):
        ok = [r for r in recs if r.status in ("ok", "degenerate")]
        tot = np.array([r.total_samples for r in ok], dtype=float)
        avg = np.array([r.avg_samples for r in ok], dtype=float)
        fv = np.array([r.f_value for r in ok], dtype=float)
        p1 = np.array([r.phase1_samples for r in ok], dtype=float)

        def stat(a, fn):
            return float(fn(a)) if a.size else math.nan

        rows.append({
            "algorithm": algo, "axis": axis, "value": kappa if axis == "kappa" else eps,
            "kappa": kappa, "epsilon": eps, "trials": len(recs), "failed": len(recs) - len(ok),
            "total_samples_median": stat(tot, np.median), "total_samples_mean": stat(tot, np.mean),
            "total_samples_q1": stat(tot, lambda a: np.percentile(a, 25)),
            "total_samples_q3": stat(tot, lambda a: np.percentile(a, 75)),
            "avg_samples_median": stat(avg, np.median), "avg_samples_mean": stat(avg, np.mean),
            "f_value_median": stat(fv, np.median), "f_value_mean": stat(fv, np.mean),
            "phase1_samples_median": stat(p1, np.median),
        })
    return rows


def sweep_table_csv(rows: list) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(SWEEP_COLUMNS)
    for row in rows:
        w.writerow([_fmt(row[c]) for c in SWEEP_COLUMNS])
    return buf.getvalue()


def sweep_path(spec: ExperimentSpec, axis: str) -> str:
    out = Path(spec.output_path)
    return str(out.with_name(f"{out.stem}.sweep_{axis}.csv"))


def sweep(spec: ExperimentSpec, axis: str, objective: Optional[Objective] = None) -> list:
    """Run the experiment and write a tidy per-point summary along ``axis``."""
    if axis not in ("epsilon", "kappa"):
        raise ConfigError(f"axis must be epsilon or kappa, got {axis!r}")
    grid = spec.epsilons if axis == "epsilon" else spec.kappas
    if len(grid) < 2:
        raise ConfigError(f"a sweep over {axis} needs at least 2 grid points, got {list(grid)}")
    records = run_experiment(spec, objective=objective)
    rows = aggregate(records, axis)
    _atomic_write(sweep_path(spec, axis), sweep_table_csv(rows))
    return rows
