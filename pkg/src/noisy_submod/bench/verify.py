"""Ground-truth checks on algorithm traces and clean-event frequency estimates."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .. import bounds
from ..algorithms import (InstanceTooLarge, brute_force_opt, ctg, estimate_max_singleton, radius_table)
from ..core import AlgoConfig, GroundSet, SolutionTrace, derive_stream
from ..objectives import Objective
from ..oracle import GainSampler, NoisyMarginalOracle
from .runner import build_objective, noise_model, trial_seed
from .spec import ExperimentSpec


def decision_gains(trace: SolutionTrace, objective: Objective) -> list:
    """Exact gain behind every recorded decision, rebuilt from the accepted prefix."""
    return [float(objective.marginal(trace.accepted[:rec.set_size], rec.element)) for rec in trace.decisions]


def soundness_violations(trace: SolutionTrace, objective: Objective, epsilon: float) -> list:
    """Decisions where accept had gain < w - eps, or reject had gain > w + eps."""
    bad = []
    for rec, gain in zip(trace.decisions, decision_gains(trace, objective)):
        if rec.accept and gain < rec.threshold - epsilon:
            bad.append((rec, gain))
        elif not rec.accept and gain > rec.threshold + epsilon:
            bad.append((rec, gain))
    return bad


def sample_bound_violations(trace: SolutionTrace, objective: Objective, cfg: AlgoConfig) -> list:
    """Decisions whose sample count exceeds the gap-dependent per-call bound."""
    n = objective.n
    bad = []
    for rec, gain in zip(trace.decisions, decision_gains(trace, objective)):
        phi = bounds.gap_phi(rec.threshold, gain, cfg.epsilon)
        cap = bounds.theorem1_call_bound(phi, n, cfg.delta, cfg.range_r, cfg.kappa, cfg.alpha, cfg.epsilon)
        if rec.samples > cap:
            bad.append((rec, gain, cap))
    return bad


def max_cs_calls(n: int, cfg: AlgoConfig) -> int:
    return n * bounds.rounds_upper(cfg.kappa, cfg.alpha)


def call_count_ok(trace: SolutionTrace, n: int, cfg: AlgoConfig) -> bool:
    return len(trace.decisions) <= max_cs_calls(n, cfg)


def approx_holds(f_s: float, f_opt: float, cfg: AlgoConfig) -> bool:
    return f_s >= (1 - 1 / math.e - cfg.alpha) * f_opt - 2 * cfg.kappa * cfg.epsilon


def all_time_coverage(sampler: GainSampler, radii: np.ndarray) -> bool:
    """True if |mean_t - gain| <= C_t for every t up to ``len(radii)``."""
    x = sampler.take(len(radii))
    means = np.cumsum(x - sampler.gain) / np.arange(1, len(x) + 1)
    return bool(np.all(np.abs(means) <= radii))


def max_singleton_event(oracle: NoisyMarginalOracle, cfg: AlgoConfig, true_max: float) -> bool:
    est, _ = estimate_max_singleton(oracle, cfg)
    return abs(float(est.max()) - true_max) <= cfg.epsilon


def clean_event_frequency(objective: Objective, noise, cfg: AlgoConfig, calls: int, seed: int) -> float:
    """Fraction of random (S, u) contexts whose interval covered the gain at all t <= N2."""
    n = objective.n
    rng = np.random.default_rng(seed)
    oracle = NoisyMarginalOracle(objective, noise, derive_stream(seed, 1))
    radii = radius_table(n, cfg)
    hits = 0
    for i in range(calls):
        size = int(rng.integers(0, min(cfg.kappa, n - 1) + 1))
        perm = rng.permutation(n)
        S, u = perm[:size].tolist(), int(perm[size])
        hits += all_time_coverage(oracle.sampler(S, u, (9, i)), radii)
    return hits / calls


def max_singleton_frequency(objective: Objective, noise, cfg: AlgoConfig, runs: int, seed: int) -> float:
    true_max = float(np.max(objective.singletons()))
    hits = 0
    for i in range(runs):
        oracle = NoisyMarginalOracle(objective, noise, derive_stream(seed, 1000 + i))
        hits += max_singleton_event(oracle, cfg, true_max)
    return hits / runs


@dataclass
class CheckResult:
    name: str
    passed: Optional[bool]
    measured: float
    threshold: float
    detail: str = ""

    def line(self) -> str:
        tag = {True: "PASS", False: "FAIL", None: "SKIP"}[self.passed]
        return f"[{tag}] {self.name}: measured={self.measured:.6g} threshold={self.threshold:.6g} {self.detail}".rstrip()


@dataclass
class VerifyReport:
    checks: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(c.passed is not False for c in self.checks)

    def text(self) -> str:
        return "\n".join(c.line() for c in self.checks)


def verify(spec: ExperimentSpec, objective: Optional[Objective] = None, require_opt: bool = False) -> VerifyReport:
    """Run CTG trials on the first grid point and check every invariant against ground truth.

    With a noiseless oracle the soundness check demands zero violations;
    otherwise failure frequencies are compared against ``delta``.
    """
    obj = objective if objective is not None else build_objective(spec)
    noise = noise_model(spec)
    kappa, eps = spec.kappas[0], spec.epsilons[0]
    cfg = AlgoConfig(kappa=kappa, epsilon=eps, delta=spec.delta, alpha=spec.alpha,
                     range_r=spec.range_r, seed=spec.seed)
    ground = GroundSet(obj.n)
    noiseless = noise.kind == "none"
    try:
        f_opt = float(brute_force_opt(obj, kappa, limit=spec.opt_limit)[1])
    except InstanceTooLarge:
        if require_opt:
            raise
        f_opt = None

    unsound_runs = calls_over = 0
    decisions = over_bound = unsound = 0
    approx_ok = 0
    for trial in range(spec.trials):
        oracle = NoisyMarginalOracle(obj, noise, derive_stream(spec.seed, trial_seed(kappa, eps, trial)))
        trace = ctg(oracle, ground, cfg)
        bad = soundness_violations(trace, obj, eps)
        unsound += len(bad)
        unsound_runs += bool(bad)
        decisions += len(trace.decisions)
        over_bound += len(sample_bound_violations(trace, obj, cfg))
        calls_over += not call_count_ok(trace, obj.n, cfg)
        if f_opt is not None:
            approx_ok += approx_holds(float(obj.value(trace.accepted)), f_opt, cfg)

    report = VerifyReport()
    if noiseless:
        report.checks.append(CheckResult("cs_soundness_noiseless", unsound == 0, unsound, 0,
                                         f"violating decisions out of {decisions}"))
    else:
        rate = unsound_runs / spec.trials
        report.checks.append(CheckResult("cs_soundness_runs", rate <= spec.delta, rate, spec.delta,
                                         "fraction of runs with any unsound decision"))
    rate = over_bound / max(decisions, 1)
    report.checks.append(CheckResult("per_call_sample_bound", rate <= spec.delta, rate, spec.delta,
                                     f"{over_bound}/{decisions} decisions over the gap bound"))
    report.checks.append(CheckResult("cs_call_count", calls_over == 0, calls_over, 0,
                                     f"runs exceeding {max_cs_calls(obj.n, cfg)} calls"))
    if f_opt is None:
        report.checks.append(CheckResult("approx_guarantee", None, math.nan, 1 - spec.delta,
                                         "instance too large for brute force"))
    else:
        rate = approx_ok / spec.trials
        report.checks.append(CheckResult("approx_guarantee", rate >= 1 - spec.delta, rate, 1 - spec.delta,
                                         f"f(OPT)={f_opt:g}"))
    if not noiseless:
        freq = clean_event_frequency(obj, noise, cfg, spec.verify_cs_calls, spec.seed)
        report.checks.append(CheckResult("clean_event_all_time", freq >= 1 - spec.delta / 3, freq,
                                         1 - spec.delta / 3, f"over {spec.verify_cs_calls} calls"))
        freq = max_singleton_frequency(obj, noise, cfg, spec.verify_phase1_runs, spec.seed)
        report.checks.append(CheckResult("clean_event_max_singleton", freq >= 1 - spec.delta / 3, freq,
                                         1 - spec.delta / 3, f"over {spec.verify_phase1_runs} runs"))
    return report
