"""Threshold-greedy and greedy maximizers under noisy marginal-gain access."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, Optional

import numpy as np

from . import bounds
from .core import (AlgoConfig, DecisionRecord, GroundSet, NoisySubmodError, SolutionTrace,
                   validate_config)
from .objectives import Objective
from .oracle import GainSampler, NoisyMarginalOracle

LOWER_CROSSED = "lower_crossed"
UPPER_CROSSED = "upper_crossed"
BUDGET_EXHAUSTED = "budget_exhausted"

# stream-id prefixes: singleton estimates, threshold decisions, greedy arms, tie-breaking
_PHASE1, _DECISION, _ARM, _CHOICE = 0, 1, 2, 3


class InstanceTooLarge(NoisySubmodError, ValueError):
    pass


class DegenerateEstimate(NoisySubmodError):
    """Raised only on request; by default a flagged empty trace is returned."""


@dataclass(frozen=True)
class CsVerdict:
    accept: bool
    samples_used: int
    final_mean: float
    exit_kind: str


@dataclass(frozen=True)
class ThresholdState:
    w: float
    d: float
    round: int

    def active(self, alpha: float, kappa: int) -> bool:
        return self.w > alpha * self.d / kappa

    def decayed(self, alpha: float) -> "ThresholdState":
        return ThresholdState(self.w * (1 - alpha), self.d, self.round + 1)


@lru_cache(maxsize=32)
def _radius_table(n: int, cfg_key: tuple) -> np.ndarray:
    delta, epsilon, range_r, kappa, alpha = cfg_key
    n2 = bounds.n2_budget(n, delta, epsilon, range_r, kappa, alpha)
    table = bounds.confidence_radius(np.arange(1, n2 + 1), n, delta, range_r, kappa, alpha)
    table.setflags(write=False)
    return table


def radius_table(n: int, cfg: AlgoConfig) -> np.ndarray:
    """C_1..C_{N2} for this config, cached."""
    return _radius_table(n, (cfg.delta, cfg.epsilon, cfg.range_r, cfg.kappa, cfg.alpha))


def _shifted_mean(x: np.ndarray) -> float:
    # exact when every draw is identical (noiseless oracle)
    return float(x[0] + (x - x[0]).mean())


def confident_sample_from(sampler: GainSampler, w: float, epsilon: float, radii: np.ndarray) -> CsVerdict:
    """Adaptive threshold test on one draw stream.

    Samples until the confidence interval clears ``w - epsilon`` from above
    (accept) or ``w + epsilon`` from below (reject); after ``len(radii)``
    samples, accepts iff the mean is at least ``w``. Draws are peeked in
    growing blocks but only the draws up to the exit are charged.
    """
    n2 = len(radii)
    lo_bar, hi_bar = w - epsilon, w + epsilon
    t, shift, acc = 0, 0.0, 0.0
    block = 16
    while t < n2:
        k = min(block, n2 - t)
        x = sampler.peek(k)
        if t == 0:
            shift = float(x[0])
        sums = acc + np.cumsum(x - shift)
        means = shift + sums / np.arange(t + 1, t + k + 1)
        c = radii[t:t + k]
        lower = means - c >= lo_bar
        upper = means + c <= hi_bar
        hit = lower | upper
        if hit.any():
            j = int(np.argmax(hit))
            sampler.take(j + 1)
            if lower[j]:
                return CsVerdict(True, t + j + 1, float(means[j]), LOWER_CROSSED)
            return CsVerdict(False, t + j + 1, float(means[j]), UPPER_CROSSED)
        sampler.take(k)
        acc = float(sums[-1])
        t += k
        block = min(block * 2, 4096)
    mean = shift + acc / n2
    return CsVerdict(bool(mean >= w), n2, float(mean), BUDGET_EXHAUSTED)


def confident_sample(oracle: NoisyMarginalOracle, S, u: int, w: float, cfg: AlgoConfig,
                     stream_id=(_DECISION, 0)) -> CsVerdict:
    radii = radius_table(oracle.n, cfg)
    return confident_sample_from(oracle.sampler(S, u, stream_id), w, cfg.epsilon, radii)


def fixed_sample_from(sampler: GainSampler, w: float, n2: int) -> CsVerdict:
    mean = _shifted_mean(sampler.take(n2))
    return CsVerdict(bool(mean >= w), n2, mean, BUDGET_EXHAUSTED)


def estimate_max_singleton(oracle: NoisyMarginalOracle, cfg: AlgoConfig) -> tuple:
    """Mean of N1 draws of every singleton gain; returns (estimates, samples)."""
    n = oracle.n
    n1 = bounds.n1_budget(n, cfg.delta, cfg.epsilon, cfg.range_r)
    est = np.array([_shifted_mean(oracle.sampler((), s, (_PHASE1, s)).take(n1)) for s in range(n)])
    return est, n * n1


def _threshold_greedy(oracle: NoisyMarginalOracle, ground: GroundSet, cfg: AlgoConfig,
                      decide: Callable[[GainSampler, float], CsVerdict],
                      raise_degenerate: bool = False) -> SolutionTrace:
    validate_config(cfg, ground)
    n, kappa, alpha = ground.n, cfg.kappa, cfg.alpha
    trace = SolutionTrace()
    est, spent = estimate_max_singleton(oracle, cfg)
    trace.phase1_samples = spent
    trace.total_samples = spent
    trace.marginal_evaluations = n
    d = float(est.max())
    trace.max_singleton = d
    if d <= 0:
        trace.degenerate = True
        if raise_degenerate:
            raise DegenerateEstimate(f"max singleton estimate {d} <= 0")
        return trace

    state = ThresholdState(d, d, 0)
    in_s = np.zeros(n, dtype=bool)
    k = 0
    while state.active(alpha, kappa) and len(trace.accepted) < kappa:
        for u in range(n):
            if len(trace.accepted) >= kappa:
                break
            if in_s[u]:
                continue
            S = trace.accepted
            v = decide(oracle.sampler(S, u, (_DECISION, k)), state.w)
            trace.record(DecisionRecord(u, state.round, state.w, v.samples_used, v.accept,
                                        v.final_mean, v.exit_kind, len(S)))
            k += 1
            if v.accept:
                in_s[u] = True
        state = state.decayed(alpha)
        trace.rounds_executed += 1
    return trace


def ctg(oracle: NoisyMarginalOracle, ground: GroundSet, cfg: AlgoConfig, **kw) -> SolutionTrace:
    """Confident threshold greedy: threshold rounds decided by adaptive sampling."""
    radii = radius_table(ground.n, cfg)
    return _threshold_greedy(oracle, ground, cfg,
                             lambda smp, w: confident_sample_from(smp, w, cfg.epsilon, radii), **kw)


def eps_ap(oracle: NoisyMarginalOracle, ground: GroundSet, cfg: AlgoConfig, **kw) -> SolutionTrace:
    """Threshold greedy where every gain is estimated with exactly N2 draws."""
    n2 = bounds.n2_budget(ground.n, cfg.delta, cfg.epsilon, cfg.range_r, cfg.kappa, cfg.alpha)
    return _threshold_greedy(oracle, ground, cfg, lambda smp, w: fixed_sample_from(smp, w, n2), **kw)


def threshold_greedy_exact(objective: Objective, cfg: AlgoConfig) -> SolutionTrace:
    """Threshold greedy with exact gains (no samples are drawn)."""
    ground = GroundSet(objective.n)
    validate_config(cfg, ground)
    trace = SolutionTrace()
    d = float(np.max(objective.singletons()))
    trace.max_singleton = d
    if d <= 0:
        trace.degenerate = True
        return trace
    state = ThresholdState(d, d, 0)
    while state.active(cfg.alpha, cfg.kappa) and len(trace.accepted) < cfg.kappa:
        for u in range(ground.n):
            if len(trace.accepted) >= cfg.kappa:
                break
            if u in trace.accepted:
                continue
            gain = float(objective.marginal(trace.accepted, u))
            trace.record(DecisionRecord(u, state.round, state.w, 0, gain >= state.w, gain,
                                        "exact", len(trace.accepted)))
        state = state.decayed(cfg.alpha)
        trace.rounds_executed += 1
    return trace


def greedy_exact(objective: Objective, kappa: int) -> SolutionTrace:
    """Standard greedy; ties go to the lowest index."""
    trace = SolutionTrace()
    n = objective.n
    for it in range(min(kappa, n)):
        best, best_gain = -1, -math.inf
        for u in range(n):
            if u in trace.accepted:
                continue
            g = objective.marginal(trace.accepted, u)
            if g > best_gain:
                best, best_gain = u, g
        trace.record(DecisionRecord(best, it, float("nan"), 0, True, float(best_gain), "exact",
                                    len(trace.accepted)), evaluations=n - len(trace.accepted))
        trace.rounds_executed += 1
    return trace


def brute_force_opt(objective: Objective, kappa: int, limit: int = 10**6) -> tuple:
    """Exhaustive optimum over all subsets of size at most ``kappa``."""
    n = objective.n
    kappa = min(kappa, n)
    total = sum(math.comb(n, k) for k in range(kappa + 1))
    if total > limit:
        raise InstanceTooLarge(f"{total} subsets exceed the limit {limit}")
    best, best_val = (), objective.value(())
    for k in range(1, kappa + 1):
        for combo in itertools.combinations(range(n), k):
            v = objective.value(combo)
            if v > best_val:
                best, best_val = combo, v
    return frozenset(best), best_val


# --- greedy with best-arm identification -----------------------------------

class _Arms:
    """Running means and anytime radii for the candidates of one greedy step."""

    def __init__(self, samplers: list, union_count: float, cfg: AlgoConfig):
        self.samplers = samplers
        self.union_count = union_count
        self.cfg = cfg
        m = len(samplers)
        self.counts = np.zeros(m, dtype=np.int64)
        self.sums = np.zeros(m)
        self.rad = np.full(m, np.inf)
        self.pulls = 0
        # same formula as bounds.anytime_radius, inlined for the per-pull hot path
        self._r = cfg.range_r
        self._k = 12.0 * union_count / cfg.delta
        for i in range(m):
            self.pull(i)

    def pull(self, i: int) -> None:
        self.sums[i] += self.samplers[i].draw()
        t = int(self.counts[i]) + 1
        self.counts[i] = t
        self.pulls += 1
        self.rad[i] = self._r * math.sqrt(math.log(self._k * t * t) / (2.0 * t))

    @property
    def means(self) -> np.ndarray:
        return self.sums / self.counts


def topx_select(arms: _Arms, k_prime: int, epsilon: float, fast_top1: bool = True) -> np.ndarray:
    """Sample until some TOP-l (l <= k_prime) separates its top set within ``epsilon``.

    Each TOP-l instance takes the empirical top-l set M, perturbs means
    down by the radius inside M and up outside it, and compares against the
    top-l set of the perturbed values. It stops when the perturbed
    advantage of the challenger set is at most ``epsilon``; otherwise it
    pulls the arm with the widest interval among the disagreeing ones.
    All instances share arm statistics and are evaluated together each step.
    Returns the separated set (arm positions) of the smallest stopping l.
    """
    m = len(arms.samplers)
    l_max = min(k_prime, m)
    if l_max == 1 and fast_top1:
        return _top1_select(arms, epsilon)
    sizes = np.arange(1, l_max + 1)[:, None]
    while True:
        means, rad = arms.means, arms.rad
        order = np.argsort(-means, kind="stable")
        rank = np.empty(m, dtype=np.int64)
        rank[order] = np.arange(m)
        inside = rank[None, :] < sizes  # row l-1: membership in the empirical top-l
        perturbed = np.where(inside, means - rad, means + rad)
        p_order = np.argsort(-perturbed, axis=1, kind="stable")
        p_sorted = np.take_along_axis(perturbed, p_order, axis=1)
        idx = np.arange(l_max)
        challenger_sum = np.cumsum(p_sorted, axis=1)[idx, idx]
        top_sum = np.cumsum((means - rad)[order])[:l_max]
        stop = challenger_sum - top_sum <= epsilon
        if stop.any():
            return order[:int(np.argmax(stop)) + 1]
        p_rank = np.argsort(p_order, axis=1)
        disagree = inside ^ (p_rank < sizes)
        picks = np.argmax(np.where(disagree, rad[None, :], -np.inf), axis=1)
        for p in dict.fromkeys(picks.tolist()):
            arms.pull(p)


def _top1_select(arms: _Arms, epsilon: float) -> np.ndarray:
    """TOP-1 specialisation of :func:`topx_select` (same decisions, O(m) per pull)."""
    sums, counts, rad = arms.sums, arms.counts, arms.rad
    while True:
        means = sums / counts
        i = int(np.argmax(means))
        perturbed = means + rad
        perturbed[i] = means[i] - rad[i]
        j = int(np.argmax(perturbed))
        if perturbed[j] - perturbed[i] <= epsilon:
            return np.array([i])
        # widest radius, lower index on ties, as in the general path
        arms.pull(i if rad[i] > rad[j] or (rad[i] == rad[j] and i < j) else j)


def exp_greedy(oracle: NoisyMarginalOracle, ground: GroundSet, cfg: AlgoConfig,
               k_prime: int = 1) -> SolutionTrace:
    """Greedy whose argmax is found by TOPX best-arm identification.

    ``k_prime=1`` always adds the identified best arm; larger ``k_prime``
    adds a uniformly random member of whichever top-l set separates first.
    """
    validate_config(cfg, ground)
    if not 1 <= k_prime <= cfg.kappa:
        raise ValueError(f"k_prime must lie in [1, kappa], got {k_prime}")
    n = ground.n
    choice_rng = oracle.rng_stream.child(_CHOICE).generator()
    trace = SolutionTrace()
    union_count = n * cfg.kappa
    for it in range(cfg.kappa):
        cand = [u for u in range(n) if u not in trace.accepted]
        if not cand:
            break
        S = tuple(trace.accepted)
        samplers = [oracle.sampler(S, u, (_ARM, it, u)) for u in cand]
        arms = _Arms(samplers, union_count, cfg)
        top = topx_select(arms, k_prime, cfg.epsilon)
        pos = int(top[0]) if len(top) == 1 else int(choice_rng.choice(top))
        trace.record(DecisionRecord(cand[pos], it, float("nan"), arms.pulls, True,
                                    float(arms.means[pos]), f"top{len(top)}", len(S)),
                     evaluations=len(cand))
        trace.rounds_executed += 1
    return trace


def exp_greedy_k(oracle: NoisyMarginalOracle, ground: GroundSet, cfg: AlgoConfig) -> SolutionTrace:
    return exp_greedy(oracle, ground, cfg, k_prime=cfg.kappa)


def exp_greedy_iteration_bound(n: int, kappa: int, k_prime: int, range_r: float, epsilon: float,
                               delta: float, gap_max: Optional[float] = None, const: float = 1.0) -> float:
    """Per-iteration sample bound for TOPX, up to the constant ``const``."""
    scale = 1.0 / epsilon**2
    if gap_max is not None and gap_max > 0:
        scale = min(4.0 / gap_max**2, scale)
    return const * n * k_prime * range_r**2 * scale * math.log(range_r**2 * kappa * n * scale / delta)
