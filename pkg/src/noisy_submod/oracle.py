"""Noisy marginal-gain access with exact sample accounting."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .core import NoisySubmodError, RngStream, derive_stream
from .objectives import Objective


class ElementOutOfRange(NoisySubmodError, IndexError):
    pass


@dataclass(frozen=True)
class NoiseModel:
    """How a draw deviates from the exact gain.

    ``none`` returns the exact gain, ``gaussian`` adds N(0, sigma^2) (never
    clipped), ``realization`` asks the objective for one random realization
    of the gain (live-edge graphs for influence).
    """

    kind: str = "gaussian"
    sigma: float = 1.0

    def __post_init__(self):
        if self.kind not in ("none", "gaussian", "realization"):
            raise ValueError(f"unknown noise kind {self.kind!r}")
        if self.sigma < 0:
            raise ValueError("sigma must be >= 0")

    @classmethod
    def none(cls) -> "NoiseModel":
        return cls("none", 0.0)

    @classmethod
    def gaussian(cls, sigma: float = 1.0) -> "NoiseModel":
        return cls("gaussian", sigma)


class GainSampler:
    """Draw stream for one fixed ``(S, u)`` pair.

    The exact gain is computed once. ``peek`` generates ahead without
    charging the oracle; ``take`` charges for exactly the draws consumed, so
    adaptive callers can look ahead in blocks and still count honestly.
    """

    prefetch = 64

    def __init__(self, oracle: "NoisyMarginalOracle", S: frozenset, u: int, rng: np.random.Generator):
        self.oracle = oracle
        self.S = S
        self.u = u
        self.rng = rng
        self.gain = float(oracle.objective.marginal(S, u))
        self._buf = np.empty(0)
        self._pos = 0

    def _generate(self, k: int) -> np.ndarray:
        noise = self.oracle.noise
        if noise.kind == "none":
            return np.full(k, self.gain)
        if noise.kind == "gaussian":
            return self.gain + noise.sigma * self.rng.standard_normal(k)
        return self.oracle.objective.sample_marginals(self.S, self.u, k, self.rng)

    def peek(self, k: int) -> np.ndarray:
        have = self._buf.size - self._pos
        if have < k:
            extra = max(k - have, self.prefetch)
            self._buf = np.concatenate([self._buf[self._pos:], self._generate(extra)])
            self._pos = 0
        return self._buf[self._pos:self._pos + k]

    def take(self, k: int) -> np.ndarray:
        out = self.peek(k).copy()
        self._pos += k
        self.oracle.count += k * self.oracle.charge_per_draw
        return out

    def draw(self) -> float:
        if self._pos >= self._buf.size:
            self.peek(1)
        x = self._buf[self._pos]
        self._pos += 1
        self.oracle.count += self.oracle.charge_per_draw
        return float(x)


class NoisyMarginalOracle:
    """The only channel algorithms have to the objective.

    Every draw increments ``count``. Independent draw streams are handed out
    per decision through :meth:`sampler`, keyed by a caller-chosen stream id.
    """

    charge_per_draw = 1

    def __init__(self, objective: Objective, noise: Optional[NoiseModel] = None,
                 rng: Optional[RngStream] = None):
        self.objective = objective
        self.noise = noise if noise is not None else NoiseModel.gaussian(1.0)
        self.rng_stream = rng if rng is not None else derive_stream(0, 0)
        self.count = 0
        self._default = GainSamplerPool(self)

    @property
    def n(self) -> int:
        return self.objective.n

    def _check(self, S, u) -> frozenset:
        if not isinstance(u, (int, np.integer)) or not 0 <= u < self.n:
            raise ElementOutOfRange(f"element {u} outside [0, {self.n})")
        S = frozenset(S)
        for x in S:
            if not 0 <= x < self.n:
                raise ElementOutOfRange(f"set member {x} outside [0, {self.n})")
        return S

    def sampler(self, S, u, stream_id) -> GainSampler:
        """Fresh draw stream for ``(S, u)``; ``stream_id`` is an int or tuple of ints."""
        S = self._check(S, u)
        ids = stream_id if isinstance(stream_id, tuple) else (stream_id,)
        return GainSampler(self, S, int(u), self.rng_stream.child(*ids).generator())

    def sample_marginal(self, S, u) -> float:
        """One noisy draw of the gain of ``u`` given ``S`` from the oracle's own stream."""
        S = self._check(S, u)
        return self._default.get(S, int(u)).draw()

    def estimate_mean(self, S, u, t: int, stream_id: Optional[int] = None) -> float:
        """Mean of ``t`` fresh draws; charges ``t`` samples."""
        if t < 1:
            raise ValueError("t must be >= 1")
        if stream_id is None:
            S = self._check(S, u)
            return float(self._default.get(S, int(u)).take(t).mean())
        return float(self.sampler(S, u, stream_id).take(t).mean())

    def read_and_reset_counter(self) -> int:
        c, self.count = self.count, 0
        return c


class GainSamplerPool:
    """Shared-stream samplers for ad-hoc calls that carry no stream id."""

    def __init__(self, oracle: NoisyMarginalOracle):
        self.oracle = oracle
        self.rng = oracle.rng_stream.generator()
        self._cache: dict = {}

    def get(self, S: frozenset, u: int) -> GainSampler:
        key = (S, u)
        s = self._cache.get(key)
        if s is None:
            s = GainSampler(self.oracle, S, u, self.rng)
            self._cache[key] = s
        return s


class ValueNoiseAdapter(Objective):
    """Marginal draws built from two noisy value draws: D(S+u) - D(S).

    Pair with :class:`ValueNoiseOracle`, which charges two samples per draw.
    """

    def __init__(self, objective: Objective, sigma: float):
        self.objective = objective
        self.sigma = sigma
        self.n = objective.n

    def value(self, X):
        return self.objective.value(X)

    def marginal(self, S, u):
        return self.objective.marginal(S, u)

    def sample_marginals(self, S, u, size, rng):
        S = frozenset(S)
        hi = self.objective.value(S | {u}) + self.sigma * rng.standard_normal(size)
        lo = self.objective.value(S) + self.sigma * rng.standard_normal(size)
        return hi - lo


class ValueNoiseOracle(NoisyMarginalOracle):
    """Oracle over noisy value queries; every marginal draw is charged 2 samples."""

    charge_per_draw = 2

    def __init__(self, objective: Objective, sigma: float, rng: Optional[RngStream] = None):
        super().__init__(ValueNoiseAdapter(objective, sigma), NoiseModel("realization", 0.0), rng)
