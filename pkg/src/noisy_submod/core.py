"""Shared types, config validation and seeded random streams."""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

MASK64 = (1 << 64) - 1


class NoisySubmodError(Exception):
    """Base class for every error raised by this package."""


class InvalidParameter(NoisySubmodError, ValueError):
    def __init__(self, name: str, value, constraint: str):
        self.name = name
        self.value = value
        self.constraint = constraint
        super().__init__(f"{name}={value!r} violates {constraint}")


class KappaExceedsUniverse(NoisySubmodError, ValueError):
    def __init__(self, kappa: int, n: int):
        self.kappa = kappa
        self.n = n
        super().__init__(f"kappa={kappa} exceeds universe size n={n}")


class DomainError(NoisySubmodError, ValueError):
    pass


@dataclass(frozen=True)
class GroundSet:
    """Universe of ``n`` elements addressed as ``0..n-1``."""

    n: int

    def __post_init__(self):
        if not isinstance(self.n, (int, np.integer)) or self.n < 1:
            raise InvalidParameter("n", self.n, ">=1")

    def __iter__(self):
        return iter(range(self.n))

    def __len__(self):
        return self.n

    def __contains__(self, u) -> bool:
        return isinstance(u, (int, np.integer)) and 0 <= u < self.n


@dataclass(frozen=True)
class AlgoConfig:
    kappa: int
    epsilon: float
    delta: float = 0.2
    alpha: float = 0.2
    range_r: float = 2.0
    seed: int = 0


def validate_config(cfg: AlgoConfig, ground: GroundSet) -> AlgoConfig:
    """Return ``cfg`` unchanged, or raise on the first violated bound."""
    if not isinstance(cfg.kappa, (int, np.integer)) or cfg.kappa <= 0:
        raise InvalidParameter("kappa", cfg.kappa, ">0")
    if not cfg.epsilon > 0:
        raise InvalidParameter("epsilon", cfg.epsilon, ">0")
    if not 0 < cfg.delta < 1:
        raise InvalidParameter("delta", cfg.delta, "in (0,1)")
    if not 0 < cfg.alpha < 1:
        raise InvalidParameter("alpha", cfg.alpha, "in (0,1)")
    if not cfg.range_r > 0:
        raise InvalidParameter("range_r", cfg.range_r, ">0")
    if not 0 <= int(cfg.seed) <= MASK64:
        raise InvalidParameter("seed", cfg.seed, "64-bit unsigned")
    if cfg.kappa > ground.n:
        raise KappaExceedsUniverse(int(cfg.kappa), ground.n)
    return cfg


@dataclass(frozen=True)
class RngStream:
    """A reproducible random stream identified by a seed and a derivation path.

    Streams with the same ``(seed, path)`` produce bit-identical draws; each
    extra path component spawns an independent child via ``SeedSequence``.
    """

    seed: int
    path: tuple = ()

    @property
    def stream_id(self) -> Optional[int]:
        return self.path[-1] if self.path else None

    def child(self, *ids: int) -> "RngStream":
        return RngStream(self.seed, self.path + tuple(int(i) & MASK64 for i in ids))

    def generator(self) -> np.random.Generator:
        ss = np.random.SeedSequence(int(self.seed) & MASK64, spawn_key=self.path)
        return np.random.Generator(np.random.PCG64(ss))


def derive_stream(seed: int, stream_id: int) -> RngStream:
    return RngStream(int(seed) & MASK64, (int(stream_id) & MASK64,))


def stable_hash(*parts) -> int:
    """64-bit hash of ``parts`` that is stable across processes and runs."""
    text = "|".join(repr(p) for p in parts).encode()
    return int.from_bytes(hashlib.blake2b(text, digest_size=8).digest(), "little")


@dataclass
class DecisionRecord:
    element: int
    round: int
    threshold: float
    samples: int
    accept: bool
    mean: float
    exit_kind: str = ""
    set_size: int = 0


@dataclass
class SolutionTrace:
    """Instrumented outcome of one algorithm run.

    ``total_samples`` covers every noisy draw, including the singleton
    estimation phase (``phase1_samples``).
    """

    accepted: list = field(default_factory=list)
    decisions: list = field(default_factory=list)
    rounds_executed: int = 0
    total_samples: int = 0
    marginal_evaluations: int = 0
    phase1_samples: int = 0
    max_singleton: Optional[float] = None
    degenerate: bool = False

    @property
    def avg_samples(self) -> float:
        if self.marginal_evaluations == 0:
            return 0.0
        return self.total_samples / self.marginal_evaluations

    def record(self, rec: DecisionRecord, evaluations: int = 1) -> None:
        self.decisions.append(rec)
        self.total_samples += rec.samples
        self.marginal_evaluations += evaluations
        if rec.accept:
            self.accepted.append(rec.element)

    @property
    def solution(self) -> frozenset:
        return frozenset(self.accepted)
