"""Cardinality-constrained submodular maximization from noisy marginal-gain samples."""

from .core import (AlgoConfig, DecisionRecord, DomainError, GroundSet, InvalidParameter,
                   KappaExceedsUniverse, NoisySubmodError, RngStream, SolutionTrace,
                   derive_stream, validate_config)
from .oracle import ElementOutOfRange, NoiseModel, NoisyMarginalOracle
from .objectives import CoverageObjective, InfluenceObjective, ModularObjective
from .algorithms import (CsVerdict, brute_force_opt, confident_sample, ctg, eps_ap, exp_greedy,
                         exp_greedy_k, greedy_exact, threshold_greedy_exact)

__version__ = "0.1.0"
