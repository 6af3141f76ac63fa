"""Experiment spec files: flat ``key = value`` text, lists comma-separated."""

from __future__ import annotations

import os
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Optional

from ..core import NoisySubmodError

ALGORITHMS = ("ctg", "eps_ap", "exp_greedy", "exp_greedy_k", "tg_exact", "greedy_exact")


class ConfigError(NoisySubmodError, ValueError):
    pass


@dataclass
class ExperimentSpec:
    objective: str = "coverage"
    dataset: Optional[str] = None
    preset: Optional[str] = None
    gen_seed: int = 1
    algorithms: tuple = ("ctg", "eps_ap")
    kappas: tuple = (10,)
    epsilons: tuple = (0.1,)
    delta: float = 0.2
    alpha: float = 0.2
    noise: str = "gaussian"
    sigma: float = 1.0
    range_r: float = 2.0
    trials: int = 10
    seed: int = 0
    output: str = "results.csv"
    max_exp_n: int = 300
    opt_limit: int = 200_000
    rr_set_count: int = 200_000
    verify_cs_calls: int = 1000
    verify_phase1_runs: int = 200
    base_dir: str = "."
    extra: dict = field(default_factory=dict)

    def __post_init__(self):
        self.check()

    def check(self) -> None:
        if not self.algorithms:
            raise ConfigError("algorithms must be non-empty")
        bad = [a for a in self.algorithms if a not in ALGORITHMS]
        if bad:
            raise ConfigError(f"unknown algorithms {bad}; choose from {list(ALGORITHMS)}")
        if not self.kappas or not self.epsilons:
            raise ConfigError("kappa and epsilon grids must be non-empty")
        if self.trials < 1:
            raise ConfigError("trials must be >= 1")
        if self.objective not in ("coverage", "graph"):
            raise ConfigError(f"objective must be coverage or graph, got {self.objective!r}")
        if self.dataset is None and self.preset is None:
            raise ConfigError("set either dataset or preset")
        if self.noise not in ("none", "gaussian", "realization"):
            raise ConfigError(f"unknown noise {self.noise!r}")

    def resolve(self, path: Optional[str]) -> Optional[str]:
        if path is None or os.path.isabs(path):
            return path
        return str(Path(self.base_dir) / path)

    @property
    def output_path(self) -> str:
        return self.resolve(self.output)

    def with_(self, **changes) -> "ExperimentSpec":
        return replace(self, **changes)


_LISTS = {"algorithms": str, "kappa": int, "epsilon": float}
_SCALARS = {
    "objective": str, "dataset": str, "preset": str, "gen_seed": int, "delta": float,
    "alpha": float, "noise": str, "sigma": float, "range_r": float, "trials": int, "seed": int,
    "output": str, "max_exp_n": int, "opt_limit": int, "rr_set_count": int,
    "verify_cs_calls": int, "verify_phase1_runs": int,
}
_RENAME = {"kappa": "kappas", "epsilon": "epsilons", "R": "range_r"}


def parse_spec_text(text: str, base_dir: str = ".") -> ExperimentSpec:
    values: dict = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected key = value")
        key, val = (s.strip() for s in line.split("=", 1))
        key = "range_r" if key == "R" else key
        try:
            if key in _LISTS:
                items = tuple(_LISTS[key](v.strip()) for v in val.split(",") if v.strip())
                values[_RENAME.get(key, key)] = items
            elif key in _SCALARS:
                values[key] = _SCALARS[key](val)
            else:
                raise ConfigError(f"line {lineno}: unknown key {key!r}")
        except ValueError as exc:
            if isinstance(exc, ConfigError):
                raise
            raise ConfigError(f"line {lineno}: bad value for {key}: {exc}") from None
    return ExperimentSpec(base_dir=base_dir, **values)


def load_spec(path) -> ExperimentSpec:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read spec {path}: {exc}") from None
    return parse_spec_text(text, base_dir=str(Path(path).resolve().parent))


def dump_spec(spec: ExperimentSpec) -> str:
    lines = [
        f"objective = {spec.objective}",
        *( [f"dataset = {spec.dataset}"] if spec.dataset else [] ),
        *( [f"preset = {spec.preset}"] if spec.preset else [] ),
        f"gen_seed = {spec.gen_seed}",
        f"algorithms = {','.join(spec.algorithms)}",
        f"kappa = {','.join(map(str, spec.kappas))}",
        f"epsilon = {','.join(map(repr, spec.epsilons))}",
    ]
    for key in ("delta", "alpha", "noise", "sigma", "range_r", "trials", "seed", "output",
                "max_exp_n", "opt_limit", "rr_set_count", "verify_cs_calls", "verify_phase1_runs"):
        lines.append(f"{key} = {getattr(spec, key)}")
    return "\n".join(lines) + "\n"
