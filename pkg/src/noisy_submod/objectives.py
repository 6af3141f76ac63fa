"""Exact monotone submodular objectives.

Coverage counts the distinct tags an item set covers. Influence estimates
expected independent-cascade spread from a frozen collection of
reverse-reachable (RR) sets, and can also draw single live-edge realizations
for the noisy oracle.
"""

from __future__ import annotations

import os
from dataclasses import dataclass
from typing import Iterable, Optional, Sequence

import numpy as np

from .core import NoisySubmodError, RngStream, derive_stream


class ParseError(NoisySubmodError, ValueError):
    def __init__(self, line: int, reason: str):
        self.line = line
        self.reason = reason
        super().__init__(f"line {line}: {reason}")


class EmptyDataset(NoisySubmodError, ValueError):
    pass


class EmptyGraph(NoisySubmodError, ValueError):
    pass


def _popcount(x: int) -> int:
    return x.bit_count()


class Objective:
    """Interface shared by every ground-truth function.

    Subclasses set ``n`` and implement ``value``; ``marginal`` defaults to
    a difference of values.
    """

    n: int

    def value(self, X: Iterable[int]) -> float:
        raise NotImplementedError

    def marginal(self, S: Iterable[int], u: int) -> float:
        S = frozenset(S)
        if u in S:
            return 0.0
        return self.value(S | {u}) - self.value(S)

    def singletons(self) -> np.ndarray:
        return np.array([self.value({u}) for u in range(self.n)], dtype=float)


class ModularObjective(Objective):
    """f(X) = sum of nonnegative weights; handy for controlled-gain tests."""

    def __init__(self, weights: Sequence[float]):
        self.weights = np.asarray(weights, dtype=float)
        if self.weights.ndim != 1 or len(self.weights) == 0:
            raise EmptyDataset("modular objective needs at least one weight")
        if np.any(self.weights < 0):
            raise ValueError("weights must be nonnegative")
        self.n = len(self.weights)

    def value(self, X):
        return float(sum(self.weights[x] for x in set(X)))

    def marginal(self, S, u):
        return 0.0 if u in S else float(self.weights[u])


class CoverageObjective(Objective):
    """Tag coverage: f(X) is the number of distinct tags held by items in X."""

    def __init__(self, item_tags: Sequence[Iterable[int]], tag_universe_size: Optional[int] = None,
                 tag_names: Optional[Sequence[str]] = None, item_ids: Optional[Sequence[str]] = None):
        if len(item_tags) == 0:
            raise EmptyDataset("coverage objective needs at least one item")
        self.item_tags = [frozenset(int(t) for t in tags) for tags in item_tags]
        used = set().union(*self.item_tags)
        if tag_universe_size is None:
            tag_universe_size = (max(used) + 1) if used else 0
        if used and (min(used) < 0 or max(used) >= tag_universe_size):
            raise ValueError("tag ids must lie in [0, tag_universe_size)")
        self.tag_universe_size = tag_universe_size
        self.n = len(self.item_tags)
        self.tag_names = list(tag_names) if tag_names is not None else [f"t{i}" for i in range(tag_universe_size)]
        self.item_ids = list(item_ids) if item_ids is not None else [str(i) for i in range(self.n)]
        # Python ints as bitsets keep union/popcount cheap
        self._masks = [sum(1 << t for t in tags) for tags in self.item_tags]

    def _union_mask(self, X) -> int:
        m = 0
        for x in X:
            m |= self._masks[x]
        return m

    def value(self, X) -> int:
        return _popcount(self._union_mask(X))

    def marginal(self, S, u) -> int:
        return _popcount(self._masks[u] & ~self._union_mask(S))

    def singletons(self):
        return np.array([len(t) for t in self.item_tags], dtype=float)

    def named_tags(self) -> list:
        return [frozenset(self.tag_names[t] for t in tags) for tags in self.item_tags]


def coverage_value(obj: CoverageObjective, X) -> int:
    return obj.value(X)


def coverage_marginal(obj: CoverageObjective, S, u) -> int:
    return obj.marginal(S, u)


@dataclass
class RRSetCollection:
    """Reverse-reachable sets stored as a boolean membership matrix (M x n)."""

    membership: np.ndarray
    roots: np.ndarray

    @property
    def count(self) -> int:
        return self.membership.shape[0]

    @property
    def n(self) -> int:
        return self.membership.shape[1]

    @property
    def sets(self) -> list:
        return [frozenset(np.flatnonzero(row).tolist()) for row in self.membership]

    def hits(self, X) -> np.ndarray:
        idx = np.fromiter(X, dtype=np.int64)
        if idx.size == 0:
            return np.zeros(self.count, dtype=bool)
        return self.membership[:, idx].any(axis=1)


def _reachability(n: int, src: np.ndarray, dst: np.ndarray, live: np.ndarray, start: np.ndarray) -> np.ndarray:
    """Propagate boolean reach along live edges ``src -> dst`` until fixpoint.

    ``live`` is (B, E) and ``start`` is (B, n); returns the (B, n) closure.
    """
    reached = start.copy()
    if src.size == 0:
        return reached
    onehot = np.zeros((src.size, n), dtype=np.int32)
    onehot[np.arange(src.size), dst] = 1
    frontier = reached
    while True:
        push = (live & frontier[:, src]).astype(np.int32) @ onehot > 0
        new = push & ~reached
        if not new.any():
            return reached
        reached |= new
        frontier = new


class InfluenceObjective(Objective):
    """Expected independent-cascade spread, estimated by reverse influence sampling.

    ``value`` is n times the fraction of the frozen RR sets that ``X`` hits.
    The collection is sampled lazily with ``rr_set_count`` sets from
    ``rr_seed`` so every consumer sees the same ground truth.
    """

    def __init__(self, n: int, edges: Sequence[tuple], rr_set_count: int = 200_000,
                 rr_seed: int = 0, batch: int = 4096):
        if n < 1:
            raise EmptyGraph("graph has no nodes")
        self.n = int(n)
        arr = np.asarray(edges, dtype=float).reshape(-1, 3)
        self.src = arr[:, 0].astype(np.int64)
        self.dst = arr[:, 1].astype(np.int64)
        self.prob = arr[:, 2].copy()
        if self.src.size and (self.src.min() < 0 or max(self.src.max(), self.dst.max()) >= n or self.dst.min() < 0):
            raise ValueError("edge endpoint outside [0, n)")
        if np.any((self.prob < 0) | (self.prob > 1)):
            raise ValueError("edge probabilities must lie in [0, 1]")
        self.rr_set_count = int(rr_set_count)
        self.rr_seed = int(rr_seed)
        self.batch = batch
        self._rr: Optional[RRSetCollection] = None

    @property
    def edges(self) -> list:
        return list(zip(self.src.tolist(), self.dst.tolist(), self.prob.tolist()))

    @property
    def rr_sets(self) -> RRSetCollection:
        if self._rr is None:
            self._rr = sample_rr_sets(self, self.rr_set_count, derive_stream(self.rr_seed, 0))
        return self._rr

    def value(self, X) -> float:
        return influence_estimate(self.rr_sets, X, self.n)

    def marginal(self, S, u) -> float:
        S = frozenset(S)
        if u in S:
            return 0.0
        rr = self.rr_sets
        hit_s = rr.hits(S)
        new = rr.membership[:, u] & ~hit_s
        return self.n * float(np.count_nonzero(new)) / rr.count

    def singletons(self):
        rr = self.rr_sets
        return self.n * rr.membership.sum(axis=0) / rr.count

    def sample_marginals(self, S, u, size: int, rng: np.random.Generator) -> np.ndarray:
        """Realized spread gains f(S+u; g) - f(S; g) over ``size`` live-edge graphs g."""
        S = frozenset(S)
        if u in S:
            return np.zeros(size)
        out = np.empty(size)
        seeds_s = np.zeros(self.n, dtype=bool)
        seeds_s[list(S)] = True
        for lo in range(0, size, self.batch):
            b = min(self.batch, size - lo)
            live = rng.random((b, self.src.size)) < self.prob
            start = np.broadcast_to(seeds_s, (b, self.n))
            base = _reachability(self.n, self.src, self.dst, live, start)
            with_u = base.copy()
            with_u[:, u] = True
            grown = _reachability(self.n, self.src, self.dst, live, with_u)
            out[lo:lo + b] = grown.sum(axis=1) - base.sum(axis=1)
        return out


def sample_rr_sets(obj: InfluenceObjective, M: int, rng) -> RRSetCollection:
    """Sample ``M`` RR sets: uniform root, reverse BFS keeping each edge w.p. its weight."""
    if obj.n < 1:
        raise EmptyGraph("graph has no nodes")
    if M < 1:
        raise ValueError("M must be >= 1")
    gen = rng.generator() if isinstance(rng, RngStream) else rng
    roots = gen.integers(0, obj.n, size=M)
    rows = []
    for lo in range(0, M, obj.batch):
        b = min(obj.batch, M - lo)
        live = gen.random((b, obj.src.size)) < obj.prob
        start = np.zeros((b, obj.n), dtype=bool)
        start[np.arange(b), roots[lo:lo + b]] = True
        # walking edges backwards: swap endpoints
        rows.append(_reachability(obj.n, obj.dst, obj.src, live, start))
    return RRSetCollection(np.vstack(rows), roots)


def influence_estimate(collection: RRSetCollection, X, n: int) -> float:
    X = list(X)
    if not X:
        return 0.0
    return n * float(np.count_nonzero(collection.hits(X))) / collection.count


# --- file formats -----------------------------------------------------------

def load_tagged_dataset(path) -> CoverageObjective:
    """Read ``item_id<TAB>tag1,tag2,...`` lines; tags are opaque strings."""
    item_ids, item_tags = [], []
    tag_index: dict = {}
    seen = set()
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.rstrip("\n").rstrip("\r")
            if not line.strip():
                continue
            if "\t" not in line:
                raise ParseError(lineno, "expected item_id<TAB>tags")
            item, tag_field = line.split("\t", 1)
            item = item.strip()
            if not item:
                raise ParseError(lineno, "empty item id")
            if item in seen:
                raise ParseError(lineno, f"duplicate item id {item!r}")
            seen.add(item)
            tags = set()
            for tag in tag_field.split(","):
                tag = tag.strip()
                if tag:
                    tags.add(tag_index.setdefault(tag, len(tag_index)))
            item_ids.append(item)
            item_tags.append(tags)
    if not item_tags:
        raise EmptyDataset(f"{path}: no items")
    names = sorted(tag_index, key=tag_index.get)
    return CoverageObjective(item_tags, len(names), tag_names=names, item_ids=item_ids)


def save_tagged_dataset(obj: CoverageObjective, path) -> None:
    lines = []
    for item, tags in zip(obj.item_ids, obj.item_tags):
        lines.append(item + "\t" + ",".join(sorted(obj.tag_names[t] for t in tags)))
    _atomic_write(path, "\n".join(lines) + "\n")


def load_graph(path, n: Optional[int] = None, rr_set_count: int = 200_000, rr_seed: int = 0) -> InfluenceObjective:
    """Read ``src dst weight`` lines (0-based nodes, ``#`` comments).

    Node count is ``n`` if given, else a ``# nodes N`` header if present,
    else one more than the largest endpoint.
    """
    edges = []
    header_n = None
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if line.startswith("#"):
                words = line[1:].split()
                if len(words) == 2 and words[0] == "nodes" and words[1].isdigit():
                    header_n = int(words[1])
                continue
            if not line:
                continue
            parts = line.split()
            if len(parts) != 3:
                raise ParseError(lineno, "expected 'src dst weight'")
            try:
                s, d = int(parts[0]), int(parts[1])
                w = float(parts[2])
            except ValueError as exc:
                raise ParseError(lineno, str(exc)) from None
            if s < 0 or d < 0:
                raise ParseError(lineno, "node ids must be nonnegative")
            if not 0.0 <= w <= 1.0:
                raise ParseError(lineno, f"weight {w} outside [0,1]")
            edges.append((s, d, w))
    if not edges:
        raise EmptyDataset(f"{path}: no edges")
    top = max(max(s, d) for s, d, _ in edges) + 1
    if n is None:
        n = header_n if header_n is not None else top
    elif n < top:
        raise ParseError(0, f"node count {n} smaller than largest endpoint {top - 1}")
    return InfluenceObjective(n, edges, rr_set_count=rr_set_count, rr_seed=rr_seed)


def save_graph(obj: InfluenceObjective, path) -> None:
    lines = [f"# nodes {obj.n}"]
    lines += [f"{s} {d} {w!r}" for s, d, w in obj.edges]
    _atomic_write(path, "\n".join(lines) + "\n")


def _atomic_write(path, text: str) -> None:
    tmp = f"{path}.tmp{os.getpid()}"
    with open(tmp, "w", encoding="utf-8") as fh:
        fh.write(text)
    os.replace(tmp, path)


# --- synthetic instances ----------------------------------------------------

def synthetic_coverage(n: int, n_tags: int, seed: int, min_tags: int = 1, max_tags: int = 6,
                       zipf_s: float = 1.0) -> CoverageObjective:
    """Items with a few tags each, drawn with Zipf-distributed tag popularity."""
    rng = np.random.default_rng(seed)
    pop = 1.0 / np.arange(1, n_tags + 1) ** zipf_s
    pop /= pop.sum()
    item_tags = []
    for _ in range(n):
        k = int(rng.integers(min_tags, min(max_tags, n_tags) + 1))
        item_tags.append(set(rng.choice(n_tags, size=k, replace=False, p=pop).tolist()))
    names = [f"tag{i}" for i in range(n_tags)]
    return CoverageObjective(item_tags, n_tags, tag_names=names, item_ids=[f"item{i}" for i in range(n)])


def random_graph(n: int, avg_degree: float, seed: int, rr_set_count: int = 200_000,
                 rr_seed: int = 0) -> InfluenceObjective:
    """Directed Erdos-Renyi graph with edge weights uniform on [0, 1]."""
    rng = np.random.default_rng(seed)
    p = min(1.0, avg_degree / max(n - 1, 1))
    edges = []
    for s in range(n):
        for d in range(n):
            if s != d and rng.random() < p:
                edges.append((s, d, float(rng.random())))
    return InfluenceObjective(n, edges, rr_set_count=rr_set_count, rr_seed=rr_seed)


PRESETS = {
    "corel60": dict(kind="coverage", n=60, n_tags=30),
    "delicious300": dict(kind="coverage", n=300, n_tags=100),
    "euall29": dict(kind="graph", n=29, avg_degree=3.0),
}


def make_preset(name: str, seed: int = 1, **overrides) -> Objective:
    if name not in PRESETS:
        raise KeyError(f"unknown preset {name!r}; choose from {sorted(PRESETS)}")
    params = {**PRESETS[name], **overrides}
    kind = params.pop("kind")
    if kind == "coverage":
        return synthetic_coverage(params["n"], params["n_tags"], seed)
    return random_graph(params["n"], params["avg_degree"], seed,
                        rr_set_count=params.get("rr_set_count", 200_000),
                        rr_seed=params.get("rr_seed", seed))

