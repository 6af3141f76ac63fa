import numpy as np
import pytest

from noisy_submod import CoverageObjective, InfluenceObjective, ModularObjective
from noisy_submod.objectives import (EmptyDataset, EmptyGraph, ParseError, coverage_marginal, coverage_value,
                                     influence_estimate, load_graph, load_tagged_dataset, make_preset,
                                     random_graph, sample_rr_sets, save_graph, save_tagged_dataset,
                                     synthetic_coverage)

from conftest import random_coverage
from properties import monotonicity_violations, ris_vs_forward, submodularity_violations


@pytest.fixture
def abc():
    # a=0, b=1, c=2
    return CoverageObjective([{0, 1}, {1, 2}], 3)


def test_coverage_values(abc):
    assert coverage_value(abc, {0}) == 2
    assert coverage_value(abc, set()) == 0
    assert coverage_value(abc, {0, 1}) == 3


def test_coverage_marginals(abc):
    assert coverage_marginal(abc, {0}, 1) == 1
    assert coverage_marginal(abc, {0, 1}, 1) == 0


def test_coverage_marginal_is_value_difference(rng):
    obj = random_coverage(rng, 25, 40)
    for _ in range(1000):
        S = set(rng.choice(25, size=int(rng.integers(0, 10)), replace=False).tolist())
        u = int(rng.integers(25))
        assert obj.marginal(S, u) == obj.value(S | {u}) - obj.value(S)


def test_coverage_properties(rng):
    obj = synthetic_coverage(60, 30, seed=1)
    assert submodularity_violations(obj, 10_000, rng) == 0
    assert monotonicity_violations(obj, 10_000, rng) == 0


def test_influence_properties(rng):
    obj = random_graph(29, 3.0, seed=2, rr_set_count=5000, rr_seed=3)
    assert submodularity_violations(obj, 10_000, rng) == 0
    assert monotonicity_violations(obj, 10_000, rng) == 0
    assert obj.value(set()) == 0.0


def test_modular_objective():
    m = ModularObjective([1.0, 2.5, 0.0])
    assert m.value({0, 1}) == 3.5 and m.marginal({1}, 1) == 0.0 and m.marginal(set(), 1) == 2.5
    with pytest.raises(ValueError):
        ModularObjective([-1.0])


def test_rr_sets_without_live_edges():
    g = InfluenceObjective(5, [(0, 1, 0.0), (1, 2, 0.0), (3, 4, 0.0)], rr_set_count=10)
    rr = sample_rr_sets(g, 500, np.random.default_rng(0))
    for root, members in zip(rr.roots, rr.sets):
        assert members == {int(root)}


def test_rr_sets_on_certain_path():
    g = InfluenceObjective(3, [(0, 1, 1.0), (1, 2, 1.0)], rr_set_count=10)
    rr = sample_rr_sets(g, 300, np.random.default_rng(1))
    expect = {0: {0}, 1: {0, 1}, 2: {0, 1, 2}}
    for root, members in zip(rr.roots, rr.sets):
        assert members == expect[int(root)]
    assert 2 in set(rr.roots.tolist())


def test_influence_estimate_edges():
    g = random_graph(10, 2.0, seed=4, rr_set_count=2000)
    rr = g.rr_sets
    assert influence_estimate(rr, [], 10) == 0.0
    assert influence_estimate(rr, range(10), 10) == 10.0


def test_ris_matches_forward_simulation():
    worst, _ = ris_vs_forward()
    assert worst <= 0.05


def test_realization_samples_track_ris_value():
    g = random_graph(12, 2.5, seed=5, rr_set_count=100_000, rr_seed=6)
    x = g.sample_marginals({0}, 3, 40_000, np.random.default_rng(7))
    assert abs(x.mean() - g.marginal({0}, 3)) <= 4 * x.std() / np.sqrt(x.size) + 0.03


def test_empty_graph():
    with pytest.raises(EmptyGraph):
        InfluenceObjective(0, [])


def test_load_two_line_tag_file(tmp_path):
    p = tmp_path / "tags.tsv"
    p.write_text("x\tred,blue\ny\tblue,green\n")
    obj = load_tagged_dataset(p)
    assert obj.n == 2 and obj.value({0, 1}) == 3 and obj.item_ids == ["x", "y"]


@pytest.mark.parametrize("text", ["x red\n", "x\ta\nx\tb\n"])
def test_tag_file_errors(tmp_path, text):
    p = tmp_path / "bad.tsv"
    p.write_text(text)
    with pytest.raises(ParseError):
        load_tagged_dataset(p)


def test_empty_tag_file(tmp_path):
    p = tmp_path / "empty.tsv"
    p.write_text("\n")
    with pytest.raises(EmptyDataset):
        load_tagged_dataset(p)


def test_graph_bad_probability(tmp_path):
    p = tmp_path / "g.txt"
    p.write_text("0 1 0.5\n1 2 1.5\n")
    with pytest.raises(ParseError) as info:
        load_graph(p)
    assert info.value.line == 2


def test_coverage_round_trip(tmp_path):
    obj = synthetic_coverage(60, 30, seed=1)
    p = tmp_path / "c.tsv"
    save_tagged_dataset(obj, p)
    back = load_tagged_dataset(p)
    assert back.item_ids == obj.item_ids
    assert back.named_tags() == obj.named_tags()
    save_tagged_dataset(back, tmp_path / "c2.tsv")
    assert (tmp_path / "c2.tsv").read_bytes() == p.read_bytes()


def test_graph_round_trip(tmp_path):
    g = random_graph(15, 1.0, seed=3, rr_set_count=10)
    p = tmp_path / "g.txt"
    save_graph(g, p)
    back = load_graph(p, rr_set_count=10)
    assert back.n == g.n and back.edges == g.edges


def test_presets():
    c = make_preset("corel60")
    assert c.n == 60 and c.tag_universe_size == 30
    assert make_preset("delicious300").n == 300
    assert make_preset("euall29", rr_set_count=100).n == 29
    with pytest.raises(KeyError):
        make_preset("nope")
