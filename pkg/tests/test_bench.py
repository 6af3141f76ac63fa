import numpy as np
import pytest

from noisy_submod.bench import (ConfigError, ExperimentSpec, aggregate, parse_spec_text, read_records,
                                run_experiment, sweep, verify)
from noisy_submod.bench.cli import main
from noisy_submod.bench.runner import COLUMNS, SCHEMA_LINE, records_to_csv, sweep_path
from noisy_submod.bench.spec import dump_spec, load_spec
from noisy_submod.objectives import load_tagged_dataset, synthetic_coverage, save_tagged_dataset

SMALL = """
objective = coverage
preset = corel60
algorithms = ctg
kappa = 3
epsilon = 0.2
trials = 3
seed = 11
output = out.csv
"""


def small_spec(tmp_path, text=SMALL, **changes):
    spec = parse_spec_text(text, base_dir=str(tmp_path))
    return spec.with_(**changes) if changes else spec


@pytest.fixture
def tiny_dataset(tmp_path):
    p = tmp_path / "tiny.tsv"
    save_tagged_dataset(synthetic_coverage(12, 15, seed=3, max_tags=4), p)
    return p


def test_parse_spec_fields(tmp_path):
    spec = small_spec(tmp_path)
    assert spec.algorithms == ("ctg",) and spec.kappas == (3,) and spec.epsilons == (0.2,)
    assert spec.output_path == str(tmp_path / "out.csv")
    again = parse_spec_text(dump_spec(spec), base_dir=str(tmp_path))
    assert again == spec


@pytest.mark.parametrize("text", ["preset = corel60\nbogus = 1\n", "preset = corel60\ntrials = 0\n",
                                  "preset = corel60\nalgorithms = magic\n", "objective = coverage\n",
                                  "preset = corel60\nkappa = x\n", "preset corel60\n"])
def test_spec_errors(text):
    with pytest.raises(ConfigError):
        parse_spec_text(text)


def test_record_count_and_schema(tmp_path):
    spec = small_spec(tmp_path)
    records = run_experiment(spec)
    assert len(records) == 3 and all(r.status == "ok" for r in records)
    lines = (tmp_path / "out.csv").read_text().splitlines()
    assert lines[0] == SCHEMA_LINE and lines[1].split(",") == COLUMNS
    for r in records:
        assert r.avg_samples == r.total_samples / r.marginal_evaluations
        assert r.ref_kind == "opt"  # C(60, 3) is within the brute-force limit


def test_rerun_is_byte_identical(tmp_path):
    spec = small_spec(tmp_path).with_(algorithms=("ctg", "eps_ap", "tg_exact"))
    a = records_to_csv(run_experiment(spec, write=False), drop=("wall_ms",))
    b = records_to_csv(run_experiment(spec, write=False), drop=("wall_ms",))
    assert a == b


def test_parallel_run_matches_serial(tmp_path, monkeypatch):
    spec = small_spec(tmp_path).with_(algorithms=("ctg", "eps_ap"))
    monkeypatch.setenv("NOISY_SUBMOD_THREADS", "1")
    serial = records_to_csv(run_experiment(spec, write=False), drop=("wall_ms",))
    monkeypatch.setenv("NOISY_SUBMOD_THREADS", "2")
    parallel = records_to_csv(run_experiment(spec, write=False), drop=("wall_ms",))
    assert serial == parallel


def test_aggregate_from_stored_csv(tmp_path):
    spec = small_spec(tmp_path).with_(epsilons=(0.2, 0.4), algorithms=("ctg", "eps_ap"))
    rows = sweep(spec, "epsilon")
    stored = read_records(spec.output_path)
    assert aggregate(stored, "epsilon") == rows
    assert (tmp_path / "out.sweep_epsilon.csv").exists() and sweep_path(spec, "epsilon").endswith(
        "out.sweep_epsilon.csv")


def test_single_point_sweep_rejected(tmp_path):
    with pytest.raises(ConfigError):
        sweep(small_spec(tmp_path), "epsilon")


def test_exact_reference_on_small_instance(tmp_path, tiny_dataset):
    spec = small_spec(tmp_path).with_(preset=None, dataset=str(tiny_dataset), algorithms=("greedy_exact", "ctg"))
    records = run_experiment(spec, write=False)
    assert records[0].algorithm == "greedy_exact" and len(records) == 4
    assert all(r.ref_kind == "opt" for r in records)
    assert load_tagged_dataset(tiny_dataset).n == 12


def test_failed_trial_becomes_row(tmp_path):
    spec = small_spec(tmp_path).with_(kappas=(100,))
    records = run_experiment(spec, write=False)
    assert all(r.status.startswith("error:") for r in records) and len(records) == 3


def test_eps_sweep_eps_ap_decreasing(tmp_path):
    spec = small_spec(tmp_path).with_(algorithms=("eps_ap",), epsilons=(0.05, 0.1, 0.2), trials=2)
    rows = sweep(spec, "epsilon")
    med = [r["total_samples_median"] for r in sorted(rows, key=lambda r: r["epsilon"])]
    assert med[0] > med[1] > med[2]


def test_kappa_sweep_growth(tmp_path):
    spec = small_spec(tmp_path).with_(algorithms=("ctg", "exp_greedy"), kappas=(2, 10), trials=3)
    rows = {(r["algorithm"], r["kappa"]): r["total_samples_median"] for r in sweep(spec, "kappa")}
    exp_ratio = rows["exp_greedy", 10] / rows["exp_greedy", 2]
    ctg_ratio = rows["ctg", 10] / rows["ctg", 2]
    # near-linear growth for the per-step argmax method, sublinear for the threshold method
    assert exp_ratio >= 0.8 * 5
    assert ctg_ratio < 5 and ctg_ratio < exp_ratio / 2


def test_verify_noiseless(tmp_path, tiny_dataset):
    spec = small_spec(tmp_path).with_(preset=None, dataset=str(tiny_dataset), noise="none", trials=5,
                                      epsilons=(0.1,))
    report = verify(spec)
    assert report.passed
    check = report.checks[0]
    assert check.name == "cs_soundness_noiseless" and check.measured == 0


def test_verify_noisy_small(tmp_path, tiny_dataset):
    spec = small_spec(tmp_path).with_(preset=None, dataset=str(tiny_dataset), trials=50, epsilons=(0.1,),
                                      verify_cs_calls=300, verify_phase1_runs=60)
    report = verify(spec)
    by_name = {c.name: c for c in report.checks}
    assert by_name["approx_guarantee"].measured >= 0.8
    assert by_name["clean_event_all_time"].measured >= 1 - 0.2 / 3
    assert report.passed


# --- CLI --------------------------------------------------------------------

def test_cli_bounds(capsys):
    assert main(["bounds", "--n", "60", "--kappa", "10", "--epsilon", "0.1"]) == 0
    out = dict(line.split("=", 1) for line in capsys.readouterr().out.split())
    assert out["N1"] == "1500" and out["N2"] == "2094" and out["max_cs_calls"] == "1080"


def test_cli_bounds_invalid(capsys):
    assert main(["bounds", "--n", "5", "--kappa", "6", "--epsilon", "0.1"]) == 1
    assert "error" in capsys.readouterr().err


def test_cli_gen_run_sweep(tmp_path, capsys):
    data = tmp_path / "d.tsv"
    assert main(["gen", "coverage", "--n", "12", "--tags", "10", "-o", str(data)]) == 0
    graph = tmp_path / "g.txt"
    assert main(["gen", "graph", "--n", "9", "--degree", "2", "-o", str(graph)]) == 0
    spec = tmp_path / "s.txt"
    spec.write_text(f"dataset = {data.name}\nalgorithms = ctg,tg_exact\nkappa = 2,3\nepsilon = 0.2\n"
                    "trials = 2\noutput = r.csv\n")
    assert main(["run", str(spec)]) == 0
    assert len(read_records(tmp_path / "r.csv")) == 6
    assert main(["sweep", str(spec), "--axis", "kappa"]) == 0
    assert (tmp_path / "r.sweep_kappa.csv").exists()
    assert main(["sweep", str(spec), "--axis", "epsilon"]) == 1


def test_cli_missing_spec(tmp_path):
    assert main(["run", str(tmp_path / "nope.txt")]) == 1


def test_cli_verify_exit_codes(tmp_path, monkeypatch, tiny_dataset):
    spec = tmp_path / "v.txt"
    spec.write_text(f"dataset = {tiny_dataset.name}\nnoise = none\nkappa = 3\nepsilon = 0.1\ntrials = 3\n")
    assert main(["verify", str(spec)]) == 0

    from noisy_submod.bench import cli
    from noisy_submod.bench.verify import CheckResult, VerifyReport
    monkeypatch.setattr(cli, "verify", lambda s: VerifyReport([CheckResult("x", False, 1.0, 0.0)]))
    assert main(["verify", str(spec)]) == 2


def test_load_spec_relative_paths(tmp_path):
    p = tmp_path / "sub" / "spec.txt"
    p.parent.mkdir()
    p.write_text(SMALL)
    assert load_spec(p).output_path == str(p.parent / "out.csv")
