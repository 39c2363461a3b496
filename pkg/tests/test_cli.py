import csv
import io
import json

import pytest

from hhcrsp.cli import EXIT_INFEASIBLE, EXIT_IO, EXIT_OK, EXIT_USAGE, main
from hhcrsp.instancegen import Recipe, generate
from hhcrsp.model import load_instance, save_chromosome, save_instance

from factories import single_visit, tiny_one, tiny_one_plan


def run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def rows(text):
    return list(csv.DictReader(io.StringIO(text)))


@pytest.fixture
def tiny(tmp_path):
    path = tmp_path / "tiny.json"
    save_instance(tiny_one(), path)
    return str(path)


@pytest.fixture
def small(tmp_path):
    path = tmp_path / "small.json"
    save_instance(generate(Recipe(n=5, c=2, multi_service_fraction=0.4, skill_grouping="random"), 2), path)
    return str(path)


def test_gen_writes_identical_files(tmp_path, capsys):
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    assert run(capsys, "gen", "--preset", "A", "--seed", "1", "-o", str(a))[0] == EXIT_OK
    assert run(capsys, "--seed", "1", "gen", "--preset", "A", "-o", str(b))[0] == EXIT_OK
    assert a.read_bytes() == b.read_bytes()
    assert load_instance(a).n == 10


def test_gen_seed_from_environment(tmp_path, capsys, monkeypatch):
    monkeypatch.setenv("HHC_SEED", "5")
    _, from_env, _ = run(capsys, "gen", "--preset", "A")
    monkeypatch.delenv("HHC_SEED")
    _, explicit, _ = run(capsys, "gen", "--preset", "A", "--seed", "5")
    assert from_env == explicit


def test_gen_from_recipe_and_feasible(tmp_path, capsys):
    recipe = tmp_path / "r.json"
    recipe.write_text(json.dumps(Recipe(n=4, c=2, skill_grouping="random").to_dict()))
    code, out, err = run(capsys, "gen", "--recipe", str(recipe), "--feasible", "hard-msmtw", "--seed", "3")
    assert code == EXIT_OK and "feasible instance found with seed" in err
    assert json.loads(out)["patients"]


def test_gen_errors(tmp_path, capsys):
    assert run(capsys, "gen", "--preset", "ZZ")[0] == EXIT_USAGE
    assert run(capsys, "gen", "--recipe", str(tmp_path / "missing.json"))[0] == EXIT_IO
    bad = tmp_path / "bad.json"
    bad.write_text("{")
    assert run(capsys, "gen", "--recipe", str(bad))[0] == EXIT_USAGE
    assert run(capsys, "gen", "--preset", "A", "-o", str(tmp_path / "no" / "dir.json"))[0] == EXIT_IO


def test_solve_gvns_repeat(capsys, tiny):
    code, out, _ = run(capsys, "solve", tiny, "--alg", "gvns", "--repeat", "3", "--seed", "7", "--reference", "0")
    assert code == EXIT_OK
    table = rows(out)
    assert [r["run"] for r in table] == ["1", "2", "3", "best", "worst", "average"]
    assert [r["seed"] for r in table[:3]] == ["7", "8", "9"]
    assert all(r["value"] == "0" and r["cost"] == "20" for r in table)
    assert table[0]["cpu_ms"] == "" and out.endswith("\r\n")


def test_solve_gap_and_timing(capsys, tiny):
    _, out, _ = run(capsys, "solve", tiny, "--alg", "ga", "--variant", "soft-mtw", "--reference", "1",
                    "--timing", "--param", "max_generations=20")
    first = rows(out)[0]
    assert float(first["gap_pct"]) == -100 and float(first["cpu_ms"]) >= 0


def test_solve_spr_columns(capsys, small):
    code, out, _ = run(capsys, "solve", small, "--alg", "ga", "--variant", "spr-penalty", "--max-iter", "10",
                       "--param", "max_generations=5")
    assert code in (EXIT_OK, EXIT_INFEASIBLE)
    first = rows(out)[0]
    assert float(first["value"]) == pytest.approx(float(first["cost"]) + float(first["expected_recourse"]), abs=1e-5)


def test_solve_refusals(capsys, small, tmp_path):
    assert run(capsys, "solve", small, "--alg", "gvns", "--variant", "spr-penalty")[0] == EXIT_USAGE
    assert run(capsys, "solve", small, "--alg", "nsga2", "--variant", "hard-msmtw")[0] == EXIT_USAGE
    assert run(capsys, "solve", small, "--alg", "ga", "--variant", "multiobj")[0] == EXIT_USAGE
    assert run(capsys, "solve", small, "--alg", "gvns", "--param", "nonsense=1")[0] == EXIT_USAGE
    assert run(capsys, "solve", small, "--alg", "gvns", "--repeat", "0")[0] == EXIT_USAGE
    assert run(capsys, "solve", str(tmp_path / "none.json"), "--alg", "gvns")[0] == EXIT_IO


def test_solve_is_reproducible_across_threads(capsys, small):
    args = ("solve", small, "--alg", "ga", "--seed", "3", "--param", "max_generations=30")
    code, one, _ = run(capsys, *args, "--threads", "1")
    _, four, _ = run(capsys, *args, "--threads", "4")
    assert code in (EXIT_OK, EXIT_INFEASIBLE) and one
    assert one == four


def test_multiobjective_pipeline(capsys, small, tmp_path):
    out = tmp_path / "runs.csv"
    code, _, _ = run(capsys, "solve", small, "--alg", "hybrid", "--repeat", "2", "-o", str(out),
                     "--param", "max_evaluations=200")
    assert code == EXIT_OK
    table = rows(out.read_text())
    assert [r["run"] for r in table] == ["1", "2", "best", "worst", "average"]
    fronts = [tmp_path / f"runs_front_{lab}.csv" for lab in ("run1", "run2", "nsga2-run1")]
    assert all(f.exists() for f in fronts)
    ind = rows((tmp_path / "runs_indicators.csv").read_text())
    assert {r["indicator"] for r in ind} == {"hypervolume", "coverage"}
    cov = {(r["front"], r["other"]): float(r["value"]) for r in ind if r["indicator"] == "coverage"}
    assert cov[("nsga2-run1", "run1")] == 0
    code, text, _ = run(capsys, "metrics", str(fronts[0]), str(fronts[1]))
    assert code == EXIT_OK
    metric_rows = rows(text)
    assert sum(r["indicator"] == "hypervolume" for r in metric_rows) == 2
    diag = [float(r["value"]) for r in metric_rows if r["indicator"] == "coverage" and r["front"] == r["other"]]
    assert diag == [0, 0]


def test_metrics_examples(capsys, tmp_path):
    single = tmp_path / "one.csv"
    single.write_text("f1,f2,f3,penalty,chromosome\n5,7,9,0,\n")
    twin = tmp_path / "twin.csv"
    twin.write_text(single.read_text())
    _, out, _ = run(capsys, "metrics", str(single), str(twin))
    hv = [float(r["value"]) for r in rows(out) if r["indicator"] == "hypervolume"]
    assert hv == [1.0, 1.0]
    assert run(capsys, "metrics")[0] == EXIT_USAGE
    junk = tmp_path / "junk.csv"
    junk.write_text("a,b\n1,2\n")
    assert run(capsys, "metrics", str(junk))[0] == EXIT_USAGE


def test_oracle_command(capsys, tiny, tmp_path):
    code, out, _ = run(capsys, "oracle", tiny)
    assert code == EXIT_OK
    assert rows(out)[0]["row"] == "optimum" and rows(out)[0]["value"] == "0"
    _, out, _ = run(capsys, "oracle", tiny, "--variant", "multiobj")
    assert min(float(r["f1"]) for r in rows(out)) == 20
    bad = tmp_path / "bad.json"
    save_instance(single_visit(window=(0, 1)), bad)
    assert run(capsys, "oracle", str(bad))[0] == EXIT_INFEASIBLE


def test_simulate_command(capsys, tiny, tmp_path):
    plan = tmp_path / "plan.json"
    save_chromosome(tiny_one_plan(), plan)
    code, out, _ = run(capsys, "simulate", tiny, str(plan), "--seed", "2")
    assert code == EXIT_OK
    (row,) = rows(out)
    assert row["cost"] == "20" and row["expected_recourse"] == "0" and row["stop_reason"] == "gap"
    _, again, _ = run(capsys, "simulate", tiny, str(plan), "--seed", "2")
    assert again == out
