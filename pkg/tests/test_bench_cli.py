import json
import time

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rnamcs.bench import (
    RunSpec, bucket_counts, load_grid, load_toy_suite, render_csv, render_table, run_puzzle, run_suite,
    summarize,
)
from rnamcs.cli import main
from rnamcs.fold import fold
from rnamcs.search import SearchConfig
from rnamcs.structure import Puzzle, read_puzzles

WITNESSES = __import__("pathlib").Path(__file__).parent / "data" / "toy_witnesses.tsv"


def test_toy_suite_shape_and_witnesses():
    puzzles = load_toy_suite()
    assert len(puzzles) == 20
    assert all(6 <= len(p.structure) <= 40 for p in puzzles)
    witnesses = {}
    for line in WITNESSES.read_text().splitlines():
        pid, structure, seq = line.split("\t")
        witnesses[pid] = (structure, seq)
    for p in puzzles:
        structure, seq = witnesses[p.id]
        assert structure == p.structure
        assert fold(seq).mfe_structure == structure


@pytest.mark.parametrize("kwargs", [
    dict(algo="uct", config=SearchConfig(beam=2), budget=10),
    dict(algo="nmcs", config=SearchConfig(p=2)),
    dict(algo="nmcs", workers=2),
    dict(algo="uct"),
    dict(algo="gnrpa", budget=5),
    dict(config=SearchConfig(restart_divisor=5)),
    dict(instances=2),
    dict(instances=2, workers=2, time_limit=1),
    dict(algo="nope"),
])
def test_contradictory_specs(kwargs):
    with pytest.raises(ValueError):
        RunSpec(**kwargs)


def test_spec_roundtrip():
    spec = RunSpec(algo="diversity", config=SearchConfig(level=2, n=(50, 10), beam=4, seed=3), time_limit=2.0)
    again = RunSpec.from_dict(json.loads(json.dumps(spec.to_dict())))
    assert again == spec
    assert RunSpec.from_dict({"level": 2, "use_beta": False}).config == SearchConfig(level=2, use_beta=False)
    with pytest.raises(ValueError):
        RunSpec.from_dict({"colour": "red"})


def test_record_is_self_contained():
    puzzle = load_toy_suite()[12]
    _, record = run_puzzle(puzzle, RunSpec(config=SearchConfig(level=1, n=50, seed=2)))
    spec = RunSpec.from_dict({k: record[k] for k in RunSpec.__dataclass_fields__})
    _, again = run_puzzle(Puzzle(record["id"], record["structure"], record["constraint"]), spec)
    assert again["sequence"] == record["sequence"] and again["playouts"] == record["playouts"]
    for key in ("id", "config", "solved", "score", "time", "playouts", "cache"):
        assert key in record


@given(st.lists(st.tuples(st.booleans(), st.floats(0, 100)), max_size=30),
       st.lists(st.floats(0, 100), min_size=1, max_size=6))
@settings(max_examples=200, deadline=None)
def test_bucket_counts_cumulative(runs, edges):
    records = [{"solved": s, "solve_time": t if s else None} for s, t in runs]
    counts = bucket_counts(records, sorted(edges))
    assert counts == sorted(counts)
    assert counts[-1] <= sum(s for s, _ in runs)


def test_summary_layout():
    grid = [RunSpec(config=SearchConfig(use_beta=False)), RunSpec()]
    records = [{"cell": 0, "solved": True, "solve_playouts": 30}, {"cell": 1, "solved": True, "solve_playouts": 5},
               {"cell": 1, "solved": False, "solve_playouts": None}]
    rows = summarize(grid, records, [10, 100], "playouts")
    assert list(rows[0]) == ["Algo", "Level", "α", "N", "β", "P", "Beam", "H", "Solved", "10p", "100p"]
    assert [r["Solved"] for r in rows] == [1, 1] and rows[0]["10p"] == 0 and rows[0]["100p"] == 1
    assert rows[0]["β"] == "no" and rows[1]["β"] == "yes"
    text = render_table(rows)
    assert text.splitlines()[0].split() == list(rows[0])
    assert render_csv(rows).startswith("Algo,Level")
    assert render_table([]) == "" and render_csv([]) == ""


def test_suite_beta_direction_and_reproducible(tmp_path):
    puzzles = load_toy_suite()[:10]
    grid = [RunSpec(config=SearchConfig(n=30, use_beta=False)), RunSpec(config=SearchConfig(n=30))]
    rows = run_suite(puzzles, grid, tmp_path / "a", [20, 30], "playouts")
    assert rows[1]["Solved"] >= rows[0]["Solved"]
    run_suite(puzzles, grid, tmp_path / "b", [20, 30], "playouts")
    for name in ("summary.txt", "summary.csv"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()
    lines = (tmp_path / "a" / "results.jsonl").read_text().splitlines()
    assert len(lines) == 20 and json.loads(lines[0])["cell"] == 0


def test_load_grid(tmp_path):
    g = tmp_path / "grid.json"
    g.write_text(json.dumps([{"level": 1, "use_beta": False}, {"algo": "uct", "budget": 10}]))
    assert [s.algo for s in load_grid(g)] == ["gnrpa", "uct"]
    g.write_text("{}")
    with pytest.raises(ValueError):
        load_grid(g)


# -- command line ----------------------------------------------------------------

def test_cli_solve_smoke(capsys):
    code = main(["solve", "((..))", "--algo", "gnrpa", "--level", "2", "--n", "100", "--alpha", "1.0",
                 "--beta", "on", "--min-hairpin", "2"])
    record = json.loads(capsys.readouterr().out)
    assert code == 0 and record["solved"] and record["config"]["level"] == 2
    assert fold(record["sequence"]).mfe_structure != "((..))"  # default model forbids 2-base hairpins


def test_cli_unsolvable_is_not_an_error(capsys):
    assert main(["solve", "((..))", "--n", "5"]) == 0
    assert not json.loads(capsys.readouterr().out)["solved"]


def test_cli_malformed_input(tmp_path, capsys):
    assert main(["solve", "(()"]) == 2
    assert "unbalanced" in capsys.readouterr().err
    f = tmp_path / "p.tsv"
    f.write_text("good\t(((...)))\nbad\t(()\n")
    assert main(["solve", "--file", str(f)]) == 2
    assert "line 2" in capsys.readouterr().err
    assert main(["solve", "(...)", "--algo", "uct", "--beam", "3"]) == 2
    assert main(["solve", "(...)", "--constraint", "ANNNA"]) == 2
    assert main(["solve"]) == 2


def test_cli_file_and_json(tmp_path, capsys):
    f = tmp_path / "p.tsv"
    f.write_text("a\t(((...)))\nb\t((((...))))\n")
    out = tmp_path / "runs.jsonl"
    assert main(["solve", "--file", str(f), "--id", "b", "--json", str(out)]) == 0
    assert [json.loads(l)["id"] for l in out.read_text().splitlines()] == ["b"]
    assert main(["solve", "--file", str(f), "--id", "zzz"]) == 2


def test_cli_dotted_levels(capsys):
    assert main(["solve", "((((...))))", "--level", "2", "--n", "20.5", "--beam", "2.1", "--p", "2"]) == 0
    assert json.loads(capsys.readouterr().out)["config"]["n"] == [20, 5]
    with pytest.raises(SystemExit):
        main(["solve", "(...)", "--beam", "2.2"])


def test_cli_diversity_defaults(capsys):
    assert main(["solve", "((((...))))", "--algo", "diversity"]) == 0
    cfg = json.loads(capsys.readouterr().out)["config"]
    assert cfg["beam"] == 5 and cfg["diversity"]


def test_cli_time_limit(capsys):
    start = time.monotonic()
    assert main(["solve", ".(...).", "--constraint", "GGAAACN", "--time-limit", "2"]) == 0
    assert abs(time.monotonic() - start - 2) < 1


def test_cli_suite_and_empty_grid(tmp_path, capsys):
    puzzles = tmp_path / "p.tsv"
    puzzles.write_text("a\t(((...)))\nb\t((..((...))..))\n")
    grid = tmp_path / "grid.json"
    grid.write_text("[]")
    assert main(["suite", str(puzzles), "--grid", str(grid)]) == 0
    assert capsys.readouterr().out == ""
    grid.write_text(json.dumps([{"use_beta": False}, {}]))
    assert main(["suite", str(puzzles), "--grid", str(grid), "--out", str(tmp_path / "out"),
                 "--buckets", "10,100", "--bucket-unit", "playouts"]) == 0
    table = capsys.readouterr().out.splitlines()
    assert table[0].split()[-2:] == ["10p", "100p"] and len(table) == 3
    assert (tmp_path / "out" / "summary.csv").exists()


def test_cli_fold_and_contexts(capsys):
    assert main(["fold", "GGGAAACCC", "--target", "(((...)))"]) == 0
    data = json.loads(capsys.readouterr().out)
    assert data["mfe_structure"] == "(((...)))" and data["score"] == 1 and data["delta_g"] == 0
    assert main(["contexts", "((.(...).(...).))"]) == 0
    out = capsys.readouterr().out
    assert "left_most" in out and "right_most" in out and "paired_leftmost" in out
    assert main(["fold", "GGXAAACCC"]) == 2


def test_cli_bias_file(tmp_path, capsys):
    f = tmp_path / "t.txt"
    f.write_text("unpaired_general = 0.25 0.25 0.25 0.25\n")
    assert main(["solve", "(((...)))", "--bias-file", str(f)]) == 0
    assert json.loads(capsys.readouterr().out)["solved"]
