import json

import pytest

from detachment.cli import BENCH_HEADER, main, read_bench_csv
from detachment.generator import StatsReport
from detachment.network import load_circles, load_weights, save_circles


@pytest.fixture
def t2_file(tmp_path, t2):
    path = tmp_path / "t2.json"
    save_circles(t2, path)
    return str(path)


def run_json(capsys, argv):
    assert main(argv) == 0
    return json.loads(capsys.readouterr().out)


def test_generate_writes_three_files(tmp_path, capsys):
    out = tmp_path / "g"
    assert main(["generate", "--n", "320", "--paper-profile", "--seed", "3", "--out", str(out)]) == 0
    assert "circles=35" in capsys.readouterr().out
    circles = load_circles(out / "circles.json")
    weights = load_weights(out / "weights.csv")
    data = json.loads((out / "stats.json").read_text())
    stats = StatsReport.from_json(data["stats"])
    assert stats.n_circles == len(circles) == 35
    assert stats.n_edges == len(weights)
    assert stats.bbn_component_count == 1
    assert all(0.0 <= w <= 1.0 for w in weights.values())


def test_generate_is_deterministic(tmp_path):
    for name in ("a", "b"):
        assert main(["generate", "--n", "150", "--paper-profile", "--seed", "9", "--out", str(tmp_path / name)]) == 0
    for f in ("circles.json", "weights.csv", "stats.json"):
        assert (tmp_path / "a" / f).read_bytes() == (tmp_path / "b" / f).read_bytes()


@pytest.mark.parametrize("n", ["1", "4"])
def test_generate_infeasible(tmp_path, n):
    assert main(["generate", "--n", n, "--paper-profile", "--out", str(tmp_path / "x")]) == 3


def test_generate_needs_ratios(tmp_path):
    assert main(["generate", "--n", "100", "--out", str(tmp_path / "x")]) == 2


def test_stats(capsys, t2_file):
    data = run_json(capsys, ["stats", "--circles", t2_file])
    assert data["n_bridges"] == 2 and data["n_links"] == 4


def test_epoi_exact(capsys, t2_file):
    data = run_json(capsys, ["epoi", "--circles", t2_file, "--flat-weight", "0.5", "--exact"])
    assert data["value"] == pytest.approx(5 / 12, abs=1e-12)
    assert data["exact"] is True


def test_epoi_zero_weight(capsys, t2_file):
    data = run_json(capsys, ["epoi", "--circles", t2_file, "--flat-weight", "0", "--trials", "100"])
    assert data["value"] == 0.0


def test_epoi_monte_carlo(capsys, t2_file):
    data = run_json(capsys, ["epoi", "--circles", t2_file, "--flat-weight", "0.5", "--trials", "100000", "--seed", "4"])
    assert abs(data["value"] - 5 / 12) < 0.01
    assert data["std_error"] > 0


def test_epoi_weight_file_and_distribution(tmp_path, capsys, t2_file):
    wfile = tmp_path / "w.csv"
    wfile.write_text("u,v,w\na,b,1.0\n")
    pfile = tmp_path / "p.json"
    pfile.write_text(json.dumps({"I1": 1.0, "I2": 0.0, "I3": 0.0}))
    data = run_json(capsys, ["epoi", "--circles", t2_file, "--weights", str(wfile), "--flat-weight", "0", "--p", str(pfile), "--exact"])
    # a reaches b surely, nothing else moves: (2 - 2) / 2 = 0; b -> a adds nothing new
    assert data["value"] == 0.0


def test_epoi_missing_weight(capsys, t2_file):
    assert main(["epoi", "--circles", t2_file, "--exact"]) == 2


@pytest.mark.parametrize("content", ["{", '{"circles": []}', '{"circles": {"I1": ["a", "a"]}}', '{"circles": {"I1": []}}'])
def test_malformed_circles(tmp_path, content):
    path = tmp_path / "bad.json"
    path.write_text(content)
    assert main(["epoi", "--circles", str(path), "--flat-weight", "0.5"]) == 2


def test_bad_weight_value(tmp_path, t2_file):
    wfile = tmp_path / "w.csv"
    wfile.write_text("u,v,w\na,b,1.5\n")
    assert main(["epoi", "--circles", t2_file, "--weights", str(wfile), "--flat-weight", "0.5"]) == 2


def test_bad_distribution(tmp_path, t2_file):
    pfile = tmp_path / "p.json"
    pfile.write_text(json.dumps({"I1": 0.5, "I2": 0.2}))
    assert main(["epoi", "--circles", t2_file, "--flat-weight", "0.5", "--p", str(pfile)]) == 2


def test_missing_file():
    assert main(["epoi", "--circles", "/nonexistent/c.json", "--flat-weight", "0.5"]) == 4


def test_usage_error():
    with pytest.raises(SystemExit) as exc:
        main(["optimize", "--circles", "x.json"])
    assert exc.value.code == 2


def test_optimize_greedy_exact(capsys, t2_file):
    data = run_json(capsys, ["optimize", "--circles", t2_file, "--flat-weight", "0.5", "--method", "greedy", "--exact"])
    assert data["detachments"] == [{"vertex": "b", "circle": "I2"}]
    assert data["final_epoi"] == pytest.approx(1 / 18, abs=1e-12)


def test_optimize_exhaustive(tmp_path, capsys, t2_file):
    out = tmp_path / "after.json"
    data = run_json(capsys, ["optimize", "--circles", t2_file, "--flat-weight", "0.5", "--method", "exhaustive", "--m", "2", "--out", str(out)])
    assert data["final_epoi"] == 0.0
    after = load_circles(out)
    assert after["I1"] == {"a"}


def test_optimize_exhaustive_too_many(t2_file):
    assert main(["optimize", "--circles", t2_file, "--flat-weight", "0.5", "--method", "exhaustive", "--m", "99"]) == 3


def test_optimize_mincut(capsys, t2_file):
    data = run_json(capsys, ["optimize", "--circles", t2_file, "--flat-weight", "0.5", "--method", "mincut", "--terminals", "I1,I3", "--exact"])
    assert data["detachments"] == [{"vertex": "b", "circle": "I1"}]
    assert data["terminals"] == ["I1", "I3"]


def test_optimize_mincut_no_bridges(tmp_path):
    path = tmp_path / "c.json"
    path.write_text(json.dumps({"circles": {"I1": ["a", "b"], "I2": ["c"]}}))
    assert main(["optimize", "--circles", str(path), "--flat-weight", "0.5", "--method", "mincut"]) == 3


def test_bench_rows(tmp_path):
    out = tmp_path / "bench.csv"
    code = main(["bench", "--sizes", "100,4", "--trials", "300", "--search-trials", "100", "--seed", "1", "--out", str(out)])
    assert code == 3  # the n = 4 row cannot be generated
    lines = out.read_text().splitlines()
    assert lines[0].startswith("#")
    assert lines[1].split(",") == BENCH_HEADER
    rows = read_bench_csv(out)
    assert [r["n"] for r in rows] == [100, 4]
    good, bad = rows
    assert good["mincut"] >= 1
    assert 0.0 <= good["epoi_greedy"] <= 1.0 and 0.0 <= good["epoi_cut"] <= 1.0
    assert good["ms_cut"] is None  # timing is opt-in
    assert bad["mincut"] is None and bad["epoi_base"] is None


def test_bench_timing(tmp_path):
    out = tmp_path / "bench.csv"
    assert main(["bench", "--sizes", "100", "--trials", "200", "--search-trials", "100", "--timing", "--out", str(out)]) == 0
    (row,) = read_bench_csv(out)
    assert row["ms_cut"] >= 0 and row["ms_greedy"] >= 0
