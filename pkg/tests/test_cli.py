import json
from pathlib import Path

import pytest

from fsdim.cli import main
from fsdim.sequence import champernowne_bits, to_str

MACHINES = Path(__file__).resolve().parent.parent / "machines"
FIG1 = str(MACHINES / "fig1.fsm")


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def run_json(capsys, *argv):
    code, out, err = run(capsys, *argv)
    assert code == 0, err
    return json.loads(out)


def test_stationary_figure1(capsys):
    rep = run_json(capsys, "stationary", "--machine", FIG1)
    assert list(rep["stationary"]) == ["a", "b", "c", "d"]
    assert all(abs(v - 0.25) <= 1e-12 for v in rep["stationary"].values())
    assert rep["config"]["command"] == "stationary"
    assert rep["config"]["machines"] == [FIG1]


def test_stationary_oracle(capsys):
    rep = run_json(capsys, "stationary", "--machine", FIG1, "--oracle", "--method", "power_iteration")
    assert rep["oracle"]["l1_gap"] <= 1e-9


@pytest.mark.slow
def test_dim_diluted(capsys):
    rep = run_json(capsys, "dim", "--gen", "diluted:champernowne", "-n", "1000000",
                   "--family", "blocks:4+phase:2")
    assert 0.45 <= rep["dim_est"] <= 0.55
    assert rep["config"]["n"] == 1000000 and rep["config"]["source"] == "diluted:champernowne"


@pytest.mark.slow
def test_agafonov_tight(capsys):
    rep = run_json(capsys, "agafonov", "--machine", FIG1, "--select", "a,c",
                   "--gen", "diluted:champernowne", "-n", "1000000")
    assert rep["verdict"] == "tight"
    assert rep["lambda"] == pytest.approx(0.5)


def test_identical_argv_identical_output(capsys):
    argv = ["dim", "--gen", "champernowne", "-n", "20000", "--oracle"]
    first = run(capsys, *argv)
    second = run(capsys, *argv)
    assert first == second and first[0] == 0


def test_select_override(capsys):
    x = to_str(champernowne_bits(200))
    for states, lam in (("a", 0.25), ("a,c", 0.5), ("a,c,d", 0.75)):
        rep = run_json(capsys, "select", "--machine", FIG1, "--select", states,
                       "--gen", "diluted:champernowne", "-n", "400")
        assert rep["lambda"] == pytest.approx(lam)
        assert rep["config"]["select"] == states
    assert rep["selected_head"] == x[:64]
    assert rep["selected_length"] == 200


def test_select_writes_parts(capsys, tmp_path):
    sel, comp = tmp_path / "sel.txt", tmp_path / "comp.bits"
    code, _, _ = run(capsys, "select", "--machine", FIG1, "--select", "a,c", "--gen",
                     "diluted:champernowne", "-n", "1008", "--out-selected", str(sel),
                     "--out-complement", str(comp))
    assert code == 0
    assert sel.read_text().strip() == to_str(champernowne_bits(504))
    rep = run_json(capsys, "gen", "--file", str(comp))
    assert rep["bits"] == "0" * 504


def test_gen_roundtrip(capsys, tmp_path):
    out = tmp_path / "x.bits"
    rep = run_json(capsys, "gen", "--gen", "periodic:011", "-n", "16", "--out", str(out))
    assert rep["bits"] == "0110110110110110"
    assert run_json(capsys, "gen", "--file", str(out))["bits"] == rep["bits"]
    code, _, err = run(capsys, "gen", "--gen", "zeros", "-n", "10", "--out", str(out))
    assert code == 2 and "multiple of 8" in err
    code, text, _ = run(capsys, "gen", "--gen", "zeros", "-n", "5", "--format", "text")
    assert text == "00000\n"


def test_analyze_csv_and_jsonl(capsys, tmp_path):
    jl = tmp_path / "trace.jsonl"
    code, out, _ = run(capsys, "analyze", "--machine", FIG1, "--gen", "champernowne", "-n", "1000",
                       "--checkpoints", "list:10,100,1000", "--format", "csv", "--trace-out", str(jl))
    assert code == 0
    lines = out.splitlines()
    assert lines[0] == "n,state,bit,next,count,mass"
    assert {ln.split(",")[0] for ln in lines[1:]} == {"10", "100", "1000"}
    records = [json.loads(ln) for ln in jl.read_text().splitlines()]
    assert [r["n"] for r in records] == [10, 100, 1000]


def test_analyze_json(capsys):
    rep = run_json(capsys, "analyze", "--machine", FIG1, "--gen", "champernowne", "-n", "5000")
    assert rep["irreducible"] is True
    assert rep["ergodic_sets"] == [["a", "b", "c", "d"]]
    assert rep["snapshots"][-1]["n"] == 5000


def test_martingale_accounts(capsys):
    rep = run_json(capsys, "martingale", "--machine", str(MACHINES / "fair.fsm"),
                   "--machine", str(MACHINES / "zero_bettor.fsm"), "--gen", "zeros", "-n", "50",
                   "--oracle")
    assert rep["best_index"] == 1
    assert rep["best_final_log2_capital"] == pytest.approx(49.0)
    for acct, orc in zip(rep["accounts"], rep["oracle"]):
        assert acct["final_log2_capital"] == pytest.approx(orc["direct_log2_capital"], abs=1e-9)


def test_martingale_bankrupt_serializes(capsys):
    rep = run_json(capsys, "martingale", "--machine", str(MACHINES / "zero_bettor.fsm"),
                   "--gen", "champernowne", "-n", "10")
    assert rep["accounts"][0]["final_log2_capital"] == "-inf"


@pytest.mark.parametrize("argv", [
    ["dim", "--gen", "champernowne", "-n", "10", "--bogus"],
    ["frobnicate"],
    [],
    ["dim", "-n", "10"],
    ["dim", "--gen", "champernowne", "-n", "100", "--format", "csv"],
    ["stationary"],
    ["dim", "--gen", "champernowne", "-n", "100", "--cluster-tol", "0"],
])
def test_usage_errors_exit_1(capsys, argv):
    code, out, err = run(capsys, *argv)
    assert code == 1 and out == ""
    assert err.strip() and "\n" not in err.strip()


def test_data_errors_exit_2(capsys, tmp_path):
    bad = tmp_path / "bad.fsm"
    bad.write_text("states: a b\ntrans: a 0 a\n")
    for argv in (
        ["stationary", "--machine", str(tmp_path / "missing.fsm")],
        ["stationary", "--machine", str(bad)],
        ["dim", "--file", str(tmp_path / "missing.txt"), "-n", "10"],
        ["dim", "--gen", "champernowne", "-n", "100", "--family", "blocks:99"],
        ["agafonov", "--machine", FIG1, "--select", "a,b,c,d", "--gen", "champernowne", "-n", "100"],
        ["martingale", "--machine", FIG1, "--gen", "zeros", "-n", "10"],
    ):
        code, out, err = run(capsys, *argv)
        assert code == 2, argv
        assert out == "" and err.startswith("error:")
