import csv
import json
import subprocess
import sys

import pytest

from securecomp import fixtures
from securecomp.cli import main
from securecomp.instance import ParseError, digest, loads_instance, parse_instance, serialize_instance
from securecomp.probcore import ValidationError

FIX = {name: str(fixtures.path(name)) for name in fixtures.NAMES}


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, (json.loads(out) if out.strip() else None), err


def write(tmp_path, doc, name="inst.json"):
    p = tmp_path / name
    p.write_text(json.dumps(doc) if isinstance(doc, dict) else doc)
    return str(p)


MINIMAL = {"x_symbols": ["a"], "y_symbols": ["b"], "z_symbols": ["c"], "p_xy": [[1.0]], "p_z_given_xy": [[[1.0]]]}


# -- parsing ------------------------------------------------------------------------

def test_minimal_instance(tmp_path, capsys):
    code, rep, _ = run(capsys, "characterize", write(tmp_path, MINIMAL))
    assert code == 0
    assert rep["results"]["certificate"]["computable"] and rep["results"]["rate_bits"] == 0.0


def test_and_fixture_parses_with_full_support():
    inst = parse_instance(FIX["and"])
    assert inst.full_support and inst.shape == (2, 2, 2)


def test_row_summing_to_point_nine(tmp_path, capsys):
    doc = json.loads(json.dumps(MINIMAL))
    doc["z_symbols"] = ["c", "d"]
    doc["p_z_given_xy"] = [[[0.5, 0.4]]]
    with pytest.raises(ValidationError, match=r"row x='a', y='b'"):
        parse_instance(write(tmp_path, doc))
    code, rep, err = run(capsys, "characterize", write(tmp_path, doc))
    assert code == 2 and rep is None and "row x='a', y='b'" in err


@pytest.mark.parametrize(
    "text, pattern",
    [
        ('{"x_symbols": ["a"],\n  "p_xy": [[1.0]', r"line 2"),
        ('{"x_symbols": ["a"]}', r"missing field"),
        ('{"x_symbols": ["a","a"], "y_symbols": ["b"], "z_symbols": ["c"], "p_xy": [[0.5],[0.5]],'
         ' "p_z_given_xy": [[[1.0]],[[1.0]]]}', r"x_symbols"),
        ('{"x_symbols": ["a"], "y_symbols": ["b"], "z_symbols": ["c"], "p_xy": [[1.0, 0.0]],'
         ' "p_z_given_xy": [[[1.0]]]}', r"p_xy"),
    ],
)
def test_malformed_files(text, pattern):
    with pytest.raises((ParseError, ValidationError), match=pattern):
        loads_instance(text)


def test_roundtrip_digest():
    for name in fixtures.NAMES:
        inst = fixtures.load(name)
        again = loads_instance(serialize_instance(inst))
        assert digest(again) == digest(inst)
        assert again.x.symbols == inst.x.symbols


def test_declaration_order_is_kept(tmp_path):
    doc = dict(MINIMAL, x_symbols=["zeta", "alpha"], p_xy=[[0.5], [0.5]], p_z_given_xy=[[[1.0]], [[1.0]]])
    assert parse_instance(write(tmp_path, doc)).x.symbols == ("zeta", "alpha")


# -- characterize -------------------------------------------------------------------------

def test_characterize_and(capsys):
    code, rep, _ = run(capsys, "characterize", FIX["and"])
    assert code == 0
    ref = rep["results"]["certificate"]["refutation"]
    assert not rep["results"]["certificate"]["computable"]
    assert ref["kind"] == "class_count" and ref["detail"] == "k(0)=1 != k(1)=2"
    assert rep["results"]["rate_bits"] == "inf"


@pytest.mark.parametrize("name, rate", [("identity", 1.0), ("x_independent", 0.0)])
def test_characterize_rates(capsys, name, rate):
    code, rep, _ = run(capsys, "characterize", FIX[name])
    assert code == 0 and rep["results"]["rate_bits"] == pytest.approx(rate, abs=1e-9)
    assert rep["instance"]["digest"] == digest(fixtures.load(name))
    assert rep["command"] == ["characterize", FIX[name]]
    assert {"tool_version", "seeds", "wall_clock_s"} <= set(rep)


def test_characterize_precondition(tmp_path, capsys):
    doc = dict(MINIMAL, x_symbols=["a", "b"], p_xy=[[1.0], [0.0]], p_z_given_xy=[[[1.0]], [[1.0]]])
    code, _, err = run(capsys, "characterize", write(tmp_path, doc))
    assert code == 2 and "x='b', y='b'" in err


# -- rate --------------------------------------------------------------------------------

def test_rate_identity_rns(capsys):
    code, rep, _ = run(capsys, "rate", FIX["identity"], "--mode", "rns", "--u-card", "2", "--restarts", "1")
    res = rep["results"]
    assert code == 0 and res["label"] == "upper-bound"
    assert res["rate_bits"] == pytest.approx(1.0, abs=1e-3)


def test_rate_identity_rs_exact(capsys):
    code, rep, _ = run(capsys, "rate", FIX["identity"], "--mode", "rs", "--u-card", "2", "--max-iters", "50")
    assert code == 0 and rep["results"]["label"] == "exact"
    assert rep["results"]["rate_bits"] == pytest.approx(1.0, abs=1e-9)
    assert rep["results"]["best_aux"] is not None


def test_rate_and_rs_infinite(capsys):
    code, rep, _ = run(capsys, "rate", FIX["and"], "--mode", "rs")
    assert code == 0 and rep["results"]["rate_bits"] == "inf"


def test_rate_infeasible_exit(capsys):
    code, rep, _ = run(capsys, "rate", FIX["identity"], "--mode", "rns", "--u-card", "1", "--max-iters", "10")
    assert code == 4 and rep["results"]["status"] == "infeasible"


def test_rate_deterministic(capsys):
    argv = ("rate", FIX["bsc"], "--mode", "rns", "--u-card", "3", "--restarts", "1", "--max-iters", "40", "--seed", "3")
    _, a, _ = run(capsys, *argv)
    _, b, _ = run(capsys, *argv)
    a.pop("wall_clock_s"), b.pop("wall_clock_s")
    assert a == b


# -- simulate ------------------------------------------------------------------------------

def test_simulate_bsc(capsys):
    code, rep, _ = run(capsys, "simulate", FIX["bsc"], "--rounds", "100000", "--seed", "0")
    sim = rep["results"]["simulation"]
    assert code == 0 and sim["empirical_tv"] <= 0.02 and sim["leakage_estimate"] <= 0.01
    assert rep["results"]["analytic_leakage_bits"] <= 1e-12


def test_simulate_one_round_transcript(tmp_path, capsys):
    out = tmp_path / "t.txt"
    code, _, _ = run(capsys, "simulate", FIX["rank_one_3x2x3"], "--rounds", "1", "--transcript-out", str(out))
    lines = out.read_text().splitlines()
    assert code == 0 and len(lines) == 1 and len(lines[0].split()) == 4


def test_simulate_and_is_contract_violation(capsys):
    code, rep, err = run(capsys, "simulate", FIX["and"], "--rounds", "10")
    assert code == 2 and rep is None and "ContractViolation" in err


# -- osrb ---------------------------------------------------------------------------------

def test_osrb_sweep_table(tmp_path, capsys):
    out = tmp_path / "sweep.csv"
    code, rep, _ = run(capsys, "osrb", FIX["identity"], "--n-list", "4,8", "--grid", "0:1.5,0.3:1.2",
                       "--trials", "200", "--seed", "1", "--out", str(out))
    rows = list(csv.DictReader(out.open()))
    assert code == 0 and len(rows) == 4 and len(rep["results"]["cells"]) == 4
    assert [(r["n"], r["rate_f"]) for r in rows][:2] == [("4", "0.0"), ("8", "0.0")]
    assert all(0.0 <= float(r[c]) <= 1.0 for r in rows for c in ("decode_error_rate", "empirical_tv"))


def test_osrb_single_cell(capsys):
    code, rep, _ = run(capsys, "osrb", FIX["identity"], "--n-list", "4", "--rate-f", "0", "--rate-m", "1",
                       "--trials", "20")
    assert code == 0 and rep["results"]["cells"][0]["n"] == 4


def test_osrb_empty_grid_is_usage_error(capsys):
    with pytest.raises(SystemExit) as e:
        main(["osrb", FIX["identity"], "--n-list", "4", "--grid", "", "--trials", "5"])
    assert e.value.code == 2


def test_osrb_unwritable_out(tmp_path, capsys):
    code, _, err = run(capsys, "osrb", FIX["identity"], "--n-list", "4", "--rate-f", "0", "--rate-m", "1",
                       "--trials", "5", "--out", str(tmp_path / "missing" / "t.csv"))
    assert code != 0 and "cannot write" in err


def test_osrb_budget_exit(capsys):
    code, _, err = run(capsys, "osrb", FIX["identity"], "--n-list", "30", "--rate-f", "0", "--rate-m", "1",
                       "--trials", "5")
    assert code == 3 and "budget" in err


def test_osrb_uncertified_needs_rns_aux(capsys):
    code, _, _ = run(capsys, "osrb", FIX["and"], "--n-list", "3", "--rate-f", "0", "--rate-m", "1", "--trials", "5")
    assert code == 2


def test_report_file_and_module_entry(tmp_path):
    rep = tmp_path / "r.json"
    proc = subprocess.run(
        [sys.executable, "-m", "securecomp", "--report", str(rep), "characterize", FIX["bsc"]],
        capture_output=True, text=True, check=False,
    )
    assert proc.returncode == 0
    assert json.loads(rep.read_text())["results"]["certificate"]["k"] == 2
