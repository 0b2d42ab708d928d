import csv
import io
import json

import pytest

from pathid.cli import main


def run(capsys, *argv):
    rc = main(list(argv))
    out, err = capsys.readouterr()
    return rc, out, err


def test_state_lists_terms_and_audit(capsys):
    rc, out, err = run(capsys, "state", "fig1b.exp")
    assert rc == 0
    data = json.loads(out)
    assert data["n_terms"] == 11
    assert sum(t["kept"] for t in data["term_report"]) == 2
    assert "manifest:" in err


def test_state_order_override(capsys):
    rc, out, err = run(capsys, "state", "fig1b.exp", "--order", "1")
    assert rc == 0
    assert json.loads(out)["n_terms"] == 5
    assert "warning" in err


def test_entangle_threefold(capsys):
    rc, out, _ = run(capsys, "entangle", "fig1c.exp")
    assert rc == 0
    m = json.loads(out)["metrics"]
    assert m["fidelity"] == pytest.approx(0.96725, abs=1e-5)
    assert set(json.loads(out)["joint_probabilities"]) >= {"HVxHV", "DAxDA", "RLxRL"}


def test_chsh_exact_and_sampled(capsys):
    rc, out, _ = run(capsys, "chsh", "fig1b.exp", "--gamma", "0.607", "--shots", "400", "--seed", "1")
    assert rc == 0
    data = json.loads(out)
    assert data["exact"]["S"] == pytest.approx(2.2724, abs=5e-4)
    assert data["sampled"]["sigma_S"] > 0
    assert len(data["sampled"]["records"]) == 4


def test_sweep_csv(capsys):
    rc, out, _ = run(capsys, "sweep", "fig1b.exp", "--steps", "5")
    assert rc == 0
    rows = list(csv.reader(io.StringIO(out)))
    assert len(rows) == 6


def test_scan_reports_visibility(capsys):
    rc, out, err = run(capsys, "scan", "swapfree_phase.exp", "--gamma", "0.79")
    assert rc == 0
    assert "DD: V = 0.7900" in err
    assert out.startswith("phi_rad,p_dd")


def test_scan_without_phase_element(capsys):
    rc, _, err = run(capsys, "scan", "fig1b.exp")
    assert rc == 2
    assert "phase" in err


def test_ratio(capsys):
    rc, out, _ = run(capsys, "ratio", "--cc", "32.9,1.0,1.2,33.3")
    assert rc == 0
    assert json.loads(out)["ratio"] == pytest.approx(0.181922, abs=1e-6)


def test_tomo_small(capsys, tmp_path):
    out = tmp_path / "t.json"
    rc, _, _ = run(capsys, "tomo", "fig1b.exp", "--shots", "1e4", "--mc", "3", "--out", str(out))
    assert rc == 0
    data = json.loads(out.read_text())
    assert data["metrics"]["fidelity"]["sigma"] > 0
    manifest = json.loads((tmp_path / "t.json.manifest.json").read_text())
    assert manifest["command"] == "tomo" and manifest["seed"] == 0


@pytest.mark.parametrize("argv", [
    ["state", "missing.exp"],
    ["ratio", "--cc", "1,2,3"],
    ["ratio", "--cc", "1,0,1,1"],
    ["entangle", "fig1b.exp", "--gamma", "1.5"],
    ["tomo", "fig1b.exp", "--shots", "0"],
])
def test_input_errors_exit_2(capsys, argv):
    rc, _, err = run(capsys, *argv)
    assert rc == 2
    assert err.startswith("error:") or "warning" in err


def test_parse_error_exit_2(capsys, tmp_path):
    bad = tmp_path / "bad.exp"
    bad.write_text("source P1 signal=1:Q idler=2:V eps=0.1\n")
    rc, _, err = run(capsys, "state", str(bad))
    assert rc == 2
    assert "line 1" in err


def test_empty_postselection_exit_1(capsys, tmp_path):
    spec = tmp_path / "dark.exp"
    spec.write_text("source P1 signal=1:H idler=3:V eps=0.1\n"
                    "rotator path=4\n"
                    "detect 1=one 4=one\n")
    rc, _, err = run(capsys, "entangle", str(spec))
    assert rc == 1
    assert "numerical failure" in err


def test_stdin_spec(capsys, monkeypatch):
    monkeypatch.setattr("sys.stdin", io.StringIO("source P1 signal=1:H idler=2:V eps=0.1\n"))
    rc, out, _ = run(capsys, "state", "-")
    assert rc == 0
    assert json.loads(out)["n_terms"] == 2


def test_rerun_is_byte_identical(tmp_path):
    outs = []
    for k in range(2):
        path = tmp_path / f"c{k}.json"
        assert main(["chsh", "fig1b.exp", "--shots", "1000", "--seed", "42", "--out", str(path)]) == 0
        outs.append(path.read_bytes())
    assert outs[0] == outs[1]
