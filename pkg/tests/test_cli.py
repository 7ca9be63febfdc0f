import json
import os

import pytest

from hybridlogic.cli import main
from hybridlogic.kernel import DATA_DIR

FIXTURES = os.path.join(os.path.dirname(__file__), "fixtures")

MODEL = """sig lemma.sig
world s0 s1 : s
world t0 : t
rel f s0 t0 s1
val q = {s1}
val p = {t0}
val j = {t0}
val k = {t0}
val m = {t0}
val i = {s0}
"""


@pytest.fixture
def model_file(tmp_path):
    path = tmp_path / "two.mod"
    path.write_text(MODEL)
    return str(path)


def run(capsys, *argv):
    code = main(list(argv))
    return code, capsys.readouterr().out


def run_json(capsys, *argv):
    code, out = run(capsys, "--json", *argv)
    return code, json.loads(out)


def test_sig_check(capsys):
    code, out = run_json(capsys, "sig-check", os.path.join(DATA_DIR, "machine.sig"))
    assert code == 0 and out["ok"]
    assert "Config" in out["sorts"]


def test_sig_check_reports_bad_signature(capsys, tmp_path):
    bad = tmp_path / "bad.sig"
    bad.write_text("sort s\nop f : u -> s\nprop p : s\n")
    code, _ = run(capsys, "sig-check", str(bad))
    assert code == 1


def test_formula_sort(capsys):
    code, out = run(capsys, "formula-sort", "--sig", "lemma.sig", "--expr", "(at j s p)")
    assert (code, out.strip()) == (0, "s")
    code, _ = run(capsys, "formula-sort", "--sig", "lemma.sig", "--expr", "(or p q)")
    assert code == 1


def test_model_check_at_a_world_and_globally(capsys, model_file):
    code, out = run_json(capsys, "model-check", "--model", model_file, "--world", "s0",
                         "--expr", "(op f p q)")
    assert code == 0 and out["holds"]
    code, _ = run(capsys, "model-check", "--model", model_file, "--expr", "q")
    assert code == 1


def test_model_check_with_assignment(capsys, tmp_path):
    sig = tmp_path / "v.sig"
    sig.write_text("sort s\nop f : s -> s\nprop p : s\nsvar x : s\n")
    mod = tmp_path / "v.mod"
    mod.write_text("world a b : s\nrel f a b\n")
    argv = ["model-check", "--model", str(mod), "--sig", str(sig), "--world", "a",
            "--expr", "(op f x)"]
    assert run(capsys, *argv, "--assign", "x=b")[0] == 0
    assert run(capsys, *argv, "--assign", "x=a")[0] == 1
    assert run(capsys, *argv)[0] == 2


def test_frame_check(capsys, model_file):
    code, _ = run(capsys, "frame-check", "--model", model_file, "--expr", "(at j s (nom j))")
    assert code == 0
    code, _ = run(capsys, "frame-check", "--model", model_file, "--expr", "(at j s p)")
    assert code == 1


def test_countermodel(capsys):
    code, out = run_json(capsys, "countermodel", "--sig", "lemma.sig", "--expr", "q")
    assert code == 1 and out["found"]
    code, _ = run(capsys, "countermodel", "--sig", "lemma.sig", "--hyp", "q", "--expr", "q")
    assert code == 0


def test_proof_check_and_ablation(capsys):
    sym = os.path.join(DATA_DIR, "lemma_sym.prf")
    code, out = run_json(capsys, "proof-check", sym)
    assert code == 0 and out["ok"]
    code, out = run_json(capsys, "proof-check", sym, "--without", "lemma_nom")
    assert code == 1
    assert out["diagnostics"][0]["kind"] == "UnknownExtension"


def test_proof_check_missing_file_is_a_usage_error(capsys, tmp_path):
    code, _ = run(capsys, "proof-check", str(tmp_path / "absent.prf"))
    assert code == 2


def test_smc_run(capsys):
    code, out = run(capsys, "smc-run", os.path.join(DATA_DIR, "sum.smc"), "--mem", "n=5")
    assert (code, out.strip()) == (0, "n=5, s=15, i=6")
    code, out = run_json(capsys, "smc-run", os.path.join(DATA_DIR, "sum.smc"), "--mem", "n=3")
    assert out["mem"] == {"i": "4", "n": "3", "s": "6"}


def test_smc_run_failures(capsys, tmp_path):
    loop = tmp_path / "loop.smc"
    loop.write_text("while 0 <= 1 do skip")
    assert run(capsys, "smc-run", str(loop), "--fuel", "100")[0] == 1
    stuck = tmp_path / "stuck.smc"
    stuck.write_text("x := y")
    assert run(capsys, "smc-run", str(stuck))[0] == 1
    bad = tmp_path / "bad.smc"
    bad.write_text("x := := 1")
    assert run(capsys, "smc-run", str(bad))[0] == 2
    assert run(capsys, "smc-run", os.path.join(DATA_DIR, "sum.smc"), "--mem", "n=x")[0] == 2


def test_smc_trace_lines_are_json(capsys):
    code, out = run(capsys, "smc-trace", os.path.join(DATA_DIR, "sum.smc"), "--mem", "n=1")
    lines = [json.loads(line) for line in out.splitlines()]
    assert code == 0
    assert lines[-1]["status"] == "halted"
    assert {"Aint", "Aasgn", "A++"} <= {r.get("axiom") for r in lines}
    assert any("certificate" in r for r in lines)


def test_verify_sum_writes_a_checkable_script(capsys, tmp_path):
    out = str(tmp_path / "sum.prf")
    code, _ = run(capsys, "verify-sum", "-o", out)
    assert code == 0
    assert run(capsys, "proof-check", out)[0] == 0
    code, report = run_json(capsys, "proof-check", out, "--without", "AInd")
    assert code == 1 and report["diagnostics"][0]["kind"] == "UnknownExtension"


def test_verify_goal_file(capsys, tmp_path):
    out = str(tmp_path / "count.prf")
    code, _ = run(capsys, "verify", os.path.join(FIXTURES, "count.goal"), "-o", out)
    assert code == 0
    assert run(capsys, "proof-check", out)[0] == 0


def test_verify_reports_an_unprovable_goal(capsys, tmp_path):
    goal = tmp_path / "wrong.goal"
    goal.write_text("pre: (op cfg vs mem)\nprogram: x := 1\npost: (op cfg vs (op set mem x 2))\n")
    assert run(capsys, "verify", str(goal))[0] == 1


def test_json_flag_after_the_subcommand(capsys):
    code, out = run(capsys, "sig-check", os.path.join(DATA_DIR, "lemma.sig"), "--json")
    assert code == 0 and json.loads(out)["ok"]


def test_unknown_command_is_a_usage_error(capsys):
    assert main(["frobnicate"]) == 2
    capsys.readouterr()
