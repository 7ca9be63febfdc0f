"""Acceptance run: one PASS/FAIL line per criterion.

Run with ``pytest tests/test_acceptance.py -v`` or ``python3 tests/test_acceptance.py``.
"""

import io
import json
import os
import sys
import tempfile
import time
from contextlib import redirect_stdout

import pytest

sys.path.insert(0, os.path.dirname(__file__))

import batteries as B  # noqa: E402
from hybridlogic import lemmas  # noqa: E402
from hybridlogic.cli import main  # noqa: E402
from hybridlogic.kernel import DATA_DIR, check_file  # noqa: E402

CRITERIA = {}


def criterion(n, title):
    def register(fn):
        CRITERIA[n] = (title, fn)
        return fn
    return register


def cli(*argv):
    buf = io.StringIO()
    with redirect_stdout(buf):
        code = main(list(argv))
    return code, buf.getvalue()


def _summary(result):
    return f"{result['checked']} checked, {len(result['violations'])} violations"


@criterion(1, "sum program runs to the closed form for n = 0..20 in under 1 s")
def sum_execution():
    program = os.path.join(DATA_DIR, "sum.smc")
    start = time.perf_counter()
    wrong = []
    for vn in range(21):
        code, out = cli("--json", "smc-run", program, "--mem", f"n={vn}", "--fuel", str(10 ** 6))
        got = json.loads(out)["mem"] if code == 0 else None
        want = {"n": str(vn), "s": str(vn * (vn + 1) // 2), "i": str(vn + 1)}
        if got != want:
            wrong.append(vn)
    elapsed = time.perf_counter() - start
    return not wrong and elapsed < 1.0, f"{21 - len(wrong)}/21 exact, {elapsed:.2f}s"


@criterion(2, "verify-sum script checks; dropping AInd or Dwhile fails at a named step; under 5 s")
def sum_proof():
    with tempfile.TemporaryDirectory() as tmp:
        out = os.path.join(tmp, "sum.prf")
        start = time.perf_counter()
        made, _ = cli("verify-sum", "-o", out)
        checked, _ = cli("proof-check", out)
        elapsed = time.perf_counter() - start
        failures = {}
        for label in ("AInd", "Dwhile"):
            code, text = cli("--json", "proof-check", out, "--without", label)
            diag = json.loads(text)["diagnostics"]
            if code == 1 and diag and diag[0]["step"] > 0 and label in diag[0]["detail"]:
                failures[label] = diag[0]["step"]
    ok = made == 0 and checked == 0 and len(failures) == 2 and elapsed < 5.0
    where = ", ".join(f"without {k}: step {v}" for k, v in failures.items())
    return ok, f"check exit {checked}, {where}, {elapsed:.2f}s"


@criterion(3, "15 schemas x 200 instances valid in 20 random models each, under 60 s")
def soundness():
    start = time.perf_counter()
    r = B.schema_soundness(instances=200, models=20)
    elapsed = time.perf_counter() - start
    full = len(r["per_schema"]) == 15 and all(v == 200 for v in r["per_schema"].values())
    return full and not r["violations"] and elapsed < 60, f"{_summary(r)}, {elapsed:.1f}s"


@criterion(4, "agreement and substitution lemmas, 1000 triples each")
def lemmas_4():
    a = B.agreement(trials=1000)
    v = B.substitution(trials=1000, kind="variable")
    n = B.substitution(trials=1000, kind="nominal", seed=13)
    ok = not (a["violations"] or v["violations"] or n["violations"])
    return ok, (f"agreement {_summary(a)}; variable substitution {_summary(v)}; "
                f"nominal substitution {_summary(n)}")


@criterion(5, "pure formulas: frame validity equals the named-model criterion")
def pure_formulas():
    p = B.pure_named(trials=200)
    q = B.quantified_pure_named(trials=100)
    ok = not (p["violations"] or q["violations"]) and q["max_quantifiers"] <= 2
    return ok, f"quantifier-free {_summary(p)}; forall-exists {_summary(q)}"


@criterion(6, "nominal conjunction items i1, i2, i3 model-valid on 300 instances each")
def nominal_conjunction():
    rs = {item: B.nominal_conjunction(item, trials=300) for item in ("i1", "i2", "i3")}
    ok = not any(r["violations"] for r in rs.values())
    return ok, "; ".join(f"{k} {_summary(r)}" for k, r in rs.items())


@criterion(7, "500 reachable machine states: emitted step formulas match their axioms")
def machine_fidelity():
    r = B.machine_fidelity(states=500)
    return not r["violations"] and r["checked"] == 500, _summary(r)


@criterion(8, "shipped Nom, Sym, Bridge and bridge item 2 scripts kernel-check")
def lemma_scripts():
    results = {}
    for name in lemmas.LEMMA_FILES:
        _, report = check_file(os.path.join(DATA_DIR, name))
        results[name] = report.ok
    return all(results.values()) and len(results) == 4, ", ".join(
        f"{k}: {'ok' if v else 'failed'}" for k, v in results.items())


@criterion(9, "memory canonicalisation over 1000 write sequences")
def memory():
    r = B.memory_laws(trials=1000)
    return not r["violations"], _summary(r)


def evaluate(n):
    title, fn = CRITERIA[n]
    try:
        ok, detail = fn()
    except Exception as exc:  # a crash is a failure of the criterion, not of the harness
        ok, detail = False, f"{type(exc).__name__}: {exc}"
    return ok, f"criterion {n}: {'PASS' if ok else 'FAIL'} - {title} [{detail}]"


@pytest.mark.parametrize("n", sorted(CRITERIA))
def test_criterion(n, capsys):
    ok, line = evaluate(n)
    with capsys.disabled():
        print("\n" + line)
    assert ok, line


if __name__ == "__main__":
    results = [evaluate(n) for n in sorted(CRITERIA)]
    for _, line in results:
        print(line)
    sys.exit(0 if all(ok for ok, _ in results) else 1)
