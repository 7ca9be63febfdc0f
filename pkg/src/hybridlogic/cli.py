"""Command-line entry point: ``hybridlogic <command> ...``.

Exit status is 0 on success (valid, ok, halted), 1 on a negative answer
(invalid, countermodel found, check failure, stuck machine) and 2 on usage
or input-format errors.
"""

import argparse
from dataclasses import replace
import json
import os
import sys
import time

from . import formulas as F
from . import hoare
from . import semantics as S
from . import smc as M
from . import smc_logic as L
from .arith import OracleError
from .kernel import ScriptError, check_proof, load_script, render_script, resolve_path
from .sexpr import ParseError, format_formula, parse_formula
from .signature import SignatureError, load_signature
from .tactics import TacticError

OK, NEGATIVE, USAGE = 0, 1, 2


class UsageError(Exception):
    pass


def _emit(args, payload, text):
    if args.json:
        print(json.dumps(payload, sort_keys=True))
    elif text is not None:
        print(text)


def _read(path):
    try:
        with open(path) as fh:
            return fh.read()
    except OSError as exc:
        raise UsageError(f"cannot read {path}: {exc.strerror}") from None


def _signature(path, base_dir=None):
    try:
        return load_signature(resolve_path(path, base_dir))
    except ScriptError as exc:
        raise UsageError(str(exc)) from None


def _formula_arg(args, sig, expected=None):
    """The formula given by ``--formula FILE`` or ``--expr TEXT``."""
    if args.expr is not None:
        text = args.expr
    elif args.formula is not None:
        text = _read(args.formula)
    else:
        raise UsageError("give --formula FILE or --expr TEXT")
    return parse_formula(text.strip(), sig, expected)


def _model(args):
    text = _read(args.model)
    sig_path = args.sig or S.model_signature_path(text)
    if sig_path is None:
        raise UsageError("the model names no signature; pass --sig")
    sig = _signature(sig_path, os.path.dirname(os.path.abspath(args.model)))
    return sig, S.parse_model(text, sig)


def _assignment(text):
    out = {}
    for part in filter(None, (p.strip() for p in (text or "").split(","))):
        name, sep, world = part.partition("=")
        if not sep:
            raise UsageError(f"assignment {part!r} is not name=world")
        out[name.strip()] = world.strip()
    return out


# ------------------------------------------------------------- commands

def cmd_sig_check(args):
    try:
        sig = load_signature(args.file)
    except SignatureError as exc:
        _emit(args, {"ok": False, "error": type(exc).__name__, "detail": str(exc)},
              f"invalid: {type(exc).__name__}: {exc}")
        return NEGATIVE
    counts = {kind: len(names) for kind, names in sig.symbols.items()}
    _emit(args, {"ok": True, "sorts": list(sig.sorts), "operators": len(sig.ops), "symbols": counts},
          f"ok: {len(sig.sorts)} sorts, {len(sig.ops)} operators, "
          + ", ".join(f"{n} {k}" for k, n in counts.items()))
    return OK


def cmd_formula_sort(args):
    sig = _signature(args.sig)
    try:
        f = _formula_arg(args, sig)
    except (ParseError, F.FormulaError) as exc:
        _emit(args, {"ok": False, "error": type(exc).__name__, "detail": str(exc)},
              f"ill-sorted: {exc}")
        return NEGATIVE
    free = sorted(x.name for x in F.free_state_vars(f))
    _emit(args, {"ok": True, "sort": f.sort, "free": free, "pure": F.is_pure(f)}, f.sort)
    return OK


def cmd_model_check(args):
    sig, model = _model(args)
    f = _formula_arg(args, sig)
    if args.world is None:
        result = S.valid_in_model(model, f)
        payload = {"valid": result}
    else:
        result = S.satisfies(model, _assignment(args.assign), args.world, f)
        payload = {"world": args.world, "holds": result}
    _emit(args, payload, "true" if result else "false")
    return OK if result else NEGATIVE


def cmd_frame_check(args):
    sig, model = _model(args)
    f = _formula_arg(args, sig)
    result = S.valid_in_frame(model.frame, f, model.valuation)
    _emit(args, {"frame_valid": result}, "valid" if result else "invalid")
    return OK if result else NEGATIVE


def cmd_countermodel(args):
    sig = _signature(args.sig)
    f = _formula_arg(args, sig)
    gamma = [parse_formula(h, sig, f.sort) for h in args.hyp]
    found = S.bounded_countermodel(sig, gamma, f, args.max_worlds)
    if found is None:
        _emit(args, {"found": False, "max_worlds": args.max_worlds},
              f"no countermodel with at most {args.max_worlds} worlds per sort")
        return OK
    model, world, g = found
    text = S.render_model(model) + f"# falsified at {world}"
    if g:
        text += " with " + ", ".join(f"{x}={w}" for x, w in sorted(g.items()))
    _emit(args, {"found": True, "model": model.to_dict(), "world": world, "assignment": g}, text)
    return NEGATIVE


def cmd_proof_check(args):
    try:
        script = load_script(args.file)
    except (ScriptError, OSError) as exc:
        _emit(args, {"ok": False, "diagnostics": [{"step": 0, "kind": "ScriptError",
                                                    "detail": str(exc)}]},
              f"error: {exc}")
        return USAGE
    if args.without:
        missing = [lab for lab in args.without if lab not in script.extensions]
        if missing:
            raise UsageError(f"no extension labelled {', '.join(missing)}")
        script.extensions = script.extensions.without(*args.without)
    report = check_proof(script)
    lines = [f"{'ok' if report.ok else 'FAILED'}: {report.steps} steps, logic {report.profile}"]
    lines += [f"  {d}" for d in report.diagnostics]
    _emit(args, report.to_dict(), "\n".join(lines))
    return OK if report.ok else NEGATIVE


def _program(args):
    return M.parse_program(_read(args.program))


def _fuel(args):
    return args.fuel if args.fuel is not None else M.default_fuel()


def cmd_smc_run(args):
    program = _program(args)
    mem0 = M.parse_memory(args.mem or "")
    order = list(dict.fromkeys([n for n, _ in mem0] + M.program_variables(program)))
    try:
        final = M.run(program, mem0, _fuel(args))
    except M.Stuck as exc:
        _emit(args, {"status": "stuck", "reason": exc.reason, "detail": exc.detail}, f"stuck: {exc}")
        return NEGATIVE
    except M.OutOfFuel as exc:
        _emit(args, {"status": "out-of-fuel", "steps": exc.steps, "state": exc.state.to_dict()},
              f"out of fuel after {exc.steps} steps")
        return NEGATIVE
    payload = {"status": "halted", "steps": final.steps,
               "mem": {n: M.show_value(v) for n, v in final.mem},
               "vs": [M.show_value(v) for v in final.vs]}
    _emit(args, payload, M.show_memory(final.mem, order))
    return OK


def cmd_smc_trace(args):
    program = _program(args)
    mem0 = M.parse_memory(args.mem or "")

    def record(n, rule, before, after):
        rec = {"step": n, "rule": rule, "before": before.to_dict()}
        try:
            label, inst = L.emit_axiom_instance(before, after)
            rec["axiom"] = label
            if args.instances:
                rec["instance"] = format_formula(inst)
        except L.DerivedItemStep as exc:
            rec["axiom"] = None
            rec["certificate"] = exc.certificate
        print(json.dumps(rec, sort_keys=True))

    try:
        final = M.run(program, mem0, _fuel(args), record)
    except (M.Stuck, M.OutOfFuel) as exc:
        print(json.dumps({"status": type(exc).__name__.lower(), "detail": str(exc)}))
        return NEGATIVE
    print(json.dumps({"status": "halted", "steps": final.steps,
                      "mem": {n: M.show_value(v) for n, v in final.mem}}, sort_keys=True))
    return OK


def _write_script(prover, out, comment):
    """Write the script (and a signature file if program variables extend it)."""
    script = prover.pb.script
    if prover.sig != L.machine_signature():
        sig_name = os.path.splitext(os.path.basename(out))[0] + ".sig"
        with open(os.path.join(os.path.dirname(os.path.abspath(out)), sig_name), "w") as fh:
            fh.write(prover.sig.render())
        script.sig_path = sig_name
    with open(out, "w") as fh:
        fh.write(render_script(script, comment))


def _verify(args, goal, comment):
    start = time.perf_counter()
    prover = hoare.HoareProver(M.program_variables(goal.program), check=False)
    try:
        prover.prove_goal(goal)
    except (hoare.HoareError, OracleError, TacticError, F.FormulaError) as exc:
        _emit(args, {"ok": False, "error": type(exc).__name__, "detail": str(exc)},
              f"cannot build a proof: {type(exc).__name__}: {exc}")
        return NEGATIVE
    script = prover.pb.script
    if args.out:
        _write_script(prover, args.out, comment)
    if args.without:
        script = replace(script, extensions=script.extensions.without(*args.without))
    report = check_proof(script)
    elapsed = time.perf_counter() - start
    payload = report.to_dict()
    payload.update(seconds=round(elapsed, 3), script=args.out)
    lines = [f"{'ok' if report.ok else 'FAILED'}: {report.steps} steps in {elapsed:.2f}s"]
    lines += [f"  {d}" for d in report.diagnostics]
    if report.ok:
        lines.append("  " + format_formula(report.conclusion))
    if args.out:
        lines.append(f"  written to {args.out}")
    _emit(args, payload, "\n".join(lines))
    return OK if report.ok else NEGATIVE


def cmd_verify(args):
    try:
        goal = hoare.load_goal(args.goal)
    except OSError as exc:
        raise UsageError(f"cannot read {args.goal}: {exc.strerror}") from None
    return _verify(args, goal, f"goal {os.path.basename(args.goal)}")


def cmd_verify_sum(args):
    return _verify(args, hoare.sum_goal(), hoare.SUM_HEADER)


# ---------------------------------------------------------------- parser

def build_parser():
    p = argparse.ArgumentParser(prog="hybridlogic",
                                description="Many-sorted hybrid modal logic toolkit.")
    p.add_argument("--json", action="store_true", help="machine-readable output")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--json", action="store_true", default=argparse.SUPPRESS,
                        help="machine-readable output")
    sub = p.add_subparsers(dest="command", required=True)
    add = sub.add_parser

    def parser_for(name, **kw):
        return add(name, parents=[common], **kw)

    def formula_opts(q):
        q.add_argument("--formula", help="file holding one S-expression formula")
        q.add_argument("--expr", help="formula text given inline")

    q = parser_for("sig-check", help="validate a signature file")
    q.add_argument("file")
    q.set_defaults(run=cmd_sig_check)

    q = parser_for("formula-sort", help="sort-check a formula")
    q.add_argument("--sig", required=True)
    formula_opts(q)
    q.set_defaults(run=cmd_formula_sort)

    q = parser_for("model-check", help="evaluate a formula in a finite model")
    q.add_argument("--model", required=True)
    q.add_argument("--sig", help="signature file (default: the model's 'sig' line)")
    q.add_argument("--world", help="world to evaluate at; omitted means validity in the model")
    q.add_argument("--assign", help="state-variable assignment, x=w1,y=w2")
    formula_opts(q)
    q.set_defaults(run=cmd_model_check)

    q = parser_for("frame-check", help="validity in the frame underlying a model")
    q.add_argument("--model", required=True)
    q.add_argument("--sig")
    formula_opts(q)
    q.set_defaults(run=cmd_frame_check)

    q = parser_for("countermodel", help="bounded search for a countermodel")
    q.add_argument("--sig", required=True)
    q.add_argument("--hyp", action="append", default=[], help="hypothesis formula text")
    q.add_argument("--max-worlds", type=int, default=2)
    formula_opts(q)
    q.set_defaults(run=cmd_countermodel)

    q = parser_for("proof-check", help="check a proof script")
    q.add_argument("file")
    q.add_argument("--without", action="append", default=[], metavar="LABEL",
                   help="drop an extension before checking (repeatable)")
    q.set_defaults(run=cmd_proof_check)

    for name, fn, text in (("smc-run", cmd_smc_run, "run a program to completion"),
                           ("smc-trace", cmd_smc_trace, "print each machine step as JSON")):
        q = parser_for(name, help=text)
        q.add_argument("program")
        q.add_argument("--mem", help="initial memory, e.g. n=5,x=3")
        q.add_argument("--fuel", type=int, help="step limit (default $HYBRIDLOGIC_FUEL or 10^6)")
        if name == "smc-trace":
            q.add_argument("--instances", action="store_true",
                           help="include each step's axiom instance")
        q.set_defaults(run=fn)

    for name, fn, text in (("verify", cmd_verify, "prove a goal file"),
                           ("verify-sum", cmd_verify_sum, "prove the summation program")):
        q = parser_for(name, help=text)
        if name == "verify":
            q.add_argument("goal")
        q.add_argument("-o", "--out", help="write the proof script here")
        q.add_argument("--without", action="append", default=[], metavar="LABEL",
                       help="check against the axioms minus LABEL")
        q.set_defaults(run=fn)
    return p


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return USAGE if exc.code else OK
    try:
        return args.run(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return USAGE
    except (ParseError, F.FormulaError, S.SemanticsError, SignatureError, M.SmcSyntaxError,
            ValueError, hoare.HoareError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return USAGE


def entry():
    sys.exit(main())


if __name__ == "__main__":
    entry()
