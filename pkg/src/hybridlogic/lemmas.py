"""Generators for the shipped nominal lemma scripts.

The scripts live in ``hybridlogic/data`` and are regenerated by
``write_lemma_scripts``.  They are stated over ``lemma.sig``: sorts ``s`` and
``t``, an operator ``f : t s -> s``, propositions ``p : t`` and ``q : s`` and
nominals ``j, k : t``.
"""

import os

from . import formulas as F
from .kernel import DATA_DIR, Extension, Extensions, load_script, render_script
from .signature import load_signature
from .tactics import ProofBuilder

LEMMA_SIG = "lemma.sig"

P = F.prop("p", "t")
Q = F.prop("q", "s")
J = F.nom("j", "t")
K = F.nom("k", "t")


def lemma_signature():
    return load_signature(os.path.join(DATA_DIR, LEMMA_SIG))


def _finish(pb, uses=()):
    pb.script.sig_path = LEMMA_SIG
    pb.script.uses = list(uses)
    return pb.script


def nom_script():
    """``@^s_k j -> (@^s_k p <-> @^s_j p)``."""
    pb = ProofBuilder(lemma_signature(), profile="H@")
    inner = F.iff(P, F.At(J, P, "t"))
    intro = pb.ax("Intro", F.implies(J, inner))
    moved = pb.at_mono(K, "s", intro)
    fwd = pb.at_mono(K, "s", pb.taut(F.implies(inner, F.implies(P, F.At(J, P, "t")))))
    bwd = pb.at_mono(K, "s", pb.taut(F.implies(inner, F.implies(F.At(J, P, "t"), P))))
    k1 = pb.ax("K@", F.implies(F.At(K, F.implies(P, F.At(J, P, "t")), "s"),
                               F.implies(F.At(K, P, "s"), F.At(K, F.At(J, P, "t"), "s"))))
    k2 = pb.ax("K@", F.implies(F.At(K, F.implies(F.At(J, P, "t"), P), "s"),
                               F.implies(F.At(K, F.At(J, P, "t"), "s"), F.At(K, P, "s"))))
    agree = pb.ax("Agree", F.iff(F.At(K, F.At(J, P, "t"), "s"), F.At(J, P, "s")))
    goal = F.implies(F.At(K, J, "s"), F.iff(F.At(K, P, "s"), F.At(J, P, "s")))
    pb.pl([moved, fwd, bwd, k1, k2, agree], goal)
    return _finish(pb)


def sym_script(nom_lemma=None):
    """``@^s_k j -> @^s_j k``, from the Nom lemma with ``p := k``."""
    sig = lemma_signature()
    nom_lemma = nom_lemma or nom_script().conclusion
    ext = Extensions([Extension("lemma_nom", nom_lemma, provenance="lemma lemma_nom.prf")])
    pb = ProofBuilder(sig, extensions=ext, profile="H@")
    inst = pb.ext("lemma_nom", F.implies(F.At(K, J, "s"),
                                         F.iff(F.At(K, K, "s"), F.At(J, K, "s"))))
    ref = pb.ax("Ref", F.At(K, K, "s"))
    pb.pl([inst, ref], F.implies(F.At(K, J, "s"), F.At(J, K, "s")))
    return _finish(pb, uses=["lemma_nom.prf"])


def bridge_script():
    """``f(j, q) & @^s_j p -> f(p, q)``."""
    pb = ProofBuilder(lemma_signature(), profile="H@")
    intro = pb.ax("Intro", F.implies(J, F.iff(P, F.At(J, P, "t"))))
    context = F.ModalApp("f", [J, Q], "s")
    pushed = pb.push_at(context, [0], F.At(J, P, "s"))
    leaf = pb.pl([intro], F.implies(F.land(J, F.At(J, P, "t")), P))
    pb.chain(pushed, pb.dia_mono("f", [J, Q], "s", 0, leaf))
    return _finish(pb)


def bridge_item2_script():
    """From the premise ``p -> j`` derive ``f(p, q) -> f(j, q) & @^s_j p``."""
    premise = F.implies(P, J)
    pb = ProofBuilder(lemma_signature(), profile="H@", premises=[premise])
    prem = pb.add(premise, "Premise", 1)
    to_nom = pb.dia_mono("f", [P, Q], "s", 0, prem)
    intro = pb.ax("Intro", F.implies(J, F.iff(P, F.At(J, P, "t"))))
    to_at = pb.pl([prem, intro], F.implies(P, F.At(J, P, "t")))
    lifted = pb.dia_mono("f", [P, Q], "s", 0, to_at)
    back = pb.back("f", [F.At(J, P, "t"), Q], "s", 0)
    goal = F.implies(F.ModalApp("f", [P, Q], "s"),
                     F.land(F.ModalApp("f", [J, Q], "s"), F.At(J, P, "s")))
    pb.pl([to_nom, lifted, back], goal)
    return _finish(pb)


LEMMA_FILES = {
    "lemma_nom.prf": (nom_script, "@_k j -> (@_k p <-> @_j p) at host sort s"),
    "lemma_sym.prf": (sym_script, "@_k j -> @_j k, imported from lemma_nom.prf"),
    "lemma_bridge.prf": (bridge_script, "f(j, q) & @_j p -> f(p, q)"),
    "lemma_bridge2.prf": (bridge_item2_script,
                          "premise p -> j gives f(p, q) -> f(j, q) & @_j p"),
}


def write_lemma_scripts(directory=DATA_DIR):
    paths = []
    for name, (build, note) in LEMMA_FILES.items():
        path = os.path.join(directory, name)
        with open(path, "w") as fh:
            fh.write(render_script(build(), note))
        paths.append(path)
    return paths


def load_lemma(name):
    return load_script(os.path.join(DATA_DIR, name))
