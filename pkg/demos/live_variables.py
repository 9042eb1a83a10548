"""
Classical and probabilistic live variables
==========================================

Runs both analyses on the bundled running example and prints where they
disagree in what they can say.
"""

from pdfa import analyze, load_program, programs, solve_lv
from pdfa.pai import state_abstraction
from pdfa.semantics import StateSpace

prog = load_program(programs.read("running.pw"))
space = StateSpace(prog.decls)

# The classical analysis only knows which variables *may* be live.
lv = solve_lv(prog)
for label in sorted(lv.entry):
    print(f"LV entry({label}) = {sorted(lv.entry[label])}   exit({label}) = {sorted(lv.exit[label])}")

# z never influences a test, so forget it while estimating branch probabilities.
abstraction = state_abstraction(space, {"z": "forgetful"})
forward, branches, plv = analyze(prog, space.uniform(), abstraction)
print("\np(4,5) =", branches.probability(4, 5), " p(4,6) =", branches.probability(4, 6))

# The probabilistic analysis gives a joint distribution over live sets.
for label in (3, 4):
    print(f"PLV entry({label}):", plv.configurations(plv.entry[label]))
    print(f"PLV exit({label}): ", plv.configurations(plv.exit[label]))
