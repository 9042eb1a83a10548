"""
Analytic branch probabilities against sampled runs
==================================================

Estimates branch probabilities by solving the forward equations, then
executes the program many times with the small-step interpreter.
"""

import math

from pdfa import extract_branch_probs, load_program, programs, run_monte_carlo, solve_prob_forward
from pdfa.semantics import StateSpace

for name in ("running.pw", "example1.pw", "countprimes.pw"):
    prog = load_program(programs.read(name))
    space = StateSpace(prog.decls)
    rho = space.uniform()
    branches = extract_branch_probs(solve_prob_forward(prog, rho))
    report = run_monte_carlo(prog, rho, trials=20000, seed=1, workers=4)
    print(f"\n{name}")
    for label, t in sorted(branches.tests.items()):
        for dst, p in ((t.true_target, t.p_true), (t.false_target, t.p_false)):
            n = report.visits[label]
            sigma = math.sqrt(p * (1 - p) / n)
            target = "exit" if dst is None else dst
            print(f"  {label} -> {target}: analytic {p:.4f}  sampled {report.freq(label, dst):.4f}"
                  f"  (sigma {sigma:.4f})")
