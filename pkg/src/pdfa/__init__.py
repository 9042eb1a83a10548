"""Probabilistic data-flow analysis for a labelled probabilistic While language."""

from .errors import PdfaError, ParseError, SolverError
from .lang import load_program, parse_program, pretty_print, assign_labels
from .cfg import flow, init, final
from .semantics import StateSpace, run_monte_carlo
from .dfa import solve_lv
from .probdfa import (analyze, extract_branch_probs, marginal_liveness, solve_plv,
                      solve_prob_forward)

__version__ = "0.1.0"

__all__ = [
    "PdfaError", "ParseError", "SolverError",
    "load_program", "parse_program", "pretty_print", "assign_labels",
    "flow", "init", "final",
    "StateSpace", "run_monte_carlo",
    "solve_lv",
    "analyze", "extract_branch_probs", "marginal_liveness", "solve_plv", "solve_prob_forward",
]
