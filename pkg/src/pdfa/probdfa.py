"""Linear-equation data-flow analyses.

The forward phase propagates (abstract) probability mass through the flow
graph to estimate branch probabilities; the backward phase is a
probabilistic Live Variable analysis over V({d, l})^(x)|Var| that weights
successors by those probabilities.  Both reduce to systems of affine
equations ``x_u = c_u + sum_v x_v M_vu`` solved by :func:`solve_linear_system`.
"""

from __future__ import annotations

import graphlib
import warnings
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import linalg
from .cfg import TRUE, FlowGraph, Test, flow
from .errors import DimensionError, SolverError
from .lang import Assign, Random, free_vars
from .pai import Abstraction, abstract_test, lift_distribution, state_abstraction
from .semantics import StateSpace, block_matrix, test_matrix

DEAD = np.array([1.0, 0.0])
LIVE = np.array([0.0, 1.0])
L_OP = np.array([[0.0, 1.0], [0.0, 1.0]])
K_OP = np.array([[1.0, 0.0], [1.0, 0.0]])
I_OP = np.eye(2)

UNREACHABLE_MASS = 1e-15


# --------------------------------------------------------------------------
# Generic affine system


@dataclass
class Equation:
    """``x = const + sum(x_src @ coeff)``; a scalar ``coeff`` scales ``x_src``."""

    const: Optional[np.ndarray] = None
    terms: list = field(default_factory=list)  # [(src, float | ndarray)]


@dataclass
class LinearSolution:
    values: dict
    method: str  # "substitution" | "iteration" | "direct"
    iterations: int
    residual: float

    def __getitem__(self, key):
        return self.values[key]


def _apply(x, coeff):
    return coeff * x if np.isscalar(coeff) else x @ coeff


def _rhs(eq, values, dim):
    out = np.zeros(dim) if eq.const is None else np.array(eq.const, dtype=float)
    for src, coeff in eq.terms:
        out = out + _apply(values[src], coeff)
    return out


def system_residual(dims, equations, values) -> float:
    return max((float(np.max(np.abs(values[u] - _rhs(equations[u], values, dims[u])), initial=0.0))
                for u in dims), default=0.0)


def _update_order(deps):
    """Dependencies-first DFS order, so Gauss-Seidel sweeps follow the data."""
    order, seen = [], set()
    for root in deps:
        if root in seen:
            continue
        seen.add(root)
        stack = [(root, iter(deps[root]))]
        while stack:
            node, it = stack[-1]
            child = next(it, None)
            if child is None:
                stack.pop()
                order.append(node)
            elif child not in seen:
                seen.add(child)
                stack.append((child, iter(deps[child])))
    return order


def _stack(dims, equations):
    """Dense ``(C, M)`` with ``X = C + X M`` over the concatenated unknowns."""
    offsets, total = {}, 0
    for u, d in dims.items():
        offsets[u] = total
        total += d
    linalg.check_size(total * total)
    big = np.zeros((total, total))
    c = np.zeros(total)
    for u, eq in equations.items():
        ou, du = offsets[u], dims[u]
        if eq.const is not None:
            c[ou:ou + du] += eq.const
        for src, coeff in eq.terms:
            os_, ds = offsets[src], dims[src]
            block = coeff * np.eye(ds, du) if np.isscalar(coeff) else coeff
            big[os_:os_ + ds, ou:ou + du] += block
    return offsets, c, big


def solve_direct(dims, equations, tol=1e-9) -> LinearSolution:
    """Solve ``X (I - M) = C`` for the stacked system."""
    offsets, c, big = _stack(dims, equations)
    lhs = np.eye(len(c)) - big
    cond = np.linalg.cond(lhs) if len(c) else 1.0
    if not np.isfinite(cond) or cond > 1e12:
        raise SolverError("singular system: (I - M) is not invertible (non-terminating loop?)",
                          diagnostics={"condition_number": float(cond)})
    x = np.linalg.solve(lhs.T, c)
    values = {u: x[offsets[u]:offsets[u] + dims[u]] for u in dims}
    residual = system_residual(dims, equations, values)
    scale = max(1.0, float(np.max(np.abs(x), initial=0.0)))
    if residual > tol * scale:
        raise SolverError("direct solve left a residual above tolerance", residual,
                          {"condition_number": float(cond)})
    return LinearSolution(values, "direct", 1, residual)


def solve_iterative(dims, equations, tol=1e-9, max_iter=10 ** 5) -> LinearSolution:
    """Gauss-Seidel fixed-point iteration; raises on divergence or stagnation."""
    deps = {u: [src for src, _ in equations[u].terms] for u in dims}
    order = _update_order(deps)
    values = {u: np.zeros(d) for u, d in dims.items()}
    history = []
    for k in range(1, max_iter + 1):
        delta = 0.0
        for u in order:
            new = _rhs(equations[u], values, dims[u])
            delta = max(delta, float(np.max(np.abs(new - values[u]), initial=0.0)))
            values[u] = new
        if not np.isfinite(delta) or delta > 1e100 or (history and delta > 1e8 * max(history[0], tol)):
            raise SolverError("fixed-point iteration diverged", delta, {"iterations": k})
        # Stop only once the geometric tail bound on the remaining error is small too.
        rate = min(delta / history[-1], 0.999999) if history and history[-1] > 0 else 0.0
        if delta <= tol and delta * rate / (1.0 - rate) <= tol:
            residual = system_residual(dims, equations, values)
            if residual <= tol:
                return LinearSolution(values, "iteration", k, residual)
        history.append(delta)
        if k % 100 == 0 and k >= 200 and delta > 0.9 * history[k - 101]:
            raise SolverError("fixed-point iteration stagnated", delta, {"iterations": k})
    raise SolverError("fixed-point iteration hit max_iter", history[-1], {"iterations": max_iter})


def solve_linear_system(dims, equations, tol=1e-9, max_iter=10 ** 5, method="auto") -> LinearSolution:
    """Solve a system where each unknown has exactly one affine defining equation.

    ``dims`` maps unknown -> vector length, ``equations`` maps unknown ->
    :class:`Equation`.  Acyclic systems are solved exactly by topological
    substitution.  Cyclic ones are iterated and, if that fails, solved
    directly; ``method`` may force ``"iterate"`` or ``"direct"``.
    """
    if set(dims) != set(equations):
        raise DimensionError("every unknown needs exactly one equation")
    for u, eq in equations.items():
        for src, _ in eq.terms:
            if src not in dims:
                raise DimensionError(f"equation for {u!r} refers to unknown {src!r}")
    if method == "direct":
        return solve_direct(dims, equations, tol)
    if method == "iterate":
        return solve_iterative(dims, equations, tol, max_iter)

    sorter = graphlib.TopologicalSorter({u: [src for src, _ in eq.terms] for u, eq in equations.items()})
    try:
        order = list(sorter.static_order())
    except graphlib.CycleError:
        order = None
    if order is not None:
        values = {}
        for u in order:
            values[u] = _rhs(equations[u], values, dims[u])
        return LinearSolution(values, "substitution", 1, system_residual(dims, equations, values))
    try:
        return solve_iterative(dims, equations, tol, max_iter)
    except SolverError as first:
        try:
            return solve_direct(dims, equations, tol)
        except SolverError as second:
            second.diagnostics["iteration"] = str(first)
            raise second


# --------------------------------------------------------------------------
# Forward phase: probability estimation


@dataclass
class ProbSolution:
    graph: FlowGraph
    abstraction: Abstraction
    entry: dict
    exit: dict
    tests: dict  # test label -> abstract projection of the true branch
    transfer: dict  # label -> abstract transfer matrix (None for identity)
    solution: LinearSolution


def edge_weight(graph, tests, edge):
    if edge.src not in tests:
        return 1.0
    p = tests[edge.src]
    return p if edge.branch == TRUE else linalg.complement(p)


def solve_prob_forward(program, rho0, abstraction: Optional[Abstraction] = None,
                       tol=1e-9, method="auto") -> ProbSolution:
    """Entry/exit (abstract) mass vectors of every label for input ``rho0``.

    Inside loops the vectors are expected visit measures, not distributions.
    """
    space = StateSpace(program.decls)
    graph = flow(program.body)
    if abstraction is None:
        abstraction = state_abstraction(space)
    rho_sharp = lift_distribution(rho0, abstraction)
    dim = abstraction.size

    transfer, tests = {}, {}
    for label, block in graph.blocks.items():
        if isinstance(block, Test):
            tests[label] = abstract_test(test_matrix(block.cond, space), abstraction)
            transfer[label] = None
        elif isinstance(block, (Assign, Random)):
            transfer[label] = abstraction.lift(block_matrix(block, space))
        else:
            transfer[label] = None

    dims, eqs = {}, {}
    for label in graph.labels:
        dims[("entry", label)] = dims[("exit", label)] = dim
        terms = [(("exit", e.src), edge_weight(graph, tests, e)) for e in graph.predecessors(label)]
        const = rho_sharp if label == graph.init else None
        eqs[("entry", label)] = Equation(const, terms)
        f = transfer[label]
        eqs[("exit", label)] = Equation(None, [(("entry", label), 1.0 if f is None else f)])

    sol = solve_linear_system(dims, eqs, tol=tol, method=method)
    return ProbSolution(
        graph, abstraction,
        {l: sol[("entry", l)] for l in graph.labels},
        {l: sol[("exit", l)] for l in graph.labels},
        tests, transfer, sol)


@dataclass
class TestBranch:
    label: int
    true_target: int
    false_target: Optional[int]  # None: the failed test leaves the program
    p_true: float
    p_false: float
    projection: Optional[np.ndarray] = None
    reachable: bool = True


@dataclass
class BranchInfo:
    graph: FlowGraph
    tests: dict  # label -> TestBranch

    def probability(self, src, dst) -> float:
        """Probability of moving from ``src`` to ``dst`` (``None`` = leaving the program)."""
        if src in self.tests:
            t = self.tests[src]
            if dst == t.true_target:
                return t.p_true
            if dst == t.false_target:
                return t.p_false
            return 0.0
        return 1.0 if any(e.dst == dst for e in self.graph.successors(src)) else 0.0

    def out_probabilities(self, label) -> dict:
        if label in self.tests:
            t = self.tests[label]
            return {t.true_target: t.p_true, t.false_target: t.p_false}
        succ = self.graph.successors(label)
        return {e.dst: 1.0 for e in succ} if succ else {None: 1.0}

    def to_dict(self) -> dict:
        rows = []
        for label in self.graph.labels:
            for dst, p in self.out_probabilities(label).items():
                rows.append({"from": label, "to": dst, "p": p})
        rows.sort(key=lambda r: (r["from"], float("inf") if r["to"] is None else r["to"]))
        return {"branches": rows,
                "unreachable": sorted(l for l, t in self.tests.items() if not t.reachable)}

    @classmethod
    def from_static(cls, graph: FlowGraph, probs: dict, tol=1e-9):
        """Branch info from user-given probabilities ``{test: {target | 'exit': p}}``."""
        tests = {}
        for label, block in graph.blocks.items():
            if not isinstance(block, Test):
                continue
            given = probs.get(label, probs.get(str(label)))
            if given is None:
                raise ValueError(f"no static probabilities for test label {label}")
            given = {(None if k in ("exit", None) else int(k)): float(v) for k, v in given.items()}
            t_true, t_false = graph.true_target(label), graph.false_target(label)
            extra = set(given) - {t_true, t_false}
            if extra:
                raise ValueError(f"label {label} has no successor(s) {sorted(map(str, extra))}")
            p_true = given.get(t_true, 0.0)
            p_false = given.get(t_false, 1.0 - p_true)
            if min(p_true, p_false) < 0 or abs(p_true + p_false - 1.0) > tol:
                raise ValueError(f"probabilities at label {label} do not sum to 1")
            tests[label] = TestBranch(label, t_true, t_false, p_true, p_false)
        return cls(graph, tests)


def extract_branch_probs(sol: ProbSolution) -> BranchInfo:
    """Normalised abstract branch probabilities ``||s P#|| / ||s||`` at each test."""
    tests = {}
    for label, p_sharp in sol.tests.items():
        sigma = sol.exit[label]
        mass = linalg.one_norm(sigma)
        t_true, t_false = sol.graph.true_target(label), sol.graph.false_target(label)
        if mass <= UNREACHABLE_MASS:
            warnings.warn(f"test {label} is unreachable under the input distribution; "
                          "using probability 1/2", RuntimeWarning, stacklevel=2)
            tests[label] = TestBranch(label, t_true, t_false, 0.5, 0.5, p_sharp, reachable=False)
            continue
        p_true = linalg.one_norm(sigma @ p_sharp) / mass
        p_false = linalg.one_norm(sigma @ linalg.complement(p_sharp)) / mass
        tests[label] = TestBranch(label, t_true, t_false, p_true, p_false, p_sharp)
    return BranchInfo(sol.graph, tests)


# --------------------------------------------------------------------------
# Probabilistic Live Variables


def all_dead(n_vars):
    return linalg.kron_all([DEAD] * n_vars) if n_vars else np.ones(1)


def lv_operator(block, var_names, random_kills=True):
    """Liveness transfer ``(x)_i X_i`` of one block.

    ``X_i`` is ``L`` for variables read by the block, ``K`` for the variable
    it overwrites (unless also read), ``I`` otherwise.  With
    ``random_kills=False`` random assignments get the identity instead of
    killing their target.
    """
    if isinstance(block, Assign):
        read, killed = free_vars(block.expr), {block.var}
    elif isinstance(block, Test):
        read, killed = free_vars(block.cond), set()
    elif isinstance(block, Random) and random_kills:
        read, killed = frozenset(), {block.var}
    else:
        read, killed = frozenset(), set()
    factors = [L_OP if v in read else K_OP if v in killed else I_OP for v in var_names]
    return linalg.kron_all(factors) if factors else np.ones((1, 1))


@dataclass
class PLVSolution:
    var_names: tuple
    entry: dict
    exit: dict
    solution: LinearSolution

    def configurations(self, vec, tol=1e-12) -> dict:
        """Mass per set of live variables, keyed by comma-joined names."""
        out = {}
        n = len(self.var_names)
        for idx, mass in enumerate(vec):
            if mass <= tol:
                continue
            bits = [(idx >> (n - 1 - i)) & 1 for i in range(n)]
            key = ",".join(v for v, b in zip(self.var_names, bits) if b)
            out[key] = float(mass)
        return out

    def to_dict(self) -> dict:
        labels = {}
        for l in sorted(self.entry):
            labels[str(l)] = {
                where: {"vector": [float(x) for x in vec[l]],
                        "configurations": self.configurations(vec[l]),
                        "marginals": {v: marginal_liveness(self, l, v, where) for v in self.var_names}}
                for where, vec in (("entry", self.entry), ("exit", self.exit))}
        return {"variables": list(self.var_names), "labels": labels}


def plv_system(program, branches: BranchInfo, random_kills=True):
    graph = branches.graph
    names = program.var_names
    dim = 2 ** len(names)
    iota = all_dead(len(names))
    dims, eqs = {}, {}
    for label in graph.labels:
        dims[("entry", label)] = dims[("exit", label)] = dim
        eqs[("entry", label)] = Equation(
            None, [(("exit", label), lv_operator(graph.blocks[label], names, random_kills))])
        terms, leaving = [], 0.0
        for dst, p in branches.out_probabilities(label).items():
            if dst is None:
                leaving += p
            elif p != 0.0:
                terms.append((("entry", dst), p))
        if label in graph.finals and not graph.successors(label):
            leaving = 1.0
        eqs[("exit", label)] = Equation(leaving * iota if leaving else None, terms)
    return dims, eqs


def solve_plv(program, branches: BranchInfo, random_kills=True, tol=1e-9, method="auto") -> PLVSolution:
    """Backward liveness system weighted by the branch probabilities."""
    dims, eqs = plv_system(program, branches, random_kills)
    sol = solve_linear_system(dims, eqs, tol=tol, method=method)
    labels = branches.graph.labels
    return PLVSolution(program.var_names,
                       {l: sol[("entry", l)] for l in labels},
                       {l: sol[("exit", l)] for l in labels}, sol)


def marginal_liveness(sol: PLVSolution, label, var, where="entry") -> float:
    """Probability that ``var`` is live at the entry (or exit) of ``label``."""
    vectors = sol.entry if where == "entry" else sol.exit
    if label not in vectors:
        raise KeyError(f"unknown label {label}")
    if var not in sol.var_names:
        raise KeyError(f"unknown variable {var!r}")
    n = len(sol.var_names)
    t = np.asarray(vectors[label]).reshape((2,) * n)
    axis = sol.var_names.index(var)
    return float(np.take(t, 1, axis=axis).sum())


def analyze(program, rho0, abstraction=None, random_kills=True, tol=1e-9, method="auto"):
    """Forward probability phase followed by probabilistic LV."""
    forward = solve_prob_forward(program, rho0, abstraction, tol, method)
    branches = extract_branch_probs(forward)
    return forward, branches, solve_plv(program, branches, random_kills, tol, method)
