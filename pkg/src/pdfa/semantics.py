"""Concrete semantics: state spaces, block matrices, SOS interpreter, Monte Carlo."""

from __future__ import annotations

import bisect
import itertools
import random
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import linalg
from .cfg import Test, init
from .errors import DimensionError, ExecutionFault
from .lang import (Assign, BinOp, BoolConst, BoolOp, Compare, If, Neg, Not, Num, Pred,
                   Random, Seq, Skip, Var, While)


class StateSpace:
    """All classical states of a program, first declared variable most significant.

    ``index(state) = sum_i (x_i - lo_i) * prod_{j > i} size_j``, i.e. the
    ordering of the v-fold Kronecker product of the per-variable spaces.
    """

    def __init__(self, decls):
        self.decls = tuple(decls)
        self.names = tuple(d.name for d in self.decls)
        self.position = {n: i for i, n in enumerate(self.names)}
        self.sizes = tuple(d.size for d in self.decls)
        strides = []
        acc = 1
        for size in reversed(self.sizes):
            strides.append(acc)
            acc *= size
        self.strides = tuple(reversed(strides))
        self.size = acc
        self._enumeration = None

    def __len__(self):
        return self.size

    def __repr__(self):
        ranges = ", ".join(f"{d.name}:{d.lo}..{d.hi}" for d in self.decls)
        return f"StateSpace({ranges})"

    @property
    def enumeration(self) -> linalg.Enumeration:
        if self._enumeration is None:
            self._enumeration = linalg.Enumeration(self.states())
        return self._enumeration

    def states(self):
        return itertools.product(*(d.values for d in self.decls))

    def index(self, state) -> int:
        return sum((v - d.lo) * s for v, d, s in zip(state, self.decls, self.strides))

    def state(self, index):
        out = []
        for d, s in zip(self.decls, self.strides):
            q, index = divmod(index, s)
            out.append(d.lo + q)
        return tuple(out)

    def value(self, state, name):
        return state[self.position[name]]

    def wrap(self, name, value) -> int:
        d = self.decls[self.position[name]]
        return d.lo + (value - d.lo) % d.size

    def update(self, state, name, value):
        i = self.position[name]
        return state[:i] + (value,) + state[i + 1:]

    def uniform(self):
        return np.full(self.size, 1.0 / self.size)

    def point_mass(self, state):
        v = np.zeros(self.size)
        v[self.index(tuple(state))] = 1.0
        return v


# --------------------------------------------------------------------------
# Expressions


def is_prime(n: int) -> bool:
    if n < 2:
        return False
    if n % 2 == 0:
        return n == 2
    k = 3
    while k * k <= n:
        if n % k == 0:
            return False
        k += 2
    return True


def eval_expr(e, state, space: StateSpace) -> int:
    """Integer value of ``e``; results are not reduced until assignment."""
    if isinstance(e, Num):
        return e.value
    if isinstance(e, Var):
        return state[space.position[e.name]]
    if isinstance(e, Neg):
        return -eval_expr(e.operand, state, space)
    if isinstance(e, BinOp):
        left = eval_expr(e.left, state, space)
        right = eval_expr(e.right, state, space)
        if e.op == "+":
            return left + right
        if e.op == "-":
            return left - right
        if e.op == "*":
            return left * right
        if e.op == "mod":
            if right == 0:
                raise ExecutionFault(f"modulo by zero in state {state}")
            return left % right
    raise TypeError(f"not an arithmetic expression: {e!r}")


_COMPARE = {
    "<": lambda a, b: a < b,
    "<=": lambda a, b: a <= b,
    "=": lambda a, b: a == b,
    "!=": lambda a, b: a != b,
    ">": lambda a, b: a > b,
    ">=": lambda a, b: a >= b,
}


def eval_bexpr(b, state, space: StateSpace) -> bool:
    if isinstance(b, BoolConst):
        return b.value
    if isinstance(b, Compare):
        return _COMPARE[b.op](eval_expr(b.left, state, space), eval_expr(b.right, state, space))
    if isinstance(b, Pred):
        n = eval_expr(b.arg, state, space)
        if b.name == "prime":
            return is_prime(n)
        if b.name == "even":
            return n % 2 == 0
        return n % 2 == 1
    if isinstance(b, Not):
        return not eval_bexpr(b.operand, state, space)
    if isinstance(b, BoolOp):
        if b.op == "and":
            return eval_bexpr(b.left, state, space) and eval_bexpr(b.right, state, space)
        return eval_bexpr(b.left, state, space) or eval_bexpr(b.right, state, space)
    raise TypeError(f"not a boolean expression: {b!r}")


# --------------------------------------------------------------------------
# Linear block semantics


def block_matrix(block, space: StateSpace):
    """Row-stochastic matrix of an elementary block (tests act as identity)."""
    linalg.check_size(space.size ** 2)
    en = space.enumeration
    if isinstance(block, (Skip, Test, If, While)):
        return np.eye(space.size)
    if isinstance(block, Assign):
        return linalg.lin_rep(
            lambda s: space.update(s, block.var, space.wrap(block.var, eval_expr(block.expr, s, space))),
            en, en)
    if isinstance(block, Random):
        m = np.zeros((space.size, space.size))
        for value, p in block.dist.pairs:
            m += p * linalg.lin_rep(lambda s: space.update(s, block.var, value), en, en)
        return m
    raise TypeError(f"not a block: {block!r}")


def test_matrix(cond, space: StateSpace):
    """Projection ``P(b)`` onto the states satisfying ``cond``."""
    return linalg.pred_rep(lambda s: eval_bexpr(cond, s, space), space.enumeration)


def branch_probability(rho, p) -> float:
    """``||rho P||_1``: mass sent along the branch selected by ``p``."""
    rho = np.asarray(rho, dtype=float)
    if rho.shape[-1] != p.shape[0]:
        raise DimensionError(f"vector of length {rho.shape[-1]} vs projection {p.shape}")
    return linalg.one_norm(rho @ p)


# --------------------------------------------------------------------------
# Structural operational semantics


STOP = None


@dataclass(frozen=True)
class Config:
    stmt: object  # remaining statement, or STOP (None)
    state: tuple

    @property
    def stopped(self):
        return self.stmt is STOP


def sample(dist, rng):
    u = rng.random()
    acc = 0.0
    for value, p in dist.pairs:
        acc += p
        if u < acc:
            return value
    return dist.pairs[-1][0]


def _step(stmt, state, space, rng):
    if isinstance(stmt, Skip):
        return STOP, state
    if isinstance(stmt, Assign):
        value = space.wrap(stmt.var, eval_expr(stmt.expr, state, space))
        return STOP, space.update(state, stmt.var, value)
    if isinstance(stmt, Random):
        return STOP, space.update(state, stmt.var, sample(stmt.dist, rng))
    if isinstance(stmt, Seq):
        rest, state = _step(stmt.first, state, space, rng)
        return (stmt.second if rest is STOP else Seq(rest, stmt.second)), state
    if isinstance(stmt, If):
        return (stmt.then if eval_bexpr(stmt.cond, state, space) else stmt.orelse), state
    if isinstance(stmt, While):
        if eval_bexpr(stmt.cond, state, space):
            return Seq(stmt.body, stmt), state
        return STOP, state
    raise TypeError(f"not a statement: {stmt!r}")


def sos_step(config: Config, space: StateSpace, rng) -> Config:
    """One transition of the probabilistic SOS relation.

    ``rng`` only needs a ``random()`` method returning floats in [0, 1).
    """
    if config.stopped:
        raise ValueError("cannot step a terminated configuration")
    stmt, state = _step(config.stmt, config.state, space, rng)
    return Config(stmt, state)


# --------------------------------------------------------------------------
# Monte Carlo oracle


@dataclass
class MonteCarloReport:
    trials: int
    counts: dict = field(default_factory=dict)  # (src, dst | None) -> count
    visits: dict = field(default_factory=dict)  # label -> count
    nonterminated: int = 0

    def freq(self, src, dst) -> float:
        visits = self.visits.get(src, 0)
        return self.counts.get((src, dst), 0) / visits if visits else 0.0

    def merge(self, other):
        for k, v in other.counts.items():
            self.counts[k] = self.counts.get(k, 0) + v
        for k, v in other.visits.items():
            self.visits[k] = self.visits.get(k, 0) + v
        self.nonterminated += other.nonterminated

    def to_dict(self) -> dict:
        keys = sorted(self.counts, key=lambda k: (k[0], float("inf") if k[1] is None else k[1]))
        return {
            "trials": self.trials,
            "nonterminated": self.nonterminated,
            "edges": [{"from": s, "to": d, "count": self.counts[(s, d)], "freq": self.freq(s, d)}
                      for s, d in keys],
        }


CHUNK = 1000


def _run_chunk(program, space, cum, n_trials, seed, chunk, max_steps):
    key = np.random.SeedSequence(seed, spawn_key=(chunk,))
    rng = random.Random(int(key.generate_state(2, dtype=np.uint64)[0]))
    report = MonteCarloReport(trials=n_trials)
    counts, visits = report.counts, report.visits
    body = program.body
    for _ in range(n_trials):
        idx = min(bisect.bisect_right(cum, rng.random() * cum[-1]), len(cum) - 1)
        stmt, state = body, space.state(idx)
        steps = 0
        while stmt is not STOP:
            if steps >= max_steps:
                report.nonterminated += 1
                break
            label = init(stmt)
            stmt, state = _step(stmt, state, space, rng)
            target = None if stmt is STOP else init(stmt)
            counts[(label, target)] = counts.get((label, target), 0) + 1
            visits[label] = visits.get(label, 0) + 1
            steps += 1
    return report


def run_monte_carlo(program, rho0, trials, seed=0, max_steps=10 ** 6, workers=1) -> MonteCarloReport:
    """Execute ``trials`` independent runs with initial states drawn from ``rho0``.

    Trials are split into fixed chunks, each seeded from ``(seed, chunk)``,
    so the report does not depend on ``workers``.
    """
    space = StateSpace(program.decls)
    rho0 = np.asarray(rho0, dtype=float)
    if rho0.shape != (space.size,):
        raise DimensionError(f"initial distribution has shape {rho0.shape}, expected ({space.size},)")
    if not linalg.is_distribution(rho0, 1e-6):
        raise ValueError("initial vector is not a probability distribution")
    cum = list(np.cumsum(np.clip(rho0, 0.0, None)))
    sizes = [min(CHUNK, trials - k) for k in range(0, trials, CHUNK)]
    jobs = [(program, space, cum, n, seed, i, max_steps) for i, n in enumerate(sizes)]
    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            parts = list(pool.map(lambda job: _run_chunk(*job), jobs))
    else:
        parts = [_run_chunk(*job) for job in jobs]
    report = MonteCarloReport(trials=trials)
    for part in parts:
        report.merge(part)
    return report
