import random

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pdfa.cfg import flow
from pdfa.errors import ExecutionFault
from pdfa.lang import (Assign, BinOp, Compare, DistLiteral, Not, Num, Pred, Random, Seq, Var,
                       VarDecl, parse_program)
from pdfa.pai import state_abstraction
from pdfa.linalg import lift_operator
from pdfa import semantics
from pdfa.semantics import (Config, StateSpace, block_matrix, branch_probability, eval_bexpr,
                            eval_expr, is_prime, run_monte_carlo, sos_step)

from conftest import space_of

XYZ = StateSpace([VarDecl(n, 0, 3) for n in "xyz"])


def trial_division(n):
    return n >= 2 and all(n % k for k in range(2, n))


def test_is_prime_matches_trial_division():
    assert [n for n in range(200) if is_prime(n)] == [n for n in range(200) if trial_division(n)]


def test_state_space_order():
    space = StateSpace([VarDecl("x", 0, 3), VarDecl("y", 0, 3)])
    assert space.index((1, 2)) == 6
    assert all(space.state(space.index(s)) == s for s in space.states())
    assert [space.index(s) for s in space.states()] == list(range(16))
    assert len(XYZ) == 64


def test_offset_ranges():
    space = StateSpace([VarDecl("a", 2, 4), VarDecl("b", -1, 0)])
    assert list(space.states())[:3] == [(2, -1), (2, 0), (3, -1)]
    assert space.index((4, 0)) == 5
    assert space.wrap("a", 5) == 2


def test_eval_examples():
    e = BinOp("mod", BinOp("+", Var("x"), Var("y")), Num(4))
    assert eval_expr(e, (3, 2, 0), XYZ) == 1
    gt = Compare(">", Var("x"), Num(2))
    assert eval_bexpr(gt, (3, 0, 0), XYZ) and not eval_bexpr(gt, (2, 0, 0), XYZ)
    space = StateSpace([VarDecl("i", 0, 10)])
    assert not eval_bexpr(Pred("prime", Var("i")), (9,), space)
    assert eval_bexpr(Pred("prime", Var("i")), (7,), space)


def test_mod_zero_is_fault():
    with pytest.raises(ExecutionFault):
        eval_expr(BinOp("mod", Var("x"), Var("y")), (1, 0, 0), XYZ)


def test_assignment_wraps():
    m = block_matrix(Assign("x", BinOp("+", Var("x"), Num(1)), 1), XYZ)
    assert m[XYZ.index((3, 1, 2)), XYZ.index((0, 1, 2))] == 1


# Abstract block operators of the running example under I (x) I (x) A_f, index = 4x + y.

F3_COLUMNS = [0, 5, 10, 15, 4, 9, 14, 3, 8, 13, 2, 7, 12, 1, 6, 11]


def golden_f1():
    m = np.zeros((16, 16))
    for r in range(16):
        m[r, r % 4] = m[r, r % 4 + 4] = 0.5
    return m


def golden_f2():
    m = np.zeros((16, 16))
    for r in range(16):
        m[r, 4 * (r // 4):4 * (r // 4) + 4] = 0.25
    return m


def golden_f3():
    m = np.zeros((16, 16))
    m[np.arange(16), F3_COLUMNS] = 1
    return m


@pytest.mark.parametrize("label, golden", [(1, golden_f1), (2, golden_f2), (3, golden_f3)])
def test_abstract_block_goldens(running, label, golden):
    abstraction = state_abstraction(XYZ, {"z": "forgetful"})
    block = flow(running.body).blocks[label]
    f_sharp = lift_operator(block_matrix(block, XYZ), abstraction.a, abstraction.a_dagger)
    assert np.array_equal(f_sharp, golden())


def test_f3_columns_follow_update():
    assert F3_COLUMNS == [4 * ((r // 4 + r % 4) % 4) + r % 4 for r in range(16)]


def test_abstract_test_is_complement_of_printed_p4(running):
    abstraction = state_abstraction(XYZ, {"z": "forgetful"})
    p = semantics.test_matrix(Compare(">", Var("x"), Num(2)), XYZ)
    p_sharp = lift_operator(p, abstraction.a, abstraction.a_dagger)
    assert np.array_equal(p_sharp, np.diag([0.0] * 12 + [1.0] * 4))
    printed = np.diag([1.0] * 12 + [0.0] * 4)
    assert np.array_equal(np.eye(16) - p_sharp, printed)


@pytest.mark.parametrize("name", ["running.pw", "example1.pw", "decrement.pw", "countprimes.pw"])
def test_block_matrices_row_stochastic(name):
    from conftest import load
    prog = load(name)
    space = space_of(prog)
    for block in flow(prog.body).blocks.values():
        m = block_matrix(block, space)
        assert np.all(m >= 0)
        assert np.allclose(m.sum(axis=1), 1.0, atol=1e-9)


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(0, 1), min_size=64, max_size=64).filter(lambda w: sum(w) > 0),
       st.integers(0, 3))
def test_branch_probabilities_sum_to_one(weights, bound):
    rho = np.array(weights) / sum(weights)
    b = Compare(">", Var("x"), Num(bound))
    total = branch_probability(rho, semantics.test_matrix(b, XYZ)) + branch_probability(rho, semantics.test_matrix(Not(b), XYZ))
    assert total == pytest.approx(1.0, abs=1e-9)
    f = block_matrix(Random("y", DistLiteral.uniform_over(range(4)), 1), XYZ)
    assert np.sum(rho @ f) == pytest.approx(1.0, abs=1e-9)


def test_sos_example1(example1):
    space = space_of(example1)

    class Fixed:
        def __init__(self, u):
            self.u = u

        def random(self):
            return self.u

    c = Config(example1.body, (0,))
    c = sos_step(c, space, Fixed(0.9))  # draws x = 1
    assert c.state == (1,)
    c = sos_step(c, space, Fixed(0.0))
    assert c.stmt.label == 3
    c = sos_step(c, space, Fixed(0.0))
    assert c.stopped
    with pytest.raises(ValueError):
        sos_step(c, space, Fixed(0.0))


def test_sos_while_unfolds():
    prog = parse_program("var x:0..3; while [x < 2]^1 do [x := x + 1]^2 od")
    space = space_of(prog)
    c = sos_step(Config(prog.body, (0,)), space, random.Random(0))
    assert isinstance(c.stmt, Seq) and c.stmt.second == prog.body
    seen = 0
    while not c.stopped:
        c = sos_step(c, space, random.Random(0))
        seen += 1
    assert c.state == (2,)


def test_monte_carlo_independent_of_workers(running):
    space = space_of(running)
    rho = space.uniform()
    one = run_monte_carlo(running, rho, 5000, seed=7, workers=1)
    four = run_monte_carlo(running, rho, 5000, seed=7, workers=4)
    assert one.to_dict() == four.to_dict()
    other = run_monte_carlo(running, rho, 5000, seed=8)
    assert other.to_dict() != one.to_dict()


def test_monte_carlo_counts(example1):
    report = run_monte_carlo(example1, space_of(example1).point_mass((0,)), 2000, seed=1)
    assert report.visits[1] == 2000
    assert report.counts[(1, 2)] == 2000
    assert report.counts[(2, 3)] + report.counts[(2, 4)] == 2000
    assert report.counts[(3, None)] == report.counts[(2, 3)]
    assert report.nonterminated == 0


def test_monte_carlo_nontermination():
    prog = parse_program("var x:0..1; while [x = 0]^1 do [skip]^2 od")
    report = run_monte_carlo(prog, np.array([0.5, 0.5]), 100, seed=0, max_steps=50)
    assert report.nonterminated == pytest.approx(50, abs=20)
    assert report.counts[(1, None)] == 100 - report.nonterminated


def test_monte_carlo_rejects_bad_distribution(example1):
    with pytest.raises(ValueError):
        run_monte_carlo(example1, np.array([0.5, 0.4]), 10)
