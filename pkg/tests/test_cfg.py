import json

from pdfa.cfg import FALSE, TRUE, UNCONDITIONAL, Edge, Test, final, flow, init, used_vars
from pdfa.lang import Assign, Num, Seq, Skip, While, BoolConst


def triples(graph):
    return {(e.src, e.dst, e.branch) for e in graph.edges}


def test_running_flow(running):
    g = flow(running.body)
    assert g.init == init(running.body) == 1
    assert g.finals == final(running.body) == {5, 6}
    assert triples(g) == {(1, 2, UNCONDITIONAL), (2, 3, UNCONDITIONAL), (3, 4, UNCONDITIONAL),
                          (4, 5, TRUE), (4, 6, FALSE)}
    assert g.true_target(4) == 5 and g.false_target(4) == 6
    assert g.is_test(4) and not g.is_test(3)


def test_prime_program_flow(countprimes):
    g = flow(countprimes.body)
    assert g.init == 1
    assert g.finals == {2}
    assert triples(g) == {(1, 2, UNCONDITIONAL), (2, 3, TRUE), (3, 4, TRUE), (3, 5, FALSE),
                          (4, 6, UNCONDITIONAL), (5, 6, UNCONDITIONAL), (6, 2, UNCONDITIONAL)}
    # The loop ends the program, so its test has no fall-through edge.
    assert g.false_target(2) is None
    assert isinstance(g.blocks[2], Test) and g.blocks[2].loop


def test_while_exit_edge_comes_from_sequence():
    stmt = Seq(While(BoolConst(True), Skip(2), 1), Skip(3))
    g = flow(stmt)
    assert triples(g) == {(1, 2, TRUE), (2, 1, UNCONDITIONAL), (1, 3, UNCONDITIONAL)}
    assert g.false_target(1) == 3


def test_single_block():
    g = flow(Assign("x", Num(1), 7))
    assert g.edges == ()
    assert g.init == 7 and g.finals == {7}


def test_edges_sorted(countprimes):
    g = flow(countprimes.body)
    keys = [(e.src, e.dst) for e in g.edges]
    assert keys == sorted(keys)


def test_reverse(running):
    g = flow(running.body)
    assert {(e.src, e.dst) for e in g.reverse()} == {(e.dst, e.src) for e in g.edges}


def test_used_vars(running):
    g = flow(running.body)
    assert used_vars(g.blocks[3]) == {"x", "y"}
    assert used_vars(g.blocks[4]) == {"x"}
    assert used_vars(g.blocks[1]) == frozenset()


def test_json_shape(running):
    d = json.loads(flow(running.body).to_json())
    assert set(d) == {"blocks", "init", "finals", "edges"}
    assert d["blocks"]["4"] == {"kind": "test", "text": "[x > 2]^4"}
    assert d["edges"][3] == {"from": 4, "to": 5, "branch": "true"}


def test_dot(running):
    dot = flow(running.body).to_dot()
    assert dot.startswith("digraph flow {")
    assert 'n4 -> n5 [label="T"];' in dot
    assert "n4 -> n6;" in dot
    assert 'n3 [label="3: x := x + y mod 4"];' in dot
    assert "shape=diamond" in dot and "peripheries=2" in dot


def test_edge_default_branch():
    assert Edge(1, 2).branch == UNCONDITIONAL
