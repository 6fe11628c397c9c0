import re

import pytest

from causalcheck import benchmarks
from causalcheck.dsl import parse_model, parse_property
from causalcheck.logic import TRUE
from causalcheck.oracle import check_reachability, check_termination, validate_run
from causalcheck.tableau import (
    Tableau,
    export_dot,
    initial_roots,
    propagate,
    realize_counterexample,
    report_json,
    run,
    step,
    try_cover,
)
from causalcheck.trace import ConcurrentTrace, Event, InfiniteTrace, extend_run, find_embedding_positions

from support import esparza_system, load, prodcons_system

REACH_C = "property r reach trans(c);"
TERM = "property t termination;"


def verdict(system, text, **kw):
    return run(system, parse_property(text, system), **kw)


# -- roots -----------------------------------------------------------------

def test_reachability_root():
    system = esparza_system(3)
    [root] = initial_roots(system, parse_property(REACH_C, system))
    assert [e.id for e in root.events] == ["init", "goal"]
    assert root.event("init").initial and root.event("goal").transition == "c"
    assert root.has_path("init", "goal")


def test_termination_root():
    system = prodcons_system(1)
    [root] = initial_roots(system, parse_property(TERM, system))
    assert root == InfiniteTrace(cycle=ConcurrentTrace((Event("loop", TRUE),)))


def test_custom_root_is_the_pattern():
    system, prop = load("lock_broken.sys", "mutex.prop")
    [root] = initial_roots(system, prop)
    assert [e.id for e in root.events] == ["init", "both"]
    assert root.event("both").label.render() == "loc_P1 = C & loc_P2 = C"


# -- esparza ---------------------------------------------------------------

def test_esparza_proof_shape():
    system = esparza_system(2)
    tab = Tableau(system, parse_property(REACH_C, system))
    for t in initial_roots(system, tab.prop):
        tab.add_node(t)
    assert step(tab, tab.nodes[1]) == [2]
    assert tab.nodes[2].production.rule == "LastNecessaryEvent"
    step(tab, tab.nodes[2])
    assert step(tab, tab.nodes[3]) == [4, 5]
    assert tab.nodes[4].production.rule == "OrderSplit"


@pytest.mark.parametrize("n", [1, 2, 5, 10])
def test_esparza_sizes(n):
    system = esparza_system(n)
    smart = verdict(system, REACH_C)
    naive = verdict(system, REACH_C, heuristic="naive")
    assert smart.kind == naive.kind == "proven"
    assert len(smart.tableau.nodes) == 7
    assert len(naive.tableau.nodes) <= n + 6


def test_esparza_dot():
    dot = export_dot(verdict(esparza_system(4), REACH_C).tableau)
    assert len(re.findall(r"^  n\d+ \[label=", dot, re.M)) == 7
    assert len(re.findall(r"^  n\d+ -> n\d+ \[label=", dot, re.M)) == 6
    assert dot.count("⊥") == 2
    assert "style=dashed" not in dot
    assert "loc_P1 != s1" in dot


def test_empty_tableau_dot():
    system = esparza_system(1)
    dot = export_dot(Tableau(system, parse_property(REACH_C, system)))
    assert dot.startswith("digraph tableau {") and dot.rstrip().endswith("}")


# -- producer/consumer -----------------------------------------------------

def test_prodcons_termination_proof():
    v = verdict(prodcons_system(2), TERM)
    assert v.kind == "proven"
    tab = v.tableau
    assert tab.coverings
    assert "style=dashed" in export_dot(tab)
    witnesses = {n.closing.params["variable"] for n in tab.nodes.values()
                 if n.closing is not None and n.closing.rule == "TerminatingClose"}
    assert witnesses == {"p1", "p2", "q1", "q2"}


def test_coverings_point_away_from_ancestors():
    tab = verdict(prodcons_system(2), TERM).tableau
    for src, dst in tab.coverings:
        assert dst not in tab.ancestors(src)
        assert src not in tab.ancestors(dst)


def test_identical_siblings_cover():
    system = prodcons_system(1)
    tab = Tableau(system, parse_property(TERM, system))
    t = InfiniteTrace(cycle=ConcurrentTrace((Event("loop"),)))
    tab.add_node(t)
    second = tab.add_node(t)
    assert try_cover(tab, second) == 1
    other = tab.add_node(InfiniteTrace(cycle=ConcurrentTrace((Event("e", system.transitions[0].relation),))))
    tab.nodes[1].status = "open"
    assert try_cover(tab, tab.nodes[1]) is None or tab.nodes[1].covered_by != other.id


def test_mutual_coverings_are_reverted():
    system = prodcons_system(1)
    tab = Tableau(system, parse_property(TERM, system))
    a = tab.add_node(InfiniteTrace())
    b = tab.add_node(InfiniteTrace())
    a.status, a.covered_by = "covered", b.id
    b.status, b.covered_by = "covered", a.id
    propagate(tab)
    assert a.status == b.status == "open"
    assert not a.closed and not b.closed


def test_closure_through_children():
    system = prodcons_system(1)
    tab = Tableau(system, parse_property(TERM, system))
    root = tab.add_node(InfiniteTrace())
    root.status = "expanded"
    kids = [tab.add_node(InfiniteTrace(), root.id) for _ in range(2)]
    kids[0].status = "contradictory"
    kids[1].status, kids[1].covered_by = "covered", kids[0].id
    propagate(tab)
    assert root.closed and tab.proven


# -- violations ------------------------------------------------------------

def test_mutated_esparza_is_violated():
    system = esparza_system(3, mutated=True)
    v = verdict(system, REACH_C)
    assert v.kind == "violated"
    run_ = v.witness.computation
    assert validate_run(system, run_)
    assert run_.transitions[-1] == "c"
    assert check_reachability(system, "c") is not None


def test_broken_lock():
    system, prop = load("lock_broken.sys", "mutex.prop")
    v = run(system, prop)
    assert v.kind == "violated"
    last = v.witness.computation.states[-1]
    assert last["loc_P1"] == last["loc_P2"] == "C"


def test_realize_immediate_goal():
    system = esparza_system(2)
    t = ConcurrentTrace((Event("init", system.init.primed(), None, True),
                         Event("g", system.transition_map["a"].relation, "a")))
    t = t.with_link("init", "g")
    realized = realize_counterexample(system, t)
    assert realized.computation.transitions == ("a",)
    assert find_embedding_positions(extend_run(realized.computation.states), t) is not None


def test_realize_unreachable_goal():
    system = esparza_system(2)
    [root] = initial_roots(system, parse_property(REACH_C, system))
    assert realize_counterexample(system, root, horizon=8) is None


def test_correct_lock_mutex_is_not_violated():
    system, prop = load("lock_correct.sys", "mutex.prop")
    v = run(system, prop)
    assert v.kind != "violated"
    assert check_reachability(system, parse_property(
        "property m reach loc_P1 = C & loc_P2 = C;", system).predicate) is None


# -- agreement, budgets, determinism ----------------------------------------

@pytest.mark.parametrize("n, mutated", [(1, False), (3, False), (6, False), (2, True), (5, True)])
def test_reachability_agrees_with_oracle(n, mutated):
    system = esparza_system(n, mutated)
    v = verdict(system, REACH_C)
    assert (v.kind == "violated") == (check_reachability(system, "c") is not None)
    assert v.kind != "unknown"


@pytest.mark.parametrize("consume", [True, False])
def test_termination_agrees_with_oracle(consume):
    system = parse_model(benchmarks.prodcons(1, pool=1, consume=consume))
    v = verdict(system, TERM)
    lasso = check_termination(system)
    if consume:
        assert v.kind == "proven" and lasso is None
    else:
        assert v.kind != "proven" and lasso is not None


@pytest.mark.parametrize("budget", [1, 2, 4, 8, 30, 100])
def test_budget_only_changes_unknown(budget):
    system = esparza_system(3, mutated=True)
    full = verdict(system, REACH_C).kind
    v = verdict(system, REACH_C, max_nodes=budget)
    assert v.kind in (full, "unknown")
    system = prodcons_system(1)
    v = verdict(system, TERM, max_nodes=budget)
    assert v.kind in ("proven", "unknown")


def test_budget_must_be_positive():
    with pytest.raises(ValueError):
        verdict(esparza_system(1), REACH_C, max_nodes=0)


def _without_time(text):
    return re.sub(r'"time_ms": \d+', '"time_ms": 0', text)


def test_output_is_reproducible():
    system = prodcons_system(2)
    a, b = verdict(system, TERM), verdict(system, TERM)
    assert export_dot(a.tableau) == export_dot(b.tableau)
    assert _without_time(report_json(a)) == _without_time(report_json(b))
