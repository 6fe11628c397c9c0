import random
from dataclasses import replace

import pytest
from hypothesis import given, settings, strategies as st

from causalcheck import benchmarks
from causalcheck.dsl import parse_formula, parse_model
from causalcheck.logic import TRUE, Formula
from causalcheck.oracle import enumerate_lassos, enumerate_runs
from causalcheck.trace import (
    Computation,
    ConcurrentTrace,
    Event,
    InfiniteTrace,
    Link,
    TraceError,
    check_mapping,
    embed,
    is_member,
    is_member_lasso,
    topological_events,
    trace_from_dict,
    trace_to_dict,
    well_formed,
)

from support import brute_member, brute_member_lasso, padded, random_states, random_trace

F = parse_formula


def trace(events, links=(), conflicts=()):
    return ConcurrentTrace(
        tuple(Event(i, F(label)) for i, label in events),
        tuple(Link(a, b, F(label)) for a, b, label in links),
        tuple(conflicts),
    )


DIAMOND = trace(
    [("i", "x = y"), ("a", "x' = x + 1"), ("b", "y' = y - 1"), ("c", "x > y")],
    [("i", "a", "true"), ("i", "b", "true"), ("a", "c", "x' = x"), ("b", "c", "y' = y")],
    [("a", "b")],
)


def run(*pairs):
    return Computation(tuple({"x": x, "y": y} for x, y in pairs))


# -- well-formedness and ordering ------------------------------------------

def test_well_formed_examples():
    assert well_formed(ConcurrentTrace())
    assert not well_formed(trace([("a", "true")], [("a", "a", "true")]))
    assert well_formed(DIAMOND)


def test_link_cycle_is_diagnosed():
    t = trace([("a", "true"), ("b", "true")], [("a", "b", "true"), ("b", "a", "true")])
    assert any("cycle" in p for p in t.diagnose())
    with pytest.raises(TraceError):
        topological_events(t)


def test_topological_order():
    assert [e.id for e in topological_events(DIAMOND)] == ["i", "a", "b", "c"]
    assert topological_events(ConcurrentTrace()) == []
    t = trace([("c", "true"), ("b1", "true"), ("a", "true"), ("init", "true")],
              [("init", "a", "true"), ("init", "b1", "true"), ("a", "c", "true"), ("b1", "c", "true")])
    assert [e.id for e in topological_events(t)] == ["init", "a", "b1", "c"]


def test_natural_id_order_breaks_ties():
    t = trace([("e10", "true"), ("e9", "true")])
    assert [e.id for e in topological_events(t)] == ["e9", "e10"]


# -- finite membership -----------------------------------------------------

def test_single_true_event_matches_everything():
    t = trace([("e", "true")])
    assert is_member(run((0, 0)), t)
    assert is_member(run((0, 0), (1, 5)), t)


def test_worked_diamond_is_matched():
    c = run((0, 0), (1, 0), (1, -1))
    assert is_member(c, DIAMOND)
    assert brute_member(padded(c.states), DIAMOND)


def test_link_label_blocks_intervening_update():
    # y drops (b), rises again, then x grows (a) and x > y is observable
    c = run((0, 0), (0, -1), (0, 0), (1, 0))
    assert not is_member(c, DIAMOND)
    assert not brute_member(padded(c.states), DIAMOND)


def test_conflict_forces_distinct_steps():
    t = trace([("a", "x' = x + 1"), ("b", "x' = x + 1")])
    c = run((0, 0), (1, 0))
    assert is_member(c, t)
    assert not is_member(c, replace(t, conflicts=(("a", "b"),)))


def test_links_are_not_strict():
    t = trace([("a", "x' = x + 1"), ("b", "x' > x")], [("a", "b", "true")])
    assert is_member(run((0, 0), (1, 0)), t)


def test_initial_event_sits_on_the_first_step():
    t = ConcurrentTrace((Event("i", F("x = 1"), initial=True),))
    assert is_member(run((1, 0), (0, 0)), t)
    assert not is_member(run((0, 0), (1, 0)), t)


def test_contradictory_trace_has_no_members():
    assert not is_member(run((0, 0)), ConcurrentTrace().mark_contradictory())


@settings(max_examples=300, deadline=None)
@given(st.randoms(use_true_random=False))
def test_membership_matches_brute_force(rng):
    t, states = random_trace(rng), random_states(rng)
    assert is_member(Computation(states), t) == brute_member(padded(states), t)


def _weakenings(t):
    for k in range(len(t.links)):
        yield replace(t, links=t.links[:k] + t.links[k + 1:])
    for k in range(len(t.conflicts)):
        yield replace(t, conflicts=t.conflicts[:k] + t.conflicts[k + 1:])
    for k, link in enumerate(t.links):
        for atom in link.label.atoms:
            rest = Formula(tuple(a for a in link.label.atoms if a != atom))
            yield replace(t, links=t.links[:k] + (Link(link.src, link.tgt, rest),) + t.links[k + 1:])
    for e in t.events:
        for atom in e.label.atoms:
            yield t.with_label(e.id, Formula(tuple(a for a in e.label.atoms if a != atom)))


@settings(max_examples=300, deadline=None)
@given(st.randoms(use_true_random=False))
def test_membership_is_monotone_under_weakening(rng):
    t, states = random_trace(rng), random_states(rng)
    c = Computation(states)
    if not is_member(c, t):
        return
    for weaker in _weakenings(t):
        assert is_member(c, weaker)


# -- embedding -------------------------------------------------------------

def test_embedding_examples():
    assert embed(ConcurrentTrace(), DIAMOND) == {}
    assert embed(trace([("e", "x > 0")]), trace([("f", "true")])) is None
    assert embed(trace([("e", "true")]), trace([("f", "x > 0")])) == {"e": "f"}


def test_embedding_follows_link_paths():
    small = trace([("p", "x = 0"), ("q", "y > 0")], [("p", "q", "x' = x")])
    big = trace([("p", "x = 0"), ("m", "x' = x"), ("q", "y > 0")],
                [("p", "m", "x' = x"), ("m", "q", "x' = x")])
    mapping = embed(small, big)
    assert mapping == {"p": "p", "q": "q"}
    assert check_mapping(small, big, mapping)
    assert not check_mapping(small, big, {"p": "q", "q": "p"})
    # an inner event that breaks the label stops the path
    broken = big.with_label("m", F("x' = x + 1"))
    assert embed(small, broken) is None


def test_embedding_requires_conflicts():
    small = trace([("a", "true"), ("b", "true")], conflicts=[("a", "b")])
    assert embed(small, trace([("a", "true"), ("b", "true")])) is None
    assert embed(small, trace([("a", "true"), ("b", "true")], conflicts=[("a", "b")])) is not None


def test_producer_cycle_embeds_in_bigger_cycle():
    system = parse_model(benchmarks.prodcons(1, pool=2))
    rel = {g.name: g.relation for g in system.transitions}

    def ev(name):
        return Event(name, rel[name], name)

    small = InfiniteTrace(cycle=ConcurrentTrace((ev("a1_1"),)))
    big_events = tuple(ev(n) for n in ("c1_1", "c1_2", "c1_3", "c1_4", "a1_1", "a1_q1", "a1_4"))
    big = InfiniteTrace(cycle=ConcurrentTrace(big_events, (Link("c1_1", "c1_2"), Link("a1_1", "a1_q1"))))
    assert embed(small, big) == {"a1_1": "a1_1"}


@settings(max_examples=200, deadline=None)
@given(st.randoms(use_true_random=False))
def test_embedding_is_sound(rng):
    small, big = random_trace(rng, 3), random_trace(rng, 5)
    mapping = embed(small, big)
    if mapping is None:
        return
    assert check_mapping(small, big, mapping)
    for _ in range(30):
        c = Computation(random_states(rng))
        if is_member(c, big):
            assert is_member(c, small)


# -- lassos ----------------------------------------------------------------

LOCK = parse_model(benchmarks.lock(broken=True))

FROZEN = parse_model("""\
system frozen {
  var p1: int in 0..2 init 2;
  process Prod1 {
    locations l1, l2, l3 init l1;
    trans a1: l1 -> l2 when p1 > 0;
    trans a2: l2 -> l3;
    trans a4: l3 -> l1;
  }
}
""")


def test_true_cycle_matches_every_lasso():
    t = InfiniteTrace(cycle=ConcurrentTrace((Event("e", TRUE),)))
    lassos = list(enumerate_lassos(LOCK, 6))
    assert lassos
    assert all(is_member_lasso(c, t) for c in lassos)


def test_producer_lasso_matches_its_cycle():
    rel = FROZEN.transition_map
    t = InfiniteTrace(cycle=ConcurrentTrace(
        (Event("a1", rel["a1"].relation, "a1"), Event("a4", rel["a4"].relation, "a4")),
        (Link("a1", "a4"),)))
    lassos = [c for c in enumerate_lassos(FROZEN, 4)]
    assert lassos
    for c in lassos:
        assert is_member_lasso(c, t)
        assert brute_member_lasso(c.states, c.loop_start, t)


def test_impossible_cycle_event_matches_no_lasso():
    system = parse_model(benchmarks.prodcons(1, pool=1, consume=False))
    t = InfiniteTrace(cycle=ConcurrentTrace((Event("e", F("q1 > 0 & q1' > q1")),)))
    lassos = list(enumerate_lassos(system, 12))
    assert lassos
    assert not any(is_member_lasso(c, t) for c in lassos)


def test_stem_must_happen_before_the_loop_repeats():
    t = InfiniteTrace(stem=ConcurrentTrace((Event("s", F("loc_P1 = T & loc_P1' = C")),)),
                      cycle=ConcurrentTrace((Event("e", TRUE),)))
    for c in enumerate_lassos(LOCK, 6):
        assert is_member_lasso(c, t) == brute_member_lasso(c.states, c.loop_start, t)


def test_lasso_required():
    with pytest.raises(TraceError):
        is_member_lasso(Computation(({"x": 0},)), InfiniteTrace())


@settings(max_examples=100, deadline=None)
@given(st.randoms(use_true_random=False))
def test_lasso_membership_matches_brute_force(rng):
    t = InfiniteTrace(stem=random_trace(rng, 2), cycle=random_trace(rng, 3))
    t = replace(t, cycle=replace(t.cycle, events=tuple(replace(e, id="c" + e.id, initial=False)
                                                       for e in t.cycle.events),
                                 links=tuple(Link("c" + l.src, "c" + l.tgt, l.label) for l in t.cycle.links),
                                 conflicts=tuple(("c" + a, "c" + b) for a, b in t.cycle.conflicts)))
    states = random_states(rng, 5)
    loop_start = rng.randrange(len(states))
    c = Computation(states, loop_start)
    assert is_member_lasso(c, t) == brute_member_lasso(states, loop_start, t)


def test_runs_of_lock_match_brute_force_on_property_shapes():
    t = trace([("i", "loc_P1 = N"), ("e", "loc_P1 = T & loc_P1' = C")], [("i", "e", "loc_P2 != C")])
    for c in enumerate_runs(LOCK, 6):
        assert is_member(c, t) == brute_member(padded(c.states), t)


def test_dict_round_trip():
    for t in (DIAMOND, InfiniteTrace(stem=DIAMOND, cycle=trace([("z", "x' = x")]), invariant=F("y' = y"))):
        assert trace_from_dict(trace_to_dict(t), F) == t
