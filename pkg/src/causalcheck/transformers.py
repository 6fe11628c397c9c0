"""Proof rules: each maps a trace to children that jointly cover its computations."""

from __future__ import annotations

from dataclasses import dataclass, field, replace

from .logic import (
    TRUE,
    Formula,
    Linear,
    LocLit,
    conj,
    implies,
    is_satisfiable,
    lin,
    negate_single,
    post_state,
    pre_state,
    prime,
    project,
)
from .trace import ConcurrentTrace, Event, InfiniteTrace

RULES = (
    "OrderSplit",
    "NecessaryEvent",
    "LastNecessaryEvent",
    "InvarianceSplit",
    "InstantiateCycle",
    "NecessaryCycleEvent",
    "ContradictionClose",
    "TerminatingClose",
)


class RuleNotApplicable(Exception):
    pass


@dataclass(frozen=True)
class Production:
    rule: str
    params: dict = field(default_factory=dict)


@dataclass(frozen=True)
class RankingWitness:
    variable: str
    bound_event: str
    decrease_event: str
    bound: int

    def as_dict(self) -> dict:
        return {"variable": self.variable, "bound_event": self.bound_event,
                "decrease_event": self.decrease_event, "bound": self.bound}


class FreshIds:
    """``n<node>_e<counter>`` identifiers for events created at one node."""

    def __init__(self, node_id: int, start: int = 1):
        self.node_id = node_id
        self.counter = start

    def __call__(self) -> str:
        out = f"n{self.node_id}_e{self.counter}"
        self.counter += 1
        return out


def _single_atom(phi: Formula, what: str):
    if phi.is_false or len(phi.atoms) != 1:
        raise RuleNotApplicable(f"{what} must be a single atom, got {phi.render()}")
    negate_single(phi)  # raises unless the negation is conjunctive


def _negated(phi: Formula) -> Formula:
    try:
        return negate_single(phi)
    except Exception as exc:
        raise RuleNotApplicable(str(exc)) from None


def compatible_transitions(system, label: Formula, extra: Formula = TRUE) -> list:
    return [g for g in system.transitions if is_satisfiable(conj(label, extra, g.relation))]


def _instantiate(system, label: Formula) -> tuple:
    """(label, transition, contradictory) after the unique-candidate refinement.

    A label compatible with exactly one global transition can only be
    matched by a step of that transition, so its relation is conjoined.
    """
    cands = compatible_transitions(system, label)
    if not cands:
        return label, None, True
    if len(cands) == 1:
        return conj(label, cands[0].relation), cands[0].name, False
    return label, None, False


# ---------------------------------------------------------------------------
# finite traces
# ---------------------------------------------------------------------------

def order_split(t: ConcurrentTrace, a: str, b: str) -> list:
    t.event(a), t.event(b)
    if a == b or t.ordered(a, b):
        raise RuleNotApplicable(f"{a} and {b} are already ordered")
    base = t
    if not is_satisfiable(conj(t.event(a).label, t.event(b).label)):
        # the two can never share a step, so the conflict loses nothing
        base = base.with_conflict(a, b)
    return [base.with_link(a, b), base.with_link(b, a)]


def necessary_event(t: ConcurrentTrace, a: str, b: str, phi: Formula, system, node_id: int,
                    start: int = 1) -> list:
    _single_atom(phi, "NecessaryEvent predicate")
    if not phi.is_state_predicate():
        raise RuleNotApplicable("NecessaryEvent predicate must be a state predicate")
    ea, eb = t.event(a), t.event(b)
    if not t.has_path(a, b):
        raise RuleNotApplicable(f"no link path {a} -> {b}")
    if not t.in_conflict(a, b):
        raise RuleNotApplicable(f"{a} and {b} are not in conflict")
    if not implies(ea.label, phi.primed()):
        raise RuleNotApplicable(f"label of {a} does not establish {phi.render()}")
    neg = _negated(phi)
    if not implies(eb.label, neg):
        raise RuleNotApplicable(f"label of {b} does not require {neg.render()}")
    fresh = FreshIds(node_id, start)
    c = fresh()
    label, transition, contradictory = _instantiate(system, conj(phi, neg.primed()))
    child = t.with_event(Event(c, label, transition))
    child = child.with_link(a, c).with_link(c, b)
    child = child.with_conflict(a, c).with_conflict(c, b)
    if contradictory:
        child = child.mark_contradictory()
    return [child]


def last_necessary_event(t: ConcurrentTrace, b: str, phi: Formula, system, node_id: int,
                         start: int = 1) -> list:
    _single_atom(phi, "LastNecessaryEvent predicate")
    if not phi.is_state_predicate():
        raise RuleNotApplicable("LastNecessaryEvent predicate must be a state predicate")
    init = t.initial_event
    if init is None:
        raise RuleNotApplicable("trace has no initial event")
    eb = t.event(b)
    if b == init.id or not t.has_path(init.id, b):
        raise RuleNotApplicable(f"{b} is not causally after the initial event")
    # b cannot sit on the initial step: that step starts in an initial
    # state, where phi is false by the check below
    if not implies(eb.label, phi):
        raise RuleNotApplicable(f"label of {b} does not require {phi.render()}")
    if is_satisfiable(conj(init.label, phi.primed())):
        raise RuleNotApplicable(f"{phi.render()} may already hold initially")
    fresh = FreshIds(node_id, start)
    e = fresh()
    label, transition, contradictory = _instantiate(system, conj(_negated(phi), phi.primed()))
    child = t.with_event(Event(e, label, transition))
    child = child.with_link(init.id, e).with_link(e, b, conj(phi, phi.primed()))
    child = child.with_conflict(init.id, e).with_conflict(e, b)
    if contradictory:
        child = child.mark_contradictory()
    return [child]


# ---------------------------------------------------------------------------
# infinite traces
# ---------------------------------------------------------------------------

def invariance_split(t: InfiniteTrace, phi: Formula, node_id: int, start: int = 1) -> list:
    if not phi.is_true:
        _single_atom(phi, "InvarianceSplit predicate")
    cycle = t.cycle
    constrained = ConcurrentTrace(
        tuple(replace(e, label=conj(e.label, phi)) for e in cycle.events),
        tuple(replace(link, label=conj(link.label, phi)) for link in cycle.links),
        cycle.conflicts,
        cycle.contradictory,
    )
    child1 = InfiniteTrace(t.stem, constrained, conj(t.invariant, phi))
    fresh = FreshIds(node_id, start)
    neg = _negated(phi)
    breaker = cycle.with_event(Event(fresh(), neg))
    if neg.is_false:
        breaker = breaker.mark_contradictory()
    child2 = InfiniteTrace(t.stem, breaker, t.invariant)
    return [child1, child2]


def instantiate_cycle(t: InfiniteTrace, e: str, system) -> list:
    ev = t.cycle.event(e)
    if ev.concrete:
        raise RuleNotApplicable(f"{e} is already instantiated")
    out = []
    for g in compatible_transitions(system, ev.label, t.invariant):
        out.append(InfiniteTrace(t.stem, t.cycle.with_label(e, conj(ev.label, g.relation), g.name),
                                 t.invariant))
    return out


def consumed_literals(label: Formula, system) -> list:
    """Location literals ``loc = l`` true before and false after the step."""
    out = []
    pre, post = pre_state(label), post_state(label)
    for atom in pre.atoms:
        if isinstance(atom, LocLit) and atom.positive and atom.var in system.loc_vars:
            phi = Formula((atom,))
            if implies(post, _negated(phi)):
                out.append(phi)
    return out


def reestablishers(t: InfiniteTrace, phi: Formula, system) -> list:
    return compatible_transitions(system, conj(_negated(phi), phi.primed()), t.invariant)


def necessary_cycle_event(t: InfiniteTrace, e: str, phi: Formula, system, node_id: int,
                          start: int = 1) -> list:
    _single_atom(phi, "NecessaryCycleEvent predicate")
    ev = t.cycle.event(e)
    if not ev.concrete:
        raise RuleNotApplicable(f"{e} is not instantiated")
    if not implies(ev.label, phi) or not implies(ev.label, _negated(phi).primed()):
        raise RuleNotApplicable(f"{e} does not consume {phi.render()}")
    fresh = FreshIds(node_id, start)
    new_id = fresh()
    out = []
    for g in reestablishers(t, phi, system):
        label = conj(_negated(phi), phi.primed(), g.relation)
        cycle = t.cycle.with_event(Event(new_id, label, g.name)).with_link(new_id, e)
        out.append(InfiniteTrace(t.stem, cycle, t.invariant))
    return out


def necessary_cycle_chain(t: InfiniteTrace, e: str, phi: Formula, system, node_id: int,
                          start: int = 1) -> tuple:
    """Repeat the necessary-cycle-event step while it has a single outcome.

    Returns ``(children, steps)``; ``steps`` lists the (event, predicate)
    pairs applied.  The chain stops when the newly inserted event consumes
    nothing, when its consumed literal is already re-established by an
    existing event, or when more than one transition could re-establish it.
    """
    counter = start
    children = necessary_cycle_event(t, e, phi, system, node_id, counter)
    steps = [(e, phi)]
    counter += 1
    while len(children) == 1:
        current = children[0]
        new_id = f"n{node_id}_e{counter - 1}"
        nxt = None
        for lit in consumed_literals(current.cycle.event(new_id).label, system):
            if not cycle_reestablished(current, lit):
                nxt = lit
                break
        if nxt is None or len(reestablishers(current, nxt, system)) != 1:
            break
        children = necessary_cycle_event(current, new_id, nxt, system, node_id, counter)
        steps.append((new_id, nxt))
        counter += 1
    return children, steps


def cycle_reestablished(t: InfiniteTrace, phi: Formula) -> bool:
    target = conj(_negated(phi), phi.primed())
    return any(implies(conj(ev.label, t.invariant), target) for ev in t.cycle.events)


def _lower_bound(label: Formula, var: str) -> int | None:
    best = None
    for atom in project(label, frozenset((var,))).atoms:
        if isinstance(atom, Linear) and len(atom.terms) == 1 and atom.terms[0] == (var, 1):
            if atom.op in (">=", "="):
                best = atom.const if best is None else max(best, atom.const)
    return best


def find_ranking(t: InfiniteTrace, system) -> RankingWitness | None:
    events = t.cycle.events
    if not events or any(not e.concrete for e in events):
        return None
    for var in system.int_names:
        non_increase = lin({prime(var): 1, var: -1}, "<=", 0)
        if not all(is_satisfiable(conj(e.label, t.invariant, non_increase)) for e in events):
            continue
        decrease = lin({prime(var): 1, var: -1}, "<=", -1)
        dec = next((e for e in events if implies(conj(e.label, t.invariant), decrease)), None)
        if dec is None:
            continue
        for e in events:
            bound = _lower_bound(conj(e.label, t.invariant), var)
            if bound is not None:
                return RankingWitness(var, e.id, dec.id, bound)
    return None


def check_terminating(t: InfiniteTrace, witness: RankingWitness) -> bool:
    """Well-foundedness: ``v`` never grows, drops at one event, is bounded at another."""
    var = witness.variable
    cycle = t.cycle
    if witness.bound_event not in cycle.event_map or witness.decrease_event not in cycle.event_map:
        return False
    if any(not e.concrete for e in cycle.events):
        return False
    if not implies(t.invariant, lin({prime(var): 1, var: -1}, "<=", 0)):
        return False
    dec = cycle.event(witness.decrease_event)
    if not implies(conj(dec.label, t.invariant), lin({prime(var): 1, var: -1}, "<=", -1)):
        return False
    bnd = cycle.event(witness.bound_event)
    return implies(conj(bnd.label, t.invariant), lin({var: 1}, ">=", witness.bound))


# ---------------------------------------------------------------------------
# contradictions
# ---------------------------------------------------------------------------

def contradiction_reason(t, system) -> str | None:
    """Why no system computation can match ``t``, or None."""
    if isinstance(t, InfiniteTrace):
        if t.contradictory:
            return "marked contradictory"
        if not is_satisfiable(t.invariant):
            return "invariant unsatisfiable"
        reason = _component_reason(t.stem, system, allow_stutter=False, extra=TRUE)
        if reason:
            return "stem: " + reason
        reason = _component_reason(t.cycle, system, allow_stutter=False, extra=t.invariant)
        if reason:
            return "cycle: " + reason
        return None
    if t.contradictory:
        return "marked contradictory"
    return _component_reason(t, system, allow_stutter=True, extra=TRUE)


def _component_reason(t: ConcurrentTrace, system, allow_stutter: bool, extra: Formula) -> str | None:
    for e in t.events:
        if not is_satisfiable(conj(e.label, extra)):
            return f"label of {e.id} is unsatisfiable"
    for link in t.links:
        if not is_satisfiable(conj(link.label, extra)):
            return f"label of link {link.src} -> {link.tgt} is unsatisfiable"
    for e in t.events:
        if allow_stutter and is_satisfiable(conj(e.label, system.stutter)):
            continue
        if not compatible_transitions(system, e.label, extra):
            return f"no transition matches {e.id}"
    return None


def contradiction(t, system) -> bool:
    return contradiction_reason(t, system) is not None
