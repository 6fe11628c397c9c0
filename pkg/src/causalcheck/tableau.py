"""Tableau proof search over concurrent traces."""

from __future__ import annotations

import itertools
import json
import time
from collections import deque
from dataclasses import dataclass, field

from .dsl import PropertySpec, render_model
from .logic import (
    TRUE,
    Formula,
    LocLit,
    conj,
    implies,
    interpolate,
    is_satisfiable,
    lin,
    negate_single,
    prime,
)
from .trace import (
    Computation,
    ConcurrentTrace,
    Event,
    InfiniteTrace,
    embed,
    extend_run,
    find_embedding_positions,
    natural_key,
    render_trace,
    topological_events,
    trace_to_dict,
)
from .transformers import (
    Production,
    RankingWitness,
    RuleNotApplicable,
    check_terminating,
    compatible_transitions,
    consumed_literals,
    contradiction_reason,
    cycle_reestablished,
    find_ranking,
    instantiate_cycle,
    invariance_split,
    last_necessary_event,
    necessary_cycle_chain,
    necessary_event,
    order_split,
    reestablishers,
)

HEURISTICS = ("smart", "naive")
REPORT_FORMAT = 1


@dataclass
class TableauNode:
    id: int
    trace: object
    parent: int | None = None
    production: Production | None = None
    status: str = "open"  # open, expanded, contradictory, terminating, covered, unknown
    covered_by: int | None = None
    mapping: dict | None = None
    closing: Production | None = None
    children: list = field(default_factory=list)
    reason: str | None = None
    closed: bool = False

    @property
    def display_status(self) -> str:
        if self.status == "covered":
            return "covered"
        if self.status in ("contradictory", "unknown"):
            return self.status
        return "closed" if self.closed else "open"


@dataclass
class RealizedRun:
    computation: Computation
    positions: dict


@dataclass
class Verdict:
    kind: str  # proven, violated, unknown
    tableau: "Tableau"
    witness: RealizedRun | None = None
    reason: str | None = None

    @property
    def exit_code(self) -> int:
        return {"proven": 0, "violated": 10}.get(self.kind, 20)


class Tableau:
    def __init__(self, system, prop: PropertySpec, heuristic: str = "smart", horizon: int | None = None):
        if heuristic not in HEURISTICS:
            raise ValueError(f"unknown heuristic {heuristic!r}")
        self.system = system
        self.prop = prop
        self.heuristic = heuristic
        self.horizon = horizon
        self.nodes: dict = {}
        self.roots: list = []
        self.expanded = 0
        self.time_ms = 0

    # -- structure ----------------------------------------------------------

    def add_node(self, trace, parent: int | None = None, production: Production | None = None) -> TableauNode:
        node = TableauNode(len(self.nodes) + 1, trace, parent, production)
        self.nodes[node.id] = node
        if parent is None:
            self.roots.append(node.id)
        else:
            self.nodes[parent].children.append(node.id)
        return node

    def ancestors(self, node_id: int) -> set:
        out = set()
        cur = self.nodes[node_id].parent
        while cur is not None:
            out.add(cur)
            cur = self.nodes[cur].parent
        return out

    def dependencies(self, node_id: int) -> list:
        node = self.nodes[node_id]
        if node.status == "covered":
            return [node.covered_by]
        return list(node.children)

    def depends_on(self, start: int, targets: set) -> bool:
        seen = set()
        stack = [start]
        while stack:
            n = stack.pop()
            if n in targets:
                return True
            if n in seen:
                continue
            seen.add(n)
            stack.extend(self.dependencies(n))
        return False

    @property
    def coverings(self) -> list:
        return [(n.id, n.covered_by) for n in self.nodes.values() if n.status == "covered"]

    @property
    def proven(self) -> bool:
        return bool(self.roots) and all(self.nodes[r].closed for r in self.roots)


# ---------------------------------------------------------------------------
# roots
# ---------------------------------------------------------------------------

def _init_event(system, event_id: str = "init") -> Event:
    return Event(event_id, system.init.primed(), None, True)


def _pattern_trace(system, pattern) -> ConcurrentTrace:
    t = ConcurrentTrace()
    if pattern is None:
        return t
    for ev in pattern.events:
        if ev.kind == "init":
            t = t.with_event(_init_event(system, ev.id))
        elif ev.kind == "trans":
            t = t.with_event(Event(ev.id, system.transition_map[ev.transition].relation, ev.transition))
        else:
            t = t.with_event(Event(ev.id, ev.formula))
    for src, tgt, label in pattern.links:
        t = t.with_link(src, tgt, label)
    for a, b in pattern.conflicts:
        t = t.with_conflict(a, b)
    return t


def initial_roots(system, prop: PropertySpec) -> list:
    """Root traces describing every violation of ``prop``."""
    if prop.kind == "reach-trans":
        g = system.transition_map[prop.target]
        t = ConcurrentTrace().with_event(_init_event(system))
        t = t.with_event(Event("goal", g.relation, g.name))
        return [t.with_link("init", "goal").with_conflict("init", "goal")]
    if prop.kind == "reach-pred":
        t = ConcurrentTrace().with_event(_init_event(system))
        t = t.with_event(Event("goal", prop.predicate))
        return [t.with_link("init", "goal")]
    if prop.kind == "termination":
        return [InfiniteTrace(cycle=ConcurrentTrace((Event("loop", TRUE),)))]
    if prop.kind == "violation":
        stem = _pattern_trace(system, prop.stem)
        if prop.cycle is not None:
            return [InfiniteTrace(stem, _pattern_trace(system, prop.cycle))]
        return [stem]
    raise ValueError(f"unknown property kind {prop.kind!r}")


# ---------------------------------------------------------------------------
# rule selection: finite traces
# ---------------------------------------------------------------------------

def _processes_of(system, event: Event) -> set:
    if event.transition is not None and event.transition in system.transition_map:
        return {p for p, _, _ in system.transition_map[event.transition].moves}
    return set()


def _order_split_action(tab: Tableau, node: TableauNode):
    t = node.trace
    order = [e for e in topological_events(t) if not e.initial]
    for i, a in enumerate(order):
        for b in order[i + 1:]:
            if t.ordered(a.id, b.id):
                continue
            if is_satisfiable(conj(a.label, b.label)):
                continue
            if (is_satisfiable(conj(t.post(a.id), t.pre(b.id)))
                    and is_satisfiable(conj(t.post(b.id), t.pre(a.id)))):
                continue
            children = order_split(t, a.id, b.id)
            return Production("OrderSplit", {"a": a.id, "b": b.id}), children
    return None


def _bridged(t: ConcurrentTrace, a: str, b: str, phi: Formula) -> bool:
    target = conj(phi, negate_single(phi).primed())
    for e in t.events:
        if e.id not in (a, b) and t.has_path(a, e.id) and t.has_path(e.id, b):
            if implies(e.label, target):
                return True
    return False


def _necessary_event_action(tab: Tableau, node: TableauNode):
    t = node.trace
    system = tab.system
    order = topological_events(t)
    for a in order:
        if a.initial:
            continue
        for b in order:
            if b.id == a.id or not t.has_path(a.id, b.id) or not t.in_conflict(a.id, b.id):
                continue
            post_a, pre_b = t.post(a.id), t.pre(b.id)
            if is_satisfiable(conj(post_a, pre_b)):
                continue
            phi = interpolate(post_a, pre_b)
            if len(phi.atoms) != 1 or len(phi.atoms[0].negate()) != 1:
                continue
            # the bridge has to undo a condition that held at the start
            if is_satisfiable(conj(system.init, phi)):
                continue
            if _bridged(t, a.id, b.id, phi):
                continue
            try:
                children = necessary_event(t, a.id, b.id, phi, system, node.id)
            except RuleNotApplicable:
                continue
            return Production("NecessaryEvent", {"a": a.id, "b": b.id, "phi": phi.render()}), children
    return None


def _lne_candidates(tab: Tableau, t: ConcurrentTrace) -> list:
    init = t.initial_event
    if init is None:
        return []
    system = tab.system
    for b in topological_events(t):
        if b.initial or not t.has_path(init.id, b.id):
            continue
        incoming = [link for link in t.links if link.tgt == b.id]
        found = []
        for atom in t.pre(b.id).atoms:
            if not (isinstance(atom, LocLit) and atom.positive and atom.var in system.loc_vars):
                continue
            phi = Formula((atom,))
            if is_satisfiable(conj(init.label, phi.primed())):
                continue
            if any(implies(link.label, phi) for link in incoming):
                continue
            found.append((b, phi))
        if found:
            return found
    return []


def _lne_key(tab: Tableau, t: ConcurrentTrace, b: Event, phi: Formula):
    system = tab.system
    proc = system.loc_vars[phi.atoms[0].var]
    index = system.process_index(proc.name)
    if tab.heuristic == "naive":
        return (index,)
    makers = compatible_transitions(system, conj(negate_single(phi), phi.primed()))
    present = set()
    for e in t.events:
        if not e.initial and e.id != b.id:
            present |= _processes_of(system, e)
    touched = set()
    for g in makers:
        touched |= {p for p, _, _ in g.moves}
    return (len(makers), -len(touched & present), -len(touched), index)


def _last_necessary_action(tab: Tableau, node: TableauNode):
    t = node.trace
    cands = _lne_candidates(tab, t)
    if not cands:
        return None
    b, phi = min(cands, key=lambda c: _lne_key(tab, t, *c))
    children = last_necessary_event(t, b.id, phi, tab.system, node.id)
    return Production("LastNecessaryEvent", {"b": b.id, "phi": phi.render()}), children


FINITE_ORDER = {
    "smart": (_order_split_action, _necessary_event_action, _last_necessary_action),
    "naive": (_last_necessary_action, _necessary_event_action, _order_split_action),
}


# ---------------------------------------------------------------------------
# rule selection: infinite traces
# ---------------------------------------------------------------------------

def _ranking_action(tab: Tableau, node: TableauNode):
    t = node.trace
    witness = find_ranking(t, tab.system)
    if witness is None:
        return None
    var = witness.variable
    phi = lin({prime(var): 1, var: -1}, "<=", 0)
    if implies(t.invariant, phi):
        return None
    children = invariance_split(t, phi, node.id)
    params = {"phi": phi.render(), "witness": witness.as_dict()}
    return Production("InvarianceSplit", params), children


def _instantiate_action(tab: Tableau, node: TableauNode):
    t = node.trace
    best = None
    for e in t.cycle.events:
        if e.concrete:
            continue
        count = len(compatible_transitions(tab.system, e.label, t.invariant))
        if best is None or count < best[0]:
            best = (count, e)
    if best is None:
        return None
    e = best[1]
    return Production("InstantiateCycle", {"event": e.id}), instantiate_cycle(t, e.id, tab.system)


def _necessary_cycle_action(tab: Tableau, node: TableauNode):
    t = node.trace
    best = None
    for e in t.cycle.events:
        if not e.concrete:
            continue
        for phi in consumed_literals(e.label, tab.system):
            if cycle_reestablished(t, phi):
                continue
            count = len(reestablishers(t, phi, tab.system))
            if best is None or count < best[0]:
                best = (count, e, phi)
    if best is None:
        return None
    _, e, phi = best
    children, steps = necessary_cycle_chain(t, e.id, phi, tab.system, node.id)
    params = {"steps": [{"event": ev, "phi": p.render()} for ev, p in steps]}
    return Production("NecessaryCycleEvent", params), children


INFINITE_ORDER = (_ranking_action, _instantiate_action, _necessary_cycle_action)


# ---------------------------------------------------------------------------
# engine
# ---------------------------------------------------------------------------

def try_cover(tab: Tableau, node: TableauNode) -> int | None:
    ancestors = tab.ancestors(node.id)
    blocked = ancestors | {node.id}
    for cand_id in sorted(tab.nodes):
        if cand_id in blocked:
            continue
        cand = tab.nodes[cand_id]
        if cand.status == "unknown":
            continue
        if isinstance(cand.trace, InfiniteTrace) != isinstance(node.trace, InfiniteTrace):
            continue
        if tab.depends_on(cand_id, blocked):
            continue
        mapping = embed(cand.trace, node.trace)
        if mapping is None:
            continue
        node.status = "covered"
        node.covered_by = cand_id
        node.mapping = mapping
        node.closing = Production("Cover", {"target": cand_id, "mapping": mapping})
        return cand_id
    return None


def step(tab: Tableau, node: TableauNode) -> list:
    """Apply the first applicable action to an open node; returns new node ids."""
    tab.expanded += 1
    t = node.trace
    reason = contradiction_reason(t, tab.system)
    if reason is not None:
        node.status = "contradictory"
        node.closing = Production("ContradictionClose", {"reason": reason})
        return []
    if try_cover(tab, node) is not None:
        return []
    actions = INFINITE_ORDER if isinstance(t, InfiniteTrace) else FINITE_ORDER[tab.heuristic]
    for action in actions:
        result = action(tab, node)
        if result is None:
            continue
        production, children = result
        node.status = "expanded"
        new = []
        for child in children:
            child_node = tab.add_node(child, node.id, production)
            new.append(child_node.id)
        if production.rule == "InvarianceSplit":
            first = tab.nodes[new[0]]
            witness = RankingWitness(**production.params["witness"])
            if check_terminating(first.trace, witness):
                first.status = "terminating"
                first.closing = Production("TerminatingClose", witness.as_dict())
                new = new[1:]
        if not children:
            node.status = "contradictory"
            node.closing = Production("ContradictionClose", {
                "reason": f"{production.rule} has no cases",
                "rule": production.rule,
                "params": production.params,
            })
        return new
    node.status = "unknown"
    node.reason = "rule-gap"
    return []


def propagate(tab: Tableau) -> None:
    """Least-fixpoint closure; coverings on dependency cycles are reverted."""
    cyclic = [node for node in tab.nodes.values()
              if node.status == "covered" and tab.depends_on(node.covered_by, {node.id})]
    for node in cyclic:
        node.status = "open"
        node.covered_by = None
        node.mapping = None
        node.closing = None
    for node in tab.nodes.values():
        node.closed = False
    changed = True
    while changed:
        changed = False
        for node in tab.nodes.values():
            if node.closed:
                continue
            if node.status in ("contradictory", "terminating"):
                ok = True
            elif node.status == "expanded":
                ok = all(tab.nodes[c].closed for c in node.children)
            elif node.status == "covered":
                ok = tab.nodes[node.covered_by].closed
            else:
                ok = False
            if ok:
                node.closed = True
                changed = True


def run(system, prop: PropertySpec, heuristic: str = "smart", max_nodes: int = 10000,
        horizon: int | None = None) -> Verdict:
    if max_nodes <= 0:
        raise ValueError("node budget must be positive")
    started = time.perf_counter()
    tab = Tableau(system, prop, heuristic, horizon)
    queue = deque()
    for trace in initial_roots(system, prop):
        queue.append(tab.add_node(trace).id)
    verdict = None
    budget_hit = False
    while queue and not tab.proven:
        node = tab.nodes[queue.popleft()]
        if node.status != "open":
            continue
        if len(tab.nodes) >= max_nodes:
            budget_hit = True
            break
        new = step(tab, node)
        queue.extend(new)
        if node.status == "unknown" and isinstance(node.trace, ConcurrentTrace):
            realized = realize_counterexample(system, node.trace, horizon)
            if realized is not None:
                node.status = "violated"
                node.reason = None
                verdict = Verdict("violated", tab, realized)
                break
        propagate(tab)
    propagate(tab)
    tab.time_ms = int((time.perf_counter() - started) * 1000)
    if verdict is not None:
        return verdict
    if tab.proven:
        return Verdict("proven", tab)
    if budget_hit or queue:
        return Verdict("unknown", tab, reason="budget")
    return Verdict("unknown", tab, reason="rule-gap")


# ---------------------------------------------------------------------------
# counterexamples
# ---------------------------------------------------------------------------

def default_horizon(system, t: ConcurrentTrace) -> int:
    return 3 * max(1, len(t.events)) * max(1, len(system.processes))


def realize_counterexample(system, t: ConcurrentTrace, horizon: int | None = None) -> RealizedRun | None:
    """Breadth-first search for a system run matching ``t``.

    The run is padded with a virtual stutter step before the initial state
    and after the final one, matching how initial events and state
    predicates are placed.
    """
    if t.contradictory:
        return None
    horizon = default_horizon(system, t) if horizon is None else horizon
    order = [e.id for e in topological_events(t)]
    all_ids = frozenset(order)
    events = t.event_map
    preds: dict = {i: set() for i in order}
    for link in t.links:
        preds[link.tgt].add(link.src)
    conflicts = t.conflict_set
    names = [p.loc_var for p in system.processes] + list(system.int_names)

    def key(state) -> tuple:
        return tuple(state[n] for n in names)

    def choices(pre, post, matched, first=False):
        cands = [i for i in order if i not in matched and (first or not events[i].initial)
                 and events[i].label.evaluate(pre, post)]
        open_links = [link for link in t.links if link.src in matched and link.tgt not in matched]
        for r in range(len(cands) + 1):
            for subset in itertools.combinations(cands, r):
                chosen = set(subset)
                done = matched | chosen
                if any(not preds[i] <= done for i in chosen):
                    continue
                if any((x, y) in conflicts for x in chosen for y in chosen if x != y):
                    continue
                if any(link.tgt not in chosen and not link.label.evaluate(pre, post) for link in open_links):
                    continue
                yield frozenset(chosen)

    s0 = system.initial_state
    parents: dict = {}
    queue = deque()
    for chosen in choices(s0, s0, frozenset(), first=True):
        k = (key(s0), chosen)
        if k not in parents:
            parents[k] = (None, None, s0, chosen)
            queue.append((s0, chosen, 0))

    def rebuild(k, final_chosen=None):
        states, trans, chosen_seq = [], [], []
        while k is not None:
            prev, name, state, chosen = parents[k]
            states.append(state)
            trans.append(name)
            chosen_seq.append(chosen)
            k = prev
        states.reverse()
        trans.reverse()
        chosen_seq.reverse()
        positions = {}
        for step_index, chosen in enumerate(chosen_seq):
            for i in chosen:
                positions[i] = step_index
        if final_chosen:
            for i in final_chosen:
                positions[i] = len(states)
        comp = Computation(tuple(states), None, tuple(trans[1:]))
        return RealizedRun(comp, positions)

    while queue:
        state, matched, depth = queue.popleft()
        k = (key(state), matched)
        if matched == all_ids:
            return _checked(rebuild(k), t)
        for chosen in choices(state, state, matched):
            if matched | chosen == all_ids:
                return _checked(rebuild(k, chosen), t)
        if depth >= horizon:
            continue
        for g, nxt in system.successors(state):
            for chosen in choices(state, nxt, matched):
                nk = (key(nxt), matched | chosen)
                if nk in parents:
                    continue
                parents[nk] = (k, g.name, nxt, chosen)
                queue.append((nxt, matched | chosen, depth + 1))
    return None


def _checked(run: RealizedRun, t: ConcurrentTrace) -> RealizedRun:
    states = extend_run(run.computation.states)
    if find_embedding_positions(states, t) is None:
        raise AssertionError("realized run does not match its trace")
    return run


# ---------------------------------------------------------------------------
# reports
# ---------------------------------------------------------------------------

def _production_dict(p: Production | None):
    if p is None:
        return None
    return {"rule": p.rule, "params": p.params}


def report(verdict: Verdict) -> dict:
    tab = verdict.tableau
    system = tab.system
    nodes = []
    for nid in sorted(tab.nodes):
        n = tab.nodes[nid]
        nodes.append({
            "id": n.id,
            "parent": n.parent,
            "rule": n.production.rule if n.production else None,
            "params": n.production.params if n.production else None,
            "children": list(n.children),
            "status": n.display_status,
            "covered_by": n.covered_by,
            "closing": _production_dict(n.closing),
            "reason": n.reason,
            "trace": trace_to_dict(n.trace),
            "trace_text": render_trace(n.trace, system),
        })
    witnesses = []
    for nid in sorted(tab.nodes):
        n = tab.nodes[nid]
        if n.closing is not None and n.closing.rule == "TerminatingClose":
            witnesses.append({"node": nid, **n.closing.params})
    counterexample = None
    if verdict.witness is not None:
        comp = verdict.witness.computation
        counterexample = {
            "transitions": list(comp.transitions),
            "states": [dict(s) for s in comp.states],
            "positions": dict(sorted(verdict.witness.positions.items(), key=lambda kv: natural_key(kv[0]))),
        }
    return {
        "format": REPORT_FORMAT,
        "verdict": verdict.kind,
        "reason": verdict.reason,
        "heuristic": tab.heuristic,
        "model": render_model(system),
        "property": tab.prop.text,
        "nodes": nodes,
        "coverings": [{"source": s, "target": d, "mapping": tab.nodes[s].mapping} for s, d in tab.coverings],
        "witnesses": witnesses,
        "counterexample": counterexample,
        "stats": {"nodes": len(tab.nodes), "expanded": tab.expanded, "time_ms": tab.time_ms},
    }


def report_json(verdict: Verdict) -> str:
    return json.dumps(report(verdict), indent=2, sort_keys=True) + "\n"


def _dot_escape(text: str) -> str:
    return text.replace("\\", "\\\\").replace('"', '\\"')


def export_dot(tab: Tableau) -> str:
    lines = ["digraph tableau {", '  node [shape=box, fontname="monospace"];']
    for nid in sorted(tab.nodes):
        n = tab.nodes[nid]
        label = f"{nid}: {render_trace(n.trace, tab.system)}"
        if n.status == "contradictory":
            label += "\n⊥"
        elif n.status == "terminating":
            label += f"\nTerminating: {n.closing.params['variable']}"
        elif n.status == "unknown":
            label += "\n?"
        elif n.status == "violated":
            label += "\nviolated"
        lines.append(f'  n{nid} [label="{_dot_escape(label)}"];')
    for nid in sorted(tab.nodes):
        n = tab.nodes[nid]
        for c in n.children:
            rule = tab.nodes[c].production.rule
            lines.append(f'  n{nid} -> n{c} [label="{rule}"];')
    for src, dst in tab.coverings:
        lines.append(f"  n{src} -> n{dst} [style=dashed];")
    lines.append("}")
    return "\n".join(lines) + "\n"
