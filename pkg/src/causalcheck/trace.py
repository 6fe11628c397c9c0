"""Concurrent traces, their semantics over computations, and embeddings."""

from __future__ import annotations

import re
from dataclasses import dataclass, field, replace
from functools import cached_property
from typing import Mapping, Sequence

from .logic import TRUE, Formula, conj, implies, is_satisfiable, post_state, pre_state


class TraceError(Exception):
    pass


def natural_key(text: str) -> tuple:
    return tuple(int(p) if p.isdigit() else p for p in re.split(r"(\d+)", text))


@dataclass(frozen=True)
class Event:
    id: str
    label: Formula = TRUE
    transition: str | None = None
    initial: bool = False

    @property
    def concrete(self) -> bool:
        return self.transition is not None


@dataclass(frozen=True)
class Link:
    src: str
    tgt: str
    label: Formula = TRUE


def _pair(a: str, b: str) -> tuple:
    return (a, b) if natural_key(a) <= natural_key(b) else (b, a)


@dataclass(frozen=True)
class ConcurrentTrace:
    events: tuple = ()
    links: tuple = ()
    conflicts: tuple = ()  # sorted pairs
    contradictory: bool = False

    # -- construction -------------------------------------------------------

    def with_event(self, event: Event) -> "ConcurrentTrace":
        if event.id in self.event_map:
            raise TraceError(f"duplicate event id {event.id}")
        return replace(self, events=self.events + (event,))

    def with_link(self, src: str, tgt: str, label: Formula = TRUE) -> "ConcurrentTrace":
        return replace(self, links=self.links + (Link(src, tgt, label),))

    def with_conflict(self, a: str, b: str) -> "ConcurrentTrace":
        pair = _pair(a, b)
        if pair in self.conflicts:
            return self
        return replace(self, conflicts=tuple(sorted(self.conflicts + (pair,),
                                                    key=lambda p: (natural_key(p[0]), natural_key(p[1])))))

    def with_label(self, event_id: str, label: Formula, transition: str | None = None) -> "ConcurrentTrace":
        events = tuple(
            replace(e, label=label, transition=transition if transition is not None else e.transition)
            if e.id == event_id else e
            for e in self.events)
        return replace(self, events=events)

    def mark_contradictory(self) -> "ConcurrentTrace":
        return replace(self, contradictory=True)

    # -- queries ------------------------------------------------------------

    @cached_property
    def event_map(self) -> dict:
        return {e.id: e for e in self.events}

    def event(self, event_id: str) -> Event:
        try:
            return self.event_map[event_id]
        except KeyError:
            raise TraceError(f"no event {event_id}") from None

    @cached_property
    def successors(self) -> dict:
        succ = {e.id: [] for e in self.events}
        for link in self.links:
            succ.setdefault(link.src, []).append(link.tgt)
        return succ

    @cached_property
    def conflict_set(self) -> frozenset:
        return frozenset(self.conflicts)

    def in_conflict(self, a: str, b: str) -> bool:
        return _pair(a, b) in self.conflict_set

    @cached_property
    def _reach(self) -> dict:
        out = {}
        for e in self.events:
            seen = set()
            stack = list(self.successors.get(e.id, ()))
            while stack:
                n = stack.pop()
                if n in seen:
                    continue
                seen.add(n)
                stack.extend(self.successors.get(n, ()))
            out[e.id] = frozenset(seen)
        return out

    def has_path(self, a: str, b: str) -> bool:
        return b in self._reach.get(a, ())

    def ordered(self, a: str, b: str) -> bool:
        return self.has_path(a, b) or self.has_path(b, a)

    @cached_property
    def initial_event(self) -> Event | None:
        for e in self.events:
            if e.initial:
                return e
        return None

    def pre(self, event_id: str) -> Formula:
        return pre_state(self.event(event_id).label)

    def post(self, event_id: str) -> Formula:
        return post_state(self.event(event_id).label)

    def diagnose(self) -> list:
        problems = []
        ids = set()
        for e in self.events:
            if e.id in ids:
                problems.append(f"duplicate event id {e.id}")
            ids.add(e.id)
        for link in self.links:
            if link.src not in ids or link.tgt not in ids:
                problems.append(f"link {link.src} -> {link.tgt} has a missing endpoint")
            if link.src == link.tgt:
                problems.append(f"self-link on {link.src}")
        for a, b in self.conflicts:
            if a not in ids or b not in ids:
                problems.append(f"conflict {a} # {b} has a missing endpoint")
            if a == b:
                problems.append(f"self-conflict on {a}")
        if not problems:
            try:
                topological_events(self)
            except TraceError as exc:
                problems.append(str(exc))
        return problems

    def text(self, system=None) -> str:
        return render_trace(self, system)


@dataclass(frozen=True)
class InfiniteTrace:
    """Stem occurs once, cycle infinitely often.

    ``invariant`` is a transition predicate that holds on every step of the
    repeating part; it is the global cycle constraint added by invariance
    splits.
    """

    stem: ConcurrentTrace = field(default_factory=ConcurrentTrace)
    cycle: ConcurrentTrace = field(default_factory=ConcurrentTrace)
    invariant: Formula = TRUE

    @property
    def contradictory(self) -> bool:
        return self.stem.contradictory or self.cycle.contradictory

    def diagnose(self) -> list:
        problems = ["stem: " + p for p in self.stem.diagnose()]
        problems += ["cycle: " + p for p in self.cycle.diagnose()]
        overlap = set(self.stem.event_map) & set(self.cycle.event_map)
        if overlap:
            problems.append(f"stem and cycle share ids {sorted(overlap)}")
        return problems

    def text(self, system=None) -> str:
        return render_trace(self, system)


@dataclass(frozen=True)
class Computation:
    """States ``s0..sn``; with ``loop_start`` the step ``sn -> s[loop_start]``
    closes a lasso."""

    states: tuple
    loop_start: int | None = None
    transitions: tuple = ()

    @property
    def steps(self) -> int:
        return len(self.states) - 1


def well_formed(t) -> bool:
    return not t.diagnose()


def topological_events(t: ConcurrentTrace) -> list:
    """Events in link order, ties broken by natural id order."""
    indeg = {e.id: 0 for e in t.events}
    for link in t.links:
        indeg[link.tgt] += 1
    ready = sorted((i for i, d in indeg.items() if d == 0), key=natural_key)
    out = []
    while ready:
        n = ready.pop(0)
        out.append(n)
        changed = False
        for m in t.successors.get(n, ()):
            indeg[m] -= 1
            if indeg[m] == 0:
                ready.append(m)
                changed = True
        if changed:
            ready.sort(key=natural_key)
    if len(out) != len(t.events):
        raise TraceError("links form a cycle")
    return [t.event_map[i] for i in out]


# ---------------------------------------------------------------------------
# membership
# ---------------------------------------------------------------------------

def _step_holds(f: Formula, states: Sequence, i: int) -> bool:
    return f.evaluate(states[i], states[i + 1])


def is_member(c: Computation, t: ConcurrentTrace) -> bool:
    """Does some assignment of events to steps of the padded run satisfy every constraint?"""
    if t.contradictory:
        return False
    return find_embedding_positions(extend_run(c.states), t) is not None


def find_embedding_positions(states: Sequence, t: ConcurrentTrace) -> dict | None:
    """Event -> step index over an already padded state sequence.

    Initial events may only sit on step 0.
    """
    n = len(states) - 1
    order = topological_events(t)
    if not order:
        return {}
    if n <= 0:
        return None
    ok = {}
    for e in order:
        steps = range(1) if e.initial else range(n)
        ok[e.id] = [i for i in steps if _step_holds(e.label, states, i)]
        if not ok[e.id]:
            return None
    link_ok = {}
    incoming: dict = {e.id: [] for e in order}
    for link in t.links:
        if link.label.is_true:
            holds = [True] * n
        else:
            holds = [_step_holds(link.label, states, i) for i in range(n)]
        # prefix[i] = number of failing steps among 0..i-1
        prefix = [0]
        for h in holds:
            prefix.append(prefix[-1] + (0 if h else 1))
        link_ok[link] = prefix
        incoming[link.tgt].append(link)
    conflicts: dict = {e.id: [] for e in order}
    for a, b in t.conflicts:
        conflicts[a].append(b)
        conflicts[b].append(a)
    pos: dict = {}

    def assign(k: int) -> bool:
        if k == len(order):
            return True
        e = order[k]
        for i in ok[e.id]:
            good = True
            for link in incoming[e.id]:
                p = pos[link.src]
                if p > i:
                    good = False
                    break
                prefix = link_ok[link]
                # steps strictly between p and i
                if p + 1 < i and prefix[i] - prefix[p + 1] > 0:
                    good = False
                    break
            if not good:
                continue
            if any(pos.get(o) == i for o in conflicts[e.id]):
                continue
            pos[e.id] = i
            if assign(k + 1):
                return True
            del pos[e.id]
        return False

    return dict(pos) if assign(0) else None


def unroll(c: Computation, copies: int) -> list:
    """Loop states repeated ``copies`` times, closed by the loop's first state."""
    loop = list(c.states[c.loop_start:])
    return loop * copies + [loop[0]]


def is_member_lasso(c: Computation, t: InfiniteTrace) -> bool:
    if c.loop_start is None:
        raise TraceError("computation is not a lasso")
    if t.contradictory:
        return False
    loop = list(c.states[c.loop_start:])
    loop_steps = [(loop[i], loop[(i + 1) % len(loop)]) for i in range(len(loop))]
    if not t.invariant.is_true:
        if not all(t.invariant.evaluate(a, b) for a, b in loop_steps):
            return False
    k = len(t.cycle.events) + 1
    if t.cycle.events and find_embedding_positions(unroll(c, k), t.cycle) is None:
        return False
    if t.stem.events:
        prefix = [c.states[0]] + list(c.states[:c.loop_start]) + unroll(c, len(t.stem.events) + 1)
        if find_embedding_positions(prefix, t.stem) is None:
            return False
    return True


def extend_run(states: Sequence) -> list:
    """A system run padded with a virtual pre-initial and final stutter step."""
    states = list(states)
    return [states[0]] + states + [states[-1]]


# ---------------------------------------------------------------------------
# embedding
# ---------------------------------------------------------------------------

def _events_implying(big: ConcurrentTrace, extra: Formula, label: Formula) -> list:
    return [e for e in big.events if implies(conj(e.label, extra), label)]


def _path_preserves(big: ConcurrentTrace, a: str, b: str, label: Formula, extra: Formula) -> bool:
    """Is there a link path a -> b all of whose edges and inner events imply ``label``?"""
    if label.is_true:
        return big.has_path(a, b)
    good_edge: dict = {}
    for link in big.links:
        if implies(conj(link.label, extra), label):
            good_edge.setdefault(link.src, []).append(link.tgt)
    seen = {a}
    stack = [a]
    while stack:
        n = stack.pop()
        for m in good_edge.get(n, ()):
            if m == b:
                return True
            if m in seen:
                continue
            if implies(conj(big.event(m).label, extra), label):
                seen.add(m)
                stack.append(m)
    return False


def _embed_component(small: ConcurrentTrace, big: ConcurrentTrace, extra: Formula,
                     used: set) -> dict | None:
    if len(small.events) > len(big.events) - len(used):
        return None
    order = topological_events(small)
    cands = {e.id: [b.id for b in _events_implying(big, extra, e.label)
                    if b.initial or not e.initial] for e in order}
    for e in order:
        if e.initial:
            cands[e.id] = [b for b in cands[e.id] if big.event(b).initial]
        if not cands[e.id]:
            return None
    links_by_tgt: dict = {}
    for link in small.links:
        links_by_tgt.setdefault(link.tgt, []).append(link)
    conflicts: dict = {}
    for a, b in small.conflicts:
        conflicts.setdefault(a, []).append(b)
        conflicts.setdefault(b, []).append(a)
    mapping: dict = {}

    def assign(k: int) -> bool:
        if k == len(order):
            return True
        e = order[k]
        for cand in cands[e.id]:
            if cand in used:
                continue
            ok = True
            for link in links_by_tgt.get(e.id, ()):
                if not _path_preserves(big, mapping[link.src], cand, link.label, extra):
                    ok = False
                    break
            if ok:
                for other in conflicts.get(e.id, ()):
                    if other in mapping and not big.in_conflict(mapping[other], cand):
                        ok = False
                        break
            if not ok:
                continue
            mapping[e.id] = cand
            used.add(cand)
            if assign(k + 1):
                return True
            del mapping[e.id]
            used.discard(cand)
        return False

    return dict(mapping) if assign(0) else None


def embed(small, big) -> dict | None:
    """First event mapping showing every computation of ``big`` matches ``small``."""
    if isinstance(small, InfiniteTrace) != isinstance(big, InfiniteTrace):
        return None
    if isinstance(small, ConcurrentTrace):
        if small.contradictory and not big.contradictory:
            return None
        return _embed_component(small, big, TRUE, set())
    if not implies(big.invariant, small.invariant):
        return None
    if small.contradictory and not big.contradictory:
        return None
    cycle_map = _embed_component(small.cycle, big.cycle, big.invariant, set())
    if cycle_map is None:
        return None
    stem_map = _embed_component(small.stem, big.stem, TRUE, set())
    if stem_map is None:
        return None
    return {**stem_map, **cycle_map}


def check_mapping(small, big, mapping: Mapping) -> bool:
    """Validate a recorded embedding without searching."""
    if isinstance(small, InfiniteTrace):
        if not isinstance(big, InfiniteTrace) or not implies(big.invariant, small.invariant):
            return False
        parts = [(small.stem, big.stem, TRUE), (small.cycle, big.cycle, big.invariant)]
    else:
        if isinstance(big, InfiniteTrace):
            return False
        parts = [(small, big, TRUE)]
    expected = set()
    for s, _, _ in parts:
        expected |= set(s.event_map)
    if set(mapping) != expected or len(set(mapping.values())) != len(mapping):
        return False
    for s, b, extra in parts:
        for e in s.events:
            target = mapping[e.id]
            if target not in b.event_map:
                return False
            be = b.event(target)
            if e.initial and not be.initial:
                return False
            if not implies(conj(be.label, extra), e.label):
                return False
        for link in s.links:
            if not _path_preserves(b, mapping[link.src], mapping[link.tgt], link.label, extra):
                return False
        for x, y in s.conflicts:
            if not b.in_conflict(mapping[x], mapping[y]):
                return False
    if small.contradictory and not big.contradictory:
        return False
    return True


# ---------------------------------------------------------------------------
# rendering
# ---------------------------------------------------------------------------

def render_label(e: Event, system=None) -> str:
    base = None
    if system is not None and e.initial:
        base, name = system.init.primed(), "init"
    elif system is not None and e.transition is not None and e.transition in system.transition_map:
        base, name = system.transition_map[e.transition].relation, e.transition
    if base is not None and set(base.atoms) <= set(e.label.atoms):
        extra = [a for a in e.label.atoms if a not in set(base.atoms)]
        if not extra:
            return name
        return name + " & " + Formula(extra).render()
    return e.label.render()


def _render_component(t: ConcurrentTrace, system) -> str:
    parts = [f"{e.id}[{render_label(e, system)}]" for e in t.events]
    for link in t.links:
        if link.label.is_true:
            parts.append(f"{link.src} -> {link.tgt}")
        else:
            parts.append(f"{link.src} ->[{link.label.render()}] {link.tgt}")
    parts.extend(f"{a} # {b}" for a, b in t.conflicts)
    if t.contradictory:
        parts.append("false")
    return "; ".join(parts)


def render_trace(t, system=None) -> str:
    if isinstance(t, ConcurrentTrace):
        return _render_component(t, system)
    stem = _render_component(t.stem, system)
    inner = _render_component(t.cycle, system)
    text = (stem + " " if stem else "") + f"( {inner} )^w"
    if not t.invariant.is_true:
        text += f" inv[{t.invariant.render()}]"
    return text


def trace_to_dict(t) -> dict:
    if isinstance(t, InfiniteTrace):
        return {"stem": trace_to_dict(t.stem), "cycle": trace_to_dict(t.cycle),
                "invariant": t.invariant.render()}
    return {
        "events": [{"id": e.id, "label": e.label.render(), "transition": e.transition,
                    "initial": e.initial} for e in t.events],
        "links": [{"src": link.src, "tgt": link.tgt, "label": link.label.render()} for link in t.links],
        "conflicts": [list(p) for p in t.conflicts],
        "contradictory": t.contradictory,
    }


def trace_from_dict(data: Mapping, parse) -> ConcurrentTrace | InfiniteTrace:
    """Inverse of :func:`trace_to_dict`; ``parse`` turns label text into a Formula."""
    if "cycle" in data:
        return InfiniteTrace(trace_from_dict(data["stem"], parse), trace_from_dict(data["cycle"], parse),
                             parse(data["invariant"]))
    events = tuple(Event(e["id"], parse(e["label"]), e.get("transition"), bool(e.get("initial")))
                   for e in data["events"])
    links = tuple(Link(link["src"], link["tgt"], parse(link["label"])) for link in data["links"])
    conflicts = tuple(tuple(p) for p in data["conflicts"])
    return ConcurrentTrace(events, links, conflicts, bool(data.get("contradictory")))


def is_satisfiable_trace_labels(t: ConcurrentTrace) -> bool:
    return all(is_satisfiable(e.label) for e in t.events) and all(
        is_satisfiable(link.label) for link in t.links)
