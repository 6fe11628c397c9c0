"""Synchronised concurrent transition systems and their global transitions."""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Mapping

from .logic import (
    TRUE,
    Formula,
    LocLit,
    LocSame,
    conj,
    is_primed,
    linear,
    prime,
)


class ModelError(Exception):
    pass


class CompositionError(ModelError):
    pass


LOC_PREFIX = "loc_"


def location_variable(process: str) -> str:
    return LOC_PREFIX + process


@dataclass(frozen=True)
class LinearTerm:
    """``sum(coef * var) + const`` over integer variables."""

    terms: tuple = ()
    const: int = 0

    def evaluate(self, state: Mapping) -> int:
        return sum(c * state[v] for v, c in self.terms) + self.const

    def variables(self) -> frozenset:
        return frozenset(v for v, _ in self.terms)

    def render(self) -> str:
        out = ""
        for v, c in self.terms:
            if not out:
                out = ("-" if c < 0 else "") + (v if abs(c) == 1 else f"{abs(c)}*{v}")
            else:
                out += (" - " if c < 0 else " + ") + (v if abs(c) == 1 else f"{abs(c)}*{v}")
        if not out:
            return str(self.const)
        if self.const > 0:
            out += f" + {self.const}"
        elif self.const < 0:
            out += f" - {-self.const}"
        return out


@dataclass(frozen=True)
class IntVar:
    name: str
    init: int
    lower: int | None = None
    upper: int | None = None

    def in_bounds(self, value: int) -> bool:
        if self.lower is not None and value < self.lower:
            return False
        return self.upper is None or value <= self.upper


@dataclass(frozen=True)
class Process:
    name: str
    locations: tuple
    initial: str

    @property
    def loc_var(self) -> str:
        return location_variable(self.name)

    @property
    def domain(self) -> frozenset:
        return frozenset(self.locations)

    def at(self, location: str, primed: bool = False, positive: bool = True) -> LocLit:
        var = prime(self.loc_var) if primed else self.loc_var
        return LocLit(var, location, positive, self.domain)


@dataclass(frozen=True)
class LocalTransition:
    name: str
    process: str
    source: str
    target: str
    guard: Formula = TRUE
    updates: tuple = ()  # ((var, LinearTerm), ...)


@dataclass(frozen=True)
class SyncVector:
    name: str
    members: tuple


@dataclass(frozen=True)
class GlobalTransition:
    name: str
    members: tuple
    relation: Formula
    guard: Formula
    moves: tuple  # ((process, source, target), ...)
    updates: tuple  # ((var, LinearTerm), ...)

    def enabled(self, state: Mapping) -> bool:
        for proc, src, _ in self.moves:
            if state[location_variable(proc)] != src:
                return False
        return self.guard.evaluate(state)

    def fire(self, state: Mapping) -> dict | None:
        """Successor state, or None when the transition is disabled."""
        if not self.enabled(state):
            return None
        nxt = dict(state)
        for proc, _, tgt in self.moves:
            nxt[location_variable(proc)] = tgt
        for var, term in self.updates:
            nxt[var] = term.evaluate(state)
        return nxt


@dataclass(frozen=True)
class TransitionSystem:
    name: str
    variables: tuple = ()  # IntVar
    processes: tuple = ()  # Process
    locals: tuple = ()  # LocalTransition
    syncs: tuple | None = None  # SyncVector; None means free interleaving
    annotations: tuple = field(default=(), compare=False)

    def __post_init__(self):
        self.validate()

    # -- lookup -------------------------------------------------------------

    @cached_property
    def process_map(self) -> dict:
        return {p.name: p for p in self.processes}

    @cached_property
    def local_map(self) -> dict:
        return {t.name: t for t in self.locals}

    @cached_property
    def int_names(self) -> tuple:
        return tuple(v.name for v in self.variables)

    @cached_property
    def loc_vars(self) -> dict:
        return {p.loc_var: p for p in self.processes}

    def process_index(self, name: str) -> int:
        return [p.name for p in self.processes].index(name)

    # -- validation ---------------------------------------------------------

    def validate(self):
        if not self.processes:
            raise ModelError("no processes")
        pnames = [p.name for p in self.processes]
        for i, name in enumerate(pnames):
            if name in pnames[:i]:
                raise ModelError(f"duplicate process {name}")
        names = [v.name for v in self.variables] + [p.loc_var for p in self.processes]
        seen = set()
        for n in names:
            if n in seen:
                raise ModelError(f"duplicate variable {n}")
            seen.add(n)
        for v in self.variables:
            if v.name.startswith(LOC_PREFIX):
                raise ModelError(f"integer variable {v.name} uses the reserved prefix {LOC_PREFIX}")
            if not v.in_bounds(v.init):
                raise ModelError(f"initial value of {v.name} is outside its bounds")
        for p in self.processes:
            if not p.locations:
                raise ModelError(f"process {p.name} has no locations")
            if len(set(p.locations)) != len(p.locations):
                raise ModelError(f"process {p.name} repeats a location")
            if p.initial not in p.locations:
                raise ModelError(f"initial location {p.initial} of {p.name} is not declared")
        ints = set(v.name for v in self.variables)
        tnames = set()
        for t in self.locals:
            if t.name in tnames:
                raise ModelError(f"duplicate transition {t.name}")
            tnames.add(t.name)
            proc = self.process_map.get(t.process)
            if proc is None:
                raise ModelError(f"transition {t.name} names unknown process {t.process}")
            for loc in (t.source, t.target):
                if loc not in proc.locations:
                    raise ModelError(f"transition {t.name}: {loc} is not a location of {t.process}")
            for var in t.guard.variables():
                if is_primed(var):
                    raise ModelError(f"guard of {t.name} mentions primed variable {var}")
                if var not in ints and var not in self.loc_vars:
                    raise ModelError(f"guard of {t.name} mentions unknown variable {var}")
            assigned = set()
            for var, term in t.updates:
                if var not in ints:
                    raise ModelError(f"transition {t.name} updates unknown variable {var}")
                if var in assigned:
                    raise ModelError(f"transition {t.name} updates {var} twice")
                assigned.add(var)
                for u in term.variables():
                    if u not in ints:
                        raise ModelError(f"update in {t.name} reads unknown variable {u}")
        if self.syncs is not None:
            snames = set()
            used = set()
            for s in self.syncs:
                if s.name in snames:
                    raise ModelError(f"duplicate sync vector {s.name}")
                snames.add(s.name)
                if not s.members:
                    raise ModelError(f"sync vector {s.name} is empty")
                procs = set()
                for m in s.members:
                    t = self.local_map.get(m)
                    if t is None:
                        raise ModelError(f"sync vector {s.name} names unknown transition {m}")
                    if t.process in procs:
                        raise ModelError(f"sync vector {s.name} has two members of process {t.process}")
                    procs.add(t.process)
                    used.add(m)
            for t in self.locals:
                if t.name not in used:
                    raise ModelError(f"transition {t.name} is not part of any sync vector")

    # -- semantics ----------------------------------------------------------

    @cached_property
    def init(self) -> Formula:
        """Initial condition as a current-state predicate."""
        atoms = [p.at(p.initial) for p in self.processes]
        for v in self.variables:
            atoms.append(linear({v.name: 1}, "=", v.init))
        return conj(*atoms)

    @cached_property
    def initial_state(self) -> dict:
        state = {p.loc_var: p.initial for p in self.processes}
        state.update({v.name: v.init for v in self.variables})
        return state

    @cached_property
    def transitions(self) -> tuple:
        return tuple(compose(self))

    @cached_property
    def transition_map(self) -> dict:
        return {g.name: g for g in self.transitions}

    @cached_property
    def stutter(self) -> Formula:
        """Relation of a step that changes nothing."""
        atoms = [LocSame(p.loc_var, True, p.domain) for p in self.processes]
        for v in self.variables:
            atoms.append(linear({prime(v.name): 1, v.name: -1}, "=", 0))
        return conj(*atoms)

    def successors(self, state: Mapping):
        for g in self.transitions:
            nxt = g.fire(state)
            if nxt is not None:
                yield g, nxt


def compose(system: TransitionSystem) -> list:
    """Global transitions in declaration order."""
    if system.syncs is None:
        vectors = [SyncVector(t.name, (t.name,)) for t in system.locals]
    else:
        vectors = list(system.syncs)
    out = []
    for vec in vectors:
        members = [system.local_map[m] for m in vec.members]
        touched = {m.process for m in members}
        if len(touched) != len(members):
            raise CompositionError(f"sync vector {vec.name} has two members of one process")
        updates: dict = {}
        for m in members:
            for var, term in m.updates:
                if var in updates and updates[var] != term:
                    raise CompositionError(
                        f"sync vector {vec.name} assigns {var} conflicting values")
                updates[var] = term
        atoms = []
        guards = []
        for m in members:
            proc = system.process_map[m.process]
            guards.append(m.guard)
            atoms.append(proc.at(m.source))
            atoms.append(proc.at(m.target, primed=True))
        for p in system.processes:
            if p.name not in touched:
                atoms.append(LocSame(p.loc_var, True, p.domain))
        for v in system.variables:
            term = updates.get(v.name)
            coefs = {prime(v.name): 1}
            if term is None:
                coefs[v.name] = coefs.get(v.name, 0) - 1
                atoms.append(linear(coefs, "=", 0))
            else:
                for u, c in term.terms:
                    coefs[u] = coefs.get(u, 0) - c
                atoms.append(linear(coefs, "=", term.const))
        guard = conj(*guards)
        relation = conj(guard, *atoms)
        ordered_updates = tuple((v.name, updates[v.name]) for v in system.variables if v.name in updates)
        out.append(GlobalTransition(
            name=vec.name,
            members=tuple(vec.members),
            relation=relation,
            guard=guard,
            moves=tuple((m.process, m.source, m.target) for m in members),
            updates=ordered_updates,
        ))
    return out


def transition_count(system: TransitionSystem) -> int:
    return len(system.transitions)
