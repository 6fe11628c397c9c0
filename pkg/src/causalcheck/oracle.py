"""Explicit-state ground truth: reachability, lasso search, run enumeration."""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from typing import Iterator, Mapping

from .logic import Formula, Linear, LocLit
from .trace import Computation

DEFAULT_CAP = 10**6


class OracleError(Exception):
    pass


class StateCapExceeded(OracleError):
    pass


@dataclass(frozen=True)
class Lasso:
    prefix: tuple  # states before the loop
    loop: tuple  # loop states; the last one steps back to loop[0]
    prefix_transitions: tuple = ()
    loop_transitions: tuple = ()

    def computation(self) -> Computation:
        states = self.prefix + self.loop
        return Computation(states, len(self.prefix), self.prefix_transitions + self.loop_transitions)


def _names(system) -> list:
    return [p.loc_var for p in system.processes] + list(system.int_names)


def _freeze(system, state: Mapping) -> tuple:
    return tuple(state[n] for n in _names(system))


def _thaw(system, key: tuple) -> dict:
    return dict(zip(_names(system), key))


def _require_bounds(system):
    for v in system.variables:
        if v.lower is None or v.upper is None:
            raise OracleError(f"integer variable {v.name} needs declared bounds for explicit search")


class _Step:
    """One global transition compiled to work on state tuples."""

    def __init__(self, system, g, index: dict):
        self.name = g.name
        self.moves = tuple((index[f"loc_{p}"], src, tgt) for p, src, tgt in g.moves)
        self.locs, self.lins = [], []
        for atom in g.guard.atoms:
            if isinstance(atom, LocLit):
                self.locs.append((index[atom.var], atom.value, atom.positive))
            elif isinstance(atom, Linear):
                self.lins.append((tuple((index[v], c) for v, c in atom.terms), atom.op, atom.const))
            else:
                raise OracleError(f"guard of {g.name} has an unsupported atom {atom.render()}")
        bounds = {v.name: v for v in system.variables}
        self.updates = tuple((index[v], tuple((index[u], c) for u, c in term.terms), term.const, bounds[v])
                             for v, term in g.updates)

    def fire(self, key: tuple) -> tuple | None:
        for i, src, _ in self.moves:
            if key[i] != src:
                return None
        for i, value, positive in self.locs:
            if (key[i] == value) != positive:
                return None
        for terms, op, const in self.lins:
            total = sum(c * key[i] for i, c in terms)
            if not (total <= const if op == "<=" else total >= const if op == ">=" else total == const):
                return None
        nxt = list(key)
        for i, _, tgt in self.moves:
            nxt[i] = tgt
        for i, terms, const, var in self.updates:
            value = sum(c * key[j] for j, c in terms) + const
            if not var.in_bounds(value):
                raise OracleError(f"{var.name} = {value} leaves its declared range")
            nxt[i] = value
        return tuple(nxt)


_compiled: dict = {}


def _steps(system) -> tuple:
    hit = _compiled.get(id(system))
    if hit is None or hit[0] is not system:
        index = {n: i for i, n in enumerate(_names(system))}
        hit = _compiled[id(system)] = (system, tuple(_Step(system, g, index) for g in system.transitions))
    return hit[1]


def successors(system, key: tuple) -> list:
    """(transition name, successor key) pairs in transition order."""
    out = []
    for st in _steps(system):
        nxt = st.fire(key)
        if nxt is not None:
            out.append((st.name, nxt))
    return out


def _reachable_keys(system, cap: int) -> set:
    _require_bounds(system)
    start = _freeze(system, system.initial_state)
    seen = {start}
    queue = deque([start])
    while queue:
        key = queue.popleft()
        for _, nxt in successors(system, key):
            if nxt not in seen:
                seen.add(nxt)
                if len(seen) > cap:
                    raise StateCapExceeded(f"more than {cap} reachable states")
                queue.append(nxt)
    return seen


def enumerate_reachable(system, cap: int = DEFAULT_CAP) -> set:
    return {_freeze_dict(_thaw(system, k)) for k in _reachable_keys(system, cap)}


def _freeze_dict(state: Mapping) -> tuple:
    return tuple(sorted(state.items()))


def count_reachable(system, cap: int = DEFAULT_CAP) -> int:
    return len(_reachable_keys(system, cap))


def check_reachability(system, target, cap: int = DEFAULT_CAP) -> Computation | None:
    """Shortest run that fires transition ``target`` (a name) or reaches a
    state satisfying ``target`` (a state Formula)."""
    _require_bounds(system)
    start = _freeze(system, system.initial_state)
    is_pred = isinstance(target, Formula)
    if not is_pred and target not in system.transition_map:
        raise OracleError(f"unknown transition {target}")
    parents = {start: None}
    if is_pred and target.evaluate(_thaw(system, start)):
        return _rebuild(system, parents, start)
    queue = deque([start])
    while queue:
        key = queue.popleft()
        for name, nxt in successors(system, key):
            if not is_pred and name == target:
                run = _rebuild(system, parents, key)
                return Computation(run.states + (_thaw(system, nxt),), None, run.transitions + (name,))
            if nxt in parents:
                continue
            parents[nxt] = (key, name)
            if len(parents) > cap:
                raise StateCapExceeded(f"more than {cap} reachable states")
            if is_pred and target.evaluate(_thaw(system, nxt)):
                return _rebuild(system, parents, nxt)
            queue.append(nxt)
    return None


def _rebuild(system, parents: dict, key) -> Computation:
    keys, names = [], []
    cur = key
    while parents[cur] is not None:
        prev, name = parents[cur]
        keys.append(cur)
        names.append(name)
        cur = prev
    keys.append(cur)
    keys.reverse()
    names.reverse()
    return Computation(tuple(_thaw(system, k) for k in keys), None, tuple(names))


def check_termination(system, cap: int = DEFAULT_CAP) -> Lasso | None:
    """Nested depth-first search for a reachable cycle; None means every run is finite."""
    _require_bounds(system)
    start = _freeze(system, system.initial_state)
    blue: set = set()
    red: set = set()
    succ_cache: dict = {}

    def succ(key):
        if key not in succ_cache:
            succ_cache[key] = successors(system, key)
            if len(succ_cache) > cap:
                raise StateCapExceeded(f"more than {cap} reachable states")
        return succ_cache[key]

    def red_search(seed):
        # looks for a path back to ``seed``; every state is accepting
        stack = [(seed, iter(succ(seed)))]
        path = [(seed, None)]
        red.add(seed)
        while stack:
            key, it = stack[-1]
            advanced = False
            for name, nxt in it:
                if nxt == seed:
                    return path + [(nxt, name)]
                if nxt not in red:
                    red.add(nxt)
                    stack.append((nxt, iter(succ(nxt))))
                    path.append((nxt, name))
                    advanced = True
                    break
            if not advanced:
                stack.pop()
                path.pop()
        return None

    stack = [(start, iter(succ(start)))]
    blue_path = [(start, None)]
    blue.add(start)
    while stack:
        key, it = stack[-1]
        advanced = False
        for name, nxt in it:
            if nxt not in blue:
                blue.add(nxt)
                stack.append((nxt, iter(succ(nxt))))
                blue_path.append((nxt, name))
                advanced = True
                break
        if advanced:
            continue
        cycle = red_search(key)
        if cycle is not None:
            prefix_keys = [k for k, _ in blue_path]
            prefix_names = [n for _, n in blue_path[1:]]
            loop_keys = [k for k, _ in cycle[:-1]]
            loop_names = [n for _, n in cycle[1:]]
            prefix = tuple(_thaw(system, k) for k in prefix_keys[:-1])
            loop = tuple(_thaw(system, k) for k in loop_keys)
            return Lasso(prefix, loop, tuple(prefix_names), tuple(loop_names))
        stack.pop()
        blue_path.pop()
    return None


def enumerate_runs(system, horizon: int) -> Iterator[Computation]:
    """Every run of at most ``horizon`` steps, depth-first in transition order."""
    start = system.initial_state

    def rec(states, names):
        yield Computation(tuple(states), None, tuple(names))
        if len(names) >= horizon:
            return
        for g, nxt in system.successors(states[-1]):
            yield from rec(states + [nxt], names + [g.name])

    yield from rec([start], [])


def enumerate_lassos(system, horizon: int) -> Iterator[Computation]:
    """Lassos whose prefix plus loop spans at most ``horizon`` steps."""
    for run in enumerate_runs(system, horizon):
        states = run.states
        last = states[-1]
        for g, nxt in system.successors(last):
            for j, s in enumerate(states):
                if s == nxt:
                    yield Computation(states, j, run.transitions + (g.name,))


def validate_run(system, run: Computation) -> bool:
    """Does each step fire its named transition (or some transition if unnamed)?"""
    if not run.states or dict(run.states[0]) != system.initial_state:
        return False
    steps = list(zip(run.states, run.states[1:]))
    if run.loop_start is not None:
        steps.append((run.states[-1], run.states[run.loop_start]))
    names = list(run.transitions) if run.transitions else [None] * len(steps)
    if len(names) != len(steps):
        return False
    for (pre, post), name in zip(steps, names):
        options = system.transitions if name is None else [system.transition_map.get(name)]
        if not any(g is not None and g.fire(pre) == dict(post) for g in options):
            return False
    return True
