"""Conjunctive label logic.

Labels of events and links are conjunctions of atoms over current and primed
variables.  Three atom kinds exist:

* ``LocLit``   -- a location variable compared with a location constant
                  (``loc_P1 = s1``, ``loc_P1' != s4``);
* ``LocSame``  -- a location variable compared with its own primed copy
                  (``loc_P2' = loc_P2``), needed for frame conditions;
* ``Linear``   -- ``sum(c_i * v_i) <op> k`` over integer variables with
                  ``op`` in ``<=``, ``>=``, ``=``.

Primed variables are plain strings ending in an apostrophe.
"""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass, field
from typing import Iterable, Iterator, Mapping, Sequence, Union


class LogicError(Exception):
    pass


class InterpolationError(LogicError):
    pass


def prime(name: str) -> str:
    return name if name.endswith("'") else name + "'"


def unprime(name: str) -> str:
    return name[:-1] if name.endswith("'") else name


def is_primed(name: str) -> bool:
    return name.endswith("'")


def _var_key(name: str) -> tuple:
    # primed copy sorts first so that "q1' = q1 + 1" is the canonical shape
    return (unprime(name), 0 if is_primed(name) else 1)


# ---------------------------------------------------------------------------
# atoms
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class LocLit:
    var: str
    value: str
    positive: bool = True
    domain: frozenset | None = field(default=None, compare=False, repr=False)

    def variables(self) -> frozenset:
        return frozenset((self.var,))

    def negate(self) -> list:
        return [LocLit(self.var, self.value, not self.positive, self.domain)]

    def rename(self, fn) -> "LocLit":
        return LocLit(fn(self.var), self.value, self.positive, self.domain)

    def holds(self, pre: Mapping, post: Mapping) -> bool:
        val = _lookup(self.var, pre, post)
        return (val == self.value) == self.positive

    def render(self) -> str:
        return f"{self.var} {'=' if self.positive else '!='} {self.value}"

    def sort_key(self) -> tuple:
        return (_var_key(self.var), 0, "=" if self.positive else "!=", self.value)


@dataclass(frozen=True)
class LocSame:
    """``var' = var`` (positive) or ``var' != var``; ``var`` is unprimed."""

    var: str
    positive: bool = True
    domain: frozenset | None = field(default=None, compare=False, repr=False)

    def variables(self) -> frozenset:
        return frozenset((self.var, prime(self.var)))

    def negate(self) -> list:
        return [LocSame(self.var, not self.positive, self.domain)]

    def rename(self, fn) -> "LocSame":
        a, b = fn(self.var), fn(prime(self.var))
        if b != prime(a):
            raise LogicError(f"cannot rename frame atom on {self.var} to {a}/{b}")
        return LocSame(a, self.positive, self.domain)

    def holds(self, pre: Mapping, post: Mapping) -> bool:
        same = _lookup(self.var, pre, post) == _lookup(prime(self.var), pre, post)
        return same == self.positive

    def render(self) -> str:
        return f"{prime(self.var)} {'=' if self.positive else '!='} {self.var}"

    def sort_key(self) -> tuple:
        return (_var_key(prime(self.var)), 1, "=" if self.positive else "!=", "")


@dataclass(frozen=True)
class Linear:
    """Canonical ``sum(terms) op const`` with ``op`` in ``<=``, ``>=``, ``=``.

    Build through :func:`linear`, which normalises strict operators, divides
    by the coefficient gcd (rounding the constant for integers) and makes the
    first coefficient positive.
    """

    terms: tuple
    op: str
    const: int

    def variables(self) -> frozenset:
        return frozenset(v for v, _ in self.terms)

    def negate(self) -> list:
        coefs = dict(self.terms)
        if self.op == "<=":
            return [linear(coefs, ">", self.const)]
        if self.op == ">=":
            return [linear(coefs, "<", self.const)]
        return [linear(coefs, "<", self.const), linear(coefs, ">", self.const)]

    def rename(self, fn) -> "Linear":
        coefs: dict = {}
        for v, c in self.terms:
            coefs[fn(v)] = coefs.get(fn(v), 0) + c
        out = linear(coefs, self.op, self.const)
        if isinstance(out, bool):
            raise LogicError("renaming collapsed a linear atom")
        return out

    def holds(self, pre: Mapping, post: Mapping) -> bool:
        total = sum(c * _lookup(v, pre, post) for v, c in self.terms)
        if self.op == "<=":
            return total <= self.const
        if self.op == ">=":
            return total >= self.const
        return total == self.const

    def render(self) -> str:
        lhs = [(v, c) for v, c in self.terms if c > 0]
        rhs = [(v, -c) for v, c in self.terms if c < 0]
        left = _render_terms(lhs)
        if rhs:
            right = _render_terms(rhs)
            if self.const > 0:
                right += f" + {self.const}"
            elif self.const < 0:
                right += f" - {-self.const}"
        else:
            right = str(self.const)
        return f"{left} {self.op} {right}"

    def sort_key(self) -> tuple:
        return (_var_key(self.terms[0][0]), 2, self.op, self.const, self.terms)


Atom = Union[LocLit, LocSame, Linear]


def _render_terms(terms) -> str:
    parts = []
    for v, c in terms:
        parts.append(v if c == 1 else f"{c}*{v}")
    return " + ".join(parts)


def _lookup(var: str, pre: Mapping, post: Mapping):
    src, key = (post, unprime(var)) if is_primed(var) else (pre, var)
    try:
        return src[key]
    except KeyError:
        raise LogicError(f"valuation has no value for {var}") from None


def linear(coefs: Mapping[str, int], op: str, const: int) -> Linear | bool:
    """Canonical linear atom, or a bool when no variable is left."""
    items = {v: c for v, c in coefs.items() if c}
    if op == "<":
        op, const = "<=", const - 1
    elif op == ">":
        op, const = ">=", const + 1
    if op == ">=":
        items = {v: -c for v, c in items.items()}
        op, const = "<=", -const
    if op not in ("<=", "="):
        raise LogicError(f"unsupported operator {op!r}")
    if not items:
        return 0 <= const if op == "<=" else const == 0
    g = 0
    for c in items.values():
        g = math.gcd(g, abs(c))
    if op == "=":
        if const % g:
            return False
        const //= g
    else:
        const = math.floor(const / g) if const % g else const // g
    terms = tuple(sorted(((v, c // g) for v, c in items.items()), key=lambda t: _var_key(t[0])))
    if terms[0][1] < 0:
        terms = tuple((v, -c) for v, c in terms)
        const = -const
        if op == "<=":
            op = ">="
    return Linear(terms, op, const)


# ---------------------------------------------------------------------------
# formulas
# ---------------------------------------------------------------------------

class Formula:
    """Immutable conjunction of atoms.  ``Formula()`` is true."""

    __slots__ = ("atoms", "is_false", "_hash")

    def __init__(self, atoms: Iterable = (), is_false: bool = False):
        if is_false:
            atoms = ()
        else:
            uniq: dict = {}
            for a in atoms:
                uniq.setdefault(a, a)
            atoms = tuple(sorted(uniq, key=lambda a: a.sort_key()))
        object.__setattr__(self, "atoms", atoms)
        object.__setattr__(self, "is_false", is_false)
        object.__setattr__(self, "_hash", hash((atoms, is_false)))

    def __setattr__(self, name, value):
        raise AttributeError("Formula is immutable")

    def __hash__(self) -> int:
        return self._hash

    def __eq__(self, other) -> bool:
        if self is other:
            return True
        if not isinstance(other, Formula):
            return NotImplemented
        return self._hash == other._hash and self.is_false == other.is_false and self.atoms == other.atoms

    def __repr__(self) -> str:
        return f"Formula({self.render()!r})"

    def __and__(self, other: "Formula") -> "Formula":
        if self.is_false or other.is_false:
            return FALSE
        if not other.atoms:
            return self
        if not self.atoms:
            return other
        return Formula(self.atoms + other.atoms)

    def __iter__(self) -> Iterator:
        return iter(self.atoms)

    def __len__(self) -> int:
        return len(self.atoms)

    @property
    def is_true(self) -> bool:
        return not self.is_false and not self.atoms

    def variables(self) -> frozenset:
        out: set = set()
        for a in self.atoms:
            out |= a.variables()
        return frozenset(out)

    def rename(self, fn) -> "Formula":
        if self.is_false:
            return self
        return Formula(a.rename(fn) for a in self.atoms)

    def primed(self) -> "Formula":
        if any(is_primed(v) for v in self.variables()):
            raise LogicError(f"cannot prime a transition predicate: {self.render()}")
        return self.rename(prime)

    def unprimed(self) -> "Formula":
        if any(not is_primed(v) for v in self.variables()):
            raise LogicError(f"formula mentions current variables: {self.render()}")
        return self.rename(unprime)

    def is_state_predicate(self) -> bool:
        return not any(is_primed(v) for v in self.variables())

    def evaluate(self, pre: Mapping, post: Mapping | None = None) -> bool:
        if self.is_false:
            return False
        post = pre if post is None else post
        return all(a.holds(pre, post) for a in self.atoms)

    def render(self) -> str:
        if self.is_false:
            return "false"
        if not self.atoms:
            return "true"
        return " & ".join(a.render() for a in self.atoms)


TRUE = Formula()
FALSE = Formula(is_false=True)


def conj(*parts) -> Formula:
    """Conjunction of formulas and/or atoms; bools fold in."""
    atoms: list = []
    for p in parts:
        if isinstance(p, bool):
            if not p:
                return FALSE
        elif isinstance(p, Formula):
            if p.is_false:
                return FALSE
            atoms.extend(p.atoms)
        else:
            atoms.append(p)
    return Formula(atoms)


def loc(var: str, value: str, positive: bool = True, domain=None) -> Formula:
    return Formula((LocLit(var, value, positive, frozenset(domain) if domain else None),))


def lin(coefs: Mapping[str, int], op: str, const: int) -> Formula:
    atom = linear(coefs, op, const)
    if isinstance(atom, bool):
        return TRUE if atom else FALSE
    return Formula((atom,))


def negate_atom(atom) -> Formula:
    """Negation of a single atom as a formula; raises if it is a disjunction."""
    negs = atom.negate()
    if len(negs) != 1:
        raise LogicError(f"negation of {atom.render()} is not conjunctive")
    n = negs[0]
    if isinstance(n, bool):
        return TRUE if n else FALSE
    return Formula((n,))


def negate_single(f: Formula) -> Formula:
    """Negation of true/false or a one-atom formula."""
    if f.is_false:
        return TRUE
    if not f.atoms:
        return FALSE
    if len(f.atoms) != 1:
        raise LogicError(f"negation of {f.render()} is not conjunctive")
    return negate_atom(f.atoms[0])


# ---------------------------------------------------------------------------
# location reasoning
# ---------------------------------------------------------------------------

class _Cofinite:
    """All values except ``excluded`` (used when a domain is unknown)."""

    __slots__ = ("excluded",)

    def __init__(self, excluded):
        self.excluded = frozenset(excluded)


def _loc_sets(atoms: Sequence) -> dict | None:
    """Allowed value sets per location variable, or None if unsatisfiable.

    Returns ``{var: set_or_Cofinite}`` plus a ``("same", base)`` entry for
    frame atoms.
    """
    eq: dict = {}
    neq: dict = {}
    domains: dict = {}
    same: dict = {}
    for a in atoms:
        base = unprime(a.var)
        if a.domain is not None:
            domains[base] = a.domain
        if isinstance(a, LocSame):
            if same.setdefault(a.var, a.positive) != a.positive:
                return None
            eq.setdefault(a.var, None)
            eq.setdefault(prime(a.var), None)
            continue
        if a.positive:
            if eq.get(a.var) not in (None, a.value):
                return None
            eq[a.var] = a.value
        else:
            eq.setdefault(a.var, None)
            neq.setdefault(a.var, set()).add(a.value)
    sets: dict = {}
    for var, value in eq.items():
        dom = domains.get(unprime(var))
        excluded = neq.get(var, set())
        if value is not None:
            if value in excluded or (dom is not None and value not in dom):
                return None
            allowed = {value}
        elif dom is not None:
            allowed = set(dom) - excluded
        else:
            allowed = _Cofinite(excluded)
        if isinstance(allowed, set) and not allowed:
            return None
        sets[var] = allowed
    for base, positive in same.items():
        cur, nxt = sets[base], sets[prime(base)]
        if positive:
            both = _intersect(cur, nxt)
            if isinstance(both, set) and not both:
                return None
            sets[base] = both
            sets[prime(base)] = both
        elif isinstance(cur, set) and isinstance(nxt, set):
            if len(cur) == 1 and cur == nxt:
                return None
        sets[("same", base)] = positive
    return sets


def _intersect(a, b):
    if isinstance(a, _Cofinite) and isinstance(b, _Cofinite):
        return _Cofinite(a.excluded | b.excluded)
    if isinstance(a, _Cofinite):
        a, b = b, a
    if isinstance(b, _Cofinite):
        return {x for x in a if x not in b.excluded}
    return a & b


# ---------------------------------------------------------------------------
# integer reasoning: Fourier-Motzkin with integer tightening
# ---------------------------------------------------------------------------

_WITNESS_SPAN = 64
_WITNESS_BUDGET = 20000


def _norm_le(coefs: dict, k: int):
    """Normalise ``coefs <= k``; returns (key, k), True (trivial) or False."""
    coefs = {v: c for v, c in coefs.items() if c}
    if not coefs:
        return 0 <= k
    g = 0
    for c in coefs.values():
        g = math.gcd(g, abs(c))
    if g > 1:
        coefs = {v: c // g for v, c in coefs.items()}
        k = math.floor(k / g) if k % g else k // g
    return tuple(sorted(coefs.items())), k


def _norm_eq(coefs: dict, k: int):
    coefs = {v: c for v, c in coefs.items() if c}
    if not coefs:
        return k == 0
    g = 0
    for c in coefs.values():
        g = math.gcd(g, abs(c))
    if k % g:
        return False
    return tuple(sorted((v, c // g) for v, c in coefs.items())), k // g


class _IntSystem:
    """Inequalities ``key <= k`` and equalities ``key = k`` over integers."""

    def __init__(self):
        self.le: dict = {}
        self.eq: list = []
        self.infeasible = False

    def add_le(self, coefs: dict, k: int):
        r = _norm_le(coefs, k)
        if r is True:
            return
        if r is False:
            self.infeasible = True
            return
        key, k = r
        if key not in self.le or self.le[key] > k:
            self.le[key] = k

    def add_eq(self, coefs: dict, k: int):
        r = _norm_eq(coefs, k)
        if r is True:
            return
        if r is False:
            self.infeasible = True
            return
        self.eq.append(r)

    @classmethod
    def from_atoms(cls, atoms) -> "_IntSystem":
        s = cls()
        for a in atoms:
            coefs = dict(a.terms)
            if a.op == "<=":
                s.add_le(coefs, a.const)
            elif a.op == ">=":
                s.add_le({v: -c for v, c in coefs.items()}, -a.const)
            else:
                s.add_eq(coefs, a.const)
        return s

    def substitute_equalities(self, keep: frozenset = frozenset()):
        """Eliminate non-kept variables having a unit coefficient in an equality."""
        pending = list(self.eq)
        self.eq = []
        while pending and not self.infeasible:
            key, k = pending.pop(0)
            pick = None
            for v, c in key:
                if abs(c) == 1 and v not in keep:
                    pick = (v, c)
                    break
            if pick is None:
                self.eq.append((key, k))
                continue
            v, c = pick
            # v = (k - sum_{u != v} c_u u) / c
            expr = {u: -cu * c for u, cu in key if u != v}
            const = k * c

            def subst(coefs: dict, rhs: int):
                cv = coefs.pop(v, 0)
                if cv:
                    for u, cu in expr.items():
                        coefs[u] = coefs.get(u, 0) + cv * cu
                    rhs -= cv * const
                return coefs, rhs

            new_pending = []
            for key2, k2 in pending + self.eq:
                coefs, rhs = subst(dict(key2), k2)
                r = _norm_eq(coefs, rhs)
                if r is False:
                    self.infeasible = True
                    return
                if r is not True:
                    new_pending.append(r)
            pending = new_pending
            self.eq = []
            old = self.le
            self.le = {}
            for key2, k2 in old.items():
                coefs, rhs = subst(dict(key2), k2)
                self.add_le(coefs, rhs)

    def equalities_to_inequalities(self, keep: frozenset = frozenset()):
        rest = []
        for key, k in self.eq:
            if keep and all(v in keep for v, _ in key):
                rest.append((key, k))
                continue
            self.add_le(dict(key), k)
            self.add_le({v: -c for v, c in key}, -k)
        self.eq = rest

    def variables(self) -> set:
        out: set = set()
        for key in self.le:
            out.update(v for v, _ in key)
        for key, _ in self.eq:
            out.update(v for v, _ in key)
        return out

    def eliminate(self, var: str):
        """One Fourier-Motzkin step; returns (lower_rows, upper_rows) on var."""
        pos, neg, rest = [], [], {}
        for key, k in self.le.items():
            c = dict(key).get(var, 0)
            if c > 0:
                pos.append((dict(key), k))
            elif c < 0:
                neg.append((dict(key), k))
            else:
                rest[key] = k
        self.le = rest
        for pc, pk in pos:
            a = pc[var]
            for nc, nk in neg:
                b = -nc[var]
                coefs = {}
                for u in set(pc) | set(nc):
                    if u != var:
                        coefs[u] = pc.get(u, 0) * b + nc.get(u, 0) * a
                self.add_le(coefs, pk * b + nk * a)
                if self.infeasible:
                    return neg, pos
        return neg, pos

    def pick_var(self, candidates) -> str | None:
        best = None
        for v in sorted(candidates):
            p = n = 0
            for key in self.le:
                c = dict(key).get(v, 0)
                if c > 0:
                    p += 1
                elif c < 0:
                    n += 1
            score = (p * n - p - n, v)
            if best is None or score < best[0]:
                best = (score, v)
        return None if best is None else best[1]


def _int_satisfiable(atoms: tuple) -> bool:
    s = _IntSystem.from_atoms(atoms)
    if s.infeasible:
        return False
    s.substitute_equalities()
    if s.infeasible:
        return False
    s.equalities_to_inequalities()
    if s.infeasible:
        return False
    stages = []
    while True:
        v = s.pick_var(s.variables())
        if v is None:
            break
        lower, upper = s.eliminate(v)
        if s.infeasible:
            return False
        stages.append((v, lower, upper))
    # variables that vanished when an earlier one was eliminated with
    # bounds on one side only; they get assigned first
    staged = {v for v, _, _ in stages}
    loose = sorted({u for _, lower, upper in stages for coefs, _ in lower + upper
                    for u in coefs} - staged)
    stages.extend((u, [], []) for u in loose)
    found, exhaustive = _witness(stages)
    if found:
        return True
    # rationally feasible but no integer point found; only trust an
    # exhaustive search, otherwise answer conservatively
    return not exhaustive


def _witness(stages):
    """Back-substitution with bounded backtracking.

    Returns (found, exhaustive): ``exhaustive`` is True when every integer
    candidate inside finite bounds has been tried.
    """
    budget = [_WITNESS_BUDGET]
    exhaustive = [True]
    assignment: dict = {}

    def bounds(var, lower, upper):
        lo, hi = None, None
        for coefs, k in lower:
            # sum + c*var <= k with c < 0  ->  var >= (sum - k) / -c
            c = coefs[var]
            rest = sum(cu * assignment[u] for u, cu in coefs.items() if u != var)
            val = math.ceil((rest - k) / -c)
            lo = val if lo is None else max(lo, val)
        for coefs, k in upper:
            c = coefs[var]
            rest = sum(cu * assignment[u] for u, cu in coefs.items() if u != var)
            val = math.floor((k - rest) / c)
            hi = val if hi is None else min(hi, val)
        return lo, hi

    def candidates(lo, hi):
        if lo is not None and hi is not None:
            if hi - lo > _WITNESS_SPAN:
                exhaustive[0] = False
                return range(lo, lo + _WITNESS_SPAN + 1)
            return range(lo, hi + 1)
        exhaustive[0] = False
        if lo is not None:
            return range(lo, lo + _WITNESS_SPAN + 1)
        if hi is not None:
            return range(hi, hi - _WITNESS_SPAN - 1, -1)
        return (0,)

    def search(i):
        if i < 0:
            return True
        var, lower, upper = stages[i]
        lo, hi = bounds(var, lower, upper)
        for val in candidates(lo, hi):
            budget[0] -= 1
            if budget[0] < 0:
                exhaustive[0] = False
                return False
            assignment[var] = val
            if search(i - 1):
                return True
        assignment.pop(var, None)
        return False

    found = search(len(stages) - 1)
    return found, exhaustive[0]


def _project_ints(atoms, keep: frozenset) -> list | None:
    """Linear atoms over ``keep`` implied by ``atoms``; None if infeasible."""
    s = _IntSystem.from_atoms(atoms)
    if s.infeasible:
        return None
    s.substitute_equalities(keep)
    if s.infeasible:
        return None
    s.equalities_to_inequalities(keep)
    if s.infeasible:
        return None
    while True:
        v = s.pick_var(s.variables() - keep)
        if v is None:
            break
        s.eliminate(v)
        if s.infeasible:
            return None
    out = []
    for key, k in s.le.items():
        atom = linear(dict(key), "<=", k)
        if atom is False:
            return None
        if atom is not True:
            out.append(atom)
    for key, k in s.eq:
        atom = linear(dict(key), "=", k)
        if atom is False:
            return None
        if atom is not True:
            out.append(atom)
    return out


# ---------------------------------------------------------------------------
# decision procedures
# ---------------------------------------------------------------------------

def _split(atoms):
    locs = [a for a in atoms if not isinstance(a, Linear)]
    ints = [a for a in atoms if isinstance(a, Linear)]
    return locs, ints


@functools.lru_cache(maxsize=None)
def _sat_atoms(atoms: tuple) -> bool:
    locs, ints = _split(atoms)
    if locs and _loc_sets(locs) is None:
        return False
    if ints and not _int_satisfiable(tuple(ints)):
        return False
    return True


def is_satisfiable(f: Formula) -> bool:
    if f.is_false:
        return False
    return _sat_atoms(f.atoms)


def _atoms_sat(atoms: Iterable) -> bool:
    return is_satisfiable(Formula(atoms))


@functools.lru_cache(maxsize=None)
def implies(a: Formula, b: Formula) -> bool:
    """True iff every model of ``a`` satisfies ``b``."""
    if not is_satisfiable(a):
        return True
    if b.is_false:
        return False
    have = set(a.atoms)
    for atom in b.atoms:
        if atom in have:
            continue
        for disjunct in atom.negate():
            if disjunct is False:
                continue
            if disjunct is True or is_satisfiable(a & Formula((disjunct,))):
                return False
    return True


def unsat_core(atoms: Sequence) -> list:
    """Deletion-minimal unsatisfiable subset, in input order."""
    atoms = list(atoms)
    if _atoms_sat(atoms):
        raise LogicError("unsat_core called on a satisfiable conjunction")
    core = atoms
    i = 0
    while i < len(core):
        trial = core[:i] + core[i + 1:]
        if not _atoms_sat(trial):
            core = trial
        else:
            i += 1
    return core


@functools.lru_cache(maxsize=None)
def project(f: Formula, keep: frozenset) -> Formula:
    """Strongest conjunctive consequence of ``f`` over the variables ``keep``.

    Exact for location atoms; Fourier-Motzkin with integer tightening for
    the integer part (an over-approximation of the integer projection).
    """
    if not is_satisfiable(f):
        return FALSE
    locs, ints = _split(f.atoms)
    out: list = []
    if locs:
        sets = _loc_sets(locs)
        domains = {}
        for a in locs:
            if a.domain is not None:
                domains[unprime(a.var)] = a.domain
        for var, allowed in sets.items():
            if isinstance(var, tuple):
                base = var[1]
                if base in keep and prime(base) in keep:
                    out.append(LocSame(base, allowed, domains.get(base)))
                elif not allowed and (base in keep) != (prime(base) in keep):
                    # var' != var with one side eliminated
                    other = prime(base) if base in keep else base
                    kept = base if base in keep else prime(base)
                    vals = sets[other]
                    if isinstance(vals, set) and len(vals) == 1:
                        (only,) = vals
                        out.append(LocLit(kept, only, False, domains.get(base)))
                continue
            if var not in keep:
                continue
            dom = domains.get(unprime(var))
            if isinstance(allowed, _Cofinite):
                out.extend(LocLit(var, x, False, dom) for x in sorted(allowed.excluded))
            elif len(allowed) == 1 and (dom is None or len(dom) > 1):
                (only,) = allowed
                out.append(LocLit(var, only, True, dom))
            elif dom is not None and allowed != set(dom):
                out.extend(LocLit(var, x, False, dom) for x in sorted(set(dom) - allowed))
    if ints:
        proj = _project_ints(tuple(ints), keep)
        if proj is None:
            return FALSE
        out.extend(proj)
    return Formula(out)


def pre_state(f: Formula) -> Formula:
    """Projection of a transition predicate onto current variables."""
    return project(f, frozenset(v for v in f.variables() if not is_primed(v)))


def post_state(f: Formula) -> Formula:
    """Projection onto primed variables, renamed to current variables."""
    keep = frozenset(v for v in f.variables() if is_primed(v))
    return project(f, keep).rename(unprime)


def interpolate(a: Formula, b: Formula) -> Formula:
    """Craig interpolant ``I``: ``a -> I``, ``I & b`` unsat, vocabulary shared.

    Candidates are the single-atom negation of a one-atom ``b``-side core
    and projections of the ``a``-side core / of ``a``; location-only
    interpolants are preferred, then fewer atoms.
    """
    if a.is_false:
        return FALSE
    if is_satisfiable(a & b):
        raise InterpolationError(f"{a.render()} and {b.render()} are jointly satisfiable")
    shared = a.variables() & b.variables()
    candidates: list = []
    if not is_satisfiable(b):
        candidates.append(TRUE)
    else:
        tagged = [(x, "b") for x in b.atoms] + [(x, "a") for x in a.atoms if x not in set(b.atoms)]
        core_atoms = unsat_core([x for x, _ in tagged])
        origin = dict((x, t) for x, t in reversed(tagged))
        a_core = [x for x in core_atoms if origin[x] == "a"]
        b_core = [x for x in core_atoms if origin[x] == "b"]
        if len(b_core) == 1:
            negs = b_core[0].negate()
            if len(negs) == 1 and not isinstance(negs[0], bool):
                candidates.append(Formula(negs))
        candidates.append(project(Formula(a_core), shared))
    candidates.append(project(a, shared))
    expanded: list = []
    for itp in candidates:
        if len(itp.atoms) == 1 and isinstance(itp.atoms[0], Linear) and itp.atoms[0].op == "=":
            # an equality's negation is disjunctive; its halves are not
            atom = itp.atoms[0]
            for op in ("<=", ">="):
                expanded.append(Formula((Linear(atom.terms, op, atom.const),)))
        expanded.append(itp)
    candidates = expanded
    valid = []
    for itp in candidates:
        if itp.variables() <= shared and implies(a, itp) and not is_satisfiable(itp & b):
            valid.append(itp)
    if not valid:
        raise InterpolationError(f"no interpolant found for {a.render()} ; {b.render()}")
    valid.sort(key=lambda f: (sum(isinstance(x, Linear) for x in f.atoms), len(f.atoms),
                              not _negatable(f)))
    return valid[0]


def _negatable(f: Formula) -> bool:
    return len(f.atoms) == 1 and len(f.atoms[0].negate()) == 1


def evaluate(f: Formula, pre: Mapping, post: Mapping) -> bool:
    return f.evaluate(pre, post)
