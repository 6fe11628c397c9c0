"""Concrete syntax for models, properties and label formulas.

Model files::

    system demo {
      var p: int in 0..3 init 3;
      process P {
        locations l1, l2 init l1;
        trans go: l1 -> l2 when p > 0 update p := p - 1;
      }
      sync { g = {go}; }
    }

Property files hold one property::

    property r reach trans(g);
    property s reach loc_P = l2;
    property t termination;
    property m violation {
      event i: init;
      event e: loc_P = l2;
      link i -> e;
      conflict i # e;
      cycle { event x: trans(g); }
    }
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field

from .logic import (
    FALSE,
    TRUE,
    Formula,
    LocLit,
    LocSame,
    conj,
    is_primed,
    linear,
    prime,
    unprime,
)
from .model import (
    LOC_PREFIX,
    IntVar,
    LinearTerm,
    LocalTransition,
    ModelError,
    Process,
    SyncVector,
    TransitionSystem,
)


class ParseError(Exception):
    def __init__(self, message: str, line: int = 0, column: int = 0):
        self.message = message
        self.line = line
        self.column = column
        where = f"{line}:{column}: " if line else ""
        super().__init__(where + message)


_TOKEN = re.compile(r"""
    (?P<ws>[ \t\r]+)
  | (?P<nl>\n)
  | (?P<comment>//[^\n]*)
  | (?P<num>\d+)
  | (?P<ident>[A-Za-z_][A-Za-z0-9_]*'?)
  | (?P<op>\.\.|->|:=|<=|>=|!=|==|[-+*<>=&{}();:,#\[\]])
""", re.VERBOSE)


@dataclass
class Token:
    kind: str
    text: str
    line: int
    column: int


def tokenize(text: str) -> list:
    out = []
    pos, line, col_start = 0, 1, 0
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if m is None:
            raise ParseError(f"unexpected character {text[pos]!r}", line, pos - col_start + 1)
        kind = m.lastgroup
        if kind == "nl":
            line += 1
            col_start = m.end()
        elif kind not in ("ws", "comment"):
            out.append(Token(kind, m.group(), line, m.start() - col_start + 1))
        pos = m.end()
    out.append(Token("eof", "", line, pos - col_start + 1))
    return out


class _Parser:
    def __init__(self, text: str):
        self.tokens = tokenize(text)
        self.i = 0

    @property
    def tok(self) -> Token:
        return self.tokens[self.i]

    def error(self, message: str, tok: Token | None = None) -> ParseError:
        tok = tok or self.tok
        return ParseError(message, tok.line, tok.column)

    def at(self, *texts) -> bool:
        return self.tok.text in texts and self.tok.kind != "eof"

    def accept(self, text: str) -> bool:
        if self.at(text):
            self.i += 1
            return True
        return False

    def expect(self, text: str) -> Token:
        if not self.at(text):
            got = self.tok.text or "end of input"
            raise self.error(f"expected {text!r}, found {got!r}")
        tok = self.tok
        self.i += 1
        return tok

    def ident(self, what: str = "identifier") -> Token:
        if self.tok.kind != "ident" or self.tok.text.endswith("'"):
            got = self.tok.text or "end of input"
            raise self.error(f"expected {what}, found {got!r}")
        tok = self.tok
        self.i += 1
        return tok

    def number(self) -> int:
        sign = -1 if self.accept("-") else 1
        if self.tok.kind != "num":
            raise self.error(f"expected a number, found {self.tok.text!r}")
        value = int(self.tok.text)
        self.i += 1
        return sign * value


# ---------------------------------------------------------------------------
# formulas
# ---------------------------------------------------------------------------

@dataclass
class Vocabulary:
    """Names a formula may mention."""

    ints: frozenset = frozenset()
    locations: dict = field(default_factory=dict)  # loc var -> domain

    @classmethod
    def of(cls, system: TransitionSystem) -> "Vocabulary":
        return cls(frozenset(system.int_names),
                   {p.loc_var: p.domain for p in system.processes})


class _FormulaParser(_Parser):
    def __init__(self, text: str, vocab: Vocabulary | None):
        super().__init__(text)
        self.vocab = vocab

    def formula(self, allow_primed: bool = True) -> Formula:
        parts = [self.atom(allow_primed)]
        while self.accept("&"):
            parts.append(self.atom(allow_primed))
        return conj(*parts)

    def atom(self, allow_primed: bool):
        if self.accept("true"):
            return TRUE
        if self.accept("false"):
            return FALSE
        start = self.tok
        if start.kind == "ident" and unprime(start.text).startswith(LOC_PREFIX):
            return self.loc_atom(allow_primed)
        lhs = self.linear_expr(allow_primed)
        if not self.at("<", "<=", "=", "==", ">=", ">", "!="):
            raise self.error(f"expected a comparison, found {self.tok.text!r}")
        op_tok = self.tok
        self.i += 1
        op = "=" if op_tok.text == "==" else op_tok.text
        if op == "!=":
            raise self.error("integer disequality is not conjunctive", op_tok)
        rhs = self.linear_expr(allow_primed)
        coefs = dict(lhs[0])
        for v, c in rhs[0].items():
            coefs[v] = coefs.get(v, 0) - c
        return linear(coefs, op, rhs[1] - lhs[1])

    def loc_atom(self, allow_primed: bool):
        var_tok = self.tok
        self.i += 1
        var = var_tok.text
        if is_primed(var) and not allow_primed:
            raise self.error(f"primed variable {var} not allowed here", var_tok)
        domain = self.location_domain(var, var_tok)
        if self.accept("=") or self.accept("=="):
            positive = True
        elif self.accept("!="):
            positive = False
        else:
            raise self.error(f"expected '=' or '!=', found {self.tok.text!r}")
        other = self.tok
        if other.kind != "ident":
            raise self.error(f"expected a location, found {other.text!r}")
        self.i += 1
        if unprime(other.text).startswith(LOC_PREFIX):
            a, b = var, other.text
            if {a, b} != {unprime(a), prime(unprime(a))}:
                raise self.error("location variables may only be compared with their own primed copy", other)
            return LocSame(unprime(a), positive, domain)
        if other.text.endswith("'"):
            raise self.error(f"location constant {other.text} cannot be primed", other)
        if domain is not None and other.text not in domain:
            raise self.error(f"{other.text} is not a location of {unprime(var)}", other)
        return LocLit(var, other.text, positive, domain)

    def location_domain(self, var: str, tok: Token):
        if self.vocab is None:
            return None
        dom = self.vocab.locations.get(unprime(var))
        if dom is None:
            raise self.error(f"unknown location variable {unprime(var)}", tok)
        return dom

    def linear_expr(self, allow_primed: bool):
        coefs: dict = {}
        const = 0
        sign = 1
        if self.accept("-"):
            sign = -1
        else:
            self.accept("+")
        while True:
            c, var = self.linear_term(allow_primed)
            if var is None:
                const += sign * c
            else:
                coefs[var] = coefs.get(var, 0) + sign * c
            if self.accept("+"):
                sign = 1
            elif self.accept("-"):
                sign = -1
            else:
                return coefs, const

    def linear_term(self, allow_primed: bool):
        if self.tok.kind == "num":
            c = int(self.tok.text)
            self.i += 1
            if self.accept("*"):
                return c, self.int_var(allow_primed)
            return c, None
        return 1, self.int_var(allow_primed)

    def int_var(self, allow_primed: bool) -> str:
        tok = self.tok
        if tok.kind != "ident":
            raise self.error(f"expected a variable, found {tok.text!r}")
        self.i += 1
        if is_primed(tok.text) and not allow_primed:
            raise self.error(f"primed variable {tok.text} not allowed here", tok)
        if unprime(tok.text).startswith(LOC_PREFIX):
            raise self.error(f"location variable {tok.text} used in arithmetic", tok)
        if self.vocab is not None and unprime(tok.text) not in self.vocab.ints:
            raise self.error(f"unknown variable {unprime(tok.text)}", tok)
        return tok.text


def parse_formula(text: str, vocab: Vocabulary | None = None, allow_primed: bool = True) -> Formula:
    p = _FormulaParser(text, vocab)
    f = p.formula(allow_primed)
    if p.tok.kind != "eof":
        raise p.error(f"unexpected {p.tok.text!r} after formula")
    return f


# ---------------------------------------------------------------------------
# models
# ---------------------------------------------------------------------------

class _ModelParser(_FormulaParser):
    def __init__(self, text: str):
        super().__init__(text, None)
        self.positions: dict = {}

    def system(self) -> TransitionSystem:
        self.expect("system")
        name = self.ident("system name").text
        self.expect("{")
        ints: list = []
        procs: list = []
        locals_: list = []
        syncs = None
        pending: list = []  # transitions to resolve after all variables are known
        while not self.at("}"):
            if self.tok.kind == "eof":
                raise self.error("unexpected end of input inside system")
            if self.at("var"):
                ints.append(self.var_decl())
            elif self.at("process"):
                proc, trans = self.process_decl()
                procs.append(proc)
                pending.extend(trans)
            elif self.at("sync"):
                if syncs is not None:
                    raise self.error("duplicate sync block")
                syncs = self.sync_block()
            else:
                raise self.error(f"expected 'var', 'process' or 'sync', found {self.tok.text!r}")
        self.expect("}")
        if self.tok.kind != "eof":
            raise self.error(f"unexpected {self.tok.text!r} after system")
        if not procs:
            raise ParseError("no processes", self.tok.line, self.tok.column)
        self.vocab = Vocabulary(frozenset(v.name for v in ints),
                                {p.loc_var: p.domain for p in procs})
        seen: dict = {}
        for item in [(v.name, self.positions[("var", v.name)]) for v in ints]:
            if item[0] in seen:
                raise ParseError(f"duplicate variable {item[0]}", *item[1])
            seen[item[0]] = item[1]
        for proc_name, tname, src, tgt, guard_span, updates, pos in pending:
            guard = TRUE
            if guard_span is not None:
                guard = self.reparse(guard_span)
            ups = []
            for var, var_pos, term in updates:
                if var not in self.vocab.ints:
                    raise ParseError(f"unknown variable {var}", *var_pos)
                for u in term.variables():
                    if u not in self.vocab.ints:
                        raise ParseError(f"unknown variable {u} in update of {tname}", *var_pos)
                ups.append((var, term))
            locals_.append(LocalTransition(tname, proc_name, src, tgt, guard, tuple(ups)))
        try:
            return TransitionSystem(name, tuple(ints), tuple(procs), tuple(locals_),
                                    None if syncs is None else tuple(syncs))
        except ModelError as exc:
            key = _model_error_key(str(exc), self.positions)
            line, col = self.positions.get(key, (0, 0))
            raise ParseError(str(exc), line, col) from None

    def reparse(self, span):
        start, end = span
        saved = self.i
        self.i = start
        try:
            f = self.formula(allow_primed=False)
            if self.i != end:
                raise self.error(f"unexpected {self.tok.text!r} in guard")
        finally:
            self.i = saved
        return f

    def var_decl(self) -> IntVar:
        self.expect("var")
        tok = self.ident("variable name")
        if tok.text.startswith(LOC_PREFIX):
            raise self.error(f"variable names may not start with {LOC_PREFIX}", tok)
        self.positions[("var", tok.text)] = (tok.line, tok.column)
        self.expect(":")
        self.expect("int")
        lower = upper = None
        if self.accept("in"):
            lower = self.number()
            self.expect("..")
            upper = self.number()
            if lower > upper:
                raise self.error(f"empty range for {tok.text}")
        self.expect("init")
        init = self.number()
        self.expect(";")
        return IntVar(tok.text, init, lower, upper)

    def process_decl(self):
        self.expect("process")
        tok = self.ident("process name")
        self.positions[("process", tok.text)] = (tok.line, tok.column)
        self.expect("{")
        self.expect("locations")
        locs = [self.ident("location").text]
        while self.accept(","):
            locs.append(self.ident("location").text)
        self.expect("init")
        init_tok = self.ident("initial location")
        self.expect(";")
        if init_tok.text not in locs:
            raise self.error(f"initial location {init_tok.text} is not declared", init_tok)
        if len(set(locs)) != len(locs):
            raise self.error(f"process {tok.text} repeats a location", tok)
        trans = []
        while self.at("trans"):
            self.expect("trans")
            ttok = self.ident("transition name")
            self.positions[("trans", ttok.text)] = (ttok.line, ttok.column)
            self.expect(":")
            src = self.ident("location")
            self.expect("->")
            tgt = self.ident("location")
            for loc_tok in (src, tgt):
                if loc_tok.text not in locs:
                    raise self.error(f"{loc_tok.text} is not a location of {tok.text}", loc_tok)
            guard_span = None
            updates = []
            if self.accept("when"):
                start = self.i
                depth = 0
                while not (self.at("update", ";") and depth == 0):
                    if self.tok.kind == "eof":
                        raise self.error("unterminated guard")
                    self.i += 1
                guard_span = (start, self.i)
            if self.accept("update"):
                updates.append(self.assignment())
                while self.accept(","):
                    updates.append(self.assignment())
            self.expect(";")
            trans.append((tok.text, ttok.text, src.text, tgt.text, guard_span, updates,
                          (ttok.line, ttok.column)))
        self.expect("}")
        return Process(tok.text, tuple(locs), init_tok.text), trans

    def assignment(self):
        var_tok = self.ident("variable")
        self.expect(":=")
        coefs, const = self.linear_expr(allow_primed=False)
        terms = tuple((v, c) for v, c in coefs.items() if c)
        return var_tok.text, (var_tok.line, var_tok.column), LinearTerm(terms, const)

    def sync_block(self) -> list:
        self.expect("sync")
        self.expect("{")
        out = []
        while not self.at("}"):
            tok = self.ident("sync vector name")
            self.positions[("sync", tok.text)] = (tok.line, tok.column)
            self.expect("=")
            self.expect("{")
            members = [self.ident("transition name").text]
            while self.accept(","):
                members.append(self.ident("transition name").text)
            self.expect("}")
            self.expect(";")
            out.append(SyncVector(tok.text, tuple(members)))
        self.expect("}")
        return out


def _model_error_key(message: str, positions: dict):
    for kind in ("sync", "trans", "process", "var"):
        for (k, name) in positions:
            if k == kind and re.search(rf"\b{re.escape(name)}\b", message):
                return (k, name)
    return None


def parse_model(text: str) -> TransitionSystem:
    return _ModelParser(text).system()


def render_model(system: TransitionSystem) -> str:
    lines = [f"system {system.name} {{"]
    for v in system.variables:
        rng = f" in {v.lower}..{v.upper}" if v.lower is not None else ""
        lines.append(f"  var {v.name}: int{rng} init {v.init};")
    for p in system.processes:
        lines.append(f"  process {p.name} {{")
        lines.append(f"    locations {', '.join(p.locations)} init {p.initial};")
        for t in system.locals:
            if t.process != p.name:
                continue
            text = f"    trans {t.name}: {t.source} -> {t.target}"
            if not t.guard.is_true:
                text += f" when {t.guard.render()}"
            if t.updates:
                text += " update " + ", ".join(f"{v} := {term.render()}" for v, term in t.updates)
            lines.append(text + ";")
        lines.append("  }")
    if system.syncs is not None:
        lines.append("  sync {")
        for s in system.syncs:
            lines.append(f"    {s.name} = {{{', '.join(s.members)}}};")
        lines.append("  }")
    lines.append("}")
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# properties
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class EventSpec:
    id: str
    kind: str  # "init", "trans" or "formula"
    formula: Formula = TRUE
    transition: str | None = None


@dataclass(frozen=True)
class PatternSpec:
    events: tuple = ()
    links: tuple = ()  # (src, tgt, Formula)
    conflicts: tuple = ()  # (a, b)


@dataclass(frozen=True)
class PropertySpec:
    name: str
    kind: str  # "reach-trans", "reach-pred", "termination", "violation"
    target: str | None = None
    predicate: Formula | None = None
    stem: PatternSpec | None = None
    cycle: PatternSpec | None = None
    text: str = field(default="", compare=False)


class _PropertyParser(_FormulaParser):
    def __init__(self, text: str, system: TransitionSystem):
        super().__init__(text, Vocabulary.of(system))
        self.system = system

    def property(self) -> PropertySpec:
        self.expect("property")
        name = self.ident("property name").text
        if self.accept("termination"):
            self.expect(";")
            spec = PropertySpec(name, "termination")
        elif self.accept("reach"):
            if self.at("trans") and self.tokens[self.i + 1].text == "(":
                self.expect("trans")
                self.expect("(")
                tok = self.ident("transition name")
                self.expect(")")
                if tok.text not in self.system.transition_map:
                    raise self.error(f"unknown transition {tok.text}", tok)
                spec = PropertySpec(name, "reach-trans", target=tok.text)
            else:
                spec = PropertySpec(name, "reach-pred", predicate=self.formula(allow_primed=False))
            self.expect(";")
        elif self.accept("violation"):
            self.expect("{")
            stem, cycle = self.pattern(top=True)
            spec = PropertySpec(name, "violation", stem=stem, cycle=cycle)
        else:
            raise self.error(f"expected 'reach', 'termination' or 'violation', found {self.tok.text!r}")
        if self.tok.kind != "eof":
            raise self.error(f"unexpected {self.tok.text!r} after property")
        return spec

    def pattern(self, top: bool):
        events, links, conflicts = [], [], []
        ids: dict = {}
        cycle = None
        link_pos = []
        while not self.at("}"):
            if self.tok.kind == "eof":
                raise self.error("unexpected end of input inside pattern")
            if self.accept("event"):
                tok = self.ident("event id")
                if tok.text in ids:
                    raise self.error(f"duplicate event {tok.text}", tok)
                self.expect(":")
                if self.accept("init"):
                    ev = EventSpec(tok.text, "init")
                elif self.at("trans") and self.tokens[self.i + 1].text == "(":
                    self.expect("trans")
                    self.expect("(")
                    ttok = self.ident("transition name")
                    self.expect(")")
                    if ttok.text not in self.system.transition_map:
                        raise self.error(f"unknown transition {ttok.text}", ttok)
                    ev = EventSpec(tok.text, "trans", transition=ttok.text)
                else:
                    ev = EventSpec(tok.text, "formula", formula=self.formula())
                ids[tok.text] = tok
                events.append(ev)
                self.expect(";")
            elif self.accept("link"):
                a = self.ident("event id")
                self.expect("->")
                b = self.ident("event id")
                label = TRUE
                if self.accept("label"):
                    label = self.formula()
                self.expect(";")
                links.append((a.text, b.text, label))
                link_pos.append((a, b))
            elif self.accept("conflict"):
                a = self.ident("event id")
                self.expect("#")
                b = self.ident("event id")
                self.expect(";")
                if a.text == b.text:
                    raise self.error("an event cannot conflict with itself", b)
                conflicts.append((a, b))
            elif top and self.accept("cycle"):
                if cycle is not None:
                    raise self.error("duplicate cycle block")
                self.expect("{")
                cycle, _ = self.pattern(top=False)
            else:
                raise self.error(f"expected 'event', 'link', 'conflict' or 'cycle', found {self.tok.text!r}")
        self.expect("}")
        for a, b in link_pos:
            for t in (a, b):
                if t.text not in ids:
                    raise self.error(f"unknown event {t.text}", t)
            if a.text == b.text:
                raise self.error(f"self-link on {a.text}", a)
        for a, b in conflicts:
            for t in (a, b):
                if t.text not in ids:
                    raise self.error(f"unknown event {t.text}", t)
        if _has_cycle([e.id for e in events], [(a, b) for a, b, _ in links]):
            raise self.error("links form a cycle")
        pair = tuple(sorted({tuple(sorted((a.text, b.text))) for a, b in conflicts}))
        return PatternSpec(tuple(events), tuple(links), pair), cycle


def _has_cycle(nodes, edges) -> bool:
    succ = {n: [] for n in nodes}
    for a, b in edges:
        succ[a].append(b)
    state: dict = {}

    def visit(n) -> bool:
        state[n] = 1
        for m in succ[n]:
            if state.get(m) == 1 or (m not in state and visit(m)):
                return True
        state[n] = 2
        return False

    return any(n not in state and visit(n) for n in nodes)


def parse_property(text: str, system: TransitionSystem) -> PropertySpec:
    spec = _PropertyParser(text, system).property()
    return PropertySpec(spec.name, spec.kind, spec.target, spec.predicate,
                        spec.stem, spec.cycle, text)


def _render_pattern(pattern: PatternSpec, indent: str) -> list:
    lines = []
    for e in pattern.events:
        if e.kind == "init":
            body = "init"
        elif e.kind == "trans":
            body = f"trans({e.transition})"
        else:
            body = e.formula.render()
        lines.append(f"{indent}event {e.id}: {body};")
    for a, b, label in pattern.links:
        suffix = "" if label.is_true else f" label {label.render()}"
        lines.append(f"{indent}link {a} -> {b}{suffix};")
    lines.extend(f"{indent}conflict {a} # {b};" for a, b in pattern.conflicts)
    return lines


def render_property(spec: PropertySpec) -> str:
    head = f"property {spec.name}"
    if spec.kind == "termination":
        return f"{head} termination;\n"
    if spec.kind == "reach-trans":
        return f"{head} reach trans({spec.target});\n"
    if spec.kind == "reach-pred":
        return f"{head} reach {spec.predicate.render()};\n"
    lines = [f"{head} violation {{"] + _render_pattern(spec.stem, "  ")
    if spec.cycle is not None:
        lines += ["  cycle {"] + _render_pattern(spec.cycle, "    ") + ["  }"]
    return "\n".join(lines + ["}"]) + "\n"
