"""Reference implementations used only by the tests.

Nothing here imports the package's decision procedures: labels are
evaluated from their rendered text, membership by enumerating index
tuples, and trace languages over system runs by an explicit product.
"""

from __future__ import annotations

import itertools
import re
from functools import lru_cache
from pathlib import Path

from causalcheck import benchmarks
from causalcheck.dsl import parse_formula, parse_model, parse_property

ROOT = Path(__file__).resolve().parent.parent
CORPUS = ROOT / "benchmarks"

_TOKEN = re.compile(r"\s*(<=|>=|!=|=|\+|-|\*|[A-Za-z_][A-Za-z0-9_]*'?|\d+)")


def _tokens(text: str) -> list:
    out, pos = [], 0
    text = text.strip()
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if not m:
            raise ValueError(f"cannot read {text[pos:]!r}")
        out.append(m.group(1))
        pos = m.end()
    return out


def _compile_side(tokens):
    """(constant, [(coef, name, primed)]) or ("loc", name) for a bare identifier."""
    if len(tokens) == 1 and re.fullmatch(r"[A-Za-z_]\w*'?", tokens[0]):
        return ("name", tokens[0])
    const, terms, sign, i = 0, [], 1, 0
    while i < len(tokens):
        t = tokens[i]
        if t in "+-":
            sign = 1 if t == "+" else -1
            i += 1
            continue
        if t.isdigit():
            if i + 1 < len(tokens) and tokens[i + 1] == "*":
                terms.append((sign * int(t), tokens[i + 2]))
                i += 3
            else:
                const += sign * int(t)
                i += 1
            continue
        terms.append((sign, t))
        i += 1
    return ("sum", const, terms)


def _value(side, pre, post):
    if side[0] == "name":
        name = side[1]
        src = post if name.endswith("'") else pre
        base = name.rstrip("'")
        # a bare identifier that is not a variable is a location constant
        return src[base] if base in src else name
    _, const, terms = side
    total = const
    for coef, name in terms:
        src = post if name.endswith("'") else pre
        total += coef * src[name.rstrip("'")]
    return total


_OPS = {"<=": lambda a, b: a <= b, ">=": lambda a, b: a >= b,
        "=": lambda a, b: a == b, "!=": lambda a, b: a != b}


@lru_cache(maxsize=None)
def _compile(text: str):
    if text in ("true", "false"):
        return text == "true"
    atoms = []
    for atom in text.split(" & "):
        toks = _tokens(atom)
        ops = [k for k, t in enumerate(toks) if t in _OPS]
        if len(ops) != 1:
            raise ValueError(f"bad atom {atom!r}")
        k = ops[0]
        atoms.append((_compile_side(toks[:k]), _OPS[toks[k]], _compile_side(toks[k + 1:])))
    return tuple(atoms)


def eval_text(text: str, pre: dict, post: dict) -> bool:
    """Evaluate a rendered conjunction on a (pre, post) pair of states."""
    atoms = _compile(text)
    if isinstance(atoms, bool):
        return atoms
    return all(op(_value(lhs, pre, post), _value(rhs, pre, post)) for lhs, op, rhs in atoms)


def padded(states) -> list:
    states = list(states)
    return [states[0]] + states + [states[-1]]


def brute_member(states, trace) -> bool:
    """Membership by enumerating every index tuple over an already padded run."""
    if trace.contradictory:
        return False
    n = len(states) - 1
    events = list(trace.events)
    if not events:
        return True
    steps = list(zip(states, states[1:]))
    cands = []
    for e in events:
        text = e.label.render()
        allowed = [0] if e.initial else range(n)
        cands.append([i for i in allowed if eval_text(text, *steps[i])])
    links = [(link.src, link.tgt, link.label.render()) for link in trace.links]
    holds = {text: [eval_text(text, *s) for s in steps] for _, _, text in links}
    index = {e.id: k for k, e in enumerate(events)}
    for pos in itertools.product(*cands):
        if any(pos[index[a]] == pos[index[b]] for a, b in trace.conflicts):
            continue
        ok = True
        for a, b, text in links:
            pa, pb = pos[index[a]], pos[index[b]]
            if pa > pb or not all(holds[text][j] for j in range(pa + 1, pb)):
                ok = False
                break
        if ok:
            return True
    return False


def brute_member_lasso(states, loop_start, trace) -> bool:
    """Lasso membership: invariant on every loop step, cycle inside enough unrollings, stem before."""
    if trace.contradictory:
        return False
    loop = list(states[loop_start:])
    loop_steps = [(loop[i], loop[(i + 1) % len(loop)]) for i in range(len(loop))]
    inv = trace.invariant.render()
    if not all(eval_text(inv, a, b) for a, b in loop_steps):
        return False
    if trace.cycle.events:
        window = loop * (len(trace.cycle.events) + 1) + [loop[0]]
        if not brute_member(window, trace.cycle):
            return False
    if trace.stem.events:
        prefix = [states[0]] + list(states[:loop_start]) + loop * (len(trace.stem.events) + 1) + [loop[0]]
        if not brute_member(prefix, trace.stem):
            return False
    return True


# ---------------------------------------------------------------------------
# trace languages over system runs: determinised matching product
# ---------------------------------------------------------------------------

class Matcher:
    """Nondeterministic matcher of a finite trace along a run, one step at a time.

    A configuration is the set of events already placed.  Determinisation
    keeps the set of reachable configurations.
    """

    def __init__(self, trace):
        self.dead = trace.contradictory
        self.ids = [e.id for e in trace.events]
        self.labels = {e.id: e.label.render() for e in trace.events}
        self.initial = {e.id for e in trace.events if e.initial}
        self.preds = {i: set() for i in self.ids}
        for link in trace.links:
            self.preds[link.tgt].add(link.src)
        self.links = [(link.src, link.tgt, link.label.render()) for link in trace.links]
        self.conflicts = {frozenset(p) for p in trace.conflicts}
        self.full = frozenset(self.ids)
        self._memo: dict = {}

    def start(self) -> frozenset:
        return frozenset() if self.dead else frozenset([frozenset()])

    def step(self, configs: frozenset, pre, post, first: bool = False) -> frozenset:
        key = (configs, tuple(sorted(pre.items())), tuple(sorted(post.items())), first)
        hit = self._memo.get(key)
        if hit is None:
            hit = self._memo[key] = self._step(configs, pre, post, first)
        return hit

    def _step(self, configs, pre, post, first):
        fits = {i for i in self.ids if (first or i not in self.initial)
                and eval_text(self.labels[i], pre, post)}
        kept = {k for k, (_, _, t) in enumerate(self.links) if eval_text(t, pre, post)}
        out = set()
        for matched in configs:
            cands = [i for i in self.ids if i not in matched and i in fits]
            open_links = [(a, b) for k, (a, b, _) in enumerate(self.links)
                          if a in matched and b not in matched and k not in kept]
            for r in range(len(cands) + 1):
                for chosen in itertools.combinations(cands, r):
                    chosen = set(chosen)
                    done = matched | chosen
                    if any(not self.preds[i] <= done for i in chosen):
                        continue
                    if any(frozenset((x, y)) in self.conflicts for x in chosen for y in chosen if x < y):
                        continue
                    if any(b not in chosen for a, b in open_links):
                        continue
                    out.add(frozenset(done))
        return frozenset(out)

    def accepts(self, configs: frozenset, last_state) -> bool:
        final = self.step(configs, last_state, last_state)
        return self.full in final


def language_violations(system, parent, children, horizon: int, limit: int = 5,
                        complete: bool = True, stats: dict | None = None) -> list:
    """Runs up to ``horizon`` steps in some child but not the parent, or in the parent but no child.

    With ``complete=False`` only the first direction is checked, which is the
    one that must hold for runs of a system other than the one the tableau
    was built for.
    """
    from causalcheck.oracle import successors, _freeze, _thaw

    matchers = [Matcher(parent)] + [Matcher(c) for c in children]
    s0 = system.initial_state
    k0 = _freeze(system, s0)
    start = tuple(m.step(m.start(), s0, s0, first=True) for m in matchers)
    found = []
    best_depth: dict = {}
    stack = [(k0, start, 0, ())]
    while stack and len(found) < limit:
        key, configs, depth, names = stack.pop()
        memo = (key, configs)
        if best_depth.get(memo, horizon + 1) <= depth:
            continue
        best_depth[memo] = depth
        state = _thaw(system, key)
        acc = [m.accepts(c, state) for m, c in zip(matchers, configs)]
        if stats is not None and acc[0]:
            stats["parent_members"] = stats.get("parent_members", 0) + 1
        if any(acc[1:]) and not acc[0]:
            found.append(("child not contained", names))
        if complete and acc[0] and not any(acc[1:]):
            found.append(("parent not covered", names))
        if depth == horizon:
            continue
        for name, nxt in successors(system, key):
            post = _thaw(system, nxt)
            new = tuple(m.step(c, state, post) for m, c in zip(matchers, configs))
            stack.append((nxt, new, depth + 1, names + (name,)))
    return found


def lasso_violations(lassos, parent, children, limit: int = 5, complete: bool = True,
                     stats: dict | None = None) -> list:
    """The same two checks over an explicit list of lassos."""
    from causalcheck.trace import is_member_lasso

    found = []
    for c in lassos:
        inside = is_member_lasso(c, parent)
        if stats is not None and inside:
            stats["parent_members"] = stats.get("parent_members", 0) + 1
        hits = [is_member_lasso(c, t) for t in children]
        if any(hits) and not inside:
            found.append(("child not contained", c.transitions))
        if complete and inside and not any(hits):
            found.append(("parent not covered", c.transitions))
        if len(found) >= limit:
            break
    return found


# ---------------------------------------------------------------------------
# bundled instances
# ---------------------------------------------------------------------------

@lru_cache(maxsize=None)
def model_text(name: str) -> str:
    return (CORPUS / name).read_text()


@lru_cache(maxsize=None)
def load(model: str, prop: str):
    system = parse_model(model_text(model))
    return system, parse_property(model_text(prop), system)


def esparza_system(n: int, mutated: bool = False):
    return parse_model(benchmarks.esparza(n, mutated))


def prodcons_system(k: int, pool: int = 2, **kw):
    return parse_model(benchmarks.prodcons(k, pool=pool, **kw))


# ---------------------------------------------------------------------------
# random traces and state sequences over two integers x, y
# ---------------------------------------------------------------------------

EVENT_LABELS = ("true", "x = y", "x' = x + 1", "y' = y - 1", "x > y", "x' = x", "y' = y",
                "x <= 1", "y >= 1", "x' > x", "x = 0 & y' = y", "y' = y + 1 & x >= 1")
LINK_LABELS = ("true", "true", "x' = x", "y' = y", "x <= 1", "y' >= y")


def random_trace(rng, max_events: int = 5):
    from causalcheck.trace import ConcurrentTrace, Event, Link

    n = rng.randint(0, max_events)
    events = []
    for k in range(n):
        initial = k == 0 and rng.random() < 0.25
        label = "x = y" if initial and rng.random() < 0.5 else rng.choice(EVENT_LABELS)
        events.append(Event(f"e{k}", parse_formula(label), initial=initial))
    links, conflicts = [], []
    for i in range(n):
        for j in range(i + 1, n):
            r = rng.random()
            if r < 0.35:
                links.append(Link(f"e{i}", f"e{j}", parse_formula(rng.choice(LINK_LABELS))))
            elif r < 0.5:
                conflicts.append((f"e{i}", f"e{j}"))
    return ConcurrentTrace(tuple(events), tuple(links), tuple(conflicts))


def random_states(rng, max_steps: int = 8, values=range(0, 3)) -> tuple:
    return tuple({"x": rng.choice(values), "y": rng.choice(values)}
                 for _ in range(rng.randint(1, max_steps + 1)))


def bounded_models(f, box=range(-8, 9)):
    """Valuations in a bounded box satisfying ``f``, evaluated from its text.

    Location variables range over their declared domains, integers over
    ``box``.  Yields ``(pre, post)`` pairs.
    """
    from causalcheck.logic import LocLit, LocSame

    domains = {}
    for atom in f.atoms:
        if isinstance(atom, (LocLit, LocSame)) and atom.domain:
            base = atom.var.rstrip("'")
            domains[base] = sorted(atom.domain)
            domains[base + "'"] = sorted(atom.domain)
    names = sorted(f.variables())
    ranges = [domains.get(n, box) for n in names]
    text = f.render()
    for values in itertools.product(*ranges):
        pre, post = {}, {}
        for n, v in zip(names, values):
            (post if n.endswith("'") else pre)[n.rstrip("'")] = v
        if eval_text(text, pre, post):
            yield pre, post
