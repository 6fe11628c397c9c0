"""Independent replay of a saved tableau report.

The checker never searches for rule applications.  It rebuilds every node
from the roots by re-running the recorded productions, then re-validates
each closing step and recomputes which nodes are closed.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

from .dsl import ParseError, Vocabulary, parse_formula, parse_model, parse_property
from .logic import LogicError
from .model import ModelError
from .oracle import validate_run
from .tableau import initial_roots
from .trace import (
    Computation,
    ConcurrentTrace,
    InfiniteTrace,
    TraceError,
    check_mapping,
    extend_run,
    find_embedding_positions,
    trace_to_dict,
)
from .transformers import (
    RankingWitness,
    RuleNotApplicable,
    check_terminating,
    contradiction_reason,
    instantiate_cycle,
    invariance_split,
    last_necessary_event,
    necessary_cycle_event,
    necessary_event,
    order_split,
)


@dataclass
class CheckResult:
    problems: list = field(default_factory=list)
    replayed: int = 0

    @property
    def ok(self) -> bool:
        return not self.problems


class _Reject(Exception):
    pass


def _replay(rule: str, params: dict, trace, system, node_id: int, phi_of) -> list:
    if not isinstance(params, dict):
        raise _Reject(f"{rule}: parameters must be an object")
    try:
        if rule == "OrderSplit":
            return order_split(trace, params["a"], params["b"])
        if rule == "NecessaryEvent":
            return necessary_event(trace, params["a"], params["b"], phi_of(params["phi"]), system, node_id)
        if rule == "LastNecessaryEvent":
            return last_necessary_event(trace, params["b"], phi_of(params["phi"]), system, node_id)
        if rule == "InvarianceSplit":
            return invariance_split(trace, phi_of(params["phi"]), node_id)
        if rule == "InstantiateCycle":
            return instantiate_cycle(trace, params["event"], system)
        if rule == "NecessaryCycleEvent":
            current = [trace]
            for k, step in enumerate(params["steps"]):
                if len(current) != 1:
                    raise _Reject(f"chain step {k + 1} follows a split")
                current = necessary_cycle_event(current[0], step["event"], phi_of(step["phi"]),
                                                system, node_id, k + 1)
            return current
    except (KeyError, TypeError) as exc:
        raise _Reject(f"{rule}: malformed parameters ({exc})") from None
    except (RuleNotApplicable, TraceError, LogicError, ParseError, AttributeError) as exc:
        raise _Reject(f"{rule} does not apply: {exc}") from None
    raise _Reject(f"unknown rule {rule!r}")


def check_report(data: dict) -> CheckResult:
    result = CheckResult()
    try:
        _check(data, result)
    except _Reject as exc:
        result.problems.append(str(exc))
    return result


def check_report_text(text: str) -> CheckResult:
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        return CheckResult([f"not JSON: {exc}"])
    if not isinstance(data, dict):
        return CheckResult(["report must be a JSON object"])
    return check_report(data)


def _check(data: dict, result: CheckResult) -> None:
    problems = result.problems
    if data.get("format") != 1:
        raise _Reject(f"unsupported report format {data.get('format')!r}")
    try:
        system = parse_model(data["model"])
        prop = parse_property(data["property"], system)
    except (KeyError, TypeError) as exc:
        raise _Reject(f"missing model or property ({exc})") from None
    except (ParseError, ModelError) as exc:
        raise _Reject(f"embedded model or property does not parse: {exc}") from None
    vocab = Vocabulary.of(system)

    def phi_of(text):
        if not isinstance(text, str):
            raise _Reject(f"predicate must be text, got {text!r}")
        return parse_formula(text, vocab)

    nodes = data.get("nodes")
    if not isinstance(nodes, list) or not nodes:
        raise _Reject("report has no nodes")
    by_id = {}
    for i, n in enumerate(nodes, start=1):
        if not isinstance(n, dict) or n.get("id") != i:
            raise _Reject(f"node {i} is missing or out of order")
        by_id[i] = n

    # structure: parent/children agree in both directions
    for nid, n in by_id.items():
        for c in n.get("children", []):
            if c not in by_id or by_id[c].get("parent") != nid:
                raise _Reject(f"node {nid} lists child {c} whose parent differs")
        p = n.get("parent")
        if p is not None and (p not in by_id or nid not in by_id[p].get("children", [])):
            raise _Reject(f"node {nid} names parent {p} which does not list it")

    # rebuild every trace from the roots
    roots = [nid for nid, n in by_id.items() if n.get("parent") is None]
    expected_roots = initial_roots(system, prop)
    if len(roots) != len(expected_roots):
        raise _Reject(f"expected {len(expected_roots)} root(s), found {len(roots)}")
    traces = {}
    for nid, t in zip(roots, expected_roots):
        traces[nid] = t
        if by_id[nid].get("rule") is not None:
            problems.append(f"root {nid} claims to come from a rule")
    for nid in sorted(by_id):
        n = by_id[nid]
        if nid not in traces:
            raise _Reject(f"node {nid} cannot be rebuilt from a root")
        if n.get("trace") != trace_to_dict(traces[nid]):
            problems.append(f"node {nid}: stored trace differs from the replayed one")
        children = n.get("children", [])
        if not children:
            continue
        rules = {(by_id[c].get("rule"), json.dumps(by_id[c].get("params"), sort_keys=True)) for c in children}
        if len(rules) != 1:
            raise _Reject(f"children of node {nid} disagree on the production")
        first = by_id[children[0]]
        replayed = _replay(first.get("rule"), first.get("params"), traces[nid], system, nid, phi_of)
        result.replayed += 1
        if len(replayed) != len(children):
            raise _Reject(f"node {nid}: {first.get('rule')} yields {len(replayed)} children, "
                          f"report has {len(children)}")
        for c, t in zip(children, replayed):
            traces[c] = t

    # leaves: validate closing steps
    status: dict = {}
    covers: dict = {}
    for nid, n in by_id.items():
        t = traces[nid]
        closing = n.get("closing")
        shown = n.get("status")
        if n.get("children"):
            status[nid] = "expanded"
            if closing is not None:
                problems.append(f"node {nid} is expanded but also has a closing step")
            continue
        if n.get("covered_by") is not None:
            target = n["covered_by"]
            if target not in by_id or target == nid:
                problems.append(f"node {nid} is covered by a missing node {target}")
                status[nid] = "open"
                continue
            mapping = (closing or {}).get("params", {}).get("mapping") if isinstance(closing, dict) else None
            if not isinstance(mapping, dict) or not check_mapping(traces[target], t, mapping):
                problems.append(f"node {nid}: covering by {target} does not embed")
                status[nid] = "open"
                continue
            if isinstance(traces[target], InfiniteTrace) != isinstance(t, InfiniteTrace):
                problems.append(f"node {nid}: covering mixes finite and infinite traces")
            status[nid] = "covered"
            covers[nid] = target
            continue
        rule = closing.get("rule") if isinstance(closing, dict) else None
        if rule == "ContradictionClose":
            params = closing.get("params") or {}
            if "rule" in params:
                replayed = _replay(params["rule"], params.get("params"), t, system, nid, phi_of)
                ok = not replayed
            else:
                ok = contradiction_reason(t, system) is not None
            if not ok:
                problems.append(f"node {nid} is not contradictory")
                status[nid] = "open"
            else:
                status[nid] = "contradictory"
        elif rule == "TerminatingClose":
            try:
                witness = RankingWitness(**closing.get("params", {}))
            except TypeError:
                problems.append(f"node {nid}: malformed ranking witness")
                status[nid] = "open"
                continue
            if not isinstance(t, InfiniteTrace) or not check_terminating(t, witness):
                problems.append(f"node {nid}: ranking witness does not hold")
                status[nid] = "open"
            else:
                status[nid] = "terminating"
        elif rule is not None:
            problems.append(f"node {nid}: unknown closing rule {rule!r}")
            status[nid] = "open"
        else:
            status[nid] = "unknown" if shown == "unknown" else "open"

    # least fixpoint: covered nodes close only through acyclic dependencies
    closed: set = set()
    changed = True
    while changed:
        changed = False
        for nid, n in by_id.items():
            if nid in closed:
                continue
            s = status[nid]
            if s in ("contradictory", "terminating"):
                ok = True
            elif s == "expanded":
                ok = all(c in closed for c in n["children"])
            elif s == "covered":
                ok = covers[nid] in closed
            else:
                ok = False
            if ok:
                closed.add(nid)
                changed = True

    for nid, n in by_id.items():
        s = status[nid]
        if s in ("covered", "contradictory", "unknown"):
            shown = s
        else:
            shown = "closed" if nid in closed else "open"
        if n.get("status") != shown:
            problems.append(f"node {nid}: status {n.get('status')!r}, recomputed {shown!r}")

    _check_summary(data, by_id, status, covers, problems)
    _check_verdict(data, system, roots, traces, closed, problems)


def _check_summary(data, by_id, status, covers, problems):
    coverings = data.get("coverings")
    listed = {}
    if isinstance(coverings, list):
        for c in coverings:
            if isinstance(c, dict):
                listed[c.get("source")] = c
    if set(listed) != {nid for nid, n in by_id.items() if n.get("covered_by") is not None}:
        problems.append("covering list does not match the covered nodes")
    else:
        for src, c in listed.items():
            closing = by_id[src].get("closing") or {}
            if c.get("target") != by_id[src]["covered_by"] or c.get("mapping") != closing.get("params", {}).get("mapping"):
                problems.append(f"covering entry for node {src} disagrees with the node")
    witnesses = [{"node": nid, **(n.get("closing") or {}).get("params", {})}
                 for nid, n in by_id.items()
                 if (n.get("closing") or {}).get("rule") == "TerminatingClose"]
    if data.get("witnesses") != witnesses:
        problems.append("witness list does not match the terminating nodes")
    stats = data.get("stats")
    if not isinstance(stats, dict) or stats.get("nodes") != len(by_id):
        problems.append("node count in stats is wrong")


def _check_verdict(data, system, roots, traces, closed, problems):
    verdict = data.get("verdict")
    proven = all(r in closed for r in roots)
    cex = data.get("counterexample")
    if verdict == "proven":
        if not proven:
            problems.append("verdict is proven but some root stays open")
        if cex is not None:
            problems.append("a proven report carries a counterexample")
    elif verdict == "violated":
        if proven:
            problems.append("verdict is violated but every root is closed")
        if not isinstance(cex, dict):
            problems.append("violated verdict without a counterexample")
            return
        try:
            states = tuple(dict(s) for s in cex["states"])
            run = Computation(states, None, tuple(cex["transitions"]))
        except (KeyError, TypeError, ValueError):
            problems.append("malformed counterexample")
            return
        if not validate_run(system, run):
            problems.append("counterexample is not a run of the system")
            return
        padded = extend_run(states)
        if not any(isinstance(traces[r], ConcurrentTrace) and find_embedding_positions(padded, traces[r]) is not None
                   for r in roots):
            problems.append("counterexample does not match any root trace")
    elif verdict == "unknown":
        if proven:
            problems.append("verdict is unknown but every root is closed")
    else:
        problems.append(f"unknown verdict {verdict!r}")
