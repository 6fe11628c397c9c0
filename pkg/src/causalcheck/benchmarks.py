"""Generators for the bundled benchmark models and properties."""

from __future__ import annotations

import os
from pathlib import Path


def esparza(n: int, mutated: bool = False) -> str:
    """Process P0 and P1 race on ``a``; ``c`` needs every process at its middle location.

    With ``mutated`` the local ``a1`` ends in ``s2`` instead of ``s4`` so
    that ``c`` becomes executable.
    """
    if n < 1:
        raise ValueError("n must be at least 1")
    name = f"esparza_mut_n{n}" if mutated else f"esparza_n{n}"
    lines = [f"system {name} {{"]
    lines += [
        "  process P0 {",
        "    locations r1, r2, r3 init r1;",
        "    trans a0: r1 -> r2;",
        "    trans c0: r2 -> r3;",
        "  }",
        "  process P1 {",
        "    locations s1, s2, s3, s4 init s1;",
        f"    trans a1: s1 -> {'s2' if mutated else 's4'};",
        "    trans b1: s1 -> s2;",
        "    trans c1: s2 -> s3;",
        "  }",
    ]
    for i in range(2, n + 1):
        lines += [
            f"  process P{i} {{",
            f"    locations t{i}_1, t{i}_2, t{i}_3 init t{i}_1;",
            f"    trans b{i}: t{i}_1 -> t{i}_2;",
            f"    trans c{i}: t{i}_2 -> t{i}_3;",
            "  }",
        ]
    lines.append("  sync {")
    lines.append("    a = {a0, a1};")
    for i in range(1, n + 1):
        lines.append(f"    b{i} = {{b{i}}};")
    lines.append("    c = {" + ", ".join(f"c{i}" for i in range(n + 1)) + "};")
    lines.append("  }")
    lines.append("}")
    return "\n".join(lines) + "\n"


def prodcons(producers: int, consumers: int | None = None, pool: int = 2,
             queues: int | None = None, consume: bool = True) -> str:
    """Producers move tasks from private pools into queues; consumer ``j`` drains queue ``j``.

    ``queues`` defaults to the number of consumers.  With ``consume=False``
    consumers never decrement their queue, which makes the system diverge.
    """
    consumers = producers if consumers is None else consumers
    queues = consumers if queues is None else queues
    if producers < 1 or consumers < 0 or queues < 1 or pool < 0:
        raise ValueError("invalid producer/consumer configuration")
    suffix = "" if consume else "_noconsume"
    name = f"prodcons_{producers}_{consumers}{suffix}"
    cap = producers * pool
    lines = [f"system {name} {{"]
    lines.append(f"  // pools hold at most {pool} tasks; every queue holds at most {cap}")
    for i in range(1, producers + 1):
        lines.append(f"  var p{i}: int in 0..{pool} init {pool};")
    for j in range(1, queues + 1):
        lines.append(f"  var q{j}: int in 0..{cap} init 0;")
    for i in range(1, producers + 1):
        lines += [
            f"  process Prod{i} {{",
            "    locations l1, l2, l3 init l1;",
            f"    trans a{i}_1: l1 -> l2 when p{i} > 0;",
        ]
        for j in range(1, queues + 1):
            lines.append(f"    trans a{i}_q{j}: l2 -> l3 update q{j} := q{j} + 1;")
        lines += [
            f"    trans a{i}_4: l3 -> l1 update p{i} := p{i} - 1;",
            "  }",
        ]
    for j in range(1, consumers + 1):
        last = f" update q{j} := q{j} - 1" if consume else ""
        lines += [
            f"  process Cons{j} {{",
            "    locations m1, m2, m3, m4 init m1;",
            f"    trans c{j}_1: m1 -> m2 when q{j} > 0;",
            f"    trans c{j}_2: m2 -> m3;",
            f"    trans c{j}_3: m3 -> m4;",
            f"    trans c{j}_4: m4 -> m1{last};",
            "  }",
        ]
    lines.append("}")
    return "\n".join(lines) + "\n"


def lock(broken: bool) -> str:
    """Two processes cycling through N, T, C around a shared lock flag.

    The broken variant tests the flag when it starts trying instead of when
    it enters, so both processes can pass the test before either sets it.
    """
    name = "lock_broken" if broken else "lock_correct"
    lines = [f"system {name} {{", "  var lock: int in 0..1 init 0;"]
    for i in (1, 2):
        lines += [f"  process P{i} {{", "    locations N, T, C init N;"]
        if broken:
            lines += [
                f"    trans try{i}: N -> T when lock = 0;",
                f"    trans enter{i}: T -> C update lock := 1;",
            ]
        else:
            lines += [
                f"    trans try{i}: N -> T;",
                f"    trans enter{i}: T -> C when lock = 0 update lock := 1;",
            ]
        lines += [f"    trans exit{i}: C -> N update lock := 0;", "  }"]
    lines.append("}")
    return "\n".join(lines) + "\n"


REACH_C = "property reach_c reach trans(c);\n"
TERMINATION = "property term termination;\n"

MUTEX = """property mutex violation {
  event init: init;
  event both: loc_P1 = C & loc_P2 = C;
  link init -> both;
}
"""

STRICT_PRECEDENCE = """property precedence violation {
  event init: init;
  event trying: loc_P1 = T & loc_P2 != C;
  event overtaken: loc_P2 = C;
  link init -> trying;
  link trying -> overtaken label loc_P1 != C;
}
"""

BOUNDED_OVERTAKING = """property overtaking violation {
  event init: init;
  event trying: loc_P1 = T;
  event first: loc_P2 = C;
  event left: loc_P2 != C;
  event second: loc_P2 = C;
  link init -> trying;
  link trying -> first;
  link first -> left;
  link left -> second;
  link trying -> second label loc_P1 != C;
}
"""


def corpus() -> dict:
    """File name -> content for the bundled benchmark directory."""
    files = {}
    for n in range(1, 11):
        files[f"esparza_n{n}.sys"] = esparza(n)
    for n in (2, 3, 5):
        files[f"esparza_mut_n{n}.sys"] = esparza(n, mutated=True)
    for k in range(1, 6):
        files[f"prodcons_{k}_{k}.sys"] = prodcons(k, pool=2)
    files["prodcons_2_2_noconsume.sys"] = prodcons(2, pool=1, consume=False)
    files["lock_broken.sys"] = lock(broken=True)
    files["lock_correct.sys"] = lock(broken=False)
    files["reach_c.prop"] = REACH_C
    files["term.prop"] = TERMINATION
    files["mutex.prop"] = MUTEX
    files["precedence.prop"] = STRICT_PRECEDENCE
    files["overtaking.prop"] = BOUNDED_OVERTAKING
    return files


def write_atomic(path, text: str) -> None:
    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(text)
    os.replace(tmp, path)


def write_corpus(directory) -> list:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    written = []
    for name, text in sorted(corpus().items()):
        write_atomic(directory / name, text)
        written.append(name)
    return written
