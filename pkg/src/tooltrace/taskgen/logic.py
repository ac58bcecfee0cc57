"""Random Boolean DAG evaluation with the search memory tool.

The instance is rendered as a little program: one assignment per node in
creation order ('name = [not] a [and|or] [not] b'), input nodes bound to
True/False literals, and a final 'print ( name )' line marking the output.

The reference trajectory resolves the printed variable by depth-first
search. Scratch lines use dedicated markers so every search returns one or
two short lines: 'name := rhs' is the working copy of a line being
rewritten, 'name == val' is a finished resolution, and 'ret child parent'
records where to backtrack after resolving a child. Operands are resolved
right to left; resolved values replace names in the re-emitted working
line; the final answer is the last emitted line.
"""

from __future__ import annotations

import random

from ..oracles import SearchMemory
from ..protocol import EOS, NL, VALUE, ScriptRunner, Trajectory
from ..seeding import rng_for
from .base import TaskInstance, TaskSpec, register

CONSTS = ("True", "False")
KEYWORDS = {"True", "False", "and", "or", "not", "=", ":=", "==",
            "(", ")", "print", "ret"}


def eval_graph(nodes: list[dict]) -> dict[str, bool]:
    """Brute-force evaluation in creation order (operands precede users)."""
    vals: dict[str, bool] = {}
    for node in nodes:
        if node["kind"] == "input":
            vals[node["name"]] = node["value"]
        else:
            ops = []
            for neg, ref in node["operands"]:
                v = vals[ref]
                ops.append(not v if neg else v)
            if len(ops) == 1:
                vals[node["name"]] = ops[0]
            elif node["op"] == "and":
                vals[node["name"]] = ops[0] and ops[1]
            else:
                vals[node["name"]] = ops[0] or ops[1]
    return vals


def render_lines(nodes: list[dict]) -> list[list[str]]:
    lines = []
    for node in nodes:
        if node["kind"] == "input":
            lines.append([node["name"], "=", "True" if node["value"] else "False"])
        else:
            toks = [node["name"], "="]
            for i, (neg, ref) in enumerate(node["operands"]):
                if i:
                    toks.append(node["op"])
                if neg:
                    toks.append("not")
                toks.append(ref)
            lines.append(toks)
    lines.append(["print", "(", nodes[-1]["name"], ")"])
    return lines


def instance_from_nodes(nodes: list[dict], n: int, seed: int = 0) -> TaskInstance:
    lines = render_lines(nodes)
    tokens = []
    for line in lines:
        tokens.extend(line)
        tokens.append(NL)
    answer = eval_graph(nodes)[nodes[-1]["name"]]
    return TaskInstance("logic", n, seed, tokens,
                        ["True" if answer else "False"], {"nodes": nodes})


def sample_logic_graph(n: int, rng: random.Random, k: int = 3) -> TaskInstance:
    if n <= k:
        raise ValueError("need n > k")
    names = ["v%d" % i for i in rng.sample(range(10000), n)]
    nodes = []
    for i in range(k):
        nodes.append({"kind": "input", "name": names[i], "value": rng.random() < 0.5})
    for i in range(k, n):
        arity = rng.choice((1, 2))
        operands = [(rng.random() < 0.5, nodes[rng.randrange(i)]["name"])
                    for _ in range(arity)]
        nodes.append({"kind": "op", "name": names[i],
                      "op": rng.choice(("and", "or")), "operands": operands})
    return instance_from_nodes(nodes, n)


def _split_lines(obs: list[str]) -> list[list[str]]:
    lines, cur = [], []
    for tok in obs:
        if tok == ",":
            lines.append(cur)
            cur = []
        else:
            cur.append(tok)
    if cur:
        lines.append(cur)
    return lines


def _last_unresolved(line: list[str]) -> str | None:
    for tok in reversed(line[2:]):
        if tok not in KEYWORDS:
            return tok
    return None


def _subst(line: list[str], name: str, val: str) -> list[str]:
    """Replace the operand, folding an immediately preceding 'not'."""
    out = []
    for tok in line:
        if tok == name:
            if out and out[-1] == "not":
                out.pop()
                out.append("False" if val == "True" else "True")
            else:
                out.append(val)
        else:
            out.append(tok)
    return out


def _eval_rhs(rhs: list[str]) -> str:
    vals, op = [], None
    for tok in rhs:
        if tok in ("and", "or"):
            op = tok
        else:
            vals.append(tok == "True")
    if len(vals) == 1:
        out = vals[0]
    elif op == "and":
        out = vals[0] and vals[1]
    else:
        out = vals[0] or vals[1]
    return "True" if out else "False"


def build_logic_trajectory(inst: TaskInstance) -> Trajectory:
    r = ScriptRunner(SearchMemory(), inst.input_tokens, fmt="search")

    def find(*pattern: str) -> list[list[str]]:
        obs = r.command("find", VALUE, *pattern)
        return _split_lines(obs) if obs else []

    hits = find("print")
    var = hits[0][2]
    line = [var, ":=", *find(var, "=")[-1][2:]]
    r.emit(*line, NL)
    while True:
        child = _last_unresolved(line)
        if child is not None:
            # note the pending parent first, while both names are local;
            # notes of already-resolved children are simply never read back
            r.emit("ret", child, line[0], NL)
            if not find(child, "=="):
                hit = find(child, "=")[-1]
                if len(hit) == 3 and hit[2] in CONSTS:
                    # memo the literal binding so values are always found
                    # under the resolution marker
                    r.emit(child, "==", hit[2], NL)
                else:
                    line = [child, ":=", *hit[2:]]
                    r.emit(*line, NL)
                    continue
            # substitute: re-find the working line and the value so the
            # rewritten line is assembled from adjacent observations
            partial = find(line[0], ":=")[-1]
            val = find(child, "==")[-1][2]
            line = _subst(partial, child, val)
            r.emit(*line, NL)
            continue
        # fully resolved: reduce and emit the resolution
        var = line[0]
        val = _eval_rhs(line[2:])
        r.emit(var, "==", val, NL)
        notes = find("ret", var)
        if not notes:
            r.emit(val, NL)
            break
        parent = notes[-1][2]
        partial = find(parent, ":=")[-1]
        done = find(var, "==")
        line = _subst(partial, var, done[-1][2])
        r.emit(*line, NL)
    r.emit(EOS)
    return Trajectory(task="logic", n=inst.n, seed=inst.seed,
                      input_tokens=inst.input_tokens,
                      events=r.machine.finalize(strict=True),
                      setting="interactive", fmt="search")


def _shape_instances() -> list[TaskInstance]:
    """Every output-node shape over every input-value combination."""
    out = []
    shapes = []
    for arity in (1, 2):
        negs = [(a, b) for a in (False, True) for b in (False, True)]
        for op in ("and", "or"):
            for neg in negs if arity == 2 else [(False,), (True,)]:
                shapes.append((arity, op, neg))
    idx = 0
    for arity, op, neg in shapes:
        for bits in range(8):
            names = ["v%d" % (9000 + idx * 10 + j) for j in range(5)]
            idx += 1
            nodes = [{"kind": "input", "name": names[j],
                      "value": bool(bits >> j & 1)} for j in range(3)]
            operands = [(neg[j], names[j]) for j in range(arity)]
            nodes.append({"kind": "op", "name": names[3], "op": op,
                          "operands": operands})
            # a second level exercises descend + backtrack for each shape
            nodes.append({"kind": "op", "name": names[4], "op": op,
                          "operands": [(neg[0], names[3])][:1] if arity == 1
                          else [(neg[0], names[3]), (neg[1], names[0])]})
            out.append(instance_from_nodes(nodes, 5))
    return out


def training_instances(n_max: int = 10, samples: int = 4000,
                       seed: int = 0) -> list[TaskInstance]:
    rng = rng_for(seed, 0x106)
    out = _shape_instances()
    for _ in range(samples):
        n = rng.randint(4, n_max)
        out.append(sample_logic_graph(n, rng))
    return out


def _sample(n: int, rng: random.Random) -> TaskInstance:
    return sample_logic_graph(n, rng)


register(TaskSpec(
    name="logic",
    fmt="search",
    sample=_sample,
    build=build_logic_trajectory,
    make_oracle=SearchMemory,
    training_instances=training_instances,
    check_answer=lambda inst, out: out == inst.answer_tokens,
    default_train_n=10,
    k_candidates=tuple(range(12, 97, 4)),
    abstract_re=r"v\d+",
))
