"""Synthetic code-fixing environment.

A codebase is a random dependency DAG of tiny functions, one per file, with
`main` at the root and `foo` the last node added. Each function declares
local variables, prints some of them, and calls the functions it imports.
The planted bug: `v10` is declared in `main` and referenced in `foo`
without being passed down, so running the code fails with an unresolved
name. Fixing it means threading `v10` through every main->foo path.

Execution uses a closed-interpreter for the restricted generated language,
never a real Python runtime. Two scripted agents produce trajectories: a
single-turn agent (print everything, then output the whole patch) and an
interactive agent (run, fix up to three files, run again, until clean).
"""

from __future__ import annotations

import json
import os
import random
import re
from dataclasses import dataclass, field

from .protocol import ANS, EOS, NL, ScriptRunner, Trajectory
from .seeding import rng_for


class CodefixError(Exception):
    pass


class ParseError(CodefixError):
    pass


class LoopLimit(CodefixError):
    pass


# --------------------------------------------------------------------------
# Codebase generation

@dataclass
class FuncSpec:
    name: str
    params: list[str] = field(default_factory=list)
    body: list[tuple] = field(default_factory=list)  # (op, ...) statements
    imports: list[str] = field(default_factory=list)


@dataclass
class CodebaseSpec:
    n: int
    seed: int
    funcs: dict[str, FuncSpec]
    edges: list[tuple[str, str]]          # (parent, child): parent imports child
    bug_site: str = "foo"

    def files(self) -> dict[str, str]:
        return {name + ".py": render_func(fn, name == "main")
                for name, fn in self.funcs.items()}

    def manifest(self) -> dict:
        return {
            "n": self.n,
            "seed": self.seed,
            "edges": self.edges,
            "bug": {"variable": "v10", "declared_in": "main",
                    "referenced_in": self.bug_site},
        }


def render_func(fn: FuncSpec, is_main: bool) -> str:
    lines = ["import %s" % m for m in fn.imports]
    lines.append("def %s(%s):" % (fn.name, ", ".join(fn.params)))
    body = []
    for stmt in fn.body:
        if stmt[0] == "assign":
            body.append("    %s = %d" % (stmt[1], stmt[2]))
        elif stmt[0] == "print":
            body.append("    print(%s)" % stmt[1])
        else:  # call
            _, callee, args = stmt
            body.append("    %s.%s(%s)" % (callee, callee, ", ".join(args)))
    if not body:
        body.append("    pass")
    lines.extend(body)
    if is_main:
        lines.append("main()")
    return "\n".join(lines) + "\n"


def gen_codebase(n: int, seed: int, assign_density: float = 0.7,
                 print_density: float = 0.5) -> CodebaseSpec:
    """Random DAG of n functions with the v10 bug planted."""
    if n < 2:
        raise ValueError("need at least main and foo")
    rng = rng_for(seed, 0xC0DE)
    pool = rng.sample(range(1000), n)
    names = ["main"] + ["f%d" % pool[i] for i in range(1, n - 1)] + ["foo"]
    funcs = {name: FuncSpec(name) for name in names}
    edges = []
    for i in range(1, n):
        parents = rng.sample(range(i), min(len(range(i)), 1 + (rng.random() < 0.3)))
        for p in parents:
            edges.append((names[p], names[i]))
            funcs[names[p]].imports.append(names[i])
    # locals, prints, then calls
    for name in names:
        fn = funcs[name]
        locs = []
        for v in range(rng.randint(1, 3)):
            if rng.random() < assign_density or v == 0:
                var = "v%d" % rng.randint(0, 9)
                if var not in locs:
                    fn.body.append(("assign", var, rng.randint(0, 99)))
                    locs.append(var)
        if name == "main":
            fn.body.append(("assign", "v10", rng.randint(0, 99)))
            locs.append("v10")
        for var in locs:
            if rng.random() < print_density:
                fn.body.append(("print", var))
        for callee in fn.imports:
            nargs = rng.randint(0, min(2, len(locs)))
            args = rng.sample([v for v in locs if v != "v10"] or locs[:1],
                              min(nargs, len([v for v in locs if v != "v10"])))
            fn.body.append(("call", callee, args))
            for a in args:
                if a not in funcs[callee].params:
                    funcs[callee].params.append(a)
    funcs["foo"].body.append(("print", "v10"))  # the bug
    return CodebaseSpec(n, seed, funcs, edges)


# --------------------------------------------------------------------------
# Restricted-language interpreter

_RE_IMPORT = re.compile(r"import (\w+)$")
_RE_DEF = re.compile(r"def (\w+)\(([^)]*)\):$")
_RE_ASSIGN = re.compile(r"    (\w+) = (\d+)$")
_RE_PRINT = re.compile(r"    print\((\w+)\)$")
_RE_CALL = re.compile(r"    (\w+)\.(\w+)\(([^)]*)\)$")
_RE_PASS = re.compile(r"    pass$")


@dataclass
class RunResult:
    status: str                    # ok | unresolved_name | other_error
    name: str = ""
    function: str = ""
    transcript: list[str] = field(default_factory=list)

    def brief(self) -> str:
        if self.status == "ok":
            return "ok"
        if self.status == "unresolved_name":
            return "NameError: name '%s' is not defined in %s" % (
                self.name, self.function)
        return "error: " + self.name


def parse_files(files: dict[str, str]) -> dict[str, FuncSpec]:
    funcs = {}
    entry = None
    for path, text in files.items():
        mod = path[:-3]
        fn = FuncSpec(mod)
        in_def = False
        for line in text.splitlines():
            if not line.strip():
                continue
            m = _RE_IMPORT.fullmatch(line)
            if m:
                fn.imports.append(m.group(1))
                continue
            m = _RE_DEF.fullmatch(line)
            if m:
                if m.group(1) != mod:
                    raise ParseError("%s defines %s" % (path, m.group(1)))
                fn.params = [p.strip() for p in m.group(2).split(",") if p.strip()]
                in_def = True
                continue
            if line == "main()" and mod == "main":
                entry = True
                continue
            if not in_def:
                raise ParseError("statement outside def in %s: %r" % (path, line))
            m = _RE_ASSIGN.fullmatch(line)
            if m:
                fn.body.append(("assign", m.group(1), int(m.group(2))))
                continue
            m = _RE_PRINT.fullmatch(line)
            if m:
                fn.body.append(("print", m.group(1)))
                continue
            m = _RE_CALL.fullmatch(line)
            if m:
                if m.group(1) != m.group(2):
                    raise ParseError("call must be mod.mod(...) in %s" % path)
                args = [a.strip() for a in m.group(3).split(",") if a.strip()]
                fn.body.append(("call", m.group(1), args))
                continue
            if _RE_PASS.fullmatch(line):
                continue
            raise ParseError("unrecognized line in %s: %r" % (path, line))
        funcs[mod] = fn
    if "main" not in funcs or entry is None:
        raise ParseError("no main() entry")
    return funcs


def interpret(files: dict[str, str], call_limit: int = 100_000) -> RunResult:
    """Run from main(); report the first unresolved variable reference."""
    funcs = parse_files(files)
    transcript: list[str] = []
    calls = 0

    def run(name: str, args: list[int]) -> RunResult | None:
        nonlocal calls
        calls += 1
        if calls > call_limit:
            return RunResult("other_error", "call limit exceeded", name)
        fn = funcs[name]
        if len(args) != len(fn.params):
            return RunResult("other_error",
                             "arity mismatch calling %s" % name, name)
        env = dict(zip(fn.params, args))
        for stmt in fn.body:
            if stmt[0] == "assign":
                env[stmt[1]] = stmt[2]
            elif stmt[0] == "print":
                if stmt[1] not in env:
                    return RunResult("unresolved_name", stmt[1], name)
                transcript.append("%s" % env[stmt[1]])
            else:
                _, callee, cargs = stmt
                if callee not in fn.imports or callee not in funcs:
                    return RunResult("other_error",
                                     "unknown module %s" % callee, name)
                vals = []
                for a in cargs:
                    if a not in env:
                        return RunResult("unresolved_name", a, name)
                    vals.append(env[a])
                err = run(callee, vals)
                if err is not None:
                    return err
        return None

    err = run("main", [])
    if err is not None:
        err.transcript = transcript
        return err
    return RunResult("ok", transcript=transcript)


# --------------------------------------------------------------------------
# The gold patch

def path_nodes(spec: CodebaseSpec) -> set[str]:
    """Functions lying on some main->foo dependency path."""
    fwd: dict[str, list[str]] = {}
    back: dict[str, list[str]] = {}
    for p, c in spec.edges:
        fwd.setdefault(p, []).append(c)
        back.setdefault(c, []).append(p)

    def reach(start, graph):
        seen = {start}
        stack = [start]
        while stack:
            for nxt in graph.get(stack.pop(), []):
                if nxt not in seen:
                    seen.add(nxt)
                    stack.append(nxt)
        return seen

    return reach("main", fwd) & reach("foo", back)


def gold_patch_funcs(spec: CodebaseSpec) -> dict[str, FuncSpec]:
    """Thread v10 through every main->foo path; other functions untouched."""
    onpath = path_nodes(spec)
    patched: dict[str, FuncSpec] = {}
    for name, fn in spec.funcs.items():
        if name not in onpath:
            continue
        new = FuncSpec(name, list(fn.params), [], list(fn.imports))
        if name != "main" and "v10" not in new.params:
            new.params.append("v10")
        for stmt in fn.body:
            if stmt[0] == "call" and stmt[1] in onpath:
                args = list(stmt[2])
                if "v10" not in args:
                    args.append("v10")
                new.body.append(("call", stmt[1], args))
            else:
                new.body.append(stmt)
        patched[name] = new
    return patched


def gold_patch(spec: CodebaseSpec) -> dict[str, str]:
    """Whole-file replacements fixing the bug."""
    return {name + ".py": render_func(fn, name == "main")
            for name, fn in gold_patch_funcs(spec).items()}


def apply_patch(files: dict[str, str], patch: dict[str, str]) -> dict[str, str]:
    out = dict(files)
    for path, text in patch.items():
        if path not in out:
            raise CodefixError("patch touches unknown file %s" % path)
        out[path] = text
    return out


def check_fixed(files: dict[str, str], patch: dict[str, str]) -> bool:
    return interpret(apply_patch(files, patch)).status == "ok"


# --------------------------------------------------------------------------
# Scripted agents (trajectories in the tagged wire format)

def _atoms(text: str) -> list[str]:
    out = []
    for line in text.splitlines():
        out.extend(line.split())
        out.append(NL)
    return out


class _FilesOracle:
    """Command oracle over a mutable codebase: cat_all, run, edit."""

    def __init__(self, files: dict[str, str]):
        self.files = dict(files)

    def reset(self, input_tokens):
        pass

    def append(self, atom):
        pass

    def execute(self, cmd: list[str]) -> list[str] | None:
        if cmd[:1] == ["cat_all"]:
            out = []
            for path in sorted(self.files):
                out.extend(["<<", path, NL])
                out.extend(_atoms(self.files[path]))
            return out
        if cmd[:1] == ["run"]:
            return _atoms(interpret(self.files).brief())
        if cmd[:1] == ["edit"]:
            path = cmd[1]
            text_atoms = cmd[2:]
            lines: list[list[str]] = [[]]
            for a in text_atoms:
                if a == NL:
                    lines.append([])
                else:
                    lines[-1].append(a)
            text = "\n".join(" ".join(ln) for ln in lines if ln) + "\n"
            self.files[path] = _normalize(text)
            return ["edited", path]
        raise CodefixError("unknown command %r" % (cmd,))


def _normalize(text: str) -> str:
    """Restore the four-space body indentation lost by atomization."""
    out = []
    for line in text.splitlines():
        if (line.startswith("import ") or line.startswith("def ")
                or line == "main()"):
            out.append(line)
        else:
            out.append("    " + line)
    return "\n".join(out) + "\n"


def agent_single_turn(files: dict[str, str], spec: CodebaseSpec,
                      n: int = 0, seed: int = 0) -> tuple[Trajectory, dict]:
    """One cat_all command, then the whole patch as output."""
    oracle = _FilesOracle(files)
    r = ScriptRunner(oracle, ["fix", "v10", "bug"], fmt="tagged")
    r.command("cat_all")
    patch = gold_patch(spec)
    for path in sorted(patch):
        r.emit("edit", path, NL)
        for atom in _atoms(patch[path]):
            r.emit(atom)
    r.emit(EOS)
    traj = Trajectory(task="codefix-single", n=n or spec.n, seed=seed,
                      input_tokens=["fix", "v10", "bug"],
                      events=r.machine.finalize(strict=True),
                      setting="single_turn", fmt="tagged")
    return traj, patch


def agent_interactive(files: dict[str, str], spec: CodebaseSpec, batch: int = 3,
                      n: int = 0, seed: int = 0) -> tuple[Trajectory, dict]:
    """Run, then fix up to `batch` files, run again, until the run is ok."""
    oracle = _FilesOracle(files)
    r = ScriptRunner(oracle, ["fix", "v10", "bug"], fmt="tagged")
    patch = gold_patch(spec)
    order = sorted(patch, key=lambda p: (p != "foo.py", p == "main.py", p))
    pending = list(order)
    applied: dict[str, str] = {}
    rounds = 0
    while True:
        obs = r.command("run")
        if obs[:1] == ["ok"]:
            break
        if not pending:
            raise LoopLimit("run still failing with nothing left to edit")
        rounds += 1
        if rounds > 2 * spec.n + 2:
            raise LoopLimit("too many fix rounds")
        for path in pending[:batch]:
            r.command("edit", path, NL, *_atoms(patch[path]))
            applied[path] = patch[path]
        pending = pending[batch:]
    r.emit("done")
    r.emit(EOS)
    traj = Trajectory(task="codefix-interactive", n=n or spec.n, seed=seed,
                      input_tokens=["fix", "v10", "bug"],
                      events=r.machine.finalize(strict=True),
                      setting="interactive", fmt="tagged")
    return traj, applied


# --------------------------------------------------------------------------
# Materialization

def write_codebase(spec: CodebaseSpec, out_dir: str):
    os.makedirs(out_dir, exist_ok=True)
    for path, text in spec.files().items():
        with open(os.path.join(out_dir, path), "w") as fh:
            fh.write(text)
    with open(os.path.join(out_dir, "manifest.json"), "w") as fh:
        json.dump(spec.manifest(), fh, indent=1)


def read_codebase(path: str) -> dict[str, str]:
    files = {}
    for name in sorted(os.listdir(path)):
        if name.endswith(".py"):
            with open(os.path.join(path, name)) as fh:
                files[name] = fh.read()
    return files
