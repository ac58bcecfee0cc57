"""Turing machine execution and interactive trace compilation.

``compile_trace`` turns (machine, input) into the tagged tool-use trajectory
whose commands drive the tape oracle: each machine step contributes a
state-encoding thought, a read command with its observation, a write command
and a move command; after halting, the tape content from position 1 is
emitted token by token until the read returns [EOS].

Hot paths (the step simulator and the trajectory renderer) operate on
integer-coded symbols. The simulator is JIT-compiled with numba when
available; set ``TOOLTRACE_NUMBA=0`` to force the pure-Python fallback.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field

import numpy as np

from .oracles import TapeOracle
from .protocol import (
    BLANK, EOS, STATE_CLOSE, STATE_OPEN, THINK_CLOSE, THINK_OPEN,
    ScriptRunner, Trajectory,
)

# --------------------------------------------------------------------------
# Optional numba acceleration

def _numba_enabled() -> bool:
    return os.environ.get("TOOLTRACE_NUMBA", "1") != "0"


def _identity_jit(fn):
    return fn


_NJIT = None


def _get_njit():
    global _NJIT
    if _NJIT is None:
        if _numba_enabled():
            try:
                from numba import njit
                _NJIT = njit(cache=False)
            except ImportError:
                _NJIT = _identity_jit
        else:
            _NJIT = _identity_jit
    return _NJIT


class TMError(Exception):
    pass


class UndefinedTransition(TMError):
    pass


class TMStepLimitExceeded(TMError):
    pass


class UnknownState(TMError):
    pass


MOVE_LEFT = "move_left"
MOVE_RIGHT = "move_right"


@dataclass
class TMSpec:
    """Single-tape machine halting with its head at position 0."""

    name: str
    states: list[str]
    start: str
    halt: set[str]
    rules: dict[tuple[str, str], tuple[str, str, str]]
    blank: str = BLANK

    def __post_init__(self):
        self.halt = set(self.halt)
        for (q, _s), (q2, _s2, d) in self.rules.items():
            if q not in self.states or q2 not in self.states:
                raise ValueError("rule references unknown state")
            if d not in ("L", "R"):
                raise ValueError("bad direction %r" % d)

    @property
    def code_width(self) -> int:
        return max(1, (len(self.states) - 1).bit_length())

    def state_code(self, q: str) -> str:
        if q not in self.states:
            raise UnknownState(q)
        return format(self.states.index(q), "0%db" % self.code_width)

    def decode_state(self, code: str) -> str:
        idx = int(code, 2)
        if idx >= len(self.states):
            raise UnknownState(code)
        return self.states[idx]

    def alphabet(self) -> list[str]:
        syms = []
        for (_q, s), (_q2, s2, _d) in self.rules.items():
            for x in (s, s2):
                if x != EOS and x not in syms:
                    syms.append(x)
        return syms

    def to_json(self) -> dict:
        return {
            "name": self.name,
            "states": self.states,
            "start": self.start,
            "halt": sorted(self.halt),
            "blank": self.blank,
            "rules": [[[q, s], [q2, s2, d]]
                      for (q, s), (q2, s2, d) in sorted(self.rules.items())],
        }

    @classmethod
    def from_json(cls, obj: dict) -> "TMSpec":
        rules = {(q, s): (q2, s2, d) for (q, s), (q2, s2, d) in obj["rules"]}
        return cls(obj["name"], obj["states"], obj["start"],
                   set(obj["halt"]), rules, obj.get("blank", BLANK))


def load_machine(path: str) -> TMSpec:
    with open(path) as fh:
        return TMSpec.from_json(json.load(fh))


def save_machine(tm: TMSpec, path: str):
    with open(path, "w") as fh:
        json.dump(tm.to_json(), fh, indent=1)


def enc_state(tm: TMSpec, q: str) -> list[str]:
    """[STATE]-wrapped fixed-width binary state code."""
    return [STATE_OPEN, *tm.state_code(q), STATE_CLOSE]


# --------------------------------------------------------------------------
# Integer coding of a machine

@dataclass
class TMInts:
    """Dense transition arrays over integer state and symbol ids."""

    tm: TMSpec
    syms: list[str] = field(default_factory=list)
    sym_id: dict[str, int] = field(default_factory=dict)
    eos_id: int = -1
    blank_id: int = -1
    next_s: np.ndarray = None
    write_s: np.ndarray = None
    dir_s: np.ndarray = None
    defined: np.ndarray = None
    halt_mask: np.ndarray = None

    @classmethod
    def build(cls, tm: TMSpec) -> "TMInts":
        ints = cls(tm)
        ints.syms = tm.alphabet() + [EOS]
        if tm.blank not in ints.syms:
            ints.syms.insert(0, tm.blank)
        ints.sym_id = {s: i for i, s in enumerate(ints.syms)}
        ints.eos_id = ints.sym_id[EOS]
        ints.blank_id = ints.sym_id[tm.blank]
        nq, ns = len(tm.states), len(ints.syms)
        ints.next_s = np.zeros((nq, ns), dtype=np.int64)
        ints.write_s = np.zeros((nq, ns), dtype=np.int64)
        ints.dir_s = np.zeros((nq, ns), dtype=np.int64)
        ints.defined = np.zeros((nq, ns), dtype=np.bool_)
        ints.halt_mask = np.zeros(nq, dtype=np.bool_)
        qid = {q: i for i, q in enumerate(tm.states)}
        for q in tm.halt:
            ints.halt_mask[qid[q]] = True
        for (q, s), (q2, s2, d) in tm.rules.items():
            i, j = qid[q], ints.sym_id[s]
            ints.next_s[i, j] = qid[q2]
            ints.write_s[i, j] = ints.sym_id[s2]
            ints.dir_s[i, j] = 0 if d == "L" else 1
            ints.defined[i, j] = True
        return ints

    def encode_input(self, x: list[str]) -> np.ndarray:
        return np.array([self.sym_id[t] for t in x], dtype=np.int64)


def _sim_tm_py(next_s, write_s, dir_s, defined, halt_mask, q0, tape, tape_len,
               eos_id, max_steps, qs, reads, writes, dirs):
    """Run to halt, recording per-step (state, read, write, direction).

    Returns (status, steps, head, tape_len); status is the halting state id,
    or -2 (step limit), -3 (undefined transition), -4 (head underflow).
    """
    head = 0
    q = q0
    t = 0
    while not halt_mask[q]:
        if t >= max_steps:
            return -2, t, head, tape_len
        sym = tape[head] if head < tape_len else eos_id
        if not defined[q, sym]:
            return -3, t, head, tape_len
        qs[t] = q
        reads[t] = sym
        w = write_s[q, sym]
        writes[t] = w
        d = dir_s[q, sym]
        dirs[t] = d
        if head == tape_len:
            tape[tape_len] = w
            tape_len += 1
        else:
            tape[head] = w
        if d == 0:
            if head == 0:
                return -4, t, head, tape_len
            head -= 1
        else:
            head += 1
        q = next_s[q, sym]
        t += 1
    return q, t, head, tape_len


_SIM_JIT = None


def _sim_fn(use_jit: bool | None = None):
    global _SIM_JIT
    if use_jit is None:
        use_jit = _numba_enabled()
    if not use_jit:
        return _sim_tm_py
    if _SIM_JIT is None:
        _SIM_JIT = _get_njit()(_sim_tm_py)
    return _SIM_JIT


@dataclass
class TMRun:
    """Everything observed while running a machine on one input."""

    output: list[str]
    pairs: set[tuple[str, str]]
    steps: int
    qs: np.ndarray
    reads: np.ndarray
    writes: np.ndarray
    dirs: np.ndarray
    final_tape: list[str]


def run_tm(tm: TMSpec, x: list[str], step_limit: int = 10_000_000,
           use_jit: bool | None = None, ints: TMInts | None = None) -> TMRun:
    """Simulate to halt; f(x) is the tape from position 1 to the first blank."""
    if ints is None:
        ints = TMInts.build(tm)
    sim = _sim_fn(use_jit)
    cap = max(64, 16 * len(x))
    while True:
        cap = min(cap, step_limit)
        tape = np.empty(len(x) + cap + 2, dtype=np.int64)
        tape[:len(x)] = ints.encode_input(x)
        qs = np.empty(cap + 1, dtype=np.int64)
        reads = np.empty(cap + 1, dtype=np.int64)
        writes = np.empty(cap + 1, dtype=np.int64)
        dirs = np.empty(cap + 1, dtype=np.int64)
        status, steps, head, tape_len = sim(
            ints.next_s, ints.write_s, ints.dir_s, ints.defined, ints.halt_mask,
            tm.states.index(tm.start), tape, len(x), ints.eos_id, cap,
            qs, reads, writes, dirs)
        if status == -2 and cap < step_limit:
            cap *= 4
            continue
        break
    if status == -2:
        raise TMStepLimitExceeded("no halt within %d steps" % step_limit)
    if status == -3:
        raise UndefinedTransition("undefined transition reached")
    if status == -4:
        raise TMError("head moved left of position 0")
    if head != 0:
        raise TMError("machine halted with head at %d, not 0" % head)
    final = [ints.syms[tape[i]] for i in range(tape_len)]
    out = []
    for tok in final[1:]:
        if tok == tm.blank:
            break
        out.append(tok)
    pair_ids = np.unique(qs[:steps] * len(ints.syms) + reads[:steps])
    nsym = len(ints.syms)
    pairs = {(tm.states[p // nsym], ints.syms[p % nsym]) for p in pair_ids}
    return TMRun(out, pairs, steps, qs[:steps], reads[:steps],
                 writes[:steps], dirs[:steps], final)


# --------------------------------------------------------------------------
# Trace compilation

def compile_trace(tm: TMSpec, x: list[str], step_limit: int = 10_000_000,
                  task: str = "", n: int = 0, seed: int = 0) -> Trajectory:
    """Compile the interactive tape-oracle trajectory for (tm, x)."""
    runner = ScriptRunner(TapeOracle(), x, fmt="tagged")
    q = tm.start
    steps = 0
    if q not in tm.halt:
        runner.emit(THINK_OPEN, *enc_state(tm, q), THINK_CLOSE)
        sigma = runner.command("read")[0]
        while True:
            steps += 1
            if steps > step_limit:
                raise TMStepLimitExceeded("no halt within %d steps" % step_limit)
            key = (q, sigma)
            if key not in tm.rules:
                raise UndefinedTransition("%s reading %r" % (q, sigma))
            q2, s2, d = tm.rules[key]
            runner.command("write", s2)
            runner.command(MOVE_LEFT if d == "L" else MOVE_RIGHT)
            if q2 in tm.halt:
                break
            q = q2
            runner.emit(THINK_OPEN, *enc_state(tm, q), THINK_CLOSE)
            sigma = runner.command("read")[0]
    while True:
        runner.command(MOVE_RIGHT)
        sigma = runner.command("read")[0]
        if sigma == EOS or sigma == tm.blank:
            break
        runner.emit(sigma)
    runner.emit(EOS)
    traj = Trajectory(
        task=task or ("tm-" + tm.name), n=n or len(x), seed=seed,
        input_tokens=list(x), events=runner.machine.finalize(strict=True),
        setting="interactive", fmt="tagged",
    )
    return traj


# --------------------------------------------------------------------------
# Built-in machines with independent oracles

def unary_increment() -> TMSpec:
    """1^n -> 1^(n+1)."""
    r = {
        ("q0", "1"): ("qscan", "S", "R"),
        ("qscan", "1"): ("qscan", "1", "R"),
        ("qscan", EOS): ("qapp", "1", "R"),
        ("qapp", EOS): ("qret", "1", "L"),
        ("qret", "1"): ("qret", "1", "L"),
        ("qret", "S"): ("qback", "S", "R"),
        ("qback", "1"): ("qH", "1", "L"),
    }
    return TMSpec("unary_increment",
                  ["q0", "qscan", "qapp", "qret", "qback", "qH"],
                  "q0", {"qH"}, r)


def binary_successor() -> TMSpec:
    """Bit string (MSB first) -> its integer successor."""
    r = {
        ("q0", "0"): ("c0", "S", "R"),
        ("q0", "1"): ("c1", "S", "R"),
        ("c0", "0"): ("c0", "0", "R"),
        ("c0", "1"): ("c1", "0", "R"),
        ("c0", EOS): ("qnoop", "0", "L"),
        ("c1", "0"): ("c0", "1", "R"),
        ("c1", "1"): ("c1", "1", "R"),
        ("c1", EOS): ("qnoop", "1", "L"),
        ("qnoop", "0"): ("qflip", "0", "R"),
        ("qnoop", "1"): ("qflip", "1", "R"),
        ("qnoop", "S"): ("qflip", "S", "R"),
        ("qflip", "1"): ("qflip", "0", "L"),
        ("qflip", "0"): ("qret", "1", "L"),
        ("qflip", "S"): ("qins", "S", "R"),
        ("qret", "0"): ("qret", "0", "L"),
        ("qret", "1"): ("qret", "1", "L"),
        ("qret", "S"): ("qback", "S", "R"),
        ("qback", "0"): ("qH", "0", "L"),
        ("qback", "1"): ("qH", "1", "L"),
        ("qins", "0"): ("qzr", "1", "R"),
        ("qzr", "0"): ("qzr", "0", "R"),
        ("qzr", EOS): ("qfin", "0", "L"),
        ("qfin", "0"): ("qfin", "0", "L"),
        ("qfin", "1"): ("qfin", "1", "L"),
        ("qfin", "S"): ("qback", "S", "R"),
    }
    states = ["q0", "c0", "c1", "qnoop", "qflip", "qret", "qback",
              "qins", "qzr", "qfin", "qH"]
    return TMSpec("binary_successor", states, "q0", {"qH"}, r)


def bit_reversal() -> TMSpec:
    """Bit string -> the same bits in reverse order (in-place swaps)."""
    r = {
        ("r0", "0"): ("s0", "S", "R"),
        ("r0", "1"): ("s1", "S", "R"),
        ("snoopL", "S"): ("qfindL", "S", "R"),
        ("qfindL", "0m"): ("qfindL", "0m", "R"),
        ("qfindL", "1m"): ("qfindL", "1m", "R"),
        ("qfindL", "0"): ("carR0", "0", "R"),
        ("qfindL", "1"): ("carR1", "1", "R"),
        ("qfindL", BLANK): ("quM", BLANK, "L"),
        ("qfindL", EOS): ("quM", BLANK, "L"),
        ("quM", "0m"): ("quM", "0", "L"),
        ("quM", "1m"): ("quM", "1", "L"),
        ("quM", "S"): ("qbk", "S", "R"),
        ("qbk", "0"): ("qH", "0", "L"),
        ("qbk", "1"): ("qH", "1", "L"),
    }
    for b in "01":
        r[("s%s" % b, "0")] = ("s0", b, "R")
        r[("s%s" % b, "1")] = ("s1", b, "R")
        r[("s%s" % b, EOS)] = ("snoopL", b, "L")
        r[("snoopL", b)] = ("snoopL", b, "L")
        r[("carR%s" % b, "0")] = ("carR%s" % b, "0", "R")
        r[("carR%s" % b, "1")] = ("carR%s" % b, "1", "R")
        for m in ("0m", "1m"):
            r[("carR%s" % b, m)] = ("qb1_%s" % b, m, "L")
        r[("carR%s" % b, BLANK)] = ("qb1_%s" % b, BLANK, "L")
        r[("carR%s" % b, EOS)] = ("qb1_%s" % b, BLANK, "L")
        r[("qb1_%s" % b, "0")] = ("carL0", "%sm" % b, "L")
        r[("qb1_%s" % b, "1")] = ("carL1", "%sm" % b, "L")
        r[("carL%s" % b, "0")] = ("carL%s" % b, "0", "L")
        r[("carL%s" % b, "1")] = ("carL%s" % b, "1", "L")
        for m in ("0m", "1m"):
            r[("carL%s" % b, m)] = ("qb2_%s" % b, m, "R")
        r[("carL%s" % b, "S")] = ("qb2_%s" % b, "S", "R")
        r[("qb2_%s" % b, "0")] = ("qfindL", "%sm" % b, "R")
        r[("qb2_%s" % b, "1")] = ("qfindL", "%sm" % b, "R")
        for m in ("0m", "1m"):
            r[("qb2_%s" % b, m)] = ("qfindL", m, "R")
    states = ["r0", "s0", "s1", "snoopL", "qfindL", "carR0", "carR1",
              "qb1_0", "qb1_1", "carL0", "carL1", "qb2_0", "qb2_1",
              "quM", "qbk", "qH"]
    return TMSpec("bit_reversal", states, "r0", {"qH"}, r)


def trivial_halt() -> TMSpec:
    """Halts immediately; f(x) = x without its first token."""
    return TMSpec("trivial_halt", ["qH"], "qH", {"qH"}, {})


def _unary_oracle(x: list[str]) -> list[str]:
    return ["1"] * (len(x) + 1)


def _successor_oracle(x: list[str]) -> list[str]:
    bits = "".join(x)
    val = int(bits, 2) + 1
    out = format(val, "b")
    if len(out) < len(bits):
        out = out.zfill(len(bits))
    return list(out)


def _reversal_oracle(x: list[str]) -> list[str]:
    return list(reversed(x))


def _sample_unary(n: int, rng) -> list[str]:
    return ["1"] * n


def _sample_bits(n: int, rng) -> list[str]:
    return [rng.choice("01") for _ in range(n)]


BUILTIN_MACHINES = {
    "unary_increment": (unary_increment, _unary_oracle, _sample_unary),
    "binary_successor": (binary_successor, _successor_oracle, _sample_bits),
    "bit_reversal": (bit_reversal, _reversal_oracle, _sample_bits),
}
