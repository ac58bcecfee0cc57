"""Long multiplication of an n-digit by a 1- or 2-digit number, two cursors.

Phases follow the long-multiplication algorithm: per-digit products with
carries are written in reverse as (digit, carry) thought pairs, rows
separated by '+' with shift-zero pairs; the rows are then re-added by
walking them rightward in lock step (skipping carry cells with a blind
move); after [ANS] the first cursor seeks [ANS] and walks left emitting sum
digits and skipping carries until the '=' scratch delimiter.

Walks that would otherwise look alike to a finite-context learner use
distinct read patterns (the rewind to the first operand and the seek to
[ANS] read each token twice).
"""

from __future__ import annotations

import random

from ..oracles import CursorMemory
from ..protocol import ANS, EOS, ScriptRunner, Trajectory
from ..seeding import rng_for
from .base import TaskInstance, TaskSpec, default_check, register
from .addition import random_number

DIGITS = set("0123456789")


def make_instance(task: str, x1: int, x2: int, n: int = 0, seed: int = 0) -> TaskInstance:
    tokens = list(str(x1)) + ["×"] + list(str(x2)) + ["="]
    return TaskInstance(task, n or len(str(x1)), seed, tokens,
                        list(str(x1 * x2)), {"x1": x1, "x2": x2})


def _sample(task: str, k: int, n_max: int, rng: random.Random) -> TaskInstance:
    n1 = rng.randint(1, n_max)
    return make_instance(task, random_number(n1, rng), random_number(k, rng), n_max)


def sample_mul1(n_max: int, rng: random.Random) -> TaskInstance:
    return _sample("mul1", 1, n_max, rng)


def sample_mul2(n_max: int, rng: random.Random) -> TaskInstance:
    return _sample("mul2", 2, n_max, rng)


def build_multiplication_trajectory(inst: TaskInstance) -> Trajectory:
    r = ScriptRunner(CursorMemory(cursors=2), inst.input_tokens, fmt="pointer")
    # seek cursor 1 to the multiplication sign, cursor 2 to '='
    obs = r.read(1)
    while obs != "×":
        r.move(1, "right")
        obs = r.read(1)
    obs = r.read(2)
    while obs != "=":
        r.move(2, "right")
        obs = r.read(2)
    # per-digit product rows, multiplier digits right to left
    first_row = True
    while True:
        r.move(2, "left")
        o = r.read(2)
        if o == "×":
            break
        if not first_row:
            r.emit("+", "0", "0")
        first_row = False
        carry = 0
        while True:
            r.move(1, "left")
            o1 = r.read(1)
            if o1 not in DIGITS:
                if carry:
                    r.emit(str(carry), "0")
                break
            d2 = int(r.read(2))  # multiplier digit re-read under cursor 2
            s = int(o1) * d2 + carry
            r.emit(str(s % 10), str(s // 10))
            carry = s // 10
        # rewind cursor 1 to the sign (double reads: distinct walk pattern)
        while True:
            r.move(1, "right")
            o1 = r.read(1)
            o1 = r.read(1)
            if o1 == "×":
                break
    # row addition: '=' delimits the rows from the sum scratch
    r.emit("=")
    obs = None
    while obs != "=":
        r.move(1, "right")
        obs = r.read(1)
    two_rows = len(str(inst.meta["x2"])) == 2
    if two_rows:
        obs = None
        while obs != "+":
            r.move(2, "right")
            obs = r.read(2)
            obs = r.read(2)
    p1_active = True
    p2_active = two_rows
    carry = 0
    while True:
        read_any = False
        tot = carry
        if p1_active:
            r.move(1, "right")
            o = r.read(1)
            if o in DIGITS:
                tot += int(o)
                r.move(1, "right")  # skip the carry cell
                read_any = True
            else:
                p1_active = False
        if p2_active:
            r.move(2, "right")
            o = r.read(2)
            if o in DIGITS:
                tot += int(o)
                r.move(2, "right")
                read_any = True
            else:
                p2_active = False
        if not read_any:
            if carry:
                r.emit(str(carry), "0")
            r.emit(ANS)
            break
        r.emit(str(tot % 10), str(tot // 10))
        carry = tot // 10
    # final emission: seek [ANS] (double reads), walk left skipping carries
    obs = None
    while obs != ANS:
        r.move(1, "right")
        obs = r.read(1)
        obs = r.read(1)
    while True:
        r.move(1, "left")
        o = r.read(1)
        if o == "=":
            break
        r.move(1, "left")
        o = r.read(1)
        r.emit(o)
    r.emit(EOS)
    return Trajectory(task=inst.task, n=inst.n, seed=inst.seed,
                      input_tokens=inst.input_tokens,
                      events=r.machine.finalize(strict=True),
                      setting="interactive", fmt="pointer")


def _carry_suffixes(d2: int) -> dict[int, list[int]]:
    """For multiplier digit d2: digit suffixes realizing each reachable carry."""
    suffixes: dict[int, list[int]] = {0: [0]}
    frontier = [0]
    while frontier:
        nxt = []
        for c in frontier:
            for d in range(10):
                c2 = (d * d2 + c) // 10
                if c2 not in suffixes:
                    suffixes[c2] = [d] + suffixes[c]
                    nxt.append(c2)
        frontier = nxt
    return suffixes


def _training_instances(task: str, k: int, n_max: int, samples: int,
                        seed: int) -> list[TaskInstance]:
    """Exhaustive small operands plus crafted mid-number step coverage."""
    out = []
    x2s = list(range(1, 10)) if k == 1 else list(range(10, 100))
    for x1 in range(1, 100):
        for x2 in x2s:
            out.append(make_instance(task, x1, x2))
    # product rows: for each multiplier digit, realize every reachable
    # (carry-in, operand digit, previous sum/carry) product step; the
    # multiplier digit must appear in both rows for the 2-digit task
    if k == 1:
        probes = x2s
    else:
        probes = sorted({10 + t for t in range(10)} | {t * 10 + 1 for t in range(1, 10)})
    for x2 in probes:
        for d2 in {x2 % 10, x2 // 10} if k == 2 else {x2}:
            sufs = _carry_suffixes(d2)
            for c_in, suf in sufs.items():
                for d in range(10):
                    for d_next in (0, 3, 9):
                        digits = [1, d_next, d] + suf
                        x1 = int("".join(map(str, digits)))
                        if len(digits) <= n_max:
                            out.append(make_instance(task, x1, x2))
    # row addition: multipliers made of ones turn the rows into copies of
    # the first operand, so consecutive digit triples cover the lockstep
    # re-addition windows
    adds = (11, 19, 91) if k == 2 else (1,)
    for p in range(10):
        for q in range(10):
            for r in range(10):
                x1 = 1000 + p * 100 + q * 10 + r
                for x2 in adds:
                    out.append(make_instance(task, x1, x2))
    rng = rng_for(seed, 0x3D01 + k)
    for _ in range(samples):
        out.append(_sample(task, k, n_max, rng))
    return out


register(TaskSpec(
    name="mul1",
    fmt="pointer",
    sample=sample_mul1,
    build=build_multiplication_trajectory,
    make_oracle=lambda: CursorMemory(cursors=2),
    training_instances=lambda n_max=10, samples=1500, seed=0:
        _training_instances("mul1", 1, n_max, samples, seed),
    check_answer=default_check,
    default_train_n=10,
))

register(TaskSpec(
    name="mul2",
    fmt="pointer",
    sample=sample_mul2,
    build=build_multiplication_trajectory,
    make_oracle=lambda: CursorMemory(cursors=2),
    training_instances=lambda n_max=10, samples=1500, seed=0:
        _training_instances("mul2", 2, n_max, samples, seed),
    check_answer=default_check,
    default_train_n=10,
))
