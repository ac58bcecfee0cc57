"""Multi-digit addition with the two-cursor memory tool.

The reference trajectory mimics long addition: both cursors first seek the
least significant digits (stopping on '+' and '='), then a right-to-left
digit loop emits the running sum and carry as two-token thoughts, and after
[ANS] the second cursor seeks the [ANS] token and walks back left emitting
the answer digits (skipping the interleaved carry digits) until it reads '='.

Every decision depends only on tokens within a fixed window of the visible
stream, which is what lets a finite-context learner reproduce the algorithm
at any length. The forward seek to [ANS] reads each token twice so its
steady-state pattern cannot be confused with the initial seek walk.
"""

from __future__ import annotations

import random

from ..oracles import CursorMemory
from ..protocol import ANS, EOS, ScriptRunner, Trajectory, pointer_cmd
from ..seeding import rng_for
from .base import TaskInstance, TaskSpec, default_check, register

TASK = "add"
DIGITS = set("0123456789")


def random_number(n_digits: int, rng: random.Random) -> int:
    if n_digits == 1:
        return rng.randint(1, 9)
    lo = 10 ** (n_digits - 1)
    return rng.randint(lo, 10 * lo - 1)


def make_instance(x1: int, x2: int, n: int = 0, seed: int = 0) -> TaskInstance:
    tokens = list(str(x1)) + ["+"] + list(str(x2)) + ["="]
    return TaskInstance(TASK, n or max(len(str(x1)), len(str(x2))), seed,
                        tokens, list(str(x1 + x2)), {"x1": x1, "x2": x2})


def sample_addition(n_max: int, rng: random.Random) -> TaskInstance:
    n1 = rng.randint(1, n_max)
    n2 = rng.randint(1, n_max)
    return make_instance(random_number(n1, rng), random_number(n2, rng), n_max)


def build_addition_trajectory(inst: TaskInstance) -> Trajectory:
    r = ScriptRunner(CursorMemory(cursors=2), inst.input_tokens, fmt="pointer")
    # seek: cursor 1 to the token after which x1's digits end, cursor 2 to '='
    obs = r.read(1)
    while obs != "+":
        r.move(1, "right")
        obs = r.read(1)
    obs = r.read(2)
    while obs != "=":
        r.move(2, "right")
        obs = r.read(2)
    # digit loop, least significant first
    carry = 0
    p1_active = True
    p2_active = True
    while True:
        d1 = d2 = 0
        if p1_active:
            r.move(1, "left")
            o = r.read(1)
            if o in DIGITS:
                d1 = int(o)
            else:
                p1_active = False
        if p2_active:
            r.move(2, "left")
            o = r.read(2)
            if o in DIGITS:
                d2 = int(o)
            else:
                p2_active = False
        if not p1_active and not p2_active:
            if carry:
                r.emit("1", "0")
            r.emit(ANS)
            break
        s = d1 + d2 + carry
        r.emit(str(s % 10), str(s // 10))
        carry = s // 10
    # emission: seek [ANS] rightward (double reads), then walk left skipping
    # carry digits and emitting sum digits until '='
    obs = None
    while obs != ANS:
        r.move(2, "right")
        obs = r.read(2)
        obs = r.read(2)
    while True:
        r.move(2, "left")
        o = r.read(2)  # carry slot, or the '=' boundary
        if o == "=":
            break
        r.move(2, "left")
        o = r.read(2)  # sum digit
        r.emit(o)
    r.emit(EOS)
    return Trajectory(task=TASK, n=inst.n, seed=inst.seed,
                      input_tokens=inst.input_tokens,
                      events=r.machine.finalize(strict=True),
                      setting="interactive", fmt="pointer")


def training_instances(n_max: int = 5, samples: int = 2000,
                       seed: int = 0) -> list[TaskInstance]:
    """Coverage-complete training set for digit lengths up to n_max.

    Exhaustive one- and two-digit pairs, plus crafted three-digit pairs that
    realize every (previous sum digit, previous carry, digit, digit)
    mid-number step, plus random pairs with mixed lengths.
    """
    out = []
    for x1 in range(1, 100):
        for x2 in range(1, 100):
            out.append(make_instance(x1, x2))
    # crafted mid-number steps: every (units digit pair) x (tens digit pair),
    # so suffix contexts joining the previous observation, the running sum
    # and carry, and the next digits are all realized
    for a1 in range(10):
        for b1 in range(10):
            for d1 in range(10):
                for d2 in range(10):
                    out.append(make_instance(100 + d1 * 10 + a1,
                                             100 + d2 * 10 + b1))
    # crafted one-sided runs: after the short operand is exhausted the loop
    # walks a single operand, whose step contexts chain differently
    for da in range(10):
        for db in range(10):
            for a1 in range(10):
                for b1 in range(10):
                    out.append(make_instance(1000 + da * 100 + db * 10 + a1, b1))
                    out.append(make_instance(a1 if a1 else 1,
                                             1000 + da * 100 + db * 10 + b1))
    # deep one-sided chains: steps whose whole context window lies inside the
    # long operand, for every (previous digit, carry, digit) and for the
    # end-of-operand boundary
    for d_hi in range(1, 10):
        for d_prev in range(10):
            for c_in in range(2):
                u, a1, b1 = (9, 9, 1) if c_in else (0, 0, 0)
                for d in range(10):
                    x = int("1%d%d%d%d" % (d, d_prev, u, a1))
                    out.append(make_instance(x, b1))
                    y = int("1%d%d%d%d" % (d, d_prev, u, b1))
                    out.append(make_instance(a1 if a1 else 1, y))
                x = int("%d%d%d%d" % (d_hi, d_prev, u, a1))
                out.append(make_instance(x, b1))
                y = int("%d%d%d%d" % (d_hi, d_prev, u, b1))
                out.append(make_instance(a1 if a1 else 1, y))
    # two-sided mid-number steps whose carry-in is itself produced mid-number
    # (some running sum/carry pairs are unreachable at the units position)
    for p in range(10):
        for q in range(10):
            for c0 in range(2):
                a1, b1 = (9, 1) if c0 else (0, 0)
                for d1 in range(10):
                    out.append(make_instance(1000 + d1 * 100 + p * 10 + a1,
                                             1700 + q * 10 + b1))
    rng = rng_for(seed, 0xADD)
    for _ in range(samples):
        out.append(sample_addition(n_max, rng))
    return out


register(TaskSpec(
    name=TASK,
    fmt="pointer",
    sample=sample_addition,
    build=build_addition_trajectory,
    make_oracle=lambda: CursorMemory(cursors=2),
    training_instances=training_instances,
    check_answer=default_check,
    default_train_n=5,
))
