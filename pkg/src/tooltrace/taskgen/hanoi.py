"""Tower of Hanoi with cursor memory: iterative and recursive builders.

The iterative trajectory alternates between emitting a move "( s ) X Y $"
and re-emitting the full rod state via a cursor copy. States list each rod
top-first ("A : ( 2 ) ( 7 ) B : ... #"), and the terminator alternates
between '#' and '% #' so the move parity is always visible locally. The
second cursor stays parked on the latest move text; short parked-cursor
dances re-derive the move whenever a decision needs it, which keeps every
emitted token a function of a bounded window of the visible stream:

* odd moves (the smallest disk) are derived by walking back to the
  previous smallest move and cycling its rods;
* even moves compare the top disks of the two rods not holding the
  smallest one, reading both tops in lockstep (lengths first, then digits);
* each state copy skips the moved disk on its source rod and re-emits it
  on top of its destination.

The recursive trajectory emits move lists for sizes 1..n separated by '#',
each built by copying the previous list with rod letters swapped (B/C,
then B/A around the middle move); the second copy reads every token twice
so the two copy passes cannot be confused. The answer is the final block.
"""

from __future__ import annotations

import itertools
import random

from ..oracles import CursorMemory
from ..protocol import ANS, EOS, ScriptRunner, Trajectory
from ..seeding import rng_for
from .base import TaskInstance, TaskSpec, register

RODS = ("A", "B", "C")
DIGITS = set("0123456789")


# --------------------------------------------------------------------------
# Ground truth

def hanoi_moves(sizes_desc: list[int]) -> list[tuple[int, str, str]]:
    """Optimal move list (size, from, to) for disks stacked on A."""
    out = []

    def rec(k, src, dst, via):
        if k == 0:
            return
        rec(k - 1, src, via, dst)
        out.append((sizes_desc[len(sizes_desc) - k], src, dst))
        rec(k - 1, via, dst, src)

    rec(len(sizes_desc), "A", "C", "B")
    return out


def apply_moves(sizes_desc: list[int], moves) -> dict | None:
    """Simulate; None if any move is illegal."""
    rods = {"A": list(sizes_desc), "B": [], "C": []}
    for size, src, dst in moves:
        if src not in rods or dst not in rods or src == dst:
            return None
        if not rods[src] or rods[src][-1] != size:
            return None
        if rods[dst] and rods[dst][-1] < size:
            return None
        rods[dst].append(rods[src].pop())
    return rods


def parse_moves(tokens: list[str]) -> list[tuple[int, str, str]] | None:
    """Extract '( digits ) X Y $' move groups from an output stream."""
    moves = []
    for i, tok in enumerate(tokens):
        if tok != "$":
            continue
        j = i - 1
        if j < 1 or tokens[j] not in RODS or tokens[j - 1] not in RODS:
            return None
        dst, src = tokens[j], tokens[j - 1]
        j -= 2
        if j < 0 or tokens[j] != ")":
            return None
        j -= 1
        ds = []
        while j >= 0 and tokens[j] in DIGITS:
            ds.append(tokens[j])
            j -= 1
        if j < 0 or tokens[j] != "(" or not ds:
            return None
        moves.append((int("".join(reversed(ds))), src, dst))
    return moves


def check_hanoi(inst: TaskInstance, output_tokens: list[str]) -> bool:
    """Success: every emitted move legal and the pile ends on rod C."""
    tokens = output_tokens
    if inst.task == "hanoi-rec":
        blocks, cur = [], []
        for t in tokens:
            if t == "#":
                blocks.append(cur)
                cur = []
            else:
                cur.append(t)
        if not blocks:
            return False
        tokens = blocks[-1]
    moves = parse_moves(tokens)
    if moves is None:
        return False
    sizes = inst.meta["disks"]
    rods = apply_moves(sizes, moves)
    return (rods is not None and not rods["A"] and not rods["B"]
            and rods["C"] == list(sizes))


def make_instance(sizes_desc: list[int], seed: int = 0) -> TaskInstance:
    tokens = []
    for s in sizes_desc:
        tokens.extend(["(", *str(s), ")"])
    answer = []
    for size, src, dst in hanoi_moves(sizes_desc):
        answer.extend(["(", *str(size), ")", src, dst, "$"])
    return TaskInstance("hanoi-iter", len(sizes_desc), seed, tokens, answer,
                        {"disks": list(sizes_desc)})


def sample_hanoi(n: int, rng: random.Random) -> TaskInstance:
    sizes = sorted(rng.sample(range(1, 101), n), reverse=True)
    return make_instance(sizes)


def third(a: str, b: str) -> str:
    return ({"A", "B", "C"} - {a, b}).pop()


# --------------------------------------------------------------------------
# Iterative builder

def build_hanoi_iterative(inst: TaskInstance) -> Trajectory:
    sizes = inst.meta["disks"]
    ref = hanoi_moves(sizes)
    r = ScriptRunner(CursorMemory(cursors=2), inst.input_tokens, fmt="pointer")
    rods = {"A": list(sizes), "B": [], "C": []}

    # -- parity walk: one alternating letter per disk, C first
    letter = None
    o = r.read(1)
    while o not in ("B", "C"):
        if o == ")":
            letter = "B" if letter == "C" else "C"
            r.emit(letter)
        r.move(1, "right")
        o = r.read(1)
    r.emit(ANS)

    # -- initial state: walk the input backwards, emitting disks top-first
    r.emit("A", ":")
    while True:
        r.move(1, "left")
        o = r.read(1)
        if o == EOS:
            break
        ds = []
        while True:
            r.move(1, "left")
            o = r.read(1)
            if o == "(":
                break
            ds.append(o)
        r.emit("(", *reversed(ds), ")")
    r.emit("B", ":", "C", ":", "#")

    # -- p2 dances around the parked move text (p2 rests on its '$')
    def dance_letters():
        r.move(2, "left")
        y = r.read(2)
        r.move(2, "left")
        x = r.read(2)
        r.move(2, "right")
        r.move(2, "right")
        return x, y

    def dance_digits():
        r.move(2, "left")
        r.read(2)  # Y
        r.move(2, "left")
        r.read(2)  # X
        r.move(2, "left")
        r.read(2)  # ')'
        ds = []
        while True:
            r.move(2, "left")
            o = r.read(2)
            if o == "(":
                break
            ds.append(o)
        while True:
            r.move(2, "right")
            if r.read(2) == "$":
                break
        return list(reversed(ds))

    def park_p2():
        # double reads to the frontier, then one step back onto '$'
        while True:
            r.move(2, "right")
            r.read(2)
            if r.read(2) == EOS:
                break
        r.move(2, "left")

    def note_move(size: int, src: str, dst: str, t: int):
        assert ref[t - 1] == (size, src, dst), (t, ref[t - 1], (size, src, dst))
        rods[dst].append(rods[src].pop())

    # -- move 1: smallest disk (top of A in the fresh state); destination
    # is the last parity letter
    o = None
    while o != ANS:
        r.move(1, "right")
        o = r.read(1)
    r.move(1, "right")
    r.read(1)  # 'A'
    r.move(1, "right")
    r.read(1)  # ':'
    r.move(1, "right")
    r.read(1)  # '('
    r.emit("(")
    ds = []
    while True:
        r.move(1, "right")
        o = r.read(1)
        if o == ")":
            break
        ds.append(o)
        r.emit(o)
    r.emit(")", "A")
    o = None
    while o != ANS:
        r.move(1, "left")
        o = r.read(1)
    r.move(1, "left")
    lam = r.read(1)
    r.emit(lam, "$")
    note_move(int("".join(ds)), "A", lam, 1)
    park_p2()
    r.move(1, "right")
    r.move(1, "right")  # back onto the state's 'A' label

    def copy_state():
        # p1 on the old state's 'A'; p2 parked on the newest move
        o = r.read(1)
        while True:
            if o in RODS:
                r.emit(o)
                r.move(1, "right")
                r.read(1)  # ':'
                r.emit(":")
                x, y = dance_letters()
                if o == y:
                    ds2 = dance_digits()
                    r.emit("(", *ds2, ")")
                if o == x:
                    r.move(1, "right")
                    r.read(1)  # '(' of the removed disk
                    while True:
                        r.move(1, "right")
                        if r.read(1) == ")":
                            break
                r.move(1, "right")
                o = r.read(1)
                continue
            if o == "(":
                r.emit("(")
                while True:
                    r.move(1, "right")
                    d = r.read(1)
                    if d == ")":
                        break
                    r.emit(d)
                r.emit(")")
                r.move(1, "right")
                o = r.read(1)
                continue
            if o == "%":
                r.emit("#")
                r.move(1, "right")
                r.read(1)  # '#'
                break
            r.emit("%", "#")  # o == '#'
            break

    def home_fwd():
        # p1 from the previous state's '#' to the next state's 'A' label
        prev = None
        while True:
            r.move(1, "right")
            o = r.read(1)
            r.read(1)
            if o == "A" and prev == "$":
                break
            prev = o

    def home_back():
        # p1 leftward onto the current state's 'A' label
        if r.read(1) == "A":
            return
        while True:
            r.move(1, "left")
            o = r.read(1)
            r.read(1)
            if o == "A":
                break

    def rewind_to_open(k: int):
        while True:
            r.move(k, "left")
            if r.read(k) == "(":
                break

    def pad(k: int):
        r.read(k)
        r.read(k)
        r.read(k)

    def dance_rod_letter(k: int) -> str:
        # double-read leftward to ':', then once more onto the rod label
        while True:
            r.move(k, "left")
            o = r.read(k)
            r.read(k)
            if o == ":":
                break
        r.move(k, "left")
        o = r.read(k)
        r.read(k)
        return o

    def emit_disk_from(k: int) -> int:
        # cursor k on '(': emit the disk, double-reading each token
        r.emit("(")
        ds2 = []
        while True:
            r.move(k, "right")
            o = r.read(k)
            r.read(k)
            if o == ")":
                break
            ds2.append(o)
            r.emit(o)
        r.emit(")")
        return int("".join(ds2))

    t = 1
    done = False
    while not done:
        copy_state()
        if t % 2 == 1:
            # even move next: compare the tops of the two rods that do not
            # hold the smallest disk
            home_fwd()
            _x, y = dance_letters()
            q = y
            r1, r2 = [rod for rod in RODS if rod != q]
            if r1 == "B":
                while True:
                    r.move(1, "right")
                    if r.read(1) == "B":
                        break
            r.move(1, "right")
            r.read(1)  # ':'
            r.move(1, "right")
            o1 = r.read(1)
            dance_letters()  # refresh the parked move before routing p2
            if r2 == "C":
                while True:
                    r.move(2, "right")
                    if r.read(2) == "C":
                        break
            else:
                while True:
                    r.move(2, "right")
                    o = r.read(2)
                    r.read(2)
                    r.read(2)
                    if o == "B":
                        break
            r.move(2, "right")
            r.read(2)  # ':'
            r.move(2, "right")
            o2 = r.read(2)
            o1 = r.read(1)
            if o1 != "(" and o2 != "(":
                assert not rods["A"] and not rods["B"]
                r.emit(EOS)
                done = True
                continue
            if o1 == "(" and o2 != "(":
                mover, src, dst = 1, r1, r2
            elif o1 != "(" and o2 == "(":
                mover, src, dst = 2, r2, r1
            else:
                pad(1)
                pad(2)
                a_done = b_done = False
                verdict = None
                while verdict is None and not (a_done and b_done):
                    if not a_done:
                        r.move(1, "right")
                        if r.read(1) == ")":
                            a_done = True
                    if not b_done:
                        r.move(2, "right")
                        if r.read(2) == ")":
                            b_done = True
                    if a_done != b_done:
                        verdict = 1 if a_done else 2
                if verdict is None:
                    rewind_to_open(1)
                    rewind_to_open(2)
                    while True:
                        r.move(1, "right")
                        oa = r.read(1)
                        r.read(1)
                        r.move(2, "right")
                        ob = r.read(2)
                        r.read(2)
                        if oa != ob:
                            verdict = 1 if oa < ob else 2
                            break
                mover = verdict
                src, dst = (r1, r2) if mover == 1 else (r2, r1)
            if r.read(mover) != "(":
                rewind_to_open(mover)
            size = emit_disk_from(mover)
            r.emit(dance_rod_letter(mover))
            r.emit(dance_rod_letter(1 if mover == 2 else 2))
            r.emit("$")
            note_move(size, src, dst, t + 1)
            home_back()
            park_p2()
        else:
            # odd move next: rederive the previous smallest move, the
            # nearest '$'-terminated text left of the parked even move
            while True:
                r.move(2, "left")
                if r.read(2) == "$":
                    break
            r.move(2, "left")
            y2 = r.read(2)
            r.move(2, "left")
            x2 = r.read(2)
            r.move(2, "left")
            r.read(2)  # ')'
            ds2 = []
            while True:
                r.move(2, "left")
                o = r.read(2)
                if o == "(":
                    break
                ds2.append(o)
            ds2.reverse()
            r.emit("(", *ds2, ")", y2, third(x2, y2), "$")
            note_move(int("".join(ds2)), y2, third(x2, y2), t + 1)
            home_fwd()
            park_p2()
        t += 1
    assert t == len(ref), (t, len(ref))
    return Trajectory(task="hanoi-iter", n=inst.n, seed=inst.seed,
                      input_tokens=inst.input_tokens,
                      events=r.machine.finalize(strict=True),
                      setting="interactive", fmt="pointer")


# --------------------------------------------------------------------------
# Recursive builder

SWAP_BC = {"B": "C", "C": "B"}
SWAP_BA = {"A": "B", "B": "A"}


def build_hanoi_recursive(inst: TaskInstance) -> Trajectory:
    r = ScriptRunner(CursorMemory(cursors=2), inst.input_tokens, fmt="pointer")
    # park p1 on the smallest (last) disk
    while True:
        r.move(1, "right")
        if r.read(1) == EOS:
            break
    while True:
        r.move(1, "left")
        if r.read(1) == "(":
            break
    r.emit(ANS)
    # size-1 block
    r.emit("(")
    while True:
        r.move(1, "right")
        o = r.read(1)
        if o == ")":
            break
        r.emit(o)
    r.emit(")", "A", "C", "$", "#")
    while True:
        r.move(1, "left")
        if r.read(1) == "(":
            break
    # p2 rests on the token preceding the newest block
    while True:
        r.move(2, "right")
        if r.read(2) == ANS:
            break
    while True:
        # advance p1 to the next-larger disk, or finish
        r.move(1, "left")
        if r.read(1) == EOS:
            r.emit(EOS)
            break
        while True:
            r.move(1, "left")
            if r.read(1) == "(":
                break
        # first half: previous block with B and C swapped
        while True:
            r.move(2, "right")
            o = r.read(2)
            if o == "#":
                break
            r.emit(SWAP_BC.get(o, o))
        # middle move: the disk under p1, A -> C
        r.emit("(")
        while True:
            r.move(1, "right")
            o = r.read(1)
            if o == ")":
                break
            r.emit(o)
        r.emit(")", "A", "C", "$")
        while True:
            r.move(1, "left")
            if r.read(1) == "(":
                break
        # second half: previous block again, B and A swapped, double reads
        while True:
            r.move(2, "left")
            o = r.read(2)
            if o == "#" or o == ANS:
                break
        while True:
            r.move(2, "right")
            o = r.read(2)
            o = r.read(2)
            if o == "#":
                break
            r.emit(SWAP_BA.get(o, o))
        r.emit("#")
    return Trajectory(task="hanoi-rec", n=inst.n, seed=inst.seed,
                      input_tokens=inst.input_tokens,
                      events=r.machine.finalize(strict=True),
                      setting="interactive", fmt="pointer")


def make_rec_instance(sizes_desc: list[int], seed: int = 0) -> TaskInstance:
    inst = make_instance(sizes_desc, seed)
    inst.task = "hanoi-rec"
    return inst


def sample_hanoi_rec(n: int, rng: random.Random) -> TaskInstance:
    inst = sample_hanoi(n, rng)
    inst.task = "hanoi-rec"
    return inst


# --------------------------------------------------------------------------
# Training sets

def _craft_shapes() -> list[list[int]]:
    shapes = []
    for s in range(1, 101):
        shapes.append([s])
    for s in range(2, 100):
        shapes.append([s + 1, s])
    # dense windows over single-digit disks
    for size in (2, 3, 4, 5):
        for combo in itertools.combinations(range(9, 0, -1), size):
            shapes.append(list(combo))
    # top-disk comparisons: quads (x+1, x, y, 1) realize the larger-first
    # pair (x, y) directly and smaller-first pairs against x+1; y sweeps
    # enough values per x to exercise every digit-window pattern
    for x in range(3, 100):
        ys = {2, 3, 9, 10, 11, 12, 98, 99, x // 2, x - 1, x - 2}
        for y in sorted(ys):
            if 2 <= y < x:
                shapes.append([x + 1, x, y, 1])
    for x in range(3, 36):
        for y in range(2, x):
            shapes.append([x + 1, x, y, 1])
    return shapes


def training_instances_iter(n_max: int = 8, samples: int = 250,
                            seed: int = 0) -> list[TaskInstance]:
    out = [make_instance(shape) for shape in _craft_shapes()]
    rng = rng_for(seed, 0x8A01)
    for _ in range(samples):
        n = min(1 + int(rng.expovariate(0.45)), n_max)
        out.append(sample_hanoi(n, rng))
    return out


def training_instances_rec(n_max: int = 8, samples: int = 250,
                           seed: int = 0) -> list[TaskInstance]:
    out = [make_rec_instance(shape) for shape in _craft_shapes()]
    rng = rng_for(seed, 0x8A02)
    for _ in range(samples):
        n = min(1 + int(rng.expovariate(0.45)), n_max)
        out.append(sample_hanoi_rec(n, rng))
    return out


register(TaskSpec(
    name="hanoi-iter",
    fmt="pointer",
    sample=sample_hanoi,
    build=build_hanoi_iterative,
    make_oracle=lambda: CursorMemory(cursors=2),
    training_instances=training_instances_iter,
    check_answer=check_hanoi,
    default_train_n=8,
    k_candidates=tuple(range(10, 49, 2)),
))

register(TaskSpec(
    name="hanoi-rec",
    fmt="pointer",
    sample=sample_hanoi_rec,
    build=build_hanoi_recursive,
    make_oracle=lambda: CursorMemory(cursors=2),
    training_instances=training_instances_rec,
    check_answer=check_hanoi,
    default_train_n=8,
    k_candidates=tuple(range(8, 33, 2)),
))
