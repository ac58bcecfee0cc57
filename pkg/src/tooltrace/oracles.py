"""Tool oracles: cursor memory, search memory, and the tape oracle.

An oracle owns a mutable memory initialized from the episode input. It
receives command atoms and returns observation content atoms (or None for
commands that produce no observation). Thought and output atoms generated
by the model are streamed in through ``append``.
"""

from __future__ import annotations

from .protocol import BLANK, EOS, NL, POINTER_CMD_RE


class OracleError(Exception):
    pass


class UnknownCursor(OracleError):
    pass


class HeadUnderflow(OracleError):
    pass


class UnknownCommand(OracleError):
    pass


class CursorMemory:
    """Append-only token context with movable read cursors.

    Cursor positions stay in [0, len(context)]. A ``move_left`` at position 0
    clamps and parks the cursor on the left boundary: a parked cursor reads
    the boundary token [EOS] until it moves right again. Reads at or past the
    end of the context also yield [EOS]. Reads never mutate state; appends
    never move cursors.
    """

    def __init__(self, cursors: int = 0):
        self.context: list[str] = []
        self.positions: dict[int, int] = {}
        self.parked: dict[int, bool] = {}
        self._prealloc = cursors

    def reset(self, input_tokens: list[str]):
        self.context = list(input_tokens)
        self.positions = {k: 0 for k in range(1, self._prealloc + 1)}
        self.parked = {k: False for k in range(1, self._prealloc + 1)}

    def append(self, atom: str):
        self.context.append(atom)

    def _check(self, k: int):
        if k not in self.positions:
            raise UnknownCursor("cursor %d used before init" % k)

    def read(self, k: int) -> str:
        self._check(k)
        if self.parked[k]:
            return EOS
        p = self.positions[k]
        return self.context[p] if p < len(self.context) else EOS

    def execute(self, cmd: list[str]) -> list[str] | None:
        if len(cmd) != 1:
            raise UnknownCommand(" ".join(cmd))
        m = POINTER_CMD_RE.fullmatch(cmd[0])
        if not m:
            raise UnknownCommand(cmd[0])
        k, op = int(m.group(1)), m.group(2)
        if op == "init":
            self.positions[k] = 0
            self.parked[k] = False
            return None
        self._check(k)
        if op == "read":
            return [self.read(k)]
        if op == "move_left":
            if self.positions[k] == 0:
                self.parked[k] = True
            else:
                self.positions[k] -= 1
            return None
        # move_right
        if self.parked[k]:
            self.parked[k] = False
        elif self.positions[k] < len(self.context):
            self.positions[k] += 1
        return None


class SearchMemory:
    """Append-only list of token lines searched with contiguous patterns."""

    def __init__(self):
        self.lines: list[list[str]] = []
        self._open: list[str] = []

    def reset(self, input_tokens: list[str]):
        self.lines = []
        self._open = []
        for atom in input_tokens:
            self.append(atom)

    def append(self, atom: str):
        if atom == NL:
            if self._open:
                self.lines.append(self._open)
                self._open = []
        else:
            self._open.append(atom)

    @staticmethod
    def _contains(line: list[str], pattern: list[str]) -> bool:
        m = len(pattern)
        if m == 0 or m > len(line):
            return False
        for i in range(len(line) - m + 1):
            if line[i:i + m] == pattern:
                return True
        return False

    def find(self, pattern: list[str]) -> list[list[str]]:
        if not pattern:
            raise UnknownCommand("empty find pattern")
        return [ln for ln in self.lines if self._contains(ln, pattern)]

    def execute(self, cmd: list[str]) -> list[str] | None:
        # command event text is: find [VALUE] <pattern atoms>
        if len(cmd) < 3 or cmd[0] != "find" or cmd[1] != "[VALUE]":
            raise UnknownCommand(" ".join(cmd))
        hits = self.find(cmd[2:])
        out: list[str] = []
        for i, ln in enumerate(hits):
            if i:
                out.append(",")
            out.extend(ln)
        return out


class TapeOracle:
    """Turing-machine tape with a single head index.

    ``read`` yields the token under the head, or [EOS] at or past the end of
    the tape. ``write`` replaces the token under the head, extending the tape
    with blanks if the head is past the end. ``move_left`` at position 0 is a
    HeadUnderflow error: well-formed machines halt at position 0 and never
    underflow, so an underflow surfaces a compiler bug.
    """

    def __init__(self):
        self.tape: list[str] = []
        self.head = 0

    def reset(self, input_tokens: list[str]):
        self.tape = list(input_tokens)
        self.head = 0

    def append(self, atom: str):
        pass  # commands and generated text do not touch the tape

    def read(self) -> str:
        return self.tape[self.head] if self.head < len(self.tape) else EOS

    def write(self, sigma: str):
        while self.head > len(self.tape):
            self.tape.append(BLANK)
        if self.head == len(self.tape):
            self.tape.append(sigma)
        else:
            self.tape[self.head] = sigma

    def execute(self, cmd: list[str]) -> list[str] | None:
        op = cmd[0] if cmd else ""
        if op == "read" and len(cmd) == 1:
            return [self.read()]
        if op == "write" and len(cmd) == 2:
            self.write(cmd[1])
            return None
        if op == "move_left" and len(cmd) == 1:
            if self.head == 0:
                raise HeadUnderflow("move_left at head 0")
            self.head -= 1
            return None
        if op == "move_right" and len(cmd) == 1:
            self.head += 1
            return None
        raise UnknownCommand(" ".join(cmd))


class CalculatorOracle:
    """Single-command adder used by the single-turn ablation traces."""

    def reset(self, input_tokens: list[str]):
        pass

    def append(self, atom: str):
        pass

    def execute(self, cmd: list[str]) -> list[str] | None:
        # add ( d.. , d.. )
        if not cmd or cmd[0] != "add":
            raise UnknownCommand(" ".join(cmd))
        body = cmd[1:]
        if body[0] != "(" or body[-1] != ")" or "," not in body:
            raise UnknownCommand(" ".join(cmd))
        comma = body.index(",")
        a = int("".join(body[1:comma]))
        b = int("".join(body[comma + 1:-1]))
        return list(str(a + b))
