"""Trajectory grammar, episode loop, and serialization.

A trajectory is a stream of atomic string tokens produced by a model
interacting with a tool oracle. Three wire formats are supported:

* ``tagged``  -- commands/thoughts/observations wrapped in ``[TOOL]``,
  ``[THINK]``, ``[OBS]`` span tags; bare tokens are outputs. Used by the
  Turing-machine tape traces.
* ``pointer`` -- cursor commands are single atomic tokens such as
  ``[pointer1.read()]``; a read is answered by one bare observation token;
  bare tokens are thoughts before ``[ANS]`` and outputs after it. Used by
  the arithmetic and Hanoi tasks.
* ``search``  -- commands are ``[COMMAND] find [VALUE] <pattern> [NL]``
  spans answered by ``[OBSERVATION] <lines> [NL]``; other tokens form
  ``[NL]``-terminated lines, the last line being the output. Used by the
  logical-graph task.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field

# --------------------------------------------------------------------------
# Reserved tokens

TOOL_OPEN = "[TOOL]"
TOOL_CLOSE = "[\\TOOL]"
OBS_OPEN = "[OBS]"
OBS_CLOSE = "[\\OBS]"
THINK_OPEN = "[THINK]"
THINK_CLOSE = "[\\THINK]"
STATE_OPEN = "[STATE]"
STATE_CLOSE = "[\\STATE]"
ANS = "[ANS]"
EOS = "[EOS]"
COMMAND = "[COMMAND]"
VALUE = "[VALUE]"
OBSERVATION = "[OBSERVATION]"
NL = "[NL]"
LIMIT = "[LIMIT]"
BLANK = "_"

TAG_TOKENS = frozenset({
    TOOL_OPEN, TOOL_CLOSE, OBS_OPEN, OBS_CLOSE, THINK_OPEN, THINK_CLOSE,
    STATE_OPEN, STATE_CLOSE, ANS, EOS, COMMAND, VALUE, OBSERVATION, NL, LIMIT,
})

POINTER_CMD_RE = re.compile(r"\[pointer([1-9])\.(init|read|move_left|move_right)\(\)\]")


def pointer_cmd(k: int, op: str) -> str:
    """Exact spelling of a cursor command token."""
    return "[pointer%d.%s()]" % (k, op)


POINTER_TOKENS = frozenset(
    pointer_cmd(k, op)
    for k in range(1, 5)
    for op in ("init", "read", "move_left", "move_right")
)

ROLES = ("input", "thought", "command", "observation", "output", "tag")
MASKED_ROLES = frozenset({"input", "observation"})
FORMATS = ("tagged", "pointer", "search")


@dataclass(frozen=True)
class Vocab:
    """Token dictionary: reserved control tokens plus a task alphabet."""

    tokens: frozenset[str]

    @classmethod
    def build(cls, extra: set[str] | list[str] = ()) -> "Vocab":
        base = set(TAG_TOKENS) | set(POINTER_TOKENS) | {BLANK}
        base.update(str(d) for d in range(10))
        base.update(chr(c) for c in range(ord("A"), ord("Z") + 1))
        base.update(chr(c) for c in range(ord("a"), ord("z") + 1))
        base.update({"+", "×", "=", "$", "#", "%", "(", ")", ":", ","})
        base.update(extra)
        if "" in base:
            raise ValueError("empty token not allowed")
        return cls(frozenset(base))

    def __contains__(self, token: str) -> bool:
        return token in self.tokens


# --------------------------------------------------------------------------
# Errors

class ProtocolError(Exception):
    pass


class UnbalancedTag(ProtocolError):
    pass


class ObservationWithoutCommand(ProtocolError):
    pass


class UnknownToken(ProtocolError):
    pass


class SettingViolation(ProtocolError):
    def __init__(self, msg: str, event_index: int = -1):
        super().__init__(msg)
        self.event_index = event_index


class StepLimitExceeded(ProtocolError):
    pass


# --------------------------------------------------------------------------
# Events and trajectories

@dataclass
class Event:
    """One role-tagged span of a trajectory."""

    role: str
    text: list[str]
    loss_masked: bool = field(default=False)

    def __post_init__(self):
        if self.role not in ROLES:
            raise ValueError("bad role %r" % self.role)
        self.loss_masked = self.role in MASKED_ROLES

    def __eq__(self, other):
        return (
            isinstance(other, Event)
            and self.role == other.role
            and self.text == other.text
        )


@dataclass
class Trajectory:
    """Parsed trajectory: an input followed by generated events."""

    task: str = ""
    n: int = 0
    seed: int = 0
    input_tokens: list[str] = field(default_factory=list)
    events: list[Event] = field(default_factory=list)
    setting: str = "interactive"
    fmt: str = "pointer"
    instance_id: str = ""
    truncated: bool = False

    def serialize(self) -> list[str]:
        out = list(self.input_tokens)
        for ev in self.events:
            out.extend(ev.text)
        return out

    def generated_tokens(self) -> list[str]:
        out = []
        for ev in self.events:
            out.extend(ev.text)
        return out

    def content_events(self) -> list[Event]:
        return [ev for ev in self.events if ev.role != "tag"]

    def final_answer(self) -> str:
        return " ".join(extract_output(self))


def extract_output(traj: Trajectory) -> list[str]:
    """Concatenated output-role tokens with control atoms stripped."""
    out: list[str] = []
    for ev in traj.events:
        if ev.role == "output":
            out.extend(t for t in ev.text if t not in (EOS, NL))
    return out


# --------------------------------------------------------------------------
# Stream machine: incremental, shared by the batch parser and episode loop

def detect_format(tokens: list[str]) -> str:
    for t in tokens:
        if t in (TOOL_OPEN, OBS_OPEN, THINK_OPEN):
            return "tagged"
        if t in (COMMAND, OBSERVATION):
            return "search"
        if POINTER_CMD_RE.fullmatch(t):
            return "pointer"
    return "pointer"


class StreamMachine:
    """Incremental recognizer for one trajectory format.

    ``feed`` consumes one atom and reports what happened; completed command
    events are exposed so an episode runner can invoke the oracle at the
    right moment.
    """

    def __init__(self, fmt: str, vocab: Vocab | None = None):
        if fmt not in FORMATS:
            raise ValueError("unknown format %r" % fmt)
        self.fmt = fmt
        self.vocab = vocab
        self.events: list[Event] = []
        self._span: str | None = None      # THINK | TOOL | OBS | CMD | SOBS
        self._span_buf: list[str] = []
        self._run_role: str | None = None  # open content run
        self._run_buf: list[str] = []
        self._post_ans = False
        self._awaiting_read_obs = False
        self._done = False
        self.command_opens = 0

    # -- helpers ----------------------------------------------------------

    def _flush_run(self):
        if self._run_buf:
            self.events.append(Event(self._run_role, self._run_buf))
            self._run_buf = []
            self._run_role = None

    def _content(self, role: str, atom: str):
        if self._run_role != role:
            self._flush_run()
            self._run_role = role
        self._run_buf.append(atom)

    def _tag(self, atom: str):
        self._flush_run()
        self.events.append(Event("tag", [atom]))

    def _close_span(self, role: str):
        self._flush_run()
        self.events.append(Event(role, self._span_buf))
        self._span = None
        self._span_buf = []

    def _last_content_event(self) -> Event | None:
        for ev in reversed(self.events):
            if ev.role != "tag":
                return ev
        return None

    # -- feeding ----------------------------------------------------------

    def feed(self, atom: str, from_env: bool = False) -> dict:
        """Consume one atom.

        Returns a dict with keys: ``command`` (completed command atoms or
        None), ``appendable`` (True if the atom belongs to the oracle's
        visible context), ``eos`` (True when the stream terminated).
        """
        if self._done:
            raise ProtocolError("stream already terminated")
        if self.vocab is not None and atom not in self.vocab:
            raise UnknownToken(atom)
        cmd = None
        appendable = False

        if self._span == "THINK":
            if atom == THINK_CLOSE:
                self._close_span("thought")
                self._tag(atom)
            else:
                self._span_buf.append(atom)
            return {"command": None, "appendable": atom != THINK_CLOSE, "eos": False}
        if self._span == "TOOL":
            if atom == TOOL_CLOSE:
                self._close_span("command")
                self._tag(atom)
                cmd = self.events[-2].text
            else:
                self._span_buf.append(atom)
            return {"command": cmd, "appendable": False, "eos": False}
        if self._span == "OBS":
            if atom == OBS_CLOSE:
                self._close_span("observation")
                self._tag(atom)
            else:
                self._span_buf.append(atom)
            return {"command": None, "appendable": False, "eos": False}
        if self._span == "CMD":
            if atom == NL:
                self._close_span("command")
                self._tag(atom)
                cmd = self.events[-2].text
            else:
                self._span_buf.append(atom)
            return {"command": cmd, "appendable": False, "eos": False}
        if self._span == "SOBS":
            if atom == NL:
                self._close_span("observation")
                self._tag(atom)
            else:
                self._span_buf.append(atom)
            return {"command": None, "appendable": False, "eos": False}

        # A pointer read is answered by exactly one bare token, which may be
        # any context atom (including [EOS] or [ANS] read at a boundary), so
        # it must be classified before the terminator check.
        if self.fmt == "pointer" and self._awaiting_read_obs:
            if not from_env:
                raise ObservationWithoutCommand(
                    "model emitted %r while a read observation was pending" % atom)
            self._flush_run()
            self.events.append(Event("observation", [atom]))
            self._awaiting_read_obs = False
            return {"command": None, "appendable": False, "eos": False}

        # top level
        if atom == EOS or atom == LIMIT:
            self._flush_run()
            self._tag(atom)
            self._done = True
            return {"command": None, "appendable": False, "eos": True}

        if self.fmt == "tagged":
            if atom == THINK_OPEN:
                self._tag(atom)
                self._span = "THINK"
            elif atom == TOOL_OPEN:
                self._tag(atom)
                self._span = "TOOL"
                self.command_opens += 1
            elif atom == OBS_OPEN:
                last = self._last_content_event()
                if last is None or last.role != "command":
                    raise ObservationWithoutCommand(atom)
                self._tag(atom)
                self._span = "OBS"
            elif atom in (TOOL_CLOSE, THINK_CLOSE, OBS_CLOSE):
                raise UnbalancedTag("close without open: %s" % atom)
            else:
                self._content("output", atom)
                appendable = True
        elif self.fmt == "pointer":
            if POINTER_CMD_RE.fullmatch(atom):
                self._flush_run()
                self.events.append(Event("command", [atom]))
                self.command_opens += 1
                cmd = [atom]
                self._awaiting_read_obs = atom.endswith(".read()]")
            elif atom == ANS:
                self._tag(atom)
                self._post_ans = True
                appendable = True
            else:
                self._content("output" if self._post_ans else "thought", atom)
                appendable = True
        else:  # search
            if atom == COMMAND:
                self._tag(atom)
                self._span = "CMD"
                self.command_opens += 1
            elif atom == OBSERVATION:
                last = self._last_content_event()
                if last is None or last.role != "command":
                    raise ObservationWithoutCommand(atom)
                self._tag(atom)
                self._span = "SOBS"
            elif atom == NL:
                self._flush_run()
                self._tag(atom)
                appendable = True
            else:
                self._content("thought", atom)
                appendable = True
        return {"command": cmd, "appendable": appendable, "eos": False}

    def finalize(self, strict: bool = True) -> list[Event]:
        if strict and self._span is not None:
            raise UnbalancedTag("unterminated span %s" % self._span)
        if strict and self._awaiting_read_obs:
            raise ObservationWithoutCommand("read command with no observation")
        self._flush_run()
        if self.fmt == "search":
            for i in range(len(self.events) - 1, -1, -1):
                ev = self.events[i]
                if ev.role != "tag":
                    if ev.role == "thought":
                        self.events[i] = Event("output", ev.text)
                    break
        return self.events


# --------------------------------------------------------------------------
# Batch parsing / serialization

def parse_stream(
    tokens: list[str],
    fmt: str | None = None,
    input_len: int = 0,
    vocab: Vocab | None = None,
    strict: bool = True,
) -> Trajectory:
    """Parse a flat token stream into a role-partitioned trajectory."""
    if fmt is None:
        fmt = detect_format(tokens[input_len:])
    machine = StreamMachine(fmt, vocab=vocab)
    if vocab is not None:
        for t in tokens[:input_len]:
            if t not in vocab:
                raise UnknownToken(t)
    for t in tokens[input_len:]:
        machine.feed(t, from_env=True)  # batch mode: no pending-obs policing
    events = machine.finalize(strict=strict)
    traj = Trajectory(input_tokens=list(tokens[:input_len]), events=events, fmt=fmt)
    return traj


# --------------------------------------------------------------------------
# Interaction settings

@dataclass(frozen=True)
class InteractionSetting:
    """Limits on commands and generated tokens for one episode."""

    mode: str
    step_limit: int | None = None
    command_limit: int | None = None  # None = unlimited

    def __post_init__(self):
        if self.mode not in ("cot_only", "single_turn", "interactive"):
            raise ValueError("bad mode %r" % self.mode)
        if self.step_limit is not None and self.step_limit < 0:
            raise ValueError("step_limit must be nonnegative")

    @classmethod
    def cot_only(cls, step_limit: int | None = None) -> "InteractionSetting":
        return cls("cot_only", step_limit, 0)

    @classmethod
    def single_turn(cls, step_limit: int | None = None) -> "InteractionSetting":
        return cls("single_turn", step_limit, 1)

    @classmethod
    def interactive(cls, step_limit: int | None = None) -> "InteractionSetting":
        return cls("interactive", step_limit, None)

    @classmethod
    def for_mode(cls, mode: str, step_limit: int | None = None) -> "InteractionSetting":
        return getattr(cls, mode)(step_limit)


def default_step_limit(reference_len: int) -> int:
    """Generation cap: 64x the reference trajectory length at training scale."""
    return 64 * max(reference_len, 1)


def validate_setting(traj: Trajectory, setting: InteractionSetting):
    """Check a parsed trajectory against a setting.

    Returns None if valid, else a (event_index, rule) pair for the first
    violation.
    """
    limit = setting.command_limit
    seen = 0
    for i, ev in enumerate(traj.events):
        if ev.role == "command":
            seen += 1
            if setting.mode == "cot_only":
                return (i, "command event in cot_only")
            if limit is not None and seen > limit:
                return (i, "more than %d command(s) in %s" % (limit, setting.mode))
    return None


# --------------------------------------------------------------------------
# Episode loop

class Policy:
    """Interface for token-emitting policies driven by run_episode."""

    def reset(self, input_tokens: list[str]) -> None:
        raise NotImplementedError

    def next_token(self) -> str:
        raise NotImplementedError

    def observe(self, atoms: list[str]) -> None:
        """Environment-injected atoms (observation spans, wrappers included)."""
        raise NotImplementedError

    def live_state_size(self) -> int:
        """Number of retained atoms; constant for bounded-memory policies."""
        return -1


def wrap_observation(fmt: str, obs: list[str]) -> list[str]:
    if fmt == "tagged":
        return [OBS_OPEN, *obs, OBS_CLOSE]
    if fmt == "search":
        return [OBSERVATION, *obs, NL]
    return list(obs)  # pointer: a single bare token


def run_episode(
    policy: Policy,
    oracle,
    input_tokens: list[str],
    setting: InteractionSetting,
    fmt: str = "pointer",
    on_limit: str = "raise",
    task: str = "",
    n: int = 0,
    seed: int = 0,
) -> Trajectory:
    """Alternate a policy and a tool oracle until [EOS] or the step limit.

    The oracle is called exactly once per completed command and its
    observation is injected before the policy resumes. Thought and output
    atoms are appended to the oracle context as they are produced.
    """
    oracle.reset(list(input_tokens))
    policy.reset(list(input_tokens))
    machine = StreamMachine(fmt)
    steps = 0
    limit = setting.step_limit
    truncated = False
    while True:
        if limit is not None and steps >= limit:
            if on_limit == "raise":
                raise StepLimitExceeded("step limit %d reached" % limit)
            machine.finalize(strict=False)
            machine.events.append(Event("tag", [LIMIT]))
            truncated = True
            break
        atom = policy.next_token()
        steps += 1
        opens_before = machine.command_opens
        info = machine.feed(atom)
        if machine.command_opens > opens_before:
            if setting.mode == "cot_only":
                raise SettingViolation("command in cot_only", len(machine.events) - 1)
            if (setting.command_limit is not None
                    and machine.command_opens > setting.command_limit):
                raise SettingViolation(
                    "command %d exceeds limit %d"
                    % (machine.command_opens, setting.command_limit),
                    len(machine.events) - 1,
                )
        if info["appendable"]:
            oracle.append(atom)
        if info["command"] is not None:
            obs = oracle.execute(info["command"])
            if obs is not None:
                wrapped = wrap_observation(fmt, obs)
                for w in wrapped:
                    machine.feed(w, from_env=True)
                policy.observe(wrapped)
        if info["eos"]:
            machine.finalize(strict=True)
            break
    return Trajectory(
        task=task, n=n, seed=seed, input_tokens=list(input_tokens),
        events=machine.events, setting=setting.mode, fmt=fmt, truncated=truncated,
    )


# --------------------------------------------------------------------------
# Script runner: imperative trajectory construction through the same grammar

class ScriptRunner:
    """Builds a reference trajectory by emitting atoms against a live oracle.

    Every atom passes through the same StreamMachine as the parser and the
    episode loop, so built trajectories round-trip exactly and embedded
    observations are oracle outputs by construction.
    """

    def __init__(self, oracle, input_tokens: list[str], fmt: str):
        self.oracle = oracle
        self.fmt = fmt
        self.input_tokens = list(input_tokens)
        self.machine = StreamMachine(fmt)
        oracle.reset(list(input_tokens))

    def emit(self, *atoms: str):
        for atom in atoms:
            info = self.machine.feed(atom)
            if info["appendable"]:
                self.oracle.append(atom)
            if info["command"] is not None:
                raise ProtocolError("use command() for command spans")

    def command(self, *atoms: str) -> list[str] | None:
        """Emit a complete command and return the oracle's observation content."""
        if self.fmt == "tagged":
            stream = [TOOL_OPEN, *atoms, TOOL_CLOSE]
        elif self.fmt == "search":
            stream = [COMMAND, *atoms, NL]
        else:
            stream = list(atoms)
        obs = None
        for atom in stream:
            info = self.machine.feed(atom)
            if info["command"] is not None:
                obs = self.oracle.execute(info["command"])
                if obs is not None:
                    for w in wrap_observation(self.fmt, obs):
                        self.machine.feed(w, from_env=True)
        return obs

    def read(self, k: int) -> str:
        """Pointer read; returns the observed token."""
        obs = self.command(pointer_cmd(k, "read"))
        return obs[0]

    def move(self, k: int, direction: str):
        self.command(pointer_cmd(k, "move_%s" % direction))

    def end(self, truncated: bool = False) -> list[Event]:
        if not truncated:
            self.emit(EOS)
        return self.machine.finalize(strict=not truncated)

    def build(self, task: str, n: int, seed: int,
              setting: str = "interactive") -> Trajectory:
        return Trajectory(
            task=task, n=n, seed=seed, input_tokens=self.input_tokens,
            events=self.machine.finalize(strict=True), setting=setting, fmt=self.fmt,
        )


# --------------------------------------------------------------------------
# JSONL interchange format

def trajectory_to_json(traj: Trajectory) -> dict:
    return {
        "task": traj.task,
        "n": traj.n,
        "seed": traj.seed,
        "input": " ".join(traj.input_tokens),
        "events": [{"role": ev.role, "text": " ".join(ev.text)} for ev in traj.events],
        "final_answer": traj.final_answer(),
        "setting": traj.setting,
    }


def trajectory_from_json(obj: dict) -> Trajectory:
    events = [
        Event(e["role"], e["text"].split(" ") if e["text"] else [])
        for e in obj["events"]
    ]
    traj = Trajectory(
        task=obj.get("task", ""),
        n=int(obj.get("n", 0)),
        seed=int(obj.get("seed", 0)),
        input_tokens=obj["input"].split(" ") if obj["input"] else [],
        events=events,
        setting=obj.get("setting", "interactive"),
    )
    traj.fmt = detect_format(traj.generated_tokens())
    return traj


def write_jsonl(path: str, trajectories) -> int:
    count = 0
    with open(path, "w") as fh:
        for traj in trajectories:
            fh.write(json.dumps(trajectory_to_json(traj)) + "\n")
            count += 1
    return count


def read_jsonl(path: str) -> list[Trajectory]:
    out = []
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if line:
                out.append(trajectory_from_json(json.loads(line)))
    return out
