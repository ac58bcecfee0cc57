"""Ablation-format trajectory variants for the addition task.

Variants mirror the trajectory-format ablations: answer-only (optionally
reversed), the tool-free trace where the model must predict what the memory
tool would have said, and the single-turn calculator.
"""

from __future__ import annotations

from ..oracles import CalculatorOracle
from ..protocol import (
    ANS, EOS, OBS_CLOSE, OBS_OPEN, TOOL_CLOSE, TOOL_OPEN,
    Event, ScriptRunner, Trajectory,
)
from .addition import build_addition_trajectory
from .base import TaskInstance

VARIANTS = ("no_cot", "no_cot_reversed", "no_tool", "calculator_single_turn")


class UnsupportedVariant(Exception):
    pass


def build_ablation_trajectory(inst: TaskInstance, variant: str) -> Trajectory:
    if inst.task != "add":
        raise UnsupportedVariant("ablations are defined for addition instances")
    if variant == "no_cot" or variant == "no_cot_reversed":
        digits = list(inst.answer_tokens)
        if variant == "no_cot_reversed":
            digits.reverse()
        events = [Event("tag", [ANS]), Event("output", digits), Event("tag", [EOS])]
        return Trajectory(task="add-" + variant, n=inst.n, seed=inst.seed,
                          input_tokens=inst.input_tokens, events=events,
                          setting="cot_only", fmt="pointer")
    if variant == "no_tool":
        base = build_addition_trajectory(inst)
        events = []
        for ev in base.events:
            if ev.role in ("observation", "command"):
                events.append(Event("thought", list(ev.text)))
            else:
                events.append(Event(ev.role, list(ev.text)))
        return Trajectory(task="add-no_tool", n=inst.n, seed=inst.seed,
                          input_tokens=inst.input_tokens, events=events,
                          setting="cot_only", fmt="pointer")
    if variant == "calculator_single_turn":
        r = ScriptRunner(CalculatorOracle(), inst.input_tokens, fmt="tagged")
        x1, x2 = inst.meta["x1"], inst.meta["x2"]
        r.command("add", "(", *str(x1), ",", *str(x2), ")")
        for d in inst.answer_tokens:
            r.emit(d)
        r.emit(EOS)
        return Trajectory(task="add-calculator", n=inst.n, seed=inst.seed,
                          input_tokens=inst.input_tokens,
                          events=r.machine.finalize(strict=True),
                          setting="single_turn", fmt="tagged")
    raise UnsupportedVariant(variant)
