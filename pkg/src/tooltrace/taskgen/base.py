"""Task registry shared by the generators, the learners, and the CLI."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

from ..seeding import rng_for


@dataclass
class TaskInstance:
    """One sampled problem with its independently computed ground truth."""

    task: str
    n: int
    seed: int
    input_tokens: list[str]
    answer_tokens: list[str]
    meta: dict = field(default_factory=dict)


@dataclass
class TaskSpec:
    """Everything the harness needs to know about one task family."""

    name: str
    fmt: str                                  # trajectory wire format
    sample: Callable                          # (n, rng) -> TaskInstance
    build: Callable                           # (TaskInstance) -> Trajectory
    make_oracle: Callable                     # () -> fresh oracle
    training_instances: Callable              # (n_max, samples, seed) -> list
    check_answer: Callable                    # (inst, output_tokens) -> bool
    default_train_n: int
    k_candidates: tuple = tuple(range(6, 65, 2))
    setting: str = "interactive"
    abstract_re: str | None = None  # open token class canonicalized by the learner


TASKS: dict[str, TaskSpec] = {}


def register(spec: TaskSpec):
    TASKS[spec.name] = spec
    return spec


def get_task(name: str) -> TaskSpec:
    if name not in TASKS:
        raise KeyError("unknown task %r (have: %s)" % (name, ", ".join(sorted(TASKS))))
    return TASKS[name]


def default_check(inst: TaskInstance, output_tokens: list[str]) -> bool:
    return output_tokens == inst.answer_tokens


@dataclass
class MixtureSpec:
    """Weighted blend of task samplers; weights sum to 1."""

    components: list[str]
    weights: list[float]

    def __post_init__(self):
        if len(self.components) != len(self.weights):
            raise ValueError("components and weights differ in length")
        if any(w < 0 for w in self.weights):
            raise ValueError("negative weight")
        total = sum(self.weights)
        if total <= 0:
            raise ValueError("weights sum to zero")
        self.weights = [w / total for w in self.weights]

    @classmethod
    def parse(cls, text: str) -> "MixtureSpec":
        comps, weights = [], []
        for part in text.split(","):
            name, _, w = part.partition(":")
            comps.append(name.strip())
            weights.append(float(w) if w else 1.0)
        return cls(comps, weights)


def sample_mixture(mix: MixtureSpec, n: int, rng) -> TaskInstance:
    """Pick a component with its weight, then sample that task at n."""
    r = rng.random()
    acc = 0.0
    chosen = mix.components[-1]
    for name, w in zip(mix.components, mix.weights):
        acc += w
        if r < acc:
            chosen = name
            break
    return get_task(chosen).sample(n, rng)


def sample_many(task_name: str, n: int, count: int, seed: int) -> list[TaskInstance]:
    """Deterministic batch sampling via per-instance derived seeds."""
    spec = get_task(task_name)
    out = []
    for i in range(count):
        inst = spec.sample(n, rng_for(seed, i))
        inst.seed = seed
        inst.meta["index"] = i
        out.append(inst)
    return out
