"""Input samplers and reference trajectory builders for the synthetic tasks."""

from .base import TaskInstance, TaskSpec, MixtureSpec, get_task, TASKS, sample_mixture
from . import addition, multiplication, hanoi, logic, ablations  # noqa: F401  (register)

__all__ = [
    "TaskInstance", "TaskSpec", "MixtureSpec", "get_task", "TASKS",
    "sample_mixture",
]
