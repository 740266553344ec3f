"""Fixed-capacity FIFO experience buffers with uniform random sampling.

The two agents keep their experience kinds in disjoint buffers: per-slot
``Transition`` records feed Q-network training, per-episode ``GoalTransition``
records belong to the goal-selection level of the hierarchical agent.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Generic, Sequence, TypeVar

import numpy as np

__all__ = ["Transition", "GoalTransition", "RingBuffer"]

T = TypeVar("T")


@dataclass
class Transition:
    """One slot of low-level experience.

    ``goal`` is the relay index the hierarchical controller was pursuing and
    is None for the flat agent (whose action already encodes the relay).
    ``terminal`` marks the final slot of an episode (no bootstrapping).
    """

    state: np.ndarray
    goal: int | None
    action: int
    reward: float
    next_state: np.ndarray
    terminal: bool = False


@dataclass
class GoalTransition:
    """One episode of high-level experience for the goal-selection level."""

    start_state: np.ndarray
    goal: int
    external_reward: float
    end_state: np.ndarray

    def __post_init__(self) -> None:
        if not 0.0 <= self.external_reward <= 1.0:
            raise ValueError("external_reward must lie in [0, 1]")


class RingBuffer(Generic[T]):
    """Bounded FIFO store with uniform with-replacement sampling."""

    def __init__(self, capacity: int = 8000):
        if capacity < 1:
            raise ValueError("capacity must be >= 1")
        self.capacity = capacity
        self._items: list[T] = []
        self._cursor = 0

    def __len__(self) -> int:
        return len(self._items)

    def push(self, item: T) -> None:
        """Store an item, evicting the oldest one once at capacity."""
        if len(self._items) < self.capacity:
            self._items.append(item)
        else:
            self._items[self._cursor] = item
            self._cursor = (self._cursor + 1) % self.capacity

    def sample(self, batch: int, rng: np.random.Generator) -> list[T]:
        """Draw ``batch`` items uniformly with replacement."""
        if not self._items:
            raise RuntimeError("cannot sample from an empty buffer")
        indices = rng.integers(0, len(self._items), size=batch)
        return [self._items[i] for i in indices]

    def items(self) -> Sequence[T]:
        """Read-only view of the stored items (arbitrary internal order)."""
        return tuple(self._items)
