"""Component layout of the flat parameter vector and per-component sync schedule."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np


class NumericalDivergence(ArithmeticError):
    """Raised when a parameter slot picks up NaN or Inf."""

    def __init__(self, message: str, step: int | None = None):
        super().__init__(message if step is None else f"step {step}: {message}")
        self.step = step


@dataclass(frozen=True)
class Component:
    name: str
    offset: int
    length: int
    sync_period: int

    @property
    def stop(self) -> int:
        return self.offset + self.length


class ComponentLayout:
    """Ordered, contiguous split of ``[0, d)`` into named components.

    Each component carries its own synchronization period ``H``.
    """

    def __init__(self, components: Sequence[Component]):
        comps = tuple(components)
        if not comps:
            raise ValueError("layout needs at least one component")
        expected = 0
        for c in comps:
            if c.length < 1:
                raise ValueError(f"component {c.name!r} has length {c.length} < 1")
            if c.sync_period < 1:
                raise ValueError(f"component {c.name!r} has sync period {c.sync_period} < 1")
            if c.offset != expected:
                raise ValueError(
                    f"component {c.name!r} starts at {c.offset}, expected {expected} "
                    "(components must be contiguous and non-overlapping)"
                )
            expected = c.stop
        self.components = comps
        self.dim = expected

    @classmethod
    def from_lengths(cls, lengths, periods, names=None) -> "ComponentLayout":
        if len(lengths) != len(periods):
            raise ValueError("lengths and periods differ in size")
        names = names or [f"c{i}" for i in range(len(lengths))]
        comps, offset = [], 0
        for name, length, period in zip(names, lengths, periods):
            comps.append(Component(name, offset, int(length), int(period)))
            offset += int(length)
        return cls(comps)

    @classmethod
    def single(cls, dim: int, sync_period: int = 1) -> "ComponentLayout":
        return cls([Component("all", 0, dim, sync_period)])

    def __len__(self):
        return len(self.components)

    def __iter__(self):
        return iter(self.components)

    def __getitem__(self, i: int) -> Component:
        return self.components[i]

    def __eq__(self, other):
        return isinstance(other, ComponentLayout) and self.components == other.components

    def __repr__(self):
        return f"ComponentLayout({list(self.components)!r})"

    def slice(self, i: int) -> slice:
        if not 0 <= i < len(self.components):
            raise IndexError(f"component index {i} out of range (m={len(self.components)})")
        c = self.components[i]
        return slice(c.offset, c.stop)

    @property
    def periods(self) -> tuple[int, ...]:
        return tuple(c.sync_period for c in self.components)

    def to_dict(self) -> list[dict]:
        return [
            {"name": c.name, "length": c.length, "sync_period": c.sync_period}
            for c in self.components
        ]


def component_view(layout: ComponentLayout, vec: np.ndarray, i: int) -> np.ndarray:
    """Writable view of component ``i``; mutations show through to ``vec``."""
    if vec.shape != (layout.dim,):
        raise ValueError(f"vector has shape {vec.shape}, layout expects ({layout.dim},)")
    return vec[layout.slice(i)]


def due_components(layout: ComponentLayout, t: int) -> list[int]:
    """Indices of components whose period divides step ``t`` (steps start at 1)."""
    if t < 1:
        raise ValueError(f"step index starts at 1, got {t}")
    return [i for i, c in enumerate(layout.components) if t % c.sync_period == 0]


def check_finite(vec: np.ndarray, what: str, step: int | None = None) -> None:
    if not np.all(np.isfinite(vec)):
        raise NumericalDivergence(f"non-finite values in {what}", step)
