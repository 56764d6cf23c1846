"""Coupling constants of the even-interaction model.

A coupling vector stores the raw constants t_{2j} (keys are the even indices
2j) together with the lattice scale N.  The rescaled constants used in the
continuum limit are T_{2j} = N^(j-1) t_{2j}.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from types import MappingProxyType
from typing import Mapping

from .errors import InvalidInputError


@dataclass(frozen=True)
class CouplingVector:
    entries: Mapping[int, float] = field(default_factory=dict)
    scale_N: int = 200

    def __post_init__(self):
        if not isinstance(self.scale_N, int) or self.scale_N < 1:
            raise InvalidInputError(f"scale N must be a positive integer, got {self.scale_N!r}")
        clean = {}
        for idx, val in sorted(dict(self.entries).items()):
            idx = int(idx)
            if idx <= 0 or idx % 2 != 0:
                raise InvalidInputError(f"coupling index must be a positive even integer, got {idx}")
            val = float(val)
            if not math.isfinite(val):
                raise InvalidInputError(f"coupling t_{idx} must be finite, got {val}")
            clean[idx] = val
        object.__setattr__(self, "entries", MappingProxyType(clean))

    @classmethod
    def from_rescaled(cls, rescaled: Mapping[int, float], scale_N: int) -> "CouplingVector":
        """Build from T_{2j} values: t_{2j} = T_{2j} / N^(j-1)."""
        raw = {int(idx): float(val) / scale_N ** (int(idx) // 2 - 1) for idx, val in rescaled.items()}
        return cls(raw, scale_N)

    def t(self, index: int) -> float:
        return self.entries.get(index, 0.0)

    def T(self, index: int) -> float:
        return self.t(index) * self.scale_N ** (index // 2 - 1)

    def rescaled(self) -> dict[int, float]:
        return {idx: self.T(idx) for idx in self.entries}

    @property
    def indices(self) -> tuple[int, ...]:
        return tuple(self.entries)

    @property
    def max_j(self) -> int:
        """Largest j with a stored t_{2j} entry (0 for the free model)."""
        return max(self.entries, default=0) // 2

    @property
    def top_index(self) -> int:
        """Largest index with a nonzero coupling, 0 if all vanish."""
        nz = [idx for idx, val in self.entries.items() if val != 0.0]
        return max(nz, default=0)

    @property
    def is_zero(self) -> bool:
        return self.top_index == 0

    @property
    def convergence_warning(self) -> bool:
        """True when the top nonzero coupling is not negative (weight not integrable)."""
        top = self.top_index
        return top != 0 and self.entries[top] > 0.0

    def scaled(self, s: float) -> "CouplingVector":
        return CouplingVector({idx: s * val for idx, val in self.entries.items()}, self.scale_N)

    def with_entry(self, index: int, value: float) -> "CouplingVector":
        new = dict(self.entries)
        new[index] = value
        return CouplingVector(new, self.scale_N)

    def with_increment(self, index: int, delta: float) -> "CouplingVector":
        return self.with_entry(index, self.t(index) + delta)
