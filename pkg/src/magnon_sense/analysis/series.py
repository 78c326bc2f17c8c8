"""Uniformly sampled scalar signals."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True)
class TimeSeries:
    t0: float  # ns
    dt: float  # ns
    values: np.ndarray
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=float)
        if vals.ndim != 1 or vals.size < 2:
            raise ValueError("a TimeSeries needs at least two samples")
        if not self.dt > 0:
            raise ValueError("TimeSeries step must be positive")
        object.__setattr__(self, "values", vals)

    def __len__(self):
        return self.values.size

    @property
    def times(self) -> np.ndarray:
        return self.t0 + self.dt * np.arange(self.values.size)

    @classmethod
    def from_samples(cls, times, values, rtol: float = 1e-6, **meta) -> "TimeSeries":
        """Build from explicit sample times, which must be uniformly spaced."""
        t = np.asarray(times, dtype=float)
        if t.size < 2:
            raise ValueError("a TimeSeries needs at least two samples")
        steps = np.diff(t)
        dt = float(steps.mean())
        if np.any(np.abs(steps - dt) > rtol * max(abs(dt), 1e-300)):
            raise ValueError("sample times are not uniformly spaced")
        return cls(float(t[0]), dt, np.asarray(values, dtype=float), meta)
