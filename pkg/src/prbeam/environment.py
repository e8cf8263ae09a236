"""Bandit environments.

Environments are indexed by a zero-based time index ``i``; protocol step
``t`` (1-based, as used by policies) maps to ``i = t - 1``. Policies only see
the values returned by :meth:`step`; ``oracle_rewards`` exists for metrics.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .array import _readonly
from .channel import ChannelParams, NoiseModel, Patterns, expected_rewards
from .errors import HorizonExceeded, InsufficientTrace, InvalidArgument


class StationaryEnv:
    """Fixed k-path channel observed through Gaussian RSS noise."""

    stationary = True
    horizon = None

    def __init__(self, params: ChannelParams, patterns: Patterns, noise: NoiseModel = NoiseModel()):
        self.params = params
        self.patterns = patterns
        self.noise = noise
        self._rewards = _readonly(np.array(expected_rewards(params, patterns), dtype=float))

    @property
    def num_beams(self) -> int:
        return self._rewards.size

    def oracle_rewards(self, i: int = 0) -> np.ndarray:
        return self._rewards

    def step(self, beam: int, i: int, rng: np.random.Generator) -> float:
        if not 0 <= beam < self.num_beams:
            raise InvalidArgument(f"beam index {beam} out of range [0, {self.num_beams})")
        r = float(self._rewards[beam])
        if self.noise.sigma == 0:
            return r
        return r + float(rng.normal(0.0, self.noise.sigma))

    def __repr__(self):
        return f"StationaryEnv({self.params!r}, K={self.num_beams}, sigma={self.noise.sigma})"


@dataclass(frozen=True, eq=False)
class Trace:
    """Per-tick, per-beam RSS measurements (dBm)."""

    rss: np.ndarray
    ticks: np.ndarray | None = None

    def __post_init__(self):
        rss = np.array(self.rss, dtype=float, copy=True)
        if rss.ndim != 2 or rss.shape[0] < 1 or rss.shape[1] < 1:
            raise InvalidArgument(f"trace must be a nonempty ticks x beams table, got shape {rss.shape}")
        if not np.all(np.isfinite(rss)):
            raise InvalidArgument("trace values must be finite")
        ticks = np.arange(rss.shape[0]) if self.ticks is None else np.array(self.ticks, dtype=int)
        if ticks.shape != (rss.shape[0],) or np.any(np.diff(ticks) <= 0):
            raise InvalidArgument("trace ticks must be strictly increasing, one per row")
        object.__setattr__(self, "rss", _readonly(rss))
        object.__setattr__(self, "ticks", _readonly(ticks))

    @property
    def num_ticks(self) -> int:
        return self.rss.shape[0]

    @property
    def num_beams(self) -> int:
        return self.rss.shape[1]

    def window(self, start: int, num_ticks: int) -> "Trace":
        if start < 0 or num_ticks < 1 or start + num_ticks > self.num_ticks:
            raise InsufficientTrace(
                f"window [{start}, {start + num_ticks}) does not fit a {self.num_ticks}-tick trace"
            )
        return Trace(self.rss[start:start + num_ticks], self.ticks[start:start + num_ticks])


class TraceEnv:
    """Measured RSS sequence, linearly interpolated ``factor`` steps per tick."""

    stationary = False

    def __init__(self, trace: Trace, factor: int, noise: NoiseModel = NoiseModel()):
        if trace.num_ticks < 2:
            raise InsufficientTrace(f"trace needs at least 2 ticks, got {trace.num_ticks}")
        if int(factor) != factor or factor < 1:
            raise InvalidArgument(f"interpolation factor must be a positive integer, got {factor!r}")
        self.trace = trace
        self.factor = int(factor)
        self.noise = noise

    @property
    def num_beams(self) -> int:
        return self.trace.num_beams

    @property
    def horizon(self) -> int:
        return (self.trace.num_ticks - 1) * self.factor + 1

    def oracle_rewards(self, i: int) -> np.ndarray:
        if not 0 <= i < self.horizon:
            raise HorizonExceeded(f"time index {i} outside trace horizon {self.horizon}")
        tick, offset = divmod(int(i), self.factor)
        row = self.trace.rss[tick]
        if offset == 0:
            return row
        w = offset / self.factor
        return row + (self.trace.rss[tick + 1] - row) * w

    def step(self, beam: int, i: int, rng: np.random.Generator) -> float:
        if not 0 <= beam < self.num_beams:
            raise InvalidArgument(f"beam index {beam} out of range [0, {self.num_beams})")
        r = float(self.oracle_rewards(i)[beam])
        if self.noise.sigma == 0:
            return r
        return r + float(rng.normal(0.0, self.noise.sigma))

    def __repr__(self):
        return f"TraceEnv(ticks={self.trace.num_ticks}, K={self.num_beams}, factor={self.factor})"


def build_trace_env(trace: Trace, factor: int, noise: NoiseModel | None = None) -> TraceEnv:
    return TraceEnv(trace, factor, noise or NoiseModel())


def ticks_needed(horizon: int, factor: int) -> int:
    """Smallest tick count whose interpolated horizon covers ``horizon`` steps."""
    return max(2, math.ceil((horizon - 1) / factor) + 1)


def stationary_step(env: StationaryEnv, beam: int, i: int, rng) -> float:
    return env.step(beam, i, rng)


def trace_step(env: TraceEnv, beam: int, i: int, rng) -> float:
    return env.step(beam, i, rng)


def oracle_rewards(env, i: int) -> np.ndarray:
    return env.oracle_rewards(i)
