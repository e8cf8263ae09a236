"""Beam selection policies.

Every policy follows the same protocol: for t = 1, 2, ... call
``select(t)`` and then ``observe(t, beam, reward)`` exactly once before the
next ``select``. Steps are 1-based and local to the policy instance.
"""

from __future__ import annotations

import math
from typing import Callable

import numpy as np

from .channel import ChannelParams
from .errors import InvalidArgument, SequencingError
from .estimation import CandidateSpace, GridEstimator, History, batch_sse
from .seeding import as_seed_sequence, child_seed


class Policy:
    """Base class enforcing the select/observe alternation."""

    name = "policy"

    def __init__(self):
        self._pending: int | None = None
        self._last: int = 0

    def select(self, t: int) -> int:
        if self._pending is not None:
            raise SequencingError(f"step {self._pending} was selected but never observed")
        if t <= self._last:
            raise SequencingError(f"step {t} does not follow step {self._last}")
        beam = int(self._select(t))
        self._pending = t
        return beam

    def observe(self, t: int, beam: int, reward: float) -> None:
        if self._pending != t:
            raise SequencingError(f"observe({t}) without a matching select")
        self._pending = None
        self._last = t
        self._observe(t, beam, reward)

    def reset(self) -> None:
        self._pending = None
        self._last = 0
        self._reset()

    def _select(self, t):
        raise NotImplementedError

    def _observe(self, t, beam, reward):
        pass

    def _reset(self):
        pass


class UniformRandom(Policy):
    name = "uniform"

    def __init__(self, num_beams: int, rng: np.random.Generator):
        super().__init__()
        if num_beams < 1:
            raise InvalidArgument("need at least one beam")
        self.num_beams = int(num_beams)
        self.rng = rng

    def _select(self, t):
        return self.rng.integers(self.num_beams)


class Ucb(Policy):
    """UCB with bonus ``sqrt(2 ln T / N_a)``; unpulled beams go first, in index order.

    Rewards enter in raw dBm.
    """

    name = "ucb"

    def __init__(self, num_beams: int, horizon: int, rng: np.random.Generator | None = None):
        super().__init__()
        if horizon < 1:
            raise InvalidArgument(f"horizon must be >= 1, got {horizon}")
        self.num_beams = int(num_beams)
        self.horizon = int(horizon)
        self._reset()

    def _reset(self):
        self.counts = np.zeros(self.num_beams, dtype=np.int64)
        self.sums = np.zeros(self.num_beams)

    @property
    def means(self) -> np.ndarray:
        with np.errstate(invalid="ignore", divide="ignore"):
            return self.sums / self.counts

    def index(self) -> np.ndarray:
        with np.errstate(divide="ignore"):
            bonus = np.sqrt(2 * math.log(self.horizon) / self.counts)
        return np.where(self.counts == 0, np.inf, self.means + bonus)

    def _select(self, t):
        unpulled = np.flatnonzero(self.counts == 0)
        if unpulled.size:
            return unpulled[0]
        return np.argmax(self.index())

    def _observe(self, t, beam, reward):
        self.counts[beam] += 1
        self.sums[beam] += reward


class PrEtc(Policy):
    """Explore uniformly for ``M`` steps, fit the channel once, then commit.

    If the run ends before step ``M`` the policy simply never commits.
    """

    name = "pr-etc"

    def __init__(self, space: CandidateSpace, M: int, rng: np.random.Generator):
        super().__init__()
        if int(M) != M or M < 1:
            raise InvalidArgument(f"exploration length must be a positive integer, got {M!r}")
        self.space = space
        self.M = int(M)
        self.rng = rng
        self._reset()

    def _reset(self):
        self.history = History(num_beams=self.space.num_beams)
        self.committed: int | None = None
        self.estimate: ChannelParams | None = None

    def _select(self, t):
        if self.committed is not None:
            return self.committed
        return self.rng.integers(self.space.num_beams)

    def _observe(self, t, beam, reward):
        if self.committed is not None:
            return
        self.history.append(t, beam, reward)
        if len(self.history) == self.M:
            best = int(np.argmin(batch_sse(self.space, self.history)))
            self.estimate = self.space.params(best)
            self.committed = self.space.best_beam_of(best)


class PrGreedy(Policy):
    """Refit the channel after every observation and play the estimated best beam.

    Parameters
    ----------
    space : CandidateSpace
        Candidate grid and beam patterns.
    rng : numpy.random.Generator
        Unused by the greedy rule; accepted so all policies build alike.
    initial : ChannelParams or int, optional
        Estimate used before the first observation. Defaults to the first
        candidate in enumeration order.
    """

    name = "pr-greedy"

    def __init__(self, space: CandidateSpace, rng: np.random.Generator | None = None, initial=None):
        super().__init__()
        self.space = space
        self.rng = rng
        if initial is None:
            initial = 0
        elif isinstance(initial, ChannelParams):
            initial = space.index_of(initial)
        if not 0 <= int(initial) < space.size:
            raise InvalidArgument(f"initial candidate {initial} outside the candidate space")
        self.initial_index = int(initial)
        self._initial_beam = space.best_beam_of(self.initial_index)
        self._reset()

    def _reset(self):
        self.estimator = GridEstimator(self.space)
        self._beam = self._initial_beam

    @property
    def estimate(self) -> ChannelParams:
        if self.estimator.num_observations == 0:
            return self.space.params(self.initial_index)
        return self.estimator.best

    def _select(self, t):
        return self._beam

    def _observe(self, t, beam, reward):
        self.estimator.update(t, beam, reward)
        self._beam = self.estimator.best_beam()


PolicyFactory = Callable[[np.random.Generator], Policy]


class Periodic(Policy):
    """Restart a fresh base policy every ``tau`` steps.

    Segment 0 draws from ``seed`` itself and segment ``n`` from the child
    stream ``(n,)``, so with ``tau >= T`` the actions equal those of a bare
    base policy seeded with ``seed``.
    """

    def __init__(self, factory: PolicyFactory, tau: int, seed):
        super().__init__()
        if int(tau) != tau or tau < 1:
            raise InvalidArgument(f"restart period must be a positive integer, got {tau!r}")
        self.factory = factory
        self.tau = int(tau)
        self.seed = as_seed_sequence(seed)
        self._reset()

    def _reset(self):
        self.segment = -1
        self.base: Policy | None = None
        self.segments_started = 0

    @property
    def name(self):
        base = self.base.name if self.base is not None else "base"
        return f"periodic-{base}"

    def segment_rng(self, n: int) -> np.random.Generator:
        return np.random.default_rng(self.seed if n == 0 else child_seed(self.seed, n))

    def _local(self, t):
        return t - self.segment * self.tau

    def _select(self, t):
        n = (t - 1) // self.tau
        if n != self.segment:
            self.segment = n
            self.base = self.factory(self.segment_rng(n))
            self.segments_started += 1
        return self.base.select(self._local(t))

    def _observe(self, t, beam, reward):
        self.base.observe(self._local(t), beam, reward)


def segment_lengths(horizon: int, tau: int) -> list[int]:
    """Lengths of the restart segments covering ``horizon`` steps."""
    if tau < 1:
        raise InvalidArgument("restart period must be >= 1")
    n = math.ceil(horizon / tau)
    return [min(tau, horizon - i * tau) for i in range(n)]


def pr_etc(space: CandidateSpace, M: int, rng) -> PrEtc:
    return PrEtc(space, M, rng)


def pr_greedy(space: CandidateSpace, rng=None, initial=None) -> PrGreedy:
    return PrGreedy(space, rng, initial)


def ucb(num_beams: int, horizon: int, rng=None) -> Ucb:
    return Ucb(num_beams, horizon, rng)


def uniform_random(num_beams: int, rng) -> UniformRandom:
    return UniformRandom(num_beams, rng)


def periodic(factory: PolicyFactory, tau: int, seed) -> Periodic:
    return Periodic(factory, tau, seed)
