"""Grid-search maximum-likelihood channel estimation.

Under Gaussian reward noise the likelihood is maximized by the candidate with
the smallest sum of squared errors (SSE) between predicted and observed RSS,
so everything here is least squares over a finite candidate set.
"""

from __future__ import annotations

import math
from itertools import combinations_with_replacement, product
from typing import Iterable, NamedTuple

import numpy as np

from .array import Codebook, PatternMatrix, pattern_matrix
from .channel import (ChannelParams, ParameterGrid, Patterns, best_beam, combine_paths,
                      expected_reward, to_dbm)
from .errors import InsufficientData, InvalidArgument, SequencingError

# Above this many (candidate, beam) prediction entries the per-beam cache is
# skipped and predictions are recomputed in chunks.
CACHE_LIMIT = 20_000_000
CHUNK = 1 << 20


class Observation(NamedTuple):
    step: int
    beam: int
    reward: float


class History:
    """Ordered (step, beam, reward) observations with strictly increasing steps."""

    def __init__(self, observations: Iterable = (), num_beams: int | None = None):
        self.num_beams = num_beams
        self._obs: list[Observation] = []
        for obs in observations:
            self.append(*obs)

    def append(self, step: int, beam: int, reward: float) -> Observation:
        if self._obs and step <= self._obs[-1].step:
            raise SequencingError(f"step {step} does not follow step {self._obs[-1].step}")
        if beam < 0 or (self.num_beams is not None and beam >= self.num_beams):
            raise InvalidArgument(f"beam index {beam} out of range")
        if not math.isfinite(reward):
            raise InvalidArgument(f"reward must be finite, got {reward!r}")
        obs = Observation(int(step), int(beam), float(reward))
        self._obs.append(obs)
        return obs

    def __len__(self):
        return len(self._obs)

    def __iter__(self):
        return iter(self._obs)

    def __getitem__(self, i):
        return self._obs[i]

    def __repr__(self):
        return f"History({len(self)} observations)"

    @property
    def beams(self) -> np.ndarray:
        return np.array([o.beam for o in self._obs], dtype=np.intp)

    @property
    def rewards(self) -> np.ndarray:
        return np.array([o.reward for o in self._obs], dtype=float)


def _enumerate(n_angles: int, n_gains: int, k: int):
    # Sorted angle tuples (repeats allowed) outermost, gain tuples innermost,
    # both lexicographic. Where angles repeat, the gain indices of the tied
    # paths must be nondecreasing, otherwise two candidates would be path
    # permutations of each other.
    th = np.array(list(combinations_with_replacement(range(n_angles), k)), dtype=np.int32).reshape(-1, k)
    bt = np.array(list(product(range(n_gains), repeat=k)), dtype=np.int32).reshape(-1, k)
    theta_idx = np.repeat(th, bt.shape[0], axis=0)
    beta_idx = np.tile(bt, (th.shape[0], 1))
    if k > 1:
        tied = theta_idx[:, 1:] == theta_idx[:, :-1]
        bad = np.any(tied & (beta_idx[:, 1:] < beta_idx[:, :-1]), axis=1)
        theta_idx, beta_idx = theta_idx[~bad], beta_idx[~bad]
    return theta_idx, beta_idx


class CandidateSpace:
    """Every candidate ``(thetas, betas)`` in a grid, with cached predictions.

    Parameters
    ----------
    grids : ParameterGrid
        Candidate angles and gains.
    k : int
        Number of paths in the model.
    patterns : Codebook or PatternMatrix
        Beam patterns. A codebook is sampled once on ``grids.angles``.
    """

    def __init__(self, grids: ParameterGrid, k: int, patterns: Patterns):
        if int(k) != k or k < 1:
            raise InvalidArgument(f"path count k must be a positive integer, got {k!r}")
        self.grids = grids
        self.k = int(k)
        if isinstance(patterns, Codebook):
            patterns = pattern_matrix(patterns, grids.angles)
        elif not patterns.matches(grids.angles):
            patterns = PatternMatrix(patterns.entries[:, patterns.column_indices(grids.angles)], grids.angles)
        self.patterns = patterns
        self.theta_idx, self.beta_idx = _enumerate(grids.angles.size, grids.gains.size, self.k)
        self.theta_idx.setflags(write=False)
        self.beta_idx.setflags(write=False)
        self._cache_ok = self.size * self.num_beams <= CACHE_LIMIT
        self._cache: dict[int, np.ndarray] = {}

    @property
    def size(self) -> int:
        return self.theta_idx.shape[0]

    @property
    def num_beams(self) -> int:
        return self.patterns.num_beams

    def __len__(self):
        return self.size

    def _column(self, beam: int, sl=slice(None)) -> np.ndarray:
        gains = self.patterns.entries[beam][self.theta_idx[sl]]
        betas = self.grids.gains[self.beta_idx[sl]]
        return to_dbm(combine_paths(betas, gains))

    def predictions(self, beam: int) -> np.ndarray:
        """Predicted RSS of ``beam`` under every candidate (read-only)."""
        beam = int(beam)
        if not 0 <= beam < self.num_beams:
            raise InvalidArgument(f"beam index {beam} out of range [0, {self.num_beams})")
        col = self._cache.get(beam)
        if col is not None:
            return col
        if self.size <= CHUNK:
            col = self._column(beam)
        else:
            col = np.concatenate([self._column(beam, slice(i, i + CHUNK))
                                  for i in range(0, self.size, CHUNK)])
        col.setflags(write=False)
        if self._cache_ok:
            self._cache[beam] = col
        return col

    def prediction_table(self) -> np.ndarray:
        """C x K matrix of predicted rewards; only sensible for small spaces."""
        return np.stack([self.predictions(a) for a in range(self.num_beams)], axis=1)

    def rewards_of(self, index: int) -> np.ndarray:
        """Predicted RSS of every beam under one candidate."""
        gains = self.patterns.entries[:, self.theta_idx[index]]
        return to_dbm(combine_paths(self.grids.gains[self.beta_idx[index]], gains))

    def best_beam_of(self, index: int) -> int:
        return int(np.argmax(self.rewards_of(index)))

    def params(self, index: int) -> ChannelParams:
        index = int(index)
        return ChannelParams(self.grids.angles[self.theta_idx[index]],
                             self.grids.gains[self.beta_idx[index]])

    def index_of(self, params: ChannelParams) -> int:
        """Enumeration index of an on-grid parameter set."""
        if params.k != self.k:
            raise InvalidArgument(f"expected {self.k} paths, got {params.k}")
        ti = self.patterns.column_indices(params.thetas)
        bi = []
        for b in params.betas:
            hit = np.flatnonzero(self.grids.gains == b)
            if hit.size == 0:
                hit = np.flatnonzero(np.isclose(self.grids.gains, b, rtol=1e-12, atol=0))
            if hit.size == 0:
                raise InvalidArgument(f"gain {b} is not on the gain grid")
            bi.append(int(hit[0]))
        pairs = sorted(zip(ti.tolist(), bi))
        ti = np.array([p[0] for p in pairs])
        bi = np.array([p[1] for p in pairs])
        match = np.flatnonzero(np.all(self.theta_idx == ti, axis=1) & np.all(self.beta_idx == bi, axis=1))
        return int(match[0])


def sse(candidate: ChannelParams, history: History, patterns: Patterns) -> float:
    """Sum of squared errors of one candidate over a history."""
    total = 0.0
    for obs in history:
        d = expected_reward(candidate, obs.beam, patterns) - obs.reward
        total += d * d
    return total


def batch_sse(space: CandidateSpace, history: History) -> np.ndarray:
    """SSE of every candidate, accumulated in observation order."""
    total = np.zeros(space.size)
    for obs in history:
        d = space.predictions(obs.beam) - obs.reward
        total = total + d * d
    return total


def mle_fit(history: History, grids: ParameterGrid | None = None, k: int | None = None,
            patterns: Patterns | None = None, *, space: CandidateSpace | None = None) -> ChannelParams:
    """Least-squares (maximum-likelihood) estimate over the candidate grid.

    Ties go to the first candidate in enumeration order. Pass a prebuilt
    ``space`` to skip rebuilding the candidate table.
    """
    if len(history) == 0:
        raise InsufficientData("cannot fit channel parameters to an empty history")
    if space is None:
        space = CandidateSpace(grids, k, patterns)
    return space.params(int(np.argmin(batch_sse(space, history))))


class GridEstimator:
    """Running SSE of every candidate, updated one observation at a time.

    After any sequence of :meth:`update` calls, :attr:`best_index` equals the
    batch :func:`mle_fit` result on the same observations, tie-breaks
    included.
    """

    def __init__(self, space: CandidateSpace):
        self.space = space
        self.sse = np.zeros(space.size)
        self.history = History(num_beams=space.num_beams)

    @property
    def num_observations(self) -> int:
        return len(self.history)

    def update(self, step: int, beam: int, reward: float) -> "GridEstimator":
        self.history.append(step, beam, reward)
        d = self.space.predictions(beam) - float(reward)
        self.sse = self.sse + d * d
        return self

    @property
    def best_index(self) -> int:
        if not self.history:
            raise InsufficientData("no observations yet")
        return int(np.argmin(self.sse))

    @property
    def best(self) -> ChannelParams:
        return self.space.params(self.best_index)

    def best_beam(self) -> int:
        return self.space.best_beam_of(self.best_index)

    def reset(self):
        self.sse = np.zeros(self.space.size)
        self.history = History(num_beams=self.space.num_beams)


def incremental_update(state: GridEstimator, obs) -> GridEstimator:
    return state.update(*obs)


def predict_best_beam(estimate, patterns: Patterns | None = None) -> int:
    """Best beam under an estimate: a fitted :class:`GridEstimator` or explicit params."""
    if isinstance(estimate, GridEstimator):
        return estimate.best_beam()
    if estimate is None:
        raise InsufficientData("no estimate available")
    return best_beam(estimate, patterns)
