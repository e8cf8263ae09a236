"""Regret, normalized regret and cross-repetition aggregation."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateEnvironment, InvalidArgument

# normalizers at or below this are treated as a flat reward function
DEGENERATE_EPS = 1e-9


@dataclass(frozen=True, eq=False)
class RegretTrace:
    """Per-step regret bookkeeping for one run.

    ``norm[t-1]`` is the cumulative regret up to step t divided by the
    uniform-random policy's expected regret over the same t steps; it is NaN
    where that normalizer vanishes.
    """

    actions: np.ndarray
    chosen: np.ndarray
    oracle_max: np.ndarray
    oracle_mean: np.ndarray
    inst: np.ndarray
    cum: np.ndarray
    norm: np.ndarray
    stationary: bool
    meta: dict = field(default_factory=dict)

    def __len__(self):
        return self.actions.size


def regret_trace(actions, env, meta: dict | None = None) -> RegretTrace:
    """Regret of an action sequence; ``actions[t-1]`` is the beam played at step t."""
    actions = np.asarray(actions, dtype=np.intp).reshape(-1)
    T = actions.size
    if env.horizon is not None and T > env.horizon:
        raise InvalidArgument(f"{T} actions exceed the environment horizon {env.horizon}")
    if T and (actions.min() < 0 or actions.max() >= env.num_beams):
        raise InvalidArgument("action outside the codebook")
    chosen = np.empty(T)
    best = np.empty(T)
    mean = np.empty(T)
    for i, a in enumerate(actions):
        r = env.oracle_rewards(i)
        chosen[i] = r[a]
        best[i] = r.max()
        mean[i] = r.mean()
    inst = best - chosen
    cum = np.cumsum(inst)
    if env.stationary:
        denom = (best - mean) * np.arange(1, T + 1)
    else:
        denom = np.cumsum(best - mean)
    with np.errstate(divide="ignore", invalid="ignore"):
        norm = np.where(denom > DEGENERATE_EPS, cum / denom, np.nan)
    return RegretTrace(actions, chosen, best, mean, inst, cum, norm, bool(env.stationary), dict(meta or {}))


def _horizon(trace: RegretTrace, T):
    T = len(trace) if T is None else int(T)
    if not 1 <= T <= len(trace):
        raise InvalidArgument(f"horizon {T} outside [1, {len(trace)}]")
    return T


def normalized_regret(trace: RegretTrace, env=None, T: int | None = None) -> float:
    """Static regret over ``T * (max_a R - mean_a R)``."""
    if env is not None and not env.stationary:
        raise InvalidArgument("normalized static regret needs a stationary environment")
    if not trace.stationary:
        raise InvalidArgument("trace was not recorded on a stationary environment")
    T = _horizon(trace, T)
    denom = (trace.oracle_max[0] - trace.oracle_mean[0]) * T
    if denom <= DEGENERATE_EPS:
        raise DegenerateEnvironment("all beams have the same expected reward")
    return float(trace.cum[T - 1] / denom)


def normalized_dynamic_regret(trace: RegretTrace, env=None, T: int | None = None) -> float:
    """Dynamic regret over the summed per-step gap between best and average beam."""
    T = _horizon(trace, T)
    denom = float(np.sum(trace.oracle_max[:T] - trace.oracle_mean[:T]))
    if denom <= DEGENERATE_EPS:
        raise DegenerateEnvironment("all beams have the same expected reward at every step")
    return float(trace.cum[T - 1] / denom)


@dataclass(frozen=True)
class AggregateSummary:
    mean: np.ndarray
    stderr: np.ndarray
    count: int

    @property
    def final_mean(self) -> float:
        return float(self.mean[-1])

    @property
    def final_stderr(self) -> float:
        return float(self.stderr[-1])


def aggregate(series) -> AggregateSummary:
    """Per-step mean and standard error (sample std / sqrt(n)) across runs.

    ``series`` holds equal-length arrays or :class:`RegretTrace` objects, in
    which case their normalized regret is aggregated.
    """
    rows = [s.norm if isinstance(s, RegretTrace) else np.asarray(s, dtype=float) for s in series]
    if not rows:
        raise InvalidArgument("cannot aggregate an empty set of runs")
    if len({r.shape for r in rows}) != 1:
        raise InvalidArgument("all runs must have the same length")
    data = np.vstack(rows)
    n = data.shape[0]
    mean = data.mean(axis=0)
    if n == 1:
        stderr = np.zeros_like(mean)
    else:
        stderr = data.std(axis=0, ddof=1) / np.sqrt(n)
    return AggregateSummary(mean, stderr, n)
