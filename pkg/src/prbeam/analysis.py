"""Checks of the regret analysis' assumptions on a concrete instance."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .channel import ChannelParams, ParameterGrid, Patterns, expected_rewards
from .errors import InvalidArgument
from .estimation import CandidateSpace

DEFAULT_LATTICE = np.concatenate([[0.0], np.logspace(-3, 6, 91)])


@dataclass(frozen=True)
class AnalysisConfig:
    r_max: float = 70.0
    delta: float = 0.1
    trials: int = 1000

    def __post_init__(self):
        if not self.r_max > 0:
            raise InvalidArgument("r_max must be positive")
        if not 0 < self.delta < 1:
            raise InvalidArgument("delta must lie in (0, 1)")
        if self.trials < 1:
            raise InvalidArgument("trials must be >= 1")


@dataclass(frozen=True)
class AssumptionFit:
    """Fitted pair of constants and the tightest candidate under them.

    ``worst_slack`` is the smallest margin (RHS minus LHS, or LHS minus RHS
    for the Lipschitz bound) over the grid candidates other than the truth;
    it is negative only when the fit is infeasible.
    """

    first: float
    second: float
    feasible: bool
    worst_candidate: ChannelParams | None
    worst_slack: float


@dataclass(frozen=True, eq=False)
class _Landscape:
    space: CandidateSpace
    angle_dist: np.ndarray  # ||theta* - theta||
    log_gain_dist: np.ndarray  # ||log beta* - log beta||
    gaps: np.ndarray  # C x K, R(truth) - R(candidate)
    truth_index: int


def _landscape(params: ChannelParams, grids: ParameterGrid, patterns: Patterns) -> _Landscape:
    if not grids.gains_are_positive_real:
        raise InvalidArgument("assumption fitting needs a real positive gain grid")
    if np.any(params.betas.imag != 0) or np.any(params.betas.real <= 0):
        raise InvalidArgument("assumption fitting needs real positive true gains")
    space = CandidateSpace(grids, params.k, patterns)
    truth_index = space.index_of(params)  # raises on off-grid truth
    truth = expected_rewards(params, space.patterns)
    gaps = truth[None, :] - space.prediction_table()
    th = grids.angles[space.theta_idx]
    lb = np.log(grids.gains.real[space.beta_idx])
    angle_dist = np.sqrt(np.sum((params.thetas[None, :] - th) ** 2, axis=1))
    log_gain_dist = np.sqrt(np.sum((np.log(params.betas.real)[None, :] - lb) ** 2, axis=1))
    return _Landscape(space, angle_dist, log_gain_dist, gaps, truth_index)


def _tightest(slack, land) -> int:
    # the truth meets every bound with equality, so skip it when there is a choice
    if slack.size == 1:
        return 0
    s = slack.copy()
    s[land.truth_index] = np.inf
    return int(np.argmin(s))


def fit_assumption2(params: ChannelParams, grids: ParameterGrid, patterns: Patterns,
                    lattice=DEFAULT_LATTICE) -> AssumptionFit:
    """Largest ``C1 + C2`` on ``lattice`` such that for every grid candidate

        C1 ||theta* - theta||^2 + C2 ||log beta* - log beta||^2
            <= mean_a (R_a(truth) - R_a(candidate))^2.

    ``feasible`` is False when only ``(0, 0)`` satisfies the bound.
    """
    land = _landscape(params, grids, patterns)
    x = land.angle_dist ** 2
    y = land.log_gain_dist ** 2
    z = np.mean(land.gaps ** 2, axis=1)
    lattice = np.asarray(lattice, dtype=float)
    best = (0.0, 0.0)
    for c1 in lattice:
        ok = np.all(c1 * x[None, :] + lattice[:, None] * y[None, :] <= z[None, :], axis=1)
        if not ok.any():
            continue
        c2 = lattice[ok].max()
        if c1 + c2 > best[0] + best[1]:
            best = (float(c1), float(c2))
    feasible = best[0] + best[1] > 0
    probe = best if feasible else (lattice[lattice > 0].min(),) * 2
    slack = z - (probe[0] * x + probe[1] * y)
    worst = _tightest(slack, land)
    return AssumptionFit(best[0], best[1], feasible, land.space.params(worst), float(slack[worst]))


def fit_assumption3(params: ChannelParams, grids: ParameterGrid, patterns: Patterns,
                    lattice=DEFAULT_LATTICE) -> AssumptionFit:
    """Smallest ``C3 + C4`` on ``lattice`` such that for every candidate and beam

        |R_a(truth) - R_a(candidate)| <= C3 ||theta* - theta|| + C4 ||log beta* - log beta||.
    """
    land = _landscape(params, grids, patterns)
    u = land.angle_dist
    v = land.log_gain_dist
    m = np.max(np.abs(land.gaps), axis=1)
    lattice = np.asarray(lattice, dtype=float)
    best = None
    for c3 in lattice:
        ok = np.all(c3 * u[None, :] + lattice[:, None] * v[None, :] >= m[None, :], axis=1)
        if not ok.any():
            continue
        c4 = lattice[ok].min()
        if best is None or c3 + c4 < best[0] + best[1]:
            best = (float(c3), float(c4))
    feasible = best is not None
    probe = best if feasible else (lattice.max(),) * 2
    slack = probe[0] * u + probe[1] * v - m
    worst = _tightest(slack, land)
    c3, c4 = probe if feasible else (math.inf, math.inf)
    return AssumptionFit(c3, c4, feasible, land.space.params(worst), float(slack[worst]))


def theoretical_M(T: int, k: int, sigma: float, n_gains: float, n_angles: float) -> int:
    """Exploration length ``ceil(T^(2/3) (k sigma^2 (ln|B| + ln|Theta|))^(1/3))`` clamped to [1, T]."""
    if T < 1 or k < 1 or sigma < 0 or n_gains <= 0 or n_angles <= 0:
        raise InvalidArgument("theoretical_M needs positive arguments")
    inner = k * sigma ** 2 * (math.log(n_gains) + math.log(n_angles))
    raw = T ** (2 / 3) * max(inner, 0.0) ** (1 / 3)
    return int(min(max(math.ceil(raw), 1), T))


def concentration_slack(k: int, sigma: float, n_gains: int, n_angles: int, delta: float) -> float:
    """``4 k sigma^2 log(|B| |Theta| / delta)``."""
    return 4 * k * sigma ** 2 * math.log(n_gains * n_angles / delta)


def concentration_check(params: ChannelParams, patterns: Patterns, grids: ParameterGrid, k: int,
                        M: int, delta: float, sigma: float, trials: int,
                        rng: np.random.Generator) -> float:
    """Fraction of Monte-Carlo datasets on which the SSE/data-norm bounds hold.

    Each trial draws ``M`` uniform beams with noisy rewards from ``params``
    and checks, for every grid candidate at once,

        0.5 D - L <= SSE(candidate) - SSE(truth) <= 1.5 D + L,

    where ``D`` is the squared data norm of the reward difference and ``L``
    is :func:`concentration_slack`.
    """
    if trials < 1:
        raise InvalidArgument("need at least one trial")
    if M < 1:
        raise InvalidArgument("need at least one sample per trial")
    space = CandidateSpace(grids, k, patterns)
    truth = expected_rewards(params, patterns)
    table = space.prediction_table()
    slack = concentration_slack(k, sigma, grids.gains.size, grids.angles.size, delta)
    K = space.num_beams
    hits = 0
    for _ in range(trials):
        beams = rng.integers(K, size=M)
        noise = rng.normal(0.0, sigma, size=M) if sigma > 0 else np.zeros(M)
        r = truth[beams] + noise
        pred = table[:, beams]
        sse_c = np.sum((pred - r) ** 2, axis=1)
        sse_true = np.sum((truth[beams] - r) ** 2)
        dnorm = np.sum((pred - truth[beams]) ** 2, axis=1)
        diff = sse_c - sse_true
        if np.all(diff >= 0.5 * dnorm - slack) and np.all(diff <= 1.5 * dnorm + slack):
            hits += 1
    return hits / trials
