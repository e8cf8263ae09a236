"""Far-field k-path channel: parameters, grids, and the dBm reward model."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping, Union

import numpy as np

from .array import Codebook, PatternMatrix, _readonly
from .errors import InvalidArgument

# Rewards for |h|^2 below POWER_FLOOR are clamped to REWARD_FLOOR_DBM so the
# log stays finite under exact destructive interference.
POWER_FLOOR = 1e-33
REWARD_FLOOR_DBM = -300.0

Patterns = Union[Codebook, PatternMatrix]


def _as_angle_array(values) -> np.ndarray:
    a = np.asarray(values, dtype=float).reshape(-1)
    if not np.all(np.isfinite(a)):
        raise InvalidArgument("angles must be finite")
    return a


@dataclass(frozen=True, eq=False)
class ChannelParams:
    """Angles (radians) and complex gains of the k propagation paths.

    Paths are stored sorted by angle, so two parameter sets that differ only
    by path order compare equal.
    """

    thetas: np.ndarray
    betas: np.ndarray

    def __post_init__(self):
        thetas = _as_angle_array(self.thetas)
        betas = np.asarray(self.betas, dtype=complex).reshape(-1)
        if thetas.size < 1 or thetas.size != betas.size:
            raise InvalidArgument(
                f"need k >= 1 paths with one gain each, got {thetas.size} angles and {betas.size} gains"
            )
        if not np.all(np.isfinite(betas)):
            raise InvalidArgument("path gains must be finite")
        order = np.lexsort((betas.imag, betas.real, thetas))
        object.__setattr__(self, "thetas", _readonly(thetas[order]))
        object.__setattr__(self, "betas", _readonly(betas[order]))

    @classmethod
    def from_degrees(cls, thetas_deg, betas) -> "ChannelParams":
        return cls(np.radians(np.asarray(thetas_deg, dtype=float)), betas)

    @property
    def k(self) -> int:
        return self.thetas.size

    def __eq__(self, other):
        if not isinstance(other, ChannelParams):
            return NotImplemented
        return np.array_equal(self.thetas, other.thetas) and np.array_equal(self.betas, other.betas)

    def __hash__(self):
        return hash((self.thetas.tobytes(), self.betas.tobytes()))

    def __repr__(self):
        degs = ", ".join(f"{d:.6g}" for d in np.degrees(self.thetas))
        gains = ", ".join(f"{b:.6g}" for b in self.betas)
        return f"ChannelParams(thetas_deg=[{degs}], betas=[{gains}])"


@dataclass(frozen=True, eq=False)
class ParameterGrid:
    """Finite candidate sets the estimator searches: angles (radians) and gains."""

    angles: np.ndarray
    gains: np.ndarray

    def __post_init__(self):
        angles = _as_angle_array(self.angles)
        gains = np.asarray(self.gains, dtype=complex).reshape(-1)
        if angles.size == 0 or gains.size == 0:
            raise InvalidArgument("angle and gain grids must be nonempty")
        if np.any(np.diff(angles) <= 0):
            raise InvalidArgument("angle grid must be strictly increasing")
        if np.unique(gains).size != gains.size:
            raise InvalidArgument("gain grid has duplicate entries")
        if not np.all(np.isfinite(gains)):
            raise InvalidArgument("gain grid must be finite")
        object.__setattr__(self, "angles", _readonly(angles))
        object.__setattr__(self, "gains", _readonly(gains))

    @classmethod
    def from_degrees(cls, angles_deg, gains) -> "ParameterGrid":
        return cls(np.radians(np.asarray(angles_deg, dtype=float)), gains)

    @property
    def angles_deg(self) -> np.ndarray:
        return np.degrees(self.angles)

    @property
    def gains_are_positive_real(self) -> bool:
        return bool(np.all(self.gains.imag == 0) and np.all(self.gains.real > 0))

    def __len__(self):
        return self.angles.size * self.gains.size


@dataclass(frozen=True)
class NoiseModel:
    """Additive zero-mean Gaussian reward noise with std ``sigma`` (dB)."""

    sigma: float = 0.0

    def __post_init__(self):
        if not (math.isfinite(self.sigma) and self.sigma >= 0):
            raise InvalidArgument(f"noise sigma must be >= 0, got {self.sigma!r}")


def to_dbm(h):
    """``30 + 10 log10 |h|^2`` with the reward floor applied elementwise."""
    h = np.asarray(h, dtype=complex)
    power = h.real * h.real + h.imag * h.imag
    with np.errstate(divide="ignore"):
        r = 30.0 + 10.0 * np.log10(power)
    return np.where(power < POWER_FLOOR, REWARD_FLOOR_DBM, r)


def path_gains(params: ChannelParams, patterns: Patterns) -> np.ndarray:
    """K x k table of single-path gains ``h_a(theta_i)``."""
    if isinstance(patterns, PatternMatrix):
        return patterns.entries[:, patterns.column_indices(params.thetas)]
    return patterns.gains(params.thetas)


def combine_paths(betas, gains: np.ndarray) -> np.ndarray:
    # Fixed left-to-right accumulation; the estimator relies on this order.
    h = np.zeros(gains.shape[:-1], dtype=complex)
    for i in range(gains.shape[-1]):
        h = h + betas[..., i] * gains[..., i]
    return h


def channel_responses(params: ChannelParams, patterns: Patterns) -> np.ndarray:
    """Length-K vector of ``sum_i beta_i h_a(theta_i)``."""
    return combine_paths(params.betas, path_gains(params, patterns))


def _check_beam(beam, K):
    if int(beam) != beam or not 0 <= beam < K:
        raise InvalidArgument(f"beam index {beam!r} out of range [0, {K})")
    return int(beam)


def channel_response(params: ChannelParams, beam: int, patterns: Patterns) -> complex:
    responses = channel_responses(params, patterns)
    return complex(responses[_check_beam(beam, responses.size)])


def expected_rewards(params: ChannelParams, patterns: Patterns) -> np.ndarray:
    """Noiseless RSS (dBm) of every beam."""
    return to_dbm(channel_responses(params, patterns))


def expected_reward(params: ChannelParams, beam: int, patterns: Patterns) -> float:
    rewards = expected_rewards(params, patterns)
    return float(rewards[_check_beam(beam, rewards.size)])


def sample_reward(params: ChannelParams, beam: int, patterns: Patterns,
                  noise: NoiseModel, rng: np.random.Generator) -> float:
    """One noisy RSS observation. No random draw is consumed when sigma is 0."""
    r = expected_reward(params, beam, patterns)
    if noise.sigma == 0:
        return r
    return r + float(rng.normal(0.0, noise.sigma))


def best_beam(params: ChannelParams, patterns: Patterns) -> int:
    """Index of the beam with the highest expected reward (lowest index on ties)."""
    return int(np.argmax(expected_rewards(params, patterns)))


PRESETS = {
    # 2 degree steps over the full circle; gains e^(-10 + 0.5 i)
    "deepmimo-like": ({"start": 0.0, "step": 2.0, "count": 181},
                      {"log_start": -10.0, "log_step": 0.5, "count": 21}),
    "deepsense-like": ({"start": 0.0, "step": 2.0, "count": 111},
                       {"log_start": -3.0, "log_step": 0.2, "count": 14}),
}


def _expand_angles(spec) -> np.ndarray:
    if isinstance(spec, Mapping):
        try:
            start, step, count = float(spec["start"]), float(spec["step"]), int(spec["count"])
        except KeyError as exc:
            raise InvalidArgument(f"angle descriptor missing {exc.args[0]!r}") from None
        return start + step * np.arange(count)
    return np.asarray(list(spec), dtype=float)


def _expand_gains(spec) -> np.ndarray:
    if isinstance(spec, Mapping):
        count = int(spec.get("count", 0))
        if "log_start" in spec:
            return np.exp(float(spec["log_start"]) + float(spec["log_step"]) * np.arange(count))
        if "start" in spec:
            return float(spec["start"]) + float(spec["step"]) * np.arange(count)
        raise InvalidArgument("gain descriptor needs log_start/log_step or start/step")
    return np.asarray(list(spec), dtype=complex)


def make_default_grids(spec) -> ParameterGrid:
    """Build a :class:`ParameterGrid` from a preset name or an explicit spec.

    Parameters
    ----------
    spec : str or mapping
        ``"deepmimo-like"``, ``"deepsense-like"``, or a mapping with
        ``angles`` (degree list or ``{start, step, count}``), ``gains``
        (list or ``{log_start, log_step, count}`` / ``{start, step, count}``)
        and optionally ``phases_deg``, a list of phases every gain is
        additionally rotated by.
    """
    if isinstance(spec, str):
        if spec not in PRESETS:
            raise InvalidArgument(f"unknown grid preset {spec!r}; choose from {sorted(PRESETS)}")
        angle_spec, gain_spec = PRESETS[spec]
        spec = {"angles": angle_spec, "gains": gain_spec}
    if not spec or "angles" not in spec or "gains" not in spec:
        raise InvalidArgument("grid spec needs both 'angles' and 'gains'")
    angles = _expand_angles(spec["angles"])
    gains = _expand_gains(spec["gains"])
    phases = spec.get("phases_deg")
    if phases is not None:
        rot = np.exp(1j * np.radians(np.asarray(list(phases), dtype=float)))
        gains = (gains[:, None] * rot[None, :]).reshape(-1)
    if angles.size == 0 or gains.size == 0:
        raise InvalidArgument("grid spec produced an empty grid")
    return ParameterGrid.from_degrees(angles, gains)
