"""Physics-informed parametric bandits for mmWave beam alignment."""

from .array import (ArrayGeometry, Codebook, PatternMatrix, array_response, beam_gain, dft_codebook,
                    load_pattern_csv, pattern_matrix, write_pattern_csv)
from .channel import (ChannelParams, NoiseModel, ParameterGrid, best_beam, channel_response,
                      expected_reward, expected_rewards, make_default_grids, sample_reward)
from .environment import StationaryEnv, Trace, TraceEnv, build_trace_env
from .estimation import CandidateSpace, GridEstimator, History, mle_fit, predict_best_beam, sse
from .metrics import aggregate, normalized_dynamic_regret, normalized_regret, regret_trace
from .policies import Periodic, PrEtc, PrGreedy, Ucb, UniformRandom

__version__ = "0.1.0"
