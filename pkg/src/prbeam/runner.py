"""Experiment orchestration: repetitions x policies, regret traces, CSV output."""

from __future__ import annotations

import csv
import logging
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np

from .array import ArrayGeometry, Codebook, dft_codebook, load_pattern_csv
from .analysis import theoretical_M
from .channel import ChannelParams, NoiseModel, ParameterGrid, make_default_grids
from .config import PolicySpec, RunConfig, SyntheticSpec, TraceSpec
from .environment import StationaryEnv, Trace, TraceEnv, ticks_needed
from .errors import ConfigError, HorizonExceeded, TraceFormatError
from .estimation import CandidateSpace
from .metrics import AggregateSummary, RegretTrace, aggregate, regret_trace
from .policies import Periodic, Policy, PrEtc, PrGreedy, Ucb, UniformRandom
from .seeding import child_seed, name_key, rng_for

log = logging.getLogger(__name__)

CSV_COLUMNS = ("rep", "step", "policy", "beam", "reward_dbm", "inst_regret", "cum_regret", "norm_regret")
SUMMARY_COLUMNS = ("policy", "repetitions", "horizon", "final_norm_regret_mean",
                   "final_norm_regret_stderr", "final_cum_regret_mean", "ms_per_step")
INSTANCE_KEY = name_key("__instance__")


# ---------------------------------------------------------------- trace IO

def load_trace(path) -> Trace:
    """Parse a trace CSV with header ``tick,beam_0,...,beam_{K-1}``."""
    path = Path(path)
    try:
        fh = path.open(newline="")
    except OSError as exc:
        raise TraceFormatError(f"{path}: {exc.strerror}") from None
    with fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise TraceFormatError(f"{path}: empty file")
        header = [h.strip() for h in header]
        if len(header) < 2 or header[0] != "tick":
            raise TraceFormatError(f"{path}: header must start with 'tick' followed by beam columns")
        for a, name in enumerate(header[1:]):
            if name != f"beam_{a}":
                raise TraceFormatError(f"{path}: column {a + 2} is {name!r}, expected 'beam_{a}'")
        ticks, rows = [], []
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != len(header):
                raise TraceFormatError(f"{path}:{lineno}: expected {len(header)} cells, got {len(row)}")
            try:
                tick = int(row[0])
            except ValueError:
                raise TraceFormatError(f"{path}:{lineno}: column 'tick' has non-integer value {row[0]!r}") from None
            if ticks and tick <= ticks[-1]:
                raise TraceFormatError(f"{path}:{lineno}: tick {tick} is not increasing")
            vals = []
            for name, cell in zip(header[1:], row[1:]):
                try:
                    v = float(cell)
                except ValueError:
                    raise TraceFormatError(f"{path}:{lineno}: column {name!r} has non-numeric value {cell!r}") from None
                if not math.isfinite(v):
                    raise TraceFormatError(f"{path}:{lineno}: column {name!r} is not finite")
                vals.append(v)
            ticks.append(tick)
            rows.append(vals)
    if not rows:
        raise TraceFormatError(f"{path}: no data rows")
    return Trace(np.array(rows), np.array(ticks))


def write_trace(path, trace: Trace) -> None:
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["tick"] + [f"beam_{a}" for a in range(trace.num_beams)])
        for tick, row in zip(trace.ticks, trace.rss):
            w.writerow([int(tick)] + [repr(float(v)) for v in row])


# ---------------------------------------------------------------- policies

@dataclass
class PolicyContext:
    """Everything a policy builder may need, shared across repetitions."""

    codebook: Codebook | None
    grids: ParameterGrid
    num_beams: int
    env_sigma: float
    _spaces: dict = field(default_factory=dict)

    def space(self, k: int) -> CandidateSpace:
        if self.codebook is None:
            raise ConfigError("physics-informed policies need a codebook ([array] section)")
        if k not in self._spaces:
            self._spaces[k] = CandidateSpace(self.grids, k, self.codebook)
        return self._spaces[k]


PolicyBuilder = Callable[[PolicyContext, PolicySpec, int, np.random.Generator], Policy]


def _exploration_length(ctx, spec: PolicySpec, horizon: int) -> int:
    if spec.M != "auto":
        return int(spec.M)
    sigma = spec.sigma if spec.sigma is not None else ctx.env_sigma
    return theoretical_M(horizon, spec.k, sigma, ctx.grids.gains.size, ctx.grids.angles.size)


def _build_pr_etc(ctx, spec, horizon, rng):
    return PrEtc(ctx.space(spec.k), _exploration_length(ctx, spec, horizon), rng)


def _build_pr_greedy(ctx, spec, horizon, rng):
    initial = None
    if spec.initial_thetas_deg is not None:
        gains = spec.initial_gains or (ctx.grids.gains[0],) * len(spec.initial_thetas_deg)
        initial = ChannelParams.from_degrees(spec.initial_thetas_deg, gains)
    return PrGreedy(ctx.space(spec.k), rng, initial)


POLICY_BUILDERS: dict[str, PolicyBuilder] = {
    "uniform": lambda ctx, spec, horizon, rng: UniformRandom(ctx.num_beams, rng),
    "ucb": lambda ctx, spec, horizon, rng: Ucb(ctx.num_beams, horizon, rng),
    "pr-etc": _build_pr_etc,
    "pr-greedy": _build_pr_greedy,
}


def register_policy(name: str, builder: PolicyBuilder) -> None:
    """Make an external policy available to configs under ``name``."""
    POLICY_BUILDERS[name] = builder


def build_policy(ctx: PolicyContext, spec: PolicySpec, horizon: int, seed) -> Policy:
    """Instantiate ``spec``; periodic wrappers restart the base every ``tau`` steps."""
    try:
        builder = POLICY_BUILDERS[spec.kind]
    except KeyError:
        raise ConfigError(f"unknown policy type {spec.kind!r}; known: {sorted(POLICY_BUILDERS)}") from None
    if spec.tau is None:
        return builder(ctx, spec, horizon, np.random.default_rng(seed))
    seg_horizon = min(spec.tau, horizon)
    return Periodic(lambda rng: builder(ctx, spec, seg_horizon, rng), spec.tau, seed)


# ---------------------------------------------------------------- setup

def build_codebook(config: RunConfig) -> Codebook:
    a = config.array
    if a.pattern_csv is not None:
        return load_pattern_csv(a.pattern_csv)
    return dft_codebook(ArrayGeometry.ula(a.num_elements, a.wavelength, a.spacing), a.num_beams)


def build_context(config: RunConfig) -> "_Setup":
    grids = make_default_grids(config.grid)
    needs_codebook = isinstance(config.env, SyntheticSpec) or any(
        p.kind in ("pr-etc", "pr-greedy") for p in config.policies)
    codebook = build_codebook(config) if needs_codebook else None
    trace = None
    if isinstance(config.env, TraceSpec):
        trace = load_trace(config.env.path)
        K = trace.num_beams
        if codebook is not None and codebook.num_beams != K:
            raise ConfigError(f"trace has {K} beams but the codebook has {codebook.num_beams}")
        sigma = config.env.sigma
    else:
        K = codebook.num_beams
        sigma = config.env.sigma
    for spec in config.policies:
        if spec.kind in ("pr-etc",) and spec.M != "auto" and spec.M > config.horizon:
            log.warning("policy %s: exploration length M=%s exceeds horizon %s; it will never commit",
                        spec.label, spec.M, config.horizon)
    return _Setup(config, PolicyContext(codebook, grids, K, sigma), trace)


@dataclass
class _Setup:
    config: RunConfig
    ctx: PolicyContext
    trace: Trace | None

    def environment(self, rep: int):
        cfg = self.config
        rng = rng_for(cfg.seed, rep, INSTANCE_KEY)
        env_spec = cfg.env
        if isinstance(env_spec, TraceSpec):
            trace = self.trace
            need = ticks_needed(cfg.horizon, env_spec.factor)
            if need > trace.num_ticks:
                raise HorizonExceeded(
                    f"horizon {cfg.horizon} needs {need} ticks at factor {env_spec.factor}; trace has {trace.num_ticks}")
            start = int(rng.integers(trace.num_ticks - need + 1)) if env_spec.random_window else 0
            return TraceEnv(trace.window(start, need), env_spec.factor, NoiseModel(env_spec.sigma))
        grids = self.ctx.grids
        if env_spec.thetas_deg is not None:
            thetas = np.radians(env_spec.thetas_deg)
        else:
            thetas = grids.angles[rng.integers(grids.angles.size, size=env_spec.paths)]
        if env_spec.gains is not None:
            gains = np.asarray(env_spec.gains)
        else:
            gains = grids.gains[rng.integers(grids.gains.size, size=env_spec.paths)]
        return StationaryEnv(ChannelParams(thetas, gains), self.ctx.codebook, NoiseModel(env_spec.sigma))


# ---------------------------------------------------------------- running

@dataclass
class PolicyRun:
    label: str
    rep: int
    trace: RegretTrace
    rewards: np.ndarray
    elapsed_ns: int


def run_policy(policy: Policy, env, horizon: int, rng: np.random.Generator):
    """Play ``horizon`` steps; returns actions, observed rewards and policy time (ns)."""
    actions = np.empty(horizon, dtype=np.intp)
    rewards = np.empty(horizon)
    elapsed = 0
    for t in range(1, horizon + 1):
        t0 = time.perf_counter_ns()
        a = policy.select(t)
        elapsed += time.perf_counter_ns() - t0
        r = env.step(a, t - 1, rng)
        t0 = time.perf_counter_ns()
        policy.observe(t, a, r)
        elapsed += time.perf_counter_ns() - t0
        actions[t - 1] = a
        rewards[t - 1] = r
    return actions, rewards, elapsed


def run_repetition(setup: _Setup, rep: int) -> list[PolicyRun]:
    cfg = setup.config
    env = setup.environment(rep)
    if env.horizon is not None and cfg.horizon > env.horizon:
        raise HorizonExceeded(f"horizon {cfg.horizon} exceeds environment horizon {env.horizon}")
    out = []
    for spec in cfg.policies:
        key = name_key(spec.label)
        policy = build_policy(setup.ctx, spec, cfg.horizon, child_seed(cfg.seed, rep, key, 0))
        noise_rng = rng_for(cfg.seed, rep, key, 1)
        actions, rewards, elapsed = run_policy(policy, env, cfg.horizon, noise_rng)
        tr = regret_trace(actions, env, meta={"seed": cfg.seed, "rep": rep, "policy": spec.label, "env": repr(env)})
        out.append(PolicyRun(spec.label, rep, tr, rewards, elapsed))
    return out


_WORKER_SETUP = None


def _worker_init(config):
    global _WORKER_SETUP
    _WORKER_SETUP = build_context(config)


def _worker_run(rep):
    return run_repetition(_WORKER_SETUP, rep)


@dataclass
class RunReport:
    config: RunConfig
    runs: list[PolicyRun]
    summaries: dict[str, AggregateSummary]
    ms_per_step: dict[str, float]

    def traces(self, label: str) -> list[RegretTrace]:
        return [r.trace for r in self.runs if r.label == label]

    def rows(self):
        order = {p.label: i for i, p in enumerate(self.config.policies)}
        runs = sorted(self.runs, key=lambda r: (r.rep, order[r.label]))
        rows = []
        for run in runs:
            tr = run.trace
            for i in range(len(tr)):
                rows.append((run.rep, i + 1, order[run.label], run.label, int(tr.actions[i]), float(run.rewards[i]),
                             float(tr.inst[i]), float(tr.cum[i]), float(tr.norm[i])))
        rows.sort(key=lambda r: (r[0], r[1], r[2]))
        return [r[:2] + r[3:] for r in rows]

    def final_normalized(self, label: str) -> np.ndarray:
        return np.array([t.norm[-1] for t in self.traces(label)])

    def write_csv(self, path) -> None:
        with Path(path).open("w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(CSV_COLUMNS)
            for row in self.rows():
                w.writerow([row[0], row[1], row[2], row[3]] + [_fmt(v) for v in row[4:]])

    def write_summary(self, path) -> None:
        with Path(path).open("w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(SUMMARY_COLUMNS)
            for spec in self.config.policies:
                s = self.summaries[spec.label]
                cum = np.mean([t.cum[-1] for t in self.traces(spec.label)])
                w.writerow([spec.label, s.count, self.config.horizon, _fmt(s.final_mean), _fmt(s.final_stderr),
                            _fmt(cum), f"{self.ms_per_step[spec.label]:.6f}"])


def _fmt(v: float) -> str:
    return "nan" if math.isnan(v) else repr(float(v))


def summary_path(output: Path) -> Path:
    output = Path(output)
    return output.with_name(output.stem + "_summary.csv")


def run_experiment(config: RunConfig, write: bool = True) -> RunReport:
    """Run every configured policy for every repetition and aggregate."""
    setup = build_context(config)
    reps = range(config.repetitions)
    if config.workers > 1 and config.repetitions > 1:
        with ProcessPoolExecutor(max_workers=config.workers, initializer=_worker_init,
                                 initargs=(config,)) as pool:
            per_rep = list(pool.map(_worker_run, reps))
    else:
        per_rep = [run_repetition(setup, rep) for rep in reps]
    runs = [r for rr in per_rep for r in rr]
    summaries, timing = {}, {}
    for spec in config.policies:
        mine = [r for r in runs if r.label == spec.label]
        summaries[spec.label] = aggregate([r.trace.norm for r in mine])
        timing[spec.label] = sum(r.elapsed_ns for r in mine) / (len(mine) * config.horizon) / 1e6
        log.info("%s: final normalized regret %.4f +- %.4f, %.3f ms/step", spec.label,
                 summaries[spec.label].final_mean, summaries[spec.label].final_stderr, timing[spec.label])
    report = RunReport(config, runs, summaries, timing)
    if write and config.output is not None:
        Path(config.output).parent.mkdir(parents=True, exist_ok=True)
        report.write_csv(config.output)
        report.write_summary(summary_path(config.output))
    return report
