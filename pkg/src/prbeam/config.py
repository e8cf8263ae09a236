"""Run configuration files.

A config is an INI file::

    [experiment]
    horizon = 200
    repetitions = 10
    seed = 7
    output = results.csv
    policies = pr-etc, ucb

    [array]
    num_elements = 16
    wavelength = 0.011
    spacing = 0.005
    num_beams = 180
    ; or: pattern_csv = beams.csv

    [channel]
    thetas_deg = 40          ; or "random"
    gains = 0.5              ; or "random"
    paths = 1                ; path count for random instances
    sigma = 3.6

    [grid]
    preset = deepmimo-like
    ; or: angles = 0:2:181    (start:step:count, degrees) or a comma list
    ;     gains = exp(-10:0.5:21) | 0:1:5 | comma list
    ;     phases_deg = 0, 90, 180, 270

    [policy.pr-etc]
    type = pr-etc            ; defaults to the section label
    k = 1
    M = 20                   ; or "auto" for the theoretical length
    tau = 50                 ; optional: wrap in periodic restarts

Trace experiments replace ``[channel]`` by ``[trace]`` with ``path``,
``factor``, optional ``sigma`` and ``random_window``. ``[sweep]`` lists
``seeds`` and ``horizons`` for the sweep subcommand.
"""

from __future__ import annotations

import configparser
import re
from dataclasses import dataclass, field, replace
from pathlib import Path

from .errors import ConfigError

PERIODIC_PREFIX = "periodic-"
DEFAULT_TAU = 50


@dataclass(frozen=True)
class ArraySpec:
    num_elements: int = 16
    wavelength: float = 0.011
    spacing: float | None = None
    num_beams: int = 180
    pattern_csv: Path | None = None


@dataclass(frozen=True)
class SyntheticSpec:
    thetas_deg: tuple | None  # None: draw per repetition from the grid
    gains: tuple | None
    paths: int = 1
    sigma: float = 0.0


@dataclass(frozen=True)
class TraceSpec:
    path: Path
    factor: int = 1
    sigma: float = 0.0
    random_window: bool = False


@dataclass(frozen=True)
class PolicySpec:
    label: str
    kind: str
    k: int = 1
    M: int | str = 20
    tau: int | None = None
    sigma: float | None = None  # noise level assumed by M = auto
    initial_thetas_deg: tuple | None = None
    initial_gains: tuple | None = None
    extra: dict = field(default_factory=dict)


@dataclass(frozen=True)
class RunConfig:
    horizon: int
    repetitions: int
    seed: int
    policies: tuple
    array: ArraySpec
    grid: object  # preset name or mapping for make_default_grids
    env: SyntheticSpec | TraceSpec
    output: Path | None = None
    workers: int = 1
    seeds: tuple = ()
    horizons: tuple = ()
    source: Path | None = None

    def __post_init__(self):
        if self.horizon < 1:
            raise ConfigError("horizon must be >= 1")
        if self.repetitions < 1:
            raise ConfigError("repetitions must be >= 1")
        if not self.policies:
            raise ConfigError("no policies configured")
        labels = [p.label for p in self.policies]
        if len(set(labels)) != len(labels):
            raise ConfigError(f"duplicate policy labels in {labels}")

    def with_overrides(self, **kw) -> "RunConfig":
        return replace(self, **kw)


_RANGE = re.compile(r"^\s*(-?[\d.eE+-]+)\s*:\s*(-?[\d.eE+-]+)\s*:\s*(\d+)\s*$")
_EXP_RANGE = re.compile(r"^\s*exp\((.*)\)\s*$")


def _floats(text: str, what: str) -> tuple:
    try:
        return tuple(float(x) for x in text.split(",") if x.strip())
    except ValueError:
        raise ConfigError(f"{what}: expected a comma-separated list of numbers, got {text!r}") from None


def _complexes(text: str, what: str) -> tuple:
    try:
        return tuple(complex(x.strip().replace(" ", "")) for x in text.split(",") if x.strip())
    except ValueError:
        raise ConfigError(f"{what}: expected a comma-separated list of numbers, got {text!r}") from None


def parse_angle_spec(text: str):
    m = _RANGE.match(text)
    if m:
        return {"start": float(m.group(1)), "step": float(m.group(2)), "count": int(m.group(3))}
    return list(_floats(text, "angles"))


def parse_gain_spec(text: str):
    m = _EXP_RANGE.match(text)
    if m:
        inner = _RANGE.match(m.group(1))
        if not inner:
            raise ConfigError(f"gains: cannot parse {text!r}; use exp(start:step:count)")
        return {"log_start": float(inner.group(1)), "log_step": float(inner.group(2)), "count": int(inner.group(3))}
    m = _RANGE.match(text)
    if m:
        return {"start": float(m.group(1)), "step": float(m.group(2)), "count": int(m.group(3))}
    return list(_complexes(text, "gains"))


def _get(section, key, conv, default=None, required=False):
    if key not in section:
        if required:
            raise ConfigError(f"[{section.name}] missing required key {key!r}")
        return default
    raw = section[key].strip()
    try:
        return conv(raw)
    except (ValueError, TypeError):
        raise ConfigError(f"[{section.name}] {key} = {raw!r} is not valid") from None


def _bool(text):
    t = text.lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ValueError(text)


def _parse_policy(cp, label: str) -> PolicySpec:
    name = f"policy.{label}"
    if name not in cp:
        kind, tau = label, None
        if label.startswith(PERIODIC_PREFIX):
            kind, tau = label[len(PERIODIC_PREFIX):], DEFAULT_TAU
        return PolicySpec(label=label, kind=kind, tau=tau)
    sec = cp[name]
    kind = _get(sec, "type", str, label)
    tau = _get(sec, "tau", int)
    if kind.startswith(PERIODIC_PREFIX):
        kind = kind[len(PERIODIC_PREFIX):]
        tau = tau or DEFAULT_TAU
    M = _get(sec, "m", str, "20")
    if M.lower() != "auto":
        try:
            M = int(M)
        except ValueError:
            raise ConfigError(f"[{name}] M must be an integer or 'auto', got {M!r}") from None
    else:
        M = "auto"
    known = {"type", "tau", "m", "k", "sigma", "initial_thetas_deg", "initial_gains"}
    return PolicySpec(
        label=label,
        kind=kind,
        k=_get(sec, "k", int, 1),
        M=M,
        tau=tau,
        sigma=_get(sec, "sigma", float),
        initial_thetas_deg=_get(sec, "initial_thetas_deg", lambda s: _floats(s, "initial_thetas_deg")),
        initial_gains=_get(sec, "initial_gains", lambda s: _complexes(s, "initial_gains")),
        extra={k: v for k, v in sec.items() if k not in known},
    )


def _parse_grid(cp):
    if "grid" not in cp:
        return "deepmimo-like"
    sec = cp["grid"]
    if "preset" in sec:
        return sec["preset"].strip()
    if "angles" not in sec or "gains" not in sec:
        raise ConfigError("[grid] needs either preset or both angles and gains")
    spec = {"angles": parse_angle_spec(sec["angles"]), "gains": parse_gain_spec(sec["gains"])}
    if "phases_deg" in sec:
        spec["phases_deg"] = list(_floats(sec["phases_deg"], "phases_deg"))
    return spec


def _parse_array(cp, base: Path) -> ArraySpec:
    if "array" not in cp:
        return ArraySpec()
    sec = cp["array"]
    pattern = _get(sec, "pattern_csv", str)
    return ArraySpec(
        num_elements=_get(sec, "num_elements", int, 16),
        wavelength=_get(sec, "wavelength", float, 0.011),
        spacing=_get(sec, "spacing", float),
        num_beams=_get(sec, "num_beams", int, 180),
        pattern_csv=(base / pattern) if pattern else None,
    )


def _parse_env(cp, base: Path):
    if "trace" in cp:
        sec = cp["trace"]
        return TraceSpec(
            path=base / _get(sec, "path", str, required=True),
            factor=_get(sec, "factor", int, 1),
            sigma=_get(sec, "sigma", float, 0.0),
            random_window=_get(sec, "random_window", _bool, False),
        )
    sec = cp["channel"] if "channel" in cp else {}
    if not sec:
        raise ConfigError("config needs a [channel] or [trace] section")

    def maybe_random(key, conv):
        raw = sec.get(key, "random").strip()
        return None if raw.lower() == "random" else conv(raw, key)

    thetas = maybe_random("thetas_deg", _floats)
    gains = maybe_random("gains", _complexes)
    if thetas is not None and gains is not None and len(thetas) != len(gains):
        raise ConfigError("[channel] thetas_deg and gains must have the same length")
    paths = len(thetas) if thetas is not None else (len(gains) if gains is not None else _get(sec, "paths", int, 1))
    return SyntheticSpec(thetas, gains, paths, _get(sec, "sigma", float, 0.0))


def _split(text):
    return [x.strip() for x in text.split(",") if x.strip()]


def load_config(path) -> RunConfig:
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file {path} does not exist")
    cp = configparser.ConfigParser(inline_comment_prefixes=(";", "#"))
    try:
        cp.read(path)
    except configparser.Error as exc:
        raise ConfigError(f"{path}: {exc}") from None
    return parse_config(cp, base=path.parent, source=path)


def parse_config(cp: configparser.ConfigParser, base: Path = Path("."), source=None) -> RunConfig:
    if "experiment" not in cp:
        raise ConfigError("config needs an [experiment] section")
    ex = cp["experiment"]
    labels = _split(ex.get("policies", ex.get("policy", "")))
    sweep = cp["sweep"] if "sweep" in cp else {}
    if sweep and "policies" in sweep:
        labels = _split(sweep["policies"])
    output = _get(ex, "output", str)
    env = _parse_env(cp, base)
    array = _parse_array(cp, base)
    if isinstance(env, TraceSpec) and not env.path.is_file():
        raise ConfigError(f"trace file {env.path} does not exist")
    if array.pattern_csv is not None and not array.pattern_csv.is_file():
        raise ConfigError(f"pattern file {array.pattern_csv} does not exist")
    return RunConfig(
        horizon=_get(ex, "horizon", int, 200),
        repetitions=_get(ex, "repetitions", int, 1),
        seed=_get(ex, "seed", int, 0),
        policies=tuple(_parse_policy(cp, label) for label in labels),
        array=array,
        grid=_parse_grid(cp),
        env=env,
        output=(base / output) if output else None,
        workers=_get(ex, "workers", int, 1),
        seeds=tuple(int(s) for s in _split(sweep.get("seeds", ""))) if sweep else (),
        horizons=tuple(int(s) for s in _split(sweep.get("horizons", ""))) if sweep else (),
        source=source,
    )


def parse_config_text(text: str, base: Path = Path(".")) -> RunConfig:
    cp = configparser.ConfigParser(inline_comment_prefixes=(";", "#"))
    cp.read_string(text)
    return parse_config(cp, base=base)
