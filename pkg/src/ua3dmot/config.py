"""One INI-style file for every tunable: noise, tracker, eval, grouping, scenario."""
from __future__ import annotations

import configparser
import dataclasses
from dataclasses import dataclass, field

import numpy as np

from .grouping import GroupingConfig
from .kalman import STATE_DIM, NoiseConfig
from .metrics import EvalConfig
from .sim import ScenarioConfig
from .tracker import TrackerConfig


class ConfigError(ValueError):
    pass


@dataclass
class PipelineConfig:
    tracker: TrackerConfig = field(default_factory=TrackerConfig)
    eval: EvalConfig = field(default_factory=EvalConfig)
    grouping: GroupingConfig = field(default_factory=GroupingConfig)
    scenario: ScenarioConfig = field(default_factory=ScenarioConfig)


def _fmt(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if v is None:
        return "default"
    if isinstance(v, np.ndarray):
        return " ".join(repr(float(x)) for x in np.diag(v))
    if isinstance(v, tuple):
        return " ".join(str(x) for x in v)
    return str(v)


def _noise_items(n: NoiseConfig) -> dict:
    return {
        "alpha": n.alpha,
        "beta": n.beta,
        "process_noise_diag": n.process_noise,
        "initial_cov_diag": n.initial_cov,
        "dt": n.dt,
        "use_sigma_for_init": n.use_sigma_for_init,
    }


def dump_config(cfg: PipelineConfig = None) -> str:
    cfg = cfg or PipelineConfig()
    sections = {
        "noise": _noise_items(cfg.tracker.noise),
        "tracker": {f.name: getattr(cfg.tracker, f.name) for f in dataclasses.fields(cfg.tracker) if f.name != "noise"},
        "eval": dataclasses.asdict(cfg.eval),
        "grouping": dataclasses.asdict(cfg.grouping),
        "scenario": {f.name: getattr(cfg.scenario, f.name) for f in dataclasses.fields(cfg.scenario)},
    }
    lines = []
    for name, items in sections.items():
        lines.append(f"[{name}]")
        lines += [f"{k} = {_fmt(v)}" for k, v in items.items()]
        lines.append("")
    return "\n".join(lines)


def _convert(raw: str, default, key: str):
    raw = raw.strip()
    try:
        if isinstance(default, bool):
            low = raw.lower()
            if low not in ("true", "false", "1", "0", "yes", "no", "on", "off"):
                raise ValueError(raw)
            return low in ("true", "1", "yes", "on")
        if isinstance(default, np.ndarray):
            vals = [float(x) for x in raw.split()]
            if len(vals) != STATE_DIM:
                raise ValueError(f"expected {STATE_DIM} diagonal entries, got {len(vals)}")
            return np.diag(vals)
        if isinstance(default, tuple):
            return tuple(float(x) for x in raw.split())
        if isinstance(default, int):
            return int(raw)
        if isinstance(default, float) or default is None:
            if default is None and raw.lower() == "default":
                return None
            return float(raw)
        return raw
    except ValueError as e:
        raise ConfigError(f"bad value for {key!r}: {raw!r} ({e})") from None


def _apply(obj, items: dict, section: str, extra: dict = None):
    defaults = {f.name: getattr(obj, f.name) for f in dataclasses.fields(obj)}
    if extra:
        defaults.update(extra)
    kwargs = {}
    for k, raw in items.items():
        if k not in defaults:
            raise ConfigError(f"unknown key {k!r} in [{section}]")
        kwargs[k] = _convert(raw, defaults[k], f"{section}.{k}")
    return kwargs


def parse_config(text: str) -> PipelineConfig:
    cp = configparser.ConfigParser(interpolation=None)
    try:
        cp.read_string(text)
    except configparser.Error as e:
        raise ConfigError(str(e)) from None
    known = {"noise", "tracker", "eval", "grouping", "scenario"}
    unknown = set(cp.sections()) - known
    if unknown:
        raise ConfigError(f"unknown section(s): {sorted(unknown)}")
    base = PipelineConfig()
    try:
        noise_kw = {}
        if cp.has_section("noise"):
            n = base.tracker.noise
            noise_defaults = _noise_items(n)
            for k, raw in cp.items("noise"):
                if k not in noise_defaults:
                    raise ConfigError(f"unknown key {k!r} in [noise]")
                target = {"process_noise_diag": "process_noise", "initial_cov_diag": "initial_cov"}.get(k, k)
                noise_kw[target] = _convert(raw, noise_defaults[k], f"noise.{k}")
        noise = NoiseConfig(**noise_kw)
        tr_kw = _apply(base.tracker, dict(cp.items("tracker")) if cp.has_section("tracker") else {}, "tracker")
        tr_kw.pop("noise", None)
        tracker = TrackerConfig(noise=noise, **tr_kw)
        ev = EvalConfig(**_apply(base.eval, dict(cp.items("eval")) if cp.has_section("eval") else {}, "eval"))
        gr = GroupingConfig(
            **_apply(base.grouping, dict(cp.items("grouping")) if cp.has_section("grouping") else {}, "grouping")
        )
        sc = ScenarioConfig(
            **_apply(base.scenario, dict(cp.items("scenario")) if cp.has_section("scenario") else {}, "scenario")
        )
    except ConfigError:
        raise
    except (ValueError, TypeError) as e:
        raise ConfigError(str(e)) from None
    return PipelineConfig(tracker=tracker, eval=ev, grouping=gr, scenario=sc)


def load_config(path) -> PipelineConfig:
    with open(path) as fh:
        return parse_config(fh.read())
