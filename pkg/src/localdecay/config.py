"""Campaign configuration: a single TOML document mapped onto dataclasses.

Every section has defaults, so an empty document is a valid (empty)
campaign. Optional values are simply left out of the document; TOML has no
null. ``dumps(loads(text))`` parses back to an equal :class:`Config`.
"""

from __future__ import annotations

import dataclasses
import hashlib
import math
import sys
import typing
from dataclasses import dataclass, field
from pathlib import Path

import tomli_w

from .errors import ConfigError

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

STAGES = ("normalize", "evolve", "resolve", "zero", "lowfreq", "synthesize", "compare", "fit",
          "acceptance")
BACKGROUND_KINDS = ("minkowski", "schwarzschild", "custom")
DATA_PROFILES = ("gaussian", "bump")
DATA_KINDS = ("static", "velocity", "mixed", "outgoing", "ingoing")
COEFFICIENTS = ("g_tt", "g_tr", "g_rr", "g_ww", "V_lr", "V_sr")


@dataclass
class CampaignSection:
    name: str = "campaign"
    stages: list[str] = field(default_factory=list)
    ell: list[int] = field(default_factory=lambda: [0])
    workers: int = 1


@dataclass
class BackgroundSection:
    kind: str = "schwarzschild"
    mass: float = 1.0
    R0: float | None = None
    r_match: float | None = None
    domain: str = "whole"                   # custom backgrounds only
    coefficients: dict[str, str] = field(default_factory=dict)


@dataclass
class DataSection:
    profile: str = "gaussian"
    center: float = 20.0
    width: float = 2.0
    amplitude: float = 1.0
    kind: str = "mixed"


@dataclass
class EvolveSection:
    h: float = 0.1
    x_min: float | None = None
    x_max: float = 1030.0
    t_final: float = 1000.0
    cfl: float = 0.5
    observers: list[float] = field(default_factory=lambda: [10.0])
    boundary: str = "outflow"
    snapshot_every: float = 0.0
    backend: str = "auto"


@dataclass
class FitSection:
    window: list[float] = field(default_factory=lambda: [100.0, 1000.0])
    expect_phi: float | None = None
    tol_phi: float = 0.15
    expect_dt: float | None = None
    tol_dt: float = 0.2
    max_drift: float = 0.1


@dataclass
class ResolveSection:
    h: float = 0.1
    x_max: float = 8192.0
    x_min: float | None = None
    taus: list[float] = field(default_factory=lambda: [0.25, 0.5, 1.0, 2.0])
    tau_im: float = 0.0
    sweep: list[float] = field(default_factory=lambda: [1e-3, 10.0, 40.0])
    sweep_h: float = 0.01
    sweep_x_max: float = 200.0
    threshold: float = 10.0
    max_variation: float = 10.0
    probe: bool = False


@dataclass
class ZeroSection:
    h: float = 0.05
    x_max: float = 100.0
    r_far: float = 1e4
    max_drift: float = 0.01


@dataclass
class LowFreqSection:
    h: float = 0.05
    x_max: float = 100.0
    sweep: list[float] = field(default_factory=lambda: [1e-5, 1e-2, 16.0])
    first_min: float = 0.95
    second_min: float = 1.7
    observer: float = 10.0
    tail_window: list[float] = field(default_factory=lambda: [200.0, 2000.0])


@dataclass
class SynthesisSection:
    t_max: float = 400.0
    dt: float = 0.1
    observers: list[float] = field(default_factory=lambda: [10.0])
    rel: float = 1e-6


@dataclass
class CompareSection:
    tolerance: float = 0.01
    window: list[float] = field(default_factory=list)      # empty: [0, t_max / 2]


@dataclass
class AcceptanceSection:
    checks: list[str] = field(default_factory=list)        # empty: all


@dataclass
class Config:
    campaign: CampaignSection = field(default_factory=CampaignSection)
    background: BackgroundSection = field(default_factory=BackgroundSection)
    data: DataSection = field(default_factory=DataSection)
    evolve: EvolveSection = field(default_factory=EvolveSection)
    fit: FitSection = field(default_factory=FitSection)
    resolve: ResolveSection = field(default_factory=ResolveSection)
    zero: ZeroSection = field(default_factory=ZeroSection)
    lowfreq: LowFreqSection = field(default_factory=LowFreqSection)
    synthesis: SynthesisSection = field(default_factory=SynthesisSection)
    compare: CompareSection = field(default_factory=CompareSection)
    acceptance: AcceptanceSection = field(default_factory=AcceptanceSection)

    def hash(self) -> str:
        return hashlib.sha256(dumps(self).encode()).hexdigest()


# coercion -------------------------------------------------------------------

def _coerce(value, hint, where: str):
    origin = typing.get_origin(hint)
    args = typing.get_args(hint)
    if origin is typing.Union or (origin is not None and type(None) in args):
        inner = [a for a in args if a is not type(None)][0]
        return _coerce(value, inner, where)
    if hint is bool:
        if not isinstance(value, bool):
            raise ConfigError(where, f"expected a boolean, got {value!r}")
        return value
    if hint is int:
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(where, f"expected an integer, got {value!r}")
        return value
    if hint is float:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(where, f"expected a number, got {value!r}")
        if not math.isfinite(value):
            raise ConfigError(where, "must be finite")
        return float(value)
    if hint is str:
        if not isinstance(value, str):
            raise ConfigError(where, f"expected a string, got {value!r}")
        return value
    if origin is list:
        if not isinstance(value, list):
            raise ConfigError(where, f"expected an array, got {value!r}")
        return [_coerce(v, args[0], f"{where}[{i}]") for i, v in enumerate(value)]
    if origin is dict:
        if not isinstance(value, dict):
            raise ConfigError(where, f"expected a table, got {value!r}")
        return {str(k): _coerce(v, args[1], f"{where}.{k}") for k, v in value.items()}
    raise ConfigError(where, f"unsupported type {hint}")


def _section(cls, raw, name: str):
    if not isinstance(raw, dict):
        raise ConfigError(name, "expected a table")
    hints = typing.get_type_hints(cls)
    names = {f.name for f in dataclasses.fields(cls)}
    extra = set(raw) - names
    if extra:
        raise ConfigError(f"{name}.{sorted(extra)[0]}", "unknown field")
    kw = {k: _coerce(v, hints[k], f"{name}.{k}") for k, v in raw.items()}
    return cls(**kw)


def _choice(value, allowed, where):
    if value not in allowed:
        raise ConfigError(where, f"{value!r} not in {list(allowed)}")


def _positive(value, where):
    if not value > 0:
        raise ConfigError(where, f"must be positive, got {value!r}")


def validate(cfg: Config) -> Config:
    """Cross-field checks beyond the per-field types; returns ``cfg``."""
    c = cfg.campaign
    for i, s in enumerate(c.stages):
        _choice(s, STAGES, f"campaign.stages[{i}]")
    if len(set(c.stages)) != len(c.stages):
        raise ConfigError("campaign.stages", "duplicate stage")
    if not c.ell or any(l < 0 for l in c.ell):
        raise ConfigError("campaign.ell", "needs one or more nonnegative values")
    if c.workers < 1:
        raise ConfigError("campaign.workers", "must be at least 1")
    b = cfg.background
    _choice(b.kind, BACKGROUND_KINDS, "background.kind")
    _choice(b.domain, ("whole", "exterior"), "background.domain")
    if b.kind == "schwarzschild":
        _positive(b.mass, "background.mass")
    for k in b.coefficients:
        _choice(k, COEFFICIENTS, f"background.coefficients.{k}")
    if b.coefficients and b.kind != "custom":
        raise ConfigError("background.coefficients", "only custom backgrounds take coefficient files")
    _choice(cfg.data.profile, DATA_PROFILES, "data.profile")
    _choice(cfg.data.kind, DATA_KINDS, "data.kind")
    _positive(cfg.data.width, "data.width")
    e = cfg.evolve
    for f in ("h", "x_max", "cfl"):
        _positive(getattr(e, f), f"evolve.{f}")
    if e.t_final < 0:
        raise ConfigError("evolve.t_final", "must be nonnegative")
    _choice(e.boundary, ("outflow", "reflecting"), "evolve.boundary")
    _choice(e.backend, ("auto", "compiled", "python"), "evolve.backend")
    if len(cfg.fit.window) != 2 or not 0 < cfg.fit.window[0] < cfg.fit.window[1]:
        raise ConfigError("fit.window", "needs [t_start, t_end] with 0 < t_start < t_end")
    r = cfg.resolve
    if len(r.sweep) != 3 or not 0 < r.sweep[0] < r.sweep[1] or r.sweep[2] < 2:
        raise ConfigError("resolve.sweep", "needs [tau_lo, tau_hi, count] with 0 < lo < hi")
    if r.tau_im > 0:
        raise ConfigError("resolve.tau_im", "must be <= 0 (outgoing half plane)")
    lf = cfg.lowfreq
    if len(lf.sweep) != 3 or not 0 < lf.sweep[0] < lf.sweep[1] <= 0.1 or lf.sweep[2] < 12:
        raise ConfigError("lowfreq.sweep", "needs [lo, hi, count] inside (0, 0.1] with count >= 12")
    _positive(cfg.synthesis.t_max, "synthesis.t_max")
    _positive(cfg.synthesis.dt, "synthesis.dt")
    w = cfg.compare.window
    if w and (len(w) != 2 or not w[0] < w[1]):
        raise ConfigError("compare.window", "needs [t_start, t_end]")
    from .acceptance import CHECKS
    for i, k in enumerate(cfg.acceptance.checks):
        _choice(k, CHECKS, f"acceptance.checks[{i}]")
    return cfg


def from_dict(raw: dict) -> Config:
    names = {f.name: f for f in dataclasses.fields(Config)}
    extra = set(raw) - set(names)
    if extra:
        raise ConfigError(sorted(extra)[0], "unknown section")
    hints = typing.get_type_hints(Config)
    kw = {k: _section(hints[k], v, k) for k, v in raw.items()}
    return validate(Config(**kw))


def to_dict(cfg: Config) -> dict:
    """Plain tables with the unset optional fields dropped."""
    out = {}
    for f in dataclasses.fields(cfg):
        sec = getattr(cfg, f.name)
        out[f.name] = {k: v for k, v in dataclasses.asdict(sec).items() if v is not None}
    return out


def loads(text: str) -> Config:
    try:
        raw = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError("<document>", f"not valid TOML: {exc}") from exc
    return from_dict(raw)


def load(path) -> Config:
    return loads(Path(path).read_text())


def dumps(cfg: Config) -> str:
    return tomli_w.dumps(to_dict(cfg))


def bundled(name: str = "acceptance") -> Config:
    """A configuration shipped with the package (``data/<name>.toml``)."""
    from importlib.resources import files
    return loads(files("localdecay").joinpath("data", f"{name}.toml").read_text())
