"""Scenario configuration: YAML in, fully resolved dict out."""

from __future__ import annotations

from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path

import yaml

from ..netgraph import BackgroundTraffic, Topology, TopologyError, bundled_topology
from ..scheduling import SchedulingPolicy
from .engine import SchemeOptions, resolve_scheme
from .metrics import DEFAULT_PERCENTILE
from .trace import TraceConfig, TransferRequest, generate_trace, preset, read_trace


class ConfigError(ValueError):
    pass


@dataclass
class ScenarioConfig:
    topology: str = "gscale_standin"
    scheme: str = "DCCAST"
    policy: str | None = None
    seed: int = 0
    percentile: float = DEFAULT_PERCENTILE
    slot_width: float = 1.0
    background: bool = False
    preset: str | None = None
    trace: dict = field(default_factory=dict)
    trace_file: str | None = None
    options: dict = field(default_factory=dict)
    base_dir: str = field(default=".", repr=False)

    @classmethod
    def from_dict(cls, data: dict, base_dir: str | Path = ".") -> "ScenarioConfig":
        if not isinstance(data, dict):
            raise ConfigError("config must be a mapping")
        known = {f.name for f in fields(cls)} - {"base_dir"}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {', '.join(sorted(unknown))}")
        cfg = cls(**data, base_dir=str(base_dir))
        cfg.validate()
        return cfg

    @classmethod
    def load(cls, path: str | Path) -> "ScenarioConfig":
        try:
            with open(path) as fh:
                data = yaml.safe_load(fh) or {}
        except (OSError, yaml.YAMLError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from None
        return cls.from_dict(data, Path(path).parent)

    def with_overrides(self, **kw) -> "ScenarioConfig":
        """Apply CLI overrides; ``None`` means not given."""
        cfg = replace(self, trace=dict(self.trace), options=dict(self.options))
        for key in ("scheme", "policy", "seed", "percentile"):
            if kw.get(key) is not None:
                setattr(cfg, key, kw[key])
        if kw.get("rate") is not None:
            cfg.trace["rate"] = kw["rate"]
        if kw.get("receivers") is not None:
            cfg.trace["receivers"] = kw["receivers"]
        for key in ("p_f", "n_max", "k_paths", "k_trees"):
            if kw.get(key) is not None:
                cfg.options[key] = kw[key]
        cfg.validate()
        return cfg

    def validate(self) -> None:
        try:
            resolve_scheme(self.scheme)
            if self.policy is not None:
                SchedulingPolicy.parse(self.policy)
            self.trace_config().validate()
            SchemeOptions(**self.options)
        except (ValueError, TypeError) as exc:
            raise ConfigError(str(exc)) from None
        if not 0 < self.percentile <= 100:
            raise ConfigError("percentile must lie in (0, 100]")
        if self.slot_width <= 0:
            raise ConfigError("slot_width must be positive")

    def trace_config(self) -> TraceConfig:
        if self.preset:
            return preset(self.preset, **self.trace)
        try:
            return TraceConfig(**self.trace)
        except TypeError as exc:
            raise ConfigError(f"bad trace settings: {exc}") from None

    def scheme_options(self) -> SchemeOptions:
        return SchemeOptions(**self.options)

    def _resolve(self, name: str) -> Path:
        p = Path(name)
        return p if p.is_absolute() else Path(self.base_dir) / p

    def load_topology(self) -> Topology:
        if self.topology.endswith((".yaml", ".yml")):
            try:
                return Topology.load(self._resolve(self.topology))
            except (OSError, yaml.YAMLError, KeyError, ValueError) as exc:
                raise TopologyError(f"bad topology {self.topology}: {exc}") from None
        return bundled_topology(self.topology)

    def background_traffic(self, topo: Topology) -> BackgroundTraffic | None:
        return BackgroundTraffic(topo, seed=self.seed + 7919) if self.background else None

    def build_trace(self, topo: Topology) -> list[TransferRequest]:
        if self.trace_file:
            return read_trace(self._resolve(self.trace_file))
        cfg = self.trace_config()
        if cfg.cdf_file:
            cfg = replace(cfg, cdf_file=str(self._resolve(cfg.cdf_file)))
        return generate_trace(topo, cfg, self.seed)

    def resolved(self) -> dict:
        """Everything needed to rerun this scenario."""
        out = asdict(self)
        out.pop("base_dir")
        out["trace"] = asdict(self.trace_config())
        out["options"] = asdict(self.scheme_options())
        return out
