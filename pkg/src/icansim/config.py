"""Scenario configuration: JSON schema, defaults, overrides, fingerprint."""
from __future__ import annotations

import dataclasses
import hashlib
import json
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

from . import __version__
from .beams import BH, TMCB, AntennaModel
from .constellation import InvalidConfigError, ShellConfig
from .link import UeRfModel
from .positioning import MODE_2D, MODE_3D, PrsbSignal
from .procedure import IsbSchedule, Thresholds

SCHEMA_VERSION = 1


class ConfigError(ValueError):
    """Malformed or inconsistent scenario configuration."""


@dataclass(frozen=True)
class ScenarioConfig:
    shell: ShellConfig = field(default_factory=ShellConfig)
    antenna: AntennaModel = field(default_factory=AntennaModel)
    rf: UeRfModel = field(default_factory=UeRfModel)
    signal: PrsbSignal = field(default_factory=PrsbSignal)
    schedule: IsbSchedule = field(default_factory=IsbSchedule)
    thresholds: Thresholds = field(default_factory=Thresholds)
    ue_count: int = 500
    ue_region: tuple[float, float, float, float] = (-70.0, -60.0, -5.0, 5.0)  # lon, lat bounds
    num_snapshots: int = 100
    schemes: tuple[str, ...] = (BH, TMCB)
    num_sats_list: tuple[int, ...] = (6, 8)
    selection_rule: str = "sinr"
    crlb_mode: str = MODE_3D
    seed: int = 20240601
    min_elevation: float = 10.0
    reuse_factor: int = 3
    rings: int = 4
    beam_spacing: float | None = None  # UV; None derives it from the HPBW
    edge_shutoff: bool = True
    exclude_covering_assistants: bool = True
    min_prsb_sinr_db: float | None = None

    def validate(self) -> "ScenarioConfig":
        try:
            self.shell.validate()
        except InvalidConfigError as exc:
            raise ConfigError(str(exc)) from exc
        lon0, lon1, lat0, lat1 = self.ue_region
        if not (lon0 <= lon1 and lat0 <= lat1 and -90 <= lat0 and lat1 <= 90):
            raise ConfigError(f"ue_region bounds not ordered: {self.ue_region}")
        if self.num_snapshots < 1 or self.ue_count < 1:
            raise ConfigError("num_snapshots and ue_count must be >= 1")
        if not self.schemes or set(self.schemes) - {BH, TMCB}:
            raise ConfigError(f"schemes must be a non-empty subset of BH/TMCB: {self.schemes}")
        if not self.num_sats_list or min(self.num_sats_list) < 3:
            raise ConfigError("num_sats_list entries must be >= 3")
        if self.selection_rule not in ("sinr", "elevation"):
            raise ConfigError(f"unknown selection_rule {self.selection_rule!r}")
        if self.crlb_mode not in (MODE_3D, MODE_2D):
            raise ConfigError(f"unknown crlb_mode {self.crlb_mode!r}")
        if not 0.0 <= self.min_elevation < 90.0:
            raise ConfigError("min_elevation must lie in [0, 90)")
        if self.reuse_factor not in (1, 3, 4):
            raise ConfigError("reuse_factor must be 1, 3 or 4")
        if not 0 <= self.seed < 2**64:
            raise ConfigError("seed must be an unsigned 64-bit integer")
        return self

    # -- serialisation ------------------------------------------------

    def to_dict(self) -> dict:
        out = {"schema_version": SCHEMA_VERSION}
        out.update(dataclasses.asdict(self))
        return out

    def fingerprint(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()[:16]

    def replace(self, **changes) -> "ScenarioConfig":
        return dataclasses.replace(self, **changes)


_SECTIONS = {
    "shell": ShellConfig,
    "antenna": AntennaModel,
    "rf": UeRfModel,
    "signal": PrsbSignal,
    "schedule": IsbSchedule,
    "thresholds": Thresholds,
}
_TUPLES = {"ue_region", "schemes", "num_sats_list"}


def _build_section(cls, data, name):
    if not isinstance(data, dict):
        raise ConfigError(f"section {name!r} must be an object")
    known = {f.name for f in dataclasses.fields(cls)}
    unknown = set(data) - known
    if unknown:
        raise ConfigError(f"unknown keys in {name!r}: {sorted(unknown)}")
    try:
        return cls(**data)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid {name!r}: {exc}") from exc


def from_dict(data: dict) -> ScenarioConfig:
    data = dict(data)
    version = data.pop("schema_version", SCHEMA_VERSION)
    if version != SCHEMA_VERSION:
        raise ConfigError(f"unsupported schema_version {version}")
    kwargs = {}
    top = {f.name for f in dataclasses.fields(ScenarioConfig)}
    for key, value in data.items():
        if key not in top:
            raise ConfigError(f"unknown configuration key {key!r}")
        if key in _SECTIONS:
            kwargs[key] = _build_section(_SECTIONS[key], value, key)
        elif key in _TUPLES:
            kwargs[key] = tuple(value)
        else:
            kwargs[key] = value
    return ScenarioConfig(**kwargs).validate()


def load_config(path: str | Path | None = None) -> ScenarioConfig:
    """Read a scenario file; ``None`` loads the bundled reference scenario."""
    if path is None:
        text = resources.files("icansim").joinpath("scenarios/reference.json").read_text()
    else:
        text = Path(path).read_text()
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"not valid JSON: {exc}") from exc
    return from_dict(data)


def apply_overrides(cfg: ScenarioConfig, overrides: dict[str, str]) -> ScenarioConfig:
    """Apply dotted ``key=value`` overrides, e.g. ``shell.altitude=1.1e6``."""
    data = cfg.to_dict()
    for dotted, raw in overrides.items():
        try:
            value = json.loads(raw)
        except json.JSONDecodeError:
            value = raw
        node = data
        *parents, leaf = dotted.split(".")
        for p in parents:
            if p not in node or not isinstance(node[p], dict):
                raise ConfigError(f"unknown section in override {dotted!r}")
            node = node[p]
        if leaf not in node:
            raise ConfigError(f"unknown override key {dotted!r}")
        node[leaf] = value
    return from_dict(data)


def tool_version() -> str:
    return __version__
