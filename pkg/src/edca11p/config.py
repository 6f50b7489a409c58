"""Scenario configuration: YAML schema, validation and bundled presets.

A scenario document is a nested key/value file with a schema_version marker.
Durations carry unit suffixes in the key names (_us, _ms) and are converted
to seconds internally. Two presets ship with the package: highway.default
(the four-lane highway scenario) and highload (HPD/DENM rate and repetition
raised to 10 for the CAM service-time study).
"""

from __future__ import annotations

import importlib.resources
from dataclasses import dataclass, field
from pathlib import Path

import yaml

from .params import AcIndex, EdcaConfig
from .solver import SolverSettings
from .traffic import TrafficConfig

__all__ = [
    "ConfigError",
    "SimDefaults",
    "ScenarioConfig",
    "load_scenario",
    "bundled_config_path",
    "SCHEMA_VERSION",
]

SCHEMA_VERSION = 1

_AC_KEYS = ("vo", "vi", "be", "bk")


class ConfigError(ValueError):
    """Configuration problem, annotated with the offending key path."""


@dataclass(frozen=True)
class SimDefaults:
    horizon_slots: int = 10_000_000
    warmup_slots: int = 100_000
    seed: int = 1

    def __post_init__(self) -> None:
        if self.horizon_slots <= self.warmup_slots:
            raise ConfigError("sim.horizon_slots must exceed sim.warmup_slots")
        if self.warmup_slots < 0:
            raise ConfigError("sim.warmup_slots must be non-negative")


@dataclass(frozen=True)
class ScenarioConfig:
    """Full experiment description: vehicle counts, EDCA, traffic, queue, solver."""

    n_vehicles: tuple[int, ...] = (50,)
    edca: EdcaConfig = field(default_factory=EdcaConfig)
    traffic: TrafficConfig = field(default_factory=TrafficConfig)
    queue_depth: int = 10
    solver: SolverSettings = field(default_factory=SolverSettings)
    sim: SimDefaults = field(default_factory=SimDefaults)

    def __post_init__(self) -> None:
        if any(n < 1 for n in self.n_vehicles):
            raise ConfigError("every vehicle count must be at least 1")
        if self.queue_depth < 1:
            raise ConfigError("queue_depth must be at least 1")

    def sweep(self) -> tuple[int, ...]:
        return self.n_vehicles


def _get(section: dict, key: str, default, path: str):
    value = section.get(key, default)
    if value is None:
        raise ConfigError(f"{path}.{key}: missing required value")
    return value


def _per_ac(section: dict, key: str, default: tuple, path: str) -> tuple:
    raw = section.get(key)
    if raw is None:
        return default
    if not isinstance(raw, dict) or set(raw) != set(_AC_KEYS):
        raise ConfigError(f"{path}.{key}: expected keys {_AC_KEYS}")
    return tuple(int(raw[k]) for k in _AC_KEYS)


def _parse_sweep(raw, path: str) -> tuple[int, ...]:
    if isinstance(raw, int):
        return (raw,)
    if isinstance(raw, list):
        return tuple(int(v) for v in raw)
    if isinstance(raw, dict):
        try:
            start, stop, step = int(raw["start"]), int(raw["stop"]), int(raw.get("step", 1))
        except KeyError as exc:
            raise ConfigError(f"{path}: sweep needs start/stop (and optional step)") from exc
        if step < 1:
            raise ConfigError(f"{path}.step: must be positive")
        return tuple(range(start, stop + 1, step))
    raise ConfigError(f"{path}: expected an integer, list, or start/stop/step mapping")


def parse_scenario(doc: dict, source: str = "<config>") -> ScenarioConfig:
    if not isinstance(doc, dict):
        raise ConfigError(f"{source}: top level must be a mapping")
    version = doc.get("schema_version")
    if version != SCHEMA_VERSION:
        raise ConfigError(f"{source}.schema_version: expected {SCHEMA_VERSION}, got {version!r}")

    scn = doc.get("scenario", {})
    edca = doc.get("edca", {})
    traffic = doc.get("traffic", {})
    solver = doc.get("solver", {})
    sim = doc.get("sim", {})
    for name, sec in (("scenario", scn), ("edca", edca), ("traffic", traffic),
                      ("solver", solver), ("sim", sim)):
        if not isinstance(sec, dict):
            raise ConfigError(f"{source}.{name}: must be a mapping")

    try:
        edca_cfg = EdcaConfig(
            slot_time=float(_get(edca, "slot_time_us", 13.0, "edca")) * 1e-6,
            sifs=float(_get(edca, "sifs_us", 32.0, "edca")) * 1e-6,
            aifsn=_per_ac(edca, "aifsn", (2, 3, 6, 9), "edca"),
            cw=_per_ac(edca, "cw", (4, 8, 16, 16), "edca"),
            payload_bits=int(_get(edca, "payload_bytes", 134, "edca")) * 8,
            cch_rate=float(_get(edca, "cch_rate_bps", 6e6, "edca")),
            phy_overhead=float(_get(edca, "phy_overhead_us", 0.0, "edca")) * 1e-6,
        )
    except ValueError as exc:
        raise ConfigError(f"{source}.edca: {exc}") from exc

    try:
        traffic_cfg = TrafficConfig(
            cam_period=float(_get(traffic, "cam_period_ms", 100.0, "traffic")) * 1e-3,
            event_rate_lambda=float(_get(traffic, "event_rate_hz", 1.0, "traffic")),
            repetition_k=int(_get(traffic, "repetition_k", 5, "traffic")),
            denm_rep_interval=float(_get(traffic, "denm_rep_interval_ms", 10.0, "traffic")) * 1e-3,
            mhd_rate=float(_get(traffic, "mhd_rate_hz", 10.0, "traffic")),
        )
    except ValueError as exc:
        raise ConfigError(f"{source}.traffic: {exc}") from exc

    try:
        solver_cfg = SolverSettings(
            tolerance=float(_get(solver, "tolerance", 1e-9, "solver")),
            max_iterations=int(_get(solver, "max_iterations", 10000, "solver")),
            damping=float(_get(solver, "damping", 0.5, "solver")),
            use_closed_form=bool(_get(solver, "use_closed_form", True, "solver")),
        )
    except ValueError as exc:
        raise ConfigError(f"{source}.solver: {exc}") from exc

    sim_cfg = SimDefaults(
        horizon_slots=int(_get(sim, "horizon_slots", 10_000_000, "sim")),
        warmup_slots=int(_get(sim, "warmup_slots", 100_000, "sim")),
        seed=int(_get(sim, "seed", 1, "sim")),
    )

    return ScenarioConfig(
        n_vehicles=_parse_sweep(_get(scn, "n_vehicles", 50, "scenario"), f"{source}.scenario.n_vehicles"),
        edca=edca_cfg,
        traffic=traffic_cfg,
        queue_depth=int(_get(scn, "queue_depth", 10, "scenario")),
        solver=solver_cfg,
        sim=sim_cfg,
    )


def bundled_config_path(name: str) -> Path | None:
    """Resolve a bundled preset name (e.g. 'highway.default') to its file."""
    candidate = importlib.resources.files("edca11p").joinpath("configs", f"{name}.yaml")
    try:
        if candidate.is_file():
            return Path(str(candidate))
    except (OSError, TypeError):  # pragma: no cover - non-filesystem loaders
        return None
    return None


def load_scenario(path_or_name: str) -> ScenarioConfig:
    """Load a scenario from a YAML file path or a bundled preset name."""
    path = Path(path_or_name)
    if not path.is_file():
        bundled = bundled_config_path(path_or_name)
        if bundled is None:
            raise ConfigError(f"{path_or_name}: not a file and not a bundled config")
        path = bundled
    try:
        doc = yaml.safe_load(path.read_text())
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        where = f" at line {mark.line + 1}, column {mark.column + 1}" if mark else ""
        raise ConfigError(f"{path}: YAML parse error{where}: {exc}") from exc
    return parse_scenario(doc, source=str(path))
