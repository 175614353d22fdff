"""Experiment configuration: INI file with sections, overridable by flags.

Precedence is flags > file > defaults. The resolved configuration is a
plain dict so it can be hashed into the run manifest.
"""

import configparser
from dataclasses import dataclass, field, fields

import numpy as np

from .channel import ChannelMatrix, preset
from .errors import ConfigError, ValidationError
from .mdp import SolverParams
from .rates import RateTable
from .sim import SCHEMES, SimConfig


def _parse_floats(text: str) -> tuple[float, ...]:
    return tuple(float(x) for x in str(text).replace(";", ",").split(",") if x.strip())


def _parse_ints(text: str) -> tuple[int, ...]:
    return tuple(int(x) for x in str(text).split(",") if x.strip())


def parse_seeds(text) -> tuple[int, ...]:
    """Either a count K (seeds 0..K-1) or an explicit comma list."""
    if isinstance(text, (list, tuple)):
        return tuple(int(x) for x in text)
    vals = _parse_ints(text)
    if len(vals) == 1 and "," not in str(text):
        return tuple(range(vals[0]))
    return vals


@dataclass
class ExperimentConfig:
    bss: int = 3
    channel_states: int = 3
    ues: tuple[int, ...] = (3,)
    oh: tuple[float, ...] = (0.1,)
    channel_preset: str = "urban-nlos-dominant"
    channel_matrix: tuple[tuple[float, ...], ...] | None = None
    rates: tuple[float, ...] = (0.0, 1.0, 4.0)
    omega: float = 0.9
    epsilon: float = 1e-6
    max_sweeps: int = 10_000
    max_outer: int | None = None
    policy_seed: int = 0
    slots: int = 100_000
    warmup: int = 1000
    seeds: tuple[int, ...] = tuple(range(20))
    ub_charges_oh: bool = True
    bandwidth_hz: float = 1e9
    slot_seconds: float = 125e-6
    symbols_per_slot: int = 30
    data_symbols: int = 24
    schemes: tuple[str, ...] = ("mdp", "load", "rate", "channel", "upper")
    out_dir: str = "results"
    cache_dir: str | None = None
    workers: int = 1

    def __post_init__(self):
        for s in self.schemes:
            if s not in SCHEMES:
                raise ConfigError(f"unknown scheme {s!r}; known: {SCHEMES}")
        if self.channel_matrix is None and self.channel_preset not in _known_presets():
            raise ConfigError(
                f"unknown channel preset {self.channel_preset!r}; known: {_known_presets()}"
            )

    def channel(self) -> ChannelMatrix:
        if self.channel_matrix is not None:
            return _matrix_from_rows(self.channel_matrix, self.channel_states)
        return preset(self.channel_preset)

    def rate_table(self) -> RateTable:
        return RateTable(self.rates)

    def solver_params(self) -> SolverParams:
        return SolverParams(self.omega, self.epsilon, self.max_sweeps)

    def sim_config(self, n_ues: int, oh: float) -> SimConfig:
        return SimConfig(
            bss=self.bss,
            ues=n_ues,
            channel=self.channel(),
            rates=self.rate_table(),
            oh=oh,
            slots=self.slots,
            warmup=self.warmup,
            seeds=self.seeds,
            bandwidth_hz=self.bandwidth_hz,
            slot_seconds=self.slot_seconds,
            symbols_per_slot=self.symbols_per_slot,
            data_symbols=self.data_symbols,
            ub_charges_oh=self.ub_charges_oh,
        )

    def resolved(self) -> dict:
        out = {}
        for f in fields(self):
            v = getattr(self, f.name)
            if isinstance(v, tuple):
                v = list(v) if not v or not isinstance(v[0], tuple) else [list(r) for r in v]
            out[f.name] = v
        return out


def _known_presets():
    from .channel import PRESETS

    return sorted(PRESETS)


def _matrix_from_rows(rows, k: int) -> ChannelMatrix:
    arr = np.asarray(rows, dtype=float)
    if arr.shape != (k, k):
        raise ConfigError(f"channel matrix must be {k}x{k}, got {arr.shape}")
    try:
        return ChannelMatrix(arr)
    except ValidationError as e:
        raise ConfigError(f"bad channel matrix: {e}") from e


_SECTION_KEYS = {
    "system": {"bss", "channel_states", "ues"},
    "channel": {"preset", "matrix"},
    "rates": {"values"},
    "solver": {"omega", "epsilon", "max_sweeps", "max_outer", "policy_seed"},
    "sim": {"oh", "slots", "warmup", "seeds", "ub_charges_oh"},
    "radio": {"bandwidth_hz", "slot_seconds", "symbols_per_slot", "data_symbols"},
    "run": {"schemes", "workers"},
    "output": {"dir", "cache_dir"},
}


def load_config_file(path) -> dict:
    """Parse an INI experiment file into override kwargs for ExperimentConfig."""
    cp = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    read = cp.read(path)
    if not read:
        raise ConfigError(f"cannot read config file {path}")
    overrides: dict = {}
    for section in cp.sections():
        if section not in _SECTION_KEYS:
            raise ConfigError(f"unknown config section [{section}]")
        for key, value in cp.items(section):
            if key not in _SECTION_KEYS[section]:
                raise ConfigError(f"unknown key {key!r} in section [{section}]")
            try:
                _apply_file_key(overrides, section, key, value)
            except (ValueError, ConfigError) as e:
                raise ConfigError(f"bad value for [{section}] {key}: {e}") from e
    return overrides


def _apply_file_key(out: dict, section: str, key: str, value: str) -> None:
    if section == "system":
        if key == "ues":
            out["ues"] = _parse_ints(value)
        else:
            out[key] = int(value)
    elif section == "channel":
        if key == "preset":
            out["channel_preset"] = value.strip()
        else:  # matrix: rows separated by ';', entries by ','
            rows = [r for r in value.split(";") if r.strip()]
            out["channel_matrix"] = tuple(
                tuple(float(x) for x in r.split(",")) for r in rows
            )
    elif section == "rates":
        out["rates"] = _parse_floats(value)
    elif section == "solver":
        if key in ("max_sweeps", "max_outer", "policy_seed"):
            out[key] = int(value)
        else:
            out[key] = float(value)
    elif section == "sim":
        if key == "oh":
            out["oh"] = _parse_floats(value)
        elif key == "seeds":
            out["seeds"] = parse_seeds(value)
        elif key == "ub_charges_oh":
            out["ub_charges_oh"] = value.strip().lower() in ("1", "true", "yes", "on")
        else:
            out[key] = int(value)
    elif section == "radio":
        if key in ("symbols_per_slot", "data_symbols"):
            out[key] = int(value)
        else:
            out[key] = float(value)
    elif section == "run":
        if key == "schemes":
            out["schemes"] = tuple(s.strip() for s in value.split(",") if s.strip())
        else:
            out["workers"] = int(value)
    elif section == "output":
        if key == "dir":
            out["out_dir"] = value.strip()
        else:
            out["cache_dir"] = value.strip()


def build_config(file_path=None, **flag_overrides) -> ExperimentConfig:
    """Defaults, then file values, then non-None flag overrides."""
    kwargs: dict = {}
    if file_path:
        kwargs.update(load_config_file(file_path))
    for key, value in flag_overrides.items():
        if value is not None:
            kwargs[key] = value
    try:
        return ExperimentConfig(**kwargs)
    except TypeError as e:
        raise ConfigError(str(e)) from e
