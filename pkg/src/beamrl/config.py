"""Experiment configuration: defaults, validation, flat key=value files.

The file format is intentionally plain text (`key = value`, one per line,
`#` comments) so configs diff cleanly and reproduce bit-exactly.  Keys
carry units where they matter (``power_dbm``, ``slot_s``).
"""

import dataclasses
import math
from dataclasses import dataclass, field

from .errors import ConfigError

KNOWN_POLICIES = ("ddrl", "cdrl", "pdrl", "zf_pcsi", "sah", "greedy", "random")
DRL_POLICIES = ("ddrl", "cdrl", "pdrl")

GREEDY_ACTION_LIMIT = 4096


@dataclass
class ExperimentConfig:
    # Array / user dimensions
    m: int = 32  # BS transmit antennas
    n: int = 4  # user receive antennas
    k: int = 4  # users
    n_s: int = 1  # streams per user
    l_paths: int = 20  # multipath components per user

    # Link budget and large-scale fading
    power_dbm: float = 20.0
    noise_dbm: float = -114.0
    distance_m: float = 10.0
    ref_distance_m: float = 1.0
    ref_loss_db: float = 68.0
    pathloss_exp: float = 1.7
    shadow_std_db: float = 1.8

    # Mobility / aging.  197.2 Hz is 3.55 km/h at a 60 GHz carrier and
    # yields slot correlation rho = 0.6514 at 1 ms slots.
    doppler_hz: float = 197.2
    slot_s: float = 1e-3

    # Angles
    spread_aoa_deg: float = 10.0
    spread_aod_deg: float = 10.0

    # Codebooks / action space
    s_t: int = 32
    s_r: int = 4
    num_phases: int = 4

    # DQN hyperparameters
    hidden1: int = 256
    hidden2: int = 256
    replay_capacity: int = 1000
    warmup_slots: int = 200
    batch_size: int = 32
    target_sync: int = 120
    discount: float = 0.1
    penalty_weight: float = 1.0
    eps_start: float = 0.7
    eps_min: float = 0.001
    eps_decay: float = 1e-4
    lr_start: float = 5e-3
    lr_decay: float = 1e-4
    updates_per_slot: int = 1
    normalize_state: bool = True

    # Run orchestration
    policies: tuple = ("ddrl", "zf_pcsi", "sah", "greedy", "random")
    total_slots: int = 200000
    reschedule_slots: tuple = ()
    seeds: tuple = (1,)
    ma_window: int = 500

    def __post_init__(self):
        self.validate()

    # Derived quantities -------------------------------------------------
    @property
    def power_w(self):
        return 10.0 ** ((self.power_dbm - 30.0) / 10.0)

    @property
    def noise_w(self):
        return 10.0 ** ((self.noise_dbm - 30.0) / 10.0)

    @property
    def spread_aoa_rad(self):
        return math.radians(self.spread_aoa_deg)

    @property
    def spread_aod_rad(self):
        return math.radians(self.spread_aod_deg)

    @property
    def num_streams(self):
        return self.k * self.n_s

    @property
    def num_actions(self):
        return self.s_t * self.s_r

    @property
    def state_length(self):
        return 10 * self.k * self.n_s + 3

    def validate(self):
        c = self
        counts = {
            "m": c.m, "n": c.n, "k": c.k, "n_s": c.n_s, "l_paths": c.l_paths,
            "s_t": c.s_t, "s_r": c.s_r, "hidden1": c.hidden1,
            "hidden2": c.hidden2, "replay_capacity": c.replay_capacity,
            "batch_size": c.batch_size, "target_sync": c.target_sync,
            "total_slots": c.total_slots, "ma_window": c.ma_window,
            "updates_per_slot": c.updates_per_slot,
        }
        for name, value in counts.items():
            if int(value) != value or value < 1:
                raise ConfigError(f"{name} must be a positive integer, got {value}")
        if c.num_phases < 2:
            raise ConfigError(f"num_phases must be >= 2, got {c.num_phases}")
        if c.m < c.k * c.n_s:
            raise ConfigError(
                f"m must be >= k*n_s for spatial multiplexing "
                f"(m={c.m}, k*n_s={c.k * c.n_s})"
            )
        if c.n < c.n_s:
            raise ConfigError(f"n must be >= n_s (n={c.n}, n_s={c.n_s})")
        if c.warmup_slots < 2:
            raise ConfigError("warmup_slots must be >= 2 (state needs 2 slots)")
        if c.distance_m < c.ref_distance_m or c.ref_distance_m <= 0:
            raise ConfigError(
                f"need distance_m >= ref_distance_m > 0 "
                f"(got {c.distance_m}, {c.ref_distance_m})"
            )
        if c.shadow_std_db < 0:
            raise ConfigError("shadow_std_db must be >= 0")
        if c.doppler_hz < 0 or c.slot_s <= 0:
            raise ConfigError("need doppler_hz >= 0 and slot_s > 0")
        if not (0.0 <= c.eps_min <= c.eps_start <= 1.0):
            raise ConfigError(
                f"need 0 <= eps_min <= eps_start <= 1 "
                f"(got {c.eps_min}, {c.eps_start})"
            )
        if c.eps_decay < 0 or c.lr_decay < 0 or c.lr_start <= 0:
            raise ConfigError("schedule rates must be nonnegative, lr_start > 0")
        if not 0.0 <= c.discount <= 1.0:
            raise ConfigError(f"discount must be in [0, 1], got {c.discount}")
        if c.penalty_weight < 0:
            raise ConfigError("penalty_weight must be >= 0")
        if not c.policies:
            raise ConfigError("at least one policy must be selected")
        for p in c.policies:
            if p not in KNOWN_POLICIES:
                raise ConfigError(
                    f"unknown policy {p!r}; known: {', '.join(KNOWN_POLICIES)}"
                )
        if "greedy" in c.policies and c.num_actions > GREEDY_ACTION_LIMIT:
            raise ConfigError(
                f"greedy sweep needs s_t*s_r <= {GREEDY_ACTION_LIMIT}, "
                f"got {c.num_actions}"
            )
        if not c.seeds:
            raise ConfigError("at least one seed is required")
        if any(s < c.warmup_slots for s in c.reschedule_slots):
            raise ConfigError("reschedule slots must come after the warm-up")
        if c.batch_size > c.replay_capacity:
            raise ConfigError("batch_size cannot exceed replay_capacity")


def desk_profile(**overrides):
    """Small profile used by CI and the acceptance suite (minutes, not hours)."""
    base = dict(
        m=8, n=2, k=2, n_s=1,
        s_t=8, s_r=2,
        hidden1=128, hidden2=128,
        total_slots=20000,
    )
    base.update(overrides)
    return ExperimentConfig(**base)


_FIELDS = {f.name: f for f in dataclasses.fields(ExperimentConfig)}


def _parse_value(name, text):
    default = _FIELDS[name].default
    text = text.strip()
    try:
        if name == "policies":
            return tuple(t.strip() for t in text.split(",") if t.strip())
        if name in ("reschedule_slots", "seeds"):
            return tuple(int(t) for t in text.split(",") if t.strip())
        if isinstance(default, bool):
            if text.lower() in ("true", "1", "yes"):
                return True
            if text.lower() in ("false", "0", "no"):
                return False
            raise ValueError("not a boolean")
        if isinstance(default, int):
            return int(text)
        if isinstance(default, float):
            return float(text)
    except ValueError as exc:
        raise ConfigError(f"cannot parse {name} = {text!r}: {exc}") from exc
    raise ConfigError(f"unsupported field type for {name}")


def parse_config(text):
    """Parse key=value text into a validated config; unknown keys rejected."""
    values = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw!r}")
        name, _, val = line.partition("=")
        name = name.strip()
        if name not in _FIELDS:
            raise ConfigError(f"line {lineno}: unknown key {name!r}")
        if name in values:
            raise ConfigError(f"line {lineno}: duplicate key {name!r}")
        values[name] = _parse_value(name, val)
    return ExperimentConfig(**values)


def load_config(path):
    """Load a config file; an empty file yields the full default config."""
    try:
        with open(path, "r", encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return parse_config(text)


def format_config(cfg):
    """Render a config as key=value text (deterministic field order)."""
    lines = []
    for f in dataclasses.fields(ExperimentConfig):
        value = getattr(cfg, f.name)
        if isinstance(value, tuple):
            value = ",".join(str(v) for v in value)
        elif isinstance(value, bool):
            value = "true" if value else "false"
        elif isinstance(value, float):
            value = repr(value)
        lines.append(f"{f.name} = {value}")
    return "\n".join(lines) + "\n"


def save_config(cfg, path):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(format_config(cfg))


def config_overrides(base, overrides):
    """Apply a {field: value} dict onto a config, returning a new config."""
    values = dataclasses.asdict(base)
    for name, value in overrides.items():
        if name not in _FIELDS:
            raise ConfigError(f"unknown config key {name!r}")
        if isinstance(values[name], tuple) and isinstance(value, list):
            value = tuple(value)
        values[name] = value
    for name in ("policies", "reschedule_slots", "seeds"):
        if isinstance(values[name], list):
            values[name] = tuple(values[name])
    return ExperimentConfig(**values)
