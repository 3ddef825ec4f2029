"""Domain records, configuration validation and randomized scenario generation.

All data sizes are held internally in bits. Config files use unit-suffixed
keys (``_mb``, ``_kb``, ``_mw``, ``_ms`` ...) with decimal conversions:
1 KB = 8000 bits, 1 MB = 8e6 bits.

A :class:`Scenario` is immutable after construction and safe for shared
concurrent reads; generation is a pure function of (config, seed).
"""

from __future__ import annotations

import copy
import math
from dataclasses import dataclass, field
from typing import Any

import numpy as np

from . import radio

__all__ = [
    "BITS_PER_KB",
    "BITS_PER_MB",
    "ConfigValidationError",
    "ServerSpec",
    "UserSpec",
    "ChannelParams",
    "Scenario",
    "SimConfig",
    "DEFAULT_CONFIG",
    "merge_config",
    "validate_config",
    "generate_scenario",
]

BITS_PER_KB = 8_000
BITS_PER_MB = 8_000_000


class ConfigValidationError(ValueError):
    """Carries every (field path, reason) pair found while validating."""

    def __init__(self, errors: list[tuple[str, str]]):
        self.errors = list(errors)
        lines = "; ".join(f"{path}: {reason}" for path, reason in self.errors)
        super().__init__(f"invalid configuration: {lines}")


@dataclass(frozen=True)
class ServerSpec:
    """One edge server: geometry, buffer state and compute/radio capacity."""

    id: int
    position: tuple[float, float]
    buffer_total: float  # bits
    buffer_free_init: float  # bits
    cpu_rate: float  # cycles/s
    bandwidth: float  # Hz
    epsilon: float  # bits, buffer floor below which the server counts as overloaded
    eta_server: float  # J*s^2/cycle^3

    def __post_init__(self):
        if not 0.0 <= self.buffer_free_init <= self.buffer_total:
            raise ValueError("buffer_free_init must lie in [0, buffer_total]")
        if not 0.0 <= self.epsilon <= self.buffer_free_init:
            raise ValueError("epsilon must lie in [0, buffer_free_init]")
        if self.cpu_rate <= 0.0 or self.bandwidth <= 0.0:
            raise ValueError("cpu_rate and bandwidth must be positive")


@dataclass(frozen=True)
class UserSpec:
    """One mobile user: geometry, task and device parameters."""

    id: int
    position: tuple[float, float]
    task_bits: float
    tx_power: float  # W
    cpu_rate: float  # cycles/s
    eta_local: float  # J*s^2/cycle^3
    deadline: float  # s

    def __post_init__(self):
        if self.task_bits < 0.0:
            raise ValueError("task_bits must be nonnegative")
        if self.tx_power <= 0.0 or self.cpu_rate <= 0.0 or self.deadline <= 0.0:
            raise ValueError("tx_power, cpu_rate and deadline must be positive")


@dataclass(frozen=True)
class ChannelParams:
    """Propagation and compute-translation constants plus frozen fading draws.

    ``fading_db`` holds one fast-fading term per (user, server) link,
    quasi-static for the scenario lifetime; ``None`` means no fading.
    """

    pl_ref_db: float
    ref_distance_m: float
    pl_exponent: float
    noise_psd_dbm_hz: float
    cycles_per_bit: float
    fading_db: np.ndarray | None = None
    interference_dbm: float | None = None

    def __post_init__(self):
        if self.ref_distance_m <= 0.0 or self.pl_exponent <= 0.0 or self.cycles_per_bit <= 0.0:
            raise ValueError("ref_distance_m, pl_exponent and cycles_per_bit must be positive")


@dataclass(frozen=True)
class Scenario:
    """Immutable world description for one simulation run."""

    servers: tuple[ServerSpec, ...]
    users: tuple[UserSpec, ...]
    channel: ChannelParams
    gain_matrix: np.ndarray  # (n_users, n_servers) linear gains
    seed: int

    def __post_init__(self):
        expected = (len(self.users), len(self.servers))
        if self.gain_matrix.shape != expected:
            raise ValueError(f"gain_matrix shape {self.gain_matrix.shape} != {expected}")
        self.gain_matrix.setflags(write=False)

    @property
    def n_users(self) -> int:
        return len(self.users)

    @property
    def n_servers(self) -> int:
        return len(self.servers)

    def task_bits(self) -> np.ndarray:
        return np.array([u.task_bits for u in self.users], dtype=float)


# --- configuration ----------------------------------------------------------

DEFAULT_CONFIG: dict[str, Any] = {
    "area": {
        "width_m": 5000.0,
        "height_m": 5000.0,
    },
    "servers": {
        "count": 3,
        # positions_m: optional [[x, y], ...]; default ring layout (see below)
        "buffer_total_mb": 8.0,
        "buffer_free_mb": 8.0,
        "epsilon_mb": 2.0,
        "cpu_rate_hz": 6.0e5,
        "bandwidth_mhz": 20.0,
        "eta": 1.0e-28,
    },
    "users": {
        "count": 100,
        "task_min_kb": 0.0,  # task sizes uniform over (task_min_kb, task_max_kb]
        "task_max_kb": 100.0,  # min == max pins every task at that size
        "tx_power_mw": 200.0,
        "cpu_rate_hz": 7.0e4,
        "eta": 1.0e-28,
        "deadline_ms": 100.0,
    },
    "channel": {
        "pl_ref_db": 30.0,
        "ref_distance_m": 1.0,
        "pl_exponent": 3.0,
        "noise_psd_dbm_hz": -174.0,
        "cycles_per_bit": 10.0,
        "fading": "rayleigh",  # or "none"
        # interference_dbm: optional constant inter-cell term, omitted = off
    },
    "ruin": {
        "initial_mb": 8.0,
        "epsilon_mb": 2.0,
        # premium_mb_per_slot: optional; default derives from server cpu_rate
        "claim_unit_mb": 1.0,
        "claim_mu": 1.0,  # mean claim size = claim_mu * claim_unit_mb
        "claim_intensity_per_slot": 1.0,
        "claim_schedule": "poisson",
        "horizon_slots": 50,
        "tau_s": 1.0,
        "mc_paths": 2000,
        "analytic_terms": 50,
        "algorithm1_literal_or": False,
    },
    "offload": {
        "omega": 1.0,
        "server_cpu_split": "equal",  # or "full"
        "infeasible_policy": "exclude",  # or "clamp_alpha_lo"
        "grid_points": 10000,
    },
    "experiment": {
        "replications": 500,
        "seed": 42,
    },
}


def merge_config(raw: dict[str, Any] | None) -> dict[str, Any]:
    """Overlay a partial raw config onto the defaults (two-level deep merge)."""
    merged = copy.deepcopy(DEFAULT_CONFIG)
    for section, values in (raw or {}).items():
        if isinstance(values, dict):
            merged.setdefault(section, {}).update(values)
        else:
            merged[section] = values
    return merged


class _Checker:
    def __init__(self, tree: dict[str, Any]):
        self.tree = tree
        self.errors: list[tuple[str, str]] = []

    def get(self, section: str, key: str, default=None):
        return self.tree.get(section, {}).get(key, default)

    def number(self, section, key, *, minimum=None, positive=False, default=None):
        value = self.get(section, key, default)
        path = f"{section}.{key}"
        if value is None:
            self.errors.append((path, "missing required key"))
            return None
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            self.errors.append((path, f"expected a number, got {type(value).__name__}"))
            return None
        value = float(value)
        if math.isnan(value) or math.isinf(value):
            self.errors.append((path, "must be finite"))
            return None
        if positive and value <= 0.0:
            self.errors.append((path, "must be positive"))
            return None
        if minimum is not None and value < minimum:
            self.errors.append((path, f"must be >= {minimum}"))
            return None
        return value

    def integer(self, section, key, *, minimum=0, default=None):
        value = self.get(section, key, default)
        path = f"{section}.{key}"
        if value is None:
            self.errors.append((path, "missing required key"))
            return None
        if isinstance(value, bool) or not isinstance(value, int):
            self.errors.append((path, f"expected an integer, got {type(value).__name__}"))
            return None
        if value < minimum:
            self.errors.append((path, f"must be >= {minimum}"))
            return None
        return value

    def choice(self, section, key, options, default=None):
        value = self.get(section, key, default)
        path = f"{section}.{key}"
        if value not in options:
            self.errors.append((path, f"must be one of {options}"))
            return None
        return value


@dataclass(frozen=True)
class SimConfig:
    """Validated, unit-normalized configuration (bits / seconds / watts / Hz)."""

    raw: dict[str, Any] = field(repr=False)
    area_m: tuple[float, float]
    n_servers: int
    server_positions_m: tuple[tuple[float, float], ...] | None
    buffer_total_bits: float
    buffer_free_bits: float
    server_epsilon_bits: float
    server_cpu_rate: float
    bandwidth_hz: float
    eta_server: float
    n_users: int
    task_min_bits: float
    task_max_bits: float
    tx_power_w: float
    user_cpu_rate: float
    eta_local: float
    deadline_s: float
    pl_ref_db: float
    ref_distance_m: float
    pl_exponent: float
    noise_psd_dbm_hz: float
    cycles_per_bit: float
    fading: str
    interference_dbm: float | None
    ruin_initial_bits: float
    ruin_epsilon_bits: float
    ruin_premium_bits_per_slot: float
    ruin_claim_mean_bits: float
    ruin_claim_intensity: float
    ruin_claim_schedule: str
    ruin_horizon_slots: float
    ruin_tau_s: float
    ruin_mc_paths: int
    ruin_analytic_terms: int
    algorithm1_literal_or: bool
    omega: float
    server_cpu_split: str
    infeasible_policy: str
    grid_points: int
    replications: int
    seed: int


def validate_config(raw_config: dict[str, Any] | None) -> SimConfig:
    """Check every invariant, apply defaults and normalize units.

    Raises :class:`ConfigValidationError` carrying one (path, reason) entry
    per offending field.
    """
    tree = merge_config(raw_config)
    c = _Checker(tree)

    width = c.number("area", "width_m", positive=True)
    height = c.number("area", "height_m", positive=True)

    n_servers = c.integer("servers", "count", minimum=1)
    buffer_total = c.number("servers", "buffer_total_mb", minimum=0.0)
    buffer_free = c.number("servers", "buffer_free_mb", minimum=0.0)
    server_eps = c.number("servers", "epsilon_mb", minimum=0.0)
    server_cpu = c.number("servers", "cpu_rate_hz", positive=True)
    bandwidth = c.number("servers", "bandwidth_mhz", positive=True)
    eta_server = c.number("servers", "eta", positive=True)
    if buffer_total is not None and buffer_free is not None and buffer_free > buffer_total:
        c.errors.append(("servers.buffer_free_mb", "free buffer exceeds total buffer"))
    if buffer_free is not None and server_eps is not None and server_eps > buffer_free:
        c.errors.append(("servers.epsilon_mb", "epsilon exceeds free buffer"))

    positions = c.get("servers", "positions_m")
    norm_positions: tuple[tuple[float, float], ...] | None = None
    if positions is not None:
        ok = isinstance(positions, (list, tuple)) and all(
            isinstance(p, (list, tuple)) and len(p) == 2 and all(isinstance(v, (int, float)) for v in p)
            for p in positions
        )
        if not ok:
            c.errors.append(("servers.positions_m", "expected a list of [x, y] pairs"))
        elif n_servers is not None and len(positions) != n_servers:
            c.errors.append(("servers.positions_m", f"expected {n_servers} entries, got {len(positions)}"))
        else:
            norm_positions = tuple((float(p[0]), float(p[1])) for p in positions)

    n_users = c.integer("users", "count", minimum=0)
    task_min = c.number("users", "task_min_kb", minimum=0.0)
    task_max = c.number("users", "task_max_kb", positive=True)
    if task_min is not None and task_max is not None and task_min > task_max:
        c.errors.append(("users.task_min_kb", "minimum task size exceeds maximum"))
    tx_power = c.number("users", "tx_power_mw", positive=True)
    user_cpu = c.number("users", "cpu_rate_hz", positive=True)
    eta_local = c.number("users", "eta", positive=True)
    deadline = c.number("users", "deadline_ms", positive=True)

    pl_ref = c.number("channel", "pl_ref_db")
    ref_d = c.number("channel", "ref_distance_m", positive=True)
    pl_exp = c.number("channel", "pl_exponent", positive=True)
    noise_psd = c.number("channel", "noise_psd_dbm_hz")
    cpb = c.number("channel", "cycles_per_bit", positive=True)
    fading = c.choice("channel", "fading", ("rayleigh", "none"), default=DEFAULT_CONFIG["channel"]["fading"])
    interference = c.get("channel", "interference_dbm")
    if interference is not None:
        interference = c.number("channel", "interference_dbm")

    ruin_initial = c.number("ruin", "initial_mb", minimum=0.0)
    ruin_eps = c.number("ruin", "epsilon_mb", minimum=0.0)
    claim_unit = c.number("ruin", "claim_unit_mb", positive=True)
    claim_mu = c.number("ruin", "claim_mu", positive=True)
    claim_intensity = c.number("ruin", "claim_intensity_per_slot", minimum=0.0)
    claim_schedule = c.choice("ruin", "claim_schedule", ("poisson", "per_slot"),
                              default=DEFAULT_CONFIG["ruin"]["claim_schedule"])
    horizon = c.number("ruin", "horizon_slots", positive=True)
    tau = c.number("ruin", "tau_s", positive=True)
    mc_paths = c.integer("ruin", "mc_paths", minimum=100)
    analytic_terms = c.integer("ruin", "analytic_terms", minimum=1)
    literal_or = bool(c.get("ruin", "algorithm1_literal_or", DEFAULT_CONFIG["ruin"]["algorithm1_literal_or"]))
    premium = c.get("ruin", "premium_mb_per_slot")
    if premium is not None:
        premium = c.number("ruin", "premium_mb_per_slot", minimum=0.0)

    omega = c.number("offload", "omega", minimum=0.0)
    cpu_split = c.choice("offload", "server_cpu_split", ("equal", "full"),
                         default=DEFAULT_CONFIG["offload"]["server_cpu_split"])
    infeasible_policy = c.choice("offload", "infeasible_policy", ("exclude", "clamp_alpha_lo"),
                                 default=DEFAULT_CONFIG["offload"]["infeasible_policy"])
    grid_points = c.integer("offload", "grid_points", minimum=2)

    replications = c.integer("experiment", "replications", minimum=1)
    seed = c.integer("experiment", "seed", minimum=0)

    if c.errors:
        raise ConfigValidationError(c.errors)

    if premium is None:
        # Bits the server drains from its buffer per slot by processing.
        premium_bits = server_cpu * tau / cpb
    else:
        premium_bits = premium * BITS_PER_MB

    return SimConfig(
        raw=tree,
        area_m=(width, height),
        n_servers=n_servers,
        server_positions_m=norm_positions,
        buffer_total_bits=buffer_total * BITS_PER_MB,
        buffer_free_bits=buffer_free * BITS_PER_MB,
        server_epsilon_bits=server_eps * BITS_PER_MB,
        server_cpu_rate=server_cpu,
        bandwidth_hz=bandwidth * 1.0e6,
        eta_server=eta_server,
        n_users=n_users,
        task_min_bits=task_min * BITS_PER_KB,
        task_max_bits=task_max * BITS_PER_KB,
        tx_power_w=tx_power * 1.0e-3,
        user_cpu_rate=user_cpu,
        eta_local=eta_local,
        deadline_s=deadline * 1.0e-3,
        pl_ref_db=pl_ref,
        ref_distance_m=ref_d,
        pl_exponent=pl_exp,
        noise_psd_dbm_hz=noise_psd,
        cycles_per_bit=cpb,
        fading=fading,
        interference_dbm=interference,
        ruin_initial_bits=ruin_initial * BITS_PER_MB,
        ruin_epsilon_bits=ruin_eps * BITS_PER_MB,
        ruin_premium_bits_per_slot=premium_bits,
        ruin_claim_mean_bits=claim_mu * claim_unit * BITS_PER_MB,
        ruin_claim_intensity=claim_intensity,
        ruin_claim_schedule=claim_schedule,
        ruin_horizon_slots=horizon,
        ruin_tau_s=tau,
        ruin_mc_paths=mc_paths,
        ruin_analytic_terms=analytic_terms,
        algorithm1_literal_or=literal_or,
        omega=omega,
        server_cpu_split=cpu_split,
        infeasible_policy=infeasible_policy,
        grid_points=grid_points,
        replications=replications,
        seed=seed,
    )


def _default_server_positions(n: int, width: float, height: float) -> list[tuple[float, float]]:
    """Deterministic layout: servers on a ring around the area center."""
    cx, cy = width / 2.0, height / 2.0
    if n == 1:
        return [(cx, cy)]
    r = min(width, height) / 4.0
    out = []
    for i in range(n):
        angle = math.pi / 2.0 + 2.0 * math.pi * i / n
        out.append((cx + r * math.cos(angle), cy + r * math.sin(angle)))
    return out


def generate_scenario(config: SimConfig | dict[str, Any] | None, seed: int) -> Scenario:
    """Build a randomized scenario: placement, task sizes and frozen fading.

    Users are placed uniformly at random over the area; each (user, server)
    link gets one fast-fading draw. Identical (config, seed) pairs yield
    bit-identical scenarios. Distances are clamped below at the reference
    distance, where the log-distance model stops being meaningful.
    """
    if not isinstance(config, SimConfig):
        config = validate_config(config)

    rng = np.random.default_rng(seed)
    k, n = config.n_users, config.n_servers
    width, height = config.area_m

    positions = rng.uniform(low=(0.0, 0.0), high=(width, height), size=(k, 2))
    # uniform over (min, max]: 1 - U puts mass on the closed upper end
    task_bits = config.task_min_bits + (config.task_max_bits - config.task_min_bits) * (1.0 - rng.random(k))
    if config.fading == "rayleigh":
        amplitude = rng.rayleigh(scale=1.0, size=(k, n))
        fading_db = 20.0 * np.log10(np.maximum(amplitude, 1e-300))
    else:
        fading_db = np.zeros((k, n))

    server_positions = (
        list(config.server_positions_m)
        if config.server_positions_m is not None
        else _default_server_positions(n, width, height)
    )

    servers = tuple(
        ServerSpec(
            id=i,
            position=server_positions[i],
            buffer_total=config.buffer_total_bits,
            buffer_free_init=config.buffer_free_bits,
            cpu_rate=config.server_cpu_rate,
            bandwidth=config.bandwidth_hz,
            epsilon=config.server_epsilon_bits,
            eta_server=config.eta_server,
        )
        for i in range(n)
    )
    users = tuple(
        UserSpec(
            id=i,
            position=(float(positions[i, 0]), float(positions[i, 1])),
            task_bits=float(task_bits[i]),
            tx_power=config.tx_power_w,
            cpu_rate=config.user_cpu_rate,
            eta_local=config.eta_local,
            deadline=config.deadline_s,
        )
        for i in range(k)
    )

    channel = ChannelParams(
        pl_ref_db=config.pl_ref_db,
        ref_distance_m=config.ref_distance_m,
        pl_exponent=config.pl_exponent,
        noise_psd_dbm_hz=config.noise_psd_dbm_hz,
        cycles_per_bit=config.cycles_per_bit,
        fading_db=fading_db,
        interference_dbm=config.interference_dbm,
    )

    server_xy = np.array(server_positions, dtype=float).reshape(n, 2)
    deltas = positions[:, None, :] - server_xy[None, :, :]
    distances = np.maximum(np.linalg.norm(deltas, axis=2), config.ref_distance_m)
    if k:
        loss = radio.path_loss_db(distances, channel, fading_db)
        gains = radio.channel_gain(loss)
    else:
        gains = np.zeros((0, n))

    return Scenario(servers=servers, users=users, channel=channel,
                    gain_matrix=np.asarray(gains, dtype=float), seed=seed)
