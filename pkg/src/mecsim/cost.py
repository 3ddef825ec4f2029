"""Latency/energy primitives for transmission, server compute and local compute.

Each operation returns a ``(latency_s, energy_j)`` pair and is exactly linear
in its bits argument. Pure functions, safe for concurrent use.
"""

from __future__ import annotations

from dataclasses import dataclass

__all__ = [
    "CostBreakdown",
    "UnreachableServerError",
    "uplink_costs",
    "server_costs",
    "local_costs",
]


class UnreachableServerError(ValueError):
    """Raised when bits must be transmitted over a zero-rate link."""


@dataclass(frozen=True)
class CostBreakdown:
    """Per-user cost components; transmission energy is tx_power * tx_latency."""

    tx_latency_s: float = 0.0
    tx_energy_j: float = 0.0
    server_latency_s: float = 0.0
    server_energy_j: float = 0.0
    local_latency_s: float = 0.0
    local_energy_j: float = 0.0

    def __post_init__(self):
        for name in (
            "tx_latency_s",
            "tx_energy_j",
            "server_latency_s",
            "server_energy_j",
            "local_latency_s",
            "local_energy_j",
        ):
            if getattr(self, name) < 0.0:
                raise ValueError(f"{name} must be nonnegative")


def uplink_costs(offload_bits: float, rate_bps: float, tx_power_w: float) -> tuple[float, float]:
    """Transmission latency and energy for sending ``offload_bits`` uplink."""
    if offload_bits == 0.0:
        return 0.0, 0.0
    if offload_bits < 0.0:
        raise ValueError("offload_bits must be nonnegative")
    if rate_bps <= 0.0:
        raise UnreachableServerError("positive bits on a zero-rate link")
    latency = offload_bits / rate_bps
    return latency, tx_power_w * latency


def server_costs(
    offload_bits: float,
    server_cycle_rate: float,
    cycles_per_bit: float,
    eta_server: float,
) -> tuple[float, float]:
    """Server-side compute latency and energy for ``offload_bits``."""
    if server_cycle_rate <= 0.0:
        raise ValueError("server cycle rate must be positive")
    if offload_bits < 0.0:
        raise ValueError("offload_bits must be nonnegative")
    latency = cycles_per_bit * offload_bits / server_cycle_rate
    energy = eta_server * server_cycle_rate**2 * cycles_per_bit * offload_bits
    return latency, energy


def local_costs(
    local_bits: float,
    local_cycle_rate: float,
    cycles_per_bit: float,
    eta_local: float,
) -> tuple[float, float]:
    """On-device compute latency and energy for ``local_bits``."""
    if local_cycle_rate <= 0.0:
        raise ValueError("local cycle rate must be positive")
    if local_bits < 0.0:
        raise ValueError("local_bits must be nonnegative")
    latency = cycles_per_bit * local_bits / local_cycle_rate
    energy = eta_local * local_cycle_rate**2 * cycles_per_bit * local_bits
    return latency, energy
