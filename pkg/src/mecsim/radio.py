"""Uplink radio model: log-distance path loss, channel gain, SNR, shared-band rate.

All functions are pure and accept scalars or numpy arrays (broadcasting
rules apply); they are safe for unrestricted concurrent use.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "LinkQuality",
    "path_loss_db",
    "channel_gain",
    "snr",
    "uplink_rate",
    "noise_power_w",
    "dbm_to_watts",
]


@dataclass(frozen=True)
class LinkQuality:
    """Derived radio quantities for one user-server link."""

    path_loss_db: float
    gain: float
    snr: float
    rate_bps: float


def dbm_to_watts(dbm: float) -> float:
    return 10.0 ** ((dbm - 30.0) / 10.0)


def noise_power_w(psd_dbm_hz: float, bandwidth_hz: float, interference_dbm: float | None = None) -> float:
    """Background noise power over a band, optionally plus a fixed interference term.

    The interference term models constant inter-cell leakage as an additive
    power; ``None`` disables it.
    """
    power = dbm_to_watts(psd_dbm_hz) * bandwidth_hz
    if interference_dbm is not None:
        power += dbm_to_watts(interference_dbm)
    return power


def path_loss_db(distance_m, channel, fading_db=0.0):
    """Total path loss in dB under the log-distance model.

    ``channel`` is any object with ``pl_ref_db``, ``ref_distance_m`` and
    ``pl_exponent`` attributes. ``fading_db`` is the fast-fading term added
    on top of the deterministic loss.
    """
    d = np.asarray(distance_m, dtype=float)
    if np.any(d <= 0.0):
        raise ValueError("distance must be positive")
    loss = (
        channel.pl_ref_db
        + 10.0 * channel.pl_exponent * np.log10(d / channel.ref_distance_m)
        + np.asarray(fading_db, dtype=float)
    )
    return loss if loss.ndim else float(loss)


def channel_gain(path_loss_db):
    """Linear power gain from a loss in dB: 10^(-loss/10)."""
    g = 10.0 ** (-np.asarray(path_loss_db, dtype=float) / 10.0)
    return g if g.ndim else float(g)


def snr(tx_power_w, gain, noise_power_w):
    """Received signal-to-noise ratio (linear)."""
    n = np.asarray(noise_power_w, dtype=float)
    if np.any(n <= 0.0):
        raise ValueError("noise power must be positive")
    ratio = np.asarray(tx_power_w, dtype=float) * np.asarray(gain, dtype=float) / n
    return ratio if ratio.ndim else float(ratio)


def uplink_rate(bandwidth_hz, n_associated, snr, associated=1):
    """Achievable uplink rate with the server band split equally among users.

    Returns 0 for unassociated links. ``n_associated`` counts every user
    attached to the server, including those that end up processing locally.
    """
    x = np.asarray(associated)
    n = np.asarray(n_associated)
    if np.any((x != 0) & (n < 1)):
        raise ValueError("associated link requires n_associated >= 1")
    n_safe = np.where(n < 1, 1, n)
    rate = np.where(
        x != 0,
        np.asarray(bandwidth_hz, dtype=float) / n_safe * np.log2(1.0 + np.asarray(snr, dtype=float)),
        0.0,
    )
    return rate if rate.ndim else float(rate)
