"""Monte Carlo kernels for the buffer surplus process.

Two interchangeable backends compute the per-path minimum and terminal
surplus:

* a numba ``@njit`` per-path loop (default, used for large path counts), and
* a vectorized pure-numpy lockstep fallback, selected by setting the
  environment variable ``MECSIM_NO_NUMBA=1`` before import (or used
  automatically when numba is unavailable).

Both backends consume identical per-path SplitMix64 streams with an
interleaved draw order (inter-arrival, claim size, inter-arrival, ...), so
they produce the same paths. ``benchmarks/bench_ruin_kernel.py`` compares
their throughput.

Claim schedules:

* ``poisson`` — claim epochs form a Poisson process with ``lam`` claims per
  slot; this is the default surplus model.
* ``per_slot`` — exactly one claim at the end of each whole slot; this is the
  regime described by the truncated analytic ruin series and is used for the
  analytic/Monte-Carlo cross-validation.

Coupling contract (relied on by monotonicity tests): for a fixed seed, claim
``j`` of a path always consumes the same underlying uniforms, and raising the
claim intensity only shifts every claim earlier and appends extra claims.
Hence ruin indicators are pointwise monotone in the initial surplus, the
tolerance, the intensity and the horizon.
"""

from __future__ import annotations

import math
import os

import numpy as np

__all__ = [
    "NUMBA_ENABLED",
    "split_seed",
    "simulate_surplus_paths",
]

_GOLDEN = 0x9E3779B97F4A7C15
_MIX1 = 0xBF58476D1CE4E5B9
_MIX2 = 0x94D049BB133111EB
_MASK = (1 << 64) - 1
_INV_2_53 = 2.0**-53

_GOLDEN_U = np.uint64(_GOLDEN)
_MIX1_U = np.uint64(_MIX1)
_MIX2_U = np.uint64(_MIX2)
_U30 = np.uint64(30)
_U27 = np.uint64(27)
_U31 = np.uint64(31)
_U11 = np.uint64(11)


def _mix64(x: int) -> int:
    """SplitMix64 finalizer on a python int."""
    x &= _MASK
    x ^= x >> 30
    x = (x * _MIX1) & _MASK
    x ^= x >> 27
    x = (x * _MIX2) & _MASK
    x ^= x >> 31
    return x


def split_seed(seed: int, index: int) -> int:
    """Derive the stream seed for one path (or replication) from a master seed.

    Distinct indices map to distinct, well-mixed 64-bit states.
    """
    return _mix64((seed + (index + 1) * _GOLDEN) & _MASK)


def _path_states(seed: int, n_paths: int) -> np.ndarray:
    return np.array([split_seed(seed, i) for i in range(n_paths)], dtype=np.uint64)


# --- numpy fallback backend -------------------------------------------------


def _next_uniform_np(states: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """One SplitMix64 step per state; returns (advanced states, uniforms in [0,1))."""
    states = states + _GOLDEN_U
    z = states.copy()
    z ^= z >> _U30
    z *= _MIX1_U
    z ^= z >> _U27
    z *= _MIX2_U
    z ^= z >> _U31
    return states, (z >> _U11).astype(np.float64) * _INV_2_53


def _simulate_numpy(
    states: np.ndarray,
    initial: float,
    premium: float,
    lam: float,
    claim_mean: float,
    horizon: float,
    per_slot: bool,
) -> tuple[np.ndarray, np.ndarray]:
    n = states.shape[0]
    mins = np.full(n, initial)
    cum = np.zeros(n)

    if per_slot:
        n_claims = int(math.floor(horizon))
        for j in range(1, n_claims + 1):
            states, u = _next_uniform_np(states)
            cum += -np.log(1.0 - u) * claim_mean
            mins = np.minimum(mins, initial + premium * j - cum)
        return mins, initial + premium * horizon - cum

    if lam <= 0.0:
        return mins, np.full(n, initial + premium * horizon)

    t = np.zeros(n)
    active = np.ones(n, dtype=bool)
    while active.any():
        idx = np.nonzero(active)[0]
        sub, u = _next_uniform_np(states[idx])
        states[idx] = sub
        t[idx] += -np.log(1.0 - u) / lam
        done = idx[t[idx] > horizon]
        active[done] = False
        alive = idx[t[idx] <= horizon]
        if alive.size == 0:
            continue
        sub, u2 = _next_uniform_np(states[alive])
        states[alive] = sub
        cum[alive] += -np.log(1.0 - u2) * claim_mean
        mins[alive] = np.minimum(mins[alive], initial + premium * t[alive] - cum[alive])
    return mins, initial + premium * horizon - cum


# --- numba backend ----------------------------------------------------------

NUMBA_ENABLED = os.environ.get("MECSIM_NO_NUMBA", "").strip() not in ("1", "true", "yes")
if NUMBA_ENABLED:
    try:
        from numba import njit
    except ImportError:  # pragma: no cover - numba is a hard dependency
        NUMBA_ENABLED = False

if NUMBA_ENABLED:

    @njit(cache=True, nogil=True)
    def _simulate_numba(states, initial, premium, lam, claim_mean, horizon, per_slot):
        n = states.shape[0]
        mins = np.empty(n)
        finals = np.empty(n)
        for p in range(n):
            s = states[p]
            mn = initial
            cum = 0.0
            if per_slot:
                n_claims = int(math.floor(horizon))
                for j in range(1, n_claims + 1):
                    s += _GOLDEN_U
                    z = s
                    z ^= z >> _U30
                    z *= _MIX1_U
                    z ^= z >> _U27
                    z *= _MIX2_U
                    z ^= z >> _U31
                    u = (z >> _U11) * _INV_2_53
                    cum += -math.log(1.0 - u) * claim_mean
                    v = initial + premium * j - cum
                    if v < mn:
                        mn = v
            elif lam > 0.0:
                t = 0.0
                while True:
                    s += _GOLDEN_U
                    z = s
                    z ^= z >> _U30
                    z *= _MIX1_U
                    z ^= z >> _U27
                    z *= _MIX2_U
                    z ^= z >> _U31
                    u = (z >> _U11) * _INV_2_53
                    t += -math.log(1.0 - u) / lam
                    if t > horizon:
                        break
                    s += _GOLDEN_U
                    z = s
                    z ^= z >> _U30
                    z *= _MIX1_U
                    z ^= z >> _U27
                    z *= _MIX2_U
                    z ^= z >> _U31
                    u = (z >> _U11) * _INV_2_53
                    cum += -math.log(1.0 - u) * claim_mean
                    v = initial + premium * t - cum
                    if v < mn:
                        mn = v
            mins[p] = mn
            finals[p] = initial + premium * horizon - cum
        return mins, finals


def simulate_surplus_paths(
    n_paths: int,
    seed: int,
    initial: float,
    premium: float,
    lam: float,
    claim_mean: float,
    horizon: float,
    per_slot: bool = False,
    backend: str | None = None,
) -> tuple[np.ndarray, np.ndarray]:
    """Simulate ``n_paths`` surplus paths; return (path minima, terminal values).

    ``backend`` forces ``"numba"`` or ``"numpy"``; ``None`` uses the default
    chosen at import time.
    """
    if n_paths < 1:
        raise ValueError("n_paths must be >= 1")
    states = _path_states(seed, n_paths)
    if backend is None:
        backend = "numba" if NUMBA_ENABLED else "numpy"
    if backend == "numba":
        if not NUMBA_ENABLED:
            raise RuntimeError("numba backend requested but disabled/unavailable")
        return _simulate_numba(states, float(initial), float(premium), float(lam),
                               float(claim_mean), float(horizon), per_slot)
    if backend == "numpy":
        return _simulate_numpy(states, float(initial), float(premium), float(lam),
                               float(claim_mean), float(horizon), per_slot)
    raise ValueError(f"unknown backend: {backend!r}")
