"""Surplus-process view of a server buffer: path simulation, ruin estimation.

The free buffer is modeled as a surplus process: it starts at an initial
level, refills at a constant premium rate (bits drained per slot by task
processing) and takes random downward jumps (claims) when offloaded data
arrives. A server is "ruined" within the horizon when the surplus drops
strictly below the tolerance ``epsilon``; ``epsilon = 0`` recovers plain
negative-surplus ruin. Ruin is checked in continuous time: with a
nonnegative premium only claim instants can create new path minima, so
post-claim values (plus the initial point) suffice.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import _kernels

__all__ = [
    "SurplusParams",
    "RuinEstimate",
    "RUIN_PROBABILITY_FLOOR",
    "simulate_surplus_path",
    "ruin_probability_mc",
    "ruin_probability_analytic",
    "priority_factor",
]

# Floor substituted for a zero ruin probability so priority ordering by task
# size survives at risk-free servers.
RUIN_PROBABILITY_FLOOR = 1e-12

_SCHEDULES = ("poisson", "per_slot")


@dataclass(frozen=True)
class SurplusParams:
    """Parameters of one surplus process, all in bits and slots.

    ``claim_mean_param`` is the rate of the exponential claim-size
    distribution (1/bits), so mean claim size is ``1/claim_mean_param``.
    ``claim_schedule`` selects Poisson claim epochs (default) or exactly one
    claim per slot; the latter is the regime matched by the analytic series.
    """

    initial_surplus: float
    premium_rate: float
    claim_intensity: float
    claim_mean_param: float
    horizon: float
    epsilon: float = 0.0
    tau: float = 1.0
    claim_schedule: str = "poisson"

    def __post_init__(self):
        if self.initial_surplus < 0.0:
            raise ValueError("initial_surplus must be nonnegative")
        if self.premium_rate < 0.0:
            raise ValueError("premium_rate must be nonnegative")
        if self.claim_intensity < 0.0:
            raise ValueError("claim_intensity must be nonnegative")
        if self.claim_mean_param <= 0.0:
            raise ValueError("claim_mean_param must be positive")
        if self.horizon <= 0.0:
            raise ValueError("horizon must be positive")
        if self.tau <= 0.0:
            raise ValueError("tau must be positive")
        if self.claim_schedule not in _SCHEDULES:
            raise ValueError(f"claim_schedule must be one of {_SCHEDULES}")


@dataclass(frozen=True)
class RuinEstimate:
    """A ruin probability with its provenance."""

    probability: float
    std_error: float
    method: str
    n_terms_or_paths: int
    clamped: bool = False

    def __post_init__(self):
        if not 0.0 <= self.probability <= 1.0:
            raise ValueError("probability must lie in [0, 1]")
        if self.std_error < 0.0:
            raise ValueError("std_error must be nonnegative")


def _simulate(params: SurplusParams, n_paths: int, seed: int, backend=None):
    return _kernels.simulate_surplus_paths(
        n_paths,
        seed,
        params.initial_surplus,
        params.premium_rate,
        params.claim_intensity,
        1.0 / params.claim_mean_param,
        params.horizon,
        per_slot=params.claim_schedule == "per_slot",
        backend=backend,
    )


def simulate_surplus_path(params: SurplusParams, seed: int) -> tuple[float, float]:
    """Simulate one surplus path; returns (path minimum, terminal surplus)."""
    mins, finals = _simulate(params, 1, seed)
    return float(mins[0]), float(finals[0])


def ruin_probability_mc(
    params: SurplusParams,
    n_paths: int,
    seed: int,
    backend: str | None = None,
) -> RuinEstimate:
    """Monte Carlo ruin estimate: fraction of paths whose minimum dips below epsilon.

    Deterministic for fixed (params, n_paths, seed); paths use independent
    sub-streams derived as hash(seed, path_index).
    """
    if n_paths < 100:
        raise ValueError("n_paths must be >= 100")
    mins, _ = _simulate(params, n_paths, seed, backend=backend)
    p_hat = float(np.count_nonzero(mins < params.epsilon)) / n_paths
    se = math.sqrt(p_hat * (1.0 - p_hat) / n_paths)
    return RuinEstimate(p_hat, se, "monte_carlo", n_paths)


def ruin_probability_analytic(
    initial_surplus: float,
    premium_rate: float,
    claim_mean_param: float,
    n_terms: int = 50,
) -> RuinEstimate:
    """Truncated series for the ruin probability with exponential claims.

    Evaluates sum_{j=1..n} [m*c_j]^(j-1)/(j-1)! * exp(-m*c_j) * c_1/c_j with
    c_j = initial_surplus + j*premium_rate and m = claim_mean_param. Term j is
    exactly the probability that ruin first occurs at the j-th claim when one
    claim lands per slot, so the series is the ruin probability of that model
    within n_terms slots. Terms are evaluated in log space to avoid overflow;
    the result is clamped to [0, 1] and ``clamped`` records whether clamping
    fired.
    """
    if n_terms < 1:
        raise ValueError("n_terms must be >= 1")
    if claim_mean_param <= 0.0:
        raise ValueError("claim_mean_param must be positive")
    if initial_surplus < 0.0 or premium_rate < 0.0:
        raise ValueError("surplus and premium must be nonnegative")

    c1 = initial_surplus + premium_rate
    if c1 <= 0.0:
        # No surplus and no income: the first claim ruins with certainty.
        return RuinEstimate(1.0, 0.0, "analytic", n_terms)

    m = claim_mean_param
    log_c1 = math.log(c1)
    total = 0.0
    for j in range(1, n_terms + 1):
        cj = initial_surplus + j * premium_rate
        log_term = (j - 1) * math.log(m * cj) - math.lgamma(j) - m * cj + log_c1 - math.log(cj)
        total += math.exp(log_term)

    clamped = total > 1.0 or total < 0.0
    return RuinEstimate(min(max(total, 0.0), 1.0), 0.0, "analytic", n_terms, clamped=clamped)


def priority_factor(task_bits: float, ruin_probability: float) -> float:
    """Admission priority of a task at a server: task size over ruin risk.

    Smaller values are admitted first. A zero risk is floored at
    ``RUIN_PROBABILITY_FLOOR`` so ordering by task size is preserved.
    """
    if task_bits < 0.0:
        raise ValueError("task_bits must be nonnegative")
    if ruin_probability < 0.0 or ruin_probability > 1.0:
        raise ValueError("ruin_probability must lie in [0, 1]")
    if task_bits == 0.0:
        return 0.0
    return task_bits / max(ruin_probability, RUIN_PROBABILITY_FLOOR)
