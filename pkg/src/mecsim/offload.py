"""Phase 2: per-user split of a task into offloaded and locally processed bits.

Once association fixes the per-user rate and server CPU share, the per-user
objective (local compute energy plus weighted transmission energy) is linear
in the offloaded bit count, and the deadline constraints carve an interval
out of [0, task size]. The optimum therefore sits at an interval endpoint;
:func:`optimal_offload` picks it in closed form and
:func:`oracle_offload_grid` independently brute-forces the same problem on a
dense grid for verification.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import cost

__all__ = [
    "OffloadContext",
    "OffloadDecision",
    "offload_bounds",
    "optimal_offload",
    "oracle_offload_grid",
    "baseline_offload",
    "total_energy",
    "constraint_latencies",
    "clamped_decision",
]


@dataclass(frozen=True)
class OffloadContext:
    """Frozen per-user inputs of the split problem."""

    task_bits: float
    rate_bps: float  # uplink rate with the final per-server user count
    gamma_server: float  # server CPU share, cycles/s
    gamma_local: float  # device CPU, cycles/s
    cycles_per_bit: float
    tx_power_w: float
    eta_local: float
    deadline_s: float
    omega: float = 1.0

    def __post_init__(self):
        if self.task_bits < 0.0:
            raise ValueError("task_bits must be nonnegative")
        if self.gamma_local <= 0.0 or self.cycles_per_bit <= 0.0:
            raise ValueError("gamma_local and cycles_per_bit must be positive")
        if self.tx_power_w <= 0.0 or self.deadline_s <= 0.0:
            raise ValueError("tx_power_w and deadline_s must be positive")
        if self.rate_bps < 0.0 or self.gamma_server < 0.0:
            raise ValueError("rate_bps and gamma_server must be nonnegative")
        if self.omega < 0.0:
            raise ValueError("omega must be nonnegative")


@dataclass(frozen=True)
class OffloadDecision:
    """A split decision: offloaded bits, local bits and its objective value."""

    offload_bits: float
    local_bits: float
    feasible: bool
    objective_j: float
    bound_lo: float
    bound_hi: float


def offload_bounds(ctx: OffloadContext) -> tuple[float, float]:
    """Feasible interval [lo, hi] for the offloaded bits; lo > hi means infeasible.

    The local deadline caps how many bits may stay on the device (pushing the
    lower bound up); the server compute plus transmission deadline caps the
    offloaded share.
    """
    d = ctx.task_bits
    lo = max(0.0, d - ctx.gamma_local * ctx.deadline_s / ctx.cycles_per_bit)
    if d == 0.0:
        return 0.0, 0.0
    if ctx.gamma_server <= 0.0 or ctx.rate_bps <= 0.0:
        return lo, 0.0  # nothing can be offloaded; feasible only if lo == 0
    per_bit = ctx.cycles_per_bit / ctx.gamma_server + 1.0 / ctx.rate_bps
    return lo, min(d, ctx.deadline_s / per_bit)


def _objective(ctx: OffloadContext, offload_bits: float) -> float:
    local_bits = ctx.task_bits - offload_bits
    _, local_energy = cost.local_costs(local_bits, ctx.gamma_local, ctx.cycles_per_bit, ctx.eta_local)
    if offload_bits > 0.0:
        _, tx_energy = cost.uplink_costs(offload_bits, ctx.rate_bps, ctx.tx_power_w)
    else:
        tx_energy = 0.0
    return local_energy + ctx.omega * tx_energy


def constraint_latencies(ctx: OffloadContext, offload_bits: float) -> tuple[float, float]:
    """(local latency, server + transmission latency) at a candidate split."""
    local_bits = ctx.task_bits - offload_bits
    local_latency, _ = cost.local_costs(local_bits, ctx.gamma_local, ctx.cycles_per_bit, ctx.eta_local)
    if offload_bits > 0.0:
        if ctx.rate_bps <= 0.0 or ctx.gamma_server <= 0.0:
            return local_latency, math.inf
        tx_latency, _ = cost.uplink_costs(offload_bits, ctx.rate_bps, ctx.tx_power_w)
        server_latency, _ = cost.server_costs(offload_bits, ctx.gamma_server, ctx.cycles_per_bit, 1.0)
        return local_latency, server_latency + tx_latency
    return local_latency, 0.0


def _infeasible(ctx: OffloadContext, lo: float, hi: float) -> OffloadDecision:
    return OffloadDecision(
        offload_bits=0.0,
        local_bits=ctx.task_bits,
        feasible=False,
        objective_j=math.nan,
        bound_lo=lo,
        bound_hi=hi,
    )


def optimal_offload(ctx: OffloadContext) -> OffloadDecision:
    """Exact minimizer of the linear per-user objective over the feasible interval.

    The objective slope in the offloaded bits is
    ``omega * tx_power / rate - eta_local * gamma_local^2 * cycles_per_bit``;
    a positive slope favors keeping bits local (lower endpoint), a negative
    one favors offloading (upper endpoint). Ties go to the lower endpoint,
    which uses the network least.
    """
    lo, hi = offload_bounds(ctx)
    if lo > hi:
        return _infeasible(ctx, lo, hi)
    local_per_bit = ctx.eta_local * ctx.gamma_local**2 * ctx.cycles_per_bit
    if ctx.rate_bps > 0.0:
        slope = ctx.omega * ctx.tx_power_w / ctx.rate_bps - local_per_bit
    else:
        slope = math.inf  # transmission impossible; hi is 0 anyway
    alpha = hi if slope < 0.0 else lo
    return OffloadDecision(
        offload_bits=alpha,
        local_bits=ctx.task_bits - alpha,
        feasible=True,
        objective_j=_objective(ctx, alpha),
        bound_lo=lo,
        bound_hi=hi,
    )


def oracle_offload_grid(ctx: OffloadContext, grid_points: int = 10_000) -> OffloadDecision:
    """Brute-force reference: evaluate the objective on an even grid over
    [0, task_bits], drop points violating either deadline constraint directly,
    and return the best survivor (ties -> smallest offload)."""
    if grid_points < 2:
        raise ValueError("grid_points must be >= 2")
    d = ctx.task_bits
    lo, hi = offload_bounds(ctx)
    alphas = np.linspace(0.0, d, grid_points)
    local_bits = d - alphas
    local_lat = ctx.cycles_per_bit * local_bits / ctx.gamma_local
    if ctx.rate_bps > 0.0 and ctx.gamma_server > 0.0:
        off_lat = ctx.cycles_per_bit * alphas / ctx.gamma_server + alphas / ctx.rate_bps
        tx_energy = ctx.tx_power_w * alphas / ctx.rate_bps
    else:
        off_lat = np.where(alphas > 0.0, math.inf, 0.0)
        tx_energy = np.zeros_like(alphas)
    ok = (local_lat <= ctx.deadline_s) & (off_lat <= ctx.deadline_s)
    if not ok.any():
        return _infeasible(ctx, lo, hi)
    objective = ctx.eta_local * ctx.gamma_local**2 * ctx.cycles_per_bit * local_bits + ctx.omega * tx_energy
    objective = np.where(ok, objective, math.inf)
    best = int(np.argmin(objective))  # argmin takes the first (smallest alpha) tie
    alpha = float(alphas[best])
    return OffloadDecision(
        offload_bits=alpha,
        local_bits=d - alpha,
        feasible=True,
        objective_j=float(objective[best]),
        bound_lo=lo,
        bound_hi=hi,
    )


def baseline_offload(ctx: OffloadContext, policy: str) -> OffloadDecision:
    """Fixed split policies: offload half ("equal") or everything ("all").

    Feasibility against both deadlines is evaluated and reported, but the
    decision is never altered.
    """
    if policy == "equal":
        alpha = ctx.task_bits / 2.0
    elif policy == "all":
        alpha = ctx.task_bits
    else:
        raise ValueError("policy must be 'equal' or 'all'")
    local_lat, off_lat = constraint_latencies(ctx, alpha)
    feasible = local_lat <= ctx.deadline_s and off_lat <= ctx.deadline_s
    lo, hi = offload_bounds(ctx)
    return OffloadDecision(
        offload_bits=alpha,
        local_bits=ctx.task_bits - alpha,
        feasible=feasible,
        objective_j=_objective(ctx, alpha) if feasible else math.nan,
        bound_lo=lo,
        bound_hi=hi,
    )


def clamped_decision(ctx: OffloadContext) -> OffloadDecision:
    """Best-effort split for an infeasible context: pin the offload at the
    local-deadline bound (clamped into [0, task_bits]); the offload-side
    deadline stays violated and the decision stays flagged infeasible."""
    lo, hi = offload_bounds(ctx)
    alpha = min(max(lo, 0.0), ctx.task_bits)
    return OffloadDecision(
        offload_bits=alpha,
        local_bits=ctx.task_bits - alpha,
        feasible=False,
        objective_j=_objective(ctx, alpha),
        bound_lo=lo,
        bound_hi=hi,
    )


def total_energy(
    decisions: list[OffloadDecision],
    ctxs: list[OffloadContext],
    omega: float | None = None,
    include_infeasible: bool = False,
) -> float:
    """Sum of per-user local energies plus weighted transmission energies.

    Infeasible decisions are skipped unless ``include_infeasible`` is set
    (used by the clamp policy). ``omega`` overrides the per-context weight.
    """
    if len(decisions) != len(ctxs):
        raise ValueError("decisions and contexts must align")
    total = 0.0
    for decision, ctx in zip(decisions, ctxs):
        if not decision.feasible and not include_infeasible:
            continue
        w = ctx.omega if omega is None else omega
        _, local_energy = cost.local_costs(
            decision.local_bits, ctx.gamma_local, ctx.cycles_per_bit, ctx.eta_local
        )
        if decision.offload_bits > 0.0:
            _, tx_energy = cost.uplink_costs(decision.offload_bits, ctx.rate_bps, ctx.tx_power_w)
        else:
            tx_energy = 0.0
        total += local_energy + w * tx_energy
    return total
