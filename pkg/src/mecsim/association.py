"""Phase 1: assigning users to servers against limited buffer space.

Three methods share the SNR-based user preference lists:

* :func:`ruin_association` — synchronous proposal rounds. Every unassigned
  user proposes to its best untried server; each server ranks the round's
  proposers by priority (task size over the server's current ruin
  probability, ascending) and admits them while the task still fits in the
  buffer above the tolerance. Rejected users strike that server and try the
  next one; admissions are permanent.
* :func:`baseline_association_greedy` — one round only, admissions in user
  index order, no re-proposal.
* :func:`baseline_association_uncapped` — everyone lands on its top-SNR
  server; the (possibly negative) residual buffer is tracked, not enforced.

All methods are deterministic: ties break by ascending user index, then
ascending server index.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from . import radio
from .ruin import priority_factor
from .scenario import Scenario

__all__ = [
    "Association",
    "PreferenceProfiles",
    "AdmissionMetrics",
    "build_user_preferences",
    "build_preference_profiles",
    "ruin_association",
    "baseline_association_greedy",
    "baseline_association_uncapped",
    "admission_metrics",
]

PsiProvider = Callable[[int, float], float]


@dataclass(frozen=True)
class Association:
    """Outcome of one association run."""

    assignment: np.ndarray  # (n_users,) server index or -1
    admitted_sets: tuple[tuple[int, ...], ...]  # per-server users in admission order
    residual_buffer: np.ndarray  # (n_servers,) bits; may go negative for uncapped
    rounds: int
    proposal_events: int

    def __post_init__(self):
        self.assignment.setflags(write=False)
        self.residual_buffer.setflags(write=False)


@dataclass(frozen=True)
class PreferenceProfiles:
    """User-side SNR ranking and server-side priority ranking of proposers."""

    user_prefs: tuple[tuple[int, ...], ...]
    server_prefs: tuple[tuple[int, ...], ...]


@dataclass(frozen=True)
class AdmissionMetrics:
    admitted_fraction_pct: float
    buffer_usage_bits: np.ndarray  # per server
    sum_buffer_usage_bits: float
    zero_denominator: bool


def _snr_matrix(scenario: Scenario) -> np.ndarray:
    """Per-link SNR over each server's full band (used for preference ranking)."""
    if scenario.n_users == 0:
        return np.zeros((0, scenario.n_servers))
    noise = np.array(
        [
            radio.noise_power_w(
                scenario.channel.noise_psd_dbm_hz, s.bandwidth, scenario.channel.interference_dbm
            )
            for s in scenario.servers
        ]
    )
    power = np.array([u.tx_power for u in scenario.users])
    return power[:, None] * scenario.gain_matrix / noise[None, :]


def build_user_preferences(scenario: Scenario) -> list[list[int]]:
    """Each user's servers sorted by SNR descending, ties by server index."""
    snr = _snr_matrix(scenario)
    prefs: list[list[int]] = []
    idx = np.arange(scenario.n_servers)
    for k in range(scenario.n_users):
        order = np.lexsort((idx, -snr[k]))
        prefs.append([int(n) for n in order])
    return prefs


def build_preference_profiles(
    scenario: Scenario,
    ruin_probs: Sequence[float] | np.ndarray | PsiProvider,
) -> PreferenceProfiles:
    """Profiles for the opening round: user SNR rankings and, per server, the
    first-round proposers ranked by admission priority."""
    psi = _resolve_psi(ruin_probs, scenario.n_servers)
    task = scenario.task_bits()
    user_prefs = build_user_preferences(scenario)
    proposers: list[list[int]] = [[] for _ in range(scenario.n_servers)]
    for u, prefs in enumerate(user_prefs):
        if prefs:
            proposers[prefs[0]].append(u)
    server_prefs = []
    for server, members in enumerate(proposers):
        risk = psi(server, float(scenario.servers[server].buffer_free_init))
        server_prefs.append(sorted(members, key=lambda u: (priority_factor(task[u], risk), u)))
    return PreferenceProfiles(
        user_prefs=tuple(tuple(p) for p in user_prefs),
        server_prefs=tuple(tuple(p) for p in server_prefs),
    )


def _resolve_psi(ruin_probs, n_servers: int) -> PsiProvider:
    if callable(ruin_probs):
        return ruin_probs
    probs = np.asarray(ruin_probs, dtype=float)
    if probs.shape != (n_servers,):
        raise ValueError(f"ruin_probs must have shape ({n_servers},)")
    if np.any(probs < 0.0) or np.any(probs > 1.0):
        raise ValueError("ruin probabilities must lie in [0, 1]")
    return lambda server, residual: float(probs[server])


def _epsilons(scenario: Scenario, epsilon_bits) -> np.ndarray:
    if epsilon_bits is None:
        return np.array([s.epsilon for s in scenario.servers], dtype=float)
    eps = np.asarray(epsilon_bits, dtype=float)
    if eps.ndim == 0:
        eps = np.full(scenario.n_servers, float(eps))
    return eps


def ruin_association(
    scenario: Scenario,
    ruin_probs: Sequence[float] | np.ndarray | PsiProvider,
    epsilon_bits: Sequence[float] | float | None = None,
    *,
    literal_or: bool = False,
) -> Association:
    """Round-based association driven by buffer-risk priorities.

    ``ruin_probs`` is either a per-server probability vector or a callable
    ``(server_index, residual_bits) -> probability`` re-evaluated every round
    at the server's current residual buffer. ``epsilon_bits`` defaults to the
    per-server tolerances in the scenario. With ``literal_or`` servers keep
    admitting below the tolerance floor (guard ``task <= residual`` instead of
    ``task <= residual - epsilon``); kept for comparison runs only.
    """
    k, n = scenario.n_users, scenario.n_servers
    psi = _resolve_psi(ruin_probs, n)
    eps = _epsilons(scenario, epsilon_bits)
    task = scenario.task_bits()

    prefs = build_user_preferences(scenario)
    next_choice = [0] * k
    assignment = np.full(k, -1, dtype=int)
    residual = np.array([s.buffer_free_init for s in scenario.servers], dtype=float)
    admitted: list[list[int]] = [[] for _ in range(n)]

    rounds = 0
    proposal_events = 0
    unassigned = list(range(k))
    while True:
        proposals: dict[int, list[int]] = {}
        for u in unassigned:
            if next_choice[u] < len(prefs[u]):
                proposals.setdefault(prefs[u][next_choice[u]], []).append(u)
        if not proposals:
            break
        rounds += 1
        for server in sorted(proposals):
            proposers = proposals[server]
            proposal_events += len(proposers)
            risk = psi(server, float(residual[server]))
            ranked = sorted(proposers, key=lambda u: (priority_factor(task[u], risk), u))
            budget_floor = 0.0 if literal_or else eps[server]
            for u in ranked:
                if task[u] <= residual[server] - budget_floor:
                    residual[server] -= task[u]
                    admitted[server].append(u)
                    assignment[u] = server
                else:
                    # ranked ascending by size: nothing after u fits either
                    break
            for u in proposers:
                if assignment[u] != server:
                    next_choice[u] += 1
        unassigned = [u for u in unassigned if assignment[u] < 0]
        if not unassigned:
            break

    return Association(
        assignment=assignment,
        admitted_sets=tuple(tuple(a) for a in admitted),
        residual_buffer=residual,
        rounds=rounds,
        proposal_events=proposal_events,
    )


def baseline_association_greedy(
    scenario: Scenario,
    epsilon_bits: Sequence[float] | float | None = None,
) -> Association:
    """Single-shot association: top-SNR server only, admissions in index order.

    Each server admits the longest prefix of its proposers (by user index)
    that fits in the buffer above the tolerance; everyone else stays
    unassociated.
    """
    k, n = scenario.n_users, scenario.n_servers
    eps = _epsilons(scenario, epsilon_bits)
    task = scenario.task_bits()
    prefs = build_user_preferences(scenario)

    assignment = np.full(k, -1, dtype=int)
    residual = np.array([s.buffer_free_init for s in scenario.servers], dtype=float)
    admitted: list[list[int]] = [[] for _ in range(n)]

    proposals: dict[int, list[int]] = {}
    for u in range(k):
        if prefs[u]:
            proposals.setdefault(prefs[u][0], []).append(u)
    events = 0
    for server in sorted(proposals):
        events += len(proposals[server])
        for u in proposals[server]:  # already in ascending user index
            if task[u] <= residual[server] - eps[server]:
                residual[server] -= task[u]
                admitted[server].append(u)
                assignment[u] = server
            else:
                break

    return Association(
        assignment=assignment,
        admitted_sets=tuple(tuple(a) for a in admitted),
        residual_buffer=residual,
        rounds=1 if k else 0,
        proposal_events=events,
    )


def baseline_association_uncapped(scenario: Scenario) -> Association:
    """Every user joins its top-SNR server; buffer limits are ignored.

    The residual buffer is still tracked and may go negative.
    """
    k, n = scenario.n_users, scenario.n_servers
    task = scenario.task_bits()
    prefs = build_user_preferences(scenario)

    assignment = np.full(k, -1, dtype=int)
    residual = np.array([s.buffer_free_init for s in scenario.servers], dtype=float)
    admitted: list[list[int]] = [[] for _ in range(n)]
    for u in range(k):
        if prefs[u]:
            server = prefs[u][0]
            assignment[u] = server
            admitted[server].append(u)
            residual[server] -= task[u]

    return Association(
        assignment=assignment,
        admitted_sets=tuple(tuple(a) for a in admitted),
        residual_buffer=residual,
        rounds=1 if k else 0,
        proposal_events=k,
    )


def admission_metrics(assoc: Association, scenario: Scenario) -> AdmissionMetrics:
    """Admitted percentage and buffer usage; empty scenarios count as fully admitted."""
    k = scenario.n_users
    task = scenario.task_bits()
    usage = np.zeros(scenario.n_servers)
    for server, members in enumerate(assoc.admitted_sets):
        usage[server] = float(task[list(members)].sum()) if members else 0.0
    if k == 0:
        return AdmissionMetrics(100.0, usage, float(usage.sum()), zero_denominator=True)
    admitted = int(np.count_nonzero(assoc.assignment >= 0))
    return AdmissionMetrics(100.0 * admitted / k, usage, float(usage.sum()), zero_denominator=False)
