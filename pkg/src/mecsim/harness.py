"""Replicated experiments, metric aggregation and CSV emission.

An experiment sweeps one config parameter, runs ``replications`` independent
runs per swept value and records metric rows. Shipped presets (TOML files
under :mod:`mecsim.presets`) cover ruin-probability sweeps, admission
sweeps, a three-method association comparison and a three-policy offloading
comparison; the swept replications use common random numbers (the same
sub-seed across swept values), so monotonicity and ordering checks hold per
replication rather than only in expectation.

Determinism contract: for a fixed (preset, seed) the emitted CSV is
byte-identical across runs and across ``MECSIM_THREADS`` settings.
"""

from __future__ import annotations

import copy
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Iterable

import numpy as np

from . import association as assoc_mod
from . import offload as offload_mod
from . import radio
from ._kernels import split_seed
from .ruin import SurplusParams, ruin_probability_analytic, ruin_probability_mc
from .scenario import SimConfig, generate_scenario, validate_config

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

__all__ = [
    "ExperimentPreset",
    "ExperimentResult",
    "PRESET_NAMES",
    "load_preset",
    "run_experiment",
    "emit_csv",
    "solve_scenario",
    "worker_count",
]

CSV_HEADER = "preset,swept_param,swept_value,replication,metric,value"

PRESET_NAMES = (
    "ruin_vs_epsilon",
    "ruin_vs_mu",
    "admitted_vs_buffer",
    "buffer_usage_comparison",
    "energy_comparison",
    "omega_sweep",
)

_PIPELINES = ("ruin", "association", "offload")


@dataclass(frozen=True)
class ExperimentPreset:
    """A fully specified experiment: base config, swept parameter, seeding."""

    name: str
    pipeline: str
    swept_param: str
    swept_values: tuple
    replications: int
    seed: int
    base_config: dict[str, Any] = field(repr=False)
    coupled: bool = True

    def __post_init__(self):
        if self.pipeline not in _PIPELINES:
            raise ValueError(f"pipeline must be one of {_PIPELINES}")
        if self.replications < 1:
            raise ValueError("replications must be >= 1")
        if not self.swept_values:
            raise ValueError("swept value list must be nonempty")


@dataclass(frozen=True)
class ExperimentResult:
    """Raw metric rows plus aggregates recomputable from them."""

    preset: str
    swept_param: str
    rows: tuple[tuple[str, str, float, int, str, float], ...]
    aggregates: dict[tuple[float, str], tuple[float, float, int]]  # mean, std error, n


def _preset_dir() -> Path:
    return Path(__file__).parent / "presets"


def load_preset(
    name_or_path: str,
    *,
    replications: int | None = None,
    seed: int | None = None,
    config_override: dict[str, Any] | None = None,
) -> ExperimentPreset:
    """Load a shipped preset by name, or any preset TOML by path.

    ``config_override`` entries take precedence over the preset's own config
    sections; ``replications`` and ``seed`` override the preset header.
    """
    path = _preset_dir() / f"{name_or_path}.toml"
    if not path.is_file():
        path = Path(name_or_path)
        if not path.is_file():
            raise FileNotFoundError(f"unknown preset or missing file: {name_or_path}")
    with open(path, "rb") as fh:
        doc = tomllib.load(fh)
    head = doc.get("preset", {})
    base = doc.get("config", {})
    if config_override:
        base = copy.deepcopy(base)
        for section, values in config_override.items():
            if isinstance(values, dict):
                base.setdefault(section, {}).update(values)
            else:
                base[section] = values
    return ExperimentPreset(
        name=head.get("name", path.stem),
        pipeline=head["pipeline"],
        swept_param=head["swept_param"],
        swept_values=tuple(head["swept_values"]),
        replications=replications if replications is not None else int(head.get("replications", 1)),
        seed=seed if seed is not None else int(head.get("seed", 0)),
        base_config=base,
        coupled=bool(head.get("coupled", True)),
    )


def _apply_override(raw: dict[str, Any], dotted: str, value) -> dict[str, Any]:
    out = copy.deepcopy(raw)
    node = out
    parts = dotted.split(".")
    for key in parts[:-1]:
        node = node.setdefault(key, {})
    node[parts[-1]] = value
    return out


def worker_count() -> int:
    """Worker threads for replication-level parallelism.

    ``MECSIM_THREADS`` overrides; 0 or unset means one worker per CPU.
    """
    raw = os.environ.get("MECSIM_THREADS", "").strip()
    auto = os.cpu_count() or 1
    if raw == "":
        return auto
    n = int(raw)
    return auto if n == 0 else max(1, n)


# --- pipelines ---------------------------------------------------------------


def _surplus_params(config: SimConfig) -> SurplusParams:
    return SurplusParams(
        initial_surplus=config.ruin_initial_bits,
        premium_rate=config.ruin_premium_bits_per_slot,
        claim_intensity=config.ruin_claim_intensity,
        claim_mean_param=1.0 / config.ruin_claim_mean_bits,
        horizon=config.ruin_horizon_slots,
        epsilon=config.ruin_epsilon_bits,
        tau=config.ruin_tau_s,
        claim_schedule=config.ruin_claim_schedule,
    )


def _run_ruin(config: SimConfig, sub_seed: int) -> dict[str, float]:
    params = _surplus_params(config)
    mc = ruin_probability_mc(params, config.ruin_mc_paths, sub_seed)
    analytic = ruin_probability_analytic(
        max(config.ruin_initial_bits - config.ruin_epsilon_bits, 0.0),
        config.ruin_premium_bits_per_slot,
        1.0 / config.ruin_claim_mean_bits,
        config.ruin_analytic_terms,
    )
    return {
        "ruin_probability": mc.probability,
        "ruin_probability_se": mc.std_error,
        "ruin_probability_analytic": analytic.probability,
        "analytic_clamped": 1.0 if analytic.clamped else 0.0,
    }


def make_psi_provider(config: SimConfig):
    """Per-round server ruin probability evaluated at the residual buffer."""
    claim_rate = 1.0 / config.ruin_claim_mean_bits
    premium = config.ruin_premium_bits_per_slot
    terms = config.ruin_analytic_terms
    eps = config.server_epsilon_bits

    def psi(server: int, residual_bits: float) -> float:
        surplus = max(residual_bits - eps, 0.0)
        return ruin_probability_analytic(surplus, premium, claim_rate, terms).probability

    return psi


def _run_association(config: SimConfig, sub_seed: int) -> dict[str, float]:
    scenario = generate_scenario(config, sub_seed)
    psi = make_psi_provider(config)
    runs = {
        "ruin": assoc_mod.ruin_association(
            scenario, psi, literal_or=config.algorithm1_literal_or
        ),
        "greedy": assoc_mod.baseline_association_greedy(scenario),
        "uncapped": assoc_mod.baseline_association_uncapped(scenario),
    }
    metrics: dict[str, float] = {}
    for method, result in runs.items():
        m = assoc_mod.admission_metrics(result, scenario)
        metrics[f"admitted_pct_{method}"] = m.admitted_fraction_pct
        metrics[f"sum_buffer_usage_bits_{method}"] = m.sum_buffer_usage_bits
        metrics[f"zero_denominator_{method}"] = 1.0 if m.zero_denominator else 0.0
    metrics["rounds_ruin"] = float(runs["ruin"].rounds)
    return metrics


def build_offload_contexts(
    config: SimConfig, scenario, assoc: assoc_mod.Association
) -> tuple[list[int], list[offload_mod.OffloadContext], list[float]]:
    """Contexts for every associated user, with rates and CPU shares fixed by
    the final per-server association counts. Returns (user ids, contexts,
    per-user server CPU shares)."""
    counts = [len(s) for s in assoc.admitted_sets]
    users, ctxs, shares = [], [], []
    for server_idx, members in enumerate(assoc.admitted_sets):
        if not members:
            continue
        server = scenario.servers[server_idx]
        n_assoc = counts[server_idx]
        band = server.bandwidth / n_assoc
        noise = radio.noise_power_w(
            scenario.channel.noise_psd_dbm_hz, band, scenario.channel.interference_dbm
        )
        share = server.cpu_rate / n_assoc if config.server_cpu_split == "equal" else server.cpu_rate
        for u in members:
            user = scenario.users[u]
            link_snr = radio.snr(user.tx_power, scenario.gain_matrix[u, server_idx], noise)
            rate = radio.uplink_rate(server.bandwidth, n_assoc, link_snr, 1)
            users.append(u)
            ctxs.append(
                offload_mod.OffloadContext(
                    task_bits=user.task_bits,
                    rate_bps=rate,
                    gamma_server=share,
                    gamma_local=user.cpu_rate,
                    cycles_per_bit=scenario.channel.cycles_per_bit,
                    tx_power_w=user.tx_power,
                    eta_local=user.eta_local,
                    deadline_s=user.deadline,
                    omega=config.omega,
                )
            )
            shares.append(share)
    return users, ctxs, shares


def _run_offload(config: SimConfig, sub_seed: int) -> dict[str, float]:
    scenario = generate_scenario(config, sub_seed)
    assoc = assoc_mod.ruin_association(
        scenario, make_psi_provider(config), literal_or=config.algorithm1_literal_or
    )
    users, ctxs, shares = build_offload_contexts(config, scenario, assoc)

    optimal = [offload_mod.optimal_offload(c) for c in ctxs]
    equal = [offload_mod.baseline_offload(c, "equal") for c in ctxs]
    full = [offload_mod.baseline_offload(c, "all") for c in ctxs]

    if config.infeasible_policy == "clamp_alpha_lo":
        optimal = [
            offload_mod.clamped_decision(c) if not d.feasible else d
            for c, d in zip(ctxs, optimal)
        ]

    # Energy totals compare the three policies on the same user set: a user
    # counts only when every policy is feasible for it, so per-replication
    # orderings are exact by optimality rather than affected by set changes.
    counted = [
        i
        for i in range(len(ctxs))
        if optimal[i].feasible and equal[i].feasible and full[i].feasible
    ]
    metrics: dict[str, float] = {}
    for label, decisions in (("optimal", optimal), ("equal", equal), ("all", full)):
        picked = [decisions[i] for i in counted]
        picked_ctxs = [ctxs[i] for i in counted]
        metrics[f"total_energy_j_{label}"] = offload_mod.total_energy(picked, picked_ctxs)
        server_energy = 0.0
        for i in counted:
            # server-side compute energy, reported only, never in the objective
            server_energy += (
                scenario.servers[int(assoc.assignment[users[i]])].eta_server
                * shares[i] ** 2
                * scenario.channel.cycles_per_bit
                * decisions[i].offload_bits
            )
        metrics[f"server_energy_j_{label}"] = server_energy
    metrics["n_associated"] = float(len(ctxs))
    metrics["n_counted"] = float(len(counted))
    metrics["n_infeasible_ctx"] = float(sum(1 for d in optimal if not d.feasible))
    return metrics


_PIPELINE_FUNCS = {
    "ruin": _run_ruin,
    "association": _run_association,
    "offload": _run_offload,
}


# --- runner ------------------------------------------------------------------


def run_experiment(preset: ExperimentPreset) -> ExperimentResult:
    """Run every (swept value, replication) cell and aggregate the metrics.

    Sub-seeds derive from hash(seed, replication); coupled presets reuse them
    across swept values (common random numbers). Jobs may run on worker
    threads; rows are sorted before aggregation so output is
    schedule-independent.
    """
    pipeline = _PIPELINE_FUNCS[preset.pipeline]
    configs: list[SimConfig] = [
        validate_config(_apply_override(preset.base_config, preset.swept_param, v))
        for v in preset.swept_values
    ]

    def sub_seed_for(si: int, rep: int) -> int:
        if preset.coupled:
            return split_seed(preset.seed, rep)
        return split_seed(preset.seed, si * 1_000_003 + rep)

    jobs = [(si, rep) for si in range(len(preset.swept_values)) for rep in range(preset.replications)]

    def run_job(job: tuple[int, int]):
        si, rep = job
        seed = sub_seed_for(si, rep)
        try:
            return si, rep, pipeline(configs[si], seed)
        except Exception as exc:  # noqa: BLE001 - annotate failing replication
            raise RuntimeError(
                f"replication {rep} of swept value {preset.swept_values[si]!r} "
                f"(sub-seed {seed}) failed: {exc}"
            ) from exc

    n_workers = worker_count()
    if n_workers > 1 and len(jobs) > 1:
        with ThreadPoolExecutor(max_workers=n_workers) as pool:
            outcomes = list(pool.map(run_job, jobs))
    else:
        outcomes = [run_job(j) for j in jobs]

    by_cell = {(si, rep): metrics for si, rep, metrics in outcomes}
    rows: list[tuple[str, str, float, int, str, float]] = []
    for si, value in enumerate(preset.swept_values):
        for rep in range(preset.replications):
            for metric, metric_value in by_cell[(si, rep)].items():
                rows.append((preset.name, preset.swept_param, float(value), rep, metric, float(metric_value)))

    samples: dict[tuple[float, str], list[float]] = {}
    for _, _, value, _, metric, metric_value in rows:
        samples.setdefault((value, metric), []).append(metric_value)
    aggregates = {}
    for key, vals in samples.items():
        arr = np.asarray(vals)
        sem = float(arr.std(ddof=1) / np.sqrt(arr.size)) if arr.size > 1 else 0.0
        aggregates[key] = (float(arr.mean()), sem, int(arr.size))

    return ExperimentResult(
        preset=preset.name,
        swept_param=preset.swept_param,
        rows=tuple(rows),
        aggregates=aggregates,
    )


def _fmt(x: float) -> str:
    return f"{x:.9g}"


def emit_csv(result: ExperimentResult, destination: str | Path) -> int:
    """Write one sample per row; returns bytes written. Byte-deterministic."""
    lines = [CSV_HEADER]
    for preset, param, value, rep, metric, metric_value in result.rows:
        lines.append(f"{preset},{param},{_fmt(value)},{rep},{metric},{_fmt(metric_value)}")
    data = ("\n".join(lines) + "\n").encode("utf-8")
    Path(destination).write_bytes(data)
    return len(data)


# --- single-scenario solve (CLI) ---------------------------------------------


def solve_scenario(config: SimConfig, seed: int, method: str = "ruin"):
    """Association plus offloading on one scenario; returns per-user records."""
    scenario = generate_scenario(config, seed)
    if method == "ruin":
        assoc = assoc_mod.ruin_association(
            scenario, make_psi_provider(config), literal_or=config.algorithm1_literal_or
        )
    elif method == "greedy":
        assoc = assoc_mod.baseline_association_greedy(scenario)
    elif method == "uncapped":
        assoc = assoc_mod.baseline_association_uncapped(scenario)
    else:
        raise ValueError("method must be ruin, greedy or uncapped")

    users, ctxs, _ = build_offload_contexts(config, scenario, assoc)
    ctx_by_user = dict(zip(users, ctxs))
    records = []
    for u, user in enumerate(scenario.users):
        server = int(assoc.assignment[u])
        ctx = ctx_by_user.get(u)
        if ctx is None:
            records.append(
                dict(user=u, server=-1, task_bits=user.task_bits, rate_bps=0.0,
                     offload_bits=0.0, local_bits=user.task_bits, feasible=False,
                     objective_j=float("nan"), bound_lo=0.0, bound_hi=0.0)
            )
            continue
        decision = offload_mod.optimal_offload(ctx)
        if not decision.feasible and config.infeasible_policy == "clamp_alpha_lo":
            decision = offload_mod.clamped_decision(ctx)
        records.append(
            dict(user=u, server=server, task_bits=user.task_bits, rate_bps=ctx.rate_bps,
                 offload_bits=decision.offload_bits, local_bits=decision.local_bits,
                 feasible=decision.feasible, objective_j=decision.objective_j,
                 bound_lo=decision.bound_lo, bound_hi=decision.bound_hi)
        )
    return scenario, assoc, records


def write_solve_csv(records: Iterable[dict], destination: str | Path) -> int:
    header = "user,server,task_bits,rate_bps,offload_bits,local_bits,feasible,objective_j,bound_lo,bound_hi"
    lines = [header]
    for r in records:
        lines.append(
            ",".join(
                [
                    str(r["user"]),
                    str(r["server"]),
                    _fmt(r["task_bits"]),
                    _fmt(r["rate_bps"]),
                    _fmt(r["offload_bits"]),
                    _fmt(r["local_bits"]),
                    "1" if r["feasible"] else "0",
                    _fmt(r["objective_j"]),
                    _fmt(r["bound_lo"]),
                    _fmt(r["bound_hi"]),
                ]
            )
        )
    data = ("\n".join(lines) + "\n").encode("utf-8")
    Path(destination).write_bytes(data)
    return len(data)
