from __future__ import annotations

import numpy as np
import pytest

from mecsim import radio
from mecsim.association import (
    admission_metrics,
    baseline_association_greedy,
    baseline_association_uncapped,
    build_preference_profiles,
    build_user_preferences,
    ruin_association,
)
from mecsim.scenario import (
    BITS_PER_KB,
    ChannelParams,
    Scenario,
    ServerSpec,
    UserSpec,
    generate_scenario,
    validate_config,
)

from conftest import random_raw_config

KB = BITS_PER_KB


def make_scenario(buffers_kb, tasks_kb, gains, epsilons_kb=None, bandwidth=20e6):
    """Hand-built scenario: explicit buffers, task sizes and link gains."""
    gains = np.asarray(gains, dtype=float)
    n_users, n_servers = gains.shape
    epsilons_kb = epsilons_kb or [0.0] * n_servers
    servers = tuple(
        ServerSpec(
            id=i,
            position=(1000.0 * i, 0.0),
            buffer_total=buffers_kb[i] * KB,
            buffer_free_init=buffers_kb[i] * KB,
            cpu_rate=6e5,
            bandwidth=bandwidth,
            epsilon=epsilons_kb[i] * KB,
            eta_server=1e-28,
        )
        for i in range(n_servers)
    )
    users = tuple(
        UserSpec(
            id=k,
            position=(0.0, 100.0 + k),
            task_bits=tasks_kb[k] * KB,
            tx_power=0.2,
            cpu_rate=7e4,
            eta_local=1e-28,
            deadline=0.1,
        )
        for k in range(n_users)
    )
    channel = ChannelParams(
        pl_ref_db=30.0,
        ref_distance_m=1.0,
        pl_exponent=3.0,
        noise_psd_dbm_hz=-174.0,
        cycles_per_bit=10.0,
    )
    return Scenario(servers=servers, users=users, channel=channel, gain_matrix=gains, seed=0)


# the worked two-server example: u0 big task prefers s0, u1 medium prefers s0,
# u2 small prefers s1
def worked_example():
    return make_scenario(
        buffers_kb=[150.0, 100.0],
        tasks_kb=[100.0, 60.0, 50.0],
        gains=[[1e-3, 1e-6], [1e-3, 1e-6], [1e-6, 1e-3]],
    )


class TestUserPreferences:
    def test_gain_ordering(self):
        scenario = make_scenario([100.0], [10.0], [[1e-3]])
        scenario2 = make_scenario([100.0, 100.0], [10.0], [[1e-3, 1e-6]])
        assert build_user_preferences(scenario) == [[0]]
        assert build_user_preferences(scenario2) == [[0, 1]]

    def test_tie_breaks_by_index(self):
        scenario = make_scenario([100.0] * 3, [10.0], [[1e-4, 1e-4, 1e-4]])
        assert build_user_preferences(scenario) == [[0, 1, 2]]

    def test_matches_independent_snr_sort(self):
        scenario = generate_scenario(validate_config({"users": {"count": 25}}), seed=77)
        prefs = build_user_preferences(scenario)
        noise = np.array(
            [radio.noise_power_w(-174.0, s.bandwidth) for s in scenario.servers]
        )
        for k, user in enumerate(scenario.users):
            snr = user.tx_power * scenario.gain_matrix[k] / noise
            expected = sorted(range(scenario.n_servers), key=lambda n: (-snr[n], n))
            assert prefs[k] == expected


class TestRuinAssociation:
    def test_single_user_fits(self):
        scenario = make_scenario([1000.0], [10.0], [[1e-3]])
        out = ruin_association(scenario, [0.5])
        assert out.assignment.tolist() == [0]
        assert out.residual_buffer[0] == pytest.approx((1000.0 - 10.0) * KB)

    def test_worked_example(self):
        out = ruin_association(worked_example(), [0.5, 0.5])
        assert out.assignment.tolist() == [-1, 0, 1]
        assert out.admitted_sets == ((1,), (2,))
        assert out.residual_buffer.tolist() == [90.0 * KB, 50.0 * KB]
        assert out.rounds == 2

    def test_worked_example_vs_exhaustive(self):
        # brute-force all admissible assignments under the same per-server
        # budget rule; the algorithm's outcome must be one of them, and no
        # admissible assignment admits more users given the preference order
        scenario = worked_example()
        out = ruin_association(scenario, [0.5, 0.5])
        task = scenario.task_bits()
        buffers = [s.buffer_free_init for s in scenario.servers]
        admitted = int(np.count_nonzero(out.assignment >= 0))
        feasible_counts = []
        for a0 in (-1, 0, 1):
            for a1 in (-1, 0, 1):
                for a2 in (-1, 0, 1):
                    assignment = [a0, a1, a2]
                    load = [0.0, 0.0]
                    for u, server in enumerate(assignment):
                        if server >= 0:
                            load[server] += task[u]
                    if all(load[n] <= buffers[n] for n in range(2)):
                        feasible_counts.append(sum(a >= 0 for a in assignment))
        assert admitted <= max(feasible_counts)
        assert admitted == 2  # u0 cannot fit anywhere after round-1 admissions

    def test_nothing_fits(self):
        scenario = make_scenario([10.0, 10.0], [50.0, 60.0], [[1e-3, 1e-4]] * 2)
        out = ruin_association(scenario, [0.5, 0.5])
        assert np.all(out.assignment == -1)
        assert all(len(s) == 0 for s in out.admitted_sets)

    def test_epsilon_guard(self):
        # buffer 100, eps 40: only 60 usable
        scenario = make_scenario([100.0], [70.0], [[1e-3]], epsilons_kb=[40.0])
        assert np.all(ruin_association(scenario, [0.5]).assignment == -1)
        fits = make_scenario([100.0], [60.0], [[1e-3]], epsilons_kb=[40.0])
        assert ruin_association(fits, [0.5]).assignment.tolist() == [0]

    def test_literal_or_admits_below_tolerance(self):
        scenario = make_scenario([100.0], [70.0], [[1e-3]], epsilons_kb=[40.0])
        out = ruin_association(scenario, [0.5], literal_or=True)
        assert out.assignment.tolist() == [0]
        assert out.residual_buffer[0] == pytest.approx(30.0 * KB)

    def test_priority_refresh_callable(self):
        calls = []

        def psi(server, residual):
            calls.append((server, residual))
            return 0.5

        scenario = worked_example()
        ruin_association(scenario, psi)
        # two rounds touch s0 then s1, then s1 again; residuals shrink
        assert (0, 150.0 * KB) in calls and (1, 100.0 * KB) in calls
        assert (1, 50.0 * KB) in calls  # refreshed at the round-2 residual

    def test_determinism(self):
        scenario = generate_scenario(validate_config({"users": {"count": 30}}), seed=5)
        a = ruin_association(scenario, [0.3, 0.4, 0.5])
        b = ruin_association(scenario, [0.3, 0.4, 0.5])
        assert np.array_equal(a.assignment, b.assignment)
        assert a.admitted_sets == b.admitted_sets
        assert np.array_equal(a.residual_buffer, b.residual_buffer)


class TestGreedyBaseline:
    def test_worked_example(self):
        out = baseline_association_greedy(worked_example())
        # index order at s0: u0 (100 <= 150) in, u1 (60 > 50) stops the prefix
        assert out.assignment.tolist() == [0, -1, 1]
        assert out.admitted_sets == ((0,), (2,))

    def test_single_user_matches_proposed(self):
        scenario = make_scenario([1000.0], [10.0], [[1e-3]])
        greedy = baseline_association_greedy(scenario)
        proposed = ruin_association(scenario, [0.5])
        assert np.array_equal(greedy.assignment, proposed.assignment)

    def test_max_prefix(self):
        # everyone prefers the single server; admitted = longest fitting prefix
        rng = np.random.default_rng(4)
        for _ in range(25):
            tasks = rng.uniform(5.0, 40.0, size=12)
            buffer_kb = float(rng.uniform(20.0, 250.0))
            scenario = make_scenario([buffer_kb], list(tasks), [[1e-3]] * 12)
            out = baseline_association_greedy(scenario)
            cumulative = np.cumsum(tasks)
            expected = int(np.searchsorted(cumulative, buffer_kb, side="right"))
            assert int(np.count_nonzero(out.assignment >= 0)) == expected


class TestUncappedBaseline:
    def test_everyone_admitted(self):
        scenario = generate_scenario(validate_config({"users": {"count": 40}}), seed=8)
        out = baseline_association_uncapped(scenario)
        assert np.all(out.assignment >= 0)
        assert admission_metrics(out, scenario).admitted_fraction_pct == 100.0

    def test_negative_residual_tracked(self):
        scenario = make_scenario([1000.0], [1000.0, 1000.0, 1000.0], [[1e-3]] * 3)
        out = baseline_association_uncapped(scenario)
        assert out.residual_buffer[0] == pytest.approx(-2000.0 * KB)

    def test_single_user_matches_proposed_when_room(self):
        scenario = make_scenario([1000.0], [10.0], [[1e-3]])
        assert np.array_equal(
            baseline_association_uncapped(scenario).assignment,
            ruin_association(scenario, [0.5]).assignment,
        )


class TestAdmissionMetrics:
    def test_zero_users(self):
        scenario = generate_scenario(validate_config({"users": {"count": 0}}), seed=1)
        out = ruin_association(scenario, [0.5, 0.5, 0.5])
        metrics = admission_metrics(out, scenario)
        assert metrics.admitted_fraction_pct == 100.0
        assert metrics.zero_denominator
        assert metrics.sum_buffer_usage_bits == 0.0

    def test_fraction(self):
        out = baseline_association_greedy(worked_example())
        metrics = admission_metrics(out, worked_example())
        assert metrics.admitted_fraction_pct == pytest.approx(100.0 * 2.0 / 3.0)
        assert not metrics.zero_denominator

    def test_uncapped_usage_is_total_demand(self):
        scenario = generate_scenario(validate_config({"users": {"count": 25}}), seed=3)
        out = baseline_association_uncapped(scenario)
        metrics = admission_metrics(out, scenario)
        assert metrics.sum_buffer_usage_bits == pytest.approx(float(scenario.task_bits().sum()))


class TestProperties:
    def test_invariant_suite_random_scenarios(self):
        rng = np.random.default_rng(12)
        for _ in range(60):
            config = validate_config(random_raw_config(rng))
            scenario = generate_scenario(config, seed=int(rng.integers(1e9)))
            psi = np.full(scenario.n_servers, 0.5)
            proposed = ruin_association(scenario, psi)
            greedy = baseline_association_greedy(scenario)
            uncapped = baseline_association_uncapped(scenario)

            k, n = scenario.n_users, scenario.n_servers
            task = scenario.task_bits()
            for out, capped in ((proposed, True), (greedy, True), (uncapped, False)):
                # at most one server per user, assignment matches admitted sets
                seen = [u for members in out.admitted_sets for u in members]
                assert len(seen) == len(set(seen))
                for server, members in enumerate(out.admitted_sets):
                    assert all(out.assignment[u] == server for u in members)
                if capped:
                    for server, members in enumerate(out.admitted_sets):
                        usable = scenario.servers[server].buffer_free_init - scenario.servers[server].epsilon
                        assert task[list(members)].sum() <= usable + 1e-9
            assert proposed.proposal_events <= k * n
            assert greedy.proposal_events <= k

            # admitted-fraction dominance chain
            a_prop = admission_metrics(proposed, scenario).admitted_fraction_pct
            a_greedy = admission_metrics(greedy, scenario).admitted_fraction_pct
            a_uncapped = admission_metrics(uncapped, scenario).admitted_fraction_pct
            assert a_uncapped >= a_prop >= a_greedy

    def test_preference_profiles_shape(self):
        scenario = worked_example()
        profiles = build_preference_profiles(scenario, [0.5, 0.5])
        assert profiles.user_prefs == ((0, 1), (0, 1), (1, 0))
        # round-1 proposers at s0 ranked small-task-first
        assert profiles.server_prefs == ((1, 0), (2,))
