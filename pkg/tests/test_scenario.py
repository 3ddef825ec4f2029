from __future__ import annotations

import numpy as np
import pytest

from mecsim.scenario import (
    BITS_PER_KB,
    BITS_PER_MB,
    ConfigValidationError,
    DEFAULT_CONFIG,
    generate_scenario,
    merge_config,
    validate_config,
)

from conftest import random_raw_config


class TestValidation:
    def test_defaults_are_valid(self):
        config = validate_config(None)
        assert config.n_servers == 3
        assert config.n_users == 100
        assert config.buffer_free_bits == 8.0 * BITS_PER_MB
        assert config.server_epsilon_bits == 2.0 * BITS_PER_MB

    def test_paper_style_buffer(self):
        config = validate_config({"servers": {"buffer_free_mb": 8.0, "epsilon_mb": 2.0}})
        assert config.buffer_free_bits == 64e6
        assert config.server_epsilon_bits == 16e6

    def test_epsilon_exceeding_buffer(self):
        with pytest.raises(ConfigValidationError) as err:
            validate_config({"servers": {"buffer_free_mb": 1.0, "epsilon_mb": 2.0}})
        paths = [p for p, _ in err.value.errors]
        assert "servers.epsilon_mb" in paths
        reasons = dict(err.value.errors)
        assert "epsilon exceeds free buffer" in reasons["servers.epsilon_mb"]

    def test_empty_user_list_is_valid(self):
        config = validate_config({"users": {"count": 0}})
        scenario = generate_scenario(config, seed=1)
        assert scenario.n_users == 0
        assert scenario.gain_matrix.shape == (0, 3)
        assert scenario.task_bits().sum() == 0.0

    def test_multiple_errors_collected(self):
        with pytest.raises(ConfigValidationError) as err:
            validate_config(
                {
                    "servers": {"count": 0, "bandwidth_mhz": -1.0},
                    "users": {"tx_power_mw": 0.0},
                    "channel": {"pl_exponent": -2.0},
                }
            )
        paths = {p for p, _ in err.value.errors}
        assert {"servers.count", "servers.bandwidth_mhz", "users.tx_power_mw", "channel.pl_exponent"} <= paths

    def test_free_buffer_exceeding_total(self):
        with pytest.raises(ConfigValidationError):
            validate_config({"servers": {"buffer_total_mb": 1.0, "buffer_free_mb": 2.0}})

    def test_unit_conversions(self):
        config = validate_config(
            {"users": {"task_max_kb": 100.0, "tx_power_mw": 200.0, "deadline_ms": 100.0}}
        )
        assert config.task_max_bits == 100.0 * BITS_PER_KB == 8e5
        assert config.tx_power_w == pytest.approx(0.2)
        assert config.deadline_s == pytest.approx(0.1)

    def test_wrong_type_reported_with_path(self):
        with pytest.raises(ConfigValidationError) as err:
            validate_config({"users": {"count": 2.5}})
        assert err.value.errors[0][0] == "users.count"

    def test_merge_preserves_defaults(self):
        merged = merge_config({"users": {"count": 5}})
        assert merged["users"]["count"] == 5
        assert merged["users"]["tx_power_mw"] == DEFAULT_CONFIG["users"]["tx_power_mw"]
        assert merged["servers"] == DEFAULT_CONFIG["servers"]

    def test_positions_length_checked(self):
        with pytest.raises(ConfigValidationError) as err:
            validate_config({"servers": {"count": 3, "positions_m": [[0.0, 0.0]]}})
        assert err.value.errors[0][0] == "servers.positions_m"

    def test_premium_override(self):
        config = validate_config({"ruin": {"premium_mb_per_slot": 5.9}})
        assert config.ruin_premium_bits_per_slot == pytest.approx(5.9 * BITS_PER_MB)
        derived = validate_config(None)
        assert derived.ruin_premium_bits_per_slot == pytest.approx(6e5 * 1.0 / 10.0)

    def test_interference_passthrough(self):
        off = validate_config(None)
        assert off.interference_dbm is None
        on = validate_config({"channel": {"interference_dbm": -90.0}})
        assert on.interference_dbm == -90.0
        scenario = generate_scenario(on, seed=1)
        assert scenario.channel.interference_dbm == -90.0

    def test_task_size_range(self):
        fixed = validate_config({"users": {"task_min_kb": 100.0, "task_max_kb": 100.0}})
        scenario = generate_scenario(fixed, seed=2)
        assert all(u.task_bits == 100.0 * BITS_PER_KB for u in scenario.users)
        with pytest.raises(ConfigValidationError):
            validate_config({"users": {"task_min_kb": 150.0, "task_max_kb": 100.0}})

    def test_literal_or_flag_parsed(self):
        assert validate_config(None).algorithm1_literal_or is False
        config = validate_config({"ruin": {"algorithm1_literal_or": True}})
        assert config.algorithm1_literal_or is True


class TestGeneration:
    def test_shapes(self):
        scenario = generate_scenario(None, seed=0)
        assert scenario.gain_matrix.shape == (100, 3)
        assert scenario.n_servers == 3 and scenario.n_users == 100

    def test_deterministic(self):
        a = generate_scenario(None, seed=99)
        b = generate_scenario(None, seed=99)
        assert np.array_equal(a.gain_matrix, b.gain_matrix)
        assert a.users == b.users
        assert a.servers == b.servers

    def test_seed_changes_draws(self):
        a = generate_scenario(None, seed=1)
        b = generate_scenario(None, seed=2)
        assert not np.array_equal(a.gain_matrix, b.gain_matrix)

    def test_degenerate_fading_at_reference_distance(self):
        # single server at a known spot; user pinned at d0 via a 1-point area
        raw = {
            "area": {"width_m": 1.0, "height_m": 1.0},
            "servers": {"count": 1, "positions_m": [[0.0, 0.0]]},
            "users": {"count": 20},
            "channel": {"fading": "none", "ref_distance_m": 1.0, "pl_ref_db": 30.0},
        }
        scenario = generate_scenario(validate_config(raw), seed=5)
        # every user is within sqrt(2) m, clamped to d0=1 only when closer
        d = np.linalg.norm(np.array([u.position for u in scenario.users]), axis=1)
        at_ref = d <= 1.0
        assert at_ref.any()
        expected = 10.0 ** (-30.0 / 10.0)
        assert np.allclose(scenario.gain_matrix[at_ref, 0], expected, rtol=1e-12)

    def test_gains_in_unit_interval_when_loss_nonnegative(self):
        rng = np.random.default_rng(0)
        for _ in range(20):
            scenario = generate_scenario(validate_config(random_raw_config(rng)), seed=int(rng.integers(1e9)))
            loss_db = -10.0 * np.log10(scenario.gain_matrix) if scenario.n_users else np.zeros((0,))
            positive_loss = loss_db >= 0.0
            assert np.all(scenario.gain_matrix[positive_loss] <= 1.0)
            assert np.all(scenario.gain_matrix > 0.0) if scenario.n_users else True

    def test_invariants_hold_over_random_configs(self):
        rng = np.random.default_rng(7)
        for _ in range(25):
            config = validate_config(random_raw_config(rng))
            scenario = generate_scenario(config, seed=int(rng.integers(1e9)))
            for server in scenario.servers:
                assert 0.0 <= server.buffer_free_init <= server.buffer_total
                assert 0.0 <= server.epsilon <= server.buffer_free_init
            for user in scenario.users:
                assert user.task_bits >= 0.0
                assert 0.0 < user.task_bits <= config.task_max_bits
            assert scenario.gain_matrix.shape == (scenario.n_users, scenario.n_servers)

    def test_uniform_placement_statistics(self):
        # 100 scenarios x 100 users at a fixed seed schedule
        positions = []
        for seed in range(100):
            scenario = generate_scenario(None, seed=seed)
            positions.extend(u.position for u in scenario.users)
        mean = np.mean(np.array(positions), axis=0)
        assert abs(mean[0] - 2500.0) <= 0.02 * 5000.0
        assert abs(mean[1] - 2500.0) <= 0.02 * 5000.0

    def test_gain_matrix_is_readonly(self):
        scenario = generate_scenario(None, seed=0)
        with pytest.raises(ValueError):
            scenario.gain_matrix[0, 0] = 1.0
