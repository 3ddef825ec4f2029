from __future__ import annotations

import numpy as np
import pytest

from mecsim.scenario import generate_scenario, validate_config


@pytest.fixture()
def small_config():
    """3 servers, 12 users, fading off for reproducible hand analysis."""
    return validate_config(
        {
            "users": {"count": 12},
            "channel": {"fading": "none"},
        }
    )


@pytest.fixture()
def small_scenario(small_config):
    return generate_scenario(small_config, seed=123)


def random_raw_config(rng: np.random.Generator) -> dict:
    """Random but always-valid raw config for property-style loops."""
    buffer_free = float(rng.uniform(0.2, 4.0))
    return {
        "area": {"width_m": float(rng.uniform(500, 6000)), "height_m": float(rng.uniform(500, 6000))},
        "servers": {
            "count": int(rng.integers(1, 5)),
            "buffer_total_mb": buffer_free + float(rng.uniform(0.0, 4.0)),
            "buffer_free_mb": buffer_free,
            "epsilon_mb": float(rng.uniform(0.0, buffer_free * 0.5)),
        },
        "users": {"count": int(rng.integers(0, 40))},
        "channel": {"fading": "rayleigh" if rng.random() < 0.5 else "none"},
    }
