import pytest

from pidlab.harness import validate_config


@pytest.fixture
def tiny_config():
    """Factory for a fast-running experiment config (seconds, not minutes)."""

    def make(**overrides):
        base = {
            "sim_len": 60,
            "seeds": [0, 1],
            "pso": {"pop_size": 6, "max_iter": 4},
            "zn": {"open_sim_len": 60, "ultimate_sim_len": 400, "max_kp": 50.0},
            "identify": {"samples": 400},
        }
        base.update(overrides)
        return validate_config(base)

    return make
