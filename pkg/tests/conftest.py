"""Shared fixtures and hypothesis settings."""
import pytest
from hypothesis import HealthCheck, settings

from tribound import SystemConfig, apply_overrides

settings.register_profile(
    "ci",
    deadline=None,
    max_examples=50,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("ci")


@pytest.fixture(scope="session")
def base_config() -> SystemConfig:
    """Default operating point. All documented baseline constants."""
    return SystemConfig()


@pytest.fixture(scope="session")
def small_config(base_config: SystemConfig) -> SystemConfig:
    """Shrunken dimensions for property tests that loop over vectors."""
    return apply_overrides(
        base_config,
        {"n_agents": 6, "weight_dim": 12, "embed_dim": 8, "n_actions": 4},
    )
