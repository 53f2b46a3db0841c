"""Closed-form quantities: independent arithmetic oracles and sweep behavior."""
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from tribound import (
    SystemConfig,
    TriboundError,
    UnboundedRegimeError,
    ValidationError,
    apply_overrides,
    effective_horizon,
    elasticity_sweep,
    eps_coord,
    eps_hebb,
    eps_meta,
    eta1_max,
    growth_envelope,
    n12,
    phi_max,
    total_bound,
)
from tribound.bounds import REFERENCE_BASE_TOTAL, SWEEPABLE


def expected_coord(n_agents: int, h_eff: int = 10) -> float:
    """Straight-line arithmetic for the coordination term at the baseline."""
    drift = 4.0 * math.sqrt(n_agents) * 5.0 * 100 * 1e-4
    return 2.0 * h_eff * 3.0 * (drift + 0.05) * 1.0


def test_n12(base_config):
    assert n12(base_config) == 100
    assert n12(apply_overrides(base_config, {"tau2": 2.001})) == 101


def test_effective_horizon(base_config):
    # min(ceil(1 / 0.01), ceil(20 / 2), 100) = min(100, 10, 100)
    assert effective_horizon(base_config) == 10
    assert effective_horizon(apply_overrides(base_config, {"h_mission": 3})) == 3
    assert effective_horizon(
        apply_overrides(base_config, {"gamma_disc": 0.5})
    ) == 2


def test_phi_max(base_config):
    assert phi_max(base_config) == pytest.approx(5.0 * 100 * 1e-4, rel=1e-12)


def test_eps_hebb(base_config):
    want = 2.0 * 3.0 * 5.0 * 1e-4 * 1.0 / (1.0 - 0.99)
    assert eps_hebb(base_config) == pytest.approx(want, rel=1e-12)


@pytest.mark.parametrize("n", [10, 30, 100])
def test_eps_coord(base_config, n):
    cfg = apply_overrides(base_config, {"n_agents": n})
    assert eps_coord(cfg) == pytest.approx(expected_coord(n), rel=1e-12)


def test_eps_meta(base_config):
    # 2 * 10 * 3 * 5 * 1 * 2 * 1e-5 * 1 * (20 / 0.02) * 1
    assert eps_meta(base_config) == pytest.approx(6.0, rel=1e-12)


def test_eta1_max(base_config):
    want = 0.05 * 0.02 / (5.0 * 2.0 * 1.5 * (0.7 + 0.01 * 71.0))
    assert eta1_max(base_config) == pytest.approx(want, rel=1e-12)


def test_total_bound_report(base_config):
    report = total_bound(base_config)
    assert report.w0 == 70.0
    assert report.w_max == 71.0
    assert report.n12 == 100
    assert report.h_eff == 10
    assert report.delta1_eff == base_config.delta_np
    assert report.delta1_int == pytest.approx(1.5e-3 * 1.41, rel=1e-12)
    assert report.k_cascade == 30.0
    assert report.j_star == 10 * 30 * 1.0
    total = eps_hebb(base_config) + eps_coord(base_config) + eps_meta(base_config)
    assert report.eps_total == pytest.approx(total, rel=1e-14)
    assert report.relative_subopt == pytest.approx(total / 300.0, rel=1e-14)
    assert report.eps_total == pytest.approx(REFERENCE_BASE_TOTAL, rel=2e-3)


def test_total_bound_requires_stable_regime(base_config):
    with pytest.raises(UnboundedRegimeError):
        total_bound(apply_overrides(base_config, {"delta": 0.0}))


def test_horizon_override(base_config):
    report = total_bound(base_config, h_eff_override=20)
    assert report.h_eff == 20
    assert report.eps_coord == pytest.approx(
        2.0 * eps_coord(base_config), rel=1e-12
    )


@given(st.integers(min_value=1, max_value=50), st.integers(min_value=1, max_value=50))
def test_coord_term_monotone_in_horizon(h1, h2):
    """A longer effective horizon can only enlarge the accumulated error."""
    cfg = SystemConfig()
    lo, hi = sorted((h1, h2))
    assert eps_coord(cfg, h_eff_override=lo) <= eps_coord(cfg, h_eff_override=hi)
    assert eps_meta(cfg, h_eff_override=lo) <= eps_meta(cfg, h_eff_override=hi)


def test_growth_envelope(base_config):
    assert growth_envelope(base_config, 0.0) == 0.0
    assert growth_envelope(base_config, 100.0) == pytest.approx(3.5, rel=1e-12)
    assert growth_envelope(base_config, 10_000.0) == pytest.approx(350.0, rel=1e-12)


def test_sweep_parameters(base_config):
    for parameter in SWEEPABLE:
        rows = elasticity_sweep(base_config, parameter, [2.0, 0.5])
        assert [r.factor for r in rows] == [2.0, 0.5]
        for row in rows:
            assert row.parameter == parameter
            assert math.isfinite(row.eps_total)
    with pytest.raises(TriboundError):
        elasticity_sweep(base_config, "tau9", [2.0])


def test_sweep_exact_elasticities(base_config):
    """Two structural facts: the policy constant is exactly proportional,
    and the fast rate is invisible while the step clamp is active."""
    pi_rows = elasticity_sweep(base_config, "lip_pi", [2.0, 0.5])
    assert all(row.elasticity == 1.0 for row in pi_rows)
    eta1_rows = elasticity_sweep(base_config, "eta1", [2.0, 0.5])
    assert all(row.elasticity == 0.0 for row in eta1_rows)


def test_sweep_doubling_lip_pi_doubles_total(base_config):
    base = total_bound(base_config).eps_total
    rows = elasticity_sweep(base_config, "lip_pi", [2.0])
    assert rows[0].eps_total == 2.0 * base


def test_sweep_n_agents_rounds_to_integers(base_config):
    rows = elasticity_sweep(base_config, "n_agents", [0.5])
    cfg15 = apply_overrides(base_config, {"n_agents": 15})
    assert rows[0].eps_total == pytest.approx(
        total_bound(cfg15).eps_total, rel=1e-12
    )


def test_invalid_horizon_override(base_config):
    with pytest.raises((ValidationError, ValueError)):
        total_bound(base_config, h_eff_override=-1)
