"""Deterministic simulator and closed-form bound calculator for tri-level
coupled learning dynamics: fast per-agent synaptic updates, mid-rate swarm
coordination of a shared policy, and slow meta updates of the synaptic rule,
with runtime contract monitors and drift metrics."""

from .bounds import (
    BoundReport,
    SensitivityRow,
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
from .cascade import (
    ActionDistribution,
    AdjacencyGraph,
    EmbeddingEncoder,
    PolicyTarget,
    aggregate,
    approx_error,
    embed,
    ideal_embed,
    make_encoder,
    marl_step,
    modulation,
    policy_dist,
    probe_embeddings,
)
from .contracts import (
    CONTRACT_IDS,
    ContractSpec,
    ContractVerdict,
    Monitor,
    adaptation_trial,
    check_contract,
    contract_specs,
    margin,
    monitor_tick,
)
from .drift import (
    DriftReport,
    drift_report,
    embedding_drift,
    meta_drift,
    policy_drift,
    tv_distance,
    weight_drift,
)
from .engine import (
    SCENARIOS,
    Scenario,
    Trace,
    VerificationReport,
    confirm_expectation,
    get_scenario,
    run,
    scenario_names,
    verify,
)
from .errors import (
    CalibrationError,
    EnforcementError,
    MarginGeometryError,
    ModulationBoundError,
    SchemaError,
    StructuralError,
    TraceQueryError,
    TriboundError,
    UnboundedRegimeError,
    ValidationError,
)
from .hebbian import (
    HebbianRule,
    StepRecord,
    apply_steps,
    effective_step_bound,
    eta1_threshold,
    hebbian_delta,
    hebbian_step,
    hebbian_tick,
    intrinsic_step_bound,
    modulation_gain,
    proposed_steps,
    rule_from_config,
    safety_output,
    stationary_radius,
    weight_bounds,
    weight_norm_ceiling,
)
from .meta import (
    CompatibilityVerdict,
    MetaCascade,
    cascading_sensitivity,
    compatibility_check,
    max_meta_rate,
    meta_step,
    theta_to_rule,
)
from .model import (
    AgentState,
    ConditionCheck,
    ConditionReport,
    MetaParams,
    Observation,
    PolicyParams,
    SystemConfig,
    apply_overrides,
    config_from_dict,
    config_hash,
    config_to_dict,
    config_to_json,
    frozen_mask_for,
    initial_weights,
    load_config,
    load_config_path,
    validate,
    validate_conditions,
)

__version__ = "0.1.0"

__all__ = [
    "ActionDistribution",
    "AdjacencyGraph",
    "AgentState",
    "BoundReport",
    "CONTRACT_IDS",
    "CalibrationError",
    "CompatibilityVerdict",
    "ConditionCheck",
    "ConditionReport",
    "ContractSpec",
    "ContractVerdict",
    "DriftReport",
    "EmbeddingEncoder",
    "EnforcementError",
    "HebbianRule",
    "MarginGeometryError",
    "MetaCascade",
    "MetaParams",
    "ModulationBoundError",
    "Monitor",
    "Observation",
    "PolicyParams",
    "PolicyTarget",
    "SCENARIOS",
    "Scenario",
    "SchemaError",
    "SensitivityRow",
    "StepRecord",
    "StructuralError",
    "SystemConfig",
    "Trace",
    "TraceQueryError",
    "TriboundError",
    "UnboundedRegimeError",
    "ValidationError",
    "VerificationReport",
    "adaptation_trial",
    "aggregate",
    "apply_overrides",
    "apply_steps",
    "approx_error",
    "cascading_sensitivity",
    "check_contract",
    "compatibility_check",
    "config_from_dict",
    "config_hash",
    "config_to_dict",
    "config_to_json",
    "confirm_expectation",
    "contract_specs",
    "drift_report",
    "effective_horizon",
    "effective_step_bound",
    "elasticity_sweep",
    "embed",
    "embedding_drift",
    "eps_coord",
    "eps_hebb",
    "eps_meta",
    "eta1_max",
    "eta1_threshold",
    "frozen_mask_for",
    "get_scenario",
    "growth_envelope",
    "hebbian_delta",
    "hebbian_step",
    "hebbian_tick",
    "ideal_embed",
    "initial_weights",
    "intrinsic_step_bound",
    "load_config",
    "load_config_path",
    "make_encoder",
    "margin",
    "marl_step",
    "max_meta_rate",
    "meta_drift",
    "meta_step",
    "modulation",
    "modulation_gain",
    "monitor_tick",
    "n12",
    "phi_max",
    "policy_dist",
    "policy_drift",
    "probe_embeddings",
    "proposed_steps",
    "rule_from_config",
    "run",
    "safety_output",
    "scenario_names",
    "stationary_radius",
    "theta_to_rule",
    "total_bound",
    "tv_distance",
    "validate",
    "validate_conditions",
    "verify",
    "weight_bounds",
    "weight_drift",
    "weight_norm_ceiling",
]
