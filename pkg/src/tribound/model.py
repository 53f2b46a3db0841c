"""Configuration and shared domain types for the tri-level swarm simulator.

The system couples three learning loops running at separated timescales: a
fast local synaptic update per agent, a mid-rate coordination update of the
shared policy, and a slow meta update that rewrites the synaptic rule itself.
SystemConfig collects every constant those loops and their analytic bounds
depend on. Defaults are the documented baseline operating point; every field
can be overridden from a JSON config document or a key=value pair.

Config schema (all keys optional, unknown keys rejected):

  population and dimensions
    n_agents            swarm size N                                  int   30
    weight_dim          synaptic weight dimension d                   int   64
    embed_dim           embedding dimension p                         int   16
    n_actions           policy action count                           int    8
    meta_dim            meta-parameter dimension                      int    4
  learning rates and periods
    eta1, eta2, eta3    fast / coordination / meta learning rates     1e-3, 1e-4, 1e-5
    tau1, tau2, tau3    fast / coordination / meta periods in seconds 0.02, 2.0, 20.0
  synaptic update rule
    alpha               correlation gain                              0.5
    beta                presynaptic gain                              0.1
    gamma_h             postsynaptic gain                             0.1
    delta               weight decay (negative in the stable regime)  -0.01
    sigma_max           modulation gain ceiling                       1.5
    m_max               modulation signal bound                       4.0
  sensitivity constants
    lip_phi             encoder Lipschitz constant                    5.0
    lip_pi              policy Lipschitz constant (TV per unit input) 3.0
    lip_gnn             aggregation sensitivity constant              4.0
    lip_theta_to_h      meta-to-rule sensitivity                      2.0
    lip_h_to_w          rule-to-weight-effect sensitivity             1.0
    eps_gnn             aggregation input approximation error bound   0.05
  caps and task constants
    delta_np            per-tick weight step cap (clamp contract)     1e-4
    delta_pi            per-cycle policy TV cap (trust region)        0.01
    g_max               meta gradient clip                            1.0
    gamma_disc          discount factor                               0.99
    r_max               reward bound                                  1.0
    value_grad_bound    value-gradient sup-norm bound                 1.0
    h_mission           mission horizon in coordination cycles        100
  timescale-separation ratios
    rho12, rho23        max admissible tau1/tau2 and tau2/tau3        0.1, 0.1
  condition thresholds
    eps_phi_star        admissible per-cycle embedding drift          0.05
    eps_coord_star      admissible per-tick induced policy drift      1.515e-3
    eps_meta_star       admissible meta step effect                   1.01e-5
  monitoring
    t_critical          adaptation-time budget in seconds             5.0
    margin_alarm        early-warning margin threshold                1e-3
  seeds, probes, safety
    seed                unsigned master seed                          0
    probe_state_count   policy probe states per run                   32
    danger_probe_count  frozen-synapse safety probes                  16
    frozen_fraction     leading fraction of frozen coordinates        0.125
  admissible boxes
    policy_box          policy parameter box half-width               10.0
    theta_box           meta parameter box half-width                 1.0
  topology and engine switches
    graph_topology      "ring" or "complete"                          "ring"
    ring_neighbors      ring neighbor count                           4
    init_weight_norm    initial weight norm per agent                 1.0
    encoder_squash      apply per-coordinate 1-Lipschitz squash       false
    enforce_clamp       enforce the per-tick step cap                 true
"""
from __future__ import annotations

import dataclasses
import json
import math
import warnings
from dataclasses import dataclass, field
from hashlib import sha256
from typing import Any, Mapping

import numpy as np

from .errors import SchemaError, StructuralError, ValidationError
from .seeding import stream_rng, unit_rows


@dataclass(frozen=True)
class SystemConfig:
    n_agents: int = 30
    weight_dim: int = 64
    embed_dim: int = 16
    n_actions: int = 8
    meta_dim: int = 4

    eta1: float = 1e-3
    eta2: float = 1e-4
    eta3: float = 1e-5
    tau1: float = 0.02
    tau2: float = 2.0
    tau3: float = 20.0

    alpha: float = 0.5
    beta: float = 0.1
    gamma_h: float = 0.1
    delta: float = -0.01
    sigma_max: float = 1.5
    m_max: float = 4.0

    lip_phi: float = 5.0
    lip_pi: float = 3.0
    lip_gnn: float = 4.0
    lip_theta_to_h: float = 2.0
    lip_h_to_w: float = 1.0
    eps_gnn: float = 0.05

    delta_np: float = 1e-4
    delta_pi: float = 0.01
    g_max: float = 1.0
    gamma_disc: float = 0.99
    r_max: float = 1.0
    value_grad_bound: float = 1.0
    h_mission: int = 100

    rho12: float = 0.1
    rho23: float = 0.1

    eps_phi_star: float = 0.05
    eps_coord_star: float = 1.515e-3
    eps_meta_star: float = 1.01e-5

    t_critical: float = 5.0
    margin_alarm: float = 1e-3

    seed: int = 0
    probe_state_count: int = 32
    danger_probe_count: int = 16
    frozen_fraction: float = 0.125

    policy_box: float = 10.0
    theta_box: float = 1.0

    graph_topology: str = "ring"
    ring_neighbors: int = 4
    init_weight_norm: float = 1.0
    encoder_squash: bool = False
    enforce_clamp: bool = True


_BOOL_FIELDS = {"encoder_squash", "enforce_clamp"}
_INT_FIELDS = {
    "n_agents", "weight_dim", "embed_dim", "n_actions", "meta_dim",
    "h_mission", "seed", "probe_state_count", "danger_probe_count",
    "ring_neighbors",
}
_STR_FIELDS = {"graph_topology"}
_FIELD_NAMES = tuple(f.name for f in dataclasses.fields(SystemConfig))

_POSITIVE_INT = (
    "n_agents", "weight_dim", "embed_dim", "n_actions", "meta_dim",
    "h_mission", "probe_state_count", "danger_probe_count",
)
_POSITIVE_FLOAT = (
    "eta1", "eta2", "eta3", "tau1", "tau2", "tau3", "sigma_max", "m_max",
    "lip_phi", "lip_pi", "lip_gnn", "lip_theta_to_h", "lip_h_to_w",
    "delta_np", "delta_pi", "g_max", "r_max", "value_grad_bound",
    "rho12", "rho23", "eps_phi_star", "eps_coord_star", "eps_meta_star",
    "t_critical", "margin_alarm", "policy_box", "theta_box",
)
_FINITE_FLOAT = ("alpha", "beta", "gamma_h", "delta")


def _coerce(name: str, value: Any) -> Any:
    if name in _BOOL_FIELDS:
        if not isinstance(value, bool):
            raise SchemaError(f"config key {name!r} expects a boolean, got {value!r}")
        return value
    if name in _INT_FIELDS:
        if isinstance(value, bool) or not isinstance(value, int):
            raise SchemaError(f"config key {name!r} expects an integer, got {value!r}")
        return value
    if name in _STR_FIELDS:
        if not isinstance(value, str):
            raise SchemaError(f"config key {name!r} expects a string, got {value!r}")
        return value
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise SchemaError(f"config key {name!r} expects a number, got {value!r}")
    return float(value)


def config_from_dict(data: Mapping[str, Any]) -> SystemConfig:
    """Build and validate a config from a plain mapping. Unknown keys are fatal."""
    unknown = sorted(set(data) - set(_FIELD_NAMES))
    if unknown:
        raise SchemaError(f"unknown config keys: {', '.join(unknown)}")
    kwargs = {name: _coerce(name, value) for name, value in data.items()}
    config = SystemConfig(**kwargs)
    validate(config)
    return config


def load_config(source: str) -> SystemConfig:
    """Parse a JSON config document. An empty document yields all defaults."""
    if not source.strip():
        config = SystemConfig()
        validate(config)
        return config
    try:
        data = json.loads(source)
    except json.JSONDecodeError as exc:
        raise SchemaError(
            f"config parse error at line {exc.lineno}, column {exc.colno}: {exc.msg}"
        ) from exc
    if not isinstance(data, dict):
        raise SchemaError("config document must be a JSON object of key-value pairs")
    return config_from_dict(data)


def load_config_path(path: str) -> SystemConfig:
    with open(path, "r", encoding="utf-8") as handle:
        return load_config(handle.read())


def apply_overrides(config: SystemConfig, overrides: Mapping[str, Any]) -> SystemConfig:
    """Return a validated copy of config with the given fields replaced."""
    unknown = sorted(set(overrides) - set(_FIELD_NAMES))
    if unknown:
        raise SchemaError(f"unknown config keys: {', '.join(unknown)}")
    kwargs = {name: _coerce(name, value) for name, value in overrides.items()}
    updated = dataclasses.replace(config, **kwargs)
    validate(updated)
    return updated


def config_to_dict(config: SystemConfig) -> dict[str, Any]:
    return {name: getattr(config, name) for name in _FIELD_NAMES}


def config_to_json(config: SystemConfig) -> str:
    """Canonical JSON form: sorted keys, round-trip float repr."""
    return json.dumps(config_to_dict(config), sort_keys=True)


def config_hash(config: SystemConfig) -> str:
    return sha256(config_to_json(config).encode("utf-8")).hexdigest()


def validate(config: SystemConfig) -> None:
    """Raise ValidationError on any structural violation. Pure check."""
    for name in _POSITIVE_INT:
        if getattr(config, name) < 1:
            raise ValidationError(f"{name} must be a positive integer")
    if config.seed < 0:
        raise ValidationError("seed must be a nonnegative integer")
    if config.ring_neighbors < 0:
        raise ValidationError("ring_neighbors must be nonnegative")
    for name in _POSITIVE_FLOAT:
        value = getattr(config, name)
        if not math.isfinite(value) or value <= 0.0:
            raise ValidationError(f"{name} must be a positive finite real")
    for name in _FINITE_FLOAT:
        if not math.isfinite(getattr(config, name)):
            raise ValidationError(f"{name} must be finite")
    if config.eps_gnn < 0.0 or not math.isfinite(config.eps_gnn):
        raise ValidationError("eps_gnn must be a nonnegative finite real")
    if config.init_weight_norm < 0.0 or not math.isfinite(config.init_weight_norm):
        raise ValidationError("init_weight_norm must be a nonnegative finite real")
    if not (0.0 < config.gamma_disc < 1.0):
        raise ValidationError("gamma_disc must lie strictly between 0 and 1")
    if not (0.0 <= config.frozen_fraction < 1.0):
        raise ValidationError("frozen_fraction must lie in [0, 1)")
    if not config.tau1 < config.tau2:
        raise ValidationError("tau1 < tau2 violated")
    if not config.tau2 < config.tau3:
        raise ValidationError("tau2 < tau3 violated")
    if config.graph_topology not in ("ring", "complete"):
        raise ValidationError("graph_topology must be 'ring' or 'complete'")
    if not config.eta1 > config.eta2 > config.eta3:
        warnings.warn(
            "learning rates do not satisfy eta1 > eta2 > eta3; "
            "timescale separation is degraded",
            stacklevel=2,
        )


@dataclass(frozen=True)
class ConditionCheck:
    """Verdict for one start-time admissibility condition.

    passed is None when the condition cannot be decided statically and is
    deferred to the runtime monitors.
    """

    condition_id: str
    passed: bool | None
    measured: float
    threshold: float
    note: str


@dataclass(frozen=True)
class ConditionReport:
    checks: tuple[ConditionCheck, ...]

    def check(self, condition_id: str) -> ConditionCheck:
        for item in self.checks:
            if item.condition_id == condition_id:
                return item
        raise KeyError(condition_id)

    @property
    def all_passed(self) -> bool:
        """True when every statically decidable condition passed."""
        return all(c.passed for c in self.checks if c.passed is not None)


def validate_conditions(config: SystemConfig) -> ConditionReport:
    """Evaluate the five start-time conditions on a config. Pure function."""
    from . import hebbian
    from .meta import META_LOSS_SMOOTHNESS

    rule = hebbian.rule_from_config(config)

    if config.delta < 0.0:
        threshold = hebbian.eta1_threshold(rule, config)
        s1_pass = config.eta1 <= threshold
        s1_note = f"decay negative; fast rate vs stability threshold {threshold:.6g}"
    else:
        threshold = math.nan
        s1_pass = False
        s1_note = "decay coefficient is not negative; no stable regime"
    s1 = ConditionCheck("S1", s1_pass, config.eta1, threshold, s1_note)

    ratio12 = config.tau1 / config.tau2
    ratio23 = config.tau2 / config.tau3
    excess = max(ratio12 - config.rho12, ratio23 - config.rho23)
    s2 = ConditionCheck(
        "S2",
        ratio12 <= config.rho12 and ratio23 <= config.rho23,
        excess,
        0.0,
        f"period ratios {ratio12:.6g} (cap {config.rho12:.6g}) and "
        f"{ratio23:.6g} (cap {config.rho23:.6g})",
    )

    induced = config.lip_pi * config.lip_phi * config.delta_np
    s3 = ConditionCheck(
        "S3",
        induced <= config.eps_coord_star,
        induced,
        config.eps_coord_star,
        "per-tick induced policy drift vs admissible cap",
    )

    meta_effect = config.eta3 * META_LOSS_SMOOTHNESS
    s4 = ConditionCheck(
        "S4",
        meta_effect <= config.eps_meta_star,
        meta_effect,
        config.eps_meta_star,
        "meta step effect vs admissible cap",
    )

    s5 = ConditionCheck(
        "S5",
        None,
        math.nan,
        math.nan,
        "assumed at start time; enforced at runtime by the contract monitors",
    )

    return ConditionReport(checks=(s1, s2, s3, s4, s5))


@dataclass(frozen=True)
class Observation:
    """One tick's pre- and postsynaptic activity for a single agent.

    Activity vectors are normalized at the sensor boundary, so norms above
    one (beyond float tolerance) are a structural fault, not data.
    """

    x_pre: np.ndarray
    x_post: np.ndarray

    def __post_init__(self) -> None:
        pre = np.asarray(self.x_pre, dtype=float)
        post = np.asarray(self.x_post, dtype=float)
        if pre.shape != post.shape or pre.ndim != 1:
            raise StructuralError("observation vectors must be 1-d and same shape")
        if not (np.all(np.isfinite(pre)) and np.all(np.isfinite(post))):
            raise StructuralError("observation vectors must be finite")
        limit = 1.0 + 1e-9
        if np.linalg.norm(pre) > limit or np.linalg.norm(post) > limit:
            raise StructuralError("observation norms must not exceed 1")
        object.__setattr__(self, "x_pre", pre)
        object.__setattr__(self, "x_post", post)


@dataclass(frozen=True)
class AgentState:
    """Synaptic weight vector plus the mask of frozen safety coordinates."""

    agent_id: int
    weights: np.ndarray
    frozen_mask: np.ndarray

    def __post_init__(self) -> None:
        weights = np.asarray(self.weights, dtype=float)
        mask = np.asarray(self.frozen_mask)
        if weights.ndim != 1 or mask.shape != weights.shape:
            raise StructuralError("weights and frozen_mask must be 1-d and same shape")
        if mask.dtype != np.bool_:
            raise StructuralError("frozen_mask must be boolean")
        if not np.all(np.isfinite(weights)):
            raise StructuralError("weights must be finite")
        object.__setattr__(self, "weights", weights)
        object.__setattr__(self, "frozen_mask", mask)


@dataclass(frozen=True)
class PolicyParams:
    """Shared policy parameter vector (flattened action-by-embedding matrix)."""

    theta: np.ndarray

    def __post_init__(self) -> None:
        theta = np.asarray(self.theta, dtype=float)
        if theta.ndim != 1 or not np.all(np.isfinite(theta)):
            raise StructuralError("policy parameters must be a finite 1-d vector")
        object.__setattr__(self, "theta", theta)

    def check_box(self, config: SystemConfig) -> None:
        if self.theta.shape[0] != config.n_actions * config.embed_dim:
            raise StructuralError("policy parameter dimension mismatch")
        if np.max(np.abs(self.theta), initial=0.0) > config.policy_box + 1e-12:
            raise StructuralError("policy parameters outside the admissible box")


@dataclass(frozen=True)
class MetaParams:
    """Slow meta-parameter vector driving the synaptic rule."""

    theta: np.ndarray

    def __post_init__(self) -> None:
        theta = np.asarray(self.theta, dtype=float)
        if theta.ndim != 1 or not np.all(np.isfinite(theta)):
            raise StructuralError("meta parameters must be a finite 1-d vector")
        object.__setattr__(self, "theta", theta)


def frozen_mask_for(config: SystemConfig) -> np.ndarray:
    """Boolean mask of frozen coordinates: the leading ceil(fraction * d)."""
    count = math.ceil(config.frozen_fraction * config.weight_dim - 1e-12)
    count = max(0, min(config.weight_dim, count))
    mask = np.zeros(config.weight_dim, dtype=bool)
    mask[:count] = True
    return mask


def initial_weights(config: SystemConfig) -> np.ndarray:
    """(n_agents, weight_dim) seeded initial weights, each row at init_weight_norm."""
    if config.init_weight_norm == 0.0:
        return np.zeros((config.n_agents, config.weight_dim))
    rng = stream_rng(config.seed, "weight_init")
    directions = unit_rows(rng, config.n_agents, config.weight_dim)
    return directions * config.init_weight_norm
