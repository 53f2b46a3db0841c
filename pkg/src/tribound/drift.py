"""Drift measures computed from recorded traces.

Four windowed quantities: worst-agent weight drift, worst-agent embedding
drift, probe-set policy drift in total variation, and meta-parameter drift.
All are pure functions of trace snapshots; queries at unrecorded times
raise with the nearest recorded times named.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import TYPE_CHECKING

import numpy as np

from .cascade import ActionDistribution, policy_distributions, tv_rows
from .errors import StructuralError
from .model import SystemConfig

if TYPE_CHECKING:
    from .engine import Trace


@dataclass(frozen=True)
class DriftReport:
    """All four drift measures over one time window."""

    t1: float
    t2: float
    d_w: float
    d_phi: float
    d_pi: float
    d_theta: float


def tv_distance(p: ActionDistribution, q: ActionDistribution) -> float:
    """Total variation distance between two action distributions."""
    return p.tv(q)


def weight_drift(trace: "Trace", t1: float, t2: float) -> float:
    """Largest per-agent weight movement between two snapshot times."""
    w1 = trace.weights_at(t1)
    w2 = trace.weights_at(t2)
    return float(np.max(np.linalg.norm(w2 - w1, axis=1), initial=0.0))


def embedding_drift(trace: "Trace", t1: float, t2: float) -> float:
    """Largest per-agent ideal-embedding movement between snapshot times."""
    e1 = trace.embeddings_at(t1)
    e2 = trace.embeddings_at(t2)
    return float(np.max(np.linalg.norm(e2 - e1, axis=1), initial=0.0))


def policy_drift(
    trace: "Trace",
    probe_states: np.ndarray,
    t1: float,
    t2: float,
    config: SystemConfig | None = None,
) -> float:
    """Worst probe-state total variation between two policy snapshots."""
    probe_states = np.atleast_2d(np.asarray(probe_states, dtype=float))
    if probe_states.shape[0] == 0:
        raise StructuralError("probe set must not be empty")
    if config is None:
        config = trace.config
    p1 = policy_distributions(trace.policy_at(t1), probe_states, config)
    p2 = policy_distributions(trace.policy_at(t2), probe_states, config)
    return float(tv_rows(p1, p2).max())


def meta_drift(trace: "Trace", t1: float, t2: float) -> float:
    """Meta-parameter movement between two snapshot times."""
    return float(np.linalg.norm(trace.meta_at(t2) - trace.meta_at(t1)))


def drift_report(
    trace: "Trace",
    probe_states: np.ndarray,
    t1: float,
    t2: float,
    config: SystemConfig | None = None,
) -> DriftReport:
    return DriftReport(
        t1=t1,
        t2=t2,
        d_w=weight_drift(trace, t1, t2),
        d_phi=embedding_drift(trace, t1, t2),
        d_pi=policy_drift(trace, probe_states, t1, t2, config),
        d_theta=meta_drift(trace, t1, t2),
    )
