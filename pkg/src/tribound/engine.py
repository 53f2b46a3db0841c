"""Multi-rate simulation engine and scenario library.

One run advances three nested loops on a shared clock: every fast tick each
agent applies one modulated synaptic update and the never-skipped contracts
are evaluated; every coordination cycle the swarm embeds, aggregates over
the communication graph, refreshes the modulation gains, and takes one
trust-region policy step; every slow cycle the meta level proposes one rule
update, gated by the compatibility check, followed by an adaptation trial.
A rule update applied at a slow boundary takes effect strictly after that
boundary. When boundaries coincide, fast work completes first, then
coordination, then meta.

Everything is deterministic given (scenario, config, seed): all randomness
flows through named seed streams, so repeated runs produce byte-identical
traces.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Mapping

import numpy as np

from .bounds import BoundReport, phi_max as phi_max_of, total_bound
from .cascade import (
    AdjacencyGraph,
    PolicyTarget,
    make_encoder,
    marl_step,
    modulation,
    policy_distributions,
    probe_embeddings,
    realized_embeddings,
    tv_rows,
)
from .contracts import (
    CONTRACT_IDS,
    ContractVerdict,
    Monitor,
    all_margins,
    ml2_increase,
)
from .errors import EnforcementError, TraceQueryError, ValidationError
from .hebbian import hebbian_tick, modulation_gain, weight_norm_ceiling
from .meta import (
    MetaCascade,
    adaptation_trial,
    cascading_sensitivity,
    compatibility_check,
)
from .model import (
    MetaParams,
    PolicyParams,
    SystemConfig,
    apply_overrides,
    config_hash,
    config_to_dict,
    frozen_mask_for,
    initial_weights,
    validate,
)
from .seeding import stream_rng, unit_rows

_TIME_TOL = 1e-9
SLOPE_TOL = 1e-6

EXPECTATIONS = ("none", "growth", "step_violation", "degradation", "alarm")


@dataclass(frozen=True)
class Scenario:
    """A named, fully reproducible run setup.

    expected states what a run of this scenario is supposed to demonstrate:
    "none" for nominal operation, "growth" for unbounded weight growth,
    "step_violation" for per-tick cap breaches, "degradation" for a
    recomputed drift ceiling far above baseline, "alarm" for a margin
    early-warning.
    """

    name: str
    description: str
    overrides: Mapping[str, Any] = field(default_factory=dict)
    duration: float = 100.0
    aligned_observations: bool = False
    unit_gain: bool = False
    force_meta: bool = False
    record_policy_tv: bool = True
    theta_init: tuple[float, ...] | None = None
    theta_star: tuple[float, ...] | None = None
    expected: str = "none"

    def __post_init__(self) -> None:
        if self.expected not in EXPECTATIONS:
            raise ValidationError(
                f"unknown expectation {self.expected!r}; choose from {EXPECTATIONS}"
            )


SCENARIOS: dict[str, Scenario] = {
    scenario.name: scenario
    for scenario in (
        Scenario(
            name="baseline",
            description="nominal operating point; every contract should hold",
            duration=100.0,
        ),
        Scenario(
            name="delta_zero",
            description=(
                "zero weight decay with the clamp disabled: weight norms grow "
                "linearly along the analytic envelope instead of saturating"
            ),
            overrides={
                "delta": 0.0,
                "enforce_clamp": False,
                "frozen_fraction": 0.0,
                "n_agents": 10,
                "init_weight_norm": 0.0,
            },
            duration=10000.0,
            aligned_observations=True,
            unit_gain=True,
            record_policy_tv=False,
            expected="growth",
        ),
        Scenario(
            name="no_clamp",
            description=(
                "step clamp disabled at the stable operating point: intrinsic "
                "steps exceed the cap and the per-cycle drift ceiling grows "
                "by the intrinsic-to-cap ratio"
            ),
            overrides={"enforce_clamp": False},
            duration=100.0,
            expected="step_violation",
        ),
        Scenario(
            name="slow_marl",
            description=(
                "coordination and meta periods stretched tenfold: every "
                "contract still holds per cycle, but the per-cycle drift "
                "ceiling and the total bound degrade by an order of magnitude"
            ),
            overrides={"tau2": 20.0, "tau3": 200.0},
            duration=100.0,
            expected="degradation",
        ),
        Scenario(
            name="crafted_margin_breach",
            description=(
                "meta parameters start one clipped step from the box "
                "boundary and the target pulls outward: the gate rejects the "
                "step, the forced apply lands on the boundary, and the "
                "margin alarm fires"
            ),
            duration=20.0,
            force_meta=True,
            theta_init=(1.0 - 5e-6, 0.0, 0.0, 0.0),
            theta_star=(2.0, 0.0, 0.0, 0.0),
            expected="alarm",
        ),
    )
}


def scenario_names() -> tuple[str, ...]:
    return tuple(SCENARIOS)


def get_scenario(name: str) -> Scenario:
    try:
        return SCENARIOS[name]
    except KeyError:
        raise ValidationError(
            f"unknown scenario {name!r}; available: {', '.join(SCENARIOS)}"
        ) from None


class Trace:
    """Everything one run recorded.

    Per-tick streams are dense arrays; weight, embedding, policy, and meta
    snapshots are taken at t = 0 and at every boundary of the owning loop.
    Snapshot queries must hit a recorded time; a miss raises with the
    nearest recorded times named.
    """

    def __init__(
        self,
        *,
        config: SystemConfig,
        scenario_name: str,
        expected: str,
        seed: int,
        duration: float,
        ticks: int,
        marl_cycles: int,
        meta_cycles: int,
        step_norms: np.ndarray,
        clamped: np.ndarray,
        max_weight_norm: np.ndarray,
        tick_policy_tv: np.ndarray | None,
        snap_times: list[float],
        snap_weights: list[np.ndarray],
        snap_embeddings: list[np.ndarray],
        policy_times: list[float],
        policy_snaps: list[np.ndarray],
        meta_times: list[float],
        meta_snaps: list[np.ndarray],
        marl_records: list[dict[str, Any]],
        meta_records: list[dict[str, Any]],
        events: list[ContractVerdict],
        last_verdicts: dict[str, ContractVerdict],
        fail_count: int,
        alarm_count: int,
        final_weights: np.ndarray,
        halted: bool,
        halt_reason: str | None,
    ) -> None:
        self.config = config
        self.scenario_name = scenario_name
        self.expected = expected
        self.seed = seed
        self.duration = duration
        self.ticks = ticks
        self.marl_cycles = marl_cycles
        self.meta_cycles = meta_cycles
        self.step_norms = step_norms
        self.clamped = clamped
        self.max_weight_norm = max_weight_norm
        self.tick_policy_tv = tick_policy_tv
        self.snap_times = snap_times
        self.snap_weights = snap_weights
        self.snap_embeddings = snap_embeddings
        self.policy_times = policy_times
        self.policy_snaps = policy_snaps
        self.meta_times = meta_times
        self.meta_snaps = meta_snaps
        self.marl_records = marl_records
        self.meta_records = meta_records
        self.events = events
        self.last_verdicts = last_verdicts
        self.fail_count = fail_count
        self.alarm_count = alarm_count
        self.final_weights = final_weights
        self.halted = halted
        self.halt_reason = halt_reason

    def tick_time(self, index: int) -> float:
        return (index + 1) * self.config.tau1

    @staticmethod
    def _lookup(times: list[float], t: float, kind: str) -> int:
        tol = _TIME_TOL * max(1.0, abs(t))
        for i, recorded in enumerate(times):
            if abs(recorded - t) <= tol:
                return i
        below = max((x for x in times if x < t), default=None)
        above = min((x for x in times if x > t), default=None)
        raise TraceQueryError(
            f"no {kind} snapshot at t={t!r}; nearest recorded times: "
            f"{below!r} below, {above!r} above"
        )

    def weights_at(self, t: float) -> np.ndarray:
        return self.snap_weights[self._lookup(self.snap_times, t, "weight")]

    def embeddings_at(self, t: float) -> np.ndarray:
        return self.snap_embeddings[self._lookup(self.snap_times, t, "embedding")]

    def policy_at(self, t: float) -> np.ndarray:
        return self.policy_snaps[self._lookup(self.policy_times, t, "policy")]

    def meta_at(self, t: float) -> np.ndarray:
        return self.meta_snaps[self._lookup(self.meta_times, t, "meta")]

    def metadata(self) -> dict[str, Any]:
        return {
            "scenario": self.scenario_name,
            "expected": self.expected,
            "seed": self.seed,
            "duration": self.duration,
            "ticks": self.ticks,
            "marl_cycles": self.marl_cycles,
            "meta_cycles": self.meta_cycles,
            "fail_count": self.fail_count,
            "alarm_count": self.alarm_count,
            "halted": self.halted,
            "halt_reason": self.halt_reason,
            "config": config_to_dict(self.config),
            "config_hash": config_hash(self.config),
        }

    def save(self, out_dir: str | Path) -> None:
        """Write the whole trace as deterministic text files.

        steps.csv scales as ticks times agents; long runs produce large
        files. Floats are written with repr, so identical runs produce
        byte-identical files.
        """
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        tau1 = self.config.tau1

        (out / "run.json").write_text(
            json.dumps(self.metadata(), sort_keys=True, indent=2) + "\n"
        )

        with (out / "steps.csv").open("w") as fh:
            fh.write("t,agent_id,step_norm,clamped\n")
            for i in range(self.ticks):
                t = repr((i + 1) * tau1)
                row = self.step_norms[i]
                flags = self.clamped[i]
                fh.write(
                    "".join(
                        f"{t},{a},{row[a]!r},{int(flags[a])}\n"
                        for a in range(row.shape[0])
                    )
                )

        with (out / "series.csv").open("w") as fh:
            if self.tick_policy_tv is None:
                fh.write("t,max_weight_norm\n")
                for i in range(self.ticks):
                    fh.write(f"{(i + 1) * tau1!r},{self.max_weight_norm[i]!r}\n")
            else:
                fh.write("t,max_weight_norm,policy_tv\n")
                for i in range(self.ticks):
                    fh.write(
                        f"{(i + 1) * tau1!r},{self.max_weight_norm[i]!r},"
                        f"{self.tick_policy_tv[i]!r}\n"
                    )

        def write_matrix_snaps(
            path: Path, times: list[float], snaps: list[np.ndarray], prefix: str
        ) -> None:
            with path.open("w") as fh:
                width = snaps[0].shape[1] if snaps else 0
                header = ",".join(f"{prefix}{j}" for j in range(width))
                fh.write(f"t,agent_id,{header}\n")
                for t, snap in zip(times, snaps):
                    for a in range(snap.shape[0]):
                        values = ",".join(repr(v) for v in snap[a])
                        fh.write(f"{t!r},{a},{values}\n")

        def write_vector_snaps(
            path: Path, times: list[float], snaps: list[np.ndarray], prefix: str
        ) -> None:
            with path.open("w") as fh:
                width = snaps[0].shape[0] if snaps else 0
                header = ",".join(f"{prefix}{j}" for j in range(width))
                fh.write(f"t,{header}\n")
                for t, snap in zip(times, snaps):
                    values = ",".join(repr(v) for v in snap)
                    fh.write(f"{t!r},{values}\n")

        write_matrix_snaps(
            out / "snapshots_weights.csv", self.snap_times, self.snap_weights, "w"
        )
        write_matrix_snaps(
            out / "snapshots_embeddings.csv",
            self.snap_times,
            self.snap_embeddings,
            "e",
        )
        write_vector_snaps(
            out / "snapshots_policy.csv", self.policy_times, self.policy_snaps, "p"
        )
        write_vector_snaps(
            out / "snapshots_meta.csv", self.meta_times, self.meta_snaps, "m"
        )

        with (out / "marl.csv").open("w") as fh:
            fh.write("t,tv_step,halvings,target_distance,subopt_proxy\n")
            for rec in self.marl_records:
                fh.write(
                    f"{rec['t']!r},{rec['tv_step']!r},{rec['halvings']},"
                    f"{rec['target_distance']!r},{rec['subopt_proxy']!r}\n"
                )

        with (out / "meta.csv").open("w") as fh:
            fh.write(
                "t,step_norm,grad_norm,m1,m2,m3,predicted_dpi,min_margin,"
                "applied,k_inner,t_adapt\n"
            )
            for rec in self.meta_records:
                fh.write(
                    f"{rec['t']!r},{rec['step_norm']!r},{rec['grad_norm']!r},"
                    f"{int(rec['m1'])},{int(rec['m2'])},{int(rec['m3'])},"
                    f"{rec['predicted_dpi']!r},{rec['min_margin']!r},"
                    f"{int(rec['applied'])},{rec['k_inner']},{rec['t_adapt']!r}\n"
                )

        with (out / "events.jsonl").open("w") as fh:
            for verdict in self.events:
                fh.write(json.dumps(verdict.to_record(), sort_keys=True) + "\n")


def _resolve_config(
    scenario: Scenario, config: SystemConfig | None, seed: int | None
) -> SystemConfig:
    base = SystemConfig() if config is None else config
    cfg = apply_overrides(base, dict(scenario.overrides)) if scenario.overrides else base
    if seed is not None:
        cfg = apply_overrides(cfg, {"seed": int(seed)})
    validate(cfg)
    return cfg


def run(
    scenario: Scenario | str,
    config: SystemConfig | None = None,
    seed: int | None = None,
    duration: float | None = None,
) -> Trace:
    """Execute one scenario and record the full trace."""
    if isinstance(scenario, str):
        scenario = get_scenario(scenario)
    cfg = _resolve_config(scenario, config, seed)
    horizon = scenario.duration if duration is None else float(duration)
    if horizon < 0.0 or not math.isfinite(horizon):
        raise ValidationError("duration must be finite and nonnegative")

    n = cfg.n_agents
    cascade = MetaCascade(
        cfg,
        theta_star=None
        if scenario.theta_star is None
        else np.asarray(scenario.theta_star, dtype=float),
    )
    if scenario.theta_init is None:
        theta = MetaParams(np.zeros(cfg.meta_dim))
    else:
        theta = MetaParams(np.asarray(scenario.theta_init, dtype=float))
    rule = cascade.rule_for(theta.theta)

    frozen = frozen_mask_for(cfg)
    frozen_any = bool(frozen.any())
    weights = initial_weights(cfg)
    encoder = make_encoder(cfg)
    graph = AdjacencyGraph.from_config(cfg)
    mix = graph.mix_matrix(cfg.lip_gnn)
    target_map = PolicyTarget.from_config(cfg)
    probes = probe_embeddings(cfg)
    reference_policy = np.clip(
        target_map.offset, -cfg.policy_box, cfg.policy_box
    )
    danger = unit_rows(
        stream_rng(cfg.seed, "danger_probes"), cfg.danger_probe_count, cfg.weight_dim
    )
    danger_masked = danger * frozen
    safety_base = weights @ danger_masked.T if frozen_any else None

    policy = PolicyParams(np.zeros(cfg.n_actions * cfg.embed_dim))
    monitor = Monitor(cfg)
    margins = all_margins(cascade, theta.theta)

    if scenario.unit_gain:
        gains = np.ones(n)
    else:
        gains = np.full(n, modulation_gain(0.0, cfg))
    obs_rng = stream_rng(cfg.seed, "observations")

    ticks_total = int(math.floor(horizon / cfg.tau1 + _TIME_TOL))
    step_norms = np.zeros((ticks_total, n))
    clamped = np.zeros((ticks_total, n), dtype=bool)
    max_weight_norm = np.zeros(ticks_total)
    tick_policy_tv = np.zeros(ticks_total) if scenario.record_policy_tv else None

    snap_times = [0.0]
    snap_weights = [weights.copy()]
    snap_embeddings = [encoder.encode(weights)]
    policy_times = [0.0]
    policy_snaps = [policy.theta.copy()]
    meta_times = [0.0]
    meta_snaps = [theta.theta.copy()]
    marl_records: list[dict[str, Any]] = []
    meta_records: list[dict[str, Any]] = []
    k_inner_history: list[int] = []

    if scenario.record_policy_tv:
        prev_dists = policy_distributions(policy.theta, snap_embeddings[0], cfg)

    marl_k = 1
    meta_k = 1
    marl_cycles = 0
    meta_cycles = 0
    halted = False
    halt_reason: str | None = None

    weight_norms = np.linalg.norm(weights, axis=1)
    for i in range(ticks_total):
        t = (i + 1) * cfg.tau1

        if scenario.aligned_observations:
            dirs = np.divide(
                weights,
                weight_norms[:, None],
                out=np.zeros_like(weights),
                where=weight_norms[:, None] > 0.0,
            )
            zero = weight_norms == 0.0
            if zero.any():
                dirs[zero, 0] = 1.0
            x_pre = x_post = dirs
        else:
            raw = obs_rng.standard_normal((2, n, cfg.weight_dim))
            raw_norms = np.linalg.norm(raw, axis=2, keepdims=True)
            raw_norms[raw_norms == 0.0] = 1.0
            radii = obs_rng.uniform(size=(2, n, 1))
            scaled = raw / raw_norms * radii
            x_pre, x_post = scaled[0], scaled[1]

        weights, _, applied_norms, clamp_flags = hebbian_tick(
            rule, cfg, weights, x_pre, x_post, gains, frozen
        )
        step_norms[i] = applied_norms
        clamped[i] = clamp_flags
        weight_norms = np.linalg.norm(weights, axis=1)
        max_weight_norm[i] = weight_norms.max()

        monitor.observe("NP-C1", t, float(applied_norms.max()), margins["NP-C1"])
        if frozen_any:
            safety_delta = float(
                np.abs(weights @ danger_masked.T - safety_base).max()
            )
        else:
            safety_delta = 0.0
        monitor.observe("NP-C2", t, safety_delta, margins["NP-C2"])

        if scenario.record_policy_tv:
            ideal_now = encoder.encode(weights)
            dists = policy_distributions(policy.theta, ideal_now, cfg)
            tick_policy_tv[i] = float(tv_rows(dists, prev_dists).max())
            prev_dists = dists

        while marl_k * cfg.tau2 <= t + _TIME_TOL:
            boundary = marl_k * cfg.tau2
            realized, ideal, error_norms = realized_embeddings(weights, encoder)
            aggregated = mix @ realized
            if not scenario.unit_gain:
                signals = modulation(aggregated, aggregated.mean(axis=0), cfg)
                gains = np.asarray(modulation_gain(signals, cfg))
            try:
                policy, info = marl_step(policy, aggregated, cfg, target_map, probes)
            except EnforcementError as exc:
                halted = True
                halt_reason = f"coordination update at t={boundary!r}: {exc}"
                break
            monitor.observe(
                "MARL-C1", boundary, info.tv_step, margins["MARL-C1"], force_log=True
            )
            gnn_measured = float(error_norms.max())
            if rule.delta < 0.0:
                ceiling = weight_norm_ceiling(rule)
                gnn_precondition_ok = float(weight_norms.max()) <= ceiling + 1e-9
            else:
                gnn_precondition_ok = True
            monitor.observe(
                "GNN-C1",
                boundary,
                gnn_measured,
                margins["GNN-C1"],
                inconclusive=not gnn_precondition_ok,
                force_log=True,
                note=""
                if gnn_precondition_ok
                else "precondition breach: weight norm beyond the invariant ball",
            )
            marl_records.append(
                {
                    "t": boundary,
                    "tv_step": info.tv_step,
                    "halvings": info.halvings,
                    "target_distance": info.target_distance,
                    "subopt_proxy": cfg.lip_pi * info.target_distance,
                }
            )
            if scenario.record_policy_tv:
                prev_dists = policy_distributions(policy.theta, ideal, cfg)
            snap_times.append(boundary)
            snap_weights.append(weights.copy())
            snap_embeddings.append(ideal)
            policy_times.append(boundary)
            policy_snaps.append(policy.theta.copy())
            marl_cycles += 1
            marl_k += 1
        if halted:
            step_norms = step_norms[: i + 1]
            clamped = clamped[: i + 1]
            max_weight_norm = max_weight_norm[: i + 1]
            if tick_policy_tv is not None:
                tick_policy_tv = tick_policy_tv[: i + 1]
            ticks_total = i + 1
            break

        while meta_k * cfg.tau3 <= t + _TIME_TOL:
            boundary = meta_k * cfg.tau3
            margins_before = dict(margins)
            candidate, grad_norm = cascade.step(theta)
            step_norm = float(np.linalg.norm(candidate.theta - theta.theta))
            verdict = compatibility_check(
                step_norm, [(cid, margins[cid]) for cid in CONTRACT_IDS], cfg
            )
            applied = verdict.passed or scenario.force_meta
            if applied:
                theta = candidate
                rule = cascade.rule_for(theta.theta)
                margins = all_margins(cascade, theta.theta)

            trial = adaptation_trial(
                cascade, theta.theta, reference_policy, probes, cfg
            )
            k_inner_history.append(trial.k_inner)
            monitor.observe(
                "ML-C1", boundary, trial.t_adapt, margins["ML-C1"], force_log=True
            )
            increase = ml2_increase(k_inner_history)
            if increase is None:
                monitor.observe(
                    "ML-C2",
                    boundary,
                    math.nan,
                    margins["ML-C2"],
                    inconclusive=True,
                    force_log=True,
                    note=f"{len(k_inner_history)} trials so far",
                )
            else:
                monitor.observe(
                    "ML-C2", boundary, increase, margins["ML-C2"], force_log=True
                )

            meta_records.append(
                {
                    "t": boundary,
                    "step_norm": step_norm,
                    "grad_norm": grad_norm,
                    "m1": verdict.m1,
                    "m2": verdict.m2,
                    "m3": verdict.m3,
                    "predicted_dpi": verdict.predicted_dpi,
                    "min_margin": verdict.min_margin,
                    "applied": applied,
                    "k_inner": trial.k_inner,
                    "t_adapt": trial.t_adapt,
                    "margins_before": margins_before,
                    "margins_after": dict(margins),
                }
            )
            meta_times.append(boundary)
            meta_snaps.append(theta.theta.copy())
            meta_cycles += 1
            meta_k += 1

    last_verdicts = {
        cid: verdict
        for cid in CONTRACT_IDS
        if (verdict := monitor.latest(cid)) is not None
    }
    return Trace(
        config=cfg,
        scenario_name=scenario.name,
        expected=scenario.expected,
        seed=cfg.seed,
        duration=horizon,
        ticks=ticks_total,
        marl_cycles=marl_cycles,
        meta_cycles=meta_cycles,
        step_norms=step_norms,
        clamped=clamped,
        max_weight_norm=max_weight_norm,
        tick_policy_tv=tick_policy_tv,
        snap_times=snap_times,
        snap_weights=snap_weights,
        snap_embeddings=snap_embeddings,
        policy_times=policy_times,
        policy_snaps=policy_snaps,
        meta_times=meta_times,
        meta_snaps=meta_snaps,
        marl_records=marl_records,
        meta_records=meta_records,
        events=monitor.events,
        last_verdicts=last_verdicts,
        fail_count=monitor.fail_count,
        alarm_count=monitor.alarm_count,
        final_weights=weights,
        halted=halted,
        halt_reason=halt_reason,
    )


@dataclass(frozen=True)
class CheckResult:
    """One trace-against-bound comparison.

    passed is None when the check does not apply to this run (for example
    the closed-form bounds are undefined in the unstable regime, or the
    needed stream was not recorded).
    """

    check_id: str
    passed: bool | None
    worst: float
    bound: float
    note: str = ""


@dataclass(frozen=True)
class VerificationReport:
    checks: tuple[CheckResult, ...]

    def check(self, check_id: str) -> CheckResult:
        for result in self.checks:
            if result.check_id == check_id:
                return result
        raise KeyError(check_id)

    @property
    def all_passed(self) -> bool:
        return all(result.passed is not False for result in self.checks)

    def failures(self) -> tuple[CheckResult, ...]:
        return tuple(r for r in self.checks if r.passed is False)

    def skipped(self) -> tuple[CheckResult, ...]:
        return tuple(r for r in self.checks if r.passed is None)


def _least_squares_slope(times: np.ndarray, values: np.ndarray) -> float:
    t = times - times.mean()
    denom = float(t @ t)
    if denom == 0.0:
        return 0.0
    return float(t @ (values - values.mean()) / denom)


def verify(trace: Trace, report: BoundReport | None = None) -> VerificationReport:
    """Replay a recorded trace against the closed-form ceilings.

    Six checks: per-tick step norms, per-cycle weight drift, per-cycle
    embedding drift, per-tick induced policy drift, per-cycle meta movement
    scaled by the cascading sensitivity, and non-accumulation (late-run
    slopes of the weight-norm and suboptimality-proxy streams).
    """
    cfg = trace.config
    tol = 1e-12
    stable = cfg.delta < 0.0
    if stable and report is None:
        report = total_bound(cfg)
    checks: list[CheckResult] = []
    unstable_note = "closed-form ceiling undefined in the unstable regime"

    if not stable:
        checks.append(
            CheckResult("per_tick_step_norm", None, math.nan, math.nan, unstable_note)
        )
    else:
        worst = float(trace.step_norms.max()) if trace.step_norms.size else 0.0
        bound = report.delta1_eff
        checks.append(
            CheckResult("per_tick_step_norm", worst <= bound + tol, worst, bound)
        )

    pairs = list(zip(trace.snap_times, trace.snap_times[1:]))
    if not stable:
        checks.append(
            CheckResult(
                "weight_drift_per_cycle", None, math.nan, math.nan, unstable_note
            )
        )
        checks.append(
            CheckResult(
                "embedding_drift_per_cycle", None, math.nan, math.nan, unstable_note
            )
        )
    else:
        worst_w = 0.0
        worst_e = 0.0
        for (w1, w2), (e1, e2) in zip(
            zip(trace.snap_weights, trace.snap_weights[1:]),
            zip(trace.snap_embeddings, trace.snap_embeddings[1:]),
        ):
            worst_w = max(worst_w, float(np.linalg.norm(w2 - w1, axis=1).max()))
            worst_e = max(worst_e, float(np.linalg.norm(e2 - e1, axis=1).max()))
        bound_w = report.n12 * report.delta1_eff
        bound_e = report.phi_max
        note = "" if pairs else "no complete coordination cycle recorded"
        checks.append(
            CheckResult(
                "weight_drift_per_cycle",
                worst_w <= bound_w + tol if pairs else None,
                worst_w,
                bound_w,
                note,
            )
        )
        checks.append(
            CheckResult(
                "embedding_drift_per_cycle",
                worst_e <= bound_e + tol if pairs else None,
                worst_e,
                bound_e,
                note,
            )
        )

    induced_bound = cfg.lip_pi * cfg.lip_phi * cfg.delta_np
    if trace.tick_policy_tv is None:
        checks.append(
            CheckResult(
                "induced_policy_drift_per_tick",
                None,
                math.nan,
                induced_bound,
                "per-tick policy drift not recorded",
            )
        )
    elif not stable:
        checks.append(
            CheckResult(
                "induced_policy_drift_per_tick",
                None,
                math.nan,
                induced_bound,
                unstable_note,
            )
        )
    else:
        worst = float(trace.tick_policy_tv.max()) if trace.tick_policy_tv.size else 0.0
        checks.append(
            CheckResult(
                "induced_policy_drift_per_tick",
                worst <= induced_bound + tol,
                worst,
                induced_bound,
            )
        )

    k_cascade = cascading_sensitivity(cfg)
    meta_bound = k_cascade * cfg.eta3 * cfg.g_max
    meta_pairs = list(zip(trace.meta_snaps, trace.meta_snaps[1:]))
    if meta_pairs:
        worst_meta = max(
            k_cascade * float(np.linalg.norm(b - a)) for a, b in meta_pairs
        )
        checks.append(
            CheckResult(
                "meta_effect_per_cycle",
                worst_meta <= meta_bound + tol,
                worst_meta,
                meta_bound,
            )
        )
    else:
        checks.append(
            CheckResult(
                "meta_effect_per_cycle",
                None,
                math.nan,
                meta_bound,
                "no complete meta cycle recorded",
            )
        )

    slopes: list[float] = []
    half = trace.duration / 2.0
    if trace.ticks >= 2:
        times = (np.arange(trace.ticks) + 1) * cfg.tau1
        late = times >= half
        if int(late.sum()) >= 2:
            slopes.append(
                _least_squares_slope(times[late], trace.max_weight_norm[late])
            )
    late_marl = [
        (rec["t"], rec["subopt_proxy"])
        for rec in trace.marl_records
        if rec["t"] >= half
    ]
    if len(late_marl) >= 2:
        marl_t = np.array([t for t, _ in late_marl])
        marl_v = np.array([v for _, v in late_marl])
        slopes.append(_least_squares_slope(marl_t, marl_v))
    if slopes:
        worst_slope = max(slopes)
        checks.append(
            CheckResult(
                "non_accumulation", worst_slope <= SLOPE_TOL, worst_slope, SLOPE_TOL
            )
        )
    else:
        checks.append(
            CheckResult(
                "non_accumulation",
                None,
                math.nan,
                SLOPE_TOL,
                "run too short for a late-half slope",
            )
        )

    return VerificationReport(checks=tuple(checks))


def confirm_expectation(
    scenario: Scenario, trace: Trace, base_config: SystemConfig | None = None
) -> bool:
    """Did the run demonstrate what the scenario exists to demonstrate?"""
    base = SystemConfig() if base_config is None else base_config
    if scenario.expected == "none":
        return trace.fail_count == 0 and trace.alarm_count == 0 and not trace.halted
    if scenario.expected == "growth":
        return verify(trace).check("non_accumulation").passed is False
    if scenario.expected == "step_violation":
        return any(
            v.contract_id == "NP-C1" and v.passed is False for v in trace.events
        )
    if scenario.expected == "degradation":
        return phi_max_of(trace.config) >= 5.0 * phi_max_of(base)
    if scenario.expected == "alarm":
        m3_failed = any(not rec["m3"] for rec in trace.meta_records)
        return m3_failed and trace.alarm_count > 0
    raise ValidationError(f"unknown expectation {scenario.expected!r}")
