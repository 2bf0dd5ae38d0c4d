"""Experiment configuration: defaults, JSON loading, and the sample repository."""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from typing import Dict, List, Optional

from .domain import FunctionSpec, SizeClass
from .engine import HostConfig, SimParams
from .estimator import TimeEstimator
from .provisioner import PolicyKind, StaticPolicyConfig
from .workload import ConfigError, WorkloadConfig

# Per-size-class timing profile. Initialization is kept below twice the
# start latency so a durable container pays off from the third invocation.
SIZE_PROFILES = {
    SizeClass.SMALL: {"memory_mb": 128.0, "start_time_s": 0.6, "init_time_s": 0.9, "transfer_time_s": 0.010},
    SizeClass.MEDIUM: {"memory_mb": 256.0, "start_time_s": 1.0, "init_time_s": 1.5, "transfer_time_s": 0.018},
    SizeClass.LARGE: {"memory_mb": 512.0, "start_time_s": 1.4, "init_time_s": 2.1, "transfer_time_s": 0.025},
}

# 16 sample functions: 8 small, 5 medium, 3 large. Listed in popularity
# order; the long-tail weighting makes the head of this list hot.
DEFAULT_EXEC_TABLE = [
    ("f01", SizeClass.LARGE, 2.5),
    ("f02", SizeClass.SMALL, 1.6),
    ("f03", SizeClass.SMALL, 1.8),
    ("f04", SizeClass.SMALL, 2.0),
    ("f05", SizeClass.SMALL, 2.2),
    ("f06", SizeClass.SMALL, 2.4),
    ("f07", SizeClass.SMALL, 1.5),
    ("f08", SizeClass.SMALL, 2.1),
    ("f09", SizeClass.SMALL, 2.5),
    ("f10", SizeClass.MEDIUM, 2.6),
    ("f11", SizeClass.MEDIUM, 2.8),
    ("f12", SizeClass.MEDIUM, 3.0),
    ("f13", SizeClass.MEDIUM, 3.2),
    ("f14", SizeClass.MEDIUM, 3.4),
    ("f15", SizeClass.LARGE, 4.2),
    ("f16", SizeClass.LARGE, 4.8),
]


def default_repository() -> Dict[str, FunctionSpec]:
    repo = {}
    for fid, size, exec_s in DEFAULT_EXEC_TABLE:
        profile = SIZE_PROFILES[size]
        repo[fid] = FunctionSpec(
            function_id=fid,
            exec_time_s=exec_s,
            size_class=size,
            **profile,
        )
    return repo


@dataclass
class ExperimentConfig:
    repository: Dict[str, FunctionSpec] = field(default_factory=default_repository)
    host: HostConfig = field(default_factory=HostConfig)
    params: SimParams = field(default_factory=SimParams)
    policies: List[PolicyKind] = field(
        default_factory=lambda: [
            PolicyKind.DYNAMIC_DURABLE,
            PolicyKind.EPHEMERAL_ONLY,
            PolicyKind.STATIC_DURABLE,
        ]
    )
    levels: List[int] = field(default_factory=lambda: [400, 800, 1200])
    seeds: List[int] = field(default_factory=lambda: list(range(1, 11)))
    experiment_window_s: float = 120.0
    estimator_mode: str = "profile"  # or "learning"
    static_counts: Optional[Dict[str, int]] = None  # default: one per function
    extra: dict = field(default_factory=dict)  # free-form section for extensions

    def __post_init__(self):
        if not self.levels:
            raise ConfigError("levels must be non-empty")
        if self.estimator_mode not in ("profile", "learning"):
            raise ConfigError(f"unknown estimator_mode: {self.estimator_mode}")

    def workload_config(self, total_tasks: int, seed: int) -> WorkloadConfig:
        return WorkloadConfig(
            total_tasks=total_tasks,
            experiment_window_s=self.experiment_window_s,
            function_ids=sorted(self.repository),
            high_priority_prefix=self.params.high_priority_prefix,
            rng_seed=seed,
        )

    def static_config(self) -> StaticPolicyConfig:
        counts = self.static_counts or {fid: 1 for fid in self.repository}
        return StaticPolicyConfig(counts=counts)

    def make_estimator(self) -> TimeEstimator:
        nominal = {fid: spec.exec_time_s for fid, spec in self.repository.items()}
        if self.estimator_mode == "profile":
            return TimeEstimator.from_profile(nominal)
        return TimeEstimator.learning(nominal)

    def digest(self) -> str:
        return hashlib.sha256(
            json.dumps(to_dict(self), sort_keys=True).encode("utf-8")
        ).hexdigest()


def to_dict(cfg: ExperimentConfig) -> dict:
    return {
        "repository": [
            {
                "function_id": s.function_id,
                "memory_mb": s.memory_mb,
                "exec_time_s": s.exec_time_s,
                "start_time_s": s.start_time_s,
                "init_time_s": s.init_time_s,
                "transfer_time_s": s.transfer_time_s,
                "size_class": s.size_class.value,
            }
            for s in (cfg.repository[f] for f in sorted(cfg.repository))
        ],
        "host": {
            "total_memory_mb": cfg.host.total_memory_mb,
            "ephemeral_concurrency_cap": cfg.host.ephemeral_concurrency_cap,
            "rng_seed": cfg.host.rng_seed,
            "jitter_fraction": cfg.host.jitter_fraction,
        },
        "params": {
            "oversubscription_threshold": cfg.params.oversubscription_threshold,
            "provisioning_period_s": cfg.params.provisioning_period_s,
            "alpha": cfg.params.alpha,
            "watchdog_period_s": cfg.params.watchdog_period_s,
            "resend_lead_s": cfg.params.resend_lead_s,
            "high_priority_prefix": cfg.params.high_priority_prefix,
            "strict_paper_loop": cfg.params.strict_paper_loop,
        },
        "policies": [p.value for p in cfg.policies],
        "levels": cfg.levels,
        "seeds": cfg.seeds,
        "experiment_window_s": cfg.experiment_window_s,
        "estimator_mode": cfg.estimator_mode,
        "static_counts": cfg.static_counts,
        "extra": cfg.extra,
    }


def from_dict(data: dict) -> ExperimentConfig:
    try:
        repo = default_repository()
        if "repository" in data:
            repo = {}
            for entry in data["repository"]:
                repo[entry["function_id"]] = FunctionSpec(
                    function_id=entry["function_id"],
                    memory_mb=float(entry["memory_mb"]),
                    exec_time_s=float(entry["exec_time_s"]),
                    start_time_s=float(entry["start_time_s"]),
                    init_time_s=float(entry["init_time_s"]),
                    transfer_time_s=float(entry["transfer_time_s"]),
                    size_class=SizeClass(entry["size_class"]),
                )
        host_data = data.get("host", {})
        host = HostConfig(
            total_memory_mb=float(host_data.get("total_memory_mb", 4096.0)),
            ephemeral_concurrency_cap=host_data.get("ephemeral_concurrency_cap"),
            rng_seed=int(host_data.get("rng_seed", 0)),
            jitter_fraction=float(host_data.get("jitter_fraction", 0.0)),
        )
        p = data.get("params", {})
        params = SimParams(
            oversubscription_threshold=int(p.get("oversubscription_threshold", 5)),
            provisioning_period_s=float(p.get("provisioning_period_s", 30.0)),
            alpha=int(p.get("alpha", 3)),
            watchdog_period_s=float(p.get("watchdog_period_s", 2.0)),
            resend_lead_s=float(p.get("resend_lead_s", 3.0)),
            high_priority_prefix=int(p.get("high_priority_prefix", 3)),
            strict_paper_loop=bool(p.get("strict_paper_loop", False)),
        )
        policies = [PolicyKind(v) for v in data.get("policies", ["dynamic", "ephemeral", "static"])]
        cfg = ExperimentConfig(
            repository=repo,
            host=host,
            params=params,
            policies=policies,
            levels=[int(v) for v in data.get("levels", [400, 800, 1200])],
            seeds=[int(v) for v in data.get("seeds", list(range(1, 11)))],
            experiment_window_s=float(data.get("experiment_window_s", 120.0)),
            estimator_mode=data.get("estimator_mode", "profile"),
            static_counts=data.get("static_counts"),
            extra=data.get("extra", {}),
        )
    except (KeyError, ValueError, TypeError) as exc:
        raise ConfigError(f"invalid experiment config: {exc}") from exc
    for fid in cfg.static_counts or {}:
        if fid not in cfg.repository:
            raise ConfigError(f"static_counts references unknown function {fid!r}")
    return cfg


def load(path) -> ExperimentConfig:
    with open(path, "r", encoding="utf-8") as fh:
        try:
            data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: {exc}") from exc
    return from_dict(data)


def save(cfg: ExperimentConfig, path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(to_dict(cfg), fh, indent=2, sort_keys=True)
        fh.write("\n")
