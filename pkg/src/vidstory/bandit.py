"""Factored UCB1 over the three creative dimensions.

Each dimension keeps its own arm statistics. In ``Factored`` mode a pull
updates each selected arm with that dimension's own efficacy score; in
``Scalar`` mode all three selected arms receive the holistic aggregate.
Rewards arrive on a 0-100 scale and are stored divided by 100.
"""

from __future__ import annotations

import enum
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

from .creative_space import DIMENSIONS, Arm, CreativeConfig, CreativeDimension, arm, enumerate_arms
from .errors import NotDeterminedError, ValidationError
from .verifiers import FactoredReward

POLICY_VERSION = 1
DEFAULT_EXPLORATION = math.sqrt(2.0)
DEFAULT_PRIOR_WEIGHT = 1.0

__all__ = [
    "ArmStats",
    "BanditPolicy",
    "FactoredReward",
    "Mode",
    "WarmStartPrior",
    "best_arm",
    "new_policy",
    "select",
    "ucb_index",
    "update",
    "warm_start",
]


class Mode(enum.Enum):
    Factored = "Factored"
    Scalar = "Scalar"


@dataclass
class ArmStats:
    pulls: float = 0.0
    value: float = 0.0


@dataclass(frozen=True)
class WarmStartPrior:
    dimension: CreativeDimension
    index: int
    prior_value: float
    prior_weight: float = DEFAULT_PRIOR_WEIGHT

    def __post_init__(self):
        if not 0 <= self.prior_value <= 100:
            raise ValidationError(f"prior_value {self.prior_value} outside [0, 100]")
        if not self.prior_weight > 0:
            raise ValidationError(f"prior_weight must be > 0, got {self.prior_weight}")


@dataclass
class BanditPolicy:
    per_dimension: dict[CreativeDimension, list[ArmStats]]
    total_pulls: dict[CreativeDimension, float]
    exploration_constant: float = DEFAULT_EXPLORATION
    mode: Mode = Mode.Factored
    updates: int = field(default=0)

    def check(self) -> None:
        for d in DIMENSIONS:
            stats = self.per_dimension[d]
            if len(stats) != len(enumerate_arms(d)):
                raise ValidationError(f"{d.value}: expected {len(enumerate_arms(d))} arms, got {len(stats)}")
            if abs(sum(s.pulls for s in stats) - self.total_pulls[d]) > 1e-9:
                raise ValidationError(f"{d.value}: arm pulls do not sum to total_pulls")
            for s in stats:
                if s.pulls < 0 or not 0 <= s.value <= 1:
                    raise ValidationError(f"{d.value}: invalid arm stats {s}")

    def to_dict(self) -> dict:
        return {
            "version": POLICY_VERSION,
            "mode": self.mode.value,
            "exploration_constant": self.exploration_constant,
            "updates": self.updates,
            "dimensions": {
                d.value: {
                    "labels": [a.label for a in enumerate_arms(d)],
                    "pulls": [s.pulls for s in self.per_dimension[d]],
                    "values": [s.value for s in self.per_dimension[d]],
                    "total_pulls": self.total_pulls[d],
                }
                for d in DIMENSIONS
            },
        }

    @classmethod
    def from_dict(cls, data: dict) -> BanditPolicy:
        if data.get("version") != POLICY_VERSION:
            raise ValidationError(f"unsupported policy document version {data.get('version')!r}")
        per_dim, totals = {}, {}
        for d in DIMENSIONS:
            block = data["dimensions"][d.value]
            if block.get("labels", [a.label for a in enumerate_arms(d)]) != [a.label for a in enumerate_arms(d)]:
                raise ValidationError(f"{d.value}: arm labels do not match the registry")
            per_dim[d] = [ArmStats(float(n), float(v)) for n, v in zip(block["pulls"], block["values"])]
            totals[d] = float(block["total_pulls"])
        policy = cls(per_dim, totals, float(data["exploration_constant"]), Mode(data["mode"]), int(data.get("updates", 0)))
        policy.check()
        return policy

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2) + "\n")

    @classmethod
    def load(cls, path: str | Path) -> BanditPolicy:
        return cls.from_dict(json.loads(Path(path).read_text()))


def new_policy(exploration_constant: float = DEFAULT_EXPLORATION, mode: Mode | str = Mode.Factored) -> BanditPolicy:
    if not (isinstance(exploration_constant, (int, float)) and exploration_constant > 0 and math.isfinite(exploration_constant)):
        raise ValidationError(f"exploration constant must be a positive real, got {exploration_constant!r}")
    return BanditPolicy(
        per_dimension={d: [ArmStats() for _ in enumerate_arms(d)] for d in DIMENSIONS},
        total_pulls={d: 0.0 for d in DIMENSIONS},
        exploration_constant=float(exploration_constant),
        mode=Mode(mode),
    )


def warm_start(policy: BanditPolicy, priors: list[WarmStartPrior]) -> BanditPolicy:
    """Seed arm values from 0-100 prior scores, each worth ``prior_weight`` pseudo-pulls.

    Mutates and returns ``policy``. Arms without a prior are left untouched.
    """
    for p in priors:
        n = len(enumerate_arms(p.dimension))
        if not 0 <= p.index < n:
            raise ValidationError(f"prior references unknown arm {p.dimension.value}[{p.index}]")
    for p in priors:
        s = policy.per_dimension[p.dimension][p.index]
        s.value = p.prior_value / 100.0
        s.pulls = float(p.prior_weight)
    for d in DIMENSIONS:
        total = 0.0
        for s in policy.per_dimension[d]:
            total += s.pulls
        policy.total_pulls[d] = total
    return policy


def ucb_index(value: float, pulls: float, total_pulls: float, c: float) -> float:
    """UCB1 index; untried arms score ``+inf``.

    ``ln(total)`` is floored at 0 so fractional pseudo-counts below one pull
    cannot produce a negative radicand.
    """
    if pulls <= 0:
        return math.inf
    log_total = math.log(total_pulls) if total_pulls > 1.0 else 0.0
    return value + c * math.sqrt(log_total / pulls)


def _select_index(stats: list[ArmStats], total: float, c: float) -> int:
    best, best_idx = 0, -math.inf
    for i, s in enumerate(stats):
        idx = ucb_index(s.value, s.pulls, total, c)
        if idx > best_idx:
            best, best_idx = i, idx
    return best


def select(policy: BanditPolicy) -> CreativeConfig:
    """Per-dimension UCB argmax; ties go to the lowest arm index."""
    c = policy.exploration_constant
    idx = [_select_index(policy.per_dimension[d], policy.total_pulls[d], c) for d in DIMENSIONS]
    return CreativeConfig.from_indices(*idx)


def update(policy: BanditPolicy, config: CreativeConfig, reward: FactoredReward) -> BanditPolicy:
    if not isinstance(reward, FactoredReward):
        raise ValidationError("reward must be a FactoredReward")
    for name in ("r_cs", "r_nm", "r_aa", "aggregate"):
        v = getattr(reward, name)
        if not 0 <= v <= 100:
            raise ValidationError(f"reward component {name}={v} outside [0, 100]")
    targets = reward.components if policy.mode is Mode.Factored else (reward.aggregate,) * 3
    for d, a, x in zip(DIMENSIONS, config.arms, targets):
        if a.dimension is not d:
            raise ValidationError(f"config arm {a.label} is not in {d.value}")
        s = policy.per_dimension[d][a.index]
        s.value = (s.value * s.pulls + x / 100.0) / (s.pulls + 1.0)
        s.pulls += 1.0
        policy.total_pulls[d] += 1.0
    policy.updates += 1
    return policy


def best_arm(policy: BanditPolicy, dimension: CreativeDimension) -> Arm:
    stats = policy.per_dimension[dimension]
    best, best_v = None, -math.inf
    for i, s in enumerate(stats):
        if s.pulls > 0 and s.value > best_v:
            best, best_v = i, s.value
    if best is None:
        raise NotDeterminedError(f"no arm of {dimension.value} has been pulled yet")
    return arm(dimension, best)
