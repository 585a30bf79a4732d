"""The factored creative action space and directive synthesis.

Three categorical dimensions (creative strategy, narrative mode, aesthetic
archetype) with 3, 3 and 4 arms. Arm indices are part of the persisted bandit
state, so the registry below is versioned and must only ever be appended to
under a new version.
"""

from __future__ import annotations

import enum
import itertools
import json
from dataclasses import dataclass
from math import prod
from typing import TYPE_CHECKING

from .errors import SchemaError, ValidationError
from .verifiers import extract_json_object

if TYPE_CHECKING:
    from .artifacts import ConditioningContext
    from .backends.base import Backend

REGISTRY_VERSION = 1


class CreativeDimension(enum.Enum):
    CreativeStrategy = "CreativeStrategy"
    NarrativeMode = "NarrativeMode"
    AestheticArchetype = "AestheticArchetype"

    @property
    def key(self) -> str:
        """snake_case name used in judge documents and prior documents."""
        return _KEYS[self]

    @classmethod
    def from_key(cls, key: str) -> CreativeDimension:
        for dim, k in _KEYS.items():
            if k == key or dim.value == key:
                return dim
        raise ValidationError(f"unknown creative dimension {key!r}")


_KEYS = {
    CreativeDimension.CreativeStrategy: "creative_strategy",
    CreativeDimension.NarrativeMode: "narrative_mode",
    CreativeDimension.AestheticArchetype: "aesthetic_archetype",
}

DIMENSIONS: tuple[CreativeDimension, ...] = tuple(CreativeDimension)


@dataclass(frozen=True)
class Arm:
    dimension: CreativeDimension
    index: int
    label: str
    description: str

    def __post_init__(self):
        n = len(_ARMS[self.dimension])
        if not 0 <= self.index < n:
            raise ValidationError(f"arm index {self.index} out of range for {self.dimension.value} ({n} arms)")


_ARMS: dict[CreativeDimension, tuple[tuple[str, str], ...]] = {
    CreativeDimension.CreativeStrategy: (
        ("Informational", "sell on function: concrete facts, features and practical benefits"),
        ("Transformational", "sell on feeling: the lifestyle, identity and emotional state the product unlocks"),
        ("Comparative", "sell on contrast: position the product against a familiar standard or rival"),
    ),
    CreativeDimension.NarrativeMode: (
        ("Analytical", "argument-led delivery, a sequence of claims with no story arc"),
        ("Vignette", "loosely linked slices of everyday life carried by mood rather than plot"),
        ("NarrativeDrama", "a protagonist moves through conflict to resolution"),
    ),
    CreativeDimension.AestheticArchetype: (
        ("ClarityEnergy", "bright high-key light, quick cuts, up-tempo score"),
        ("CinematicPremium", "chiaroscuro light, slow deliberate camera, orchestral score"),
        ("MinimalistFocus", "clean bright backdrops, macro detail, subtle motion, close foley"),
        ("KineticGrit", "low-key light, handheld or drone motion, electronic synth score"),
    ),
}


def enumerate_arms(dimension: CreativeDimension) -> list[Arm]:
    dimension = CreativeDimension(dimension)
    return [Arm(dimension, i, label, desc) for i, (label, desc) in enumerate(_ARMS[dimension])]


def arm_counts() -> tuple[int, ...]:
    return tuple(len(_ARMS[d]) for d in DIMENSIONS)


def config_space_size(counts: tuple[int, ...] | None = None) -> int:
    return prod(arm_counts() if counts is None else counts)


def arm(dimension: CreativeDimension, key: int | str) -> Arm:
    """Look an arm up by index or label."""
    arms = enumerate_arms(dimension)
    if isinstance(key, int):
        if not 0 <= key < len(arms):
            raise ValidationError(f"arm index {key} out of range for {dimension.value}")
        return arms[key]
    for a in arms:
        if a.label == key:
            return a
    raise ValidationError(f"unknown arm {key!r} for {dimension.value}")


@dataclass(frozen=True)
class CreativeConfig:
    cs: Arm
    nm: Arm
    aa: Arm

    def __post_init__(self):
        for arm_, dim, name in zip(self.arms, DIMENSIONS, ("cs", "nm", "aa")):
            if not isinstance(arm_, Arm) or arm_.dimension is not dim:
                raise ValidationError(f"field {name} must be an arm of {dim.value}, got {arm_!r}")

    @property
    def arms(self) -> tuple[Arm, Arm, Arm]:
        return (self.cs, self.nm, self.aa)

    @property
    def indices(self) -> tuple[int, int, int]:
        return tuple(a.index for a in self.arms)

    @property
    def labels(self) -> tuple[str, str, str]:
        return tuple(a.label for a in self.arms)

    @classmethod
    def from_indices(cls, cs: int, nm: int, aa: int) -> CreativeConfig:
        return cls(*(arm(d, int(i)) for d, i in zip(DIMENSIONS, (cs, nm, aa))))

    @classmethod
    def from_labels(cls, cs: str, nm: str, aa: str) -> CreativeConfig:
        return cls(*(arm(d, lab) for d, lab in zip(DIMENSIONS, (cs, nm, aa))))

    def to_dict(self) -> dict:
        return {d.key: a.label for d, a in zip(DIMENSIONS, self.arms)}

    @classmethod
    def from_dict(cls, data: dict) -> CreativeConfig:
        return cls.from_labels(*(data[d.key] for d in DIMENSIONS))

    def __str__(self) -> str:
        return " / ".join(self.labels)


def all_configs() -> list[CreativeConfig]:
    return [
        CreativeConfig.from_indices(*idx)
        for idx in itertools.product(*(range(n) for n in arm_counts()))
    ]


@dataclass(frozen=True)
class AgentDirectives:
    storyline_directive: str
    keyframe_directive: str
    video_directive: str

    def __post_init__(self):
        for name in ("storyline_directive", "keyframe_directive", "video_directive"):
            value = getattr(self, name)
            if not isinstance(value, str) or not value.strip():
                raise SchemaError("must be a non-empty string", field=name)

    def to_dict(self) -> dict:
        return {
            "storyline_directive": self.storyline_directive,
            "keyframe_directive": self.keyframe_directive,
            "video_directive": self.video_directive,
        }

    @classmethod
    def from_dict(cls, data: dict) -> AgentDirectives:
        missing = [k for k in ("storyline_directive", "keyframe_directive", "video_directive") if k not in data]
        if missing:
            raise SchemaError("missing directive", field=missing[0])
        return cls(data["storyline_directive"], data["keyframe_directive"], data["video_directive"])


# Fixed template the simulation backend expands; kept here so tests can
# reproduce the expansion independently of the backend.
DIRECTIVE_TEMPLATE = {
    "storyline_directive": (
        "Write the storyline with a {cs} creative strategy ({cs_desc}), delivered in {nm} "
        "narrative mode ({nm_desc}). Brand {brand}, product {product}; audience: {gender}, "
        "aged {age}, in {location}, interested in {interest}."
    ),
    "keyframe_directive": (
        "Render keyframes in the {aa} aesthetic ({aa_desc}) so the {cs} message about {product} "
        "reads instantly. Cast and dress people as {gender}, aged {age}; ground every set in {location}."
    ),
    "video_directive": (
        "Animate each keyframe in the {aa} aesthetic ({aa_desc}), pacing the cut for {nm} "
        "narrative mode and a {cs} pitch of {product} by {brand} to {interest} audiences in {location}."
    ),
}


def template_fields(config: CreativeConfig, constraints) -> dict[str, str]:
    return {
        "cs": config.cs.label,
        "nm": config.nm.label,
        "aa": config.aa.label,
        "cs_desc": config.cs.description,
        "nm_desc": config.nm.description,
        "aa_desc": config.aa.description,
        **constraints.to_dict(),
    }


def expand_directive_template(config: CreativeConfig, constraints) -> AgentDirectives:
    fields = template_fields(config, constraints)
    return AgentDirectives(**{k: t.format(**fields) for k, t in DIRECTIVE_TEMPLATE.items()})


def synthesize_directions(
    config: CreativeConfig, context: ConditioningContext, backend: Backend
) -> AgentDirectives:
    """One backend round-trip that turns an arm triple into three agent directives.

    The backend returns a single JSON document with ``storyline_directive``,
    ``keyframe_directive`` and ``video_directive``; a malformed document is
    re-asked once before a :class:`SchemaError` propagates.
    """
    from .backends.base import Capability, CapabilityRequest
    from .prompts import render

    if config != context.config:
        raise ValidationError("config does not match the conditioning context")
    prompt = render(
        "directives",
        arms=json.dumps(
            {d.key: {"label": a.label, "description": a.description} for d, a in zip(DIMENSIONS, config.arms)},
            indent=2,
        ),
        constraints=json.dumps(context.constraints.to_dict(), indent=2),
        visuals=json.dumps([v.to_dict() for v in context.visuals], indent=2),
    )
    request = CapabilityRequest(
        Capability.Text,
        prompt,
        params={"task": "directives", "payload": json.dumps({
            "config": config.to_dict(), "constraints": context.constraints.to_dict(),
        }, sort_keys=True)},
    )
    from .backends.base import invoke_structured

    return invoke_structured(backend, request, lambda doc: AgentDirectives.from_dict(extract_json_object(doc)))
