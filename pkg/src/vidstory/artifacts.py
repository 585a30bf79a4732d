"""Pipeline data types and the content-addressed run store."""

from __future__ import annotations

import enum
import hashlib
import json
import os
from dataclasses import asdict, dataclass, field
from pathlib import Path, PurePosixPath

from .creative_space import AgentDirectives, CreativeConfig
from .errors import SchemaError, ValidationError

SIX_FIELDS = ("brand", "product", "gender", "age", "location", "interest")


@dataclass(frozen=True)
class StructuredConstraints:
    brand: str
    product: str
    gender: str
    age: str
    location: str
    interest: str

    def __post_init__(self):
        empty = [k for k in SIX_FIELDS if not isinstance(getattr(self, k), str) or not getattr(self, k).strip()]
        if empty:
            raise ValidationError(f"constraint fields must be non-empty: {', '.join(empty)}")

    def to_dict(self) -> dict[str, str]:
        return {k: getattr(self, k) for k in SIX_FIELDS}

    def to_prompt(self) -> str:
        return "\n".join(f"{k}: {getattr(self, k)}" for k in SIX_FIELDS)


class VisualRole(enum.Enum):
    Product = "Product"
    Logo = "Logo"
    Protagonist = "Protagonist"
    Prop = "Prop"
    Environment = "Environment"
    Other = "Other"


@dataclass(frozen=True)
class AnnotatedVisual:
    image_ref: str
    caption: str
    role: VisualRole

    def to_dict(self) -> dict:
        return {"image_ref": self.image_ref, "caption": self.caption, "role": self.role.value}

    @classmethod
    def from_dict(cls, d: dict) -> AnnotatedVisual:
        return cls(d["image_ref"], d["caption"], VisualRole(d["role"]))


@dataclass(frozen=True)
class ConditioningContext:
    constraints: StructuredConstraints
    visuals: tuple[AnnotatedVisual, ...]
    config: CreativeConfig

    def __post_init__(self):
        object.__setattr__(self, "visuals", tuple(self.visuals))
        if not isinstance(self.config, CreativeConfig):
            raise ValidationError("context config must be a CreativeConfig")


@dataclass(frozen=True)
class CreativeBrief:
    text: str
    cultural_notes: str = ""

    def __post_init__(self):
        if not self.text.strip():
            raise SchemaError("brief text is empty", field="text")


@dataclass(frozen=True)
class Storyline:
    logline: str
    scenes: tuple[str, ...]
    entities: tuple[str, ...]

    def __post_init__(self):
        object.__setattr__(self, "scenes", tuple(self.scenes))
        object.__setattr__(self, "entities", tuple(self.entities))
        if not self.scenes:
            raise SchemaError("storyline has no scenes", field="scenes")
        if not all(isinstance(s, str) and s.strip() for s in self.scenes):
            raise SchemaError("scenes must be non-empty strings", field="scenes")
        if not all(isinstance(e, str) and e.strip() for e in self.entities):
            raise SchemaError("entities must be non-empty strings", field="entities")

    def to_dict(self) -> dict:
        return {"logline": self.logline, "scenes": list(self.scenes), "entities": list(self.entities)}

    @classmethod
    def from_dict(cls, d: dict) -> Storyline:
        for k in ("logline", "scenes"):
            if k not in d:
                raise SchemaError("missing field", field=k)
        if not isinstance(d["scenes"], list):
            raise SchemaError("expected a list", field="scenes")
        return cls(str(d["logline"]), tuple(d["scenes"]), tuple(d.get("entities", [])))

    def render(self) -> str:
        return self.logline + "\n" + "\n".join(f"Scene {i + 1}: {s}" for i, s in enumerate(self.scenes))


class AssetKind(enum.Enum):
    Character = "Character"
    Prop = "Prop"
    Environment = "Environment"


@dataclass(frozen=True)
class VisualAsset:
    entity: str
    kind: AssetKind
    image_refs: tuple[str, ...]
    generated: bool
    caption: str = ""

    def to_dict(self) -> dict:
        return {"entity": self.entity, "kind": self.kind.value, "image_refs": list(self.image_refs),
                "generated": self.generated, "caption": self.caption}


@dataclass(frozen=True)
class Scene:
    index: int
    descriptors: str
    camera: str
    duration_s: float
    entity_flags: tuple[str, ...]

    def __post_init__(self):
        object.__setattr__(self, "entity_flags", tuple(self.entity_flags))
        if not self.duration_s > 0:
            raise SchemaError(f"scene {self.index} duration must be > 0", field="duration_s")


@dataclass(frozen=True)
class AudioDirectives:
    voiceover: str
    tempo: str
    mood: str


@dataclass(frozen=True)
class Storyboard:
    scenes: tuple[Scene, ...]
    audio_directives: AudioDirectives

    def __post_init__(self):
        object.__setattr__(self, "scenes", tuple(self.scenes))
        if [s.index for s in self.scenes] != list(range(len(self.scenes))):
            raise SchemaError("scene indices must be 0..N-1 in order", field="scenes")

    @property
    def runtime_s(self) -> float:
        return sum(s.duration_s for s in self.scenes)

    def to_dict(self) -> dict:
        return {
            "scenes": [
                {"index": s.index, "descriptors": s.descriptors, "camera": s.camera,
                 "duration_s": s.duration_s, "entity_flags": list(s.entity_flags)}
                for s in self.scenes
            ],
            "audio_directives": asdict(self.audio_directives),
        }

    @classmethod
    def from_dict(cls, d: dict) -> Storyboard:
        try:
            scenes = tuple(
                Scene(int(s["index"]), str(s["descriptors"]), str(s["camera"]), float(s["duration_s"]),
                      tuple(s.get("entity_flags", [])))
                for s in d["scenes"]
            )
            ad = d["audio_directives"]
            audio = AudioDirectives(str(ad.get("voiceover", "")), str(ad["tempo"]), str(ad["mood"]))
        except (KeyError, TypeError, ValueError) as exc:
            raise SchemaError(f"malformed storyboard: {exc}", field="storyboard") from None
        return cls(scenes, audio)


@dataclass(frozen=True)
class Keyframe:
    scene_index: int
    image_ref: str
    prompt: str


@dataclass(frozen=True)
class Clip:
    scene_index: int
    video_ref: str
    duration_s: float


@dataclass(frozen=True)
class AudioTrack:
    voiceover_ref: str | None
    music_ref: str
    mix_manifest: dict


@dataclass(frozen=True)
class FinalVideo:
    video_ref: str | None
    manifest_ref: str


@dataclass
class RunRecord:
    iteration: int
    config: CreativeConfig
    seed: int
    directives: AgentDirectives | None = None
    artifacts: dict = field(default_factory=dict)
    reward: object | None = None
    report: object | None = None
    error: str | None = None
    error_category: str | None = None

    @property
    def ok(self) -> bool:
        return self.error is None and self.report is not None

    @property
    def aggregate(self) -> float | None:
        return None if self.reward is None else self.reward.aggregate

    def to_dict(self) -> dict:
        return {
            "iteration": self.iteration,
            "seed": self.seed,
            "config": self.config.to_dict(),
            "directives": self.directives.to_dict() if self.directives else None,
            "artifacts": self.artifacts,
            "reward": self.reward.to_dict() if self.reward is not None else None,
            "report": self.report.to_dict() if self.report is not None else None,
            "error": self.error,
            "error_category": self.error_category,
        }


def sha256_hex(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


def dumps(obj) -> str:
    return json.dumps(obj, indent=2, ensure_ascii=False) + "\n"


class RunStore:
    """Content-addressed files under one run directory.

    Blob refs are POSIX paths relative to the run root whose file name is the
    SHA-256 of the content, e.g. ``iter-0/keyframes/3fa1....png``.
    """

    def __init__(self, root: str | Path):
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)

    def put(self, data: bytes, subdir: str, suffix: str = "bin") -> str:
        digest = sha256_hex(data)
        rel = PurePosixPath(subdir) / f"{digest}.{suffix.lstrip('.')}"
        path = self.root / rel
        if not path.exists():
            path.parent.mkdir(parents=True, exist_ok=True)
            tmp = path.with_suffix(path.suffix + f".tmp{os.getpid()}")
            tmp.write_bytes(data)
            tmp.replace(path)
        return str(rel)

    def import_file(self, path: str | Path) -> str:
        p = Path(path)
        if not p.is_file():
            raise ValidationError(f"reference image {p} does not exist")
        return self.put(p.read_bytes(), "inputs", p.suffix or "bin")

    def read(self, ref: str) -> bytes:
        path = self.root / ref
        if not path.is_file():
            raise ValidationError(f"blob {ref} does not exist in {self.root}")
        return path.read_bytes()

    def exists(self, ref: str) -> bool:
        return (self.root / ref).is_file()

    def digest(self, ref: str) -> str:
        """Content hash of a blob (the file name for content-addressed refs)."""
        return sha256_hex(self.read(ref))

    def write_json(self, rel: str, obj) -> str:
        path = self.root / rel
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(dumps(obj))
        return rel


def tree_digest(root: str | Path) -> str:
    """SHA-256 over every file's relative path and content, in sorted order."""
    root = Path(root)
    h = hashlib.sha256()
    for path in sorted(p for p in root.rglob("*") if p.is_file()):
        h.update(path.relative_to(root).as_posix().encode())
        h.update(b"\0")
        h.update(sha256_hex(path.read_bytes()).encode())
        h.update(b"\n")
    return h.hexdigest()
