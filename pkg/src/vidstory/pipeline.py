"""The staged production pipeline and the outer bandit loop.

One iteration: select arms -> synthesize directives -> brief -> storyline
(refined) -> visual assets -> storyboard -> keyframes (refined) -> clips and
audio -> edit-decision manifest (optionally muxed) -> final-video judge ->
bandit update. Iterations are strictly sequential; scene-level keyframe and
clip generation fan out over a thread pool.
"""

from __future__ import annotations

import json
import logging
import shlex
import subprocess
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path, PurePosixPath
from typing import Sequence

from . import bandit
from .artifacts import (
    AnnotatedVisual,
    AssetKind,
    AudioTrack,
    Clip,
    ConditioningContext,
    CreativeBrief,
    FinalVideo,
    Keyframe,
    RunRecord,
    RunStore,
    Storyboard,
    Storyline,
    StructuredConstraints,
    SIX_FIELDS,
    VisualAsset,
    VisualRole,
)
from .backends.base import Attachment, Backend, Backends, Capability, CapabilityRequest, invoke_structured
from .creative_space import DIMENSIONS, AgentDirectives, CreativeConfig, enumerate_arms, synthesize_directions
from .errors import AssemblyError, IngestionError, SchemaError, StageError, ValidationError, VidstoryError
from .prompts import render
from .refinement import RefinementConfig, refine_keyframes, refine_storyline
from .verifiers import VerifierReport, extract_json_object, extract_reward, parse_video_report

log = logging.getLogger(__name__)

DURATION_TOLERANCE_S = 0.25


@dataclass(frozen=True)
class PipelineSettings:
    iterations: int = 4
    scene_count: int = 4
    runtime_s: float = 12.0
    storyline: RefinementConfig = field(default_factory=RefinementConfig)
    keyframes: RefinementConfig = field(default_factory=RefinementConfig)
    warm_start: bool = True
    prior_weight: float = bandit.DEFAULT_PRIOR_WEIGHT
    scene_jobs: int = 4
    muxer: str | None = None
    storyline_refinement: bool = True
    keyframe_refinement: bool = True

    def __post_init__(self):
        if self.iterations < 1:
            raise ValidationError("T must be >= 1")
        if self.scene_count < 1:
            raise ValidationError("scene count must be >= 1")
        if self.runtime_s <= 0:
            raise ValidationError("runtime must be > 0")


# --- ingestion -------------------------------------------------------------

def ingest(user_prompt: str, images: Sequence[str | Path], backend: Backend, store: RunStore
           ) -> tuple[StructuredConstraints, list[AnnotatedVisual]]:
    if not user_prompt or not user_prompt.strip():
        raise ValidationError("user prompt is empty")
    req = CapabilityRequest(Capability.Text, render("ingest", user_prompt=user_prompt),
                            params={"task": "ingest", "payload": json.dumps({"user_prompt": user_prompt})})
    fields = invoke_structured(backend, req, extract_json_object)
    missing = [k for k in SIX_FIELDS if not str(fields.get(k, "")).strip()]
    if missing:
        raise IngestionError(missing)
    constraints = StructuredConstraints(**{k: str(fields[k]).strip() for k in SIX_FIELDS})
    visuals = [annotate(img, backend, store) for img in images]
    return constraints, visuals


def annotate(image: str | Path, backend: Backend, store: RunStore, hint: str = "") -> AnnotatedVisual:
    path = Path(image)
    ref = store.import_file(path) if path.is_file() else str(image)
    data = store.read(ref)
    req = CapabilityRequest(
        Capability.Text, render("annotate", filename=path.name),
        attachments=(Attachment(ref, data, "image/png"),),
        params={"task": "annotate", "payload": json.dumps({"filename": path.name, "hint": hint})},
    )

    def parse(doc: str) -> AnnotatedVisual:
        d = extract_json_object(doc)
        try:
            role = VisualRole(d.get("role", "Other"))
        except ValueError:
            raise SchemaError(f"unknown role {d.get('role')!r}", field="role") from None
        if not isinstance(d.get("caption"), str):
            raise SchemaError("missing caption", field="caption")
        return AnnotatedVisual(ref, d["caption"], role)

    return invoke_structured(backend, req, parse)


# --- pre-production --------------------------------------------------------

def make_brief(ctx: ConditioningContext, backend: Backend) -> CreativeBrief:
    req = CapabilityRequest(
        Capability.Text, render("brief", constraints=ctx.constraints.to_prompt()),
        params={"task": "brief", "payload": json.dumps(
            {"constraints": ctx.constraints.to_dict(), "config": ctx.config.to_dict()}, sort_keys=True)},
    )

    def parse(doc):
        d = extract_json_object(doc)
        if not isinstance(d.get("text"), str):
            raise SchemaError("missing text", field="text")
        return CreativeBrief(d["text"], str(d.get("cultural_notes", "")))

    return invoke_structured(backend, req, parse)


_CHARACTER_WORDS = ("protagonist", "character", "person", "woman", "man", "girl", "boy", "driver", "editor",
                    "friend", "customer", "hero", "mother", "father", "child", "team")
_ENVIRONMENT_WORDS = ("setting", "environment", "studio", "street", "room", "office", "kitchen", "park", "city",
                      "home", "garage", "location")


def _asset_kind(entity: str, visual: AnnotatedVisual | None) -> AssetKind:
    if visual is not None:
        if visual.role is VisualRole.Protagonist:
            return AssetKind.Character
        if visual.role is VisualRole.Environment:
            return AssetKind.Environment
        return AssetKind.Prop
    low = entity.lower()
    if any(w in low for w in _CHARACTER_WORDS):
        return AssetKind.Character
    if any(w in low for w in _ENVIRONMENT_WORDS):
        return AssetKind.Environment
    return AssetKind.Prop


def match_visual(entity: str, visuals: Sequence[AnnotatedVisual]) -> AnnotatedVisual | None:
    """Case-insensitive substring match of the entity against captions and role names."""
    low = entity.lower()
    for v in visuals:
        if low in v.caption.lower() or (v.role is not VisualRole.Other and v.role.value.lower() in low):
            return v
    return None


def resolve_assets(storyline: Storyline, ctx: ConditioningContext, backend: Backend, store: RunStore,
                   subdir: str = "assets") -> list[VisualAsset]:
    """One asset per storyline entity: a matching reference visual, else a generated sheet."""
    assets = []
    for entity in storyline.entities:
        visual = match_visual(entity, ctx.visuals)
        kind = _asset_kind(entity, visual)
        if visual is not None:
            if visual.role in (VisualRole.Logo, VisualRole.Product) and kind is AssetKind.Character:
                log.warning("entity %r matched a %s reference; trusting the annotation", entity, visual.role.value)
            assets.append(VisualAsset(entity, kind, (visual.image_ref,), False, visual.caption))
            continue
        prompt = render("asset", entity=entity, kind=kind.value.lower(), context=storyline.logline)
        resp = backend.invoke(CapabilityRequest(Capability.Image, prompt, params={"task": "asset"}))
        if resp.blob is None:
            raise SchemaError(f"image backend returned no blob for asset {entity!r}", field="blob")
        ref = store.put(resp.blob, subdir, "png")
        assets.append(VisualAsset(entity, kind, (ref,), True, f"generated {kind.value.lower()} sheet: {entity}"))
    return assets


def make_storyboard(storyline: Storyline, config: CreativeConfig, directives: AgentDirectives, backend: Backend,
                    constraints: StructuredConstraints, scene_count: int = 4, runtime_s: float = 12.0) -> Storyboard:
    req = CapabilityRequest(
        Capability.Text,
        render("storyboard", directive=directives.storyline_directive, storyline=storyline.render(),
               scene_count=scene_count, runtime_s=runtime_s, entities=", ".join(storyline.entities)),
        params={"task": "storyboard", "payload": json.dumps({
            "storyline": storyline.to_dict(), "config": config.to_dict(), "constraints": constraints.to_dict(),
            "scene_count": scene_count, "runtime_s": runtime_s}, sort_keys=True)},
    )

    def parse(doc: str) -> Storyboard:
        board = Storyboard.from_dict(extract_json_object(doc))
        if len(board.scenes) != scene_count:
            raise SchemaError(f"expected {scene_count} scenes, got {len(board.scenes)}", field="scenes")
        if abs(board.runtime_s - runtime_s) > DURATION_TOLERANCE_S:
            raise SchemaError(f"durations sum to {board.runtime_s:g}s, expected {runtime_s:g}s", field="duration_s")
        known = set(storyline.entities)
        for s in board.scenes:
            unknown = [e for e in s.entity_flags if e not in known]
            if unknown:
                raise SchemaError(f"scene {s.index} flags undeclared entities {unknown}", field="entity_flags")
        return board

    return invoke_structured(backend, req, parse)


# --- production --------------------------------------------------------------

def _asset_lines(scene, assets: Sequence[VisualAsset]) -> str:
    by_entity = {a.entity: a for a in assets}
    lines = [f"- {e}: {by_entity[e].caption}" for e in scene.entity_flags if e in by_entity]
    return "\n".join(lines) or "- none"


def _asset_attachments(scene, assets: Sequence[VisualAsset], store: RunStore) -> tuple[Attachment, ...]:
    by_entity = {a.entity: a for a in assets}
    out = []
    for e in scene.entity_flags:
        for ref in by_entity[e].image_refs if e in by_entity else ():
            out.append(Attachment(ref, store.read(ref), "image/png"))
    return tuple(out)


def keyframe_prompt(scene, assets: Sequence[VisualAsset], directives: AgentDirectives, revision: str = "") -> str:
    return render("keyframe", directive=directives.keyframe_directive, index=scene.index,
                  descriptors=scene.descriptors, camera=scene.camera,
                  references=_asset_lines(scene, assets), revision=revision)


def _gen_keyframe(scene, prompt, assets, backend, store, subdir, rnd=0) -> Keyframe:
    try:
        resp = backend.invoke(CapabilityRequest(
            Capability.Image, prompt, attachments=_asset_attachments(scene, assets, store),
            params={"task": "keyframe", "scene": str(scene.index), "round": str(rnd)}))
        if resp.blob is None:
            raise SchemaError("image backend returned no blob", field="blob")
    except VidstoryError as exc:
        raise StageError("keyframes", exc, scene.index) from exc
    return Keyframe(scene.index, store.put(resp.blob, subdir, "png"), prompt)


def gen_keyframes(board: Storyboard, assets: Sequence[VisualAsset], config: CreativeConfig,
                  directives: AgentDirectives, backend: Backend, store: RunStore,
                  subdir: str = "keyframes", jobs: int = 4) -> list[Keyframe]:
    def one(scene):
        return _gen_keyframe(scene, keyframe_prompt(scene, assets, directives), assets, backend, store, subdir)

    with ThreadPoolExecutor(max_workers=max(1, jobs)) as pool:
        return list(pool.map(one, board.scenes))


def gen_clips(board: Storyboard, keyframes: Sequence[Keyframe], config: CreativeConfig,
              directives: AgentDirectives, backend: Backend, store: RunStore,
              subdir: str = "clips", jobs: int = 4) -> list[Clip]:
    by_scene = {k.scene_index: k for k in keyframes}
    missing = [s.index for s in board.scenes if s.index not in by_scene]
    if missing:
        raise ValidationError(f"no keyframe for scene(s) {missing}")

    def one(scene):
        kf = by_scene[scene.index]
        prompt = render("clip", directive=directives.video_directive, index=scene.index,
                        duration_s=scene.duration_s, descriptors=scene.descriptors, camera=scene.camera)
        try:
            resp = backend.invoke(CapabilityRequest(
                Capability.Video, prompt, attachments=(Attachment(kf.image_ref, store.read(kf.image_ref), "image/png"),),
                params={"task": "clip", "scene": str(scene.index), "duration_s": f"{scene.duration_s:g}"}))
            if resp.blob is None:
                raise SchemaError("video backend returned no blob", field="blob")
        except VidstoryError as exc:
            raise StageError("clips", exc, scene.index) from exc
        duration = scene.duration_s
        if resp.text:
            try:
                duration = float(extract_json_object(resp.text).get("duration_s", duration))
            except SchemaError:
                pass
        if abs(duration - scene.duration_s) > DURATION_TOLERANCE_S:
            raise StageError("clips", SchemaError(
                f"clip is {duration:g}s, scene wants {scene.duration_s:g}s", field="duration_s"), scene.index)
        return Clip(scene.index, store.put(resp.blob, subdir, "mp4"), duration)

    with ThreadPoolExecutor(max_workers=max(1, jobs)) as pool:
        return list(pool.map(one, board.scenes))


def gen_audio(board: Storyboard, config: CreativeConfig, constraints: StructuredConstraints,
              backend_tts: Backend, backend_music: Backend, store: RunStore, subdir: str = "audio") -> AudioTrack:
    """Global voiceover plus music bed, and the mix manifest laying both over the runtime."""
    ad = board.audio_directives
    runtime = board.runtime_s
    voice_ref = None
    if ad.voiceover.strip():
        try:
            resp = backend_tts.invoke(CapabilityRequest(
                Capability.Speech,
                render("voiceover", gender=constraints.gender, age=constraints.age, mood=ad.mood, voiceover=ad.voiceover),
                params={"task": "voiceover", "gender": constraints.gender, "age": constraints.age}))
            if resp.blob is None:
                raise SchemaError("speech backend returned no blob", field="blob")
        except VidstoryError as exc:
            raise StageError("audio.voiceover", exc) from exc
        voice_ref = store.put(resp.blob, subdir, "wav")
    try:
        resp = backend_music.invoke(CapabilityRequest(
            Capability.Music,
            render("music", tempo=ad.tempo, mood=ad.mood, runtime_s=runtime, aesthetic=config.aa.description),
            params={"task": "music", "duration_s": f"{runtime:g}"}))
        if resp.blob is None:
            raise SchemaError("music backend returned no blob", field="blob")
    except VidstoryError as exc:
        raise StageError("audio.music", exc) from exc
    music_ref = store.put(resp.blob, subdir, "wav")
    tracks = [{"kind": "music", "ref": music_ref, "start_s": 0.0, "end_s": runtime,
               "gain_db": -12.0 if voice_ref else 0.0}]
    if voice_ref:
        tracks.append({"kind": "voiceover", "ref": voice_ref, "start_s": 0.0, "end_s": runtime, "gain_db": 0.0})
    mix = {"total_s": runtime, "voiceover_present": voice_ref is not None, "tempo": ad.tempo, "mood": ad.mood,
           "tracks": tracks}
    return AudioTrack(voice_ref, music_ref, mix)


# --- post-production -------------------------------------------------------

def edit_decision_list(board: Storyboard, clips: Sequence[Clip], audio: AudioTrack) -> dict:
    by_scene = {c.scene_index: c for c in clips}
    if sorted(by_scene) != [s.index for s in board.scenes] or len(clips) != len(board.scenes):
        raise AssemblyError("clips do not cover every scene exactly once")
    timeline = []
    t = 0.0
    for scene in board.scenes:
        clip = by_scene[scene.index]
        timeline.append({"scene_index": scene.index, "clip_ref": clip.video_ref, "in_s": 0.0,
                         "out_s": clip.duration_s, "timeline_start_s": t, "timeline_end_s": t + clip.duration_s})
        t += clip.duration_s
    return {"version": 1, "total_s": t, "timeline": timeline,
            "audio": {"voiceover_ref": audio.voiceover_ref, "music_ref": audio.music_ref, "mix": audio.mix_manifest}}


def assemble(board: Storyboard, clips: Sequence[Clip], audio: AudioTrack, store: RunStore,
             subdir: str = ".", muxer: str | None = None) -> FinalVideo:
    """Write the edit-decision manifest and, if a muxer is configured, render the video.

    The muxer is a command template with ``{manifest}``, ``{output}`` and
    ``{root}`` placeholders; it must exit 0 and create ``{output}``.
    """
    if audio is None:
        raise AssemblyError("no audio track")
    edl = edit_decision_list(board, clips, audio)
    manifest_ref = str(PurePosixPath(subdir) / "manifest.json")
    store.write_json(manifest_ref, edl)
    if not muxer:
        return FinalVideo(None, manifest_ref)
    out_path = store.root / PurePosixPath(subdir) / "final.render.mp4"
    argv = [part.format(manifest=str(store.root / manifest_ref), output=str(out_path), root=str(store.root))
            for part in shlex.split(muxer)]
    try:
        proc = subprocess.run(argv, capture_output=True, text=True, cwd=store.root)
    except OSError as exc:
        raise AssemblyError(f"could not start muxer: {exc}") from exc
    if proc.returncode != 0:
        raise AssemblyError(f"muxer exited with status {proc.returncode}", proc.returncode, proc.stderr[-2000:])
    if not out_path.is_file():
        raise AssemblyError("muxer succeeded but wrote no output", 0, proc.stderr[-2000:])
    data = out_path.read_bytes()
    out_path.unlink()
    return FinalVideo(store.put(data, str(PurePosixPath(subdir) / "final"), "mp4"), manifest_ref)


# --- judging and priors -------------------------------------------------------

def judge_video(final: FinalVideo, clips: Sequence[Clip], audio: AudioTrack, ctx: ConditioningContext,
                board: Storyboard, backend: Backend, store: RunStore, iteration: int) -> VerifierReport:
    if final.video_ref:
        attachments = [Attachment(final.video_ref, store.read(final.video_ref), "video/mp4")]
    else:
        attachments = [Attachment(c.video_ref, store.read(c.video_ref), "video/mp4") for c in clips]
        for ref in (audio.voiceover_ref, audio.music_ref):
            if ref:
                attachments.append(Attachment(ref, store.read(ref), "audio/wav"))
    definitions = {d.key: {a.label: a.description for a in enumerate_arms(d)} for d in DIMENSIONS}
    req = CapabilityRequest(
        Capability.Judge,
        render("video_judge", constraints=ctx.constraints.to_prompt(),
               visuals=json.dumps([v.to_dict() for v in ctx.visuals], indent=2),
               config=json.dumps(ctx.config.to_dict(), indent=2), definitions=json.dumps(definitions, indent=2),
               storyboard=json.dumps(board.to_dict(), indent=2)),
        attachments=tuple(attachments),
        params={"task": "video", "payload": json.dumps({"config": ctx.config.to_dict(), "iteration": iteration},
                                                       sort_keys=True)},
    )
    return invoke_structured(backend, req, parse_video_report)


def request_priors(constraints: StructuredConstraints, backend: Backend, weight: float = bandit.DEFAULT_PRIOR_WEIGHT
                   ) -> list[bandit.WarmStartPrior]:
    arms = {d.key: [f"{a.label}: {a.description}" for a in enumerate_arms(d)] for d in DIMENSIONS}
    req = CapabilityRequest(
        Capability.Text, render("warm_start", constraints=constraints.to_prompt(), arms=json.dumps(arms, indent=2)),
        params={"task": "warm_start", "payload": json.dumps({"constraints": constraints.to_dict()}, sort_keys=True)},
    )

    def parse(doc: str) -> list[bandit.WarmStartPrior]:
        d = extract_json_object(doc)
        priors = []
        for dim in DIMENSIONS:
            block = d.get(dim.key, {})
            if not isinstance(block, dict):
                raise SchemaError("expected an object of label -> score", field=dim.key)
            labels = {a.label: a.index for a in enumerate_arms(dim)}
            for label, score in block.items():
                if label not in labels:
                    raise SchemaError(f"unknown arm {label!r}", field=dim.key)
                try:
                    priors.append(bandit.WarmStartPrior(dim, labels[label], float(score), weight))
                except (TypeError, ValueError) as exc:
                    raise SchemaError(str(exc), field=f"{dim.key}.{label}") from None
        return priors

    return invoke_structured(backend, req, parse)


# --- structural checks -------------------------------------------------------

def check_record(record: RunRecord, store: RunStore, runtime_s: float) -> None:
    """Raise :class:`ValidationError` unless the record's artifact graph is sound."""
    art = record.artifacts
    if "storyboard" in art and "storyline_trace" not in art:
        raise ValidationError("storyboard exists without a storyline refinement trace")
    board = Storyboard.from_dict(json.loads((store.root / art["storyboard"]).read_text()))
    assets = json.loads((store.root / art["assets"]).read_text())
    owners: dict[str, int] = {}
    for a in assets:
        owners[a["entity"]] = owners.get(a["entity"], 0) + 1
        for ref in a["image_refs"]:
            if not store.exists(ref):
                raise ValidationError(f"asset blob {ref} missing")
    for scene in board.scenes:
        for e in scene.entity_flags:
            if owners.get(e) != 1:
                raise ValidationError(f"scene {scene.index} entity {e!r} resolves to {owners.get(e, 0)} assets")
    kf = {k["scene_index"] for k in art["keyframes"]}
    clips = art["clips"]
    if sorted(c["scene_index"] for c in clips) != [s.index for s in board.scenes]:
        raise ValidationError("clip set does not match scenes")
    if not all(c["scene_index"] in kf for c in clips):
        raise ValidationError("clip without a keyframe")
    for c in clips:
        scene = board.scenes[c["scene_index"]]
        if abs(c["duration_s"] - scene.duration_s) > DURATION_TOLERANCE_S:
            raise ValidationError(f"clip {c['scene_index']} duration mismatch")
    manifest = json.loads((store.root / art["manifest"]).read_text())
    total_clips = sum(c["duration_s"] for c in clips)
    for label, value in (("clips", total_clips), ("manifest", manifest["total_s"]),
                         ("mix", manifest["audio"]["mix"]["total_s"])):
        if abs(value - runtime_s) > DURATION_TOLERANCE_S:
            raise ValidationError(f"{label} total {value:g}s differs from runtime {runtime_s:g}s")


# --- the loop ----------------------------------------------------------------

@dataclass
class ScenarioInputs:
    user_prompt: str
    images: list[str | Path] = field(default_factory=list)
    image_hints: list[str] = field(default_factory=list)


def _iteration(t: int, config: CreativeConfig, constraints, visuals, backends: Backends, store: RunStore,
               settings: PipelineSettings, record: RunRecord) -> None:
    it = f"iter-{t}"
    art = record.artifacts
    ctx = ConditioningContext(constraints, tuple(visuals), config)

    directives = synthesize_directions(config, ctx, backends.text)
    record.directives = directives
    art["directives"] = store.write_json(f"{it}/directives.json", directives.to_dict())

    brief = make_brief(ctx, backends.text)
    art["brief"] = store.write_json(f"{it}/brief.json", {"text": brief.text, "cultural_notes": brief.cultural_notes})

    s_cfg = settings.storyline if settings.storyline_refinement else replace(settings.storyline, threshold=0.0)
    storyline, s_trace = refine_storyline(brief, directives, ctx, backends, s_cfg,
                                          settings.scene_count, settings.runtime_s)
    art["storyline_trace"] = store.write_json(f"{it}/storyline_trace.json", s_trace.to_dict())
    art["storyline"] = store.write_json(f"{it}/storyline.json", storyline.to_dict())

    assets = resolve_assets(storyline, ctx, backends.image, store, f"{it}/assets")
    art["assets"] = store.write_json(f"{it}/assets.json", [a.to_dict() for a in assets])

    board = make_storyboard(storyline, config, directives, backends.text, constraints,
                            settings.scene_count, settings.runtime_s)
    art["storyboard"] = store.write_json(f"{it}/storyboard.json", board.to_dict())

    keyframes = gen_keyframes(board, assets, config, directives, backends.image, store,
                              f"{it}/keyframes", settings.scene_jobs)
    if settings.keyframe_refinement:
        refs = [Attachment(v.image_ref, store.read(v.image_ref), "image/png") for v in visuals]

        def regenerate(k: Keyframe, prompt: str, rnd: int) -> Keyframe:
            scene = board.scenes[k.scene_index]
            return _gen_keyframe(scene, prompt, assets, backends.image, store, f"{it}/keyframes", rnd)

        keyframes, k_trace = refine_keyframes(keyframes, refs, lambda k: store.read(k.image_ref), regenerate,
                                              constraints.to_prompt(), backends, settings.keyframes)
        art["keyframe_trace"] = store.write_json(f"{it}/keyframe_trace.json", k_trace.to_dict())
    art["keyframes"] = [{"scene_index": k.scene_index, "image_ref": k.image_ref} for k in keyframes]

    with ThreadPoolExecutor(max_workers=2) as pool:
        audio_f = pool.submit(gen_audio, board, config, constraints, backends.speech, backends.music, store, f"{it}/audio")
        clips = gen_clips(board, keyframes, config, directives, backends.video, store, f"{it}/clips",
                          settings.scene_jobs)
        audio = audio_f.result()
    art["clips"] = [{"scene_index": c.scene_index, "video_ref": c.video_ref, "duration_s": c.duration_s} for c in clips]
    art["audio"] = {"voiceover_ref": audio.voiceover_ref, "music_ref": audio.music_ref}

    final = assemble(board, clips, audio, store, it, settings.muxer)
    art["manifest"] = final.manifest_ref
    art["video"] = final.video_ref

    report = judge_video(final, clips, audio, ctx, board, backends.judge, store, t)
    store.write_json(f"{it}/report.json", report.to_dict())
    art["report"] = f"{it}/report.json"
    record.report = report
    record.reward = extract_reward(report)


def select_best(records: Sequence[RunRecord]) -> RunRecord | None:
    """Highest aggregate among judged iterations; earliest wins ties."""
    best = None
    for r in records:
        if r.ok and (best is None or r.aggregate > best.aggregate):
            best = r
    return best


def run(inputs: ScenarioInputs, policy: bandit.BanditPolicy, backends: Backends, store: RunStore,
        settings: PipelineSettings = PipelineSettings(), seed: int = 0
        ) -> tuple[RunRecord | None, list[RunRecord]]:
    """Run ``settings.iterations`` bandit-steered pipeline executions.

    An iteration that raises a :class:`VidstoryError` is recorded with its
    error and leaves the policy untouched.
    """
    constraints, visuals = ingest(inputs.user_prompt, inputs.images, backends.text, store)
    store.write_json("context.json", {"constraints": constraints.to_dict(),
                                      "visuals": [v.to_dict() for v in visuals], "seed": seed})
    if settings.warm_start and policy.updates == 0:
        priors = request_priors(constraints, backends.text, settings.prior_weight)
        bandit.warm_start(policy, priors)
        store.write_json("priors.json", [
            {"dimension": p.dimension.value, "index": p.index, "prior_value": p.prior_value,
             "prior_weight": p.prior_weight} for p in priors])
    policy.save(store.root / "policy.json")

    records: list[RunRecord] = []
    for t in range(settings.iterations):
        config = bandit.select(policy)
        record = RunRecord(iteration=t, config=config, seed=seed)
        try:
            _iteration(t, config, constraints, visuals, backends, store, settings, record)
        except VidstoryError as exc:
            log.error("iteration %d failed: %s", t, exc)
            record.error = str(exc)
            record.error_category = exc.category
            record.report = None
            record.reward = None
        else:
            bandit.update(policy, config, record.reward)
            policy.save(store.root / "policy.json")
        store.write_json(f"iter-{t}/record.json", record.to_dict())
        records.append(record)

    best = select_best(records)
    store.write_json("summary.json", {
        "best_iteration": best.iteration if best else None,
        "best_config": best.config.to_dict() if best else None,
        "best_aggregate": best.aggregate if best else None,
        "iterations": [{"iteration": r.iteration, "config": r.config.to_dict(), "aggregate": r.aggregate,
                        "error": r.error} for r in records],
    })
    return best, records
