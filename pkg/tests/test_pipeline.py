import json
import sys

import pytest

from vidstory import bandit
from vidstory.artifacts import AudioDirectives, RunStore, Scene, Storyboard, Storyline, StructuredConstraints, tree_digest
from vidstory.backends import Backends, BackendResponse, Capability, SimBackend
from vidstory.creative_space import CreativeConfig, expand_directive_template
from vidstory.errors import AssemblyError, IngestionError, SchemaError, TransportError
from vidstory.pipeline import (
    PipelineSettings,
    ScenarioInputs,
    check_record,
    gen_audio,
    ingest,
    make_storyboard,
    match_visual,
    run,
    select_best,
)


def _run(tmp_path, name, seed=3, settings=PipelineSettings(), backends=None, images=(), env=None, prompt=None):
    from conftest import PROMPT

    store = RunStore(tmp_path / name)
    b = backends or Backends.uniform(SimBackend(seed=seed, env=env))
    policy = bandit.new_policy()
    best, records = run(ScenarioInputs(prompt or PROMPT, list(images)), policy, b, store, settings, seed)
    return store, best, records, policy


def test_run_is_deterministic(tmp_path, env):
    a = _run(tmp_path, "a", env=env)[0]
    b = _run(tmp_path, "b", env=env)[0]
    c = _run(tmp_path, "c", seed=4, env=env)[0]
    assert tree_digest(a.root) == tree_digest(b.root) != tree_digest(c.root)


def test_records_are_structurally_sound(tmp_path, env):
    store, best, records, policy = _run(tmp_path, "r", env=env)
    assert len(records) == 4 and all(r.ok for r in records)
    for r in records:
        check_record(r, store, 12.0)
        assert len(r.artifacts["clips"]) == 4
        assert sum(c["duration_s"] for c in r.artifacts["clips"]) == pytest.approx(12.0)
    assert best is select_best(records)
    assert policy.updates == 4
    saved = bandit.BanditPolicy.load(store.root / "policy.json")
    assert saved == policy
    layout = {p.name for p in (store.root / "iter-0").iterdir()}
    assert {"directives.json", "storyline.json", "storyboard.json", "keyframes", "clips", "audio",
            "manifest.json", "report.json"} <= layout


def test_single_iteration(tmp_path, env):
    store, _, records, _ = _run(tmp_path, "t1", env=env, settings=PipelineSettings(iterations=1))
    assert sorted(p.name for p in store.root.glob("iter-*")) == ["iter-0"]


def test_warm_start_first_pick_follows_priors(tmp_path, env):
    from vidstory.backends.sim import sim_prior_scores

    _, _, records, _ = _run(tmp_path, "w", env=env)
    pri = sim_prior_scores(env, 3)
    want = tuple(max(range(len(r)), key=lambda i: (r[i], -i)) for r in pri)
    assert records[0].config.indices == want


def test_ingestion_names_missing_fields(store, backends):
    with pytest.raises(IngestionError) as e:
        ingest("Northwind builds a bottle for everyone.", [], backends.text, store)
    assert set(e.value.missing) == {"brand", "product", "gender", "age", "location", "interest"}
    with pytest.raises(IngestionError) as e:
        ingest("brand: A\nproduct: B\ngender: Female\nage: 30\nlocation: Oslo", [], backends.text, store)
    assert e.value.missing == ["interest"]


def test_reference_images_become_assets(tmp_path, env):
    img = tmp_path / "protagonist.png"
    img.write_bytes(b"fake image bytes")
    store, _, records, _ = _run(tmp_path, "img", env=env, images=[img])
    assets = json.loads((store.root / records[0].artifacts["assets"]).read_text())
    by_entity = {a["entity"]: a for a in assets}
    assert by_entity["protagonist"]["generated"] is False
    assert by_entity["protagonist"]["kind"] == "Character"
    assert store.read(by_entity["protagonist"]["image_refs"][0]) == b"fake image bytes"
    assert all(a["generated"] for e, a in by_entity.items() if e != "protagonist")


def test_match_visual_case_insensitive():
    from vidstory.artifacts import AnnotatedVisual, VisualRole

    vs = [AnnotatedVisual("inputs/x.png", "Logo reference: NORTHWIND mark", VisualRole.Logo)]
    assert match_visual("northwind", vs) is vs[0]
    assert match_visual("Northwind logo", vs) is vs[0]
    assert match_visual("bottle", vs) is None


class FailingVideo:
    """Video backend that fails on the first iteration's clips only."""

    def __init__(self, inner):
        self.inner = inner
        self.failed = False

    def invoke(self, req):
        if req.capability is Capability.Video and not self.failed:
            self.failed = True
            raise TransportError("stub outage", attempts=4)
        return self.inner.invoke(req)


def test_failed_iteration_is_recorded_and_skipped(tmp_path, env):
    sim = SimBackend(seed=3, env=env)
    b = Backends(sim, sim, FailingVideo(sim), sim, sim, sim)
    store, best, records, policy = _run(tmp_path, "f", backends=b)
    assert records[0].error and records[0].error_category == "transport"
    assert not records[0].ok and all(r.ok for r in records[1:])
    assert policy.updates == 3
    assert best.iteration != 0


class BadJudge:
    def __init__(self, inner):
        self.inner = inner
        self.video_calls = 0

    def invoke(self, req):
        if req.params.get("task") == "video":
            self.video_calls += 1
            return BackendResponse(text='{"breakdown": {}}')
        return self.inner.invoke(req)


def test_judge_schema_error_after_one_reask(tmp_path, env):
    sim = SimBackend(seed=3, env=env)
    judge = BadJudge(sim)
    b = Backends(sim, sim, sim, sim, sim, judge)
    store, best, records, policy = _run(tmp_path, "j", backends=b, settings=PipelineSettings(iterations=2))
    assert best is None and policy.updates == 0
    assert all(r.error_category == "schema" for r in records)
    assert judge.video_calls == 4


def test_muxer_success_and_failure(tmp_path, env):
    script = tmp_path / "mux.py"
    script.write_text("import sys, pathlib\n"
                      "m = pathlib.Path(sys.argv[1]).read_bytes()\n"
                      "pathlib.Path(sys.argv[2]).write_bytes(b'MUXED' + m[:16])\n")
    ok = PipelineSettings(iterations=1, muxer=f"{sys.executable} {script} {{manifest}} {{output}}")
    store, best, records, _ = _run(tmp_path, "mux", env=env, settings=ok)
    assert store.read(best.artifacts["video"]).startswith(b"MUXED")
    bad = PipelineSettings(iterations=1, muxer=f"{sys.executable} -c 'import sys; sys.exit(3)'")
    store, best, records, _ = _run(tmp_path, "mux-bad", env=env, settings=bad)
    assert best is None and records[0].error_category == "assembly"


def test_empty_voiceover_gives_music_only(store, sim):
    board = Storyboard(tuple(Scene(i, "d", "c", 3.0, ()) for i in range(4)), AudioDirectives("", "90 bpm", "calm"))
    c = StructuredConstraints("A", "B", "Female", "30", "Oslo", "ski")
    audio = gen_audio(board, CreativeConfig.from_indices(0, 0, 0), c, sim, sim, store)
    assert audio.voiceover_ref is None and audio.music_ref
    assert audio.mix_manifest["total_s"] == 12.0
    assert [t["kind"] for t in audio.mix_manifest["tracks"]] == ["music"]


class ShortBoard:
    def __init__(self):
        self.calls = 0

    def invoke(self, req):
        self.calls += 1
        return BackendResponse(text=json.dumps({
            "scenes": [{"index": i, "descriptors": "d", "camera": "c", "duration_s": 4, "entity_flags": []}
                       for i in range(3)],
            "audio_directives": {"voiceover": "v", "tempo": "t", "mood": "m"}}))


def test_storyboard_scene_count_enforced():
    story = Storyline("l", ("a", "b", "c", "d"), ("bottle",))
    cfg = CreativeConfig.from_indices(0, 0, 0)
    c = StructuredConstraints("A", "B", "Female", "30", "Oslo", "ski")
    b = ShortBoard()
    with pytest.raises(SchemaError) as e:
        make_storyboard(story, cfg, expand_directive_template(cfg, c), b, c, 4, 12.0)
    assert e.value.field == "scenes" and b.calls == 2
