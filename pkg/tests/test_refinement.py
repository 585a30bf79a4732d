import random

import pytest

from vidstory.artifacts import Keyframe
from vidstory.backends import Backends, BackendResponse
from vidstory.errors import RefinementError, SchemaError
from vidstory.refinement import (
    DEFAULT_MAX_RETRIES,
    RefinementConfig,
    Termination,
    refine,
    refine_keyframes,
)
from vidstory.verifiers import VerifierReport


def report(score):
    parts = [score / 5] * 5
    return VerifierReport("storyline", dict(zip("abcde", parts)), sum(parts), "f", f"fix {score}")


def scripted(scores, cfg):
    prompts = []

    def gen(prompt, attempt):
        prompts.append(prompt)
        return f"artifact-{attempt}"

    def verify(art, attempt):
        return report(scores[attempt])

    return refine("start", gen, verify, cfg), prompts


def test_defaults():
    assert RefinementConfig() == RefinementConfig(75.0, 3)
    assert DEFAULT_MAX_RETRIES == 3


def test_threshold_met_first_try():
    (art, trace), prompts = scripted([80], RefinementConfig())
    assert art == "artifact-0" and trace.terminated_by is Termination.ThresholdMet and len(trace.attempts) == 1


def test_budget_exhausted_keeps_best():
    (art, trace), prompts = scripted([60, 70, 65, 50], RefinementConfig())
    assert len(trace.attempts) == 4
    assert trace.terminated_by is Termination.BudgetExhausted
    assert art == "artifact-1" and trace.best_score == 70


def test_feedback_flows_into_next_prompt():
    (_, trace), prompts = scripted([60, 80], RefinementConfig())
    assert prompts[0] == "start"
    assert "fix 60" in prompts[1]


def test_zero_retries():
    (_, trace), _ = scripted([10], RefinementConfig(75, 0))
    assert len(trace.attempts) == 1 and trace.terminated_by is Termination.BudgetExhausted


def test_ties_pick_earliest():
    (art, trace), _ = scripted([60, 60, 60, 60], RefinementConfig())
    assert art == "artifact-0"


def test_generator_failure_carries_trace():
    def gen(prompt, attempt):
        if attempt == 1:
            raise SchemaError("broken", field="scenes")
        return attempt

    with pytest.raises(RefinementError) as e:
        refine("p", gen, lambda a, i: report(10), RefinementConfig())
    assert len(e.value.trace.attempts) == 1
    assert e.value.category == "schema"


def test_random_scripts():
    rng = random.Random(0)
    for _ in range(200):
        r = rng.randint(0, 5)
        tau = rng.uniform(0, 100)
        scores = [rng.uniform(0, 100) for _ in range(r + 1)]
        (art, trace), _ = scripted(scores, RefinementConfig(tau, r))
        assert len(trace.attempts) <= r + 1
        assert trace.best_score == max(trace.scores)
        met = any(s >= tau for s in trace.scores)
        assert trace.terminated_by is (Termination.ThresholdMet if met else Termination.BudgetExhausted)
        if met:
            assert trace.scores[-1] >= tau and all(s < tau for s in trace.scores[:-1])


class KeyframeJudge:
    """Scripted keyframe judge: per round (score, flags)."""

    def __init__(self, script):
        self.script = script
        self.round = 0

    def invoke(self, req):
        score, flags = self.script[min(self.round, len(self.script) - 1)]
        self.round += 1
        parts = [score / 5] * 5
        keys = ("coherence", "visual_quality", "engagement", "prompt_adherence", "logical_consistency")
        import json

        return BackendResponse(text=json.dumps({
            "breakdown": dict(zip(keys, parts)), "score": sum(parts), "feedback": "f",
            "actionable_feedback": {"instruction": "redo", "flagged_indices": flags, "refined_prompts": {}}}))


def _frames():
    return [Keyframe(i, f"k{i}-r0", f"prompt {i}") for i in range(4)]


def _regen(k, prompt, rnd):
    return Keyframe(k.scene_index, f"k{k.scene_index}-r{rnd}", prompt)


def test_keyframes_selective():
    judge = KeyframeJudge([(40, [1]), (50, [3]), (90, [])])
    frames, trace = refine_keyframes(_frames(), [], lambda k: k.image_ref.encode(), _regen, "c",
                                     Backends.uniform(judge), RefinementConfig())
    assert [k.image_ref for k in frames] == ["k0-r0", "k1-r1", "k2-r0", "k3-r2"]
    assert trace.terminated_by is Termination.ThresholdMet


def test_keyframes_fail_without_flags_regenerates_all():
    judge = KeyframeJudge([(40, []), (90, [])])
    frames, _ = refine_keyframes(_frames(), [], lambda k: k.image_ref.encode(), _regen, "c",
                                 Backends.uniform(judge), RefinementConfig())
    assert [k.image_ref for k in frames] == [f"k{i}-r1" for i in range(4)]


def test_keyframes_out_of_range_flag():
    judge = KeyframeJudge([(40, [7])])
    with pytest.raises(RefinementError) as e:
        refine_keyframes(_frames(), [], lambda k: b"", _regen, "c", Backends.uniform(judge), RefinementConfig())
    assert isinstance(e.value.cause, SchemaError)


def test_keyframes_budget_returns_best_round():
    judge = KeyframeJudge([(40, [0]), (60, [0]), (50, [0]), (45, [0])])
    frames, trace = refine_keyframes(_frames(), [], lambda k: b"", _regen, "c", Backends.uniform(judge),
                                     RefinementConfig())
    assert len(trace.attempts) == 4 and trace.best_index == 1
    assert frames[0].image_ref == "k0-r1"
