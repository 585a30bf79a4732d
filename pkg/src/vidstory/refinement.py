"""Threshold-gated generate -> verify -> revise loops.

The loop keeps every attempt and returns the highest-scoring one (earliest on
ties), not the last: a revision can make things worse.
"""

from __future__ import annotations

import enum
import json
from dataclasses import dataclass, field
from typing import Any, Callable, Sequence

from .artifacts import ConditioningContext, CreativeBrief, Keyframe, Storyline
from .backends.base import Attachment, Backends, Capability, CapabilityRequest, invoke_structured
from .creative_space import AgentDirectives
from .errors import RefinementError, SchemaError, ValidationError
from .prompts import render
from .verifiers import VerifierReport, parse_keyframe_report, parse_storyline_report

DEFAULT_MAX_RETRIES = 3
DEFAULT_THRESHOLD = 75.0


class Termination(enum.Enum):
    ThresholdMet = "ThresholdMet"
    BudgetExhausted = "BudgetExhausted"


@dataclass(frozen=True)
class RefinementConfig:
    threshold: float = DEFAULT_THRESHOLD
    max_retries: int = DEFAULT_MAX_RETRIES

    def __post_init__(self):
        if not 0 <= self.threshold <= 100:
            raise ValidationError(f"threshold {self.threshold} outside [0, 100]")
        if not (isinstance(self.max_retries, int) and self.max_retries >= 0):
            raise ValidationError(f"max_retries must be a non-negative integer, got {self.max_retries!r}")


@dataclass
class Attempt:
    artifact_ref: Any
    report: VerifierReport
    revised_prompt: str


@dataclass
class RefinementTrace:
    attempts: list[Attempt] = field(default_factory=list)
    best_index: int = -1
    terminated_by: Termination | None = None

    @property
    def scores(self) -> list[float]:
        return [a.report.score for a in self.attempts]

    @property
    def best_score(self) -> float:
        return self.attempts[self.best_index].report.score

    def to_dict(self) -> dict:
        return {
            "best_index": self.best_index,
            "terminated_by": self.terminated_by.value if self.terminated_by else None,
            "attempts": [
                {"artifact": a.artifact_ref, "report": a.report.to_dict(), "revised_prompt": a.revised_prompt}
                for a in self.attempts
            ],
        }


def append_feedback(prompt: str, report: VerifierReport) -> str:
    """Default revision: carry the verifier's instruction into the next prompt."""
    return f"{prompt}\n\nRevision required: {report.actionable_feedback}"


def refine(
    initial_prompt: str,
    generate: Callable[[str, int], Any],
    verify: Callable[[Any, int], VerifierReport],
    config: RefinementConfig = RefinementConfig(),
    revise: Callable[[str, VerifierReport], str] = append_feedback,
    ref: Callable[[Any], Any] = lambda artifact: artifact,
) -> tuple[Any, RefinementTrace]:
    """Run at most ``max_retries + 1`` attempts, stopping once a score reaches the threshold.

    ``generate(prompt, attempt)`` and ``verify(artifact, attempt)`` are called
    with the zero-based attempt number. Failures are re-raised as
    :class:`RefinementError` carrying the trace so far.
    """
    trace = RefinementTrace()
    artifacts: list[Any] = []
    prompt = initial_prompt
    for attempt in range(config.max_retries + 1):
        try:
            artifact = generate(prompt, attempt)
            report = verify(artifact, attempt)
        except Exception as exc:
            if trace.attempts:
                trace.best_index = _argmax_first(trace.scores)
            raise RefinementError(exc, trace) from exc
        revised = revise(prompt, report)
        artifacts.append(artifact)
        trace.attempts.append(Attempt(ref(artifact), report, revised))
        if report.score >= config.threshold:
            trace.terminated_by = Termination.ThresholdMet
            break
        prompt = revised
    else:
        trace.terminated_by = Termination.BudgetExhausted
    trace.best_index = _argmax_first(trace.scores)
    return artifacts[trace.best_index], trace


def _argmax_first(scores: Sequence[float]) -> int:
    best = 0
    for i, s in enumerate(scores):
        if s > scores[best]:
            best = i
    return best


def refine_storyline(
    brief: CreativeBrief,
    directives: AgentDirectives,
    ctx: ConditioningContext,
    backends: Backends,
    config: RefinementConfig = RefinementConfig(),
    scene_count: int = 4,
    runtime_s: float = 12.0,
) -> tuple[Storyline, RefinementTrace]:
    if not brief.text.strip():
        raise ValidationError("brief is empty")
    constraints = ctx.constraints.to_dict()
    base = render("storyline", directive=directives.storyline_directive,
                  brief=f"{brief.text}\n{brief.cultural_notes}".strip(),
                  scene_count=scene_count, runtime_s=runtime_s, revision="")

    def generate(prompt: str, attempt: int) -> Storyline:
        req = CapabilityRequest(
            Capability.Text, prompt,
            params={"task": "storyline", "attempt": str(attempt), "payload": json.dumps(
                {"constraints": constraints, "config": ctx.config.to_dict()}, sort_keys=True)},
        )
        return invoke_structured(backends.text, req, _parse_storyline)

    def verify(story: Storyline, attempt: int) -> VerifierReport:
        req = CapabilityRequest(
            Capability.Judge,
            render("storyline_judge", constraints=ctx.constraints.to_prompt(), storyline=story.render()),
            params={"task": "storyline", "attempt": str(attempt)},
        )
        return invoke_structured(backends.judge, req, parse_storyline_report)

    return refine(base, generate, verify, config, ref=lambda s: s.to_dict())


def _parse_storyline(doc: str) -> Storyline:
    from .verifiers import extract_json_object

    return Storyline.from_dict(extract_json_object(doc))


def refine_keyframes(
    keyframes: Sequence[Keyframe],
    references: Sequence[Attachment],
    frame_data: Callable[[Keyframe], bytes],
    regenerate: Callable[[Keyframe, str, int], Keyframe],
    constraints_prompt: str,
    backends: Backends,
    config: RefinementConfig = RefinementConfig(),
) -> tuple[list[Keyframe], RefinementTrace]:
    """Judge the whole sequence each round and redraw only the flagged frames.

    ``regenerate(keyframe, prompt, round)`` returns the replacement frame.
    A failing report that flags nothing triggers a redraw of every frame.
    """
    frames = list(keyframes)
    if not frames:
        raise ValidationError("no keyframes to refine")
    if [k.scene_index for k in frames] != list(range(len(frames))):
        raise ValidationError("keyframes must be indexed 0..N-1 in order")
    n = len(frames)
    trace = RefinementTrace()
    sequences: list[list[Keyframe]] = []
    for rnd in range(config.max_retries + 1):
        try:
            report = _judge_keyframes(frames, references, frame_data, constraints_prompt, backends, config, rnd)
            bad = [i for i in report.flagged_indices or [] if i >= n]
            if bad:
                raise SchemaError(f"flagged index {bad[0]} out of range for {n} frames", field="flagged_indices")
            flagged = list(report.flagged_indices or [])
            if report.score < config.threshold and not flagged:
                flagged = list(range(n))
            refined = {i: (report.refined_prompts or {}).get(i) or
                       f"{frames[i].prompt}\n\nRevision required: {report.actionable_feedback}"
                       for i in flagged}
        except Exception as exc:
            if trace.attempts:
                trace.best_index = _argmax_first(trace.scores)
            raise RefinementError(exc, trace) from exc
        sequences.append(list(frames))
        trace.attempts.append(Attempt([k.image_ref for k in frames], report, json.dumps(
            {str(i): p for i, p in refined.items()}, sort_keys=True)))
        if report.score >= config.threshold:
            trace.terminated_by = Termination.ThresholdMet
            break
        if rnd == config.max_retries:
            trace.terminated_by = Termination.BudgetExhausted
            break
        try:
            frames = [regenerate(k, refined[k.scene_index], rnd + 1) if k.scene_index in refined else k
                      for k in frames]
        except Exception as exc:
            trace.best_index = _argmax_first(trace.scores)
            raise RefinementError(exc, trace) from exc
    trace.best_index = _argmax_first(trace.scores)
    return sequences[trace.best_index], trace


def _judge_keyframes(frames, references, frame_data, constraints_prompt, backends, config, rnd):
    attachments = list(references)
    digests = []
    for k in frames:
        data = frame_data(k)
        att = Attachment(k.image_ref, data, "image/png")
        attachments.append(att)
        digests.append(att.digest)
    req = CapabilityRequest(
        Capability.Judge,
        render("keyframe_judge", frame_count=len(frames), last_index=len(frames) - 1,
               constraints=constraints_prompt, threshold=config.threshold),
        attachments=tuple(attachments),
        params={"task": "keyframe", "round": str(rnd),
                "payload": json.dumps({"frame_count": len(frames), "frame_digests": digests})},
    )
    return invoke_structured(backends.judge, req, parse_keyframe_report)
