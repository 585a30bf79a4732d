"""Judge output contracts.

Four documents are parsed here: the storyline rubric, the joint keyframe
rubric, the final-video rubric (which carries the bandit's factored reward)
and the benchmark rubric. Parsers are strict: no clamping, no repair of sum
mismatches. The only leniency is locating the JSON object inside prose or a
code fence, and accepting numeric strings such as ``"17"`` for scores.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

from .errors import ContractError, SchemaError

STORYLINE_KEYS = ("hook_quality", "narrative_arc", "product_integration", "engagement", "prompt_adherence")
# Keyframe and final-video judges share the same five breakdown keys.
KEYFRAME_KEYS = ("coherence", "visual_quality", "engagement", "prompt_adherence", "logical_consistency")
VIDEO_KEYS = KEYFRAME_KEYS
EFFICACY_KEYS = ("creative_strategy", "narrative_mode", "aesthetic_archetype")
FAULTS = ("storyline", "image", "video")
BENCH_METRICS = ("VAF", "DA", "MA", "VQ")

SUM_TOLERANCE = 1e-6


def extract_json_object(document: str) -> dict:
    """Return the first balanced top-level ``{...}`` object in ``document``."""
    if isinstance(document, dict):
        return document
    if not isinstance(document, str):
        raise SchemaError("document is not text")
    start = document.find("{")
    while start != -1:
        depth = 0
        in_str = False
        escaped = False
        for i in range(start, len(document)):
            ch = document[i]
            if in_str:
                if escaped:
                    escaped = False
                elif ch == "\\":
                    escaped = True
                elif ch == '"':
                    in_str = False
            elif ch == '"':
                in_str = True
            elif ch == "{":
                depth += 1
            elif ch == "}":
                depth -= 1
                if depth == 0:
                    try:
                        obj = json.loads(document[start : i + 1])
                    except json.JSONDecodeError:
                        break
                    if isinstance(obj, dict):
                        return obj
                    break
        start = document.find("{", start + 1)
    raise SchemaError("no JSON object found in document")


def _number(value, field_name: str, lo: float, hi: float) -> float:
    if isinstance(value, bool):
        raise SchemaError(f"expected a number, got {value!r}", field=field_name)
    if isinstance(value, str):
        try:
            value = float(value.strip())
        except ValueError:
            raise SchemaError(f"expected a number, got {value!r}", field=field_name) from None
    if not isinstance(value, (int, float)) or not math.isfinite(value):
        raise SchemaError(f"expected a finite number, got {value!r}", field=field_name)
    if not lo <= value <= hi:
        raise SchemaError(f"value {value} outside [{lo:g}, {hi:g}]", field=field_name)
    return float(value)


def _text(doc: dict, key: str, required: bool = True) -> str:
    if key not in doc:
        if required:
            raise SchemaError("missing field", field=key)
        return ""
    value = doc[key]
    if not isinstance(value, str):
        raise SchemaError(f"expected a string, got {type(value).__name__}", field=key)
    return value


def _num_out(x: float):
    return int(x) if float(x).is_integer() else x


@dataclass
class VerifierReport:
    kind: str
    breakdown: dict[str, float]
    score: float
    feedback: str
    actionable_feedback: str
    primary_fault: str | None = None
    efficacy: dict[str, float] | None = None
    efficacy_justifications: dict[str, str] | None = None
    flagged_indices: list[int] | None = None
    refined_prompts: dict[int, str] | None = None

    def __post_init__(self):
        total = sum(self.breakdown.values())
        if abs(total - self.score) > SUM_TOLERANCE:
            raise SchemaError(f"score {self.score} != sum of breakdown {total}", field="score")

    def to_dict(self) -> dict:
        """Serialize in the key order of the judge's output contract."""
        breakdown = {k: _num_out(v) for k, v in self.breakdown.items()}
        if self.kind == "storyline":
            return {
                "breakdown": breakdown,
                "score": _num_out(self.score),
                "score_out_of": 100,
                "feedback": self.feedback,
                "actionable_feedback": self.actionable_feedback,
            }
        out: dict = {"breakdown": breakdown}
        if self.efficacy is not None:
            out["mab_efficacy_scores"] = {k: _num_out(v) for k, v in self.efficacy.items()}
        if self.efficacy_justifications is not None:
            out["mab_efficacy_justifications"] = dict(self.efficacy_justifications)
        out["feedback"] = self.feedback
        if self.primary_fault is not None:
            out["primary_fault"] = self.primary_fault
        if self.kind == "keyframe" and (self.flagged_indices or self.refined_prompts):
            out["actionable_feedback"] = {
                "instruction": self.actionable_feedback,
                "flagged_indices": list(self.flagged_indices or []),
                "refined_prompts": {str(k): v for k, v in sorted((self.refined_prompts or {}).items())},
            }
        else:
            out["actionable_feedback"] = self.actionable_feedback
        out["score"] = _num_out(self.score)
        return out

    def to_json(self, indent: int | None = 2) -> str:
        return json.dumps(self.to_dict(), indent=indent)


def _breakdown(doc: dict, keys: tuple[str, ...]) -> dict[str, float]:
    raw = doc.get("breakdown")
    if not isinstance(raw, dict):
        raise SchemaError("missing or not an object", field="breakdown")
    out = {}
    for k in keys:
        if k not in raw:
            raise SchemaError("missing breakdown dimension", field=f"breakdown.{k}")
        out[k] = _number(raw[k], f"breakdown.{k}", 0, 20)
    extra = set(raw) - set(keys)
    if extra:
        raise SchemaError(f"unexpected keys {sorted(extra)}", field="breakdown")
    return out


def _score(doc: dict, breakdown: dict[str, float]) -> float:
    if "score" not in doc:
        raise SchemaError("missing field", field="score")
    score = _number(doc["score"], "score", 0, 100)
    total = sum(breakdown.values())
    if abs(score - total) > SUM_TOLERANCE:
        raise SchemaError(f"score {score:g} does not equal breakdown sum {total:g}", field="score")
    return score


def _efficacy(doc: dict, required: bool):
    raw = doc.get("mab_efficacy_scores")
    if raw is None:
        if required:
            raise SchemaError("missing field", field="mab_efficacy_scores")
        return None, None
    if not isinstance(raw, dict):
        raise SchemaError("not an object", field="mab_efficacy_scores")
    eff = {}
    for k in EFFICACY_KEYS:
        if k not in raw:
            raise SchemaError("missing efficacy dimension", field=f"mab_efficacy_scores.{k}")
        eff[k] = _number(raw[k], f"mab_efficacy_scores.{k}", 0, 100)
    just = doc.get("mab_efficacy_justifications")
    if just is not None:
        if not isinstance(just, dict) or not all(isinstance(v, str) for v in just.values()):
            raise SchemaError("must map dimensions to strings", field="mab_efficacy_justifications")
        just = {str(k): v for k, v in just.items()}
    return eff, just


def _fault(doc: dict, required: bool) -> str | None:
    if "primary_fault" not in doc:
        if required:
            raise SchemaError("missing field", field="primary_fault")
        return None
    fault = doc["primary_fault"]
    if fault not in FAULTS:
        raise SchemaError(f"{fault!r} is not one of {FAULTS}", field="primary_fault")
    return fault


def parse_storyline_report(document) -> VerifierReport:
    doc = extract_json_object(document)
    breakdown = _breakdown(doc, STORYLINE_KEYS)
    score = _score(doc, breakdown)
    if "score_out_of" in doc and doc["score_out_of"] != 100:
        raise SchemaError(f"expected 100, got {doc['score_out_of']!r}", field="score_out_of")
    return VerifierReport(
        kind="storyline",
        breakdown=breakdown,
        score=score,
        feedback=_text(doc, "feedback"),
        actionable_feedback=_text(doc, "actionable_feedback"),
    )


def parse_keyframe_report(document) -> VerifierReport:
    """Parse the joint keyframe report.

    ``actionable_feedback`` is either a plain instruction or an object
    ``{"instruction", "flagged_indices", "refined_prompts"}`` naming the frames
    to regenerate. A top-level ``flagged_indices`` list is also accepted.
    Index bounds are checked by the caller, which knows the sequence length.
    """
    doc = extract_json_object(document)
    breakdown = _breakdown(doc, KEYFRAME_KEYS)
    score = _score(doc, breakdown)
    eff, just = _efficacy(doc, required=False)
    raw_af = doc.get("actionable_feedback")
    flagged: list[int] = []
    refined: dict[int, str] = {}
    if isinstance(raw_af, dict):
        instruction = raw_af.get("instruction", "")
        if not isinstance(instruction, str):
            raise SchemaError("expected a string", field="actionable_feedback.instruction")
        flagged = _indices(raw_af.get("flagged_indices", []), "actionable_feedback.flagged_indices")
        rp = raw_af.get("refined_prompts", {})
        if not isinstance(rp, dict):
            raise SchemaError("expected an object", field="actionable_feedback.refined_prompts")
        for k, v in rp.items():
            try:
                idx = int(k)
            except (TypeError, ValueError):
                raise SchemaError(f"key {k!r} is not an index", field="actionable_feedback.refined_prompts") from None
            if not isinstance(v, str):
                raise SchemaError("expected a string", field=f"actionable_feedback.refined_prompts.{k}")
            refined[idx] = v
    elif isinstance(raw_af, str):
        instruction = raw_af
    elif raw_af is None:
        raise SchemaError("missing field", field="actionable_feedback")
    else:
        raise SchemaError("expected a string or object", field="actionable_feedback")
    if "flagged_indices" in doc:
        flagged = sorted(set(flagged) | set(_indices(doc["flagged_indices"], "flagged_indices")))
    return VerifierReport(
        kind="keyframe",
        breakdown=breakdown,
        score=score,
        feedback=_text(doc, "feedback"),
        actionable_feedback=instruction,
        primary_fault=_fault(doc, required=False),
        efficacy=eff,
        efficacy_justifications=just,
        flagged_indices=flagged,
        refined_prompts=refined or None,
    )


def _indices(raw, field_name: str) -> list[int]:
    if not isinstance(raw, list):
        raise SchemaError("expected a list of integers", field=field_name)
    out = []
    for v in raw:
        if isinstance(v, bool) or not isinstance(v, int) or v < 0:
            raise SchemaError(f"{v!r} is not a non-negative integer", field=field_name)
        out.append(v)
    return sorted(set(out))


def parse_video_report(document) -> VerifierReport:
    doc = extract_json_object(document)
    breakdown = _breakdown(doc, VIDEO_KEYS)
    score = _score(doc, breakdown)
    eff, just = _efficacy(doc, required=True)
    return VerifierReport(
        kind="video",
        breakdown=breakdown,
        score=score,
        feedback=_text(doc, "feedback"),
        actionable_feedback=_text(doc, "actionable_feedback"),
        primary_fault=_fault(doc, required=True),
        efficacy=eff,
        efficacy_justifications=just,
    )


@dataclass(frozen=True)
class FactoredReward:
    r_cs: float
    r_nm: float
    r_aa: float
    aggregate: float

    def __post_init__(self):
        for name in ("r_cs", "r_nm", "r_aa", "aggregate"):
            v = getattr(self, name)
            if not (isinstance(v, (int, float)) and 0 <= v <= 100):
                from .errors import ValidationError

                raise ValidationError(f"reward component {name}={v!r} outside [0, 100]")

    @property
    def components(self) -> tuple[float, float, float]:
        return (self.r_cs, self.r_nm, self.r_aa)

    def to_dict(self) -> dict:
        return {"r_cs": self.r_cs, "r_nm": self.r_nm, "r_aa": self.r_aa, "aggregate": self.aggregate}


def extract_reward(report: VerifierReport) -> FactoredReward:
    if report.efficacy is None:
        raise ContractError(f"{report.kind} report carries no efficacy scores", field="mab_efficacy_scores")
    e = report.efficacy
    return FactoredReward(e["creative_strategy"], e["narrative_mode"], e["aesthetic_archetype"], report.score)


@dataclass
class BenchScores:
    vaf: float
    da: float
    ma: float
    vq: float
    reasoning: dict[str, str] = field(default_factory=dict)

    def __post_init__(self):
        for name in ("vaf", "da", "ma", "vq"):
            _number(getattr(self, name), f"{name.upper()}_score", 0, 100)

    @property
    def values(self) -> tuple[float, float, float, float]:
        return (self.vaf, self.da, self.ma, self.vq)

    def to_dict(self) -> dict:
        out = {}
        for m, v in zip(BENCH_METRICS, self.values):
            out[f"{m}_reasoning"] = self.reasoning.get(m, "")
            out[f"{m}_score"] = _num_out(v)
        return out

    @classmethod
    def from_dict(cls, doc: dict) -> BenchScores:
        scores = []
        reasoning = {}
        for m in BENCH_METRICS:
            key = f"{m}_score"
            if key not in doc:
                raise SchemaError("missing field", field=key)
            scores.append(_number(doc[key], key, 0, 100))
            rkey = f"{m}_reasoning"
            if rkey in doc:
                reasoning[m] = _text(doc, rkey)
        return cls(*scores, reasoning=reasoning)


def parse_bench_report(document) -> BenchScores:
    doc = extract_json_object(document)
    for m in BENCH_METRICS:
        if f"{m}_reasoning" not in doc:
            raise SchemaError("missing field", field=f"{m}_reasoning")
    return BenchScores.from_dict(doc)
