"""Random valid judge documents and single-field mutations of them."""

import copy
import random

from vidstory.verifiers import BENCH_METRICS, EFFICACY_KEYS, FAULTS, KEYFRAME_KEYS, STORYLINE_KEYS, VIDEO_KEYS

KINDS = ("storyline", "keyframe", "video", "bench")


def _parts(rng, n):
    if rng.random() < 0.5:
        return [rng.randint(0, 20) for _ in range(n)]
    return [round(rng.uniform(0, 20), rng.randint(1, 3)) for _ in range(n)]


def valid_report(rng: random.Random, kind: str) -> dict:
    if kind == "bench":
        out = {}
        for m in BENCH_METRICS:
            out[f"{m}_reasoning"] = f"reason {rng.randint(0, 99)}"
            out[f"{m}_score"] = rng.choice([rng.randint(0, 100), round(rng.uniform(0, 100), 1)])
        return out
    keys = STORYLINE_KEYS if kind == "storyline" else KEYFRAME_KEYS if kind == "keyframe" else VIDEO_KEYS
    parts = _parts(rng, 5)
    doc = {"breakdown": dict(zip(keys, parts)), "score": sum(parts)}
    doc["feedback"] = "observations"
    if kind == "storyline":
        doc["score_out_of"] = 100
        doc["actionable_feedback"] = "do this"
        return doc
    doc["primary_fault"] = rng.choice(FAULTS)
    if kind == "video":
        doc["mab_efficacy_scores"] = {k: rng.randint(0, 100) for k in EFFICACY_KEYS}
        doc["mab_efficacy_justifications"] = {k: "because" for k in EFFICACY_KEYS}
        doc["actionable_feedback"] = "do this"
    else:
        flagged = sorted(rng.sample(range(4), rng.randint(0, 3)))
        doc["actionable_feedback"] = {"instruction": "redo", "flagged_indices": flagged,
                                      "refined_prompts": {str(i): f"p{i}" for i in flagged}}
    return doc


def mutate(rng: random.Random, kind: str, doc: dict) -> tuple[dict, str]:
    """Break exactly one thing; return the document and the field the error must name."""
    d = copy.deepcopy(doc)
    if kind == "bench":
        m = rng.choice(BENCH_METRICS)
        key = f"{m}_score"
        how = rng.choice(["drop", "range", "type"])
        if how == "drop":
            del d[key]
        elif how == "range":
            d[key] = rng.choice([-1, 100.5, 250])
        else:
            d[key] = rng.choice(["high", None, [1]])
        return d, key
    choices = ["drop_breakdown_key", "range", "sum", "drop_score", "type", "drop_feedback"]
    if kind == "video":
        choices += ["drop_efficacy", "efficacy_range", "fault"]
    if kind == "keyframe":
        choices += ["flag_type", "fault"]
    how = rng.choice(choices)
    bk = rng.choice(list(d["breakdown"]))
    if how == "drop_breakdown_key":
        del d["breakdown"][bk]
        return d, f"breakdown.{bk}"
    if how == "range":
        d["breakdown"][bk] = rng.choice([21, -0.5, 40])
        return d, f"breakdown.{bk}"
    if how == "sum":
        d["score"] = d["score"] + rng.choice([1, -1, 0.01])
        if not 0 <= d["score"] <= 100:
            d["score"] = 50.5 if doc["score"] != 50.5 else 49.5
        return d, "score"
    if how == "drop_score":
        del d["score"]
        return d, "score"
    if how == "type":
        d["breakdown"][bk] = rng.choice(["ten", True, None])
        return d, f"breakdown.{bk}"
    if how == "drop_feedback":
        del d["feedback"]
        return d, "feedback"
    if how == "drop_efficacy":
        k = rng.choice(EFFICACY_KEYS)
        del d["mab_efficacy_scores"][k]
        return d, f"mab_efficacy_scores.{k}"
    if how == "efficacy_range":
        k = rng.choice(EFFICACY_KEYS)
        d["mab_efficacy_scores"][k] = 101
        return d, f"mab_efficacy_scores.{k}"
    if how == "fault":
        d["primary_fault"] = "audio"
        return d, "primary_fault"
    d["actionable_feedback"]["flagged_indices"] = ["two"]
    return d, "actionable_feedback.flagged_indices"
