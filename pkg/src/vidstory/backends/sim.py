"""Deterministic simulation backend.

Every response is a pure function of the request's content hash and the
backend seed, so two runs with the same seed write byte-identical artifacts.
Media are small text stubs carrying provenance hashes instead of pixels.

The final-video judge is driven by :class:`SimEnvironment`, a parametric
ground truth: each arm has a true 0-100 efficacy, observations add a
context offset and seeded Gaussian noise, and the aggregate is the mean of
the three components (or a configurable weighted sum, used to build
adversarial environments where one dimension disagrees with the aggregate).
"""

from __future__ import annotations

import hashlib
import json
import re
from collections.abc import Sequence
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..creative_space import (
    DIMENSIONS,
    CreativeConfig,
    arm_counts,
    enumerate_arms,
    expand_directive_template,
)
from ..errors import ValidationError
from ..verifiers import EFFICACY_KEYS, FAULTS, STORYLINE_KEYS, VIDEO_KEYS, FactoredReward
from .base import BackendResponse, Capability, CapabilityRequest

_MASK32 = (1 << 32) - 1
_MASK64 = (1 << 64) - 1

# Noise streams keep reward noise, prior noise and random-search draws apart.
STREAM_REWARD = 0
STREAM_PRIOR = 1
STREAM_RANDOM = 2


def standard_normals(seed: int, stream: int, counter: int, n: int = 3) -> np.ndarray:
    """``n`` standard normals from a Philox generator keyed on (seed, stream, counter).

    Counter-based keying makes each draw independent of call order.
    """
    key = ((int(seed) & _MASK64) << 64) | ((int(stream) & _MASK32) << 32) | (int(counter) & _MASK32)
    return np.random.Generator(np.random.Philox(key=key)).standard_normal(n)


@dataclass(frozen=True)
class SimEnvironment:
    true_values: tuple[tuple[float, ...], ...]
    context_modifier: float = 0.0
    noise_sigma: float = 0.0
    seed: int = 0
    aggregate_weights: tuple[float, float, float] | None = None
    aggregate_offset: float = 0.0

    def __post_init__(self):
        tv = tuple(tuple(float(v) for v in row) for row in self.true_values)
        object.__setattr__(self, "true_values", tv)
        if tuple(len(r) for r in tv) != arm_counts():
            raise ValidationError(f"true_values lengths {[len(r) for r in tv]} must be {list(arm_counts())}")
        if any(not 0 <= v <= 100 for r in tv for v in r):
            raise ValidationError("true arm values must lie in [0, 100]")
        if self.noise_sigma < 0:
            raise ValidationError("noise_sigma must be non-negative")
        if self.aggregate_weights is not None:
            w = tuple(float(x) for x in self.aggregate_weights)
            if len(w) != 3:
                raise ValidationError("aggregate_weights needs one weight per dimension")
            object.__setattr__(self, "aggregate_weights", w)

    def with_seed(self, seed: int) -> SimEnvironment:
        return SimEnvironment(self.true_values, self.context_modifier, self.noise_sigma, seed,
                              self.aggregate_weights, self.aggregate_offset)

    def expected_components(self, config: CreativeConfig) -> tuple[float, float, float]:
        return tuple(
            min(max(self.true_values[d][i] + self.context_modifier, 0.0), 100.0)
            for d, i in enumerate(config.indices)
        )

    def aggregate_of(self, comps: Sequence[float]) -> float:
        if self.aggregate_weights is None:
            agg = (comps[0] + comps[1] + comps[2]) / 3.0
        else:
            w = self.aggregate_weights
            agg = self.aggregate_offset + w[0] * comps[0] + w[1] * comps[1] + w[2] * comps[2]
        return min(max(agg, 0.0), 100.0)

    def noiseless_optimum(self) -> tuple[CreativeConfig, float]:
        """Best config by noiseless aggregate (exhaustive over the 36 configs)."""
        from ..creative_space import all_configs

        best = max(all_configs(), key=lambda c: (self.aggregate_of(self.expected_components(c)), [-i for i in c.indices]))
        return best, self.aggregate_of(self.expected_components(best))

    def best_arms(self) -> tuple[int, int, int]:
        """Per-dimension index of the highest true component value (lowest index on ties)."""
        return tuple(int(np.argmax(row)) for row in self.true_values)

    def to_dict(self) -> dict:
        out = {
            "true_values": {d.key: list(row) for d, row in zip(DIMENSIONS, self.true_values)},
            "context_modifier": self.context_modifier,
            "noise_sigma": self.noise_sigma,
            "seed": self.seed,
        }
        if self.aggregate_weights is not None:
            out["aggregate_weights"] = list(self.aggregate_weights)
            out["aggregate_offset"] = self.aggregate_offset
        return out

    @classmethod
    def from_dict(cls, data: dict) -> SimEnvironment:
        tv = data["true_values"]
        if isinstance(tv, dict):
            tv = [tv[d.key] for d in DIMENSIONS]
        return cls(
            tv,
            float(data.get("context_modifier", 0.0)),
            float(data.get("noise_sigma", 0.0)),
            int(data.get("seed", 0)),
            data.get("aggregate_weights"),
            float(data.get("aggregate_offset", 0.0)),
        )

    @classmethod
    def load(cls, path: str | Path) -> SimEnvironment:
        return cls.from_dict(json.loads(Path(path).read_text()))

    def digest(self) -> str:
        return hashlib.sha256(json.dumps(self.to_dict(), sort_keys=True).encode()).hexdigest()

    @classmethod
    def random(cls, seed: int, noise_sigma: float = 5.0) -> SimEnvironment:
        """A reproducible environment for sim runs without an env file."""
        rng = np.random.default_rng([seed, 0x5EED])
        tv = [np.round(rng.uniform(35, 90, n), 1).tolist() for n in arm_counts()]
        return cls(tv, 0.0, noise_sigma, seed)


def sim_reward(config: CreativeConfig, env: SimEnvironment, draw_index: int) -> FactoredReward:
    z = standard_normals(env.seed, STREAM_REWARD, draw_index, 3)
    comps = []
    for d, i in enumerate(config.indices):
        x = env.true_values[d][i] + env.context_modifier + z[d] * env.noise_sigma
        comps.append(min(max(float(x), 0.0), 100.0))
    return FactoredReward(comps[0], comps[1], comps[2], env.aggregate_of(comps))


def sim_prior_scores(env: SimEnvironment, seed: int, sigma: float = 10.0) -> list[list[float]]:
    """Warm-start scores: true value + context offset + N(0, sigma), clipped to [0, 100]."""
    out = []
    flat = 0
    for d, row in enumerate(env.true_values):
        scores = []
        for v in row:
            z = standard_normals(seed, STREAM_PRIOR, flat, 1)[0]
            scores.append(min(max(float(v + env.context_modifier + z * sigma), 0.0), 100.0))
            flat += 1
        out.append(scores)
    return out


def split_evenly(total: float, slots: int = 5, cap: float = 20.0) -> list[float]:
    """Split ``total`` into ``slots`` near-equal parts in [0, cap] whose sum is ``total``.

    Integral totals split into integers (83 -> 17, 17, 17, 16, 16).
    """
    if not 0 <= total <= slots * cap:
        raise ValidationError(f"cannot split {total} into {slots} slots capped at {cap}")
    if float(total).is_integer():
        q, r = divmod(int(total), slots)
        return [float(q + (1 if i < r else 0)) for i in range(slots)]
    base = total / slots
    parts = [base] * (slots - 1)
    # the remainder differs from base only by rounding; keep it inside the cap
    parts.append(min(max(total - sum(parts), 0.0), cap))
    return parts


def sim_judge_document(config: CreativeConfig, env: SimEnvironment, draw: int) -> str:
    reward = sim_reward(config, env, draw)
    parts = split_evenly(reward.aggregate)
    weakest = int(np.argmin(reward.components))
    doc = {
        "breakdown": {k: _clean(v) for k, v in zip(VIDEO_KEYS, parts)},
        "mab_efficacy_scores": {k: _clean(v) for k, v in zip(EFFICACY_KEYS, reward.components)},
        "mab_efficacy_justifications": {
            k: f"{lab} scored {v:.1f} for this brief" for k, lab, v in zip(EFFICACY_KEYS, config.labels, reward.components)
        },
        "feedback": f"Simulated review of {config}: aggregate {reward.aggregate:.2f}.",
        "primary_fault": FAULTS[weakest],
        "actionable_feedback": f"Strengthen the {EFFICACY_KEYS[weakest].replace('_', ' ')}.",
        "score": _clean(sum(parts)),
    }
    return json.dumps(doc)


def _clean(x: float):
    return int(x) if float(x).is_integer() else x


# Six-point prompt in the benchmark's sentence form, e.g.
# "Brand builds Product (desc), targeting Female editors aged 35-50 in City, State
#  who are interested in X."
_SIX_POINT_RE = re.compile(
    r"^\s*(?P<brand>.+?)\s+builds\s+(?P<product>.+?),\s+targeting\s+(?P<gender>\w+)\b(?P<persona>.*?)"
    r"\s+aged\s+(?P<age>.+?)\s+in\s+(?P<location>.+?)\s+who\s+(?:are|is)\s+interested\s+in\s+(?P<interest>.+?)\.?\s*$",
    re.IGNORECASE | re.DOTALL,
)
_SIX_FIELDS = ("brand", "product", "gender", "age", "location", "interest")


def parse_six_point(text: str) -> dict[str, str]:
    """Best-effort rule-based extraction; returns only the fields it found."""
    m = _SIX_POINT_RE.match(text)
    if m:
        out = {k: m.group(k).strip() for k in _SIX_FIELDS}
        persona = m.group("persona").strip()
        if persona:
            out["interest"] = f"{out['interest']} ({persona})"
        return out
    out = {}
    for line in re.split(r"[\n;]", text):
        if ":" in line:
            k, v = line.split(":", 1)
            k = k.strip().lower()
            if k in _SIX_FIELDS and v.strip():
                out[k] = v.strip()
    return out


_ROLE_WORDS = (("logo", "Logo"), ("product", "Product"), ("protagonist", "Protagonist"), ("character", "Protagonist"),
               ("prop", "Prop"), ("environment", "Environment"), ("scene", "Environment"))
_CAMERAS = {
    "ClarityEnergy": ("medium shot, quick push-in", "close-up, whip pan", "wide shot, fast tracking", "close-up, snap zoom"),
    "CinematicPremium": ("wide shot, slow dolly-in", "medium shot, gliding track", "close-up, slow orbit", "wide shot, crane up"),
    "MinimalistFocus": ("macro shot, locked-off", "close-up, micro slide", "medium shot, slow pan", "macro shot, rack focus"),
    "KineticGrit": ("medium shot, handheld", "wide shot, FPV drone sweep", "close-up, handheld follow", "wide shot, drone pull-back"),
}
_TEMPO = {"ClarityEnergy": "128 bpm", "CinematicPremium": "70 bpm", "MinimalistFocus": "80 bpm", "KineticGrit": "140 bpm"}
_MOOD = {"Analytical": "confident", "Vignette": "warm", "NarrativeDrama": "tense then uplifting"}


@dataclass
class SimBackend:
    """Simulation of every capability.

    ``storyline_scores`` scripts the storyline judge by attempt index and
    ``keyframe_flags`` forces the keyframe judge's flagged frames per round;
    both default to hash-derived behavior.
    """

    seed: int = 0
    env: SimEnvironment | None = None
    prior_sigma: float = 10.0
    storyline_scenes: int = 4
    storyline_scores: Sequence[float] | None = None
    keyframe_flags: Sequence[Sequence[int]] | None = None
    calls: list[str] = field(default_factory=list, repr=False)

    def __post_init__(self):
        if self.env is None:
            self.env = SimEnvironment.random(self.seed)

    def _h(self, request: CapabilityRequest) -> bytes:
        return hashlib.sha256(f"{self.seed}:{request.content_hash()}".encode()).digest()

    def invoke(self, request: CapabilityRequest) -> BackendResponse:
        task = request.params.get("task", "")
        self.calls.append(f"{request.capability.value}:{task}")
        payload = json.loads(request.params.get("payload", "{}"))
        h = self._h(request)
        cap = request.capability
        if cap is Capability.Text:
            handler = getattr(self, f"_text_{task}", None)
            if handler is None:
                return BackendResponse(text=f"sim text {h.hex()[:16]}")
            return BackendResponse(text=handler(request, payload, h))
        if cap is Capability.Judge:
            return BackendResponse(text=getattr(self, f"_judge_{task}")(request, payload, h))
        return self._media(request, payload, h)

    # --- text tasks -------------------------------------------------------

    def _text_ingest(self, request, payload, h):
        return json.dumps(parse_six_point(payload["user_prompt"]))

    def _text_annotate(self, request, payload, h):
        name = payload.get("filename", "image")
        stem = Path(name).stem.replace("_", " ").replace("-", " ")
        role = "Other"
        for word, r in _ROLE_WORDS:
            if word in name.lower():
                role = r
                break
        caption = f"{role.lower()} reference: {payload.get('hint') or stem}"
        return json.dumps({"caption": caption, "role": role})

    def _text_directives(self, request, payload, h):
        from ..artifacts import StructuredConstraints

        config = CreativeConfig.from_dict(payload["config"])
        constraints = StructuredConstraints(**payload["constraints"])
        return json.dumps(expand_directive_template(config, constraints).to_dict())

    def _text_warm_start(self, request, payload, h):
        scores = sim_prior_scores(self.env, self.seed, self.prior_sigma)
        return json.dumps({
            d.key: {a.label: round(s, 6) for a, s in zip(enumerate_arms(d), row)}
            for d, row in zip(DIMENSIONS, scores)
        })

    def _text_brief(self, request, payload, h):
        c = payload["constraints"]
        angles = ("commute rituals", "weekend markets", "late-night work sessions", "family gatherings",
                  "seasonal festivals", "neighborhood cafes")
        angle = angles[h[0] % len(angles)]
        return json.dumps({
            "text": (f"{c['brand']} presents {c['product']} to {c['gender']} audiences aged {c['age']} in "
                     f"{c['location']} who care about {c['interest']}. Anchor the story in local {angle}."),
            "cultural_notes": f"Local texture for {c['location']}: {angle}; reference {h.hex()[:8]}.",
        })

    def _text_storyline(self, request, payload, h):
        c = payload["constraints"]
        n = int(request.params.get("scene_count", self.storyline_scenes))
        product, loc = c["product"], c["location"]
        beats = (
            f"A {c['gender'].lower()} protagonist aged {c['age']} in {loc} meets a familiar frustration.",
            f"The {product} enters the moment and changes how the task unfolds.",
            f"Close on the {product} at work while the protagonist reacts.",
            f"The protagonist enjoys the result as {c['brand']} signs off.",
        )
        scenes = [beats[i % len(beats)] + f" [{h.hex()[2 * i:2 * i + 6]}]" for i in range(n)]
        return json.dumps({
            "logline": f"{product} turns a {loc} routine around ({payload.get('config', {}).get('creative_strategy', '')}).",
            "scenes": scenes,
            "entities": [product, "protagonist", f"{loc} setting"],
        })

    def _text_storyboard(self, request, payload, h):
        story = payload["storyline"]
        n = int(payload["scene_count"])
        runtime = float(payload["runtime_s"])
        aa = payload["config"]["aesthetic_archetype"]
        nm = payload["config"]["narrative_mode"]
        entities = story["entities"]
        scenes = []
        for i in range(n):
            flags = [entities[0]] if entities else []
            if len(entities) > 1 and i % 2 == 0:
                flags.append(entities[1])
            if len(entities) > 2 and i in (0, n - 1):
                flags.append(entities[2])
            scenes.append({
                "index": i,
                "descriptors": story["scenes"][i % len(story["scenes"])],
                "camera": _CAMERAS[aa][i % 4],
                "duration_s": runtime / n,
                "entity_flags": flags,
            })
        return json.dumps({
            "scenes": scenes,
            "audio_directives": {
                "voiceover": f"{story['logline']} {payload['constraints']['brand']}.",
                "tempo": _TEMPO[aa],
                "mood": _MOOD[nm],
            },
        })

    # --- judges -----------------------------------------------------------

    def _judge_storyline(self, request, payload, h):
        attempt = int(request.params.get("attempt", "0"))
        if self.storyline_scores is not None:
            script = self.storyline_scores
            parts = split_evenly(float(script[min(attempt, len(script) - 1)]))
        else:
            parts = [float(11 + h[i] % 10) for i in range(5)]
        weakest = STORYLINE_KEYS[int(np.argmin(parts))]
        return json.dumps({
            "breakdown": {k: _clean(v) for k, v in zip(STORYLINE_KEYS, parts)},
            "score": _clean(sum(parts)),
            "score_out_of": 100,
            "feedback": f"The {weakest.replace('_', ' ')} is the weakest element.",
            "actionable_feedback": f"Rework the {weakest.replace('_', ' ')} ({h.hex()[:6]}).",
        })

    def _judge_keyframe(self, request, payload, h):
        n = int(payload["frame_count"])
        rnd = int(request.params.get("round", "0"))
        if self.keyframe_flags is not None:
            flags = sorted(set(self.keyframe_flags[rnd])) if rnd < len(self.keyframe_flags) else []
        else:
            digests = payload["frame_digests"]
            flags = [i for i, d in enumerate(digests) if int(d[:2], 16) % 5 == 0]
        score = 40.0 if flags else float(80 + h[0] % 21)
        parts = split_evenly(score)
        return json.dumps({
            "breakdown": {k: _clean(v) for k, v in zip(VIDEO_KEYS, parts)},
            "feedback": f"{len(flags)} of {n} frames break continuity." if flags else "Sequence is consistent.",
            "primary_fault": "image",
            "actionable_feedback": {
                "instruction": "Regenerate the flagged frames to match the references." if flags else "",
                "flagged_indices": flags,
                "refined_prompts": {str(i): f"Keep identity consistent with the references (frame {i}, round {rnd + 1})."
                                    for i in flags},
            },
            "score": _clean(sum(parts)),
        })

    def _judge_video(self, request, payload, h):
        config = CreativeConfig.from_dict(payload["config"])
        return sim_judge_document(config, self.env, int(payload["iteration"]))

    def _judge_bench(self, request, payload, h):
        out = {}
        for i, m in enumerate(("VAF", "DA", "MA", "VQ")):
            out[f"{m}_reasoning"] = f"Simulated {m} assessment."
            out[f"{m}_score"] = 40 + h[i] % 61
        return json.dumps(out)

    # --- media ------------------------------------------------------------

    def _media(self, request, payload, h):
        kind = request.capability.value.upper()
        ph = hashlib.sha256(request.prompt.encode()).hexdigest()
        lines = [f"SIM-{kind} v1", f"prompt-sha256: {ph}", f"seed: {self.seed}"]
        for a in request.attachments:
            lines.append(f"attachment: {a.digest}")
        for k in sorted(request.params):
            if k != "payload":
                lines.append(f"{k}: {request.params[k]}")
        lines.append(f"variant: {h.hex()[:16]}")
        ext = {"IMAGE": "png", "VIDEO": "mp4", "SPEECH": "wav", "MUSIC": "wav"}[kind]
        return BackendResponse(
            text="",
            blob=("\n".join(lines) + "\n").encode(),
            name=f"{kind.lower()}-{ph[:16]}.{ext}",
            media_type=f"text/x-sim-{kind.lower()}",
        )
