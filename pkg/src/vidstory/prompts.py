"""Prompt templates for every backend task.

Templates use ``str.format`` fields. The JSON output contracts at the end of
the judge templates are the ones the parsers in :mod:`vidstory.verifiers`
enforce; keep them in sync.
"""

from __future__ import annotations

_JSON_ONLY = "Answer with one JSON object only: no markdown fences, no commentary."

TEMPLATES: dict[str, str] = {
    "ingest": """Extract the targeting constraints from this advertising request.

Request:
{user_prompt}

Return {{"brand": str, "product": str, "gender": str, "age": str, "location": str, "interest": str}}.
Omit a key rather than guessing when the request does not state it. """ + _JSON_ONLY,
    "annotate": """Describe the attached reference image for an ad production team.
File name: {filename}
Return {{"caption": str, "role": one of "Product", "Logo", "Protagonist", "Prop", "Environment", "Other"}}. """
    + _JSON_ONLY,
    "directives": """You are the creative lead coordinating three production agents.
Selected creative arms:
{arms}

Campaign constraints:
{constraints}

Reference visuals:
{visuals}

Fuse the arms into one creative direction and split it into a directive for each agent:
the storyline writer, the keyframe illustrator and the video animator. Each directive must
commit to the selected strategy, narrative mode and aesthetic, and stay specific to the
product and audience.
Return {{"storyline_directive": str, "keyframe_directive": str, "video_directive": str}}. """ + _JSON_ONLY,
    "warm_start": """Before any footage exists, estimate how well each creative option would
work for this campaign on a 0-100 scale.

Campaign constraints:
{constraints}

Options:
{arms}

Return {{"creative_strategy": {{label: score}}, "narrative_mode": {{label: score}},
"aesthetic_archetype": {{label: score}}}} with a score for every listed label. """ + _JSON_ONLY,
    "brief": """Research the audience and write a creative brief.

Constraints:
{constraints}

Expand the product and demographic into concrete local culture, settings and habits that a
short ad could use. Return {{"text": str, "cultural_notes": str}}. """ + _JSON_ONLY,
    "storyline": """{directive}

Creative brief:
{brief}

Write a {scene_count}-scene storyline for a {runtime_s:g}-second ad.
{revision}
Return {{"logline": str, "scenes": [str, ...], "entities": [str, ...]}} where entities lists every
character, prop and environment that must look consistent across scenes. """ + _JSON_ONLY,
    "storyboard": """{directive}

Storyline:
{storyline}

Expand the storyline into exactly {scene_count} scenes totalling {runtime_s:g} seconds.
Entities available: {entities}
Return {{"scenes": [{{"index": int, "descriptors": str, "camera": str, "duration_s": number,
"entity_flags": [entity, ...]}}], "audio_directives": {{"voiceover": str, "tempo": str, "mood": str}}}}.
Only use listed entities in entity_flags. """ + _JSON_ONLY,
    "asset": """Reference sheet for "{entity}" ({kind}) as it appears in this ad: {context}.
For characters, show the wardrobe from several angles in one collage.""",
    "keyframe": """{directive}

Scene {index}: {descriptors}
Camera: {camera}
Keep these references consistent:
{references}
{revision}""",
    "clip": """{directive}

Animate scene {index} for {duration_s:g} seconds starting from the attached keyframe.
Action: {descriptors}
Camera: {camera}""",
    "voiceover": """Read this voiceover for a {gender} audience aged {age}, {mood} delivery:
{voiceover}""",
    "music": """Instrumental bed, {tempo}, {mood} mood, {runtime_s:g} seconds, matching this aesthetic: {aesthetic}.""",
    "storyline_judge": """You review short-form ad storylines.

Campaign request:
{constraints}

Storyline:
{storyline}

Score five dimensions from 0 to 20: hook_quality (does the opening stop a scroll),
narrative_arc (clear, complete and logical progression), product_integration (is the product
essential to the story), engagement (does it land an emotion worth remembering) and
prompt_adherence (does it honor the product, audience and tone requested). The score is their sum.
actionable_feedback must be a direct instruction to the storyline writer.

Return:
{{"breakdown": {{"hook_quality": n, "narrative_arc": n, "product_integration": n, "engagement": n,
"prompt_adherence": n}}, "score": sum, "score_out_of": 100, "feedback": str, "actionable_feedback": str}}
""" + _JSON_ONLY,
    "keyframe_judge": """You review a sequence of {frame_count} keyframes as one visual story.
The attached images are, in order: the reference visuals, then frames 0..{last_index}.

Campaign request:
{constraints}

Judge identity consistency of people and product against the references and across frames,
continuity of setting, story readability, product appeal and fit with the audience. Score five
dimensions 0-20: coherence, visual_quality, engagement, prompt_adherence, logical_consistency.
If the sum is below {threshold:g}, list the frames that must be redrawn and give a corrected prompt
for each.

Return:
{{"breakdown": {{"coherence": n, "visual_quality": n, "engagement": n, "prompt_adherence": n,
"logical_consistency": n}}, "feedback": str, "primary_fault": "storyline" | "image" | "video",
"actionable_feedback": {{"instruction": str, "flagged_indices": [int, ...],
"refined_prompts": {{"<index>": str}}}}, "score": sum}}
""" + _JSON_ONLY,
    "video_judge": """You are a strict reviewer of finished video ads.

Structured constraints:
{constraints}

Annotated reference visuals:
{visuals}

Selected creative arms:
{config}

Arm definitions:
{definitions}

Storyboard:
{storyboard}

Score execution on five dimensions 0-20: coherence, visual_quality, engagement,
prompt_adherence, logical_consistency (physics, object use, continuity). score is their sum.
Separately rate, 0-100 each, whether each chosen creative arm was an effective choice for this
campaign given the result: creative_strategy, narrative_mode, aesthetic_archetype. Efficacy must
move in the same direction as execution quality. Name the stage most responsible for problems.

Return:
{{"breakdown": {{"coherence": n, "visual_quality": n, "engagement": n, "prompt_adherence": n,
"logical_consistency": n}}, "mab_efficacy_scores": {{"creative_strategy": n, "narrative_mode": n,
"aesthetic_archetype": n}}, "mab_efficacy_justifications": {{"creative_strategy": str,
"narrative_mode": str, "aesthetic_archetype": str}}, "feedback": str,
"primary_fault": "storyline" | "image" | "video", "actionable_feedback": str, "score": sum}}
""" + _JSON_ONLY,
    "bench_judge": """You grade a generated video ad against its brief. Attached: the brand logo, the
product image and the video.

Constraints:
{constraints}

Give a 0-100 score with a one or two sentence reason for each metric:
VAF (logo and product fidelity), DA (fit to gender, age, location and interest),
MA (persuasiveness and pacing), VQ (generative and lighting quality, independent of the brief).
Anchor scores to a five-step scale: 80-100 excellent, 60-79 good, 40-59 fair, 20-39 poor, 0-19 failed.

Return {{"VAF_reasoning": str, "VAF_score": n, "DA_reasoning": str, "DA_score": n,
"MA_reasoning": str, "MA_score": n, "VQ_reasoning": str, "VQ_score": n}}
""" + _JSON_ONLY,
}


def render(name: str, **fields) -> str:
    return TEMPLATES[name].format(**fields)
