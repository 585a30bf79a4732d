import json

import numpy as np
import pytest
from hypothesis import given, strategies as st

from vidstory.backends import Capability, CapabilityRequest, SimBackend, SimEnvironment
from vidstory.backends.sim import parse_six_point, sim_judge_document, sim_prior_scores, sim_reward, split_evenly
from vidstory.creative_space import CreativeConfig, all_configs
from vidstory.errors import ValidationError
from vidstory.verifiers import extract_reward, parse_video_report


def test_reward_is_pure(env):
    c = CreativeConfig.from_indices(2, 1, 1)
    assert sim_reward(c, env, 5) == sim_reward(c, env, 5)
    assert sim_reward(c, env, 5) != sim_reward(c, env, 6)
    assert sim_reward(c, env, 5) != sim_reward(c, env.with_seed(4), 5)


def test_zero_noise_reward_is_truth(env):
    quiet = SimEnvironment(env.true_values, 3.0, 0.0)
    r = sim_reward(CreativeConfig.from_indices(2, 1, 1), quiet, 0)
    assert r.components == (85, 83, 87)
    assert r.aggregate == pytest.approx(85)


def test_clipping():
    hot = SimEnvironment(((100, 100, 100), (100, 100, 100), (100, 100, 100, 100)), 20, 0)
    assert sim_reward(CreativeConfig.from_indices(0, 0, 0), hot, 0).aggregate == 100


def test_noise_statistics(env):
    c = CreativeConfig.from_indices(0, 0, 0)
    xs = np.array([sim_reward(c, env, t).r_cs for t in range(4000)])
    assert abs(xs.mean() - 45) < 0.3
    assert abs(xs.std() - 5) < 0.3


def test_adversarial_aggregate():
    env = SimEnvironment(((10, 90, 50), (50, 50, 50), (50, 50, 50, 50)), 0, 0, aggregate_weights=(-0.5, 0.5, 0.5),
                         aggregate_offset=50)
    assert env.aggregate_of((90, 50, 50)) == pytest.approx(55)
    cfg, opt = env.noiseless_optimum()
    assert cfg.indices[0] == 0 and env.best_arms()[0] == 1


def test_env_round_trip(tmp_path, env):
    p = tmp_path / "env.json"
    p.write_text(json.dumps(env.to_dict()))
    assert SimEnvironment.load(p) == env
    with pytest.raises(ValidationError):
        SimEnvironment(((1, 2), (1, 2, 3), (1, 2, 3, 4)))


def test_priors_are_noisy_truth(env):
    a = sim_prior_scores(env, 1)
    assert a == sim_prior_scores(env, 1)
    assert [len(r) for r in a] == [3, 3, 4]
    assert all(0 <= v <= 100 for r in a for v in r)
    assert sim_prior_scores(env, 1, sigma=0) == [list(r) for r in env.true_values]


@given(st.floats(0, 100))
def test_split_evenly(total):
    parts = split_evenly(total)
    assert len(parts) == 5 and all(0 <= p <= 20 for p in parts)
    assert abs(sum(parts) - total) <= 1e-6


def test_split_integers():
    assert split_evenly(83) == [17, 17, 17, 16, 16]


def test_judge_document_parses(env):
    for t, c in enumerate(all_configs()):
        rep = parse_video_report(sim_judge_document(c, env, t))
        r = extract_reward(rep)
        assert r == sim_reward(c, env, t) or abs(r.aggregate - sim_reward(c, env, t).aggregate) < 1e-6


def test_six_point_parsing(prompt):
    f = parse_six_point(prompt)
    assert f["brand"] == "Northwind"
    assert f["product"] == "the TrailFlask insulated bottle"
    assert f["gender"] == "Female" and f["age"] == "25-34" and f["location"] == "Denver, CO"
    assert f["interest"].startswith("weekend trail running")
    assert parse_six_point("brand: A\nproduct: B") == {"brand": "A", "product": "B"}


def test_media_stub_is_deterministic():
    a = SimBackend(seed=1).invoke(CapabilityRequest(Capability.Image, "a cat", params={"task": "keyframe"}))
    b = SimBackend(seed=1).invoke(CapabilityRequest(Capability.Image, "a cat", params={"task": "keyframe"}))
    c = SimBackend(seed=2).invoke(CapabilityRequest(Capability.Image, "a cat", params={"task": "keyframe"}))
    assert a.blob == b.blob != c.blob
    assert a.blob.startswith(b"SIM-IMAGE v1")
