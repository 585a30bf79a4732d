import math
import random

import pytest
from hypothesis import given, settings, strategies as st

from vidstory import bandit
from vidstory.bandit import Mode, WarmStartPrior, best_arm, new_policy, select, ucb_index, update, warm_start
from vidstory.creative_space import DIMENSIONS, CreativeConfig, CreativeDimension, arm_counts
from vidstory.errors import NotDeterminedError, ValidationError
from vidstory.verifiers import FactoredReward

from oracles import ucb as ucb_oracle

CS, NM, AA = DIMENSIONS


def test_cold_policy_selects_lowest_indices():
    assert select(new_policy()).indices == (0, 0, 0)


def test_untried_arms_first_then_exploit():
    p = new_policy()
    seen = []
    for _ in range(4):
        c = select(p)
        seen.append(c.indices[2])
        update(p, c, FactoredReward(50, 50, 50, 50))
    assert seen == [0, 1, 2, 3]


def test_ucb_index_examples():
    assert ucb_index(0.5, 0, 10, 1.4) == math.inf
    assert ucb_index(0.7, 3, 1, 2.0) == 0.7
    assert ucb_index(0.2, 4, math.e ** 2, 1.0) == pytest.approx(0.2 + math.sqrt(0.5))


@given(st.floats(0, 1), st.floats(0.01, 50), st.floats(0, 200), st.floats(0.01, 5))
def test_ucb_index_matches_oracle(v, n, total, c):
    assert ucb_index(v, n, total, c) == pytest.approx(ucb_oracle(v, n, total, c), abs=1e-12)


def test_update_factored_and_scalar():
    cfg = CreativeConfig.from_indices(1, 0, 2)
    p = update(new_policy(), cfg, FactoredReward(80, 40, 60, 55))
    assert [p.per_dimension[d][i].value for d, i in zip(DIMENSIONS, cfg.indices)] == [0.8, 0.4, 0.6]
    s = update(new_policy(mode=Mode.Scalar), cfg, FactoredReward(80, 40, 60, 55))
    assert [s.per_dimension[d][i].value for d, i in zip(DIMENSIONS, cfg.indices)] == [0.55] * 3
    assert p.total_pulls == {d: 1.0 for d in DIMENSIONS}


def test_incremental_mean():
    p = new_policy()
    cfg = CreativeConfig.from_indices(0, 0, 0)
    for x in (10, 20, 60):
        update(p, cfg, FactoredReward(x, x, x, x))
    assert p.per_dimension[CS][0].value == pytest.approx(0.3)
    assert p.per_dimension[CS][0].pulls == 3


def test_update_rejects_out_of_range():
    with pytest.raises(ValidationError):
        update(new_policy(), CreativeConfig.from_indices(0, 0, 0), FactoredReward(101, 0, 0, 0))


def test_warm_start_biases_first_pick():
    p = new_policy()
    warm_start(p, [WarmStartPrior(CS, 0, 30), WarmStartPrior(CS, 1, 90), WarmStartPrior(CS, 2, 60),
                   WarmStartPrior(NM, 0, 20), WarmStartPrior(NM, 1, 20), WarmStartPrior(NM, 2, 70),
                   *[WarmStartPrior(AA, i, v) for i, v in enumerate((10, 20, 30, 80))]])
    assert select(p).indices == (1, 2, 3)
    assert p.total_pulls[AA] == 4


def test_warm_start_validates():
    with pytest.raises(ValidationError):
        WarmStartPrior(CS, 0, 120)
    with pytest.raises(ValidationError):
        WarmStartPrior(CS, 0, 50, 0)
    with pytest.raises(ValidationError):
        warm_start(new_policy(), [WarmStartPrior(CS, 3, 50)])


def test_best_arm():
    p = new_policy()
    with pytest.raises(NotDeterminedError):
        best_arm(p, CS)
    update(p, CreativeConfig.from_indices(2, 0, 0), FactoredReward(70, 10, 10, 30))
    update(p, CreativeConfig.from_indices(1, 0, 0), FactoredReward(90, 10, 10, 37))
    assert best_arm(p, CS).label == "Transformational"


def test_exploration_constant_validated():
    for bad in (0, -1, float("nan"), float("inf")):
        with pytest.raises(ValidationError):
            new_policy(bad)


def test_policy_round_trip(tmp_path):
    p = new_policy(1.1, Mode.Scalar)
    warm_start(p, [WarmStartPrior(NM, 1, 42.5, 2.0)])
    update(p, CreativeConfig.from_indices(0, 1, 3), FactoredReward(1, 2, 3, 4))
    p.save(tmp_path / "policy.json")
    q = bandit.BanditPolicy.load(tmp_path / "policy.json")
    assert q == p
    d = p.to_dict()
    d["version"] = 99
    with pytest.raises(ValidationError):
        bandit.BanditPolicy.from_dict(d)


def _replay(updates, mode):
    """Rebuild the statistics from the update list alone."""
    out = {}
    for d_i, d in enumerate(DIMENSIONS):
        for a in range(arm_counts()[d_i]):
            xs = [(r.components[d_i] if mode is Mode.Factored else r.aggregate) / 100
                  for cfg, r in updates if cfg.indices[d_i] == a]
            out[(d, a)] = (len(xs), sum(xs) / len(xs) if xs else 0.0)
    return out


@settings(max_examples=60)
@given(st.lists(st.tuples(st.integers(0, 2), st.integers(0, 2), st.integers(0, 3),
                          st.lists(st.floats(0, 100), min_size=4, max_size=4)), max_size=30),
       st.sampled_from(list(Mode)))
def test_replay_equivalence(seq, mode):
    p = new_policy(mode=mode)
    ups = []
    for i, j, k, r in seq:
        cfg = CreativeConfig.from_indices(i, j, k)
        rew = FactoredReward(*r)
        update(p, cfg, rew)
        ups.append((cfg, rew))
    p.check()
    for (d, a), (n, mean) in _replay(ups, mode).items():
        assert p.per_dimension[d][a].pulls == n
        assert p.per_dimension[d][a].value == pytest.approx(mean, abs=1e-9)


@given(st.integers(0, 10_000))
def test_select_is_per_dimension_argmax(seed):
    rng = random.Random(seed)
    p = new_policy(rng.uniform(0.1, 3))
    for d in DIMENSIONS:
        for s in p.per_dimension[d]:
            s.pulls = float(rng.randint(0, 5))
            s.value = rng.random()
        p.total_pulls[d] = sum(s.pulls for s in p.per_dimension[d])
    c = p.exploration_constant
    want = []
    for d in DIMENSIONS:
        idx = [ucb_oracle(s.value, s.pulls, p.total_pulls[d], c) for s in p.per_dimension[d]]
        want.append(idx.index(max(idx)))
    assert select(p).indices == tuple(want)
