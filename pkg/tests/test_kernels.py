import json
import math

import numpy as np
import pytest

from vidstory import _accel
from vidstory.backends import SimEnvironment
from vidstory.backends.sim import sim_reward
from vidstory.creative_space import CreativeConfig
from vidstory.errors import ConfigError
from vidstory.experiment import POLICIES, cumulative_best, random_choices, replay_object_level, run_experiment
from vidstory.kernels import simulate_ucb

ENGINES = ["numpy", "python"] + (["numba"] if _accel.HAS_NUMBA else [])


@pytest.fixture
def adv():
    return SimEnvironment(((45, 60, 82), (55, 80, 40), (35, 84, 50, 65)), 0, 5.0,
                          aggregate_weights=(0.5, 0.5, -0.5), aggregate_offset=50)


@pytest.mark.parametrize("engine", ENGINES)
@pytest.mark.parametrize("policy", ["mab", "mab-cold", "scalar"])
def test_kernel_matches_object_loop(env, adv, engine, policy):
    for e in (env, adv):
        rep = run_experiment(e, policy, T=12, repeats=5, seed=11, engine=engine)
        for r in range(5):
            pol, trace = replay_object_level(e, policy, 12, 11 + r)
            aggs = [rew.aggregate for _, rew in trace]
            assert rep["repeats"] == 5
            single = run_experiment(e, policy, T=12, repeats=1, seed=11 + r, engine=engine)
            assert single["mean_cumulative_best"] == cumulative_best(aggs)


def test_engines_bit_identical(env):
    rng = np.random.default_rng(0)
    R, T = 50, 15
    tv = np.array([[45, 60, 82, 0], [55, 80, 40, 0], [35, 84, 50, 65]], float)
    noise = rng.standard_normal((R, T, 3))
    pv = rng.uniform(0, 1, (R, 3, 4))
    pp = np.where(np.arange(4)[None, None, :] < np.array([3, 3, 4])[None, :, None], rng.integers(0, 3, (R, 3, 4)), 0)
    outs = [simulate_ucb(tv, [3, 3, 4], noise, pv, pp.astype(float), 1.3, False, 2.0, 5.0, engine=e) for e in ENGINES]
    for o in outs[1:]:
        for k in o:
            assert np.array_equal(o[k], outs[0][k]), k


def test_padding_never_selected():
    tv = np.array([[0, 0, 0, 100], [0, 0, 0, 100], [0, 0, 0, 100]], float)
    out = simulate_ucb(tv, [3, 3, 4], np.zeros((3, 8, 3)), np.zeros((3, 3, 4)), np.zeros((3, 3, 4)), engine="numpy")
    assert out["chosen"][..., :2].max() <= 2


def test_zero_noise_reaches_optimum():
    env = SimEnvironment(((45, 60, 82), (55, 80, 40), (35, 84, 50, 65)), 0, 0.0)
    rep = run_experiment(env, "mab", T=10, repeats=3)
    cb = rep["mean_cumulative_best"]
    assert all(b >= a for a, b in zip(cb, cb[1:]))
    assert cb[-1] == pytest.approx(rep["optimum"]["aggregate"])


def test_random_policy_uniform():
    ch = random_choices(10, 1000, 5)
    for d, n in enumerate((3, 3, 4)):
        counts = np.bincount(ch[..., d].ravel(), minlength=n)
        N, p = ch[..., d].size, 1 / n
        sd = math.sqrt(N * p * (1 - p))
        assert np.all(np.abs(counts - N * p) <= 3 * sd), counts


def test_scalar_worse_on_adversarial(adv):
    f = run_experiment(adv, "mab", T=20, repeats=100)
    s = run_experiment(adv, "scalar", T=20, repeats=100)
    assert f["best_arm_accuracy"]["mean"] > s["best_arm_accuracy"]["mean"]


def test_report_schema(env):
    rep = run_experiment(env, "random", T=4, repeats=3, seed=9)
    assert set(rep) >= {"policy", "T", "repeats", "seed", "env_hash", "mean_cumulative_best", "best_arm_accuracy"}
    assert rep["env_hash"] == env.digest()
    json.dumps(rep)
    assert rep == run_experiment(env, "random", T=4, repeats=3, seed=9)


def test_unknown_policy(env):
    with pytest.raises(ConfigError):
        run_experiment(env, "greedy")
    assert set(POLICIES) == {"mab", "mab-cold", "random", "scalar"}


def test_env_flag(monkeypatch):
    monkeypatch.setenv("VIDSTORY_NUMBA", "0")
    assert not _accel.numba_requested()
    monkeypatch.setenv("VIDSTORY_NUMBA", "1")
    assert _accel.numba_requested()


def test_object_replay_uses_sim_reward(env):
    pol, trace = replay_object_level(env, "mab-cold", 3, 2)
    assert trace[0][0] == CreativeConfig.from_indices(0, 0, 0)
    assert trace[0][1] == sim_reward(trace[0][0], env.with_seed(2), 0)


def test_benchmark_script_runs(monkeypatch, capsys):
    import runpy
    import sys
    from pathlib import Path

    script = Path(__file__).resolve().parents[1] / "benchmarks" / "bench_simulate.py"
    monkeypatch.setattr(sys, "argv", ["bench_simulate.py", "--repeats", "20", "-T", "5", "--runs", "1"])
    runpy.run_path(str(script), run_name="__main__")
    out = capsys.readouterr().out
    assert "numpy:" in out
    if _accel.HAS_NUMBA:
        assert "outputs identical: True" in out
