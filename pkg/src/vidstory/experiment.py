"""Monte-Carlo comparison of search policies against a simulated environment.

Policies:

* ``mab``: factored UCB with warm-start priors
* ``mab-cold``: factored UCB from empty statistics
* ``scalar``: UCB with warm start, every dimension credited with the aggregate
* ``random``: uniform random configuration each iteration

Repeat ``r`` uses environment seed ``seed + r`` for reward noise, prior noise
and random draws, so a repeat is reproducible on its own.
"""

from __future__ import annotations

import math

import numpy as np

from . import _accel, bandit
from .backends.sim import STREAM_RANDOM, STREAM_REWARD, SimEnvironment, sim_prior_scores, sim_reward, standard_normals
from .creative_space import DIMENSIONS, CreativeConfig, all_configs, arm_counts
from .errors import ConfigError
from .kernels import simulate_ucb

POLICIES = ("mab", "mab-cold", "random", "scalar")


def _check(policy, T, repeats):
    if policy not in POLICIES:
        raise ConfigError(f"unknown policy {policy!r}; choose from {', '.join(POLICIES)}")
    if T < 1 or repeats < 1:
        raise ConfigError("T and repeats must be >= 1")


def reward_noise(env: SimEnvironment, T: int, repeats: int, seed: int) -> np.ndarray:
    return np.stack([np.stack([standard_normals(seed + r, STREAM_REWARD, t, 3) for t in range(T)])
                     for r in range(repeats)])


def random_choices(T: int, repeats: int, seed: int) -> np.ndarray:
    counts = arm_counts()
    out = np.zeros((repeats, T, 3), dtype=np.int64)
    for r in range(repeats):
        for t in range(T):
            key = ((seed + r) << 64) | (STREAM_RANDOM << 32) | t
            g = np.random.Generator(np.random.Philox(key=key))
            out[r, t] = [g.integers(n) for n in counts]
    return out


def _padded(rows, fill=0.0):
    A = max(arm_counts())
    return np.array([list(row) + [fill] * (A - len(row)) for row in rows], dtype=np.float64)


def _priors(env, repeats, seed, prior_sigma, prior_weight, warm):
    A = max(arm_counts())
    pv = np.zeros((repeats, 3, A))
    pp = np.zeros((repeats, 3, A))
    if warm:
        mask = _padded([[1.0] * n for n in arm_counts()])
        for r in range(repeats):
            pv[r] = _padded(sim_prior_scores(env, seed + r, prior_sigma)) / 100.0
            pp[r] = mask * prior_weight
    return pv, pp


def _noiseless_table(env: SimEnvironment) -> np.ndarray:
    table = np.zeros(arm_counts())
    for cfg in all_configs():
        table[cfg.indices] = env.aggregate_of(env.expected_components(cfg))
    return table


def run_experiment(env: SimEnvironment, policy: str = "mab", T: int = 10, repeats: int = 200, seed: int = 0,
                   c: float = bandit.DEFAULT_EXPLORATION, prior_sigma: float = 10.0,
                   prior_weight: float = bandit.DEFAULT_PRIOR_WEIGHT, engine: str | None = None) -> dict:
    """Per-iteration mean cumulative-best aggregate and final best-arm accuracy."""
    _check(policy, T, repeats)
    noise = reward_noise(env, T, repeats, seed)
    tv = _padded(env.true_values)
    n_arms = np.array(arm_counts())
    w = env.aggregate_weights
    if policy == "random":
        chosen = random_choices(T, repeats, seed)
        picked = tv[np.arange(3)[None, None, :], chosen]
        comps = np.clip(picked + env.context_modifier + noise * env.noise_sigma, 0.0, 100.0)
        if w is None:
            agg = (comps[..., 0] + comps[..., 1] + comps[..., 2]) / 3.0
        else:
            agg = env.aggregate_offset + w[0] * comps[..., 0] + w[1] * comps[..., 1] + w[2] * comps[..., 2]
        agg = np.clip(agg, 0.0, 100.0)
        # identification for random search: highest mean observed component among tried arms
        A = tv.shape[1]
        sums = np.zeros((repeats, 3, A))
        cnt = np.zeros((repeats, 3, A))
        for d in range(3):
            for a in range(A):
                hit = chosen[:, :, d] == a
                sums[:, d, a] = np.where(hit, comps[:, :, d], 0.0).sum(axis=1)
                cnt[:, d, a] = hit.sum(axis=1)
        with np.errstate(invalid="ignore", divide="ignore"):
            est = np.where(cnt > 0, sums / np.maximum(cnt, 1), -np.inf)
        engine_used = "numpy"
    else:
        warm = policy in ("mab", "scalar")
        pv, pp = _priors(env, repeats, seed, prior_sigma, prior_weight, warm)
        engine_used = engine or _accel.engine_name()
        out = simulate_ucb(tv, n_arms, noise, pv, pp, c, policy == "scalar", env.context_modifier,
                           env.noise_sigma, w, env.aggregate_offset, engine_used)
        chosen, comps, agg = out["chosen"], out["components"], out["aggregate"]
        est = np.where(out["pulls"] > 0, out["values"], -np.inf)
    best_true = np.array(env.best_arms())
    identified = np.argmax(est, axis=2)  # (R, 3)
    acc = (identified == best_true[None, :]).mean(axis=0)
    table = _noiseless_table(env)
    noiseless = table[chosen[..., 0], chosen[..., 1], chosen[..., 2]]
    opt_cfg, opt = env.noiseless_optimum()
    counts = {d.key: np.bincount(chosen[..., i].ravel(), minlength=n).tolist()
              for i, (d, n) in enumerate(zip(DIMENSIONS, arm_counts()))}
    return {
        "policy": policy,
        "T": T,
        "repeats": repeats,
        "seed": seed,
        "env_hash": env.digest(),
        "engine": engine_used,
        "exploration_constant": c,
        "optimum": {"config": opt_cfg.to_dict(), "aggregate": opt},
        "mean_cumulative_best": np.maximum.accumulate(agg, axis=1).mean(axis=0).tolist(),
        "mean_cumulative_best_noiseless": np.maximum.accumulate(noiseless, axis=1).mean(axis=0).tolist(),
        "best_arm_accuracy": {**{d.key: float(a) for d, a in zip(DIMENSIONS, acc)}, "mean": float(acc.mean())},
        "selection_counts": counts,
    }


def replay_object_level(env: SimEnvironment, policy: str, T: int, seed: int, c: float = bandit.DEFAULT_EXPLORATION,
                        prior_sigma: float = 10.0, prior_weight: float = bandit.DEFAULT_PRIOR_WEIGHT):
    """One repeat through :mod:`vidstory.bandit` objects; the kernels must agree with this."""
    _check(policy, T, 1)
    if policy == "random":
        raise ConfigError("random search has no policy object")
    env_r = env.with_seed(seed)
    pol = bandit.new_policy(c, bandit.Mode.Scalar if policy == "scalar" else bandit.Mode.Factored)
    if policy != "mab-cold":
        priors = [bandit.WarmStartPrior(d, i, s, prior_weight)
                  for d, row in zip(DIMENSIONS, sim_prior_scores(env, seed, prior_sigma)) for i, s in enumerate(row)]
        bandit.warm_start(pol, priors)
    trace = []
    for t in range(T):
        cfg = bandit.select(pol)
        reward = sim_reward(cfg, env_r, t)
        bandit.update(pol, cfg, reward)
        trace.append((cfg, reward))
    return pol, trace


def cumulative_best(values) -> list[float]:
    out, best = [], -math.inf
    for v in values:
        best = max(best, v)
        out.append(best)
    return out


__all__ = ["POLICIES", "CreativeConfig", "cumulative_best", "random_choices", "replay_object_level",
           "reward_noise", "run_experiment"]
