"""Batched UCB-versus-simulator kernels.

Both implementations replay the object-level loop (``bandit.select`` ->
``sim_reward`` -> ``bandit.update``) for ``R`` independent repeats at once
and produce bit-identical results to it. Arms are padded to a rectangular
(3, max_arms) grid; padded slots are never selected.

``simulate_ucb`` dispatches to the numba loop kernel or the numpy version
according to :data:`vidstory._accel.USE_NUMBA`.
"""

from __future__ import annotations

import math

import numpy as np

from . import _accel


def _ucb_loop(true_values, n_arms, noise, prior_values, prior_pulls, c, scalar, modifier, sigma,
              weights, offset, use_weights, chosen, comps, agg, values, pulls):
    R, T, D = noise.shape
    A = true_values.shape[1]
    totals = np.zeros(D)
    x = np.zeros(D)
    for r in range(R):
        for d in range(D):
            t_ = 0.0
            for a in range(A):
                values[r, d, a] = prior_values[r, d, a]
                pulls[r, d, a] = prior_pulls[r, d, a]
                t_ += prior_pulls[r, d, a]
            totals[d] = t_
        for t in range(T):
            for d in range(D):
                log_total = math.log(totals[d]) if totals[d] > 1.0 else 0.0
                best = 0
                best_idx = -math.inf
                for a in range(n_arms[d]):
                    n = pulls[r, d, a]
                    if n <= 0.0:
                        idx = math.inf
                    else:
                        idx = values[r, d, a] + c * math.sqrt(log_total / n)
                    if idx > best_idx:
                        best = a
                        best_idx = idx
                chosen[r, t, d] = best
                v = true_values[d, best] + modifier + noise[r, t, d] * sigma
                x[d] = min(max(v, 0.0), 100.0)
                comps[r, t, d] = x[d]
            if use_weights:
                g = offset + weights[0] * x[0] + weights[1] * x[1] + weights[2] * x[2]
            else:
                g = (x[0] + x[1] + x[2]) / 3.0
            g = min(max(g, 0.0), 100.0)
            agg[r, t] = g
            for d in range(D):
                a = chosen[r, t, d]
                target = g if scalar else x[d]
                n = pulls[r, d, a]
                values[r, d, a] = (values[r, d, a] * n + target / 100.0) / (n + 1.0)
                pulls[r, d, a] = n + 1.0
                totals[d] += 1.0


ucb_loop_python = _ucb_loop
ucb_loop_numba = _accel.njit(_ucb_loop)


def ucb_numpy(true_values, n_arms, noise, prior_values, prior_pulls, c, scalar, modifier, sigma,
              weights, offset, use_weights, chosen, comps, agg, values, pulls):
    """Vectorized over repeats; same arithmetic order as the loop kernel."""
    R, T, D = noise.shape
    A = true_values.shape[1]
    values[...] = prior_values
    pulls[...] = prior_pulls
    totals = np.zeros((R, D))
    for a in range(A):
        totals += prior_pulls[:, :, a]
    valid = np.arange(A)[None, :] < np.asarray(n_arms)[:, None]  # (D, A)
    rows = np.arange(R)
    for t in range(T):
        # np.log may differ from libm by an ulp; keep the scalar log for exact parity.
        log_total = np.array([[math.log(v) if v > 1.0 else 0.0 for v in row] for row in totals]).reshape(R, D)
        with np.errstate(divide="ignore", invalid="ignore"):
            bonus = c * np.sqrt(log_total[:, :, None] / pulls)
        idx = np.where(pulls <= 0.0, np.inf, values + bonus)
        idx = np.where(valid[None, :, :], idx, -np.inf)
        pick = np.argmax(idx, axis=2)  # first max wins ties
        chosen[:, t, :] = pick
        tv = true_values[np.arange(D)[None, :], pick]
        x = np.minimum(np.maximum(tv + modifier + noise[:, t, :] * sigma, 0.0), 100.0)
        comps[:, t, :] = x
        if use_weights:
            g = offset + weights[0] * x[:, 0] + weights[1] * x[:, 1] + weights[2] * x[:, 2]
        else:
            g = (x[:, 0] + x[:, 1] + x[:, 2]) / 3.0
        g = np.minimum(np.maximum(g, 0.0), 100.0)
        agg[:, t] = g
        target = np.repeat(g[:, None], D, axis=1) if scalar else x
        for d in range(D):
            a = pick[:, d]
            n = pulls[rows, d, a]
            values[rows, d, a] = (values[rows, d, a] * n + target[:, d] / 100.0) / (n + 1.0)
            pulls[rows, d, a] = n + 1.0
        totals += 1.0


def simulate_ucb(true_values, n_arms, noise, prior_values, prior_pulls, c=math.sqrt(2.0), scalar=False,
                 modifier=0.0, sigma=0.0, weights=None, offset=0.0, engine: str | None = None) -> dict:
    """Run batched UCB for ``noise.shape[0]`` repeats of ``noise.shape[1]`` steps.

    ``noise`` holds standard normals of shape (R, T, 3); ``prior_values`` are on
    the 0-1 scale. Returns chosen indices, components, aggregates and final
    arm statistics.
    """
    engine = engine or _accel.engine_name()
    tv = np.ascontiguousarray(true_values, dtype=np.float64)
    noise = np.ascontiguousarray(noise, dtype=np.float64)
    R, T, D = noise.shape
    A = tv.shape[1]
    n_arms = np.ascontiguousarray(n_arms, dtype=np.int64)
    pv = np.ascontiguousarray(np.broadcast_to(prior_values, (R, D, A)), dtype=np.float64)
    pp = np.ascontiguousarray(np.broadcast_to(prior_pulls, (R, D, A)), dtype=np.float64)
    use_weights = weights is not None
    w = np.ascontiguousarray(weights if use_weights else (0.0, 0.0, 0.0), dtype=np.float64)
    out = {
        "chosen": np.zeros((R, T, D), dtype=np.int64),
        "components": np.zeros((R, T, D)),
        "aggregate": np.zeros((R, T)),
        "values": np.zeros((R, D, A)),
        "pulls": np.zeros((R, D, A)),
    }
    fn = {"numba": ucb_loop_numba, "numpy": ucb_numpy, "python": ucb_loop_python}[engine]
    fn(tv, n_arms, noise, pv, pp, float(c), bool(scalar), float(modifier), float(sigma), w, float(offset),
       use_weights, out["chosen"], out["components"], out["aggregate"], out["values"], out["pulls"])
    return out
