"""Inter-rater agreement and judge-versus-human correlation statistics.

Ratings matrices are raters x items; ``None`` or NaN marks a missing rating.
"""

from __future__ import annotations

import enum
import itertools
import math
from typing import Sequence

import numpy as np
from scipy import stats

from .errors import ValidationError

LIKERT = (1, 2, 3, 4, 5)


class Metric(enum.Enum):
    Nominal = "Nominal"
    Ordinal = "Ordinal"
    Interval = "Interval"


def as_matrix(m) -> np.ndarray:
    """Float array with NaN for missing entries."""
    rows = [[math.nan if v is None else float(v) for v in row] for row in m]
    if not rows or len({len(r) for r in rows}) != 1:
        raise ValidationError("ratings matrix must be a non-empty rectangular raters x items grid")
    return np.array(rows, dtype=float)


def check_likert(m) -> np.ndarray:
    a = as_matrix(m)
    present = a[~np.isnan(a)]
    bad = present[~np.isin(present, LIKERT)]
    if bad.size:
        raise ValidationError(f"ratings must be integers 1..5 or missing; found {bad[0]:g}")
    return a


def judge_to_likert(score: float) -> float:
    """Map a 0-100 judge score onto the 1-5 scale (affine, s/25 + 1)."""
    return score / 25.0 + 1.0


def _delta2(values: np.ndarray, counts: np.ndarray, metric: Metric) -> np.ndarray:
    c = values[:, None]
    k = values[None, :]
    if metric is Metric.Nominal:
        return (c != k).astype(float)
    if metric is Metric.Interval:
        return (c - k) ** 2
    cum = np.concatenate([[0.0], np.cumsum(counts)])
    n = len(values)
    d = np.zeros((n, n))
    for i in range(n):
        for j in range(n):
            lo, hi = min(i, j), max(i, j)
            d[i, j] = (cum[hi + 1] - cum[lo] - (counts[i] + counts[j]) / 2.0) ** 2
    return d


def coincidence_matrix(m) -> tuple[np.ndarray, np.ndarray]:
    """Distinct values and their coincidence matrix over pairable units."""
    a = as_matrix(m)
    values = np.unique(a[~np.isnan(a)])
    pos = {v: i for i, v in enumerate(values)}
    o = np.zeros((len(values), len(values)))
    for u in range(a.shape[1]):
        col = a[:, u]
        col = col[~np.isnan(col)]
        mu = len(col)
        if mu < 2:
            continue
        for i in range(mu):
            for j in range(mu):
                if i != j:
                    o[pos[col[i]], pos[col[j]]] += 1.0 / (mu - 1)
    return values, o


def krippendorff_alpha(m, metric: Metric | str = Metric.Interval) -> float:
    metric = Metric(metric)
    a = as_matrix(m)
    pairable = int(((~np.isnan(a)).sum(axis=0) >= 2).sum())
    if pairable < 2:
        raise ValidationError(f"alpha needs at least 2 items rated by 2+ raters; got {pairable}")
    values, o = coincidence_matrix(a)
    n_c = o.sum(axis=1)
    n = n_c.sum()
    d2 = _delta2(values, n_c, metric)
    d_o = (o * d2).sum()
    d_e = (np.outer(n_c, n_c) * d2).sum()
    if d_e == 0:
        raise ValidationError("alpha is undefined: no variation in the pairable ratings")
    return float(1.0 - (n - 1.0) * d_o / d_e)


def cohen_kappa(x: Sequence[float], y: Sequence[float]) -> float:
    """Unweighted Cohen's kappa of two equal-length label sequences.

    When both raters use one identical label throughout, chance agreement is 1
    and kappa is taken as 1.0 (perfect, if uninformative, agreement).
    """
    if len(x) != len(y) or not len(x):
        raise ValidationError("kappa needs two equal, non-empty sequences")
    n = len(x)
    labels = sorted(set(x) | set(y))
    p_o = sum(1 for a, b in zip(x, y) if a == b) / n
    p_e = sum((list(x).count(c) / n) * (list(y).count(c) / n) for c in labels)
    if p_e == 1.0:
        return 1.0
    return (p_o - p_e) / (1.0 - p_e)


def pairwise_kappa(m) -> float:
    """Mean Cohen's kappa over rater pairs, each on the items both rated."""
    a = as_matrix(m)
    if a.shape[0] < 2:
        raise ValidationError("kappa needs at least 2 raters")
    ks = []
    for i, j in itertools.combinations(range(a.shape[0]), 2):
        both = ~np.isnan(a[i]) & ~np.isnan(a[j])
        if both.any():
            ks.append(cohen_kappa(a[i][both].tolist(), a[j][both].tolist()))
    if not ks:
        raise ValidationError("no pair of raters shares a rated item")
    return float(np.mean(ks))


def mean_opinion(m) -> np.ndarray:
    a = as_matrix(m)
    if np.isnan(a).all(axis=0).any():
        raise ValidationError("every item needs at least one rating for a mean opinion score")
    return np.nanmean(a, axis=0)


def mae(judge: Sequence[float], mos: Sequence[float], judge_scale: str = "likert") -> float:
    """Mean absolute error; ``judge_scale="0-100"`` maps judge scores to 1-5 first."""
    j, y = _pair(judge, mos)
    if judge_scale == "0-100":
        j = judge_to_likert(j)
    elif judge_scale != "likert":
        raise ValidationError(f"unknown judge scale {judge_scale!r}")
    return float(np.mean(np.abs(j - y)))


def _pair(x, y):
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.ndim != 1 or x.shape != y.shape or not len(x):
        raise ValidationError(f"need two equal non-empty score lists; got lengths {len(x)} and {len(y)}")
    return x, y


def correlation_suite(judge: Sequence[float], mos: Sequence[float], judge_scale: str = "0-100") -> dict[str, float]:
    """Pearson r, Spearman rho (average ranks for ties), and MAE on the 1-5 scale."""
    j, y = _pair(judge, mos)
    if len(j) < 2 or np.ptp(j) == 0 or np.ptp(y) == 0:
        raise ValidationError("correlation is undefined for fewer than 2 items or a constant list")
    r = stats.pearsonr(j, y).statistic
    rho = stats.spearmanr(j, y).statistic
    clamp = lambda v: float(min(1.0, max(-1.0, v)))  # noqa: E731
    return {"pearson": clamp(r), "spearman": clamp(rho), "mae": mae(j, y, judge_scale)}
