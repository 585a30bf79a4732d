import random

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import stats

from vidstory.agreement import (
    Metric,
    check_likert,
    cohen_kappa,
    correlation_suite,
    krippendorff_alpha,
    mae,
    pairwise_kappa,
)
from vidstory.errors import ValidationError

import oracles


def random_matrix(rng, raters=None, items=None, missing=0.15):
    r = raters or rng.randint(2, 5)
    n = items or rng.randint(3, 8)
    while True:
        m = [[rng.randint(1, 5) if rng.random() > missing else None for _ in range(n)] for _ in range(r)]
        cols = [[row[j] for row in m if row[j] is not None] for j in range(n)]
        vals = {v for c in cols if len(c) >= 2 for v in c}
        if sum(len(c) >= 2 for c in cols) >= 2 and len(vals) >= 2:
            return m


def test_unanimous_alpha_is_one():
    m = [[1, 2, 3, 4, 5], [1, 2, 3, 4, 5], [1, 2, 3, 4, 5]]
    for metric in Metric:
        assert krippendorff_alpha(m, metric) == pytest.approx(1.0)


def test_constant_matrix_undefined():
    with pytest.raises(ValidationError):
        krippendorff_alpha([[3, 3], [3, 3]])


def test_insufficient_data():
    with pytest.raises(ValidationError):
        krippendorff_alpha([[1, 2, 3]])
    with pytest.raises(ValidationError):
        krippendorff_alpha([[1, None], [2, None]])


def test_two_by_two_interval():
    # ratings (1,5) and (5,1): four values 1,5,5,1; every unit disagrees fully
    assert krippendorff_alpha([[1, 5], [5, 1]], "Interval") == pytest.approx(oracles.alpha([[1, 5], [5, 1]]))
    assert krippendorff_alpha([[1, 5], [5, 1]], "Interval") == pytest.approx(-0.5)


@pytest.mark.parametrize("metric", list(Metric))
def test_alpha_matches_oracle(metric):
    rng = random.Random(f"alpha-{metric.value}")
    for _ in range(30):
        m = random_matrix(rng)
        assert krippendorff_alpha(m, metric) == pytest.approx(oracles.alpha(m, metric.value.lower()), abs=1e-9)


def test_kappa_examples():
    assert pairwise_kappa([[1, 2, 3], [1, 2, 3]]) == 1.0
    assert cohen_kappa([1, 2, 3, 4], [3, 3, 3, 3]) == pytest.approx(0.0)
    # confusion [[2,1],[0,1]]: p_o = 3/4, p_e = 3/4*2/4 + 1/4*2/4 = 1/2 -> 0.5
    assert cohen_kappa([1, 1, 1, 2], [1, 1, 2, 2]) == pytest.approx(0.5)


def test_kappa_three_raters_mean_of_pairs():
    m = [[1, 2, 3, 3], [1, 2, 2, 3], [2, 2, 3, 1]]
    want = np.mean([cohen_kappa(m[0], m[1]), cohen_kappa(m[0], m[2]), cohen_kappa(m[1], m[2])])
    assert pairwise_kappa(m) == pytest.approx(want)


def test_kappa_needs_overlap():
    with pytest.raises(ValidationError):
        pairwise_kappa([[1, None], [None, 2]])
    with pytest.raises(ValidationError):
        pairwise_kappa([[1, 2]])


def test_kappa_matches_oracle():
    rng = random.Random("kappa")
    for _ in range(50):
        m = random_matrix(rng)
        assert pairwise_kappa(m) == pytest.approx(oracles.mean_kappa(m), abs=1e-9)


@settings(max_examples=40)
@given(st.data())
def test_invariant_under_permutation(data):
    rng = random.Random(data.draw(st.integers(0, 10_000)))
    m = random_matrix(rng)
    rows = data.draw(st.permutations(range(len(m))))
    cols = data.draw(st.permutations(range(len(m[0]))))
    p = [[m[r][c] for c in cols] for r in rows]
    assert krippendorff_alpha(p) == pytest.approx(krippendorff_alpha(m), abs=1e-9)
    assert pairwise_kappa(p) == pytest.approx(pairwise_kappa(m), abs=1e-9)
    assert -1 <= pairwise_kappa(m) <= 1


def test_correlation_examples():
    x = [10, 40, 55, 70, 90]
    r = correlation_suite(x, x, judge_scale="likert")
    assert r == {"pearson": pytest.approx(1.0), "spearman": pytest.approx(1.0), "mae": 0}
    assert correlation_suite(x, x[::-1])["spearman"] == pytest.approx(-1.0)
    assert mae([1, 2, 3], [2, 2, 2]) == pytest.approx(2 / 3)
    assert mae([0, 100], [1, 5], "0-100") == 0
    with pytest.raises(ValidationError):
        correlation_suite([1, 2], [1, 2, 3])
    with pytest.raises(ValidationError):
        correlation_suite([1, 2, 3], [2, 2, 2])


def test_correlations_match_oracles():
    rng = random.Random("corr")
    for _ in range(50):
        n = rng.randint(3, 12)
        j = [rng.choice([rng.randint(0, 100), rng.uniform(0, 100)]) for _ in range(n)]
        y = [rng.randint(1, 5) for _ in range(n)]
        if len(set(j)) < 2 or len(set(y)) < 2:
            continue
        got = correlation_suite(j, y)
        assert got["pearson"] == pytest.approx(oracles.pearson(j, y), abs=1e-9)
        assert got["spearman"] == pytest.approx(oracles.spearman(j, y), abs=1e-9)
        assert got["mae"] == pytest.approx(oracles.mae(j, y), abs=1e-9)
        ranks_r = oracles.pearson(list(stats.rankdata(j)), list(stats.rankdata(y)))
        assert got["spearman"] == pytest.approx(ranks_r, abs=1e-9)


def test_likert_check():
    check_likert([[1, None, 5]])
    with pytest.raises(ValidationError):
        check_likert([[0, 3]])
    with pytest.raises(ValidationError):
        check_likert([[2.5, 3]])
