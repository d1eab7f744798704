import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from eqaoa.fitness import (
    FitnessConfig,
    approximation_ratio,
    best_observed_cut,
    cvar_fitness,
    evaluate_angles,
    max_count_fitness,
    score_histogram,
    uniqueness_ratio,
)
from eqaoa.graph import generate_regular
from eqaoa.qsim import ShotHistogram

from reference import naive_cvar


def hist(counts: dict[int, int], n: int) -> ShotHistogram:
    return ShotHistogram(counts=counts, shots=sum(counts.values()), n=n)


def random_histogram(seed: int, n: int = 8, shots: int = 1000) -> ShotHistogram:
    rng = np.random.default_rng(seed)
    words = rng.integers(0, 1 << n, size=rng.integers(1, 60))
    counts: dict[int, int] = {}
    remaining = shots
    for w in words[:-1]:
        c = int(rng.integers(0, remaining + 1))
        if c:
            counts[int(w)] = counts.get(int(w), 0) + c
        remaining -= c
    counts[int(words[-1])] = counts.get(int(words[-1]), 0) + remaining
    return hist(counts, n)


def test_cvar_alpha_one_is_plain_mean(k4):
    h = random_histogram(0, n=4)
    cuts_mean = naive_cvar(h.counts, k4.edges, h.shots, 1.0)
    assert cvar_fitness(h, k4, 1.0) == pytest.approx(cuts_mean, abs=1e-12)


def test_cvar_two_level_split(k4):
    # word 0b0011 cuts 4 on K4, word 0 cuts 0; top half of shots is all 4s
    h = hist({0b0011: 5000, 0b0000: 5000}, 4)
    assert cvar_fitness(h, k4, 0.5) == 4.0


def test_cvar_one_over_shots_is_best_observed(k4):
    h = hist({0b0011: 1, 0b0000: 9999}, 4)
    assert cvar_fitness(h, k4, 1 / h.shots) == best_observed_cut(h, k4) == 4


def test_cvar_partial_tail(k4):
    # m = ceil(0.2 * 10) = 2 shots: one cut-4 and one cut-0 shot
    h = hist({0b0011: 1, 0b0000: 9}, 4)
    assert cvar_fitness(h, k4, 0.2) == 2.0


@given(seed=st.integers(0, 2**31))
@settings(max_examples=30, deadline=None)
def test_cvar_matches_expanded_reference(seed):
    g = generate_regular(8, 3, 0)
    h = random_histogram(seed, n=8)
    for alpha in (0.05, 0.15, 0.5, 1.0):
        assert cvar_fitness(h, g, alpha) == pytest.approx(
            naive_cvar(h.counts, g.edges, h.shots, alpha), abs=1e-12
        )


@given(seed=st.integers(0, 2**31))
@settings(max_examples=30, deadline=None)
def test_cvar_monotone_nonincreasing_in_alpha(seed):
    g = generate_regular(8, 3, 1)
    h = random_histogram(seed, n=8)
    grid = np.linspace(0.05, 1.0, 10)
    values = [cvar_fitness(h, g, a) for a in grid]
    assert all(a >= b - 1e-12 for a, b in zip(values, values[1:]))


@given(seed=st.integers(0, 2**31))
@settings(max_examples=30, deadline=None)
def test_cvar_bounded_by_best_cut_and_edges(seed):
    g = generate_regular(8, 3, 2)
    h = random_histogram(seed, n=8)
    c = cvar_fitness(h, g, 0.15)
    assert c <= best_observed_cut(h, g) <= g.edge_count


def test_cvar_alpha_validation(k4):
    h = hist({0: 10}, 4)
    for bad in (0.0, -0.1, 1.5):
        with pytest.raises(ValueError):
            cvar_fitness(h, k4, bad)


def test_empty_histogram_rejected(k4):
    empty = ShotHistogram(counts={}, shots=0, n=4)
    with pytest.raises(ValueError):
        cvar_fitness(empty, k4, 0.5)
    with pytest.raises(ValueError):
        max_count_fitness(empty, k4)


def test_max_count_single_word(k4):
    assert max_count_fitness(hist({0b0101: 700}, 4), k4) == 4.0


def test_max_count_modal_word(k4):
    assert max_count_fitness(hist({0b0011: 6000, 0b0000: 4000}, 4), k4) == 4.0


def test_max_count_tie_breaks_to_smallest_word(k4):
    assert max_count_fitness(hist({0b0000: 5000, 0b0011: 5000}, 4), k4) == 0.0


@given(seed=st.integers(0, 2**31))
@settings(max_examples=30, deadline=None)
def test_max_count_is_modal_words_cut(seed):
    g = generate_regular(8, 3, 3)
    h = random_histogram(seed, n=8)
    modal = min(h.counts, key=lambda w: (-h.counts[w], w))
    from reference import naive_cut_value

    assert max_count_fitness(h, g) == naive_cut_value(g.edges, modal)


def test_approximation_ratio():
    assert approximation_ratio(4.0, 4) == 1.0
    assert approximation_ratio(2.0, 4) == 0.5
    with pytest.raises(ValueError):
        approximation_ratio(1.0, 0)


def test_uniqueness_ratio_basics():
    assert uniqueness_ratio([2.0, 2.0, 2.0, 2.0], 4) == 0.25
    assert uniqueness_ratio([1.0, 2.0, 3.0, 4.0], 4) == 1.0
    assert uniqueness_ratio([1.0, 1.0, 2.0, 3.0], 4) == 0.75
    with pytest.raises(ValueError):
        uniqueness_ratio([], 0)
    with pytest.raises(ValueError):
        uniqueness_ratio([1.0], 4)


def test_uniqueness_rounds_before_dedup():
    # differences beyond the 12th decimal place do not count as distinct
    assert uniqueness_ratio([1.0, 1.0 + 1e-14, 2.0, 3.0], 4) == 0.75
    assert uniqueness_ratio([1.0, 1.0 + 1e-9, 2.0, 3.0], 4) == 1.0


def test_score_histogram_record(k4):
    h = hist({0b0011: 6000, 0b0000: 4000}, 4)
    rec = score_histogram(h, k4, FitnessConfig(mode="cvar", alpha=0.5, shots=10_000))
    assert rec.best_cut == 4
    assert rec.fitness == 4.0  # top 5000 shots are exactly the cut-4 ones
    assert rec.fitness <= rec.best_cut <= k4.edge_count
    assert rec.digest.distinct_words == 2
    assert rec.digest.modal_count == 6000
    assert rec.digest.mean_cut == pytest.approx(2.4)


def test_fitness_config_validation():
    with pytest.raises(ValueError):
        FitnessConfig(mode="other")
    with pytest.raises(ValueError):
        FitnessConfig(alpha=0.0)
    with pytest.raises(ValueError):
        FitnessConfig(shots=0)


def test_evaluate_angles_deterministic(k4):
    cfg = FitnessConfig(alpha=0.15, shots=2000)
    r1 = evaluate_angles(k4, np.array([0.4, 0.9, -0.2, 0.5]), cfg, np.random.default_rng(11))
    r2 = evaluate_angles(k4, np.array([0.4, 0.9, -0.2, 0.5]), cfg, np.random.default_rng(11))
    assert r1 == r2
