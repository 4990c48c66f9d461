import numpy as np
import pytest

from framelab.errors import BadContraction, DepthCap, DuplicateDigits, UnsupportedLambda
from framelab.self_similar import (
    NOT_TILE_CONTRACTION,
    SINGULAR,
    TILE,
    attractor_cover,
    bernoulli_density_estimate,
    bernoulli_ifs,
    cell_masses,
    empirical_mass,
    ifs_density_estimate,
    lemma41_check,
    make_ifs,
    mass_decay_table,
    mass_near_zero,
    recursion_threshold,
    sample_measure,
    self_similarity_residuals,
    sorted_sample,
    tile_verdict,
    word_points,
)

CANTOR = make_ifs(1 / 3, [0.0, 2 / 3])


# ---------- construction ----------
def test_make_ifs_examples():
    assert make_ifs(0.5, [0, 0.5]).attractor_hull == (0.0, 1.0)
    assert CANTOR.attractor_hull == pytest.approx((0.0, 1.0))
    b = bernoulli_ifs(0.7)
    assert b.digits == pytest.approx((0.0, 0.3))
    assert b.hull_length == pytest.approx(1.0)


def test_digits_are_normalized():
    ifs = make_ifs(0.5, [1.5, 1.0])
    assert ifs.digits == (0.0, 0.5)
    assert ifs.ell == 2
    assert hash(ifs) == hash(make_ifs(0.5, [0.0, 0.5]))


@pytest.mark.parametrize("lam", [0.0, 1.0, -0.5, 1.5])
def test_bad_contraction(lam):
    with pytest.raises(BadContraction):
        make_ifs(lam, [0, 1])


def test_digit_errors():
    with pytest.raises(DuplicateDigits):
        make_ifs(0.5, [0, 0.5, 0.5])
    with pytest.raises(ValueError):
        make_ifs(0.5, [0])


# ---------- covers ----------
def test_word_points():
    assert np.allclose(np.sort(word_points(CANTOR, 2)), [0, 2 / 9, 2 / 3, 8 / 9])
    with pytest.raises(DepthCap):
        word_points(CANTOR, 10, word_cap=512)


def test_cover_bernoulli_half():
    cover = attractor_cover(bernoulli_ifs(0.5), 10)
    assert np.allclose(cover.intervals, [[0.0, 1.0]])
    assert cover.lebesgue_est == pytest.approx(1.0)


def test_cover_cantor():
    cover = attractor_cover(CANTOR, 6)
    assert len(cover.intervals) == 2**6
    assert cover.lebesgue_est == pytest.approx((2 / 3) ** 6)
    assert list(cover.to_frame().columns) == ["left", "right"]


def test_cover_overlapping_digits():
    cover = attractor_cover(make_ifs(0.5, [0, 1]), 10)
    assert np.allclose(cover.intervals, [[0.0, 2.0]])
    assert cover.lebesgue_est == pytest.approx(2.0)


def test_cover_length_does_not_grow():
    lengths = [attractor_cover(bernoulli_ifs(0.45), d).lebesgue_est for d in range(1, 12)]
    assert all(b <= a + 1e-12 for a, b in zip(lengths, lengths[1:]))


def test_cell_masses_sum_to_one():
    masses = cell_masses(bernoulli_ifs(0.7), np.linspace(0, 1, 33), 12)
    assert masses.sum() == pytest.approx(1.0)
    assert np.all(masses >= 0)


# ---------- sampling ----------
def test_sampling_is_deterministic():
    ifs = bernoulli_ifs(0.7)
    assert np.array_equal(sample_measure(ifs, 1000, 30, 4), sample_measure(ifs, 1000, 30, 4))
    assert not np.array_equal(sample_measure(ifs, 1000, 30, 4), sample_measure(ifs, 1000, 30, 5))


def test_bernoulli_half_is_uniform():
    points = sorted_sample(bernoulli_ifs(0.5), 100000, 48, 1)
    sigma = np.sqrt(0.25 * 0.75 / len(points))
    assert abs(empirical_mass(points, 0.0, 0.25) - 0.25) <= 4 * sigma
    assert empirical_mass(points, 0.0, 1.0) == 1.0
    assert not points.flags.writeable


def test_cantor_gap_is_empty():
    points = sorted_sample(CANTOR, 100000, 48, 1)
    assert empirical_mass(points, 0.34, 0.66) == 0.0


# ---------- mass near zero ----------
def test_recursion_thresholds():
    assert recursion_threshold(bernoulli_ifs(0.7)) == 4
    assert recursion_threshold(bernoulli_ifs(0.5)) == 2
    assert recursion_threshold(CANTOR) == 1


def test_mass_decay_is_exact_by_recursion():
    table = mass_decay_table(bernoulli_ifs(0.7), range(4, 11), n_samples=100000)
    assert table["by_recursion"].all()
    assert (table["ratio"] == 0.5).all()
    assert {"count_mc", "ratio_mc", "sigma_mc"} <= set(table.columns)


def test_mass_near_zero_uniform():
    mass = mass_near_zero(bernoulli_ifs(0.5), 3, n_samples=100000)
    assert mass == pytest.approx(0.125, abs=4 * np.sqrt(0.25 * 0.75 / 100000) / 2)


def test_cantor_halves_per_level():
    table = mass_decay_table(CANTOR, range(1, 6), n_samples=100000)
    assert (table["ratio"] == 0.5).all()


@pytest.mark.slow
def test_mass_decay_monte_carlo_matches_recursion():
    table = mass_decay_table(bernoulli_ifs(0.7), range(4, 11), n_samples=1000000)
    z = (table["ratio_mc"] - 0.5).abs() / table["sigma_mc"]
    assert (z <= 4).all()


# ---------- lower density and tiles ----------
def test_lower_density_of_full_intervals():
    for ifs in (bernoulli_ifs(0.5), make_ifs(0.5, [0, 1])):
        check = lemma41_check(ifs, 8, 12)
        assert check.c_est == pytest.approx(1.0)
        assert not check.vacuous


def test_lower_density_of_cantor_is_vacuous():
    assert lemma41_check(CANTOR, 5, 12).vacuous


@pytest.mark.parametrize("lam,digits,expected", [
    (0.5, [0, 0.5], TILE),
    (1 / 3, [0, 2 / 3], SINGULAR),
    (0.5, [0, 1], TILE),
    (0.45, [0, 0.55], SINGULAR),
    (0.7, [0, 0.3], NOT_TILE_CONTRACTION),
])
def test_tile_verdicts(lam, digits, expected):
    assert tile_verdict(make_ifs(lam, digits), 12).verdict == expected


def test_tile_verdict_regime_flag():
    bernoulli = bernoulli_ifs(0.7)
    from_cover = tile_verdict(bernoulli, 12)
    assert from_cover.evidence["regime_source"] == "cover"

    singular = tile_verdict(bernoulli, 12, absolutely_continuous=False)
    assert singular.verdict == SINGULAR
    assert singular.evidence["regime_source"] == "flag"

    mismatch = tile_verdict(bernoulli, 12, absolutely_continuous=True)
    assert mismatch.verdict == NOT_TILE_CONTRACTION
    assert mismatch.evidence["regime_source"] == "flag"

    assert tile_verdict(make_ifs(0.5, [0, 0.5]), 12, absolutely_continuous=True).verdict == TILE
    # lambda < 1/ell is singular whatever the flag says
    assert tile_verdict(CANTOR, 12, absolutely_continuous=True).verdict == SINGULAR


# ---------- density estimates ----------
def test_bernoulli_half_density_is_one():
    table = bernoulli_density_estimate(0.5, [0.25, 0.5, 0.75], 64)
    assert np.allclose(table["density"], 1.0, atol=0.1)
    assert np.allclose(table["imag"], 0.0, atol=1e-8)


@pytest.mark.parametrize("lam,digits", [(0.5, [0, 1]), (0.5, [0, 0.5]), (1 / 3, [0, 1, 2])])
def test_tile_density_is_flat(lam, digits):
    ifs = make_ifs(lam, digits)
    H = ifs.hull_length
    x = np.sort(np.random.default_rng(41).uniform(0.1 * H, 0.9 * H, 50))
    table = ifs_density_estimate(ifs, x, 64)
    # density of mu rescaled to the unit interval
    assert np.all(np.abs(H * table["density"] - 1.0) <= 0.15)


def test_density_estimate_integrates_to_one():
    x = np.linspace(0, 1, 2001)
    table = ifs_density_estimate(bernoulli_ifs(0.7), x, 64)
    assert np.trapezoid(table["density"], x) == pytest.approx(1.0, abs=0.02)


def test_density_estimate_guards():
    with pytest.raises(UnsupportedLambda):
        bernoulli_density_estimate(0.3, [0.5], 16)
    with pytest.raises(ValueError):
        ifs_density_estimate(bernoulli_ifs(0.7), [0.5], 4)


def test_self_similarity_identity():
    rng = np.random.default_rng(31)
    lows = rng.uniform(0, 0.9, 20)
    intervals = [(lo, lo + w) for lo, w in zip(lows, rng.uniform(0.01, 0.3, 20))]
    table = self_similarity_residuals(bernoulli_ifs(0.7), intervals, n_samples=50000, seed=3)
    assert len(table) == 20
    assert (table["residual"].abs() <= 4 * table["sigma"] + 1e-12).all()


def test_self_similarity_flags_a_wrong_sampler(monkeypatch):
    def uniform_sample(ifs, n_samples, depth, seed, batch=None):
        return np.random.default_rng(seed).uniform(0.0, 1.0, n_samples)

    intervals = [(0.34, 0.66), (0.0, 0.2)]
    table = self_similarity_residuals(CANTOR, intervals, n_samples=20000, seed=5)
    assert (table["residual"].abs() <= 4 * table["sigma"] + 1e-12).all()
    assert table.loc[0, "mu_E"] == 0.0

    monkeypatch.setattr("framelab.self_similar.sample_measure", uniform_sample)
    table = self_similarity_residuals(CANTOR, intervals, n_samples=20000, seed=5)
    assert table.loc[0, "rhs"] == 0.0
    assert table.loc[0, "residual"] > 4 * table.loc[0, "sigma"]
