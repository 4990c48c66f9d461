import numpy as np
import pytest

from framelab.errors import DescriptorError, EmptyCell, JitterTooLarge, WindowTooSmall
from framelab.spectra import (
    beurling_density,
    cube_selector,
    dyadic,
    epsilon_for_frame,
    from_points,
    jittered_lattice,
    lattice,
    parse_spectrum,
    perturbation_constant,
    read_spectrum_csv,
    restrict,
    scaled,
    separation,
    union,
    write_spectrum_csv,
)


# ---------- generators ----------
def test_lattice_examples():
    assert np.array_equal(lattice(1, 0, (-5, 5)).points, np.arange(-5, 6))
    assert np.allclose(lattice(0.5, 0, (-1, 1)).points, [-1, -0.5, 0, 0.5, 1])
    assert np.allclose(lattice(2, 0.3, (0, 6)).points, [0.3, 2.3, 4.3])


def test_half_open_lattice():
    s = lattice(1, 0, (-3, 3), half_open=True)
    assert np.array_equal(s.points, np.arange(-3, 3))
    assert len(lattice(0.5, 0, (-128, 128), half_open=True)) == 512


def test_points_are_read_only():
    s = lattice(1, 0, (-3, 3))
    with pytest.raises(ValueError):
        s.points[0] = 10.0


def test_zero_jitter_is_lattice():
    assert np.array_equal(jittered_lattice(1, 0.0, 123, (-3, 3)).points, lattice(1, 0, (-3, 3)).points)


def test_jitter_stays_near_lattice():
    s = jittered_lattice(1, 0.4, 7, (-100, 100))
    assert len(s) == 201
    assert np.all(np.abs(s.points - np.round(s.points)) <= 0.4)
    assert "seed=7" in s.provenance


def test_jitter_is_deterministic_and_window_independent():
    wide = jittered_lattice(1, 0.3, 5, (-100, 100))
    narrow = jittered_lattice(1, 0.3, 5, (-10, 10))
    assert np.array_equal(jittered_lattice(1, 0.3, 5, (-100, 100)).points, wide.points)
    assert np.all(np.isin(narrow.points, wide.points))
    assert not np.array_equal(jittered_lattice(1, 0.3, 6, (-10, 10)).points, narrow.points)


def test_jitter_too_large():
    with pytest.raises(JitterTooLarge):
        jittered_lattice(1, 0.6, 7)


def test_union_scaled_restrict():
    u = union(lattice(1, 0, (-2, 2)), lattice(1, 1 / 3, (-2, 2)))
    assert len(u) == 5 + 4
    assert np.allclose(scaled(lattice(1, 0, (-2, 2)), 2).points, [-4, -2, 0, 2, 4])
    assert np.array_equal(restrict(lattice(1, 0, (-5, 5)), -1, 1).points, [-1, 0, 1])
    assert np.array_equal(restrict(lattice(1, 0, (-5, 5)), -1, 1, half_open=True).points, [-1, 0])


def test_restrict_keeps_whole_jitter_cells():
    s = jittered_lattice(1 / 1.2, 0.1, 7, (-160, 160), half_open=True)
    assert np.max(np.abs(s.points - s.anchors)) <= 0.1
    for half in (40, 80, 160):
        band = restrict(s, -half, half, half_open=True, whole_cells=True)
        assert len(band) == round(2.4 * half)
        assert np.all((band.anchors >= -half - 1e-9) & (band.anchors < half - 1e-9))
        assert band.window[0] <= band.points[0] and band.points[-1] <= band.window[1]
    # lattices carry no anchors and are cut by position
    plain = restrict(lattice(1, 0, (-5, 5)), -1, 1, half_open=True, whole_cells=True)
    assert plain.anchors is None
    assert np.array_equal(plain.points, [-1, 0])


def test_from_points_sorts_and_deduplicates():
    s = from_points([3.0, 1.0, 3.0, 2.0])
    assert np.array_equal(s.points, [1, 2, 3])
    assert s.window == (1.0, 3.0)
    with pytest.raises(ValueError):
        from_points([0.0, 5.0], window=(0, 1))


def test_csv_roundtrip(tmp_path):
    s = jittered_lattice(1, 0.2, 3, (-10, 10))
    path = write_spectrum_csv(s, tmp_path / "spectrum.csv")
    assert np.array_equal(read_spectrum_csv(path).points, s.points)


# ---------- descriptors ----------
def test_parse_spectrum_variants(tmp_path):
    assert len(parse_spectrum("lattice(1,0)", (-5, 5))) == 11
    assert len(parse_spectrum("lattice(1,0,window=[0,255])")) == 256
    assert len(parse_spectrum("lattice(1,0,half_open=True)", (-5, 5))) == 10
    assert len(parse_spectrum("points(0, 0.5, 2)")) == 3
    assert len(parse_spectrum("dyadic(5)")) == 6
    assert len(parse_spectrum("union(lattice(1,0), lattice(1,1/3))", (-2, 2))) == 9
    jitter = parse_spectrum("jitter(1, 0.4)", (-10, 10), seed=11)
    assert np.array_equal(jitter.points, jittered_lattice(1, 0.4, 11, (-10, 10)).points)
    assert np.array_equal(parse_spectrum("jitter(1, 0.4, seed=11)", (-10, 10)).points, jitter.points)
    path = tmp_path / "freqs.csv"
    path.write_text("frequency\n0\n1.5\n3\n", encoding="utf-8")
    assert np.array_equal(parse_spectrum(f"csv({path})").points, [0, 1.5, 3])


def test_parse_spectrum_errors():
    with pytest.raises(DescriptorError):
        parse_spectrum("spiral(1)")
    with pytest.raises(DescriptorError):
        parse_spectrum("lattice(1, 0, window=[0])")
    with pytest.raises(DescriptorError):
        parse_spectrum("lattice('a')")


# ---------- Beurling density ----------
def test_integer_lattice_density():
    report = beurling_density(lattice(1, 0, (-500, 500)), [100])
    assert report.d_plus_est == 1.0
    assert report.d_minus_est == 1.0
    assert report.separation_delta == 1.0


def test_scaled_lattice_density():
    report = beurling_density(lattice(2, 0, (-500, 500)), [50, 100])
    assert report.d_plus_est == pytest.approx(0.5)
    assert report.d_minus_est == pytest.approx(0.5)
    assert list(report.to_frame()["h"]) == [50.0, 100.0]


def test_union_density():
    s = union(lattice(1, 0, (-500, 500)), lattice(1, 1 / 3, (-500, 500)))
    report = beurling_density(s, [100])
    assert report.d_plus_est == pytest.approx(2.0)
    assert report.d_minus_est == pytest.approx(2.0)


def test_window_too_small():
    with pytest.raises(WindowTooSmall):
        beurling_density(lattice(1, 0, (-10, 10)), [11])


@pytest.mark.parametrize("s", [
    lattice(1, 0, (-200, 200)),
    lattice(0.7, 0.1, (-200, 200)),
    jittered_lattice(1, 0.45, 2, (-200, 200)),
    jittered_lattice(1 / 1.2, 0.1, 9, (-200, 200)),
    union(lattice(1, 0, (-200, 200)), jittered_lattice(2, 0.9, 4, (-200, 200))),
])
def test_lower_density_below_upper(s):
    report = beurling_density(s, [10, 40, 80])
    assert all(lo <= hi for lo, hi in zip(report.inf_counts, report.sup_counts))


# ---------- separation and selection ----------
def test_separation_lattice():
    report = separation(lattice(1, 0, (-20, 20)))
    assert report.delta == 1.0
    assert report.pieces == 1
    assert report.is_union_of_k_separated[1]


def test_separation_union():
    report = separation(union(lattice(1, 0, (-20, 20)), lattice(1, 1 / 3, (-20, 20))))
    assert report.delta == pytest.approx(1 / 3)
    assert report.pieces == 2
    assert not report.is_union_of_k_separated[1]
    assert report.is_union_of_k_separated[2]


def test_separation_dyadic():
    report = separation(dyadic(20), gap=0.1)
    assert report.delta == pytest.approx(2.0**-20)
    assert not report.is_union_of_k_separated[4]


def test_cube_selector_lattice():
    s = lattice(1, 0, (-10, 10))
    assert np.array_equal(cube_selector(s, 1).points, s.points)


def test_cube_selector_union_picks_lattice():
    s = union(lattice(1, 0, (-10, 10)), lattice(1, 1 / 3, (-10, 10)))
    assert np.array_equal(cube_selector(s, 1).points, np.arange(-10, 11))


def test_cube_selector_empty_cell():
    with pytest.raises(EmptyCell) as info:
        cube_selector(lattice(2, 0, (-10, 10)), 1)
    assert info.value.gamma == -9.0
    assert info.value.L == 1


# ---------- perturbation radius ----------
def test_epsilon_for_unit_bessel_bound():
    result = epsilon_for_frame(1.0)
    assert 0.155 <= result.epsilon <= 0.1604
    assert result.epsilon == pytest.approx(0.1601, abs=5e-4)
    trace = result.constants_trace
    assert trace["lhs_first"] <= trace["rhs"]
    assert trace["lhs_second"] <= trace["rhs"]


def test_epsilon_without_margin():
    result = epsilon_for_frame(1.0, margin=0.0)
    assert result.epsilon == pytest.approx(0.16037, abs=1e-4)
    assert perturbation_constant(result.epsilon) <= 0.5


def test_epsilon_decreases_with_bessel_bound():
    assert epsilon_for_frame(4.0).epsilon < epsilon_for_frame(1.0).epsilon


def test_bessel_bound_below_one():
    with pytest.raises(ValueError):
        epsilon_for_frame(0.5)
