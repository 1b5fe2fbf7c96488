import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fdeskew.errors import ValidationError
from fdeskew.projection import (
    AngleGrid,
    Branch,
    ProjectionProfile,
    aggregate,
    argmax_angle,
    inscribed_radius,
    radial_projection,
    radial_samples,
)
from fdeskew.spectrum import MagnitudeSpectrum

from oracles import brute_profile, rasterized_ray


def centered(values):
    return MagnitudeSpectrum(np.asarray(values, dtype=float), centered=True, normalized=True)


def test_grid_sizes():
    assert len(AngleGrid(-15, 15, 0.05)) == 601
    g = AngleGrid(-44.9, 44.9, 0.05)
    assert len(g) == 1797
    assert g.angles[0] == -44.9 and g.angles[-1] == 44.9
    assert 7.3 in AngleGrid(-15, 15, 0.05)


def test_grid_rejects_bad_bounds():
    with pytest.raises(ValidationError):
        AngleGrid(5, 5, 0.05)
    with pytest.raises(ValidationError):
        AngleGrid(-1, 1, 0)


def test_vertical_column_peaks_at_zero():
    v = np.zeros((101, 101))
    v[50:, 50] = 1.0  # DC and the downward column
    grid = AngleGrid(-15, 15, 0.05)
    prof = radial_projection(centered(v), grid)
    assert prof.values[list(grid.angles).index(0.0)] == 51.0 == prof.values.max()
    # rays within half a bin of the column at the far end hit the same bins
    assert abs(argmax_angle(prof)) <= np.degrees(np.arctan(0.5 / 50))


def test_zero_spectrum_zero_profile_smallest_angle():
    grid = AngleGrid(-15, 15, 0.05)
    prof = radial_projection(centered(np.zeros((16, 16))), grid)
    assert not prof.values.any()
    assert argmax_angle(prof) == -15.0


def test_ray_at_ten_degrees():
    shape = (201, 201)
    v = np.zeros(shape)
    pts = rasterized_ray(shape, 10.0, 101)
    for y, x in pts:
        v[y, x] = 1.0
    grid = AngleGrid(-15, 15, 0.05)
    prof = radial_projection(centered(v), grid)
    assert argmax_angle(prof) == 10.0


@pytest.mark.parametrize("values, expected", [([1, 3, 2], 0.0), ([5, 5, 1], -1.0), ([0, 0, 0], -1.0)])
def test_argmax_examples(values, expected):
    grid = AngleGrid(-1, 1, 1.0)
    assert argmax_angle(ProjectionProfile(grid, np.array(values, float))) == expected


@pytest.mark.parametrize(
    "a, b, d, expected",
    [
        (2.0, 2.3, 0.5, (2.3, Branch.CORRECTION)),
        (2.0, 3.0, 0.5, (2.0, Branch.INITIAL)),
        (2.0, 2.5, 0.5, (2.5, Branch.CORRECTION)),
        (1.0, 1.0, 0.0, (1.0, Branch.CORRECTION)),
        (1.0, 1.05, 0.0, (1.0, Branch.INITIAL)),
        (5.0, 5.45, 0.45, (5.45, Branch.CORRECTION)),
    ],
)
def test_aggregate(a, b, d, expected):
    assert aggregate(a, b, d) == expected


@given(st.floats(-45, 45), st.floats(-45, 45), st.floats(0, 5))
def test_aggregate_returns_one_input(a, b, d):
    out, branch = aggregate(a, b, d)
    # differences are compared at 9 decimals
    agree = round(abs(a - b), 9) <= d
    assert out == (b if agree else a)
    assert branch is (Branch.CORRECTION if agree else Branch.INITIAL)


@given(st.integers(0, 2**32 - 1), st.integers(4, 24), st.integers(4, 24))
@settings(max_examples=40, deadline=None)
def test_profile_matches_brute_force(seed, h, w):
    rng = np.random.default_rng(seed)
    v = rng.random((h, w))
    grid = AngleGrid(-44.9, 44.9, 0.7)
    start = int(rng.integers(0, min(h, w)))
    prof = radial_projection(centered(v), grid, start)
    np.testing.assert_allclose(prof.values, brute_profile(v, grid.angles, start), rtol=1e-12, atol=1e-12)


@given(st.integers(0, 2**32 - 1))
@settings(max_examples=30, deadline=None)
def test_offsets_are_monotone(seed):
    v = np.random.default_rng(seed).random((20, 20))
    grid = AngleGrid(-15, 15, 1.0)
    prev = None
    for w in range(0, 20, 3):
        cur = radial_projection(centered(v), grid, w).values
        if prev is not None:
            assert np.all(cur <= prev + 1e-12)
        prev = cur


def test_symmetric_spectrum_symmetric_profile():
    yy, xx = np.indices((33, 33))
    # mirror-symmetric about the vertical axis through the center
    v = np.cos(0.3 * (yy - 16)) ** 2 + np.abs(xx - 16) / 16
    grid = AngleGrid(-15, 15, 0.05)
    prof = radial_projection(centered(v), grid)
    np.testing.assert_allclose(prof.values, prof.values[::-1], atol=1e-12)


def test_finer_grid_contains_coarse_argmax():
    rng = np.random.default_rng(7)
    v = rng.random((64, 64))
    coarse = AngleGrid(-15, 15, 0.1)
    fine = AngleGrid(-15, 15, 0.05)
    pc = radial_projection(centered(v), coarse)
    pf = radial_projection(centered(v), fine)
    assert set(coarse.angles) <= set(fine.angles)
    assert pf.values.max() >= pc.values.max() - 1e-12


def test_offset_bounds():
    spec = centered(np.ones((10, 12)))
    grid = AngleGrid(-1, 1, 0.5)
    with pytest.raises(ValidationError):
        radial_projection(spec, grid, 10)
    with pytest.raises(ValidationError):
        radial_projection(spec, grid, -1)
    radial_projection(spec, grid, 9)


def test_uncentered_rejected():
    with pytest.raises(ValidationError):
        radial_projection(MagnitudeSpectrum(np.ones((4, 4))), AngleGrid(-1, 1, 1))


def test_samples_shape_and_bilinear_agree_on_axis():
    v = np.random.default_rng(2).random((16, 16))
    grid = AngleGrid(-1, 1, 1.0)
    near = radial_samples(centered(v), grid, "nearest")
    bil = radial_samples(centered(v), grid, "bilinear")
    assert near.shape == (3, 17)
    # at 0 degrees every sample lands exactly on a bin
    np.testing.assert_allclose(near[1], bil[1], atol=1e-12)


def test_profile_csv():
    grid = AngleGrid(-1, 1, 1.0)
    text = ProjectionProfile(grid, np.array([1.0, 2.5, 0.0])).to_csv()
    assert text.splitlines() == ["angle,value", "-1.0000,1", "0.0000,2.5", "1.0000,0"]


def test_profile_length_checked():
    with pytest.raises(ValidationError):
        ProjectionProfile(AngleGrid(-1, 1, 1.0), np.zeros(2))


def test_inscribed_radius():
    assert inscribed_radius(centered(np.zeros((8, 8)))) == 3
    assert inscribed_radius(centered(np.zeros((9, 12)))) == 4


def test_radius_truncates_rays():
    v = np.random.default_rng(4).random((20, 20))
    grid = AngleGrid(-44.9, 44.9, 0.1)
    full = radial_projection(centered(v), grid)
    cut = radial_projection(centered(v), grid, radius=9)
    np.testing.assert_allclose(cut.values, brute_profile(v, grid.angles, 0) - brute_profile(v, grid.angles, 10))
    assert np.all(cut.values <= full.values + 1e-12)
    with pytest.raises(ValidationError):
        radial_projection(centered(v), grid, radius=21)


def test_inscribed_disc_has_equal_ray_lengths():
    # a flat spectrum: every ray collects the same number of unit samples
    spec = centered(np.ones((64, 64)))
    grid = AngleGrid(-44.9, 44.9, 0.1)
    prof = radial_projection(spec, grid, radius=inscribed_radius(spec))
    assert np.all(prof.values == prof.values[0])
    # with the full radius, diagonal rays stay in bounds longer
    wide = radial_projection(spec, grid)
    assert wide.values[0] > wide.values[len(grid) // 2]
