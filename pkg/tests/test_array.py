import cmath
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from numpy.testing import assert_allclose, assert_array_equal

from prbeam.array import (ArrayGeometry, Codebook, PatternMatrix, array_response, beam_gain, dft_codebook,
                          load_pattern_csv, pattern_matrix, write_pattern_csv)
from prbeam.errors import IncompatibleGrid, InvalidArgument, UnresolvableAngle


def element_loop_response(N, d, lam, theta):
    return np.array([cmath.exp(-1j * 2 * math.pi / lam * n * d * math.cos(theta)) for n in range(N)])


def test_geometry_validation():
    with pytest.raises(InvalidArgument):
        ArrayGeometry(0, 0.005, 0.011)
    with pytest.raises(InvalidArgument):
        ArrayGeometry(4, -1.0, 0.011)
    with pytest.raises(InvalidArgument):
        ArrayGeometry(4, 0.005, 0.0)
    g = ArrayGeometry.ula(8, 0.011)
    assert g.spacing == pytest.approx(0.0055)


def test_from_frequency_matches_wavelength():
    g = ArrayGeometry.from_frequency(16, 28e9)
    assert g.wavelength == pytest.approx(299792458.0 / 28e9)


def test_single_element_response():
    g = ArrayGeometry.ula(1, 0.011)
    for theta in (0.0, 0.3, 2.0):
        assert_array_equal(array_response(g, theta), [1 + 0j])


def test_broadside_response_is_all_ones():
    g = ArrayGeometry.ula(3, 0.011)
    assert_allclose(array_response(g, math.pi / 2), np.ones(3), atol=1e-15)


def test_sub_half_wavelength_geometry_matches_element_loop():
    g = ArrayGeometry(16, 0.005, 0.011)
    v = array_response(g, 0.0)
    expect = np.exp(-1j * 2 * np.pi * (0.005 / 0.011) * np.arange(16))
    assert_allclose(v, expect, atol=1e-12)
    for theta in np.linspace(0, np.pi, 7):
        assert_allclose(array_response(g, theta), element_loop_response(16, 0.005, 0.011, theta), atol=1e-12)


def test_nonfinite_angle_rejected():
    g = ArrayGeometry.ula(4, 0.011)
    with pytest.raises(InvalidArgument):
        array_response(g, float("nan"))
    with pytest.raises(InvalidArgument):
        array_response(g, float("inf"))


def test_dft_codebook_shapes():
    g = ArrayGeometry(16, 0.005, 0.011)
    cb = dft_codebook(g, 180)
    assert cb.num_beams == 180
    assert cb.weights.shape == (180, 16)
    assert_allclose(np.abs(cb.weights), 1.0, atol=1e-12)
    with pytest.raises(InvalidArgument):
        dft_codebook(g, 0)


def test_single_beam_codebook_points_at_zero():
    g = ArrayGeometry.ula(8, 0.011)
    cb = dft_codebook(g, 1)
    assert abs(beam_gain(cb.weights[0], 0.0, g)) == pytest.approx(8.0, rel=1e-12)


def test_dft_beam_peaks_at_its_direction():
    g = ArrayGeometry.ula(4, 0.011)
    K = 8
    cb = dft_codebook(g, K)
    sweep = np.linspace(0, np.pi, 20001)
    step = sweep[1] - sweep[0]
    for a in range(K):
        mags = np.abs(cb.gains(sweep)[a])
        assert abs(sweep[np.argmax(mags)] - np.pi * a / K) <= step


def test_dft_self_alignment_modulus_is_N():
    for N, K in [(4, 8), (16, 180), (7, 5)]:
        g = ArrayGeometry.ula(N, 0.011)
        cb = dft_codebook(g, K)
        for a in range(K):
            assert abs(beam_gain(cb.weights[a], np.pi * a / K, g)) == pytest.approx(N, abs=1e-9 * N)


def test_conjugate_steering_is_coherent():
    g = ArrayGeometry(16, 0.005, 0.011)
    theta0 = 1.1
    f = np.conj(array_response(g, theta0))
    assert abs(beam_gain(f, theta0, g)) == pytest.approx(16.0, rel=1e-12)


def test_gain_matches_geometric_series():
    g = ArrayGeometry.ula(4, 0.011)
    K = 8
    cb = dft_codebook(g, K)
    for a in range(K):
        for theta in np.linspace(0.05, 3.0, 11):
            delta = math.cos(math.pi * a / K) - math.cos(theta)
            if abs(delta) < 1e-6:
                continue
            closed = abs(math.sin(4 * math.pi * delta / 2) / math.sin(math.pi * delta / 2))
            direct = abs(sum(cb.weights[a][n] * element_loop_response(4, g.spacing, g.wavelength, theta)[n]
                             for n in range(4)))
            assert abs(beam_gain(cb.weights[a], theta, g)) == pytest.approx(closed, abs=1e-12)
            assert direct == pytest.approx(closed, abs=1e-12)


def test_beam_gain_length_mismatch():
    g = ArrayGeometry.ula(4, 0.011)
    with pytest.raises(InvalidArgument):
        beam_gain(np.ones(3), 0.2, g)


@settings(max_examples=50, deadline=None)
@given(phase=st.floats(0, 2 * np.pi), theta=st.floats(0, np.pi))
def test_global_phase_invariance(phase, theta):
    g = ArrayGeometry.ula(8, 0.011)
    f = dft_codebook(g, 6).weights[2]
    rotated = f * np.exp(1j * phase)
    assert abs(beam_gain(rotated, theta, g)) == pytest.approx(abs(beam_gain(f, theta, g)), abs=1e-12)


def test_pattern_matrix_entries_equal_beam_gain_exactly():
    g = ArrayGeometry.ula(16, 0.011)
    cb = dft_codebook(g, 8)
    thetas = np.radians(np.arange(0, 32, 2) * 5.0)
    pm = pattern_matrix(cb, thetas)
    assert pm.entries.shape == (8, 16)
    for a in range(8):
        for j, th in enumerate(thetas):
            assert pm.entries[a, j] == beam_gain(cb.weights[a], th, g)


def test_pattern_matrix_single_entry_and_determinism():
    g = ArrayGeometry.ula(5, 0.011)
    cb = dft_codebook(g, 1)
    pm = pattern_matrix(cb, [0.4])
    assert pm.entries.shape == (1, 1)
    assert pm.entries[0, 0] == beam_gain(cb.weights[0], 0.4, g)
    again = pattern_matrix(cb, [0.4])
    assert again.entries.tobytes() == pm.entries.tobytes()


def test_pattern_only_codebook_passthrough_and_mismatch():
    angles = np.radians(np.arange(0, 10, 2.0))
    rng = np.random.default_rng(0)
    entries = rng.normal(size=(64, 5)) + 1j * rng.normal(size=(64, 5))
    pm = PatternMatrix(entries, angles)
    cb = Codebook(pattern=pm)
    assert cb.pattern_only and cb.num_beams == 64
    assert pattern_matrix(cb, angles) is pm
    with pytest.raises(IncompatibleGrid):
        pattern_matrix(cb, angles[:3])
    with pytest.raises(UnresolvableAngle):
        pm.column_index(np.radians(3.0))


def test_codebook_needs_exactly_one_source():
    g = ArrayGeometry.ula(4, 0.011)
    pm = PatternMatrix(np.ones((2, 1), dtype=complex), [0.0])
    with pytest.raises(InvalidArgument):
        Codebook()
    with pytest.raises(InvalidArgument):
        Codebook(weights=np.ones((2, 4)), geometry=g, pattern=pm)


def test_pattern_csv_round_trip(tmp_path):
    g = ArrayGeometry.ula(8, 0.011)
    pm = pattern_matrix(dft_codebook(g, 4), np.radians([10.0, 20.0, 30.0]))
    path = tmp_path / "beams.csv"
    write_pattern_csv(path, pm)
    cb = load_pattern_csv(path)
    assert cb.pattern_only
    assert_array_equal(cb.pattern.entries, pm.entries)
    assert_allclose(cb.pattern.angles, pm.angles, rtol=0, atol=1e-12)
