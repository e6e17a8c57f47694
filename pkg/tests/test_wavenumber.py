import numpy as np
import pytest
from hypothesis import given, strategies as st

from nfchannel.correlation import CorrelationKernel, assemble_matrix, corr_analytic
from nfchannel.estimators import isotropic_correlation
from nfchannel.exceptions import InvalidArgumentError
from nfchannel.geometry import ArrayGeometry, ScattererCluster, Wave, facing_cluster
from nfchannel.synthesis import GaussianFieldSampler
from nfchannel.wavenumber import (
    EXTENDED_FAR,
    EXTENDED_NEAR,
    POINT_FAR,
    SpectrumGrid,
    classify_regime,
    detect_peaks,
    dft_matrices,
    direction_axis,
    direction_from_cosines,
    expected_spectrum,
    far_field_corr,
    far_field_matrix,
    local_maxima,
    sample_spectrum,
)

# c / 1 GHz / 16, from tests/oracles/generate.py
LAMBDA16_1GHZ = 0.018737028625


def grid(values):
    v = np.asarray(values, float)
    return SpectrumGrid(v, direction_axis(v.shape[0]), direction_axis(v.shape[1]))


def test_dft_two_by_two():
    w = Wave(0.05)
    F1, _ = dft_matrices(ArrayGeometry(2, 2, 0.0125, 0.0125), w)
    k = w.wavenumber
    # centred indices +-1/2, so every phase is +-k d_y / 2
    expected = np.exp(1j * 2 * k * np.array([[0.25, -0.25], [-0.25, 0.25]]) * 0.0125)
    np.testing.assert_allclose(F1, expected)
    with pytest.raises(InvalidArgumentError):
        dft_matrices(ArrayGeometry(1, 3, 0.1, 0.1), w)


def test_dft_symmetric_and_nearly_orthogonal():
    w = Wave(0.05)
    F1, F2 = dft_matrices(ArrayGeometry(41, 9, 0.025, 0.025), w)
    np.testing.assert_allclose(F1, F1.T, rtol=0, atol=1e-12)
    G = np.abs(F1.conj().T @ F1)
    diag = np.diag(G).copy()
    # u = -1 and u = +1 differ by a full 2 pi phase step at half-wavelength spacing
    assert G[0, -1] == pytest.approx(diag[0])
    np.fill_diagonal(G, 0.0)
    G[0, -1] = G[-1, 0] = 0.0
    assert G.max() < 0.1 * diag.min()


def test_oversampled_grid_contains_plain_grid():
    w = Wave(0.05)
    arr = ArrayGeometry(5, 4, 0.025, 0.025)
    h = np.random.default_rng(0).standard_normal(arr.size) + 0j
    plain = sample_spectrum(h, arr, w)
    fine = sample_spectrum(h, arr, w, oversample=3)
    np.testing.assert_allclose(fine.values[::3, ::3], plain.values, rtol=1e-12)


def test_single_far_scatterer_peak_and_direction():
    w = Wave(0.05)
    arr = ArrayGeometry.square(21, 0.025)
    c = ScattererCluster([1e4, 3e3, -2e3], [-1, 0, 0], 1.0)
    R = far_field_matrix([c], arr, w)
    g = expected_spectrum(R, arr, w)
    assert g.values.max() / g.values.mean() > 10
    ky, kz = g.argmax_direction()
    bw = g.bin_width
    assert abs(ky - c.direction[1]) <= bw[0] and abs(kz - c.direction[2]) <= bw[1]


@pytest.mark.parametrize("center", [[120, 40, 30], [150, -60, 20], [110, 10, -70]])
def test_peak_direction_fidelity(center):
    w = Wave(0.05)
    arr = ArrayGeometry.square(21, 0.025)
    c = facing_cluster(center, 1.0, 0.5)
    g = expected_spectrum(assemble_matrix(CorrelationKernel([c], w), arr), arr, w)
    ky, kz = g.argmax_direction()
    assert abs(ky - c.direction[1]) <= g.bin_width[0]
    assert abs(kz - c.direction[2]) <= g.bin_width[1]


def test_isotropic_spectrum_has_no_isolated_peak():
    w = Wave(0.05)
    # quarter-wavelength spacing: at half-wavelength the horizon ridge of the
    # isotropic spectrum folds onto the grid edge and grows with N
    arr = ArrayGeometry.square(15, 0.0125)
    g = expected_spectrum(isotropic_correlation(arr, w), arr, w)
    assert g.values.max() / g.values.mean() < 3


def test_zero_channel_spectrum():
    w = Wave(0.05)
    arr = ArrayGeometry.square(4, 0.025)
    assert np.all(sample_spectrum(np.zeros(16), arr, w).values == 0)
    with pytest.raises(InvalidArgumentError):
        sample_spectrum(np.zeros(15), arr, w)


def test_sample_spectrum_average_matches_expected():
    w = Wave(0.05)
    arr = ArrayGeometry.square(9, 0.025)
    c = facing_cluster([20, 8, -5], 1.0)
    R = assemble_matrix(CorrelationKernel([c], w), arr)
    H = GaussianFieldSampler().fit(R).sample(1000, random_state=4)
    mean = np.mean([sample_spectrum(h, arr, w).values for h in H], axis=0)
    exp = expected_spectrum(R, arr, w).values
    assert np.linalg.norm(mean - exp) / np.linalg.norm(exp) < 0.10
    single = sample_spectrum(H[0], arr, w)
    assert single.argmax_direction() == expected_spectrum(R, arr, w).argmax_direction()


def test_detect_peaks_examples():
    assert detect_peaks(grid(np.ones((5, 5))), 0.5) == []
    v = np.zeros((5, 5))
    v[1, 3] = 9.0
    g = grid(v)
    assert detect_peaks(g, 3.0) == [(g.ky[1], g.kz[3])]
    with pytest.raises(InvalidArgumentError):
        detect_peaks(g, 0.0)


def test_detect_peaks_edges_and_neighbourhood():
    v = np.zeros((4, 4))
    v[0, 0] = 5.0
    v[1, 1] = 4.0
    # diagonal neighbour suppresses (1,1) only with eight neighbours
    assert len(detect_peaks(grid(v), 0.1, neighbors=8)) == 1
    assert len(detect_peaks(grid(v), 0.1, neighbors=4)) == 2
    with pytest.raises(InvalidArgumentError):
        local_maxima(v, neighbors=6)


def test_detect_peaks_order_strongest_first():
    v = np.zeros((7, 7))
    v[1, 1], v[5, 5] = 2.0, 8.0
    g = grid(v)
    assert detect_peaks(g, 1.0)[0] == (g.ky[5], g.kz[5])


def test_direction_from_cosines():
    u = direction_from_cosines(0.3, -0.4)
    assert np.linalg.norm(u) == pytest.approx(1.0)
    assert u[0] > 0 and u[1] == 0.3 and u[2] == -0.4


def test_far_field_corr_examples():
    w = Wave(0.05)
    c = ScattererCluster([100, 20, 10], [-1, 0, 0], 0.1, 0.0, 3.0)
    d = c.distance
    assert far_field_corr([0, 0.1, 0], [0, 0.1, 0], c, w) == pytest.approx(3.0 / (16 * np.pi**2 * d**2))
    r1, r2, t = np.array([0, 0.1, 0.2]), np.array([0, -0.3, 0.0]), np.array([0, 1.0, -2.0])
    assert far_field_corr(r1 + t, r2 + t, c, w) == pytest.approx(far_field_corr(r1, r2, c, w), rel=1e-12)


def test_far_field_matches_analytic_far_away():
    w = Wave(0.05)
    c = ScattererCluster(1e4 * np.array([0.8, 0.36, 0.48]), [-1, 0, 0], 0.1)
    r1, r2 = [0, 0.2, -0.1], [0, -0.15, 0.3]
    a = corr_analytic(r1, r2, c, w)
    f = far_field_corr(r1, r2, c, w)
    assert abs(a - f) / abs(a) < 0.01


def test_near_cluster_is_not_shift_invariant():
    w = Wave(0.05)
    arr = ArrayGeometry.square(41, 0.05 / 8)
    c = facing_cluster([30 * 0.8, 30 * 0.36, 30 * 0.48], 1.0)
    pos = arr.positions()
    r1, r2 = pos[0], pos[5]
    base = corr_analytic(r1, r2, c, w)
    shifts = [pos[i] - pos[0] for i in (100, 800, 1600)]
    var = max(abs(corr_analytic(r1 + t, r2 + t, c, w) - base) / abs(base) for t in shifts)
    assert var > 1e-3


def test_regime_size_threshold_at_1ghz():
    w = Wave.from_frequency(1e9)
    reg = classify_regime(0.01, 0.1, 1e3, w)
    assert reg.thresholds["size_limit"] == pytest.approx(LAMBDA16_1GHZ, abs=1e-12)
    assert reg.thresholds["size_limit"] == pytest.approx(0.01874, abs=1e-3)
    assert classify_regime(0.05, 0.1, 1e6, w).classification != POINT_FAR


def test_regime_zero_radius_limit_is_rayleigh():
    w = Wave(0.05)
    r_m = 1.25
    reg = classify_regime(0.0, r_m, 1.0, w)
    assert reg.thresholds["point_boundary"] == 8 * r_m**2 / 0.05
    assert reg.thresholds["rayleigh_boundary"] == 8 * r_m**2 / 0.05


def test_regime_arithmetic_example():
    reg = classify_regime(1.0, 1.25, 100.0, Wave(0.05))
    assert reg.thresholds["rayleigh_boundary"] == pytest.approx(810.0)
    assert reg.classification == EXTENDED_NEAR
    assert classify_regime(1.0, 1.25, 1000.0, Wave(0.05)).classification == EXTENDED_FAR
    assert classify_regime(0.001, 0.1, 1000.0, Wave(0.05)).classification == POINT_FAR


@given(st.floats(0.0, 0.2), st.floats(0.01, 2.0), st.floats(0.1, 1e4), st.floats(1.0, 100.0))
def test_classify_monotone_in_distance(r_s, r_m, d, factor):
    w = Wave(0.1)
    rank = {EXTENDED_NEAR: 0, EXTENDED_FAR: 1, POINT_FAR: 2}
    near = classify_regime(r_s, r_m, d, w).classification
    far = classify_regime(r_s, r_m, d * factor, w).classification
    assert rank[far] >= rank[near]


def test_classify_rejects_bad_input():
    with pytest.raises(InvalidArgumentError):
        classify_regime(-1.0, 1.0, 1.0, Wave(0.1))
    with pytest.raises(InvalidArgumentError):
        classify_regime(1.0, 1.0, 0.0, Wave(0.1))
