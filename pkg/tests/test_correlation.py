import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra.numpy import arrays

from nfchannel.correlation import (
    CorrelationKernel,
    CorrelationMatrix,
    assemble_matrix,
    corr_analytic,
    corr_multi,
    corr_oracle,
    oracle_pairs,
    point_scatterer_corr,
    relative_error,
    _disk_rule,
)
from nfchannel.exceptions import InvalidArgumentError, QuadratureError
from nfchannel.geometry import ArrayGeometry, ScattererCluster, Wave, factor_A
from nfchannel.geometry import orthonormal_frame

from conftest import TILTED_NORMAL, S3

# mpmath evaluations of the closed form (tests/oracles/generate.py)
CLOSED_FORM_CASES = [
    (([0, 0.1, -0.2], [0, -0.3, 0.05], [30, 10, -5], [-1, 0, 0.2], 1.5, 0.0, 1.0, 0.05),
     complex(-6.0915140128215902268e-7, -2.3230764377437393616e-6)),
    (([0, 0.5, 0.5], [0, -0.5, 0.25], [20, -15, 10], [-1, 0.5, -0.5], 2.0, -0.5, 2.5, 0.1),
     complex(1.4192386109509656465e-6, 4.4087869573123484974e-6)),
    (([0, 0.2, 0], [0, 0, 0.3], [50, 40, 30], [-3, -1, 2], 4.0, 3.0, 1.0, 0.05),
     complex(-1.691714914580237098e-7, 1.0167770173381635335e-6)),
]

offset = st.floats(-1.0, 1.0)
point = st.tuples(st.just(0.0), offset, offset).map(np.array)


@pytest.mark.parametrize("args,expected", CLOSED_FORM_CASES)
def test_corr_analytic_against_mpmath(args, expected):
    r1, r2, center, normal, rs, a, beta, lam = args
    got = corr_analytic(r1, r2, ScattererCluster(center, normal, rs, a, beta), Wave(lam))
    assert abs(got - expected) <= 1e-10 * abs(expected)


@given(point, st.floats(-0.9, 5.0), st.floats(0.1, 5.0))
def test_diagonal_identity_exact(r, a, rs):
    c = ScattererCluster([40.0, -20.0, 10.0], [-1.0, 0.3, 0.1], rs, a, 2.0)
    w = Wave(0.05)
    val = corr_analytic(r, r, c, w)
    assert val.imag == 0.0
    assert val.real == pytest.approx(2.0 / (16 * np.pi**2 * c.distance**2 * factor_A(r, c)), rel=1e-13)


@given(point, point, st.floats(-0.9, 5.0))
def test_analytic_hermitian(r1, r2, a):
    c = ScattererCluster([40.0, 20.0, -10.0], [-1.0, -0.3, 0.4], 1.0, a)
    w = Wave(0.05)
    assert corr_analytic(r2, r1, c, w) == pytest.approx(np.conj(corr_analytic(r1, r2, c, w)), rel=1e-10)


def test_rotation_invariance_of_in_plane_frame(wave):
    # rebuild the closed form with a frame rotated about the normal
    from nfchannel.special import bessel_profile

    c = ScattererCluster([30, 10, -5], [-1, 0, 0.2], 1.5, 0.7)
    r1, r2 = np.array([0, 0.3, -0.1]), np.array([0, -0.2, 0.25])
    m1, m2 = orthonormal_frame(c.mu)
    phi = 0.7
    q1 = np.cos(phi) * m1 + np.sin(phi) * m2
    q2 = -np.sin(phi) * m1 + np.cos(phi) * m2
    d = c.distance
    A1, A2 = factor_A(r1, c), factor_A(r2, c)
    uv = lambda r, A, m: (c.d - r) @ m / (d * np.sqrt(A))
    C = wave.wavenumber**2 * ((uv(r1, A1, q1) - uv(r2, A2, q1)) ** 2 + (uv(r1, A1, q2) - uv(r2, A2, q2)) ** 2)
    val = (
        1 / (16 * np.pi**2 * d**2 * np.sqrt(A1 * A2))
        * np.exp(1j * wave.wavenumber * d * (np.sqrt(A1) - np.sqrt(A2)))
        * bessel_profile(1.7, np.sqrt(C) * 1.5)
    )
    assert corr_analytic(r1, r2, c, wave) == pytest.approx(val, rel=1e-10)


def test_tiny_disk_is_point_scatterer(wave):
    c = ScattererCluster([30, 10, -5], [-1, 0, 0.2], 1e-9)
    r1, r2 = [0, 0.3, -0.1], [0, -0.2, 0.25]
    assert corr_analytic(r1, r2, c, wave) == pytest.approx(point_scatterer_corr(r1, r2, c, wave), rel=1e-10)


def test_large_concentration_tends_to_point_form(wave):
    arr = ArrayGeometry.square(6, 0.025)
    c = ScattererCluster(50 * np.array([S3, S3, S3]), TILTED_NORMAL, 2.0, 100.0)
    R = assemble_matrix(CorrelationKernel([c], wave), arr)
    pos = arr.positions()
    P = np.array([[point_scatterer_corr(p, q, c, wave) for q in pos] for p in pos])
    assert relative_error(R, P) <= 0.05


def test_disk_rule_weights_sum_to_one():
    for a in (-0.95, -0.5, 0.0, 2.0, 60.0):
        c = ScattererCluster([10, 0, 0], [-1, 0, 0], 0.7, a)
        _, w = _disk_rule(c, 16, 8)
        assert w.sum() == pytest.approx(1.0, rel=1e-12)


@pytest.mark.parametrize("a", [-0.9, -0.5, 0.0, 1.0])
def test_oracle_diagonal_matches_closed_form(wave, a):
    # d / r_s = 50
    c = ScattererCluster(100 * np.array([S3, S3, S3]), TILTED_NORMAL, 2.0, a)
    r = np.array([0.0, 0.3, -0.2])
    ref = corr_analytic(r, r, c, wave).real
    val = corr_oracle(r, r, c, wave, tol=1e-8)
    assert abs(val.imag) <= 1e-8 * abs(val)
    assert abs(val.real - ref) / ref <= 1e-2


def test_oracle_hermitian(wave):
    c = ScattererCluster([20, 5, -3], [-1, 0.2, 0.1], 1.0, 0.5)
    r1, r2 = [0, 0.2, 0.1], [0, -0.1, 0.3]
    a = corr_oracle(r1, r2, c, wave)
    b = corr_oracle(r2, r1, c, wave)
    assert b == pytest.approx(np.conj(a), rel=1e-8)


def test_oracle_large_concentration_matches_point_value(wave):
    c = ScattererCluster([30, 10, -5], [-1, 0, 0.2], 0.5, 50.0)
    r1, r2 = [0, 0.3, -0.1], [0, -0.2, 0.25]
    val = corr_oracle(r1, r2, c, wave, tol=1e-9)
    ref = point_scatterer_corr(r1, r2, c, wave)
    assert abs(val - ref) / abs(ref) < 0.05


def test_oracle_reports_non_convergence(wave):
    c = ScattererCluster([5, 0, 0], [-1, 0, 0], 4.0, 0.0)
    with pytest.raises(QuadratureError) as info:
        oracle_pairs([0, 0.5, 0], [0, -0.5, 0], c, wave, tol=1e-14, max_nodes=2**12)
    assert info.value.achieved is not None and info.value.achieved > 0


def test_corr_multi_linearity(wave):
    c = ScattererCluster([30, 10, -5], [-1, 0, 0.2], 1.5)
    r1, r2 = [0, 0.1, 0], [0, 0, 0.2]
    single = corr_analytic(r1, r2, c, wave)
    assert corr_multi(r1, r2, CorrelationKernel([c], wave)) == single
    assert corr_multi(r1, r2, CorrelationKernel([c, c], wave)) == pytest.approx(2 * single, rel=1e-15)


def test_kernel_needs_clusters(wave):
    with pytest.raises(InvalidArgumentError):
        CorrelationKernel([], wave)


def test_assemble_one_by_one(wave):
    clusters = [
        ScattererCluster([30, 10, -5], [-1, 0, 0.2], 1.5, 0.0, 2.0),
        ScattererCluster([-10, 40, 5], [1, -1, 0], 1.0, 1.0, 0.5),
    ]
    R = assemble_matrix(CorrelationKernel(clusters, wave), ArrayGeometry(1, 1, 1.0, 1.0))
    expected = sum(c.power / (16 * np.pi**2 * c.distance**2) for c in clusters)
    assert R.entries.shape == (1, 1)
    assert R.entries[0, 0] == pytest.approx(expected, rel=1e-14)


@pytest.mark.parametrize("a", [-0.9, 0.0, 3.0])
def test_assembled_matrix_invariants(wave, a):
    arr = ArrayGeometry(5, 4, 0.025, 0.03)
    c = ScattererCluster([8, 3, -2], [-1, 0.4, 0.3], 1.0, a)
    R = assemble_matrix(CorrelationKernel([c], wave), arr)
    R.check(herm_tol=1e-10, psd_tol=1e-8)
    assert R.hermitian_error() == 0.0
    assert np.all(np.diag(R.entries).imag == 0)


def test_eight_by_eight_analytic_vs_oracle(wave):
    arr = ArrayGeometry.square(8, 0.025)
    c = ScattererCluster(100 * np.array([S3, S3, S3]), TILTED_NORMAL, 2.0, 0.0)
    k = CorrelationKernel([c], wave)
    Ra = assemble_matrix(k, arr)
    Ro = assemble_matrix(k, arr, mode="oracle", tol=1e-8)
    Ro.check()
    assert relative_error(Ra, Ro) < 0.01


def test_oracle_threads_match_serial(wave):
    arr = ArrayGeometry.square(3, 0.05)
    k = CorrelationKernel([ScattererCluster([20, 5, -3], [-1, 0.2, 0.1], 1.0)], wave)
    a = assemble_matrix(k, arr, mode="oracle", n_jobs=1)
    b = assemble_matrix(k, arr, mode="oracle", n_jobs=3)
    np.testing.assert_array_equal(a.entries, b.entries)


def test_relative_error_examples():
    R = np.eye(3) + 0.5j * np.diag([1, -1], 1) - 0.5j * np.diag([1, -1], -1)
    assert relative_error(R, R) == 0.0
    assert relative_error(np.zeros((3, 3)), R) == 1.0
    with pytest.raises(InvalidArgumentError):
        relative_error(np.eye(2), np.eye(3))
    with pytest.raises(InvalidArgumentError):
        relative_error(np.eye(2), np.zeros((2, 2)))


def test_correlation_matrix_checks():
    with pytest.raises(ValueError):
        CorrelationMatrix(np.array([[1, 1j], [1j, 1]])).check()
    with pytest.raises(ValueError):
        CorrelationMatrix(np.array([[1, 2], [2, 1]])).check()
    with pytest.raises(InvalidArgumentError):
        CorrelationMatrix(np.eye(2), provenance="guess")
    R = CorrelationMatrix(np.diag([1.0, 3.0])).normalized()
    assert np.trace(R.entries).real == pytest.approx(2.0)


def test_large_disk_warns(wave):
    c = ScattererCluster([5, 0, 0], [-1, 0, 0], 1.0)
    with pytest.warns(UserWarning, match="disk radius"):
        corr_analytic([0, 0, 0], [0, 0.1, 0], c, wave)


@pytest.mark.parametrize("power", [0.0, 0.5, 3.0])
def test_oracle_and_closed_form_scale_with_power(power):
    wave = Wave(0.05)
    base = ScattererCluster([40.0, 10.0, -5.0], [-1.0, 0.2, 0.1], 1.0)
    c = base.replace(power=power)
    r1, r2 = [0.0, 0.1, -0.05], [0.0, -0.2, 0.1]
    assert corr_oracle(r1, r2, c, wave) == pytest.approx(power * corr_oracle(r1, r2, base, wave), rel=1e-7, abs=1e-30)
    assert corr_analytic(r1, r2, c, wave) == pytest.approx(power * corr_analytic(r1, r2, base, wave), rel=1e-12, abs=1e-30)
