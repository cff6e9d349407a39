"""Probe and environment state constructors with truncation accounting."""

import math

import numpy as np
import pytest

from illumina import (
    CoherentProbe,
    ModeSpace,
    NpeState,
    TruncationOverflowError,
    TruncationPolicy,
    coherent_pair,
    coherent_vector,
    idler_reduced,
    npe_vector,
    signal_energy,
    thermal_density,
    thermal_weights,
    tmsv_vector,
)


def test_truncation_policy_validation():
    with pytest.raises(ValueError):
        TruncationPolicy(tail_tol=0.0)
    with pytest.raises(ValueError):
        TruncationPolicy(tail_tol=1.5)
    with pytest.raises(ValueError):
        TruncationPolicy(max_dim=1)


def test_thermal_weights_geometric_form():
    n_th = 2.0
    w = thermal_weights(n_th, 6)
    q = n_th / (1.0 + n_th)
    expected = (1 - q) * q ** np.arange(7)
    np.testing.assert_allclose(w, expected, rtol=1e-14)


def test_thermal_density_trace_and_tail():
    n_th = 1.5
    rho = thermal_density(n_th)
    q = n_th / (1.0 + n_th)
    d = rho.space.dim
    assert rho.tail <= 1e-12
    np.testing.assert_allclose(np.trace(rho.mat).real, 1.0 - q**d, rtol=1e-12)
    # diagonal in the number basis
    off = rho.mat - np.diag(np.diag(rho.mat))
    assert np.abs(off).max() == 0.0


def test_thermal_density_vacuum_limit():
    rho = thermal_density(0.0)
    assert rho.space.dim == 1
    np.testing.assert_allclose(rho.mat, [[1.0]], atol=1e-15)


def test_thermal_density_respects_max_dim():
    with pytest.raises(TruncationOverflowError):
        thermal_density(50.0, TruncationPolicy(max_dim=8))


def test_npe_state_validation_and_normalization():
    s = NpeState(2, [3.0, 0.0, 4.0])
    np.testing.assert_allclose(np.linalg.norm(s.coeffs), 1.0, rtol=1e-15)
    with pytest.raises(ValueError):
        NpeState(2, [1.0, 0.0])  # needs N+1 coefficients
    with pytest.raises(ValueError):
        NpeState(2, [0.0, 0.0, 0.0])
    with pytest.raises(ValueError):
        NpeState(-1, [1.0])


def test_npe_vector_amplitude_layout():
    # sum_n a_n |N-n, n> with a = (a_0, a_1, a_2)
    a = np.array([0.6, 0.0, 0.8])
    vec = npe_vector(NpeState(2, a))
    t = vec.as_tensor()
    assert vec.space.labels == ("S", "I")
    assert t.shape[0] >= 3 and t.shape[1] >= 3
    np.testing.assert_allclose(t[2, 0], 0.6, atol=1e-15)
    np.testing.assert_allclose(t[1, 1], 0.0, atol=1e-15)
    np.testing.assert_allclose(t[0, 2], 0.8, atol=1e-15)
    assert vec.tail == 0.0


def test_npe_vector_in_caller_space():
    space = ModeSpace((5, 5), ("S", "I"))
    vec = npe_vector(NpeState(2, [1.0, 1.0, 1.0]), space)
    assert vec.space is space
    too_small = ModeSpace((2, 3), ("S", "I"))
    with pytest.raises(ValueError):
        npe_vector(NpeState(2, [1.0, 1.0, 1.0]), too_small)


def test_npe_energy_accounting():
    a = np.array([0.6, 0.0, 0.8])
    s = NpeState(2, a)
    # signal occupation N-n with probability |a_n|^2
    assert signal_energy(s) == pytest.approx(0.36 * 2 + 0.64 * 0, abs=1e-14)
    red = idler_reduced(s)
    np.testing.assert_allclose(np.diag(red.mat).real[:3], [0.36, 0.0, 0.64], atol=1e-14)
    # the idler marginal of a definite-total-number state is diagonal
    assert np.abs(red.mat - np.diag(np.diag(red.mat))).max() == 0.0


def test_npe_accepts_complex_coefficients():
    c = np.array([1.0, 1.0j, -1.0]) / np.sqrt(3)
    vec = npe_vector(NpeState(2, c))
    t = vec.as_tensor()
    np.testing.assert_allclose(t[1, 1], 1.0j / np.sqrt(3), atol=1e-15)


def test_coherent_vector_poisson_amplitudes():
    alpha = 1.3
    v = coherent_vector(alpha)
    n = np.arange(v.space.dims[0])
    expected = np.exp(-abs(alpha) ** 2 / 2) * alpha**n / np.sqrt(
        [float(math.factorial(int(k))) for k in n]
    )
    # constructor renormalizes after truncation; compare up to that factor
    scale = np.linalg.norm(expected)
    np.testing.assert_allclose(v.amp.real, expected / scale, atol=1e-12)
    assert 0.0 <= v.tail <= 1e-12


def test_coherent_vector_phase():
    alpha = 1.0j
    v = coherent_vector(alpha)
    assert v.amp[1].real == pytest.approx(0.0, abs=1e-15)
    assert v.amp[1].imag > 0.0


def test_coherent_pair_is_product():
    probe = coherent_pair(1.0, 0.5)
    assert probe.space.labels == ("S", "I")
    t = probe.as_tensor()
    # rank-1 tensor: every 2x2 minor vanishes
    minor = t[0, 0] * t[1, 1] - t[0, 1] * t[1, 0]
    assert abs(minor) < 1e-14
    vac = coherent_pair(0.0, 0.0)
    assert vac.space.dims == (1, 1)


def test_coherent_probe_energy_record():
    probe = CoherentProbe(2.0, 1.0)
    assert probe.signal_energy == pytest.approx(4.0)
    assert probe.idler_energy == pytest.approx(1.0)


def test_tmsv_schmidt_coefficients():
    n_s = 0.8
    v = tmsv_vector(n_s)
    t = v.as_tensor()
    q = n_s / (1.0 + n_s)
    k = v.space.dims[0]
    diag = np.array([t[n, n] for n in range(k)]).real
    expected = np.sqrt((1 - q) * q ** np.arange(k))
    np.testing.assert_allclose(diag, expected, rtol=1e-12)
    # off-diagonal entries vanish
    off = np.abs(t) - np.diag(np.abs(diag))
    assert np.abs(off).max() < 1e-15
    # mean signal photon number reproduces n_s up to the recorded tail
    n_mean = float((np.arange(k) * diag**2).sum())
    assert abs(n_mean - n_s) < 20 * v.tail * k


def test_tmsv_vacuum_and_validation():
    v = tmsv_vector(0.0)
    assert v.space.dims == (1, 1)
    with pytest.raises(ValueError):
        tmsv_vector(-0.1)
    with pytest.raises(TruncationOverflowError):
        tmsv_vector(30.0, TruncationPolicy(max_dim=16))


def test_coherent_overflow_raises():
    with pytest.raises(TruncationOverflowError):
        coherent_vector(12.0, TruncationPolicy(max_dim=32))
