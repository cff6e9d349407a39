"""Count-difference observable: moments, SNR, outcome pmf, and Monte Carlo."""

import math
import warnings

import numpy as np
import pytest
from scipy.linalg import expm

from illumina import (
    ModeSpace,
    NpeState,
    StateVector,
    annihilation,
    bs_apply,
    coherent_pair,
    embed,
    generator,
    m_operator,
    moments,
    npe_vector,
    outcome_pmf,
    p_err_gaussian,
    p_err_gaussian_threshold,
    simulate_detection,
    snr,
    snr_coherent_closed,
)


def test_m_operator_is_hermitian():
    space = ModeSpace((3, 3, 3), ("S", "B", "I"))
    m = m_operator(0.3, space)
    np.testing.assert_allclose(m, m.conj().T, atol=1e-14)
    with pytest.raises(ValueError):
        m_operator(1.3, space)
    with pytest.raises(ValueError):
        m_operator(0.3, ModeSpace((3, 3), ("S", "I")))


def test_m_operator_equals_rotated_count_difference():
    # conjugating n_I - n_B by the eta beam splitter (S, B) and a balanced
    # one (B, I) reproduces the observable, on states with total occupation
    # small enough that no truncated level is reachable
    d = 5
    space = ModeSpace((d, d, d), ("S", "B", "I"))
    eta = 0.35

    a_b = embed(annihilation(d), "B", space)
    a_i = embed(annihilation(d), "I", space)
    n_diff = a_i.conj().T @ a_i - a_b.conj().T @ a_b

    u_sb = expm(math.asin(eta) * generator(space.subspace(("S", "B"))))
    u_sb = np.kron(u_sb, np.eye(d))  # acts on (S, B), identity on I
    g_bi = embed(annihilation(d), "B", space) @ embed(
        annihilation(d), "I", space
    ).conj().T - embed(annihilation(d), "B", space).conj().T @ embed(
        annihilation(d), "I", space
    )
    u_bi = expm((math.pi / 4) * g_bi)
    u = u_bi @ u_sb
    rotated = u.conj().T @ n_diff @ u

    m = m_operator(eta, space)
    # compare on the truncation-safe corner: total occupation <= 2
    idx = [
        s * d * d + b * d + i
        for s in range(d)
        for b in range(d)
        for i in range(d)
        if s + b + i <= 2
    ]
    np.testing.assert_allclose(rotated[np.ix_(idx, idx)], m[np.ix_(idx, idx)], atol=1e-12)


def test_moments_against_operator_expectations():
    probe = npe_vector(NpeState(2, [0.5, 0.7, 0.5]))
    eta, n_th = 0.2, 0.8
    rep = moments(probe, eta, n_th)
    assert rep.mean0 == 0.0  # H0 has no signal-idler phase reference
    assert rep.sigma0 > 0 and rep.sigma1 > 0
    # threshold sits between the two means, weighted toward the H0 side
    assert min(rep.mean0, rep.mean1) <= rep.threshold <= max(rep.mean0, rep.mean1)


def test_snr_frozen_coherent_value():
    # alpha = beta = 1, eta = 0.1, n_th = 1: numerator 2*0.1 = 0.2,
    # var1 = 2 - 0.99 + 3*0.99 = 3.98, var0 = 3 + 1 = 4
    probe = coherent_pair(1.0, 1.0)
    rep = snr(probe, 0.1, 1.0)
    expected = 0.2 / (math.sqrt(3.98) + 2.0)
    np.testing.assert_allclose(rep.snr, expected, rtol=1e-10)
    assert not rep.degenerate


def test_snr_closed_form_matches_fock_computation():
    n_s, n_i = 1.5, 2.5
    probe = coherent_pair(math.sqrt(n_s), math.sqrt(n_i))
    for eta in (0.02, 0.1, 0.2):
        for n_th in (0.0, 0.7, 2.0):
            got = snr(probe, eta, n_th).snr
            ref = snr_coherent_closed(n_s + n_i, n_s, 0.0, eta, n_th)
            np.testing.assert_allclose(got, ref, rtol=1e-9)


def test_snr_phase_dependence():
    n_s = n_i = 2.0
    base = snr_coherent_closed(4.0, 2.0, 0.0, 0.1, 1.0)
    quarter = snr_coherent_closed(4.0, 2.0, math.pi / 2, 0.1, 1.0)
    anti = snr_coherent_closed(4.0, 2.0, math.pi, 0.1, 1.0)
    assert base > 0
    assert quarter == pytest.approx(0.0, abs=1e-12)
    assert anti == pytest.approx(-base, rel=1e-12)
    probe = coherent_pair(math.sqrt(n_s), math.sqrt(n_i) * 1j)
    np.testing.assert_allclose(snr(probe, 0.1, 1.0).snr, 0.0, atol=1e-10)


def test_snr_degenerate_when_signal_absent():
    probe = coherent_pair(0.0, 1.0)
    rep = snr(probe, 0.3, 0.5)
    assert rep.snr == pytest.approx(0.0, abs=1e-12)
    rep_vac = snr(npe_vector(NpeState(1, [1.0, 0.0])), 0.0, 0.0)
    assert rep_vac.degenerate


def test_snr_validation():
    probe = coherent_pair(1.0, 1.0)
    with pytest.raises(ValueError):
        snr(probe, -0.1, 1.0)
    with pytest.raises(ValueError):
        snr(probe, 0.1, -1.0)
    with pytest.raises(ValueError):
        snr_coherent_closed(1.0, 2.0, 0.0, 0.1, 1.0)  # N_S > N


def test_error_probability_formulas():
    assert p_err_gaussian(0.1, 100) == pytest.approx(math.exp(-0.5), rel=1e-12)
    got = p_err_gaussian_threshold(0.1, 100)
    assert got == pytest.approx(0.5 * math.erfc(1.0 / math.sqrt(2.0)), rel=1e-12)
    # the Gaussian threshold prediction always sits below the envelope
    for m in (1, 10, 1000):
        assert p_err_gaussian_threshold(0.05, m) <= p_err_gaussian(0.05, m)
    with pytest.raises(ValueError):
        p_err_gaussian(0.1, 0)
    with pytest.raises(ValueError):
        p_err_gaussian_threshold(0.1, -3)


def test_outcome_pmf_is_normalized_integer_supported():
    probe = coherent_pair(1.0, 1.0)
    pmf = outcome_pmf(probe, 0.1, 1.0)
    assert pmf.support.dtype.kind == "i"
    assert np.all(np.diff(pmf.support) == 1)
    assert np.all(pmf.probs >= 0)
    np.testing.assert_allclose(pmf.probs.sum(), 1.0, atol=1e-10 + pmf.tail)


def test_outcome_pmf_moments_match_operator_moments():
    probe = npe_vector(NpeState(2, [0.4, 0.8, 0.2]))
    eta, n_th = 0.15, 0.6
    rep = moments(probe, eta, n_th)
    pmf1 = outcome_pmf(probe, eta, n_th)
    pmf0 = outcome_pmf(probe, 0.0, n_th)
    np.testing.assert_allclose(pmf1.mean(), rep.mean1, atol=1e-10)
    np.testing.assert_allclose(pmf0.mean(), rep.mean0, atol=1e-10)
    np.testing.assert_allclose(pmf1.std(), rep.sigma1, rtol=1e-8)
    np.testing.assert_allclose(pmf0.std(), rep.sigma0, rtol=1e-8)


def test_outcome_pmf_h0_is_symmetric():
    # with no reflected signal the idler-bath difference is symmetric
    probe = coherent_pair(1.2, 0.9)
    pmf = outcome_pmf(probe, 0.0, 0.7)
    np.testing.assert_allclose(pmf.mean(), 0.0, atol=1e-12)


def test_simulate_detection_reproducible_and_seed_sensitive():
    probe = coherent_pair(1.0, 1.0)
    pmf0 = outcome_pmf(probe, 0.0, 1.0)
    pmf1 = outcome_pmf(probe, 0.25, 1.0)
    a = simulate_detection(pmf0, pmf1, 40, 400, seed=5)
    b = simulate_detection(pmf0, pmf1, 40, 400, seed=5)
    assert a == b
    c = simulate_detection(pmf0, pmf1, 40, 400, seed=6)
    assert a != c
    p_err, stderr = a
    assert 0.0 <= p_err <= 1.0 and stderr >= 0.0


def test_simulate_detection_tracks_gaussian_prediction():
    probe = coherent_pair(1.0, 1.0)
    eta, n_th, m = 0.1, 1.0, 200
    pmf0 = outcome_pmf(probe, 0.0, n_th)
    pmf1 = outcome_pmf(probe, eta, n_th)
    p_err, stderr = simulate_detection(pmf0, pmf1, m, 4000, seed=12)
    predicted = p_err_gaussian_threshold(snr(probe, eta, n_th).snr, m)
    assert abs(p_err - predicted) < max(5 * stderr, 0.02)


def test_simulate_detection_identical_pmfs_warn_and_guess():
    probe = coherent_pair(1.0, 1.0)
    pmf = outcome_pmf(probe, 0.0, 1.0)
    with pytest.warns(UserWarning):
        p_err, _ = simulate_detection(pmf, pmf, 20, 500, seed=3)
    assert abs(p_err - 0.5) < 0.1


def test_simulate_detection_validation():
    probe = coherent_pair(1.0, 1.0)
    pmf = outcome_pmf(probe, 0.1, 1.0)
    with pytest.raises(ValueError):
        simulate_detection(pmf, pmf, 0, 10, seed=1)
    with pytest.raises(ValueError):
        simulate_detection(pmf, pmf, 10, 0, seed=1)
    with pytest.raises(ValueError):
        simulate_detection(pmf, pmf, 10, 10, seed=-1)
