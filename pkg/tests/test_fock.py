"""Truncated-Fock linear algebra: spaces, operators, traces, decompositions."""

import numpy as np
import pytest

from illumina import (
    DensityOperator,
    EigenSystem,
    InvalidDimensionError,
    ModeSpace,
    StateVector,
    annihilation,
    embed,
    expectation,
    hermitian_eigen,
    matrix_power,
    partial_trace,
    trace_norm,
)


def test_mode_space_basic_properties():
    space = ModeSpace((3, 4), ("S", "I"))
    assert space.dim == 12
    assert space.axis("I") == 1
    assert space.dim_of("S") == 3
    sub = space.subspace(("I",))
    assert sub.dims == (4,) and sub.labels == ("I",)


def test_mode_space_rejects_bad_input():
    with pytest.raises(InvalidDimensionError):
        ModeSpace((3,), ("S", "I"))
    with pytest.raises(InvalidDimensionError):
        ModeSpace((0, 2), ("S", "I"))
    with pytest.raises(ValueError):
        ModeSpace((2, 2), ("S", "S"))
    with pytest.raises(KeyError):
        ModeSpace((2,), ("S",)).axis("I")


def test_annihilation_matrix_elements():
    a = annihilation(4)
    # <n-1| a |n> = sqrt(n)
    expected = np.zeros((4, 4))
    for n in range(1, 4):
        expected[n - 1, n] = np.sqrt(n)
    np.testing.assert_allclose(a, expected)
    # canonical commutator holds away from the truncation edge
    comm = a @ a.conj().T - a.conj().T @ a
    np.testing.assert_allclose(np.diag(comm)[:-1], np.ones(3), atol=1e-14)


def test_embed_acts_on_named_axis_only():
    space = ModeSpace((2, 3), ("S", "I"))
    a_i = embed(annihilation(3), "I", space)
    n_i = a_i.conj().T @ a_i
    # |s=1, i=2> is index 1*3 + 2 = 5
    v = np.zeros(6)
    v[5] = 1.0
    np.testing.assert_allclose(n_i @ v, 2.0 * v, atol=1e-14)
    # signal-mode number operator leaves the idler index alone
    a_s = embed(annihilation(2), "S", space)
    n_s = a_s.conj().T @ a_s
    np.testing.assert_allclose(n_s @ v, 1.0 * v, atol=1e-14)


def test_state_vector_normalizes_and_validates():
    space = ModeSpace((2,), ("S",))
    v = StateVector(space, np.array([3.0, 4.0]))
    np.testing.assert_allclose(np.linalg.norm(v.amp), 1.0, rtol=1e-15)
    with pytest.raises(ValueError):
        StateVector(space, np.zeros(2))
    with pytest.raises(InvalidDimensionError):
        StateVector(space, np.ones(3))


def test_density_operator_invariants():
    space = ModeSpace((2,), ("S",))
    with pytest.raises(ValueError):
        DensityOperator(space, np.array([[0.5, 0.5], [0.0, 0.5]]))
    with pytest.raises(ValueError):
        DensityOperator(space, np.eye(2))  # trace 2 with no recorded tail
    rho = DensityOperator(space, np.diag([0.75, 0.25]).astype(complex))
    rho.validate()
    bad = DensityOperator(space, np.array([[1.2, 0.0], [0.0, -0.2]], dtype=complex))
    with pytest.raises(ValueError):
        bad.validate()


def test_partial_trace_of_product_state():
    space = ModeSpace((2, 3), ("S", "I"))
    ps = np.array([0.25, 0.75])
    pi = np.array([0.5, 0.3, 0.2])
    rho = DensityOperator(space, np.diag(np.kron(ps, pi)).astype(complex))
    red_s = partial_trace(rho, "S")
    red_i = partial_trace(rho, ["I"])
    np.testing.assert_allclose(np.diag(red_s.mat).real, ps, atol=1e-14)
    np.testing.assert_allclose(np.diag(red_i.mat).real, pi, atol=1e-14)
    assert red_i.space.labels == ("I",)


def test_partial_trace_of_entangled_state_is_mixed():
    space = ModeSpace((2, 2), ("S", "I"))
    bell = StateVector(space, np.array([1.0, 0.0, 0.0, 1.0]) / np.sqrt(2))
    red = partial_trace(bell.density(), "S")
    np.testing.assert_allclose(red.mat, 0.5 * np.eye(2), atol=1e-14)


def test_partial_trace_preserves_mode_order_and_trace():
    space = ModeSpace((2, 2, 3), ("R", "S", "I"))
    rng = np.random.default_rng(5)
    g = rng.standard_normal((12, 12)) + 1j * rng.standard_normal((12, 12))
    m = g @ g.conj().T
    m /= np.trace(m).real
    rho = DensityOperator(space, m)
    red = partial_trace(rho, ["I", "R"])  # request order must not matter
    assert red.space.labels == ("R", "I")
    np.testing.assert_allclose(np.trace(red.mat).real, 1.0, atol=1e-12)


def test_hermitian_eigen_sorted_and_checked():
    mat = np.diag([0.1, 0.9, 0.0]).astype(complex)
    es = hermitian_eigen(mat)
    assert isinstance(es, EigenSystem)
    np.testing.assert_allclose(es.values, [0.9, 0.1, 0.0], atol=1e-14)
    recon = (es.vectors * es.values) @ es.vectors.conj().T
    np.testing.assert_allclose(recon, mat, atol=1e-14)
    with pytest.raises(ValueError):
        hermitian_eigen(np.array([[0.0, 1.0], [0.0, 0.0]]))


def test_matrix_power_handles_zero_eigenvalues():
    rho = np.diag([0.36, 0.64, 0.0]).astype(complex)
    half = matrix_power(rho, 0.5)
    np.testing.assert_allclose(np.diag(half).real, [0.6, 0.8, 0.0], atol=1e-14)
    # s = 0 gives the support projector, not the identity
    proj = matrix_power(rho, 0.0)
    np.testing.assert_allclose(np.diag(proj).real, [1.0, 1.0, 0.0], atol=1e-14)
    with pytest.raises(ValueError):
        matrix_power(rho, 1.5)


def test_trace_norm_of_hermitian_difference():
    a = np.diag([0.7, 0.3]).astype(complex)
    b = np.diag([0.2, 0.8]).astype(complex)
    assert trace_norm(a - b) == pytest.approx(1.0, abs=1e-14)
    with pytest.raises(ValueError):
        trace_norm(np.array([[0.0, 1.0], [0.0, 0.0]]))


def test_expectation_on_state_vector():
    space = ModeSpace((3,), ("S",))
    v = StateVector(space, np.array([0.0, 1.0, 0.0]))
    n_op = annihilation(3).conj().T @ annihilation(3)
    assert expectation(n_op, v) == pytest.approx(1.0, abs=1e-14)
