"""Weak-reflectivity thermal beam-splitter channel over (return, idler).

The probe's signal mode S is mixed with a thermal bath mode B on a beam
splitter U = exp(theta*G), theta = arcsin(eta), with the generator sign
fixed so that the Heisenberg-picture KEPT output mode is
r = eta*a_S + sqrt(1-eta^2)*b; the other output port (the S slot) is
traced out.  With this convention the eta = 0 output is probe-independent
on the return mode (thermal times the idler marginal).

The beam splitter conserves n_S + n_B, so the evolution is performed
exactly, sector by sector: within the total-occupation-T sector the
generator is a real antisymmetric tridiagonal matrix G_T, and
D G_T D^{-1} = -i S_T with D = diag(i^j) and S_T real symmetric
tridiagonal with off-diagonal sqrt((j+1)(T-j)).  Diagonalizing S_T gives
exp(theta*G_T) = D^{-1} V exp(-i*theta*L) V^T D with no series
truncation.  Thermal mixedness is handled by evolving each bath Fock
component |m> separately (each stays pure) and convexly summing the
reduced outputs in ascending-m order; the output return dimension
d_R = d_S + m_cutoff holds every reachable level, so the only truncation
loss in the whole channel is the recorded thermal tail itself.

Because each bath component carries a definite total occupation, the
output is banded in the return index (|k - k'| < d_S); the accumulation
below fills those bands pairwise with explicit conjugate mirroring, so
the returned matrix is Hermitian to the last bit.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import eigh_tridiagonal

from .fock import DensityOperator, ModeSpace, StateVector, annihilation, embed
from .states import DEFAULT_POLICY, TruncationPolicy, _geometric_cutoff, thermal_weights


@dataclass(frozen=True)
class ChannelParams:
    """Reflectivity eta in [0, 1], thermal occupation n_th >= 0, truncation."""

    eta: float
    n_th: float
    policy: TruncationPolicy = DEFAULT_POLICY

    def __post_init__(self):
        if not 0.0 <= self.eta <= 1.0:
            raise ValueError(f"eta must lie in [0, 1], got {self.eta}")
        if self.n_th < 0:
            raise ValueError(f"n_th must be >= 0, got {self.n_th}")


def generator(space: ModeSpace) -> np.ndarray:
    """Beam-splitter generator G = a_S b^dag - a_S^dag b on the joint space.

    Anti-Hermitian; the sign is fixed so exp(arcsin(eta)*G) sends the bath
    mode to eta*a_S + sqrt(1-eta^2)*b in the Heisenberg picture (hence
    <1,0|G|0,1>_SB = -1).
    """
    a_s = embed(annihilation(space.dim_of("S")), "S", space)
    b = embed(annihilation(space.dim_of("B")), "B", space)
    return a_s @ b.conj().T - a_s.conj().T @ b


# Eigensystems of the symmetric sector matrices S_T are cached globally for
# small sectors (cheap to hold, hot in tests) and window-cached per call for
# large ones (a full cache up to T ~ 600 would hold hundreds of MB).
_GLOBAL_CACHE_MAX_T = 128
_SECTOR_EIG: dict[int, tuple[np.ndarray, np.ndarray]] = {}


def _sector_eigensystem(
    T: int, local: dict[int, tuple[np.ndarray, np.ndarray]] | None = None
) -> tuple[np.ndarray, np.ndarray]:
    cache = _SECTOR_EIG if T <= _GLOBAL_CACHE_MAX_T else local
    if cache is not None:
        hit = cache.get(T)
        if hit is not None:
            return hit
    if T == 0:
        w, v = np.zeros(1), np.ones((1, 1))
    else:
        j = np.arange(T)
        off = np.sqrt((j + 1.0) * (T - j))
        w, v = eigh_tridiagonal(np.zeros(T + 1), off)
    if cache is not None:
        cache[T] = (w, v)
    return w, v


def _sector_unitary_column(
    T: int, j_in: int, theta: float, local=None
) -> np.ndarray:
    """Single column exp(theta*G_T)[:, j_in] of the sector beam splitter."""
    w, v = _sector_eigensystem(T, local)
    u = v @ (v[j_in, :] * np.exp(-1j * theta * w))
    u *= 1j**j_in
    u /= 1j ** np.arange(T + 1)
    return u


def bs_apply(tensor: np.ndarray, axis_a: int, axis_b: int, theta: float) -> np.ndarray:
    """Apply exp(theta*(a b^dag - a^dag b)) to two axes of an amplitude tensor.

    Mode a is the one annihilated in the generator's first term (axis_a);
    both axes grow to da + db - 1 levels so that every total-occupation
    sector evolves exactly.
    """
    t = np.moveaxis(np.asarray(tensor, dtype=complex), (axis_a, axis_b), (0, 1))
    da, db = t.shape[0], t.shape[1]
    rest = t.shape[2:]
    t = t.reshape(da, db, -1)
    d_out = da + db - 1
    out = np.zeros((d_out, d_out, t.shape[2]), dtype=complex)
    local: dict = {}
    for T in range(da + db - 1):
        j_lo, j_hi = max(0, T - db + 1), min(T, da - 1)
        cols = np.arange(j_lo, j_hi + 1)
        x_in = t[cols, T - cols, :]
        w, v = _sector_eigensystem(T, local)
        phase = 1j ** np.arange(T + 1)
        u_cols = (v * np.exp(-1j * theta * w)[None, :]) @ (
            v[cols, :].T * phase[cols][None, :]
        )
        u_cols /= phase[:, None]
        rows = np.arange(T + 1)
        out[rows, T - rows, :] = u_cols @ x_in
    return np.moveaxis(out.reshape(d_out, d_out, *rest), (0, 1), (axis_a, axis_b))


def _output_spaces(probe: StateVector, policy: TruncationPolicy, n_th: float):
    if probe.space.labels != ("S", "I"):
        raise ValueError(
            f"probe space must be labeled ('S', 'I'), got {probe.space.labels}"
        )
    d_s, d_i = probe.space.dims
    q = n_th / (1.0 + n_th)
    m_cut = _geometric_cutoff(q, policy)
    d_r = d_s + m_cut
    return d_s, d_i, m_cut, ModeSpace((d_r, d_i), ("R", "I"))


def _apply_channel_signed(
    probe: StateVector, eta: float, n_th: float, policy: TruncationPolicy = DEFAULT_POLICY
) -> DensityOperator:
    """Channel output for eta of either sign (hook for central differences)."""
    if not -1.0 <= eta <= 1.0:
        raise ValueError(f"eta must lie in [-1, 1], got {eta}")
    d_s, d_i, m_cut, out_space = _output_spaces(probe, policy, n_th)
    d_r = d_s + m_cut
    theta = math.asin(eta)
    psi = probe.as_tensor()
    p = thermal_weights(n_th, m_cut)
    rho4 = np.zeros((d_r, d_i, d_r, d_i), dtype=complex)
    local: dict = {}
    for m in range(m_cut + 1):
        # Sector columns u_T = exp(theta*G_T)[:, T-m]: amplitudes for the
        # bath-|m> component to move T-m signal photons around.
        cols = {
            T: _sector_unitary_column(T, T - m, theta, local)
            for T in range(m, m + d_s)
        }
        for T in range(m, m + d_s):
            u_t = cols[T]
            psi_t = psi[T - m, :]
            for T2 in range(m, T + 1):
                u_t2 = cols[T2]
                j = np.arange(T2 + 1)
                k = T - j  # return level paired with k' = k - (T - T2)
                corr = p[m] * (u_t[j] * u_t2[j].conj())
                block = np.outer(psi_t, psi[T2 - m, :].conj())
                x = corr[:, None, None] * block[None, :, :]
                rho4[k, :, k - (T - T2), :] += x
                if T2 < T:
                    rho4[k - (T - T2), :, k, :] += np.conj(np.swapaxes(x, 1, 2))
        local.pop(m, None)  # sector m is out of the sliding window after this m
    rho = rho4.reshape(d_r * d_i, d_r * d_i)
    q = n_th / (1.0 + n_th)
    tail = probe.tail + q ** (m_cut + 1)
    return DensityOperator(out_space, rho, tail=tail)


def apply_channel(probe: StateVector, params: ChannelParams) -> DensityOperator:
    """Exact finite-eta channel output over modes ("R", "I").

    The probe (on ("S", "I")) is joined with the truncated thermal bath,
    conjugated by the beam splitter, and the lost port is traced out.
    """
    return _apply_channel_signed(probe, params.eta, params.n_th, params.policy)


def idler_step_operator(probe: StateVector) -> np.ndarray:
    """Idler-mode operator A = Tr_S[a_S |psi><psi|] of a probe on ("S", "I").

    A_{i i'} = sum_s sqrt(s+1) psi[s+1, i] conj(psi[s, i']); it carries all
    probe dependence of the channel's first-order response in eta.
    """
    psi = probe.as_tensor()
    d_s = psi.shape[0]
    if d_s == 1:
        return np.zeros((psi.shape[1], psi.shape[1]), dtype=complex)
    weights = np.sqrt(np.arange(1, d_s, dtype=float))
    return np.tensordot(weights[:, None] * psi[1:, :], psi[:-1, :].conj(), axes=(0, 0))


def thermal_ladder_commutators(n_th: float, dim: int) -> tuple[np.ndarray, np.ndarray]:
    """[b^dag, rho_th] and [b, rho_th] on a dim-level mode (exact weights).

    Entries: [b^dag, rho_th] has (m, m-1) = sqrt(m) (p_{m-1} - p_m);
    [b, rho_th] has (m-1, m) = sqrt(m) (p_m - p_{m-1}).
    """
    p = thermal_weights(n_th, dim)
    m = np.arange(1, dim)
    c_dag = np.zeros((dim, dim), dtype=complex)
    c_dag[m, m - 1] = np.sqrt(m) * (p[m - 1] - p[m])
    c = np.zeros((dim, dim), dtype=complex)
    c[m - 1, m] = np.sqrt(m) * (p[m] - p[m - 1])
    return c_dag, c


def drho_deta_at_zero(
    probe: StateVector, n_th: float, policy: TruncationPolicy = DEFAULT_POLICY
) -> np.ndarray:
    """Analytic d(rho_eta)/d(eta) at eta = 0 on the ("R", "I") output space.

    Equals Tr_lost[G rho_in - rho_in G] = [b^dag, rho_th] (x) A
    - [b, rho_th] (x) A^dag, a traceless Hermitian matrix; A is the probe's
    idler step operator.
    """
    if n_th < 0:
        raise ValueError(f"n_th must be >= 0, got {n_th}")
    d_s, d_i, m_cut, out_space = _output_spaces(probe, policy, n_th)
    d_r = d_s + m_cut
    a = idler_step_operator(probe)
    c_dag, c = thermal_ladder_commutators(n_th, d_r)
    return np.kron(c_dag, a) - np.kron(c, a.conj().T)
