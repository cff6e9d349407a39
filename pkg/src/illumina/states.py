"""Probe and environment state constructors with truncation accounting.

Probes live on a two-mode space labeled ("S", "I") — signal and idler.
Every constructor that truncates an infinite ladder reports the discarded
probability mass (``tail``) and renormalizes the kept amplitudes; cutoffs
are minimal for the requested tolerance.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .fock import DensityOperator, ModeSpace, StateVector


class TruncationOverflowError(ValueError):
    """The Fock cutoff needed to meet tail_tol exceeds the policy's max_dim."""

    def __init__(self, required_dim: int, max_dim: int):
        self.required_dim = required_dim
        self.max_dim = max_dim
        super().__init__(
            f"required Fock dimension {required_dim} exceeds policy max_dim {max_dim}"
        )


@dataclass(frozen=True)
class TruncationPolicy:
    """Per-mode truncation rule: discard at most tail_tol mass, cap dimension."""

    tail_tol: float = 1e-12
    max_dim: int = 4096

    def __post_init__(self):
        if not 0.0 < self.tail_tol < 1.0:
            raise ValueError(f"tail_tol must lie in (0, 1), got {self.tail_tol}")
        if self.max_dim < 2:
            raise ValueError(f"max_dim must be >= 2, got {self.max_dim}")


DEFAULT_POLICY = TruncationPolicy()


@dataclass(frozen=True)
class NpeState:
    """Definite-total-photon-number entangled probe sum_n a_n |N-n, n>_SI.

    coeffs[n] multiplies the component with n idler photons (and N-n signal
    photons); coefficients are renormalized at construction.
    """

    N: int
    coeffs: np.ndarray

    def __post_init__(self):
        if self.N < 0:
            raise ValueError("N must be a nonnegative integer")
        c = np.asarray(self.coeffs, dtype=complex).reshape(-1)
        if c.size != self.N + 1:
            raise ValueError(f"need {self.N + 1} coefficients for N={self.N}, got {c.size}")
        nrm = np.linalg.norm(c)
        if nrm == 0.0:
            raise ValueError("coefficient vector must be nonzero")
        c = c / nrm
        c.setflags(write=False)
        object.__setattr__(self, "coeffs", c)


@dataclass(frozen=True)
class CoherentProbe:
    """Separable coherent probe |alpha>_S |beta>_I (beta may be 0)."""

    alpha: complex
    beta: complex = 0.0

    @property
    def signal_energy(self) -> float:
        return abs(self.alpha) ** 2

    @property
    def idler_energy(self) -> float:
        return abs(self.beta) ** 2


def _geometric_cutoff(q: float, policy: TruncationPolicy) -> int:
    """Minimal k with q^(k+1) <= tail_tol for the geometric ladder weights."""
    if q <= 0.0:
        return 0
    k = max(0, math.ceil(math.log(policy.tail_tol) / math.log(q)) - 1)
    while q ** (k + 1) > policy.tail_tol:
        k += 1
    while k > 0 and q**k <= policy.tail_tol:
        k -= 1
    if k + 1 > policy.max_dim:
        raise TruncationOverflowError(k + 1, policy.max_dim)
    return k


def thermal_density(n_th: float, policy: TruncationPolicy = DEFAULT_POLICY) -> DensityOperator:
    """Single-mode thermal state diag(p_n), p_n = n_th^n / (1+n_th)^(n+1).

    The operator is left sub-normalized: its trace falls short of 1 by the
    analytic geometric tail q^(k+1), which is recorded as ``tail``.
    """
    if n_th < 0:
        raise ValueError(f"n_th must be >= 0, got {n_th}")
    q = n_th / (1.0 + n_th)
    k = _geometric_cutoff(q, policy)
    p = thermal_weights(n_th, k)
    space = ModeSpace((k + 1,), ("B",))
    return DensityOperator(space, np.diag(p.astype(complex)), tail=q ** (k + 1))


def thermal_weights(n_th: float, cutoff: int) -> np.ndarray:
    """Raw thermal occupation probabilities p_0..p_cutoff (not renormalized)."""
    if n_th < 0:
        raise ValueError(f"n_th must be >= 0, got {n_th}")
    n = np.arange(cutoff + 1)
    if n_th == 0.0:
        p = np.zeros(cutoff + 1)
        p[0] = 1.0
        return p
    q = n_th / (1.0 + n_th)
    return q**n / (1.0 + n_th)


def npe_vector(s: NpeState, space: ModeSpace | None = None) -> StateVector:
    """Amplitude vector of an NpeState on a ("S", "I") space.

    With no space given, the minimal one (both modes N+1 levels) is used.
    """
    if space is None:
        space = ModeSpace((s.N + 1, s.N + 1), ("S", "I"))
    if space.labels != ("S", "I"):
        raise ValueError(f"probe space must be labeled ('S', 'I'), got {space.labels}")
    d_s, d_i = space.dims
    if d_s < s.N + 1 or d_i < s.N + 1:
        raise ValueError(
            f"space dims {space.dims} cannot hold N={s.N} (need >= {s.N + 1} each)"
        )
    t = np.zeros((d_s, d_i), dtype=complex)
    for n in range(s.N + 1):
        t[s.N - n, n] = s.coeffs[n]
    return StateVector(space, t.reshape(-1))


def signal_energy(s: NpeState) -> float:
    """Mean signal photon number N_S = sum_n |a_n|^2 (N - n)."""
    n = np.arange(s.N + 1)
    return float(np.sum(np.abs(s.coeffs) ** 2 * (s.N - n)))


def idler_reduced(s: NpeState) -> DensityOperator:
    """Idler marginal of an NPE probe: diag(|a_n|^2) at idler level n."""
    p = np.abs(s.coeffs) ** 2
    space = ModeSpace((s.N + 1,), ("I",))
    return DensityOperator(space, np.diag(p.astype(complex)))


def _poisson_cutoff(lam: float, policy: TruncationPolicy) -> tuple[int, float]:
    """Minimal k with Poisson(lam) survival probability beyond k <= tail_tol."""
    if lam == 0.0:
        return 0, 0.0
    logp = -lam  # log p_0
    cum = math.exp(logp)
    k = 0
    # Continue past max_dim only to learn the dimension that would be needed.
    hard_stop = 16 * policy.max_dim
    while 1.0 - cum > policy.tail_tol:
        k += 1
        if k > hard_stop:
            raise TruncationOverflowError(k, policy.max_dim)
        logp += math.log(lam / k)
        cum += math.exp(logp)
    if k + 1 > policy.max_dim:
        raise TruncationOverflowError(k + 1, policy.max_dim)
    return k, max(0.0, 1.0 - cum)


def coherent_vector(
    alpha: complex, policy: TruncationPolicy = DEFAULT_POLICY, label: str = "S"
) -> StateVector:
    """Truncated coherent state e^(-|a|^2/2) sum_n a^n/sqrt(n!) |n> (renormalized)."""
    lam = abs(alpha) ** 2
    k, tail = _poisson_cutoff(lam, policy)
    n = np.arange(k + 1)
    if lam == 0.0:
        amp = np.zeros(1, dtype=complex)
        amp[0] = 1.0
    else:
        # log |c_n| = -lam/2 + n log|alpha| - (1/2) log n!
        logmag = -lam / 2 + n * math.log(abs(alpha)) - 0.5 * np.cumsum(
            np.concatenate(([0.0], np.log(np.arange(1, k + 1))))
        )
        phase = np.exp(1j * n * np.angle(alpha))
        amp = np.exp(logmag) * phase
    space = ModeSpace((k + 1,), (label,))
    return StateVector(space, amp, tail=tail)


def coherent_pair(
    alpha: complex, beta: complex, policy: TruncationPolicy = DEFAULT_POLICY
) -> StateVector:
    """Product coherent probe |alpha>_S |beta>_I as one two-mode vector."""
    vs = coherent_vector(alpha, policy, label="S")
    vi = coherent_vector(beta, policy, label="I")
    space = ModeSpace((vs.space.dims[0], vi.space.dims[0]), ("S", "I"))
    amp = np.kron(vs.amp, vi.amp)
    tail = vs.tail + vi.tail
    return StateVector(space, amp, tail=tail)


def tmsv_vector(N_S: float, policy: TruncationPolicy = DEFAULT_POLICY) -> StateVector:
    """Two-mode squeezed vacuum with mean signal photon number N_S.

    Schmidt amplitudes sqrt(N_S^n / (1+N_S)^(n+1)) on |n, n>_SI; the
    squeezing parameter is fixed by sinh^2 r = N_S.
    """
    if N_S < 0:
        raise ValueError(f"N_S must be >= 0, got {N_S}")
    q = N_S / (1.0 + N_S)
    k = _geometric_cutoff(q, policy)
    c = np.sqrt(thermal_weights(N_S, k))
    t = np.zeros((k + 1, k + 1), dtype=complex)
    np.fill_diagonal(t, c)
    space = ModeSpace((k + 1, k + 1), ("S", "I"))
    return StateVector(space, t.reshape(-1), tail=q ** (k + 1))
