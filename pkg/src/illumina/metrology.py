"""Estimation and discrimination figures of merit at weak reflectivity.

Quantum Fisher information (QFI) of the channel family rho_eta at eta = 0,
via two routes that must agree:

* a generic eigendecomposition path working on any (rho_0, d rho/d eta)
  pair, and
* a fast path exploiting the eta = 0 product structure
  rho_0 = rho_th (x) rho_I with a Fock-diagonal idler marginal, where the
  first-order response only couples thermal neighbours (m-1, m), giving

      F_Q = 4 sum_{m>=1} m (p_{m-1} - p_m)^2
                sum_{i i'} |A_{i i'}|^2 / (p_m r_i + p_{m-1} r_{i'})

  with A the probe's idler step operator and r the idler weights.

At exactly n_th = 0 the family changes rank at eta = 0 and the
eigen-formula is discontinuous there; every emerging return-level-one
block then contributes its full second-order growth rate, and the sums
telescope to the continuous eta -> 0+ limit F_Q = 4 * <n_S>.  The fast
path returns that limit so that sweeps over n_th behave continuously and
match the coherent closed form 4 N_S / (1 + 2 n_th) at n_th = 0.

Discrimination quantities (fidelity, Helstrom error, Chernoff/
Bhattacharyya overlaps) are evaluated per connected block of the joint
support pattern.  Matrices produced by the channel for definite-total-
photon probes are exactly block diagonal in (return + idler) occupation,
so this both speeds the computation up and removes eigen-noise from the
cross-block zeros — important when resolving 1 - F ~ F_Q eta^2 / 8 at
eta ~ 1e-2.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import eigh, eigvalsh
from scipy.optimize import minimize_scalar
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components

from .channel import idler_step_operator
from .fock import EPS_EIG, DensityOperator, StateVector
from .states import (
    DEFAULT_POLICY,
    CoherentProbe,
    NpeState,
    TruncationPolicy,
    thermal_weights,
)

PAIR_FLOOR = 1e-12
_NEG_EIG_LIMIT = -1e-10


@dataclass(frozen=True)
class QfiReport:
    """QFI value with provenance of the evaluation route."""

    f_q: float
    support_dim: int
    pair_floor: float
    method: str


@dataclass(frozen=True)
class ErrorBounds:
    """Asymptotic error-probability envelope from the QFI at weak eta."""

    lower: float
    upper: float
    m_copies: int
    eta: float
    f_q: float


@dataclass(frozen=True)
class DiscriminationReport:
    """Single-copy discrimination summary for a state pair."""

    p_err_helstrom: float
    fidelity: float
    chernoff_q: float
    chernoff_s_star: float
    priors: tuple[float, float]


def qfi_at_zero(rho0: DensityOperator, drho: np.ndarray) -> QfiReport:
    """Generic-path QFI: 2 sum_{j k} |<j|drho|k>|^2 / (l_j + l_k).

    Eigenvalue pairs with l_j + l_k <= pair_floor are dropped (the state
    does not move along directions of vanishing weight).
    """
    mat = np.asarray(drho)
    if mat.shape != rho0.mat.shape:
        raise ValueError(
            f"drho shape {mat.shape} does not match the state {rho0.mat.shape}"
        )
    if np.max(np.abs(mat - mat.conj().T)) > 1e-10:
        raise ValueError("drho must be Hermitian")
    lam, vec = eigh(rho0.mat)
    lam = np.clip(lam, 0.0, None)
    m = vec.conj().T @ mat @ vec
    pair_sum = lam[:, None] + lam[None, :]
    mask = pair_sum > PAIR_FLOOR
    f_q = 2.0 * float(np.sum((np.abs(m[mask]) ** 2) / pair_sum[mask]))
    support_dim = int(np.count_nonzero(lam > EPS_EIG))
    return QfiReport(f_q=f_q, support_dim=support_dim, pair_floor=PAIR_FLOOR, method="generic")


def qfi_coherent_closed(n_s: float, n_th: float) -> float:
    """Closed-form QFI of a coherent probe: 4 N_S / (1 + 2 n_th)."""
    if n_s < 0:
        raise ValueError(f"signal energy must be >= 0, got {n_s}")
    if n_th < 0:
        raise ValueError(f"n_th must be >= 0, got {n_th}")
    return 4.0 * n_s / (1.0 + 2.0 * n_th)


def _msum_cutoff(n_th: float) -> int:
    """Thermal level beyond which fast-path terms are below ~1e-18."""
    q = n_th / (1.0 + n_th)
    if q <= 0.0:
        return 1
    return max(1, int(math.ceil(math.log(1e-18) / math.log(q))) + 4)


def _thermal_pair_sum(
    n_th: float, weights: np.ndarray, r_row: np.ndarray, r_col: np.ndarray, r_all: np.ndarray
) -> tuple[float, int]:
    """4 sum_m m (p_{m-1}-p_m)^2 sum_pairs w / (p_m r_row + p_{m-1} r_col).

    weights, r_row, r_col are aligned per coherence pair (i, i'); pairs
    whose eigenvalue sum is at or below PAIR_FLOOR are dropped, matching
    the generic path.  r_all is the full idler weight vector, used only
    for the support count.
    """
    m_cut = _msum_cutoff(n_th)
    p = thermal_weights(n_th, m_cut)
    m = np.arange(1, m_cut + 1)
    gain = m * (p[m - 1] - p[m]) ** 2
    denom = p[m][:, None] * r_row[None, :] + p[m - 1][:, None] * r_col[None, :]
    mask = denom > PAIR_FLOOR
    ratio = np.zeros_like(denom)
    ratio[mask] = np.broadcast_to(weights, denom.shape)[mask] / denom[mask]
    f_q = 4.0 * float(np.sum(gain[:, None] * ratio))
    support = int(np.count_nonzero(np.outer(p, r_all) > EPS_EIG))
    return f_q, support


def _probe_vector_fast(probe: StateVector, n_th: float) -> QfiReport:
    psi = probe.as_tensor()
    marginal = np.tensordot(psi, psi.conj(), axes=(0, 0))
    off = marginal - np.diag(np.diag(marginal))
    if np.max(np.abs(off)) > 1e-12:
        raise ValueError(
            "fast path requires a Fock-diagonal idler marginal; "
            "use qfi_at_zero for general probes"
        )
    r = np.clip(np.diag(marginal).real, 0.0, None)
    if n_th == 0.0:
        n_s = float(np.sum(np.arange(psi.shape[0]) * np.sum(np.abs(psi) ** 2, axis=1)))
        support_dim = int(np.count_nonzero(r > EPS_EIG))
        return QfiReport(4.0 * n_s, support_dim, PAIR_FLOOR, "product_fast")
    a = idler_step_operator(probe)
    rows, cols = np.nonzero(np.abs(a) > 0.0)
    weights = np.abs(a[rows, cols]) ** 2
    f_q, support = _thermal_pair_sum(n_th, weights, r[rows], r[cols], r)
    return QfiReport(f_q, support, PAIR_FLOOR, "product_fast")


def qfi_product_fast(
    probe: NpeState | CoherentProbe | StateVector,
    n_th: float,
    policy: TruncationPolicy = DEFAULT_POLICY,
) -> QfiReport:
    """Fast-path QFI at eta = 0 for probes with Fock-diagonal idler marginal.

    Accepts an NpeState (coherences only between neighbouring idler
    levels), a CoherentProbe (rank-one idler, closed-form pair sum), or a
    general StateVector on ("S", "I") whose idler marginal is diagonal
    (e.g. two-mode squeezed probes).  At n_th = 0 returns the continuous
    eta -> 0+ limit 4 <n_S>.
    """
    if n_th < 0:
        raise ValueError(f"n_th must be >= 0, got {n_th}")
    if isinstance(probe, NpeState):
        r = np.abs(probe.coeffs) ** 2
        n = probe.N
        if n_th == 0.0:
            f_q = 4.0 * float(np.sum((n - np.arange(n + 1)) * r))
            support_dim = int(np.count_nonzero(r > EPS_EIG))
            return QfiReport(f_q, support_dim, PAIR_FLOOR, "product_fast")
        i = np.arange(n)
        weights = (n - i) * r[:-1] * r[1:]
        f_q, support = _thermal_pair_sum(n_th, weights, r[:-1], r[1:], r)
        return QfiReport(f_q, support, PAIR_FLOOR, "product_fast")
    if isinstance(probe, CoherentProbe):
        n_s = probe.signal_energy
        m_cut = _msum_cutoff(n_th)
        p = thermal_weights(n_th, m_cut)
        m = np.arange(1, m_cut + 1)
        denom = p[m] + p[m - 1]
        mask = denom > PAIR_FLOOR
        f_q = 4.0 * n_s * float(
            np.sum(m[mask] * (p[m - 1][mask] - p[m][mask]) ** 2 / denom[mask])
        )
        support_dim = int(np.count_nonzero(p > EPS_EIG))
        return QfiReport(f_q, support_dim, PAIR_FLOOR, "product_fast")
    if isinstance(probe, StateVector):
        if probe.space.labels != ("S", "I"):
            raise ValueError(
                f"probe space must be labeled ('S', 'I'), got {probe.space.labels}"
            )
        return _probe_vector_fast(probe, n_th)
    raise TypeError(f"unsupported probe type: {type(probe).__name__}")


# ---------------------------------------------------------------------------
# State discrimination
# ---------------------------------------------------------------------------


def _check_same_space(rho0: DensityOperator, rho1: DensityOperator) -> None:
    if rho0.space.dims != rho1.space.dims:
        raise ValueError(
            f"states live on different spaces: {rho0.space.dims} vs {rho1.space.dims}"
        )


def _support_blocks(*mats: np.ndarray) -> list[np.ndarray]:
    """Connected components of the joint nonzero pattern of the matrices."""
    pattern = np.zeros(mats[0].shape, dtype=bool)
    for m in mats:
        pattern |= m != 0
    pattern |= np.eye(pattern.shape[0], dtype=bool)
    n_comp, labels = connected_components(csr_matrix(pattern), directed=False)
    order = [np.flatnonzero(labels == c) for c in range(n_comp)]
    return order


def _clipped_eigh(mat: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    lam, vec = eigh(mat)
    if lam.size and lam[0] < _NEG_EIG_LIMIT:
        raise ArithmeticError(
            f"state has eigenvalue {lam[0]:.3e} below the tolerated floor"
        )
    return np.clip(lam, 0.0, None), vec


def fidelity(rho0: DensityOperator, rho1: DensityOperator) -> float:
    """Uhlmann fidelity Tr sqrt(sqrt(rho1) rho0 sqrt(rho1)), blockwise."""
    _check_same_space(rho0, rho1)
    total = 0.0
    for idx in _support_blocks(rho0.mat, rho1.mat):
        sub0 = rho0.mat[np.ix_(idx, idx)]
        sub1 = rho1.mat[np.ix_(idx, idx)]
        lam1, vec1 = _clipped_eigh(sub1)
        root = (vec1 * np.sqrt(lam1)) @ vec1.conj().T
        prod = root @ sub0 @ root
        w = eigvalsh(prod)
        if w.size and w[0] < _NEG_EIG_LIMIT:
            raise ArithmeticError(
                f"fidelity product has eigenvalue {w[0]:.3e} below the tolerated floor"
            )
        total += float(np.sum(np.sqrt(np.clip(w, 0.0, None))))
    return total


def helstrom_error(
    rho0: DensityOperator,
    rho1: DensityOperator,
    pi0: float = 0.5,
    pi1: float = 0.5,
) -> float:
    """Minimum discrimination error (1 - ||pi0 rho0 - pi1 rho1||_1) / 2."""
    _check_same_space(rho0, rho1)
    if pi0 < 0 or pi1 < 0 or abs(pi0 + pi1 - 1.0) > 1e-12:
        raise ValueError(f"priors must be nonnegative and sum to 1, got ({pi0}, {pi1})")
    delta = pi0 * rho0.mat - pi1 * rho1.mat
    norm1 = 0.0
    for idx in _support_blocks(delta):
        norm1 += float(np.sum(np.abs(eigvalsh(delta[np.ix_(idx, idx)]))))
    return 0.5 * (1.0 - norm1)


def _overlap_terms(
    rho0: DensityOperator, rho1: DensityOperator
) -> list[tuple[np.ndarray, np.ndarray, np.ndarray]]:
    """Per-block (l0, l1, W) data for s -> Tr(rho0^s rho1^(1-s)).

    Eigenvalues at or below EPS_EIG are treated as exact zeros with the
    support convention 0^s := 0 (including s = 0).
    """
    _check_same_space(rho0, rho1)
    terms = []
    for idx in _support_blocks(rho0.mat, rho1.mat):
        lam0, vec0 = _clipped_eigh(rho0.mat[np.ix_(idx, idx)])
        lam1, vec1 = _clipped_eigh(rho1.mat[np.ix_(idx, idx)])
        lam0 = np.where(lam0 > EPS_EIG, lam0, 0.0)
        lam1 = np.where(lam1 > EPS_EIG, lam1, 0.0)
        w = np.abs(vec0.conj().T @ vec1) ** 2
        terms.append((lam0, lam1, w))
    return terms


def _zero_safe_power(lam: np.ndarray, s: float) -> np.ndarray:
    out = np.zeros_like(lam)
    pos = lam > 0
    out[pos] = lam[pos] ** s
    return out


def _overlap_value(terms, s: float) -> float:
    total = 0.0
    for lam0, lam1, w in terms:
        total += float(_zero_safe_power(lam0, s) @ w @ _zero_safe_power(lam1, 1.0 - s))
    return total


def chernoff(rho0: DensityOperator, rho1: DensityOperator) -> tuple[float, float]:
    """Minimized overlap q = min_s Tr(rho0^s rho1^(1-s)) and its minimizer.

    A 21-point grid over [0, 1] brackets the minimum; bounded scalar
    refinement tightens the minimizer to |ds| <= 1e-6.  The returned q is
    the smallest value seen (grid or refined).
    """
    terms = _overlap_terms(rho0, rho1)
    grid = np.linspace(0.0, 1.0, 21)
    values = np.array([_overlap_value(terms, s) for s in grid])
    k = int(np.argmin(values))
    q_best, s_best = float(values[k]), float(grid[k])
    lo = grid[max(0, k - 1)]
    hi = grid[min(len(grid) - 1, k + 1)]
    if hi > lo:
        res = minimize_scalar(
            lambda s: _overlap_value(terms, s),
            bounds=(lo, hi),
            method="bounded",
            options={"xatol": 1e-6},
        )
        if res.fun < q_best:
            q_best, s_best = float(res.fun), float(res.x)
    return q_best, s_best


def bhattacharyya(rho0: DensityOperator, rho1: DensityOperator) -> float:
    """Overlap at s = 1/2: Tr(sqrt(rho0) sqrt(rho1)); upper bounds Chernoff."""
    return _overlap_value(_overlap_terms(rho0, rho1), 0.5)


def discriminate(
    rho0: DensityOperator,
    rho1: DensityOperator,
    pi0: float = 0.5,
    pi1: float = 0.5,
) -> DiscriminationReport:
    """Bundle Helstrom error, fidelity, and Chernoff data for a state pair."""
    q, s_star = chernoff(rho0, rho1)
    return DiscriminationReport(
        p_err_helstrom=helstrom_error(rho0, rho1, pi0, pi1),
        fidelity=fidelity(rho0, rho1),
        chernoff_q=q,
        chernoff_s_star=s_star,
        priors=(pi0, pi1),
    )


def error_bounds_from_qfi(f_q: float, eta: float, m: int) -> ErrorBounds:
    """Exponential envelope on the m-copy error from the QFI at weak eta.

    lower = exp(-m f_q eta^2 / 4) / 4, upper = exp(-m f_q eta^2 / 8) / 2;
    the lower bound is strictly below the upper for every m, eta, f_q.
    """
    if f_q < 0:
        raise ValueError(f"f_q must be >= 0, got {f_q}")
    if not isinstance(m, (int, np.integer)) or m < 1:
        raise ValueError(f"m must be a positive integer, got {m}")
    x = m * f_q * eta * eta
    return ErrorBounds(
        lower=0.25 * math.exp(-x / 4.0),
        upper=0.5 * math.exp(-x / 8.0),
        m_copies=int(m),
        eta=float(eta),
        f_q=float(f_q),
    )


def fidelity_error_bounds(f: float, m: int) -> tuple[float, float]:
    """Fidelity sandwich on the m-copy symmetric error probability.

    (1 - sqrt(1 - F^(2m))) / 2 <= P_err <= F^m / 2 at equal priors.
    """
    if not -1e-12 <= f <= 1.0 + 1e-12:
        raise ValueError(f"fidelity must lie in [0, 1], got {f}")
    if not isinstance(m, (int, np.integer)) or m < 1:
        raise ValueError(f"m must be a positive integer, got {m}")
    f = min(max(f, 0.0), 1.0)
    fm = f**m
    lower = 0.5 * (1.0 - math.sqrt(max(0.0, 1.0 - fm * fm)))
    return lower, 0.5 * fm
