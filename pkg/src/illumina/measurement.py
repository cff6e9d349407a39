"""Number-difference interferometric detection of a weakly reflected probe.

The receiver interferes the return mode with the retained idler on a
balanced beam splitter and counts the photon-number difference between
the two output ports.  For return r = eta a_S + sqrt(1 - eta^2) b the
measured observable is

    M = eta (a_I^dag a_S + a_I a_S^dag)
        + sqrt(1 - eta^2) (a_I^dag b + a_I b^dag),

whose first two moments under both hypotheses follow in closed form from
the probe moments of X = a_I^dag a_S + a_I a_S^dag and the thermal
occupation:

    mean_1 = eta <X>,        mean_0 = 0,
    var_0  = (2 n_th + 1) <n_I> + n_th,
    var_1  = eta^2 Var(X) + (1 - eta^2) var_0.

The single-shot signal-to-noise ratio is
(mean_1 - mean_0) / (sigma_1 + sigma_0), and the matched decision
threshold on the per-shot (or per-batch mean) outcome is the
variance-weighted point (sigma_1 mean_0 + sigma_0 mean_1) /
(sigma_0 + sigma_1), where both hypotheses are equally many standard
deviations away.

`outcome_pmf` computes the exact count-difference distribution by
propagating each thermal Fock component through the reflection stage and
the balanced mixer (both are sector-wise beam-splitter applications),
and `simulate_detection` Monte-Carlos batched threshold tests against
it with counter-based per-trial random streams.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .fock import ModeSpace, StateVector, annihilation, embed
from .states import DEFAULT_POLICY, TruncationPolicy, _geometric_cutoff, thermal_weights
from .channel import bs_apply


@dataclass(frozen=True)
class MomentReport:
    """First and second moments of the count difference under H0 and H1."""

    mean0: float
    mean1: float
    sigma0: float
    sigma1: float
    threshold: float


@dataclass(frozen=True)
class SnrReport:
    """Single-shot SNR with the moments behind it."""

    snr: float
    moments: MomentReport
    eta: float
    n_th: float
    degenerate: bool


@dataclass(frozen=True)
class OutcomePmf:
    """Distribution of the count difference on its integer support."""

    support: np.ndarray
    probs: np.ndarray
    tail: float

    def mean(self) -> float:
        total = float(np.sum(self.probs))
        return float(np.dot(self.support, self.probs)) / total

    def variance(self) -> float:
        total = float(np.sum(self.probs))
        mu = self.mean()
        return float(np.dot(self.support.astype(float) ** 2, self.probs)) / total - mu * mu

    def std(self) -> float:
        return math.sqrt(max(self.variance(), 0.0))


def _validate_eta_nth(eta: float, n_th: float) -> None:
    if not 0.0 <= eta <= 1.0:
        raise ValueError(f"eta must lie in [0, 1], got {eta}")
    if n_th < 0:
        raise ValueError(f"n_th must be >= 0, got {n_th}")


def m_operator(eta: float, space: ModeSpace) -> np.ndarray:
    """Dense count-difference observable on a ("S", "B", "I") space."""
    if not 0.0 <= eta <= 1.0:
        raise ValueError(f"eta must lie in [0, 1], got {eta}")
    for label in ("S", "B", "I"):
        if label not in space.labels:
            raise ValueError(f"space must carry mode '{label}', has {space.labels}")
    a_s = embed(annihilation(space.dim_of("S")), "S", space)
    b = embed(annihilation(space.dim_of("B")), "B", space)
    a_i = embed(annihilation(space.dim_of("I")), "I", space)
    cross_s = a_i.conj().T @ a_s + a_s.conj().T @ a_i
    cross_b = a_i.conj().T @ b + b.conj().T @ a_i
    return eta * cross_s + math.sqrt(1.0 - eta * eta) * cross_b


def moments(probe: StateVector, eta: float, n_th: float) -> MomentReport:
    """Closed-form count-difference moments for a pure ("S", "I") probe."""
    _validate_eta_nth(eta, n_th)
    if probe.space.labels != ("S", "I"):
        raise ValueError(f"probe space must be labeled ('S', 'I'), got {probe.space.labels}")
    space = probe.space
    a_s = embed(annihilation(space.dim_of("S")), "S", space)
    a_i = embed(annihilation(space.dim_of("I")), "I", space)
    x = a_i.conj().T @ a_s + a_s.conj().T @ a_i
    amp = probe.amp
    x_amp = x @ amp
    ex = float(np.real(np.vdot(amp, x_amp)))
    ex2 = float(np.real(np.vdot(x_amp, x_amp)))
    n_i = float(np.real(np.vdot(a_i @ amp, a_i @ amp)))
    var0 = (2.0 * n_th + 1.0) * n_i + n_th
    var1 = eta * eta * max(ex2 - ex * ex, 0.0) + (1.0 - eta * eta) * var0
    sigma0 = math.sqrt(var0)
    sigma1 = math.sqrt(var1)
    mean1 = eta * ex
    denom = sigma0 + sigma1
    threshold = (sigma0 * mean1) / denom if denom > 0 else 0.0
    return MomentReport(mean0=0.0, mean1=mean1, sigma0=sigma0, sigma1=sigma1, threshold=threshold)


def snr(probe: StateVector, eta: float, n_th: float) -> SnrReport:
    """Single-shot SNR (mean1 - mean0) / (sigma1 + sigma0); 0/0 -> 0."""
    rep = moments(probe, eta, n_th)
    denom = rep.sigma0 + rep.sigma1
    degenerate = denom == 0.0
    value = 0.0 if degenerate else (rep.mean1 - rep.mean0) / denom
    return SnrReport(snr=value, moments=rep, eta=eta, n_th=n_th, degenerate=degenerate)


def snr_coherent_closed(
    n_total: float, n_s: float, theta: float, eta: float, n_th: float
) -> float:
    """SNR of a coherent pair with energies (N_S, N - N_S) and relative phase.

    numerator = 2 eta sqrt(N_S (N - N_S)) cos(theta); the H1 variance in
    closed form is N - (1 - eta^2) N_S + (2 (N - N_S) + 1)(1 - eta^2) n_th.
    """
    _validate_eta_nth(eta, n_th)
    if n_total < 0 or n_s < 0 or n_s > n_total:
        raise ValueError(f"need 0 <= N_S <= N, got N_S={n_s}, N={n_total}")
    n_i = n_total - n_s
    num = 2.0 * eta * math.sqrt(n_s * n_i) * math.cos(theta)
    var1 = n_total - (1.0 - eta * eta) * n_s + (2.0 * n_i + 1.0) * (1.0 - eta * eta) * n_th
    var0 = (2.0 * n_th + 1.0) * n_i + n_th
    denom = math.sqrt(var1) + math.sqrt(var0)
    if denom == 0.0:
        return 0.0
    return num / denom


def p_err_gaussian(snr_value: float, m: int) -> float:
    """Chernoff-style envelope exp(-m snr^2 / 2) on the batched error."""
    if not isinstance(m, (int, np.integer)) or m < 1:
        raise ValueError(f"m must be a positive integer, got {m}")
    return math.exp(-0.5 * m * snr_value * snr_value)


def p_err_gaussian_threshold(snr_value: float, m: int) -> float:
    """Gaussian prediction Phi(-sqrt(m) snr) for the threshold test on the mean.

    Under both-hypotheses-Gaussian batching the threshold sits sqrt(m) snr
    standard errors from either mean, so each error arm has mass
    0.5 erfc(sqrt(m) snr / sqrt 2); this never exceeds 1/2 and is upper
    bounded by the exp(-m snr^2 / 2) envelope.
    """
    if not isinstance(m, (int, np.integer)) or m < 1:
        raise ValueError(f"m must be a positive integer, got {m}")
    return 0.5 * math.erfc(math.sqrt(m) * snr_value / math.sqrt(2.0))


def outcome_pmf(
    probe: StateVector,
    eta: float,
    n_th: float,
    policy: TruncationPolicy = DEFAULT_POLICY,
) -> OutcomePmf:
    """Exact pmf of the output count difference (idler port minus bath port).

    Each thermal Fock component |m> is propagated as a pure three-mode
    state: the reflection beam splitter with mixing angle arcsin(eta)
    acts on (S, B), then the balanced mixer acts on (B, I); outcome
    probabilities are read off in the number basis and binned by the
    count difference.  Cost grows with the thermal cutoff, so this is
    meant for small-to-moderate n_th.
    """
    _validate_eta_nth(eta, n_th)
    if probe.space.labels != ("S", "I"):
        raise ValueError(f"probe space must be labeled ('S', 'I'), got {probe.space.labels}")
    d_s, d_i = probe.space.dims
    m_cut = _geometric_cutoff(n_th / (1.0 + n_th), policy)
    p = thermal_weights(n_th, m_cut)
    theta = math.asin(eta)
    psi = probe.as_tensor()
    width = d_s + m_cut + d_i - 2
    pmf = np.zeros(2 * width + 1)
    offset = width
    for m in range(m_cut + 1):
        t0 = np.zeros((d_s, m + 1, d_i), dtype=complex)
        t0[:, m, :] = psi
        t1 = bs_apply(t0, axis_a=0, axis_b=1, theta=theta)
        t2 = bs_apply(t1, axis_a=1, axis_b=2, theta=math.pi / 4.0)
        prob = np.sum(np.abs(t2) ** 2, axis=0)
        nb = np.arange(prob.shape[0])
        ni = np.arange(prob.shape[1])
        delta = ni[None, :] - nb[:, None]
        np.add.at(pmf, (delta + offset).ravel(), p[m] * prob.ravel())
    support = np.arange(-width, width + 1)
    keep = np.flatnonzero(pmf > 0.0)
    if keep.size:
        lo, hi = keep[0], keep[-1]
        support, pmf = support[lo : hi + 1], pmf[lo : hi + 1]
    q = n_th / (1.0 + n_th)
    tail = probe.tail + (q ** (m_cut + 1) if q > 0 else 0.0)
    return OutcomePmf(support=support, probs=pmf, tail=tail)


def simulate_detection(
    pmf0: OutcomePmf,
    pmf1: OutcomePmf,
    m: int,
    trials: int,
    seed: int,
) -> tuple[float, float]:
    """Monte-Carlo the batched threshold test between two outcome pmfs.

    Each trial draws m outcomes, averages them, and compares the mean to
    the variance-weighted threshold between the two pmf means.  Per-trial
    randomness comes from dedicated counter-based streams keyed by
    (seed, 2 * trial + hypothesis), so results are reproducible and
    independent of trial ordering.  Returns (p_err_hat, stderr) at equal
    priors.
    """
    if not isinstance(m, (int, np.integer)) or m < 1:
        raise ValueError(f"m must be a positive integer, got {m}")
    if not isinstance(trials, (int, np.integer)) or trials < 1:
        raise ValueError(f"trials must be a positive integer, got {trials}")
    if not isinstance(seed, (int, np.integer)) or seed < 0:
        raise ValueError(f"seed must be a nonnegative integer, got {seed}")
    mu0, mu1 = pmf0.mean(), pmf1.mean()
    s0, s1 = pmf0.std(), pmf1.std()
    denom = s0 + s1
    thr = (s1 * mu0 + s0 * mu1) / denom if denom > 0 else 0.5 * (mu0 + mu1)
    sign = 1.0 if mu1 >= mu0 else -1.0
    if (
        pmf0.support.shape == pmf1.support.shape
        and np.array_equal(pmf0.support, pmf1.support)
        and np.allclose(pmf0.probs, pmf1.probs, rtol=0.0, atol=1e-14)
    ):
        warnings.warn("hypotheses have identical outcome distributions", stacklevel=2)
    err_rates = []
    for lane, pmf in enumerate((pmf0, pmf1)):
        cdf = np.cumsum(pmf.probs)
        cdf /= cdf[-1]
        support = pmf.support.astype(float)
        errors = 0
        for trial in range(trials):
            gen = np.random.Generator(
                np.random.Philox(key=np.array([seed, 2 * trial + lane], dtype=np.uint64))
            )
            draws = support[np.searchsorted(cdf, gen.random(m), side="right")]
            decide_h1 = sign * (draws.mean() - thr) >= 0.0
            wrong = decide_h1 if lane == 0 else not decide_h1
            errors += int(wrong)
        err_rates.append(errors / trials)
    p0, p1 = err_rates
    p_err = 0.5 * (p0 + p1)
    stderr = 0.5 * math.sqrt(p0 * (1.0 - p0) / trials + p1 * (1.0 - p1) / trials)
    return p_err, stderr
