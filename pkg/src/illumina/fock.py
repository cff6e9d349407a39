"""Dense linear algebra on truncated multimode Fock spaces.

Joint indexing convention (shared by every module in this package): the
basis of a multimode space is ordered ROW-MAJOR over the per-mode
occupation numbers, i.e. for dims (d0, d1, d2) the flat index of
|n0, n1, n2> is (n0*d1 + n1)*d2 + n2.  This matches ``numpy.kron`` order
with the first mode as the most significant factor, and every partial
trace below relies on it.

Everything here is a pure function over immutable values; arrays are
frozen (writeable=False) after construction so instances can be shared
across worker threads.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

# Absolute eigenvalue floor (after trace normalization) below which an
# eigenvalue is treated as exactly zero for support decisions (fractional
# matrix powers, QFI pair sums, Chernoff traces).  Double-precision
# eigensolver noise on unit-trace operators sits well below this.
EPS_EIG = 1e-12

_HERM_TOL = 1e-12


class InvalidDimensionError(ValueError):
    """A mode dimension or matrix size is not usable."""


def _freeze(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class ModeSpace:
    """Ordered collection of truncated bosonic modes.

    dims[k] is the Fock-space dimension of mode k (levels 0..dims[k]-1)
    and labels[k] its name (conventionally "S" signal, "I" idler, "B"
    thermal bath, "R" kept return port).
    """

    dims: tuple[int, ...]
    labels: tuple[str, ...]

    def __post_init__(self):
        object.__setattr__(self, "dims", tuple(int(d) for d in self.dims))
        object.__setattr__(self, "labels", tuple(self.labels))
        if len(self.dims) != len(self.labels):
            raise InvalidDimensionError("dims and labels must have equal length")
        if any(d < 1 for d in self.dims):
            raise InvalidDimensionError(f"mode dimensions must be >= 1, got {self.dims}")
        if len(set(self.labels)) != len(self.labels):
            raise ValueError(f"mode labels must be unique, got {self.labels}")

    @property
    def dim(self) -> int:
        """Total (product) dimension of the joint space."""
        out = 1
        for d in self.dims:
            out *= d
        return out

    def axis(self, label: str) -> int:
        try:
            return self.labels.index(label)
        except ValueError:
            raise KeyError(f"no mode labeled {label!r} in {self.labels}") from None

    def dim_of(self, label: str) -> int:
        return self.dims[self.axis(label)]

    def subspace(self, keep: tuple[str, ...]) -> "ModeSpace":
        axes = [self.axis(lb) for lb in keep]
        return ModeSpace(tuple(self.dims[a] for a in axes), tuple(keep))


@dataclass(frozen=True)
class StateVector:
    """Normalized amplitude vector over a ModeSpace (row-major indexing).

    ``tail`` records probability mass discarded by truncation during
    construction (constructors renormalize, so ||amp|| = 1 regardless).
    """

    space: ModeSpace
    amp: np.ndarray
    tail: float = 0.0

    def __post_init__(self):
        amp = np.asarray(self.amp, dtype=complex).reshape(-1)
        if amp.size != self.space.dim:
            raise InvalidDimensionError(
                f"amplitude length {amp.size} != space dimension {self.space.dim}"
            )
        nrm = np.linalg.norm(amp)
        if abs(nrm - 1.0) > 1e-12:
            if nrm == 0.0:
                raise ValueError("cannot normalize a zero state vector")
            amp = amp / nrm
        object.__setattr__(self, "amp", _freeze(amp))

    def as_tensor(self) -> np.ndarray:
        """View of the amplitudes shaped (d0, d1, ...)."""
        return self.amp.reshape(self.space.dims)

    def density(self) -> "DensityOperator":
        return DensityOperator(self.space, np.outer(self.amp, self.amp.conj()), tail=self.tail)


@dataclass(frozen=True)
class DensityOperator:
    """Hermitian PSD matrix over a ModeSpace.

    Trace is 1 up to the recorded truncation ``tail`` (sub-normalized
    operators carry their discarded mass explicitly).  Hermiticity is
    checked at construction; PSD-ness is an invariant of how operators
    are built here and is enforced by ``validate()`` in the test suite
    rather than with an eigensolve on every construction.
    """

    space: ModeSpace
    mat: np.ndarray
    tail: float = 0.0

    def __post_init__(self):
        mat = np.asarray(self.mat, dtype=complex)
        n = self.space.dim
        if mat.shape != (n, n):
            raise InvalidDimensionError(f"matrix shape {mat.shape} != ({n}, {n})")
        herm_err = np.abs(mat - mat.conj().T).max() if n else 0.0
        if herm_err > _HERM_TOL:
            raise ValueError(f"matrix is not Hermitian (max asymmetry {herm_err:.3e})")
        tr_err = abs(mat.trace().real - 1.0)
        if tr_err > 1e-10 + self.tail:
            raise ValueError(
                f"trace deviates from 1 by {tr_err:.3e}, beyond recorded tail {self.tail:.3e}"
            )
        object.__setattr__(self, "mat", _freeze(mat))

    def validate(self, psd_tol: float = 1e-10) -> None:
        """Full invariant check (includes an eigensolve); used in tests."""
        w = np.linalg.eigvalsh(self.mat)
        if w.min() < -psd_tol:
            raise ValueError(f"operator has eigenvalue {w.min():.3e} < -{psd_tol}")


@dataclass(frozen=True)
class EigenSystem:
    """Eigendecomposition with eigenvalues sorted descending."""

    values: np.ndarray
    vectors: np.ndarray  # column k is the eigenvector of values[k]

    def __post_init__(self):
        object.__setattr__(self, "values", _freeze(np.asarray(self.values, dtype=float)))
        object.__setattr__(self, "vectors", _freeze(np.asarray(self.vectors, dtype=complex)))


def annihilation(dim: int) -> np.ndarray:
    """Single-mode annihilation operator a with a|n> = sqrt(n)|n-1>.

    Entries A[n-1, n] = sqrt(n) for 1 <= n < dim.
    """
    dim = int(dim)
    if dim < 1:
        raise InvalidDimensionError("annihilation requires dim >= 1")
    a = np.zeros((dim, dim), dtype=complex)
    n = np.arange(1, dim)
    a[n - 1, n] = np.sqrt(n)
    return a


def embed(op: np.ndarray, mode: str, space: ModeSpace) -> np.ndarray:
    """Lift a single-mode operator to the joint space: 1 ⊗ ... ⊗ op ⊗ ... ⊗ 1."""
    op = np.asarray(op, dtype=complex)
    d = space.dim_of(mode)
    if op.shape != (d, d):
        raise InvalidDimensionError(
            f"operator shape {op.shape} does not match mode {mode!r} dimension {d}"
        )
    out = np.array([[1.0 + 0.0j]])
    for lb, dk in zip(space.labels, space.dims):
        out = np.kron(out, op if lb == mode else np.eye(dk, dtype=complex))
    return out


def _as_matrix(rho) -> np.ndarray:
    return rho.mat if isinstance(rho, DensityOperator) else np.asarray(rho, dtype=complex)


def partial_trace(rho: DensityOperator, keep) -> DensityOperator:
    """Trace out every mode not in ``keep``; kept modes stay in space order."""
    keep = [keep] if isinstance(keep, str) else list(keep)
    if not keep:
        raise ValueError("keep set must be nonempty")
    axes_keep = sorted(rho.space.axis(lb) for lb in keep)
    labels_keep = tuple(rho.space.labels[a] for a in axes_keep)

    dims = rho.space.dims
    k = len(dims)
    t = rho.mat.reshape(dims + dims)  # axes: row modes 0..k-1, col modes k..2k-1
    for ax in sorted((a for a in range(k) if a not in axes_keep), reverse=True):
        t = np.trace(t, axis1=ax, axis2=ax + (t.ndim // 2))
        # tracing removed one row axis and one col axis; remaining axes shift down
    sub = rho.space.subspace(labels_keep)
    return DensityOperator(sub, t.reshape(sub.dim, sub.dim), tail=rho.tail)


def hermitian_eigen(rho) -> EigenSystem:
    """Descending-order eigendecomposition of a Hermitian matrix."""
    mat = _as_matrix(rho)
    herm_err = np.abs(mat - mat.conj().T).max()
    if herm_err > 1e-10:
        raise ValueError(f"input is not Hermitian (max asymmetry {herm_err:.3e})")
    w, v = np.linalg.eigh(mat)
    order = np.argsort(w)[::-1]
    return EigenSystem(w[order], v[:, order])


def matrix_power(rho, s: float) -> np.ndarray:
    """Fractional power rho^s for s in [0, 1] with a hard support floor.

    Eigenvalues below EPS_EIG count as exact zeros, and 0^s := 0 for every
    s including s = 0, so rho^0 is the projector onto the support.
    """
    if not 0.0 <= s <= 1.0:
        raise ValueError(f"s must lie in [0, 1], got {s}")
    es = hermitian_eigen(rho)
    w = np.where(es.values > EPS_EIG, es.values, 0.0)
    ws = np.where(w > 0.0, w**s, 0.0)
    return (es.vectors * ws) @ es.vectors.conj().T


def trace_norm(a) -> float:
    """||A||_1 = sum of |eigenvalues| for Hermitian A."""
    mat = _as_matrix(a)
    herm_err = np.abs(mat - mat.conj().T).max()
    if herm_err > 1e-10:
        raise ValueError(f"trace_norm expects a Hermitian matrix (asymmetry {herm_err:.3e})")
    return float(np.abs(np.linalg.eigvalsh(mat)).sum())


def expectation(op: np.ndarray, psi: StateVector) -> complex:
    """<psi| op |psi> on the joint space."""
    return complex(psi.amp.conj() @ (op @ psi.amp))
