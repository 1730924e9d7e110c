"""Small-dimension complex linear algebra: states, Pauli bases, Haar sampling, fidelity.

Everything here works on dense numpy arrays with D = 2**n <= 8, so no attempt
is made at sparse or batched-GPU tricks.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass
from functools import lru_cache, reduce
from typing import Sequence, Union

import numpy as np

# algebraic identities vs. anything that goes through an eigensolver
ATOL = 1e-12
SPECTRAL_ATOL = 1e-10

PAULI_MATRICES = {
    "I": np.eye(2, dtype=complex),
    "X": np.array([[0, 1], [1, 0]], dtype=complex),
    "Y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "Z": np.array([[1, 0], [0, -1]], dtype=complex),
}

SeedLike = Union[int, Sequence[int], np.random.Generator, None]


class DimensionError(ValueError):
    """Raised when operands have incompatible or invalid dimensions."""


def as_rng(seed: SeedLike) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def _frozen(arr: np.ndarray) -> np.ndarray:
    arr = np.array(arr, dtype=complex)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class PureState:
    amplitudes: np.ndarray

    def __post_init__(self):
        amps = _frozen(np.asarray(self.amplitudes).reshape(-1))
        if amps.size == 0:
            raise DimensionError("a state needs at least one amplitude")
        norm = np.linalg.norm(amps)
        if abs(norm - 1.0) > ATOL:
            raise ValueError(f"state is not normalized (norm={norm!r})")
        object.__setattr__(self, "amplitudes", amps)

    @classmethod
    def from_vector(cls, vector) -> "PureState":
        vec = np.asarray(vector, dtype=complex).reshape(-1)
        return cls(vec / np.linalg.norm(vec))

    @property
    def dim(self) -> int:
        return self.amplitudes.size

    def projector(self) -> "DensityMatrix":
        return DensityMatrix(np.outer(self.amplitudes, self.amplitudes.conj()))

    def overlap(self, other: "PureState") -> complex:
        """<self|other>."""
        return complex(np.vdot(self.amplitudes, other.amplitudes))

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.amplitudes, dtype=dtype)


@dataclass(frozen=True, eq=False)
class DensityMatrix:
    """A D x D density operator.

    ``normalized=False`` marks conditional (unnormalized, possibly
    non-Hermitian) operators produced inside the estimators; for those only
    the shape is checked.
    """

    matrix: np.ndarray
    normalized: bool = True

    def __post_init__(self):
        mat = _frozen(self.matrix)
        if mat.ndim != 2 or mat.shape[0] != mat.shape[1]:
            raise DimensionError(f"density matrix must be square, got {mat.shape}")
        if self.normalized:
            if np.max(np.abs(mat - mat.conj().T)) > ATOL:
                raise ValueError("density matrix is not Hermitian")
            if abs(np.trace(mat) - 1.0) > ATOL:
                raise ValueError(f"density matrix trace is {np.trace(mat).real:.3g}, not 1")
            if np.linalg.eigvalsh(mat).min() < -SPECTRAL_ATOL:
                raise ValueError("density matrix has negative eigenvalues")
        object.__setattr__(self, "matrix", mat)

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    @classmethod
    def maximally_mixed(cls, dim: int) -> "DensityMatrix":
        return cls(np.eye(dim, dtype=complex) / dim)

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.matrix, dtype=dtype)


@dataclass(frozen=True, eq=False)
class Projector:
    state: PureState

    @property
    def matrix(self) -> np.ndarray:
        return self.state.projector().matrix


def as_matrix(rho) -> np.ndarray:
    """Density-matrix view of a PureState, DensityMatrix, vector or matrix."""
    if isinstance(rho, PureState):
        return np.outer(rho.amplitudes, rho.amplitudes.conj())
    if isinstance(rho, (DensityMatrix, Projector)):
        return rho.matrix
    arr = np.asarray(rho, dtype=complex)
    if arr.ndim == 1:
        return np.outer(arr, arr.conj())
    if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
        raise DimensionError(f"expected a square matrix, got shape {arr.shape}")
    return arr


def as_vector(psi) -> np.ndarray:
    if isinstance(psi, PureState):
        return psi.amplitudes
    return np.asarray(psi, dtype=complex).reshape(-1)


def ket(index: int, dim: int) -> PureState:
    vec = np.zeros(dim, dtype=complex)
    vec[index] = 1.0
    return PureState(vec)


def n_qubits_of(dim: int) -> int:
    n = int(round(np.log2(dim))) if dim > 0 else -1
    if n < 0 or 2**n != dim:
        raise DimensionError(f"dimension {dim} is not a power of two")
    return n


@dataclass(frozen=True, eq=False)
class OperatorBasis:
    """Ordered unitary, Hermitian, trace-orthogonal operator basis.

    ``trace(Ea^dag Eb) = D * delta_ab`` -- the basis is *not* unit-normalized
    in the plain Hilbert-Schmidt product; see README for why.
    """

    elements: tuple
    labels: tuple

    def __post_init__(self):
        elements = tuple(_frozen(e) for e in self.elements)
        labels = tuple(str(l).upper() for l in self.labels)
        if len(elements) != len(labels):
            raise ValueError("one label per basis element is required")
        dim = elements[0].shape[0]
        if len(elements) != dim * dim:
            raise DimensionError(f"basis for D={dim} needs {dim * dim} elements")
        eye = np.eye(dim)
        for label, e in zip(labels, elements):
            if np.max(np.abs(e @ e.conj().T - eye)) > ATOL:
                raise ValueError(f"basis element {label} is not unitary")
            if np.max(np.abs(e - e.conj().T)) > ATOL:
                raise ValueError(f"basis element {label} is not Hermitian")
        stack = np.array(elements)
        gram = np.einsum("aij,bij->ab", stack.conj(), stack)
        if np.max(np.abs(gram - dim * np.eye(len(elements)))) > ATOL:
            raise ValueError("basis is not trace-orthogonal with normalization D")
        object.__setattr__(self, "elements", elements)
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "_stack", _frozen(stack))
        object.__setattr__(self, "_index", {l: i for i, l in enumerate(labels)})

    @property
    def dim(self) -> int:
        return self.elements[0].shape[0]

    @property
    def stack(self) -> np.ndarray:
        """Elements as a (D**2, D, D) array."""
        return self._stack

    def __len__(self) -> int:
        return len(self.elements)

    def __getitem__(self, key) -> np.ndarray:
        return self.elements[self.index(key)]

    def index(self, key) -> int:
        """Resolve an integer index or a (case-insensitive) label."""
        if isinstance(key, (int, np.integer)):
            if not 0 <= key < len(self):
                raise IndexError(f"basis index {key} out of range [0, {len(self)})")
            return int(key)
        try:
            return self._index[str(key).upper()]
        except KeyError:
            raise KeyError(f"unknown basis label {key!r}") from None

    def coefficients(self, op) -> np.ndarray:
        """Expansion coefficients c_a with op = sum_a c_a E_a."""
        op = np.asarray(op, dtype=complex)
        return np.einsum("aij,ij->a", self._stack.conj(), op) / self.dim


@lru_cache(maxsize=None)
def pauli_basis(n_qubits: int) -> OperatorBasis:
    """Pauli strings on ``n_qubits`` qubits in lexicographic label order (I < X < Y < Z)."""
    if n_qubits < 1:
        raise DimensionError("need at least one qubit")
    if n_qubits > 3:
        raise DimensionError("Pauli bases are capped at 3 qubits")
    labels, elements = [], []
    for word in itertools.product("IXYZ", repeat=n_qubits):
        labels.append("".join(word))
        elements.append(reduce(np.kron, (PAULI_MATRICES[c] for c in word)))
    return OperatorBasis(tuple(elements), tuple(labels))


def haar_random_states(dim: int, n_samples: int, rng_seed: SeedLike = None) -> np.ndarray:
    """``n_samples`` Haar-random pure states as rows of an (n, dim) array."""
    if dim < 1:
        raise DimensionError("dimension must be positive")
    rng = as_rng(rng_seed)
    z = rng.standard_normal((n_samples, dim)) + 1j * rng.standard_normal((n_samples, dim))
    return z / np.linalg.norm(z, axis=1, keepdims=True)


def haar_random_state(dim: int, rng_seed: SeedLike = None) -> PureState:
    # normalized complex Gaussian vectors are unitarily invariant
    return PureState(haar_random_states(dim, 1, rng_seed)[0])


def haar_random_unitary(dim: int, rng_seed: SeedLike = None) -> np.ndarray:
    rng = as_rng(rng_seed)
    z = (rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))) / np.sqrt(2)
    q, r = np.linalg.qr(z)
    d = np.diag(r)
    return q * (d / np.abs(d))


# eigenvalues below this are eigensolver round-off for unit-trace states
_EIG_FLOOR = 1e-14


def _psd_sqrt(rho: np.ndarray) -> np.ndarray:
    w, v = np.linalg.eigh(rho)
    w = np.sqrt(np.where(w > _EIG_FLOOR, w, 0.0))
    return (v * w[..., None, :]) @ np.swapaxes(v.conj(), -1, -2)


def fidelity_batch(rho1: np.ndarray, rho2: np.ndarray) -> np.ndarray:
    """Uhlmann fidelity over leading batch axes; inputs assumed PSD.

    Uses the singular values of sqrt(rho1) sqrt(rho2) rather than square roots
    of the eigenvalues of sqrt(rho1) rho2 sqrt(rho1): for rank-deficient
    inputs the latter turns 1e-17 round-off into 1e-9 errors.
    """
    prod = _psd_sqrt(rho1) @ _psd_sqrt(rho2)
    sv = np.linalg.svd(prod, compute_uv=False)
    return np.clip(sv.sum(axis=-1) ** 2, 0.0, 1.0)


def _check_state(rho: np.ndarray, name: str) -> None:
    if np.max(np.abs(rho - rho.conj().T)) > SPECTRAL_ATOL:
        raise ValueError(f"{name} is not Hermitian")
    if abs(np.trace(rho).real - 1.0) > SPECTRAL_ATOL:
        raise ValueError(f"{name} does not have unit trace")
    if np.linalg.eigvalsh(rho).min() < -SPECTRAL_ATOL:
        raise ValueError(f"{name} is not positive semidefinite")


def uhlmann_fidelity(rho1, rho2) -> float:
    """(Tr sqrt(sqrt(rho1) rho2 sqrt(rho1)))**2 for two normalized states."""
    m1, m2 = as_matrix(rho1), as_matrix(rho2)
    if m1.shape != m2.shape:
        raise DimensionError(f"dimension mismatch: {m1.shape} vs {m2.shape}")
    _check_state(m1, "rho1")
    _check_state(m2, "rho2")
    return float(fidelity_batch(m1, m2))


def project_to_state(rho: np.ndarray) -> np.ndarray:
    """Nearest-in-spectrum density matrix: Hermitize, clip negative eigenvalues, renormalize.

    Works on a single matrix or a stack.
    """
    rho = 0.5 * (rho + np.swapaxes(rho.conj(), -1, -2))
    w, v = np.linalg.eigh(rho)
    w = np.clip(w, 0.0, None)
    tr = w.sum(axis=-1, keepdims=True)
    dim = rho.shape[-1]
    w = np.where(tr > 0, w / np.where(tr > 0, tr, 1.0), 1.0 / dim)
    return (v * w[..., None, :]) @ np.swapaxes(v.conj(), -1, -2)
