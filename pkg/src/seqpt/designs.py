"""State 2-designs built from complete sets of mutually unbiased bases, and sampling plans."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .channels import decode_matrix, encode_matrix
from .qmath import DimensionError, PureState, SeedLike, as_rng, as_vector

DESIGN_ATOL = 1e-8

WITHOUT_REPLACEMENT = "without-replacement"
WITH_REPLACEMENT = "with-replacement"

_s = 1 / np.sqrt(2)
_QUBIT_MUBS = (
    # Z, X, Y eigenbases: H/V, diagonal/antidiagonal, right/left circular
    ((1, 0), (0, 1)),
    ((_s, _s), (_s, -_s)),
    ((_s, 1j * _s), (_s, -1j * _s)),
)

# Common eigenbases of the five maximal commuting classes of two-qubit Pauli
# strings {ZI,IZ}, {XI,IX}, {YI,IY}, {XZ,ZY}, {YZ,ZX}; entries times 1/2.
_i = 1j
_TWO_QUBIT_MUBS = (
    ((2, 0, 0, 0), (0, 2, 0, 0), (0, 0, 2, 0), (0, 0, 0, 2)),
    ((1, 1, 1, 1), (1, -1, 1, -1), (1, 1, -1, -1), (1, -1, -1, 1)),
    ((1, _i, _i, -1), (1, -_i, _i, 1), (1, _i, -_i, 1), (1, -_i, -_i, -1)),
    ((1, _i, 1, -_i), (1, -_i, 1, _i), (1, _i, -1, _i), (1, -_i, -1, -_i)),
    ((1, 1, _i, -_i), (1, -1, _i, _i), (1, 1, -_i, _i), (1, -1, -_i, -_i)),
)


@dataclass(frozen=True, eq=False)
class TwoDesign:
    states: tuple

    def __post_init__(self):
        states = tuple(s if isinstance(s, PureState) else PureState(s) for s in self.states)
        if not states:
            raise ValueError("a design needs at least one state")
        if len({s.dim for s in states}) != 1:
            raise DimensionError("all design states must share one dimension")
        object.__setattr__(self, "states", states)
        vecs = np.array([s.amplitudes for s in states])
        vecs.setflags(write=False)
        object.__setattr__(self, "_vectors", vecs)

    @property
    def dim(self) -> int:
        return self.states[0].dim

    @property
    def K(self) -> int:
        return len(self.states)

    @property
    def vectors(self) -> np.ndarray:
        """States as rows of a (K, D) array."""
        return self._vectors

    def __len__(self) -> int:
        return len(self.states)

    def __getitem__(self, j: int) -> PureState:
        return self.states[j]

    def __iter__(self):
        return iter(self.states)

    def to_json(self) -> dict:
        return {"dim": self.dim, "K": self.K, "states": encode_matrix(self._vectors)}

    @classmethod
    def from_json(cls, doc: dict) -> "TwoDesign":
        return cls(tuple(decode_matrix(doc["states"])))


def _fix_phase(vec: np.ndarray) -> np.ndarray:
    k = np.flatnonzero(np.abs(vec) > 1e-12)[0]
    return vec * (abs(vec[k]) / vec[k])


def mub_design(n_qubits: int) -> TwoDesign:
    """The D(D+1) states of D+1 mutually unbiased bases, emitted base by base.

    The computational basis comes first, then X-type, then Y-type; for two
    qubits the two mixed classes follow.
    """
    if n_qubits == 1:
        table, scale = _QUBIT_MUBS, 1.0
    elif n_qubits == 2:
        table, scale = _TWO_QUBIT_MUBS, 0.5
    else:
        raise DimensionError(f"MUB designs are only tabulated for 1 or 2 qubits, not {n_qubits}")
    states = [
        PureState(_fix_phase(scale * np.asarray(vec, dtype=complex)))
        for base in table
        for vec in base
    ]
    return TwoDesign(tuple(states))


def symmetric_projector(dim: int) -> np.ndarray:
    swap = np.zeros((dim * dim, dim * dim))
    for i in range(dim):
        for j in range(dim):
            swap[i * dim + j, j * dim + i] = 1.0
    return 0.5 * (np.eye(dim * dim) + swap)


def frame_operator(states: Sequence) -> np.ndarray:
    """(1/K) sum_j (|psi_j><psi_j|) kron (|psi_j><psi_j|)."""
    vecs = np.array([as_vector(s) for s in states])
    doubled = np.einsum("ki,kj->kij", vecs, vecs).reshape(len(vecs), -1)
    return doubled.T @ doubled.conj() / len(vecs)


@dataclass(frozen=True)
class DesignCheck:
    is_design: bool
    max_residual: float


def verify_2design(states: Sequence) -> DesignCheck:
    """Compare the frame operator against 2 P_sym / (D (D + 1)) entrywise."""
    states = list(states)
    if not states:
        raise ValueError("empty state list")
    dims = {as_vector(s).size for s in states}
    if len(dims) != 1:
        raise DimensionError(f"mixed state dimensions {sorted(dims)}")
    (dim,) = dims
    target = 2 * symmetric_projector(dim) / (dim * (dim + 1))
    residual = float(np.max(np.abs(frame_operator(states) - target)))
    return DesignCheck(residual <= DESIGN_ATOL, residual)


@dataclass(frozen=True)
class SamplingPlan:
    indices: tuple
    K: int
    mode: str = WITHOUT_REPLACEMENT
    seed: int | None = None

    def __post_init__(self):
        if self.mode not in (WITHOUT_REPLACEMENT, WITH_REPLACEMENT):
            raise ValueError(f"unknown sampling mode {self.mode!r}")
        idx = tuple(int(i) for i in self.indices)
        if not idx:
            raise ValueError("a plan needs at least one index")
        if any(not 0 <= i < self.K for i in idx):
            raise IndexError(f"plan indices must lie in [0, {self.K})")
        if self.mode == WITHOUT_REPLACEMENT and len(set(idx)) != len(idx):
            raise ValueError("without-replacement plan contains duplicates")
        object.__setattr__(self, "indices", idx)

    @property
    def M(self) -> int:
        return len(self.indices)

    @property
    def is_full(self) -> bool:
        return self.mode == WITHOUT_REPLACEMENT and self.M == self.K

    @classmethod
    def full(cls, K: int) -> "SamplingPlan":
        """Every design state once, in design order."""
        return cls(tuple(range(K)), K)

    def __iter__(self):
        return iter(self.indices)


def make_plan(K: int, M: int, mode: str = WITHOUT_REPLACEMENT, seed: SeedLike = 0) -> SamplingPlan:
    if M < 1:
        raise ValueError("M must be at least 1")
    rng = as_rng(seed)
    if mode == WITHOUT_REPLACEMENT:
        if M > K:
            raise ValueError(f"cannot draw {M} distinct states from a design of {K}")
        idx = rng.permutation(K)[:M]
    elif mode == WITH_REPLACEMENT:
        idx = rng.integers(0, K, size=M)
    else:
        raise ValueError(f"unknown sampling mode {mode!r}")
    return SamplingPlan(tuple(idx), K, mode, seed if isinstance(seed, int) else None)
