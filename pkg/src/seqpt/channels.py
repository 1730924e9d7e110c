"""Quantum channels in chi, Kraus, unitary and superoperator form.

Conventions
-----------
* chi is taken in the (unnormalized) Pauli-string basis:
  ``E(rho) = sum_ab chi_ab E_a rho E_b^dag``.
* Superoperators act on row-major vectorized matrices, so
  ``vec(A rho B) = (A kron B^T) vec(rho)``.
* Waveplate Jones matrices act on (H, V) amplitudes; global phases dropped.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .qmath import (
    DimensionError,
    OperatorBasis,
    SeedLike,
    as_matrix,
    as_rng,
    haar_random_unitary,
    n_qubits_of,
    pauli_basis,
)

REPRESENTATIONS = ("chi", "kraus", "unitary", "superoperator")

CP_ATOL = 1e-8
TP_ATOL = 1e-8


class NotCompletelyPositiveError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class ChiMatrix:
    entries: np.ndarray
    basis: OperatorBasis

    def __post_init__(self):
        entries = np.array(self.entries, dtype=complex)
        n = len(self.basis)
        if entries.shape != (n, n):
            raise DimensionError(f"chi must be {n}x{n} for this basis, got {entries.shape}")
        entries.setflags(write=False)
        object.__setattr__(self, "entries", entries)

    @property
    def dim(self) -> int:
        return self.basis.dim

    def __getitem__(self, key):
        a, b = key
        return self.entries[self.basis.index(a), self.basis.index(b)]

    def validate(self) -> "ValidationReport":
        return validate_channel(self)


@dataclass(frozen=True)
class ValidationReport:
    hermitian: bool
    hermiticity_error: float
    min_eigenvalue: float
    eigenvalues: tuple
    tp_residual: float

    @property
    def completely_positive(self) -> bool:
        return self.min_eigenvalue >= -CP_ATOL

    @property
    def trace_preserving(self) -> bool:
        return self.tp_residual <= TP_ATOL

    def to_dict(self) -> dict:
        return {
            "hermitian": self.hermitian,
            "hermiticity_error": self.hermiticity_error,
            "min_eigenvalue": self.min_eigenvalue,
            "eigenvalues": list(self.eigenvalues),
            "tp_residual": self.tp_residual,
            "completely_positive": self.completely_positive,
            "trace_preserving": self.trace_preserving,
        }


def tp_operator(chi: np.ndarray, basis: OperatorBasis) -> np.ndarray:
    """sum_ab chi_ab E_b^dag E_a, which equals the identity for a TP map."""
    E = basis.stack
    return np.einsum("ab,bji,ajk->ik", chi, E.conj(), E, optimize=True)


def validate_channel(chi) -> ValidationReport:
    """Report hermiticity, spectrum and trace-preservation residual of a chi matrix."""
    if isinstance(chi, ChiMatrix):
        entries, basis = chi.entries, chi.basis
    else:
        entries = np.asarray(chi, dtype=complex)
        if entries.ndim != 2 or entries.shape[0] != entries.shape[1]:
            raise DimensionError("chi must be square")
        dim = int(round(np.sqrt(entries.shape[0])))
        basis = pauli_basis(n_qubits_of(dim))
    herm_err = float(np.max(np.abs(entries - entries.conj().T)))
    eig = np.linalg.eigvalsh(0.5 * (entries + entries.conj().T))
    residual = tp_operator(entries, basis) - np.eye(basis.dim)
    return ValidationReport(
        hermitian=herm_err <= 1e-10,
        hermiticity_error=herm_err,
        min_eigenvalue=float(eig.min()),
        eigenvalues=tuple(float(x) for x in eig[::-1]),
        tp_residual=float(np.linalg.norm(residual, 2)),
    )


@dataclass(frozen=True, eq=False)
class Channel:
    """A linear map on D x D matrices held in one of four representations.

    ``payload`` is a chi matrix (D**2 x D**2), a stack of Kraus operators
    (k, D, D), a unitary (D, D), or a superoperator (D**2 x D**2).
    """

    representation: str
    payload: np.ndarray
    label: str = ""

    def __post_init__(self):
        rep = self.representation
        if rep not in REPRESENTATIONS:
            raise ValueError(f"unknown representation {rep!r}")
        data = np.array(self.payload, dtype=complex)
        if rep == "kraus":
            if data.ndim == 2:
                data = data[None]
            if data.ndim != 3 or data.shape[1] != data.shape[2]:
                raise DimensionError(f"Kraus operators must be square, got {data.shape}")
            dim = data.shape[1]
        elif rep == "unitary":
            if data.ndim != 2 or data.shape[0] != data.shape[1]:
                raise DimensionError("unitary must be square")
            dim = data.shape[0]
            if np.max(np.abs(data @ data.conj().T - np.eye(dim))) > 1e-8:
                raise ValueError("matrix is not unitary")
        else:
            if data.ndim != 2 or data.shape[0] != data.shape[1]:
                raise DimensionError(f"{rep} matrix must be square")
            dim = int(round(np.sqrt(data.shape[0])))
            if dim * dim != data.shape[0]:
                raise DimensionError(f"{rep} matrix size {data.shape[0]} is not a square number")
            if rep == "chi" and np.max(np.abs(data - data.conj().T)) > 1e-8:
                raise ValueError("chi matrix is not Hermitian")
        n_qubits_of(dim)
        data.setflags(write=False)
        object.__setattr__(self, "payload", data)
        object.__setattr__(self, "_dim", dim)

    @property
    def dim(self) -> int:
        return self._dim

    @property
    def basis(self) -> OperatorBasis:
        return pauli_basis(n_qubits_of(self.dim))

    def chi(self) -> np.ndarray:
        return _to_chi(self)

    def chi_matrix(self) -> ChiMatrix:
        return ChiMatrix(self.chi(), self.basis)

    def superoperator(self) -> np.ndarray:
        if self.representation == "superoperator":
            return self.payload
        return _chi_to_superop(self.chi(), self.basis)

    def kraus(self) -> np.ndarray:
        return convert(self, "kraus").payload

    def __call__(self, rho) -> np.ndarray:
        return apply_channel(self, rho)


def _unitary_chi(U: np.ndarray, basis: OperatorBasis) -> np.ndarray:
    u = basis.coefficients(U)
    return np.outer(u, u.conj())


def _kraus_chi(kraus: np.ndarray, basis: OperatorBasis) -> np.ndarray:
    c = np.einsum("aij,kij->ka", basis.stack.conj(), kraus) / basis.dim
    return c.T @ c.conj()


def _chi_to_superop(chi: np.ndarray, basis: OperatorBasis) -> np.ndarray:
    E = basis.stack
    D = basis.dim
    return np.einsum("ab,aij,bkl->ikjl", chi, E, E.conj()).reshape(D * D, D * D)


def _superop_to_chi(S: np.ndarray, basis: OperatorBasis) -> np.ndarray:
    # E_a kron conj(E_b) are orthogonal with squared norm D**4 / D**2 = D**2
    E = basis.stack
    D = basis.dim
    S4 = S.reshape(D, D, D, D)
    return np.einsum("aij,bkl,ikjl->ab", E.conj(), E, S4) / D**2


def _to_chi(channel: Channel) -> np.ndarray:
    rep, data, basis = channel.representation, channel.payload, channel.basis
    if rep == "chi":
        return np.array(data)
    if rep == "unitary":
        return _unitary_chi(data, basis)
    if rep == "kraus":
        return _kraus_chi(data, basis)
    return _superop_to_chi(data, basis)


def _chi_to_kraus(chi: np.ndarray, basis: OperatorBasis) -> np.ndarray:
    w, v = np.linalg.eigh(0.5 * (chi + chi.conj().T))
    if w.min() < -CP_ATOL:
        raise NotCompletelyPositiveError(
            f"chi has eigenvalue {w.min():.3g} < 0; no Kraus decomposition exists"
        )
    keep = w > CP_ATOL
    if not keep.any():
        return np.zeros((1, basis.dim, basis.dim), dtype=complex)
    amps = v[:, keep] * np.sqrt(w[keep])
    return np.einsum("ak,aij->kij", amps, basis.stack)


def convert(channel: Channel, target: str) -> Channel:
    """Re-express ``channel`` in representation ``target``."""
    if target not in REPRESENTATIONS:
        raise ValueError(f"unknown representation {target!r}")
    if target == channel.representation:
        return channel
    basis = channel.basis
    if target == "superoperator":
        return Channel("superoperator", channel.superoperator(), channel.label)
    chi = channel.chi()
    if target == "chi":
        return Channel("chi", 0.5 * (chi + chi.conj().T), channel.label)
    if target == "kraus":
        if channel.representation == "unitary":
            return Channel("kraus", channel.payload[None], channel.label)
        return Channel("kraus", _chi_to_kraus(chi, basis), channel.label)
    # unitary: chi must be rank one with unit weight
    w, v = np.linalg.eigh(0.5 * (chi + chi.conj().T))
    if abs(w[-1] - 1.0) > 1e-8 or np.any(np.abs(w[:-1]) > 1e-8):
        raise ValueError("channel is not unitary")
    U = np.einsum("a,aij->ij", v[:, -1], basis.stack)
    k = np.flatnonzero(np.abs(U.reshape(-1)) > 1e-12)[0]
    phase = U.reshape(-1)[k] / abs(U.reshape(-1)[k])
    return Channel("unitary", U / phase, channel.label)


def apply_channel(channel: Channel, rho) -> np.ndarray:
    """E(rho). ``rho`` may be unnormalized or non-Hermitian; the map is linear."""
    m = as_matrix(rho)
    D = channel.dim
    if m.shape != (D, D):
        raise DimensionError(f"channel acts on {D}x{D} matrices, got {m.shape}")
    rep, data = channel.representation, channel.payload
    if rep == "unitary":
        return data @ m @ data.conj().T
    if rep == "kraus":
        return np.einsum("kij,jl,kml->im", data, m, data.conj())
    if rep == "superoperator":
        return (data @ m.reshape(-1)).reshape(D, D)
    E = channel.basis.stack
    return np.einsum("ab,aij,jk,blk->il", data, E, m, E.conj(), optimize=True)


def apply_channel_batch(channel: Channel, rhos: np.ndarray) -> np.ndarray:
    """E applied to each matrix of an (n, D, D) stack."""
    D = channel.dim
    S = channel.superoperator()
    return (rhos.reshape(len(rhos), D * D) @ S.T).reshape(len(rhos), D, D)


@dataclass(frozen=True, eq=False)
class ModifiedChannel:
    """rho -> E(E_a rho E_b): CP only when a == b."""

    base: Channel
    a: int
    b: int

    def __post_init__(self):
        basis = self.base.basis
        object.__setattr__(self, "a", basis.index(self.a))
        object.__setattr__(self, "b", basis.index(self.b))

    @property
    def dim(self) -> int:
        return self.base.dim

    @property
    def diagonal(self) -> bool:
        return self.a == self.b

    @property
    def labels(self) -> tuple:
        labels = self.base.basis.labels
        return labels[self.a], labels[self.b]

    def __call__(self, rho) -> np.ndarray:
        return apply_modified_channel(self, rho)


def apply_modified_channel(mod: ModifiedChannel, rho) -> np.ndarray:
    basis = mod.base.basis
    m = as_matrix(rho)
    return apply_channel(mod.base, basis.elements[mod.a] @ m @ basis.elements[mod.b])


def _rotation(theta_deg: float) -> np.ndarray:
    t = np.deg2rad(theta_deg)
    return np.array([[np.cos(t), -np.sin(t)], [np.sin(t), np.cos(t)]], dtype=complex)


def waveplate(retardance: float, theta_deg: float) -> np.ndarray:
    """Jones matrix of a linear retarder with fast axis at ``theta_deg``."""
    R = _rotation(theta_deg)
    return R @ np.diag([1.0, np.exp(1j * retardance)]) @ R.T


def _unit_interval(name: str, value: float) -> float:
    value = float(value)
    if not 0.0 <= value <= 1.0:
        raise ValueError(f"{name} parameter must lie in [0, 1], got {value}")
    return value


def builtin_channel(name: str, params: Sequence = (), n_qubits: int = 1) -> Channel:
    """Library channels.

    ``qwp``/``hwp`` take the fast-axis angle in degrees, ``depolarizing``,
    ``dephasing`` and ``amplitude_damping`` take a probability, ``unitary``
    takes the matrix itself as ``params``.
    """
    key = name.lower().replace("-", "_")
    params = list(params) if key != "unitary" else params
    if key == "identity":
        dim = 2**n_qubits
        return Channel("unitary", np.eye(dim), "identity")
    if key == "qwp":
        theta = float(params[0]) if params else 0.0
        return Channel("unitary", waveplate(np.pi / 2, theta), f"qwp({theta:g})")
    if key == "hwp":
        theta = float(params[0]) if params else 0.0
        return Channel("unitary", waveplate(np.pi, theta), f"hwp({theta:g})")
    if key == "depolarizing":
        p = _unit_interval("depolarizing", params[0])
        basis = pauli_basis(n_qubits)
        weights = np.full(len(basis), p / len(basis))
        weights[0] += 1.0 - p
        return Channel("chi", np.diag(weights), f"depolarizing({p:g})")
    if key == "dephasing":
        # off-diagonal coherences shrink by (1 - p)
        p = _unit_interval("dephasing", params[0])
        kraus = [np.sqrt(1 - p / 2) * np.eye(2), np.sqrt(p / 2) * np.diag([1.0, -1.0])]
        return Channel("kraus", np.array(kraus), f"dephasing({p:g})")
    if key == "amplitude_damping":
        g = _unit_interval("amplitude_damping", params[0])
        kraus = [np.array([[1, 0], [0, np.sqrt(1 - g)]]), np.array([[0, np.sqrt(g)], [0, 0]])]
        return Channel("kraus", np.array(kraus, dtype=complex), f"amplitude_damping({g:g})")
    if key == "unitary":
        return Channel("unitary", np.asarray(params, dtype=complex), "unitary")
    raise ValueError(f"unknown builtin channel {name!r}")


def random_channel(dim: int, rng_seed: SeedLike = None, kraus_rank: int | None = None) -> Channel:
    """Random CPTP map from a Haar-random isometry into a dim * kraus_rank dilation."""
    rank = kraus_rank or dim * dim
    U = haar_random_unitary(dim * rank, as_rng(rng_seed))
    V = U[:, :dim]
    kraus = V.reshape(rank, dim, dim)
    return Channel("kraus", kraus, "random")


def compose_unitary(channel: Channel, U: np.ndarray) -> Channel:
    """rho -> E(U rho U^dag) as a superoperator channel."""
    U = np.asarray(U, dtype=complex)
    return Channel("superoperator", channel.superoperator() @ np.kron(U, U.conj()), channel.label)


# -- JSON ---------------------------------------------------------------


def encode_matrix(arr) -> list:
    arr = np.asarray(arr, dtype=complex)
    if arr.ndim == 0:
        return [float(arr.real), float(arr.imag)]
    return [encode_matrix(x) for x in arr]


def decode_matrix(data) -> np.ndarray:
    arr = np.asarray(data, dtype=float)
    if arr.shape[-1] != 2:
        raise ValueError("complex entries must be [re, im] pairs")
    return arr[..., 0] + 1j * arr[..., 1]


def channel_to_json(channel: Channel) -> dict:
    rep = channel.representation
    doc = {"type": rep, "dim": channel.dim, "data": encode_matrix(channel.payload)}
    if channel.label:
        doc["name"] = channel.label
    return doc


def channel_from_json(doc: dict) -> Channel:
    kind = doc.get("type")
    if kind == "builtin":
        if "name" not in doc:
            raise ValueError("builtin channel needs a 'name'")
        n_qubits = n_qubits_of(int(doc.get("dim", 2)))
        return builtin_channel(doc["name"], doc.get("params", []), n_qubits=n_qubits)
    if kind not in REPRESENTATIONS:
        raise ValueError(f"channel 'type' must be builtin or one of {REPRESENTATIONS}, got {kind!r}")
    if "data" not in doc:
        raise ValueError("channel needs 'data'")
    channel = Channel(kind, decode_matrix(doc["data"]), doc.get("name", ""))
    if "dim" in doc and int(doc["dim"]) != channel.dim:
        raise DimensionError(f"declared dim {doc['dim']} does not match data ({channel.dim})")
    return channel
