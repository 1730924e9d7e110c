"""Chi-matrix estimators: selective (2-design averaged) and standard linear inversion.

Every chi element is tied to the average, over pure inputs psi, of the
pseudo-fidelity z(psi) = <psi| E(E_a |psi><psi| E_b) |psi>:

    chi_ab = ((D + 1) * F_ab - delta_ab) / D,     F_ab = mean_psi z(psi)

and the average over a 2-design is exact. Diagonal z are survival
probabilities of a CP map; off-diagonal z are read off an ancilla that
controls E_a / E_b (or, equivalently, from preparing (E_a + c E_b)|psi>).

``shots=None`` means exact probabilities throughout.
"""
from __future__ import annotations

import math
import os
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .channels import (
    Channel,
    ChiMatrix,
    ModifiedChannel,
    ValidationReport,
    _superop_to_chi,
    apply_channel,
    apply_channel_batch,
    validate_channel,
)
from .designs import SamplingPlan, TwoDesign, WITHOUT_REPLACEMENT, mub_design
from .experiment import PER_SHOT, NoiseModel, apply_noise, sample_counts
from .qmath import (
    PAULI_MATRICES,
    PureState,
    as_vector,
    haar_random_states,
    n_qubits_of,
    pauli_basis,
)

SEQPT_ANCILLA = "seqpt-ancilla"
SEQPT_ANCILLA_FREE = "seqpt-ancilla-free"
STANDARD = "standard"
METHODS = (SEQPT_ANCILLA, SEQPT_ANCILLA_FREE, STANDARD)

AXES = ("x", "y")
# stream tags for per-setting RNG derivation
_STREAM = {"x": 0, "y": 1, "diag": 2, "+1": 3, "-1": 4, "+i": 5, "-i": 6}

_HADAMARD = np.array([[1, 1], [1, -1]], dtype=complex) / np.sqrt(2)


def worker_count() -> int:
    try:
        return max(1, int(os.environ.get("SEQPT_THREADS", "1")))
    except ValueError:
        return 1


def _setting_rng(seed: int, *keys: int) -> np.random.Generator:
    return np.random.default_rng([int(seed), *(int(k) for k in keys)])


def _check_seed(seed) -> int:
    seed = int(seed)
    if seed < 0:
        raise ValueError("seeds must be non-negative integers")
    return seed


@dataclass(frozen=True)
class FidelityEstimate:
    value: complex
    std_error: float
    M: int
    shots: int | None = None

    @property
    def exact(self) -> bool:
        return self.shots is None


@dataclass(frozen=True)
class ChiElementEstimate:
    a: int
    b: int
    value: complex
    std_error: float
    method: str
    fidelity: FidelityEstimate | None = None


@dataclass(frozen=True, eq=False)
class CircuitRun:
    """Joint outcome probabilities of one ancilla-circuit setting.

    ``probabilities`` is (p(+, survive), p(+, lost), p(-, survive), p(-, lost))
    for the ancilla measured along ``axis``.
    """

    input_state: PureState
    a: int
    b: int
    axis: str
    probabilities: tuple

    @property
    def signal(self) -> float:
        """<sigma_axis (x) Pi_psi> = p(+, survive) - p(-, survive)."""
        return self.probabilities[0] - self.probabilities[2]

    @property
    def survival(self) -> float:
        return self.probabilities[0] + self.probabilities[2]


def chi_from_fidelity(F: complex, D: int, diagonal: bool) -> complex:
    return ((D + 1) * F - (1 if diagonal else 0)) / D


# -- exact per-state quantities ------------------------------------------


def pseudo_fidelities(channel: Channel, a, b, states) -> np.ndarray:
    """z(psi) = <psi| E(E_a |psi><psi| E_b) |psi> for each row of ``states``."""
    basis = channel.basis
    Ea, Eb = basis[a], basis[b]
    if isinstance(states, np.ndarray):
        psi = np.atleast_2d(states)
    else:
        psi = np.array([as_vector(s) for s in states])
    left = psi @ Ea.T
    right = psi @ Eb.T
    # E_a |psi><psi| E_b  ->  outer(Ea psi, conj(Eb psi)) since Eb is Hermitian
    inputs = np.einsum("ki,kj->kij", left, right.conj())
    out = apply_channel_batch(channel, inputs)
    return np.einsum("ki,kij,kj->k", psi.conj(), out, psi)


def _joint_state(channel: Channel, Ea: np.ndarray, Eb: np.ndarray, psi: np.ndarray) -> np.ndarray:
    """Ancilla (x) system state just before measurement, ancilla leading."""
    D = psi.size
    anc = _HADAMARD @ np.array([1, 0], dtype=complex)
    controlled = np.zeros((2 * D, 2 * D), dtype=complex)
    controlled[:D, :D] = Eb.conj().T  # open control: fires on |0>
    controlled[D:, D:] = Ea.conj().T  # filled control: fires on |1>
    vec = controlled @ np.kron(anc, psi)
    rho = np.outer(vec, vec.conj())
    blocks = rho.reshape(2, D, 2, D).transpose(0, 2, 1, 3).reshape(4, D, D)
    blocks = apply_channel_batch(channel, blocks)
    return blocks.reshape(2, 2, D, D).transpose(0, 2, 1, 3).reshape(2 * D, 2 * D)


def run_offdiagonal_circuit(
    channel: Channel,
    a,
    b,
    input_state,
    axis: str = "x",
    noise: NoiseModel | None = None,
    rng=None,
    average_jitter: bool = False,
) -> CircuitRun:
    """Simulate the ancilla circuit for one design state and one ancilla axis.

    H on the ancilla, controlled-E_a^dag on ancilla |1>, controlled-E_b^dag on
    ancilla |0>, the channel on the system, then sigma_axis on the ancilla
    jointly with {Pi_psi, 1 - Pi_psi} on the system. With these polarities
    <sigma_x (x) Pi> = Re z and <sigma_y (x) Pi> = +Im z, no extra sign.
    """
    if axis not in AXES:
        raise ValueError(f"axis must be 'x' or 'y', got {axis!r}")
    basis = channel.basis
    ia, ib = basis.index(a), basis.index(b)
    if ia == ib:
        warnings.warn("a == b: the diagonal element needs no ancilla; use design_average_fidelity", stacklevel=2)
    state = input_state if isinstance(input_state, PureState) else PureState(input_state)
    psi = state.amplitudes
    D = psi.size
    joint = apply_noise(_joint_state(channel, basis.elements[ia], basis.elements[ib], psi), noise, rng, average_jitter)
    sigma = PAULI_MATRICES["X" if axis == "x" else "Y"]
    proj = np.outer(psi, psi.conj())
    lost = np.eye(D) - proj
    probs = []
    for sign in (1, -1):
        anc = 0.5 * (np.eye(2) + sign * sigma)
        for sys_op in (proj, lost):
            probs.append(float(np.real(np.trace(np.kron(anc, sys_op) @ joint))))
    return CircuitRun(state, ia, ib, axis, tuple(probs))


# -- per-state estimates -------------------------------------------------


def _diagonal_values(channel, a, design, indices, shots, seed):
    z = pseudo_fidelities(channel, a, a, design.vectors[list(indices)]).real
    if shots is None:
        return z.astype(complex), np.zeros(len(z))
    vals = np.empty(len(z))
    var = np.empty(len(z))
    for k, (j, p) in enumerate(zip(indices, z)):
        p = min(max(p, 0.0), 1.0)
        rec = sample_counts((p, 1 - p), shots, _setting_rng(seed, a, a, j, _STREAM["diag"]))
        f = rec.counts[0] / shots
        vals[k] = f
        var[k] = f * (1 - f) / shots
    return vals.astype(complex), var


def _ancilla_values(channel, a, b, design, indices, shots, noise, seed):
    vals = np.zeros(len(indices), dtype=complex)
    var = np.zeros(len(indices))
    per_shot = shots is not None and noise is not None and noise.jitter_mode == PER_SHOT
    for k, j in enumerate(indices):
        for axis, unit in (("x", 1.0), ("y", 1j)):
            rng = _setting_rng(seed, a, b, j, _STREAM[axis])
            run = run_offdiagonal_circuit(channel, a, b, design[j], axis, noise, rng, per_shot)
            if shots is None:
                vals[k] += unit * run.signal
                continue
            rec = sample_counts(run.probabilities, shots, rng, setting=(j, a, b, axis))
            f = rec.frequencies
            vals[k] += unit * (f[0] - f[2])
            var[k] += (f[0] + f[2] - (f[0] - f[2]) ** 2) / shots
    return vals, var


def _ancilla_free_values(channel, a, b, design, indices, shots, seed):
    basis = channel.basis
    Ea, Eb = basis.elements[a], basis.elements[b]
    vals = np.zeros(len(indices), dtype=complex)
    var = np.zeros(len(indices))
    for k, j in enumerate(indices):
        psi = design.vectors[j]
        p = {}
        for tag, c in (("+1", 1), ("-1", -1), ("+i", 1j), ("-i", -1j)):
            vec = (Ea + c * Eb) @ psi
            # the 1/4 is the ancilla-projection weight of this branch
            weight = float(np.vdot(vec, vec).real) / 4
            if weight < 1e-15:
                p[tag] = 0.0
                continue
            phi = vec / np.linalg.norm(vec)
            q = float(np.real(np.vdot(psi, apply_channel(channel, np.outer(phi, phi.conj())) @ psi)))
            if shots is not None:
                q = min(max(q, 0.0), 1.0)
                rec = sample_counts((q, 1 - q), shots, _setting_rng(seed, a, b, j, _STREAM[tag]))
                q_hat = rec.counts[0] / shots
                var[k] += weight**2 * q_hat * (1 - q_hat) / shots
                q = q_hat
            p[tag] = weight * q
        vals[k] = (p["+1"] - p["-1"]) + 1j * (p["+i"] - p["-i"])
    return vals, var


def per_state_estimates(
    channel: Channel,
    a,
    b,
    design: TwoDesign,
    shots: int | None = None,
    noise: NoiseModel | None = None,
    seed: int = 0,
    method: str = SEQPT_ANCILLA,
    indices=None,
):
    """Per-design-state estimates of z and their shot-noise variances."""
    basis = channel.basis
    a, b = basis.index(a), basis.index(b)
    seed = _check_seed(seed)
    indices = tuple(range(len(design))) if indices is None else tuple(indices)
    if a == b:
        return _diagonal_values(channel, a, design, indices, shots, seed)
    if method == SEQPT_ANCILLA:
        return _ancilla_values(channel, a, b, design, indices, shots, noise, seed)
    if method == SEQPT_ANCILLA_FREE:
        return _ancilla_free_values(channel, a, b, design, indices, shots, seed)
    raise ValueError(f"unknown SEQPT method {method!r}")


def _average(values: np.ndarray, shot_var: np.ndarray, plan: SamplingPlan, shots) -> FidelityEstimate:
    M = plan.M
    mean = complex(values.mean())
    var = float(shot_var.sum()) / M**2
    if not plan.is_full:
        if M < 2:
            var = float("nan")
        else:
            spread = float(np.sum(np.abs(values - mean) ** 2)) / (M - 1)
            fpc = 1 - M / plan.K if plan.mode == WITHOUT_REPLACEMENT else 1.0
            var += spread / M * fpc
    return FidelityEstimate(mean, math.sqrt(var), M, shots)


def _resolve(design, plan, channel):
    if design is None:
        design = mub_design(n_qubits_of(channel.dim))
    if design.dim != channel.dim:
        raise ValueError(f"design dimension {design.dim} != channel dimension {channel.dim}")
    if plan is None:
        plan = SamplingPlan.full(design.K)
    if plan.K != design.K:
        raise ValueError(f"plan is over {plan.K} states but the design has {design.K}")
    return design, plan


# -- estimators ----------------------------------------------------------


def design_average_fidelity(
    mod: ModifiedChannel,
    design: TwoDesign | None = None,
    plan: SamplingPlan | None = None,
    shots: int | None = None,
    seed: int = 0,
) -> FidelityEstimate:
    """Mean survival probability of the CP map rho -> E(E_a rho E_a) over a design."""
    if not mod.diagonal:
        raise ValueError("design_average_fidelity needs a == b; use seqpt_offdiagonal for a != b")
    design, plan = _resolve(design, plan, mod.base)
    vals, var = per_state_estimates(mod.base, mod.a, mod.a, design, shots, seed=seed, indices=plan.indices)
    est = _average(vals, var, plan, shots)
    return FidelityEstimate(est.value.real, est.std_error, est.M, shots)


def haar_average_fidelity(mod: ModifiedChannel, n_samples: int = 10_000, seed=0) -> FidelityEstimate:
    """Monte Carlo Haar average of z(psi); complex when a != b."""
    if n_samples < 2:
        raise ValueError("n_samples must be at least 2")
    psi = haar_random_states(mod.dim, n_samples, seed)
    z = pseudo_fidelities(mod.base, mod.a, mod.b, psi)
    if mod.diagonal:
        z = z.real
    mean = z.mean()
    err = math.sqrt(float(np.sum(np.abs(z - mean) ** 2)) / (n_samples - 1) / n_samples)
    return FidelityEstimate(mean, err, n_samples, None)


def seqpt_diagonal(channel, a, design=None, plan=None, shots=None, seed=0, method=SEQPT_ANCILLA) -> ChiElementEstimate:
    a = channel.basis.index(a)
    F = design_average_fidelity(ModifiedChannel(channel, a, a), design, plan, shots, seed)
    D = channel.dim
    return ChiElementEstimate(a, a, complex(chi_from_fidelity(F.value, D, True)), (D + 1) / D * F.std_error, method, F)


def _offdiagonal(channel, a, b, design, plan, shots, noise, seed, method) -> ChiElementEstimate:
    basis = channel.basis
    a, b = basis.index(a), basis.index(b)
    if a == b:
        raise ValueError("off-diagonal estimators need a != b")
    design, plan = _resolve(design, plan, channel)
    vals, var = per_state_estimates(channel, a, b, design, shots, noise, seed, method, plan.indices)
    F = _average(vals, var, plan, shots)
    D = channel.dim
    return ChiElementEstimate(a, b, complex(chi_from_fidelity(F.value, D, False)), (D + 1) / D * F.std_error, method, F)


def seqpt_offdiagonal(channel, a, b, design=None, plan=None, shots=None, noise=None, seed=0) -> ChiElementEstimate:
    """Off-diagonal chi_ab from the ancilla circuit, x axis for Re and y axis for Im."""
    return _offdiagonal(channel, a, b, design, plan, shots, noise, seed, SEQPT_ANCILLA)


def seqpt_ancilla_free(channel, a, b, design=None, plan=None, shots=None, seed=0) -> ChiElementEstimate:
    """Off-diagonal chi_ab from survival of the four preparations (E_a + c E_b)|psi>, c in {1, -1, i, -i}."""
    return _offdiagonal(channel, a, b, design, plan, shots, None, seed, SEQPT_ANCILLA_FREE)


def seqpt_element(channel, a, b, design=None, plan=None, shots=None, noise=None, seed=0, method=SEQPT_ANCILLA):
    basis = channel.basis
    if basis.index(a) == basis.index(b):
        return seqpt_diagonal(channel, a, design, plan, shots, seed, method)
    if method == SEQPT_ANCILLA_FREE:
        return seqpt_ancilla_free(channel, a, b, design, plan, shots, seed)
    return seqpt_offdiagonal(channel, a, b, design, plan, shots, noise, seed)


@dataclass(frozen=True, eq=False)
class ChiEstimate:
    """A reconstructed chi matrix with per-entry standard errors."""

    chi: np.ndarray
    std_errors: np.ndarray
    method: str
    n_settings: int
    shots: int | None = None
    n_probabilities: int = 0
    elements: tuple = field(default=())

    @property
    def dim(self) -> int:
        return int(round(math.sqrt(self.chi.shape[0])))

    @property
    def basis(self):
        return pauli_basis(n_qubits_of(self.dim))

    def chi_matrix(self) -> ChiMatrix:
        return ChiMatrix(self.chi, self.basis)

    def channel(self) -> Channel:
        return Channel("chi", self.chi, self.method)

    def validation(self) -> ValidationReport:
        return validate_channel(self.chi_matrix())


def seqpt_full(
    channel: Channel,
    design: TwoDesign | None = None,
    shots: int | None = None,
    noise: NoiseModel | None = None,
    seed: int = 0,
    plan: SamplingPlan | None = None,
    method: str = SEQPT_ANCILLA,
    threads: int | None = None,
) -> ChiEstimate:
    """Estimate every chi_ab independently, then Hermitize with (chi + chi^dag) / 2.

    Elements are dispatched over ``threads`` workers (default: $SEQPT_THREADS);
    the per-setting RNG streams make the result independent of scheduling.
    """
    if method not in (SEQPT_ANCILLA, SEQPT_ANCILLA_FREE):
        raise ValueError(f"unknown SEQPT method {method!r}")
    seed = _check_seed(seed)
    design, plan = _resolve(design, plan, channel)
    n = len(channel.basis)
    pairs = [(a, b) for a in range(n) for b in range(n)]

    def task(pair):
        return seqpt_element(channel, *pair, design, plan, shots, noise, seed, method)

    workers = threads or worker_count()
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(task, pairs))
    else:
        results = [task(p) for p in pairs]
    raw = np.zeros((n, n), dtype=complex)
    err = np.zeros((n, n))
    for est in results:
        raw[est.a, est.b] = est.value
        err[est.a, est.b] = est.std_error
    chi = 0.5 * (raw + raw.conj().T)
    err = 0.5 * np.sqrt(err**2 + err.T**2)
    # one survival setting per diagonal state; 2 ancilla axes or 4 preparations off-diagonal
    per_offdiagonal = 2 if method == SEQPT_ANCILLA else 4
    n_settings = plan.M * (n + per_offdiagonal * n * (n - 1))
    return ChiEstimate(chi, err, method, n_settings, shots, n_settings, tuple(pairs))


# -- standard QPT --------------------------------------------------------


def standard_inputs(dim: int) -> list:
    """|n>, (|n> + |m>)/sqrt2, (|n> + i|m>)/sqrt2 for n < m: D**2 preparations."""
    eye = np.eye(dim, dtype=complex)
    states = [eye[n] for n in range(dim)]
    for n in range(dim):
        for m in range(n + 1, dim):
            states.append((eye[n] + eye[m]) / np.sqrt(2))
            states.append((eye[n] + 1j * eye[m]) / np.sqrt(2))
    return states


def _invert(outputs: list, dim: int) -> np.ndarray:
    """Superoperator from the images of the standard inputs, by linearity."""
    basis_images = {}
    for n in range(dim):
        basis_images[n, n] = outputs[n]
    k = dim
    for n in range(dim):
        for m in range(n + 1, dim):
            plus, plus_i = outputs[k], outputs[k + 1]
            k += 2
            img = plus + 1j * plus_i - 0.5 * (1 + 1j) * (basis_images[n, n] + basis_images[m, m])
            basis_images[n, m] = img
            basis_images[m, n] = img.conj().T
    S = np.zeros((dim * dim, dim * dim), dtype=complex)
    for (n, m), img in basis_images.items():
        S[:, n * dim + m] = img.reshape(-1)
    return S


def _chi_from_expectations(expect: np.ndarray, basis) -> np.ndarray:
    """expect[k, P] = <P> for input k and Pauli string P (P = 0 is identity)."""
    D = basis.dim
    outputs = list(np.einsum("kp,pij->kij", expect, basis.stack) / D)
    chi = _superop_to_chi(_invert(outputs, D), basis)
    return 0.5 * (chi + chi.conj().T)


def standard_qpt(channel: Channel, shots: int | None = None, seed: int = 0) -> ChiEstimate:
    """Linear-inversion process tomography: D**2 inputs, Pauli state tomography of each output."""
    seed = _check_seed(seed)
    D = channel.dim
    basis = channel.basis
    n = len(basis)
    inputs = standard_inputs(D)
    rhos = np.array([np.outer(v, v.conj()) for v in inputs])
    outs = apply_channel_batch(channel, rhos)
    expect = np.real(np.einsum("pji,kij->kp", basis.stack, outs))
    expect[:, 0] = 1.0
    err = np.zeros((n, n))
    if shots is not None:
        var = np.zeros_like(expect)
        for k in range(len(inputs)):
            for p in range(1, n):
                e = min(max(expect[k, p], -1.0), 1.0)
                rec = sample_counts(((1 + e) / 2, (1 - e) / 2), shots, _setting_rng(seed, k, p))
                f = rec.counts[0] / shots
                expect[k, p] = 2 * f - 1
                var[k, p] = 4 * f * (1 - f) / shots
        # chi is affine in the expectations: propagate through unit perturbations
        base = _chi_from_expectations(expect, basis)
        acc = np.zeros((n, n))
        for k in range(len(inputs)):
            for p in range(1, n):
                bumped = expect.copy()
                bumped[k, p] += 1.0
                acc += np.abs(_chi_from_expectations(bumped, basis) - base) ** 2 * var[k, p]
        err = np.sqrt(acc)
        chi = base
    else:
        chi = _chi_from_expectations(expect, basis)
    return ChiEstimate(chi, err, STANDARD, len(inputs) * (n - 1), shots, resource_count("standard-full", D), ())


def resource_count(method: str, D: int) -> int:
    """Probabilities needed: D(D+1) survivals for one SEQPT element, D**4 for full standard QPT."""
    if D < 2:
        raise ValueError("D must be at least 2")
    if method == "seqpt-element":
        return D * (D + 1)
    if method == "standard-full":
        return D**4
    raise ValueError(f"unknown method {method!r}")
