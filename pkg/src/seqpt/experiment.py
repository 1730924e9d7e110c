"""Measurement statistics, interferometer noise, the finite-population error bound,
subset-convergence analysis and channel fidelity."""
from __future__ import annotations

import csv
import io
import itertools
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .channels import Channel, apply_channel_batch
from .qmath import (
    DimensionError,
    SeedLike,
    as_rng,
    fidelity_batch,
    haar_random_states,
    project_to_state,
)

PROB_ATOL = 1e-9

# lambda/30 path stability expressed as a phase
DEFAULT_PHASE_JITTER = 2 * np.pi / 30
DEFAULT_VISIBILITY = 0.92

ALL_SUBSETS_MAX_K = 8

PER_SHOT = "per-shot"
PER_SETTING = "per-setting"


@dataclass(frozen=True)
class NoiseModel:
    """Imperfect path interferometer acting on the ancilla coherence.

    Visibility scales the ancilla off-diagonal blocks; the relative path phase
    gets a fixed offset plus a Gaussian error. With ``jitter_mode="per-shot"``
    every detected photon sees an independent phase, which for counting
    statistics is the same as an extra coherence factor exp(-std**2 / 2).
    With ``"per-setting"`` (and always in exact-probability mode) one phase is
    drawn per measurement setting.
    """

    visibility: float = DEFAULT_VISIBILITY
    phase_offset: float = 0.0
    phase_jitter_std: float = DEFAULT_PHASE_JITTER
    jitter_mode: str = PER_SHOT

    def __post_init__(self):
        if not 0.0 <= self.visibility <= 1.0:
            raise ValueError(f"visibility must lie in [0, 1], got {self.visibility}")
        if self.phase_jitter_std < 0:
            raise ValueError("phase_jitter_std must be non-negative")
        if self.jitter_mode not in (PER_SHOT, PER_SETTING):
            raise ValueError(f"jitter_mode must be {PER_SHOT!r} or {PER_SETTING!r}")

    @classmethod
    def ideal(cls) -> "NoiseModel":
        return cls(1.0, 0.0, 0.0)

    @property
    def is_ideal(self) -> bool:
        return self.visibility == 1.0 and self.phase_offset == 0.0 and self.phase_jitter_std == 0.0

    @property
    def is_stochastic(self) -> bool:
        return self.phase_jitter_std > 0.0

    def to_dict(self) -> dict:
        return {
            "visibility": self.visibility,
            "phase_offset": self.phase_offset,
            "phase_jitter_std": self.phase_jitter_std,
            "jitter_mode": self.jitter_mode,
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "NoiseModel":
        fields_ = {"visibility", "phase_offset", "phase_jitter_std", "jitter_mode"}
        unknown = set(doc) - fields_
        if unknown:
            raise ValueError(f"unknown noise fields {sorted(unknown)}")
        kwargs = {k: (v if k == "jitter_mode" else float(v)) for k, v in doc.items()}
        return cls(**kwargs)


def apply_noise(
    joint: np.ndarray,
    noise: NoiseModel | None,
    rng: SeedLike = None,
    average_jitter: bool = False,
) -> np.ndarray:
    """Dephase and phase-shift the ancilla of an (ancilla x system) density matrix.

    The ancilla is the leading tensor factor, so the coherences are the two
    off-diagonal D x D blocks. ``average_jitter`` replaces the random phase
    draw by its ensemble average (the per-shot model).
    """
    if noise is None or noise.is_ideal:
        return joint
    coherence = noise.visibility * np.exp(1j * noise.phase_offset)
    if noise.is_stochastic:
        if average_jitter:
            coherence *= np.exp(-0.5 * noise.phase_jitter_std**2)
        else:
            coherence *= np.exp(1j * noise.phase_jitter_std * as_rng(rng).standard_normal())
    D = joint.shape[0] // 2
    out = np.array(joint, dtype=complex)
    out[D:, :D] *= coherence
    out[:D, D:] *= np.conj(coherence)
    return out


@dataclass(frozen=True)
class CountRecord:
    counts: tuple
    shots: int
    setting: tuple = ()

    def __post_init__(self):
        if sum(self.counts) != self.shots:
            raise ValueError("counts do not sum to shots")

    @property
    def frequencies(self) -> np.ndarray:
        return np.asarray(self.counts, dtype=float) / self.shots


def sample_counts(probabilities: Sequence[float], shots: int, seed: SeedLike = None, setting: tuple = ()) -> CountRecord:
    """Multinomial detection counts for one measurement setting."""
    p = np.asarray(probabilities, dtype=float)
    if shots < 1:
        raise ValueError("shots must be at least 1")
    if np.any(p < -PROB_ATOL):
        raise ValueError(f"negative probability {p.min():.3g}")
    if abs(p.sum() - 1.0) > PROB_ATOL:
        raise ValueError(f"probabilities sum to {p.sum():.12g}, not 1")
    p = np.clip(p, 0.0, None)
    p /= p.sum()
    counts = as_rng(seed).multinomial(shots, p)
    return CountRecord(tuple(int(c) for c in counts), int(shots), tuple(setting))


def error_bound(M: int, K: int, scale: float = 1.0) -> float:
    """scale * sqrt((K - M) / (M (K - 1))): standard error of a mean of M
    draws without replacement from K values, up to the population spread."""
    if K < 1 or not 1 <= M <= K:
        raise ValueError(f"need 1 <= M <= K, got M={M}, K={K}")
    if scale < 0:
        raise ValueError("scale must be non-negative")
    if K == 1:
        return 0.0
    return scale * math.sqrt((K - M) / (M * (K - 1)))


SCALE_RULES = ("worst-case-deviation", "population-std", "max-deviation")


def _dim_from_K(K: int) -> int | None:
    D = int(round((math.sqrt(1 + 4 * K) - 1) / 2))
    return D if D * (D + 1) == K else None


@dataclass
class ConvergenceReport:
    """Errors of size-M subset means against the full-design mean, M = 1..K.

    ``subset_errors[M]`` lines up with ``subsets[M]``; everything is in chi
    units when ``factor`` is (D + 1) / D.
    """

    element: tuple
    per_state_values: tuple
    reference: complex
    scale: float
    factor: float
    subsets: dict
    subset_errors: dict
    bound_curve: np.ndarray
    violations: int
    scale_rule: str = "worst-case-deviation"
    enumeration: str = "all-subsets"

    @property
    def K(self) -> int:
        return len(self.per_state_values)

    def max_error_curve(self) -> np.ndarray:
        return np.array([self.subset_errors[M].max() for M in range(1, self.K + 1)])

    def rows(self):
        a, b = self.element if self.element else ("", "")
        for M in range(1, self.K + 1):
            bound = float(self.bound_curve[M - 1])
            for sid, err in enumerate(self.subset_errors[M]):
                yield {"element_a": a, "element_b": b, "M": M, "subset_id": sid,
                       "error": repr(float(err)), "bound": repr(bound)}

    def to_csv(self, handle=None, header: bool = True) -> str | None:
        out = handle if handle is not None else io.StringIO()
        writer = csv.DictWriter(out, fieldnames=CONVERGENCE_COLUMNS, lineterminator="\n")
        if header:
            writer.writeheader()
        writer.writerows(self.rows())
        return out.getvalue() if handle is None else None


CONVERGENCE_COLUMNS = ["element_a", "element_b", "M", "subset_id", "error", "bound"]


def _subsets(K: int, enumeration: str, n_perms: int, seed: SeedLike) -> dict:
    if enumeration == "all-subsets":
        return {M: list(itertools.combinations(range(K), M)) for M in range(1, K + 1)}
    if enumeration == "prefixes":
        rng = as_rng(seed)
        perms = [tuple(range(K))] + [tuple(rng.permutation(K)) for _ in range(n_perms - 1)]
        return {M: [p[:M] for p in perms] for M in range(1, K + 1)}
    raise ValueError(f"unknown enumeration {enumeration!r}")


def convergence_report(
    per_state_values: Sequence,
    true_mean: complex | None = None,
    scale_rule: str | float = "worst-case-deviation",
    enumerate: str = "auto",
    n_perms: int = 200,
    seed: SeedLike = 0,
    element: tuple = (),
    chi_units: bool = True,
) -> ConvergenceReport:
    """Subset-mean errors and the finite-population bound for one element.

    ``per_state_values`` are per-design-state (pseudo-)fidelities, possibly
    complex. Scale rules:

    * ``worst-case-deviation``: sigma * sqrt(K - 1), the largest deviation a
      single value can have given the population spread sigma. The resulting
      curve sigma * sqrt((K - M) / M) bounds every subset error
      deterministically (Cauchy-Schwarz on the subset and its complement).
    * ``population-std``: sigma, the one-standard-error curve.
    * ``max-deviation``: the observed max_j |v_j - mean|.
    * a number: used as-is (in the same units as the errors).
    """
    values = np.asarray(per_state_values, dtype=complex)
    if values.ndim != 1 or values.size == 0:
        raise ValueError("per_state_values must be a non-empty list")
    K = values.size
    D = _dim_from_K(K)
    factor = (D + 1) / D if (chi_units and D) else 1.0
    mean = values.mean()
    reference = mean if true_mean is None else complex(true_mean)
    dev = np.abs(values - mean)
    sigma = math.sqrt(float(np.mean(dev**2)))
    if isinstance(scale_rule, (int, float)):
        scale, rule = float(scale_rule), "explicit"
    elif scale_rule == "worst-case-deviation":
        scale, rule = factor * sigma * math.sqrt(K - 1), scale_rule
    elif scale_rule == "population-std":
        scale, rule = factor * sigma, scale_rule
    elif scale_rule == "max-deviation":
        scale, rule = factor * float(dev.max()), scale_rule
    else:
        raise ValueError(f"unknown scale rule {scale_rule!r}")
    if enumerate == "auto":
        enumerate = "all-subsets" if K <= ALL_SUBSETS_MAX_K else "prefixes"
    subsets = _subsets(K, enumerate, n_perms, seed)
    errors, violations = {}, 0
    bound = np.array([error_bound(M, K, scale) for M in range(1, K + 1)])
    for M, subs in subsets.items():
        idx = np.array(subs, dtype=int)
        err = factor * np.abs(values[idx].mean(axis=1) - reference)
        errors[M] = err
        violations += int(np.count_nonzero(err > bound[M - 1] * (1 + 1e-9) + 1e-12))
    return ConvergenceReport(
        element=tuple(element),
        per_state_values=tuple(values.tolist()),
        reference=complex(reference),
        scale=scale,
        factor=factor,
        subsets=subsets,
        subset_errors=errors,
        bound_curve=bound,
        violations=violations,
        scale_rule=rule,
        enumeration=enumerate,
    )


@dataclass(frozen=True)
class ChannelFidelityEstimate:
    value: float
    std_error: float
    n_samples: int

    def to_json(self) -> dict:
        return {"value": self.value, "std_error": self.std_error, "n_samples": self.n_samples}


def channel_fidelity(ch1: Channel, ch2: Channel, n_samples: int = 2000, seed: SeedLike = 0) -> ChannelFidelityEstimate:
    """Haar average over pure inputs of the Uhlmann fidelity between the two outputs.

    Outputs of reconstructed maps that are not exactly CP are projected onto
    the nearest density matrix (negative eigenvalues clipped) before the
    fidelity is taken.
    """
    if ch1.dim != ch2.dim:
        raise DimensionError(f"channels act on different dimensions ({ch1.dim} vs {ch2.dim})")
    if n_samples < 2:
        raise ValueError("n_samples must be at least 2")
    psi = haar_random_states(ch1.dim, n_samples, seed)
    rhos = np.einsum("ki,kj->kij", psi, psi.conj())
    out1 = project_to_state(apply_channel_batch(ch1, rhos))
    out2 = project_to_state(apply_channel_batch(ch2, rhos))
    f = fidelity_batch(out1, out2)
    return ChannelFidelityEstimate(float(f.mean()), float(f.std(ddof=1) / math.sqrt(n_samples)), n_samples)
