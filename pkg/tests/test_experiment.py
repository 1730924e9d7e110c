import io
import itertools
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from seqpt.channels import builtin_channel, random_channel
from seqpt.experiment import (
    CONVERGENCE_COLUMNS,
    NoiseModel,
    apply_noise,
    channel_fidelity,
    convergence_report,
    error_bound,
    sample_counts,
)
from seqpt.qmath import DimensionError, haar_random_state


def test_counts_deterministic_distribution():
    assert sample_counts((1.0, 0.0), 100, 0).counts == (100, 0)


@pytest.mark.parametrize("seed", range(5))
def test_counts_binomial_concentration(seed):
    rec = sample_counts((0.5, 0.5), 10**6, seed)
    assert 0.497 <= rec.frequencies[0] <= 0.503


def test_counts_sum_and_errors():
    assert sum(sample_counts((1 / 3, 1 / 3, 1 / 3), 3, 1).counts) == 3
    with pytest.raises(ValueError):
        sample_counts((1.1, -0.1), 10, 0)
    with pytest.raises(ValueError):
        sample_counts((0.5, 0.4), 10, 0)
    assert sample_counts((0.3, 0.7), 50, 9).counts == sample_counts((0.3, 0.7), 50, 9).counts


def _joint(seed=0):
    psi = haar_random_state(4, seed).amplitudes
    return np.outer(psi, psi.conj())


def test_noise_identity_cases():
    rho = _joint()
    assert apply_noise(rho, NoiseModel.ideal()) is rho
    assert apply_noise(rho, None) is rho


def test_noise_full_dephasing_kills_coherence():
    out = apply_noise(_joint(), NoiseModel(0.0, 0.0, 0.0))
    assert np.abs(out[2:, :2]).max() == 0 and np.abs(out[:2, 2:]).max() == 0
    np.testing.assert_array_equal(out[:2, :2], _joint()[:2, :2])


def test_noise_visibility_and_phase():
    rho = _joint(3)
    out = apply_noise(rho, NoiseModel(0.5, np.pi / 2, 0.0))
    np.testing.assert_allclose(out[2:, :2], 0.5j * rho[2:, :2], atol=1e-15)
    np.testing.assert_allclose(out[:2, 2:], -0.5j * rho[:2, 2:], atol=1e-15)


def test_noise_jitter_per_setting_and_average():
    rho = _joint(4)
    nm = NoiseModel(1.0, 0.0, 0.3, "per-setting")
    a = apply_noise(rho, nm, 11)
    b = apply_noise(rho, nm, 11)
    np.testing.assert_array_equal(a, b)
    ratio = a[2, 0] / rho[2, 0]
    assert abs(abs(ratio) - 1) < 1e-12 and abs(np.angle(ratio)) > 0
    avg = apply_noise(rho, nm, average_jitter=True)
    np.testing.assert_allclose(avg[2:, :2], np.exp(-0.045) * rho[2:, :2], atol=1e-15)


def test_noise_validation():
    with pytest.raises(ValueError):
        NoiseModel(1.2)
    with pytest.raises(ValueError):
        NoiseModel(0.9, 0, -1)
    assert NoiseModel().phase_jitter_std == pytest.approx(2 * np.pi / 30)
    assert NoiseModel.from_dict(NoiseModel().to_dict()) == NoiseModel()


def test_error_bound_examples():
    assert error_bound(6, 6) == 0.0
    assert error_bound(1, 6, 1.0) == pytest.approx(1.0)
    assert error_bound(3, 6, 1.0) == pytest.approx(math.sqrt(0.2), abs=1e-12)
    with pytest.raises(ValueError):
        error_bound(7, 6)


@given(st.integers(2, 40), st.floats(0.01, 10))
def test_error_bound_monotone(K, scale):
    vals = [error_bound(M, K, scale) for M in range(1, K + 1)]
    assert vals[0] == pytest.approx(scale)
    assert vals[-1] == 0.0
    assert all(x > y for x, y in zip(vals, vals[1:]))


def _brute_force_violations(values, scale_for_chi, factor=1.5):
    """Independent enumeration: plain loops over every nonempty subset."""
    K = len(values)
    mean = sum(values) / K
    violations = 0
    for M in range(1, K + 1):
        bound = scale_for_chi * math.sqrt((K - M) / (M * (K - 1)))
        for subset in itertools.combinations(values, M):
            err = factor * abs(sum(subset) / M - mean)
            if err > bound + 1e-12:
                violations += 1
    return violations


SURVIVALS_ZZ = (1, 1, 0, 0, 0, 0)


def test_constant_list_has_no_error():
    rep = convergence_report([1.0] * 6)
    assert rep.violations == 0
    assert all(np.all(rep.subset_errors[M] == 0) for M in range(1, 7))


def test_identity_zz_worst_case_zero_violations():
    rep = convergence_report(SURVIVALS_ZZ, scale_rule="worst-case-deviation")
    sigma = math.sqrt(np.mean((np.array(SURVIVALS_ZZ) - 1 / 3) ** 2))
    assert rep.scale == pytest.approx(1.5 * sigma * math.sqrt(5))
    assert rep.violations == 0 == _brute_force_violations(SURVIVALS_ZZ, rep.scale)
    assert sum(len(rep.subsets[M]) for M in range(1, 7)) == 2**6 - 1


def test_max_deviation_rule_is_not_a_bound():
    # the observed max |v - mean| is too small a scale at M = 2: {1, 1} misses by 2/3
    rep = convergence_report(SURVIVALS_ZZ, scale_rule="max-deviation")
    expected = _brute_force_violations(SURVIVALS_ZZ, 1.5 * 2 / 3)
    assert expected > 0
    assert rep.violations == expected


def test_errors_vanish_at_full_design():
    rep = convergence_report([0.2, 0.9, 0.5, 0.1, 0.4, 0.7])
    assert np.all(rep.subset_errors[6] == 0)
    assert rep.bound_curve[-1] == 0.0


@given(st.lists(st.floats(-1, 1, allow_nan=False), min_size=2, max_size=8))
def test_worst_case_scale_is_never_violated(values):
    rep = convergence_report(values, chi_units=False)
    assert rep.violations == 0


@given(st.lists(st.complex_numbers(max_magnitude=1, allow_nan=False, allow_infinity=False), min_size=6, max_size=6))
def test_worst_case_scale_holds_for_complex_values(values):
    assert convergence_report(values).violations == 0


def test_population_std_rule_and_explicit_scale():
    rep = convergence_report(SURVIVALS_ZZ, scale_rule="population-std")
    assert rep.bound_curve[0] == pytest.approx(1.5 * math.sqrt(2) / 3)
    rep = convergence_report(SURVIVALS_ZZ, scale_rule=2.0)
    assert rep.bound_curve[0] == pytest.approx(2.0)
    with pytest.raises(ValueError):
        convergence_report([])


def test_prefix_enumeration_starts_with_design_order():
    rep = convergence_report(list(range(20)), enumerate="auto", n_perms=5, seed=1)
    assert rep.enumeration == "prefixes"
    assert rep.subsets[3][0] == (0, 1, 2)
    assert len(rep.subsets[3]) == 5


def test_convergence_csv_columns():
    rep = convergence_report(SURVIVALS_ZZ, element=("Z", "Z"))
    text = rep.to_csv()
    lines = text.strip().splitlines()
    assert lines[0].split(",") == CONVERGENCE_COLUMNS
    assert len(lines) == 1 + 63
    last = lines[-1].split(",")
    assert last[:3] == ["Z", "Z", "6"] and float(last[-1]) == 0.0


def test_channel_fidelity_identical_channels(qwp):
    est = channel_fidelity(qwp, qwp, 500, 1)
    assert est.value == pytest.approx(1.0, abs=1e-9)
    assert est.std_error <= 1e-9


def test_channel_fidelity_identity_vs_qwp(identity, qwp):
    # (|Tr U^dag V|^2 + D) / (D^2 + D) = (2 + 2) / 6
    est = channel_fidelity(identity, qwp, 100_000, 3)
    assert abs(est.value - 2 / 3) <= 3 * est.std_error


def test_channel_fidelity_vs_fully_depolarizing(identity):
    est = channel_fidelity(identity, builtin_channel("depolarizing", [1.0]), 2000, 5)
    assert est.value == pytest.approx(0.5, abs=1e-9)


def test_channel_fidelity_symmetric_within_error():
    a, b = random_channel(2, 1), random_channel(2, 2)
    f1 = channel_fidelity(a, b, 20_000, 7)
    f2 = channel_fidelity(b, a, 20_000, 8)
    assert abs(f1.value - f2.value) <= 3 * math.hypot(f1.std_error, f2.std_error)
    assert f1.to_json().keys() == {"value", "std_error", "n_samples"}


def test_channel_fidelity_dimension_mismatch(qwp):
    with pytest.raises(DimensionError):
        channel_fidelity(qwp, builtin_channel("identity", n_qubits=2))
