"""Exit-gate checks, one recorded PASS/FAIL line per criterion."""
import json
import os
import subprocess
import sys
import time

import numpy as np
import pytest

from conftest import IDENTITY_CHI, QWP_CHI
from seqpt.channels import ModifiedChannel, builtin_channel, random_channel
from seqpt.designs import mub_design, verify_2design
from seqpt.experiment import NoiseModel, channel_fidelity, convergence_report, error_bound
from seqpt.tomography import (
    design_average_fidelity,
    haar_average_fidelity,
    per_state_estimates,
    resource_count,
    run_offdiagonal_circuit,
    seqpt_full,
    seqpt_offdiagonal,
    standard_qpt,
)

pytestmark = pytest.mark.acceptance


def test_c1_exact_mode_analytic_chi(record_criterion, identity, qwp):
    t0 = time.perf_counter()
    worst = 0.0
    for ch, truth in ((identity, IDENTITY_CHI), (qwp, QWP_CHI)):
        for est in (seqpt_full(ch), seqpt_full(ch, method="seqpt-ancilla-free"), standard_qpt(ch)):
            worst = max(worst, float(np.max(np.abs(est.chi - truth))))
    elapsed = time.perf_counter() - t0
    ok = worst <= 1e-9 and elapsed < 1.0
    record_criterion("C1 exact-mode analytic chi", ok, f"max error {worst:.2e}, {elapsed:.2f} s")
    assert ok


def test_c2_random_channel_oracle(record_criterion):
    t0 = time.perf_counter()
    worst = 0.0
    for seed in range(50):
        ch = random_channel(2, 1000 + seed)
        worst = max(worst, float(np.max(np.abs(seqpt_full(ch).chi - ch.chi()))))
    elapsed = time.perf_counter() - t0
    ok = worst <= 1e-8 and elapsed < 10.0
    record_criterion("C2 oracle equivalence, 50 random channels", ok, f"max error {worst:.2e}, {elapsed:.2f} s")
    assert ok


def test_c3_fidelity_to_chi_identity(record_criterion):
    design = mub_design(1)
    D = 2
    worst = 0.0
    for seed in range(20):
        ch = random_channel(2, 2000 + seed)
        chi = ch.chi()
        for a in range(4):
            for b in range(4):
                if a == b:
                    F = design_average_fidelity(ModifiedChannel(ch, a, a), design).value
                else:
                    F = np.mean([
                        run_offdiagonal_circuit(ch, a, b, s, "x").signal
                        + 1j * run_offdiagonal_circuit(ch, a, b, s, "y").signal
                        for s in design
                    ])
                worst = max(worst, abs(((D + 1) * F - (a == b)) / D - chi[a, b]))
    ok = worst <= 1e-9
    record_criterion("C3 design-average fidelity to chi", ok, f"max error {worst:.2e} over 20 x 16 elements")
    assert ok


def test_c4_design_frame_and_haar_agreement(record_criterion):
    r1 = verify_2design(mub_design(1)).max_residual
    r2 = verify_2design(mub_design(2)).max_residual
    worst_z = 0.0
    for seed in range(10):
        ch = random_channel(2, 3000 + seed)
        for a in range(4):
            for b in range(4):
                mod = ModifiedChannel(ch, a, b)
                haar = haar_average_fidelity(mod, 100_000, seed)
                exact = np.mean(per_state_estimates(ch, a, b, mub_design(1))[0])
                worst_z = max(worst_z, abs(haar.value - exact) / haar.std_error)
    ok = r1 <= 1e-10 and r2 <= 1e-10 and worst_z <= 3.0
    record_criterion("C4 2-design frame and Haar agreement", ok,
                     f"residuals {r1:.1e} / {r2:.1e}; largest |Haar - design| / SE over 160 elements {worst_z:.2f}")
    assert ok


def test_c5_resource_counts(record_criterion):
    got = (resource_count("seqpt-element", 2), resource_count("standard-full", 2))
    ok = got == (6, 16) and standard_qpt(builtin_channel("identity")).n_probabilities == 16
    record_criterion("C5 resource counts", ok, f"seqpt element {got[0]}, standard full {got[1]}")
    assert ok


def test_c6_error_bound_and_zero_violations(record_criterion, identity):
    s = 0.7
    curve_ok = all(abs(error_bound(M, 6, s) - s * np.sqrt((6 - M) / (5 * M))) <= 1e-15 for M in range(1, 7))
    curve_ok &= error_bound(6, 6, s) == 0.0
    design = mub_design(1)
    violations = 0
    for a in range(4):
        for b in range(4):
            vals, _ = per_state_estimates(identity, a, b, design)
            violations += convergence_report(vals, scale_rule="worst-case-deviation",
                                             enumerate="all-subsets").violations
    ok = curve_ok and violations == 0
    record_criterion("C6 error bound curve and violations", ok,
                     f"curve formula {curve_ok}, {violations} violations over 16 elements x 63 subsets")
    assert ok


TARGET_MEDIANS = {"identity": 0.951, "qwp": 0.963}


@pytest.mark.parametrize("name", ["identity", "qwp"])
def test_c7_noisy_fidelity_band(record_criterion, name):
    ch = builtin_channel(name, [0] if name == "qwp" else [])
    noise = NoiseModel(0.92, 0.0, 2 * np.pi / 30)
    t0 = time.perf_counter()
    fids = []
    for seed in range(50):
        est = seqpt_full(ch, shots=10_000, noise=noise, seed=seed)
        fids.append(channel_fidelity(ch, est.channel(), 2000, seed).value)
    elapsed = time.perf_counter() - t0
    fids = np.array(fids)
    median = float(np.median(fids))
    in_band = bool(np.all((fids >= 0.92) & (fids <= 0.995)))
    ok = in_band and abs(median - TARGET_MEDIANS[name]) <= 0.03 and elapsed < 120
    record_criterion(f"C7 noisy fidelity band ({name})", ok,
                     f"median {median:.4f} (target {TARGET_MEDIANS[name]}), range [{fids.min():.4f}, {fids.max():.4f}], "
                     f"{elapsed:.1f} s")
    assert ok


def test_c8_shot_scaling(record_criterion, qwp):
    def spread(shots):
        return np.std([seqpt_offdiagonal(qwp, "I", "Z", shots=shots, seed=s).value for s in range(100)])

    ratio = spread(4000) / spread(1000)
    ok = 0.4 <= ratio <= 0.6
    record_criterion("C8 std halves for 4x shots", ok, f"ratio {ratio:.3f}")
    assert ok


def test_c9_determinism_across_threads(record_criterion, tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"channel": "qwp:0", "method": "all", "shots": 1000, "seed": 5,
                               "noise": {"visibility": 0.92}, "fidelity_samples": 200}))
    outputs = []
    for threads in ("1", "4", "4", "1"):
        env = dict(os.environ, SEQPT_THREADS=threads)
        proc = subprocess.run([sys.executable, "-m", "seqpt.cli", "tomograph", "--config", str(cfg)],
                              capture_output=True, env=env, check=True)
        outputs.append(proc.stdout)
    ok = len(set(outputs)) == 1
    record_criterion("C9 byte-identical outputs across SEQPT_THREADS", ok, f"{len(outputs)} runs, {len(set(outputs))} distinct")
    assert ok
