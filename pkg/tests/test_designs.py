import itertools
import json

import numpy as np
import pytest
from hypothesis import given, strategies as st

from seqpt.designs import (
    WITH_REPLACEMENT,
    WITHOUT_REPLACEMENT,
    SamplingPlan,
    TwoDesign,
    make_plan,
    mub_design,
    verify_2design,
)
from seqpt.qmath import DimensionError, ket

s = 1 / np.sqrt(2)
EXPECTED_QUBIT_STATES = [
    [1, 0], [0, 1],          # H, V
    [s, s], [s, -s],         # diagonal, antidiagonal
    [s, 1j * s], [s, -1j * s],  # circular
]


def _sym_projector_by_basis(dim):
    # independent of the swap construction: sum over an orthonormal basis of Sym^2
    vecs = []
    for i in range(dim):
        for j in range(i, dim):
            v = np.zeros(dim * dim)
            v[i * dim + j] += 1
            v[j * dim + i] += 1
            vecs.append(v / np.linalg.norm(v))
    return sum(np.outer(v, v) for v in vecs)


def test_qubit_design_states_in_order():
    d = mub_design(1)
    assert d.K == 6 and d.dim == 2
    np.testing.assert_allclose(d.vectors, np.array(EXPECTED_QUBIT_STATES), atol=1e-15)


@pytest.mark.parametrize("n", [1, 2])
def test_frame_condition_against_symmetric_basis(n):
    d = mub_design(n)
    D = 2**n
    frame = sum(np.kron(np.outer(v, v.conj()), np.outer(v, v.conj())) for v in d.vectors) / d.K
    np.testing.assert_allclose(frame, 2 * _sym_projector_by_basis(D) / (D * (D + 1)), atol=1e-10)
    check = verify_2design(d.states)
    assert check.is_design and check.max_residual <= 1e-10


@pytest.mark.parametrize("n", [1, 2])
def test_blocks_are_orthonormal_and_unbiased(n):
    d = mub_design(n)
    D = d.dim
    assert d.K == D * (D + 1)
    V = d.vectors
    gram = np.abs(V.conj() @ V.T)
    for blk in range(D + 1):
        sl = slice(blk * D, (blk + 1) * D)
        np.testing.assert_allclose(V[sl].conj() @ V[sl].T, np.eye(D), atol=1e-12)
    for i, j in itertools.combinations(range(d.K), 2):
        if i // D != j // D:
            assert gram[i, j] == pytest.approx(1 / np.sqrt(D), abs=1e-10)


def test_phase_convention():
    for n in (1, 2):
        for v in mub_design(n).vectors:
            first = v[np.flatnonzero(np.abs(v) > 1e-12)[0]]
            assert abs(first.imag) < 1e-15 and first.real > 0


def test_unsupported_design():
    with pytest.raises(DimensionError):
        mub_design(3)


def test_not_designs():
    assert not verify_2design([ket(0, 2), ket(1, 2)]).is_design
    states = list(mub_design(1).states)
    states[3] = ket(0, 2)
    check = verify_2design(states)
    assert not check.is_design and check.max_residual > 1e-3


def test_mixed_dimensions_rejected():
    with pytest.raises(DimensionError):
        verify_2design([ket(0, 2), ket(0, 4)])


def test_design_json_round_trip():
    d = mub_design(2)
    back = TwoDesign.from_json(json.loads(json.dumps(d.to_json())))
    np.testing.assert_array_equal(back.vectors, d.vectors)


def test_plan_examples():
    full = make_plan(6, 6, WITHOUT_REPLACEMENT, seed=3)
    assert sorted(full.indices) == list(range(6)) and full.is_full
    single = make_plan(6, 1, seed=8)
    assert single.M == 1 and 0 <= single.indices[0] < 6
    assert make_plan(6, 3, seed=42).indices == make_plan(6, 3, seed=42).indices


def test_plan_errors():
    with pytest.raises(ValueError):
        make_plan(6, 7, WITHOUT_REPLACEMENT)
    with pytest.raises(ValueError):
        SamplingPlan((0, 0), 6)
    with pytest.raises(IndexError):
        SamplingPlan((6,), 6)


@given(st.integers(1, 20), st.data())
def test_plan_invariants(K, data):
    M = data.draw(st.integers(1, K))
    seed = data.draw(st.integers(0, 1000))
    plan = make_plan(K, M, WITHOUT_REPLACEMENT, seed)
    assert len(set(plan.indices)) == M and all(0 <= i < K for i in plan.indices)
    wr = make_plan(K, data.draw(st.integers(1, 3 * K)), WITH_REPLACEMENT, seed)
    assert all(0 <= i < K for i in wr.indices)
