import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from faddeevlab.grid import Jet2
from faddeevlab.identities import random_frames, random_jets
from faddeevlab.nullforms import (
    FrameDegenerateError,
    NullFrame,
    good_derivatives,
    null_estimate_ratio,
    null_identity_residual,
    q0,
    qmn,
    qmn_all,
    qmn_contract,
    qq,
)


def test_q0_of_null_plane_wave_vanishes():
    # f = t - x_1 has a null gradient
    d = np.array([1.0, -1.0, 0.0])
    assert q0(d, d) == 0.0


def test_qmn_examples():
    a = np.array([1.0, 2.0, 3.0])
    b = np.array([0.5, -1.0, 4.0])
    assert qmn(a, b, 0, 1) == 1.0 * -1.0 - 2.0 * 0.5
    assert qmn(a, b, 1, 1) == 0.0


@given(st.integers(0, 10**6), st.sampled_from([2, 3]))
def test_antisymmetry_exact(seed, dim):
    rng = np.random.default_rng(seed)
    f, g = random_jets(rng, dim, 5), random_jets(rng, dim, 5)
    Q = qmn_all(f, g)
    assert np.array_equal(Q, -np.swapaxes(Q, 0, 1))


@given(st.integers(0, 10**6), st.sampled_from([2, 3]))
def test_qq_contracts_lagrange_identity(seed, dim):
    rng = np.random.default_rng(seed)
    f, g = random_jets(rng, dim, 7), random_jets(rng, dim, 7)
    lhs = qmn_contract(qmn_all(f, g), qmn_all(f, g))
    assert np.allclose(lhs, qq(f, g), rtol=1e-12, atol=1e-12)


def test_decomposition_identities_on_random_jets():
    rng = np.random.default_rng(7)
    for dim in (2, 3):
        f, g = random_jets(rng, dim, 1000), random_jets(rng, dim, 1000)
        rq, rm = null_identity_residual(f, g, random_frames(rng, dim, 1000))
        assert rq.max() <= 1e-12 and rm.max() <= 1e-12


def test_good_derivatives_annihilate_outgoing_profile():
    # f(t, x) = F(t - r): D f is proportional to (1, -x/r), so T f = 0
    x = np.array([[0.3], [0.4]])
    frame = NullFrame.at(x)
    d1 = np.array([[2.0], [-2.0 * 0.6], [-2.0 * 0.8]])
    assert np.allclose(good_derivatives(d1, frame), 0.0, atol=1e-15)


def test_frame_degenerate_at_origin():
    with pytest.raises(FrameDegenerateError):
        NullFrame.at(np.zeros((3, 1)))


@given(st.integers(0, 10**6))
def test_null_estimate_bounded(seed):
    rng = np.random.default_rng(seed)
    f, g = random_jets(rng, 3, 50), random_jets(rng, 3, 50)
    assert null_estimate_ratio(f, g, random_frames(rng, 3, 50)).max() <= 2 * 4


def test_jet_input_equals_vector_input():
    j = Jet2(0.0, [1.0, 2.0, 3.0])
    assert q0(j, j) == q0(j.d1, j.d1) == 1.0 - 4.0 - 9.0
