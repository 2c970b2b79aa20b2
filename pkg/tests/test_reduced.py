import numpy as np
import pytest

from localtimes import DimensionError, ParameterError, partial_trace, random_state, random_unitary
from localtimes.reduced import (FourBodyAmplitudes, FourBodySystem, PairSchmidtData, adapted_amplitudes, channel_weights,
        initial_reduced, merge_amplitudes, merged_reduced, merged_state, merged_weights, restructured_reduced)

def test_restructuring_oracles(rng):
    for _ in range(50):
        report = FourBodySystem.random(rng).report(t12=0.7, t34=1.3, t23=0.4, t1=0.9, t4=1.1)
        assert report.worst_oracle() <= 1e-10
        assert report.merge_norm_defect <= 1e-10
        assert report.channel_norm_defect <= 1e-10
        assert report.spectrum_invariance <= 1e-10
        assert report.merge_time_independence <= 1e-12

def test_merged_weights_ignore_other_pair_time(rng):
    system = FourBodySystem.random(rng)
    s12, s34 = system.first_stage(0.5, 0.2)
    _, s34_later = system.first_stage(0.5, 3.7)
    r = merged_weights(merge_amplitudes(system.amplitudes, s12, s34), 1)
    r_later = merged_weights(merge_amplitudes(system.amplitudes, s12, s34_later), 1)
    assert np.max(np.abs(r - r_later)) <= 1e-12
    assert r.sum() == pytest.approx(1.0)

def test_merged_pair_members_share_state(rng):
    system = FourBodySystem.random(rng)
    s12, s34 = system.first_stage(0.3, 0.6)
    one = merged_reduced(system.amplitudes, s12, s34, 1).matrix
    two = merged_reduced(system.amplitudes, s12, s34, 2).matrix
    assert np.allclose(one, two)
    psi = merged_state(system.amplitudes, s12, s34)
    assert psi.dims == (4, 4, 4, 4)
    assert np.allclose(partial_trace(psi, (3,)).matrix, merged_reduced(system.amplitudes, s12, s34, 4).matrix, atol=1e-12)

def test_initial_reduced_is_diagonal_in_adapted_basis(rng):
    c = FourBodyAmplitudes.of(random_state(rng, (2, 3, 2, 2)))
    adapted, bases = adapted_amplitudes(c)
    assert np.linalg.norm(adapted) == pytest.approx(1.0)
    for k in (1, 2, 3, 4):
        state = initial_reduced(c, k)
        assert state.weights.sum() == pytest.approx(1.0)
        rho = partial_trace(c.state(), (k - 1,)).matrix
        assert np.allclose(bases[k - 1].conj().T @ rho @ bases[k - 1], np.diag(state.weights), atol=1e-12)

def test_channel_weights_and_second_stage(rng):
    system = FourBodySystem.random(rng)
    s12, s34 = system.first_stage(0.7, 1.3)
    d = merge_amplitudes(system.amplitudes, s12, s34)
    s23 = system.second_stage(s12, s34, 0.4)
    lam = channel_weights(d, s23)
    assert lam.sum() == pytest.approx(1.0)
    assert np.all(lam >= -1e-15)
    rho2 = restructured_reduced(d, s23, system.h1, 0.9, 2)
    assert np.allclose(np.diag(rho2.matrix).real, lam)
    with pytest.raises(ParameterError):
        restructured_reduced(d, s23, system.h1, 0.9, 3)

def test_pair_coefficients_must_be_unitary(rng):
    U = random_unitary(rng, 4)
    data = PairSchmidtData.from_unitary(U, (2, 2))
    assert data.size == 4 and data.pair_dims == (2, 2)
    with pytest.raises(ParameterError):
        PairSchmidtData.from_unitary(2 * U, (2, 2))
    with pytest.raises(DimensionError):
        PairSchmidtData.from_unitary(U, (2, 3))

def test_amplitudes_need_four_axes(rng):
    with pytest.raises(DimensionError):
        FourBodyAmplitudes.of(random_state(rng, (2, 2, 2)))
