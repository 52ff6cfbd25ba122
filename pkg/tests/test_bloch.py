import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from heomcp.bloch import (NotHermiticityPreserving, PAULIS, SIGMA_MINUS, SIGMA_Z, SandwichTerm,
                          assemble_extended_generator, bloch_of_density, charpoly_coefficients,
                          chi_of_transfer, density_of_bloch, elementary_symmetric,
                          elementary_symmetric_bruteforce, transfer_of_channel, transfer_of_chi,
                          transfer_of_sandwich_sum)

finite = st.floats(-10, 10, allow_nan=False, allow_infinity=False)


def random_hermitian(seed, n=4, scale=1.0):
    r = np.random.default_rng(seed)
    A = r.standard_normal((n, n)) + 1j * r.standard_normal((n, n))
    return scale * (A + A.conj().T) / 2


def kraus_transfer(kraus):
    return transfer_of_channel(lambda rho: sum(K @ rho @ K.conj().T for K in kraus))


@given(arrays(float, (4, 4), elements=finite))
def test_chi_round_trip(T):
    assert np.max(np.abs(transfer_of_chi(chi_of_transfer(T)) - T)) <= 1e-12 * max(1, np.max(np.abs(T)))


@given(st.integers(0, 2**32 - 1), st.integers(1, 4), st.floats(1e-3, 1e3))
def test_ek_matches_eigen_subsets(seed, k, scale):
    M = random_hermitian(seed, scale=scale)
    ref = elementary_symmetric_bruteforce(M, k)
    got = elementary_symmetric(M, k)
    assert abs(got - ref) <= 1e-9 * max(abs(ref), np.max(np.abs(np.linalg.eigvalsh(M))) ** k)


def test_ek_stack_matches_single():
    Ms = np.array([random_hermitian(s) for s in range(5)])
    stack = elementary_symmetric(Ms, 2)
    assert stack.shape == (5,)
    assert np.allclose(stack, [elementary_symmetric(M, 2) for M in Ms], atol=1e-12)


def test_charpoly_first_and_last():
    M = random_hermitian(3)
    c = charpoly_coefficients(M)
    assert np.isclose(c[0], 1)
    assert np.isclose(c[1], np.trace(M))
    assert np.isclose(c[4], np.linalg.det(M))


def test_ek_rejects_bad_order():
    with pytest.raises(ValueError):
        elementary_symmetric(np.eye(4), 5)


@given(arrays(float, (4, 4), elements=finite), arrays(float, (4, 4), elements=finite))
def test_composition_is_product(A, B):
    chiA, chiB = chi_of_transfer(A), chi_of_transfer(B)

    def apply(chi, rho):
        return sum(chi[i, j] * PAULIS[i] @ rho @ PAULIS[j].conj().T for i in range(4) for j in range(4))

    TAB = transfer_of_channel(lambda rho: apply(chiA, apply(chiB, rho)))
    assert np.allclose(TAB, A @ B, atol=1e-9 * max(1, np.max(np.abs(A @ B))))


@pytest.mark.parametrize("kraus", [
    [np.array([[1, 0], [0, np.exp(0.7j)]])],
    [np.sqrt(0.7) * np.eye(2), np.sqrt(0.3) * SIGMA_Z],
    [np.array([[1, 0], [0, np.sqrt(0.6)]]), np.array([[0, np.sqrt(0.4)], [0, 0]])],
], ids=["unitary", "dephasing", "amplitude_damping"])
def test_cptp_maps_have_psd_chi(kraus):
    chi = chi_of_transfer(kraus_transfer(kraus))
    assert np.linalg.eigvalsh(chi)[0] >= -1e-12
    assert np.isclose(np.trace(chi).real, 1.0)


def test_identity_chi_is_rank_one():
    chi = chi_of_transfer(np.eye(4))
    assert np.allclose(chi, np.diag([1, 0, 0, 0]))


def test_sandwich_dissipator_amplitude_damping():
    g = 0.8
    terms = [SandwichTerm(g, SIGMA_MINUS, SIGMA_MINUS), SandwichTerm(-g / 2, SIGMA_MINUS.conj().T @ SIGMA_MINUS, np.eye(2)),
             SandwichTerm(-g / 2, np.eye(2), SIGMA_MINUS.conj().T @ SIGMA_MINUS)]
    T = transfer_of_sandwich_sum(terms)
    assert np.allclose(np.diag(T), [0, -g / 2, -g / 2, -g])
    assert np.isclose(T[3, 0], -g)


def test_sandwich_rejects_non_hermiticity_preserving():
    with pytest.raises(NotHermiticityPreserving):
        transfer_of_sandwich_sum([SandwichTerm(1j, np.eye(2), np.eye(2))])


def test_bloch_density_round_trip():
    b = np.array([1.0, 0.3, -0.2, 0.5])
    assert np.allclose(bloch_of_density(density_of_bloch(b)), b)


def test_assemble_generator_blocks():
    L = assemble_extended_generator([[np.eye(4), None], [2 * np.eye(4), None]])
    assert L.shape == (8, 8)
    assert np.allclose(L[4:, :4], 2 * np.eye(4)) and not L[:4, 4:].any()
    with pytest.raises(ValueError):
        assemble_extended_generator([[np.eye(3)]])
