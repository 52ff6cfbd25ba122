"""Qubit superoperators in the Pauli basis.

Conventions
-----------
Bloch components are ``b[j] = tr(sigma_j rho)`` for ``j in (0, x, y, z)`` so that
``rho = sum_j b[j] sigma_j / 2``.  A superoperator ``L`` is represented by its
Pauli-transfer matrix ``T[j, k] = tr(sigma_j L(sigma_k)) / 2`` which acts on Bloch
vectors by ordinary matrix multiplication.

The process matrix ``chi`` uses the bare Pauli matrices as operator basis,
``L(rho) = sum_ij chi[i, j] sigma_i rho sigma_j^dagger``.  The identity map has
``chi = diag(1, 0, 0, 0)``.
"""
from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations
from typing import Sequence

import numpy as np

SIGMA_0 = np.eye(2, dtype=complex)
SIGMA_X = np.array([[0, 1], [1, 0]], dtype=complex)
SIGMA_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
SIGMA_Z = np.array([[1, 0], [0, -1]], dtype=complex)
SIGMA_PLUS = (SIGMA_X + 1j * SIGMA_Y) / 2
SIGMA_MINUS = (SIGMA_X - 1j * SIGMA_Y) / 2

PAULIS = np.stack([SIGMA_0, SIGMA_X, SIGMA_Y, SIGMA_Z])

NAMED_OPERATORS = {
    "id": SIGMA_0,
    "sx": SIGMA_X,
    "sy": SIGMA_Y,
    "sz": SIGMA_Z,
    "sp": SIGMA_PLUS,
    "sm": SIGMA_MINUS,
}

HERMITICITY_TOL = 1e-12

# _SANDWICH[j, a, k, b] = tr(sigma_j sigma_a sigma_k sigma_b) / 2
_SANDWICH = 0.5 * np.einsum("jpq,aqr,krs,bsp->jakb", PAULIS, PAULIS, PAULIS, PAULIS)
# chi (flattened a*4+b) -> T (flattened j*4+k)
_CHI_TO_T = _SANDWICH.transpose(0, 2, 1, 3).reshape(16, 16)
_T_TO_CHI = np.linalg.inv(_CHI_TO_T)


class NotHermiticityPreserving(ValueError):
    """Raised when a superoperator has a non-real transfer matrix."""


@dataclass(frozen=True)
class SandwichTerm:
    """One term ``coeff * left @ rho @ right^dagger`` of a superoperator."""

    coeff: complex
    left: np.ndarray
    right: np.ndarray

    @classmethod
    def named(cls, coeff: complex, left: str, right: str) -> "SandwichTerm":
        return cls(complex(coeff), NAMED_OPERATORS[left], NAMED_OPERATORS[right])


def as_operator(spec) -> np.ndarray:
    """Resolve an operator name or a 2x2 array-like to a complex matrix."""
    if isinstance(spec, str):
        try:
            return NAMED_OPERATORS[spec]
        except KeyError:
            raise ValueError(f"unknown operator name {spec!r}") from None
    op = np.asarray(spec, dtype=complex)
    if op.shape != (2, 2):
        raise ValueError(f"operators must be 2x2, got shape {op.shape}")
    return op


def apply_sandwich_sum(terms: Sequence[SandwichTerm], rho: np.ndarray) -> np.ndarray:
    """Apply ``sum c A rho B^dagger`` to a 2x2 matrix."""
    out = np.zeros((2, 2), dtype=complex)
    for term in terms:
        out += term.coeff * term.left @ rho @ term.right.conj().T
    return out


def transfer_of_sandwich_sum(terms: Sequence[SandwichTerm], tol: float = HERMITICITY_TOL) -> np.ndarray:
    """Pauli-transfer matrix of ``rho -> sum c A rho B^dagger``.

    Raises
    ------
    NotHermiticityPreserving
        If any transfer entry has an imaginary part above ``tol``.
    """
    T = np.zeros((4, 4), dtype=complex)
    for term in terms:
        A = as_operator(term.left)
        B = as_operator(term.right)
        # T[j, k] += c tr(sigma_j A sigma_k B^dagger) / 2
        T += 0.5 * term.coeff * np.einsum("jpq,qr,krs,sp->jk", PAULIS, A, PAULIS, B.conj().T)
    if np.max(np.abs(T.imag), initial=0.0) > tol:
        raise NotHermiticityPreserving(
            f"transfer matrix has imaginary part {np.max(np.abs(T.imag)):.3e}"
        )
    return T.real.copy()


def transfer_of_chi(chi: np.ndarray) -> np.ndarray:
    """Transfer matrix of ``rho -> sum_ij chi_ij sigma_i rho sigma_j^dagger``."""
    chi = np.asarray(chi, dtype=complex)
    return (_CHI_TO_T @ chi.reshape(16)).reshape(4, 4).real


def chi_of_transfer(T: np.ndarray) -> np.ndarray:
    """Process matrix of a qubit superoperator given by its transfer matrix.

    Accepts a stack of transfer matrices with shape ``(..., 4, 4)``.
    """
    T = np.asarray(T, dtype=float)
    flat = T.reshape(T.shape[:-2] + (16,))
    chi = np.einsum("ab,...b->...a", _T_TO_CHI, flat).reshape(T.shape[:-2] + (4, 4))
    # exact Hermitian part; the residual anti-Hermitian part is rounding noise
    return 0.5 * (chi + np.swapaxes(chi.conj(), -1, -2))


def charpoly_coefficients(M: np.ndarray) -> np.ndarray:
    """Coefficients ``c[..., 0..n]`` of ``det(x I - M) = sum_k (-1)^k c[k] x^(n-k)``.

    ``c[k]`` is the k-th elementary symmetric polynomial of the eigenvalues,
    obtained from power sums by Newton's identities.  ``M`` may be a stack.
    """
    M = np.asarray(M)
    n = M.shape[-1]
    powers = []
    P = np.broadcast_to(np.eye(n, dtype=M.dtype), M.shape)
    for _ in range(n):
        P = P @ M
        powers.append(np.trace(P, axis1=-2, axis2=-1))
    e = [np.ones(M.shape[:-2], dtype=M.dtype)]
    for k in range(1, n + 1):
        acc = 0
        for i in range(1, k + 1):
            acc = acc + (-1) ** (i - 1) * e[k - i] * powers[i - 1]
        e.append(acc / k)
    return np.stack(e, axis=-1)


def elementary_symmetric(M: np.ndarray, k: int) -> float:
    """k-th elementary symmetric polynomial of the eigenvalues of Hermitian ``M`` (or a stack)."""
    M = np.asarray(M)
    n = M.shape[-1]
    if not 1 <= k <= n:
        raise ValueError(f"k must lie in [1, {n}], got {k}")
    value = np.real(charpoly_coefficients(M)[..., k])
    return float(value) if value.ndim == 0 else value


def elementary_symmetric_bruteforce(M: np.ndarray, k: int) -> float:
    """Reference value from the eigenvalues (sum over all k-subsets)."""
    w = np.linalg.eigvalsh(M)
    return float(sum(np.prod(c) for c in combinations(w, k)))


def assemble_extended_generator(blocks: Sequence[Sequence[np.ndarray | None]]) -> np.ndarray:
    """Stack an n x n grid of 4x4 transfer blocks into a (4n)x(4n) generator.

    ``None`` entries are zero blocks.
    """
    n = len(blocks)
    if n < 1:
        raise ValueError("need at least one level")
    L = np.zeros((4 * n, 4 * n))
    for i, row in enumerate(blocks):
        if len(row) != n:
            raise ValueError(f"row {i} has {len(row)} blocks, expected {n}")
        for j, block in enumerate(row):
            if block is None:
                continue
            block = np.asarray(block, dtype=float)
            if block.shape != (4, 4):
                raise ValueError(f"block ({i}, {j}) has shape {block.shape}, expected (4, 4)")
            L[4 * i:4 * i + 4, 4 * j:4 * j + 4] = block
    return L


def bloch_of_density(rho: np.ndarray) -> np.ndarray:
    return np.real(np.einsum("jpq,qp->j", PAULIS, rho))


def density_of_bloch(b: np.ndarray) -> np.ndarray:
    return 0.5 * np.einsum("j,jpq->pq", np.asarray(b, dtype=complex), PAULIS)


def transfer_of_channel(channel) -> np.ndarray:
    """Transfer matrix of an arbitrary linear map given as a callable on 2x2 arrays."""
    T = np.empty((4, 4))
    for k in range(4):
        T[:, k] = 0.5 * bloch_of_density(channel(PAULIS[k]))
    return T
