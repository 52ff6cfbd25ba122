"""Construct a triangular HEOM that reproduces a prescribed system map.

Levels are found one at a time.  With ``A_1(t)`` the transfer matrix of the
target and ``A_{k+1} = (dA_k/dt - sum_j L_kj A_j) / omega``, the unknown
blocks ``L_k1 .. L_kk`` are fixed by requiring that the first derivatives of
``A_{k+1}`` vanish at ``t = 0``.  Each block is parametrized by the sixteen
real coordinates of a Hermitian process matrix; the linear system is solved
in the least-norm sense, i.e. with the smallest Frobenius norm of the
stacked process matrices.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from math import comb, factorial
from typing import Callable

import numpy as np
from scipy.linalg import expm

from .bloch import assemble_extended_generator, chi_of_transfer, transfer_of_chi
from .models import HeomModel

RESIDUAL_TOL = 1e-10
ZERO_TOL = 1e-10
I4 = np.eye(4)


class SynthesisError(ValueError):
    """The derivative conditions at some level have no exact solution."""


def _hermitian_basis() -> np.ndarray:
    """Orthonormal (Frobenius) basis of Hermitian 4x4 matrices."""
    out = []
    for i in range(4):
        for j in range(i, 4):
            E = np.zeros((4, 4), dtype=complex)
            if i == j:
                E[i, i] = 1.0
                out.append(E)
            else:
                E[i, j] = E[j, i] = 1 / np.sqrt(2)
                out.append(E)
                F = np.zeros((4, 4), dtype=complex)
                F[i, j], F[j, i] = 1j / np.sqrt(2), -1j / np.sqrt(2)
                out.append(F)
    return np.array(out)


_HBASIS = _hermitian_basis()
_HTRANSFER = np.array([transfer_of_chi(E) for E in _HBASIS])


def transfer_of_coefficients(c) -> np.ndarray:
    return np.tensordot(np.asarray(c, dtype=float), _HTRANSFER, axes=1)


def chi_of_coefficients(c) -> np.ndarray:
    return np.tensordot(np.asarray(c, dtype=float), _HBASIS, axes=1)


# ---------------------------------------------------------------------------
# targets


@dataclass(frozen=True)
class TargetDynamics:
    """Target system map ``A_1(t)`` with derivative access.

    ``terms`` holds ``(C, s, p)`` so that ``A_1(t) = Re sum C t^p exp(s t)``;
    a callable target uses finite differences instead.
    """

    name: str
    omega: float
    terms: tuple = ()
    func: Callable | None = field(default=None, repr=False)
    parameters: dict = field(default_factory=dict)
    timescale: float | None = None

    def transfer(self, t) -> np.ndarray:
        return self.derivative(t, 0)

    def derivative(self, t: float, order: int) -> np.ndarray:
        if self.terms:
            out = np.zeros((4, 4), dtype=complex)
            for C, s, p in self.terms:
                # d^m/dt^m t^p e^{st} = sum_i C(m,i) p!/(p-i)! t^(p-i) s^(m-i) e^{st}
                acc = 0.0
                for i in range(min(order, p) + 1):
                    acc += comb(order, i) * factorial(p) / factorial(p - i) * t ** (p - i) * s ** (order - i)
                out += C * acc * np.exp(s * t)
            return out.real
        if self.func is None:
            raise ValueError("target has neither terms nor a callable")
        return _richardson_derivative(self.func, t, order, self.characteristic_time)

    @property
    def characteristic_time(self) -> float:
        if self.timescale is not None:
            return self.timescale
        return 1.0 / abs(self.omega)


def _fd_weights(order: int, h: float, t: float, func):
    # central differences on 2 * order + 1 points, exact for polynomials up to degree 2 * order
    pts = np.arange(-order, order + 1)
    V = np.vander(pts, increasing=True).T.astype(float)
    rhs = np.zeros(len(pts))
    rhs[order] = factorial(order)
    w = np.linalg.solve(V, rhs)
    return sum(wi * np.asarray(func(t + k * h), dtype=float) for wi, k in zip(w, pts)) / h ** order


def _richardson_derivative(func, t, order, scale):
    if order == 0:
        return np.asarray(func(t), dtype=float)
    if order > 4:
        raise ValueError("finite-difference derivatives are limited to order 4")
    h = 1e-3 * scale
    d1 = _fd_weights(order, h, t, func)
    d2 = _fd_weights(order, h / 2, t, func)
    # error is O(h^2)
    return (4 * d2 - d1) / 3


def _diag_target(coh_terms, name, omega, params, timescale=None):
    """Coherences multiplied by ``f``, populations untouched: ``A_1 = diag(1, f, f, 1)``."""
    terms = [(np.diag([1, 0, 0, 1]).astype(complex), 0.0, 0)]
    for a, s, p in coh_terms:
        terms.append((a * np.diag([0, 1, 1, 0]).astype(complex), complex(s), p))
    return TargetDynamics(name=name, omega=omega, terms=tuple(terms), parameters=params, timescale=timescale)


def reviving_target(gamma: float, omega: float = 1.0) -> TargetDynamics:
    """``f(t) = exp(-gamma t) cos(omega t)``."""
    s = -gamma + 1j * omega
    return _diag_target([(1.0, s, 0)], "reviving", omega, {"gamma": gamma, "omega": omega})


def generalized_target(gamma: float, alpha: float, omega: float = 1.0) -> TargetDynamics:
    """``f(t) = exp(-gamma t) (1 + 2 alpha [cos(omega t) - 1])``."""
    s = -gamma + 1j * omega
    return _diag_target([(1 - 2 * alpha, -gamma, 0), (2 * alpha, s, 0)], "generalized", omega,
                        {"gamma": gamma, "alpha": alpha, "omega": omega})


def jc_amplitude_terms(gamma: float, zeta: float):
    """``f = exp(-zeta t/2) [cosh(a t/2) + (zeta/a) sinh(a t/2)]`` with ``a = sqrt(zeta^2 - 2 gamma zeta)``."""
    a = np.sqrt(complex(zeta ** 2 - 2 * gamma * zeta))
    if abs(a) <= 1e-8 * max(abs(zeta), 1e-300):
        return [(1.0, -zeta / 2, 0), (zeta / 2, -zeta / 2, 1)]
    return [((1 + zeta / a) / 2, (-zeta + a) / 2, 0), ((1 - zeta / a) / 2, (-zeta - a) / 2, 0)]


def jaynes_cummings_target(gamma: float, zeta: float) -> TargetDynamics:
    """Resonant two-level atom in a leaky cavity; coherences scale with ``f``, populations with ``f^2``."""
    f = jc_amplitude_terms(gamma, zeta)
    terms = [(np.diag([1, 0, 0, 0]).astype(complex), 0.0, 0)]
    pop_const = np.zeros((4, 4), dtype=complex)
    pop_const[3, 0] = -1.0
    terms.append((pop_const, 0.0, 0))
    for a, s, p in f:
        terms.append((a * np.diag([0, 1, 1, 0]).astype(complex), complex(s), p))
    for a1, s1, p1 in f:
        for a2, s2, p2 in f:
            C = np.zeros((4, 4), dtype=complex)
            C[3, 0] = C[3, 3] = a1 * a2
            terms.append((C, complex(s1 + s2), p1 + p2))
    return TargetDynamics(name="jaynes_cummings", omega=zeta, terms=tuple(terms),
                          parameters={"gamma": gamma, "zeta": zeta}, timescale=1.0 / zeta)


PRESETS = {
    "reviving": (reviving_target, 2),
    "generalized": (generalized_target, 3),
    "jaynes_cummings": (jaynes_cummings_target, 3),
}


def target_from_callable(func: Callable, omega: float, name: str = "user", timescale: float | None = None):
    """Target given as ``t -> 4x4 transfer matrix``; derivatives by Richardson-extrapolated differences."""
    return TargetDynamics(name=name, omega=omega, func=func, timescale=timescale)


# ---------------------------------------------------------------------------
# level construction


def _next_level(derivs: list, blocks: list, omega: float) -> list:
    """Derivative list of ``A_{k+1}`` from those of ``A_1 .. A_k`` and the level-``k`` blocks."""
    k = len(blocks)
    top = derivs[k - 1]
    nv = len(top) - 1
    out = []
    for v in range(nv):
        acc = top[v + 1].copy()
        for j, T in enumerate(blocks):
            acc -= T @ derivs[j][v]
        out.append(acc / omega)
    return out


def level_system(derivs: list, k: int, n_conditions: int | None = None):
    """Linear system ``M c = r`` for the level-``k`` coefficients (``16 k`` unknowns).

    Conditions: ``sum_j L_kj A_j^(v)(0) = A_k^(v+1)(0)`` for ``v = 0 .. n_conditions - 1``.
    """
    nc = k if n_conditions is None else n_conditions
    rows, rhs = [], []
    for v in range(nc):
        # vec(T A) = (I kron A^T) vec(T) for row-major flattening
        blocks = [np.einsum("ab,pbc->pac", I4, np.einsum("pab,bc->pac", _HTRANSFER, derivs[j][v])).reshape(16, 16).T
                  for j in range(k)]
        rows.append(np.hstack(blocks))
        rhs.append(derivs[k - 1][v + 1].reshape(16))
    return np.vstack(rows), np.concatenate(rhs)


def solve_generator_level(derivs: list, k: int, *, n_conditions: int | None = None, tol: float = RESIDUAL_TOL):
    """Least-norm blocks ``L_k1 .. L_kk`` (transfer matrices) and the residual of the conditions."""
    M, r = level_system(derivs, k, n_conditions)
    c, *_ = np.linalg.lstsq(M, r, rcond=None)
    resid = float(np.max(np.abs(M @ c - r), initial=0.0))
    scale = max(1.0, float(np.max(np.abs(r), initial=0.0)))
    if resid > tol * scale:
        raise SynthesisError(f"level {k}: derivative conditions inconsistent (residual {resid:.2e})")
    blocks = [transfer_of_coefficients(c[16 * j:16 * (j + 1)]) for j in range(k)]
    return blocks, resid, c


def constraint_residual(derivs: list, k: int, blocks, n_conditions: int | None = None) -> float:
    """Residual of the level-``k`` conditions for given blocks (e.g. the printed ones)."""
    nc = k if n_conditions is None else n_conditions
    worst = 0.0
    for v in range(nc):
        acc = derivs[k - 1][v + 1].copy()
        for j, T in enumerate(blocks):
            acc -= np.asarray(T) @ derivs[j][v]
        worst = max(worst, float(np.max(np.abs(acc))))
    return worst


@dataclass
class SynthesisResult:
    model: HeomModel
    depth: int
    blocks: list
    residuals: list
    terminated: bool
    coefficients: list = field(default_factory=list, repr=False)

    def chi_blocks(self) -> list:
        return [[chi_of_transfer(T) for T in row] for row in self.blocks]

    def to_json(self) -> dict:
        out = self.model.to_json()
        out["synthesis"] = {"depth": self.depth, "terminated": self.terminated,
                            "residuals": [float(r) for r in self.residuals]}
        return out

    def dumps(self) -> str:
        return json.dumps(self.to_json(), indent=2)


def _grid_vanishes(target: TargetDynamics, blocks: list, horizon: float, points: int, tol: float) -> bool:
    """``A_{n+1}(t)`` evaluated from target derivatives at ``points`` times in ``[0, horizon]``."""
    n = len(blocks)
    omega = target.omega
    for t in np.linspace(0.0, horizon, points):
        derivs = [[target.derivative(t, v) for v in range(n + 1)]]
        for k in range(1, n + 1):
            derivs.append(_next_level(derivs, blocks[k - 1], omega))
        if np.max(np.abs(derivs[n][0])) > tol:
            return False
    return True


def synthesize_heom(target: TargetDynamics, max_depth: int = 6, *, check_order: int = 6,
                    grid_points: int = 200, grid_horizon: float | None = None) -> SynthesisResult:
    """Add levels until the next auxiliary trajectory vanishes identically.

    Vanishing is decided by derivatives at ``t = 0`` up to ``check_order`` and by
    sampling ``grid_points`` times over ``grid_horizon`` (ten characteristic times).
    """
    if max_depth < 1:
        raise ValueError("max_depth must be at least 1")
    omega = target.omega
    nmax = max_depth + check_order + 2
    if target.func is not None:
        nmax = min(nmax, 4)
    derivs = [[target.derivative(0.0, v) for v in range(nmax + 1)]]
    horizon = 10 * target.characteristic_time if grid_horizon is None else grid_horizon
    blocks, residuals, coeffs = [], [], []
    terminated = False
    for k in range(1, max_depth + 1):
        if len(derivs[k - 1]) < k + 1:
            break
        level, resid, c = solve_generator_level(derivs, k)
        blocks.append(level)
        residuals.append(resid)
        coeffs.append(c)
        derivs.append(_next_level(derivs, level, omega))
        nxt = derivs[k]
        scale = max(1.0, max(np.max(np.abs(d)) for d in derivs[0][:len(nxt)]))
        zero_at_0 = all(np.max(np.abs(d)) <= ZERO_TOL * scale for d in nxt[:check_order + 1])
        if zero_at_0 and _grid_vanishes(target, blocks, horizon, grid_points, ZERO_TOL * scale):
            terminated = True
            break
    model = assemble_model(blocks, omega, name=f"synthesized_{target.name}", parameters=dict(target.parameters))
    return SynthesisResult(model=model, depth=len(blocks), blocks=blocks, residuals=residuals,
                           terminated=terminated, coefficients=coeffs)


def assemble_model(blocks: list, omega: float, name: str = "synthesized", parameters=None) -> HeomModel:
    """Triangular HEOM: ``L_{k,k+1} = omega I`` and lower blocks from ``blocks[k][j]``."""
    n = len(blocks)
    grid = [[None] * n for _ in range(n)]
    for k, row in enumerate(blocks):
        for j, T in enumerate(row):
            grid[k][j] = np.asarray(T, dtype=float)
        if k + 1 < n:
            grid[k][k + 1] = omega * I4
    L = assemble_extended_generator(grid)
    L0 = np.zeros((4 * n, 4))
    L0[:4] = I4
    return HeomModel(name=name, n_levels=n, parameters=dict(parameters or {}, omega=omega), generator=L,
                     initial_extended_map=L0, blocks=tuple(tuple(r) for r in grid), reference="omega")


def verify_synthesis(result: SynthesisResult, target: TargetDynamics, grid=None) -> float:
    """Largest deviation ``max_t |A_sys(t) - A_1(t)|`` between the synthesized HEOM and the target."""
    if grid is None:
        grid = np.linspace(0.0, 10 * target.characteristic_time, 201)
    grid = np.asarray(grid, dtype=float)
    model = result.model
    worst = 0.0
    for t in grid:
        X = expm(model.generator * t) @ model.initial_extended_map
        worst = max(worst, float(np.max(np.abs(X[:4] - target.transfer(t)))))
    return worst
