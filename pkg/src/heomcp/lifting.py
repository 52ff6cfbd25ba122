"""Quadratic-form fitting and the polynomial lift to linear Xi coordinates.

A positivity target ``P(lambda) > 0`` that is not quadratic in ``lambda`` is
handled through ``Xi = [+-(P - c), m_1, ..., m_K]`` where the ``m_k`` are the
monomials reachable from the support of ``P`` under ``d lambda/dt = l lambda``.
Since monomials of a fixed degree close among themselves under a linear flow,
``Xi`` obeys a linear equation ``dXi/dt = Lt Xi``, and
``G = c^2 - Xi_1^2 = 2 c P - P^2`` is quadratic in ``Xi``.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from math import comb

import numpy as np
from scipy.linalg import expm

from .models import ReducedSystem
from .polynomial import Polynomial, monomial_flow_derivative, monomial_values

FIT_TOL = 1e-9


class NotQuadraticError(ValueError):
    """The target is not a quadratic form on the reachable set; use :func:`lift_polynomial`."""


class NoAsymptoteError(ValueError):
    """The reduced dynamics has no finite limit, so ``c`` cannot be chosen automatically."""


@dataclass(frozen=True)
class QuadraticForm:
    """``value(lambda) = lambda0^T s lambda0 - lambda^T s lambda`` (times ``cofactor`` if set)."""

    s: np.ndarray
    lambda0: np.ndarray
    residual: float = 0.0
    cofactor: Polynomial | None = None

    def value(self, lam) -> np.ndarray:
        lam = np.asarray(lam, dtype=float)
        return self.lambda0 @ self.s @ self.lambda0 - np.einsum("...i,ij,...j->...", lam, self.s, lam)


def _sample_points(reduced: ReducedSystem, n: int, rng: np.random.Generator) -> np.ndarray:
    ev = np.linalg.eigvals(reduced.l)
    rates = -ev.real[ev.real < -1e-12]
    horizon = 10.0 / rates.min() if rates.size else 10.0
    n_traj = n // 2
    ts = np.linspace(0.0, horizon, n_traj)
    step = expm(reduced.l * (ts[1] - ts[0])) if n_traj > 1 else np.eye(reduced.d)
    traj = []
    lam = reduced.lambda0.astype(float)
    for _ in ts:
        traj.append(lam)
        lam = step @ lam
    scale = max(1.0, np.max(np.abs(reduced.lambda0)))
    rand = reduced.lambda0 + scale * rng.standard_normal((n - n_traj, reduced.d))
    return np.vstack([np.array(traj), rand])


def fit_quadratic_form(reduced: ReducedSystem, target: Polynomial, *, tol: float = FIT_TOL,
                       seed: int = 0, use_cofactor: bool | None = None) -> QuadraticForm:
    """Fit ``target(lambda) = lambda0^T s lambda0 - lambda^T s lambda`` by least squares.

    When the target is not quadratic but the reduced system carries a strictly
    positive cofactor (a conserved combination, e.g. ``1 + lambda1^2`` for the
    Jaynes-Cummings model), the fit is attempted on ``target / cofactor``.

    Raises
    ------
    NotQuadraticError
        If the fit residual exceeds ``tol`` (relative to the target scale).
    """
    d = reduced.d
    rng = np.random.default_rng(seed)
    pts = _sample_points(reduced, max(10 * d * d, 40), rng)
    y = np.real(target.evaluate(pts))
    cof = None
    if use_cofactor or (use_cofactor is None and target.degree > 2 and reduced.positive_cofactor is not None):
        cof = reduced.positive_cofactor
        if cof is None:
            raise NotQuadraticError("no positive cofactor available for this system")
        y = y / np.real(cof.evaluate(pts))
    iu = np.triu_indices(d)
    lam0 = reduced.lambda0
    feats = []
    for i, j in zip(*iu):
        w = 1.0 if i == j else 2.0
        feats.append(w * (lam0[i] * lam0[j] - pts[:, i] * pts[:, j]))
    A = np.array(feats).T
    coef, *_ = np.linalg.lstsq(A, y, rcond=None)
    resid = float(np.max(np.abs(A @ coef - y)) / max(1.0, np.max(np.abs(y))))
    if resid > tol:
        raise NotQuadraticError(f"target is not quadratic on the reachable set (residual {resid:.2e}); "
                                "use lift_polynomial")
    s = np.zeros((d, d))
    s[iu] = coef
    s = s + np.triu(s, 1).T
    s[np.abs(s) < 1e-13 * max(1.0, np.max(np.abs(s)))] = 0.0
    return QuadraticForm(s=s, lambda0=lam0.copy(), residual=resid, cofactor=cof)


@dataclass(frozen=True)
class LiftedSystem:
    """Linear system for ``Xi = [sign (P - c), monomials...]``."""

    basis: tuple
    L: np.ndarray
    c: float
    sign: int
    P: Polynomial
    xi0: np.ndarray
    reduced: ReducedSystem | None = field(default=None, repr=False)

    @property
    def D(self) -> int:
        return self.L.shape[0]

    @property
    def S(self) -> np.ndarray:
        S = np.zeros((self.D, self.D))
        S[0, 0] = 1.0
        return S

    def xi(self, lam) -> np.ndarray:
        """Lifted coordinates for ``lam`` of shape ``(d,)`` or ``(..., d)``."""
        lam = np.asarray(lam, dtype=float)
        first = self.sign * (np.real(self.P.evaluate(lam)) - self.c)
        cols = [first] + [monomial_values(lam, e) for e in self.basis]
        return np.stack(cols, axis=-1)

    def to_json(self) -> dict:
        return {
            "basis": [list(e) for e in self.basis],
            "L": self.L.tolist(),
            "c": self.c,
            "sign": "upper" if self.sign > 0 else "lower",
            "xi0": self.xi0.tolist(),
            "P": self.P.to_json(),
        }

    def dumps(self) -> str:
        return json.dumps(self.to_json(), indent=2)


def asymptote(l: np.ndarray, lambda0: np.ndarray, tol: float = 1e-10) -> np.ndarray:
    """``lim_{t->oo} exp(l t) lambda0`` from the spectral projection onto the kernel of ``l``."""
    ev, V = np.linalg.eig(l)
    scale = max(1.0, np.max(np.abs(ev)))
    W = np.linalg.inv(V)
    coeff = W @ lambda0
    keep = np.abs(coeff) > 1e-13 * max(1.0, np.max(np.abs(coeff)))
    if np.any(ev.real[keep] > tol * scale):
        raise NoAsymptoteError("no finite asymptote: l has eigenvalues with positive real part")
    neutral = keep & (np.abs(ev.real) <= tol * scale)
    if np.any(np.abs(ev[neutral].imag) > tol * scale):
        raise NoAsymptoteError("no finite asymptote: undamped oscillating modes are excited")
    zero = neutral & (np.abs(ev) <= tol * scale)
    lim = V[:, zero] @ coeff[zero]
    if np.max(np.abs(lim.imag), initial=0.0) > 1e-9:
        raise NoAsymptoteError("spectral projection is not real")
    return lim.real


def monomial_closure(P: Polynomial, l: np.ndarray) -> list:
    """Monomials reachable from the non-constant support of ``P`` under the flow."""
    start = [e for e in P.monomials(include_constant=False)]
    seen = set(start)
    queue = list(start)
    while queue:
        e = queue.pop()
        for e2 in monomial_flow_derivative(e, l):
            if e2 not in seen and sum(e2) > 0:
                seen.add(e2)
                queue.append(e2)
    return sorted(seen, key=lambda e: (sum(e), tuple(-x for x in e)))


def lift_polynomial(reduced: ReducedSystem, P: Polynomial, sign: str = "upper", c="auto") -> LiftedSystem:
    """Lift ``P`` into linear coordinates ``Xi`` with ``Xi_1 = +-(P - c)``.

    Parameters
    ----------
    sign : {"upper", "lower"}
        ``"upper"`` gives ``Xi_1 = P - c``, ``"lower"`` gives ``Xi_1 = c - P``.
    c : float or "auto"
        ``"auto"`` takes ``lim_{t->oo} P(lambda(t))``.
    """
    if sign not in ("upper", "lower"):
        raise ValueError("sign must be 'upper' or 'lower'")
    P = P.real() if P._is_complex() else P
    l = np.asarray(reduced.l, dtype=float)
    if isinstance(c, str):
        if c != "auto":
            raise ValueError("c must be a number or 'auto'")
        c = float(np.real(P.evaluate(asymptote(l, reduced.lambda0))))
    c = float(c)
    if c <= 0:
        raise ValueError(f"the lift needs c > 0, got {c:.6g}")
    basis = monomial_closure(P, l)
    index = {e: k + 1 for k, e in enumerate(basis)}
    D = len(basis) + 1
    Lt = np.zeros((D, D))
    sgn = 1 if sign == "upper" else -1
    for e in basis:
        for e2, w in monomial_flow_derivative(e, l).items():
            Lt[index[e], index[e2]] += w
    for e, coeff in P.terms.items():
        if sum(e) == 0:
            continue
        Lt[0] += sgn * coeff * Lt[index[e]]
    first = sgn * (float(np.real(P.evaluate(reduced.lambda0))) - c)
    xi0 = np.array([first] + [float(monomial_values(reduced.lambda0, e)) for e in basis])
    return LiftedSystem(basis=tuple(basis), L=Lt, c=c, sign=sgn, P=P, xi0=xi0, reduced=reduced)


def max_basis_size(d: int, m: int) -> int:
    return comb(d + m, m)


def eval_G(lifted: LiftedSystem, xi) -> np.ndarray:
    """``G = c^2 - xi_1^2``; positive values imply ``0 < P < 2c``."""
    xi = np.asarray(xi, dtype=float)
    if xi.shape[-1] != lifted.D:
        raise ValueError(f"xi must have {lifted.D} components")
    return lifted.c ** 2 - xi[..., 0] ** 2
