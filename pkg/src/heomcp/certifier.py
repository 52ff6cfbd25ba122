"""Monotone-based certificates of complete positivity.

A certificate is a symmetric ``R`` with

* monotonicity: ``Q = L^T R + R L <= 0``,
* normalization at an anchor ``a``: ``a^T (R - S) a = 0``,
* dominance: ``R - S >= 0``,

so that ``a^T S a - x(t)^T S x(t) >= a^T R a - x(t)^T R x(t) >= 0`` for all
later times.  ``R`` is found by the semi-definite program ``min v`` subject
to ``v I - Q >= 0`` and ``R - S >= 0``; the returned matrix is always
re-checked with eigenvalue computations independent of the solver.

Directions that every feasible certificate must annihilate (neutral modes of
``L`` and, when the first derivative of ``G`` vanishes, the anchor itself)
are imposed as linear equalities, which keeps the programme strictly
feasible on the remaining subspace.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from math import comb, factorial
from typing import Callable, Mapping

import numpy as np
from scipy.linalg import block_diag, expm, null_space, orth

from . import sdp
from .lifting import LiftedSystem, NoAsymptoteError, NotQuadraticError, fit_quadratic_form, lift_polynomial
from .models import (HeomModel, ReducedSystem, default_horizon, eh_factorization, eh_polynomial,
                     reduced_system)
from .polynomial import Polynomial, monomial_flow_derivative, monomial_values
from .propagator import detect_tp, nontrivial_min_eig, propagate
from .bloch import chi_of_transfer

TOL_V = 1e-9
TOL_PSD = 1e-9
TOL_EQ = 1e-10

CERTIFIED = "certified"
UNCERTIFIED = "uncertified"
AFTER_TP = "certified_after_tp"
FLOOR = "floor_certified"
FLOOR_UNPROVEN = "uncertified"


class NotAvailableError(ValueError):
    """No printed closed-form certificate exists for this model."""


class KernelConstraintError(ValueError):
    """Kernel constraints need a rank-one ``S``; use the general ``R - S >= 0`` constraint."""


@dataclass
class CertifierConfig:
    tol_v: float = TOL_V
    tol_psd: float = TOL_PSD
    tol_eq: float = TOL_EQ
    use_kernel: bool = True
    facial: bool = True
    gate_order: int = 12
    tp_eps: float = 1e-8
    max_iter: int = 200
    neutral_tol: float = 1e-9
    floor_basis_degree: int | None = None
    floor_max_basis: int = 60

    def to_json(self) -> dict:
        return dict(self.__dict__)


@dataclass
class Certificate:
    R: np.ndarray
    v_m: float
    status: str
    anchor: np.ndarray
    margins: dict
    S: np.ndarray | None = None
    L: np.ndarray | None = None
    mode: str = "from_zero"
    label: str = ""
    delta_min: float | None = None
    omega: np.ndarray | None = None
    parts: tuple = ()
    conditions: dict = field(default_factory=dict)
    diagnostics: dict = field(default_factory=dict)

    @property
    def certified(self) -> bool:
        return self.status in (CERTIFIED, AFTER_TP, FLOOR)

    def to_json(self) -> dict:
        def arr(a):
            return None if a is None else np.asarray(a).tolist()

        return {
            "label": self.label,
            "status": self.status,
            "mode": self.mode,
            "v_m": _num(self.v_m),
            "R": arr(self.R),
            "S": arr(self.S),
            "anchor": arr(self.anchor),
            "margins": {k: _num(v) for k, v in self.margins.items()},
            "delta_min": self.delta_min,
            "omega": arr(self.omega),
            "conditions": self.conditions,
            "diagnostics": _jsonable(self.diagnostics),
            "parts": [p.to_json() for p in self.parts],
        }

    def dumps(self) -> str:
        return json.dumps(self.to_json(), indent=2)


def _num(x):
    if x is None:
        return None
    x = float(x)
    return x if np.isfinite(x) else str(x)


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (np.floating, float)):
        return _num(obj)
    if isinstance(obj, (np.integer, np.bool_)):
        return obj.item()
    return obj


# ---------------------------------------------------------------------------
# linear algebra helpers


def _sym_basis(n: int) -> np.ndarray:
    iu = np.triu_indices(n)
    E = np.zeros((len(iu[0]), n, n))
    k = np.arange(len(iu[0]))
    E[k, iu[0], iu[1]] = 1.0
    E[k, iu[1], iu[0]] = 1.0
    return E


def _lyap(L: np.ndarray, E: np.ndarray) -> np.ndarray:
    """``L^T E_k + E_k L`` for a stack of symmetric ``E_k``."""
    LE = np.einsum("ij,kjl->kil", L.T, E)
    return LE + np.swapaxes(LE, 1, 2)


def _min_eig(M: np.ndarray) -> float:
    if M.size == 0:
        return np.inf
    return float(np.linalg.eigvalsh(0.5 * (M + M.T))[0])


def _max_eig(M: np.ndarray) -> float:
    if M.size == 0:
        return -np.inf
    return float(np.linalg.eigvalsh(0.5 * (M + M.T))[-1])


def neutral_subspace(L: np.ndarray, tol: float = 1e-9) -> np.ndarray:
    """Orthonormal real basis of the invariant subspace of modes with ``|Re| <= tol * |L|``."""
    L = np.asarray(L, dtype=float)
    n = L.shape[0]
    if n == 0:
        return np.zeros((0, 0))
    scale = max(np.linalg.norm(L, 2), 1e-300)
    ev, V = np.linalg.eig(L)
    sel = np.abs(ev.real) <= tol * scale
    if not np.any(sel):
        return np.zeros((n, 0))
    W = np.hstack([V[:, sel].real, V[:, sel].imag])
    return orth(W, rcond=1e-10)


def taylor_coefficients(L: np.ndarray, x0: np.ndarray, M: np.ndarray, order: int) -> np.ndarray:
    """Coefficients ``c_k`` of ``x(t)^T M x(t) = sum_k c_k t^k`` for ``dx/dt = L x``."""
    u = [np.asarray(x0, dtype=float)]
    for _ in range(order):
        u.append(L @ u[-1])
    out = np.zeros(order + 1)
    for k in range(order + 1):
        out[k] = sum(comb(k, i) * (u[i] @ M @ u[k - i]) for i in range(k + 1)) / factorial(k)
    return out


def _leading(coeffs: np.ndarray, L, x0, M, rtol=1e-10):
    """Index and value of the leading non-negligible coefficient (``k >= 1``)."""
    nL = max(np.linalg.norm(L, 2), 1e-300)
    base = max(np.linalg.norm(M, 2), 1e-300) * max(float(x0 @ x0), 1e-300)
    for k in range(1, len(coeffs)):
        if abs(coeffs[k]) > rtol * base * nL ** k / factorial(k):
            return k, float(coeffs[k])
    return None, 0.0


def short_time_gate(L, S, x0, order: int = 12) -> dict:
    """Sign of the leading Taylor coefficient of ``G(t) = x0^T S x0 - x(t)^T S x(t)``."""
    c = -taylor_coefficients(L, x0, S, order)
    k, val = _leading(c, L, x0, S)
    return {"passed": bool(k is not None and val > 0), "order": k, "coefficient": val}


def strict_decrease(L, R, x0, order: int = 12) -> dict:
    """``x(t)^T R x(t)`` is not constant: its leading Taylor coefficient is negative."""
    c = taylor_coefficients(L, x0, R, order)
    k, val = _leading(c, L, x0, R)
    return {"passed": bool(k is not None and val < 0), "order": k, "coefficient": val}


# ---------------------------------------------------------------------------
# kernel constraints


def kernel_constraints(S: np.ndarray, anchor: np.ndarray, tol: float = 1e-12):
    """Linear constraints equivalent to ``R - S >= 0`` given ``R >= 0`` for rank-one ``S``.

    Returns ``(K, norm)`` where the constraints are ``anchor^T R K[:, i] = 0``
    for every column of ``K`` (a basis of ``ker S``) and
    ``anchor^T R anchor = norm`` with ``norm = anchor^T S anchor``.

    Proof sketch: write any vector as ``a * anchor + k`` with ``S k = 0``; then
    ``x^T R x = a^2 anchor^T R anchor + k^T R k >= a^2 anchor^T S anchor = x^T S x``.
    """
    S = np.asarray(S, dtype=float)
    anchor = np.asarray(anchor, dtype=float)
    w = np.linalg.eigvalsh(0.5 * (S + S.T))
    scale = max(np.max(np.abs(w)), 1e-300)
    rank = int(np.sum(np.abs(w) > 1e-10 * scale))
    if rank != 1:
        raise KernelConstraintError(f"S has rank {rank}; use the general constraint R - S >= 0")
    norm = float(anchor @ S @ anchor)
    if abs(norm) <= tol * scale * max(anchor @ anchor, 1e-300):
        raise KernelConstraintError("the anchor lies in the kernel of S")
    K = null_space(S, rcond=1e-10)
    return K, norm


def kernel_parametrization(S: np.ndarray, anchor: np.ndarray):
    """Affine parametrization ``R = R0 + sum_i t_i B_i`` of the kernel-constraint set."""
    n = S.shape[0]
    K, norm = kernel_constraints(S, anchor)
    E = _sym_basis(n)
    A = np.vstack([np.einsum("i,kij,jm->km", anchor, E, K).T, np.einsum("i,kij,j->k", anchor, E, anchor)[None]])
    b = np.concatenate([np.zeros(K.shape[1]), [norm]])
    r0, *_ = np.linalg.lstsq(A, b, rcond=None)
    N = null_space(A)
    return np.tensordot(r0, E, axes=1), np.einsum("km,kij->mij", N, E)


# ---------------------------------------------------------------------------
# verification


def verify(L, S, anchor, R, tol_psd: float = 1e-8) -> dict:
    """Solver-independent margins of a candidate ``R``."""
    L = np.asarray(L, dtype=float)
    R = 0.5 * (np.asarray(R, dtype=float) + np.asarray(R, dtype=float).T)
    Q = L.T @ R + R @ L
    nR = max(np.linalg.norm(R, 2), 1e-300)
    nL = max(np.linalg.norm(L, 2), 1e-300)
    nQ = max(np.linalg.norm(Q, 2), 1e-300)
    a = np.asarray(anchor, dtype=float)
    qmax = _max_eig(Q)
    dom = _min_eig(R - S)
    normres = float(a @ (R - S) @ a)
    out = {
        "v_m": qmax / (nL * nR),
        "monotonicity": -qmax,
        "dominance": dom,
        "normalization": normres,
        "psd_R": _min_eig(R),
    }
    out["ok"] = bool(qmax <= tol_psd * nQ + 1e-300 or qmax <= tol_psd * nL * nR) and \
        dom >= -tol_psd * nR and abs(normres) <= tol_psd * max(1.0, nR) * max(1.0, a @ a)
    return out


# ---------------------------------------------------------------------------
# the Lyapunov SDP


def _forced_directions(L, S, anchor, tol):
    """Directions ``w`` with ``Q w = 0`` for every admissible certificate with ``v <= 0``."""
    W = neutral_subspace(L, tol)
    g1 = float(anchor @ (L.T @ S + S @ L) @ anchor)
    scale = max(np.linalg.norm(L, 2) * np.linalg.norm(S, 2) * (anchor @ anchor), 1e-300)
    if abs(g1) <= 1e-10 * scale:
        W = np.hstack([W, (anchor / np.linalg.norm(anchor))[:, None]])
    if W.shape[1]:
        W = orth(W, rcond=1e-10)
    return W


def solve_lyapunov_sdp(L, S, anchor, config: CertifierConfig | None = None, *, kernel: bool | None = None):
    """``min v`` s.t. ``v I - Q >= 0``, dominance and normalization at ``anchor``.

    Returns ``(R, v_sdp, solution, info)`` with ``v`` in units of ``|L|``
    (``inf`` when the solver detects infeasibility).
    """
    cfg = config or CertifierConfig()
    L = np.asarray(L, dtype=float)
    S = 0.5 * (np.asarray(S, dtype=float) + np.asarray(S, dtype=float).T)
    n = L.shape[0]
    a = np.asarray(anchor, dtype=float)
    an = a / np.linalg.norm(a)
    nL = max(np.linalg.norm(L, 2), 1e-300)
    Ls = L / nL
    E = _sym_basis(n)
    m = E.shape[0]
    QE = _lyap(Ls, E)
    W = _forced_directions(Ls, S, an, cfg.neutral_tol) if cfg.facial else np.zeros((n, 0))
    Bp = null_space(W.T) if W.shape[1] else np.eye(n)
    info = {"forced_directions": int(W.shape[1])}

    F0, F = [], []
    # v I - Bp^T Q Bp >= 0
    k = Bp.shape[1]
    if k:
        F0.append(np.zeros((k, k)))
        F.append(np.concatenate([np.eye(k)[None], -np.einsum("ia,kij,jb->kab", Bp, QE, Bp)]))
    # v >= -1 keeps the programme bounded
    F0.append(np.ones((1, 1)))
    F.append(np.concatenate([np.ones((1, 1, 1)), np.zeros((m, 1, 1))]))
    rows, rhs = [], []
    for w in W.T:
        QW = np.einsum("kij,j->ki", QE, w)
        rows.extend(np.concatenate([np.zeros((n, 1)), QW.T], axis=1))
        rhs.extend(np.zeros(n))
    use_kernel = cfg.use_kernel if kernel is None else kernel
    mode = "general"
    if use_kernel:
        try:
            K, norm = kernel_constraints(S, an)
            mode = "kernel"
        except KernelConstraintError:
            mode = "general"
    norm = float(an @ S @ an)
    rows.append(np.concatenate([[0.0], np.einsum("i,kij,j->k", an, E, an)]))
    rhs.append(norm)
    if mode == "kernel":
        for kv in K.T:
            rows.append(np.concatenate([[0.0], np.einsum("i,kij,j->k", an, E, kv)]))
            rhs.append(0.0)
        F0.append(np.zeros((n, n)))
        F.append(np.concatenate([np.zeros((1, n, n)), E]))
    else:
        # (R - S) an = 0 and R - S >= 0 on the complement of an
        ERa = np.einsum("kij,j->ki", E, an)
        Sa = S @ an
        for i in range(n):
            rows.append(np.concatenate([[0.0], ERa[:, i]]))
            rhs.append(Sa[i])
        Ba = null_space(an[None])
        if Ba.shape[1]:
            F0.append(-Ba.T @ S @ Ba)
            F.append(np.concatenate([np.zeros((1, Ba.shape[1], Ba.shape[1])),
                                     np.einsum("ia,kij,jb->kab", Ba, E, Ba)]))
    info["dominance"] = mode
    A = np.array(rows)
    b = np.array(rhs)
    c = np.zeros(1 + m)
    c[0] = 1.0
    prob = sdp.SdpProblem(c=c, F0=F0, F=F, A=A, b=b)
    sol = sdp.solve(prob, max_iter=cfg.max_iter)
    R = np.tensordot(sol.x[1:], E, axes=1)
    info["sdp_status"] = sol.status
    info["sdp_message"] = sol.message
    info["sdp_iterations"] = sol.iterations
    v = np.inf if sol.status == sdp.INFEASIBLE else float(sol.x[0])
    return R, v, sol, info


def _system_data(system):
    if isinstance(system, LiftedSystem):
        return system.L, system.S, system.xi0
    if isinstance(system, ReducedSystem):
        S = system.s_forms[0] if system.s_forms else None
        return system.l, S, system.lambda0
    raise TypeError("certify expects a ReducedSystem or a LiftedSystem")


def certify(system, S=None, anchor=None, mode: str = "from_zero", config: CertifierConfig | None = None,
            *, label: str = "", tp_state=None) -> Certificate:
    """Certify ``x0^T S x0 - x(t)^T S x(t) > 0`` for a reduced or lifted system.

    Parameters
    ----------
    mode : {"from_zero", "from_tp"}
        ``"from_zero"`` normalizes at the initial state and requires the
        short-time gate; ``"from_tp"`` normalizes at ``anchor`` (the state at
        ``t_p``) and requires ``G(t_p) > 0``.
    tp_state : array, optional
        Reduced state at ``t_p``; when given, the non-trivial eigenvalues of
        chi there must exceed ``config.tp_eps``.
    """
    cfg = config or CertifierConfig()
    if mode not in ("from_zero", "from_tp"):
        raise ValueError("mode must be 'from_zero' or 'from_tp'")
    L, S0, x0 = _system_data(system)
    S = S0 if S is None else np.asarray(S, dtype=float)
    if S is None:
        raise ValueError("no quadratic form S available for this system")
    if anchor is None:
        if mode == "from_tp":
            raise ValueError("mode 'from_tp' needs an explicit anchor")
        anchor = x0
    anchor = np.asarray(anchor, dtype=float)
    diag = {}
    if mode == "from_zero":
        gate = short_time_gate(L, S, x0, cfg.gate_order)
    else:
        G_tp = float(x0 @ S @ x0 - anchor @ S @ anchor)
        scale = max(abs(float(x0 @ S @ x0)), 1e-300)
        ok = G_tp > cfg.tp_eps * scale
        gate = {"passed": bool(ok), "G_tp": G_tp}
        if tp_state is not None and isinstance(system, (ReducedSystem, LiftedSystem)):
            red = system if isinstance(system, ReducedSystem) else system.reduced
            if red is not None:
                w = np.linalg.eigvalsh(red.chi(np.asarray(tp_state, dtype=float)))
                mn = float(nontrivial_min_eig(w, red.h))
                gate["chi_min_eig"] = mn
                gate["passed"] = bool(gate["passed"] and mn >= cfg.tp_eps)
    diag["gate"] = gate
    R, v_sdp, sol, info = solve_lyapunov_sdp(L, S, anchor, cfg)
    diag.update(info)
    diag["v_sdp"] = v_sdp
    ver = verify(L, S, anchor, R, tol_psd=1e-8)
    ok = ver["v_m"] <= cfg.tol_v and ver["dominance"] >= -cfg.tol_psd * max(1.0, np.linalg.norm(R, 2)) \
        and abs(ver["normalization"]) <= max(cfg.tol_eq, 1e-8) * max(1.0, np.linalg.norm(R, 2)) * max(1.0, anchor @ anchor)
    if mode == "from_zero":
        sd = strict_decrease(L, R, x0, cfg.gate_order)
        diag["strict_decrease"] = sd
        ok = ok and sd["passed"]
    ok = ok and gate["passed"] and bool(np.all(np.isfinite(R)))
    status = (CERTIFIED if mode == "from_zero" else AFTER_TP) if ok else UNCERTIFIED
    margins = {k: ver[k] for k in ("monotonicity", "dominance", "normalization")}
    return Certificate(R=R, v_m=ver["v_m"], status=status, anchor=anchor, margins=margins, S=S, L=np.asarray(L),
                       mode=mode, label=label, diagnostics=diag)


def certificate_from_matrix(system, R, S=None, anchor=None, *, label="analytic",
                            config: CertifierConfig | None = None) -> Certificate:
    """Verify a given ``R`` (e.g. a closed form) with the same checks as :func:`certify`."""
    cfg = config or CertifierConfig()
    L, S0, x0 = _system_data(system)
    S = S0 if S is None else np.asarray(S, dtype=float)
    anchor = x0 if anchor is None else np.asarray(anchor, dtype=float)
    R = np.asarray(R, dtype=float)
    gate = short_time_gate(L, S, x0, cfg.gate_order)
    ver = verify(L, S, anchor, R, tol_psd=1e-8)
    sd = strict_decrease(L, R, x0, cfg.gate_order)
    ok = ver["v_m"] <= cfg.tol_v and ver["dominance"] >= -cfg.tol_psd * max(1.0, np.linalg.norm(R, 2)) \
        and abs(ver["normalization"]) <= 1e-8 * max(1.0, np.linalg.norm(R, 2)) * max(1.0, anchor @ anchor) \
        and gate["passed"] and sd["passed"]
    margins = {k: ver[k] for k in ("monotonicity", "dominance", "normalization")}
    return Certificate(R=R, v_m=ver["v_m"], status=CERTIFIED if ok else UNCERTIFIED, anchor=anchor, margins=margins,
                       S=S, L=np.asarray(L), label=label, diagnostics={"gate": gate, "strict_decrease": sd})


def combine(parts, status_ok: str, *, label: str = "", mode: str = "from_zero", **extra) -> Certificate:
    parts = tuple(parts)
    ok = bool(parts) and all(p.certified for p in parts)
    R = block_diag(*[p.R for p in parts]) if parts else np.zeros((0, 0))
    S = block_diag(*[p.S for p in parts]) if parts and all(p.S is not None for p in parts) else None
    anchor = np.concatenate([p.anchor for p in parts]) if parts else np.zeros(0)
    margins = {}
    for key in ("monotonicity", "dominance", "normalization", "initial"):
        vals = [p.margins[key] for p in parts if key in p.margins]
        if vals:
            margins[key] = min(vals) if key != "normalization" else max(vals, key=abs)
    v_m = max((p.v_m for p in parts), default=np.inf)
    return Certificate(R=R, v_m=v_m, status=status_ok if ok else UNCERTIFIED, anchor=anchor, margins=margins, S=S,
                       mode=mode, label=label, parts=parts, **extra)


def _gram_layout(l, P: Polynomial, degree: int, d: int):
    basis = _all_monomials(d, degree)
    n = len(basis)
    idx = {e: i for i, e in enumerate(basis)}
    LM = np.zeros((n, n))
    for e in basis:
        for e2, w in monomial_flow_derivative(e, l).items():
            LM[idx[e], idx[e2]] += w
    full = [(0,) * d] + basis
    N = n + 1
    iu = np.triu_indices(N)
    prods: dict = {}
    for k, (a, b) in enumerate(zip(*iu)):
        e = tuple(x + y for x, y in zip(full[a], full[b]))
        prods.setdefault(e, []).append((k, 1.0 if a == b else 2.0))
    missing = set(P.terms) - set(prods)
    if missing:
        raise ValueError("basis degree too small for the polynomial")
    return basis, LM, prods


def _xi_hat(lam, basis):
    lam = np.asarray(lam, dtype=float)
    return np.concatenate([[1.0], [float(monomial_values(lam, e)) for e in basis]])


def gram_certify(reduced: ReducedSystem, P: Polynomial, anchor_lambda=None, mode: str = "from_zero",
                 config: CertifierConfig | None = None, *, label: str = "") -> Certificate:
    """Certify ``P(lambda(t)) > 0`` with a quadratic form in ``Xi = (1, monomials)``.

    Unknowns are ``R = diag(r00, R')`` and a Gram matrix ``G`` with
    ``Xi^T G Xi == P``; with ``S = -G`` the three certificate conditions read
    ``L^T R + R L <= 0``, ``R - S >= 0`` and ``(R - S) Xi_a = 0`` at the anchor.
    Then ``P(t) >= Xi_a^T R Xi_a - Xi(t)^T R Xi(t)``, which is positive after
    the anchor when the monotone strictly decreases (from zero) or when
    ``P`` is positive at the anchor (from ``t_p``).  Directions forced into
    the kernels are imposed as equalities and the common slack of both matrix
    inequalities is maximized.
    """
    cfg = config or CertifierConfig()
    P = P.real() if P._is_complex() else P
    d = reduced.d
    degree = cfg.floor_basis_degree or max(2, -(-P.degree // 2))
    basis, LM, prods = _gram_layout(reduced.l, P, degree, d)
    n = len(basis)
    N = n + 1
    if n > cfg.floor_max_basis:
        return _failed(label, f"monomial basis of size {n} exceeds floor_max_basis={cfg.floor_max_basis}", mode)
    lam_a = reduced.lambda0 if anchor_lambda is None else np.asarray(anchor_lambda, dtype=float)
    xa = _xi_hat(lam_a, basis)
    nL = max(np.linalg.norm(LM, 2), 1e-300)
    ER, EG = _sym_basis(n), _sym_basis(N)
    mR, mG = ER.shape[0], EG.shape[0]
    p = 2 + mR + mG
    oR, oG = 2, 2 + mR
    QE = _lyap(LM / nL, ER)
    rows, rhs = [], []
    for e in set(prods):
        row = np.zeros(p)
        for k, w in prods[e]:
            row[oG + k] = w
        rows.append(row)
        rhs.append(float(np.real(P.coefficient(e))))
    # (R_hat + G) xa = 0
    Ehat = np.zeros((p, N, N))
    Ehat[1, 0, 0] = 1.0
    Ehat[oR:oG, 1:, 1:] = ER
    Ehat[oG:] = EG
    M = np.einsum("kij,j->ik", Ehat, xa)
    rows.extend(M)
    rhs.extend(np.zeros(N))
    # forced kernel of Q': neutral modes, and the anchor when dP/dt vanishes there
    W = neutral_subspace(LM, cfg.neutral_tol)
    dP = float(np.real(P.gradient(lam_a) @ (reduced.l @ lam_a)))
    scale = max(1.0, P.max_abs_coefficient()) * max(1.0, np.linalg.norm(reduced.l, 2)) * max(1.0, xa @ xa)
    forced_anchor = abs(dP) <= 1e-10 * scale
    if forced_anchor:
        W = np.hstack([W, (xa[1:] / max(np.linalg.norm(xa[1:]), 1e-300))[:, None]])
    if W.shape[1]:
        W = orth(W, rcond=1e-10)
    for w in W.T:
        QW = np.einsum("kij,j->ki", QE, w)
        for i in range(n):
            row = np.zeros(p)
            row[oR:oG] = QW[:, i]
            rows.append(row)
            rhs.append(0.0)
    B1 = null_space(xa[None])
    B2 = null_space(W.T) if W.shape[1] else np.eye(n)
    F0, F = [], []
    blk = np.einsum("ia,kij,jb->kab", B1, Ehat, B1)
    blk[0] = -np.eye(B1.shape[1])
    F0.append(np.zeros((B1.shape[1], B1.shape[1])))
    F.append(blk)
    if B2.shape[1]:
        blk = np.zeros((p, B2.shape[1], B2.shape[1]))
        blk[0] = -np.eye(B2.shape[1])
        blk[oR:oG] = -np.einsum("ia,kij,jb->kab", B2, QE, B2)
        F0.append(np.zeros((B2.shape[1], B2.shape[1])))
        F.append(blk)
    F0.append(np.ones((1, 1)))
    blk = np.zeros((p, 1, 1))
    blk[0, 0, 0] = -1.0
    F.append(blk)
    c = np.zeros(p)
    c[0] = -1.0
    sol = sdp.solve(sdp.SdpProblem(c=c, F0=F0, F=F, A=np.array(rows), b=np.array(rhs)), max_iter=cfg.max_iter)
    R = np.zeros((N, N))
    R[0, 0] = sol.x[1]
    R[1:, 1:] = np.tensordot(sol.x[oR:oG], ER, axes=1)
    G = np.tensordot(sol.x[oG:], EG, axes=1)
    S = -G
    Lhat = np.zeros((N, N))
    Lhat[1:, 1:] = LM
    ver = verify(Lhat, S, xa, R, tol_psd=1e-8)
    diag = {"sdp_status": sol.status, "slack": float(sol.x[0]), "basis_size": n, "forced_directions": int(W.shape[1]),
            "method": "gram"}
    nR = max(1.0, np.linalg.norm(R, 2))
    ok = bool(np.all(np.isfinite(R))) and ver["v_m"] <= cfg.tol_v and ver["dominance"] >= -cfg.tol_psd * nR \
        and abs(ver["normalization"]) <= 1e-8 * nR * max(1.0, xa @ xa)
    gram_res = _gram_residual(G, basis, P, d)
    diag["gram_residual"] = gram_res
    ok = ok and gram_res <= 1e-8 * max(1.0, P.max_abs_coefficient())
    if mode == "from_zero":
        sd = strict_decrease(Lhat, R, xa, cfg.gate_order)
        diag["strict_decrease"] = sd
        ok = ok and sd["passed"]
        status = CERTIFIED
    else:
        Pa = float(np.real(P.evaluate(lam_a)))
        diag["P_at_anchor"] = Pa
        ok = ok and Pa > cfg.tp_eps * max(1.0, P.max_abs_coefficient())
        status = AFTER_TP
    margins = {k: ver[k] for k in ("monotonicity", "dominance", "normalization")}
    return Certificate(R=R, v_m=ver["v_m"], status=status if ok else UNCERTIFIED, anchor=xa, margins=margins, S=S,
                       L=Lhat, mode=mode, label=label, diagnostics=diag)


def _gram_residual(G, basis, P: Polynomial, d: int) -> float:
    """Largest coefficient mismatch of ``Xi^T G Xi - P``."""
    full = [(0,) * d] + list(basis)
    acc: dict = {}
    for a, ea in enumerate(full):
        for b, eb in enumerate(full):
            e = tuple(x + y for x, y in zip(ea, eb))
            acc[e] = acc.get(e, 0.0) + G[a, b]
    for e, v in P.terms.items():
        acc[e] = acc.get(e, 0.0) - float(np.real(v))
    return max((abs(v) for v in acc.values()), default=0.0)


# ---------------------------------------------------------------------------
# model-level workflows


def certification_targets(model: HeomModel, reduced: ReducedSystem | None = None) -> list:
    """``(label, system, S, P)`` tuples whose joint positivity implies ``e_h(chi(t)) > 0``.

    Quadratic targets carry the reduced system and ``S``.  Polynomial targets
    carry the squared lift (or the exception raised when it does not exist)
    and the polynomial ``P`` itself.
    """
    red = reduced or reduced_system(model)
    name = model.name
    if name in ("jaynes_cummings", "reviving_2level", "reviving_3level"):
        return [("e_h", red, red.s_forms[0], None)]
    if name == "bath":
        P2 = red.factorization.factors[1]
        return [("P1", red, red.s_forms[0], None), ("P2", _safe_lift(red, P2), None, P2)]
    if name == "spin_boson":
        P1, P2 = red.factorization.factors
        return [("P1", _safe_lift(red, P1), None, P1), ("P2", _safe_lift(red, P2), None, P2)]
    try:
        q = fit_quadratic_form(red, red.eh_poly)
        return [("e_h", red, q.s, None)]
    except NotQuadraticError:
        return [("e_h", _safe_lift(red, red.eh_poly), None, red.eh_poly)]


def _safe_lift(red, P):
    try:
        return lift_polynomial(red, P, sign="upper", c="auto")
    except (NoAsymptoteError, ValueError) as exc:
        return exc


def _failed(label, exc, mode="from_zero") -> Certificate:
    return Certificate(R=np.zeros((0, 0)), v_m=np.inf, status=UNCERTIFIED, anchor=np.zeros(0), margins={},
                       mode=mode, label=label, diagnostics={"error": str(exc)})


def _certify_target(red, label, system, S, P, mode, cfg, lam_a):
    """Squared lift first; the Gram form in ``(1, monomials)`` when it fails."""
    if P is None:
        anchor = None if mode == "from_zero" else lam_a
        return certify(system, S, anchor=anchor, mode=mode, config=cfg, label=label,
                       tp_state=None if mode == "from_zero" else lam_a)
    tried = {}
    if isinstance(system, LiftedSystem):
        anchor = None if mode == "from_zero" else system.xi(lam_a)
        first = certify(system, None, anchor=anchor, mode=mode, config=cfg, label=label,
                        tp_state=None if mode == "from_zero" else lam_a)
        first.diagnostics["method"] = "squared_lift"
        if first.certified:
            return first
        tried["squared_lift"] = first.status
    else:
        tried["squared_lift"] = str(system)
    try:
        cert = gram_certify(red, P, anchor_lambda=lam_a, mode=mode, config=cfg, label=label)
    except ValueError as exc:
        cert = _failed(label, exc, mode)
    cert.diagnostics["fallback_from"] = tried
    if mode == "from_tp":
        w = np.linalg.eigvalsh(red.chi(lam_a))
        mn = float(nontrivial_min_eig(w, red.h))
        cert.diagnostics["chi_min_eig"] = mn
        if mn < cfg.tp_eps:
            cert.status = UNCERTIFIED
    return cert


def certify_model(model: HeomModel, config: CertifierConfig | None = None) -> Certificate:
    """Certify complete positivity for all ``t >= 0`` (normalization at ``Lambda(0)``)."""
    cfg = config or CertifierConfig()
    red = reduced_system(model)
    parts = []
    for label, system, S, P in certification_targets(model, red):
        if isinstance(system, Exception) and P is None:
            parts.append(_failed(label, system))
            continue
        parts.append(_certify_target(red, label, system, S, P, "from_zero", cfg, red.lambda0))
    return combine(parts, CERTIFIED, label=model.name)


def certify_after_tp(model: HeomModel, t_p: float | None = None, config: CertifierConfig | None = None,
                     *, t_end: float | None = None, dt: float | None = None) -> Certificate:
    """Certify complete positivity for ``t >= t_p`` (normalization at ``Lambda(t_p)``)."""
    cfg = config or CertifierConfig()
    red = reduced_system(model)
    diag = {}
    if t_p is None:
        traj = propagate(red, t_end, dt)
        t_p = detect_tp(traj, cfg.tp_eps)
        diag["t_p_detected"] = t_p
    if t_p is None:
        return Certificate(R=np.zeros((0, 0)), v_m=np.inf, status=UNCERTIFIED, anchor=np.zeros(0), margins={},
                           mode="from_tp", label=model.name, diagnostics={"error": "no t_p found", **diag})
    lam_p = expm(red.l * t_p) @ red.lambda0
    parts = []
    for label, system, S, P in certification_targets(model, red):
        if isinstance(system, Exception) and P is None:
            parts.append(_failed(label, system, "from_tp"))
            continue
        parts.append(_certify_target(red, label, system, S, P, "from_tp", cfg, lam_p))
    cert = combine(parts, AFTER_TP, label=model.name, mode="from_tp")
    cert.diagnostics.update(diag)
    cert.diagnostics["t_p"] = float(t_p)
    return cert


# ---------------------------------------------------------------------------
# eigenvalue floor


def _all_monomials(d: int, degree: int) -> list:
    out = []
    for k in range(1, degree + 1):
        for combo in _combinations_with_replacement(range(d), k):
            e = [0] * d
            for i in combo:
                e[i] += 1
            out.append(tuple(e))
    return out


def _combinations_with_replacement(it, k):
    from itertools import combinations_with_replacement
    return combinations_with_replacement(it, k)


def _floor_programme(l, lam0, P: Polynomial, degree: int, cfg: CertifierConfig, margin_target=None):
    """SDP data for one factor in coordinates ``Xi = (1, monomials of degree <= degree)``.

    Variables: ``r00``, ``R'`` (monomial block) and the Gram matrix ``G`` with
    ``Xi^T G Xi == P`` identically.  With ``S = -G`` the chain
    ``P(Xi(t)) >= -Xi(t)^T R Xi(t) >= -Xi(0)^T R Xi(0)`` holds whenever
    ``R - S >= 0`` and ``Q <= 0``.
    """
    d = len(lam0)
    basis = _all_monomials(d, degree)
    n = len(basis)
    idx = {e: i for i, e in enumerate(basis)}
    LM = np.zeros((n, n))
    for e in basis:
        for e2, w in monomial_flow_derivative(e, l).items():
            LM[idx[e], idx[e2]] += w
    full = [(0,) * d] + basis
    N = n + 1
    nL = max(np.linalg.norm(LM, 2), 1e-300)
    ER = _sym_basis(n)
    EG = _sym_basis(N)
    mR, mG = ER.shape[0], EG.shape[0]
    # variable layout: [t, r00, R' (mR), G (mG)]
    p = 2 + mR + mG
    oR, oG = 2, 2 + mR
    # Gram matching
    iu = np.triu_indices(N)
    prods: dict = {}
    for k, (a, b) in enumerate(zip(*iu)):
        e = tuple(x + y for x, y in zip(full[a], full[b]))
        prods.setdefault(e, []).append((k, 1.0 if a == b else 2.0))
    rows, rhs = [], []
    for e in set(prods) | set(P.terms):
        if e not in prods:
            raise ValueError("basis degree too small for the factor")
        row = np.zeros(p)
        for k, w in prods[e]:
            row[oG + k] = w
        rows.append(row)
        rhs.append(float(np.real(P.coefficient(e))))
    W = neutral_subspace(LM, cfg.neutral_tol)
    QE = _lyap(LM / nL, ER)
    for w in W.T:
        QW = np.einsum("kij,j->ki", QE, w)
        for i in range(n):
            row = np.zeros(p)
            row[oR:oG] = QW[:, i]
            rows.append(row)
            rhs.append(0.0)
    Bp = null_space(W.T) if W.shape[1] else np.eye(n)
    m0 = np.array([float(monomial_values(np.asarray(lam0, dtype=float), e)) for e in basis])
    xi0 = np.concatenate([[1.0], m0])
    F0, F = [], []
    # R_hat + G - t I >= 0
    blk = np.zeros((p, N, N))
    blk[0] = -np.eye(N)
    blk[1, 0, 0] = 1.0
    blk[oR:oG, 1:, 1:] = ER
    blk[oG:] = EG
    F0.append(np.zeros((N, N)))
    F.append(blk)
    # -Bp^T Q Bp - t I >= 0
    k = Bp.shape[1]
    if k:
        blk = np.zeros((p, k, k))
        blk[0] = -np.eye(k)
        blk[oR:oG] = -np.einsum("ia,kij,jb->kab", Bp, QE, Bp)
        F0.append(np.zeros((k, k)))
        F.append(blk)
    obj = np.zeros(p)
    obj[1] = 1.0
    obj[oR:oG] = np.einsum("i,kij,j->k", m0, ER, m0)
    c = np.zeros(p)
    if margin_target is None:
        # phase 1: t fixed to zero, minimize Xi0^T R Xi0
        row = np.zeros(p)
        row[0] = 1.0
        rows.append(row)
        rhs.append(0.0)
        c = obj
    else:
        # phase 2: keep Xi0^T R Xi0 <= target, maximize the slack t <= 1
        F0.append(np.array([[margin_target]]))
        blk = np.zeros((p, 1, 1))
        blk[:, 0, 0] = -obj
        F.append(blk)
        F0.append(np.ones((1, 1)))
        blk = np.zeros((p, 1, 1))
        blk[0, 0, 0] = -1.0
        F.append(blk)
        c[0] = -1.0
    prob = sdp.SdpProblem(c=c, F0=F0, F=F, A=np.array(rows), b=np.array(rhs))

    def unpack(x):
        R = np.zeros((N, N))
        R[0, 0] = x[1]
        R[1:, 1:] = np.tensordot(x[oR:oG], ER, axes=1)
        G = np.tensordot(x[oG:], EG, axes=1)
        return R, G

    Lhat = np.zeros((N, N))
    Lhat[1:, 1:] = LM
    return prob, unpack, xi0, Lhat, basis


def floor_factor(reduced: ReducedSystem, P: Polynomial, config: CertifierConfig | None = None, *,
                 label: str = "", max_iter: int | None = None) -> Certificate:
    """Prove ``P(lambda(t)) > 0`` for all ``t >= 0`` with a quadratic monotone in monomial coordinates."""
    cfg = config or CertifierConfig()
    P = P.real() if P._is_complex() else P
    degree = cfg.floor_basis_degree or max(2, -(-P.degree // 2))
    n = comb(reduced.d + degree, degree) - 1
    if n > cfg.floor_max_basis:
        return _failed(label, f"monomial basis of size {n} exceeds floor_max_basis={cfg.floor_max_basis}")
    iters = max_iter or cfg.max_iter
    prob, unpack, xi0, Lhat, basis = _floor_programme(reduced.l, reduced.lambda0, P, degree, cfg)
    sol = sdp.solve(prob, max_iter=iters)
    diag = {"phase1_status": sol.status, "phase1_objective": sol.objective, "basis_size": n,
            "P_at_0": float(np.real(P.evaluate(reduced.lambda0)))}
    scale = max(1.0, P.max_abs_coefficient())
    if sol.status != sdp.OPTIMAL or not sol.objective < -cfg.tol_v * scale:
        R, G = unpack(sol.x)
        return _floor_cert(R, G, xi0, Lhat, UNCERTIFIED, label, diag)
    prob2, unpack2, *_ = _floor_programme(reduced.l, reduced.lambda0, P, degree, cfg,
                                          margin_target=0.5 * sol.objective)
    sol2 = sdp.solve(prob2, max_iter=iters)
    diag["phase2_status"] = sol2.status
    diag["slack"] = float(sol2.x[0])
    R, G = unpack2(sol2.x) if sol2.status == sdp.OPTIMAL else unpack(sol.x)
    cert = _floor_cert(R, G, xi0, Lhat, FLOOR, label, diag)
    return cert


def _floor_cert(R, G, xi0, Lhat, status, label, diag) -> Certificate:
    S = -G
    Q = Lhat.T @ R + R @ Lhat
    nR = max(np.linalg.norm(R, 2), 1e-300)
    w, V = np.linalg.eigh(R - S)
    omega = V[:, 0]
    init = -float(xi0 @ R @ xi0)
    # the constant coordinate has a trivially zero row in Q
    margins = {"monotonicity": -_max_eig(Q[1:, 1:]), "dominance": float(w[0]), "normalization": float(omega @ (R - S) @ omega),
               "initial": init}
    v_m = _max_eig(Q) / (max(np.linalg.norm(Lhat, 2), 1e-300) * nR)
    ok = status == FLOOR and margins["monotonicity"] >= 0 and margins["dominance"] >= 0 and init > 0
    return Certificate(R=R, v_m=v_m, status=FLOOR if ok else UNCERTIFIED, anchor=xi0, margins=margins, S=S, L=Lhat,
                       mode="floor", label=label, omega=omega, diagnostics=diag)


def bound_eigenvalue_floor(model: HeomModel, delta_min: float, omega_search: Mapping | None = None,
                           config: CertifierConfig | None = None) -> Certificate:
    """Prove that every eigenvalue of chi(t) stays above ``-delta_min`` for all ``t >= 0``.

    ``omega_search`` accepts ``basis_degree`` (monomial degree of the
    coordinates), ``max_basis`` and ``max_iter`` (default 200).
    """
    if not delta_min > 0:
        raise ValueError("delta_min must be positive")
    cfg = config or CertifierConfig()
    opts = dict(omega_search or {})
    if "basis_degree" in opts:
        cfg.floor_basis_degree = opts["basis_degree"]
    if "max_basis" in opts:
        cfg.floor_max_basis = opts["max_basis"]
    max_iter = int(opts.get("max_iter", 200))
    base = certify_model(model, cfg)
    if base.certified:
        cert = Certificate(R=base.R, v_m=base.v_m, status=FLOOR, anchor=base.anchor, margins=base.margins, S=base.S,
                           mode="floor", label=model.name, delta_min=delta_min, parts=base.parts,
                           diagnostics={"trivial": "completely positive from t = 0"})
        return cert
    red = reduced_system(model)
    if model.name == "spin_boson":
        factors = list(eh_factorization(model, delta_min).factors)
    else:
        factors = [eh_polynomial(red.transfer_poly, 4, delta_min)]
    parts = [floor_factor(red, P, cfg, label=f"P'{k + 1}", max_iter=max_iter) for k, P in enumerate(factors)]
    cert = combine(parts, FLOOR, label=model.name, mode="floor", delta_min=delta_min)
    cert.omega = np.concatenate([p.omega for p in parts if p.omega is not None]) if parts else None
    return cert


# ---------------------------------------------------------------------------
# closed-form certificates


@dataclass(frozen=True)
class ParameterCondition:
    name: str
    predicate: Callable[[Mapping], bool]
    provenance: str

    def __call__(self, params: Mapping) -> bool:
        return bool(self.predicate(params))


def three_level_region(alpha_tilde: float, beta_tilde: float) -> str | None:
    """Which closed-form region contains ``(alpha_tilde, beta_tilde)``: ``"a"``, ``"b"`` or ``None``."""
    if -0.5 <= alpha_tilde < 0 and -2 * alpha_tilde - 1 <= beta_tilde:
        return "a"
    if alpha_tilde > 0 and -1 <= beta_tilde:
        return "b"
    return None


def analytic_certificate(model: HeomModel):
    """Printed parameter conditions and the closed-form ``R`` (``None`` where undefined)."""
    p = model.parameters
    name = model.name
    if name == "jaynes_cummings":
        conds = [
            ParameterCondition("gamma >= 0", lambda q: q["gamma"] >= 0, "damped Jaynes-Cummings example"),
            ParameterCondition("zeta >= 0", lambda q: q["zeta"] >= 0, "damped Jaynes-Cummings example"),
            ParameterCondition("gamma * zeta > 0 (short-time gate)", lambda q: q["gamma"] * q["zeta"] > 0,
                               "damped Jaynes-Cummings example, first non-vanishing time step"),
        ]
        R = None if p["gamma"] == 0 else np.diag([1.0, 2 * p["zeta"] / p["gamma"]]) / 4
        return conds, R
    if name == "reviving_2level":
        g1, g2, a, w = p["gamma1"], p["gamma2"], p["alpha"], p["omega"]
        if model.options.get("init") == "modified":
            eta = 2 * a * w ** 2 + g1 * g2
            conds = [
                ParameterCondition("gamma1 + gamma2 >= 0", lambda q: q["gamma1"] + q["gamma2"] >= 0,
                                   "two-level reviving coherences, modified initial condition"),
                ParameterCondition("2 alpha omega^2 + gamma1 gamma2 > 0",
                                   lambda q: 2 * q["alpha"] * q["omega"] ** 2 + q["gamma1"] * q["gamma2"] > 0,
                                   "two-level reviving coherences, modified initial condition"),
            ]
            R = None if eta == 0 else np.array([[g1 ** 2 + eta, -w * g1], [-w * g1, w ** 2]]) / (4 * eta)
            return conds, R
        conds = [
            ParameterCondition("gamma1 >= 0", lambda q: q["gamma1"] >= 0, "two-level reviving coherences"),
            ParameterCondition("gamma2 >= 0", lambda q: q["gamma2"] >= 0, "two-level reviving coherences"),
            ParameterCondition("2 alpha omega^2 + gamma1 gamma2 >= 0",
                               lambda q: 2 * q["alpha"] * q["omega"] ** 2 + q["gamma1"] * q["gamma2"] >= 0,
                               "two-level reviving coherences (printed without omega^2; see documentation)"),
            ParameterCondition("short-time positivity",
                               lambda q: q["gamma1"] > 0 or (q["gamma1"] == 0 and q["omega"] > 0 and q["alpha"] > 0),
                               "two-level reviving coherences, strict positivity for short times"),
        ]
        R = None
        if a != 0:
            r22 = (a * w ** 2 + g1 * g2) / (2 * a ** 2 * w ** 2)
            R = np.diag([1.0, r22]) / 4
        return conds, R
    if name == "reviving_3level":
        g = p["gamma1"]
        if not (p["gamma1"] == p["gamma2"] == p["gamma3"]):
            raise NotAvailableError("the closed form assumes a common damping rate")
        w = p["omega"]
        at, bt = p["alpha"] * w ** 2 / g ** 2, p["beta"] * w ** 2 / g ** 2
        conds = [ParameterCondition(
            "(-1/2 <= at < 0 and -2 at - 1 <= bt) or (at > 0 and -1 <= bt)",
            lambda q: three_level_region(q["alpha"] * q["omega"] ** 2 / q["gamma1"] ** 2,
                                         q["beta"] * q["omega"] ** 2 / q["gamma1"] ** 2) is not None,
            "three-level reviving coherences, scaled parameters")]
        R = None
        if at != 0 and bt != 0:
            rt = np.diag([1.0, 1 / abs(2 * at), 1 / abs(2 * at * bt)]) / 4
            D = np.diag([1.0, w / g, (w / g) ** 2])
            R = D @ rt @ D
        return conds, R
    if name == "bath":
        gp, w, xi = p["gamma_p"], p["omega"], p["xi"]
        conds = [ParameterCondition("-2 gamma_p^2 <= omega xi", lambda q: -2 * q["gamma_p"] ** 2 <= q["omega"] * q["xi"],
                                    "finite-temperature bath, first factor")]
        R = None
        if xi != 0:
            R = np.zeros((4, 4))
            R[0, 0] = gp ** 2
            R[1, 1] = gp ** 2 * (xi * w + 4 * gp ** 2) / (2 * xi ** 2)
        return conds, R
    raise NotAvailableError(f"no closed-form certificate for model {name!r}")


def evaluate_conditions(conds, params) -> dict:
    return {c.name: bool(c(params)) for c in conds}


def certify_analytic(model: HeomModel, config: CertifierConfig | None = None) -> Certificate:
    """Check the closed-form ``R`` with the generic verifier (first target only for the bath)."""
    conds, R = analytic_certificate(model)
    evaluated = evaluate_conditions(conds, model.parameters)
    red = reduced_system(model)
    label, system, S, _ = certification_targets(model, red)[0]
    if R is None:
        cert = _failed(label, "closed form undefined at these parameters")
    else:
        cert = certificate_from_matrix(system, R, S, label=f"analytic {label}", config=config)
    cert.conditions = evaluated
    return cert


# ---------------------------------------------------------------------------
# propagation oracle and sweep classification


def violation_witness(model: HeomModel, horizon: float | None = None, samples: int = 2000,
                      tol: float = 1e-8) -> dict:
    """Direct propagation: most negative eigenvalue of chi over the horizon."""
    t_end = default_horizon(model) if horizon is None else horizon
    traj = propagate(model, t_end, t_end / samples)
    k = int(np.argmin(traj.min_eig))
    return {"min_eig": float(traj.min_eig[k]), "t": float(traj.times[k]), "violating": bool(traj.min_eig[k] < -tol)}


def classify(model: HeomModel, config: CertifierConfig | None = None, *, horizon=None) -> dict:
    """Label ``analytic``, ``numeric``, ``violating`` or ``undecided`` for one parameter point."""
    out = {}
    label = None
    try:
        ac = certify_analytic(model, config)
        out["analytic"] = ac.certified
        if ac.certified:
            label = "analytic"
    except NotAvailableError:
        out["analytic"] = None
    nc = certify_model(model, config)
    out["numeric"] = nc.certified
    out["v_m"] = nc.v_m
    wit = violation_witness(model, horizon)
    out["min_eig"] = wit["min_eig"]
    out["violating"] = wit["violating"]
    if label is None:
        label = "numeric" if nc.certified else ("violating" if wit["violating"] else "undecided")
    out["label"] = label
    return out
