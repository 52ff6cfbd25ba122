"""Small dense semi-definite programming.

Solves

    minimize    c^T x
    subject to  F0_k + sum_i x_i F_ik  >= 0   for every block k
                A x = b

with an infeasible-start primal-dual interior-point method (HKM search
direction, Mehrotra predictor-corrector).  Equalities are eliminated through
a null-space parametrization before the iteration starts.  Every returned
point is re-checked with symmetric eigenvalue decompositions.
"""
from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import cho_factor, cho_solve, null_space

OPTIMAL = "optimal"
INFEASIBLE = "infeasible"
FAILURE = "numerical_failure"

log = logging.getLogger(__name__)


class AsymmetricMatrixError(ValueError):
    """Raised by :func:`check_psd` for matrices that are not symmetric."""


def check_psd(M, tol: float = 1e-9, sym_tol: float = 1e-12) -> tuple[bool, float]:
    """Return ``(min_eig >= -tol, min_eig)`` for a symmetric matrix."""
    M = np.asarray(M, dtype=float)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise ValueError("check_psd needs a square matrix")
    if M.size == 0:
        return True, np.inf
    asym = np.max(np.abs(M - M.T))
    if asym > sym_tol * max(1.0, np.max(np.abs(M))):
        raise AsymmetricMatrixError(f"matrix is not symmetric (deviation {asym:.2e})")
    w = float(np.linalg.eigvalsh(0.5 * (M + M.T))[0])
    return w >= -tol, w


@dataclass
class SdpProblem:
    """``min c^T x`` s.t. ``F0[k] + sum_i x_i F[k][i] >= 0`` and ``A x = b``.

    ``F[k]`` has shape ``(p, n_k, n_k)``.
    """

    c: np.ndarray
    F0: list
    F: list
    A: np.ndarray | None = None
    b: np.ndarray | None = None
    names: list = field(default_factory=list)

    def __post_init__(self):
        self.c = np.asarray(self.c, dtype=float)
        p = self.c.shape[0]
        self.F0 = [np.asarray(f, dtype=float) for f in self.F0]
        self.F = [np.asarray(f, dtype=float).reshape((p,) + np.shape(f0)) for f, f0 in zip(self.F, self.F0)]
        if len(self.F0) != len(self.F):
            raise ValueError("F0 and F need one entry per block")
        for k, (f0, f) in enumerate(zip(self.F0, self.F)):
            n = f0.shape[0]
            if f0.shape != (n, n) or f.shape != (p, n, n):
                raise ValueError(f"block {k}: inconsistent shapes {f0.shape} and {f.shape}")
            if np.max(np.abs(f0 - f0.T), initial=0) > 1e-12 * max(1, np.max(np.abs(f0), initial=0)):
                raise ValueError(f"block {k}: F0 is not symmetric")
            if np.max(np.abs(f - np.swapaxes(f, 1, 2)), initial=0) > 1e-12 * max(1, np.max(np.abs(f), initial=0)):
                raise ValueError(f"block {k}: some F_i is not symmetric")
        if self.A is None:
            self.A = np.zeros((0, p))
            self.b = np.zeros(0)
        self.A = np.asarray(self.A, dtype=float).reshape(-1, p)
        self.b = np.asarray(self.b, dtype=float).reshape(-1)
        if self.A.shape[0] != self.b.shape[0]:
            raise ValueError("A and b disagree in the number of equalities")

    @property
    def p(self) -> int:
        return self.c.shape[0]

    def lmi_blocks(self, x) -> list:
        x = np.asarray(x, dtype=float)
        return [f0 + np.tensordot(x, f, axes=1) for f0, f in zip(self.F0, self.F)]

    def to_json(self) -> dict:
        return {
            "c": self.c.tolist(),
            "blocks": [{"F0": f0.tolist(), "F": f.tolist()} for f0, f in zip(self.F0, self.F)],
            "A": self.A.tolist(),
            "b": self.b.tolist(),
            "names": list(self.names),
        }

    @classmethod
    def from_json(cls, data) -> "SdpProblem":
        if isinstance(data, str):
            data = json.loads(data)
        p = len(data["c"])
        return cls(c=np.array(data["c"]), F0=[np.array(b["F0"]) for b in data["blocks"]],
                   F=[np.array(b["F"]).reshape((p,) + np.shape(b["F0"])) for b in data["blocks"]],
                   A=np.array(data.get("A") or np.zeros((0, p))).reshape(-1, p),
                   b=np.array(data.get("b") or []), names=list(data.get("names", [])))


@dataclass
class SdpSolution:
    x: np.ndarray
    objective: float
    status: str
    min_eigs: list
    eq_residual: float
    iterations: int
    gap: float
    message: str = ""

    def to_json(self) -> dict:
        return {"x": self.x.tolist(), "objective": self.objective, "status": self.status,
                "min_eigs": [float(v) for v in self.min_eigs], "eq_residual": self.eq_residual,
                "iterations": self.iterations, "gap": self.gap, "message": self.message}


@dataclass
class SdpOptions:
    tol_gap: float = 1e-10
    tol_feas: float = 1e-10
    tol_fallback: float = 1e-6
    tol_psd: float = 1e-9
    tol_eq: float = 1e-10
    max_iter: int = 150
    step_fraction: float = 0.98
    blowup: float = 1e12


def _max_step(X, dX, chol=None) -> float:
    """Largest ``alpha <= 1`` keeping ``X + alpha dX`` positive definite."""
    L = np.linalg.cholesky(X) if chol is None else chol
    Li = np.linalg.inv(L)
    w = np.linalg.eigvalsh(Li @ dX @ Li.T)
    wmin = w[0]
    return np.inf if wmin >= 0 else -1.0 / wmin


def _eliminate(problem: SdpProblem):
    """Parametrize ``{x : A x = b}`` as ``x0 + N z``."""
    p = problem.p
    if problem.A.shape[0] == 0:
        return np.zeros(p), np.eye(p), 0.0
    A, b = problem.A, problem.b
    scale = max(1.0, np.max(np.abs(A)))
    x0, *_ = np.linalg.lstsq(A, b, rcond=None)
    resid = float(np.max(np.abs(A @ x0 - b), initial=0.0))
    N = null_space(A, rcond=1e-12 * scale)
    return x0, N, resid


def solve(problem: SdpProblem, options: SdpOptions | None = None, **overrides) -> SdpSolution:
    """Solve an :class:`SdpProblem` to the configured tolerances."""
    opt = options or SdpOptions()
    for k, v in overrides.items():
        setattr(opt, k, v)
    x0, N, eq_resid0 = _eliminate(problem)
    if eq_resid0 > max(opt.tol_eq, 1e-12) * max(1.0, np.max(np.abs(problem.b), initial=1.0)):
        return SdpSolution(x0, np.nan, INFEASIBLE, [], eq_resid0, 0, np.nan,
                           "equality constraints are inconsistent")
    m = N.shape[1]
    # dual-form data:  S = C - sum_j y_j A_j >= 0,  maximize bt^T y
    C = [f0 + np.tensordot(x0, f, axes=1) for f0, f in zip(problem.F0, problem.F)]
    Ab = [-np.tensordot(N.T, f, axes=1) for f in problem.F]  # (m, n, n) per block
    bt = -(N.T @ problem.c)
    const = float(problem.c @ x0)
    if m == 0:
        x = x0
        return _finalize(problem, x, opt, 0, 0.0, "no free variables")

    # rescale for conditioning
    normA = max(max((np.linalg.norm(a) for a in Ab), default=1.0), 1e-300)
    normC = max(max((np.linalg.norm(c) for c in C), default=0.0), 1.0)
    sA = 1.0 / normA
    Ab = [a * sA for a in Ab]
    bt_s = bt * sA
    sC = 1.0 / normC
    C = [c * sC for c in C]
    sizes = [c.shape[0] for c in C]
    ntot = sum(sizes)
    nb = max(np.linalg.norm(bt_s), 1e-300)
    sb = 1.0 / max(nb, 1.0)
    bt_s = bt_s * sb

    X = [np.eye(n) * max(1.0, np.sqrt(n)) for n in sizes]
    S = [np.eye(n) * max(1.0, np.sqrt(n)) for n in sizes]
    y = np.zeros(m)

    def Aop(blocks):
        return sum(np.einsum("jab,ab->j", a, B) for a, B in zip(Ab, blocks))

    def Aadj(v):
        return [np.tensordot(v, a, axes=1) for a in Ab]

    it = 0
    status = FAILURE
    msg = "iteration limit reached"
    gap_rel = np.inf
    best = (np.inf, y.copy())
    for it in range(1, opt.max_iter + 1):
        AtY = Aadj(y)
        Rd = [c - s - at for c, s, at in zip(C, S, AtY)]
        rp = bt_s - Aop(X)
        mu = sum(np.sum(x * s) for x, s in zip(X, S)) / ntot
        pobj = sum(np.sum(c * x) for c, x in zip(C, X))
        dobj = float(bt_s @ y)
        gap_rel = abs(pobj - dobj) / (1.0 + abs(pobj) + abs(dobj))
        pinf = np.linalg.norm(rp) / (1.0 + np.linalg.norm(bt_s))
        dinf = np.sqrt(sum(np.sum(r * r) for r in Rd)) / (1.0 + np.sqrt(sum(np.sum(c * c) for c in C)))
        log.debug("it %d gap %.2e pinf %.2e dinf %.2e mu %.2e", it, gap_rel, pinf, dinf, mu)
        score = max(gap_rel, pinf, dinf)
        if score < best[0]:
            best = (score, y.copy())
        if gap_rel < opt.tol_gap and pinf < opt.tol_feas and dinf < opt.tol_feas:
            status = OPTIMAL
            msg = "converged"
            break
        if mu < 1e-15 * (1.0 + abs(pobj)) or (it > 10 and score > 1e3 * best[0]):
            break
        xnorm = max(np.max(np.abs(x)) for x in X)
        ynorm = np.max(np.abs(y), initial=0.0)
        if xnorm > opt.blowup:
            status = INFEASIBLE
            msg = "primal iterates diverge: the LMI appears infeasible"
            break
        if ynorm > opt.blowup:
            status = FAILURE
            msg = "dual iterates diverge: the objective appears unbounded"
            break
        try:
            Sinv = [np.linalg.inv(s) for s in S]
            # Schur complement M_ij = <A_i, X A_j S^-1>
            XAS = [np.einsum("ab,jbc,cd->jad", x, a, si, optimize=True) for x, a, si in zip(X, Ab, Sinv)]
            M = sum(np.einsum("iab,jba->ij", a, xas, optimize=True) for a, xas in zip(Ab, XAS))
            M = 0.5 * (M + M.T)
            reg = 1e-14 * max(1.0, np.max(np.abs(np.diag(M))))
            try:
                fac = cho_factor(M + reg * np.eye(m))
                msolve = lambda rhs: cho_solve(fac, rhs)  # noqa: E731
            except np.linalg.LinAlgError:
                pinvM = np.linalg.pinv(M)
                msolve = lambda rhs: pinvM @ rhs  # noqa: E731
            XRdS = [x @ r @ si for x, r, si in zip(X, Rd, Sinv)]

            def direction(sigma, corr=None):
                rhs = bt_s - sigma * mu * Aop(Sinv) + Aop(XRdS)
                if corr is not None:
                    rhs = rhs + Aop(corr)
                dy = msolve(rhs)
                dS = [r - a for r, a in zip(Rd, Aadj(dy))]
                dX = []
                for k, (x, si, ds) in enumerate(zip(X, Sinv, dS)):
                    d = sigma * mu * si - x - x @ ds @ si
                    if corr is not None:
                        d = d - corr[k]
                    dX.append(0.5 * (d + d.T))
                return dX, dy, dS

            cx = [np.linalg.cholesky(x) for x in X]
            cs = [np.linalg.cholesky(s) for s in S]
            dXa, dya, dSa = direction(0.0)
            ap = min([1.0] + [_max_step(x, d, c) for x, d, c in zip(X, dXa, cx)])
            ad = min([1.0] + [_max_step(s, d, c) for s, d, c in zip(S, dSa, cs)])
            mu_aff = sum(np.sum((x + ap * dx) * (s + ad * ds))
                         for x, dx, s, ds in zip(X, dXa, S, dSa)) / ntot
            sigma = min(1.0, max(0.0, (mu_aff / mu) ** 3)) if mu > 0 else 0.0
            corr = [dx @ ds @ si for dx, ds, si in zip(dXa, dSa, Sinv)]
            dX, dy, dS = direction(sigma, corr)
            ap = min([1.0] + [opt.step_fraction * _max_step(x, d, c) for x, d, c in zip(X, dX, cx)])
            ad = min([1.0] + [opt.step_fraction * _max_step(s, d, c) for s, d, c in zip(S, dS, cs)])
        except np.linalg.LinAlgError as exc:
            status = FAILURE
            msg = f"linear algebra failure: {exc}"
            break
        X = [x + ap * d for x, d in zip(X, dX)]
        X = [0.5 * (x + x.T) for x in X]
        y = y + ad * dy
        S = [s + ad * d for s, d in zip(S, dS)]
        S = [0.5 * (s + s.T) for s in S]
        if max(ap, ad) < 1e-12:
            status = FAILURE
            msg = "step length collapsed"
            break
    if status != OPTIMAL and status != INFEASIBLE and best[0] < opt.tol_fallback:
        status = OPTIMAL
        msg = f"converged to reduced accuracy {best[0]:.1e}"
        y = best[1]
        gap_rel = best[0]
    # S = sC C - sum_j y_j sA A_j, so x-space multipliers are y sA / sC
    z = y * sA / sC
    x = x0 + N @ z
    sol = _finalize(problem, x, opt, it, gap_rel, msg)
    if status != OPTIMAL:
        sol.status = status
    return sol


def _finalize(problem: SdpProblem, x, opt: SdpOptions, iterations: int, gap: float, msg: str) -> SdpSolution:
    blocks = problem.lmi_blocks(x)
    mins = []
    ok = True
    for B in blocks:
        scale = max(1.0, np.max(np.abs(B), initial=0.0))
        good, w = check_psd(0.5 * (B + B.T), opt.tol_psd * scale)
        mins.append(w)
        ok &= good
    eq = float(np.max(np.abs(problem.A @ x - problem.b), initial=0.0))
    ok &= eq <= opt.tol_eq * max(1.0, np.max(np.abs(problem.b), initial=1.0))
    status = OPTIMAL if ok else FAILURE
    if not ok:
        msg = msg + "; re-verification failed"
    return SdpSolution(x=x, objective=float(problem.c @ x), status=status, min_eigs=mins,
                       eq_residual=eq, iterations=iterations, gap=float(gap), message=msg)


def dumps(problem: SdpProblem) -> str:
    return json.dumps(problem.to_json())


def loads(text: str) -> SdpProblem:
    return SdpProblem.from_json(json.loads(text))
