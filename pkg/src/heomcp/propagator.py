"""Time evolution of extended maps, chi trajectories and short-time analysis."""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field

import mpmath as mp
import numpy as np
from scipy.linalg import expm

from .bloch import chi_of_transfer, elementary_symmetric
from .models import HeomModel, ReducedSystem, default_horizon

TP_EPS = 1e-8
TP_CONSECUTIVE = 10


@dataclass(frozen=True)
class Trajectory:
    """Sampled evolution: reduced vector, system transfer matrix, chi and its spectrum."""

    times: np.ndarray
    lam: np.ndarray | None
    transfer: np.ndarray
    chi: np.ndarray
    eigs: np.ndarray
    esym: np.ndarray
    h: int
    source: object = field(default=None, repr=False)

    def __len__(self):
        return len(self.times)

    @property
    def min_eig(self) -> np.ndarray:
        return self.eigs[:, 0]

    def nontrivial_min(self) -> np.ndarray:
        """Smallest eigenvalue among the ``h - 1`` non-trivial ones (``-inf`` if ``h < 2``)."""
        return nontrivial_min_eig(self.eigs, self.h)

    def to_csv(self, path=None) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        d = 0 if self.lam is None else self.lam.shape[1]
        w.writerow(["t"] + [f"lambda{i + 1}" for i in range(d)] + [f"eig{i + 1}" for i in range(4)]
                   + [f"e{i + 1}" for i in range(4)])
        for k, t in enumerate(self.times):
            row = [t] + ([] if self.lam is None else list(self.lam[k])) + list(self.eigs[k]) + list(self.esym[k])
            w.writerow([repr(float(x)) for x in row])
        text = buf.getvalue()
        if path is not None:
            with open(path, "w") as fh:
                fh.write(text)
        return text


def nontrivial_min_eig(eigs: np.ndarray, h: int) -> np.ndarray:
    """``eigs`` sorted ascending on the last axis; drops the largest (trivial) one."""
    eigs = np.asarray(eigs)
    if h < 2:
        return np.full(eigs.shape[:-1], -np.inf)
    return eigs[..., 4 - h]


def _spectra(T: np.ndarray):
    chi = chi_of_transfer(T)
    eigs = np.linalg.eigvalsh(chi)
    esym = np.stack([elementary_symmetric(chi, k) for k in range(1, 5)], axis=-1)
    return chi, eigs, esym


def _transfer_at(source, t: float) -> np.ndarray:
    if isinstance(source, ReducedSystem):
        return source.transfer(expm(source.l * t) @ source.lambda0)
    return source.system_map(t)


def propagate(system, t_end: float | None = None, dt: float | None = None) -> Trajectory:
    """Propagate a :class:`ReducedSystem` or a :class:`HeomModel` on a uniform grid.

    Each step applies the matrix exponential of the generator over ``dt``.
    Defaults follow the scan horizon ``20 / slowest decay rate`` with 2000 steps.
    """
    if isinstance(system, HeomModel):
        model = system
        gen = model.generator
    elif isinstance(system, ReducedSystem):
        model = system.model
        gen = system.l
    else:
        raise TypeError("propagate expects a ReducedSystem or a HeomModel")
    if not np.all(np.isfinite(gen)):
        raise ValueError("generator has non-finite entries")
    if t_end is None:
        t_end = default_horizon(model) if model is not None else 20.0
    if t_end < 0:
        raise ValueError("t_end must be non-negative")
    if dt is None:
        dt = t_end / 2000 if t_end > 0 else 1.0
    if dt <= 0:
        raise ValueError("dt must be positive")
    n = int(np.floor(t_end / dt + 1e-9)) + 1
    times = dt * np.arange(n)
    step = expm(gen * dt)
    if isinstance(system, ReducedSystem):
        lam = np.empty((n, system.d))
        x = system.lambda0.astype(float).copy()
        for k in range(n):
            lam[k] = x
            x = step @ x
        T = system.transfer(lam)
        h = system.h
    else:
        X = model.initial_extended_map.copy()
        T = np.empty((n, 4, 4))
        for k in range(n):
            T[k] = X[:4]
            X = step @ X
        lam = None
        h = None
    chi, eigs, esym = _spectra(T)
    if h is None:
        scale = np.maximum(1.0, np.max(np.abs(eigs), axis=1))
        h = int(np.max(np.sum(np.abs(eigs) > 1e-10 * scale[:, None], axis=1)))
    return Trajectory(times=times, lam=lam, transfer=T, chi=chi, eigs=eigs, esym=esym, h=h, source=system)


_AXES = {"x": 1, "y": 2, "z": 3}


def bloch_series(trajectory: Trajectory, r0=(1.0, 0.0, 0.0)) -> np.ndarray:
    """Bloch vectors ``r(t)`` of the system state for the initial Bloch vector ``r0``."""
    v = np.concatenate([[1.0], np.asarray(r0, dtype=float)])
    return np.real(trajectory.transfer @ v)[:, 1:]


def coherence_series(trajectory: Trajectory, axis: str = "x", r0=(1.0, 0.0, 0.0)) -> np.ndarray:
    """``tr(sigma_axis rho(t))``; the default initial state is ``|+><+|``."""
    return bloch_series(trajectory, r0)[:, _AXES[axis] - 1]


def coherence_csv(curves: dict, times: np.ndarray, path=None) -> str:
    """CSV with a ``t`` column and one column per named curve."""
    names = list(curves)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["t"] + names)
    for k, t in enumerate(times):
        w.writerow([repr(float(t))] + [repr(float(curves[n][k])) for n in names])
    text = buf.getvalue()
    if path is not None:
        with open(path, "w") as fh:
            fh.write(text)
    return text


def detect_tp(trajectory: Trajectory, eps_pos: float = TP_EPS, consecutive: int = TP_CONSECUTIVE,
              refine: bool = True) -> float | None:
    """First time after which the non-trivial eigenvalues of chi stay above ``eps_pos``.

    The grid time is the start of the first run of ``consecutive`` passing samples;
    it is refined by bisection against the preceding failing sample to ``dt / 100``.
    Returns ``None`` when no such run exists (including chi of rank one).
    """
    if trajectory.h < 2:
        return None
    ok = trajectory.nontrivial_min() >= eps_pos
    n = len(ok)
    run = 0
    start = None
    for k in range(n):
        run = run + 1 if ok[k] else 0
        if run >= consecutive:
            start = k - consecutive + 1
            break
    if start is None:
        return None
    t_hi = float(trajectory.times[start])
    if start == 0 or not refine or trajectory.source is None:
        return t_hi
    t_lo = float(trajectory.times[start - 1])
    dt = trajectory.times[1] - trajectory.times[0]
    src = trajectory.source
    while t_hi - t_lo > dt / 100:
        mid = 0.5 * (t_lo + t_hi)
        w = np.linalg.eigvalsh(chi_of_transfer(_transfer_at(src, mid)))
        if nontrivial_min_eig(w, trajectory.h) >= eps_pos:
            t_hi = mid
        else:
            t_lo = mid
    return t_hi


# ---------------------------------------------------------------------------
# short-time analysis


@dataclass(frozen=True)
class Branch:
    """Leading behaviour ``coefficient * t**power`` of one eigenvalue of chi near ``t = 0``."""

    power: int | None
    coefficient: float
    classification: str  # "positive", "negative", "zero" or "inconclusive"


@dataclass(frozen=True)
class ShortTimeAnalysis:
    branches: tuple

    @property
    def nontrivial(self) -> tuple:
        return tuple(b for b in self.branches if b.classification != "zero")

    @property
    def positive(self) -> bool:
        nt = self.nontrivial
        return bool(nt) and all(b.classification == "positive" for b in nt)

    @property
    def conclusive(self) -> bool:
        return all(b.classification != "inconclusive" for b in self.branches)


def _mp_series_chi(model: HeomModel, t, terms: int):
    """chi(t) at multiprecision ``t`` from the Taylor series of ``exp(L t) Lambda(0)``."""
    L = mp.matrix(model.generator.tolist())
    term = mp.matrix(model.initial_extended_map.tolist())
    T = term[:4, :]
    for k in range(1, terms):
        term = (L * term) * (t / k)
        T += term[:4, :]
    M = _mp_t_to_chi()
    vecT = [T[i, j] for i in range(4) for j in range(4)]
    chi = mp.matrix(4, 4)
    for r in range(16):
        chi[r // 4, r % 4] = mp.fsum(M[r][c] * vecT[c] for c in range(16) if M[r][c] != 0)
    return chi


_T2C_CACHE = {}


def _mp_t_to_chi():
    """Exact form of the transfer -> chi map (entries are multiples of 1/4)."""
    if "m" not in _T2C_CACHE:
        from .bloch import _T_TO_CHI
        _T2C_CACHE["m"] = [[mp.mpc(round(v.real * 4), round(v.imag * 4)) / 4 for v in row] for row in _T_TO_CHI]
    return _T2C_CACHE["m"]


def short_time_analysis(model: HeomModel, order: int = 6, *, t0: float = 1e-3, levels: int = 6,
                        dps: int = 80) -> ShortTimeAnalysis:
    """Leading Taylor behaviour of every eigenvalue branch of chi(t) at ``t = 0``.

    chi(t) is evaluated from its power series in multiprecision arithmetic at
    ``t_k = t0 / 2**k``.  For each sorted eigenvalue the leading power ``p`` is
    read from successive ratios and the coefficient is Richardson-extrapolated.
    Branches vanishing to working precision are classified as ``"zero"``.
    """
    if order > 6:
        raise ValueError("order must be at most 6")
    with mp.workdps(dps):
        ts = [mp.mpf(t0) / 2 ** k for k in range(levels + 1)]
        terms = 40
        eig_rows = []
        for t in ts:
            chi = _mp_series_chi(model, t, terms)
            chi = (chi + chi.H) / 2
            w = mp.eighe(chi, eigvals_only=True)
            eig_rows.append(sorted([mp.re(x) for x in w]))
        branches = []
        tiny = mp.mpf(10) ** (-(dps - 15))
        for b in range(4):
            vals = [row[b] for row in eig_rows]
            if all(abs(v) < tiny for v in vals):
                branches.append(Branch(None, 0.0, "zero"))
                continue
            ratio = vals[-2] / vals[-1]
            if ratio <= 0:
                branches.append(Branch(None, float(vals[-1]), "inconclusive"))
                continue
            p = int(mp.nint(mp.log(ratio, 2)))
            if p < 0 or p > order or abs(mp.log(ratio, 2) - p) > 0.1:
                branches.append(Branch(None, float(vals[-1]), "inconclusive"))
                continue
            coeffs = [v / t ** p for v, t in zip(vals, ts)]
            # Richardson on c(t) = a + b t + c t^2 + ...
            for lev in range(1, len(coeffs)):
                coeffs = [(2 ** lev * coeffs[i + 1] - coeffs[i]) / (2 ** lev - 1) for i in range(len(coeffs) - 1)]
            a = coeffs[-1]
            cls = "positive" if a > 0 else "negative"
            branches.append(Branch(p, float(a), cls))
    return ShortTimeAnalysis(tuple(branches))
