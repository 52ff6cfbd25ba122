"""Trace-distance (BLP) non-Markovianity of the system map.

For antipodal pure states with Bloch vectors ``+n`` and ``-n`` the trace
distance is ``D(t) = |M(t) n|`` where ``M`` is the Bloch block of the system
transfer matrix; the affine part cancels in the difference.  The measure is
the largest accumulated increase of ``D`` over such pairs.
"""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import expm
from scipy.optimize import minimize, minimize_scalar

from .models import HeomModel, default_horizon


@dataclass
class BlpConfig:
    n_phi: int = 24
    n_theta: int = 12
    refine: bool = True
    refine_extrema: bool = True
    steps_per_unit: float | None = None
    plateau_tol: float = 1e-4
    max_extensions: int = 6

    def to_json(self) -> dict:
        return dict(self.__dict__)


@dataclass(frozen=True)
class PairTrajectory:
    """Trace distance of one antipodal pair along a time grid."""

    r1: np.ndarray
    r2: np.ndarray
    times: np.ndarray
    D: np.ndarray

    @property
    def increments(self) -> np.ndarray:
        return np.maximum(np.diff(self.D), 0.0)

    @property
    def backflow(self) -> float:
        return float(np.sum(self.increments))

    def accumulated(self) -> np.ndarray:
        """Running backflow ``N(t)``."""
        return np.concatenate([[0.0], np.cumsum(self.increments)])


@dataclass
class BlpResult:
    value: float
    direction: np.ndarray
    horizon: float
    pair: PairTrajectory = field(repr=False)
    config: BlpConfig = field(default_factory=BlpConfig, repr=False)

    def to_csv(self, path=None) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["t", "N"])
        for t, n in zip(self.pair.times, self.pair.accumulated()):
            w.writerow([repr(float(t)), repr(float(n))])
        text = buf.getvalue()
        if path is not None:
            with open(path, "w") as fh:
                fh.write(text)
        return text

    def to_json(self) -> dict:
        return {"N": self.value, "direction": self.direction.tolist(), "horizon": self.horizon,
                "config": self.config.to_json()}


def extended_maps(model: HeomModel, times: np.ndarray) -> np.ndarray:
    """Extended maps on a uniform grid starting at 0."""
    times = np.asarray(times, dtype=float)
    dt = times[1] - times[0] if len(times) > 1 else 0.0
    step = expm(model.generator * dt)
    X = model.initial_extended_map.copy()
    out = np.empty((len(times),) + X.shape, dtype=X.dtype)
    for k in range(len(times)):
        out[k] = X
        X = step @ X
    return out


def bloch_blocks(model: HeomModel, times: np.ndarray) -> np.ndarray:
    """Bloch blocks ``M(t)`` (shape ``(n_t, 3, 3)``) on a uniform grid starting at 0."""
    return np.real(extended_maps(model, times)[:, 1:4, 1:4])


def refine_extrema(model: HeomModel, times, X, n, xtol: float = 1e-10) -> PairTrajectory:
    """Pair trajectory with every sampled local extremum of ``D`` located by exact propagation.

    ``D`` has cusps where it touches zero, so plain sampling misses part of the
    variation; the refined extrema are inserted into the grid.
    """
    n = np.asarray(n, dtype=float)
    n = n / np.linalg.norm(n)
    times = np.asarray(times, dtype=float)
    D = np.linalg.norm(np.real(X[:, 1:4, 1:4]) @ n, axis=1)
    G = model.generator
    extra_t, extra_D = [], []
    for k in range(1, len(D) - 1):
        is_min = D[k] <= D[k - 1] and D[k] <= D[k + 1]
        is_max = D[k] >= D[k - 1] and D[k] >= D[k + 1]
        if not (is_min or is_max) or (D[k] == D[k - 1] and D[k] == D[k + 1]):
            continue
        sgn = 1.0 if is_min else -1.0
        t0 = times[k - 1]

        def f(t, t0=t0, X0=X[k - 1], sgn=sgn):
            Xt = expm(G * (t - t0)) @ X0
            return sgn * np.linalg.norm(np.real(Xt[1:4, 1:4]) @ n)

        res = minimize_scalar(f, bounds=(times[k - 1], times[k + 1]), method="bounded", options={"xatol": xtol})
        if sgn * res.fun < sgn * D[k] and res.x not in (times[k - 1], times[k + 1]):
            extra_t.append(res.x)
            extra_D.append(sgn * res.fun)
    if extra_t:
        t_all = np.concatenate([times, extra_t])
        D_all = np.concatenate([D, extra_D])
        order = np.argsort(t_all, kind="stable")
        times, D = t_all[order], D_all[order]
    return PairTrajectory(r1=n, r2=-n, times=times, D=D)


def _unit(theta, phi) -> np.ndarray:
    return np.stack([np.sin(theta) * np.cos(phi), np.sin(theta) * np.sin(phi), np.cos(theta)], axis=-1)


def pair_trajectory(M: np.ndarray, times: np.ndarray, n) -> PairTrajectory:
    n = np.asarray(n, dtype=float)
    n = n / np.linalg.norm(n)
    D = np.linalg.norm(M @ n, axis=1)
    return PairTrajectory(r1=n, r2=-n, times=np.asarray(times), D=D)


def backflow(M: np.ndarray, dirs: np.ndarray) -> np.ndarray:
    """Accumulated increase of ``D`` for unit directions ``dirs`` of shape ``(k, 3)``."""
    D = np.linalg.norm(np.einsum("tij,kj->kti", M, dirs), axis=2)
    return np.sum(np.maximum(np.diff(D, axis=1), 0.0), axis=1)


def _grid(model: HeomModel, horizon: float, cfg: BlpConfig) -> np.ndarray:
    ev = np.linalg.eigvals(model.generator)
    fast = max(1.0, float(np.max(np.abs(ev))))
    per_unit = cfg.steps_per_unit or 20.0 * fast
    n = max(200, int(np.ceil(horizon * per_unit)))
    return np.linspace(0.0, horizon, n + 1)


def _search(M: np.ndarray, cfg: BlpConfig):
    theta = (np.arange(cfg.n_theta) + 0.5) * np.pi / cfg.n_theta
    phi = np.arange(cfg.n_phi) * 2 * np.pi / cfg.n_phi
    T, P = np.meshgrid(theta, phi, indexing="ij")
    dirs = _unit(T.ravel(), P.ravel())
    vals = backflow(M, dirs)
    k = int(np.argmax(vals))
    best = (float(vals[k]), dirs[k])
    if cfg.refine:
        x0 = np.array([T.ravel()[k], P.ravel()[k]])
        res = minimize(lambda x: -backflow(M, _unit(x[0], x[1])[None])[0], x0, method="Nelder-Mead",
                       options={"xatol": 1e-6, "fatol": 1e-10, "maxiter": 400})
        if -res.fun > best[0]:
            best = (float(-res.fun), _unit(res.x[0], res.x[1]))
    return best


def blp_analysis(model: HeomModel, horizon: float | None = None, search: BlpConfig | None = None) -> BlpResult:
    """Maximize the backflow over antipodal pure pairs.

    Without an explicit ``horizon`` the window starts at the default scan
    horizon and is doubled until the increase over its last tenth is below
    ``plateau_tol``.
    """
    cfg = search or BlpConfig()
    if horizon is not None and not horizon > 0:
        raise ValueError("horizon must be positive")
    auto = horizon is None
    T = default_horizon(model) if auto else float(horizon)
    for _ in range(cfg.max_extensions + 1):
        times = _grid(model, T, cfg)
        X = extended_maps(model, times)
        _, n = _search(np.real(X[:, 1:4, 1:4]), cfg)
        pair = refine_extrema(model, times, X, n) if cfg.refine_extrema else pair_trajectory(
            np.real(X[:, 1:4, 1:4]), times, n)
        value = pair.backflow
        if not auto:
            break
        acc = pair.accumulated()
        tail = acc[-1] - acc[int(0.9 * (len(acc) - 1))]
        if tail < cfg.plateau_tol:
            break
        T *= 2
    return BlpResult(value=value, direction=n, horizon=T, pair=pair, config=cfg)


def blp_measure(model: HeomModel, horizon: float | None = None, search: BlpConfig | None = None) -> float:
    """Trace-distance non-Markovianity of the system map."""
    return blp_analysis(model, horizon, search).value
