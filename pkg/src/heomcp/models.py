"""Built-in and user-defined qubit HEOMs with their reduced coordinates.

Every built-in generator is assembled term by term from sandwich sums.  The
reduced coordinates of the built-ins are hard-coded (named coordinates with
entrywise-known ``l``), while :func:`krylov_reduction` provides the generic
path used for verification and for user models.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence

import numpy as np
from scipy.linalg import expm

from .bloch import (
    NAMED_OPERATORS,
    SIGMA_0,
    SandwichTerm,
    _T_TO_CHI,
    as_operator,
    assemble_extended_generator,
    chi_of_transfer,
    elementary_symmetric,
    transfer_of_sandwich_sum,
)
from .polynomial import Polynomial

I4 = np.eye(4)
KRYLOV_RANK_TOL = 1e-10
KRYLOV_CAP = 64


class ModelError(ValueError):
    """Unknown model, missing parameter or malformed model specification."""


def _T(*terms) -> np.ndarray:
    return transfer_of_sandwich_sum([SandwichTerm.named(c, a, b) for c, a, b in terms])


def dissipator(op) -> np.ndarray:
    """Transfer matrix of ``rho -> A rho A^dag - {A^dag A, rho}/2``."""
    A = as_operator(op)
    AdA = A.conj().T @ A
    return transfer_of_sandwich_sum(
        [SandwichTerm(1.0, A, A), SandwichTerm(-0.5, AdA, SIGMA_0), SandwichTerm(-0.5, SIGMA_0, AdA)]
    )


def dephasing(axis: str) -> np.ndarray:
    """``D_k rho = sigma_k rho sigma_k - rho``."""
    return _T((1, axis, axis), (-1, "id", "id"))


def commutator(op: str, coeff: complex = 1.0) -> np.ndarray:
    """``rho -> coeff [op, rho]``."""
    return _T((coeff, op, "id"), (-coeff, "id", op))


def anticommutator(op: str, coeff: complex = 1.0) -> np.ndarray:
    """``rho -> coeff {op, rho}``; ``op`` must be Hermitian."""
    return _T((coeff, op, "id"), (coeff, "id", op))


# ---------------------------------------------------------------------------
# model container


@dataclass(frozen=True)
class HeomModel:
    """An n-level HEOM in stacked Bloch coordinates.

    ``initial_extended_map`` has shape ``(4 n, 4)``; its first block is the
    identity and the auxiliary blocks are zero unless overridden.
    """

    name: str
    n_levels: int
    parameters: Mapping[str, float]
    generator: np.ndarray
    initial_extended_map: np.ndarray
    blocks: tuple = field(default=(), repr=False)
    reference: str | None = None
    options: Mapping[str, str] = field(default_factory=dict)

    def __post_init__(self):
        L = np.asarray(self.generator, dtype=float)
        if L.shape != (4 * self.n_levels, 4 * self.n_levels):
            raise ModelError(f"generator shape {L.shape} does not match {self.n_levels} levels")
        if not np.all(np.isfinite(L)):
            raise ModelError("generator has non-finite entries")
        L0 = np.asarray(self.initial_extended_map, dtype=float)
        if L0.shape != (4 * self.n_levels, 4):
            raise ModelError(f"initial map must have shape {(4 * self.n_levels, 4)}")
        object.__setattr__(self, "generator", L)
        object.__setattr__(self, "initial_extended_map", L0)

    @property
    def dimension(self) -> int:
        return 4 * self.n_levels

    def extended_map(self, t: float) -> np.ndarray:
        return expm(self.generator * t) @ self.initial_extended_map

    def system_map(self, t: float) -> np.ndarray:
        return self.extended_map(t)[:4]

    def to_json(self) -> dict:
        """Export in the user-model JSON schema (blocks as full transfer matrices)."""
        n = self.n_levels
        blocks = []
        for i in range(n):
            for j in range(n):
                B = self.generator[4 * i:4 * i + 4, 4 * j:4 * j + 4]
                if np.any(B):
                    blocks.append({"i": i + 1, "j": j + 1, "transfer": B.tolist()})
        initial = {}
        for i in range(n):
            block = self.initial_extended_map[4 * i:4 * i + 4]
            default = I4 if i == 0 else np.zeros((4, 4))
            if not np.allclose(block, default):
                initial[str(i + 1)] = block.tolist()
        out = {"name": self.name, "levels": n, "parameters": dict(self.parameters), "blocks": blocks}
        if initial:
            out["initial"] = initial
        return out


def _default_initial(n: int) -> np.ndarray:
    L0 = np.zeros((4 * n, 4))
    L0[:4] = I4
    return L0


# ---------------------------------------------------------------------------
# built-in generators

_BUILTINS: dict[str, dict] = {}


def _register(name, required, defaults=None, reference=None, optional=()):
    def deco(fn):
        _BUILTINS[name] = {"fn": fn, "required": tuple(required), "defaults": dict(defaults or {}),
                           "reference": reference, "optional": tuple(optional)}
        return fn
    return deco


@_register("jaynes_cummings", ["gamma", "zeta"], reference="zeta")
def _jaynes_cummings(p):
    g, z = p["gamma"], p["zeta"]
    sum_xyz = _T((1, "sx", "sx"), (1, "sy", "sy"), (1, "sz", "sz"))
    sum_xy = _T((1, "sx", "sx"), (1, "sy", "sy"))
    # sigma_z^dagger rho sigma_z with coefficient -2 zeta, placed as printed
    szd_sz = transfer_of_sandwich_sum([SandwichTerm(-2 * z, NAMED_OPERATORS["sz"].conj().T,
                                                    NAMED_OPERATORS["sz"].conj().T)])
    blocks = [
        [None, z * I4, None],
        [g * dissipator("sm"), z * sum_xyz, z * I4],
        [None, 0.5 * g * sum_xy, szd_sz],
    ]
    return blocks, None


@_register("reviving_2level", ["gamma1", "gamma2", "alpha"], {"omega": 1.0}, reference="omega")
def _reviving_2level(p):
    g1, g2, w, a = p["gamma1"], p["gamma2"], p["omega"], p["alpha"]
    L11 = 0.5 * g1 * dephasing("sz")
    blocks = [
        [L11, w * I4],
        [a * w * dephasing("sz"), g2 * _T((1, "sz", "sz"))],
    ]
    init = None
    if p.get("_init") == "modified":
        # rho_2(0) chosen so that d rho_1/dt vanishes at t = 0
        init = {2: -L11 / w}
    return blocks, init


@_register("reviving_3level", ["alpha", "beta"], {"omega": 1.0}, reference="omega",
           optional=("gamma", "gamma1", "gamma2", "gamma3", "alpha_tilde", "beta_tilde"))
def _reviving_3level(p):
    w, a, b = p["omega"], p["alpha"], p["beta"]
    g1, g2, g3 = p["gamma1"], p["gamma2"], p["gamma3"]
    zz = _T((1, "sz", "sz"))
    blocks = [
        [0.5 * g1 * dephasing("sz"), w * I4, None],
        [a * w * dephasing("sz"), g2 * zz, w * I4],
        [None, b * w * zz, g3 * zz],
    ]
    return blocks, None


@_register("bath", ["gamma_plus", "gamma_minus", "omega", "xi"])
def _bath(p):
    gpl, gmi, w, xi = p["gamma_plus"], p["gamma_minus"], p["omega"], p["xi"]
    gp = 0.5 * (gpl + gmi)
    B = gpl * dissipator("sp") + gmi * dissipator("sm")
    blocks = [
        [B, w * I4],
        # coupling xi/gamma_p and coherence damping at rate gamma_p (see module docs)
        [(xi / gp) * B, 0.5 * gp * (dephasing("sx") + dephasing("sy"))],
    ]
    return blocks, None


@_register("spin_boson", ["gamma", "delta", "beta"], {"omega": 1.0}, reference="omega")
def _spin_boson(p):
    w, g, D, b = p["omega"], p["gamma"], p["delta"], p["beta"]
    H = commutator("sz", -0.5j * w)
    C = commutator("sx", -1j * D)
    A = anticommutator("sx", -0.5 * D * b * g)
    blocks = [
        [H, C],
        [C + A, H - g * I4],
    ]
    return blocks, None


MODEL_NAMES = tuple(_BUILTINS)


def _resolve_parameters(name: str, params: Mapping[str, float]) -> dict:
    spec = _BUILTINS[name]
    known = set(spec["required"]) | set(spec["defaults"]) | set(spec["optional"]) | {"_init"}
    unknown = sorted(set(params) - known)
    if unknown:
        raise ModelError(f"{name}: unknown parameter(s) {unknown}")
    p = dict(spec["defaults"])
    p.update({k: v for k, v in params.items() if v is not None})
    if name == "reviving_3level":
        if "gamma" in p:
            for k in ("gamma1", "gamma2", "gamma3"):
                p.setdefault(k, p["gamma"])
        if "alpha_tilde" in p or "beta_tilde" in p:
            g, w = p.get("gamma1", p.get("gamma")), p["omega"]
            if g is None:
                raise ModelError("reviving_3level with scaled parameters needs gamma")
            if "alpha_tilde" in p:
                p["alpha"] = p.pop("alpha_tilde") * g ** 2 / w ** 2
            if "beta_tilde" in p:
                p["beta"] = p.pop("beta_tilde") * g ** 2 / w ** 2
        missing = [k for k in ("gamma1", "gamma2", "gamma3") if k not in p]
        if missing:
            raise ModelError(f"reviving_3level: missing parameter(s) {missing} (or gamma)")
    missing = [k for k in spec["required"] if k not in p]
    if missing:
        raise ModelError(f"{name}: missing parameter(s) {missing}")
    for k, v in p.items():
        if not isinstance(v, str) and not np.isfinite(v):
            raise ModelError(f"{name}: parameter {k} is not finite")
    if name == "bath":
        p["gamma_p"] = 0.5 * (p["gamma_plus"] + p["gamma_minus"])
        p["gamma_m"] = 0.5 * (p["gamma_plus"] - p["gamma_minus"])
        if p["gamma_p"] == 0:
            raise ModelError("bath: gamma_plus + gamma_minus must be non-zero")
    return p


def build_model(name: str, params: Mapping[str, float] | None = None, *, init: str = "zero",
                **kwargs) -> HeomModel:
    """Build one of the built-in HEOMs.

    Parameters
    ----------
    name : str
        One of ``MODEL_NAMES``.
    params : mapping, optional
        Parameter values; keyword arguments are merged in.
    init : {"zero", "modified"}
        Initial auxiliary state.  ``"modified"`` is only meaningful for
        ``reviving_2level`` and sets ``rho_2(0) = -L11 rho_1(0) / omega``.
    """
    if name not in _BUILTINS:
        raise ModelError(f"unknown model {name!r}; choose from {', '.join(MODEL_NAMES)}")
    merged = dict(params or {})
    merged.update(kwargs)
    if init not in ("zero", "modified"):
        raise ModelError(f"unknown initial condition {init!r}")
    if init == "modified" and name != "reviving_2level":
        raise ModelError("the modified initial condition is defined for reviving_2level only")
    p = _resolve_parameters(name, merged)
    p["_init"] = init
    blocks, init_override = _BUILTINS[name]["fn"](p)
    del p["_init"]
    n = len(blocks)
    L = assemble_extended_generator(blocks)
    L0 = _default_initial(n)
    for level, block in (init_override or {}).items():
        L0[4 * (level - 1):4 * level] = block
    frozen_blocks = tuple(tuple(None if b is None else np.asarray(b) for b in row) for row in blocks)
    return HeomModel(name=name, n_levels=n, parameters=p, generator=L, initial_extended_map=L0,
                     blocks=frozen_blocks, reference=_BUILTINS[name]["reference"],
                     options={"init": init})


# ---------------------------------------------------------------------------
# user models


def _parse_operator(spec):
    if isinstance(spec, str):
        if spec not in NAMED_OPERATORS:
            raise ModelError(f"unknown operator name {spec!r}")
        return NAMED_OPERATORS[spec]
    arr = np.asarray(spec, dtype=float)
    if arr.shape == (2, 2, 2):
        return arr[..., 0] + 1j * arr[..., 1]
    if arr.shape == (2, 2):
        return arr.astype(complex)
    raise ModelError(f"operator must be a name or a 2x2 matrix (optionally of [re, im] pairs), got {spec!r}")


def model_from_json(data) -> HeomModel:
    """Build a user model from the JSON schema (dict, JSON text or file path).

    Schema::

        {"levels": n,
         "blocks": [{"i": 1, "j": 2, "terms": [{"coeff": [re, im], "left": "sx", "right": "sx"}]},
                    {"i": 2, "j": 1, "transfer": [[...4x4...]]}],
         "initial": {"2": [[...4x4 transfer...]]}}

    Levels are 1-based.  Operators are names (``id sx sy sz sp sm``) or 2x2
    matrices whose entries are numbers or ``[re, im]`` pairs.
    """
    if isinstance(data, str):
        text = data
        if not text.lstrip().startswith("{"):
            with open(text) as fh:
                text = fh.read()
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ModelError(f"malformed JSON model: {exc}") from None
    if not isinstance(data, dict) or "levels" not in data or "blocks" not in data:
        raise ModelError("JSON model needs 'levels' and 'blocks'")
    n = int(data["levels"])
    if n < 1:
        raise ModelError("levels must be positive")
    grid: list[list[np.ndarray | None]] = [[None] * n for _ in range(n)]
    for entry in data["blocks"]:
        try:
            i, j = int(entry["i"]) - 1, int(entry["j"]) - 1
        except (KeyError, TypeError, ValueError):
            raise ModelError(f"block entry {entry!r} needs integer 'i' and 'j'") from None
        if not (0 <= i < n and 0 <= j < n):
            raise ModelError(f"block ({i + 1}, {j + 1}) outside a {n}-level hierarchy")
        if "transfer" in entry:
            T = np.asarray(entry["transfer"], dtype=float)
            if T.shape != (4, 4):
                raise ModelError("transfer blocks must be 4x4")
        else:
            terms = []
            for term in entry.get("terms", []):
                c = term.get("coeff", 1.0)
                c = complex(c[0], c[1]) if isinstance(c, (list, tuple)) else complex(c)
                terms.append(SandwichTerm(c, _parse_operator(term["left"]), _parse_operator(term["right"])))
            T = transfer_of_sandwich_sum(terms)
        grid[i][j] = T if grid[i][j] is None else grid[i][j] + T
    L = assemble_extended_generator(grid)
    L0 = _default_initial(n)
    for key, block in (data.get("initial") or {}).items():
        level = int(key)
        if not 1 <= level <= n:
            raise ModelError(f"initial override for missing level {level}")
        block = np.asarray(block, dtype=float)
        if block.shape != (4, 4):
            raise ModelError("initial overrides must be 4x4 transfer matrices")
        L0[4 * (level - 1):4 * level] = block
    params = {k: float(v) for k, v in (data.get("parameters") or {}).items()
              if isinstance(v, (int, float))}
    return HeomModel(name=str(data.get("name", "user")), n_levels=n, parameters=params,
                     generator=L, initial_extended_map=L0,
                     blocks=tuple(tuple(row) for row in grid))


# ---------------------------------------------------------------------------
# reduced systems


@dataclass(frozen=True)
class Factorization:
    """``e_h = prefactor * prod(factor_k ** power_k)``."""

    factors: tuple
    powers: tuple
    prefactor: float
    delta_min: float = 0.0

    def __iter__(self):
        return iter(self.factors)

    def __len__(self):
        return len(self.factors)

    def __getitem__(self, k):
        return self.factors[k]

    def product(self, lam) -> np.ndarray:
        out = self.prefactor
        for f, p in zip(self.factors, self.powers):
            out = out * np.real(f.evaluate(lam)) ** p
        return out


@dataclass(frozen=True)
class ReducedSystem:
    """Linear reduced dynamics ``d lambda/dt = l lambda`` of an extended map.

    ``extract`` maps a stacked extended map (``4 n x 4``) to ``lambda``;
    ``transfer_poly`` gives the system transfer matrix as polynomials in
    ``lambda``; ``eh_poly`` is ``e_h(chi(lambda))``.
    """

    l: np.ndarray
    lambda0: np.ndarray
    names: tuple
    extract: Callable
    transfer_poly: tuple
    eh_poly: Polynomial
    h: int
    factorization: Factorization | None = None
    positive_cofactor: Polynomial | None = None
    s_forms: tuple = ()
    model: HeomModel | None = field(default=None, repr=False)
    method: str = "named"

    @property
    def d(self) -> int:
        return self.l.shape[0]

    def trajectory(self, times) -> np.ndarray:
        return np.array([expm(self.l * t) @ self.lambda0 for t in np.atleast_1d(times)])

    def transfer(self, lam) -> np.ndarray:
        """System transfer matrix at ``lam`` (shape ``(..., d)`` allowed)."""
        lam = np.asarray(lam, dtype=float)
        out = np.empty(lam.shape[:-1] + (4, 4))
        for j in range(4):
            for k in range(4):
                out[..., j, k] = np.real(self.transfer_poly[j][k].evaluate(lam))
        return out

    def chi(self, lam) -> np.ndarray:
        return chi_of_transfer(self.transfer(lam))

    def eh(self, lam) -> np.ndarray:
        return np.real(self.eh_poly.evaluate(np.asarray(lam, dtype=float)))


def _transfer_polys_from_affine(d, entries: Mapping[tuple[int, int], Polynomial]) -> tuple:
    zero = Polynomial.constant(d, 0.0)
    return tuple(tuple(entries.get((j, k), zero) for k in range(4)) for j in range(4))


def chi_polys(transfer_poly) -> list[list[Polynomial]]:
    """Process-matrix entries as (complex) polynomials of the transfer entries."""
    flat = [transfer_poly[j][k] for j in range(4) for k in range(4)]
    d = flat[0].nvars
    out = []
    for a in range(4):
        row = []
        for b in range(4):
            p = Polynomial.constant(d, 0.0)
            for idx, coeff in enumerate(_T_TO_CHI[4 * a + b]):
                c = complex(coeff)
                c = complex(round(c.real, 14), round(c.imag, 14))
                if c != 0:
                    p = p + (c if c.imag else c.real) * flat[idx]
            row.append(p)
        out.append(row)
    return out


def elementary_symmetric_poly(M: list[list[Polynomial]], k: int) -> Polynomial:
    """``e_k`` of a polynomial matrix via Newton's identities (exact arithmetic on coefficients)."""
    n = len(M)
    d = M[0][0].nvars
    if not 1 <= k <= n:
        raise ValueError(f"k must lie in [1, {n}]")

    def matmul(A, B):
        return [[sum((A[i][m] * B[m][j] for m in range(n)), Polynomial.constant(d, 0.0))
                 for j in range(n)] for i in range(n)]

    powers = []
    P = M
    for i in range(k):
        if i > 0:
            P = matmul(P, M)
        powers.append(sum((P[j][j] for j in range(n)), Polynomial.constant(d, 0.0)))
    e = [Polynomial.constant(d, 1.0)]
    for m in range(1, k + 1):
        acc = Polynomial.constant(d, 0.0)
        for i in range(1, m + 1):
            acc = acc + ((-1) ** (i - 1)) * e[m - i] * powers[i - 1]
        e.append(acc / m)
    return e[k].real().chop()


def _shifted(transfer_poly, delta: float):
    """Transfer polynomials of ``chi + delta I`` (adds ``4 delta`` to T_00)."""
    # chi -> chi + delta I corresponds to adding delta * sum_i sigma_i rho sigma_i = 2 delta tr(rho) I
    rows = [list(r) for r in transfer_poly]
    rows[0][0] = rows[0][0] + 4.0 * delta
    return tuple(tuple(r) for r in rows)


def eh_polynomial(transfer_poly, h: int, delta_min: float = 0.0) -> Polynomial:
    tp = _shifted(transfer_poly, delta_min) if delta_min else transfer_poly
    return elementary_symmetric_poly(chi_polys(tp), h)


def _named_reduction(model: HeomModel) -> dict:
    """Paper coordinates of the built-ins: l, lambda(0), extraction and system map."""
    p = model.parameters
    name = model.name
    if name == "jaynes_cummings":
        g, z = p["gamma"], p["zeta"]
        l = np.array([[0.0, z], [-g / 2, -z]])
        lam0 = np.array([1.0, 0.0])
        idx = [(0, 1, 1), (1, 1, 1)]
        offset = np.zeros(2)
        x1 = Polynomial.variable(2, 0)
        T = {(0, 0): Polynomial.constant(2, 1.0), (1, 1): x1, (2, 2): x1,
             (3, 0): x1 ** 2 - 1.0, (3, 3): x1 ** 2}
        h = 2
        names = ("lambda1", "lambda2")
        cofactor = 1.0 + x1 ** 2
    elif name in ("reviving_2level", "reviving_3level"):
        n = model.n_levels
        w = p["omega"]
        if n == 2:
            l = np.array([[-p["gamma1"], w], [-2 * p["alpha"] * w, -p["gamma2"]]])
        else:
            l = np.array([[-p["gamma1"], w, 0.0],
                          [-2 * p["alpha"] * w, -p["gamma2"], w],
                          [0.0, -p["beta"] * w, -p["gamma3"]]])
        idx = [(i, 1, 1) for i in range(n)]
        offset = np.zeros(n)
        lam0 = np.array([model.initial_extended_map[4 * i + 1, 1] for i in range(n)])
        x1 = Polynomial.variable(n, 0)
        one = Polynomial.constant(n, 1.0)
        T = {(0, 0): one, (1, 1): x1, (2, 2): x1, (3, 3): one}
        h = 2
        names = tuple(f"lambda{i + 1}" for i in range(n))
        cofactor = None
    elif name == "bath":
        gp, gm, w, xi = p["gamma_p"], p["gamma_m"], p["omega"], p["xi"]
        if gm == 0:
            raise ModelError("bath coordinates need gamma_plus != gamma_minus")
        l = -np.array([[2 * gp, -w, 0, 0], [2 * xi, 2 * gp, 0, 0], [0, 0, gp, -w], [0, 0, xi, gp]])
        lam0 = np.array([-gm / gp, 0.0, 1.0, 0.0])
        idx = [(0, 3, 0), (1, 3, 0), (0, 1, 1), (1, 1, 1)]
        offset = np.array([-gm / gp, 0.0, 0.0, 0.0])
        x1, _, x3, _ = Polynomial.variables(4)
        T = {(0, 0): Polynomial.constant(4, 1.0), (1, 1): x3, (2, 2): x3,
             (3, 0): x1 + gm / gp, (3, 3): (-gp / gm) * x1}
        h = 4
        names = ("lambda1", "lambda2", "lambda3", "lambda4")
        cofactor = None
    elif name == "spin_boson":
        w, g, D, b = p["omega"], p["gamma"], p["delta"], p["beta"]
        l = np.array([
            [0, w, 0, 0, 0, 0],
            [0, 0, -w, 0, 0, 0],
            [g, 4 * D ** 2 / w + w, -g, 0, 0, 0],
            [0, 0, 0, -g, -w, 0],
            [0, 0, 0, w, -g, -2 * D],
            [0, 0, 0, 0, 2 * D, 0],
        ], dtype=float)
        lam0 = np.array([1.0, 0, 1, 0, 0, 1])
        idx = [(0, 1, 1), (0, 1, 2), (0, 2, 2), (1, 1, 3), (1, 2, 3), (0, 3, 3)]
        offset = np.zeros(6)
        x = Polynomial.variables(6)
        T = {(0, 0): Polynomial.constant(6, 1.0), (1, 1): x[0], (1, 2): x[1], (2, 1): -x[1],
             (2, 2): x[2], (3, 3): x[5],
             (3, 0): (b * D) * x[3] + (0.5 * b * w) * (x[5] - 1.0)}
        h = 4
        names = tuple(f"lambda{i + 1}" for i in range(6))
        cofactor = None
    else:
        raise ModelError(f"no named coordinates for model {name!r}")
    d = len(lam0)

    def extract(ext_map, idx=tuple(idx), offset=offset):
        ext_map = np.asarray(ext_map)
        vals = [ext_map[..., 4 * lev + j, k] for lev, j, k in idx]
        return np.stack(vals, axis=-1) + offset

    return dict(l=l, lambda0=lam0, names=names, extract=extract,
                transfer_poly=_transfer_polys_from_affine(d, T), h=h, cofactor=cofactor)


def eh_factorization(model: HeomModel, delta_min: float = 0.0) -> Factorization:
    """Factorization of ``e_h(chi)`` (``det(chi + delta_min I)`` when ``delta_min > 0``).

    Bath: ``det chi = pref * P1^2 * P2`` with ``P1 = gamma_p lambda1 + gamma_m`` and
    ``P2 = c1 - c2^2 lambda3^2 + c3 lambda1 + c4 lambda1^2`` where
    ``c1 = 4 g+ g- gamma_m^2``, ``c2 = g-^2 - g+^2``, ``c3 = g-^4 - g+^4``,
    ``c4 = 4 g+ g- gamma_p^2`` and ``pref = g+ g- / (4 c2^4)``.

    Spin-Boson: ``det(chi + delta I) = P1' P2' / 4096``.  Other models return the
    single polynomial ``e_h``.
    """
    if delta_min < 0:
        raise ValueError("delta_min must be non-negative")
    named = _named_reduction(model)
    d = len(named["lambda0"])
    p = model.parameters
    if model.name == "bath" and delta_min == 0:
        gpl, gmi, gp, gm = p["gamma_plus"], p["gamma_minus"], p["gamma_p"], p["gamma_m"]
        x1, _, x3, _ = Polynomial.variables(4)
        c1 = 4 * gpl * gmi * gm ** 2
        c2 = gmi ** 2 - gpl ** 2
        c3 = gmi ** 4 - gpl ** 4
        c4 = 4 * gpl * gmi * gp ** 2
        P1 = gp * x1 + gm
        P2 = c1 - c2 ** 2 * x3 ** 2 + c3 * x1 + c4 * x1 ** 2
        return Factorization((P1, P2), (2, 1), gpl * gmi / (4 * c2 ** 4))
    if model.name == "spin_boson":
        w, D, b = p["omega"], p["delta"], p["beta"]
        x = Polynomial.variables(6)
        l1, l2, l3, l4, _, l6 = x
        bb = 4 - b ** 2 * w ** 2
        P1 = (-4 * b ** 2 * D ** 2) * l4 ** 2 - (4 * b ** 2 * D * w) * (l6 - 1.0) * l4 \
            - (b ** 2 * w ** 2 - 4) * (l6 - 2.0) * l6 - 4 * (l1 - l3) ** 2 + bb
        P2 = -4 * (4 * l2 ** 2 + (l1 + l3) ** 2 - (l6 + 1.0) ** 2) \
            - ((2 * b * D) * l4 + (b * w) * (l6 - 1.0)) ** 2
        if delta_min:
            dm = delta_min
            P1 = P1 + (32 * dm) * (1 + 2 * dm - l6)
            P2 = P2 + (32 * dm) * (1 + 2 * dm + l6)
        return Factorization((P1, P2), (1, 1), 1.0 / 4096, delta_min)
    h = 4 if delta_min else named["h"]
    return Factorization((eh_polynomial(named["transfer_poly"], h, delta_min),), (1,), 1.0, delta_min)


def s_forms_for(model: HeomModel) -> tuple:
    p = model.parameters
    if model.name in ("jaynes_cummings", "reviving_2level"):
        return (np.diag([1.0, 0.0]) / 4,)
    if model.name == "reviving_3level":
        return (np.diag([1.0, 0.0, 0.0]) / 4,)
    if model.name == "bath":
        # G1 = gamma_m^2 - gamma_p^2 lambda1^2 = P1 (2 gamma_m - P1)
        return (np.diag([p["gamma_p"] ** 2, 0.0, 0.0, 0.0]),)
    return ()


def krylov_basis(model: HeomModel, tol: float = KRYLOV_RANK_TOL, cap: int = KRYLOV_CAP):
    """Orthonormal basis of the smallest invariant subspace containing the extended map.

    Works on ``vec(Lambda)`` (columns stacked) under ``I_4 (x) L``.  Returns
    ``(V, full)`` where ``full`` flags the full-dimensional fallback.
    """
    G = np.kron(I4, model.generator)
    x0 = model.initial_extended_map.reshape(-1, order="F")
    scale = max(np.linalg.norm(x0), 1.0)
    basis: list[np.ndarray] = []
    v = x0.copy()
    for _ in range(G.shape[0] + 1):
        w = v.copy()
        for _ in range(2):
            for b in basis:
                w -= (b @ w) * b
        nrm = np.linalg.norm(w)
        if nrm <= tol * scale:
            break
        basis.append(w / nrm)
        if len(basis) > cap:
            return np.eye(G.shape[0]), True
        v = G @ basis[-1]
        scale = max(scale, np.linalg.norm(v))
    return np.array(basis).T, False


def krylov_reduction(model: HeomModel, h: int | None = None, tol: float = KRYLOV_RANK_TOL,
                     cap: int = KRYLOV_CAP) -> ReducedSystem:
    """Generic reduction of any model onto its Krylov subspace."""
    V, full = krylov_basis(model, tol, cap)
    G = np.kron(I4, model.generator)
    l = V.T @ G @ V
    x0 = model.initial_extended_map.reshape(-1, order="F")
    lam0 = V.T @ x0
    d = V.shape[1]
    n4 = model.dimension
    # vec index of (row r, column c) is c * n4 + r
    T = {}
    for j in range(4):
        for k in range(4):
            row = V[k * n4 + j]
            T[(j, k)] = Polynomial.linear(np.where(np.abs(row) > 1e-15, row, 0.0))
    transfer_poly = _transfer_polys_from_affine(d, T)

    def extract(ext_map):
        ext_map = np.asarray(ext_map)
        flat = np.swapaxes(ext_map, -1, -2).reshape(ext_map.shape[:-2] + (-1,))
        return flat @ V

    if h is None:
        h = detect_h(model)
    eh = eh_polynomial(transfer_poly, h) if d <= 16 else None
    return ReducedSystem(l=l, lambda0=lam0, names=tuple(f"k{i + 1}" for i in range(d)),
                         extract=extract, transfer_poly=transfer_poly, eh_poly=eh, h=h,
                         model=model, method="krylov-full" if full else "krylov")


def slowest_rate(generator: np.ndarray) -> float:
    ev = np.linalg.eigvals(generator)
    scale = max(np.max(np.abs(ev)), 1e-12)
    decaying = -ev.real[ev.real < -1e-9 * scale]
    if decaying.size == 0:
        return scale if scale > 1e-12 else 1.0
    return float(np.min(decaying))


def default_horizon(model: HeomModel) -> float:
    return 20.0 / slowest_rate(model.generator)


def detect_h(model: HeomModel, t_end: float | None = None, samples: int = 400, eps: float = 1e-10) -> int:
    """Maximal eps-rank of chi(t) over a scan horizon."""
    t_end = default_horizon(model) if t_end is None else t_end
    dt = t_end / samples
    step = expm(model.generator * dt)
    X = model.initial_extended_map.copy()
    best = 0
    for _ in range(samples + 1):
        w = np.linalg.eigvalsh(chi_of_transfer(X[:4]))
        best = max(best, int(np.sum(np.abs(w) > eps * max(1.0, np.max(np.abs(w))))))
        X = step @ X
    return best


def reduced_system(model: HeomModel, *, tol: float = KRYLOV_RANK_TOL, cap: int = KRYLOV_CAP) -> ReducedSystem:
    """Reduced coordinates: named coordinates for built-ins, Krylov reduction otherwise."""
    if model.name not in _BUILTINS:
        return krylov_reduction(model, tol=tol, cap=cap)
    named = _named_reduction(model)
    fac = eh_factorization(model)
    h = named["h"]
    eh = eh_polynomial(named["transfer_poly"], h)
    return ReducedSystem(l=named["l"], lambda0=named["lambda0"], names=named["names"],
                         extract=named["extract"], transfer_poly=named["transfer_poly"],
                         eh_poly=eh, h=h, factorization=fac, positive_cofactor=named["cofactor"],
                         s_forms=s_forms_for(model), model=model)


def reduction_residual(model: HeomModel, reduced: ReducedSystem, times: Sequence[float]) -> float:
    """Max deviation between the full system block and the reduced reconstruction."""
    err = 0.0
    for t in times:
        X = model.extended_map(t)
        lam = expm(reduced.l * t) @ reduced.lambda0
        err = max(err, np.max(np.abs(reduced.extract(X) - lam)))
        err = max(err, np.max(np.abs(reduced.transfer(lam) - X[:4])))
    return float(err)


# ---------------------------------------------------------------------------
# printed parameter predicates for the two-level reviving model


def reviving2_condition_printed(gamma1: float, gamma2: float, alpha: float, omega: float = 1.0) -> bool:
    """Condition as printed: ``gamma1, gamma2 >= 0`` and ``2 alpha + gamma1 gamma2 >= 0``.

    Dimensionally inconsistent unless ``omega = 1``; kept for comparison.
    """
    return gamma1 >= 0 and gamma2 >= 0 and 2 * alpha + gamma1 * gamma2 >= 0


def reviving2_condition_consistent(gamma1: float, gamma2: float, alpha: float, omega: float = 1.0) -> bool:
    """Dimensionally consistent form: ``gamma1, gamma2 >= 0`` and ``2 alpha omega^2 + gamma1 gamma2 >= 0``."""
    return gamma1 >= 0 and gamma2 >= 0 and 2 * alpha * omega ** 2 + gamma1 * gamma2 >= 0


def system_chi_trajectory(model: HeomModel, times: Sequence[float]) -> np.ndarray:
    return np.array([chi_of_transfer(model.system_map(t)) for t in times])


def eh_of_chi(chi: np.ndarray, h: int) -> float:
    return elementary_symmetric(chi, h)
