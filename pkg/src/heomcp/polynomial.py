"""Sparse multivariate polynomials with exponent-tuple keys.

Only what the certificate pipeline needs: ring arithmetic, vectorized
evaluation, time derivatives along linear flows and JSON round-trips.
"""
from __future__ import annotations

from typing import Iterable, Mapping

import numpy as np

Exponent = tuple


class Polynomial:
    """Polynomial in ``nvars`` variables stored as ``{exponent tuple: coefficient}``.

    Coefficients may be complex while building process-matrix expressions;
    :meth:`real` drops a negligible imaginary part.
    """

    __slots__ = ("nvars", "terms")

    def __init__(self, nvars: int, terms: Mapping[Exponent, complex] | None = None):
        self.nvars = int(nvars)
        self.terms: dict[Exponent, complex] = {}
        for exp, coeff in (terms or {}).items():
            exp = tuple(int(e) for e in exp)
            if len(exp) != self.nvars:
                raise ValueError(f"exponent {exp} does not match {self.nvars} variables")
            if coeff != 0:
                self.terms[exp] = self.terms.get(exp, 0) + coeff
        self.terms = {e: c for e, c in self.terms.items() if c != 0}

    # construction
    @classmethod
    def constant(cls, nvars: int, value) -> "Polynomial":
        return cls(nvars, {(0,) * nvars: value})

    @classmethod
    def variable(cls, nvars: int, index: int) -> "Polynomial":
        exp = [0] * nvars
        exp[index] = 1
        return cls(nvars, {tuple(exp): 1.0})

    @classmethod
    def variables(cls, nvars: int) -> list["Polynomial"]:
        return [cls.variable(nvars, i) for i in range(nvars)]

    @classmethod
    def linear(cls, coeffs: Iterable, const=0.0) -> "Polynomial":
        coeffs = list(coeffs)
        n = len(coeffs)
        out = cls.constant(n, const)
        for i, c in enumerate(coeffs):
            out = out + c * cls.variable(n, i)
        return out

    # arithmetic
    def _coerce(self, other) -> "Polynomial":
        if isinstance(other, Polynomial):
            if other.nvars != self.nvars:
                raise ValueError("variable count mismatch")
            return other
        return Polynomial.constant(self.nvars, other)

    def __add__(self, other):
        other = self._coerce(other)
        terms = dict(self.terms)
        for e, c in other.terms.items():
            terms[e] = terms.get(e, 0) + c
        return Polynomial(self.nvars, terms)

    __radd__ = __add__

    def __neg__(self):
        return Polynomial(self.nvars, {e: -c for e, c in self.terms.items()})

    def __sub__(self, other):
        return self + (-self._coerce(other))

    def __rsub__(self, other):
        return self._coerce(other) - self

    def __mul__(self, other):
        if not isinstance(other, Polynomial):
            return Polynomial(self.nvars, {e: c * other for e, c in self.terms.items()})
        other = self._coerce(other)
        terms: dict[Exponent, complex] = {}
        for e1, c1 in self.terms.items():
            for e2, c2 in other.terms.items():
                e = tuple(a + b for a, b in zip(e1, e2))
                terms[e] = terms.get(e, 0) + c1 * c2
        return Polynomial(self.nvars, terms)

    __rmul__ = __mul__

    def __truediv__(self, scalar):
        return self * (1.0 / scalar)

    def __pow__(self, k: int):
        if k < 0:
            raise ValueError("negative powers are not polynomials")
        out = Polynomial.constant(self.nvars, 1.0)
        for _ in range(k):
            out = out * self
        return out

    # inspection
    @property
    def degree(self) -> int:
        return max((sum(e) for e in self.terms), default=0)

    def coefficient(self, exp: Exponent):
        return self.terms.get(tuple(exp), 0.0)

    def monomials(self, include_constant: bool = True) -> list[Exponent]:
        exps = sorted(self.terms, key=lambda e: (sum(e), tuple(-x for x in e)))
        if not include_constant:
            exps = [e for e in exps if sum(e) > 0]
        return exps

    def max_abs_coefficient(self) -> float:
        return max((abs(c) for c in self.terms.values()), default=0.0)

    def real(self, tol: float = 1e-9) -> "Polynomial":
        """Real part; raises if an imaginary coefficient exceeds ``tol`` (relative)."""
        scale = max(1.0, self.max_abs_coefficient())
        for c in self.terms.values():
            if abs(np.imag(c)) > tol * scale:
                raise ValueError(f"polynomial has imaginary coefficient {c}")
        return Polynomial(self.nvars, {e: float(np.real(c)) for e, c in self.terms.items()})

    def chop(self, tol: float = 1e-13) -> "Polynomial":
        scale = max(1.0, self.max_abs_coefficient())
        return Polynomial(self.nvars, {e: c for e, c in self.terms.items() if abs(c) > tol * scale})

    def __call__(self, x):
        return self.evaluate(x)

    def evaluate(self, x):
        """Evaluate at a point ``(nvars,)`` or a batch ``(..., nvars)``."""
        x = np.asarray(x)
        if x.shape[-1] != self.nvars:
            raise ValueError(f"expected trailing dimension {self.nvars}, got {x.shape}")
        out = np.zeros(x.shape[:-1], dtype=complex if self._is_complex() else float)
        for exp, c in self.terms.items():
            out = out + c * monomial_values(x, exp)
        return out

    def _is_complex(self) -> bool:
        return any(isinstance(c, complex) or np.iscomplexobj(c) for c in self.terms.values())

    def flow_derivative(self, l: np.ndarray) -> "Polynomial":
        """Time derivative of ``p(lambda(t))`` when ``d lambda/dt = l lambda``."""
        l = np.asarray(l)
        terms: dict[Exponent, complex] = {}
        for exp, c in self.terms.items():
            for e_new, w in monomial_flow_derivative(exp, l).items():
                terms[e_new] = terms.get(e_new, 0) + c * w
        return Polynomial(self.nvars, terms)

    def gradient(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        g = np.zeros(self.nvars, dtype=complex if self._is_complex() else float)
        for exp, c in self.terms.items():
            for i, a in enumerate(exp):
                if a:
                    e = list(exp)
                    e[i] -= 1
                    g[i] += c * a * monomial_values(x, tuple(e))
        return g

    def substitute_affine(self, A: np.ndarray, b: np.ndarray | None = None) -> "Polynomial":
        """Polynomial in ``y`` obtained from ``p(A y + b)``."""
        A = np.asarray(A)
        m = A.shape[1]
        b = np.zeros(A.shape[0]) if b is None else np.asarray(b)
        ys = [Polynomial.linear(A[i], b[i]) for i in range(A.shape[0])]
        out = Polynomial.constant(m, 0.0)
        for exp, c in self.terms.items():
            term = Polynomial.constant(m, c)
            for i, a in enumerate(exp):
                if a:
                    term = term * ys[i] ** a
            out = out + term
        return out

    def to_json(self) -> dict:
        return {
            "nvars": self.nvars,
            "terms": [[list(e), float(np.real(c))] + ([float(np.imag(c))] if np.imag(c) else [])
                      for e, c in sorted(self.terms.items())],
        }

    @classmethod
    def from_json(cls, data: dict) -> "Polynomial":
        terms = {}
        for item in data["terms"]:
            exp, re = item[0], item[1]
            im = item[2] if len(item) > 2 else 0.0
            terms[tuple(exp)] = complex(re, im) if im else re
        return cls(data["nvars"], terms)

    def __repr__(self):
        if not self.terms:
            return "Polynomial(0)"
        parts = []
        for e in self.monomials():
            mono = "*".join(f"x{i + 1}" + (f"^{a}" if a > 1 else "") for i, a in enumerate(e) if a)
            parts.append(f"{self.terms[e]:g}" + (f"*{mono}" if mono else ""))
        return "Polynomial(" + " + ".join(parts) + ")"


def monomial_values(x: np.ndarray, exp: Exponent) -> np.ndarray:
    out = np.ones(x.shape[:-1], dtype=x.dtype if np.iscomplexobj(x) else float)
    for i, a in enumerate(exp):
        if a:
            out = out * x[..., i] ** a
    return out


def monomial_flow_derivative(exp: Exponent, l: np.ndarray) -> dict[Exponent, float]:
    """d/dt of ``lambda^exp`` under ``d lambda_i/dt = sum_j l[i, j] lambda_j``."""
    out: dict[Exponent, float] = {}
    for i, a in enumerate(exp):
        if not a:
            continue
        for j in range(len(exp)):
            if l[i, j] == 0:
                continue
            e = list(exp)
            e[i] -= 1
            e[j] += 1
            e = tuple(e)
            out[e] = out.get(e, 0.0) + a * l[i, j]
    return {e: w for e, w in out.items() if w != 0}
