"""Sparse multivariate polynomials in a monomial basis.

A monomial is an exponent tuple, one non-negative integer per variable.
A polynomial maps monomials to float coefficients; terms whose coefficient
falls below ``COEFF_TOL`` in absolute value are dropped at construction, so
two polynomials are equal iff their normalized term maps are equal.

Monomials are ordered graded-lexicographically: first by total degree,
then by the exponent tuple itself.  Every iteration, serialization, and
basis enumeration in this package uses that order, which keeps downstream
matrix layouts deterministic.
"""

from __future__ import annotations

from itertools import combinations_with_replacement
from typing import Callable, Iterable, Mapping, Sequence

import numpy as np

# Coefficients below this are treated as exact zeros (well under solver tolerance).
COEFF_TOL = 1e-12

Monomial = tuple[int, ...]


def grlex_key(mono: Monomial) -> tuple[int, Monomial]:
    return (sum(mono), mono)


def monomials_up_to(nvars: int, degree: int) -> list[Monomial]:
    """All exponent tuples with total degree <= degree, in graded-lex order."""
    if degree < 0:
        raise ValueError("degree must be >= 0")
    out: list[Monomial] = []
    for d in range(degree + 1):
        level = []
        for combo in combinations_with_replacement(range(nvars), d):
            exp = [0] * nvars
            for idx in combo:
                exp[idx] += 1
            level.append(tuple(exp))
        out.extend(sorted(level))
    return out


class Polynomial:
    """Immutable sparse polynomial over a fixed number of variables."""

    __slots__ = ("nvars", "terms")

    def __init__(self, nvars: int, terms: Mapping[Monomial, float] | None = None):
        if nvars < 0:
            raise ValueError("nvars must be >= 0")
        clean: dict[Monomial, float] = {}
        if terms:
            for mono, coeff in terms.items():
                mono = tuple(int(e) for e in mono)
                if len(mono) != nvars or any(e < 0 for e in mono):
                    raise ValueError(f"bad monomial {mono} for nvars={nvars}")
                c = float(coeff)
                if abs(c) > COEFF_TOL:
                    clean[mono] = clean.get(mono, 0.0) + c
            clean = {m: c for m, c in clean.items() if abs(c) > COEFF_TOL}
        object.__setattr__(self, "nvars", nvars)
        object.__setattr__(self, "terms", clean)

    def __setattr__(self, name, value):
        raise AttributeError("Polynomial is immutable")

    # -- constructors ------------------------------------------------------

    @staticmethod
    def zero(nvars: int) -> "Polynomial":
        return Polynomial(nvars, {})

    @staticmethod
    def constant(nvars: int, value: float) -> "Polynomial":
        return Polynomial(nvars, {(0,) * nvars: value})

    @staticmethod
    def variable(nvars: int, index: int) -> "Polynomial":
        if not 0 <= index < nvars:
            raise ValueError(f"variable index {index} out of range for nvars={nvars}")
        exp = [0] * nvars
        exp[index] = 1
        return Polynomial(nvars, {tuple(exp): 1.0})

    # -- ring operations ---------------------------------------------------

    def _check_compatible(self, other: "Polynomial") -> None:
        if self.nvars != other.nvars:
            raise ValueError(f"variable count mismatch: {self.nvars} vs {other.nvars}")

    def __add__(self, other):
        if isinstance(other, (int, float)):
            other = Polynomial.constant(self.nvars, other)
        self._check_compatible(other)
        terms = dict(self.terms)
        for mono, coeff in other.terms.items():
            terms[mono] = terms.get(mono, 0.0) + coeff
        return Polynomial(self.nvars, terms)

    __radd__ = __add__

    def __neg__(self):
        return Polynomial(self.nvars, {m: -c for m, c in self.terms.items()})

    def __sub__(self, other):
        if isinstance(other, (int, float)):
            other = Polynomial.constant(self.nvars, other)
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if isinstance(other, (int, float)):
            return self.scale(other)
        self._check_compatible(other)
        terms: dict[Monomial, float] = {}
        for m1, c1 in self.terms.items():
            for m2, c2 in other.terms.items():
                prod = tuple(a + b for a, b in zip(m1, m2))
                terms[prod] = terms.get(prod, 0.0) + c1 * c2
        return Polynomial(self.nvars, terms)

    __rmul__ = __mul__

    def scale(self, factor: float) -> "Polynomial":
        return Polynomial(self.nvars, {m: c * factor for m, c in self.terms.items()})

    def __pow__(self, exponent: int) -> "Polynomial":
        if not isinstance(exponent, int) or exponent < 0:
            raise ValueError("exponent must be a non-negative integer")
        result = Polynomial.constant(self.nvars, 1.0)
        base = self
        e = exponent
        while e:
            if e & 1:
                result = result * base
            base = base * base
            e >>= 1
        return result

    def __eq__(self, other):
        if not isinstance(other, Polynomial):
            return NotImplemented
        return self.nvars == other.nvars and self.terms == other.terms

    def __hash__(self):
        return hash((self.nvars, frozenset(self.terms.items())))

    # -- queries -----------------------------------------------------------

    def degree(self) -> int:
        """Total degree; the zero polynomial has degree 0."""
        if not self.terms:
            return 0
        return max(sum(m) for m in self.terms)

    def coefficient(self, mono: Monomial) -> float:
        return self.terms.get(tuple(mono), 0.0)

    def sorted_terms(self) -> list[tuple[Monomial, float]]:
        return sorted(self.terms.items(), key=lambda kv: grlex_key(kv[0]))

    def is_zero(self) -> bool:
        return not self.terms

    def max_abs_coeff(self) -> float:
        return max((abs(c) for c in self.terms.values()), default=0.0)

    def truncate(self, degree: int) -> "Polynomial":
        """Drop all terms of total degree greater than ``degree``."""
        return Polynomial(self.nvars, {m: c for m, c in self.terms.items() if sum(m) <= degree})

    # -- evaluation and substitution ----------------------------------------

    def evaluate(self, point: Sequence[float]) -> float:
        if len(point) != self.nvars:
            raise ValueError(f"point has {len(point)} coordinates, expected {self.nvars}")
        total = 0.0
        for mono, coeff in self.terms.items():
            term = coeff
            for exp, x in zip(mono, point):
                if exp:
                    term *= float(x) ** exp
            total += term
        return total

    def evaluate_many(self, points: np.ndarray) -> np.ndarray:
        """Vectorized evaluation at an (n, nvars) array of points."""
        pts = np.asarray(points, dtype=float)
        if pts.ndim == 1:
            pts = pts[None, :]
        if pts.shape[1] != self.nvars:
            raise ValueError(f"points have {pts.shape[1]} coordinates, expected {self.nvars}")
        out = np.zeros(pts.shape[0])
        for mono, coeff in self.terms.items():
            term = np.full(pts.shape[0], coeff)
            for i, exp in enumerate(mono):
                if exp:
                    term = term * pts[:, i] ** exp
            out += term
        return out

    def substitute(self, bindings: Mapping[int, "Polynomial"]) -> "Polynomial":
        """Replace variables by polynomials.

        Unbound variables map to themselves.  All bound polynomials must share
        one ambient variable count, which becomes the result's nvars.  Satisfies
        evaluate(substitute(p, b), x) == evaluate(p, [evaluate(b_i, x), ...]).
        """
        if not bindings:
            return self
        target_nvars = None
        for idx, repl in bindings.items():
            if not 0 <= idx < self.nvars:
                raise ValueError(f"bound variable {idx} out of range for nvars={self.nvars}")
            if target_nvars is None:
                target_nvars = repl.nvars
            elif repl.nvars != target_nvars:
                raise ValueError("inconsistent ambient dimensions in substitution")
        assert target_nvars is not None
        if target_nvars != self.nvars:
            # Identity images of unbound variables must exist in the target space.
            if any(i not in bindings for i in range(self.nvars)) and target_nvars < self.nvars:
                raise ValueError("unbound variables cannot map into a smaller ambient space")
        images = [
            bindings.get(i, Polynomial.variable(target_nvars, i) if i < target_nvars else None)
            for i in range(self.nvars)
        ]
        if any(img is None for img in images):
            raise ValueError("unbound variable has no image in the target space")

        # Cache variable powers to avoid re-multiplying inside the term loop.
        power_cache: list[dict[int, Polynomial]] = [dict() for _ in range(self.nvars)]

        def var_power(i: int, e: int) -> Polynomial:
            cache = power_cache[i]
            if e not in cache:
                cache[e] = images[i] ** e
            return cache[e]

        result = Polynomial.zero(target_nvars)
        for mono, coeff in self.terms.items():
            term = Polynomial.constant(target_nvars, coeff)
            for i, exp in enumerate(mono):
                if exp:
                    term = term * var_power(i, exp)
            result = result + term
        return result

    # -- text form -----------------------------------------------------------

    def to_text(self) -> str:
        """Serialize as ``coeff * x0^e0 x1^e1 ; ...`` in graded-lex term order."""
        if not self.terms:
            return "0"
        parts = []
        for mono, coeff in self.sorted_terms():
            factors = " ".join(f"x{i}^{e}" for i, e in enumerate(mono) if e)
            parts.append(f"{coeff:.17g} * {factors}" if factors else f"{coeff:.17g}")
        return " ; ".join(parts)

    @staticmethod
    def from_text(text: str, nvars: int) -> "Polynomial":
        text = text.strip()
        if text == "0" or not text:
            return Polynomial.zero(nvars)
        terms: dict[Monomial, float] = {}
        for part in text.split(";"):
            part = part.strip()
            if not part:
                continue
            if "*" in part:
                coeff_s, factors_s = part.split("*", 1)
                exp = [0] * nvars
                for fac in factors_s.split():
                    name, e = fac.split("^")
                    exp[int(name[1:])] += int(e)
                mono = tuple(exp)
            else:
                coeff_s = part
                mono = (0,) * nvars
            terms[mono] = terms.get(mono, 0.0) + float(coeff_s)
        return Polynomial(nvars, terms)

    def __repr__(self):
        return f"Polynomial({self.nvars}, {self.to_text()!r})"


def arith(p: Polynomial, q: Polynomial | float, op: str) -> Polynomial:
    """Named ring operations: add, sub, mul take polynomials; scale takes a scalar."""
    if op == "scale":
        if isinstance(q, Polynomial):
            raise TypeError("scale expects a scalar second operand")
        return p.scale(float(q))
    if not isinstance(q, Polynomial):
        raise TypeError(f"{op} expects a Polynomial second operand")
    if op == "add":
        return p + q
    if op == "sub":
        return p - q
    if op == "mul":
        return p * q
    raise ValueError(f"unknown op {op!r}")


def evaluate(p: Polynomial, point: Sequence[float]) -> float:
    return p.evaluate(point)


def substitute(p: Polynomial, bindings: Mapping[int, Polynomial]) -> Polynomial:
    return p.substitute(bindings)
