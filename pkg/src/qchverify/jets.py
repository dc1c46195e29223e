"""Truncated multivariate Taylor arithmetic.

A :class:`Jet` stores the Taylor coefficients of a function of ``nvars``
variables up to total degree ``order``. Coefficient ``c[alpha]`` is the
partial derivative ``D^alpha f`` divided by ``alpha!``, so ``x*x`` at
``x = 3`` to order 2 is ``(9, 6, 1)``.

Coefficients are kept densely in graded-lexicographic order of the
multi-indices: degree 0, then the unit indices in variable order, then
degree 2 as produced by ``combinations_with_replacement`` and so on.
"""

from __future__ import annotations

import itertools
import math
from functools import lru_cache

import numpy as np

from .errors import ContractError, DomainError, SingularEvaluationError

MAX_VARS = 4
MAX_ORDER = 3

__all__ = [
    "Jet",
    "Layout",
    "layout",
    "seed_variable",
    "constant",
    "jet_arith",
    "jet_func",
    "sqrt",
    "log",
    "exp",
    "sin",
    "cos",
    "pow_real",
    "finite_difference_oracle",
]


class Layout:
    """Index bookkeeping for jets with a given number of variables and order."""

    def __init__(self, nvars: int, order: int):
        self.nvars = nvars
        self.order = order
        multi = []
        for deg in range(order + 1):
            for combo in itertools.combinations_with_replacement(range(nvars), deg):
                alpha = [0] * nvars
                for v in combo:
                    alpha[v] += 1
                multi.append(tuple(alpha))
        self.multi = tuple(multi)
        self.index = {alpha: i for i, alpha in enumerate(multi)}
        self.size = len(multi)
        self.degree = np.array([sum(a) for a in multi])
        self.factorial = np.array([math.prod(math.factorial(k) for k in a) for a in multi], dtype=float)

        ii, jj, kk = [], [], []
        for i, a in enumerate(multi):
            for j, b in enumerate(multi):
                if sum(a) + sum(b) > order:
                    continue
                ii.append(i)
                jj.append(j)
                kk.append(self.index[tuple(x + y for x, y in zip(a, b))])
        self._mul_i = np.array(ii, dtype=np.intp)
        self._mul_j = np.array(jj, dtype=np.intp)
        self._mul_k = np.array(kk, dtype=np.intp)

    def unit(self, var: int) -> int:
        alpha = [0] * self.nvars
        alpha[var] = 1
        return self.index[tuple(alpha)]

    def pair(self, i: int, j: int) -> int:
        alpha = [0] * self.nvars
        alpha[i] += 1
        alpha[j] += 1
        return self.index[tuple(alpha)]

    def multiply(self, a: np.ndarray, b: np.ndarray) -> np.ndarray:
        prod = a[self._mul_i] * b[self._mul_j]
        if np.iscomplexobj(prod):
            return (np.bincount(self._mul_k, weights=prod.real, minlength=self.size)
                    + 1j * np.bincount(self._mul_k, weights=prod.imag, minlength=self.size))
        return np.bincount(self._mul_k, weights=prod, minlength=self.size)


@lru_cache(maxsize=None)
def layout(nvars: int, order: int) -> Layout:
    if not 1 <= nvars <= MAX_VARS:
        raise ContractError(f"nvars must be in [1, {MAX_VARS}], got {nvars}")
    if not 0 <= order <= MAX_ORDER:
        raise ContractError(f"order must be in [0, {MAX_ORDER}], got {order}")
    return Layout(nvars, order)


class Jet:
    """Truncated Taylor expansion of a scalar at a point."""

    __slots__ = ("coeffs", "nvars", "order")
    __array_priority__ = 1000

    def __init__(self, coeffs, nvars: int, order: int):
        lay = layout(nvars, order)
        coeffs = np.asarray(coeffs)
        if coeffs.shape != (lay.size,):
            raise ContractError(f"expected {lay.size} coefficients, got shape {coeffs.shape}")
        if not np.iscomplexobj(coeffs):
            coeffs = coeffs.astype(float, copy=False)
        self.coeffs = coeffs
        self.nvars = nvars
        self.order = order

    @property
    def layout(self) -> Layout:
        return layout(self.nvars, self.order)

    @property
    def value(self):
        return self.coeffs[0]

    def __repr__(self):
        terms = ", ".join(f"{a}: {c:.6g}" for a, c in zip(self.layout.multi, self.coeffs) if c != 0)
        return f"Jet(order={self.order}, nvars={self.nvars}, {{{terms}}})"

    # -- derivative access -------------------------------------------------
    def coefficient(self, alpha) -> float:
        return self.coeffs[self.layout.index[tuple(alpha)]]

    def derivative(self, alpha):
        """Partial derivative ``D^alpha`` at the expansion point."""
        lay = self.layout
        i = lay.index[tuple(alpha)]
        return self.coeffs[i] * lay.factorial[i]

    def gradient(self) -> np.ndarray:
        if self.order < 1:
            raise ContractError("gradient needs a jet of order >= 1")
        return self.coeffs[1:1 + self.nvars].copy()

    def hessian(self) -> np.ndarray:
        if self.order < 2:
            raise ContractError("hessian needs a jet of order >= 2")
        lay = self.layout
        n = self.nvars
        h = np.empty((n, n), dtype=self.coeffs.dtype)
        for i in range(n):
            for j in range(i, n):
                c = self.coeffs[lay.pair(i, j)]
                h[i, j] = h[j, i] = 2 * c if i == j else c
        return h

    def diff(self, var: int) -> "Jet":
        """Jet of the partial derivative in ``var``; the order drops by one."""
        if self.order < 1:
            raise ContractError("cannot differentiate an order-0 jet")
        lay = self.layout
        out_lay = layout(self.nvars, self.order - 1)
        out = np.zeros(out_lay.size, dtype=self.coeffs.dtype)
        for k, alpha in enumerate(out_lay.multi):
            beta = list(alpha)
            beta[var] += 1
            out[k] = (alpha[var] + 1) * self.coeffs[lay.index[tuple(beta)]]
        return Jet(out, self.nvars, self.order - 1)

    def truncate(self, order: int) -> "Jet":
        if order == self.order:
            return self
        if order > self.order:
            raise ContractError("cannot raise the order of a jet")
        return Jet(self.coeffs[:layout(self.nvars, order).size].copy(), self.nvars, order)

    # -- arithmetic --------------------------------------------------------
    def _coerce(self, other) -> "Jet":
        if isinstance(other, Jet):
            if other.nvars != self.nvars or other.order != self.order:
                raise ContractError(
                    f"jet mismatch: ({self.nvars}, {self.order}) vs ({other.nvars}, {other.order})")
            return other
        if isinstance(other, (int, float, complex, np.number)):
            return constant(other, self.nvars, self.order)
        return NotImplemented

    def __add__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        return Jet(self.coeffs + other.coeffs, self.nvars, self.order)

    __radd__ = __add__

    def __sub__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        return Jet(self.coeffs - other.coeffs, self.nvars, self.order)

    def __rsub__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        return Jet(other.coeffs - self.coeffs, self.nvars, self.order)

    def __neg__(self):
        return Jet(-self.coeffs, self.nvars, self.order)

    def __pos__(self):
        return self

    def __mul__(self, other):
        if isinstance(other, (int, float, complex, np.number)):
            return Jet(self.coeffs * other, self.nvars, self.order)
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        return Jet(self.layout.multiply(self.coeffs, other.coeffs), self.nvars, self.order)

    __rmul__ = __mul__

    def __truediv__(self, other):
        if isinstance(other, (int, float, complex, np.number)):
            if other == 0:
                raise SingularEvaluationError("division by zero constant")
            return Jet(self.coeffs / other, self.nvars, self.order)
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        return self * other.reciprocal()

    def __rtruediv__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        return other * self.reciprocal()

    def __pow__(self, n):
        if isinstance(n, (int, np.integer)):
            if n < 0:
                return (self ** (-n)).reciprocal()
            result = constant(1.0, self.nvars, self.order)
            base = self
            while n:
                if n & 1:
                    result = result * base
                n >>= 1
                if n:
                    base = base * base
            return result
        return pow_real(self, float(n))

    def reciprocal(self) -> "Jet":
        b0 = self.coeffs[0]
        if b0 == 0 or not np.isfinite(b0):
            raise SingularEvaluationError("division by a jet with zero value part")
        # 1/(b0 (1 + h)) = (1/b0) * sum (-h)^n, h nilpotent
        return _compose(self, [(-1) ** n / b0 ** (n + 1) for n in range(self.order + 1)])

    def is_close(self, other: "Jet", rtol=1e-12, atol=0.0) -> bool:
        return bool(np.allclose(self.coeffs, other.coeffs, rtol=rtol, atol=atol))


def constant(value, nvars: int, order: int) -> Jet:
    lay = layout(nvars, order)
    dtype = complex if isinstance(value, complex) else float
    c = np.zeros(lay.size, dtype=dtype)
    c[0] = value
    return Jet(c, nvars, order)


def seed_variable(value: float, var_index: int, nvars: int, order: int) -> Jet:
    """Jet of the coordinate function ``x[var_index]`` evaluated at ``value``."""
    if not 1 <= order <= MAX_ORDER:
        raise ContractError(f"order must be in [1, {MAX_ORDER}], got {order}")
    if not 0 <= var_index < nvars:
        raise ContractError(f"var_index {var_index} out of range for {nvars} variables")
    lay = layout(nvars, order)
    c = np.zeros(lay.size)
    c[0] = value
    c[lay.unit(var_index)] = 1.0
    return Jet(c, nvars, order)


def _compose(a: Jet, taylor) -> Jet:
    """Evaluate ``sum taylor[n] * (a - a0)^n``: univariate composition."""
    h = Jet(a.coeffs.copy(), a.nvars, a.order)
    h.coeffs[0] = 0
    result = constant(taylor[0], a.nvars, a.order)
    power = None
    for n in range(1, a.order + 1):
        power = h if power is None else power * h
        result = result + power * taylor[n]
    return result


def _real_value(a: Jet, name: str) -> float:
    v = a.coeffs[0]
    if np.iscomplexobj(a.coeffs) and v.imag != 0:
        raise DomainError(f"{name} of a complex jet is not supported")
    return float(np.real(v))


def pow_real(a: Jet, p: float) -> Jet:
    x = _real_value(a, "pow")
    if x <= 0:
        raise DomainError(f"real power of non-positive value {x}")
    coeffs = []
    falling = 1.0
    for n in range(a.order + 1):
        coeffs.append(falling * x ** (p - n) / math.factorial(n))
        falling *= p - n
    return _compose(a, coeffs)


def sqrt(a: Jet) -> Jet:
    x = _real_value(a, "sqrt")
    if x <= 0:
        raise DomainError(f"sqrt of non-positive value {x}")
    return pow_real(a, 0.5)


def log(a: Jet) -> Jet:
    x = _real_value(a, "ln")
    if x <= 0:
        raise DomainError(f"ln of non-positive value {x}")
    coeffs = [math.log(x)] + [(-1) ** (n + 1) / (n * x ** n) for n in range(1, a.order + 1)]
    return _compose(a, coeffs)


def exp(a: Jet) -> Jet:
    x = _real_value(a, "exp")
    e = math.exp(x)
    return _compose(a, [e / math.factorial(n) for n in range(a.order + 1)])


def sin(a: Jet) -> Jet:
    x = _real_value(a, "sin")
    cycle = (math.sin(x), math.cos(x), -math.sin(x), -math.cos(x))
    return _compose(a, [cycle[n % 4] / math.factorial(n) for n in range(a.order + 1)])


def cos(a: Jet) -> Jet:
    x = _real_value(a, "cos")
    cycle = (math.cos(x), -math.sin(x), -math.cos(x), math.sin(x))
    return _compose(a, [cycle[n % 4] / math.factorial(n) for n in range(a.order + 1)])


_ARITH = {
    "add": lambda a, b: a + b,
    "sub": lambda a, b: a - b,
    "mul": lambda a, b: a * b,
    "div": lambda a, b: a / b,
}

_FUNCS = {"sqrt": sqrt, "ln": log, "exp": exp, "sin": sin, "cos": cos}


def jet_arith(kind: str, a: Jet, b: Jet) -> Jet:
    try:
        op = _ARITH[kind]
    except KeyError:
        raise ContractError(f"unknown arithmetic kind {kind!r}") from None
    if a.nvars != b.nvars or a.order != b.order:
        raise ContractError("jet_arith needs matching nvars and order")
    return op(a, b)


def jet_func(kind: str, a: Jet, exponent: float | None = None) -> Jet:
    if kind == "pow_real":
        if exponent is None:
            raise ContractError("pow_real needs an exponent")
        return pow_real(a, exponent)
    try:
        return _FUNCS[kind](a)
    except KeyError:
        raise ContractError(f"unknown function kind {kind!r}") from None


def finite_difference_oracle(f, point, h: float = 1e-4):
    """Central-difference value, gradient and Hessian of a scalar function.

    Independent of the jet machinery; meant for tests. Any
    :class:`DomainError` raised while evaluating the stencil propagates.

    Returns
    -------
    value : float
    gradient : ndarray (n,)
    hessian : ndarray (n, n)
    """
    x = np.asarray(point, dtype=float)
    n = x.size
    try:
        f0 = float(f(x))
        grad = np.empty(n)
        hess = np.empty((n, n))
        e = np.eye(n) * h
        for i in range(n):
            fp, fm = float(f(x + e[i])), float(f(x - e[i]))
            grad[i] = (fp - fm) / (2 * h)
            hess[i, i] = (fp - 2 * f0 + fm) / h ** 2
            for j in range(i):
                fpp = float(f(x + e[i] + e[j]))
                fpm = float(f(x + e[i] - e[j]))
                fmp = float(f(x - e[i] + e[j]))
                fmm = float(f(x - e[i] - e[j]))
                hess[i, j] = hess[j, i] = (fpp - fpm - fmp + fmm) / (4 * h * h)
    except (ValueError, ZeroDivisionError) as exc:
        if isinstance(exc, DomainError):
            raise
        raise DomainError(f"finite-difference stencil left the domain: {exc}") from exc
    return f0, grad, hess
