"""Order-2 truncated Taylor arithmetic.

A :class:`Jet` carries a value, its gradient and its Hessian with respect to a
fixed set of independent variables. Arithmetic propagates all three exactly
(up to rounding); nothing beyond second order is kept.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from fraccurv.errors import DomainError

__all__ = ["Jet", "Jet2"]


class Jet:
    __slots__ = ("v", "g", "h")

    def __init__(self, v: float, g: np.ndarray, h: np.ndarray):
        self.v = float(v)
        self.g = g
        self.h = h

    @classmethod
    def constant(cls, value: float, nvars: int) -> "Jet":
        return cls(value, np.zeros(nvars), np.zeros((nvars, nvars)))

    @classmethod
    def variable(cls, value: float, index: int, nvars: int) -> "Jet":
        g = np.zeros(nvars)
        g[index] = 1.0
        return cls(value, g, np.zeros((nvars, nvars)))

    @property
    def nvars(self) -> int:
        return self.g.shape[0]

    def is_constant(self) -> bool:
        return not (self.g.any() or self.h.any())

    def __repr__(self) -> str:
        return f"Jet(v={self.v!r}, g={self.g.tolist()!r}, h={self.h.tolist()!r})"

    def _lift(self, other) -> "Jet":
        if isinstance(other, Jet):
            return other
        return Jet.constant(other, self.nvars)

    def __add__(self, other) -> "Jet":
        other = self._lift(other)
        return Jet(self.v + other.v, self.g + other.g, self.h + other.h)

    __radd__ = __add__

    def __neg__(self) -> "Jet":
        return Jet(-self.v, -self.g, -self.h)

    def __sub__(self, other) -> "Jet":
        other = self._lift(other)
        return Jet(self.v - other.v, self.g - other.g, self.h - other.h)

    def __rsub__(self, other) -> "Jet":
        return self._lift(other) - self

    def __mul__(self, other) -> "Jet":
        other = self._lift(other)
        cross = np.outer(self.g, other.g)
        return Jet(
            self.v * other.v,
            self.g * other.v + self.v * other.g,
            self.h * other.v + self.v * other.h + cross + cross.T,
        )

    __rmul__ = __mul__

    def reciprocal(self) -> "Jet":
        if self.v == 0.0:
            raise DomainError("division by zero")
        inv = 1.0 / self.v
        return self.compose(inv, -inv * inv, 2.0 * inv * inv * inv)

    def __truediv__(self, other) -> "Jet":
        other = self._lift(other)
        if other.is_constant():
            if other.v == 0.0:
                raise DomainError("division by zero")
            return Jet(self.v / other.v, self.g / other.v, self.h / other.v)
        return self * other.reciprocal()

    def __rtruediv__(self, other) -> "Jet":
        return self._lift(other) / self

    def compose(self, f0: float, f1: float, f2: float) -> "Jet":
        """Apply a scalar function with value ``f0`` and derivatives ``f1``, ``f2`` at ``self.v``."""
        return Jet(f0, f1 * self.g, f1 * self.h + f2 * np.outer(self.g, self.g))

    def exp(self) -> "Jet":
        try:
            e = math.exp(self.v)
        except OverflowError:
            raise DomainError(f"exp({self.v!r}) overflows") from None
        return self.compose(e, e, e)

    def log(self) -> "Jet":
        if self.v <= 0.0:
            raise DomainError(f"ln of non-positive value {self.v!r}")
        inv = 1.0 / self.v
        return self.compose(math.log(self.v), inv, -inv * inv)

    def sin(self) -> "Jet":
        s, c = math.sin(self.v), math.cos(self.v)
        return self.compose(s, c, -s)

    def cos(self) -> "Jet":
        s, c = math.sin(self.v), math.cos(self.v)
        return self.compose(c, -s, -c)

    def powc(self, c: float) -> "Jet":
        """Raise to a constant real power."""
        x = self.v
        if c == 0.0:
            return Jet.constant(1.0, self.nvars)
        if float(c).is_integer():
            k = int(c)
            if x == 0.0:
                if k < 0:
                    raise DomainError("zero raised to a negative power")
                f0 = 0.0
                f1 = 1.0 if k == 1 else 0.0
                f2 = 2.0 if k == 2 else 0.0
                return self.compose(f0, f1, f2)
            f0 = x**k
            f1 = k * x ** (k - 1)
            f2 = k * (k - 1) * x ** (k - 2)
            return self.compose(f0, f1, f2)
        if x <= 0.0:
            raise DomainError(f"non-integer power {c!r} of non-positive value {x!r}")
        f0 = x**c
        return self.compose(f0, c * f0 / x, c * (c - 1.0) * f0 / (x * x))

    def __pow__(self, other) -> "Jet":
        if isinstance(other, Jet):
            if other.is_constant():
                return self.powc(other.v)
            if self.v <= 0.0:
                raise DomainError(
                    f"variable exponent requires a positive base, got {self.v!r}"
                )
            return (other * self.log()).exp()
        return self.powc(float(other))


@dataclass(frozen=True)
class Jet2:
    """Value and first two derivatives of a function of one variable."""

    v: float
    d1: float
    d2: float

    @classmethod
    def from_jet(cls, jet: Jet) -> "Jet2":
        if jet.nvars != 1:
            raise ValueError("Jet2 requires a jet in exactly one variable")
        return cls(jet.v, float(jet.g[0]), float(jet.h[0, 0]))

    def to_jet(self) -> Jet:
        return Jet(self.v, np.array([self.d1]), np.array([[self.d2]]))
