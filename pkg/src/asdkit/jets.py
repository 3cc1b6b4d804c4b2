"""Second-order forward-mode jets.

A :class:`Jet2` carries a value together with its exact gradient and Hessian
with respect to the chart coordinates. :class:`ArrayJet` does the same for
whole numpy arrays (metric components, frames) and supports the handful of
bilinear operations the curvature code needs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

SINGULAR_TOL = 1e-12


class DomainError(ValueError):
    """Point lies outside the declared chart box."""


class SingularPointError(ValueError):
    """Evaluation hit a singular locus (tiny denominator, log of non-positive, ...)."""


class Jet2:
    __slots__ = ("value", "grad", "hess")

    def __init__(self, value: float, grad: np.ndarray, hess: np.ndarray):
        self.value = float(value)
        self.grad = grad
        self.hess = hess

    @classmethod
    def constant(cls, c: float, n: int) -> "Jet2":
        return cls(c, np.zeros(n), np.zeros((n, n)))

    @classmethod
    def variable(cls, x: float, i: int, n: int) -> "Jet2":
        g = np.zeros(n)
        g[i] = 1.0
        return cls(x, g, np.zeros((n, n)))

    @property
    def n(self) -> int:
        return self.grad.shape[0]

    def _lift(self, other) -> "Jet2":
        if isinstance(other, Jet2):
            return other
        return Jet2.constant(other, self.n)

    def __add__(self, other):
        if not isinstance(other, Jet2):
            return Jet2(self.value + other, self.grad, self.hess)
        return Jet2(self.value + other.value, self.grad + other.grad, self.hess + other.hess)

    __radd__ = __add__

    def __neg__(self):
        return Jet2(-self.value, -self.grad, -self.hess)

    def __sub__(self, other):
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if not isinstance(other, Jet2):
            return Jet2(self.value * other, self.grad * other, self.hess * other)
        a, b = self, other
        cross = np.outer(a.grad, b.grad)
        return Jet2(
            a.value * b.value,
            a.value * b.grad + b.value * a.grad,
            a.value * b.hess + b.value * a.hess + (cross + cross.T),
        )

    __rmul__ = __mul__

    def __truediv__(self, other):
        if not isinstance(other, Jet2):
            if abs(other) < SINGULAR_TOL:
                raise SingularPointError("division by a vanishing constant")
            return self * (1.0 / other)
        return self * reciprocal(other)

    def __rtruediv__(self, other):
        return reciprocal(self) * other

    def __pow__(self, k):
        if isinstance(k, Jet2):
            return exp(k * log(self))
        k = float(k)
        if k == int(k) and k >= 0:
            out = Jet2.constant(1.0, self.n)
            for _ in range(int(k)):
                out = out * self
            return out
        v = self.value
        if v <= 0.0 and k != int(k):
            raise SingularPointError(f"non-integer power of non-positive base {v}")
        if abs(v) < SINGULAR_TOL:
            raise SingularPointError("negative power of vanishing base")
        return _chain(self, v**k, k * v ** (k - 1), k * (k - 1) * v ** (k - 2))

    def __rpow__(self, base):
        return exp(self * math.log(base))

    def __repr__(self):
        return f"Jet2(value={self.value!r}, grad={self.grad!r})"


def _chain(u: Jet2, f0: float, f1: float, f2: float) -> Jet2:
    return Jet2(f0, f1 * u.grad, f1 * u.hess + f2 * np.outer(u.grad, u.grad))


def reciprocal(u: Jet2) -> Jet2:
    v = u.value
    if abs(v) < SINGULAR_TOL:
        raise SingularPointError(f"denominator {v:.3e} below {SINGULAR_TOL}")
    return _chain(u, 1.0 / v, -1.0 / v**2, 2.0 / v**3)


def exp(u):
    if not isinstance(u, Jet2):
        return math.exp(u)
    e = math.exp(u.value)
    return _chain(u, e, e, e)


def log(u):
    v = u.value if isinstance(u, Jet2) else u
    if v <= SINGULAR_TOL:
        raise SingularPointError(f"log of {v:.3e}")
    if not isinstance(u, Jet2):
        return math.log(u)
    return _chain(u, math.log(v), 1.0 / v, -1.0 / v**2)


def sqrt(u):
    v = u.value if isinstance(u, Jet2) else u
    if v <= SINGULAR_TOL:
        raise SingularPointError(f"sqrt of {v:.3e}")
    if not isinstance(u, Jet2):
        return math.sqrt(u)
    s = math.sqrt(v)
    return _chain(u, s, 0.5 / s, -0.25 / (s * v))


def sin(u):
    if not isinstance(u, Jet2):
        return math.sin(u)
    s, c = math.sin(u.value), math.cos(u.value)
    return _chain(u, s, c, -s)


def cos(u):
    if not isinstance(u, Jet2):
        return math.cos(u)
    s, c = math.sin(u.value), math.cos(u.value)
    return _chain(u, c, -s, -c)


# ---------------------------------------------------------------------------
# Array-valued jets
# ---------------------------------------------------------------------------

_FREE = "pqrstuvwxyz"


@dataclass(frozen=True)
class ArrayJet:
    """Array ``val`` with first derivatives ``d1[..., i]`` and optionally ``d2[..., i, j]``."""

    val: np.ndarray
    d1: np.ndarray
    d2: Optional[np.ndarray] = None

    @property
    def order(self) -> int:
        return 1 if self.d2 is None else 2

    @classmethod
    def stack(cls, jets, shape) -> "ArrayJet":
        flat = list(jets)
        n = flat[0].n
        val = np.array([j.value for j in flat]).reshape(shape)
        d1 = np.array([j.grad for j in flat]).reshape(tuple(shape) + (n,))
        d2 = np.array([j.hess for j in flat]).reshape(tuple(shape) + (n, n))
        return cls(val, d1, d2)

    @classmethod
    def constant(cls, val, n: int) -> "ArrayJet":
        val = np.asarray(val, dtype=float)
        return cls(val, np.zeros(val.shape + (n,)), np.zeros(val.shape + (n, n)))

    def derivative(self) -> "ArrayJet":
        """The jet of the gradient, one order lower; derivative axis is last."""
        if self.d2 is None:
            raise ValueError("second derivatives unavailable")
        return ArrayJet(self.d1, self.d2, None)

    def __add__(self, other: "ArrayJet") -> "ArrayJet":
        d2 = None if self.d2 is None or other.d2 is None else self.d2 + other.d2
        return ArrayJet(self.val + other.val, self.d1 + other.d1, d2)

    def __sub__(self, other: "ArrayJet") -> "ArrayJet":
        return self + other.scale(-1.0)

    def scale(self, c: float) -> "ArrayJet":
        return ArrayJet(self.val * c, self.d1 * c, None if self.d2 is None else self.d2 * c)

    def take(self, index) -> "ArrayJet":
        return ArrayJet(self.val[index], self.d1[index], None if self.d2 is None else self.d2[index])

    def transpose(self, axes) -> "ArrayJet":
        k = len(axes)
        ax1 = tuple(axes) + (k,)
        d2 = None if self.d2 is None else self.d2.transpose(tuple(axes) + (k, k + 1))
        return ArrayJet(self.val.transpose(axes), self.d1.transpose(ax1), d2)

    def inv(self) -> "ArrayJet":
        """Matrix inverse with derivatives (last two value axes)."""
        n_val = self.val
        if abs(np.linalg.det(n_val)) < SINGULAR_TOL:
            raise SingularPointError("singular matrix")
        N = np.linalg.inv(n_val)
        dN = -np.einsum("ab,bci,cd->adi", N, self.d1, N)
        d2 = None
        if self.d2 is not None:
            t = np.einsum("abj,bci,cd->adij", dN, self.d1, N)
            d2 = -(
                t
                + np.einsum("ab,bcij,cd->adij", N, self.d2, N)
                + np.einsum("ab,bci,cdj->adij", N, self.d1, dN)
            )
        return ArrayJet(N, dN, d2)


def jeinsum(spec: str, a: ArrayJet, b: ArrayJet) -> ArrayJet:
    """Bilinear ``np.einsum`` with the product rule applied to the derivative axes."""
    lhs, out = spec.split("->")
    sa, sb = lhs.split(",")
    used = set(spec)
    i, j = [c for c in _FREE if c not in used][:2]
    val = np.einsum(spec, a.val, b.val)
    d1 = np.einsum(f"{sa}{i},{sb}->{out}{i}", a.d1, b.val) + np.einsum(
        f"{sa},{sb}{i}->{out}{i}", a.val, b.d1
    )
    d2 = None
    if a.d2 is not None and b.d2 is not None:
        cross = np.einsum(f"{sa}{i},{sb}{j}->{out}{i}{j}", a.d1, b.d1)
        d2 = (
            np.einsum(f"{sa}{i}{j},{sb}->{out}{i}{j}", a.d2, b.val)
            + np.einsum(f"{sa},{sb}{i}{j}->{out}{i}{j}", a.val, b.d2)
            + cross
            + np.swapaxes(cross, -1, -2)
        )
    return ArrayJet(val, d1, d2)


def jeinsum_const(spec: str, c: np.ndarray, a: ArrayJet) -> ArrayJet:
    """Contract a constant array ``c`` with a jet (``c`` is the first operand)."""
    lhs, out = spec.split("->")
    sc, sa = lhs.split(",")
    used = set(spec)
    i, j = [x for x in _FREE if x not in used][:2]
    d2 = None if a.d2 is None else np.einsum(f"{sc},{sa}{i}{j}->{out}{i}{j}", c, a.d2)
    return ArrayJet(
        np.einsum(spec, c, a.val), np.einsum(f"{sc},{sa}{i}->{out}{i}", c, a.d1), d2
    )
