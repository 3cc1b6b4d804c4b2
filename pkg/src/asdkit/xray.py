"""Line integrals over R^3 and the neutral wave equation satisfied by their range."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import Callable, Iterable, Optional, Sequence

import numpy as np

from .fields import ScalarField, const, parse_expr, substitute, var
from .reports import ResidualReport

XYZ = ("x1", "x2", "x3")
GAUSS_ORDER = 20
MAX_PANELS = 512


class QuadratureError(RuntimeError):
    """The requested accuracy was not reached at the panel cap."""


class NoiseFloorError(ValueError):
    """Finite differences of the quadrature would be dominated by its error."""


@dataclass(frozen=True)
class LineParam:
    """The line ``s -> (x s + z, y s - w, s)``; never perpendicular to the x3 axis."""

    x: float
    y: float
    w: float
    z: float

    def points(self, s: np.ndarray) -> tuple:
        s = np.asarray(s, float)
        return self.x * s + self.z, self.y * s - self.w, s

    def as_array(self) -> np.ndarray:
        return np.array([self.x, self.y, self.w, self.z])

    @classmethod
    def from_array(cls, a) -> "LineParam":
        return cls(*(float(v) for v in a))

    def shifted(self, delta) -> "LineParam":
        return LineParam.from_array(self.as_array() + np.asarray(delta, float))

    def ball_interval(self, R: float) -> Optional[tuple]:
        """Parameter interval on which the line lies in the closed ball of radius ``R``."""
        a = self.x ** 2 + self.y ** 2 + 1.0
        b = 2.0 * (self.x * self.z - self.y * self.w)
        c = self.z ** 2 + self.w ** 2 - R * R
        disc = b * b - 4 * a * c
        if disc <= 0:
            return None
        r = math.sqrt(disc)
        return (-b - r) / (2 * a), (-b + r) / (2 * a)


@dataclass(frozen=True)
class Integrand3D:
    """A function on R^3 that is negligible outside the ball of radius ``radius``.

    ``tail`` bounds the integral of ``|f|`` along any line over the part outside
    that ball (with respect to the line's ``s`` parameter).
    """

    field: ScalarField
    radius: float
    tail: float = 0.0
    label: str = ""

    def __post_init__(self):
        if self.field.arity != 3:
            raise ValueError("an integrand lives on R^3")
        if self.radius <= 0:
            raise ValueError("decay radius must be positive")

    def values(self, X, Y, Z) -> np.ndarray:
        return np.asarray(self.field.values([X, Y, Z]), float)

    @classmethod
    def parse(cls, text: str, radius: float, tail: float = 0.0) -> "Integrand3D":
        return cls(ScalarField(parse_expr(text, XYZ), XYZ), radius, tail, text)

    @classmethod
    def zero(cls) -> "Integrand3D":
        return cls.parse("0", 1.0, 0.0)

    @classmethod
    def gaussian(cls, a: float = 1.0, centre=(0.0, 0.0, 0.0), amplitude: float = 1.0,
                 radius: Optional[float] = None) -> "Integrand3D":
        """``amplitude * exp(-a |p - centre|^2)`` with a cutoff radius about the origin."""
        c = [float(v) for v in centre]
        if radius is None:
            radius = math.hypot(*c) + math.sqrt(60.0 / a)
        rc = radius - math.hypot(*c)
        # points outside the ball are at least rc from the centre and the line
        # parameter s is no faster than arclength
        tail = abs(amplitude) * math.sqrt(math.pi / a) * math.exp(-a * rc * rc) if rc > 0 else math.inf
        text = f"{float(amplitude)!r}*exp(-{float(a)!r}*((x1-({c[0]!r}))^2+(x2-({c[1]!r}))^2+(x3-({c[2]!r}))^2))"
        return cls.parse(text, radius, tail)

    def translated(self, v) -> "Integrand3D":
        """``p -> f(p - v)``; the cutoff ball grows so it still contains the support."""
        v = np.asarray(v, float)
        mapping = {i: var(i) - const(float(v[i])) for i in range(3)}
        f = ScalarField(substitute(self.field.expr, mapping), XYZ)
        return Integrand3D(f, self.radius + float(np.linalg.norm(v)), self.tail, f"translate({self.label})")


def _gauss_panels(fn: Callable[[np.ndarray], np.ndarray], a: float, b: float, panels: int,
                  order: int) -> float:
    nodes, weights = np.polynomial.legendre.leggauss(order)
    edges = np.linspace(a, b, panels + 1)
    half = 0.5 * np.diff(edges)
    mid = 0.5 * (edges[1:] + edges[:-1])
    s = (mid[:, None] + half[:, None] * nodes[None, :]).ravel()
    vals = fn(s).reshape(panels, order)
    return float(np.sum(half * (vals @ weights)))


def john_transform(f: Integrand3D, L: LineParam, order: int = GAUSS_ORDER, cutoff: Optional[float] = None,
                   tol: float = 1e-13, max_panels: int = MAX_PANELS) -> tuple:
    """``(psi, error)``: the integral of ``f`` along ``L`` in the line parameter ``s``.

    Composite Gauss-Legendre on the chord through the cutoff ball, with the number of
    panels doubled until two successive values agree to ``tol`` (absolute, or
    relative when larger). The error is that difference plus the declared tail.
    """
    R = f.radius if cutoff is None else float(cutoff)
    if R < f.radius:
        raise ValueError("cutoff must be at least the decay radius")
    chord = L.ball_interval(R)
    if chord is None:
        return 0.0, f.tail
    a, b = chord

    def fn(s):
        return f.values(*L.points(s))

    panels = 1
    prev = _gauss_panels(fn, a, b, panels, order)
    while True:
        panels *= 2
        cur = _gauss_panels(fn, a, b, panels, order)
        err = abs(cur - prev)
        if err <= max(tol, tol * abs(cur)):
            return cur, err + f.tail
        if panels >= max_panels:
            raise QuadratureError(f"quadrature error {err:.2e} above {tol:.1e} at {panels} panels")
        prev = cur


def _mixed(psi: Callable[[np.ndarray], float], q: np.ndarray, i: int, j: int, h: float) -> float:
    def at(di, dj):
        p = q.copy()
        p[i] += di
        p[j] += dj
        return psi(p)

    return (at(h, h) - at(h, -h) - at(-h, h) + at(-h, -h)) / (4 * h * h)


def wave_operator_fd(psi: Callable[[np.ndarray], float], q, h: float) -> float:
    """Richardson-extrapolated ``psi_xw + psi_yz`` at ``q = (x, y, w, z)`` from steps ``h``
    and ``h/2``."""
    q = np.asarray(q, float)
    coarse = _mixed(psi, q, 0, 2, h) + _mixed(psi, q, 1, 3, h)
    fine = _mixed(psi, q, 0, 2, h / 2) + _mixed(psi, q, 1, 3, h / 2)
    return (4 * fine - coarse) / 3


def function_wave_residual(psi: Callable[[np.ndarray], float], samples: Iterable, h: float = 1e-2,
                           tolerance: float = 1e-4, name: str = "uhwave") -> ResidualReport:
    """Wave residual of an arbitrary function of ``(x, y, w, z)``."""
    qs = [s.as_array() if isinstance(s, LineParam) else np.asarray(s, float) for s in samples]
    vals = [wave_operator_fd(psi, q, h) for q in qs]
    return ResidualReport.from_values(name, vals, tolerance, h=h)


def uhwave_residual(f: Integrand3D, samples: Sequence, h: float = 1e-2, tolerance: float = 1e-4,
                    quad_tol: float = 1e-13) -> ResidualReport:
    """``psi_xw + psi_yz`` for the transform of ``f`` at each sample line."""
    # the finest stencil divides quadrature errors by (h/2)^2; 40 such errors enter
    # the Richardson combination with weights of order one
    floor = 40 * (quad_tol + f.tail) / (h / 2) ** 2
    if floor > tolerance:
        raise NoiseFloorError(f"quadrature noise {floor:.1e} exceeds tolerance {tolerance:.1e}; "
                              "tighten quad_tol or enlarge h")

    def psi(q):
        return john_transform(f, LineParam.from_array(q), tol=quad_tol)[0]

    rep = function_wave_residual(psi, samples, h, tolerance)
    rep.extra["noiseFloor"] = floor
    rep.extra["tail"] = f.tail
    return rep


def random_lines(n: int, seed: int = 0, scale: float = 1.0) -> list:
    rng = np.random.default_rng(seed)
    return [LineParam.from_array(rng.uniform(-scale, scale, 4)) for _ in range(n)]


def read_lines(path) -> list:
    """Lines from a CSV with columns ``x,y,w,z`` (a header row is optional)."""
    out = []
    with open(path, newline="") as fh:
        for row in csv.reader(fh):
            if not row or row[0].strip().startswith("#"):
                continue
            try:
                out.append(LineParam.from_array([float(v) for v in row[:4]]))
            except ValueError:
                if out:
                    raise
    return out


NAMED_INTEGRANDS = {
    "gaussian": lambda: Integrand3D.gaussian(1.0),
    "zero": Integrand3D.zero,
    "two-bumps": lambda: Integrand3D.parse(
        "exp(-2*((x1-0.5)^2+x2^2+x3^2)) - 0.5*exp(-((x1+0.3)^2+(x2-0.4)^2+(x3+0.2)^2))",
        8.0, 1e-23),
}
