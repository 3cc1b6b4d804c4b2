"""Three-dimensional Einstein-Weyl structures, monopoles and the Jones-Tod correspondence.

Conventions
-----------
* The Weyl connection of ``(h, omega)`` is
  ``Gamma^a_bc(D) = Gamma^a_bc(h) - 1/2 (delta^a_b w_c + delta^a_c w_b - h_bc w^a)``
  so that ``D h = omega (x) h``.
* ``*_h`` on a 1-form: ``(*a)_bc = eps_abc a^a`` with ``eps_012 = orientation sqrt|det h|``.
* Lifting: ``g = V^2 h - (dphi + eta)^2`` on the chart of ``h`` extended by ``phi``
  (appended last). The 4-dimensional orientation is ``LIFT_ORIENTATION * h.orientation``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Callable, Optional

import numpy as np
from scipy.integrate import solve_ivp
from scipy.interpolate import CubicSpline

from .fields import Expr, const, eval_jets, evaluate, exp_, inverse_expr, log_, parse_expr, partial, sqrt_, substitute, var, det_expr
from .geometry import (
    EPS3,
    MetricField,
    christoffel_jet,
    conformal_killing_residual,
    curvature_from_jet,
    riemann_from_connection,
    split_weyl_tensor,
    volume_tensor,
)
from .jets import ArrayJet, DomainError
from .reports import ResidualReport

EW_TOL = 1e-8
MONOPOLE_TOL = 1e-8
NULL_TOL = 1e-9

# orientation of the lift relative to the base; fixed so that lifts of EW data with
# monopoles come out anti-self-dual (checked on the Toda and dKP families)
LIFT_ORIENTATION = -1


class NullKillingError(ValueError):
    """The Killing vector is null; the reduction needs the null-case canonical forms."""


class NotConformalKillingError(ValueError):
    pass


class ClosureError(ValueError):
    pass


class SolverError(RuntimeError):
    pass


def _exprs(xs) -> tuple:
    return tuple(Expr.wrap(x) for x in xs)


# ---------------------------------------------------------------------------
# Einstein-Weyl structures
# ---------------------------------------------------------------------------


@dataclass(eq=False)
class EWStructure:
    h: MetricField
    omega: tuple  # three Exprs, components of a 1-form
    label: str = ""

    def __post_init__(self):
        if self.h.dim != 3:
            raise ValueError("an Einstein-Weyl structure lives in three dimensions")
        self.omega = _exprs(self.omega)

    @property
    def names(self) -> tuple:
        return self.h.names

    def samples(self, n: int = 20, seed: int = 0, box=None) -> np.ndarray:
        return self.h.samples(n, seed, box)

    def omega_jets(self, p) -> ArrayJet:
        return ArrayJet.stack(eval_jets(list(self.omega), np.asarray(p, float)), (3,))

    def connection(self, p):
        """``(Gamma, dGamma)`` of the Weyl connection, ``dGamma[a,b,c,e] = d_e Gamma^a_bc``."""
        H = self.h.jets(p)
        gi, gam, dgam = christoffel_jet(H)
        W = self.omega_jets(p)
        w, dw = W.val, W.d1  # dw[c, e] = d_e w_c
        dgi = -np.einsum("af,fhe,hd->ade", gi, H.d1, gi)
        wu = gi @ w
        dwu = np.einsum("ade,d->ae", dgi, w) + gi @ dw
        I = np.eye(3)
        corr = -0.5 * (np.einsum("ab,c->abc", I, w) + np.einsum("ac,b->abc", I, w) - np.einsum("bc,a->abc", H.val, wu))
        dcorr = -0.5 * (
            np.einsum("ab,ce->abce", I, dw)
            + np.einsum("ac,be->abce", I, dw)
            - np.einsum("bce,a->abce", H.d1, wu)
            - np.einsum("bc,ae->abce", H.val, dwu)
        )
        return gam + corr, dgam + dcorr

    def metricity_residual(self, p) -> float:
        """``max |D_a h_bc - w_a h_bc|``."""
        H = self.h.jets(p)
        gam, _ = self.connection(p)
        w = self.omega_jets(p).val
        Dh = np.einsum("bca->abc", H.d1) - np.einsum("dab,dc->abc", gam, H.val) - np.einsum("dac,bd->abc", gam, H.val)
        return float(np.max(np.abs(Dh - np.einsum("a,bc->abc", w, H.val))))

    def weyl_ricci(self, p) -> np.ndarray:
        gam, dgam = self.connection(p)
        R = riemann_from_connection(gam, dgam)
        return np.einsum("abad->bd", R)

    def ew_tensor(self, p) -> tuple:
        """``(W_(ij) - W h_ij / 3, W_[ij])`` at ``p``."""
        Wij = self.weyl_ricci(p)
        hv = self.h.value(p)
        sym = 0.5 * (Wij + Wij.T)
        W = float(np.einsum("ij,ij->", np.linalg.inv(hv), Wij))
        return sym - W / 3.0 * hv, 0.5 * (Wij - Wij.T)

    def gauge(self, phi) -> "EWStructure":
        """The same Weyl structure in the gauge ``(phi^2 h, omega + 2 d ln phi)``."""
        phi = Expr.wrap(phi)
        comps = tuple(tuple(phi * phi * c for c in row) for row in self.h.components)
        lp = log_(phi)
        om = tuple(self.omega[i] + 2.0 * partial(lp, i) for i in range(3))
        return EWStructure(replace(self.h, components=comps), om, self.label)


def ew_residual(ew: EWStructure, samples, tolerance: float = EW_TOL, name: str = "einstein_weyl") -> ResidualReport:
    vals, anti = [], []
    for p in samples:
        E, F = ew.ew_tensor(p)
        vals.append(float(np.max(np.abs(E))))
        anti.append(float(np.max(np.abs(F))))
    return ResidualReport.from_values(name, vals, tolerance, antisymmetricMax=max(anti) if anti else 0.0)


def weyl_connection_difference(a: EWStructure, b: EWStructure, samples, tolerance: float = 1e-8) -> ResidualReport:
    """Residual of ``[h_a] = [h_b]`` and ``D_a = D_b`` (a gauge-independent comparison)."""
    vals = []
    for p in samples:
        ha, hb = a.h.value(p), b.h.value(p)
        lam = np.einsum("ij,ij->", np.linalg.inv(ha), hb) / 3.0
        conf = np.max(np.abs(hb - lam * ha)) / (abs(lam) + 1e-300)
        ga, _ = a.connection(p)
        gb, _ = b.connection(p)
        vals.append(max(conf, float(np.max(np.abs(ga - gb)))))
    return ResidualReport.from_values("weyl_class_difference", vals, tolerance)


# ---------------------------------------------------------------------------
# Monopoles
# ---------------------------------------------------------------------------


@dataclass(eq=False)
class MonopoleData:
    """``V`` and ``eta`` as expressions, or ``eta`` as a callable returning the
    three components at a point (for numerically reconstructed potentials)."""

    V: Expr
    eta: object

    def __post_init__(self):
        self.V = Expr.wrap(self.V)
        if not callable(self.eta):
            self.eta = _exprs(self.eta)

    def eta_value_and_d(self, p, h: float = 2e-3) -> tuple:
        p = np.asarray(p, float)
        if callable(self.eta):
            val = np.asarray(self.eta(p), float)
            d = np.empty((3, 3))
            for e in range(3):
                step = np.zeros(3)
                step[e] = 1.0
                f = lambda s: np.asarray(self.eta(p + s * step), float)
                d1 = (f(h) - f(-h)) / (2 * h)
                d2 = (f(h / 2) - f(-h / 2)) / h
                d[:, e] = (4 * d2 - d1) / 3.0  # Richardson
            return val, d
        js = eval_jets(list(self.eta), p)
        return np.array([j.value for j in js]), np.array([j.grad for j in js])


def hodge1(hv: np.ndarray, alpha: np.ndarray, orientation: int = 1) -> np.ndarray:
    """``(*alpha)_bc = eps_abc alpha^a``."""
    eps = volume_tensor(hv, orientation)
    return np.einsum("abc,a->bc", eps, np.linalg.solve(hv, alpha))


def hodge2_3d(hv: np.ndarray, F: np.ndarray, orientation: int = 1) -> np.ndarray:
    """``(*F)_a = 1/2 eps_abc F^bc``."""
    eps = volume_tensor(hv, orientation)
    hi = np.linalg.inv(hv)
    return 0.5 * np.einsum("abc,bd,ce,de->a", eps, hi, hi, F)


def monopole_source(ew: EWStructure, V: Expr, p) -> np.ndarray:
    """The 2-form ``*_h(dV + omega V / 2)`` at ``p``."""
    (vj,) = eval_jets([Expr.wrap(V)], np.asarray(p, float))
    w = ew.omega_jets(p).val
    return hodge1(ew.h.value(p), vj.grad + 0.5 * w * vj.value, ew.h.orientation)


def monopole_residual(ew: EWStructure, m: MonopoleData, samples, tolerance: float = MONOPOLE_TOL,
                      name: str = "monopole") -> ResidualReport:
    vals = []
    for p in samples:
        F = monopole_source(ew, m.V, p)
        _, d = m.eta_value_and_d(p)
        deta = d.T - d  # (d eta)_bc = d_b eta_c - d_c eta_b; d[c, b] = d_b eta_c
        vals.append(float(np.max(np.abs(F - deta))))
    return ResidualReport.from_values(name, vals, tolerance)


class LineIntegralPotential:
    """A 1-form ``eta`` with ``d eta = F`` for a closed 2-form ``F`` on a box, from
    axis-ordered line integrals based at ``base`` (gauge ``eta_0 = 0``)."""

    def __init__(self, F: Callable[[np.ndarray], np.ndarray], base, nodes: int = 24):
        self.F = F
        self.base = np.asarray(base, float)
        self.nodes, self.weights = np.polynomial.legendre.leggauss(nodes)

    def _integrate(self, fn, a: float, b: float) -> float:
        s = 0.5 * (b - a) * self.nodes + 0.5 * (b + a)
        return 0.5 * (b - a) * sum(w * fn(si) for w, si in zip(self.weights, s))

    def __call__(self, p) -> np.ndarray:
        x, y, t = np.asarray(p, float)
        x0, y0, _ = self.base
        e1 = self._integrate(lambda s: self.F(np.array([s, y, t]))[0, 1], x0, x)
        e2 = self._integrate(lambda s: self.F(np.array([s, y, t]))[0, 2], x0, x)
        e2 += self._integrate(lambda s: self.F(np.array([x0, s, t]))[1, 2], y0, y)
        return np.array([0.0, e1, e2])


def closure_residual(F: Callable[[np.ndarray], np.ndarray], p, h: float = 1e-3) -> float:
    """``|dF|`` at ``p`` by central differences."""
    p = np.asarray(p, float)
    d = []
    for e in range(3):
        step = np.zeros(3)
        step[e] = h
        d.append((F(p + step) - F(p - step)) / (2 * h))
    return float(abs(d[0][1, 2] + d[1][2, 0] + d[2][0, 1]))


def monopole_from_V(ew: EWStructure, V, base=None, check_points=None, closure_tol: float = 1e-6) -> MonopoleData:
    """Complete ``V`` to a monopole by reconstructing ``eta`` from the closed 2-form."""
    V = Expr.wrap(V)
    F = lambda p: monopole_source(ew, V, p)
    base = base if base is not None else ew.samples(1, seed=99)[0]
    for p in check_points if check_points is not None else ew.samples(5, seed=7):
        c = closure_residual(F, p)
        if c > closure_tol:
            raise ClosureError(f"*_h(dV + omega V/2) is not closed (|dF| = {c:.2e}); V is not a monopole")
    return MonopoleData(V, LineIntegralPotential(F, base))


# ---------------------------------------------------------------------------
# Jones-Tod lift and reduction
# ---------------------------------------------------------------------------


def jones_tod_lift(ew: EWStructure, m: MonopoleData, check_points=None, label: str = "",
                   divide_by_V: bool = False) -> MetricField:
    """``g = V^2 h - (dphi + eta)^2`` on the chart ``names + (phi,)``.

    With ``divide_by_V`` the conformally related metric ``V h - (dphi + eta)^2 / V``
    is returned instead; for the special monopoles of the Toda and dKP families
    this is the Ricci-flat representative.
    """
    if callable(m.eta):
        raise ValueError("the lift needs eta in closed form")
    V = m.V
    if check_points is not None:
        for p in check_points:
            if float(evaluate(V, list(p))) <= 0.0:
                raise DomainError(f"V <= 0 at {p}; the lift needs a positive monopole")
    eta = tuple(m.eta) + (const(1.0),)
    n = 4
    comps = []
    for i in range(n):
        row = []
        for j in range(n):
            v = -eta[i] * eta[j]
            if i < 3 and j < 3:
                v = V * V * ew.h.components[i][j] + v
            row.append(v / V if divide_by_V else v)
        comps.append(tuple(row))
    box = None
    if ew.h.box is not None:
        box = tuple(ew.h.box) + ((-1.0, 1.0),)
    excl = lambda p: float(evaluate(V, [float(c) for c in p[:3]])) <= 0.0
    return MetricField(tuple(comps), ew.names + ("phi",), orientation=LIFT_ORIENTATION * ew.h.orientation,
                       box=box, excluded=excl, label=label or f"lift({ew.label})")


def _drop(seq, k):
    return tuple(x for i, x in enumerate(seq) if i != k)


def jones_tod_reduce(g: MetricField, axis: int, samples, tolerance: float = 1e-8) -> EWStructure:
    """Reduce along the coordinate Killing field ``K = d/dx^axis``.

    ``h = g/N - k k / N^2`` with ``N = g(K, K)``, ``k = g(K, .)`` and
    ``omega = 2 *_h dA``, ``A = k / N`` (the 4-dimensional formula
    ``2 N^-1 *_g(k ^ dk)`` written in Kaluza-Klein variables; see
    :func:`reduced_omega_direct` for the direct evaluation).
    """
    K = tuple(1.0 if i == axis else 0.0 for i in range(4))
    for p in samples:
        r, _ = conformal_killing_residual(g, K, p)
        if r > tolerance:
            raise NotConformalKillingError(f"d/d{g.names[axis]} is not conformal Killing (residual {r:.2e})")
        N = float(evaluate(g.components[axis][axis], list(p)))
        if abs(N) < NULL_TOL:
            raise NullKillingError("the Killing vector is null; use the null-Killing canonical forms")
    keep = [i for i in range(4) if i != axis]
    N = g.components[axis][axis]
    h = tuple(tuple(g.components[i][j] / N - g.components[i][axis] * g.components[j][axis] / (N * N) for j in keep)
              for i in keep)
    A = [g.components[i][axis] / N for i in keep]
    # relabel so that the reduced fields are functions of the three remaining coordinates
    sub = {k: var(n) for n, k in enumerate(keep)}
    sub[axis] = const(0.0)
    h = tuple(tuple(substitute(c, sub) for c in row) for row in h)
    A = [substitute(a, sub) for a in A]
    # orientation induced on the base with K moved to the last slot; the reduced
    # structure carries the orientation that lifts back to g's
    o_kk = g.orientation * (-1) ** (3 - axis)
    o3 = LIFT_ORIENTATION * o_kk
    box = None if g.box is None else tuple(b for i, b in enumerate(g.box) if i != axis)
    hm = MetricField(h, _drop(g.names, axis), signature=(2, 1), orientation=o3, box=box, label=f"reduce({g.label})")
    # a timelike K leaves h with signature (1, 2); the Weyl structure is the same
    ref0 = np.array([float(x) for x in np.asarray(samples[0])[keep]])
    ev = np.linalg.eigvalsh(hm.value(ref0))
    hm = replace(hm, signature=(int(np.sum(ev > 0)), int(np.sum(ev < 0))))
    # omega_a = eps_abc h^bd h^ce dA_de  (the factor 2 cancels the 1/2 of *)
    hi = inverse_expr([list(r) for r in h])
    det = det_expr([list(r) for r in h])
    dA = [[partial(A[e], d) - partial(A[d], e) for e in range(3)] for d in range(3)]
    ref = np.array([float(x) for x in np.asarray(samples[0])[keep]])
    sgn = 1.0 if float(evaluate(det, list(ref))) > 0 else -1.0
    vol = sqrt_(sgn * det) * float(o_kk)
    om = []
    for a in range(3):
        acc = const(0.0)
        for b in range(3):
            for c in range(3):
                if EPS3[a, b, c] == 0.0:
                    continue
                for d in range(3):
                    for e in range(3):
                        if d == e:
                            continue
                        acc = acc + EPS3[a, b, c] * hi[b][d] * hi[c][e] * dA[d][e]
        om.append(vol * acc)
    return EWStructure(hm, tuple(om), label=hm.label)


def reduced_omega_direct(g: MetricField, axis: int, p) -> np.ndarray:
    """``2 N^-1 *_g(k ^ dk)`` evaluated from the 4-metric, restricted to the base.

    The star of a 3-form is taken with the free index first,
    ``(*T)_d = eps_dabc T^abc / 6``; with the other placement the result changes
    sign and no longer reproduces the Weyl structure a lift was built from.
    """
    G = g.jets(p)
    k = G.val[axis]
    N = k[axis]
    dk = G.d1[axis]  # dk[a, c] = d_c k_a
    F = dk.T - dk  # F_ca
    T = np.einsum("a,bc->abc", k, F) + np.einsum("b,ca->abc", k, F) + np.einsum("c,ab->abc", k, F)
    eps = volume_tensor(G.val, g.orientation)
    gi = np.linalg.inv(G.val)
    Tup = np.einsum("abc,ad,be,cf->def", T, gi, gi, gi)
    star = np.einsum("dabc,abc->d", eps, Tup) / 6.0
    w = 2.0 / N * star
    return np.array([w[i] for i in range(4) if i != axis])


# ---------------------------------------------------------------------------
# Integrable systems
# ---------------------------------------------------------------------------

INTEGRABLE_KINDS = ("toda", "dkp", "hypercr", "interpolating")


def _jets3(fields: dict, keys, p):
    missing = [k for k in keys if k not in fields]
    if missing:
        raise KeyError(f"missing field(s): {', '.join(missing)}")
    return eval_jets([Expr.wrap(fields[k]) for k in keys], np.asarray(p, float))


def _dkp_scalar(u_expr: Expr, p) -> float:
    """``(u_t - u u_x)_x - u_yy`` on the chart ``(x, y, t)``."""
    ux = partial(u_expr, 0)
    (uj, uxj) = eval_jets([u_expr, ux], np.asarray(p, float))
    # (u_t - u u_x)_x = u_tx - u_x^2 - u u_xx
    return uj.hess[2, 0] - uj.grad[0] ** 2 - uj.value * uj.hess[0, 0] - uj.hess[1, 1]


def integrable_pointwise(kind: str, fields: dict, p, b: float = 0.0, c: float = 0.0) -> np.ndarray:
    """Residual components of the named system at ``p`` on the chart ``(x, y, t)``."""
    if kind == "toda":
        (u,) = _jets3(fields, ["u"], p)
        eu = math.exp(u.value)
        # (e^u)_tt = e^u (u_tt + u_t^2)
        return np.array([eu * (u.hess[2, 2] + u.grad[2] ** 2) - u.hess[0, 0] - u.hess[1, 1]])
    if kind == "dkp":
        _jets3(fields, ["u"], p)
        return np.array([_dkp_scalar(Expr.wrap(fields["u"]), p)])
    if kind == "hypercr":
        u, w = _jets3(fields, ["u", "w"], p)
        ux, uy, ut = u.grad
        wx, wy, _ = w.grad
        return np.array([ut + wy + u.value * wx - w.value * ux, uy + wx])
    if kind == "interpolating":
        u, w = _jets3(fields, ["u", "w"], p)
        ux, uy, ut = u.grad
        wx, wy, _ = w.grad
        return np.array([ut + wy - c * (u.value * wx - w.value * ux) + b * u.value * ux, uy + wx])
    raise ValueError(f"unknown integrable system {kind!r}; choose from {INTEGRABLE_KINDS}")


def interpolating_scalar_form(fields: dict, p, b: float, c: float) -> float:
    """``d_x`` of the evolution equation minus ``d_y`` of the constraint:
    ``(u_t - c(u w_x - w u_x) + b u u_x)_x - u_yy``."""
    u, w = _jets3(fields, ["u", "w"], p)
    ux = u.grad[0]
    uxx, uxt, uyy = u.hess[0, 0], u.hess[0, 2], u.hess[1, 1]
    wxx = w.hess[0, 0]
    cross_x = u.value * wxx - w.value * uxx  # (u w_x - w u_x)_x
    return uxt - c * cross_x + b * (ux * ux + u.value * uxx) - uyy


def integrable_residual(kind: str, fields: dict, samples, b: float = 0.0, c: float = 0.0,
                        tolerance: float = 1e-8) -> ResidualReport:
    vals = [float(np.max(np.abs(integrable_pointwise(kind, fields, p, b, c)))) for p in samples]
    return ResidualReport.from_values(f"integrable:{kind}", vals, tolerance, b=b, c=c)


@dataclass
class InterpolatingLax:
    """The Lax pair of the interpolating system as vector fields on ``(x, y, t, lambda)``."""

    u: Expr
    w: Expr
    b: float
    c: float

    def fields(self):
        u, w, b, c = Expr.wrap(self.u), Expr.wrap(self.w), self.b, self.c
        lam = var(3)
        z0, one = const(0.0), const(1.0)
        ux, wx = partial(u, 0), partial(w, 0)
        L0 = (c * w + b * u - lam * c * u - lam * lam, z0, one, b * (wx - lam * ux))
        L1 = (-(c * u + lam), one, z0, -b * ux)
        return L0, L1


def interpolating_lax_commutator(lax: InterpolatingLax, p, lam: float) -> np.ndarray:
    """Components of ``[L0, L1]`` at ``(p, lambda)``; zero iff the system holds (the
    commutator here has no component along L0, L1 by construction)."""
    L0, L1 = lax.fields()
    q = np.array(list(np.asarray(p, float)) + [lam])
    j0 = eval_jets(list(L0), q)
    j1 = eval_jets(list(L1), q)
    v0 = np.array([j.value for j in j0])
    v1 = np.array([j.value for j in j1])
    d0 = np.array([j.grad for j in j0])
    d1 = np.array([j.grad for j in j1])
    return d1 @ v0 - d0 @ v1


def interpolating_lax_residual(lax: InterpolatingLax, samples, lambdas=None,
                               tolerance: float = 1e-8) -> ResidualReport:
    lambdas = [-2.0, -1.0, 0.0, 1.0, 2.0, 0.37, -1.41] if lambdas is None else lambdas
    vals = [float(np.max(np.abs(interpolating_lax_commutator(lax, p, lam)))) for p in samples for lam in lambdas]
    return ResidualReport.from_values("interpolating:lax", vals, tolerance, b=lax.b, c=lax.c)


# ---------------------------------------------------------------------------
# Named EW families
# ---------------------------------------------------------------------------

EW_NAMES = ("x", "y", "t")


def _ew_metric(fn, box, label) -> MetricField:
    return MetricField.from_quadratic(fn, EW_NAMES, signature=(2, 1), box=box, label=label)


def flat_ew(box=None) -> EWStructure:
    box = box or ((-1.0, 1.0),) * 3
    h = _ew_metric(lambda x, y, t: [(1.0, 0, 0), (1.0, 1, 1), (-1.0, 2, 2)], box, "flat")
    return EWStructure(h, (0.0, 0.0, 0.0), "flat")


def tod_toda_u(text: bool = False):
    return "log(4*(1 - t^2)/(1 + x^2 + y^2)^2)"


def toda_ew(u=None, box=None) -> EWStructure:
    """``h = e^u (dx^2 + dy^2) - dt^2``, ``omega = 2 u_t dt``."""
    box = box or ((-0.6, 0.6), (-0.6, 0.6), (-0.7, -0.2))
    ue = parse_expr(u if isinstance(u, str) else tod_toda_u(), EW_NAMES) if not isinstance(u, Expr) else u
    eu = exp_(ue)
    h = _ew_metric(lambda x, y, t: [(eu, 0, 0), (eu, 1, 1), (-1.0, 2, 2)], box, "toda")
    return EWStructure(h, (0.0, 0.0, 2.0 * partial(ue, 2)), "toda")


def dkp_ew(u=None, box=None) -> EWStructure:
    """``h = dy^2 - 4 dx dt - 4 u dt^2``, ``omega = -4 u_x dt``."""
    box = box or ((-1.5, -0.5), (-0.5, 0.5), (-1.5, -0.5))
    ue = parse_expr(u if isinstance(u, str) else "-x/t", EW_NAMES) if not isinstance(u, Expr) else u
    h = _ew_metric(lambda x, y, t: [(1.0, 1, 1), (-4.0, 0, 2), (-4.0 * ue, 2, 2)], box, "dkp")
    return EWStructure(h, (0.0, 0.0, -4.0 * partial(ue, 0)), "dkp")


def hypercr_ew(u=None, w=None, box=None) -> EWStructure:
    """``h = (dy + u dt)^2 - 4 (dx + w dt) dt``, ``omega = u_x dy + (u u_x + 2 u_y) dt``."""
    box = box or ((-1.0, 1.0),) * 3
    ue = parse_expr(u, EW_NAMES) if isinstance(u, str) else Expr.wrap(u if u is not None else 0.0)
    we = parse_expr(w, EW_NAMES) if isinstance(w, str) else Expr.wrap(w if w is not None else 0.0)
    h = _ew_metric(lambda x, y, t: [(1.0, 1, 1), (2.0 * ue, 1, 2), (ue * ue, 2, 2), (-4.0, 0, 2), (-4.0 * we, 2, 2)],
                   box, "hypercr")
    ux, uy = partial(ue, 0), partial(ue, 1)
    return EWStructure(h, (0.0, ux, ue * ux + 2.0 * uy), "hypercr")


# ---------------------------------------------------------------------------
# Monopole solver (method of lines)
# ---------------------------------------------------------------------------


def fd4(F: np.ndarray, h: float, axis: int) -> np.ndarray:
    """Fourth-order first derivative along ``axis`` (one-sided stencils at the edges)."""
    F = np.moveaxis(np.asarray(F, float), axis, 0)
    n = F.shape[0]
    if n < 5:
        raise ValueError("fourth-order differences need at least 5 points per axis")
    D = np.empty_like(F)
    D[2:-2] = (-F[4:] + 8 * F[3:-1] - 8 * F[1:-3] + F[:-4]) / (12 * h)
    D[0] = (-25 * F[0] + 48 * F[1] - 36 * F[2] + 16 * F[3] - 3 * F[4]) / (12 * h)
    D[1] = (-3 * F[0] - 10 * F[1] + 18 * F[2] - 6 * F[3] + F[4]) / (12 * h)
    D[-1] = (25 * F[-1] - 48 * F[-2] + 36 * F[-3] - 16 * F[-4] + 3 * F[-5]) / (12 * h)
    D[-2] = (3 * F[-1] + 10 * F[-2] - 18 * F[-3] + 6 * F[-4] - F[-5]) / (12 * h)
    return np.moveaxis(D, 0, axis)


@dataclass
class Grid3:
    axes: tuple  # three 1-d arrays

    @classmethod
    def uniform(cls, box, shape) -> "Grid3":
        return cls(tuple(np.linspace(lo, hi, n) for (lo, hi), n in zip(box, shape)))

    @property
    def shape(self) -> tuple:
        return tuple(len(a) for a in self.axes)

    def mesh(self) -> tuple:
        return np.meshgrid(*self.axes, indexing="ij")

    def points(self) -> np.ndarray:
        return np.stack([m.ravel() for m in self.mesh()], axis=1)


@dataclass
class MonopoleGridSolution:
    grid: Grid3
    V: np.ndarray
    march_axis: int
    residual: float  # discrete residual of the monopole equation at interior nodes
    eta: Optional[np.ndarray] = None  # (3,) + grid shape
    closure: Optional[float] = None
    dV_march: Optional[np.ndarray] = None  # derivative along the marching axis from the solver state

    def to_csv(self, path) -> None:
        X = self.grid.points()
        names = "x,y,t,V"
        np.savetxt(path, np.column_stack([X, self.V.ravel()]), delimiter=",", header=names, comments="")


def _operator_coefficients(ew: EWStructure, p) -> tuple:
    """Divergence-form coefficients of ``d *_h (dV + omega V / 2) = 0``:
    ``A^ab V_ab + B^a V_a + C V = 0``."""
    H = ew.h.jets(p)
    hv, dh = H.val, H.d1
    hi = np.linalg.inv(hv)
    dhi = -np.einsum("af,fhe,hd->ade", hi, dh, hi)
    det = np.linalg.det(hv)
    s = math.sqrt(abs(det))
    ds = 0.5 * s * np.einsum("ij,jie->e", hi, dh)
    M = s * hi
    dM = np.einsum("e,ab->abe", ds, hi) + s * dhi  # d_e M^ab
    W = ew.omega_jets(p)
    w, dw = W.val, W.d1
    divM = np.einsum("aba->b", dM)  # d_a M^ab
    B = divM + 0.5 * M @ w
    C = 0.5 * (np.einsum("aba,b->", dM, w) + np.einsum("ab,ba->", M, dw))
    return M, B, C


def _coefficient_grid(coeffs: Callable, grid: Grid3) -> tuple:
    shape = grid.shape
    pts = grid.points().reshape(shape + (3,))
    M = np.empty(shape + (3, 3))
    B = np.empty(shape + (3,))
    C = np.empty(shape)
    for idx in np.ndindex(*shape):
        M[idx], B[idx], C[idx] = coeffs(pts[idx])
    return M, B, C


def _march_second_order(M, B, C, grid: Grid3, boundary: Expr, march_axis: int,
                        rtol: float, atol: float) -> tuple:
    """Method of lines for ``M^ab V_ab + B^a V_a + C V = 0`` along ``march_axis``.

    Returns ``(V, V_tau)`` on the grid. Cauchy data on the first slice and Dirichlet
    data on the lateral faces are read from ``boundary``.
    """
    boundary = Expr.wrap(boundary)
    shape = grid.shape
    if max(shape) > 64:
        raise ValueError("grids are limited to 64 points per axis")
    lat = [a for a in range(3) if a != march_axis]
    Mtt = M[..., march_axis, march_axis]
    if np.any(np.abs(Mtt) < 1e-12):
        raise SolverError("marching direction is characteristic somewhere on the grid")
    # strict hyperbolicity in the marching direction: the principal symbol has two
    # real roots in xi_tau for every lateral covector, i.e.
    # M_ts M_ts^T - M_tt M_lat is positive definite
    Mts = M[..., march_axis, :][..., lat]
    Mlat = M[..., lat, :][..., :, lat]
    Q = np.einsum("...i,...j->...ij", Mts, Mts) - Mtt[..., None, None] * Mlat
    if np.any(np.linalg.eigvalsh(Q) <= 0):
        raise SolverError("marching direction is not timelike; the Cauchy problem is ill-posed")

    # move the marching axis first
    order = [march_axis] + lat
    M_ = np.transpose(M, order + [3, 4])[..., order, :][..., :, order]
    B_ = np.transpose(B, order + [3])[..., order]
    C_ = np.transpose(C, order)
    tau = grid.axes[march_axis]
    s1, s2 = grid.axes[lat[0]], grid.axes[lat[1]]
    h1, h2 = s1[1] - s1[0], s2[1] - s2[0]
    n1, n2 = len(s1), len(s2)

    edge = np.zeros((n1, n2), bool)
    edge[0, :] = edge[-1, :] = edge[:, 0] = edge[:, -1] = True
    e1, e2 = np.nonzero(edge)

    # coefficients between marching nodes by cubic splines
    Ms, Bs, Cs = (CubicSpline(tau, X, axis=0) for X in (M_, B_, C_))

    def slice_points(t, mask=None):
        q = np.empty((n1, n2, 3))
        q[..., order[0]] = t
        q[..., order[1]] = s1[:, None]
        q[..., order[2]] = s2[None, :]
        return q if mask is None else q[mask]

    def rhs(t, y):
        V = y[: n1 * n2].reshape(n1, n2)
        P = y[n1 * n2:].reshape(n1, n2)
        Mk, Bk, Ck = Ms(t), Bs(t), Cs(t)
        V1, V2 = fd4(V, h1, 0), fd4(V, h2, 1)
        V11 = fd4(V1, h1, 0)
        V22 = fd4(V2, h2, 1)
        V12 = fd4(V1, h2, 1)
        P1, P2 = fd4(P, h1, 0), fd4(P, h2, 1)
        rest = (
            2 * Mk[..., 0, 1] * P1 + 2 * Mk[..., 0, 2] * P2
            + Mk[..., 1, 1] * V11 + 2 * Mk[..., 1, 2] * V12 + Mk[..., 2, 2] * V22
            + Bk[..., 0] * P + Bk[..., 1] * V1 + Bk[..., 2] * V2 + Ck * V
        )
        Ptt = -rest / Mk[..., 0, 0]
        dV, dP = P.copy(), Ptt
        # Dirichlet lateral faces follow the boundary data exactly
        js = [eval_jets([boundary], q)[0] for q in slice_points(t, edge)]
        dV[e1, e2] = [j.grad[march_axis] for j in js]
        dP[e1, e2] = [j.hess[march_axis, march_axis] for j in js]
        return np.concatenate([dV.ravel(), dP.ravel()])

    js = [eval_jets([boundary], q)[0] for q in slice_points(tau[0]).reshape(-1, 3)]
    V0 = np.array([j.value for j in js])
    P0 = np.array([j.grad[march_axis] for j in js])
    sol = solve_ivp(rhs, (tau[0], tau[-1]), np.concatenate([V0, P0]), t_eval=tau,
                    rtol=rtol, atol=atol, method="RK45")
    if not sol.success or sol.y.shape[1] != len(tau):
        raise SolverError(f"marching failed: {sol.message}")
    Vm = sol.y[: n1 * n2].T.reshape(len(tau), n1, n2)
    Pm = sol.y[n1 * n2:].T.reshape(len(tau), n1, n2)
    if not (np.all(np.isfinite(Vm)) and np.all(np.isfinite(Pm))):
        raise SolverError("marching blew up")
    inv = list(np.argsort(order))
    return np.transpose(Vm, inv), np.transpose(Pm, inv)


def monopole_solve_linear(
    ew: EWStructure,
    grid: Grid3,
    boundary: Expr,
    march_axis: int,
    rtol: float = 1e-9,
    atol: float = 1e-11,
    reconstruct: bool = True,
) -> MonopoleGridSolution:
    """March ``d *_h (dV + omega V / 2) = 0`` along ``march_axis``.

    ``boundary`` supplies the Cauchy data (``V`` and its normal derivative on the
    first slice) and Dirichlet data on the lateral faces. The marching direction
    must be timelike for the equation to be hyperbolic; this is checked.
    """
    M, B, C = _coefficient_grid(lambda p: _operator_coefficients(ew, p), grid)
    V, P = _march_second_order(M, B, C, grid, boundary, march_axis, rtol, atol)
    res = discrete_monopole_residual(ew, grid, V, M, B, C)
    out = MonopoleGridSolution(grid, V, march_axis, res, dV_march=P)
    if reconstruct:
        out.eta, out.closure = reconstruct_eta_grid(ew, grid, V, {march_axis: P})
    return out


def lindkp_coefficients(H, p) -> tuple:
    """``W_yy - W_xt + (H_x W_x)_x`` written as ``M^ab W_ab + B^a W_a + C W``."""
    (j,) = eval_jets([Expr.wrap(H)], np.asarray(p, float))
    M = np.zeros((3, 3))
    M[0, 0] = j.grad[0]
    M[1, 1] = 1.0
    M[0, 2] = M[2, 0] = -0.5
    B = np.array([j.hess[0, 0], 0.0, 0.0])
    return M, B, 0.0


def lindkp_solve(H, grid: Grid3, boundary: Expr, march_axis: int = 0,
                 rtol: float = 1e-12, atol: float = 1e-13) -> MonopoleGridSolution:
    """Solve the linearised dKP equation for ``W`` on the background ``H`` by marching.

    ``W_x`` is then a monopole on the dKP Einstein-Weyl space with ``u = H_x``.
    """
    H = Expr.wrap(H)
    M, B, C = _coefficient_grid(lambda p: lindkp_coefficients(H, p), grid)
    W, P = _march_second_order(M, B, C, grid, boundary, march_axis, rtol, atol)
    res = _discrete_residual(grid, W, M, B, C)
    return MonopoleGridSolution(grid, W, march_axis, res, dV_march=P)


def _discrete_residual(grid: Grid3, V: np.ndarray, M, B, C) -> float:
    hs = [a[1] - a[0] for a in grid.axes]
    D = [fd4(V, hs[a], a) for a in range(3)]
    terms = [C * V]
    for a in range(3):
        terms.append(B[..., a] * D[a])
        for b in range(3):
            terms.append(M[..., a, b] * fd4(D[a], hs[b], b))
    L = sum(terms)
    scale = sum(np.abs(t) for t in terms)
    inner = (np.abs(L) / (scale + 1e-300))[2:-2, 2:-2, 2:-2]
    return float(np.max(inner))


def discrete_monopole_residual(ew, grid: Grid3, V: np.ndarray, M=None, B=None, C=None) -> float:
    """Max of ``A^ab V_ab + B^a V_a + C V`` over interior nodes, relative to the sum
    of the magnitudes of its terms."""
    if M is None:
        M, B, C = _coefficient_grid(lambda p: _operator_coefficients(ew, p), grid)
    return _discrete_residual(grid, V, M, B, C)


def reconstruct_eta_grid(ew: EWStructure, grid: Grid3, V: np.ndarray, known: Optional[dict] = None) -> tuple:
    """``eta`` on the grid with ``d eta = *_h(dV + omega V/2)`` (gauge ``eta_0 = 0``),
    plus the relative closure defect of the 2-form.

    ``known`` maps an axis to an already available derivative of ``V`` along it
    (the marching solver carries one); other derivatives use differences.
    """
    shape = grid.shape
    hs = [a[1] - a[0] for a in grid.axes]
    known = known or {}
    dV = [known[a] if a in known else fd4(V, hs[a], a) for a in range(3)]
    pts = grid.points().reshape(shape + (3,))
    F = np.empty(shape + (3, 3))
    for idx in np.ndindex(*shape):
        p = pts[idx]
        w = ew.omega_jets(p).val
        alpha = np.array([dV[a][idx] for a in range(3)]) + 0.5 * w * V[idx]
        F[idx] = hodge1(ew.h.value(p), alpha, ew.h.orientation)
    x = grid.axes[0]
    y = grid.axes[1]

    def integral(values, axis_pts, axis):
        anti = CubicSpline(axis_pts, values, axis=axis).antiderivative()
        out = anti(axis_pts)  # evaluation axis comes first
        out = np.moveaxis(out, 0, axis)
        return out - np.take(out, [0], axis=axis)

    e1 = integral(F[..., 0, 1], x, 0)
    e2 = integral(F[..., 0, 2], x, 0) + integral(F[0, :, :, 1, 2], y, 0)[None, :, :]
    eta = np.stack([np.zeros(shape), e1, e2])
    dF = fd4(F[..., 1, 2], hs[0], 0) + fd4(F[..., 2, 0], hs[1], 1) + fd4(F[..., 0, 1], hs[2], 2)
    scale = max(float(np.max(np.abs(fd4(F[..., a, b], hs[c], c)))) for a in range(3) for b in range(3) for c in range(3))
    closure = float(np.max(np.abs(dF[2:-2, 2:-2, 2:-2])) / (scale + 1e-300))
    return eta, closure


def lift_asd_on_grid(ew: EWStructure, sol: MonopoleGridSolution) -> float:
    """Largest self-dual Weyl ratio of the lift of a grid monopole, with derivatives by
    fourth-order differences (interior nodes at least two cells from the edge)."""
    if sol.eta is None:
        raise ValueError("solution carries no eta")
    grid = sol.grid
    shape = grid.shape
    hs = [a[1] - a[0] for a in grid.axes]
    pts = grid.points().reshape(shape + (3,))
    hval = np.empty(shape + (3, 3))
    for idx in np.ndindex(*shape):
        hval[idx] = ew.h.value(pts[idx])
    V, eta = sol.V, sol.eta
    g = np.zeros(shape + (4, 4))
    e4 = np.concatenate([np.moveaxis(eta, 0, -1), np.ones(shape + (1,))], axis=-1)
    g[...] = -np.einsum("...i,...j->...ij", e4, e4)
    g[..., :3, :3] += (V ** 2)[..., None, None] * hval
    d1 = np.zeros(shape + (4, 4, 4))
    for a in range(3):
        d1[..., a] = fd4(g, hs[a], a)
    d2 = np.zeros(shape + (4, 4, 4, 4))
    for a in range(3):
        for b in range(3):
            d2[..., a, b] = fd4(d1[..., a], hs[b], b)
    d2 = 0.5 * (d2 + np.swapaxes(d2, -1, -2))
    o = LIFT_ORIENTATION * ew.h.orientation
    worst = 0.0
    for idx in np.ndindex(*[n - 4 for n in shape]):
        j = tuple(i + 2 for i in idx)
        pack = curvature_from_jet(ArrayJet(g[j], d1[j], d2[j]))
        Cp, _ = split_weyl_tensor(pack.metric, pack.weyl, o)
        Cm = np.einsum("ae,ebcd->abcd", pack.inverse, pack.weyl)
        Cpm = np.einsum("ae,ebcd->abcd", pack.inverse, Cp)
        worst = max(worst, float(np.linalg.norm(Cpm) / (np.linalg.norm(Cm) + 1.0)))
    return worst


# ---------------------------------------------------------------------------
# Projective structures
# ---------------------------------------------------------------------------


@dataclass(eq=False)
class ProjectiveStructure2D:
    """``y'' = A3 y'^3 + A2 y'^2 + A1 y' + A0`` with ``A_i`` functions of ``(x, y)``."""

    A0: Expr
    A1: Expr
    A2: Expr
    A3: Expr

    def __post_init__(self):
        for k in ("A0", "A1", "A2", "A3"):
            v = getattr(self, k)
            setattr(self, k, parse_expr(v, ("x", "y")) if isinstance(v, str) else Expr.wrap(v))

    @classmethod
    def from_metric(cls, g: MetricField) -> "ProjectiveStructure2D":
        """Unparametrised geodesics of a 2-metric (Christoffel symbols as expressions)."""
        gi = inverse_expr([list(r) for r in g.components])
        G = g.components

        def gam(a, b, c):
            return sum(
                (0.5 * gi[a][d] * (partial(G[d][b], c) + partial(G[d][c], b) - partial(G[b][c], d)) for d in range(2)),
                const(0.0),
            )

        return cls(-gam(1, 0, 0), gam(0, 0, 0) - 2.0 * gam(1, 0, 1), 2.0 * gam(0, 0, 1) - gam(1, 1, 1), gam(0, 1, 1))

    def rhs(self, x: float, y: float, yp: float) -> float:
        env = [x, y]
        a = [float(evaluate(e, env)) for e in (self.A0, self.A1, self.A2, self.A3)]
        return a[0] + a[1] * yp + a[2] * yp ** 2 + a[3] * yp ** 3


@dataclass
class Curve:
    x: np.ndarray
    y: np.ndarray
    yp: np.ndarray
    dense: Callable


def projective_geodesic(ps: ProjectiveStructure2D, x0: float, y0: float, yp0: float, x1: float,
                        max_slope: float = 1e6, rtol: float = 1e-10, atol: float = 1e-12) -> Curve:
    def f(x, s):
        return [s[1], ps.rhs(x, s[0], s[1])]

    def blow(x, s):
        return max_slope - abs(s[1])

    blow.terminal = True
    sol = solve_ivp(f, (x0, x1), [y0, yp0], rtol=rtol, atol=atol, dense_output=True, events=blow)
    if sol.status != 0:
        raise SolverError(f"geodesic blows up before x = {x1} (stopped at x = {sol.t[-1]:.6g})")
    return Curve(sol.t, sol.y[0], sol.y[1], lambda x: sol.sol(x)[0])


def beta_equation_A0(beta, A1, A2, A3) -> Expr:
    """The ``A0`` making ``y' = beta(x, y)`` a congruence of projective geodesics."""
    b = [parse_expr(v, ("x", "y")) if isinstance(v, str) else Expr.wrap(v) for v in (beta, A1, A2, A3)]
    be, a1, a2, a3 = b
    return partial(be, 0) + be * partial(be, 1) - be * a1 - be * be * a2 - be * be * be * a3


# ---------------------------------------------------------------------------
# Lifted zoo entries
# ---------------------------------------------------------------------------


def toda_monopole() -> MonopoleData:
    """``V = u_t`` for the Toda solution ``u = ln[4(1-t^2)/(1+r^2)^2]`` with its
    closed-form connection ``eta``."""
    x, y, t = var(0), var(1), var(2)
    r2 = 1.0 + x * x + y * y
    V = -2.0 * t / (1.0 - t * t)
    return MonopoleData(V, (-4.0 * y / r2, 4.0 * x / r2, const(0.0)))


def toda_lift_entry():
    from .zoo import ZooEntry
    from .spinor import gram_schmidt_frame

    ew = toda_ew()
    m = toda_monopole()
    g = jones_tod_lift(ew, m, label="toda_lift", divide_by_V=True)
    ref = np.array([0.1, -0.2, -0.45, 0.0])
    return ZooEntry(
        "toda_lift", g, gram_schmidt_frame(g, ref, g.orientation), ("ASD", "RicciFlat"),
        governing={
            "toda": lambda S: integrable_residual("toda", {"u": parse_expr(tod_toda_u(), EW_NAMES)}, np.asarray(S)[:, :3]),
            "monopole": lambda S: monopole_residual(ew, m, np.asarray(S)[:, :3], name="toda_lift:monopole"),
        },
        killing=(0.0, 0.0, 0.0, 1.0), description="Jones-Tod lift of the Toda EW space",
    )


def dkp_monopole() -> MonopoleData:
    """``V = W_x``, ``eta = -W_x dy - 2 W_y dt`` for ``W = -x/t``."""
    t = var(2)
    return MonopoleData(-1.0 / t, (const(0.0), 1.0 / t, const(0.0)))


def dkp_lift_entry():
    from .zoo import ZooEntry
    from .spinor import gram_schmidt_frame

    ew = dkp_ew()
    m = dkp_monopole()
    g = jones_tod_lift(ew, m, label="dkp_lift", divide_by_V=True)
    ref = np.array([-1.0, 0.1, -0.9, 0.0])
    return ZooEntry(
        "dkp_lift", g, gram_schmidt_frame(g, ref, g.orientation), ("ASD", "RicciFlat"),
        governing={
            "dkp": lambda S: integrable_residual("dkp", {"u": parse_expr("-x/t", EW_NAMES)}, np.asarray(S)[:, :3]),
            "monopole": lambda S: monopole_residual(ew, m, np.asarray(S)[:, :3], name="dkp_lift:monopole"),
        },
        killing=(0.0, 0.0, 0.0, 1.0), description="Jones-Tod lift of the dKP EW space",
    )
