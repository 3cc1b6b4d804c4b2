"""Explicit neutral-signature metric families with their governing residuals.

Every entry bundles a metric, a null tetrad (given in closed form where the
family comes with one, otherwise built by Gram-Schmidt), the residuals of the
PDE that defines the family, and the verdicts expected once those residuals
vanish. Potentials are kept as expressions over the chart so that an entry can
be rebuilt with corrupted potentials.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable, Optional, Sequence

import numpy as np

from .fields import (
    Expr,
    ScalarField,
    const,
    eval_jets,
    evaluate,
    exp_,
    inverse_expr,
    log_,
    parse_expr,
    partial,
    sin_,
    sqrt_,
    substitute,
    var,
)
from .geometry import (
    MetricField,
    asd_residual,
    conformal_killing_residual,
    kahler_form_closure,
    killing_norm,
    laplace_beltrami,
    riemann_residual,
    ricci_flat_residual,
    scalar_flat_residual,
    self_dual_orientation,
    twist_form,
    weyl_residual,
)
from .reports import ResidualReport, sample_box
from .spinor import (
    ETA,
    ExplicitLax,
    TetradFrame,
    explicit_lax_residual,
    gram_schmidt_frame,
    lax_integrability,
    petrov_classify,
    verify_tetrad,
)

VERDICTS = ("ASD", "RicciFlat", "ScalarFlat", "KahlerClosed", "Flat", "ConformallyFlat", "PetrovN")


class UnknownEntryError(KeyError):
    pass


# ---------------------------------------------------------------------------
# Potential handling
# ---------------------------------------------------------------------------


def as_chart_expr(spec, argnames: Sequence[str], chart: Sequence[str]) -> Expr:
    """Turn a potential given as number, string, callable, Expr or ScalarField into
    an expression over the chart coordinates.

    ``argnames`` are the variables the potential is a function of (a subset of the
    chart). Expressions/strings are read over ``argnames``; an Expr is assumed to
    be written over the chart already.
    """
    chart = list(chart)
    if spec is None:
        return const(0.0)
    if isinstance(spec, (int, float)):
        return const(float(spec))
    if isinstance(spec, Expr):
        return spec
    if isinstance(spec, str):
        e = parse_expr(spec, argnames)
        return substitute(e, {i: var(chart.index(n)) for i, n in enumerate(argnames)})
    if isinstance(spec, ScalarField):
        return substitute(spec.expr, {i: var(chart.index(n)) for i, n in enumerate(spec.names)})
    if callable(spec):
        return Expr.wrap(spec(*[var(chart.index(n)) for n in argnames]))
    raise TypeError(f"cannot interpret potential {spec!r}")


def bump(chart_dim: int, centre=None) -> Expr:
    """A generic smooth bump over the whole chart, used to corrupt potentials."""
    xs = [var(i) for i in range(chart_dim)]
    c = np.zeros(chart_dim) if centre is None else np.asarray(centre, float)
    r2 = sum(((x - float(ci)) ** 2 for x, ci in zip(xs, c)), const(0.0))
    poly = const(1.0)
    coeffs = (0.7, -0.4, 0.55, 0.3, -0.6)
    for i, x in enumerate(xs):
        poly = poly + coeffs[i % len(coeffs)] * (x - float(c[i])) * (1.0 + 0.5 * (xs[(i + 1) % chart_dim] - float(c[(i + 1) % chart_dim])))
    return exp_(-0.5 * r2) * poly


def _d(e, names, *vs) -> Expr:
    return partial(e, *[names.index(v) for v in vs])


def metric_from_coframe(rows, names, **kw) -> MetricField:
    """``g = eta_ij theta^i theta^j`` for coframe rows ``theta^i_mu``."""
    n = len(names)
    th = [[Expr.wrap(c) for c in row] for row in rows]
    comps = []
    for m in range(n):
        row = []
        for k in range(n):
            acc = Expr.wrap(0.0)
            for i in range(4):
                for j in range(4):
                    if ETA[i, j] != 0.0 and not (th[i][m].is_const(0.0) or th[j][k].is_const(0.0)):
                        acc = acc + ETA[i, j] * th[i][m] * th[j][k]
            row.append(acc)
        comps.append(tuple(row))
    return MetricField(tuple(comps), tuple(names), **kw)


def frame_from_coframe(rows, names, **kw) -> TetradFrame:
    th = [[Expr.wrap(c) for c in row] for row in rows]
    inv = inverse_expr(th)
    return TetradFrame(tuple(tuple(inv[m][i] for m in range(4)) for i in range(4)), tuple(names), **kw)


def complex_structure_form(g: MetricField, J) -> tuple:
    """``omega_ab = g_ac J^c_b`` as expressions."""
    n = g.dim
    Je = [[Expr.wrap(J[a][b]) for b in range(n)] for a in range(n)]
    return tuple(
        tuple(sum((g.components[a][c] * Je[c][b] for c in range(n) if not Je[c][b].is_const(0.0)), const(0.0)) for b in range(n))
        for a in range(n)
    )


STANDARD_J = ((0, -1, 0, 0), (1, 0, 0, 0), (0, 0, 0, -1), (0, 0, 1, 0))  # d/dx -> d/dy on both planes


# ---------------------------------------------------------------------------
# Entry type
# ---------------------------------------------------------------------------


@dataclass(eq=False)
class ZooEntry:
    name: str
    metric: MetricField
    frame: Optional[TetradFrame]
    expected: tuple
    governing: dict = field(default_factory=dict)  # name -> fn(samples) -> ResidualReport
    potentials: dict = field(default_factory=dict)  # name -> Expr over chart
    params: dict = field(default_factory=dict)
    killing: Optional[tuple] = None
    killing_null: bool = False
    kahler: Optional[tuple] = None  # (J matrix, J^2 sign)
    frame_factor: Optional[Expr] = None  # g = frame_factor * (metric of frame)
    lax: Optional[ExplicitLax] = None
    lax_mode: str = "span"
    rebuild: Optional[Callable[[dict], "ZooEntry"]] = None
    description: str = ""

    @property
    def names(self) -> tuple:
        return self.metric.names

    def samples(self, n: int = 50, seed: int = 0, box=None) -> np.ndarray:
        return self.metric.samples(n, seed, box)

    def reference_point(self) -> np.ndarray:
        lo, hi = np.asarray(self.metric.box, float).T
        return 0.5 * (lo + hi)

    def fields(self) -> dict:
        """Every scalar field the entry is built from (potentials and metric components)."""
        out = {f"potential:{k}": ScalarField(v, self.names) for k, v in self.potentials.items()}
        for i, j in self.metric.unique_components():
            out[f"g[{i},{j}]"] = self.metric.component(i, j)
        return out

    # -- reports ----------------------------------------------------------------
    def governing_reports(self, samples) -> list:
        return [fn(samples) for fn in self.governing.values()]

    def verdict_report(self, verdict: str, samples) -> ResidualReport:
        g = self.metric
        if verdict == "ASD":
            return asd_residual(g, samples, name=f"{self.name}:ASD")
        if verdict == "RicciFlat":
            return ricci_flat_residual(g, samples, name=f"{self.name}:RicciFlat")
        if verdict == "ScalarFlat":
            return scalar_flat_residual(g, samples, name=f"{self.name}:ScalarFlat")
        if verdict == "Flat":
            return riemann_residual(g, samples, name=f"{self.name}:Flat")
        if verdict == "ConformallyFlat":
            return weyl_residual(g, samples, name=f"{self.name}:ConformallyFlat")
        if verdict == "KahlerClosed":
            return kahler_report(self, samples)
        if verdict == "PetrovN":
            bad = [0.0 if petrov_classify(g, self.frame, p).petrovType == "N" else 1.0 for p in samples]
            return ResidualReport.from_values(f"{self.name}:PetrovN", bad, 0.5)
        raise ValueError(f"unknown verdict {verdict}")

    def verdict_reports(self, samples) -> list:
        return [self.verdict_report(v, samples) for v in self.expected]

    def lax_report(self, samples, lambdas=None) -> ResidualReport:
        if self.frame is None:
            raise ValueError(f"{self.name} has no tetrad")
        rep = lax_integrability(self.frame, samples, lambdas)
        rep.name = f"{self.name}:lax"
        return rep

    def explicit_lax_report(self, samples, lambdas=None, tolerance: float = 1e-8) -> ResidualReport:
        if self.lax is None:
            raise ValueError(f"{self.name} has no explicit Lax pair")
        return explicit_lax_residual(self.lax, samples, lambdas, tolerance, self.lax_mode, f"{self.name}:explicit_lax")

    def tetrad_report(self, samples) -> ResidualReport:
        rep = verify_tetrad(self.metric, self.frame, samples, factor=self.frame_factor)
        rep.name = f"{self.name}:tetrad"
        return rep

    def killing_reports(self, samples) -> list:
        if self.killing is None:
            return []
        ck = [conformal_killing_residual(self.metric, self.killing, p)[0] for p in samples]
        out = [ResidualReport.from_values(f"{self.name}:conformal_killing", ck, 1e-8)]
        if self.killing_null:
            nn = [killing_norm(self.metric, self.killing, p) for p in samples]
            out.append(ResidualReport.from_values(f"{self.name}:killing_null", nn, 1e-10))
        return out

    def twist_magnitudes(self, samples) -> np.ndarray:
        """Largest component of ``K ^ dK`` at each sample (K lowered with g)."""
        if self.killing is None:
            raise ValueError(f"{self.name} has no Killing field")
        return np.array([float(np.max(np.abs(twist_form(self.metric, self.killing, p)))) for p in samples])

    def verify(self, samples) -> list:
        return self.governing_reports(samples) + self.verdict_reports(samples)

    def corrupted(self, eps: float = 1e-2, which: Optional[str] = None) -> "ZooEntry":
        """Rebuild with ``eps * bump`` added to one potential (default: the first)."""
        if self.rebuild is None or not self.potentials:
            raise ValueError(f"{self.name} has no potentials to corrupt")
        key = which or next(iter(self.potentials))
        pots = dict(self.potentials)
        pots[key] = pots[key] + eps * bump(len(self.names), self.reference_point())
        return self.rebuild(pots)


def kahler_report(entry: ZooEntry, samples) -> ResidualReport:
    J, sq = entry.kahler
    n = entry.metric.dim
    vals = []
    for p in samples:
        closure = kahler_form_closure(entry.metric, J, p)
        Jv = np.array([[float(evaluate(Expr.wrap(J[a][b]), [float(x) for x in p])) for b in range(n)] for a in range(n)])
        g = entry.metric.value(p)
        compat = np.max(np.abs(Jv.T @ g @ Jv + sq * g))  # g(JX, JY) = -sq g(X, Y)
        vals.append(max(closure, np.max(np.abs(Jv @ Jv - sq * np.eye(n))), compat))
    return ResidualReport.from_values(f"{entry.name}:KahlerClosed", vals, 1e-9)


def _report(name: str, fn: Callable, tol: float):
    def run(samples):
        return ResidualReport.from_values(name, [fn(p) for p in samples], tol)

    return run


def _pointwise(exprs: Sequence[Expr]):
    def fn(p):
        env = [float(x) for x in p]
        return max(abs(float(evaluate(e, env))) for e in exprs)

    return fn


def _oriented(g: MetricField, orientation: int) -> MetricField:
    return replace(g, orientation=int(orientation))


def _kahler_orientation(g: MetricField, J, ref) -> int:
    omega = np.array([[float(evaluate(e, [float(x) for x in ref])) for e in row] for row in complex_structure_form(g, J)])
    return self_dual_orientation(g, omega, ref)


# ---------------------------------------------------------------------------
# Builders
# ---------------------------------------------------------------------------

FLAT_BOX = ((-1.0, 1.0),) * 4


def build_flat() -> ZooEntry:
    """``g = 2(dx0 dx3 - dx2 dx1)`` with the coordinate null tetrad."""
    names = ("x0", "x1", "x2", "x3")
    one, zero = const(1.0), const(0.0)
    vecs = tuple(tuple(one if i == j else zero for j in range(4)) for i in range(4))
    frame = TetradFrame(vecs, names, box=FLAT_BOX, label="flat")
    g = MetricField.from_quadratic(lambda *x: [(2.0, 0, 3), (-2.0, 2, 1)], names, box=FLAT_BOX, label="flat")
    g = _oriented(g, frame.orientation(np.zeros(4)))
    return ZooEntry("flat", g, frame, ("Flat", "ASD", "RicciFlat"), killing=(1.0, 0.0, 0.0, 0.0),
                    killing_null=True, description="flat neutral metric")


def build_g0() -> ZooEntry:
    """Difference of round-sphere metrics in stereographic coordinates."""
    names = ("x", "y", "u", "v")
    box = ((-1.0, 1.0), (-1.0, 1.0), (-1.0, 1.0), (-1.0, 1.0))

    def terms(x, y, u, v):
        a = 4.0 / (1.0 + x * x + y * y) ** 2
        b = -4.0 / (1.0 + u * u + v * v) ** 2
        return [(a, 0, 0), (a, 1, 1), (b, 2, 2), (b, 3, 3)]

    g = MetricField.from_quadratic(terms, names, box=box, label="g0")
    ref = np.array([0.1, 0.2, -0.1, 0.15])
    o = _kahler_orientation(g, STANDARD_J, ref)
    g = _oriented(g, o)
    frame = gram_schmidt_frame(g, ref, o)
    rot = (-var(1), var(0), const(0.0), const(0.0))
    return ZooEntry("g0", g, frame, ("ConformallyFlat", "ScalarFlat", "ASD", "KahlerClosed"),
                    kahler=(STANDARD_J, -1.0), killing=rot, description="conformally flat S2 x S2")


# -- first heavenly -------------------------------------------------------------


def build_heavenly1(Omega=None, box=None) -> ZooEntry:
    names = ("x", "y", "w", "z")
    box = box or FLAT_BOX
    Om = as_chart_expr(Omega if Omega is not None else "w*x + z*y", names, names)
    return _heavenly1_from({"Omega": Om}, box)


def _heavenly1_from(pots: dict, box) -> ZooEntry:
    names = ("x", "y", "w", "z")
    Om = pots["Omega"]
    xw, yz, yw, xz = (_d(Om, names, *p) for p in (("x", "w"), ("y", "z"), ("y", "w"), ("x", "z")))
    g = MetricField.from_quadratic(lambda *a: [(xw, 0, 2), (yz, 1, 3), (yw, 1, 2), (xz, 0, 3)], names, box=box,
                                   label="heavenly1")
    z0 = const(0.0)
    rows = [
        (1.0, 0.0, 0.0, 0.0),  # e^00' = dx
        (z0, z0, -0.5 * yw, -0.5 * yz),  # e^01'
        (0.0, 1.0, 0.0, 0.0),  # e^10' = dy
        (z0, z0, 0.5 * xw, 0.5 * xz),  # e^11'
    ]
    frame = frame_from_coframe(rows, names, box=box)
    g = _oriented(g, frame.orientation(_centre(box)))
    res = xw * yz - xz * yw - 1.0
    return ZooEntry(
        "heavenly1", g, frame, ("ASD", "RicciFlat"),
        governing={"heavenly1": _report("heavenly1:residual", _pointwise([res]), 1e-8)},
        potentials=dict(pots), rebuild=lambda p: _heavenly1_from(p, box),
        params={"residual": res}, description="first heavenly equation",
    )


def _centre(box) -> np.ndarray:
    lo, hi = np.asarray(box, float).T
    return 0.5 * (lo + hi)


# -- null-Kahler / second heavenly ----------------------------------------------


def build_heavenly2_nullkahler(Theta=None, branch: str = "hyperkahler", box=None) -> ZooEntry:
    """Null-Kahler metric on ``(w, z, x, y)`` from a potential ``Theta``.

    ``branch`` selects the governing residual: ``hyperkahler`` (f = 0),
    ``asd`` (box f = 0) or ``einstein`` (f affine in x, y).
    """
    names = ("w", "z", "x", "y")
    box = box or FLAT_BOX
    Th = as_chart_expr(Theta if Theta is not None else "x^3/6", names, names)
    return _nullkahler_from({"Theta": Th}, branch, box)


def nullkahler_f(Th: Expr) -> Expr:
    names = ("w", "z", "x", "y")
    d = lambda *v: _d(Th, names, *v)
    return d("w", "x") + d("z", "y") + d("x", "x") * d("y", "y") - d("x", "y") ** 2


def _nullkahler_from(pots: dict, branch: str, box) -> ZooEntry:
    names = ("w", "z", "x", "y")
    Th = pots["Theta"]
    d = lambda *v: _d(Th, names, *v)
    Txx, Tyy, Txy = d("x", "x"), d("y", "y"), d("x", "y")
    g = MetricField.from_quadratic(
        lambda *a: [(1.0, 0, 2), (1.0, 1, 3), (-Txx, 1, 1), (-Tyy, 0, 0), (2.0 * Txy, 0, 1)], names, box=box,
        label="nullkahler",
    )
    z0, one = const(0.0), const(1.0)
    vecs = (
        (one, z0, Tyy, -Txy),  # e_00' = d_w - Txy d_y + Tyy d_x
        (z0, z0, z0, -one),  # e_01' = -d_y
        (z0, one, -Txy, Txx),  # e_10' = d_z + Txx d_y - Txy d_x
        (z0, z0, one, z0),  # e_11' = d_x
    )
    frame = TetradFrame(vecs, names, box=box, volume=const(1.0))
    g = _oriented(g, frame.orientation(_centre(box)))
    f = nullkahler_f(Th)
    fx, fy = _d(f, names, "x"), _d(f, names, "y")
    lam = var(4)
    lax = ExplicitLax(
        (one, z0, Tyy, -Txy - lam, fy),
        (z0, one, -Txy + lam, Txx, -fx),
        names + ("lambda",),
    )
    governing = {}
    if branch == "hyperkahler":
        governing["f"] = _report("nullkahler:f", _pointwise([f]), 1e-8)
        expected = ("ASD", "RicciFlat")
    elif branch == "asd":
        governing["box_f"] = _report("nullkahler:box_f", lambda p: laplace_beltrami(g, f, p), 1e-8)
        expected = ("ASD", "ScalarFlat")
    elif branch == "einstein":
        hess = [_d(f, names, a, b) for a, b in (("x", "x"), ("x", "y"), ("y", "y"))]
        governing["einstein"] = einstein_fit_report(f, hess)
        expected = ("RicciFlat",)
    else:
        raise ValueError(f"unknown branch {branch}")
    return ZooEntry(
        f"heavenly2_{branch}" if branch != "hyperkahler" else "heavenly2", g, frame, expected,
        governing=governing, potentials=dict(pots), frame_factor=const(0.5), lax=lax,
        rebuild=lambda p: _nullkahler_from(p, branch, box), params={"f": f, "branch": branch},
        description="null-Kahler metric with potential Theta",
    )


def einstein_fit_report(f: Expr, hess: Sequence[Expr]):
    """Residual of ``f = x P(w,z) + y Q(w,z) + R(w,z)``.

    Pointwise the condition is that f has no second x, y derivatives; in
    addition P, Q, R are fitted as quadratics in (w, z) by least squares and the
    fitted coefficients are recorded.
    """

    def run(samples):
        vals = [_pointwise(hess)(p) for p in samples]
        w, z, x, y = np.asarray(samples, float).T
        basis_wz = [np.ones_like(w), w, z, w * w, w * z, z * z]
        A = np.stack([x * b for b in basis_wz] + [y * b for b in basis_wz] + basis_wz, axis=1)
        fv = np.array([float(evaluate(f, list(p))) for p in samples])
        coef, *_ = np.linalg.lstsq(A, fv, rcond=None)
        fit = float(np.max(np.abs(A @ coef - fv))) if len(fv) else 0.0
        k = len(basis_wz)
        return ResidualReport.from_values(
            "nullkahler:einstein", vals, 1e-8, fit_residual=fit,
            P=coef[:k].round(12).tolist(), Q=coef[k:2 * k].round(12).tolist(), R=coef[2 * k:].round(12).tolist(),
        )

    return run


# -- hyperhermitian ---------------------------------------------------------------


def build_hyperhermitian(Theta0=None, Theta1=None, box=None) -> ZooEntry:
    names = ("p0", "p1", "w0", "w1")
    box = box or FLAT_BOX
    t0 = as_chart_expr(Theta0 if Theta0 is not None else 0.0, names, names)
    t1 = as_chart_expr(Theta1 if Theta1 is not None else "p0^3/6 + 0.5*p0^2*sin(w0)", names, names)
    return _hyperhermitian_from({"Theta0": t0, "Theta1": t1}, box)


def hyperhermitian_residual(T: Sequence[Expr]) -> list:
    """Components of the coupled ultrahyperbolic system, written with raised indices:
    ``T^C_{,0 w1} - T^C_{,1 w0} + T^B_{,0} T^C_{,1B} - T^B_{,1} T^C_{,0B}``,
    where ``,A`` is ``d/dp^A``."""
    p = (0, 1)
    w = (2, 3)
    out = []
    for C in range(2):
        r = partial(T[C], p[0], w[1]) - partial(T[C], p[1], w[0])
        for B in range(2):
            r = r + partial(T[B], p[0]) * partial(T[C], p[1], p[B]) - partial(T[B], p[1]) * partial(T[C], p[0], p[B])
        out.append(r)
    return out


def _hyperhermitian_from(pots: dict, box) -> ZooEntry:
    names = ("p0", "p1", "w0", "w1")
    T = (pots["Theta0"], pots["Theta1"])
    z0, one = const(0.0), const(1.0)
    dT = lambda B, A: partial(T[B], A)  # d Theta^B / d p^A
    vecs = (
        (one, z0, z0, z0),
        (-dT(0, 0), -dT(1, 0), one, z0),
        (z0, one, z0, z0),
        (-dT(0, 1), -dT(1, 1), z0, one),
    )
    frame = TetradFrame(vecs, names, box=box)
    from .spinor import metric_from_frame

    g = metric_from_frame(frame, label="hyperhermitian")
    g = _oriented(g, frame.orientation(_centre(box)))
    lam = var(4)
    L0 = tuple(vecs[0][k] + lam * vecs[1][k] for k in range(4)) + (z0,)
    L1 = tuple(vecs[2][k] + lam * vecs[3][k] for k in range(4)) + (z0,)
    res = hyperhermitian_residual(T)
    return ZooEntry(
        "hyperhermitian", g, frame, ("ASD",),
        governing={"hyperhermitian": _report("hyperhermitian:residual", _pointwise(res), 1e-8)},
        potentials=dict(pots), lax=ExplicitLax(L0, L1, names + ("lambda",)), lax_mode="raw",
        rebuild=lambda p: _hyperhermitian_from(p, box), description="pseudo-hyperhermitian tetrad",
    )


# -- scalar-flat Kahler -------------------------------------------------------------


def build_sfk(Omega=None, f=None, box=None) -> ZooEntry:
    """Kahler potential ``Omega(w^A, v^A)`` (``v`` for the tilded coordinates)."""
    names = ("w0", "w1", "v0", "v1")
    box = box or FLAT_BOX
    Om = as_chart_expr(Omega if Omega is not None else "-w0*v1 + w1*v0 + 0.3*sin(w0)*sin(v0)", names, names)
    fe = as_chart_expr(f if f is not None else 0.0, names, names)
    return _sfk_from({"Omega": Om, "f": fe}, box)


def _sfk_from(pots: dict, box) -> ZooEntry:
    names = ("w0", "w1", "v0", "v1")
    Om, f = pots["Omega"], pots["f"]
    M = [[partial(Om, A, 2 + B) for B in range(2)] for A in range(2)]
    g = MetricField.from_quadratic(lambda *a: [(M[A][B], A, 2 + B) for A in range(2) for B in range(2)], names,
                                   box=box, label="sfk")
    z0, one = const(0.0), const(1.0)
    # d/d v_0 = -d/d v^1, d/d v_1 = d/d v^0
    e_A1 = [(z0, z0, M[A][1], -M[A][0]) for A in range(2)]
    vecs = ((one, z0, z0, z0), e_A1[0], (z0, one, z0, z0), e_A1[1])
    frame = TetradFrame(vecs, names, box=box, volume=const(1.0))
    G = M[0][0] * M[1][1] - M[0][1] * M[1][0]
    J = ((1, 0, 0, 0), (0, 1, 0, 0), (0, 0, -1, 0), (0, 0, 0, -1))
    g = _oriented(g, frame.orientation(_centre(box)))
    lnG = log_(G * G) * 0.5
    dlow_v = lambda e: (-partial(e, 3), partial(e, 2))  # d/dv_B
    dlow_w = lambda e: (-partial(e, 1), partial(e, 0))  # d/dw_A
    nk1 = [partial(f, A) - sum((M[A][B] * dlow_v(lnG)[B] for B in range(2)), const(0.0)) for A in range(2)]
    box_f = sum((M[A][B] * partial(dlow_w(f)[A], 2 + (1 - B)) * (-1.0 if B == 0 else 1.0)
                 for A in range(2) for B in range(2)), const(0.0))
    lam = var(4)
    lax_vecs = []
    for A in range(2):
        base = [one if k == A else z0 for k in range(2)] + [-lam * e_A1[A][2], -lam * e_A1[A][3]]
        lax_vecs.append(tuple(base) + (lam * lam * partial(f, A),))
    return ZooEntry(
        "sfk", g, frame, ("ASD", "ScalarFlat", "KahlerClosed"),
        governing={
            "nk1": _report("sfk:df_equation", _pointwise(nk1), 1e-8),
            "nk2": _report("sfk:box_f", _pointwise([box_f]), 1e-8),
        },
        potentials=dict(pots), kahler=(J, 1.0), frame_factor=const(0.5), lax=ExplicitLax(lax_vecs[0], lax_vecs[1], names + ("lambda",)),
        rebuild=lambda p: _sfk_from(p, box), params={"G": G},
        description="scalar-flat Kahler metric from a Kahler potential",
    )


def build_sfk_product() -> ZooEntry:
    """Hyperbolic plane minus hyperbolic plane: neutral scalar-flat Kahler."""
    names = ("x1", "y1", "x2", "y2")
    box = ((-1.0, 1.0), (0.5, 1.5), (-1.0, 1.0), (0.5, 1.5))
    g = MetricField.from_quadratic(
        lambda x1, y1, x2, y2: [(1 / y1**2, 0, 0), (1 / y1**2, 1, 1), (-1 / y2**2, 2, 2), (-1 / y2**2, 3, 3)],
        names, box=box, label="sfk_product",
    )
    ref = np.array([0.1, 1.1, -0.2, 0.9])
    o = _kahler_orientation(g, STANDARD_J, ref)
    g = _oriented(g, o)
    return ZooEntry("sfk_product", g, gram_schmidt_frame(g, ref, o), ("ASD", "ScalarFlat", "KahlerClosed"),
                    kahler=(STANDARD_J, -1.0), killing=(1.0, 0.0, 0.0, 0.0),
                    description="product of constant-curvature surfaces with opposite signs")


# -- pp-wave ------------------------------------------------------------------------


def build_ppwave(Q=None, box=None) -> ZooEntry:
    names = ("phi", "x", "y", "z")
    box = box or FLAT_BOX
    q = as_chart_expr(Q if Q is not None else "x^2 + y^2", ("x", "y"), names)
    return _ppwave_from({"Q": q}, box)


def _ppwave_from(pots: dict, box) -> ZooEntry:
    names = ("phi", "x", "y", "z")
    q = pots["Q"]
    g = MetricField.from_quadratic(lambda *a: [(1.0, 0, 2), (-1.0, 3, 1), (-q, 2, 2)], names, box=box, label="ppwave")
    z0 = const(0.0)
    rows = [
        (0.0, 0.0, 1.0, 0.0),  # e^00' = dy
        (0.0, 1.0, 0.0, 0.0),  # e^01' = dx
        (0.0, 0.0, 0.0, 0.5),  # e^10' = dz/2
        (z0 + 0.5, z0, -0.5 * q, z0),  # e^11' = (dphi - Q dy)/2
    ]
    frame = frame_from_coframe(rows, names, box=box)
    g = _oriented(g, frame.orientation(_centre(box)))
    return ZooEntry("ppwave", g, frame, ("ASD", "RicciFlat"), potentials=dict(pots), killing=(1.0, 0.0, 0.0, 0.0),
                    killing_null=True, rebuild=lambda p: _ppwave_from(p, box), description="neutral pp-wave")


# -- null Killing canonical forms ---------------------------------------------------


def build_null_kv_nontwisting(A1=None, A2=None, A3=None, beta=None, Q=None, P=None, box=None) -> ZooEntry:
    names = ("phi", "x", "y", "z")
    box = box or FLAT_BOX
    xy = ("x", "y")
    defaults = {"A1": "0.2*y", "A2": "0.1*x", "A3": "0.15", "beta": "0", "Q": "x*y", "P": "0"}
    given = {"A1": A1, "A2": A2, "A3": A3, "beta": beta, "Q": Q, "P": P}
    pots = {k: as_chart_expr(v if v is not None else defaults[k], xy, names) for k, v in given.items()}
    return _nontwisting_from(pots, box)


def _nontwisting_from(pots: dict, box) -> ZooEntry:
    names = ("phi", "x", "y", "z")
    A1, A2, A3, b, Q, P = (pots[k] for k in ("A1", "A2", "A3", "beta", "Q", "P"))
    z = var(3)
    bx, by = partial(b, 1), partial(b, 2)
    A0 = bx + b * by - b * A1 - b * b * A2 - b * b * b * A3
    a = z * (-by + A1 + b * A2 + b * b * A3)
    c = z * (A2 + 2.0 * b * A3) + P
    s = z * A3 - Q

    # paper form: (dphi + s dy)(dy - b dx) - (dz - a dx - c dy) dx
    def terms(*_):
        return [(1.0, 0, 2), (-b, 0, 1), (s, 2, 2), (-s * b, 2, 1), (-1.0, 3, 1), (a, 1, 1), (c, 2, 1)]

    g = MetricField.from_quadratic(terms, names, box=box, label="null_kv_nontwisting")
    z0 = const(0.0)
    rows = [
        (z0, -b, z0 + 1.0, z0),  # dy - beta dx
        (0.0, 1.0, 0.0, 0.0),  # dx
        (z0, -0.5 * a, -0.5 * c, z0 + 0.5),  # (dz - a dx - c dy)/2
        (z0 + 0.5, z0, 0.5 * s, z0),  # (dphi + s dy)/2
    ]
    frame = frame_from_coframe(rows, names, box=box)
    g = _oriented(g, frame.orientation(_centre(box)))
    flat_proj = all(pots[k].is_const(0.0) for k in ("A1", "A2", "A3", "beta", "P"))
    expected = ("ASD", "RicciFlat") if flat_proj else ("ASD",)
    K = (1.0, 0.0, 0.0, 0.0)
    twist = lambda p: float(np.max(np.abs(twist_form(g, K, p))))
    return ZooEntry(
        "null_kv_nontwisting", g, frame, expected,
        governing={"twist": _report("null_kv_nontwisting:twist", twist, 1e-9)},
        potentials=dict(pots), killing=K, killing_null=True, params={"A0": A0},
        rebuild=lambda p: _nontwisting_from(p, box), description="null Killing vector, zero twist",
    )


def build_null_kv_twisting(A0=None, A1=None, A2=None, A3=None, G=None, box=None) -> ZooEntry:
    names = ("phi", "x", "y", "z")
    box = box or ((-1.0, 1.0), (-1.0, 1.0), (-1.0, 1.0), (-1.0, 1.0))
    xy = ("x", "y")
    pots = {k: as_chart_expr(v, xy, names) for k, v in (("A0", A0), ("A1", A1), ("A2", A2), ("A3", A3))}
    pots["G"] = as_chart_expr(G if G is not None else "z^2/2 - 0.3*z*y", ("x", "y", "z"), names)
    return _twisting_from(pots, box)


def g_equation_residual(pots: dict) -> Expr:
    A0, A1, A2, A3, G = (pots[k] for k in ("A0", "A1", "A2", "A3", "G"))
    z = var(3)
    Gzz = partial(G, 3, 3)
    Pz = A0 + z * A1 + z * z * A2 + z * z * z * A3
    return partial(Gzz, 1) + z * partial(Gzz, 2) + Pz * partial(Gzz, 3)


def _twisting_from(pots: dict, box) -> ZooEntry:
    names = ("phi", "x", "y", "z")
    A0, A1, A2, A3, G = (pots[k] for k in ("A0", "A1", "A2", "A3", "G"))
    z = var(3)
    Gz, Gzz, Gzy = partial(G, 3), partial(G, 3, 3), partial(G, 3, 2)
    Pz = A0 + z * A1 + z * z * A2 + z * z * z * A3
    cy = A3 * Gz
    cx = A2 * Gz + 2.0 * A3 * (z * Gz - G) - Gzy

    # paper form: (dphi + cy dy + cx dx)(dy - z dx) - Gzz dx (dz - Pz dx)
    def terms(*_):
        return [(1.0, 0, 2), (-z, 0, 1), (cy, 2, 2), (-z * cy, 2, 1), (cx, 1, 2), (-z * cx, 1, 1),
                (-Gzz, 1, 3), (Gzz * Pz, 1, 1)]

    g = MetricField.from_quadratic(terms, names, box=box, label="null_kv_twisting")
    z0 = const(0.0)
    rows = [
        (z0, -z, z0 + 1.0, z0),  # dy - z dx
        (0.0, 1.0, 0.0, 0.0),  # dx
        (z0, -0.5 * Gzz * Pz, z0, 0.5 * Gzz),  # Gzz (dz - Pz dx)/2
        (z0 + 0.5, 0.5 * cx, 0.5 * cy, z0),  # (dphi + cy dy + cx dx)/2
    ]
    frame = frame_from_coframe(rows, names, box=box)
    g = _oriented(g, frame.orientation(_centre(box)))
    res = g_equation_residual(pots)
    return ZooEntry(
        "null_kv_twisting", g, frame, ("ASD",),
        governing={"G_equation": _report("null_kv_twisting:G_equation", _pointwise([res]), 1e-8)},
        potentials=dict(pots), killing=(1.0, 0.0, 0.0, 0.0), killing_null=True,
        rebuild=lambda p: _twisting_from(p, box), description="null Killing vector with twist",
    )


# -- twistor example ----------------------------------------------------------------


def build_twistor_example(A=None, B=None, box=None) -> ZooEntry:
    names = ("X", "Y", "W", "Z")
    box = box or ((-1.0, 1.0), (-1.0, 1.0), (0.2, 1.2), (0.2, 1.2))
    pots = {
        "A": as_chart_expr(A if A is not None else 0.3, ("X", "Y"), names),
        "B": as_chart_expr(B if B is not None else 0.0, ("X", "Y"), names),
    }
    return _twistor_from(pots, box)


def _twistor_from(pots: dict, box) -> ZooEntry:
    names = ("X", "Y", "W", "Z")
    A, B = pots["A"], pots["B"]
    W, Z = var(2), var(3)

    def terms(*_):
        return [(1.0, 0, 2), (1.0, 1, 3), (-W * A, 0, 0), (-W * B - Z * A, 0, 1), (-Z * B, 1, 1)]

    g = MetricField.from_quadratic(terms, names, box=box, label="twistor_example")
    z0 = const(0.0)
    rows = [
        (1.0, 0.0, 0.0, 0.0),  # dX
        (0.0, 1.0, 0.0, 0.0),  # dY
        (0.5 * Z * A, 0.5 * Z * B, z0, z0 - 0.5),  # -(dZ - Z omega)/2
        (-0.5 * W * A, -0.5 * W * B, z0 + 0.5, z0),  # (dW - W omega)/2
    ]
    frame = frame_from_coframe(rows, names, box=box)
    g = _oriented(g, frame.orientation(_centre(box)))
    K = (const(0.0), const(0.0), W, Z)
    return ZooEntry(
        "twistor_example", g, frame, ("ASD",),
        potentials=dict(pots), killing=K, killing_null=True,
        rebuild=lambda p: _twistor_from(p, box), description="conformal structure with twisting null CKV",
    )


# -- Tod's scalar-flat Kahler metrics ----------------------------------------------


def build_tod_sfk(W=None, eta=None, box=None) -> ZooEntry:
    """Metric on ``(x, y, theta, phi)``; ``eta`` is a triple of components along
    ``dx, dy, dtheta``."""
    names = ("x", "y", "theta", "phi")
    box = box or ((-0.8, 0.8), (-0.8, 0.8), (0.6, 2.5), (-1.0, 1.0))
    arg = ("x", "y", "theta")
    pots = {"W": as_chart_expr(W if W is not None else 1.0, arg, names)}
    eta = eta if eta is not None else (0.0, 0.0, 0.0)
    for k, e in zip(("eta_x", "eta_y", "eta_theta"), eta):
        pots[k] = as_chart_expr(e, arg, names)
    return _tod_from(pots, box)


def tod_eta_for_linear_W(b: float) -> tuple:
    """Connection form matching ``W = a + b cos(theta)``."""
    return (
        lambda x, y, th: 2.0 * b * y / (1 + x * x + y * y),
        lambda x, y, th: -2.0 * b * x / (1 + x * x + y * y),
        0.0,
    )


def _tod_from(pots: dict, box) -> ZooEntry:
    names = ("x", "y", "theta", "phi")
    W = pots["W"]
    ex, ey, et = pots["eta_x"], pots["eta_y"], pots["eta_theta"]
    x, y, th = var(0), var(1), var(2)
    conf = 4.0 * W / (1.0 + x * x + y * y) ** 2
    s2 = sin_(th) ** 2 / W
    eta = (ex, ey, et, const(1.0))
    g_rows = [[const(0.0)] * 4 for _ in range(4)]
    for i in range(4):
        for j in range(4):
            v = -s2 * eta[i] * eta[j]
            if i == j and i < 2:
                v = v + conf
            if i == j == 2:
                v = v - W
            g_rows[i][j] = v
    g = MetricField(tuple(tuple(r) for r in g_rows), names, box=box, label="tod_sfk")
    # Kahler form: conf dx^dy + sin(theta) dtheta ^ (dphi + eta)
    st = sin_(th)
    om = [[const(0.0)] * 4 for _ in range(4)]
    om[0][1], om[1][0] = conf, -conf
    for j in range(4):
        if j != 2:
            om[2][j] = om[2][j] + st * eta[j]
            om[j][2] = om[j][2] - st * eta[j]
    gi = inverse_expr([list(r) for r in g.components])
    J = tuple(tuple(sum((gi[a][c] * om[c][b] for c in range(4)), const(0.0)) for b in range(4)) for a in range(4))
    ref = _centre(box)
    omv = np.array([[float(evaluate(e, list(ref))) for e in row] for row in om])
    o = self_dual_orientation(g, omv, ref)
    g = _oriented(g, o)
    frame = gram_schmidt_frame(g, ref, o)
    Q = uhwave_source(W)
    return ZooEntry(
        "tod_sfk", g, frame, ("ASD", "ScalarFlat", "KahlerClosed"),
        governing={"uhwave": _report("tod_sfk:uhwave", _pointwise([Q]), 1e-8)},
        potentials=dict(pots), kahler=(J, -1.0), killing=(0.0, 0.0, 0.0, 1.0),
        rebuild=lambda p: _tod_from(p, box), description="scalar-flat Kahler deformation of g0",
    )


def uhwave_source(W: Expr) -> Expr:
    """``Lap_1 Q - Lap_2 Q`` for ``Q = dW/dt`` with ``t = cos(theta)``."""
    x, y, th = var(0), var(1), var(2)
    Q = -partial(W, 2) / sin_(th)
    lap1 = (1.0 + x * x + y * y) ** 2 / 4.0 * (partial(Q, 0, 0) + partial(Q, 1, 1))
    lap2 = partial(sin_(th) * partial(Q, 2), 2) / sin_(th)
    return lap1 - lap2


# -- Ooguri-Vafa --------------------------------------------------------------------


def build_ooguri_vafa(A: float = 1.0, B: float = 1.0, box=None) -> ZooEntry:
    """Chart ``(a, b, c, d)`` with ``zeta = a + i b`` (``b > 0``) and ``p = c + i d``."""
    names = ("a", "b", "c", "d")
    box = box or ((-0.5, 0.5), (0.6, 1.4), (0.3, 1.0), (-0.6, 0.6))
    pots = {"A": as_chart_expr(A, (), names), "B": as_chart_expr(B, (), names)}
    return _ov_from(pots, box)


def ov_potential(A, B, X) -> Expr:
    s = sqrt_(A * A + B * X)
    return 2.0 * s + A * log_((s - A) / (s + A))


def _ov_from(pots: dict, box) -> ZooEntry:
    names = ("a", "b", "c", "d")
    A, B = pots["A"], pots["B"]
    a, b, c, d = (var(i) for i in range(4))
    X = 4.0 * b * b * (c * c + d * d)  # h^{zeta zetabar} |p|^2 on the upper half plane
    Om = ov_potential(A, B, X)
    H = [[partial(Om, i, j) for j in range(4)] for i in range(4)]
    Jm = STANDARD_J
    # g = (H + J^T H J)/2: the J-invariant part of the real Hessian
    comps = []
    for i in range(4):
        row = []
        for j in range(4):
            acc = H[i][j]
            for k in range(4):
                for l in range(4):
                    if Jm[k][i] and Jm[l][j]:
                        acc = acc + float(Jm[k][i] * Jm[l][j]) * H[k][l]
            row.append(0.5 * acc)
        comps.append(tuple(row))
    excl = lambda p: 4.0 * p[1] ** 2 * (p[2] ** 2 + p[3] ** 2) < 1e-6
    g = MetricField(tuple(comps), names, box=box, excluded=excl, label="ooguri_vafa")
    ref = _centre(box)
    o = _kahler_orientation(g, Jm, ref)
    g = _oriented(g, o)

    def det_residual(p):
        (j,) = eval_jets([Om], np.asarray(p, float))
        D = 0.5 * np.array([[1, -1j, 0, 0], [0, 0, 1, -1j]])
        M = D @ j.hess @ D.conj().T
        return float(np.real(np.linalg.det(M))) + 1.0

    return ZooEntry(
        "ooguri_vafa", g, gram_schmidt_frame(g, ref, o), ("ASD", "RicciFlat", "KahlerClosed"),
        governing={"det": _report("ooguri_vafa:det_plus_one", det_residual, 1e-8)},
        potentials=dict(pots), kahler=(Jm, -1.0), rebuild=lambda p: _ov_from(p, box),
        params={"Omega": Om, "X": X}, description="Ooguri-Vafa hyperkahler metric",
    )


# -- random non-ASD metrics -----------------------------------------------------------


def build_perturbed(seed: int = 0, amplitude: float = 0.15) -> ZooEntry:
    """Flat coordinate tetrad plus random trigonometric terms; generically not ASD."""
    names = ("x0", "x1", "x2", "x3")
    rng = np.random.default_rng(seed)
    xs = [var(i) for i in range(4)]
    vecs = []
    for i in range(4):
        row = []
        for mu in range(4):
            k = rng.normal(size=4)
            ph = rng.uniform(0, 2 * math.pi)
            arg = sum((float(k[j]) * xs[j] for j in range(4)), const(ph))
            term = amplitude * float(rng.normal()) * sin_(arg)
            row.append((1.0 if i == mu else 0.0) + term)
        vecs.append(tuple(row))
    frame = TetradFrame(tuple(vecs), names, box=((-0.5, 0.5),) * 4)
    from .spinor import metric_from_frame

    g = metric_from_frame(frame, label=f"perturbed{seed}")
    g = _oriented(g, frame.orientation(np.zeros(4)))
    return ZooEntry(f"perturbed{seed}", g, frame, (), description="random non-ASD metric")


# ---------------------------------------------------------------------------
# Registry
# ---------------------------------------------------------------------------


def _lift(kind):
    def build():
        from .einstein_weyl import dkp_lift_entry, toda_lift_entry

        return toda_lift_entry() if kind == "toda" else dkp_lift_entry()

    return build


SPECIAL_LAX_KINDS = {
    "hyperhermitian": ("Theta0", "Theta1"),
    "sfk": ("Omega", "f"),
    "nullkahler": ("Theta",),
    "interpolating": ("u", "w", "b", "c"),
}


class MissingDataError(KeyError):
    pass


def special_lax_check(kind: str, data: dict, samples=None, n: int = 20, seed: int = 0,
                      tolerance: float = 1e-8) -> ResidualReport:
    """Commutator residual of the Lax pair attached to one of the special families."""
    if kind not in SPECIAL_LAX_KINDS:
        raise ValueError(f"unknown Lax family {kind!r}; choose from {', '.join(SPECIAL_LAX_KINDS)}")
    missing = [k for k in SPECIAL_LAX_KINDS[kind] if k not in data]
    if missing:
        raise MissingDataError(f"{kind} Lax pair needs {', '.join(missing)}")
    if kind == "interpolating":
        from .einstein_weyl import EW_NAMES, InterpolatingLax, interpolating_lax_residual

        u, w = (as_chart_expr(data[k], EW_NAMES, EW_NAMES) for k in ("u", "w"))
        box = data.get("box", ((-1.0, 1.0), (-1.0, 1.0), (0.5, 1.5)))
        if samples is None:
            samples = sample_box(box, n, seed)
        return interpolating_lax_residual(InterpolatingLax(u, w, float(data["b"]), float(data["c"])), samples,
                                          tolerance=tolerance)
    if kind == "hyperhermitian":
        entry = build_hyperhermitian(data["Theta0"], data["Theta1"])
    elif kind == "sfk":
        entry = build_sfk(data["Omega"], data["f"])
    else:
        entry = build_heavenly2_nullkahler(data["Theta"], branch=data.get("branch", "asd"))
    if samples is None:
        samples = entry.samples(n, seed)
    return entry.explicit_lax_report(samples, tolerance=tolerance)


REGISTRY: dict = {
    "flat": build_flat,
    "g0": build_g0,
    "heavenly1": build_heavenly1,
    "heavenly2": build_heavenly2_nullkahler,
    "heavenly2_asd": lambda: build_heavenly2_nullkahler("x^3/6 + w*exp(x)", branch="asd"),
    "hyperhermitian": build_hyperhermitian,
    "sfk": build_sfk,
    "sfk_product": build_sfk_product,
    "ppwave": build_ppwave,
    "null_kv_nontwisting": build_null_kv_nontwisting,
    "null_kv_twisting": build_null_kv_twisting,
    "twistor_example": build_twistor_example,
    "tod_sfk": build_tod_sfk,
    "tod_sfk_linear": lambda: build_tod_sfk("1 + 0.3*cos(theta)", tod_eta_for_linear_W(0.3)),
    "ooguri_vafa": build_ooguri_vafa,
    "toda_lift": _lift("toda"),
    "dkp_lift": _lift("dkp"),
}


def entry_names() -> list:
    return list(REGISTRY)


def get_entry(name: str, **kw) -> ZooEntry:
    try:
        builder = REGISTRY[name]
    except KeyError:
        raise UnknownEntryError(f"unknown zoo entry {name!r}; known: {', '.join(REGISTRY)}") from None
    return builder(**kw)
