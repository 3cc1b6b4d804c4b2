"""Metric fields, Levi-Civita curvature, Hodge star on 2-forms and Weyl splitting.

Conventions
-----------
* ``Gamma[a, b, c]`` is the Christoffel symbol with upper index ``a``.
* ``R^a_bcd = d_c Gamma^a_db - d_d Gamma^a_cb + Gamma^a_ce Gamma^e_db - Gamma^a_de Gamma^e_cb``,
  Ricci ``R_bd = R^a_bad``.
* The volume form is ``eps_{01..} = orientation * sqrt|det g|`` in chart order.
  Frames fix ``orientation`` so that their primed 2-forms are self-dual.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, replace
from typing import Callable, Optional, Sequence

import numpy as np

from .fields import Expr, ScalarField, eval_jets, exp_, var
from .jets import ArrayJet, DomainError, SingularPointError
from .reports import ResidualReport, sample_box

ASD_TOL = 1e-8


def levi_civita(n: int) -> np.ndarray:
    eps = np.zeros((n,) * n)
    for perm in itertools.permutations(range(n)):
        inv = sum(1 for i in range(n) for j in range(i + 1, n) if perm[i] > perm[j])
        eps[perm] = -1.0 if inv % 2 else 1.0
    return eps


EPS4 = levi_civita(4)
EPS3 = levi_civita(3)


@dataclass(frozen=True, eq=False)
class MetricField:
    """Symmetric matrix of expression fields on a chart."""

    components: tuple  # tuple of tuples of Expr
    names: tuple
    signature: tuple = (2, 2)
    orientation: int = 1
    box: Optional[tuple] = None
    excluded: Optional[Callable[[np.ndarray], bool]] = None
    label: str = ""

    @classmethod
    def from_callable(cls, fn: Callable, names: Sequence[str], **kw) -> "MetricField":
        names = tuple(names)
        rows = fn(*[var(i) for i in range(len(names))])
        n = len(names)
        comps = tuple(tuple(Expr.wrap(rows[i][j]) for j in range(n)) for i in range(n))
        return cls(comps, names, **kw)

    @classmethod
    def from_quadratic(cls, terms: Callable, names: Sequence[str], **kw) -> "MetricField":
        """Build from a list of ``(coefficient, i, j)`` symmetric-product terms.

        A term ``(c, i, j)`` stands for ``c dx^i dx^j`` with the symmetrised product,
        so ``(1, 0, 1)`` gives ``g_01 = g_10 = 1/2``.
        """
        names = tuple(names)
        n = len(names)
        acc = [[Expr.wrap(0.0) for _ in range(n)] for _ in range(n)]
        for c, i, j in terms(*[var(k) for k in range(n)]):
            c = Expr.wrap(c)
            if i == j:
                acc[i][i] = acc[i][i] + c
            else:
                half = c * 0.5
                acc[i][j] = acc[i][j] + half
                acc[j][i] = acc[j][i] + half
        return cls(tuple(tuple(r) for r in acc), names, **kw)

    @property
    def dim(self) -> int:
        return len(self.names)

    def component(self, i: int, j: int) -> ScalarField:
        return ScalarField(self.components[i][j], self.names, self.box)

    def unique_components(self):
        return [(i, j) for i in range(self.dim) for j in range(i, self.dim)]

    def admissible(self, p) -> bool:
        p = np.asarray(p, dtype=float)
        if self.box is not None:
            lo, hi = np.asarray(self.box, dtype=float).T
            if np.any(p < lo) or np.any(p > hi):
                return False
        if self.excluded is not None and self.excluded(p):
            return False
        try:
            v = self.value(p)
        except (SingularPointError, ZeroDivisionError, FloatingPointError):
            return False
        if not np.all(np.isfinite(v)):
            return False
        ev = np.linalg.eigvalsh(v)
        scale = max(1.0, np.max(np.abs(ev)))
        if np.min(np.abs(ev)) < 1e-9 * scale:
            return False
        return (int(np.sum(ev > 0)), int(np.sum(ev < 0))) == tuple(self.signature)

    def check_point(self, p) -> np.ndarray:
        p = np.asarray(p, dtype=float)
        if p.shape != (self.dim,):
            raise DomainError(f"expected {self.dim} coordinates")
        if self.box is not None:
            lo, hi = np.asarray(self.box, dtype=float).T
            if np.any(p < lo) or np.any(p > hi):
                raise DomainError(f"point {p} outside box")
        if self.excluded is not None and self.excluded(p):
            raise DomainError(f"point {p} in excluded set")
        return p

    def value(self, p) -> np.ndarray:
        p = np.asarray(p, dtype=float)
        from .fields import evaluate

        memo: dict = {}
        env = [float(c) for c in p]
        n = self.dim
        return np.array([[float(evaluate(self.components[i][j], env, memo)) for j in range(n)] for i in range(n)])

    def jets(self, p) -> ArrayJet:
        p = self.check_point(p)
        n = self.dim
        idx = self.unique_components()
        js = eval_jets([self.components[i][j] for i, j in idx], p)
        val = np.empty((n, n))
        d1 = np.empty((n, n, n))
        d2 = np.empty((n, n, n, n))
        for (i, j), jt in zip(idx, js):
            for a, b in ((i, j), (j, i)):
                val[a, b] = jt.value
                d1[a, b] = jt.grad
                d2[a, b] = jt.hess
        if abs(np.linalg.det(val)) < 1e-12:
            raise SingularPointError(f"degenerate metric at {p}")
        return ArrayJet(val, d1, d2)

    def samples(self, n: int, seed: int = 0, box=None) -> np.ndarray:
        box = box if box is not None else self.box
        if box is None:
            raise ValueError("metric has no chart box; pass one explicitly")
        return sample_box(box, n, seed, accept=self.admissible)

    def conformal(self, f) -> "MetricField":
        """The metric ``exp(f) * g`` for a field/expression ``f`` on the same chart."""
        ef = exp_(Expr.wrap(f))
        comps = tuple(tuple(ef * c for c in row) for row in self.components)
        return replace(self, components=comps)

    def scaled(self, c: float) -> "MetricField":
        comps = tuple(tuple(Expr.wrap(c) * x for x in row) for row in self.components)
        sig = self.signature if c > 0 else tuple(reversed(self.signature))
        return replace(self, components=comps, signature=sig)


# ---------------------------------------------------------------------------
# Curvature
# ---------------------------------------------------------------------------


@dataclass
class CurvaturePack:
    metric: np.ndarray
    inverse: np.ndarray
    christoffel: np.ndarray
    dchristoffel: np.ndarray  # [a, b, c, e] = d_e Gamma^a_bc
    riemann: np.ndarray  # R^a_bcd
    ricci: np.ndarray
    scalar: float
    weyl: np.ndarray  # C_abcd, all indices down

    @property
    def riemann_down(self) -> np.ndarray:
        return np.einsum("ae,ebcd->abcd", self.metric, self.riemann)

    @property
    def weyl_mixed(self) -> np.ndarray:
        return np.einsum("ae,ebcd->abcd", self.inverse, self.weyl)

    @property
    def tracefree_ricci(self) -> np.ndarray:
        return self.ricci - self.scalar / self.metric.shape[0] * self.metric

    def bianchi_residual(self) -> float:
        R = self.riemann
        cyc = R + R.transpose(0, 2, 3, 1) + R.transpose(0, 3, 1, 2)
        return float(np.max(np.abs(cyc)) / (np.max(np.abs(R)) + 1.0))

    def weyl_trace_residual(self) -> float:
        tr = np.einsum("ac,abcd->bd", self.inverse, self.weyl)
        return float(np.max(np.abs(tr)) / (np.max(np.abs(self.weyl)) + 1.0))


def christoffel_jet(G: ArrayJet):
    """Christoffel symbols and their first derivatives from a metric jet."""
    g, dg, d2g = G.val, G.d1, G.d2
    gi = np.linalg.inv(g)
    # lower: Gamma_{d,bc} = 1/2 (d_b g_dc + d_c g_db - d_d g_bc);  dg[a,b,c] = d_c g_ab
    low = 0.5 * (np.einsum("dcb->dbc", dg) + np.einsum("dbc->dbc", dg) - np.einsum("bcd->dbc", dg))
    gam = np.einsum("ad,dbc->abc", gi, low)
    dlow = 0.5 * (
        np.einsum("dcbe->dbce", d2g) + np.einsum("dbce->dbce", d2g) - np.einsum("bcde->dbce", d2g)
    )
    dgi = -np.einsum("af,fhe,hd->ade", gi, dg, gi)
    dgam = np.einsum("ade,dbc->abce", dgi, low) + np.einsum("ad,dbce->abce", gi, dlow)
    return gi, gam, dgam


def riemann_from_connection(gam: np.ndarray, dgam: np.ndarray) -> np.ndarray:
    # dgam[a,b,c,e] = d_e Gamma^a_bc
    term1 = np.einsum("adbc->abcd", dgam)  # d_c Gamma^a_db
    term2 = np.einsum("acbd->abcd", dgam)  # d_d Gamma^a_cb
    q1 = np.einsum("ace,edb->abcd", gam, gam)
    q2 = np.einsum("ade,ecb->abcd", gam, gam)
    return term1 - term2 + q1 - q2


def weyl_tensor(g: np.ndarray, Rdown: np.ndarray, ric: np.ndarray, s: float) -> np.ndarray:
    n = g.shape[0]
    kn = (
        np.einsum("ac,bd->abcd", g, ric)
        - np.einsum("ad,bc->abcd", g, ric)
        - np.einsum("bc,ad->abcd", g, ric)
        + np.einsum("bd,ac->abcd", g, ric)
    )
    gg = np.einsum("ac,bd->abcd", g, g) - np.einsum("ad,bc->abcd", g, g)
    return Rdown - kn / (n - 2) + s / ((n - 1) * (n - 2)) * gg


def curvature_from_jet(G: ArrayJet) -> CurvaturePack:
    gi, gam, dgam = christoffel_jet(G)
    R = riemann_from_connection(gam, dgam)
    ric = np.einsum("abad->bd", R)
    s = float(np.einsum("bd,bd->", gi, ric))
    Rdown = np.einsum("ae,ebcd->abcd", G.val, R)
    C = weyl_tensor(G.val, Rdown, ric, s)
    return CurvaturePack(G.val, gi, gam, dgam, R, ric, s, C)


def curvature_pack(g: MetricField, p) -> CurvaturePack:
    """All Levi-Civita curvature tensors of ``g`` at ``p`` from exact jets."""
    return curvature_from_jet(g.jets(p))


# ---------------------------------------------------------------------------
# Hodge star and the Weyl split
# ---------------------------------------------------------------------------


def volume_tensor(gval: np.ndarray, orientation: int = 1) -> np.ndarray:
    n = gval.shape[0]
    eps = EPS4 if n == 4 else EPS3 if n == 3 else levi_civita(n)
    return orientation * math.sqrt(abs(np.linalg.det(gval))) * eps


def hodge2_matrix(gval: np.ndarray, orientation: int = 1) -> np.ndarray:
    """The star as a linear map on 2-forms: ``(*F)_ab = S[a,b,c,d] F_cd``."""
    gi = np.linalg.inv(gval)
    eps = volume_tensor(gval, orientation)
    return 0.5 * np.einsum("abef,ec,fd->abcd", eps, gi, gi)


def hodge_star2_at(gval: np.ndarray, F: np.ndarray, orientation: int = 1) -> np.ndarray:
    return np.einsum("abcd,cd->ab", hodge2_matrix(gval, orientation), F)


def hodge_star2(g: MetricField, p, F: np.ndarray) -> np.ndarray:
    """``*F`` for an antisymmetric 4x4 array ``F``."""
    p = g.check_point(p)
    gval = g.value(p)
    if abs(np.linalg.det(gval)) < 1e-12:
        raise SingularPointError("degenerate metric")
    return hodge_star2_at(gval, np.asarray(F, dtype=float), g.orientation)


def split_weyl_tensor(gval: np.ndarray, C: np.ndarray, orientation: int = 1):
    S = hodge2_matrix(gval, orientation)
    starC = np.einsum("abef,efcd->abcd", S, C)
    Cp = 0.5 * (C + starC)
    return Cp, C - Cp


def weyl_split(g: MetricField, p):
    """Self-dual and anti-self-dual parts of the Weyl tensor (all indices down)."""
    pack = curvature_pack(g, p)
    return split_weyl_tensor(pack.metric, pack.weyl, g.orientation)


def sd_weyl_ratio(g: MetricField, p) -> float:
    pack = curvature_pack(g, p)
    Cp, _ = split_weyl_tensor(pack.metric, pack.weyl, g.orientation)
    mixed_p = np.einsum("ae,ebcd->abcd", pack.inverse, Cp)
    return float(np.linalg.norm(mixed_p) / (np.linalg.norm(pack.weyl_mixed) + 1.0))


def asd_residual(g: MetricField, samples, tolerance: float = ASD_TOL, name: str = "asd") -> ResidualReport:
    """Worst normalised self-dual Weyl norm over the sample points."""
    vals = [sd_weyl_ratio(g, p) for p in samples]
    return ResidualReport.from_values(name, vals, tolerance)


def riemann_residual(g: MetricField, samples, tolerance: float = 1e-10, name: str = "flat") -> ResidualReport:
    vals = [np.max(np.abs(curvature_pack(g, p).riemann)) for p in samples]
    return ResidualReport.from_values(name, vals, tolerance)


def ricci_flat_residual(g: MetricField, samples, tolerance: float = 1e-7, name: str = "ricci_flat") -> ResidualReport:
    """Trace-free Ricci and scalar curvature, reported together (max of both)."""
    tf, sc = [], []
    for p in samples:
        pack = curvature_pack(g, p)
        tf.append(np.max(np.abs(pack.tracefree_ricci)))
        sc.append(abs(pack.scalar))
    rep = ResidualReport.from_values(name, np.maximum(tf, sc), tolerance)
    rep.extra.update(tracefree_ricci=float(np.max(tf)), scalar=float(np.max(sc)))
    return rep


def scalar_flat_residual(g: MetricField, samples, tolerance: float = 1e-8, name: str = "scalar_flat") -> ResidualReport:
    return ResidualReport.from_values(name, [curvature_pack(g, p).scalar for p in samples], tolerance)


def weyl_residual(g: MetricField, samples, tolerance: float = 1e-9, name: str = "conformally_flat") -> ResidualReport:
    return ResidualReport.from_values(name, [np.max(np.abs(curvature_pack(g, p).weyl)) for p in samples], tolerance)


# ---------------------------------------------------------------------------
# Lie derivatives, Killing vectors, twist
# ---------------------------------------------------------------------------


def vector_jets(K: Sequence, names, p) -> ArrayJet:
    js = eval_jets([Expr.wrap(k) for k in K], np.asarray(p, dtype=float))
    return ArrayJet.stack(js, (len(K),))


def lie_derivative_metric(G: ArrayJet, Kj: ArrayJet) -> np.ndarray:
    g, dg = G.val, G.d1
    K, dK = Kj.val, Kj.d1  # dK[c, a] = d_a K^c
    return np.einsum("c,abc->ab", K, dg) + np.einsum("cb,ca->ab", g, dK) + np.einsum("ac,cb->ab", g, dK)


def conformal_killing_residual(g: MetricField, K: Sequence, p) -> tuple:
    """Return ``(residual, c)`` for ``L_K g = c g`` at ``p``."""
    G = g.jets(p)
    L = lie_derivative_metric(G, vector_jets(K, g.names, p))
    c = float(np.einsum("ab,ab->", np.linalg.inv(G.val), L)) / g.dim
    return float(np.max(np.abs(L - c * G.val))), c


def killing_norm(g: MetricField, K: Sequence, p) -> float:
    G = g.jets(p)
    Kv = vector_jets(K, g.names, p).val
    return float(Kv @ G.val @ Kv)


def twist_form(g: MetricField, K: Sequence, p) -> np.ndarray:
    """Components of the 3-form ``k ^ dk`` with ``k = g(K, .)``."""
    G = g.jets(p)
    Kj = vector_jets(K, g.names, p)
    k = G.val @ Kj.val
    # d_c k_a = d_c g_ab K^b + g_ab d_c K^b
    dk_ = np.einsum("abc,b->ac", G.d1, Kj.val) + np.einsum("ab,bc->ac", G.val, Kj.d1)
    F = dk_.T - dk_  # F_ca = d_c k_a - d_a k_c
    out = (
        np.einsum("a,bc->abc", k, F)
        + np.einsum("b,ca->abc", k, F)
        + np.einsum("c,ab->abc", k, F)
    )
    return out


def kahler_form_closure(g: MetricField, J: Sequence[Sequence], p) -> float:
    """Max component of ``d omega`` for ``omega(X, Y) = g(X, J Y)``.

    ``J`` is a constant-coefficient endomorphism ``J[a][b] = J^a_b`` or a matrix of
    expressions on the chart.
    """
    n = g.dim
    G = g.jets(p)
    Jexpr = [[Expr.wrap(J[a][b]) for b in range(n)] for a in range(n)]
    Jj = ArrayJet.stack(eval_jets([Jexpr[a][b] for a in range(n) for b in range(n)], np.asarray(p, float)), (n, n))
    # omega_ab = g_ac J^c_b
    d = np.einsum("ace,cb->abe", G.d1, Jj.val) + np.einsum("ac,cbe->abe", G.val, Jj.d1)
    # (d omega)_abc = d_a w_bc + d_b w_ca + d_c w_ab
    dw = np.einsum("bca->abc", d) + np.einsum("cab->abc", d) + np.einsum("abc->abc", d)
    return float(np.max(np.abs(dw)))


# ---------------------------------------------------------------------------
# Petrov-Penrose classification
# ---------------------------------------------------------------------------

PETROV_PATTERNS = {
    (1, 1, 1, 1): "I",
    (2, 1, 1): "II",
    (2, 2): "D",
    (3, 1): "III",
    (4,): "N",
}


class PetrovIndeterminate(ValueError):
    pass


@dataclass
class WeylQuartic:
    coeffs: np.ndarray  # c0..c4, P(x) = sum c_k x^k
    roots: list
    multiplicities: tuple
    petrovType: str
    allRootsReal: bool


def quartic_from_spinor(psi: np.ndarray) -> np.ndarray:
    """Coefficients of ``P(x) = mu^A mu^B mu^C mu^D psi_ABCD`` with ``mu = (1, x)``."""
    c = np.zeros(5)
    for idx in itertools.product((0, 1), repeat=4):
        c[sum(idx)] += psi[idx]
    return c


def _rotated_quartic(c: np.ndarray, theta: float) -> np.polynomial.Polynomial:
    """``P`` in the chart ``x = (s + c x') / (c - s x')``, homogenised back to degree 4."""
    co, si = math.cos(theta), math.sin(theta)
    num = np.polynomial.Polynomial([si, co])
    den = np.polynomial.Polynomial([co, -si])
    out = np.polynomial.Polynomial([0.0])
    for k in range(5):
        out = out + c[k] * num**k * den ** (4 - k)
    coef = np.zeros(5)
    coef[: len(out.coef)] = out.coef
    return np.polynomial.Polynomial(coef)


def _chordal(a: complex, b: complex) -> float:
    return abs(a - b) / math.sqrt((1 + abs(a) ** 2) * (1 + abs(b) ** 2))


def _form_dx(a: np.ndarray) -> np.ndarray:
    # a[k] is the coefficient of x^k y^(n-k)
    return np.array([k * a[k] for k in range(1, len(a))])


def _form_dy(a: np.ndarray) -> np.ndarray:
    n = len(a) - 1
    return np.array([(n - k) * a[k] for k in range(n)])


def quartic_invariants(c) -> tuple[float, float]:
    """The two SL(2) invariants ``I`` and ``J`` of the binary quartic ``sum c_k x^k``."""
    p = [c[k] / math.comb(4, k) for k in range(5)]
    I = p[0] * p[4] - 4 * p[1] * p[3] + 3 * p[2] ** 2
    J = float(np.linalg.det(np.array([[p[0], p[1], p[2]], [p[1], p[2], p[3]], [p[2], p[3], p[4]]])))
    return float(I), J


def quartic_hessian(c) -> np.ndarray:
    """``P_xx P_yy - P_xy^2`` of the homogenised quartic, a quartic covariant."""
    c = np.asarray(c, float)
    pxx = _form_dx(_form_dx(c))
    pyy = _form_dy(_form_dy(c))
    pxy = _form_dx(_form_dy(c))
    return np.convolve(pxx, pyy) - np.convolve(pxy, pxy)


def _partitions(n_items: int, sizes: tuple) -> list:
    """All ways to split ``range(n_items)`` into blocks with the given sizes."""
    if not sizes:
        return [[]]
    out = []
    items = list(range(n_items))

    def rec(left, sizes_left):
        if not sizes_left:
            yield []
            return
        first, rest = left[0], left[1:]
        for others in itertools.combinations(rest, sizes_left[0] - 1):
            block = [first, *others]
            remaining = [i for i in left if i not in block]
            for tail in rec(remaining, sizes_left[1:]):
                yield [block, *tail]

    for perm in set(itertools.permutations(sizes)):
        out.extend(rec(items, list(perm)))
    return out


def _group_roots(c: np.ndarray, pattern: tuple) -> list:
    """Roots of the quartic as points on the sphere, averaged over the blocks of ``pattern``."""
    thetas = [k * math.pi / 12 for k in range(12)]
    theta = max(thetas, key=lambda t: abs(_rotated_quartic(c, t).coef[4]))
    roots = [complex(r) for r in _rotated_quartic(c, theta).roots()]
    best = min(
        _partitions(len(roots), pattern),
        key=lambda part: max((_chordal(roots[i], roots[j]) for blk in part for i in blk for j in blk), default=0.0),
    )
    co, si = math.cos(theta), math.sin(theta)
    out = []
    for blk in sorted(best, key=len, reverse=True):
        r = complex(np.mean([roots[i] for i in blk]))
        den = co - si * r
        out.append(complex(np.inf) if abs(den) < 1e-12 * (1 + abs(r)) else (si + co * r) / den)
    return out


def classify_quartic(coeffs, tol: float = 1e-6, zero_tol: float = 1e-9) -> WeylQuartic:
    """Root-multiplicity class of the binary quartic ``sum c_k x^k``.

    The type is read off covariants, which makes the decision independent of the
    dyad: the Hessian vanishes for a four-fold root, the Hessian of the Hessian for a triple root,
    and the normalised discriminant ``|I^3 - 27 J^2| / (|I|^3 + 27 J^2)`` vanishes for
    a double root, with the Hessian proportional to the quartic exactly when the
    roots pair up. Roots (on the Riemann sphere) are then grouped to fit the type.
    """
    c = np.asarray(coeffs, dtype=float)
    scale = float(np.max(np.abs(c)))
    if scale < zero_tol:
        return WeylQuartic(c, [], (), "O", True)
    cn = c / scale
    H = quartic_hessian(cn)
    hn = float(np.linalg.norm(H))
    if hn <= tol * 144:
        pattern = (4,)
    elif np.linalg.norm(quartic_hessian(H / np.max(np.abs(H)))) <= tol * 144:
        # a triple root makes the Hessian a perfect fourth power
        pattern = (3, 1)
    else:
        I, J = quartic_invariants(cn)
        disc = abs(I**3 - 27 * J**2) / (abs(I) ** 3 + 27 * J**2)
        if disc > tol:
            pattern = (1, 1, 1, 1)
        else:
            u, v = cn / np.linalg.norm(cn), H / hn
            sine = math.sqrt(max(0.0, 1.0 - float(u @ v) ** 2))
            pattern = (2, 2) if sine <= math.sqrt(tol) else (2, 1, 1)
    roots = _group_roots(cn, pattern)
    real = all(abs(z.imag) <= 1e-6 * (1 + abs(z.real)) if np.isfinite(z) else True for z in roots)
    return WeylQuartic(c, roots, pattern, PETROV_PATTERNS[pattern], real)


# ---------------------------------------------------------------------------
# Scalar operators and Kahler forms
# ---------------------------------------------------------------------------


def laplace_beltrami(g: MetricField, f, p) -> float:
    """``g^ab (d_a d_b f - Gamma^c_ab d_c f)`` at ``p``."""
    G = g.jets(p)
    gi, gam, _ = christoffel_jet(G)
    (fj,) = eval_jets([Expr.wrap(f)], np.asarray(p, dtype=float))
    return float(np.einsum("ab,ab->", gi, fj.hess - np.einsum("cab,c->ab", gam, fj.grad)))


def kahler_form_value(g: MetricField, J, p) -> np.ndarray:
    """``omega_ab = g_ac J^c_b`` at ``p``."""
    n = g.dim
    Jv = np.array([[float(np.asarray(evaluate_expr(J[a][b], p))) for b in range(n)] for a in range(n)])
    return g.value(p) @ Jv


def evaluate_expr(e, p) -> float:
    from .fields import evaluate

    return float(evaluate(Expr.wrap(e), [float(x) for x in p]))


def self_dual_orientation(g: MetricField, F: np.ndarray, p) -> int:
    """The chart orientation in which the 2-form ``F`` is self-dual at ``p``."""
    gv = g.value(p)
    sF = hodge_star2_at(gv, F, 1)
    scale = np.max(np.abs(F)) + 1e-300
    if np.max(np.abs(sF - F)) <= 1e-8 * scale:
        return 1
    if np.max(np.abs(sF + F)) <= 1e-8 * scale:
        return -1
    raise ValueError("2-form is neither self-dual nor anti-self-dual")
