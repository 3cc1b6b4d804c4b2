"""Null tetrads, two-component spinor algebra, spin connection and Lax pairs.

Frame index ``i = 2*A + A'`` orders a tetrad as ``(e_00', e_01', e_10', e_11')``.
The frame metric is ``g(e_AA', e_BB') = eps_AB eps_A'B'`` with ``eps_01 = 1``.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, replace
from typing import Optional, Sequence

import numpy as np

from .fields import Expr, const, eval_jets, evaluate, inverse_expr, sqrt_, var
from .geometry import (
    MetricField,
    PetrovIndeterminate,
    WeylQuartic,
    classify_quartic,
    curvature_pack,
    quartic_from_spinor,
)
from .jets import ArrayJet, SingularPointError, jeinsum, jeinsum_const
from .reports import ResidualReport

EPS2 = np.array([[0.0, 1.0], [-1.0, 0.0]])  # eps_AB = eps^AB, eps_01 = 1
ETA = np.einsum("ab,cd->acbd", EPS2, EPS2).reshape(4, 4)  # g(e_i, e_j)
LAX_TOL = 1e-8
# Sign of the fibre part of the horizontal lift: e + LIFT_SIGN * Gamma pi d/dpi.
LIFT_SIGN = -1.0


def fidx(A: int, Ap: int) -> int:
    return 2 * A + Ap


class NonNullVectorError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class TetradFrame:
    """Four vector fields ``e_AA'``; ``vectors[i][mu]`` is the ``mu`` component of ``e_i``."""

    vectors: tuple
    names: tuple
    box: Optional[tuple] = None
    volume: Optional[Expr] = None  # density of nu = volume * dx^0 ^ ... ^ dx^3
    potentials: Optional[tuple] = None  # f_A
    label: str = ""

    @classmethod
    def from_callable(cls, fn, names: Sequence[str], **kw) -> "TetradFrame":
        names = tuple(names)
        rows = fn(*[var(i) for i in range(len(names))])
        vecs = tuple(tuple(Expr.wrap(c) for c in row) for row in rows)
        for k in ("volume",):
            if kw.get(k) is not None and callable(kw[k]):
                kw[k] = Expr.wrap(kw[k](*[var(i) for i in range(len(names))]))
        return cls(vecs, names, **kw)

    @classmethod
    def from_coframe(cls, fn, names: Sequence[str], **kw) -> "TetradFrame":
        """Frame dual to four 1-forms ``theta^i = fn(...)[i][mu] dx^mu``."""
        names = tuple(names)
        rows = fn(*[var(i) for i in range(len(names))])
        th = [[Expr.wrap(c) for c in row] for row in rows]
        inv = inverse_expr(th)  # inv[mu][i] = e_i^mu
        vecs = tuple(tuple(inv[m][i] for m in range(4)) for i in range(4))
        return cls(vecs, names, **kw)

    def scaled(self, factor) -> "TetradFrame":
        """The frame ``factor * e_AA'`` (a null tetrad for ``factor**-2 g``)."""
        f = Expr.wrap(factor)
        return replace(self, vectors=tuple(tuple(f * c for c in row) for row in self.vectors))

    def jets(self, p) -> ArrayJet:
        p = np.asarray(p, dtype=float)
        js = eval_jets([c for row in self.vectors for c in row], p)
        E = ArrayJet.stack(js, (4, 4))
        if abs(np.linalg.det(E.val)) < 1e-12:
            raise SingularPointError(f"degenerate frame at {p}")
        return E

    def value(self, p) -> np.ndarray:
        return self.jets(p).val

    def coframe(self, p) -> np.ndarray:
        """``theta[i, mu]`` with ``theta^i(e_j) = delta^i_j``."""
        return np.linalg.inv(self.value(p)).T

    def metric_value(self, p) -> np.ndarray:
        th = self.coframe(p)
        return np.einsum("ij,im,jn->mn", ETA, th, th)

    def orientation(self, p) -> int:
        """Chart orientation making ``eps(e_00', e_10', e_01', e_11') > 0``."""
        return int(np.sign(np.linalg.det(self.value(p)[[0, 2, 1, 3]])))


# ---------------------------------------------------------------------------
# Algebra
# ---------------------------------------------------------------------------


def null_factorize(V, tol: float = 1e-10):
    """Write a null 2x2 matrix ``V^{AA'}`` as ``mu^A nu^A'``."""
    V = np.asarray(V, dtype=float)
    scale = np.max(np.abs(V))
    if scale == 0.0:
        raise NonNullVectorError("zero vector has no null factorization")
    if abs(np.linalg.det(V)) > tol * scale**2:
        raise NonNullVectorError(f"det V = {np.linalg.det(V):.3e}; vector is not null")
    r = int(np.argmax(np.linalg.norm(V, axis=1)))
    nu = V[r].copy()
    k = int(np.argmax(np.abs(nu)))
    mu = V[:, k] / nu[k]
    return mu, nu


def sigma_basis(frame: TetradFrame, p):
    """``(Sigma^{AB}, Sigma^{A'B'})`` as arrays ``[X, Y, mu, nu]`` of 2-form components."""
    th = frame.coframe(p).reshape(2, 2, 4)  # th[A, A', mu]
    wedge = np.einsum("ijm,kln->ijklmn", th, th)
    wedge = wedge - np.swapaxes(wedge, -1, -2)  # e^{AA'} ^ e^{BB'}
    sig_p = 0.5 * np.einsum("ab,aibjmn->ijmn", EPS2, wedge)
    sig_u = 0.5 * np.einsum("ij,aibjmn->abmn", EPS2, wedge)
    return sig_u, sig_p


def sigma_identity_residual(frame: TetradFrame, p) -> float:
    th = frame.coframe(p).reshape(2, 2, 4)
    wedge = np.einsum("ijm,kln->ijklmn", th, th)
    wedge = wedge - np.swapaxes(wedge, -1, -2)
    sig_u, sig_p = sigma_basis(frame, p)
    rebuilt = np.einsum("ab,ijmn->aibjmn", EPS2, sig_p) + np.einsum("ij,abmn->aibjmn", EPS2, sig_u)
    return float(np.max(np.abs(rebuilt - wedge)))


def verify_tetrad(g: MetricField, frame: TetradFrame, samples, tolerance: float = 1e-9,
                  factor=None) -> ResidualReport:
    """Compare ``factor * (metric of the frame)`` with ``g`` componentwise."""
    vals = []
    for p in samples:
        c = 1.0 if factor is None else float(evaluate(Expr.wrap(factor), [float(x) for x in p]))
        vals.append(np.max(np.abs(c * frame.metric_value(p) - g.value(p))))
    return ResidualReport.from_values("tetrad", vals, tolerance)


def metric_from_frame(frame: TetradFrame, **kw) -> MetricField:
    """The metric for which ``frame`` is a null tetrad, as expressions."""
    E = [[Expr.wrap(c) for c in row] for row in frame.vectors]
    inv = inverse_expr(E)  # inv[mu][i] = theta^i_mu
    n = len(frame.names)
    comps = []
    for m in range(n):
        row = []
        for k in range(n):
            acc = Expr.wrap(0.0)
            for i in range(4):
                for j in range(4):
                    if ETA[i, j] != 0.0:
                        acc = acc + ETA[i, j] * inv[m][i] * inv[k][j]
            row.append(acc)
        comps.append(tuple(row))
    kw.setdefault("box", frame.box)
    return MetricField(tuple(comps), frame.names, **kw)


def _gs_candidates(n: int) -> list:
    out = [np.eye(n)[i] for i in range(n)]
    for i in range(n):
        for j in range(i + 1, n):
            out.append(np.eye(n)[i] + np.eye(n)[j])
            out.append(np.eye(n)[i] - np.eye(n)[j])
    return out


def gram_schmidt_frame(g: MetricField, ref, orientation: int = 1, probes: int = 12) -> TetradFrame:
    """A null tetrad built symbolically by Gram-Schmidt from coordinate vectors.

    Pivots are chosen to keep their norms away from zero with a fixed sign at
    ``ref`` and at a few probe points of the chart box; the frame is valid where
    those choices stay non-degenerate. The box corners are always probed.
    """
    n = g.dim
    G = [[g.components[a][b] for b in range(n)] for a in range(n)]
    pts = [np.asarray(ref, float)]
    if g.box is not None and probes:
        try:
            pts += list(g.samples(probes, seed=11))
        except ValueError:
            pass
        # corners catch sign changes of a pivot norm near the edge of the box
        lo, hi = np.asarray(g.box, float).T
        shrink = 0.999
        mid = 0.5 * (lo + hi)
        for corner in itertools.product(*zip(lo, hi)):
            pts.append(mid + shrink * (np.array(corner) - mid))
    Gs = [g.value(p) for p in pts]

    def ip_expr(u, v):
        acc = Expr.wrap(0.0)
        for a in range(n):
            for b in range(n):
                if not (u[a].is_const(0.0) or v[b].is_const(0.0)):
                    acc = acc + u[a] * G[a][b] * v[b]
        return acc

    chosen: list = []  # (expr vector, numeric vectors per probe, sign)
    need = {1: 2, -1: 2}
    cands = _gs_candidates(n)
    for _ in range(4):
        best = None
        for c in cands:
            norms = []
            for k, G0 in enumerate(Gs):
                v = c.copy()
                for _, nums, s in chosen:
                    v = v - s * (v @ G0 @ nums[k]) * nums[k]
                norms.append(v @ G0 @ v)
            norms = np.array(norms)
            sgn = 1 if norms[0] > 0 else -1
            if need[sgn] == 0:
                continue
            score = float(np.min(sgn * norms))  # negative if the sign changes
            if best is None or score > best[1]:
                best = (c, score, sgn)
        if best is None or best[1] < 1e-8:
            raise SingularPointError("Gram-Schmidt failed to find a non-null direction")
        c, _, sgn = best
        vec = [const(x) for x in c]
        nums = []
        for k, G0 in enumerate(Gs):
            num = c.copy()
            for _, ens, s in chosen:
                num = num - s * (num @ G0 @ ens[k]) * ens[k]
            nums.append(num / np.sqrt(sgn * (num @ G0 @ num)))
        for ev, _, s in chosen:
            coef = ip_expr(vec, ev)
            vec = [vec[a] - s * coef * ev[a] for a in range(n)]
        norm = sqrt_(sgn * ip_expr(vec, vec))
        vec = [x / norm for x in vec]
        chosen.append((vec, nums, sgn))
        need[sgn] -= 1
    u = [c for c in chosen if c[2] > 0]
    w = [c for c in chosen if c[2] < 0]
    r = 1.0 / np.sqrt(2.0)

    def comb(a, b, sa, sb):
        return tuple(r * (sa * a[0][k] + sb * b[0][k]) for k in range(n))

    def build(flip):
        v2 = (tuple(-x for x in w[1][0]), None, -1) if flip else w[1]
        return TetradFrame(
            (comb(u[0], w[0], 1, 1), comb(u[1], v2, 1, 1), comb(u[1], v2, -1, 1), comb(u[0], w[0], 1, -1)),
            g.names,
            box=g.box,
        )

    frame = build(False)
    if frame.orientation(ref) != orientation:
        frame = build(True)
    return frame


# ---------------------------------------------------------------------------
# Spin connection
# ---------------------------------------------------------------------------


@dataclass
class SpinConnection:
    primed: np.ndarray  # [i, B', C'] = Gamma_{i B'}^{C'}
    unprimed: np.ndarray  # [i, B, C]
    frame_connection: np.ndarray  # [c, a, b]: nabla_{e_a} e_b = G[c, a, b] e_c
    cartan_residual: float
    koszul_agreement: float


def structure_constants(E: ArrayJet) -> ArrayJet:
    """``C[e, a, b]`` with ``[e_a, e_b] = C^e_ab e_e`` (first-order jet)."""
    Eo1 = ArrayJet(E.val, E.d1)
    dE = E.derivative()  # [i, mu, nu] = d_nu e_i^mu
    B = jeinsum("an,bmn->abm", Eo1, dE)
    B = B - B.transpose((1, 0, 2))
    Ninv = E.inv()  # [mu, i]
    theta = ArrayJet(Ninv.val.T, np.swapaxes(Ninv.d1, 0, 1))  # [i, mu]
    return jeinsum("em,abm->eab", theta, B)


def koszul_connection(E: ArrayJet) -> ArrayJet:
    """Frame connection ``G[c, a, b]`` and its first derivatives."""
    C = structure_constants(E)
    Cl = jeinsum_const("de,eab->dab", ETA, C)
    # Gamma_{c,ab} = 1/2 (C_{c,ab} - C_{b,ac} - C_{a,bc})
    t1 = Cl
    t2 = ArrayJet(np.einsum("bac->cab", Cl.val), np.einsum("bacx->cabx", Cl.d1))
    t3 = ArrayJet(np.einsum("abc->cab", Cl.val), np.einsum("abcx->cabx", Cl.d1))
    G_low = (t1 - t2 - t3).scale(0.5)
    return jeinsum_const("cd,dab->cab", np.linalg.inv(ETA), G_low)


def split_spin(G: np.ndarray):
    """Primed and unprimed parts of a frame connection ``G[c, a, b]``."""
    G5 = G.reshape(2, 2, 4, 2, 2)  # [C, C', a, B, B']
    primed = 0.5 * np.einsum("bqabp->apq", G5)  # sum over B = C
    unprimed = 0.5 * np.einsum("cqabq->abc", G5)  # sum over B' = C'
    return primed, unprimed


def _spin_to_frame(primed: np.ndarray, unprimed: np.ndarray) -> np.ndarray:
    d = np.eye(2)
    G5 = np.einsum("apq,bc->cqabp", primed, d) + np.einsum("abc,pq->cqabp", unprimed, d)
    return G5.reshape(4, 4, 4)


def cartan_solve(C: np.ndarray) -> np.ndarray:
    """Least-squares solve of torsion-free + metric-compatibility for ``G[c, a, b]``."""
    rows, rhs = [], []
    idx = lambda c, a, b: (c * 4 + a) * 4 + b
    for c in range(4):
        for a in range(4):
            for b in range(a + 1, 4):
                r = np.zeros(64)
                r[idx(c, a, b)] += 1.0
                r[idx(c, b, a)] -= 1.0
                rows.append(r)
                rhs.append(C[c, a, b])
    for a in range(4):
        for c in range(4):
            for b in range(c, 4):
                r = np.zeros(64)
                for d in range(4):
                    r[idx(d, a, b)] += ETA[c, d]
                    r[idx(d, a, c)] += ETA[b, d]
                rows.append(r)
                rhs.append(0.0)
    sol, *_ = np.linalg.lstsq(np.array(rows), np.array(rhs), rcond=None)
    return sol.reshape(4, 4, 4)


def spin_connection(frame: TetradFrame, p) -> SpinConnection:
    """Spin connection coefficients read off from the Cartan structure equations."""
    E = frame.jets(p)
    C = structure_constants(E).val
    G = cartan_solve(C)
    primed, unprimed = split_spin(G)
    rebuilt = _spin_to_frame(primed, unprimed)
    torsion = rebuilt - np.swapaxes(rebuilt, 1, 2) - C
    kos = koszul_connection(E).val
    return SpinConnection(
        primed,
        unprimed,
        G,
        float(np.max(np.abs(torsion))),
        float(np.max(np.abs(kos - G))),
    )


# ---------------------------------------------------------------------------
# Lax pair of the Penrose distribution
# ---------------------------------------------------------------------------


@dataclass
class LaxValue:
    """``L_A = a_A^mu d_mu + b_A d_lambda`` with first derivatives in (x, lambda)."""

    base: np.ndarray  # [A, mu]
    fibre: np.ndarray  # [A]
    d_base: np.ndarray  # [A, mu, k], k over x then lambda
    d_fibre: np.ndarray  # [A, k]

    def vectors(self) -> np.ndarray:
        return np.concatenate([self.base, self.fibre[:, None]], axis=1)

    def commutator(self) -> np.ndarray:
        V = self.vectors()
        dV = np.concatenate([self.d_base, self.d_fibre[:, None, :]], axis=1)  # [A, comp, k]
        return V[0] @ dV[1].T - V[1] @ dV[0].T


def lax_pair(frame: TetradFrame, p, lam: float, lift_sign: float = LIFT_SIGN) -> LaxValue:
    """``L_A = e~_A0' + lam e~_A1'`` including the horizontal-lift fibre term."""
    E = frame.jets(p)
    G = koszul_connection(E)
    n = 4
    Gv = G.val.reshape(2, 2, 4, 2, 2)
    Gd = G.d1.reshape(2, 2, 4, 2, 2, n)
    gp_v = 0.5 * np.einsum("bqabp->apq", Gv)  # [i, B', C']
    gp_d = 0.5 * np.einsum("bqabpx->apqx", Gd)
    base = np.empty((2, n))
    d_base = np.zeros((2, n, n + 1))
    fibre = np.empty(2)
    d_fibre = np.zeros((2, n + 1))
    pi = np.array([1.0, lam])
    dpi = np.array([0.0, 1.0])
    for A in range(2):
        i0, i1 = fidx(A, 0), fidx(A, 1)
        base[A] = E.val[i0] + lam * E.val[i1]
        d_base[A, :, :n] = E.d1[i0] + lam * E.d1[i1]
        d_base[A, :, n] = E.val[i1]
        # X^{C'} = s * Gamma_{(A A') B'}^{C'} pi^{A'} pi^{B'};  b = X^1 - lam X^0
        gam = gp_v[[i0, i1]]  # [A', B', C']
        dgam = gp_d[[i0, i1]]
        X = lift_sign * np.einsum("pqc,p,q->c", gam, pi, pi)
        dX_x = lift_sign * np.einsum("pqcx,p,q->cx", dgam, pi, pi)
        dX_l = lift_sign * (np.einsum("pqc,p,q->c", gam, dpi, pi) + np.einsum("pqc,p,q->c", gam, pi, dpi))
        fibre[A] = X[1] - lam * X[0]
        d_fibre[A, :n] = dX_x[1] - lam * dX_x[0]
        d_fibre[A, n] = dX_l[1] - X[0] - lam * dX_l[0]
    return LaxValue(base, fibre, d_base, d_fibre)


def span_residual(lax: LaxValue) -> float:
    """Distance of ``[L0, L1]`` from ``span{L0, L1}``, normalised by ``|[L0, L1]| + 1``."""
    V = lax.vectors().T  # (5, 2)
    comm = lax.commutator()
    if np.linalg.matrix_rank(V, tol=1e-10) < 2:
        raise SingularPointError("L0 and L1 are parallel")
    Q, _ = np.linalg.qr(V)
    r = comm - Q @ (Q.T @ comm)
    return float(np.linalg.norm(r) / (np.linalg.norm(comm) + 1.0))


DEFAULT_LAMBDAS = (-2.0, -1.0, 0.0, 1.0, 2.0)


def lambda_samples(seed: int = 0, extra: int = 3) -> np.ndarray:
    rng = np.random.default_rng(seed)
    return np.concatenate([DEFAULT_LAMBDAS, rng.uniform(-3, 3, extra)])


def lax_integrability(
    frame: TetradFrame,
    samples,
    lambdas: Optional[Sequence[float]] = None,
    tolerance: float = LAX_TOL,
    lift_sign: float = LIFT_SIGN,
) -> ResidualReport:
    """Frobenius test of the Penrose distribution at every (point, lambda) pair."""
    lambdas = lambda_samples() if lambdas is None else np.asarray(lambdas, dtype=float)
    if len(lambdas) < 3:
        raise ValueError("need at least three lambda values")
    vals = [span_residual(lax_pair(frame, p, lam, lift_sign)) for p in samples for lam in lambdas]
    return ResidualReport.from_values("lax", vals, tolerance)


def lax_polynomial_coefficients(frame: TetradFrame, p, degree: int = 8) -> np.ndarray:
    """Fit the commutator components as polynomials in lambda; returns ``[k, comp]``."""
    lams = np.linspace(-2, 2, degree + 1)
    comms = np.array([lax_pair(frame, p, lam).commutator() for lam in lams])
    V = np.vander(lams, degree + 1, increasing=True)
    return np.linalg.solve(V, comms)


def lax_divergence(frame: TetradFrame, p, lam: float, volume: Expr) -> np.ndarray:
    """``div_nu(L_A) = d_mu(v L_A^mu) / v`` on the base, for both ``A``."""
    pt = np.asarray(p, dtype=float)
    (vj,) = eval_jets([volume], pt)
    E = frame.jets(pt)
    out = np.empty(2)
    for A in range(2):
        a = E.val[fidx(A, 0)] + lam * E.val[fidx(A, 1)]
        da = np.einsum("mm->", E.d1[fidx(A, 0)] + lam * E.d1[fidx(A, 1)])
        out[A] = da + (vj.grad @ a) / vj.value
    return out


# ---------------------------------------------------------------------------
# Weyl spinors and Petrov type
# ---------------------------------------------------------------------------


def weyl_frame_components(g: MetricField, frame: TetradFrame, p) -> np.ndarray:
    C = curvature_pack(g, p).weyl
    E = frame.value(p)
    return np.einsum("mnrs,im,jn,kr,ls->ijkl", C, E, E, E, E)


def weyl_spinors(Cf: np.ndarray):
    """``(psi_ABCD, psi_A'B'C'D')`` from frame components of the Weyl tensor."""
    C8 = Cf.reshape(2, 2, 2, 2, 2, 2, 2, 2)  # A A' B B' C C' D D'
    psi = 0.25 * np.einsum("apbqcrds,pq,rs->abcd", C8, EPS2, EPS2)
    psi_p = 0.25 * np.einsum("apbqcrds,ab,cd->pqrs", C8, EPS2, EPS2)
    return psi, psi_p


def spinor_sd_ratio(g: MetricField, frame: TetradFrame, p) -> float:
    """Independent self-dual test: primed Weyl spinor norm over full Weyl norm + 1."""
    Cf = weyl_frame_components(g, frame, p)
    _, psi_p = weyl_spinors(Cf)
    return float(np.linalg.norm(psi_p) / (np.linalg.norm(Cf) + 1.0))


def rotate_dyad(psi: np.ndarray, L: np.ndarray) -> np.ndarray:
    """Transform a 4-index spinor under ``o^A -> L^A_B o^B`` (lower indices)."""
    return np.einsum("abcd,ai,bj,ck,dl->ijkl", psi, L, L, L, L)


def random_sl2(rng: np.random.Generator) -> np.ndarray:
    """A random element of SL(2, R) away from the identity's degenerate corner."""
    a, b, c = rng.uniform(-1, 1, 3)
    a *= 0.5
    # det = 1 by construction
    return np.array([[1 + a, b], [c, (1 + b * c) / (1 + a)]])


def petrov_from_spinor(psi: np.ndarray, tol: float = 1e-6, zero_tol: float = 1e-9) -> WeylQuartic:
    return classify_quartic(quartic_from_spinor(psi), tol=tol, zero_tol=zero_tol)


def petrov_classify(g: MetricField, frame: TetradFrame, p, tol: float = 1e-6, zero_tol: float = 1e-9) -> WeylQuartic:
    """Petrov-Penrose type of the anti-self-dual Weyl spinor at ``p``."""
    pack = curvature_pack(g, p)
    E = frame.value(p)
    psi, _ = weyl_spinors(np.einsum("mnrs,im,jn,kr,ls->ijkl", pack.weyl, E, E, E, E))
    # rounding level of the Weyl components, carried through four frame contractions
    noise = 1e3 * np.finfo(float).eps * (1.0 + np.max(np.abs(pack.riemann))) * max(1.0, np.max(np.abs(E))) ** 4
    if np.max(np.abs(psi)) < zero_tol < noise:
        raise PetrovIndeterminate(f"Weyl spinor below {zero_tol:.1e} but rounding noise is {noise:.1e}")
    return petrov_from_spinor(psi, tol, zero_tol)


def spinor_from_quartic(coeffs) -> np.ndarray:
    """A totally symmetric ``psi_ABCD`` whose quartic has the given coefficients."""
    from math import comb

    c = np.asarray(coeffs, dtype=float)
    psi = np.zeros((2, 2, 2, 2))
    for idx in itertools.product((0, 1), repeat=4):
        k = sum(idx)
        psi[idx] = c[k] / comb(4, k)
    return psi


# ---------------------------------------------------------------------------
# Explicit Lax pairs (vector fields on chart x lambda)
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class ExplicitLax:
    """Two vector fields given componentwise as expressions over ``(x..., lambda)``."""

    L0: tuple
    L1: tuple
    names: tuple  # chart names followed by the spectral parameter

    def value(self, p, lam: float) -> LaxValue:
        pt = np.append(np.asarray(p, dtype=float), lam)
        n = len(self.names) - 1
        js = eval_jets([Expr.wrap(c) for c in self.L0 + self.L1], pt)
        vals = np.array([j.value for j in js]).reshape(2, n + 1)
        grads = np.array([j.grad for j in js]).reshape(2, n + 1, n + 1)
        return LaxValue(vals[:, :n], vals[:, n], grads[:, :n, :], grads[:, n, :])


def explicit_lax_residual(lax: ExplicitLax, samples, lambdas=None, tolerance: float = LAX_TOL,
                          mode: str = "span", name: str = "lax") -> ResidualReport:
    lambdas = lambda_samples() if lambdas is None else lambdas
    vals = []
    for p in samples:
        for lam in lambdas:
            lv = lax.value(p, lam)
            if mode == "span":
                vals.append(span_residual(lv))
            else:
                vals.append(float(np.max(np.abs(lv.commutator()))))
    return ResidualReport.from_values(name, vals, tolerance)
