"""Arithmetic tests for 2-plane fields (hence neutral metrics) on compact 4-manifolds."""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Optional

import numpy as np

ADMITS = "admits"
REJECTS = "rejects"
INCONCLUSIVE = "inconclusive"

# vectors enumerated per orthogonal block before the block search is truncated
BLOCK_BUDGET = 400_000


class FormError(ValueError):
    """The intersection form is not a symmetric unimodular integer matrix, or disagrees
    with the stated signature."""


def _hyperbolic() -> np.ndarray:
    return np.array([[0, 1], [1, 0]])


def e8_form() -> np.ndarray:
    """Cartan matrix of E8: positive definite, even and unimodular."""
    edges = [(0, 1), (1, 2), (2, 3), (3, 4), (4, 5), (5, 6), (4, 7)]
    A = 2 * np.eye(8, dtype=int)
    for i, j in edges:
        A[i, j] = A[j, i] = -1
    return A


def block_diag(*blocks) -> np.ndarray:
    n = sum(b.shape[0] for b in blocks)
    out = np.zeros((n, n), dtype=int)
    k = 0
    for b in blocks:
        m = b.shape[0]
        out[k:k + m, k:k + m] = b
        k += m
    return out


@dataclass(frozen=True, eq=False)
class FourManifoldTopology:
    """Euler characteristic, signature and intersection form on ``H^2/Tor`` (torsion
    is assumed absent)."""

    name: str
    euler: int
    signature: int
    form: np.ndarray
    oriented: bool = True
    simply_connected: bool = True

    def __post_init__(self):
        F = np.asarray(self.form, dtype=int).reshape(len(self.form), len(self.form)) if len(self.form) else np.zeros((0, 0), int)
        object.__setattr__(self, "form", F)
        if not np.array_equal(F, F.T):
            raise FormError(f"{self.name}: intersection form is not symmetric")
        if F.size and abs(round(float(np.linalg.det(F)))) != 1:
            raise FormError(f"{self.name}: intersection form is not unimodular")
        ev = np.linalg.eigvalsh(F) if F.size else np.zeros(0)
        if int(np.sum(ev > 0) - np.sum(ev < 0)) != self.signature:
            raise FormError(f"{self.name}: signature {self.signature} disagrees with the form")

    @property
    def rank(self) -> int:
        return self.form.shape[0]

    @property
    def is_even(self) -> bool:
        return bool(np.all(np.diag(self.form) % 2 == 0))

    def definiteness(self) -> int:
        """+1 positive definite, -1 negative definite, 0 indefinite. The empty form
        counts as definite (it only represents 0)."""
        if self.rank == 0:
            return 1
        ev = np.linalg.eigvalsh(self.form)
        if np.all(ev > 0):
            return 1
        if np.all(ev < 0):
            return -1
        return 0

    def mu(self, w) -> int:
        w = np.asarray(w, dtype=int)
        return int(w @ self.form @ w)

    def hh_targets(self) -> tuple:
        return 3 * self.signature + 2 * self.euler, 3 * self.signature - 2 * self.euler


def catalogue() -> dict:
    H = _hyperbolic()
    E8 = e8_form()
    items = [
        FourManifoldTopology("S4", 2, 0, np.zeros((0, 0), int)),
        FourManifoldTopology("S2xS2", 4, 0, H),
        FourManifoldTopology("CP2", 3, 1, np.array([[1]])),
        FourManifoldTopology("CP2#CP2bar", 4, 0, np.diag([1, -1])),
        FourManifoldTopology("CP2#CP2", 4, 2, np.eye(2, dtype=int)),
        FourManifoldTopology("K3", 24, -16, block_diag(-E8, -E8, H, H, H)),
        FourManifoldTopology("T4", 0, 0, block_diag(H, H, H), simply_connected=False),
    ]
    return {m.name: m for m in items}


def get_manifold(name: str) -> FourManifoldTopology:
    cat = catalogue()
    for k, v in cat.items():
        if k.lower() == name.lower():
            return v
    raise KeyError(f"unknown manifold {name!r}; catalogue: {', '.join(cat)}")


def orthogonal_blocks(F: np.ndarray) -> list:
    """Index sets of the connected components of the graph of non-zero entries."""
    n = F.shape[0]
    seen, out = set(), []
    for s in range(n):
        if s in seen:
            continue
        comp, stack = [], [s]
        seen.add(s)
        while stack:
            i = stack.pop()
            comp.append(i)
            for j in np.nonzero(F[i])[0]:
                if j not in seen:
                    seen.add(int(j))
                    stack.append(int(j))
        out.append(sorted(comp))
    return out


@lru_cache(maxsize=64)
def _block_values_cached(key: bytes, m: int, radius: int) -> tuple:
    return _block_values(np.frombuffer(key, dtype=np.int64).reshape(m, m), radius)


def _block_values(F: np.ndarray, radius: int) -> tuple:
    """``{mu(v, v): witness}`` over ``|v|_inf <= r`` with ``r <= radius`` capped by the
    budget; also whether the search was exhaustive at ``radius``."""
    m = F.shape[0]
    r = radius
    while r > 0 and (2 * r + 1) ** m > BLOCK_BUDGET:
        r -= 1
    rng = np.arange(-r, r + 1)
    grid = np.array(list(itertools.product(rng, repeat=m)), dtype=np.int64).reshape(-1, m)
    vals = np.einsum("ki,ij,kj->k", grid, F.astype(np.int64), grid)
    # keep the smallest witness per value (rows are in lexicographic order; sort by norm)
    norms = np.abs(grid).max(axis=1) if m else np.zeros(len(grid), int)
    order = np.lexsort((np.arange(len(grid)), norms))
    uniq, first = np.unique(vals[order], return_index=True)
    table = {int(v): grid[order[k]] for v, k in zip(uniq, first)}
    return table, r == radius


@dataclass
class HHResult:
    manifold: str
    verdict: str
    targets: tuple
    witnesses: dict = field(default_factory=dict)
    reason: str = ""
    radius: int = 0

    def to_dict(self) -> dict:
        return {
            "manifold": self.manifold,
            "check": "hirzebruch_hopf",
            "verdict": self.verdict,
            "targets": list(self.targets),
            "witnesses": {str(k): [int(x) for x in v] for k, v in self.witnesses.items()},
            "reason": self.reason,
            "radius": self.radius,
        }


def _certificate(t: FourManifoldTopology, target: int, radius: int) -> Optional[str]:
    """A reason why ``target`` is not ``mu(w, w)`` for any integral ``w``, if one is cheap."""
    if target == 0:
        return None
    if t.rank == 0:
        return f"{target} is not represented by the zero form"
    if t.is_even and target % 2:
        return f"even form cannot represent odd {target}"
    sgn = t.definiteness()
    if sgn and target * sgn < 0:
        return f"definite form of sign {sgn:+d} cannot represent {target}"
    if sgn:
        # |mu(w,w)| >= lambda_min |w|^2 bounds every representing vector
        lam = float(np.min(np.abs(np.linalg.eigvalsh(t.form))))
        bound = int(np.floor(np.sqrt(abs(target) / lam) + 1e-9))
        if bound <= radius:
            return f"no vector with |w| <= {bound} represents {target} (definiteness bound)"
    return None


def hirzebruch_hopf_check(t: FourManifoldTopology, radius: int) -> HHResult:
    """Search for ``w`` with ``mu(w, w) = 3 tau +- 2 chi`` and ``|w|_inf <= radius``."""
    if radius < 1:
        raise ValueError("search radius must be at least 1")
    targets = t.hh_targets()
    F = t.form
    blocks = orthogonal_blocks(F) if t.rank else []
    # sumset over orthogonal blocks, carrying witnesses
    acc: dict = {0: np.zeros(t.rank, dtype=int)}
    exhaustive = True
    for idx in blocks:
        blk = np.ascontiguousarray(F[np.ix_(idx, idx)], dtype=np.int64)
        table, full = _block_values_cached(blk.tobytes(), len(idx), radius)
        exhaustive &= full
        nxt: dict = {}
        for a, wa in acc.items():
            for b, wb in table.items():
                if a + b not in nxt:
                    w = wa.copy()
                    w[idx] = wb
                    nxt[a + b] = w
        acc = nxt
    witnesses, reasons = {}, []
    rejected = False
    for tg in targets:
        if tg in acc:
            witnesses[tg] = acc[tg]
            continue
        cert = _certificate(t, tg, radius if exhaustive else 0)
        if cert:
            rejected = True
            reasons.append(cert)
        else:
            reasons.append(f"{tg} not found within radius {radius}" + ("" if exhaustive else " (truncated search)"))
    if len(witnesses) == len(set(targets)):
        verdict = ADMITS
    elif rejected:
        verdict = REJECTS
    else:
        verdict = INCONCLUSIVE
    return HHResult(t.name, verdict, targets, witnesses, "; ".join(reasons), radius)


def atiyah_check(chi: int, tau: int) -> bool:
    """Necessary conditions for an oriented 2-plane field: ``chi`` even and ``chi = tau mod 4``."""
    return chi % 2 == 0 and (chi - tau) % 4 == 0


def atiyah_reason(chi: int, tau: int) -> str:
    if chi % 2:
        return "fails Atiyah parity: Euler characteristic is odd"
    if (chi - tau) % 4:
        return "fails Atiyah congruence: chi - tau is not divisible by 4"
    return "passes Atiyah conditions"
