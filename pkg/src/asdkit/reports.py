"""Residual reports and deterministic sampling."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
from scipy.stats import qmc


@dataclass
class ResidualReport:
    name: str
    maxAbs: float
    meanAbs: float
    tolerance: float
    samplePoints: int = 0
    extra: dict = field(default_factory=dict)

    @property
    def verdict(self) -> str:
        return "pass" if self.maxAbs <= self.tolerance else "fail"

    @property
    def passed(self) -> bool:
        return self.verdict == "pass"

    @classmethod
    def from_values(cls, name: str, values: Sequence[float], tolerance: float, **extra) -> "ResidualReport":
        v = np.abs(np.asarray(values, dtype=float))
        if v.size == 0:
            return cls(name, 0.0, 0.0, tolerance, 0, dict(extra))
        return cls(name, float(v.max()), float(v.mean()), tolerance, int(v.size), dict(extra))

    def to_dict(self) -> dict:
        d = {
            "name": self.name,
            "maxAbs": self.maxAbs,
            "meanAbs": self.meanAbs,
            "tolerance": self.tolerance,
            "samples": self.samplePoints,
            "verdict": self.verdict,
        }
        d.update(self.extra)
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=False)


def sample_box(
    box: Sequence[Sequence[float]],
    n: int,
    seed: int = 0,
    accept: Optional[Callable[[np.ndarray], bool]] = None,
    max_draw: int = 64,
) -> np.ndarray:
    """``n`` scrambled-Sobol points inside ``box``, skipping rejected ones."""
    box = np.asarray(box, dtype=float)
    lo, hi = box[:, 0], box[:, 1]
    # shrink slightly so points never sit on the boundary
    pad = 1e-9 * (hi - lo)
    sampler = qmc.Sobol(d=len(box), scramble=True, seed=seed)
    out = []
    for _ in range(max_draw):
        pts = qmc.scale(sampler.random(max(8, 1 << int(np.ceil(np.log2(max(n, 2)))))), lo + pad, hi - pad)
        for p in pts:
            if accept is None or accept(p):
                out.append(p)
                if len(out) == n:
                    return np.array(out)
    raise ValueError(f"could only draw {len(out)} admissible points out of {n}")
