"""Random smooth test fields shared by several test modules."""

import numpy as np

from asdkit.fields import Expr, const, cos_, sin_, var


def random_trig_field(rng: np.random.Generator, dim: int, terms: int = 4, scale: float = 1.0) -> Expr:
    """A sum of a few random plane waves plus a random quadratic, over ``dim`` coordinates."""
    xs = [var(i) for i in range(dim)]
    out: Expr = const(float(rng.normal()))
    for _ in range(terms):
        k = rng.normal(size=dim)
        arg = sum((float(k[j]) * xs[j] for j in range(dim)), const(float(rng.uniform(0, 2 * np.pi))))
        out = out + scale * float(rng.normal()) * (sin_(arg) if rng.random() < 0.5 else cos_(arg))
    for i in range(dim):
        for j in range(i, dim):
            out = out + 0.2 * float(rng.normal()) * xs[i] * xs[j]
    return out
