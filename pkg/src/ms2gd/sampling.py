"""Seeded randomness for the solvers.

All draws go through :class:`numpy.random.Generator` backed by PCG64, seeded
with an unsigned 64-bit integer. Indices are 0-based.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "make_rng",
    "alpha",
    "sample_minibatch",
    "MinibatchSampler",
    "InnerLoopDistribution",
    "build_inner_distribution",
    "sample_inner_length",
]


def make_rng(seed: int) -> np.random.Generator:
    seed = int(seed)
    if not 0 <= seed < 2**64:
        raise ValueError(f"seed must be an unsigned 64-bit integer, got {seed}")
    return np.random.Generator(np.random.PCG64(seed))


def alpha(n: int, b: int) -> float:
    """Variance attenuation ``(n - b) / (b (n - 1))`` of a size-``b`` sample
    drawn without replacement; 0 for ``n = 1``."""
    if not 1 <= b <= n:
        raise ValueError(f"batch size must lie in [1, {n}], got {b}")
    if n == 1:
        return 0.0
    return (n - b) / (b * (n - 1))


def _partial_shuffle(rng: np.random.Generator, pool: np.ndarray, b: int) -> np.ndarray:
    n = len(pool)
    # swap targets j_t ~ U{t, ..., n-1}; the scalar call is cheaper for b = 1
    targets = (rng.integers(0, n),) if b == 1 else rng.integers(np.arange(b), n)
    for t, j in enumerate(targets):
        pool[t], pool[j] = pool[j], pool[t]
    return pool[:b].copy()


def sample_minibatch(rng: np.random.Generator, n: int, b: int) -> np.ndarray:
    """Uniform size-``b`` subset of ``range(n)`` by a partial Fisher-Yates shuffle."""
    if not 1 <= b <= n:
        raise ValueError(f"batch size must lie in [1, {n}], got {b}")
    return _partial_shuffle(rng, np.arange(n), b)


class MinibatchSampler:
    """Repeated mini-batch draws without reallocating the index pool.

    The pool keeps whatever order earlier draws left it in. A partial
    shuffle yields a uniform subset from any starting order, so draws stay
    independent and uniform.
    """

    def __init__(self, rng: np.random.Generator, n: int):
        self.rng = rng
        self.n = n
        self._pool = np.arange(n)

    def draw(self, b: int) -> np.ndarray:
        if not 1 <= b <= self.n:
            raise ValueError(f"batch size must lie in [1, {self.n}], got {b}")
        return _partial_shuffle(self.rng, self._pool, b)


@dataclass(frozen=True)
class InnerLoopDistribution:
    """Law of the inner-loop length ``t`` on ``{1, ..., m}``.

    ``q[t-1] = r**(m - t) / gamma`` with ``r = (1 - h*nu_f) / (1 + h*nu_R)``.
    """

    m: int
    h: float
    nu_f: float
    nu_R: float
    q: np.ndarray = field(repr=False)
    gamma: float
    cdf: np.ndarray = field(repr=False)

    @property
    def ratio(self) -> float:
        return (1.0 - self.h * self.nu_f) / (1.0 + self.h * self.nu_R)

    @property
    def expected_length(self) -> float:
        return float(np.arange(1, self.m + 1) @ self.q)


def build_inner_distribution(m: int, h: float, nu_f: float = 0.0,
                             nu_R: float = 0.0) -> InnerLoopDistribution:
    if m < 1:
        raise ValueError(f"m must be >= 1, got {m}")
    if not h > 0:
        raise ValueError(f"h must be positive, got {h}")
    if nu_f < 0 or nu_R < 0:
        raise ValueError("nu_f and nu_R must be nonnegative")
    if h * nu_f >= 1:
        raise ValueError(f"h * nu_f = {h * nu_f} >= 1 makes the ratio nonpositive")
    r = (1.0 - h * nu_f) / (1.0 + h * nu_R)
    weights = r ** np.arange(m - 1, -1, -1, dtype=float)
    gamma = float(weights.sum())
    q = weights / gamma
    cdf = np.cumsum(q)
    return InnerLoopDistribution(m=m, h=h, nu_f=nu_f, nu_R=nu_R, q=q,
                                 gamma=gamma, cdf=cdf)


def sample_inner_length(rng: np.random.Generator, dist: InnerLoopDistribution) -> int:
    """Inverse-CDF draw of ``t`` in ``{1, ..., m}``."""
    u = rng.random() * dist.cdf[-1]
    t = int(np.searchsorted(dist.cdf, u, side="right")) + 1
    return min(t, dist.m)
