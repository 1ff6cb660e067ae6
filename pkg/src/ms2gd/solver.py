"""mS2GD and the baselines it is benchmarked against.

Work is counted in component-gradient evaluations. An mS2GD epoch costs
``n`` for the snapshot gradient plus ``2 b`` per inner step, since both
``grad f_i(y)`` and ``grad f_i(x_k)`` are evaluated for each sampled index
(snapshot component gradients are recomputed rather than cached).
"""

from __future__ import annotations

import math
import time
import warnings
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from .problem import CompositeProblem
from .sampling import (
    MinibatchSampler,
    build_inner_distribution,
    make_rng,
    sample_inner_length,
)
from .theory import RateInputs, feasibility

__all__ = [
    "DivergenceError",
    "SolverConfig",
    "EpochRecord",
    "RunTrace",
    "VarianceReducedEstimate",
    "estimate_direction",
    "ms2gd_run",
    "prox_sgd_run",
    "Reference",
    "prox_gd_reference",
]


class DivergenceError(RuntimeError):
    def __init__(self, epoch: int, what: str = "objective"):
        self.epoch = epoch
        super().__init__(f"non-finite {what} at epoch {epoch}")


@dataclass(frozen=True)
class SolverConfig:
    """mS2GD hyperparameters.

    ``m`` is the maximal inner-loop length, ``h`` the stepsize, ``b`` the
    mini-batch size and ``K`` the number of outer iterations (epochs).
    ``x0 = None`` starts from the origin.
    """

    m: int
    h: float
    b: int = 1
    K: int = 10
    seed: int = 0
    x0: Optional[np.ndarray] = None

    def __post_init__(self):
        if self.m < 1:
            raise ValueError(f"m must be >= 1, got {self.m}")
        if not self.h > 0:
            raise ValueError(f"h must be positive, got {self.h}")
        if self.b < 1:
            raise ValueError(f"b must be >= 1, got {self.b}")
        if self.K < 1:
            raise ValueError(f"K must be >= 1, got {self.K}")

    def rate_inputs(self, p: CompositeProblem) -> RateInputs:
        return RateInputs(h=self.h, m=self.m, b=self.b, n=p.n, L=p.L, mu=p.mu,
                          nu_f=p.nu_f, nu_R=p.nu_R)

    def feasibility(self, p: CompositeProblem) -> dict[str, bool]:
        """Rate feasibility flags; reported, never enforced by the run."""
        return feasibility(self.rate_inputs(p))


@dataclass(frozen=True)
class EpochRecord:
    epoch: int
    objective: float
    gap: Optional[float]
    evaluations: int
    passes: float
    seconds: float
    ideal_passes: float


@dataclass
class RunTrace:
    solver: str
    b: int
    n: int
    records: list[EpochRecord] = field(default_factory=list)
    inner_lengths: list[int] = field(default_factory=list)
    x: Optional[np.ndarray] = None

    @property
    def gaps(self) -> np.ndarray:
        return np.array([np.nan if r.gap is None else r.gap for r in self.records])

    @property
    def objectives(self) -> np.ndarray:
        return np.array([r.objective for r in self.records])

    @property
    def passes(self) -> np.ndarray:
        return np.array([r.passes for r in self.records])

    def ideal_parallel(self) -> "RunTrace":
        """Same trace with inner-step work divided by ``b``.

        This is an analytical stand-in for perfectly parallel mini-batch
        gradients; nothing is executed in parallel.
        """
        recs = [replace(r, passes=r.ideal_passes) for r in self.records]
        return RunTrace(solver=self.solver + "-ideal", b=self.b, n=self.n,
                        records=recs, inner_lengths=list(self.inner_lengths), x=self.x)

    def passes_to_reach(self, gap: float) -> float:
        """Effective passes at the first record with gap at most ``gap`` (inf if never)."""
        for r in self.records:
            if r.gap is not None and r.gap <= gap:
                return r.passes
        return math.inf


@dataclass(frozen=True)
class VarianceReducedEstimate:
    v: np.ndarray
    snapshot_grad: np.ndarray
    snapshot: np.ndarray


def estimate_direction(g_k, x_k, y, batch, p: CompositeProblem) -> VarianceReducedEstimate:
    """``v = g_k + mean_{i in batch}(grad f_i(y) - grad f_i(x_k))``."""
    batch = np.asarray(batch)
    if batch.size == 0:
        raise ValueError("empty mini-batch")
    if batch.min() < 0 or batch.max() >= p.n:
        raise IndexError(f"batch indices must lie in [0, {p.n})")
    v = g_k + p.mean_gradient_difference(batch, y, x_k)
    return VarianceReducedEstimate(v=v, snapshot_grad=g_k, snapshot=x_k)


def _start_point(p: CompositeProblem, x0) -> np.ndarray:
    if x0 is None:
        return np.zeros(p.d)
    return p.check_point(x0).copy()


def _gap(value: float, ref: Optional[float]) -> Optional[float]:
    return None if ref is None else value - ref


def ms2gd_run(p: CompositeProblem, cfg: SolverConfig,
              reference_value: Optional[float] = None,
              timed: bool = True) -> RunTrace:
    """Run ``cfg.K`` epochs of mS2GD and record one line per epoch.

    Record ``k`` describes ``x_k``; record 0 is the starting point. The next
    snapshot is the last inner iterate; inner iterates are not averaged.
    ``timed=False`` records zero seconds so traces are byte-reproducible.
    """
    if cfg.b > p.n:
        raise ValueError(f"batch size {cfg.b} exceeds n = {p.n}")
    rng = make_rng(cfg.seed)
    sampler = MinibatchSampler(rng, p.n)
    dist = build_inner_distribution(cfg.m, cfg.h, p.nu_f, p.nu_R)
    h, b, n = cfg.h, cfg.b, p.n
    x = _start_point(p, cfg.x0)

    trace = RunTrace(solver="ms2gd", b=b, n=n)
    clock = time.perf_counter
    t0 = clock()
    evals = 0
    ideal_evals = 0.0

    def record(k):
        val = p.objective_value(x)
        if not (math.isfinite(val) and np.all(np.isfinite(x))):
            raise DivergenceError(k)
        trace.records.append(EpochRecord(
            epoch=k, objective=val, gap=_gap(val, reference_value),
            evaluations=evals, passes=evals / n,
            seconds=(clock() - t0) if timed else 0.0,
            ideal_passes=ideal_evals / n,
        ))

    with np.errstate(over="ignore", invalid="ignore"):
        record(0)
        for k in range(cfg.K):
            g = p.full_gradient(x)
            t_k = sample_inner_length(rng, dist)
            y = x
            for _ in range(t_k):
                batch = sampler.draw(b)
                v = g + p.mean_gradient_difference(batch, y, x)
                y = p.prox(h, y - h * v)
            x = y
            trace.inner_lengths.append(t_k)
            evals += n + 2 * b * t_k
            ideal_evals += n + 2 * t_k
            record(k + 1)
    trace.x = x
    return trace


def prox_sgd_run(p: CompositeProblem, stepsize: float, b: int, K_steps: int,
                 seed: int = 0, x0=None, reference_value: Optional[float] = None,
                 timed: bool = True) -> RunTrace:
    """Constant-step proximal SGD with mini-batches.

    Records are written every ``ceil(n/b)`` steps (about one effective pass)
    and after the final step. A zero stepsize leaves the iterate unchanged.
    """
    if stepsize < 0:
        raise ValueError(f"stepsize must be nonnegative, got {stepsize}")
    if not 1 <= b <= p.n:
        raise ValueError(f"batch size must lie in [1, {p.n}], got {b}")
    rng = make_rng(seed)
    sampler = MinibatchSampler(rng, p.n)
    n = p.n
    every = math.ceil(n / b)
    x = _start_point(p, x0)
    trace = RunTrace(solver="sgd", b=b, n=n)
    clock = time.perf_counter
    t0 = clock()

    def record(step):
        val = p.objective_value(x)
        if not (math.isfinite(val) and np.all(np.isfinite(x))):
            raise DivergenceError(step // every, "objective")
        evals = step * b
        trace.records.append(EpochRecord(
            epoch=len(trace.records), objective=val,
            gap=_gap(val, reference_value), evaluations=evals, passes=evals / n,
            seconds=(clock() - t0) if timed else 0.0, ideal_passes=step / n,
        ))

    with np.errstate(over="ignore", invalid="ignore"):
        record(0)
        for step in range(1, K_steps + 1):
            batch = sampler.draw(b)
            if stepsize > 0:
                x = p.prox(stepsize, x - stepsize * p.mean_gradient(batch, x))
            if step % every == 0 or step == K_steps:
                record(step)
    trace.x = x
    return trace


@dataclass(frozen=True)
class Reference:
    x: np.ndarray
    value: float
    iterations: int
    converged: bool

    def __iter__(self):
        return iter((self.x, self.value))


def prox_gd_reference(p: CompositeProblem, tol: float = 1e-13,
                      max_iters: int = 1_000_000, x0=None) -> Reference:
    """Deterministic proximal gradient with stepsize ``1/L``.

    Stops once successive objective values differ by at most ``tol``. If
    ``max_iters`` is hit first, warns and returns the best point seen.
    """
    if not tol > 0:
        raise ValueError(f"tol must be positive, got {tol}")
    h = 1.0 / p.L
    y = _start_point(p, x0)
    val = p.objective_value(y)
    best_x, best_val = y, val
    for it in range(1, max_iters + 1):
        y = p.prox(h, y - h * p.full_gradient(y))
        new_val = p.objective_value(y)
        if not math.isfinite(new_val):
            raise DivergenceError(it)
        if new_val < best_val:
            best_x, best_val = y, new_val
        if abs(val - new_val) <= tol:
            return Reference(best_x, best_val, it, True)
        val = new_val
    warnings.warn(f"prox_gd_reference: tol {tol} not met in {max_iters} iterations",
                  RuntimeWarning, stacklevel=2)
    return Reference(best_x, best_val, max_iters, False)
