"""Convergence-rate evaluation and hyperparameter planning for mS2GD.

``rho`` is the guaranteed per-epoch contraction of the expected optimality
gap. :func:`rho_general` handles known strong-convexity lower bounds
``nu_f`` and ``nu_R``; :func:`rho_simplified` is its ``nu_f = nu_R = 0``
form. :func:`plan` returns the stepsize and inner-loop length that reach a
target ``rho`` with the least work for a fixed batch size.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Optional

from .sampling import alpha

__all__ = [
    "InfeasibleParameters",
    "UnreachableTarget",
    "RateInputs",
    "feasibility",
    "stepsize_bound",
    "safe_stepsize",
    "rho_general",
    "rho_simplified",
    "Plan",
    "plan",
    "optimal_stepsize",
    "optimal_inner_length",
    "SpeedupPoint",
    "SpeedupCurve",
    "speedup_curve",
]


class InfeasibleParameters(ValueError):
    """Raised when a rate is requested outside its domain of validity.

    ``condition`` names the violated requirement so callers can report it.
    """

    def __init__(self, condition: str, detail: str = ""):
        self.condition = condition
        self.detail = detail
        super().__init__(f"{condition}: {detail}" if detail else condition)


class UnreachableTarget(ValueError):
    def __init__(self, rho_target: float, b: int, detail: str = ""):
        self.rho_target = rho_target
        self.b = b
        super().__init__(
            f"rho unreachable at b={b} (target {rho_target})" + (f": {detail}" if detail else "")
        )


@dataclass(frozen=True)
class RateInputs:
    h: float
    m: int
    b: int
    n: int
    L: float
    mu: float
    nu_f: float = 0.0
    nu_R: float = 0.0

    @property
    def alpha(self) -> float:
        return alpha(self.n, self.b)

    @property
    def ratio(self) -> float:
        return (1.0 - self.h * self.nu_f) / (1.0 + self.h * self.nu_R)


def stepsize_bound(L: float, a: float, ratio: float = 1.0) -> float:
    """Right-hand side ``min{ratio / (4 L alpha), 1/L}`` of the stepsize condition.

    ``ratio`` depends on ``h`` itself, so this is an evaluation at a given ``h``,
    not a solved boundary.
    """
    cap = 1.0 / L
    if a == 0:
        return cap
    return min(ratio / (4.0 * L * a), cap)


def safe_stepsize(L: float, a: float, nu_f: float = 0.0, nu_R: float = 0.0,
                  safety: float = 0.9) -> float:
    """A stepsize that satisfies the stepsize condition with margin ``safety``.

    The ratio ``(1 - h nu_f) / (1 + h nu_R)`` only shrinks as ``h`` grows, so its
    value at ``h = 1/L`` lower-bounds it on the whole admissible range.
    """
    if not 0 < safety < 1:
        raise ValueError("safety must lie in (0, 1)")
    h_max = 1.0 / L
    if h_max * nu_f >= 1:
        raise InfeasibleParameters("h_nu_f_below_one", f"nu_f={nu_f} >= L={L}")
    ratio = (1.0 - h_max * nu_f) / (1.0 + h_max * nu_R)
    return safety * stepsize_bound(L, a, ratio)


def _geometric_sum(r: float, m: int) -> float:
    if r == 1.0:
        return float(m)
    return (1.0 - r**m) / (1.0 - r)


def feasibility(inp: RateInputs) -> dict[str, bool]:
    """Named flags for every condition the general rate needs."""
    flags = {
        "h_positive": inp.h > 0,
        "m_positive": inp.m >= 1,
        "batch_in_range": 1 <= inp.b <= inp.n,
        "h_nu_f_below_one": inp.h * inp.nu_f < 1,
    }
    if not all(flags.values()):
        flags.update(stepsize_condition=False, denominator_positive=False)
        return flags
    a = inp.alpha
    r = inp.ratio
    flags["stepsize_condition"] = inp.h < stepsize_bound(inp.L, a, r)
    den = 1.0 / (1.0 + inp.h * inp.nu_R) - 4.0 * inp.h * inp.L * a / (1.0 - inp.h * inp.nu_f)
    flags["denominator_positive"] = den > 0
    return flags


def _require(inp: RateInputs) -> None:
    for name, ok in feasibility(inp).items():
        if not ok:
            raise InfeasibleParameters(name, repr(inp))


def rho_general(inp: RateInputs) -> float:
    """Per-epoch contraction factor with lower bounds ``nu_f``, ``nu_R``."""
    _require(inp)
    h, m, L, mu = inp.h, inp.m, inp.L, inp.mu
    a = inp.alpha
    r = inp.ratio
    gamma = _geometric_sum(r, m)
    num = r**m / mu + 4.0 * h * h * L * a / (1.0 + h * inp.nu_R) * (gamma + r ** (m - 1))
    den = gamma * h * (1.0 / (1.0 + h * inp.nu_R) - 4.0 * h * L * a / (1.0 - h * inp.nu_f))
    return num / den


def rho_simplified(h: float, m: int, L: float, mu: float, alpha_b: float) -> float:
    """Contraction factor for ``nu_f = nu_R = 0``."""
    if not h > 0:
        raise InfeasibleParameters("h_positive", f"h={h}")
    if m < 1:
        raise InfeasibleParameters("m_positive", f"m={m}")
    c = 4.0 * h * L * alpha_b
    if c >= 1:
        raise InfeasibleParameters("stepsize_condition", f"4*h*L*alpha = {c} >= 1")
    return 1.0 / (m * h * mu * (1.0 - c)) + c * (m + 1) / (m * (1.0 - c))


# -- planner ------------------------------------------------------------------

def optimal_stepsize(rho: float, mu: float, L: float, a: float) -> float:
    """Work-minimizing stepsize before the ``1/L`` cap.

    Evaluated as ``e / (sqrt(c^2 + e) + c)``, which equals
    ``sqrt(c^2 + e) - c`` without its cancellation.
    """
    c = (1.0 + rho) / (rho * mu)
    e = 1.0 / (4.0 * mu * a * L)
    return e / (math.sqrt(c * c + e) + c)


def optimal_inner_length(rho: float, mu: float, L: float, a: float,
                         form: str = "expanded") -> float:
    """Minimal real inner-loop length at the uncapped optimal stepsize.

    ``form="expanded"`` is ``8 a L (1 + rho + sqrt(mu rho^2 / (4 a L) + (1+rho)^2)) / (mu rho^2)``;
    ``form="difference"`` is ``4 / (sqrt(rho^2 mu / (a L) + 4 (1+rho)^2) - 2 (1+rho))``.
    The two are algebraically equal; the first avoids cancellation.
    """
    if form == "expanded":
        s = math.sqrt(mu * rho * rho / (4.0 * a * L) + (1.0 + rho) ** 2)
        return 8.0 * a * L * (1.0 + rho + s) / (mu * rho * rho)
    if form == "difference":
        s = math.sqrt(rho * rho * mu / (a * L) + 4.0 * (1.0 + rho) ** 2)
        return 4.0 / (s - 2.0 * (1.0 + rho))
    raise ValueError(f"unknown form {form!r}")


@dataclass(frozen=True)
class Plan:
    """Work-optimal ``(h, m)`` for one batch size and target rate.

    ``regime`` is ``uncapped`` when the optimal stepsize is at most ``1/L``,
    ``capped_at_1_over_L`` otherwise, and ``degenerate_alpha_zero`` for the
    full batch. ``h_tilde`` is infinite in the degenerate case.
    """

    rho_target: float
    b: int
    n: int
    L: float
    mu: float
    alpha: float
    h_tilde: float
    h_star: float
    m_star: float
    regime: str
    predicted_rho: float
    predicted_rho_int: float

    @property
    def m_star_int(self) -> int:
        return math.ceil(self.m_star - 1e-9 * self.m_star)

    @property
    def work(self) -> float:
        """Stochastic component gradients per epoch, ``b * m``, in the rate's units."""
        return self.b * self.m_star

    def as_dict(self) -> dict:
        return {
            "rho_target": self.rho_target,
            "b": self.b,
            "n": self.n,
            "L": self.L,
            "mu": self.mu,
            "alpha": self.alpha,
            "h_tilde": self.h_tilde if math.isfinite(self.h_tilde) else None,
            "h_star": self.h_star,
            "m_star_real": self.m_star,
            "m_star_int": self.m_star_int,
            "regime": self.regime,
            "predicted_rho": self.predicted_rho,
            "predicted_rho_int": self.predicted_rho_int,
        }


def _validate_plan_inputs(rho_target, b, n, L, mu):
    if not 0 < rho_target < 1:
        raise ValueError(f"rho_target must lie in (0, 1), got {rho_target}")
    if not 1 <= b <= n:
        raise ValueError(f"batch size must lie in [1, {n}], got {b}")
    if not L > 0 or not mu > 0:
        raise ValueError("L and mu must be positive")


def plan(rho_target: float, b: int, n: int, L: float, mu: float) -> Plan:
    """Stepsize and inner-loop length that reach ``rho_target`` with least work.

    Raises
    ------
    UnreachableTarget
        In the capped regime when ``rho_target <= 4 alpha (1 + rho_target)``.
    """
    _validate_plan_inputs(rho_target, b, n, L, mu)
    rho = rho_target
    a = alpha(n, b)
    if a == 0:
        h_tilde = math.inf
        h_star = 1.0 / L
        m_star = (L / mu) / rho
        regime = "degenerate_alpha_zero"
    else:
        h_tilde = optimal_stepsize(rho, mu, L, a)
        if h_tilde <= 1.0 / L:
            regime = "uncapped"
            h_star = h_tilde
            m_star = optimal_inner_length(rho, mu, L, a)
        else:
            regime = "capped_at_1_over_L"
            h_star = 1.0 / L
            den = rho - 4.0 * a * (1.0 + rho)
            if den <= 0:
                raise UnreachableTarget(rho, b, f"rho - 4*alpha*(1+rho) = {den:.6g} <= 0")
            m_star = (L / mu + 4.0 * a) / den
    pr = rho_simplified(h_star, m_star, L, mu, a)
    p = Plan(rho_target=rho, b=b, n=n, L=L, mu=mu, alpha=a, h_tilde=h_tilde,
             h_star=h_star, m_star=m_star, regime=regime, predicted_rho=pr,
             predicted_rho_int=math.nan)
    pr_int = rho_simplified(h_star, p.m_star_int, L, mu, a)
    return Plan(**{**p.__dict__, "predicted_rho_int": pr_int})


# -- speedup curves -----------------------------------------------------------

@dataclass(frozen=True)
class SpeedupPoint:
    b: int
    regime: str
    h_star: float = math.nan
    m_star: float = math.nan
    work_ratio: float = math.nan
    beyond_threshold: bool = False
    error: Optional[str] = None


@dataclass(frozen=True)
class SpeedupCurve:
    rho_target: float
    n: int
    L: float
    mu: float
    points: list[SpeedupPoint] = field(default_factory=list)
    threshold: Optional[int] = None

    def __iter__(self):
        return iter(self.points)

    def __len__(self):
        return len(self.points)


def speedup_curve(rho_target: float, n: int, L: float, mu: float,
                  b_grid: Iterable[int]) -> SpeedupCurve:
    """Plan every ``b`` in ``b_grid`` and compare its work with ``b = 1``.

    ``work_ratio = m*(1) / (b * m*(b))``; values above 1 mean mini-batching
    needs fewer component gradients than single samples for the same rate.
    ``threshold`` is the first ``b`` whose optimal stepsize exceeds ``1/L``.
    Planner failures become points with ``regime="error"``.
    """
    base = plan(rho_target, 1, n, L, mu)
    points = []
    threshold = None
    for b in b_grid:
        b = int(b)
        try:
            p = plan(rho_target, b, n, L, mu)
        except ValueError as exc:
            if threshold is None:
                threshold = b
            points.append(SpeedupPoint(b=b, regime="error", beyond_threshold=True,
                                       error=str(exc)))
            continue
        if threshold is None and p.regime != "uncapped":
            threshold = b
        points.append(SpeedupPoint(
            b=b, regime=p.regime, h_star=p.h_star, m_star=p.m_star,
            work_ratio=base.m_star / (b * p.m_star),
            beyond_threshold=threshold is not None,
        ))
    return SpeedupCurve(rho_target=rho_target, n=n, L=L, mu=mu,
                        points=points, threshold=threshold)
